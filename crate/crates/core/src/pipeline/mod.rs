//! The dataset lifecycle: grasp records, object alignment against category
//! references, the three-gate filter with review reporting, the retrieval
//! distance-matrix predictor, and the accumulation loop that keeps decoded
//! grasps whose evaluation succeeds.

mod align;
mod augment;
mod filter;
mod record;

pub use align::{align_object, AlignOptions};
pub use augment::{
    augment_loop, retrieval_predictor, AugmentStats, PerturbConfig, TrainingEntry,
};
pub use filter::{
    filter_dataset, FilterConfig, FilterStats, GateThresholds, ReviewEntry, ReviewReport,
};
pub use record::{GraspRecord, Provenance};
