//! One module per subcommand group, plus shared argument blocks.

pub mod common;

pub mod dro;
pub mod eval;
pub mod export;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod retarget;
pub mod robot;
