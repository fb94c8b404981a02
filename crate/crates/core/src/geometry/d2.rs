//! D2 shape distributions and the 1-D Wasserstein distance between them.
//!
//! The D2 descriptor is the normalized histogram of Euclidean distances
//! between random point pairs drawn from a cloud. It is invariant to rigid
//! motions of the cloud (the distances don't change) and scales linearly
//! under uniform scaling, which makes it a cheap shape signature for
//! comparing a reconstructed object against a clean reference.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::cloud::PointCloud;
use crate::math::seeded_rng;

/// Default number of sampled pairs for [`d2_descriptor`].
pub const D2_DEFAULT_PAIRS: usize = 100_000;
/// Default histogram bin count.
pub const D2_DEFAULT_BINS: usize = 64;
/// Default `range_max` as a multiple of the reference bbox diagonal.
pub const D2_RANGE_FACTOR: f64 = 1.25;

/// Normalized histogram of pairwise distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D2Histogram {
    /// Uniform bin edges in meters, `bins + 1` entries, strictly increasing.
    pub edges: Vec<f64>,
    /// Nonnegative masses summing to 1.
    pub masses: Vec<f64>,
    /// Number of distance samples the histogram was built from.
    pub pairs: usize,
    /// Seed of the pair sampler; `None` for the exhaustive variant.
    pub seed: Option<u64>,
}

impl D2Histogram {
    pub fn bins(&self) -> usize {
        self.masses.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    /// Checks invariants: edge monotonicity, mass nonnegativity, unit sum.
    pub fn validate(&self) -> Result<()> {
        if self.edges.len() != self.masses.len() + 1 {
            return Err(Error::dim(self.masses.len() + 1, self.edges.len(), "histogram edges"));
        }
        if !self.edges.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Invalid("histogram edges not strictly increasing".into()));
        }
        if self.masses.iter().any(|&m| m < 0.0) {
            return Err(Error::Invalid("negative histogram mass".into()));
        }
        let sum: f64 = self.masses.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("histogram masses sum to {sum}, not 1")));
        }
        Ok(())
    }
}

fn histogram_from_distances(
    distances: impl Iterator<Item = f64>,
    count: usize,
    bins: usize,
    range_max: f64,
    seed: Option<u64>,
) -> D2Histogram {
    let mut masses = vec![0.0f64; bins];
    let scale = bins as f64 / range_max;
    for d in distances {
        // Clip into [0, range_max]: over-range mass lands in the last bin.
        let b = ((d * scale) as usize).min(bins - 1);
        masses[b] += 1.0;
    }
    for m in &mut masses {
        *m /= count as f64;
    }
    let edges = (0..=bins).map(|i| i as f64 * range_max / bins as f64).collect();
    D2Histogram { edges, masses, pairs: count, seed }
}

/// D2 descriptor from `pairs` uniformly sampled (unordered, distinct) point
/// pairs. Deterministic per `seed`.
pub fn d2_descriptor(
    cloud: &PointCloud,
    pairs: usize,
    bins: usize,
    range_max: f64,
    seed: u64,
) -> Result<D2Histogram> {
    let n = cloud.len();
    if n < 2 {
        return Err(Error::Invalid(format!("D2 needs at least 2 points, got {n}")));
    }
    if pairs == 0 || bins == 0 {
        return Err(Error::Invalid("D2 pairs and bins must be positive".into()));
    }
    if !(range_max > 0.0 && range_max.is_finite()) {
        return Err(Error::Invalid(format!("D2 range_max must be positive, got {range_max}")));
    }
    let mut rng = seeded_rng(seed);
    let pts = &cloud.points;
    let dists = (0..pairs).map(|_| {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1; // Uniform over distinct pairs without rejection loops.
        }
        (pts[i] - pts[j]).norm()
    });
    let hist = histogram_from_distances(dists, pairs, bins, range_max, Some(seed));
    Ok(hist)
}

/// D2 descriptor over all `n(n-1)/2` distinct pairs (no sampling noise);
/// practical for clouds up to a few thousand points.
pub fn d2_descriptor_exhaustive(
    cloud: &PointCloud,
    bins: usize,
    range_max: f64,
) -> Result<D2Histogram> {
    let n = cloud.len();
    if n < 2 {
        return Err(Error::Invalid(format!("D2 needs at least 2 points, got {n}")));
    }
    if bins == 0 {
        return Err(Error::Invalid("D2 bins must be positive".into()));
    }
    if !(range_max > 0.0 && range_max.is_finite()) {
        return Err(Error::Invalid(format!("D2 range_max must be positive, got {range_max}")));
    }
    let pts = &cloud.points;
    let count = n * (n - 1) / 2;
    let dists = (0..n).flat_map(|i| {
        let pi = pts[i];
        pts[i + 1..].iter().map(move |pj| (pi - pj).norm())
    });
    Ok(histogram_from_distances(dists, count, bins, range_max, None))
}

/// 1-D Wasserstein-1 distance between two histograms on identical edges:
/// `W₁ = Σ |CDF_a − CDF_b| × bin width`.
pub fn wasserstein_1d(a: &D2Histogram, b: &D2Histogram) -> Result<f64> {
    if a.edges.len() != b.edges.len()
        || a.edges.iter().zip(&b.edges).any(|(x, y)| (x - y).abs() > 1e-12)
    {
        return Err(Error::Invalid("histograms have mismatched bin edges".into()));
    }
    let width = a.bin_width();
    let mut cdf_a = 0.0;
    let mut cdf_b = 0.0;
    let mut w = 0.0;
    for (ma, mb) in a.masses.iter().zip(&b.masses) {
        cdf_a += ma;
        cdf_b += mb;
        w += (cdf_a - cdf_b).abs() * width;
    }
    Ok(w)
}

/// Total-variation distance `½ Σ |a_i − b_i|` between two histograms with
/// identical edges. Used for statistical invariance checks.
pub fn total_variation(a: &D2Histogram, b: &D2Histogram) -> Result<f64> {
    if a.edges.len() != b.edges.len() {
        return Err(Error::Invalid("histograms have mismatched bin edges".into()));
    }
    Ok(a.masses.iter().zip(&b.masses).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0)
}
