//! Ordered 3-D point clouds with optional per-point segment labels.

use nalgebra::{Isometry3, Point3};

use crate::{Error, Result};

/// An ordered list of 3-D points in meters.
///
/// `segments`, when present, labels each point with the robot link index it
/// was sampled from (object clouds carry no labels). Ordering is stable and
/// meaningful: the distance-matrix codec addresses points by index.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub segments: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        Self::with_segments(points, None)
    }

    pub fn with_segments(points: Vec<Point3<f64>>, segments: Option<Vec<u32>>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !p.coords.iter().all(|c| c.is_finite()) {
                return Err(Error::Invalid(format!("non-finite point at index {i}")));
            }
        }
        if let Some(seg) = &segments {
            if seg.len() != points.len() {
                return Err(Error::dim(points.len(), seg.len(), "segment labels"));
            }
        }
        Ok(PointCloud { points, segments })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point3<f64> {
        let mut sum = nalgebra::Vector3::zeros();
        for p in &self.points {
            sum += p.coords;
        }
        let n = self.points.len().max(1) as f64;
        Point3::from(sum / n)
    }

    /// Apply a rigid transform to every point, keeping labels.
    pub fn transformed(&self, iso: &Isometry3<f64>) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| iso * p).collect(),
            segments: self.segments.clone(),
        }
    }

    /// Points carrying one of the given segment labels.
    pub fn filter_segments(&self, keep: &dyn Fn(u32) -> bool) -> PointCloud {
        match &self.segments {
            None => self.clone(),
            Some(seg) => {
                let mut points = Vec::new();
                let mut labels = Vec::new();
                for (p, &s) in self.points.iter().zip(seg.iter()) {
                    if keep(s) {
                        points.push(*p);
                        labels.push(s);
                    }
                }
                PointCloud {
                    points,
                    segments: Some(labels),
                }
            }
        }
    }

    /// Content hash of the coordinates (see [`crate::math::hash_points`]).
    pub fn content_hash(&self) -> u64 {
        crate::math::hash_points(&self.points)
    }
}
