//! Accuracy metrics for estimated normals against ground truth.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use std::fmt;

/// Per-cloud orientation accuracy.
///
/// `ae_pcd` is the mean of `(1 - gt . recon) / 2` over points (0 for a
/// perfect match, 1 for a full flip). `p_co` is the percentage of points
/// whose estimated normal has strictly positive dot product with ground
/// truth; a zero or perpendicular estimate counts as flipped.
#[derive(Debug, Clone)]
pub struct NormalAccuracyReport {
    pub ae_pcd: f64,
    /// Percentage in `[0, 100]`.
    pub p_co: f64,
    pub per_point_errors: Vec<f64>,
    pub flipped_count: usize,
}

impl NormalAccuracyReport {
    pub fn point_count(&self) -> usize {
        self.per_point_errors.len()
    }
}

impl fmt::Display for NormalAccuracyReport {
    /// Flat key-value block, one metric per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "points: {}", self.point_count())?;
        writeln!(f, "ae_pcd: {:.6}", self.ae_pcd)?;
        writeln!(f, "p_co: {:.4}", self.p_co)?;
        write!(f, "flipped_count: {}", self.flipped_count)
    }
}

/// Scores estimated unit normals against ground-truth unit normals.
///
/// Inputs are expected to be unit or zero vectors; a zero entry on either
/// side scores the worst-case-neutral error 0.5 and counts as flipped.
pub fn angular_error(recon: &[Vec3], gt: &[Vec3]) -> Result<NormalAccuracyReport> {
    if recon.len() != gt.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            actual: recon.len(),
        });
    }
    if recon.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut per_point_errors = Vec::with_capacity(recon.len());
    let mut flipped_count = 0usize;
    let mut sum = 0.0;
    for (r, g) in recon.iter().zip(gt) {
        let dot = r.dot(*g);
        let err = (1.0 - dot) * 0.5;
        sum += err;
        per_point_errors.push(err);
        if dot <= 0.0 {
            flipped_count += 1;
        }
    }
    let n = recon.len();
    Ok(NormalAccuracyReport {
        ae_pcd: sum / n as f64,
        p_co: 100.0 * (n - flipped_count) as f64 / n as f64,
        per_point_errors,
        flipped_count,
    })
}
