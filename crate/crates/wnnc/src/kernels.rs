//! Closed-form derivatives of the free-space Laplace Green's function
//! `phi(y) = 1/(4*pi*|y|)`, plus the hard-cutoff variants that zero every
//! interaction closer than a smoothing width `w`.
//!
//! The cutoff uses a strict comparison: contributions vanish for `|y| < w`
//! and are left untouched at `|y| == w`.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use std::f64::consts::PI;

const INV_FOUR_PI: f64 = 1.0 / (4.0 * PI);

/// Cutoff radius below which kernel interactions are zeroed.
///
/// Must be strictly positive so that the self term of a summation (distance
/// zero) is always suppressed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingWidth(f64);

impl SmoothingWidth {
    pub fn new(w: f64) -> Result<Self> {
        if w > 0.0 && w.is_finite() {
            Ok(SmoothingWidth(w))
        } else {
            Err(Error::InvalidParameter(format!(
                "smoothing width must be positive and finite, got {w}"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// Gradient of the Green's function: `-y / (4*pi*|y|^3)`.
///
/// Errors with [`Error::SingularEvaluation`] at the origin; summations must
/// go through [`grad_phi_smoothed`] instead.
pub fn grad_phi(y: Vec3) -> Result<Vec3> {
    let r2 = y.norm_squared();
    if r2 == 0.0 {
        return Err(Error::SingularEvaluation);
    }
    Ok(grad_phi_raw(y, r2))
}

#[inline]
fn grad_phi_raw(y: Vec3, r2: f64) -> Vec3 {
    let r = r2.sqrt();
    y * (-INV_FOUR_PI / (r2 * r))
}

/// [`grad_phi`] with the hard cutoff: zero for `|y| < w`.
#[inline]
pub fn grad_phi_smoothed(y: Vec3, w: SmoothingWidth) -> Vec3 {
    let r2 = y.norm_squared();
    if r2 < w.0 * w.0 {
        Vec3::ZERO
    } else {
        grad_phi_raw(y, r2)
    }
}

/// Symmetric 3x3 matrix stored as its six independent entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat3 {
    pub xx: f64,
    pub xy: f64,
    pub xz: f64,
    pub yy: f64,
    pub yz: f64,
    pub zz: f64,
}

impl SymMat3 {
    pub const ZERO: SymMat3 = SymMat3 {
        xx: 0.0,
        xy: 0.0,
        xz: 0.0,
        yy: 0.0,
        yz: 0.0,
        zz: 0.0,
    };

    #[inline]
    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.xx * v.x + self.xy * v.y + self.xz * v.z,
            self.xy * v.x + self.yy * v.y + self.yz * v.z,
            self.xz * v.x + self.yz * v.y + self.zz * v.z,
        )
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    /// Entry at (row, col); symmetric, so order does not matter.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        match (row.min(col), row.max(col)) {
            (0, 0) => self.xx,
            (0, 1) => self.xy,
            (0, 2) => self.xz,
            (1, 1) => self.yy,
            (1, 2) => self.yz,
            (2, 2) => self.zz,
            _ => panic!("index out of range"),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.xx
            .abs()
            .max(self.xy.abs())
            .max(self.xz.abs())
            .max(self.yy.abs())
            .max(self.yz.abs())
            .max(self.zz.abs())
    }
}

/// Hessian of the Green's function:
/// `-I/(4*pi*|y|^3) + 3/(4*pi*|y|^5) * y y^T`.
///
/// Traceless (harmonic) away from the origin.
pub fn hess_phi(y: Vec3) -> Result<SymMat3> {
    let r2 = y.norm_squared();
    if r2 == 0.0 {
        return Err(Error::SingularEvaluation);
    }
    Ok(hess_phi_raw(y, r2))
}

#[inline]
fn hess_phi_raw(y: Vec3, r2: f64) -> SymMat3 {
    let r = r2.sqrt();
    let a = -INV_FOUR_PI / (r2 * r);
    let b = 3.0 * INV_FOUR_PI / (r2 * r2 * r);
    SymMat3 {
        xx: a + b * y.x * y.x,
        xy: b * y.x * y.y,
        xz: b * y.x * y.z,
        yy: a + b * y.y * y.y,
        yz: b * y.y * y.z,
        zz: a + b * y.z * y.z,
    }
}

/// [`hess_phi`] with the hard cutoff: the zero matrix for `|y| < w`.
#[inline]
pub fn hess_phi_smoothed(y: Vec3, w: SmoothingWidth) -> SymMat3 {
    let r2 = y.norm_squared();
    if r2 < w.0 * w.0 {
        SymMat3::ZERO
    } else {
        hess_phi_raw(y, r2)
    }
}

/// Fused `grad_phi_smoothed(y, w).dot(v)` without the intermediate vector.
///
/// Used by the operator hot loops.
#[inline]
pub fn grad_phi_dot_smoothed(y: Vec3, v: Vec3, w: SmoothingWidth) -> f64 {
    let r2 = y.norm_squared();
    if r2 < w.0 * w.0 {
        return 0.0;
    }
    let r = r2.sqrt();
    -y.dot(v) * INV_FOUR_PI / (r2 * r)
}

/// Matrix-free `hess_phi_smoothed(y, w) * v`.
///
/// Used by the operator hot loops; agrees with forming the matrix and
/// multiplying.
#[inline]
pub fn hess_apply_smoothed(y: Vec3, v: Vec3, w: SmoothingWidth) -> Vec3 {
    let r2 = y.norm_squared();
    if r2 < w.0 * w.0 {
        return Vec3::ZERO;
    }
    let r = r2.sqrt();
    let a = -INV_FOUR_PI / (r2 * r);
    let b = 3.0 * INV_FOUR_PI / (r2 * r2 * r);
    v * a + y * (b * y.dot(v))
}
