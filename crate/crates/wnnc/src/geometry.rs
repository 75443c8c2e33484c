//! Core numeric types, the point-cloud container and the normalized solve frame.
//!
//! All solver math runs in a canonical frame where the input cloud is
//! uniformly scaled and centered so that its longest axis spans
//! `[-10/11, 10/11]`, leaving a `1/11` margin to the faces of the `[-1, 1]^3`
//! root cube. The transform back to input coordinates is kept alongside the
//! normalized positions.

use crate::error::{Error, Result};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// Half-extent of the longest cloud axis after normalization.
pub const NORMALIZED_HALF_EXTENT: f64 = 10.0 / 11.0;

/// A 3D vector of `f64` components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    #[inline]
    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    #[inline]
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 0.0 {
            Some(self * (1.0 / n))
        } else {
            None
        }
    }

    #[inline]
    pub fn min_components(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.x.min(other.x),
            self.y.min(other.y),
            self.z.min(other.z),
        )
    }

    #[inline]
    pub fn max_components(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.x.max(other.x),
            self.y.max(other.y),
            self.z.max(other.z),
        )
    }

    /// Largest component.
    #[inline]
    pub fn max_element(self) -> f64 {
        self.x.max(self.y).max(self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, rhs: Vec3) {
        *self = *self + rhs;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, rhs: Vec3) {
        *self = *self - rhs;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, rhs: f64) -> Vec3 {
        Vec3::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

/// Uniform scale plus translation: maps `p` to `p * scale + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub translation: Vec3,
}

impl SimilarityTransform {
    pub const IDENTITY: SimilarityTransform = SimilarityTransform {
        scale: 1.0,
        translation: Vec3::ZERO,
    };

    #[inline]
    pub fn apply(&self, p: Vec3) -> Vec3 {
        p * self.scale + self.translation
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let inv = 1.0 / self.scale;
        SimilarityTransform {
            scale: inv,
            translation: -self.translation * inv,
        }
    }
}

/// Points in the normalized solve frame plus the transform back to input
/// coordinates.
///
/// Invariants: at least one point, every position finite and inside
/// `[-1, 1]^3`.
#[derive(Debug, Clone)]
pub struct PointCloud {
    positions: Vec<Vec3>,
    to_input_frame: SimilarityTransform,
}

impl PointCloud {
    /// Wraps positions that are already in the normalized frame.
    ///
    /// `to_input_frame` maps them back to the caller's coordinates; pass
    /// [`SimilarityTransform::IDENTITY`] for synthetic data that lives in the
    /// solve frame directly.
    pub fn from_normalized(
        positions: Vec<Vec3>,
        to_input_frame: SimilarityTransform,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptyCloud);
        }
        for p in &positions {
            if !p.is_finite() {
                return Err(Error::InvalidCoordinate);
            }
            if p.x.abs() > 1.0 || p.y.abs() > 1.0 || p.z.abs() > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "position ({}, {}, {}) outside the [-1, 1]^3 solve frame",
                    p.x, p.y, p.z
                )));
            }
        }
        if !(to_input_frame.scale > 0.0) || !to_input_frame.scale.is_finite() {
            return Err(Error::InvalidParameter(
                "transform scale must be positive and finite".into(),
            ));
        }
        Ok(PointCloud {
            positions,
            to_input_frame,
        })
    }

    #[inline]
    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn to_input_frame(&self) -> SimilarityTransform {
        self.to_input_frame
    }

    /// Axis-aligned bounding box of the normalized positions.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = self.positions[0];
        let mut hi = self.positions[0];
        for p in &self.positions[1..] {
            lo = lo.min_components(*p);
            hi = hi.max_components(*p);
        }
        (lo, hi)
    }

    /// Longest bounding-box edge; zero means all points coincide.
    pub fn max_extent(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).max_element()
    }

    /// Positions mapped back to input coordinates.
    pub fn input_positions(&self) -> Vec<Vec3> {
        self.positions
            .iter()
            .map(|p| self.to_input_frame.apply(*p))
            .collect()
    }
}

/// Scales and centers raw positions so the longest axis spans
/// `[-10/11, 10/11]`, and returns the cloud together with the inverse
/// transform.
///
/// A cloud whose points all coincide is centered with scale 1; the solver
/// rejects it later.
pub fn normalize_cloud(raw_positions: &[Vec3]) -> Result<PointCloud> {
    if raw_positions.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut lo = raw_positions[0];
    let mut hi = raw_positions[0];
    for p in raw_positions {
        if !p.is_finite() {
            return Err(Error::InvalidCoordinate);
        }
        lo = lo.min_components(*p);
        hi = hi.max_components(*p);
    }
    let center = (lo + hi) * 0.5;
    let longest = (hi - lo).max_element();
    let scale = if longest > 0.0 {
        2.0 * NORMALIZED_HALF_EXTENT / longest
    } else {
        1.0
    };
    let positions = raw_positions.iter().map(|p| (*p - center) * scale).collect();
    PointCloud::from_normalized(
        positions,
        SimilarityTransform {
            scale: 1.0 / scale,
            translation: center,
        },
    )
}

/// Per-point oriented surface elements: direction is the normal, magnitude an
/// area-like scale.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    mu: Vec<Vec3>,
}

impl NormalField {
    pub fn new(mu: Vec<Vec3>) -> Result<Self> {
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCoordinate);
        }
        Ok(NormalField { mu })
    }

    pub fn zeros(len: usize) -> Self {
        NormalField {
            mu: vec![Vec3::ZERO; len],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[Vec3] {
        &self.mu
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Vec3] {
        &mut self.mu
    }

    pub fn into_vec(self) -> Vec<Vec3> {
        self.mu
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vec3> {
        self.mu.iter()
    }
}

/// Per-point reals; holds operator outputs and right-hand sides.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCoordinate);
        }
        Ok(ScalarField { values })
    }

    /// Constant field; used for the one-half right-hand side.
    pub fn constant(value: f64, len: usize) -> Self {
        ScalarField {
            values: vec![value; len],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

/// Turns oriented surface elements into unit normals.
///
/// Directions are invariant under the similarity transform back to input
/// coordinates, so the returned normals are valid in both frames. Entries
/// with zero magnitude come back as the zero vector and their indices are
/// reported alongside.
pub fn denormalize_normals(
    field: &NormalField,
    cloud: &PointCloud,
) -> Result<(NormalField, Vec<usize>)> {
    if field.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            expected: cloud.len(),
            actual: field.len(),
        });
    }
    let mut flagged = Vec::new();
    let mut out = Vec::with_capacity(field.len());
    for (i, mu) in field.iter().enumerate() {
        match mu.normalized() {
            Some(n) => out.push(n),
            None => {
                flagged.push(i);
                out.push(Vec3::ZERO);
            }
        }
    }
    Ok((NormalField { mu: out }, flagged))
}
