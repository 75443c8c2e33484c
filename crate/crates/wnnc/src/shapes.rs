//! Synthetic surface samplers with analytic ground-truth normals, and the
//! dense reference oracle the treecode is validated against.
//!
//! Samplers are deterministic given a seed, draw area-uniform surface points,
//! and optionally perturb positions with isotropic Gaussian noise whose
//! standard deviation is a fraction of the clean bounding-box diagonal.
//! Ground-truth normals always belong to the pre-noise surface points.
//!
//! Two sampling modes exist. [`SamplingMode::Even`] places points on
//! low-discrepancy lattices (Fibonacci on spheres, golden-ratio lattices
//! elsewhere), the synthetic analog of the evenly-spaced scan samplings that
//! orientation benchmarks use; it leaves no near-coincident pairs, so small
//! smoothing widths stay meaningful. [`SamplingMode::Random`] draws
//! independent area-weighted samples, which is the harsher Poisson-like case
//! with close pairs at every density.

use crate::error::{Error, Result};
use crate::geometry::{NormalField, PointCloud, ScalarField, Vec3};
use crate::kernels::SmoothingWidth;
use crate::operators::{FieldOperators, OperatorBackend};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::TAU;

/// Shape family plus its geometric parameters (input-frame units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeKind {
    Sphere {
        radius: f64,
    },
    Torus {
        major_radius: f64,
        minor_radius: f64,
    },
    /// Axis-aligned box given by its full edge lengths.
    Box {
        extents: Vec3,
    },
    /// Two disjoint spheres of equal radius with centers `separation` apart
    /// on the x axis.
    TwoSpheres {
        radius: f64,
        separation: f64,
    },
}

impl ShapeKind {
    /// Canonical shapes addressable by name from the command line.
    pub fn by_name(name: &str) -> Option<ShapeKind> {
        match name.to_ascii_lowercase().as_str() {
            "sphere" => Some(ShapeKind::Sphere { radius: 1.0 }),
            "torus" => Some(ShapeKind::Torus {
                major_radius: 1.0,
                minor_radius: 0.3,
            }),
            "box" => Some(ShapeKind::Box {
                extents: Vec3::new(1.6, 1.2, 0.8),
            }),
            "twospheres" | "two-spheres" | "two_spheres" => Some(ShapeKind::TwoSpheres {
                radius: 0.7,
                separation: 2.4,
            }),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ShapeKind::Sphere { radius } => radius > 0.0 && radius.is_finite(),
            ShapeKind::Torus {
                major_radius,
                minor_radius,
            } => {
                major_radius.is_finite()
                    && minor_radius.is_finite()
                    && minor_radius > 0.0
                    && major_radius > minor_radius
            }
            ShapeKind::Box { extents } => {
                extents.is_finite() && extents.x > 0.0 && extents.y > 0.0 && extents.z > 0.0
            }
            ShapeKind::TwoSpheres { radius, separation } => {
                radius > 0.0 && radius.is_finite() && separation > 2.0 * radius
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid shape parameters: {self:?}"
            )))
        }
    }
}

/// How surface points are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// Low-discrepancy, evenly spaced, area-uniform placement (seeded by a
    /// random rotation or lattice shift).
    #[default]
    Even,
    /// Independent area-weighted draws.
    Random,
}

/// A reproducible sampling request.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticShape {
    pub kind: ShapeKind,
    pub samples: usize,
    /// Noise standard deviation as a fraction of the clean bounding-box
    /// diagonal; zero disables noise.
    pub noise_sigma: f64,
    pub seed: u64,
    pub sampling: SamplingMode,
}

/// Sampler output in input-frame coordinates.
#[derive(Debug, Clone)]
pub struct ShapeSample {
    /// Surface samples, noisy when requested.
    pub positions: Vec<Vec3>,
    /// Unit normals of the pre-noise surface points.
    pub gt_normals: Vec<Vec3>,
    /// Connected-component label per point (nonzero only for multi-part shapes).
    pub components: Vec<u32>,
}

/// Draws `shape.samples` area-uniform surface points with analytic normals.
pub fn sample_shape(shape: &SyntheticShape) -> Result<ShapeSample> {
    shape.kind.validate()?;
    if shape.samples == 0 {
        return Err(Error::InvalidParameter("sample count must be >= 1".into()));
    }
    if !(shape.noise_sigma >= 0.0) || !shape.noise_sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be finite and >= 0, got {}",
            shape.noise_sigma
        )));
    }
    let n = shape.samples;
    let mut rng = ChaCha8Rng::seed_from_u64(shape.seed);
    let (mut positions, normals, components) = match shape.sampling {
        SamplingMode::Even => sample_even(shape.kind, n, &mut rng),
        SamplingMode::Random => sample_random(shape.kind, n, &mut rng),
    };

    if shape.noise_sigma > 0.0 {
        let mut lo = positions[0];
        let mut hi = positions[0];
        for p in &positions {
            lo = lo.min_components(*p);
            hi = hi.max_components(*p);
        }
        let diagonal = (hi - lo).norm();
        let sigma = shape.noise_sigma * diagonal;
        let gauss = Normal::new(0.0, sigma)
            .map_err(|e| Error::InvalidParameter(format!("noise distribution: {e}")))?;
        for p in &mut positions {
            *p += Vec3::new(
                gauss.sample(&mut rng),
                gauss.sample(&mut rng),
                gauss.sample(&mut rng),
            );
        }
    }

    Ok(ShapeSample {
        positions,
        gt_normals: normals,
        components,
    })
}


type SampledSurface = (Vec<Vec3>, Vec<Vec3>, Vec<u32>);

fn sample_random(kind: ShapeKind, n: usize, rng: &mut ChaCha8Rng) -> SampledSurface {
    let mut positions = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut components = vec![0u32; n];
    match kind {
        ShapeKind::Sphere { radius } => {
            for _ in 0..n {
                let dir = sphere_dir(rng);
                positions.push(dir * radius);
                normals.push(dir);
            }
        }
        ShapeKind::Torus {
            major_radius: big_r,
            minor_radius: r,
        } => {
            for _ in 0..n {
                let theta = rng.random_range(0.0..TAU);
                // rejection on the tube angle makes the draw area-uniform:
                // the area element carries a factor (R + r cos psi)
                let psi = loop {
                    let cand = rng.random_range(0.0..TAU);
                    let accept = (big_r + r * cand.cos()) / (big_r + r);
                    if rng.random_range(0.0..1.0) <= accept {
                        break cand;
                    }
                };
                let (p, nrm) = torus_point(big_r, r, theta, psi);
                positions.push(p);
                normals.push(nrm);
            }
        }
        ShapeKind::Box { extents } => {
            let areas = box_face_areas(extents);
            let total: f64 = 2.0 * areas.iter().sum::<f64>();
            for _ in 0..n {
                let mut pick = rng.random_range(0.0..total);
                let mut face = 5;
                'outer: for a in 0..3 {
                    for s in 0..2 {
                        if pick < areas[a] {
                            face = 2 * a + s;
                            break 'outer;
                        }
                        pick -= areas[a];
                    }
                }
                let u = rng.random_range(-1.0..1.0);
                let v = rng.random_range(-1.0..1.0);
                let (p, nrm) = box_face_point(extents, face, u, v);
                positions.push(p);
                normals.push(nrm);
            }
        }
        ShapeKind::TwoSpheres { radius, separation } => {
            // equal radii carry equal area, so an even split stays uniform
            let centers = two_sphere_centers(separation);
            for i in 0..n {
                let which = i % 2;
                let dir = sphere_dir(rng);
                positions.push(centers[which] + dir * radius);
                normals.push(dir);
                components[i] = which as u32;
            }
        }
    }
    (positions, normals, components)
}

fn sample_even(kind: ShapeKind, n: usize, rng: &mut ChaCha8Rng) -> SampledSurface {
    let mut positions = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut components = vec![0u32; n];
    match kind {
        ShapeKind::Sphere { radius } => {
            let rotate = seeded_rotation(rng);
            fibonacci_sphere(n, radius, Vec3::ZERO, &rotate, &mut positions, &mut normals);
        }
        ShapeKind::Torus {
            major_radius: big_r,
            minor_radius: r,
        } => {
            // golden-angle spiral: the tube angle sweeps its area-weighted
            // inverse CDF once while the ring angle advances by the golden
            // ratio, giving an even area-uniform cover
            let shift_t: f64 = rng.random_range(0.0..1.0);
            let shift_theta: f64 = rng.random_range(0.0..1.0);
            let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
            for k in 0..n {
                let t = ((k as f64 + 0.5) / n as f64 + shift_t).fract();
                let theta = TAU * (k as f64 * inv_phi + shift_theta).fract();
                let psi = torus_tube_angle(big_r, r, t);
                let (p, nrm) = torus_point(big_r, r, theta, psi);
                positions.push(p);
                normals.push(nrm);
            }
        }
        ShapeKind::Box { extents } => {
            let areas = box_face_areas(extents);
            let weights = [
                areas[0], areas[0], areas[1], areas[1], areas[2], areas[2],
            ];
            let counts = allocate_proportionally(&weights, n);
            // R2 lattice constants (inverse powers of the plastic number)
            let (a1, a2) = (0.754_877_666_246_692_7, 0.569_840_290_998_053_2);
            for (face, &count) in counts.iter().enumerate() {
                let s1: f64 = rng.random_range(0.0..1.0);
                let s2: f64 = rng.random_range(0.0..1.0);
                for j in 0..count {
                    let u = 2.0 * (j as f64 * a1 + s1).fract() - 1.0;
                    let v = 2.0 * (j as f64 * a2 + s2).fract() - 1.0;
                    let (p, nrm) = box_face_point(extents, face, u, v);
                    positions.push(p);
                    normals.push(nrm);
                }
            }
        }
        ShapeKind::TwoSpheres { radius, separation } => {
            let centers = two_sphere_centers(separation);
            let first = n / 2;
            let rot0 = seeded_rotation(rng);
            let rot1 = seeded_rotation(rng);
            fibonacci_sphere(first, radius, centers[0], &rot0, &mut positions, &mut normals);
            fibonacci_sphere(
                n - first,
                radius,
                centers[1],
                &rot1,
                &mut positions,
                &mut normals,
            );
            for c in components.iter_mut().skip(first) {
                *c = 1;
            }
        }
    }
    (positions, normals, components)
}

fn two_sphere_centers(separation: f64) -> [Vec3; 2] {
    [
        Vec3::new(-0.5 * separation, 0.0, 0.0),
        Vec3::new(0.5 * separation, 0.0, 0.0),
    ]
}

fn torus_point(big_r: f64, r: f64, theta: f64, psi: f64) -> (Vec3, Vec3) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    let ring = big_r + r * cp;
    (
        Vec3::new(ring * ct, ring * st, r * sp),
        Vec3::new(cp * ct, cp * st, sp),
    )
}

/// Inverts the tube-angle CDF `(R psi + r sin psi) / (2 pi R) = t` by Newton
/// iteration; the derivative `R + r cos psi` is bounded away from zero for
/// embedded tori.
fn torus_tube_angle(big_r: f64, r: f64, t: f64) -> f64 {
    let target = TAU * big_r * t;
    let mut psi = TAU * t;
    for _ in 0..32 {
        let f = big_r * psi + r * psi.sin() - target;
        let d = big_r + r * psi.cos();
        let step = f / d;
        psi -= step;
        if step.abs() < 1e-14 {
            break;
        }
    }
    psi
}

fn box_face_areas(extents: Vec3) -> [f64; 3] {
    [
        extents.y * extents.z,
        extents.x * extents.z,
        extents.x * extents.y,
    ]
}

/// Point and outward normal on box face `face` (2*axis + side) at in-face
/// coordinates `u, v` in [-1, 1].
fn box_face_point(extents: Vec3, face: usize, u: f64, v: f64) -> (Vec3, Vec3) {
    let half = extents * 0.5;
    let sign = if face % 2 == 0 { -1.0 } else { 1.0 };
    match face / 2 {
        0 => (
            Vec3::new(sign * half.x, u * half.y, v * half.z),
            Vec3::new(sign, 0.0, 0.0),
        ),
        1 => (
            Vec3::new(u * half.x, sign * half.y, v * half.z),
            Vec3::new(0.0, sign, 0.0),
        ),
        _ => (
            Vec3::new(u * half.x, v * half.y, sign * half.z),
            Vec3::new(0.0, 0.0, sign),
        ),
    }
}

/// Splits `total` into integer counts proportional to `weights` (largest
/// remainder rule), summing exactly to `total`.
fn allocate_proportionally(weights: &[f64], total: usize) -> Vec<usize> {
    let wsum: f64 = weights.iter().sum();
    let mut counts: Vec<usize> = Vec::with_capacity(weights.len());
    let mut fractions: Vec<(f64, usize)> = Vec::with_capacity(weights.len());
    let mut assigned = 0usize;
    for (i, w) in weights.iter().enumerate() {
        let exact = total as f64 * w / wsum;
        let floor = exact.floor() as usize;
        counts.push(floor);
        assigned += floor;
        fractions.push((exact - floor as f64, i));
    }
    fractions.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    for k in 0..total - assigned {
        counts[fractions[k % weights.len()].1] += 1;
    }
    counts
}

fn fibonacci_sphere(
    count: usize,
    radius: f64,
    center: Vec3,
    rotate: &impl Fn(Vec3) -> Vec3,
    positions: &mut Vec<Vec3>,
    normals: &mut Vec<Vec3>,
) {
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    for k in 0..count {
        let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
        let rho = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden_angle * k as f64;
        let dir = rotate(Vec3::new(rho * phi.cos(), rho * phi.sin(), z));
        positions.push(center + dir * radius);
        normals.push(dir);
    }
}

/// Seed-dependent rotation so even lattices differ across seeds.
fn seeded_rotation(rng: &mut ChaCha8Rng) -> impl Fn(Vec3) -> Vec3 {
    let axis = sphere_dir(rng);
    let angle = rng.random_range(0.0..TAU);
    let (s, c) = angle.sin_cos();
    move |v: Vec3| v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c))
}

fn sphere_dir(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi = rng.random_range(0.0..TAU);
    let rho = (1.0 - z * z).max(0.0).sqrt();
    let (s, c) = phi.sin_cos();
    Vec3::new(rho * c, rho * s, z)
}

/// Applies all three operators with the dense `O(N^2)` backend.
///
/// Thin wrapper so tests can name the oracle explicitly; returns
/// `(A mu, A^T s, G mu)`.
pub fn dense_reference(
    cloud: &PointCloud,
    mu: &NormalField,
    s: &ScalarField,
    w: SmoothingWidth,
) -> Result<(ScalarField, NormalField, NormalField)> {
    let ops = FieldOperators::new(cloud, OperatorBackend::dense());
    Ok((
        ops.apply_a(cloud, mu, w)?,
        ops.apply_at(cloud, s, w)?,
        ops.apply_g(cloud, mu, w)?,
    ))
}
