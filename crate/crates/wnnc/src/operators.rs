//! The three linear maps over the discretized winding-number formula.
//!
//! With source points `x_j` carrying oriented surface elements `mu_j`, the
//! discretized field is `F(y; mu) = sum_j grad_phi(y - x_j) . mu_j`. This
//! module evaluates:
//!
//! * `A`:   `mu -> s`,   `s_i = F(x_i; mu)`
//! * `A^T`: `s -> v`,    `v_j = sum_i s_i grad_phi(x_i - x_j)`
//! * `G`:   `mu -> m`,   `m_i = -grad F(x_i; mu) = -sum_j hess_phi(x_i - x_j) mu_j`
//!
//! plus `F` itself at arbitrary query points. Every sum uses the hard
//! smoothing cutoff, so the singular self term contributes nothing.
//!
//! Each operator comes in a dense `O(N^2)` reference form and a treecode
//! form that replaces far clusters by their representative source. The dense
//! pair `A`/`A^T` are exact adjoints up to rounding; the treecode forms are
//! independent traversals with their own attribute aggregation and are *not*
//! exact adjoints of each other.

use crate::error::{Error, Result};
use crate::geometry::{NormalField, PointCloud, ScalarField, Vec3};
use crate::kernels::{
    grad_phi_dot_smoothed, grad_phi_smoothed, hess_apply_smoothed, SmoothingWidth,
};
use crate::octree::Octree;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Selects the summation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendMode {
    /// Direct `O(N^2)` summation; the reference the treecode is tested against.
    Dense,
    /// Barnes-Hut style far-field approximation, `O(N log N)`.
    Treecode,
}

/// Backend configuration. Dense mode ignores `opening_c` and `max_depth`.
#[derive(Debug, Clone, Copy)]
pub struct OperatorBackend {
    pub mode: BackendMode,
    /// A node is used as a single far-field source when the distance from
    /// the query to the node's representative exceeds `opening_c` times the
    /// node's edge length. `f64::INFINITY` forces full descent, which
    /// reproduces the dense sum in tree order.
    pub opening_c: f64,
    /// Octree subdivision stops at this depth.
    pub max_depth: u32,
}

impl OperatorBackend {
    pub fn dense() -> Self {
        OperatorBackend {
            mode: BackendMode::Dense,
            opening_c: f64::INFINITY,
            max_depth: 0,
        }
    }

    pub fn treecode(opening_c: f64, max_depth: u32) -> Result<Self> {
        if !(opening_c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "opening constant must be positive, got {opening_c}"
            )));
        }
        if max_depth < 1 || max_depth > 64 {
            return Err(Error::InvalidParameter(format!(
                "tree depth must be in 1..=64, got {max_depth}"
            )));
        }
        Ok(OperatorBackend {
            mode: BackendMode::Treecode,
            opening_c,
            max_depth,
        })
    }
}

/// Operator engine bound to one cloud. In treecode mode the octree topology
/// is built once here and only the per-attribute representatives are
/// recomputed on each application.
#[derive(Debug)]
pub struct FieldOperators {
    backend: OperatorBackend,
    tree: Option<Octree>,
    point_count: usize,
}

fn map_queries<O, F>(n: usize, f: F) -> Vec<O>
where
    O: Send,
    F: Fn(usize) -> O + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}


/// Runs `eval_query` over the cloud's own points in tree order (cache
/// friendly for batched traversals) and scatters results back to input
/// order. Per-entry values are identical to input-order evaluation.
fn map_cloud_queries_tree_order<O, F>(tree: &Octree, n: usize, eval_query: F) -> Vec<O>
where
    O: Send + Copy + Default,
    F: Fn(usize) -> O + Send + Sync,
{
    let order = tree.point_order();
    let in_tree_order: Vec<O> = map_queries(n, |k| eval_query(order[k] as usize));
    let mut out = vec![O::default(); n];
    for (k, v) in in_tree_order.into_iter().enumerate() {
        out[order[k] as usize] = v;
    }
    out
}

impl FieldOperators {
    /// Builds the engine for `cloud`. All later applications must pass the
    /// same cloud.
    pub fn new(cloud: &PointCloud, backend: OperatorBackend) -> Self {
        let tree = match backend.mode {
            BackendMode::Dense => None,
            BackendMode::Treecode => Some(Octree::build(cloud, backend.max_depth)),
        };
        FieldOperators {
            backend,
            tree,
            point_count: cloud.len(),
        }
    }

    pub fn backend(&self) -> &OperatorBackend {
        &self.backend
    }

    pub fn octree(&self) -> Option<&Octree> {
        self.tree.as_ref()
    }

    pub fn point_count(&self) -> usize {
        self.point_count
    }

    fn check_len(&self, cloud: &PointCloud, len: usize) -> Result<()> {
        if cloud.len() != self.point_count {
            return Err(Error::LengthMismatch {
                expected: self.point_count,
                actual: cloud.len(),
            });
        }
        if len != self.point_count {
            return Err(Error::LengthMismatch {
                expected: self.point_count,
                actual: len,
            });
        }
        Ok(())
    }

    /// `s_i = F(x_i; mu)`: the field sampled at the cloud's own points.
    pub fn apply_a(
        &self,
        cloud: &PointCloud,
        mu: &NormalField,
        w: SmoothingWidth,
    ) -> Result<ScalarField> {
        self.check_len(cloud, mu.len())?;
        let positions = cloud.positions();
        let mus = mu.as_slice();
        let values = match self.backend.mode {
            BackendMode::Dense => map_queries(self.point_count, |i| {
                let q = positions[i];
                let mut acc = 0.0;
                for (xj, m) in positions.iter().zip(mus) {
                    acc += grad_phi_dot_smoothed(q - *xj, *m, w);
                }
                acc
            }),
            BackendMode::Treecode => {
                let tree = self.tree.as_ref().expect("treecode backend has a tree");
                let reps = tree.representatives(mus)?;
                let c = self.backend.opening_c;
                map_cloud_queries_tree_order(tree, self.point_count, |i| {
                    let q = positions[i];
                    tree.traverse(q, &reps, c, &|d: Vec3, m: &Vec3| {
                        grad_phi_dot_smoothed(d, *m, w)
                    })
                })
            }
        };
        ScalarField::new(values)
    }

    /// `v_j = sum_i s_i grad_phi(x_i - x_j)`, the adjoint of `A` in dense
    /// mode. The treecode form aggregates the scalar attributes `s_i` with
    /// weights `|s_i|` in its own traversal.
    pub fn apply_at(
        &self,
        cloud: &PointCloud,
        s: &ScalarField,
        w: SmoothingWidth,
    ) -> Result<NormalField> {
        self.check_len(cloud, s.len())?;
        let positions = cloud.positions();
        let values = s.as_slice();
        let out: Vec<Vec3> = match self.backend.mode {
            BackendMode::Dense => map_queries(self.point_count, |j| {
                let xj = positions[j];
                let mut acc = Vec3::ZERO;
                for (xi, si) in positions.iter().zip(values) {
                    acc += grad_phi_smoothed(*xi - xj, w) * *si;
                }
                acc
            }),
            BackendMode::Treecode => {
                let tree = self.tree.as_ref().expect("treecode backend has a tree");
                let reps = tree.representatives(values)?;
                let c = self.backend.opening_c;
                map_cloud_queries_tree_order(tree, self.point_count, |j| {
                    let xj = positions[j];
                    tree.traverse(xj, &reps, c, &|d: Vec3, si: &f64| {
                        // d = x_j - x_i, so the source-to-query argument is -d
                        grad_phi_smoothed(-d, w) * *si
                    })
                })
            }
        };
        NormalField::new(out)
    }

    /// `m_i = -grad F(x_i; mu)`: the negative field gradient sampled at the
    /// cloud's own points (the normal-consistency update direction).
    pub fn apply_g(
        &self,
        cloud: &PointCloud,
        mu: &NormalField,
        w: SmoothingWidth,
    ) -> Result<NormalField> {
        self.check_len(cloud, mu.len())?;
        let positions = cloud.positions();
        let mus = mu.as_slice();
        let out: Vec<Vec3> = match self.backend.mode {
            BackendMode::Dense => map_queries(self.point_count, |i| {
                let xi = positions[i];
                let mut acc = Vec3::ZERO;
                for (xj, m) in positions.iter().zip(mus) {
                    acc -= hess_apply_smoothed(xi - *xj, *m, w);
                }
                acc
            }),
            BackendMode::Treecode => {
                let tree = self.tree.as_ref().expect("treecode backend has a tree");
                let reps = tree.representatives(mus)?;
                let c = self.backend.opening_c;
                map_cloud_queries_tree_order(tree, self.point_count, |i| {
                    let xi = positions[i];
                    tree.traverse(xi, &reps, c, &|d: Vec3, m: &Vec3| {
                        -hess_apply_smoothed(d, *m, w)
                    })
                })
            }
        };
        NormalField::new(out)
    }

    /// `F(y; mu)` at arbitrary query points.
    pub fn evaluate_field(
        &self,
        cloud: &PointCloud,
        queries: &[Vec3],
        mu: &NormalField,
        w: SmoothingWidth,
    ) -> Result<Vec<f64>> {
        self.check_len(cloud, mu.len())?;
        Ok(self.field_at(cloud, queries, mu, w))
    }

    fn field_at(
        &self,
        cloud: &PointCloud,
        queries: &[Vec3],
        mu: &NormalField,
        w: SmoothingWidth,
    ) -> Vec<f64> {
        let positions = cloud.positions();
        let mus = mu.as_slice();
        match self.backend.mode {
            BackendMode::Dense => map_queries(queries.len(), |qi| {
                let q = queries[qi];
                let mut acc = 0.0;
                for (xj, m) in positions.iter().zip(mus) {
                    acc += grad_phi_dot_smoothed(q - *xj, *m, w);
                }
                acc
            }),
            BackendMode::Treecode => {
                let tree = self.tree.as_ref().expect("treecode backend has a tree");
                let reps = tree
                    .representatives(mus)
                    .expect("length checked by caller");
                let c = self.backend.opening_c;
                map_queries(queries.len(), |qi| {
                    let q = queries[qi];
                    tree.traverse(q, &reps, c, &|d: Vec3, m: &Vec3| {
                        grad_phi_dot_smoothed(d, *m, w)
                    })
                })
            }
        }
    }
}
