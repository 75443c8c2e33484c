//! Cubic octree over the normalized cloud with per-attribute representative
//! points for Barnes-Hut style far-field approximation.
//!
//! The tree topology is built once per solve: the root cell is `[-1, 1]^3`,
//! a cell splits into octants while it holds more than one point and its
//! depth is below the maximum, and coincident points share a leaf at the
//! depth cap. Attributes change every operator application, so the per-node
//! representatives are recomputed in a cheap bottom-up pass each time.
//!
//! A node's representative sits at the `|attribute|`-weighted mean of its
//! member points and carries the attribute sum. When all member weights
//! vanish the weighted mean is a 0/0; the representative falls back to the
//! unweighted centroid so traversal stays total.

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};
use std::ops::Add;

/// Node of the flattened octree. Children are stored contiguously starting at
/// `first_child`; a node with no children is a leaf. Every node owns the
/// point range `start..start + count` of the tree's permuted point order.
#[derive(Debug, Clone)]
pub struct OctreeNode {
    pub center: Vec3,
    pub half_width: f64,
    pub depth: u8,
    first_child: u32,
    child_count: u8,
    start: u32,
    count: u32,
}

impl OctreeNode {
    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.child_count == 0
    }

    /// Full edge length of the cell; the opening criterion compares against
    /// this, not the half-width.
    #[inline]
    pub fn edge_length(&self) -> f64 {
        2.0 * self.half_width
    }

    /// Number of points in this node's subtree.
    #[inline]
    pub fn point_count(&self) -> usize {
        self.count as usize
    }

    #[inline]
    pub fn children_range(&self) -> std::ops::Range<usize> {
        let first = self.first_child as usize;
        first..first + self.child_count as usize
    }
}

/// Per-point attribute that can be aggregated into node representatives.
pub trait NodeAttribute: Copy + Send + Sync {
    fn zero() -> Self;
    fn accumulate(&mut self, other: Self);
    /// Weight used for the representative location.
    fn weight(&self) -> f64;
}

impl NodeAttribute for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn accumulate(&mut self, other: Self) {
        *self += other;
    }
    #[inline]
    fn weight(&self) -> f64 {
        self.abs()
    }
}

impl NodeAttribute for Vec3 {
    #[inline]
    fn zero() -> Self {
        Vec3::ZERO
    }
    #[inline]
    fn accumulate(&mut self, other: Self) {
        *self += other;
    }
    #[inline]
    fn weight(&self) -> f64 {
        self.norm()
    }
}

/// Representative cache for one attribute vector: per-node aggregates plus
/// the attributes permuted into tree order for the direct leaf sums.
#[derive(Debug, Clone)]
pub struct Representatives<A> {
    /// Weighted mean of member points (centroid when all weights vanish).
    pub location: Vec<Vec3>,
    /// Sum of member attributes.
    pub attribute: Vec<A>,
    /// Sum of member weights.
    pub weight_total: Vec<f64>,
    sorted_attributes: Vec<A>,
}

/// Octree topology over a fixed point cloud.
#[derive(Debug, Clone)]
pub struct Octree {
    nodes: Vec<OctreeNode>,
    /// Permutation of point indices; node ranges index into this.
    point_order: Vec<u32>,
    /// Positions permuted into `point_order` order for sequential leaf sums.
    sorted_positions: Vec<Vec3>,
    /// Per-node sum of member positions, backing the zero-weight fallback.
    position_sums: Vec<Vec3>,
    point_count: usize,
    max_depth: u32,
}

impl Octree {
    /// Builds the tree over a normalized cloud. The root cell is `[-1, 1]^3`
    /// regardless of how much of it the cloud occupies.
    pub fn build(cloud: &PointCloud, max_depth: u32) -> Octree {
        let n = cloud.len();
        let positions = cloud.positions();
        let mut tree = Octree {
            nodes: Vec::with_capacity(2 * n),
            point_order: (0..n as u32).collect(),
            sorted_positions: Vec::new(),
            position_sums: Vec::new(),
            point_count: n,
            max_depth,
        };
        tree.nodes.push(OctreeNode {
            center: Vec3::ZERO,
            half_width: 1.0,
            depth: 0,
            first_child: 0,
            child_count: 0,
            start: 0,
            count: n as u32,
        });
        let mut scratch = vec![0u32; n];
        tree.subdivide(0, positions, &mut scratch);
        tree.sorted_positions = tree
            .point_order
            .iter()
            .map(|&pi| positions[pi as usize])
            .collect();
        tree.compute_position_sums();
        tree
    }

    fn subdivide(&mut self, node_idx: usize, positions: &[Vec3], scratch: &mut [u32]) {
        let (center, half, depth, start, count) = {
            let n = &self.nodes[node_idx];
            (
                n.center,
                n.half_width,
                n.depth,
                n.start as usize,
                n.count as usize,
            )
        };
        if count <= 1 || u32::from(depth) >= self.max_depth {
            return;
        }

        // bucket by octant: bit 0 = x >= cx, bit 1 = y >= cy, bit 2 = z >= cz;
        // points on a splitting plane go to the upper octant
        let octant = |p: Vec3| -> usize {
            usize::from(p.x >= center.x)
                | (usize::from(p.y >= center.y) << 1)
                | (usize::from(p.z >= center.z) << 2)
        };
        let mut counts = [0usize; 8];
        for &pi in &self.point_order[start..start + count] {
            counts[octant(positions[pi as usize])] += 1;
        }
        let mut offsets = [0usize; 8];
        let mut acc = 0;
        for (o, c) in offsets.iter_mut().zip(counts.iter()) {
            *o = acc;
            acc += c;
        }
        let mut cursors = offsets;
        for &pi in &self.point_order[start..start + count] {
            let o = octant(positions[pi as usize]);
            scratch[cursors[o]] = pi;
            cursors[o] += 1;
        }
        self.point_order[start..start + count].copy_from_slice(&scratch[..count]);

        let first_child = self.nodes.len() as u32;
        let mut child_count = 0u8;
        let quarter = 0.5 * half;
        for (oct, &oct_count) in counts.iter().enumerate() {
            if oct_count == 0 {
                continue;
            }
            let offset = Vec3::new(
                if oct & 1 != 0 { quarter } else { -quarter },
                if oct & 2 != 0 { quarter } else { -quarter },
                if oct & 4 != 0 { quarter } else { -quarter },
            );
            self.nodes.push(OctreeNode {
                center: center + offset,
                half_width: quarter,
                depth: depth + 1,
                first_child: 0,
                child_count: 0,
                start: (start + offsets[oct]) as u32,
                count: oct_count as u32,
            });
            child_count += 1;
        }
        self.nodes[node_idx].first_child = first_child;
        self.nodes[node_idx].child_count = child_count;

        for child in first_child as usize..first_child as usize + child_count as usize {
            self.subdivide(child, positions, scratch);
        }
    }

    fn compute_position_sums(&mut self) {
        let mut sums = vec![Vec3::ZERO; self.nodes.len()];
        for idx in (0..self.nodes.len()).rev() {
            let node = &self.nodes[idx];
            if node.is_leaf() {
                let mut s = Vec3::ZERO;
                for p in &self.sorted_positions
                    [node.start as usize..(node.start + node.count) as usize]
                {
                    s += *p;
                }
                sums[idx] = s;
            } else {
                let mut s = Vec3::ZERO;
                for c in node.children_range() {
                    s += sums[c];
                }
                sums[idx] = s;
            }
        }
        self.position_sums = sums;
    }

    #[inline]
    pub fn nodes(&self) -> &[OctreeNode] {
        &self.nodes
    }

    #[inline]
    pub fn root(&self) -> &OctreeNode {
        &self.nodes[0]
    }

    #[inline]
    pub fn point_count(&self) -> usize {
        self.point_count
    }

    #[inline]
    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    /// Point indices owned by a node's subtree (original cloud indices).
    #[inline]
    pub fn node_points(&self, node: &OctreeNode) -> &[u32] {
        &self.point_order[node.start as usize..(node.start + node.count) as usize]
    }

    /// The tree-order permutation of point indices. Batched per-point
    /// traversals walk queries in this order so that neighboring queries
    /// reuse the same node path; entry `k` is the original index of the
    /// `k`-th point in tree order.
    #[inline]
    pub fn point_order(&self) -> &[u32] {
        &self.point_order
    }

    /// Recomputes the per-node representatives for one attribute vector in a
    /// single bottom-up pass.
    pub fn representatives<A: NodeAttribute>(
        &self,
        attributes: &[A],
    ) -> Result<Representatives<A>> {
        if attributes.len() != self.point_count {
            return Err(Error::LengthMismatch {
                expected: self.point_count,
                actual: attributes.len(),
            });
        }
        let n_nodes = self.nodes.len();
        let sorted_attributes: Vec<A> = self
            .point_order
            .iter()
            .map(|&pi| attributes[pi as usize])
            .collect();

        // `location` holds weighted position sums until finalized below
        let mut location = vec![Vec3::ZERO; n_nodes];
        let mut attribute = vec![A::zero(); n_nodes];
        let mut weight_total = vec![0.0f64; n_nodes];

        // children are stored after their parent, so a reverse scan is bottom-up
        for idx in (0..n_nodes).rev() {
            let node = &self.nodes[idx];
            let (mut loc, mut attr, mut wsum) = (Vec3::ZERO, A::zero(), 0.0);
            if node.is_leaf() {
                let range = node.start as usize..(node.start + node.count) as usize;
                for (p, a) in self.sorted_positions[range.clone()]
                    .iter()
                    .zip(&sorted_attributes[range])
                {
                    let w = a.weight();
                    loc += *p * w;
                    attr.accumulate(*a);
                    wsum += w;
                }
            } else {
                for c in node.children_range() {
                    loc += location[c];
                    attr.accumulate(attribute[c]);
                    wsum += weight_total[c];
                }
            }
            location[idx] = loc;
            attribute[idx] = attr;
            weight_total[idx] = wsum;
        }
        for idx in 0..n_nodes {
            let w = weight_total[idx];
            location[idx] = if w > 0.0 {
                location[idx] * (1.0 / w)
            } else {
                self.position_sums[idx] * (1.0 / self.nodes[idx].count as f64)
            };
        }
        Ok(Representatives {
            location,
            attribute,
            weight_total,
            sorted_attributes,
        })
    }

    /// Accumulates kernel contributions for one query point.
    ///
    /// A node whose representative lies farther from the query than
    /// `opening_c` times the node's edge length contributes one kernel
    /// evaluation against the representative; otherwise internal nodes
    /// recurse and leaves sum their member points directly. Passing
    /// `f64::INFINITY` for `opening_c` forces full descent, i.e. dense
    /// summation in tree order.
    ///
    /// `contribute(d, attribute)` receives `d = query - source_location` and
    /// is responsible for the smoothing cutoff.
    pub fn traverse<A, O, F>(
        &self,
        query: Vec3,
        reps: &Representatives<A>,
        opening_c: f64,
        contribute: &F,
    ) -> O
    where
        A: NodeAttribute,
        O: Copy + Default + Add<Output = O>,
        F: Fn(Vec3, &A) -> O,
    {
        self.visit(0, query, reps, opening_c, contribute)
    }

    fn visit<A, O, F>(
        &self,
        idx: usize,
        query: Vec3,
        reps: &Representatives<A>,
        opening_c: f64,
        contribute: &F,
    ) -> O
    where
        A: NodeAttribute,
        O: Copy + Default + Add<Output = O>,
        F: Fn(Vec3, &A) -> O,
    {
        let node = &self.nodes[idx];
        let d = query - reps.location[idx];
        let threshold = opening_c * node.edge_length();
        if d.norm_squared() > threshold * threshold {
            return contribute(d, &reps.attribute[idx]);
        }
        let mut acc = O::default();
        if node.is_leaf() {
            let range = node.start as usize..(node.start + node.count) as usize;
            for (p, a) in self.sorted_positions[range.clone()]
                .iter()
                .zip(&reps.sorted_attributes[range])
            {
                acc = acc + contribute(query - *p, a);
            }
        } else {
            for c in node.children_range() {
                acc = acc + self.visit(c, query, reps, opening_c, contribute);
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PointCloud, SimilarityTransform};
    use crate::kernels::{grad_phi_smoothed, SmoothingWidth};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::cell::Cell;

    fn cloud_from(positions: Vec<Vec3>) -> PointCloud {
        PointCloud::from_normalized(positions, SimilarityTransform::IDENTITY).unwrap()
    }

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        cloud_from(
            (0..n)
                .map(|_| {
                    Vec3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn single_point_is_a_root_leaf() {
        let tree = Octree::build(&cloud_from(vec![Vec3::new(0.25, 0.25, 0.25)]), 15);
        assert_eq!(tree.nodes().len(), 1);
        assert!(tree.root().is_leaf());
        assert_eq!(tree.root().depth, 0);
        assert_eq!(tree.root().point_count(), 1);
        assert_eq!(tree.root().edge_length(), 2.0);
    }

    #[test]
    fn one_point_per_octant_gives_eight_leaf_children() {
        let mut positions = Vec::new();
        for oct in 0..8 {
            positions.push(Vec3::new(
                if oct & 1 != 0 { 0.5 } else { -0.5 },
                if oct & 2 != 0 { 0.5 } else { -0.5 },
                if oct & 4 != 0 { 0.5 } else { -0.5 },
            ));
        }
        let tree = Octree::build(&cloud_from(positions), 15);
        assert_eq!(tree.nodes().len(), 9);
        assert_eq!(tree.root().children_range().len(), 8);
        for c in tree.root().children_range() {
            let child = &tree.nodes()[c];
            assert!(child.is_leaf());
            assert_eq!(child.depth, 1);
            assert_eq!(child.point_count(), 1);
            assert_eq!(child.half_width, 0.5);
        }
    }

    #[test]
    fn coincident_points_chain_to_the_depth_cap() {
        let depth_cap = 6;
        let p = Vec3::new(0.1, -0.2, 0.3);
        let tree = Octree::build(&cloud_from(vec![p; 10]), depth_cap);
        // every level below the root has exactly one child until the cap
        assert_eq!(tree.nodes().len(), depth_cap as usize + 1);
        for (i, node) in tree.nodes().iter().enumerate() {
            assert_eq!(u32::from(node.depth), i as u32);
            if node.is_leaf() {
                assert_eq!(u32::from(node.depth), depth_cap);
                assert_eq!(node.point_count(), 10);
            } else {
                assert_eq!(node.children_range().len(), 1);
            }
        }
    }

    #[test]
    fn leaves_partition_the_cloud() {
        let tree = Octree::build(&random_cloud(500, 9), 15);
        let mut seen = vec![false; 500];
        for node in tree.nodes() {
            assert!(u32::from(node.depth) <= tree.max_depth());
            if node.is_leaf() {
                assert!(node.point_count() >= 1);
                for &pi in tree.node_points(node) {
                    assert!(!seen[pi as usize], "point {pi} in two leaves");
                    seen[pi as usize] = true;
                }
            } else {
                assert!(node.point_count() >= 2);
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn children_partition_parent_cells() {
        let tree = Octree::build(&random_cloud(300, 4), 8);
        for node in tree.nodes() {
            let mut child_points = 0;
            for c in node.children_range() {
                let child = &tree.nodes()[c];
                child_points += child.point_count();
                assert_eq!(child.half_width, node.half_width * 0.5);
                let delta = child.center - node.center;
                for comp in [delta.x, delta.y, delta.z] {
                    assert!((comp.abs() - node.half_width * 0.5).abs() < 1e-15);
                }
            }
            if !node.is_leaf() {
                assert_eq!(child_points, node.point_count());
            }
        }
    }

    #[test]
    fn single_point_representative_is_the_point() {
        let p = Vec3::new(0.3, -0.1, 0.7);
        let v = Vec3::new(0.0, 2.0, 0.0);
        let tree = Octree::build(&cloud_from(vec![p]), 15);
        let reps = tree.representatives(&[v]).unwrap();
        assert_eq!(reps.location[0], p);
        assert_eq!(reps.attribute[0], v);
        assert_eq!(reps.weight_total[0], 2.0);
    }

    #[test]
    fn weighted_mean_location() {
        // weights 1 and 3 put the representative at 3/4 of the segment
        let tree = Octree::build(
            &cloud_from(vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)]),
            0,
        );
        assert!(tree.root().is_leaf());
        let attrs = [Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 3.0, 0.0)];
        let reps = tree.representatives(&attrs).unwrap();
        assert!((reps.location[0] - Vec3::new(0.75, 0.0, 0.0)).norm() < 1e-15);
        assert_eq!(reps.attribute[0], Vec3::new(0.0, 3.0, 1.0));
        assert_eq!(reps.weight_total[0], 4.0);
    }

    #[test]
    fn node_attribute_equals_dense_member_sum() {
        let cloud = random_cloud(400, 21);
        let tree = Octree::build(&cloud, 15);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let attrs: Vec<Vec3> = (0..400)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect();
        let reps = tree.representatives(&attrs).unwrap();
        for (idx, node) in tree.nodes().iter().enumerate() {
            let mut dense = Vec3::ZERO;
            for &pi in tree.node_points(node) {
                dense += attrs[pi as usize];
            }
            let got = reps.attribute[idx];
            assert!(
                (got - dense).norm() <= 1e-13 * dense.norm().max(1.0),
                "node {idx}"
            );
        }
    }

    #[test]
    fn internal_attribute_is_sum_of_children() {
        let cloud = random_cloud(300, 31);
        let tree = Octree::build(&cloud, 15);
        let attrs: Vec<f64> = (0..300).map(|i| (i as f64 * 0.37).sin()).collect();
        let reps = tree.representatives(&attrs).unwrap();
        for (idx, node) in tree.nodes().iter().enumerate() {
            if node.is_leaf() {
                continue;
            }
            let child_sum: f64 = node.children_range().map(|c| reps.attribute[c]).sum();
            assert!((reps.attribute[idx] - child_sum).abs() <= 1e-13 * child_sum.abs().max(1.0));
        }
    }

    #[test]
    fn zero_weights_fall_back_to_centroid() {
        let positions = vec![
            Vec3::new(-0.5, 0.0, 0.0),
            Vec3::new(0.5, 0.0, 0.0),
            Vec3::new(0.0, 0.9, 0.0),
        ];
        let tree = Octree::build(&cloud_from(positions), 15);
        let reps = tree.representatives(&[Vec3::ZERO; 3]).unwrap();
        assert!((reps.location[0] - Vec3::new(0.0, 0.3, 0.0)).norm() < 1e-15);
        assert_eq!(reps.weight_total[0], 0.0);
        assert_eq!(reps.attribute[0], Vec3::ZERO);
    }

    #[test]
    fn representative_length_mismatch_errors() {
        let tree = Octree::build(&random_cloud(10, 1), 15);
        assert!(matches!(
            tree.representatives(&[1.0f64; 9]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn far_query_evaluates_root_representative_once() {
        let cloud = random_cloud(64, 12);
        let tree = Octree::build(&cloud, 15);
        let mu: Vec<Vec3> = (0..64).map(|i| Vec3::new(1.0, i as f64 * 0.01, 0.0)).collect();
        let reps = tree.representatives(&mu).unwrap();
        let w = SmoothingWidth::new(1e-3).unwrap();
        let query = Vec3::new(10.0, 0.0, 0.0);
        let evals = Cell::new(0usize);
        let value: f64 = tree.traverse(query, &reps, 2.0, &|d, a: &Vec3| {
            evals.set(evals.get() + 1);
            grad_phi_smoothed(d, w).dot(*a)
        });
        assert_eq!(evals.get(), 1);
        let expected = grad_phi_smoothed(query - reps.location[0], w).dot(reps.attribute[0]);
        assert_eq!(value, expected);
    }

    #[test]
    fn infinite_opening_matches_dense_sum() {
        let n = 600;
        let cloud = random_cloud(n, 3);
        let tree = Octree::build(&cloud, 15);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mu: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let reps = tree.representatives(&mu).unwrap();
        let w = SmoothingWidth::new(0.002).unwrap();
        let positions = cloud.positions();

        let mut tree_out = Vec::with_capacity(n);
        let mut dense_out = Vec::with_capacity(n);
        for &q in positions {
            let t: f64 = tree.traverse(q, &reps, f64::INFINITY, &|d, a: &Vec3| {
                grad_phi_smoothed(d, w).dot(*a)
            });
            tree_out.push(t);
            let mut s = 0.0;
            for (p, m) in positions.iter().zip(&mu) {
                s += grad_phi_smoothed(q - *p, w).dot(*m);
            }
            dense_out.push(s);
        }
        let num: f64 = tree_out
            .iter()
            .zip(&dense_out)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let den: f64 = dense_out.iter().map(|b| b * b).sum();
        assert!((num / den).sqrt() <= 1e-12);
    }

    #[test]
    fn all_sources_inside_w_accumulate_zero() {
        let positions = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.001, 0.0, 0.0),
            Vec3::new(0.0, 0.001, 0.0),
        ];
        let cloud = cloud_from(positions.clone());
        let tree = Octree::build(&cloud, 15);
        let mu = vec![Vec3::new(0.0, 0.0, 1.0); 3];
        let reps = tree.representatives(&mu).unwrap();
        let w = SmoothingWidth::new(0.01).unwrap();
        let value: f64 = tree.traverse(positions[0], &reps, 2.0, &|d, a: &Vec3| {
            grad_phi_smoothed(d, w).dot(*a)
        });
        assert_eq!(value, 0.0);
    }
}
