//! Quadtree accelerator for the blob sum.
//!
//! Far clusters are evaluated with a Cartesian Taylor expansion of
//! `1 / (|y|^2 + delta^2)` about the cluster center. The Taylor coefficients obey the
//! recurrence obtained from differentiating `(|y|^2 + delta^2) phi(y) = 1`:
//!
//! ```text
//! rho0 phi_k = -(2 X1 phi_{k-e1} + 2 X2 phi_{k-e2} + phi_{k-2e1} + phi_{k-2e2})
//! ```
//!
//! so each cluster costs `O(order^2)` flops per target. Near clusters fall back to the
//! direct sum.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::{blob_sum, induced_velocity, MarkerCloud};
use crate::kernels::PlanePoint;

const LEAF_SIZE: usize = 32;
const MAX_DEPTH: usize = 48;

#[derive(Debug, Clone)]
struct Node {
    center: PlanePoint,
    /// Largest distance from `center` to a source of the node.
    radius: f64,
    start: usize,
    end: usize,
    children: Vec<usize>,
    /// Triangular moments `sum g a1^k1 a2^k2` up to total order `order + 1`.
    moments: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TreeCode {
    theta: f64,
    order: usize,
    delta2: f64,
    xs: Vec<f64>,
    ys: Vec<f64>,
    gs: Vec<f64>,
    nodes: Vec<Node>,
}

#[inline]
fn tri(k1: usize, k2: usize) -> usize {
    let n = k1 + k2;
    n * (n + 1) / 2 + k2
}

impl TreeCode {
    /// Opening criterion: a cluster of radius `r` at distance `R` is expanded when `r < theta R`.
    pub fn build(cloud: &MarkerCloud, theta: f64, order: usize) -> Self {
        assert!(theta > 0.0 && theta < 1.0, "opening angle must lie in (0, 1)");
        let n = cloud.len();
        let mut idx: Vec<usize> = (0..n).collect();
        let (mut lo, mut hi) = (
            PlanePoint::new(f64::INFINITY, f64::INFINITY),
            PlanePoint::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for k in 0..n {
            let p = cloud.pos(k);
            lo = PlanePoint::new(lo.x1.min(p.x1), lo.x2.min(p.x2));
            hi = PlanePoint::new(hi.x1.max(p.x1), hi.x2.max(p.x2));
        }
        let mut tree = TreeCode {
            theta,
            order,
            delta2: cloud.blob_delta() * cloud.blob_delta(),
            xs: Vec::new(),
            ys: Vec::new(),
            gs: Vec::new(),
            nodes: Vec::new(),
        };
        if n > 0 {
            let center = (lo + hi) * 0.5;
            let half = 0.5 * (hi.x1 - lo.x1).max(hi.x2 - lo.x2) * (1.0 + 1e-12) + 1e-300;
            tree.split(cloud, &mut idx, 0, n, center, half, 0);
        }
        tree.xs = idx.iter().map(|&k| cloud.xs()[k]).collect();
        tree.ys = idx.iter().map(|&k| cloud.ys()[k]).collect();
        tree.gs = idx.iter().map(|&k| cloud.strengths()[k]).collect();
        for node in 0..tree.nodes.len() {
            tree.fill_moments(node);
        }
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn split(
        &mut self,
        cloud: &MarkerCloud,
        idx: &mut [usize],
        start: usize,
        end: usize,
        box_center: PlanePoint,
        half: f64,
        depth: usize,
    ) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(Node {
            center: box_center,
            radius: 0.0,
            start,
            end,
            children: Vec::new(),
            moments: Vec::new(),
        });
        if end - start <= LEAF_SIZE || depth >= MAX_DEPTH {
            return slot;
        }
        // stable partition into quadrants keeps the source order deterministic
        let quadrant = |k: usize| {
            let p = cloud.pos(k);
            usize::from(p.x1 >= box_center.x1) + 2 * usize::from(p.x2 >= box_center.x2)
        };
        let local = &mut idx[start..end];
        let mut buckets: [Vec<usize>; 4] = Default::default();
        for &k in local.iter() {
            buckets[quadrant(k)].push(k);
        }
        let mut offset = start;
        let mut ranges = Vec::with_capacity(4);
        for (q, bucket) in buckets.iter().enumerate() {
            idx[offset..offset + bucket.len()].copy_from_slice(bucket);
            if !bucket.is_empty() {
                ranges.push((q, offset, offset + bucket.len()));
            }
            offset += bucket.len();
        }
        let h = half / 2.0;
        for (q, s, e) in ranges {
            let c = PlanePoint::new(
                box_center.x1 + if q & 1 == 1 { h } else { -h },
                box_center.x2 + if q & 2 == 2 { h } else { -h },
            );
            let child = self.split(cloud, idx, s, e, c, h, depth + 1);
            self.nodes[slot].children.push(child);
        }
        slot
    }

    fn fill_moments(&mut self, node: usize) {
        let m = self.order + 1;
        let (start, end, c) = {
            let n = &self.nodes[node];
            (n.start, n.end, n.center)
        };
        let mut moments = vec![0.0; tri(0, m + 1)];
        let mut radius: f64 = 0.0;
        let mut p1 = vec![0.0; m + 1];
        let mut p2 = vec![0.0; m + 1];
        for j in start..end {
            let a1 = self.xs[j] - c.x1;
            let a2 = self.ys[j] - c.x2;
            radius = radius.max(a1.hypot(a2));
            p1[0] = 1.0;
            p2[0] = self.gs[j];
            for k in 1..=m {
                p1[k] = p1[k - 1] * a1;
                p2[k] = p2[k - 1] * a2;
            }
            for n in 0..=m {
                for k2 in 0..=n {
                    moments[tri(n - k2, k2)] += p1[n - k2] * p2[k2];
                }
            }
        }
        let node = &mut self.nodes[node];
        node.moments = moments;
        node.radius = radius;
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Approximate induced velocity at `x`.
    pub fn velocity(&self, x: PlanePoint) -> PlanePoint {
        if self.nodes.is_empty() {
            return PlanePoint::ORIGIN;
        }
        let mut phi = vec![0.0; tri(0, self.order + 1)];
        let mut acc = PlanePoint::ORIGIN;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let sep = x - node.center;
            let dist = sep.norm();
            let count = node.end - node.start;
            let expansion_cost = (self.order + 1) * (self.order + 2) / 2;
            if node.radius < self.theta * dist && count > expansion_cost / 4 {
                acc += self.expand(node, sep, &mut phi);
            } else if node.children.is_empty() {
                let (u, v) = blob_sum(
                    &self.xs[node.start..node.end],
                    &self.ys[node.start..node.end],
                    &self.gs[node.start..node.end],
                    self.delta2,
                    x.x1,
                    x.x2,
                );
                acc += PlanePoint::new(u, v);
            } else {
                stack.extend(node.children.iter().rev());
            }
        }
        acc
    }

    fn expand(&self, node: &Node, sep: PlanePoint, phi: &mut [f64]) -> PlanePoint {
        let p = self.order;
        let rho0 = sep.norm_sq() + self.delta2;
        let inv = 1.0 / rho0;
        let (t1, t2) = (2.0 * sep.x1, 2.0 * sep.x2);
        phi[0] = inv;
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        let mom = &node.moments;
        s0 += phi[0] * mom[0];
        s1 += phi[0] * mom[tri(1, 0)];
        s2 += phi[0] * mom[tri(0, 1)];
        for n in 1..=p {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            for k2 in 0..=n {
                let k1 = n - k2;
                let mut r = 0.0;
                if k1 >= 1 {
                    r += t1 * phi[tri(k1 - 1, k2)];
                }
                if k2 >= 1 {
                    r += t2 * phi[tri(k1, k2 - 1)];
                }
                if k1 >= 2 {
                    r += phi[tri(k1 - 2, k2)];
                }
                if k2 >= 2 {
                    r += phi[tri(k1, k2 - 2)];
                }
                let f = -r * inv;
                phi[tri(k1, k2)] = f;
                let fs = f * sign;
                s0 += fs * mom[tri(k1, k2)];
                s1 += fs * mom[tri(k1 + 1, k2)];
                s2 += fs * mom[tri(k1, k2 + 1)];
            }
        }
        let c = 1.0 / (2.0 * PI);
        PlanePoint::new((-sep.x2 * s0 + s2) * c, (sep.x1 * s0 - s1) * c)
    }

    pub fn velocities(&self, targets: &[PlanePoint]) -> Vec<PlanePoint> {
        targets.par_iter().map(|&x| self.velocity(x)).collect()
    }
}

/// Largest relative deviation `max |tree - direct| / max |direct|` over probe points.
pub fn tree_relative_error(tree: &TreeCode, cloud: &MarkerCloud, probes: &[PlanePoint]) -> f64 {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &x in probes {
        let direct = induced_velocity(cloud, x);
        worst = worst.max((tree.velocity(x) - direct).norm());
        scale = scale.max(direct.norm());
    }
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}
