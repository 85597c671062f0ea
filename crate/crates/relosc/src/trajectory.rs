//! Periodic piecewise-linear trajectories with a pointwise slope bound.
//!
//! A trajectory stores `N` nodes in R^n on a uniform grid over one
//! period `T`; the closing node is implicit (`u_N = u_0`), so
//! periodicity is structural. Slopes live on the cells,
//! `v_i = (u_{i+1 mod N} - u_i) / h` with `h = T/N`, and membership in
//! the admissible class asks `max_i |v_i| <= L`. Every member satisfies
//! the elementary estimate `sup |u| <= L*T + inf |u|`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    period: f64,
    nodes: Vec<f64>, // N * dim, node-major
}

impl Trajectory {
    pub fn new(dim: usize, period: f64, nodes: Vec<f64>) -> Result<Trajectory> {
        if dim == 0 {
            return Err(Error::Precondition("dimension must be at least 1".into()));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::Precondition(format!("period must be positive, got {period}")));
        }
        if !nodes.len().is_multiple_of(dim) || nodes.len() / dim < 2 {
            return Err(Error::Precondition(format!(
                "need at least 2 nodes of dimension {dim}, got {} values",
                nodes.len()
            )));
        }
        if nodes.iter().any(|c| !c.is_finite()) {
            return Err(Error::Precondition("nodes must be finite".into()));
        }
        Ok(Trajectory { dim, period, nodes })
    }

    /// Constant trajectory `u = x` on `node_count` nodes.
    pub fn constant(x: &[f64], node_count: usize, period: f64) -> Result<Trajectory> {
        if node_count < 2 {
            return Err(Error::Precondition(format!(
                "need at least 2 nodes, got {node_count}"
            )));
        }
        let mut nodes = Vec::with_capacity(node_count * x.len());
        for _ in 0..node_count {
            nodes.extend_from_slice(x);
        }
        Trajectory::new(x.len(), period, nodes)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len() / self.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Grid spacing `h = T/N`.
    pub fn step(&self) -> f64 {
        self.period / self.node_count() as f64
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Replaces the node coordinates, keeping grid and dimension.
    pub fn with_nodes(&self, nodes: Vec<f64>) -> Result<Trajectory> {
        Trajectory::new(self.dim, self.period, nodes)
    }

    /// Slope on cell `i` (toward node `i+1 mod N`).
    pub fn slope(&self, i: usize) -> Vec<f64> {
        let n = self.node_count();
        let h = self.step();
        let a = self.node(i);
        let b = self.node((i + 1) % n);
        a.iter().zip(b).map(|(ai, bi)| (bi - ai) / h).collect()
    }

    pub fn max_slope_norm(&self) -> f64 {
        let n = self.node_count();
        let mut worst = 0.0f64;
        for i in 0..n {
            let v = self.slope(i);
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            worst = worst.max(norm);
        }
        worst
    }

    /// Membership in the slope-bounded class: `(member, max slope)`.
    pub fn k_membership(&self, l: f64) -> (bool, f64) {
        let worst = self.max_slope_norm();
        (worst <= l * (1.0 + 1e-12), worst)
    }

    /// The elementary estimate `sup |u| <= L*T + inf |u|`.
    ///
    /// Returns `(holds, slack)` with
    /// `slack = L*T + min_i |u_i| - max_i |u_i|`; errors if the
    /// trajectory is not a member for this `l`.
    pub fn bound_sup_inf(&self, l: f64) -> Result<(bool, f64)> {
        let (member, worst) = self.k_membership(l);
        if !member {
            return Err(Error::Precondition(format!(
                "max slope {worst} exceeds the bound {l}"
            )));
        }
        let mut min_n = f64::INFINITY;
        let mut max_n: f64 = 0.0;
        for i in 0..self.node_count() {
            let n = self.node(i).iter().map(|c| c * c).sum::<f64>().sqrt();
            min_n = min_n.min(n);
            max_n = max_n.max(n);
        }
        let slack = l * self.period + min_n - max_n;
        Ok((slack >= -1e-12, slack))
    }

    /// Max over nodes of the euclidean node distance.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        assert_eq!(self.dim, other.dim);
        assert_eq!(self.node_count(), other.node_count());
        let mut worst = 0.0f64;
        for i in 0..self.node_count() {
            let d: f64 = self
                .node(i)
                .iter()
                .zip(other.node(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(d);
        }
        worst
    }

    /// CSV rows `t, x1, .., xn` with the closing node repeated at `t = T`.
    pub fn csv_rows(&self) -> Vec<(f64, Vec<f64>)> {
        let n = self.node_count();
        let h = self.step();
        let mut rows = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let t = if i == n { self.period } else { i as f64 * h };
            rows.push((t, self.node(i % n).to_vec()));
        }
        rows
    }
}

/// Seeded random member of the slope-bounded class.
///
/// Nodes are a random base point in the ball of `center_radius` plus
/// zero-mean increments rescaled so the max slope is a random fraction
/// of `(1 - margin) * l`.
pub fn random_k_member(
    dim: usize,
    node_count: usize,
    period: f64,
    l: f64,
    margin: f64,
    center_radius: f64,
    rng: &mut ChaCha8Rng,
) -> Trajectory {
    assert!(node_count >= 2);
    let h = period / node_count as f64;
    let center: Vec<f64> = (0..dim)
        .map(|_| rng.gen_range(-center_radius..=center_radius))
        .collect();
    let mut incs: Vec<f64> = (0..node_count * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // Remove the mean per coordinate so the cumulative walk closes up.
    for k in 0..dim {
        let mean: f64 = (0..node_count).map(|i| incs[i * dim + k]).sum::<f64>() / node_count as f64;
        for i in 0..node_count {
            incs[i * dim + k] -= mean;
        }
    }
    let mut worst = 0.0f64;
    for i in 0..node_count {
        let s: f64 = (0..dim).map(|k| incs[i * dim + k].powi(2)).sum::<f64>().sqrt() / h;
        worst = worst.max(s);
    }
    let target = rng.gen_range(0.2..0.95) * (1.0 - margin) * l;
    let scale = if worst > 0.0 { target / worst } else { 0.0 };
    let mut nodes = Vec::with_capacity(node_count * dim);
    let mut current = center.clone();
    for i in 0..node_count {
        nodes.extend_from_slice(&current);
        for k in 0..dim {
            current[k] += incs[i * dim + k] * scale;
        }
    }
    Trajectory::new(dim, period, nodes).expect("generated trajectory is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn constant_trajectory() {
        let u = Trajectory::constant(&[0.0], 8, 1.0).unwrap();
        assert_eq!(u.max_slope_norm(), 0.0);
        let (member, worst) = u.k_membership(0.5);
        assert!(member);
        assert_eq!(worst, 0.0);

        let u = Trajectory::constant(&[1.0, -1.0], 4, 2.0).unwrap();
        assert_eq!(u.max_slope_norm(), 0.0);
        let (holds, slack) = u.bound_sup_inf(1.0).unwrap();
        assert!(holds);
        // sup = inf, so the slack is the full L*T.
        assert!((slack - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sawtooth_slopes() {
        let u = Trajectory::new(1, 1.0, vec![0.0, 0.25]).unwrap();
        assert_eq!(u.slope(0), vec![0.5]);
        assert_eq!(u.slope(1), vec![-0.5]);
        assert!(u.k_membership(1.0).0);
        let (holds, slack) = u.bound_sup_inf(1.0).unwrap();
        assert!(holds);
        assert!((slack - 0.75).abs() < 1e-15);

        let steep = Trajectory::new(1, 1.0, vec![0.0, 0.75]).unwrap();
        let (member, worst) = steep.k_membership(1.0);
        assert!(!member);
        assert!((worst - 1.5).abs() < 1e-15);
        assert!(matches!(steep.bound_sup_inf(1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn random_members_satisfy_sup_inf_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..1000 {
            let dim = 1 + (case % 2);
            let n = 4 + (case % 5) * 7;
            let u = random_k_member(dim, n, 1.0, 1.0, 1e-3, 2.0, &mut rng);
            let (member, _) = u.k_membership(1.0);
            assert!(member);
            let (holds, slack) = u.bound_sup_inf(1.0).unwrap();
            assert!(holds, "slack {slack} on case {case}");
        }
    }

    #[test]
    fn slopes_close_the_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let u = random_k_member(2, 16, 1.0, 1.0, 1e-3, 1.0, &mut rng);
            let n = u.node_count();
            for k in 0..u.dim() {
                let total: f64 = (0..n).map(|i| u.slope(i)[k]).sum();
                assert!(total.abs() <= 1e-10 * n as f64, "loop residue {total}");
            }
        }
    }

    #[test]
    fn csv_repeats_closing_node() {
        let u = Trajectory::new(1, 1.0, vec![0.0, 0.25]).unwrap();
        let rows = u.csv_rows();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].1, rows[2].1);
        assert_eq!(rows[2].0, 1.0);
    }
}
