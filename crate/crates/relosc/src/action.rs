//! Discretized action and saddle functional.
//!
//! For a trajectory with nodes `u_i` on the uniform grid `t_i = i*h`,
//! the action uses the node rectangle rule,
//!
//! ```text
//! I(u)      = sum_i h * Phi(v_i) + sum_i h * F(t_i, u_i)
//! J(u, psi) = I(u) + sum_i h * psi(t_i) * (G(u_i) - r)
//! ```
//!
//! with slopes `v_i` on the cells. The rectangle rule makes the node
//! gradient of `J` exactly the standard discrete stencil
//!
//! ```text
//! dJ/du_i = -(phi(v_i) - phi(v_{i-1})) + h * (grad F + psi * grad G)(t_i, u_i)
//! ```
//!
//! so stationarity is algebraically the discrete form of the periodic
//! problem `(phi(u'))' = grad_x(F + psi G)(t, u)`. The perturbation
//! `psi` is piecewise constant on `M` aligned cells, and `J` is affine
//! in it.

use crate::error::{Error, Result};
use crate::expr::ExprAst;
use crate::potentials::KineticPotential;
use crate::trajectory::Trajectory;

/// Time-dependent potential `F(t, x)`, expression backed.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePotential {
    ast: ExprAst,
    dim: usize,
}

impl TimePotential {
    pub fn parse(text: &str, dim: usize) -> Result<TimePotential> {
        let mut names: Vec<String> = vec!["t".into()];
        for k in 1..=dim {
            names.push(format!("x{k}"));
        }
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        Ok(TimePotential {
            ast: ExprAst::parse(text, &refs)?,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        let mut bind = Vec::with_capacity(1 + self.dim);
        bind.push(t);
        bind.extend_from_slice(x);
        self.ast.eval(&bind)
    }

    /// `F` and `grad_x F`, via one dual sweep per coordinate.
    pub fn value_and_grad(&self, t: f64, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut bind = Vec::with_capacity(1 + self.dim);
        bind.push(t);
        bind.extend_from_slice(x);
        let mut seed = vec![0.0; 1 + self.dim];
        let mut grad = vec![0.0; self.dim];
        let mut value = 0.0;
        for k in 0..self.dim {
            seed[1 + k] = 1.0;
            let (v, d) = self.ast.eval_dual(&bind, &seed)?;
            seed[1 + k] = 0.0;
            grad[k] = d;
            value = v;
        }
        Ok((value, grad))
    }
}

/// Perturbation shape `G(x)` with its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbShape {
    ast: ExprAst,
    dim: usize,
}

impl PerturbShape {
    pub fn parse(text: &str, dim: usize) -> Result<PerturbShape> {
        let names: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        Ok(PerturbShape {
            ast: ExprAst::parse(text, &refs)?,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.ast.eval(x)
    }

    pub fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut seed = vec![0.0; self.dim];
        let mut grad = vec![0.0; self.dim];
        let mut value = 0.0;
        for k in 0..self.dim {
            seed[k] = 1.0;
            let (v, d) = self.ast.eval_dual(x, &seed)?;
            seed[k] = 0.0;
            grad[k] = d;
            value = v;
        }
        Ok((value, grad))
    }
}

/// Positive time weight `gamma(t)` multiplying the potential.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeWeight {
    ast: ExprAst,
}

impl TimeWeight {
    pub fn parse(text: &str) -> Result<TimeWeight> {
        Ok(TimeWeight {
            ast: ExprAst::parse(text, &["t"])?,
        })
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        self.ast.eval(&[t])
    }
}

/// The variational problem data: kinetic barrier, potential, the
/// perturbation shape with its level `r`, and an optional time weight.
#[derive(Debug, Clone)]
pub struct SaddleProblem {
    pub kin: KineticPotential,
    pub dim: usize,
    pub period: f64,
    pub f: TimePotential,
    pub g: PerturbShape,
    pub gamma: Option<TimeWeight>,
    pub level: f64,
}

impl SaddleProblem {
    pub fn new(
        kin: KineticPotential,
        f: TimePotential,
        g: PerturbShape,
        gamma: Option<TimeWeight>,
        period: f64,
        level: f64,
    ) -> Result<SaddleProblem> {
        if f.dim() != g.dim() {
            return Err(Error::Precondition(format!(
                "F has dimension {} but G has dimension {}",
                f.dim(),
                g.dim()
            )));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::Precondition(format!("period must be positive, got {period}")));
        }
        if !level.is_finite() {
            return Err(Error::Precondition("level r must be finite".into()));
        }
        let dim = f.dim();
        Ok(SaddleProblem {
            kin,
            dim,
            period,
            f,
            g,
            gamma,
            level,
        })
    }

    /// Effective potential value `gamma(t) * F(t, x)`.
    pub fn potential(&self, t: f64, x: &[f64]) -> Result<f64> {
        let v = self.f.value(t, x)?;
        match &self.gamma {
            Some(w) => Ok(w.value(t)? * v),
            None => Ok(v),
        }
    }

    pub fn potential_and_grad(&self, t: f64, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, mut g) = self.f.value_and_grad(t, x)?;
        match &self.gamma {
            Some(w) => {
                let c = w.value(t)?;
                for gi in &mut g {
                    *gi *= c;
                }
                Ok((c * v, g))
            }
            None => Ok((v, g)),
        }
    }

    /// Mean-potential `Psi(x) = integral of the effective potential over
    /// one period`, by the node rectangle rule on `t_samples` points.
    pub fn mean_potential(&self, x: &[f64], t_samples: usize) -> Result<f64> {
        let h = self.period / t_samples as f64;
        let mut acc = 0.0;
        for j in 0..t_samples {
            acc += h * self.potential(j as f64 * h, x)?;
        }
        Ok(acc)
    }

    /// Checks `gamma > 0` on the grid; no-op when no weight is present.
    pub fn validate_weight(&self, t_samples: usize) -> Result<()> {
        if let Some(w) = &self.gamma {
            let h = self.period / t_samples as f64;
            for j in 0..t_samples {
                let v = w.value(j as f64 * h)?;
                if !(v > 0.0) {
                    return Err(Error::Precondition(format!(
                        "time weight must stay positive, got {v} at t = {}",
                        j as f64 * h
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Constraint family for the perturbation coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyKind {
    Free,
    Nonnegative,
    Box { lo: f64, hi: f64 },
}

impl FamilyKind {
    pub fn contains(&self, value: f64) -> bool {
        match self {
            FamilyKind::Free => value.is_finite(),
            FamilyKind::Nonnegative => value >= 0.0,
            FamilyKind::Box { lo, hi } => (*lo..=*hi).contains(&value),
        }
    }

    pub fn project(&self, value: f64) -> f64 {
        match self {
            FamilyKind::Free => value,
            FamilyKind::Nonnegative => value.max(0.0),
            FamilyKind::Box { lo, hi } => value.clamp(*lo, *hi),
        }
    }
}

/// Piecewise-constant perturbation weights on `M` uniform cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbCoeffs {
    values: Vec<f64>,
    family: FamilyKind,
}

impl PerturbCoeffs {
    pub fn new(values: Vec<f64>, family: FamilyKind) -> Result<PerturbCoeffs> {
        if values.is_empty() {
            return Err(Error::Precondition("need at least one cell".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("cell values must be finite".into()));
        }
        if let Some(bad) = values.iter().find(|v| !family.contains(**v)) {
            return Err(Error::Precondition(format!(
                "value {bad} violates the family constraint {family:?}"
            )));
        }
        Ok(PerturbCoeffs { values, family })
    }

    pub fn zeros(cells: usize, family: FamilyKind) -> PerturbCoeffs {
        let base = family.project(0.0);
        PerturbCoeffs {
            values: vec![base; cells],
            family,
        }
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn family(&self) -> FamilyKind {
        self.family
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// `integral |psi| dt`, exact for piecewise constants.
    pub fn abs_integral(&self, period: f64) -> f64 {
        let w = period / self.values.len() as f64;
        self.values.iter().map(|v| v.abs() * w).sum()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Projection of arbitrary cell values into the family.
    pub fn projected(&self, raw: &[f64]) -> PerturbCoeffs {
        PerturbCoeffs {
            values: raw.iter().map(|v| self.family.project(*v)).collect(),
            family: self.family,
        }
    }
}

/// Maps node index to perturbation cell; grids must be aligned.
pub fn cell_of_node(node: usize, node_count: usize, cells: usize) -> usize {
    node * cells / node_count
}

fn check_alignment(node_count: usize, cells: usize) -> Result<()> {
    if node_count.is_multiple_of(cells) || cells.is_multiple_of(node_count) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "{cells} cells do not align with {node_count} nodes"
        )))
    }
}

fn check_membership(p: &SaddleProblem, u: &Trajectory) -> Result<()> {
    if u.dim() != p.dim {
        return Err(Error::Precondition(format!(
            "trajectory dimension {} does not match problem dimension {}",
            u.dim(),
            p.dim
        )));
    }
    let (member, worst) = u.k_membership(p.kin.slope_bound());
    if !member {
        return Err(Error::Domain(format!(
            "max slope {worst} reaches the bound {}",
            p.kin.slope_bound()
        )));
    }
    Ok(())
}

/// The action `I(u)`.
pub fn action_value(p: &SaddleProblem, u: &Trajectory) -> Result<f64> {
    check_membership(p, u)?;
    let n = u.node_count();
    let h = u.step();
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for i in 0..n {
        kinetic += h * p.kin.value(&u.slope(i))?;
        potential += h * p.potential(i as f64 * h, u.node(i))?;
    }
    Ok(kinetic + potential)
}

/// The saddle value `J(u, psi)`.
pub fn j_value(p: &SaddleProblem, u: &Trajectory, psi: &PerturbCoeffs) -> Result<f64> {
    check_alignment(u.node_count(), psi.cells())?;
    let base = action_value(p, u)?;
    let n = u.node_count();
    let h = u.step();
    let mut coupling = 0.0;
    for i in 0..n {
        let c = cell_of_node(i, n, psi.cells());
        coupling += psi.values()[c] * h * (p.g.value(u.node(i))? - p.level);
    }
    Ok(base + coupling)
}

/// `J` and its exact node gradient (flat, node-major).
pub fn j_value_and_grad(
    p: &SaddleProblem,
    u: &Trajectory,
    psi: &PerturbCoeffs,
) -> Result<(f64, Vec<f64>)> {
    check_alignment(u.node_count(), psi.cells())?;
    check_membership(p, u)?;
    let n = u.node_count();
    let dim = u.dim();
    let h = u.step();
    let l = p.kin.slope_bound();

    let mut value = 0.0;
    let mut phi_slopes = Vec::with_capacity(n);
    for i in 0..n {
        let v = u.slope(i);
        let vn = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if vn >= l {
            return Err(Error::Domain(format!("slope {vn} at cell {i} reaches the bound {l}")));
        }
        let (phi_v, phi_g) = p.kin.value_and_grad(&v)?;
        value += h * phi_v;
        phi_slopes.push(phi_g);
    }

    let mut grad = vec![0.0; n * dim];
    for i in 0..n {
        let t = i as f64 * h;
        let x = u.node(i);
        let (fv, fg) = p.potential_and_grad(t, x)?;
        let (gv, gg) = p.g.value_and_grad(x)?;
        let c = cell_of_node(i, n, psi.cells());
        let w = psi.values()[c];
        value += h * (fv + w * (gv - p.level));
        let prev = &phi_slopes[(i + n - 1) % n];
        let here = &phi_slopes[i];
        for k in 0..dim {
            grad[i * dim + k] = -(here[k] - prev[k]) + h * (fg[k] + w * gg[k]);
        }
    }
    Ok((value, grad))
}

/// Per-cell integrals `sum_{i in cell} h * (G(u_i) - r)`; the outer
/// supergradient and the recession pairing both consume these.
pub fn g_cell_integrals(p: &SaddleProblem, u: &Trajectory, cells: usize) -> Result<Vec<f64>> {
    check_alignment(u.node_count(), cells)?;
    let n = u.node_count();
    let h = u.step();
    let mut acc = vec![0.0; cells];
    for i in 0..n {
        let c = cell_of_node(i, n, cells);
        acc[c] += h * (p.g.value(u.node(i))? - p.level);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn double_well(level: f64) -> SaddleProblem {
        SaddleProblem::new(
            KineticPotential::relativistic(1.0).unwrap(),
            TimePotential::parse("(x1^2-1)^2", 1).unwrap(),
            PerturbShape::parse("x1", 1).unwrap(),
            None,
            1.0,
            level,
        )
        .unwrap()
    }

    #[test]
    fn action_on_constants() {
        let p = double_well(0.0);
        let bottom = Trajectory::constant(&[1.0], 8, 1.0).unwrap();
        assert!((action_value(&p, &bottom).unwrap() - (-1.0)).abs() < 1e-14);
        let origin = Trajectory::constant(&[0.0], 8, 1.0).unwrap();
        assert!(action_value(&p, &origin).unwrap().abs() < 1e-14);
    }

    #[test]
    fn action_two_node_quadrature() {
        let p = double_well(0.0);
        let u = Trajectory::new(1, 1.0, vec![0.0, 0.25]).unwrap();
        let value = action_value(&p, &u).unwrap();
        let kinetic = -(0.75f64).sqrt();
        let potential = 0.5 * (1.0 + (0.0625f64 - 1.0).powi(2));
        assert!((value - (kinetic + potential)).abs() < 1e-12);
        assert!((value - 0.0734277).abs() < 1e-6);
    }

    #[test]
    fn action_rejects_boundary_slopes() {
        let p = double_well(0.0);
        let u = Trajectory::new(1, 1.0, vec![0.0, 0.75]).unwrap();
        assert!(matches!(action_value(&p, &u), Err(Error::Domain(_))));
    }

    #[test]
    fn j_reduces_to_action_when_g_vanishes() {
        let p = double_well(0.0);
        let u = Trajectory::constant(&[0.0], 8, 1.0).unwrap();
        let psi = PerturbCoeffs::new(vec![3.0, -2.0], FamilyKind::Free).unwrap();
        let j = j_value(&p, &u, &psi).unwrap();
        assert!((j - action_value(&p, &u).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn j_on_constant_trajectory() {
        let p = double_well(0.0);
        let u = Trajectory::constant(&[1.0], 8, 1.0).unwrap();
        let psi = PerturbCoeffs::new(vec![0.7; 4], FamilyKind::Free).unwrap();
        let j = j_value(&p, &u, &psi).unwrap();
        assert!((j - (-1.0 + 0.7)).abs() < 1e-14);
    }

    #[test]
    fn j_is_affine_in_psi() {
        let p = double_well(0.3);
        let u = Trajectory::new(1, 1.0, vec![0.1, 0.3, 0.25, 0.05]).unwrap();
        let a = PerturbCoeffs::new(vec![1.0, -2.0], FamilyKind::Free).unwrap();
        let b = PerturbCoeffs::new(vec![-0.5, 4.0], FamilyKind::Free).unwrap();
        let mid = PerturbCoeffs::new(
            a.values().iter().zip(b.values()).map(|(x, y)| 0.5 * (x + y)).collect(),
            FamilyKind::Free,
        )
        .unwrap();
        let ja = j_value(&p, &u, &a).unwrap();
        let jb = j_value(&p, &u, &b).unwrap();
        let jm = j_value(&p, &u, &mid).unwrap();
        assert!((jm - 0.5 * (ja + jb)).abs() <= 1e-12);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let p = double_well(0.0);
        let u = Trajectory::constant(&[0.0], 6, 1.0).unwrap();
        let psi = PerturbCoeffs::new(vec![0.0; 4], FamilyKind::Free).unwrap();
        assert!(matches!(j_value(&p, &u, &psi), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn gradient_vanishes_at_critical_constants() {
        let p = double_well(0.0);
        let psi = PerturbCoeffs::zeros(4, FamilyKind::Free);
        for x in [1.0, 0.0, -1.0] {
            let u = Trajectory::constant(&[x], 8, 1.0).unwrap();
            let (_, grad) = j_value_and_grad(&p, &u, &psi).unwrap();
            let worst = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
            assert!(worst < 1e-14, "residual gradient {worst} at x = {x}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand_chacha::rand_core::SeedableRng;
        let p = double_well(0.1);
        let psi = PerturbCoeffs::new(vec![0.3, -0.2], FamilyKind::Free).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let u = crate::trajectory::random_k_member(1, 8, 1.0, 1.0, 0.1, 1.0, &mut rng);
            let (_, grad) = j_value_and_grad(&p, &u, &psi).unwrap();
            let eps = 1e-6;
            for idx in 0..u.nodes().len() {
                let mut plus = u.nodes().to_vec();
                let mut minus = plus.clone();
                plus[idx] += eps;
                minus[idx] -= eps;
                let jp = j_value(&p, &u.with_nodes(plus).unwrap(), &psi).unwrap();
                let jm = j_value(&p, &u.with_nodes(minus).unwrap(), &psi).unwrap();
                let fd = (jp - jm) / (2.0 * eps);
                assert!(
                    (fd - grad[idx]).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "fd {fd} vs grad {} at {idx}",
                    grad[idx]
                );
            }
        }
    }
}
