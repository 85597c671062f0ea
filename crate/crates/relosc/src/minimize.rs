//! Constrained descent on trajectories, multi-start search, minima
//! clustering, and the coercivity-derived sampling radius.
//!
//! The descent is steepest descent with Armijo backtracking on top of a
//! Barzilai-Borwein step guess. Any step that would push a slope past
//! `(1 - margin) * L` is shortened first; the kinetic gradient blow-up
//! then acts as an interior barrier, so feasibility is only a matter of
//! step length. `|v_i(alpha)|` is convex in the step, so halving never
//! leaves the feasible set once the base point is feasible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::action::{j_value, j_value_and_grad, PerturbCoeffs, SaddleProblem};
use crate::error::{Error, Result};
use crate::trajectory::{random_k_member, Trajectory};

/// Anything the descent engine can minimize over trajectories.
pub trait Objective: Sync {
    fn eval(&self, u: &Trajectory) -> Result<f64>;
    fn eval_grad(&self, u: &Trajectory) -> Result<(f64, Vec<f64>)>;
    /// Slope bound of the underlying kinetic potential.
    fn slope_bound(&self) -> f64;
}

/// The saddle functional `u -> J(u, psi)` at fixed `psi`.
pub struct JObjective<'a> {
    pub problem: &'a SaddleProblem,
    pub psi: &'a PerturbCoeffs,
}

impl Objective for JObjective<'_> {
    fn eval(&self, u: &Trajectory) -> Result<f64> {
        j_value(self.problem, u, self.psi)
    }

    fn eval_grad(&self, u: &Trajectory) -> Result<(f64, Vec<f64>)> {
        j_value_and_grad(self.problem, u, self.psi)
    }

    fn slope_bound(&self) -> f64 {
        self.problem.kin.slope_bound()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    IterationCap,
    LineSearchStall,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::IterationCap => "iteration-cap",
            Termination::LineSearchStall => "line-search-stall",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalMinOptions {
    /// Slopes are confined to `(1 - margin) * L`.
    pub margin: f64,
    /// Convergence threshold on the max node residual `|g_i| / h`.
    pub tol_resid: f64,
    pub max_iters: usize,
    pub armijo_c: f64,
    pub step_init: f64,
    pub step_min: f64,
}

impl Default for LocalMinOptions {
    fn default() -> Self {
        LocalMinOptions {
            margin: 1e-3,
            tol_resid: 1e-6,
            max_iters: 4000,
            armijo_c: 1e-4,
            step_init: 1.0,
            step_min: 1e-18,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalMin {
    pub trajectory: Trajectory,
    pub value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Max node residual `|g_i| / h` at the returned point; this equals
    /// the discrete equation residual by the shared stencil.
    pub residual: f64,
    pub status: Termination,
}

pub(crate) fn node_residual_inf(grad: &[f64], dim: usize, h: f64) -> f64 {
    let mut worst = 0.0f64;
    for chunk in grad.chunks_exact(dim) {
        let n = chunk.iter().map(|c| c * c).sum::<f64>().sqrt();
        worst = worst.max(n);
    }
    worst / h
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn stepped(u: &Trajectory, grad: &[f64], alpha: f64) -> Trajectory {
    let nodes: Vec<f64> = u
        .nodes()
        .iter()
        .zip(grad)
        .map(|(x, g)| x - alpha * g)
        .collect();
    u.with_nodes(nodes).expect("stepped nodes stay valid")
}

/// Steepest descent with Armijo backtracking and feasibility shortening.
pub fn descend(obj: &dyn Objective, u0: &Trajectory, opts: &LocalMinOptions) -> Result<LocalMin> {
    let l = obj.slope_bound();
    let cap = (1.0 - opts.margin) * l;
    let (member, worst) = u0.k_membership(cap);
    if !member {
        return Err(Error::Precondition(format!(
            "start has max slope {worst}, above the margin bound {cap}"
        )));
    }
    let h = u0.step();
    let dim = u0.dim();

    let mut u = u0.clone();
    let (mut value, mut grad) = obj.eval_grad(&u)?;
    let mut alpha = opts.step_init;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None; // (step s, grad y base)
    let mut status = Termination::IterationCap;
    let mut iterations = 0;

    for _ in 0..opts.max_iters {
        let residual = node_residual_inf(&grad, dim, h);
        if residual <= opts.tol_resid {
            status = Termination::Converged;
            break;
        }

        // Barzilai-Borwein guess from the previous accepted step.
        if let Some((s, y)) = &prev {
            let ss: f64 = s.iter().map(|a| a * a).sum();
            let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
            if sy > 0.0 && ss > 0.0 {
                alpha = (ss / sy).clamp(1e-14, 1e8);
            }
        }

        // Shorten until the candidate respects the slope margin.
        let mut stalled = false;
        loop {
            let candidate = stepped(&u, &grad, alpha);
            if candidate.max_slope_norm() <= cap {
                break;
            }
            alpha *= 0.5;
            if alpha < opts.step_min {
                stalled = true;
                break;
            }
        }

        // Armijo decrease on the shortened step.
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        let mut accepted = None;
        while !stalled {
            let candidate = stepped(&u, &grad, alpha);
            match obj.eval(&candidate) {
                Ok(v) if v <= value - opts.armijo_c * alpha * g2 => {
                    accepted = Some((candidate, v));
                    break;
                }
                _ => {
                    alpha *= 0.5;
                    if alpha < opts.step_min {
                        stalled = true;
                    }
                }
            }
        }

        let Some((next, next_value)) = accepted else {
            status = Termination::LineSearchStall;
            break;
        };

        let (_, next_grad) = obj.eval_grad(&next)?;
        let s: Vec<f64> = next
            .nodes()
            .iter()
            .zip(u.nodes())
            .map(|(a, b)| a - b)
            .collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        prev = Some((s, y));
        u = next;
        value = next_value;
        grad = next_grad;
        iterations += 1;
    }

    let residual = node_residual_inf(&grad, dim, h);
    if status == Termination::IterationCap && residual <= opts.tol_resid {
        status = Termination::Converged;
    }
    Ok(LocalMin {
        trajectory: u,
        value,
        iterations,
        grad_norm: euclid(&grad),
        residual,
        status,
    })
}

/// Local minimization of `J(., psi)` from `u0`.
pub fn local_min(
    p: &SaddleProblem,
    psi: &PerturbCoeffs,
    u0: &Trajectory,
    opts: &LocalMinOptions,
) -> Result<LocalMin> {
    descend(&JObjective { problem: p, psi }, u0, opts)
}

/// Low-gain descent that approaches a residual target from above.
///
/// Plain gradient steps, with the step capped well below the inverse of
/// the largest curvature seen so far; the residual then contracts by a
/// bounded factor per iteration and the first iterate at or under `tol`
/// lands in a narrow band just below it. Refinement studies rely on
/// that band to make residual columns comparable across grids.
pub fn descend_to_band(
    obj: &dyn Objective,
    u0: &Trajectory,
    tol: f64,
    margin: f64,
    max_iters: usize,
) -> Result<LocalMin> {
    let l = obj.slope_bound();
    let cap = (1.0 - margin) * l;
    let h = u0.step();
    let dim = u0.dim();
    let mut u = u0.clone();
    let (mut value, mut grad) = obj.eval_grad(&u)?;
    let mut alpha = 1e-3 * h;
    let mut kappa_max = 0.0f64;
    let mut iterations = 0;

    for _ in 0..max_iters {
        let residual = node_residual_inf(&grad, dim, h);
        if residual <= tol {
            return Ok(LocalMin {
                trajectory: u,
                value,
                iterations,
                grad_norm: euclid(&grad),
                residual,
                status: Termination::Converged,
            });
        }
        let mut candidate;
        loop {
            candidate = stepped(&u, &grad, alpha);
            let feasible = candidate.max_slope_norm() <= cap;
            if feasible {
                if let Ok(v) = obj.eval(&candidate) {
                    if v <= value {
                        value = v;
                        break;
                    }
                }
            }
            alpha *= 0.5;
            if alpha < 1e-18 {
                return Ok(LocalMin {
                    trajectory: u,
                    value,
                    iterations,
                    grad_norm: euclid(&grad),
                    residual,
                    status: Termination::LineSearchStall,
                });
            }
        }
        let (_, next_grad) = obj.eval_grad(&candidate)?;
        let sn = alpha * euclid(&grad);
        let yn = euclid(
            &next_grad
                .iter()
                .zip(&grad)
                .map(|(a, b)| a - b)
                .collect::<Vec<f64>>(),
        );
        if yn > 0.0 && sn > 0.0 {
            kappa_max = kappa_max.max(yn / sn);
        }
        let next_residual = node_residual_inf(&next_grad, dim, h);
        alpha *= if next_residual < 0.6 * residual { 0.5 } else { 1.3 };
        if kappa_max > 0.0 {
            alpha = alpha.min(0.15 / kappa_max);
        }
        u = candidate;
        grad = next_grad;
        iterations += 1;
    }

    let residual = node_residual_inf(&grad, dim, h);
    Ok(LocalMin {
        trajectory: u,
        value,
        iterations,
        grad_norm: euclid(&grad),
        residual,
        status: Termination::IterationCap,
    })
}

/// Growth constants extracted from sampled bounds: `|G| <= k (|x|^q + 1)`
/// everywhere, `F >= nu |x|^q` outside the ball of radius `delta`,
/// `M(t)` the sampled sup of `|grad F|` over that ball, and
/// `beta(t) = nu delta^q + M(t) delta + |F(t, 0)|`. From these,
///
/// ```text
/// eta  = -integral beta + Phi(0) T - |r| integral |psi|
/// eta1 = eta - k integral |psi|
/// ```
///
/// bound every sublevel set of `J(., psi)` in sup norm.
#[derive(Debug, Clone)]
pub struct GrowthConstants {
    pub q: f64,
    pub k: f64,
    pub delta: f64,
    pub nu: f64,
    /// Sampled sup of `|grad F(t, .)|` over the delta-ball, per grid time.
    pub grad_sup_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub eta: f64,
    pub eta1: f64,
}

impl GrowthConstants {
    pub fn beta_integral(&self, period: f64) -> f64 {
        let h = period / self.beta_grid.len() as f64;
        self.beta_grid.iter().map(|b| b * h).sum()
    }

    /// Recomputes `eta` and `eta1` for a different perturbation; the
    /// sampled bounds `k`, `delta`, `nu`, `beta` do not depend on it.
    pub fn with_psi(&self, p: &SaddleProblem, psi: &PerturbCoeffs) -> Result<GrowthConstants> {
        let load = self.k * psi.sup_norm();
        if self.nu <= load {
            return Err(Error::Constants(format!(
                "nu = {} must exceed k * sup|psi| = {load}",
                self.nu
            )));
        }
        let phi0 = p.kin.value(&vec![0.0; p.dim])?;
        let abs_int = psi.abs_integral(p.period);
        let eta = -self.beta_integral(p.period) + phi0 * p.period - p.level.abs() * abs_int;
        let eta1 = eta - self.k * abs_int;
        Ok(GrowthConstants {
            eta,
            eta1,
            grad_sup_grid: self.grad_sup_grid.clone(),
            beta_grid: self.beta_grid.clone(),
            ..*self
        })
    }
}

/// Sup-norm bound on any trajectory in the sublevel set
/// `{u : J(u, psi) <= rho}`:
///
/// ```text
/// radius = ((rho - eta1) / ((nu - k sup|psi|) T))^(1/q) + L T
/// ```
pub fn sampling_radius(
    gc: &GrowthConstants,
    psi: &PerturbCoeffs,
    rho: f64,
    l: f64,
    period: f64,
) -> Result<f64> {
    let load = gc.k * psi.sup_norm();
    if gc.nu <= load {
        return Err(Error::Constants(format!(
            "nu = {} must exceed k * sup|psi| = {load}",
            gc.nu
        )));
    }
    let num = (rho - gc.eta1).max(0.0);
    Ok((num / ((gc.nu - load) * period)).powf(1.0 / gc.q) + l * period)
}

#[derive(Debug, Clone)]
pub struct MultiStartOptions {
    pub starts: usize,
    pub node_count: usize,
    pub seed: u64,
    /// Constants are placed on a grid of the ball of this radius; random
    /// members are centered inside it as well.
    pub search_radius: f64,
    pub local: LocalMinOptions,
    /// Certificate value window is `eps_val_scale * (1 + |best|)`.
    pub eps_val_scale: f64,
    /// Cluster separation; defaults to `0.1 * L * T` when `None`.
    pub eps_sep: Option<f64>,
}

impl Default for MultiStartOptions {
    fn default() -> Self {
        MultiStartOptions {
            starts: 24,
            node_count: 64,
            seed: 42,
            search_radius: 3.0,
            local: LocalMinOptions::default(),
            eps_val_scale: 1e-4,
            eps_sep: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cluster {
    pub representative: Trajectory,
    pub value: f64,
    pub multiplicity: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct TwoMinimaCertificate {
    pub value_gap: f64,
    pub separation: f64,
    pub eps_val: f64,
    pub eps_sep: f64,
}

#[derive(Debug, Clone)]
pub struct MinimaReport {
    pub runs: Vec<LocalMin>,
    pub clusters: Vec<Cluster>,
    pub certificate: Option<TwoMinimaCertificate>,
    pub eps_val: f64,
    pub eps_sep: f64,
}

impl MinimaReport {
    pub fn best_value(&self) -> Option<f64> {
        self.clusters.first().map(|c| c.value)
    }
}

/// Greedy clustering of minimization results by sup-norm distance.
///
/// Runs are visited in value order; each either joins the first cluster
/// whose representative is within `eps_sep` or opens a new one, so
/// clusters come out sorted by value and pairwise `eps_sep`-separated.
pub fn cluster_minima(runs: &[LocalMin], eps_sep: f64) -> Vec<Cluster> {
    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|a, b| {
        runs[*a]
            .value
            .partial_cmp(&runs[*b].value)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(b))
    });
    let mut clusters: Vec<Cluster> = Vec::new();
    for idx in order {
        let run = &runs[idx];
        match clusters
            .iter_mut()
            .find(|c| c.representative.sup_distance(&run.trajectory) < eps_sep)
        {
            Some(c) => c.multiplicity += 1,
            None => clusters.push(Cluster {
                representative: run.trajectory.clone(),
                value: run.value,
                multiplicity: 1,
                residual: run.residual,
            }),
        }
    }
    clusters
}

pub fn make_certificate(clusters: &[Cluster], eps_val: f64, eps_sep: f64) -> Option<TwoMinimaCertificate> {
    if clusters.len() < 2 {
        return None;
    }
    let gap = clusters[1].value - clusters[0].value;
    if gap <= eps_val {
        Some(TwoMinimaCertificate {
            value_gap: gap,
            separation: clusters[0].representative.sup_distance(&clusters[1].representative),
            eps_val,
            eps_sep,
        })
    } else {
        None
    }
}

/// Deterministic start set: constants on a grid of the search ball plus
/// seeded random members of the slope-bounded class.
pub fn generate_starts(p: &SaddleProblem, opts: &MultiStartOptions) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let dim = p.dim;
    let radius = opts.search_radius;
    let n_const = opts.starts.div_ceil(2);
    let n_random = opts.starts - n_const;
    let mut starts = Vec::with_capacity(opts.starts);

    match dim {
        1 => {
            for i in 0..n_const {
                let x = if n_const == 1 {
                    0.0
                } else {
                    -radius + 2.0 * radius * i as f64 / (n_const - 1) as f64
                };
                starts.push(Trajectory::constant(&[x], opts.node_count, p.period).expect("constant start"));
            }
        }
        2 => {
            // Sunflower spiral covers the disk evenly and deterministically.
            let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            for i in 0..n_const {
                let frac = (i as f64 + 0.5) / n_const as f64;
                let r = radius * frac.sqrt();
                let theta = golden * i as f64;
                let x = [r * theta.cos(), r * theta.sin()];
                starts.push(Trajectory::constant(&x, opts.node_count, p.period).expect("constant start"));
            }
        }
        _ => {
            use rand::Rng;
            for _ in 0..n_const {
                let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-radius..=radius)).collect();
                starts.push(Trajectory::constant(&x, opts.node_count, p.period).expect("constant start"));
            }
        }
    }

    let l = p.kin.slope_bound();
    for _ in 0..n_random {
        starts.push(random_k_member(
            dim,
            opts.node_count,
            p.period,
            l,
            opts.local.margin * 1.5,
            radius,
            &mut rng,
        ));
    }
    starts
}

/// Runs local descent from every start and clusters the outcomes.
/// Starts run concurrently; results reduce in start order, so a fixed
/// seed yields a bit-identical report.
pub fn multi_start_from(
    p: &SaddleProblem,
    psi: &PerturbCoeffs,
    starts: &[Trajectory],
    opts: &MultiStartOptions,
) -> MinimaReport {
    let runs: Vec<LocalMin> = starts
        .par_iter()
        .filter_map(|u0| local_min(p, psi, u0, &opts.local).ok())
        .collect();
    let eps_sep = opts
        .eps_sep
        .unwrap_or(0.1 * p.kin.slope_bound() * p.period);
    let clusters = cluster_minima(&runs, eps_sep);
    let eps_val = opts.eps_val_scale * (1.0 + clusters.first().map_or(0.0, |c| c.value.abs()));
    let certificate = make_certificate(&clusters, eps_val, eps_sep);
    MinimaReport {
        runs,
        clusters,
        certificate,
        eps_val,
        eps_sep,
    }
}

pub fn multi_start(p: &SaddleProblem, psi: &PerturbCoeffs, opts: &MultiStartOptions) -> MinimaReport {
    let starts = generate_starts(p, opts);
    multi_start_from(p, psi, &starts, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{FamilyKind, PerturbShape, TimePotential};
    use crate::potentials::KineticPotential;

    fn problem(f: &str) -> SaddleProblem {
        SaddleProblem::new(
            KineticPotential::relativistic(1.0).unwrap(),
            TimePotential::parse(f, 1).unwrap(),
            PerturbShape::parse("x1", 1).unwrap(),
            None,
            1.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn descends_into_the_nearest_well() {
        let p = problem("(x1^2-1)^2");
        let psi = PerturbCoeffs::zeros(4, FamilyKind::Free);
        let opts = LocalMinOptions::default();

        let up = Trajectory::constant(&[0.9], 16, 1.0).unwrap();
        let res = local_min(&p, &psi, &up, &opts).unwrap();
        assert_eq!(res.status, Termination::Converged);
        assert!((res.value - (-1.0)).abs() < 1e-9, "value {}", res.value);
        assert!((res.trajectory.node(0)[0] - 1.0).abs() < 1e-5);

        let down = Trajectory::constant(&[-0.9], 16, 1.0).unwrap();
        let res = local_min(&p, &psi, &down, &opts).unwrap();
        assert!((res.value - (-1.0)).abs() < 1e-9);
        assert!((res.trajectory.node(0)[0] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn critical_start_returns_immediately() {
        let p = problem("(x1^2-1)^2");
        let psi = PerturbCoeffs::zeros(4, FamilyKind::Free);
        let u = Trajectory::constant(&[1.0], 16, 1.0).unwrap();
        let res = local_min(&p, &psi, &u, &LocalMinOptions::default()).unwrap();
        assert_eq!(res.iterations, 0);
        assert_eq!(res.status, Termination::Converged);
    }

    #[test]
    fn descent_values_never_increase_and_stay_feasible() {
        let p = problem("(x1^2-1)^2+0.1*x1");
        let psi = PerturbCoeffs::zeros(4, FamilyKind::Free);
        let opts = LocalMinOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let u0 = random_k_member(1, 16, 1.0, 1.0, opts.margin * 1.5, 2.0, &mut rng);
            let start_value = j_value(&p, &u0, &psi).unwrap();
            let res = local_min(&p, &psi, &u0, &opts).unwrap();
            assert!(res.value <= start_value + 1e-15);
            let cap = (1.0 - opts.margin) * 1.0 + 1e-12;
            assert!(res.trajectory.max_slope_norm() <= cap);
        }
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let p = problem("(x1^2-1)^2");
        let psi = PerturbCoeffs::zeros(2, FamilyKind::Free);
        let u = Trajectory::new(1, 1.0, vec![0.0, 0.4999]).unwrap(); // slope ~0.9998 > (1-1e-3)
        assert!(matches!(
            local_min(&p, &psi, &u, &LocalMinOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn sampling_radius_formula() {
        let gc = GrowthConstants {
            q: 2.0,
            k: 0.1,
            delta: 1.0,
            nu: 0.5,
            grad_sup_grid: vec![0.0],
            beta_grid: vec![0.0],
            eta: 0.0,
            eta1: -3.0,
        };
        let psi = PerturbCoeffs::new(vec![1.0], FamilyKind::Free).unwrap();
        let r = sampling_radius(&gc, &psi, 0.0, 1.0, 1.0).unwrap();
        assert!((r - (7.5f64.sqrt() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn sampling_radius_requires_dominant_nu() {
        let gc = GrowthConstants {
            q: 2.0,
            k: 0.1,
            delta: 1.0,
            nu: 0.1,
            grad_sup_grid: vec![0.0],
            beta_grid: vec![0.0],
            eta: 0.0,
            eta1: -3.0,
        };
        let psi = PerturbCoeffs::new(vec![1.0], FamilyKind::Free).unwrap();
        assert!(matches!(
            sampling_radius(&gc, &psi, 0.0, 1.0, 1.0),
            Err(Error::Constants(_))
        ));
    }

    #[test]
    fn multi_start_finds_both_wells() {
        let p = problem("(x1^2-1)^2");
        let psi = PerturbCoeffs::zeros(4, FamilyKind::Free);
        let opts = MultiStartOptions {
            starts: 16,
            node_count: 16,
            search_radius: 2.5,
            ..Default::default()
        };
        let report = multi_start(&p, &psi, &opts);
        assert!(report.clusters.len() >= 2);
        assert!((report.clusters[0].value - (-1.0)).abs() < 1e-8);
        assert!((report.clusters[1].value - (-1.0)).abs() < 1e-8);
        let cert = report.certificate.expect("tied wells certify");
        assert!(cert.separation > 1.5);
    }

    #[test]
    fn tilted_well_has_unique_global_cluster() {
        let p = problem("(x1^2-1)^2+0.1*x1");
        let psi = PerturbCoeffs::zeros(4, FamilyKind::Free);
        let opts = MultiStartOptions {
            starts: 16,
            node_count: 16,
            search_radius: 2.5,
            ..Default::default()
        };
        let report = multi_start(&p, &psi, &opts);
        assert!(report.certificate.is_none());
        // 1d scan oracle: global minimum of (x^2-1)^2 + 0.1 x sits near -1.012.
        let mut best_x = 0.0;
        let mut best = f64::INFINITY;
        for i in 0..4001 {
            let x = -2.0 + 4.0 * i as f64 / 4000.0;
            let v = (x * x - 1.0).powi(2) + 0.1 * x;
            if v < best {
                best = v;
                best_x = x;
            }
        }
        assert!((report.clusters[0].representative.node(0)[0] - best_x).abs() < 1e-2);
    }

    #[test]
    fn single_explicit_start() {
        let p = problem("(x1^2-1)^2");
        let psi = PerturbCoeffs::zeros(4, FamilyKind::Free);
        let starts = vec![Trajectory::constant(&[0.9], 16, 1.0).unwrap()];
        let report = multi_start_from(&p, &psi, &starts, &MultiStartOptions::default());
        assert_eq!(report.clusters.len(), 1);
    }

    #[test]
    fn clustering_thresholds() {
        let p = problem("(x1^2-1)^2");
        let psi = PerturbCoeffs::zeros(4, FamilyKind::Free);
        let mk = |x: f64, value: f64| LocalMin {
            trajectory: Trajectory::constant(&[x], 8, 1.0).unwrap(),
            value,
            iterations: 0,
            grad_norm: 0.0,
            residual: 0.0,
            status: Termination::Converged,
        };
        let _ = (&p, &psi);
        let runs = vec![mk(-1.0, -1.0), mk(1.0, -0.9999)];
        let clusters = cluster_minima(&runs, 0.5);
        assert_eq!(clusters.len(), 2);
        assert!(make_certificate(&clusters, 1e-3, 0.5).is_some());

        let merged = cluster_minima(&runs, 3.0);
        assert_eq!(merged.len(), 1);
        assert!(make_certificate(&merged, 1e-3, 3.0).is_none());

        assert!(cluster_minima(&[], 0.5).is_empty());
    }

    #[test]
    fn multi_start_is_deterministic() {
        let p = problem("(x1^2-1)^2+0.1*x1");
        let psi = PerturbCoeffs::zeros(4, FamilyKind::Free);
        let opts = MultiStartOptions {
            starts: 10,
            node_count: 16,
            search_radius: 2.0,
            seed: 77,
            ..Default::default()
        };
        let a = multi_start(&p, &psi, &opts);
        let b = multi_start(&p, &psi, &opts);
        assert_eq!(a.runs.len(), b.runs.len());
        for (ra, rb) in a.runs.iter().zip(&b.runs) {
            assert_eq!(ra.value.to_bits(), rb.value.to_bits());
            assert_eq!(ra.trajectory, rb.trajectory);
        }
    }
}
