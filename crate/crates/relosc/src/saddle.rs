//! The constructive side of the two-minima mechanism: recession
//! witnesses for the perturbation family, the four structural
//! conditions that force a strict minimax gap, concave ascent over the
//! perturbation, and the certificate search itself.
//!
//! The outer function `m(psi) = inf_u J(u, psi)` is a min of affine
//! functions of `psi`, hence concave; the cell integrals of
//! `G(u*) - r` at any inner minimizer form a supergradient. The ascent
//! follows it with a diminishing step and, once two consecutive
//! supergradients point against each other, switches to bisection on
//! the bracketing segment: near the ridge the certificate needs the two
//! competing basins to tie to within the value window, which a plain
//! diminishing schedule cannot reach in a usable budget.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::action::{
    action_value, g_cell_integrals, j_value, j_value_and_grad, FamilyKind, PerturbCoeffs,
    SaddleProblem,
};
use crate::error::{Error, Result};
use crate::minimize::{
    descend, multi_start, GrowthConstants, LocalMinOptions, MinimaReport, MultiStartOptions,
    Objective, sampling_radius,
};
use crate::trajectory::{random_k_member, Trajectory};

/// Convex family of piecewise-constant perturbations on `cells` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbFamily {
    pub cells: usize,
    pub kind: FamilyKind,
}

impl PerturbFamily {
    pub fn new(cells: usize, kind: FamilyKind) -> Result<PerturbFamily> {
        if cells == 0 {
            return Err(Error::Precondition("need at least one cell".into()));
        }
        Ok(PerturbFamily { cells, kind })
    }

    pub fn zero(&self) -> PerturbCoeffs {
        PerturbCoeffs::zeros(self.cells, self.kind)
    }

    pub fn project(&self, raw: &[f64]) -> PerturbCoeffs {
        self.zero().projected(raw)
    }

    /// Whether the family is unbounded in every sign pattern at grid
    /// resolution; only then can the pairing condition hold for all
    /// nonzero cell weights.
    pub fn unbounded_all_signs(&self) -> bool {
        matches!(self.kind, FamilyKind::Free)
    }
}

/// Recession direction `d` with positive pairing against the given cell
/// weights, so that `psi = c d` drives `integral psi h` to infinity.
/// `None` when the weights vanish or the family's recession cone cannot
/// realize the sign pattern.
pub fn property_p_witness(family: &PerturbFamily, cell_weights: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(cell_weights.len(), family.cells, "weight grid mismatch");
    let direction: Vec<f64> = match family.kind {
        FamilyKind::Free => cell_weights.iter().map(|w| w.signum() * f64::from(*w != 0.0)).collect(),
        FamilyKind::Nonnegative => cell_weights.iter().map(|w| f64::from(*w > 0.0)).collect(),
        FamilyKind::Box { .. } => return None,
    };
    let pairing: f64 = direction.iter().zip(cell_weights).map(|(d, w)| d * w).sum();
    if pairing > 0.0 {
        Some(direction)
    } else {
        None
    }
}

/// Trajectory objective `f(u) + mu * sum_i h (G(u_i) - r)^2`.
pub struct PenaltyObjective<'a> {
    pub problem: &'a SaddleProblem,
    pub mu: f64,
    zero_psi: PerturbCoeffs,
}

impl<'a> PenaltyObjective<'a> {
    pub fn new(problem: &'a SaddleProblem, mu: f64) -> PenaltyObjective<'a> {
        PenaltyObjective {
            problem,
            mu,
            zero_psi: PerturbCoeffs::zeros(1, FamilyKind::Free),
        }
    }
}

impl Objective for PenaltyObjective<'_> {
    fn eval(&self, u: &Trajectory) -> Result<f64> {
        let base = j_value(self.problem, u, &self.zero_psi)?;
        let h = u.step();
        let mut pen = 0.0;
        for i in 0..u.node_count() {
            let d = self.problem.g.value(u.node(i))? - self.problem.level;
            pen += h * d * d;
        }
        Ok(base + self.mu * pen)
    }

    fn eval_grad(&self, u: &Trajectory) -> Result<(f64, Vec<f64>)> {
        let (mut value, mut grad) = j_value_and_grad(self.problem, u, &self.zero_psi)?;
        let h = u.step();
        let dim = u.dim();
        for i in 0..u.node_count() {
            let (g, gg) = self.problem.g.value_and_grad(u.node(i))?;
            let d = g - self.problem.level;
            value += self.mu * h * d * d;
            for k in 0..dim {
                grad[i * dim + k] += self.mu * 2.0 * h * d * gg[k];
            }
        }
        Ok((value, grad))
    }

    fn slope_bound(&self) -> f64 {
        self.problem.kin.slope_bound()
    }
}

#[derive(Debug, Clone)]
pub struct PenaltyOptions {
    pub node_count: usize,
    pub schedule: Vec<f64>,
    pub starts: usize,
    pub search_radius: f64,
    pub local: LocalMinOptions,
    /// Acceptable `max_i |G(u_i) - r|` at the final penalty weight.
    pub level_tol: f64,
    pub seed: u64,
}

impl Default for PenaltyOptions {
    fn default() -> Self {
        PenaltyOptions {
            node_count: 64,
            schedule: vec![1e2, 1e4, 1e6],
            starts: 13,
            search_radius: 3.0,
            local: LocalMinOptions::default(),
            level_tol: 1e-3,
            seed: 0x9e7a,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PenaltyMin {
    pub trajectory: Trajectory,
    /// Unpenalized action at the returned trajectory.
    pub f_value: f64,
    pub level_residual: f64,
}

/// Estimates `inf { f(u) : G(u(t)) = r for all t }` by a warm-started
/// quadratic penalty sweep from a grid of constant starts.
pub fn penalty_level_min(p: &SaddleProblem, opts: &PenaltyOptions) -> Result<PenaltyMin> {
    let mut starts: Vec<Trajectory> = Vec::new();
    let count = opts.starts.max(3) | 1; // odd, so the origin is included
    match p.dim {
        1 => {
            for i in 0..count {
                let x = -opts.search_radius
                    + 2.0 * opts.search_radius * i as f64 / (count - 1) as f64;
                starts.push(Trajectory::constant(&[x], opts.node_count, p.period)?);
            }
        }
        2 => {
            let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            starts.push(Trajectory::constant(&[0.0, 0.0], opts.node_count, p.period)?);
            for i in 0..count {
                let frac = (i as f64 + 0.5) / count as f64;
                let rr = opts.search_radius * frac.sqrt();
                let th = golden * i as f64;
                starts.push(Trajectory::constant(
                    &[rr * th.cos(), rr * th.sin()],
                    opts.node_count,
                    p.period,
                )?);
            }
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            starts.push(Trajectory::constant(&vec![0.0; p.dim], opts.node_count, p.period)?);
            for _ in 0..count {
                starts.push(random_k_member(
                    p.dim,
                    opts.node_count,
                    p.period,
                    p.kin.slope_bound(),
                    opts.local.margin * 1.5,
                    opts.search_radius,
                    &mut rng,
                ));
            }
        }
    }

    let finals: Vec<Result<(Trajectory, f64, f64)>> = starts
        .par_iter()
        .map(|start| {
            let mut u = start.clone();
            for mu in &opts.schedule {
                let obj = PenaltyObjective::new(p, *mu);
                let res = descend(&obj, &u, &opts.local)?;
                u = res.trajectory;
            }
            let mut residual = 0.0f64;
            for i in 0..u.node_count() {
                residual = residual.max((p.g.value(u.node(i))? - p.level).abs());
            }
            let f = action_value(p, &u)?;
            Ok((u, f, residual))
        })
        .collect();

    let mut best: Option<(Trajectory, f64, f64)> = None;
    for item in finals.into_iter().flatten() {
        if item.2 > opts.level_tol {
            continue;
        }
        match &best {
            Some((_, f, _)) if *f <= item.1 => {}
            _ => best = Some(item),
        }
    }
    match best {
        Some((trajectory, f_value, level_residual)) => Ok(PenaltyMin {
            trajectory,
            f_value,
            level_residual,
        }),
        None => Err(Error::PenaltyNotConverged(format!(
            "no penalty run reached |G - r| <= {}",
            opts.level_tol
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct ConditionVerdict {
    pub id: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct Prop2ACheck {
    pub verdicts: Vec<ConditionVerdict>,
    pub sup_over_pair: f64,
    pub level_inf_estimate: f64,
    pub gap: f64,
}

impl Prop2ACheck {
    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

/// The four structural conditions behind the strict gap, instantiated
/// with `A = {x1, x2}` (constants) and `B = {u : G(u(t)) = r}`:
/// (a) the worse of the two constants still beats the level-set
/// infimum; (b) one of the two pairings is never positive; (c) the
/// coupling vanishes on the level set; (d) off the level set some
/// family direction makes the coupling arbitrarily large.
pub fn prop2a_check(
    p: &SaddleProblem,
    family: &PerturbFamily,
    x1: &[f64],
    x2: &[f64],
    opts: &PenaltyOptions,
) -> Result<Prop2ACheck> {
    let g1 = p.g.value(x1)?;
    let g2 = p.g.value(x2)?;
    if !(g1 < p.level && p.level < g2) {
        return Err(Error::Precondition(format!(
            "need G(x1) < r < G(x2), got {g1} vs {} vs {g2}",
            p.level
        )));
    }

    let mut verdicts = Vec::new();

    // (a) sup over the pair against the level-set infimum.
    let f1 = action_value(p, &Trajectory::constant(x1, opts.node_count, p.period)?)?;
    let f2 = action_value(p, &Trajectory::constant(x2, opts.node_count, p.period)?)?;
    let sup_pair = f1.max(f2);
    let level_min = penalty_level_min(p, opts)?;
    let gap = level_min.f_value - sup_pair;
    verdicts.push(ConditionVerdict {
        id: "a",
        passed: gap > 0.0,
        detail: format!(
            "sup over pair {sup_pair:.6e}, level infimum {:.6e}, residual {:.2e}",
            level_min.f_value, level_min.level_residual
        ),
    });

    // (b) min over the pair of (G(x_i) - r) integral(psi) <= 0, exactly.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xb);
    let cell_width = p.period / family.cells as f64;
    let mut worst_b = f64::NEG_INFINITY;
    for _ in 0..100 {
        let raw: Vec<f64> = (0..family.cells).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let psi = family.project(&raw);
        let integral: f64 = psi.values().iter().map(|v| v * cell_width).sum();
        let pairing = ((g1 - p.level) * integral).min((g2 - p.level) * integral);
        worst_b = worst_b.max(pairing);
    }
    verdicts.push(ConditionVerdict {
        id: "b",
        passed: worst_b <= 0.0,
        detail: format!("max over sampled psi of the smaller pairing: {worst_b:.3e}"),
    });

    // (c) coupling on the level set. For a monotone 1d shape the level
    // point is exact up to the bisection width, and the cell sums vanish
    // identically when G hits r in floating point.
    let level_traj = if p.dim == 1 {
        let mut lo = -opts.search_radius;
        let mut hi = opts.search_radius;
        let increasing = p.g.value(&[hi])? > p.g.value(&[lo])?;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let g = p.g.value(&[mid])?;
            if (g < p.level) == increasing {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Trajectory::constant(&[0.5 * (lo + hi)], opts.node_count, p.period)?
    } else {
        level_min.trajectory.clone()
    };
    let weights = g_cell_integrals(p, &level_traj, family.cells)?;
    let mut worst_c = 0.0f64;
    for _ in 0..20 {
        let raw: Vec<f64> = (0..family.cells).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let psi = family.project(&raw);
        let g: f64 = psi.values().iter().zip(&weights).map(|(a, b)| a * b).sum();
        worst_c = worst_c.max(g.abs());
    }
    let c_tol = 1e-10 * (1.0 + p.level.abs()) + 10.0 * opts.level_tol * p.period;
    verdicts.push(ConditionVerdict {
        id: "c",
        passed: worst_c <= c_tol,
        detail: format!("max |coupling| on the level trajectory: {worst_c:.3e}"),
    });

    // (d) witnesses for sampled off-level trajectories.
    let mut found = 0usize;
    let mut total = 0usize;
    for _ in 0..50 {
        let u = random_k_member(
            p.dim,
            opts.node_count,
            p.period,
            p.kin.slope_bound(),
            opts.local.margin * 1.5,
            opts.search_radius,
            &mut rng,
        );
        let w = g_cell_integrals(p, &u, family.cells)?;
        if w.iter().all(|c| *c == 0.0) {
            continue; // not an off-level sample at grid resolution
        }
        total += 1;
        if property_p_witness(family, &w).is_some() {
            found += 1;
        }
    }
    verdicts.push(ConditionVerdict {
        id: "d",
        passed: total > 0 && found == total,
        detail: format!("witness found for {found}/{total} off-level samples"),
    });

    Ok(Prop2ACheck {
        verdicts,
        sup_over_pair: sup_pair,
        level_inf_estimate: level_min.f_value,
        gap,
    })
}

#[derive(Debug, Clone)]
pub struct OuterEval {
    /// Best inner value `m(psi)`.
    pub m: f64,
    /// Cell integrals of `G(u*) - r` at the lowest-index cluster
    /// representative; a supergradient selection, not a gradient.
    pub supergradient: Vec<f64>,
    pub report: MinimaReport,
}

/// Inner minimization at fixed `psi` plus the supergradient.
pub fn outer_value(
    p: &SaddleProblem,
    family: &PerturbFamily,
    psi: &PerturbCoeffs,
    ms: &MultiStartOptions,
) -> Result<OuterEval> {
    let report = multi_start(p, psi, ms);
    let Some(best) = report.clusters.first() else {
        return Err(Error::Convergence("no inner minimization succeeded".into()));
    };
    let supergradient = g_cell_integrals(p, &best.representative, family.cells)?;
    Ok(OuterEval {
        m: best.value,
        supergradient,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct SaddleOptions {
    /// Total budget of inner multi-starts (ascent plus bisection).
    pub max_evals: usize,
    /// Overrides the default `0.5 / (1 + range of G)` base step.
    pub step_scale: Option<f64>,
    pub ms: MultiStartOptions,
    /// When present, the search ball is recomputed per iterate from the
    /// sublevel bound; otherwise `ms.search_radius` stays fixed.
    pub growth: Option<GrowthConstants>,
    /// Stop bisecting when the segment width per cell falls below this.
    pub bisect_min_width: f64,
}

impl Default for SaddleOptions {
    fn default() -> Self {
        SaddleOptions {
            max_evals: 48,
            step_scale: None,
            ms: MultiStartOptions::default(),
            growth: None,
            bisect_min_width: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaddleStatus {
    Certificate,
    NotFound,
}

#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iter: usize,
    pub m: f64,
    pub psi: Vec<f64>,
    pub certificate: bool,
}

#[derive(Debug, Clone)]
pub struct SaddleOutcome {
    pub status: SaddleStatus,
    pub psi: PerturbCoeffs,
    pub report: MinimaReport,
    pub m: f64,
    pub trace: Vec<TraceRow>,
    pub evals: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Searches the family for a perturbation whose inner problem carries
/// the two-minima certificate.
///
/// Supergradient ascent with step `alpha_k = alpha_0 / sqrt(k+1)`; the
/// update reads the supergradient in the time-density metric (cell
/// integral divided by cell width), which keeps the effective step
/// independent of the cell count. A sign reversal between consecutive
/// supergradients brackets the concave ridge and switches to bisection
/// on that segment. The search is heuristic: exhausting the budget
/// reports `NotFound` with the best iterate rather than failing.
pub fn saddle_search(
    p: &SaddleProblem,
    family: &PerturbFamily,
    opts: &SaddleOptions,
) -> Result<SaddleOutcome> {
    if !family.unbounded_all_signs() {
        return Err(Error::Precondition(
            "family lacks the unbounded-pairing property at grid resolution".into(),
        ));
    }
    // The level must be strictly inside the sampled range of G.
    {
        let radius = opts.ms.search_radius;
        let mut g_min = f64::INFINITY;
        let mut g_max = f64::NEG_INFINITY;
        for i in 0..101 {
            let mut x = vec![0.0; p.dim];
            x[0] = -radius + 2.0 * radius * i as f64 / 100.0;
            let g = p.g.value(&x)?;
            g_min = g_min.min(g);
            g_max = g_max.max(g);
        }
        if !(g_min < p.level && p.level < g_max) {
            return Err(Error::Precondition(format!(
                "level {} outside the sampled range of G: [{g_min}, {g_max}]",
                p.level
            )));
        }
    }

    let cell_width = p.period / family.cells as f64;
    let alpha0 = opts.step_scale.unwrap_or_else(|| {
        let radius = opts.ms.search_radius;
        let mut g_min = f64::INFINITY;
        let mut g_max = f64::NEG_INFINITY;
        for i in 0..101 {
            let mut x = vec![0.0; p.dim];
            x[0] = -radius + 2.0 * radius * i as f64 / 100.0;
            if let Ok(g) = p.g.value(&x) {
                g_min = g_min.min(g);
                g_max = g_max.max(g);
            }
        }
        0.5 / (1.0 + (g_max - g_min))
    });

    let mut evals = 0usize;
    let mut trace = Vec::new();
    let mut best: Option<(f64, PerturbCoeffs, MinimaReport)> = None;
    let origin = Trajectory::constant(&vec![0.0; p.dim], opts.ms.node_count, p.period)?;

    let mut ms = opts.ms.clone();
    let radius_for = |psi: &PerturbCoeffs, ms: &mut MultiStartOptions| {
        if let Some(gc) = &opts.growth {
            if let Ok(gc_psi) = gc.with_psi(p, psi) {
                if let Ok(rho) = j_value(p, &origin, psi) {
                    if let Ok(r) = sampling_radius(&gc_psi, psi, rho, p.kin.slope_bound(), p.period)
                    {
                        ms.search_radius = r;
                    }
                }
            }
        }
    };

    let eval_at = |psi: &PerturbCoeffs,
                       evals: &mut usize,
                       trace: &mut Vec<TraceRow>,
                       best: &mut Option<(f64, PerturbCoeffs, MinimaReport)>,
                       ms: &mut MultiStartOptions|
     -> Result<OuterEval> {
        radius_for(psi, ms);
        let out = outer_value(p, family, psi, ms)?;
        trace.push(TraceRow {
            iter: *evals,
            m: out.m,
            psi: psi.values().to_vec(),
            certificate: out.report.certificate.is_some(),
        });
        *evals += 1;
        if best.as_ref().is_none_or(|(b, _, _)| out.m > *b) {
            *best = Some((out.m, psi.clone(), out.report.clone()));
        }
        Ok(out)
    };

    let mut psi = family.zero();
    let mut prev: Option<(PerturbCoeffs, Vec<f64>)> = None;
    let mut k = 0usize;

    while evals < opts.max_evals {
        let out = eval_at(&psi, &mut evals, &mut trace, &mut best, &mut ms)?;
        if out.report.certificate.is_some() {
            return Ok(SaddleOutcome {
                status: SaddleStatus::Certificate,
                psi,
                report: out.report,
                m: out.m,
                trace,
                evals,
            });
        }
        let s = out.supergradient.clone();
        let s_norm = s.iter().map(|c| c * c).sum::<f64>().sqrt();
        if s_norm <= 1e-15 {
            break; // supergradient vanishes; the ridge is flat here
        }

        if let Some((prev_psi, prev_s)) = &prev {
            if dot(&s, prev_s) < 0.0 {
                // Bracketed the ridge between prev_psi and psi.
                let mut lo = prev_psi.values().to_vec();
                let mut hi = psi.values().to_vec();
                let dir: Vec<f64> = hi.iter().zip(&lo).map(|(a, b)| a - b).collect();
                while evals < opts.max_evals {
                    let width = hi
                        .iter()
                        .zip(&lo)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max);
                    if width <= opts.bisect_min_width {
                        break;
                    }
                    let mid: Vec<f64> =
                        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
                    let mid_psi = family.project(&mid);
                    let out = eval_at(&mid_psi, &mut evals, &mut trace, &mut best, &mut ms)?;
                    if out.report.certificate.is_some() {
                        return Ok(SaddleOutcome {
                            status: SaddleStatus::Certificate,
                            psi: mid_psi,
                            report: out.report,
                            m: out.m,
                            trace,
                            evals,
                        });
                    }
                    if dot(&out.supergradient, &dir) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                break; // bisection exhausted its width or the budget
            }
        }

        let alpha = alpha0 / ((k + 1) as f64).sqrt();
        let next: Vec<f64> = psi
            .values()
            .iter()
            .zip(&s)
            .map(|(v, si)| v + alpha * si / cell_width)
            .collect();
        prev = Some((psi.clone(), s));
        psi = family.project(&next);
        k += 1;
    }

    let (m, psi, report) = best.ok_or_else(|| Error::Convergence("saddle search never evaluated".into()))?;
    Ok(SaddleOutcome {
        status: SaddleStatus::NotFound,
        psi,
        report,
        m,
        trace,
        evals,
    })
}

#[derive(Debug, Clone)]
pub struct MinimaxGap {
    /// Best ascent value of `m(psi)`.
    pub lower: f64,
    /// Level-set infimum estimate.
    pub upper: f64,
    pub strict: bool,
    pub margin: f64,
    pub level_residual: f64,
}

/// Estimates both sides of the minimax inequality: the lower value from
/// a short concave ascent (or a caller-provided value) and the upper
/// value from the penalty-constrained level minimization.
pub fn minimax_gap(
    p: &SaddleProblem,
    family: &PerturbFamily,
    ascent: &SaddleOptions,
    penalty: &PenaltyOptions,
    lower_hint: Option<f64>,
) -> Result<MinimaxGap> {
    let lower_from_ascent = match saddle_search(p, family, ascent) {
        Ok(out) => out.trace.iter().map(|r| r.m).fold(f64::NEG_INFINITY, f64::max),
        // Degenerate shapes (level outside the sampled range of G) leave
        // nothing to ascend; the zero perturbation still bounds from below.
        Err(Error::Precondition(_)) => outer_value(p, family, &family.zero(), &ascent.ms)?.m,
        Err(e) => return Err(e),
    };
    let lower = lower_hint.map_or(lower_from_ascent, |h| h.max(lower_from_ascent));
    let level_min = penalty_level_min(p, penalty)?;
    let upper = level_min.f_value;
    let margin = 1e-4 * (1.0 + lower.abs() + upper.abs());
    Ok(MinimaxGap {
        lower,
        upper,
        strict: lower + margin < upper,
        margin,
        level_residual: level_min.level_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{PerturbShape, TimePotential};
    use crate::potentials::KineticPotential;

    fn problem(f: &str, level: f64) -> SaddleProblem {
        SaddleProblem::new(
            KineticPotential::relativistic(1.0).unwrap(),
            TimePotential::parse(f, 1).unwrap(),
            PerturbShape::parse("x1", 1).unwrap(),
            None,
            1.0,
            level,
        )
        .unwrap()
    }

    #[test]
    fn witness_signs() {
        let free = PerturbFamily::new(4, FamilyKind::Free).unwrap();
        let d = property_p_witness(&free, &[1.0, -2.0, 0.0, 3.0]).unwrap();
        assert_eq!(d, vec![1.0, -1.0, 0.0, 1.0]);
        assert!(property_p_witness(&free, &[0.0, 0.0, 0.0, 0.0]).is_none());

        let cone = PerturbFamily::new(2, FamilyKind::Nonnegative).unwrap();
        assert!(property_p_witness(&cone, &[-1.0, -1.0]).is_none());
        assert!(property_p_witness(&cone, &[-1.0, 0.5]).is_some());

        let boxed = PerturbFamily::new(2, FamilyKind::Box { lo: -1.0, hi: 1.0 }).unwrap();
        assert!(property_p_witness(&boxed, &[1.0, 1.0]).is_none());
    }

    #[test]
    fn prop2a_on_the_symmetric_double_well() {
        let p = problem("(x1^2-1)^2", 0.0);
        let family = PerturbFamily::new(4, FamilyKind::Free).unwrap();
        let opts = PenaltyOptions {
            node_count: 16,
            ..Default::default()
        };
        let out = prop2a_check(&p, &family, &[-1.0], &[1.0], &opts).unwrap();
        assert!(out.all_passed(), "{:?}", out.verdicts);
        assert!((out.sup_over_pair - (-1.0)).abs() < 1e-9);
        assert!(out.level_inf_estimate.abs() < 1e-3);
        assert!((out.gap - 1.0).abs() < 0.05);
    }

    #[test]
    fn prop2a_rejects_misordered_levels() {
        let p = problem("(x1^2-1)^2", 0.0);
        let family = PerturbFamily::new(4, FamilyKind::Free).unwrap();
        let opts = PenaltyOptions::default();
        assert!(matches!(
            prop2a_check(&p, &family, &[1.0], &[-1.0], &opts),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn outer_value_at_zero_perturbation() {
        let p = problem("(x1^2-1)^2", 0.0);
        let family = PerturbFamily::new(4, FamilyKind::Free).unwrap();
        let ms = MultiStartOptions {
            starts: 12,
            node_count: 16,
            search_radius: 2.5,
            ..Default::default()
        };
        let out = outer_value(&p, &family, &family.zero(), &ms).unwrap();
        assert!((out.m - (-1.0)).abs() < 1e-8);
        // both wells are global; the supergradient comes from one of them
        let total: f64 = out.supergradient.iter().sum();
        assert!((total.abs() - 1.0).abs() < 1e-4, "total {total}");
    }

    #[test]
    fn level_set_minimizer_has_zero_supergradient() {
        // With G identically at the level, every minimizer sits on the
        // level set and the cell integrals vanish exactly.
        let p = SaddleProblem::new(
            KineticPotential::relativistic(1.0).unwrap(),
            TimePotential::parse("(x1^2-1)^2", 1).unwrap(),
            PerturbShape::parse("0", 1).unwrap(),
            None,
            1.0,
            0.0,
        )
        .unwrap();
        let family = PerturbFamily::new(4, FamilyKind::Free).unwrap();
        let ms = MultiStartOptions {
            starts: 8,
            node_count: 16,
            search_radius: 2.0,
            ..Default::default()
        };
        let out = outer_value(&p, &family, &family.zero(), &ms).unwrap();
        assert!(out.supergradient.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn certificates_are_sound_under_reminimization() {
        use crate::minimize::{local_min, LocalMinOptions};
        let p = problem("(x1^2-1)^2+0.1*x1", 0.0);
        let family = PerturbFamily::new(4, FamilyKind::Free).unwrap();
        let opts = SaddleOptions {
            max_evals: 48,
            ms: MultiStartOptions {
                starts: 12,
                node_count: 16,
                search_radius: 2.5,
                eps_val_scale: 4e-5,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = saddle_search(&p, &family, &opts).unwrap();
        assert_eq!(out.status, SaddleStatus::Certificate);
        let local = LocalMinOptions::default();
        for cluster in &out.report.clusters[..2] {
            let rerun = local_min(&p, &out.psi, &cluster.representative, &local).unwrap();
            assert!(
                (rerun.value - cluster.value).abs() <= out.report.eps_val,
                "value drifted {} -> {}",
                cluster.value,
                rerun.value
            );
            assert!(rerun.residual <= local.tol_resid * (1.0 + 1e-9));
        }
    }

    #[test]
    fn tilted_minimax_gap_is_one_minus_the_tilt_correction() {
        let p = problem("(x1^2-1)^2+0.1*x1", 0.0);
        let family = PerturbFamily::new(4, FamilyKind::Free).unwrap();
        let ascent = SaddleOptions {
            max_evals: 24,
            ms: MultiStartOptions {
                starts: 12,
                node_count: 16,
                search_radius: 2.5,
                ..Default::default()
            },
            ..Default::default()
        };
        let penalty = PenaltyOptions {
            node_count: 16,
            ..Default::default()
        };
        let out = minimax_gap(&p, &family, &ascent, &penalty, None).unwrap();
        assert!(out.strict);
        assert!(out.lower <= out.upper + 1e-9);
        let gap = out.upper - out.lower;
        assert!((gap - 1.0).abs() < 0.05, "gap {gap}");
    }

    #[test]
    fn supergradient_first_order_bound() {
        let p = problem("(x1^2-1)^2+0.1*x1", 0.0);
        let family = PerturbFamily::new(4, FamilyKind::Free).unwrap();
        let ms = MultiStartOptions {
            starts: 12,
            node_count: 16,
            search_radius: 2.5,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = family.project(&[0.05, -0.1, 0.0, 0.08]);
        let at_base = outer_value(&p, &family, &base, &ms).unwrap();
        for _ in 0..6 {
            let raw: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.3..0.3)).collect();
            let other = family.project(&raw);
            let at_other = outer_value(&p, &family, &other, &ms).unwrap();
            let linear: f64 = at_base
                .supergradient
                .iter()
                .zip(other.values().iter().zip(base.values()))
                .map(|(s, (o, b))| s * (o - b))
                .sum();
            assert!(
                at_other.m <= at_base.m + linear + 1e-6,
                "{} vs {}",
                at_other.m,
                at_base.m + linear
            );
        }
    }

    #[test]
    fn symmetric_well_certifies_immediately() {
        let p = problem("(x1^2-1)^2", 0.0);
        let family = PerturbFamily::new(4, FamilyKind::Free).unwrap();
        let opts = SaddleOptions {
            ms: MultiStartOptions {
                starts: 12,
                node_count: 16,
                search_radius: 2.5,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = saddle_search(&p, &family, &opts).unwrap();
        assert_eq!(out.status, SaddleStatus::Certificate);
        assert_eq!(out.evals, 1);
        assert!(out.psi.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn balanced_tilt_finds_the_tie() {
        let p = problem("(x1^2-1)^2+0.1*x1", 0.0);
        let family = PerturbFamily::new(4, FamilyKind::Free).unwrap();
        let opts = SaddleOptions {
            max_evals: 48,
            ms: MultiStartOptions {
                starts: 12,
                node_count: 16,
                search_radius: 2.5,
                eps_val_scale: 4e-5,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = saddle_search(&p, &family, &opts).unwrap();
        assert_eq!(out.status, SaddleStatus::Certificate, "trace: {:?}", out.trace.len());
        let mean = out.psi.mean();
        assert!((mean + 0.1).abs() < 0.02, "mean {mean}");
        let cert = out.report.certificate.as_ref().unwrap();
        assert!(cert.value_gap <= 1e-4);
        assert!(cert.separation >= 1.5);
    }

    #[test]
    fn convex_well_reports_not_found() {
        let p = problem("x1^2", 0.0);
        let family = PerturbFamily::new(4, FamilyKind::Free).unwrap();
        let opts = SaddleOptions {
            max_evals: 10,
            ms: MultiStartOptions {
                starts: 8,
                node_count: 16,
                search_radius: 2.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = saddle_search(&p, &family, &opts).unwrap();
        assert_eq!(out.status, SaddleStatus::NotFound);
    }

    #[test]
    fn cone_family_is_rejected_for_search() {
        let p = problem("(x1^2-1)^2", 0.0);
        let family = PerturbFamily::new(4, FamilyKind::Nonnegative).unwrap();
        assert!(matches!(
            saddle_search(&p, &family, &SaddleOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn minimax_gap_on_the_double_well() {
        let p = problem("(x1^2-1)^2", 0.0);
        let family = PerturbFamily::new(4, FamilyKind::Free).unwrap();
        let ascent = SaddleOptions {
            max_evals: 6,
            ms: MultiStartOptions {
                starts: 12,
                node_count: 16,
                search_radius: 2.5,
                ..Default::default()
            },
            ..Default::default()
        };
        let penalty = PenaltyOptions {
            node_count: 16,
            ..Default::default()
        };
        let out = minimax_gap(&p, &family, &ascent, &penalty, None).unwrap();
        assert!((out.lower - (-1.0)).abs() < 1e-4);
        assert!(out.upper.abs() < 1e-3);
        assert!(out.strict);
    }

    #[test]
    fn degenerate_shape_has_no_gap() {
        // G constant at the level: the coupling vanishes identically.
        let p = SaddleProblem::new(
            KineticPotential::relativistic(1.0).unwrap(),
            TimePotential::parse("(x1^2-1)^2", 1).unwrap(),
            PerturbShape::parse("0", 1).unwrap(),
            None,
            1.0,
            0.0,
        )
        .unwrap();
        let family = PerturbFamily::new(4, FamilyKind::Free).unwrap();
        let ascent = SaddleOptions {
            max_evals: 4,
            ms: MultiStartOptions {
                starts: 10,
                node_count: 16,
                search_radius: 2.5,
                ..Default::default()
            },
            ..Default::default()
        };
        let penalty = PenaltyOptions {
            node_count: 16,
            ..Default::default()
        };
        let out = minimax_gap(&p, &family, &ascent, &penalty, None).unwrap();
        assert!(!out.strict);
        assert!((out.upper - out.lower).abs() < 1e-6);
    }
}
