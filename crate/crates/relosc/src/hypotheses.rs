//! Sampling-based checkers for the growth and level-gap hypotheses, the
//! growth-constant extraction behind the sampling radius, and the
//! corollary-style scenario presets.
//!
//! Every verdict here is evidence, not proof: the hypotheses quantify
//! over all of space (or over exact level sets), so the checkers report
//! their margins and sampling densities alongside the boolean.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::action::{PerturbCoeffs, PerturbShape, SaddleProblem, TimePotential, TimeWeight};
use crate::error::{Error, Result};
use crate::minimize::GrowthConstants;
use crate::potentials::KineticPotential;

#[derive(Debug, Clone)]
pub struct HypothesisCheck {
    pub id: String,
    pub passed: bool,
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct GrowthOptions {
    pub radii: Vec<f64>,
    pub sphere_samples: usize,
    pub t_samples: usize,
    pub ball_samples: usize,
    pub delta_candidates: Vec<f64>,
    pub seed: u64,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        GrowthOptions {
            radii: vec![1.0, 3.0, 10.0, 30.0, 100.0],
            sphere_samples: 48,
            t_samples: 64,
            ball_samples: 128,
            delta_candidates: vec![0.25, 0.5, 1.0, 1.5, 2.0, 3.0],
            seed: 0x47524f57,
        }
    }
}

fn sphere_points(dim: usize, radius: f64, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    if dim == 1 {
        return vec![vec![radius], vec![-radius]];
    }
    let mut pts = Vec::with_capacity(count);
    while pts.len() < count {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            pts.push(x.iter().map(|c| c * radius / n).collect());
        }
    }
    pts
}

fn ball_points(dim: usize, radius: f64, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]];
    for k in 0..dim {
        let mut plus = vec![0.0; dim];
        plus[k] = radius * 0.999;
        let mut minus = vec![0.0; dim];
        minus[k] = -radius * 0.999;
        pts.push(plus);
        pts.push(minus);
    }
    while pts.len() < count {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-radius..=radius)).collect();
        let n = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n <= radius {
            pts.push(x);
        }
    }
    pts
}

/// Uniform time grid `t_j = j T / m`.
fn t_grid(period: f64, m: usize) -> Vec<f64> {
    (0..m).map(|j| j as f64 * period / m as f64).collect()
}

/// Deterministic scan set: a line for n = 1, a sunflower disk for n = 2,
/// a seeded ball otherwise. Always includes the origin.
fn scan_points(dim: usize, radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match dim {
        1 => {
            let m = count.max(3);
            (0..m)
                .map(|i| vec![-radius + 2.0 * radius * i as f64 / (m - 1) as f64])
                .collect()
        }
        2 => {
            let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            let mut pts = vec![vec![0.0, 0.0]];
            for i in 0..count {
                let frac = (i as f64 + 0.5) / count as f64;
                let r = radius * frac.sqrt();
                let theta = golden * i as f64;
                pts.push(vec![r * theta.cos(), r * theta.sin()]);
            }
            pts
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ball_points(dim, radius, count, &mut rng)
        }
    }
}

/// Estimates the constants behind the sublevel-set bound. Includes the
/// 1.1 safety factor on `k` (and on the sampled gradient sup), and a
/// 0.95 shrink on `nu`, so a fresh sample set still satisfies the
/// inequalities. Fails with `GrowthNotObserved` when the sampled
/// `|G| / (|x|^q + 1)` ratio is still climbing at the largest radii or
/// when no inner radius `delta` gives a positive `nu`, and with
/// `ConstantsError` when the best `nu` cannot dominate `k sup|psi|`.
pub fn estimate_growth_constants(
    p: &SaddleProblem,
    q: f64,
    psi: &PerturbCoeffs,
    opts: &GrowthOptions,
) -> Result<GrowthConstants> {
    if !(q > 0.0) {
        return Err(Error::Precondition(format!("growth exponent q must be positive, got {q}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let times = t_grid(p.period, opts.t_samples);
    let radii = &opts.radii;
    if radii.len() < 2 {
        return Err(Error::Precondition("need at least two radii".into()));
    }

    // k from |G| <= k (|x|^q + 1) over spheres of every radius plus the origin.
    let mut k_max: f64 = p.g.value(&vec![0.0; p.dim])?.abs();
    let mut per_radius_max = Vec::with_capacity(radii.len());
    for r in radii {
        let mut worst: f64 = 0.0;
        for x in sphere_points(p.dim, *r, opts.sphere_samples, &mut rng) {
            let g = p.g.value(&x)?.abs();
            worst = worst.max(g / (r.powf(q) + 1.0));
        }
        per_radius_max.push(worst);
        k_max = k_max.max(worst);
    }
    let m = per_radius_max.len();
    if per_radius_max[m - 1] > 1e-9 && per_radius_max[m - 1] > 2.0 * per_radius_max[m - 2] {
        return Err(Error::GrowthNotObserved(format!(
            "|G|/(|x|^q+1) still climbing at the largest radii: {:.3e} -> {:.3e}",
            per_radius_max[m - 2],
            per_radius_max[m - 1]
        )));
    }
    let k = 1.1 * k_max;

    // nu, delta: scan log-spaced radii in [delta, R_max] for the worst
    // F/|x|^q ratio, then keep the candidate with the smallest implied
    // sampling radius.
    let r_max = *radii.last().unwrap();
    let phi0 = p.kin.value(&vec![0.0; p.dim])?;
    let abs_int = psi.abs_integral(p.period);
    let rho_probe = {
        // J at the constant origin trajectory, straight from quadrature.
        let g0 = p.g.value(&vec![0.0; p.dim])?;
        let mut acc = phi0 * p.period;
        let h = p.period / times.len() as f64;
        for t in &times {
            acc += h * p.potential(*t, &vec![0.0; p.dim])?;
        }
        acc + (g0 - p.level) * psi.values().iter().sum::<f64>() * p.period
            / psi.cells() as f64
    };

    let mut best: Option<(f64, GrowthConstants)> = None;
    let mut saw_positive = false;
    for delta in opts.delta_candidates.iter().filter(|d| **d < r_max) {
        let steps = 14;
        let mut worst_ratio = f64::INFINITY;
        for s in 0..steps {
            let r = delta * (r_max / delta).powf(s as f64 / (steps - 1) as f64);
            for x in sphere_points(p.dim, r, opts.sphere_samples, &mut rng) {
                for t in &times {
                    let f = p.potential(*t, &x)?;
                    worst_ratio = worst_ratio.min(f / r.powf(q));
                }
            }
        }
        if !(worst_ratio > 0.0) {
            continue;
        }
        saw_positive = true;
        let nu = 0.95 * worst_ratio;

        // M(t): sampled sup of |grad F| over the delta ball, padded 1.1.
        let ball = ball_points(p.dim, *delta, opts.ball_samples, &mut rng);
        let mut grad_sup = Vec::with_capacity(times.len());
        let mut beta = Vec::with_capacity(times.len());
        for t in &times {
            let mut sup = 0.0f64;
            for x in &ball {
                let (_, g) = p.potential_and_grad(*t, x)?;
                sup = sup.max(g.iter().map(|c| c * c).sum::<f64>().sqrt());
            }
            sup *= 1.1;
            grad_sup.push(sup);
            let f0 = p.potential(*t, &vec![0.0; p.dim])?;
            beta.push(nu * delta.powf(q) + sup * delta + f0.abs());
        }
        let gc = GrowthConstants {
            q,
            k,
            delta: *delta,
            nu,
            grad_sup_grid: grad_sup,
            beta_grid: beta,
            eta: 0.0,
            eta1: 0.0,
        };
        let beta_int = gc.beta_integral(p.period);
        let eta = -beta_int + phi0 * p.period - p.level.abs() * abs_int;
        let eta1 = eta - k * abs_int;
        let gc = GrowthConstants { eta, eta1, ..gc };

        let load = k * psi.sup_norm();
        if nu <= load {
            continue;
        }
        let proxy = ((rho_probe - eta1).max(0.0) / ((nu - load) * p.period)).powf(1.0 / q);
        match &best {
            Some((b, _)) if *b <= proxy => {}
            _ => best = Some((proxy, gc)),
        }
    }

    match best {
        Some((_, gc)) => Ok(gc),
        None if !saw_positive => Err(Error::GrowthNotObserved(
            "no inner radius gives F >= nu |x|^q with positive nu on the samples".into(),
        )),
        None => Err(Error::Constants(format!(
            "every sampled nu is dominated by k * sup|psi| = {:.6e}",
            k * psi.sup_norm()
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct CheckA1 {
    pub passed: bool,
    pub q: f64,
    /// Rows `(radius, min F(t,x)/R^q, max |G(x)|/R^q)`.
    pub rows: Vec<(f64, f64, f64)>,
    pub f_increasing: bool,
    pub f_growth: bool,
    pub g_bounded: bool,
}

/// Growth hypothesis: the sphere minimum of `F(t,x)/|x|^q` must climb
/// without bound while `|G(x)|/|x|^q` stays bounded. On a finite radius
/// ladder this reads: strictly increasing F-ratio whose last entry
/// beats ten times the first, and a non-increasing G-ratio beyond the
/// first rung.
pub fn check_a1(p: &SaddleProblem, q: f64, radii: &[f64], opts: &GrowthOptions) -> Result<CheckA1> {
    if radii.len() < 3 {
        return Err(Error::Precondition("need at least three radii".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("radii must be increasing".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xa1);
    let times = t_grid(p.period, opts.t_samples);
    let mut rows = Vec::with_capacity(radii.len());
    for r in radii {
        let mut f_min = f64::INFINITY;
        let mut g_max = 0.0f64;
        for x in sphere_points(p.dim, *r, opts.sphere_samples, &mut rng) {
            g_max = g_max.max(p.g.value(&x)?.abs() / r.powf(q));
            for t in &times {
                f_min = f_min.min(p.potential(*t, &x)? / r.powf(q));
            }
        }
        rows.push((*r, f_min, g_max));
    }
    let f_increasing = rows.windows(2).all(|w| w[1].1 > w[0].1);
    let f_growth = rows.last().unwrap().1 > 10.0 * rows.first().unwrap().1;
    let g_bounded = rows[1..]
        .windows(2)
        .all(|w| w[1].2 <= w[0].2 * (1.0 + 1e-9));
    Ok(CheckA1 {
        passed: f_increasing && f_growth && g_bounded,
        q,
        rows,
        f_increasing,
        f_growth,
        g_bounded,
    })
}

#[derive(Debug, Clone)]
pub struct CheckA2Options {
    pub x_radius: f64,
    pub scan_points: usize,
    pub t_samples: usize,
    pub penalty_schedule: Vec<f64>,
    pub seed: u64,
}

impl Default for CheckA2Options {
    fn default() -> Self {
        CheckA2Options {
            x_radius: 3.0,
            scan_points: 601,
            t_samples: 64,
            penalty_schedule: vec![1e2, 1e4, 1e6],
            seed: 0xa2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckA2 {
    pub passed: bool,
    pub level: f64,
    /// Infimum of the mean potential over constants below the level.
    pub m_minus: f64,
    /// Same, above the level.
    pub m_plus: f64,
    /// Integral of the per-time infimum over the level set.
    pub m_level: f64,
    pub margin: f64,
    /// Coarse-vs-fine discrepancy; a proxy for the sampling error.
    pub est_error: f64,
    pub method: &'static str,
}

/// Coordinate pattern search with constraint rejection; `f` returns
/// `None` outside the feasible region.
fn pattern_refine(
    f: &dyn Fn(&[f64]) -> Option<f64>,
    start: &[f64],
    start_value: f64,
    init_step: f64,
    min_step: f64,
) -> (Vec<f64>, f64) {
    let mut x = start.to_vec();
    let mut value = start_value;
    let mut step = init_step;
    while step >= min_step {
        let mut improved = false;
        for k in 0..x.len() {
            for sign in [1.0, -1.0] {
                loop {
                    let mut cand = x.clone();
                    cand[k] += sign * step;
                    match f(&cand) {
                        Some(v) if v < value => {
                            x = cand;
                            value = v;
                            improved = true;
                        }
                        _ => break,
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, value)
}

struct A2Pass {
    m_minus: f64,
    m_plus: f64,
    m_level: f64,
    method: &'static str,
}

fn a2_pass(p: &SaddleProblem, r: f64, opts: &CheckA2Options) -> Result<A2Pass> {
    let scan = scan_points(p.dim, opts.x_radius, opts.scan_points, opts.seed);
    let mut g_values = Vec::with_capacity(scan.len());
    for x in &scan {
        g_values.push(p.g.value(x)?);
    }
    let g_min = g_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let g_max = g_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(g_min < r && r < g_max) {
        return Err(Error::Precondition(format!(
            "level {r} is outside the sampled range of G: [{g_min}, {g_max}]"
        )));
    }

    let ts = opts.t_samples;
    let grid_step = 2.0 * opts.x_radius / opts.scan_points.max(3) as f64;

    // Side infima of the mean potential over the open regions.
    let side = |below: bool| -> Result<f64> {
        let mut best = f64::INFINITY;
        let mut best_x: Option<Vec<f64>> = None;
        for (x, g) in scan.iter().zip(&g_values) {
            let inside = if below { *g < r } else { *g > r };
            if !inside {
                continue;
            }
            let v = p.mean_potential(x, ts)?;
            if v < best {
                best = v;
                best_x = Some(x.clone());
            }
        }
        let Some(x0) = best_x else {
            return Ok(f64::INFINITY);
        };
        let f = |x: &[f64]| -> Option<f64> {
            let g = p.g.value(x).ok()?;
            let inside = if below { g < r } else { g > r };
            if !inside {
                return None;
            }
            p.mean_potential(x, ts).ok()
        };
        let (_, v) = pattern_refine(&f, &x0, best, grid_step, grid_step * 1e-6);
        Ok(v)
    };
    let m_minus = side(true)?;
    let m_plus = side(false)?;

    // Monotone 1d shapes admit a bisection for the unique level point.
    let monotone_1d = p.dim == 1 && {
        let diffs: Vec<f64> = g_values.windows(2).map(|w| w[1] - w[0]).collect();
        diffs.iter().all(|d| *d > 0.0) || diffs.iter().all(|d| *d < 0.0)
    };

    if monotone_1d {
        let mut lo = scan[0][0];
        let mut hi = scan[scan.len() - 1][0];
        let increasing = g_values[g_values.len() - 1] > g_values[0];
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let g = p.g.value(&[mid])?;
            let go_right = if increasing { g < r } else { g > r };
            if go_right {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x_r = 0.5 * (lo + hi);
        let m_level = p.mean_potential(&[x_r], ts)?;
        return Ok(A2Pass {
            m_minus,
            m_plus,
            m_level,
            method: "bisection",
        });
    }

    // Penalty path: per quadrature node, minimize F(t, .) + mu (G - r)^2
    // with an increasing mu schedule and warm starts across t.
    let mut near_level: Vec<(f64, &Vec<f64>)> = scan
        .iter()
        .zip(&g_values)
        .map(|(x, g)| ((g - r).abs(), x))
        .collect();
    near_level.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let starts: Vec<Vec<f64>> = near_level.iter().take(4).map(|(_, x)| (*x).clone()).collect();
    if starts.is_empty() {
        return Err(Error::LevelSetEmpty(format!("no scan point near G = {r}")));
    }

    let level_tol = 1e-4 * (1.0 + r.abs());
    let h_t = p.period / ts as f64;
    let mut m_level = 0.0;
    let mut warm: Option<Vec<f64>> = None;
    let mut hit_level = false;
    for j in 0..ts {
        let t = j as f64 * h_t;
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut candidates = starts.clone();
        if let Some(w) = &warm {
            candidates.insert(0, w.clone());
        }
        for start in candidates {
            let mut x = start.clone();
            for mu in &opts.penalty_schedule {
                let f = |y: &[f64]| -> Option<f64> {
                    let fv = p.potential(t, y).ok()?;
                    let gv = p.g.value(y).ok()?;
                    Some(fv + mu * (gv - r) * (gv - r))
                };
                let v0 = match f(&x) {
                    Some(v) => v,
                    None => break,
                };
                let (xr, _) = pattern_refine(&f, &x, v0, grid_step.max(1e-3), 1e-9);
                x = xr;
            }
            let residual = (p.g.value(&x)? - r).abs();
            if residual <= level_tol {
                hit_level = true;
                let fv = p.potential(t, &x)?;
                match &best {
                    Some((_, b)) if *b <= fv => {}
                    _ => best = Some((x.clone(), fv)),
                }
            }
        }
        match best {
            Some((x, fv)) => {
                m_level += h_t * fv;
                warm = Some(x);
            }
            None => {
                if !hit_level {
                    return Err(Error::LevelSetEmpty(format!(
                        "penalty search never reached |G - r| <= {level_tol}"
                    )));
                }
                return Err(Error::PenaltyNotConverged(format!(
                    "no level point within {level_tol} at t = {t}"
                )));
            }
        }
    }
    Ok(A2Pass {
        m_minus,
        m_plus,
        m_level,
        method: "penalty",
    })
}

/// Level-gap hypothesis at level `r`: both side infima of the mean
/// potential must sit strictly below the integrated level-set infimum.
pub fn check_a2(p: &SaddleProblem, r: f64, opts: &CheckA2Options) -> Result<CheckA2> {
    let fine = a2_pass(p, r, opts)?;
    let coarse_opts = CheckA2Options {
        scan_points: (opts.scan_points / 2).max(51),
        t_samples: (opts.t_samples / 2).max(8),
        ..opts.clone()
    };
    let coarse = a2_pass(p, r, &coarse_opts)?;
    let est_error = (fine.m_level - coarse.m_level).abs()
        + (fine.m_minus.max(fine.m_plus) - coarse.m_minus.max(coarse.m_plus)).abs();
    let side = fine.m_minus.max(fine.m_plus);
    let margin = fine.m_level - side;
    Ok(CheckA2 {
        passed: margin > 0.0,
        level: r,
        m_minus: fine.m_minus,
        m_plus: fine.m_plus,
        m_level: fine.m_level,
        margin,
        est_error,
        method: fine.method,
    })
}

/// Grid scan for a quasi-convexity violation of the mean potential:
/// a triple `x1 < x3 < x2` with `max(Psi(x1), Psi(x2)) < Psi(x3)`.
/// Returns the triple with the largest two-sided margin, or `None`.
pub fn quasiconvexity_violation(
    p: &SaddleProblem,
    x_radius: f64,
    grid: usize,
    t_samples: usize,
) -> Result<Option<(f64, f64, f64)>> {
    if p.dim != 1 {
        return Err(Error::Precondition("quasi-convexity scan needs n = 1".into()));
    }
    let m = grid.max(5);
    let xs: Vec<f64> = (0..m)
        .map(|i| -x_radius + 2.0 * x_radius * i as f64 / (m - 1) as f64)
        .collect();
    let mut values = Vec::with_capacity(m);
    for x in &xs {
        values.push(p.mean_potential(&[*x], t_samples)?);
    }
    // Prefix/suffix minima around every interior candidate bump.
    let mut best: Option<(usize, f64)> = None;
    let mut pref = vec![f64::INFINITY; m];
    let mut suff = vec![f64::INFINITY; m];
    for i in 1..m {
        pref[i] = pref[i - 1].min(values[i - 1]);
    }
    for i in (0..m - 1).rev() {
        suff[i] = suff[i + 1].min(values[i + 1]);
    }
    for j in 1..m - 1 {
        let margin = values[j] - pref[j].max(suff[j]);
        match best {
            Some((_, b)) if b >= margin => {}
            _ => best = Some((j, margin)),
        }
    }
    let Some((j, margin)) = best else { return Ok(None) };
    if margin <= 0.0 {
        return Ok(None);
    }
    let left = (0..j)
        .min_by(|a, b| values[*a].partial_cmp(&values[*b]).unwrap())
        .unwrap();
    let right = (j + 1..m)
        .min_by(|a, b| values[*a].partial_cmp(&values[*b]).unwrap())
        .unwrap();
    Ok(Some((xs[left], xs[j], xs[right])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Corollary21,
    Corollary22,
    Corollary23,
    BalancedTilt,
}

impl PresetName {
    pub fn parse(name: &str) -> Option<PresetName> {
        match name {
            "corollary-2-1" => Some(PresetName::Corollary21),
            "corollary-2-2" => Some(PresetName::Corollary22),
            "corollary-2-3" => Some(PresetName::Corollary23),
            "balanced-tilt" => Some(PresetName::BalancedTilt),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Corollary21 => "corollary-2-1",
            PresetName::Corollary22 => "corollary-2-2",
            PresetName::Corollary23 => "corollary-2-3",
            PresetName::BalancedTilt => "balanced-tilt",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PresetOutcome {
    pub problem: SaddleProblem,
    pub q: f64,
    pub checks: Vec<HypothesisCheck>,
    /// Level resolved by the preset (e.g. from the violation triple).
    pub level: f64,
}

fn check(id: &str, passed: bool, margin: f64, detail: String) -> HypothesisCheck {
    HypothesisCheck {
        id: id.to_string(),
        passed,
        margin,
        detail,
    }
}

/// Builds one of the named scenarios and runs its structural checks.
/// A failed check is an error naming the violated hypothesis.
pub fn preset_scenario(name: PresetName) -> Result<PresetOutcome> {
    let outcome = match name {
        PresetName::Corollary21 => preset_even_odd()?,
        PresetName::Corollary22 => preset_weighted_pocket()?,
        PresetName::Corollary23 => preset_monotone_tilt()?,
        PresetName::BalancedTilt => PresetOutcome {
            problem: SaddleProblem::new(
                KineticPotential::relativistic(1.0)?,
                TimePotential::parse("(x1^2-1)^2+0.1*x1", 1)?,
                PerturbShape::parse("x1", 1)?,
                None,
                1.0,
                0.0,
            )?,
            q: 2.0,
            checks: Vec::new(),
            level: 0.0,
        },
    };
    if let Some(bad) = outcome.checks.iter().find(|c| !c.passed) {
        return Err(Error::CheckFailed(format!("{}: {}", bad.id, bad.detail)));
    }
    Ok(outcome)
}

// Even potential with an odd shape; the level 0 gap then comes for free
// from symmetry.
fn preset_even_odd() -> Result<PresetOutcome> {
    let p = SaddleProblem::new(
        KineticPotential::relativistic(1.0)?,
        TimePotential::parse("(2+sin(2*pi*t))*(x1^2-1)^2", 1)?,
        PerturbShape::parse("x1", 1)?,
        None,
        1.0,
        0.0,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut even_worst = 0.0f64;
    let mut odd_worst = 0.0f64;
    for _ in 0..200 {
        let t = rng.gen_range(0.0..1.0);
        let x = rng.gen_range(-3.0..3.0);
        let a = p.f.value(t, &[x])?;
        let b = p.f.value(t, &[-x])?;
        even_worst = even_worst.max((a - b).abs() / (1.0 + a.abs()));
        let ga = p.g.value(&[x])?;
        let gb = p.g.value(&[-x])?;
        odd_worst = odd_worst.max((ga + gb).abs() / (1.0 + ga.abs()));
    }
    let mut checks = vec![
        check(
            "F-even",
            even_worst <= 1e-12,
            -even_worst,
            format!("max relative asymmetry {even_worst:.3e}"),
        ),
        check(
            "G-odd",
            odd_worst <= 1e-12,
            -odd_worst,
            format!("max relative asymmetry {odd_worst:.3e}"),
        ),
    ];

    // Displayed inequality: inf over constants of the mean potential
    // must undercut the integrated level-zero infimum.
    let a2opts = CheckA2Options::default();
    let scan = scan_points(1, a2opts.x_radius, a2opts.scan_points, 1);
    let mut inf_all = f64::INFINITY;
    for x in &scan {
        inf_all = inf_all.min(p.mean_potential(x, a2opts.t_samples)?);
    }
    let pass = a2_pass(&p, 0.0, &a2opts)?;
    checks.push(check(
        "mean-inf-below-level",
        inf_all < pass.m_level,
        pass.m_level - inf_all,
        format!("inf mean potential {inf_all:.6e} vs level value {:.6e}", pass.m_level),
    ));
    Ok(PresetOutcome {
        problem: p,
        q: 2.0,
        checks,
        level: 0.0,
    })
}

// Coercive shape with a unique minimum that the potential treats as a
// strict local, not global, pocket; a positive time weight multiplies
// the potential.
fn preset_weighted_pocket() -> Result<PresetOutcome> {
    let p = SaddleProblem::new(
        KineticPotential::relativistic(1.0)?,
        TimePotential::parse("x1^4-2.2*x1^3+x1^2", 1)?,
        PerturbShape::parse("x1^2", 1)?,
        Some(TimeWeight::parse("1.5+0.25*sin(2*pi*t)")?),
        1.0,
        0.0, // resolved below
    )?;
    p.validate_weight(64)?;

    let radius = 3.0;
    let scan = scan_points(1, radius, 1201, 2);
    let mut g_best = f64::INFINITY;
    let mut x0 = vec![0.0];
    for x in &scan {
        let g = p.g.value(x)?;
        if g < g_best {
            g_best = g;
            x0 = x.clone();
        }
    }
    // Uniqueness: every near-minimal scan point must hug the argmin.
    let mut unique = true;
    for x in &scan {
        if p.g.value(x)? <= g_best + 1e-6 && (x[0] - x0[0]).abs() > 0.05 {
            unique = false;
        }
    }
    let mut checks = vec![check(
        "G-unique-minimum",
        unique,
        0.0,
        format!("sampled argmin at {:.4}", x0[0]),
    )];

    // Strict local pocket of F around x0 on the largest working ring.
    let f0 = p.f.value(0.0, &x0)?;
    let mut rho = 0.0;
    for cand in [0.5, 0.4, 0.3, 0.2, 0.1] {
        let mut strict = true;
        for i in 1..=80 {
            let d = cand * i as f64 / 80.0;
            for x in [x0[0] + d, x0[0] - d] {
                if p.f.value(0.0, &[x])? <= f0 {
                    strict = false;
                }
            }
        }
        if strict {
            rho = cand;
            break;
        }
    }
    checks.push(check(
        "F-strict-local-minimum",
        rho > 0.0,
        rho,
        format!("strict ring radius {rho}"),
    ));
    let global_better = scan
        .iter()
        .map(|x| p.f.value(0.0, x))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    checks.push(check(
        "F-not-global-minimum",
        global_better < f0 - 1e-9,
        f0 - global_better,
        format!("scan minimum {global_better:.6e} vs pocket value {f0:.6e}"),
    ));

    let mut gamma_min = f64::INFINITY;
    for t in t_grid(1.0, 64) {
        gamma_min = gamma_min.min(p.gamma.as_ref().unwrap().value(t)?);
    }
    checks.push(check(
        "gamma-positive",
        gamma_min > 0.0,
        gamma_min,
        format!("min sampled weight {gamma_min:.6e}"),
    ));

    // Level between G(x0) and the ring values so the sublevel set stays
    // inside the pocket.
    let ring_g = p.g.value(&[x0[0] + rho])?.min(p.g.value(&[x0[0] - rho])?);
    let level = g_best + 0.5 * (ring_g - g_best);
    let mut contained = true;
    for x in &scan {
        if p.g.value(x)? <= level && (x[0] - x0[0]).abs() > rho {
            contained = false;
        }
    }
    checks.push(check(
        "sublevel-inside-pocket",
        contained,
        ring_g - level,
        format!("level {level:.6e} against ring radius {rho}"),
    ));

    let problem = SaddleProblem { level, ..p };
    Ok(PresetOutcome {
        problem,
        q: 2.0,
        checks,
        level,
    })
}

// Strictly monotone shape plus a non-quasi-convex mean potential; the
// level comes from the violation triple.
fn preset_monotone_tilt() -> Result<PresetOutcome> {
    let p = SaddleProblem::new(
        KineticPotential::relativistic(1.0)?,
        TimePotential::parse("(x1^2-1)^2+0.1*x1", 1)?,
        PerturbShape::parse("x1", 1)?,
        None,
        1.0,
        0.0,
    )?;
    let scan = scan_points(1, 3.0, 601, 3);
    let mut strict = true;
    let mut prev = f64::NEG_INFINITY;
    let mut direction = 0.0f64;
    for (i, x) in scan.iter().enumerate() {
        let g = p.g.value(x)?;
        if i > 0 {
            let d = g - prev;
            if direction == 0.0 {
                direction = d.signum();
            }
            if d == 0.0 || d.signum() != direction {
                strict = false;
            }
        }
        prev = g;
    }
    let mut checks = vec![check(
        "G-strictly-monotone",
        strict,
        0.0,
        "sampled differences keep one strict sign".into(),
    )];

    let triple = quasiconvexity_violation(&p, 3.0, 601, 64)?;
    let (level, detail) = match &triple {
        Some((x1, x3, x2)) => (p.g.value(&[*x3])?, format!("triple ({x1:.4}, {x3:.4}, {x2:.4})")),
        None => (0.0, "no violation triple found".into()),
    };
    checks.push(check(
        "mean-not-quasi-convex",
        triple.is_some(),
        0.0,
        detail,
    ));

    let problem = SaddleProblem { level, ..p };
    Ok(PresetOutcome {
        problem,
        q: 2.0,
        checks,
        level,
    })
}
