//! Kinetic potentials: the convex barrier Phi on the closed ball of
//! radius `L` together with its gradient map phi, which must blow up at
//! the boundary so that it maps the open ball onto all of R^n.
//!
//! The canonical instance is the relativistic potential
//! `Phi(v) = -sqrt(L^2 - |v|^2)` with `phi(v) = v / sqrt(L^2 - |v|^2)`.
//! The `user-polynomial` kind augments it with even-power correction
//! terms `c_j (|v|^{2j} - L^{2j})`; nonnegative coefficients keep the
//! instance admissible. A pure polynomial gradient stays bounded on the
//! ball and can never be onto, so the barrier core is not optional.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum KineticKind {
    Relativistic,
    UserPolynomial { coeffs: Vec<f64> },
}

/// Kinetic potential on the ball of radius `L`.
///
/// `value` is defined on the closed ball, `grad` only on the open ball;
/// requests at or past the boundary are hard errors, never extrapolated.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticPotential {
    l: f64,
    kind: KineticKind,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

impl KineticPotential {
    pub fn relativistic(l: f64) -> Result<KineticPotential> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::Domain(format!("slope bound L must be positive, got {l}")));
        }
        Ok(KineticPotential {
            l,
            kind: KineticKind::Relativistic,
        })
    }

    pub fn user_polynomial(l: f64, coeffs: Vec<f64>) -> Result<KineticPotential> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::Domain(format!("slope bound L must be positive, got {l}")));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("polynomial coefficients must be finite".into()));
        }
        Ok(KineticPotential {
            l,
            kind: KineticKind::UserPolynomial { coeffs },
        })
    }

    pub fn slope_bound(&self) -> f64 {
        self.l
    }

    pub fn kind(&self) -> &KineticKind {
        &self.kind
    }

    /// Phi at `v`; requires `|v| <= L`.
    pub fn value(&self, v: &[f64]) -> Result<f64> {
        let s = norm(v);
        if s > self.l {
            return Err(Error::Domain(format!(
                "|v| = {s} exceeds the closed ball of radius {}",
                self.l
            )));
        }
        Ok(self.value_radial(s))
    }

    /// phi at `v`; requires `|v| < L` strictly.
    pub fn grad(&self, v: &[f64]) -> Result<Vec<f64>> {
        let s = norm(v);
        if s >= self.l {
            return Err(Error::Domain(format!(
                "gradient undefined at |v| = {s} for slope bound {}",
                self.l
            )));
        }
        let scale = self.grad_over_radius(s);
        Ok(v.iter().map(|c| c * scale).collect())
    }

    /// Phi and phi together; requires `|v| < L`.
    pub fn value_and_grad(&self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        let g = self.grad(v)?;
        Ok((self.value_radial(norm(v)), g))
    }

    fn value_radial(&self, s: f64) -> f64 {
        let l2 = self.l * self.l;
        let core = -(l2 - s * s).max(0.0).sqrt();
        match &self.kind {
            KineticKind::Relativistic => core,
            KineticKind::UserPolynomial { coeffs } => {
                let s2 = s * s;
                let mut acc = core;
                let mut s_pow = 1.0;
                let mut l_pow = 1.0;
                for c in coeffs {
                    s_pow *= s2;
                    l_pow *= l2;
                    acc += c * (s_pow - l_pow);
                }
                acc
            }
        }
    }

    // phi(v) = g(|v|)/|v| * v; this returns g(s)/s, finite at s = 0.
    fn grad_over_radius(&self, s: f64) -> f64 {
        let l2 = self.l * self.l;
        let core = 1.0 / (l2 - s * s).sqrt();
        match &self.kind {
            KineticKind::Relativistic => core,
            KineticKind::UserPolynomial { coeffs } => {
                let s2 = s * s;
                let mut acc = core;
                let mut s_pow = 1.0;
                for (j, c) in coeffs.iter().enumerate() {
                    let p = 2.0 * (j as f64 + 1.0);
                    acc += c * p * s_pow;
                    s_pow *= s2;
                }
                acc
            }
        }
    }

    /// Radial profile g(s) = |phi| along a ray at radius `s`.
    fn radial_grad_norm(&self, s: f64) -> f64 {
        s * self.grad_over_radius(s)
    }

    /// Inverts phi: returns `v` in the open ball with `phi(v) = w`.
    ///
    /// Closed form for the relativistic kind; a radial bisection solve
    /// otherwise. The result is validated by a round trip through
    /// `grad` to `1e-10` relative accuracy.
    pub fn phi_inverse(&self, w: &[f64]) -> Result<Vec<f64>> {
        let wn = norm(w);
        if wn == 0.0 {
            return Ok(vec![0.0; w.len()]);
        }
        let s = match &self.kind {
            KineticKind::Relativistic => self.l * wn / (1.0 + wn * wn).sqrt() / wn,
            KineticKind::UserPolynomial { .. } => {
                let s = self.radial_inverse_bisect(wn)?;
                s / wn
            }
        };
        // `s` here is radius/|w|, so v = s * w.
        let v: Vec<f64> = w.iter().map(|c| c * s).collect();
        let back = self.grad(&v)?;
        let err = back
            .iter()
            .zip(w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if err > 1e-10 * (1.0 + wn) {
            return Err(Error::Convergence(format!(
                "phi inverse round trip error {err} at |w| = {wn}"
            )));
        }
        Ok(v)
    }

    // Solve radial_grad_norm(s) = target on [0, L) by bisection.
    fn radial_inverse_bisect(&self, target: f64) -> Result<f64> {
        let mut lo = 0.0f64;
        let mut hi = self.l * (1.0 - 1e-3);
        let mut guard = 0;
        while self.radial_grad_norm(hi) < target {
            hi = self.l - (self.l - hi) * 0.5;
            guard += 1;
            if guard > 2000 {
                return Err(Error::Convergence(format!(
                    "radial gradient never reaches {target}; instance may not be admissible"
                )));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.radial_grad_norm(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// One entry of the admissibility report.
#[derive(Debug, Clone)]
pub struct CheckItem {
    pub name: &'static str,
    pub passed: bool,
    pub worst: f64,
    pub detail: String,
}

/// Sampled membership evidence for the admissible kinetic class:
/// nonpositive Phi with its minimum at the origin, phi(0) = 0, strict
/// monotonicity of phi, boundary blow-up of |phi|, and agreement of phi
/// with finite differences of Phi.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub items: Vec<CheckItem>,
    pub max_grad_fd_discrepancy: f64,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.items.iter().filter(|i| !i.passed).map(|i| i.name).collect()
    }
}

pub fn check_admissibility(
    kin: &KineticPotential,
    dim: usize,
    samples: usize,
    seed: u64,
) -> AdmissibilityReport {
    check_admissibility_fns(
        kin.slope_bound(),
        dim,
        |v| kin.value(v).unwrap_or(f64::NAN),
        |v| kin.grad(v).unwrap_or_else(|_| vec![f64::NAN; v.len()]),
        samples,
        seed,
    )
}

/// Closure-based variant of [`check_admissibility`], so candidate
/// potentials can be screened before being wrapped in a catalog kind.
pub fn check_admissibility_fns(
    l: f64,
    dim: usize,
    value: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    samples: usize,
    seed: u64,
) -> AdmissibilityReport {
    assert!(samples >= 2, "need at least two samples");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::new();

    // Interior sample set for gradient-based checks (radius <= 0.95 L).
    let interior: Vec<Vec<f64>> = (0..samples)
        .map(|_| random_in_ball(&mut rng, dim, 0.95 * l))
        .collect();
    // Closed-ball samples for the value checks, boundary included.
    let mut closed: Vec<Vec<f64>> = (0..samples)
        .map(|_| random_in_ball(&mut rng, dim, l))
        .collect();
    closed.push(scaled_unit(&mut rng, dim, l));

    let origin = vec![0.0; dim];
    let phi0 = value(&origin);

    // Phi <= 0 on the closed ball.
    let mut worst_pos = f64::NEG_INFINITY;
    for x in &closed {
        worst_pos = worst_pos.max(value(x));
    }
    items.push(CheckItem {
        name: "nonpositivity",
        passed: worst_pos <= 1e-12,
        worst: worst_pos,
        detail: format!("max sampled Phi = {worst_pos:.3e}"),
    });

    // Phi(0) is the sampled minimum.
    let mut min_val = phi0;
    for x in &closed {
        min_val = min_val.min(value(x));
    }
    items.push(CheckItem {
        name: "origin-minimum",
        passed: min_val >= phi0 - 1e-12 * (1.0 + phi0.abs()),
        worst: min_val - phi0,
        detail: format!("Phi(0) = {phi0:.6e}, sampled min = {min_val:.6e}"),
    });

    // phi(0) = 0 exactly.
    let g0 = grad(&origin);
    let g0n = norm(&g0);
    items.push(CheckItem {
        name: "gradient-zero-at-origin",
        passed: g0n == 0.0,
        worst: g0n,
        detail: format!("|phi(0)| = {g0n:.3e}"),
    });

    // Strict monotonicity on sampled distinct pairs.
    let mut worst_pairing = f64::INFINITY;
    for i in 0..interior.len() {
        for j in (i + 1)..interior.len().min(i + 12) {
            let (a, b) = (&interior[i], &interior[j]);
            let ga = grad(a);
            let gb = grad(b);
            let mut pairing = 0.0;
            let mut dist2 = 0.0;
            for k in 0..dim {
                pairing += (ga[k] - gb[k]) * (a[k] - b[k]);
                dist2 += (a[k] - b[k]) * (a[k] - b[k]);
            }
            if dist2 > 0.0 {
                worst_pairing = worst_pairing.min(pairing);
            }
        }
    }
    items.push(CheckItem {
        name: "strict-monotonicity",
        passed: worst_pairing > 0.0,
        worst: worst_pairing,
        detail: format!("min sampled <phi(a)-phi(b), a-b> = {worst_pairing:.3e}"),
    });

    // |phi| blows up along rays approaching the boundary.
    let mut blowup_ok = true;
    let mut last_ratio = 0.0;
    for _ in 0..4.min(samples) {
        let dir = scaled_unit(&mut rng, dim, 1.0);
        let mut prev = 0.0;
        let mut first = f64::NAN;
        let mut increasing = true;
        for k in 1..=6 {
            let r = l * (1.0 - 10f64.powi(-k));
            let x: Vec<f64> = dir.iter().map(|c| c * r).collect();
            let gn = norm(&grad(&x));
            if k == 1 {
                first = gn;
            } else if gn <= prev {
                increasing = false;
            }
            prev = gn;
        }
        let ratio = if first > 0.0 { prev / first } else { f64::INFINITY };
        last_ratio = ratio;
        if !increasing || !(ratio > 10.0) {
            blowup_ok = false;
        }
    }
    items.push(CheckItem {
        name: "boundary-blowup",
        passed: blowup_ok,
        worst: last_ratio,
        detail: format!("|phi| growth factor along last sampled ray: {last_ratio:.3e}"),
    });

    // Central finite differences of Phi against phi.
    let step = 1e-5 * l;
    let mut max_rel = 0.0f64;
    for x in interior.iter().filter(|x| norm(x) <= 0.9 * l) {
        let g = grad(x);
        for k in 0..dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += step;
            xm[k] -= step;
            let fd = (value(&xp) - value(&xm)) / (2.0 * step);
            let rel = (fd - g[k]).abs() / (1.0 + g[k].abs());
            max_rel = max_rel.max(rel);
        }
    }
    items.push(CheckItem {
        name: "gradient-consistency",
        passed: max_rel <= 1e-6,
        worst: max_rel,
        detail: format!("max |fd - phi| relative = {max_rel:.3e}"),
    });

    AdmissibilityReport {
        items,
        max_grad_fd_discrepancy: max_rel,
    }
}

fn random_in_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm(&x);
        if n <= 1.0 {
            return x.iter().map(|c| c * radius).collect();
        }
    }
}

fn scaled_unit(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let x = random_in_ball(rng, dim, 1.0);
        let n = norm(&x);
        if n > 1e-3 {
            return x.iter().map(|c| c * radius / n).collect();
        }
    }
}
