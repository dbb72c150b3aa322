//! Distinguishing "object absent" from "object present".
//!
//! Single-shot: the Helstrom measurement projects onto the positive part of
//! `prior1·rho1 − prior0·rho0`. Asymptotic: the quantum Chernoff quantity
//! `Q = min_s tr rho0^{1−s} rho1^s`, with `p_n(error) ≈ Q^n / 2`. The reduced
//! form `1 − ηs + b((1 + η/b)^s − 1)` and its entangled counterpart (`b → b/d`)
//! are provided alongside the exact-matrix minimization, together with the
//! per-shot yes/no outcome models and their classical Chernoff bound.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    check_unit_exponent, clipped_pow, dm_power, positive_part_projector, DensityMatrix,
    HermitianOperator, HERMITIAN_TOL,
};
use crate::optimize::minimize_unit_interval;
use crate::scenarios::{pair, HypothesisPair, Kind, PsiSpec, ScenarioParams};

#[derive(Debug, Clone)]
pub struct HelstromResult {
    pub p_error: f64,
    /// Projector onto the "object present" outcome.
    pub measurement: HermitianOperator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernoffResult {
    pub q: f64,
    pub s_star: f64,
    /// `−ln q`
    pub exponent: f64,
}

impl ChernoffResult {
    fn from_q(q: f64, s_star: f64) -> Self {
        let q = q.min(1.0);
        ChernoffResult {
            q,
            s_star,
            exponent: (-q.ln()).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcomeModel {
    pub p_yes_given_absent: f64,
    pub p_yes_given_present: f64,
    pub kind: Kind,
}

impl TrialOutcomeModel {
    pub fn new(p_yes_given_absent: f64, p_yes_given_present: f64, kind: Kind) -> Result<Self> {
        for (name, p) in [
            ("p_yes_given_absent", p_yes_given_absent),
            ("p_yes_given_present", p_yes_given_present),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(name, p, "probability must lie in [0, 1]"));
            }
        }
        Ok(TrialOutcomeModel {
            p_yes_given_absent,
            p_yes_given_present,
            kind,
        })
    }

    pub fn p_yes(&self, present: bool) -> f64 {
        if present {
            self.p_yes_given_present
        } else {
            self.p_yes_given_absent
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Good,
    Bad,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Good => "good",
            Regime::Bad => "bad",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeLabel {
    pub value: Regime,
    /// Signal-to-noise ratio `η/b`, or `ηd/b` when entangled.
    pub ratio: f64,
}

fn check_priors(prior0: f64, prior1: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&prior0) {
        return Err(Error::domain("prior0", prior0, "prior must lie in [0, 1]"));
    }
    if !((prior0 + prior1 - 1.0).abs() <= 1e-12) {
        return Err(Error::domain("prior1", prior1, "priors must sum to 1"));
    }
    Ok(())
}

pub fn helstrom(pair: &HypothesisPair, prior0: f64, prior1: f64) -> Result<HelstromResult> {
    check_priors(prior0, prior1)?;
    let rho0 = pair.rho0.op();
    let rho1 = pair.rho1.op();
    let delta = rho1.combine(prior1, rho0, -prior0)?;
    let measurement = positive_part_projector(&delta)?;
    let false_alarm = measurement.trace_product(rho0)?;
    let detect = measurement.trace_product(rho1)?;
    let p_error = prior0 * false_alarm + prior1 * (1.0 - detect);
    Ok(HelstromResult {
        p_error,
        measurement,
    })
}

/// `tr rho0^{1−s} rho1^s`, with `0^s = 0` so the endpoints pick up support projectors.
pub fn q_of_s(rho0: &DensityMatrix, rho1: &DensityMatrix, s: f64) -> Result<f64> {
    check_unit_exponent(s)?;
    let a = dm_power(rho0, 1.0 - s)?;
    let b = dm_power(rho1, s)?;
    a.trace_product(&b)
}

/// Evaluates `Q(s)` in `O(n²)` per point from the two spectra:
/// `Q(s) = Σ_ij λ_i^{1−s} μ_j^s |<u_i|v_j>|²`.
pub struct ChernoffKernel {
    lambda: Vec<f64>,
    mu: Vec<f64>,
    overlap: Vec<f64>,
}

impl ChernoffKernel {
    pub fn new(rho0: &DensityMatrix, rho1: &DensityMatrix) -> Result<Self> {
        if rho0.basis() != rho1.basis() {
            return Err(Error::BasisMismatch {
                left: rho0.dim(),
                right: rho1.dim(),
            });
        }
        let s0 = rho0.spectrum();
        let s1 = rho1.spectrum();
        let cross = s0.eigenvectors.adjoint() * &s1.eigenvectors;
        let n = rho0.dim();
        let mut overlap = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                overlap.push(cross[(i, j)].norm_sqr());
            }
        }
        Ok(ChernoffKernel {
            lambda: s0.eigenvalues.clone(),
            mu: s1.eigenvalues.clone(),
            overlap,
        })
    }

    pub fn q(&self, s: f64) -> f64 {
        let n = self.mu.len();
        let mu_s: Vec<f64> = self.mu.iter().map(|&m| clipped_pow(m, s)).collect();
        self.lambda
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let li = clipped_pow(l, 1.0 - s);
                if li == 0.0 {
                    return 0.0;
                }
                let row = &self.overlap[i * n..(i + 1) * n];
                li * row.iter().zip(&mu_s).map(|(w, m)| w * m).sum::<f64>()
            })
            .sum()
    }
}

/// Identical states (to within the Hermitian tolerance) give `q = 1` at `s* = ½`,
/// matching the closed form at `η = 0`.
pub fn chernoff_numeric(pair: &HypothesisPair) -> Result<ChernoffResult> {
    if pair.rho0.op().max_abs_diff(pair.rho1.op()) <= HERMITIAN_TOL {
        return Ok(ChernoffResult::from_q(1.0, 0.5));
    }
    let kernel = ChernoffKernel::new(&pair.rho0, &pair.rho1)?;
    let m = minimize_unit_interval(|s| kernel.q(s));
    Ok(ChernoffResult::from_q(m.value, m.x))
}

fn check_eta_b(eta: f64, b: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain("eta", eta, "reflectivity must lie in [0, 1]"));
    }
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::domain("b", b, "thermal weight must be >= 0"));
    }
    Ok(())
}

/// Minimizes `f(s) = 1 − ηs + b((1 + η/b)^s − 1)` in closed form.
///
/// `f'(s) = 0` gives `s* = ln(x / ln(1+x)) / ln(1+x)` with `x = η/b`, which
/// always lies in `(0, 1)` for `x > 0`; the endpoints are still compared.
pub fn analytic_q_unentangled(eta: f64, b: f64) -> Result<ChernoffResult> {
    check_eta_b(eta, b)?;
    if eta == 0.0 {
        return Ok(ChernoffResult {
            q: 1.0,
            s_star: 0.5,
            exponent: 0.0,
        });
    }
    if b == 0.0 {
        // infimum of 1 − ηs + ... as b → 0
        return Ok(ChernoffResult::from_q(1.0 - eta, 1.0));
    }
    let x = eta / b;
    let log1px = x.ln_1p();
    // 1 − f(s), kept separate so tiny exponents are not lost to rounding
    let gain = |s: f64| eta * s - b * (s * log1px).exp_m1();
    let stationary = if x < 1e-5 {
        0.5 + x / 24.0
    } else {
        (x / log1px).ln() / log1px
    };
    let mut best = (stationary.clamp(0.0, 1.0), gain(stationary.clamp(0.0, 1.0)));
    for s in [0.0, 1.0] {
        let g = gain(s);
        if g > best.1 {
            best = (s, g);
        }
    }
    let (s_star, g) = best;
    Ok(ChernoffResult {
        q: 1.0 - g,
        s_star,
        exponent: -(-g).ln_1p(),
    })
}

/// The reduced entangled form is the unentangled one with `b → b/d`.
pub fn analytic_q_entangled(eta: f64, b: f64, d: usize) -> Result<ChernoffResult> {
    if d == 0 {
        return Err(Error::domain("d", 0.0, "mode count must be >= 1"));
    }
    analytic_q_unentangled(eta, b / d as f64)
}

pub fn analytic_q(eta: f64, b: f64, d: usize, kind: Kind) -> Result<ChernoffResult> {
    match kind {
        Kind::Unentangled => analytic_q_unentangled(eta, b),
        Kind::Entangled => analytic_q_entangled(eta, b, d),
    }
}

/// Ties (ratio exactly 1) are Bad; `b = 0` is Good with an infinite ratio.
pub fn regime(eta: f64, b: f64, d: usize, kind: Kind) -> RegimeLabel {
    let gain = match kind {
        Kind::Unentangled => 1.0,
        Kind::Entangled => d as f64,
    };
    let ratio = if b > 0.0 { eta * gain / b } else { f64::INFINITY };
    RegimeLabel {
        value: if ratio > 1.0 { Regime::Good } else { Regime::Bad },
        ratio,
    }
}

/// Leading-order Q in the current regime: `1 − η` (good) or `1 − η²d_eff/(8b)` (bad).
pub fn regime_approximation(eta: f64, b: f64, d: usize, kind: Kind) -> f64 {
    let label = regime(eta, b, d, kind);
    match label.value {
        Regime::Good => 1.0 - eta,
        Regime::Bad => 1.0 - eta * label.ratio / 8.0,
    }
}

pub fn conditional_probs(params: &ScenarioParams, kind: Kind) -> Result<TrialOutcomeModel> {
    let noise = match kind {
        Kind::Unentangled => params.b,
        Kind::Entangled => params.b / params.d as f64,
    };
    let eta = params.eta;
    TrialOutcomeModel::new(noise, noise * (1.0 - eta) + eta, kind)
}

fn pow0(p: f64, s: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p.powf(s)
    }
}

pub fn classical_chernoff_bernoulli(model: &TrialOutcomeModel) -> ChernoffResult {
    let p0 = model.p_yes_given_absent;
    let p1 = model.p_yes_given_present;
    let f = |s: f64| pow0(p0, 1.0 - s) * pow0(p1, s) + pow0(1.0 - p0, 1.0 - s) * pow0(1.0 - p1, s);
    let m = minimize_unit_interval(f);
    ChernoffResult::from_q(m.value, m.x)
}

/// Smallest `n` with `q^n / 2 <= epsilon`.
pub fn trials_needed(q: f64, epsilon: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::domain("epsilon", epsilon, "target error must lie in (0, 1/2)"));
    }
    if !(q < 1.0) {
        return Err(Error::Unbounded { q });
    }
    if q <= 0.0 {
        return Ok(1);
    }
    let ok = |n: u64| 0.5 * q.powf(n as f64) <= epsilon;
    let mut n = ((2.0 * epsilon).ln() / q.ln()).ceil().max(1.0) as u64;
    while n > 1 && ok(n - 1) {
        n -= 1;
    }
    while !ok(n) {
        n += 1;
    }
    Ok(n)
}

/// One row of the discrimination sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta: f64,
    pub b: f64,
    pub d: usize,
    pub kind: String,
    pub regime: String,
    pub q_numeric: f64,
    pub s_star: f64,
    pub q_analytic: f64,
    pub q_regime_approx: f64,
    pub helstrom_error: f64,
    /// `None` when `q_numeric = 1` (no finite count).
    pub trials_eps01: Option<u64>,
}

pub const SWEEP_HEADER: &str =
    "eta,b,d,kind,regime,q_numeric,s_star,q_analytic,q_regime_approx,helstrom_error,trials_eps01";

pub fn evaluate(params: &ScenarioParams, kind: Kind, psi: &PsiSpec) -> Result<SweepRow> {
    let signal = psi.resolve(params.d)?;
    let states = pair(params, kind, &signal)?;
    let numeric = chernoff_numeric(&states)?;
    let analytic = analytic_q(params.eta, params.b, params.d, kind)?;
    let hel = helstrom(&states, params.prior0, params.prior1())?;
    let trials = match trials_needed(numeric.q, 0.01) {
        Ok(n) => Some(n),
        Err(Error::Unbounded { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(SweepRow {
        eta: params.eta,
        b: params.b,
        d: params.d,
        kind: kind.to_string(),
        regime: regime(params.eta, params.b, params.d, kind).value.to_string(),
        q_numeric: numeric.q,
        s_star: numeric.s_star,
        q_analytic: analytic.q,
        q_regime_approx: regime_approximation(params.eta, params.b, params.d, kind),
        helstrom_error: hel.p_error,
        trials_eps01: trials,
    })
}

/// Cartesian grid in `eta`-major, then `b`, `d`, `kind` order. Cells are
/// evaluated in parallel; row order never depends on completion order.
pub fn sweep(
    etas: &[f64],
    bs: &[f64],
    ds: &[usize],
    kinds: &[Kind],
    prior0: f64,
    psi: &PsiSpec,
) -> Result<Vec<SweepRow>> {
    let mut cells = Vec::new();
    for &eta in etas {
        for &b in bs {
            for &d in ds {
                for &kind in kinds {
                    cells.push((ScenarioParams::with_prior(eta, b, d, prior0)?, kind));
                }
            }
        }
    }
    cells
        .par_iter()
        .map(|(p, kind)| evaluate(p, *kind, psi))
        .collect()
}
