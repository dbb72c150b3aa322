//! Hypothesis states for unentangled and entangled single-photon illumination,
//! the truncated multimode thermal state used to check the low-noise
//! approximation, and small parameter helpers.
//!
//! Signal space is `[vac, s1, ..., sd]`: vacuum plus one photon in each of the
//! `d` detector modes. Entangled states live on signal ⊗ ancilla, signal major.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::hilbert::{
    tensor, trace_distance, Basis, BasisLabel, DensityMatrix, HermitianOperator, C64,
    DEFAULT_DIM_CAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Unentangled,
    Entangled,
}

impl Kind {
    pub const ALL: [Kind; 2] = [Kind::Unentangled, Kind::Entangled];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Unentangled => "unentangled",
            Kind::Entangled => "entangled",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "unentangled" => Ok(Kind::Unentangled),
            "entangled" => Ok(Kind::Entangled),
            other => Err(format!("unknown kind `{other}`")),
        }
    }
}

/// Reflectivity, thermal weight, mode count and prior of "object absent".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    pub eta: f64,
    pub b: f64,
    pub d: usize,
    pub prior0: f64,
}

impl ScenarioParams {
    pub fn new(eta: f64, b: f64, d: usize) -> Result<Self> {
        Self::with_prior(eta, b, d, 0.5)
    }

    pub fn with_prior(eta: f64, b: f64, d: usize, prior0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::domain("eta", eta, "reflectivity must lie in [0, 1]"));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::domain("b", b, "thermal weight must be >= 0"));
        }
        if d == 0 {
            return Err(Error::domain("d", 0.0, "mode count must be >= 1"));
        }
        if !(0.0..=1.0).contains(&prior0) {
            return Err(Error::domain("prior0", prior0, "prior must lie in [0, 1]"));
        }
        Ok(ScenarioParams { eta, b, d, prior0 })
    }

    pub fn prior1(&self) -> f64 {
        1.0 - self.prior0
    }

    /// Expected thermal photons per detection event.
    pub fn db(&self) -> f64 {
        self.d as f64 * self.b
    }

    fn check_low_noise(&self) -> Result<()> {
        let product = self.db();
        if product < 0.5 {
            Ok(())
        } else {
            Err(Error::ApproximationDomain { product })
        }
    }
}

/// Single-photon signal state `sum_k c_k |k>` over the `d` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    amplitudes: DVector<C64>,
}

impl SignalSpec {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if !((norm - 1.0).abs() <= 1e-12) {
            return Err(Error::SignalNorm { norm });
        }
        Ok(SignalSpec { amplitudes: v })
    }

    /// Rescales to unit norm; rejects the zero vector.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::SignalNorm { norm });
        }
        Ok(SignalSpec {
            amplitudes: v.unscale(norm),
        })
    }

    pub fn uniform(d: usize) -> Self {
        let a = C64::new(1.0 / (d as f64).sqrt(), 0.0);
        SignalSpec {
            amplitudes: DVector::from_element(d, a),
        }
    }

    /// All weight in mode `k` (1-based).
    pub fn mode(d: usize, k: usize) -> Self {
        let mut v = DVector::zeros(d);
        v[k - 1] = C64::new(1.0, 0.0);
        SignalSpec { amplitudes: v }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }
}

#[derive(Debug, Clone)]
pub struct HypothesisPair {
    pub rho0: DensityMatrix,
    pub rho1: DensityMatrix,
    pub kind: Kind,
    /// The state a returning signal photon is tested against (`|psi>` or `|psi>_SA`).
    pub probe: DVector<C64>,
}

/// `(1 - db)|vac><vac| + b sum_k |k><k|`
fn low_noise_thermal(b: f64, d: usize) -> HermitianOperator {
    let mut diag = vec![b; d + 1];
    diag[0] = 1.0 - d as f64 * b;
    HermitianOperator::from_real_diagonal(&diag, Basis::signal(d))
        .expect("real diagonal is Hermitian")
}

/// `rho1 = (1 - eta) rho0 + eta |probe><probe|`
fn reflect(eta: f64, rho0: &HermitianOperator, probe: &DVector<C64>) -> Result<HermitianOperator> {
    let signal = HermitianOperator::projector(probe, rho0.basis().clone())?;
    rho0.combine(1.0 - eta, &signal, eta)
}

pub fn unentangled_pair(params: &ScenarioParams, psi: &SignalSpec) -> Result<HypothesisPair> {
    params.check_low_noise()?;
    if psi.len() != params.d {
        return Err(Error::SignalLength {
            len: psi.len(),
            d: params.d,
        });
    }
    let rho0 = low_noise_thermal(params.b, params.d);
    let mut probe = DVector::zeros(params.d + 1);
    probe.rows_mut(1, params.d).copy_from(psi.amplitudes());
    let rho1 = reflect(params.eta, &rho0, &probe)?;
    Ok(HypothesisPair {
        rho0: DensityMatrix::new(rho0)?,
        rho1: DensityMatrix::new(rho1)?,
        kind: Kind::Unentangled,
        probe,
    })
}

pub fn entangled_pair(params: &ScenarioParams) -> Result<HypothesisPair> {
    entangled_pair_with_cap(params, DEFAULT_DIM_CAP)
}

pub fn entangled_pair_with_cap(params: &ScenarioParams, cap: usize) -> Result<HypothesisPair> {
    params.check_low_noise()?;
    let d = params.d;
    let dim = d * (d + 1);
    if dim > cap {
        return Err(Error::Capacity { dim, cap });
    }
    let ancilla = HermitianOperator::identity(Basis::ancilla(d)).scale(1.0 / d as f64);
    let rho0 = tensor(&low_noise_thermal(params.b, d), &ancilla);

    // (1/sqrt d) sum_k |k>_S |k>_A; signal index k sits at row k*d, ancilla k at column k-1
    let amp = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    let mut probe = DVector::zeros(dim);
    for k in 1..=d {
        probe[k * d + (k - 1)] = amp;
    }
    let rho1 = reflect(params.eta, &rho0, &probe)?;
    Ok(HypothesisPair {
        rho0: DensityMatrix::new(rho0)?,
        rho1: DensityMatrix::new(rho1)?,
        kind: Kind::Entangled,
        probe,
    })
}

pub fn pair(params: &ScenarioParams, kind: Kind, psi: &SignalSpec) -> Result<HypothesisPair> {
    match kind {
        Kind::Unentangled => unentangled_pair(params, psi),
        Kind::Entangled => entangled_pair(params),
    }
}

/// Geometric ratio `λ` of a thermal mode whose one-photon probability is `b`,
/// the smaller root of `b = (1 - λ) λ`.
pub fn thermal_ratio(b: f64) -> Result<f64> {
    if !(0.0..0.25).contains(&b) {
        return Err(Error::domain(
            "b",
            b,
            "b = (1 - λ)λ has a root below 1/2 only for 0 <= b < 1/4",
        ));
    }
    Ok(2.0 * b / (1.0 + (1.0 - 4.0 * b).sqrt()))
}

pub fn exact_thermal(b: f64, d: usize, n_max: u32) -> Result<DensityMatrix> {
    exact_thermal_with_cap(b, d, n_max, DEFAULT_DIM_CAP)
}

/// Product of `d` truncated, renormalized geometric modes in the Fock basis.
pub fn exact_thermal_with_cap(b: f64, d: usize, n_max: u32, cap: usize) -> Result<DensityMatrix> {
    let lambda = thermal_ratio(b)?;
    if d == 0 {
        return Err(Error::domain("d", 0.0, "mode count must be >= 1"));
    }
    if n_max < 2 {
        return Err(Error::domain("n_max", n_max as f64, "truncation must be >= 2"));
    }
    let per = n_max as usize + 1;
    let dim = u32::try_from(d)
        .ok()
        .and_then(|e| per.checked_pow(e))
        .filter(|&n| n <= cap)
        .ok_or(Error::Capacity {
            dim: per.saturating_pow(d.min(64) as u32),
            cap,
        })?;

    let mut single: Vec<f64> = (0..per).map(|n| lambda.powi(n as i32)).collect();
    let z: f64 = single.iter().sum();
    single.iter_mut().for_each(|p| *p /= z);

    let basis = Basis::fock(d, n_max);
    let diag: Vec<f64> = basis
        .iter()
        .map(|label| match label {
            BasisLabel::FockTuple(occ) => occ.iter().map(|&n| single[n as usize]).product(),
            _ => unreachable!("fock basis"),
        })
        .collect();
    debug_assert_eq!(diag.len(), dim);
    DensityMatrix::new(HermitianOperator::from_real_diagonal(&diag, basis)?)
}

/// Pinches a Fock-basis state onto `[vac, s1..sd, overflow]`.
fn compress_to_single_photon(rho: &DensityMatrix, d: usize) -> Result<DensityMatrix> {
    let sector: Vec<Option<usize>> = rho
        .basis()
        .iter()
        .map(|label| match label {
            BasisLabel::FockTuple(occ) => {
                let total: u32 = occ.iter().sum();
                match total {
                    0 => Some(0),
                    1 => occ.iter().position(|&n| n == 1).map(|k| k + 1),
                    _ => None,
                }
            }
            _ => None,
        })
        .collect();

    let n = d + 2;
    let mut m = nalgebra::DMatrix::<C64>::zeros(n, n);
    let src = rho.op().matrix();
    for (i, si) in sector.iter().enumerate() {
        let Some(si) = si else { continue };
        for (j, sj) in sector.iter().enumerate() {
            if let Some(sj) = sj {
                m[(*si, *sj)] += src[(i, j)];
            }
        }
    }
    let kept: f64 = (0..=d).map(|k| m[(k, k)].re).sum();
    m[(d + 1, d + 1)] = C64::new(1.0 - kept, 0.0);

    let mut labels = Basis::signal(d).labels().to_vec();
    labels.push(BasisLabel::Overflow);
    let basis = Basis::new(labels, d, None)?;
    DensityMatrix::new(HermitianOperator::new(m, basis)?)
}

/// Trace norm between the exact thermal state (pinched to the vacuum and
/// one-photon sector plus overflow) and the low-noise approximation.
pub fn approximation_gap(params: &ScenarioParams, n_max: u32) -> Result<f64> {
    params.check_low_noise()?;
    let exact = exact_thermal(params.b, params.d, n_max)?;
    let compressed = compress_to_single_photon(&exact, params.d)?;

    let mut diag = vec![params.b; params.d + 2];
    diag[0] = 1.0 - params.db();
    diag[params.d + 1] = 0.0;
    let approx = DensityMatrix::new(HermitianOperator::from_real_diagonal(
        &diag,
        compressed.basis().clone(),
    )?)?;
    trace_distance(&compressed, &approx)
}

/// Entanglement in e-bits of a maximally entangled pair over `d` modes.
pub fn ebits(d: usize) -> f64 {
    (d as f64).log2()
}

/// One-photon probability of a thermal mode at `x = ħω/kT`.
pub fn thermal_b(x: f64) -> f64 {
    -(-x).exp_m1() * (-x).exp()
}

/// Detector mode count `d = W T`, rounded to the nearest integer and at least 1.
pub fn mode_count(bandwidth: f64, window: f64) -> usize {
    (bandwidth * window).round().max(1.0) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub enum PsiSpec {
    Uniform,
    Amplitudes(Vec<C64>),
}

impl PsiSpec {
    /// Resolves against `d`, normalizing explicit amplitudes.
    pub fn resolve(&self, d: usize) -> Result<SignalSpec> {
        match self {
            PsiSpec::Uniform => Ok(SignalSpec::uniform(d)),
            PsiSpec::Amplitudes(a) if a.len() != d => Err(Error::SignalLength { len: a.len(), d }),
            PsiSpec::Amplitudes(a) => SignalSpec::normalized(a.clone()),
        }
    }
}

impl FromStr for PsiSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s == "uniform" {
            return Ok(PsiSpec::Uniform);
        }
        s.split(',')
            .map(|item| {
                let (re, im) = item
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| format!("amplitude `{item}` is not `re:im`"))?;
                let re: f64 = re.trim().parse().map_err(|_| format!("bad real part `{re}`"))?;
                let im: f64 = im.trim().parse().map_err(|_| format!("bad imaginary part `{im}`"))?;
                Ok(C64::new(re, im))
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(PsiSpec::Amplitudes)
    }
}

/// Values read from a `key = value` scenario file. `eta`, `b` and `d` accept
/// comma-separated lists for sweeps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioConfig {
    pub eta: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub d: Option<Vec<usize>>,
    pub prior0: Option<f64>,
    pub psi: Option<PsiSpec>,
    pub seed: Option<u64>,
}

pub fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| format!("cannot parse `{}`", x.trim())))
        .collect()
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |m: String| Error::parse(line_no, format!("{key}: {m}"));
            match key {
                "eta" => cfg.eta = Some(parse_list(value).map_err(bad)?),
                "b" => cfg.b = Some(parse_list(value).map_err(bad)?),
                "d" => cfg.d = Some(parse_list(value).map_err(bad)?),
                "prior0" => {
                    cfg.prior0 = Some(value.parse().map_err(|_| bad(format!("cannot parse `{value}`")))?)
                }
                "psi" => cfg.psi = Some(value.parse().map_err(bad)?),
                "seed" => {
                    cfg.seed = Some(value.parse().map_err(|_| bad(format!("cannot parse `{value}`")))?)
                }
                other => return Err(Error::parse(line_no, format!("unknown key `{other}`"))),
            }
        }
        Ok(cfg)
    }
}
