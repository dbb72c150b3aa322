//! Point-by-point imaging: each pixel gets a fixed shot budget under the
//! unentangled or entangled outcome model, and is called "reflecting" when
//! its yes-fraction exceeds a threshold.

use rayon::prelude::*;
use rand::distr::{Bernoulli, Distribution};

use crate::discrimination::{conditional_probs, TrialOutcomeModel};
use crate::error::{Error, Result};
use crate::format::sig17;
use crate::montecarlo::replica_rng;
use crate::scenarios::{Kind, ScenarioParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectivityMap {
    width: usize,
    height: usize,
    eta: Vec<f64>,
}

impl ReflectivityMap {
    /// `eta` is row-major, `height` rows of `width` values.
    pub fn new(width: usize, height: usize, eta: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain("width", width.min(height) as f64, "map must be non-empty"));
        }
        if eta.len() != width * height {
            return Err(Error::parse(0, format!("expected {} values, got {}", width * height, eta.len())));
        }
        if let Some(&bad) = eta.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::domain("eta", bad, "reflectivity must lie in [0, 1]"));
        }
        Ok(ReflectivityMap { width, height, eta })
    }

    /// `high` on squares with odd `x + y`, `low` elsewhere.
    pub fn checkerboard(width: usize, height: usize, low: f64, high: f64) -> Result<Self> {
        let eta = (0..height)
            .flat_map(|y| (0..width).map(move |x| if (x + y) % 2 == 1 { high } else { low }))
            .collect();
        Self::new(width, height, eta)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.eta.len()
    }

    pub fn eta_at(&self, x: usize, y: usize) -> f64 {
        self.eta[y * self.width + x]
    }

    pub fn values(&self) -> &[f64] {
        &self.eta
    }

    /// First line `width height`, then `height` lines of `width` reals.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or_else(|| Error::parse(1, "empty map"))?;
        let dims: Vec<usize> = head
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(1, "expected `width height`"))?;
        let [width, height] = dims[..] else {
            return Err(Error::parse(1, "expected `width height`"));
        };
        let mut eta = Vec::with_capacity(width * height);
        let mut rows = 0;
        for (i, line) in lines {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(i + 1, "non-numeric reflectivity"))?;
            if row.len() != width {
                return Err(Error::parse(i + 1, format!("expected {width} values, got {}", row.len())));
            }
            eta.extend(row);
            rows += 1;
        }
        if rows != height {
            return Err(Error::parse(0, format!("expected {height} rows, got {rows}")));
        }
        Self::new(width, height, eta)
    }
}

fn write_grid(width: usize, height: usize, values: &[f64]) -> String {
    let mut out = format!("{width} {height}\n");
    for row in values.chunks(width).take(height) {
        let cells: Vec<String> = row.iter().map(|&v| sig17(v)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

impl ReflectivityMap {
    pub fn to_text(&self) -> String {
        write_grid(self.width, self.height, &self.eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagingConfig {
    pub shots_per_pixel: u64,
    pub kind: Kind,
    pub b: f64,
    pub d: usize,
    /// Yes-fraction above which a pixel is called reflecting.
    pub threshold: f64,
    pub seed: u64,
}

impl ImagingConfig {
    /// Threshold set so that an empty pixel fires with probability at most
    /// `false_alarm` (see [`threshold_for_budget`]).
    pub fn matched(
        kind: Kind,
        b: f64,
        d: usize,
        shots_per_pixel: u64,
        seed: u64,
        false_alarm: f64,
    ) -> Result<Self> {
        let absent = pixel_model(0.0, b, d, kind)?;
        let threshold = threshold_for_budget(shots_per_pixel, absent.p_yes_given_absent, false_alarm)?;
        Ok(ImagingConfig {
            shots_per_pixel,
            kind,
            b,
            d,
            threshold,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageResult {
    pub width: usize,
    pub height: usize,
    pub detected: Vec<bool>,
    pub yes_fraction: Vec<f64>,
    /// Fraction of pixels whose call disagrees with `eta > 0`.
    pub pixel_error_rate: f64,
    /// Reflecting pixels `(x, y)` whose model probabilities do not straddle the threshold.
    pub warnings: Vec<(usize, usize)>,
}

impl ImageResult {
    /// `yes_fraction` grid followed by `pixel_error_rate=<value>`.
    pub fn to_text(&self) -> String {
        let mut out = write_grid(self.width, self.height, &self.yes_fraction);
        out.push_str(&format!("pixel_error_rate={}\n", sig17(self.pixel_error_rate)));
        out
    }

    /// Plain PGM (P2, 255 levels); detected pixels are white.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.width, self.height);
        for row in self.detected.chunks(self.width) {
            let cells: Vec<&str> = row.iter().map(|&d| if d { "255" } else { "0" }).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn errors(&self, map: &ReflectivityMap) -> usize {
        self.detected
            .iter()
            .zip(map.values())
            .filter(|(&det, &eta)| det != (eta > 0.0))
            .count()
    }
}

fn pixel_model(eta: f64, b: f64, d: usize, kind: Kind) -> Result<TrialOutcomeModel> {
    conditional_probs(&ScenarioParams::new(eta, b, d)?, kind)
}

pub fn scan_image(map: &ReflectivityMap, config: &ImagingConfig) -> Result<ImageResult> {
    if !(config.threshold > 0.0 && config.threshold < 1.0) {
        return Err(Error::domain("threshold", config.threshold, "must lie in (0, 1)"));
    }
    if config.shots_per_pixel == 0 {
        return Err(Error::domain("shots_per_pixel", 0.0, "must be >= 1"));
    }
    let models = map
        .values()
        .iter()
        .map(|&eta| pixel_model(eta, config.b, config.d, config.kind))
        .collect::<Result<Vec<_>>>()?;

    let n = config.shots_per_pixel;
    let yes_fraction: Vec<f64> = models
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let mut rng = replica_rng(config.seed, i as u64);
            let shot = Bernoulli::new(m.p_yes_given_present).expect("probability in [0, 1]");
            let yes = (0..n).filter(|_| shot.sample(&mut rng)).count();
            yes as f64 / n as f64
        })
        .collect();

    let detected: Vec<bool> = yes_fraction.iter().map(|&f| f > config.threshold).collect();
    let wrong = detected
        .iter()
        .zip(map.values())
        .filter(|(&det, &eta)| det != (eta > 0.0))
        .count();
    let warnings = models
        .iter()
        .enumerate()
        .filter(|(i, m)| {
            map.values()[*i] > 0.0
                && !(m.p_yes_given_absent <= config.threshold && config.threshold < m.p_yes_given_present)
        })
        .map(|(i, _)| (i % map.width, i / map.width))
        .collect();
    Ok(ImageResult {
        width: map.width,
        height: map.height,
        detected,
        yes_fraction,
        pixel_error_rate: wrong as f64 / map.pixels() as f64,
        warnings,
    })
}

/// Binomial(n, p) pmf for `0..=n`, from running log-binomial coefficients.
fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    if p <= 0.0 || p >= 1.0 {
        let mut pmf = vec![0.0; n as usize + 1];
        pmf[if p <= 0.0 { 0 } else { n as usize }] = 1.0;
        return pmf;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut log_choose = 0.0;
    let mut pmf: Vec<f64> = (0..=n)
        .map(|j| {
            if j > 0 {
                log_choose += ((n - j + 1) as f64).ln() - (j as f64).ln();
            }
            (log_choose + j as f64 * lp + (n - j) as f64 * lq).exp()
        })
        .collect();
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|x| *x /= total);
    pmf
}

/// `P(X > k)` for `X ~ Binomial(n, p)`.
pub fn binomial_sf(n: u64, p: f64, k: u64) -> f64 {
    if k >= n {
        return 0.0;
    }
    binomial_pmf(n, p)[k as usize + 1..].iter().sum()
}

/// Smallest yes-fraction threshold `k/n` with `P(Binomial(n, p_absent) > k) <= budget`.
pub fn threshold_for_budget(n: u64, p_absent: f64, budget: f64) -> Result<f64> {
    if !(budget > 0.0 && budget < 1.0) {
        return Err(Error::domain("false_alarm", budget, "budget must lie in (0, 1)"));
    }
    if n == 0 {
        return Err(Error::domain("shots_per_pixel", 0.0, "must be >= 1"));
    }
    let pmf = binomial_pmf(n, p_absent);
    // walk down from the top; tail holds P(X > k)
    let mut tail = 0.0;
    let mut k = n;
    while k > 0 && tail + pmf[k as usize] <= budget {
        tail += pmf[k as usize];
        k -= 1;
    }
    // a threshold of 0 would fail the (0, 1) contract; half a count is equivalent
    Ok(if k == 0 { 0.5 / n as f64 } else { k as f64 / n as f64 })
}

/// Image-wide 1% false-alarm budget split across pixels.
pub fn default_false_alarm(map: &ReflectivityMap) -> f64 {
    0.01 / map.pixels() as f64
}

#[derive(Debug, Clone)]
pub struct ModeComparison {
    pub unentangled: ImageResult,
    pub entangled: ImageResult,
    pub shots_unentangled: u64,
    pub shots_entangled: u64,
    pub threshold_unentangled: f64,
    pub threshold_entangled: f64,
    /// Unentangled minus entangled pixel error rate.
    pub difference: f64,
    /// Binomial standard error of `difference`.
    pub sigma: f64,
}

impl ModeComparison {
    pub fn within_3_sigma(&self) -> bool {
        self.difference.abs() <= 3.0 * self.sigma
    }
}

/// Standard error of the difference of two error rates over `pixels` pixels each.
pub fn difference_sigma(e1: f64, e2: f64, pixels: usize) -> f64 {
    let n = pixels as f64;
    (e1 * (1.0 - e1) / n + e2 * (1.0 - e2) / n).sqrt()
}

/// Unentangled at `shots` per pixel against entangled at `ceil(shots / d)`,
/// both thresholded to the same per-pixel false-alarm budget.
pub fn compare_modes(
    map: &ReflectivityMap,
    b: f64,
    d: usize,
    shots: u64,
    seed: u64,
    false_alarm: f64,
) -> Result<ModeComparison> {
    if shots < d as u64 {
        return Err(Error::domain("shots", shots as f64, "need at least d shots per pixel"));
    }
    let shots_entangled = shots.div_ceil(d as u64);
    let cfg_u = ImagingConfig::matched(Kind::Unentangled, b, d, shots, seed, false_alarm)?;
    let cfg_e = ImagingConfig::matched(Kind::Entangled, b, d, shots_entangled, seed, false_alarm)?;
    let unentangled = scan_image(map, &cfg_u)?;
    let entangled = scan_image(map, &cfg_e)?;
    let (eu, ee) = (unentangled.pixel_error_rate, entangled.pixel_error_rate);
    Ok(ModeComparison {
        shots_unentangled: shots,
        shots_entangled,
        threshold_unentangled: cfg_u.threshold,
        threshold_entangled: cfg_e.threshold,
        difference: eu - ee,
        sigma: difference_sigma(eu, ee, map.pixels()),
        unentangled,
        entangled,
    })
}
