//! Repeated-shot detection as Bernoulli draws from the per-shot outcome models.
//!
//! Every replica draws from its own ChaCha8 stream `(seed, replica)`, so a
//! campaign gives bit-identical results however the replicas are scheduled.

use std::fmt;
use std::str::FromStr;

use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrimination::TrialOutcomeModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Truth {
    Present,
    Absent,
}

impl Truth {
    pub fn as_str(self) -> &'static str {
        match self {
            Truth::Present => "present",
            Truth::Absent => "absent",
        }
    }
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Truth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "present" => Ok(Truth::Present),
            "absent" => Ok(Truth::Absent),
            other => Err(format!("unknown truth `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Present,
    Absent,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Wald sequential probability ratio test.
    Sprt,
    /// Stop at the first "yes"; call Present if it came before the horizon.
    FirstPhoton,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sprt" => Ok(Strategy::Sprt),
            "first-photon" => Ok(Strategy::FirstPhoton),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub seed: u64,
    /// Target false-alarm probability.
    pub alpha: f64,
    /// Target miss probability.
    pub beta: f64,
    pub max_shots: u64,
    pub replicas: u64,
    pub strategy: Strategy,
}

impl TrialConfig {
    pub fn new(seed: u64, alpha: f64, beta: f64, max_shots: u64, replicas: u64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v < 0.5) {
                return Err(Error::domain(name, v, "error target must lie in (0, 1/2)"));
            }
        }
        if max_shots == 0 {
            return Err(Error::domain("max_shots", 0.0, "must be >= 1"));
        }
        if replicas == 0 {
            return Err(Error::domain("replicas", 0.0, "must be >= 1"));
        }
        Ok(TrialConfig {
            seed,
            alpha,
            beta,
            max_shots,
            replicas,
            strategy: Strategy::Sprt,
        })
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialResult {
    pub decision: Decision,
    pub shots_used: u64,
    pub yes_count: u64,
}

impl TrialResult {
    pub fn is_error(&self, truth: Truth) -> bool {
        matches!(
            (self.decision, truth),
            (Decision::Present, Truth::Absent) | (Decision::Absent, Truth::Present)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSummary {
    pub mean_shots: f64,
    pub ci95_halfwidth: f64,
    /// Wrong decisions among decided replicas; NaN if none decided.
    pub error_rate: f64,
    pub replicas: u64,
    pub undecided: u64,
    pub diagnostic: Option<String>,
}

/// Independent stream `replica` under `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

fn shot_distribution(model: &TrialOutcomeModel, truth: Truth) -> Bernoulli {
    Bernoulli::new(model.p_yes(truth == Truth::Present)).expect("model probabilities lie in [0, 1]")
}

fn check_sprt_model(model: &TrialOutcomeModel) -> Result<()> {
    let p0 = model.p_yes_given_absent;
    if p0 <= 0.0 || p0 >= 1.0 {
        Err(Error::DegenerateModel { p_absent: p0 })
    } else {
        Ok(())
    }
}

/// Log-likelihood-ratio increments `(yes, no)` of "present" over "absent".
fn llr_steps(model: &TrialOutcomeModel) -> (f64, f64) {
    let p0 = model.p_yes_given_absent;
    let p1 = model.p_yes_given_present;
    ((p1 / p0).ln(), ((1.0 - p1) / (1.0 - p0)).ln())
}

fn sprt_with_rng(
    model: &TrialOutcomeModel,
    truth: Truth,
    config: &TrialConfig,
    rng: &mut ChaCha8Rng,
) -> TrialResult {
    let upper = ((1.0 - config.beta) / config.alpha).ln();
    let lower = (config.beta / (1.0 - config.alpha)).ln();
    let (step_yes, step_no) = llr_steps(model);
    let dist = shot_distribution(model, truth);
    let mut llr = 0.0;
    let mut yes_count = 0;
    for shot in 1..=config.max_shots {
        if dist.sample(rng) {
            yes_count += 1;
            llr += step_yes;
        } else {
            llr += step_no;
        }
        let decision = if llr >= upper {
            Decision::Present
        } else if llr <= lower {
            Decision::Absent
        } else {
            continue;
        };
        return TrialResult {
            decision,
            shots_used: shot,
            yes_count,
        };
    }
    TrialResult {
        decision: Decision::Undecided,
        shots_used: config.max_shots,
        yes_count,
    }
}

/// Runs replica 0 of `config`.
pub fn run_sprt(model: &TrialOutcomeModel, truth: Truth, config: &TrialConfig) -> Result<TrialResult> {
    run_sprt_replica(model, truth, config, 0)
}

pub fn run_sprt_replica(
    model: &TrialOutcomeModel,
    truth: Truth,
    config: &TrialConfig,
    replica: u64,
) -> Result<TrialResult> {
    check_sprt_model(model)?;
    let mut rng = replica_rng(config.seed, replica);
    Ok(sprt_with_rng(model, truth, config, &mut rng))
}

/// `ceil(sqrt(1 / (p1 p0)))`, capped at `max_shots`; the geometric midpoint of
/// the expected signal and noise arrival times.
pub fn first_photon_horizon(model: &TrialOutcomeModel, max_shots: u64) -> u64 {
    let h = (1.0 / (model.p_yes_given_present * model.p_yes_given_absent))
        .sqrt()
        .ceil();
    if h.is_finite() && h < max_shots as f64 {
        (h as u64).max(1)
    } else {
        max_shots
    }
}

fn first_photon_with_rng(
    model: &TrialOutcomeModel,
    truth: Truth,
    config: &TrialConfig,
    rng: &mut ChaCha8Rng,
) -> TrialResult {
    let horizon = first_photon_horizon(model, config.max_shots);
    let dist = shot_distribution(model, truth);
    for shot in 1..=config.max_shots {
        if dist.sample(rng) {
            let decision = if shot <= horizon {
                Decision::Present
            } else {
                Decision::Absent
            };
            return TrialResult {
                decision,
                shots_used: shot,
                yes_count: 1,
            };
        }
    }
    TrialResult {
        decision: Decision::Absent,
        shots_used: config.max_shots,
        yes_count: 0,
    }
}

pub fn run_first_photon(model: &TrialOutcomeModel, truth: Truth, config: &TrialConfig) -> TrialResult {
    run_first_photon_replica(model, truth, config, 0)
}

pub fn run_first_photon_replica(
    model: &TrialOutcomeModel,
    truth: Truth,
    config: &TrialConfig,
    replica: u64,
) -> TrialResult {
    let mut rng = replica_rng(config.seed, replica);
    first_photon_with_rng(model, truth, config, &mut rng)
}

/// All replica outcomes in replica order.
pub fn campaign_results(
    model: &TrialOutcomeModel,
    truth: Truth,
    config: &TrialConfig,
) -> Result<Vec<TrialResult>> {
    if config.strategy == Strategy::Sprt {
        check_sprt_model(model)?;
    }
    Ok((0..config.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(config.seed, r);
            match config.strategy {
                Strategy::Sprt => sprt_with_rng(model, truth, config, &mut rng),
                Strategy::FirstPhoton => first_photon_with_rng(model, truth, config, &mut rng),
            }
        })
        .collect())
}

pub const MIN_CAMPAIGN_REPLICAS: u64 = 30;

pub fn summarize(results: &[TrialResult], truth: Truth) -> CampaignSummary {
    let n = results.len() as f64;
    let mean = results.iter().map(|r| r.shots_used as f64).sum::<f64>() / n;
    let var = results
        .iter()
        .map(|r| (r.shots_used as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    let decided = results
        .iter()
        .filter(|r| r.decision != Decision::Undecided)
        .count() as u64;
    let wrong = results.iter().filter(|r| r.is_error(truth)).count() as f64;
    let undecided = results.len() as u64 - decided;
    let (error_rate, diagnostic) = if decided == 0 {
        (f64::NAN, Some("all replicas undecided at max_shots".to_string()))
    } else {
        (wrong / decided as f64, None)
    };
    CampaignSummary {
        mean_shots: mean,
        ci95_halfwidth: 1.96 * (var / n).sqrt(),
        error_rate,
        replicas: results.len() as u64,
        undecided,
        diagnostic,
    }
}

pub fn campaign(model: &TrialOutcomeModel, truth: Truth, config: &TrialConfig) -> Result<CampaignSummary> {
    if config.replicas < MIN_CAMPAIGN_REPLICAS {
        return Err(Error::domain(
            "replicas",
            config.replicas as f64,
            "campaign needs >= 30 replicas for a normal-approximation CI",
        ));
    }
    let results = campaign_results(model, truth, config)?;
    Ok(summarize(&results, truth))
}

/// One row of the campaign table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub kind: String,
    pub truth: String,
    pub eta: f64,
    pub b: f64,
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub replicas: u64,
    pub mean_shots: f64,
    pub ci95: f64,
    pub error_rate: f64,
    pub seed: u64,
}

pub const CAMPAIGN_HEADER: &str =
    "kind,truth,eta,b,d,alpha,beta,replicas,mean_shots,ci95,error_rate,seed";
