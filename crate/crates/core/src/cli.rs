//! Command-line front end. Every subcommand writes one table, as CSV (with a
//! `# qillum <version>` header line) or as a JSON array with the same field names.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrimination::{
    analytic_q, chernoff_numeric, conditional_probs, helstrom, sweep, SweepRow, SWEEP_HEADER,
};
use crate::error::Error;
use crate::format::sig17;
use crate::hilbert::write_dump;
use crate::imaging::{
    compare_modes, default_false_alarm, scan_image, ImageResult, ImagingConfig, ReflectivityMap,
};
use crate::montecarlo::{campaign, CampaignRow, Strategy, TrialConfig, Truth, CAMPAIGN_HEADER};
use crate::scenarios::{pair, Kind, PsiSpec, ScenarioConfig, ScenarioParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qillum", version, about = "Quantum illumination detection simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Chernoff bound per kind: numeric minimization and closed form.
    Chernoff(ScenarioArgs),
    /// Single-shot minimum error probability.
    Helstrom(ScenarioArgs),
    /// Per-shot yes probabilities with and without the object.
    Probs(ScenarioArgs),
    /// Cartesian grid over eta, b, d and kind.
    Sweep(ScenarioArgs),
    /// Sequential detection campaign.
    Simulate(SimulateArgs),
    /// Pixel-by-pixel scan of a reflectivity map.
    Image(ImageArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Unentangled,
    Entangled,
    Both,
}

impl KindArg {
    fn kinds(self) -> Vec<Kind> {
        match self {
            KindArg::Unentangled => vec![Kind::Unentangled],
            KindArg::Entangled => vec![Kind::Entangled],
            KindArg::Both => Kind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TruthArg {
    Present,
    Absent,
    Both,
}

impl TruthArg {
    fn truths(self) -> Vec<Truth> {
        match self {
            TruthArg::Present => vec![Truth::Present],
            TruthArg::Absent => vec![Truth::Absent],
            TruthArg::Both => vec![Truth::Present, Truth::Absent],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Sprt,
    FirstPhoton,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Sprt => Strategy::Sprt,
            StrategyArg::FirstPhoton => Strategy::FirstPhoton,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// `key = value` scenario file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Reflectivity, comma-separated list.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eta: Vec<f64>,
    /// Thermal photon weight per mode, comma-separated list.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub b: Vec<f64>,
    /// Mode count, comma-separated list.
    #[arg(long, value_delimiter = ',')]
    pub d: Vec<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub prior0: Option<f64>,
    /// `uniform` or `re:im,re:im,...`.
    #[arg(long)]
    pub psi: Option<PsiSpec>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = KindArg::Both)]
    pub kind: KindArg,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write rho0/rho1 matrix dumps for each kind (single grid point only).
    #[arg(long)]
    pub dump_states: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value_t = TruthArg::Both)]
    pub truth: TruthArg,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_shots: u64,
    #[arg(long, default_value_t = 1000)]
    pub replicas: u64,
    #[arg(long, value_enum, default_value_t = StrategyArg::Sprt)]
    pub strategy: StrategyArg,
}

#[derive(Debug, Clone, Args)]
pub struct ImageArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Reflectivity grid: `width height`, then one line per row.
    #[arg(long)]
    pub map: PathBuf,
    /// Shots per pixel (unentangled count under `--compare`).
    #[arg(long)]
    pub shots: u64,
    /// Fixed yes-fraction threshold; overrides `--false-alarm`.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Per-pixel false-alarm budget; defaults to 0.01 / pixel count.
    #[arg(long)]
    pub false_alarm: Option<f64>,
    /// PGM export of the detected map.
    #[arg(long)]
    pub pgm: Option<PathBuf>,
    /// Yes-fraction grid plus `pixel_error_rate=` summary.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Unentangled at `--shots` against entangled at `ceil(shots / d)`.
    #[arg(long)]
    pub compare: bool,
}

/// Failure with the offending key and the process exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub key: String,
    pub message: String,
}

impl CliError {
    pub fn usage(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            key: key.into(),
            message: message.into(),
        }
    }

    /// Parse errors are argument errors; everything else is a domain error.
    fn from_lib(err: Error) -> Self {
        let key = match &err {
            Error::Domain { name, .. } => (*name).to_string(),
            Error::ApproximationDomain { .. } => "b".to_string(),
            Error::SignalLength { .. } | Error::SignalNorm { .. } => "psi".to_string(),
            Error::Capacity { .. } => "d".to_string(),
            Error::Parse { .. } => "config".to_string(),
            Error::DegenerateModel { .. } => "strategy".to_string(),
            _ => "state".to_string(),
        };
        let code = if matches!(err, Error::Parse { .. }) {
            EXIT_USAGE
        } else {
            EXIT_DOMAIN
        };
        CliError {
            code,
            key,
            message: err.to_string(),
        }
    }

    fn keyed(self, key: &str) -> Self {
        CliError {
            key: key.to_string(),
            ..self
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self.message.replace('\n', " ");
        write!(f, "qillum: error: {}: {}", self.key, msg)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::from_lib(e)
    }
}

type CliResult<T> = Result<T, CliError>;

/// A row type with a fixed CSV column order.
pub trait Table: Serialize {
    const HEADER: &'static str;
    fn fields(&self) -> Vec<String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffRow {
    pub eta: f64,
    pub b: f64,
    pub d: usize,
    pub kind: String,
    pub q_numeric: f64,
    pub s_star: f64,
    pub exponent: f64,
    pub q_analytic: f64,
    pub s_star_analytic: f64,
}

impl Table for ChernoffRow {
    const HEADER: &'static str = "eta,b,d,kind,q_numeric,s_star,exponent,q_analytic,s_star_analytic";
    fn fields(&self) -> Vec<String> {
        vec![
            sig17(self.eta),
            sig17(self.b),
            self.d.to_string(),
            self.kind.clone(),
            sig17(self.q_numeric),
            sig17(self.s_star),
            sig17(self.exponent),
            sig17(self.q_analytic),
            sig17(self.s_star_analytic),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelstromRow {
    pub eta: f64,
    pub b: f64,
    pub d: usize,
    pub kind: String,
    pub prior0: f64,
    pub p_error: f64,
}

impl Table for HelstromRow {
    const HEADER: &'static str = "eta,b,d,kind,prior0,p_error";
    fn fields(&self) -> Vec<String> {
        vec![
            sig17(self.eta),
            sig17(self.b),
            self.d.to_string(),
            self.kind.clone(),
            sig17(self.prior0),
            sig17(self.p_error),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbsRow {
    pub eta: f64,
    pub b: f64,
    pub d: usize,
    pub kind: String,
    pub p_yes_absent: f64,
    pub p_yes_present: f64,
}

impl Table for ProbsRow {
    const HEADER: &'static str = "eta,b,d,kind,p_yes_absent,p_yes_present";
    fn fields(&self) -> Vec<String> {
        vec![
            sig17(self.eta),
            sig17(self.b),
            self.d.to_string(),
            self.kind.clone(),
            sig17(self.p_yes_absent),
            sig17(self.p_yes_present),
        ]
    }
}

impl Table for SweepRow {
    const HEADER: &'static str = SWEEP_HEADER;
    fn fields(&self) -> Vec<String> {
        vec![
            sig17(self.eta),
            sig17(self.b),
            self.d.to_string(),
            self.kind.clone(),
            self.regime.clone(),
            sig17(self.q_numeric),
            sig17(self.s_star),
            sig17(self.q_analytic),
            sig17(self.q_regime_approx),
            sig17(self.helstrom_error),
            self.trials_eps01.map(|n| n.to_string()).unwrap_or_default(),
        ]
    }
}

impl Table for CampaignRow {
    const HEADER: &'static str = CAMPAIGN_HEADER;
    fn fields(&self) -> Vec<String> {
        vec![
            self.kind.clone(),
            self.truth.clone(),
            sig17(self.eta),
            sig17(self.b),
            self.d.to_string(),
            sig17(self.alpha),
            sig17(self.beta),
            self.replicas.to_string(),
            sig17(self.mean_shots),
            sig17(self.ci95),
            sig17(self.error_rate),
            self.seed.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRow {
    pub kind: String,
    pub width: usize,
    pub height: usize,
    pub b: f64,
    pub d: usize,
    pub shots: u64,
    pub threshold: f64,
    pub pixel_error_rate: f64,
    pub errors: usize,
    pub warnings: usize,
    pub seed: u64,
}

impl Table for ImageRow {
    const HEADER: &'static str =
        "kind,width,height,b,d,shots,threshold,pixel_error_rate,errors,warnings,seed";
    fn fields(&self) -> Vec<String> {
        vec![
            self.kind.clone(),
            self.width.to_string(),
            self.height.to_string(),
            sig17(self.b),
            self.d.to_string(),
            self.shots.to_string(),
            sig17(self.threshold),
            sig17(self.pixel_error_rate),
            self.errors.to_string(),
            self.warnings.to_string(),
            self.seed.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub width: usize,
    pub height: usize,
    pub b: f64,
    pub d: usize,
    pub seed: u64,
    pub shots_unentangled: u64,
    pub shots_entangled: u64,
    pub threshold_unentangled: f64,
    pub threshold_entangled: f64,
    pub error_unentangled: f64,
    pub error_entangled: f64,
    pub difference: f64,
    pub sigma: f64,
}

impl Table for CompareRow {
    const HEADER: &'static str = "width,height,b,d,seed,shots_unentangled,shots_entangled,\
threshold_unentangled,threshold_entangled,error_unentangled,error_entangled,difference,sigma";
    fn fields(&self) -> Vec<String> {
        vec![
            self.width.to_string(),
            self.height.to_string(),
            sig17(self.b),
            self.d.to_string(),
            self.seed.to_string(),
            self.shots_unentangled.to_string(),
            self.shots_entangled.to_string(),
            sig17(self.threshold_unentangled),
            sig17(self.threshold_entangled),
            sig17(self.error_unentangled),
            sig17(self.error_entangled),
            sig17(self.difference),
            sig17(self.sigma),
        ]
    }
}

pub fn render_csv<T: Table>(rows: &[T]) -> String {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>, rec: Vec<String>| {
        w.write_record(&rec).expect("in-memory csv write");
    };
    write(&mut wtr, T::HEADER.split(',').map(String::from).collect());
    for row in rows {
        write(&mut wtr, row.fields());
    }
    let body = String::from_utf8(wtr.into_inner().expect("in-memory csv flush"))
        .expect("csv fields are utf-8");
    format!("# qillum {VERSION}\n{body}")
}

/// Non-finite floats serialize as `null`.
pub fn render_json<T: Table>(rows: &[T]) -> String {
    let mut out = serde_json::to_string_pretty(rows).expect("rows serialize");
    out.push('\n');
    out
}

fn render<T: Table>(rows: &[T], format: Format) -> String {
    match format {
        Format::Csv => render_csv(rows),
        Format::Json => render_json(rows),
    }
}

fn write_file(path: &Path, text: &str, key: &str) -> CliResult<()> {
    fs::write(path, text)
        .map_err(|e| CliError::usage(key, format!("cannot write {}: {e}", path.display())))
}

fn emit<T: Table>(rows: &[T], args: &ScenarioArgs) -> CliResult<()> {
    let text = render(rows, args.format);
    match &args.output {
        Some(path) => write_file(path, &text, "output"),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::usage("output", format!("cannot write stdout: {e}"))),
    }
}

/// Scenario values after merging flags over the config file over defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub etas: Vec<f64>,
    pub bs: Vec<f64>,
    pub ds: Vec<usize>,
    pub prior0: f64,
    pub psi: PsiSpec,
    pub seed: Option<u64>,
    pub kinds: Vec<Kind>,
}

impl Scenario {
    pub fn resolve(args: &ScenarioArgs) -> CliResult<Self> {
        let cfg = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::usage("config", format!("cannot read {}: {e}", path.display()))
                })?;
                ScenarioConfig::parse(&text)?
            }
            None => ScenarioConfig::default(),
        };
        fn pick<T: Clone>(flag: &[T], file: Option<Vec<T>>, key: &str) -> CliResult<Vec<T>> {
            if !flag.is_empty() {
                Ok(flag.to_vec())
            } else {
                file.filter(|v| !v.is_empty())
                    .ok_or_else(|| CliError::usage(key, "missing value (flag or config key)"))
            }
        }
        Ok(Scenario {
            etas: pick(&args.eta, cfg.eta, "eta")?,
            bs: pick(&args.b, cfg.b, "b")?,
            ds: pick(&args.d, cfg.d, "d")?,
            prior0: args.prior0.or(cfg.prior0).unwrap_or(0.5),
            psi: args.psi.clone().or(cfg.psi).unwrap_or(PsiSpec::Uniform),
            seed: args.seed.or(cfg.seed),
            kinds: args.kind.kinds(),
        })
    }

    /// `(eta, b, d)` grid points in eta-major order.
    pub fn points(&self) -> CliResult<Vec<ScenarioParams>> {
        let mut out = Vec::new();
        for &eta in &self.etas {
            for &b in &self.bs {
                for &d in &self.ds {
                    out.push(ScenarioParams::with_prior(eta, b, d, self.prior0)?);
                }
            }
        }
        Ok(out)
    }

    /// Points crossed with kinds, kind varying fastest.
    fn cells(&self) -> CliResult<Vec<(ScenarioParams, Kind)>> {
        Ok(self
            .points()?
            .into_iter()
            .flat_map(|p| self.kinds.iter().map(move |&k| (p, k)))
            .collect())
    }

    fn require_seed(&self) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::usage("seed", "randomized commands need an explicit --seed"))
    }

    fn single(&self, key: &str) -> CliResult<(f64, usize)> {
        match (&self.bs[..], &self.ds[..]) {
            ([b], [d]) => Ok((*b, *d)),
            _ => Err(CliError::usage(key, "needs a single b and d value")),
        }
    }
}

/// `<output>.<kind>.rho0.txt`, or `states.<kind>.rho0.txt` without `--output`.
pub fn dump_path(output: Option<&Path>, kind: Kind, which: &str) -> PathBuf {
    let stem = match output {
        Some(p) => p.as_os_str().to_os_string(),
        None => "states".into(),
    };
    let mut name = stem;
    name.push(format!(".{kind}.{which}.txt"));
    PathBuf::from(name)
}

fn dump_states(args: &ScenarioArgs, scenario: &Scenario) -> CliResult<()> {
    let points = scenario.points()?;
    let [params] = points[..] else {
        return Err(CliError::usage("dump-states", "needs a single (eta, b, d) point"));
    };
    for &kind in &scenario.kinds {
        let signal = scenario.psi.resolve(params.d)?;
        let states = pair(&params, kind, &signal)?;
        for (which, rho) in [("rho0", &states.rho0), ("rho1", &states.rho1)] {
            let path = dump_path(args.output.as_deref(), kind, which);
            write_file(&path, &write_dump(rho.op()), "dump-states")?;
        }
    }
    Ok(())
}

fn par_cells<T, F>(cells: &[(ScenarioParams, Kind)], f: F) -> CliResult<Vec<T>>
where
    T: Send,
    F: Fn(&ScenarioParams, Kind) -> crate::error::Result<T> + Sync,
{
    cells
        .par_iter()
        .map(|(p, k)| f(p, *k))
        .collect::<crate::error::Result<Vec<T>>>()
        .map_err(CliError::from)
}

fn run_chernoff(args: &ScenarioArgs) -> CliResult<()> {
    let scenario = Scenario::resolve(args)?;
    let rows = par_cells(&scenario.cells()?, |p, kind| {
        let states = pair(p, kind, &scenario.psi.resolve(p.d)?)?;
        let numeric = chernoff_numeric(&states)?;
        let analytic = analytic_q(p.eta, p.b, p.d, kind)?;
        Ok(ChernoffRow {
            eta: p.eta,
            b: p.b,
            d: p.d,
            kind: kind.to_string(),
            q_numeric: numeric.q,
            s_star: numeric.s_star,
            exponent: numeric.exponent,
            q_analytic: analytic.q,
            s_star_analytic: analytic.s_star,
        })
    })?;
    finish(args, &scenario, &rows)
}

fn run_helstrom(args: &ScenarioArgs) -> CliResult<()> {
    let scenario = Scenario::resolve(args)?;
    let rows = par_cells(&scenario.cells()?, |p, kind| {
        let states = pair(p, kind, &scenario.psi.resolve(p.d)?)?;
        let result = helstrom(&states, p.prior0, p.prior1())?;
        Ok(HelstromRow {
            eta: p.eta,
            b: p.b,
            d: p.d,
            kind: kind.to_string(),
            prior0: p.prior0,
            p_error: result.p_error,
        })
    })?;
    finish(args, &scenario, &rows)
}

fn run_probs(args: &ScenarioArgs) -> CliResult<()> {
    let scenario = Scenario::resolve(args)?;
    let rows = par_cells(&scenario.cells()?, |p, kind| {
        let model = conditional_probs(p, kind)?;
        Ok(ProbsRow {
            eta: p.eta,
            b: p.b,
            d: p.d,
            kind: kind.to_string(),
            p_yes_absent: model.p_yes_given_absent,
            p_yes_present: model.p_yes_given_present,
        })
    })?;
    finish(args, &scenario, &rows)
}

fn run_sweep(args: &ScenarioArgs) -> CliResult<()> {
    let s = Scenario::resolve(args)?;
    let rows = sweep(&s.etas, &s.bs, &s.ds, &s.kinds, s.prior0, &s.psi)?;
    finish(args, &s, &rows)
}

fn finish<T: Table>(args: &ScenarioArgs, scenario: &Scenario, rows: &[T]) -> CliResult<()> {
    if args.dump_states {
        dump_states(args, scenario)?;
    }
    emit(rows, args)
}

/// Campaign rows for every grid cell, kind and truth, in that nesting order.
pub fn simulate_rows(args: &SimulateArgs) -> CliResult<Vec<CampaignRow>> {
    let scenario = Scenario::resolve(&args.scenario)?;
    let seed = scenario.require_seed()?;
    let config = TrialConfig::new(seed, args.alpha, args.beta, args.max_shots, args.replicas)?
        .with_strategy(args.strategy.into());
    let mut rows = Vec::new();
    for (p, kind) in scenario.cells()? {
        let model = conditional_probs(&p, kind)?;
        for truth in args.truth.truths() {
            let summary = campaign(&model, truth, &config)?;
            if let Some(diag) = &summary.diagnostic {
                eprintln!("qillum: warning: {kind} {truth}: {diag}");
            }
            rows.push(CampaignRow {
                kind: kind.to_string(),
                truth: truth.to_string(),
                eta: p.eta,
                b: p.b,
                d: p.d,
                alpha: config.alpha,
                beta: config.beta,
                replicas: summary.replicas,
                mean_shots: summary.mean_shots,
                ci95: summary.ci95_halfwidth,
                error_rate: summary.error_rate,
                seed,
            });
        }
    }
    Ok(rows)
}

fn run_simulate(args: &SimulateArgs) -> CliResult<()> {
    let rows = simulate_rows(args)?;
    let scenario = Scenario::resolve(&args.scenario)?;
    finish(&args.scenario, &scenario, &rows)
}

/// `out.pgm` becomes `out.entangled.pgm` when several images share one path.
fn kinded_path(path: &Path, kind: Kind, several: bool) -> PathBuf {
    if !several {
        return path.to_path_buf();
    }
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{kind}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{kind}"),
    };
    path.with_file_name(name)
}

fn write_image_files(args: &ImageArgs, kind: Kind, image: &ImageResult, several: bool) -> CliResult<()> {
    if let Some(path) = &args.pgm {
        write_file(&kinded_path(path, kind, several), &image.to_pgm(), "pgm")?;
    }
    if let Some(path) = &args.grid {
        write_file(&kinded_path(path, kind, several), &image.to_text(), "grid")?;
    }
    if !image.warnings.is_empty() {
        eprintln!(
            "qillum: warning: {kind}: {} reflecting pixels cannot be separated at this threshold",
            image.warnings.len()
        );
    }
    Ok(())
}

fn load_map(path: &Path) -> CliResult<ReflectivityMap> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage("map", format!("cannot read {}: {e}", path.display())))?;
    ReflectivityMap::parse(&text).map_err(|e| CliError::from(e).keyed("map"))
}

fn run_image(args: &ImageArgs) -> CliResult<()> {
    let scenario = Scenario::resolve_without_eta(&args.scenario)?;
    let seed = scenario.require_seed()?;
    let (b, d) = scenario.single("b")?;
    let map = load_map(&args.map)?;
    let false_alarm = args.false_alarm.unwrap_or_else(|| default_false_alarm(&map));
    if args.compare {
        if args.threshold.is_some() {
            return Err(CliError::usage("threshold", "--compare sets thresholds from --false-alarm"));
        }
        let cmp = compare_modes(&map, b, d, args.shots, seed, false_alarm)?;
        write_image_files(args, Kind::Unentangled, &cmp.unentangled, true)?;
        write_image_files(args, Kind::Entangled, &cmp.entangled, true)?;
        let row = CompareRow {
            width: map.width(),
            height: map.height(),
            b,
            d,
            seed,
            shots_unentangled: cmp.shots_unentangled,
            shots_entangled: cmp.shots_entangled,
            threshold_unentangled: cmp.threshold_unentangled,
            threshold_entangled: cmp.threshold_entangled,
            error_unentangled: cmp.unentangled.pixel_error_rate,
            error_entangled: cmp.entangled.pixel_error_rate,
            difference: cmp.difference,
            sigma: cmp.sigma,
        };
        return emit(&[row], &args.scenario);
    }
    let several = scenario.kinds.len() > 1;
    let mut rows = Vec::new();
    for &kind in &scenario.kinds {
        let config = match args.threshold {
            Some(threshold) => ImagingConfig {
                shots_per_pixel: args.shots,
                kind,
                b,
                d,
                threshold,
                seed,
            },
            None => ImagingConfig::matched(kind, b, d, args.shots, seed, false_alarm)?,
        };
        let image = scan_image(&map, &config)?;
        write_image_files(args, kind, &image, several)?;
        rows.push(ImageRow {
            kind: kind.to_string(),
            width: map.width(),
            height: map.height(),
            b,
            d,
            shots: args.shots,
            threshold: config.threshold,
            pixel_error_rate: image.pixel_error_rate,
            errors: image.errors(&map),
            warnings: image.warnings.len(),
            seed,
        });
    }
    emit(&rows, &args.scenario)
}

impl Scenario {
    /// Imaging takes reflectivity from the map, so `eta` is not required.
    fn resolve_without_eta(args: &ScenarioArgs) -> CliResult<Self> {
        if !args.eta.is_empty() {
            return Err(CliError::usage("eta", "image reads reflectivity from --map"));
        }
        let mut patched = args.clone();
        patched.eta = vec![0.0];
        Scenario::resolve(&patched)
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Chernoff(a) => run_chernoff(a),
        Command::Helstrom(a) => run_helstrom(a),
        Command::Probs(a) => run_probs(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Image(a) => run_image(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Diagnostics go to stderr as a single line.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("qillum: {}", line.trim_start_matches("error: ").trim());
            return EXIT_USAGE;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("qillum").chain(args.iter().copied())).unwrap()
    }

    fn scenario_args(cli: &Cli) -> &ScenarioArgs {
        match &cli.command {
            Command::Chernoff(a) | Command::Helstrom(a) | Command::Probs(a) | Command::Sweep(a) => a,
            Command::Simulate(a) => &a.scenario,
            Command::Image(a) => &a.scenario,
        }
    }

    #[test]
    fn comma_lists_and_defaults() {
        let cli = parse(&["sweep", "--eta", "0.01,0.02", "--b", "0.1", "--d", "1,2,4"]);
        let s = Scenario::resolve(scenario_args(&cli)).unwrap();
        assert_eq!(s.etas, vec![0.01, 0.02]);
        assert_eq!(s.ds, vec![1, 2, 4]);
        assert_eq!(s.prior0, 0.5);
        assert_eq!(s.psi, PsiSpec::Uniform);
        assert_eq!(s.kinds, Kind::ALL.to_vec());
        assert_eq!(s.points().unwrap().len(), 6);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = std::env::temp_dir().join(format!("qillum-cli-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("s.cfg");
        fs::write(&path, "eta = 0.05\nb = 0.02\nd = 3\nprior0 = 0.7\nseed = 9\n").unwrap();
        let cli = parse(&["probs", "--config", path.to_str().unwrap(), "--b", "0.001"]);
        let s = Scenario::resolve(scenario_args(&cli)).unwrap();
        assert_eq!((s.etas[0], s.bs[0], s.ds[0]), (0.05, 0.001, 3));
        assert_eq!((s.prior0, s.seed), (0.7, Some(9)));
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn missing_key_is_usage_error() {
        let cli = parse(&["chernoff", "--eta", "0.1", "--d", "2"]);
        let err = Scenario::resolve(scenario_args(&cli)).unwrap_err();
        assert_eq!((err.code, err.key.as_str()), (EXIT_USAGE, "b"));
    }

    #[test]
    fn domain_violation_maps_to_exit_3() {
        let cli = parse(&["chernoff", "--eta", "0.1", "--b", "0.2", "--d", "4", "--kind", "entangled"]);
        let err = run(&cli).unwrap_err();
        assert_eq!(err.code, EXIT_DOMAIN);
        assert_eq!(err.key, "b");
        assert!(!err.to_string().contains('\n'));
    }

    #[test]
    fn simulate_requires_seed() {
        let cli = parse(&["simulate", "--eta", "0.1", "--b", "0.01", "--d", "1"]);
        let Command::Simulate(a) = &cli.command else { unreachable!() };
        let err = simulate_rows(a).unwrap_err();
        assert_eq!((err.code, err.key.as_str()), (EXIT_USAGE, "seed"));
    }

    #[test]
    fn csv_has_version_header_and_blank_for_missing_trials() {
        let row = SweepRow {
            eta: 0.0,
            b: 0.01,
            d: 2,
            kind: "entangled".into(),
            regime: "bad".into(),
            q_numeric: 1.0,
            s_star: 0.5,
            q_analytic: 1.0,
            q_regime_approx: 1.0,
            helstrom_error: 0.5,
            trials_eps01: None,
        };
        let text = render_csv(&[row]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), format!("# qillum {VERSION}"));
        assert_eq!(lines.next().unwrap(), SWEEP_HEADER);
        assert!(lines.next().unwrap().ends_with(','));
    }

    #[test]
    fn dump_and_image_paths() {
        assert_eq!(dump_path(None, Kind::Entangled, "rho0"), PathBuf::from("states.entangled.rho0.txt"));
        assert_eq!(
            dump_path(Some(Path::new("out/run.csv")), Kind::Unentangled, "rho1"),
            PathBuf::from("out/run.csv.unentangled.rho1.txt")
        );
        assert_eq!(kinded_path(Path::new("a/img.pgm"), Kind::Entangled, true), PathBuf::from("a/img.entangled.pgm"));
        assert_eq!(kinded_path(Path::new("img.pgm"), Kind::Entangled, false), PathBuf::from("img.pgm"));
    }
}
