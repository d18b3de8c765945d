//! Command-line front end. Every command reads its inputs from a [`RunConfig`],
//! writes JSON reports and CSV plot data into the output directory and
//! returns the paths it wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dist::{
    empirical_ccdf, fit_powerlaw_tail, fit_truncated_lognormal, lognormal_tail_prob, EmpiricalCcdf, LogNormalFit,
    PowerLawTailFit,
};
use crate::error::{Error, Result};
use crate::forecast::{
    backtest_max_fame, backtest_ratio_model, become_famous_prob, default_ratio_anchor, extrapolate_n_periods,
    fit_forward_fame, fit_ratio_model, joint_max_fame_lognormal_mc, train_max_fame_models, Extrapolation,
    FamousEstimate, ForwardFameModel, ForwardFameParams, MaxFameBacktestOptions, McEstimate, RatioKind, RatioModel,
    RatioParams, UntrainableEntity,
};
use crate::hmm::{
    label_states, simulate_with, stationary_peak_prob, train_hmm, GenerationRecord, HmmModel,
    PeakExit, SimulationOptions, TrainOptions,
};
use crate::io::{read_group_json, read_series_csv, save_series_csv, write_json, SeriesMap};
use crate::pulse::{detect_and_fit, detect_pulses, PulseDetectionParams};
use crate::report::{
    aligned_table, format_prob, forward_fame_table, max_fame_table, powerlaw_fitted, ratio_backtest_table,
    write_ccdf_csv, write_loglog_csv, write_pulse_csv, ExtentRecord, PulseRecord,
};
use crate::series::{
    average_frequency, fame_equivalence, fame_from_mean, group_fame_series, peak_fame, window_means, DateRange,
    FrequencySeries, GroupDefinition, GroupFameKind, DEFAULT_PEAK_WINDOW,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "NEWSFAME_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "newsfame-out";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XMinConfig {
    pub powerlaw: f64,
    pub forward: f64,
    pub ratio: f64,
}

impl Default for XMinConfig {
    fn default() -> Self {
        XMinConfig {
            powerlaw: 1.0,
            forward: 1.0,
            ratio: 1.0,
        }
    }
}

/// Everything a command needs besides its own arguments. Loaded from a JSON
/// file, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub series: Option<PathBuf>,
    pub group: Option<PathBuf>,
    pub pulse: PulseDetectionParams,
    pub w_m: usize,
    pub w_f: usize,
    pub horizon_days: usize,
    pub x_min: XMinConfig,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            series: None,
            group: None,
            pulse: PulseDetectionParams::default(),
            w_m: 1,
            w_f: DEFAULT_PEAK_WINDOW,
            horizon_days: 365,
            x_min: XMinConfig::default(),
            seed: 0,
            out_dir: None,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            row: e.line(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("series", &self.series), ("group", &self.group)] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::invalid(format!("{name} file {} does not exist", p.display())));
                }
            }
        }
        self.pulse.validate()?;
        if self.w_m == 0 || self.w_f == 0 {
            return Err(Error::invalid("fame windows w_m and w_f must be at least one day"));
        }
        if self.horizon_days == 0 {
            return Err(Error::invalid("horizon_days must be at least one day"));
        }
        for (name, x) in [
            ("x_min.powerlaw", self.x_min.powerlaw),
            ("x_min.forward", self.x_min.forward),
            ("x_min.ratio", self.x_min.ratio),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {x}")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be at least 1"));
        }
        Ok(())
    }

    fn series_map(&self) -> Result<SeriesMap> {
        let path = self.series.as_ref().ok_or_else(|| Error::invalid("a series CSV is required (--series)"))?;
        read_series_csv(path)
    }

    fn group_def(&self) -> Result<GroupDefinition> {
        let path = self.group.as_ref().ok_or_else(|| Error::invalid("a group JSON is required (--group)"))?;
        read_group_json(path)
    }

    pub fn output_dir(&self) -> &Path {
        self.out_dir.as_deref().unwrap_or(Path::new(DEFAULT_OUT_DIR))
    }

    fn out(&self, name: &str) -> PathBuf {
        self.output_dir().join(name)
    }
}

#[derive(Debug, Parser)]
#[command(name = "newsfame", version, about = "Fame time series, news pulses, news HMMs and fame forecasts")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Series CSV with columns entity_id,date,frequency.
    #[arg(long, global = true)]
    pub series: Option<PathBuf>,
    /// Group JSON: {"name": ..., "members": [...]}.
    #[arg(long, global = true)]
    pub group: Option<PathBuf>,
    /// Output directory [default: $NEWSFAME_OUT_DIR, then ./newsfame-out].
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-entity work.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Pulse detection: peaks exceed this many standard deviations [default: 5].
    #[arg(long, global = true)]
    pub k_sigma: Option<f64>,
    /// Pulse detection: peaks this close are merged [default: 20].
    #[arg(long, global = true)]
    pub group_distance: Option<usize>,
    /// Pulse detection: moving-average length bounding a pulse [default: 10].
    #[arg(long, global = true)]
    pub ma_length: Option<usize>,
    /// Historical fame window in days [default: 1].
    #[arg(long, global = true)]
    pub w_m: Option<usize>,
    /// Future or peak fame window in days [default: 5].
    #[arg(long, global = true)]
    pub w_f: Option<usize>,
    /// Forecast horizon in days [default: 365].
    #[arg(long, global = true)]
    pub horizon_days: Option<usize>,
    /// Tail start of power-law fits in fit-dist [default: 1].
    #[arg(long, global = true)]
    pub x_min_powerlaw: Option<f64>,
    /// Tail start of the forward-fame model [default: 1].
    #[arg(long, global = true)]
    pub x_min_forward: Option<f64>,
    /// Tail start of the ratio models [default: 1].
    #[arg(long, global = true)]
    pub x_min_ratio: Option<f64>,
}

impl GlobalArgs {
    /// Flags, then the config file, then the environment, then defaults.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($flag:expr, $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        if self.series.is_some() {
            cfg.series = self.series.clone();
        }
        if self.group.is_some() {
            cfg.group = self.group.clone();
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        set!(self.seed, cfg.seed);
        set!(self.k_sigma, cfg.pulse.k_sigma);
        set!(self.group_distance, cfg.pulse.group_distance);
        set!(self.ma_length, cfg.pulse.ma_length);
        set!(self.w_m, cfg.w_m);
        set!(self.w_f, cfg.w_f);
        set!(self.horizon_days, cfg.horizon_days);
        set!(self.x_min_powerlaw, cfg.x_min.powerlaw);
        set!(self.x_min_forward, cfg.x_min.forward);
        set!(self.x_min_ratio, cfg.x_min.ratio);
        if self.out_dir.is_some() {
            cfg.out_dir = self.out_dir.clone();
        }
        if cfg.out_dir.is_none() {
            cfg.out_dir = Some(
                std::env::var_os(OUT_DIR_ENV)
                    .filter(|d| !d.is_empty())
                    .map_or_else(|| PathBuf::from(DEFAULT_OUT_DIR), PathBuf::from),
            );
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Validate a series CSV and write it back in canonical form with a summary.
    Ingest,
    /// Average fame, its log and peak fame per entity.
    Fame(FameArgs),
    /// Fame-equivalence curve of a group.
    Equivalence(EquivalenceArgs),
    /// Fit a log-normal, truncated log-normal or power-law tail.
    FitDist(FitDistArgs),
    /// Detect news pulses.
    DetectPulses(EntityArgs),
    /// Detect news pulses and fit the pulse shape to each.
    FitPulse(EntityArgs),
    /// Train the two-state news HMM.
    TrainHmm(TrainHmmArgs),
    /// Generate series from a news HMM.
    Simulate(SimulateArgs),
    /// Probability that each group member holds the group's maximum fame.
    ForecastMax(ForecastMaxArgs),
    /// Chance that an entity of a given fame becomes famous next period.
    ForecastForward(ForecastForwardArgs),
    /// Power-law model of fame-change ratios.
    ForecastRatio(ForecastRatioArgs),
    /// Train max-fame models before a split date and score them after it.
    BacktestMax(BacktestMaxArgs),
    /// Train a ratio model before a split date and score it after it.
    BacktestRatio(BacktestRatioArgs),
    /// Fame, equivalence, pulses, HMMs, max-fame forecasts and backtests in one run.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Fame(_) => "fame",
            Command::Equivalence(_) => "equivalence",
            Command::FitDist(_) => "fit-dist",
            Command::DetectPulses(_) => "detect-pulses",
            Command::FitPulse(_) => "fit-pulse",
            Command::TrainHmm(_) => "train-hmm",
            Command::Simulate(_) => "simulate",
            Command::ForecastMax(_) => "forecast-max",
            Command::ForecastForward(_) => "forecast-forward",
            Command::ForecastRatio(_) => "forecast-ratio",
            Command::BacktestMax(_) => "backtest-max",
            Command::BacktestRatio(_) => "backtest-ratio",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct EntityArgs {
    /// Restrict to one entity.
    #[arg(long)]
    pub entity: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct FameArgs {
    #[arg(long)]
    pub entity: Option<String>,
    /// First day of the period [default: series start].
    #[arg(long)]
    pub from: Option<NaiveDate>,
    /// Last day of the period [default: series end].
    #[arg(long)]
    pub to: Option<NaiveDate>,
    /// Peak-fame window in days.
    #[arg(long, default_value_t = DEFAULT_PEAK_WINDOW)]
    pub peak_window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Measure {
    /// ln(1 + average frequency)
    Fame,
    /// average frequency
    Frequency,
}

#[derive(Debug, Clone, Args)]
pub struct EquivalenceArgs {
    #[arg(long, value_enum, default_value_t = Measure::Fame)]
    pub measure: Measure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistModel {
    Lognormal,
    Truncated,
    Powerlaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Aggregate {
    Total,
    Average,
    Maximum,
}

impl From<Aggregate> for GroupFameKind {
    fn from(a: Aggregate) -> Self {
        match a {
            Aggregate::Total => GroupFameKind::Total,
            Aggregate::Average => GroupFameKind::Average,
            Aggregate::Maximum => GroupFameKind::Maximum,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitDistArgs {
    #[arg(long, value_enum)]
    pub model: DistModel,
    /// Fit one entity's series.
    #[arg(long, conflicts_with = "aggregate")]
    pub entity: Option<String>,
    /// Fit a group's aggregate fame series (needs --group).
    #[arg(long, value_enum)]
    pub aggregate: Option<Aggregate>,
    /// Fame window for the log-normal models [default: w_m].
    #[arg(long)]
    pub window: Option<usize>,
    /// Left truncation point on the log-fame axis.
    #[arg(long, default_value_t = 0.0)]
    pub truncation: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TrainHmmArgs {
    #[arg(long)]
    pub entity: Option<String>,
    /// Generation record from `simulate`; its true states replace detection.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Accept models whose beta is not below gamma.
    #[arg(long)]
    pub allow_beta_ge_gamma: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PeakExitArg {
    PulseEnd,
    Geometric,
}

impl From<PeakExitArg> for PeakExit {
    fn from(p: PeakExitArg) -> Self {
        match p {
            PeakExitArg::PulseEnd => PeakExit::PulseEnd,
            PeakExitArg::Geometric => PeakExit::Geometric,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// HMM model JSON; replaces the parameter flags.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.2)]
    pub gamma: f64,
    /// Mean of ln(1 + x) on Normal days.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub normal_mu: f64,
    #[arg(long, default_value_t = 0.5)]
    pub normal_sigma: f64,
    /// Mean of ln H.
    #[arg(long, default_value_t = 5.3, allow_negative_numbers = true)]
    pub height_mu: f64,
    #[arg(long, default_value_t = 0.5)]
    pub height_sigma: f64,
    /// Mean of ln q.
    #[arg(long, default_value_t = 1.1, allow_negative_numbers = true)]
    pub rise_mu: f64,
    #[arg(long, default_value_t = 0.3)]
    pub rise_sigma: f64,
    #[arg(long, default_value_t = 3650)]
    pub days: usize,
    /// Number of independent series; series k uses seed + k.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value = "sim")]
    pub entity_id: String,
    #[arg(long, default_value = "2000-01-01")]
    pub start_date: NaiveDate,
    #[arg(long, value_enum, default_value_t = PeakExitArg::PulseEnd)]
    pub peak_exit: PeakExitArg,
}

#[derive(Debug, Clone, Args)]
pub struct ForecastMaxArgs {
    /// Fame window of the log-normal model [default: w_m].
    #[arg(long)]
    pub window: Option<usize>,
    /// Also estimate the joint log-normal maximum by Monte Carlo.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub allow_beta_ge_gamma: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ForecastForwardArgs {
    /// Lower bound of historical mean frequency.
    #[arg(long, default_value_t = 0.0)]
    pub m_l: f64,
    /// Upper bound (exclusive) of historical mean frequency.
    #[arg(long)]
    pub m_u: f64,
    /// Next-period fame thresholds.
    #[arg(long = "threshold", required = true, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
    /// Use published tail coefficients instead of fitting.
    #[arg(long, allow_negative_numbers = true, requires_all = ["intercept", "cohort_size"])]
    pub slope: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "slope")]
    pub intercept: Option<f64>,
    #[arg(long, requires = "slope")]
    pub cohort_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RatioKindArg {
    PeakOverHist,
    AvgOverHist,
}

impl From<RatioKindArg> for RatioKind {
    fn from(k: RatioKindArg) -> Self {
        match k {
            RatioKindArg::PeakOverHist => RatioKind::PeakOverHist,
            RatioKindArg::AvgOverHist => RatioKind::AvgOverHist,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RatioArgs {
    #[arg(long, value_enum, default_value_t = RatioKindArg::PeakOverHist)]
    pub kind: RatioKindArg,
    /// Days of history behind the anchor.
    #[arg(long, default_value_t = 365)]
    pub historical_span: usize,
    #[arg(long = "threshold", value_delimiter = ',')]
    pub thresholds: Vec<f64>,
}

impl RatioArgs {
    fn params(&self, cfg: &RunConfig) -> RatioParams {
        RatioParams {
            kind: self.kind.into(),
            horizon_days: cfg.horizon_days,
            peak_window: cfg.w_f,
            historical_span: self.historical_span,
            x_min: cfg.x_min.ratio,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ForecastRatioArgs {
    #[command(flatten)]
    pub ratio: RatioArgs,
    /// First day of the forecast horizon [default: last full horizon].
    #[arg(long)]
    pub anchor: Option<NaiveDate>,
    /// Periods to extrapolate each threshold probability over.
    #[arg(long = "periods", value_delimiter = ',', default_value = "1")]
    pub periods: Vec<u32>,
    /// Population for expected counts [default: observed entities].
    #[arg(long)]
    pub population: Option<f64>,
    /// Use published tail coefficients instead of fitting.
    #[arg(long, allow_negative_numbers = true, requires = "intercept")]
    pub slope: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "slope")]
    pub intercept: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BacktestMaxArgs {
    #[arg(long)]
    pub split: NaiveDate,
    /// Fame window [default: w_m].
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub allow_beta_ge_gamma: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BacktestRatioArgs {
    #[arg(long)]
    pub split: NaiveDate,
    #[command(flatten)]
    pub ratio: RatioArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Run both backtests with this split date.
    #[arg(long)]
    pub split: Option<NaiveDate>,
    /// Ratio backtest thresholds.
    #[arg(long = "threshold", value_delimiter = ',', default_value = "2,5,10")]
    pub thresholds: Vec<f64>,
}

/// Paths a command wrote, plus a text table for commands that have one.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Outcome {
    pub command: String,
    pub artifacts: Vec<PathBuf>,
    #[serde(skip)]
    pub summary: Option<String>,
}

impl Outcome {
    fn new(command: &str) -> Self {
        Outcome {
            command: command.to_string(),
            ..Default::default()
        }
    }

    fn json<T: Serialize + ?Sized>(&mut self, cfg: &RunConfig, name: &str, value: &T) -> Result<()> {
        let path = cfg.out(name);
        write_json(&path, value)?;
        self.artifacts.push(path);
        Ok(())
    }

    fn text(&mut self, cfg: &RunConfig, name: &str, text: String) -> Result<()> {
        let path = cfg.out(name);
        fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(path);
        self.summary = Some(text);
        Ok(())
    }

    fn csv(&mut self, cfg: &RunConfig, name: &str, body: impl FnOnce(fs::File) -> Result<()>) -> Result<()> {
        let path = cfg.out(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        body(file)?;
        self.artifacts.push(path);
        Ok(())
    }
}

/// A failed command: the module error plus the entity it concerned.
#[derive(Debug)]
pub struct CommandError {
    pub error: Error,
    pub entity: Option<String>,
}

impl From<Error> for CommandError {
    fn from(error: Error) -> Self {
        CommandError { error, entity: None }
    }
}

trait EntityContext<T> {
    fn for_entity(self, id: &str) -> std::result::Result<T, CommandError>;
}

impl<T> EntityContext<T> for Result<T> {
    fn for_entity(self, id: &str) -> std::result::Result<T, CommandError> {
        self.map_err(|error| CommandError {
            error,
            entity: Some(id.to_string()),
        })
    }
}

type CmdResult<T> = std::result::Result<T, CommandError>;

/// Runs one command against a validated config.
pub fn run_command(cfg: &RunConfig, command: &Command) -> CmdResult<Outcome> {
    fs::create_dir_all(cfg.output_dir()).map_err(|e| Error::io(cfg.output_dir(), e))?;
    match command {
        Command::Ingest => ingest(cfg),
        Command::Fame(a) => fame(cfg, a),
        Command::Equivalence(a) => equivalence(cfg, a),
        Command::FitDist(a) => fit_dist(cfg, a),
        Command::DetectPulses(a) => detect(cfg, a),
        Command::FitPulse(a) => fit_pulses(cfg, a),
        Command::TrainHmm(a) => train(cfg, a),
        Command::Simulate(a) => simulate(cfg, a),
        Command::ForecastMax(a) => forecast_max(cfg, a),
        Command::ForecastForward(a) => forecast_forward(cfg, a),
        Command::ForecastRatio(a) => forecast_ratio(cfg, a),
        Command::BacktestMax(a) => backtest_max(cfg, a),
        Command::BacktestRatio(a) => backtest_ratio(cfg, a),
        Command::Report(a) => report(cfg, a),
    }
}

fn select<'a>(map: &'a SeriesMap, entity: Option<&str>) -> CmdResult<Vec<&'a FrequencySeries>> {
    match entity {
        Some(id) => {
            let s = map.get(id).ok_or_else(|| Error::MissingEntity(id.to_string()))?;
            Ok(vec![s])
        }
        None => Ok(map.values().collect()),
    }
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

#[derive(Serialize)]
struct IngestEntry<'a> {
    entity_id: &'a str,
    start_date: NaiveDate,
    end_date: NaiveDate,
    days: usize,
    total_frequency: f64,
    average_frequency: f64,
}

fn ingest(cfg: &RunConfig) -> CmdResult<Outcome> {
    let map = cfg.series_map()?;
    let mut out = Outcome::new("ingest");
    let path = cfg.out("series.csv");
    save_series_csv(&path, &map)?;
    out.artifacts.push(path);
    let entries: Vec<IngestEntry> = map
        .values()
        .map(|s| IngestEntry {
            entity_id: s.entity_id(),
            start_date: s.start_date(),
            end_date: s.end_date(),
            days: s.len(),
            total_frequency: s.values().iter().sum(),
            average_frequency: average_frequency(s),
        })
        .collect();
    out.json(cfg, "ingest.json", &entries)?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
struct FameEntry {
    entity_id: String,
    from: NaiveDate,
    to: NaiveDate,
    average_frequency: f64,
    fame: f64,
    peak_fame: f64,
    peak_window: usize,
}

fn fame_entry(s: &FrequencySeries, args: &FameArgs) -> Result<FameEntry> {
    let range = DateRange::new(args.from.unwrap_or(s.start_date()), args.to.unwrap_or(s.end_date()))?;
    let (Some(a), Some(b)) = (s.index_of(range.start), s.index_of(range.end)) else {
        return Err(Error::invalid(format!(
            "period {}..={} not covered by series {}..={}",
            range.start,
            range.end,
            s.start_date(),
            s.end_date()
        )));
    };
    let avg = average_frequency(&s.slice(a, b + 1)?);
    let peak = peak_fame(s, range, args.peak_window)?;
    Ok(FameEntry {
        entity_id: s.entity_id().to_string(),
        from: range.start,
        to: range.end,
        average_frequency: avg,
        fame: fame_from_mean(avg),
        peak_fame: peak.value,
        peak_window: args.peak_window,
    })
}

fn fame(cfg: &RunConfig, args: &FameArgs) -> CmdResult<Outcome> {
    let map = cfg.series_map()?;
    let series = select(&map, args.entity.as_deref())?;
    let entries = series
        .iter()
        .map(|s| fame_entry(s, args).for_entity(s.entity_id()))
        .collect::<CmdResult<Vec<_>>>()?;
    let mut out = Outcome::new("fame");
    out.json(cfg, "fame.json", &entries)?;
    out.csv(cfg, "fame_series.csv", |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["entity_id", "date", "window", "fame"])?;
        for s in &series {
            if s.len() < cfg.w_m {
                continue;
            }
            for (k, m) in window_means(s.values(), cfg.w_m).into_iter().enumerate() {
                let date = s.date_at(k + cfg.w_m - 1);
                w.write_record([
                    s.entity_id().to_string(),
                    date.to_string(),
                    cfg.w_m.to_string(),
                    fame_from_mean(m).to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("fame_series.csv", e))
    })?;
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            vec![
                e.entity_id.clone(),
                format!("{:.3}", e.average_frequency),
                format!("{:.3}", e.fame),
                format!("{:.3}", e.peak_fame),
            ]
        })
        .collect();
    out.text(cfg, "fame.txt", aligned_table(&["Entity", "Avg. Freq.", "Fame", "Peak Fame"], &rows))?;
    Ok(out)
}

#[derive(Serialize)]
struct EquivalenceReport<'a> {
    group: &'a str,
    measure: &'a str,
    points: Vec<crate::series::EquivalencePoint>,
}

fn equivalence(cfg: &RunConfig, args: &EquivalenceArgs) -> CmdResult<Outcome> {
    let map = cfg.series_map()?;
    let group = cfg.group_def()?;
    let members = group.resolve(&map)?;
    let per_entity: BTreeMap<String, f64> = members
        .iter()
        .map(|s| {
            let avg = average_frequency(s);
            let v = match args.measure {
                Measure::Fame => fame_from_mean(avg),
                Measure::Frequency => avg,
            };
            (s.entity_id().to_string(), v)
        })
        .collect();
    let points = fame_equivalence(&group, &per_entity)?;
    let mut out = Outcome::new("equivalence");
    out.csv(cfg, "equivalence.csv", |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["alpha_pct", "beta_pct"])?;
        for p in &points {
            w.write_record([p.alpha_pct.to_string(), p.beta_pct.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("equivalence.csv", e))
    })?;
    let measure = match args.measure {
        Measure::Fame => "fame",
        Measure::Frequency => "frequency",
    };
    out.json(
        cfg,
        "equivalence.json",
        &EquivalenceReport {
            group: group.name(),
            measure,
            points,
        },
    )?;
    Ok(out)
}

#[derive(Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
enum DistFit {
    Lognormal { fit: LogNormalFit },
    Truncated { fit: LogNormalFit, truncation: f64 },
    Powerlaw { fit: PowerLawTailFit },
}

#[derive(Serialize)]
struct FitReport {
    subject: String,
    sample_size: usize,
    #[serde(flatten)]
    fit: DistFit,
}

fn fit_dist(cfg: &RunConfig, args: &FitDistArgs) -> CmdResult<Outcome> {
    let map = cfg.series_map()?;
    let window = args.window.unwrap_or(cfg.w_m);
    let mut out = Outcome::new("fit-dist");
    let ccdf_name = "ccdf.csv";
    match args.model {
        DistModel::Lognormal | DistModel::Truncated => {
            let (subject, logs) = match (&args.entity, args.aggregate) {
                (Some(id), _) => {
                    let s = map.get(id).ok_or_else(|| Error::MissingEntity(id.clone()))?;
                    if s.len() < window {
                        return Err(Error::InsufficientData {
                            needed: window,
                            available: s.len(),
                        })
                        .for_entity(id);
                    }
                    let logs: Vec<f64> = window_means(s.values(), window).into_iter().map(fame_from_mean).collect();
                    (format!("entity:{id}"), logs)
                }
                (None, Some(kind)) => {
                    let group = cfg.group_def()?;
                    let g = group_fame_series(&group, &map, kind.into(), window)?;
                    let name = format!("group:{}:{:?}", group.name(), kind).to_lowercase();
                    (name, g.values.iter().map(|v| v.value).collect())
                }
                (None, None) => {
                    return Err(Error::invalid("log-normal fits need --entity or --aggregate").into());
                }
            };
            let (fit, report) = if args.model == DistModel::Lognormal {
                let fit = LogNormalFit::from_log_values(&logs)?;
                (fit, DistFit::Lognormal { fit })
            } else {
                let kept: Vec<f64> = logs.iter().copied().filter(|x| *x >= args.truncation).collect();
                let fit = fit_truncated_lognormal(&kept, args.truncation)?;
                (
                    fit,
                    DistFit::Truncated {
                        fit,
                        truncation: args.truncation,
                    },
                )
            };
            let ccdf = empirical_ccdf(&logs)?;
            out.json(
                cfg,
                "fit.json",
                &FitReport {
                    subject,
                    sample_size: logs.len(),
                    fit: report,
                },
            )?;
            let truncation = args.truncation;
            let truncated = args.model == DistModel::Truncated;
            out.csv(cfg, ccdf_name, |f| {
                write_ccdf_csv(f, &ccdf.points, |x| {
                    if truncated {
                        if x < truncation {
                            return None;
                        }
                        // conditional tail above the truncation point
                        let below = lognormal_tail_prob(&untruncated(&fit), truncation);
                        Some(lognormal_tail_prob(&untruncated(&fit), x) / below)
                    } else {
                        Some(lognormal_tail_prob(&fit, x))
                    }
                })
            })?;
        }
        DistModel::Powerlaw => {
            let (subject, values) = powerlaw_sample(cfg, &map, args)?;
            let ccdf = empirical_ccdf(&values)?;
            let fit = fit_powerlaw_tail(&ccdf, cfg.x_min.powerlaw)?;
            out.json(
                cfg,
                "fit.json",
                &FitReport {
                    subject,
                    sample_size: values.len(),
                    fit: DistFit::Powerlaw { fit },
                },
            )?;
            out.csv(cfg, ccdf_name, |f| write_ccdf_csv(f, &ccdf.points, powerlaw_fitted(&fit)))?;
            out.csv(cfg, "loglog.csv", |f| write_loglog_csv(f, &ccdf.points, &fit))?;
        }
    }
    Ok(out)
}

fn untruncated(fit: &LogNormalFit) -> LogNormalFit {
    LogNormalFit { truncation_point: None, ..*fit }
}

/// Daily values of one entity, or per-entity average frequencies of a group
/// or of the whole corpus.
fn powerlaw_sample(cfg: &RunConfig, map: &SeriesMap, args: &FitDistArgs) -> CmdResult<(String, Vec<f64>)> {
    if let Some(id) = &args.entity {
        let s = map.get(id).ok_or_else(|| Error::MissingEntity(id.clone()))?;
        return Ok((format!("entity:{id}"), s.values().to_vec()));
    }
    if cfg.group.is_some() {
        let group = cfg.group_def()?;
        let members = group.resolve(map)?;
        return Ok((
            format!("group:{}:average_frequency", group.name()),
            members.iter().map(|s| average_frequency(s)).collect(),
        ));
    }
    Ok(("corpus:average_frequency".into(), map.values().map(average_frequency).collect()))
}

#[derive(Serialize)]
struct DetectedEntry {
    entity_id: String,
    pulses: Vec<ExtentRecord>,
}

fn detect(cfg: &RunConfig, args: &EntityArgs) -> CmdResult<Outcome> {
    let map = cfg.series_map()?;
    let entries = select(&map, args.entity.as_deref())?
        .into_iter()
        .map(|s| {
            let extents = detect_pulses(s, &cfg.pulse).for_entity(s.entity_id())?;
            Ok(DetectedEntry {
                entity_id: s.entity_id().to_string(),
                pulses: extents.iter().map(|e| ExtentRecord::new(s, e)).collect(),
            })
        })
        .collect::<CmdResult<Vec<_>>>()?;
    let mut out = Outcome::new("detect-pulses");
    out.json(
        cfg,
        "pulses_detected.json",
        &serde_json::json!({ "params": cfg.pulse, "entities": entries }),
    )?;
    Ok(out)
}

#[derive(Serialize)]
struct FittedEntry {
    entity_id: String,
    pulses: Vec<PulseRecord>,
}

fn fit_pulses(cfg: &RunConfig, args: &EntityArgs) -> CmdResult<Outcome> {
    let map = cfg.series_map()?;
    let mut out = Outcome::new("fit-pulse");
    let mut entries = Vec::new();
    for s in select(&map, args.entity.as_deref())? {
        let pulses = detect_and_fit(s, &cfg.pulse).for_entity(s.entity_id())?;
        for (k, p) in pulses.iter().enumerate() {
            let name = format!("pulses/{}_{k:03}.csv", file_stem(s.entity_id()));
            out.csv(cfg, &name, |f| write_pulse_csv(f, s.values(), p))?;
        }
        entries.push(FittedEntry {
            entity_id: s.entity_id().to_string(),
            pulses: pulses.iter().map(|p| PulseRecord::new(s, p)).collect(),
        });
    }
    out.json(
        cfg,
        "pulses.json",
        &serde_json::json!({ "params": cfg.pulse, "entities": entries }),
    )?;
    Ok(out)
}

#[derive(Serialize)]
struct HmmReport {
    labels: &'static str,
    models: BTreeMap<String, HmmModel>,
    stationary_peak_prob: BTreeMap<String, f64>,
    untrainable: Vec<UntrainableEntity>,
}

fn train(cfg: &RunConfig, args: &TrainHmmArgs) -> CmdResult<Outcome> {
    let map = cfg.series_map()?;
    let opts = TrainOptions {
        allow_beta_not_below_gamma: args.allow_beta_ge_gamma,
    };
    let records: Option<BTreeMap<String, GenerationRecord>> = match &args.labels {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let recs: Vec<GenerationRecord> = serde_json::from_str(&text).map_err(Error::from)?;
            Some(recs.into_iter().map(|r| (r.entity_id.clone(), r)).collect())
        }
        None => None,
    };
    let series = select(&map, args.entity.as_deref())?;
    let mut models = BTreeMap::new();
    let mut untrainable = Vec::new();
    for s in &series {
        let id = s.entity_id();
        let trained = match &records {
            Some(recs) => match recs.get(id) {
                Some(r) => train_hmm(s, &r.path(), &r.pulses, &opts),
                None => Err(Error::invalid(format!("no generation record for `{id}`"))),
            },
            None => detect_and_fit(s, &cfg.pulse).and_then(|pulses| {
                let path = label_states(s, &pulses)?;
                train_hmm(s, &path, &pulses, &opts)
            }),
        };
        match trained {
            Ok(m) => {
                models.insert(id.to_string(), m);
            }
            // a single requested entity fails the command
            Err(e) if series.len() == 1 => return Err(e).for_entity(id),
            Err(e) => untrainable.push(UntrainableEntity {
                entity_id: id.to_string(),
                model: "hmm".into(),
                reason: e.to_string(),
            }),
        }
    }
    if models.is_empty() {
        return Err(Error::UntrainablePeakState("no entity yielded a trainable model".into()).into());
    }
    let mut out = Outcome::new("train-hmm");
    out.json(
        cfg,
        "hmm_models.json",
        &HmmReport {
            labels: if records.is_some() { "generation_record" } else { "detected" },
            stationary_peak_prob: models.iter().map(|(k, m)| (k.clone(), stationary_peak_prob(m))).collect(),
            models,
            untrainable,
        },
    )?;
    Ok(out)
}

fn simulate(cfg: &RunConfig, args: &SimulateArgs) -> CmdResult<Outcome> {
    let model = match &args.model {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let m: HmmModel = serde_json::from_str(&text).map_err(Error::from)?;
            m.validate()?;
            m
        }
        None => HmmModel::new(
            args.beta,
            args.gamma,
            LogNormalFit::new(args.normal_mu, args.normal_sigma)?,
            LogNormalFit::new(args.height_mu, args.height_sigma)?,
            LogNormalFit::new(args.rise_mu, args.rise_sigma)?,
        )?,
    };
    if args.count == 0 {
        return Err(Error::invalid("count must be at least 1").into());
    }
    let exit: PeakExit = args.peak_exit.into();
    let mut series = SeriesMap::new();
    let mut records = Vec::with_capacity(args.count);
    for k in 0..args.count {
        let entity_id = if args.count == 1 {
            args.entity_id.clone()
        } else {
            format!("{}{k:03}", args.entity_id)
        };
        let opts = SimulationOptions {
            entity_id: entity_id.clone(),
            start_date: args.start_date,
            peak_exit: exit,
        };
        let sim = simulate_with(&model, args.days, cfg.seed.wrapping_add(k as u64), &opts).for_entity(&entity_id)?;
        records.push(sim.record(&model, exit));
        series.insert(entity_id, sim.series);
    }
    let mut out = Outcome::new("simulate");
    let path = cfg.out("simulated.csv");
    save_series_csv(&path, &series)?;
    out.artifacts.push(path);
    out.json(cfg, "generation.json", &records)?;
    out.json(cfg, "model.json", &model)?;
    Ok(out)
}

#[derive(Serialize)]
struct MaxFameEntry {
    entity_id: String,
    prob_lognormal: f64,
    prob_hmm: f64,
}

#[derive(Serialize)]
struct ForecastMaxReport {
    group: String,
    window: usize,
    rows: Vec<MaxFameEntry>,
    lognormal_fits: BTreeMap<String, LogNormalFit>,
    hmm_models: BTreeMap<String, HmmModel>,
    untrainable: Vec<UntrainableEntity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lognormal_joint_mc: Option<BTreeMap<String, McEstimate>>,
}

fn forecast_max(cfg: &RunConfig, args: &ForecastMaxArgs) -> CmdResult<Outcome> {
    let map = cfg.series_map()?;
    let group = cfg.group_def()?;
    let members: Vec<FrequencySeries> = group.resolve(&map)?.into_iter().cloned().collect();
    let options = MaxFameBacktestOptions {
        window: args.window.unwrap_or(cfg.w_m),
        pulse: cfg.pulse,
        train: TrainOptions {
            allow_beta_not_below_gamma: args.allow_beta_ge_gamma,
        },
    };
    let models = train_max_fame_models(&members, &options);
    let (ln, hmm) = models.probabilities()?;
    let rows: Vec<MaxFameEntry> = members
        .iter()
        .map(|s| MaxFameEntry {
            entity_id: s.entity_id().to_string(),
            prob_lognormal: ln.get(s.entity_id()).copied().unwrap_or(0.0),
            prob_hmm: hmm.get(s.entity_id()).copied().unwrap_or(0.0),
        })
        .collect();
    let mc = match args.mc_samples {
        Some(n) if !models.lognormal_fits.is_empty() => {
            Some(joint_max_fame_lognormal_mc(&models.lognormal_fits, n, cfg.seed)?)
        }
        _ => None,
    };
    let mut sorted: Vec<&MaxFameEntry> = rows.iter().collect();
    sorted.sort_by(|a, b| b.prob_hmm.total_cmp(&a.prob_hmm).then_with(|| a.entity_id.cmp(&b.entity_id)));
    let table = aligned_table(
        &["Entity", "Pr(LN)", "Pr(HMM)"],
        &sorted
            .iter()
            .map(|r| vec![r.entity_id.clone(), format_prob(r.prob_lognormal), format_prob(r.prob_hmm)])
            .collect::<Vec<_>>(),
    );
    let mut out = Outcome::new("forecast-max");
    out.json(
        cfg,
        "forecast_max.json",
        &ForecastMaxReport {
            group: group.name().to_string(),
            window: options.window,
            rows,
            lognormal_fits: models.lognormal_fits,
            hmm_models: models.hmm_models,
            untrainable: models.untrainable,
            lognormal_joint_mc: mc,
        },
    )?;
    out.text(cfg, "forecast_max.txt", table)?;
    Ok(out)
}

#[derive(Serialize)]
struct ForwardReport {
    source: &'static str,
    model: ForwardFameModel,
    estimates: Vec<FamousEstimate>,
}

fn forecast_forward(cfg: &RunConfig, args: &ForecastForwardArgs) -> CmdResult<Outcome> {
    let params = ForwardFameParams {
        m_l: args.m_l,
        m_u: args.m_u,
        w_m: cfg.w_m,
        w_f: cfg.w_f,
        x_min: cfg.x_min.forward,
    };
    let mut out = Outcome::new("forecast-forward");
    let (source, model, ccdf): (_, _, Option<EmpiricalCcdf>) = match (args.slope, args.intercept, args.cohort_size) {
        (Some(slope), Some(intercept), Some(n)) => {
            ("published", ForwardFameModel::published(&params, slope, intercept, n)?, None)
        }
        _ => {
            let map = cfg.series_map()?;
            let map = match &cfg.group {
                Some(_) => {
                    let g = cfg.group_def()?;
                    g.resolve(&map)?.into_iter().map(|s| (s.entity_id().to_string(), s.clone())).collect()
                }
                None => map,
            };
            let (model, ccdf) = fit_forward_fame(&map, &params)?;
            ("fitted", model, Some(ccdf))
        }
    };
    let estimates = args
        .thresholds
        .iter()
        .map(|&t| become_famous_prob(&model, t))
        .collect::<Result<Vec<_>>>()?;
    if let Some(ccdf) = &ccdf {
        out.csv(cfg, "forward_ccdf.csv", |f| write_ccdf_csv(f, &ccdf.points, powerlaw_fitted(&model.tail)))?;
        out.csv(cfg, "forward_loglog.csv", |f| write_loglog_csv(f, &ccdf.points, &model.tail))?;
    }
    out.json(
        cfg,
        "forward_fame.json",
        &ForwardReport {
            source,
            model,
            estimates: estimates.clone(),
        },
    )?;
    let entries: Vec<_> = estimates.into_iter().map(|e| (model, e)).collect();
    out.text(cfg, "forward_fame.txt", forward_fame_table(&entries))?;
    Ok(out)
}

#[derive(Serialize)]
struct RatioEstimate {
    threshold: f64,
    prob: f64,
    expected_count: f64,
    extrapolation: Vec<Extrapolation>,
}

#[derive(Serialize)]
struct RatioReport {
    source: &'static str,
    model: RatioModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    anchor: Option<NaiveDate>,
    population: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    zero_history: Option<Vec<String>>,
    estimates: Vec<RatioEstimate>,
}

fn forecast_ratio(cfg: &RunConfig, args: &ForecastRatioArgs) -> CmdResult<Outcome> {
    let params = args.ratio.params(cfg);
    params.validate()?;
    if args.ratio.thresholds.is_empty() {
        return Err(Error::invalid("at least one --threshold is required").into());
    }
    let mut out = Outcome::new("forecast-ratio");
    let report = match (args.slope, args.intercept) {
        (Some(slope), Some(intercept)) => {
            let model = RatioModel::published(
                params.kind,
                params.horizon_days,
                params.peak_window,
                slope,
                intercept,
                params.x_min,
            )?;
            let population = args
                .population
                .ok_or_else(|| Error::invalid("--population is required with published coefficients"))?;
            ratio_report("published", model, None, population, None, &args.ratio.thresholds, &args.periods)?
        }
        _ => {
            let map = cfg.series_map()?;
            let group = cfg.group_def()?;
            let anchor = match args.anchor {
                Some(a) => a,
                None => default_ratio_anchor(&map, &group, &params)?,
            };
            let fit = fit_ratio_model(&map, &group, &params, anchor)?;
            out.csv(cfg, "ratio_ccdf.csv", |f| write_ccdf_csv(f, &fit.ccdf.points, powerlaw_fitted(&fit.model.tail)))?;
            out.csv(cfg, "ratio_loglog.csv", |f| write_loglog_csv(f, &fit.ccdf.points, &fit.model.tail))?;
            let population = args.population.unwrap_or(fit.sample.observations.len() as f64);
            ratio_report(
                "fitted",
                fit.model,
                Some(anchor),
                population,
                Some(fit.sample.zero_history.clone()),
                &args.ratio.thresholds,
                &args.periods,
            )?
        }
    };
    let rows: Vec<Vec<String>> = report
        .estimates
        .iter()
        .flat_map(|e| {
            e.extrapolation.iter().map(move |x| {
                vec![
                    e.threshold.to_string(),
                    x.n.to_string(),
                    format_prob(x.one_period),
                    format_prob(x.linear),
                    format_prob(x.exact),
                    format!("{:.1}", e.expected_count),
                ]
            })
        })
        .collect();
    out.json(cfg, "ratio.json", &report)?;
    out.text(
        cfg,
        "ratio.txt",
        aligned_table(&["T", "Periods", "Prob_M", "Linear", "Exact", "Cnts_M"], &rows),
    )?;
    Ok(out)
}

fn ratio_report(
    source: &'static str,
    model: RatioModel,
    anchor: Option<NaiveDate>,
    population: f64,
    zero_history: Option<Vec<String>>,
    thresholds: &[f64],
    periods: &[u32],
) -> Result<RatioReport> {
    let estimates = thresholds
        .iter()
        .map(|&t| {
            let prob = model.prob(t)?;
            Ok(RatioEstimate {
                threshold: t,
                prob,
                expected_count: crate::dist::expected_count(prob, population),
                extrapolation: periods
                    .iter()
                    .map(|&n| extrapolate_n_periods(prob, n))
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RatioReport {
        source,
        model,
        anchor,
        population,
        zero_history,
        estimates,
    })
}

fn backtest_max(cfg: &RunConfig, args: &BacktestMaxArgs) -> CmdResult<Outcome> {
    let map = cfg.series_map()?;
    let group = cfg.group_def()?;
    let options = MaxFameBacktestOptions {
        window: args.window.unwrap_or(cfg.w_m),
        pulse: cfg.pulse,
        train: TrainOptions {
            allow_beta_not_below_gamma: args.allow_beta_ge_gamma,
        },
    };
    let bt = backtest_max_fame(&map, &group, args.split, &options)?;
    let (mae_hmm, mae_ln) = bt.report.mean_absolute_errors();
    let mut table = max_fame_table(&bt.report);
    table.push_str(&format!(
        "\nMAE(LN) {mae_ln:.4}  MAE(HMM) {mae_hmm:.4}  tie days {}/{}\n",
        bt.report.tie_days, bt.report.post_split_days
    ));
    let mut out = Outcome::new("backtest-max");
    out.json(cfg, "backtest_max.json", &bt)?;
    out.text(cfg, "backtest_max.txt", table)?;
    Ok(out)
}

fn backtest_ratio(cfg: &RunConfig, args: &BacktestRatioArgs) -> CmdResult<Outcome> {
    let map = cfg.series_map()?;
    let group = cfg.group_def()?;
    if args.ratio.thresholds.is_empty() {
        return Err(Error::invalid("at least one --threshold is required").into());
    }
    let params = args.ratio.params(cfg);
    let bt = backtest_ratio_model(&map, &group, args.split, &args.ratio.thresholds, &params)?;
    let mut out = Outcome::new("backtest-ratio");
    out.csv(cfg, "backtest_ratio_ccdf.csv", |f| {
        write_ccdf_csv(f, &bt.training.ccdf.points, powerlaw_fitted(&bt.training.model.tail))
    })?;
    out.json(cfg, "backtest_ratio.json", &bt)?;
    out.text(cfg, "backtest_ratio.txt", ratio_backtest_table(&bt))?;
    Ok(out)
}

fn report(cfg: &RunConfig, args: &ReportArgs) -> CmdResult<Outcome> {
    // (title, command, may fail without failing the report)
    let mut steps: Vec<(&str, Command, bool)> = vec![
        (
            "Fame",
            Command::Fame(FameArgs {
                entity: None,
                from: None,
                to: None,
                peak_window: cfg.w_f,
            }),
            false,
        ),
        ("", Command::Equivalence(EquivalenceArgs { measure: Measure::Fame }), false),
        ("", Command::FitPulse(EntityArgs::default()), false),
        (
            "Max-fame forecast",
            Command::ForecastMax(ForecastMaxArgs {
                window: None,
                mc_samples: None,
                allow_beta_ge_gamma: false,
            }),
            false,
        ),
    ];
    if let Some(split) = args.split {
        steps.push((
            "Max-fame backtest",
            Command::BacktestMax(BacktestMaxArgs {
                split,
                window: None,
                allow_beta_ge_gamma: false,
            }),
            false,
        ));
        steps.push((
            "Ratio backtest",
            Command::BacktestRatio(BacktestRatioArgs {
                split,
                ratio: RatioArgs {
                    kind: RatioKindArg::PeakOverHist,
                    historical_span: cfg.horizon_days,
                    thresholds: args.thresholds.clone(),
                },
            }),
            true,
        ));
    }
    let mut out = Outcome::new("report");
    let mut text = String::new();
    for (title, cmd, optional) in &steps {
        let step = match run_command(cfg, cmd) {
            Ok(step) => step,
            Err(e) if *optional => {
                text.push_str(&format!("{title}\n\nskipped: {}\n\n", e.error));
                continue;
            }
            Err(e) => return Err(e),
        };
        if let (false, Some(s)) = (title.is_empty(), &step.summary) {
            text.push_str(&format!("{title}\n\n{s}\n"));
        }
        out.artifacts.extend(step.artifacts);
    }
    out.text(cfg, "report.txt", text)?;
    Ok(out)
}

/// `{"error": {"kind", "message", ...}}` as printed on failure.
pub fn error_object(command: Option<&str>, kind: &str, message: &str, entity: Option<&str>) -> serde_json::Value {
    let mut err = serde_json::Map::new();
    err.insert("kind".into(), kind.into());
    err.insert("message".into(), message.into());
    if let Some(c) = command {
        err.insert("command".into(), c.into());
    }
    if let Some(e) = entity {
        err.insert("entity".into(), e.into());
    }
    serde_json::json!({ "error": err })
}

/// Parses `args`, runs the command and returns the process exit code. On
/// success the outcome is printed to stdout as JSON; on failure an error
/// object goes to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    let msg = e.render().to_string();
                    let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
                    eprintln!("{}", error_object(None, "usage", first, None));
                    2
                }
            };
        }
    };
    let name = cli.command.name();
    let cfg = match cli.global.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", error_object(Some(name), e.kind(), &e.to_string(), None));
            return 1;
        }
    };
    if let Some(n) = cfg.threads {
        // a second global build in the same process fails harmlessly
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run_command(&cfg, &cli.command) {
        Ok(outcome) => {
            println!("{}", serde_json::to_string(&outcome).expect("outcome serializes"));
            0
        }
        Err(CommandError { error, entity }) => {
            eprintln!(
                "{}",
                error_object(Some(name), error.kind(), &error.to_string(), entity.as_deref())
            );
            1
        }
    }
}

pub fn main_entry() -> i32 {
    main_with_args(std::env::args_os())
}
