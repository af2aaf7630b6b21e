//! TOML experiment configuration.
//!
//! Each experiment has its own schema; unknown keys are rejected
//! everywhere. `load` resolves every default so the effective config can
//! be echoed next to the outputs and re-run to reproduce them exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dyncopy_core::analysis::Direction;
use dyncopy_core::blackbox::{EmbedTarget, FlowTarget, LorenzParams, ProbeEncoding};
use dyncopy_core::net::TransferKind;
use dyncopy_core::trainer::{TrainConfig, TrainStage};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    CopyClassifier,
    CopyLorenzDlm,
    CopyLorenzDdlm,
    HistoryReplay,
    CopySeries,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::CopyClassifier => "copy-classifier",
            ExperimentKind::CopyLorenzDlm => "copy-lorenz-dlm",
            ExperimentKind::CopyLorenzDdlm => "copy-lorenz-ddlm",
            ExperimentKind::HistoryReplay => "history-replay",
            ExperimentKind::CopySeries => "copy-series",
        }
    }

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "copy-classifier" => ExperimentKind::CopyClassifier,
            "copy-lorenz-dlm" => ExperimentKind::CopyLorenzDlm,
            "copy-lorenz-ddlm" => ExperimentKind::CopyLorenzDdlm,
            "history-replay" => ExperimentKind::HistoryReplay,
            "copy-series" => ExperimentKind::CopySeries,
            other => {
                return Err(CliError::Config(format!("unknown experiment '{other}'")));
            }
        })
    }
}

/// A parsed, defaults-resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Config {
    CopyClassifier(ClassifierConfig),
    CopyLorenzDlm(DlmConfig),
    CopyLorenzDdlm(DdlmConfig),
    HistoryReplay(ReplayConfig),
    CopySeries(SeriesConfig),
}

impl Config {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Config::CopyClassifier(_) => ExperimentKind::CopyClassifier,
            Config::CopyLorenzDlm(_) => ExperimentKind::CopyLorenzDlm,
            Config::CopyLorenzDdlm(_) => ExperimentKind::CopyLorenzDdlm,
            Config::HistoryReplay(_) => ExperimentKind::HistoryReplay,
            Config::CopySeries(_) => ExperimentKind::CopySeries,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Config::CopyClassifier(c) => c.seed,
            Config::CopyLorenzDlm(c) => c.seed,
            Config::CopyLorenzDdlm(c) => c.seed,
            Config::HistoryReplay(c) => c.seed,
            Config::CopySeries(c) => c.seed,
        }
    }

    pub fn out_dir(&self) -> &Path {
        match self {
            Config::CopyClassifier(c) => &c.out_dir,
            Config::CopyLorenzDlm(c) => &c.out_dir,
            Config::CopyLorenzDdlm(c) => &c.out_dir,
            Config::HistoryReplay(c) => &c.out_dir,
            Config::CopySeries(c) => &c.out_dir,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Config::CopyClassifier(c) => c.seed = seed,
            Config::CopyLorenzDlm(c) => c.seed = seed,
            Config::CopyLorenzDdlm(c) => c.seed = seed,
            Config::HistoryReplay(c) => c.seed = seed,
            Config::CopySeries(c) => c.seed = seed,
        }
    }

    pub fn set_out_dir(&mut self, dir: PathBuf) {
        match self {
            Config::CopyClassifier(c) => c.out_dir = dir,
            Config::CopyLorenzDlm(c) => c.out_dir = dir,
            Config::CopyLorenzDdlm(c) => c.out_dir = dir,
            Config::HistoryReplay(c) => c.out_dir = dir,
            Config::CopySeries(c) => c.out_dir = dir,
        }
    }

    /// Serialize the effective configuration back to TOML.
    pub fn to_toml(&self) -> String {
        match self {
            Config::CopyClassifier(c) => toml::to_string(c),
            Config::CopyLorenzDlm(c) => toml::to_string(c),
            Config::CopyLorenzDdlm(c) => toml::to_string(c),
            Config::HistoryReplay(c) => toml::to_string(c),
            Config::CopySeries(c) => toml::to_string(c),
        }
        .expect("config serializes")
    }
}

/// Parse a config file, check the experiment tag against the invoked
/// subcommand, and apply command-line overrides.
pub fn load(
    path: &Path,
    expected: ExperimentKind,
    seed_override: Option<u64>,
    out_dir_override: Option<PathBuf>,
) -> CliResult<Config> {
    let text = fs::read_to_string(path)?;
    let probe: ExperimentProbe =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{path:?}: {e}")))?;
    let kind = ExperimentKind::from_str(&probe.experiment)?;
    if kind != expected {
        return Err(CliError::Config(format!(
            "config is for '{}' but the '{}' subcommand was invoked",
            kind.as_str(),
            expected.as_str()
        )));
    }
    let parse_err = |e: toml::de::Error| CliError::Config(format!("{path:?}: {e}"));
    let mut config = match kind {
        ExperimentKind::CopyClassifier => {
            Config::CopyClassifier(toml::from_str(&text).map_err(parse_err)?)
        }
        ExperimentKind::CopyLorenzDlm => {
            Config::CopyLorenzDlm(toml::from_str(&text).map_err(parse_err)?)
        }
        ExperimentKind::CopyLorenzDdlm => {
            Config::CopyLorenzDdlm(toml::from_str(&text).map_err(parse_err)?)
        }
        ExperimentKind::HistoryReplay => {
            Config::HistoryReplay(toml::from_str(&text).map_err(parse_err)?)
        }
        ExperimentKind::CopySeries => {
            Config::CopySeries(toml::from_str(&text).map_err(parse_err)?)
        }
    };
    if let Some(dir) = path.parent() {
        config.resolve_input_paths(dir);
    }
    if let Some(seed) = seed_override {
        config.set_seed(seed);
    }
    if let Some(dir) = out_dir_override {
        config.set_out_dir(dir);
    }
    config.validate()?;
    Ok(config)
}

fn rebase(path: &mut PathBuf, dir: &Path) {
    if path.is_relative() {
        *path = dir.join(&path);
    }
}

impl Config {
    /// Input files named in a config resolve relative to the config file's
    /// own directory, so runs do not depend on the working directory.
    /// `out_dir` is left alone: outputs land where the invoker says.
    fn resolve_input_paths(&mut self, dir: &Path) {
        match self {
            Config::CopyClassifier(c) => {
                rebase(&mut c.patterns, dir);
                if let Some(mnist) = &mut c.mnist {
                    rebase(&mut mnist.images, dir);
                    rebase(&mut mnist.labels, dir);
                }
            }
            Config::CopySeries(c) => rebase(&mut c.input, dir),
            _ => {}
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        match self {
            Config::CopyClassifier(c) => c.validate(),
            Config::CopyLorenzDlm(c) => c.validate(),
            Config::CopyLorenzDdlm(c) => c.validate(),
            Config::HistoryReplay(c) => c.validate(),
            Config::CopySeries(c) => c.validate(),
        }
    }
}

/// First-pass parse: only the experiment tag, everything else ignored.
#[derive(Deserialize)]
struct ExperimentProbe {
    experiment: String,
    #[serde(flatten)]
    _rest: toml::Table,
}

fn d_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn d_seed() -> u64 {
    7
}

/// A coarse-to-fine Monte-Carlo schedule entry.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub scale: f64,
    pub steps: u64,
}

/// Trainer keys shared by every experiment.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub design_bound: f64,
    /// Bound for the uniform random initialization.
    pub init_bound: f64,
    pub stages: Vec<StageSpec>,
    pub target_loss: f64,
    pub snapshot_every: u64,
    #[serde(default = "d_batch")]
    pub batch: usize,
}

fn d_batch() -> usize {
    1
}

impl TrainSection {
    pub fn base_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            design_bound: self.design_bound,
            proposal_scale: self.stages.first().map(|s| s.scale).unwrap_or(1.0),
            max_steps: 0,
            target_loss: self.target_loss,
            snapshot_every: self.snapshot_every,
            batch: self.batch,
            seed,
        }
    }

    pub fn stages(&self) -> Vec<TrainStage> {
        self.stages
            .iter()
            .map(|s| TrainStage {
                proposal_scale: s.scale,
                max_steps: s.steps,
            })
            .collect()
    }

    fn validate(&self, what: &str) -> CliResult<()> {
        if self.stages.is_empty() {
            return Err(CliError::Config(format!("{what}: needs at least one stage")));
        }
        if !(self.init_bound > 0.0 && self.init_bound <= self.design_bound) {
            return Err(CliError::Config(format!(
                "{what}: init_bound must sit in (0, design_bound]"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LorenzSection {
    pub sigma: f64,
    pub r: f64,
    pub b: f64,
}

impl Default for LorenzSection {
    fn default() -> Self {
        let p = LorenzParams::default();
        LorenzSection {
            sigma: p.sigma,
            r: p.r,
            b: p.b,
        }
    }
}

impl LorenzSection {
    pub fn params(&self) -> LorenzParams {
        LorenzParams {
            sigma: self.sigma,
            r: self.r,
            b: self.b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSectionCfg {
    pub coord: usize,
    pub level: f64,
    pub lag: f64,
    pub direction: String,
}

impl SectionSectionCfg {
    pub fn spec(&self) -> CliResult<dyncopy_core::analysis::SectionSpec> {
        let direction = match self.direction.as_str() {
            "up" => Direction::Up,
            "down" => Direction::Down,
            "both" => Direction::Both,
            other => {
                return Err(CliError::Config(format!(
                    "section direction must be up/down/both, got '{other}'"
                )))
            }
        };
        Ok(dyncopy_core::analysis::SectionSpec {
            coord: self.coord,
            level: self.level,
            lag: self.lag,
            direction,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DetectSection {
    pub min_cycles: usize,
    pub k_max: usize,
}

impl Default for DetectSection {
    fn default() -> Self {
        DetectSection {
            min_cycles: 3,
            k_max: 8,
        }
    }
}

pub fn parse_transfer(s: &str) -> CliResult<TransferKind> {
    match s {
        "tanh" => Ok(TransferKind::Tanh),
        "gauss" => Ok(TransferKind::Gauss),
        other => Err(CliError::Config(format!(
            "transfer must be tanh or gauss, got '{other}'"
        ))),
    }
}

// ---------------------------------------------------------------- classifier

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherSection {
    pub hidden: usize,
    pub design_bound: f64,
    pub proposal_scale: f64,
    pub max_steps: u64,
    /// Argmax-recognition check cadence.
    pub check_every: u64,
    pub target_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MnistSection {
    pub images: PathBuf,
    pub labels: PathBuf,
    /// Cap on the number of memories read from the files.
    pub limit: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    pub experiment: String,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_out_dir")]
    pub out_dir: PathBuf,
    /// Plain-text pattern file; ignored when `mnist` is present.
    pub patterns: PathBuf,
    pub classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mnist: Option<MnistSection>,
    pub teacher: TeacherSection,
    pub student_hidden: usize,
    pub student_transfer: String,
    pub probe_counts: Vec<usize>,
    /// "plus-minus" or "zero-one".
    pub probe_encoding: String,
    pub train: TrainSection,
}

impl ClassifierConfig {
    pub fn encoding(&self) -> CliResult<ProbeEncoding> {
        match self.probe_encoding.as_str() {
            "plus-minus" => Ok(ProbeEncoding::PlusMinus),
            "zero-one" => Ok(ProbeEncoding::ZeroOne),
            other => Err(CliError::Config(format!(
                "probe_encoding must be plus-minus or zero-one, got '{other}'"
            ))),
        }
    }

    fn validate(&self) -> CliResult<()> {
        self.encoding()?;
        parse_transfer(&self.student_transfer)?;
        self.train.validate("train")?;
        if self.probe_counts.is_empty() || self.probe_counts.iter().any(|&c| c == 0) {
            return Err(CliError::Config(
                "probe_counts must be nonempty and positive".into(),
            ));
        }
        if self.classes < 2 {
            return Err(CliError::Config("need at least two classes".into()));
        }
        Ok(())
    }
}

// ----------------------------------------------------------------------- dlm

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub count: usize,
    pub interval: f64,
    pub ranges: [[f64; 2]; 3],
    /// "velocity" or "flow-map".
    pub target: String,
    pub seed: u64,
}

impl SamplingSection {
    pub fn flow_target(&self) -> CliResult<FlowTarget> {
        match self.target.as_str() {
            "velocity" => Ok(FlowTarget::Velocity),
            "flow-map" => Ok(FlowTarget::FlowMap),
            other => Err(CliError::Config(format!(
                "sampling target must be velocity or flow-map, got '{other}'"
            ))),
        }
    }

    pub fn range_tuples(&self) -> [(f64, f64); 3] {
        [
            (self.ranges[0][0], self.ranges[0][1]),
            (self.ranges[1][0], self.ranges[1][1]),
            (self.ranges[2][0], self.ranges[2][1]),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DlmConfig {
    pub experiment: String,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub lorenz: LorenzSection,
    pub sampling: SamplingSection,
    pub hidden: usize,
    pub transfer: String,
    pub train: TrainSection,
    /// Settling time before the shared evaluation initial point is taken.
    pub eval_settle: f64,
    /// Length of the horizon comparison run.
    pub eval_duration: f64,
    pub eval_eps: f64,
    pub step: f64,
}

impl DlmConfig {
    fn validate(&self) -> CliResult<()> {
        parse_transfer(&self.transfer)?;
        self.sampling.flow_target()?;
        self.train.validate("train")
    }
}

// ---------------------------------------------------------------------- ddlm

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RecordSection {
    /// Transient skipped before recording starts.
    pub settle: f64,
    /// Length of the training record.
    pub duration: f64,
    pub gap: f64,
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DdlmConfig {
    pub experiment: String,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub lorenz: LorenzSection,
    pub record: RecordSection,
    pub taps: usize,
    pub hidden: usize,
    pub transfer: String,
    pub train: TrainSection,
    /// Length of the horizon comparison run past the training record.
    pub eval_duration: f64,
    pub eval_eps: f64,
    /// Length of the long free run used for the attractor projection.
    pub attractor_duration: f64,
    /// Delay used in the two-coordinate attractor projection.
    pub projection_lag: f64,
    pub step: f64,
}

impl DdlmConfig {
    fn validate(&self) -> CliResult<()> {
        parse_transfer(&self.transfer)?;
        self.train.validate("train")
    }
}

// -------------------------------------------------------------------- replay

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayEvolveSection {
    pub duration: f64,
    pub discard: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub from: f64,
    pub to: f64,
    pub count: usize,
    pub settle: f64,
    pub duration: f64,
}

fn d_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayConfig {
    pub experiment: String,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub lorenz: LorenzSection,
    pub record: RecordSection,
    pub taps: usize,
    /// Embed every n-th record: the machine's delay gap is
    /// `record.gap * embed_every` while the recorded series keeps its fine
    /// spacing for replay initialization.
    #[serde(default = "d_one")]
    pub embed_every: usize,
    pub hidden: usize,
    pub transfer: String,
    pub train: TrainSection,
    pub replay: ReplayEvolveSection,
    pub section: SectionSectionCfg,
    #[serde(default)]
    pub detect: DetectSection,
    /// Ground-truth bifurcation sweep along b (the comparison baseline).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl ReplayConfig {
    fn validate(&self) -> CliResult<()> {
        parse_transfer(&self.transfer)?;
        self.section.spec()?;
        self.train.validate("train")
    }
}

// -------------------------------------------------------------------- series

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub experiment: String,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_out_dir")]
    pub out_dir: PathBuf,
    /// Light-curve CSV (`time_days,magnitude`).
    pub input: PathBuf,
    pub bin_days: f64,
    /// Standardize the smoothed series before embedding; predictions are
    /// mapped back to the original scale on output.
    pub standardize: bool,
    pub taps: usize,
    pub hidden: usize,
    pub transfer: String,
    /// "dilm" (iterative) or "ddlm" (differential).
    pub variant: String,
    pub train: TrainSection,
    /// Number of records to predict past the training span.
    pub predict_records: usize,
    /// Replay evolution length per snapshot, in records.
    pub replay_records: usize,
    /// Records discarded as transient before sectioning.
    pub replay_discard: usize,
    /// Section level in standardized units; the lag is in records.
    pub section_level: f64,
    pub section_lag_records: usize,
    #[serde(default)]
    pub detect: DetectSection,
}

impl SeriesConfig {
    pub fn embed_target(&self) -> CliResult<EmbedTarget> {
        match self.variant.as_str() {
            "dilm" => Ok(EmbedTarget::NextValue),
            "ddlm" => Ok(EmbedTarget::Derivative),
            other => Err(CliError::Config(format!(
                "variant must be dilm or ddlm, got '{other}'"
            ))),
        }
    }

    fn validate(&self) -> CliResult<()> {
        parse_transfer(&self.transfer)?;
        self.embed_target()?;
        self.train.validate("train")
    }
}
