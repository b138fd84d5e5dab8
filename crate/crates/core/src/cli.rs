//! Command-line front end: `train`, `summarize`, `eval`, `split` and `synth`.
//!
//! Every command resolves its options into a [`RunConfig`] (flags over the
//! `--config` TOML file over built-in defaults) and writes only under `--out`.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dataio::{
    augmented_split, load_dataset_dir, make_folds, transfer_split, write_video_to_dir, SplitSpec,
    VideoRecord,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    cross_validation_mean, evaluate_fold, write_report_csv, write_report_json, Aggregation,
    EvalResult, Report,
};
use crate::numerics::{load_checkpoint, save_checkpoint};
use crate::policy_net::{forward, PolicyParams};
use crate::rewards::RewardConfig;
use crate::summarizer::{generate_summary, SummaryExport, DEFAULT_BUDGET_FRACTION};
use crate::synthgen::make_corpus;
use crate::trainer::{fit, write_reward_log, TrainConfig, TrainMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;

/// Folds used when no split file is given.
pub const DEFAULT_FOLDS: usize = 5;

pub const CHECKPOINT_FILE: &str = "checkpoint.fvsp";
pub const REWARD_LOG_FILE: &str = "rewards.csv";
pub const SPLIT_FILE: &str = "split.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// k-fold cross validation over all loaded videos.
    #[default]
    Canonical,
    /// k-fold over the first `--data` directory; the others only add training videos.
    Augmented,
    /// Test on the first `--data` directory, train on the others.
    Transfer,
}

impl Setting {
    pub fn name(self) -> &'static str {
        match self {
            Setting::Canonical => "canonical",
            Setting::Augmented => "augmented",
            Setting::Transfer => "transfer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum ModeArg {
    #[value(name = "unsup")]
    #[serde(rename = "unsup")]
    Unsup,
    #[value(name = "sup")]
    #[serde(rename = "sup")]
    Sup,
}

impl From<ModeArg> for TrainMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Unsup => TrainMode::Unsupervised,
            ModeArg::Sup => TrainMode::Supervised,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "vsumm",
    version,
    about = "Train, apply and evaluate a reinforcement-learned video summarizer"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one policy per fold; writes fold_<i>/checkpoint.fvsp and rewards.csv.
    Train(CommonArgs),
    /// Write summaries/<video_id>.json for every loaded video.
    Summarize(CommonArgs),
    /// Score per-fold checkpoints; writes report.csv and report.json.
    Eval(CommonArgs),
    /// Write the resolved split to split.json.
    Split(CommonArgs),
    /// Write a synthetic clustered corpus.
    Synth(SynthArgs),
}

/// Options shared by the data-driven commands. Anything left unset falls back
/// to the `--config` file and then to the defaults.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommonArgs {
    /// Dataset directory of .fvs/.json pairs; repeatable.
    #[arg(long = "data", value_name = "DIR")]
    pub data: Vec<PathBuf>,
    /// JSON split file (array of {"train": [...], "test": [...]}).
    #[arg(long, value_name = "FILE")]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub setting: Option<Setting>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Temporal window of the diversity reward.
    #[arg(long)]
    pub lambda: Option<usize>,
    /// Target selection fraction.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Weight of the selection-percentage penalty.
    #[arg(long)]
    pub beta1: Option<f64>,
    /// Weight of the l2 weight penalty.
    #[arg(long)]
    pub beta2: Option<f64>,
    /// Keyframe log-likelihood weight in supervised mode.
    #[arg(long)]
    pub mle_weight: Option<f64>,
    /// Summary length as a fraction of the video.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Multi-annotator aggregation; by default chosen per dataset.
    #[arg(long, value_enum)]
    pub aggregation: Option<AggregationArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Checkpoint file, or a training output directory holding fold_<i>/.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// TOML file with any of the options above (keys as flag names, `-` as `_`).
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationArg {
    Average,
    Max,
}

impl From<AggregationArg> for Aggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::Average => Aggregation::Average,
            AggregationArg::Max => Aggregation::Max,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub videos: usize,
    #[arg(long, default_value_t = 3)]
    pub clusters: usize,
    #[arg(long, default_value_t = 10)]
    pub frames_per_cluster: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Fully resolved options for one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: Vec<PathBuf>,
    pub split: Option<PathBuf>,
    pub setting: Setting,
    pub train: TrainConfig,
    pub budget: f64,
    pub aggregation: Option<Aggregation>,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
}

impl CommonArgs {
    /// Fills unset fields from `base`.
    fn or(self, base: CommonArgs) -> CommonArgs {
        CommonArgs {
            data: if self.data.is_empty() {
                base.data
            } else {
                self.data
            },
            split: self.split.or(base.split),
            setting: self.setting.or(base.setting),
            mode: self.mode.or(base.mode),
            lambda: self.lambda.or(base.lambda),
            epsilon: self.epsilon.or(base.epsilon),
            episodes: self.episodes.or(base.episodes),
            hidden: self.hidden.or(base.hidden),
            epochs: self.epochs.or(base.epochs),
            patience: self.patience.or(base.patience),
            lr: self.lr.or(base.lr),
            beta1: self.beta1.or(base.beta1),
            beta2: self.beta2.or(base.beta2),
            mle_weight: self.mle_weight.or(base.mle_weight),
            budget: self.budget.or(base.budget),
            aggregation: self.aggregation.or(base.aggregation),
            seed: self.seed.or(base.seed),
            out: self.out.or(base.out),
            checkpoint: self.checkpoint.or(base.checkpoint),
            config: self.config,
        }
    }

    /// Applies the config file (if any) and defaults, then validates.
    pub fn resolve(self) -> Result<RunConfig> {
        let merged = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                let file: CommonArgs = toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                self.or(file)
            }
            None => self,
        };
        let defaults = TrainConfig::default();
        let train = TrainConfig {
            learning_rate: merged.lr.unwrap_or(defaults.learning_rate),
            beta_percentage: merged.beta1.unwrap_or(defaults.beta_percentage),
            beta_weight: merged.beta2.unwrap_or(defaults.beta_weight),
            epsilon: merged.epsilon.unwrap_or(defaults.epsilon),
            episodes: merged.episodes.unwrap_or(defaults.episodes),
            reward: merged
                .lambda
                .map(RewardConfig::with_lambda)
                .unwrap_or(defaults.reward),
            hidden: merged.hidden.unwrap_or(defaults.hidden),
            max_epochs: merged.epochs.unwrap_or(defaults.max_epochs),
            patience: merged.patience.unwrap_or(defaults.patience),
            seed: merged.seed.unwrap_or(defaults.seed),
            mode: merged.mode.map(TrainMode::from).unwrap_or(defaults.mode),
            mle_weight: merged.mle_weight.unwrap_or(defaults.mle_weight),
            ..defaults
        };
        let cfg = RunConfig {
            data: merged.data,
            split: merged.split,
            setting: merged.setting.unwrap_or_default(),
            train,
            budget: merged.budget.unwrap_or(DEFAULT_BUDGET_FRACTION),
            aggregation: merged.aggregation.map(Aggregation::from),
            out: merged
                .out
                .ok_or_else(|| Error::Config("--out is required".into()))?,
            checkpoint: merged.checkpoint,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    /// Checks numeric ranges and that referenced inputs exist.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.budget > 0.0 && self.budget <= 1.0) {
            return Err(Error::Config(format!(
                "budget {} must lie in (0, 1]",
                self.budget
            )));
        }
        if self.data.is_empty() {
            return Err(Error::Config(
                "at least one --data directory is required".into(),
            ));
        }
        for dir in &self.data {
            if !dir.is_dir() {
                return Err(Error::Config(format!(
                    "data directory {} does not exist",
                    dir.display()
                )));
            }
        }
        if let Some(split) = &self.split {
            if !split.is_file() {
                return Err(Error::Config(format!(
                    "split file {} does not exist",
                    split.display()
                )));
            }
        }
        if self.split.is_none() && self.setting != Setting::Canonical && self.data.len() < 2 {
            return Err(Error::Config(format!(
                "the {} setting needs at least two --data directories",
                self.setting.name()
            )));
        }
        Ok(())
    }

    pub fn fold_dir(&self, fold: usize) -> PathBuf {
        self.out.join(format!("fold_{fold}"))
    }

    /// Checkpoint used for `fold`: an explicit file, `<dir>/fold_<i>/` of an
    /// explicit directory, or this run's own training output.
    pub fn checkpoint_for(&self, fold: usize) -> PathBuf {
        match &self.checkpoint {
            Some(p) if p.is_dir() => p.join(format!("fold_{fold}")).join(CHECKPOINT_FILE),
            Some(p) => p.clone(),
            None => self.fold_dir(fold).join(CHECKPOINT_FILE),
        }
    }
}

/// Videos loaded from every `--data` directory, grouped by directory.
pub struct Corpus {
    pub groups: Vec<Vec<VideoRecord>>,
    by_id: HashMap<String, (usize, usize)>,
}

impl Corpus {
    pub fn load(dirs: &[PathBuf]) -> Result<Self> {
        let mut groups = Vec::with_capacity(dirs.len());
        let mut by_id = HashMap::new();
        for (g, dir) in dirs.iter().enumerate() {
            let records = load_dataset_dir(dir)?;
            if records.is_empty() {
                return Err(Error::invariant(
                    "data",
                    format!("{} holds no videos", dir.display()),
                ));
            }
            for (i, r) in records.iter().enumerate() {
                if by_id.insert(r.video_id.clone(), (g, i)).is_some() {
                    return Err(Error::invariant(
                        "video_id",
                        format!("{} appears more than once", r.video_id),
                    ));
                }
            }
            groups.push(records);
        }
        Ok(Corpus { groups, by_id })
    }

    pub fn get(&self, id: &str) -> Result<&VideoRecord> {
        let &(g, i) = self
            .by_id
            .get(id)
            .ok_or_else(|| Error::invariant("split", format!("unknown video id {id}")))?;
        Ok(&self.groups[g][i])
    }

    pub fn ids(&self, group: usize) -> Vec<String> {
        self.groups[group]
            .iter()
            .map(|r| r.video_id.clone())
            .collect()
    }

    pub fn all(&self) -> impl Iterator<Item = &VideoRecord> {
        self.groups.iter().flatten()
    }

    pub fn select(&self, ids: &[String]) -> Result<Vec<&VideoRecord>> {
        ids.iter().map(|id| self.get(id)).collect()
    }
}

/// The split file if given, otherwise one derived from the setting.
pub fn resolve_split(cfg: &RunConfig, corpus: &Corpus) -> Result<SplitSpec> {
    if let Some(path) = &cfg.split {
        return SplitSpec::load(path, cfg.setting.name());
    }
    let rest: Vec<String> = (1..corpus.groups.len())
        .flat_map(|g| corpus.ids(g))
        .collect();
    match cfg.setting {
        Setting::Canonical => {
            let ids: Vec<String> = (0..corpus.groups.len())
                .flat_map(|g| corpus.ids(g))
                .collect();
            make_folds(&ids, DEFAULT_FOLDS, cfg.train.seed)
        }
        Setting::Augmented => augmented_split(&corpus.ids(0), &rest, DEFAULT_FOLDS, cfg.train.seed),
        Setting::Transfer => transfer_split(&corpus.ids(0), &rest),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn feature_dim(videos: &[&VideoRecord]) -> Result<usize> {
    let dim = videos
        .first()
        .map(|v| v.feature_dim())
        .ok_or_else(|| Error::Config("empty training set".into()))?;
    if let Some(v) = videos.iter().find(|v| v.feature_dim() != dim) {
        return Err(Error::invariant(
            "features",
            format!(
                "{} has width {}, expected {dim}",
                v.video_id,
                v.feature_dim()
            ),
        ));
    }
    Ok(dim)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutput {
    pub checkpoint: PathBuf,
    pub reward_log: PathBuf,
    pub best_epoch: usize,
}

/// Trains one policy per fold of the resolved split.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<FoldOutput>> {
    let corpus = Corpus::load(&cfg.data)?;
    let split = resolve_split(cfg, &corpus)?;
    create_dir(&cfg.out)?;
    split.save(&cfg.out.join(SPLIT_FILE))?;
    let mut outputs = Vec::with_capacity(split.folds.len());
    for (i, fold) in split.folds.iter().enumerate() {
        let train = corpus.select(&fold.train)?;
        let fold_cfg = TrainConfig {
            seed: cfg.train.seed.wrapping_add(i as u64),
            ..cfg.train.clone()
        };
        let params = PolicyParams::new(feature_dim(&train)?, fold_cfg.hidden, fold_cfg.seed);
        let result = fit(params, &train, &fold_cfg)?;
        let dir = cfg.fold_dir(i);
        create_dir(&dir)?;
        let checkpoint = dir.join(CHECKPOINT_FILE);
        let reward_log = dir.join(REWARD_LOG_FILE);
        save_checkpoint(&result.best.set, &checkpoint)?;
        write_reward_log(&result.log, &reward_log)?;
        eprintln!(
            "fold {i}: {} train videos, {} epochs, best epoch {}",
            train.len(),
            result.log.len(),
            result.best_epoch
        );
        outputs.push(FoldOutput {
            checkpoint,
            reward_log,
            best_epoch: result.best_epoch,
        });
    }
    Ok(outputs)
}

fn load_policy(path: &Path) -> Result<PolicyParams> {
    if !path.is_file() {
        return Err(Error::Config(format!(
            "checkpoint {} does not exist",
            path.display()
        )));
    }
    PolicyParams::from_set(load_checkpoint(path)?)
}

/// Summarizes every loaded video with one checkpoint.
pub fn cmd_summarize(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let checkpoint = cfg
        .checkpoint
        .as_ref()
        .filter(|p| p.is_file())
        .ok_or_else(|| {
            Error::Config("summarize needs --checkpoint pointing at a checkpoint file".into())
        })?;
    let params = load_policy(checkpoint)?;
    let corpus = Corpus::load(&cfg.data)?;
    let dir = cfg.out.join("summaries");
    create_dir(&dir)?;
    let mut written = Vec::new();
    for record in corpus.all() {
        let trace = forward(&params, record.features.view())?;
        let (shots, mask) = generate_summary(record, &trace.probs, cfg.budget)?;
        let export = SummaryExport::new(record, &trace.probs, cfg.budget, &shots, &mask);
        let path = dir.join(format!("{}.json", record.video_id));
        let json = serde_json::to_string_pretty(&export).map_err(|source| Error::Json {
            path: path.clone(),
            source,
        })?;
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Scores each fold's test videos with that fold's checkpoint.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Report> {
    let corpus = Corpus::load(&cfg.data)?;
    let split = resolve_split(cfg, &corpus)?;
    let mut folds: Vec<EvalResult> = Vec::with_capacity(split.folds.len());
    for (i, fold) in split.folds.iter().enumerate() {
        let params = load_policy(&cfg.checkpoint_for(i))?;
        let test = corpus.select(&fold.test)?;
        folds.push(evaluate_fold(&params, &test, cfg.aggregation, cfg.budget)?);
    }
    let report = Report {
        setting: split.name.clone(),
        mode: cfg.aggregation,
        mean_f_score: cross_validation_mean(&folds),
        folds,
    };
    create_dir(&cfg.out)?;
    write_report_csv(&report.folds, &cfg.out.join("report.csv"))?;
    write_report_json(&report, &cfg.out.join("report.json"))?;
    Ok(report)
}

pub fn cmd_split(cfg: &RunConfig) -> Result<PathBuf> {
    let corpus = Corpus::load(&cfg.data)?;
    let split = resolve_split(cfg, &corpus)?;
    create_dir(&cfg.out)?;
    let path = cfg.out.join(SPLIT_FILE);
    split.save(&path)?;
    Ok(path)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Vec<PathBuf>> {
    if args.clusters == 0
        || args.frames_per_cluster == 0
        || args.clusters * args.frames_per_cluster < 2
    {
        return Err(Error::Config(
            "a synthetic video needs at least two frames".into(),
        ));
    }
    if args.dim < args.clusters {
        return Err(Error::Config(format!(
            "dim {} is smaller than the cluster count {}",
            args.dim, args.clusters
        )));
    }
    if !(args.noise >= 0.0 && args.noise.is_finite()) {
        return Err(Error::Config(format!(
            "noise {} must be finite and non-negative",
            args.noise
        )));
    }
    create_dir(&args.out)?;
    make_corpus(
        args.videos,
        args.clusters,
        args.frames_per_cluster,
        args.dim,
        args.noise,
        args.seed,
    )
    .iter()
    .map(|r| write_video_to_dir(r, &args.out))
    .collect()
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io { .. } | Error::Format { .. } | Error::Invariant { .. } | Error::Json { .. } => {
            EXIT_DATA
        }
        Error::NonFinite { .. } => EXIT_FAILURE,
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let folds = cmd_train(&cfg)?;
            println!("trained {} fold(s) into {}", folds.len(), cfg.out.display());
        }
        Command::Summarize(args) => {
            let cfg = args.resolve()?;
            let written = cmd_summarize(&cfg)?;
            println!(
                "wrote {} summaries into {}",
                written.len(),
                cfg.out.join("summaries").display()
            );
        }
        Command::Eval(args) => {
            let cfg = args.resolve()?;
            let report = cmd_eval(&cfg)?;
            for (i, fold) in report.folds.iter().enumerate() {
                println!("fold {i}: F = {:.2}", fold.mean_f_score);
            }
            println!("{} mean F = {:.2}", report.setting, report.mean_f_score);
        }
        Command::Split(args) => {
            let cfg = args.resolve()?;
            println!("{}", cmd_split(&cfg)?.display());
        }
        Command::Synth(args) => {
            let written = cmd_synth(&args)?;
            println!("wrote {} videos into {}", written.len(), args.out.display());
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
