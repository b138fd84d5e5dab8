//! Episodic REINFORCE training of the selection policy.
//!
//! Per video and step: one forward pass, `N` Bernoulli episodes sampled from
//! that pass, rewards for each, and one Adam update on
//! `-J + β₁ L_percentage + β₂ L_weight` (minus `μ L_MLE` in supervised mode),
//! where `J`'s gradient uses a moving-average reward baseline.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::VideoRecord;
use crate::error::{Error, Result};
use crate::numerics::{adam_step, AdamConfig, AdamState, ParamKind, ParamSet};
use crate::policy_net::{
    backward_reinforce, forward, sample_actions_with, ForwardTrace, PolicyParams, RegularizerGrads,
    PROB_CLAMP,
};
use crate::rewards::{total_reward, RewardConfig, RewardValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Unsupervised,
    Supervised,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineScope {
    /// One running average per training video.
    PerVideo,
    /// A single running average shared by all videos.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Weight of the selection-percentage penalty.
    pub beta_percentage: f64,
    /// Weight of the l2 penalty on weight matrices.
    pub beta_weight: f64,
    /// Target fraction of selected frames.
    pub epsilon: f64,
    pub episodes: usize,
    pub reward: RewardConfig,
    pub hidden: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub mode: TrainMode,
    /// Weight of the keyframe log-likelihood in supervised mode.
    pub mle_weight: f64,
    pub baseline_decay: f64,
    pub baseline_scope: BaselineScope,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            beta_percentage: 0.01,
            beta_weight: 1e-5,
            epsilon: 0.5,
            episodes: 5,
            reward: RewardConfig::default(),
            hidden: 256,
            max_epochs: 60,
            patience: 10,
            seed: 0,
            mode: TrainMode::Unsupervised,
            mle_weight: 1.0,
            baseline_decay: 0.9,
            baseline_scope: BaselineScope::PerVideo,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon {} must lie in (0, 1)", self.epsilon));
        }
        if self.episodes == 0 {
            return bad("episodes must be at least 1".into());
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if self.hidden == 0 {
            return bad("hidden size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate {} must be positive",
                self.learning_rate
            ));
        }
        if self.beta_percentage < 0.0 || self.beta_weight < 0.0 || self.mle_weight < 0.0 {
            return bad("regularizer weights must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return bad(format!(
                "baseline decay {} must lie in [0, 1)",
                self.baseline_decay
            ));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

/// `b ← decay · b + (1 - decay) · mean_reward`
pub fn update_baseline(b: &mut f64, decay: f64, mean_reward: f64) {
    *b = decay * *b + (1.0 - decay) * mean_reward;
}

/// Moving-average reward baselines, starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineState {
    pub decay: f64,
    pub scope: BaselineScope,
    values: BTreeMap<String, f64>,
}

impl BaselineState {
    const GLOBAL_KEY: &'static str = "*";

    pub fn new(decay: f64, scope: BaselineScope) -> Self {
        BaselineState {
            decay,
            scope,
            values: BTreeMap::new(),
        }
    }

    fn key<'a>(&self, video_id: &'a str) -> &'a str {
        match self.scope {
            BaselineScope::PerVideo => video_id,
            BaselineScope::Global => Self::GLOBAL_KEY,
        }
    }

    pub fn get(&self, video_id: &str) -> f64 {
        self.values.get(self.key(video_id)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, video_id: &str, value: f64) {
        let key = self.key(video_id).to_string();
        self.values.insert(key, value);
    }

    pub fn update(&mut self, video_id: &str, mean_reward: f64) {
        let key = self.key(video_id).to_string();
        let decay = self.decay;
        update_baseline(self.values.entry(key).or_insert(0.0), decay, mean_reward);
    }
}

/// `‖mean(p) - ε‖²` and its gradient with respect to each `p_t`.
pub fn percentage_penalty(probs: &[f64], epsilon: f64) -> (f64, Vec<f64>) {
    let t = probs.len() as f64;
    let gap = probs.iter().sum::<f64>() / t - epsilon;
    (gap * gap, vec![2.0 * gap / t; probs.len()])
}

/// `Σ θ²` over weight matrices (biases excluded) and its gradient `2θ`.
pub fn weight_penalty(params: &ParamSet) -> (f64, Vec<Array2<f64>>) {
    let mut value = 0.0;
    let grads = params
        .tensors
        .iter()
        .map(|t| match t.kind {
            ParamKind::Weight => {
                value += t.values.iter().map(|v| v * v).sum::<f64>();
                t.values.mapv(|v| 2.0 * v)
            }
            ParamKind::Bias => Array2::zeros(t.values.raw_dim()),
        })
        .collect();
    (value, grads)
}

/// `Σ_{t ∈ keyframes} log p_t` (to be maximized) and its gradient with respect
/// to the logits, `1 - p_t` on keyframes and zero elsewhere.
pub fn supervised_loss(trace: &ForwardTrace, keyframes: &[usize]) -> Result<(f64, Vec<f64>)> {
    if keyframes.is_empty() {
        return Err(Error::invariant(
            "keyframe_indices",
            "supervised loss needs at least one keyframe",
        ));
    }
    let mut grad = vec![0.0; trace.len()];
    let mut value = 0.0;
    for &k in keyframes {
        let p = *trace.probs.get(k).ok_or_else(|| {
            Error::invariant(
                "keyframe_indices",
                format!("index {k} outside the sequence"),
            )
        })?;
        value += p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln();
        grad[k] += 1.0 - p;
    }
    Ok((value, grad))
}

/// One sampled action sequence and its reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub actions: Vec<bool>,
    pub selected: Vec<usize>,
    pub reward: RewardValue,
}

pub fn sample_episodes(
    trace: &ForwardTrace,
    n: usize,
    reward: &RewardConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Episode> {
    (0..n)
        .map(|_| {
            let actions = sample_actions_with(&trace.probs, rng);
            let reward = total_reward(trace.inputs.view(), &actions, reward);
            let selected = crate::rewards::selected_indices(&actions);
            Episode {
                actions,
                selected,
                reward,
            }
        })
        .collect()
}

/// Flat REINFORCE estimate `(1/N) Σ_n (R_n - b) Σ_t ∇ log π(a_t)` at `params`.
pub fn policy_gradient_estimate(
    params: &PolicyParams,
    trace: &ForwardTrace,
    episodes: &[Episode],
    baseline: f64,
) -> Result<Vec<f64>> {
    let mut p = params.clone();
    p.set.zero_grad();
    let n = episodes.len() as f64;
    let weighted: Vec<(&[bool], f64)> = episodes
        .iter()
        .map(|e| (e.actions.as_slice(), (e.reward.total - baseline) / n))
        .collect();
    backward_reinforce(&mut p, trace, &weighted, &RegularizerGrads::default())?;
    Ok(p.set.flat_grad())
}

/// Per-video losses and rewards gathered while accumulating its gradient.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VideoStats {
    pub mean_reward: f64,
    pub r_div: f64,
    pub r_rep: f64,
    pub pct_loss: f64,
    pub wt_loss: f64,
    pub mle: f64,
}

/// Accumulates the gradient of the training loss for one video into
/// `params.set` without stepping the optimizer.
pub fn accumulate_video_gradient(
    params: &mut PolicyParams,
    record: &VideoRecord,
    cfg: &TrainConfig,
    baseline: f64,
    rng: &mut ChaCha8Rng,
) -> Result<VideoStats> {
    let trace = forward(params, record.features.view())?;
    let episodes = sample_episodes(&trace, cfg.episodes, &cfg.reward, rng);
    let n = episodes.len() as f64;

    let (pct_loss, dpct) = percentage_penalty(&trace.probs, cfg.epsilon);
    let mut dlogits: Vec<f64> = dpct
        .iter()
        .zip(&trace.probs)
        .map(|(g, p)| cfg.beta_percentage * g * p * (1.0 - p))
        .collect();
    let mut mle = 0.0;
    if cfg.mode == TrainMode::Supervised {
        let keys = record.keyframe_indices.as_deref().ok_or_else(|| {
            Error::invariant(
                "keyframe_indices",
                format!(
                    "{} has no keyframes for supervised training",
                    record.video_id
                ),
            )
        })?;
        let (value, grad) = supervised_loss(&trace, keys)?;
        mle = value;
        for (d, g) in dlogits.iter_mut().zip(grad) {
            *d -= cfg.mle_weight * g;
        }
    }

    let weighted: Vec<(&[bool], f64)> = episodes
        .iter()
        .map(|e| (e.actions.as_slice(), -(e.reward.total - baseline) / n))
        .collect();
    let reg = RegularizerGrads {
        dlogits: Some(dlogits),
        weight_scale: cfg.beta_weight,
    };
    backward_reinforce(params, &trace, &weighted, &reg)?;

    let (wt_loss, _) = weight_penalty(&params.set);
    let mean = |f: fn(&RewardValue) -> f64| episodes.iter().map(|e| f(&e.reward)).sum::<f64>() / n;
    let stats = VideoStats {
        mean_reward: mean(|r| r.total),
        r_div: mean(|r| r.r_div),
        r_rep: mean(|r| r.r_rep),
        pct_loss,
        wt_loss,
        mle,
    };
    if [stats.mean_reward, stats.pct_loss, stats.wt_loss, stats.mle]
        .iter()
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite {
            name: format!("training loss on {}", record.video_id),
        });
    }
    Ok(stats)
}

/// One row of the reward log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_reward: f64,
    pub r_div: f64,
    pub r_rep: f64,
    pub pct_loss: f64,
    pub wt_loss: f64,
}

/// Everything that persists across epochs of one training run.
#[derive(Debug, Clone)]
pub struct TrainerState {
    pub adam: AdamState,
    pub baseline: BaselineState,
    pub rng: ChaCha8Rng,
    pub epoch: usize,
}

impl TrainerState {
    pub fn new(params: &PolicyParams, cfg: &TrainConfig) -> Self {
        TrainerState {
            adam: AdamState::new(&params.set, cfg.adam()),
            baseline: BaselineState::new(cfg.baseline_decay, cfg.baseline_scope),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005e_ed0f_e905),
            epoch: 0,
        }
    }
}

/// One pass over `videos` in a freshly shuffled order, one Adam step per video.
pub fn train_epoch(
    params: &mut PolicyParams,
    videos: &[&VideoRecord],
    cfg: &TrainConfig,
    state: &mut TrainerState,
) -> Result<EpochStats> {
    if videos.is_empty() {
        return Err(Error::Config("no training videos".into()));
    }
    let mut order: Vec<usize> = (0..videos.len()).collect();
    order.shuffle(&mut state.rng);
    let mut sums = VideoStats::default();
    for &i in &order {
        let record = videos[i];
        params.set.zero_grad();
        let b = state.baseline.get(&record.video_id);
        let s = accumulate_video_gradient(params, record, cfg, b, &mut state.rng)?;
        adam_step(&mut params.set, &mut state.adam)?;
        state.baseline.update(&record.video_id, s.mean_reward);
        sums.mean_reward += s.mean_reward;
        sums.r_div += s.r_div;
        sums.r_rep += s.r_rep;
        sums.pct_loss += s.pct_loss;
        sums.wt_loss += s.wt_loss;
    }
    state.epoch += 1;
    let n = videos.len() as f64;
    Ok(EpochStats {
        epoch: state.epoch,
        mean_reward: sums.mean_reward / n,
        r_div: sums.r_div / n,
        r_rep: sums.r_rep / n,
        pct_loss: sums.pct_loss / n,
        wt_loss: sums.wt_loss / n,
    })
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Parameters at the epoch with the highest mean reward.
    pub best: PolicyParams,
    pub best_epoch: usize,
    pub log: Vec<EpochStats>,
    pub stopped_early: bool,
}

/// Trains from `params` until `max_epochs`, or until the mean reward has not
/// improved for `patience` consecutive epochs.
pub fn fit(params: PolicyParams, videos: &[&VideoRecord], cfg: &TrainConfig) -> Result<FitResult> {
    cfg.validate()?;
    if videos.is_empty() {
        return Err(Error::Config("no training videos".into()));
    }
    if let Some(v) = videos
        .iter()
        .find(|v| v.feature_dim() != params.input_dim())
    {
        return Err(Error::invariant(
            "features",
            format!(
                "{} has width {}, policy expects {}",
                v.video_id,
                v.feature_dim(),
                params.input_dim()
            ),
        ));
    }
    let mut params = params;
    let mut state = TrainerState::new(&params, cfg);
    let mut log = Vec::new();
    let mut best = params.clone();
    let mut best_reward = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut stopped_early = false;
    for _ in 0..cfg.max_epochs {
        let stats = train_epoch(&mut params, videos, cfg, &mut state)?;
        log.push(stats);
        if stats.mean_reward > best_reward {
            best_reward = stats.mean_reward;
            best_epoch = stats.epoch;
            best = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    best.set.zero_grad();
    Ok(FitResult {
        best,
        best_epoch,
        log,
        stopped_early,
    })
}

pub const REWARD_LOG_HEADER: &str = "epoch,mean_reward,r_div,r_rep,pct_loss,wt_loss";

pub fn write_reward_log(log: &[EpochStats], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "{REWARD_LOG_HEADER}").expect("write to vec");
    for s in log {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.epoch, s.mean_reward, s.r_div, s.r_rep, s.pct_loss, s.wt_loss
        )
        .expect("write to vec");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
