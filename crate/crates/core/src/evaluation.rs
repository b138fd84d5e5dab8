//! F-score evaluation against user summaries, and score-curve cross-correlation.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::VideoRecord;
use crate::error::{Error, Result};
use crate::policy_net::{forward, PolicyParams};
use crate::summarizer::generate_summary;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

/// How per-user F-scores collapse into one number per video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Average,
    Max,
}

impl Aggregation {
    /// Conventional choice per collection: `max` for SumMe, `average` otherwise.
    pub fn for_dataset(dataset: Option<&str>) -> Self {
        match dataset {
            Some(name) if name.to_ascii_lowercase().contains("summe") => Aggregation::Max,
            _ => Aggregation::Average,
        }
    }
}

/// Precision, recall and F of a machine mask against one user mask, as fractions.
pub fn fscore(machine: &[u8], user: &[u8]) -> Result<Prf> {
    if machine.len() != user.len() {
        return Err(Error::invariant(
            "summary mask",
            format!("length {} vs user length {}", machine.len(), user.len()),
        ));
    }
    let overlap = machine
        .iter()
        .zip(user)
        .filter(|(&m, &u)| m != 0 && u != 0)
        .count() as f64;
    let selected = machine.iter().filter(|&&m| m != 0).count() as f64;
    let relevant = user.iter().filter(|&&u| u != 0).count() as f64;
    let precision = if selected > 0.0 {
        overlap / selected
    } else {
        0.0
    };
    let recall = if relevant > 0.0 {
        overlap / relevant
    } else {
        0.0
    };
    let f_score = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Prf {
        precision,
        recall,
        f_score,
    })
}

/// Per-user scores reduced by `mode`; precision and recall come from the
/// same user that supplies the F (the best one under `Max`, averages under `Average`).
pub fn multi_user_prf(machine: &[u8], users: &[Vec<u8>], mode: Aggregation) -> Result<Prf> {
    if users.is_empty() {
        return Err(Error::invariant("user_summaries", "no annotators"));
    }
    let scores = users
        .iter()
        .map(|u| fscore(machine, u))
        .collect::<Result<Vec<_>>>()?;
    Ok(match mode {
        Aggregation::Average => {
            let n = scores.len() as f64;
            Prf {
                precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
                recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
                f_score: scores.iter().map(|s| s.f_score).sum::<f64>() / n,
            }
        }
        Aggregation::Max => *scores
            .iter()
            .fold(None::<&Prf>, |best, s| match best {
                Some(b) if b.f_score >= s.f_score => Some(b),
                _ => Some(s),
            })
            .expect("at least one user"),
    })
}

pub fn multi_user_fscore(machine: &[u8], users: &[Vec<u8>], mode: Aggregation) -> Result<f64> {
    Ok(multi_user_prf(machine, users, mode)?.f_score)
}

/// Zero-lag normalized cross-correlation of the mean-centred sequences.
///
/// A constant input gives `0`.
pub fn xcorr(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::invariant(
            "xcorr",
            format!("lengths {} and {} differ", pred.len(), gt.len()),
        ));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mg = gt.iter().sum::<f64>() / n;
    let (mut cross, mut vp, mut vg) = (0.0, 0.0, 0.0);
    for (p, g) in pred.iter().zip(gt) {
        let (dp, dg) = (p - mp, g - mg);
        cross += dp * dg;
        vp += dp * dp;
        vg += dg * dg;
    }
    if vp == 0.0 || vg == 0.0 {
        return Ok(0.0);
    }
    Ok((cross / (vp.sqrt() * vg.sqrt())).clamp(-1.0, 1.0))
}

/// Per-video scores in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoScore {
    pub video_id: String,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mode: Aggregation,
    pub videos: Vec<VideoScore>,
    /// Mean per-video F, in percent.
    pub mean_f_score: f64,
}

impl EvalResult {
    pub fn from_videos(mode: Aggregation, videos: Vec<VideoScore>) -> Self {
        let mean_f_score = if videos.is_empty() {
            0.0
        } else {
            videos.iter().map(|v| v.f_score).sum::<f64>() / videos.len() as f64
        };
        EvalResult {
            mode,
            videos,
            mean_f_score,
        }
    }
}

/// Scores one machine mask against a record's user summaries, in percent.
pub fn score_video(record: &VideoRecord, machine: &[u8], mode: Aggregation) -> Result<VideoScore> {
    let users = record.user_summaries.as_ref().ok_or_else(|| {
        Error::invariant(
            "user_summaries",
            format!("{} has no user summaries", record.video_id),
        )
    })?;
    let prf = multi_user_prf(machine, users, mode)?;
    Ok(VideoScore {
        video_id: record.video_id.clone(),
        precision: 100.0 * prf.precision,
        recall: 100.0 * prf.recall,
        f_score: 100.0 * prf.f_score,
    })
}

/// Summarizes and scores every test video with `params`.
///
/// `mode = None` picks the aggregation from each record's dataset name.
pub fn evaluate_fold(
    params: &PolicyParams,
    videos: &[&VideoRecord],
    mode: Option<Aggregation>,
    budget_fraction: f64,
) -> Result<EvalResult> {
    let mut scores = Vec::with_capacity(videos.len());
    let mut used = mode;
    for record in videos {
        let m = mode.unwrap_or_else(|| Aggregation::for_dataset(record.dataset.as_deref()));
        used.get_or_insert(m);
        let trace = forward(params, record.features.view())?;
        let (_, summary) = generate_summary(record, &trace.probs, budget_fraction)?;
        scores.push(score_video(record, &summary.mask, m)?);
    }
    Ok(EvalResult::from_videos(
        used.unwrap_or(Aggregation::Average),
        scores,
    ))
}

/// Mean of the per-fold means.
pub fn cross_validation_mean(folds: &[EvalResult]) -> f64 {
    if folds.is_empty() {
        return 0.0;
    }
    folds.iter().map(|f| f.mean_f_score).sum::<f64>() / folds.len() as f64
}

/// `video_id,precision,recall,f_score` rows with a leading `fold` column.
pub fn write_report_csv(folds: &[EvalResult], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "fold,video_id,precision,recall,f_score").expect("write to vec");
    for (i, fold) in folds.iter().enumerate() {
        for v in &fold.videos {
            writeln!(
                out,
                "{i},{},{:.6},{:.6},{:.6}",
                v.video_id, v.precision, v.recall, v.f_score
            )
            .expect("write to vec");
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub setting: String,
    pub mode: Option<Aggregation>,
    pub folds: Vec<EvalResult>,
    pub mean_f_score: f64,
}

pub fn write_report_json(report: &Report, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}
