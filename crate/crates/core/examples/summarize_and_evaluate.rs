//! From probabilities to a keyshot summary and its F-score.

use vsumm::evaluation::{multi_user_prf, xcorr, Aggregation};
use vsumm::policy_net::{forward, PolicyParams};
use vsumm::summarizer::{generate_summary, SummaryExport};
use vsumm::synthgen::make_corpus;
use vsumm::trainer::{train_epoch, TrainConfig, TrainMode, TrainerState};

fn main() -> vsumm::Result<()> {
    let corpus = make_corpus(4, 3, 8, 6, 0.05, 20);
    let (train, test) = corpus.split_at(3);
    let cfg = TrainConfig {
        mode: TrainMode::Supervised,
        learning_rate: 1e-2,
        hidden: 32,
        beta_percentage: 10.0,
        epsilon: 0.15,
        mle_weight: 3.0,
        ..TrainConfig::default()
    };
    let mut policy = PolicyParams::new(6, cfg.hidden, 0);
    let mut state = TrainerState::new(&policy, &cfg);
    let videos: Vec<_> = train.iter().collect();
    for _ in 0..100 {
        train_epoch(&mut policy, &videos, &cfg, &mut state)?;
    }

    let video = &test[0];
    let probs = forward(&policy, video.features.view())?.probs;
    println!(
        "p = {:?}",
        probs
            .iter()
            .map(|p| (p * 100.0).round() / 100.0)
            .collect::<Vec<_>>()
    );
    println!("keyframes {:?}", video.keyframe_indices.as_ref().unwrap());
    let (shots, summary) = generate_summary(video, &probs, 0.15)?;
    println!(
        "{} shots, budget {} of {} frames",
        shots.shots.len(),
        (0.15 * video.n_frames_original as f64) as usize,
        video.n_frames_original
    );
    for &i in &summary.selected {
        let s = &shots.shots[i];
        println!(
            "  shot {i}: frames {}..={} score {:.3}",
            s.start, s.end, s.score
        );
    }

    let users = video.user_summaries.as_ref().unwrap();
    for mode in [Aggregation::Average, Aggregation::Max] {
        let prf = multi_user_prf(&summary.mask, users, mode)?;
        println!(
            "{mode:?}: P {:.3} R {:.3} F {:.3}",
            prf.precision, prf.recall, prf.f_score
        );
    }
    println!(
        "XCorr with ground-truth importance {:.3}",
        xcorr(&probs, video.gt_importance.as_ref().unwrap())?
    );

    let export = SummaryExport::new(video, &probs, 0.15, &shots, &summary);
    println!("mask as runs {:?}", export.mask_rle);
    Ok(())
}
