//! Supervised mode adds the log-likelihood of annotated keyframes to the
//! reward objective.

use vsumm::policy_net::{forward, PolicyParams};
use vsumm::synthgen::make_corpus;
use vsumm::trainer::{train_epoch, TrainConfig, TrainMode, TrainerState};

fn main() -> vsumm::Result<()> {
    let corpus = make_corpus(3, 3, 5, 8, 0.05, 200);
    let videos: Vec<_> = corpus.iter().collect();
    let cfg = TrainConfig {
        mode: TrainMode::Supervised,
        learning_rate: 1e-2,
        hidden: 32,
        beta_percentage: 10.0,
        epsilon: 0.2,
        mle_weight: 3.0,
        ..TrainConfig::default()
    };
    let mut params = PolicyParams::new(8, cfg.hidden, cfg.seed);
    let mut state = TrainerState::new(&params, &cfg);
    for _ in 0..100 {
        let stats = train_epoch(&mut params, &videos, &cfg, &mut state)?;
        if stats.epoch % 25 == 0 {
            println!("epoch {}: reward {:.4}", stats.epoch, stats.mean_reward);
        }
    }
    for v in &corpus {
        let keys = v.keyframe_indices.as_deref().unwrap_or_default();
        let p = forward(&params, v.features.view())?.probs;
        let marks: String = (0..p.len())
            .map(|t| if keys.contains(&t) { 'K' } else { '.' })
            .collect();
        let bars: String = p.iter().map(|&q| if q > 0.5 { '#' } else { '_' }).collect();
        println!(
            "{}  keyframes {marks}\n{:width$}  p > 0.5   {bars}",
            v.video_id,
            "",
            width = v.video_id.len()
        );
    }
    Ok(())
}
