//! Unsupervised training on a small clustered corpus, then a look at which
//! frames the policy prefers.
//!
//! `cargo run --release --example train_synthetic`

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vsumm::policy_net::{forward, PolicyParams};
use vsumm::rewards::representativeness_reward;
use vsumm::synthgen::make_corpus;
use vsumm::trainer::{fit, TrainConfig};

fn main() -> vsumm::Result<()> {
    let corpus = make_corpus(3, 3, 3, 4, 0.05, 100);
    let videos: Vec<_> = corpus.iter().collect();
    let cfg = TrainConfig {
        learning_rate: 5e-2,
        hidden: 64,
        episodes: 30,
        epsilon: 0.34,
        beta_percentage: 3.0,
        max_epochs: 50,
        patience: 50,
        ..TrainConfig::default()
    };
    let result = fit(PolicyParams::new(4, cfg.hidden, cfg.seed), &videos, &cfg)?;
    for s in result
        .log
        .iter()
        .filter(|s| s.epoch == 1 || s.epoch % 10 == 0)
    {
        println!(
            "epoch {:>2}: reward {:.4} (div {:.4}, rep {:.4})",
            s.epoch, s.mean_reward, s.r_div, s.r_rep
        );
    }
    println!("best epoch {}", result.best_epoch);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for v in &corpus {
        let trace = forward(&result.best, v.features.view())?;
        let mut order: Vec<usize> = (0..trace.len()).collect();
        order.sort_by(|&a, &b| trace.probs[b].total_cmp(&trace.probs[a]));
        let top = &order[..3];
        let random: f64 = (0..100)
            .map(|_| {
                representativeness_reward(
                    v.features.view(),
                    &sample(&mut rng, trace.len(), 3).into_vec(),
                )
            })
            .sum::<f64>()
            / 100.0;
        println!(
            "{}: p = {:?}, top-3 {:?} R_rep {:.3} (random {:.3})",
            v.video_id,
            trace
                .probs
                .iter()
                .map(|p| (p * 100.0).round() / 100.0)
                .collect::<Vec<_>>(),
            top,
            representativeness_reward(v.features.view(), top),
            random
        );
    }
    Ok(())
}
