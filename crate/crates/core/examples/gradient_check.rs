//! Verifies the hand-written backward pass against central differences.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vsumm::numerics::{grad_check, ParamSet};
use vsumm::policy_net::{
    backward_reinforce, forward, log_prob_of, sample_actions, PolicyParams, RegularizerGrads,
};
use vsumm::trainer::{percentage_penalty, weight_penalty};

fn main() -> vsumm::Result<()> {
    let (steps, dim, hidden) = (8, 6, 8);
    let (beta1, beta2, epsilon) = (0.5, 0.01, 0.4);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Array2::from_shape_fn((steps, dim), |_| rng.random_range(-1.0..1.0));
    let mut params = PolicyParams::new(dim, hidden, 1);
    for t in params.set.tensors.iter_mut() {
        t.values.mapv_inplace(|v| v * 10.0);
    }

    let trace = forward(&params, x.view())?;
    let episodes: Vec<(Vec<bool>, f64)> = (0..3)
        .map(|n| (sample_actions(&trace, n), 1.0 - 0.6 * n as f64))
        .collect();
    let weighted: Vec<(&[bool], f64)> = episodes.iter().map(|(a, w)| (a.as_slice(), *w)).collect();
    let (_, dpct) = percentage_penalty(&trace.probs, epsilon);
    let dlogits = dpct
        .iter()
        .zip(&trace.probs)
        .map(|(g, p)| beta1 * g * p * (1.0 - p))
        .collect();
    backward_reinforce(
        &mut params,
        &trace,
        &weighted,
        &RegularizerGrads {
            dlogits: Some(dlogits),
            weight_scale: beta2,
        },
    )?;

    let objective = |set: &ParamSet| {
        let p = PolicyParams::from_set(set.clone()).expect("layout");
        let tr = forward(&p, x.view()).expect("forward");
        let loglik: f64 = episodes.iter().map(|(a, w)| w * log_prob_of(&tr, a)).sum();
        loglik + beta1 * percentage_penalty(&tr.probs, epsilon).0 + beta2 * weight_penalty(set).0
    };
    let err = grad_check(objective, &mut params.set, 1e-5)?;
    println!(
        "{} parameters, max relative error {err:.2e}",
        params.set.num_values()
    );
    Ok(())
}
