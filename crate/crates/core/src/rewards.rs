//! Diversity and representativeness rewards for a set of selected frames.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

/// Default temporal window beyond which frame pairs count as fully dissimilar.
pub const DEFAULT_LAMBDA: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// `None` disables the temporal window (λ = ∞).
    pub lambda_window: Option<usize>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            lambda_window: Some(DEFAULT_LAMBDA),
        }
    }
}

impl RewardConfig {
    pub fn unbounded() -> Self {
        RewardConfig {
            lambda_window: None,
        }
    }

    pub fn with_lambda(lambda: usize) -> Self {
        RewardConfig {
            lambda_window: Some(lambda),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardValue {
    pub r_div: f64,
    pub r_rep: f64,
    pub total: f64,
}

/// Cosine dissimilarity `1 - cos(x, y)`; a zero-norm vector yields `1`.
pub fn dissimilarity(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let nx = x.dot(&x).sqrt();
    let ny = y.dot(&y).sqrt();
    if nx == 0.0 || ny == 0.0 {
        return 1.0;
    }
    1.0 - x.dot(&y) / (nx * ny)
}

/// Mean pairwise dissimilarity over ordered pairs of selected frames.
///
/// Pairs further apart than the λ window contribute `1`. Fewer than two
/// selected frames give `0`.
pub fn diversity_reward(features: ArrayView2<f64>, selected: &[usize], cfg: &RewardConfig) -> f64 {
    let n = selected.len();
    if n < 2 {
        return 0.0;
    }
    let norms: Vec<f64> = selected
        .iter()
        .map(|&t| features.row(t).dot(&features.row(t)).sqrt())
        .collect();
    let mut sum = 0.0;
    for (a, &t) in selected.iter().enumerate() {
        for b in (a + 1)..n {
            let u = selected[b];
            let far = cfg.lambda_window.is_some_and(|l| t.abs_diff(u) > l);
            let d = if far || norms[a] == 0.0 || norms[b] == 0.0 {
                1.0
            } else {
                1.0 - features.row(t).dot(&features.row(u)) / (norms[a] * norms[b])
            };
            // d is symmetric, so each unordered pair stands for two ordered pairs
            sum += 2.0 * d;
        }
    }
    sum / (n * (n - 1)) as f64
}

/// `exp(-mean_t min_{s ∈ selected} ‖x_t - x_s‖₂)`, a k-medoids style score.
///
/// Returns `0` for an empty selection.
pub fn representativeness_reward(features: ArrayView2<f64>, selected: &[usize]) -> f64 {
    if selected.is_empty() {
        return 0.0;
    }
    let steps = features.nrows();
    let mut total = 0.0;
    for t in 0..steps {
        let row = features.row(t);
        let nearest_sq = selected
            .iter()
            .map(|&s| {
                row.iter()
                    .zip(features.row(s).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        total += nearest_sq.sqrt();
    }
    (-total / steps as f64).exp()
}

pub fn selected_indices(actions: &[bool]) -> Vec<usize> {
    actions
        .iter()
        .enumerate()
        .filter_map(|(t, &a)| a.then_some(t))
        .collect()
}

/// Combined reward for an action sequence; an empty selection earns zero.
pub fn total_reward(
    features: ArrayView2<f64>,
    actions: &[bool],
    cfg: &RewardConfig,
) -> RewardValue {
    let selected = selected_indices(actions);
    if selected.is_empty() {
        return RewardValue::default();
    }
    let r_div = diversity_reward(features, &selected, cfg);
    let r_rep = representativeness_reward(features, &selected);
    RewardValue {
        r_div,
        r_rep,
        total: r_div + r_rep,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2, Array2};
    use proptest::prelude::*;

    #[test]
    fn dissimilarity_cases() {
        assert_eq!(
            dissimilarity(arr1(&[1.0, 0.0]).view(), arr1(&[1.0, 0.0]).view()),
            0.0
        );
        assert_eq!(
            dissimilarity(arr1(&[1.0, 0.0]).view(), arr1(&[0.0, 1.0]).view()),
            1.0
        );
        assert_eq!(
            dissimilarity(arr1(&[1.0, 0.0]).view(), arr1(&[-1.0, 0.0]).view()),
            2.0
        );
        assert_eq!(
            dissimilarity(arr1(&[0.0, 0.0]).view(), arr1(&[-1.0, 0.0]).view()),
            1.0
        );
    }

    #[test]
    fn diversity_examples() {
        let same = arr2(&[[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]);
        assert_eq!(
            diversity_reward(same.view(), &[0, 1, 2], &RewardConfig::unbounded()),
            0.0
        );

        let axes = arr2(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(
            diversity_reward(axes.view(), &[0, 1], &RewardConfig::unbounded()),
            1.0
        );

        let mut far = Array2::zeros((31, 2));
        far.column_mut(0).fill(1.0);
        assert_eq!(
            diversity_reward(far.view(), &[0, 30], &RewardConfig::with_lambda(20)),
            1.0
        );
        assert_eq!(
            diversity_reward(far.view(), &[0, 20], &RewardConfig::with_lambda(20)),
            0.0
        );
        assert_eq!(
            diversity_reward(far.view(), &[4], &RewardConfig::with_lambda(20)),
            0.0
        );
    }

    #[test]
    fn representativeness_examples() {
        let x = arr2(&[[0.0], [2.0]]);
        assert_eq!(representativeness_reward(x.view(), &[0, 1]), 1.0);
        assert!((representativeness_reward(x.view(), &[0]) - (-1.0f64).exp()).abs() < 1e-15);
        let same = Array2::from_elem((5, 3), 0.4);
        assert_eq!(representativeness_reward(same.view(), &[2]), 1.0);
    }

    #[test]
    fn total_reward_rules() {
        let same = arr2(&[[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]);
        let v = total_reward(same.view(), &[false; 4], &RewardConfig::default());
        assert_eq!(v, RewardValue::default());

        let v = total_reward(same.view(), &[true; 4], &RewardConfig::with_lambda(0));
        assert_eq!((v.r_div, v.r_rep, v.total), (1.0, 1.0, 2.0));

        let x = arr2(&[[0.0, 1.0], [1.0, 0.0], [3.0, 3.0]]);
        let v = total_reward(x.view(), &[false, true, false], &RewardConfig::default());
        assert_eq!(v.r_div, 0.0);
        assert_eq!(v.total, v.r_rep);
    }

    fn instance() -> impl Strategy<Value = (Array2<f64>, Vec<usize>)> {
        (2usize..14, 1usize..5).prop_flat_map(|(t, d)| {
            (
                proptest::collection::vec(-2.0f64..2.0, t * d)
                    .prop_map(move |v| Array2::from_shape_vec((t, d), v).unwrap()),
                proptest::collection::vec(any::<bool>(), t),
            )
                .prop_map(|(x, mask)| {
                    let sel = selected_indices(&mask);
                    (x, sel)
                })
        })
    }

    proptest! {
        #[test]
        fn rewards_stay_in_range((x, sel) in instance(), lambda in proptest::option::of(0usize..6)) {
            prop_assume!(!sel.is_empty());
            let cfg = RewardConfig { lambda_window: lambda };
            let div = diversity_reward(x.view(), &sel, &cfg);
            let rep = representativeness_reward(x.view(), &sel);
            prop_assert!((0.0..=2.0 + 1e-12).contains(&div));
            prop_assert!(rep > 0.0 && rep <= 1.0);
        }

        #[test]
        fn adding_a_frame_never_lowers_representativeness((x, sel) in instance(), extra in 0usize..14) {
            prop_assume!(!sel.is_empty());
            let extra = extra % x.nrows();
            let mut bigger = sel.clone();
            if !bigger.contains(&extra) {
                bigger.push(extra);
                bigger.sort_unstable();
            }
            prop_assert!(representativeness_reward(x.view(), &bigger) >= representativeness_reward(x.view(), &sel));
        }

        #[test]
        fn unbounded_diversity_ignores_frame_order((x, sel) in instance(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let t = x.nrows();
            let mut perm: Vec<usize> = (0..t).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            // frame t moves to position perm[t]
            let mut moved = Array2::zeros(x.raw_dim());
            for (src, &dst) in perm.iter().enumerate() {
                moved.row_mut(dst).assign(&x.row(src));
            }
            let mut moved_sel: Vec<usize> = sel.iter().map(|&s| perm[s]).collect();
            moved_sel.sort_unstable();
            let cfg = RewardConfig::unbounded();
            let a = diversity_reward(x.view(), &sel, &cfg);
            let b = diversity_reward(moved.view(), &moved_sel, &cfg);
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn full_representativeness_only_when_every_frame_is_covered((x, sel) in instance()) {
            prop_assume!(!sel.is_empty());
            let covered = (0..x.nrows()).all(|t| sel.iter().any(|&s| x.row(s) == x.row(t)));
            let rep = representativeness_reward(x.view(), &sel);
            prop_assert_eq!(rep == 1.0, covered);
        }
    }
}
