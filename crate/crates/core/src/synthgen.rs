//! Synthetic videos made of temporally contiguous feature clusters.
//!
//! Cluster `k` is centred on the unit axis `e_k`, so frames from different
//! clusters are (noise aside) orthogonal and their cosine dissimilarity is 1.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataio::VideoRecord;

/// Original frames per subsampled step (a 30 fps source sampled at 2 fps).
pub const FRAME_STRIDE: usize = 15;

/// Number of simulated annotators per video.
pub const N_USERS: usize = 3;

/// Builds a record with `n_clusters` blocks of `frames_per_cluster` steps.
///
/// Keyframes are the per-cluster medoids (minimum summed Euclidean distance to
/// the rest of the cluster). Annotator `u` marks, for every cluster, the
/// original frames of the step `u - 1` positions from the medoid (clamped to
/// the cluster). Every step is its own shot, so an annotator's pick is
/// exactly one shot.
pub fn make_clustered_video(
    n_clusters: usize,
    frames_per_cluster: usize,
    dim: usize,
    noise: f64,
    seed: u64,
) -> VideoRecord {
    assert!(
        n_clusters >= 1 && frames_per_cluster >= 1,
        "need at least one frame"
    );
    assert!(
        dim >= n_clusters,
        "feature dimension must be at least the cluster count"
    );
    let steps = n_clusters * frames_per_cluster;
    assert!(steps >= 2, "a video needs at least two frames");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite noise");
    let mut features = Array2::zeros((steps, dim));
    for t in 0..steps {
        features[[t, t / frames_per_cluster]] = 1.0;
        if noise > 0.0 {
            for v in features.row_mut(t).iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }

    let keyframes: Vec<usize> = (0..n_clusters)
        .map(|k| {
            let members = k * frames_per_cluster..(k + 1) * frames_per_cluster;
            members
                .clone()
                .min_by(|&a, &b| {
                    let cost = |i: usize| -> f64 {
                        members
                            .clone()
                            .map(|j| {
                                let diff = &features.row(i) - &features.row(j);
                                diff.dot(&diff).sqrt()
                            })
                            .sum()
                    };
                    cost(a).total_cmp(&cost(b))
                })
                .expect("nonempty cluster")
        })
        .collect();

    let n_frames_original = steps * FRAME_STRIDE;
    let picks: Vec<usize> = (0..steps).map(|t| t * FRAME_STRIDE).collect();
    let change_points = (0..steps)
        .map(|t| [t * FRAME_STRIDE, (t + 1) * FRAME_STRIDE - 1])
        .collect();
    let user_summaries = (0..N_USERS)
        .map(|u| {
            let mut row = vec![0u8; n_frames_original];
            for (k, &medoid) in keyframes.iter().enumerate() {
                let lo = k * frames_per_cluster;
                let hi = lo + frames_per_cluster - 1;
                let step =
                    (medoid as isize + u as isize - 1).clamp(lo as isize, hi as isize) as usize;
                row[step * FRAME_STRIDE..(step + 1) * FRAME_STRIDE].fill(1);
            }
            row
        })
        .collect();
    let gt_importance = (0..steps)
        .map(|t| {
            let mut center = ndarray::Array1::<f64>::zeros(dim);
            center[t / frames_per_cluster] = 1.0;
            let diff = &features.row(t) - &center;
            (-diff.dot(&diff).sqrt()).exp()
        })
        .collect();

    VideoRecord {
        video_id: format!("synth_{seed}"),
        features,
        n_frames_original,
        picks,
        change_points,
        user_summaries: Some(user_summaries),
        keyframe_indices: Some(keyframes),
        gt_importance: Some(gt_importance),
        dataset: Some("synthetic".into()),
    }
}

/// `count` videos with consecutive seeds starting at `seed`.
pub fn make_corpus(
    count: usize,
    n_clusters: usize,
    frames_per_cluster: usize,
    dim: usize,
    noise: f64,
    seed: u64,
) -> Vec<VideoRecord> {
    (0..count as u64)
        .map(|i| make_clustered_video(n_clusters, frames_per_cluster, dim, noise, seed + i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::representativeness_reward;

    #[test]
    fn records_are_valid_and_seeded() {
        let a = make_clustered_video(3, 8, 5, 0.05, 11);
        a.validate().unwrap();
        assert_eq!(a, make_clustered_video(3, 8, 5, 0.05, 11));
        assert_ne!(a.features, make_clustered_video(3, 8, 5, 0.05, 12).features);
        let keys = a.keyframe_indices.as_ref().unwrap();
        assert_eq!(keys.len(), 3);
        assert!(keys.iter().enumerate().all(|(k, &t)| t / 8 == k));
        assert_eq!(a.change_points.len(), 24);
        assert_eq!(a.change_points[1], [15, 29]);
    }

    #[test]
    fn noiseless_medoids_are_fully_representative() {
        let v = make_clustered_video(3, 6, 3, 0.0, 0);
        let keys = v.keyframe_indices.clone().unwrap();
        assert_eq!(representativeness_reward(v.features.view(), &keys), 1.0);
    }

    #[test]
    fn medoids_beat_every_same_size_subset() {
        // 3 clusters of 3 frames: enumerate all C(9, 3) subsets
        let v = make_clustered_video(3, 3, 3, 0.0, 0);
        let keys = v.keyframe_indices.clone().unwrap();
        let best = representativeness_reward(v.features.view(), &keys);
        for a in 0..9 {
            for b in (a + 1)..9 {
                for c in (b + 1)..9 {
                    assert!(best >= representativeness_reward(v.features.view(), &[a, b, c]));
                }
            }
        }
    }
}
