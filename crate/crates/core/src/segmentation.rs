//! Kernel temporal segmentation.
//!
//! Shot boundaries minimize the total within-segment kernel scatter under a
//! cosine kernel, with the number of boundaries chosen by a penalized model
//! selection step. Segment scatter is read off 2-D cumulative Gram sums in
//! constant time, so the dynamic program costs `O(m · T²)`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundaries and the segments they induce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationResult {
    /// First index of every segment after the first, ascending.
    pub change_points: Vec<usize>,
    /// Inclusive `[start, end]` intervals covering the whole range.
    pub segments: Vec<[usize; 2]>,
}

impl SegmentationResult {
    pub fn from_change_points(change_points: Vec<usize>, len: usize) -> Self {
        let mut segments = Vec::with_capacity(change_points.len() + 1);
        let mut start = 0;
        for &cp in &change_points {
            segments.push([start, cp - 1]);
            start = cp;
        }
        segments.push([start, len - 1]);
        SegmentationResult {
            change_points,
            segments,
        }
    }
}

/// Cosine-kernel Gram matrix with cumulative sums for O(1) segment scatter.
#[derive(Debug, Clone)]
pub struct KernelScatter {
    /// `(T+1) × (T+1)` prefix sums of the Gram matrix.
    block: Array2<f64>,
    /// Prefix sums of the Gram diagonal.
    diag: Vec<f64>,
}

impl KernelScatter {
    pub fn new(features: ArrayView2<f64>) -> Self {
        let gram = cosine_gram(features);
        let t = gram.nrows();
        let mut block = Array2::zeros((t + 1, t + 1));
        for i in 0..t {
            let mut row_sum = 0.0;
            for j in 0..t {
                row_sum += gram[[i, j]];
                block[[i + 1, j + 1]] = block[[i, j + 1]] + row_sum;
            }
        }
        let mut diag = vec![0.0; t + 1];
        for i in 0..t {
            diag[i + 1] = diag[i] + gram[[i, i]];
        }
        KernelScatter { block, diag }
    }

    pub fn len(&self) -> usize {
        self.diag.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scatter of the half-open segment `[start, end)`:
    /// `Σ_i K(i,i) - (1/len) Σ_{i,j} K(i,j)`.
    pub fn scatter(&self, start: usize, end: usize) -> f64 {
        debug_assert!(start < end);
        let b = &self.block;
        let inner = b[[end, end]] - b[[start, end]] - b[[end, start]] + b[[start, start]];
        (self.diag[end] - self.diag[start]) - inner / (end - start) as f64
    }

    /// Total scatter of the segmentation induced by `change_points`.
    pub fn total_scatter(&self, change_points: &[usize]) -> f64 {
        let mut start = 0;
        let mut total = 0.0;
        for &cp in change_points.iter().chain(std::iter::once(&self.len())) {
            total += self.scatter(start, cp);
            start = cp;
        }
        total
    }

    /// Minimum total scatter for every boundary count `0..=max_change_points`,
    /// together with the optimal boundaries for each count.
    pub fn optimal_segmentations(&self, max_change_points: usize) -> Vec<(f64, Vec<usize>)> {
        let t = self.len();
        let max_cp = max_change_points.min(t.saturating_sub(1));
        // cost[m][e]: best scatter of [0, e) cut into m+1 nonempty segments
        let mut cost = vec![vec![f64::INFINITY; t + 1]; max_cp + 1];
        let mut back = vec![vec![0usize; t + 1]; max_cp + 1];
        for e in 1..=t {
            cost[0][e] = self.scatter(0, e);
        }
        for m in 1..=max_cp {
            for e in (m + 1)..=t {
                let mut best = f64::INFINITY;
                let mut arg = m;
                for s in m..e {
                    let c = cost[m - 1][s] + self.scatter(s, e);
                    if c < best {
                        best = c;
                        arg = s;
                    }
                }
                cost[m][e] = best;
                back[m][e] = arg;
            }
        }
        (0..=max_cp)
            .map(|m| {
                let mut cps = Vec::with_capacity(m);
                let mut e = t;
                for level in (1..=m).rev() {
                    e = back[level][e];
                    cps.push(e);
                }
                cps.reverse();
                (cost[m][t], cps)
            })
            .collect()
    }
}

fn cosine_gram(features: ArrayView2<f64>) -> Array2<f64> {
    let mut normed = features.to_owned();
    for mut row in normed.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    normed.dot(&normed.t())
}

/// Model-selection penalty `m · (log(T/m) + 1)`, zero for `m = 0`.
pub fn boundary_penalty(m: usize, len: usize) -> f64 {
    if m == 0 {
        0.0
    } else {
        m as f64 * ((len as f64 / m as f64).ln() + 1.0)
    }
}

/// Default cap on boundaries: one per two seconds of video at `sample_rate` steps per second.
pub fn default_max_change_points(n_steps: usize, sample_rate: f64) -> usize {
    let seconds = n_steps as f64 / sample_rate;
    ((seconds / 2.0).floor() as usize).clamp(1, n_steps.saturating_sub(1).max(1))
}

/// Segments `features` (`T × D`) into shots.
///
/// For each boundary count up to `max_change_points` the dynamic program
/// finds the minimum-scatter placement; the count minimizing
/// `scatter + penalty_weight · m (log(T/m) + 1)` wins, smaller counts on ties.
pub fn kts_segment(
    features: ArrayView2<f64>,
    max_change_points: usize,
    penalty_weight: f64,
) -> Result<SegmentationResult> {
    let t = features.nrows();
    if t < 2 {
        return Err(Error::invariant(
            "features",
            format!("segmentation needs at least 2 frames, found {t}"),
        ));
    }
    if max_change_points >= t {
        return Err(Error::invariant(
            "max_change_points",
            format!("{max_change_points} must be below the frame count {t}"),
        ));
    }
    if !penalty_weight.is_finite() || penalty_weight < 0.0 {
        return Err(Error::invariant(
            "penalty_weight",
            "must be finite and non-negative",
        ));
    }
    let kernel = KernelScatter::new(features);
    let candidates = kernel.optimal_segmentations(max_change_points);
    let mut best_cost = f64::INFINITY;
    let mut best = Vec::new();
    for (m, (scatter, cps)) in candidates.into_iter().enumerate() {
        let c = scatter + penalty_weight * boundary_penalty(m, t);
        if c < best_cost {
            best_cost = c;
            best = cps;
        }
    }
    Ok(SegmentationResult::from_change_points(best, t))
}

/// Expands subsampled-step segments to original frames.
///
/// A boundary at step `k` starts the new shot at original frame `picks[k]`;
/// the first shot starts at frame 0 and the last ends at `n_frames_original - 1`.
pub fn map_segments_to_original(
    result: &SegmentationResult,
    picks: &[usize],
    n_frames_original: usize,
) -> SegmentationResult {
    let change_points: Vec<usize> = result.change_points.iter().map(|&k| picks[k]).collect();
    SegmentationResult::from_change_points(change_points, n_frames_original)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn piecewise(lengths: &[usize], dim: usize) -> Array2<f64> {
        let t: usize = lengths.iter().sum();
        let mut x = Array2::zeros((t, dim));
        let mut row = 0;
        for (seg, &len) in lengths.iter().enumerate() {
            for _ in 0..len {
                x[[row, seg % dim]] = 1.0;
                row += 1;
            }
        }
        x
    }

    #[test]
    fn two_constant_segments() {
        let x = piecewise(&[10, 10], 2);
        let r = kts_segment(x.view(), 5, 1.0).unwrap();
        assert_eq!(r.change_points, vec![10]);
        assert_eq!(r.segments, vec![[0, 9], [10, 19]]);
    }

    #[test]
    fn constant_sequence_has_no_boundaries() {
        let x = Array2::from_elem((15, 3), 0.5);
        let r = kts_segment(x.view(), 4, 1.0).unwrap();
        assert!(r.change_points.is_empty());
        assert_eq!(r.segments, vec![[0, 14]]);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(kts_segment(Array2::zeros((1, 2)).view(), 0, 1.0).is_err());
        assert!(kts_segment(Array2::zeros((4, 2)).view(), 4, 1.0).is_err());
    }

    #[test]
    fn cumulative_scatter_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Array2::from_shape_fn((17, 5), |_| StandardNormal.sample(&mut rng));
        let kernel = KernelScatter::new(x.view());
        let gram = cosine_gram(x.view());
        for s in 0..17 {
            for e in (s + 1)..=17 {
                let mut diag = 0.0;
                let mut all = 0.0;
                for i in s..e {
                    diag += gram[[i, i]];
                    for j in s..e {
                        all += gram[[i, j]];
                    }
                }
                let direct = diag - all / (e - s) as f64;
                assert!((kernel.scatter(s, e) - direct).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn larger_penalty_never_adds_boundaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((30, 4), |_| StandardNormal.sample(&mut rng));
        let mut last = usize::MAX;
        for w in [0.0, 0.1, 0.3, 0.6, 1.0, 2.0, 5.0, 20.0] {
            let m = kts_segment(x.view(), 10, w).unwrap().change_points.len();
            assert!(m <= last);
            last = m;
        }
    }

    #[test]
    fn maps_to_original_frames() {
        let r = SegmentationResult::from_change_points(vec![2], 4);
        let o = map_segments_to_original(&r, &[0, 15, 30, 45], 60);
        assert_eq!(o.change_points, vec![30]);
        assert_eq!(o.segments, vec![[0, 29], [30, 59]]);

        let single = SegmentationResult::from_change_points(vec![], 4);
        assert_eq!(
            map_segments_to_original(&single, &[0, 15, 30, 45], 60).segments,
            vec![[0, 59]]
        );
    }

    #[test]
    fn default_cap_is_one_per_two_seconds() {
        assert_eq!(default_max_change_points(120, 2.0), 30);
        assert_eq!(default_max_change_points(3, 2.0), 1);
    }
}
