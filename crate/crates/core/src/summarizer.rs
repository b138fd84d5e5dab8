//! Keyshot summaries: per-shot importance, 0/1 knapsack selection and mask export.

use serde::{Deserialize, Serialize};

use crate::dataio::VideoRecord;
use crate::error::{Error, Result};
use crate::segmentation::{default_max_change_points, kts_segment, map_segments_to_original};

/// Fraction of the original video length a summary may occupy.
pub const DEFAULT_BUDGET_FRACTION: f64 = 0.15;

/// Steps per second of the subsampled feature sequence.
pub const DEFAULT_SAMPLE_RATE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

impl Shot {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ShotTable {
    pub shots: Vec<Shot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryMask {
    pub mask: Vec<u8>,
    pub selected: Vec<usize>,
    pub total_length: usize,
}

/// Spreads step scores over original frames: each frame takes the score of the
/// nearest pick at or before it (frames ahead of the first pick take the first).
pub fn upsample_scores(frame_probs: &[f64], picks: &[usize], n_frames_original: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_frames_original);
    let mut k = 0;
    for frame in 0..n_frames_original {
        while k + 1 < picks.len() && picks[k + 1] <= frame {
            k += 1;
        }
        out.push(frame_probs[k]);
    }
    out
}

/// Mean upsampled score over the frames of each segment.
pub fn shot_scores(
    frame_probs: &[f64],
    picks: &[usize],
    segments: &[[usize; 2]],
    n_frames_original: usize,
) -> Result<ShotTable> {
    if frame_probs.len() != picks.len() || picks.is_empty() {
        return Err(Error::invariant("frame_probs", "need one score per pick"));
    }
    if let Some(&[_, end]) = segments.last() {
        if end >= n_frames_original {
            return Err(Error::invariant(
                "segments",
                "extend past the last original frame",
            ));
        }
    }
    let per_frame = upsample_scores(frame_probs, picks, n_frames_original);
    let shots = segments
        .iter()
        .map(|&[start, end]| {
            let span = &per_frame[start..=end];
            Shot {
                start,
                end,
                score: span.iter().sum::<f64>() / span.len() as f64,
            }
        })
        .collect();
    Ok(ShotTable { shots })
}

/// Exact 0/1 knapsack over integer shot lengths.
///
/// Returns ascending shot indices. When including a shot ties with excluding
/// it, the shot is left out.
pub fn knapsack_select(shots: &ShotTable, budget: usize) -> Vec<usize> {
    let n = shots.shots.len();
    let width = budget + 1;
    // value[i * width + c]: best score from the first i shots within capacity c
    let mut value = vec![0.0f64; (n + 1) * width];
    let mut take = vec![false; (n + 1) * width];
    for (i, shot) in shots.shots.iter().enumerate() {
        let len = shot.len();
        for c in 0..width {
            let skip = value[i * width + c];
            let mut best = skip;
            let mut took = false;
            if len <= c {
                let with = value[i * width + c - len] + shot.score;
                if with > skip {
                    best = with;
                    took = true;
                }
            }
            value[(i + 1) * width + c] = best;
            take[(i + 1) * width + c] = took;
        }
    }
    let mut chosen = Vec::new();
    let mut c = budget;
    for i in (1..=n).rev() {
        if take[i * width + c] {
            chosen.push(i - 1);
            c -= shots.shots[i - 1].len();
        }
    }
    chosen.reverse();
    chosen
}

pub fn mask_from_selection(
    shots: &ShotTable,
    selected: &[usize],
    n_frames_original: usize,
) -> SummaryMask {
    let mut mask = vec![0u8; n_frames_original];
    let mut total_length = 0;
    for &i in selected {
        let s = shots.shots[i];
        mask[s.start..=s.end].fill(1);
        total_length += s.len();
    }
    SummaryMask {
        mask,
        selected: selected.to_vec(),
        total_length,
    }
}

/// Shot intervals for a record: the annotated ones, or KTS on its features.
pub fn record_segments(record: &VideoRecord) -> Result<Vec<[usize; 2]>> {
    if !record.change_points.is_empty() {
        return Ok(record.change_points.clone());
    }
    let t = record.n_steps();
    let max_cp = default_max_change_points(t, DEFAULT_SAMPLE_RATE).min(t - 1);
    let seg = kts_segment(record.features.view(), max_cp, 1.0)?;
    Ok(map_segments_to_original(&seg, &record.picks, record.n_frames_original).segments)
}

/// Summary within `floor(budget_fraction · n_frames_original)` frames.
pub fn generate_summary(
    record: &VideoRecord,
    frame_probs: &[f64],
    budget_fraction: f64,
) -> Result<(ShotTable, SummaryMask)> {
    if !(budget_fraction > 0.0 && budget_fraction <= 1.0) {
        return Err(Error::invariant(
            "budget_fraction",
            format!("{budget_fraction} is outside (0, 1]"),
        ));
    }
    let segments = record_segments(record)?;
    let shots = shot_scores(
        frame_probs,
        &record.picks,
        &segments,
        record.n_frames_original,
    )?;
    let budget = (budget_fraction * record.n_frames_original as f64).floor() as usize;
    let selected = knapsack_select(&shots, budget);
    let mask = mask_from_selection(&shots, &selected, record.n_frames_original);
    Ok((shots, mask))
}

/// Alternating run lengths of the mask, starting with a (possibly empty) run of zeros.
pub fn run_length_encode(mask: &[u8]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = 0u8;
    let mut len = 0;
    for &v in mask {
        if v == current {
            len += 1;
        } else {
            runs.push(len);
            current = v;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

pub fn run_length_decode(runs: &[usize]) -> Vec<u8> {
    runs.iter()
        .enumerate()
        .flat_map(|(i, &len)| std::iter::repeat_n((i % 2) as u8, len))
        .collect()
}

/// JSON summary export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryExport {
    pub video_id: String,
    pub n_frames_original: usize,
    pub budget_fraction: f64,
    /// Inclusive original-frame intervals of the chosen shots.
    pub shots: Vec<[usize; 2]>,
    pub mask_rle: Vec<usize>,
    /// Per-step selection probabilities from the policy.
    pub step_scores: Vec<f64>,
    /// Upsampled per-original-frame scores.
    pub frame_scores: Vec<f64>,
}

impl SummaryExport {
    pub fn new(
        record: &VideoRecord,
        frame_probs: &[f64],
        budget_fraction: f64,
        shots: &ShotTable,
        mask: &SummaryMask,
    ) -> Self {
        SummaryExport {
            video_id: record.video_id.clone(),
            n_frames_original: record.n_frames_original,
            budget_fraction,
            shots: mask
                .selected
                .iter()
                .map(|&i| [shots.shots[i].start, shots.shots[i].end])
                .collect(),
            mask_rle: run_length_encode(&mask.mask),
            step_scores: frame_probs.to_vec(),
            frame_scores: upsample_scores(frame_probs, &record.picks, record.n_frames_original),
        }
    }

    pub fn mask(&self) -> Vec<u8> {
        run_length_decode(&self.mask_rle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(scores: &[f64], lengths: &[usize]) -> ShotTable {
        let mut start = 0;
        let shots = scores
            .iter()
            .zip(lengths)
            .map(|(&score, &len)| {
                let s = Shot {
                    start,
                    end: start + len - 1,
                    score,
                };
                start += len;
                s
            })
            .collect();
        ShotTable { shots }
    }

    fn brute_force(t: &ShotTable, budget: usize) -> f64 {
        let n = t.shots.len();
        let mut best = 0.0f64;
        for bits in 0u32..(1 << n) {
            let (mut len, mut val) = (0, 0.0);
            for i in 0..n {
                if bits >> i & 1 == 1 {
                    len += t.shots[i].len();
                    val += t.shots[i].score;
                }
            }
            if len <= budget && val > best {
                best = val;
            }
        }
        best
    }

    fn value_of(t: &ShotTable, sel: &[usize]) -> f64 {
        sel.iter().map(|&i| t.shots[i].score).sum()
    }

    #[test]
    fn knapsack_examples() {
        let t = table(&[3.0, 4.0, 5.0], &[2, 3, 4]);
        assert_eq!(knapsack_select(&t, 5), vec![0, 1]);
        assert_eq!(knapsack_select(&t, 9), vec![0, 1, 2]);
        assert!(knapsack_select(&t, 0).is_empty());
    }

    #[test]
    fn knapsack_prefers_leaving_out_on_ties() {
        let t = table(&[2.0, 2.0], &[3, 3]);
        assert_eq!(knapsack_select(&t, 3), vec![0]);
    }

    #[test]
    fn shot_score_examples() {
        let uniform = shot_scores(&[0.5; 4], &[0, 10, 20, 30], &[[0, 14], [15, 39]], 40).unwrap();
        assert!(uniform.shots.iter().all(|s| s.score == 0.5));

        let one = shot_scores(
            &[0.1, 0.9, 0.3],
            &[0, 10, 20],
            &[[0, 9], [10, 19], [20, 29]],
            30,
        )
        .unwrap();
        assert!((one.shots[1].score - 0.9).abs() < 1e-15);

        let two = shot_scores(&[0.2, 0.8], &[0, 5], &[[0, 9]], 10).unwrap();
        assert!((two.shots[0].score - 0.5).abs() < 1e-15);
    }

    #[test]
    fn upsampling_uses_preceding_pick() {
        assert_eq!(
            upsample_scores(&[1.0, 2.0, 3.0], &[2, 4, 6], 8),
            vec![1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0]
        );
    }

    #[test]
    fn rle_roundtrip() {
        let m = vec![1, 1, 0, 0, 0, 1];
        assert_eq!(run_length_encode(&m), vec![0, 2, 3, 1]);
        assert_eq!(run_length_decode(&run_length_encode(&m)), m);
        assert_eq!(run_length_encode(&[0, 0]), vec![2]);
    }

    fn instance() -> impl Strategy<Value = (ShotTable, usize)> {
        (1usize..=15).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..1.0, n),
                proptest::collection::vec(1usize..20, n),
                0usize..120,
            )
                .prop_map(|(s, l, b)| (table(&s, &l), b))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn knapsack_is_optimal((t, budget) in instance()) {
            let sel = knapsack_select(&t, budget);
            let len: usize = sel.iter().map(|&i| t.shots[i].len()).sum();
            prop_assert!(len <= budget);
            prop_assert_eq!(value_of(&t, &sel), brute_force(&t, budget));
        }

        #[test]
        fn power_of_two_scaling_keeps_selection((t, budget) in instance(), k in -8i32..8) {
            let c = 2f64.powi(k);
            let mut scaled = t.clone();
            scaled.shots.iter_mut().for_each(|s| s.score *= c);
            prop_assert_eq!(knapsack_select(&t, budget), knapsack_select(&scaled, budget));
        }

        #[test]
        fn mask_is_union_of_selected_shots((t, budget) in instance()) {
            let n = t.shots.last().unwrap().end + 1;
            let sel = knapsack_select(&t, budget);
            let m = mask_from_selection(&t, &sel, n);
            prop_assert_eq!(m.mask.iter().map(|&v| v as usize).sum::<usize>(), m.total_length);
            for (i, s) in t.shots.iter().enumerate() {
                let inside = &m.mask[s.start..=s.end];
                if sel.contains(&i) {
                    prop_assert!(inside.iter().all(|&v| v == 1));
                } else {
                    prop_assert!(inside.iter().all(|&v| v == 0));
                }
            }
        }
    }
}
