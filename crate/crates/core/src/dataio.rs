//! On-disk video records and train/test split definitions.
//!
//! A record lives in two files sharing a stem: `<id>.fvs` holds the feature
//! matrix and `<id>.json` holds everything else.
//!
//! `FVS1` layout: magic `FVS1`, then version, `T` and `D` as u32
//! little-endian, then `T·D` f32 little-endian values in row-major order.
//! Features are widened to f64 on load.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"FVS1";
pub const FEATURE_VERSION: u32 = 1;
pub const FEATURE_EXT: &str = "fvs";

/// Features and annotations for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub video_id: String,
    /// `T × D`, one row per subsampled frame.
    pub features: Array2<f64>,
    pub n_frames_original: usize,
    /// Original-frame index of every subsampled frame.
    pub picks: Vec<usize>,
    /// Inclusive `[start, end]` shot intervals in original frames. Empty means
    /// the shots are not known and must be detected.
    pub change_points: Vec<[usize; 2]>,
    /// `U × n_frames_original` binary user summaries.
    pub user_summaries: Option<Vec<Vec<u8>>>,
    pub keyframe_indices: Option<Vec<usize>>,
    pub gt_importance: Option<Vec<f64>>,
    /// Source collection, e.g. `summe` or `tvsum`.
    pub dataset: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    video_id: String,
    n_frames_original: usize,
    picks: Vec<usize>,
    #[serde(default)]
    change_points: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    user_summaries: Option<Vec<Vec<u8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keyframe_indices: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt_importance: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dataset: Option<String>,
}

impl VideoRecord {
    pub fn n_steps(&self) -> usize {
        self.features.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Checks every record invariant, naming the offending field on failure.
    pub fn validate(&self) -> Result<()> {
        let (t, d) = self.features.dim();
        if t < 2 {
            return Err(Error::invariant(
                "features",
                format!("need at least 2 frames, found {t}"),
            ));
        }
        if d < 1 {
            return Err(Error::invariant("features", "feature dimension is zero"));
        }
        if let Some((idx, _)) = self.features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invariant(
                "features",
                format!("non-finite value at {idx:?}"),
            ));
        }
        let n = self.n_frames_original;
        if n == 0 {
            return Err(Error::invariant("n_frames_original", "must be positive"));
        }
        if self.picks.len() != t {
            return Err(Error::invariant(
                "picks",
                format!("{} entries for {t} feature rows", self.picks.len()),
            ));
        }
        if self.picks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invariant("picks", "picks not increasing"));
        }
        if self.picks.last().is_some_and(|&p| p >= n) {
            return Err(Error::invariant(
                "picks",
                "pick beyond the original frame count",
            ));
        }
        if !self.change_points.is_empty() {
            validate_partition(&self.change_points, n)
                .map_err(|msg| Error::invariant("change_points", msg))?;
        }
        if let Some(keys) = &self.keyframe_indices {
            if let Some(k) = keys.iter().find(|&&k| k >= t) {
                return Err(Error::invariant(
                    "keyframe_indices",
                    format!("index {k} outside [0, {t})"),
                ));
            }
        }
        if let Some(users) = &self.user_summaries {
            for (u, row) in users.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::invariant(
                        "user_summaries",
                        format!("row {u} has {} frames, expected {n}", row.len()),
                    ));
                }
                if row.iter().any(|&v| v > 1) {
                    return Err(Error::invariant(
                        "user_summaries",
                        format!("row {u} is not binary"),
                    ));
                }
            }
        }
        if let Some(gt) = &self.gt_importance {
            if gt.len() != t || gt.iter().any(|v| !v.is_finite()) {
                return Err(Error::invariant(
                    "gt_importance",
                    format!("need {t} finite scores"),
                ));
            }
        }
        Ok(())
    }

    fn sidecar(&self) -> Sidecar {
        Sidecar {
            video_id: self.video_id.clone(),
            n_frames_original: self.n_frames_original,
            picks: self.picks.clone(),
            change_points: self.change_points.clone(),
            user_summaries: self.user_summaries.clone(),
            keyframe_indices: self.keyframe_indices.clone(),
            gt_importance: self.gt_importance.clone(),
            dataset: self.dataset.clone(),
        }
    }
}

/// Checks that inclusive intervals are sorted, contiguous and cover `[0, n)`.
pub(crate) fn validate_partition(
    intervals: &[[usize; 2]],
    n: usize,
) -> std::result::Result<(), String> {
    let mut next = 0;
    for (i, &[start, end]) in intervals.iter().enumerate() {
        if start != next {
            return Err(format!("interval {i} starts at {start}, expected {next}"));
        }
        if end < start {
            return Err(format!("interval {i} ends before it starts"));
        }
        next = end + 1;
    }
    if next != n {
        return Err(format!("intervals cover [0, {next}) instead of [0, {n})"));
    }
    Ok(())
}

pub fn encode_features(features: &Array2<f64>) -> Vec<u8> {
    let (t, d) = features.dim();
    let mut out = Vec::with_capacity(16 + 4 * t * d);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(t as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for v in features.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<Array2<f64>> {
    if bytes.len() < 16 {
        return Err(Error::format("feature file", "truncated header"));
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::format("feature file", "bad magic, expected FVS1"));
    }
    let word =
        |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4-byte slice")) as usize;
    let version = word(4);
    if version != FEATURE_VERSION as usize {
        return Err(Error::format(
            "feature file",
            format!("unsupported version {version}"),
        ));
    }
    let (t, d) = (word(8), word(12));
    let payload = &bytes[16..];
    if payload.len() != 4 * t * d {
        return Err(Error::format(
            "feature file",
            format!(
                "header declares {t}x{d} values but payload holds {} bytes",
                payload.len()
            ),
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4-byte chunk"))))
        .collect();
    Ok(Array2::from_shape_vec((t, d), values).expect("length checked above"))
}

pub fn sidecar_path(feature_path: &Path) -> PathBuf {
    feature_path.with_extension("json")
}

/// Loads `<stem>.fvs` and its `<stem>.json` sidecar.
pub fn load_video(path: &Path) -> Result<VideoRecord> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let features = decode_features(&bytes)?;
    let side_path = sidecar_path(path);
    let text = std::fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
    let side: Sidecar = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: side_path,
        source,
    })?;
    let record = VideoRecord {
        video_id: side.video_id,
        features,
        n_frames_original: side.n_frames_original,
        picks: side.picks,
        change_points: side.change_points,
        user_summaries: side.user_summaries,
        keyframe_indices: side.keyframe_indices,
        gt_importance: side.gt_importance,
        dataset: side.dataset,
    };
    record.validate()?;
    Ok(record)
}

/// Writes the feature file at `path` and the sidecar next to it.
pub fn write_video(record: &VideoRecord, path: &Path) -> Result<()> {
    record.validate()?;
    std::fs::write(path, encode_features(&record.features)).map_err(|e| Error::io(path, e))?;
    let side_path = sidecar_path(path);
    let json = serde_json::to_string(&record.sidecar()).map_err(|source| Error::Json {
        path: side_path.clone(),
        source,
    })?;
    std::fs::write(&side_path, json).map_err(|e| Error::io(&side_path, e))
}

/// Writes `record` as `<dir>/<video_id>.fvs` (+ sidecar), creating `dir` if
/// needed, and returns the feature path.
pub fn write_video_to_dir(record: &VideoRecord, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{}.{FEATURE_EXT}", record.video_id));
    write_video(record, &path)?;
    Ok(path)
}

/// Loads every `*.fvs` record in `dir`, sorted by video id.
pub fn load_dataset_dir(dir: &Path) -> Result<Vec<VideoRecord>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == FEATURE_EXT) {
            paths.push(path);
        }
    }
    let mut records = paths
        .iter()
        .map(|p| load_video(p))
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Named list of train/test folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub name: String,
    pub folds: Vec<Fold>,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, fold) in self.folds.iter().enumerate() {
            let train: HashSet<&String> = fold.train.iter().collect();
            if let Some(id) = fold.test.iter().find(|id| train.contains(id)) {
                return Err(Error::invariant(
                    "split",
                    format!("fold {i}: {id} is in both train and test"),
                ));
            }
            if fold.test.is_empty() {
                return Err(Error::invariant(
                    "split",
                    format!("fold {i} has no test videos"),
                ));
            }
        }
        Ok(())
    }

    /// Split files are plain JSON arrays of `{"train": [...], "test": [...]}`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.folds).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, name: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let folds = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })?;
        let spec = SplitSpec {
            name: name.to_string(),
            folds,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Seeded k-fold partition: each id lands in exactly one test set.
pub fn make_folds(video_ids: &[String], k: usize, seed: u64) -> Result<SplitSpec> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if video_ids.len() < k {
        return Err(Error::Config(format!(
            "{} videos cannot fill {k} folds",
            video_ids.len()
        )));
    }
    let mut ids = video_ids.to_vec();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = ids.len() / k;
    let extra = ids.len() % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let test: Vec<String> = ids[start..start + len].to_vec();
        let train = ids[..start]
            .iter()
            .chain(&ids[start + len..])
            .cloned()
            .collect();
        folds.push(Fold { train, test });
        start += len;
    }
    Ok(SplitSpec {
        name: "canonical".into(),
        folds,
    })
}

/// k-fold over `primary`, with every `extra` id appended to each training set.
pub fn augmented_split(
    primary: &[String],
    extra: &[String],
    k: usize,
    seed: u64,
) -> Result<SplitSpec> {
    let mut spec = make_folds(primary, k, seed)?;
    for fold in &mut spec.folds {
        fold.train.extend(extra.iter().cloned());
    }
    spec.name = "augmented".into();
    Ok(spec)
}

/// Single fold: train on `sources`, test on all of `target`.
pub fn transfer_split(target: &[String], sources: &[String]) -> Result<SplitSpec> {
    if target.is_empty() || sources.is_empty() {
        return Err(Error::Config(
            "transfer split needs both target and source videos".into(),
        ));
    }
    let spec = SplitSpec {
        name: "transfer".into(),
        folds: vec![Fold {
            train: sources.to_vec(),
            test: target.to_vec(),
        }],
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use proptest::prelude::*;

    fn record() -> VideoRecord {
        VideoRecord {
            video_id: "v0".into(),
            features: arr2(&[[0.0, 1.0], [2.0, 3.0], [4.0, 5.0], [6.0, 7.0]]),
            n_frames_original: 40,
            picks: vec![0, 10, 20, 30],
            change_points: vec![[0, 19], [20, 39]],
            user_summaries: Some(vec![vec![0; 40], vec![1; 40]]),
            keyframe_indices: Some(vec![1, 3]),
            gt_importance: None,
            dataset: Some("synthetic".into()),
        }
    }

    #[test]
    fn decodes_header_and_payload() {
        let r = record();
        let bytes = encode_features(&r.features);
        assert_eq!(&bytes[..4], b"FVS1");
        assert_eq!(bytes.len(), 16 + 4 * 8);
        assert_eq!(decode_features(&bytes).unwrap(), r.features);
    }

    #[test]
    fn payload_is_little_endian_f32() {
        let bytes = encode_features(&arr2(&[[0.0], [1.0]]));
        assert_eq!(&bytes[16..], &[0, 0, 0, 0, 0, 0, 0x80, 0x3f]);
    }

    #[test]
    fn rejects_bad_container() {
        let mut bytes = encode_features(&record().features);
        bytes.pop();
        assert!(decode_features(&bytes)
            .unwrap_err()
            .to_string()
            .contains("payload"));
        bytes[0] = b'G';
        assert!(decode_features(&bytes)
            .unwrap_err()
            .to_string()
            .contains("magic"));
    }

    #[test]
    fn invariant_violations_name_the_field() {
        let mut r = record();
        r.picks = vec![5, 3, 20, 30];
        assert!(r
            .validate()
            .unwrap_err()
            .to_string()
            .contains("picks not increasing"));

        let mut r = record();
        r.change_points = vec![[0, 19], [21, 39]];
        assert!(r
            .validate()
            .unwrap_err()
            .to_string()
            .contains("change_points"));

        let mut r = record();
        r.keyframe_indices = Some(vec![4]);
        assert!(r
            .validate()
            .unwrap_err()
            .to_string()
            .contains("keyframe_indices"));

        let mut r = record();
        r.user_summaries = Some(vec![vec![2; 40]]);
        assert!(r
            .validate()
            .unwrap_err()
            .to_string()
            .contains("user_summaries"));

        let mut r = record();
        r.features[[1, 1]] = f64::NAN;
        assert!(r.validate().unwrap_err().to_string().contains("features"));
    }

    #[test]
    fn file_roundtrip_and_write_refuses_invalid() {
        let dir = tempfile::tempdir().unwrap();
        let r = record();
        let path = write_video_to_dir(&r, dir.path()).unwrap();
        assert_eq!(load_video(&path).unwrap(), r);

        let mut bad = r.clone();
        bad.picks = vec![5, 3, 20, 30];
        let bad_path = dir.path().join("bad.fvs");
        assert!(write_video(&bad, &bad_path).is_err());
        assert!(!bad_path.exists());
        assert_eq!(load_dataset_dir(dir.path()).unwrap().len(), 1);
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("video_{i}")).collect()
    }

    #[test]
    fn folds_partition_ids() {
        let all = ids(25);
        let split = make_folds(&all, 5, 3).unwrap();
        assert_eq!(split.folds.len(), 5);
        assert!(split
            .folds
            .iter()
            .all(|f| f.test.len() == 5 && f.train.len() == 20));
        let mut union: Vec<String> = split.folds.iter().flat_map(|f| f.test.clone()).collect();
        union.sort();
        let mut expected = all.clone();
        expected.sort();
        assert_eq!(union, expected);
        split.validate().unwrap();
    }

    #[test]
    fn folds_are_seed_deterministic() {
        assert_eq!(
            make_folds(&ids(10), 5, 9).unwrap(),
            make_folds(&ids(10), 5, 9).unwrap()
        );
        assert!(make_folds(&ids(3), 5, 9).is_err());
        assert!(make_folds(&ids(3), 1, 9).is_err());
    }

    #[test]
    fn augmented_and_transfer_splits() {
        let extra = vec!["ovp_1".to_string(), "yt_1".to_string()];
        let aug = augmented_split(&ids(10), &extra, 5, 0).unwrap();
        assert!(aug
            .folds
            .iter()
            .all(|f| f.train.len() == 10 && extra.iter().all(|e| f.train.contains(e))));
        let tr = transfer_split(&ids(4), &extra).unwrap();
        assert_eq!(tr.folds.len(), 1);
        assert!(transfer_split(&ids(2), &ids(3)).is_err());
    }

    #[test]
    fn split_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("split.json");
        let split = make_folds(&ids(6), 3, 1).unwrap();
        split.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.trim_start().starts_with('['));
        assert_eq!(SplitSpec::load(&path, "canonical").unwrap(), split);
    }

    fn arb_record() -> impl Strategy<Value = VideoRecord> {
        (2usize..12, 1usize..6, 1usize..4).prop_flat_map(|(t, d, stride)| {
            let n = t * stride + 1;
            (
                proptest::collection::vec(-1.0e3f32..1.0e3, t * d),
                proptest::collection::vec(proptest::collection::vec(0u8..2, n), 0..3),
                1usize..n,
            )
                .prop_map(move |(vals, users, cut)| VideoRecord {
                    video_id: format!("rec_{t}_{d}"),
                    features: Array2::from_shape_vec(
                        (t, d),
                        vals.into_iter().map(f64::from).collect(),
                    )
                    .unwrap(),
                    n_frames_original: n,
                    picks: (0..t).map(|i| i * stride).collect(),
                    change_points: vec![[0, cut - 1], [cut, n - 1]],
                    user_summaries: if users.is_empty() { None } else { Some(users) },
                    keyframe_indices: Some(vec![0, t - 1]),
                    gt_importance: Some((0..t).map(|i| i as f64 * 0.25).collect()),
                    dataset: None,
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn records_survive_disk_roundtrip(r in arb_record()) {
            let dir = tempfile::tempdir().unwrap();
            let path = write_video_to_dir(&r, dir.path()).unwrap();
            let payload = std::fs::read(&path).unwrap();
            let back = load_video(&path).unwrap();
            prop_assert_eq!(&back, &r);
            write_video(&back, &path).unwrap();
            prop_assert_eq!(std::fs::read(&path).unwrap(), payload);
        }
    }
}
