//! Feature files, JSON sidecars, split files and checkpoints on disk.

use vsumm::dataio::{load_dataset_dir, make_folds, write_video_to_dir, SplitSpec, FEATURE_MAGIC};
use vsumm::numerics::{load_checkpoint, save_checkpoint};
use vsumm::policy_net::PolicyParams;
use vsumm::synthgen::make_corpus;

fn main() -> vsumm::Result<()> {
    let dir = std::env::temp_dir().join(format!("vsumm-formats-{}", std::process::id()));
    let corpus = make_corpus(5, 2, 4, 3, 0.1, 7);
    for v in &corpus {
        write_video_to_dir(v, &dir)?;
    }
    let path = dir.join("synth_7.fvs");
    let bytes = std::fs::read(&path).map_err(|e| vsumm::Error::Io {
        path: path.clone(),
        source: e,
    })?;
    println!(
        "{}: {} bytes, magic {:?}",
        path.display(),
        bytes.len(),
        std::str::from_utf8(&bytes[..4]).unwrap()
    );
    assert_eq!(&bytes[..4], FEATURE_MAGIC);
    let sidecar = std::fs::read_to_string(path.with_extension("json")).unwrap();
    println!(
        "sidecar starts: {}",
        sidecar[..sidecar.len().min(120)].replace('\n', " ")
    );

    let loaded = load_dataset_dir(&dir)?;
    // features are stored as f32
    let rounded = corpus[0].features.mapv(|v| v as f32 as f64);
    let same = loaded
        .iter()
        .find(|v| v.video_id == corpus[0].video_id)
        .unwrap();
    println!(
        "reloaded {} videos; features match after f32 rounding: {}",
        loaded.len(),
        same.features == rounded
    );

    let ids: Vec<String> = loaded.iter().map(|v| v.video_id.clone()).collect();
    let split = make_folds(&ids, 5, 0)?;
    split.save(&dir.join("split.json"))?;
    println!(
        "fold 0 tests {:?}",
        SplitSpec::load(&dir.join("split.json"), "canonical")?.folds[0].test
    );

    let params = PolicyParams::new(3, 4, 0);
    save_checkpoint(&params.set, &dir.join("policy.fvsp"))?;
    let back = PolicyParams::from_set(load_checkpoint(&dir.join("policy.fvsp"))?)?;
    println!(
        "checkpoint round trip exact: {}",
        back.set.flat_values() == params.set.flat_values()
    );
    std::fs::remove_dir_all(&dir).map_err(|e| vsumm::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    Ok(())
}
