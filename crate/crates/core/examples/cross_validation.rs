//! The three evaluation settings, driven through the same functions the
//! `vsumm` binary uses.

use vsumm::cli::{cmd_eval, cmd_train, RunConfig, Setting};
use vsumm::dataio::write_video_to_dir;
use vsumm::synthgen::make_corpus;
use vsumm::trainer::TrainConfig;

fn main() -> vsumm::Result<()> {
    let root = std::env::temp_dir().join(format!("vsumm-cv-{}", std::process::id()));
    let primary = root.join("primary");
    let extra = root.join("extra");
    for v in make_corpus(10, 3, 8, 6, 0.05, 0) {
        write_video_to_dir(&v, &primary)?;
    }
    for v in make_corpus(4, 3, 8, 6, 0.05, 100) {
        write_video_to_dir(&v, &extra)?;
    }

    for setting in [Setting::Canonical, Setting::Augmented, Setting::Transfer] {
        let cfg = RunConfig {
            data: vec![primary.clone(), extra.clone()],
            split: None,
            setting,
            train: TrainConfig {
                learning_rate: 1e-2,
                hidden: 16,
                max_epochs: 10,
                ..TrainConfig::default()
            },
            budget: 0.15,
            aggregation: None,
            out: root.join(setting.name()),
            checkpoint: None,
        };
        cmd_train(&cfg)?;
        let report = cmd_eval(&cfg)?;
        let folds: Vec<String> = report
            .folds
            .iter()
            .map(|f| format!("{:.1}", f.mean_f_score))
            .collect();
        println!(
            "{:<10} folds [{}] mean F {:.2}",
            setting.name(),
            folds.join(", "),
            report.mean_f_score
        );
    }
    std::fs::remove_dir_all(&root).map_err(|e| vsumm::Error::Io {
        path: root.clone(),
        source: e,
    })?;
    Ok(())
}
