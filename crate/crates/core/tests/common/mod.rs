#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};

use fairadabn::data::SyntheticConfig;
use fairadabn::harness::{ExperimentConfig, Method};

/// A few seconds of training on a small shifted dataset.
pub fn quick_config(method: Method) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        name: "quick".into(),
        method,
        epochs: 4,
        batch_size: 32,
        repeats: 2,
        synthetic: SyntheticConfig {
            n_samples: 300,
            feature_dim: 4,
            num_classes: 3,
            group_ratio: 0.3,
            group_shift: vec![1.5, 0.0, 0.0, 0.0],
            seed: 3,
            ..SyntheticConfig::default()
        },
        ..ExperimentConfig::default()
    };
    cfg.model.hidden_dims = vec![8];
    cfg
}

pub fn benchmark_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/biased_benchmark.conf")
}

/// One printed row: method, accuracy, (EOpp0, EOpp1, EOdd), printed (E_0, E_1, E_2).
/// All values ×10⁻² as printed.
pub struct PrintedRow {
    pub method: &'static str,
    pub accuracy: f64,
    pub fairness: [f64; 3],
    pub fate: [f64; 3],
}

pub struct PrintedBlock {
    pub dataset: &'static str,
    pub baseline: PrintedRow,
    pub rows: Vec<PrintedRow>,
}

const fn row(method: &'static str, accuracy: f64, fairness: [f64; 3], fate: [f64; 3]) -> PrintedRow {
    PrintedRow {
        method,
        accuracy,
        fairness,
        fate,
    }
}

pub fn printed_table() -> Vec<PrintedBlock> {
    vec![
        PrintedBlock {
            dataset: "fitzpatrick",
            baseline: row("Vanilla", 87.53, [1.00, 10.40, 10.54], [f64::NAN; 3]),
            rows: vec![
                row("Resampling", 87.73, [1.11, 10.43, 10.78], [-10.86, -0.03, -2.05]),
                row("Ind", 86.33, [0.78, 10.13, 9.72], [20.63, 1.23, 6.41]),
                row("GroupDRO", 86.62, [0.94, 8.04, 8.23], [5.07, 21.66, 20.91]),
                row("EnD", 86.80, [1.22, 9.01, 9.20], [-22.83, 12.53, 11.88]),
                row("CFair", 87.91, [0.93, 9.83, 10.17], [10.03, 12.15, 10.09]),
                row("FairAdaBN", 84.72, [0.48, 7.67, 7.73], [48.79, 23.04, 23.45]),
            ],
        },
        PrintedBlock {
            dataset: "isic",
            baseline: row("Vanilla", 92.52, [0.85, 6.12, 6.02], [f64::NAN; 3]),
            rows: vec![
                row("Resampling", 92.81, [0.86, 5.65, 5.76], [-0.80, -2.48, -5.49]),
                row("Ind", 92.43, [0.85, 7.04, 7.37], [-0.10, -15.13, -22.52]),
                row("GroupDRO", 91.86, [0.82, 6.78, 6.62], [2.41, -22.99, -22.01]),
                row("EnD", 92.13, [0.98, 5.18, 5.10], [-15.72, 14.94, 14.86]),
                row("CFair", 87.39, [2.83, 9.21, 10.80], [-238.49, -56.03, -84.95]),
                row("FairAdaBN", 89.11, [0.69, 4.85, 4.76], [15.14, 17.07, 17.24]),
            ],
        },
    ]
}
