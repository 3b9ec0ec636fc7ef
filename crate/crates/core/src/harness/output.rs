//! CSV rows, the column contract, and the JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::calibration::CalibrationEntry;
use super::config::{Experiment, ExperimentConfig};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasErrorRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub nbar: f64,
    pub povm: String,
    pub qsi: String,
    pub q_exact: f64,
    pub q_mc: Option<f64>,
    pub q_stderr: Option<f64>,
    pub shots: usize,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub nbar: f64,
    pub gamma: f64,
    pub povm: String,
    pub qsi: String,
    pub length: usize,
    pub fidelity: f64,
    pub infidelity: f64,
    pub stderr: f64,
    pub shots: usize,
    pub status: String,
}

/// Logical error rate at one `(point, L, decoder)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub nbar: f64,
    pub distance: usize,
    pub gamma: f64,
    pub povm: String,
    pub qsi: String,
    pub decoder: String,
    pub shots: u64,
    pub failures: u64,
    pub p_l: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Flip fraction observed in this run.
    pub p_flip: f64,
    /// Calibrated flip rate behind hybrid weights.
    pub p_e: Option<f64>,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub nbar: f64,
    pub povm: String,
    pub qsi: String,
    pub decoder: String,
    /// Single-qubit measurement error of the code at zero loss.
    pub q: f64,
    pub gamma_c: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub crossings: String,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub nbar: f64,
    pub povm: String,
    pub qsi: String,
    pub decoder: String,
    pub gamma: f64,
    pub gamma_c: Option<f64>,
    pub fraction: Option<f64>,
    pub alpha: Option<f64>,
    pub alpha_stderr: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub r_squared: Option<f64>,
    pub points: usize,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub gamma: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub povm: String,
    pub qsi: String,
    pub p_e: Option<f64>,
    pub shots: usize,
    pub status: String,
}

/// Column contract shared with downstream readers.
pub mod columns {
    pub const MEAS_ERROR: &[&str] = &["N", "K", "nbar", "povm", "qsi", "q_exact", "q_mc", "q_stderr", "shots", "status"];
    pub const CHAIN1D: &[&str] = &[
        "N", "K", "nbar", "gamma", "povm", "qsi", "length", "fidelity", "infidelity", "stderr", "shots", "status",
    ];
    pub const LATTICE: &[&str] = &[
        "N", "K", "nbar", "distance", "gamma", "povm", "qsi", "decoder", "shots", "failures", "p_l", "ci_lo", "ci_hi",
        "p_flip", "p_e", "status",
    ];
    pub const THRESHOLD: &[&str] =
        &["N", "K", "nbar", "povm", "qsi", "decoder", "q", "gamma_c", "ci_lo", "ci_hi", "crossings", "status"];
    pub const ALPHA: &[&str] = &[
        "N", "K", "nbar", "povm", "qsi", "decoder", "gamma", "gamma_c", "fraction", "alpha", "alpha_stderr", "ci_lo",
        "ci_hi", "r_squared", "points", "status",
    ];
    pub const CALIBRATE: &[&str] = &["gamma", "N", "K", "povm", "qsi", "p_e", "shots", "status"];
}

/// `(file name, columns)` written by each experiment.
pub fn tables(experiment: Experiment) -> Vec<(String, &'static [&'static str])> {
    let stem = experiment.file_stem();
    match experiment {
        Experiment::MeasError => vec![(format!("{stem}.csv"), columns::MEAS_ERROR)],
        Experiment::Chain1d => vec![(format!("{stem}.csv"), columns::CHAIN1D)],
        Experiment::Threshold => {
            vec![(format!("{stem}_points.csv"), columns::LATTICE), (format!("{stem}.csv"), columns::THRESHOLD)]
        }
        Experiment::Alpha => {
            vec![(format!("{stem}_points.csv"), columns::LATTICE), (format!("{stem}.csv"), columns::ALPHA)]
        }
        Experiment::Calibrate => vec![(format!("{stem}.csv"), columns::CALIBRATE)],
    }
}

/// Writes rows with an explicit header so empty tables still carry one.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct TableInfo {
    pub file: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Sidecar {
    pub experiment: String,
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub tables: Vec<TableInfo>,
    pub calibration_file: Option<PathBuf>,
    pub calibration: Vec<CalibrationEntry>,
    pub aborted: Vec<String>,
    pub config: ExperimentConfig,
}

impl Sidecar {
    pub fn new(cfg: &ExperimentConfig, experiment: Experiment) -> Self {
        Self {
            experiment: experiment.name().to_string(),
            config_hash: cfg.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            tables: Vec::new(),
            calibration_file: None,
            calibration: Vec::new(),
            aborted: Vec::new(),
            config: cfg.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_of<T: Serialize>(row: &T) -> Vec<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(row).unwrap();
        let bytes = w.into_inner().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        text.lines().next().unwrap().split(',').map(str::to_string).collect()
    }

    #[test]
    fn rows_match_contract() {
        let s = || String::new();
        let m = MeasErrorRow {
            n: 1,
            k: 1,
            nbar: 0.5,
            povm: s(),
            qsi: s(),
            q_exact: 0.0,
            q_mc: None,
            q_stderr: None,
            shots: 0,
            status: s(),
        };
        assert_eq!(header_of(&m), columns::MEAS_ERROR);
        let c = ChainRow {
            n: 1,
            k: 1,
            nbar: 0.5,
            gamma: 0.0,
            povm: s(),
            qsi: s(),
            length: 3,
            fidelity: 1.0,
            infidelity: 0.0,
            stderr: 0.0,
            shots: 1,
            status: s(),
        };
        assert_eq!(header_of(&c), columns::CHAIN1D);
        let l = LatticeRow {
            n: 1,
            k: 1,
            nbar: 0.5,
            distance: 3,
            gamma: 0.0,
            povm: s(),
            qsi: s(),
            decoder: s(),
            shots: 1,
            failures: 0,
            p_l: 0.0,
            ci_lo: 0.0,
            ci_hi: 1.0,
            p_flip: 0.0,
            p_e: None,
            status: s(),
        };
        assert_eq!(header_of(&l), columns::LATTICE);
        let t = ThresholdRow {
            n: 1,
            k: 1,
            nbar: 0.5,
            povm: s(),
            qsi: s(),
            decoder: s(),
            q: 0.0,
            gamma_c: None,
            ci_lo: None,
            ci_hi: None,
            crossings: s(),
            status: s(),
        };
        assert_eq!(header_of(&t), columns::THRESHOLD);
        let a = AlphaRow {
            n: 1,
            k: 1,
            nbar: 0.5,
            povm: s(),
            qsi: s(),
            decoder: s(),
            gamma: 0.0,
            gamma_c: None,
            fraction: None,
            alpha: None,
            alpha_stderr: None,
            ci_lo: None,
            ci_hi: None,
            r_squared: None,
            points: 0,
            status: s(),
        };
        assert_eq!(header_of(&a), columns::ALPHA);
        let k = CalibrationRow { gamma: 0.0, n: 1, k: 1, povm: s(), qsi: s(), p_e: None, shots: 0, status: s() };
        assert_eq!(header_of(&k), columns::CALIBRATE);
    }
}
