//! Experiment configuration, read from TOML.
//!
//! Every section and key is optional; see the README for the schema.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::code::CodeParams;
use crate::decoder::DecoderKind;
use crate::error::{Error, Result};
use crate::povm::PovmKind;
use crate::qsi::{QsiKind, DEFAULT_TRUNCATION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "meas-error")]
    MeasError,
    #[serde(rename = "chain1d")]
    Chain1d,
    #[serde(rename = "threshold")]
    Threshold,
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "calibrate")]
    Calibrate,
}

impl Experiment {
    pub const ALL: [Experiment; 5] =
        [Experiment::MeasError, Experiment::Chain1d, Experiment::Threshold, Experiment::Alpha, Experiment::Calibrate];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::MeasError => "meas-error",
            Experiment::Chain1d => "chain1d",
            Experiment::Threshold => "threshold",
            Experiment::Alpha => "alpha",
            Experiment::Calibrate => "calibrate",
        }
    }

    /// Stem used for output file names.
    pub fn file_stem(self) -> &'static str {
        match self {
            Experiment::MeasError => "meas_error",
            other => other.name(),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    /// `(N, K)` pairs.
    pub codes: Vec<(usize, usize)>,
    pub gammas: Vec<f64>,
    pub distances: Vec<usize>,
    pub povms: Vec<PovmKind>,
    pub qsi: Vec<QsiKind>,
    pub decoders: Vec<DecoderKind>,
    /// Loss order kept by the likelihood model.
    pub truncation: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            codes: vec![(2, 6)],
            gammas: vec![0.0, 0.05, 0.1],
            distances: vec![3, 5, 7],
            povms: vec![PovmKind::Ahd],
            qsi: vec![QsiKind::LocalMl],
            decoders: vec![DecoderKind::Mwpm],
            truncation: DEFAULT_TRUNCATION,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Shots {
    /// Shots per point, or the first allotment when adaptive.
    pub target: usize,
    /// Upper bound for adaptive allocation.
    pub cap: usize,
    pub batch: usize,
    /// Continue until every CI half-width is below this fraction of the rate.
    pub rel_halfwidth: f64,
    pub adaptive: bool,
    pub level: f64,
}

impl Default for Shots {
    fn default() -> Self {
        Self { target: 10_000, cap: 100_000, batch: 1000, rel_halfwidth: 0.1, adaptive: false, level: 0.95 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Calibration {
    pub shots: usize,
    pub distance: usize,
    /// Cache file; relative paths resolve against the output directory.
    pub cache: PathBuf,
}

impl Default for Calibration {
    fn default() -> Self {
        Self { shots: 2000, distance: 5, cache: PathBuf::from("calibration.txt") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdOpts {
    pub bootstrap: usize,
}

impl Default for ThresholdOpts {
    fn default() -> Self {
        Self { bootstrap: 200 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaOpts {
    /// When set with `fractions`, the swept losses are `fraction · gamma_c`
    /// instead of the grid values.
    pub gamma_c: Option<f64>,
    pub fractions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainOpts {
    pub length: usize,
    pub shots: usize,
}

impl Default for ChainOpts {
    fn default() -> Self {
        Self { length: 3, shots: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasOpts {
    /// Quadrature points for the exact error.
    pub grid: usize,
    /// Monte Carlo shots; 0 skips the sampled estimate.
    pub shots: usize,
}

impl Default for MeasOpts {
    fn default() -> Self {
        Self { grid: 4096, shots: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub grid: Grid,
    pub shots: Shots,
    pub calibration: Calibration,
    pub threshold: ThresholdOpts,
    pub alpha: AlphaOpts,
    pub chain: ChainOpts,
    pub meas: MeasOpts,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 0,
            workers: 1,
            out: PathBuf::from("results"),
            grid: Grid::default(),
            shots: Shots::default(),
            calibration: Calibration::default(),
            threshold: ThresholdOpts::default(),
            alpha: AlphaOpts::default(),
            chain: ChainOpts::default(),
            meas: MeasOpts::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        for &(n, k) in &self.grid.codes {
            CodeParams::new(n, k)?;
        }
        if self.grid.gammas.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return bad("gammas must be finite and non-negative");
        }
        if self.grid.distances.iter().any(|&d| d < 3 || d % 2 == 0) {
            return bad("distances must be odd and at least 3");
        }
        if self.workers == 0 {
            return bad("workers must be positive");
        }
        if self.shots.target == 0 || self.shots.batch == 0 {
            return bad("shot counts must be positive");
        }
        if self.shots.cap < self.shots.target {
            return bad("shot cap is below the target");
        }
        if !(self.shots.level > 0.0 && self.shots.level < 1.0) {
            return bad("confidence level must lie in (0, 1)");
        }
        if self.chain.length < 2 {
            return bad("chain length must be at least 2");
        }
        if self.alpha.fractions.iter().any(|f| !(*f > 0.0)) {
            return bad("alpha fractions must be positive");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn codes(&self) -> Result<Vec<CodeParams>> {
        self.grid.codes.iter().map(|&(n, k)| CodeParams::new(n, k)).collect()
    }

    pub fn calibration_path(&self) -> PathBuf {
        if self.calibration.cache.is_absolute() {
            self.calibration.cache.clone()
        } else {
            self.out.join(&self.calibration.cache)
        }
    }
}
