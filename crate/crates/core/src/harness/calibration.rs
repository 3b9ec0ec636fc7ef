//! Calibrated bit-flip rates for the hybrid decoder's hard weights.
//!
//! The cache is a whitespace-separated text table with a `#` header line:
//! `gamma N K povm qsi p_e shots`.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::LatticeSimulator;
use crate::povm::PovmKind;
use crate::qsi::QsiKind;
use crate::seeding;

const HEADER: &str = "# gamma N K povm qsi p_e shots";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CalibrationKey {
    pub gamma_bits: u64,
    pub rotation: usize,
    pub binomial: usize,
    pub povm: PovmKind,
    pub qsi: QsiKind,
}

impl CalibrationKey {
    pub fn new(gamma: f64, rotation: usize, binomial: usize, povm: PovmKind, qsi: QsiKind) -> Self {
        Self { gamma_bits: gamma.to_bits(), rotation, binomial, povm, qsi }
    }

    pub fn gamma(&self) -> f64 {
        f64::from_bits(self.gamma_bits)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationEntry {
    pub gamma: f64,
    #[serde(rename = "N")]
    pub rotation: usize,
    #[serde(rename = "K")]
    pub binomial: usize,
    pub povm: PovmKind,
    pub qsi: QsiKind,
    pub p_e: f64,
    pub shots: usize,
}

impl CalibrationEntry {
    pub fn key(&self) -> CalibrationKey {
        CalibrationKey::new(self.gamma, self.rotation, self.binomial, self.povm, self.qsi)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CalibrationCache {
    entries: Vec<CalibrationEntry>,
}

impl CalibrationCache {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Config(format!("calibration cache line {}: '{line}'", no + 1));
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 7 {
                return Err(bad());
            }
            entries.push(CalibrationEntry {
                gamma: f[0].parse().map_err(|_| bad())?,
                rotation: f[1].parse().map_err(|_| bad())?,
                binomial: f[2].parse().map_err(|_| bad())?,
                povm: f[3].parse().map_err(|_| bad())?,
                qsi: f[4].parse().map_err(|_| bad())?,
                p_e: f[5].parse().map_err(|_| bad())?,
                shots: f[6].parse().map_err(|_| bad())?,
            });
        }
        Ok(Self { entries })
    }

    /// Missing files give an empty cache.
    pub fn load(path: &Path) -> Result<Self> {
        match fs::read_to_string(path) {
            Ok(text) => Self::parse(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!(
                "{} {} {} {} {} {} {}\n",
                e.gamma, e.rotation, e.binomial, e.povm, e.qsi, e.p_e, e.shots
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut f = fs::File::create(path)?;
        f.write_all(self.render().as_bytes())?;
        Ok(())
    }

    pub fn get(&self, key: &CalibrationKey) -> Option<&CalibrationEntry> {
        self.entries.iter().find(|e| e.key() == *key)
    }

    /// Inserts or replaces the entry with the same key.
    pub fn insert(&mut self, entry: CalibrationEntry) {
        match self.entries.iter_mut().find(|e| e.key() == entry.key()) {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
    }

    pub fn entries(&self) -> &[CalibrationEntry] {
        &self.entries
    }
}

/// Mean fraction of flipped primal qubits over `shots` lattice shots. With no
/// flips at all, half a flip is credited so the result stays positive.
pub fn calibrate_flip_rate(sim: &LatticeSimulator, shots: usize, seed: u64, keys: &[u64]) -> Result<f64> {
    let per_shot = sim.lattice().primal().len();
    let counts: Vec<usize> = (0..shots)
        .into_par_iter()
        .map(|s| {
            let mut k = keys.to_vec();
            k.push(s as u64);
            let mut rng = seeding::stream(seed, &k);
            sim.measure(&mut rng).map(|m| m.flips.iter().filter(|&&f| f).count())
        })
        .collect::<Result<_>>()?;
    let total = (shots * per_shot) as f64;
    let flips = counts.iter().sum::<usize>() as f64;
    let p = if flips == 0.0 { 0.5 / total } else { flips / total };
    if p >= 0.5 {
        return Err(Error::InvalidErrorRate(p));
    }
    Ok(p)
}
