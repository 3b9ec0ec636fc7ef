//! Batch experiments: parameter sweeps, threshold and slope estimation, and
//! machine-readable output.
//!
//! Each shot draws from an RNG stream keyed by its parameters and index, so
//! outputs depend only on the configuration and seed, never on the worker
//! count or scheduling.

pub mod calibration;
pub mod config;
pub mod output;

use std::collections::HashMap;
use std::path::PathBuf;

use rayon::prelude::*;

pub use calibration::{calibrate_flip_rate, CalibrationCache, CalibrationEntry, CalibrationKey};
pub use config::{Experiment, ExperimentConfig, Shots};
pub use output::{AlphaRow, CalibrationRow, ChainRow, LatticeRow, MeasErrorRow, Sidecar, ThresholdRow};

use crate::chain::{ChainConfig, ChainSimulator};
use crate::code::CodeParams;
use crate::decoder::{Decoder, DecoderKind};
use crate::error::{Error, Result};
use crate::lattice::{self, Lattice, LatticeSimulator};
use crate::povm::{PhasePovm, PovmKind};
use crate::qsi::{self, QsiKind};
use crate::seeding;
use crate::stats::{self, Curve};

const TAG_MEAS: u64 = 1;
const TAG_CHAIN: u64 = 2;
const TAG_LATTICE: u64 = 3;
const TAG_CALIBRATE: u64 = 4;
const TAG_THRESHOLD: u64 = 5;

fn povm_index(p: PovmKind) -> u64 {
    PovmKind::ALL.iter().position(|&k| k == p).unwrap() as u64
}

fn qsi_index(q: QsiKind) -> u64 {
    match q {
        QsiKind::Binning => 0,
        QsiKind::LocalMl => 1,
        QsiKind::FullMl => 2,
    }
}

fn point_keys(tag: u64, code: &CodeParams, gamma: f64, povm: PovmKind, qsi: QsiKind) -> Vec<u64> {
    vec![tag, code.rotation() as u64, code.binomial() as u64, gamma.to_bits(), povm_index(povm), qsi_index(qsi)]
}

fn describe(code: &CodeParams, gamma: f64, povm: PovmKind, qsi: QsiKind) -> String {
    format!("N={} K={} gamma={gamma} povm={povm} qsi={qsi}", code.rotation(), code.binomial())
}

/// Builds each POVM once per run.
#[derive(Default)]
pub struct PovmCache {
    built: HashMap<(PovmKind, usize), PhasePovm>,
}

impl PovmCache {
    pub fn get(&mut self, kind: PovmKind, n_max: usize) -> Result<PhasePovm> {
        if let Some(p) = self.built.get(&(kind, n_max)) {
            return Ok(p.clone());
        }
        let p = PhasePovm::new(kind, n_max)?;
        self.built.insert((kind, n_max), p.clone());
        Ok(p)
    }
}

/// Failure tallies for one lattice point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeCounts {
    pub shots: u64,
    /// One entry per decoder.
    pub failures: Vec<u64>,
    pub flips: u64,
    pub flip_slots: u64,
}

impl LatticeCounts {
    pub fn rate(&self, i: usize) -> f64 {
        self.failures[i] as f64 / self.shots.max(1) as f64
    }

    fn converged(&self, shots: &Shots) -> bool {
        self.failures.iter().all(|&k| {
            if k == 0 {
                return false;
            }
            let (lo, hi) = stats::wilson_interval(k, self.shots, shots.level);
            (hi - lo) / 2.0 < shots.rel_halfwidth * k as f64 / self.shots as f64
        })
    }
}

/// Runs shots of one lattice configuration, scoring every decoder on the same
/// measurement record.
pub fn run_lattice_point(
    sim: &LatticeSimulator,
    decoders: &[Decoder],
    shots: &Shots,
    seed: u64,
    keys: &[u64],
) -> Result<LatticeCounts> {
    let slots = sim.lattice().primal().len() as u64;
    let mut counts = LatticeCounts { shots: 0, failures: vec![0; decoders.len()], flips: 0, flip_slots: 0 };
    loop {
        let start = counts.shots as usize;
        let n = if start < shots.target {
            shots.target - start
        } else if shots.adaptive && start < shots.cap && !counts.converged(shots) {
            shots.batch.min(shots.cap - start)
        } else {
            break;
        };
        let results: Vec<(Vec<bool>, u64)> = (start..start + n)
            .into_par_iter()
            .map(|s| {
                let mut k = keys.to_vec();
                k.push(s as u64);
                let mut rng = seeding::stream(seed, &k);
                let m = sim.measure(&mut rng)?;
                let w = m.primal_weights(sim.lattice());
                let fails = decoders
                    .iter()
                    .map(|d| lattice::evaluate(sim.lattice(), &m.flips, &w, d).map(|r| r.2))
                    .collect::<Result<Vec<bool>>>()?;
                Ok((fails, m.flips.iter().filter(|&&f| f).count() as u64))
            })
            .collect::<Result<_>>()?;
        for (fails, flips) in results {
            for (i, f) in fails.into_iter().enumerate() {
                counts.failures[i] += f as u64;
            }
            counts.flips += flips;
            counts.flip_slots += slots;
        }
        counts.shots += n as u64;
    }
    Ok(counts)
}

/// Outcome of a batch run.
#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub aborted: Vec<String>,
}

impl RunReport {
    pub fn success(&self) -> bool {
        self.aborted.is_empty()
    }
}

fn status(r: &Result<()>) -> String {
    match r {
        Ok(()) => "ok".into(),
        Err(e) => format!("aborted: {e}"),
    }
}

pub fn meas_error_rows(cfg: &ExperimentConfig, povms: &mut PovmCache) -> Result<Vec<MeasErrorRow>> {
    let mut rows = Vec::new();
    for code in cfg.codes()? {
        for &povm in &cfg.grid.povms {
            for &q in &cfg.grid.qsi {
                let mut row = MeasErrorRow {
                    n: code.rotation(),
                    k: code.binomial(),
                    nbar: code.mean_photon(),
                    povm: povm.to_string(),
                    qsi: q.to_string(),
                    q_exact: f64::NAN,
                    q_mc: None,
                    q_stderr: None,
                    shots: 0,
                    status: String::new(),
                };
                let res = (|| {
                    let p = povms.get(povm, code.default_cutoff())?;
                    row.q_exact = qsi::measurement_error_exact(&code, &p, q, cfg.meas.grid)?;
                    if cfg.meas.shots > 0 {
                        let mut rng = seeding::stream(cfg.seed, &point_keys(TAG_MEAS, &code, 0.0, povm, q));
                        let est = qsi::measurement_error_rate(&code, &p, q, cfg.meas.shots, &mut rng)?;
                        row.q_mc = Some(est.rate);
                        row.q_stderr = Some(est.stderr);
                        row.shots = est.shots;
                    }
                    Ok(())
                })();
                row.status = status(&res);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub fn chain_rows(cfg: &ExperimentConfig) -> Result<Vec<ChainRow>> {
    let mut rows = Vec::new();
    for code in cfg.codes()? {
        for &povm in &cfg.grid.povms {
            for &q in &cfg.grid.qsi {
                for &gamma in &cfg.grid.gammas {
                    let mut row = ChainRow {
                        n: code.rotation(),
                        k: code.binomial(),
                        nbar: code.mean_photon(),
                        gamma,
                        povm: povm.to_string(),
                        qsi: q.to_string(),
                        length: cfg.chain.length,
                        fidelity: f64::NAN,
                        infidelity: f64::NAN,
                        stderr: f64::NAN,
                        shots: 0,
                        status: String::new(),
                    };
                    let res = (|| {
                        let mut cc = ChainConfig::new(code, gamma, povm, q, cfg.chain.shots);
                        cc.length = cfg.chain.length;
                        cc.truncation = cfg.grid.truncation;
                        let sim = ChainSimulator::new(cc)?;
                        let keys = point_keys(TAG_CHAIN, &code, gamma, povm, q);
                        let est = sim.run(cfg.chain.shots, seeding::derive(cfg.seed, &keys))?;
                        row.fidelity = est.fidelity;
                        row.infidelity = est.infidelity();
                        row.stderr = est.stderr;
                        row.shots = est.shots;
                        Ok(())
                    })();
                    row.status = status(&res);
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}

/// Flip rate for the hybrid decoder, from the cache or a fresh pre-pass.
pub fn calibrated_flip_rate(
    cfg: &ExperimentConfig,
    cache: &mut CalibrationCache,
    povms: &mut PovmCache,
    code: CodeParams,
    gamma: f64,
    povm: PovmKind,
    q: QsiKind,
) -> Result<f64> {
    let key = CalibrationKey::new(gamma, code.rotation(), code.binomial(), povm, q);
    if let Some(e) = cache.get(&key) {
        return Ok(e.p_e);
    }
    let p = povms.get(povm, code.default_cutoff())?;
    let lat = Lattice::new(cfg.calibration.distance)?;
    let sim = LatticeSimulator::new(lat, code, gamma, p, q, cfg.grid.truncation)?;
    let keys = point_keys(TAG_CALIBRATE, &code, gamma, povm, q);
    let p_e = calibrate_flip_rate(&sim, cfg.calibration.shots, cfg.seed, &keys)?;
    cache.insert(CalibrationEntry {
        gamma,
        rotation: code.rotation(),
        binomial: code.binomial(),
        povm,
        qsi: q,
        p_e,
        shots: cfg.calibration.shots,
    });
    Ok(p_e)
}

pub fn calibrate_rows(cfg: &ExperimentConfig, cache: &mut CalibrationCache) -> Result<Vec<CalibrationRow>> {
    let mut povms = PovmCache::default();
    let mut rows = Vec::new();
    for code in cfg.codes()? {
        for &povm in &cfg.grid.povms {
            for &q in &cfg.grid.qsi {
                for &gamma in &cfg.grid.gammas {
                    let res = calibrated_flip_rate(cfg, cache, &mut povms, code, gamma, povm, q);
                    let key = CalibrationKey::new(gamma, code.rotation(), code.binomial(), povm, q);
                    rows.push(CalibrationRow {
                        gamma,
                        n: code.rotation(),
                        k: code.binomial(),
                        povm: povm.to_string(),
                        qsi: q.to_string(),
                        p_e: res.as_ref().ok().copied(),
                        shots: cache.get(&key).map_or(0, |e| e.shots),
                        status: status(&res.map(|_| ())),
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Logical error rates over codes, losses, distances and decoders.
pub fn lattice_rows(
    cfg: &ExperimentConfig,
    gammas: &[f64],
    cache: &mut CalibrationCache,
    povms: &mut PovmCache,
) -> Result<Vec<LatticeRow>> {
    let mut rows = Vec::new();
    let needs_pe = cfg.grid.decoders.contains(&DecoderKind::Hybrid);
    for code in cfg.codes()? {
        for &povm in &cfg.grid.povms {
            for &q in &cfg.grid.qsi {
                for &gamma in gammas {
                    let p_e = if needs_pe {
                        Some(calibrated_flip_rate(cfg, cache, povms, code, gamma, povm, q))
                    } else {
                        None
                    };
                    for &distance in &cfg.grid.distances {
                        let base = LatticeRow {
                            n: code.rotation(),
                            k: code.binomial(),
                            nbar: code.mean_photon(),
                            distance,
                            gamma,
                            povm: povm.to_string(),
                            qsi: q.to_string(),
                            decoder: String::new(),
                            shots: 0,
                            failures: 0,
                            p_l: f64::NAN,
                            ci_lo: f64::NAN,
                            ci_hi: f64::NAN,
                            p_flip: f64::NAN,
                            p_e: p_e.as_ref().and_then(|r| r.as_ref().ok().copied()),
                            status: String::new(),
                        };
                        let mut run = || -> Result<LatticeCounts> {
                            let decoders = cfg
                                .grid
                                .decoders
                                .iter()
                                .map(|&k| match &p_e {
                                    Some(Err(e)) if k == DecoderKind::Hybrid => {
                                        Err(Error::Config(format!("calibration failed: {e}")))
                                    }
                                    Some(Ok(p)) => Decoder::of_kind(k, Some(*p)),
                                    _ => Decoder::of_kind(k, None),
                                })
                                .collect::<Result<Vec<_>>>()?;
                            let p = povms.get(povm, code.default_cutoff())?;
                            let sim = LatticeSimulator::new(Lattice::new(distance)?, code, gamma, p, q, cfg.grid.truncation)?;
                            let mut keys = point_keys(TAG_LATTICE, &code, gamma, povm, q);
                            keys.push(distance as u64);
                            run_lattice_point(&sim, &decoders, &cfg.shots, cfg.seed, &keys)
                        };
                        match run() {
                            Ok(c) => {
                                for (i, &kind) in cfg.grid.decoders.iter().enumerate() {
                                    let (lo, hi) = stats::wilson_interval(c.failures[i], c.shots, cfg.shots.level);
                                    rows.push(LatticeRow {
                                        decoder: kind.to_string(),
                                        shots: c.shots,
                                        failures: c.failures[i],
                                        p_l: c.rate(i),
                                        ci_lo: lo,
                                        ci_hi: hi,
                                        p_flip: c.flips as f64 / c.flip_slots.max(1) as f64,
                                        p_e: if kind == DecoderKind::Hybrid { base.p_e } else { None },
                                        status: "ok".into(),
                                        ..base.clone()
                                    });
                                }
                            }
                            Err(e) => {
                                for &kind in &cfg.grid.decoders {
                                    rows.push(LatticeRow {
                                        decoder: kind.to_string(),
                                        status: format!("aborted: {e}"),
                                        ..base.clone()
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn group_key(r: &LatticeRow) -> (usize, usize, String, String, String) {
    (r.n, r.k, r.povm.clone(), r.qsi.clone(), r.decoder.clone())
}

/// Threshold summary per `(code, povm, qsi, decoder)` group.
pub fn threshold_rows(cfg: &ExperimentConfig, points: &[LatticeRow], povms: &mut PovmCache) -> Result<Vec<ThresholdRow>> {
    let mut groups: Vec<(usize, usize, String, String, String)> = Vec::new();
    for r in points {
        let k = group_key(r);
        if !groups.contains(&k) {
            groups.push(k);
        }
    }
    let mut rows = Vec::new();
    for (gi, key) in groups.iter().enumerate() {
        let (n, k, povm_s, qsi_s, decoder) = key.clone();
        let code = CodeParams::new(n, k)?;
        let povm: PovmKind = povm_s.parse()?;
        let q_kind: QsiKind = qsi_s.parse()?;
        let q = povms
            .get(povm, code.default_cutoff())
            .and_then(|p| qsi::measurement_error_exact(&code, &p, q_kind, cfg.meas.grid))
            .unwrap_or(f64::NAN);
        let members: Vec<&LatticeRow> = points.iter().filter(|r| &group_key(r) == key).collect();
        let mut curves = Vec::new();
        for &d in &cfg.grid.distances {
            let pts = members
                .iter()
                .filter(|r| r.distance == d && r.status == "ok")
                .map(|r| (r.gamma, r.failures, r.shots))
                .collect();
            curves.push(Curve::new(d, pts));
        }
        let mut rng = seeding::stream(cfg.seed, &[TAG_THRESHOLD, gi as u64]);
        let mut row = ThresholdRow {
            n,
            k,
            nbar: code.mean_photon(),
            povm: povm_s,
            qsi: qsi_s,
            decoder,
            q,
            gamma_c: None,
            ci_lo: None,
            ci_hi: None,
            crossings: String::new(),
            status: String::new(),
        };
        match stats::estimate_threshold(&curves, cfg.threshold.bootstrap, cfg.shots.level, &mut rng) {
            Ok(t) => {
                row.gamma_c = t.gamma_c;
                row.ci_lo = t.ci.map(|c| c.0);
                row.ci_hi = t.ci.map(|c| c.1);
                row.crossings = t
                    .crossings
                    .iter()
                    .map(|(a, b, c)| match c {
                        Some(g) => format!("{a}-{b}:{g}"),
                        None => format!("{a}-{b}:none"),
                    })
                    .collect::<Vec<_>>()
                    .join(";");
                row.status = if t.is_bounded() { "bounded".into() } else { "unbounded".into() };
            }
            Err(e) => row.status = format!("aborted: {e}"),
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Losses swept by the slope experiment.
pub fn alpha_gammas(cfg: &ExperimentConfig) -> Vec<f64> {
    match cfg.alpha.gamma_c {
        Some(gc) if !cfg.alpha.fractions.is_empty() => cfg.alpha.fractions.iter().map(|f| f * gc).collect(),
        _ => cfg.grid.gammas.clone(),
    }
}

pub fn alpha_rows(cfg: &ExperimentConfig, points: &[LatticeRow]) -> Vec<AlphaRow> {
    let mut rows = Vec::new();
    let mut seen = Vec::new();
    for r in points {
        let key = (group_key(r), r.gamma.to_bits());
        if seen.contains(&key) {
            continue;
        }
        seen.push(key.clone());
        let members: Vec<&LatticeRow> =
            points.iter().filter(|p| (group_key(p), p.gamma.to_bits()) == key).collect();
        let table: Vec<(usize, f64)> =
            members.iter().filter(|p| p.status == "ok").map(|p| (p.distance, p.p_l)).collect();
        let gamma_c = cfg.alpha.gamma_c;
        let mut row = AlphaRow {
            n: r.n,
            k: r.k,
            nbar: r.nbar,
            povm: r.povm.clone(),
            qsi: r.qsi.clone(),
            decoder: r.decoder.clone(),
            gamma: r.gamma,
            gamma_c,
            fraction: gamma_c.map(|g| r.gamma / g),
            alpha: None,
            alpha_stderr: None,
            ci_lo: None,
            ci_hi: None,
            r_squared: None,
            points: table.iter().filter(|p| p.1 > 0.0).count(),
            status: String::new(),
        };
        match stats::fit_alpha(&table, cfg.shots.level) {
            Ok(f) => {
                row.alpha = Some(f.alpha);
                row.alpha_stderr = Some(f.stderr);
                row.ci_lo = Some(f.ci.0);
                row.ci_hi = Some(f.ci.1);
                row.r_squared = Some(f.r_squared);
                row.status = "ok".into();
            }
            Err(e) => row.status = format!("aborted: {e}"),
        }
        rows.push(row);
    }
    rows
}

fn aborted<'a>(statuses: impl Iterator<Item = (&'a str, String)>) -> Vec<String> {
    statuses.filter(|(s, _)| s.starts_with("aborted")).map(|(s, what)| format!("{what}: {s}")).collect()
}

/// Runs `experiment`, writing CSV tables and a JSON sidecar under `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig, experiment: Experiment) -> Result<RunReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(cfg, experiment))
}

fn run_in_pool(cfg: &ExperimentConfig, experiment: Experiment) -> Result<RunReport> {
    let mut sidecar = Sidecar::new(cfg, experiment);
    let mut report = RunReport::default();
    let tables = output::tables(experiment);
    let mut povms = PovmCache::default();
    let mut write = |idx: usize, rows: usize, f: &dyn Fn(&std::path::Path, &[&str]) -> Result<()>| -> Result<()> {
        let (name, cols) = &tables[idx];
        let path = cfg.out.join(name);
        f(&path, cols)?;
        sidecar.tables.push(output::TableInfo {
            file: name.clone(),
            columns: cols.iter().map(|c| c.to_string()).collect(),
            rows,
        });
        report.files.push(path);
        Ok(())
    };
    let cal_path = cfg.calibration_path();
    let mut used_calibration = false;
    let mut cache = CalibrationCache::load(&cal_path)?;

    match experiment {
        Experiment::MeasError => {
            let rows = meas_error_rows(cfg, &mut povms)?;
            write(0, rows.len(), &|p, c| output::write_csv(p, c, &rows))?;
            report.aborted = aborted(rows.iter().map(|r| (r.status.as_str(), format!("N={} K={} {} {}", r.n, r.k, r.povm, r.qsi))));
        }
        Experiment::Chain1d => {
            let rows = chain_rows(cfg)?;
            write(0, rows.len(), &|p, c| output::write_csv(p, c, &rows))?;
            report.aborted = aborted(rows.iter().map(|r| {
                (r.status.as_str(), format!("N={} K={} gamma={} {} {}", r.n, r.k, r.gamma, r.povm, r.qsi))
            }));
        }
        Experiment::Calibrate => {
            let rows = calibrate_rows(cfg, &mut cache)?;
            write(0, rows.len(), &|p, c| output::write_csv(p, c, &rows))?;
            used_calibration = true;
            report.aborted = aborted(rows.iter().map(|r| {
                (r.status.as_str(), format!("N={} K={} gamma={} {} {}", r.n, r.k, r.gamma, r.povm, r.qsi))
            }));
        }
        Experiment::Threshold | Experiment::Alpha => {
            let gammas = if experiment == Experiment::Alpha { alpha_gammas(cfg) } else { cfg.grid.gammas.clone() };
            let points = lattice_rows(cfg, &gammas, &mut cache, &mut povms)?;
            used_calibration = cfg.grid.decoders.contains(&DecoderKind::Hybrid);
            write(0, points.len(), &|p, c| output::write_csv(p, c, &points))?;
            report.aborted = aborted(points.iter().map(|r| {
                (
                    r.status.as_str(),
                    format!("N={} K={} L={} gamma={} {} {} {}", r.n, r.k, r.distance, r.gamma, r.povm, r.qsi, r.decoder),
                )
            }));
            if experiment == Experiment::Threshold {
                let rows = threshold_rows(cfg, &points, &mut povms)?;
                write(1, rows.len(), &|p, c| output::write_csv(p, c, &rows))?;
            } else {
                let rows = alpha_rows(cfg, &points);
                write(1, rows.len(), &|p, c| output::write_csv(p, c, &rows))?;
            }
        }
    }

    if used_calibration {
        cache.save(&cal_path)?;
        sidecar.calibration_file = Some(cal_path);
        sidecar.calibration = cache.entries().to_vec();
    }
    sidecar.aborted = report.aborted.clone();
    let json = cfg.out.join(format!("{}.json", experiment.file_stem()));
    sidecar.write(&json)?;
    report.files.push(json);
    Ok(report)
}

/// Describes a point for logs.
pub fn point_label(code: &CodeParams, gamma: f64, povm: PovmKind, q: QsiKind) -> String {
    describe(code, gamma, povm, q)
}
