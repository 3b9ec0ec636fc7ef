//! Teleportation along a 1D cluster of bosonic qubits.
//!
//! Qubit 1 starts maximally entangled with a noiseless two-level reference.
//! After noisy CROTs, qubits `1..M-1` are phase-measured in order and the
//! hard outcomes fix a Pauli recovery on qubit `M`, which is noiseless and
//! carried as a logical qubit. The figure of merit is the entanglement
//! fidelity with the ideal output `(I ⊗ H^{M-1}) |Φ>`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::code::{CodeParams, Logical, Sign};
use crate::error::{Error, Result};
use crate::fock::{FockVector, C64};
use crate::loss::{self, EmissionPrior, EmissionRecord, GateGraph, NoiseParams};
use crate::povm::{PhaseDensity, PhasePovm, PovmKind};
use crate::qsi::{bin_phase, harden, LikelihoodModel, QsiKind, DEFAULT_TRUNCATION};
use crate::seeding;

/// Largest state vector a chain shot may allocate.
pub const MAX_STATE_DIM: usize = 1 << 22;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainConfig {
    /// Number of cluster qubits `M`, at least 2.
    pub length: usize,
    pub code: CodeParams,
    pub gamma: f64,
    pub povm: PovmKind,
    pub qsi: QsiKind,
    pub shots: usize,
    pub truncation: usize,
    /// Fock cutoff; the code default when `None`.
    pub n_max: Option<usize>,
}

impl ChainConfig {
    pub fn new(code: CodeParams, gamma: f64, povm: PovmKind, qsi: QsiKind, shots: usize) -> Self {
        Self { length: 3, code, gamma, povm, qsi, shots, truncation: DEFAULT_TRUNCATION, n_max: None }
    }
}

/// Pauli byproduct `X^x Z^z` on the output qubit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PauliFrame {
    pub x: bool,
    pub z: bool,
}

/// Byproduct left on qubit `M` by X-basis outcomes on qubits `1..M-1`.
///
/// Each measurement applies `X^m H`; pushing the accumulated Pauli through
/// the next Hadamard swaps its X and Z parts.
pub fn recovery_frame(outcomes: &[Sign]) -> PauliFrame {
    outcomes.iter().fold(PauliFrame::default(), |f, &s| PauliFrame { x: f.z ^ (s == Sign::Minus), z: f.x })
}

/// Dense tensor with axes `[reference, remaining modes.., output logical]`.
#[derive(Clone, Debug)]
struct Tensor {
    dims: Vec<usize>,
    data: Vec<C64>,
}

impl Tensor {
    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    /// `out[.., n, ..] = Σ_m op[n, m] in[.., m, ..]` along `axis`.
    fn apply_axis(&self, axis: usize, op: &DMatrix<C64>) -> Tensor {
        let d = self.dims[axis];
        let stride = self.strides()[axis];
        let outer = self.data.len() / (d * stride);
        let mut out = vec![C64::new(0.0, 0.0); self.data.len()];
        for o in 0..outer {
            let base = o * d * stride;
            for i in 0..stride {
                for n in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for m in 0..d {
                        let v = self.data[base + m * stride + i];
                        if v.re != 0.0 || v.im != 0.0 {
                            acc += op[(n, m)] * v;
                        }
                    }
                    out[base + n * stride + i] = acc;
                }
            }
        }
        Tensor { dims: self.dims.clone(), data: out }
    }

    /// `Σ_n conj(bra[n]) in[.., n, ..]`, removing `axis`.
    fn contract(&self, axis: usize, bra: &[C64]) -> Tensor {
        let d = self.dims[axis];
        let stride = self.strides()[axis];
        let outer = self.data.len() / (d * stride);
        let mut out = vec![C64::new(0.0, 0.0); outer * stride];
        for o in 0..outer {
            for n in 0..d {
                let b = bra[n].conj();
                if b.re == 0.0 && b.im == 0.0 {
                    continue;
                }
                let src = o * d * stride + n * stride;
                for i in 0..stride {
                    out[o * stride + i] += b * self.data[src + i];
                }
            }
        }
        let mut dims = self.dims.clone();
        dims.remove(axis);
        Tensor { dims, data: out }
    }

    /// Adds `Σ_rest ψ[n, rest] conj(ψ[m, rest])` into `rho`.
    fn accumulate_reduced(&self, axis: usize, rho: &mut DMatrix<C64>) {
        let d = self.dims[axis];
        let stride = self.strides()[axis];
        let outer = self.data.len() / (d * stride);
        for o in 0..outer {
            for i in 0..stride {
                let at = |n: usize| self.data[o * d * stride + n * stride + i];
                for n in 0..d {
                    let a = at(n);
                    if a.re == 0.0 && a.im == 0.0 {
                        continue;
                    }
                    for m in 0..d {
                        rho[(n, m)] += a * at(m).conj();
                    }
                }
            }
        }
    }

    fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Per-shot result.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainShot {
    pub fidelity: f64,
    pub phases: Vec<f64>,
    pub outcomes: Vec<Sign>,
    pub emissions: usize,
}

/// Monte Carlo estimate of the entanglement fidelity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainEstimate {
    pub fidelity: f64,
    pub stderr: f64,
    pub shots: usize,
}

impl ChainEstimate {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.fidelity
    }

    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len().max(1) as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { fidelity: mean, stderr: (var / n).sqrt(), shots: samples.len() }
    }
}

/// Precomputed pieces shared by every shot of one configuration.
#[derive(Clone, Debug)]
pub struct ChainSimulator {
    cfg: ChainConfig,
    n_max: usize,
    noise: NoiseParams,
    graph: GateGraph,
    povm: PhasePovm,
    model: LikelihoodModel,
    populations: Vec<f64>,
    ideal: Tensor,
    target: [C64; 4],
}

impl ChainSimulator {
    pub fn new(cfg: ChainConfig) -> Result<Self> {
        if cfg.length < 2 {
            return Err(Error::Config("chain length must be at least 2".into()));
        }
        if cfg.shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        if cfg.qsi == QsiKind::FullMl && cfg.length > 3 {
            return Err(Error::Config("full ML inference supports at most two measured qubits".into()));
        }
        let code = cfg.code;
        let n_max = cfg.n_max.unwrap_or_else(|| code.default_cutoff());
        let modes = cfg.length - 1;
        let dim = 4 * (n_max + 1).pow(modes as u32);
        if dim > MAX_STATE_DIM {
            return Err(Error::ChainTooLarge(dim));
        }
        let noise = NoiseParams::new(cfg.gamma, code.rotation())?;
        let povm = PhasePovm::new(cfg.povm, n_max)?;
        let model = LikelihoodModel::new(&code, cfg.gamma, &povm, cfg.truncation)?;
        let populations = loss::emission_populations(&code, EmissionPrior::CodePlus, n_max)?;
        let ideal = ideal_state(&code, modes, n_max)?;
        let target = target_state(cfg.length);
        Ok(Self { graph: GateGraph::path(cfg.length), cfg, n_max, noise, povm, model, populations, ideal, target })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.cfg
    }

    pub fn povm(&self) -> &PhasePovm {
        &self.povm
    }

    pub fn shot<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChainShot> {
        let modes = self.cfg.length - 1;
        // qubit M is noiseless: no emissions
        let mut times: Vec<Vec<f64>> = (0..modes)
            .map(|_| loss::sample_emissions(&self.populations, &self.noise, rng))
            .collect();
        times.push(Vec::new());
        let record = EmissionRecord::new(times, self.noise.t_gate())?;

        let mut state = self.ideal.clone();
        for a in 0..modes {
            let e = loss::error_operator(a, &record, &self.graph, &self.noise, self.n_max).to_dense();
            state = state.apply_axis(1 + a, &e);
        }

        let mut ensemble = vec![state];
        let mut phases = Vec::with_capacity(modes);
        for _ in 0..modes {
            // the next unmeasured mode is always axis 1
            let mut rho = DMatrix::from_element(self.n_max + 1, self.n_max + 1, C64::new(0.0, 0.0));
            for t in &ensemble {
                t.accumulate_reduced(1, &mut rho);
            }
            let density = PhaseDensity::from_operator(&self.povm, &rho)?;
            let phi = density.sample(rng)?;
            phases.push(phi);
            let kraus = self.povm.kraus_vectors(phi);
            let mut next = Vec::with_capacity(ensemble.len() * kraus.len());
            for t in &ensemble {
                for v in &kraus {
                    let post = t.contract(1, v.amplitudes());
                    if post.norm_sqr() > 0.0 {
                        next.push(post);
                    }
                }
            }
            ensemble = next;
        }

        let outcomes = self.infer(&phases);
        let frame = recovery_frame(&outcomes);
        // apply the inverse frame, Z^z X^x, to the output axis
        let mut fid = 0.0;
        let mut trace = 0.0;
        for t in &ensemble {
            let mut v = [t.data[0], t.data[1], t.data[2], t.data[3]];
            if frame.x {
                v.swap(0, 1);
                v.swap(2, 3);
            }
            if frame.z {
                v[1] = -v[1];
                v[3] = -v[3];
            }
            let overlap: C64 = self.target.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            fid += overlap.norm_sqr();
            trace += v.iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        if trace <= 0.0 {
            return Err(Error::DegenerateDensity(phases.last().copied().unwrap_or(0.0)));
        }
        Ok(ChainShot { fidelity: fid / trace, phases, outcomes, emissions: record.total() })
    }

    fn infer(&self, phases: &[f64]) -> Vec<Sign> {
        let n = self.cfg.code.rotation();
        let modes = phases.len();
        match self.cfg.qsi {
            QsiKind::Binning => phases.iter().map(|&p| bin_phase(p, n)).collect(),
            QsiKind::FullMl if modes == 2 => {
                let (a, b) = self.model.full_ml_2q(phases[0], phases[1]);
                vec![a, b]
            }
            QsiKind::LocalMl | QsiKind::FullMl => {
                let mut out: Vec<Sign> = Vec::with_capacity(modes);
                for (a, &phi) in phases.iter().enumerate() {
                    let mut neighbors = Vec::with_capacity(2);
                    if a > 0 {
                        neighbors.push(Some(out[a - 1]));
                    }
                    if a + 1 < modes {
                        neighbors.push(None);
                    }
                    let (fp, fm) = self.model.local(phi, &neighbors);
                    out.push(harden(fp, fm));
                }
                out
            }
        }
    }

    /// Runs `shots` shots with per-shot streams derived from `seed`.
    pub fn run(&self, shots: usize, seed: u64) -> Result<ChainEstimate> {
        let samples: Result<Vec<f64>> = (0..shots)
            .into_par_iter()
            .map(|s| {
                let mut rng = seeding::stream(seed, &[s as u64]);
                self.shot(&mut rng).map(|r| r.fidelity)
            })
            .collect();
        Ok(ChainEstimate::from_samples(&samples?))
    }
}

/// Convenience wrapper: build and run one configuration.
pub fn run_chain(cfg: &ChainConfig, seed: u64) -> Result<ChainEstimate> {
    let sim = ChainSimulator::new(cfg.clone())?;
    sim.run(cfg.shots, seed)
}

/// Reference ⊗ modes ⊗ output after ideal CROTs.
fn ideal_state(code: &CodeParams, modes: usize, n_max: usize) -> Result<Tensor> {
    let d = n_max + 1;
    let mut dims = vec![2];
    dims.extend(std::iter::repeat_n(d, modes));
    dims.push(2);
    let zero = code.codeword(Logical::Zero, n_max)?;
    let one = code.codeword(Logical::One, n_max)?;
    let plus = code.plus_minus(Sign::Plus, n_max)?;
    let size: usize = dims.iter().product();
    let mut data = vec![C64::new(0.0, 0.0); size];
    let rot = code.rotation();
    let lifted = |v: &FockVector| -> Vec<(usize, C64)> { v.support().collect() };
    let first = [lifted(&zero), lifted(&one)];
    let bulk = lifted(&plus);

    // enumerate the (sparse) support of every factor
    let mut stack: Vec<(usize, Vec<usize>, C64)> = Vec::new();
    for (r, first_support) in first.iter().enumerate() {
        for &(n, amp) in first_support {
            stack.push((r, vec![n], amp * FRAC_1_SQRT_2));
        }
    }
    while let Some((r, ns, amp)) = stack.pop() {
        if ns.len() < modes {
            for &(n, a) in &bulk {
                let mut next = ns.clone();
                next.push(n);
                stack.push((r, next, amp * a));
            }
            continue;
        }
        for mu in 0..2 {
            let mut phase = 0.0;
            for w in ns.windows(2) {
                phase += PI * (w[0] * w[1]) as f64 / (rot * rot) as f64;
            }
            phase += PI * (ns[modes - 1] * mu) as f64 / rot as f64;
            let mut idx = r;
            for &n in &ns {
                idx = idx * d + n;
            }
            idx = idx * 2 + mu;
            data[idx] = amp * FRAC_1_SQRT_2 * C64::from_polar(1.0, phase);
        }
    }
    Ok(Tensor { dims, data })
}

/// `(I ⊗ H^{M-1}) (|00> + |11>)/√2` in the basis `|r, μ>`.
fn target_state(length: usize) -> [C64; 4] {
    let s = FRAC_1_SQRT_2;
    let v = if (length - 1) % 2 == 0 {
        [s, 0.0, 0.0, s]
    } else {
        // |0>|+> + |1>|->
        [0.5, 0.5, 0.5, -0.5]
    };
    v.map(|x| C64::new(x, 0.0))
}
