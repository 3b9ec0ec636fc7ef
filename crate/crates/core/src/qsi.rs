//! Qubit state inference: mapping phase outcomes to hard X-basis outcomes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::code::{CodeParams, Sign};
use crate::error::{Error, Result};
use crate::fock::{FockVector, ModeOperator, C64};
use crate::povm::{PhaseDensity, PhasePovm};

/// Default loss-order truncation `u`.
pub const DEFAULT_TRUNCATION: usize = 3;

/// Cap applied to soft weights when the chosen hypothesis has zero likelihood.
pub const SOFT_WEIGHT_CAP: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QsiKind {
    Binning,
    LocalMl,
    FullMl,
}

impl QsiKind {
    pub const ALL: [QsiKind; 3] = [QsiKind::Binning, QsiKind::LocalMl, QsiKind::FullMl];

    pub fn name(self) -> &'static str {
        match self {
            QsiKind::Binning => "binning",
            QsiKind::LocalMl => "local-ml",
            QsiKind::FullMl => "full-ml",
        }
    }
}

impl fmt::Display for QsiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QsiKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "binning" | "bin" => Ok(QsiKind::Binning),
            "local-ml" | "lml" => Ok(QsiKind::LocalMl),
            "full-ml" | "ml" => Ok(QsiKind::FullMl),
            other => Err(Error::Config(format!("unknown QSI kind '{other}'"))),
        }
    }
}

/// Binning: `2N` regions centred on `πl/N`; even `l` is `+1`.
///
/// Region `l` is `(π(l-½)/N, π(l+½)/N]`, so a boundary point belongs to the
/// bin below it and `φ = π/(2N)` reads `+1`.
pub fn bin_phase(phi: f64, rotation: usize) -> Sign {
    let n = rotation as f64;
    let x = phi.rem_euclid(2.0 * PI) * n / PI;
    let l = (x - 0.5 - 1e-12).ceil() as i64;
    let l = l.rem_euclid(2 * rotation as i64);
    Sign::from_bool_plus(l % 2 == 0)
}

/// Arcs `(lo, hi)` making up the `sign` binning region.
pub fn bin_arcs(rotation: usize, sign: Sign) -> Vec<(f64, f64)> {
    let n = rotation as f64;
    let first = match sign {
        Sign::Plus => 0,
        Sign::Minus => 1,
    };
    (first..2 * rotation)
        .step_by(2)
        .map(|l| (PI * (l as f64 - 0.5) / n, PI * (l as f64 + 0.5) / n))
        .collect()
}

/// Larger likelihood wins; exact ties go to `+1`.
pub fn harden(f_plus: f64, f_minus: f64) -> Sign {
    Sign::from_bool_plus(f_plus >= f_minus)
}

/// `-ln(f_other / f_chosen)`, capped at [`SOFT_WEIGHT_CAP`].
///
/// Can be negative when `chosen` was not picked by [`harden`].
pub fn soft_weight(f_plus: f64, f_minus: f64, chosen: Sign) -> f64 {
    let (mine, other) = match chosen {
        Sign::Plus => (f_plus, f_minus),
        Sign::Minus => (f_minus, f_plus),
    };
    if mine <= 0.0 {
        return SOFT_WEIGHT_CAP;
    }
    if other <= 0.0 {
        return SOFT_WEIGHT_CAP;
    }
    (-(other / mine).ln()).min(SOFT_WEIGHT_CAP)
}

/// One inferred qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftRecord {
    pub phi: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    pub hard: Sign,
    pub weight: f64,
}

impl SoftRecord {
    /// Record with the hard outcome chosen by `hard`; a negative weight (a
    /// binning decision against the likelihoods) is clamped to zero.
    pub fn new(phi: f64, f_plus: f64, f_minus: f64, hard: Sign) -> Self {
        let weight = soft_weight(f_plus, f_minus, hard).max(0.0);
        Self { phi, f_plus, f_minus, hard, weight }
    }
}

/// Photon-loss Kraus operators up to order `u` and the matching dephasing
/// rotations `C_k = exp(-iπk n̂ / N²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrausChannel {
    gamma: f64,
    truncation: usize,
    rotation: usize,
}

impl KrausChannel {
    pub fn new(gamma: f64, truncation: usize, rotation: usize) -> Self {
        Self { gamma, truncation, rotation }
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// `(1-e^{-γ})^{k/2} / √k!`.
    fn coefficient(&self, k: usize) -> f64 {
        let lnf: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
        ((k as f64 / 2.0) * (-(-self.gamma).exp_m1()).ln() - 0.5 * lnf).exp()
    }

    /// `A_k = (1-e^{-γ})^{k/2}/√k! · e^{-γn̂/2} âᵏ`.
    pub fn loss(&self, k: usize, n_max: usize) -> ModeOperator {
        if k == 0 {
            return ModeOperator::number_function(n_max, |n| C64::new((-self.gamma * n as f64 / 2.0).exp(), 0.0));
        }
        let c = self.coefficient(k);
        let g = self.gamma;
        // e^{-γn̂/2} âᵏ = âᵏ e^{-γ(n̂-k)/2}
        let diag = (0..=n_max)
            .map(|n| {
                if n < k {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(c * (-g * (n - k) as f64 / 2.0).exp(), 0.0)
                }
            })
            .collect();
        ModeOperator::Shifted { power: k, diag }
    }

    /// `A_k |ψ>`.
    pub fn apply_loss(&self, k: usize, psi: &FockVector) -> FockVector {
        let c = if k == 0 { 1.0 } else { self.coefficient(k) };
        let g = self.gamma;
        psi.annihilate(k).apply_number_function(|n| C64::new(c * (-g * n as f64 / 2.0).exp(), 0.0))
    }

    pub fn dephasing(&self, k: usize, n_max: usize) -> ModeOperator {
        let theta = PI * k as f64 / (self.rotation * self.rotation) as f64;
        ModeOperator::number_function(n_max, |n| C64::from_polar(1.0, -theta * n as f64))
    }

    /// Diagonal of `Σ_{k<=u} A_k† A_k`.
    pub fn completeness(&self, n_max: usize) -> Vec<f64> {
        (0..=n_max)
            .map(|n| {
                (0..=self.truncation.min(n))
                    .map(|k| {
                        let c = if k == 0 { 1.0 } else { self.coefficient(k) };
                        let fall: f64 = (0..k).map(|i| (n - i) as f64).product();
                        c * c * fall * (-self.gamma * (n - k) as f64).exp()
                    })
                    .sum()
            })
            .collect()
    }
}

/// Inference model for one `(code, γ, POVM, u)`: per-sign, per-loss-order
/// outcome densities and the loss-order prior.
#[derive(Clone, Debug)]
pub struct LikelihoodModel {
    rotation: usize,
    /// `g[s][k](φ) = Tr[F(φ) A_k |s><s| A_k†]`, `s = 0` for `+`.
    per_order: [Vec<PhaseDensity>; 2],
    /// `Σ_k g[s][k]`.
    total: [PhaseDensity; 2],
    /// `p_s(k) = Tr[A_k |s><s| A_k†]`.
    prior: [Vec<f64>; 2],
}

fn sign_index(s: Sign) -> usize {
    match s {
        Sign::Plus => 0,
        Sign::Minus => 1,
    }
}

impl LikelihoodModel {
    pub fn new(code: &CodeParams, gamma: f64, povm: &PhasePovm, truncation: usize) -> Result<Self> {
        let channel = KrausChannel::new(gamma, truncation, code.rotation());
        let n_max = povm.n_max();
        let build = |s: Sign| -> Result<(Vec<PhaseDensity>, Vec<f64>)> {
            let psi = code.plus_minus(s, n_max)?;
            let mut dens = Vec::with_capacity(truncation + 1);
            let mut prior = Vec::with_capacity(truncation + 1);
            for k in 0..=truncation {
                let v = channel.apply_loss(k, &psi);
                prior.push(v.norm_sqr());
                dens.push(povm.density(&v)?);
            }
            Ok((dens, prior))
        };
        let (gp, pp) = build(Sign::Plus)?;
        let (gm, pm) = build(Sign::Minus)?;
        let sum = |v: &[PhaseDensity]| v[1..].iter().fold(v[0].clone(), |acc, d| acc.add(d));
        Ok(Self {
            rotation: code.rotation(),
            total: [sum(&gp), sum(&gm)],
            per_order: [gp, gm],
            prior: [pp, pm],
        })
    }

    pub fn truncation(&self) -> usize {
        self.prior[0].len() - 1
    }

    /// Loss-order prior for a neighbor in state `s` (averaged over `±` for `None`).
    pub fn prior(&self, s: Option<Sign>) -> Vec<f64> {
        match s {
            Some(s) => self.prior[sign_index(s)].clone(),
            None => self.prior[0].iter().zip(&self.prior[1]).map(|(a, b)| 0.5 * (a + b)).collect(),
        }
    }

    /// Unrotated density of `ρ_s = Σ_k A_k|s><s|A_k†`.
    pub fn density(&self, s: Sign) -> &PhaseDensity {
        &self.total[sign_index(s)]
    }

    pub fn order_density(&self, s: Sign, k: usize) -> &PhaseDensity {
        &self.per_order[sign_index(s)][k]
    }

    fn dephasing_angle(&self, k: usize) -> f64 {
        PI * k as f64 / (self.rotation * self.rotation) as f64
    }

    /// `(f⁺, f⁻)` for a qubit whose neighbors hold the given hard outcomes.
    ///
    /// `f^s(φ) = Σ_J P(J) p_{ρ_s}(φ + πJ/N²)` where `P` is the distribution of
    /// the total neighbor loss order.
    pub fn local(&self, phi: f64, neighbors: &[Option<Sign>]) -> (f64, f64) {
        let mut dist = vec![1.0];
        for &s in neighbors {
            let p = self.prior(s);
            let mut next = vec![0.0; dist.len() + p.len() - 1];
            for (i, a) in dist.iter().enumerate() {
                for (j, b) in p.iter().enumerate() {
                    next[i + j] += a * b;
                }
            }
            dist = next;
        }
        let mut fp = 0.0;
        let mut fm = 0.0;
        for (j, &w) in dist.iter().enumerate() {
            let x = phi + self.dephasing_angle(j);
            fp += w * self.total[0].eval(x);
            fm += w * self.total[1].eval(x);
        }
        (fp, fm)
    }

    /// Joint likelihoods of the four hypotheses for two mutually dephasing
    /// qubits, ordered `(+,+), (+,-), (-,+), (-,-)`.
    pub fn joint_2q(&self, phi1: f64, phi2: f64) -> [f64; 4] {
        let u = self.truncation();
        let mut out = [0.0; 4];
        for (h, (s1, s2)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
            let mut acc = 0.0;
            for k in 0..=u {
                for kp in 0..=u {
                    acc += self.per_order[s1][k].eval(phi1 + self.dephasing_angle(kp))
                        * self.per_order[s2][kp].eval(phi2 + self.dephasing_angle(k));
                }
            }
            out[h] = acc;
        }
        out
    }

    /// Maximum-likelihood pair; ties resolved in hypothesis order.
    pub fn full_ml_2q(&self, phi1: f64, phi2: f64) -> (Sign, Sign) {
        let l = self.joint_2q(phi1, phi2);
        let mut best = 0;
        for h in 1..4 {
            if l[h] > l[best] {
                best = h;
            }
        }
        let s = |b: bool| Sign::from_bool_plus(!b);
        (s(best >= 2), s(best % 2 == 1))
    }

    /// Single-qubit marginals of the joint likelihood, for soft records.
    pub fn joint_2q_marginals(&self, phi1: f64, phi2: f64) -> [(f64, f64); 2] {
        let l = self.joint_2q(phi1, phi2);
        [(l[0] + l[1], l[2] + l[3]), (l[0] + l[2], l[1] + l[3])]
    }
}

/// Rate of disagreement between the inferred and ideal outcome at `γ = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeasurementError {
    pub rate: f64,
    pub stderr: f64,
    pub shots: usize,
}

/// Monte Carlo measurement error of `code` under `povm` with lossless
/// inference `qsi`.
///
/// Each shot samples `φ` from the twirled mixed logical state, draws the
/// ideal outcome from `p(±|φ)`, and compares it with the inferred one.
pub fn measurement_error_rate<R: Rng + ?Sized>(
    code: &CodeParams,
    povm: &PhasePovm,
    qsi: QsiKind,
    shots: usize,
    rng: &mut R,
) -> Result<MeasurementError> {
    let n_max = povm.n_max();
    let plus = povm.density(&code.plus_minus(Sign::Plus, n_max)?)?;
    let minus = povm.density(&code.plus_minus(Sign::Minus, n_max)?)?;
    let mixed = plus.add(&minus).scaled(0.5);
    let (peak, _) = mixed.max()?;
    let mut errors = 0usize;
    for _ in 0..shots {
        let phi = mixed.sample_with_envelope(1.05 * peak, rng)?;
        let (fp, fm) = (plus.eval(phi), minus.eval(phi));
        if fp + fm <= 0.0 {
            return Err(Error::DegenerateDensity(phi));
        }
        let ideal = Sign::from_bool_plus(rng.random::<f64>() * (fp + fm) < fp);
        let inferred = match qsi {
            QsiKind::Binning => bin_phase(phi, code.rotation()),
            QsiKind::LocalMl | QsiKind::FullMl => harden(fp, fm),
        };
        if inferred != ideal {
            errors += 1;
        }
    }
    let rate = errors as f64 / shots.max(1) as f64;
    Ok(MeasurementError { rate, stderr: (rate * (1.0 - rate) / shots.max(1) as f64).sqrt(), shots })
}

/// Exact `γ = 0` measurement error by integration.
///
/// Binning uses closed-form arc integrals; likelihood inference integrates
/// `½ min(p₊, p₋)` on a uniform grid of `grid` points.
pub fn measurement_error_exact(code: &CodeParams, povm: &PhasePovm, qsi: QsiKind, grid: usize) -> Result<f64> {
    let n_max = povm.n_max();
    let plus = povm.density(&code.plus_minus(Sign::Plus, n_max)?)?;
    let minus = povm.density(&code.plus_minus(Sign::Minus, n_max)?)?;
    Ok(match qsi {
        QsiKind::Binning => bin_arcs(code.rotation(), Sign::Minus)
            .iter()
            .map(|&(lo, hi)| 0.5 * plus.integral(lo, hi))
            .chain(bin_arcs(code.rotation(), Sign::Plus).iter().map(|&(lo, hi)| 0.5 * minus.integral(lo, hi)))
            .sum(),
        QsiKind::LocalMl | QsiKind::FullMl => {
            let h = 2.0 * PI / grid as f64;
            (0..grid)
                .map(|i| {
                    let phi = i as f64 * h;
                    0.5 * plus.eval(phi).min(minus.eval(phi))
                })
                .sum::<f64>()
                * h
        }
    })
}
