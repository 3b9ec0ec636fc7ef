//! Phase-measurement POVMs `F(φ) = (1/2π) Σ e^{iφ(m-n)} H_mn |m><n|`.
//!
//! A POVM is fully described by its real symmetric matrix `H`. Outcome
//! densities are stored as Fourier series in `φ`, which makes evaluation,
//! rotation and arc integrals cheap and exact.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::fock::{FockVector, C64};

/// Number of `l` and `l'` terms kept in the adaptive-homodyne series.
pub const AHD_SERIES_CAP: usize = 192;

const GRID_POINTS: usize = 1024;
const ENVELOPE: f64 = 1.05;
const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PovmKind {
    Canonical,
    Heterodyne,
    /// Mark II adaptive homodyne detection.
    Ahd,
}

impl PovmKind {
    pub const ALL: [PovmKind; 3] = [PovmKind::Canonical, PovmKind::Heterodyne, PovmKind::Ahd];

    pub fn name(self) -> &'static str {
        match self {
            PovmKind::Canonical => "canonical",
            PovmKind::Heterodyne => "heterodyne",
            PovmKind::Ahd => "ahd",
        }
    }
}

impl fmt::Display for PovmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PovmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "canonical" => Ok(PovmKind::Canonical),
            "heterodyne" | "het" => Ok(PovmKind::Heterodyne),
            "ahd" | "adaptive" => Ok(PovmKind::Ahd),
            other => Err(Error::Config(format!("unknown POVM kind '{other}'"))),
        }
    }
}

/// `H_mn = 1`.
pub fn canonical_h(n_max: usize) -> DMatrix<f64> {
    DMatrix::from_element(n_max + 1, n_max + 1, 1.0)
}

/// `H_mn = Γ((m+n)/2 + 1) / √(m! n!)`.
///
/// The radial marginal of `|α><α|/π` is taken with measure `r dr`; without
/// the Jacobian the diagonal is not 1 and `∫F(φ)dφ` is not the identity.
pub fn heterodyne_h(n_max: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n_max + 1, n_max + 1, |m, n| {
        let (m, n) = (m as f64, n as f64);
        (ln_gamma((m + n) / 2.0 + 1.0) - 0.5 * (ln_gamma(m + 1.0) + ln_gamma(n + 1.0))).exp()
    })
}

/// Table `M_{m,n}` for `0 <= m, n < size`.
///
/// `M_{n,0} = M_{0,n} = 1/(2n+1)!!` and
/// `M_{m,n} = (n M_{n-1,m} + m M_{n,m-1}) / (2(n-m)² + n + m)`.
pub fn ahd_m_table(size: usize) -> DMatrix<f64> {
    let mut m_tab = DMatrix::zeros(size, size);
    if size == 0 {
        return m_tab;
    }
    // ln (2n+1)!! accumulated incrementally
    let mut ln_df = 0.0;
    for n in 0..size {
        if n > 0 {
            ln_df += ((2 * n + 1) as f64).ln();
        }
        let v = (-ln_df).exp();
        m_tab[(n, 0)] = v;
        m_tab[(0, n)] = v;
    }
    for s in 2..(2 * size - 1) {
        for m in 1..size.min(s) {
            let n = s - m;
            if n == 0 || n >= size {
                continue;
            }
            let diff = n as f64 - m as f64;
            let num = n as f64 * m_tab[(n - 1, m)] + m as f64 * m_tab[(n, m - 1)];
            m_tab[(m, n)] = num / (2.0 * diff * diff + (n + m) as f64);
        }
    }
    m_tab
}

fn generalized_binomials(a: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut b = 1.0;
    for l in 0..len {
        if l > 0 {
            b *= (a - (l - 1) as f64) / l as f64;
        }
        out.push(b);
    }
    out
}

/// `γ_{m,p} = √(m!) / (2^p (m-2p)! p!)`.
fn ahd_gamma(m: usize, p: usize) -> f64 {
    (0.5 * ln_gamma(m as f64 + 1.0)
        - p as f64 * std::f64::consts::LN_2
        - ln_gamma((m - 2 * p) as f64 + 1.0)
        - ln_gamma(p as f64 + 1.0))
    .exp()
}

/// Adaptive-homodyne `H` with the default series truncation.
pub fn ahd_h(n_max: usize) -> Result<DMatrix<f64>> {
    ahd_h_with_cap(n_max, AHD_SERIES_CAP)
}

/// Adaptive-homodyne `H` keeping `cap` terms of each generalized-binomial
/// series.
///
/// `H_mn = Σ_p Σ_q γ_{m,p} γ_{n,q} C_pq` with
/// `C_pq = Σ_l Σ_l' binom((n-m)/2, l) binom((m-n)/2, l') M_{p+l, q+l'}`.
/// `C` depends on `m - n` only, so it is built once per difference.
pub fn ahd_h_with_cap(n_max: usize, cap: usize) -> Result<DMatrix<f64>> {
    let cap = cap.max(1);
    let half = n_max / 2;
    let m_tab = ahd_m_table(half + cap + 1);
    let gammas: Vec<Vec<f64>> = (0..=n_max)
        .map(|m| (0..=m / 2).map(|p| ahd_gamma(m, p)).collect())
        .collect();

    let mut h = DMatrix::zeros(n_max + 1, n_max + 1);
    let width = half + cap;
    for delta in -(n_max as i64)..=(n_max as i64) {
        let ba = generalized_binomials(-delta as f64 / 2.0, cap);
        let bb = generalized_binomials(delta as f64 / 2.0, cap);
        let la = ba.iter().rposition(|&b| b != 0.0).map_or(0, |i| i + 1);
        let lb = bb.iter().rposition(|&b| b != 0.0).map_or(0, |i| i + 1);

        // t[p][q'] = Σ_l ba[l] M[p+l][q']
        let mut t = vec![vec![0.0; width]; half + 1];
        for (p, row) in t.iter_mut().enumerate() {
            for (qq, slot) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (l, &b) in ba[..la].iter().enumerate() {
                    acc += b * m_tab[(p + l, qq)];
                }
                *slot = acc;
            }
        }
        let mut c = vec![vec![0.0; half + 1]; half + 1];
        for p in 0..=half {
            for q in 0..=half {
                let mut acc = 0.0;
                for (lp, &b) in bb[..lb].iter().enumerate() {
                    acc += b * t[p][q + lp];
                }
                c[p][q] = acc;
            }
        }

        for m in 0..=n_max {
            let n = m as i64 - delta;
            if n < 0 || n > n_max as i64 {
                continue;
            }
            let n = n as usize;
            let mut acc = 0.0;
            for (p, &gm) in gammas[m].iter().enumerate() {
                for (q, &gn) in gammas[n].iter().enumerate() {
                    acc += gm * gn * c[p][q];
                }
            }
            h[(m, n)] = acc;
        }
    }
    let h = (&h + h.transpose()) * 0.5;
    for m in 0..=n_max {
        if (h[(m, m)] - 1.0).abs() >= 1e-6 {
            return Err(Error::PovmConstruction(format!(
                "adaptive homodyne H[{m},{m}] = {} deviates from 1",
                h[(m, m)]
            )));
        }
    }
    Ok(h)
}

/// A phase POVM on Fock states `0..=n_max`.
#[derive(Clone, Debug)]
pub struct PhasePovm {
    kind: PovmKind,
    h: DMatrix<f64>,
    /// `H = G Gᵀ`, used to split `F(φ)` into rank-one Kraus vectors.
    factor: DMatrix<f64>,
}

impl PhasePovm {
    pub fn new(kind: PovmKind, n_max: usize) -> Result<Self> {
        let h = match kind {
            PovmKind::Canonical => canonical_h(n_max),
            PovmKind::Heterodyne => heterodyne_h(n_max),
            PovmKind::Ahd => ahd_h(n_max)?,
        };
        Self::from_matrix(kind, h)
    }

    pub fn from_matrix(kind: PovmKind, h: DMatrix<f64>) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::PovmConstruction("H must be square".into()));
        }
        let eig = h.clone().symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        if eig.eigenvalues.iter().any(|&e| e < -1e-8 * top.max(1.0)) {
            return Err(Error::PovmConstruction("H is not positive semidefinite".into()));
        }
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > 1e-13 * top)
            .collect();
        let factor = DMatrix::from_fn(h.nrows(), keep.len(), |m, r| {
            eig.eigenvectors[(m, keep[r])] * eig.eigenvalues[keep[r]].sqrt()
        });
        Ok(Self { kind, h, factor })
    }

    pub fn kind(&self) -> PovmKind {
        self.kind
    }

    pub fn n_max(&self) -> usize {
        self.h.nrows() - 1
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// `G` with `H = G Gᵀ`; one column per Kraus vector.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Kraus vectors `v_r(m) = e^{iφm} G_mr / √(2π)` so that `F(φ) = Σ_r v_r v_r†`.
    pub fn kraus_vectors(&self, phi: f64) -> Vec<FockVector> {
        let norm = (2.0 * PI).sqrt().recip();
        (0..self.factor.ncols())
            .map(|r| {
                FockVector::from_amplitudes(
                    (0..self.h.nrows())
                        .map(|m| C64::from_polar(norm * self.factor[(m, r)], phi * m as f64))
                        .collect(),
                )
            })
            .collect()
    }

    /// Outcome density of a pure (possibly unnormalized) state.
    pub fn density(&self, psi: &FockVector) -> Result<PhaseDensity> {
        PhaseDensity::from_mixture(self, &[(1.0, psi)])
    }

    /// `<a| ∫_arcs F(φ) dφ |b>`; arcs are `(start, end)` with `start <= end`.
    pub fn arc_element(&self, a: &FockVector, b: &FockVector, arcs: &[(f64, f64)]) -> Result<C64> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        let mut acc = C64::new(0.0, 0.0);
        for (m, am) in a.support() {
            for (n, bn) in b.support() {
                let d = m as i64 - n as i64;
                let integral: C64 = arcs.iter().map(|&(lo, hi)| arc_integral(d, lo, hi)).sum();
                acc += am.conj() * bn * self.h[(m, n)] * integral;
            }
        }
        Ok(acc / (2.0 * PI))
    }

    /// Writes `H` as whitespace-separated rows after a `#` header.
    pub fn write_h<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# {} n_max={}", self.kind, self.n_max())?;
        for m in 0..self.h.nrows() {
            let row: Vec<String> = (0..self.h.ncols()).map(|n| format!("{:.17e}", self.h[(m, n)])).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    fn check_dim(&self, v: &FockVector) -> Result<()> {
        if v.n_max() != self.n_max() {
            return Err(Error::CutoffMismatch { left: self.n_max(), right: v.n_max() });
        }
        Ok(())
    }
}

/// `∫_lo^hi e^{iφd} dφ`.
fn arc_integral(d: i64, lo: f64, hi: f64) -> C64 {
    if d == 0 {
        return C64::new(hi - lo, 0.0);
    }
    let d = d as f64;
    (C64::from_polar(1.0, d * hi) - C64::from_polar(1.0, d * lo)) / C64::new(0.0, d)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Phase outcome density `p(φ) = (1/2π)[c_0 + 2 Re Σ_{d>0} c_d e^{iφd}]`.
///
/// Not necessarily normalized: `∫p = c_0` is the trace of the measured
/// operator.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDensity {
    c0: f64,
    /// `(d, c_d)` for `d > 0`, sorted by `d`.
    terms: Vec<(usize, C64)>,
    period: usize,
}

impl PhaseDensity {
    /// Density of `Σ_i w_i |ψ_i><ψ_i|`.
    pub fn from_mixture(povm: &PhasePovm, states: &[(f64, &FockVector)]) -> Result<Self> {
        let dim = povm.h.nrows();
        let mut coeffs = vec![C64::new(0.0, 0.0); dim];
        let mut c0 = 0.0;
        for &(w, psi) in states {
            povm.check_dim(psi)?;
            let support: Vec<(usize, C64)> = psi.support().collect();
            for (i, &(n, an)) in support.iter().enumerate() {
                c0 += w * an.norm_sqr();
                for &(m, am) in &support[i + 1..] {
                    // c_d = Σ_n H_{n+d,n} ψ_n conj(ψ_{n+d})
                    coeffs[m - n] += an * am.conj() * (w * povm.h[(m, n)]);
                }
            }
        }
        Ok(Self::from_coefficients(c0, coeffs.into_iter().enumerate().skip(1).collect()))
    }

    /// Density of a (possibly unnormalized) density matrix `ρ`.
    pub fn from_operator(povm: &PhasePovm, rho: &DMatrix<C64>) -> Result<Self> {
        let dim = povm.h.nrows();
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::CutoffMismatch { left: dim - 1, right: rho.nrows().saturating_sub(1) });
        }
        let c0 = (0..dim).map(|n| rho[(n, n)].re).sum();
        let coeffs = (1..dim)
            .map(|d| {
                let c: C64 = (0..dim - d).map(|n| rho[(n, n + d)] * povm.h[(n + d, n)]).sum();
                (d, c)
            })
            .collect();
        Ok(Self::from_coefficients(c0, coeffs))
    }

    /// Builds from `c_0` and `(d, c_d)` pairs with `d > 0`.
    pub fn from_coefficients(c0: f64, coeffs: Vec<(usize, C64)>) -> Self {
        let mut terms: Vec<(usize, C64)> = coeffs.into_iter().filter(|(d, c)| *d > 0 && c.norm() > 0.0).collect();
        terms.sort_by_key(|t| t.0);
        let period = terms.iter().fold(0, |g, &(d, _)| gcd(g, d)).max(1);
        Self { c0, terms, period }
    }

    pub fn trace(&self) -> f64 {
        self.c0
    }

    pub fn terms(&self) -> &[(usize, C64)] {
        &self.terms
    }

    /// `p` repeats with period `2π / period()`.
    pub fn period(&self) -> usize {
        self.period
    }

    pub fn eval(&self, phi: f64) -> f64 {
        // every d is a multiple of the period, so one phasor steps through all
        let step = C64::from_polar(1.0, phi * self.period as f64);
        let mut z = C64::new(1.0, 0.0);
        let mut at = 0;
        let mut acc = 0.0;
        for &(d, c) in &self.terms {
            while at < d {
                z *= step;
                at += self.period;
            }
            acc += c.re * z.re - c.im * z.im;
        }
        (self.c0 + 2.0 * acc) / (2.0 * PI)
    }

    /// `(c_0 + 2 Σ|c_d|) / 2π`, an upper bound on `p` everywhere.
    pub fn upper_bound(&self) -> f64 {
        (self.c0 + 2.0 * self.terms.iter().map(|t| t.1.norm()).sum::<f64>()) / (2.0 * PI)
    }

    /// Density of the state rotated by `e^{iθn̂}`: `p(φ - θ)`.
    pub fn rotated(&self, theta: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|&(d, c)| (d, c * C64::from_polar(1.0, -theta * d as f64)))
            .collect();
        Self { c0: self.c0, terms, period: self.period }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            c0: self.c0 * s,
            terms: self.terms.iter().map(|&(d, c)| (d, c * s)).collect(),
            period: self.period,
        }
    }

    /// Unit-trace copy; `None` for a vanishing trace.
    pub fn normalized(&self) -> Option<Self> {
        (self.c0 > 0.0).then(|| self.scaled(1.0 / self.c0))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut all = self.terms.clone();
        for &(d, c) in &other.terms {
            match all.iter_mut().find(|t| t.0 == d) {
                Some(t) => t.1 += c,
                None => all.push((d, c)),
            }
        }
        Self::from_coefficients(self.c0 + other.c0, all)
    }

    /// `∫_lo^hi p(φ) dφ`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        let mut acc = self.c0 * (hi - lo);
        for &(d, c) in &self.terms {
            acc += 2.0 * (c * arc_integral(d as i64, lo, hi)).re;
        }
        acc / (2.0 * PI)
    }

    /// Largest value and its location, from a grid over one period refined by
    /// golden-section search.
    pub fn max(&self) -> Result<(f64, f64)> {
        let span = 2.0 * PI / self.period as f64;
        let step = span / GRID_POINTS as f64;
        let tol = 1e-12 * (1.0 + self.c0.abs());
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..GRID_POINTS {
            let phi = i as f64 * step;
            let v = self.eval(phi);
            if v < -tol {
                return Err(Error::NegativeDensity { phi, value: v });
            }
            if v > best.0 {
                best = (v, phi);
            }
        }
        let (mut a, mut b) = (best.1 - step, best.1 + step);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let (mut f1, mut f2) = (self.eval(x1), self.eval(x2));
        while b - a > 1e-10 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = self.eval(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = self.eval(x1);
            }
        }
        let phi = 0.5 * (a + b);
        let v = self.eval(phi);
        if v > best.0 {
            best = (v, phi);
        }
        Ok((best.0, best.1.rem_euclid(2.0 * PI)))
    }

    /// Rejection sample `φ ∈ [0, 2π)` against a uniform proposal, with the
    /// coefficient bound as envelope.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.sample_with_envelope(self.upper_bound(), rng)
    }

    /// As [`sample`](Self::sample), but with a tight envelope from [`max`](Self::max);
    /// worth it when many draws share one density.
    pub fn sample_tight<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let (peak, _) = self.max()?;
        self.sample_with_envelope(ENVELOPE * peak, rng)
    }

    /// As [`sample`](Self::sample) with a caller-supplied envelope.
    pub fn sample_with_envelope<R: Rng + ?Sized>(&self, envelope: f64, rng: &mut R) -> Result<f64> {
        if !(envelope > 0.0) {
            return Err(Error::DegenerateDensity(0.0));
        }
        for _ in 0..MAX_REJECTIONS {
            let phi = rng.random::<f64>() * 2.0 * PI;
            if rng.random::<f64>() * envelope < self.eval(phi) {
                return Ok(phi);
            }
        }
        Err(Error::RejectionLimit(MAX_REJECTIONS))
    }
}
