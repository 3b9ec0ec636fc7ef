//! Truncated Fock-space numerics.
//!
//! Every physical object in the simulator lives on a single oscillator mode
//! truncated at photon number `n_max`. States are plain amplitude vectors and
//! operators come in three flavours: diagonal in the number basis,
//! "shifted-diagonal" (`â^k · D(n̂)`), and dense. The shifted-diagonal form is
//! closed under composition, which keeps loss operators off the dense path.
//!
//! Nothing in this module renormalizes silently.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// `sqrt(n! / (n-k)!)`, the amplitude picked up by `â^k |n>`.
pub fn falling_sqrt(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    ((n - k + 1)..=n).map(|m| (m as f64).sqrt()).product()
}

/// A state vector on the truncated Fock space `|0>, ..., |n_max>`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    amps: Vec<C64>,
}

impl FockVector {
    pub fn zeros(n_max: usize) -> Self {
        Self { amps: vec![ZERO; n_max + 1] }
    }

    /// Number state `|n>`.
    pub fn basis(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::CutoffTooSmall { cutoff: n_max, required: n });
        }
        let mut v = Self::zeros(n_max);
        v.amps[n] = ONE;
        Ok(v)
    }

    /// Wraps an amplitude list; the cutoff is `amps.len() - 1`.
    ///
    /// Panics on an empty list.
    pub fn from_amplitudes(amps: Vec<C64>) -> Self {
        assert!(!amps.is_empty(), "a Fock vector needs at least the vacuum amplitude");
        Self { amps }
    }

    pub fn from_real(amps: &[f64]) -> Self {
        Self::from_amplitudes(amps.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn n_max(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    /// Amplitude of `|n>`; zero above the cutoff.
    pub fn get(&self, n: usize) -> C64 {
        self.amps.get(n).copied().unwrap_or(ZERO)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Unit-norm copy, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n2 = self.norm_sqr();
        if n2 == 0.0 || !n2.is_finite() {
            return None;
        }
        Some(self.scaled(C64::new(1.0 / n2.sqrt(), 0.0)))
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self { amps: self.amps.iter().map(|a| a * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_cutoff(other)?;
        Ok(Self { amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_cutoff(other)?;
        Ok(Self { amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a - b).collect() })
    }

    /// `â^k v`, unnormalized. Amplitudes are shifted down by `k`.
    pub fn annihilate(&self, k: usize) -> Self {
        let mut out = Self::zeros(self.n_max());
        for n in k..self.amps.len() {
            out.amps[n - k] = self.amps[n] * falling_sqrt(n, k);
        }
        out
    }

    /// `â†^k v`, with anything pushed above the cutoff dropped.
    pub fn create(&self, k: usize) -> Self {
        let mut out = Self::zeros(self.n_max());
        for n in 0..self.amps.len() {
            let m = n + k;
            if m < self.amps.len() {
                out.amps[m] = self.amps[n] * falling_sqrt(m, k);
            }
        }
        out
    }

    /// `f(n̂) v`: multiplies the amplitude of `|n>` by `f(n)`.
    pub fn apply_number_function<F: Fn(usize) -> C64>(&self, f: F) -> Self {
        Self { amps: self.amps.iter().enumerate().map(|(n, a)| a * f(n)).collect() }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_cutoff(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `<v|n̂|v> / <v|v>`.
    pub fn mean_photon(&self) -> f64 {
        let n2 = self.norm_sqr();
        let num: f64 = self.amps.iter().enumerate().map(|(n, a)| n as f64 * a.norm_sqr()).sum();
        num / n2
    }

    /// Photon-number populations `|c_n|^2`.
    pub fn populations(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Nonzero amplitudes as `(n, c_n)` pairs.
    pub fn support(&self) -> impl Iterator<Item = (usize, C64)> + '_ {
        self.amps.iter().copied().enumerate().filter(|(_, a)| *a != ZERO)
    }

    /// Highest occupied number state, if any.
    pub fn max_occupied(&self) -> Option<usize> {
        self.amps.iter().rposition(|a| *a != ZERO)
    }

    fn check_cutoff(&self, other: &Self) -> Result<()> {
        if self.n_max() != other.n_max() {
            return Err(Error::CutoffMismatch { left: self.n_max(), right: other.n_max() });
        }
        Ok(())
    }
}

/// A single-mode operator.
#[derive(Clone, Debug, PartialEq)]
pub enum ModeOperator {
    /// `D(n̂)` with entries `d_n`.
    Diagonal(Vec<C64>),
    /// `â^power · D(n̂)`.
    Shifted { power: usize, diag: Vec<C64> },
    Dense(DMatrix<C64>),
}

impl ModeOperator {
    pub fn identity(n_max: usize) -> Self {
        Self::Diagonal(vec![ONE; n_max + 1])
    }

    pub fn number_function<F: Fn(usize) -> C64>(n_max: usize, f: F) -> Self {
        Self::Diagonal((0..=n_max).map(f).collect())
    }

    /// `â^k`.
    pub fn annihilation(n_max: usize, k: usize) -> Self {
        Self::Shifted { power: k, diag: vec![ONE; n_max + 1] }
    }

    pub fn n_max(&self) -> usize {
        match self {
            Self::Diagonal(d) | Self::Shifted { diag: d, .. } => d.len() - 1,
            Self::Dense(m) => m.nrows() - 1,
        }
    }

    /// Number of photons removed, for the structured representations.
    pub fn power(&self) -> Option<usize> {
        match self {
            Self::Diagonal(_) => Some(0),
            Self::Shifted { power, .. } => Some(*power),
            Self::Dense(_) => None,
        }
    }

    fn as_shifted(&self) -> Option<(usize, &[C64])> {
        match self {
            Self::Diagonal(d) => Some((0, d)),
            Self::Shifted { power, diag } => Some((*power, diag)),
            Self::Dense(_) => None,
        }
    }

    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        if v.n_max() != self.n_max() {
            return Err(Error::CutoffMismatch { left: self.n_max(), right: v.n_max() });
        }
        Ok(match self.as_shifted() {
            Some((k, d)) => {
                let mut out = FockVector::zeros(v.n_max());
                for n in k..v.dim() {
                    out.amps[n - k] = v.amps[n] * d[n] * falling_sqrt(n, k);
                }
                out
            }
            None => {
                let Self::Dense(m) = self else { unreachable!() };
                let col = nalgebra::DVector::from_column_slice(&v.amps);
                FockVector::from_amplitudes((m * col).as_slice().to_vec())
            }
        })
    }

    /// `self · rhs`. Structured forms stay structured; `D(n̂) â^k = â^k D(n̂ - k)`.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        if self.n_max() != rhs.n_max() {
            return Err(Error::CutoffMismatch { left: self.n_max(), right: rhs.n_max() });
        }
        match (self.as_shifted(), rhs.as_shifted()) {
            (Some((k, d1)), Some((l, d2))) => {
                let diag: Vec<C64> = (0..d2.len())
                    .map(|n| if n >= l { d1[n - l] * d2[n] } else { ZERO })
                    .collect();
                Ok(if k + l == 0 {
                    Self::Diagonal(diag)
                } else {
                    Self::Shifted { power: k + l, diag }
                })
            }
            _ => Ok(Self::Dense(self.to_dense() * rhs.to_dense())),
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match self.as_shifted() {
            Some((k, d)) => {
                let dim = d.len();
                let mut m = DMatrix::from_element(dim, dim, ZERO);
                for n in k..dim {
                    m[(n - k, n)] = d[n] * falling_sqrt(n, k);
                }
                m
            }
            None => {
                let Self::Dense(m) = self else { unreachable!() };
                m.clone()
            }
        }
    }
}

/// Kronecker product `a ⊗ b` with mode `a` as the slow index.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}
