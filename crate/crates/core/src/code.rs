//! Binomial rotation-symmetric codewords and code geometry.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockVector, ModeOperator};

/// X-basis qubit value: `Plus` is the +1 eigenstate `|+>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn from_bool_plus(plus: bool) -> Sign {
        if plus {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Z-basis logical value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Logical {
    Zero,
    One,
}

impl Logical {
    fn index(self) -> usize {
        match self {
            Logical::Zero => 0,
            Logical::One => 1,
        }
    }
}

/// Binomial code `(N, K)`: rotation order `N` and binomial parameter `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodeParams {
    rotation: usize,
    binomial: usize,
}

impl CodeParams {
    pub fn new(rotation: usize, binomial: usize) -> Result<Self> {
        if rotation == 0 || binomial == 0 {
            return Err(Error::InvalidCode(format!(
                "need N >= 1 and K >= 1, got N={rotation} K={binomial}"
            )));
        }
        Ok(Self { rotation, binomial })
    }

    /// The `(1, 1)` code: `|0>_L = |0>`, `|1>_L = |1>`.
    pub fn trivial() -> Self {
        Self { rotation: 1, binomial: 1 }
    }

    /// `N`.
    pub fn rotation(&self) -> usize {
        self.rotation
    }

    /// `K`.
    pub fn binomial(&self) -> usize {
        self.binomial
    }

    /// `N K / 2`.
    pub fn mean_photon(&self) -> f64 {
        (self.rotation * self.binomial) as f64 / 2.0
    }

    /// Angular separation of `|+>` and `|->`, `π/N`.
    pub fn phase_distance(&self) -> f64 {
        PI / self.rotation as f64
    }

    /// Fock-grid separation of `|0>` and `|1>`, `N`.
    pub fn fock_distance(&self) -> usize {
        self.rotation
    }

    /// Highest occupied Fock state of either codeword.
    pub fn max_support(&self) -> usize {
        self.binomial * self.rotation
    }

    /// Default cutoff `(K + 2) N + 4`.
    pub fn default_cutoff(&self) -> usize {
        (self.binomial + 2) * self.rotation + 4
    }

    /// Binomial codeword `|μ>` on a cutoff of `n_max`.
    pub fn codeword(&self, mu: Logical, n_max: usize) -> Result<FockVector> {
        let mut v = FockVector::zeros(n_max);
        let k = self.binomial;
        let norm = 2f64.powi(1 - k as i32);
        let mu = mu.index();
        let upper = k.div_ceil(2).saturating_sub(mu);
        for j in 0..=upper {
            let idx = 2 * j + mu;
            if idx > k {
                continue;
            }
            let n = idx * self.rotation;
            if n > n_max {
                return Err(Error::CutoffTooSmall { cutoff: n_max, required: n });
            }
            v.amplitudes_mut()[n] = Complex64::new((norm * binomial(k, idx)).sqrt(), 0.0);
        }
        Ok(v)
    }

    /// `(|0> ± |1>) / √2`.
    pub fn plus_minus(&self, sign: Sign, n_max: usize) -> Result<FockVector> {
        let zero = self.codeword(Logical::Zero, n_max)?;
        let one = self.codeword(Logical::One, n_max)?;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let out = match sign {
            Sign::Plus => zero.add(&one)?,
            Sign::Minus => zero.sub(&one)?,
        };
        Ok(out.scaled(Complex64::new(s, 0.0)))
    }

    /// Logical Z, `exp(iπ n̂ / N)`.
    pub fn logical_z(&self, n_max: usize) -> ModeOperator {
        let n = self.rotation as f64;
        ModeOperator::number_function(n_max, |m| Complex64::from_polar(1.0, PI * m as f64 / n))
    }

    /// Discrete rotation `exp(i 2π n̂ / order)`.
    pub fn rotation_operator(order: usize, n_max: usize) -> ModeOperator {
        ModeOperator::number_function(n_max, |m| {
            Complex64::from_polar(1.0, 2.0 * PI * m as f64 / order as f64)
        })
    }
}

impl std::fmt::Display for CodeParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "N={} K={}", self.rotation, self.binomial)
    }
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
