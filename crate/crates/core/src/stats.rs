//! Confidence intervals, threshold crossings and the sub-threshold slope fit.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Two-sided normal quantile for a `level` interval.
pub fn z_value(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, level: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = z_value(level);
    let n = n as f64;
    let p = k as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if p == 1.0 { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Standard error of a proportion estimate.
pub fn proportion_stderr(k: u64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    let p = k as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap interval for a proportion, resampling the shots.
pub fn bootstrap_proportion_ci<R: Rng + ?Sized>(k: u64, n: u64, resamples: usize, level: f64, rng: &mut R) -> (f64, f64) {
    if n == 0 || resamples == 0 {
        return (0.0, 1.0);
    }
    let p = k as f64 / n as f64;
    let dist = Binomial::new(n, p).expect("valid binomial");
    let mut draws: Vec<f64> = (0..resamples).map(|_| dist.sample(rng) as f64 / n as f64).collect();
    draws.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    (percentile(&draws, tail), percentile(&draws, 1.0 - tail))
}

/// Logical error counts at each swept `γ` for one code distance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Curve {
    pub distance: usize,
    /// `(γ, failures, shots)`, sorted by `γ`.
    pub points: Vec<(f64, u64, u64)>,
}

impl Curve {
    pub fn new(distance: usize, mut points: Vec<(f64, u64, u64)>) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { distance, points }
    }

    pub fn rates(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|&(g, k, n)| (g, k as f64 / n.max(1) as f64)).collect()
    }
}

/// First `γ` where the larger code stops beating the smaller one, by linear
/// interpolation of the rate difference between grid points.
pub fn crossing(small: &[(f64, f64)], large: &[(f64, f64)]) -> Option<f64> {
    let diff: Vec<(f64, f64)> = small.iter().zip(large).map(|(a, b)| (a.0, b.1 - a.1)).collect();
    for w in diff.windows(2) {
        let ((g0, d0), (g1, d1)) = (w[0], w[1]);
        if d0 < 0.0 && d1 >= 0.0 {
            return Some(if d1 == d0 { g1 } else { g0 + (g1 - g0) * (-d0) / (d1 - d0) });
        }
    }
    None
}

/// Threshold estimate for a set of distances.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdResult {
    /// Mean crossing of consecutive-distance pairs, `None` when unbounded.
    pub gamma_c: Option<f64>,
    pub ci: Option<(f64, f64)>,
    /// `(L_small, L_large, crossing)` per consecutive pair.
    pub crossings: Vec<(usize, usize, Option<f64>)>,
    /// Fraction of bootstrap replicates that produced a crossing.
    pub bootstrap_success: f64,
}

impl ThresholdResult {
    pub fn is_bounded(&self) -> bool {
        self.gamma_c.is_some()
    }
}

fn mean_crossing(curves: &[Vec<(f64, f64)>]) -> (Option<f64>, Vec<Option<f64>>) {
    let pairs: Vec<Option<f64>> = curves.windows(2).map(|w| crossing(&w[0], &w[1])).collect();
    let found: Vec<f64> = pairs.iter().flatten().copied().collect();
    if found.len() == pairs.len() && !found.is_empty() {
        (Some(found.iter().sum::<f64>() / found.len() as f64), pairs)
    } else {
        (None, pairs)
    }
}

/// Crossing point of logical-error curves with a bootstrap interval over
/// shot resamples.
pub fn estimate_threshold<R: Rng + ?Sized>(
    curves: &[Curve],
    resamples: usize,
    level: f64,
    rng: &mut R,
) -> Result<ThresholdResult> {
    if curves.len() < 2 {
        return Err(Error::Fit("need at least two distances".into()));
    }
    let mut curves = curves.to_vec();
    curves.sort_by_key(|c| c.distance);
    let grid: Vec<f64> = curves[0].points.iter().map(|p| p.0).collect();
    if grid.len() < 4 {
        return Err(Error::Fit("need at least four gamma points".into()));
    }
    if curves.iter().any(|c| c.points.iter().map(|p| p.0).ne(grid.iter().copied())) {
        return Err(Error::Fit("curves must share a gamma grid".into()));
    }

    let rates: Vec<Vec<(f64, f64)>> = curves.iter().map(Curve::rates).collect();
    let (gamma_c, pairs) = mean_crossing(&rates);
    let crossings = curves.windows(2).zip(pairs).map(|(w, c)| (w[0].distance, w[1].distance, c)).collect();

    let mut reps = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let sample: Vec<Vec<(f64, f64)>> = curves
            .iter()
            .map(|c| {
                c.points
                    .iter()
                    .map(|&(g, k, n)| {
                        let p = k as f64 / n.max(1) as f64;
                        let draw = Binomial::new(n, p).expect("valid binomial").sample(rng);
                        (g, draw as f64 / n.max(1) as f64)
                    })
                    .collect()
            })
            .collect();
        if let (Some(g), _) = mean_crossing(&sample) {
            reps.push(g);
        }
    }
    let bootstrap_success = if resamples == 0 { 0.0 } else { reps.len() as f64 / resamples as f64 };
    let ci = (gamma_c.is_some() && reps.len() >= 2).then(|| {
        reps.sort_by(f64::total_cmp);
        let tail = (1.0 - level) / 2.0;
        (percentile(&reps, tail), percentile(&reps, 1.0 - tail))
    });
    Ok(ThresholdResult { gamma_c, ci, crossings, bootstrap_success })
}

/// Fit of `p_L ∝ exp(-α d)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaFit {
    pub alpha: f64,
    pub stderr: f64,
    pub ci: (f64, f64),
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares slope of `ln p_L` against distance, negated. Non-positive
/// rates are dropped.
pub fn fit_alpha(table: &[(usize, f64)], level: f64) -> Result<AlphaFit> {
    let pts: Vec<(f64, f64)> = table.iter().filter(|p| p.1 > 0.0).map(|&(d, p)| (d as f64, p.ln())).collect();
    let n = pts.len();
    if n < 3 {
        return Err(Error::Fit(format!("need three positive rates, have {n}")));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("distances are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let dof = nf - 2.0;
    let stderr = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::Fit(e.to_string()))?.inverse_cdf(0.5 + level / 2.0);
    let alpha = -slope;
    Ok(AlphaFit { alpha, stderr, ci: (alpha - t * stderr, alpha + t * stderr), intercept, r_squared, points: n })
}
