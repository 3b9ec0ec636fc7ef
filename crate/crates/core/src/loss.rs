//! Photon loss during simultaneous cross-Kerr gates.
//!
//! Emission times are sampled per mode with the inverse-survival trajectory
//! algorithm; the emission statistics do not depend on the cross-Kerr rate,
//! so modes are sampled independently. Each mode then carries a commuted
//! error operator
//!
//! ```text
//! E_a = sqrt(κ)^j_a · exp(κ τ_a / 2) · Π_{b ∈ N(a)} exp(-i Ω τ_b n̂_a) · â^j_a · exp(-κ t_gate n̂_a / 2)
//! ```
//!
//! applied after the ideal gates, with `τ_a = j_a t_gate - Σ t_m`.
//! Time is measured in units of the gate time, so `κ = γ` and `Ω = π / N²`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;

use crate::code::{CodeParams, Sign};
use crate::error::{Error, Result};
use crate::fock::{ModeOperator, C64};

/// Loss strength and gate timing for like codes of rotation order `N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    gamma: f64,
    rotation: usize,
}

impl NoiseParams {
    pub fn new(gamma: f64, rotation: usize) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        if rotation == 0 {
            return Err(Error::InvalidCode("rotation order must be >= 1".into()));
        }
        Ok(Self { gamma, rotation })
    }

    /// `γ = κ t_gate`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn t_gate(&self) -> f64 {
        1.0
    }

    pub fn kappa(&self) -> f64 {
        self.gamma / self.t_gate()
    }

    /// Cross-Kerr rate with `Ω t_gate = π / N²`.
    pub fn omega(&self) -> f64 {
        PI / (self.rotation * self.rotation) as f64 / self.t_gate()
    }

    pub fn rotation(&self) -> usize {
        self.rotation
    }
}

/// Which gates run simultaneously: vertices are modes, edges are CROTs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateGraph {
    adj: Vec<Vec<usize>>,
}

impl GateGraph {
    pub fn from_edges(vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); vertices];
        for &(a, b) in edges {
            if a >= vertices || b >= vertices {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self loop on {a}")));
            }
            if adj[a].contains(&b) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Self { adj })
    }

    /// Linear chain `0 - 1 - ... - (n-1)`.
    pub fn path(vertices: usize) -> Self {
        let edges: Vec<_> = (1..vertices).map(|i| (i - 1, i)).collect();
        Self::from_edges(vertices, &edges).expect("a path is a simple graph")
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.adj[a]
    }

    pub fn degree(&self, a: usize) -> usize {
        self.adj[a].len()
    }

    /// Each edge once, as `(low, high)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
    }
}

/// `τ = j t_gate - Σ t_m` for one mode's emission times.
pub fn tau(times: &[f64], t_gate: f64) -> f64 {
    times.len() as f64 * t_gate - times.iter().sum::<f64>()
}

/// Ordered photon-emission times for every mode during one gate window.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmissionRecord {
    times: Vec<Vec<f64>>,
}

impl EmissionRecord {
    pub fn empty(modes: usize) -> Self {
        Self { times: vec![Vec::new(); modes] }
    }

    /// Validates ordering and range against `t_gate`.
    pub fn new(times: Vec<Vec<f64>>, t_gate: f64) -> Result<Self> {
        for (a, ts) in times.iter().enumerate() {
            if ts.iter().any(|&t| !(0.0..=t_gate).contains(&t)) {
                return Err(Error::Config(format!("emission time outside gate window on mode {a}")));
            }
            if ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config(format!("emission times not increasing on mode {a}")));
            }
        }
        Ok(Self { times })
    }

    pub fn modes(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self, a: usize) -> &[f64] {
        &self.times[a]
    }

    /// `j_a`.
    pub fn count(&self, a: usize) -> usize {
        self.times[a].len()
    }

    /// `k = Σ j_a`.
    pub fn total(&self) -> usize {
        self.times.iter().map(Vec::len).sum()
    }

    pub fn tau(&self, a: usize, t_gate: f64) -> f64 {
        tau(&self.times[a], t_gate)
    }
}

/// Initial single-mode state used for emission sampling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EmissionPrior {
    /// The code's `|+>`.
    #[default]
    CodePlus,
    /// `(|0><0| + |1><1|) / 2`, the single-qubit marginal of a cluster state.
    MaximallyMixed,
}

/// Photon-number populations of the sampling prior.
///
/// Loss statistics depend only on these populations. For binomial codes both
/// priors give the same vector.
pub fn emission_populations(code: &CodeParams, prior: EmissionPrior, n_max: usize) -> Result<Vec<f64>> {
    Ok(match prior {
        EmissionPrior::CodePlus => code.plus_minus(Sign::Plus, n_max)?.populations(),
        EmissionPrior::MaximallyMixed => {
            let zero = code.codeword(crate::code::Logical::Zero, n_max)?.populations();
            let one = code.codeword(crate::code::Logical::One, n_max)?.populations();
            zero.iter().zip(&one).map(|(a, b)| 0.5 * (a + b)).collect()
        }
    })
}

/// Probability that a state with populations `pops` emits nothing for `κΔt = decay`.
fn survival(pops: &[f64], decay: f64) -> f64 {
    let x = (-decay).exp();
    pops.iter().rev().fold(0.0, |acc, &p| acc * x + p)
}

/// Samples one mode's emission times over `[0, t_gate]`.
///
/// Draws `R`, propagates the no-jump evolution in closed form until the
/// survival probability falls below `R`, locates the jump by bisection,
/// applies `â` and renormalizes, and repeats until the gate ends.
pub fn sample_emissions<R: Rng + ?Sized>(populations: &[f64], noise: &NoiseParams, rng: &mut R) -> Vec<f64> {
    let kappa = noise.kappa();
    let t_gate = noise.t_gate();
    let mut times = Vec::new();
    if kappa == 0.0 {
        return times;
    }
    let total: f64 = populations.iter().sum();
    let mut pops: Vec<f64> = populations.iter().map(|p| p / total).collect();
    let mut t0 = 0.0;
    loop {
        let r: f64 = rng.random();
        if survival(&pops, kappa * (t_gate - t0)) >= r {
            break;
        }
        let (mut lo, mut hi) = (t0, t_gate);
        while hi - lo > 1e-12 * t_gate {
            let mid = 0.5 * (lo + hi);
            if survival(&pops, kappa * (mid - t0)) >= r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        // A time must strictly exceed the previous emission.
        let t = match times.last() {
            Some(&prev) if t <= prev => prev + f64::EPSILON * t_gate.max(1.0),
            _ => t,
        };
        let x = (-kappa * (t - t0)).exp();
        let mut next = vec![0.0; pops.len()];
        let mut norm = 0.0;
        let mut w = x;
        for n in 0..pops.len() - 1 {
            let m = n + 1;
            next[n] = pops[m] * m as f64 * w;
            w *= x;
            norm += next[n];
        }
        times.push(t);
        if norm == 0.0 {
            break;
        }
        for p in &mut next {
            *p /= norm;
        }
        pops = next;
        t0 = t;
    }
    times
}

/// Commuted error operator `E_a` as a shifted-diagonal operator.
pub fn error_operator(
    a: usize,
    record: &EmissionRecord,
    graph: &GateGraph,
    noise: &NoiseParams,
    n_max: usize,
) -> ModeOperator {
    let t_gate = noise.t_gate();
    let phase: f64 = graph.neighbors(a).iter().map(|&b| record.tau(b, t_gate)).sum::<f64>();
    error_operator_from_parts(record.count(a), record.tau(a, t_gate), phase, noise, n_max)
}

/// `E` for a mode with `j` emissions, own delay `tau_own`, and summed neighbor
/// delays `tau_neighbors`.
pub fn error_operator_from_parts(
    j: usize,
    tau_own: f64,
    tau_neighbors: f64,
    noise: &NoiseParams,
    n_max: usize,
) -> ModeOperator {
    let kappa = noise.kappa();
    let angle = -noise.omega() * tau_neighbors;
    let scale = kappa.sqrt().powi(j as i32) * (kappa * tau_own / 2.0).exp();
    let decay = kappa * noise.t_gate() / 2.0;
    let diag: Vec<C64> = (0..=n_max)
        .map(|n| {
            if n < j {
                C64::new(0.0, 0.0)
            } else {
                C64::from_polar(scale * (-decay * n as f64).exp(), angle * (n - j) as f64)
            }
        })
        .collect();
    if j == 0 {
        ModeOperator::Diagonal(diag)
    } else {
        ModeOperator::Shifted { power: j, diag }
    }
}

/// Phase of `CROT = exp(iπ n_a n_b / (N M))` on `|n_a, n_b>`.
pub fn crot_phase(n_a: usize, n_b: usize, rot_a: usize, rot_b: usize) -> C64 {
    C64::from_polar(1.0, PI * (n_a * n_b) as f64 / (rot_a * rot_b) as f64)
}

/// Dense two-mode CROT, mode `a` as the slow index.
pub fn crot(code_a: &CodeParams, code_b: &CodeParams, n_max_a: usize, n_max_b: usize) -> DMatrix<C64> {
    let dim = (n_max_a + 1) * (n_max_b + 1);
    let mut m = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    for na in 0..=n_max_a {
        for nb in 0..=n_max_b {
            let i = na * (n_max_b + 1) + nb;
            m[(i, i)] = crot_phase(na, nb, code_a.rotation(), code_b.rotation());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::Logical;
    use crate::fock::FockVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn omega_gate_time_product() {
        for n in 1..=5 {
            let np = NoiseParams::new(0.1, n).unwrap();
            assert!((np.omega() * np.t_gate() * (n * n) as f64 - PI).abs() < 1e-12);
        }
        assert!(NoiseParams::new(-0.1, 2).is_err());
    }

    #[test]
    fn tau_examples() {
        assert_eq!(tau(&[], 1.0), 0.0);
        assert_eq!(tau(&[1.0], 1.0), 0.0);
        assert_eq!(tau(&[0.0], 1.0), 1.0);
        assert!((tau(&[0.25, 0.5], 1.0) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn record_validation() {
        assert!(EmissionRecord::new(vec![vec![0.2, 0.1]], 1.0).is_err());
        assert!(EmissionRecord::new(vec![vec![1.5]], 1.0).is_err());
        let r = EmissionRecord::new(vec![vec![0.1, 0.7], vec![]], 1.0).unwrap();
        assert_eq!(r.total(), 2);
        assert_eq!(r.count(1), 0);
    }

    #[test]
    fn no_decay_no_emissions() {
        let code = CodeParams::new(2, 2).unwrap();
        let pops = emission_populations(&code, EmissionPrior::CodePlus, 12).unwrap();
        let np = NoiseParams::new(0.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(sample_emissions(&pops, &np, &mut rng).is_empty());
        }
    }

    #[test]
    fn trivial_no_emission_probability() {
        let code = CodeParams::trivial();
        let pops = emission_populations(&code, EmissionPrior::CodePlus, 4).unwrap();
        let gamma = 0.3;
        let np = NoiseParams::new(gamma, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let shots = 100_000;
        let empty = (0..shots).filter(|_| sample_emissions(&pops, &np, &mut rng).is_empty()).count();
        let p = (1.0 + (-gamma).exp()) / 2.0;
        let se = (p * (1.0 - p) / shots as f64).sqrt();
        assert!(((empty as f64 / shots as f64) - p).abs() < 4.0 * se);
    }

    #[test]
    fn sampled_times_are_ordered_and_in_window() {
        let code = CodeParams::new(3, 6).unwrap();
        let pops = emission_populations(&code, EmissionPrior::CodePlus, code.default_cutoff()).unwrap();
        let np = NoiseParams::new(0.8, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let ts = sample_emissions(&pops, &np, &mut rng);
            assert!(ts.windows(2).all(|w| w[1] > w[0]));
            assert!(ts.iter().all(|&t| (0.0..=1.0).contains(&t)));
            let t = tau(&ts, 1.0);
            assert!(t >= 0.0 && t <= ts.len() as f64);
        }
    }

    #[test]
    fn priors_share_populations() {
        for (n, k) in [(1, 1), (2, 2), (3, 5)] {
            let code = CodeParams::new(n, k).unwrap();
            let a = emission_populations(&code, EmissionPrior::CodePlus, 24).unwrap();
            let b = emission_populations(&code, EmissionPrior::MaximallyMixed, 24).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn error_operator_without_emissions_is_damping() {
        let np = NoiseParams::new(0.2, 2).unwrap();
        let g = GateGraph::path(3);
        let rec = EmissionRecord::empty(3);
        let e = error_operator(1, &rec, &g, &np, 10);
        let expect = ModeOperator::number_function(10, |n| C64::new((-0.1 * n as f64).exp(), 0.0));
        assert!((e.to_dense() - expect.to_dense()).norm() < 1e-14);
    }

    #[test]
    fn neighbor_emission_dephases() {
        let np = NoiseParams::new(0.2, 2).unwrap();
        let g = GateGraph::path(2);
        let tm = 0.3;
        let rec = EmissionRecord::new(vec![vec![], vec![tm]], 1.0).unwrap();
        let e = error_operator(0, &rec, &g, &np, 10);
        let expect = ModeOperator::number_function(10, |n| {
            C64::from_polar((-0.1 * n as f64).exp(), -np.omega() * (1.0 - tm) * n as f64)
        });
        assert!((e.to_dense() - expect.to_dense()).norm() < 1e-14);
    }

    #[test]
    fn crot_examples() {
        let c11 = CodeParams::trivial();
        let m = crot(&c11, &c11, 2, 2);
        // |0> ⊗ |n> untouched
        for nb in 0..=2 {
            assert!((m[(nb, nb)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let i11 = 3 + 1;
        assert!((m[(i11, i11)] + C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn crot_is_logical_cz() {
        let code = CodeParams::new(2, 2).unwrap();
        let nm = 8;
        let m = crot(&code, &code, nm, nm);
        let plus = code.plus_minus(Sign::Plus, nm).unwrap();
        let zero = code.codeword(Logical::Zero, nm).unwrap();
        let one = code.codeword(Logical::One, nm).unwrap();
        let prod = |a: &FockVector, b: &FockVector| {
            let mut v = nalgebra::DVector::from_element((nm + 1) * (nm + 1), C64::new(0.0, 0.0));
            for i in 0..=nm {
                for j in 0..=nm {
                    v[i * (nm + 1) + j] = a.get(i) * b.get(j);
                }
            }
            v
        };
        let out = &m * prod(&plus, &plus);
        // (|0>|+> + |1>|->) / √2
        let minus = code.plus_minus(Sign::Minus, nm).unwrap();
        let ideal = (prod(&zero, &plus) + prod(&one, &minus)) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let overlap = ideal.dotc(&out);
        assert!((overlap.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn graph_validation() {
        assert!(GateGraph::from_edges(2, &[(0, 0)]).is_err());
        assert!(GateGraph::from_edges(2, &[(0, 1), (1, 0)]).is_err());
        assert!(GateGraph::from_edges(2, &[(0, 2)]).is_err());
        let g = GateGraph::path(4);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.edges().count(), 3);
    }
}
