//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

pub mod criteria;

use std::f64::consts::PI;

use binoplanar::matching::{BoundaryMatching, Partner};
use binoplanar::C64;
use nalgebra::DMatrix;
use rand::Rng;

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

/// One-sample Kolmogorov-Smirnov statistic and asymptotic p-value against
/// the distribution function `cdf`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Emission times of each mode from a joint two-mode quantum-jump trajectory
/// under `H = -Ω n_a n_b - iκ(n_a + n_b)/2` on `[0, 1]`.
pub fn joint_trajectory<R: Rng + ?Sized>(
    psi_a: &[f64],
    psi_b: &[f64],
    kappa: f64,
    omega: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let (da, db) = (psi_a.len(), psi_b.len());
    let mut c: Vec<C64> = (0..da * db).map(|i| C64::new(psi_a[i / db] * psi_b[i % db], 0.0)).collect();
    let evolve = |c: &[C64], dt: f64| -> Vec<C64> {
        (0..da * db)
            .map(|i| {
                let (na, nb) = ((i / db) as f64, (i % db) as f64);
                c[i] * C64::from_polar((-kappa * (na + nb) * dt / 2.0).exp(), omega * na * nb * dt)
            })
            .collect()
    };
    let norm = |c: &[C64]| c.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let mut t = 0.0;
    let (mut ta, mut tb) = (Vec::new(), Vec::new());
    loop {
        let r: f64 = rng.random();
        if norm(&evolve(&c, 1.0 - t)) >= r {
            break;
        }
        let (mut lo, mut hi) = (0.0, 1.0 - t);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if norm(&evolve(&c, mid)) >= r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        t += hi;
        let s = evolve(&c, hi);
        let rate_a: f64 = (0..da * db).map(|i| (i / db) as f64 * s[i].norm_sqr()).sum();
        let rate_b: f64 = (0..da * db).map(|i| (i % db) as f64 * s[i].norm_sqr()).sum();
        let mut next = vec![C64::new(0.0, 0.0); da * db];
        if rng.random::<f64>() * (rate_a + rate_b) < rate_a {
            for i in 0..da * db {
                let (na, nb) = (i / db, i % db);
                if na > 0 {
                    next[(na - 1) * db + nb] = s[i] * (na as f64).sqrt();
                }
            }
            ta.push(t);
        } else {
            for i in 0..da * db {
                let (na, nb) = (i / db, i % db);
                if nb > 0 {
                    next[na * db + nb - 1] = s[i] * (nb as f64).sqrt();
                }
            }
            tb.push(t);
        }
        let z = norm(&next).sqrt();
        c = next.into_iter().map(|v| v / z).collect();
    }
    (ta, tb)
}

fn dense_number(n_max: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n_max + 1, n_max + 1, |i, j| C64::new(if i == j { i as f64 } else { 0.0 }, 0.0))
}

fn dense_annihilation(n_max: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n_max + 1, n_max + 1, |i, j| C64::new(if j == i + 1 { (j as f64).sqrt() } else { 0.0 }, 0.0))
}

fn embed(op: &DMatrix<C64>, mode: usize, modes: usize, n_max: usize) -> DMatrix<C64> {
    let id = DMatrix::<C64>::identity(n_max + 1, n_max + 1);
    let mut out = DMatrix::<C64>::identity(1, 1);
    for k in 0..modes {
        out = out.kronecker(if k == mode { op } else { &id });
    }
    out
}

/// Time-ordered trajectory operator on a path of `modes` modes with CROTs
/// on every edge, built from matrix exponentials of the effective Hamiltonian.
/// `emissions` is a list of `(time, mode)`.
pub fn dense_trajectory(
    modes: usize,
    n_max: usize,
    rotation: usize,
    kappa: f64,
    emissions: &[(f64, usize)],
) -> DMatrix<C64> {
    let omega = PI / (rotation * rotation) as f64;
    let num = dense_number(n_max);
    let dim = (n_max + 1).pow(modes as u32);
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for k in 0..modes {
        let nk = embed(&num, k, modes, n_max);
        h -= nk.clone() * C64::new(0.0, kappa / 2.0);
        if k + 1 < modes {
            let nl = embed(&num, k + 1, modes, n_max);
            h -= (nk * nl) * C64::new(omega, 0.0);
        }
    }
    let propagate = |dt: f64| (h.clone() * C64::new(0.0, -dt)).exp();
    let mut events = emissions.to_vec();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let a = dense_annihilation(n_max);
    let mut u = DMatrix::<C64>::identity(dim, dim);
    let mut t = 0.0;
    for &(tm, mode) in &events {
        u = propagate(tm - t) * u;
        u = embed(&a, mode, modes, n_max) * u * C64::new(kappa.sqrt(), 0.0);
        t = tm;
    }
    propagate(1.0 - t) * u
}

/// Minimum matching cost by enumeration: each node pairs with a later node or
/// with the boundary.
pub fn brute_force_boundary(problem: &BoundaryMatching) -> f64 {
    fn go(p: &BoundaryMatching, used: &mut Vec<bool>) -> f64 {
        let Some(i) = used.iter().position(|u| !u) else {
            return 0.0;
        };
        used[i] = true;
        let mut best = p.boundary[i] + go(p, used);
        for j in i + 1..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(p.pair[i][j] + go(p, used));
                used[j] = false;
            }
        }
        used[i] = false;
        best
    }
    go(problem, &mut vec![false; problem.len()])
}

/// Minimum perfect matching cost on a complete graph by enumeration.
pub fn brute_force_perfect(w: &[Vec<f64>]) -> f64 {
    fn go(w: &[Vec<f64>], used: &mut Vec<bool>) -> f64 {
        let Some(i) = used.iter().position(|u| !u) else {
            return 0.0;
        };
        used[i] = true;
        let mut best = f64::INFINITY;
        for j in i + 1..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(w[i][j] + go(w, used));
                used[j] = false;
            }
        }
        used[i] = false;
        best
    }
    go(w, &mut vec![false; w.len()])
}

/// Checks that `partners` is a consistent assignment.
pub fn valid_partners(partners: &[Partner]) -> bool {
    partners.iter().enumerate().all(|(i, p)| match *p {
        Partner::Boundary => true,
        Partner::Node(j) => j != i && partners.get(j) == Some(&Partner::Node(i)),
    })
}

pub fn random_boundary_problem<R: Rng + ?Sized>(n: usize, rng: &mut R) -> BoundaryMatching {
    let mut pair = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let w = rng.random_range(0.0..10.0);
            pair[i][j] = w;
            pair[j][i] = w;
        }
    }
    let boundary = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    BoundaryMatching { pair, boundary }
}
