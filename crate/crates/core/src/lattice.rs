//! Planar-code cluster timeslice and the per-shot measurement pipeline.
//!
//! Sites live on a `(2L-1) × (2L-1)` grid indexed `(row, col)`:
//!
//! * primal qubits where `row + col` is even: edges of the planar code;
//! * dual qubits at `(even, odd)`: they mediate the CROTs;
//! * plaquettes at `(odd, even)`: no qubit, a check over the adjacent primals.
//!
//! Plaquettes in the first and last column touch three primals (rough left
//! and right). Primals in the first and last row belong to a single plaquette;
//! error chains terminate there, on the top and bottom boundaries. The logical
//! parity is read from the top row.

use rand::Rng;
use serde::Serialize;

use crate::code::{CodeParams, Sign};
use crate::decoder::{Correction, Decoder};
use crate::error::{Error, Result};
use crate::fock::FockVector;
use crate::loss::{self, EmissionPrior, EmissionRecord, GateGraph, NoiseParams};
use crate::povm::{PhaseDensity, PhasePovm};
use crate::qsi::{bin_phase, harden, LikelihoodModel, QsiKind, SoftRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Role {
    Primal,
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Site {
    pub row: usize,
    pub col: usize,
    pub role: Role,
}

/// Endpoint of a primal-qubit edge in the decoding graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Plaquette(usize),
    Top,
    Bottom,
}

#[derive(Clone, Debug)]
pub struct Lattice {
    distance: usize,
    sites: Vec<Site>,
    graph: GateGraph,
    primal: Vec<usize>,
    primal_of: Vec<Option<usize>>,
    plaquettes: Vec<(usize, usize)>,
    plaquette_primals: Vec<Vec<usize>>,
    edges: Vec<(Node, Node)>,
}

impl Lattice {
    pub fn new(distance: usize) -> Result<Self> {
        if distance < 3 || distance % 2 == 0 {
            return Err(Error::InvalidLattice(format!("distance must be odd and >= 3, got {distance}")));
        }
        let size = 2 * distance - 1;
        let mut grid = vec![None; size * size];
        let mut sites = Vec::new();
        for row in 0..size {
            for col in 0..size {
                let role = if (row + col) % 2 == 0 {
                    Role::Primal
                } else if row % 2 == 0 {
                    Role::Dual
                } else {
                    continue;
                };
                grid[row * size + col] = Some(sites.len());
                sites.push(Site { row, col, role });
            }
        }
        let at = |r: i64, c: i64| -> Option<usize> {
            if r < 0 || c < 0 || r >= size as i64 || c >= size as i64 {
                None
            } else {
                grid[r as usize * size + c as usize]
            }
        };

        let mut gates = Vec::new();
        for (id, s) in sites.iter().enumerate() {
            if s.role != Role::Dual {
                continue;
            }
            let (r, c) = (s.row as i64, s.col as i64);
            for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                if let Some(other) = at(r + dr, c + dc) {
                    gates.push((id.min(other), id.max(other)));
                }
            }
        }
        let graph = GateGraph::from_edges(sites.len(), &gates)?;

        let primal: Vec<usize> = (0..sites.len()).filter(|&i| sites[i].role == Role::Primal).collect();
        let mut primal_of = vec![None; sites.len()];
        for (e, &q) in primal.iter().enumerate() {
            primal_of[q] = Some(e);
        }

        let mut plaquettes = Vec::new();
        let mut plaquette_primals = Vec::new();
        let mut plaquette_at = vec![None; size * size];
        for row in (1..size).step_by(2) {
            for col in (0..size).step_by(2) {
                let (r, c) = (row as i64, col as i64);
                let members: Vec<usize> = [(-1, 0), (1, 0), (0, -1), (0, 1)]
                    .iter()
                    .filter_map(|&(dr, dc)| at(r + dr, c + dc))
                    .map(|q| primal_of[q].expect("plaquette neighbors are primal"))
                    .collect();
                plaquette_at[row * size + col] = Some(plaquettes.len());
                plaquettes.push((row, col));
                plaquette_primals.push(members);
            }
        }

        let edges = primal
            .iter()
            .map(|&q| {
                let Site { row, col, .. } = sites[q];
                let plaq = |r: usize, c: usize| Node::Plaquette(plaquette_at[r * size + c].unwrap());
                if row % 2 == 1 {
                    (plaq(row, col - 1), plaq(row, col + 1))
                } else if row == 0 {
                    (Node::Top, plaq(1, col))
                } else if row == size - 1 {
                    (plaq(row - 1, col), Node::Bottom)
                } else {
                    (plaq(row - 1, col), plaq(row + 1, col))
                }
            })
            .collect();

        Ok(Self { distance, sites, graph, primal, primal_of, plaquettes, plaquette_primals, edges })
    }

    pub fn distance(&self) -> usize {
        self.distance
    }

    /// All qubits in raster (row-major) order.
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn graph(&self) -> &GateGraph {
        &self.graph
    }

    /// Qubit ids of primal qubits; position in this list is the primal index.
    pub fn primal(&self) -> &[usize] {
        &self.primal
    }

    pub fn primal_index(&self, qubit: usize) -> Option<usize> {
        self.primal_of[qubit]
    }

    pub fn num_plaquettes(&self) -> usize {
        self.plaquettes.len()
    }

    /// Grid coordinates of plaquette `p`.
    pub fn plaquette_site(&self, p: usize) -> (usize, usize) {
        self.plaquettes[p]
    }

    /// `(row, col)` of plaquette `p` in plaquette units, `row < L-1`, `col < L`.
    pub fn plaquette_coords(&self, p: usize) -> (usize, usize) {
        let (r, c) = self.plaquettes[p];
        ((r - 1) / 2, c / 2)
    }

    pub fn plaquette_from_coords(&self, row: usize, col: usize) -> usize {
        row * self.distance + col
    }

    pub fn plaquette_primals(&self, p: usize) -> &[usize] {
        &self.plaquette_primals[p]
    }

    /// Decoding-graph endpoints of primal `e`.
    pub fn edge(&self, e: usize) -> (Node, Node) {
        self.edges[e]
    }

    pub fn edges(&self) -> &[(Node, Node)] {
        &self.edges
    }

    /// Hop distance between two plaquettes.
    pub fn manhattan(&self, p: usize, q: usize) -> usize {
        let (a, b) = self.plaquette_coords(p);
        let (c, d) = self.plaquette_coords(q);
        a.abs_diff(c) + b.abs_diff(d)
    }

    /// Hops from plaquette `p` to the top and bottom boundaries.
    pub fn boundary_hops(&self, p: usize) -> (usize, usize) {
        let (row, _) = self.plaquette_coords(p);
        (row + 1, self.distance - 1 - row)
    }

    /// Primal indices on the top boundary.
    pub fn top_boundary(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.primal.len()).filter(|&e| self.edges[e].0 == Node::Top)
    }

    /// Violated plaquettes: odd number of flipped primals on the boundary.
    pub fn syndrome(&self, flips: &[bool]) -> Vec<usize> {
        (0..self.plaquettes.len())
            .filter(|&p| self.plaquette_primals[p].iter().filter(|&&e| flips[e]).count() % 2 == 1)
            .collect()
    }

    /// Same as [`syndrome`](Self::syndrome), computed edge by edge.
    pub fn syndrome_from_incidence(&self, flips: &[bool]) -> Vec<usize> {
        let mut parity = vec![false; self.plaquettes.len()];
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            if !flips[e] {
                continue;
            }
            for n in [a, b] {
                if let Node::Plaquette(p) = n {
                    parity[p] ^= true;
                }
            }
        }
        (0..parity.len()).filter(|&p| parity[p]).collect()
    }

    /// `Minus` when an odd number of top-boundary primals are flipped.
    pub fn logical_parity(&self, flips: &[bool]) -> Sign {
        Sign::from_bool_plus(self.top_boundary().filter(|&e| flips[e]).count() % 2 == 0)
    }
}

/// Inference results of one shot, before decoding.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Measurement {
    pub phases: Vec<f64>,
    pub hard: Vec<Sign>,
    /// Ideal outcome for primal qubits.
    pub ideal: Vec<Option<Sign>>,
    /// Likelihood record per qubit.
    pub records: Vec<SoftRecord>,
    /// Bit flip per primal index.
    pub flips: Vec<bool>,
    pub emissions: usize,
}

impl Measurement {
    /// Soft weight per primal index.
    pub fn primal_weights(&self, lattice: &Lattice) -> Vec<f64> {
        lattice.primal().iter().map(|&q| self.records[q].weight).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShotOutcome {
    pub measurement: Measurement,
    pub syndrome: Vec<usize>,
    pub logical_before: Sign,
    pub logical_after: Sign,
    pub logical_error: bool,
}

impl ShotOutcome {
    /// Plain-text dump for small lattices.
    pub fn debug_dump(&self, lattice: &Lattice) -> String {
        let mut out = String::new();
        for (q, s) in lattice.sites().iter().enumerate() {
            let m = &self.measurement;
            let ideal = m.ideal[q].map_or("-".to_string(), |s| s.value().to_string());
            out.push_str(&format!(
                "{} {} {:?} phi={:.6} hard={} ideal={} w={:.4}\n",
                s.row,
                s.col,
                s.role,
                m.phases[q],
                m.hard[q].value(),
                ideal,
                m.records[q].weight
            ));
        }
        out.push_str(&format!("syndrome {:?}\n", self.syndrome));
        out.push_str(&format!(
            "logical before={} after={} error={}\n",
            self.logical_before.value(),
            self.logical_after.value(),
            self.logical_error
        ));
        out
    }
}

/// Scores a flip pattern against a decoder.
pub fn evaluate(lattice: &Lattice, flips: &[bool], weights: &[f64], decoder: &Decoder) -> Result<(Vec<usize>, Correction, bool)> {
    let syndrome = lattice.syndrome(flips);
    let correction = decoder.decode(lattice, &syndrome, weights)?;
    let before = lattice.logical_parity(flips) == Sign::Minus;
    Ok((syndrome, correction.clone(), before ^ correction.top_parity))
}

#[derive(Clone, Debug)]
struct IdleDensity {
    plus: PhaseDensity,
    minus: PhaseDensity,
    mixed: PhaseDensity,
    peak: f64,
}

/// Shared, immutable per-configuration state for lattice shots.
#[derive(Clone, Debug)]
pub struct LatticeSimulator {
    lattice: Lattice,
    code: CodeParams,
    noise: NoiseParams,
    povm: PhasePovm,
    model: LikelihoodModel,
    qsi: QsiKind,
    populations: Vec<f64>,
    plus: FockVector,
    minus: FockVector,
    idle: IdleDensity,
}

impl LatticeSimulator {
    pub fn new(
        lattice: Lattice,
        code: CodeParams,
        gamma: f64,
        povm: PhasePovm,
        qsi: QsiKind,
        truncation: usize,
    ) -> Result<Self> {
        if qsi == QsiKind::FullMl {
            return Err(Error::Config("full ML inference is limited to two qubits; use local-ml on the lattice".into()));
        }
        let n_max = povm.n_max();
        let noise = NoiseParams::new(gamma, code.rotation())?;
        let model = LikelihoodModel::new(&code, gamma, &povm, truncation)?;
        let populations = loss::emission_populations(&code, EmissionPrior::CodePlus, n_max)?;
        let plus = code.plus_minus(Sign::Plus, n_max)?;
        let minus = code.plus_minus(Sign::Minus, n_max)?;
        let damp = loss::error_operator_from_parts(0, 0.0, 0.0, &noise, n_max);
        let p = povm.density(&damp.apply(&plus)?)?;
        let m = povm.density(&damp.apply(&minus)?)?;
        let mixed = p.add(&m).scaled(0.5);
        let peak = mixed.max()?.0;
        let idle = IdleDensity { plus: p, minus: m, mixed, peak };
        Ok(Self { lattice, code, noise, povm, model, qsi, populations, plus, minus, idle })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn code(&self) -> &CodeParams {
        &self.code
    }

    /// Emissions, phase sampling, raster-order inference and ideal outcomes.
    pub fn measure<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Measurement> {
        let lat = &self.lattice;
        let n_q = lat.sites().len();
        let t_gate = self.noise.t_gate();
        let times: Vec<Vec<f64>> =
            (0..n_q).map(|_| loss::sample_emissions(&self.populations, &self.noise, rng)).collect();
        let record = EmissionRecord::new(times, t_gate)?;

        let mut phases = Vec::with_capacity(n_q);
        let mut hard: Vec<Sign> = Vec::with_capacity(n_q);
        let mut ideal = Vec::with_capacity(n_q);
        let mut records = Vec::with_capacity(n_q);
        let mut flips = vec![false; lat.primal().len()];
        let rotation = self.code.rotation();

        for q in 0..n_q {
            let neighbor_tau: f64 = lat.graph().neighbors(q).iter().map(|&b| record.tau(b, t_gate)).sum();
            let fresh;
            let (dp, dm, phi) = if record.count(q) == 0 && neighbor_tau == 0.0 {
                let phi = self.idle.mixed.sample_with_envelope(1.05 * self.idle.peak, rng)?;
                (&self.idle.plus, &self.idle.minus, phi)
            } else {
                let e = loss::error_operator(q, &record, lat.graph(), &self.noise, self.povm.n_max());
                let p = self.povm.density(&e.apply(&self.plus)?)?;
                let m = self.povm.density(&e.apply(&self.minus)?)?;
                let mixed = p.add(&m);
                let phi = mixed.sample(rng)?;
                fresh = (p, m);
                (&fresh.0, &fresh.1, phi)
            };

            let neighbors: Vec<Option<Sign>> = lat
                .graph()
                .neighbors(q)
                .iter()
                .map(|&b| (b < q).then(|| hard[b]))
                .collect();
            let (fp, fm) = self.model.local(phi, &neighbors);
            let decision = match self.qsi {
                QsiKind::Binning => bin_phase(phi, rotation),
                _ => harden(fp, fm),
            };
            records.push(SoftRecord::new(phi, fp, fm, decision));
            phases.push(phi);
            hard.push(decision);

            if let Some(e) = lat.primal_index(q) {
                let (pp, pm) = (dp.eval(phi), dm.eval(phi));
                if pp + pm <= 0.0 {
                    return Err(Error::DegenerateDensity(phi));
                }
                let truth = Sign::from_bool_plus(rng.random::<f64>() * (pp + pm) < pp);
                flips[e] = truth != decision;
                ideal.push(Some(truth));
            } else {
                ideal.push(None);
            }
        }
        Ok(Measurement { phases, hard, ideal, records, flips, emissions: record.total() })
    }

    pub fn run_shot<R: Rng + ?Sized>(&self, decoder: &Decoder, rng: &mut R) -> Result<ShotOutcome> {
        let measurement = self.measure(rng)?;
        let weights = measurement.primal_weights(&self.lattice);
        let (syndrome, correction, logical_error) = evaluate(&self.lattice, &measurement.flips, &weights, decoder)?;
        let logical_before = self.lattice.logical_parity(&measurement.flips);
        let logical_after = if correction.top_parity { logical_before.flipped() } else { logical_before };
        Ok(ShotOutcome { measurement, syndrome, logical_before, logical_after, logical_error })
    }
}

/// Probability of `+` given `φ` for a state with densities `p₊` and `p₋`.
pub fn plus_probability(plus: &PhaseDensity, minus: &PhaseDensity, phi: f64) -> Result<f64> {
    let (a, b) = (plus.eval(phi), minus.eval(phi));
    if a + b <= 0.0 {
        return Err(Error::DegenerateDensity(phi));
    }
    Ok(a / (a + b))
}
