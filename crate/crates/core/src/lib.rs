//! Monte Carlo simulation of binomial rotation-symmetric bosonic codes
//! concatenated with a measurement-based planar surface code.

pub mod chain;
pub mod code;
pub mod decoder;
pub mod error;
pub mod fock;
pub mod harness;
pub mod lattice;
pub mod loss;
pub mod matching;
pub mod povm;
pub mod qsi;
pub mod seeding;
pub mod stats;

pub use code::{CodeParams, Logical, Sign};
pub use error::{Error, Result};
pub use fock::{FockVector, ModeOperator, C64};
pub use loss::{EmissionPrior, EmissionRecord, GateGraph, NoiseParams};
pub use povm::{PhaseDensity, PhasePovm, PovmKind};
pub use qsi::{LikelihoodModel, QsiKind, SoftRecord};
pub use chain::{ChainConfig, ChainEstimate, ChainSimulator};
pub use decoder::{Correction, Decoder, DecoderKind};
pub use lattice::{Lattice, LatticeSimulator, Measurement, ShotOutcome};
pub use matching::{BoundaryMatching, Partner};
pub use harness::{Experiment, ExperimentConfig, RunReport};
pub use stats::{AlphaFit, Curve, ThresholdResult};
