use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Fock cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },

    #[error("Fock cutoff {cutoff} too small for support up to |{required}>")]
    CutoffTooSmall { cutoff: usize, required: usize },

    #[error("invalid code parameters: {0}")]
    InvalidCode(String),

    #[error("invalid gate graph: {0}")]
    InvalidGraph(String),

    #[error("POVM construction failed: {0}")]
    PovmConstruction(String),

    #[error("negative phase density {value:e} at phi = {phi}")]
    NegativeDensity { phi: f64, value: f64 },

    #[error("rejection sampler exceeded {0} rejections")]
    RejectionLimit(usize),

    #[error("degenerate density: both twirl branches vanish at phi = {0}")]
    DegenerateDensity(f64),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid physical error rate p_e = {0}; need 0 < p_e < 1/2")]
    InvalidErrorRate(f64),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("chain simulation too large: dimension {0}")]
    ChainTooLarge(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
