use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sector {sector} is unreachable with photon cutoff {n_max} (largest reachable is {max})")]
    UnreachableSector { sector: u32, n_max: u32, max: u32 },

    #[error("unknown resonator index {0}, expected 1 or 2")]
    UnknownMode(u32),

    #[error("unknown qubit label `{0}`, expected q1, q2 or qc")]
    UnknownQubit(String),

    #[error("operator bases do not match: {0}")]
    BasisMismatch(String),

    #[error("basis has cutoff n_max = {basis} but parameters request n_max = {params}")]
    CutoffMismatch { params: u32, basis: u32 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("knob qubit is resonant with the resonators (epsilon_c = w); the dispersive transform is undefined")]
    ResonantKnob,

    #[error("matrix is not Hermitian (max |M - M^dag| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("norm drift {drift:.3e} exceeds {limit:.1e} at t = {time}; step {step} is too coarse")]
    IntegratorDrift {
        drift: f64,
        limit: f64,
        step: f64,
        time: f64,
    },

    #[error("need at least {needed} levels, found {found}")]
    TooFewLevels { needed: usize, found: usize },

    #[error("state {0} is not contained in the basis")]
    MissingState(String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
