use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("frequency {wbar} outside the band [{lo}, {hi}]")]
    OutOfBand { wbar: f64, lo: f64, hi: f64 },
    #[error("Laplace argument must have positive real part, got {0}")]
    DomainError(f64),
    #[error("k = {k} is at a band edge (|omega'| = {omega_prime:.3e})")]
    BandEdge { k: f64, omega_prime: f64 },
    #[error("feedback transform has Re = {re} >= 0 at k = {k}")]
    AssumptionL1Violated { k: f64, re: f64 },
    #[error("{name} = {value} at k = {k} is not a probability")]
    NonPhysical { k: f64, name: &'static str, value: f64 },
    #[error("|TH| = {value:.3e} at k = {k} is below c1/8")]
    DegenerateTh { k: f64, value: f64 },
    #[error("targets are not admissible: {0}")]
    NotAdmissible(String),
    #[error("cutoff horizon {n} needs t up to {need}, grid ends at {t_max}")]
    HorizonExceeded { n: usize, need: f64, t_max: f64 },
    #[error("feedback kernel step {kernel_dt} does not match simulation step {dt}")]
    HistoryUnderflow { kernel_dt: f64, dt: f64 },
    #[error("initial measure has no mass outside the band-edge margin")]
    UnsupportedMeasure,
    #[error("run needs {steps} steps, cap is {cap}")]
    BudgetExceeded { steps: u64, cap: u64 },
    #[error("xi = {xi} does not land on the half-grid for n = {n}, eps = {eps}")]
    GridMismatch { xi: f64, n: usize, eps: f64 },
    #[error("packet not separated: {mass:.3e} of the mass sits inside the margin band")]
    PacketNotSeparated { mass: f64 },
    #[error("io: {0}")]
    Io(String),
    #[error("format: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
