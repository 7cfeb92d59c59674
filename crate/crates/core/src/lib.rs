//! System-level Monte Carlo simulator for an RIS-assisted grant-free
//! power-domain NOMA uplink.
//!
//! A single base station serves `U` user equipments over `R` resource
//! blocks. `M` reconfigurable intelligent surfaces, each split into `G`
//! logical blocks of `N` elements, are deployed in an annulus around the
//! BS. UEs are grouped into NOMA clusters (one per RB) and each cluster
//! may be assisted by at most one RIS block whose phase shifts are
//! aligned to one of its members. Clustering, block assignment, and
//! alignment are chosen jointly by an iterative 3D axial assignment
//! procedure that maximizes the network sum rate; three RIS-less
//! benchmark schemes (OPT PD-NOMA, MGF-NOMA, SGF-NOMA) run on the same
//! channel realizations for comparison.
//!
//! Module layout:
//! - [`topology`]: network geometry and structural constants
//! - [`channel`]: 3GPP UMa path loss, LoS probability, Rician fading
//! - [`phy`]: phase alignment, SIC ordering, SINR and rate computation
//! - [`assignment`]: exact and heuristic 3D axial assignment solvers
//! - [`scheduler`]: joint clustering + RIS assignment algorithm
//! - [`baselines`]: the three benchmark schemes
//! - [`montecarlo`]: seeded trials and parameter sweeps
//! - [`cli`]: config loading, result serialization, validation suites

pub mod assignment;
pub mod baselines;
pub mod channel;
pub mod cli;
pub mod montecarlo;
pub mod phy;
pub mod scheduler;
pub mod topology;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("instance too large for exact solver: max dimension {0} > {1}")]
    ExactSolverSize(usize, usize),
    #[error("cluster size {0} exceeds power-optimizer limit {1}")]
    PowerSolverSize(usize, usize),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Converts a power level in dBm to watts.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Converts a power level in watts to dBm.
pub fn watt_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

/// Converts a dB value to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
