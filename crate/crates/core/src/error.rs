//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spec validation failed: {0}")]
    Validation(String),

    #[error("polynomial evaluation failure: R_D1D2(im) = 0 at m = {m}")]
    PolynomialEvaluation { m: f64 },

    #[error("no good covering exists for iota = {iota}, min opening = {min_opening}: {reason}")]
    InfeasibleCovering { iota: usize, min_opening: f64, reason: String },

    #[error("inadmissible direction: cos({k}*(xi - arg t)) = {cosine:.6} <= {delta1}")]
    InadmissibleDirection { k: u32, cosine: f64, delta1: f64 },

    #[error("evaluation point violates the strip: |Im z| = {imz} >= beta = {beta}")]
    StripViolation { imz: f64, beta: f64 },

    #[error("frequency grids do not match")]
    GridMismatch,

    #[error("degenerate denominator: R_D1D2(im) = 0 at m = {m}")]
    DegenerateDenominator { m: f64 },

    #[error("root arguments cover all directions; no root-free sector exists")]
    NoGap,

    #[error("lower bound violated: {0}")]
    BoundViolation(String),

    #[error("fixed point iteration diverged after {iterations} iterations (last change {last_change:.3e})")]
    Divergence { iterations: usize, last_change: f64 },

    #[error("direction {xi} is not available on the solution grid")]
    DirectionUnavailable { xi: f64 },

    #[error("infeasible cone intersection: {0}")]
    InfeasibleCone(String),

    #[error("constructed t2 lies outside the unbounded time sector (arg = {arg:.4})")]
    DomainViolation { arg: f64 },

    #[error("sectors {h} and {h_next} do not overlap")]
    OverlapEmpty { h: usize, h_next: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("divided differences too ill-conditioned: estimate {cond:.3e} exceeds 1e12")]
    Conditioning { cond: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
