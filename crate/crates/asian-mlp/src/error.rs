//! Error type shared across the crate.

use crate::continuous::FixedPointReport;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by model evaluation, solvers and pricers.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A constructor or operation received an out-of-range parameter.
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// Evaluation outside the model domain (e.g. negative price under a
    /// square-root diffusion).
    #[error("domain error: {0}")]
    Domain(String),

    /// A root solve could not bracket or refine its target.
    #[error("root solve failed: {0}")]
    RootSolve(String),

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature failed: {0}")]
    Quadrature(String),

    /// The fixed-point iteration for the most-likely path did not converge.
    /// Carries the per-iteration report for diagnosis.
    #[error(
        "fixed-point iteration did not converge after {} iterations (last change {:e})",
        report.iterations,
        report.last_change()
    )]
    FixedPointDiverged { report: FixedPointReport },

    /// Newton-KKT solve for the discrete minimizer did not converge.
    /// Carries the residual trace.
    #[error("KKT solve did not converge after {} iterations (last residual {:e})",
        trace.len(), trace.last().copied().unwrap_or(f64::NAN))]
    KktDiverged { trace: Vec<f64> },

    /// Operation not available for this model kind.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A quoted price lies outside the arbitrage band for inversion.
    #[error("price {price} outside arbitrage band (intrinsic {intrinsic})")]
    PriceOutOfBand { price: f64, intrinsic: f64 },

    /// Monte Carlo paths left the finite domain.
    #[error("{count} of {total} simulated paths became non-finite")]
    PathExplosion { count: u64, total: u64 },
}
