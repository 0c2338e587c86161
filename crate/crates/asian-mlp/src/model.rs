//! Local volatility model family `dS = a(S,t) dW`.
//!
//! Every model is described by its diffusion function `a(s,t)`, its partial
//! derivatives, and the Lamperti transform
//!
//! ```text
//! φ(s,t) = ∫_{s0}^{s} dξ / a(ξ,t)
//! ```
//!
//! which maps increments of the price into increments of a unit-diffusion
//! coordinate. The built-in kinds carry closed forms throughout:
//!
//! | kind              | a(s,t)                                   | φ(s,t)                |
//! |-------------------|------------------------------------------|-----------------------|
//! | Bachelier         | σ                                        | (s−s0)/σ              |
//! | TimeDepBachelier  | σ·θ(t)                                   | (s−s0)/(σθ(t))        |
//! | BlackScholes      | σ·s                                      | ln(s/s0)/σ            |
//! | Cir               | σ·√s                                     | 2(√s−√s0)/σ           |
//! | TimeDepCir        | σ·θ(t)·√s                                | 2(√s−√s0)/(σθ(t))     |
//! | QuadraticTimeDep  | σ·e^{−λt}·[1+ψ(s−1)+γ/2·(s−1)²]          | quadrature            |
//!
//! The quadratic kind grows faster than linearly in `s`, which breaks the
//! linear-growth assumption behind the asymptotics; [`ModelSpec::validate`]
//! flags it but the solvers still accept it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::adaptive_simpson;

/// Absolute tolerance of the quadrature fallback for the Lamperti transform.
const LAMPERTI_QUAD_TOL: f64 = 1e-12;

/// Time weight θ(t) for the time-dependent kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TimeWeight {
    /// θ(t) = e^{−λt}.
    Exponential { lambda: f64 },
    /// Piecewise-linear table of `(t, θ(t))` knots, strictly increasing in t,
    /// clamped to the end values outside the knot range.
    Table { knots: Vec<(f64, f64)> },
}

impl TimeWeight {
    fn check(&self) -> Result<()> {
        match self {
            TimeWeight::Exponential { lambda } => {
                if !lambda.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "lambda",
                        value: *lambda,
                        reason: "must be finite",
                    });
                }
            }
            TimeWeight::Table { knots } => {
                if knots.len() < 2 {
                    return Err(Error::InvalidParameter {
                        name: "knots",
                        value: knots.len() as f64,
                        reason: "table needs at least two knots",
                    });
                }
                for w in knots.windows(2) {
                    if w[1].0.is_nan() || w[1].0 <= w[0].0 {
                        return Err(Error::InvalidParameter {
                            name: "knots",
                            value: w[1].0,
                            reason: "knot times must be strictly increasing",
                        });
                    }
                }
                for &(t, v) in knots {
                    if !t.is_finite() || !v.is_finite() || v <= 0.0 {
                        return Err(Error::InvalidParameter {
                            name: "knots",
                            value: v,
                            reason: "knot weights must be finite and positive",
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// θ(t).
    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeWeight::Exponential { lambda } => (-lambda * t).exp(),
            TimeWeight::Table { knots } => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let i = knots.partition_point(|&(kt, _)| kt <= t) - 1;
                let (t0, v0) = knots[i];
                let (t1, v1) = knots[i + 1];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// dθ/dt; for a table the slope of the containing segment, zero outside.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            TimeWeight::Exponential { lambda } => -lambda * (-lambda * t).exp(),
            TimeWeight::Table { knots } => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if t < first.0 || t >= last.0 {
                    return 0.0;
                }
                let i = knots.partition_point(|&(kt, _)| kt <= t) - 1;
                let (t0, v0) = knots[i];
                let (t1, v1) = knots[i + 1];
                (v1 - v0) / (t1 - t0)
            }
        }
    }
}

/// Model kind with its named parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    /// a(s,t) = σ.
    Bachelier { sigma: f64 },
    /// a(s,t) = σ·θ(t).
    TimeDepBachelier { sigma: f64, weight: TimeWeight },
    /// a(s,t) = σ·s.
    BlackScholes { sigma: f64 },
    /// a(s,t) = σ·√s.
    Cir { sigma: f64 },
    /// a(s,t) = σ·θ(t)·√s.
    TimeDepCir { sigma: f64, weight: TimeWeight },
    /// a(s,t) = σ·e^{−λt}·[1 + ψ(s−1) + γ/2·(s−1)²].
    QuadraticTimeDep {
        sigma: f64,
        psi: f64,
        gamma: f64,
        lambda: f64,
    },
}

impl ModelKind {
    /// Short identifier used in reports and CLI output.
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Bachelier { .. } => "bachelier",
            ModelKind::TimeDepBachelier { .. } => "tdbachelier",
            ModelKind::BlackScholes { .. } => "bs",
            ModelKind::Cir { .. } => "cir",
            ModelKind::TimeDepCir { .. } => "tdcir",
            ModelKind::QuadraticTimeDep { .. } => "quadratic",
        }
    }

    fn sigma(&self) -> f64 {
        match self {
            ModelKind::Bachelier { sigma }
            | ModelKind::TimeDepBachelier { sigma, .. }
            | ModelKind::BlackScholes { sigma }
            | ModelKind::Cir { sigma }
            | ModelKind::TimeDepCir { sigma, .. }
            | ModelKind::QuadraticTimeDep { sigma, .. } => *sigma,
        }
    }

    /// True for the square-root kinds whose diffusion needs `s >= 0`.
    pub fn requires_nonnegative_price(&self) -> bool {
        matches!(self, ModelKind::Cir { .. } | ModelKind::TimeDepCir { .. })
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A local volatility model together with its initial price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    kind: ModelKind,
    s0: f64,
}

/// Grid diagnostics from [`ModelSpec::validate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub s_range: (f64, f64),
    pub t_range: (f64, f64),
    /// Minimum of a(s,t) over the grid.
    pub min_vol: f64,
    /// Maximum of a(s,t)/(1+|s|), the linear-growth ratio.
    pub max_growth_ratio: f64,
    /// Maximum finite-difference ratio |a(s',t)-a(s,t)|/|s'-s| over grid neighbours.
    pub max_lipschitz_ratio: f64,
    /// Set for kinds whose diffusion grows superlinearly in s.
    pub growth_violation: bool,
    /// True when a(s,t) > 0 everywhere on the grid.
    pub positive: bool,
}

impl ModelSpec {
    /// Build a model, validating parameters.
    ///
    /// σ = 0 is accepted (degenerate deterministic dynamics, useful for
    /// Monte Carlo sanity checks); the path solvers reject it when they
    /// encounter a vanishing diffusion.
    pub fn new(kind: ModelKind, s0: f64) -> Result<Self> {
        if !s0.is_finite() || s0 <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "s0",
                value: s0,
                reason: "initial price must be positive and finite",
            });
        }
        let sigma = kind.sigma();
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma",
                value: sigma,
                reason: "must be nonnegative and finite",
            });
        }
        match &kind {
            ModelKind::TimeDepBachelier { weight, .. } | ModelKind::TimeDepCir { weight, .. } => {
                weight.check()?
            }
            ModelKind::QuadraticTimeDep {
                psi, gamma, lambda, ..
            } => {
                for (name, v) in [("psi", *psi), ("gamma", *gamma), ("lambda", *lambda)] {
                    if !v.is_finite() {
                        return Err(Error::InvalidParameter {
                            name,
                            value: v,
                            reason: "must be finite",
                        });
                    }
                }
            }
            _ => {}
        }
        Ok(Self { kind, s0 })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    /// Same dynamics started from a different initial price.
    ///
    /// Note the Lamperti transform is anchored at `s0`, so bump-and-reprice
    /// sensitivities must go through this method rather than shifting paths.
    pub fn with_s0(&self, s0: f64) -> Result<Self> {
        Self::new(self.kind.clone(), s0)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Domain(format!("time {t} outside [0, ∞)")));
        }
        Ok(())
    }

    /// Diffusion value a(s,t).
    pub fn local_vol(&self, s: f64, t: f64) -> Result<f64> {
        self.check_time(t)?;
        if self.kind.requires_nonnegative_price() && s < 0.0 {
            return Err(Error::Domain(format!(
                "price {s} < 0 under square-root diffusion"
            )));
        }
        Ok(match &self.kind {
            ModelKind::Bachelier { sigma } => *sigma,
            ModelKind::TimeDepBachelier { sigma, weight } => sigma * weight.value(t),
            ModelKind::BlackScholes { sigma } => sigma * s,
            ModelKind::Cir { sigma } => sigma * s.sqrt(),
            ModelKind::TimeDepCir { sigma, weight } => sigma * weight.value(t) * s.sqrt(),
            ModelKind::QuadraticTimeDep {
                sigma,
                psi,
                gamma,
                lambda,
            } => {
                let u = s - 1.0;
                sigma * (-lambda * t).exp() * (1.0 + psi * u + 0.5 * gamma * u * u)
            }
        })
    }

    /// Partial derivatives (∂a/∂s, ∂a/∂t).
    pub fn local_vol_partials(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        self.check_time(t)?;
        if self.kind.requires_nonnegative_price() {
            if s < 0.0 {
                return Err(Error::Domain(format!(
                    "price {s} < 0 under square-root diffusion"
                )));
            }
            if s == 0.0 {
                return Err(Error::Domain(
                    "∂a/∂s singular at s = 0 for square-root diffusion".into(),
                ));
            }
        }
        Ok(match &self.kind {
            ModelKind::Bachelier { .. } => (0.0, 0.0),
            ModelKind::TimeDepBachelier { sigma, weight } => (0.0, sigma * weight.derivative(t)),
            ModelKind::BlackScholes { sigma } => (*sigma, 0.0),
            ModelKind::Cir { sigma } => (0.5 * sigma / s.sqrt(), 0.0),
            ModelKind::TimeDepCir { sigma, weight } => (
                0.5 * sigma * weight.value(t) / s.sqrt(),
                sigma * weight.derivative(t) * s.sqrt(),
            ),
            ModelKind::QuadraticTimeDep {
                sigma,
                psi,
                gamma,
                lambda,
            } => {
                let u = s - 1.0;
                let decay = (-lambda * t).exp();
                let poly = 1.0 + psi * u + 0.5 * gamma * u * u;
                (sigma * decay * (psi + gamma * u), -lambda * sigma * decay * poly)
            }
        })
    }

    /// Lamperti transform φ(s,t) = ∫_{s0}^{s} dξ/a(ξ,t).
    ///
    /// Closed form for the built-in kinds with analytic antiderivatives,
    /// adaptive quadrature (absolute tolerance 1e-12) otherwise.
    pub fn lamperti(&self, s: f64, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let s0 = self.s0;
        match &self.kind {
            ModelKind::Bachelier { sigma } => {
                self.require_positive_vol(*sigma)?;
                Ok((s - s0) / sigma)
            }
            ModelKind::TimeDepBachelier { sigma, weight } => {
                let a = sigma * weight.value(t);
                self.require_positive_vol(a)?;
                Ok((s - s0) / a)
            }
            ModelKind::BlackScholes { sigma } => {
                self.require_positive_vol(*sigma)?;
                if s <= 0.0 {
                    return Err(Error::Domain(format!(
                        "lamperti integral from {s0} to {s} crosses the s = 0 singularity"
                    )));
                }
                Ok((s / s0).ln() / sigma)
            }
            ModelKind::Cir { sigma } => {
                self.require_positive_vol(*sigma)?;
                if s < 0.0 {
                    return Err(Error::Domain(format!("price {s} < 0 under CIR")));
                }
                Ok(2.0 * (s.sqrt() - s0.sqrt()) / sigma)
            }
            ModelKind::TimeDepCir { sigma, weight } => {
                let c = sigma * weight.value(t);
                self.require_positive_vol(c)?;
                if s < 0.0 {
                    return Err(Error::Domain(format!("price {s} < 0 under CIR")));
                }
                Ok(2.0 * (s.sqrt() - s0.sqrt()) / c)
            }
            ModelKind::QuadraticTimeDep { .. } => self.lamperti_quadrature(s, t),
        }
    }

    /// Quadrature fallback for φ; shared by the generic kinds and the
    /// closed-form consistency tests.
    pub fn lamperti_quadrature(&self, s: f64, t: f64) -> Result<f64> {
        let s0 = self.s0;
        adaptive_simpson(
            |xi| {
                let a = self.local_vol(xi, t)?;
                if a.is_nan() || a <= 0.0 {
                    return Err(Error::Quadrature(format!(
                        "diffusion not positive at s = {xi}, t = {t}"
                    )));
                }
                Ok(1.0 / a)
            },
            s0,
            s,
            LAMPERTI_QUAD_TOL,
        )
    }

    fn require_positive_vol(&self, a: f64) -> Result<()> {
        if a > 0.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "diffusion scale {a} must be positive for the Lamperti transform"
            )))
        }
    }

    /// True when the most-likely path has a closed form for this kind.
    pub fn has_closed_form_mlp(&self) -> bool {
        matches!(
            self.kind,
            ModelKind::Bachelier { .. }
                | ModelKind::TimeDepBachelier { .. }
                | ModelKind::BlackScholes { .. }
                | ModelKind::Cir { .. }
        )
    }

    /// Grid check of positivity, linear growth and local Lipschitz bounds.
    pub fn validate(
        &self,
        s_range: (f64, f64),
        t_range: (f64, f64),
        grid_n: usize,
    ) -> Result<ModelDiagnostics> {
        if grid_n < 2 {
            return Err(Error::InvalidParameter {
                name: "grid_n",
                value: grid_n as f64,
                reason: "validation grid needs at least 2 points per axis",
            });
        }
        let (s_lo, s_hi) = s_range;
        let (t_lo, t_hi) = t_range;
        if s_hi.is_nan() || t_hi.is_nan() || s_hi <= s_lo || t_hi < t_lo {
            return Err(Error::InvalidParameter {
                name: "range",
                value: s_hi,
                reason: "ranges must be ordered",
            });
        }
        let mut min_vol = f64::INFINITY;
        let mut max_growth = 0.0f64;
        let mut max_lipschitz = 0.0f64;
        let ds = (s_hi - s_lo) / (grid_n - 1) as f64;
        let dt = if grid_n > 1 { (t_hi - t_lo) / (grid_n - 1) as f64 } else { 0.0 };
        for j in 0..grid_n {
            let t = t_lo + dt * j as f64;
            let mut prev: Option<f64> = None;
            for i in 0..grid_n {
                let s = s_lo + ds * i as f64;
                let a = self.local_vol(s, t)?;
                min_vol = min_vol.min(a);
                max_growth = max_growth.max(a / (1.0 + s.abs()));
                if let Some(p) = prev {
                    max_lipschitz = max_lipschitz.max((a - p).abs() / ds);
                }
                prev = Some(a);
            }
        }
        let growth_violation = matches!(
            self.kind,
            ModelKind::QuadraticTimeDep { gamma, .. } if gamma != 0.0
        );
        Ok(ModelDiagnostics {
            s_range,
            t_range,
            min_vol,
            max_growth_ratio: max_growth,
            max_lipschitz_ratio: max_lipschitz,
            growth_violation,
            positive: min_vol > 0.0,
        })
    }

    /// Default validation window spanning the paths that arise when pricing
    /// a strike `k` with expiry `t`: s in \[s0/4, 4·max(s0,K)\], t in \[0,T\].
    pub fn default_validation_ranges(&self, strike: f64, expiry: f64) -> ((f64, f64), (f64, f64)) {
        ((self.s0 / 4.0, 4.0 * self.s0.max(strike)), (0.0, expiry))
    }
}
