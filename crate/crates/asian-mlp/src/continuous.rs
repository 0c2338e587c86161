//! Most-likely path for the continuously monitored Asian call.
//!
//! The path minimizes the energy
//!
//! ```text
//! J = 1/2 ∫_0^T (ṡ(t)/a(s(t),t))² dt
//! ```
//!
//! over paths with `s(0) = s0` and average `(1/T)∫ s dt = K`. The optimum
//! satisfies the Euler-Lagrange equation
//!
//! ```text
//! d/dt(ṡ/a) − (a_t/a²)·ṡ + (λ/T)·a = 0,   s(0) = s0,  ṡ(T) = 0,
//! ```
//!
//! with the multiplier λ pinned by the average constraint. Closed forms
//! exist for the Bachelier (a parabola), Black-Scholes (cosh²/cos²
//! profiles), CIR (cos²/cosh² in √s) and time-dependent Bachelier models;
//! every other model goes through the fixed-point map
//!
//! ```text
//! s_{m+1}(t) = s0 + I(t)/Ī(T) · (K − s0),
//! I(t) = ∫_0^t a(s_m(r),r)·G(r) dr,
//! G(r) = e^{F(r)} ∫_r^T a(s_m(u),u)·e^{−F(u)} du,
//! F(u) = ∫_0^u (a_t/a)(s_m(v),v) dv,
//! ```
//!
//! obtained by integrating the Euler-Lagrange equation twice with the
//! diffusion frozen along the previous iterate. All inner integrals are
//! cumulative, so one sweep costs O(grid_n).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec, TimeWeight};
use crate::numerics::{
    adaptive_simpson, bisect_newton, cumulative_integral, derivative_samples, simpson,
};

/// Default number of grid intervals for sampled paths.
pub const DEFAULT_GRID_N: usize = 400;

/// How a path was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MlpMethod {
    ClosedForm,
    FixedPoint,
    /// Externally supplied samples (no solver guarantee attached).
    External,
}

/// A candidate or optimal path on a uniform time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpPath {
    times: Vec<f64>,
    values: Vec<f64>,
    derivs: Option<Vec<f64>>,
    multiplier: f64,
    rate: f64,
    method: MlpMethod,
}

impl MlpPath {
    /// Wrap externally produced samples, e.g. to measure their residual.
    ///
    /// `multiplier` is the Lagrange multiplier the path claims to satisfy
    /// the Euler-Lagrange equation with.
    pub fn from_samples(times: Vec<f64>, values: Vec<f64>, multiplier: f64) -> Result<Self> {
        if times.len() != values.len() || times.len() < 5 {
            return Err(Error::InvalidParameter {
                name: "samples",
                value: times.len() as f64,
                reason: "need equal-length times/values with at least 5 points",
            });
        }
        check_uniform_grid(&times)?;
        Ok(Self {
            times,
            values,
            derivs: None,
            multiplier,
            rate: f64::NAN,
            method: MlpMethod::External,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Lagrange multiplier of the average constraint.
    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    /// Energy 1/2 ∫ (ṡ/a)² dt of the path.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn method(&self) -> MlpMethod {
        self.method
    }

    pub fn expiry(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// Path derivative ṡ on the grid: the solver-attached analytic values
    /// when present, otherwise fourth-order finite differences.
    pub fn s_dot(&self) -> Vec<f64> {
        match &self.derivs {
            Some(d) => d.clone(),
            None => derivative_samples(&self.values, self.dt()),
        }
    }

    /// Time average (1/T) ∫ s dt by Simpson quadrature.
    pub fn mean(&self) -> f64 {
        simpson(&self.values, self.dt()) / self.expiry()
    }

    /// Writes `t,s,s_dot` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let sd = self.s_dot();
        writeln!(w, "t,s,s_dot")?;
        for ((t, s), d) in self.times.iter().zip(&self.values).zip(&sd) {
            writeln!(w, "{t},{s},{d}")?;
        }
        Ok(())
    }
}

/// Convergence record of the fixed-point iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPointReport {
    /// Iterations performed.
    pub iterations: usize,
    /// Sup-norm path change at each iteration.
    pub sup_changes: Vec<f64>,
    pub converged: bool,
}

impl FixedPointReport {
    pub fn last_change(&self) -> f64 {
        self.sup_changes.last().copied().unwrap_or(f64::NAN)
    }
}

/// Options for [`mlp_fixed_point`].
#[derive(Debug, Clone)]
pub struct FixedPointConfig {
    /// Number of grid intervals (even, at least 32).
    pub grid_n: usize,
    /// Sup-norm stopping tolerance, scaled by max(1, |K − s0|).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            grid_n: DEFAULT_GRID_N,
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

/// Euler-Lagrange defect of a path.
#[derive(Debug, Clone, Copy)]
pub struct ElResidual {
    /// Sup-norm of the ODE residual over interior grid points.
    pub interior: f64,
    /// Natural boundary defect |ṡ(T)|.
    pub boundary: f64,
}

impl ElResidual {
    pub fn max(&self) -> f64 {
        self.interior.max(self.boundary)
    }
}

fn check_uniform_grid(times: &[f64]) -> Result<()> {
    let dt = times[1] - times[0];
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "times",
            value: dt,
            reason: "grid must be strictly increasing",
        });
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::InvalidParameter {
                name: "times",
                value: w[1] - w[0],
                reason: "grid must be uniform",
            });
        }
    }
    Ok(())
}

fn check_grid_n(grid_n: usize, min: usize) -> Result<()> {
    if grid_n < min || !grid_n.is_multiple_of(2) {
        return Err(Error::InvalidParameter {
            name: "grid_n",
            value: grid_n as f64,
            reason: "must be even (Simpson weights) and large enough",
        });
    }
    Ok(())
}

fn check_expiry(expiry: f64) -> Result<()> {
    if !expiry.is_finite() || expiry <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "expiry",
            value: expiry,
            reason: "must be positive and finite",
        });
    }
    Ok(())
}

fn uniform_grid(expiry: f64, grid_n: usize) -> Vec<f64> {
    let dt = expiry / grid_n as f64;
    (0..=grid_n).map(|i| i as f64 * dt).collect()
}

/// x ↦ x/sinh(x), the strictly decreasing profile function of the
/// Black-Scholes out-of-the-money branch.
pub fn profile_f(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x / x.sinh()
    }
}

/// x ↦ sin(x)/x on [0, π], the in-the-money branch profile.
pub fn profile_g(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter {
            name: "ratio",
            value: ratio,
            reason: "must lie strictly inside (0, 1)",
        });
    }
    Ok(())
}

/// Inverse of f(x) = x/sinh(x) on (0, ∞) to |f(x) − ratio| ≤ 1e-12.
pub fn invert_f(ratio: f64) -> Result<f64> {
    check_ratio(ratio)?;
    let mut hi = 1.0;
    while profile_f(hi) >= ratio {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::RootSolve(format!(
                "could not bracket f-inverse of {ratio}"
            )));
        }
    }
    let df = |x: f64| {
        let sh = x.sinh();
        (sh - x * x.cosh()) / (sh * sh)
    };
    bisect_newton(profile_f, df, 1e-300, hi, ratio, 1e-12)
}

/// Inverse of g(x) = sin(x)/x on (0, π) to |g(x) − ratio| ≤ 1e-12.
pub fn invert_g(ratio: f64) -> Result<f64> {
    check_ratio(ratio)?;
    let hi = std::f64::consts::PI - 1e-12;
    if profile_g(hi) >= ratio {
        return Err(Error::RootSolve(format!(
            "ratio {ratio} below the numerical range of sin(x)/x on (0, π)"
        )));
    }
    let dg = |x: f64| (x * x.cos() - x.sin()) / (x * x);
    bisect_newton(profile_g, dg, 1e-300, hi, ratio, 1e-12)
}

// Series-guarded differences; all are exact limits at the origin.

/// y − tanh(y), positive for y > 0.
fn y_minus_tanh(y: f64) -> f64 {
    if y.abs() < 2e-2 {
        let y2 = y * y;
        y * y2 * (1.0 / 3.0 - y2 * (2.0 / 15.0 - y2 * 17.0 / 315.0))
    } else {
        y - y.tanh()
    }
}

/// tan(y) − y, positive for y in (0, π/2).
fn tan_minus_y(y: f64) -> f64 {
    if y.abs() < 2e-2 {
        let y2 = y * y;
        y * y2 * (1.0 / 3.0 + y2 * (2.0 / 15.0 + y2 * 17.0 / 315.0))
    } else {
        y.tan() - y
    }
}

/// u − sin(u).
fn u_minus_sin(u: f64) -> f64 {
    if u.abs() < 1e-2 {
        let u2 = u * u;
        u * u2 * (1.0 / 6.0 - u2 * (1.0 / 120.0 - u2 / 5040.0))
    } else {
        u - u.sin()
    }
}

/// sinh(u) − u.
fn sinh_minus_u(u: f64) -> f64 {
    if u.abs() < 1e-2 {
        let u2 = u * u;
        u * u2 * (1.0 / 6.0 + u2 * (1.0 / 120.0 + u2 / 5040.0))
    } else {
        u.sinh() - u
    }
}

/// ∫_0^t (T−u)·θ²(u) du and ∫_0^T (T−u)²·θ²(u) du for the exponential
/// weight θ(u) = e^{−λu}; series branches remove the small-λ cancellation.
fn exp_weight_moment1(t: f64, expiry: f64, lambda: f64) -> f64 {
    let a = 2.0 * lambda;
    let x = a * t;
    if x.abs() < 1e-3 {
        // ∫ (T−u)(1 − au + a²u²/2 − a³u³/6) du
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        (expiry * t - 0.5 * t2) - a * (0.5 * expiry * t2 - t3 / 3.0)
            + 0.5 * a * a * (expiry * t3 / 3.0 - 0.25 * t4)
            - a * a * a / 6.0 * (0.25 * expiry * t4 - 0.2 * t4 * t)
    } else {
        // T(1−e^{−at})/a − [1 − e^{−at}(1+at)]/a²
        let one_minus = -(-x).exp_m1();
        let residue = 1.0 - (1.0 + x) * (-x).exp();
        expiry * one_minus / a - residue / (a * a)
    }
}

fn exp_weight_moment2(expiry: f64, lambda: f64) -> f64 {
    let a = 2.0 * lambda;
    let x = a * expiry;
    let t3 = expiry * expiry * expiry;
    if x.abs() < 1e-3 {
        t3 * (1.0 / 3.0 - x * (1.0 / 12.0 - x * (1.0 / 60.0 - x / 360.0)))
    } else {
        let one_minus = -(-x).exp_m1();
        expiry * expiry / a - 2.0 * expiry / (a * a) + 2.0 * one_minus / (a * a * a)
    }
}

/// Cumulative ∫_0^{t_i} f du on a grid via per-interval adaptive quadrature.
fn cumulative_adaptive<F>(f: F, times: &[f64], tol: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut out = vec![0.0; times.len()];
    let span = times[times.len() - 1] - times[0];
    for i in 1..times.len() {
        let seg_tol = tol * (times[i] - times[i - 1]) / span;
        out[i] = out[i - 1] + adaptive_simpson(&f, times[i - 1], times[i], seg_tol)?;
    }
    Ok(out)
}

/// Closed-form most-likely path for the Bachelier, time-dependent
/// Bachelier, Black-Scholes and CIR models, sampled on `grid_n + 1`
/// uniform points.
pub fn mlp_closed_form(
    model: &ModelSpec,
    strike: f64,
    expiry: f64,
    grid_n: usize,
) -> Result<MlpPath> {
    check_expiry(expiry)?;
    check_grid_n(grid_n, 4)?;
    let s0 = model.s0();
    let times = uniform_grid(expiry, grid_n);

    if strike == s0 {
        // degenerate optimum: the constant path is feasible with zero energy
        return Ok(MlpPath {
            values: vec![s0; grid_n + 1],
            derivs: Some(vec![0.0; grid_n + 1]),
            times,
            multiplier: 0.0,
            rate: 0.0,
            method: MlpMethod::ClosedForm,
        });
    }

    match model.kind() {
        ModelKind::Bachelier { sigma } => {
            require_sigma(*sigma)?;
            let (values, derivs) = bachelier_parabola(&times, s0, strike, expiry);
            let rate = 1.5 * (strike - s0).powi(2) / (sigma * sigma * expiry);
            Ok(MlpPath {
                times,
                values,
                derivs: Some(derivs),
                multiplier: 3.0 * (strike - s0) / (sigma * sigma * expiry),
                rate,
                method: MlpMethod::ClosedForm,
            })
        }
        ModelKind::TimeDepBachelier { sigma, weight } => {
            require_sigma(*sigma)?;
            let moment2 = match weight {
                TimeWeight::Exponential { lambda } => exp_weight_moment2(expiry, *lambda),
                TimeWeight::Table { .. } => adaptive_simpson(
                    |u| {
                        let th = weight.value(u);
                        Ok((expiry - u) * (expiry - u) * th * th)
                    },
                    0.0,
                    expiry,
                    1e-14,
                )?,
            };
            let multiplier = expiry * expiry * (strike - s0) / (sigma * sigma * moment2);
            let scale = multiplier * sigma * sigma / expiry;
            let moment1: Vec<f64> = match weight {
                TimeWeight::Exponential { lambda } => times
                    .iter()
                    .map(|&t| exp_weight_moment1(t, expiry, *lambda))
                    .collect(),
                TimeWeight::Table { .. } => cumulative_adaptive(
                    |u| {
                        let th = weight.value(u);
                        Ok((expiry - u) * th * th)
                    },
                    &times,
                    1e-13,
                )?,
            };
            let values: Vec<f64> = moment1.iter().map(|m| s0 + scale * m).collect();
            let derivs: Vec<f64> = times
                .iter()
                .map(|&t| {
                    let th = weight.value(t);
                    scale * (expiry - t) * th * th
                })
                .collect();
            let rate = 0.5 * expiry * expiry * (strike - s0).powi(2) / (sigma * sigma * moment2);
            Ok(MlpPath {
                times,
                values,
                derivs: Some(derivs),
                multiplier,
                rate,
                method: MlpMethod::ClosedForm,
            })
        }
        ModelKind::BlackScholes { sigma } => {
            require_sigma(*sigma)?;
            let s2 = sigma * sigma;
            if s0 < strike {
                let x = invert_f(s0 / strike)?;
                let c1 = x / expiry;
                let peak = s0 * (0.5 * x).cosh().powi(2);
                let values: Vec<f64> = times
                    .iter()
                    .map(|&t| peak / (0.5 * c1 * (expiry - t)).cosh().powi(2))
                    .collect();
                let derivs: Vec<f64> = times
                    .iter()
                    .zip(&values)
                    .map(|(&t, &s)| c1 * s * (0.5 * c1 * (expiry - t)).tanh())
                    .collect();
                let rate = x / (s2 * expiry) * y_minus_tanh(0.5 * x);
                let multiplier = c1 * c1 * expiry / (s2 * s0 * (1.0 + x.cosh()));
                Ok(MlpPath {
                    times,
                    values,
                    derivs: Some(derivs),
                    multiplier,
                    rate,
                    method: MlpMethod::ClosedForm,
                })
            } else {
                let x = invert_g(strike / s0)?;
                let c1 = x / expiry;
                let trough = s0 * (0.5 * x).cos().powi(2);
                let values: Vec<f64> = times
                    .iter()
                    .map(|&t| trough / (0.5 * c1 * (expiry - t)).cos().powi(2))
                    .collect();
                let derivs: Vec<f64> = times
                    .iter()
                    .zip(&values)
                    .map(|(&t, &s)| -c1 * s * (0.5 * c1 * (expiry - t)).tan())
                    .collect();
                let rate = x / (s2 * expiry) * tan_minus_y(0.5 * x);
                let multiplier = -c1 * c1 * expiry / (s2 * s0 * (1.0 + x.cos()));
                Ok(MlpPath {
                    times,
                    values,
                    derivs: Some(derivs),
                    multiplier,
                    rate,
                    method: MlpMethod::ClosedForm,
                })
            }
        }
        ModelKind::Cir { sigma } => {
            require_sigma(*sigma)?;
            let s2 = sigma * sigma;
            let ratio = strike / s0;
            if s0 < strike {
                // (tan x + x sec²x)/(2x) = K/s0 on (0, π/2)
                let cap = std::f64::consts::FRAC_PI_2 - 1e-6;
                let h = |x: f64| {
                    let sec2 = 1.0 / (x.cos() * x.cos());
                    (x.tan() + x * sec2) / (2.0 * x)
                };
                if h(cap) < ratio {
                    return Err(Error::RootSolve(format!(
                        "strike ratio {ratio} beyond the cos-branch bracket (0, π/2)"
                    )));
                }
                let x = bisect_newton(h, |x| fd_slope(h, x), 1e-9, cap, ratio, 1e-13)?;
                let sq = x / expiry; // √φ
                let cos_x = x.cos();
                let values: Vec<f64> = times
                    .iter()
                    .map(|&t| s0 * ((sq * (expiry - t)).cos() / cos_x).powi(2))
                    .collect();
                let derivs: Vec<f64> = times
                    .iter()
                    .map(|&t| s0 * sq * (2.0 * sq * (expiry - t)).sin() / (cos_x * cos_x))
                    .collect();
                let rate = 0.5 * s0 * sq / s2 * u_minus_sin(2.0 * x) / (cos_x * cos_x);
                let multiplier = 2.0 * x * x / (s2 * expiry);
                Ok(MlpPath {
                    times,
                    values,
                    derivs: Some(derivs),
                    multiplier,
                    rate,
                    method: MlpMethod::ClosedForm,
                })
            } else {
                // (tanh x + x sech²x)/(2x) = K/s0 on (0, ∞)
                let h = |x: f64| {
                    let ch = x.cosh();
                    (x.tanh() + x / (ch * ch)) / (2.0 * x)
                };
                let mut hi = 1.0;
                while h(hi) > ratio {
                    hi *= 2.0;
                    if hi > 1e6 {
                        return Err(Error::RootSolve(format!(
                            "could not bracket cosh-branch for strike ratio {ratio}"
                        )));
                    }
                }
                let x = bisect_newton(h, |x| fd_slope(h, x), 1e-9, hi, ratio, 1e-13)?;
                let sq = x / expiry; // √(−φ)
                let cosh_x = x.cosh();
                let values: Vec<f64> = times
                    .iter()
                    .map(|&t| s0 * ((sq * (expiry - t)).cosh() / cosh_x).powi(2))
                    .collect();
                let derivs: Vec<f64> = times
                    .iter()
                    .map(|&t| -s0 * sq * (2.0 * sq * (expiry - t)).sinh() / (cosh_x * cosh_x))
                    .collect();
                let rate = 0.5 * s0 * sq / s2 * sinh_minus_u(2.0 * x) / (cosh_x * cosh_x);
                let multiplier = -2.0 * x * x / (s2 * expiry);
                Ok(MlpPath {
                    times,
                    values,
                    derivs: Some(derivs),
                    multiplier,
                    rate,
                    method: MlpMethod::ClosedForm,
                })
            }
        }
        kind => Err(Error::Unsupported(format!(
            "no closed-form most-likely path for model kind {kind}"
        ))),
    }
}

fn require_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(
            "path solver needs a strictly positive volatility scale".into(),
        ))
    }
}

/// Centered slope used to accelerate the CIR transcendental solves.
fn fd_slope<F: Fn(f64) -> f64>(h: F, x: f64) -> f64 {
    let dx = 1e-7 * x.abs().max(1e-7);
    (h(x + dx) - h(x - dx)) / (2.0 * dx)
}

fn bachelier_parabola(times: &[f64], s0: f64, strike: f64, expiry: f64) -> (Vec<f64>, Vec<f64>) {
    let d = strike - s0;
    let values = times
        .iter()
        .map(|&t| {
            let tau = t / expiry;
            s0 + 3.0 * d * tau - 1.5 * d * tau * tau
        })
        .collect();
    let derivs = times
        .iter()
        .map(|&t| 3.0 * d * (1.0 - t / expiry) / expiry)
        .collect();
    (values, derivs)
}

/// Fixed-point solve of the Euler-Lagrange boundary value problem,
/// seeded with the Bachelier parabola.
pub fn mlp_fixed_point(
    model: &ModelSpec,
    strike: f64,
    expiry: f64,
    config: &FixedPointConfig,
) -> Result<(MlpPath, FixedPointReport)> {
    check_expiry(expiry)?;
    check_grid_n(config.grid_n, 32)?;
    let s0 = model.s0();
    let n = config.grid_n;
    let times = uniform_grid(expiry, n);
    let dt = expiry / n as f64;
    let tol = config.tol * (strike - s0).abs().max(1.0);

    let (mut values, _) = bachelier_parabola(&times, s0, strike, expiry);
    // positive diffusion along the seed is a precondition of the map
    for (&t, &s) in times.iter().zip(&values) {
        let a = model.local_vol(s, t)?;
        if a.is_nan() || a <= 0.0 {
            return Err(Error::Domain(format!(
                "diffusion {a} not positive along the seed path at (s={s}, t={t})"
            )));
        }
    }

    let mut sup_changes = Vec::with_capacity(config.max_iter);
    let mut converged = false;
    let mut vol = vec![0.0; n + 1];
    let mut growth = vec![0.0; n + 1];
    let mut deriv_weight = vec![0.0; n + 1];
    let mut mean_i = 0.0;

    for _ in 0..config.max_iter {
        for i in 0..=n {
            let (s, t) = (values[i], times[i]);
            let a = model.local_vol(s, t)?;
            if a.is_nan() || a <= 0.0 {
                return Err(Error::Domain(format!(
                    "diffusion {a} not positive along the iterate at (s={s}, t={t})"
                )));
            }
            let (_, a_t) = model.local_vol_partials(s, t)?;
            vol[i] = a;
            growth[i] = a_t / a;
        }
        // F(u) = ∫_0^u (a_t/a) dv, decay factor E = e^{−F}
        let big_f = cumulative_integral(&growth, dt);
        let decayed: Vec<f64> = vol
            .iter()
            .zip(&big_f)
            .map(|(a, f)| a * (-f).exp())
            .collect();
        let fwd = cumulative_integral(&decayed, dt);
        let total = fwd[n];
        // G(r) = e^{F(r)} ∫_r^T a·e^{−F} du, then I(t) = ∫_0^t a·G dr
        let integrand: Vec<f64> = (0..=n)
            .map(|i| {
                let g = (total - fwd[i]) * big_f[i].exp();
                deriv_weight[i] = vol[i] * g;
                deriv_weight[i]
            })
            .collect();
        let big_i = cumulative_integral(&integrand, dt);
        mean_i = simpson(&big_i, dt) / expiry;
        if !mean_i.is_finite() || mean_i <= 0.0 {
            return Err(Error::Domain(format!(
                "degenerate fixed-point normalizer Ī = {mean_i}"
            )));
        }

        let mut change = 0.0f64;
        for i in 0..=n {
            let next = s0 + big_i[i] / mean_i * (strike - s0);
            change = change.max((next - values[i]).abs());
            values[i] = next;
        }
        sup_changes.push(change);
        if change <= tol {
            converged = true;
            break;
        }
    }

    let report = FixedPointReport {
        iterations: sup_changes.len(),
        sup_changes,
        converged,
    };
    if !converged {
        return Err(Error::FixedPointDiverged { report });
    }

    // λ from the constraint; ṡ(r) = (λ/T)·a(s(r),r)·G(r) analytic
    let multiplier = expiry * (strike - s0) / mean_i;
    let derivs: Vec<f64> = deriv_weight
        .iter()
        .map(|w| multiplier / expiry * w)
        .collect();
    let energy: Vec<f64> = derivs
        .iter()
        .zip(&vol)
        .map(|(sd, a)| (sd / a) * (sd / a))
        .collect();
    let rate = 0.5 * simpson(&energy, dt);

    Ok((
        MlpPath {
            times,
            values,
            derivs: Some(derivs),
            multiplier,
            rate,
            method: MlpMethod::FixedPoint,
        },
        report,
    ))
}

/// Most-likely path by the best available route: closed form when the
/// model has one, the fixed-point scheme otherwise.
pub fn mlp_path(model: &ModelSpec, strike: f64, expiry: f64, grid_n: usize) -> Result<MlpPath> {
    if model.has_closed_form_mlp() {
        mlp_closed_form(model, strike, expiry, grid_n)
    } else {
        let config = FixedPointConfig {
            grid_n: grid_n.max(32),
            ..FixedPointConfig::default()
        };
        Ok(mlp_fixed_point(model, strike, expiry, &config)?.0)
    }
}

/// Energy 1/2 ∫ (ṡ/a)² dt of an arbitrary sampled path by composite
/// Simpson, with ṡ from the attached derivative or finite differences.
pub fn rate_functional(model: &ModelSpec, path: &MlpPath) -> Result<f64> {
    let n = path.times.len() - 1;
    check_grid_n(n, 4)?;
    let sd = path.s_dot();
    let mut energy = vec![0.0; n + 1];
    for i in 0..=n {
        let a = model.local_vol(path.values[i], path.times[i])?;
        if a == 0.0 {
            return Err(Error::Domain(format!(
                "diffusion vanishes along the path at t = {}",
                path.times[i]
            )));
        }
        energy[i] = (sd[i] / a) * (sd[i] / a);
    }
    Ok(0.5 * simpson(&energy, path.dt()))
}

/// Euler-Lagrange defect of a path carrying a multiplier.
pub fn el_residual(model: &ModelSpec, path: &MlpPath) -> Result<ElResidual> {
    let n = path.times.len() - 1;
    let dt = path.dt();
    let expiry = path.expiry();
    let sd = path.s_dot();
    let mut y = vec![0.0; n + 1];
    let mut vol = vec![0.0; n + 1];
    let mut decay = vec![0.0; n + 1];
    for i in 0..=n {
        let a = model.local_vol(path.values[i], path.times[i])?;
        let (_, a_t) = model.local_vol_partials(path.values[i], path.times[i])?;
        vol[i] = a;
        y[i] = sd[i] / a;
        decay[i] = a_t / (a * a);
    }
    let dy = derivative_samples(&y, dt);
    let mut interior = 0.0f64;
    for i in 1..n {
        let r = dy[i] - decay[i] * sd[i] + path.multiplier / expiry * vol[i];
        interior = interior.max(r.abs());
    }
    Ok(ElResidual {
        interior,
        boundary: sd[n].abs(),
    })
}

/// Large-deviation rate of the out-of-the-money call price: zero when the
/// constant path is feasible (K ≤ s0), the optimal path energy otherwise.
///
/// For time-dependent models the energy is evaluated with a(s(t), t)
/// along the path, matching the pricing pipeline; the short-expiry
/// rescaling argument would freeze the diffusion clock at t = 0 instead,
/// a discrepancy of order T that the leading order does not resolve.
pub fn asian_call_rate(model: &ModelSpec, strike: f64, expiry: f64, grid_n: usize) -> Result<f64> {
    if strike <= model.s0() {
        return Ok(0.0);
    }
    Ok(mlp_path(model, strike, expiry, grid_n)?.rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelKind, ModelSpec, TimeWeight};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn bachelier(sigma: f64, s0: f64) -> ModelSpec {
        ModelSpec::new(ModelKind::Bachelier { sigma }, s0).unwrap()
    }

    fn bs(sigma: f64, s0: f64) -> ModelSpec {
        ModelSpec::new(ModelKind::BlackScholes { sigma }, s0).unwrap()
    }

    fn cir(sigma: f64, s0: f64) -> ModelSpec {
        ModelSpec::new(ModelKind::Cir { sigma }, s0).unwrap()
    }

    fn td_bachelier(sigma: f64, lambda: f64, s0: f64) -> ModelSpec {
        ModelSpec::new(
            ModelKind::TimeDepBachelier {
                sigma,
                weight: TimeWeight::Exponential { lambda },
            },
            s0,
        )
        .unwrap()
    }

    fn td_cir(sigma: f64, lambda: f64, s0: f64) -> ModelSpec {
        ModelSpec::new(
            ModelKind::TimeDepCir {
                sigma,
                weight: TimeWeight::Exponential { lambda },
            },
            s0,
        )
        .unwrap()
    }

    /// Brute-force bisection, independent of the production root solve.
    fn bisect_oracle<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, target: f64) -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if (f(m) - target) * (f(lo) - target) <= 0.0 {
                hi = m;
            } else {
                lo = m;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn bachelier_path_midpoint() {
        let m = bachelier(0.2, 1.0);
        let p = mlp_closed_form(&m, 1.2, 1.0, 400).unwrap();
        // s(T/2) = s0 + (9/8)(K − s0)
        assert_abs_diff_eq!(p.values()[200], 1.225, epsilon = 1e-14);
        assert_eq!(p.values()[0], 1.0);
    }

    #[test]
    fn bachelier_rate_closed_form() {
        let m = bachelier(0.2, 1.0);
        let p = mlp_closed_form(&m, 1.2, 1.0, 400).unwrap();
        // 3(K−s0)²/(2σ²T)
        assert_abs_diff_eq!(p.rate(), 1.5, epsilon = 1e-13);
        assert_abs_diff_eq!(rate_functional(&m, &p).unwrap(), 1.5, epsilon = 1e-10);
    }

    #[test]
    fn atm_path_degenerates_to_constant() {
        let m = bs(0.5, 2.0);
        let p = mlp_closed_form(&m, 2.0, 1.0, 200).unwrap();
        assert!(p.values().iter().all(|&v| v == 2.0));
        assert_eq!(p.rate(), 0.0);
    }

    #[test]
    fn invert_f_matches_bisection_oracle() {
        for ratio in [0.05, 0.3, 0.8509, 0.99, 0.999999] {
            let x = invert_f(ratio).unwrap();
            let oracle = bisect_oracle(profile_f, 1e-12, 60.0, ratio);
            // x-accuracy degrades where f flattens; the contract is on f(x)
            assert_abs_diff_eq!(x, oracle, epsilon = 1e-7);
            assert_abs_diff_eq!(profile_f(x), ratio, epsilon = 1e-12);
        }
        // f(1) = 1/sinh(1) ≈ 0.8509
        assert_abs_diff_eq!(invert_f(0.8509).unwrap(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn invert_f_near_one_goes_to_zero() {
        let x = invert_f(1.0 - 1e-10).unwrap();
        assert!(x > 0.0 && x < 1e-4, "x = {x}");
    }

    #[test]
    fn invert_g_matches_bisection_oracle() {
        for ratio in [0.05, 0.5, 0.9, 0.999999] {
            let x = invert_g(ratio).unwrap();
            let oracle = bisect_oracle(profile_g, 1e-12, std::f64::consts::PI - 1e-12, ratio);
            assert_abs_diff_eq!(x, oracle, epsilon = 1e-7);
            assert_abs_diff_eq!(profile_g(x), ratio, epsilon = 1e-12);
        }
        let x = invert_g(1.0 - 1e-10).unwrap();
        assert!(x > 0.0 && x < 1e-4);
    }

    #[test]
    fn invert_rejects_out_of_range_ratios() {
        for bad in [0.0, 1.0, -0.2, 1.3] {
            assert!(invert_f(bad).is_err());
            assert!(invert_g(bad).is_err());
        }
    }

    #[test]
    fn fixed_point_reproduces_bachelier_in_one_step() {
        let m = bachelier(0.3, 1.0);
        let (p, report) = mlp_fixed_point(&m, 1.25, 1.0, &FixedPointConfig::default()).unwrap();
        // constant diffusion makes the map path-independent: the first
        // iterate is already the parabola
        assert!(report.iterations <= 2, "iterations = {}", report.iterations);
        let oracle = mlp_closed_form(&m, 1.25, 1.0, 400).unwrap();
        for (a, b) in p.values().iter().zip(oracle.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_relative_eq!(p.multiplier(), oracle.multiplier(), max_relative = 1e-10);
    }

    #[test]
    fn fixed_point_matches_bs_closed_form() {
        let m = bs(0.5, 2.0);
        let (p, report) = mlp_fixed_point(&m, 2.2, 1.0, &FixedPointConfig::default()).unwrap();
        assert!(report.converged);
        let oracle = mlp_closed_form(&m, 2.2, 1.0, 400).unwrap();
        let gap = p
            .values()
            .iter()
            .zip(oracle.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(gap <= 1e-6, "sup gap {gap}");
    }

    #[test]
    fn fixed_point_converges_quickly_on_td_cir() {
        let m = td_cir(0.2, 1.0, 1.0);
        let (_, report) = mlp_fixed_point(&m, 1.1, 1.0, &FixedPointConfig::default()).unwrap();
        assert!(report.converged);
        assert!(report.iterations <= 10, "iterations = {}", report.iterations);
    }

    #[test]
    fn fixed_point_contraction_is_monotone() {
        for m in [bs(0.5, 2.0), cir(0.5, 2.0), td_cir(0.2, 1.0, 1.0)] {
            let (_, report) = mlp_fixed_point(&m, 1.2 * m.s0(), 1.0, &FixedPointConfig::default()).unwrap();
            for w in report.sup_changes[1..].windows(2) {
                assert!(
                    w[1] <= w[0] * (1.0 + 1e-9),
                    "sup changes not decreasing: {:?}",
                    report.sup_changes
                );
            }
        }
    }

    #[test]
    fn constraint_holds_on_all_produced_paths() {
        let cases: Vec<(ModelSpec, f64)> = vec![
            (bachelier(0.2, 1.0), 1.2),
            (bs(0.5, 2.0), 2.2),
            (bs(0.5, 2.0), 1.8),
            (cir(0.5, 2.0), 2.2),
            (cir(0.5, 2.0), 1.8),
            (td_bachelier(0.2, 1.0, 1.0), 1.2),
            (td_cir(0.2, 1.0, 1.0), 1.1),
        ];
        for (m, k) in cases {
            let p = mlp_path(&m, k, 1.0, 400).unwrap();
            assert!(
                (p.mean() - k).abs() <= 1e-8 * k.max(1.0),
                "{} strike {k}: mean gap {}",
                m.kind(),
                (p.mean() - k).abs()
            );
        }
    }

    #[test]
    fn rate_functional_zero_on_constant_path() {
        let m = bs(0.5, 2.0);
        let times: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let p = MlpPath::from_samples(times, vec![2.0; 101], 0.0).unwrap();
        assert_eq!(rate_functional(&m, &p).unwrap(), 0.0);
    }

    #[test]
    fn bs_rate_matches_printed_expression() {
        let (s0, k, sigma, t) = (2.0, 2.2, 0.5, 1.0);
        let m = bs(sigma, s0);
        let p = mlp_closed_form(&m, k, t, 400).unwrap();
        let x = invert_f(s0 / k).unwrap();
        let expected = x / (sigma * sigma * t) * (0.5 * x - (0.5 * x).tanh());
        assert_abs_diff_eq!(p.rate(), expected, epsilon = 1e-8);
        // quadrature of the sampled path agrees with the analytic value
        assert_abs_diff_eq!(rate_functional(&m, &p).unwrap(), expected, epsilon = 1e-10);
    }

    #[test]
    fn monotone_rate_in_strike() {
        let m = cir(0.4, 1.0);
        let mut last = 0.0;
        for i in 1..=8 {
            let k = 1.0 + 0.05 * i as f64;
            let rate = asian_call_rate(&m, k, 1.0, 400).unwrap();
            assert!(rate > last, "rate not increasing at K = {k}");
            last = rate;
        }
    }

    #[test]
    fn rate_zero_at_or_below_initial_price() {
        let m = bs(0.5, 2.0);
        assert_eq!(asian_call_rate(&m, 2.0, 1.0, 400).unwrap(), 0.0);
        assert_eq!(asian_call_rate(&m, 1.5, 1.0, 400).unwrap(), 0.0);
    }

    #[test]
    fn el_residual_small_on_closed_forms() {
        let m = bachelier(0.2, 1.0);
        let p = mlp_closed_form(&m, 1.2, 1.0, 400).unwrap();
        let r = el_residual(&m, &p).unwrap();
        assert!(r.interior <= 1e-6, "bachelier interior {}", r.interior);
        assert!(r.boundary <= 1e-12);

        let m = bs(0.5, 2.0);
        let p = mlp_closed_form(&m, 2.2, 1.0, 400).unwrap();
        let r = el_residual(&m, &p).unwrap();
        assert!(r.interior <= 1e-5, "bs interior {}", r.interior);
        assert!(r.boundary <= 1e-12);
    }

    #[test]
    fn el_residual_detects_wrong_path() {
        // right shape, wrong multiplier and amplitude
        let m = bachelier(0.2, 1.0);
        let times: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|&t| 1.0 + 0.8 * t - 0.3 * t * t)
            .collect();
        let p = MlpPath::from_samples(times, values, 1.0).unwrap();
        let r = el_residual(&m, &p).unwrap();
        assert!(r.max() > 0.01, "residual {}", r.max());
    }

    #[test]
    fn csv_round_trip_columns() {
        let m = bachelier(0.2, 1.0);
        let p = mlp_closed_form(&m, 1.2, 1.0, 8).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,s,s_dot");
        assert_eq!(lines.count(), 9);
    }

    #[test]
    fn unsupported_kind_reports_error() {
        let m = ModelSpec::new(
            ModelKind::QuadraticTimeDep {
                sigma: 0.2,
                psi: -0.5,
                gamma: 0.1,
                lambda: 1.0,
            },
            1.0,
        )
        .unwrap();
        assert!(matches!(
            mlp_closed_form(&m, 1.2, 1.0, 400),
            Err(Error::Unsupported(_))
        ));
        // the dispatcher falls back to the fixed point
        assert!(mlp_path(&m, 1.2, 1.0, 400).is_ok());
    }

    #[test]
    fn cir_strike_beyond_cos_branch_reports_bracket() {
        // the cos-branch mean ratio tops out near 5e11 at the π/2 − 1e-6
        // cap; strikes beyond it must fail with a bracket report instead
        // of silently jumping branches
        let m = cir(0.2, 1.0);
        let err = mlp_closed_form(&m, 1e13, 1.0, 400).unwrap_err();
        match err {
            Error::RootSolve(msg) => assert!(msg.contains("bracket"), "{msg}"),
            other => panic!("expected bracket error, got {other}"),
        }
    }

    #[test]
    fn td_bachelier_closed_form_matches_fixed_point() {
        let m = td_bachelier(0.3, 0.5, 1.0);
        let p = mlp_closed_form(&m, 1.2, 1.0, 400).unwrap();
        let (q, _) = mlp_fixed_point(&m, 1.2, 1.0, &FixedPointConfig::default()).unwrap();
        let gap = p
            .values()
            .iter()
            .zip(q.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(gap <= 1e-8, "sup gap {gap}");
        assert_abs_diff_eq!(p.rate(), q.rate(), epsilon = 1e-10);
        assert_relative_eq!(p.multiplier(), q.multiplier(), max_relative = 1e-8);
    }

    #[test]
    fn td_bachelier_table_weight_solves() {
        let m = ModelSpec::new(
            ModelKind::TimeDepBachelier {
                sigma: 0.3,
                weight: TimeWeight::Table {
                    knots: vec![(0.0, 1.0), (0.5, 0.8), (1.0, 0.5)],
                },
            },
            1.0,
        )
        .unwrap();
        let p = mlp_closed_form(&m, 1.2, 1.0, 400).unwrap();
        assert!((p.mean() - 1.2).abs() <= 1e-8);
        let r = el_residual(&m, &p).unwrap();
        // kinks in θ limit the smoothness of the residual check
        assert!(r.boundary <= 1e-10);
    }
}
