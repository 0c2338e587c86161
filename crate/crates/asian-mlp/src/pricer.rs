//! Price and Greek approximations driven by the most-likely path.
//!
//! The leading implied normal volatility of a continuously monitored
//! Asian call is
//!
//! ```text
//! σ_b,0 = ( T/(3(K−s0)²) · ∫_0^T (ṡ̃/a)² dt )^{−1/2}
//! ```
//!
//! with s̃ the most-likely path. At the money the expression degenerates
//! and the model-specific limits take over (σ·s0 for Black-Scholes,
//! σ·√s0 for CIR, σ for Bachelier, the exact time-weighted value for the
//! time-dependent Bachelier model, a two-sided strike ladder otherwise).
//!
//! A benchmark price then comes from reinserting σ_b,0 into a drifted
//! Bachelier model: with μ = r − q,
//!
//! ```text
//! price = e^{−rT}[ √(v/2π)·e^{−(A−K)²/(2v)} + (A−K)·N((A−K)/√v) ],
//! A = s0(e^{μT}−1)/(μT),
//! v = σ_b,0²/(μ²T²)·((3−4e^{μT}+e^{2μT})/(2μ) + T),
//! ```
//!
//! series-expanded through O((μT)²) near μ = 0 where the closed forms
//! cancel catastrophically.

use serde::{Deserialize, Serialize};

use crate::bachelier::{norm_cdf, norm_pdf};
use crate::continuous::{mlp_path, DEFAULT_GRID_N};
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec};

/// Relative half-width of the at-the-money switch.
const ATM_EPS_REL: f64 = 1e-6;

/// |μT| below which the drift factors switch to their series forms.
const DRIFT_SERIES_CUTOFF: f64 = 1e-5;

/// Relative bump used for the numerical rate-integral derivatives.
const GREEK_BUMP_REL: f64 = 1e-4;

/// Price of the drift-adjusted Bachelier benchmark with its inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriceReport {
    pub model: Option<String>,
    pub s0: f64,
    pub strike: f64,
    pub expiry: f64,
    pub rate: f64,
    pub dividend: f64,
    pub sigma_b0: f64,
    /// Drift-adjusted forward average A.
    pub forward: f64,
    /// Effective variance v of the average.
    pub variance: f64,
    pub price: f64,
}

/// First- and second-order sensitivities of the approximate price.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreeksReport {
    pub delta: f64,
    pub gamma: f64,
    /// v_{b,0} = σ_b,0²·T.
    pub v_b0: f64,
    /// ∂v_{b,0}/∂s at s = s0.
    pub dv_ds: f64,
    pub sigma_b0: f64,
    /// Bump used for the rate-integral derivatives.
    pub bump: f64,
    pub method: &'static str,
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

/// Rate integral ∫ (ṡ̃/a)² dt = 2·J along the most-likely path.
fn rate_integral(model: &ModelSpec, strike: f64, expiry: f64) -> Result<f64> {
    Ok(2.0 * mlp_path(model, strike, expiry, DEFAULT_GRID_N)?.rate())
}

fn sigma_b0_from_rate(model: &ModelSpec, strike: f64, expiry: f64) -> Result<f64> {
    let integral = rate_integral(model, strike, expiry)?;
    if integral.is_nan() || integral <= 0.0 {
        return Err(Error::Domain(format!(
            "degenerate rate integral {integral} at strike {strike}"
        )));
    }
    let d = strike - model.s0();
    Ok((3.0 * d * d / (expiry * integral)).sqrt())
}

/// Leading implied normal volatility of the continuously monitored call.
pub fn sigma_b0_continuous(model: &ModelSpec, strike: f64, expiry: f64) -> Result<f64> {
    check_expiry(expiry)?;
    let s0 = model.s0();
    let atm_eps = ATM_EPS_REL * s0;
    if (strike - s0).abs() >= atm_eps {
        return sigma_b0_from_rate(model, strike, expiry);
    }
    match model.kind() {
        ModelKind::Bachelier { sigma } => Ok(*sigma),
        ModelKind::BlackScholes { sigma } => Ok(sigma * s0),
        ModelKind::Cir { sigma } => Ok(sigma * s0.sqrt()),
        _ => {
            // two-sided strike ladder straddling the switch; exact for the
            // time-dependent Bachelier model whose σ_b,0 is strike-free
            let up = sigma_b0_from_rate(model, s0 * (1.0 + 2.0 * ATM_EPS_REL), expiry)?;
            let down = sigma_b0_from_rate(model, s0 * (1.0 - 2.0 * ATM_EPS_REL), expiry)?;
            Ok(0.5 * (up + down))
        }
    }
}

/// Drift-adjusted forward average A = s0(e^{μT}−1)/(μT).
pub fn drift_adjusted_forward(s0: f64, mu: f64, expiry: f64) -> f64 {
    let x = mu * expiry;
    if x.abs() < DRIFT_SERIES_CUTOFF {
        s0 * (1.0 + x * (0.5 + x / 6.0))
    } else {
        s0 * x.exp_m1() / x
    }
}

/// Variance multiplier v/σ_b,0² of the drifted average.
pub fn drift_variance_factor(mu: f64, expiry: f64) -> f64 {
    let x = mu * expiry;
    if x.abs() < DRIFT_SERIES_CUTOFF {
        expiry * (1.0 / 3.0 + x * (0.25 + x * 7.0 / 60.0))
    } else {
        let e = x.exp();
        ((3.0 - 4.0 * e + e * e) / (2.0 * mu) + expiry) / (mu * mu * expiry * expiry)
    }
}

/// Benchmark price of the Asian call from a leading implied vol.
pub fn price_with_drift(
    s0: f64,
    strike: f64,
    expiry: f64,
    rate: f64,
    dividend: f64,
    sigma_b0: f64,
) -> Result<PriceReport> {
    check_expiry(expiry)?;
    if !sigma_b0.is_finite() || sigma_b0 <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "sigma_b0",
            value: sigma_b0,
            reason: "must be positive and finite",
        });
    }
    let mu = rate - dividend;
    let forward = drift_adjusted_forward(s0, mu, expiry);
    let variance = sigma_b0 * sigma_b0 * drift_variance_factor(mu, expiry);
    if variance.is_nan() || variance <= 0.0 {
        return Err(Error::Domain(format!(
            "effective variance {variance} not positive at μ = {mu}"
        )));
    }
    let d = forward - strike;
    let undiscounted = (variance / (2.0 * std::f64::consts::PI)).sqrt()
        * (-d * d / (2.0 * variance)).exp()
        + d * norm_cdf(d / variance.sqrt());
    let price = (-rate * expiry).exp() * undiscounted;
    debug_assert!(price >= d.max(0.0) * (-rate * expiry).exp() - 1e-12);
    Ok(PriceReport {
        model: None,
        s0,
        strike,
        expiry,
        rate,
        dividend,
        sigma_b0,
        forward,
        variance,
        price,
    })
}

/// σ_b,0 and the drift-adjusted price in one call.
pub fn price_asian(
    model: &ModelSpec,
    strike: f64,
    expiry: f64,
    rate: f64,
    dividend: f64,
) -> Result<PriceReport> {
    let sigma_b0 = sigma_b0_continuous(model, strike, expiry)?;
    let mut report = price_with_drift(model.s0(), strike, expiry, rate, dividend, sigma_b0)?;
    report.model = Some(model.kind().name().to_string());
    Ok(report)
}

/// Delta and gamma of the undrifted approximate price via the chain rule
/// through v_{b,0}(s), with the rate-integral s-derivatives taken by
/// central differences of the most-likely-path energy.
pub fn greeks_approx(model: &ModelSpec, strike: f64, expiry: f64) -> Result<GreeksReport> {
    check_expiry(expiry)?;
    let s = model.s0();
    if (strike - s).abs() < ATM_EPS_REL * s {
        return Err(Error::Domain(
            "greek formulas hold away from the money (K ≠ s0)".into(),
        ));
    }
    let h = GREEK_BUMP_REL * s;
    let r_mid = rate_integral(model, strike, expiry)?;
    let r_up = rate_integral(&model.with_s0(s + h)?, strike, expiry)?;
    let r_dn = rate_integral(&model.with_s0(s - h)?, strike, expiry)?;

    let ks = strike - s;
    let v = 3.0 * ks * ks / r_mid;
    let dr = (r_up - r_dn) / (2.0 * h);
    let dv_ds = 2.0 * v / (s - strike) - v * v / (3.0 * ks * ks) * dr;
    // second difference of v(s) = 3(K−s)²/R(s) for the gamma term
    let v_up = 3.0 * (strike - s - h).powi(2) / r_up;
    let v_dn = 3.0 * (strike - s + h).powi(2) / r_dn;
    let d2v = (v_up - 2.0 * v + v_dn) / (h * h);

    let d = 3f64.sqrt() * (s - strike) / v.sqrt();
    let c_v = (-0.5 * d * d).exp() / (2.0 * (6.0 * std::f64::consts::PI * v).sqrt());
    let c_ss = 3f64.sqrt() * norm_pdf(d) / v.sqrt();
    let c_sv = -norm_pdf(d) * d / (2.0 * v);
    let c_vv = c_v * (d * d - 1.0) / (2.0 * v);

    let delta = norm_cdf(d) + c_v * dv_ds;
    let gamma = c_ss + 2.0 * c_sv * dv_ds + c_vv * dv_ds * dv_ds + c_v * d2v;
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Domain(format!(
            "delta {delta} escaped [0,1]; v_b0 = {v}, dv/ds = {dv_ds}"
        )));
    }
    Ok(GreeksReport {
        delta,
        gamma,
        v_b0: v,
        dv_ds,
        sigma_b0: (v / expiry).sqrt(),
        bump: h,
        method: "bachelier-chain-rule+fd-rate",
    })
}

/// Delta of the approximate price; see [`greeks_approx`].
pub fn delta_approx(model: &ModelSpec, strike: f64, expiry: f64) -> Result<GreeksReport> {
    greeks_approx(model, strike, expiry)
}

/// Gamma of the approximate price; see [`greeks_approx`].
pub fn gamma_approx(model: &ModelSpec, strike: f64, expiry: f64) -> Result<GreeksReport> {
    greeks_approx(model, strike, expiry)
}
