//! Closed-form Bachelier (normal) Asian pricing and implied-vol inversion.
//!
//! Under `dS = σ_b dW` the running average is Gaussian, so both the
//! continuously and the discretely monitored Asian call have closed forms:
//!
//! ```text
//! C   = σ_b√T/√(6π) · e^{−3(s0−K)²/(2σ_b²T)} + (s0−K)·N(√3(s0−K)/(σ_b√T))
//! C^d = σ_b√T/√(2A_nπ) · e^{−A_n(s0−K)²/(2σ_b²T)} + (s0−K)·N(√A_n(s0−K)/(σ_b√T))
//! ```
//!
//! with `A_n = 6n²/((n+1)(2n+1)) → 3`. These are the ruler every model
//! price is quoted against: the implied normal volatility of a price is
//! the σ_b solving the matching equation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Monitoring style of the average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monitoring {
    Continuous,
    /// Arithmetic average of n equally spaced fixings.
    Discrete(u32),
}

/// Standard normal CDF via the complementary error function;
/// relative accuracy near machine precision even deep in the tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Variance factor A_n of discrete monitoring; A_1 = 1 and A_n → 3.
pub fn discrete_variance_factor(n: u32) -> f64 {
    let n = n as f64;
    6.0 * n * n / ((n + 1.0) * (2.0 * n + 1.0))
}

/// A_n for discrete monitoring, 3 for continuous.
pub fn variance_factor(monitoring: Monitoring) -> f64 {
    match monitoring {
        Monitoring::Continuous => 3.0,
        Monitoring::Discrete(n) => discrete_variance_factor(n),
    }
}

/// An implied-normal-vol quote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolQuote {
    pub sigma_b: f64,
    pub monitoring: Monitoring,
    pub strike: f64,
    pub expiry: f64,
}

impl VolQuote {
    pub fn new(sigma_b: f64, monitoring: Monitoring, strike: f64, expiry: f64) -> Result<Self> {
        if !sigma_b.is_finite() || sigma_b <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma_b",
                value: sigma_b,
                reason: "implied normal vol must be positive and finite",
            });
        }
        Ok(Self {
            sigma_b,
            monitoring,
            strike,
            expiry,
        })
    }
}

fn check_price_inputs(expiry: f64, sigma_b: f64) -> Result<()> {
    if !expiry.is_finite() || expiry <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "expiry",
            value: expiry,
            reason: "must be positive and finite",
        });
    }
    if !sigma_b.is_finite() || sigma_b <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "sigma_b",
            value: sigma_b,
            reason: "must be positive and finite",
        });
    }
    Ok(())
}

fn call_with_factor(s0: f64, strike: f64, expiry: f64, sigma_b: f64, a: f64) -> f64 {
    let d = s0 - strike;
    let scale = sigma_b * expiry.sqrt();
    scale / (2.0 * a * std::f64::consts::PI).sqrt() * (-a * d * d / (2.0 * scale * scale)).exp()
        + d * norm_cdf(a.sqrt() * d / scale)
}

/// Continuously monitored Asian call in the Bachelier model.
pub fn asian_call_continuous(s0: f64, strike: f64, expiry: f64, sigma_b: f64) -> Result<f64> {
    check_price_inputs(expiry, sigma_b)?;
    Ok(call_with_factor(s0, strike, expiry, sigma_b, 3.0))
}

/// Discretely monitored Asian call (n fixings) in the Bachelier model.
pub fn asian_call_discrete(
    s0: f64,
    strike: f64,
    expiry: f64,
    sigma_b: f64,
    n: u32,
) -> Result<f64> {
    check_price_inputs(expiry, sigma_b)?;
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "need at least one fixing",
        });
    }
    Ok(call_with_factor(
        s0,
        strike,
        expiry,
        sigma_b,
        discrete_variance_factor(n),
    ))
}

/// Bachelier Asian call for either monitoring style.
pub fn asian_call(
    s0: f64,
    strike: f64,
    expiry: f64,
    sigma_b: f64,
    monitoring: Monitoring,
) -> Result<f64> {
    match monitoring {
        Monitoring::Continuous => asian_call_continuous(s0, strike, expiry, sigma_b),
        Monitoring::Discrete(n) => asian_call_discrete(s0, strike, expiry, sigma_b, n),
    }
}

/// Invert a price into the implied normal volatility by bisection.
///
/// The price must sit strictly above intrinsic. Pure bisection is kept
/// deliberately: vega collapses deep out-of-the-money, where a Newton
/// step can escape the bracket.
pub fn implied_normal_vol(
    price: f64,
    s0: f64,
    strike: f64,
    expiry: f64,
    monitoring: Monitoring,
) -> Result<f64> {
    if !expiry.is_finite() || expiry <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "expiry",
            value: expiry,
            reason: "must be positive and finite",
        });
    }
    let intrinsic = (s0 - strike).max(0.0);
    if !price.is_finite() || price <= intrinsic {
        return Err(Error::PriceOutOfBand { price, intrinsic });
    }
    let value = |sigma: f64| asian_call(s0, strike, expiry, sigma, monitoring).unwrap();
    let mut lo = 1e-10;
    let mut hi = 1.0f64.max(lo * 4.0);
    let mut doublings = 0;
    while value(hi) < price {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::RootSolve(format!(
                "could not bracket implied vol for price {price}"
            )));
        }
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if value(mid) < price {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Leading small-time price of an out-of-the-money call,
/// `exp(−A(s−K)²/(2σ_b²τ)) · σ_b³τ^{3/2} / (A√(2Aπ)(K−s)²)`; a diagnostic
/// for the decay rate, invalid at the money.
pub fn small_time_leading(
    s: f64,
    strike: f64,
    tau: f64,
    sigma_b: f64,
    monitoring: Monitoring,
) -> Result<f64> {
    check_price_inputs(tau, sigma_b)?;
    if s == strike {
        return Err(Error::Domain(
            "small-time expansion is invalid at the money".into(),
        ));
    }
    let a = variance_factor(monitoring);
    let d2 = (s - strike) * (s - strike);
    Ok((-a * d2 / (2.0 * sigma_b * sigma_b * tau)).exp() * sigma_b.powi(3) * tau.powf(1.5)
        / (a * (2.0 * a * std::f64::consts::PI).sqrt() * d2))
}

/// Small-time implied-normal-vol estimate from a call price:
/// `σ_N² T = (s0 − K)² / (2(ln s0 − ln C))`. Cross-check diagnostic only.
pub fn grunspan_vol_from_price(price: f64, s0: f64, strike: f64, expiry: f64) -> Result<f64> {
    if strike == s0 {
        return Err(Error::Domain(
            "vol expansion needs a fixed out-of-the-money strike".into(),
        ));
    }
    if price.is_nan() || price <= 0.0 || price >= s0 {
        return Err(Error::Domain(format!(
            "price {price} outside (0, s0 = {s0}); log ratio undefined"
        )));
    }
    let denom = 2.0 * (s0.ln() - price.ln());
    Ok(((s0 - strike) * (s0 - strike) / (denom * expiry)).sqrt())
}
