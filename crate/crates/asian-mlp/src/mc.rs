//! Euler-Maruyama Monte Carlo pricer, the independent validation oracle.
//!
//! Paths follow `S_{k+1} = S_k + μ S_k Δ + a(S_k, t_k)·√Δ·Z_k` with full
//! truncation for the square-root kinds (the diffusion is evaluated at
//! `max(S,0)`). Discrete monitoring averages the exact fixing dates;
//! continuous monitoring uses the trapezoid average of the Euler grid,
//! whose second-order bias is dominated by the statistical error at the
//! path counts used here.
//!
//! Every path draws from its own ChaCha stream keyed by (seed, path
//! index), so results are bit-identical no matter how work is chunked
//! across threads.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bachelier::{implied_normal_vol, Monitoring};
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec};

/// Paths per work unit; fixed so the merge order never depends on the
/// thread count.
const CHUNK: u64 = 4096;

/// Simulation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfig {
    pub steps_per_year: u32,
    pub n_paths: u64,
    pub seed: u64,
    pub antithetic: bool,
    /// Drift μ = r − q of dS = μS dt + a dW; estimates are discounted at μ.
    pub drift: f64,
}

impl McConfig {
    /// Scale used for the published figures: 1000 steps/year, 2M paths.
    pub fn paper() -> Self {
        Self {
            steps_per_year: 1000,
            n_paths: 2_000_000,
            seed: 0,
            antithetic: false,
            drift: 0.0,
        }
    }

    /// Fast validation scale: 200 steps/year, 100k paths.
    pub fn desk() -> Self {
        Self {
            steps_per_year: 200,
            n_paths: 100_000,
            seed: 0,
            antithetic: false,
            drift: 0.0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.steps_per_year == 0 {
            return Err(Error::InvalidParameter {
                name: "steps_per_year",
                value: 0.0,
                reason: "need at least one step per year",
            });
        }
        if self.n_paths < 2 {
            return Err(Error::InvalidParameter {
                name: "n_paths",
                value: self.n_paths as f64,
                reason: "need at least two paths",
            });
        }
        if !self.drift.is_finite() {
            return Err(Error::InvalidParameter {
                name: "drift",
                value: self.drift,
                reason: "must be finite",
            });
        }
        Ok(())
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// Price estimate with its statistical error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McEstimate {
    pub price: f64,
    pub std_err: f64,
    /// Independent samples behind the estimate (pairs count once under
    /// antithetic sampling).
    pub n_samples: u64,
    pub n_steps: u32,
    pub elapsed: Duration,
}

/// One strike of a Monte Carlo smile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmileRow {
    pub strike: f64,
    pub price: f64,
    pub std_err: f64,
    /// Implied normal vol of the estimate.
    pub vol: f64,
    /// Vol band from price ± 1.96 standard errors.
    pub vol_lo: f64,
    pub vol_hi: f64,
}

/// Smile rows plus the strikes whose inversion failed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmileTable {
    pub rows: Vec<SmileRow>,
    pub failures: Vec<(f64, String)>,
}

fn step_layout(expiry: f64, monitoring: Monitoring, cfg: &McConfig) -> Result<(u32, u32)> {
    if !expiry.is_finite() || expiry <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "expiry",
            value: expiry,
            reason: "must be positive and finite",
        });
    }
    let target = (cfg.steps_per_year as f64 * expiry).round().max(1.0) as u32;
    match monitoring {
        Monitoring::Continuous => Ok((target, 0)),
        Monitoring::Discrete(n) => {
            if n == 0 {
                return Err(Error::InvalidParameter {
                    name: "n",
                    value: 0.0,
                    reason: "need at least one fixing",
                });
            }
            let per = (target as f64 / n as f64).round().max(1.0) as u32;
            Ok((per * n, per))
        }
    }
}

fn truncates(model: &ModelSpec) -> bool {
    matches!(
        model.kind(),
        ModelKind::Cir { .. } | ModelKind::TimeDepCir { .. }
    )
}

/// Running average of one Euler path; NaN marks an exploded path.
#[allow(clippy::too_many_arguments)]
fn path_average(
    model: &ModelSpec,
    expiry: f64,
    steps: u32,
    fixing_every: u32,
    drift: f64,
    truncate: bool,
    rng: &mut ChaCha8Rng,
    flip: bool,
) -> f64 {
    let dt = expiry / steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut s = model.s0();
    let mut acc = if fixing_every == 0 { 0.5 * s } else { 0.0 };
    let mut fixings = 0u32;
    for k in 0..steps {
        let t = k as f64 * dt;
        let z: f64 = StandardNormal.sample(rng);
        let z = if flip { -z } else { z };
        let s_eval = if truncate { s.max(0.0) } else { s };
        // domain is guaranteed by the truncation, so unwrap is safe here
        let a = model.local_vol(s_eval, t).unwrap_or(f64::NAN);
        s += drift * s * dt + a * sqrt_dt * z;
        if !s.is_finite() {
            return f64::NAN;
        }
        if fixing_every == 0 {
            acc += if k + 1 == steps { 0.5 * s } else { s };
        } else if (k + 1) % fixing_every == 0 {
            acc += s;
            fixings += 1;
        }
    }
    if fixing_every == 0 {
        acc / steps as f64
    } else {
        acc / fixings as f64
    }
}

/// Per-path averages in path-index order. Chunks run in parallel but the
/// output layout depends only on (seed, config).
fn simulate_averages(
    model: &ModelSpec,
    expiry: f64,
    monitoring: Monitoring,
    cfg: &McConfig,
) -> Result<(Vec<f64>, u32)> {
    cfg.check()?;
    let (steps, fixing_every) = step_layout(expiry, monitoring, cfg)?;
    let n_paths = if cfg.antithetic {
        cfg.n_paths + cfg.n_paths % 2
    } else {
        cfg.n_paths
    };
    let truncate = truncates(model);
    let n_chunks = n_paths.div_ceil(CHUNK);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(n_paths);
            let mut out = Vec::with_capacity((hi - lo) as usize);
            for p in lo..hi {
                let (stream, flip) = if cfg.antithetic {
                    (p / 2, p % 2 == 1)
                } else {
                    (p, false)
                };
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(stream);
                out.push(path_average(
                    model,
                    expiry,
                    steps,
                    fixing_every,
                    cfg.drift,
                    truncate,
                    &mut rng,
                    flip,
                ));
            }
            out
        })
        .collect();
    let averages: Vec<f64> = chunks.into_iter().flatten().collect();
    let bad = averages.iter().filter(|a| !a.is_finite()).count() as u64;
    if bad > 0 {
        return Err(Error::PathExplosion {
            count: bad,
            total: n_paths,
        });
    }
    Ok((averages, steps))
}

fn payoff_stats(averages: &[f64], strike: f64, antithetic: bool) -> (f64, f64, u64) {
    let payoff = |avg: f64| (avg - strike).max(0.0);
    // two passes: centring the second moment avoids the cancellation of
    // the sum-of-squares form when the mean dominates the spread
    let mut sum = 0.0;
    let mut count = 0u64;
    if antithetic {
        for pair in averages.chunks_exact(2) {
            sum += 0.5 * (payoff(pair[0]) + payoff(pair[1]));
            count += 1;
        }
    } else {
        for &avg in averages {
            sum += payoff(avg);
            count += 1;
        }
    }
    let n = count as f64;
    let mean = sum / n;
    let mut ss = 0.0;
    if antithetic {
        for pair in averages.chunks_exact(2) {
            let d = 0.5 * (payoff(pair[0]) + payoff(pair[1])) - mean;
            ss += d * d;
        }
    } else {
        for &avg in averages {
            let d = payoff(avg) - mean;
            ss += d * d;
        }
    }
    let var = ss / (n - 1.0);
    (mean, (var / n).sqrt(), count)
}

/// Monte Carlo price of the Asian call.
pub fn mc_asian_price(
    model: &ModelSpec,
    strike: f64,
    expiry: f64,
    monitoring: Monitoring,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let start = Instant::now();
    let (averages, steps) = simulate_averages(model, expiry, monitoring, cfg)?;
    let (mean, std_err, n_samples) = payoff_stats(&averages, strike, cfg.antithetic);
    let discount = (-cfg.drift * expiry).exp();
    Ok(McEstimate {
        price: discount * mean,
        std_err: discount * std_err,
        n_samples,
        n_steps: steps,
        elapsed: start.elapsed(),
    })
}

/// Monte Carlo implied-vol smile over a strike grid, one simulation
/// shared across all strikes (common random numbers).
pub fn mc_smile(
    model: &ModelSpec,
    strikes: &[f64],
    expiry: f64,
    monitoring: Monitoring,
    cfg: &McConfig,
) -> Result<SmileTable> {
    if strikes.is_empty() {
        return Err(Error::InvalidParameter {
            name: "strikes",
            value: 0.0,
            reason: "strike grid must be nonempty",
        });
    }
    let (averages, _) = simulate_averages(model, expiry, monitoring, cfg)?;
    let discount = (-cfg.drift * expiry).exp();
    let s0 = model.s0();
    let mut rows = Vec::with_capacity(strikes.len());
    let mut failures = Vec::new();
    for &strike in strikes {
        let (mean, se, _) = payoff_stats(&averages, strike, cfg.antithetic);
        let price = discount * mean;
        let se = discount * se;
        match implied_normal_vol(price, s0, strike, expiry, monitoring) {
            Ok(vol) => {
                let lo_price = price - 1.96 * se;
                let vol_lo = if lo_price > (s0 - strike).max(0.0) {
                    implied_normal_vol(lo_price, s0, strike, expiry, monitoring).unwrap_or(0.0)
                } else {
                    0.0
                };
                let vol_hi = implied_normal_vol(price + 1.96 * se, s0, strike, expiry, monitoring)
                    .unwrap_or(vol);
                rows.push(SmileRow {
                    strike,
                    price,
                    std_err: se,
                    vol,
                    vol_lo,
                    vol_hi,
                });
            }
            Err(e) => failures.push((strike, e.to_string())),
        }
    }
    Ok(SmileTable { rows, failures })
}
