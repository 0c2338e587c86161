//! Discretely monitored Asian call: the n-dimensional minimizer.
//!
//! The leading order of the discrete Asian call price is governed by
//!
//! ```text
//! D(s) = 1/2 Σ_{i=1}^{n} |φ(s_i,t_i) − φ(s_{i−1},t_{i−1})|²,
//! ```
//!
//! minimized over fixings with average at least K (active, i.e. equal to K,
//! at the out-of-the-money optimum). The Hessian splits as H = H¹ + H² with
//! H¹ the positive-definite tridiagonal part, whose determinant satisfies
//! the identity det(H¹) = Π a_k⁻² (re-checked at every iterate), and H² a
//! diagonal correction that vanishes as the fixings tighten.
//!
//! The KKT system is tridiagonal-plus-border, so a Newton step costs O(n)
//! and n up to 10⁵ stays cheap.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bachelier::discrete_variance_factor;
use crate::error::{Error, Result};
use crate::linalg::{
    is_positive_definite, ldl_pivots, reduced_is_positive_definite, reduced_min_eig, tridiag_solve,
};
use crate::model::ModelSpec;

/// KKT residual threshold of the Newton solve.
const KKT_TOL: f64 = 1e-10;
const MAX_NEWTON_ITER: usize = 100;

/// Symmetric tridiagonal matrix in (diagonal, off-diagonal) form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

/// Positive-definiteness evidence for the Hessian split H = H¹ + H².
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexityCertificate {
    /// log det(H¹) from the LDLᵀ pivots.
    pub h1_log_det: f64,
    /// log Π a_k⁻², the closed-form value det(H¹) must match.
    pub a_prod_log_det: f64,
    /// Diagonal of the correction H².
    pub h2_diag: Vec<f64>,
    /// Whether the full Hessian H is positive definite.
    pub positive_definite: bool,
}

impl ConvexityCertificate {
    /// det(H¹) in linear scale (may overflow to ∞ for large n; compare
    /// determinants through the log fields instead).
    pub fn h1_det(&self) -> f64 {
        self.h1_log_det.exp()
    }

    /// Relative gap |det(H¹) − Π a_k⁻²| / Π a_k⁻².
    pub fn det_identity_rel_gap(&self) -> f64 {
        (self.h1_log_det - self.a_prod_log_det).exp_m1().abs()
    }
}

/// Minimizer of the discrete objective with its optimality evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteMlp {
    times: Vec<f64>,
    values: Vec<f64>,
    multiplier: f64,
    objective: f64,
    hessian_min_eig: f64,
    certificate: ConvexityCertificate,
    det_identity_gap: f64,
    iterations: usize,
}

impl DiscreteMlp {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Sampling times t_1 .. t_n.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Optimal fixings s*_{t_1} .. s*_{t_n}.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Lagrange multiplier of the average constraint (λ such that
    /// ∇D = (λ/n)·1 at the optimum).
    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    /// D(s*).
    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Smallest eigenvalue of the KKT-reduced Hessian at the optimum;
    /// +∞ for n = 1 where the constraint pins the only variable.
    pub fn hessian_min_eig(&self) -> f64 {
        self.hessian_min_eig
    }

    pub fn certificate(&self) -> &ConvexityCertificate {
        &self.certificate
    }

    /// Worst det(H¹) identity gap observed across all Newton iterates.
    pub fn det_identity_gap(&self) -> f64 {
        self.det_identity_gap
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Writes `i,t,s` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,t,s")?;
        for i in 0..self.values.len() {
            writeln!(w, "{},{},{}", i + 1, self.times[i], self.values[i])?;
        }
        Ok(())
    }
}

fn check_sample_grid(values: &[f64], times: &[f64]) -> Result<()> {
    if values.is_empty() || values.len() != times.len() {
        return Err(Error::InvalidParameter {
            name: "values",
            value: values.len() as f64,
            reason: "need equal, nonzero sample/time counts",
        });
    }
    let dt = times[0];
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "times",
            value: dt,
            reason: "first sampling time must be positive (t_0 = 0 is implicit)",
        });
    }
    for (i, &t) in times.iter().enumerate() {
        if (t - (i + 1) as f64 * dt).abs() > 1e-9 * times[times.len() - 1] {
            return Err(Error::InvalidParameter {
                name: "times",
                value: t,
                reason: "sampling times must be uniform multiples of t_1",
            });
        }
    }
    Ok(())
}

/// Lamperti increments of a fixing vector, with the implicit anchor
/// φ(s0, 0) = 0.
fn increments(model: &ModelSpec, values: &[f64], times: &[f64]) -> Result<Vec<f64>> {
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(values.len());
    for (&s, &t) in values.iter().zip(times) {
        let ph = model.lamperti(s, t)?;
        out.push(ph - prev);
        prev = ph;
    }
    Ok(out)
}

/// Objective D(s) = 1/2 Σ |Δφ|².
pub fn objective_d(model: &ModelSpec, values: &[f64], times: &[f64]) -> Result<f64> {
    check_sample_grid(values, times)?;
    Ok(0.5 * increments(model, values, times)?.iter().map(|d| d * d).sum::<f64>())
}

/// Analytic gradient, tridiagonal Hessian and convexity certificate of D.
pub fn grad_hessian_d(
    model: &ModelSpec,
    values: &[f64],
    times: &[f64],
) -> Result<(Vec<f64>, Tridiagonal, ConvexityCertificate)> {
    check_sample_grid(values, times)?;
    let n = values.len();
    let mut ph = Vec::with_capacity(n);
    let mut vol = Vec::with_capacity(n);
    let mut vol_s = Vec::with_capacity(n);
    for (&s, &t) in values.iter().zip(times) {
        ph.push(model.lamperti(s, t)?);
        let a = model.local_vol(s, t)?;
        if a.is_nan() || a <= 0.0 {
            return Err(Error::Domain(format!(
                "diffusion {a} not positive at fixing (s={s}, t={t})"
            )));
        }
        vol.push(a);
        let (a_s, _) = model.local_vol_partials(s, t)?;
        vol_s.push(a_s);
    }
    let prev = |j: usize| if j == 0 { 0.0 } else { ph[j - 1] };

    let mut grad = vec![0.0; n];
    let mut h_diag = vec![0.0; n];
    let mut h1_diag = vec![0.0; n];
    let mut h2_diag = vec![0.0; n];
    for j in 0..n {
        let a2 = vol[j] * vol[j];
        if j + 1 < n {
            grad[j] = (2.0 * ph[j] - prev(j) - ph[j + 1]) / vol[j];
            h1_diag[j] = 2.0 / a2;
            h2_diag[j] = vol_s[j] / a2 * (prev(j) + ph[j + 1] - 2.0 * ph[j]);
        } else {
            grad[j] = (ph[j] - prev(j)) / vol[j];
            h1_diag[j] = 1.0 / a2;
            h2_diag[j] = -vol_s[j] / a2 * (ph[j] - prev(j));
        }
        h_diag[j] = h1_diag[j] + h2_diag[j];
    }
    let off: Vec<f64> = (0..n.saturating_sub(1))
        .map(|j| -1.0 / (vol[j] * vol[j + 1]))
        .collect();

    let pivots = ldl_pivots(&h1_diag, &off);
    let mut h1_log_det = 0.0;
    for d in &pivots {
        if d.is_nan() || *d <= 0.0 {
            return Err(Error::Domain(format!(
                "H1 pivot {d} not positive; tridiagonal structure violated"
            )));
        }
        h1_log_det += d.ln();
    }
    let a_prod_log_det = -2.0 * vol.iter().map(|a| a.ln()).sum::<f64>();
    let certificate = ConvexityCertificate {
        h1_log_det,
        a_prod_log_det,
        h2_diag,
        positive_definite: is_positive_definite(&h_diag, &off),
    };
    Ok((grad, Tridiagonal { diag: h_diag, off }, certificate))
}

/// Minimize D subject to the average-K constraint.
///
/// For K ≤ s0 the constant vector s ≡ s0 is feasible with D = 0 and is
/// returned directly. Otherwise the constraint is active at the optimum
/// and a feasible Newton-KKT iteration runs on the equality problem,
/// seeded with the continuous Bachelier path sampled at the fixing dates.
/// When H² makes the reduced Hessian indefinite the step falls back to the
/// positive-definite H¹ metric with an Armijo line search.
pub fn solve_discrete_mlp(
    model: &ModelSpec,
    strike: f64,
    expiry: f64,
    n: usize,
) -> Result<DiscreteMlp> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "need at least one sampling date",
        });
    }
    if !expiry.is_finite() || expiry <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "expiry",
            value: expiry,
            reason: "must be positive and finite",
        });
    }
    let s0 = model.s0();
    let dt = expiry / n as f64;
    let times: Vec<f64> = (1..=n).map(|i| i as f64 * dt).collect();

    if strike <= s0 {
        // constant fixings are feasible and attain the global minimum 0
        let values = vec![s0; n];
        let (_, hess, certificate) = grad_hessian_d(model, &values, &times)?;
        let det_gap = certificate.det_identity_rel_gap();
        return Ok(DiscreteMlp {
            hessian_min_eig: reduced_min_eig(&hess.diag, &hess.off),
            times,
            values,
            multiplier: 0.0,
            objective: 0.0,
            certificate,
            det_identity_gap: det_gap,
            iterations: 0,
        });
    }

    // Bachelier seed at the fixing dates, projected onto the constraint
    let mut values: Vec<f64> = times
        .iter()
        .map(|&t| {
            let tau = t / expiry;
            s0 + 3.0 * (strike - s0) * tau - 1.5 * (strike - s0) * tau * tau
        })
        .collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    for v in &mut values {
        *v += strike - mean;
    }

    let guard_positive = needs_positive_fixings(model);
    let mut trace = Vec::new();
    let mut det_identity_gap = 0.0f64;
    let constraint = 1.0 / n as f64;

    for iter in 0..MAX_NEWTON_ITER {
        let (grad, hess, certificate) = grad_hessian_d(model, &values, &times)?;
        det_identity_gap = det_identity_gap.max(certificate.det_identity_rel_gap());
        let lambda_hat = grad.iter().sum::<f64>(); // n · mean(∇D)
        let mean = values.iter().sum::<f64>() / n as f64;
        let residual = grad
            .iter()
            .map(|g| (g - lambda_hat / n as f64).abs())
            .fold(0.0f64, f64::max)
            + (mean - strike).abs();
        trace.push(residual);
        if residual <= KKT_TOL {
            let objective = objective_d_unchecked(model, &values, &times)?;
            return Ok(DiscreteMlp {
                hessian_min_eig: reduced_min_eig(&hess.diag, &hess.off),
                times,
                values,
                multiplier: lambda_hat,
                objective,
                certificate,
                det_identity_gap,
                iterations: iter,
            });
        }

        // Newton direction restricted to the constraint plane; fall back to
        // the H¹ metric when H² makes the reduced Hessian indefinite
        let h1 = h1_part(&hess, &certificate);
        let mut step = kkt_direction(&hess, &grad, constraint);
        if step.is_none() || !reduced_is_positive_definite(&hess.diag, &hess.off) {
            step = kkt_direction(&h1, &grad, constraint);
        }
        let Some(dx) = step else {
            return Err(Error::KktDiverged { trace });
        };
        let slope: f64 = grad.iter().zip(&dx).map(|(g, d)| g * d).sum();
        let dx = if slope < 0.0 {
            dx
        } else {
            // full-Hessian direction lost descent; retry with H¹
            match kkt_direction(&h1, &grad, constraint) {
                Some(d) => d,
                None => return Err(Error::KktDiverged { trace }),
            }
        };
        let slope: f64 = grad.iter().zip(&dx).map(|(g, d)| g * d).sum();

        let mut alpha = 1.0f64;
        if guard_positive {
            for (v, d) in values.iter().zip(&dx) {
                if *d < 0.0 {
                    alpha = alpha.min(-0.995 * v / d);
                }
            }
        }
        let d0 = objective_d_unchecked(model, &values, &times)?;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate: Vec<f64> = values
                .iter()
                .zip(&dx)
                .map(|(v, d)| v + alpha * d)
                .collect();
            match objective_d_unchecked(model, &candidate, &times) {
                Ok(d1) if d1 <= d0 + 1e-4 * alpha * slope => {
                    values = candidate;
                    accepted = true;
                    break;
                }
                _ => alpha *= 0.5,
            }
        }
        if !accepted {
            return Err(Error::KktDiverged { trace });
        }
    }
    Err(Error::KktDiverged { trace })
}

/// Leading-order implied normal volatility of the discretely monitored
/// out-of-the-money Asian call:
///
/// ```text
/// σ_b,0^d = √A_n · |s0 − K| · (n Σ|Δφ*|²)^{−1/2},   A_n = 6n²/((n+1)(2n+1)).
/// ```
pub fn discrete_implied_vol(model: &ModelSpec, strike: f64, expiry: f64, n: usize) -> Result<f64> {
    let s0 = model.s0();
    if strike == s0 {
        return Err(Error::InvalidParameter {
            name: "strike",
            value: strike,
            reason: "implied vol asymptotic needs K ≠ s0",
        });
    }
    if strike < s0 {
        return Err(Error::Domain(format!(
            "strike {strike} below s0 = {s0}: the constrained minimum is zero and \
             the asymptotic vol degenerates (out-of-the-money calls only)"
        )));
    }
    let mlp = solve_discrete_mlp(model, strike, expiry, n)?;
    let sum_sq = 2.0 * mlp.objective(); // Σ|Δφ*|²
    if sum_sq.is_nan() || sum_sq <= 0.0 {
        return Err(Error::Domain(
            "vanishing optimal increments; implied vol undefined".into(),
        ));
    }
    let a_n = discrete_variance_factor(n as u32);
    Ok(a_n.sqrt() * (s0 - strike).abs() / (n as f64 * sum_sq).sqrt())
}

fn needs_positive_fixings(model: &ModelSpec) -> bool {
    use crate::model::ModelKind::*;
    matches!(
        model.kind(),
        BlackScholes { .. } | Cir { .. } | TimeDepCir { .. }
    )
}

fn objective_d_unchecked(model: &ModelSpec, values: &[f64], times: &[f64]) -> Result<f64> {
    Ok(0.5 * increments(model, values, times)?.iter().map(|d| d * d).sum::<f64>())
}

fn h1_part(hess: &Tridiagonal, cert: &ConvexityCertificate) -> Tridiagonal {
    Tridiagonal {
        diag: hess
            .diag
            .iter()
            .zip(&cert.h2_diag)
            .map(|(h, h2)| h - h2)
            .collect(),
        off: hess.off.clone(),
    }
}

/// Solve the equality-constrained Newton system on the feasible plane:
/// H·dx = −g + dλ·c𝟙 with 𝟙ᵀdx = 0, via two tridiagonal solves.
fn kkt_direction(hess: &Tridiagonal, grad: &[f64], constraint: f64) -> Option<Vec<f64>> {
    let n = grad.len();
    let hg = tridiag_solve(&hess.diag, &hess.off, grad)?;
    let c = vec![constraint; n];
    let hc = tridiag_solve(&hess.diag, &hess.off, &c)?;
    let chc: f64 = c.iter().zip(&hc).map(|(a, b)| a * b).sum();
    if chc == 0.0 || !chc.is_finite() {
        return None;
    }
    let chg: f64 = c.iter().zip(&hg).map(|(a, b)| a * b).sum();
    let dl = chg / chc;
    Some(
        hg.iter()
            .zip(&hc)
            .map(|(g, c)| -g + dl * c)
            .collect(),
    )
}
