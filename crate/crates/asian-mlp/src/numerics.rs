//! Quadrature, finite differences and root bracketing used by the solvers.

use crate::error::{Error, Result};

/// Composite Simpson rule over uniformly sampled values.
///
/// Requires an even number of intervals (odd number of samples).
pub(crate) fn simpson(values: &[f64], dt: f64) -> f64 {
    let n = values.len() - 1;
    assert!(n >= 2 && n.is_multiple_of(2), "simpson needs an even interval count");
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    (values[0] + values[n] + 4.0 * odd + 2.0 * even) * dt / 3.0
}

/// Cumulative integral of uniformly sampled values, fourth order.
///
/// Each interval is integrated with the cubic through its four nearest
/// samples (one-sided cubics at the ends), so `out[k]` approximates the
/// integral from the first sample to sample `k` with O(h^4) global error.
/// Needs at least 4 samples.
pub(crate) fn cumulative_integral(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len() - 1;
    assert!(n >= 3, "cumulative_integral needs at least 4 samples");
    let f = values;
    let mut out = vec![0.0; n + 1];
    for k in 0..n {
        let seg = if k == 0 {
            9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]
        } else if k == n - 1 {
            f[n - 3] - 5.0 * f[n - 2] + 19.0 * f[n - 1] + 9.0 * f[n]
        } else {
            -f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2]
        };
        out[k + 1] = out[k] + seg * dt / 24.0;
    }
    out
}

/// First derivative of uniformly sampled values, fourth order.
///
/// Five-point central stencil in the interior, one-sided five-point
/// stencils at the two samples nearest each end.
pub(crate) fn derivative_samples(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5, "derivative_samples needs at least 5 samples");
    let f = values;
    let c = 1.0 / (12.0 * dt);
    let mut out = vec![0.0; n];
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) * c;
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * c;
    for i in 2..n - 2 {
        out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) * c;
    }
    out[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) * c;
    out[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) * c;
    out
}

/// Adaptive Simpson quadrature to an absolute tolerance.
///
/// Errors if the recursion exhausts its depth budget, which happens for
/// non-integrable singularities of the integrand.
pub(crate) fn adaptive_simpson<F>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_step(&f, a, b, fa, fm, fb, whole, abs_tol, 52)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::Quadrature(format!(
            "non-finite integrand near [{a}, {b}]"
        )));
    }
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature(format!(
            "depth exhausted on [{a}, {b}], residual {:e}",
            delta.abs()
        )));
    }
    let lv = adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let rv = adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(lv + rv)
}

/// Solve `f(x) = target` for a strictly monotone `f` on `[lo, hi]`.
///
/// Newton steps accelerated by `df` where available, falling back to
/// bisection whenever a step leaves the bracket. Converges to
/// `|f(x) - target| <= f_tol`.
pub(crate) fn bisect_newton<F, G>(
    f: F,
    df: G,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    f_tol: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let mut flo = f(lo) - target;
    let fhi = f(hi) - target;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo * fhi > 0.0 {
        return Err(Error::RootSolve(format!(
            "no sign change on bracket [{lo}, {hi}]: f-target = [{flo:e}, {fhi:e}]"
        )));
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x) - target;
        if fx.abs() <= f_tol {
            return Ok(x);
        }
        if fx * flo < 0.0 {
            hi = x;
        } else {
            lo = x;
            flo = fx;
        }
        let d = df(x);
        let newton = x - fx / d;
        x = if d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * (1.0 + x.abs()) {
            // bracket collapsed; accept the midpoint
            return Ok(x);
        }
    }
    Err(Error::RootSolve(format!(
        "no convergence: bracket [{lo}, {hi}], target {target}"
    )))
}
