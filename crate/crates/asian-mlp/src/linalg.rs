//! Symmetric tridiagonal factorizations for the discrete KKT solver.

/// LDLᵀ pivots of a symmetric tridiagonal matrix (diag, off).
///
/// Pivots are returned raw; a nonpositive pivot means the matrix is not
/// positive definite (the factorization of an indefinite matrix is still
/// usable for inertia counts).
pub(crate) fn ldl_pivots(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut d = vec![0.0; n];
    d[0] = diag[0];
    for i in 1..n {
        let prev = protect(d[i - 1]);
        d[i] = diag[i] - off[i - 1] * off[i - 1] / prev;
    }
    d
}

/// Guard against exact zero pivots during inertia counts.
fn protect(d: f64) -> f64 {
    if d == 0.0 {
        f64::MIN_POSITIVE.sqrt()
    } else {
        d
    }
}

/// Solve (diag, off)·x = rhs via LDLᵀ. Returns `None` on a zero pivot.
pub(crate) fn tridiag_solve(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n.saturating_sub(1)];
    d[0] = diag[0];
    for i in 1..n {
        if d[i - 1] == 0.0 {
            return None;
        }
        l[i - 1] = off[i - 1] / d[i - 1];
        d[i] = diag[i] - l[i - 1] * off[i - 1];
    }
    if d[n - 1] == 0.0 {
        return None;
    }
    let mut x = rhs.to_vec();
    for i in 1..n {
        x[i] -= l[i - 1] * x[i - 1];
    }
    for i in 0..n {
        x[i] /= d[i];
    }
    for i in (0..n - 1).rev() {
        let t = l[i] * x[i + 1];
        x[i] -= t;
    }
    Some(x)
}

/// True when the tridiagonal matrix is positive definite.
pub(crate) fn is_positive_definite(diag: &[f64], off: &[f64]) -> bool {
    ldl_pivots(diag, off).iter().all(|&d| d > 0.0)
}

/// Number of eigenvalues of the reduced Hessian ZᵀHZ lying strictly below
/// `shift`, where Z is an orthonormal basis of {x : Σxᵢ = 0}.
///
/// Uses the inertia identity for the bordered matrix [[H − σI, c], [cᵀ, 0]]:
/// its negative count exceeds that of ZᵀHZ − σI by exactly one when the
/// single constraint has full rank.
fn reduced_neg_count(diag: &[f64], off: &[f64], shift: f64) -> usize {
    let n = diag.len();
    let c = 1.0 / n as f64;
    // factor T = H − σI, tracking z = L⁻¹·c𝟙 to form the border pivot
    let mut neg = 0usize;
    let mut d_prev = 0.0;
    let mut z_prev = 0.0;
    let mut schur = 0.0;
    for i in 0..n {
        let mut d = diag[i] - shift;
        let mut z = c;
        if i > 0 {
            let dp = protect(d_prev);
            let l = off[i - 1] / dp;
            d -= l * off[i - 1];
            z -= l * z_prev;
        }
        if d < 0.0 {
            neg += 1;
        }
        schur += z * z / protect(d);
        d_prev = d;
        z_prev = z;
    }
    // bordered pivot: 0 − cᵀT⁻¹c; a singular (zero) pivot counts as
    // negative so the count stays well-defined at eigenvalue collisions
    if schur >= 0.0 {
        neg += 1;
    }
    neg - 1
}

/// True when the Hessian is positive definite on the constraint plane
/// {x : Σxᵢ = 0}; one O(n) inertia count.
pub(crate) fn reduced_is_positive_definite(diag: &[f64], off: &[f64]) -> bool {
    diag.len() == 1 || reduced_neg_count(diag, off, 0.0) == 0
}

/// Smallest eigenvalue of the reduced Hessian over the averaging
/// constraint. Bisection on the bordered inertia count; O(n) per step.
/// For n = 1 the reduced space is empty and +∞ is returned.
pub(crate) fn reduced_min_eig(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    if n == 1 {
        return f64::INFINITY;
    }
    // Gershgorin bounds of H bracket the reduced spectrum (interlacing)
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += off[i - 1].abs();
        }
        if i < n - 1 {
            r += off[i].abs();
        }
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let scale = hi.abs().max(lo.abs()).max(1.0);
    lo -= 1e-12 * scale;
    hi += 1e-12 * scale;
    debug_assert_eq!(reduced_neg_count(diag, off, hi), n - 1);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if reduced_neg_count(diag, off, mid) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * scale {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tridiag_solve_matches_direct() {
        let diag = vec![4.0, 5.0, 6.0, 7.0];
        let off = vec![1.0, -2.0, 0.5];
        let x_true = vec![1.0, -1.0, 2.0, 0.5];
        // rhs = A x
        let mut rhs = vec![0.0; 4];
        for i in 0..4 {
            rhs[i] = diag[i] * x_true[i];
            if i > 0 {
                rhs[i] += off[i - 1] * x_true[i - 1];
            }
            if i < 3 {
                rhs[i] += off[i] * x_true[i + 1];
            }
        }
        let x = tridiag_solve(&diag, &off, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn pivots_detect_indefiniteness() {
        assert!(is_positive_definite(&[2.0, 2.0], &[-1.0]));
        assert!(!is_positive_definite(&[1.0, 1.0], &[2.0]));
    }

    #[test]
    fn reduced_min_eig_known_small_case() {
        // H = diag(1, 3); restricted to span{(1,-1)/√2}: xᵀHx = (1+3)/2 = 2
        let v = reduced_min_eig(&[1.0, 3.0], &[0.0]);
        assert_relative_eq!(v, 2.0, max_relative = 1e-10);
    }

    #[test]
    fn reduced_min_eig_interlaces() {
        // classic second-difference matrix: reduced min eig must sit
        // between the two smallest eigenvalues of H
        let n = 12;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let v = reduced_min_eig(&diag, &off);
        let eig = |k: usize| {
            let th = std::f64::consts::PI * k as f64 / (2.0 * (n as f64 + 1.0));
            4.0 * th.sin() * th.sin()
        };
        assert!(v >= eig(1) - 1e-12 && v <= eig(2) + 1e-12, "v = {v}");
    }

    #[test]
    fn reduced_min_eig_single_variable() {
        assert_eq!(reduced_min_eig(&[5.0], &[]), f64::INFINITY);
    }
}
