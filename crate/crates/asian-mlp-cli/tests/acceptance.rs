//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured margins (visible with `cargo test -- --nocapture`).

use std::time::Instant;

use asian_mlp::bachelier::{asian_call_continuous, implied_normal_vol, Monitoring};
use asian_mlp::continuous::{
    el_residual, mlp_closed_form, mlp_fixed_point, mlp_path, FixedPointConfig,
};
use asian_mlp::discrete::{discrete_implied_vol, grad_hessian_d, solve_discrete_mlp};
use asian_mlp::mc::{mc_asian_price, mc_smile, McConfig};
use asian_mlp::model::{ModelKind, ModelSpec, TimeWeight};
use asian_mlp::pricer::{greeks_approx, price_asian, sigma_b0_continuous};

use asian_mlp_cli::benchmark::{golden_rows, run_benchmark, BenchTable};

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

fn quadratic(s0: f64) -> ModelSpec {
    ModelSpec::new(
        ModelKind::QuadraticTimeDep {
            sigma: 0.2,
            psi: -0.5,
            gamma: 0.1,
            lambda: 1.0,
        },
        s0,
    )
    .unwrap()
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max)
}

#[test]
fn criterion_01_bs_benchmark_reproduction() {
    let start = Instant::now();
    let rows = run_benchmark(BenchTable::Bs).unwrap();
    let elapsed = start.elapsed();
    let mut max_abs = 0.0f64;
    let mut max_pct_dev = 0.0f64;
    for r in &rows {
        max_abs = max_abs.max(r.abs_dev);
        assert!(
            r.abs_dev <= 1e-5,
            "case {}: price {} vs printed {}",
            r.case,
            r.computed,
            r.alw_printed
        );
        // row 5's printed percentage is checked separately: it contradicts
        // the row's own printed prices (see criterion_01b)
        if r.case != 5 {
            let dev = (r.rel_discrp_pct - r.rel_discrp_printed_pct).abs();
            max_pct_dev = max_pct_dev.max(dev);
            assert!(
                dev <= 0.02,
                "case {}: rel discrepancy {:.4}% vs printed {:.2}%",
                r.case,
                r.rel_discrp_pct,
                r.rel_discrp_printed_pct
            );
        }
    }
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "criterion 1 PASS: 7 prices within {max_abs:.2e} (tol 1e-5); \
         discrepancies within {max_pct_dev:.4}pp (tol 0.02) on consistent rows; {elapsed:?}"
    );
}

#[test]
fn criterion_01b_bs_row5_printed_discrepancy() {
    // Faithful check of the published value. The printed 0.73% cannot be
    // reproduced: the same row prints prices 0.248277 and 0.246416, whose
    // ratio gives 0.7552%, and any price within ±1e-5 of the printed one
    // yields a discrepancy in [0.7512%, 0.7593%]. The printed percentage
    // is inconsistent with its own row; this test records that fact.
    let rows = run_benchmark(BenchTable::Bs).unwrap();
    let r5 = rows.iter().find(|r| r.case == 5).unwrap();
    let dev = (r5.rel_discrp_pct - r5.rel_discrp_printed_pct).abs();
    assert!(
        dev <= 0.02,
        "case 5: recomputed rel discrepancy {:.4}% vs printed {:.2}% (dev {:.4}pp): \
         the printed percentage contradicts the row's own printed prices \
         (|0.248277-0.246416|/0.246416 = 0.7552%); see the repository notes",
        r5.rel_discrp_pct,
        r5.rel_discrp_printed_pct,
        dev
    );
    println!("criterion 1b PASS: row 5 discrepancy within 0.02pp of printed");
}

#[test]
fn criterion_02_cir_benchmark_reproduction() {
    let start = Instant::now();
    let rows = run_benchmark(BenchTable::Cir).unwrap();
    let elapsed = start.elapsed();
    let mut max_abs = 0.0f64;
    let mut max_pct_dev = 0.0f64;
    for r in &rows {
        max_abs = max_abs.max(r.abs_dev);
        let dev = (r.rel_discrp_pct - r.rel_discrp_printed_pct).abs();
        max_pct_dev = max_pct_dev.max(dev);
        assert!(r.abs_dev <= 1e-5, "case {}: |Δprice| = {:.2e}", r.case, r.abs_dev);
        assert!(
            dev <= 0.02,
            "case {}: rel discrepancy {:.4}% vs printed {:.2}%",
            r.case,
            r.rel_discrp_pct,
            r.rel_discrp_printed_pct
        );
    }
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "criterion 2 PASS: 7 prices within {max_abs:.2e} (tol 1e-5); \
         discrepancies within {max_pct_dev:.4}pp (tol 0.02); {elapsed:?}"
    );
}

#[test]
fn criterion_03_bachelier_exactness() {
    let m = bachelier(0.2, 1.0);
    let mut worst = 0.0f64;
    for k in [0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4] {
        let v = sigma_b0_continuous(&m, k, 1.0).unwrap();
        worst = worst.max((v - 0.2).abs());
    }
    assert!(worst <= 1e-10, "Bachelier exactness violated by {worst:.2e}");

    // time-dependent case: σ_b,0² = 3σ²/T³ ∫ (T−u)²θ²(u) du exactly
    let (sigma, lambda, t) = (0.2, 1.0, 1.0);
    let m = td_bachelier(sigma, lambda, 1.0);
    let a = 2.0 * lambda;
    let moment2 = t * t / a - 2.0 * t / (a * a) + 2.0 * (1.0 - (-a * t).exp()) / (a * a * a);
    let exact = (3.0 * sigma * sigma / (t * t * t) * moment2).sqrt();
    let mut worst_td = 0.0f64;
    for k in [0.85, 1.0, 1.1, 1.3] {
        let v = sigma_b0_continuous(&m, k, t).unwrap();
        worst_td = worst_td.max((v - exact).abs());
    }
    assert!(worst_td <= 1e-8, "time-dep Bachelier off by {worst_td:.2e}");
    println!(
        "criterion 3 PASS: Bachelier |σ_b0 − σ| ≤ {worst:.2e} (tol 1e-10); \
         time-dep ≤ {worst_td:.2e} (tol 1e-8)"
    );
}

#[test]
fn criterion_04_closed_form_vs_fixed_point() {
    let cases: Vec<(ModelSpec, f64, &str)> = vec![
        (bs(0.5, 2.0), 2.2, "bs otm"),
        (bs(0.5, 2.0), 1.8, "bs itm"),
        (cir(0.5, 2.0), 2.2, "cir otm"),
        (cir(0.5, 2.0), 1.8, "cir itm"),
        (bachelier(0.2, 1.0), 1.2, "bachelier"),
        (td_bachelier(0.3, 0.7, 1.0), 1.2, "td-bachelier"),
    ];
    let mut worst_path = 0.0f64;
    let mut worst_rate = 0.0f64;
    let mut worst_iter = 0usize;
    for (m, k, label) in &cases {
        let closed = mlp_closed_form(m, *k, 1.0, 400).unwrap();
        let (fixed, report) = mlp_fixed_point(m, *k, 1.0, &FixedPointConfig::default()).unwrap();
        let gap = sup_gap(closed.values(), fixed.values());
        let rate_gap = (closed.rate() - fixed.rate()).abs();
        assert!(gap <= 1e-6, "{label}: path gap {gap:.2e}");
        assert!(rate_gap <= 1e-8, "{label}: rate gap {rate_gap:.2e}");
        assert!(
            report.converged && report.iterations <= 10,
            "{label}: {} iterations",
            report.iterations
        );
        worst_path = worst_path.max(gap);
        worst_rate = worst_rate.max(rate_gap);
        worst_iter = worst_iter.max(report.iterations);
    }
    println!(
        "criterion 4 PASS: sup path gap ≤ {worst_path:.2e} (tol 1e-6), \
         rate gap ≤ {worst_rate:.2e} (tol 1e-8), iterations ≤ {worst_iter} (tol 10)"
    );
}

#[test]
fn criterion_05_euler_lagrange_residuals() {
    let cases: Vec<(ModelSpec, f64, &str)> = vec![
        (bachelier(0.2, 1.0), 1.2, "bachelier"),
        (td_bachelier(0.3, 0.7, 1.0), 1.2, "td-bachelier"),
        (bs(0.5, 2.0), 2.2, "bs otm"),
        (bs(0.5, 2.0), 1.8, "bs itm"),
        (cir(0.5, 2.0), 2.2, "cir otm"),
        (cir(0.5, 2.0), 1.8, "cir itm"),
        (td_cir(0.2, 1.0, 1.0), 1.1, "td-cir"),
        (quadratic(1.0), 1.2, "quadratic"),
    ];
    let mut worst_interior = 0.0f64;
    let mut worst_boundary = 0.0f64;
    for (m, k, label) in &cases {
        let path = mlp_path(m, *k, 1.0, 400).unwrap();
        let r = el_residual(m, &path).unwrap();
        assert!(r.interior <= 1e-5, "{label}: interior residual {:.2e}", r.interior);
        assert!(r.boundary <= 1e-6, "{label}: boundary defect {:.2e}", r.boundary);
        worst_interior = worst_interior.max(r.interior);
        worst_boundary = worst_boundary.max(r.boundary);
    }
    println!(
        "criterion 5 PASS: interior residual ≤ {worst_interior:.2e} (tol 1e-5), \
         boundary defect ≤ {worst_boundary:.2e} (tol 1e-6)"
    );
}

#[test]
fn criterion_06_discrete_to_continuous() {
    let cases: Vec<(ModelSpec, f64, &str)> = vec![
        (bachelier(0.2, 1.0), 1.2, "bachelier"),
        (bs(0.5, 2.0), 2.2, "bs"),
        (cir(0.5, 2.0), 2.2, "cir"),
    ];
    let n = 256;
    let mut worst_vol = 0.0f64;
    let mut worst_obj = 0.0f64;
    for (m, k, label) in &cases {
        let cont_vol = sigma_b0_continuous(m, *k, 1.0).unwrap();
        let disc_vol = discrete_implied_vol(m, *k, 1.0, n).unwrap();
        let vol_gap = (disc_vol - cont_vol).abs() / cont_vol;
        assert!(vol_gap <= 0.005, "{label}: vol gap {vol_gap:.4}");

        let j = mlp_path(m, *k, 1.0, 400).unwrap().rate();
        let d = solve_discrete_mlp(m, *k, 1.0, n).unwrap();
        let scaled = d.objective() * n as f64; // D/Δt at T = 1
        let obj_gap = (scaled - j).abs() / j;
        assert!(obj_gap <= 0.01, "{label}: D/Δt gap {obj_gap:.4}");
        worst_vol = worst_vol.max(vol_gap);
        worst_obj = worst_obj.max(obj_gap);
    }
    println!(
        "criterion 6 PASS: |σᵈ/σ − 1| ≤ {worst_vol:.4} (tol 0.005), \
         |D/Δt/J − 1| ≤ {worst_obj:.4} (tol 0.01) at n = {n}"
    );
}

#[test]
fn criterion_07_convexity_certificates() {
    let mut worst_gap = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut checked = 0;
    for (m, k) in [
        (bachelier(0.2, 1.0), 1.2),
        (bs(0.5, 2.0), 2.2),
        (bs(0.1, 2.0), 2.1),
        (cir(0.5, 2.0), 2.2),
        (cir(0.72, 2.0), 2.1),
    ] {
        for n in [8usize, 64, 256] {
            for t in [1.0, 2.0] {
                let d = solve_discrete_mlp(&m, k, t, n).unwrap();
                // det identity tracked at every Newton iterate by the solver
                assert!(
                    d.det_identity_gap() <= 1e-8,
                    "{} n={n} T={t}: det identity gap {:.2e}",
                    m.kind(),
                    d.det_identity_gap()
                );
                let eig = d.hessian_min_eig();
                assert!(
                    eig > 0.0,
                    "{} n={n} T={t}: reduced Hessian min eig {eig:.3e}",
                    m.kind()
                );
                worst_gap = worst_gap.max(d.det_identity_gap());
                if eig.is_finite() {
                    min_eig = min_eig.min(eig);
                }
                checked += 1;
            }
        }
    }
    println!(
        "criterion 7 PASS: {checked} optima; det identity gap ≤ {worst_gap:.2e} (tol 1e-8), \
         reduced-Hessian min eig ≥ {min_eig:.3e} > 0"
    );
}

#[test]
fn criterion_08_monte_carlo_cross_validation() {
    let start = Instant::now();
    // desk scale with antithetic pairing: the 1% reference tolerance needs
    // the variance reduction (plain sampling has ~0.55% relative stderr)
    let cfg = McConfig {
        steps_per_year: 200,
        n_paths: 100_000,
        seed: 2024,
        antithetic: true,
        drift: 0.0,
    };

    // closed-form Bachelier anchor
    let m = bachelier(0.2, 1.0);
    let est = mc_asian_price(&m, 1.0, 1.0, Monitoring::Continuous, &cfg).unwrap();
    let exact = asian_call_continuous(1.0, 1.0, 1.0, 0.2).unwrap();
    let z = (est.price - exact).abs() / est.std_err;
    assert!(z <= 3.0, "Bachelier ATM z-score {z:.2}");

    // Black-Scholes benchmark rows 1 and 5 at desk scale
    let golden = golden_rows(BenchTable::Bs).unwrap();
    let mut zs = vec![z];
    for case in [1u32, 5] {
        let g = golden.iter().find(|g| g.case == case).unwrap();
        let m = bs(g.sigma, g.s0);
        let cfg_drift = McConfig {
            drift: g.r,
            ..cfg.clone()
        };
        let est = mc_asian_price(&m, g.k, g.t, Monitoring::Continuous, &cfg_drift).unwrap();
        let rel = (est.price - g.reference).abs() / g.reference;
        assert!(rel <= 0.01, "case {case}: |MC − reference|/reference = {rel:.4}");
        let alw = price_asian(&m, g.k, g.t, g.r, 0.0).unwrap().price;
        let budget = g.rel_discrp_pct / 100.0 * g.reference + 3.0 * est.std_err;
        assert!(
            (alw - est.price).abs() <= budget,
            "case {case}: |ALW − MC| = {:.2e} > {budget:.2e}",
            (alw - est.price).abs()
        );
        zs.push(rel / 0.01);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "criterion 8 PASS: Bachelier z = {z:.2} (tol 3); BS cases 1,5 within 1% of reference \
         and ALW inside the printed-discrepancy + 3·stderr budget; {elapsed:?}"
    );
}

#[test]
fn criterion_09_smile_underestimate() {
    let cfg = McConfig {
        steps_per_year: 200,
        n_paths: 100_000,
        seed: 7,
        antithetic: false,
        drift: 0.0,
    };
    let strikes: Vec<f64> = (0..9).map(|i| 0.85 + 0.05 * i as f64).collect();
    for (m, label) in [
        (td_cir(0.2, 1.0, 1.0), "td-cir"),
        (quadratic(1.0), "quadratic"),
    ] {
        let table = mc_smile(&m, &strikes, 1.0, Monitoring::Continuous, &cfg).unwrap();
        assert!(table.failures.is_empty(), "{label}: {:?}", table.failures);
        let mut inside = 0;
        for row in &table.rows {
            let mlp_vol = sigma_b0_continuous(&m, row.strike, 1.0).unwrap();
            if mlp_vol <= row.vol_hi {
                inside += 1;
            }
        }
        let frac = inside as f64 / table.rows.len() as f64;
        assert!(
            frac >= 0.8,
            "{label}: σ_b0 below the MC band at only {inside}/{} strikes",
            table.rows.len()
        );
        println!(
            "criterion 9 [{label}]: σ_b0 ≤ MC vol + 1.96·stderr at {inside}/{} strikes (tol 80%)",
            table.rows.len()
        );
    }
    println!("criterion 9 PASS");
}

#[test]
fn criterion_10_greeks_consistency() {
    for (m, k, label) in [
        (bs(0.5, 2.0), 2.2, "bs"),
        (cir(0.5, 2.0), 2.2, "cir"),
        (bs(0.3, 2.0), 2.4, "bs far otm"),
    ] {
        let g = greeks_approx(&m, k, 1.0).unwrap();
        let h = 1e-4 * m.s0();
        let price_at = |s: f64| {
            price_asian(&m.with_s0(s).unwrap(), k, 1.0, 0.0, 0.0)
                .unwrap()
                .price
        };
        let (up, mid, dn) = (price_at(m.s0() + h), price_at(m.s0()), price_at(m.s0() - h));
        let fd_delta = (up - dn) / (2.0 * h);
        let fd_gamma = (up - 2.0 * mid + dn) / (h * h);
        let delta_err = (g.delta - fd_delta).abs() / fd_delta.abs();
        let gamma_err = (g.gamma - fd_gamma).abs() / fd_gamma.abs();
        assert!(delta_err <= 1e-2, "{label}: delta rel err {delta_err:.2e}");
        assert!(g.gamma.is_finite() && gamma_err <= 5e-2, "{label}: gamma rel err {gamma_err:.2e}");
        println!(
            "criterion 10 [{label}]: delta err {delta_err:.2e} (tol 1e-2), \
             gamma err {gamma_err:.2e} (tol 5e-2)"
        );
    }
    println!("criterion 10 PASS");
}

#[test]
fn criterion_11_inversion_round_trips() {
    let mut state = 0xA5EED5u64;
    let mut unit = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut worst = 0.0f64;
    let mut done = 0usize;
    let mut drawn = 0usize;
    while done < 1000 {
        drawn += 1;
        assert!(drawn < 20_000, "quote generator starving");
        let s0 = 0.5 + 4.5 * unit();
        let k = s0 * (0.7 + 0.6 * unit());
        let t = 0.25 + 2.75 * unit();
        let sigma = s0 * (0.05 + 0.55 * unit());
        let monitoring = match drawn % 4 {
            0 => Monitoring::Continuous,
            1 => Monitoring::Discrete(1),
            2 => Monitoring::Discrete(12),
            _ => Monitoring::Discrete(252),
        };
        let price = asian_mlp::bachelier::asian_call(s0, k, t, sigma, monitoring).unwrap();
        // quotes with extrinsic value below double resolution carry no
        // volatility information and cannot round-trip in any implementation
        if price <= 0.0 || price - (s0 - k).max(0.0) <= 1e-9 * s0 {
            continue;
        }
        let v = implied_normal_vol(price, s0, k, t, monitoring).unwrap();
        worst = worst.max((v - sigma).abs());
        done += 1;
    }
    assert!(worst <= 1e-9, "worst |Δσ| = {worst:.2e}");
    println!("criterion 11 PASS: 1000 round-trips, max |Δσ| = {worst:.2e} (tol 1e-9)");
}

// Supporting invariants promised alongside the criteria.

#[test]
fn pricer_discrepancy_reproduction_summary() {
    // the discrepancy-reproduction check spans the whole BS table, with
    // the row-5 print inconsistency surfaced by criterion_01b
    let rows = run_benchmark(BenchTable::Bs).unwrap();
    let consistent = rows.iter().filter(|r| r.case != 5).count();
    assert_eq!(consistent, 6);
}

#[test]
fn kkt_multiplier_matches_gradient_at_optimum() {
    let m = cir(0.5, 2.0);
    let d = solve_discrete_mlp(&m, 2.2, 1.0, 64).unwrap();
    let (grad, _, _) = grad_hessian_d(&m, d.values(), d.times()).unwrap();
    for g in &grad {
        assert!((g - d.multiplier() / 64.0).abs() <= 1e-8);
    }
}
