//! Acceptance gate: one test per criterion, each printing a PASS/FAIL line.
//! Run with `cargo test --test acceptance -- --nocapture --test-threads=1`
//! to see every line; the heavy Monte Carlo runs are shared across criteria
//! and computed once.

use qrcp::changepoint::{detect_changepoints, segment_cost, SearchConfig, SegmentMethod};
use qrcp::model::{Dataset, QuantileLevel};
use qrcp::simulation::{
    diag_asymptotic_normality, diag_expected_g_nonnegative, rng_stream, run_monte_carlo, ErrorLaw,
    McOptions, MetricsReport, ScenarioTruth, COEF_SEGMENTS,
};
use qrcp::solver::{solve_weighted_l1_qr, Backend, SolverConfig};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use std::sync::OnceLock;

const SEED: u64 = 20260826;
const N200_REPS: usize = 100;
const N60_REPS: usize = 100;
const N800_REPS: usize = 50;

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance criterion {id:02} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn tau_for(truth: &ScenarioTruth) -> QuantileLevel {
    QuantileLevel::new(truth.tau_star()).unwrap()
}

/// Published study values, by law: (lasso true-0, lasso false-0,
/// scad true-0, lasso L1 errors per segment).
fn published_targets(law: ErrorLaw) -> (f64, f64, f64, [f64; 3]) {
    match law {
        ErrorLaw::ShiftedExp => (97.0, 3.0, 75.0, [0.38, 0.11, 0.12]),
        ErrorLaw::Normal01 => (98.0, 2.0, 65.0, [0.33, 0.11, 0.12]),
        ErrorLaw::Cauchy => (95.0, 3.0, 62.0, [0.51, 0.17, 0.13]),
    }
}

fn n200_run(law: ErrorLaw) -> &'static MetricsReport {
    static CELLS: [OnceLock<MetricsReport>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let idx = law as usize;
    CELLS[idx].get_or_init(|| {
        let truth = ScenarioTruth::new(law);
        let t = tau_for(&truth);
        let methods = [
            SegmentMethod::lasso_type(QuantileLevel::MEDIAN),
            SegmentMethod::scad(t),
        ];
        run_monte_carlo(&truth, 200, &methods, N200_REPS, SEED, &McOptions::default())
    })
}

fn n60_run(law: ErrorLaw) -> &'static MetricsReport {
    static CELLS: [OnceLock<MetricsReport>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let idx = law as usize;
    CELLS[idx].get_or_init(|| {
        let truth = ScenarioTruth::new(law);
        let methods = [SegmentMethod::lasso_type(QuantileLevel::MEDIAN)];
        run_monte_carlo(&truth, 60, &methods, N60_REPS, SEED + 1, &McOptions::default())
    })
}

fn n800_run() -> &'static MetricsReport {
    static CELL: OnceLock<MetricsReport> = OnceLock::new();
    CELL.get_or_init(|| {
        let truth = ScenarioTruth::new(ErrorLaw::Normal01);
        let methods = [SegmentMethod::lasso_type(QuantileLevel::MEDIAN)];
        run_monte_carlo(&truth, 800, &methods, N800_REPS, SEED + 2, &McOptions::default())
    })
}

// ---------- criterion 1: LP objective vs brute-force grid ----------

fn brute_force_objective(
    y: &[f64],
    x: &[f64],
    p: usize,
    tau: f64,
    weights: &[f64],
) -> f64 {
    let n = y.len();
    let eval = |beta: &[f64]| -> f64 {
        let mut obj = 0.0;
        for i in 0..n {
            let mut r = y[i];
            for j in 0..p {
                r -= x[i * p + j] * beta[j];
            }
            obj += if r > 0.0 { tau * r } else { (tau - 1.0) * r };
        }
        for j in 0..p {
            obj += weights[j] * beta[j].abs();
        }
        obj
    };
    if p == 1 {
        let mut best = f64::INFINITY;
        let steps = 40_000;
        for k in 0..=steps {
            let b = -20.0 + 40.0 * k as f64 / steps as f64;
            best = best.min(eval(&[b]));
        }
        best
    } else {
        // coarse-to-fine descent on the convex surface
        let mut center = [0.0f64, 0.0];
        let mut best = f64::INFINITY;
        for (half, step) in [(20.0f64, 0.1), (0.2, 0.01), (0.02, 0.001)] {
            let steps = (2.0 * half / step).round() as usize;
            let (c0, c1) = (center[0], center[1]);
            for a in 0..=steps {
                let b0 = c0 - half + 2.0 * half * a as f64 / steps as f64;
                for b in 0..=steps {
                    let b1 = c1 - half + 2.0 * half * b as f64 / steps as f64;
                    let v = eval(&[b0, b1]);
                    if v < best {
                        best = v;
                        center = [b0, b1];
                    }
                }
            }
        }
        best
    }
}

#[test]
fn criterion_01_solver_oracle_equivalence() {
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut max_gap = 0.0f64;
    let mut max_kkt = 0.0f64;
    let taus = [0.25, 0.5, 0.75];
    let weight_pool = [0.0, 1.0, 10.0];
    let mut checked = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=8usize);
        let p = rng.gen_range(1..=2usize);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect();
        let x: Vec<f64> = (0..n * p).map(|_| rng.gen_range(-5..=5) as f64).collect();
        let tau = taus[rng.gen_range(0..3)];
        let weights: Vec<f64> = (0..p).map(|_| weight_pool[rng.gen_range(0..3)]).collect();
        let data = Dataset::new(y.clone(), x.clone(), p).unwrap();
        let t = QuantileLevel::new(tau).unwrap();
        let oracle = brute_force_objective(&y, &x, p, tau, &weights);
        for backend in [Backend::Simplex, Backend::InteriorPoint] {
            let cfg = SolverConfig {
                backend,
                ..SolverConfig::default()
            };
            let fit = solve_weighted_l1_qr(&data, t, &weights, &cfg).unwrap();
            let gap = fit.objective - oracle;
            max_gap = max_gap.max(gap.abs());
            max_kkt = max_kkt.max(fit.kkt_residual / (1e-4 * n as f64));
            assert!(
                gap.abs() <= 1e-2,
                "backend {backend:?}: objective {} vs oracle {oracle} (n={n} p={p} tau={tau} w={weights:?})",
                fit.objective
            );
        }
        checked += 1;
    }
    verdict(
        1,
        "solver oracle equivalence",
        checked == 200 && max_gap <= 1e-2,
        &format!("{checked} instances x 2 backends, max |objective gap| = {max_gap:.2e}"),
    );
    assert!(max_kkt <= 1.0, "KKT ratio {max_kkt} above 1e-4 n");
}

// ---------- criterion 2: KKT certification everywhere ----------

#[test]
fn criterion_02_kkt_certification() {
    let mut worst = 0.0f64;
    for law in [ErrorLaw::Normal01, ErrorLaw::Cauchy, ErrorLaw::ShiftedExp] {
        for m in &n200_run(law).methods {
            worst = worst.max(m.max_kkt_ratio);
        }
        for m in &n60_run(law).methods {
            worst = worst.max(m.max_kkt_ratio);
        }
    }
    for m in &n800_run().methods {
        worst = worst.max(m.max_kkt_ratio);
    }
    verdict(
        2,
        "KKT certification",
        worst <= 1.0,
        &format!("max kkt_residual / (1e-4 m) across all Monte Carlo fits = {worst:.3}"),
    );
}

// ---------- criterion 3: DP vs exhaustive enumeration ----------

fn exhaustive_breaks(
    data: &Dataset,
    k: usize,
    method: &SegmentMethod,
    search: &SearchConfig,
    cfg: &SolverConfig,
) -> (f64, Vec<usize>) {
    let n = data.n();
    let min = search.min_segment;
    let cost = |a: usize, b: usize| segment_cost(data, a, b, method, search, cfg).unwrap().0;
    let mut best = (f64::INFINITY, Vec::new());
    if k == 1 {
        for l in min..=n - min {
            let c = cost(0, l) + cost(l, n);
            if c < best.0 {
                best = (c, vec![l]);
            }
        }
    } else {
        for l1 in min..=n - 2 * min {
            for l2 in l1 + min..=n - min {
                let c = cost(0, l1) + cost(l1, l2) + cost(l2, n);
                if c < best.0 {
                    best = (c, vec![l1, l2]);
                }
            }
        }
    }
    best
}

#[test]
fn criterion_03_dp_matches_exhaustive() {
    let mut rng = StdRng::seed_from_u64(SEED + 3);
    let cfg = SolverConfig::default();
    let mut datasets = 0;
    for case in 0..20 {
        let k = 1 + case % 2;
        let n = rng.gen_range(26..=40usize);
        let p = rng.gen_range(1..=2usize);
        let x: Vec<f64> = (0..n * p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        // piecewise signal with noise so segment costs are nontrivial
        let b1 = rng.gen_range(8..n - 16);
        let coefs: Vec<Vec<f64>> = (0..=k)
            .map(|_| (0..p).map(|_| rng.gen_range(-3..=3) as f64).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let r = usize::from(i >= b1) + usize::from(k == 2 && i >= b1 + 9);
                let row = &x[i * p..(i + 1) * p];
                row.iter().zip(&coefs[r.min(k)]).map(|(a, b)| a * b).sum::<f64>()
                    + 0.3 * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let data = Dataset::new(y, x, p).unwrap();
        let tau = QuantileLevel::new([0.25, 0.5, 0.75][case % 3]).unwrap();
        let method = SegmentMethod::plain(tau);
        let search = SearchConfig::for_dimension(p).with_min_segment(6);
        let dp = detect_changepoints(&data, k, &method, &search, &cfg).unwrap();
        let (bf_obj, bf_breaks) = exhaustive_breaks(&data, k, &method, &search, &cfg);
        assert!(
            (dp.total_objective - bf_obj).abs() <= 1e-8 * (1.0 + bf_obj.abs()),
            "case {case}: DP {} vs exhaustive {bf_obj}",
            dp.total_objective
        );
        assert_eq!(dp.segmentation.breaks, bf_breaks, "case {case}");
        datasets += 1;
    }
    verdict(
        3,
        "DP equals exhaustive enumeration",
        datasets == 20,
        &format!("{datasets} datasets, breaks and objectives identical"),
    );
}

// ---------- criteria 4-8: Monte Carlo reproduction at n=200 / n=60 ----------

#[test]
fn criterion_04_break_medians_n200() {
    let mut detail = String::new();
    let mut pass = true;
    for law in [ErrorLaw::Normal01, ErrorLaw::Cauchy, ErrorLaw::ShiftedExp] {
        let report = n200_run(law);
        for m in &report.methods {
            let ok = (m.median_breaks[0] - 30.0).abs() <= 1.0
                && (m.median_breaks[1] - 100.0).abs() <= 1.0;
            pass &= ok;
            detail.push_str(&format!(
                "{}/{} ({:.1}, {:.1}); ",
                report.law, m.method, m.median_breaks[0], m.median_breaks[1]
            ));
        }
    }
    verdict(4, "break medians n=200 vs (30, 100) +-1", pass, detail.trim_end());
}

#[test]
fn criterion_05_break_medians_n60() {
    let mut detail = String::new();
    let mut pass = true;
    for law in [ErrorLaw::Normal01, ErrorLaw::Cauchy, ErrorLaw::ShiftedExp] {
        let report = n60_run(law);
        let m = &report.methods[0];
        let ok = (m.median_breaks[0] - 17.0).abs() <= 1.0
            && (m.median_breaks[1] - 40.0).abs() <= 1.0;
        pass &= ok;
        detail.push_str(&format!(
            "{} ({:.1}, {:.1}); ",
            report.law, m.median_breaks[0], m.median_breaks[1]
        ));
    }
    verdict(5, "break medians n=60 vs (17, 40) +-1", pass, detail.trim_end());
}

#[test]
fn criterion_06_sparsity_lasso_type_n200() {
    let mut detail = String::new();
    let mut pass = true;
    for law in [ErrorLaw::Normal01, ErrorLaw::Cauchy, ErrorLaw::ShiftedExp] {
        let (t0, f0, _, _) = published_targets(law);
        let report = n200_run(law);
        let m = report.methods.iter().find(|m| m.method == "lasso-type").unwrap();
        let ok = (m.true_zero_pct - t0).abs() <= 10.0 && (m.false_zero_pct - f0).abs() <= 5.0;
        pass &= ok;
        detail.push_str(&format!(
            "{}: true0 {:.1} (ref {t0}), false0 {:.1} (ref {f0}); ",
            report.law, m.true_zero_pct, m.false_zero_pct
        ));
    }
    verdict(6, "lasso-type sparsity n=200", pass, detail.trim_end());
}

#[test]
fn criterion_07_sparsity_scad_n200() {
    let mut detail = String::new();
    let mut pass = true;
    for law in [ErrorLaw::Normal01, ErrorLaw::Cauchy, ErrorLaw::ShiftedExp] {
        let (_, _, t0, _) = published_targets(law);
        let report = n200_run(law);
        let m = report.methods.iter().find(|m| m.method == "scad").unwrap();
        let ok = (m.true_zero_pct - t0).abs() <= 15.0 && m.false_zero_pct <= 10.0;
        pass &= ok;
        detail.push_str(&format!(
            "{}: true0 {:.1} (ref {t0} +-15), false0 {:.1} (<=10); ",
            report.law, m.true_zero_pct, m.false_zero_pct
        ));
    }
    verdict(7, "scad sparsity n=200", pass, detail.trim_end());
}

#[test]
fn criterion_08_l1_errors_lasso_type() {
    let mut detail = String::new();
    let mut pass = true;
    for law in [ErrorLaw::Normal01, ErrorLaw::Cauchy, ErrorLaw::ShiftedExp] {
        let (_, _, _, targets) = published_targets(law);
        let report = n200_run(law);
        let m = report.methods.iter().find(|m| m.method == "lasso-type").unwrap();
        for r in 0..3 {
            let got = m.l1_error_per_segment[r];
            let want = targets[r];
            let ok = (got - want).abs() <= 0.5 * want;
            pass &= ok;
            detail.push_str(&format!("{}/s{}: {:.3} (ref {want}); ", report.law, r + 1, got));
        }
    }
    verdict(8, "lasso-type L1 estimation errors", pass, detail.trim_end());
}

// ---------- criterion 9: break-error boundedness in n ----------

#[test]
fn criterion_09_break_error_bounded_in_n() {
    let base = n200_run(ErrorLaw::Normal01)
        .methods
        .iter()
        .find(|m| m.method == "lasso-type")
        .unwrap();
    let big = &n800_run().methods[0];
    let mut pass = true;
    let mut detail = String::new();
    for b in 0..2 {
        let ok = big.median_abs_break_dev[b] <= base.median_abs_break_dev[b] + 2.0;
        pass &= ok;
        detail.push_str(&format!(
            "break {}: median |dev| n=800 {:.1} vs n=200 {:.1} + 2; ",
            b + 1,
            big.median_abs_break_dev[b],
            base.median_abs_break_dev[b]
        ));
    }
    verdict(9, "break error bounded as n grows", pass, detail.trim_end());
}

// ---------- criterion 10: asymptotic normality ----------

#[test]
fn criterion_10_asymptotic_normality() {
    let truth = ScenarioTruth::new(ErrorLaw::Normal01);
    let t = tau_for(&truth);
    // Stronger lambda than the reproduction default: the oracle variance
    // target assumes the true support is selected exactly, so the
    // diagnostic runs the penalty in its selection-consistent regime.
    let method = SegmentMethod::Scad {
        tau: t,
        a: qrcp::solver::SCAD_A,
        lambda_scale: 1.0,
    };
    let report = diag_asymptotic_normality(&truth, 200, &method, 200, SEED + 4, 2);
    let mut detail = String::new();
    for e in &report.entries {
        detail.push_str(&format!(
            "coef {}: mean {:.3} var {:.3}/target {:.3}; ",
            e.coordinate + 1,
            e.mean,
            e.variance,
            e.target_variance
        ));
    }
    verdict(
        10,
        "normality of nonzero coefficients (largest segment)",
        report.ok,
        detail.trim_end(),
    );
}

// ---------- criterion 11: expected loss-difference positivity ----------

#[test]
fn criterion_11_expected_g_nonnegative() {
    let mut grid: Vec<Vec<f64>> = vec![COEF_SEGMENTS[0].to_vec()];
    let mut rng = rng_stream(SEED, u64::MAX);
    for g in 1..20 {
        let scale = 0.1 + 2.0 * g as f64 / 20.0;
        grid.push(
            COEF_SEGMENTS[0]
                .iter()
                .map(|&c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + scale * z
                })
                .collect(),
        );
    }
    let mut pass = true;
    let mut detail = String::new();
    for law in [ErrorLaw::Normal01, ErrorLaw::Cauchy, ErrorLaw::ShiftedExp] {
        let truth = ScenarioTruth::new(law);
        let report = diag_expected_g_nonnegative(&truth, 100_000, &grid, SEED + 5);
        pass &= report.ok;
        let min_t = report
            .entries
            .iter()
            .map(|e| if e.std_error > 0.0 { e.estimate / e.std_error } else { 0.0 })
            .fold(f64::INFINITY, f64::min);
        detail.push_str(&format!("{}: min estimate/SE {:.2}; ", law.name(), min_t));
    }
    verdict(11, "expected loss difference >= -3 SE", pass, detail.trim_end());
}

// ---------- criterion 12: noise-free end-to-end ----------

#[test]
fn criterion_12_noise_free_end_to_end() {
    let truth = ScenarioTruth::new(ErrorLaw::Normal01);
    let t = tau_for(&truth);
    let methods = [
        SegmentMethod::scad(t),
        SegmentMethod::lasso_type(t),
        SegmentMethod::plain(t),
    ];
    let opts = McOptions {
        noise_free: true,
        ..Default::default()
    };
    let report = run_monte_carlo(&truth, 200, &methods, 2, SEED + 6, &opts);
    let mut pass = true;
    let mut detail = String::new();
    for m in &report.methods {
        let exact_breaks = m.median_abs_break_dev.iter().all(|&d| d == 0.0);
        let max_l1 = m.l1_error_per_segment.iter().cloned().fold(0.0, f64::max);
        let ok = exact_breaks
            && m.failures == 0
            && m.true_zero_pct == 100.0
            && m.false_zero_pct == 0.0
            && max_l1 < 1e-6;
        pass &= ok;
        detail.push_str(&format!(
            "{}: breaks exact {}, true0 {:.0}, false0 {:.0}, max err {:.1e}; ",
            m.method, exact_breaks, m.true_zero_pct, m.false_zero_pct, max_l1
        ));
    }
    verdict(12, "noise-free exact recovery, all methods", pass, detail.trim_end());
}
