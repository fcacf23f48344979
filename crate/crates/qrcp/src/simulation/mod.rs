//! Monte Carlo harness: replicated scenario generation, change-point
//! estimation, and aggregation of break/sparsity/estimation-error metrics.

pub mod diag;
pub mod sample;

pub use diag::{
    diag_asymptotic_normality, diag_expected_g_nonnegative, NormalityEntry, NormalityReport,
    Prop1Entry, Prop1Report,
};
pub use sample::{
    generate_dataset, generate_dataset_noise_free, rng_stream, sample_covariates, sample_errors,
    ErrorLaw, ScenarioTruth, COEF_SEGMENTS, P,
};

use crate::changepoint::{detect_changepoints, SearchConfig, SegmentMethod};
use crate::solver::SolverConfig;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Replications with more failures than this fraction flag the report invalid.
const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McOptions {
    pub threads: usize,
    pub min_segment: usize,
    /// None: stride 1 up to n=120, then ~n/50 with a +-stride refinement.
    pub grid_step: Option<usize>,
    pub noise_free: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            threads: 0,
            min_segment: (P + 2).max(12),
            grid_step: None,
            noise_free: false,
        }
    }
}

fn auto_grid_step(n: usize) -> usize {
    if n <= 120 {
        1
    } else {
        (n + 25) / 50
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: String,
    pub median_breaks: Vec<f64>,
    /// Median over replications of |l̂_r − l⁰_r|, per break.
    pub median_abs_break_dev: Vec<f64>,
    /// Max over all fits of kkt_residual / (1e-4 * segment length).
    pub max_kkt_ratio: f64,
    pub true_zero_pct: f64,
    pub false_zero_pct: f64,
    /// Mean absolute estimation error per segment, averaged over the truly
    /// nonzero coordinates.
    pub l1_error_per_segment: Vec<f64>,
    pub replications_used: usize,
    pub failures: usize,
    pub invalid: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub law: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub tau_star: f64,
    pub true_breaks: Vec<usize>,
    pub methods: Vec<MethodMetrics>,
}

struct RepFit {
    breaks: Vec<usize>,
    coefs: Vec<Vec<f64>>,
    active: Vec<Vec<usize>>,
    kkt_ratio: f64,
}

fn run_replication(
    truth: &ScenarioTruth,
    n: usize,
    methods: &[SegmentMethod],
    seed: u64,
    rep: u64,
    opts: &McOptions,
    search: &SearchConfig,
    cfg: &SolverConfig,
) -> Vec<Option<RepFit>> {
    let mut rng = rng_stream(seed, rep);
    let (data, _) = if opts.noise_free {
        generate_dataset_noise_free(truth, n, &mut rng)
    } else {
        generate_dataset(truth, n, &mut rng)
    };
    methods
        .iter()
        .map(|method| {
            detect_changepoints(&data, 2, method, search, cfg)
                .ok()
                .map(|fit| RepFit {
                    breaks: fit.segmentation.breaks.clone(),
                    coefs: fit
                        .segment_fits
                        .iter()
                        .map(|f| f.coefficients.clone())
                        .collect(),
                    active: fit
                        .segment_fits
                        .iter()
                        .map(|f| f.active_set.clone())
                        .collect(),
                    kkt_ratio: fit
                        .segment_fits
                        .iter()
                        .map(|f| {
                            let m = (f.range.1 - f.range.0) as f64;
                            f.kkt_residual / (1e-4 * m)
                        })
                        .fold(0.0, f64::max),
                })
        })
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = values.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

pub fn run_monte_carlo(
    truth: &ScenarioTruth,
    n: usize,
    methods: &[SegmentMethod],
    reps: usize,
    seed: u64,
    opts: &McOptions,
) -> MetricsReport {
    let grid = opts.grid_step.unwrap_or_else(|| auto_grid_step(n));
    let search = SearchConfig::for_dimension(P)
        .with_min_segment(opts.min_segment)
        .with_grid_step(grid);
    let cfg = SolverConfig::interior_point();

    let run =
        |rep: u64| run_replication(truth, n, methods, seed, rep, opts, &search, &cfg);
    let outcomes: Vec<Vec<Option<RepFit>>> = if opts.threads == 1 {
        (0..reps as u64).map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .expect("thread pool");
        pool.install(|| (0..reps as u64).into_par_iter().map(run).collect())
    };

    let methods_out = methods
        .iter()
        .enumerate()
        .map(|(mi, method)| {
            let fits: Vec<&RepFit> =
                outcomes.iter().filter_map(|o| o[mi].as_ref()).collect();
            let failures = reps - fits.len();
            let used = fits.len();
            let invalid = (failures as f64) > MAX_FAILURE_FRACTION * reps as f64 || used == 0;

            let true_breaks = truth.breaks(n);
            let median_breaks: Vec<f64> = (0..2)
                .map(|b| {
                    let mut vals: Vec<f64> =
                        fits.iter().map(|f| f.breaks[b] as f64).collect();
                    median(&mut vals)
                })
                .collect();
            let median_abs_break_dev: Vec<f64> = (0..2)
                .map(|b| {
                    let mut vals: Vec<f64> = fits
                        .iter()
                        .map(|f| (f.breaks[b] as f64 - true_breaks[b] as f64).abs())
                        .collect();
                    median(&mut vals)
                })
                .collect();
            let max_kkt_ratio = fits.iter().map(|f| f.kkt_ratio).fold(0.0, f64::max);

            let mut true_zero_hits = 0usize;
            let mut true_zero_total = 0usize;
            let mut false_zero_hits = 0usize;
            let mut false_zero_total = 0usize;
            let mut l1 = vec![0.0; 3];
            for f in &fits {
                for r in 0..3 {
                    let truth_coef = &COEF_SEGMENTS[r];
                    let active = &f.active[r];
                    let support = truth.true_support(r);
                    let mut err = 0.0;
                    for j in 0..P {
                        let est_zero = !active.contains(&j);
                        if truth_coef[j] == 0.0 {
                            true_zero_total += 1;
                            if est_zero {
                                true_zero_hits += 1;
                            }
                        } else {
                            false_zero_total += 1;
                            if est_zero {
                                false_zero_hits += 1;
                            }
                        }
                    }
                    for &j in &support {
                        err += (f.coefs[r][j] - truth_coef[j]).abs();
                    }
                    l1[r] += err / support.len() as f64;
                }
            }
            let pct = |hits: usize, total: usize| {
                if total == 0 {
                    0.0
                } else {
                    100.0 * hits as f64 / total as f64
                }
            };
            for v in &mut l1 {
                *v /= used.max(1) as f64;
            }

            MethodMetrics {
                method: method.name().to_string(),
                median_breaks,
                median_abs_break_dev,
                max_kkt_ratio,
                true_zero_pct: pct(true_zero_hits, true_zero_total),
                false_zero_pct: pct(false_zero_hits, false_zero_total),
                l1_error_per_segment: l1,
                replications_used: used,
                failures,
                invalid,
            }
        })
        .collect();

    MetricsReport {
        law: truth.law.name().to_string(),
        n,
        reps,
        seed,
        tau_star: truth.tau_star(),
        true_breaks: truth.breaks(n),
        methods: methods_out,
    }
}
