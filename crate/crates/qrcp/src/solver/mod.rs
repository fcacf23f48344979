//! Exact solvers for weighted-L1-penalized quantile regression, SCAD fitting
//! via iterated local-linear majorization, pilot estimators for adaptive
//! weights, and KKT certification.

mod interior;
mod kkt;
mod lp;
mod simplex;

pub use kkt::{kkt_check_scad, kkt_check_weighted_l1};
pub use lp::LpProblem;

use crate::model::{
    active_set, penalized_objective, Dataset, ModelError, PenaltySpec, QuantileLevel, SegmentFit,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard SCAD concavity parameter.
pub const SCAD_A: f64 = 3.7;

/// Floor for adaptive weight denominators; an L1 pilot produces exact zeros.
pub const PILOT_FLOOR: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("segment of length {len} is too short (minimum {min})")]
    SegmentTooShort { len: usize, min: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    /// Primal simplex on the split-variable LP; exact vertex solutions.
    Simplex,
    /// Primal-dual interior point in coefficient space; faster on long segments.
    InteriorPoint,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub lla_max_iters: usize,
    pub lla_coef_tol: f64,
    pub backend: Backend,
    /// Residuals within this relative tolerance of zero count as interpolated
    /// in KKT certification (subgradient slack).
    pub kkt_interp_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-8,
            optimality_tol: 1e-8,
            lla_max_iters: 5,
            lla_coef_tol: 1e-6,
            backend: Backend::Simplex,
            kkt_interp_tol: 1e-5,
        }
    }
}

impl SolverConfig {
    pub fn interior_point() -> Self {
        Self {
            backend: Backend::InteriorPoint,
            ..Self::default()
        }
    }
}

/// Global minimizer of the weighted-L1-penalized quantile objective.
pub fn solve_weighted_l1_qr(
    data: &Dataset,
    tau: QuantileLevel,
    weights: &[f64],
    cfg: &SolverConfig,
) -> Result<SegmentFit, SolverError> {
    if weights.len() != data.p() {
        return Err(ModelError::DimensionMismatch(format!(
            "{} weights for p = {}",
            weights.len(),
            data.p()
        ))
        .into());
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(ModelError::InvalidPenalty("weights must be finite and nonnegative".into()).into());
    }
    let coef = match cfg.backend {
        Backend::Simplex => simplex::solve(data, tau, weights, cfg)?,
        Backend::InteriorPoint => interior::solve(data, tau, weights, cfg)?,
    };
    // A covariate column that is identically zero with zero weight leaves its
    // coefficient undetermined; report the zero solution and flag it.
    let degenerate = (0..data.p()).any(|j| {
        weights[j] == 0.0 && (0..data.n()).all(|i| data.row(i)[j] == 0.0)
    });
    let penalty = PenaltySpec::weighted_l1(weights.to_vec())?;
    let objective = penalized_objective(data, tau, &coef, &penalty)?;
    let kkt_residual = kkt::kkt_check_weighted_l1_raw(&coef, data, tau, weights, cfg.kkt_interp_tol);
    Ok(SegmentFit {
        range: (0, data.n()),
        active_set: active_set(&coef),
        coefficients: coef,
        objective,
        kkt_residual,
        degenerate,
    })
}

/// Unpenalized quantile regression (all-zero weights).
pub fn solve_quantile(
    data: &Dataset,
    tau: QuantileLevel,
    cfg: &SolverConfig,
) -> Result<SegmentFit, SolverError> {
    solve_weighted_l1_qr(data, tau, &vec![0.0; data.p()], cfg)
}

/// SCAD-penalized quantile regression by local linear approximation.
///
/// Two monotone LLA chains are run and the lower SCAD objective wins: one
/// from the uniform-weight m*lambda L1 fit (keeps iterate 1 sparse), one
/// from the unpenalized fit (escapes the small-segment trap where a couple
/// of large-mean covariates absorb the whole signal). Each chain reweights
/// by m * p'_lambda(|coef|) and is nonincreasing by majorization.
pub fn fit_scad_lla(
    data: &Dataset,
    tau: QuantileLevel,
    lambda: f64,
    a: f64,
    cfg: &SolverConfig,
) -> Result<SegmentFit, SolverError> {
    let scad = PenaltySpec::scad(lambda, a)?;
    let m = data.n() as f64;
    let p = data.p();
    let sparse_start = solve_weighted_l1_qr(data, tau, &vec![m * lambda; p], cfg)?;
    let open_start = solve_quantile(data, tau, cfg)?;
    let chain_a = lla_chain(data, tau, lambda, a, &scad, sparse_start, cfg)?;
    let chain_b = lla_chain(data, tau, lambda, a, &scad, open_start, cfg)?;
    let mut fit = if chain_b.1 < chain_a.1 { chain_b.0 } else { chain_a.0 };
    fit.objective = penalized_objective(data, tau, &fit.coefficients, &scad)?;
    fit.kkt_residual =
        kkt::kkt_check_scad_raw(&fit.coefficients, data, tau, lambda, a, cfg.kkt_interp_tol);
    Ok(fit)
}

fn lla_chain(
    data: &Dataset,
    tau: QuantileLevel,
    lambda: f64,
    a: f64,
    scad: &PenaltySpec,
    start: SegmentFit,
    cfg: &SolverConfig,
) -> Result<(SegmentFit, f64), SolverError> {
    let m = data.n() as f64;
    let mut fit = start;
    let mut obj = penalized_objective(data, tau, &fit.coefficients, scad)?;
    for _ in 1..cfg.lla_max_iters.max(1) {
        let weights: Vec<f64> = fit
            .coefficients
            .iter()
            .map(|c| Ok(m * crate::model::scad_derivative(c.abs(), lambda, a)?))
            .collect::<Result<_, ModelError>>()?;
        let next = solve_weighted_l1_qr(data, tau, &weights, cfg)?;
        let next_obj = penalized_objective(data, tau, &next.coefficients, scad)?;
        assert!(
            next_obj <= obj + 1e-8 * (1.0 + obj.abs()),
            "SCAD objective increased across LLA iterations: {obj} -> {next_obj}"
        );
        let delta = fit
            .coefficients
            .iter()
            .zip(&next.coefficients)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0_f64, f64::max);
        fit = next;
        obj = next_obj.min(obj);
        if delta < cfg.lla_coef_tol {
            break;
        }
    }
    Ok((fit, obj))
}

/// LASSO-type estimator: weighted-L1 fit at the configured quantile level.
pub fn fit_lasso_type(
    data: &Dataset,
    tau: QuantileLevel,
    weights: &[f64],
    cfg: &SolverConfig,
) -> Result<SegmentFit, SolverError> {
    solve_weighted_l1_qr(data, tau, weights, cfg)
}

/// Pilot quantile-LASSO fit with uniform weights log(m).
pub fn pilot_qlasso(
    data: &Dataset,
    tau: QuantileLevel,
    cfg: &SolverConfig,
) -> Result<SegmentFit, SolverError> {
    let m = data.n();
    if m < 2 {
        return Err(SolverError::SegmentTooShort { len: m, min: 2 });
    }
    let w = (m as f64).ln();
    solve_weighted_l1_qr(data, tau, &vec![w; data.p()], cfg)
}

/// Adaptive weights m^{2/5} / |pilot_j|, with the denominator floored.
pub fn adaptive_weights_lasso_type(pilot: &SegmentFit, m: usize) -> Vec<f64> {
    let scale = (m as f64).powf(0.4);
    pilot
        .coefficients
        .iter()
        .map(|c| scale / c.abs().max(PILOT_FLOOR))
        .collect()
}
