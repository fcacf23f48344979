//! Primal-dual interior-point solver for weighted-L1 quantile regression.
//!
//! The penalty w_j |beta_j| is folded into the check loss through a pair of
//! pseudo-observations with rows +-w_j e_j and zero response, so a single
//! plain quantile-regression path handles every weighted fit. The Newton
//! system reduces to a p x p normal-equations solve per iteration
//! (Frisch-Newton), with Mehrotra predictor-corrector steps.

use super::{SolverConfig, SolverError};
use crate::model::{Dataset, QuantileLevel};

const MAX_ITERS: usize = 120;
const STEP_FRACTION: f64 = 0.9995;

pub fn solve(
    data: &Dataset,
    tau: QuantileLevel,
    weights: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<f64>, SolverError> {
    let (n, p) = (data.n(), data.p());
    let t = tau.tau();

    // Augmented design: original rows, then two pseudo-rows per penalized
    // coefficient. rho_tau(-w b) + rho_tau(w b) = w |b| for every tau.
    let penalized: Vec<usize> = (0..p).filter(|&j| weights[j] > 0.0).collect();
    let m = n + 2 * penalized.len();
    let mut x = vec![0.0_f64; m * p];
    let mut y = vec![0.0_f64; m];
    x[..n * p].copy_from_slice(data.xs());
    y[..n].copy_from_slice(data.y());
    for (k, &j) in penalized.iter().enumerate() {
        x[(n + 2 * k) * p + j] = weights[j];
        x[(n + 2 * k + 1) * p + j] = -weights[j];
    }

    let row = |i: usize| &x[i * p..(i + 1) * p];
    let scale = 1.0 + y.iter().fold(0.0_f64, |s, v| s.max(v.abs()));

    let mut beta = vec![0.0_f64; p];
    let mut u = vec![0.0_f64; m];
    let mut v = vec![0.0_f64; m];
    let mut a = vec![t; m];
    let mean_abs = y.iter().map(|r| r.abs()).sum::<f64>() / m as f64;
    let c0 = 0.5 * (1.0 + mean_abs);
    for i in 0..m {
        u[i] = y[i].max(0.0) + c0;
        v[i] = (-y[i]).max(0.0) + c0;
    }

    let mut d = vec![0.0_f64; m];
    let mut h = vec![0.0_f64; m];
    let mut rp = vec![0.0_f64; m];
    let mut da = vec![0.0_f64; m];
    let mut du = vec![0.0_f64; m];
    let mut dv = vec![0.0_f64; m];
    let mut da_c = vec![0.0_f64; m];
    let mut du_c = vec![0.0_f64; m];
    let mut dv_c = vec![0.0_f64; m];

    for _iter in 0..MAX_ITERS {
        // Residuals.
        for i in 0..m {
            rp[i] = y[i] - crate::model::dot(row(i), &beta) - u[i] + v[i];
        }
        let mut rd = vec![0.0_f64; p];
        for i in 0..m {
            let ai = a[i];
            for j in 0..p {
                rd[j] += (t - ai) * x[i * p + j];
            }
        }

        let gap: f64 = (0..m).map(|i| u[i] * a[i] + v[i] * (1.0 - a[i])).sum();
        let mu = gap / (2.0 * m as f64);
        let rp_norm = rp.iter().fold(0.0_f64, |s, r| s.max(r.abs()));
        let primal_obj: f64 = (0..m)
            .map(|i| t * u[i].max(0.0) + (1.0 - t) * v[i].max(0.0))
            .sum();
        if gap <= cfg.optimality_tol * (1.0 + primal_obj)
            && rp_norm <= cfg.feasibility_tol * scale
        {
            return Ok(beta);
        }

        for i in 0..m {
            d[i] = u[i] / a[i] + v[i] / (1.0 - a[i]);
        }

        // Affine (predictor) direction: mu = 0, no correction.
        for i in 0..m {
            h[i] = (-u[i]) - (-v[i]) - rp[i];
        }
        let dbeta = solve_reduced(&x, m, p, &d, &h, &rd)?;
        compute_direction(&x, m, p, &d, &h, &dbeta, &mut da);
        for i in 0..m {
            du[i] = -u[i] - (u[i] / a[i]) * da[i];
            dv[i] = -v[i] + (v[i] / (1.0 - a[i])) * da[i];
        }
        let (ap_aff, ad_aff) = step_lengths(&u, &v, &a, &du, &dv, &da, 1.0);
        let gap_aff: f64 = (0..m)
            .map(|i| {
                (u[i] + ap_aff * du[i]) * (a[i] + ad_aff * da[i])
                    + (v[i] + ap_aff * dv[i]) * (1.0 - a[i] - ad_aff * da[i])
            })
            .sum();
        let sigma = ((gap_aff / gap).max(0.0)).powi(3).min(1.0);
        let mu_target = sigma * mu;

        // Corrector direction.
        for i in 0..m {
            let e1 = (mu_target - du[i] * da[i]) / a[i] - u[i];
            let e2 = (mu_target + dv[i] * da[i]) / (1.0 - a[i]) - v[i];
            h[i] = e1 - e2 - rp[i];
        }
        let dbeta_c = solve_reduced(&x, m, p, &d, &h, &rd)?;
        compute_direction(&x, m, p, &d, &h, &dbeta_c, &mut da_c);
        for i in 0..m {
            let e1 = (mu_target - du[i] * da[i]) / a[i] - u[i];
            let e2 = (mu_target + dv[i] * da[i]) / (1.0 - a[i]) - v[i];
            du_c[i] = e1 - (u[i] / a[i]) * da_c[i];
            dv_c[i] = e2 + (v[i] / (1.0 - a[i])) * da_c[i];
        }
        let (ap, ad) = step_lengths(&u, &v, &a, &du_c, &dv_c, &da_c, STEP_FRACTION);

        for j in 0..p {
            beta[j] += ap * dbeta_c[j];
        }
        for i in 0..m {
            u[i] += ap * du_c[i];
            v[i] += ap * dv_c[i];
            a[i] += ad * da_c[i];
        }
    }

    // Accept a slightly loose solution rather than failing outright.
    let gap: f64 = (0..m).map(|i| u[i] * a[i] + v[i] * (1.0 - a[i])).sum();
    let primal_obj: f64 = (0..m).map(|i| t * u[i] + (1.0 - t) * v[i]).sum();
    if gap <= 1e-5 * (1.0 + primal_obj) {
        Ok(beta)
    } else {
        Err(SolverError::NumericalFailure(format!(
            "interior point failed to converge (gap {gap:.3e})"
        )))
    }
}

/// da = D^{-1} (X dbeta + h); h already includes -rp.
fn compute_direction(x: &[f64], m: usize, p: usize, d: &[f64], h: &[f64], dbeta: &[f64], da: &mut [f64]) {
    for i in 0..m {
        let xb = crate::model::dot(&x[i * p..(i + 1) * p], dbeta);
        da[i] = (xb + h[i]) / d[i];
    }
}

/// Solve (X^t D^{-1} X) dbeta = rd - X^t D^{-1} h.
fn solve_reduced(
    x: &[f64],
    m: usize,
    p: usize,
    d: &[f64],
    h: &[f64],
    rd: &[f64],
) -> Result<Vec<f64>, SolverError> {
    let mut mat = vec![0.0_f64; p * p];
    let mut rhs = rd.to_vec();
    for i in 0..m {
        let dinv = 1.0 / d[i];
        let xi = &x[i * p..(i + 1) * p];
        for j in 0..p {
            let xj = xi[j] * dinv;
            if xj == 0.0 {
                continue;
            }
            rhs[j] -= xj * h[i];
            for k in j..p {
                mat[j * p + k] += xj * xi[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            mat[j * p + k] = mat[k * p + j];
        }
    }
    cholesky_solve(&mut mat, &mut rhs, p)?;
    Ok(rhs)
}

fn step_lengths(
    u: &[f64],
    v: &[f64],
    a: &[f64],
    du: &[f64],
    dv: &[f64],
    da: &[f64],
    frac: f64,
) -> (f64, f64) {
    let mut ap = 1.0_f64;
    let mut ad = 1.0_f64;
    for i in 0..u.len() {
        if du[i] < 0.0 {
            ap = ap.min(-u[i] / du[i]);
        }
        if dv[i] < 0.0 {
            ap = ap.min(-v[i] / dv[i]);
        }
        if da[i] < 0.0 {
            ad = ad.min(-a[i] / da[i]);
        }
        if da[i] > 0.0 {
            ad = ad.min((1.0 - a[i]) / da[i]);
        }
    }
    ((frac * ap).min(1.0), (frac * ad).min(1.0))
}

fn cholesky_solve(mat: &mut [f64], rhs: &mut [f64], p: usize) -> Result<(), SolverError> {
    // In-place lower Cholesky with a small ridge retry on breakdown.
    let trace: f64 = (0..p).map(|j| mat[j * p + j]).sum();
    let ridge = 1e-13 * (1.0 + trace / p as f64);
    for attempt in 0..2 {
        let mut l = mat.to_vec();
        if attempt == 1 {
            for j in 0..p {
                l[j * p + j] += ridge * 1e4;
            }
        } else {
            for j in 0..p {
                l[j * p + j] += ridge;
            }
        }
        if let Some(sol) = try_cholesky(&mut l, rhs, p) {
            rhs.copy_from_slice(&sol);
            return Ok(());
        }
    }
    Err(SolverError::NumericalFailure(
        "normal equations not positive definite".into(),
    ))
}

fn try_cholesky(l: &mut [f64], rhs: &[f64], p: usize) -> Option<Vec<f64>> {
    for j in 0..p {
        for k in 0..j {
            let s = l[j * p + k];
            let s = s - (0..k).map(|t| l[j * p + t] * l[k * p + t]).sum::<f64>();
            l[j * p + k] = s / l[k * p + k];
        }
        let diag =
            l[j * p + j] - (0..j).map(|t| l[j * p + t] * l[j * p + t]).sum::<f64>();
        if diag <= 0.0 || !diag.is_finite() {
            return None;
        }
        l[j * p + j] = diag.sqrt();
    }
    let mut z = rhs.to_vec();
    for j in 0..p {
        for k in 0..j {
            z[j] -= l[j * p + k] * z[k];
        }
        z[j] /= l[j * p + j];
    }
    for j in (0..p).rev() {
        for k in j + 1..p {
            z[j] -= l[k * p + j] * z[k];
        }
        z[j] /= l[j * p + j];
    }
    Some(z)
}
