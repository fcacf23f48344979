//! Dense primal simplex on the split-variable LP.
//!
//! The initial basis is the identity formed by u_i (or v_i for negative
//! responses), so no phase-1 is needed. Pivoting uses Dantzig's rule and
//! falls back to Bland's rule permanently once a long degenerate streak is
//! detected, which guarantees termination.

use super::lp::LpProblem;
use super::{SolverConfig, SolverError};
use crate::model::{Dataset, QuantileLevel};

const PIVOT_EPS: f64 = 1e-10;
const DEGENERATE_STREAK_LIMIT: usize = 60;

pub fn solve(
    data: &Dataset,
    tau: QuantileLevel,
    weights: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<f64>, SolverError> {
    let lp = LpProblem::from_quantile_regression(data, tau, weights);
    let (n, p) = (lp.n, lp.p);
    let ncols = lp.num_vars();
    let width = ncols + 1; // + rhs

    // Row-major tableau with rows flipped so the rhs is nonnegative.
    let mut tab = vec![0.0_f64; n * width];
    let mut basis = vec![0_usize; n];
    for i in 0..n {
        let s = if lp.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        let row = &mut tab[i * width..(i + 1) * width];
        for j in 0..p {
            let x = s * data.row(i)[j];
            row[j] = x;
            row[p + j] = -x;
        }
        row[2 * p + i] = s;
        row[2 * p + n + i] = -s;
        row[ncols] = s * lp.rhs[i];
        basis[i] = if s > 0.0 { 2 * p + i } else { 2 * p + n + i };
    }

    // Reduced costs; basis columns are the identity, so red = c - c_B^t T.
    let mut red = vec![0.0_f64; ncols];
    for col in 0..ncols {
        let mut r = lp.costs[col];
        for i in 0..n {
            r -= lp.costs[basis[i]] * tab[i * width + col];
        }
        red[col] = r;
    }

    let tol = |col: usize| cfg.optimality_tol * (1.0 + lp.costs[col].abs());
    let mut bland = false;
    let mut degen_streak = 0usize;
    let max_iters = 400 * (n + 2 * p + 10);

    for _iter in 0..max_iters {
        // Entering column.
        let mut enter: Option<usize> = None;
        if bland {
            for col in 0..ncols {
                if red[col] < -tol(col) {
                    enter = Some(col);
                    break;
                }
            }
        } else {
            let mut best = 0.0;
            for col in 0..ncols {
                let score = red[col] + tol(col);
                if score < best {
                    best = score;
                    enter = Some(col);
                }
            }
        }
        let Some(enter) = enter else {
            return Ok(extract(&tab, &basis, n, p, width, ncols));
        };

        // Ratio test.
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..n {
            let a = tab[i * width + enter];
            if a > PIVOT_EPS {
                let ratio = tab[i * width + ncols] / a;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - PIVOT_EPS
                            || (ratio < best_ratio + PIVOT_EPS
                                && if bland {
                                    basis[i] < basis[l]
                                } else {
                                    a > tab[l * width + enter]
                                })
                    }
                };
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            return Err(SolverError::NumericalFailure(
                "simplex detected an unbounded direction".into(),
            ));
        };

        if best_ratio.abs() <= PIVOT_EPS {
            degen_streak += 1;
            if degen_streak > DEGENERATE_STREAK_LIMIT {
                bland = true;
            }
        } else {
            degen_streak = 0;
        }

        pivot(&mut tab, &mut red, &mut basis, leave, enter, n, width, ncols);
    }

    Err(SolverError::NumericalFailure(format!(
        "simplex exceeded {max_iters} iterations (n={n}, p={p})"
    )))
}

fn pivot(
    tab: &mut [f64],
    red: &mut [f64],
    basis: &mut [usize],
    leave: usize,
    enter: usize,
    n: usize,
    width: usize,
    ncols: usize,
) {
    let piv = tab[leave * width + enter];
    let inv = 1.0 / piv;
    for v in tab[leave * width..leave * width + width].iter_mut() {
        *v *= inv;
    }
    let prow: Vec<f64> = tab[leave * width..leave * width + width].to_vec();
    // Zero the entering column elsewhere.
    for i in 0..n {
        if i == leave {
            continue;
        }
        let f = tab[i * width + enter];
        if f != 0.0 {
            for (t, s) in tab[i * width..i * width + width].iter_mut().zip(&prow) {
                *t -= f * s;
            }
        }
    }
    let f = red[enter];
    if f != 0.0 {
        for col in 0..ncols {
            red[col] -= f * tab[leave * width + col];
        }
        red[enter] = 0.0;
    }
    basis[leave] = enter;
}

fn extract(
    tab: &[f64],
    basis: &[usize],
    n: usize,
    p: usize,
    width: usize,
    ncols: usize,
) -> Vec<f64> {
    let mut values = vec![0.0_f64; 2 * p];
    for i in 0..n {
        if basis[i] < 2 * p {
            values[basis[i]] = tab[i * width + ncols];
        }
    }
    (0..p).map(|j| values[j] - values[p + j]).collect()
}
