//! Standard-form LP encoding of weighted-L1 quantile regression.
//!
//! minimize tau * sum u_i + (1-tau) * sum v_i + sum_j w_j (b+_j + b-_j)
//! subject to  x_i^t (b+ - b-) + u_i - v_i = y_i,  all variables >= 0.
//!
//! Column layout: [b+ (p) | b- (p) | u (n) | v (n)].

use crate::model::{Dataset, QuantileLevel};

#[derive(Debug, Clone)]
pub struct LpProblem {
    /// Cost vector, length 2p + 2n.
    pub costs: Vec<f64>,
    /// Right-hand side, length n.
    pub rhs: Vec<f64>,
    pub n: usize,
    pub p: usize,
}

impl LpProblem {
    pub fn from_quantile_regression(data: &Dataset, tau: QuantileLevel, weights: &[f64]) -> Self {
        let (n, p) = (data.n(), data.p());
        let t = tau.tau();
        let mut costs = Vec::with_capacity(2 * p + 2 * n);
        costs.extend_from_slice(weights);
        costs.extend_from_slice(weights);
        costs.extend(std::iter::repeat(t).take(n));
        costs.extend(std::iter::repeat(1.0 - t).take(n));
        Self {
            costs,
            rhs: data.y().to_vec(),
            n,
            p,
        }
    }

    pub fn num_vars(&self) -> usize {
        2 * self.p + 2 * self.n
    }

    /// Entry (i, col) of the constraint matrix.
    #[inline]
    pub fn coeff(&self, data: &Dataset, i: usize, col: usize) -> f64 {
        let p = self.p;
        if col < p {
            data.row(i)[col]
        } else if col < 2 * p {
            -data.row(i)[col - p]
        } else if col < 2 * p + self.n {
            if col - 2 * p == i {
                1.0
            } else {
                0.0
            }
        } else if col - 2 * p - self.n == i {
            -1.0
        } else {
            0.0
        }
    }
}
