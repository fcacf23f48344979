//! Core domain types and the shared mathematical vocabulary: check loss,
//! SCAD penalty, penalized objectives and active-set extraction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative threshold under which an estimated coefficient counts as zero.
///
/// A vertex solver produces exact zeros, interior-point solutions carry
/// O(tolerance) noise; the scaled rule keeps sparsity metrics well defined
/// across backends.
pub const ZERO_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dataset is empty (n = {n}, p = {p})")]
    EmptyDataset { n: usize, p: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("quantile level must lie in (0,1), got {0}")]
    InvalidQuantile(f64),
    #[error("invalid penalty tuning: {0}")]
    InvalidPenalty(String),
}

/// Response vector and n x p covariate matrix (row-major).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    y: Vec<f64>,
    x: Vec<f64>,
    n: usize,
    p: usize,
}

impl Dataset {
    pub fn new(y: Vec<f64>, x: Vec<f64>, p: usize) -> Result<Self, ModelError> {
        let n = y.len();
        if n == 0 || p == 0 {
            return Err(ModelError::EmptyDataset { n, p });
        }
        if x.len() != n * p {
            return Err(ModelError::DimensionMismatch(format!(
                "x has {} entries, expected {} ({} rows x {} columns)",
                x.len(),
                n * p,
                n,
                p
            )));
        }
        for (i, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(ModelError::NonFinite { row: i, col: 0 });
            }
        }
        for (k, v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(ModelError::NonFinite {
                    row: k / p,
                    col: k % p,
                });
            }
        }
        Ok(Self { y, x, n, p })
    }

    /// Build from explicit rows; every row must have the same length.
    pub fn from_rows(y: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(ModelError::DimensionMismatch(
                "ragged covariate rows".into(),
            ));
        }
        let x: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(y, x, p)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    /// Copy of the half-open row range (j1, j2] as its own dataset.
    pub fn slice(&self, j1: usize, j2: usize) -> Dataset {
        assert!(j1 < j2 && j2 <= self.n, "bad slice ({j1}, {j2}] of n={}", self.n);
        Dataset {
            y: self.y[j1..j2].to_vec(),
            x: self.x[j1 * self.p..j2 * self.p].to_vec(),
            n: j2 - j1,
            p: self.p,
        }
    }

    #[inline]
    pub fn fitted(&self, coef: &[f64], i: usize) -> f64 {
        dot(self.row(i), coef)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quantile level tau in the open interval (0,1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(tau: f64) -> Result<Self, ModelError> {
        if tau.is_finite() && tau > 0.0 && tau < 1.0 {
            Ok(Self(tau))
        } else {
            Err(ModelError::InvalidQuantile(tau))
        }
    }

    pub const MEDIAN: QuantileLevel = QuantileLevel(0.5);

    #[inline]
    pub fn tau(self) -> f64 {
        self.0
    }
}

/// Which penalty governs a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PenaltySpec {
    NoPenalty,
    Scad { lambda: f64, a: f64 },
    WeightedL1 { weights: Vec<f64> },
}

impl PenaltySpec {
    pub fn scad(lambda: f64, a: f64) -> Result<Self, ModelError> {
        validate_scad(lambda, a)?;
        Ok(PenaltySpec::Scad { lambda, a })
    }

    pub fn weighted_l1(weights: Vec<f64>) -> Result<Self, ModelError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ModelError::InvalidPenalty(
                "weights must be finite and nonnegative".into(),
            ));
        }
        Ok(PenaltySpec::WeightedL1 { weights })
    }
}

fn validate_scad(lambda: f64, a: f64) -> Result<(), ModelError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(ModelError::InvalidPenalty(format!(
            "SCAD lambda must be positive, got {lambda}"
        )));
    }
    if !(a > 2.0) || !a.is_finite() {
        return Err(ModelError::InvalidPenalty(format!(
            "SCAD a must exceed 2, got {a}"
        )));
    }
    Ok(())
}

/// Check loss rho_tau(r) = r [ tau 1_{r>0} - (1-tau) 1_{r<=0} ].
#[inline]
pub fn check_loss(r: f64, tau: QuantileLevel) -> f64 {
    let t = tau.tau();
    if r > 0.0 {
        t * r
    } else {
        (t - 1.0) * r
    }
}

/// First derivative of the SCAD penalty at theta >= 0.
pub fn scad_derivative(theta: f64, lambda: f64, a: f64) -> Result<f64, ModelError> {
    validate_scad(lambda, a)?;
    debug_assert!(theta >= 0.0);
    if theta <= lambda {
        Ok(lambda)
    } else {
        Ok(((a * lambda - theta).max(0.0)) / (a - 1.0))
    }
}

/// SCAD penalty value, the integral of its derivative from 0.
pub fn scad_value(theta: f64, lambda: f64, a: f64) -> Result<f64, ModelError> {
    validate_scad(lambda, a)?;
    debug_assert!(theta >= 0.0);
    let v = if theta <= lambda {
        lambda * theta
    } else if theta <= a * lambda {
        (2.0 * a * lambda * theta - theta * theta - lambda * lambda) / (2.0 * (a - 1.0))
    } else {
        lambda * lambda * (a + 1.0) / 2.0
    };
    Ok(v)
}

/// Penalized quantile objective for a coefficient vector.
///
/// The SCAD term is scaled by n (the objective is summed over observations,
/// matching the n*lambda on the right side of the KKT conditions); the
/// weighted-L1 term enters once with the supplied net weights.
pub fn penalized_objective(
    data: &Dataset,
    tau: QuantileLevel,
    coef: &[f64],
    penalty: &PenaltySpec,
) -> Result<f64, ModelError> {
    if coef.len() != data.p() {
        return Err(ModelError::DimensionMismatch(format!(
            "coefficient vector has length {}, expected {}",
            coef.len(),
            data.p()
        )));
    }
    let mut loss = 0.0;
    for i in 0..data.n() {
        loss += check_loss(data.y()[i] - data.fitted(coef, i), tau);
    }
    let pen = match penalty {
        PenaltySpec::NoPenalty => 0.0,
        PenaltySpec::Scad { lambda, a } => {
            let mut s = 0.0;
            for &c in coef {
                s += scad_value(c.abs(), *lambda, *a)?;
            }
            data.n() as f64 * s
        }
        PenaltySpec::WeightedL1 { weights } => {
            if weights.len() != coef.len() {
                return Err(ModelError::DimensionMismatch(
                    "weight vector length differs from coefficient length".into(),
                ));
            }
            coef.iter().zip(weights).map(|(c, w)| w * c.abs()).sum()
        }
    };
    Ok(loss + pen)
}

/// Indices of coefficients declared nonzero under the scaled zero threshold.
pub fn active_set(coef: &[f64]) -> Vec<usize> {
    let max = coef.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let z = ZERO_THRESHOLD * max.max(1.0);
    coef.iter()
        .enumerate()
        .filter(|(_, c)| c.abs() >= z)
        .map(|(j, _)| j)
        .collect()
}

/// Coefficients, active set, objective and KKT residual for one index range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentFit {
    /// Half-open index interval (j1, j2] within the parent dataset.
    pub range: (usize, usize),
    pub coefficients: Vec<f64>,
    pub active_set: Vec<usize>,
    pub objective: f64,
    pub kkt_residual: f64,
    /// Set when the minimizer is known to be non-unique (flat optimal face).
    pub degenerate: bool,
}

impl SegmentFit {
    pub fn len(&self) -> usize {
        self.range.1 - self.range.0
    }

    pub fn is_empty(&self) -> bool {
        self.range.1 == self.range.0
    }
}

/// Ordered break indices l_1 < ... < l_K, with l_0 = 0 and l_{K+1} = n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub breaks: Vec<usize>,
    pub n: usize,
}

impl Segmentation {
    pub fn new(breaks: Vec<usize>, n: usize, min_segment: usize) -> Result<Self, ModelError> {
        let mut prev = 0usize;
        for &b in &breaks {
            if b <= prev || b >= n {
                return Err(ModelError::DimensionMismatch(format!(
                    "breaks must satisfy 0 < l_1 < ... < l_K < n, got {breaks:?} with n={n}"
                )));
            }
            if b - prev < min_segment {
                return Err(ModelError::DimensionMismatch(format!(
                    "segment ({prev}, {b}] shorter than minimum {min_segment}"
                )));
            }
            prev = b;
        }
        if n - prev < min_segment {
            return Err(ModelError::DimensionMismatch(format!(
                "last segment ({prev}, {n}] shorter than minimum {min_segment}"
            )));
        }
        Ok(Self { breaks, n })
    }

    pub fn k(&self) -> usize {
        self.breaks.len()
    }

    /// The K+1 half-open segment ranges (l_{r-1}, l_r].
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.breaks.len() + 1);
        let mut prev = 0usize;
        for &b in &self.breaks {
            out.push((prev, b));
            prev = b;
        }
        out.push((prev, self.n));
        out
    }
}

/// Breaks plus per-segment fits and the total objective.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChangePointFit {
    pub segmentation: Segmentation,
    pub segment_fits: Vec<SegmentFit>,
    pub total_objective: f64,
}
