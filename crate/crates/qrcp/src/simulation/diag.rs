//! Statistical diagnostics: positivity of the expected loss-difference
//! process and asymptotic normality of the nonzero coefficient estimates.

use super::sample::{
    generate_dataset, rng_stream, sample_covariates, ScenarioTruth, COEF_SEGMENTS, P,
};
use crate::changepoint::{segment_cost, SearchConfig, SegmentMethod};
use crate::model::{check_loss, dot, QuantileLevel, Segmentation};
use crate::solver::SolverConfig;
use serde::{Deserialize, Serialize};

/// Loss difference ρ_τ(ε − h) − ρ_τ(ε) for a single observation.
pub fn g_term(tau: QuantileLevel, eps: f64, h: f64) -> f64 {
    check_loss(eps - h, tau) - check_loss(eps, tau)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prop1Entry {
    pub law: String,
    pub phi_index: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prop1Report {
    pub samples: usize,
    pub entries: Vec<Prop1Entry>,
    pub ok: bool,
}

/// Monte Carlo estimate of E[ρ_τ(Y − X'φ) − ρ_τ(Y − X'φ⁰)] for each φ in
/// the grid, under the scenario's first-segment truth. Estimates below
/// −3·SE flag a violation of the positivity property.
pub fn diag_expected_g_nonnegative(
    truth: &ScenarioTruth,
    n_samples: usize,
    phi_grid: &[Vec<f64>],
    seed: u64,
) -> Prop1Report {
    assert!(!phi_grid.is_empty(), "phi_grid must be nonempty");
    let tau = QuantileLevel::new(truth.tau_star()).unwrap();
    let phi0 = &COEF_SEGMENTS[0];
    let mut entries = Vec::with_capacity(phi_grid.len());
    for (pi, phi) in phi_grid.iter().enumerate() {
        assert_eq!(phi.len(), P, "grid point {pi} has wrong dimension");
        let mut rng = rng_stream(seed, pi as u64);
        let x = sample_covariates(n_samples, &mut rng);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for i in 0..n_samples {
            let row = &x[i * P..(i + 1) * P];
            let eps = truth.law.sample(&mut rng);
            let h = dot(row, phi) - dot(row, phi0);
            let g = g_term(tau, eps, h);
            sum += g;
            sum2 += g * g;
        }
        let mean = sum / n_samples as f64;
        let var = (sum2 / n_samples as f64 - mean * mean).max(0.0);
        let se = (var / n_samples as f64).sqrt();
        entries.push(Prop1Entry {
            law: truth.law.name().to_string(),
            phi_index: pi,
            estimate: mean,
            std_error: se,
            violation: mean < -3.0 * se,
        });
    }
    let ok = entries.iter().all(|e| !e.violation);
    Prop1Report {
        samples: n_samples,
        entries,
        ok,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalityEntry {
    pub coordinate: usize,
    pub mean: f64,
    pub variance: f64,
    pub target_variance: f64,
    pub mean_ok: bool,
    pub variance_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalityReport {
    pub segment: usize,
    pub reps: usize,
    pub entries: Vec<NormalityEntry>,
    pub ok: bool,
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
fn spd_inverse(a: &[f64], s: usize) -> Vec<f64> {
    let mut l = vec![0.0; s * s];
    for i in 0..s {
        for j in 0..=i {
            let mut sum = a[i * s + j];
            for k in 0..j {
                sum -= l[i * s + k] * l[j * s + k];
            }
            if i == j {
                l[i * s + i] = sum.max(1e-12).sqrt();
            } else {
                l[i * s + j] = sum / l[j * s + j];
            }
        }
    }
    // columns of the inverse by forward/back substitution
    let mut inv = vec![0.0; s * s];
    for c in 0..s {
        let mut z = vec![0.0; s];
        for i in 0..s {
            let mut sum = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                sum -= l[i * s + k] * z[k];
            }
            z[i] = sum / l[i * s + i];
        }
        for i in (0..s).rev() {
            let mut sum = z[i];
            for k in i + 1..s {
                sum -= l[k * s + i] * inv[k * s + c];
            }
            inv[i * s + c] = sum / l[i * s + i];
        }
    }
    inv
}

/// Distribution check for √m (φ̂_k − φ⁰_k) over the truly nonzero
/// coordinates of one segment, with per-segment fits at the true breaks.
/// Targets: mean 0; variance τ(1−τ)/f²(0) · (Ω̂⁻¹)_kk with Ω̂ the pooled
/// empirical Gram on the true support.
pub fn diag_asymptotic_normality(
    truth: &ScenarioTruth,
    n: usize,
    method: &SegmentMethod,
    reps: usize,
    seed: u64,
    segment: usize,
) -> NormalityReport {
    assert!(reps >= 100, "need at least 100 replications");
    let breaks = truth.breaks(n);
    let seg_bounds = {
        let seg = Segmentation::new(breaks.clone(), n, 2).unwrap();
        seg.segments()[segment]
    };
    let m = seg_bounds.1 - seg_bounds.0;
    let support = truth.true_support(segment);
    let s = support.len();
    let phi0 = &COEF_SEGMENTS[segment];
    let search = SearchConfig::for_dimension(P);
    let cfg = SolverConfig::interior_point();

    let mut z: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); s];
    let mut gram = vec![0.0; s * s];
    let mut gram_rows = 0usize;
    for rep in 0..reps {
        let mut rng = rng_stream(seed, rep as u64);
        let (data, _) = generate_dataset(truth, n, &mut rng);
        let (_, fit) = segment_cost(&data, seg_bounds.0, seg_bounds.1, method, &search, &cfg)
            .expect("fit at true breaks");
        let coef = &fit.coefficients;
        for (idx, &k) in support.iter().enumerate() {
            z[idx].push((m as f64).sqrt() * (coef[k] - phi0[k]));
        }
        for i in seg_bounds.0..seg_bounds.1 {
            let row = data.row(i);
            for (a, &ka) in support.iter().enumerate() {
                for (b, &kb) in support.iter().enumerate() {
                    gram[a * s + b] += row[ka] * row[kb];
                }
            }
        }
        gram_rows += m;
    }
    for v in &mut gram {
        *v /= gram_rows as f64;
    }
    let inv = spd_inverse(&gram, s);
    let tau = truth.tau_star();
    let scale = tau * (1.0 - tau) / (truth.f0() * truth.f0());

    let entries: Vec<NormalityEntry> = support
        .iter()
        .enumerate()
        .map(|(idx, &k)| {
            let vals = &z[idx];
            let mean = vals.iter().sum::<f64>() / reps as f64;
            let variance =
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps - 1) as f64;
            let target = scale * inv[idx * s + idx];
            let mean_ok = mean.abs() <= 3.0 * target.sqrt() / (reps as f64).sqrt();
            let variance_ok = variance >= 0.7 * target && variance <= 1.3 * target;
            NormalityEntry {
                coordinate: k,
                mean,
                variance,
                target_variance: target,
                mean_ok,
                variance_ok,
            }
        })
        .collect();
    let ok = entries.iter().all(|e| e.mean_ok && e.variance_ok);
    NormalityReport {
        segment,
        reps,
        entries,
        ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::sample::ErrorLaw;

    #[test]
    fn g_is_zero_at_truth() {
        let truth = ScenarioTruth::new(ErrorLaw::Normal01);
        let grid = vec![COEF_SEGMENTS[0].to_vec()];
        let report = diag_expected_g_nonnegative(&truth, 1000, &grid, 3);
        assert_eq!(report.entries[0].estimate, 0.0);
        assert!(report.ok);
    }

    #[test]
    fn g_positive_away_from_truth() {
        let truth = ScenarioTruth::new(ErrorLaw::Cauchy);
        let mut phi = COEF_SEGMENTS[0].to_vec();
        phi[0] += 2.0;
        phi[3] -= 1.0;
        let report = diag_expected_g_nonnegative(&truth, 20_000, &[phi], 4);
        let e = &report.entries[0];
        assert!(e.estimate > 3.0 * e.std_error, "{e:?}");
        assert!(report.ok);
    }

    #[test]
    fn spd_inverse_identity() {
        let a = vec![4.0, 1.0, 1.0, 3.0];
        let inv = spd_inverse(&a, 2);
        // a * inv == I
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    s += a[i * 2 + k] * inv[k * 2 + j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scalar_g_matches_quadrature() {
        // E[ρ_1/2(ε − h) − ρ_1/2(ε)] for standard normal ε: closed form by
        // numerical integration as the oracle.
        let tau = QuantileLevel::MEDIAN;
        let h = 0.8;
        let mut rng = rng_stream(12, 0);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let eps = ErrorLaw::Normal01.sample(&mut rng);
            let g = g_term(tau, eps, h);
            sum += g;
            sum2 += g * g;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        // trapezoid quadrature of the integrand over eps in [-10, 10]
        let steps = 400_000;
        let mut quad = 0.0;
        for i in 0..=steps {
            let eps = -10.0 + 20.0 * i as f64 / steps as f64;
            let dens = (-0.5 * eps * eps).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            quad += w * g_term(tau, eps, h) * dens;
        }
        quad *= 20.0 / steps as f64;
        assert!(quad > 0.0);
        assert!((mean - quad).abs() <= 3.0 * se, "mc {mean} quad {quad} se {se}");
    }
}
