//! Scenario definition and samplers: three-segment design with ten
//! covariates, three error laws, counter-based per-replication RNG streams.

use crate::model::{dot, Dataset};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

pub const P: usize = 10;

/// True per-segment coefficient vectors.
pub const COEF_SEGMENTS: [[f64; P]; 3] = [
    [1.0, 0.0, 4.0, 0.0, -3.0, 5.0, 6.0, 0.0, -1.0, 0.0],
    [0.0, 3.0, -4.0, -3.0, 0.0, 1.0, 2.0, -3.0, 0.0, 10.0],
    [1.0, 3.0, 4.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
];

/// Covariate means: all standard normal except X3, X4, X5 (1-based).
pub const COVARIATE_MEANS: [f64; P] = [0.0, 0.0, 2.0, 4.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorLaw {
    Normal01,
    Cauchy,
    ShiftedExp,
}

impl ErrorLaw {
    /// F(0): the quantile level at which the error's conditional quantile
    /// is zero.
    pub fn tau_star(self) -> f64 {
        match self {
            ErrorLaw::Normal01 | ErrorLaw::Cauchy => 0.5,
            ErrorLaw::ShiftedExp => 1.0 - (-1.5f64).exp(),
        }
    }

    /// Error density at zero.
    pub fn f0(self) -> f64 {
        match self {
            ErrorLaw::Normal01 => 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            ErrorLaw::Cauchy => 1.0 / std::f64::consts::PI,
            ErrorLaw::ShiftedExp => (-1.5f64).exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorLaw::Normal01 => "normal",
            ErrorLaw::Cauchy => "cauchy",
            ErrorLaw::ShiftedExp => "exp",
        }
    }

    pub fn sample<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            ErrorLaw::Normal01 => StandardNormal.sample(rng),
            ErrorLaw::Cauchy => Cauchy::new(0.0, 1.0).unwrap().sample(rng),
            ErrorLaw::ShiftedExp => {
                let e: f64 = Exp1.sample(rng);
                e - 1.5
            }
        }
    }
}

/// Ground truth for one simulated scenario.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScenarioTruth {
    pub law: ErrorLaw,
}

impl ScenarioTruth {
    pub fn new(law: ErrorLaw) -> Self {
        Self { law }
    }

    pub fn tau_star(&self) -> f64 {
        self.law.tau_star()
    }

    pub fn f0(&self) -> f64 {
        self.law.f0()
    }

    /// True break positions: (30, 100) at n=200, (17, 40) at n=60,
    /// proportional rounding otherwise.
    pub fn breaks(&self, n: usize) -> Vec<usize> {
        match n {
            200 => vec![30, 100],
            60 => vec![17, 40],
            _ => vec![
                (n as f64 * 30.0 / 200.0).round() as usize,
                (n as f64 * 100.0 / 200.0).round() as usize,
            ],
        }
    }

    pub fn coefficients(&self, segment: usize) -> &'static [f64; P] {
        &COEF_SEGMENTS[segment]
    }

    /// Indices of truly nonzero coefficients in a segment.
    pub fn true_support(&self, segment: usize) -> Vec<usize> {
        COEF_SEGMENTS[segment]
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Deterministic replication stream: identical (seed, stream_id) yield
/// identical sample paths regardless of scheduling.
pub fn rng_stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// n x 10 covariate matrix in row-major order.
pub fn sample_covariates<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut x = Vec::with_capacity(n * P);
    for _ in 0..n {
        for mean in COVARIATE_MEANS {
            let z: f64 = StandardNormal.sample(rng);
            x.push(mean + z);
        }
    }
    x
}

pub fn sample_errors<R: Rng>(law: ErrorLaw, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| law.sample(rng)).collect()
}

fn build(truth: &ScenarioTruth, n: usize, rng: &mut ChaCha8Rng, noise: bool) -> (Dataset, Vec<usize>) {
    let breaks = truth.breaks(n);
    let x = sample_covariates(n, rng);
    let errors = if noise {
        sample_errors(truth.law, n, rng)
    } else {
        vec![0.0; n]
    };
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let r = breaks.iter().filter(|&&b| i >= b).count();
        let row = &x[i * P..(i + 1) * P];
        y.push(dot(row, &COEF_SEGMENTS[r]) + errors[i]);
    }
    let data = Dataset::new(y, x, P).expect("generated data is finite");
    (data, breaks)
}

pub fn generate_dataset(
    truth: &ScenarioTruth,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Dataset, Vec<usize>) {
    build(truth, n, rng, true)
}

/// Test hook: errors forced to zero, Y exactly piecewise-linear in X.
pub fn generate_dataset_noise_free(
    truth: &ScenarioTruth,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Dataset, Vec<usize>) {
    build(truth, n, rng, false)
}
