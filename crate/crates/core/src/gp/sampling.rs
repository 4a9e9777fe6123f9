use super::{GpModel, Predictor, TrainingSet};
use crate::error::{Error, Result};
use crate::kernels::TaskInput;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Joint Gaussian of (price, load) at one hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateMarginal {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl BivariateMarginal {
    pub fn correlation(&self) -> f64 {
        let d = (self.cov[0][0] * self.cov[1][1]).sqrt();
        if d > 0.0 {
            self.cov[0][1] / d
        } else {
            0.0
        }
    }
}

/// Draws for one delivery hour; index `k` of `price` and `load` is one joint
/// sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HourDraws {
    pub hour: f64,
    pub price: Vec<f64>,
    pub load: Vec<f64>,
}

/// `n` joint draws via a 2x2 Cholesky factor; negative pivots are clamped,
/// so a degenerate covariance returns the mean.
pub fn sample_bivariate<R: Rng>(
    m: &BivariateMarginal,
    n: usize,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let l00 = m.cov[0][0].max(0.0).sqrt();
    let l10 = if l00 > 0.0 { m.cov[0][1] / l00 } else { 0.0 };
    let l11 = (m.cov[1][1] - l10 * l10).max(0.0).sqrt();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        a.push(m.mean[0] + l00 * z0);
        b.push(m.mean[1] + l10 * z0 + l11 * z1);
    }
    (a, b)
}

/// Per-hour predictive marginals of (price, load) at `hours`, observation
/// noise included.
pub fn posterior_marginals(predictor: &Predictor, hours: &[f64]) -> Result<Vec<BivariateMarginal>> {
    let model = predictor.model();
    if model.num_tasks() != 2 {
        return Err(Error::Config("scenarios need exactly two tasks".into()));
    }
    let test: Vec<TaskInput> = hours
        .iter()
        .flat_map(|&h| [TaskInput::new(0, h), TaskInput::new(1, h)])
        .collect();
    let pairs: Vec<(usize, usize)> = (0..hours.len())
        .flat_map(|i| [(2 * i, 2 * i), (2 * i + 1, 2 * i + 1), (2 * i, 2 * i + 1)])
        .collect();
    let (mean, cov) = predictor.pair_covariances(&test, &pairs)?;
    Ok((0..hours.len())
        .map(|i| {
            let c = &cov[3 * i..3 * i + 3];
            BivariateMarginal {
                mean: [mean[2 * i], mean[2 * i + 1]],
                cov: [[c[0] + model.noise[0], c[2]], [c[2], c[1] + model.noise[1]]],
            }
        })
        .collect())
}

/// Independent per-hour joint draws of (price, load) for the delivery hours.
pub fn sample_posterior_scenarios(
    model: &GpModel,
    train: &TrainingSet,
    hours: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<HourDraws>> {
    if !model.is_fitted() {
        return Err(Error::State(
            "scenarios requested from an unfitted model".into(),
        ));
    }
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be positive".into()));
    }
    let predictor = Predictor::new(model, train)?;
    let marginals = posterior_marginals(&predictor, hours)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(hours
        .iter()
        .zip(&marginals)
        .map(|(&hour, m)| {
            let (price, load) = sample_bivariate(m, n_samples, &mut rng);
            HourDraws { hour, price, load }
        })
        .collect())
}
