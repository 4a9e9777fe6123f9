use super::{GpModel, TrainingSet};
use crate::error::{Error, Result};
use crate::kernels::{coregional_gram, TaskInput};
use crate::linalg::{
    cholesky_with_jitter, solve_lower, solve_lower_transpose_vec, solve_lower_vec,
};
use nalgebra::{DMatrix, DVector};

/// Tolerance below zero within which a predictive variance is clamped to 0.
const VARIANCE_CLAMP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMode {
    Full,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Full(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

impl Covariance {
    pub fn diagonal(&self) -> DVector<f64> {
        match self {
            Covariance::Full(m) => m.diagonal(),
            Covariance::Diagonal(d) => d.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorPrediction {
    pub inputs: Vec<TaskInput>,
    pub mean: DVector<f64>,
    pub covariance: Covariance,
}

#[derive(Debug, Clone)]
enum State {
    Exact {
        train: Vec<TaskInput>,
        l: DMatrix<f64>,
        alpha: DVector<f64>,
    },
    Dtc {
        inducing: Vec<TaskInput>,
        l: DMatrix<f64>,
        la: DMatrix<f64>,
        mean_weights: DVector<f64>,
    },
}

/// Conditioned GP ready for repeated prediction. Immutable once built.
#[derive(Debug, Clone)]
pub struct Predictor {
    model: GpModel,
    state: State,
}

pub(crate) fn centered_targets(model: &GpModel, train: &TrainingSet) -> Result<DVector<f64>> {
    if train.num_tasks() > model.num_tasks() {
        return Err(Error::InvalidInput(format!(
            "training set has {} tasks, model has {}",
            train.num_tasks(),
            model.num_tasks()
        )));
    }
    Ok(DVector::from_iterator(
        train.len(),
        train
            .inputs()
            .iter()
            .zip(train.targets())
            .map(|(p, y)| y - model.target_means[p.task]),
    ))
}

pub(crate) fn noise_vector(model: &GpModel, pts: &[TaskInput]) -> DVector<f64> {
    DVector::from_iterator(pts.len(), pts.iter().map(|p| model.noise[p.task]))
}

pub(crate) fn check_sparse_shape(model: &GpModel, train: &TrainingSet) -> Result<()> {
    let z = model
        .inducing
        .as_ref()
        .ok_or_else(|| Error::Config("DTC requires inducing inputs".into()))?;
    let n_min = (0..train.num_tasks())
        .map(|t| train.task_inputs(t).len())
        .min()
        .unwrap_or(0);
    if z.len() > n_min {
        return Err(Error::Config(format!(
            "{} inducing inputs exceed the {} training inputs per task",
            z.len(),
            n_min
        )));
    }
    Ok(())
}

impl Predictor {
    /// Dispatches on whether the model has inducing inputs.
    pub fn new(model: &GpModel, train: &TrainingSet) -> Result<Self> {
        if model.is_sparse() {
            Predictor::dtc(model, train)
        } else {
            Predictor::exact(model, train)
        }
    }

    pub fn exact(model: &GpModel, train: &TrainingSet) -> Result<Self> {
        model.validate()?;
        if model.is_sparse() {
            return Err(Error::Config(
                "exact posterior requested for a sparse model".into(),
            ));
        }
        let y = centered_targets(model, train)?;
        let pts = train.inputs();
        let mut k = coregional_gram(&model.coreg, &model.kernel, pts, pts)?;
        for (i, s) in noise_vector(model, pts).iter().enumerate() {
            k[(i, i)] += s;
        }
        let factor = cholesky_with_jitter(&k, "K + noise")?;
        let alpha = factor.solve(&y);
        Ok(Predictor {
            model: model.clone(),
            state: State::Exact {
                train: pts.to_vec(),
                l: factor.l(),
                alpha,
            },
        })
    }

    pub fn dtc(model: &GpModel, train: &TrainingSet) -> Result<Self> {
        model.validate()?;
        check_sparse_shape(model, train)?;
        let y = centered_targets(model, train)?;
        let u = model.inducing_inputs().expect("checked sparse");
        let pts = train.inputs();
        let kuu = coregional_gram(&model.coreg, &model.kernel, &u, &u)?;
        let kuf = coregional_gram(&model.coreg, &model.kernel, &u, pts)?;
        let l = cholesky_with_jitter(&kuu, "K_uu")?.l();
        let v = solve_lower(&l, &kuf);
        let inv_sqrt: Vec<f64> = noise_vector(model, pts)
            .iter()
            .map(|s| 1.0 / s.sqrt())
            .collect();
        let mut vs = v;
        for (j, w) in inv_sqrt.iter().enumerate() {
            vs.column_mut(j).scale_mut(*w);
        }
        let mut a = &vs * vs.transpose();
        for i in 0..a.nrows() {
            a[(i, i)] += 1.0;
        }
        let la = cholesky_with_jitter(&a, "I + V noise^-1 V^T")?.l();
        let ys = DVector::from_iterator(y.len(), y.iter().zip(&inv_sqrt).map(|(y, w)| y * w));
        let c = solve_lower_vec(&la, &(&vs * ys));
        let mean_weights = solve_lower_transpose_vec(&l, &solve_lower_transpose_vec(&la, &c));
        Ok(Predictor {
            model: model.clone(),
            state: State::Dtc {
                inducing: u,
                l,
                la,
                mean_weights,
            },
        })
    }

    pub fn model(&self) -> &GpModel {
        &self.model
    }

    /// Mean plus the matrices whose column inner products give the
    /// covariance correction: `cov = K** - N^T N + P^T P`.
    fn project(
        &self,
        test: &[TaskInput],
    ) -> Result<(DVector<f64>, DMatrix<f64>, Option<DMatrix<f64>>)> {
        let m = &self.model;
        let (mean, neg, pos) = match &self.state {
            State::Exact { train, l, alpha } => {
                let kt = coregional_gram(&m.coreg, &m.kernel, train, test)?;
                let mean = kt.tr_mul(alpha);
                (mean, solve_lower(l, &kt), None)
            }
            State::Dtc {
                inducing,
                l,
                la,
                mean_weights,
            } => {
                let kut = coregional_gram(&m.coreg, &m.kernel, inducing, test)?;
                let mean = kut.tr_mul(mean_weights);
                let d = solve_lower(l, &kut);
                let e = solve_lower(la, &d);
                (mean, d, Some(e))
            }
        };
        let mean = DVector::from_iterator(
            test.len(),
            mean.iter()
                .zip(test)
                .map(|(v, p)| v + m.target_means[p.task]),
        );
        Ok((mean, neg, pos))
    }

    pub fn predict(&self, test: &[TaskInput], mode: CovarianceMode) -> Result<PosteriorPrediction> {
        let (mean, neg, pos) = self.project(test)?;
        let m = &self.model;
        let covariance = match mode {
            CovarianceMode::Full => {
                let mut cov = coregional_gram(&m.coreg, &m.kernel, test, test)?;
                cov -= neg.tr_mul(&neg);
                if let Some(p) = &pos {
                    cov += p.tr_mul(p);
                }
                let sym = (&cov + cov.transpose()) * 0.5;
                let mut sym = sym;
                for i in 0..sym.nrows() {
                    sym[(i, i)] = clamp_variance(sym[(i, i)])?;
                }
                Covariance::Full(sym)
            }
            CovarianceMode::Diagonal => {
                let b = m.coreg.b();
                let k0 = m.kernel.eval(0.0);
                let mut diag = DVector::zeros(test.len());
                for (j, p) in test.iter().enumerate() {
                    let mut v = b[(p.task, p.task)] * k0 - neg.column(j).norm_squared();
                    if let Some(pm) = &pos {
                        v += pm.column(j).norm_squared();
                    }
                    diag[j] = clamp_variance(v)?;
                }
                Covariance::Diagonal(diag)
            }
        };
        Ok(PosteriorPrediction {
            inputs: test.to_vec(),
            mean,
            covariance,
        })
    }

    /// Posterior mean at `test` and the latent covariance for each requested
    /// index pair.
    pub fn pair_covariances(
        &self,
        test: &[TaskInput],
        pairs: &[(usize, usize)],
    ) -> Result<(DVector<f64>, Vec<f64>)> {
        let (mean, neg, pos) = self.project(test)?;
        let m = &self.model;
        let b = m.coreg.b();
        let mut out = Vec::with_capacity(pairs.len());
        for &(i, j) in pairs {
            let (pi, pj) = (test[i], test[j]);
            let mut v = b[(pi.task, pj.task)] * m.kernel.eval((pi.x - pj.x).abs())
                - neg.column(i).dot(&neg.column(j));
            if let Some(p) = &pos {
                v += p.column(i).dot(&p.column(j));
            }
            if i == j {
                v = clamp_variance(v)?;
            }
            out.push(v);
        }
        Ok((mean, out))
    }
}

fn clamp_variance(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -VARIANCE_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!(
            "negative predictive variance {v:e}"
        )))
    }
}

/// Exact posterior `mu* = K*^T (K + noise)^-1 y`,
/// `Sigma* = K** - K*^T (K + noise)^-1 K*`, via Cholesky.
pub fn exact_posterior(
    model: &GpModel,
    train: &TrainingSet,
    test: &[TaskInput],
    mode: CovarianceMode,
) -> Result<PosteriorPrediction> {
    Predictor::exact(model, train)?.predict(test, mode)
}

/// DTC predictive distribution: mean `K*u psi Kuf noise^-1 y`, covariance
/// `K** - Q** + K*u psi Ku*` with `psi = (Kuu + Kuf noise^-1 Kfu)^-1`.
pub fn dtc_posterior(
    model: &GpModel,
    train: &TrainingSet,
    test: &[TaskInput],
    mode: CovarianceMode,
) -> Result<PosteriorPrediction> {
    Predictor::dtc(model, train)?.predict(test, mode)
}
