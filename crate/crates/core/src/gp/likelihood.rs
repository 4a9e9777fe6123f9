use super::covariance::{accumulate_gradient, PairLags};
use super::posterior::{centered_targets, check_sparse_shape};
use super::{GpModel, TrainingSet};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, solve_lower};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Log marginal likelihood and its gradient with respect to
/// [`GpModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogMarginal {
    pub value: f64,
    pub gradient: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Layout {
    Exact { ff: PairLags },
    Dtc { uu: PairLags, uf: PairLags },
}

/// Reusable evaluation state for one training set and model structure.
/// Only hyperparameter values may change between calls.
#[derive(Debug, Clone)]
pub(crate) struct Objective {
    y: DVector<f64>,
    tasks: Vec<usize>,
    num_tasks: usize,
    layout: Layout,
}

impl Objective {
    pub fn new(model: &GpModel, train: &TrainingSet) -> Result<Self> {
        model.validate()?;
        let y = centered_targets(model, train)?;
        let x = train.inputs();
        let layout = match model.inducing_inputs() {
            None => Layout::Exact {
                ff: PairLags::new(x, x),
            },
            Some(u) => {
                check_sparse_shape(model, train)?;
                Layout::Dtc {
                    uu: PairLags::new(&u, &u),
                    uf: PairLags::new(&u, x),
                }
            }
        };
        Ok(Objective {
            y,
            tasks: x.iter().map(|p| p.task).collect(),
            num_tasks: model.num_tasks(),
            layout,
        })
    }

    pub fn evaluate(&self, model: &GpModel) -> Result<LogMarginal> {
        let out = match &self.layout {
            Layout::Exact { ff } => self.exact(model, ff)?,
            Layout::Dtc { uu, uf } => self.dtc(model, uu, uf)?,
        };
        if !out.value.is_finite() || out.gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical(
                "non-finite log marginal likelihood".into(),
            ));
        }
        Ok(out)
    }

    fn noise(&self, model: &GpModel) -> Vec<f64> {
        self.tasks.iter().map(|&t| model.noise[t]).collect()
    }

    fn exact(&self, model: &GpModel, ff: &PairLags) -> Result<LogMarginal> {
        let n = self.y.len();
        let b = model.coreg.b();
        let (values, kgrads) = ff.kernel_values_and_grads(&model.kernel);
        let lam = self.noise(model);
        let mut k = ff.gram(&values, &b);
        for (i, l) in lam.iter().enumerate() {
            k[(i, i)] += l;
        }
        let factor = cholesky_with_jitter(&k, "K + noise")?;
        let alpha = factor.solve(&self.y);
        let value =
            -0.5 * self.y.dot(&alpha) - 0.5 * factor.log_det() - 0.5 * n as f64 * (2.0 * PI).ln();

        let sigma_inv = factor.chol.inverse();
        let mut r = &alpha * alpha.transpose();
        r -= &sigma_inv;
        r *= 0.5;

        let mut gradient = vec![0.0; model.num_params()];
        let buckets = ff.reduce(&r, self.num_tasks);
        accumulate_gradient(
            &buckets,
            ff.num_lags(),
            &values,
            &kgrads,
            &model.coreg,
            &b,
            &model.coreg.b_gradients(),
            &mut gradient,
        );
        let off = model.kernel.num_params() + model.coreg.num_params();
        for (i, &t) in self.tasks.iter().enumerate() {
            gradient[off + t] += lam[i] * r[(i, i)];
        }
        Ok(LogMarginal { value, gradient })
    }

    fn dtc(&self, model: &GpModel, uu: &PairLags, uf: &PairLags) -> Result<LogMarginal> {
        let n = self.y.len();
        let b = model.coreg.b();
        let (vu, gu) = uu.kernel_values_and_grads(&model.kernel);
        let (vf, gf) = uf.kernel_values_and_grads(&model.kernel);
        let kuu = uu.gram(&vu, &b);
        let kuf = uf.gram(&vf, &b);
        let lam = self.noise(model);
        let inv_sqrt: Vec<f64> = lam.iter().map(|l| 1.0 / l.sqrt()).collect();

        // Explicit triangular inverses turn every O(n m^2) step into a gemm.
        let m = kuu.nrows();
        let l = cholesky_with_jitter(&kuu, "K_uu")?.l();
        let l_inv_t = solve_lower(&l, &DMatrix::identity(m, m)).transpose();
        let mut vs = l_inv_t.transpose() * &kuf;
        for (j, w) in inv_sqrt.iter().enumerate() {
            vs.column_mut(j).scale_mut(*w);
        }
        let mut a = &vs * vs.transpose();
        for i in 0..m {
            a[(i, i)] += 1.0;
        }
        let la = cholesky_with_jitter(&a, "I + V noise^-1 V^T")?.l();
        let la_inv = solve_lower(&la, &DMatrix::identity(m, m));
        let a_inv = la_inv.transpose() * &la_inv;
        let ys = DVector::from_iterator(n, self.y.iter().zip(&inv_sqrt).map(|(y, w)| y * w));
        let vsy = &vs * &ys;
        let c = &la_inv * &vsy;

        let quad = ys.norm_squared() - c.norm_squared();
        let logdet = lam.iter().map(|l| l.ln()).sum::<f64>()
            + 2.0 * la.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let value = -0.5 * quad - 0.5 * logdet - 0.5 * n as f64 * (2.0 * PI).ln();

        // alpha = Sigma^-1 y
        let proj = vs.tr_mul(&(&a_inv * &vsy));
        let alpha = DVector::from_iterator(n, (0..n).map(|i| (ys[i] - proj[i]) * inv_sqrt[i]));
        // Y = A^-1 Vs; diag(Sigma^-1)_i = (1 - Vs_i . Y_i) / noise_i
        let y_mat = &a_inv * &vs;
        let sigma_inv_diag: Vec<f64> = (0..n)
            .map(|i| (1.0 - vs.column(i).dot(&y_mat.column(i))) / lam[i])
            .collect();

        // G = P Sigma^-1 = L^-T A^-1 Vs noise^-1/2
        let mut g = &l_inv_t * &y_mat;
        for (j, w) in inv_sqrt.iter().enumerate() {
            g.column_mut(j).scale_mut(*w);
        }
        // beta = P alpha with P = L^-T V = L^-T Vs noise^1/2
        let scaled = DVector::from_iterator(n, (0..n).map(|i| alpha[i] / inv_sqrt[i]));
        let beta = &l_inv_t * (&vs * scaled);
        // H = L^-T (I - A^-1) L^-1
        let mut inner = -a_inv;
        for i in 0..m {
            inner[(i, i)] += 1.0;
        }
        let h = &l_inv_t * inner * l_inv_t.transpose();

        let mut r_uf = &beta * alpha.transpose();
        r_uf -= &g;
        let mut r_uu = h - &beta * beta.transpose();
        r_uu *= 0.5;

        let mut gradient = vec![0.0; model.num_params()];
        let b_grads = model.coreg.b_gradients();
        accumulate_gradient(
            &uf.reduce(&r_uf, self.num_tasks),
            uf.num_lags(),
            &vf,
            &gf,
            &model.coreg,
            &b,
            &b_grads,
            &mut gradient,
        );
        accumulate_gradient(
            &uu.reduce(&r_uu, self.num_tasks),
            uu.num_lags(),
            &vu,
            &gu,
            &model.coreg,
            &b,
            &b_grads,
            &mut gradient,
        );
        let off = model.kernel.num_params() + model.coreg.num_params();
        for (i, &t) in self.tasks.iter().enumerate() {
            gradient[off + t] += 0.5 * lam[i] * (alpha[i] * alpha[i] - sigma_inv_diag[i]);
        }
        Ok(LogMarginal { value, gradient })
    }
}

/// `log p(y | theta)` for the exact GP, or for the DTC approximation when the
/// model carries inducing inputs, together with its analytic gradient.
pub fn log_marginal_likelihood(model: &GpModel, train: &TrainingSet) -> Result<LogMarginal> {
    Objective::new(model, train)?.evaluate(model)
}
