//! Coregionalized Gaussian-process regression over (price, load): exact and
//! DTC-sparse posteriors, marginal likelihood with analytic gradients,
//! hyperparameter fitting, and per-hour scenario sampling.

pub(crate) mod covariance;
mod fit;
mod inducing;
mod likelihood;
mod optim;
mod posterior;
mod sampling;

pub use fit::{fit, FitInfo, FitOptions};
pub use inducing::select_inducing;
pub use likelihood::{log_marginal_likelihood, LogMarginal};
pub use optim::{minimize_lbfgs, LbfgsOptions, LbfgsOutcome};
pub use posterior::{
    dtc_posterior, exact_posterior, Covariance, CovarianceMode, PosteriorPrediction, Predictor,
};
pub use sampling::{
    posterior_marginals, sample_bivariate, sample_posterior_scenarios, BivariateMarginal, HourDraws,
};

use crate::error::{Error, Result};
use crate::kernels::{CoregionalSpec, KernelSpec, TaskInput};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Output index of each modelled quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    Price = 0,
    Load = 1,
}

impl Task {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(index: usize) -> String {
        match index {
            0 => "price".into(),
            1 => "load".into(),
            other => format!("task{other}"),
        }
    }
}

/// Multi-output training data. Inputs are hour offsets; each task's inputs
/// are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<TaskInput>,
    targets: Vec<f64>,
    num_tasks: usize,
}

impl TrainingSet {
    pub fn new(inputs: Vec<TaskInput>, targets: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidInput("empty training set".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::InvalidInput(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if let Some(i) = targets.iter().position(|y| !y.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite target at index {i}"
            )));
        }
        let num_tasks = inputs.iter().map(|p| p.task).max().unwrap_or(0) + 1;
        let mut last = vec![f64::NEG_INFINITY; num_tasks];
        for p in &inputs {
            if !p.x.is_finite() || p.x <= last[p.task] {
                return Err(Error::InvalidInput(format!(
                    "inputs of task {} must be finite and strictly increasing (at x = {})",
                    p.task, p.x
                )));
            }
            last[p.task] = p.x;
        }
        Ok(TrainingSet {
            inputs,
            targets,
            num_tasks,
        })
    }

    /// Price and (normalized) load observed on the same hours `0..n`,
    /// stacked task-major.
    pub fn from_hourly(price: &[f64], load: &[f64]) -> Result<Self> {
        if price.len() != load.len() {
            return Err(Error::InvalidInput(
                "price and load windows differ in length".into(),
            ));
        }
        let n = price.len();
        let inputs = (0..2)
            .flat_map(|t| (0..n).map(move |i| TaskInput::new(t, i as f64)))
            .collect();
        let targets = price.iter().chain(load).copied().collect();
        TrainingSet::new(inputs, targets)
    }

    pub fn inputs(&self) -> &[TaskInput] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    /// Input locations observed for one task.
    pub fn task_inputs(&self, task: usize) -> Vec<f64> {
        self.inputs
            .iter()
            .filter(|p| p.task == task)
            .map(|p| p.x)
            .collect()
    }

    /// Mean and population SD of each task's targets.
    pub fn task_moments(&self) -> Vec<(f64, f64)> {
        (0..self.num_tasks)
            .map(|t| {
                let ys: Vec<f64> = self
                    .inputs
                    .iter()
                    .zip(&self.targets)
                    .filter(|(p, _)| p.task == t)
                    .map(|(_, y)| *y)
                    .collect();
                let n = ys.len().max(1) as f64;
                let mean = ys.iter().sum::<f64>() / n;
                let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
                (mean, var.sqrt())
            })
            .collect()
    }

    pub(crate) fn with_targets(&self, targets: Vec<f64>) -> Self {
        TrainingSet {
            inputs: self.inputs.clone(),
            targets,
            num_tasks: self.num_tasks,
        }
    }
}

/// A coregionalized GP with optional shared inducing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    pub kernel: KernelSpec,
    pub coreg: CoregionalSpec,
    /// Observation noise variance per task.
    pub noise: Vec<f64>,
    /// Inducing locations, shared by every task. `None` means exact GP.
    pub inducing: Option<Vec<f64>>,
    /// Constant prior mean per task (the zero-mean GP models residuals).
    pub target_means: Vec<f64>,
    pub fit_info: Option<FitInfo>,
}

impl GpModel {
    pub fn new(kernel: KernelSpec, coreg: CoregionalSpec, noise: Vec<f64>) -> Result<Self> {
        let d = coreg.num_tasks();
        let model = GpModel {
            kernel,
            coreg,
            noise,
            inducing: None,
            target_means: vec![0.0; d],
            fit_info: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_inducing(mut self, inducing: Vec<f64>) -> Result<Self> {
        if inducing.is_empty() {
            return Err(Error::Config("inducing set is empty".into()));
        }
        if inducing.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidInput("non-finite inducing input".into()));
        }
        self.inducing = Some(inducing);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let d = self.coreg.num_tasks();
        if self.noise.len() != d || self.target_means.len() != d {
            return Err(Error::Config(format!(
                "model has {d} tasks but {} noise variances and {} means",
                self.noise.len(),
                self.target_means.len()
            )));
        }
        if let Some(v) = self.noise.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidHyperparameter {
                name: "noise".into(),
                value: *v,
            });
        }
        Ok(())
    }

    pub fn num_tasks(&self) -> usize {
        self.coreg.num_tasks()
    }

    pub fn is_sparse(&self) -> bool {
        self.inducing.is_some()
    }

    pub fn is_fitted(&self) -> bool {
        self.fit_info.is_some()
    }

    /// Inducing inputs replicated over tasks, task-major.
    pub fn inducing_inputs(&self) -> Option<Vec<TaskInput>> {
        self.inducing.as_ref().map(|z| {
            (0..self.num_tasks())
                .flat_map(|t| z.iter().map(move |&x| TaskInput::new(t, x)))
                .collect()
        })
    }

    pub fn num_params(&self) -> usize {
        self.kernel.num_params() + self.coreg.num_params() + self.num_tasks()
    }

    /// Optimizer parameters: kernel log-hyperparameters, coregional `W` and
    /// `ln kappa`, then `ln noise`.
    pub fn params(&self) -> Vec<f64> {
        let mut theta = self.kernel.log_params();
        theta.extend(self.coreg.params());
        theta.extend(self.noise.iter().map(|s| s.ln()));
        theta
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .kernel
            .param_names()
            .into_iter()
            .map(|n| format!("kernel.{n}"))
            .collect();
        let (d, r) = (self.coreg.num_tasks(), self.coreg.rank());
        for i in 0..d {
            for j in 0..r {
                names.push(format!("coreg.w[{i},{j}]"));
            }
        }
        for i in 0..d {
            names.push(format!("coreg.kappa[{i}]"));
        }
        for i in 0..d {
            names.push(format!("noise.{}", Task::name(i)));
        }
        names
    }

    pub fn with_params(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != self.num_params() {
            return Err(Error::InvalidInput(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numerical("non-finite hyperparameter".into()));
        }
        let pk = self.kernel.num_params();
        let pc = self.coreg.num_params();
        let mut out = self.clone();
        out.kernel = self.kernel.with_log_params(&theta[..pk])?;
        out.coreg = self.coreg.with_params(&theta[pk..pk + pc])?;
        out.noise = theta[pk + pc..].iter().map(|t| t.exp()).collect();
        out.validate()?;
        Ok(out)
    }

    /// Flat `name=value` dump of hyperparameters (natural scale) and the
    /// fitted objective.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let theta = self.params();
        let pk = self.kernel.num_params();
        let d = self.num_tasks();
        let nw = d * self.coreg.rank();
        for (i, (name, t)) in self.param_names().iter().zip(&theta).enumerate() {
            let v = if i >= pk && i < pk + nw { *t } else { t.exp() };
            let _ = writeln!(out, "{name}={v}");
        }
        for (i, m) in self.target_means.iter().enumerate() {
            let _ = writeln!(out, "mean.{}={m}", Task::name(i));
        }
        match &self.inducing {
            Some(z) => {
                let _ = writeln!(out, "inducing_per_task={}", z.len());
            }
            None => {
                let _ = writeln!(out, "inducing_per_task=");
            }
        }
        if let Some(info) = &self.fit_info {
            let _ = writeln!(out, "restarts={}", info.restarts);
            let _ = writeln!(out, "successful_restarts={}", info.successful_restarts);
            let _ = writeln!(out, "best_restart={}", info.best_restart);
            let _ = writeln!(
                out,
                "log_marginal_likelihood={}",
                info.log_marginal_likelihood
            );
        }
        out
    }
}
