//! Stationary covariance functions over scalar time inputs (hours), their
//! additive composition, and the intrinsic coregionalization construction
//! `K((x, d), (x', d')) = B[d, d'] * k(|x - x'|)`.
//!
//! Every leaf uses an `amplitude^2` prefactor. Hyperparameters are exposed to
//! the optimizer in log-space; periods are structural and never optimized.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KernelSpec {
    SquaredExponential {
        amplitude: f64,
        lengthscale: f64,
    },
    Matern52 {
        amplitude: f64,
        lengthscale: f64,
    },
    Periodic {
        amplitude: f64,
        lengthscale: f64,
        period: f64,
    },
    RationalQuadratic {
        amplitude: f64,
        lengthscale: f64,
        shape: f64,
    },
    WhiteNoise {
        noise_variance: f64,
    },
    Sum(Vec<KernelSpec>),
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidHyperparameter {
            name: name.to_string(),
            value,
        })
    }
}

impl KernelSpec {
    pub fn squared_exponential(amplitude: f64, lengthscale: f64) -> Result<Self> {
        let k = KernelSpec::SquaredExponential {
            amplitude,
            lengthscale,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn matern52(amplitude: f64, lengthscale: f64) -> Result<Self> {
        let k = KernelSpec::Matern52 {
            amplitude,
            lengthscale,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn periodic(amplitude: f64, lengthscale: f64, period: f64) -> Result<Self> {
        let k = KernelSpec::Periodic {
            amplitude,
            lengthscale,
            period,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn rational_quadratic(amplitude: f64, lengthscale: f64, shape: f64) -> Result<Self> {
        let k = KernelSpec::RationalQuadratic {
            amplitude,
            lengthscale,
            shape,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn white_noise(noise_variance: f64) -> Result<Self> {
        let k = KernelSpec::WhiteNoise { noise_variance };
        k.validate()?;
        Ok(k)
    }

    pub fn sum(children: Vec<KernelSpec>) -> Result<Self> {
        let k = KernelSpec::Sum(children);
        k.validate()?;
        Ok(k)
    }

    /// Checks the hyperparameter invariants recursively.
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::SquaredExponential {
                amplitude,
                lengthscale,
            }
            | KernelSpec::Matern52 {
                amplitude,
                lengthscale,
            } => {
                positive("amplitude", *amplitude)?;
                positive("lengthscale", *lengthscale)
            }
            KernelSpec::Periodic {
                amplitude,
                lengthscale,
                period,
            } => {
                positive("amplitude", *amplitude)?;
                positive("lengthscale", *lengthscale)?;
                positive("period", *period)
            }
            KernelSpec::RationalQuadratic {
                amplitude,
                lengthscale,
                shape,
            } => {
                positive("amplitude", *amplitude)?;
                positive("lengthscale", *lengthscale)?;
                positive("shape", *shape)
            }
            KernelSpec::WhiteNoise { noise_variance } => {
                if noise_variance.is_finite() && *noise_variance >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidHyperparameter {
                        name: "noise_variance".into(),
                        value: *noise_variance,
                    })
                }
            }
            KernelSpec::Sum(children) => {
                if children.len() < 2 {
                    return Err(Error::Config(format!(
                        "a sum kernel needs at least 2 terms, got {}",
                        children.len()
                    )));
                }
                children.iter().try_for_each(KernelSpec::validate)
            }
        }
    }

    /// Covariance at distance `r`. No validation; see [`kernel_eval`].
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            KernelSpec::SquaredExponential {
                amplitude,
                lengthscale,
            } => amplitude * amplitude * (-(r * r) / (lengthscale * lengthscale)).exp(),
            KernelSpec::Matern52 {
                amplitude,
                lengthscale,
            } => {
                let a = SQRT5 * r / lengthscale;
                amplitude * amplitude * (1.0 + a + a * a / 3.0) * (-a).exp()
            }
            KernelSpec::Periodic {
                amplitude,
                lengthscale,
                period,
            } => {
                let s = (PI * r / period).sin();
                amplitude * amplitude * (-2.0 * s * s / (lengthscale * lengthscale)).exp()
            }
            KernelSpec::RationalQuadratic {
                amplitude,
                lengthscale,
                shape,
            } => {
                let t = r * r / (2.0 * shape * lengthscale * lengthscale);
                amplitude * amplitude * (1.0 + t).powf(-shape)
            }
            KernelSpec::WhiteNoise { noise_variance } => {
                if r == 0.0 {
                    noise_variance
                } else {
                    0.0
                }
            }
            KernelSpec::Sum(ref children) => children.iter().map(|c| c.eval(r)).sum(),
        }
    }

    /// Number of free (log-space) hyperparameters.
    pub fn num_params(&self) -> usize {
        match self {
            KernelSpec::SquaredExponential { .. }
            | KernelSpec::Matern52 { .. }
            | KernelSpec::Periodic { .. } => 2,
            KernelSpec::RationalQuadratic { .. } => 3,
            KernelSpec::WhiteNoise { .. } => 1,
            KernelSpec::Sum(children) => children.iter().map(KernelSpec::num_params).sum(),
        }
    }

    pub fn log_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.push_log_params(&mut out);
        out
    }

    fn push_log_params(&self, out: &mut Vec<f64>) {
        match *self {
            KernelSpec::SquaredExponential {
                amplitude,
                lengthscale,
            }
            | KernelSpec::Matern52 {
                amplitude,
                lengthscale,
            }
            | KernelSpec::Periodic {
                amplitude,
                lengthscale,
                ..
            } => {
                out.push(amplitude.ln());
                out.push(lengthscale.ln());
            }
            KernelSpec::RationalQuadratic {
                amplitude,
                lengthscale,
                shape,
            } => {
                out.push(amplitude.ln());
                out.push(lengthscale.ln());
                out.push(shape.ln());
            }
            KernelSpec::WhiteNoise { noise_variance } => out.push(noise_variance.ln()),
            KernelSpec::Sum(ref children) => children.iter().for_each(|c| c.push_log_params(out)),
        }
    }

    /// Returns a copy with hyperparameters replaced by `exp(theta)`, in the
    /// order of [`KernelSpec::log_params`].
    pub fn with_log_params(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != self.num_params() {
            return Err(Error::InvalidInput(format!(
                "expected {} kernel parameters, got {}",
                self.num_params(),
                theta.len()
            )));
        }
        let mut it = theta.iter().map(|t| t.exp());
        let k = self.rebuild(&mut it);
        k.validate()?;
        Ok(k)
    }

    fn rebuild(&self, it: &mut impl Iterator<Item = f64>) -> Self {
        let mut next = || it.next().expect("parameter count checked");
        match *self {
            KernelSpec::SquaredExponential { .. } => KernelSpec::SquaredExponential {
                amplitude: next(),
                lengthscale: next(),
            },
            KernelSpec::Matern52 { .. } => KernelSpec::Matern52 {
                amplitude: next(),
                lengthscale: next(),
            },
            KernelSpec::Periodic { period, .. } => KernelSpec::Periodic {
                amplitude: next(),
                lengthscale: next(),
                period,
            },
            KernelSpec::RationalQuadratic { .. } => KernelSpec::RationalQuadratic {
                amplitude: next(),
                lengthscale: next(),
                shape: next(),
            },
            KernelSpec::WhiteNoise { .. } => KernelSpec::WhiteNoise {
                noise_variance: next(),
            },
            KernelSpec::Sum(ref children) => {
                KernelSpec::Sum(children.iter().map(|c| c.rebuild(it)).collect())
            }
        }
    }

    /// Parameter names aligned with [`KernelSpec::log_params`].
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.push_names("", &mut out);
        out
    }

    fn push_names(&self, prefix: &str, out: &mut Vec<String>) {
        match self {
            KernelSpec::SquaredExponential { .. } => {
                out.push(format!("{prefix}se.amplitude"));
                out.push(format!("{prefix}se.lengthscale"));
            }
            KernelSpec::Matern52 { .. } => {
                out.push(format!("{prefix}mat52.amplitude"));
                out.push(format!("{prefix}mat52.lengthscale"));
            }
            KernelSpec::Periodic { period, .. } => {
                out.push(format!("{prefix}per{period}.amplitude"));
                out.push(format!("{prefix}per{period}.lengthscale"));
            }
            KernelSpec::RationalQuadratic { .. } => {
                out.push(format!("{prefix}rq.amplitude"));
                out.push(format!("{prefix}rq.lengthscale"));
                out.push(format!("{prefix}rq.shape"));
            }
            KernelSpec::WhiteNoise { .. } => out.push(format!("{prefix}white.noise_variance")),
            KernelSpec::Sum(children) => {
                for (i, c) in children.iter().enumerate() {
                    c.push_names(&format!("{prefix}{i}."), out);
                }
            }
        }
    }

    /// Evaluates `k(r)` and writes `dk/dtheta` for every log-parameter into
    /// `grad` (length [`KernelSpec::num_params`]).
    pub fn eval_with_grad(&self, r: f64, grad: &mut [f64]) -> f64 {
        match *self {
            KernelSpec::SquaredExponential {
                amplitude,
                lengthscale,
            } => {
                let q = r * r / (lengthscale * lengthscale);
                let k = amplitude * amplitude * (-q).exp();
                grad[0] = 2.0 * k;
                grad[1] = 2.0 * q * k;
                k
            }
            KernelSpec::Matern52 {
                amplitude,
                lengthscale,
            } => {
                let a = SQRT5 * r / lengthscale;
                let s2 = amplitude * amplitude;
                let e = (-a).exp();
                let k = s2 * (1.0 + a + a * a / 3.0) * e;
                grad[0] = 2.0 * k;
                grad[1] = s2 * a * a * (1.0 + a) / 3.0 * e;
                k
            }
            KernelSpec::Periodic {
                amplitude,
                lengthscale,
                period,
            } => {
                let s = (PI * r / period).sin();
                let q = 2.0 * s * s / (lengthscale * lengthscale);
                let k = amplitude * amplitude * (-q).exp();
                grad[0] = 2.0 * k;
                grad[1] = 2.0 * q * k;
                k
            }
            KernelSpec::RationalQuadratic {
                amplitude,
                lengthscale,
                shape,
            } => {
                let t = r * r / (2.0 * shape * lengthscale * lengthscale);
                let k = amplitude * amplitude * (1.0 + t).powf(-shape);
                grad[0] = 2.0 * k;
                grad[1] = 2.0 * shape * t / (1.0 + t) * k;
                grad[2] = shape * k * (t / (1.0 + t) - t.ln_1p());
                k
            }
            KernelSpec::WhiteNoise { noise_variance } => {
                let k = if r == 0.0 { noise_variance } else { 0.0 };
                grad[0] = k;
                k
            }
            KernelSpec::Sum(ref children) => {
                let mut offset = 0;
                let mut total = 0.0;
                for c in children {
                    let n = c.num_params();
                    total += c.eval_with_grad(r, &mut grad[offset..offset + n]);
                    offset += n;
                }
                total
            }
        }
    }

    /// Leaves in evaluation order (a leaf is its own single leaf).
    pub fn leaves(&self) -> Vec<&KernelSpec> {
        match self {
            KernelSpec::Sum(children) => children.iter().flat_map(|c| c.leaves()).collect(),
            leaf => vec![leaf],
        }
    }
}

/// Checked evaluation of `spec` at distance `r`.
pub fn kernel_eval(spec: &KernelSpec, r: f64) -> Result<f64> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::InvalidInput(format!(
            "kernel distance must be finite and nonnegative, got {r}"
        )));
    }
    Ok(spec.eval(r))
}

/// `K[i, j] = k(|x_i - x'_j|)`.
pub fn gram_matrix(spec: &KernelSpec, xs: &[f64], ys: &[f64]) -> Result<DMatrix<f64>> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InvalidInput(
            "gram matrix of an empty input set".into(),
        ));
    }
    if xs.iter().chain(ys).any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite kernel input".into()));
    }
    Ok(DMatrix::from_fn(xs.len(), ys.len(), |i, j| {
        spec.eval((xs[i] - ys[j]).abs())
    }))
}

/// Named leaves of the composite price/load kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LeafKind {
    SquaredExponential,
    Matern52,
    Periodic12,
    Periodic24,
    Periodic168,
    RationalQuadratic,
    WhiteNoise,
}

impl LeafKind {
    pub const ALL: [LeafKind; 7] = [
        LeafKind::SquaredExponential,
        LeafKind::Matern52,
        LeafKind::Periodic12,
        LeafKind::Periodic24,
        LeafKind::Periodic168,
        LeafKind::RationalQuadratic,
        LeafKind::WhiteNoise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LeafKind::SquaredExponential => "se",
            LeafKind::Matern52 => "mat52",
            LeafKind::Periodic12 => "per12",
            LeafKind::Periodic24 => "per24",
            LeafKind::Periodic168 => "per168",
            LeafKind::RationalQuadratic => "rq",
            LeafKind::WhiteNoise => "white",
        }
    }

    pub fn period(self) -> Option<f64> {
        match self {
            LeafKind::Periodic12 => Some(12.0),
            LeafKind::Periodic24 => Some(24.0),
            LeafKind::Periodic168 => Some(168.0),
            _ => None,
        }
    }

    pub fn is_periodic(self) -> bool {
        self.period().is_some()
    }
}

impl fmt::Display for LeafKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LeafKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LeafKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown kernel leaf '{s}'")))
    }
}

/// Initial hyperparameters of a composite leaf: amplitude, lengthscale and
/// (RQ only) shape. For the white-noise leaf only `amplitude` is used, as the
/// noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafInit {
    pub amplitude: f64,
    pub lengthscale: f64,
    pub shape: f64,
}

impl LeafInit {
    pub fn default_for(kind: LeafKind) -> Self {
        let (amplitude, lengthscale) = match kind {
            LeafKind::SquaredExponential => (1.0, 240.0),
            LeafKind::Matern52 => (0.5, 24.0),
            LeafKind::Periodic12 | LeafKind::Periodic24 | LeafKind::Periodic168 => (0.5, 1.0),
            LeafKind::RationalQuadratic => (0.5, 6.0),
            LeafKind::WhiteNoise => (0.01, 1.0),
        };
        LeafInit {
            amplitude,
            lengthscale,
            shape: 1.0,
        }
    }
}

/// Which leaves of the composite kernel are enabled, with their initial
/// hyperparameters. Periods are fixed at 12, 24 and 168 hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeConfig {
    pub leaves: Vec<(LeafKind, LeafInit)>,
}

impl Default for CompositeConfig {
    fn default() -> Self {
        CompositeConfig {
            leaves: LeafKind::ALL
                .into_iter()
                .map(|k| (k, LeafInit::default_for(k)))
                .collect(),
        }
    }
}

impl CompositeConfig {
    /// Default configuration with the given leaves removed.
    pub fn without(drop: &[LeafKind]) -> Self {
        let mut c = CompositeConfig::default();
        c.leaves.retain(|(k, _)| !drop.contains(k));
        c
    }

    pub fn set_init(&mut self, kind: LeafKind, init: LeafInit) {
        if let Some(slot) = self.leaves.iter_mut().find(|(k, _)| *k == kind) {
            slot.1 = init;
        }
    }
}

/// Builds the additive price/load kernel
/// `SE + Matern52 + Per12 + Per24 + Per168 + RQ + WhiteNoise`, minus any
/// ablated leaves.
pub fn composite_kernel(config: &CompositeConfig) -> Result<KernelSpec> {
    let mut seen = Vec::new();
    let mut leaves = Vec::with_capacity(config.leaves.len());
    for &(kind, init) in &config.leaves {
        if seen.contains(&kind) {
            return Err(Error::Config(format!("kernel leaf '{kind}' listed twice")));
        }
        seen.push(kind);
        let leaf = match kind {
            LeafKind::SquaredExponential => {
                KernelSpec::squared_exponential(init.amplitude, init.lengthscale)?
            }
            LeafKind::Matern52 => KernelSpec::matern52(init.amplitude, init.lengthscale)?,
            LeafKind::Periodic12 | LeafKind::Periodic24 | LeafKind::Periodic168 => {
                let period = kind.period().expect("periodic leaf");
                KernelSpec::periodic(init.amplitude, init.lengthscale, period)?
            }
            LeafKind::RationalQuadratic => {
                KernelSpec::rational_quadratic(init.amplitude, init.lengthscale, init.shape)?
            }
            LeafKind::WhiteNoise => KernelSpec::white_noise(init.amplitude)?,
        };
        leaves.push(leaf);
    }
    match leaves.len() {
        0 => Err(Error::Config(
            "kernel ablation removed every leaf; at least one must remain".into(),
        )),
        1 => Ok(leaves.pop().expect("one leaf")),
        _ => KernelSpec::sum(leaves),
    }
}

/// Intrinsic coregionalization: `B = W W^T + diag(kappa)` over `D` tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoregionalSpec {
    w: DMatrix<f64>,
    kappa: Vec<f64>,
}

impl CoregionalSpec {
    pub fn new(w: DMatrix<f64>, kappa: Vec<f64>) -> Result<Self> {
        if w.nrows() == 0 || w.ncols() == 0 {
            return Err(Error::Config(
                "coregionalization needs D >= 1 and rank >= 1".into(),
            ));
        }
        if kappa.len() != w.nrows() {
            return Err(Error::Config(format!(
                "kappa has {} entries for {} tasks",
                kappa.len(),
                w.nrows()
            )));
        }
        if let Some(v) = w.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidHyperparameter {
                name: "coreg.w".into(),
                value: *v,
            });
        }
        if let Some(v) = kappa.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidHyperparameter {
                name: "coreg.kappa".into(),
                value: *v,
            });
        }
        Ok(CoregionalSpec { w, kappa })
    }

    /// `B = I_D`: tasks are independent with unit scale.
    pub fn identity(num_tasks: usize) -> Self {
        CoregionalSpec {
            w: DMatrix::zeros(num_tasks, 1),
            kappa: vec![1.0; num_tasks],
        }
    }

    pub fn num_tasks(&self) -> usize {
        self.w.nrows()
    }

    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn b(&self) -> DMatrix<f64> {
        let mut b = &self.w * self.w.transpose();
        for (d, k) in self.kappa.iter().enumerate() {
            b[(d, d)] += k;
        }
        b
    }

    /// Parameters in optimizer order: `W` row-major, then `ln(kappa)`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for d in 0..self.num_tasks() {
            for r in 0..self.rank() {
                out.push(self.w[(d, r)]);
            }
        }
        out.extend(self.kappa.iter().map(|k| k.ln()));
        out
    }

    pub fn num_params(&self) -> usize {
        self.num_tasks() * (self.rank() + 1)
    }

    pub fn with_params(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != self.num_params() {
            return Err(Error::InvalidInput(
                "wrong coregional parameter count".into(),
            ));
        }
        let (d, r) = (self.num_tasks(), self.rank());
        let w = DMatrix::from_fn(d, r, |i, j| theta[i * r + j]);
        let kappa = theta[d * r..].iter().map(|t| t.exp()).collect();
        CoregionalSpec::new(w, kappa)
    }

    /// `dB[a, b] / dtheta_p` for every parameter `p` (same order as
    /// [`CoregionalSpec::params`]).
    pub fn b_gradients(&self) -> Vec<DMatrix<f64>> {
        let (d, r) = (self.num_tasks(), self.rank());
        let mut out = Vec::with_capacity(self.num_params());
        for c in 0..d {
            for q in 0..r {
                out.push(DMatrix::from_fn(d, d, |a, b| {
                    let mut v = 0.0;
                    if a == c {
                        v += self.w[(b, q)];
                    }
                    if b == c {
                        v += self.w[(a, q)];
                    }
                    v
                }));
            }
        }
        for c in 0..d {
            let mut m = DMatrix::zeros(d, d);
            m[(c, c)] = self.kappa[c];
            out.push(m);
        }
        out
    }
}

/// One multi-output input location: task index and time (hours).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskInput {
    pub task: usize,
    pub x: f64,
}

impl TaskInput {
    pub fn new(task: usize, x: f64) -> Self {
        TaskInput { task, x }
    }
}

/// Coregionalized Gram matrix: element `(i, j)` is
/// `B[task_i, task_j] * k(|x_i - x_j|)`. For task-major inputs this equals
/// `B ⊗ K`.
pub fn coregional_gram(
    coreg: &CoregionalSpec,
    spec: &KernelSpec,
    a: &[TaskInput],
    b: &[TaskInput],
) -> Result<DMatrix<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput(
            "gram matrix of an empty input set".into(),
        ));
    }
    let d = coreg.num_tasks();
    if let Some(p) = a.iter().chain(b).find(|p| p.task >= d) {
        return Err(Error::InvalidInput(format!(
            "task id {} out of range for {d} tasks",
            p.task
        )));
    }
    let bm = coreg.b();
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
        bm[(a[i].task, b[j].task)] * spec.eval((a[i].x - b[j].x).abs())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn se(s: f64, l: f64) -> KernelSpec {
        KernelSpec::squared_exponential(s, l).unwrap()
    }

    fn min_eig_ratio(m: &DMatrix<f64>) -> f64 {
        let eig = SymmetricEigen::new(m.clone());
        let min = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        min / m.trace()
    }

    #[test]
    fn se_values() {
        assert_eq!(kernel_eval(&se(1.0, 1.0), 0.0).unwrap(), 1.0);
        let v = kernel_eval(&se(2.0, 1.0), 1.0).unwrap();
        assert!((v - 4.0 * (-1.0f64).exp()).abs() < 1e-12);
        assert!((v - 1.47152).abs() < 1e-5);
    }

    #[test]
    fn periodic_at_full_period() {
        let k = KernelSpec::periodic(1.0, 1.0, 24.0).unwrap();
        assert!((k.eval(24.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matern_decays() {
        for &(s, l) in &[(1.0, 1.0), (3.0, 24.0), (0.1, 500.0)] {
            let k = KernelSpec::matern52(s, l).unwrap();
            assert!((k.eval(0.0) - s * s).abs() < 1e-12);
            assert!(k.eval(100.0 * l) < 1e-30);
        }
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(KernelSpec::squared_exponential(0.0, 1.0).is_err());
        assert!(KernelSpec::matern52(1.0, -1.0).is_err());
        assert!(KernelSpec::periodic(1.0, 1.0, f64::NAN).is_err());
        assert!(KernelSpec::rational_quadratic(1.0, 1.0, 0.0).is_err());
        assert!(KernelSpec::white_noise(-1e-3).is_err());
        assert!(KernelSpec::white_noise(0.0).is_ok());
        assert!(KernelSpec::sum(vec![se(1.0, 1.0)]).is_err());
        assert!(kernel_eval(&se(1.0, 1.0), f64::INFINITY).is_err());
        assert!(kernel_eval(&se(1.0, 1.0), f64::NAN).is_err());
    }

    #[test]
    fn white_noise_only_at_identity() {
        let w = KernelSpec::white_noise(0.3).unwrap();
        assert_eq!(w.eval(0.0), 0.3);
        assert_eq!(w.eval(1e-9), 0.0);
        assert_eq!(w.eval(1.0), 0.0);
    }

    #[test]
    fn gram_examples() {
        let g = gram_matrix(&se(1.0, 1.0), &[0.0], &[0.0]).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        let g = gram_matrix(&se(1.0, 1.0), &[0.0, 1.0], &[0.0, 1.0]).unwrap();
        let e = (-1.0f64).exp();
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(1, 1)], 1.0);
        assert!((g[(0, 1)] - e).abs() < 1e-15);
        assert!((g[(1, 0)] - e).abs() < 1e-15);
        assert!(gram_matrix(&se(1.0, 1.0), &[], &[0.0]).is_err());
    }

    #[test]
    fn composite_default_has_seven_leaves() {
        let k = composite_kernel(&CompositeConfig::default()).unwrap();
        let leaves = k.leaves();
        assert_eq!(leaves.len(), 7);
        let mut periods: Vec<f64> = leaves
            .iter()
            .filter_map(|l| match l {
                KernelSpec::Periodic { period, .. } => Some(*period),
                _ => None,
            })
            .collect();
        periods.sort_by(f64::total_cmp);
        assert_eq!(periods, vec![12.0, 24.0, 168.0]);
        assert_eq!(k.num_params(), 14);
    }

    #[test]
    fn composite_ablation() {
        let cfg = CompositeConfig::without(&[
            LeafKind::Periodic12,
            LeafKind::Periodic24,
            LeafKind::Periodic168,
        ]);
        let k = composite_kernel(&cfg).unwrap();
        let names: Vec<_> = k
            .leaves()
            .iter()
            .map(|l| match l {
                KernelSpec::SquaredExponential { .. } => "se",
                KernelSpec::Matern52 { .. } => "mat52",
                KernelSpec::RationalQuadratic { .. } => "rq",
                KernelSpec::WhiteNoise { .. } => "white",
                _ => "other",
            })
            .collect();
        assert_eq!(names, vec!["se", "mat52", "rq", "white"]);

        let only_se = CompositeConfig::without(&LeafKind::ALL[1..]);
        assert!(matches!(
            composite_kernel(&only_se).unwrap(),
            KernelSpec::SquaredExponential { .. }
        ));
        assert!(composite_kernel(&CompositeConfig::without(&LeafKind::ALL)).is_err());
    }

    #[test]
    fn composite_at_zero_is_sum_of_variances() {
        let cfg = CompositeConfig::default();
        let k = composite_kernel(&cfg).unwrap();
        let expected: f64 = cfg
            .leaves
            .iter()
            .map(|(kind, init)| match kind {
                LeafKind::WhiteNoise => init.amplitude,
                _ => init.amplitude * init.amplitude,
            })
            .sum();
        assert!((k.eval(0.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn composite_gram_is_psd_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = composite_kernel(&CompositeConfig::default()).unwrap();
        let xs: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..720.0)).collect();
        let g = gram_matrix(&k, &xs, &xs).unwrap();
        assert!(min_eig_ratio(&g) >= -1e-8);
    }

    #[test]
    fn log_param_roundtrip_and_names() {
        let k = composite_kernel(&CompositeConfig::default()).unwrap();
        let theta = k.log_params();
        assert_eq!(theta.len(), k.num_params());
        assert_eq!(k.param_names().len(), k.num_params());
        let back = k.with_log_params(&theta).unwrap();
        for r in [0.0, 0.5, 3.0, 30.0] {
            assert!((back.eval(r) - k.eval(r)).abs() < 1e-12);
        }
        assert!(k.with_log_params(&theta[1..]).is_err());
    }

    #[test]
    fn analytic_kernel_gradient_matches_finite_differences() {
        let k = KernelSpec::sum(vec![
            se(1.3, 7.0),
            KernelSpec::matern52(0.7, 3.0).unwrap(),
            KernelSpec::periodic(0.9, 1.2, 24.0).unwrap(),
            KernelSpec::rational_quadratic(1.1, 5.0, 0.8).unwrap(),
            KernelSpec::white_noise(0.2).unwrap(),
        ])
        .unwrap();
        let theta = k.log_params();
        let h = 1e-6;
        for &r in &[0.0, 0.7, 2.5, 11.0, 40.0] {
            let mut g = vec![0.0; theta.len()];
            k.eval_with_grad(r, &mut g);
            for p in 0..theta.len() {
                let mut tp = theta.clone();
                tp[p] += h;
                let mut tm = theta.clone();
                tm[p] -= h;
                let fd = (k.with_log_params(&tp).unwrap().eval(r)
                    - k.with_log_params(&tm).unwrap().eval(r))
                    / (2.0 * h);
                assert!(
                    (fd - g[p]).abs() < 1e-6 * (1.0 + fd.abs()),
                    "r={r} p={p} fd={fd} analytic={}",
                    g[p]
                );
            }
        }
    }

    #[test]
    fn coregional_identity_is_block_diagonal() {
        let k = se(1.0, 2.0);
        let pts: Vec<TaskInput> = (0..2)
            .flat_map(|t| (0..3).map(move |i| TaskInput::new(t, i as f64)))
            .collect();
        let g = coregional_gram(&CoregionalSpec::identity(2), &k, &pts, &pts).unwrap();
        for i in 0..3 {
            for j in 3..6 {
                assert_eq!(g[(i, j)], 0.0);
                assert_eq!(g[(j, i)], 0.0);
            }
        }
        assert!((g[(0, 1)] - k.eval(1.0)).abs() < 1e-15);
        assert!((g[(3, 4)] - k.eval(1.0)).abs() < 1e-15);
    }

    #[test]
    fn coregional_rank_one_ones() {
        let k = se(1.5, 1.0);
        let coreg =
            CoregionalSpec::new(DMatrix::from_vec(2, 1, vec![1.0, 1.0]), vec![0.0, 0.0]).unwrap();
        let pts = [TaskInput::new(0, 3.0), TaskInput::new(1, 3.0)];
        let g = coregional_gram(&coreg, &k, &pts, &pts).unwrap();
        let k0 = k.eval(0.0);
        assert!(g.iter().all(|v| (v - k0).abs() < 1e-15));
    }

    #[test]
    fn coregional_rejects_bad_task() {
        let k = se(1.0, 1.0);
        let pts = [TaskInput::new(2, 0.0)];
        assert!(coregional_gram(&CoregionalSpec::identity(2), &k, &pts, &pts).is_err());
    }

    #[test]
    fn coregional_matches_kronecker_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = composite_kernel(&CompositeConfig::default()).unwrap();
        let w = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let coreg = CoregionalSpec::new(w, vec![0.3, 0.1]).unwrap();
        let xs: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..200.0)).collect();
        let pts: Vec<TaskInput> = (0..2)
            .flat_map(|t| xs.iter().map(move |&x| TaskInput::new(t, x)))
            .collect();
        let g = coregional_gram(&coreg, &k, &pts, &pts).unwrap();
        let base = gram_matrix(&k, &xs, &xs).unwrap();
        let kron = coreg.b().kronecker(&base);
        assert!((g - kron).amax() < 1e-12);
        assert!(min_eig_ratio(&coregional_gram(&coreg, &k, &pts, &pts).unwrap()) >= -1e-8);
    }

    #[test]
    fn b_gradients_match_finite_differences() {
        let coreg =
            CoregionalSpec::new(DMatrix::from_vec(2, 1, vec![0.4, -1.2]), vec![0.3, 0.7]).unwrap();
        let theta = coreg.params();
        let grads = coreg.b_gradients();
        let h = 1e-6;
        for p in 0..theta.len() {
            let mut tp = theta.clone();
            tp[p] += h;
            let mut tm = theta.clone();
            tm[p] -= h;
            let fd = (coreg.with_params(&tp).unwrap().b() - coreg.with_params(&tm).unwrap().b())
                / (2.0 * h);
            assert!((fd - &grads[p]).amax() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn leaves_are_symmetric_in_inputs(x in -500.0..500.0f64, y in -500.0..500.0f64) {
            let k = composite_kernel(&CompositeConfig::default()).unwrap();
            let a = gram_matrix(&k, &[x], &[y]).unwrap()[(0, 0)];
            let b = gram_matrix(&k, &[y], &[x]).unwrap()[(0, 0)];
            prop_assert_eq!(a, b);
        }

        #[test]
        fn periodic_repeats(r in 0.0..1000.0f64, ell in 0.1..5.0f64, p in prop::sample::select(vec![12.0, 24.0, 168.0])) {
            let k = KernelSpec::periodic(1.0, ell, p).unwrap();
            prop_assert!((k.eval(r) - k.eval(r + p)).abs() < 1e-12);
        }

        #[test]
        fn rq_approaches_half_factor_se(r in 0.0..3.0f64, ell in 0.5..2.0f64, s in 0.5..2.0f64) {
            let rq = KernelSpec::rational_quadratic(s, ell, 1e6).unwrap();
            let half_se = s * s * (-(r * ell) * (r * ell) / (2.0 * ell * ell)).exp();
            prop_assert!((rq.eval(r * ell) - half_se).abs() < 1e-4);
        }

        #[test]
        fn sum_grams_are_psd(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = KernelSpec::sum(vec![
                se(rng.random_range(0.1..3.0), rng.random_range(0.5..50.0)),
                KernelSpec::matern52(rng.random_range(0.1..3.0), rng.random_range(0.5..50.0)).unwrap(),
                KernelSpec::periodic(rng.random_range(0.1..3.0), rng.random_range(0.3..3.0), 24.0).unwrap(),
            ]).unwrap();
            let xs: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..300.0)).collect();
            let g = gram_matrix(&k, &xs, &xs).unwrap();
            prop_assert!(min_eig_ratio(&g) >= -1e-8);
        }
    }
}
