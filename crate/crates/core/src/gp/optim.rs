//! Limited-memory BFGS with Armijo backtracking.

use crate::error::{Error, Result};
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the gradient infinity norm drops below this.
    pub grad_tol: f64,
    /// Stop when the relative decrease of f over an iteration drops below this.
    pub f_tol: f64,
    /// Largest infinity-norm step tried by the line search.
    pub max_step: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 8,
            max_iterations: 200,
            grad_tol: 1e-5,
            f_tol: 1e-9,
            max_step: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimizes `f`, which returns value and gradient or `None` where the
/// objective cannot be evaluated (treated as `+inf`).
pub fn minimize_lbfgs<F>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let mut evaluations = 1;
    let (mut fx, mut g) = f(x0)
        .filter(|(v, g)| v.is_finite() && g.iter().all(|x| x.is_finite()))
        .ok_or_else(|| Error::Numerical("objective not finite at the starting point".into()))?;
    let mut x = x0.to_vec();
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = inf_norm(&g) < opts.grad_tol;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        let norm = inf_norm(&dir);
        let mut step = if norm > opts.max_step {
            opts.max_step / norm
        } else {
            1.0
        };
        if history.is_empty() && norm > 1.0 {
            // no curvature yet: first step is at most unit length
            step = step.min(1.0 / norm);
        }

        let mut accepted = None;
        for _ in 0..40 {
            let xn: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            evaluations += 1;
            if let Some((fn_, gn)) = f(&xn) {
                if fn_.is_finite()
                    && gn.iter().all(|v| v.is_finite())
                    && fn_ <= fx + 1e-4 * step * slope
                {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let rel = (fx - fn_) / fx.abs().max(fn_.abs()).max(1.0);
        x = xn;
        fx = fn_;
        g = gn;
        converged = inf_norm(&g) < opts.grad_tol || rel < opts.f_tol;
    }
    Ok(LbfgsOutcome {
        grad_norm: inf_norm(&g),
        x,
        f: fx,
        iterations,
        evaluations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        Some((f, g))
    }

    #[test]
    fn solves_rosenbrock() {
        let opts = LbfgsOptions {
            max_iterations: 500,
            f_tol: 0.0,
            grad_tol: 1e-8,
            ..Default::default()
        };
        let out = minimize_lbfgs(rosenbrock, &[-1.2, 1.0], &opts).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn quadratic_in_few_iterations() {
        let f = |x: &[f64]| {
            let v = x
                .iter()
                .enumerate()
                .map(|(i, v)| (i + 1) as f64 * v * v)
                .sum();
            Some((
                v,
                x.iter()
                    .enumerate()
                    .map(|(i, v)| 2.0 * (i + 1) as f64 * v)
                    .collect(),
            ))
        };
        let out = minimize_lbfgs(f, &[1.0, -1.0, 0.5, 2.0], &LbfgsOptions::default()).unwrap();
        assert!(out.f < 1e-10);
    }

    #[test]
    fn failed_evaluations_are_avoided() {
        // undefined for x > 1
        let f = |x: &[f64]| {
            if x[0] > 1.0 {
                None
            } else {
                Some(((x[0] - 0.9).powi(2), vec![2.0 * (x[0] - 0.9)]))
            }
        };
        let out = minimize_lbfgs(f, &[-3.0], &LbfgsOptions::default()).unwrap();
        assert!((out.x[0] - 0.9).abs() < 1e-4);
        assert!(minimize_lbfgs(f, &[2.0], &LbfgsOptions::default()).is_err());
    }
}
