//! Gram assembly for a fixed pair of input sets whose hyperparameters change
//! between evaluations. Distances are bucketed once; hour-grid inputs share a
//! few thousand distinct lags, so every kernel evaluation afterwards is a
//! table lookup.

use crate::kernels::{CoregionalSpec, KernelSpec, TaskInput};
use nalgebra::DMatrix;
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub(crate) struct PairLags {
    nrows: usize,
    ncols: usize,
    row_tasks: Vec<usize>,
    col_tasks: Vec<usize>,
    /// Column-major lag index per `(i, j)`.
    index: Vec<u32>,
    lags: Vec<f64>,
}

impl PairLags {
    pub fn new(rows: &[TaskInput], cols: &[TaskInput]) -> Self {
        let mut lookup: HashMap<u64, u32> = HashMap::new();
        let mut lags = Vec::new();
        let mut index = Vec::with_capacity(rows.len() * cols.len());
        for c in cols {
            for r in rows {
                let d = (r.x - c.x).abs();
                let id = *lookup.entry(d.to_bits()).or_insert_with(|| {
                    lags.push(d);
                    (lags.len() - 1) as u32
                });
                index.push(id);
            }
        }
        PairLags {
            nrows: rows.len(),
            ncols: cols.len(),
            row_tasks: rows.iter().map(|p| p.task).collect(),
            col_tasks: cols.iter().map(|p| p.task).collect(),
            index,
            lags,
        }
    }

    pub fn num_lags(&self) -> usize {
        self.lags.len()
    }

    #[cfg(test)]
    pub fn kernel_values(&self, kernel: &KernelSpec) -> Vec<f64> {
        self.lags.iter().map(|&r| kernel.eval(r)).collect()
    }

    /// Kernel values and log-parameter gradients; gradients are stored
    /// lag-major (`grads[lag * p + k]`).
    pub fn kernel_values_and_grads(&self, kernel: &KernelSpec) -> (Vec<f64>, Vec<f64>) {
        let p = kernel.num_params();
        let mut grads = vec![0.0; self.lags.len() * p];
        let values = self
            .lags
            .iter()
            .enumerate()
            .map(|(l, &r)| kernel.eval_with_grad(r, &mut grads[l * p..(l + 1) * p]))
            .collect();
        (values, grads)
    }

    pub fn gram(&self, values: &[f64], b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        let data = out.as_mut_slice();
        for j in 0..self.ncols {
            let tj = self.col_tasks[j];
            let col = &mut data[j * self.nrows..(j + 1) * self.nrows];
            let idx = &self.index[j * self.nrows..(j + 1) * self.nrows];
            for i in 0..self.nrows {
                col[i] = b[(self.row_tasks[i], tj)] * values[idx[i] as usize];
            }
        }
        out
    }

    /// Sums `weights[i, j]` into buckets keyed by `(task_i, task_j, lag)`,
    /// laid out as `((ta * d) + tb) * num_lags + lag`.
    pub fn reduce(&self, weights: &DMatrix<f64>, num_tasks: usize) -> Vec<f64> {
        debug_assert_eq!(weights.shape(), (self.nrows, self.ncols));
        let nl = self.lags.len();
        let mut out = vec![0.0; num_tasks * num_tasks * nl];
        let data = weights.as_slice();
        for j in 0..self.ncols {
            let tj = self.col_tasks[j];
            let col = &data[j * self.nrows..(j + 1) * self.nrows];
            let idx = &self.index[j * self.nrows..(j + 1) * self.nrows];
            for i in 0..self.nrows {
                let bucket = (self.row_tasks[i] * num_tasks + tj) * nl + idx[i] as usize;
                out[bucket] += col[i];
            }
        }
        out
    }
}

/// Contracts bucketed weights against the derivative of the coregionalized
/// covariance, adding into `grad` laid out as `[kernel..., coreg...]`.
pub(crate) fn accumulate_gradient(
    buckets: &[f64],
    num_lags: usize,
    values: &[f64],
    kernel_grads: &[f64],
    coreg: &CoregionalSpec,
    b: &DMatrix<f64>,
    b_grads: &[DMatrix<f64>],
    grad: &mut [f64],
) {
    let d = coreg.num_tasks();
    let pk = kernel_grads.len() / num_lags.max(1);
    // Per-lag weights after contracting tasks with B.
    let mut per_lag = vec![0.0; num_lags];
    // Per task-pair weights after contracting lags with k.
    let mut per_pair = vec![0.0; d * d];
    for ta in 0..d {
        for tb in 0..d {
            let bab = b[(ta, tb)];
            let slice = &buckets[(ta * d + tb) * num_lags..(ta * d + tb + 1) * num_lags];
            let mut s = 0.0;
            for (l, &w) in slice.iter().enumerate() {
                per_lag[l] += w * bab;
                s += w * values[l];
            }
            per_pair[ta * d + tb] = s;
        }
    }
    for (l, &w) in per_lag.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let g = &kernel_grads[l * pk..(l + 1) * pk];
        for k in 0..pk {
            grad[k] += w * g[k];
        }
    }
    for (q, db) in b_grads.iter().enumerate() {
        let mut s = 0.0;
        for ta in 0..d {
            for tb in 0..d {
                s += per_pair[ta * d + tb] * db[(ta, tb)];
            }
        }
        grad[pk + q] += s;
    }
}
