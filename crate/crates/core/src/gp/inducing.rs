use super::TrainingSet;
use crate::error::{Error, Result};

/// Uniform-stride subset of the per-task hour grid: `m = round(s * n)` points
/// at indices `floor(i * n / m)`.
pub fn select_inducing(train: &TrainingSet, sparsity: f64) -> Result<Vec<f64>> {
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(Error::Config(format!("sparsity {sparsity} outside (0, 1]")));
    }
    let grid = train.task_inputs(0);
    let n = grid.len();
    let m = (sparsity * n as f64).round() as usize;
    if m == 0 {
        return Err(Error::Config(format!(
            "sparsity {sparsity} leaves no inducing inputs out of {n}"
        )));
    }
    Ok((0..m).map(|i| grid[i * n / m]).collect())
}
