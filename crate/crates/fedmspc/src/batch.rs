//! Batch-process extension: 3-way tensors, batch-wise unfolding, MPCA
//! fitting, and incomplete-batch online scoring.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    fit_pca_with_limit_mode, scores, EigenvalueScaling, LimitMode, ModelError, PcaModel,
};
use crate::numerics::{DataMatrix, NumericsError};

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("projection ill-conditioned at time step {time_step} (condition {condition:.3e} > {bound:.1e})")]
    IllConditionedProjection {
        time_step: usize,
        condition: f64,
        bound: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub const PROJECTION_CONDITION_BOUND: f64 = 1e12;

/// 3-way array indexed (batch, variable, time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchTensor {
    n_batches: usize,
    n_variables: usize,
    n_time: usize,
    data: Vec<f64>,
}

impl BatchTensor {
    pub fn new(
        n_batches: usize,
        n_variables: usize,
        n_time: usize,
        data: Vec<f64>,
    ) -> Result<Self, BatchError> {
        if n_batches == 0 || n_variables == 0 || n_time == 0 {
            return Err(BatchError::InvalidInput(format!(
                "tensor shape {n_batches}x{n_variables}x{n_time} must be positive in every axis"
            )));
        }
        if data.len() != n_batches * n_variables * n_time {
            return Err(BatchError::InvalidInput(format!(
                "expected {} entries, got {}",
                n_batches * n_variables * n_time,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(BatchError::InvalidInput("non-finite tensor entry".into()));
        }
        Ok(Self {
            n_batches,
            n_variables,
            n_time,
            data,
        })
    }

    pub fn zeros(n_batches: usize, n_variables: usize, n_time: usize) -> Self {
        Self {
            n_batches,
            n_variables,
            n_time,
            data: vec![0.0; n_batches * n_variables * n_time],
        }
    }

    pub fn n_batches(&self) -> usize {
        self.n_batches
    }

    pub fn n_variables(&self) -> usize {
        self.n_variables
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn get(&self, batch: usize, variable: usize, time: usize) -> f64 {
        self.data[(batch * self.n_variables + variable) * self.n_time + time]
    }

    pub fn set(&mut self, batch: usize, variable: usize, time: usize, value: f64) {
        self.data[(batch * self.n_variables + variable) * self.n_time + time] = value;
    }
}

/// Batch-wise unfolded 2-D view: one row per batch, columns ordered
/// time-major — all variables at time 0, then all variables at time 1, and
/// so on. `column_map` records (time, variable) per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnfoldedView {
    pub matrix: DataMatrix,
    pub column_map: Vec<(usize, usize)>,
}

pub fn unfold_batchwise(tensor: &BatchTensor) -> UnfoldedView {
    let (i_n, j_n, k_n) = (tensor.n_batches, tensor.n_variables, tensor.n_time);
    let mut matrix = DataMatrix::zeros(i_n, k_n * j_n);
    let mut column_map = Vec::with_capacity(k_n * j_n);
    for k in 0..k_n {
        for j in 0..j_n {
            column_map.push((k, j));
        }
    }
    for b in 0..i_n {
        for k in 0..k_n {
            for j in 0..j_n {
                matrix.set(b, k * j_n + j, tensor.get(b, j, k));
            }
        }
    }
    UnfoldedView { matrix, column_map }
}

/// Inverse of `unfold_batchwise` for a known (J, K) shape.
pub fn fold_batchwise(
    matrix: &DataMatrix,
    n_variables: usize,
    n_time: usize,
) -> Result<BatchTensor, BatchError> {
    if matrix.cols() != n_variables * n_time {
        return Err(BatchError::InvalidInput(format!(
            "matrix has {} columns, expected J*K = {}",
            matrix.cols(),
            n_variables * n_time
        )));
    }
    let mut tensor = BatchTensor::zeros(matrix.rows(), n_variables, n_time);
    for b in 0..matrix.rows() {
        for k in 0..n_time {
            for j in 0..n_variables {
                tensor.set(b, j, k, matrix.get(b, k * n_variables + j));
            }
        }
    }
    Ok(tensor)
}

/// PCA model over the unfolded matrix plus the batch geometry needed to fold
/// diagnosis output back to (variable, time).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpcaModel {
    pub pca: PcaModel,
    pub n_variables: usize,
    pub n_time: usize,
    pub column_map: Vec<(usize, usize)>,
}

pub fn fit_mpca(
    tensor: &BatchTensor,
    variance_target: f64,
    alpha: f64,
    scaling: EigenvalueScaling,
) -> Result<MpcaModel, BatchError> {
    fit_mpca_with_limit_mode(tensor, variance_target, alpha, scaling, LimitMode::Analytic)
}

pub fn fit_mpca_with_limit_mode(
    tensor: &BatchTensor,
    variance_target: f64,
    alpha: f64,
    scaling: EigenvalueScaling,
    limit_mode: LimitMode,
) -> Result<MpcaModel, BatchError> {
    let unfolded = unfold_batchwise(tensor);
    let pca = fit_pca_with_limit_mode(&unfolded.matrix, variance_target, alpha, scaling, limit_mode)?;
    Ok(MpcaModel {
        pca,
        n_variables: tensor.n_variables,
        n_time: tensor.n_time,
        column_map: unfolded.column_map,
    })
}

/// Least-squares scores for an in-progress batch observed through time step
/// `k` (1-based): t = x·Ṽ_r·(Ṽ_rᵀṼ_r)⁻¹ with Ṽ_r the first kJ rows of V_r.
/// The raw partial sample is standardized with the elapsed columns'
/// training statistics.
pub fn score_incomplete(
    model: &MpcaModel,
    x_partial: &[f64],
    k: usize,
) -> Result<Vec<f64>, BatchError> {
    if k == 0 || k > model.n_time {
        return Err(BatchError::InvalidInput(format!(
            "time step {k} outside 1..={}",
            model.n_time
        )));
    }
    let elapsed = k * model.n_variables;
    if x_partial.len() != elapsed {
        return Err(BatchError::InvalidInput(format!(
            "partial sample has {} entries, expected kJ = {elapsed}",
            x_partial.len()
        )));
    }
    if k == model.n_time {
        return Ok(scores(&model.pca, x_partial)?);
    }
    let z: Vec<f64> = x_partial
        .iter()
        .enumerate()
        .map(|(i, v)| (v - model.pca.mean[i]) / model.pca.scale[i])
        .collect();
    let truncated = model.pca.loadings.row_block(0, elapsed);
    incomplete_scores_from_block(&z, &truncated, k)
}

/// Shared Eq.-5 kernel: standardized partial sample against a truncated
/// loadings block. Also used by the federated incomplete-batch oracle tests.
pub fn incomplete_scores_from_block(
    z: &[f64],
    truncated_loadings: &DataMatrix,
    time_step: usize,
) -> Result<Vec<f64>, BatchError> {
    let gram = truncated_loadings.transpose().matmul(truncated_loadings);
    let condition = gram.condition_number()?;
    if condition > PROJECTION_CONDITION_BOUND {
        return Err(BatchError::IllConditionedProjection {
            time_step,
            condition,
            bound: PROJECTION_CONDITION_BOUND,
        });
    }
    let gram_inv = gram.try_inverse()?;
    let r = truncated_loadings.cols();
    // t = z · Ṽ · G⁻¹
    let mut zv = vec![0.0; r];
    for (j, slot) in zv.iter_mut().enumerate() {
        for (i, zi) in z.iter().enumerate() {
            *slot += zi * truncated_loadings.get(i, j);
        }
    }
    let mut t = vec![0.0; r];
    for (j, slot) in t.iter_mut().enumerate() {
        for (a, zva) in zv.iter().enumerate() {
            *slot += zva * gram_inv.get(a, j);
        }
    }
    Ok(t)
}
