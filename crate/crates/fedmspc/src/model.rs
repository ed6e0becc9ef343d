//! Centralized PCA-based process monitoring: model fitting, scores, T² and Q
//! statistics, analytic control limits, and contribution decompositions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{
    column_stats, f_quantile, normal_quantile, svd, DataMatrix, NumericsError,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("column {column} has zero variance; drop it before fitting")]
    ZeroVarianceColumn { column: usize },
    #[error("control limit unavailable: {0}")]
    ControlLimit(String),
    #[error("degenerate model: {0}")]
    DegenerateModel(String),
    #[error("Q-limit approximation outside its validity regime (h0 = {h0}); fall back to grid-searched limits")]
    QLimitInvalid { h0: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("persistence error: {0}")]
    Persistence(String),
}

/// Eigenvalue convention for T² and the Q limit: `SigmaSquared` uses Λ = Σ²
/// as printed in the monitoring equations; `Covariance` uses Σ²/(m−1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenvalueScaling {
    SigmaSquared,
    Covariance,
}

impl EigenvalueScaling {
    pub fn eigenvalue(&self, sigma: f64, n_train_samples: usize) -> f64 {
        match self {
            EigenvalueScaling::SigmaSquared => sigma * sigma,
            EigenvalueScaling::Covariance => sigma * sigma / (n_train_samples as f64 - 1.0),
        }
    }
}

pub const MODEL_FORMAT: &str = "fedmspc-model-v1";

/// Fitted monitoring model. Immutable after fit; scoring operations are pure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    /// Retained loadings V_r, one row per variable, orthonormal columns.
    pub loadings: DataMatrix,
    /// Full thin spectrum, descending, length min(m, n).
    pub singular_values: Vec<f64>,
    pub n_components: usize,
    pub n_train_samples: usize,
    pub n_variables: usize,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub t2_limit: f64,
    pub q_limit: f64,
    pub alpha: f64,
    pub eigenvalue_scaling: EigenvalueScaling,
}

/// Per-sample monitoring outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonitoringResult {
    pub scores: Vec<f64>,
    pub t2: f64,
    pub q: f64,
    pub t2_contrib: Vec<f64>,
    pub q_contrib: Vec<f64>,
    pub residual: Vec<f64>,
    pub is_fault: bool,
}

/// Q control limit outcome: zero with `degenerate` set when the residual
/// spectrum is empty (perfect low-rank model).
#[derive(Debug, Clone, Copy)]
pub struct QLimit {
    pub value: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitMode {
    /// Analytic limits from the F-distribution and the residual-spectrum
    /// approximation.
    Analytic,
    /// Limits deferred to later calibration (grid search); set to +∞ so no
    /// sample is flagged until calibrated.
    Deferred,
}

/// Smallest r with cumulative σ² fraction at least `variance_target`.
/// Shared verbatim by the federated holders, who pick r from the broadcast
/// spectrum.
pub fn select_component_count(singular_values: &[f64], variance_target: f64) -> usize {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total <= 0.0 {
        return 1;
    }
    let mut acc = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        acc += s * s;
        if acc / total >= variance_target {
            return i + 1;
        }
    }
    singular_values.len()
}

pub fn standardize_sample(x: &[f64], mean: &[f64], scale: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(mean.iter().zip(scale.iter()))
        .map(|(v, (m, s))| (v - m) / s)
        .collect()
}

pub fn fit_pca(
    x_train: &DataMatrix,
    variance_target: f64,
    alpha: f64,
    scaling: EigenvalueScaling,
) -> Result<PcaModel, ModelError> {
    fit_pca_with_limit_mode(x_train, variance_target, alpha, scaling, LimitMode::Analytic)
}

pub fn fit_pca_with_limit_mode(
    x_train: &DataMatrix,
    variance_target: f64,
    alpha: f64,
    scaling: EigenvalueScaling,
    limit_mode: LimitMode,
) -> Result<PcaModel, ModelError> {
    if x_train.rows() < 2 {
        return Err(ModelError::InvalidInput(format!(
            "need at least 2 training samples, got {}",
            x_train.rows()
        )));
    }
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(ModelError::InvalidInput(format!(
            "variance target {variance_target} outside (0, 1]"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ModelError::InvalidInput(format!(
            "alpha {alpha} outside (0, 1)"
        )));
    }
    let (mean, scale) = column_stats(x_train);
    if let Some(column) = scale.iter().position(|s| *s < 1e-12) {
        return Err(ModelError::ZeroVarianceColumn { column });
    }

    let m = x_train.rows();
    let n = x_train.cols();
    let mut standardized = DataMatrix::zeros(m, n);
    for r in 0..m {
        for c in 0..n {
            standardized.set(r, c, (x_train.get(r, c) - mean[c]) / scale[c]);
        }
    }

    let decomposition = svd(&standardized)?;
    let n_components = select_component_count(&decomposition.singular_values, variance_target);
    let loadings = decomposition.vt.row_block(0, n_components).transpose();

    let (t2_limit, q_limit) = match limit_mode {
        LimitMode::Analytic => {
            let t2 = t2_control_limit(m, n_components, alpha)?;
            let q = q_control_limit(&decomposition.singular_values, n_components, alpha, m, scaling)?;
            (t2, q.value)
        }
        LimitMode::Deferred => (f64::INFINITY, f64::INFINITY),
    };

    Ok(PcaModel {
        loadings,
        singular_values: decomposition.singular_values,
        n_components,
        n_train_samples: m,
        n_variables: n,
        mean,
        scale,
        t2_limit,
        q_limit,
        alpha,
        eigenvalue_scaling: scaling,
    })
}

/// Projection of a raw sample onto the retained components:
/// standardize(x) · V_r.
pub fn scores(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>, ModelError> {
    if x.len() != model.n_variables {
        return Err(ModelError::InvalidInput(format!(
            "sample has {} variables, model expects {}",
            x.len(),
            model.n_variables
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::InvalidInput("non-finite sample entry".into()));
    }
    let z = standardize_sample(x, &model.mean, &model.scale);
    Ok(project(&z, &model.loadings))
}

fn project(z: &[f64], loadings: &DataMatrix) -> Vec<f64> {
    let r = loadings.cols();
    let mut out = vec![0.0; r];
    for (j, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, zi) in z.iter().enumerate() {
            acc += zi * loadings.get(i, j);
        }
        *slot = acc;
    }
    out
}

pub fn hotelling_t2(model: &PcaModel, scores: &[f64]) -> Result<f64, ModelError> {
    if scores.len() != model.n_components {
        return Err(ModelError::InvalidInput(format!(
            "got {} scores, model retains {} components",
            scores.len(),
            model.n_components
        )));
    }
    let mut t2 = 0.0;
    for (j, t) in scores.iter().enumerate() {
        let sigma = model.singular_values[j];
        if sigma <= 0.0 {
            return Err(ModelError::DegenerateModel(format!(
                "singular value {j} is zero"
            )));
        }
        t2 += t * t / model.eigenvalue_scaling.eigenvalue(sigma, model.n_train_samples);
    }
    Ok(t2)
}

/// Squared prediction error and the residual it sums:
/// e = x_s − x_s·V_r·V_rᵀ on the standardized sample, Q = e·eᵀ.
pub fn q_statistic(model: &PcaModel, x: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
    let t = scores(model, x)?;
    let z = standardize_sample(x, &model.mean, &model.scale);
    let residual = residual_from_scores(&z, &t, &model.loadings);
    let q = residual.iter().map(|e| e * e).sum();
    Ok((q, residual))
}

pub fn residual_from_scores(z: &[f64], scores: &[f64], loadings: &DataMatrix) -> Vec<f64> {
    (0..z.len())
        .map(|i| {
            let mut recon = 0.0;
            for (j, t) in scores.iter().enumerate() {
                recon += t * loadings.get(i, j);
            }
            z[i] - recon
        })
        .collect()
}

/// T² upper control limit r(m−1)/(m−r) · F_{r, m−r, α}.
pub fn t2_control_limit(m: usize, r: usize, alpha: f64) -> Result<f64, ModelError> {
    if r == 0 {
        return Err(ModelError::InvalidInput("r must be >= 1".into()));
    }
    if m <= r {
        return Err(ModelError::ControlLimit(format!(
            "m = {m} <= r = {r}: F-distribution degrees of freedom invalid"
        )));
    }
    let f = f_quantile(r, m - r, alpha)?;
    Ok(r as f64 * (m as f64 - 1.0) / (m as f64 - r as f64) * f)
}

/// Q upper control limit from the residual-spectrum approximation.
pub fn q_control_limit(
    singular_values: &[f64],
    r: usize,
    alpha: f64,
    m: usize,
    scaling: EigenvalueScaling,
) -> Result<QLimit, ModelError> {
    let eigenvalues: Vec<f64> = singular_values
        .iter()
        .map(|s| scaling.eigenvalue(*s, m))
        .collect();
    let l = eigenvalues.iter().filter(|v| **v > 1e-12).count();
    if r >= l {
        // Perfect low-rank model: empty residual spectrum.
        return Ok(QLimit {
            value: 0.0,
            degenerate: true,
        });
    }
    let residual = &eigenvalues[r..l];
    let theta1: f64 = residual.iter().sum();
    let theta2: f64 = residual.iter().map(|v| v * v).sum();
    let theta3: f64 = residual.iter().map(|v| v * v * v).sum();
    if theta1 <= 0.0 {
        return Ok(QLimit {
            value: 0.0,
            degenerate: true,
        });
    }
    let h0 = 1.0 - 2.0 * theta1 * theta3 / (3.0 * theta2 * theta2);
    if h0 <= 0.0 {
        return Err(ModelError::QLimitInvalid { h0 });
    }
    let z = normal_quantile(alpha)?;
    let base = 1.0 - theta2 * h0 * (1.0 - h0) / (theta1 * theta1)
        + z * (2.0 * theta2 * h0 * h0).sqrt() / theta1;
    if base <= 0.0 {
        return Err(ModelError::QLimitInvalid { h0 });
    }
    Ok(QLimit {
        value: theta1 * base.powf(1.0 / h0),
        degenerate: false,
    })
}

/// Per-variable T² decomposition t_r · diag(σ₁..σ_r)⁻¹ · V_rᵀ.
pub fn t2_contributions(model: &PcaModel, scores: &[f64]) -> Result<Vec<f64>, ModelError> {
    if scores.len() != model.n_components {
        return Err(ModelError::InvalidInput(format!(
            "got {} scores, model retains {} components",
            scores.len(),
            model.n_components
        )));
    }
    contributions_from_blocks(scores, &model.singular_values, &model.loadings)
        .map_err(|msg| ModelError::DegenerateModel(msg))
}

/// Shared kernel for centralized and per-holder contribution blocks.
pub fn contributions_from_blocks(
    scores: &[f64],
    singular_values: &[f64],
    loadings_block: &DataMatrix,
) -> Result<Vec<f64>, String> {
    for (j, sigma) in singular_values.iter().take(scores.len()).enumerate() {
        if *sigma <= 0.0 {
            return Err(format!("singular value {j} is zero"));
        }
    }
    Ok((0..loadings_block.rows())
        .map(|i| {
            let mut acc = 0.0;
            for (j, t) in scores.iter().enumerate() {
                acc += t / singular_values[j] * loadings_block.get(i, j);
            }
            acc
        })
        .collect())
}

/// Element-wise squared residual.
pub fn q_contributions(residual: &[f64]) -> Vec<f64> {
    residual.iter().map(|e| e * e).collect()
}

/// Full monitoring pass for one raw sample.
pub fn monitor_sample(model: &PcaModel, x: &[f64]) -> Result<MonitoringResult, ModelError> {
    let t = scores(model, x)?;
    let t2 = hotelling_t2(model, &t)?;
    let (q, residual) = q_statistic(model, x)?;
    let t2_contrib = t2_contributions(model, &t)?;
    let q_contrib = q_contributions(&residual);
    let is_fault = t2 > model.t2_limit || q > model.q_limit;
    Ok(MonitoringResult {
        scores: t,
        t2,
        q,
        t2_contrib,
        q_contrib,
        residual,
        is_fault,
    })
}

impl PcaModel {
    /// Self-describing JSON document, version-tagged `fedmspc-model-v1`.
    pub fn to_json(&self) -> Result<String, ModelError> {
        let mut value = serde_json::to_value(self)
            .map_err(|e| ModelError::Persistence(e.to_string()))?;
        value
            .as_object_mut()
            .expect("model serializes to an object")
            .insert("format".into(), serde_json::Value::String(MODEL_FORMAT.into()));
        serde_json::to_string_pretty(&value).map_err(|e| ModelError::Persistence(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ModelError::Persistence(e.to_string()))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| ModelError::Persistence("model document is not an object".into()))?;
        match obj.remove("format") {
            Some(serde_json::Value::String(tag)) if tag == MODEL_FORMAT => {}
            other => {
                return Err(ModelError::Persistence(format!(
                    "expected format tag {MODEL_FORMAT:?}, found {other:?}"
                )))
            }
        }
        serde_json::from_value(value).map_err(|e| ModelError::Persistence(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::generate_orthogonal;
    use approx::assert_abs_diff_eq;

    /// 6x4 training matrix with mean-zero columns of equal norm and singular
    /// values proportional to {2, 1, 1, 0}, so standardization rescales the
    /// spectrum uniformly and the explained-variance fractions stay
    /// 4/6, 5/6, 6/6.
    fn constructed_training_matrix() -> DataMatrix {
        let raw = DataMatrix::from_row_major(
            6,
            4,
            &[
                0.8, -0.3, 1.1, 0.4, -0.5, 0.9, 0.2, -1.2, 1.3, 0.1, -0.7, 0.6, -0.2, -1.1, 0.5,
                0.9, 0.4, 0.8, -1.3, 0.2, -0.9, 0.3, 0.6, -0.8,
            ],
        )
        .unwrap();
        // Center columns, then orthonormalize: the QR factor keeps columns
        // orthogonal to the all-ones vector.
        let (means, _) = column_stats(&raw);
        let mut centered = raw.clone();
        for r in 0..6 {
            for c in 0..4 {
                centered.set(r, c, raw.get(r, c) - means[c]);
            }
        }
        let qr = centered.as_dmatrix().clone().qr();
        let u = qr.q();

        let sigma = [2.0, 1.0, 1.0, 0.0];
        let hadamard = DataMatrix::from_row_major(
            4,
            4,
            &[
                0.5, 0.5, 0.5, 0.5, 0.5, -0.5, 0.5, -0.5, 0.5, 0.5, -0.5, -0.5, 0.5, -0.5, -0.5,
                0.5,
            ],
        )
        .unwrap();
        let mut scaled = DataMatrix::zeros(6, 4);
        for r in 0..6 {
            for c in 0..4 {
                scaled.set(r, c, u[(r, c)] * sigma[c]);
            }
        }
        scaled.matmul(&hadamard.transpose())
    }

    fn simple_model() -> PcaModel {
        let x = DataMatrix::from_rows(&[
            vec![1.0, 0.1, -0.2],
            vec![-0.8, 0.9, 0.3],
            vec![0.4, -1.1, 0.8],
            vec![-0.3, 0.5, -1.2],
            vec![1.2, -0.4, 0.6],
            vec![-1.5, 0.0, -0.3],
            vec![0.7, 0.8, 0.1],
            vec![-0.2, -0.9, -0.4],
        ])
        .unwrap();
        fit_pca(&x, 0.95, 0.05, EigenvalueScaling::SigmaSquared).unwrap()
    }

    #[test]
    fn single_direction_needs_one_component() {
        // Rank-1 signal plus distinct column scales.
        let mut rows = Vec::new();
        let direction = [1.0, -2.0, 0.5, 3.0];
        for i in 0..8 {
            let t = (i as f64 - 3.5) * 0.7;
            rows.push(direction.iter().map(|d| d * t).collect::<Vec<_>>());
        }
        let x = DataMatrix::from_rows(&rows).unwrap();
        let model = fit_pca(&x, 0.9, 0.05, EigenvalueScaling::SigmaSquared).unwrap();
        assert_eq!(model.n_components, 1);
    }

    #[test]
    fn constructed_spectrum_selects_three_components() {
        let x = constructed_training_matrix();
        let model = fit_pca(&x, 0.9, 0.05, EigenvalueScaling::SigmaSquared).unwrap();
        assert_eq!(model.n_components, 3);
        let sv = &model.singular_values;
        let total: f64 = sv.iter().map(|s| s * s).sum();
        assert_abs_diff_eq!(sv[0] * sv[0] / total, 4.0 / 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            (sv[0] * sv[0] + sv[1] * sv[1]) / total,
            5.0 / 6.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn loadings_are_orthonormal() {
        let model = simple_model();
        let vtv = model.loadings.transpose().matmul(&model.loadings);
        assert!(vtv.max_abs_diff(&DataMatrix::identity(model.n_components)) < 1e-8);
    }

    #[test]
    fn zero_variance_column_named() {
        let x = DataMatrix::from_rows(&[
            vec![1.0, 5.0, 2.0],
            vec![2.0, 5.0, 1.0],
            vec![3.0, 5.0, 0.5],
        ])
        .unwrap();
        match fit_pca(&x, 0.9, 0.05, EigenvalueScaling::SigmaSquared) {
            Err(ModelError::ZeroVarianceColumn { column }) => assert_eq!(column, 1),
            other => panic!("expected zero-variance error, got {other:?}"),
        }
    }

    #[test]
    fn scores_at_training_mean_are_zero() {
        let model = simple_model();
        let t = scores(&model, &model.mean.clone()).unwrap();
        assert!(t.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn scores_canonical_projection() {
        let mut model = simple_model();
        model.loadings = DataMatrix::from_row_major(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        model.n_components = 2;
        model.mean = vec![0.0; 3];
        model.scale = vec![1.0; 3];
        let t = scores(&model, &[0.3, -0.7, 9.9]).unwrap();
        assert_eq!(t, vec![0.3, -0.7]);
    }

    #[test]
    fn scores_match_dot_product_oracle() {
        let model = simple_model();
        let x = vec![0.25, -0.6, 1.4];
        let got = scores(&model, &x).unwrap();
        let z = standardize_sample(&x, &model.mean, &model.scale);
        for j in 0..model.n_components {
            let mut expect = 0.0;
            for (i, zi) in z.iter().enumerate() {
                expect += zi * model.loadings.get(i, j);
            }
            assert_abs_diff_eq!(got[j], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn scores_length_mismatch_rejected() {
        let model = simple_model();
        assert!(matches!(
            scores(&model, &[1.0, 2.0]),
            Err(ModelError::InvalidInput(_))
        ));
    }

    #[test]
    fn t2_hand_arithmetic() {
        let mut model = simple_model();
        model.n_components = 2;
        model.singular_values = vec![2.0, 1.0, 0.5];
        model.eigenvalue_scaling = EigenvalueScaling::SigmaSquared;
        // lambda = (4, 1), scores = (2, 3) -> 1 + 9 = 10
        assert_abs_diff_eq!(hotelling_t2(&model, &[2.0, 3.0]).unwrap(), 10.0, epsilon = 1e-12);
        model.singular_values = vec![1.0, 1.0, 0.5];
        assert_abs_diff_eq!(hotelling_t2(&model, &[1.0, 1.0]).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(hotelling_t2(&model, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn t2_degenerate_sigma_rejected() {
        let mut model = simple_model();
        model.n_components = 2;
        model.singular_values = vec![1.0, 0.0, 0.0];
        assert!(matches!(
            hotelling_t2(&model, &[1.0, 1.0]),
            Err(ModelError::DegenerateModel(_))
        ));
    }

    #[test]
    fn q_statistic_hand_case() {
        let mut model = simple_model();
        model.loadings = DataMatrix::from_row_major(2, 1, &[1.0, 0.0]).unwrap();
        model.n_components = 1;
        model.n_variables = 2;
        model.mean = vec![0.0; 2];
        model.scale = vec![1.0; 2];
        let (q, residual) = q_statistic(&model, &[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(residual[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(residual[1], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q, 16.0, epsilon = 1e-12);
    }

    #[test]
    fn q_zero_for_in_span_sample() {
        let model = simple_model();
        // Build a raw sample whose standardized form lies in span(V_r):
        // z = V_r · y, x = z * scale + mean.
        let y = vec![0.7, -0.4];
        let mut x = vec![0.0; model.n_variables];
        for i in 0..model.n_variables {
            let mut z = 0.0;
            for (j, yj) in y.iter().take(model.n_components).enumerate() {
                z += model.loadings.get(i, j) * yj;
            }
            x[i] = z * model.scale[i] + model.mean[i];
        }
        let (q, _) = q_statistic(&model, &x).unwrap();
        assert!(q < 1e-16, "q = {q}");
    }

    #[test]
    fn q_matches_reconstruction_oracle() {
        let model = simple_model();
        let x = vec![0.9, 0.2, -1.3];
        let (q, _) = q_statistic(&model, &x).unwrap();
        // Independent reconstruction: z - V (Vᵀ z) with explicit loops.
        let z = standardize_sample(&x, &model.mean, &model.scale);
        let mut t = vec![0.0; model.n_components];
        for (j, tj) in t.iter_mut().enumerate() {
            for (i, zi) in z.iter().enumerate() {
                *tj += zi * model.loadings.get(i, j);
            }
        }
        let mut expect = 0.0;
        for (i, zi) in z.iter().enumerate() {
            let mut recon = 0.0;
            for (j, tj) in t.iter().enumerate() {
                recon += tj * model.loadings.get(i, j);
            }
            expect += (zi - recon) * (zi - recon);
        }
        assert_abs_diff_eq!(q, expect, epsilon = 1e-10);
    }

    #[test]
    fn t2_limit_approaches_chi_square() {
        // F_{1, m-1} -> chi²₁ as m grows; chi²₁(0.05) = 3.841459.
        let limit = t2_control_limit(100_000, 1, 0.05).unwrap();
        assert!((limit - 3.8415).abs() < 1e-3, "limit = {limit}");
    }

    #[test]
    fn t2_limit_composes_with_f_quantile() {
        let limit = t2_control_limit(12, 2, 0.05).unwrap();
        let expect = 2.0 * 11.0 / 10.0 * f_quantile(2, 10, 0.05).unwrap();
        assert_abs_diff_eq!(limit, expect, epsilon = 1e-12);
    }

    #[test]
    fn t2_limit_monotone_in_alpha() {
        let strict = t2_control_limit(30, 3, 0.01).unwrap();
        let loose = t2_control_limit(30, 3, 0.10).unwrap();
        assert!(strict > loose);
    }

    #[test]
    fn t2_limit_requires_m_greater_than_r() {
        assert!(matches!(
            t2_control_limit(3, 3, 0.05),
            Err(ModelError::ControlLimit(_))
        ));
    }

    #[test]
    fn q_limit_degenerate_when_residual_empty() {
        let q = q_control_limit(&[2.0, 1.0, 0.0, 0.0], 2, 0.05, 10, EigenvalueScaling::SigmaSquared)
            .unwrap();
        assert_eq!(q.value, 0.0);
        assert!(q.degenerate);
    }

    #[test]
    fn q_limit_unit_residual_spectrum() {
        // Residual eigenvalues {1,1,1}: theta = (3,3,3), h0 = 1/3.
        let sigma = [10.0, 1.0, 1.0, 1.0];
        let q = q_control_limit(&sigma, 1, 0.05, 50, EigenvalueScaling::SigmaSquared).unwrap();
        assert!(!q.degenerate);
        // Independent evaluation of the same closed form.
        let z = normal_quantile(0.05).unwrap();
        let (t1, t2, h0) = (3.0_f64, 3.0_f64, 1.0_f64 / 3.0);
        let expect =
            t1 * (1.0 - t2 * h0 * (1.0 - h0) / (t1 * t1) + z * (2.0 * t2 * h0 * h0).sqrt() / t1)
                .powf(1.0 / h0);
        assert_abs_diff_eq!(q.value, expect, epsilon = 1e-12);
    }

    #[test]
    fn q_limit_monotone_in_alpha() {
        let sigma = [5.0, 2.0, 1.0, 0.7, 0.3];
        let strict = q_control_limit(&sigma, 2, 0.01, 40, EigenvalueScaling::SigmaSquared)
            .unwrap()
            .value;
        let loose = q_control_limit(&sigma, 2, 0.10, 40, EigenvalueScaling::SigmaSquared)
            .unwrap()
            .value;
        assert!(strict > loose);
    }

    #[test]
    fn contributions_zero_scores() {
        let model = simple_model();
        let c = t2_contributions(&model, &vec![0.0; model.n_components]).unwrap();
        assert!(c.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn contributions_identity_loadings() {
        let mut model = simple_model();
        model.loadings = DataMatrix::from_row_major(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        model.n_components = 2;
        model.singular_values = vec![1.0, 1.0, 1.0];
        let c = t2_contributions(&model, &[0.4, -0.9]).unwrap();
        assert_eq!(c, vec![0.4, -0.9, 0.0]);
    }

    #[test]
    fn contributions_match_triple_product_oracle() {
        let model = simple_model();
        let t: Vec<f64> = (0..model.n_components)
            .map(|j| 0.55 - 0.85 * j as f64)
            .collect();
        let got = t2_contributions(&model, &t).unwrap();
        for i in 0..model.n_variables {
            let mut expect = 0.0;
            for j in 0..model.n_components {
                expect += t[j] / model.singular_values[j] * model.loadings.get(i, j);
            }
            assert_abs_diff_eq!(got[i], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn q_contributions_square_and_sum() {
        assert_eq!(q_contributions(&[-2.0, 3.0]), vec![4.0, 9.0]);
        assert_eq!(q_contributions(&[0.0, 0.0]), vec![0.0, 0.0]);
        let model = simple_model();
        let x = vec![1.4, -0.2, 0.8];
        let (q, residual) = q_statistic(&model, &x).unwrap();
        let total: f64 = q_contributions(&residual).iter().sum();
        assert_abs_diff_eq!(total, q, epsilon = 1e-10 * q.max(1.0));
    }

    #[test]
    fn sign_invariance_of_statistics() {
        let model = simple_model();
        let x = vec![0.6, -1.5, 0.9];
        let base = monitor_sample(&model, &x).unwrap();

        for flip in 0..model.n_components {
            let mut flipped = model.clone();
            for i in 0..flipped.n_variables {
                let v = flipped.loadings.get(i, flip);
                flipped.loadings.set(i, flip, -v);
            }
            let other = monitor_sample(&flipped, &x).unwrap();
            assert_abs_diff_eq!(base.t2, other.t2, epsilon = 1e-10);
            assert_abs_diff_eq!(base.q, other.q, epsilon = 1e-10);
            for i in 0..model.n_variables {
                assert_abs_diff_eq!(base.t2_contrib[i], other.t2_contrib[i], epsilon = 1e-10);
                assert_abs_diff_eq!(base.q_contrib[i], other.q_contrib[i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn training_rows_q_equals_truncated_score_energy() {
        let x = constructed_training_matrix();
        let model = fit_pca(&x, 0.8, 0.05, EigenvalueScaling::SigmaSquared).unwrap();
        // Q of a training row equals the residual score energy beyond r.
        let full = fit_pca(&x, 1.0, 0.05, EigenvalueScaling::SigmaSquared).unwrap();
        for row in 0..x.rows() {
            let sample = x.row(row);
            let (q, _) = q_statistic(&model, &sample).unwrap();
            let all_scores = scores(&full, &sample).unwrap();
            let tail: f64 = all_scores[model.n_components..]
                .iter()
                .map(|t| t * t)
                .sum();
            assert_abs_diff_eq!(q, tail, epsilon = 1e-8);
        }
    }

    #[test]
    fn projection_idempotence() {
        let model = simple_model();
        let x = vec![0.9, -0.4, 0.25];
        let t = scores(&model, &x).unwrap();
        // Reconstruct in raw units and re-score.
        let mut recon = vec![0.0; model.n_variables];
        for i in 0..model.n_variables {
            let mut z = 0.0;
            for (j, tj) in t.iter().enumerate() {
                z += tj * model.loadings.get(i, j);
            }
            recon[i] = z * model.scale[i] + model.mean[i];
        }
        let t2 = scores(&model, &recon).unwrap();
        for (a, b) in t.iter().zip(t2.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn monotone_r_never_increases_training_q() {
        let x = constructed_training_matrix();
        let low = fit_pca(&x, 0.5, 0.05, EigenvalueScaling::SigmaSquared).unwrap();
        let high = fit_pca(&x, 0.95, 0.05, EigenvalueScaling::SigmaSquared).unwrap();
        assert!(high.n_components >= low.n_components);
        for row in 0..x.rows() {
            let sample = x.row(row);
            let (q_low, _) = q_statistic(&low, &sample).unwrap();
            let (q_high, _) = q_statistic(&high, &sample).unwrap();
            assert!(q_high <= q_low + 1e-10);
        }
    }

    #[test]
    fn model_json_round_trip() {
        let model = simple_model();
        let json = model.to_json().unwrap();
        assert!(json.contains(MODEL_FORMAT));
        let back = PcaModel::from_json(&json).unwrap();
        assert_eq!(model.loadings, back.loadings);
        assert_eq!(model.singular_values, back.singular_values);
        assert_eq!(model.t2_limit, back.t2_limit);
        assert_eq!(model.q_limit, back.q_limit);
        assert!(PcaModel::from_json("{\"format\":\"other\"}").is_err());
    }

    #[test]
    fn orthogonal_mixing_preserves_spectrum_through_fit() {
        // The algebraic heart of the federated protocol at the model level.
        let x = constructed_training_matrix();
        let p = generate_orthogonal(6, 5).unwrap();
        let sigma_plain = svd(&x).unwrap().singular_values;
        let sigma_mixed = svd(&p.data().matmul(&x)).unwrap().singular_values;
        for (a, b) in sigma_plain.iter().zip(sigma_mixed.iter()) {
            assert!(
                (a - b).abs() <= 1e-9 * a.max(1.0),
                "plain {a} vs mixed {b}: {:?} {:?}",
                sigma_plain,
                sigma_mixed
            );
        }
    }
}
