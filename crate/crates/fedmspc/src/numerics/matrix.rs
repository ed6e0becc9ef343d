//! Dense row-major matrix carrier used throughout the crate.

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::NumericsError;

/// Dense real matrix with row/column semantics (samples × variables).
///
/// Stored column-major internally (nalgebra), exposed and serialized
/// row-major. Entries are finite for every matrix built through the
/// checked constructors.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    inner: DMatrix<f64>,
}

impl DataMatrix {
    /// Build from a row-major slice. Rejects empty shapes and non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self, NumericsError> {
        if rows == 0 || cols == 0 {
            return Err(NumericsError::InvalidInput(format!(
                "matrix shape {rows}x{cols} must have rows >= 1 and cols >= 1"
            )));
        }
        if data.len() != rows * cols {
            return Err(NumericsError::InvalidInput(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::InvalidInput(format!(
                "non-finite entry at row {} col {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self {
            inner: DMatrix::from_row_slice(rows, cols, data),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumericsError> {
        if rows.is_empty() {
            return Err(NumericsError::InvalidInput("no rows given".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(NumericsError::InvalidInput("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(rows.len(), cols, &flat)
    }

    /// Zero-row carrier for dataset bookkeeping (loaders that dropped every
    /// sample). Not valid as input to any numerics operation.
    pub fn empty(cols: usize) -> Self {
        Self {
            inner: DMatrix::zeros(0, cols),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    pub(crate) fn from_dmatrix(inner: DMatrix<f64>) -> Self {
        Self { inner }
    }

    pub(crate) fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.inner[(row, col)] = value;
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.inner.row(row).iter().copied().collect()
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.inner.column(col).iter().copied().collect()
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                out.push(self.inner[(r, c)]);
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self {
            inner: self.inner.transpose(),
        }
    }

    /// Matrix product; panics on dimension mismatch (internal-math contract,
    /// protocol layers validate shapes before computing).
    pub fn matmul(&self, rhs: &Self) -> Self {
        Self {
            inner: &self.inner * &rhs.inner,
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self {
            inner: &self.inner + &rhs.inner,
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self {
            inner: &self.inner - &rhs.inner,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            inner: &self.inner * factor,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch");
        self.inner
            .iter()
            .zip(rhs.inner.iter())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    /// Copy of the column block `[start, start+len)`.
    pub fn column_block(&self, start: usize, len: usize) -> Self {
        Self {
            inner: self.inner.columns(start, len).into_owned(),
        }
    }

    /// Copy of the row block `[start, start+len)`.
    pub fn row_block(&self, start: usize, len: usize) -> Self {
        Self {
            inner: self.inner.rows(start, len).into_owned(),
        }
    }

    /// Horizontal concatenation of column blocks sharing a row count.
    pub fn hconcat(blocks: &[&Self]) -> Result<Self, NumericsError> {
        if blocks.is_empty() {
            return Err(NumericsError::InvalidInput("no blocks to concatenate".into()));
        }
        let rows = blocks[0].rows();
        if blocks.iter().any(|b| b.rows() != rows) {
            return Err(NumericsError::InvalidInput(
                "row-count mismatch in horizontal concatenation".into(),
            ));
        }
        let cols: usize = blocks.iter().map(|b| b.cols()).sum();
        let mut out = DMatrix::zeros(rows, cols);
        let mut offset = 0;
        for b in blocks {
            out.columns_mut(offset, b.cols()).copy_from(&b.inner);
            offset += b.cols();
        }
        Ok(Self { inner: out })
    }

    /// Max absolute deviation of `self * selfᵀ` from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        let prod = &self.inner * self.inner.transpose();
        let ident = DMatrix::<f64>::identity(prod.nrows(), prod.ncols());
        (&prod - &ident)
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn try_inverse(&self) -> Result<Self, NumericsError> {
        if self.rows() != self.cols() {
            return Err(NumericsError::InvalidInput(format!(
                "cannot invert non-square {}x{} matrix",
                self.rows(),
                self.cols()
            )));
        }
        self.inner
            .clone()
            .try_inverse()
            .map(|inner| Self { inner })
            .ok_or_else(|| {
                NumericsError::Numerical(format!("singular {}x{} matrix", self.rows(), self.cols()))
            })
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|v| v.is_finite())
    }

    /// σ_max / σ_min; +inf when the smallest singular value is zero.
    pub fn condition_number(&self) -> Result<f64, NumericsError> {
        let svd = nalgebra::SVD::try_new(self.inner.clone(), false, false, 5.0 * f64::EPSILON, 0)
            .ok_or_else(|| {
                NumericsError::Numerical(format!(
                    "SVD did not converge on {}x{} matrix",
                    self.rows(),
                    self.cols()
                ))
            })?;
        let max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        let min = svd
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            Ok(f64::INFINITY)
        } else {
            Ok(max / min)
        }
    }
}

/// Per-column mean and sample standard deviation (ddof = 1).
///
/// Shared by model fitting and dataset standardization so the federated and
/// centralized paths use bit-identical arithmetic.
pub fn column_stats(x: &DataMatrix) -> (Vec<f64>, Vec<f64>) {
    let m = x.rows() as f64;
    let mut means = Vec::with_capacity(x.cols());
    let mut sds = Vec::with_capacity(x.cols());
    for c in 0..x.cols() {
        let mut sum = 0.0;
        for r in 0..x.rows() {
            sum += x.get(r, c);
        }
        let mean = sum / m;
        let mut ss = 0.0;
        for r in 0..x.rows() {
            let d = x.get(r, c) - mean;
            ss += d * d;
        }
        let var = if x.rows() > 1 { ss / (m - 1.0) } else { 0.0 };
        means.push(mean);
        sds.push(var.sqrt());
    }
    (means, sds)
}

/// Absolute Pearson correlation between two equal-length vectors.
/// Returns 0 when either vector is constant.
pub fn abs_correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        0.0
    } else {
        (cov / (va.sqrt() * vb.sqrt())).abs()
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<Vec<f64>>,
}

impl Serialize for DataMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let data: Vec<Vec<f64>> = (0..self.rows()).map(|r| self.row(r)).collect();
        MatrixRepr {
            rows: self.rows(),
            cols: self.cols(),
            data,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DataMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        if repr.data.len() != repr.rows {
            return Err(D::Error::custom(format!(
                "matrix declares {} rows but carries {}",
                repr.rows,
                repr.data.len()
            )));
        }
        if repr.rows == 0 {
            return Ok(DataMatrix::empty(repr.cols));
        }
        let flat: Vec<f64> = repr.data.iter().flatten().copied().collect();
        DataMatrix::from_row_major(repr.rows, repr.cols, &flat).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_round_trip() {
        let m = DataMatrix::from_row_major(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.get(0, 2), 3.0);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.to_row_major(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn rejects_non_finite() {
        let err = DataMatrix::from_row_major(1, 2, &[1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, NumericsError::InvalidInput(_)));
    }

    #[test]
    fn rejects_empty_shape() {
        assert!(DataMatrix::from_row_major(0, 2, &[]).is_err());
        assert!(DataMatrix::from_row_major(2, 0, &[]).is_err());
    }

    #[test]
    fn hconcat_matches_blocks() {
        let a = DataMatrix::from_row_major(2, 1, &[1.0, 3.0]).unwrap();
        let b = DataMatrix::from_row_major(2, 2, &[10.0, 20.0, 30.0, 40.0]).unwrap();
        let c = DataMatrix::hconcat(&[&a, &b]).unwrap();
        assert_eq!(c.shape(), (2, 3));
        assert_eq!(c.row(0), vec![1.0, 10.0, 20.0]);
        assert_eq!(c.row(1), vec![3.0, 30.0, 40.0]);
        assert_eq!(c.column_block(0, 1), a);
        assert_eq!(c.column_block(1, 2), b);
    }

    #[test]
    fn serde_nested_row_major() {
        let m = DataMatrix::from_row_major(2, 2, &[0.1, -2.5, 3.0, 4.75]).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"rows\":2"));
        let back: DataMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn column_stats_ddof_one() {
        let m = DataMatrix::from_row_major(3, 1, &[1.0, 2.0, 3.0]).unwrap();
        let (mean, sd) = column_stats(&m);
        assert!((mean[0] - 2.0).abs() < 1e-15);
        assert!((sd[0] - 1.0).abs() < 1e-15);
    }
}
