//! Thin SVD with a deterministic sign convention.

use nalgebra::DMatrix;

use super::matrix::DataMatrix;
use super::NumericsError;

/// Thin singular value decomposition `x = u · diag(singular_values) · vt`.
///
/// Invariants: `singular_values` sorted descending and non-negative, `u` has
/// orthonormal columns, `vt` orthonormal rows, and in each row of `vt` the
/// entry of largest absolute value is non-negative (ties broken by lowest
/// column index). The convention makes the factorization a pure function of
/// the input.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DataMatrix,
    pub singular_values: Vec<f64>,
    pub vt: DataMatrix,
}

impl SvdResult {
    /// Reconstruct `u · diag(σ) · vt`.
    pub fn reconstruct(&self) -> DataMatrix {
        let q = self.singular_values.len();
        let mut scaled = self.vt.as_dmatrix().clone();
        for (j, sigma) in self.singular_values.iter().enumerate().take(q) {
            scaled.row_mut(j).scale_mut(*sigma);
        }
        DataMatrix::from_dmatrix(self.u.as_dmatrix() * scaled)
    }
}

pub fn svd(x: &DataMatrix) -> Result<SvdResult, NumericsError> {
    if !x.is_finite() {
        return Err(NumericsError::InvalidInput(
            "SVD input contains non-finite entries".into(),
        ));
    }
    if x.rows() == 0 || x.cols() == 0 {
        return Err(NumericsError::InvalidInput("SVD input is empty".into()));
    }
    let (m, n) = x.shape();
    // eps below the library default (5 eps) makes the deflation test too
    // strict and can terminate with a wrong factorization; max_niter = 0
    // means unconstrained.
    let decomposition =
        nalgebra::SVD::try_new(x.as_dmatrix().clone(), true, true, 5.0 * f64::EPSILON, 0)
            .ok_or_else(|| {
                NumericsError::Numerical(format!("SVD did not converge on {m}x{n} matrix"))
            })?;
    let u = decomposition.u.expect("u requested");
    let vt = decomposition.v_t.expect("v_t requested");
    let sigma: Vec<f64> = decomposition.singular_values.iter().copied().collect();

    // Descending order with a stable tie order, then the sign convention.
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap().then(a.cmp(&b)));

    let q = sigma.len();
    let mut u_sorted = DMatrix::zeros(m, q);
    let mut vt_sorted = DMatrix::zeros(q, n);
    let mut sigma_sorted = Vec::with_capacity(q);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.column_mut(dst).copy_from(&u.column(src));
        vt_sorted.row_mut(dst).copy_from(&vt.row(src));
        sigma_sorted.push(sigma[src]);
    }

    for j in 0..q {
        let row = vt_sorted.row(j);
        let mut best = 0;
        let mut best_abs = row[0].abs();
        for (c, v) in row.iter().enumerate().skip(1) {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = c;
            }
        }
        if row[best] < 0.0 {
            vt_sorted.row_mut(j).neg_mut();
            u_sorted.column_mut(j).neg_mut();
        }
    }

    Ok(SvdResult {
        u: DataMatrix::from_dmatrix(u_sorted),
        singular_values: sigma_sorted,
        vt: DataMatrix::from_dmatrix(vt_sorted),
    })
}
