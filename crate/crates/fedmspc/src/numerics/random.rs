//! Seeded random matrix generation: Haar orthogonal and conditioned invertible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use super::matrix::DataMatrix;
use super::NumericsError;

/// Square matrix with `data · dataᵀ = I` (max deviation 1e-10).
#[derive(Debug, Clone)]
pub struct OrthogonalMatrix {
    dim: usize,
    data: DataMatrix,
}

impl OrthogonalMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &DataMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> DataMatrix {
        self.data
    }
}

fn gaussian_matrix<R: Rng>(dim: usize, rng: &mut R) -> nalgebra::DMatrix<f64> {
    // Row-major fill order so the draw sequence is part of the contract.
    let data: Vec<f64> = (0..dim * dim).map(|_| rng.sample(StandardNormal)).collect();
    nalgebra::DMatrix::from_row_slice(dim, dim, &data)
}

/// Haar-distributed orthogonal matrix: QR of a standard-Gaussian matrix with
/// the R-diagonal sign correction. Deterministic for a fixed rng state.
pub fn haar_orthogonal<R: Rng>(dim: usize, rng: &mut R) -> Result<OrthogonalMatrix, NumericsError> {
    if dim == 0 {
        return Err(NumericsError::InvalidInput(
            "orthogonal matrix dimension must be >= 1".into(),
        ));
    }
    let g = gaussian_matrix(dim, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(OrthogonalMatrix {
        dim,
        data: DataMatrix::from_dmatrix(q),
    })
}

pub fn generate_orthogonal(dim: usize, seed: u64) -> Result<OrthogonalMatrix, NumericsError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    haar_orthogonal(dim, &mut rng)
}

/// Random square matrix with condition number at most `cond_max`,
/// regenerated internally until the bound holds.
pub fn invertible_from_rng<R: Rng>(
    dim: usize,
    rng: &mut R,
    cond_max: f64,
) -> Result<DataMatrix, NumericsError> {
    if dim == 0 {
        return Err(NumericsError::InvalidInput(
            "invertible matrix dimension must be >= 1".into(),
        ));
    }
    if !(cond_max > 1.0) {
        return Err(NumericsError::InvalidInput(
            "cond_max must be greater than 1".into(),
        ));
    }
    for _ in 0..100 {
        let candidate = DataMatrix::from_dmatrix(gaussian_matrix(dim, rng));
        if candidate.condition_number()? <= cond_max {
            return Ok(candidate);
        }
    }
    Err(NumericsError::Numerical(format!(
        "no {dim}x{dim} matrix under condition bound {cond_max} in 100 draws"
    )))
}

pub const DEFAULT_COND_MAX: f64 = 1e6;

pub fn generate_invertible(dim: usize, seed: u64, cond_max: f64) -> Result<DataMatrix, NumericsError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    invertible_from_rng(dim, &mut rng, cond_max)
}
