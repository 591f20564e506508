//! Design matrices, noise-variance estimation and the bias-eliminated spectrum.

use nalgebra::{Matrix3, SMatrix, SVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{CorrespondenceSet, Error, Result};

pub type Matrix9 = SMatrix<f64, 9, 9>;
pub type Vector9 = SVector<f64, 9>;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;
/// Eigenvalues of `Q` below this fraction of the largest are treated as zero
/// when whitening, which maps the noise-free limit to `σ̂² ≈ 0`.
const WHITENING_FLOOR: f64 = 1e-15;

/// The 9x9 pair driving variance estimation and bias elimination.
///
/// `q = AᵀA / m` where row `i` of `A` is `(y_i^h ⊗ z_i^h)ᵀ`, so that
/// `A θ` stacks the epipolar residuals `z_i^hᵀ E y_i^h` for `θ = vec(E)`
/// (column-major). `s = Y^h ⊗ W^h` with `Y^h = Σ y_i^h y_i^hᵀ / m` and
/// `W^h = diag(1, 1, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrices {
    pub q: Matrix9,
    pub s: Matrix9,
    pub m: usize,
}

/// Row of `A` for one correspondence.
#[inline]
pub fn design_row(y_h: &nalgebra::Vector3<f64>, z_h: &nalgebra::Vector3<f64>) -> Vector9 {
    let mut a = Vector9::zeros();
    for k in 0..3 {
        for j in 0..3 {
            a[3 * k + j] = y_h[k] * z_h[j];
        }
    }
    a
}

pub fn build_design(set: &CorrespondenceSet) -> DesignMatrices {
    let m = set.len();
    let mut q = Matrix9::zeros();
    let mut y_sum = Matrix3::zeros();
    for c in set {
        let y_h = c.y_h();
        let a = design_row(&y_h, &c.z_h());
        q.ger(1.0, &a, &a, 1.0);
        y_sum.ger(1.0, &y_h, &y_h, 1.0);
    }
    let scale = if m > 0 { 1.0 / m as f64 } else { 0.0 };
    q *= scale;
    y_sum *= scale;

    let mut s = Matrix9::zeros();
    for k in 0..3 {
        for l in 0..3 {
            // W^h only has ones at (0,0) and (1,1).
            for j in 0..2 {
                s[(3 * k + j, 3 * l + j)] = y_sum[(k, l)];
            }
        }
    }
    DesignMatrices {
        q: symmetrize(&q),
        s: symmetrize(&s),
        m,
    }
}

pub(crate) fn symmetrize(m: &Matrix9) -> Matrix9 {
    (m + m.transpose()) * 0.5
}

fn symmetric_eigen(m: Matrix9) -> Result<SymmetricEigen<f64, nalgebra::U9>> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::IllConditioned("non-finite matrix".into()));
    }
    SymmetricEigen::try_new(m, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::IllConditioned("symmetric eigen solver did not converge".into()))
}

/// `σ̂² = 1 / μ_max` for the generalized problem `S v = μ Q v`.
///
/// Solved by whitening with the eigendecomposition of `Q`; directions where
/// `Q` vanishes give `μ → ∞`, i.e. `σ̂² → 0`.
pub fn estimate_noise_variance(d: &DesignMatrices) -> Result<f64> {
    let eq = symmetric_eigen(d.q)?;
    let lambda_max = eq.eigenvalues.max();
    if lambda_max <= 0.0 {
        return Err(Error::IllConditioned("Q has no positive eigenvalue".into()));
    }
    let floor = lambda_max * WHITENING_FLOOR;
    let mut whiten = eq.eigenvectors;
    for (j, lambda) in eq.eigenvalues.iter().enumerate() {
        let inv_sqrt = 1.0 / lambda.max(floor).sqrt();
        whiten.column_mut(j).scale_mut(inv_sqrt);
    }
    let m = symmetrize(&(whiten.transpose() * d.s * whiten));
    let mu_max = symmetric_eigen(m)?.eigenvalues.max();
    if !(mu_max > 0.0) {
        return Err(Error::IllConditioned("S has no positive generalized eigenvalue".into()));
    }
    Ok((1.0 / mu_max).max(0.0))
}

/// Eigenpairs of a symmetric 9x9 matrix in ascending eigenvalue order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: [f64; 9],
    /// Columns are unit eigenvectors matching `eigenvalues`.
    pub eigenvectors: Matrix9,
}

impl Spectrum {
    pub fn of(m: &Matrix9) -> Result<Self> {
        let eig = symmetric_eigen(symmetrize(m))?;
        let mut order: Vec<usize> = (0..9).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut eigenvalues = [0.0; 9];
        let mut eigenvectors = Matrix9::zeros();
        for (dst, &src) in order.iter().enumerate() {
            eigenvalues[dst] = eig.eigenvalues[src];
            eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Eigenvector for the `rank`-th smallest eigenvalue (0 = smallest).
    pub fn vector(&self, rank: usize) -> Vector9 {
        self.eigenvectors.column(rank).into_owned()
    }

    pub fn min_vector(&self) -> Vector9 {
        self.vector(0)
    }

    pub fn second_vector(&self) -> Vector9 {
        self.vector(1)
    }
}

/// Spectrum of `Q^BE = Q - σ̂² S`. Eigenvalues may be slightly negative.
pub fn bias_eliminated_spectrum(d: &DesignMatrices, sigma2: f64) -> Result<Spectrum> {
    Spectrum::of(&(d.q - d.s * sigma2))
}

/// `E = unvec(θ)` (column-major).
#[inline]
pub fn essential_from_theta(theta: &Vector9) -> Matrix3<f64> {
    Matrix3::from_column_slice(theta.as_slice())
}

#[inline]
pub fn theta_from_essential(e: &Matrix3<f64>) -> Vector9 {
    Vector9::from_column_slice(e.as_slice())
}

/// Mean squared algebraic error `(z^hᵀ E y^h)²` of the unit-normalized `θ`.
pub fn epipolar_cost(theta: &Vector9, set: &CorrespondenceSet) -> f64 {
    let norm = theta.norm();
    if norm == 0.0 || set.is_empty() {
        return f64::NAN;
    }
    let e = essential_from_theta(&(theta / norm));
    set.iter()
        .map(|c| (c.z_h().transpose() * e * c.y_h())[0].powi(2))
        .sum::<f64>()
        / set.len() as f64
}
