//! Thin wrappers over nalgebra's dense decompositions.

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const EPS: f64 = 1e-15;
const MAX_ITER: usize = 10_000;

/// All eigenvalues of a general complex matrix.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(m.clone(), EPS, MAX_ITER).ok_or(Error::EigenSolverFailure)?;
    let vals = schur.eigenvalues().ok_or(Error::EigenSolverFailure)?;
    if vals.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::EigenSolverFailure);
    }
    Ok(vals.iter().copied().collect())
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(m.clone(), EPS, MAX_ITER).ok_or(Error::EigenSolverFailure)?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Singular value decomposition `m = U diag(s) V^dagger` with `s` ascending.
pub struct SortedSvd {
    pub values: Vec<f64>,
    pub u: CMatrix,
    pub v: CMatrix,
}

pub fn sorted_svd(m: &CMatrix) -> Result<SortedSvd> {
    let svd = m.clone().try_svd_unordered(true, true, EPS, MAX_ITER).ok_or(Error::SvdFailure)?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::SvdFailure),
    };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let values = order.iter().map(|&k| svd.singular_values[k]).collect();
    let u = CMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = CMatrix::from_fn(v_t.ncols(), order.len(), |r, c| v_t[(order[c], r)].conj());
    Ok(SortedSvd { values, u, v })
}

pub fn inverse(m: &CMatrix) -> Option<CMatrix> {
    m.clone().try_inverse()
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |r, c| {
            let x = (r * 7 + c * 3) as f64;
            Complex64::new((0.37 * x).sin(), (0.91 * x + 0.2).cos())
        })
    }

    #[test]
    fn svd_reconstructs_and_is_sorted() {
        let m = sample(7);
        let svd = sorted_svd(&m).unwrap();
        assert!(svd.values.windows(2).all(|w| w[0] <= w[1]));
        let s = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(7, svd.values.iter().map(|&x| Complex64::from(x))));
        let rebuilt = &svd.u * s * svd.v.adjoint();
        assert!(max_abs(&(rebuilt - &m)) < 1e-12);
    }

    #[test]
    fn eigenvalues_of_triangular_matrix() {
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 0)] = Complex64::new(1.0, -1.0);
        m[(1, 1)] = Complex64::new(-2.0, 0.5);
        m[(2, 2)] = Complex64::new(0.0, 3.0);
        m[(0, 2)] = Complex64::new(4.0, 1.0);
        let mut ev = eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0] - Complex64::new(1.0, -1.0)).norm() < 1e-12);
        assert!((ev[2] - Complex64::new(0.0, 3.0)).norm() < 1e-12);
    }

    #[test]
    fn hermitian_eigenvalues_match_trace() {
        let m = sample(5);
        let h = &m + m.adjoint();
        let ev = hermitian_eigenvalues(&h).unwrap();
        let tr: f64 = (0..5).map(|k| h[(k, k)].re).sum();
        assert!((ev.iter().sum::<f64>() - tr).abs() < 1e-10);
    }
}
