//! Dense helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(h: DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = h.nrows();
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn eigvalsh(h: DMatrix<Complex64>) -> Vec<f64> {
    let mut v: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `iA` for a real matrix `A`.
pub fn times_i(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|x| Complex64::new(0.0, x))
}

/// `exp(A t)` for real antisymmetric `A`, via the spectrum of `iA`.
pub fn expm_antisymmetric(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let (e, u) = eigh(times_i(a));
    let n = a.nrows();
    let mut scaled = u.clone();
    for (j, ej) in e.iter().enumerate() {
        let ph = Complex64::new(0.0, -ej * t).exp();
        for i in 0..n {
            scaled[(i, j)] *= ph;
        }
    }
    let o = scaled * u.adjoint();
    o.map(|z| z.re)
}

/// Frobenius norm of `OᵀO - I`.
pub fn orthogonality_defect(o: &DMatrix<f64>) -> f64 {
    let n = o.nrows();
    (o.transpose() * o - DMatrix::<f64>::identity(n, n)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_eigenpairs() {
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 2.0),
                Complex64::new(0.0, -2.0),
                Complex64::new(1.0, 0.0),
            ],
        );
        let (e, v) = eigh(h.clone());
        assert!((e[0] + 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
        let r = &h * v.column(1) - v.column(1) * Complex64::new(e[1], 0.0);
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn exponential_is_rotation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let o = expm_antisymmetric(&a, 0.3);
        assert!((o[(0, 0)] - 0.6f64.cos()).abs() < 1e-13);
        assert!((o[(1, 0)] + 0.6f64.sin()).abs() < 1e-13);
        assert!(orthogonality_defect(&o) < 1e-13);
    }
}
