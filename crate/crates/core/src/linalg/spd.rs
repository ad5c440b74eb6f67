use crate::error::{LabError, Result};
use crate::scalar::{cast, Scalar};

use super::jacobi::sym_eig;
use super::matrix::Matrix;

/// Symmetric positive-definite matrix with its eigendecomposition cached at
/// construction. All spectral quantities downstream read the cache; nothing
/// re-runs the eigensolver per call.
#[derive(Clone, Debug)]
pub struct SymmetricPd<T> {
    entries: Matrix<T>,
    eig_vectors: Matrix<T>,
    eig_values: Vec<T>,
}

impl<T: Scalar> SymmetricPd<T> {
    /// Validates symmetry, decomposes, and rejects near-singular input:
    /// min λ must exceed 1e−12 · max λ (no silent regularization).
    pub fn new(entries: Matrix<T>) -> Result<Self> {
        let (q, lambda) = sym_eig(&entries)?;
        let lmax = lambda[0];
        let lmin = *lambda.last().expect("nonempty spectrum");
        if !(lmax > T::zero()) || lmin <= cast::<T>(1e-12) * lmax {
            return Err(LabError::validation(format!(
                "matrix is not (safely) positive definite: spectrum range [{lmin:e}, {lmax:e}]"
            )));
        }
        Ok(SymmetricPd { entries: entries.symmetrized(), eig_vectors: q, eig_values: lambda })
    }

    /// Builds directly from an eigensystem with positive eigenvalues; used by
    /// fractional powers where the basis is already known exactly.
    pub fn from_eigen(q: Matrix<T>, lambda: Vec<T>) -> Result<Self> {
        if lambda.iter().any(|l| !(*l > T::zero())) {
            return Err(LabError::validation("eigenvalues must be strictly positive"));
        }
        let mut order: Vec<usize> = (0..lambda.len()).collect();
        order.sort_by(|&i, &j| lambda[j].partial_cmp(&lambda[i]).expect("finite eigenvalues"));
        let n = lambda.len();
        let mut qs = Matrix::zeros(n, n);
        let mut ls = Vec::with_capacity(n);
        for (dst, &src) in order.iter().enumerate() {
            ls.push(lambda[src]);
            for k in 0..n {
                qs[(k, dst)] = q[(k, src)];
            }
        }
        let entries = qs.matmul(&Matrix::diag(&ls)).matmul(&qs.transpose()).symmetrized();
        Ok(SymmetricPd { entries, eig_vectors: qs, eig_values: ls })
    }

    pub fn identity(n: usize) -> Self {
        SymmetricPd {
            entries: Matrix::identity(n),
            eig_vectors: Matrix::identity(n),
            eig_values: vec![T::one(); n],
        }
    }

    pub fn from_diag(values: &[T]) -> Result<Self> {
        Self::new(Matrix::diag(values))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.entries
    }

    pub fn eig_vectors(&self) -> &Matrix<T> {
        &self.eig_vectors
    }

    /// Eigenvalues in descending order.
    pub fn eig_values(&self) -> &[T] {
        &self.eig_values
    }

    pub fn lambda_max(&self) -> T {
        self.eig_values[0]
    }

    pub fn lambda_min(&self) -> T {
        *self.eig_values.last().expect("nonempty spectrum")
    }

    pub fn condition_number(&self) -> T {
        self.lambda_max() / self.lambda_min()
    }

    pub fn determinant(&self) -> T {
        self.eig_values.iter().fold(T::one(), |p, l| p * *l)
    }

    /// `Q diag(λ^p) Qᵀ`; p = −1 is the inverse, p = 1/2 the square root.
    pub fn frac_power(&self, p: T) -> SymmetricPd<T> {
        let lambda: Vec<T> = self.eig_values.iter().map(|l| l.powf(p)).collect();
        SymmetricPd::from_eigen(self.eig_vectors.clone(), lambda)
            .expect("powers of a positive spectrum stay positive")
    }

    pub fn inverse(&self) -> SymmetricPd<T> {
        self.frac_power(-T::one())
    }

    pub fn sqrt(&self) -> SymmetricPd<T> {
        self.frac_power(cast(0.5))
    }

    /// Rescales by a positive factor without re-decomposing.
    pub fn scaled(&self, factor: T) -> Result<SymmetricPd<T>> {
        if !(factor > T::zero()) {
            return Err(LabError::validation("scale factor must be positive"));
        }
        Ok(SymmetricPd {
            entries: self.entries.scale(factor),
            eig_vectors: self.eig_vectors.clone(),
            eig_values: self.eig_values.iter().map(|l| *l * factor).collect(),
        })
    }

    /// Rescales so that λ_max = 1; returns the new matrix and the original λ_max.
    pub fn normalized(&self) -> (SymmetricPd<T>, T) {
        let scale = self.lambda_max();
        (self.scaled(T::one() / scale).expect("positive scale"), scale)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        self.entries.matvec(x)
    }

    /// xᵀ (this) x.
    pub fn quad_form(&self, x: &[T]) -> T {
        weighted_norm_sq(x, self)
    }
}

/// xᵀ M x ≥ 0 for SPD M.
pub fn weighted_norm_sq<T: Scalar>(x: &[T], m: &SymmetricPd<T>) -> T {
    assert_eq!(x.len(), m.dim(), "vector/matrix dimension mismatch");
    let mat = m.matrix();
    let n = x.len();
    let mut acc = T::zero();
    for i in 0..n {
        let row = mat.row(i);
        let mut inner = T::zero();
        for j in 0..n {
            inner += row[j] * x[j];
        }
        acc += x[i] * inner;
    }
    acc
}

/// tr(AB) for symmetric A, B, computed as the entrywise product sum.
pub fn trace_prod<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(LabError::Dimension { expected: a.nrows(), got: b.nrows() });
    }
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| *x * *y).sum())
}

/// Eigenvalues of the pencil S = H^{1/2} P H^{1/2} in descending order; these
/// equal the eigenvalues of PH by similarity.
pub fn pencil_spectrum<T: Scalar>(p: &SymmetricPd<T>, h: &SymmetricPd<T>) -> Result<Vec<T>> {
    if p.dim() != h.dim() {
        return Err(LabError::Dimension { expected: h.dim(), got: p.dim() });
    }
    let hh = h.sqrt();
    let s = hh.matrix().matmul(p.matrix()).matmul(hh.matrix()).symmetrized();
    let (_, lambda) = sym_eig(&s)?;
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    pub(crate) fn random_spd(rng: &mut Rng, n: usize) -> SymmetricPd<f64> {
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = rng.next_gaussian();
            }
        }
        let a = g.matmul(&g.transpose()).add(&Matrix::identity(n).scale(0.5));
        SymmetricPd::new(a).unwrap()
    }

    #[test]
    fn rejects_near_singular() {
        let err = SymmetricPd::from_diag(&[1.0f64, 1e-14]).unwrap_err();
        assert!(matches!(err, LabError::Validation(_)));
    }

    #[test]
    fn reconstruction_and_orthonormality_invariants() {
        let mut rng = Rng::new(11);
        for _ in 0..10 {
            let a = random_spd(&mut rng, 6);
            let q = a.eig_vectors();
            let lam = Matrix::diag(a.eig_values());
            let recon = q.matmul(&lam).matmul(&q.transpose());
            let rel = recon.sub(a.matrix()).frobenius_norm() / a.matrix().frobenius_norm();
            assert!(rel <= 1e-10, "reconstruction {rel}");
            let orth = q.transpose().matmul(q).sub(&Matrix::identity(6)).frobenius_norm();
            assert!(orth <= 1e-10, "orthonormality {orth}");
            assert!(a.lambda_min() > 0.0);
        }
    }

    #[test]
    fn frac_power_diagonal_case() {
        let a = SymmetricPd::from_diag(&[4.0f64, 9.0]).unwrap();
        let half = a.frac_power(0.5);
        // eigenvalues stored descending: (3, 2)
        assert!((half.matrix()[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((half.matrix()[(1, 1)] - 3.0).abs() < 1e-12);
        assert!(half.matrix()[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn frac_power_inverse_identity() {
        let mut rng = Rng::new(3);
        let a = random_spd(&mut rng, 4);
        let inv = a.frac_power(-1.0);
        let prod = a.matrix().matmul(inv.matrix());
        assert!(prod.sub(&Matrix::identity(4)).frobenius_norm() < 1e-9);
        assert!(a.frac_power(0.0).matrix().sub(&Matrix::identity(4)).frobenius_norm() < 1e-10);
        assert!(a.frac_power(1.0).matrix().sub(a.matrix()).frobenius_norm() < 1e-10);
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = Rng::new(8);
        let a = random_spd(&mut rng, 5);
        let s = a.sqrt();
        let sq = s.matrix().matmul(s.matrix());
        let rel = sq.sub(a.matrix()).frobenius_norm() / a.matrix().frobenius_norm();
        assert!(rel < 1e-9, "sqrt self-consistency {rel}");
    }

    #[test]
    fn weighted_norm_examples_and_cholesky_oracle() {
        let eye = SymmetricPd::<f64>::identity(2);
        assert_eq!(weighted_norm_sq(&[1.0, 0.0], &eye), 1.0);
        let m = SymmetricPd::from_diag(&[2.0f64, 3.0]).unwrap();
        assert!((weighted_norm_sq(&[1.0, 1.0], &m) - 5.0).abs() < 1e-12);

        // alternate-factorization oracle: xᵀMx = ‖Lᵀx‖² via Cholesky
        let mut rng = Rng::new(21);
        for _ in 0..10 {
            let a = random_spd(&mut rng, 4);
            let x: Vec<f64> = (0..4).map(|_| rng.next_gaussian()).collect();
            let l = cholesky(a.matrix());
            let mut ltx = vec![0.0; 4];
            for i in 0..4 {
                for j in i..4 {
                    ltx[i] += l[(j, i)] * x[j];
                }
            }
            let via_chol: f64 = ltx.iter().map(|v| v * v).sum();
            let direct = weighted_norm_sq(&x, &a);
            assert!((via_chol - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn trace_prod_examples_and_two_formula_oracle() {
        let sigma = SymmetricPd::from_diag(&[0.2f64, 0.1]).unwrap();
        let eye = SymmetricPd::<f64>::identity(2);
        assert!((trace_prod(eye.matrix(), sigma.matrix()).unwrap() - 0.3).abs() < 1e-14);

        let a = SymmetricPd::from_diag(&[1.0f64, 0.5]).unwrap();
        let b = SymmetricPd::from_diag(&[0.2f64, 0.1]).unwrap();
        let ainv_b = trace_prod(a.frac_power(-1.0).matrix(), b.matrix()).unwrap();
        assert!((ainv_b - 0.4).abs() < 1e-12);

        let mut rng = Rng::new(33);
        for _ in 0..10 {
            let x = random_spd(&mut rng, 4);
            let y = random_spd(&mut rng, 4);
            let entrywise = trace_prod(x.matrix(), y.matrix()).unwrap();
            let explicit = x.matrix().matmul(y.matrix()).trace();
            assert!((entrywise - explicit).abs() <= 1e-12 * (1.0 + explicit.abs()));
        }
    }

    #[test]
    fn pencil_examples_and_determinant_oracle() {
        let mut rng = Rng::new(55);
        let h = random_spd(&mut rng, 4);
        let p = h.inverse();
        let spec = pencil_spectrum(&p, &h).unwrap();
        for l in &spec {
            assert!((l - 1.0).abs() < 1e-10, "inverse pencil eigenvalue {l}");
        }

        let h2 = SymmetricPd::from_diag(&[1.0f64, 0.25]).unwrap();
        let spec2 = pencil_spectrum(&SymmetricPd::identity(2), &h2).unwrap();
        assert!((spec2[0] - 1.0).abs() < 1e-12);
        assert!((spec2[1] - 0.25).abs() < 1e-12);
        assert!((spec2[0] / spec2[1] - 4.0).abs() < 1e-10);

        for _ in 0..10 {
            let p = random_spd(&mut rng, 5);
            let h = random_spd(&mut rng, 5);
            let prod: f64 = pencil_spectrum(&p, &h).unwrap().iter().product();
            let dets = p.determinant() * h.determinant();
            assert!(((prod - dets) / dets).abs() < 1e-9, "det oracle {prod} vs {dets}");
        }
    }

    fn cholesky(a: &Matrix<f64>) -> Matrix<f64> {
        let n = a.nrows();
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    l[(i, j)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        l
    }
}
