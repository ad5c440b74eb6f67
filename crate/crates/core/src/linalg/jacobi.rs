use crate::error::{LabError, Result};
use crate::scalar::{cast, Scalar};

use super::matrix::Matrix;

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(Q, λ)` with orthonormal columns and eigenvalues sorted in
/// descending order, so that `A = Q diag(λ) Qᵀ`. Sweeps run until the largest
/// off-diagonal entry drops below the scalar type's Jacobi tolerance times
/// ‖A‖_F, with a hard budget of 100 sweeps.
pub fn sym_eig<T: Scalar>(a: &Matrix<T>) -> Result<(Matrix<T>, Vec<T>)> {
    if !a.is_square() {
        return Err(LabError::Dimension { expected: a.nrows(), got: a.ncols() });
    }
    let asym = a.asymmetry();
    if asym > T::symmetry_tol() {
        return Err(LabError::validation(format!(
            "matrix is not symmetric: relative asymmetry {asym:e} exceeds {:e}",
            T::symmetry_tol()
        )));
    }

    let n = a.nrows();
    let mut w = a.symmetrized();
    let mut q = Matrix::identity(n);
    let fro = w.frobenius_norm();
    if fro == T::zero() || n == 1 {
        return Ok(sorted(q, (0..n).map(|i| w[(i, i)]).collect()));
    }
    let tol = T::jacobi_tol() * fro;

    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for r in (p + 1)..n {
                off = off.max(w[(p, r)].abs());
            }
        }
        if off <= tol {
            return Ok(sorted(q, (0..n).map(|i| w[(i, i)]).collect()));
        }
        for p in 0..n - 1 {
            for r in (p + 1)..n {
                rotate(&mut w, &mut q, p, r);
            }
        }
    }

    let mut off = T::zero();
    for p in 0..n {
        for r in (p + 1)..n {
            off = off.max(w[(p, r)].abs());
        }
    }
    Err(LabError::numeric(format!(
        "Jacobi sweep budget exhausted: off-diagonal residual {off:e} above target {tol:e}"
    )))
}

/// One Jacobi rotation zeroing w[(p, r)], accumulated into q.
fn rotate<T: Scalar>(w: &mut Matrix<T>, q: &mut Matrix<T>, p: usize, r: usize) {
    let apq = w[(p, r)];
    if apq == T::zero() {
        return;
    }
    let half = cast::<T>(0.5);
    let theta = (w[(r, r)] - w[(p, p)]) * half / apq;
    let t = if theta == T::zero() {
        T::one()
    } else {
        let sign = if theta > T::zero() { T::one() } else { -T::one() };
        sign / (theta.abs() + (theta * theta + T::one()).sqrt())
    };
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;
    let n = w.nrows();

    let wpp = w[(p, p)];
    let wrr = w[(r, r)];
    w[(p, p)] = wpp - t * apq;
    w[(r, r)] = wrr + t * apq;
    w[(p, r)] = T::zero();
    w[(r, p)] = T::zero();
    for k in 0..n {
        if k != p && k != r {
            let wkp = w[(k, p)];
            let wkr = w[(k, r)];
            w[(k, p)] = c * wkp - s * wkr;
            w[(p, k)] = w[(k, p)];
            w[(k, r)] = s * wkp + c * wkr;
            w[(r, k)] = w[(k, r)];
        }
    }
    for k in 0..n {
        let qkp = q[(k, p)];
        let qkr = q[(k, r)];
        q[(k, p)] = c * qkp - s * qkr;
        q[(k, r)] = s * qkp + c * qkr;
    }
}

/// Sorts eigenpairs into descending eigenvalue order.
fn sorted<T: Scalar>(q: Matrix<T>, lambda: Vec<T>) -> (Matrix<T>, Vec<T>) {
    let n = lambda.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| lambda[j].partial_cmp(&lambda[i]).expect("eigenvalues are finite"));
    let mut qs = Matrix::zeros(n, n);
    let mut ls = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        ls.push(lambda[src]);
        for k in 0..n {
            qs[(k, dst)] = q[(k, src)];
        }
    }
    (qs, ls)
}
