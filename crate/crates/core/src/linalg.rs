//! Dense linear algebra on small matrices (N ≤ a few hundred).

use ndarray::{Array1, Array2};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type CMatrix<T> = Array2<Complex<T>>;

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            Complex::new(T::one(), T::zero())
        } else {
            Complex::new(T::zero(), T::zero())
        }
    })
}

/// Maximum absolute column sum.
pub fn norm1<T: Real>(a: &CMatrix<T>) -> T {
    a.columns()
        .into_iter()
        .map(|col| col.iter().map(|z| z.norm()).fold(T::zero(), |s, v| s + v))
        .fold(T::zero(), T::max)
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
///
/// Returns `IllConditioned(inf)` when a pivot vanishes exactly.
pub fn inverse<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidArgument(format!("inverse of non-square {}x{} matrix", n, a.ncols())));
    }
    let mut work = a.clone();
    let mut inv = identity::<T>(n);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| work[[i, col]].norm().partial_cmp(&work[[j, col]].norm()).unwrap())
            .unwrap();
        let pivot = work[[pivot_row, col]];
        if pivot.norm() == T::zero() {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        if pivot_row != col {
            for j in 0..n {
                work.swap([pivot_row, j], [col, j]);
                inv.swap([pivot_row, j], [col, j]);
            }
        }
        let scale = Complex::new(T::one(), T::zero()) / pivot;
        for j in 0..n {
            work[[col, j]] = work[[col, j]] * scale;
            inv[[col, j]] = inv[[col, j]] * scale;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let factor = work[[i, col]];
            if factor.norm() == T::zero() {
                continue;
            }
            for j in 0..n {
                let w = work[[col, j]];
                let v = inv[[col, j]];
                work[[i, j]] = work[[i, j]] - factor * w;
                inv[[i, j]] = inv[[i, j]] - factor * v;
            }
        }
    }
    Ok(inv)
}

/// Unitary factor `Q` of `A = QR` with `R` upper triangular and a
/// real-positive diagonal. Classical Gram-Schmidt applied twice per column,
/// which keeps `Q†Q = I` to working precision.
pub fn qr_unitary<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    let (rows, cols) = a.dim();
    let mut q = CMatrix::<T>::from_elem((rows, cols), Complex::new(T::zero(), T::zero()));
    for j in 0..cols {
        let mut v: Array1<Complex<T>> = a.column(j).to_owned();
        for _pass in 0..2 {
            for k in 0..j {
                let qk = q.column(k);
                let proj = qk.iter().zip(v.iter()).fold(Complex::new(T::zero(), T::zero()), |s, (qi, vi)| {
                    s + qi.conj() * vi
                });
                for (vi, qi) in v.iter_mut().zip(qk.iter()) {
                    *vi = *vi - proj * qi;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).fold(T::zero(), |s, x| s + x).sqrt();
        if norm == T::zero() {
            return Err(Error::InvalidArgument("QR of rank-deficient matrix".into()));
        }
        for (i, vi) in v.iter().enumerate() {
            q[[i, j]] = vi.unscale(norm);
        }
    }
    Ok(q)
}

/// Conjugate transpose.
pub fn adjoint<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    a.t().mapv(|z| z.conj())
}

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matrix whose columns are the eigenvectors.
pub fn symmetric_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[[i, i]]).collect(), v)
}

/// Solves `A x = b` for a real square `A` by Gaussian elimination with
/// partial pivoting.
pub fn solve_real<T: Real>(a: &Array2<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: b.len() });
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| m[[i, col]].abs().partial_cmp(&m[[j, col]].abs()).unwrap())
            .unwrap();
        if m[[pivot_row, col]] == T::zero() {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        if pivot_row != col {
            for j in 0..n {
                m.swap([pivot_row, j], [col, j]);
            }
            x.swap(pivot_row, col);
        }
        for i in (col + 1)..n {
            let factor = m[[i, col]] / m[[col, col]];
            if factor == T::zero() {
                continue;
            }
            for j in col..n {
                let v = m[[col, j]];
                m[[i, j]] -= factor * v;
            }
            let xc = x[col];
            x[i] -= factor * xc;
        }
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in (i + 1)..n {
            acc -= m[[i, j]] * x[j];
        }
        x[i] = acc / m[[i, i]];
    }
    Ok(x)
}
