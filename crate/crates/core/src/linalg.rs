//! Dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{tolerance, Real};

/// `a ⊗ I_m`: lifts an N×N node-level matrix to the MN×MN block level.
pub fn lift<T: Real>(a: &DMatrix<T>, m: usize) -> DMatrix<T> {
    a.kronecker(&DMatrix::identity(m, m))
}

/// Kronecker product.
pub fn kron<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a.kronecker(b)
}

/// Maximum absolute column sum.
pub fn one_norm<T: Real>(a: &DMatrix<T>) -> T {
    a.column_iter()
        .map(|c| c.iter().fold(T::zero(), |s, v| s + v.abs()))
        .fold(T::zero(), |m, v| m.max(v))
}

/// Maximum absolute row sum.
pub fn inf_norm<T: Real>(a: &DMatrix<T>) -> T {
    a.row_iter()
        .map(|r| r.iter().fold(T::zero(), |s, v| s + v.abs()))
        .fold(T::zero(), |m, v| m.max(v))
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> Result<DVector<T>> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::Dimension(format!(
            "solve: {}x{} system with rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("LU factorization hit a zero pivot".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("solution is not finite".into()));
    }
    Ok(x)
}

/// Inverse of a small square matrix.
pub fn inverse<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("matrix is not invertible".into()))
}

/// Spectral radius of a square matrix.
///
/// Eigenvalues come from a real Schur decomposition, which handles complex
/// conjugate dominant pairs that defeat plain power iteration. If the QR sweep
/// fails to converge the radius falls back to Gelfand's formula evaluated by
/// repeated squaring.
pub fn spectral_radius<T: Real>(a: &DMatrix<T>) -> T {
    assert!(a.is_square(), "spectral radius of a non-square matrix");
    if a.nrows() == 0 {
        return T::zero();
    }
    match Schur::try_new(a.clone(), T::default_epsilon(), 100_000) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .map(|z| (z.re * z.re + z.im * z.im).sqrt())
            .fold(T::zero(), |m, v| m.max(v)),
        None => gelfand_radius(a, 40),
    }
}

/// `lim ‖A^k‖^{1/k}` approximated with `2^squarings` powers, rescaling at each
/// squaring so nothing overflows.
pub fn gelfand_radius<T: Real>(a: &DMatrix<T>, squarings: u32) -> T {
    let mut p = a.clone();
    // log of the accumulated scale factor, divided by the current exponent
    let mut log_scale = 0.0f64;
    let mut exponent = 1.0f64;
    for _ in 0..squarings {
        let n = p.norm().as_f64();
        if n == 0.0 {
            return T::zero();
        }
        p /= T::lit(n);
        log_scale += n.ln() / exponent;
        p = &p * &p;
        exponent *= 2.0;
    }
    let n = p.norm().as_f64();
    if n == 0.0 {
        return T::zero();
    }
    T::lit((log_scale + n.ln() / exponent).exp())
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues<T: Real>(a: &DMatrix<T>) -> Vec<T> {
    let mut ev: Vec<T> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).expect("NaN eigenvalue"));
    ev
}

/// Sum `S = Σ_{j≥0} B^j T (B^T)^j`, the solution of `S - B S B^T = T`.
///
/// Uses the doubling iteration `S ← S + P S P^T`, `P ← P²`, which needs only
/// `log2` of the number of terms and never forms the squared-dimension
/// Kronecker operator.
pub fn stein_sum<T: Real>(b: &DMatrix<T>, t: &DMatrix<T>) -> Result<DMatrix<T>> {
    let tol = tolerance::<T>(1e-15);
    let mut s = t.clone();
    let mut p = b.clone();
    for round in 0..64 {
        let inc = &p * &s * p.transpose();
        s += &inc;
        let inc_norm = inc.norm();
        let s_norm = s.norm();
        if !s_norm.is_finite() {
            return Err(Error::Unstable {
                what: "weighted-variance operator",
                rho: spectral_radius(b).as_f64().powi(2),
            });
        }
        if inc_norm <= tol * s_norm || s_norm == T::zero() {
            return Ok(s);
        }
        p = &p * &p;
        if round == 63 {
            break;
        }
    }
    Err(Error::NoConvergence {
        what: "Stein doubling",
        iterations: 64,
        residual: f64::NAN,
    })
}

/// `vec(X)`: stacks columns.
pub fn vec_of<T: Real>(x: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vec_of`] for an `n×n` matrix.
pub fn unvec<T: Real>(v: &DVector<T>, n: usize) -> DMatrix<T> {
    DMatrix::from_column_slice(n, n, v.as_slice())
}
