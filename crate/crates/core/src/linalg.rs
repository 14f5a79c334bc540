//! Structured matrices used throughout the crate.
//!
//! Conventions: `J_r = [[0, I], [-I, 0]]` with `r/2`-sized blocks (position
//! coordinates first, momenta second), the signature matrix
//! `bold J_r = diag(I, -I)`, the quadrature change of basis
//! `T_k = [[1, 1], [-i, i]] ⊗ I_{k/2}`, the doubled-up form
//! `Δ(X1, X2) = [[X1, X2], [conj X2, conj X1]]` and its real image
//! `∇(X1, X2) = ½ T Δ(X1, X2) T*`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Tolerance for structural predicates.
///
/// A predicate passes iff `residual <= absolute + relative * ||input||_F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureTolerance {
    pub absolute: f64,
    pub relative: f64,
}

impl Default for StructureTolerance {
    fn default() -> Self {
        Self {
            absolute: 1e-10,
            relative: 1e-8,
        }
    }
}

impl StructureTolerance {
    pub fn new(absolute: f64, relative: f64) -> Result<Self> {
        if !(absolute.is_finite() && relative.is_finite()) || absolute < 0.0 || relative < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be finite and non-negative (absolute {absolute}, relative {relative})"
            )));
        }
        Ok(Self { absolute, relative })
    }

    /// Purely absolute tolerance.
    pub fn absolute(absolute: f64) -> Result<Self> {
        Self::new(absolute, 0.0)
    }

    pub fn admits(&self, residual: f64, scale: f64) -> bool {
        residual <= self.absolute + self.relative * scale
    }
}

fn half_even(r: usize, what: &str) -> Result<usize> {
    if !r.is_multiple_of(2) {
        return Err(Error::Dimension(format!("{what} requires an even order, got {r}")));
    }
    Ok(r / 2)
}

/// `J_r`, the canonical symplectic form of even order `r >= 2`.
pub fn j_matrix(r: usize) -> Result<RealMatrix> {
    if r == 0 {
        return Err(Error::Dimension("J_r requires r >= 2".into()));
    }
    let h = half_even(r, "J_r")?;
    Ok(j_block(h))
}

/// `J_{2h}` for any `h`, including the empty matrix when `h == 0`.
pub(crate) fn j_block(h: usize) -> RealMatrix {
    let mut j = RealMatrix::zeros(2 * h, 2 * h);
    for i in 0..h {
        j[(i, h + i)] = 1.0;
        j[(h + i, i)] = -1.0;
    }
    j
}

/// Signature matrix `diag(I_{r/2}, -I_{r/2})`.
pub fn bold_j_matrix(r: usize) -> Result<RealMatrix> {
    let h = half_even(r, "bold J_r")?;
    let mut m = RealMatrix::zeros(r, r);
    for i in 0..h {
        m[(i, i)] = 1.0;
        m[(h + i, h + i)] = -1.0;
    }
    Ok(m)
}

/// `T_k = [[1, 1], [-i, i]] ⊗ I_{k/2}`.
pub fn t_matrix(k: usize) -> Result<ComplexMatrix> {
    let h = half_even(k, "T_k")?;
    let mut t = ComplexMatrix::zeros(k, k);
    for i in 0..h {
        t[(i, i)] = Complex64::new(1.0, 0.0);
        t[(i, h + i)] = Complex64::new(1.0, 0.0);
        t[(h + i, i)] = -I;
        t[(h + i, h + i)] = I;
    }
    Ok(t)
}

fn check_same_shape<T: nalgebra::Scalar>(
    what: &'static str,
    a: &DMatrix<T>,
    b: &DMatrix<T>,
) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            what,
            left_rows: a.nrows(),
            left_cols: a.ncols(),
            right_rows: b.nrows(),
            right_cols: b.ncols(),
        });
    }
    Ok(())
}

/// `Δ(X1, X2) = [[X1, X2], [conj X2, conj X1]]`.
pub fn doubled_up(x1: &ComplexMatrix, x2: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_same_shape("doubled_up blocks", x1, x2)?;
    let (k, j) = x1.shape();
    let mut out = ComplexMatrix::zeros(2 * k, 2 * j);
    out.view_mut((0, 0), (k, j)).copy_from(x1);
    out.view_mut((0, j), (k, j)).copy_from(x2);
    out.view_mut((k, 0), (k, j)).copy_from(&x2.map(|z| z.conj()));
    out.view_mut((k, j), (k, j)).copy_from(&x1.map(|z| z.conj()));
    Ok(out)
}

/// Real image of a doubled-up matrix:
/// `[[Re(X1+X2), -Im(X1-X2)], [Im(X1+X2), Re(X1-X2)]]`.
pub fn nabla(x1: &ComplexMatrix, x2: &ComplexMatrix) -> Result<RealMatrix> {
    check_same_shape("nabla blocks", x1, x2)?;
    let (k, j) = x1.shape();
    let sum = x1 + x2;
    let diff = x1 - x2;
    let mut out = RealMatrix::zeros(2 * k, 2 * j);
    out.view_mut((0, 0), (k, j)).copy_from(&sum.map(|z| z.re));
    out.view_mut((0, j), (k, j)).copy_from(&diff.map(|z| -z.im));
    out.view_mut((k, 0), (k, j)).copy_from(&sum.map(|z| z.im));
    out.view_mut((k, j), (k, j)).copy_from(&diff.map(|z| z.re));
    Ok(out)
}

/// Inverse of [`nabla`] on real matrices with even dimensions.
pub fn extract_bold_blocks(x: &RealMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let j = half_even(x.nrows(), "block extraction (rows)")?;
    let k = half_even(x.ncols(), "block extraction (cols)")?;
    let x11 = x.view((0, 0), (j, k));
    let x12 = x.view((0, k), (j, k));
    let x21 = x.view((j, 0), (j, k));
    let x22 = x.view((j, k), (j, k));
    let x1 = ComplexMatrix::from_fn(j, k, |r, c| {
        Complex64::new(
            0.5 * (x11[(r, c)] + x22[(r, c)]),
            0.5 * (x21[(r, c)] - x12[(r, c)]),
        )
    });
    let x2 = ComplexMatrix::from_fn(j, k, |r, c| {
        Complex64::new(
            0.5 * (x11[(r, c)] - x22[(r, c)]),
            0.5 * (x21[(r, c)] + x12[(r, c)]),
        )
    });
    Ok((x1, x2))
}

pub fn to_complex(m: &RealMatrix) -> ComplexMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Largest imaginary magnitude in `m`.
pub fn max_imag(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.im.abs()))
}

pub fn real_part(m: &ComplexMatrix) -> RealMatrix {
    m.map(|z| z.re)
}

pub fn symmetrize(m: &RealMatrix) -> RealMatrix {
    (m + m.transpose()) * 0.5
}

pub fn antisymmetrize(m: &RealMatrix) -> RealMatrix {
    (m - m.transpose()) * 0.5
}

pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn identity(n: usize) -> RealMatrix {
    RealMatrix::identity(n, n)
}

fn require_square<T: nalgebra::Scalar>(m: &DMatrix<T>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// `||M^T M - I||_F`.
pub fn orthogonality_residual(m: &RealMatrix) -> Result<f64> {
    let n = require_square(m)?;
    Ok((m.transpose() * m - identity(n)).norm())
}

/// `||M^T J M - J||_F`.
pub fn symplectic_residual(m: &RealMatrix) -> Result<f64> {
    let n = require_square(m)?;
    let j = j_block(half_even(n, "symplectic test")?);
    Ok((m.transpose() * &j * m - j).norm())
}

/// `||M + M^T||_F`.
pub fn skew_residual(m: &RealMatrix) -> Result<f64> {
    require_square(m)?;
    Ok((m + m.transpose()).norm())
}

/// `||M - M^T||_F`.
pub fn symmetry_residual(m: &RealMatrix) -> Result<f64> {
    require_square(m)?;
    Ok((m - m.transpose()).norm())
}

/// `||M - M*||_F`.
pub fn hermitian_residual(m: &ComplexMatrix) -> Result<f64> {
    require_square(m)?;
    Ok((m - m.adjoint()).norm())
}

/// `||M* M - I||_F`.
pub fn unitarity_residual(m: &ComplexMatrix) -> Result<f64> {
    let n = require_square(m)?;
    Ok((m.adjoint() * m - ComplexMatrix::identity(n, n)).norm())
}

pub fn is_orthogonal(m: &RealMatrix, tol: &StructureTolerance) -> Result<bool> {
    Ok(tol.admits(orthogonality_residual(m)?, m.norm()))
}

pub fn is_symplectic(m: &RealMatrix, tol: &StructureTolerance) -> Result<bool> {
    Ok(tol.admits(symplectic_residual(m)?, m.norm()))
}

/// Membership in `O(2m) ∩ Sp(2m, R)`.
pub fn is_orthosymplectic(m: &RealMatrix, tol: &StructureTolerance) -> Result<bool> {
    Ok(is_orthogonal(m, tol)? && is_symplectic(m, tol)?)
}

pub fn is_skew_symmetric(m: &RealMatrix, tol: &StructureTolerance) -> Result<bool> {
    Ok(tol.admits(skew_residual(m)?, m.norm()))
}

pub fn is_symmetric(m: &RealMatrix, tol: &StructureTolerance) -> Result<bool> {
    Ok(tol.admits(symmetry_residual(m)?, m.norm()))
}

pub fn is_hermitian(m: &ComplexMatrix, tol: &StructureTolerance) -> Result<bool> {
    Ok(tol.admits(hermitian_residual(m)?, m.norm()))
}

/// Relative residual `||a - b||_F / max(||a||_F, ||b||_F)`, zero when both vanish.
pub fn relative_difference(a: &RealMatrix, b: &RealMatrix) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

pub fn relative_difference_c(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

pub(crate) fn ensure_finite<T>(m: &DMatrix<T>, what: &'static str) -> Result<()>
where
    T: nalgebra::Scalar + nalgebra::ComplexField,
{
    if m.iter().all(|x| x.clone().is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn inverse(a: &RealMatrix, what: &'static str) -> Result<RealMatrix> {
    require_square(a)?;
    a.clone().try_inverse().ok_or(Error::Singular { what })
}

/// Spectral condition number from singular values; infinite for singular input.
pub fn condition_number(a: &RealMatrix) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
