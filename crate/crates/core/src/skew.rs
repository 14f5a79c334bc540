//! Canonical form and `Σ J Σ^T` factorization of nonsingular real
//! skew-symmetric matrices.
//!
//! The orthogonal canonical form `Θ = O · blockdiag([0 δ_i; -δ_i 0]) · O^T`
//! is computed from the Hermitian eigendecomposition of `iΘ`: an eigenvector
//! `v = x + iy` with eigenvalue `δ > 0` satisfies `Θx = δy`, `Θy = -δx`,
//! so the pair `(√2 x, -√2 y)` spans one canonical 2x2 block.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, RealMatrix, StructureTolerance};

/// Factorizations with `min δ <= SINGULARITY_RATIO * max δ` are rejected.
pub const SINGULARITY_RATIO: f64 = 1e-12;

/// Eigenvalues closer than this (relative to `max δ`) are treated as one
/// degenerate eigenspace and canonicalized together.
const DEGENERACY_RATIO: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct Murnaghan {
    /// Orthogonal factor; columns `2i, 2i+1` span the block of `deltas[i]`.
    pub o: RealMatrix,
    /// Positive block parameters in descending order.
    pub deltas: Vec<f64>,
}

impl Murnaghan {
    pub fn canonical_block(&self) -> RealMatrix {
        let k = self.deltas.len();
        let mut blocks = RealMatrix::zeros(2 * k, 2 * k);
        for (i, d) in self.deltas.iter().enumerate() {
            blocks[(2 * i, 2 * i + 1)] = *d;
            blocks[(2 * i + 1, 2 * i)] = -*d;
        }
        blocks
    }

    pub fn reconstruct(&self) -> RealMatrix {
        &self.o * self.canonical_block() * self.o.transpose()
    }
}

/// `Θ = Σ J Σ^T` together with the canonical-form data it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewFactorization {
    #[serde(rename = "Sigma", with = "crate::json::real_matrix")]
    pub sigma: RealMatrix,
    #[serde(rename = "O", with = "crate::json::real_matrix")]
    pub o: RealMatrix,
    pub deltas: Vec<f64>,
}

impl SkewFactorization {
    pub fn reconstruct(&self) -> RealMatrix {
        let j = linalg::j_block(self.deltas.len());
        &self.sigma * j * self.sigma.transpose()
    }

    /// `||Σ J Σ^T - Θ||_F / ||Θ||_F`.
    pub fn relative_residual(&self, theta: &RealMatrix) -> f64 {
        (self.reconstruct() - theta).norm() / theta.norm()
    }

    pub fn sigma_condition_number(&self) -> f64 {
        linalg::condition_number(&self.sigma)
    }
}

fn validated_skew(theta: &RealMatrix) -> Result<RealMatrix> {
    if theta.nrows() != theta.ncols() {
        return Err(Error::NotSquare {
            rows: theta.nrows(),
            cols: theta.ncols(),
        });
    }
    let dim = theta.nrows();
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::Dimension(format!(
            "a nonsingular skew-symmetric matrix has positive even order, got {dim}"
        )));
    }
    linalg::ensure_finite(theta, "skew-symmetric input")?;
    let residual = linalg::skew_residual(theta)?;
    if !StructureTolerance::default().admits(residual, theta.norm()) {
        return Err(Error::NotSkew { residual });
    }
    Ok(linalg::antisymmetrize(theta))
}

/// Orthogonal canonical form of a nonsingular skew-symmetric matrix.
pub fn murnaghan(theta: &RealMatrix) -> Result<Murnaghan> {
    let theta = validated_skew(theta)?;
    let dim = theta.nrows();
    let n = dim / 2;
    let herm = linalg::to_complex(&theta) * Complex64::new(0.0, 1.0);
    let eig = SymmetricEigen::new(linalg::hermitize(&herm));

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let positive = &order[..n];
    let max_delta = eig.eigenvalues[positive[0]];
    let min_delta = eig.eigenvalues[positive[n - 1]];
    if max_delta.is_nan() || max_delta <= 0.0 || min_delta <= SINGULARITY_RATIO * max_delta {
        return Err(Error::SingularSkew { min_delta, max_delta });
    }

    let mut deltas = Vec::with_capacity(n);
    let mut vectors: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n
            && eig.eigenvalues[positive[start]] - eig.eigenvalues[positive[end]] <= DEGENERACY_RATIO * max_delta
        {
            end += 1;
        }
        let group = &positive[start..end];
        let mean = group.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / group.len() as f64;
        let basis = ComplexMatrix::from_fn(dim, group.len(), |r, c| eig.eigenvectors[(r, group[c])]);
        for v in canonical_eigenbasis(&basis)? {
            deltas.push(mean);
            vectors.push(v);
        }
        start = end;
    }

    let sqrt2 = std::f64::consts::SQRT_2;
    let mut o = RealMatrix::zeros(dim, dim);
    for (k, v) in vectors.iter().enumerate() {
        for r in 0..dim {
            o[(r, 2 * k)] = sqrt2 * v[r].re;
            o[(r, 2 * k + 1)] = -sqrt2 * v[r].im;
        }
    }
    Ok(Murnaghan {
        o: reorthonormalize(o),
        deltas,
    })
}

/// Basis-independent orthonormal basis of `span(basis)`.
///
/// Pivot rows are picked greedily by largest residual row norm (ties to the
/// lowest index); the basis is rescaled to the identity on the pivot rows and
/// then Gram-Schmidt orthonormalized. Pivot entries stay real and positive,
/// which fixes the complex phase of every vector.
fn canonical_eigenbasis(basis: &ComplexMatrix) -> Result<Vec<Vec<Complex64>>> {
    let (rows, k) = basis.shape();
    let mut residual: Vec<Vec<Complex64>> = (0..rows).map(|r| basis.row(r).iter().copied().collect()).collect();
    let mut pivots = Vec::with_capacity(k);
    for _ in 0..k {
        let norms: Vec<f64> = residual.iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>()).collect();
        let best = norms.iter().copied().fold(0.0, f64::max);
        let p = (0..rows)
            .find(|&r| !pivots.contains(&r) && norms[r] >= best * (1.0 - 1e-9))
            .ok_or(Error::Eigen("degenerate eigenspace has no pivot rows"))?;
        pivots.push(p);
        let dir: Vec<Complex64> = residual[p].iter().map(|z| z / norms[p].sqrt()).collect();
        for row in residual.iter_mut() {
            // remove the component along `dir` (row vectors in C^k)
            let coeff: Complex64 = row.iter().zip(&dir).map(|(a, b)| a * b.conj()).sum();
            for (a, b) in row.iter_mut().zip(&dir) {
                *a -= coeff * b;
            }
        }
    }
    let mut pivot_block = ComplexMatrix::from_fn(k, k, |r, c| basis[(pivots[r], c)]);
    if !pivot_block.try_inverse_mut() {
        return Err(Error::Eigen("pivot block of eigenspace is singular"));
    }
    let normalized = basis * pivot_block;
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(k);
    for c in 0..k {
        let mut v: Vec<Complex64> = normalized.column(c).iter().copied().collect();
        for _ in 0..2 {
            for q in &out {
                let coeff: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= coeff * y;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        out.push(v.into_iter().map(|z| z / norm).collect());
    }
    Ok(out)
}

/// Modified Gram-Schmidt on the columns, in order.
fn reorthonormalize(mut o: RealMatrix) -> RealMatrix {
    for c in 0..o.ncols() {
        for _ in 0..2 {
            for prev in 0..c {
                let proj = o.column(prev).dot(&o.column(c));
                let p = o.column(prev).clone_owned() * proj;
                let mut col = o.column_mut(c);
                col -= p;
            }
        }
        let norm = o.column(c).norm();
        o.column_mut(c).unscale_mut(norm);
    }
    o
}

/// `Θ = Σ J Σ^T` with `Σ = O · diag(√δ_1, √δ_1, …, √δ_n, √δ_n) · Σ_0`, where
/// the permutation `Σ_0` maps `J` onto `I_n ⊗ [0 1; -1 0]`.
pub fn cholesky_like(theta: &RealMatrix) -> Result<SkewFactorization> {
    let canon = murnaghan(theta)?;
    let n = canon.deltas.len();
    let mut sigma = RealMatrix::zeros(2 * n, 2 * n);
    for (i, d) in canon.deltas.iter().enumerate() {
        let root = d.sqrt();
        sigma.set_column(i, &(canon.o.column(2 * i) * root));
        sigma.set_column(n + i, &(canon.o.column(2 * i + 1) * root));
    }
    Ok(SkewFactorization {
        sigma,
        o: canon.o,
        deltas: canon.deltas,
    })
}

/// `Σ̂ = Σ_1 Σ_2^{-1}`, so that `Θ_1 = Σ̂ Θ_2 Σ̂^T`.
pub fn relate_ccr(theta1: &RealMatrix, theta2: &RealMatrix) -> Result<RealMatrix> {
    if theta1.shape() != theta2.shape() {
        return Err(Error::ShapeMismatch {
            what: "CCR matrices",
            left_rows: theta1.nrows(),
            left_cols: theta1.ncols(),
            right_rows: theta2.nrows(),
            right_cols: theta2.ncols(),
        });
    }
    let s1 = cholesky_like(theta1)?;
    let s2 = cholesky_like(theta2)?;
    let s2_inv = linalg::inverse(&s2.sigma, "factor of the second CCR matrix")?;
    Ok(s1.sigma * s2_inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{j_matrix, orthogonality_residual};
    use crate::random;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn canonical_input_is_returned_unchanged() {
        let theta = RealMatrix::from_row_slice(2, 2, &[0.0, 3.0, -3.0, 0.0]);
        let m = murnaghan(&theta).unwrap();
        assert!((m.deltas[0] - 3.0).abs() < 1e-14);
        assert!((m.o - RealMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn j4_pairs_interleaved_coordinates() {
        let j = j_matrix(4).unwrap();
        let m = murnaghan(&j).unwrap();
        assert_eq!(m.deltas.len(), 2);
        for d in &m.deltas {
            assert!((d - 1.0).abs() < 1e-14);
        }
        let mut perm = RealMatrix::zeros(4, 4);
        for (col, row) in [0usize, 2, 1, 3].into_iter().enumerate() {
            perm[(row, col)] = 1.0;
        }
        assert!((&m.o - perm).norm() < 1e-14, "{}", m.o);
        assert!((m.reconstruct() - &j).norm() < 1e-14);

        let f = cholesky_like(&j).unwrap();
        assert!((f.sigma - RealMatrix::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn recovers_prescribed_deltas() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let q = random::orthogonal(4, &mut rng);
        let mut canonical = RealMatrix::zeros(4, 4);
        canonical[(0, 1)] = 5.0;
        canonical[(1, 0)] = -5.0;
        canonical[(2, 3)] = 2.0;
        canonical[(3, 2)] = -2.0;
        let theta = &q * canonical * q.transpose();
        let m = murnaghan(&theta).unwrap();
        assert!((m.deltas[0] - 5.0).abs() < 1e-10);
        assert!((m.deltas[1] - 2.0).abs() < 1e-10);
        assert!(orthogonality_residual(&m.o).unwrap() < 1e-12);
        assert!((m.reconstruct() - &theta).norm() / theta.norm() < 1e-10);
    }

    #[test]
    fn scaled_j_factor() {
        let theta = j_matrix(4).unwrap() * 4.0;
        let f = cholesky_like(&theta).unwrap();
        assert!(f.relative_residual(&theta) < 1e-14);
        assert!((&f.sigma * f.sigma.transpose() - RealMatrix::identity(4, 4) * 4.0).norm() < 1e-13);
    }

    #[test]
    fn random_factorizations_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for dim in (2..=20).step_by(2) {
            let theta = random::skew_nonsingular(dim / 2, &mut rng);
            let f = cholesky_like(&theta).unwrap();
            assert!(f.relative_residual(&theta) < 1e-10, "dim {dim}: {}", f.relative_residual(&theta));
            assert!(f.deltas.iter().all(|d| *d > 0.0));
            assert!(f.deltas.windows(2).all(|w| w[0] >= w[1]));
            assert!(f.sigma_condition_number().is_finite());
        }
    }

    #[test]
    fn deltas_match_general_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for dim in [2usize, 6, 10, 14] {
            let theta = RealMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
            let theta = linalg::antisymmetrize(&theta);
            let m = murnaghan(&theta).unwrap();
            let mut imag: Vec<f64> = crate::state_space::eigenvalues(&theta)
                .iter()
                .filter(|z| z.im > 0.0)
                .map(|z| z.im)
                .collect();
            imag.sort_by(|a, b| b.total_cmp(a));
            assert_eq!(imag.len(), m.deltas.len());
            for (a, b) in imag.iter().zip(&m.deltas) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gauge_freedom_with_symplectic_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let theta = random::skew_nonsingular(3, &mut rng);
        let f = cholesky_like(&theta).unwrap();
        let s = random::symplectic(3, &mut rng);
        let gauged = &f.sigma * s;
        let j = j_matrix(6).unwrap();
        let rec = &gauged * j * gauged.transpose();
        assert!((rec - &theta).norm() / theta.norm() < 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        let not_skew = RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(murnaghan(&not_skew), Err(Error::NotSkew { .. })));
        let singular = RealMatrix::zeros(2, 2);
        assert!(matches!(murnaghan(&singular), Err(Error::SingularSkew { .. })));
        let mut rank_deficient = RealMatrix::zeros(4, 4);
        rank_deficient[(0, 1)] = 1.0;
        rank_deficient[(1, 0)] = -1.0;
        assert!(matches!(cholesky_like(&rank_deficient), Err(Error::SingularSkew { .. })));
        assert!(matches!(murnaghan(&RealMatrix::zeros(3, 3)), Err(Error::Dimension(_))));
        assert!(matches!(murnaghan(&RealMatrix::zeros(2, 3)), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn relate_identical_j_is_symplectic() {
        let j = j_matrix(4).unwrap();
        let s = relate_ccr(&j, &j).unwrap();
        assert!(linalg::symplectic_residual(&s).unwrap() < 1e-12);
    }

    #[test]
    fn relate_scaled_j() {
        let j = j_matrix(4).unwrap();
        let s = relate_ccr(&(&j * 2.0), &j).unwrap();
        assert!((&s * &j * s.transpose() - &j * 2.0).norm() < 1e-12);
        let root2 = RealMatrix::identity(4, 4) * 2f64.sqrt();
        assert!((&root2 * &j * root2.transpose() - &j * 2.0).norm() < 1e-14);
    }

    #[test]
    fn relate_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..20 {
            let t1 = random::skew_nonsingular(3, &mut rng);
            let t2 = random::skew_nonsingular(3, &mut rng);
            let s = relate_ccr(&t1, &t2).unwrap();
            assert!((&s * &t2 * s.transpose() - &t1).norm() / t1.norm() < 1e-9);
        }
        let err = relate_ccr(&j_matrix(4).unwrap(), &j_matrix(2).unwrap());
        assert!(matches!(err, Err(Error::ShapeMismatch { .. })));
    }
}
