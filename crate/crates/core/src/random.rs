//! Random structured instances for property testing.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::convert::{AcParams, PmParams};
use crate::linalg::{self, ComplexMatrix, RealMatrix};

fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-like orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn orthogonal<R: Rng + ?Sized>(k: usize, rng: &mut R) -> RealMatrix {
    let qr = gaussian(k, k, rng).qr();
    let signs = qr.r().diagonal().map(|x| if x < 0.0 { -1.0 } else { 1.0 });
    let mut q = qr.q();
    for (c, s) in signs.iter().enumerate() {
        q.column_mut(c).scale_mut(*s);
    }
    q
}

pub fn unitary<R: Rng + ?Sized>(k: usize, rng: &mut R) -> ComplexMatrix {
    let qr = complex_gaussian(k, k, rng).qr();
    let phases: Vec<Complex64> = qr
        .r()
        .diagonal()
        .iter()
        .map(|z| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) })
        .collect();
    let mut q = qr.q();
    for (c, p) in phases.iter().enumerate() {
        let mut col = q.column_mut(c);
        col *= *p;
    }
    q
}

/// Random element of `O(2m) ∩ Sp(2m)`, i.e. `∇(U, 0)` for a unitary `U`.
pub fn orthosymplectic<R: Rng + ?Sized>(m: usize, rng: &mut R) -> RealMatrix {
    let u = unitary(m, rng);
    linalg::nabla(&u, &ComplexMatrix::zeros(m, m)).expect("matching shapes")
}

/// Random symplectic matrix of order `2n`: a product of shears and a
/// block-diagonal `diag(G, G^{-T})`.
pub fn symplectic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RealMatrix {
    let id = RealMatrix::identity(n, n);
    let sym = |rng: &mut R| linalg::symmetrize(&(gaussian(n, n, rng) * 0.5));
    let mut upper = RealMatrix::identity(2 * n, 2 * n);
    upper.view_mut((0, n), (n, n)).copy_from(&sym(rng));
    let mut lower = RealMatrix::identity(2 * n, 2 * n);
    lower.view_mut((n, 0), (n, n)).copy_from(&sym(rng));
    let g = &id + gaussian(n, n, rng) * 0.3;
    let g_inv_t = g.clone().try_inverse().unwrap_or_else(|| id.clone()).transpose();
    let mut scale = RealMatrix::zeros(2 * n, 2 * n);
    scale.view_mut((0, 0), (n, n)).copy_from(&g);
    scale.view_mut((n, n), (n, n)).copy_from(&g_inv_t);
    upper * lower * scale
}

/// Nonsingular skew-symmetric matrix of order `2n` with block parameters in
/// `[0.5, 2]`, rotated by a random orthogonal matrix.
pub fn skew_nonsingular<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RealMatrix {
    let q = orthogonal(2 * n, rng);
    let mut canonical = RealMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let d: f64 = rng.random_range(0.5..2.0);
        canonical[(2 * i, 2 * i + 1)] = d;
        canonical[(2 * i + 1, 2 * i)] = -d;
    }
    linalg::antisymmetrize(&(&q * canonical * q.transpose()))
}

/// Random valid position-momentum parameters with `n` modes and `m` channels.
pub fn pm_params<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> PmParams {
    PmParams::new(
        orthosymplectic(m, rng),
        gaussian(2 * m, 2 * n, rng) * 0.5,
        linalg::symmetrize(&gaussian(2 * n, 2 * n, rng)),
        skew_nonsingular(n, rng),
    )
    .expect("generated parameters satisfy the invariants")
}

/// Random valid annihilation-creation parameters.
pub fn ac_params<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> AcParams {
    let h1 = {
        let x = complex_gaussian(n, n, rng);
        linalg::hermitize(&x)
    };
    let h2 = {
        let x = complex_gaussian(n, n, rng);
        (&x + x.transpose()) * Complex64::new(0.5, 0.0)
    };
    let e = orthogonal(2 * n, rng) * (RealMatrix::identity(2 * n, 2 * n) + gaussian(2 * n, 2 * n, rng) * 0.2);
    let (e1, e2) = linalg::extract_bold_blocks(&e).expect("even order");
    AcParams::new(
        unitary(m, rng),
        complex_gaussian(m, n, rng) * Complex64::new(0.5, 0.0),
        complex_gaussian(m, n, rng) * Complex64::new(0.5, 0.0),
        h1,
        h2,
        e1,
        e2,
    )
    .expect("generated parameters satisfy the invariants")
}
