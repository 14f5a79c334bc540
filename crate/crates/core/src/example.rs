//! Two-mode, two-channel reference system with transfer matrix
//! `diag((s+1)/s, (s-1)/(s+1), s/(s-1), (s-1)/(s+1))` and its published
//! physical parameters.

use num_complex::Complex64;

use crate::convert::{AcParams, PmParams};
use crate::linalg::{self, ComplexMatrix, RealMatrix};
use crate::state_space::{DiagonalRational, RationalEntry};

pub fn transfer_matrix() -> DiagonalRational {
    let e = |num: [f64; 2], den: [f64; 2]| RationalEntry::new(num.to_vec(), den.to_vec()).expect("proper entry");
    DiagonalRational::new(vec![
        e([1.0, 1.0], [1.0, 0.0]),
        e([1.0, -1.0], [1.0, 1.0]),
        e([1.0, 0.0], [1.0, -1.0]),
        e([1.0, -1.0], [1.0, 1.0]),
    ])
}

pub const POLES: [f64; 4] = [0.0, -1.0, -1.0, 1.0];
pub const ZEROS: [f64; 4] = [0.0, 1.0, 1.0, -1.0];

pub fn d() -> RealMatrix {
    linalg::identity(4)
}

pub fn r() -> RealMatrix {
    let mut r = RealMatrix::zeros(4, 4);
    r[(0, 2)] = 0.25;
    r[(2, 0)] = 0.25;
    r
}

/// Coupling matrix consistent with the transfer matrix. The printed source
/// value has `M[2][2] = 1/4`; see [`m_as_printed`].
pub fn m() -> RealMatrix {
    RealMatrix::from_row_slice(
        4,
        4,
        &[
            -0.5, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, 0.5, 0.0, //
            0.0, -0.5, 0.0, 0.0,
        ],
    )
}

/// The coupling matrix exactly as printed. It reproduces only channels 2 and
/// 4 of the transfer matrix.
pub fn m_as_printed() -> RealMatrix {
    let mut m = m();
    m[(2, 2)] = 0.25;
    m
}

pub fn theta() -> RealMatrix {
    linalg::j_matrix(4).expect("even order")
}

pub fn pm_params() -> PmParams {
    PmParams::new(d(), m(), r(), theta()).expect("reference parameters are valid")
}

fn cm(rows: usize, cols: usize, data: &[(f64, f64)]) -> ComplexMatrix {
    ComplexMatrix::from_iterator(rows, cols, data.iter().map(|&(re, im)| Complex64::new(re, im))).transpose()
}

/// Printed `(S, H, N)` of the annihilation-creation form, with `H` and `N`
/// in doubled-up form.
pub fn ac_matrices() -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let o = (0.0, 0.0);
    let s = ComplexMatrix::identity(2, 2);
    let h = cm(4, 4, &[
        o, o, (0.0, 0.5), o, //
        o, o, o, o, //
        (0.0, -0.5), o, o, o, //
        o, o, o, o,
    ]);
    let n = cm(4, 4, &[
        o, o, (0.0, 1.0), o, //
        o, (-1.5, 0.0), o, (0.5, 0.0), //
        (0.0, -1.0), o, o, o, //
        o, (0.5, 0.0), o, (-1.5, 0.0),
    ]);
    (s, h, n)
}

pub fn ac_params() -> AcParams {
    let (s, h, n) = ac_matrices();
    let top = |x: &ComplexMatrix, c: usize| x.view((0, c), (2, 2)).clone_owned();
    AcParams::new(
        s,
        top(&n, 0),
        top(&n, 2),
        top(&h, 0),
        top(&h, 2),
        ComplexMatrix::identity(2, 2),
        ComplexMatrix::zeros(2, 2),
    )
    .expect("reference parameters are valid")
}
