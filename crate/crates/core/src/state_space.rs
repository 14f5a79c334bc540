//! Real state-space realizations `Γ(s) = C (sI - A)^{-1} B + D`.
//!
//! [`StateSpace`] accepts arbitrary consistent dimensions so that SISO
//! building blocks can be represented; the quantum-specific operations
//! require an even state dimension `2n` and a square, even feedthrough `2m`
//! and check this through [`StateSpace::modes`] and [`StateSpace::channels`].

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, RealMatrix};

/// Resolvent guard: evaluation at `s` is refused when
/// `min |s - λ_i(A)| < NEAR_POLE_FACTOR * (1 + |s|)`.
pub const NEAR_POLE_FACTOR: f64 = 1e-9;

/// Absolute tolerance for pairing complex spectra.
pub const SPECTRUM_MATCH_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: RealMatrix,
    b: RealMatrix,
    c: RealMatrix,
    d: RealMatrix,
}

impl StateSpace {
    pub fn new(a: RealMatrix, b: RealMatrix, c: RealMatrix, d: RealMatrix) -> Result<Self> {
        let states = a.nrows();
        if a.ncols() != states {
            return Err(Error::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let mismatch = |what, x: &RealMatrix, rows, cols| Error::ShapeMismatch {
            what,
            left_rows: x.nrows(),
            left_cols: x.ncols(),
            right_rows: rows,
            right_cols: cols,
        };
        let (outputs, inputs) = d.shape();
        if b.shape() != (states, inputs) {
            return Err(mismatch("B against (A, D)", &b, states, inputs));
        }
        if c.shape() != (outputs, states) {
            return Err(mismatch("C against (A, D)", &c, outputs, states));
        }
        linalg::ensure_finite(&a, "A")?;
        linalg::ensure_finite(&b, "B")?;
        linalg::ensure_finite(&c, "C")?;
        linalg::ensure_finite(&d, "D")?;
        Ok(Self { a, b, c, d })
    }

    /// Static system `Γ(s) = D`.
    pub fn static_gain(d: RealMatrix) -> Result<Self> {
        let (p, q) = d.shape();
        Self::new(RealMatrix::zeros(0, 0), RealMatrix::zeros(0, q), RealMatrix::zeros(p, 0), d)
    }

    pub fn a(&self) -> &RealMatrix {
        &self.a
    }
    pub fn b(&self) -> &RealMatrix {
        &self.b
    }
    pub fn c(&self) -> &RealMatrix {
        &self.c
    }
    pub fn d(&self) -> &RealMatrix {
        &self.d
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.d.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.d.nrows()
    }

    /// Mode count `n` for a state dimension `2n`.
    pub fn modes(&self) -> Result<usize> {
        if !self.states().is_multiple_of(2) {
            return Err(Error::Dimension(format!(
                "state dimension {} is odd; an oscillator realization needs 2n states",
                self.states()
            )));
        }
        Ok(self.states() / 2)
    }

    /// Channel count `m` for a square `2m x 2m` feedthrough.
    pub fn channels(&self) -> Result<usize> {
        if self.inputs() != self.outputs() || !self.inputs().is_multiple_of(2) {
            return Err(Error::Dimension(format!(
                "feedthrough is {}x{}; expected square of even order 2m",
                self.outputs(),
                self.inputs()
            )));
        }
        Ok(self.inputs() / 2)
    }

    pub fn into_parts(self) -> (RealMatrix, RealMatrix, RealMatrix, RealMatrix) {
        (self.a, self.b, self.c, self.d)
    }

    /// `(T A T^{-1}, T B, C T^{-1}, D)`.
    pub fn similarity_transform(&self, t: &RealMatrix) -> Result<Self> {
        if t.shape() != self.a.shape() {
            return Err(Error::ShapeMismatch {
                what: "similarity transform against A",
                left_rows: t.nrows(),
                left_cols: t.ncols(),
                right_rows: self.states(),
                right_cols: self.states(),
            });
        }
        let t_inv = linalg::inverse(t, "similarity transform")?;
        Self::new(t * &self.a * &t_inv, t * &self.b, &self.c * &t_inv, self.d.clone())
    }

    /// Eigenvalues of `A`, sorted by real then imaginary part.
    pub fn poles(&self) -> Vec<Complex64> {
        eigenvalues(&self.a)
    }

    /// Eigenvalues of `A - B D^{-1} C`; requires invertible `D`.
    pub fn transmission_zeros(&self) -> Result<Vec<Complex64>> {
        Ok(self.inverse_realization()?.poles())
    }

    /// `C (sI - A)^{-1} B + D`, refused near eigenvalues of `A`.
    pub fn eval_tf(&self, s: Complex64) -> Result<ComplexMatrix> {
        self.eval_with_poles(s, &self.poles())
    }

    /// Evaluation with precomputed poles, for repeated sampling.
    pub(crate) fn eval_with_poles(&self, s: Complex64, poles: &[Complex64]) -> Result<ComplexMatrix> {
        let guard = NEAR_POLE_FACTOR * (1.0 + s.norm());
        if let Some(p) = poles.iter().find(|p| (s - **p).norm() < guard) {
            return Err(Error::NearPole {
                point: s,
                eigenvalue: *p,
            });
        }
        let d = linalg::to_complex(&self.d);
        let n = self.states();
        if n == 0 {
            return Ok(d);
        }
        let resolvent = ComplexMatrix::identity(n, n) * s - linalg::to_complex(&self.a);
        let x = resolvent
            .lu()
            .solve(&linalg::to_complex(&self.b))
            .ok_or(Error::Singular { what: "sI - A" })?;
        Ok(linalg::to_complex(&self.c) * x + d)
    }

    /// `Γ~(s) = Γ(-conj(s))*`.
    pub fn eval_conjugate_tf(&self, s: Complex64) -> Result<ComplexMatrix> {
        Ok(self.eval_tf(-s.conj())?.adjoint())
    }

    pub(crate) fn eval_conjugate_with_poles(&self, s: Complex64, poles: &[Complex64]) -> Result<ComplexMatrix> {
        Ok(self.eval_with_poles(-s.conj(), poles)?.adjoint())
    }

    pub fn controllability_rank(&self, tol: &RankTolerance) -> usize {
        reachable_basis(&self.a, &self.b, tol).ncols()
    }

    pub fn observability_rank(&self, tol: &RankTolerance) -> usize {
        reachable_basis(&self.a.transpose(), &self.c.transpose(), tol).ncols()
    }

    pub fn is_minimal(&self, tol: &RankTolerance) -> bool {
        let n = self.states();
        self.controllability_rank(tol) == n && self.observability_rank(tol) == n
    }

    /// Orthogonal Kalman reduction: restrict to the reachable subspace, then
    /// to the orthogonal complement of the unobservable subspace.
    pub fn minimal_realization(&self, tol: &RankTolerance) -> Result<Self> {
        let qc = reachable_basis(&self.a, &self.b, tol);
        let a1 = qc.transpose() * &self.a * &qc;
        let b1 = qc.transpose() * &self.b;
        let c1 = &self.c * &qc;
        let qo = reachable_basis(&a1.transpose(), &c1.transpose(), tol);
        let a2 = qo.transpose() * &a1 * &qo;
        let b2 = qo.transpose() * &b1;
        let c2 = &c1 * &qo;
        Self::new(a2, b2, c2, self.d.clone())
    }

    /// `(A - B D^{-1} C, B D^{-1}, -D^{-1} C, D^{-1})`.
    pub fn inverse_realization(&self) -> Result<Self> {
        if self.inputs() != self.outputs() {
            return Err(Error::NotSquare {
                rows: self.outputs(),
                cols: self.inputs(),
            });
        }
        let d_inv = linalg::inverse(&self.d, "feedthrough D")?;
        let bd = &self.b * &d_inv;
        let dc = &d_inv * &self.c;
        Self::new(&self.a - &bd * &self.c, bd, -dc, d_inv)
    }

    pub fn spectrum_report(&self) -> Result<SpectrumReport> {
        let poles = self.poles();
        let zeros = self.transmission_zeros()?;
        let mirrored: Vec<Complex64> = poles.iter().map(|p| -p.conj()).collect();
        let mirror_max_distance = match_spectra(&zeros, &mirrored);
        let mirror_symmetric = mirror_max_distance.is_some_and(|d| d <= SPECTRUM_MATCH_TOLERANCE);
        Ok(SpectrumReport {
            spectrally_generic: is_spectrally_generic(&poles, SPECTRUM_MATCH_TOLERANCE),
            poles,
            zeros,
            mirror_symmetric,
            mirror_max_distance: mirror_max_distance.unwrap_or(f64::INFINITY),
        })
    }
}

/// Numerical-rank settings. A singular value counts as nonzero iff it
/// exceeds `max(dim * eps * sigma_1, absolute_floor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTolerance {
    pub absolute_floor: f64,
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self { absolute_floor: 0.0 }
    }
}

/// Orthonormal basis of the Krylov space `span{B, AB, A^2 B, ...}`, built by
/// block Arnoldi with re-orthogonalization. Each new block is thresholded
/// relative to its own largest singular value before projection.
pub(crate) fn reachable_basis(a: &RealMatrix, b: &RealMatrix, tol: &RankTolerance) -> RealMatrix {
    let n = a.nrows();
    let mut basis = RealMatrix::zeros(n, 0);
    if n == 0 {
        return basis;
    }
    let mut block = b.clone();
    while basis.ncols() < n && block.ncols() > 0 {
        let dim = n.max(block.ncols()) as f64;
        let sigma1 = block.norm();
        if sigma1 == 0.0 {
            break;
        }
        let threshold = (dim * f64::EPSILON * sigma1).max(tol.absolute_floor);
        let mut w = block;
        for _ in 0..2 {
            if basis.ncols() > 0 {
                let proj = &basis * (basis.transpose() * &w);
                w -= proj;
            }
        }
        let svd = SVD::new(w, true, false);
        let u = svd.u.expect("left singular vectors requested");
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > threshold)
            .collect();
        if keep.is_empty() {
            break;
        }
        let room = n - basis.ncols();
        let mut fresh = RealMatrix::from_fn(n, keep.len().min(room), |r, c| u[(r, keep[c])]);
        // Directions from small singular values can lean towards the current
        // basis by eps * |block| / sigma_k; project again and re-normalize.
        for _ in 0..2 {
            if basis.ncols() > 0 {
                let proj = &basis * (basis.transpose() * &fresh);
                fresh -= proj;
            }
            fresh = fresh.qr().q();
        }
        let old = basis.ncols();
        basis = basis.insert_columns(old, fresh.ncols(), 0.0);
        basis.view_mut((0, old), (n, fresh.ncols())).copy_from(&fresh);
        block = a * fresh;
    }
    basis
}

pub(crate) fn eigenvalues(a: &RealMatrix) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<Complex64> = a.clone().complex_eigenvalues().iter().copied().collect();
    sort_spectrum(&mut ev);
    ev
}

pub(crate) fn sort_spectrum(ev: &mut [Complex64]) {
    ev.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
}

/// Greedy nearest-neighbour pairing of two multisets. Returns the largest
/// pairing distance, or `None` when the sizes differ. Empty sets match with
/// distance zero.
pub fn match_spectra(left: &[Complex64], right: &[Complex64]) -> Option<f64> {
    if left.len() != right.len() {
        return None;
    }
    let mut free_l: Vec<bool> = vec![true; left.len()];
    let mut free_r: Vec<bool> = vec![true; right.len()];
    let mut worst = 0.0f64;
    for _ in 0..left.len() {
        let mut best = (f64::INFINITY, 0, 0);
        for (i, l) in left.iter().enumerate().filter(|(i, _)| free_l[*i]) {
            for (j, r) in right.iter().enumerate().filter(|(j, _)| free_r[*j]) {
                let dist = (l - r).norm();
                if dist < best.0 {
                    best = (dist, i, j);
                }
            }
        }
        free_l[best.1] = false;
        free_r[best.2] = false;
        worst = worst.max(best.0);
    }
    Some(worst)
}

/// True iff no pair of eigenvalues `λ, ν` (including `λ = ν`) satisfies
/// `|λ + conj(ν)| <= tol`.
pub fn is_spectrally_generic(spectrum: &[Complex64], tol: f64) -> bool {
    spectrum
        .iter()
        .all(|l| spectrum.iter().all(|v| (l + v.conj()).norm() > tol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    #[serde(with = "crate::json::complex_list")]
    pub poles: Vec<Complex64>,
    #[serde(with = "crate::json::complex_list")]
    pub zeros: Vec<Complex64>,
    pub mirror_symmetric: bool,
    pub spectrally_generic: bool,
    /// Largest pairing distance between zeros and mirrored poles.
    pub mirror_max_distance: f64,
}

/// Proper rational function with real coefficients in descending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRational", into = "RawRational")]
pub struct RationalEntry {
    num: Vec<f64>,
    den: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawRational {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TryFrom<RawRational> for RationalEntry {
    type Error = Error;
    fn try_from(raw: RawRational) -> Result<Self> {
        RationalEntry::new(raw.num, raw.den)
    }
}

impl From<RationalEntry> for RawRational {
    fn from(e: RationalEntry) -> Self {
        RawRational { num: e.num, den: e.den }
    }
}

fn trim_leading_zeros(mut p: Vec<f64>) -> Vec<f64> {
    let first = p.iter().position(|&c| c != 0.0).unwrap_or(p.len());
    p.drain(..first);
    p
}

fn poly_eval(p: &[f64], s: Complex64) -> Complex64 {
    p.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

impl RationalEntry {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("rational coefficients"));
        }
        let num = trim_leading_zeros(num);
        let den = trim_leading_zeros(den);
        if den.is_empty() {
            return Err(Error::ZeroDenominator);
        }
        if num.len() > den.len() {
            return Err(Error::Improper {
                num_degree: num.len() - 1,
                den_degree: den.len() - 1,
            });
        }
        Ok(Self { num, den })
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }
    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn degree(&self) -> usize {
        self.den.len() - 1
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        poly_eval(&self.num, s) / poly_eval(&self.den, s)
    }
}

/// Controllable companion realization of a proper SISO rational entry.
pub fn siso_realization(entry: &RationalEntry) -> Result<StateSpace> {
    let lead = entry.den[0];
    let den: Vec<f64> = entry.den.iter().map(|c| c / lead).collect();
    let k = den.len() - 1;
    let mut num = vec![0.0; k + 1 - entry.num.len()];
    num.extend(entry.num.iter().map(|c| c / lead));
    let direct = num[0];
    let d = RealMatrix::from_element(1, 1, direct);
    if k == 0 {
        return StateSpace::static_gain(d);
    }
    // strictly proper remainder num - direct * den, coefficients of s^{k-1} .. s^0
    let rem: Vec<f64> = (1..=k).map(|i| num[i] - direct * den[i]).collect();
    let mut a = RealMatrix::zeros(k, k);
    for j in 0..k {
        a[(0, j)] = -den[j + 1];
    }
    for i in 1..k {
        a[(i, i - 1)] = 1.0;
    }
    let mut b = RealMatrix::zeros(k, 1);
    b[(0, 0)] = 1.0;
    let c = RealMatrix::from_row_slice(1, k, &rem);
    StateSpace::new(a, b, c, d)
}

/// Direct sum of realizations; the transfer function is block diagonal.
pub fn block_diag(blocks: &[StateSpace]) -> Result<StateSpace> {
    if blocks.is_empty() {
        return Err(Error::EmptyBlockList);
    }
    let n: usize = blocks.iter().map(|s| s.states()).sum();
    let p: usize = blocks.iter().map(|s| s.outputs()).sum();
    let q: usize = blocks.iter().map(|s| s.inputs()).sum();
    let mut a = RealMatrix::zeros(n, n);
    let mut b = RealMatrix::zeros(n, q);
    let mut c = RealMatrix::zeros(p, n);
    let mut d = RealMatrix::zeros(p, q);
    let (mut x, mut o, mut i) = (0, 0, 0);
    for s in blocks {
        let (sn, so, si) = (s.states(), s.outputs(), s.inputs());
        a.view_mut((x, x), (sn, sn)).copy_from(&s.a);
        b.view_mut((x, i), (sn, si)).copy_from(&s.b);
        c.view_mut((o, x), (so, sn)).copy_from(&s.c);
        d.view_mut((o, i), (so, si)).copy_from(&s.d);
        x += sn;
        o += so;
        i += si;
    }
    StateSpace::new(a, b, c, d)
}

/// Diagonal transfer matrix with rational entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalRational {
    pub entries: Vec<RationalEntry>,
}

impl DiagonalRational {
    pub fn new(entries: Vec<RationalEntry>) -> Self {
        Self { entries }
    }

    pub fn realization(&self) -> Result<StateSpace> {
        let blocks = self.entries.iter().map(siso_realization).collect::<Result<Vec<_>>>()?;
        block_diag(&blocks)
    }

    pub fn eval(&self, s: Complex64) -> ComplexMatrix {
        let k = self.entries.len();
        let mut out = ComplexMatrix::zeros(k, k);
        for (i, e) in self.entries.iter().enumerate() {
            out[(i, i)] = e.eval(s);
        }
        out
    }
}

/// Numerical rank of a general matrix with the crate's rank convention.
pub fn numerical_rank<T>(m: &DMatrix<T>, tol: &RankTolerance) -> usize
where
    T: nalgebra::ComplexField<RealField = f64>,
{
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let sigma1 = sv.max();
    let threshold = (m.nrows().max(m.ncols()) as f64 * f64::EPSILON * sigma1).max(tol.absolute_floor);
    sv.iter().filter(|&&s| s > threshold).count()
}
