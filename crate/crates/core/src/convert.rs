//! Position-momentum `(D, M, R, Θ)` and annihilation-creation
//! `(S, N, H, E)` parameterizations of open quantum harmonic oscillators,
//! the realizations they induce, and the one-to-one map between them.
//!
//! The two forms are related by the quadrature change of basis
//! `X = T_{2n} ă`, so real data is the `∇`-image of doubled-up complex data.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::linalg::{self, ComplexMatrix, RealMatrix, StructureTolerance};
use crate::skew;
use crate::state_space::StateSpace;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Smallest-to-largest singular value ratio below which a matrix is singular.
const SINGULAR_RATIO: f64 = 1e-12;

fn singular_ratio<T>(m: &nalgebra::DMatrix<T>) -> f64
where
    T: nalgebra::ComplexField<RealField = f64>,
{
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

/// Position-momentum parameters with `n` modes and `m` channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmParamsJson", into = "PmParamsJson")]
pub struct PmParams {
    d: RealMatrix,
    m: RealMatrix,
    r: RealMatrix,
    theta: RealMatrix,
}

impl PmParams {
    pub fn new(d: RealMatrix, m: RealMatrix, r: RealMatrix, theta: RealMatrix) -> Result<Self> {
        Self::with_tolerance(d, m, r, theta, &StructureTolerance::default())
    }

    /// Validates every invariant and reports all violations together. `R` is
    /// symmetrized when its asymmetry is within tolerance.
    pub fn with_tolerance(
        d: RealMatrix,
        m: RealMatrix,
        r: RealMatrix,
        theta: RealMatrix,
        tol: &StructureTolerance,
    ) -> Result<Self> {
        let two_m = d.nrows();
        let two_n = r.nrows();
        if d.ncols() != two_m || !two_m.is_multiple_of(2) || two_m == 0 {
            return Err(Error::Dimension(format!(
                "D must be square of positive even order, got {}x{}",
                d.nrows(),
                d.ncols()
            )));
        }
        if r.ncols() != two_n || !two_n.is_multiple_of(2) {
            return Err(Error::Dimension(format!(
                "R must be square of even order, got {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        if m.shape() != (two_m, two_n) {
            return Err(Error::Dimension(format!(
                "M must be {two_m}x{two_n}, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if theta.shape() != (two_n, two_n) {
            return Err(Error::Dimension(format!(
                "Theta must be {two_n}x{two_n}, got {}x{}",
                theta.nrows(),
                theta.ncols()
            )));
        }
        for (x, what) in [(&d, "D"), (&m, "M"), (&r, "R"), (&theta, "Theta")] {
            linalg::ensure_finite(x, what)?;
        }

        let mut violations = Vec::new();
        let orth = linalg::orthogonality_residual(&d)?;
        if !tol.admits(orth, d.norm()) {
            violations.push(Violation::new("D orthogonal", orth));
        }
        let symp = linalg::symplectic_residual(&d)?;
        if !tol.admits(symp, d.norm()) {
            violations.push(Violation::new("D symplectic", symp));
        }
        let asym = linalg::symmetry_residual(&r)?;
        if !tol.admits(asym, r.norm()) {
            violations.push(Violation::new("R symmetric", asym));
        }
        let skew = linalg::skew_residual(&theta)?;
        if !tol.admits(skew, theta.norm()) {
            violations.push(Violation::new("Theta skew-symmetric", skew));
        }
        let ratio = singular_ratio(&theta);
        if ratio <= SINGULAR_RATIO {
            violations.push(Violation::new("Theta nonsingular", ratio));
        }
        if !violations.is_empty() {
            return Err(Error::InvariantViolation(violations));
        }
        let r = linalg::symmetrize(&r);
        Ok(Self { d, m, r, theta })
    }

    pub fn d(&self) -> &RealMatrix {
        &self.d
    }
    pub fn m(&self) -> &RealMatrix {
        &self.m
    }
    pub fn r(&self) -> &RealMatrix {
        &self.r
    }
    pub fn theta(&self) -> &RealMatrix {
        &self.theta
    }
    pub fn modes(&self) -> usize {
        self.r.nrows() / 2
    }
    pub fn channels(&self) -> usize {
        self.d.nrows() / 2
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PmParamsJson {
    #[serde(rename = "D", with = "crate::json::real_matrix")]
    d: RealMatrix,
    #[serde(rename = "M", with = "crate::json::real_matrix")]
    m: RealMatrix,
    #[serde(rename = "R", with = "crate::json::real_matrix")]
    r: RealMatrix,
    #[serde(rename = "Theta", with = "crate::json::real_matrix")]
    theta: RealMatrix,
}

impl TryFrom<PmParamsJson> for PmParams {
    type Error = Error;
    fn try_from(j: PmParamsJson) -> Result<Self> {
        PmParams::new(j.d, j.m, j.r, j.theta)
    }
}

impl From<PmParams> for PmParamsJson {
    fn from(p: PmParams) -> Self {
        Self {
            d: p.d,
            m: p.m,
            r: p.r,
            theta: p.theta,
        }
    }
}

/// Annihilation-creation parameters: unitary scattering `S` (m x m),
/// coupling `N = Δ(N1, N2)` (2m x 2n), Hamiltonian `H = Δ(H1, H2)` (2n x 2n)
/// and the mode transformation `E = Δ(E1, E2)` with generalized CCR matrix
/// `𝚯 = E 𝐉 E*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AcParamsJson", into = "AcParamsJson")]
pub struct AcParams {
    s: ComplexMatrix,
    n1: ComplexMatrix,
    n2: ComplexMatrix,
    h1: ComplexMatrix,
    h2: ComplexMatrix,
    e1: ComplexMatrix,
    e2: ComplexMatrix,
}

impl AcParams {
    pub fn new(
        s: ComplexMatrix,
        n1: ComplexMatrix,
        n2: ComplexMatrix,
        h1: ComplexMatrix,
        h2: ComplexMatrix,
        e1: ComplexMatrix,
        e2: ComplexMatrix,
    ) -> Result<Self> {
        Self::with_tolerance(s, n1, n2, h1, h2, e1, e2, &StructureTolerance::default())
    }

    /// Validates every invariant; `Δ(H1, H2)` is made exactly Hermitian when
    /// its defect is within tolerance.
    #[allow(clippy::too_many_arguments)]
    pub fn with_tolerance(
        s: ComplexMatrix,
        n1: ComplexMatrix,
        n2: ComplexMatrix,
        h1: ComplexMatrix,
        h2: ComplexMatrix,
        e1: ComplexMatrix,
        e2: ComplexMatrix,
        tol: &StructureTolerance,
    ) -> Result<Self> {
        let m = s.nrows();
        let n = h1.nrows();
        if s.ncols() != m || m == 0 {
            return Err(Error::Dimension(format!("S must be square and nonempty, got {}x{}", s.nrows(), s.ncols())));
        }
        for (x, what, shape) in [
            (&n1, "N1", (m, n)),
            (&n2, "N2", (m, n)),
            (&h1, "H1", (n, n)),
            (&h2, "H2", (n, n)),
            (&e1, "E1", (n, n)),
            (&e2, "E2", (n, n)),
        ] {
            if x.shape() != shape {
                return Err(Error::Dimension(format!(
                    "{what} must be {}x{}, got {}x{}",
                    shape.0,
                    shape.1,
                    x.nrows(),
                    x.ncols()
                )));
            }
        }
        for (x, what) in [(&s, "S"), (&n1, "N1"), (&n2, "N2"), (&h1, "H1"), (&h2, "H2"), (&e1, "E1"), (&e2, "E2")] {
            linalg::ensure_finite(x, what)?;
        }

        let mut violations = Vec::new();
        let unit = linalg::unitarity_residual(&s)?;
        if !tol.admits(unit, s.norm()) {
            violations.push(Violation::new("S unitary", unit));
        }
        let h = linalg::doubled_up(&h1, &h2)?;
        let herm = linalg::hermitian_residual(&h)?;
        if !tol.admits(herm, h.norm()) {
            violations.push(Violation::new("H Hermitian", herm));
        }
        let e = linalg::doubled_up(&e1, &e2)?;
        let ratio = singular_ratio(&e);
        if ratio <= SINGULAR_RATIO {
            violations.push(Violation::new("E nonsingular", ratio));
        }
        if !violations.is_empty() {
            return Err(Error::InvariantViolation(violations));
        }
        let h1 = linalg::hermitize(&h1);
        let h2 = (&h2 + h2.transpose()) * c(0.5);
        Ok(Self { s, n1, n2, h1, h2, e1, e2 })
    }

    pub fn s(&self) -> &ComplexMatrix {
        &self.s
    }
    pub fn n1(&self) -> &ComplexMatrix {
        &self.n1
    }
    pub fn n2(&self) -> &ComplexMatrix {
        &self.n2
    }
    pub fn h1(&self) -> &ComplexMatrix {
        &self.h1
    }
    pub fn h2(&self) -> &ComplexMatrix {
        &self.h2
    }
    pub fn e1(&self) -> &ComplexMatrix {
        &self.e1
    }
    pub fn e2(&self) -> &ComplexMatrix {
        &self.e2
    }
    pub fn modes(&self) -> usize {
        self.h1.nrows()
    }
    pub fn channels(&self) -> usize {
        self.s.nrows()
    }

    /// `N = Δ(N1, N2)`.
    pub fn coupling(&self) -> ComplexMatrix {
        linalg::doubled_up(&self.n1, &self.n2).expect("validated shapes")
    }

    /// `H = Δ(H1, H2)`.
    pub fn hamiltonian(&self) -> ComplexMatrix {
        linalg::doubled_up(&self.h1, &self.h2).expect("validated shapes")
    }

    /// `K = Δ(S, 0)`.
    pub fn scattering(&self) -> ComplexMatrix {
        let m = self.channels();
        linalg::doubled_up(&self.s, &ComplexMatrix::zeros(m, m)).expect("validated shapes")
    }

    pub fn e(&self) -> ComplexMatrix {
        linalg::doubled_up(&self.e1, &self.e2).expect("validated shapes")
    }

    /// Generalized CCR matrix `𝚯 = E 𝐉 E*`.
    pub fn theta(&self) -> ComplexMatrix {
        let e = self.e();
        let bj = linalg::to_complex(&linalg::bold_j_matrix(2 * self.modes()).expect("even order"));
        &e * bj * e.adjoint()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct AcParamsJson {
    #[serde(with = "crate::json::complex_matrix")]
    S: ComplexMatrix,
    #[serde(with = "crate::json::complex_matrix")]
    N1: ComplexMatrix,
    #[serde(with = "crate::json::complex_matrix")]
    N2: ComplexMatrix,
    #[serde(with = "crate::json::complex_matrix")]
    H1: ComplexMatrix,
    #[serde(with = "crate::json::complex_matrix")]
    H2: ComplexMatrix,
    #[serde(with = "crate::json::complex_matrix")]
    E1: ComplexMatrix,
    #[serde(with = "crate::json::complex_matrix")]
    E2: ComplexMatrix,
}

impl TryFrom<AcParamsJson> for AcParams {
    type Error = Error;
    fn try_from(j: AcParamsJson) -> Result<Self> {
        AcParams::new(j.S, j.N1, j.N2, j.H1, j.H2, j.E1, j.E2)
    }
}

impl From<AcParams> for AcParamsJson {
    fn from(a: AcParams) -> Self {
        Self {
            S: a.s,
            N1: a.n1,
            N2: a.n2,
            H1: a.h1,
            H2: a.h2,
            E1: a.e1,
            E2: a.e2,
        }
    }
}

/// Complex realization `(F, G, L, K)` of the annihilation-creation form.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexStateSpace {
    pub f: ComplexMatrix,
    pub g: ComplexMatrix,
    pub l: ComplexMatrix,
    pub k: ComplexMatrix,
}

impl ComplexStateSpace {
    pub fn poles(&self) -> Vec<Complex64> {
        if self.f.is_empty() {
            return Vec::new();
        }
        let mut ev: Vec<Complex64> = self
            .f
            .clone()
            .eigenvalues()
            .map(|v| v.iter().copied().collect())
            .unwrap_or_default();
        crate::state_space::sort_spectrum(&mut ev);
        ev
    }

    /// `L (sI - F)^{-1} G + K`.
    pub fn eval_tf(&self, s: Complex64) -> Result<ComplexMatrix> {
        let n = self.f.nrows();
        if n == 0 {
            return Ok(self.k.clone());
        }
        let resolvent = ComplexMatrix::identity(n, n) * s - &self.f;
        let x = resolvent.lu().solve(&self.g).ok_or(Error::NearPole {
            point: s,
            eigenvalue: s,
        })?;
        Ok(&self.l * x + &self.k)
    }

    /// Largest deviation of `F, G, L, K` from doubled-up structure.
    pub fn doubled_up_residual(&self) -> f64 {
        [&self.f, &self.g, &self.l, &self.k]
            .into_iter()
            .map(doubled_up_defect)
            .fold(0.0, f64::max)
    }
}

fn doubled_up_defect(x: &ComplexMatrix) -> f64 {
    let (r, c) = (x.nrows() / 2, x.ncols() / 2);
    let x1 = x.view((0, 0), (r, c)).clone_owned();
    let x2 = x.view((0, c), (r, c)).clone_owned();
    (x - linalg::doubled_up(&x1, &x2).expect("same shape")).norm()
}

/// Itô matrix `Ω = I_{2m} + i J_{2m}`.
pub fn ito_matrix(m: usize) -> Result<ComplexMatrix> {
    if m == 0 {
        return Err(Error::Dimension("Ito matrix needs at least one channel".into()));
    }
    let j = linalg::to_complex(&linalg::j_block(m));
    Ok(ComplexMatrix::identity(2 * m, 2 * m) + j * I)
}

/// `B = 2ΘM^T`, `A = 2ΘR - ½ B J B^T Θ^{-1}`, `C = -D J B^T Θ^{-1}`.
pub fn build_pm_realization(p: &PmParams) -> Result<StateSpace> {
    let n = p.modes();
    if n == 0 {
        return StateSpace::static_gain(p.d.clone());
    }
    let j = linalg::j_block(p.channels());
    let theta_inv = linalg::inverse(&p.theta, "Theta")?;
    let b = &p.theta * p.m.transpose() * 2.0;
    let bjbt_ti = &b * &j * b.transpose() * &theta_inv;
    let a = &p.theta * &p.r * 2.0 - bjbt_ti * 0.5;
    let c = -(&p.d * &j * b.transpose() * &theta_inv);
    StateSpace::new(a, b, c, p.d.clone())
}

/// `F = -i𝚯H - ½𝚯N*𝐉N`, `G = -𝚯N*𝐉Δ(S,0)`, `L = N`, `K = Δ(S,0)`.
pub fn build_ac_realization(a: &AcParams) -> Result<ComplexStateSpace> {
    let k = a.scattering();
    let n = a.modes();
    let m = a.channels();
    if n == 0 {
        return Ok(ComplexStateSpace {
            f: ComplexMatrix::zeros(0, 0),
            g: ComplexMatrix::zeros(0, 2 * m),
            l: ComplexMatrix::zeros(2 * m, 0),
            k,
        });
    }
    let theta = a.theta();
    let nb = a.coupling();
    let bj = linalg::to_complex(&linalg::bold_j_matrix(2 * m)?);
    let theta_nstar_bj = &theta * nb.adjoint() * &bj;
    let f = &theta * a.hamiltonian() * (-I) - &theta_nstar_bj * &nb * c(0.5);
    let g = -(&theta_nstar_bj * &k);
    Ok(ComplexStateSpace { f, g, l: nb, k })
}

/// `D = ∇(S,0)`, `M = -½∇(S,0)^T J ∇(N1,N2)`, `R = ½∇(H1,H2)`,
/// `Θ = ∇(E1,E2) J ∇(E1,E2)^T`.
pub fn ac_to_pm(a: &AcParams) -> Result<PmParams> {
    let (n, m) = (a.modes(), a.channels());
    let d = linalg::nabla(&a.s, &ComplexMatrix::zeros(m, m))?;
    let coupling = linalg::nabla(&a.n1, &a.n2)?;
    let mm = -(d.transpose() * linalg::j_block(m) * coupling) * 0.5;
    let r = linalg::nabla(&a.h1, &a.h2)? * 0.5;
    let e = linalg::nabla(&a.e1, &a.e2)?;
    let theta = linalg::antisymmetrize(&(&e * linalg::j_block(n) * e.transpose()));
    PmParams::new(d, mm, r, theta)
}

/// Inverse of [`ac_to_pm`]. `E` is the deterministic factor of
/// `Θ = E J E^T` from [`skew::cholesky_like`].
pub fn pm_to_ac(p: &PmParams) -> Result<AcParams> {
    let (n, m) = (p.modes(), p.channels());
    let (d1, d2) = linalg::extract_bold_blocks(&p.d)?;
    let tol = StructureTolerance::default();
    let d2_norm = d2.norm();
    if !tol.admits(d2_norm, d1.norm()) {
        return Err(Error::InvariantViolation(vec![Violation::new(
            "D orthosymplectic (off-diagonal block D2 vanishes)",
            d2_norm,
        )]));
    }
    let (m1, m2) = linalg::extract_bold_blocks(&p.m)?;
    let bj = linalg::to_complex(&linalg::bold_j_matrix(2 * m)?);
    let zero_m = ComplexMatrix::zeros(m, m);
    let coupling = linalg::doubled_up(&d1, &zero_m)? * bj * linalg::doubled_up(&m1, &m2)? * (I * -2.0);
    let n1 = coupling.view((0, 0), (m, n)).clone_owned();
    let n2 = coupling.view((0, n), (m, n)).clone_owned();
    let (r1, r2) = linalg::extract_bold_blocks(&p.r)?;
    let (e1, e2) = if n == 0 {
        (ComplexMatrix::zeros(0, 0), ComplexMatrix::zeros(0, 0))
    } else {
        let e = skew::cholesky_like(&p.theta)?.sigma;
        linalg::extract_bold_blocks(&e)?
    };
    AcParams::new(d1, n1, n2, r1 * c(2.0), r2 * c(2.0), e1, e2)
}

/// Residuals of `A = ½T F T*`, `B = ½T G T*`, `C = ½T L T*`, `D = ½T K T*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub max: f64,
}

/// Builds both realizations from `p` and measures how far they are from
/// being related by the quadrature change of basis.
pub fn pm_to_ac_realization_consistency(p: &PmParams) -> Result<ConsistencyReport> {
    let real = build_pm_realization(p)?;
    let cplx = build_ac_realization(&pm_to_ac(p)?)?;
    let tn = linalg::t_matrix(2 * p.modes())?;
    let tm = linalg::t_matrix(2 * p.channels())?;
    let image = |t_left: &ComplexMatrix, x: &ComplexMatrix, t_right: &ComplexMatrix, target: &RealMatrix| {
        let y = t_left * x * t_right.adjoint() * c(0.5);
        let err = (&y - linalg::to_complex(target)).norm();
        let scale = target.norm().max(1.0);
        err / scale
    };
    let a = image(&tn, &cplx.f, &tn, real.a());
    let b = image(&tn, &cplx.g, &tm, real.b());
    let cc = image(&tm, &cplx.l, &tn, real.c());
    let d = image(&tm, &cplx.k, &tm, real.d());
    Ok(ConsistencyReport {
        a,
        b,
        c: cc,
        d,
        max: a.max(b).max(cc).max(d),
    })
}
