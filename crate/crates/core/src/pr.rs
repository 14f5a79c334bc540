//! Physical realizability: frequency-domain and time-domain certification,
//! the similarity matrix `F` linking a PR realization to its inverse, and
//! synthesis of position-momentum parameters from a PR realization.

use std::f64::consts::TAU;

use nalgebra::SVD;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::convert::{build_pm_realization, PmParams};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, RealMatrix, StructureTolerance};
use crate::skew;
use crate::state_space::{eigenvalues, RankTolerance, StateSpace};

/// Samples closer than this to a pole of `Γ` or `Γ~` are redrawn.
pub const POLE_CLEARANCE: f64 = 1e-6;
const SAMPLE_RADIUS: (f64, f64) = (1e-2, 1e2);
const MAX_DRAWS_PER_SAMPLE: usize = 1000;

/// End-to-end tolerance for synthesis verification.
pub const SYNTHESIS_TOLERANCE: f64 = 1e-7;
pub const SYNTHESIS_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrOptions {
    pub tol: f64,
    pub samples: usize,
    pub seed: u64,
    pub rank: RankTolerance,
}

impl Default for PrOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            samples: 20,
            seed: 42,
            rank: RankTolerance::default(),
        }
    }
}

impl PrOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PR")]
    Pr,
    #[serde(rename = "not-PR")]
    NotPr,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

/// Conditions whose residuals appear in a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `D^T D = I`.
    DOrthogonal,
    /// `Γ~(s) J Γ(s) = J` and its dual.
    JjUnitary,
    /// `D ∈ O(2m) ∩ Sp(2m)`.
    DOrthosymplectic,
    /// `AΘ + ΘA^T + BJB^T = 0`.
    CcrPreservation,
    /// `C = -DJB^TΘ^{-1}`.
    OutputMap,
    /// `A = 2ΘR - ½BJB^TΘ^{-1}` with `R` recovered from `A`.
    HamiltonianRecovery,
}

impl Condition {
    pub fn describe(self) -> &'static str {
        match self {
            Condition::DOrthogonal => "D not orthogonal",
            Condition::JjUnitary => "transfer function not (J,J)-unitary",
            Condition::DOrthosymplectic => "D not orthosymplectic",
            Condition::CcrPreservation => "A Theta + Theta A^T + B J B^T != 0",
            Condition::OutputMap => "C != -D J B^T Theta^{-1}",
            Condition::HamiltonianRecovery => "A not of the form 2 Theta R - 1/2 B J B^T Theta^{-1}",
        }
    }
}

/// Time-domain residuals for a given CCR matrix `Θ`. All but `d_orthosymplectic`
/// are normalized by the magnitude of the terms involved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeDomainResiduals {
    pub d_orthosymplectic: f64,
    pub ccr_preservation: f64,
    pub output_map: f64,
    pub hamiltonian_recovery: f64,
    /// `A^T F^T + F^T A + C^T J C` with `F = Θ^{-1}`; implied by the others.
    pub dual_lyapunov: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrReport {
    pub verdict: Verdict,
    pub d_orthogonality_residual: f64,
    pub d_symplectic_residual: f64,
    pub jj_unitarity_max_residual: Option<f64>,
    #[serde(with = "crate::json::complex_list")]
    pub sample_points: Vec<Complex64>,
    pub time_domain: Option<TimeDomainResiduals>,
    pub dominant_condition: Option<Condition>,
    pub failure_reason: Option<String>,
}

impl PrReport {
    pub fn is_pr(&self) -> bool {
        self.verdict == Verdict::Pr
    }

    /// Joins a frequency-domain and a time-domain report: PR only if both
    /// are, inconclusive if either is and neither rejects. When both reject,
    /// the time-domain attribution is kept since it names a specific
    /// structural condition.
    pub fn combine(freq: PrReport, time: PrReport) -> PrReport {
        let verdict = match (freq.verdict, time.verdict) {
            (Verdict::NotPr, _) | (_, Verdict::NotPr) => Verdict::NotPr,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pr,
        };
        let first_failing = if time.verdict == verdict { &time } else { &freq };
        let (dominant, reason) = if verdict == Verdict::Pr {
            (None, None)
        } else {
            (first_failing.dominant_condition, first_failing.failure_reason.clone())
        };
        PrReport {
            verdict,
            d_orthogonality_residual: freq.d_orthogonality_residual,
            d_symplectic_residual: freq.d_symplectic_residual,
            jj_unitarity_max_residual: freq.jj_unitarity_max_residual,
            sample_points: freq.sample_points,
            time_domain: time.time_domain,
            dominant_condition: dominant,
            failure_reason: reason,
        }
    }
}

/// Draws `count` points with `|s|` log-uniform in `[1e-2, 1e2]` and uniform
/// argument, keeping each at least [`POLE_CLEARANCE`] away from every `λ` and
/// `-λ` in `poles`.
pub fn sample_points(poles: &[Complex64], count: usize, seed: u64) -> Result<Vec<Complex64>> {
    if poles.iter().any(|p| !(p.re.is_finite() && p.im.is_finite())) {
        return Err(Error::Inconclusive("eigenvalue computation produced non-finite values".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (SAMPLE_RADIUS.0.ln(), SAMPLE_RADIUS.1.ln());
    let mut points = Vec::with_capacity(count);
    let mut draws = 0;
    while points.len() < count {
        if draws >= MAX_DRAWS_PER_SAMPLE * count.max(1) {
            return Err(Error::Inconclusive(format!(
                "could only place {} of {count} sample points away from the poles",
                points.len()
            )));
        }
        draws += 1;
        let radius = rng.random_range(lo..hi).exp();
        let angle = rng.random_range(0.0..TAU);
        let s = Complex64::from_polar(radius, angle);
        let clear = poles
            .iter()
            .all(|p| (s - p).norm() >= POLE_CLEARANCE && (s + p).norm() >= POLE_CLEARANCE);
        if clear {
            points.push(s);
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JjUnitarity {
    pub passed: bool,
    pub max_residual: f64,
    pub points: Vec<Complex64>,
}

/// Normalized defect of `X J Y = J`.
fn jj_defect(x: &ComplexMatrix, y: &ComplexMatrix, j: &ComplexMatrix) -> f64 {
    (x * j * y - j).norm() / (x.norm() * y.norm()).max(1.0)
}

/// Samples `‖Γ~(s) J Γ(s) - J‖` and `‖Γ(s) J Γ~(s) - J‖`, each divided by
/// `max(1, ‖Γ~(s)‖ ‖Γ(s)‖)`, at `num_samples` points.
pub fn check_jj_unitary(ss: &StateSpace, num_samples: usize, tol: f64, seed: u64) -> Result<JjUnitarity> {
    let m = ss.channels()?;
    let min_samples = ss.states() + 1;
    if num_samples < min_samples {
        return Err(Error::InvalidArgument(format!(
            "{num_samples} samples cannot certify a system of order {}; need at least {min_samples}",
            ss.states()
        )));
    }
    let j = linalg::to_complex(&linalg::j_block(m));
    let poles = eigenvalues(ss.a());
    let points = sample_points(&poles, num_samples, seed)?;
    let mut max_residual = 0.0f64;
    for &s in &points {
        let g = ss
            .eval_with_poles(s, &poles)
            .map_err(|e| Error::Inconclusive(e.to_string()))?;
        let gt = ss
            .eval_conjugate_with_poles(s, &poles)
            .map_err(|e| Error::Inconclusive(e.to_string()))?;
        let r = jj_defect(&gt, &g, &j).max(jj_defect(&g, &gt, &j));
        if !r.is_finite() {
            return Err(Error::Inconclusive(format!("non-finite residual at s = {s}")));
        }
        max_residual = max_residual.max(r);
    }
    Ok(JjUnitarity {
        passed: max_residual <= tol,
        max_residual,
        points,
    })
}

/// Picks the failing condition with the largest residual.
fn dominant(failing: &[(Condition, f64)]) -> Option<Condition> {
    failing
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(c, _)| *c)
}

fn reason(failing: &[(Condition, f64)], dominant: Option<Condition>) -> Option<String> {
    dominant.map(|d| {
        let residual = failing.iter().find(|(c, _)| *c == d).map_or(0.0, |x| x.1);
        format!("{} (residual {residual:.3e})", d.describe())
    })
}

/// PR iff the transfer function is (J,J)-unitary and `D` is orthogonal.
/// Symplecticity of `D` is reported but follows from the other two.
pub fn check_pr_frequency(ss: &StateSpace, opts: &PrOptions) -> Result<PrReport> {
    opts.validate()?;
    ss.channels()?;
    let d_orth = linalg::orthogonality_residual(ss.d())?;
    let d_symp = linalg::symplectic_residual(ss.d())?;
    let jj = match check_jj_unitary(ss, opts.samples, opts.tol, opts.seed) {
        Ok(jj) => jj,
        Err(Error::Inconclusive(msg)) => {
            return Ok(PrReport {
                verdict: Verdict::Inconclusive,
                d_orthogonality_residual: d_orth,
                d_symplectic_residual: d_symp,
                jj_unitarity_max_residual: None,
                sample_points: Vec::new(),
                time_domain: None,
                dominant_condition: None,
                failure_reason: Some(msg),
            })
        }
        Err(e) => return Err(e),
    };
    let mut failing = Vec::new();
    if d_orth > opts.tol {
        failing.push((Condition::DOrthogonal, d_orth));
    }
    if !jj.passed {
        failing.push((Condition::JjUnitary, jj.max_residual));
    }
    let dom = dominant(&failing);
    Ok(PrReport {
        verdict: if failing.is_empty() { Verdict::Pr } else { Verdict::NotPr },
        d_orthogonality_residual: d_orth,
        d_symplectic_residual: d_symp,
        jj_unitarity_max_residual: Some(jj.max_residual),
        sample_points: jj.points,
        time_domain: None,
        dominant_condition: dom,
        failure_reason: reason(&failing, dom),
    })
}

fn validate_theta(theta: &RealMatrix, states: usize, tol: f64) -> Result<RealMatrix> {
    if theta.shape() != (states, states) {
        return Err(Error::Dimension(format!(
            "Theta must be {states}x{states} to match the state dimension, got {}x{}",
            theta.nrows(),
            theta.ncols()
        )));
    }
    linalg::ensure_finite(theta, "Theta")?;
    let residual = linalg::skew_residual(theta)?;
    if residual > tol * theta.norm().max(1.0) {
        return Err(Error::NotSkew { residual });
    }
    let theta_inv = linalg::inverse(theta, "Theta")?;
    if linalg::condition_number(theta) > 1e12 {
        return Err(Error::Singular { what: "Theta" });
    }
    Ok(theta_inv)
}

pub fn time_domain_residuals(ss: &StateSpace, theta: &RealMatrix, tol: f64) -> Result<TimeDomainResiduals> {
    let m = ss.channels()?;
    let n2 = ss.states();
    ss.modes()?;
    let theta_inv = validate_theta(theta, n2, tol)?;
    let (a, b, c, d) = (ss.a(), ss.b(), ss.c(), ss.d());
    let j = linalg::j_block(m);

    let d_sp = linalg::orthogonality_residual(d)?.max(linalg::symplectic_residual(d)?);
    let bjbt = b * &j * b.transpose();
    let rel = |x: RealMatrix, scale: f64| x.norm() / scale.max(1.0);

    let ccr = rel(
        a * theta + theta * a.transpose() + &bjbt,
        2.0 * a.norm() * theta.norm() + bjbt.norm(),
    );
    let predicted_c = -(d * &j * b.transpose() * &theta_inv);
    let output = rel(c - &predicted_c, c.norm() + predicted_c.norm());

    let ta = &theta_inv * a;
    let r = (&ta + ta.transpose()) * 0.25;
    let a_rebuilt = theta * &r * 2.0 - &bjbt * &theta_inv * 0.5;
    let recovery = rel(a - &a_rebuilt, a.norm() + a_rebuilt.norm());

    // With F = Θ^{-1}, F^T = -F.
    let dual = -(a.transpose() * &theta_inv) - &theta_inv * a + c.transpose() * &j * c;
    let dual_lyapunov = rel(dual, 2.0 * a.norm() * theta_inv.norm() + c.norm_squared());

    Ok(TimeDomainResiduals {
        d_orthosymplectic: d_sp,
        ccr_preservation: ccr,
        output_map: output,
        hamiltonian_recovery: recovery,
        dual_lyapunov,
    })
}

/// Checks that `(A, B, C, D)` is the realization of some OQHO with CCR matrix
/// `Θ`: `D ∈ Sp(m)`, `AΘ + ΘA^T + BJB^T = 0`, `C = -DJB^TΘ^{-1}`, and `A`
/// has the Hamiltonian form for the recovered `R`. The last condition is a
/// consequence of the second and does not take part in attribution.
pub fn check_pr_time_domain(ss: &StateSpace, theta: &RealMatrix, tol: f64) -> Result<PrReport> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let res = time_domain_residuals(ss, theta, tol)?;
    let mut failing = Vec::new();
    for (cond, r) in [
        (Condition::DOrthosymplectic, res.d_orthosymplectic),
        (Condition::CcrPreservation, res.ccr_preservation),
        (Condition::OutputMap, res.output_map),
    ] {
        if r > tol {
            failing.push((cond, r));
        }
    }
    let mut dom = dominant(&failing);
    if res.hamiltonian_recovery > tol && dom.is_none() {
        failing.push((Condition::HamiltonianRecovery, res.hamiltonian_recovery));
        dom = Some(Condition::HamiltonianRecovery);
    }
    Ok(PrReport {
        verdict: if failing.is_empty() { Verdict::Pr } else { Verdict::NotPr },
        d_orthogonality_residual: linalg::orthogonality_residual(ss.d())?,
        d_symplectic_residual: linalg::symplectic_residual(ss.d())?,
        jj_unitarity_max_residual: None,
        sample_points: Vec::new(),
        time_domain: Some(res),
        dominant_condition: dom,
        failure_reason: reason(&failing, dom),
    })
}

/// `F` with its three defining equations' relative residuals and the
/// asymmetry `‖F + F^T‖ / ‖F‖` before it was made exactly skew.
#[derive(Debug, Clone, PartialEq)]
pub struct FSolution {
    pub f: RealMatrix,
    pub equation_residuals: [f64; 3],
    pub raw_asymmetry: f64,
}

struct Reduced {
    d_inv: RealMatrix,
    a_zero: RealMatrix,
    b_zero: RealMatrix,
    c_zero: RealMatrix,
    ctj: RealMatrix,
    jbt: RealMatrix,
}

fn inverse_data(ss: &StateSpace) -> Result<Reduced> {
    let m = ss.channels()?;
    if ss.states() == 0 {
        return Err(Error::NoDynamics);
    }
    let inv = ss.inverse_realization()?;
    let j = linalg::j_block(m);
    let (a_zero, b_zero, c_zero, d_inv) = inv.into_parts();
    Ok(Reduced {
        d_inv,
        a_zero,
        b_zero,
        c_zero,
        ctj: ss.c().transpose() * &j,
        jbt: j * ss.b().transpose(),
    })
}

fn f_equation_residuals(ss: &StateSpace, r: &Reduced, f: &RealMatrix) -> [f64; 3] {
    let rel = |x: RealMatrix, scale: f64| x.norm() / scale.max(1.0);
    // -D^{-1}C is the output matrix of the inverse realization.
    let e1 = rel(&r.jbt * f - &r.c_zero, r.c_zero.norm());
    let e2 = rel(f * &r.b_zero - &r.ctj, r.ctj.norm());
    let e3 = rel(
        ss.a().transpose() * f + f * &r.a_zero,
        f.norm() * (ss.a().norm() + r.a_zero.norm()),
    );
    [e1, e2, e3]
}

fn finish_f(ss: &StateSpace, r: &Reduced, f_raw: RealMatrix, tol: f64) -> Result<FSolution> {
    let scale = f_raw.norm();
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Singular { what: "F" });
    }
    let raw_asymmetry = (&f_raw + f_raw.transpose()).norm() / scale;
    let f = linalg::antisymmetrize(&f_raw);
    let equation_residuals = f_equation_residuals(ss, r, &f_raw);
    let worst = equation_residuals.iter().copied().fold(raw_asymmetry, f64::max);
    if worst > tol {
        return Err(Error::NoSolution { residual: worst });
    }
    if linalg::condition_number(&f) > 1e12 {
        return Err(Error::Singular { what: "F" });
    }
    Ok(FSolution {
        f,
        equation_residuals,
        raw_asymmetry,
    })
}

/// Solves `JB^T F = -D^{-1}C`, `F BD^{-1} = C^T J`,
/// `A^T F + F(A - BD^{-1}C) = 0` jointly in the least-squares sense.
pub fn compute_f(ss: &StateSpace, tol: f64) -> Result<FSolution> {
    let r = inverse_data(ss)?;
    let k = ss.states();
    let two_m = r.d_inv.nrows();
    let kk = k * k;
    let id = RealMatrix::identity(k, k);
    let blocks = [
        (id.kronecker(&r.jbt), r.c_zero.clone()),
        (r.b_zero.transpose().kronecker(&id), r.ctj.clone()),
        (
            id.kronecker(&ss.a().transpose()) + r.a_zero.transpose().kronecker(&id),
            RealMatrix::zeros(k, k),
        ),
    ];
    let rows = 2 * two_m * k + kk;
    let mut lhs = RealMatrix::zeros(rows, kk);
    let mut rhs = RealMatrix::zeros(rows, 1);
    let mut at = 0;
    for (op, target) in &blocks {
        lhs.view_mut((at, 0), (op.nrows(), kk)).copy_from(op);
        for (i, v) in target.iter().enumerate() {
            rhs[(at + i, 0)] = *v;
        }
        at += op.nrows();
    }
    let svd = SVD::new(lhs, true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= (rows as f64) * f64::EPSILON * smax {
        return Err(Error::NotRealizable(
            "the similarity equations do not determine F uniquely (realization not minimal)".into(),
        ));
    }
    let x = svd
        .solve(&rhs, 0.0)
        .map_err(|_| Error::Singular { what: "F least-squares system" })?;
    let f_raw = RealMatrix::from_column_slice(k, k, x.as_slice());
    finish_f(ss, &r, f_raw, tol)
}

fn krylov(a: &RealMatrix, b: &RealMatrix, blocks: usize) -> RealMatrix {
    let mut out = RealMatrix::zeros(a.nrows(), b.ncols() * blocks);
    let mut cur = b.clone();
    for i in 0..blocks {
        out.view_mut((0, i * b.ncols()), cur.shape()).copy_from(&cur);
        cur = a * cur;
    }
    out
}

/// Independent solution `F = W_2 W_1^+` from the controllability matrices of
/// `(A - BD^{-1}C, BD^{-1})` and `(-A^T, C^T J)`.
pub fn compute_f_by_controllability(ss: &StateSpace, tol: f64) -> Result<FSolution> {
    let r = inverse_data(ss)?;
    let k = ss.states();
    let w1 = krylov(&r.a_zero, &r.b_zero, k);
    let w2 = krylov(&(-ss.a().transpose()), &r.ctj, k);
    let pinv = w1
        .pseudo_inverse(f64::EPSILON * k as f64)
        .map_err(|_| Error::Singular { what: "controllability matrix" })?;
    finish_f(ss, &r, w2 * pinv, tol)
}

/// Target CCR matrix for synthesis.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaTarget {
    /// `J` of the (minimal) state dimension.
    Canonical,
    Explicit(RealMatrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResiduals {
    /// Relative residuals of the three equations defining `F`.
    pub f_equations: [f64; 3],
    pub f_raw_asymmetry: f64,
    pub rhat_raw_asymmetry: f64,
    /// `‖F^{-1} - ΣΘΣ^T‖ / ‖F^{-1}‖`.
    pub ccr_factorization: f64,
    /// Largest relative transfer-function mismatch at the check points.
    pub rebuild_max_relative: f64,
    pub time_domain: Option<TimeDomainResiduals>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    #[serde(rename = "F", with = "crate::json::real_matrix")]
    pub f: RealMatrix,
    #[serde(rename = "Rhat", with = "crate::json::real_matrix")]
    pub rhat: RealMatrix,
    #[serde(rename = "Sigma", with = "crate::json::real_matrix")]
    pub sigma: RealMatrix,
    pub params: PmParams,
    pub equation_residuals: SynthesisResiduals,
    /// Original state dimension when a non-minimal input was reduced.
    pub reduced_from: Option<usize>,
}

fn rebuild_mismatch(original: &StateSpace, rebuilt: &StateSpace, seed: u64) -> Result<f64> {
    let mut poles = eigenvalues(original.a());
    poles.extend(eigenvalues(rebuilt.a()));
    let points = sample_points(&poles, SYNTHESIS_SAMPLES, seed)?;
    let mut worst = 0.0f64;
    for s in points {
        let g0 = original.eval_tf(s)?;
        let g1 = rebuilt.eval_tf(s)?;
        worst = worst.max(linalg::relative_difference_c(&g0, &g1));
    }
    Ok(worst)
}

/// Recovers `(D, M, R, Θ)` from a PR realization:
/// `R̂ = ½F(AF^{-1} + ½BJB^T)F`, `F^{-1} = ΣΘΣ^T`,
/// `M = -½B^TΣ^{-T}Θ^{-1}`, `R = Σ^T R̂ Σ`. The result is verified by
/// rebuilding the realization and comparing transfer functions.
pub fn synthesize(ss: &StateSpace, target: &ThetaTarget, opts: &PrOptions) -> Result<SynthesisResult> {
    let report = check_pr_frequency(ss, opts)?;
    match report.verdict {
        Verdict::Pr => {}
        Verdict::NotPr => {
            return Err(Error::NotRealizable(report.failure_reason.unwrap_or_default()));
        }
        Verdict::Inconclusive => {
            return Err(Error::Inconclusive(report.failure_reason.unwrap_or_default()));
        }
    }
    let minimal = ss.minimal_realization(&opts.rank)?;
    let reduced_from = (minimal.states() < ss.states()).then_some(ss.states());
    let k = minimal.states();
    if k % 2 != 0 {
        return Err(Error::NotRealizable(format!("minimal realization has odd order {k}")));
    }
    let theta = match target {
        ThetaTarget::Canonical => linalg::j_block(k / 2),
        ThetaTarget::Explicit(t) => t.clone(),
    };
    let d_tol = StructureTolerance::new(opts.tol, StructureTolerance::default().relative)?;

    if k == 0 {
        let params = PmParams::with_tolerance(
            minimal.d().clone(),
            RealMatrix::zeros(minimal.outputs(), 0),
            RealMatrix::zeros(0, 0),
            theta,
            &d_tol,
        )?;
        return Ok(SynthesisResult {
            f: RealMatrix::zeros(0, 0),
            rhat: RealMatrix::zeros(0, 0),
            sigma: RealMatrix::zeros(0, 0),
            params,
            equation_residuals: SynthesisResiduals {
                f_equations: [0.0; 3],
                f_raw_asymmetry: 0.0,
                rhat_raw_asymmetry: 0.0,
                ccr_factorization: 0.0,
                rebuild_max_relative: 0.0,
                time_domain: None,
            },
            reduced_from,
        });
    }
    let theta_inv = validate_theta(&theta, k, opts.tol)?;

    let fs = compute_f(&minimal, opts.tol)?;
    let f = &fs.f;
    let f_inv = linalg::inverse(f, "F")?;
    let (a, b, d) = (minimal.a(), minimal.b(), minimal.d());
    let j = linalg::j_block(minimal.channels()?);

    let rhat_raw = f * (a * &f_inv + b * &j * b.transpose() * 0.5) * f * 0.5;
    let rhat_norm = rhat_raw.norm();
    let rhat_raw_asymmetry = if rhat_norm == 0.0 {
        0.0
    } else {
        linalg::symmetry_residual(&rhat_raw)? / rhat_norm
    };
    let rhat = linalg::symmetrize(&rhat_raw);

    let sigma = skew::relate_ccr(&f_inv, &theta)?;
    let ccr_factorization = (&f_inv - &sigma * &theta * sigma.transpose()).norm() / f_inv.norm();
    let sigma_inv_t = linalg::inverse(&sigma, "Sigma")?.transpose();

    let m = -(b.transpose() * &sigma_inv_t * &theta_inv) * 0.5;
    let r = sigma.transpose() * &rhat * &sigma;
    let params = PmParams::with_tolerance(d.clone(), m, r, theta.clone(), &d_tol)?;

    let rebuilt = build_pm_realization(&params)?;
    let rebuild_max_relative = rebuild_mismatch(ss, &rebuilt, opts.seed.wrapping_add(1))?;
    if rebuild_max_relative > SYNTHESIS_TOLERANCE {
        return Err(Error::Verification(format!(
            "rebuilt transfer function differs by {rebuild_max_relative:.3e} (relative)"
        )));
    }
    let td = check_pr_time_domain(&rebuilt, &theta, SYNTHESIS_TOLERANCE)?;
    if !td.is_pr() {
        return Err(Error::Verification(format!(
            "rebuilt realization fails the time-domain conditions: {}",
            td.failure_reason.unwrap_or_default()
        )));
    }

    Ok(SynthesisResult {
        f: fs.f.clone(),
        rhat,
        sigma,
        params,
        equation_residuals: SynthesisResiduals {
            f_equations: fs.equation_residuals,
            f_raw_asymmetry: fs.raw_asymmetry,
            rhat_raw_asymmetry,
            ccr_factorization,
            rebuild_max_relative,
            time_domain: td.time_domain,
        },
        reduced_from,
    })
}

/// Whether the transmission zeros are the mirror image of the poles.
pub fn pr_zero_pole_mirror(ss: &StateSpace) -> Result<bool> {
    Ok(ss.spectrum_report()?.mirror_symmetric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example;
    use crate::random;
    use crate::state_space::{DiagonalRational, RationalEntry};

    fn worked() -> StateSpace {
        example::transfer_matrix().realization().unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_pr(seed: u64) -> (PmParams, StateSpace) {
        let mut r = rng(seed);
        let n = r.random_range(1..=3);
        let m = r.random_range(1..=3);
        let p = random::pm_params(n, m, &mut r);
        let ss = build_pm_realization(&p).unwrap();
        (p, ss)
    }

    #[test]
    fn samples_avoid_poles_and_are_reproducible() {
        let poles = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let a = sample_points(&poles, 50, 7).unwrap();
        assert_eq!(a, sample_points(&poles, 50, 7).unwrap());
        assert_ne!(a, sample_points(&poles, 50, 8).unwrap());
        for s in &a {
            assert!(s.norm() >= 1e-2 * (1.0 - 1e-12) && s.norm() <= 1e2 * (1.0 + 1e-12));
            for p in &poles {
                assert!((s - p).norm() >= POLE_CLEARANCE && (s + p).norm() >= POLE_CLEARANCE);
            }
        }
        assert!(a.iter().any(|s| s.re < 0.0) && a.iter().any(|s| s.re > 0.0));
    }

    #[test]
    fn worked_example_is_jj_unitary() {
        let jj = check_jj_unitary(&worked(), 20, 1e-8, 42).unwrap();
        assert!(jj.passed);
        assert!(jj.max_residual < 1e-10, "{}", jj.max_residual);
        assert_eq!(jj.points.len(), 20);
    }

    #[test]
    fn static_identity_is_jj_unitary() {
        let ss = StateSpace::static_gain(linalg::identity(2)).unwrap();
        let jj = check_jj_unitary(&ss, 5, 1e-12, 1).unwrap();
        assert!(jj.passed);
        assert_eq!(jj.max_residual, 0.0);
    }

    #[test]
    fn perturbed_entry_breaks_jj_unitarity() {
        let mut entries = example::transfer_matrix().entries;
        entries[1] = RationalEntry::new(vec![1.0, -2.0], vec![1.0, 1.0]).unwrap();
        let ss = DiagonalRational::new(entries).realization().unwrap();
        let jj = check_jj_unitary(&ss, 20, 1e-8, 42).unwrap();
        assert!(!jj.passed);
        // On the imaginary axis |(iw - 2)/(iw + 1)| != 1, e.g. 2 at w = 0.
        let g = ss.eval_tf(Complex64::new(0.0, 0.0) + Complex64::new(0.0, 1e-3)).unwrap();
        assert!((g[(1, 1)].norm() - 1.0).abs() > 0.5);
    }

    #[test]
    fn too_few_samples_are_rejected() {
        assert!(matches!(
            check_jj_unitary(&worked(), 4, 1e-8, 42),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn frequency_check_on_worked_example() {
        let rep = check_pr_frequency(&worked(), &PrOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Pr);
        assert!(rep.d_orthogonality_residual < 1e-12);
        assert!(rep.failure_reason.is_none());
    }

    #[test]
    fn non_orthogonal_static_gain_is_rejected() {
        let d = RealMatrix::from_diagonal(&nalgebra::dvector![2.0, 0.5, 1.0, 1.0]);
        let ss = StateSpace::static_gain(d).unwrap();
        let rep = check_pr_frequency(&ss, &PrOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::NotPr);
        assert_eq!(rep.dominant_condition, Some(Condition::DOrthogonal));
        assert!(rep.failure_reason.unwrap().starts_with("D not orthogonal"));
        assert!(rep.d_orthogonality_residual > 3.0);
    }

    #[test]
    fn random_parameter_realizations_pass_frequency_check() {
        for seed in 0..30 {
            let (_, ss) = random_pr(seed);
            let rep = check_pr_frequency(&ss, &PrOptions::default()).unwrap();
            assert_eq!(rep.verdict, Verdict::Pr, "seed {seed}: {:?}", rep.failure_reason);
            assert!(rep.jj_unitarity_max_residual.unwrap() < 1e-9);
            assert!(rep.d_orthogonality_residual < 1e-12);
        }
    }

    #[test]
    fn time_domain_check_on_worked_parameters() {
        let ss = build_pm_realization(&example::pm_params()).unwrap();
        let rep = check_pr_time_domain(&ss, &example::theta(), 1e-8).unwrap();
        assert_eq!(rep.verdict, Verdict::Pr);
        let td = rep.time_domain.unwrap();
        for r in [td.d_orthosymplectic, td.ccr_preservation, td.output_map, td.hamiltonian_recovery, td.dual_lyapunov] {
            assert!(r < 1e-12, "{td:?}");
        }
    }

    #[test]
    fn negated_output_map_is_attributed() {
        let ss = build_pm_realization(&example::pm_params()).unwrap();
        let (a, b, c, d) = ss.into_parts();
        let flipped = StateSpace::new(a, b, -c, d).unwrap();
        let rep = check_pr_time_domain(&flipped, &example::theta(), 1e-8).unwrap();
        assert_eq!(rep.verdict, Verdict::NotPr);
        assert_eq!(rep.dominant_condition, Some(Condition::OutputMap));
    }

    #[test]
    fn symmetric_injection_is_attributed() {
        let mut r = rng(11);
        for seed in 0..10 {
            let (p, ss) = random_pr(seed);
            let (a, b, c, d) = ss.into_parts();
            let k = a.nrows();
            let s = linalg::symmetrize(&RealMatrix::from_fn(k, k, |_, _| r.random_range(-1.0..1.0)));
            let bad = StateSpace::new(a + s, b, c, d).unwrap();
            let rep = check_pr_time_domain(&bad, p.theta(), 1e-8).unwrap();
            assert_eq!(rep.verdict, Verdict::NotPr);
            assert_eq!(rep.dominant_condition, Some(Condition::CcrPreservation));
        }
    }

    #[test]
    fn time_domain_rejects_bad_theta() {
        let ss = build_pm_realization(&example::pm_params()).unwrap();
        assert!(matches!(
            check_pr_time_domain(&ss, &linalg::identity(4), 1e-8),
            Err(Error::NotSkew { .. })
        ));
        assert!(matches!(
            check_pr_time_domain(&ss, &RealMatrix::zeros(4, 4), 1e-8),
            Err(Error::Singular { .. })
        ));
        assert!(matches!(
            check_pr_time_domain(&ss, &linalg::j_matrix(2).unwrap(), 1e-8),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn f_for_worked_example() {
        let ss = worked();
        let fs = compute_f(&ss, 1e-8).unwrap();
        assert!(fs.equation_residuals.iter().all(|r| *r < 1e-8), "{:?}", fs.equation_residuals);
        assert_eq!((&fs.f + fs.f.transpose()).norm(), 0.0);
        assert!(fs.raw_asymmetry < 1e-8);
    }

    #[test]
    fn f_is_inverse_theta_for_parameter_realizations() {
        for seed in 0..20 {
            let (p, ss) = random_pr(seed);
            let fs = compute_f(&ss, 1e-8).unwrap();
            let theta_inv = linalg::inverse(p.theta(), "Theta").unwrap();
            assert!(linalg::relative_difference(&fs.f, &theta_inv) < 1e-8, "seed {seed}");
        }
    }

    #[test]
    fn f_solvers_agree() {
        for seed in 0..20 {
            let (_, ss) = random_pr(seed);
            let a = compute_f(&ss, 1e-8).unwrap();
            let b = compute_f_by_controllability(&ss, 1e-6).unwrap();
            assert!(linalg::relative_difference(&a.f, &b.f) < 1e-7, "seed {seed}");
        }
    }

    #[test]
    fn static_system_has_no_f() {
        let ss = StateSpace::static_gain(linalg::identity(2)).unwrap();
        assert_eq!(compute_f(&ss, 1e-8), Err(Error::NoDynamics));
    }

    #[test]
    fn synthesis_of_worked_example() {
        let ss = worked();
        let res = synthesize(&ss, &ThetaTarget::Canonical, &PrOptions::default()).unwrap();
        assert_eq!(res.params.d(), &linalg::identity(4));
        assert_eq!(res.params.theta(), &example::theta());
        assert!(res.equation_residuals.rebuild_max_relative < 1e-7);
        let rebuilt = build_pm_realization(&res.params).unwrap();
        let tf = example::transfer_matrix();
        for s in sample_points(&[], 10, 3).unwrap() {
            if s.norm() > 0.1 && (s - 1.0).norm() > 0.1 && (s + 1.0).norm() > 0.1 {
                assert!(linalg::relative_difference_c(&rebuilt.eval_tf(s).unwrap(), &tf.eval(s)) < 1e-7);
            }
        }
    }

    #[test]
    fn synthesis_of_static_system() {
        let mut r = rng(4);
        let d = random::orthosymplectic(2, &mut r);
        let ss = StateSpace::static_gain(d.clone()).unwrap();
        let res = synthesize(&ss, &ThetaTarget::Canonical, &PrOptions::default()).unwrap();
        assert_eq!(res.params.d(), &d);
        assert_eq!(res.params.m().shape(), (4, 0));
        assert_eq!(res.params.r().shape(), (0, 0));
    }

    #[test]
    fn synthesis_with_random_targets() {
        for seed in 0..20 {
            let (_, ss) = random_pr(seed);
            let mut r = rng(100 + seed);
            let theta = random::skew_nonsingular(ss.states() / 2, &mut r);
            let res = synthesize(&ss, &ThetaTarget::Explicit(theta.clone()), &PrOptions::default()).unwrap();
            assert!(res.equation_residuals.rebuild_max_relative < 1e-7);
            assert!(res.equation_residuals.f_raw_asymmetry < 1e-8);
            assert!(res.equation_residuals.rhat_raw_asymmetry < 1e-9);
            assert_eq!(res.params.theta(), &theta);
        }
    }

    #[test]
    fn gauge_covariance_of_synthesis() {
        let (_, ss) = random_pr(7);
        let mut r = rng(70);
        let k = ss.states() / 2;
        let t1 = random::skew_nonsingular(k, &mut r);
        let t2 = random::skew_nonsingular(k, &mut r);
        let p1 = synthesize(&ss, &ThetaTarget::Explicit(t1), &PrOptions::default()).unwrap().params;
        let p2 = synthesize(&ss, &ThetaTarget::Explicit(t2), &PrOptions::default()).unwrap().params;
        let s1 = build_pm_realization(&p1).unwrap();
        let s2 = build_pm_realization(&p2).unwrap();
        assert!(rebuild_mismatch(&s1, &s2, 9).unwrap() < 1e-7);
    }

    #[test]
    fn non_minimal_input_is_reduced() {
        let (_, ss) = random_pr(3);
        let (a, b, c, d) = ss.into_parts();
        let k = a.nrows();
        // Append two uncontrollable, unobservable states.
        let mut a2 = RealMatrix::zeros(k + 2, k + 2);
        a2.view_mut((0, 0), (k, k)).copy_from(&a);
        a2[(k, k)] = -3.0;
        a2[(k + 1, k + 1)] = 2.0;
        let b2 = b.clone().insert_rows(k, 2, 0.0);
        let c2 = c.clone().insert_columns(k, 2, 0.0);
        let padded = StateSpace::new(a2, b2, c2, d).unwrap();
        let res = synthesize(&padded, &ThetaTarget::Canonical, &PrOptions::default()).unwrap();
        assert_eq!(res.reduced_from, Some(k + 2));
        assert_eq!(res.params.theta().nrows(), k);
    }

    #[test]
    fn synthesis_refuses_non_pr_input() {
        let d = RealMatrix::from_diagonal(&nalgebra::dvector![2.0, 0.5]);
        let ss = StateSpace::static_gain(d).unwrap();
        assert!(matches!(
            synthesize(&ss, &ThetaTarget::Canonical, &PrOptions::default()),
            Err(Error::NotRealizable(_))
        ));
    }

    #[test]
    fn mirror_property() {
        assert!(pr_zero_pole_mirror(&worked()).unwrap());
        // (s+3)(s+4) / ((s+1)(s+2)): poles -1, -2 and zeros -3, -4.
        let e = RationalEntry::new(vec![1.0, 7.0, 12.0], vec![1.0, 3.0, 2.0]).unwrap();
        let ss = DiagonalRational::new(vec![e]).realization().unwrap();
        assert!(!pr_zero_pole_mirror(&ss).unwrap());
        for seed in 0..10 {
            assert!(pr_zero_pole_mirror(&random_pr(seed).1).unwrap());
        }
    }

    #[test]
    fn combined_report_prefers_time_domain_attribution() {
        let ss = build_pm_realization(&example::pm_params()).unwrap();
        let (a, b, c, d) = ss.into_parts();
        let flipped = StateSpace::new(a, b, -c, d).unwrap();
        let freq = check_pr_frequency(&flipped, &PrOptions::default()).unwrap();
        assert_eq!(freq.dominant_condition, Some(Condition::JjUnitary));
        let time = check_pr_time_domain(&flipped, &example::theta(), 1e-8).unwrap();
        let both = PrReport::combine(freq.clone(), time);
        assert_eq!(both.verdict, Verdict::NotPr);
        assert_eq!(both.dominant_condition, Some(Condition::OutputMap));
        assert_eq!(both.jj_unitarity_max_residual, freq.jj_unitarity_max_residual);
        assert!(both.time_domain.is_some());

        let ok = build_pm_realization(&example::pm_params()).unwrap();
        let both = PrReport::combine(
            check_pr_frequency(&ok, &PrOptions::default()).unwrap(),
            check_pr_time_domain(&ok, &example::theta(), 1e-8).unwrap(),
        );
        assert!(both.is_pr());
        assert!(both.failure_reason.is_none());
    }

    #[test]
    fn report_json_roundtrip() {
        let rep = check_pr_frequency(&worked(), &PrOptions::default()).unwrap();
        let text = serde_json::to_string(&rep).unwrap();
        assert!(text.contains("\"verdict\":\"PR\""));
        let back: PrReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rep);
    }
}
