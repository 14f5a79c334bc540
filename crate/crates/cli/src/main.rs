use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use oqho_core::convert::{ac_to_pm, build_pm_realization, pm_to_ac};
use oqho_core::json::{detect, DocumentKind};
use oqho_core::pr::{self, check_pr_frequency, check_pr_time_domain, synthesize};
use oqho_core::{
    example, linalg, skew, AcParams, DiagonalRational, Error, PmParams, PrOptions, PrReport, RealMatrix, StateSpace,
    ThetaTarget, Verdict,
};
use serde::Serialize;
use serde_json::Value;

#[derive(Parser, Debug)]
#[command(name = "oqho")]
#[command(about = "Physical realizability checks and parameter synthesis for linear quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide physical realizability of a state-space or rational-diagonal system
    Check(CheckArgs),
    /// Recover (D, M, R, Theta) parameters from a realizable system
    Synthesize(CheckArgs),
    /// Convert between position-momentum and annihilation-creation parameters
    Convert(ConvertArgs),
    /// Poles, transmission zeros and their mirror symmetry
    Spectrum(IoArgs),
    /// Factor a skew-symmetric matrix as Sigma J Sigma^T
    Factor(IoArgs),
    /// Reproduce the two-mode reference example
    Example(OutputArgs),
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output path. Prints to stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IoArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    io: IoArgs,
    /// CCR matrix: `J` for the canonical one, or a path to a real matrix JSON file
    #[arg(long)]
    theta: Option<String>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Direction {
    Pm2ac,
    Ac2pm,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long, value_enum)]
    direction: Direction,
}

/// Outcome of a command that does not produce a PR verdict of its own.
enum Failure {
    Usage(anyhow::Error),
    NotPr(String),
    Inconclusive(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::NotPr(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Inconclusive(_) => 3,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotRealizable(msg) => Failure::NotPr(msg),
            Error::Inconclusive(msg) => Failure::Inconclusive(msg),
            other => Failure::Usage(other.into()),
        }
    }
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Pr => 0,
        Verdict::NotPr => 1,
        Verdict::Inconclusive => 3,
    }
}

fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_as<T: serde::de::DeserializeOwned>(value: Value, kind: DocumentKind) -> anyhow::Result<T> {
    serde_json::from_value(value).map_err(|e| anyhow!("invalid {} document: {e}", kind.name()))
}

fn load_system(path: &Path) -> anyhow::Result<StateSpace> {
    let value = read_json(path)?;
    match detect(&value)? {
        DocumentKind::StateSpace => parse_as(value, DocumentKind::StateSpace),
        DocumentKind::RationalDiagonal => {
            let tf: DiagonalRational = parse_as(value, DocumentKind::RationalDiagonal)?;
            Ok(tf.realization()?)
        }
        other => bail!("expected a state-space or rational diagonal document, got {}", other.name()),
    }
}

fn load_matrix(path: &Path) -> anyhow::Result<RealMatrix> {
    let value = read_json(path)?;
    match detect(&value)? {
        DocumentKind::RealMatrix => {
            let m: oqho_core::json::RealMatrixJson = parse_as(value, DocumentKind::RealMatrix)?;
            RealMatrix::try_from(m).map_err(|e| anyhow!("invalid real matrix document: {e}"))
        }
        other => bail!("expected a real matrix document, got {}", other.name()),
    }
}

fn theta_target(spec: Option<&str>) -> anyhow::Result<Option<ThetaTarget>> {
    match spec {
        None => Ok(None),
        Some("J") => Ok(Some(ThetaTarget::Canonical)),
        Some(path) => Ok(Some(ThetaTarget::Explicit(load_matrix(Path::new(path))?))),
    }
}

fn emit_text(out: &OutputArgs, text: &str) -> anyhow::Result<()> {
    match &out.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit<T: Serialize>(out: &OutputArgs, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit_text(out, &text)
}

fn options(args: &CheckArgs, ss: &StateSpace) -> anyhow::Result<PrOptions> {
    if !(args.tol.is_finite() && args.tol > 0.0) {
        bail!("--tol must be positive, got {}", args.tol);
    }
    let needed = ss.states() + 1;
    if args.samples < needed {
        bail!(
            "--samples must be at least {needed} for a system with {} states, got {}",
            ss.states(),
            args.samples
        );
    }
    Ok(PrOptions {
        tol: args.tol,
        samples: args.samples,
        seed: args.seed,
        ..PrOptions::default()
    })
}

fn cmd_check(args: &CheckArgs) -> Result<u8, Failure> {
    let ss = load_system(&args.io.input)?;
    let opts = options(args, &ss)?;
    let target = theta_target(args.theta.as_deref())?;
    let mut report = check_pr_frequency(&ss, &opts)?;
    if let Some(target) = target {
        let theta = match target {
            ThetaTarget::Canonical if ss.states() == 0 => RealMatrix::zeros(0, 0),
            ThetaTarget::Canonical => linalg::j_matrix(ss.states()).map_err(anyhow::Error::from)?,
            ThetaTarget::Explicit(t) => t,
        };
        let time = check_pr_time_domain(&ss, &theta, opts.tol)?;
        report = PrReport::combine(report, time);
    }
    emit(&args.io.out, &report)?;
    if let Some(reason) = &report.failure_reason {
        eprintln!("{reason}");
    }
    Ok(verdict_code(report.verdict))
}

fn cmd_synthesize(args: &CheckArgs) -> Result<u8, Failure> {
    let ss = load_system(&args.io.input)?;
    let opts = options(args, &ss)?;
    let target = theta_target(args.theta.as_deref())?.unwrap_or(ThetaTarget::Canonical);
    let result = synthesize(&ss, &target, &opts)?;
    emit(&args.io.out, &result)?;
    Ok(0)
}

fn cmd_convert(args: &ConvertArgs) -> Result<u8, Failure> {
    let value = read_json(&args.io.input)?;
    let kind = detect(&value).map_err(anyhow::Error::from)?;
    match (args.direction, kind) {
        (Direction::Pm2ac, DocumentKind::PmParams) => {
            let p: PmParams = parse_as(value, kind)?;
            emit(&args.io.out, &pm_to_ac(&p)?)?;
        }
        (Direction::Ac2pm, DocumentKind::AcParams) => {
            let a: AcParams = parse_as(value, kind)?;
            emit(&args.io.out, &ac_to_pm(&a)?)?;
        }
        (dir, kind) => {
            return Err(Failure::Usage(anyhow!(
                "direction {dir:?} does not accept a {} document",
                kind.name()
            )))
        }
    }
    Ok(0)
}

fn cmd_spectrum(args: &IoArgs) -> Result<u8, Failure> {
    let ss = load_system(&args.input)?;
    emit(&args.out, &ss.spectrum_report()?)?;
    Ok(0)
}

fn cmd_factor(args: &IoArgs) -> Result<u8, Failure> {
    let theta = load_matrix(&args.input)?;
    let fact = skew::cholesky_like(&theta)?;
    emit(&args.out, &fact)?;
    eprintln!("reconstruction residual: {:.3e}", fact.relative_residual(&theta));
    Ok(0)
}

fn format_real(x: f64) -> String {
    let r = (x * 1e6).round() / 1e6 + 0.0;
    format!("{r}")
}

/// Matches computed eigenvalues to reference values in the reference order.
fn in_reference_order(computed: &[oqho_core::Complex64], reference: &[f64]) -> (Vec<f64>, f64) {
    let mut free: Vec<bool> = vec![true; computed.len()];
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    for &r in reference {
        let best = computed
            .iter()
            .enumerate()
            .filter(|(i, _)| free[*i])
            .min_by(|a, b| (a.1 - r).norm().total_cmp(&(b.1 - r).norm()));
        match best {
            Some((i, z)) => {
                free[i] = false;
                worst = worst.max((z - r).norm());
                out.push(z.re);
            }
            None => worst = f64::INFINITY,
        }
    }
    if computed.len() != reference.len() {
        worst = f64::INFINITY;
    }
    (out, worst)
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|x| format_real(*x)).collect::<Vec<_>>().join(",")
}

fn max_dev(a: &oqho_core::ComplexMatrix, b: &oqho_core::ComplexMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn max_dev_real(a: &RealMatrix, b: &RealMatrix) -> f64 {
    (a - b).amax()
}

fn example_report() -> anyhow::Result<(String, bool)> {
    let tf = example::transfer_matrix();
    let ss = tf.realization()?;
    let opts = PrOptions::default();
    let report = check_pr_frequency(&ss, &opts)?;
    let spectrum = ss.spectrum_report()?;
    let (poles, pole_dev) = in_reference_order(&spectrum.poles, &example::POLES);
    let (zeros, zero_dev) = in_reference_order(&spectrum.zeros, &example::ZEROS);

    let printed = example::pm_params();
    let direct = build_pm_realization(&printed)?;
    let mut direct_dev = 0.0f64;
    for s in pr::sample_points(&direct.poles(), 10, opts.seed)? {
        direct_dev = direct_dev.max(linalg::relative_difference_c(&direct.eval_tf(s)?, &tf.eval(s)));
    }

    let synth = synthesize(&ss, &ThetaTarget::Canonical, &opts)?;
    let ac = pm_to_ac(&printed)?;
    let (s_ref, h_ref, n_ref) = example::ac_matrices();
    let back = ac_to_pm(&example::ac_params())?;

    let pr = report.verdict == Verdict::Pr;
    let mut out = String::new();
    writeln!(
        out,
        "PR: {}; poles ({}); zeros ({}); generic: {}",
        if pr { "yes" } else { "no" },
        list(&poles),
        list(&zeros),
        if spectrum.spectrally_generic { "yes" } else { "no" }
    )?;
    writeln!(out)?;
    writeln!(out, "frequency-domain check")?;
    writeln!(out, "  (J,J)-unitarity max residual   {:.3e}", report.jj_unitarity_max_residual.unwrap_or(f64::NAN))?;
    writeln!(out, "  D orthogonality residual       {:.3e}", report.d_orthogonality_residual)?;
    writeln!(out, "  mirror symmetric               {}", spectrum.mirror_symmetric)?;
    writeln!(out, "  pole deviation                 {pole_dev:.3e}")?;
    writeln!(out, "  zero deviation                 {zero_dev:.3e}")?;
    writeln!(out)?;
    writeln!(out, "reference parameters (D, M, R, Theta = J)")?;
    writeln!(out, "  rebuilt transfer function      {direct_dev:.3e} (max relative, 10 samples)")?;
    writeln!(out, "  note: M[2][2] = 1/2 is used; the printed 1/4 reproduces only channels 2 and 4")?;
    writeln!(out)?;
    writeln!(out, "synthesis with Theta = J, max deviation from reference")?;
    writeln!(out, "  (M and R are determined only up to a symplectic change of mode variables)")?;
    writeln!(out, "  D                              {:.3e}", max_dev_real(synth.params.d(), printed.d()))?;
    writeln!(out, "  M                              {:.3e}", max_dev_real(synth.params.m(), printed.m()))?;
    writeln!(out, "  R                              {:.3e}", max_dev_real(synth.params.r(), printed.r()))?;
    writeln!(out, "  rebuilt transfer function      {:.3e}", synth.equation_residuals.rebuild_max_relative)?;
    writeln!(out)?;
    writeln!(out, "position-momentum to annihilation-creation")?;
    writeln!(out, "  S                              {:.3e}", max_dev(ac.s(), &s_ref))?;
    writeln!(out, "  H                              {:.3e}", max_dev(&ac.hamiltonian(), &h_ref))?;
    writeln!(out, "  N                              {:.3e}", max_dev(&ac.coupling(), &n_ref))?;
    writeln!(out, "annihilation-creation to position-momentum")?;
    writeln!(out, "  D                              {:.3e}", max_dev_real(back.d(), printed.d()))?;
    writeln!(out, "  M                              {:.3e}", max_dev_real(back.m(), printed.m()))?;
    writeln!(out, "  R                              {:.3e}", max_dev_real(back.r(), printed.r()))?;
    Ok((out, pr))
}

fn cmd_example(args: &OutputArgs) -> Result<u8, Failure> {
    let (text, pr) = example_report()?;
    emit_text(args, &text)?;
    Ok(if pr { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Synthesize(a) => cmd_synthesize(a),
        Command::Convert(a) => cmd_convert(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Factor(a) => cmd_factor(a),
        Command::Example(a) => cmd_example(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            match &f {
                Failure::Usage(e) => eprintln!("error: {e:#}"),
                Failure::NotPr(msg) => eprintln!("not physically realizable: {msg}"),
                Failure::Inconclusive(msg) => eprintln!("inconclusive: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
