use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use oqho_core::convert::build_pm_realization;
use oqho_core::json::RealMatrixJson;
use oqho_core::{example, linalg, random, AcParams, PmParams, RealMatrix, SkewFactorization, StateSpace, SynthesisResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tempfile::TempDir;

fn oqho(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oqho"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn put(dir: &TempDir, name: &str, value: &impl serde::Serialize) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn reference(dir: &TempDir) -> PathBuf {
    put(
        dir,
        "reference.json",
        &json!({"entries": [
            {"num": [1, 1], "den": [1, 0]},
            {"num": [1, -1], "den": [1, 1]},
            {"num": [1, 0], "den": [1, -1]},
            {"num": [1, -1], "den": [1, 1]}
        ]}),
    )
}

fn static_system(dir: &TempDir, name: &str, d: RealMatrix) -> PathBuf {
    put(dir, name, &StateSpace::static_gain(d).unwrap())
}

#[test]
fn check_certifies_reference_example() {
    let dir = TempDir::new().unwrap();
    let out = oqho(&["check", "--input", s(&reference(&dir)), "--samples", "20"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep = stdout_json(&out);
    assert_eq!(rep["verdict"], "PR");
    assert!(rep["jj_unitarity_max_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn check_rejects_non_orthogonal_feedthrough() {
    let dir = TempDir::new().unwrap();
    let input = static_system(&dir, "static.json", diag(&[2.0, 0.5, 1.0, 1.0]));
    let out = oqho(&["check", "--input", s(&input)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("D not orthogonal"));
    assert_eq!(stdout_json(&out)["dominant_condition"], "d_orthogonal");
}

fn cmax(m: &oqho_core::ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn diag(x: &[f64]) -> RealMatrix {
    RealMatrix::from_fn(x.len(), x.len(), |i, j| if i == j { x[i] } else { 0.0 })
}

#[test]
fn check_with_theta_reports_time_domain_residuals() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = random::pm_params(2, 2, &mut rng);
    let input = put(&dir, "sys.json", &build_pm_realization(&p).unwrap());
    let theta = put(&dir, "theta.json", &RealMatrixJson::from(p.theta()));
    let out = oqho(&["check", "--input", s(&input), "--theta", s(&theta)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let td = &stdout_json(&out)["time_domain"];
    for key in ["d_orthosymplectic", "ccr_preservation", "output_map", "hamiltonian_recovery"] {
        assert!(td[key].as_f64().unwrap() < 1e-10, "{key}: {td}");
    }

    // The canonical J is the wrong CCR matrix for this system.
    let out = oqho(&["check", "--input", s(&input), "--theta", "J"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn malformed_input_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let bad = put(
        &dir,
        "bad.json",
        &json!({"n": 1, "m": 1,
            "A": {"rows": 2, "cols": 2, "data": [[0.0, 1.0]]},
            "B": {"rows": 2, "cols": 2, "data": [[0.0, 0.0], [0.0, 0.0]]},
            "C": {"rows": 2, "cols": 2, "data": [[0.0, 0.0], [0.0, 0.0]]},
            "D": {"rows": 2, "cols": 2, "data": [[1.0, 0.0], [0.0, 1.0]]}}),
    );
    let out = oqho(&["check", "--input", s(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("data"), "{}", stderr(&out));

    let unknown = put(&dir, "unknown.json", &json!({"foo": 1}));
    let out = oqho(&["check", "--input", s(&unknown)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("foo"));

    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(code(&oqho(&["check", "--input", s(&garbage)])), 2);
    assert_eq!(code(&oqho(&["check", "--input", "/nonexistent/file.json"])), 2);
}

#[test]
fn too_few_samples_or_bad_tolerance_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let input = reference(&dir);
    let out = oqho(&["check", "--input", s(&input), "--samples", "4"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("at least 5"));
    assert_eq!(code(&oqho(&["check", "--input", s(&input), "--tol", "-1"])), 2);
    assert_eq!(code(&oqho(&["check"])), 2);
}

#[test]
fn reports_are_deterministic_and_seeded() {
    let dir = TempDir::new().unwrap();
    let input = reference(&dir);
    let a = oqho(&["check", "--input", s(&input)]);
    let b = oqho(&["check", "--input", s(&input), "--seed", "42"]);
    let c = oqho(&["check", "--input", s(&input), "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn output_flag_writes_file() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("report.json");
    let out = oqho(&["check", "--input", s(&reference(&dir)), "--output", s(&target)]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let rep: oqho_core::PrReport = serde_json::from_str(&std::fs::read_to_string(target).unwrap()).unwrap();
    assert!(rep.is_pr());
}

#[test]
fn synthesize_reference_example() {
    let dir = TempDir::new().unwrap();
    let out = oqho(&["synthesize", "--input", s(&reference(&dir)), "--theta", "J"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let res: SynthesisResult = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(res.params.d(), &linalg::identity(4));
    assert!(res.equation_residuals.rebuild_max_relative < 1e-7);
    let rebuilt = build_pm_realization(&res.params).unwrap();
    let z = oqho_core::Complex64::new(0.4, 2.0);
    let g = rebuilt.eval_tf(z).unwrap();
    let t = example::transfer_matrix().eval(z);
    assert!(linalg::relative_difference_c(&g, &t) < 1e-7);
}

#[test]
fn synthesize_static_and_non_pr() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = random::orthosymplectic(2, &mut rng);
    let input = static_system(&dir, "static.json", d.clone());
    let out = oqho(&["synthesize", "--input", s(&input)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let res: SynthesisResult = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(res.params.d(), &d);
    assert_eq!(res.params.modes(), 0);

    let bad = static_system(&dir, "bad.json", diag(&[2.0, 0.5]));
    let out = oqho(&["synthesize", "--input", s(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(out.stdout.is_empty());
}

#[test]
fn synthesize_random_fixture_with_explicit_theta() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = random::pm_params(2, 1, &mut rng);
    let ss = build_pm_realization(&p).unwrap();
    let input = put(&dir, "sys.json", &ss);
    let target = random::skew_nonsingular(2, &mut rng);
    let theta = put(&dir, "theta.json", &RealMatrixJson::from(&target));
    let out = oqho(&["synthesize", "--input", s(&input), "--theta", s(&theta)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let res: SynthesisResult = serde_json::from_slice(&out.stdout).unwrap();
    assert!(linalg::relative_difference(res.params.theta(), &target) < 1e-15);
}

#[test]
fn convert_reference_parameters_both_ways() {
    let dir = TempDir::new().unwrap();
    let pm = put(&dir, "pm.json", &example::pm_params());
    let out = oqho(&["convert", "--input", s(&pm), "--direction", "pm2ac"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let ac: AcParams = serde_json::from_slice(&out.stdout).unwrap();
    let (s_ref, h_ref, n_ref) = example::ac_matrices();
    assert!(cmax(&(ac.s() - s_ref)) < 1e-12);
    assert!(cmax(&(ac.hamiltonian() - h_ref)) < 1e-12);
    assert!(cmax(&(ac.coupling() - n_ref)) < 1e-12);

    let ac_path = put(&dir, "ac.json", &ac);
    let out = oqho(&["convert", "--input", s(&ac_path), "--direction", "ac2pm"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let back: PmParams = serde_json::from_slice(&out.stdout).unwrap();
    let p = example::pm_params();
    for (x, y) in [(p.d(), back.d()), (p.m(), back.m()), (p.r(), back.r()), (p.theta(), back.theta())] {
        assert!((x - y).amax() < 1e-10);
    }
}

#[test]
fn convert_identity_parameters() {
    let dir = TempDir::new().unwrap();
    let p = PmParams::new(
        linalg::identity(2),
        RealMatrix::zeros(2, 2),
        RealMatrix::zeros(2, 2),
        linalg::j_matrix(2).unwrap(),
    )
    .unwrap();
    let out = oqho(&["convert", "--input", s(&put(&dir, "id.json", &p)), "--direction", "pm2ac"]);
    assert_eq!(code(&out), 0);
    let ac: AcParams = serde_json::from_slice(&out.stdout).unwrap();
    assert!((ac.s().map(|z| z.re) - linalg::identity(1)).amax() < 1e-15);
    assert_eq!(cmax(&ac.coupling()), 0.0);
    assert_eq!(cmax(&ac.hamiltonian()), 0.0);
}

#[test]
fn convert_rejects_wrong_direction_and_invalid_parameters() {
    let dir = TempDir::new().unwrap();
    let pm = put(&dir, "pm.json", &example::pm_params());
    assert_eq!(code(&oqho(&["convert", "--input", s(&pm), "--direction", "ac2pm"])), 2);
    assert_eq!(code(&oqho(&["convert", "--input", s(&pm)])), 2);

    let mut doc = serde_json::to_value(example::pm_params()).unwrap();
    doc["R"]["data"][0][1] = json!(5.0);
    let bad = put(&dir, "bad.json", &doc);
    let out = oqho(&["convert", "--input", s(&bad), "--direction", "pm2ac"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("R symmetric"), "{}", stderr(&out));
    assert!(stderr(&out).contains("residual"));
}

#[test]
fn spectrum_reports() {
    let dir = TempDir::new().unwrap();
    let out = oqho(&["spectrum", "--input", s(&reference(&dir))]);
    assert_eq!(code(&out), 0);
    let rep = stdout_json(&out);
    assert_eq!(rep["mirror_symmetric"], true);
    assert_eq!(rep["spectrally_generic"], false);
    assert_eq!(rep["poles"].as_array().unwrap().len(), 4);

    // (s+3)(s+4) / ((s+1)(s+2))
    let siso = put(&dir, "siso.json", &json!({"entries": [{"num": [1, 7, 12], "den": [1, 3, 2]}]}));
    let rep = stdout_json(&oqho(&["spectrum", "--input", s(&siso)]));
    assert_eq!(rep["mirror_symmetric"], false);
    assert_eq!(rep["spectrally_generic"], true);

    let stat = static_system(&dir, "static.json", linalg::identity(2));
    let rep = stdout_json(&oqho(&["spectrum", "--input", s(&stat)]));
    assert_eq!(rep["poles"], json!([]));
    assert_eq!(rep["zeros"], json!([]));
    assert_eq!(rep["mirror_symmetric"], true);
    assert_eq!(rep["spectrally_generic"], true);

    let singular = put(&dir, "sing.json", &json!({"entries": [{"num": [1, 0], "den": [1, 1, 1]}]}));
    assert_eq!(code(&oqho(&["spectrum", "--input", s(&singular)])), 2);
}

#[test]
fn factor_command() {
    let dir = TempDir::new().unwrap();
    let j4 = put(&dir, "j4.json", &RealMatrixJson::from(&linalg::j_matrix(4).unwrap()));
    let out = oqho(&["factor", "--input", s(&j4)]);
    assert_eq!(code(&out), 0);
    let f: SkewFactorization = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(f.deltas.len(), 2);
    assert!(f.deltas.iter().all(|d| (d - 1.0).abs() < 1e-14));
    assert!(stderr(&out).contains("reconstruction residual"));

    let two = put(&dir, "two.json", &json!({"rows": 2, "cols": 2, "data": [[0, 3], [-3, 0]]}));
    let f: SkewFactorization = serde_json::from_slice(&oqho(&["factor", "--input", s(&two)]).stdout).unwrap();
    assert!((f.deltas[0] - 3.0).abs() < 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let theta = random::skew_nonsingular(5, &mut rng);
    let path = put(&dir, "ten.json", &RealMatrixJson::from(&theta));
    let f: SkewFactorization = serde_json::from_slice(&oqho(&["factor", "--input", s(&path)]).stdout).unwrap();
    assert!(f.relative_residual(&theta) < 1e-10);

    let sym = put(&dir, "sym.json", &json!({"rows": 2, "cols": 2, "data": [[1, 0], [0, 1]]}));
    assert_eq!(code(&oqho(&["factor", "--input", s(&sym)])), 2);
    let sing = put(&dir, "sing.json", &json!({"rows": 2, "cols": 2, "data": [[0, 0], [0, 0]]}));
    assert_eq!(code(&oqho(&["factor", "--input", s(&sing)])), 2);
}

#[test]
fn example_command_summarizes_reference_system() {
    let out = oqho(&["example"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "PR: yes; poles (0,-1,-1,1); zeros (0,1,1,-1); generic: no"
    );
    let value_after = |label: &str| -> f64 {
        let line = text.lines().find(|l| l.trim_start().starts_with(label)).unwrap();
        line.split_whitespace().find_map(|w| w.parse::<f64>().ok()).unwrap()
    };
    assert!(value_after("rebuilt transfer function") < 1e-9);
    assert!(value_after("(J,J)-unitarity") < 1e-9);
}
