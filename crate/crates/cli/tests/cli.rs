use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use clap::Parser;

use qcorr_cli::{parse_scenario, run, Cli, CliError, ScenarioFile};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

const VALID: [&str; 4] = [
    "identity_chsh.toml",
    "ghz_svetlichny.toml",
    "ghz_noisy.toml",
    "phi_plus_explicit.toml",
];

fn invoke(args: &[&str]) -> (Result<(), CliError>, String) {
    let cli = Cli::try_parse_from(std::iter::once("qcorr").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    let r = run(&cli, &mut out);
    (r, String::from_utf8(out).unwrap())
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fixtures_round_trip() {
    for name in VALID {
        let text = fs::read_to_string(fixture(name)).unwrap();
        let first = ScenarioFile::from_toml(&text).unwrap();
        let again = ScenarioFile::from_toml(&first.to_toml().unwrap()).unwrap();
        assert_eq!(first, again, "{name}");
        let a = first.build(1e-9).unwrap();
        let b = again.build(1e-9).unwrap();
        assert_eq!(a.scenario, b.scenario, "{name}");
        assert_eq!(a.functional, b.functional, "{name}");
    }
}

#[test]
fn non_cptp_channel_names_trace_condition() {
    let text = fs::read_to_string(fixture("non_cptp_channel.toml")).unwrap();
    let err = parse_scenario(&text, 1e-9).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let msg = err.to_string();
    assert!(msg.contains("trace preserving") && msg.contains("process.kraus"), "{msg}");
}

#[test]
fn invalid_instrument_reports_field() {
    let text = r#"
        [process]
        builder = "phi_plus"
        d = 2

        [[party]]
        name = "A"
        [[party.setting]]
        kind = "povm"
        elements = [[["(1, 0)", "(0, 0)"], ["(0, 0)", "(0, 0)"]]]

        [[party]]
        name = "B"
        [[party.setting]]
        kind = "projective"
        phi = 0.0
    "#;
    let err = parse_scenario(text, 1e-9).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("party[0] (A).setting[0]"), "{err}");
}

#[test]
fn unknown_party_is_rejected() {
    let text = r#"
        [process]
        builder = "identity"
        d = 2
        [[party]]
        name = "Z"
        [[party.setting]]
        kind = "projective"
        phi = 0.0
    "#;
    assert_eq!(parse_scenario(text, 1e-9).unwrap_err().exit_code(), 2);
}

#[test]
fn parse_errors_are_usage_class() {
    let err = parse_scenario("[process]\nbuilder = \"identity\"\nd = 2\nnoise = [\n", 1e-9).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let err = parse_scenario("[process]\nbuilder = \"identity\"\nd = 2\n\n[[party]]\nname = \"A\"\ncolour = 1\n", 1e-9)
        .unwrap_err();
    assert!(err.to_string().contains("colour"), "{err}");
    assert!(err.to_string().contains("line"), "{err}");
}

#[test]
fn inequality_values() {
    let (r, out) = invoke(&["inequality", path_str(&fixture("identity_chsh.toml"))]);
    r.unwrap();
    assert!(out.starts_with("chsh: 2.828427124746"), "{out}");
    let (r, out) = invoke(&["inequality", path_str(&fixture("ghz_svetlichny.toml"))]);
    r.unwrap();
    assert!(out.starts_with("svetlichny: 5.656854249492"), "{out}");
    let (r, out) = invoke(&["inequality", path_str(&fixture("ghz_svetlichny.toml")), "--name", "chsh"]);
    assert!(r.is_err(), "{out}");
}

#[test]
fn noisy_fixture_lands_in_window() {
    let loaded = parse_scenario(&fs::read_to_string(fixture("ghz_noisy.toml")).unwrap(), 1e-9).unwrap();
    let f = loaded.functional.unwrap();
    let s = qcorr::correlations::evaluate(&f, &loaded.scenario.table().unwrap()).unwrap();
    assert!((5.37..=5.50).contains(&s), "{s}");
}

#[test]
fn simulate_csv_rows() {
    let (r, out) = invoke(&[
        "simulate",
        path_str(&fixture("phi_plus_explicit.toml")),
        "--format",
        "csv",
    ]);
    r.unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "x_A,x_B,a_A,a_B,probability");
    // two settings for A, one for B, four outcome pairs each
    assert_eq!(lines.len(), 1 + 2 * 4);
    assert_eq!(lines[1], "0,0,1,1,0.450000000000");
    for l in &lines[1..] {
        assert_eq!(l.split(',').count(), 5);
    }
}

#[test]
fn simulate_rejects_bad_settings() {
    let (r, _) = invoke(&["simulate", path_str(&fixture("identity_chsh.toml")), "--settings", "0,2"]);
    assert_eq!(r.unwrap_err().exit_code(), 1);
}

#[test]
fn bounds() {
    for (name, model, want) in [
        ("chsh", "local", "chsh local bound: 2"),
        ("mermin", "local", "mermin local bound: 2"),
        ("svetlichny", "biseparable", "svetlichny biseparable bound: 4"),
    ] {
        let (r, out) = invoke(&["bound", "--name", name, "--model", model]);
        r.unwrap();
        assert_eq!(out.trim(), want);
    }
}

#[test]
fn optimize_is_reproducible() {
    let file = fixture("identity_chsh.toml");
    let args = ["optimize", path_str(&file), "--restarts", "4", "--seed", "5"];
    let (r1, out1) = invoke(&args);
    let (r2, out2) = invoke(&args);
    r1.unwrap();
    r2.unwrap();
    assert_eq!(out1, out2);
    let value: f64 = out1.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((value - 2.0 * 2f64.sqrt()).abs() < 1e-6, "{out1}");
}

#[test]
fn scan_kappa_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let (r, _) = invoke(&["scan-kappa", "--points", "11", "--out", path_str(&path)]);
    r.unwrap();
    let csv = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "kappa,value");
    assert_eq!(lines.len(), 12);
    let values: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!((values[10] - 4.0 * 2f64.sqrt()).abs() < 1e-9);
    assert!(lines[6].starts_with("0.500000,"));
}

#[test]
fn nosignal_passes_for_unbiased_fixture() {
    let (r, out) = invoke(&["nosignal", path_str(&fixture("ghz_svetlichny.toml")), "--from", "A", "--to", "B,C"]);
    r.unwrap();
    assert!(out.contains("no-signalling holds"), "{out}");
    let (r, _) = invoke(&["nosignal", path_str(&fixture("ghz_svetlichny.toml")), "--from", "A", "--to", "Q"]);
    assert_eq!(r.unwrap_err().exit_code(), 1);
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qcorr"))
}

#[test]
fn exit_codes() {
    let ok = binary().args(["validate", path_str(&fixture("identity_chsh.toml"))]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("valid"));
    let invalid = binary().args(["validate", path_str(&fixture("non_cptp_channel.toml"))]).output().unwrap();
    assert_eq!(invalid.status.code(), Some(2));
    let usage = binary().args(["frobnicate"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(1));
    let missing = binary().args(["validate", "/nonexistent/file.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn tolerance_flag_beats_environment() {
    // a tolerance above the 1e-16 round-off passes, one of zero is refused
    let file = fixture("ghz_svetlichny.toml");
    let args = ["nosignal", path_str(&file), "--from", "A", "--to", "B"];
    let env_only = binary().args(args).env("QCORR_TOL", "0").output().unwrap();
    assert_eq!(env_only.status.code(), Some(1));
    let flagged = binary().args(args).arg("--tol").arg("1e-6").env("QCORR_TOL", "0").output().unwrap();
    assert_eq!(flagged.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&flagged.stdout).contains("1.0e-6"));
}
