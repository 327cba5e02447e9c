use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gscreen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gscreen"))
        .args(args)
        .env_remove("GS_SEED")
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Unit-norm columns; columns in `group` share a common factor. Response in the last column.
fn write_design(path: &Path, n: usize, p: usize, group: &[usize], signals: &[(usize, f64)], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factor: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut cols: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let shared = if group.contains(&j) { 1.0 } else { 0.0 };
            (0..n).map(|i| shared * factor[i] + 0.3f64.max(1.0 - shared) * rng.sample::<f64, _>(StandardNormal)).collect()
        })
        .collect();
    for c in &mut cols {
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        c.iter_mut().for_each(|v| *v /= norm);
    }
    let mut text = String::new();
    for i in 0..n {
        let y: f64 = signals.iter().map(|&(j, b)| b * cols[j][i]).sum::<f64>() + rng.sample::<f64, _>(StandardNormal);
        let row: Vec<String> = cols.iter().map(|c| c[i].to_string()).chain([y.to_string()]).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

fn body(path: PathBuf) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(String::from).collect()
}

#[test]
fn select_writes_one_based_indices_with_headers() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("design.csv");
    write_design(&input, 120, 30, &[], &[(0, 9.0), (17, -9.0)], 1);
    let out = dir.path().join("out");
    let res = gscreen(&["select", "--input", arg(&input), "--output-dir", arg(&out), "--sigma", "1", "--theta", "0.9", "--r", "3"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));

    let beta = fs::read_to_string(out.join("beta_hat.csv")).unwrap();
    let first = beta.lines().next().unwrap();
    assert!(first.starts_with("# gscreen ") && first.contains(" config=") && first.contains(" seed="));
    assert_eq!(body(out.join("beta_hat.csv"))[0], "index,beta_hat");
    assert_eq!(body(out.join("beta_hat.csv")).len(), 31);
    let selected = body(out.join("selected.csv"));
    assert_eq!(selected[0], "index");
    assert!(selected.contains(&"1".into()) && selected.contains(&"18".into()), "{selected:?}");

    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(json["selected_count"], selected.len() - 1);
    assert_eq!(json["header"]["tool"], "gscreen");
    assert!(first.contains(json["header"]["config_hash"].as_str().unwrap()));
}

#[test]
fn ups_matches_gs_with_singleton_screening() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("design.csv");
    write_design(&input, 100, 40, &[3, 4, 5], &[(3, 5.0), (4, 5.0), (20, 6.0)], 2);
    let common = ["--input", arg(&input), "--sigma", "1", "--theta", "0.4", "--r", "2"];
    let ups = dir.path().join("ups");
    let gs = dir.path().join("gs");
    let a = gscreen(&[&["select", "--method", "ups", "--output-dir", arg(&ups)][..], &common].concat());
    let b = gscreen(&[&["select", "--m0", "1", "--output-dir", arg(&gs)][..], &common].concat());
    assert_eq!((a.status.code(), b.status.code()), (Some(0), Some(0)));
    assert_eq!(body(ups.join("beta_hat.csv")), body(gs.join("beta_hat.csv")));
}

#[test]
fn missing_sigma_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("design.csv");
    write_design(&input, 30, 5, &[], &[], 3);
    let res = gscreen(&["select", "--input", arg(&input), "--output-dir", arg(dir.path()), "--theta", "0.5", "--r", "2"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("--sigma"));
}

#[test]
fn unreadable_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = gscreen(&["select", "--input", "/nonexistent/x.csv", "--output-dir", arg(dir.path()), "--sigma", "1", "--theta", "0.5", "--r", "2"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn oversized_component_aborts_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("design.csv");
    write_design(&input, 100, 20, &[0, 1, 2, 3], &[(0, 8.0), (1, 8.0), (2, 8.0)], 4);
    let res = gscreen(&[
        "select", "--input", arg(&input), "--output-dir", arg(dir.path()), "--sigma", "1", "--theta", "0.5", "--r", "3",
        "--component-cap", "1",
    ]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = gscreen(&["experiment", "7", "--output-dir", arg(dir.path())]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn small_experiment_writes_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e");
    let res = gscreen(&["experiment", "5a", "--p", "200", "--reps", "2", "--seed", "9", "--output-dir", arg(&out)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for name in ["config.json", "summary.csv", "outcomes.csv", "curves.csv", "summary.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let summary = body(out.join("summary.csv"));
    assert_eq!(summary.len(), 1 + 24);
    let curves = body(out.join("curves.csv"));
    assert!(curves[1].contains("q_multiplier"));
    assert_eq!(body(out.join("outcomes.csv")).len(), 1 + 24 * 2);
}

#[test]
fn exponent_table_has_eight_rows() {
    let res = gscreen(&["exponents", "--table1"]);
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8(res.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# gscreen "));
    assert!(lines[1].starts_with("theta,r,h0,rho_gs"));
    assert_eq!(lines.len(), 10);
    let bad = gscreen(&["exponents", "--triple", "0.5,0.2,0.4"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn seed_comes_from_flag_then_environment() {
    let a = gscreen(&["omega", "--kind", "random-sparse", "--p", "30", "--seed", "5"]);
    let b = Command::new(env!("CARGO_BIN_EXE_gscreen"))
        .args(["omega", "--kind", "random-sparse", "--p", "30"])
        .env("GS_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.lines().next().unwrap().ends_with("seed=5"));
    assert_eq!(text.lines().count(), 31);
}

#[test]
fn phase_boundary_rows() {
    let res = gscreen(&["phase", "--points", "9"]);
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8(res.stdout).unwrap();
    assert_eq!(text.lines().nth(1), Some("theta,r,kind"));
    assert!(text.lines().count() >= 11);
}
