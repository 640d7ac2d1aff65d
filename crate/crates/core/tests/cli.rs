use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use netident::io::matrix_from_csv;
use serde_json::Value;
use tempfile::TempDir;

fn netident(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netident"))
        .args(args)
        .current_dir(dir)
        .env_remove("NETIDENT_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stdout_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stdout);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

const CHAIN: &str = "[network]\nfamily = \"chain\"\nn = 5\n[dynamics]\ndelta = 0.6\nrho = 0.5\nT = 4000\nseed = 11\n";

fn setup(config: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("c.toml"), config).unwrap();
    dir
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = setup(CHAIN);
    let p = dir.path();
    assert_eq!(
        code(&netident(p, &["simulate", "-c", "c.toml", "-o", "a"])),
        0
    );
    assert_eq!(
        code(&netident(p, &["simulate", "-c", "c.toml", "-o", "b"])),
        0
    );
    let a = fs::read(p.join("a/path.csv")).unwrap();
    assert_eq!(a, fs::read(p.join("b/path.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 4001);
}

#[test]
fn zero_network_and_zero_noise_give_zero_path() {
    let dir =
        setup("[network]\nfamily = \"chain\"\nn = 3\n[dynamics]\nrho = 0\nsigma = 0\nT = 10\n");
    let o = netident(dir.path(), &["simulate", "-c", "c.toml", "-o", "z"]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("z/path.csv")).unwrap();
    for line in text.lines().skip(1) {
        assert!(
            line.split(',')
                .skip(1)
                .all(|v| v.parse::<f64>().unwrap() == 0.0),
            "{line}"
        );
    }
}

#[test]
fn unstable_config_exits_3_with_explosion() {
    let dir = setup("[network]\nfamily = \"chain\"\nn = 5\n[dynamics]\ndelta = 0.6\nrho = 2.5\n");
    let o = netident(dir.path(), &["simulate", "-c", "c.toml", "-o", "x"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("explosion"));
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let dir = setup("[dynamics]\ndelta = 0.6\nsigmaa = 1\n");
    let o = netident(dir.path(), &["simulate", "-c", "c.toml"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigmaa"));

    let o = netident(
        dir.path(),
        &["estimate", "--data", "missing.csv", "--delta", "0.5"],
    );
    assert_eq!(code(&o), 2);

    fs::write(dir.path().join("bad.csv"), "# n=2\n1,2\n3\n").unwrap();
    assert_eq!(
        code(&netident(dir.path(), &["spectra", "--matrix", "bad.csv"])),
        2
    );
    assert_eq!(
        code(&netident(dir.path(), &["mc", "--kind", "nonsense"])),
        2
    );
}

#[test]
fn simulate_then_estimate_recovers_the_network() {
    let dir = setup(CHAIN);
    let p = dir.path();
    assert_eq!(
        code(&netident(p, &["simulate", "-c", "c.toml", "-o", "sim"])),
        0
    );
    let o = netident(
        p,
        &[
            "estimate",
            "--data",
            "sim/path.csv",
            "--delta",
            "0.6",
            "-o",
            "closed",
        ],
    );
    assert_eq!(code(&o), 0);
    let truth = matrix_from_csv(&fs::read_to_string(p.join("sim/a_true.csv")).unwrap()).unwrap();
    let closed = matrix_from_csv(&fs::read_to_string(p.join("closed/a_hat.csv")).unwrap()).unwrap();
    // entrywise sd at T = 4000 is about 0.015, so 0.15 relative is a loose bound
    let rel = (&closed - &truth).frobenius_norm() / truth.frobenius_norm();
    assert!(rel < 0.15, "relative error {rel}");

    let o = netident(
        p,
        &[
            "estimate",
            "--data",
            "sim/path.csv",
            "--delta",
            "0.6",
            "--lambda",
            "0",
            "-o",
            "l0",
        ],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["method"], "lasso");
    let l0 = matrix_from_csv(&fs::read_to_string(p.join("l0/a_hat.csv")).unwrap()).unwrap();
    assert!((&l0 - &closed).max_abs() <= 1e-6);

    let o = netident(
        p,
        &[
            "estimate",
            "--data",
            "sim/path.csv",
            "--delta",
            "0.6",
            "--method",
            "gmm",
            "-o",
            "g",
        ],
    );
    assert_eq!(code(&o), 0);
    assert!(p.join("g/a_se.csv").exists());
}

#[test]
fn singular_moments_exit_4_with_lasso_hint() {
    let dir = TempDir::new().unwrap();
    // the third unit is an exact copy of the first, so Γ̂₀ is singular
    let mut csv = String::from("t,z1,z2,z3\n");
    for t in 1..=50 {
        let x = (t as f64 * 0.7).sin();
        let y = (t as f64 * 1.3).cos();
        csv.push_str(&format!("{t},{x},{y},{x}\n"));
    }
    fs::write(dir.path().join("d.csv"), csv).unwrap();
    let o = netident(
        dir.path(),
        &["estimate", "--data", "d.csv", "--delta", "0.5"],
    );
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--method lasso"));
}

#[test]
fn test_command_echoes_alpha_and_rejects_strong_alternative() {
    let dir = setup(CHAIN);
    let p = dir.path();
    netident(p, &["simulate", "-c", "c.toml", "-o", "sim"]);
    let o = netident(
        p,
        &[
            "test",
            "--data",
            "sim/path.csv",
            "--delta",
            "0.6",
            "--alpha",
            "0.05",
            "--reps",
            "200",
        ],
    );
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["alpha"], 0.05);
    assert_eq!(v["reject"], true);

    let o = netident(
        p,
        &[
            "test",
            "--data",
            "sim/path.csv",
            "--delta",
            "0.6",
            "--stat",
            "spec",
            "--critical",
            "chi2",
        ],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn spectra_of_scaled_identity_has_zero_dispersion() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("ci.csv"),
        "# n=3\n0.4,0,0\n0,0.4,0\n0,0,0.4\n",
    )
    .unwrap();
    let o = netident(dir.path(), &["spectra", "--matrix", "ci.csv"]);
    assert_eq!(code(&o), 0);
    assert!(stdout_json(&o)["dispersion"].as_f64().unwrap().abs() < 1e-15);

    let o = netident(dir.path(), &["spectra", "--family", "chain", "--n", "25"]);
    let d = stdout_json(&o)["dispersion"].as_f64().unwrap();
    assert!((d - 1.78).abs() < 0.25 * 1.78, "{d}");
}

#[test]
fn mc_outputs_do_not_depend_on_jobs() {
    let dir = setup("[experiment]\nkind = \"power\"\nn = [6]\nT = [40, 80]\nreps = 12\nnull_reps = 100\nseed = 5\n");
    let p = dir.path();
    assert_eq!(
        code(&netident(
            p,
            &["mc", "-c", "c.toml", "--jobs", "1", "-o", "j1"]
        )),
        0
    );
    assert_eq!(
        code(&netident(
            p,
            &["mc", "-c", "c.toml", "--jobs", "8", "-o", "j8"]
        )),
        0
    );
    for f in ["records.csv", "summary.csv", "plot.csv"] {
        let a = fs::read(p.join("j1").join(f)).unwrap();
        assert_eq!(a, fs::read(p.join("j8").join(f)).unwrap(), "{f}");
        assert!(String::from_utf8(a).unwrap().starts_with("# netident "));
    }
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = setup("[network]\nfamily = \"chain\"\nn = 3\n[dynamics]\nT = 20\n");
    let run = |seed: &str, out: &str| {
        Command::new(env!("CARGO_BIN_EXE_netident"))
            .args(["simulate", "-c", "c.toml", "-o", out])
            .current_dir(dir.path())
            .env("NETIDENT_SEED", seed)
            .output()
            .unwrap()
    };
    let a = stdout_json(&run("42", "a"));
    let b = stdout_json(&run("43", "b"));
    assert_eq!(a["seed"], 42);
    assert_ne!(a["fingerprint"], b["fingerprint"]);
}

#[test]
fn size_table_has_expected_shape() {
    let dir =
        setup("[experiment]\nkind = \"size\"\nn = [5]\nT = [60]\nreps = 20\nnull_reps = 100\n");
    let o = netident(dir.path(), &["mc", "-c", "c.toml", "-o", "s"]);
    assert_eq!(code(&o), 0);
    let summary = fs::read_to_string(dir.path().join("s/summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("kind,n,T,reps,failed,rejection_rate,mc_se"));
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("size,5,60,20,0,"));
}
