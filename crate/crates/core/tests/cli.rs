//! The `ucbsde` binary as a batch tool: exit codes, error records, output
//! directory precedence and reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ucbsde"));
    c.env_remove("UCBSDE_OUT");
    c
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name)
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_driver_gives_constant_terminal_value() {
    let tmp = TempDir::new().unwrap();
    let out = run(bin().args(["--quiet", "--config"]).arg(shipped("dbde_zero.toml")).arg("--out").arg(tmp.path()));
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("dbde.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 11);
    for r in rows {
        let y: f64 = r.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(y, 1.0);
    }
    let m = json(&tmp.path().join("manifest.json"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["experiment"], "dbde");
}

#[test]
fn unknown_builtin_is_a_config_error_naming_the_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "experiment = \"bsde\"\n[bsde]\ngenerator = { name = \"zero\" }\nterminal = { name = \"no_such_terminal\" }\n",
    );
    let out_dir = tmp.path().join("out");
    let out = run(bin().arg("--config").arg(&cfg).arg("--out").arg(&out_dir));
    assert_eq!(out.status.code(), Some(2));
    let e = json(&out_dir.join("error.json"));
    assert_eq!(e["exit_code"], 2);
    assert_eq!(e["field"], "bsde.terminal.name");
}

#[test]
fn out_of_range_parameter_names_the_parameter() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "experiment = \"dbde\"\n[dbde]\ndriver = { name = \"zero\" }\nweight = { name = \"exp_decay\", params = { rate = -1.0 } }\ndelta = 1.0\n",
    );
    let out = run(bin().arg("--config").arg(&cfg).arg("--out").arg(tmp.path()));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&tmp.path().join("error.json"))["field"], "dbde.weight.params.rate");
}

#[test]
fn missing_config_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let out = run(bin().arg("--out").arg(tmp.path()));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&tmp.path().join("error.json"))["exit_code"], 2);
}

#[test]
fn solver_failure_exits_with_code_three() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "experiment = \"dbde\"\n[dbde]\ndriver = { name = \"linear\", params = { alpha = 2.0, c = 1.0 } }\ndelta = 1.0\nmax_iter = 2\n",
    );
    let out = run(bin().arg("--config").arg(&cfg).arg("--out").arg(tmp.path()));
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&tmp.path().join("error.json"))["kind"], "NoConvergence");
    assert_eq!(json(&tmp.path().join("manifest.json"))["status"], "error");
}

#[test]
fn output_directory_precedence() {
    let tmp = TempDir::new().unwrap();
    let from_cfg = tmp.path().join("cfg");
    let from_env = tmp.path().join("env");
    let from_flag = tmp.path().join("flag");
    let cfg = write_config(
        tmp.path(),
        &format!(
            "experiment = \"dbde\"\nout = {:?}\n[grid]\nsteps = 4\n[dbde]\ndriver = {{ name = \"zero\" }}\ndelta = 1.0\n",
            from_cfg.to_str().unwrap()
        ),
    );
    assert_eq!(run(bin().args(["--quiet", "--config"]).arg(&cfg)).status.code(), Some(0));
    assert!(from_cfg.join("manifest.json").exists());

    let out = run(bin().args(["--quiet", "--config"]).arg(&cfg).env("UCBSDE_OUT", &from_env));
    assert_eq!(out.status.code(), Some(0));
    assert!(from_env.join("manifest.json").exists());

    let out =
        run(bin().args(["--quiet", "--config"]).arg(&cfg).arg("--out").arg(&from_flag).env("UCBSDE_OUT", &from_env));
    assert_eq!(out.status.code(), Some(0));
    assert!(from_flag.join("manifest.json").exists());
}

#[test]
fn same_seed_reproduces_csv_bytes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "experiment = \"bsde\"\nseed = 11\n[grid]\nsteps = 10\n[bsde]\ngenerator = { name = \"lipschitz_sin\" }\n\
         terminal = { name = \"sin_shift\" }\npaths = 2000\n",
    );
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for d in [&a, &b] {
        assert_eq!(run(bin().args(["--quiet", "--config"]).arg(&cfg).arg("--out").arg(d)).status.code(), Some(0));
    }
    let out = run(bin().args(["--quiet", "--seed", "12", "--config"]).arg(&cfg).arg("--out").arg(&c));
    assert_eq!(out.status.code(), Some(0));
    let read = |d: &Path| std::fs::read(d.join("summary.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(json(&c.join("manifest.json"))["seed"], 12);
}

#[test]
fn builtin_catalog_is_stable() {
    let a = run(bin().arg("--list-builtins"));
    let b = run(bin().arg("--list-builtins"));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    for name in ["example_s3_generator", "inv_sqrt_cut", "xlog", "sin_shift", "exp_decay"] {
        assert!(text.contains(name), "catalog lacks {name}");
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ucbsde::config::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap();
        count += 1;
    }
    assert!(count >= 10);
}
