use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn llbar(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_llbar"));
    cmd.args(args).env_remove("LLBAR_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, initial: &str, extra: &str) -> PathBuf {
    let text = format!(
        r#"
[grid]
dim = 1
points = 16

[params]
beta1 = 1.0
beta2 = 0.01
beta3 = 1.0
beta4 = 1.0
beta5 = 0.05

[integrator]
dt = 1e-3
t_end = 0.1

[initial]
{initial}

[output]
dir = "out"
cadence = 10
{extra}
"#
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

const RANDOM: &str = "kind = \"random_band\"\ndecay = 4.0\namplitude = 0.5\nseed = 5";
const CONSTANT: &str = "kind = \"constant\"\nvalue = [1.0, 0.0, 0.0]";

fn single_error_line(o: &Output, code: i32, tag: &str) {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(o));
    let err = stderr(o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("error[{tag}]: ")), "{err}");
}

#[test]
fn tstar_closed_form() {
    let o = llbar(&["tstar", "--y0", "1", "--c", "0"], &[]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0.25");
}

#[test]
fn run_writes_ledger_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONSTANT, "snapshot_cadence = 50");
    let out = dir.path().join("run_out");
    let o = llbar(
        &[
            "run",
            cfg.to_str().unwrap(),
            "--override",
            &format!("output.dir={}", out.display()),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("ledger rows 11"));
    let ledger = std::fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert_eq!(ledger.lines().count(), 12);
    for step in [0, 50, 100] {
        assert!(out.join(format!("snapshot_{step:08}.llbr")).exists());
    }
}

#[test]
fn converge_on_constant_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONSTANT, "");
    let od = format!("output.dir={}", dir.path().join("c").display());
    let o = llbar(
        &[
            "converge",
            cfg.to_str().unwrap(),
            "--bands",
            "8,16",
            "--tend",
            "0.1",
            "--override",
            &od,
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(dir.path().join("c/convergence.csv")).unwrap();
    let diff: f64 = report
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!(diff < 1e-15);
}

#[test]
fn depend_reports_linear_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), RANDOM, "");
    let od = format!("output.dir={}", dir.path().join("d").display());
    let o = llbar(
        &[
            "depend",
            cfg.to_str().unwrap(),
            "--delta",
            "1e-3,1e-4",
            "--override",
            &od,
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("linear scaling true"));
    assert!(dir.path().join("d/dependence.csv").exists());
}

#[test]
fn inequality_report_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), RANDOM, "");
    let mut reports = Vec::new();
    for (i, threads) in ["1", "3"].into_iter().enumerate() {
        let od = format!("output.dir={}", dir.path().join(format!("i{i}")).display());
        let o = llbar(
            &[
                "verify-inequalities",
                cfg.to_str().unwrap(),
                "--samples",
                "20",
                "--override",
                &od,
            ],
            &[("LLBAR_THREADS", threads)],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        reports.push(std::fs::read(dir.path().join(format!("i{i}/inequalities.csv"))).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn identities_pass_on_configured_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), RANDOM, "");
    let od = format!("output.dir={}", dir.path().join("v").display());
    let o = llbar(
        &[
            "verify-identities",
            cfg.to_str().unwrap(),
            "--samples",
            "10",
            "--override",
            &od,
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 6);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONSTANT, "colour = \"blue\"");
    let o = llbar(&["run", cfg.to_str().unwrap()], &[]);
    single_error_line(&o, 2, "config");
    assert!(stderr(&o).contains("output.colour: unknown key"));

    let good = write_config(dir.path(), RANDOM, "");
    let o = llbar(
        &["verify-inequalities", good.to_str().unwrap()],
        &[("LLBAR_THREADS", "0")],
    );
    single_error_line(&o, 2, "config");
}

#[test]
fn blow_up_exits_3_with_partial_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "kind = \"eigenmode\"\nk = [1]\namplitude = 0.1", "");
    let out = dir.path().join("b");
    let o = llbar(
        &[
            "run",
            cfg.to_str().unwrap(),
            "--override",
            "params.beta1=-20.0",
            "--override",
            "integrator.blowup_threshold=0.5",
            "--override",
            "integrator.t_end=1.0",
            "--override",
            "output.cadence=1",
            "--override",
            &format!("output.dir={}", out.display()),
        ],
        &[],
    );
    single_error_line(&o, 3, "blowup");
    let rows = std::fs::read_to_string(out.join("ledger.csv")).unwrap().lines().count();
    assert!(rows > 2 && rows < 102, "{rows}");
}

#[test]
fn failed_assertion_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), RANDOM, "");
    let od = format!("output.dir={}", dir.path().join("c").display());
    let o = llbar(
        &[
            "converge",
            cfg.to_str().unwrap(),
            "--bands",
            "4,8,16",
            "--tend",
            "0.002",
            "--min-ratio",
            "1e300",
            "--override",
            &od,
        ],
        &[],
    );
    single_error_line(&o, 4, "assertion");
    assert!(stderr(&o).contains("seed 5"));
}

#[test]
fn unwritable_output_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONSTANT, "");
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let o = llbar(
        &[
            "run",
            cfg.to_str().unwrap(),
            "--override",
            &format!("output.dir={}", blocker.join("sub").display()),
        ],
        &[],
    );
    single_error_line(&o, 5, "io");
}

#[test]
fn usage_errors_are_single_lines() {
    let o = llbar(&["converge"], &[]);
    single_error_line(&o, 2, "usage");
    assert!(llbar(&["--help"], &[]).status.success());
}
