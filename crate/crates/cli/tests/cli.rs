use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ustat-cs"));
    c.env_remove("USTAT_CS_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SMALL: [&str; 6] = ["--trials", "200", "--a-steps", "5", "--n", "20"];

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["fig-extreme", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["fig-extreme", "--m", "0"]).status.code(), Some(1));
}

#[test]
fn bad_config_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.conf");
    std::fs::write(&p, "not-a-key = 3\n").unwrap();
    let o = run(&["fig-coherence", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let missing = dir.path().join("missing.conf");
    assert_eq!(run(&["fig-coherence", "--config", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn infeasible_enumeration_exits_two() {
    let o = run(&["fig-extreme", "--n", "200", "--k", "8", "--trials", "1", "--a-steps", "2"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fig_extreme_csv_shape() {
    let mut args = vec!["fig-extreme", "--m", "5", "--k", "2"];
    args.extend(SMALL);
    let o = run(&args);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "a,empirical_extreme,empirical_se,p_hat,q_hat_1,lambda,one_minus_exp_neg_lambda,eps_full,eps_mid,eps_single"
    );
    assert_eq!(lines.count(), 5);
}

fn coherence_with(extra: &[&str], env_seed: Option<&str>, cfg: Option<&Path>) -> String {
    let mut c = bin();
    c.args(["fig-coherence", "--trials", "100", "--a-steps", "8", "--n", "30"]).args(extra);
    if let Some(s) = env_seed {
        c.env("USTAT_CS_SEED", s);
    }
    if let Some(p) = cfg {
        c.arg("--config").arg(p);
    }
    let o = c.output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# seeds\nseed = 11\n").unwrap();

    let flag5 = coherence_with(&["--seed", "5"], None, None);
    let env5 = coherence_with(&[], Some("5"), None);
    assert_eq!(flag5, env5);

    let file11 = coherence_with(&[], Some("5"), Some(&cfg));
    let flag11 = coherence_with(&["--seed", "11"], None, None);
    assert_eq!(file11, flag11);
    assert_ne!(file11, flag5);

    let flag_over_file = coherence_with(&["--seed", "5"], Some("11"), Some(&cfg));
    assert_eq!(flag_over_file, flag5);
}

#[test]
fn bad_env_seed_exits_one() {
    let o = bin().env("USTAT_CS_SEED", "abc").args(["fig-coherence", "--trials", "10"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    let o = run(&["bounds-table", "--a-steps", "4", "--out", p.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("a,side,marginal_bound,joint_bound,union_bound,vacuous\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn fig_rates_panels() {
    let o = run(&["fig-rates", "--panel", "a", "--a-steps", "6"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 7);
    let both = run(&["fig-rates", "--a-steps", "6", "--k-min", "4", "--k-max", "6"]);
    assert_eq!(stdout(&both).lines().count(), 1 + 6 + 3);
}

#[test]
fn check_with_few_trials_skips_mc_groups() {
    let o = run(&["check", "--trials", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let lines: Vec<serde_json::Value> =
        stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 10);
    let skipped: Vec<&str> = lines
        .iter()
        .filter(|v| v["status"] == "skip")
        .map(|v| v["group"].as_str().unwrap())
        .collect();
    assert_eq!(skipped.len(), 4);
    assert!(skipped.iter().all(|g| g.ends_with("_mc")));
    assert!(lines.iter().all(|v| v["status"] != "fail"));
}

#[test]
fn permissive_flag_fills_joint_column() {
    let args = ["bounds-table", "--side", "max", "--k", "10", "--a-min", "1.5", "--a-max", "2.5", "--a-steps", "3"];
    let joint = |extra: &[&str]| -> Vec<String> {
        let o = bin().args(args).args(extra).output().unwrap();
        assert!(o.status.success());
        stdout(&o).lines().skip(1).map(|l| l.split(',').nth(3).unwrap().to_string()).collect()
    };
    assert!(joint(&[]).iter().all(|v| v == "nan"));
    assert!(joint(&["--permissive"]).iter().all(|v| v != "nan"));
}
