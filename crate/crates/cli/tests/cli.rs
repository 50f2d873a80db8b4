use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn llarull(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_llarull"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn families_lists_the_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let o = llarull(&["families"], dir.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for name in ["bubble", "bump", "round", "scaled", "tendril"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{name}:"))), "{name}");
    }
}

#[test]
fn verify_round_prints_a_passing_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = llarull(&["verify", "--family", "round", "--grid-size", "801"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("\"run_id\"") && text.contains("\"config_hash\"") && text.contains("\"checks\""));
    assert!(!text.contains("\"fail\""));
}

#[test]
fn csv_format_has_the_check_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = llarull(
        &["verify", "--family", "bump", "--param", "eta=0.1", "--grid-size", "401", "--format", "csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "label,lhs,rhs,margin,tolerance,verdict");
    assert!(text.lines().any(|l| l.starts_with("csc2_identity,")));
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[metric]\nfamily = \"round\"\nshape = 1\n").unwrap();
    let o = llarull(&["verify", "--config", "bad.toml", "--output", "out"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("out").exists());
    assert_eq!(code(&llarull(&["verify", "--family", "torus"], dir.path())), 2);
    assert_eq!(code(&llarull(&["verify", "--family", "bump"], dir.path())), 2);
    assert_eq!(code(&llarull(&["verify", "--family", "round", "--epsilon", "1"], dir.path())), 2);
    assert_eq!(code(&llarull(&["verify", "--family", "round", "--class", "1,2"], dir.path())), 2);
}

#[test]
fn margin_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = llarull(
        &["verify", "--family", "bump", "--param", "eta=0.3", "--grid-size", "801", "--class", "40,10,1,1e6"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("failed"));
}

#[test]
fn non_convergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.toml"),
        "[metric]\nfamily = \"bump\"\nparams = { eta = 0.1 }\n[solver]\nmethod = \"bvp\"\nmax_iterations = 2\n",
    )
    .unwrap();
    assert_eq!(code(&llarull(&["verify", "-c", "s.toml"], dir.path())), 3);
}

#[test]
fn written_reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "verify", "--family", "bump", "--param", "eta=0.2", "--grid-size", "401", "--seed", "9", "--output", "out",
        "--tables",
    ];
    let first = llarull(&args, dir.path());
    assert_eq!(code(&first), 0);
    let paths: Vec<String> = stdout(&first).lines().map(String::from).collect();
    assert_eq!(paths.len(), 2);
    let before: Vec<Vec<u8>> = paths.iter().map(|p| fs::read(p).unwrap()).collect();
    assert_eq!(code(&llarull(&args, dir.path())), 0);
    let after: Vec<Vec<u8>> = paths.iter().map(|p| fs::read(p).unwrap()).collect();
    assert_eq!(before, after);
    assert!(dir.path().join("out/report_potential.csv").is_file());
}

#[test]
fn analyze_reports_geometry_without_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = llarull(&["analyze", "--family", "scaled", "--param", "c=1.2", "--grid-size", "401"], dir.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("\"geometry\"") && text.contains("\"membership\""));
    assert!(text.contains("\"checks\": []"));
}

#[test]
fn pointpick_accepts_several_radii() {
    let dir = tempfile::tempdir().unwrap();
    let o = llarull(
        &["pointpick", "--family", "round", "--grid-size", "401", "--radius", "0.1", "--radius", "0.05", "--format", "csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("point_pick_certificate[r=0.1],"));
    assert!(text.contains("point_pick_certificate[r=0.05],"));
}

#[test]
fn sequence_sweeps_a_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let o = llarull(
        &["sequence", "--family", "bump", "--sweep", "eta=0.4,0.2", "--grid-size", "401", "--format", "csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("index,value,nodes,deficit"));
    assert_eq!(lines.count(), 2);
    let o = llarull(&["sequence", "--family", "round"], dir.path());
    assert_eq!(code(&o), 2);
}
