use std::fs;
use std::path::Path;

use llarull_core::checks::Verdict;
use llarull_core::report::{self, fmt_f64, Format};
use llarull_core::scenario::{exit, exit_code, run_config, run_scenario, ScenarioConfig};
use llarull_core::LabError;

fn config(text: &str) -> ScenarioConfig {
    ScenarioConfig::parse(text).unwrap()
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = match fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect(),
        Err(_) => Vec::new(),
    };
    v.sort();
    v
}

#[test]
fn unknown_keys_are_config_errors() {
    for text in [
        "[metric]\nfamily = \"round\"\ncolour = 1\n",
        "[metric]\nfamily = \"round\"\n[grid]\nsize = 101\nstep = 2\n",
        "[metric]\nfamily = \"round\"\n[solver]\nepsilon = 1e-3\nomega = 1\n",
        "[metric]\nfamily = \"round\"\n[class]\nvolume = 40\ndiameter = 10\nmbar = 1\nlambda = 1\nkappa = 2\n",
        "[metric]\nfamily = \"round\"\n[suites]\nrun = []\nextra = true\n",
        "[metric]\nfamily = \"round\"\n[output]\nname = \"r\"\nzip = true\n",
        "[metric]\nfamily = \"round\"\n[plots]\nx = 1\n",
    ] {
        let err = ScenarioConfig::parse(text).unwrap_err();
        assert!(matches!(err, LabError::Config(_)), "{text}: {err:?}");
        assert_eq!(exit_code(&err), exit::INVALID_INPUT);
    }
}

#[test]
fn invalid_scenarios_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for body in [
        "[suites]\nrun = [\"identity\", \"nonsense\"]\n",
        "[grid]\nsize = 3\n",
        "[solver]\nepsilon = 2.0\n",
        "[suites]\nrun = [\"sequence\"]\n",
    ] {
        let text = format!(
            "[metric]\nfamily = \"bump\"\nparams = {{ eta = 0.1 }}\n{body}[output]\ndir = {:?}\n",
            out.display().to_string()
        );
        let err = run_config(&config(&text), dir.path()).unwrap_err();
        assert_eq!(exit_code(&err), exit::INVALID_INPUT, "{body}: {err}");
        assert!(files_in(&out).is_empty());
    }
    let both = "[metric]\nfamily = \"round\"\nprofile = \"x.txt\"\n";
    assert!(run_config(&config(both), dir.path()).is_err());
}

#[test]
fn solver_failures_map_to_the_convergence_code() {
    let e = LabError::NoConvergence {
        iterations: 3,
        last: 1.0,
        history: vec![1.0; 3],
    };
    assert_eq!(exit_code(&e), exit::NO_CONVERGENCE);
    let text = "[metric]\nfamily = \"bump\"\nparams = { eta = 0.1 }\n[solver]\nmethod = \"bvp\"\nmax_iterations = 2\n";
    let err = run_config(&config(text), Path::new(".")).unwrap_err();
    assert_eq!(exit_code(&err), exit::NO_CONVERGENCE);
}

fn round_text(out: &Path) -> String {
    format!(
        "seed = 3\n[metric]\nfamily = \"round\"\n[grid]\nsize = 801\n[suites]\nrun = [\"identity\", \"pointpick\"]\n\
         [output]\ndir = {:?}\nformats = [\"json\", \"csv\"]\ntables = true\n",
        out.display().to_string()
    )
}

#[test]
fn reports_are_written_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = config(&round_text(&out));
    let first = run_config(&cfg, dir.path()).unwrap();
    assert_eq!(first.exit_code, exit::OK);
    assert_eq!(files_in(&out), vec!["report.csv", "report.json", "report_potential.csv"]);
    let json = fs::read_to_string(out.join("report.json")).unwrap();
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();

    let second = run_config(&cfg, dir.path()).unwrap();
    assert_eq!(second.report.run_id, first.report.run_id);
    assert_eq!(fs::read_to_string(out.join("report.json")).unwrap(), json);
    assert_eq!(fs::read_to_string(out.join("report.csv")).unwrap(), csv);

    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    for key in ["run_id", "config_hash", "checks"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert!(v.get("sequence").is_none());
    assert_eq!(v["checks"].as_array().unwrap().len(), 4);

    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "label,lhs,rhs,margin,tolerance,verdict");
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 6, "{line}");
        for c in &cols[1..5] {
            let mantissa = c.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.replace('.', "").len(), 17, "{c}");
        }
    }
}

#[test]
fn run_id_depends_on_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = config(&round_text(&dir.path().join("a")));
    let mut b = a.clone();
    b.seed = 4;
    let mut c = a.clone();
    c.grid.size = 803;
    let ha = a.hash(None).unwrap();
    assert_ne!(report::run_id(&ha, 3), report::run_id(&ha, 4));
    assert_ne!(ha, c.hash(None).unwrap());
    assert_eq!(ha, a.clone().hash(None).unwrap());
    assert_eq!(ha.len(), 64);
    assert_ne!(ha, b.hash(None).unwrap());
}

#[test]
fn random_parameters_follow_the_seed() {
    let text = |seed: u64| format!("seed = {seed}\n[metric]\nfamily = \"bump\"\nrandom = {{ eta = [0.01, 0.3] }}\n");
    let eta = |seed| config(&text(seed)).family_spec().unwrap().params["eta"];
    assert_eq!(eta(2024), eta(2024));
    assert_ne!(eta(2024), eta(2025));
    for s in 0..20 {
        assert!((0.01..0.3).contains(&eta(s)));
    }
    let bad = "[metric]\nfamily = \"bump\"\nparams = { eta = 0.1 }\nrandom = { eta = [0.01, 0.3] }\n";
    assert!(config(bad).validate(Path::new(".")).is_err());
}

#[test]
fn a_false_cheeger_claim_fails_the_poincare_checks() {
    let text = "[metric]\nfamily = \"bump\"\nparams = { eta = 0.3 }\n[grid]\nsize = 801\n\
                [class]\nvolume = 40\ndiameter = 10\nmbar = 1\nlambda = 1e6\n[suites]\nrun = [\"global\"]\n";
    let o = run_config(&config(text), Path::new(".")).unwrap();
    assert_eq!(o.exit_code, exit::MARGIN_FAILURE);
    let failed: Vec<&str> = o
        .report
        .checks
        .iter()
        .filter(|c| c.verdict == Verdict::Fail)
        .map(|c| c.label.as_str())
        .collect();
    assert!(failed.contains(&"ratio_l1_bound"), "{failed:?}");
    assert_eq!(o.report.membership.as_ref().unwrap().failed(), vec!["v"]);
}

#[test]
fn bubble_passes_its_checks_but_not_the_cheeger_condition() {
    let text = "[metric]\nfamily = \"bubble\"\nparams = { A = 2, delta = 0.1 }\n[grid]\nsize = 1001\n\
                [class]\nvolume = 40\ndiameter = 10\nmbar = 140\nlambda = 1\n";
    let o = run_config(&config(text), Path::new(".")).unwrap();
    assert_eq!(o.exit_code, exit::OK);
    assert_eq!(o.report.membership.as_ref().unwrap().failed(), vec!["v"]);
}

#[test]
fn sample_scenarios_load_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ScenarioConfig::load(&path).unwrap();
            cfg.validate(&dir).unwrap();
            n += 1;
        }
    }
    assert!(n >= 8);
}

#[test]
fn profile_scenarios_read_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut table = String::new();
    for i in 0..401 {
        let t = std::f64::consts::PI * i as f64 / 400.0;
        table.push_str(&format!("{} 1.1 {}\n", fmt_f64(t), fmt_f64(1.1 * t.sin())));
    }
    fs::write(dir.path().join("scaled.txt"), &table).unwrap();
    let path = dir.path().join("s.toml");
    fs::write(&path, "[metric]\nprofile = \"scaled.txt\"\n[suites]\nrun = [\"identity\"]\n").unwrap();
    let o = run_scenario(&path).unwrap();
    assert_eq!(o.exit_code, exit::OK);
    assert!(o.written.is_empty());
    assert!(o.report.metric.as_deref().unwrap().contains("scaled.txt"));
    // editing the table changes the hash
    fs::write(dir.path().join("scaled.txt"), table.replace("1.1 ", "1.2 ")).unwrap();
    assert_ne!(run_scenario(&path).unwrap().report.config_hash, o.report.config_hash);
}

#[test]
fn atomic_writes_leave_no_temporaries() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("nested/report.json");
    report::write_atomic(&p, "one").unwrap();
    report::write_atomic(&p, "two").unwrap();
    assert_eq!(fs::read_to_string(&p).unwrap(), "two");
    assert_eq!(files_in(&dir.path().join("nested")), vec!["report.json"]);
    assert_eq!(Format::default(), Format::Json);
}
