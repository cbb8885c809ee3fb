use std::fs;
use std::path::Path;

use tsc_core::a3c::train::train;
use tsc_core::a3c::RunConfig;
use tsc_core::harness::{run_experiment, run_experiment_file, summarize_dir, ExperimentSpec, HarnessError, RunSpec};
use tsc_core::sim::scenario::builtin;

fn run(label: &str) -> RunSpec {
    RunSpec { label: label.into(), fst: None, plan: None, checkpoint: None, seeds: None }
}

fn fst(label: &str, p: i64) -> RunSpec {
    RunSpec { fst: Some(p), ..run(label) }
}

fn spec(runs: Vec<RunSpec>) -> ExperimentSpec {
    ExperimentSpec {
        scenario: "single_asym".into(),
        seeds: vec![3, 4, 5],
        window: 90.0,
        episode_duration: Some(1800.0),
        reference: None,
        greedy: true,
        runs,
    }
}

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn reference_row_is_zero_and_longer_cycles_delay_more() {
    let out = tempfile::tempdir().unwrap();
    let report =
        run_experiment(&spec(vec![fst("fst60", 60), fst("fst120", 120), fst("again", 60)]), Path::new(""), out.path()).unwrap();
    let row = |l: &str| report.rows.iter().find(|r| r.label == l).unwrap();
    assert_eq!(row("fst60").delay_change_pct, 0.0);
    assert_eq!(row("fst60").density_change_pct, 0.0);
    assert!(row("fst120").delay_mean > row("fst60").delay_mean);
    assert!(row("fst120").delay_change_pct < 0.0);
    assert_eq!(row("again").delay_mean, row("fst60").delay_mean);
    for s in [3, 4, 5] {
        let a = fs::read(out.path().join(format!("runs/fst60/seed_{s}.csv"))).unwrap();
        let b = fs::read(out.path().join(format!("runs/again/seed_{s}.csv"))).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn every_run_sees_the_same_arrivals() {
    let out = tempfile::tempdir().unwrap();
    let report = run_experiment(
        &spec(vec![fst("fst60", 60), fst("fst30", 30), RunSpec { plan: Some([40, 20, 20, 20]), ..run("fixed") }]),
        Path::new(""),
        out.path(),
    )
    .unwrap();
    for k in 0..3 {
        let digests: Vec<&Option<String>> = report.results.iter().map(|(_, v)| &v[k].arrival_digest).collect();
        assert!(digests[0].is_some());
        assert!(digests.iter().all(|d| *d == digests[0]));
    }
    assert_ne!(report.results[0].1[0].arrival_digest, report.results[0].1[1].arrival_digest);
}

#[test]
fn missing_checkpoint_fails_before_any_output() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("out");
    let s = spec(vec![fst("fst60", 60), RunSpec { checkpoint: Some("nowhere/agent.ckpt".into()), ..run("agent") }]);
    let err = run_experiment(&s, root.path(), &out).unwrap_err();
    assert!(matches!(err, HarnessError::Missing(_)), "{err}");
    assert!(!out.exists());
}

#[test]
fn invalid_specs_are_rejected() {
    let mut s = spec(vec![fst("a", 60), fst("a", 30)]);
    assert!(matches!(s.validate(), Err(HarnessError::Spec(_))));
    s.runs[1].label = "b".into();
    s.runs[1].seeds = Some(vec![3, 4]);
    assert!(matches!(s.validate(), Err(HarnessError::Spec(_))));
    s.runs[1].seeds = None;
    s.runs[1].plan = Some([20; 4]);
    assert!(matches!(s.validate(), Err(HarnessError::Spec(_))));
    s.runs[1].plan = None;
    s.reference = Some("c".into());
    assert!(matches!(s.validate(), Err(HarnessError::Spec(_))));
    s.reference = None;
    assert!(s.validate().is_ok());
}

#[test]
fn schema_mismatch_is_a_format_error() {
    let out = tempfile::tempdir().unwrap();
    run_experiment(&spec(vec![fst("fst60", 60), fst("fst30", 30)]), Path::new(""), out.path()).unwrap();
    assert_eq!(summarize_dir(out.path(), "fst60").unwrap().len(), 2);
    let f = out.path().join("runs/fst30/seed_4.csv");
    let text = fs::read_to_string(&f).unwrap().replacen("avg_delay_s_per_km", "delay", 1);
    fs::write(&f, text).unwrap();
    assert!(matches!(summarize_dir(out.path(), "fst60"), Err(HarnessError::Format(_))));
}

#[test]
fn manifest_replay_reproduces_every_file() {
    let root = tempfile::tempdir().unwrap();
    let mut rc = RunConfig::default();
    rc.train.total_epochs = 200;
    train(&builtin("single_asym").unwrap(), rc, Some(&root.path().join("trained"))).unwrap();
    fs::write(
        root.path().join("exp.toml"),
        r#"
scenario = "single_asym"
seeds = [7, 8]
episode_duration = 1800.0
reference = "fst60"

[[runs]]
label = "agent"
checkpoint = "trained"

[[runs]]
label = "fst60"
fst = 60
"#,
    )
    .unwrap();
    let first = root.path().join("first");
    let report = run_experiment_file(&root.path().join("exp.toml"), &first).unwrap();
    assert_eq!(report.rows.len(), 2);
    let second = root.path().join("second");
    run_experiment_file(&first.join("manifest.json"), &second).unwrap();
    let (a, b) = (files_under(&first), files_under(&second));
    assert_eq!(a.len(), 6);
    assert_eq!(a, b);
}
