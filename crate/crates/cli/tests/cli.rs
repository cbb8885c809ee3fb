use std::process::{Command, Output};

fn tsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn train_then_evaluate_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let trained = dir.path().join("trained");
    let t = tsc(&["train", "--scenario", "single_asym", "--epochs", "100", "--out", trained.to_str().unwrap()]);
    assert!(t.status.success(), "{}", String::from_utf8_lossy(&t.stderr));
    for f in ["agent.ckpt", "metrics.csv", "updates.csv", "manifest.json"] {
        assert!(trained.join(f).is_file(), "{f} missing");
    }

    let e = tsc(&["evaluate", "--checkpoint", trained.to_str().unwrap(), "--scenario", "single_asym", "--episodes", "2"]);
    assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
    let text = stdout(&e);
    assert!(text.starts_with("seed,avg_delay_s_per_km"));
    assert!(text.lines().any(|l| l.starts_with("mean,")));

    let runs = dir.path().join("runs");
    let b = tsc(&["baseline", "--fst", "30", "--scenario", "single_asym", "--out", runs.to_str().unwrap()]);
    assert!(b.status.success());
    assert!(runs.join("seed_0.csv").is_file());

    let spec = dir.path().join("exp.toml");
    std::fs::write(
        &spec,
        "scenario = \"single_asym\"\nseeds = [1, 2]\n\n[[runs]]\nlabel = \"fst60\"\nfst = 60\n\n[[runs]]\nlabel = \"agent\"\ncheckpoint = \"trained\"\n",
    )
    .unwrap();
    let out = dir.path().join("exp");
    let x = tsc(&["experiment", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(x.status.success(), "{}", String::from_utf8_lossy(&x.stderr));
    let s = tsc(&["summarize", "--dir", out.to_str().unwrap(), "--reference", "agent"]);
    assert!(s.status.success());
    assert!(stdout(&s).contains("fst60"));
}

#[test]
fn bad_inputs_exit_with_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert!(!tsc(&["train", "--regime", "central", "--out", out.to_str().unwrap()]).status.success());
    assert!(!tsc(&["evaluate", "--checkpoint", out.to_str().unwrap()]).status.success());
    assert!(!tsc(&["baseline", "--fst", "0"]).status.success());
}
