use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ordinal-zero"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_reports_three_by_nine() {
    let o = run(&["solve", "--width", "3", "--height", "9"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(
        stdout(&o).contains("6 of 9 are first-player wins, 0 drawn"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn solve_one_by_two_is_a_first_move_win() {
    let o = run(&["solve", "--width", "1", "--height", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("1,2/0,0/0,1/1/0  win in 1"));
}

#[test]
fn solve_writes_a_tablebase() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("3x5.tb");
    let o = run(&[
        "solve",
        "--width",
        "3",
        "--height",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let tb = ordinal_zero::solver::Tablebase::load(&path).unwrap();
    assert_eq!(tb.summary().first_player_wins(), 6);
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["solve", "--width", "0", "--height", "9"],
        vec!["solve", "--width", "3"],
        vec!["frobnicate"],
        vec![
            "train",
            "--width",
            "3",
            "--height",
            "5",
            "--reward",
            "cdf",
            "--head",
            "value",
            "--generations",
            "1",
            "--out",
            "/nonexistent/never-created",
        ],
        vec![
            "train",
            "--width",
            "3",
            "--height",
            "5",
            "--reward",
            "cdf",
            "--alpha",
            "0.5",
            "--head",
            "outcome",
            "--generations",
            "1",
            "--out",
            "/nonexistent/never-created",
        ],
        vec!["eval", "--run", "/nonexistent/run"],
    ] {
        let o = run(&args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    assert!(!Path::new("/nonexistent/never-created").exists());
}

#[test]
fn train_eval_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    let run_s = run_dir.to_str().unwrap();
    let o = run(&[
        "train",
        "--width",
        "3",
        "--height",
        "5",
        "--reward",
        "cdf-bonus",
        "--alpha",
        "0.5",
        "--head",
        "outcome",
        "--generations",
        "2",
        "--seed",
        "4",
        "--out",
        run_s,
        "--games-per-generation",
        "3",
        "--visits",
        "10",
        "--eval-visits",
        "10",
        "--epochs-per-generation",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).matches("generation ").count(), 2);

    let o = run(&["eval", "--run", run_s, "--generation", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("gen-001.weights"));
    assert_eq!(text.matches(" agent ").count(), 18);
    // Re-evaluating the stored weights reproduces the recorded score.
    let recorded = std::fs::read_to_string(run_dir.join("demerits.csv")).unwrap();
    let last = recorded
        .lines()
        .last()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse::<f64>()
        .unwrap();
    assert!(text.contains(&format!("demerits {last} ")), "{text} vs {last}");

    let o = run(&["eval", "--run", run_s, "--generation", "5"]);
    assert_eq!(o.status.code(), Some(2));

    let out = dir.path().join("plots");
    let o = run(&[
        "export",
        "--run",
        run_s,
        "--out",
        out.to_str().unwrap(),
        "--generations",
        "0,1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let curve = std::fs::read_to_string(out.join("demerits.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3);
    assert_eq!(curve.lines().next(), Some("generation,demerits"));
    let snapshot = std::fs::read_to_string(out.join("cdf-001.csv")).unwrap();
    assert_eq!(snapshot, std::fs::read_to_string(run_dir.join("cdf-001.csv")).unwrap());

    let o = run(&[
        "export",
        "--run",
        run_s,
        "--out",
        out.to_str().unwrap(),
        "--generations",
        "9",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exporting_an_empty_run_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    let o = run(&[
        "train",
        "--width",
        "3",
        "--height",
        "5",
        "--reward",
        "primitive",
        "--head",
        "value",
        "--generations",
        "0",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&[
        "export",
        "--run",
        run_dir.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
