use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lesample(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lesample"))
        .args(args)
        .output()
        .unwrap()
}

fn text(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_csv_charts_and_replayable_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = lesample(&[
        "run",
        "--algo",
        "lesample,ffreplan",
        "--h",
        "0.2,0.6",
        "--trials",
        "2",
        "--arrangements",
        "1",
        "--objects",
        "4",
        "--seed",
        "3",
        "--jobs",
        "2",
        "--out-dir",
        out,
        "--traces",
        "--scenarios",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(text(&o).contains("lesample"));
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    for chart in [
        "time.svg",
        "mistakes.svg",
        "actions.svg",
        "planning_time_by_h.svg",
    ] {
        assert!(dir.path().join("charts").join(chart).is_file(), "{chart}");
    }
    let trace = dir.path().join("traces/trial-00000.jsonl");
    let r = lesample(&["replay", "--trace", trace.to_str().unwrap()]);
    assert!(r.status.success());
    assert!(text(&r).contains("matches logged result"));
    assert_eq!(
        fs::read_dir(dir.path().join("scenarios")).unwrap().count(),
        2
    );
}

#[test]
fn emitted_pddl_validates_a_truth_plan() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    let s = lesample(&[
        "scenario",
        "--seed",
        "5",
        "--h",
        "0.4",
        "--objects",
        "1",
        "--out",
        scenario.to_str().unwrap(),
    ]);
    assert!(s.status.success());
    let e = lesample(&[
        "emit-pddl",
        "--scenario",
        scenario.to_str().unwrap(),
        "--truth",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(e.status.success());
    let problem = dir.path().join("problem.pddl");
    assert!(fs::read_to_string(&problem).unwrap().contains("(inbox o1)"));

    let plan_file = |body: &str| {
        let p = dir.path().join("plan.txt");
        fs::write(&p, body).unwrap();
        p
    };
    let check = |plan: &Path| {
        lesample(&[
            "validate-plan",
            "--problem",
            problem.to_str().unwrap(),
            "--plan",
            plan.to_str().unwrap(),
        ])
    };
    let ok = check(&plan_file("(pick o1 table1)\n(place o1 box1)\n"));
    assert!(ok.status.success(), "{}", text(&ok));
    let bad = check(&plan_file("(place o1 box1)\n"));
    assert_eq!(bad.status.code(), Some(1));
    assert!(text(&bad).contains("inapplicable"));
}

#[test]
fn bad_arguments_exit_with_two() {
    let o = lesample(&["run", "--h", "1.5", "--out-dir", "/nonexistent/never"]);
    assert_eq!(o.status.code(), Some(2));
    let o = lesample(&["replay", "--trace", "/nonexistent/trace.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
}
