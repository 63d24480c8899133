//! End-to-end tests of the command-line surface: exit codes, payload
//! determinism, and the documented file formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dafps"))
}

fn tmpdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dafps-cli-{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_grid_csv(path: &Path, n: usize, labeled: bool) {
    let mut text = String::new();
    for i in 0..n {
        let x = i as f64 / (n - 1) as f64;
        let y = (x * 7.0).sin();
        if labeled {
            text.push_str(&format!("{x},{},{y}\n", 1.0 - x));
        } else {
            text.push_str(&format!("{x},{}\n", 1.0 - x));
        }
    }
    std::fs::write(path, text).unwrap();
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn select_writes_floor_budget_and_is_byte_deterministic() {
    let dir = tmpdir("select");
    let input = dir.join("d.csv");
    write_grid_csv(&input, 50, false);
    let sel_path = dir.join("sel.json");
    let args = [
        "select",
        "--input",
        input.to_str().unwrap(),
        "--method",
        "dafps",
        "--budget",
        "0.2",
        "--k",
        "5",
        "--u",
        "0.04",
        "--seed",
        "7",
        "--output",
        sel_path.to_str().unwrap(),
    ];
    assert_exit(&run(&args), 0);
    let first = std::fs::read(&sel_path).unwrap();
    let parsed: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(parsed["method"], "dafps");
    assert_eq!(parsed["indices"].as_array().unwrap().len(), 10); // floor(0.2 * 50)
    assert_eq!(parsed["params"]["u"], 2); // floor(0.04 * 50)

    assert_exit(&run(&args), 0);
    let second = std::fs::read(&sel_path).unwrap();
    assert_eq!(first, second, "rerun must produce identical bytes");
}

#[test]
fn select_budget_count_exceeding_pool_is_usage_error() {
    let dir = tmpdir("select-toolarge");
    let input = dir.join("d.csv");
    write_grid_csv(&input, 3, false);
    let out = run(&[
        "select",
        "--input",
        input.to_str().unwrap(),
        "--method",
        "fps",
        "--budget-count",
        "5",
    ]);
    assert_exit(&out, 2);
}

#[test]
fn evaluate_reports_known_errors_and_appends_csv() {
    let dir = tmpdir("evaluate");
    let input = dir.join("d.csv");
    // labels equal to the first coordinate; 1-d features after the label split
    let mut text = String::new();
    for i in 0..10 {
        let x = i as f64;
        text.push_str(&format!("{x},{x}\n"));
    }
    std::fs::write(&input, text).unwrap();

    let sel = dir.join("sel.json");
    assert_exit(
        &run(&[
            "select",
            "--input",
            input.to_str().unwrap(),
            "--label-column",
            "last",
            "--method",
            "random",
            "--budget-count",
            "4",
            "--seed",
            "3",
            "--output",
            sel.to_str().unwrap(),
        ]),
        0,
    );

    // external predictions: exactly the complement, all zeros
    let sel_doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&sel).unwrap()).unwrap();
    let chosen: Vec<usize> = sel_doc["indices"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();
    let complement: Vec<usize> = (0..10).filter(|i| !chosen.contains(i)).collect();
    let preds = dir.join("preds.csv");
    let body: String = complement.iter().map(|i| format!("{i},0.0\n")).collect();
    std::fs::write(&preds, body).unwrap();

    let csv_out = dir.join("report.csv");
    let out = run(&[
        "evaluate",
        "--input",
        input.to_str().unwrap(),
        "--label-column",
        "last",
        "--selection",
        sel.to_str().unwrap(),
        "--predictions",
        preds.to_str().unwrap(),
        "--csv-append",
        csv_out.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // predicting zero for labels {0..9} minus the four selected: MAE is the
    // mean of the remaining labels
    let expect: f64 = complement.iter().map(|&i| i as f64).sum::<f64>() / complement.len() as f64;
    assert!((report["mae"].as_f64().unwrap() - expect).abs() < 1e-12);
    assert_eq!(
        report["n_eval"].as_u64().unwrap() as usize,
        complement.len()
    );
    let appended = std::fs::read_to_string(&csv_out).unwrap();
    assert!(appended.starts_with("random,0.4,3,"));

    // wrong-length predictions file: usage error
    std::fs::write(&preds, "0,0.0\n").unwrap();
    let out = run(&[
        "evaluate",
        "--input",
        input.to_str().unwrap(),
        "--label-column",
        "last",
        "--selection",
        sel.to_str().unwrap(),
        "--predictions",
        preds.to_str().unwrap(),
    ]);
    assert_exit(&out, 2);
}

#[test]
fn evaluate_full_pool_selection_is_runtime_error() {
    let dir = tmpdir("evaluate-full");
    let input = dir.join("d.csv");
    write_grid_csv(&input, 8, true);
    let sel = dir.join("sel.json");
    assert_exit(
        &run(&[
            "select",
            "--input",
            input.to_str().unwrap(),
            "--label-column",
            "last",
            "--method",
            "random",
            "--budget-count",
            "8",
            "--output",
            sel.to_str().unwrap(),
        ]),
        0,
    );
    let out = run(&[
        "evaluate",
        "--input",
        input.to_str().unwrap(),
        "--label-column",
        "last",
        "--selection",
        sel.to_str().unwrap(),
        "--kernel",
        "gaussian",
        "--width",
        "0.1",
        "--lambda",
        "1e-3",
    ]);
    assert_exit(&out, 1);
}

#[test]
fn oracle_sweep_deterministic_and_guarded() {
    let dir = tmpdir("oracle");
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    for path in [&a, &b] {
        assert_exit(
            &run(&[
                "oracle",
                "--trials",
                "1",
                "--seed",
                "5",
                "--output",
                path.to_str().unwrap(),
            ]),
            0,
        );
    }
    assert_eq!(
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        "same seed must give identical CSV"
    );
    let text = std::fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("instance,seed,n,d,b,k,"));
    assert!(text.lines().nth(1).unwrap().ends_with("true,true"));

    // combinatorial guard: refuse before running
    let out = run(&["oracle", "--n", "30", "--b", "15"]);
    assert_exit(&out, 2);
}

#[test]
fn oracle_default_sweep_all_bounds_hold() {
    let out = run(&["oracle", "--trials", "200", "--seed", "0"]);
    assert_exit(&out, 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 200);
    for row in rows {
        assert!(row.ends_with("true,true"), "bound violated: {row}");
    }
}

#[test]
fn synth_fig1_preset_emits_1000_rows() {
    let out = run(&["synth", "--preset", "fig1", "--seed", "3"]);
    assert_exit(&out, 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 1000);
    for row in rows {
        let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 2);
        assert!((0.0..=1.0).contains(&cols[0]) && (0.0..=1.0).contains(&cols[1]));
    }
}

#[test]
fn tune_gamma_emits_one_curve_per_width() {
    let dir = tmpdir("tunegamma");
    let input = dir.join("d.csv");
    write_grid_csv(&input, 30, false);
    let out = run(&[
        "tune-gamma",
        "--input",
        input.to_str().unwrap(),
        "--grid",
        "1000,10,5,1,0.1,0.01",
        "--budget-count",
        "6",
    ]);
    assert_exit(&out, 0);
    let curves: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let arr = curves.as_array().unwrap();
    assert_eq!(arr.len(), 6);
    for c in arr {
        assert_eq!(c["gains"].as_array().unwrap().len(), 6);
    }
}

#[test]
fn run_plan_produces_flagged_aggregates() {
    let dir = tmpdir("runplan");
    let input = dir.join("d.csv");
    write_grid_csv(&input, 40, true);
    let plan = dir.join("plan.json");
    std::fs::write(
        &plan,
        serde_json::json!({
            "dataset": input.to_str().unwrap(),
            "label_column": "last",
            "methods": [
                {"method": "random"},
                {"method": "fps"}
            ],
            "budgets": [0.25],
            "seeds": [1, 2, 3],
            "model": {"type": "krr", "kernel": "gaussian",
                      "width": 0.1, "lambda": 1e-4}
        })
        .to_string(),
    )
    .unwrap();
    let csv_path = dir.join("results.csv");
    let out = run(&[
        "run-plan",
        "--plan",
        plan.to_str().unwrap(),
        "--out-csv",
        csv_path.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let runs = text.lines().filter(|l| l.starts_with("run,")).count();
    let aggs = text.lines().filter(|l| l.starts_with("aggregate,")).count();
    assert_eq!(runs, 2 * 1 * 3);
    assert_eq!(aggs, 2);
    // timings go to stderr, not into the table
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("select"));
}

#[test]
fn bench_reports_timings_json() {
    let out = run(&[
        "bench", "--method", "dafps", "--n", "400", "--d", "5", "--budget", "0.1", "--k", "10",
    ]);
    assert_exit(&out, 0);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["b"], 40);
    assert!(doc["secs_per_iteration"].as_f64().unwrap() >= 0.0);
}

#[test]
fn mixture_occupancy_means_are_ordered() {
    let out = run(&["occupancy", "--seeds", "2"]);
    assert_exit(&out, 0);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
}

#[test]
fn parse_error_names_line_and_exits_2() {
    let dir = tmpdir("parse");
    let input = dir.join("bad.csv");
    std::fs::write(&input, "1,2\n3\n").unwrap();
    let out = run(&[
        "select",
        "--input",
        input.to_str().unwrap(),
        "--method",
        "fps",
        "--budget-count",
        "1",
    ]);
    assert_exit(&out, 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "stderr: {stderr}");
}
