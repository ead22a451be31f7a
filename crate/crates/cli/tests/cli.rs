use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn vvi(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vvi"))
        .args(args)
        .current_dir(dir)
        .env_remove("VVI_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn solve_exit_codes() {
    let dir = TempDir::new().unwrap();
    let ok = vvi(&["solve", "example-q", "--xi", "0.5,0.5"], dir.path());
    assert_eq!(code(&ok), 0);
    let v = json(&ok);
    assert_eq!(v["status"], "Converged");
    for x in v["point"].as_array().unwrap() {
        assert!((x.as_f64().unwrap() - 0.7937005259840998).abs() < 1e-6);
    }

    let empty = vvi(
        &["solve", "example-p", "--xi", "0.5,0.5", "--max-iter", "20000"],
        dir.path(),
    );
    assert_eq!(code(&empty), 2);
    assert_ne!(json(&empty)["status"], "Converged");

    assert_eq!(code(&vvi(&["solve", "example-q", "--xi", "0.5,0.6"], dir.path())), 1);
    assert_eq!(code(&vvi(&["solve", "example-q"], dir.path())), 1);
    assert_eq!(code(&vvi(&["solve", "nosuch", "--xi", "1"], dir.path())), 1);
    assert_eq!(code(&vvi(&["--help"], dir.path())), 0);
}

#[test]
fn sweep_row_counts() {
    let dir = TempDir::new().unwrap();
    let q = vvi(&["sweep", "example-q", "--resolution", "100"], dir.path());
    assert_eq!(code(&q), 0);
    let text = stdout(&q);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 101);
    assert!(rows.iter().all(|r| r.contains(",Converged,")));

    let p = vvi(
        &[
            "sweep",
            "example-p",
            "--resolution",
            "100",
            "--starts",
            "1",
            "--out",
            "p.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&p), 0);
    let text = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 101);
    let failed: Vec<&&str> = rows.iter().filter(|r| !r.contains(",Converged,")).collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0].starts_with("0.5,0.5,"));

    assert_eq!(code(&vvi(&["sweep", "example-q", "--resolution", "0"], dir.path())), 1);
    assert_eq!(
        code(&vvi(
            &[
                "sweep",
                "example-q",
                "--resolution",
                "4",
                "--out",
                "/nonexistent/dir/x.csv"
            ],
            dir.path()
        )),
        1
    );
}

#[test]
fn components_of_the_examples() {
    let dir = TempDir::new().unwrap();
    for (name, count, bound) in [("example-q", 1, "Bounded"), ("example-p", 2, "Unbounded")] {
        let csv = format!("{name}.csv");
        assert_eq!(
            code(&vvi(
                &["sweep", name, "--resolution", "100", "--starts", "1", "--out", &csv],
                dir.path()
            )),
            0
        );
        let o = vvi(&["components", &csv, "--problem", name], dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let v = json(&o);
        let comps = v["components"].as_array().unwrap();
        assert_eq!(comps.len(), count);
        assert!(comps.iter().all(|c| c["boundedness"] == bound));
        assert_eq!(v["verdict"]["consistency"], "Consistent");
    }
}

#[test]
fn tampered_cloud_is_a_violation() {
    let dir = TempDir::new().unwrap();
    // two far apart bounded clusters of a box-constrained problem
    let csv = "xi_1,xi_2,interior,status,iterations,residual,x_1,x_2\n\
               1,0,false,Converged,1,0,-0.9,-0.9\n\
               1,0,false,Converged,1,0,-0.89,-0.9\n\
               0,1,false,Converged,1,0,0.9,0.9\n";
    fs::write(dir.path().join("t.csv"), csv).unwrap();
    let args = [
        "components",
        "t.csv",
        "--problem",
        "random-affine:symmetric:2:2:3",
        "--delta",
        "0.1",
        "--no-refine",
    ];
    let mut forced = args.to_vec();
    forced.push("--assume-monotone");
    let o = vvi(&forced, dir.path());
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    assert_eq!(json(&o)["verdict"]["consistency"], "Violation");
}

#[test]
fn empty_cloud_reports_empty_set() {
    let dir = TempDir::new().unwrap();
    let csv = "xi_1,xi_2,interior,status,iterations,residual,x_1,x_2\n0.5,0.5,true,Diverged,10,1,1e9,1e9\n";
    fs::write(dir.path().join("e.csv"), csv).unwrap();
    let o = vvi(&["components", "e.csv", "--problem", "example-p"], dir.path());
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["verdict"]["consistency"], "EmptySet");
    assert_eq!(v["components"].as_array().unwrap().len(), 0);
}

#[test]
fn check_reports() {
    let dir = TempDir::new().unwrap();
    let q = json(&vvi(&["check", "example-q"], dir.path()));
    assert_eq!(q["monotone"], true);
    assert_eq!(q["symmetry"], "Symmetric");
    let skew = json(&vvi(&["check", "random-affine:skew:4:3:7"], dir.path()));
    assert_eq!(skew["monotone"], true);
    assert_eq!(skew["symmetry"], "SkewSymmetric");
    // the second example's first criterion has an indefinite symmetric part
    let p = json(&vvi(&["check", "example-p"], dir.path()));
    assert_eq!(p["monotone"], false);
    assert!(p["witness"]["pairing"].as_f64().unwrap() < 0.0);
}

#[test]
fn verify_examples() {
    let dir = TempDir::new().unwrap();
    for name in ["example-q", "example-p"] {
        let o = vvi(&["verify-example", name, "--resolution", "100"], dir.path());
        assert_eq!(code(&o), 0, "{}", stdout(&o));
        assert!(stdout(&o).contains("max error"));
        let plot = fs::read_to_string(dir.path().join(format!("{name}-plot.csv"))).unwrap();
        assert!(plot.starts_with("x_1,x_2\n"));
        let expected = if name == "example-q" { 101 } else { 100 };
        assert_eq!(plot.lines().count(), expected + 1);
    }
    assert_eq!(code(&vvi(&["verify-example", "nosuch"], dir.path())), 1);
}

#[test]
fn problem_file_round_trip_gives_identical_sweep() {
    let dir = TempDir::new().unwrap();
    for p in [
        vvi_core::catalog::example_p(),
        vvi_core::catalog::resolve("random-affine:mixed:3:3:2").unwrap(),
    ] {
        let file = dir.path().join("problem.json");
        fs::write(&file, p.to_json().unwrap()).unwrap();
        let from_file = vvi(
            &["sweep", file.to_str().unwrap(), "--resolution", "8", "--seed", "5"],
            dir.path(),
        );
        let from_name = vvi(&["sweep", &p.name, "--resolution", "8", "--seed", "5"], dir.path());
        assert_eq!(code(&from_file), 0);
        assert_eq!(stdout(&from_file), stdout(&from_name));
    }
}

#[test]
fn malformed_problem_file_names_the_field() {
    let dir = TempDir::new().unwrap();
    let bad = r#"{"n":2,"m":1,"fields":[{"type":"poly","exprs":["x1","x1 +"]}],"K":{"type":"whole_space","n":2},"name":"bad"}"#;
    fs::write(dir.path().join("bad.json"), bad).unwrap();
    let o = vvi(&["solve", "bad.json", "--xi", "1"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("fields[0].exprs[1]"));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let one = vvi(
        &["sweep", "example-p", "--resolution", "30", "--threads", "1"],
        dir.path(),
    );
    let env = Command::new(env!("CARGO_BIN_EXE_vvi"))
        .args(["sweep", "example-p", "--resolution", "30"])
        .env("VVI_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, env.stdout);
    assert_eq!(
        code(&vvi(
            &["sweep", "example-p", "--resolution", "3", "--threads", "x"],
            dir.path()
        )),
        1
    );
}
