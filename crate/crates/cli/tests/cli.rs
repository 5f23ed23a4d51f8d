use std::path::{Path, PathBuf};
use std::process::{Command, Output};

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let p = self.0.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_grasplab"))
            .args(args)
            .current_dir(self.0.path())
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const HEADER: &str = "cx,cy,cz,rx,ry,rz,theta,sq";

#[test]
fn help_and_version_succeed() {
    let d = Dir::new();
    assert_eq!(code(&d.run(&["--help"])), 0);
    assert_eq!(code(&d.run(&["eval", "--help"])), 0);
    assert_eq!(code(&d.run(&["--version"])), 0);
}

#[test]
fn usage_errors_exit_1() {
    let d = Dir::new();
    let g = d.file("g.csv", &format!("{HEADER}\n0,0,0,0,1,0,0,0.5\n"));
    let g = g.to_str().unwrap();
    for args in [
        vec!["frobnicate"],
        vec![],
        vec!["select", g],
        vec!["select", g, "--policy", "greedy"],
        vec!["--set", "no.such.key=1", "select", g, "--policy", "heuristic"],
        vec!["--set", "labels.k1", "select", g, "--policy", "heuristic"],
        vec!["collide", "c.xyz", g, "-o", "out.csv"],
        vec!["collide", "c.xyz", g, "--gripper", "0.06,0.08", "-o", "out.csv"],
        vec!["--set", "losscheck.h=-1", "losscheck"],
    ] {
        let out = d.run(&args);
        assert_eq!(code(&out), 1, "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn data_errors_exit_2_with_positions() {
    let d = Dir::new();
    let out = d.run(&["select", "missing.csv", "--policy", "heuristic"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("missing.csv"));

    d.file("bad.csv", &format!("{HEADER}\n0,0,0,0,1,0,0,0.5\n0,0,0,0,1,0,0,zero\n"));
    let out = d.run(&["select", "bad.csv", "--policy", "heuristic"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.csv:3"), "{}", stderr(&out));

    d.file("empty.csv", &format!("{HEADER}\n"));
    assert_eq!(code(&d.run(&["select", "empty.csv", "--policy", "analytic"])), 2);

    d.file("run.cfg", "labels.k1 = 5\nlabels.k1 = 6\n");
    let out = d.run(&["--config", "run.cfg", "losscheck", "--configs", "1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("run.cfg:2"), "{}", stderr(&out));
}

#[test]
fn losscheck_passes_and_reports_failures_with_exit_3() {
    let d = Dir::new();
    let out = d.run(&["losscheck"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 6);
    for line in text.lines() {
        let err: f64 = line.split("max_rel_error=").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
        assert!(err < 1e-5, "{line}");
    }
    let out = d.run(&["--set", "losscheck.tol=1e-300", "losscheck", "--configs", "5"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn select_prints_the_only_row() {
    let d = Dir::new();
    let row = "0.1,0.2,0.3,0,1,0,0.5,0.75";
    d.file("one.csv", &format!("{HEADER}\n{row}\n"));
    for policy in ["heuristic", "analytic"] {
        let out = d.run(&["select", "one.csv", "--policy", policy]);
        assert_eq!(code(&out), 0);
        assert_eq!(stdout(&out), format!("{row}\n"));
    }
}

#[test]
fn select_policies_can_disagree() {
    let d = Dir::new();
    // Top-down with a weaker score against a better score from the side.
    d.file("two.csv", &format!("{HEADER}\n0,0,0,1,0,0,1.57,0.5\n0,0,0,1,0,0,-1.2,0.99\n"));
    let h = stdout(&d.run(&["select", "two.csv", "--policy", "heuristic"]));
    let a = stdout(&d.run(&["select", "two.csv", "--policy", "analytic"]));
    assert!(h.ends_with(",1.57,0.5\n"), "{h}");
    assert!(a.ends_with(",1.57,0.5\n"), "{a}");
    // A coefficient file that only values graspability flips the analytic choice.
    d.file("flat.txt", "a = 0.000001\n");
    let a = stdout(&d.run(&["select", "two.csv", "--policy", "analytic", "--coeffs", "flat.txt"]));
    assert!(a.ends_with(",-1.2,0.99\n"), "{a}");
}

fn worksheet(d: &Dir) {
    let contact = |x: f64, ny: f64, nz: f64| {
        let n = (ny * ny + nz * nz).sqrt();
        format!("{x} -0.02 0 0 {} {}\n{x} 0.02 0 0 1 0\n", -ny / n, nz / n)
    };
    let mut observed = String::new();
    observed += &contact(0.0, 1.0, 0.0);
    observed += &contact(1.0, 1.0, 1.0);
    observed += &contact(2.0, 1.0, 0.0);
    d.file("observed.xyz", &observed);
    // The full scene also has a point inside the third grasp's +Y finger.
    d.file("scene.xyz", &format!("{observed}2 0.035 0 0 1 0\n"));
    d.file(
        "pred.csv",
        &format!("{HEADER}\n0,0,0,0,1,0,0,0.9\n1,0,0,0,1,0,0,0.8\n2,0,0,0,1,0,0,0.7\n5,0,0,0,1,0,0,0.1\n"),
    );
    d.file("gt.csv", &format!("{HEADER}\n0.01,0,0,0,1,0,0,1\n1.5,0,0,0,1,0,0,1\n2,0.015,0,0,1,0,0,1\n"));
}

#[test]
fn eval_matches_the_hand_worksheet() {
    let d = Dir::new();
    worksheet(&d);
    let g = "0.04,0.06,0.02,0.01";
    let out = d.run(&[
        "eval", "pred.csv", "scene.xyz", "gt.csv", "--gripper", g, "--pool", "4", "--top", "3", "--observed", "observed.xyz", "--csv",
        "report.csv",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out), "cfr=0.666667\nas=0.902369\nas_wc=0.569036\ntcr=0.666667\nn_selected=3\n");
    assert_eq!(
        std::fs::read_to_string(d.path("report.csv")).unwrap(),
        "cfr,as,as_wc,tcr,n_selected\n0.666667,0.902369,0.569036,0.666667,3\n"
    );
    // Selecting on the full scene drops the colliding grasp and admits the empty one.
    let out = d.run(&["eval", "pred.csv", "scene.xyz", "gt.csv", "--gripper", g, "--pool", "4", "--top", "3"]);
    assert_eq!(stdout(&out), "cfr=1.000000\nas=0.569036\nas_wc=0.569036\ntcr=0.333333\nn_selected=3\n");
}

#[test]
fn collide_keeps_an_ordered_subset() {
    let d = Dir::new();
    worksheet(&d);
    let out = d.run(&["collide", "scene.xyz", "pred.csv", "--gripper", "0.04,0.06,0.02,0.01", "-o", "free.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let free = std::fs::read_to_string(d.path("free.csv")).unwrap();
    assert_eq!(free, format!("{HEADER}\n0,0,0,0,1,0,0,0.9\n1,0,0,0,1,0,0,0.8\n5,0,0,0,1,0,0,0.1\n"));
}

#[test]
fn score_and_confidence_on_the_worksheet() {
    let d = Dir::new();
    worksheet(&d);
    let g = "0.04,0.06,0.02,0.01";
    assert_eq!(code(&d.run(&["score", "observed.xyz", "pred.csv", "--gripper", g, "-o", "scored.csv"])), 0);
    let scores: Vec<String> = std::fs::read_to_string(d.path("scored.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().to_string())
        .collect();
    assert_eq!(scores, ["1", "0.707106781", "1", "0"]);

    let out = d.run(&["confidence", "observed.xyz", "gt.csv", "-o", "conf.txt"]);
    assert_eq!(code(&out), 1, "a width is required");
    let out = d.run(&["--set", "gripper.width=0.06", "confidence", "observed.xyz", "gt.csv", "--dth", "0.05", "-o", "conf.txt"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(d.path("conf.txt")).unwrap();
    assert!(text.starts_with("# d_th=0.05 width=0.06 n=6\n"), "{text}");
}

#[test]
fn fit_writes_coefficients_and_flags_nonconvergence() {
    let d = Dir::new();
    let mut xy = String::from("x,y\n");
    for i in 0..40 {
        let x = i as f64 / 39.0;
        xy += &format!("{x},{}\n", 1.0 / (1.0 + (-10.1244f64 * (x - 0.6103)).exp()));
    }
    d.file("xy.csv", &xy);
    let out = d.run(&["fit", "--mode", "sigmoid", "xy.csv", "-o", "sig.txt"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(d.path("sig.txt")).unwrap(), "a = 10.1244\nb = 0.6103\n");
    let out = d.run(&["--set", "fit.max_iter=1", "fit", "--mode", "sigmoid", "xy.csv", "-o", "sig1.txt"]);
    assert_eq!(code(&out), 3);
    assert!(Path::new(&d.path("sig1.txt")).exists());

    d.file("line.csv", "x,y\n0,-0.0587\n1,0.8196\n0.5,0.38045\n");
    assert_eq!(code(&d.run(&["fit", "--mode", "linear", "line.csv", "-o", "lin.txt"])), 0);
    assert_eq!(std::fs::read_to_string(d.path("lin.txt")).unwrap(), "slope = 0.8783\nintercept = -0.0587\n");
}

#[test]
fn normals_then_sample() {
    let d = Dir::new();
    let mut text = String::new();
    for i in 0..20 {
        for j in 0..20 {
            text += &format!("{} {} 0\n", i as f64 * 0.005, j as f64 * 0.005);
        }
    }
    d.file("plane.xyz", &text);
    assert_eq!(code(&d.run(&["normals", "plane.xyz", "-k", "8", "-o", "plane.ply"])), 0);
    let ply = std::fs::read_to_string(d.path("plane.ply")).unwrap();
    assert!(ply.contains("property float nx") || ply.contains("property double nx"), "{ply}");
    let out = d.run(&["--seed", "1", "sample", "plane.ply", "--gripper", "0.04,0.06,0.02,0.01", "--centers", "5", "-o", "c.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = std::fs::read_to_string(d.path("c.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows, 5 * 4 * 3);
    let out = d.run(&["--subsample", "100", "sample", "plane.xyz", "--gripper", "0.04,0.06,0.02,0.01", "--centers", "200", "-o", "c2.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}
