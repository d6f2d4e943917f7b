use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dmsparse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmsparse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_then_solve_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmsparse(&["gen", "--m", "30", "--n", "80", "--s", "4", "--seed", "3", "--out-dir", p(dir.path())]);
    assert!(out.status.success(), "{out:?}");
    for f in ["phi.mat", "x.vec", "y.vec"] {
        assert!(dir.path().join(f).exists());
    }
    let est = dir.path().join("xhat.vec");
    let out = dmsparse(&[
        "solve",
        "--matrix-file",
        p(&dir.path().join("phi.mat")),
        "--y-file",
        p(&dir.path().join("y.vec")),
        "--truth-file",
        p(&dir.path().join("x.vec")),
        "--s",
        "4",
        "--solver",
        "omp",
        "--budget",
        "1",
        "--out",
        p(&est),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.starts_with("omp: ") && text.contains("rel_mse"), "{text}");
    let x = fs::read_to_string(dir.path().join("x.vec")).unwrap();
    let xhat = fs::read_to_string(&est).unwrap();
    let nums = |t: &str| -> Vec<f64> {
        t.lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.trim().parse().unwrap())
            .collect()
    };
    let (a, b) = (nums(&x), nums(&xhat));
    assert_eq!(a.len(), 80);
    assert!(a.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-8));
}

#[test]
fn solve_generated_problem_with_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let out = dmsparse(&[
        "solve", "--m", "40", "--n", "100", "--s", "5", "--seed", "2", "--budget", "0.5", "--solver", "dm", "--beta",
        "-0.5", "--trace", p(&trace),
    ]);
    assert!(out.status.success(), "{out:?}");
    let csv = fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("suite,algorithm,m,n,s,"));
    assert!(csv.lines().count() > 1);
}

#[test]
fn bench_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(
        &cfg,
        "suite = vary-s\nm = 20\nn = 50\ngrid = 2, 3\ntrials = 2\nbudget = 0.05\nalgorithms = dm, omp\noutput = out.csv\n",
    )
    .unwrap();
    let summary = dir.path().join("summary.csv");
    let out = dmsparse(&["bench", "--config", p(&cfg), "--summary", p(&summary)]);
    assert!(out.status.success(), "{out:?}");
    let csv = fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    let sum = fs::read_to_string(&summary).unwrap();
    assert_eq!(sum.lines().count(), 1 + 4);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "suite = vary-s\ngrid = 2000\n").unwrap();
    let out = dmsparse(&["bench", "--config", p(&cfg), "--out", p(&dir.path().join("o.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("need s <= n"));

    assert_eq!(dmsparse(&["solve", "--beta", "0"]).status.code(), Some(1));
    assert_eq!(dmsparse(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(dmsparse(&["--help"]).status.code(), Some(0));
}

#[test]
fn numerical_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let phi = dir.path().join("phi.mat");
    let y = dir.path().join("y.vec");
    // A zero matrix has no usable pseudo-inverse.
    fs::write(&phi, "2 3\n0 0 0\n0 0 0\n").unwrap();
    fs::write(&y, "2 1\n1\n2\n").unwrap();
    let out = dmsparse(&["solve", "--matrix-file", p(&phi), "--y-file", p(&y), "--s", "1", "--solver", "dm"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn learn_dict_then_recon_image() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("scene.pgm");
    let out = dmsparse(&["gen", "--image", p(&img), "--size", "48x40", "--seed", "4"]);
    assert!(out.status.success(), "{out:?}");

    let dict = dir.path().join("d.mat");
    let out = dmsparse(&[
        "learn-dict", "--images", p(&img), "--patch-w", "4", "--atoms", "24", "--s-train", "3", "--iters", "3",
        "--patches", "300", "--coder", "omp", "--out", p(&dict),
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(fs::read_to_string(&dict).unwrap().starts_with("# atoms 24x16 patch_w=4\n"));

    let recon = dir.path().join("recon.pgm");
    let diff = dir.path().join("diff.pgm");
    let out = dmsparse(&[
        "recon-image", "--image", p(&img), "--dict", p(&dict), "--s", "4", "--budget", "0.01", "--solver", "dm",
        "--out", p(&recon), "--diff", p(&diff),
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("overall SNR"));
    for f in [&recon, &diff] {
        let bytes = fs::read(f).unwrap();
        assert!(bytes.starts_with(b"P5"));
        assert!(bytes.len() > 48 * 40);
    }
}
