use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn innervar(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_innervar"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run innervar")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn selftest_passes_and_detects_faults() {
    let dir = tempfile::tempdir().unwrap();
    let o = innervar(&["selftest", "--out", "st"], dir.path());
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(dir.path().join("st/selftest.csv").exists());
    let o = innervar(&["selftest", "--perturb-multiplier", "0.1"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("FAIL transforms[n=256]: dzbar_cauchy_identity"), "{}", stderr(&o));
    let o = innervar(&["selftest", "--n", "8"], dir.path());
    assert_eq!(code(&o), 2);
}

fn max_rate(csv: &str) -> f64 {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("lambda_re,lambda_im,iterations,residual,max_rate"));
    lines.map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).fold(0.0, f64::max)
}

#[test]
fn solve_writes_family_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    for (s, out) in [("hopf:phi=const:-1", "hopf"), ("rational:a=6,b=-2", "rational")] {
        let o = innervar(&["solve", "--structure", s, "--rho", "auto", "--n", "64", "--m", "8", "--out", out], dir.path());
        assert_eq!(code(&o), 0, "{s}: {}{}", stdout(&o), stderr(&o));
        let d = dir.path().join(out);
        let csv = fs::read_to_string(d.join("solutions.csv")).unwrap();
        assert_eq!(csv.lines().count(), 9);
        assert!(max_rate(&csv) <= 0.55);
        for j in 0..8 {
            let f = innervar::io::read_cf64_file(&d.join(format!("f_{j:04}.cf64"))).unwrap();
            assert_eq!(f.grid().n(), 64);
            assert!(d.join(format!("omega_{j:04}.cf64")).exists());
        }
        assert!(d.join("solve_checks.csv").exists());
        let cfg = fs::read_to_string(d.join("run.cfg")).unwrap();
        assert!(cfg.contains("command = solve"));
    }
    let a: Vec<String> = ["hopf", "rational"]
        .iter()
        .map(|d| {
            let mut names: Vec<String> = fs::read_dir(dir.path().join(d)).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
            names.sort();
            names.join(" ")
        })
        .collect();
    assert_eq!(a[0], a[1]);
}

#[test]
fn solve_usage_and_convergence_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = innervar(&["solve"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("structure"));
    assert_eq!(code(&innervar(&["solve", "--structure", "quartic:a=1"], dir.path())), 2);
    assert_eq!(code(&innervar(&["solve", "--structure", "zero", "--n", "100"], dir.path())), 2);
    assert_eq!(code(&innervar(&["solve", "--structure", "zero", "--a", "2", "--n", "64"], dir.path())), 2);
    let o = innervar(
        &["solve", "--structure", "rational:a=6,b=-2", "--n", "64", "--m", "8", "--tol", "1e-300", "--max-iter", "2"],
        dir.path(),
    );
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("no convergence"));
}

#[test]
fn config_file_drives_solve() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "# small family\ncommand = solve\nstructure = rational:a=6,b=-2\nn = 64\nm = 8\nrho = auto\nout = from_cfg\n",
    )
    .unwrap();
    let o = innervar(&["--config", "run.cfg", "solve"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("from_cfg/solutions.csv").exists());
    let o = innervar(&["--config", "run.cfg", "verify"], dir.path());
    assert_eq!(code(&o), 2);
    fs::write(dir.path().join("bad.cfg"), "structure rational\n").unwrap();
    assert_eq!(code(&innervar(&["--config", "bad.cfg", "solve"], dir.path())), 2);
    assert_eq!(code(&innervar(&["--config", "missing.cfg", "solve"], dir.path())), 3);
}

#[test]
fn verify_gallery_piecewise_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify", "--h", "gallery:piecewise", "--structure", "rational:a=6,b=-2", "--n", "128", "--seed", "3"];
    let o = innervar(&[&args[..], &["--out", "v1"]].concat(), dir.path());
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    for title in ["general_bound", "distortion", "winding", "injectivity", "final_step"] {
        assert!(stdout(&o).contains(&format!("== {title}[")), "{title}");
    }
    let o = innervar(&[&args[..], &["--out", "v2"]].concat(), dir.path());
    assert_eq!(code(&o), 0);
    let a = fs::read(dir.path().join("v1/verify.csv")).unwrap();
    let b = fs::read(dir.path().join("v2/verify.csv")).unwrap();
    assert_eq!(a, b, "same seed and config must give identical CSV");

    let o = innervar(&["report", "v1"], dir.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("margin") && text.contains("total:"));
    let o = innervar(&["report", "v1", "v2", "--csv"], dir.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("report,check,measured_1,pass_1,measured_2,pass_2,identical\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
    fs::create_dir(dir.path().join("empty")).unwrap();
    assert_eq!(code(&innervar(&["report", "empty"], dir.path())), 3);
}

#[test]
fn verify_refuses_loglog() {
    let dir = tempfile::tempdir().unwrap();
    let o = innervar(&["verify", "--h", "gallery:loglog", "--n", "128"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("refused"));
    assert!(stdout(&o).contains("hypothesis_gate"));
}

#[test]
fn verify_reports_malformed_cf64_offset() {
    let dir = tempfile::tempdir().unwrap();
    let o = innervar(&["gallery", "dump", "piecewise", "--n", "64", "--out", "g"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let good = fs::read(dir.path().join("g/piecewise.cf64")).unwrap();
    let mut bad = good.clone();
    bad[4] = 9;
    fs::write(dir.path().join("bad.cf64"), &bad).unwrap();
    let o = innervar(&["verify", "--h", "bad.cf64"], dir.path());
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("byte offset 4"), "{}", stderr(&o));
    fs::write(dir.path().join("short.cf64"), &good[..100]).unwrap();
    let o = innervar(&["verify", "--h", "short.cf64"], dir.path());
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("byte offset 100"), "{}", stderr(&o));
    assert_eq!(code(&innervar(&["verify", "--h", "nothing.cf64"], dir.path())), 3);
    assert_eq!(code(&innervar(&["verify"], dir.path())), 2);
}

#[test]
fn gallery_list_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let o = innervar(&["gallery", "list"], dir.path());
    assert_eq!(code(&o), 0);
    for name in innervar::gallery::NAMES {
        assert!(stdout(&o).contains(name));
    }
    let o = innervar(&["gallery", "dump", "cuberoot", "--n", "64", "--out", "g"], dir.path());
    assert_eq!(code(&o), 0);
    let f = innervar::io::read_cf64_file(&dir.path().join("g/cuberoot.cf64")).unwrap();
    let e = innervar::gallery::cuberoot_example();
    assert_eq!(f, e.sample(e.default_grid(64).unwrap()).unwrap());
    let csv = fs::read_to_string(dir.path().join("g/cuberoot_claims.csv")).unwrap();
    assert!(csv.starts_with(innervar::report::CSV_HEADER));
    assert_eq!(code(&innervar(&["gallery", "dump", "nope"], dir.path())), 2);
}
