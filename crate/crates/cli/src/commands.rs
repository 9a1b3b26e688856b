//! Command implementations. Each returns whether every check passed; errors
//! carry their exit code.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use innervar::analysis;
use innervar::energies::{self, EnergyDensity};
use innervar::field::{self, ComplexField, FieldPair, Scheme};
use innervar::gallery::{self, Claim, GalleryEntry};
use innervar::io;
use innervar::report::{self, VerificationReport, CSV_HEADER};
use innervar::solver::{self, SolverConfig};
use innervar::structure::{self, extend, OperatorConstants, StructureSpec};
use innervar::transforms::{self, Kernel, Plan};
use innervar::{Complex64 as C64, Error, GridSpec, Region};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{self, HSource, Rho, RunConfig};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io(String),
    Check(String),
    NoConvergence(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
            Failure::NoConvergence(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Io(m) => write!(f, "I/O error: {m}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
            Failure::NoConvergence(m) => write!(f, "{m}"),
        }
    }
}

fn is_no_convergence(e: &Error) -> bool {
    match e {
        Error::NoConvergence { .. } => true,
        Error::FamilyMember { source, .. } => is_no_convergence(source),
        _ => false,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        if is_no_convergence(&e) {
            return Failure::NoConvergence(msg);
        }
        match e {
            Error::Io(_) | Error::Format { .. } => Failure::Io(msg),
            Error::InvalidGrid(_) | Error::InvalidArgument(_) => Failure::Usage(msg),
            _ => Failure::Check(msg),
        }
    }
}

pub type CmdResult = Result<bool, Failure>;

fn io_err(path: &Path, e: impl fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// All reports in one CSV file with a single header.
pub fn reports_csv(reports: &[VerificationReport]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in reports {
        out.push_str(&r.csv_rows());
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    io::atomic_write(path, text.as_bytes()).map_err(|e| io_err(path, e))
}

fn write_field(path: &Path, f: &ComplexField) -> Result<(), Failure> {
    io::write_cf64_file(path, f).map_err(|e| io_err(path, e))
}

fn print_reports(reports: &[VerificationReport]) -> bool {
    let mut pass = true;
    for r in reports {
        print!("{}", r.summary());
        for c in r.failures() {
            eprintln!("FAIL {}: {}", r.title, c.name);
            pass = false;
        }
    }
    pass
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

fn smooth_bump(z: C64) -> C64 {
    let r2 = z.norm_sqr();
    if r2 < 1.0 {
        C64::new((-1.0 / (1.0 - r2)).exp() * std::f64::consts::E, 0.0)
    } else {
        C64::new(0.0, 0.0)
    }
}

pub const SELFTEST_PROBES: usize = 8;
pub const SELFTEST_SAMPLES: usize = 2000;

fn transform_report(grid: GridSpec, perturb: Option<f64>, seed: u64) -> Result<VerificationReport, Failure> {
    let plan = match perturb {
        Some(eps) => Plan::perturbed(grid, eps)?,
        None => Plan::new(grid)?,
    };
    let w = field::sample(grid, smooth_bump, None)?.into_supported()?;
    let mut rep = VerificationReport::new(format!("transforms[n={}]", grid.n()));
    let f = plan.cauchy(&w)?;
    rep.check_le("dzbar_cauchy_identity", transforms::identity_residual(&w, &f)?, 1e-2, "relative L2 residual of d_zbar C w = w");
    let s = plan.beurling(&w)?;
    let dz = plan.cauchy_dz(&w)?;
    let rel = field::lp_norm(&s.sub(&dz)?, 2.0, &Region::Plane)? / field::lp_norm(&s, 2.0, &Region::Plane)?;
    rep.check_le("beurling_is_dz_cauchy", rel, 1e-8, "relative L2 distance of S w and d_z C w");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<C64> = (0..SELFTEST_PROBES)
        .filter_map(|_| {
            let z = C64::from_polar(rng.gen_range(0.2..3.0), rng.gen_range(0.0..std::f64::consts::TAU));
            transforms::snap(&grid, z)
        })
        .collect();
    let mut worst = 0.0f64;
    for (kernel, fft) in [(Kernel::Cauchy, &f), (Kernel::Beurling, &s)] {
        for (z, q) in probes.iter().zip(transforms::quadrature_oracle(&w, kernel, &probes)?) {
            let v = fft.value_near(*z).unwrap_or_default();
            worst = worst.max((v - q).norm() / q.norm());
        }
    }
    rep.check_le("fft_vs_quadrature", worst, 1e-2, format!("max relative error at {} probes", probes.len()));
    Ok(rep)
}

fn gallery_reports(n: usize, seed: u64) -> Result<Vec<VerificationReport>, Failure> {
    let mut out = Vec::new();
    for e in gallery::list() {
        let mut rep = VerificationReport::new(format!("derivatives[{}]", e.name));
        let chk = e.derivative_check_at(e.default_grid(n)?, 16.0)?;
        rep.check_le(
            "central4_vs_closed_form",
            chk.rel_error,
            1e-3,
            format!("{} points, refined {:.3e}", chk.points, chk.rel_error_refined),
        );
        out.push(rep);
        out.push(analysis::check_entry_claims(&e, seed)?);
    }
    Ok(out)
}

fn structure_reports(seed: u64) -> Result<Vec<VerificationReport>, Failure> {
    let specs = [
        StructureSpec::zero(),
        StructureSpec::rational(C64::new(6.0, 0.0), C64::new(-2.0, 0.0), None)?,
        StructureSpec::affine(C64::new(1.0, 0.0), C64::new(0.0, 0.5))?,
        config::parse_structure("hopf:phi=const:-1").map_err(Failure::Usage)?,
    ];
    let mut out = Vec::new();
    for s in &specs {
        out.push(structure::verify_structure(s, SELFTEST_SAMPLES, seed)?);
        out.push(structure::verify_extension(&extend(s), SELFTEST_SAMPLES, seed));
    }
    Ok(out)
}

pub fn selftest(n: usize, perturb: Option<f64>, seed: u64, out: Option<&Path>) -> CmdResult {
    let grid = GridSpec::new(4.0, n).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut reports = vec![transform_report(grid, perturb, seed)?];
    reports.extend(gallery_reports(n, seed)?);
    reports.extend(structure_reports(seed)?);
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_text(&dir.join("selftest.csv"), &reports_csv(&reports))?;
    }
    Ok(print_reports(&reports))
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

pub fn require_structure(cfg: &RunConfig) -> Result<StructureSpec, Failure> {
    let s = cfg
        .structure
        .as_deref()
        .ok_or_else(|| Failure::Usage("a structure is required (--structure or `structure =`)".into()))?;
    config::parse_structure(s).map_err(Failure::Usage)
}

fn lambda0_for(spec: &StructureSpec) -> Result<f64, Failure> {
    let consts = OperatorConstants::defaults(spec.alpha())?;
    let l0 = structure::lambda_zero(spec, &consts);
    if !l0.is_finite() {
        return Err(Failure::Check(format!("lambda_0 is not finite for {}", spec.name())));
    }
    Ok(l0)
}

fn solver_config(cfg: &RunConfig, lambda0: f64) -> SolverConfig {
    let mut sc = SolverConfig::new(cfg.grid(), C64::new(lambda0, 0.0), lambda0).with_max_iter(cfg.max_iter);
    if let Some(t) = cfg.tol {
        sc = sc.with_tol(t);
    }
    sc
}

pub fn solve(cfg: &RunConfig) -> CmdResult {
    let spec = require_structure(cfg)?;
    let l0 = lambda0_for(&spec)?;
    let rho = match cfg.rho {
        Rho::Auto => l0,
        Rho::Value(r) => r,
    };
    if rho < l0 * (1.0 - 1e-12) {
        return Err(Failure::Usage(format!("rho = {rho} is below lambda_0 = {l0:.6e}")));
    }
    let ext = extend(&spec);
    let base = solver_config(cfg, l0);
    log::info!("solving {} members of {} at rho = {rho:.6e}, lambda_0 = {l0:.6e}", cfg.m, spec.name());
    let fam = solver::solve_family(&ext, &base, rho, cfg.m)?;
    ensure_dir(&cfg.out)?;
    for (j, s) in fam.solutions.iter().enumerate() {
        write_field(&cfg.out.join(format!("f_{j:04}.cf64")), &s.f)?;
        write_field(&cfg.out.join(format!("omega_{j:04}.cf64")), &s.omega)?;
    }
    write_text(&cfg.out.join("solutions.csv"), &fam.csv())?;
    let mut reports = vec![fam.continuity_report()];
    for s in &fam.solutions {
        reports.push(solver::check_good_solution(&ext, s)?);
    }
    write_text(&cfg.out.join("solve_checks.csv"), &reports_csv(&reports))?;
    let mut run = cfg.clone();
    run.command = Some("solve".into());
    write_text(&cfg.out.join("run.cfg"), &run.to_text())?;
    println!(
        "{}: {} members at rho = {rho:.6e} (lambda_0 = {l0:.6e}), max rate after step 1 = {:.3e}",
        spec.name(),
        fam.solutions.len(),
        fam.solutions.iter().map(|s| s.max_rate_after_first()).fold(0.0, f64::max)
    );
    Ok(print_reports(&reports))
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

pub const CERTIFICATE_POINTS: usize = 100;
pub const WINDING_PAIRS: usize = 10;
pub const INJECTIVITY_PAIRS: usize = 100_000;
pub const FINAL_STEP_PAIRS: usize = 10_000;
/// Stencil half-width of central4 plus one cell.
const STENCIL_CELLS: i64 = 3;

/// No excluded sample within the central4 stencil of the grid point nearest `z`.
fn stencil_clear(h: &ComplexField, z: C64) -> bool {
    let g = h.grid();
    let Some((j, k)) = g.nearest(z) else { return false };
    let n = g.n() as i64;
    for dj in -STENCIL_CELLS..=STENCIL_CELLS {
        for dk in -STENCIL_CELLS..=STENCIL_CELLS {
            let (jj, kk) = (j as i64 + dj, k as i64 + dk);
            if jj < 0 || kk < 0 || jj >= n || kk >= n || h.is_excluded(g.index(jj as usize, kk as usize)) {
                return false;
            }
        }
    }
    true
}

struct Subject {
    label: String,
    entry: Option<GalleryEntry>,
    /// `h` on its certificate grid.
    h: ComplexField,
    region: Region,
}

fn load_subject(src: &HSource, n: usize) -> Result<Subject, Failure> {
    match src {
        HSource::Gallery(name) => {
            let e = gallery::by_name(name).ok_or_else(|| Failure::Usage(format!("unknown gallery entry `{name}`")))?;
            let h = e.sample(e.default_grid(n)?)?;
            Ok(Subject {
                label: format!("gallery:{name}"),
                region: e.domain,
                entry: Some(e),
                h,
            })
        }
        HSource::File(path) => {
            let h = io::read_cf64_file(path).map_err(|e| match e {
                Error::Io(err) => io_err(path, err),
                other => io_err(path, other),
            })?;
            Ok(Subject {
                label: path.display().to_string(),
                entry: None,
                h,
                region: Region::unit_disk(),
            })
        }
    }
}

fn certificate_points(s: &Subject, seed: u64) -> Vec<C64> {
    let d = s.h.grid().spacing();
    let sing = s.entry.as_ref().map(|e| e.singular_distance.clone());
    analysis::interior_points(&s.region, 8.0 * d, CERTIFICATE_POINTS, seed, |z| {
        sing.as_ref().map_or(true, |f| f(z) > 8.0 * d) && stencil_clear(&s.h, z)
    })
}

/// `h` and its derivative pair on the solver grid, or `None` when a file
/// field lives on a grid the solver cannot use.
fn solver_fields(s: &Subject, grid: GridSpec) -> Result<Option<(ComplexField, FieldPair)>, Failure> {
    match &s.entry {
        Some(e) => Ok(Some((e.sample(grid)?, e.sample_derivatives(grid)?))),
        None if s.h.grid().half_width() >= transforms::MIN_HALF_WIDTH => {
            let pair = field::wirtinger(&s.h, Scheme::Central4)?;
            Ok(Some((s.h.clone(), pair)))
        }
        None => Ok(None),
    }
}

/// The difference-map checks live on `D/3`; test the origin and the circle.
fn covers_third_disk(region: &Region) -> bool {
    region.contains(C64::new(0.0, 0.0))
        && (0..64).all(|k| region.contains(C64::from_polar(1.0 / 3.0, std::f64::consts::TAU * k as f64 / 64.0)))
}

fn refusal(title: &str, label: &str, msg: &str) -> VerificationReport {
    let mut rep = VerificationReport::new(format!("{title}[{label}]"));
    rep.check_bool("hypothesis_gate", false, msg);
    rep
}

pub fn verify(cfg: &RunConfig) -> CmdResult {
    let src = cfg
        .h
        .as_deref()
        .ok_or_else(|| Failure::Usage("verify needs --h gallery:<name> or a CF64 path".into()))?;
    let src = config::parse_h_source(src).map_err(Failure::Usage)?;
    let subject = load_subject(&src, cfg.n)?;
    let spec = match (&cfg.structure, &subject.entry) {
        (Some(_), _) => Some(require_structure(cfg)?),
        (None, Some(e)) => e.structure().transpose()?,
        (None, None) => None,
    };
    let mut reports = Vec::new();
    if let Some(e) = &subject.entry {
        reports.push(analysis::check_entry_claims(e, cfg.seed)?);
    }
    let points = certificate_points(&subject, cfg.seed);
    if points.len() < CERTIFICATE_POINTS {
        return Err(Failure::Check(format!(
            "only {} of {CERTIFICATE_POINTS} certificate points found away from masks and boundary",
            points.len()
        )));
    }
    let mut refused = false;
    if let Some(spec) = &spec {
        let consts = OperatorConstants::defaults(spec.alpha())?;
        match analysis::gradient_bound_check(&subject.h, &subject.region, spec, &consts, &points) {
            Ok(certs) => reports.push(analysis::certificates_report(&format!("general_bound[{}]", subject.label), &certs)),
            Err(Error::HypothesisViolated(msg)) => {
                println!("refused: {} does not meet the hypotheses for {}: {msg}", spec.name(), subject.label);
                reports.push(refusal("hypotheses", &subject.label, &msg));
                refused = true;
            }
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(phi) = subject.entry.as_ref().and_then(|e| e.phi.clone()) {
        let region = subject.region;
        let mask = move |z: C64| !region.contains(z) || z.norm() == 0.0;
        let phif = field::sample(*subject.h.grid(), move |z| phi(z), Some(&mask))?;
        match analysis::model_bound_check(&subject.h, &phif, &subject.region, &points) {
            Ok(certs) => reports.push(analysis::certificates_report(&format!("model_bound[{}]", subject.label), &certs)),
            Err(Error::HypothesisViolated(msg)) => reports.push(refusal("model_hypotheses", &subject.label, &msg)),
            Err(e) => return Err(e.into()),
        }
    }
    if let (Some(spec), false) = (&spec, refused) {
        reports.extend(difference_map_reports(cfg, &subject, spec)?);
    }
    if let Ok(e) = energies::energy(&subject.h, &EnergyDensity::Dirichlet, &subject.region) {
        if let Some(last) = reports.last_mut() {
            last.note(format!("Dirichlet energy of h on the region: {e:.6e}"));
        }
    }
    ensure_dir(&cfg.out)?;
    write_text(&cfg.out.join("verify.csv"), &reports_csv(&reports))?;
    let mut run = cfg.clone();
    run.command = Some("verify".into());
    write_text(&cfg.out.join("run.cfg"), &run.to_text())?;
    Ok(print_reports(&reports) && !refused)
}

/// Distortion, winding, injectivity and final-step checks for `g^lambda`.
fn difference_map_reports(cfg: &RunConfig, s: &Subject, spec: &StructureSpec) -> Result<Vec<VerificationReport>, Failure> {
    let skipped = |why: String| {
        let mut rep = VerificationReport::new(format!("difference_map[{}]", s.label));
        rep.note(format!("skipped: {why}"));
        Ok(vec![rep])
    };
    if !covers_third_disk(&s.region) {
        return skipped("the domain of h does not contain the closed disk of radius 1/3".into());
    }
    let grid = GridSpec::new(cfg.a.max(transforms::MIN_HALF_WIDTH), cfg.n)?;
    let Some((h, pair)) = solver_fields(s, grid)? else {
        return skipped(format!(
            "the field's half width {} is below the solver minimum {}",
            s.h.grid().half_width(),
            transforms::MIN_HALF_WIDTH
        ));
    };
    let l0 = lambda0_for(spec)?;
    let ext = extend(spec);
    let base = solver_config(&RunConfig { a: grid.half_width(), ..cfg.clone() }, l0);
    let disk = Region::unit_disk();
    let n_sup = pair
        .d_zbar
        .in_region(&disk)
        .filter(|(i, _, _)| !pair.is_excluded(*i))
        .map(|(_, _, v)| v.norm())
        .fold(0.0, f64::max);
    let threshold = 4.0 * n_sup + 4.0 * l0 + spec.r();
    let good = solver::solve_good(&ext, &base.clone().with_lambda(C64::new(threshold, 0.0)))?;
    let dm = analysis::difference_map(&h, &pair, &good, spec.r())?;
    let mut reports = vec![analysis::distortion_check(&dm, analysis::DEFAULT_DISTORTION)];

    let sigma = match cfg.rho {
        Rho::Auto => analysis::sigma(&h, &pair.d_zbar, l0)?,
        Rho::Value(r) => r,
    };
    let fam = solver::solve_family(&ext, &base, sigma, analysis::MIN_WINDING_SAMPLES.max(cfg.m))?;
    let third = Region::disk(1.0 / 3.0);
    let pts: Vec<C64> = h.in_region(&third).map(|(_, z, _)| z).collect();
    if pts.len() < 2 {
        return Err(Error::EmptyRegion.into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rep = VerificationReport::new(format!("winding[rho={sigma:.6}]"));
    for k in 0..WINDING_PAIRS {
        let (z1, z2) = loop {
            let a = pts[rng.gen_range(0..pts.len())];
            let b = pts[rng.gen_range(0..pts.len())];
            if a != b {
                break (a, b);
            }
        };
        let a = h.value_near(z1).unwrap_or_default() - h.value_near(z2).unwrap_or_default();
        let w = analysis::family_winding(&fam, z1, z2, a)?;
        rep.check_bool(
            format!("degree_one_{k}"),
            w.degree == 1 && w.certified,
            format!("z1 = {z1:.4}, z2 = {z2:.4}, degree {}, min modulus {:.3e}, max step {:.3e}", w.degree, w.min_modulus, w.max_step),
        );
    }
    reports.push(rep);
    reports.push(analysis::injectivity_check(&fam, &h, INJECTIVITY_PAIRS, cfg.seed)?);
    reports.push(analysis::final_step_check(&fam, &h, FINAL_STEP_PAIRS, cfg.seed)?);
    Ok(reports)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub report: String,
    pub check: String,
    pub measured: String,
    pub bound: String,
    pub margin: String,
    pub pass: bool,
}

/// Rows of every report CSV (files whose header matches) in `dir`, in file
/// name order.
pub fn read_run(dir: &Path) -> Result<Vec<Row>, Failure> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |x| x == "csv"))
        .collect();
    files.sort();
    let mut rows = Vec::new();
    let mut found = false;
    for path in files {
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        if text.lines().next() != Some(CSV_HEADER) {
            continue;
        }
        found = true;
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| io_err(&path, e))?;
            if rec.len() != 7 {
                return Err(io_err(&path, format!("expected 7 columns, got {}", rec.len())));
            }
            rows.push(Row {
                report: rec[0].to_string(),
                check: rec[1].to_string(),
                measured: rec[2].to_string(),
                bound: rec[3].to_string(),
                margin: rec[4].to_string(),
                pass: &rec[5] == "true",
            });
        }
    }
    if !found {
        return Err(Failure::Io(format!("{}: no verification report CSV files", dir.display())));
    }
    Ok(rows)
}

pub fn single_summary(dir: &Path, rows: &[Row]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "run: {}", dir.display());
    let _ = writeln!(
        out,
        "{:<36} {:<32} {:>13} {:>13} {:>13}  verdict",
        "report", "check", "measured", "bound", "margin"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<36} {:<32} {:>13} {:>13} {:>13}  {}",
            r.report,
            r.check,
            r.measured,
            r.bound,
            r.margin,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    let _ = writeln!(out, "total: {passed}/{} passed", rows.len());
    out
}

/// Rows keyed by `(report, check)` across runs, in order of first appearance.
pub fn merge_runs(runs: &[Vec<Row>]) -> Vec<((String, String), Vec<Option<Row>>)> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut table: BTreeMap<(String, String), Vec<Option<Row>>> = BTreeMap::new();
    for (k, rows) in runs.iter().enumerate() {
        for r in rows {
            let key = (r.report.clone(), r.check.clone());
            let slot = table.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                vec![None; runs.len()]
            });
            slot[k] = Some(r.clone());
        }
    }
    order
        .into_iter()
        .map(|key| {
            let v = table.remove(&key).unwrap_or_default();
            (key, v)
        })
        .collect()
}

pub fn comparison(dirs: &[PathBuf], runs: &[Vec<Row>], csv_out: bool) -> String {
    use std::fmt::Write as _;
    let merged = merge_runs(runs);
    let mut out = String::new();
    if csv_out {
        out.push_str("report,check");
        for k in 1..=runs.len() {
            let _ = write!(out, ",measured_{k},pass_{k}");
        }
        out.push_str(",identical\n");
    } else {
        for (k, d) in dirs.iter().enumerate() {
            let _ = writeln!(out, "run {}: {}", k + 1, d.display());
        }
        let _ = write!(out, "{:<36} {:<32}", "report", "check");
        for k in 1..=runs.len() {
            let _ = write!(out, " {:>13} {:>4}", format!("measured_{k}"), "");
        }
        out.push_str("  identical\n");
    }
    for ((report, check), cells) in &merged {
        let identical = cells.iter().all(|c| c.as_ref().map(|r| &r.measured) == cells[0].as_ref().map(|r| &r.measured));
        if csv_out {
            let _ = write!(out, "{},{}", report::csv_field(report), report::csv_field(check));
            for c in cells {
                match c {
                    Some(r) => {
                        let _ = write!(out, ",{},{}", r.measured, r.pass);
                    }
                    None => out.push_str(",,"),
                }
            }
            let _ = writeln!(out, ",{identical}");
        } else {
            let _ = write!(out, "{report:<36} {check:<32}");
            for c in cells {
                match c {
                    Some(r) => {
                        let _ = write!(out, " {:>13} {:>4}", r.measured, if r.pass { "PASS" } else { "FAIL" });
                    }
                    None => {
                        let _ = write!(out, " {:>13} {:>4}", "-", "");
                    }
                }
            }
            let _ = writeln!(out, "  {}", if identical { "yes" } else { "no" });
        }
    }
    out
}

pub fn report(dirs: &[PathBuf], csv_out: bool, out: Option<&Path>) -> CmdResult {
    if dirs.is_empty() {
        return Err(Failure::Usage("report needs at least one run directory".into()));
    }
    let runs = dirs.iter().map(|d| read_run(d)).collect::<Result<Vec<_>, _>>()?;
    let text = if runs.len() == 1 && !csv_out {
        single_summary(&dirs[0], &runs[0])
    } else {
        comparison(dirs, &runs, csv_out)
    };
    print!("{text}");
    if let Some(p) = out {
        write_text(p, &text)?;
    }
    Ok(runs.iter().flatten().all(|r| r.pass))
}

// ---------------------------------------------------------------------------
// gallery
// ---------------------------------------------------------------------------

fn claim_text(c: &Claim) -> String {
    match c {
        Claim::HopfProductConstant(v) => format!("Hopf product = {v}"),
        Claim::HopfProductAnalytic => "Hopf product analytic".into(),
        Claim::PseudoHopf => "h_z |h_zbar| = 1".into(),
        Claim::JacobianNonnegative => "J >= 0".into(),
        Claim::JacobianNonnegativeWithin(r) => format!("J >= 0 on |z| < {r:.4}"),
        Claim::Lipschitz(Some(l)) => format!("Lipschitz ({l})"),
        Claim::Lipschitz(None) => "Lipschitz".into(),
        Claim::NotLipschitz => "not Lipschitz".into(),
        Claim::NotC1 => "not C^1".into(),
        Claim::QuasiconformalNearOrigin => "quasiconformal near 0".into(),
        Claim::SolvesRational { a, b } => format!("h_zbar = {a}/h_z + {b}"),
        Claim::HolderHypothesisFails => "Hopf product not Hölder".into(),
        Claim::BoundaryOscillation => "|grad h| dist bounded, not vanishing".into(),
        Claim::JacobianChangesSign => "J changes sign".into(),
    }
}

pub fn gallery_list() -> CmdResult {
    for e in gallery::list() {
        println!("{:<12} {}", e.name, e.description);
        let claims: Vec<String> = e.claims.iter().map(claim_text).collect();
        println!("{:<12} claims: {}", "", claims.join("; "));
    }
    Ok(true)
}

pub fn gallery_dump(name: &str, n: usize, seed: u64, out: &Path) -> CmdResult {
    let e = gallery::by_name(name)
        .ok_or_else(|| Failure::Usage(format!("unknown gallery entry `{name}` (known: {})", gallery::NAMES.join(", "))))?;
    let grid = e.default_grid(n).map_err(|e| Failure::Usage(e.to_string()))?;
    let h = e.sample(grid)?;
    let claims = analysis::check_entry_claims(&e, seed)?;
    ensure_dir(out)?;
    let stem = e.name;
    write_field(&out.join(format!("{stem}.cf64")), &h)?;
    write_text(&out.join(format!("{stem}_claims.csv")), &reports_csv(std::slice::from_ref(&claims)))?;
    println!("wrote {stem}.cf64 (n = {n}, A = {}) and {stem}_claims.csv to {}", grid.half_width(), out.display());
    Ok(print_reports(&[claims]))
}
