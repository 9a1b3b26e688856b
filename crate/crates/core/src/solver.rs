//! Good solutions `f^lambda` by contraction on the integral equation
//! `omega = H(z, lambda + S omega)`, plus the closed-form model family for
//! Hopf–Laplace equations.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{self, ComplexField, Scheme};
use crate::grid::{GridSpec, Region};
use crate::report::VerificationReport;
use crate::structure::ExtendedStructure;
use crate::transforms::{Plan, MIN_HALF_WIDTH};

type C64 = Complex64;

pub const DEFAULT_MAX_ITER: usize = 60;
pub const DEFAULT_FAMILY_SIZE: usize = 64;
/// Relative tolerance behind the default fixed-point target
/// `1e-8 * M * |2D|^(1/p)`.
pub const DEFAULT_REL_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub grid: GridSpec,
    pub lambda: C64,
    pub lambda0: f64,
    pub tol: Option<f64>,
    pub max_iter: usize,
}

impl SolverConfig {
    pub fn new(grid: GridSpec, lambda: C64, lambda0: f64) -> Self {
        Self {
            grid,
            lambda,
            lambda0,
            tol: None,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = Some(tol);
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_lambda(mut self, lambda: C64) -> Self {
        self.lambda = lambda;
        self
    }

    /// Explicit tolerance, or `1e-8 * M * |2D|^(1/p)`; a vanishing `M` falls
    /// back to `M = 1`.
    pub fn effective_tol(&self, ext: &ExtendedStructure) -> f64 {
        self.tol.unwrap_or_else(|| default_tol(ext))
    }

    fn validate(&self, ext: &ExtendedStructure) -> Result<()> {
        if self.grid.half_width() < MIN_HALF_WIDTH {
            return Err(Error::InvalidGrid(format!(
                "the solver needs A >= {MIN_HALF_WIDTH}, got {}",
                self.grid.half_width()
            )));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid(format!("tol must be positive, got {t}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        if !(self.lambda0.is_finite()) {
            return Err(Error::HypothesisViolated(format!(
                "lambda_0 is not finite for structure {}",
                ext.base().name()
            )));
        }
        let modulus = self.lambda.norm();
        if !(modulus >= self.lambda0 * (1.0 - 1e-12)) {
            return Err(Error::HypothesisViolated(format!(
                "|lambda| = {modulus:.6e} is below lambda_0 = {:.6e}",
                self.lambda0
            )));
        }
        Ok(())
    }
}

fn default_tol(ext: &ExtendedStructure) -> f64 {
    let spec = ext.base();
    let m = if spec.m() > 0.0 { spec.m() } else { 1.0 };
    DEFAULT_REL_TOL * m * (4.0 * PI).powf(1.0 / spec.p())
}

/// One member `f^lambda` of the good-solution family.
#[derive(Clone, Debug)]
pub struct GoodSolution {
    pub lambda: C64,
    pub lambda0: f64,
    /// `f_zbar`, supported in `2D`.
    pub omega: ComplexField,
    /// `f = C omega`, vanishing at the origin.
    pub f: ComplexField,
    /// `f_z = S omega`.
    pub f_z: ComplexField,
    pub iterations: usize,
    pub residual: f64,
    pub tol: f64,
    pub p: f64,
    pub contraction_rates: Vec<f64>,
}

impl GoodSolution {
    pub fn max_rate(&self) -> f64 {
        self.contraction_rates.iter().copied().fold(0.0, f64::max)
    }

    /// Largest rate after the first step.
    pub fn max_rate_after_first(&self) -> f64 {
        self.contraction_rates.iter().skip(1).copied().fold(0.0, f64::max)
    }

    /// `lambda_re,lambda_im,iterations,residual,max_rate`
    pub fn csv_row(&self) -> String {
        use crate::report::fmt_f64;
        format!(
            "{},{},{},{},{}",
            fmt_f64(self.lambda.re),
            fmt_f64(self.lambda.im),
            self.iterations,
            fmt_f64(self.residual),
            fmt_f64(self.max_rate())
        )
    }
}

pub const SOLUTION_CSV_HEADER: &str = "lambda_re,lambda_im,iterations,residual,max_rate";

/// `T omega = H(z, lambda + S omega)` on the whole grid (zero beyond `2D`).
pub fn iterate_t(ext: &ExtendedStructure, lambda: C64, omega: &ComplexField) -> Result<ComplexField> {
    let plan = Plan::new(*omega.grid())?;
    Ok(apply_t(&plan, ext, lambda, omega)?.0)
}

/// Returns `(T omega, S omega)`.
fn apply_t(plan: &Plan, ext: &ExtendedStructure, lambda: C64, omega: &ComplexField) -> Result<(ComplexField, ComplexField)> {
    let s = plan.beurling(omega)?;
    let grid = *omega.grid();
    let r = ext.base().r();
    let half = 0.5 * lambda.norm();
    let mut worst_s: Option<(C64, f64)> = None;
    let mut worst_arg: Option<(C64, f64)> = None;
    for (i, v) in s.values().iter().enumerate() {
        let z = grid.point_at(i);
        if z.norm() >= 2.0 {
            continue;
        }
        let m = v.norm();
        if m > half && worst_s.map_or(true, |(_, w)| m > w) {
            worst_s = Some((z, m));
        }
        let a = (lambda + v).norm();
        if a <= r && worst_arg.map_or(true, |(_, w)| a < w) {
            worst_arg = Some((z, a));
        }
    }
    if let Some((z, modulus)) = worst_arg {
        return Err(Error::ArgumentDomain { z, modulus, radius: r });
    }
    if let Some((z, m)) = worst_s {
        return Err(Error::HypothesisViolated(format!(
            "|S omega| = {m:.6e} exceeds |lambda|/2 = {half:.6e} at z = {z}"
        )));
    }
    let values: Vec<C64> = s
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, v)| ext.eval(grid.point_at(i), lambda + v))
        .collect();
    let t = ComplexField::from_parts(grid, values, None)?.into_supported()?;
    Ok((t, s))
}

fn lp_diff(a: &ComplexField, b: &ComplexField, p: f64) -> f64 {
    let d: Vec<C64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    field::lp_norm_all(&d, p, a.grid().cell_area())
}

/// Banach iteration from `omega_0 = 0`.
pub fn solve_good(ext: &ExtendedStructure, config: &SolverConfig) -> Result<GoodSolution> {
    config.validate(ext)?;
    let plan = Plan::new(config.grid)?;
    solve_with_plan(&plan, ext, config, ComplexField::zeros(config.grid))
}

/// Banach iteration from a caller-supplied start in the ball.
pub fn solve_good_from(ext: &ExtendedStructure, config: &SolverConfig, omega0: ComplexField) -> Result<GoodSolution> {
    config.validate(ext)?;
    field::check_same_grid(&config.grid, omega0.grid())?;
    if !omega0.is_supported_in_2d() {
        return Err(Error::Support("the initial iterate must be supported in 2D".into()));
    }
    let plan = Plan::new(config.grid)?;
    solve_with_plan(&plan, ext, config, omega0)
}

fn solve_with_plan(plan: &Plan, ext: &ExtendedStructure, config: &SolverConfig, omega0: ComplexField) -> Result<GoodSolution> {
    let p = ext.base().p();
    let tol = config.effective_tol(ext);
    let lambda = config.lambda;
    let mut omega = omega0;
    let mut rates = Vec::new();
    let mut prev_step: Option<f64> = None;
    let mut residual = f64::INFINITY;
    for it in 1..=config.max_iter {
        let (t, s) = apply_t(plan, ext, lambda, &omega)?;
        residual = lp_diff(&t, &omega, p);
        if let Some(prev) = prev_step {
            if prev > 0.0 {
                rates.push(residual / prev);
            }
        }
        log::debug!("lambda = {lambda}: iteration {it}, residual {residual:.3e}");
        if residual <= tol {
            let f = plan.cauchy(&omega)?;
            return Ok(GoodSolution {
                lambda,
                lambda0: config.lambda0,
                omega,
                f,
                f_z: s,
                iterations: it,
                residual,
                tol,
                p,
                contraction_rates: rates,
            });
        }
        prev_step = Some(residual);
        omega = t;
    }
    Err(Error::NoConvergence {
        iterations: config.max_iter,
        residual,
        tol,
        rates,
    })
}

/// A posteriori checks of the good-solution bounds: fixed-point residual,
/// Besov ball membership, `f(0) = 0`, gradient and Lipschitz bounds by
/// `lambda_0`, `|f_zbar| <= lambda_0/2`, `|lambda + f_z| >= |lambda|/2`, and
/// `|f| < lambda_0` on the unit disk.
pub fn check_good_solution(ext: &ExtendedStructure, sol: &GoodSolution) -> Result<VerificationReport> {
    let spec = ext.base();
    let l0 = sol.lambda0;
    let disk = Region::unit_disk();
    let mut rep = VerificationReport::new(format!("good_solution[lambda={:.6}{:+.6}i]", sol.lambda.re, sol.lambda.im));
    rep.check_le("residual_le_tol", sol.residual, sol.tol, "||omega - T omega||_p");
    let besov = field::besov_norm(&sol.omega, spec.alpha(), sol.p)?;
    rep.check_le("besov_ball", besov, 60.0 * spec.m() * 1.1 + 1e-300, "||omega||_{alpha,p} <= 60 M (+10%)");
    let f0 = sol.f.values()[sol.f.grid().origin_index()].norm();
    rep.check_le("f_at_origin", f0, 1e-10 * sol.f.max_abs().max(f64::MIN_POSITIVE), "|f(0)| / max|f|");
    let mut grad = 0.0f64;
    let mut fz = 0.0f64;
    let mut fzb = 0.0f64;
    let mut lower = f64::INFINITY;
    let mut fmax = 0.0f64;
    for (i, z, w) in sol.omega.in_region(&disk) {
        let _ = z;
        let s = sol.f_z.values()[i];
        grad = grad.max(s.norm() + w.norm());
        fz = fz.max(s.norm());
        fzb = fzb.max(w.norm());
        lower = lower.min((sol.lambda + s).norm());
        fmax = fmax.max(sol.f.values()[i].norm());
    }
    rep.check_le("gradient_le_lambda0", grad, 1.1 * l0, "sup_D |f_z| + |f_zbar|");
    rep.check_le("fz_le_half_lambda0", fz, 0.55 * l0, "sup_D |f_z|");
    rep.check_le("fzbar_le_half_lambda0", fzb, 0.55 * l0, "sup_D |f_zbar|");
    rep.check_ge("lambda_plus_fz_ge_half", lower, 0.45 * sol.lambda.norm(), "inf_D |lambda + f_z|");
    let lip = field::lipschitz_estimate(&sol.f, &disk, 2.0 * sol.f.grid().spacing())?;
    rep.check_le("lipschitz_le_lambda0", lip, 1.1 * l0, "difference quotients of f on D");
    rep.check_le("f_below_lambda0", fmax, l0, "sup_D |f|");
    Ok(rep)
}

/// Good solutions at `lambda_j = rho e^{2 pi i j / m}`.
#[derive(Clone, Debug)]
pub struct GoodSolutionFamily {
    pub rho: f64,
    pub lambda0: f64,
    pub solutions: Vec<GoodSolution>,
}

impl GoodSolutionFamily {
    pub fn grid(&self) -> &GridSpec {
        self.solutions[0].f.grid()
    }

    /// Adjacent-pair check of `|f^l1 - f^l2| <= lambda_0 |l1 - l2| / |l1 l2|`
    /// on the unit disk with 20% slack, plus the contraction rates.
    pub fn continuity_report(&self) -> VerificationReport {
        let mut rep = VerificationReport::new(format!("family[rho={:.6}]", self.rho));
        let m = self.solutions.len();
        let disk = Region::unit_disk();
        let mut worst = 0.0f64;
        let mut worst_pair = (0, 0);
        for a in 0..m {
            let b = (a + 1) % m;
            let (sa, sb) = (&self.solutions[a], &self.solutions[b]);
            let bound = self.lambda0 * (sa.lambda - sb.lambda).norm() / (sa.lambda * sb.lambda).norm();
            let diff = sa
                .f
                .in_region(&disk)
                .map(|(i, _, v)| (v - sb.f.values()[i]).norm())
                .fold(0.0, f64::max);
            let r = if bound > 0.0 { diff / bound } else if diff > 0.0 { f64::INFINITY } else { 0.0 };
            if r > worst {
                worst = r;
                worst_pair = (a, b);
            }
        }
        rep.check_le(
            "lambda_continuity",
            worst,
            1.2,
            format!("worst sup_D |f^l1 - f^l2| / (lambda_0 |l1-l2|/|l1 l2|), pair {worst_pair:?}"),
        );
        let rate = self
            .solutions
            .iter()
            .map(GoodSolution::max_rate_after_first)
            .fold(0.0, f64::max);
        rep.check_le("contraction_rate", rate, 0.55, "max per-step ratio after step 1");
        rep
    }

    pub fn csv(&self) -> String {
        let mut out = format!("{SOLUTION_CSV_HEADER}\n");
        for s in &self.solutions {
            out.push_str(&s.csv_row());
            out.push('\n');
        }
        out
    }
}

/// `m` members on the circle `|lambda| = rho`, solved in parallel.
pub fn solve_family(ext: &ExtendedStructure, base: &SolverConfig, rho: f64, m: usize) -> Result<GoodSolutionFamily> {
    if m < 8 {
        return Err(Error::invalid(format!("a family needs m >= 8 members, got {m}")));
    }
    if !(rho >= base.lambda0 * (1.0 - 1e-12)) {
        return Err(Error::HypothesisViolated(format!(
            "rho = {rho:.6e} is below lambda_0 = {:.6e}",
            base.lambda0
        )));
    }
    let lambdas: Vec<C64> = (0..m)
        .map(|j| C64::from_polar(rho, 2.0 * PI * j as f64 / m as f64))
        .collect();
    solve_at(ext, base, rho, &lambdas)
}

/// Members at arbitrary parameters of modulus `rho`.
pub fn solve_at(ext: &ExtendedStructure, base: &SolverConfig, rho: f64, lambdas: &[C64]) -> Result<GoodSolutionFamily> {
    let plan = Plan::new(base.grid)?;
    let solutions: Vec<Result<GoodSolution>> = lambdas
        .par_iter()
        .map(|&lambda| {
            let cfg = base.clone().with_lambda(lambda);
            cfg.validate(ext)?;
            solve_with_plan(&plan, ext, &cfg, ComplexField::zeros(base.grid)).map_err(|e| Error::FamilyMember {
                lambda,
                source: Box::new(e),
            })
        })
        .collect();
    let solutions = solutions.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(GoodSolutionFamily {
        rho,
        lambda0: base.lambda0,
        solutions,
    })
}

// ---------------------------------------------------------------------------
// Model case
// ---------------------------------------------------------------------------

/// Relative analyticity gate `||phi_zbar||_2 / ||phi_z||_2`, evaluated with
/// central differences at interior samples of `region`.
pub const ANALYTICITY_GATE: f64 = 1e-3;

/// `||F_zbar||_2 / ||F_z||_2` over samples of `region` at least four grid
/// spacings from its boundary (`0` when both vanish).
pub fn analytic_defect(field: &ComplexField, region: &Region) -> Result<f64> {
    let pair = field::wirtinger(field, Scheme::Central4)?;
    let margin = 4.0 * field.grid().spacing();
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, z, v) in pair.d_zbar.in_region(region) {
        if pair.is_excluded(i) || !region.contains_with_margin(z, margin) {
            continue;
        }
        num += v.norm_sqr();
        den += pair.d_z.values()[i].norm_sqr();
    }
    Ok(if num == 0.0 { 0.0 } else { (num / den).sqrt() })
}

/// `F^lambda = lambda z + conj(Phi / lambda)` for an analytic `Phi` with
/// `Phi(0) = 0`.
pub fn model_good_solution(phi_anti: &ComplexField, lambda: C64, region: &Region) -> Result<ComplexField> {
    if lambda.norm() == 0.0 {
        return Err(Error::invalid("lambda must be nonzero"));
    }
    let grid = *phi_anti.grid();
    let o = grid.origin_index();
    if region.contains(C64::new(0.0, 0.0)) && !phi_anti.is_excluded(o) {
        let v = phi_anti.values()[o];
        if v.norm() > 1e-10 * phi_anti.max_abs().max(1.0) {
            return Err(Error::invalid(format!("Phi(0) must vanish, got {v}")));
        }
    }
    let d = analytic_defect(phi_anti, region)?;
    if d > ANALYTICITY_GATE {
        return Err(Error::HypothesisViolated(format!(
            "Phi is not analytic: relative |Phi_zbar| = {d:.3e}"
        )));
    }
    Ok(phi_anti.map(|z, v| lambda * z + (v / lambda).conj()))
}

/// Closed-form derivatives of the model map: `(F_z, F_zbar) = (lambda, conj(phi/lambda))`.
pub fn model_derivatives(phi: C64, lambda: C64) -> (C64, C64) {
    (lambda, (phi / lambda).conj())
}

pub const SIMPSON_NODES: usize = 64;
/// Panels of the logarithmic rule used when `phi` is singular at the origin.
pub const LOG_SIMPSON_NODES: usize = 4096;
const LOG_SPAN: f64 = 40.0;

/// `Phi(z) = int_0^1 phi(t z) z dt` by composite Simpson on `t`, or on
/// `t = e^{-s}` when `phi(0)` is undefined (the half-disk case, where the
/// integrand oscillates like `cos log t`). Samples outside `region` are
/// excluded.
pub fn antiderivative<F>(phi: F, grid: GridSpec, region: &Region) -> Result<ComplexField>
where
    F: Fn(C64) -> C64 + Sync,
{
    let sampled = field::sample(grid, &phi, Some(&|z: C64| !region.contains(z)))?;
    let d = analytic_defect(&sampled, region)?;
    if d > ANALYTICITY_GATE {
        return Err(Error::HypothesisViolated(format!(
            "phi is not analytic: relative |phi_zbar| = {d:.3e}"
        )));
    }
    let p0 = phi(C64::new(0.0, 0.0));
    let regular = p0.re.is_finite() && p0.im.is_finite();
    let out = field::sample(
        grid,
        |z| {
            if regular {
                simpson(|t| phi(z * t) * z, 0.0, 1.0, SIMPSON_NODES)
            } else {
                simpson(|s| {
                    let t = (-s).exp();
                    phi(z * t) * z * t
                }, 0.0, LOG_SPAN, LOG_SIMPSON_NODES)
            }
        },
        Some(&|z: C64| !region.contains(z)),
    )?;
    Ok(out)
}

fn simpson<G: Fn(f64) -> C64>(g: G, a: f64, b: f64, panels: usize) -> C64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = g(a) + g(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(a + i as f64 * h);
    }
    acc * (h / 3.0)
}
