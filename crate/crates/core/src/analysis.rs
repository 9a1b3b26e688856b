//! Difference maps `g^lambda = lambda z + f^lambda - h`, distortion and
//! degree checks, injectivity on a third of the disk, and the gradient
//! certificates for general structures and for Hopf–Laplace equations.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{self, ComplexField, FieldPair, Scheme};
use crate::gallery::{self, Claim, GalleryEntry};
use crate::grid::{GridSpec, Region};
use crate::report::VerificationReport;
use crate::solver::{self, GoodSolution, GoodSolutionFamily};
use crate::structure::{self, OperatorConstants, StructureSpec};

type C64 = Complex64;

// ---------------------------------------------------------------------------
// Difference maps and distortion
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct DifferenceMap {
    pub lambda: C64,
    /// `g = lambda z + f - h` on the unit disk.
    pub g: ComplexField,
    /// `G = g / lambda`.
    pub big_g: ComplexField,
    pub pair_g: FieldPair,
    /// `N = sup |h_zbar|` on the disk.
    pub n_sup: f64,
    /// `4N + 4 lambda_0 + R`.
    pub threshold: f64,
    /// Whether `|lambda| >= threshold`; checks on a non-binding map are
    /// informational only.
    pub binding: bool,
    /// Fraction of samples with `|h_z| <= R`.
    pub case1_fraction: f64,
}

/// `g^lambda` from a solution `h` (with its derivatives) and a good solution
/// on the same grid. Samples outside the unit disk or excluded in `h` are
/// excluded.
pub fn difference_map(h: &ComplexField, h_pair: &FieldPair, good: &GoodSolution, r: f64) -> Result<DifferenceMap> {
    let grid = *good.f.grid();
    field::check_same_grid(&grid, h.grid())?;
    field::check_same_grid(&grid, h_pair.grid())?;
    let disk = Region::unit_disk();
    let lambda = good.lambda;
    let n = grid.len();
    let mut mask = vec![false; n];
    let mut g = vec![C64::new(0.0, 0.0); n];
    let mut gz = vec![C64::new(0.0, 0.0); n];
    let mut gzb = vec![C64::new(0.0, 0.0); n];
    let mut n_sup = 0.0f64;
    let mut case1 = 0usize;
    let mut used = 0usize;
    for i in 0..n {
        let z = grid.point_at(i);
        if !disk.contains(z) || h.is_excluded(i) || h_pair.is_excluded(i) {
            mask[i] = true;
            continue;
        }
        let hz = h_pair.d_z.values()[i];
        let hzb = h_pair.d_zbar.values()[i];
        n_sup = n_sup.max(hzb.norm());
        used += 1;
        if hz.norm() <= r {
            case1 += 1;
        }
        g[i] = lambda * z + good.f.values()[i] - h.values()[i];
        gz[i] = lambda + good.f_z.values()[i] - hz;
        gzb[i] = good.omega.values()[i] - hzb;
    }
    if used == 0 {
        return Err(Error::EmptyRegion);
    }
    let threshold = 4.0 * n_sup + 4.0 * good.lambda0 + r;
    let binding = lambda.norm() >= threshold;
    if !binding {
        log::warn!(
            "|lambda| = {:.6e} is below 4N + 4 lambda_0 + R = {threshold:.6e}; distortion checks are not binding",
            lambda.norm()
        );
    }
    let g = ComplexField::from_parts(grid, g, Some(mask.clone()))?;
    let big_g = g.map(|_, v| v / lambda);
    let pair_g = FieldPair::new(
        ComplexField::from_parts(grid, gz, Some(mask.clone()))?,
        ComplexField::from_parts(grid, gzb, Some(mask))?,
    )?;
    Ok(DifferenceMap {
        lambda,
        g,
        big_g,
        pair_g,
        n_sup,
        threshold,
        binding,
        case1_fraction: case1 as f64 / used as f64,
    })
}

pub const DEFAULT_DISTORTION: f64 = 0.5;

/// `sup |g_zbar| / |g_z|` over unmasked samples (`0/0` counts as 0), passing
/// at `<= k + 0.05`; also checks `J_g >= -1e-6 max J_g` on passing maps.
pub fn distortion_check(dm: &DifferenceMap, k: f64) -> VerificationReport {
    let mut rep = VerificationReport::new(format!("distortion[lambda={:.6}{:+.6}i]", dm.lambda.re, dm.lambda.im));
    let mut worst = 0.0f64;
    let mut worst_at = C64::new(0.0, 0.0);
    let grid = dm.g.grid();
    for (i, v) in dm.pair_g.d_zbar.active() {
        let a = dm.pair_g.d_z.values()[i].norm();
        let b = v.norm();
        let ratio = if b == 0.0 { 0.0 } else if a == 0.0 { f64::INFINITY } else { b / a };
        if ratio > worst {
            worst = ratio;
            worst_at = grid.point_at(i);
        }
    }
    let binding = if dm.binding { "binding" } else { "NOT binding: lambda below 4N + 4 lambda_0 + R" };
    rep.check_le("distortion_ratio", worst, k + 0.05, format!("sup |g_zbar|/|g_z| at z = {worst_at:.4}, {binding}"));
    if worst <= k + 0.05 {
        let jac = field::jacobian(&dm.pair_g);
        let max = jac.max_abs();
        let min = jac.values().iter().enumerate().filter(|(i, _)| !jac.is_excluded(*i)).map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
        rep.check_ge("jacobian_nonnegative", min, -1e-6 * max, "min J_g against -1e-6 max |J_g|");
    }
    rep.note(format!(
        "case |h_z| <= R on {:.3}% of samples, |h_z| > R on the rest",
        100.0 * dm.case1_fraction
    ));
    rep
}

/// `3 ||h||_inf + 4 ||h_zbar||_inf + 5 lambda_0`.
pub fn sigma_from_norms(h_sup: f64, hzbar_sup: f64, lambda0: f64) -> f64 {
    3.0 * h_sup + 4.0 * hzbar_sup + 5.0 * lambda0
}

/// `sigma` with the sup norms taken over unmasked samples of the unit disk.
pub fn sigma(h: &ComplexField, h_zbar: &ComplexField, lambda0: f64) -> Result<f64> {
    let d = Region::unit_disk();
    Ok(sigma_from_norms(
        field::lp_norm(h, f64::INFINITY, &d)?,
        field::lp_norm(h_zbar, f64::INFINITY, &d)?,
        lambda0,
    ))
}

// ---------------------------------------------------------------------------
// Winding numbers
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindingResult {
    pub degree: i64,
    pub min_modulus: f64,
    pub max_step: f64,
    pub certified: bool,
}

pub const DEFAULT_WINDING_SAMPLES: usize = 4096;
pub const MIN_WINDING_SAMPLES: usize = 256;

/// Winding number about `v` of the closed polygon through `samples`.
pub fn winding_of_samples(samples: &[C64], v: C64) -> Result<WindingResult> {
    if samples.len() < 3 {
        return Err(Error::invalid("a closed curve needs at least 3 samples"));
    }
    let m = samples.len();
    let mut total = 0.0;
    let mut min_modulus = f64::INFINITY;
    let mut max_step = 0.0f64;
    for j in 0..m {
        let a = samples[j] - v;
        let b = samples[(j + 1) % m] - v;
        if a.norm() == 0.0 {
            return Err(Error::invalid(format!("v = {v} lies on the curve (sample {j})")));
        }
        min_modulus = min_modulus.min(a.norm());
        max_step = max_step.max((b - a).norm());
        total += (b / a).arg();
    }
    let degree = (total / (2.0 * PI)).round() as i64;
    Ok(WindingResult {
        degree,
        min_modulus,
        max_step,
        certified: min_modulus >= 10.0 * max_step,
    })
}

/// Winding number of `theta -> curve(rho e^{i theta})` about `v`.
pub fn winding_number<F: Fn(C64) -> C64>(curve: F, rho: f64, v: C64, m_samples: usize) -> Result<WindingResult> {
    if m_samples < MIN_WINDING_SAMPLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_WINDING_SAMPLES} samples, got {m_samples}"
        )));
    }
    let samples: Vec<C64> = (0..m_samples)
        .map(|j| curve(C64::from_polar(rho, 2.0 * PI * j as f64 / m_samples as f64)))
        .collect();
    winding_of_samples(&samples, v)
}

/// Degree of `F(lambda) - a` on the family circle with
/// `F(lambda) = lambda (z1 - z2) + f^lambda(z1) - f^lambda(z2)`, using the
/// family members (in angular order) as samples. `z1`, `z2` are grid points.
pub fn family_winding(family: &GoodSolutionFamily, z1: C64, z2: C64, a: C64) -> Result<WindingResult> {
    if family.solutions.len() < MIN_WINDING_SAMPLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_WINDING_SAMPLES} family members, got {}",
            family.solutions.len()
        )));
    }
    let samples = family
        .solutions
        .iter()
        .map(|s| {
            let f1 = s.f.value_near(z1).ok_or(Error::EmptyRegion)?;
            let f2 = s.f.value_near(z2).ok_or(Error::EmptyRegion)?;
            Ok(s.lambda * (z1 - z2) + f1 - f2)
        })
        .collect::<Result<Vec<_>>>()?;
    winding_of_samples(&samples, a)
}

// ---------------------------------------------------------------------------
// Injectivity and the final-step inequality
// ---------------------------------------------------------------------------

/// Random pairs of distinct unmasked grid points of `h` in `region`.
fn random_pairs(h: &ComplexField, region: &Region, count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let pts: Vec<usize> = h.in_region(region).map(|(i, _, _)| i).collect();
    if pts.len() < 2 {
        return Err(Error::EmptyRegion);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| loop {
            let a = pts[rng.gen_range(0..pts.len())];
            let b = pts[rng.gen_range(0..pts.len())];
            if a != b {
                break (a, b);
            }
        })
        .collect())
}

/// For each family member `lambda` and random pairs `z1 != z2` in `D/3`,
/// counts collisions `g(z1) = g(z2)` and requires
/// `|g(z1) - g(z2)| >= (|lambda| - lambda_0 - 1.1 L_h) |z1 - z2|`, where
/// `lambda_0` bounds `Lip(f^lambda)` and `L_h` is the measured Lipschitz
/// constant of `h` on `D/3`.
pub fn injectivity_check(family: &GoodSolutionFamily, h: &ComplexField, pairs: usize, seed: u64) -> Result<VerificationReport> {
    let grid = *family.grid();
    field::check_same_grid(&grid, h.grid())?;
    let third = Region::disk(1.0 / 3.0);
    let idx = random_pairs(h, &third, pairs, seed)?;
    let lip_h = field::lipschitz_estimate(h, &third, 2.0 * grid.spacing())?;
    let slope = |lambda: C64| lambda.norm() - family.lambda0 - 1.1 * lip_h;
    let mut rep = VerificationReport::new(format!("injectivity[rho={:.6}]", family.rho));
    let results: Vec<(usize, f64, f64)> = family
        .solutions
        .par_iter()
        .map(|s| {
            let mut collisions = 0usize;
            let mut worst = f64::INFINITY;
            let mut worst_slope = 0.0;
            for &(a, b) in &idx {
                let (za, zb) = (grid.point_at(a), grid.point_at(b));
                let ga = s.lambda * za + s.f.values()[a] - h.values()[a];
                let gb = s.lambda * zb + s.f.values()[b] - h.values()[b];
                let q = (ga - gb).norm() / (za - zb).norm();
                if q == 0.0 {
                    collisions += 1;
                }
                if q < worst {
                    worst = q;
                    worst_slope = slope(s.lambda);
                }
            }
            (collisions, worst, worst_slope)
        })
        .collect();
    let collisions: usize = results.iter().map(|r| r.0).sum();
    let (_, q, need) = results
        .iter()
        .copied()
        .min_by(|a, b| (a.1 - a.2).total_cmp(&(b.1 - b.2)))
        .unwrap_or((0, f64::INFINITY, 0.0));
    rep.check_le("collisions", collisions as f64, 0.0, format!("{} pairs x {} members", idx.len(), family.solutions.len()));
    rep.check_ge(
        "min_difference_quotient",
        q,
        need,
        format!("min |g(z1)-g(z2)|/|z1-z2| against |lambda| - lambda_0 - 1.1 Lip(h), Lip(h) = {lip_h:.4e}"),
    );
    Ok(rep)
}

/// Checks the final-step chain on `D/3` at `rho = sigma`: for each sampled
/// pair, `|h(z1) - h(z2)| <= max_lambda |lambda (z1 - z2) + f(z1) - f(z2)|`
/// and the measured Lipschitz constant of `h` is at most `sigma + lambda_0`
/// (+10%).
pub fn final_step_check(family: &GoodSolutionFamily, h: &ComplexField, pairs: usize, seed: u64) -> Result<VerificationReport> {
    let grid = *family.grid();
    field::check_same_grid(&grid, h.grid())?;
    let third = Region::disk(1.0 / 3.0);
    let idx = random_pairs(h, &third, pairs, seed)?;
    let mut worst = 0.0f64;
    for &(a, b) in &idx {
        let dh = (h.values()[a] - h.values()[b]).norm();
        let dz = grid.point_at(a) - grid.point_at(b);
        let best = family
            .solutions
            .iter()
            .map(|s| (s.lambda * dz + s.f.values()[a] - s.f.values()[b]).norm())
            .fold(0.0, f64::max);
        worst = worst.max(dh / best);
    }
    let mut rep = VerificationReport::new(format!("final_step[rho={:.6}]", family.rho));
    rep.check_le("inequality_on_circle", worst, 1.0, "max over pairs of |dh| / max_lambda |F(lambda)|");
    let lip = field::lipschitz_estimate(h, &third, 2.0 * grid.spacing())?;
    rep.check_le("lipschitz_h", lip, 1.1 * (family.rho + family.lambda0), "Lip(h) on D/3 against sigma + lambda_0");
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Gradient certificates
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzCertificate {
    pub point: C64,
    /// `min{dist(z, boundary), 1}` for the general bound, `dist(z, boundary)`
    /// for the Hopf–Laplace bound.
    pub r: f64,
    /// `|h_z| + |h_zbar|` from central differences.
    pub measured_grad: f64,
    pub osc: f64,
    pub hzbar_sup: f64,
    pub bound: f64,
    /// The same inequality after rescaling to `B(z, r)`: oscillation and
    /// `sup |h_zbar|` over that disk only.
    pub local_bound: f64,
    pub pass: bool,
}

/// Certificates are assembled from a central4 gradient on the sample grid.
struct GradientData {
    pair: FieldPair,
    osc: f64,
    hzbar_sup: f64,
}

fn gradient_data(h: &ComplexField, region: &Region) -> Result<GradientData> {
    let pair = field::wirtinger(h, Scheme::Central4)?;
    let osc = field::oscillation(h, region)?;
    let hzbar_sup = field::lp_norm(&pair.d_zbar, f64::INFINITY, region)?;
    Ok(GradientData { pair, osc, hzbar_sup })
}

fn gradient_at(data: &GradientData, grid: &GridSpec, z: C64) -> Result<(usize, f64)> {
    let (j, k) = grid.nearest(z).ok_or_else(|| Error::invalid(format!("point {z} is outside the grid")))?;
    let i = grid.index(j, k);
    if data.pair.is_excluded(i) {
        return Err(Error::invalid(format!("the derivative stencil at {z} touches a masked sample")));
    }
    Ok((i, data.pair.d_z.values()[i].norm() + data.pair.d_zbar.values()[i].norm()))
}

/// Oscillation of `h` and `sup |h_zbar|` over samples of `B(z, r)`.
fn local_terms(h: &ComplexField, data: &GradientData, z: C64, r: f64) -> (f64, f64) {
    let ball = Region::disk_at(z, r);
    let center = h.value_near(z).unwrap_or_default();
    let mut osc = 0.0f64;
    let mut hzb = 0.0f64;
    for (i, _, v) in h.in_region(&ball) {
        osc = osc.max((v - center).norm());
        if !data.pair.is_excluded(i) {
            hzb = hzb.max(data.pair.d_zbar.values()[i].norm());
        }
    }
    (osc, hzb)
}

fn check_points(grid: &GridSpec, region: &Region, points: &[C64]) -> Result<()> {
    let margin = 4.0 * grid.spacing();
    for &z in points {
        if !region.contains_with_margin(z, margin) {
            return Err(Error::invalid(format!(
                "point {z} is closer than 4 delta = {margin:.3e} to the boundary"
            )));
        }
    }
    Ok(())
}

/// Number of structure samples behind the hypothesis gate.
pub const GATE_SAMPLES: usize = 2000;
pub const GATE_SEED: u64 = 0x6a7e;

/// `|grad h(z)| <= (3/r) osc h + 4 ||h_zbar||_inf + 6 lambda_0` with
/// `r = min{dist(z, boundary), 1}`. Refuses structures whose declared
/// constants fail sampling (e.g. a merely continuous `H`).
pub fn gradient_bound_check(
    h: &ComplexField,
    region: &Region,
    spec: &StructureSpec,
    consts: &OperatorConstants,
    points: &[C64],
) -> Result<Vec<LipschitzCertificate>> {
    let gate = structure::verify_structure(spec, GATE_SAMPLES, GATE_SEED)?;
    if !gate.passed() {
        let names: Vec<String> = gate.failures().map(|c| format!("{} ({:.3e})", c.name, c.measured)).collect();
        return Err(Error::HypothesisViolated(format!(
            "structure {} fails its declared constants: {}",
            spec.name(),
            names.join(", ")
        )));
    }
    let l0 = structure::lambda_zero(spec, consts);
    if !l0.is_finite() {
        return Err(Error::HypothesisViolated(format!("lambda_0 is infinite for {}", spec.name())));
    }
    let grid = *h.grid();
    check_points(&grid, region, points)?;
    let data = gradient_data(h, region)?;
    points
        .iter()
        .map(|&z| {
            let (_, grad) = gradient_at(&data, &grid, z)?;
            let r = region.boundary_distance(z).min(1.0);
            let bound = 3.0 / r * data.osc + 4.0 * data.hzbar_sup + 6.0 * l0;
            let (lo, lz) = local_terms(h, &data, z, r);
            let local_bound = 3.0 / r * lo + 4.0 * lz + 6.0 * l0;
            Ok(LipschitzCertificate {
                point: z,
                r,
                measured_grad: grad,
                osc: data.osc,
                hzbar_sup: data.hzbar_sup,
                bound,
                local_bound,
                pass: grad <= bound,
            })
        })
        .collect()
}

/// Relative `L^2` gate on the Hopf product residual.
pub const HOPF_RESIDUAL_GATE: f64 = 1e-3;
/// The residual is taken `GATE_CELLS` spacings inside the region, where
/// central differences resolve gradients that blow up at the boundary.
pub const GATE_CELLS: f64 = 16.0;

/// `|grad h(z)| <= 13 osc h / dist(z, boundary) + 2 ||h_zbar||_inf + 3 ||phi||_inf^{1/2}`
/// for solutions of `h_z conj(h_zbar) = phi` with analytic `phi`.
pub fn model_bound_check(h: &ComplexField, phi: &ComplexField, region: &Region, points: &[C64]) -> Result<Vec<LipschitzCertificate>> {
    let grid = *h.grid();
    field::check_same_grid(&grid, phi.grid())?;
    let defect = solver::analytic_defect(phi, region)?;
    if defect > solver::ANALYTICITY_GATE {
        return Err(Error::HypothesisViolated(format!(
            "phi is not analytic: relative |phi_zbar| = {defect:.3e}"
        )));
    }
    check_points(&grid, region, points)?;
    let data = gradient_data(h, region)?;
    let margin = GATE_CELLS * grid.spacing();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, z, p) in phi.in_region(region) {
        if data.pair.is_excluded(i) || !region.contains_with_margin(z, margin) {
            continue;
        }
        let prod = data.pair.d_z.values()[i] * data.pair.d_zbar.values()[i].conj();
        num += (prod - p).norm_sqr();
        den += p.norm_sqr();
    }
    let res = if num == 0.0 { 0.0 } else { (num / den).sqrt() };
    if !(res < HOPF_RESIDUAL_GATE) {
        return Err(Error::HypothesisViolated(format!(
            "h_z conj(h_zbar) differs from phi by {res:.3e} (relative L2)"
        )));
    }
    let phi_sup = field::lp_norm(phi, f64::INFINITY, region)?;
    points
        .iter()
        .map(|&z| {
            let (_, grad) = gradient_at(&data, &grid, z)?;
            let r = region.boundary_distance(z);
            let bound = 13.0 * data.osc / r + 2.0 * data.hzbar_sup + 3.0 * phi_sup.sqrt();
            let (lo, lz) = local_terms(h, &data, z, r);
            let local_bound = 13.0 * lo / r + 2.0 * lz + 3.0 * phi_sup.sqrt();
            Ok(LipschitzCertificate {
                point: z,
                r,
                measured_grad: grad,
                osc: data.osc,
                hzbar_sup: data.hzbar_sup,
                bound,
                local_bound,
                pass: grad <= bound,
            })
        })
        .collect()
}

pub fn certificates_report(title: &str, certs: &[LipschitzCertificate]) -> VerificationReport {
    let mut rep = VerificationReport::new(title);
    let worst = certs
        .iter()
        .map(|c| c.measured_grad / c.bound)
        .fold(0.0, f64::max);
    let failed = certs.iter().filter(|c| !c.pass).count();
    rep.check_le("worst_grad_over_bound", worst, 1.0, format!("{} points, {failed} failing", certs.len()));
    rep
}

/// Random points of `region` at least `margin` from its boundary and
/// accepted by `keep`.
pub fn interior_points<K: Fn(C64) -> bool>(region: &Region, margin: f64, count: usize, seed: u64, keep: K) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count && tries < 1000 * count.max(1) {
        tries += 1;
        let z = structure::random_point(&mut rng, region);
        if region.contains_with_margin(z, margin) && keep(z) {
            out.push(z);
        }
    }
    out
}

/// `|grad h| dist(z, boundary)` along `a + r e^{i dir}` for each `r` in
/// `radii`; `grad` returns `|h_z| + |h_zbar|`.
pub fn boundary_limsup<G: Fn(C64) -> f64>(grad: G, region: &Region, a: C64, dir: f64, radii: &[f64]) -> Result<Vec<f64>> {
    if radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("radii must decrease strictly"));
    }
    radii
        .iter()
        .map(|&r| {
            let z = a + C64::from_polar(r, dir);
            if !region.contains(z) {
                return Err(Error::invalid(format!("approach point {z} is outside the region")));
            }
            Ok(grad(z) * region.boundary_distance(z))
        })
        .collect()
}

/// Lipschitz constant of `h` on `r D` at the resolution of `n` samples per
/// axis, measured on the rescaled map `z -> h(r z) / r` on the unit disk.
pub fn lipschitz_at_scale(entry: &GalleryEntry, r: f64, n: usize) -> Result<f64> {
    let grid = GridSpec::new(1.25, n)?;
    let h = entry.h.clone();
    let domain = entry.domain;
    let f = field::sample(grid, move |z| h(r * z) / r, Some(&|z: C64| !domain.contains(r * z) || z.norm() >= 1.0 || z.norm() == 0.0))?;
    field::lipschitz_estimate(&f, &Region::unit_disk(), 2.0 * grid.spacing())
}

// ---------------------------------------------------------------------------
// Gallery claims
// ---------------------------------------------------------------------------

const CLAIM_POINTS: usize = 400;

/// Machine-check every claim attached to a gallery entry.
pub fn check_entry_claims(entry: &GalleryEntry, seed: u64) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new(format!("gallery[{}]", entry.name));
    let pts = interior_points(&entry.domain, 1e-3, CLAIM_POINTS, seed, |z| (entry.singular_distance)(z) > 1e-3);
    if pts.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let radii: Vec<f64> = (3..=12).map(|k| 2f64.powi(-k)).collect();
    for claim in &entry.claims {
        match claim {
            Claim::HopfProductConstant(c) => {
                let e = pts.iter().map(|&z| (entry.hopf_product(z) - c).norm()).fold(0.0, f64::max);
                rep.check_le("hopf_product_constant", e, 1e-10, format!("max |h_z conj(h_zbar) - ({c})|"));
            }
            Claim::HopfProductAnalytic => {
                let phi = entry.phi.as_ref().ok_or_else(|| Error::invalid("entry has no phi"))?;
                let e = pts
                    .iter()
                    .map(|&z| (entry.hopf_product(z) - phi(z)).norm() / phi(z).norm().max(1.0))
                    .fold(0.0, f64::max);
                rep.check_le("hopf_product_matches_phi", e, 1e-8, "closed forms, relative");
                let grid = entry.default_grid(256)?;
                let p = phi.clone();
                let dom = entry.domain;
                let sampled = field::sample(grid, move |z| p(z), Some(&|z: C64| !dom.contains(z) || z.norm() < 1e-12))?;
                let d = solver::analytic_defect(&sampled, &entry.domain)?;
                rep.check_le("phi_analytic", d, solver::ANALYTICITY_GATE, "relative |phi_zbar|, central4");
            }
            Claim::PseudoHopf => {
                let e = pts
                    .iter()
                    .map(|&z| {
                        let (a, b) = entry.derivatives(z);
                        (a.norm() * b.norm() - 1.0).abs()
                    })
                    .fold(0.0, f64::max);
                rep.check_le("hz_abs_hzbar_eq_1", e, 1e-8, "max |h_z| |h_zbar| - 1|");
                let mut ode = 0.0f64;
                for &z in &pts {
                    let (p, dp) = gallery::pseudo_hopf_psi(-2.0 * z.norm().ln())?;
                    ode = ode.max(((p - dp) * dp - 0.25).abs());
                }
                rep.check_le("ode_residual", ode, 1e-10, "(psi - psi') psi' - 1/4");
            }
            Claim::JacobianNonnegative => {
                let m = pts.iter().map(|&z| entry.jacobian(z)).fold(f64::INFINITY, f64::min);
                rep.check_ge("jacobian_nonnegative", m, -1e-10, "min J_h at random points");
            }
            Claim::JacobianNonnegativeWithin(r) => {
                let inner: Vec<C64> = pts.iter().copied().filter(|z| z.norm() < *r).collect();
                let m = inner.iter().map(|&z| entry.jacobian(z)).fold(f64::INFINITY, f64::min);
                rep.check_ge("jacobian_nonnegative", m, -1e-10, format!("min J_h on |z| < {r:.6} ({} points)", inner.len()));
            }
            Claim::JacobianChangesSign => {
                let neg = pts.iter().any(|&z| entry.jacobian(z) < 0.0);
                let pos = pts.iter().any(|&z| entry.jacobian(z) > 0.0);
                rep.check_bool("jacobian_changes_sign", neg && pos, "J_h takes both signs");
            }
            Claim::Lipschitz(Some(l)) => {
                let g = entry.default_grid(256)?;
                let est = field::lipschitz_estimate(&entry.sample(g)?, &entry.domain, 2.0 * g.spacing())?;
                if entry.name == "piecewise" {
                    rep.check_le("lipschitz_value", (est - l).abs(), 1e-6, format!("estimate {est:.12} against {l}"));
                } else {
                    rep.check_le("lipschitz_bound", est, l * (1.0 + 1e-6), format!("estimate against {l}"));
                }
            }
            Claim::Lipschitz(None) => {
                let g = entry.default_grid(128)?;
                let e1 = field::lipschitz_estimate(&entry.sample(g)?, &entry.domain, 2.0 * g.spacing())?;
                let g2 = g.refined().refined();
                let e2 = field::lipschitz_estimate(&entry.sample(g2)?, &entry.domain, 2.0 * g2.spacing())?;
                rep.check_le("lipschitz_stable", e2 / e1, 1.05, format!("estimates {e1:.6} (n=128), {e2:.6} (n=512)"));
            }
            Claim::NotLipschitz => {
                let grads: Vec<f64> = radii
                    .iter()
                    .map(|&r| {
                        let (a, b) = entry.derivatives(C64::new(r, 0.0));
                        a.norm() + b.norm()
                    })
                    .collect();
                let increasing = grads.windows(2).all(|w| w[1] > w[0]);
                rep.check_bool(
                    "gradient_grows_toward_0",
                    increasing,
                    format!("|grad h| at r = 2^-3..2^-12: {:.4} .. {:.4}", grads[0], grads[grads.len() - 1]),
                );
            }
            Claim::NotC1 => match entry.name {
                "cuberoot" => {
                    let a = gallery::cuberoot_witness(C64::new(1.3, 1e-9));
                    let b = gallery::cuberoot_witness(C64::new(1.3, -1e-9));
                    rep.check_ge("cut_jump", (a - b).norm(), 0.1, "jump of z^{1/3}(h_z + conj h_zbar) at z = 1.3");
                }
                _ => {
                    let a = entry.derivatives(C64::new(0.3, 1e-9)).0;
                    let b = entry.derivatives(C64::new(0.3, -1e-9)).0;
                    rep.check_ge("interface_jump", (a - b).norm(), 0.1, "jump of h_z across the real axis");
                }
            },
            Claim::QuasiconformalNearOrigin => {
                let ratios: Vec<f64> = radii
                    .iter()
                    .map(|&r| {
                        let (a, b) = entry.derivatives(C64::new(r, 0.0));
                        b.norm() / a.norm()
                    })
                    .collect();
                let decreasing = ratios.windows(2).all(|w| w[1] < w[0]) && ratios.iter().all(|&q| q < 1.0);
                rep.check_bool(
                    "distortion_decreases",
                    decreasing,
                    format!("|h_zbar|/|h_z| at r = 2^-3..2^-12: {:.4} .. {:.4}", ratios[0], ratios[ratios.len() - 1]),
                );
            }
            Claim::SolvesRational { a, b } => {
                let e = pts
                    .iter()
                    .map(|&z| {
                        let (hz, hzb) = entry.derivatives(z);
                        (hzb - (a / hz + b)).norm()
                    })
                    .fold(0.0, f64::max);
                rep.check_le("solves_equation", e, 1e-12, format!("max |h_zbar - ({a})/h_z - ({b})|"));
                let h3 = a / 3.0 + b;
                let h2 = a / 2.0 + b;
                rep.check_le("H(3)=0", h3.norm(), 1e-15, "");
                rep.check_le("H(2)=1", (h2 - 1.0).norm(), 1e-15, "");
            }
            Claim::HolderHypothesisFails => {
                let spec = entry.structure().ok_or_else(|| Error::invalid("entry has no structure"))??;
                let r = structure::verify_structure(&spec, GATE_SAMPLES, GATE_SEED)?;
                let holder = r.get("holder_le_M").map(|c| c.measured).unwrap_or(f64::NAN);
                rep.check_bool(
                    "structure_refused",
                    !r.passed(),
                    format!("Hölder quotient ratio {holder:.3e} at declared alpha = {}", spec.alpha()),
                );
                let phi = entry.phi.as_ref().ok_or_else(|| Error::invalid("entry has no phi"))?;
                let mags: Vec<f64> = (4..40).map(|k| phi(C64::new(2f64.powi(-k), 0.0)).norm()).collect();
                rep.check_bool(
                    "hopf_product_continuous_at_0",
                    mags.windows(2).all(|w| w[1] < w[0]),
                    format!("|phi(2^-k)| decreases: {:.4} .. {:.4}", mags[0], mags[mags.len() - 1]),
                );
            }
            Claim::BoundaryOscillation => {
                let r2: Vec<f64> = (2..=40).map(|k| (-0.5 * k as f64).exp()).collect();
                let vals = boundary_limsup(
                    |z| {
                        let (a, b) = entry.derivatives(z);
                        a.norm() + b.norm()
                    },
                    &entry.domain,
                    C64::new(0.0, 0.0),
                    0.0,
                    &r2,
                )?;
                let tail = &vals[vals.len() / 2..];
                let hi = tail.iter().copied().fold(0.0, f64::max);
                let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
                let osc_bound = 13.0 * 2.0 * (1.0 + (PI / 2.0).cosh());
                rep.check_le("bounded", hi, osc_bound, "|grad h| dist toward 0 against 13 osc");
                rep.check_ge("no_limit_zero", hi, 0.5, format!("tail oscillates in [{lo:.3}, {hi:.3}]"));
                rep.check_le("no_limit", lo, 0.5 * hi, "tail minimum well below tail maximum");
            }
        }
    }
    Ok(rep)
}
