//! Structural data `(H, L, M, alpha, R)` of an equation `h_zbar = H(z, h_z)`,
//! its extension to the plane, operator constants and the structural
//! parameter `lambda_0`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{self, ComplexField};
use crate::grid::{GridSpec, Region};
use crate::report::VerificationReport;
use crate::transforms;

type C64 = Complex64;

pub type StructureFn = Arc<dyn Fn(C64, C64) -> C64 + Send + Sync>;
pub type PhiFn = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

/// Relative slack allowed by the sampled invariant checks.
pub const VERIFY_TOL: f64 = 1e-6;

/// `H(z, xi)` together with its declared constants.
#[derive(Clone)]
pub struct StructureSpec {
    name: String,
    h: StructureFn,
    l: f64,
    m: f64,
    alpha: f64,
    r: f64,
    domain: Region,
}

impl fmt::Debug for StructureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StructureSpec")
            .field("name", &self.name)
            .field("L", &self.l)
            .field("M", &self.m)
            .field("alpha", &self.alpha)
            .field("R", &self.r)
            .field("domain", &self.domain)
            .finish()
    }
}

impl StructureSpec {
    /// `m` may be infinite for an `H` that is bounded but not Hölder in `z`;
    /// `lambda_0` is then infinite and the solver refuses it.
    pub fn new(
        name: impl Into<String>,
        h: StructureFn,
        l: f64,
        m: f64,
        alpha: f64,
        r: f64,
        domain: Region,
    ) -> Result<Self> {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::invalid(format!("L must be finite and >= 0, got {l}")));
        }
        if !(m >= 0.0) {
            return Err(Error::invalid(format!("M must be >= 0, got {m}")));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::invalid(format!("R must be finite and >= 0, got {r}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        Ok(Self {
            name: name.into(),
            h,
            l,
            m,
            alpha,
            r,
            domain,
        })
    }

    #[inline]
    pub fn eval(&self, z: C64, xi: C64) -> C64 {
        (self.h)(z, xi)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn l(&self) -> f64 {
        self.l
    }
    pub fn m(&self) -> f64 {
        self.m
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn domain(&self) -> Region {
        self.domain
    }
    /// Integrability exponent `p = 3/alpha`.
    pub fn p(&self) -> f64 {
        3.0 / self.alpha
    }

    /// Same evaluator with different declared constants.
    pub fn with_constants(&self, l: f64, m: f64, alpha: f64, r: f64) -> Result<Self> {
        Self::new(self.name.clone(), self.h.clone(), l, m, alpha, r, self.domain)
    }

    /// `H == 0`.
    pub fn zero() -> Self {
        Self::new("zero", Arc::new(|_, _| C64::new(0.0, 0.0)), 0.0, 0.0, 1.0, 0.0, Region::unit_disk())
            .expect("valid constants")
    }

    /// `H(xi) = a/xi + b` with `L = |a|`, `M = |a|/R + |b|`; `R` defaults to 2.
    pub fn rational(a: C64, b: C64, r: Option<f64>) -> Result<Self> {
        let r = r.unwrap_or(2.0);
        if a.norm() > 0.0 && r <= 0.0 {
            return Err(Error::invalid("a rational structure with a != 0 needs R > 0"));
        }
        let m = if a.norm() == 0.0 { b.norm() } else { a.norm() / r + b.norm() };
        Self::new(
            format!("rational:a={},b={}", fmt_c(a), fmt_c(b)),
            Arc::new(move |_, xi| a / xi + b),
            a.norm(),
            m,
            1.0,
            r,
            Region::unit_disk(),
        )
    }

    /// `H(z) = a z + b`, independent of `xi`: `L = 0`, `R = 0`, `alpha = 1`,
    /// `M = sup|H| + Lip = 2|a| + |b|` on the unit disk.
    pub fn affine(a: C64, b: C64) -> Result<Self> {
        Self::new(
            format!("affine:a={},b={}", fmt_c(a), fmt_c(b)),
            Arc::new(move |z, _| a * z + b),
            0.0,
            2.0 * a.norm() + b.norm(),
            1.0,
            0.0,
            Region::unit_disk(),
        )
    }

    /// Hopf–Laplace structure `H(z, xi) = conj(phi(z)) / conj(xi)`:
    /// `L = sup|phi|`, `R = sqrt(sup|phi|)`, `M = (sup|phi| + holder)/R`,
    /// where `holder` is the declared `alpha`-Hölder constant of `phi`.
    pub fn hopf(name: impl Into<String>, phi: PhiFn, domain: Region, alpha: f64, holder: f64) -> Result<Self> {
        if !(holder >= 0.0) {
            return Err(Error::invalid(format!("Hölder constant must be >= 0, got {holder}")));
        }
        let sup = sup_on_region(&*phi, &domain)?;
        let r = sup.sqrt();
        let m = if sup == 0.0 && holder == 0.0 { 0.0 } else { (sup + holder) / r };
        let h: StructureFn = Arc::new(move |z, xi| phi(z).conj() / xi.conj());
        Self::new(name, h, sup, m, alpha, r, domain)
    }
}

fn fmt_c(c: C64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else {
        format!("{}{:+}i", c.re, c.im)
    }
}

/// Bounding box `(center, half-extent)` of a region, for rejection sampling.
fn bounding_box(region: &Region) -> (C64, f64) {
    match *region {
        Region::Plane => (C64::new(0.0, 0.0), 1.0),
        Region::Disk { center, radius } => (center, radius),
        Region::Annulus { center, outer, .. } => (center, outer),
        Region::HalfDisk { radius } => (C64::new(0.0, 0.0), radius),
    }
}

/// Sampling region used in place of the whole plane.
fn effective(region: &Region) -> Region {
    match region {
        Region::Plane => Region::unit_disk(),
        r => *r,
    }
}

/// A representative interior point.
fn region_center(region: &Region) -> C64 {
    match *region {
        Region::Plane => C64::new(0.0, 0.0),
        Region::Disk { center, .. } => center,
        Region::Annulus { center, inner, outer } => center + 0.5 * (inner + outer),
        Region::HalfDisk { radius } => C64::new(0.5 * radius, 0.0),
    }
}

pub(crate) fn random_point(rng: &mut ChaCha8Rng, region: &Region) -> C64 {
    let region = effective(region);
    let (c, s) = bounding_box(&region);
    loop {
        let z = c + C64::new(rng.gen_range(-s..s), rng.gen_range(-s..s));
        if region.contains(z) {
            return z;
        }
    }
}

/// Estimate `sup |phi|` over a region from a dense interior lattice plus
/// points just inside the boundary.
pub fn sup_on_region(phi: &(dyn Fn(C64) -> C64 + Send + Sync), region: &Region) -> Result<f64> {
    let region = effective(region);
    let (c, s) = bounding_box(&region);
    let m = 256;
    let mut best = 0.0f64;
    let mut visit = |z: C64| -> Result<()> {
        if !region.contains(z) {
            return Ok(());
        }
        let v = phi(z);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::invalid(format!("phi is unbounded or undefined at z = {z}")));
        }
        best = best.max(v.norm());
        Ok(())
    };
    for a in 0..m {
        for b in 0..m {
            let x = -s + 2.0 * s * (a as f64 + 0.5) / m as f64;
            let y = -s + 2.0 * s * (b as f64 + 0.5) / m as f64;
            visit(c + C64::new(x, y))?;
        }
    }
    // rings approaching the outer boundary
    for shrink in [1e-3, 1e-6, 1e-9] {
        for t in 0..4096 {
            let th = 2.0 * PI * t as f64 / 4096.0;
            visit(c + C64::from_polar(s * (1.0 - shrink), th))?;
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Extension to the plane
// ---------------------------------------------------------------------------

/// `H` on the unit disk, `(2 - |z|) H(1/conj z, xi)` on `1 <= |z| <= 2`,
/// zero beyond.
#[derive(Clone, Debug)]
pub struct ExtendedStructure {
    base: StructureSpec,
}

pub fn extend(spec: &StructureSpec) -> ExtendedStructure {
    ExtendedStructure { base: spec.clone() }
}

impl ExtendedStructure {
    pub fn base(&self) -> &StructureSpec {
        &self.base
    }

    #[inline]
    pub fn eval(&self, z: C64, xi: C64) -> C64 {
        let r = z.norm();
        if r <= 1.0 {
            self.base.eval(z, xi)
        } else if r < 2.0 {
            (2.0 - r) * self.base.eval(z / (r * r), xi)
        } else {
            C64::new(0.0, 0.0)
        }
    }
}

/// Sampled checks of the extension: the `xi`-Lipschitz constant on the
/// plane, the `6M` bound of the extended sum condition, continuity across
/// `|z| = 1` and `|z| = 2`, and vanishing beyond `2D`.
pub fn verify_extension(ext: &ExtendedStructure, samples: usize, seed: u64) -> VerificationReport {
    let spec = ext.base();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = VerificationReport::new(format!("extension[{}]", spec.name()));
    let xi_max = 10.0 * spec.r() + 10.0;
    let mut lip = 0.0f64;
    let mut sup = 0.0f64;
    let mut holder = 0.0f64;
    let mut jump = 0.0f64;
    let mut outside = 0.0f64;
    for _ in 0..samples {
        let z = random_point(&mut rng, &Region::disk(3.0));
        let x1 = random_xi(&mut rng, spec.r(), xi_max);
        let x2 = random_xi(&mut rng, spec.r(), xi_max);
        let d = (1.0 / x1 - 1.0 / x2).norm();
        if d > 0.0 {
            lip = lip.max((ext.eval(z, x1) - ext.eval(z, x2)).norm() / d);
        }
        sup = sup.max(ext.eval(z, x1).norm());
        let w = random_point(&mut rng, &Region::disk(3.0));
        let dz = (z - w).norm();
        if dz > 0.0 {
            holder = holder.max((ext.eval(z, x1) - ext.eval(w, x1)).norm() / dz.powf(spec.alpha()));
        }
        let th = C64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
        for rad in [1.0, 2.0] {
            let a = ext.eval(th * rad * (1.0 - 1e-12), x1);
            let b = ext.eval(th * rad * (1.0 + 1e-12), x1);
            jump = jump.max((a - b).norm());
        }
        let far = th * rng.gen_range(2.0..5.0);
        outside = outside.max(ext.eval(far, x1).norm());
    }
    let tol = 1.0 + VERIFY_TOL;
    rep.check_le("xi_lipschitz_on_plane", lip, spec.l() * tol + 1e-300, "|H(z,x1)-H(z,x2)| / |1/x1-1/x2|");
    rep.check_le("sup_le_6M", sup, 6.0 * spec.m() * tol, "sup |H| over z in 3D");
    rep.check_le(
        "holder_sum_le_6M",
        sup + holder,
        6.0 * spec.m() * tol,
        "sup |H| + alpha-Hölder quotient, sampled",
    );
    rep.check_le("continuity_at_circles", jump, 1e-8 * (1.0 + spec.m().min(1e12)), "|z| = 1 and |z| = 2");
    rep.check_le("zero_outside_2D", outside, 0.0, "|z| >= 2");
    rep
}

fn random_xi(rng: &mut ChaCha8Rng, r: f64, xi_max: f64) -> C64 {
    // modulus in (R, 10R + 10]
    let u: f64 = 1.0 - rng.gen::<f64>();
    C64::from_polar(r + (xi_max - r) * u, rng.gen_range(0.0..2.0 * PI))
}

// ---------------------------------------------------------------------------
// Operator constants and lambda_0
// ---------------------------------------------------------------------------

/// Bounds for the Beurling norm on `L^p`, the Besov embedding and the Cauchy
/// decay, at `p = 3/alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorConstants {
    pub s_p: f64,
    pub b_p: f64,
    pub c_p: f64,
    pub p: f64,
}

/// Measured ratios behind a calibration.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub grid: GridSpec,
    pub safety: f64,
    /// `(probe name, ||w||_inf / ||w||_{alpha,p}, decay ratio)`
    pub probes: Vec<(String, f64, f64)>,
}

pub const CALIBRATION_SAFETY: f64 = 2.0;

impl OperatorConstants {
    pub fn new(s_p: f64, b_p: f64, c_p: f64, p: f64) -> Result<Self> {
        if !(p >= 3.0 && p.is_finite()) {
            return Err(Error::invalid(format!("p = 3/alpha must be finite and >= 3, got {p}")));
        }
        if !(s_p > 1.0 && s_p.is_finite()) {
            return Err(Error::invalid(format!("S_p must exceed 1, got {s_p}")));
        }
        if !(b_p > 0.0 && b_p.is_finite() && c_p > 0.0 && c_p.is_finite()) {
            return Err(Error::invalid(format!("B_p and C_p must be positive, got {b_p}, {c_p}")));
        }
        Ok(Self { s_p, b_p, c_p, p })
    }

    /// `S_p = p - 1` with `B_p`, `C_p` calibrated on the reference grid
    /// `A = 4, n = 128`.
    pub fn defaults(alpha: f64) -> Result<Self> {
        let grid = GridSpec::new(4.0, 128)?;
        Ok(Self::calibrate(grid, alpha)?.0)
    }

    /// Measure `||w||_inf / ||w||_{alpha,p}` and the Cauchy decay ratio on
    /// probe densities supported in `2D`, and take `CALIBRATION_SAFETY`
    /// times the worst case.
    pub fn calibrate(grid: GridSpec, alpha: f64) -> Result<(Self, Calibration)> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        let p = 3.0 / alpha;
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        type Probe = (&'static str, Box<dyn Fn(C64) -> C64 + Sync>);
        let probes: Vec<Probe> = vec![
            ("chi_D", Box::new(move |z: C64| if z.norm() <= 1.0 { one } else { zero })),
            ("chi_2D", Box::new(move |z: C64| if z.norm() < 2.0 { one } else { zero })),
            (
                "bump_D",
                Box::new(move |z: C64| one * (1.0 - z.norm_sqr()).max(0.0).powi(3)),
            ),
            (
                "bump_2D",
                Box::new(move |z: C64| one * (1.0 - z.norm_sqr() / 4.0).max(0.0).powi(2)),
            ),
            (
                "extension_weight",
                Box::new(move |z: C64| {
                    let r = z.norm();
                    one * if r <= 1.0 { 1.0 } else { (2.0 - r).max(0.0) }
                }),
            ),
        ];
        let mut worst_b = 0.0f64;
        let mut worst_c = 0.0f64;
        let mut rows = Vec::new();
        for (name, f) in &probes {
            let w = field::sample(grid, f, None)?.into_supported()?;
            let besov = field::besov_norm(&w, alpha, p)?;
            let b = w.max_abs() / besov;
            let c = transforms::cauchy_decay_check(&w, p)?;
            worst_b = worst_b.max(b);
            worst_c = worst_c.max(c);
            rows.push((name.to_string(), b, c));
        }
        let consts = Self::new(
            p - 1.0,
            CALIBRATION_SAFETY * worst_b,
            CALIBRATION_SAFETY * worst_c,
            p,
        )?;
        Ok((
            consts,
            Calibration {
                grid,
                safety: CALIBRATION_SAFETY,
                probes: rows,
            },
        ))
    }
}

/// The five terms `sqrt(16 S_p)`, `sqrt(81 S_p L)`, `120 S_p B_p M`, `3R`,
/// `32 C_p L`.
pub fn lambda_zero_terms(spec: &StructureSpec, c: &OperatorConstants) -> [f64; 5] {
    [
        (16.0 * c.s_p).sqrt(),
        (81.0 * c.s_p * spec.l()).sqrt(),
        120.0 * c.s_p * c.b_p * spec.m(),
        3.0 * spec.r(),
        32.0 * c.c_p * spec.l(),
    ]
}

pub fn lambda_zero(spec: &StructureSpec, consts: &OperatorConstants) -> f64 {
    lambda_zero_terms(spec, consts).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// `||h_zbar||_inf <= M + sqrt(L) + R` for solutions with nonnegative Jacobian.
pub fn antiholomorphic_bound(spec: &StructureSpec) -> f64 {
    spec.m() + spec.l().sqrt() + spec.r()
}

// ---------------------------------------------------------------------------
// Sampled verification
// ---------------------------------------------------------------------------

/// Largest dyadic scale exponent used for Hölder pairs `(z, z + 2^-k e^{i t})`.
const HOLDER_SCALES: u32 = 200;

/// Monte-Carlo check of the declared constants: `sup|H| <= M`, the
/// `1/xi`-Lipschitz bound with `L`, the Hölder quotient against `M`, and the
/// combined sup + Hölder condition. Hölder pairs mix random pairs with
/// multiscale pairs down to `|z1 - z2| = 2^-200`, including pairs based at
/// the domain center.
pub fn verify_structure(spec: &StructureSpec, samples: usize, seed: u64) -> Result<VerificationReport> {
    if samples < 100 {
        return Err(Error::invalid(format!("need at least 100 samples, got {samples}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = effective(&spec.domain());
    let r = spec.r();
    let xi_max = 10.0 * r + 10.0;
    let zs: Vec<C64> = (0..samples).map(|_| random_point(&mut rng, &domain)).collect();
    let mut xis: Vec<C64> = (0..samples).map(|_| random_xi(&mut rng, r, xi_max)).collect();
    // the sup of |H| is typically approached as |xi| -> R
    for k in 0..16 {
        let th = 2.0 * PI * k as f64 / 16.0;
        let modulus = if r > 0.0 { r * (1.0 + 1e-9) } else { 1e-9 };
        xis.push(C64::from_polar(modulus, th));
    }

    let mut sup = 0.0f64;
    let mut sup_at = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for (i, &z) in zs.iter().enumerate() {
        for xi in [xis[i], xis[samples + i % 16]] {
            let v = spec.eval(z, xi).norm();
            if v > sup {
                sup = v;
                sup_at = (z, xi);
            }
        }
    }

    let mut lip = 0.0f64;
    for (i, &z) in zs.iter().enumerate() {
        let (x1, x2) = (xis[i], xis[(i + 1) % xis.len()]);
        let d = (1.0 / x1 - 1.0 / x2).norm();
        if d > 0.0 {
            lip = lip.max((spec.eval(z, x1) - spec.eval(z, x2)).norm() / d);
        }
    }

    // Hölder pairs
    let center = region_center(&domain);
    let mut pairs: Vec<(C64, C64)> = Vec::new();
    for i in 0..samples {
        pairs.push((zs[i], zs[(i + 1) % samples]));
        let k = 1 + (i as u32 % 60);
        let step = C64::from_polar(2f64.powi(-(k as i32)), rng.gen_range(0.0..2.0 * PI));
        if domain.contains(zs[i] + step) {
            pairs.push((zs[i], zs[i] + step));
        }
    }
    for k in 1..=HOLDER_SCALES {
        for t in 0..4 {
            let step = C64::from_polar(2f64.powi(-(k as i32)), PI * t as f64 / 2.0 + 0.3);
            if domain.contains(center + step) {
                pairs.push((center, center + step));
            }
        }
    }
    let probe_xis: Vec<C64> = xis[..8.min(samples)]
        .iter()
        .chain(xis[samples..].iter().step_by(4))
        .copied()
        .collect();
    let mut holder = 0.0f64;
    let mut holder_sum = 0.0f64;
    let mut holder_at = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for &xi in &probe_xis {
        let mut q = 0.0f64;
        for &(a, b) in &pairs {
            let d = (a - b).norm();
            if d == 0.0 {
                continue;
            }
            let (ha, hb) = (spec.eval(a, xi), spec.eval(b, xi));
            let da = d.powf(spec.alpha());
            // below this scale the quotient measures rounding, not H
            if 8.0 * f64::EPSILON * (ha.norm() + hb.norm()) > VERIFY_TOL * spec.m() * da {
                continue;
            }
            let v = (ha - hb).norm() / da;
            if v > q {
                q = v;
                if v > holder {
                    holder_at = (a, b);
                }
            }
        }
        holder = holder.max(q);
        let s = zs.iter().map(|&z| spec.eval(z, xi).norm()).fold(0.0, f64::max);
        holder_sum = holder_sum.max(s + q);
    }

    let tol = 1.0 + VERIFY_TOL;
    let ratio = |measured: f64, declared: f64| {
        if declared > 0.0 {
            measured / declared
        } else if measured > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    let mut rep = VerificationReport::new(format!("structure[{}]", spec.name()));
    rep.check_le(
        "sup_H_le_M",
        ratio(sup, spec.m()),
        tol,
        format!("worst ratio sup|H|/M, max {sup:.6e} at z = {}, xi = {}", sup_at.0, sup_at.1),
    );
    rep.check_le(
        "xi_lipschitz_le_L",
        ratio(lip, spec.l()),
        tol,
        format!("worst ratio |dH|/(L |d(1/xi)|), quotient {lip:.6e}"),
    );
    rep.check_le(
        "holder_le_M",
        ratio(holder, spec.m()),
        tol,
        format!(
            "worst ratio |H(z1)-H(z2)|/(M |z1-z2|^alpha), quotient {holder:.6e} near z = {}",
            holder_at.0
        ),
    );
    rep.check_le(
        "sup_plus_holder_le_M",
        ratio(holder_sum, spec.m()),
        tol,
        "sup |H| + Hölder quotient, per xi",
    );
    rep.note(format!(
        "{} z samples, {} xi samples, {} Hölder pairs (scales down to 2^-{HOLDER_SCALES})",
        zs.len(),
        xis.len(),
        pairs.len()
    ));
    Ok(rep)
}

/// Sampled domain check used by downstream hypothesis gates.
pub fn structure_holds(spec: &StructureSpec, samples: usize, seed: u64) -> Result<bool> {
    Ok(verify_structure(spec, samples, seed)?.passed())
}

/// Convenience: sample the extension weight-free structure on a grid at
/// fixed `xi`, mostly for diagnostics.
pub fn sample_structure(ext: &ExtendedStructure, grid: GridSpec, xi: C64) -> Result<ComplexField> {
    field::sample(grid, |z| ext.eval(z, xi), None)
}
