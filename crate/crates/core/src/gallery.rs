//! Closed-form mappings with exact Wirtinger derivatives, used as oracles.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{self, ComplexField, FieldPair, Scheme};
use crate::grid::{GridSpec, Region};
use crate::structure::{PhiFn, StructureSpec};

type C64 = Complex64;
pub type EvalFn = Arc<dyn Fn(C64) -> C64 + Send + Sync>;
pub type DistFn = Arc<dyn Fn(C64) -> f64 + Send + Sync>;

/// Properties an entry is expected to have.
#[derive(Clone, Debug, PartialEq)]
pub enum Claim {
    /// `h_z conj(h_zbar)` equals the constant.
    HopfProductConstant(C64),
    /// The Hopf product is analytic (given by the entry's `phi`).
    HopfProductAnalytic,
    /// `h_z |h_zbar| = 1`.
    PseudoHopf,
    JacobianNonnegative,
    /// `J_h >= 0` on the disk of the given radius.
    JacobianNonnegativeWithin(f64),
    /// Lipschitz with the given constant, when known.
    Lipschitz(Option<f64>),
    NotLipschitz,
    NotC1,
    /// `|h_zbar| / |h_z| -> 0` at the origin.
    QuasiconformalNearOrigin,
    /// Solves `h_zbar = a/h_z + b`.
    SolvesRational { a: C64, b: C64 },
    /// The Hopf product is continuous but not Hölder.
    HolderHypothesisFails,
    /// `|grad h| dist` stays bounded but does not tend to 0 at the origin.
    BoundaryOscillation,
    /// `J_h` changes sign inside the unit disk.
    JacobianChangesSign,
}

#[derive(Clone)]
pub struct GalleryEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub domain: Region,
    pub h: EvalFn,
    pub h_z: EvalFn,
    pub h_zbar: EvalFn,
    /// Distance to the set where the closed forms are not smooth (cuts,
    /// interfaces, isolated singular points). Infinite when there is none.
    pub singular_distance: DistFn,
    /// Closed-form Hopf product, when it is the analytic datum `phi`.
    pub phi: Option<EvalFn>,
    pub claims: Vec<Claim>,
    /// Box half-width that contains the domain.
    pub half_width: f64,
}

impl fmt::Debug for GalleryEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GalleryEntry")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("claims", &self.claims)
            .finish()
    }
}

/// Errors in the central4 derivatives against the closed forms.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeCheck {
    pub grid: GridSpec,
    pub points: usize,
    /// `max |num - exact| / max |exact|` over both derivatives.
    pub rel_error: f64,
    pub rel_error_refined: f64,
    /// `log2` of the error ratio under `delta -> delta/2`; `None` when both
    /// errors sit at roundoff.
    pub order: Option<f64>,
}

impl GalleryEntry {
    pub fn eval(&self, z: C64) -> C64 {
        (self.h)(z)
    }

    pub fn derivatives(&self, z: C64) -> (C64, C64) {
        ((self.h_z)(z), (self.h_zbar)(z))
    }

    pub fn hopf_product(&self, z: C64) -> C64 {
        let (a, b) = self.derivatives(z);
        a * b.conj()
    }

    pub fn jacobian(&self, z: C64) -> f64 {
        let (a, b) = self.derivatives(z);
        a.norm_sqr() - b.norm_sqr()
    }

    /// Interior points at least `margin` from both the domain boundary and
    /// the singular set.
    pub fn is_regular(&self, z: C64, margin: f64) -> bool {
        self.domain.contains_with_margin(z, margin) && (self.singular_distance)(z) >= margin
    }

    /// Samples outside the domain or within one grid spacing of the singular set.
    pub fn is_masked(&self, z: C64, delta: f64) -> bool {
        !self.domain.contains(z) || (self.singular_distance)(z) < delta
    }

    pub fn default_grid(&self, n: usize) -> Result<GridSpec> {
        GridSpec::new(self.half_width, n)
    }

    pub fn sample(&self, grid: GridSpec) -> Result<ComplexField> {
        let d = grid.spacing();
        let h = self.h.clone();
        field::sample(grid, move |z| h(z), Some(&|z: C64| self.is_masked(z, d)))
    }

    /// Closed-form derivatives on the same mask as [`Self::sample`].
    pub fn sample_derivatives(&self, grid: GridSpec) -> Result<FieldPair> {
        let d = grid.spacing();
        let mask = |z: C64| self.is_masked(z, d);
        let hz = self.h_z.clone();
        let hzb = self.h_zbar.clone();
        FieldPair::new(
            field::sample(grid, move |z| hz(z), Some(&mask))?,
            field::sample(grid, move |z| hzb(z), Some(&mask))?,
        )
    }

    /// Compare central4 derivatives of the sampled map with the closed forms
    /// at samples at least `8 delta` (coarse spacing) from every mask, then
    /// repeat on the refined grid at the same points.
    pub fn derivative_check(&self, grid: GridSpec) -> Result<DerivativeCheck> {
        self.derivative_check_at(grid, 8.0)
    }

    /// As [`Self::derivative_check`] with a margin of `cells` grid spacings.
    pub fn derivative_check_at(&self, grid: GridSpec, cells: f64) -> Result<DerivativeCheck> {
        let margin = cells * grid.spacing();
        let points: Vec<C64> = grid.points().filter(|&z| self.is_regular(z, margin)).collect();
        if points.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let e1 = self.derivative_error(grid, &points)?;
        let e2 = self.derivative_error(grid.refined(), &points)?;
        let order = (e1 > 1e-11 && e2 > 0.0).then(|| (e1 / e2).log2());
        Ok(DerivativeCheck {
            grid,
            points: points.len(),
            rel_error: e1,
            rel_error_refined: e2,
            order,
        })
    }

    fn derivative_error(&self, grid: GridSpec, points: &[C64]) -> Result<f64> {
        let pair = field::wirtinger(&self.sample(grid)?, Scheme::Central4)?;
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for &z in points {
            let (j, k) = grid.nearest(z).ok_or(Error::EmptyRegion)?;
            let i = grid.index(j, k);
            if pair.is_excluded(i) {
                return Err(Error::invalid(format!(
                    "derivative stencil at z = {z} touches a masked sample"
                )));
            }
            let (a, b) = self.derivatives(grid.point_at(i));
            err = err.max((pair.d_z.values()[i] - a).norm()).max((pair.d_zbar.values()[i] - b).norm());
            scale = scale.max(a.norm()).max(b.norm());
        }
        Ok(if scale > 0.0 { err / scale } else { err })
    }

    /// The Hopf–Laplace structure `H = conj(phi)/conj(xi)` this entry solves.
    /// `alpha` and `holder` are the declared Hölder data of `phi`.
    pub fn hopf_structure(&self, alpha: f64, holder: f64) -> Option<Result<StructureSpec>> {
        let phi = self.phi.clone()?;
        let p: PhiFn = Arc::new(move |z| phi(z));
        Some(StructureSpec::hopf(format!("hopf:{}", self.name), p, self.domain, alpha, holder))
    }

    /// Structure data this entry is expected to satisfy, when it has one.
    pub fn structure(&self) -> Option<Result<StructureSpec>> {
        for c in &self.claims {
            if let Claim::SolvesRational { a, b } = c {
                return Some(StructureSpec::rational(*a, *b, None));
            }
        }
        match self.name {
            // Lipschitz phi: constant -1
            "cuberoot" => self.hopf_structure(1.0, 0.0),
            // continuous, not Hölder at 0; declared alpha = 1/2 with constant 1
            "loglog" => self.hopf_structure(0.5, 1.0),
            "halfdisk" => self.hopf_structure(1.0, f64::INFINITY),
            _ => None,
        }
    }
}

pub const NAMES: [&str; 6] = ["cuberoot", "piecewise", "pseudo_hopf", "loglog", "halfdisk", "harmonic"];

pub fn list() -> Vec<GalleryEntry> {
    vec![
        cuberoot_example(),
        piecewise_example(),
        pseudo_hopf_example(),
        loglog_example(),
        halfdisk_example(),
        harmonic_probe(C64::new(0.2, 0.0)),
    ]
}

/// Look up an entry; `harmonic` accepts an optional `:c=<re>[,<im>]`.
pub fn by_name(name: &str) -> Option<GalleryEntry> {
    match name {
        "cuberoot" => Some(cuberoot_example()),
        "piecewise" => Some(piecewise_example()),
        "pseudo_hopf" => Some(pseudo_hopf_example()),
        "loglog" => Some(loglog_example()),
        "halfdisk" => Some(halfdisk_example()),
        "harmonic" => Some(harmonic_probe(C64::new(0.2, 0.0))),
        _ => {
            let rest = name.strip_prefix("harmonic:c=")?;
            let mut parts = rest.split(',');
            let re: f64 = parts.next()?.trim().parse().ok()?;
            let im: f64 = match parts.next() {
                Some(s) => s.trim().parse().ok()?,
                None => 0.0,
            };
            Some(harmonic_probe(C64::new(re, im)))
        }
    }
}

// ---------------------------------------------------------------------------
// Entries
// ---------------------------------------------------------------------------

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `z^{-1/3} (1 - s)` and `-z^{-1/3} (1 + s)` with `s = (1 - z^{2/3})^{1/2}`.
fn cuberoot_parts(z: C64) -> (C64, C64) {
    let z23 = z.powf(2.0 / 3.0);
    let zm13 = z.powf(-1.0 / 3.0);
    let s = (1.0 - z23).sqrt();
    (-zm13 * (1.0 + s), zm13 * (1.0 - s))
}

/// `h = 3/2 (zbar^{2/3} - z^{2/3}) + (1 - z^{2/3})^{3/2} + (1 - zbar^{2/3})^{3/2}`
/// on `|z - 1| < 1/2`, cut along `[1, 3/2)`. Hopf product `-1`.
pub fn cuberoot_example() -> GalleryEntry {
    let h: EvalFn = Arc::new(|z: C64| {
        let zb = z.conj();
        1.5 * (zb.powf(2.0 / 3.0) - z.powf(2.0 / 3.0))
            + (1.0 - z.powf(2.0 / 3.0)).powf(1.5)
            + (1.0 - zb.powf(2.0 / 3.0)).powf(1.5)
    });
    GalleryEntry {
        name: "cuberoot",
        description: "Lipschitz solution of h_z conj(h_zbar) = -1 that is not C^1 across the cut [1, 3/2)",
        domain: Region::disk_at(c(1.0, 0.0), 0.5),
        h,
        h_z: Arc::new(|z| cuberoot_parts(z).0),
        // conj of z^{-1/3}(1 - s) off the cut
        h_zbar: Arc::new(|z| cuberoot_parts(z).1.conj()),
        singular_distance: Arc::new(|z: C64| {
            if z.re >= 1.0 {
                z.im.abs()
            } else {
                (z - 1.0).norm()
            }
        }),
        phi: Some(Arc::new(|_| c(-1.0, 0.0))),
        claims: vec![
            Claim::HopfProductConstant(c(-1.0, 0.0)),
            Claim::JacobianNonnegative,
            Claim::Lipschitz(None),
            Claim::NotC1,
        ],
        half_width: 2.0,
    }
}

/// `z^{1/3} (h_z + conj(h_zbar)) = -2 (1 - z^{2/3})^{1/2}`, which changes
/// sign across the cut.
pub fn cuberoot_witness(z: C64) -> C64 {
    let e = cuberoot_example();
    let (a, b) = e.derivatives(z);
    z.powf(1.0 / 3.0) * (a + b.conj())
}

/// `3z` on the upper half, `2z + zbar` on the lower half of the unit disk.
pub fn piecewise_example() -> GalleryEntry {
    GalleryEntry {
        name: "piecewise",
        description: "bi-Lipschitz map solving h_zbar = 6/h_z - 2, not C^1 across the real axis",
        domain: Region::unit_disk(),
        h: Arc::new(|z: C64| if z.im >= 0.0 { 3.0 * z } else { 2.0 * z + z.conj() }),
        h_z: Arc::new(|z: C64| if z.im >= 0.0 { c(3.0, 0.0) } else { c(2.0, 0.0) }),
        h_zbar: Arc::new(|z: C64| if z.im >= 0.0 { c(0.0, 0.0) } else { c(1.0, 0.0) }),
        singular_distance: Arc::new(|z: C64| z.im.abs()),
        phi: None,
        claims: vec![
            Claim::SolvesRational { a: c(6.0, 0.0), b: c(-2.0, 0.0) },
            Claim::JacobianNonnegative,
            Claim::Lipschitz(Some(3.0)),
            Claim::NotC1,
        ],
        half_width: 1.25,
    }
}

/// `t(psi) = psi^2 - 1 + psi sqrt(psi^2 - 1) - log(psi + sqrt(psi^2 - 1))`.
pub fn pseudo_hopf_t(psi: f64) -> f64 {
    let u = (psi * psi - 1.0).max(0.0).sqrt();
    t_of_u(u)
}

/// `t` in terms of `u = sqrt(psi^2 - 1)`.
fn t_of_u(u: f64) -> f64 {
    let psi = (1.0 + u * u).sqrt();
    u * u + u * psi - u.asinh()
}

/// Inverse of [`pseudo_hopf_t`]: `(psi(t), psi'(t))` for `t >= 0`, with
/// `psi' = (psi - sqrt(psi^2 - 1))/2` the root of `(psi - psi') psi' = 1/4`
/// that tends to 0.
pub fn pseudo_hopf_psi(t: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("psi is defined for finite t >= 0, got {t}")));
    }
    // Newton on u = sqrt(psi^2 - 1); dt/du = 2u(psi + u)/psi. The bracket
    // follows from t(psi) >= psi^2 - 2.
    let mut lo = 0.0f64;
    let mut hi = ((1.0 + (t + 2.0).sqrt()).powi(2) - 1.0).sqrt();
    let mut u = t.sqrt().min(hi);
    for _ in 0..200 {
        let f = t_of_u(u) - t;
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let psi = (1.0 + u * u).sqrt();
        let df = 2.0 * u * (psi + u) / psi;
        let mut next = if df > 0.0 { u - f / df } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-15 * u.max(1e-300) || hi - lo <= 1e-16 * hi {
            u = next;
            break;
        }
        u = next;
    }
    let psi = (1.0 + u * u).sqrt();
    Ok((psi, 0.5 / (psi + u)))
}

/// `h = 2 z psi(-2 log|z|)` on the unit disk: solves `h_z |h_zbar| = 1`,
/// quasiconformal near 0 but not Lipschitz there.
pub fn pseudo_hopf_example() -> GalleryEntry {
    fn parts(z: C64) -> (f64, f64) {
        let t = -2.0 * z.norm().ln();
        pseudo_hopf_psi(t.max(0.0)).unwrap_or((f64::NAN, f64::NAN))
    }
    GalleryEntry {
        name: "pseudo_hopf",
        description: "quasiconformal solution of h_z |h_zbar| = 1 that is not Lipschitz at 0",
        domain: Region::unit_disk(),
        h: Arc::new(|z: C64| 2.0 * z * parts(z).0),
        h_z: Arc::new(|z: C64| {
            let (p, dp) = parts(z);
            c(2.0 * p - 2.0 * dp, 0.0)
        }),
        h_zbar: Arc::new(|z: C64| {
            let (_, dp) = parts(z);
            -2.0 * (z / z.conj()) * dp
        }),
        singular_distance: Arc::new(|z: C64| z.norm()),
        phi: None,
        claims: vec![
            Claim::PseudoHopf,
            Claim::JacobianNonnegative,
            Claim::QuasiconformalNearOrigin,
            Claim::NotLipschitz,
        ],
        half_width: 1.25,
    }
}

fn log_inv_sq(z: C64) -> f64 {
    -2.0 * z.norm().ln()
}

/// `h = z log log |z|^{-2}` on `|z| < 1/2`: continuous Hopf product, not Lipschitz.
pub fn loglog_example() -> GalleryEntry {
    let h_z: EvalFn = Arc::new(|z: C64| {
        let l = log_inv_sq(z);
        c(l.ln() - 1.0 / l, 0.0)
    });
    // d/dzbar log(-log z - log zbar) = -1/(zbar L)
    let h_zbar: EvalFn = Arc::new(|z: C64| -(z / z.conj()) / log_inv_sq(z));
    let (a, b) = (h_z.clone(), h_zbar.clone());
    GalleryEntry {
        name: "loglog",
        description: "homeomorphism with continuous Hopf product that is not Lipschitz at 0",
        domain: Region::disk(0.5),
        h: Arc::new(|z: C64| z * log_inv_sq(z).ln()),
        h_z,
        h_zbar,
        singular_distance: Arc::new(|z: C64| z.norm()),
        phi: Some(Arc::new(move |z: C64| {
            if z.norm() == 0.0 {
                c(0.0, 0.0)
            } else {
                a(z) * b(z).conj()
            }
        })),
        claims: vec![
            Claim::HolderHypothesisFails,
            Claim::JacobianNonnegativeWithin(loglog_orientation_radius()),
            Claim::NotLipschitz,
        ],
        half_width: 0.75,
    }
}

/// `h = zbar^2 + sin log z` on the right half-disk; Hopf product `2 cos log z`.
pub fn halfdisk_example() -> GalleryEntry {
    GalleryEntry {
        name: "halfdisk",
        description: "bounded solution of h_z conj(h_zbar) = 2 cos log z oscillating near 0",
        domain: Region::HalfDisk { radius: 1.0 },
        h: Arc::new(|z: C64| z.conj() * z.conj() + z.ln().sin()),
        h_z: Arc::new(|z: C64| z.ln().cos() / z),
        h_zbar: Arc::new(|z: C64| 2.0 * z.conj()),
        singular_distance: Arc::new(|z: C64| z.norm()),
        phi: Some(Arc::new(|z: C64| 2.0 * z.ln().cos())),
        claims: vec![Claim::HopfProductAnalytic, Claim::BoundaryOscillation],
        half_width: 1.25,
    }
}

/// `h = z + c zbar^2`: harmonic, Hopf product `2 conj(c) z`.
pub fn harmonic_probe(cc: C64) -> GalleryEntry {
    let mut claims = vec![Claim::HopfProductAnalytic, Claim::Lipschitz(Some(1.0 + 2.0 * cc.norm()))];
    if cc.norm() >= 0.5 {
        claims.push(Claim::JacobianChangesSign);
    } else {
        claims.push(Claim::JacobianNonnegative);
    }
    GalleryEntry {
        name: "harmonic",
        description: "harmonic probe z + c zbar^2",
        domain: Region::unit_disk(),
        h: Arc::new(move |z: C64| z + cc * z.conj() * z.conj()),
        h_z: Arc::new(|_| c(1.0, 0.0)),
        h_zbar: Arc::new(move |z: C64| 2.0 * cc * z.conj()),
        singular_distance: Arc::new(|_| f64::INFINITY),
        phi: Some(Arc::new(move |z: C64| 2.0 * cc.conj() * z)),
        claims,
        half_width: 1.25,
    }
}

/// Radius of the circle where the Jacobian of the harmonic probe vanishes.
pub fn harmonic_zero_jacobian_radius(cc: C64) -> f64 {
    if cc.norm() == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (2.0 * cc.norm())
    }
}

/// Radius where `L log L = 2`, `L = log |z|^-2`. On `|z| < r` the loglog map
/// has `J_h = log L (log L - 2/L) > 0` and `r log L` increases with `r`;
/// beyond it both fail, so the map is not injective on the full half-disk.
pub fn loglog_orientation_radius() -> f64 {
    let mut l = 2.3f64;
    for _ in 0..50 {
        let step = (l * l.ln() - 2.0) / (l.ln() + 1.0);
        l -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    (-l / 2.0).exp()
}

/// `|2 cos log z| <= 2 cosh(pi/2)` on the right half-plane.
pub fn halfdisk_phi_bound() -> f64 {
    2.0 * (PI / 2.0).cosh()
}
