//! Energy integrals, Hopf products, inner-variational residuals, the
//! neo-Hookean reduction `W = F / (a - b)^(p-1)` and the implicit inversion
//! `k = s Gamma(s)`.
//!
//! Throughout `a = |h_z|^2` and `b = |h_zbar|^2`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{self, ComplexField, FieldPair, Scheme};
use crate::grid::Region;
use crate::report::VerificationReport;

type C64 = Complex64;

/// Values and partials of `F(a, b)` up to second order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FEval {
    pub f: f64,
    pub fa: f64,
    pub fb: f64,
    pub faa: f64,
    pub fab: f64,
    pub fbb: f64,
}

pub type FEvalFn = Arc<dyn Fn(f64, f64) -> FEval + Send + Sync>;

/// An isotropic integrand `F(a, b)`, declared homogeneous of degree `p`.
#[derive(Clone)]
pub struct FModel {
    name: String,
    p: f64,
    eval: FEvalFn,
}

impl fmt::Debug for FModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FModel").field("name", &self.name).field("p", &self.p).finish()
    }
}

impl FModel {
    pub fn new(name: impl Into<String>, p: f64, eval: FEvalFn) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::invalid(format!("neo-Hookean exponent p = {p} must be >= 1")));
        }
        Ok(FModel { name: name.into(), p, eval })
    }

    /// `F = (a + b)^q`, declared with degree `p` (normally `q = p`).
    pub fn power_sum_with_degree(q: f64, p: f64) -> Result<Self> {
        Self::new(
            format!("power_sum:q={q}"),
            p,
            Arc::new(move |a: f64, b: f64| {
                let s = a + b;
                let d1 = q * s.powf(q - 1.0);
                let d2 = q * (q - 1.0) * s.powf(q - 2.0);
                FEval { f: s.powf(q), fa: d1, fb: d1, faa: d2, fab: d2, fbb: d2 }
            }),
        )
    }

    /// `F = (a + b)^p`, giving `|Dh|^{2p} / J^{p-1}`.
    pub fn power_sum(p: f64) -> Result<Self> {
        let mut m = Self::power_sum_with_degree(p, p)?;
        m.name = format!("power_sum:p={p}");
        Ok(m)
    }

    /// `F = a b` (degree 2).
    pub fn product() -> Self {
        FModel {
            name: "product".into(),
            p: 2.0,
            eval: Arc::new(|a: f64, b: f64| FEval { f: a * b, fa: b, fb: a, faa: 0.0, fab: 1.0, fbb: 0.0 }),
        }
    }

    /// `F(a, b) = (a + b)^p g(b / (a + b))` with `g` a natural cubic spline
    /// through `(tau, g)` on `tau` in `[0, 1/2]`.
    pub fn tabulated(p: f64, taus: &[f64], values: &[f64]) -> Result<Self> {
        let spline = NaturalSpline::new(taus, values)?;
        if spline.x[0] > 0.0 || *spline.x.last().unwrap() < 0.5 {
            return Err(Error::invalid("table must cover tau in [0, 1/2]"));
        }
        log::warn!("tabulated F is interpolated by a cubic spline in b/(a+b); its second derivatives are only piecewise smooth");
        Self::new(
            "tabulated",
            p,
            Arc::new(move |a: f64, b: f64| {
                let s = a + b;
                let t = if s > 0.0 { b / s } else { 0.0 };
                let (g, g1, g2) = spline.eval(t);
                let sp2 = s.powf(p - 2.0);
                let u = p * g - t * g1;
                let v = p * g + (1.0 - t) * g1;
                let w = (p - 1.0) * g1;
                FEval {
                    f: s.powf(p) * g,
                    fa: s.powf(p - 1.0) * u,
                    fb: s.powf(p - 1.0) * v,
                    faa: sp2 * ((p - 1.0) * u - t * (w - t * g2)),
                    fab: sp2 * ((p - 1.0) * u + (1.0 - t) * (w - t * g2)),
                    fbb: sp2 * ((p - 1.0) * v + (1.0 - t) * (w + (1.0 - t) * g2)),
                }
            }),
        )
    }

    /// `power_sum:p=<p>` or `product`. Three-variable (nonisotropic)
    /// integrands are rejected.
    pub fn by_name(spec: &str) -> Result<Self> {
        let (name, params) = spec.split_once(':').unwrap_or((spec, ""));
        match name {
            "power_sum" => {
                let p = params
                    .strip_prefix("p=")
                    .ok_or_else(|| Error::invalid("power_sum needs p=<value>"))?
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("power_sum p: {e}")))?;
                Self::power_sum(p)
            }
            "product" => Ok(Self::product()),
            "nonisotropic" => Err(Error::invalid(
                "nonisotropic F(a, b, c) depends on Re(h_z h_zbar) as well; only isotropic F(a, b) is supported",
            )),
            other => Err(Error::invalid(format!("unknown F model {other:?}"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eval(&self, a: f64, b: f64) -> FEval {
        (self.eval)(a, b)
    }

    /// `(W, W_a, W_b)` with `W = F / (a - b)^(p-1)`; requires `a > b`.
    pub fn w_parts(&self, a: f64, b: f64) -> (f64, f64, f64) {
        let e = self.eval(a, b);
        let j = a - b;
        let q = self.p - 1.0;
        let w = e.f / j.powf(q);
        let extra = q * e.f / j.powf(self.p);
        (w, e.fa / j.powf(q) - extra, e.fb / j.powf(q) + extra)
    }

    /// `Phi(k) = (F_a(1, k^2) + F_b(1, k^2)) k / (1 - k^2)^(p-1)` and `Phi'(k)`.
    pub fn phi_k(&self, k: f64) -> (f64, f64) {
        let u = k * k;
        let e = self.eval(1.0, u);
        let g = e.fa + e.fb;
        let dg = e.fab + e.fbb;
        let q = self.p - 1.0;
        let d = (1.0 - u).powf(q);
        let val = g * k / d;
        let der = (2.0 * u * dg + g) / d + 2.0 * q * g * u / (1.0 - u).powf(self.p);
        (val, der)
    }
}

/// Natural cubic spline on increasing nodes.
#[derive(Clone, Debug)]
struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl NaturalSpline {
    fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(Error::invalid("spline needs at least 3 (x, y) pairs of equal length"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("spline nodes must increase strictly and values be finite"));
        }
        // Tridiagonal system for the second derivatives, m_0 = m_{n-1} = 0.
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
            c[i] = h1 / diag;
            d[i] = (rhs - h0 * d[i - 1]) / diag;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Ok(NaturalSpline { x: x.to_vec(), y: y.to_vec(), m })
    }

    /// Value, first and second derivative; the end pieces continue past
    /// the outer nodes.
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let n = self.x.len();
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let val = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (self.y[i + 1] - self.y[i]) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let d2 = a * m0 + b * m1;
        (val, d1, d2)
    }
}

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

pub type RhoFn = Arc<dyn Fn(C64, C64) -> f64 + Send + Sync>;
pub type RhoZFn = Arc<dyn Fn(C64, C64) -> C64 + Send + Sync>;

/// A weight `rho(z, w)` together with its `z`-derivative `rho_z`.
#[derive(Clone)]
pub struct Weight {
    pub name: String,
    pub rho: RhoFn,
    pub rho_z: RhoZFn,
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Weight").field("name", &self.name).finish()
    }
}

impl Weight {
    pub fn new(name: impl Into<String>, rho: RhoFn, rho_z: RhoZFn) -> Self {
        Weight { name: name.into(), rho, rho_z }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant:{c}"), Arc::new(move |_, _| c), Arc::new(|_, _| C64::new(0.0, 0.0)))
    }

    /// `1 + c Re z`.
    pub fn linear(c: f64) -> Self {
        Self::new(
            format!("linear:{c}"),
            Arc::new(move |z: C64, _| 1.0 + c * z.re),
            Arc::new(move |_, _| C64::new(c / 2.0, 0.0)),
        )
    }

    /// `1 + |z|^2`.
    pub fn radial() -> Self {
        Self::new("radial", Arc::new(|z: C64, _| 1.0 + z.norm_sqr()), Arc::new(|z: C64, _| z.conj()))
    }

    /// Hyperbolic metric of the target disk, `(1 - |w|^2)^-2`; infinite for `|w| >= 1`.
    pub fn poincare() -> Self {
        Self::new(
            "poincare",
            Arc::new(|_, w: C64| {
                let d = 1.0 - w.norm_sqr();
                if d > 0.0 {
                    1.0 / (d * d)
                } else {
                    f64::INFINITY
                }
            }),
            Arc::new(|_, _| C64::new(0.0, 0.0)),
        )
    }

    pub fn by_name(name: &str) -> Result<Self> {
        let (n, arg) = name.split_once(':').unwrap_or((name, ""));
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::invalid(format!("weight parameter {s:?}: {e}")));
        match n {
            "constant" => Ok(Self::constant(if arg.is_empty() { 1.0 } else { num(arg)? })),
            "linear" => Ok(Self::linear(if arg.is_empty() { 1.0 } else { num(arg)? })),
            "radial" => Ok(Self::radial()),
            "poincare" => Ok(Self::poincare()),
            other => Err(Error::invalid(format!("unknown weight {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum EnergyDensity {
    /// `|Dh|^2 = 2(a + b)`.
    Dirichlet,
    /// `rho(z, h) (a + b)`.
    Weighted(Weight),
    /// `F(a, b) / (a - b)^(p-1)`.
    NeoHookean(FModel),
}

impl EnergyDensity {
    /// `dirichlet`, `weighted:<weight>`, `neo_hookean:<F model>`.
    pub fn by_name(spec: &str) -> Result<Self> {
        let (n, rest) = spec.split_once(':').unwrap_or((spec, ""));
        match n {
            "dirichlet" => Ok(EnergyDensity::Dirichlet),
            "weighted" => Ok(EnergyDensity::Weighted(Weight::by_name(if rest.is_empty() { "constant" } else { rest })?)),
            "neo_hookean" => Ok(EnergyDensity::NeoHookean(FModel::by_name(if rest.is_empty() { "power_sum:p=1" } else { rest })?)),
            other => Err(Error::invalid(format!("unknown energy density {other:?}"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            EnergyDensity::Dirichlet => "dirichlet".into(),
            EnergyDensity::Weighted(w) => format!("weighted:{}", w.name),
            EnergyDensity::NeoHookean(f) => format!("neo_hookean:{}", f.name()),
        }
    }

    /// Smallest Jacobian accepted by the neo-Hookean density.
    pub const MIN_JACOBIAN: f64 = 1e-12;

    /// `E` and the inner-variational brackets at one point:
    /// `B1 = h_z E_zeta + conj(h_zbar) E_xibar`,
    /// `B2 = h_z E_xi + conj(h_zbar) E_zetabar - E`, and `E_z`.
    /// `None` when the neo-Hookean Jacobian is degenerate.
    pub fn terms(&self, z: C64, w: C64, hz: C64, hzb: C64) -> Option<DensityTerms> {
        let a = hz.norm_sqr();
        let b = hzb.norm_sqr();
        let hopf = hz * hzb.conj();
        Some(match self {
            EnergyDensity::Dirichlet => DensityTerms {
                e: 2.0 * (a + b),
                b1: 4.0 * hopf,
                b2: C64::new(0.0, 0.0),
                e_z: C64::new(0.0, 0.0),
            },
            EnergyDensity::Weighted(wt) => {
                let rho = (wt.rho)(z, w);
                DensityTerms {
                    e: rho * (a + b),
                    b1: 2.0 * rho * hopf,
                    b2: C64::new(0.0, 0.0),
                    e_z: (wt.rho_z)(z, w) * (a + b),
                }
            }
            EnergyDensity::NeoHookean(f) => {
                if !(a - b > Self::MIN_JACOBIAN) {
                    return None;
                }
                let (wv, wa, wb) = f.w_parts(a, b);
                DensityTerms {
                    e: wv,
                    b1: (wa + wb) * hopf,
                    b2: C64::new(a * wa + b * wb - wv, 0.0),
                    e_z: C64::new(0.0, 0.0),
                }
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityTerms {
    pub e: f64,
    pub b1: C64,
    pub b2: C64,
    pub e_z: C64,
}

// ---------------------------------------------------------------------------
// Energies and Hopf products
// ---------------------------------------------------------------------------

fn degenerate(bad: &[C64]) -> Error {
    Error::DegenerateJacobian { count: bad.len(), first: bad[0] }
}

/// Midpoint-rule energy of `h` over `region` with central4 derivatives.
pub fn energy(h: &ComplexField, density: &EnergyDensity, region: &Region) -> Result<f64> {
    let pair = field::wirtinger(h, Scheme::Central4)?;
    energy_with(h, &pair, density, region)
}

/// Energy with supplied derivatives (e.g. closed forms).
pub fn energy_with(h: &ComplexField, pair: &FieldPair, density: &EnergyDensity, region: &Region) -> Result<f64> {
    field::check_same_grid(h.grid(), pair.grid())?;
    let mut total = 0.0;
    let mut used = 0usize;
    let mut bad = Vec::new();
    for (i, z, w) in h.in_region(region) {
        if pair.is_excluded(i) {
            continue;
        }
        match density.terms(z, w, pair.d_z.values()[i], pair.d_zbar.values()[i]) {
            Some(t) if t.e.is_finite() => {
                total += t.e;
                used += 1;
            }
            Some(t) => {
                return Err(Error::invalid(format!("energy density is {} at z = {z}", t.e)));
            }
            None => bad.push(z),
        }
    }
    if !bad.is_empty() {
        return Err(degenerate(&bad));
    }
    if used == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(total * h.grid().cell_area())
}

/// Pointwise `h_z conj(h_zbar)`.
pub fn hopf_product(pair: &FieldPair) -> ComplexField {
    pair.d_z.zip_map(&pair.d_zbar, |_, a, b| a * b.conj()).expect("a FieldPair shares one grid")
}

pub const NORM_GUARD: f64 = 1e-30;

/// `||field_zbar||_2 / max(||field||_2, 1e-30)` over samples of `region`
/// whose stencil is complete, using central4 differences.
pub fn analyticity_residual(field: &ComplexField, region: &Region) -> Result<f64> {
    let pair = field::wirtinger(field, Scheme::Central4)?;
    let (mut num, mut den) = (0.0, 0.0);
    let mut used = 0usize;
    for (i, _, v) in field.in_region(region) {
        if pair.is_excluded(i) {
            continue;
        }
        used += 1;
        num += pair.d_zbar.values()[i].norm_sqr();
        den += v.norm_sqr();
    }
    if used == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(num.sqrt() / den.sqrt().max(NORM_GUARD))
}

/// `iint ((|f_z| + |f_zbar|)^2 / (|f_z|^2 - |f_zbar|^2))^p` over `region`.
pub fn distortion_energy(f_pair: &FieldPair, p: f64, region: &Region) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("distortion exponent p = {p} must be >= 1")));
    }
    let grid = *f_pair.grid();
    let mut total = 0.0;
    let mut used = 0usize;
    let mut bad = Vec::new();
    for (i, z, fz) in f_pair.d_z.in_region(region) {
        if f_pair.is_excluded(i) {
            continue;
        }
        let fzb = f_pair.d_zbar.values()[i];
        let j = fz.norm_sqr() - fzb.norm_sqr();
        if !(j > 0.0) {
            bad.push(z);
            continue;
        }
        let k = (fz.norm() + fzb.norm()).powi(2) / j;
        total += k.powf(p);
        used += 1;
    }
    if !bad.is_empty() {
        return Err(degenerate(&bad));
    }
    if used == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(total * grid.cell_area())
}

// ---------------------------------------------------------------------------
// Inner-variational residuals
// ---------------------------------------------------------------------------

/// Test field `eta = (1 - |z - c|^2 / r^2)^3` on `B(c, r)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestBump {
    pub center: C64,
    pub radius: f64,
}

impl TestBump {
    pub fn new(center: C64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("bump radius {radius} must be positive")));
        }
        Ok(TestBump { center, radius })
    }

    fn q(&self, z: C64) -> Option<(C64, f64)> {
        let w = z - self.center;
        let q = 1.0 - w.norm_sqr() / (self.radius * self.radius);
        (q > 0.0).then_some((w, q))
    }

    pub fn eval(&self, z: C64) -> f64 {
        self.q(z).map_or(0.0, |(_, q)| q * q * q)
    }

    /// `(eta_z, eta_zbar)`.
    pub fn derivatives(&self, z: C64) -> (C64, C64) {
        match self.q(z) {
            None => (C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
            Some((w, q)) => {
                let c = -3.0 * q * q / (self.radius * self.radius);
                (c * w.conj(), c * w)
            }
        }
    }

    /// `||eta||_2 = r sqrt(pi / 7)`.
    pub fn l2_norm(&self) -> f64 {
        self.radius * (std::f64::consts::PI / 7.0).sqrt()
    }
}

fn check_bump(h: &ComplexField, pair: &FieldPair, eta: &TestBump) -> Result<()> {
    let grid = h.grid();
    let margin = 4.0 * grid.spacing();
    let reach = eta.radius + margin;
    let a = grid.half_width();
    if eta.center.re.abs() + reach > a || eta.center.im.abs() + reach > a {
        return Err(Error::Support(format!(
            "test field B({}, {}) comes within 4 delta of the grid edge",
            eta.center, eta.radius
        )));
    }
    let near = Region::disk_at(eta.center, reach);
    for i in 0..grid.len() {
        let z = grid.point_at(i);
        if near.contains(z) && (h.is_excluded(i) || pair.is_excluded(i)) {
            return Err(Error::Support(format!(
                "test field B({}, {}) comes within 4 delta of the excluded sample z = {z}",
                eta.center, eta.radius
            )));
        }
    }
    Ok(())
}

/// Weak-form pieces of the inner-variational equation against `eta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerResidual {
    /// `iint (B1 eta_zbar + B2 eta_z - E_z eta)`, the first variation
    /// `d/dt E[h(z + t eta)]` at `t = 0`.
    pub residual: C64,
    /// `iint (B1 eta_zbar + B2 eta_z)`.
    pub divergence: C64,
    /// `-iint E_z eta`.
    pub source: C64,
    pub eta_norm: f64,
}

/// Residual with central4 derivatives of `h`.
pub fn inner_variational_residual(h: &ComplexField, density: &EnergyDensity, eta: &TestBump) -> Result<InnerResidual> {
    let pair = field::wirtinger(h, Scheme::Central4)?;
    inner_variational_residual_with(h, &pair, density, eta)
}

pub fn inner_variational_residual_with(
    h: &ComplexField,
    pair: &FieldPair,
    density: &EnergyDensity,
    eta: &TestBump,
) -> Result<InnerResidual> {
    field::check_same_grid(h.grid(), pair.grid())?;
    check_bump(h, pair, eta)?;
    let grid = *h.grid();
    let support = Region::disk_at(eta.center, eta.radius);
    let idx: Vec<usize> = (0..grid.len()).filter(|&i| support.contains(grid.point_at(i))).collect();
    let parts: Vec<std::result::Result<(C64, C64), C64>> = idx
        .par_iter()
        .map(|&i| {
            let z = grid.point_at(i);
            let t = density
                .terms(z, h.values()[i], pair.d_z.values()[i], pair.d_zbar.values()[i])
                .ok_or(z)?;
            let (ez, ezb) = eta.derivatives(z);
            Ok((t.b1 * ezb + t.b2 * ez, -t.e_z * eta.eval(z)))
        })
        .collect();
    let mut div = C64::new(0.0, 0.0);
    let mut src = C64::new(0.0, 0.0);
    let mut bad = Vec::new();
    for p in parts {
        match p {
            Ok((d, s)) => {
                div += d;
                src += s;
            }
            Err(z) => bad.push(z),
        }
    }
    if !bad.is_empty() {
        return Err(degenerate(&bad));
    }
    let da = grid.cell_area();
    Ok(InnerResidual {
        residual: (div + src) * da,
        divergence: div * da,
        source: src * da,
        eta_norm: eta.l2_norm(),
    })
}

/// The weighted Dirichlet case: `divergence` pairs `2 rho h_z conj(h_zbar)`
/// with `eta_zbar` and `source` is `-iint rho_z (a + b) eta`, so `residual`
/// vanishes exactly when `d/dzbar [2 rho h_z conj(h_zbar)] + rho_z (a + b) = 0`
/// weakly.
pub fn weighted_residual(h: &ComplexField, weight: &Weight, eta: &TestBump) -> Result<InnerResidual> {
    inner_variational_residual(h, &EnergyDensity::Weighted(weight.clone()), eta)
}

// ---------------------------------------------------------------------------
// Conditions on F, Euler identity, inversion of Phi
// ---------------------------------------------------------------------------

/// Worst implied constants over samples of the closed octant, parametrised
/// by `tau = b / (a + b)` in `[0, 1/2]` and `a + b` in `{1e-3, 1, 1e3}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FConditionsReport {
    pub model: String,
    pub p: f64,
    pub samples: usize,
    /// All values and partials finite.
    pub finite: bool,
    /// `max |F(ta, tb) - t^p F(a, b)| / |t^p F(a, b)|`, `t` in `{1/2, 2}`.
    pub homogeneity: f64,
    /// `min F / (a + b)^p`, `max F / (a + b)^p`.
    pub f_lower: f64,
    pub f_upper: f64,
    /// `min (F_a + F_b) / (a + b)^(p-1)`, `max |grad F| / (a + b)^(p-1)`.
    pub grad_lower: f64,
    pub grad_upper: f64,
    /// `max |grad^2 F| / (a + b)^(p-2)`.
    pub hess_upper: f64,
}

pub const HOMOGENEITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-12;

impl FConditionsReport {
    pub fn to_report(&self) -> VerificationReport {
        let mut r = VerificationReport::new(format!("F_conditions[{}]", self.model));
        r.check_bool("continuity_C2", self.finite, "F and its partials finite on samples");
        r.check_le("homogeneity", self.homogeneity, HOMOGENEITY_TOL, format!("degree p = {}", self.p));
        r.check_ge("F_lower", self.f_lower, POSITIVITY_TOL, "min F / (a+b)^p");
        r.check_le("F_upper", self.f_upper, f64::MAX, "max F / (a+b)^p");
        r.check_ge("grad_lower", self.grad_lower, POSITIVITY_TOL, "min (F_a+F_b) / (a+b)^(p-1)");
        r.check_le("grad_upper", self.grad_upper, f64::MAX, "max |grad F| / (a+b)^(p-1)");
        r.check_le("hessian_upper", self.hess_upper, f64::MAX, "max |grad^2 F| / (a+b)^(p-2)");
        r
    }

    pub fn passed(&self) -> bool {
        self.to_report().passed()
    }
}

fn octant_samples(samples: usize, closed: bool) -> Vec<(f64, f64)> {
    let m = samples.max(3);
    let mut out = Vec::with_capacity(3 * m);
    for s in [1e-3, 1.0, 1e3] {
        for j in 0..m {
            let tau = if closed {
                0.5 * j as f64 / (m - 1) as f64
            } else {
                0.5 * (j as f64 + 0.5) / m as f64
            };
            out.push((s * (1.0 - tau), s * tau));
        }
    }
    out
}

pub fn check_f_conditions(f: &FModel, samples: usize) -> FConditionsReport {
    let p = f.p();
    let mut rep = FConditionsReport {
        model: f.name().to_string(),
        p,
        samples: 0,
        finite: true,
        homogeneity: 0.0,
        f_lower: f64::INFINITY,
        f_upper: 0.0,
        grad_lower: f64::INFINITY,
        grad_upper: 0.0,
        hess_upper: 0.0,
    };
    for (a, b) in octant_samples(samples, true) {
        let e = f.eval(a, b);
        let s = a + b;
        rep.samples += 1;
        let vals = [e.f, e.fa, e.fb, e.faa, e.fab, e.fbb];
        if vals.iter().any(|v| !v.is_finite()) {
            rep.finite = false;
            continue;
        }
        for t in [0.5, 2.0] {
            let scaled = f.eval(t * a, t * b).f;
            let expect = t.powf(p) * e.f;
            let d = (scaled - expect).abs() / expect.abs().max(f64::MIN_POSITIVE);
            rep.homogeneity = rep.homogeneity.max(if scaled == expect { 0.0 } else { d });
        }
        rep.f_lower = rep.f_lower.min(e.f / s.powf(p));
        rep.f_upper = rep.f_upper.max(e.f / s.powf(p));
        rep.grad_lower = rep.grad_lower.min((e.fa + e.fb) / s.powf(p - 1.0));
        rep.grad_upper = rep.grad_upper.max((e.fa.abs() + e.fb.abs()) / s.powf(p - 1.0));
        rep.hess_upper = rep.hess_upper.max((e.faa.abs() + e.fab.abs() + e.fbb.abs()) / s.powf(p - 2.0));
    }
    rep
}

/// `max |a W_a + b W_b - W| / |W|` over samples with `a > b > 0`.
pub fn euler_identity_check(f: &FModel, samples: usize) -> f64 {
    octant_samples(samples, false)
        .into_iter()
        .map(|(a, b)| {
            let (w, wa, wb) = f.w_parts(a, b);
            let d = a * wa + b * wb - w;
            if d == 0.0 {
                0.0
            } else {
                d.abs() / w.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Monotone window of `Phi` on `[0, k0]`, `k0 <= 1/2`, with `s0 = Phi(k0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KWindow {
    pub k0: f64,
    pub s0: f64,
    /// `Phi'(0) = F_a(1, 0) + F_b(1, 0)`.
    pub phi_prime0: f64,
}

pub const WINDOW_SCAN: usize = 4096;

pub fn k_window(f: &FModel) -> Result<KWindow> {
    let (_, d0) = f.phi_k(0.0);
    if !(d0 > 0.0 && d0.is_finite()) {
        return Err(Error::HypothesisViolated(format!(
            "Phi'(0) = F_a(1,0) + F_b(1,0) = {d0} is not positive for {}",
            f.name()
        )));
    }
    let mut k0 = 0.5;
    for j in 1..=WINDOW_SCAN {
        let k = 0.5 * j as f64 / WINDOW_SCAN as f64;
        let (v, d) = f.phi_k(k);
        if !(d > 0.0 && v.is_finite()) {
            k0 = 0.5 * (j - 1) as f64 / WINDOW_SCAN as f64;
            break;
        }
    }
    if k0 == 0.0 {
        return Err(Error::HypothesisViolated(format!("Phi is not increasing near 0 for {}", f.name())));
    }
    Ok(KWindow { k0, s0: f.phi_k(k0).0, phi_prime0: d0 })
}

pub const K_TOL: f64 = 1e-12;

/// The unique `k` in `[0, k0]` with `Phi(k) = s`, by Newton steps kept
/// inside a shrinking bracket.
pub fn invert_k(f: &FModel, s: f64) -> Result<f64> {
    let w = k_window(f)?;
    invert_k_in(f, &w, s)
}

pub fn invert_k_in(f: &FModel, w: &KWindow, s: f64) -> Result<f64> {
    if !(s >= 0.0) || s > w.s0 {
        return Err(Error::OutsideWindow { s, s0: w.s0, k0: w.k0 });
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, w.k0);
    let mut k = (s / w.phi_prime0).min(hi);
    for _ in 0..200 {
        let (v, d) = f.phi_k(k);
        let r = v - s;
        if r == 0.0 {
            return Ok(k);
        }
        if r > 0.0 {
            hi = k;
        } else {
            lo = k;
        }
        let mut next = k - r / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - k).abs() <= K_TOL * 1e-3 * k.max(1e-300) || hi - lo <= f64::EPSILON * hi {
            return Ok(next);
        }
        k = next;
    }
    Ok(k)
}

/// `Gamma(s) = k / s`, `Gamma(0) = 1 / Phi'(0)`.
pub fn gamma(f: &FModel, w: &KWindow, s: f64) -> Result<f64> {
    if s == 0.0 {
        return Ok(1.0 / w.phi_prime0);
    }
    Ok(invert_k_in(f, w, s)? / s)
}

/// `h_zbar` from `conj(h_zbar) = (phi / h_z) Gamma(|phi| / |h_z|^2)`.
pub fn recover_hzbar(f: &FModel, phi: C64, hz: C64) -> Result<C64> {
    let w = k_window(f)?;
    if phi.norm() == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    if hz.norm() == 0.0 {
        return Err(Error::OutsideWindow { s: f64::INFINITY, s0: w.s0, k0: w.k0 });
    }
    let s = phi.norm() / hz.norm_sqr();
    Ok((phi / hz * gamma(f, &w, s)?).conj())
}
