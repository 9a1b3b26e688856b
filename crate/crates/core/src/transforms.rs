//! Cauchy transform `C w(z) = (1/pi) ∬ w(t) [1/(z - t) + 1/t]` and
//! Beurling–Ahlfors transform `S w(z) = -(1/pi) ∬ w(t) / (z - t)^2`, as FFT
//! multipliers on the grid box, plus a direct-summation oracle.
//!
//! The periodic multiplier `1/(pi i zeta)` cannot represent the `1/z` tail
//! of a density with nonzero mass. The mass is therefore split off onto a
//! smooth radial bump whose transforms are known in closed form; only the
//! zero-mass remainder goes through the FFT, and its periodization error
//! decays like `1/A^2`. Both symbols carry a high-order exponential filter
//! near the Nyquist edge.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{self, ComplexField, Scheme};
use crate::grid::{GridSpec, Region};
use crate::spectral::{self, Fft2};

type C64 = Complex64;

/// Smallest box half-width for which the transforms accept `2D`-supported input.
pub const MIN_HALF_WIDTH: f64 = 4.0;

/// Exponent of the mass-carrying bump `b(r) = c (1 - r^2/4)^k` on `r < 2`.
const BUMP_POWER: i32 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Fft,
    Quadrature,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Cauchy,
    Beurling,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformDiagnostics {
    pub method: Method,
    pub periodization_box: f64,
    /// `||d_zbar C w - w||_2 / ||w||_2`, with the derivative taken by central
    /// differences so it is independent of the multiplier.
    pub residual_didentity: f64,
}

/// Unit-mass bump used for the mass split, and its closed-form transforms.
mod bump {
    use super::*;

    const K: i32 = BUMP_POWER;

    fn c() -> f64 {
        (K as f64 + 1.0) / (4.0 * PI)
    }

    pub fn density(r: f64) -> f64 {
        if r >= 2.0 {
            0.0
        } else {
            c() * (1.0 - r * r / 4.0).powi(K)
        }
    }

    /// `∫_0^s b(r) r dr`
    fn mass_profile(s: f64) -> f64 {
        let tail = if s >= 2.0 { 0.0 } else { (1.0 - s * s / 4.0).powi(K + 1) };
        2.0 * c() / (K as f64 + 1.0) * (1.0 - tail)
    }

    /// `C b(z) = (2/z) ∫_0^|z| b(r) r dr`, zero at the origin.
    pub fn cauchy(z: C64) -> C64 {
        let r = z.norm();
        if r == 0.0 {
            return C64::new(0.0, 0.0);
        }
        2.0 * mass_profile(r) / z
    }

    /// `S b(z) = -2 B(|z|)/z^2 + b(|z|) zbar/z`, extended by its limit 0 at the origin.
    pub fn beurling(z: C64) -> C64 {
        let r = z.norm();
        if r == 0.0 {
            return C64::new(0.0, 0.0);
        }
        -2.0 * mass_profile(r) / (z * z) + density(r) * z.conj() / z
    }
}

/// Order of the exponential filter `exp(-36 (|xi|/xi_N)^q - 36 (|eta|/eta_N)^q)`
/// applied to the Cauchy and Beurling symbols.
pub const FILTER_ORDER: i32 = 16;

/// `conj(zeta)/zeta` jumps across the edge of the sampled frequency square,
/// which makes the discrete kernel ring along the axes. The filter is 1 to
/// within `1e-12` below a quarter of the Nyquist frequency.
fn filter(zeta: C64, nyquist: f64) -> f64 {
    let q = FILTER_ORDER;
    (-36.0 * ((zeta.re.abs() / nyquist).powi(q) + (zeta.im.abs() / nyquist).powi(q))).exp()
}

/// Cached FFT plan, multipliers and bump samples for one grid.
pub struct Plan {
    grid: GridSpec,
    fft: Fft2,
    /// `pi i zeta`, the symbol of `d_zbar`
    dzbar_symbol: Vec<C64>,
    /// `pi i conj(zeta)`, the symbol of `d_z`
    dz_symbol: Vec<C64>,
    cauchy_symbol: Vec<C64>,
    beurling_symbol: Vec<C64>,
    /// bump sampled and normalized to unit discrete mass
    bump: Vec<f64>,
    bump_cauchy: Vec<C64>,
    bump_beurling: Vec<C64>,
}

impl Plan {
    pub fn new(grid: GridSpec) -> Result<Self> {
        Self::with_perturbation(grid, 0.0)
    }

    /// A plan whose multipliers are scaled by `1 + eps`; a fault-injection
    /// hook for testing the self-test harness.
    pub fn perturbed(grid: GridSpec, eps: f64) -> Result<Self> {
        Self::with_perturbation(grid, eps)
    }

    fn with_perturbation(grid: GridSpec, eps: f64) -> Result<Self> {
        if grid.half_width() < MIN_HALF_WIDTH {
            return Err(Error::InvalidGrid(format!(
                "transforms need A >= {MIN_HALF_WIDTH} to hold 2D with a periodization margin, got A = {}",
                grid.half_width()
            )));
        }
        let n = grid.n();
        let zeta = spectral::zeta_table(&grid);
        let zero = C64::new(0.0, 0.0);
        let scale = 1.0 + eps;
        let nyquist = n as f64 / (4.0 * grid.half_width());
        let mut dzbar_symbol = vec![zero; grid.len()];
        let mut dz_symbol = vec![zero; grid.len()];
        let mut cauchy_symbol = vec![zero; grid.len()];
        let mut beurling_symbol = vec![zero; grid.len()];
        for idx in 0..grid.len() {
            let (j, k) = grid.coords(idx);
            let z = zeta[idx];
            if spectral::is_nyquist(j, k, n) || z.norm() == 0.0 {
                continue;
            }
            dzbar_symbol[idx] = C64::new(0.0, PI) * z;
            dz_symbol[idx] = C64::new(0.0, PI) * z.conj();
            let filt = filter(z, nyquist);
            cauchy_symbol[idx] = filt * scale / (C64::new(0.0, PI) * z);
            beurling_symbol[idx] = filt * scale * z.conj() / z;
        }
        let raw: Vec<f64> = grid.points().map(|z| bump::density(z.norm())).collect();
        let mass: f64 = raw.iter().sum::<f64>() * grid.cell_area();
        let bump = raw.iter().map(|v| v / mass).collect();
        let bump_cauchy = grid.points().map(bump::cauchy).collect();
        let bump_beurling = grid.points().map(bump::beurling).collect();
        Ok(Self {
            grid,
            fft: Fft2::new(n),
            dzbar_symbol,
            dz_symbol,
            cauchy_symbol,
            beurling_symbol,
            bump,
            bump_cauchy,
            bump_beurling,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn check_input(&self, omega: &ComplexField) -> Result<()> {
        field::check_same_grid(&self.grid, omega.grid())?;
        if omega.mask().is_some() {
            return Err(Error::ExcludedPoints);
        }
        if !omega.is_supported_in_2d() {
            return Err(Error::Support(
                "transform input must be flagged as supported in 2D".into(),
            ));
        }
        Ok(())
    }

    /// Total mass and the Fourier coefficients of the zero-mass remainder.
    fn split(&self, omega: &ComplexField) -> (C64, Vec<C64>) {
        let mass: C64 = omega.values().iter().sum::<C64>() * self.grid.cell_area();
        let mut rest: Vec<C64> = omega
            .values()
            .iter()
            .zip(&self.bump)
            .map(|(w, b)| w - mass * b)
            .collect();
        self.fft.forward(&mut rest);
        (mass, rest)
    }

    fn apply(&self, hat: &[C64], symbol: &[C64]) -> Vec<C64> {
        let mut out: Vec<C64> = hat.iter().zip(symbol).map(|(h, s)| h * s).collect();
        self.fft.inverse(&mut out);
        out
    }

    fn field(&self, values: Vec<C64>) -> ComplexField {
        ComplexField::from_parts(self.grid, values, None).expect("transform output is finite")
    }

    /// `C w`, normalized so the sample at the origin is exactly zero.
    pub fn cauchy(&self, omega: &ComplexField) -> Result<ComplexField> {
        self.check_input(omega)?;
        let (mass, hat) = self.split(omega);
        let mut f = self.apply(&hat, &self.cauchy_symbol);
        for (v, b) in f.iter_mut().zip(&self.bump_cauchy) {
            *v += mass * b;
        }
        let f0 = f[self.grid.origin_index()];
        for v in f.iter_mut() {
            *v -= f0;
        }
        Ok(self.field(f))
    }

    /// `S w` with the multiplier `conj(zeta)/zeta` (zero at `zeta = 0`).
    pub fn beurling(&self, omega: &ComplexField) -> Result<ComplexField> {
        self.check_input(omega)?;
        let (mass, hat) = self.split(omega);
        let mut s = self.apply(&hat, &self.beurling_symbol);
        for (v, b) in s.iter_mut().zip(&self.bump_beurling) {
            *v += mass * b;
        }
        Ok(self.field(s))
    }

    /// `d_z (C w)` computed by composing the spectral `d_z` with the
    /// real-space Cauchy remainder; agrees with [`Plan::beurling`] to roundoff.
    pub fn cauchy_dz(&self, omega: &ComplexField) -> Result<ComplexField> {
        self.check_input(omega)?;
        let (mass, hat) = self.split(omega);
        let mut u = self.apply(&hat, &self.cauchy_symbol);
        self.fft.forward(&mut u);
        let mut du = self.apply(&u, &self.dz_symbol);
        for (v, b) in du.iter_mut().zip(&self.bump_beurling) {
            *v += mass * b;
        }
        Ok(self.field(du))
    }

    /// Spectral `d_zbar` of an unmasked field.
    pub fn dzbar(&self, f: &ComplexField) -> Result<ComplexField> {
        field::check_same_grid(&self.grid, f.grid())?;
        if f.mask().is_some() {
            return Err(Error::ExcludedPoints);
        }
        let mut hat = f.values().to_vec();
        self.fft.forward(&mut hat);
        Ok(self.field(self.apply(&hat, &self.dzbar_symbol)))
    }

    /// The bare periodic multiplier `conj(zeta)/zeta` on any unmasked field.
    pub fn periodic_beurling(&self, omega: &ComplexField) -> Result<ComplexField> {
        field::check_same_grid(&self.grid, omega.grid())?;
        if omega.mask().is_some() {
            return Err(Error::ExcludedPoints);
        }
        let mut hat = omega.values().to_vec();
        self.fft.forward(&mut hat);
        Ok(self.field(self.apply(&hat, &self.beurling_symbol)))
    }

    /// The bare periodic multiplier `1/(pi i zeta)` on any unmasked field.
    pub fn periodic_cauchy(&self, omega: &ComplexField) -> Result<ComplexField> {
        field::check_same_grid(&self.grid, omega.grid())?;
        if omega.mask().is_some() {
            return Err(Error::ExcludedPoints);
        }
        let mut hat = omega.values().to_vec();
        self.fft.forward(&mut hat);
        Ok(self.field(self.apply(&hat, &self.cauchy_symbol)))
    }
}

pub fn cauchy(omega: &ComplexField) -> Result<ComplexField> {
    Plan::new(*omega.grid())?.cauchy(omega)
}

pub fn beurling(omega: &ComplexField) -> Result<ComplexField> {
    Plan::new(*omega.grid())?.beurling(omega)
}

/// `||d_zbar f - w||_2 / ||w||_2` with `d_zbar` by fourth-order central
/// differences, over the samples where the stencil fits.
pub fn identity_residual(omega: &ComplexField, f: &ComplexField) -> Result<f64> {
    field::check_same_grid(omega.grid(), f.grid())?;
    let plain = ComplexField::from_parts(*f.grid(), f.values().to_vec(), None)?;
    let pair = field::wirtinger(&plain, Scheme::Central4)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, v) in pair.d_zbar.active() {
        let w = omega.values()[i];
        num += (v - w).norm_sqr();
        den += w.norm_sqr();
    }
    if den == 0.0 {
        return Err(Error::invalid("identity residual of a zero density"));
    }
    Ok((num / den).sqrt())
}

/// Cauchy transform with its diagnostics record.
pub fn cauchy_with_diagnostics(omega: &ComplexField) -> Result<(ComplexField, TransformDiagnostics)> {
    let f = cauchy(omega)?;
    let residual = identity_residual(omega, &f)?;
    Ok((
        f,
        TransformDiagnostics {
            method: Method::Fft,
            periodization_box: omega.grid().half_width(),
            residual_didentity: residual,
        },
    ))
}

/// `sup_z |C w(z)| / (|z|^{1 - 2/p} ||w||_p)` over the grid (origin excluded):
/// an empirical lower bound for the decay constant.
pub fn cauchy_decay_check(omega: &ComplexField, p: f64) -> Result<f64> {
    if !(p > 2.0) {
        return Err(Error::invalid(format!("decay exponent needs p > 2, got {p}")));
    }
    let norm = field::lp_norm(omega, p, &Region::Plane)?;
    if norm == 0.0 {
        return Err(Error::invalid("decay ratio undefined for a zero density"));
    }
    let f = cauchy(omega)?;
    let e = 1.0 - 2.0 / p;
    let grid = *f.grid();
    Ok(f
        .values()
        .iter()
        .enumerate()
        .filter_map(|(i, v)| {
            let r = grid.point_at(i).norm();
            (r > 0.0).then(|| v.norm() / r.powf(e))
        })
        .fold(0.0, f64::max)
        / norm)
}

/// Direct midpoint-rule summation of the kernel at each probe. Probes are
/// snapped to the nearest grid sample; the cell centered on the probe (and,
/// for the `1/t` normalization, the cell at the origin) contributes zero by
/// symmetry.
pub fn quadrature_oracle(omega: &ComplexField, kernel: Kernel, probes: &[C64]) -> Result<Vec<C64>> {
    if omega.mask().is_some() {
        return Err(Error::ExcludedPoints);
    }
    let grid = *omega.grid();
    let area = grid.cell_area();
    let nonzero: Vec<(C64, C64)> = omega
        .values()
        .iter()
        .enumerate()
        .filter(|(_, w)| w.norm() != 0.0)
        .map(|(i, w)| (grid.point_at(i), *w))
        .collect();
    probes
        .par_iter()
        .map(|&probe| {
            let (j, k) = grid
                .nearest(probe)
                .ok_or_else(|| Error::invalid(format!("probe {probe} lies outside the grid box")))?;
            let z = grid.point(j, k);
            let mut acc = C64::new(0.0, 0.0);
            for &(t, w) in &nonzero {
                let d = z - t;
                let dn = d.norm();
                match kernel {
                    Kernel::Cauchy => {
                        if dn > 0.0 {
                            acc += w / d;
                        }
                        if t.norm() > 0.0 {
                            acc += w / t;
                        }
                    }
                    Kernel::Beurling => {
                        if dn > 0.0 {
                            acc -= w / (d * d);
                        }
                    }
                }
            }
            Ok(acc * area / PI)
        })
        .collect()
}

/// Snap `z` to the grid sample used by [`quadrature_oracle`].
pub fn snap(grid: &GridSpec, z: C64) -> Option<C64> {
    grid.nearest(z).map(|(j, k)| grid.point(j, k))
}
