//! Sampled complex and real fields on a [`GridSpec`], discrete Wirtinger
//! calculus, and the norm / oscillation / Lipschitz estimators.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Region};
use crate::spectral::{self, Fft2};

type C64 = Complex64;

/// Relative threshold below which a sample outside `2D` counts as zero.
pub const SUPPORT_TOL: f64 = 1e-12;

/// A complex function sampled on a grid. `mask[i] == true` marks an excluded
/// sample (branch cut, singular point, stencil fallout).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    values: Vec<C64>,
    mask: Option<Vec<bool>>,
    supported_in_2d: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    grid: GridSpec,
    values: Vec<f64>,
    mask: Option<Vec<bool>>,
}

/// The two Wirtinger derivatives of a field.
#[derive(Clone, Debug)]
pub struct FieldPair {
    pub d_z: ComplexField,
    pub d_zbar: ComplexField,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Spectral,
    Central2,
    Central4,
}

/// Sample `f` at every grid point. Points where `mask` returns `true` are
/// recorded as excluded and `f` is not evaluated there.
pub fn sample<F>(grid: GridSpec, f: F, mask: Option<&(dyn Fn(C64) -> bool + Sync)>) -> Result<ComplexField>
where
    F: Fn(C64) -> C64 + Sync,
{
    let excluded: Option<Vec<bool>> =
        mask.map(|m| (0..grid.len()).into_par_iter().map(|i| m(grid.point_at(i))).collect());
    let values: Vec<C64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if excluded.as_ref().map_or(false, |m| m[i]) {
                C64::new(0.0, 0.0)
            } else {
                f(grid.point_at(i))
            }
        })
        .collect();
    ComplexField::from_parts(grid, values, excluded)
}

impl ComplexField {
    /// Build a field from raw samples; non-finite unmasked samples are rejected.
    pub fn from_parts(grid: GridSpec, values: Vec<C64>, mask: Option<Vec<bool>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(m) = &mask {
            if m.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "mask has {} entries, grid has {}",
                    m.len(),
                    grid.len()
                )));
            }
        }
        let mask = mask.filter(|m| m.iter().any(|&x| x));
        for (i, v) in values.iter().enumerate() {
            let excluded = mask.as_ref().map_or(false, |m| m[i]);
            if !excluded && !(v.re.is_finite() && v.im.is_finite()) {
                let (j, k) = grid.coords(i);
                return Err(Error::NonFinite {
                    j,
                    k,
                    z: grid.point(j, k),
                    value: *v,
                });
            }
        }
        let mut values = values;
        if let Some(m) = &mask {
            for (v, &e) in values.iter_mut().zip(m) {
                if e {
                    *v = C64::new(0.0, 0.0);
                }
            }
        }
        Ok(Self {
            grid,
            values,
            mask,
            supported_in_2d: false,
        })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.len()],
            mask: None,
            supported_in_2d: true,
        }
    }

    /// Flag the field as supported in `2D`, checking that every sample with
    /// `|z| > 2` is negligible.
    pub fn into_supported(mut self) -> Result<Self> {
        let scale = self.max_abs();
        for (i, v) in self.values.iter().enumerate() {
            let z = self.grid.point_at(i);
            if z.norm() > 2.0 && v.norm() > SUPPORT_TOL * scale {
                return Err(Error::Support(format!(
                    "value {v} at z = {z} lies outside 2D"
                )));
            }
        }
        if self.mask.is_some() {
            return Err(Error::Support(
                "a field supported in 2D cannot carry excluded samples".into(),
            ));
        }
        self.supported_in_2d = true;
        Ok(self)
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    #[inline]
    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    #[inline]
    pub fn is_supported_in_2d(&self) -> bool {
        self.supported_in_2d
    }

    #[inline]
    pub fn is_excluded(&self, idx: usize) -> bool {
        self.mask.as_ref().map_or(false, |m| m[idx])
    }

    pub fn excluded_count(&self) -> usize {
        self.mask.as_ref().map_or(0, |m| m.iter().filter(|&&x| x).count())
    }

    #[inline]
    pub fn at(&self, j: usize, k: usize) -> C64 {
        self.values[self.grid.index(j, k)]
    }

    /// Value at the sample nearest `z`, if it exists and is not excluded.
    pub fn value_near(&self, z: C64) -> Option<C64> {
        let (j, k) = self.grid.nearest(z)?;
        let idx = self.grid.index(j, k);
        (!self.is_excluded(idx)).then(|| self.values[idx])
    }

    pub fn max_abs(&self) -> f64 {
        self.active()
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    /// Indices and values of non-excluded samples.
    pub fn active(&self) -> impl Iterator<Item = (usize, C64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(move |(i, _)| !self.is_excluded(*i))
            .map(|(i, v)| (i, *v))
    }

    /// Non-excluded samples inside `region`, as `(index, z, value)`.
    pub fn in_region<'a>(&'a self, region: &'a Region) -> impl Iterator<Item = (usize, C64, C64)> + 'a {
        self.active().filter_map(move |(i, v)| {
            let z = self.grid.point_at(i);
            region.contains(z).then_some((i, z, v))
        })
    }

    /// Pointwise map `f(z, value)`. The mask is kept; the support flag is
    /// dropped since `f` need not preserve zeros.
    pub fn map<F: Fn(C64, C64) -> C64 + Sync>(&self, f: F) -> ComplexField {
        let values = self
            .values
            .par_iter()
            .enumerate()
            .map(|(i, v)| {
                if self.is_excluded(i) {
                    C64::new(0.0, 0.0)
                } else {
                    f(self.grid.point_at(i), *v)
                }
            })
            .collect();
        ComplexField {
            grid: self.grid,
            values,
            mask: self.mask.clone(),
            supported_in_2d: false,
        }
    }

    /// Pointwise combination of two fields on the same grid; masks are united.
    pub fn zip_map<F: Fn(C64, C64, C64) -> C64 + Sync>(
        &self,
        other: &ComplexField,
        f: F,
    ) -> Result<ComplexField> {
        check_same_grid(&self.grid, &other.grid)?;
        let mask = union_mask(self.mask.as_deref(), other.mask.as_deref());
        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                if mask.as_ref().map_or(false, |m| m[i]) {
                    C64::new(0.0, 0.0)
                } else {
                    f(self.grid.point_at(i), self.values[i], other.values[i])
                }
            })
            .collect();
        Ok(ComplexField {
            grid: self.grid,
            values,
            mask,
            supported_in_2d: false,
        })
    }

    pub fn sub(&self, other: &ComplexField) -> Result<ComplexField> {
        let mut out = self.zip_map(other, |_, a, b| a - b)?;
        out.supported_in_2d = self.supported_in_2d && other.supported_in_2d;
        Ok(out)
    }

    pub fn add(&self, other: &ComplexField) -> Result<ComplexField> {
        let mut out = self.zip_map(other, |_, a, b| a + b)?;
        out.supported_in_2d = self.supported_in_2d && other.supported_in_2d;
        Ok(out)
    }

    pub fn scale(&self, c: C64) -> ComplexField {
        let mut out = self.map(|_, v| v * c);
        out.supported_in_2d = self.supported_in_2d;
        out
    }

    /// Exclude additional samples.
    pub fn with_mask(mut self, extra: &[bool]) -> Self {
        let merged = union_mask(self.mask.as_deref(), Some(extra));
        if let Some(m) = &merged {
            for (v, &e) in self.values.iter_mut().zip(m) {
                if e {
                    *v = C64::new(0.0, 0.0);
                }
            }
            self.supported_in_2d = false;
        }
        self.mask = merged;
        self
    }

    /// Translate by whole grid cells, filling with zeros.
    pub fn shifted(&self, dj: i64, dk: i64) -> ComplexField {
        let n = self.grid.n() as i64;
        let mut values = vec![C64::new(0.0, 0.0); self.grid.len()];
        for k in 0..n {
            for j in 0..n {
                let (sj, sk) = (j - dj, k - dk);
                if (0..n).contains(&sj) && (0..n).contains(&sk) {
                    values[(k * n + j) as usize] = self.values[(sk * n + sj) as usize];
                }
            }
        }
        ComplexField {
            grid: self.grid,
            values,
            mask: None,
            supported_in_2d: self.supported_in_2d,
        }
    }
}

impl RealField {
    pub fn new(grid: GridSpec, values: Vec<f64>, mask: Option<Vec<bool>>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values, mask }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn is_excluded(&self, idx: usize) -> bool {
        self.mask.as_ref().map_or(false, |m| m[idx])
    }

    pub fn in_region<'a>(&'a self, region: &'a Region) -> impl Iterator<Item = (usize, C64, f64)> + 'a {
        self.values.iter().enumerate().filter_map(move |(i, v)| {
            if self.is_excluded(i) {
                return None;
            }
            let z = self.grid.point_at(i);
            region.contains(z).then_some((i, z, *v))
        })
    }

    pub fn min_in(&self, region: &Region) -> Option<f64> {
        self.in_region(region).map(|(_, _, v)| v).reduce(f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.is_excluded(*i))
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }
}

impl FieldPair {
    pub fn new(d_z: ComplexField, d_zbar: ComplexField) -> Result<Self> {
        check_same_grid(d_z.grid(), d_zbar.grid())?;
        Ok(Self { d_z, d_zbar })
    }

    pub fn grid(&self) -> &GridSpec {
        self.d_z.grid()
    }

    pub fn is_excluded(&self, idx: usize) -> bool {
        self.d_z.is_excluded(idx) || self.d_zbar.is_excluded(idx)
    }
}

pub(crate) fn check_same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!(
            "(A = {}, n = {}) vs (A = {}, n = {})",
            a.half_width(),
            a.n(),
            b.half_width(),
            b.n()
        )));
    }
    Ok(())
}

fn union_mask(a: Option<&[bool]>, b: Option<&[bool]>) -> Option<Vec<bool>> {
    match (a, b) {
        (None, None) => None,
        (Some(m), None) | (None, Some(m)) => Some(m.to_vec()),
        (Some(x), Some(y)) => Some(x.iter().zip(y).map(|(p, q)| *p || *q).collect()),
    }
}

// ---------------------------------------------------------------------------
// Wirtinger derivatives
// ---------------------------------------------------------------------------

/// Discrete `h_z = (d_x - i d_y) h / 2` and `h_zbar = (d_x + i d_y) h / 2`.
pub fn wirtinger(field: &ComplexField, scheme: Scheme) -> Result<FieldPair> {
    match scheme {
        Scheme::Spectral => wirtinger_spectral(field),
        Scheme::Central2 => Ok(wirtinger_stencil(field, &[(1, 0.5)])),
        Scheme::Central4 => Ok(wirtinger_stencil(field, &[(1, 2.0 / 3.0), (2, -1.0 / 12.0)])),
    }
}

/// Antisymmetric stencil `sum_s w_s (f(x+s) - f(x-s)) / delta`.
fn wirtinger_stencil(field: &ComplexField, taps: &[(i64, f64)]) -> FieldPair {
    let grid = *field.grid();
    let n = grid.n() as i64;
    let d = grid.spacing();
    let periodic = field.is_supported_in_2d();
    let reach = taps.iter().map(|t| t.0).max().unwrap_or(1);

    let fetch = |j: i64, k: i64| -> Option<C64> {
        let (j, k) = if periodic {
            (j.rem_euclid(n), k.rem_euclid(n))
        } else if (0..n).contains(&j) && (0..n).contains(&k) {
            (j, k)
        } else {
            return None;
        };
        let idx = (k * n + j) as usize;
        (!field.is_excluded(idx)).then(|| field.values[idx])
    };

    let results: Vec<Option<(C64, C64)>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            if field.is_excluded(idx) {
                return None;
            }
            let (j, k) = grid.coords(idx);
            let (j, k) = (j as i64, k as i64);
            if !periodic && (j < reach || k < reach || j >= n - reach || k >= n - reach) {
                return None;
            }
            let mut dx = C64::new(0.0, 0.0);
            let mut dy = C64::new(0.0, 0.0);
            for &(s, w) in taps {
                dx += (fetch(j + s, k)? - fetch(j - s, k)?) * w;
                dy += (fetch(j, k + s)? - fetch(j, k - s)?) * w;
            }
            dx /= d;
            dy /= d;
            let i = C64::new(0.0, 1.0);
            Some(((dx - i * dy) * 0.5, (dx + i * dy) * 0.5))
        })
        .collect();

    let mut mask = vec![false; grid.len()];
    let mut dz = vec![C64::new(0.0, 0.0); grid.len()];
    let mut dzb = vec![C64::new(0.0, 0.0); grid.len()];
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Some((a, b)) => {
                dz[i] = a;
                dzb[i] = b;
            }
            None => mask[i] = true,
        }
    }
    let mask = mask.iter().any(|&x| x).then_some(mask);
    let mk = |values| ComplexField {
        grid,
        values,
        mask: mask.clone(),
        supported_in_2d: false,
    };
    FieldPair {
        d_z: mk(dz),
        d_zbar: mk(dzb),
    }
}

fn wirtinger_spectral(field: &ComplexField) -> Result<FieldPair> {
    if field.mask.is_some() {
        return Err(Error::ExcludedPoints);
    }
    let grid = *field.grid();
    let n = grid.n();
    let fft = Fft2::new(n);
    let mut hat = field.values.clone();
    fft.forward(&mut hat);
    let zeta = spectral::zeta_table(&grid);
    let pi = std::f64::consts::PI;
    let mut dz = hat.clone();
    let mut dzb = hat;
    for idx in 0..grid.len() {
        let (j, k) = grid.coords(idx);
        if spectral::is_nyquist(j, k, n) {
            dz[idx] = C64::new(0.0, 0.0);
            dzb[idx] = C64::new(0.0, 0.0);
            continue;
        }
        // d_x -> 2 pi i xi, d_y -> 2 pi i eta
        let z = zeta[idx];
        dz[idx] *= C64::new(0.0, pi) * z.conj();
        dzb[idx] *= C64::new(0.0, pi) * z;
    }
    fft.inverse(&mut dz);
    fft.inverse(&mut dzb);
    let mk = |values| ComplexField {
        grid,
        values,
        mask: None,
        supported_in_2d: false,
    };
    Ok(FieldPair {
        d_z: mk(dz),
        d_zbar: mk(dzb),
    })
}

/// Pointwise `|h_z|^2 - |h_zbar|^2`.
pub fn jacobian(pair: &FieldPair) -> RealField {
    let grid = *pair.grid();
    let mut mask = vec![false; grid.len()];
    let values = (0..grid.len())
        .map(|i| {
            if pair.is_excluded(i) {
                mask[i] = true;
                0.0
            } else {
                pair.d_z.values[i].norm_sqr() - pair.d_zbar.values[i].norm_sqr()
            }
        })
        .collect();
    let mask = mask.iter().any(|&x| x).then_some(mask);
    RealField::new(grid, values, mask)
}

// ---------------------------------------------------------------------------
// Norms and estimators
// ---------------------------------------------------------------------------

/// Discrete `L^p` norm over the non-excluded samples in `region`;
/// `p = f64::INFINITY` gives the sup.
pub fn lp_norm(field: &ComplexField, p: f64, region: &Region) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("p must be >= 1, got {p}")));
    }
    let mut count = 0usize;
    let mut acc = 0.0f64;
    for (_, _, v) in field.in_region(region) {
        count += 1;
        let m = v.norm();
        if p.is_infinite() {
            acc = acc.max(m);
        } else {
            acc += m.powf(p);
        }
    }
    if count == 0 {
        return Err(Error::EmptyRegion);
    }
    if p.is_infinite() {
        Ok(acc)
    } else {
        Ok((acc * field.grid.cell_area()).powf(1.0 / p))
    }
}

/// `L^p` norm over the whole box, skipping the region test.
pub(crate) fn lp_norm_all(values: &[C64], p: f64, cell_area: f64) -> f64 {
    if p.is_infinite() {
        values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    } else if p == 2.0 {
        (values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell_area).sqrt()
    } else {
        (values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * cell_area).powf(1.0 / p)
    }
}

/// Translation-difference seminorm `sup_tau ||w(.+tau) - w||_p / |tau|^alpha`
/// over dyadic shifts in eight directions.
pub fn besov_seminorm(field: &ComplexField, alpha: f64, p: f64) -> Result<f64> {
    if !field.is_supported_in_2d() {
        return Err(Error::Support(
            "Besov seminorm needs a field supported in 2D".into(),
        ));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("p must be >= 1, got {p}")));
    }
    let grid = field.grid;
    let n = grid.n() as i64;
    let d = grid.spacing();
    let max_j = (grid.n() / 4).trailing_zeros();
    let dirs: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)];
    let shifts: Vec<(i64, i64)> = (0..=max_j)
        .flat_map(|j| dirs.iter().map(move |&(a, b)| (a << j, b << j)))
        .collect();
    let best = shifts
        .par_iter()
        .map(|&(sj, sk)| {
            let mut acc = 0.0f64;
            let mut add = |diff: f64| {
                if p.is_infinite() {
                    acc = acc.max(diff);
                } else {
                    acc += diff.powf(p);
                }
            };
            let inside = |j: i64, k: i64| (0..n).contains(&j) && (0..n).contains(&k);
            for k in 0..n {
                for j in 0..n {
                    let here = field.values[(k * n + j) as usize];
                    let (tj, tk) = (j + sj, k + sk);
                    let there = if inside(tj, tk) {
                        field.values[(tk * n + tj) as usize]
                    } else {
                        C64::new(0.0, 0.0)
                    };
                    add((there - here).norm());
                    // partner x = y - tau outside the box, where the extension is zero
                    if !inside(j - sj, k - sk) {
                        add(here.norm());
                    }
                }
            }
            let norm = if p.is_infinite() {
                acc
            } else {
                (acc * grid.cell_area()).powf(1.0 / p)
            };
            let tau = d * ((sj * sj + sk * sk) as f64).sqrt();
            norm / tau.powf(alpha)
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// The full `||w||_p + seminorm` Besov norm.
pub fn besov_norm(field: &ComplexField, alpha: f64, p: f64) -> Result<f64> {
    let semi = besov_seminorm(field, alpha, p)?;
    let lp = lp_norm(field, p, &Region::Plane)?;
    Ok(lp + semi)
}

/// `sup |h(a) - h(b)|` over the non-excluded samples in `region`: the diameter
/// of the sampled value set, via its convex hull.
pub fn oscillation(field: &ComplexField, region: &Region) -> Result<f64> {
    let pts: Vec<(f64, f64)> = field.in_region(region).map(|(_, _, v)| (v.re, v.im)).collect();
    if pts.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(point_set_diameter(pts))
}

pub(crate) fn point_set_diameter(mut pts: Vec<(f64, f64)>) -> f64 {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    let hull = convex_hull(&pts);
    let mut best = 0.0f64;
    for (i, a) in hull.iter().enumerate() {
        for b in &hull[i + 1..] {
            best = best.max(((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt());
        }
    }
    best
}

/// Andrew's monotone chain on pre-sorted, deduplicated points.
fn convex_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if pts.len() <= 2 {
        return pts.to_vec();
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Maximum number of random pairs drawn by [`lipschitz_estimate`].
pub const MAX_RANDOM_PAIRS: usize = 1_000_000;
const LIPSCHITZ_SEED: u64 = 0x11b5_c0de;

/// Lower bound for the Lipschitz constant of `field` on `region` from
/// difference quotients: all stencil pairs at the smallest grid offset
/// `>= min_sep` in four directions, plus deterministic random pairs.
pub fn lipschitz_estimate(field: &ComplexField, region: &Region, min_sep: f64) -> Result<f64> {
    let grid = field.grid;
    let d = grid.spacing();
    if !(min_sep >= 2.0 * d * (1.0 - 1e-12)) {
        return Err(Error::invalid(format!(
            "min_sep = {min_sep} is below two grid spacings ({})",
            2.0 * d
        )));
    }
    let active: Vec<(usize, C64, C64)> = field.in_region(region).collect();
    if active.len() < 2 {
        return Err(Error::EmptyRegion);
    }
    let n = grid.n() as i64;
    let s = (min_sep / d - 1e-9).ceil() as i64;
    let usable = |j: i64, k: i64| -> Option<usize> {
        if !(0..n).contains(&j) || !(0..n).contains(&k) {
            return None;
        }
        let idx = (k * n + j) as usize;
        (!field.is_excluded(idx) && region.contains(grid.point_at(idx))).then_some(idx)
    };

    let stencil_best = active
        .par_iter()
        .map(|&(i, z1, v1)| {
            let (j, k) = grid.coords(i);
            let (j, k) = (j as i64, k as i64);
            let mut best = 0.0f64;
            for (a, b) in [(s, 0), (0, s), (s, s), (s, -s)] {
                if let Some(i2) = usable(j + a, k + b) {
                    let z2 = grid.point_at(i2);
                    best = best.max((field.values[i2] - v1).norm() / (z2 - z1).norm());
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);

    let total_pairs = active.len() as f64 * (active.len() as f64 - 1.0) / 2.0;
    let draws = (total_pairs.min(MAX_RANDOM_PAIRS as f64)) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(LIPSCHITZ_SEED);
    let pairs: Vec<(usize, usize)> = (0..draws)
        .map(|_| (rng.gen_range(0..active.len()), rng.gen_range(0..active.len())))
        .collect();
    let random_best = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (_, z1, v1) = active[a];
            let (_, z2, v2) = active[b];
            let sep = (z2 - z1).norm();
            if sep < min_sep {
                0.0
            } else {
                (v2 - v1).norm() / sep
            }
        })
        .reduce(|| 0.0, f64::max);
    Ok(stencil_best.max(random_best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_and_zero_samples() {
        let g = GridSpec::new(1.0, 16).unwrap();
        let f = sample(g, |z| z, None).unwrap();
        for (i, v) in f.values().iter().enumerate() {
            assert_eq!(*v, g.point_at(i));
        }
        let z = sample(g, |_| c(0.0, 0.0), None).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn indicator_marks_closed_disk() {
        let g = GridSpec::new(2.0, 64).unwrap();
        let f = sample(g, |z| if z.norm() <= 1.0 { c(1.0, 0.0) } else { c(0.0, 0.0) }, None).unwrap();
        for (i, v) in f.values().iter().enumerate() {
            let inside = g.point_at(i).norm() <= 1.0;
            assert_eq!(v.re, if inside { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn non_finite_is_rejected_with_location() {
        let g = GridSpec::new(1.0, 16).unwrap();
        let err = sample(g, |z| c(1.0, 0.0) / z, None).unwrap_err();
        match err {
            Error::NonFinite { j, k, .. } => assert_eq!((j, k), (8, 8)),
            other => panic!("unexpected {other:?}"),
        }
        let masked = sample(g, |z| c(1.0, 0.0) / z, Some(&|z: C64| z.norm() < 1e-9)).unwrap();
        assert_eq!(masked.excluded_count(), 1);
    }

    #[test]
    fn central2_exact_on_linear_maps() {
        let g = GridSpec::new(1.0, 32).unwrap();
        let a = c(0.3, -1.2);
        let b = c(2.0, 0.5);
        let f = sample(g, |z| a * z + b * z.conj() + c(1.0, 1.0), None).unwrap();
        let pair = wirtinger(&f, Scheme::Central2).unwrap();
        for (i, v) in pair.d_z.active() {
            assert!((v - a).norm() < 1e-12, "at {i}");
        }
        for (_, v) in pair.d_zbar.active() {
            assert!((v - b).norm() < 1e-12);
        }
        // box edge samples are excluded for non-periodic fields
        assert!(pair.d_z.is_excluded(0));
    }

    #[test]
    fn antiholomorphic_square() {
        let g = GridSpec::new(1.0, 64).unwrap();
        let f = sample(g, |z| z.conj() * z.conj(), None).unwrap();
        let pair = wirtinger(&f, Scheme::Central4).unwrap();
        for (i, v) in pair.d_zbar.active() {
            let z = g.point_at(i);
            assert!((v - 2.0 * z.conj()).norm() < 1e-10);
        }
        for (_, v) in pair.d_z.active() {
            assert!(v.norm() < 1e-10);
        }
    }

    #[test]
    fn central4_observed_order_on_smooth_field() {
        // oracle: d/dz of sin(z) + 0.2 zbar^2 exp(zbar) in closed form
        let f = |z: C64| z.sin() + 0.2 * z.conj() * z.conj() * z.conj().exp();
        let fz = |z: C64| z.cos();
        let fzb = |z: C64| 0.2 * (2.0 * z.conj() + z.conj() * z.conj()) * z.conj().exp();
        let err = |n: usize| {
            let g = GridSpec::new(1.0, n).unwrap();
            let pair = wirtinger(&sample(g, f, None).unwrap(), Scheme::Central4).unwrap();
            let r = Region::disk(0.5);
            let mut e = 0.0f64;
            for (i, z, v) in pair.d_z.in_region(&r) {
                e = e.max((v - fz(z)).norm());
                e = e.max((pair.d_zbar.values()[i] - fzb(z)).norm());
            }
            e
        };
        let (e1, e2) = (err(32), err(64));
        let order = (e1 / e2).log2();
        assert!(order >= 3.9, "order {order}");
    }

    #[test]
    fn harmonic_probe_hopf_product() {
        let g = GridSpec::new(1.0, 64).unwrap();
        let f = sample(g, |z| z + 0.2 * z.conj() * z.conj(), None).unwrap();
        let pair = wirtinger(&f, Scheme::Central2).unwrap();
        for (i, v) in pair.d_z.active() {
            let z = g.point_at(i);
            let prod = v * pair.d_zbar.values()[i].conj();
            assert!((prod - 0.4 * z).norm() < 1e-12);
        }
    }

    #[test]
    fn spectral_derivative_of_periodic_wave() {
        let g = GridSpec::new(1.0, 32).unwrap();
        // e^{i pi (2x + y)} is periodic on [-1, 1)^2
        let f = sample(g, |z| (C64::new(0.0, PI) * (2.0 * z.re + z.im)).exp(), None).unwrap();
        let pair = wirtinger(&f, Scheme::Spectral).unwrap();
        for (i, v) in pair.d_z.active() {
            let z = g.point_at(i);
            let w = (C64::new(0.0, PI) * (2.0 * z.re + z.im)).exp();
            // d_x = 2 pi i, d_y = pi i
            let dx = C64::new(0.0, 2.0 * PI) * w;
            let dy = C64::new(0.0, PI) * w;
            let iu = C64::new(0.0, 1.0);
            assert!((v - 0.5 * (dx - iu * dy)).norm() < 1e-10);
            assert!((pair.d_zbar.values()[i] - 0.5 * (dx + iu * dy)).norm() < 1e-10);
        }
    }

    #[test]
    fn spectral_rejects_masked_fields() {
        let g = GridSpec::new(1.0, 16).unwrap();
        let f = sample(g, |z| z, Some(&|z: C64| z.re > 0.5)).unwrap();
        assert!(matches!(wirtinger(&f, Scheme::Spectral), Err(Error::ExcludedPoints)));
    }

    #[test]
    fn jacobian_signs() {
        let g = GridSpec::new(1.0, 16).unwrap();
        let id = wirtinger(&sample(g, |z| z, None).unwrap(), Scheme::Central2).unwrap();
        let cj = wirtinger(&sample(g, |z| z.conj(), None).unwrap(), Scheme::Central2).unwrap();
        let r = Region::disk(0.5);
        assert!(jacobian(&id).in_region(&r).all(|(_, _, v)| (v - 1.0).abs() < 1e-12));
        assert!(jacobian(&cj).in_region(&r).all(|(_, _, v)| (v + 1.0).abs() < 1e-12));
    }

    #[test]
    fn lp_norms() {
        let g = GridSpec::new(2.0, 256).unwrap();
        let chi = sample(g, |z| if z.norm() <= 1.0 { c(1.0, 0.0) } else { c(0.0, 0.0) }, None).unwrap();
        let l2 = lp_norm(&chi, 2.0, &Region::Plane).unwrap();
        assert!((l2 / PI.sqrt() - 1.0).abs() < 0.02);
        let cst = sample(g, |_| c(-3.0, 4.0), None).unwrap();
        assert_eq!(lp_norm(&cst, f64::INFINITY, &Region::disk(2.0)).unwrap(), 5.0);
        let zero = ComplexField::zeros(g);
        assert_eq!(lp_norm(&zero, 3.0, &Region::Plane).unwrap(), 0.0);
        let far = Region::disk_at(c(100.0, 0.0), 1.0);
        assert!(matches!(lp_norm(&cst, 2.0, &far), Err(Error::EmptyRegion)));
        assert!(lp_norm(&cst, 0.5, &Region::Plane).is_err());
    }

    #[test]
    fn oscillation_values() {
        let g = GridSpec::new(1.0, 128).unwrap();
        let d = g.spacing();
        let id = sample(g, |z| z, None).unwrap();
        let osc = oscillation(&id, &Region::unit_disk()).unwrap();
        assert!((osc - 2.0).abs() <= d, "{osc}");
        let three = sample(g, |z| 3.0 * z, None).unwrap();
        let osc3 = oscillation(&three, &Region::unit_disk()).unwrap();
        assert!((osc3 - 6.0).abs() <= 3.0 * d);
        let cst = sample(g, |_| c(2.0, 1.0), None).unwrap();
        assert_eq!(oscillation(&cst, &Region::unit_disk()).unwrap(), 0.0);
    }

    #[test]
    fn lipschitz_of_linear_and_piecewise() {
        let g = GridSpec::new(1.0, 64).unwrap();
        let lam = c(2.5, -1.0);
        let f = sample(g, |z| lam * z, None).unwrap();
        let est = lipschitz_estimate(&f, &Region::unit_disk(), 2.0 * g.spacing()).unwrap();
        assert!((est - lam.norm()).abs() < 1e-10);

        let pw = sample(g, |z| if z.im >= 0.0 { 3.0 * z } else { 2.0 * z + z.conj() }, None).unwrap();
        let est = lipschitz_estimate(&pw, &Region::unit_disk(), 2.0 * g.spacing()).unwrap();
        assert!((est - 3.0).abs() < 1e-6, "{est}");
        assert!(lipschitz_estimate(&pw, &Region::unit_disk(), g.spacing()).is_err());
    }

    #[test]
    fn besov_basics() {
        let g = GridSpec::new(4.0, 64).unwrap();
        let zero = ComplexField::zeros(g);
        assert_eq!(besov_seminorm(&zero, 0.5, 6.0).unwrap(), 0.0);
        let not_flagged = sample(g, |_| c(0.0, 0.0), None).unwrap();
        assert!(besov_seminorm(&not_flagged, 0.5, 6.0).is_err());
    }

    #[test]
    fn shifts_keep_support_and_values() {
        let g = GridSpec::new(4.0, 32).unwrap();
        let f = sample(g, |z| c((1.0 - z.norm_sqr()).max(0.0), 0.0), None)
            .unwrap()
            .into_supported()
            .unwrap();
        let s = f.shifted(2, -1);
        assert_eq!(s.at(18, 15), f.at(16, 16));
    }
}
