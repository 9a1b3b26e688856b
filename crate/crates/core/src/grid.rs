//! Uniform square grids over a box `[-A, A]^2` and the planar regions used to
//! restrict norms, oscillations and checks.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniform `n x n` grid on `[-A, A]^2`. Sample `(j, k)` sits at
/// `(-A + j*delta) + i(-A + k*delta)` with `delta = 2A/n`; the right and top
/// edges are not sampled, so the grid is periodic-friendly and `z = 0` is the
/// sample `(n/2, n/2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    half_width: f64,
    n: usize,
}

impl GridSpec {
    pub const MIN_N: usize = 16;

    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive and finite, got {half_width}"
            )));
        }
        if n < Self::MIN_N || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "samples per axis must be a power of two >= {}, got {n}",
                Self::MIN_N
            )));
        }
        Ok(Self { half_width, n })
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        let d = self.spacing();
        d * d
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Whether the box contains the doubled disk `2D`.
    pub fn contains_double_disk(&self) -> bool {
        self.half_width >= 2.0
    }

    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        k * self.n + j
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    #[inline]
    pub fn point(&self, j: usize, k: usize) -> Complex64 {
        let d = self.spacing();
        Complex64::new(
            -self.half_width + j as f64 * d,
            -self.half_width + k as f64 * d,
        )
    }

    #[inline]
    pub fn point_at(&self, idx: usize) -> Complex64 {
        let (j, k) = self.coords(idx);
        self.point(j, k)
    }

    pub fn origin_index(&self) -> usize {
        self.index(self.n / 2, self.n / 2)
    }

    /// Nearest sample to `z`, if `z` lies inside the sampled box.
    pub fn nearest(&self, z: Complex64) -> Option<(usize, usize)> {
        let d = self.spacing();
        let j = ((z.re + self.half_width) / d).round();
        let k = ((z.im + self.half_width) / d).round();
        if j < 0.0 || k < 0.0 || j >= self.n as f64 || k >= self.n as f64 {
            return None;
        }
        Some((j as usize, k as usize))
    }

    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.len()).map(move |idx| self.point_at(idx))
    }

    /// Same box, twice the samples per axis.
    pub fn refined(&self) -> Self {
        Self {
            half_width: self.half_width,
            n: self.n * 2,
        }
    }
}

/// Planar regions. `Plane` is the whole sampled box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    Plane,
    Disk { center: Complex64, radius: f64 },
    Annulus { center: Complex64, inner: f64, outer: f64 },
    /// `{ Re z > 0, |z| < radius }`
    HalfDisk { radius: f64 },
}

impl Region {
    pub fn unit_disk() -> Self {
        Region::Disk {
            center: Complex64::new(0.0, 0.0),
            radius: 1.0,
        }
    }

    pub fn disk(radius: f64) -> Self {
        Region::Disk {
            center: Complex64::new(0.0, 0.0),
            radius,
        }
    }

    pub fn disk_at(center: Complex64, radius: f64) -> Self {
        Region::Disk { center, radius }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        match *self {
            Region::Plane => true,
            Region::Disk { center, radius } => (z - center).norm() < radius,
            Region::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = (z - center).norm();
                r > inner && r < outer
            }
            Region::HalfDisk { radius } => z.re > 0.0 && z.norm() < radius,
        }
    }

    /// Distance from an interior point to the boundary of the region.
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        match *self {
            Region::Plane => f64::INFINITY,
            Region::Disk { center, radius } => (radius - (z - center).norm()).max(0.0),
            Region::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = (z - center).norm();
                (r - inner).min(outer - r).max(0.0)
            }
            Region::HalfDisk { radius } => z.re.min(radius - z.norm()).max(0.0),
        }
    }

    pub fn area(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Region::Plane => f64::INFINITY,
            Region::Disk { radius, .. } => PI * radius * radius,
            Region::Annulus { inner, outer, .. } => PI * (outer * outer - inner * inner),
            Region::HalfDisk { radius } => 0.5 * PI * radius * radius,
        }
    }

    /// Shrink the region by `margin` (points at least `margin` from the boundary).
    pub fn contains_with_margin(&self, z: Complex64, margin: f64) -> bool {
        self.contains(z) && self.boundary_distance(z) >= margin
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_non_power_of_two() {
        assert!(GridSpec::new(1.0, 8).is_err());
        assert!(GridSpec::new(1.0, 24).is_err());
        assert!(GridSpec::new(0.0, 16).is_err());
        assert!(GridSpec::new(f64::NAN, 16).is_err());
        assert!(GridSpec::new(1.0, 16).is_ok());
    }

    #[test]
    fn origin_is_a_sample() {
        let g = GridSpec::new(4.0, 64).unwrap();
        assert_eq!(g.point_at(g.origin_index()), Complex64::new(0.0, 0.0));
        let (j, k) = g.nearest(Complex64::new(0.51, -0.24)).unwrap();
        let p = g.point(j, k);
        assert!((p - Complex64::new(0.5, -0.25)).norm() < 1e-12);
    }

    #[test]
    fn half_disk_distance() {
        let r = Region::HalfDisk { radius: 1.0 };
        assert!(r.contains(Complex64::new(0.1, 0.5)));
        assert!(!r.contains(Complex64::new(-0.1, 0.0)));
        assert!((r.boundary_distance(Complex64::new(0.1, 0.0)) - 0.1).abs() < 1e-15);
    }
}
