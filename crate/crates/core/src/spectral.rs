//! Two-dimensional FFTs on the square grid and the wavenumber layout shared by
//! the derivative and singular-integral multipliers.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

pub(crate) struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn run(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(data.len(), self.n * self.n);
        // rows are contiguous; columns go through a transpose
        fft.process(data);
        transpose(data, self.n);
        fft.process(data);
        transpose(data, self.n);
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Normalized inverse: `inverse(forward(x)) == x`.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / (self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for k in 0..n {
        for j in (k + 1)..n {
            data.swap(k * n + j, j * n + k);
        }
    }
}

/// Signed frequency index for FFT bin `m` (range `[-n/2, n/2)`).
#[inline]
pub(crate) fn signed_index(m: usize, n: usize) -> i64 {
    if m < n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Complex frequency `zeta = xi + i eta` (cycles per unit length) of every
/// bin, in the same row-major layout as the field samples.
pub(crate) fn zeta_table(grid: &GridSpec) -> Vec<Complex64> {
    let n = grid.n();
    let period = 2.0 * grid.half_width();
    let mut out = Vec::with_capacity(n * n);
    for k in 0..n {
        let eta = signed_index(k, n) as f64 / period;
        for j in 0..n {
            let xi = signed_index(j, n) as f64 / period;
            out.push(Complex64::new(xi, eta));
        }
    }
    out
}

/// Whether bin `(j, k)` lies on a Nyquist row or column.
#[inline]
pub(crate) fn is_nyquist(j: usize, k: usize, n: usize) -> bool {
    j == n / 2 || k == n / 2
}
