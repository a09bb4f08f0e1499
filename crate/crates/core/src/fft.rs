//! Shared FFT plumbing: cached plans and in-place 1-D/2-D transforms.
//!
//! This module only moves complex samples around; all scaling and sign
//! conventions (measure factors, centered-box phases) live in [`crate::grid`].

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Plan cache keyed by (length, direction). rustfft plans are Send + Sync
/// and amortize twiddle setup across the many transforms an iterative solve
/// performs.
static PLANS: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    let key = (n, direction == FftDirection::Forward);
    let mut cache = PLANS.lock().expect("fft plan cache poisoned");
    cache
        .entry(key)
        .or_insert_with(|| FftPlanner::new().plan_fft(n, direction))
        .clone()
}

/// Unnormalized in-place 1-D FFT. `Forward` sums with kernel e^{-2πi pk/n},
/// `Inverse` with e^{+2πi pk/n}; no 1/n factor is applied.
pub fn fft1_inplace(values: &mut [Complex64], direction: FftDirection) {
    let fft = plan(values.len(), direction);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(values, &mut scratch);
}

/// Unnormalized in-place 2-D FFT on row-major data (`values[p * n_x + q]`):
/// transform along x (rows), then along t (columns).
pub fn fft2_inplace(values: &mut [Complex64], n_t: usize, n_x: usize, direction: FftDirection) {
    assert_eq!(values.len(), n_t * n_x, "value buffer does not match grid");

    let row_fft = plan(n_x, direction);
    let mut scratch = vec![Complex64::default(); row_fft.get_inplace_scratch_len()];
    for row in values.chunks_exact_mut(n_x) {
        row_fft.process_with_scratch(row, &mut scratch);
    }

    let col_fft = plan(n_t, direction);
    let mut scratch = vec![Complex64::default(); col_fft.get_inplace_scratch_len()];
    let mut column = vec![Complex64::default(); n_t];
    for q in 0..n_x {
        for p in 0..n_t {
            column[p] = values[p * n_x + q];
        }
        col_fft.process_with_scratch(&mut column, &mut scratch);
        for p in 0..n_t {
            values[p * n_x + q] = column[p];
        }
    }
}
