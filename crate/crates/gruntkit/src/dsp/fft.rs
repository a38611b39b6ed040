//! Thin wrapper over rustfft with a per-thread plan cache.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANS: RefCell<HashMap<usize, Arc<dyn Fft<f64>>>> = RefCell::new(HashMap::new());
}

/// Forward complex FFT of a real signal. Returns all `n` bins.
pub fn fft_forward(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut buf);
    buf
}

/// Forward complex FFT in place.
pub fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    let plan = PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| FftPlanner::new().plan_fft_forward(n))
            .clone()
    });
    plan.process(buf);
}
