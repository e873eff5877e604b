//! Thin helpers over `rustfft` shared by the filters and feature extractors.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

thread_local! {
    // Plans are cached per thread; framing calls the same sizes thousands of times.
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(size: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(size)
        } else {
            p.plan_fft_forward(size)
        }
    })
}

pub fn forward(input: &[f64], size: usize) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = input.iter().take(size).map(|&x| Complex::new(x, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    plan(size, false).process(&mut buf);
    buf
}

/// Unnormalized inverse: the caller divides by `buf.len()`.
pub fn inverse_in_place(buf: &mut [Complex<f64>]) {
    plan(buf.len(), true).process(buf);
}

/// Full linear convolution, length `x.len() + h.len() - 1`.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + h.len() - 1;
    // Direct form wins for short kernels.
    if h.len() <= 32 || x.len() <= 32 {
        let mut out = vec![0.0; out_len];
        for (i, &xi) in x.iter().enumerate() {
            for (j, &hj) in h.iter().enumerate() {
                out[i + j] += xi * hj;
            }
        }
        return out;
    }
    let size = out_len.next_power_of_two();
    let fwd = plan(size, false);
    let inv = plan(size, true);

    let mut a: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    a.resize(size, Complex::new(0.0, 0.0));
    let mut b: Vec<Complex<f64>> = h.iter().map(|&v| Complex::new(v, 0.0)).collect();
    b.resize(size, Complex::new(0.0, 0.0));
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (ai, bi) in a.iter_mut().zip(&b) {
        *ai *= bi;
    }
    inv.process(&mut a);
    let scale = 1.0 / size as f64;
    a.iter().take(out_len).map(|c| c.re * scale).collect()
}

/// Amplitude of a real sinusoid at `freq_hz`, estimated from the DFT bin
/// nearest to that frequency after a Hann window (coherent gain corrected).
pub fn tone_amplitude(x: &[f64], sample_rate_hz: f64, freq_hz: f64) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect();
    let gain: f64 = window.iter().sum::<f64>() / n as f64;
    let windowed: Vec<f64> = x.iter().zip(&window).map(|(a, w)| a * w).collect();
    let spec = forward(&windowed, n);
    let bin = (freq_hz * n as f64 / sample_rate_hz).round() as usize;
    let lo = bin.saturating_sub(1);
    let hi = (bin + 1).min(n / 2);
    let peak = (lo..=hi).map(|k| spec[k].norm()).fold(0.0, f64::max);
    2.0 * peak / (n as f64 * gain)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_convolution_matches_direct() {
        let x: Vec<f64> = (0..300).map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5).collect();
        let h: Vec<f64> = (0..65).map(|i| ((i * 31) % 13) as f64 / 13.0).collect();
        let fast = convolve(&x, &h);
        let mut direct = vec![0.0; x.len() + h.len() - 1];
        for (i, xi) in x.iter().enumerate() {
            for (j, hj) in h.iter().enumerate() {
                direct[i + j] += xi * hj;
            }
        }
        for (a, b) in fast.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn tone_amplitude_recovers_sine() {
        let fs = 8000.0;
        let x: Vec<f64> = (0..8000)
            .map(|i| 0.7 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / fs).sin())
            .collect();
        let a = tone_amplitude(&x, fs, 440.0);
        assert!((a - 0.7).abs() < 0.01, "{a}");
    }
}
