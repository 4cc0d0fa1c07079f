//! Small FFT and spectrum helpers shared by the signal-model and estimation code.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Forward DFT, `X[n] = sum_k x[k] exp(-j 2 pi n k / N)`, unnormalized.
pub fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Inverse DFT with the `1/N` normalization, so `ifft(fft(x)) == x`.
pub fn ifft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// Signed harmonic index of DFT bin `n` for an `len`-point transform.
///
/// Bins above `len / 2` map to negative frequencies. The Nyquist bin of an
/// even-length transform is reported as `+len / 2`.
pub fn signed_bin(n: usize, len: usize) -> i64 {
    if 2 * n <= len {
        n as i64
    } else {
        n as i64 - len as i64
    }
}

/// DFT bin index holding harmonic `p` of an `len`-point transform.
pub fn bin_of(p: i64, len: usize) -> usize {
    p.rem_euclid(len as i64) as usize
}

/// Circularly delays `x` by `shift` samples (any real value).
///
/// Integer shifts are applied by index rotation; fractional shifts multiply
/// every bin by a linear phase ramp, which is exact for periodic bandlimited
/// sequences. The Nyquist bin of an even-length record uses the real part of
/// the ramp so that real inputs stay real.
pub fn circular_delay(x: &[Complex64], shift: f64) -> Vec<Complex64> {
    let len = x.len();
    if len == 0 {
        return Vec::new();
    }
    let rounded = shift.round();
    if (shift - rounded).abs() < 1e-12 {
        let s = (rounded as i64).rem_euclid(len as i64) as usize;
        return (0..len).map(|k| x[(k + len - s) % len]).collect();
    }
    let mut spec = fft(x);
    for (n, bin) in spec.iter_mut().enumerate() {
        let p = signed_bin(n, len);
        let angle = -2.0 * PI * p as f64 * shift / len as f64;
        if 2 * n == len {
            *bin *= angle.cos();
        } else {
            *bin *= Complex64::from_polar(1.0, angle);
        }
    }
    ifft(&spec)
}

pub fn mean_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}
