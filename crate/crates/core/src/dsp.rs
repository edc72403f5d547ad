//! FFT helpers and peak measurements on sampled profiles.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// `(1/N) Σ_k X(k) exp(j 2π k n / (N P))` for `n = 0 .. N P`.
///
/// `spectrum` is ordered by symmetric index `k = -N/2 .. N/2 - 1`; each value is
/// placed on DFT bin `k mod (N P)` so the output phase is independent of the
/// index origin. `oversample = 1` is the plain IDFT.
pub fn idft_symmetric(spectrum: &[Complex64], oversample: usize) -> Vec<Complex64> {
    let n = spectrum.len();
    let len = n * oversample.max(1);
    let half = (n / 2) as i64;
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (i, v) in spectrum.iter().enumerate() {
        let k = i as i64 - half;
        buf[k.rem_euclid(len as i64) as usize] = *v;
    }
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// Forward DFT of `samples` onto symmetric indices `-N/2 .. N/2 - 1`, unscaled.
pub fn dft_symmetric(samples: &[Complex64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    (0..n).map(|i| buf[(i + n - half) % n]).collect()
}

/// Index of the largest magnitude; among equal maxima the smallest index wins.
/// Returns `(index, tie)`.
pub fn argmax_magnitude(values: &[Complex64]) -> (usize, bool) {
    let mut best = 0;
    let mut best_mag = f64::NEG_INFINITY;
    let mut tie = false;
    for (i, v) in values.iter().enumerate() {
        let m = v.norm();
        if m > best_mag {
            best = i;
            best_mag = m;
            tie = false;
        } else if m == best_mag {
            tie = true;
        }
    }
    (best, tie)
}

/// Sub-sample peak position from a three-point parabola on log-magnitude
/// (circular neighbours). Returns `(position, tie)` in samples.
pub fn parabolic_peak(values: &[Complex64]) -> (f64, bool) {
    let n = values.len();
    let (i, tie) = argmax_magnitude(values);
    if n < 3 {
        return (i as f64, tie);
    }
    let ln = |j: usize| values[j].norm().max(f64::MIN_POSITIVE).ln();
    let (a, b, c) = (ln((i + n - 1) % n), ln(i), ln((i + 1) % n));
    let denom = a - 2.0 * b + c;
    let offset = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    (i as f64 + offset.clamp(-0.5, 0.5), tie)
}

/// Width of the peak region above `-3 dB` of the maximum, in samples, with linear
/// interpolation of the crossings (circular).
pub fn mainlobe_width_3db(values: &[Complex64]) -> f64 {
    let n = values.len();
    let (i, _) = argmax_magnitude(values);
    let peak = values[i].norm_sqr();
    let level = peak / 2.0;
    let p = |j: isize| values[j.rem_euclid(n as isize) as usize].norm_sqr();
    let crossing = |dir: isize| -> f64 {
        let mut j = i as isize;
        for step in 1..n as isize {
            let next = i as isize + dir * step;
            if p(next) < level {
                let (hi, lo) = (p(j), p(next));
                let frac = (hi - level) / (hi - lo);
                return (step - 1) as f64 + frac;
            }
            j = next;
        }
        n as f64
    };
    crossing(1) + crossing(-1)
}

/// Indices of circular local maxima within `threshold_db` of the global maximum.
pub fn local_peaks(values: &[Complex64], threshold_db: f64) -> Vec<usize> {
    let n = values.len();
    let mag: Vec<f64> = values.iter().map(|v| v.norm()).collect();
    let top = mag.iter().cloned().fold(0.0, f64::max);
    let floor = top * 10f64.powf(threshold_db / 20.0);
    (0..n)
        .filter(|&i| {
            let (prev, next) = (mag[(i + n - 1) % n], mag[(i + 1) % n]);
            mag[i] >= floor && mag[i] > prev && mag[i] >= next
        })
        .collect()
}
