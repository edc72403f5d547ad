//! Monostatic sensing: zero-forcing estimation, range profiles, AoA estimation,
//! full-band equalization and the profile quality metrics.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{array_factor, propagate_with, LinkChannel, Scatterer};
use crate::config::{BlockIndex, FdaSystem};
use crate::dsp;
use crate::grid::BlockSpectrum;
use crate::txchain::{steered_spectrum, SymbolBlock};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Value reported by [`isl`] when the sidelobe energy is exactly zero.
pub const ISL_FLOOR_DB: f64 = -300.0;

/// Channel estimate on the `(2M - 1) x K_b` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_hat: BlockSpectrum,
}

impl ChannelEstimate {
    /// Re-applies the known symbols: `ĥ(b_f, k_b) s(k_b)`.
    pub fn reconstruct(&self, known: &SymbolBlock) -> BlockSpectrum {
        let mut out = self.h_hat.clone();
        for b in self.h_hat.block_indices() {
            for (v, s) in out.block_mut(b).iter_mut().zip(known.values()) {
                *v *= s;
            }
        }
        out
    }
}

/// Zero-forcing estimate `ĥ = r / s`.
pub fn estimate_channel_zf(rx: &BlockSpectrum, known: &SymbolBlock) -> Result<ChannelEstimate> {
    if known.len() != rx.block_len() {
        return Err(Error::ContractViolation(format!(
            "known symbols have length {}, grid blocks have {}",
            known.len(),
            rx.block_len()
        )));
    }
    if known.values().iter().any(|s| s.norm() == 0.0) {
        return Err(Error::ContractViolation("zero-valued pilot symbol".into()));
    }
    let mut h_hat = rx.clone();
    for b in rx.block_indices() {
        for (v, s) in h_hat.block_mut(b).iter_mut().zip(known.values()) {
            *v /= s;
        }
    }
    Ok(ChannelEstimate { h_hat })
}

/// Taper applied across the subcarriers before the IDFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    fn apply(self, values: &mut [Complex64]) {
        if self == Window::Hann {
            let n = values.len() as f64;
            for (i, v) in values.iter_mut().enumerate() {
                *v *= 0.5 - 0.5 * (2.0 * PI * (i as f64 + 0.5) / n).cos();
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfileOptions {
    /// Zero-padding factor of the IDFT; `1` gives native range bins.
    pub oversample: usize,
    pub window: Window,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self { oversample: 1, window: Window::Rectangular }
    }
}

impl ProfileOptions {
    pub fn oversampled(oversample: usize) -> Self {
        Self { oversample, ..Self::default() }
    }
}

/// Range profile `p(n)` with its native bin size.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub p: Vec<Complex64>,
    /// Native range resolution `c / (2 B_used)`, m.
    pub bin_size_m: f64,
    /// Unambiguous range set by the cyclic prefix, m.
    pub r_max_m: f64,
    pub oversample: usize,
}

impl RangeProfile {
    /// Range spacing between consecutive samples of `p`.
    pub fn sample_spacing_m(&self) -> f64 {
        self.bin_size_m / self.oversample as f64
    }

    pub fn range_at(&self, sample: f64) -> f64 {
        sample * self.sample_spacing_m()
    }

    pub fn magnitude_db(&self) -> Vec<f64> {
        self.p.iter().map(|v| 20.0 * v.norm().max(1e-300).log10()).collect()
    }

    /// Peak range from parabolic interpolation; the flag reports a tie between maxima.
    pub fn peak_range(&self) -> (f64, bool) {
        let (pos, tie) = dsp::parabolic_peak(&self.p);
        (self.range_at(pos), tie)
    }

    /// Sample index of the largest magnitude.
    pub fn peak_sample(&self) -> usize {
        dsp::argmax_magnitude(&self.p).0
    }

    /// `-3 dB` mainlobe width of the strongest peak, m.
    pub fn mainlobe_width_m(&self) -> f64 {
        dsp::mainlobe_width_3db(&self.p) * self.sample_spacing_m()
    }
}

/// True when every range in `ranges_m` has its own local peak within
/// `tolerance_m`, counting peaks no more than 6 dB below the profile maximum.
///
/// Two interfering echoes closer than one bin can produce two displaced lobes;
/// the tolerance keeps those from counting as resolved targets.
pub fn resolves_targets(profile: &RangeProfile, ranges_m: &[f64], tolerance_m: f64) -> bool {
    let peaks: Vec<f64> = dsp::local_peaks(&profile.p, -6.0)
        .into_iter()
        .map(|i| profile.range_at(i as f64))
        .collect();
    let mut used = vec![false; peaks.len()];
    ranges_m.iter().all(|r| {
        let hit = peaks
            .iter()
            .enumerate()
            .filter(|(i, p)| !used[*i] && (*p - r).abs() <= tolerance_m)
            .min_by(|a, b| (a.1 - r).abs().total_cmp(&(b.1 - r).abs()))
            .map(|(i, _)| i);
        match hit {
            Some(i) => {
                used[i] = true;
                true
            }
            None => false,
        }
    })
}

/// Range resolution of one block, `c (2M - 1) / (2B)`.
pub fn single_block_resolution(sys: &FdaSystem) -> f64 {
    SPEED_OF_LIGHT * sys.global_blocks() as f64 / (2.0 * sys.config().bandwidth_hz)
}

/// Unambiguous range of one block, `c N_cp (2M - 1) / (2B)`.
pub fn single_block_max_range(sys: &FdaSystem) -> f64 {
    SPEED_OF_LIGHT * (sys.config().cp_len * sys.global_blocks()) as f64 / (2.0 * sys.config().bandwidth_hz)
}

/// Full-band range resolution `c / (2B)`.
pub fn full_band_resolution(sys: &FdaSystem) -> f64 {
    SPEED_OF_LIGHT / (2.0 * sys.config().bandwidth_hz)
}

/// Full-band unambiguous range `c N_cp / (2B)`.
pub fn full_band_max_range(sys: &FdaSystem) -> f64 {
    SPEED_OF_LIGHT * sys.config().cp_len as f64 / (2.0 * sys.config().bandwidth_hz)
}

pub fn range_profile_single_block(
    est: &ChannelEstimate,
    b_f: BlockIndex,
    sys: &FdaSystem,
    opts: ProfileOptions,
) -> RangeProfile {
    let mut x = est.h_hat.block(b_f).to_vec();
    opts.window.apply(&mut x);
    RangeProfile {
        p: dsp::idft_symmetric(&x, opts.oversample),
        bin_size_m: single_block_resolution(sys),
        r_max_m: single_block_max_range(sys),
        oversample: opts.oversample.max(1),
    }
}

/// IDFT over all `(2M - 1) K_b` subcarriers in global frequency order.
pub fn range_profile_full_band(est_eq: &ChannelEstimate, sys: &FdaSystem, opts: ProfileOptions) -> RangeProfile {
    let mut x = est_eq.h_hat.flat().to_vec();
    opts.window.apply(&mut x);
    RangeProfile {
        p: dsp::idft_symmetric(&x, opts.oversample),
        bin_size_m: full_band_resolution(sys),
        r_max_m: full_band_max_range(sys),
        oversample: opts.oversample.max(1),
    }
}

/// Removes the magnitude and the transmit-steering phase of every bin:
/// `ĥ / |ĥ| · exp(-jπ b_f d_λ sin θ_TX)`. Zero bins stay zero and count as excluded.
pub fn compensate_for_aoa(est: &ChannelEstimate, theta_tx: f64, sys: &FdaSystem) -> ChannelEstimate {
    let mut h_hat = est.h_hat.clone();
    for b in est.h_hat.block_indices() {
        let rot = Complex64::from_polar(1.0, -PI * b.value() as f64 * sys.spacing() * theta_tx.sin());
        for v in h_hat.block_mut(b) {
            let mag = v.norm();
            *v = if mag > 0.0 { *v / mag * rot } else { Complex64::new(0.0, 0.0) };
        }
    }
    ChannelEstimate { h_hat }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoaEstimate {
    pub theta_hat: f64,
    /// Scanned angles, radians.
    pub grid: Vec<f64>,
    /// Peak matched-filter magnitude over range for each grid angle.
    pub spectrum: Vec<f64>,
    /// Range of the matched-filter peak at `theta_hat`, m.
    pub range_m: f64,
}

impl AoaEstimate {
    pub fn spectrum_db(&self) -> Vec<f64> {
        let peak = self.spectrum.iter().cloned().fold(0.0, f64::max);
        self.spectrum.iter().map(|v| 20.0 * (v / peak).max(1e-300).log10()).collect()
    }
}

/// Integer multiples of `step` inside `[start, end]` (radians), so `0` is on
/// the grid whenever the interval contains it.
pub fn angle_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let lo = (start / step - 1e-6).ceil() as i64;
    let hi = (end / step + 1e-6).floor() as i64;
    (lo..=hi).map(|i| i as f64 * step).collect()
}

/// `-60°..=60°` in `0.05°` steps.
pub fn default_angle_grid() -> Vec<f64> {
    angle_grid((-60f64).to_radians(), 60f64.to_radians(), 0.05f64.to_radians())
}

/// Magnitude of `Σ_g x_g exp(j 2π k_f t / N)` over the global grid at fractional
/// full-band delay `t` (in range bins).
fn dtft_magnitude(x: &[Complex64], t: f64) -> f64 {
    let n = x.len() as f64;
    let half = (x.len() / 2) as f64;
    let step = Complex64::from_polar(1.0, 2.0 * PI * t / n);
    let mut rot = Complex64::from_polar(1.0, -2.0 * PI * half * t / n);
    let mut acc = Complex64::new(0.0, 0.0);
    for v in x {
        acc += v * rot;
        rot *= step;
    }
    acc.norm()
}

/// Delay (range bins) maximizing [`dtft_magnitude`] near `start`, by shrinking
/// three-point parabolic steps.
fn refine_delay(x: &[Complex64], start: f64, width: f64) -> (f64, f64) {
    let mut t = start;
    let mut h = width;
    for _ in 0..6 {
        let (a, b, c) = (dtft_magnitude(x, t - h), dtft_magnitude(x, t), dtft_magnitude(x, t + h));
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            t += h * (0.5 * (a - c) / denom).clamp(-1.0, 1.0);
        }
        h /= 4.0;
    }
    (t, dtft_magnitude(x, t))
}

/// Writes `ĥ_AoA(b_f, ·) exp(-jπ b_f d_λ sin θ)` in global order into `out`.
fn weight_blocks(comp: &ChannelEstimate, theta: f64, sys: &FdaSystem, out: &mut [Complex64]) {
    let kb = sys.block_len();
    let edge = (sys.antennas() - 1) as f64;
    for (slot, (chunk, src)) in out.chunks_mut(kb).zip(comp.h_hat.flat().chunks(kb)).enumerate() {
        let w = Complex64::from_polar(1.0, -PI * (slot as f64 - edge) * sys.spacing() * theta.sin());
        for (o, v) in chunk.iter_mut().zip(src) {
            *o = v * w;
        }
    }
}

/// Joint range-angle matched filter.
///
/// For each candidate angle the compensated blocks are weighted by
/// `exp(-jπ b_f d_λ sin θ)` and transformed over the global grid, which places
/// every block's profile on a common frequency origin (`exp(j 2π b_f Δf τ)`).
/// The peak over delay is refined in continuous delay before angles are
/// compared, because block phase and delay are coupled through `b_f Δf τ`.
/// The same coupling leaves the joint search with little angular selectivity;
/// accuracy comes from the within-block delay slope and so from SNR.
/// `oversample` sets the coarse delay search density.
pub fn estimate_aoa(
    est: &ChannelEstimate,
    theta_tx: f64,
    sys: &FdaSystem,
    grid: &[f64],
    oversample: usize,
) -> Result<AoaEstimate> {
    if sys.antennas() < 2 {
        return Err(Error::AngleUnobservable);
    }
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty angle grid".into()));
    }
    let os = oversample.max(2);
    let comp = compensate_for_aoa(est, theta_tx, sys);
    let n = sys.params().global_len;
    let fft = rustfft::FftPlanner::new().plan_fft_inverse(n * os);
    let mut x = comp.h_hat.flat().to_vec();
    let mut buf = vec![Complex64::new(0.0, 0.0); n * os];
    let mut spectrum = Vec::with_capacity(grid.len());
    let mut best = (f64::NEG_INFINITY, 0usize, 0.0);
    for (gi, &theta) in grid.iter().enumerate() {
        weight_blocks(&comp, theta, sys, &mut x);
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (g, v) in x.iter().enumerate() {
            let k = g as i64 - (n / 2) as i64;
            buf[k.rem_euclid((n * os) as i64) as usize] = *v;
        }
        fft.process(&mut buf);
        let (coarse, _) = dsp::argmax_magnitude(&buf);
        let (t, mag) = refine_delay(&x, coarse as f64 / os as f64, 1.0 / os as f64);
        spectrum.push(mag);
        if mag > best.0 {
            best = (mag, gi, t.rem_euclid(n as f64));
        }
    }
    Ok(AoaEstimate {
        theta_hat: grid[best.1],
        grid: grid.to_vec(),
        spectrum,
        range_m: best.2 * full_band_resolution(sys),
    })
}

/// Angle spectrum of the same matched filter with the delay held at `range_m`.
///
/// With the range known the blocks act as `2M - 1` phase centres spaced
/// `d_λ / 2`, so the angular mainlobe narrows as `1 / (M d_λ)`. Jointly
/// estimating range removes most of that selectivity: a delay change of one
/// full-band bin rotates block `b_f` by `2π b_f / (2M - 1)`, much like an angle
/// change (see [`estimate_aoa`]).
pub fn angle_spectrum_at_range(
    est: &ChannelEstimate,
    theta_tx: f64,
    sys: &FdaSystem,
    grid: &[f64],
    range_m: f64,
) -> Result<AoaEstimate> {
    if sys.antennas() < 2 {
        return Err(Error::AngleUnobservable);
    }
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty angle grid".into()));
    }
    let comp = compensate_for_aoa(est, theta_tx, sys);
    let t = range_m / full_band_resolution(sys);
    let mut x = comp.h_hat.flat().to_vec();
    let spectrum: Vec<f64> = grid
        .iter()
        .map(|&theta| {
            weight_blocks(&comp, theta, sys, &mut x);
            dtft_magnitude(&x, t)
        })
        .collect();
    let (mut best, mut best_i) = (f64::NEG_INFINITY, 0);
    for (i, v) in spectrum.iter().enumerate() {
        if *v > best {
            best = *v;
            best_i = i;
        }
    }
    Ok(AoaEstimate { theta_hat: grid[best_i], grid: grid.to_vec(), spectrum, range_m })
}

/// Guard on `|AF|` below which a block cannot be equalized, `1e-3 √M`.
pub fn af_guard(sys: &FdaSystem) -> f64 {
    1e-3 * (sys.antennas() as f64).sqrt()
}

fn equalizer(b: BlockIndex, theta_hat: f64, theta_tx: f64, sys: &FdaSystem) -> Option<Complex64> {
    let mag = array_factor(b, theta_hat, theta_tx, sys).norm();
    if mag <= af_guard(sys) {
        return None;
    }
    let phase = -PI * b.value() as f64 * sys.spacing() * (theta_hat.sin() + theta_tx.sin());
    Some(Complex64::from_polar(1.0 / mag, phase))
}

/// `ĥ_EQ = ĥ / |AF(b_f, θ̂, θ_TX)| · exp(-jπ b_f d_λ (sin θ̂ + sin θ_TX))`.
///
/// Fails on the first block whose `|AF|` is at or below [`af_guard`].
pub fn equalize_full_band(
    est: &ChannelEstimate,
    theta_hat: f64,
    theta_tx: f64,
    sys: &FdaSystem,
) -> Result<ChannelEstimate> {
    let mut h_hat = est.h_hat.clone();
    for b in sys.block_indices() {
        let g = equalizer(b, theta_hat, theta_tx, sys)
            .ok_or(Error::DegenerateEqualization { block: b.value() })?;
        h_hat.block_mut(b).iter_mut().for_each(|v| *v *= g);
    }
    Ok(ChannelEstimate { h_hat })
}

/// Like [`equalize_full_band`] but zero-fills degenerate blocks and returns their indices.
pub fn equalize_full_band_guarded(
    est: &ChannelEstimate,
    theta_hat: f64,
    theta_tx: f64,
    sys: &FdaSystem,
) -> (ChannelEstimate, Vec<i32>) {
    let mut h_hat = est.h_hat.clone();
    let mut excluded = Vec::new();
    for b in sys.block_indices() {
        let g = equalizer(b, theta_hat, theta_tx, sys).unwrap_or_else(|| {
            excluded.push(b.value());
            Complex64::new(0.0, 0.0)
        });
        h_hat.block_mut(b).iter_mut().for_each(|v| *v *= g);
    }
    (ChannelEstimate { h_hat }, excluded)
}

/// Integrated sidelobe level `Σ_{n ≠ n_max} |p(n)|² / |p(n_max)|²` in dB.
///
/// Meaningful on native (non-oversampled) profiles.
pub fn isl(profile: &RangeProfile) -> Result<f64> {
    let (k, _) = dsp::argmax_magnitude(&profile.p);
    let peak = profile.p[k].norm_sqr();
    if peak == 0.0 {
        return Err(Error::UndefinedMetric("ISL of an all-zero profile"));
    }
    let side: f64 = profile
        .p
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, v)| v.norm_sqr())
        .sum();
    if side == 0.0 {
        return Ok(ISL_FLOOR_DB);
    }
    Ok((10.0 * (side / peak).log10()).max(ISL_FLOOR_DB))
}

/// Range bias of a boresight target after equalizing with angle error `θ_ε`:
/// `(1/4) (c / Δf) d_λ sin θ_ε`.
///
/// The sign follows from the per-block phase error `exp(-jπ b_f d_λ sin θ_ε)`,
/// which acts as an extra delay for positive `θ_ε`.
pub fn predict_range_error(theta_err: f64, sys: &FdaSystem) -> f64 {
    0.25 * SPEED_OF_LIGHT / sys.params().block_spacing_hz * sys.spacing() * theta_err.sin()
}

/// [`predict_range_error`] scaled by the least-squares slope of the block phase
/// staircase over the band, `1 / (1 + 1 / (4M(M - 1)))`.
pub fn predict_range_error_refined(theta_err: f64, sys: &FdaSystem) -> f64 {
    let m = sys.antennas() as f64;
    if sys.antennas() < 2 {
        return 0.0;
    }
    predict_range_error(theta_err, sys) / (1.0 + 1.0 / (4.0 * m * (m - 1.0)))
}

/// Outcome of [`measure_range_error`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeErrorMeasurement {
    pub error_m: f64,
    /// Two equal maxima were found; the smaller range was taken.
    pub tie: bool,
}

/// Oversampling used for the sub-bin range readout.
pub const RANGE_READOUT_OVERSAMPLE: usize = 64;

/// One transmitted OFDM symbol steered at `theta_tx`, propagated through `link`
/// with noise variance `noise_variance`, then estimated by zero forcing.
pub fn sense<R: Rng + ?Sized>(
    theta_tx: f64,
    link: &LinkChannel,
    noise_variance: f64,
    rng: &mut R,
    sys: &FdaSystem,
) -> Result<ChannelEstimate> {
    let spec = steered_spectrum(rng, theta_tx, sys);
    let rx = propagate_with(&spec, link, noise_variance, rng);
    estimate_channel_zf(&rx.r, spec.symbols())
}

/// Full pipeline on a single target with `θ̂ = θ_RT + θ_ε`; returns peak range minus true range.
///
/// The array is steered at the target. Noise is drawn from `seed` when
/// `noise_variance > 0`.
pub fn measure_range_error(
    target: &Scatterer,
    noise_variance: f64,
    theta_err: f64,
    sys: &FdaSystem,
    seed: u64,
) -> Result<RangeErrorMeasurement> {
    let link = LinkChannel::new(&[*target], sys);
    let mut rng = crate::rng::seeded(seed);
    let est = sense(target.theta, &link, noise_variance, &mut rng, sys)?;
    let eq = equalize_full_band(&est, target.theta + theta_err, target.theta, sys)?;
    let profile = range_profile_full_band(&eq, sys, ProfileOptions::oversampled(RANGE_READOUT_OVERSAMPLE));
    let (peak, tie) = profile.peak_range();
    Ok(RangeErrorMeasurement { error_m: peak - target.range_m(), tie })
}
