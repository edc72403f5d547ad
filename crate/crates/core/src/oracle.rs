//! Time-domain reference simulator for the block-domain model.
//!
//! Every antenna is sampled at the composite rate `B = N Δf_sc` with
//! `N = (2M - 1) K_b`, so the frequency shift of antenna `m` is exactly `m K_b`
//! DFT bins. Symmetric subcarrier index `k` maps to DFT bin `k mod N` and the
//! tone on global subcarrier `k_f` is `exp(j 2π k_f n / N)`, i.e. it sits at
//! `f_c + k_f Δf_sc`. Delays are applied as phase ramps on the cyclic core and
//! the cyclic prefix has `N_cp` samples at rate `B`.

use std::f64::consts::PI;
use std::io::{self, BufRead, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::channel::{ChannelScene, ReceivedSpectrum, Scatterer};
use crate::config::{AntennaIndex, FdaSystem};
use crate::grid::BlockSpectrum;
use crate::txchain::PrecodedSymbol;
use crate::{Error, Result, SPEED_OF_LIGHT};

/// One OFDM symbol per antenna, cyclic prefix first.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDomainFrame {
    /// Sample sequences of length `cp_len + fft_len`, by antenna slot.
    pub antennas: Vec<Vec<Complex64>>,
    pub rate_hz: f64,
    pub fft_len: usize,
    pub cp_len: usize,
}

impl TimeDomainFrame {
    pub fn len(&self) -> usize {
        self.cp_len + self.fft_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean power of the antenna sum of per-antenna powers over the core samples.
    pub fn mean_total_power(&self) -> f64 {
        self.antennas
            .iter()
            .map(|a| a[self.cp_len..].iter().map(|v| v.norm_sqr()).sum::<f64>() / self.fft_len as f64)
            .sum()
    }

    /// Binary dump: one text header line, then interleaved little-endian `f64`
    /// re/im samples, antenna by antenna.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "rate_hz={} length={} cp_len={} antennas={}",
            self.rate_hz,
            self.len(),
            self.cp_len,
            self.antennas.len()
        )?;
        for a in &self.antennas {
            for v in a {
                w.write_all(&v.re.to_le_bytes())?;
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: BufRead>(mut r: R) -> io::Result<Self> {
        let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
        let mut header = String::new();
        r.read_line(&mut header)?;
        let mut rate_hz = None;
        let mut length = None;
        let mut cp_len = None;
        let mut count = None;
        for field in header.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| bad("malformed header"))?;
            match key {
                "rate_hz" => rate_hz = value.parse::<f64>().ok(),
                "length" => length = value.parse::<usize>().ok(),
                "cp_len" => cp_len = value.parse::<usize>().ok(),
                "antennas" => count = value.parse::<usize>().ok(),
                _ => return Err(bad("unknown header field")),
            }
        }
        let (rate_hz, length, cp_len, count) = match (rate_hz, length, cp_len, count) {
            (Some(a), Some(b), Some(c), Some(d)) if c <= b => (a, b, c, d),
            _ => return Err(bad("incomplete header")),
        };
        let mut buf = [0u8; 8];
        let mut antennas = Vec::with_capacity(count);
        for _ in 0..count {
            let mut a = Vec::with_capacity(length);
            for _ in 0..length {
                r.read_exact(&mut buf)?;
                let re = f64::from_le_bytes(buf);
                r.read_exact(&mut buf)?;
                a.push(Complex64::new(re, f64::from_le_bytes(buf)));
            }
            antennas.push(a);
        }
        Ok(Self { antennas, rate_hz, fft_len: length - cp_len, cp_len })
    }
}

fn with_cp(core: &[Complex64], cp_len: usize) -> Vec<Complex64> {
    let n = core.len();
    let mut out = Vec::with_capacity(n + cp_len);
    out.extend_from_slice(&core[n - cp_len..]);
    out.extend_from_slice(core);
    out
}

fn check_cp(sys: &FdaSystem) -> Result<usize> {
    let n = sys.params().global_len;
    let cp = sys.config().cp_len;
    if cp > n {
        return Err(Error::InvalidParameter(format!(
            "cyclic prefix ({cp}) longer than the composite symbol ({n})"
        )));
    }
    Ok(cp)
}

/// Per antenna: `x` on the `K`-grid, interpolated to rate `B` by an `N`-point
/// IDFT, shifted by `exp(j 2π m K_b n / N) / √M` and scaled by `1/√K`.
pub fn synthesize_td(x: &PrecodedSymbol, sys: &FdaSystem) -> Result<TimeDomainFrame> {
    let m_count = sys.antennas();
    if x.antennas() != m_count || x.symbols().len() != sys.block_len() {
        return Err(Error::InvalidParameter("precoded symbol does not match the system".into()));
    }
    let cp_len = check_cp(sys)?;
    let n = sys.params().global_len;
    let k = m_count * sys.block_len();
    let kb = sys.block_len() as i64;
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let xk = x.full_symbol();
    let scale = 1.0 / ((k * m_count) as f64).sqrt();
    let antennas = (0..m_count)
        .map(|slot| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            for (i, v) in xk.iter().enumerate() {
                let bin = i as i64 - (k / 2) as i64;
                buf[bin.rem_euclid(n as i64) as usize] = *v;
            }
            ifft.process(&mut buf);
            // m K_b is an integer because K_b is even.
            let shift = (AntennaIndex::from_slot(slot, m_count).value() * kb as f64).round() as i64;
            for (t, v) in buf.iter_mut().enumerate() {
                let turns = (shift * t as i64).rem_euclid(n as i64) as f64 / n as f64;
                *v *= Complex64::from_polar(scale, 2.0 * PI * turns);
            }
            with_cp(&buf, cp_len)
        })
        .collect();
    Ok(TimeDomainFrame { antennas, rate_hz: sys.config().bandwidth_hz, fft_len: n, cp_len })
}

/// Delay of antenna `m` toward a scatterer, `(d_χ - m d_λ λ sin θ) / c`.
pub fn antenna_delay(m: AntennaIndex, sc: &Scatterer, sys: &FdaSystem) -> f64 {
    let lambda = sys.params().wavelength_m;
    (sc.distance - m.value() * sys.spacing() * lambda * sc.theta.sin()) / SPEED_OF_LIGHT
}

/// Cyclic delay of an `N`-sample core by `delay_s` at rate `rate_hz`.
fn cyclic_delay(core: &[Complex64], delay_s: f64, rate_hz: f64) -> Vec<Complex64> {
    let n = core.len();
    let mut planner = FftPlanner::new();
    let mut buf = core.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    for (bin, v) in buf.iter_mut().enumerate() {
        let k = if bin < n - n / 2 { bin as f64 } else { bin as f64 - n as f64 };
        // Bin N/2 is the grid's lowest subcarrier, -N/2.
        *v *= Complex64::from_polar(1.0 / n as f64, -2.0 * PI * k * rate_hz / n as f64 * delay_s);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

/// Sum over antennas and scatterers of `χ exp(-j 2π f_c τ) y_m(t - τ)`.
///
/// Errors if any delay is negative or longer than the cyclic prefix.
pub fn propagate_td(frame: &TimeDomainFrame, scene: &ChannelScene, sys: &FdaSystem) -> Result<Vec<Complex64>> {
    let cp_s = frame.cp_len as f64 / frame.rate_hz;
    for sc in &scene.scatterers {
        for m in sys.antenna_indices() {
            let tau = antenna_delay(m, sc, sys);
            if !(0.0..=cp_s).contains(&tau) {
                return Err(Error::OutOfCp { antenna: m.value(), delay_s: tau, cp_s });
            }
        }
    }
    Ok(propagate_td_stream(None, frame, scene, sys))
}

/// Delayed and summed received frame with the tail of `previous` leaking into
/// samples whose delayed time falls before the current frame. No delay checks.
pub fn propagate_td_stream(
    previous: Option<&TimeDomainFrame>,
    frame: &TimeDomainFrame,
    scene: &ChannelScene,
    sys: &FdaSystem,
) -> Vec<Complex64> {
    let (n, cp) = (frame.fft_len, frame.cp_len);
    let fc = sys.config().carrier_hz;
    let antennas = sys.antenna_indices();
    let mut out = vec![Complex64::new(0.0, 0.0); n + cp];
    for sc in &scene.scatterers {
        for (slot, m) in antennas.iter().enumerate() {
            let tau = antenna_delay(*m, sc, sys);
            let gain = sc.coeff * Complex64::from_polar(1.0, -2.0 * PI * fc * tau);
            let cur = cyclic_delay(&frame.antennas[slot][cp..], tau, frame.rate_hz);
            let prev = previous.map(|p| cyclic_delay(&p.antennas[slot][cp..], tau, frame.rate_hz));
            let shift = tau * frame.rate_hz;
            for (i, o) in out.iter_mut().enumerate() {
                let t = i as i64 - cp as i64;
                let v = if (t as f64) - shift >= -(cp as f64) {
                    cur[t.rem_euclid(n as i64) as usize]
                } else {
                    match &prev {
                        Some(p) => p[(t + cp as i64).rem_euclid(n as i64) as usize],
                        None => Complex64::new(0.0, 0.0),
                    }
                };
                *o += gain * v;
            }
        }
    }
    out
}

/// Drops the cyclic prefix, takes the `N`-point DFT scaled by `√K / N` and maps
/// bin `k_f mod N` to `(b_f, k_b)`.
pub fn demodulate_td(samples: &[Complex64], sys: &FdaSystem) -> Result<ReceivedSpectrum> {
    let cp = check_cp(sys)?;
    let n = sys.params().global_len;
    if samples.len() != n + cp {
        return Err(Error::Framing { expected: n + cp, got: samples.len() });
    }
    let mut buf = samples[cp..].to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let k = (sys.antennas() * sys.block_len()) as f64;
    let scale = k.sqrt() / n as f64;
    let half = (n / 2) as i64;
    let flat = (0..n as i64)
        .map(|i| buf[(i - half).rem_euclid(n as i64) as usize] * scale)
        .collect();
    Ok(ReceivedSpectrum::without_noise(BlockSpectrum::from_flat(sys.antennas(), sys.block_len(), flat)))
}

/// `N`-point spectrum of one antenna's frame on the global grid, same scaling as
/// [`demodulate_td`].
pub fn antenna_spectrum(frame: &TimeDomainFrame, slot: usize, sys: &FdaSystem) -> Result<BlockSpectrum> {
    Ok(demodulate_td(&frame.antennas[slot], sys)?.r)
}

/// Synthesize, propagate and demodulate one precoded symbol.
pub fn oracle_receive(x: &PrecodedSymbol, scene: &ChannelScene, sys: &FdaSystem) -> Result<ReceivedSpectrum> {
    let frame = synthesize_td(x, sys)?;
    let rx = propagate_td(&frame, scene, sys)?;
    demodulate_td(&rx, sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{BlockIndex, SystemConfig};
    use crate::grid::relative_error;
    use crate::txchain::{assemble_fda_spectrum, generate_block_symbols, steering_grid};

    fn sys(m: usize, k: usize) -> FdaSystem {
        FdaSystem::new(SystemConfig::default().with_subcarriers(k).with_antennas(m)).unwrap()
    }

    fn precoded(s: &FdaSystem, theta: f64, seed: u64) -> PrecodedSymbol {
        PrecodedSymbol::new(generate_block_symbols(s.block_len(), seed).unwrap(), steering_grid(theta, s)).unwrap()
    }

    #[test]
    fn single_antenna_is_plain_ofdm() {
        let s = sys(1, 64);
        let x = precoded(&s, 0.0, 1);
        let frame = synthesize_td(&x, &s).unwrap();
        let mut buf = vec![Complex64::new(0.0, 0.0); 64];
        for (i, v) in x.full_symbol().iter().enumerate() {
            buf[(i as i64 - 32).rem_euclid(64) as usize] = *v / 8.0;
        }
        FftPlanner::new().plan_fft_inverse(64).process(&mut buf);
        assert!(frame.antennas[0][8..].iter().zip(&buf).all(|(a, b)| (a - b).norm() < 1e-12));
        let back = demodulate_td(&frame.antennas[0], &s).unwrap();
        for (a, b) in back.r.flat().iter().zip(x.full_symbol()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn spectra_and_power() {
        let s = sys(3, 96);
        let x = precoded(&s, 0.4, 2);
        let spec = assemble_fda_spectrum(&x, &s).unwrap();
        let frame = synthesize_td(&x, &s).unwrap();
        for slot in 0..3 {
            let y = antenna_spectrum(&frame, slot, &s).unwrap();
            assert!(relative_error(&y, spec.antenna(slot)) < 1e-9);
            let td = frame.antennas[slot][frame.cp_len..].iter().map(|v| v.norm_sqr()).sum::<f64>();
            let fd = spec.antenna(slot).energy() * frame.fft_len as f64 / 96.0;
            assert!((td / fd - 1.0).abs() < 1e-12);
        }
        assert!((frame.mean_total_power() - 1.0).abs() < 1e-12);
        let sum: Vec<Complex64> =
            (0..frame.len()).map(|i| frame.antennas.iter().map(|a| a[i]).sum()).collect();
        let composite = demodulate_td(&sum, &s).unwrap();
        assert!(relative_error(&composite.r, spec.composite()) < 1e-9);
    }

    #[test]
    fn tone_orientation() {
        // A tone on (b_f = +1, k_b = 0) advances by 2π Δf / B per sample.
        let s = sys(2, 64);
        let b1 = BlockIndex::new(1, 2).unwrap();
        let (n, cp) = (s.params().global_len, s.config().cp_len);
        let step = 2.0 * PI * s.params().block_spacing_hz / s.config().bandwidth_hz;
        let samples: Vec<Complex64> =
            (0..n + cp).map(|i| Complex64::from_polar(1.0, step * (i as f64 - cp as f64))).collect();
        let rx = demodulate_td(&samples, &s).unwrap();
        let (mut best, mut at) = (0.0, (BlockIndex::CENTER, 0));
        for b in s.block_indices() {
            for k in s.in_block_indices() {
                if rx.r.get(b, k).norm() > best {
                    best = rx.r.get(b, k).norm();
                    at = (b, k);
                }
            }
        }
        assert_eq!(at, (b1, 0));
        assert!((rx.r.get(b1, 0).norm() - 64f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn single_antenna_delay_and_carrier_phase() {
        let s = sys(1, 64);
        let x = PrecodedSymbol::new(generate_block_symbols(64, 3).unwrap(), steering_grid(0.0, &s)).unwrap();
        let d = 3.0 * SPEED_OF_LIGHT / s.config().bandwidth_hz;
        let sc = Scatterer::new(0.0, d, Complex64::new(1.0, 0.0)).unwrap();
        let frame = synthesize_td(&x, &s).unwrap();
        let rx = propagate_td(&frame, &ChannelScene::noiseless(vec![sc]), &s).unwrap();
        let rot = Complex64::from_polar(1.0, -2.0 * PI * s.config().carrier_hz * d / SPEED_OF_LIGHT);
        for i in 3..rx.len() {
            assert!((rx[i] - frame.antennas[0][i - 3] * rot).norm() < 1e-9);
        }
    }

    #[test]
    fn delay_beyond_cp_rejected() {
        let s = sys(2, 64);
        let x = precoded(&s, 0.0, 4);
        let cp_s = s.config().cp_len as f64 / s.config().bandwidth_hz;
        let sc = Scatterer::new(0.0, 1.5 * cp_s * SPEED_OF_LIGHT, Complex64::new(1.0, 0.0)).unwrap();
        let frame = synthesize_td(&x, &s).unwrap();
        assert!(matches!(
            propagate_td(&frame, &ChannelScene::noiseless(vec![sc]), &s),
            Err(Error::OutOfCp { .. })
        ));
    }

    #[test]
    fn framing_error() {
        let s = sys(2, 64);
        assert_eq!(
            demodulate_td(&[Complex64::new(0.0, 0.0); 5], &s).unwrap_err(),
            Error::Framing { expected: 96 + 8, got: 5 }
        );
    }

    #[test]
    fn binary_dump_round_trip() {
        let s = sys(2, 32);
        let frame = synthesize_td(&precoded(&s, 0.1, 5), &s).unwrap();
        let mut bytes = Vec::new();
        frame.write_binary(&mut bytes).unwrap();
        let header_len = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        assert_eq!(bytes.len() - header_len, 2 * frame.len() * 16);
        let back = TimeDomainFrame::read_binary(&bytes[..]).unwrap();
        assert_eq!(back, frame);
    }
}
