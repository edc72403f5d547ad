//! Line-of-sight channel, array factor and the per-block received signal.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::config::{AntennaIndex, BlockIndex, FdaSystem};
use crate::grid::BlockSpectrum;
use crate::rng;
use crate::txchain::FdaSpectrum;
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Receiver or point target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    /// Angle from boresight, radians.
    pub theta: f64,
    /// Propagation distance `d_χ`, metres: `d` for a link, `2d` for a monostatic target.
    pub distance: f64,
    /// Complex gain `χ` (attenuation `α` or scattering coefficient `γ`).
    pub coeff: Complex64,
}

impl Scatterer {
    pub fn new(theta: f64, distance: f64, coeff: Complex64) -> Result<Self> {
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(Error::InvalidParameter(format!("distance must be > 0, got {distance}")));
        }
        if theta.abs() > PI / 2.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!("|theta| must be <= π/2, got {theta}")));
        }
        Ok(Self { theta, distance, coeff })
    }

    /// Monostatic target at `range_m` seen by the receiver at the array centre.
    pub fn target(theta: f64, range_m: f64, coeff: Complex64) -> Result<Self> {
        Self::new(theta, 2.0 * range_m, coeff)
    }

    pub fn range_m(&self) -> f64 {
        self.distance / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScene {
    pub scatterers: Vec<Scatterer>,
    /// Complex Gaussian noise variance per global subcarrier (linear).
    pub noise_variance: f64,
}

impl ChannelScene {
    pub fn new(scatterers: Vec<Scatterer>, noise_variance: f64) -> Result<Self> {
        if !(noise_variance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be >= 0, got {noise_variance}"
            )));
        }
        Ok(Self { scatterers, noise_variance })
    }

    pub fn noiseless(scatterers: Vec<Scatterer>) -> Self {
        Self { scatterers, noise_variance: 0.0 }
    }
}

/// Propagation coefficient `β(b_f, k_b) = χ exp(-j 2π f d_χ / c)` with exact frequency.
pub fn beta(b_f: BlockIndex, k_b: i32, sc: &Scatterer, sys: &FdaSystem) -> Complex64 {
    // Carrier and baseband turns are reduced separately so the phase keeps
    // full precision across subcarriers.
    let tau = sc.distance / SPEED_OF_LIGHT;
    let turns = (sys.config().carrier_hz * tau).fract() + sys.baseband_frequency(b_f, k_b) * tau;
    sc.coeff * Complex64::from_polar(1.0, -2.0 * PI * turns)
}

/// Channel from antenna `m` on global subcarrier `(b_f, k_b)` to the scatterer.
pub fn channel_response(
    m: AntennaIndex,
    b_f: BlockIndex,
    k_b: i32,
    sc: &Scatterer,
    sys: &FdaSystem,
) -> Complex64 {
    let cfg = sys.config();
    let ratio = if cfg.narrowband_phase { 1.0 } else { sys.frequency(b_f, k_b) / cfg.carrier_hz };
    let steer = 2.0 * PI * m.value() * cfg.spacing_wavelengths * sc.theta.sin() * ratio;
    beta(b_f, k_b, sc, sys) * Complex64::from_polar(1.0, steer)
}

/// Channel responses of a scene summed over scatterers, cached per (antenna, b_f, k_b).
#[derive(Debug, Clone)]
pub struct LinkChannel {
    antennas: usize,
    per_antenna: Vec<BlockSpectrum>,
}

impl LinkChannel {
    pub fn new(scatterers: &[Scatterer], sys: &FdaSystem) -> Self {
        let per_antenna = sys
            .antenna_indices()
            .into_iter()
            .enumerate()
            .map(|(slot, m)| {
                let mut h = BlockSpectrum::zeros(sys);
                for b_f in sys.block_indices() {
                    if !sys.contributing_slots(b_f).contains(&slot) {
                        continue;
                    }
                    for k_b in sys.in_block_indices() {
                        let v = scatterers
                            .iter()
                            .map(|sc| channel_response(m, b_f, k_b, sc, sys))
                            .sum();
                        h.set(b_f, k_b, v);
                    }
                }
                h
            })
            .collect();
        Self { antennas: sys.antennas(), per_antenna }
    }

    /// Noiseless received spectrum `Σ_m y_m(b_f, k_b) h(m, b_f, k_b)`.
    pub fn apply(&self, spec: &FdaSpectrum) -> BlockSpectrum {
        assert_eq!(spec.per_antenna().len(), self.antennas, "antenna count mismatch");
        let first = &spec.per_antenna()[0];
        let mut out = BlockSpectrum::zeros_with(self.antennas, first.block_len());
        for (y, h) in spec.per_antenna().iter().zip(&self.per_antenna) {
            for ((o, yv), hv) in out.flat_mut().iter_mut().zip(y.flat()).zip(h.flat()) {
                *o += yv * hv;
            }
        }
        out
    }
}

/// Received grid, with the noiseless copy kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSpectrum {
    pub r: BlockSpectrum,
    pub noiseless: BlockSpectrum,
    pub noise_variance: f64,
}

impl ReceivedSpectrum {
    pub fn without_noise(r: BlockSpectrum) -> Self {
        Self { noiseless: r.clone(), r, noise_variance: 0.0 }
    }
}

pub fn propagate(
    spec: &FdaSpectrum,
    scene: &ChannelScene,
    seed: u64,
    sys: &FdaSystem,
) -> ReceivedSpectrum {
    let link = LinkChannel::new(&scene.scatterers, sys);
    propagate_with(spec, &link, scene.noise_variance, &mut rng::seeded(seed))
}

/// Propagation through a cached channel with noise drawn from `rng`.
pub fn propagate_with<R: Rng + ?Sized>(
    spec: &FdaSpectrum,
    link: &LinkChannel,
    noise_variance: f64,
    rng: &mut R,
) -> ReceivedSpectrum {
    let noiseless = link.apply(spec);
    let mut r = noiseless.clone();
    if noise_variance > 0.0 {
        for v in r.flat_mut() {
            *v += rng::complex_gaussian(rng, noise_variance);
        }
    }
    ReceivedSpectrum { r, noiseless, noise_variance }
}

/// Array factor of the subarray radiating block `b_f`:
/// `(1/√M) Σ_m exp(j 2π m d_λ (sin θ_RT - sin θ_TX))` over the contributing antennas.
pub fn array_factor(b_f: BlockIndex, theta_rt: f64, theta_tx: f64, sys: &FdaSystem) -> Complex64 {
    let m = sys.antennas();
    let du = theta_rt.sin() - theta_tx.sin();
    let sum: Complex64 = sys
        .contributing_slots(b_f)
        .map(|slot| {
            let pos = AntennaIndex::from_slot(slot, m).value();
            Complex64::from_polar(1.0, 2.0 * PI * pos * sys.spacing() * du)
        })
        .sum();
    sum / (m as f64).sqrt()
}

/// Subarray phase-centre factor `exp(jπ b_f d_λ (sin θ_RT - sin θ_TX))`.
pub fn af_phase_center(b_f: BlockIndex, theta_rt: f64, theta_tx: f64, sys: &FdaSystem) -> Complex64 {
    let du = theta_rt.sin() - theta_tx.sin();
    Complex64::from_polar(1.0, PI * b_f.value() as f64 * sys.spacing() * du)
}

/// Real amplitude left after removing the phase-centre factor. Equals `|AF|`
/// inside the main lobe and changes sign across each null.
pub fn af_signed_amplitude(b_f: BlockIndex, theta_rt: f64, theta_tx: f64, sys: &FdaSystem) -> f64 {
    (array_factor(b_f, theta_rt, theta_tx, sys) * af_phase_center(b_f, theta_rt, theta_tx, sys).conj()).re
}

/// Closed-form per-block received value for a steered transmission:
/// `s β exp(jπ b_f d_λ (sin θ_RT + sin θ_TX)) A(b_f)`, `A` the signed AF amplitude.
///
/// Matches [`propagate`] exactly when `narrowband_phase` is set.
pub fn received_signal_model(
    b_f: BlockIndex,
    k_b: i32,
    symbol: Complex64,
    sc: &Scatterer,
    theta_tx: f64,
    sys: &FdaSystem,
) -> Complex64 {
    symbol * block_gain(b_f, k_b, sc, theta_tx, sys)
}

/// Symbol-to-receiver gain of the closed-form model for one scatterer.
pub fn block_gain(
    b_f: BlockIndex,
    k_b: i32,
    sc: &Scatterer,
    theta_tx: f64,
    sys: &FdaSystem,
) -> Complex64 {
    let phase = Complex64::from_polar(
        1.0,
        PI * b_f.value() as f64 * sys.spacing() * (sc.theta.sin() + theta_tx.sin()),
    );
    beta(b_f, k_b, sc, sys) * phase * af_signed_amplitude(b_f, sc.theta, theta_tx, sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;
    use crate::txchain::steered_spectrum;

    fn sys(m: usize, k: usize, narrow: bool) -> FdaSystem {
        FdaSystem::new(
            SystemConfig::default().with_subcarriers(k).with_antennas(m).with_narrowband_phase(narrow),
        )
        .unwrap()
    }

    #[test]
    fn boresight_response_independent_of_antenna() {
        let s = sys(4, 64, false);
        let sc = Scatterer::new(0.0, 37.3, Complex64::new(0.7, 0.2)).unwrap();
        let b = BlockIndex::new(2, 4).unwrap();
        let ants = s.antenna_indices();
        let h0 = channel_response(ants[0], b, 3, &sc, &s);
        for m in &ants[1..] {
            assert!((channel_response(*m, b, 3, &sc, &s) - h0).norm() < 1e-12);
        }
    }

    #[test]
    fn whole_wavelength_distance() {
        let s = sys(1, 64, false);
        let sc = Scatterer::new(0.3, s.params().wavelength_m * 1000.0, Complex64::new(1.0, 0.0)).unwrap();
        let h = channel_response(AntennaIndex::from_slot(0, 1), BlockIndex::CENTER, 0, &sc, &s);
        assert!((h - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn half_element_phase_step() {
        let s = sys(2, 64, false);
        let sc = Scatterer::new(30f64.to_radians(), 12.0, Complex64::new(1.0, 0.0)).unwrap();
        let ants = s.antenna_indices();
        let hp = channel_response(ants[1], BlockIndex::CENTER, 0, &sc, &s);
        let hm = channel_response(ants[0], BlockIndex::CENTER, 0, &sc, &s);
        assert!(((hp / hm).arg() - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn array_factor_examples() {
        let s = sys(3, 96, false);
        for b in s.block_indices() {
            let af = array_factor(b, 0.4, 0.4, &s);
            let want = b.overlap(3) as f64 / 3f64.sqrt();
            assert!((af - Complex64::new(want, 0.0)).norm() < 1e-12);
        }
        let g = array_factor(BlockIndex::CENTER, 0.0, 0.0, &s).norm_sqr();
        assert!((g - 3.0).abs() < 1e-12);
        assert!((10.0 * g.log10() - 4.771).abs() < 1e-3);

        let s1 = sys(1, 64, false);
        for th in [-1.2, 0.0, 0.9] {
            assert!((array_factor(BlockIndex::CENTER, th, 0.2, &s1) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn model_examples() {
        let s = sys(3, 96, true);
        let sym = Complex64::new(0.0, 1.0);
        let sc = Scatterer::new(0.3, 40.0, Complex64::new(1.0, 0.0)).unwrap();
        // b_f = 0 carries no phase-centre rotation.
        let r0 = received_signal_model(BlockIndex::CENTER, 2, sym, &sc, 0.1, &s);
        let want = sym * beta(BlockIndex::CENTER, 2, &sc, &s) * array_factor(BlockIndex::CENTER, 0.3, 0.1, &s).norm();
        assert!((r0 - want).norm() < 1e-12);

        // Matched angles, b_f = 1: phase π d_λ 2 sin θ and amplitude (M-1)/√M.
        let sc = Scatterer::new(0.25, 40.0, Complex64::new(1.0, 0.0)).unwrap();
        let b1 = BlockIndex::new(1, 3).unwrap();
        let r1 = received_signal_model(b1, 0, Complex64::new(1.0, 0.0), &sc, 0.25, &s);
        let ratio = r1 / beta(b1, 0, &sc, &s);
        assert!((ratio.norm() - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((ratio.arg() - PI * 0.5 * 2.0 * 0.25f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn propagate_examples() {
        let mut r = rng::seeded(1);
        // M = 1, one scatterer, no noise: r = s v h.
        let s1 = sys(1, 32, false);
        let spec = steered_spectrum(&mut r, 0.2, &s1);
        let sc = Scatterer::new(0.4, 30.0, Complex64::new(0.5, -0.1)).unwrap();
        let rx = propagate(&spec, &ChannelScene::noiseless(vec![sc]), 0, &s1);
        for k in s1.in_block_indices() {
            let want = spec.symbols().get(k)
                * crate::txchain::steering_precoder(0.0, k, 0.2, &s1)
                * channel_response(AntennaIndex::from_slot(0, 1), BlockIndex::CENTER, k, &sc, &s1);
            assert!((rx.r.get(BlockIndex::CENTER, k) - want).norm() < 1e-12);
        }

        // M = 3 matched: centre |r| = √3 |s|, edges |r| = |s|/√3.
        let s3 = sys(3, 96, false);
        let theta = 0.3;
        let spec = steered_spectrum(&mut r, theta, &s3);
        let sc = Scatterer::new(theta, 30.0, Complex64::new(1.0, 0.0)).unwrap();
        let rx = propagate(&spec, &ChannelScene::noiseless(vec![sc]), 0, &s3);
        for k in s3.in_block_indices() {
            assert!((rx.r.get(BlockIndex::CENTER, k).norm() - 3f64.sqrt()).abs() < 1e-9);
            for edge in [-2, 2] {
                let b = BlockIndex::new(edge, 3).unwrap();
                assert!((rx.r.get(b, k).norm() - 1.0 / 3f64.sqrt()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn noise_variance_matches_configuration() {
        let s = sys(2, 64, false);
        let spec = steered_spectrum(&mut rng::seeded(2), 0.0, &s);
        let link = LinkChannel::new(&[], &s);
        let mut r = rng::seeded(3);
        let mut acc = 0.0;
        let mut n = 0usize;
        while n < 100_000 {
            let rx = propagate_with(&spec, &link, 0.25, &mut r);
            acc += rx.r.flat().iter().map(|v| v.norm_sqr()).sum::<f64>();
            n += rx.r.flat().len();
        }
        let var = acc / n as f64;
        assert!((var / 0.25 - 1.0).abs() < 0.02, "{var}");
    }
}
