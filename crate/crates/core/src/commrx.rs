//! Communication receivers with genie (known-channel) equalization.
//!
//! Gains are referenced to the symbol energy the array radiates into the
//! receiver's band: one block-width for the single-block receiver (energy 1 per
//! data symbol) and all `2M - 1` blocks for the full-band receiver (energy `M`).
//! With that reference a matched single-block receiver gains `M` and the
//! coherent full-band receiver gains `M² / (2M - 1)`.

use num_complex::Complex64;

use crate::channel::{af_signed_amplitude, beta, ReceivedSpectrum, Scatterer};
use crate::config::{BlockIndex, FdaSystem};
use crate::txchain::{qpsk_decide, SymbolBlock};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverKind {
    SingleBlock,
    FullBand,
}

impl ReceiverKind {
    pub fn label(self) -> &'static str {
        match self {
            ReceiverKind::SingleBlock => "single_block",
            ReceiverKind::FullBand => "full_band",
        }
    }

    /// Analytic SNR gain at matched angles.
    pub fn analytic_gain(self, antennas: usize) -> f64 {
        let m = antennas as f64;
        match self {
            ReceiverKind::SingleBlock => m,
            ReceiverKind::FullBand => m * m / (2.0 * m - 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommReport {
    pub kind: ReceiverKind,
    /// Measured signal power over residual error power, dB.
    pub post_snr_db: f64,
    /// RMS error vector magnitude relative to the recovered symbol amplitude.
    pub evm: f64,
    pub ser: f64,
    /// `log2(1 + G snr_in)` with the measured gain `G`.
    pub capacity_bps_hz: f64,
    /// Measured SNR minus the radiated-energy reference, dB.
    pub gain_db: f64,
    pub symbols: usize,
}

/// Equalized and combined symbol estimates together with the transmitted symbols.
///
/// Accumulate across OFDM symbols with [`Combined::extend`] before reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Combined {
    pub kind: ReceiverKind,
    pub estimates: Vec<Complex64>,
    pub sent: Vec<Complex64>,
    /// Reference SNR (linear): radiated symbol energy in band times `|χ|²` over noise.
    pub reference_snr: f64,
    /// Input per-subcarrier SNR (linear), `|χ|² / σ²`.
    pub input_snr: f64,
}

impl Combined {
    pub fn extend(&mut self, other: Combined) {
        assert_eq!(self.kind, other.kind);
        self.estimates.extend(other.estimates);
        self.sent.extend(other.sent);
    }

    pub fn report(&self) -> CommReport {
        let n = self.estimates.len() as f64;
        let amp: Complex64 = self
            .estimates
            .iter()
            .zip(&self.sent)
            .map(|(z, s)| z * s.conj())
            .sum::<Complex64>()
            / n;
        let err_power = self
            .estimates
            .iter()
            .zip(&self.sent)
            .map(|(z, s)| (z - amp * s).norm_sqr())
            .sum::<f64>()
            / n;
        let post = amp.norm_sqr() / err_power;
        let derotate = if amp.norm() > 0.0 { amp.conj() / amp.norm() } else { Complex64::new(1.0, 0.0) };
        let errors = self
            .estimates
            .iter()
            .zip(&self.sent)
            .filter(|(z, s)| qpsk_decide(**z * derotate) != qpsk_decide(**s))
            .count();
        let gain = post / self.reference_snr;
        CommReport {
            kind: self.kind,
            post_snr_db: 10.0 * post.log10(),
            evm: if amp.norm() > 0.0 { err_power.sqrt() / amp.norm() } else { f64::INFINITY },
            ser: errors as f64 / n,
            capacity_bps_hz: (1.0 + gain * self.input_snr).log2(),
            gain_db: 10.0 * gain.log10(),
            symbols: self.estimates.len(),
        }
    }
}

fn check_inputs(rx: &ReceivedSpectrum, known: &SymbolBlock, sys: &FdaSystem) -> Result<()> {
    if rx.r.antennas() != sys.antennas() || rx.r.block_len() != known.len() {
        return Err(Error::ContractViolation(
            "received grid does not match the system or the known symbols".into(),
        ));
    }
    if !(rx.noise_variance > 0.0) {
        return Err(Error::ContractViolation(
            "SNR reference needs a positive noise variance".into(),
        ));
    }
    Ok(())
}

/// Narrowband receiver on block `b_f = 0`: divides out `β(0, k_b)` and keeps the array gain.
pub fn combine_single_block(
    rx: &ReceivedSpectrum,
    known: &SymbolBlock,
    sc: &Scatterer,
    sys: &FdaSystem,
) -> Result<Combined> {
    check_inputs(rx, known, sys)?;
    let b0 = BlockIndex::CENTER;
    let estimates = sys
        .in_block_indices()
        .map(|k| rx.r.get(b0, k) / beta(b0, k, sc, sys) * sc.coeff.norm())
        .collect();
    let input_snr = sc.coeff.norm_sqr() / rx.noise_variance;
    Ok(Combined {
        kind: ReceiverKind::SingleBlock,
        estimates,
        sent: known.values().to_vec(),
        reference_snr: input_snr * radiated_energy(ReceiverKind::SingleBlock, sys),
        input_snr,
    })
}

/// Full-bandwidth receiver: removes `β`, the phase-centre term and the AF sign of
/// every block, then sums the `2M - 1` block estimates with equal weights.
pub fn combine_full_band(
    rx: &ReceivedSpectrum,
    known: &SymbolBlock,
    sc: &Scatterer,
    theta_tx: f64,
    sys: &FdaSystem,
) -> Result<Combined> {
    check_inputs(rx, known, sys)?;
    let d = sys.spacing();
    let mut estimates = vec![Complex64::new(0.0, 0.0); known.len()];
    for b in sys.block_indices() {
        let phase = Complex64::from_polar(
            1.0,
            std::f64::consts::PI * b.value() as f64 * d * (sc.theta.sin() + theta_tx.sin()),
        );
        let sign = af_signed_amplitude(b, sc.theta, theta_tx, sys).signum();
        for (z, k) in estimates.iter_mut().zip(sys.in_block_indices()) {
            *z += rx.r.get(b, k) / (beta(b, k, sc, sys) * phase) * (sign * sc.coeff.norm());
        }
    }
    let input_snr = sc.coeff.norm_sqr() / rx.noise_variance;
    Ok(Combined {
        kind: ReceiverKind::FullBand,
        estimates,
        sent: known.values().to_vec(),
        reference_snr: input_snr * radiated_energy(ReceiverKind::FullBand, sys),
        input_snr,
    })
}

/// Energy per data symbol radiated into the receiver's band (unit-modulus precoders).
pub fn radiated_energy(kind: ReceiverKind, sys: &FdaSystem) -> f64 {
    let m = sys.antennas();
    let blocks: Vec<BlockIndex> = match kind {
        ReceiverKind::SingleBlock => vec![BlockIndex::CENTER],
        ReceiverKind::FullBand => sys.block_indices().collect(),
    };
    blocks.iter().map(|b| b.overlap(m) as f64).sum::<f64>() / m as f64
}

pub fn receive_single_block(
    rx: &ReceivedSpectrum,
    known: &SymbolBlock,
    sc: &Scatterer,
    sys: &FdaSystem,
) -> Result<CommReport> {
    Ok(combine_single_block(rx, known, sc, sys)?.report())
}

pub fn receive_full_band(
    rx: &ReceivedSpectrum,
    known: &SymbolBlock,
    sc: &Scatterer,
    theta_tx: f64,
    sys: &FdaSystem,
) -> Result<CommReport> {
    Ok(combine_full_band(rx, known, sc, theta_tx, sys)?.report())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityPoint {
    pub antennas: usize,
    pub snr_db: f64,
    pub single_block: f64,
    pub full_band: f64,
    /// Capacities divided by the single-antenna value `log2(1 + snr)`.
    pub single_block_normalized: f64,
    pub full_band_normalized: f64,
}

/// Analytic capacities `log2(1 + M snr)` and `log2(1 + M²/(2M-1) snr)`.
pub fn capacity_curves(snr_db: f64, antennas: &[usize]) -> Vec<CapacityPoint> {
    let snr = 10f64.powf(snr_db / 10.0);
    let base = (1.0 + snr).log2();
    antennas
        .iter()
        .map(|&m| {
            let sb = (1.0 + ReceiverKind::SingleBlock.analytic_gain(m) * snr).log2();
            let fb = (1.0 + ReceiverKind::FullBand.analytic_gain(m) * snr).log2();
            CapacityPoint {
                antennas: m,
                snr_db,
                single_block: sb,
                full_band: fb,
                single_block_normalized: sb / base,
                full_band_normalized: fb / base,
            }
        })
        .collect()
}
