//! System parameters, antenna indexing and the derived FDA quantities.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, SPEED_OF_LIGHT};

/// Physical and OFDM parameters of the array.
///
/// `bandwidth_hz` is the total bandwidth occupied by all `2M - 1` blocks; the
/// per-antenna (DAC) bandwidth is derived from it.
///
/// Fields missing from a deserialized config take their [`Default`] values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Carrier frequency, Hz.
    pub carrier_hz: f64,
    /// Total FDA bandwidth, Hz.
    pub bandwidth_hz: f64,
    /// Subcarriers per antenna (`K`).
    pub subcarriers: usize,
    /// Antenna count (`M`).
    pub antennas: usize,
    /// Element spacing in wavelengths.
    pub spacing_wavelengths: f64,
    /// Cyclic prefix length in samples at the composite rate `B`.
    pub cp_len: usize,
    /// Per-subcarrier receive SNR before array gain, dB.
    pub snr_db: f64,
    /// Drop the frequency dependence of the per-antenna phase terms
    /// (precoder and channel use `f_c` only). Default is exact phases.
    pub narrowband_phase: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 28e9,
            bandwidth_hz: 100e6,
            subcarriers: 1024,
            antennas: 2,
            spacing_wavelengths: 0.5,
            cp_len: 1024 / 8,
            snr_db: 10.0,
            narrowband_phase: false,
        }
    }
}

impl SystemConfig {
    pub fn with_antennas(mut self, antennas: usize) -> Self {
        self.antennas = antennas;
        self
    }

    pub fn with_subcarriers(mut self, subcarriers: usize) -> Self {
        self.subcarriers = subcarriers;
        self.cp_len = subcarriers / 8;
        self
    }

    pub fn with_narrowband_phase(mut self, on: bool) -> Self {
        self.narrowband_phase = on;
        self
    }

    /// Noise variance per subcarrier for the configured SNR (unit symbol power).
    pub fn noise_variance(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.antennas;
        let k = self.subcarriers;
        if m == 0 {
            return Err(Error::InvalidParameter("antenna count must be >= 1".into()));
        }
        if k < m {
            return Err(Error::InvalidParameter(format!(
                "subcarriers ({k}) must be >= antennas ({m})"
            )));
        }
        if !k.is_multiple_of(m) {
            return Err(Error::InvalidParameter(format!(
                "subcarriers ({k}) must be divisible by antennas ({m})"
            )));
        }
        // Symmetric in-block indexing and half-block shifts for even M need an even block.
        if !(k / m).is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "block length K/M = {} must be even",
                k / m
            )));
        }
        for (name, v) in [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("spacing_wavelengths", self.spacing_wavelengths),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.snr_db.is_nan() {
            return Err(Error::InvalidParameter("snr_db is NaN".into()));
        }
        Ok(())
    }
}

/// Quantities that follow from the partial-overlap frequency offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdaParams {
    /// Per-antenna transmit bandwidth `B_TX = B M / (2M - 1)`, Hz.
    pub tx_bandwidth_hz: f64,
    /// Inter-antenna frequency offset (one block width) `B_TX / M`, Hz.
    pub block_spacing_hz: f64,
    /// Subcarrier spacing `B_TX / K`, Hz.
    pub subcarrier_spacing_hz: f64,
    /// Subcarriers per block `K / M`.
    pub block_len: usize,
    /// DAC sampling rate, equal to `B_TX`.
    pub dac_rate_hz: f64,
    /// Number of global blocks `2M - 1`.
    pub global_blocks: usize,
    /// Subcarriers on the global grid `(2M - 1) K / M`.
    pub global_len: usize,
    /// Carrier wavelength, m.
    pub wavelength_m: f64,
}

pub fn derive_fda_params(cfg: &SystemConfig) -> Result<FdaParams> {
    cfg.validate()?;
    let m = cfg.antennas as f64;
    let tx_bandwidth_hz = cfg.bandwidth_hz * m / (2.0 * m - 1.0);
    let block_spacing_hz = tx_bandwidth_hz / m;
    let block_len = cfg.subcarriers / cfg.antennas;
    let params = FdaParams {
        tx_bandwidth_hz,
        block_spacing_hz,
        subcarrier_spacing_hz: tx_bandwidth_hz / cfg.subcarriers as f64,
        block_len,
        dac_rate_hz: tx_bandwidth_hz,
        global_blocks: 2 * cfg.antennas - 1,
        global_len: (2 * cfg.antennas - 1) * block_len,
        wavelength_m: SPEED_OF_LIGHT / cfg.carrier_hz,
    };
    let occupied = 2.0 * tx_bandwidth_hz - tx_bandwidth_hz / m;
    debug_assert!(((occupied - cfg.bandwidth_hz) / cfg.bandwidth_hz).abs() < 1e-12);
    Ok(params)
}

/// A validated configuration together with its derived parameters.
///
/// Every signal-processing entry point takes one of these.
#[derive(Debug, Clone, PartialEq)]
pub struct FdaSystem {
    cfg: SystemConfig,
    params: FdaParams,
}

impl FdaSystem {
    pub fn new(cfg: SystemConfig) -> Result<Self> {
        let params = derive_fda_params(&cfg)?;
        Ok(Self { cfg, params })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn params(&self) -> &FdaParams {
        &self.params
    }

    pub fn antennas(&self) -> usize {
        self.cfg.antennas
    }

    pub fn block_len(&self) -> usize {
        self.params.block_len
    }

    pub fn global_blocks(&self) -> usize {
        self.params.global_blocks
    }

    pub fn spacing(&self) -> f64 {
        self.cfg.spacing_wavelengths
    }

    /// Absolute frequency of global subcarrier `(b_f, k_b)`.
    pub fn frequency(&self, b_f: BlockIndex, k_b: i32) -> f64 {
        self.cfg.carrier_hz + self.baseband_frequency(b_f, k_b)
    }

    /// Offset of global subcarrier `(b_f, k_b)` from the carrier.
    pub fn baseband_frequency(&self, b_f: BlockIndex, k_b: i32) -> f64 {
        b_f.value() as f64 * self.params.block_spacing_hz + k_b as f64 * self.params.subcarrier_spacing_hz
    }

    /// In-block subcarrier indices `-K_b/2 ..= K_b/2 - 1`.
    pub fn in_block_indices(&self) -> std::ops::Range<i32> {
        let half = (self.params.block_len / 2) as i32;
        -half..half
    }

    /// Global block indices `-(M-1) ..= M-1`.
    pub fn block_indices(&self) -> impl Iterator<Item = BlockIndex> {
        let edge = self.cfg.antennas as i32 - 1;
        (-edge..=edge).map(BlockIndex)
    }

    pub fn antenna_indices(&self) -> Vec<AntennaIndex> {
        antenna_indices(self.cfg.antennas).expect("validated antenna count")
    }

    /// Slot range `[lo, hi]` of antennas radiating global block `b_f`.
    pub(crate) fn contributing_slots(&self, b_f: BlockIndex) -> std::ops::RangeInclusive<usize> {
        let m = self.cfg.antennas;
        let j = b_f.slot(m);
        let lo = (j + 1).saturating_sub(m);
        let hi = j.min(m - 1);
        lo..=hi
    }
}

/// Antenna position index; integer for odd `M`, half-integer for even `M`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct AntennaIndex(f64);

impl AntennaIndex {
    /// Index of the antenna stored at `slot` (0-based, ascending) of an `M`-element array.
    pub fn from_slot(slot: usize, antennas: usize) -> Self {
        AntennaIndex(slot as f64 - (antennas as f64 - 1.0) / 2.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Block position on the global `2M - 1` block grid; `0` is centred on `f_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BlockIndex(i32);

impl BlockIndex {
    pub fn new(b_f: i32, antennas: usize) -> Result<Self> {
        if b_f.unsigned_abs() as usize >= antennas.max(1) {
            return Err(Error::InvalidParameter(format!(
                "block index {b_f} outside +/-{}",
                antennas as i32 - 1
            )));
        }
        Ok(BlockIndex(b_f))
    }

    pub const CENTER: BlockIndex = BlockIndex(0);

    pub fn value(self) -> i32 {
        self.0
    }

    /// Row in a `(2M - 1)`-block grid.
    pub fn slot(self, antennas: usize) -> usize {
        (self.0 + antennas as i32 - 1) as usize
    }

    pub fn from_slot(slot: usize, antennas: usize) -> Self {
        BlockIndex(slot as i32 - (antennas as i32 - 1))
    }

    /// Number of antennas radiating this block, `M - |b_f|`.
    pub fn overlap(self, antennas: usize) -> usize {
        antennas - self.0.unsigned_abs() as usize
    }
}

pub fn antenna_indices(antennas: usize) -> Result<Vec<AntennaIndex>> {
    if antennas == 0 {
        return Err(Error::InvalidParameter("antenna count must be >= 1".into()));
    }
    Ok((0..antennas)
        .map(|slot| AntennaIndex::from_slot(slot, antennas))
        .collect())
}

/// Far-field path difference of antenna `m` relative to the array centre, metres.
pub fn path_difference(m: AntennaIndex, theta: f64, sys: &FdaSystem) -> f64 {
    m.value() * sys.spacing() * sys.params().wavelength_m * theta.sin()
}
