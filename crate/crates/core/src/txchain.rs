//! Transmit chain: QPSK block symbols, block replication, per-block precoding
//! and assembly of the frequency-shifted per-antenna spectra.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::{self, Write};
use std::ops::RangeInclusive;

use num_complex::Complex64;
use rand::Rng;

use crate::config::{AntennaIndex, BlockIndex, FdaSystem};
use crate::grid::BlockSpectrum;
use crate::rng;
use crate::{Error, Result};

/// Gray-mapped unit-power QPSK. Bit 0 selects the in-phase sign, bit 1 the quadrature sign.
pub fn qpsk_map(bits: u8) -> Complex64 {
    let re = if bits & 1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    let im = if bits & 2 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    Complex64::new(re, im)
}

/// Hard decision inverse of [`qpsk_map`].
pub fn qpsk_decide(z: Complex64) -> u8 {
    (z.re < 0.0) as u8 | (((z.im < 0.0) as u8) << 1)
}

/// The `K_b` data symbols carried (repeated) by every subcarrier block.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock {
    values: Vec<Complex64>,
}

impl SymbolBlock {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() || !values.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "symbol block length must be even and nonzero, got {}",
                values.len()
            )));
        }
        Ok(Self { values })
    }

    /// Symbol at in-block index `k_b` in `-K_b/2 .. K_b/2`.
    pub fn get(&self, k_b: i32) -> Complex64 {
        self.values[(k_b + (self.values.len() / 2) as i32) as usize]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn generate_block_symbols(block_len: usize, seed: u64) -> Result<SymbolBlock> {
    generate_block_symbols_with(&mut rng::seeded(seed), block_len)
}

pub fn generate_block_symbols_with<R: Rng + ?Sized>(
    rng: &mut R,
    block_len: usize,
) -> Result<SymbolBlock> {
    let values = (0..block_len).map(|_| qpsk_map(rng.random_range(0..4u8))).collect();
    SymbolBlock::new(values)
}

/// Full `K`-subcarrier symbol `s(k)`, `k` ascending from `-K/2`, with period `K_b`.
pub fn replicate_blocks(block: &SymbolBlock, antennas: usize) -> Vec<Complex64> {
    block
        .values()
        .iter()
        .copied()
        .cycle()
        .take(block.len() * antennas)
        .collect()
}

/// Steering precoder for data block `b` (integer or half-integer) at in-block index `k_b`.
///
/// With exact phases the progression scales with the subcarrier frequency,
/// `exp(j 2π b (f_c + k_b Δf_sc) d_λ sin θ / f_c)`; the narrowband switch drops
/// the `k_b` term.
pub fn steering_precoder(block: f64, k_b: i32, theta_tx: f64, sys: &FdaSystem) -> Complex64 {
    let cfg = sys.config();
    let scale = if cfg.narrowband_phase {
        1.0
    } else {
        1.0 + k_b as f64 * sys.params().subcarrier_spacing_hz / cfg.carrier_hz
    };
    Complex64::from_polar(1.0, 2.0 * PI * block * scale * cfg.spacing_wavelengths * theta_tx.sin())
}

/// Per-(data block, `k_b`) precoder weights `v(b, k_b)`.
///
/// Rows are the `M` data blocks with positions `b = slot - (M-1)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderGrid {
    antennas: usize,
    block_len: usize,
    weights: Vec<Complex64>,
}

impl PrecoderGrid {
    pub fn get(&self, slot: usize, k_b: i32) -> Complex64 {
        self.weights[slot * self.block_len + (k_b + (self.block_len / 2) as i32) as usize]
    }

    /// Data-block position `b` of row `slot`.
    pub fn block_position(&self, slot: usize) -> f64 {
        AntennaIndex::from_slot(slot, self.antennas).value()
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }
}

pub fn steering_grid(theta_tx: f64, sys: &FdaSystem) -> PrecoderGrid {
    multibeam_precoder(
        &[BeamSegment::whole_block(sys, theta_tx)],
        sys,
    )
    .expect("single full-block segment is a valid partition")
}

/// One beam of a multi-beam precoder: an inclusive `k_b` range steered to `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSegment {
    pub subcarriers: RangeInclusive<i32>,
    pub theta: f64,
}

impl BeamSegment {
    pub fn whole_block(sys: &FdaSystem, theta: f64) -> Self {
        let r = sys.in_block_indices();
        Self { subcarriers: r.start..=r.end - 1, theta }
    }
}

/// Precoder whose in-block subcarrier ranges point at different angles.
///
/// The segments must tile `-K_b/2 ..= K_b/2 - 1` exactly, so at most `K_b` beams.
pub fn multibeam_precoder(segments: &[BeamSegment], sys: &FdaSystem) -> Result<PrecoderGrid> {
    let block_len = sys.block_len();
    let half = (block_len / 2) as i32;
    let mut owner: Vec<Option<usize>> = vec![None; block_len];
    for (i, seg) in segments.iter().enumerate() {
        if seg.subcarriers.is_empty()
            || *seg.subcarriers.start() < -half
            || *seg.subcarriers.end() >= half
        {
            return Err(Error::InvalidParameter(format!(
                "beam segment {:?} outside block range {}..={}",
                seg.subcarriers,
                -half,
                half - 1
            )));
        }
        for k in seg.subcarriers.clone() {
            let o = &mut owner[(k + half) as usize];
            if let Some(prev) = o {
                return Err(Error::InvalidParameter(format!(
                    "beam segments {prev} and {i} overlap at k_b = {k}"
                )));
            }
            *o = Some(i);
        }
    }
    if let Some(gap) = owner.iter().position(Option::is_none) {
        return Err(Error::InvalidParameter(format!(
            "beam segments leave k_b = {} uncovered",
            gap as i32 - half
        )));
    }
    let antennas = sys.antennas();
    let mut weights = Vec::with_capacity(antennas * block_len);
    for slot in 0..antennas {
        let b = AntennaIndex::from_slot(slot, antennas).value();
        for (col, o) in owner.iter().enumerate() {
            let theta = segments[o.expect("checked above")].theta;
            weights.push(steering_precoder(b, col as i32 - half, theta, sys));
        }
    }
    Ok(PrecoderGrid { antennas, block_len, weights })
}

/// Precoded blocks `x(b, k_b) = s(k_b) v(b, k_b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodedSymbol {
    symbols: SymbolBlock,
    precoder: PrecoderGrid,
}

impl PrecodedSymbol {
    pub fn new(symbols: SymbolBlock, precoder: PrecoderGrid) -> Result<Self> {
        if symbols.len() != precoder.block_len {
            return Err(Error::InvalidParameter(format!(
                "symbol block length {} does not match precoder block length {}",
                symbols.len(),
                precoder.block_len
            )));
        }
        Ok(Self { symbols, precoder })
    }

    pub fn symbols(&self) -> &SymbolBlock {
        &self.symbols
    }

    pub fn precoder(&self) -> &PrecoderGrid {
        &self.precoder
    }

    pub fn antennas(&self) -> usize {
        self.precoder.antennas
    }

    /// `x` for data-block row `slot`.
    pub fn get(&self, slot: usize, k_b: i32) -> Complex64 {
        self.symbols.get(k_b) * self.precoder.get(slot, k_b)
    }

    /// `x(k)` over the per-antenna `K`-grid, `k` ascending from `-K/2`.
    pub fn full_symbol(&self) -> Vec<Complex64> {
        let half = (self.precoder.block_len / 2) as i32;
        (0..self.precoder.antennas)
            .flat_map(|slot| (-half..half).map(move |k_b| (slot, k_b)))
            .map(|(slot, k_b)| self.get(slot, k_b))
            .collect()
    }
}

/// Frequency-shifted per-antenna spectra on the global grid and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct FdaSpectrum {
    per_antenna: Vec<BlockSpectrum>,
    composite: BlockSpectrum,
    symbols: SymbolBlock,
}

impl FdaSpectrum {
    pub fn antenna(&self, slot: usize) -> &BlockSpectrum {
        &self.per_antenna[slot]
    }

    pub fn per_antenna(&self) -> &[BlockSpectrum] {
        &self.per_antenna
    }

    pub fn composite(&self) -> &BlockSpectrum {
        &self.composite
    }

    pub fn symbols(&self) -> &SymbolBlock {
        &self.symbols
    }

    /// Transmit power summed over antennas and averaged over each antenna's `K` subcarriers.
    pub fn total_power(&self) -> f64 {
        let m = self.per_antenna.len();
        let k = (m * self.composite.block_len()) as f64;
        self.per_antenna.iter().map(|y| y.energy() / k).sum()
    }

    /// Debug dump with columns `b_f,k_b,m,re,im` (nonzero entries only).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "b_f,k_b,m,re,im")?;
        let m_count = self.per_antenna.len();
        for (slot, y) in self.per_antenna.iter().enumerate() {
            let m = AntennaIndex::from_slot(slot, m_count).value();
            for b in y.block_indices() {
                let half = (y.block_len() / 2) as i32;
                for k_b in -half..half {
                    let v = y.get(b, k_b);
                    if v != Complex64::new(0.0, 0.0) {
                        writeln!(w, "{},{},{},{},{}", b.value(), k_b, m, v.re, v.im)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Places antenna `m`'s copy of the precoded blocks at global blocks `b + m`.
///
/// Antenna slot `i` radiates data row `j - i` on global row `j`, so at the
/// centre frequency antenna `m` carries the block with position `b = -m`.
pub fn assemble_fda_spectrum(x: &PrecodedSymbol, sys: &FdaSystem) -> Result<FdaSpectrum> {
    let m = sys.antennas();
    if x.antennas() != m || x.precoder.block_len != sys.block_len() {
        return Err(Error::InvalidParameter(
            "precoded symbol does not match the system dimensions".into(),
        ));
    }
    let norm = 1.0 / (m as f64).sqrt();
    let mut composite = BlockSpectrum::zeros(sys);
    let mut per_antenna = Vec::with_capacity(m);
    for ant in 0..m {
        let mut y = BlockSpectrum::zeros(sys);
        for data_slot in 0..m {
            let b_f = BlockIndex::from_slot(ant + data_slot, m);
            for k_b in sys.in_block_indices() {
                let v = x.get(data_slot, k_b) * norm;
                y.set(b_f, k_b, v);
                composite.add(b_f, k_b, v);
            }
        }
        per_antenna.push(y);
    }
    Ok(FdaSpectrum { per_antenna, composite, symbols: x.symbols.clone() })
}

/// Convenience: fresh symbols, steering precoder, assembled spectrum.
pub fn steered_spectrum<R: Rng + ?Sized>(
    rng: &mut R,
    theta_tx: f64,
    sys: &FdaSystem,
) -> FdaSpectrum {
    let symbols = generate_block_symbols_with(rng, sys.block_len()).expect("even block length");
    let x = PrecodedSymbol::new(symbols, steering_grid(theta_tx, sys)).expect("matching lengths");
    assemble_fda_spectrum(&x, sys).expect("matching system")
}
