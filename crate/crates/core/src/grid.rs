//! Block-major frequency-domain container for the global `(2M - 1) x K_b` grid.

use num_complex::Complex64;

use crate::config::{BlockIndex, FdaSystem};

/// Complex values indexed by global block `b_f` and in-block subcarrier `k_b`.
///
/// Storage is block-major with `k_b` ascending, so the flat view is ordered by
/// global subcarrier index `k_f = b_f K_b + k_b` from `-N/2` to `N/2 - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpectrum {
    antennas: usize,
    block_len: usize,
    data: Vec<Complex64>,
}

impl BlockSpectrum {
    pub fn zeros(sys: &FdaSystem) -> Self {
        Self::zeros_with(sys.antennas(), sys.block_len())
    }

    pub fn zeros_with(antennas: usize, block_len: usize) -> Self {
        Self {
            antennas,
            block_len,
            data: vec![Complex64::new(0.0, 0.0); (2 * antennas - 1) * block_len],
        }
    }

    /// Builds a grid from its flat (global subcarrier order) view.
    pub fn from_flat(antennas: usize, block_len: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), (2 * antennas - 1) * block_len, "flat length mismatch");
        Self { antennas, block_len, data }
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn blocks(&self) -> usize {
        2 * self.antennas - 1
    }

    fn offset(&self, b_f: BlockIndex, k_b: i32) -> usize {
        let col = (k_b + (self.block_len / 2) as i32) as usize;
        debug_assert!(col < self.block_len, "k_b out of range");
        b_f.slot(self.antennas) * self.block_len + col
    }

    pub fn get(&self, b_f: BlockIndex, k_b: i32) -> Complex64 {
        self.data[self.offset(b_f, k_b)]
    }

    pub fn set(&mut self, b_f: BlockIndex, k_b: i32, value: Complex64) {
        let i = self.offset(b_f, k_b);
        self.data[i] = value;
    }

    pub fn add(&mut self, b_f: BlockIndex, k_b: i32, value: Complex64) {
        let i = self.offset(b_f, k_b);
        self.data[i] += value;
    }

    /// Values of one block, `k_b` ascending.
    pub fn block(&self, b_f: BlockIndex) -> &[Complex64] {
        let start = b_f.slot(self.antennas) * self.block_len;
        &self.data[start..start + self.block_len]
    }

    pub fn block_mut(&mut self, b_f: BlockIndex) -> &mut [Complex64] {
        let start = b_f.slot(self.antennas) * self.block_len;
        &mut self.data[start..start + self.block_len]
    }

    /// Flat view ordered by global subcarrier index.
    pub fn flat(&self) -> &[Complex64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Maps a global subcarrier index `k_f` to `(b_f, k_b)`.
    pub fn split_global(&self, k_f: i32) -> (BlockIndex, i32) {
        let n = self.data.len() as i32;
        let pos = k_f + n / 2;
        let kb = self.block_len as i32;
        (
            BlockIndex::from_slot((pos / kb) as usize, self.antennas),
            pos % kb - kb / 2,
        )
    }

    pub fn mean_power(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }

    /// Squared Frobenius norm.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn block_indices(&self) -> impl Iterator<Item = BlockIndex> {
        let m = self.antennas;
        let edge = m as i32 - 1;
        (-edge..=edge).map(move |b| BlockIndex::from_slot((b + edge) as usize, m))
    }
}

/// Relative Frobenius error `||a - b|| / ||b||`.
pub fn relative_error(a: &BlockSpectrum, b: &BlockSpectrum) -> f64 {
    assert_eq!(a.flat().len(), b.flat().len());
    let diff: f64 = a
        .flat()
        .iter()
        .zip(b.flat())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    (diff / b.energy()).sqrt()
}
