use std::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, Result};

/// Largest supported phase resolution.
pub const MAX_BITS: u32 = 16;

/// Discrete RIS configuration: element `n` applies `exp(j * idx_n * 2pi / 2^b)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RcConfig {
    bits: u32,
    indices: Vec<u32>,
}

impl RcConfig {
    pub fn new(indices: Vec<u32>, bits: u32) -> Result<Self> {
        if !(1..=MAX_BITS).contains(&bits) {
            return Err(Error::validation("b", format!("phase bits must be in 1..={MAX_BITS}, got {bits}")));
        }
        if indices.is_empty() {
            return Err(Error::validation("N", "configuration needs at least one element"));
        }
        let levels = 1u32 << bits;
        if let Some(bad) = indices.iter().find(|&&i| i >= levels) {
            return Err(Error::validation(
                "phase_indices",
                format!("index {bad} out of range for b = {bits}"),
            ));
        }
        Ok(Self { bits, indices })
    }

    /// All elements at phase zero.
    pub fn zeros(n: usize, bits: u32) -> Result<Self> {
        Self::new(vec![0; n], bits)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn levels(&self) -> u32 {
        1 << self.bits
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn phase_step(&self) -> f64 {
        2.0 * PI / f64::from(self.levels())
    }

    pub fn phase(&self, n: usize) -> f64 {
        f64::from(self.indices[n]) * self.phase_step()
    }

    pub fn coefficient_of(&self, index: u32) -> Complex64 {
        Complex64::from_polar(1.0, f64::from(index) * self.phase_step())
    }

    /// Unit-modulus reflection coefficients.
    pub fn coefficients(&self) -> Vec<Complex64> {
        self.indices.iter().map(|&i| self.coefficient_of(i)).collect()
    }

    pub fn set(&mut self, n: usize, index: u32) {
        assert!(index < self.levels(), "phase index out of range");
        self.indices[n] = index;
    }

    /// Number of elements with matching indices.
    pub fn agreement(&self, other: &RcConfig) -> usize {
        self.indices.iter().zip(&other.indices).filter(|(a, b)| a == b).count()
    }
}
