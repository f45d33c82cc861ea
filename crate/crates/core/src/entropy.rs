//! 1-gram Shannon entropy of byte streams, in bits per byte.

use alloc::vec::Vec;

use thiserror::Error;

pub const DEFAULT_WINDOW: usize = 64;
pub const DEFAULT_STRIDE: usize = 16;
/// Default TRANSEC tolerance, in bits per byte.
pub const DEFAULT_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EntropyError {
    #[error("entropy of an empty byte sequence is undefined")]
    Empty,
    #[error("window and stride must be at least 1")]
    BadWindow,
    #[error("window of {window} bytes exceeds data length {len}")]
    WindowTooLarge { window: usize, len: usize },
}

pub fn byte_entropy(data: &[u8]) -> Result<f64, EntropyError> {
    if data.is_empty() {
        return Err(EntropyError::Empty);
    }
    let mut counts = [0usize; 256];
    for &b in data {
        counts[b as usize] += 1;
    }
    Ok(entropy_of_counts(&counts, data.len()))
}

fn entropy_of_counts(counts: &[usize; 256], len: usize) -> f64 {
    let n = len as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * libm::log2(p)
        })
        .sum();
    // a single symbol sums to -0.0, which clamp keeps; adding 0.0 clears the sign
    h.clamp(0.0, 8.0) + 0.0
}

/// Absolute difference of the two byte entropies.
pub fn transec_distance(a: &[u8], b: &[u8]) -> Result<f64, EntropyError> {
    Ok(libm::fabs(byte_entropy(a)? - byte_entropy(b)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyProfile {
    pub window: usize,
    pub stride: usize,
    pub values: Vec<f64>,
}

impl EntropyProfile {
    /// `(offset, entropy)` pairs.
    pub fn points(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &h)| (i * self.stride, h))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

pub fn sliding_profile(
    data: &[u8],
    window: usize,
    stride: usize,
) -> Result<EntropyProfile, EntropyError> {
    if window == 0 || stride == 0 {
        return Err(EntropyError::BadWindow);
    }
    if data.len() < window {
        return Err(EntropyError::WindowTooLarge { window, len: data.len() });
    }
    let values = (0..=(data.len() - window) / stride)
        .map(|i| byte_entropy(&data[i * stride..i * stride + window]))
        .collect::<Result<_, _>>()?;
    Ok(EntropyProfile { window, stride, values })
}
