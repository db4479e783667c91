//! Sign-magnitude fixed-point codec and bitplane slicing.
//!
//! A real value `x` maps to a sign and a `B`-bit magnitude code
//! `round(|x| · (2^B − 1) / x_max)`, rounding halves away from zero and
//! clamping at full scale. The sign applies to every bitplane of the element,
//! mirroring crossbars that drive separate lines for positive and negative
//! inputs.

use crate::error::{Error, Result};

/// Widest supported magnitude code.
pub const MAX_BITS: u32 = 24;

/// Largest magnitude code for `num_bits` bits, `2^B − 1`.
pub fn full_scale(num_bits: u32) -> u32 {
    (1u32 << num_bits) - 1
}

/// Real value of one code step, `x_max / (2^B − 1)`.
pub fn code_step(num_bits: u32, x_max: f64) -> f64 {
    x_max / full_scale(num_bits) as f64
}

fn check_params(num_bits: u32, x_max: f64) -> Result<()> {
    if num_bits == 0 || num_bits > MAX_BITS {
        return Err(Error::domain(format!(
            "bit width {num_bits} outside 1..={MAX_BITS}"
        )));
    }
    if !(x_max.is_finite() && x_max > 0.0) {
        return Err(Error::domain(format!("full-scale magnitude {x_max} must be positive and finite")));
    }
    Ok(())
}

/// Quantized input vector: per-element signs plus `B` magnitude bitplanes.
#[derive(Debug, Clone, PartialEq)]
pub struct BitplaneMatrix {
    num_bits: u32,
    x_max: f64,
    signs: Vec<i8>,
    codes: Vec<u32>,
    /// `planes[b - 1]` holds bit `b` (LSB is `b = 1`) of every element.
    planes: Vec<Vec<u8>>,
}

impl BitplaneMatrix {
    /// Builds a matrix from explicit signs and magnitude codes.
    pub fn from_codes(signs: Vec<i8>, codes: Vec<u32>, num_bits: u32, x_max: f64) -> Result<Self> {
        check_params(num_bits, x_max)?;
        if signs.len() != codes.len() {
            return Err(Error::size(format!(
                "{} signs for {} codes",
                signs.len(),
                codes.len()
            )));
        }
        if codes.is_empty() {
            return Err(Error::domain("bitplane matrix needs at least one element"));
        }
        if let Some(s) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::domain(format!("sign {s} is not ±1")));
        }
        let fs = full_scale(num_bits);
        if let Some(c) = codes.iter().find(|&&c| c > fs) {
            return Err(Error::domain(format!("code {c} exceeds full scale {fs}")));
        }
        let planes = (0..num_bits)
            .map(|bit| codes.iter().map(|&c| ((c >> bit) & 1) as u8).collect())
            .collect();
        Ok(Self {
            num_bits,
            x_max,
            signs,
            codes,
            planes,
        })
    }

    pub fn num_elems(&self) -> usize {
        self.codes.len()
    }

    pub fn num_bits(&self) -> u32 {
        self.num_bits
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    /// Bitplane `b` (1-based, LSB first).
    pub fn plane(&self, b: u32) -> Result<&[u8]> {
        self.check_plane(b)?;
        Ok(&self.planes[(b - 1) as usize])
    }

    /// Code of element `j` reassembled from its bitplanes.
    pub fn reassembled_code(&self, j: usize) -> u32 {
        self.planes
            .iter()
            .enumerate()
            .map(|(bit, plane)| (plane[j] as u32) << bit)
            .sum()
    }

    /// `sign · code` per element.
    pub fn signed_codes(&self) -> Vec<i64> {
        self.signs
            .iter()
            .zip(&self.codes)
            .map(|(&s, &c)| s as i64 * c as i64)
            .collect()
    }

    pub fn dequantize(&self) -> Vec<f64> {
        let step = code_step(self.num_bits, self.x_max);
        self.signed_codes().into_iter().map(|v| v as f64 * step).collect()
    }

    fn check_plane(&self, b: u32) -> Result<()> {
        if b == 0 || b > self.num_bits {
            return Err(Error::Index(format!(
                "bitplane {b} outside 1..={}",
                self.num_bits
            )));
        }
        Ok(())
    }
}

/// One bitplane with the element signs attached; each element contributes
/// `sign · bit ∈ {−1, 0, +1}` to a product sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedBitplane {
    pub index: u32,
    pub bits: Vec<u8>,
    pub signs: Vec<i8>,
}

impl SignedBitplane {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn value(&self, j: usize) -> i8 {
        self.signs[j] * self.bits[j] as i8
    }

    pub fn values(&self) -> Vec<i8> {
        (0..self.len()).map(|j| self.value(j)).collect()
    }
}

/// Quantizes `x` to `num_bits` magnitude bits at full scale `x_max`.
pub fn quantize(x: &[f64], num_bits: u32, x_max: f64) -> Result<BitplaneMatrix> {
    check_params(num_bits, x_max)?;
    let fs = full_scale(num_bits);
    let scale = fs as f64 / x_max;
    let mut signs = Vec::with_capacity(x.len());
    let mut codes = Vec::with_capacity(x.len());
    for &v in x {
        if !v.is_finite() {
            return Err(Error::domain(format!("non-finite input {v}")));
        }
        signs.push(if v >= 0.0 { 1 } else { -1 });
        // f64::round rounds half away from zero.
        let code = (v.abs() * scale).round().min(fs as f64);
        codes.push(code as u32);
    }
    BitplaneMatrix::from_codes(signs, codes, num_bits, x_max)
}

pub fn dequantize(bp: &BitplaneMatrix) -> Vec<f64> {
    bp.dequantize()
}

/// Signed view of bitplane `b`.
pub fn signed_plane(bp: &BitplaneMatrix, b: u32) -> Result<SignedBitplane> {
    let bits = bp.plane(b)?.to_vec();
    Ok(SignedBitplane {
        index: b,
        bits,
        signs: bp.signs.clone(),
    })
}
