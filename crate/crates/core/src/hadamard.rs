//! Hadamard and Walsh matrices, the fast Walsh-Hadamard transform, and
//! blockwise transforms for dimensions that are not a power of two.
//!
//! Matrices are stored as dense `i8` grids of ±1. The fast transform is the
//! usual in-place butterfly; sequency (Walsh) ordering is obtained from the
//! natural ordering with a Gray-code/bit-reversal permutation.

use std::fmt::Write as _;
use std::ops::{Add, Sub};

use crate::error::{Error, Result};

/// Largest supported matrix order `k` (matrix side `2^k`).
pub const MAX_ORDER: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RowOrder {
    /// Sylvester construction order.
    #[default]
    Natural,
    /// Rows sorted by number of sign changes.
    Sequency,
}

/// A `2^k × 2^k` matrix of ±1 entries with orthogonal rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalshMatrix {
    order: u32,
    row_order: RowOrder,
    entries: Vec<i8>,
}

impl WalshMatrix {
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Side length `m = 2^k`.
    pub fn size(&self) -> usize {
        1 << self.order
    }

    pub fn row_order(&self) -> RowOrder {
        self.row_order
    }

    pub fn row(&self, i: usize) -> &[i8] {
        let m = self.size();
        &self.entries[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.entries.chunks_exact(self.size())
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.size() + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    /// Explicit matrix-vector product in exact integer arithmetic.
    pub fn mul_vec(&self, x: &[i64]) -> Result<Vec<i64>> {
        if x.len() != self.size() {
            return Err(Error::size(format!(
                "vector length {} does not match matrix size {}",
                x.len(),
                self.size()
            )));
        }
        Ok(self
            .rows()
            .map(|row| row.iter().zip(x).map(|(&h, &v)| h as i64 * v).sum())
            .collect())
    }

    /// Row-major CSV, one matrix row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.entries.len() * 3);
        for row in self.rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Number of adjacent sign changes along a ±1 row.
pub fn sign_changes(row: &[i8]) -> usize {
    row.windows(2).filter(|w| w[0] != w[1]).count()
}

fn check_order(k: u32) -> Result<()> {
    if k > MAX_ORDER {
        return Err(Error::size(format!(
            "matrix order {k} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    Ok(())
}

/// Natural-order Sylvester Hadamard matrix `H_k`, built by the block
/// recursion `H_k = [[H, H], [H, -H]]` from `H_0 = [1]`.
pub fn build_hadamard(k: u32) -> Result<WalshMatrix> {
    check_order(k)?;
    let mut entries = vec![1i8];
    let mut side = 1usize;
    for _ in 0..k {
        let next = side * 2;
        let mut grown = vec![0i8; next * next];
        for i in 0..side {
            for j in 0..side {
                let v = entries[i * side + j];
                grown[i * next + j] = v;
                grown[i * next + j + side] = v;
                grown[(i + side) * next + j] = v;
                grown[(i + side) * next + j + side] = -v;
            }
        }
        entries = grown;
        side = next;
    }
    Ok(WalshMatrix {
        order: k,
        row_order: RowOrder::Natural,
        entries,
    })
}

/// Reorders rows by increasing sign-change count, giving the Walsh matrix.
///
/// A matrix already in sequency order is returned unchanged.
pub fn to_sequency(h: &WalshMatrix) -> WalshMatrix {
    if h.row_order == RowOrder::Sequency {
        return h.clone();
    }
    let mut order: Vec<usize> = (0..h.size()).collect();
    order.sort_by_key(|&i| sign_changes(h.row(i)));
    let entries = order.iter().flat_map(|&i| h.row(i).iter().copied()).collect();
    WalshMatrix {
        order: h.order,
        row_order: RowOrder::Sequency,
        entries,
    }
}

/// Builds the matrix of side `2^k` in the requested row order.
pub fn build_walsh(k: u32, order: RowOrder) -> Result<WalshMatrix> {
    let h = build_hadamard(k)?;
    Ok(match order {
        RowOrder::Natural => h,
        RowOrder::Sequency => to_sequency(&h),
    })
}

/// `perm[s]` is the natural-order row index holding sequency row `s`.
pub fn sequency_permutation(m: usize) -> Vec<usize> {
    debug_assert!(m.is_power_of_two());
    let bits = m.trailing_zeros();
    (0..m)
        .map(|s| {
            let gray = s ^ (s >> 1);
            if bits == 0 {
                0
            } else {
                gray.reverse_bits() >> (usize::BITS - bits)
            }
        })
        .collect()
}

/// In-place natural-order butterfly. `data.len()` must be a power of two.
pub fn fwht_in_place<T>(data: &mut [T])
where
    T: Copy + Add<Output = T> + Sub<Output = T>,
{
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for chunk in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

fn check_pow2(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::size(format!("length {n} is not a power of two")));
    }
    check_order(n.trailing_zeros())
}

fn reorder<T: Copy>(natural: Vec<T>, order: RowOrder) -> Vec<T> {
    match order {
        RowOrder::Natural => natural,
        RowOrder::Sequency => sequency_permutation(natural.len())
            .into_iter()
            .map(|i| natural[i])
            .collect(),
    }
}

/// Fast transform `y = W x` with `W` in the requested row order.
pub fn fwht(x: &[f64], order: RowOrder) -> Result<Vec<f64>> {
    check_pow2(x.len())?;
    let mut y = x.to_vec();
    fwht_in_place(&mut y);
    Ok(reorder(y, order))
}

/// Integer fast transform, exact for any input that does not overflow
/// `len · max|x|`.
pub fn fwht_i64(x: &[i64], order: RowOrder) -> Result<Vec<i64>> {
    check_pow2(x.len())?;
    let mut y = x.to_vec();
    fwht_in_place(&mut y);
    Ok(reorder(y, order))
}

/// `Wᵀ y`. For natural order this is the same butterfly; for sequency order
/// the permutation is undone before it.
fn fwht_transpose(y: &[f64], order: RowOrder) -> Vec<f64> {
    let mut x = match order {
        RowOrder::Natural => y.to_vec(),
        RowOrder::Sequency => {
            let mut x = vec![0.0; y.len()];
            for (s, i) in sequency_permutation(y.len()).into_iter().enumerate() {
                x[i] = y[s];
            }
            x
        }
    };
    fwht_in_place(&mut x);
    x
}

/// Blockwise transform layout: `num_blocks` uniform power-of-two blocks,
/// with zero padding confined to the last block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BwhtPlan {
    pub input_dim: usize,
    pub block_size: usize,
    pub num_blocks: usize,
    pub pad_len: usize,
    pub order: RowOrder,
}

/// Plans a natural-order blockwise transform of `input_dim` values.
pub fn bwht_plan(input_dim: usize, block_size: usize) -> Result<BwhtPlan> {
    if input_dim == 0 {
        return Err(Error::domain("input dimension must be positive"));
    }
    check_pow2(block_size)?;
    let num_blocks = input_dim.div_ceil(block_size);
    Ok(BwhtPlan {
        input_dim,
        block_size,
        num_blocks,
        pad_len: num_blocks * block_size - input_dim,
        order: RowOrder::Natural,
    })
}

impl BwhtPlan {
    pub fn with_order(mut self, order: RowOrder) -> Self {
        self.order = order;
        self
    }

    /// Transformed length, `num_blocks · block_size`.
    pub fn padded_len(&self) -> usize {
        self.num_blocks * self.block_size
    }

    /// Copies `x` into a zero-padded buffer of length [`Self::padded_len`].
    pub fn pad(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::size(format!(
                "input length {} does not match plan dimension {}",
                x.len(),
                self.input_dim
            )));
        }
        let mut padded = x.to_vec();
        padded.resize(self.padded_len(), 0.0);
        Ok(padded)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        bwht_forward(self, x)
    }

    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        bwht_inverse(self, y)
    }
}

/// Per-block transform of `x`, zero-padding the last block.
pub fn bwht_forward(plan: &BwhtPlan, x: &[f64]) -> Result<Vec<f64>> {
    let padded = plan.pad(x)?;
    let mut out = Vec::with_capacity(padded.len());
    for block in padded.chunks_exact(plan.block_size) {
        out.extend(fwht(block, plan.order)?);
    }
    Ok(out)
}

/// Inverts [`bwht_forward`]: per-block transpose transform scaled by
/// `1/block_size`, with the padding positions dropped.
pub fn bwht_inverse(plan: &BwhtPlan, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != plan.padded_len() {
        return Err(Error::size(format!(
            "transformed length {} does not match plan length {}",
            y.len(),
            plan.padded_len()
        )));
    }
    let scale = 1.0 / plan.block_size as f64;
    let mut out = Vec::with_capacity(y.len());
    for block in y.chunks_exact(plan.block_size) {
        out.extend(fwht_transpose(block, plan.order).into_iter().map(|v| v * scale));
    }
    out.truncate(plan.input_dim);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_hadamard_matrices() {
        assert_eq!(build_hadamard(0).unwrap().entries(), &[1]);
        assert_eq!(build_hadamard(1).unwrap().entries(), &[1, 1, 1, -1]);
        assert_eq!(build_hadamard(2).unwrap().row(3), &[1, -1, -1, 1]);
        assert!(matches!(build_hadamard(MAX_ORDER + 1), Err(Error::Size(_))));
    }

    #[test]
    fn sequency_order_of_h2() {
        let w = to_sequency(&build_hadamard(2).unwrap());
        let rows: Vec<&[i8]> = w.rows().collect();
        assert_eq!(
            rows,
            vec![
                &[1, 1, 1, 1][..],
                &[1, 1, -1, -1][..],
                &[1, -1, -1, 1][..],
                &[1, -1, 1, -1][..],
            ]
        );
        let w1 = to_sequency(&build_hadamard(1).unwrap());
        assert_eq!(w1.entries(), &[1, 1, 1, -1]);
    }

    #[test]
    fn sequency_is_a_row_permutation() {
        for k in 0..=6 {
            let h = build_hadamard(k).unwrap();
            let w = to_sequency(&h);
            let mut a: Vec<Vec<i8>> = h.rows().map(<[i8]>::to_vec).collect();
            let mut b: Vec<Vec<i8>> = w.rows().map(<[i8]>::to_vec).collect();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sign_changes_match_row_index() {
        for k in 0..=10 {
            let w = build_walsh(k, RowOrder::Sequency).unwrap();
            for (r, row) in w.rows().enumerate() {
                assert_eq!(sign_changes(row), r, "k={k} row={r}");
            }
        }
    }

    #[test]
    fn permutation_agrees_with_sorted_rows() {
        for k in 0..=8 {
            let h = build_hadamard(k).unwrap();
            let w = to_sequency(&h);
            for (s, i) in sequency_permutation(h.size()).into_iter().enumerate() {
                assert_eq!(w.row(s), h.row(i));
            }
        }
    }

    #[test]
    fn fwht_examples() {
        let y = fwht(&[1.0, 0.0, 0.0, 0.0], RowOrder::Natural).unwrap();
        assert_eq!(y, vec![1.0; 4]);
        let y = fwht(&[1.0; 4], RowOrder::Natural).unwrap();
        assert_eq!(y, vec![4.0, 0.0, 0.0, 0.0]);
        assert!(matches!(fwht(&[1.0; 3], RowOrder::Natural), Err(Error::Size(_))));
        assert!(matches!(fwht(&[], RowOrder::Natural), Err(Error::Size(_))));
    }

    #[test]
    fn fwht_matches_explicit_product_len16() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for order in [RowOrder::Natural, RowOrder::Sequency] {
            let w = build_walsh(4, order).unwrap();
            for _ in 0..200 {
                let x: Vec<i64> = (0..16).map(|_| rng.random_range(-50..=50)).collect();
                let fast = fwht_i64(&x, order).unwrap();
                assert_eq!(fast, w.mul_vec(&x).unwrap());
                let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
                let fast_f: Vec<i64> = fwht(&xf, order).unwrap().iter().map(|&v| v as i64).collect();
                assert_eq!(fast_f, fast);
            }
        }
    }

    #[test]
    fn plan_examples() {
        let p = bwht_plan(16, 16).unwrap();
        assert_eq!((p.num_blocks, p.pad_len), (1, 0));
        let p = bwht_plan(24, 16).unwrap();
        assert_eq!((p.num_blocks, p.pad_len), (2, 8));
        let p = bwht_plan(17, 16).unwrap();
        assert_eq!((p.num_blocks, p.pad_len), (2, 15));
        assert!(matches!(bwht_plan(0, 16), Err(Error::Domain(_))));
        assert!(matches!(bwht_plan(8, 6), Err(Error::Size(_))));
    }

    #[test]
    fn blockwise_forward_examples() {
        let p = bwht_plan(4, 4).unwrap();
        assert_eq!(p.forward(&[1.0, 0.0, 0.0, 0.0]).unwrap(), vec![1.0; 4]);
        let p = bwht_plan(3, 4).unwrap();
        assert_eq!(p.forward(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0; 4]);

        let p = bwht_plan(8, 4).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 0.0, 2.0];
        let mut expected = fwht(&x[..4], RowOrder::Natural).unwrap();
        expected.extend(fwht(&x[4..], RowOrder::Natural).unwrap());
        assert_eq!(p.forward(&x).unwrap(), expected);
        assert!(matches!(p.forward(&x[..7]), Err(Error::Size(_))));
        assert!(matches!(p.inverse(&x[..7]), Err(Error::Size(_))));
    }

    #[test]
    fn blockwise_round_trips() {
        let p = bwht_plan(4, 4).unwrap();
        let y = p.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(p.inverse(&y).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        let p = bwht_plan(3, 4).unwrap();
        let y = p.forward(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.inverse(&y).unwrap(), vec![1.0, 2.0, 3.0]);
        let p = bwht_plan(5, 4).unwrap().with_order(RowOrder::Sequency);
        let y = p.forward(&[0.0; 5]).unwrap();
        assert_eq!(p.inverse(&y).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn csv_export() {
        let csv = build_hadamard(1).unwrap().to_csv();
        assert_eq!(csv, "1,1\n1,-1\n");
    }
}
