use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::gfmat::{ColumnSet, GfMatrix};

/// Largest code length whose `2^n` erasure patterns are swept by default.
pub const DEFAULT_SUBSET_CAP: usize = 22;

/// Hard limit on the sweep regardless of the configured cap.
const MAX_SUBSET_BITS: usize = 30;

/// The incorrigible-set distribution of a parity-check code:
/// `lambda[i][l]` counts coordinate sets `E` with `#E = i` and
/// `dim C_H(E) = l`, where `C_H(E)` is the subcode supported inside `E`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IncorrigibleProfile {
    q: u32,
    n: usize,
    table: Vec<Vec<u64>>,
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap.min(MAX_SUBSET_BITS) {
        return Err(Error::CapExceeded {
            what: "subset enumeration",
            requested: format!("2^{n} column subsets"),
            cap: format!("n <= {}", cap.min(MAX_SUBSET_BITS)),
        });
    }
    Ok(())
}

impl IncorrigibleProfile {
    /// The profile of `C_H`, refusing lengths above [`DEFAULT_SUBSET_CAP`].
    pub fn from_matrix(h: &GfMatrix) -> Result<Self> {
        Self::from_matrix_with_cap(h, DEFAULT_SUBSET_CAP)
    }

    /// Counts, for every `E`, the codewords supported inside `E` through a
    /// subset-sum transform over codeword supports. Sweeps whichever of `C_H`
    /// and its dual is smaller.
    pub fn from_matrix_with_cap(h: &GfMatrix, cap: usize) -> Result<Self> {
        let n = h.cols();
        check_cap(n, cap)?;
        let p = h.field().p();
        let rows = h.row_space_basis();
        let null = h.null_space_basis();
        let rank = rows.len();
        let dual = rows.len() < null.len();
        let basis = if dual { rows } else { null };

        // Codeword counts never exceed p^dim, so small codes fit in u16.
        let small = (p as u64).checked_pow(basis.len() as u32).is_some_and(|c| c <= u16::MAX as u64);
        let raw = if small {
            BUF16.with(|b| tally_supported(&mut b.borrow_mut(), &basis, p, n))
        } else {
            BUF32.with(|b| tally_supported(&mut b.borrow_mut(), &basis, p, n))
        };

        // raw[s][d]: sets S of size s with exactly p^d codewords inside S.
        // With the dual D: rk(H_E) = r - dim{d in D : supp d outside E}.
        let w = n + 1;
        let mut table = vec![vec![0u64; w]; w];
        for size in 0..=n {
            for d in 0..=n {
                let count = raw[size * w + d];
                if count == 0 {
                    continue;
                }
                if dual {
                    let e = n - size;
                    table[e][e + d - rank] += count as u64;
                } else {
                    table[size][d] += count as u64;
                }
            }
        }
        Ok(Self { q: p, n, table })
    }

    /// Reference construction: one rank computation per column subset.
    pub fn by_subset_rank(h: &GfMatrix) -> Result<Self> {
        let n = h.cols();
        check_cap(n, DEFAULT_SUBSET_CAP)?;
        let mut table = vec![vec![0u64; n + 1]; n + 1];
        for mask in 0u64..(1 << n) {
            let set = ColumnSet::from_mask(mask);
            let size = set.len();
            table[size][size - h.submatrix_rank(&set)?] += 1;
        }
        Ok(Self { q: h.field().p(), n, table })
    }

    /// Builds a profile from a tally; rows must have length `n + 1`.
    pub(crate) fn from_table(q: u32, table: Vec<Vec<u64>>) -> Self {
        Self { q, n: table.len() - 1, table }
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `lambda_i^(l)`; zero outside `0 <= l <= i <= n`.
    pub fn lambda(&self, i: usize, ell: usize) -> u64 {
        if i > self.n || ell > i {
            return 0;
        }
        self.table[i][ell]
    }

    /// `I_i`, the number of size-`i` sets with a nonzero supported codeword.
    pub fn incorrigible(&self, i: usize) -> u64 {
        self.incorrigible_list(i, 0)
    }

    /// `I_i^(l)`, the number of size-`i` sets with `dim C(E) > l`.
    pub fn incorrigible_list(&self, i: usize, ell: usize) -> u64 {
        (ell + 1..=i).map(|j| self.lambda(i, j)).sum()
    }

    /// Rows `i = 0..=n`, each indexed by `l = 0..=n`.
    pub fn table(&self) -> &[Vec<u64>] {
        &self.table
    }
}

/// `log_p` of an exact power of `p`.
fn log_p(mut x: u32, p: u32) -> usize {
    debug_assert!(x > 0);
    if p == 2 {
        return x.trailing_zeros() as usize;
    }
    let mut d = 0;
    while x > 1 {
        x /= p;
        d += 1;
    }
    d
}

/// Calls `visit` with the support mask of every vector in the span of
/// `basis`, zero included.
fn for_each_support(basis: &[Vec<u32>], p: u32, n: usize, mut visit: impl FnMut(usize)) {
    let k = basis.len();
    if p == 2 {
        let masks: Vec<usize> = basis
            .iter()
            .map(|v| v.iter().enumerate().fold(0, |m, (c, &x)| m | ((x as usize & 1) << c)))
            .collect();
        let mut word = 0usize;
        visit(word);
        for step in 1usize..(1 << k) {
            word ^= masks[step.trailing_zeros() as usize];
            visit(word);
        }
        return;
    }
    // Odometer over coefficient vectors: bumping digit j (with or without
    // wrap) always adds basis[j], since p * basis[j] = 0.
    let mut digits = vec![0u32; k];
    let mut word = vec![0u32; n];
    visit(0);
    loop {
        let mut j = 0;
        loop {
            if j == k {
                return;
            }
            for (w, &b) in word.iter_mut().zip(&basis[j]) {
                *w = (*w + b) % p;
            }
            digits[j] += 1;
            if digits[j] < p {
                break;
            }
            digits[j] = 0;
            j += 1;
        }
        visit(word.iter().enumerate().fold(0, |m, (c, &x)| m | (usize::from(x != 0) << c)));
    }
}

thread_local! {
    static BUF16: RefCell<Vec<u16>> = const { RefCell::new(Vec::new()) };
    static BUF32: RefCell<Vec<u32>> = const { RefCell::new(Vec::new()) };
}

/// Cell type of the transform. Sums are bounded by the code size, which the
/// caller checks fits the type, so the hot loops add without overflow checks.
trait Count: Copy + Default + Into<u32> {
    const ONE: Self;
    fn add(self, other: Self) -> Self;
}

impl Count for u16 {
    const ONE: Self = 1;
    fn add(self, other: Self) -> Self {
        self.wrapping_add(other)
    }
}

impl Count for u32 {
    const ONE: Self = 1;
    fn add(self, other: Self) -> Self {
        self.wrapping_add(other)
    }
}

const BLOCK_BITS: usize = 12;
const TILE: usize = 32;

/// Popcounts of in-tile offsets; baseline x86-64 has no popcount instruction.
const TILE_POPCOUNT: [u8; TILE] = {
    let mut t = [0u8; TILE];
    let mut j = 0;
    while j < TILE {
        t[j] = (j as u32).count_ones() as u8;
        j += 1;
    }
    t
};

/// Flat `[size * (n+1) + d]` histogram of sets `S` by `#S` and by
/// `log_p #{c in span(basis) : supp c within S}`.
///
/// Computes `f(S) = sum_{T subset of S} f(T)` over codeword supports: bits
/// below [`BLOCK_BITS`] inside cache-sized blocks, the rest one column tile
/// at a time, tallying each tile as soon as it is final.
fn tally_supported<T: Count>(f: &mut Vec<T>, basis: &[Vec<u32>], p: u32, n: usize) -> Vec<u32> {
    f.clear();
    f.resize(1 << n, T::default());
    for_each_support(basis, p, n, |mask| f[mask] = f[mask].add(T::ONE));

    let low = n.min(BLOCK_BITS);
    let block = 1usize << low;
    for chunk in f.chunks_mut(block) {
        for bit in 0..low {
            match bit {
                0 => butterfly_fixed::<T, 1>(chunk),
                1 => butterfly_fixed::<T, 2>(chunk),
                2 => butterfly_fixed::<T, 4>(chunk),
                3 => butterfly_fixed::<T, 8>(chunk),
                _ => butterfly(chunk, bit),
            }
        }
    }

    let w = n + 1;
    let mut hist = vec![0u32; w * w];
    let rows = 1usize << (n - low);
    let tile = TILE.min(block);
    for col in (0..block).step_by(tile) {
        for high in 0..n - low {
            let stride = 1usize << high;
            for r in (0..rows).filter(|r| r & stride != 0) {
                let (head, tail) = f.split_at_mut(r * block + col);
                let src = &head[(r ^ stride) * block + col..][..tile];
                for (d, s) in tail[..tile].iter_mut().zip(src) {
                    *d = d.add(*s);
                }
            }
        }
        for r in 0..rows {
            let base = r * block + col;
            let base_size = base.count_ones() as usize;
            for (&bits, &c) in TILE_POPCOUNT.iter().zip(&f[base..base + tile]) {
                hist[(base_size + bits as usize) * w + log_p(c.into(), p)] += 1;
            }
        }
    }
    hist
}

fn butterfly_fixed<T: Count, const H: usize>(f: &mut [T]) {
    for pair in f.chunks_exact_mut(2 * H) {
        let (lo, hi) = pair.split_at_mut(H);
        for j in 0..H {
            hi[j] = hi[j].add(lo[j]);
        }
    }
}

fn butterfly<T: Count>(f: &mut [T], bit: usize) {
    let half = 1 << bit;
    for pair in f.chunks_exact_mut(2 * half) {
        let (lo, hi) = pair.split_at_mut(half);
        for (h, l) in hi.iter_mut().zip(lo.iter()) {
            *h = h.add(*l);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfmat::{enumerate_all_matrices, sample_stream, sample_uniform, PrimeField};
    use crate::qcomb::binomial;
    use proptest::prelude::*;

    fn binom(n: usize, k: usize) -> u64 {
        u64::try_from(binomial(n as u64, k as u64)).unwrap()
    }

    #[test]
    fn zero_and_identity_matrices() {
        let f2 = PrimeField::binary();
        let zero = IncorrigibleProfile::from_matrix(&GfMatrix::zeros(f2, 3, 5)).unwrap();
        let id = IncorrigibleProfile::from_matrix(&GfMatrix::identity(f2, 5)).unwrap();
        for i in 0..=5 {
            assert_eq!(zero.lambda(i, i), binom(5, i));
            assert_eq!(id.lambda(i, 0), binom(5, i));
        }
        assert_eq!(zero.lambda(0, 0), 1);
    }

    #[test]
    fn repetition_code_example() {
        let h = GfMatrix::from_rows(PrimeField::binary(), &[vec![1, 1]]).unwrap();
        let p = IncorrigibleProfile::from_matrix(&h).unwrap();
        assert_eq!(p.lambda(1, 0), 2);
        assert_eq!(p.lambda(2, 1), 1);
        assert_eq!(p.lambda(2, 0), 0);
        assert_eq!((p.incorrigible(1), p.incorrigible(2)), (0, 1));
    }

    #[test]
    fn cap_is_enforced() {
        let h = GfMatrix::zeros(PrimeField::binary(), 1, 23);
        let err = IncorrigibleProfile::from_matrix(&h).unwrap_err();
        assert!(err.to_string().contains("22"), "{err}");
        assert!(IncorrigibleProfile::from_matrix_with_cap(&GfMatrix::zeros(PrimeField::binary(), 1, 8), 7).is_err());
    }

    #[test]
    fn transform_matches_subset_ranks_exhaustively() {
        for (p, m, n) in [(2u32, 2usize, 4usize), (3, 2, 3), (2, 3, 3), (5, 1, 3)] {
            let field = PrimeField::new(p).unwrap();
            for h in enumerate_all_matrices(m, n, field, 1 << 16).unwrap() {
                assert_eq!(
                    IncorrigibleProfile::from_matrix(&h).unwrap(),
                    IncorrigibleProfile::by_subset_rank(&h).unwrap(),
                    "{h}"
                );
            }
        }
    }

    #[test]
    fn transform_matches_subset_ranks_on_samples() {
        for (p, m, n) in [(2u32, 5usize, 12usize), (2, 9, 12), (3, 4, 9), (7, 3, 7), (2, 12, 10)] {
            let field = PrimeField::new(p).unwrap();
            for s in 0..20 {
                let h = sample_uniform(m, n, field, &mut sample_stream(11, s));
                assert_eq!(
                    IncorrigibleProfile::from_matrix(&h).unwrap(),
                    IncorrigibleProfile::by_subset_rank(&h).unwrap()
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn profile_invariants(p in prop::sample::select(vec![2u32, 3]), m in 1usize..6, n in 1usize..9, seed: u64) {
            let field = PrimeField::new(p).unwrap();
            let h = sample_uniform(m, n, field, &mut sample_stream(seed, 0));
            let prof = IncorrigibleProfile::from_matrix(&h).unwrap();
            let k = n - h.rank();
            for i in 0..=n {
                let row: u64 = (0..=i).map(|l| prof.lambda(i, l)).sum();
                prop_assert_eq!(row, binom(n, i));
                for l in 0..=n {
                    if l > i.min(k) {
                        prop_assert_eq!(prof.lambda(i, l), 0);
                    }
                    let direct: u64 = (l + 1..=n).map(|j| prof.lambda(i, j)).sum();
                    prop_assert_eq!(prof.incorrigible_list(i, l), direct);
                }
                prop_assert_eq!(prof.incorrigible_list(i, 0), prof.incorrigible(i));
            }
        }

        #[test]
        fn supported_dimension_is_monotone(m in 1usize..5, n in 2usize..9, seed: u64, a: u64, b: u64) {
            let h = sample_uniform(m, n, PrimeField::binary(), &mut sample_stream(seed, 1));
            let small = a & ((1 << n) - 1);
            let big = small | (b & ((1 << n) - 1));
            let dim = |mask: u64| {
                let s = ColumnSet::from_mask(mask);
                s.len() - h.submatrix_rank(&s).unwrap()
            };
            prop_assert!(dim(small) <= dim(big));
        }
    }
}
