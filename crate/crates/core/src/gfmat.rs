//! Dense matrices over a prime field F_p.
//!
//! Two storage back ends sit behind [`GfMatrix`]: a residue-per-entry layout
//! for any prime, and bit-packed rows for p = 2 with word-parallel
//! elimination. The back end is picked from the field; both give identical
//! ranks. Matrices are immutable values, elimination always runs on a copy.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Error, Result};

/// Largest prime accepted; keeps residue products inside `u64`.
pub const MAX_PRIME: u32 = 1 << 16;

/// Default ceiling on the number of matrices `enumerate_all_matrices` yields.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 24;

/// A prime field F_p.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrimeField {
    p: u32,
}

impl PrimeField {
    pub fn new(p: u32) -> Result<Self> {
        if p > MAX_PRIME {
            return param(format!("field order {p} exceeds the supported maximum {MAX_PRIME}"));
        }
        if !is_prime(p) {
            return param(format!(
                "field order {p} is not prime; simulation supports prime fields only"
            ));
        }
        Ok(Self { p })
    }

    pub fn binary() -> Self {
        Self { p: 2 }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    #[inline]
    fn mul(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.p as u64) as u32
    }

    #[inline]
    fn sub(&self, a: u32, b: u32) -> u32 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    /// Multiplicative inverse by Fermat; `a` must be nonzero.
    fn inv(&self, a: u32) -> u32 {
        let mut base = a as u64 % self.p as u64;
        let mut exp = self.p as u64 - 2;
        let mut acc = 1u64;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base % self.p as u64;
            }
            base = base * base % self.p as u64;
            exp >>= 1;
        }
        acc as u32
    }
}

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Storage layout of a [`GfMatrix`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// One `u32` residue per entry, row-major.
    Dense,
    /// Rows packed into `u64` words, p = 2 only.
    Packed,
}

#[derive(Clone, Debug)]
enum Storage {
    Dense(Vec<u32>),
    Packed { words: usize, bits: Vec<u64> },
}

/// An immutable `rows x cols` matrix over F_p.
#[derive(Clone, Debug)]
pub struct GfMatrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    storage: Storage,
}

fn default_backend(field: PrimeField) -> Backend {
    if field.p == 2 {
        Backend::Packed
    } else {
        Backend::Dense
    }
}

impl GfMatrix {
    /// Builds a matrix entry by entry; values are reduced mod p.
    pub fn from_fn(
        field: PrimeField,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> u32,
    ) -> Self {
        let p = field.p;
        match default_backend(field) {
            Backend::Dense => {
                let mut data = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    for c in 0..cols {
                        data.push(f(r, c) % p);
                    }
                }
                Self { field, rows, cols, storage: Storage::Dense(data) }
            }
            Backend::Packed => {
                let words = cols.div_ceil(64).max(1);
                let mut bits = vec![0u64; rows * words];
                for r in 0..rows {
                    for c in 0..cols {
                        if f(r, c) % 2 == 1 {
                            bits[r * words + c / 64] |= 1 << (c % 64);
                        }
                    }
                }
                Self { field, rows, cols, storage: Storage::Packed { words, bits } }
            }
        }
    }

    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        Self::from_fn(field, rows, cols, |_, _| 0)
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        Self::from_fn(field, n, n, |r, c| u32::from(r == c))
    }

    /// Builds from explicit rows; every entry must already lie in `0..p`.
    pub fn from_rows(field: PrimeField, rows: &[Vec<u32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return param(format!("row {r} has {} entries, expected {cols}", row.len()));
            }
            if let Some(&bad) = row.iter().find(|&&v| v >= field.p) {
                return param(format!("entry {bad} in row {r} is not a residue mod {}", field.p));
            }
        }
        Ok(Self::from_fn(field, rows.len(), cols, |r, c| rows[r][c]))
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn backend(&self) -> Backend {
        match self.storage {
            Storage::Dense(_) => Backend::Dense,
            Storage::Packed { .. } => Backend::Packed,
        }
    }

    /// Re-stores the matrix in another layout.
    pub fn with_backend(&self, backend: Backend) -> Result<Self> {
        if backend == self.backend() {
            return Ok(self.clone());
        }
        match backend {
            Backend::Dense => {
                let data = (0..self.rows)
                    .flat_map(|r| (0..self.cols).map(move |c| (r, c)))
                    .map(|(r, c)| self.get(r, c))
                    .collect();
                Ok(Self {
                    field: self.field,
                    rows: self.rows,
                    cols: self.cols,
                    storage: Storage::Dense(data),
                })
            }
            Backend::Packed if self.field.p == 2 => {
                Ok(Self::from_fn(self.field, self.rows, self.cols, |r, c| self.get(r, c)))
            }
            Backend::Packed => param("bit-packed storage requires p = 2"),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> u32 {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        match &self.storage {
            Storage::Dense(data) => data[r * self.cols + c],
            Storage::Packed { words, bits } => ((bits[r * words + c / 64] >> (c % 64)) & 1) as u32,
        }
    }

    pub fn row(&self, r: usize) -> Vec<u32> {
        (0..self.cols).map(|c| self.get(r, c)).collect()
    }

    pub fn column(&self, c: usize) -> Vec<u32> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.field, self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn is_zero(&self) -> bool {
        match &self.storage {
            Storage::Dense(data) => data.iter().all(|&v| v == 0),
            Storage::Packed { bits, .. } => bits.iter().all(|&w| w == 0),
        }
    }

    pub fn rank(&self) -> usize {
        match &self.storage {
            Storage::Dense(data) => dense_rank(self.field, data.clone(), self.rows, self.cols),
            Storage::Packed { words, bits } => packed_rank(bits.clone(), self.rows, *words, self.cols),
        }
    }

    /// Rank of the `rows x #cols` submatrix on the given columns.
    pub fn submatrix_rank(&self, cols: &ColumnSet) -> Result<usize> {
        if let Some(&last) = cols.indices().last() {
            if last >= self.cols {
                return param(format!(
                    "column index {last} out of range for a matrix with {} columns",
                    self.cols
                ));
            }
        }
        if cols.is_empty() {
            return Ok(0);
        }
        Ok(match &self.storage {
            Storage::Dense(data) => {
                let k = cols.len();
                let mut sub = Vec::with_capacity(self.rows * k);
                for r in 0..self.rows {
                    sub.extend(cols.indices().iter().map(|&c| data[r * self.cols + c]));
                }
                dense_rank(self.field, sub, self.rows, k)
            }
            Storage::Packed { words, bits } => {
                let mut mask = vec![0u64; *words];
                for &c in cols.indices() {
                    mask[c / 64] |= 1 << (c % 64);
                }
                let masked: Vec<u64> = bits
                    .iter()
                    .enumerate()
                    .map(|(i, &w)| w & mask[i % words])
                    .collect();
                packed_rank(masked, self.rows, *words, self.cols)
            }
        })
    }

    /// Reduced row echelon form: the nonzero rows and their pivot columns.
    pub fn row_echelon(&self) -> (Vec<Vec<u32>>, Vec<usize>) {
        let f = self.field;
        let mut m: Vec<Vec<u32>> = (0..self.rows).map(|r| self.row(r)).collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for c in 0..self.cols {
            let Some(pr) = (rank..m.len()).find(|&r| m[r][c] != 0) else {
                continue;
            };
            m.swap(rank, pr);
            let inv = f.inv(m[rank][c]);
            for v in m[rank].iter_mut() {
                *v = f.mul(*v, inv);
            }
            for r in 0..m.len() {
                if r != rank && m[r][c] != 0 {
                    let factor = m[r][c];
                    for k in 0..self.cols {
                        let delta = f.mul(factor, m[rank][k]);
                        m[r][k] = f.sub(m[r][k], delta);
                    }
                }
            }
            pivots.push(c);
            rank += 1;
            if rank == m.len() {
                break;
            }
        }
        m.truncate(rank);
        (m, pivots)
    }

    /// A basis of the row space, as length-`cols` vectors.
    pub fn row_space_basis(&self) -> Vec<Vec<u32>> {
        self.row_echelon().0
    }

    /// A basis of `{x : H x^T = 0}`, the parity-check code of this matrix.
    pub fn null_space_basis(&self) -> Vec<Vec<u32>> {
        let f = self.field;
        let (rref, pivots) = self.row_echelon();
        let mut is_pivot = vec![false; self.cols];
        for &c in &pivots {
            is_pivot[c] = true;
        }
        (0..self.cols)
            .filter(|&c| !is_pivot[c])
            .map(|free| {
                let mut v = vec![0u32; self.cols];
                v[free] = 1;
                for (row, &pc) in rref.iter().zip(&pivots) {
                    v[pc] = f.sub(0, row[free]);
                }
                v
            })
            .collect()
    }

    /// Text dump: a `gfmat p m n` header, then one line of entries per row.
    pub fn to_dump(&self) -> String {
        self.to_string()
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parameter("empty matrix dump".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parameter(format!("bad header value {s:?}")))
        };
        if fields.len() != 4 || fields[0] != "gfmat" {
            return param(format!("bad matrix dump header {header:?}"));
        }
        let field = PrimeField::new(parse(fields[1])? as u32)?;
        let (m, n) = (parse(fields[2])?, parse(fields[3])?);
        let rows: Vec<Vec<u32>> = lines
            .map(|l| {
                l.split_whitespace()
                    .map(|t| t.parse().map_err(|_| Error::Parameter(format!("bad entry {t:?}"))))
                    .collect::<Result<Vec<u32>>>()
            })
            .collect::<Result<_>>()?;
        if rows.len() != m || rows.iter().any(|r| r.len() != n) {
            return param(format!("matrix dump body does not match header {m} x {n}"));
        }
        if m == 0 {
            return Ok(Self::zeros(field, 0, n));
        }
        Self::from_rows(field, &rows)
    }
}

impl PartialEq for GfMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.field == other.field
            && self.rows == other.rows
            && self.cols == other.cols
            && (0..self.rows).all(|r| (0..self.cols).all(|c| self.get(r, c) == other.get(r, c)))
    }
}

impl Eq for GfMatrix {}

impl fmt::Display for GfMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "gfmat {} {} {}", self.field.p, self.rows, self.cols)?;
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(u32::to_string).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

fn dense_rank(field: PrimeField, mut a: Vec<u32>, rows: usize, cols: usize) -> usize {
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let Some(pr) = (rank..rows).find(|&r| a[r * cols + c] != 0) else {
            continue;
        };
        if pr != rank {
            for k in 0..cols {
                a.swap(pr * cols + k, rank * cols + k);
            }
        }
        let inv = field.inv(a[rank * cols + c]);
        for r in rank + 1..rows {
            let lead = a[r * cols + c];
            if lead == 0 {
                continue;
            }
            let factor = field.mul(lead, inv);
            for k in c..cols {
                let delta = field.mul(factor, a[rank * cols + k]);
                a[r * cols + k] = field.sub(a[r * cols + k], delta);
            }
        }
        rank += 1;
    }
    rank
}

fn packed_rank(mut bits: Vec<u64>, rows: usize, words: usize, cols: usize) -> usize {
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let (w, b) = (c / 64, 1u64 << (c % 64));
        let Some(pr) = (rank..rows).find(|&r| bits[r * words + w] & b != 0) else {
            continue;
        };
        if pr != rank {
            for k in 0..words {
                bits.swap(pr * words + k, rank * words + k);
            }
        }
        for r in rank + 1..rows {
            if bits[r * words + w] & b != 0 {
                for k in w..words {
                    bits[r * words + k] ^= bits[rank * words + k];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// A sorted set of column positions (0-based).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ColumnSet {
    indices: Vec<usize>,
}

impl ColumnSet {
    /// Rejects duplicates; indices are sorted on construction.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return param("column set contains a repeated index");
        }
        Ok(Self { indices })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full(n: usize) -> Self {
        Self { indices: (0..n).collect() }
    }

    /// Columns whose bit is set in `mask`.
    pub fn from_mask(mask: u64) -> Self {
        Self { indices: (0..64).filter(|&c| mask >> c & 1 == 1).collect() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// The generator for Monte Carlo sample `index` under `master_seed`.
///
/// Each sample owns a ChaCha8 stream, so results do not depend on how samples
/// are split across workers.
pub fn sample_stream(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// A matrix with independent uniform entries.
pub fn sample_uniform<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    field: PrimeField,
    rng: &mut R,
) -> GfMatrix {
    if field.p == 2 {
        let words = cols.div_ceil(64).max(1);
        let mut bits = vec![0u64; rows * words];
        for r in 0..rows {
            for w in 0..words {
                let live = (cols - w * 64).min(64);
                let mask = if live == 64 { u64::MAX } else { (1u64 << live) - 1 };
                bits[r * words + w] = rng.random::<u64>() & mask;
            }
        }
        return GfMatrix { field, rows, cols, storage: Storage::Packed { words, bits } };
    }
    let data = (0..rows * cols).map(|_| rng.random_range(0..field.p)).collect();
    GfMatrix { field, rows, cols, storage: Storage::Dense(data) }
}

/// Number of `rows x cols` matrices over the field, if it fits in `u64`.
pub fn ensemble_size(field: PrimeField, rows: usize, cols: usize) -> Option<u64> {
    u32::try_from(rows * cols).ok().and_then(|e| (field.p as u64).checked_pow(e))
}

/// The matrix at position `index` of the odometer order: entries in row-major
/// order are base-p digits, the last entry turning fastest.
pub fn matrix_at_index(field: PrimeField, rows: usize, cols: usize, index: u64) -> GfMatrix {
    let p = field.p as u64;
    let total = rows * cols;
    let mut digits = vec![0u32; total];
    let mut rest = index;
    for e in (0..total).rev() {
        digits[e] = (rest % p) as u32;
        rest /= p;
    }
    GfMatrix::from_fn(field, rows, cols, |r, c| digits[r * cols + c])
}

/// Iterator over all matrices of a shape, see [`enumerate_all_matrices`].
#[derive(Clone, Debug)]
pub struct MatrixEnumerator {
    field: PrimeField,
    rows: usize,
    cols: usize,
    next: u64,
    end: u64,
}

impl MatrixEnumerator {
    pub fn total(&self) -> u64 {
        self.end
    }

    /// Restricts to the index range `[start, end)`, for splitting work.
    pub fn range(mut self, start: u64, end: u64) -> Self {
        self.end = end.min(self.end);
        self.next = start.min(self.end);
        self
    }
}

impl Iterator for MatrixEnumerator {
    type Item = GfMatrix;

    fn next(&mut self) -> Option<GfMatrix> {
        if self.next >= self.end {
            return None;
        }
        let m = matrix_at_index(self.field, self.rows, self.cols, self.next);
        self.next += 1;
        Some(m)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

/// Every `rows x cols` matrix exactly once, refusing when `p^(rows*cols)`
/// exceeds `cap`.
pub fn enumerate_all_matrices(
    rows: usize,
    cols: usize,
    field: PrimeField,
    cap: u64,
) -> Result<MatrixEnumerator> {
    match ensemble_size(field, rows, cols) {
        Some(total) if total <= cap => {
            Ok(MatrixEnumerator { field, rows, cols, next: 0, end: total })
        }
        _ => Err(Error::CapExceeded {
            what: "matrix enumeration",
            requested: format!("{}^{} matrices", field.p, rows * cols),
            cap: format!("{cap}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gf(p: u32) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    #[test]
    fn field_validation() {
        assert!(PrimeField::new(4).is_err());
        assert!(PrimeField::new(1).is_err());
        assert!(PrimeField::new(0).is_err());
        assert_eq!(gf(7).p(), 7);
        let f = gf(7);
        for a in 1..7 {
            assert_eq!(f.mul(a, f.inv(a)), 1);
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(GfMatrix::zeros(gf(2), 3, 4).rank(), 0);
        assert_eq!(GfMatrix::identity(gf(2), 3).rank(), 3);
        let ones = GfMatrix::from_rows(gf(2), &[vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(ones.rank(), 1);
        let m = GfMatrix::from_rows(gf(3), &[vec![1, 2], vec![2, 1]]).unwrap();
        // Second row is twice the first mod 3.
        assert_eq!(m.rank(), 1);
        assert_eq!(GfMatrix::identity(gf(5), 4).rank(), 4);
    }

    #[test]
    fn submatrix_rank_examples() {
        let id = GfMatrix::identity(gf(2), 3);
        assert_eq!(id.submatrix_rank(&ColumnSet::empty()).unwrap(), 0);
        assert_eq!(id.submatrix_rank(&ColumnSet::full(3)).unwrap(), id.rank());
        assert_eq!(id.submatrix_rank(&ColumnSet::new(vec![0, 2]).unwrap()).unwrap(), 2);
        assert!(id.submatrix_rank(&ColumnSet::new(vec![3]).unwrap()).is_err());
        assert!(ColumnSet::new(vec![1, 1]).is_err());
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_all_matrices(1, 1, gf(2), DEFAULT_ENUMERATION_CAP).unwrap().count(), 2);
        let all: Vec<_> = enumerate_all_matrices(2, 2, gf(2), DEFAULT_ENUMERATION_CAP)
            .unwrap()
            .collect();
        assert_eq!(all.len(), 16);
        assert_eq!(all.iter().filter(|m| m.rank() == 2).count(), 6);
        let distinct: std::collections::HashSet<String> = all.iter().map(|m| m.to_dump()).collect();
        assert_eq!(distinct.len(), 16);
        assert_eq!(enumerate_all_matrices(2, 2, gf(3), DEFAULT_ENUMERATION_CAP).unwrap().count(), 81);
        let err = enumerate_all_matrices(5, 5, gf(2), DEFAULT_ENUMERATION_CAP).unwrap_err();
        assert!(err.to_string().contains(&DEFAULT_ENUMERATION_CAP.to_string()));
    }

    #[test]
    fn enumeration_is_odometer_ordered() {
        let all: Vec<_> = enumerate_all_matrices(1, 2, gf(3), 100).unwrap().collect();
        let rows: Vec<Vec<u32>> = all.iter().map(|m| m.row(0)).collect();
        assert_eq!(rows[0], vec![0, 0]);
        assert_eq!(rows[1], vec![0, 1]);
        assert_eq!(rows[3], vec![1, 0]);
        assert_eq!(rows[8], vec![2, 2]);
        let split: Vec<_> = enumerate_all_matrices(1, 2, gf(3), 100).unwrap().range(3, 6).collect();
        assert_eq!(split, all[3..6].to_vec());
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let a = sample_uniform(1, 1, gf(2), &mut sample_stream(7, 0));
        let b = sample_uniform(1, 1, gf(2), &mut sample_stream(7, 0));
        assert_eq!(a, b);
        let x = sample_uniform(8, 8, gf(2), &mut sample_stream(1, 0));
        let y = sample_uniform(8, 8, gf(2), &mut sample_stream(2, 0));
        assert_ne!(x, y);
        let z = sample_uniform(8, 8, gf(2), &mut sample_stream(1, 1));
        assert_ne!(x, z);
    }

    #[test]
    fn sampled_entries_have_uniform_mean() {
        let mut rng = sample_stream(2024, 0);
        let m = sample_uniform(100, 1000, gf(3), &mut rng);
        let sum: u64 = (0..100).flat_map(|r| m.row(r)).map(u64::from).sum();
        let mean = sum as f64 / 1e5;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        // Packed sampling must not leak bits past the last column.
        let b = sample_uniform(3, 70, gf(2), &mut rng);
        assert_eq!(b.with_backend(Backend::Dense).unwrap(), b);
    }

    #[test]
    fn packed_and_dense_ranks_agree() {
        let mut rng = sample_stream(99, 0);
        for i in 0..1000 {
            let rows = 1 + i % 9;
            let cols = 1 + (i * 7) % 80;
            let m = sample_uniform(rows, cols, gf(2), &mut rng);
            let dense = m.with_backend(Backend::Dense).unwrap();
            assert_eq!(m.backend(), Backend::Packed);
            assert_eq!(m.rank(), dense.rank());
            let set = ColumnSet::new((0..cols).step_by(3).collect()).unwrap();
            assert_eq!(m.submatrix_rank(&set).unwrap(), dense.submatrix_rank(&set).unwrap());
        }
    }

    #[test]
    fn null_space_is_orthogonal_and_complementary() {
        let mut rng = sample_stream(5, 0);
        for p in [2u32, 3, 5] {
            for _ in 0..50 {
                let m = sample_uniform(4, 7, gf(p), &mut rng);
                let basis = m.null_space_basis();
                assert_eq!(basis.len(), 7 - m.rank());
                for v in &basis {
                    for r in 0..4 {
                        let dot: u64 = m.row(r).iter().zip(v).map(|(&a, &b)| a as u64 * b as u64).sum();
                        assert_eq!(dot % p as u64, 0);
                    }
                }
                let stacked = GfMatrix::from_rows(gf(p), &basis);
                if let Ok(s) = stacked {
                    assert_eq!(s.rank(), basis.len());
                }
                assert_eq!(m.row_space_basis().len(), m.rank());
            }
        }
    }

    #[test]
    fn dump_rejects_malformed_input() {
        assert!(GfMatrix::parse_dump("").is_err());
        assert!(GfMatrix::parse_dump("gfmat 4 1 1\n0\n").is_err());
        assert!(GfMatrix::parse_dump("gfmat 2 1 2\n0\n").is_err());
        assert!(GfMatrix::parse_dump("gfmat 2 1 1\n2\n").is_err());
        let m = GfMatrix::parse_dump("gfmat 3 2 2\n1 2\n0 1\n").unwrap();
        assert_eq!(m.get(0, 1), 2);
        assert_eq!(m.rank(), 2);
    }

    fn arb_matrix() -> impl Strategy<Value = GfMatrix> {
        (prop::sample::select(vec![2u32, 3, 5]), 1usize..=8, 1usize..=8, any::<u64>()).prop_map(
            |(p, r, c, seed)| sample_uniform(r, c, gf(p), &mut sample_stream(seed, 0)),
        )
    }

    proptest! {
        #[test]
        fn rank_is_transpose_invariant(m in arb_matrix()) {
            prop_assert_eq!(m.rank(), m.transpose().rank());
            prop_assert!(m.rank() <= m.rows().min(m.cols()));
        }

        #[test]
        fn adding_a_column_never_lowers_rank(m in arb_matrix(), mask in any::<u64>()) {
            let n = m.cols();
            let base = ColumnSet::from_mask(mask & ((1u64 << n) - 1));
            let r0 = m.submatrix_rank(&base).unwrap();
            for extra in 0..n {
                let mut idx = base.indices().to_vec();
                if idx.contains(&extra) { continue; }
                idx.push(extra);
                let r1 = m.submatrix_rank(&ColumnSet::new(idx).unwrap()).unwrap();
                prop_assert!(r1 == r0 || r1 == r0 + 1);
            }
        }

        #[test]
        fn dump_round_trips(m in arb_matrix()) {
            prop_assert_eq!(GfMatrix::parse_dump(&m.to_dump()).unwrap(), m);
        }
    }
}
