//! Exact q-combinatorics.
//!
//! Gaussian binomials, the partial q-Pochhammer ratio `psi_m(i)`, multinomials
//! and the q-ary entropy functions. Integer-valued quantities are `BigUint`,
//! rational ones are wrapped in [`ExactProb`] or left as `BigRational` when
//! they are counts rather than probabilities.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};

use crate::error::{param, Error, Result};

/// Exact nonnegative integer produced by the q-analog routines.
pub type QInt = BigUint;

/// Tolerance for entropy arguments sitting just outside the simplex.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// An exact rational probability, always in lowest terms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactProb(BigRational);

impl ExactProb {
    /// Wraps a rational, rejecting values outside `[0, 1]`.
    pub fn new(value: BigRational) -> Result<Self> {
        if value.is_negative() || value > BigRational::one() {
            return param(format!("probability {value} is outside [0, 1]"));
        }
        Ok(Self(value))
    }

    pub fn from_ratio(numer: u64, denom: u64) -> Result<Self> {
        if denom == 0 {
            return param("zero denominator");
        }
        Self::new(BigRational::new(numer.into(), denom.into()))
    }

    pub fn zero() -> Self {
        Self(BigRational::zero())
    }

    pub fn one() -> Self {
        Self(BigRational::one())
    }

    /// Closed forms produce values that are probabilities by construction;
    /// the test hooks that perturb them may step outside `[0, 1]`.
    pub(crate) fn from_closed_form(value: BigRational) -> Self {
        Self(value)
    }

    pub fn ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn into_ratio(self) -> BigRational {
        self.0
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// `1 - p`.
    pub fn complement(&self) -> Self {
        Self(BigRational::one() - &self.0)
    }

    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(&self.0)
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for ExactProb {
    type Err = Error;

    /// Accepts `a/b`, an integer, or a plain decimal such as `0.25`; decimals
    /// are converted exactly (`0.1` is `1/10`).
    fn from_str(s: &str) -> Result<Self> {
        Self::new(parse_rational(s)?)
    }
}

/// Parses `a/b`, `a`, or a finite decimal literal into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parameter(format!("malformed number {s:?}"));
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(num, den));
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().map_err(|_| bad())?;
    let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
    Ok(BigRational::new(numer * sign, denom))
}

/// Converts a rational to the nearest double, staying accurate when numerator
/// and denominator individually overflow `f64`.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    if let Some(v) = r.to_f64() {
        if v.is_finite() && v != 0.0 {
            return v;
        }
    }
    // Rescale so the quotient of the leading 64 bits is representable.
    let n = r.numer().abs();
    let d = r.denom().clone();
    let shift = n.bits() as i64 - d.bits() as i64;
    let scaled = if shift > 0 {
        BigRational::new(n, d << shift as usize)
    } else {
        BigRational::new(n << (-shift) as usize, d)
    };
    let mantissa = scaled.to_f64().unwrap_or(f64::NAN);
    let v = mantissa * 2f64.powi(shift as i32);
    if r.is_negative() {
        -v
    } else {
        v
    }
}

fn check_q(q: u64) -> Result<()> {
    if q < 2 {
        return param(format!("q must be at least 2, got {q}"));
    }
    Ok(())
}

/// `[n k]_q` by the q-Pascal recurrence `[n k] = [n-1 k-1] + q^k [n-1 k]`.
///
/// Zero for `k < 0` or `k > n`.
pub fn gaussian_binomial(n: i64, k: i64, q: u64) -> Result<QInt> {
    check_q(q)?;
    if k < 0 || k > n {
        return Ok(QInt::zero());
    }
    let k = k.min(n - k) as usize;
    let n = n as usize;
    let q = QInt::from(q);
    let q_pows: Vec<QInt> = (0..=k).map(|j| Pow::pow(&q, j as u32)).collect();
    // row[j] holds [r j]_q for the current row r.
    let mut row = vec![QInt::zero(); k + 1];
    row[0] = QInt::one();
    for r in 1..=n {
        for j in (1..=k.min(r)).rev() {
            let carried = &q_pows[j] * &row[j];
            row[j] = &row[j - 1] + carried;
        }
    }
    Ok(row.swap_remove(k))
}

/// Memoized triangle of Gaussian binomials for one `q`.
#[derive(Clone, Debug)]
pub struct GaussianTable {
    q: u64,
    rows: Vec<Vec<QInt>>,
}

impl GaussianTable {
    pub fn new(q: u64, max_n: usize) -> Result<Self> {
        check_q(q)?;
        let big_q = QInt::from(q);
        let mut rows: Vec<Vec<QInt>> = Vec::with_capacity(max_n + 1);
        rows.push(vec![QInt::one()]);
        for r in 1..=max_n {
            let prev = &rows[r - 1];
            let mut row = Vec::with_capacity(r + 1);
            let mut q_pow = QInt::one();
            for j in 0..=r {
                let left = if j > 0 { prev[j - 1].clone() } else { QInt::zero() };
                let right = if j < r { &q_pow * &prev[j] } else { QInt::zero() };
                row.push(left + right);
                q_pow *= &big_q;
            }
            rows.push(row);
        }
        Ok(Self { q, rows })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn max_n(&self) -> usize {
        self.rows.len() - 1
    }

    /// `[n k]_q`; panics if `n` exceeds the table.
    pub fn get(&self, n: i64, k: i64) -> QInt {
        if n < 0 || k < 0 || k > n {
            return QInt::zero();
        }
        self.rows[n as usize][k as usize].clone()
    }
}

/// `q^e` as an exact rational, for any sign of `e`.
pub fn q_power(q: u64, e: i64) -> BigRational {
    let base = BigInt::from(q);
    let mag = Pow::pow(&base, e.unsigned_abs() as u32);
    if e >= 0 {
        BigRational::from_integer(mag)
    } else {
        BigRational::new(BigInt::one(), mag)
    }
}

/// Prefix products `psi_m(0..=m)` for a fixed `(m, q)`.
#[derive(Clone, Debug)]
pub struct PsiTable {
    m: usize,
    q: u64,
    prefix: Vec<BigRational>,
}

impl PsiTable {
    pub fn new(m: usize, q: u64) -> Result<Self> {
        check_q(q)?;
        let mut prefix = Vec::with_capacity(m + 1);
        let mut acc = BigRational::one();
        prefix.push(acc.clone());
        let big_q = BigInt::from(q);
        for k in 0..m {
            // 1 - q^{k-m} = (q^{m-k} - 1) / q^{m-k}
            let d: BigInt = Pow::pow(&big_q, (m - k) as u32);
            acc *= BigRational::new(&d - BigInt::one(), d);
            prefix.push(acc.clone());
        }
        Ok(Self { m, q, prefix })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// `psi_m(i)`; zero for `i < 0` or `i > m`.
    pub fn get(&self, i: i64) -> BigRational {
        if i < 0 || i as usize > self.m {
            return BigRational::zero();
        }
        self.prefix[i as usize].clone()
    }

    /// Test hook: scales one stored value by `factor`.
    pub fn perturb(&mut self, i: usize, factor: &BigRational) {
        if let Some(v) = self.prefix.get_mut(i) {
            *v *= factor;
        }
    }
}

/// `psi_m(i) = prod_{k=0}^{i-1} (1 - q^{k-m})`, with `psi_m(0) = 1` and zero
/// outside `0..=m`.
pub fn psi(m: usize, i: i64, q: u64) -> Result<ExactProb> {
    check_q(q)?;
    if i < 0 || i as usize > m {
        return Ok(ExactProb::zero());
    }
    let mut acc = BigRational::one();
    let big_q = BigInt::from(q);
    for k in 0..i as usize {
        let d: BigInt = Pow::pow(&big_q, (m - k) as u32);
        acc *= BigRational::new(&d - BigInt::one(), d);
    }
    Ok(ExactProb(acc))
}

/// `(q)_i = prod_{k=1}^{i} (1 - q^k)`; the sign alternates with `i`.
pub fn q_pochhammer(q: u64, i: usize) -> BigInt {
    let big_q = BigInt::from(q);
    (1..=i).fold(BigInt::one(), |acc, k| {
        acc * (BigInt::one() - Pow::pow(&big_q, k as u32))
    })
}

/// Checks the product form of `psi_m(i)` exactly.
///
/// `(q)_i` carries the sign `(-1)^i`, so the comparison is against
/// `(-1)^i q^{-mi + i(i-1)/2} (q)_i [m i]_q`. The base-`1/q` form
/// `(T)_m / (T)_{m-i}` with `T = 1/q` is checked as well.
pub fn psi_identity_check(m: usize, i: usize, q: u64) -> bool {
    if q < 2 || i > m {
        return false;
    }
    let Ok(lhs) = psi(m, i as i64, q) else {
        return false;
    };
    let Ok(gauss) = gaussian_binomial(m as i64, i as i64, q) else {
        return false;
    };
    let exponent = -((m * i) as i64) + (i * (i.saturating_sub(1)) / 2) as i64;
    let sign = if i.is_multiple_of(2) { BigInt::one() } else { -BigInt::one() };
    let product_form = q_power(q, exponent)
        * BigRational::from_integer(sign * q_pochhammer(q, i) * BigInt::from(gauss));
    let t_pochhammer = |k: usize| -> BigRational {
        (1..=k).fold(BigRational::one(), |acc, j| acc * (BigRational::one() - q_power(q, -(j as i64))))
    };
    let t_form = t_pochhammer(m) / t_pochhammer(m - i);
    lhs.0 == product_form && lhs.0 == t_form
}

/// `n! / (a! b! ...)` for parts summing to `n`.
pub fn multinomial(n: u64, parts: &[u64]) -> Result<QInt> {
    let total: u64 = parts.iter().sum();
    if total != n {
        return param(format!("multinomial parts sum to {total}, expected {n}"));
    }
    // Product of binomials C(a, a_1) C(a - a_1, a_2) ... avoids big factorials.
    let mut acc = QInt::one();
    let mut remaining = n;
    for &p in parts {
        acc *= binomial(remaining, p);
        remaining -= p;
    }
    Ok(acc)
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> QInt {
    if k > n {
        return QInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = QInt::one();
    for j in 0..k {
        acc *= n - j;
        acc /= j + 1;
    }
    acc
}

/// All binomials `C(n, 0..=n)`.
pub fn binomial_row(n: u64) -> Vec<QInt> {
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut c = QInt::one();
    row.push(c.clone());
    for j in 0..n {
        c *= n - j;
        c = c.div_floor(&QInt::from(j + 1));
        row.push(c.clone());
    }
    row
}

/// Binary entropy in q-its, `-t log_q t - (1-t) log_q (1-t)`.
pub fn entropy_q(t: f64, q: u64) -> Result<f64> {
    check_q(q)?;
    if !t.is_finite() || !(-SIMPLEX_TOLERANCE..=1.0 + SIMPLEX_TOLERANCE).contains(&t) {
        return param(format!("entropy argument {t} is outside [0, 1]"));
    }
    let t = t.clamp(0.0, 1.0);
    Ok((xlnx(t) + xlnx(1.0 - t)) / -(q as f64).ln())
}

/// Multi-entropy in q-its, `-sum t_j log_q t_j`, over a probability vector.
pub fn multi_entropy_q(ts: &[f64], q: u64) -> Result<f64> {
    check_q(q)?;
    let mut sum = 0.0;
    for &t in ts {
        if !t.is_finite() || t < -SIMPLEX_TOLERANCE {
            return param(format!("entropy argument {t} is negative"));
        }
        sum += t;
    }
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE * (ts.len().max(1) as f64) {
        return param(format!("entropy arguments sum to {sum}, expected 1"));
    }
    let acc: f64 = ts.iter().map(|&t| xlnx(t.max(0.0))).sum();
    Ok(acc / -(q as f64).ln())
}

/// `t ln t` with `0 ln 0 = 0`.
pub(crate) fn xlnx(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        t * t.ln()
    }
}
