//! Closed forms for the random matrix ensemble `R_{m,n}`.
//!
//! [`Formulas`] evaluates the rank-distribution lemmas, the expected
//! incorrigible-set counts, the three average decoding-error probabilities,
//! the incorrigible-count covariances and the variance of the unambiguous
//! decoding error, all as exact rationals. [`LogFormulas`] evaluates the same
//! probabilities in natural-log space for lengths where rationals are too
//! large.
//!
//! Indices outside their meaningful range give zero rather than an error.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::error::{param, Error, Result};
use crate::qcomb::{binomial_row, multinomial, q_power, ExactProb, GaussianTable, PsiTable};

/// `(q, m, n)` of the ensemble of all `m x n` matrices over F_q.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub q: u64,
    pub m: usize,
    pub n: usize,
}

impl EnsembleParams {
    pub fn new(q: u64, m: usize, n: usize) -> Result<Self> {
        if q < 2 {
            return param(format!("q must be at least 2, got {q}"));
        }
        if m == 0 || n == 0 {
            return param(format!("m and n must be positive, got m={m} n={n}"));
        }
        Ok(Self { q, m, n })
    }
}

impl fmt::Display for EnsembleParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q={} m={} n={}", self.q, self.m, self.n)
    }
}

/// An erasure probability, either exact or floating.
#[derive(Clone, Debug, PartialEq)]
pub enum ErasureProb {
    Exact(ExactProb),
    Float(f64),
}

impl ErasureProb {
    /// `a/b` strings are exact, anything else is read as a double.
    pub fn parse(s: &str) -> Result<Self> {
        if s.contains('/') {
            return Ok(Self::Exact(s.parse()?));
        }
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::Parameter(format!("malformed erasure probability {s:?}")))?;
        Self::float(v)
    }

    pub fn float(v: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&v) {
            return param(format!("erasure probability {v} is outside [0, 1]"));
        }
        Ok(Self::Float(v))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Self::Exact(p) => p.to_f64(),
            Self::Float(v) => *v,
        }
    }
}

/// `eps^i (1 - eps)^{n-i}` for `i = 0..=n`.
fn erasure_weights(eps: &ExactProb, n: usize) -> Vec<BigRational> {
    let e = eps.ratio();
    let c = BigRational::one() - e;
    let mut e_pow = vec![BigRational::one(); n + 1];
    let mut c_pow = vec![BigRational::one(); n + 1];
    for i in 1..=n {
        e_pow[i] = &e_pow[i - 1] * e;
        c_pow[i] = &c_pow[i - 1] * &c;
    }
    (0..=n).map(|i| &e_pow[i] * &c_pow[n - i]).collect()
}

/// Exact closed-form evaluator for one ensemble.
///
/// Gaussian binomials, the `psi_m` prefix products and the binomial row are
/// computed once on construction; the evaluator is immutable afterwards and
/// can be shared across threads.
#[derive(Clone, Debug)]
pub struct Formulas {
    params: EnsembleParams,
    gauss: GaussianTable,
    psi: PsiTable,
    binom: Vec<BigInt>,
}

impl Formulas {
    pub fn new(params: EnsembleParams) -> Result<Self> {
        let EnsembleParams { q, m, n } = params;
        Ok(Self {
            params,
            gauss: GaussianTable::new(q, n.max(m))?,
            psi: PsiTable::new(m, q)?,
            binom: binomial_row(n as u64).into_iter().map(BigInt::from).collect(),
        })
    }

    pub fn params(&self) -> EnsembleParams {
        self.params
    }

    /// Test hook: multiplies the stored `psi_m(i)` by `factor`, so that the
    /// oracle can show it notices a wrong closed form.
    pub fn perturb_psi(&mut self, i: usize, factor: &BigRational) {
        self.psi.perturb(i, factor);
    }

    fn psi(&self, i: i64) -> BigRational {
        self.psi.get(i)
    }

    fn gauss(&self, n: i64, k: i64) -> BigRational {
        BigRational::from_integer(self.gauss.get(n, k).into())
    }

    fn binom(&self, i: i64) -> BigRational {
        if i < 0 || i as usize > self.params.n {
            return BigRational::zero();
        }
        BigRational::from_integer(self.binom[i as usize].clone())
    }

    fn q_pow(&self, e: i64) -> BigRational {
        q_power(self.params.q, e)
    }

    /// `P(rk H = j) = q^{-m(n-j)} psi_m(j) [n j]_q`.
    pub fn prob_rank(&self, j: i64) -> ExactProb {
        let EnsembleParams { m, n, .. } = self.params;
        let (m, n) = (m as i64, n as i64);
        if j < 0 || j > n {
            return ExactProb::zero();
        }
        ExactProb::from_closed_form(self.q_pow(-m * (n - j)) * self.psi(j) * self.gauss(n, j))
    }

    /// `P(rk H = j and rk H_A = r)` for any fixed column set `A` of size `s`.
    pub fn prob_rank_joint(&self, s: i64, j: i64, r: i64) -> Result<ExactProb> {
        let EnsembleParams { m, n, .. } = self.params;
        let (m, n) = (m as i64, n as i64);
        if s < 0 || s > n {
            return param(format!("column-set size {s} outside 0..={n}"));
        }
        if j < 0 || j > n || r < 0.max(s - n + j) || r > j.min(s) {
            return Ok(ExactProb::zero());
        }
        let exponent = -m * (n - j) + r * (n - j - s + r);
        Ok(ExactProb::from_closed_form(
            self.q_pow(exponent) * self.psi(j) * self.gauss(s, r) * self.gauss(n - s, j - r),
        ))
    }

    /// `P(rk H_E = i and rk H_E' = i')` where `#E = i`, `#E' = i'` and the two
    /// sets share `s` columns: `psi_m(i) psi_m(i') / psi_m(s)`.
    pub fn prob_two_full_ranks(&self, i: i64, i2: i64, s: i64) -> Result<ExactProb> {
        let n = self.params.n as i64;
        if i < 0 || i2 < 0 || i > n || i2 > n || s < 0 || s > i.min(i2) {
            return param(format!("need 0 <= s <= min(i, i') and i, i' <= n, got i={i} i'={i2} s={s}"));
        }
        let denom = self.psi(s);
        if denom.is_zero() {
            return Err(Error::Undefined(format!(
                "psi_m({s}) = 0 for m = {}, the ratio has no value",
                self.params.m
            )));
        }
        Ok(ExactProb::from_closed_form(self.psi(i) * self.psi(i2) / denom))
    }

    /// `E[lambda_i^(l)] = q^{-ml} psi_m(i-l) [i l]_q C(n,i)`.
    pub fn expected_lambda(&self, i: i64, ell: i64) -> BigRational {
        let EnsembleParams { m, n, .. } = self.params;
        if i < 0 || i > n as i64 || ell < 0 || ell > i {
            return BigRational::zero();
        }
        self.q_pow(-(m as i64) * ell) * self.psi(i - ell) * self.gauss(i, ell) * self.binom(i)
    }

    /// `E[I_i] = (1 - psi_m(i)) C(n,i)`.
    pub fn expected_incorrigible(&self, i: i64) -> BigRational {
        if i < 0 || i > self.params.n as i64 {
            return BigRational::zero();
        }
        (BigRational::one() - self.psi(i)) * self.binom(i)
    }

    /// `E[I_i^(l)] = sum_{j=l+1}^{i} q^{-mj} psi_m(i-j) [i j]_q C(n,i)`.
    pub fn expected_incorrigible_list(&self, i: i64, ell: i64) -> BigRational {
        let ell = ell.max(-1);
        (ell + 1..=i).map(|j| self.expected_lambda(i, j)).sum()
    }

    /// Average unsuccessful-decoding probability under unambiguous decoding.
    pub fn p_ud(&self, eps: &ExactProb) -> ExactProb {
        let n = self.params.n;
        let w = erasure_weights(eps, n);
        let total: BigRational = (1..=n)
            .map(|i| (BigRational::one() - self.psi(i as i64)) * self.binom(i as i64) * &w[i])
            .sum();
        ExactProb::from_closed_form(total)
    }

    /// Average unsuccessful-decoding probability under list decoding with list
    /// size `q^ell`.
    pub fn p_ld(&self, ell: usize, eps: &ExactProb) -> ExactProb {
        let EnsembleParams { m, n, .. } = self.params;
        let w = erasure_weights(eps, n);
        let mut total = BigRational::zero();
        for i in 1..=n as i64 {
            let inner: BigRational = (ell as i64 + 1..=i)
                .map(|j| self.q_pow(-(m as i64) * j) * self.psi(i - j) * self.gauss(i, j))
                .sum();
            total += inner * self.binom(i) * &w[i as usize];
        }
        ExactProb::from_closed_form(total)
    }

    /// Average decoding-error probability under maximum-likelihood decoding.
    pub fn p_mld(&self, eps: &ExactProb) -> ExactProb {
        let EnsembleParams { m, n, .. } = self.params;
        let w = erasure_weights(eps, n);
        let mut total = BigRational::zero();
        for i in 1..=n as i64 {
            let inner: BigRational = (1..=i)
                .map(|ell| {
                    self.q_pow(-(m as i64) * ell)
                        * (BigRational::one() - self.q_pow(-ell))
                        * self.psi(i - ell)
                        * self.gauss(i, ell)
                })
                .sum();
            total += inner * self.binom(i) * &w[i as usize];
        }
        ExactProb::from_closed_form(total)
    }

    /// `Cov(I_i, I_i')`; zero unless `1 <= i, i' <= min(m, n)`.
    pub fn covariance_incorrigible(&self, i: i64, i2: i64) -> BigRational {
        let EnsembleParams { m, n, .. } = self.params;
        let top = m.min(n) as i64;
        if i < 1 || i2 < 1 || i > top || i2 > top {
            return BigRational::zero();
        }
        let sum: BigRational = (1..=i.min(i2))
            .map(|s| self.cov_term(i, i2, s))
            .sum();
        self.psi(i) * self.psi(i2) * sum
    }

    /// `(1/psi_m(s) - 1)` times the multinomial `(n; s, i-s, i'-s, n-i-i'+s)`.
    fn cov_term(&self, i: i64, i2: i64, s: i64) -> BigRational {
        let n = self.params.n as i64;
        let rest = n - i - i2 + s;
        if rest < 0 {
            return BigRational::zero();
        }
        let parts = [s as u64, (i - s) as u64, (i2 - s) as u64, rest as u64];
        let multi = multinomial(n as u64, &parts).expect("parts sum to n");
        (BigRational::one() / self.psi(s) - BigRational::one())
            * BigRational::from_integer(multi.into())
    }

    /// Variance over the ensemble of the per-code unambiguous-decoding error.
    pub fn variance_ud(&self, eps: &ExactProb) -> ExactProb {
        let EnsembleParams { m, n, .. } = self.params;
        let top = m.min(n) as i64;
        let e = eps.ratio();
        let c = BigRational::one() - e;
        let e_pow: Vec<BigRational> = pow_table(e, 2 * n);
        let c_pow: Vec<BigRational> = pow_table(&c, 2 * n);
        let mut total = BigRational::zero();
        for i in 1..=top {
            for i2 in 1..=top {
                let inner: BigRational = (1..=i.min(i2)).map(|s| self.cov_term(i, i2, s)).sum();
                if inner.is_zero() {
                    continue;
                }
                let k = (i + i2) as usize;
                total += self.psi(i) * self.psi(i2) * inner * &e_pow[k] * &c_pow[2 * n - k];
            }
        }
        ExactProb::from_closed_form(total)
    }

    /// `sum_{i,i'} Cov(I_i, I_i') eps^{i+i'} (1-eps)^{2n-i-i'}`, the variance
    /// assembled from [`Formulas::covariance_incorrigible`].
    pub fn variance_ud_from_covariances(&self, eps: &ExactProb) -> BigRational {
        let n = self.params.n;
        let w = erasure_weights(eps, n);
        let mut total = BigRational::zero();
        for i in 1..=n {
            for i2 in 1..=n {
                let cov = self.covariance_incorrigible(i as i64, i2 as i64);
                if !cov.is_zero() {
                    total += cov * &w[i] * &w[i2];
                }
            }
        }
        total
    }
}

fn pow_table(x: &BigRational, k: usize) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(BigRational::one());
    for j in 1..=k {
        let next = &out[j - 1] * x;
        out.push(next);
    }
    out
}

/// `ln sum exp(x)` with a single max shift; empty or all `-inf` gives `-inf`.
pub fn log_sum_exp(terms: impl IntoIterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.into_iter().filter(|t| *t > f64::NEG_INFINITY).collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `k ln x`, with `0 ln 0 = 0`.
fn ln_pow(ln_x: f64, k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * ln_x
    }
}

/// Natural-log evaluator of the average error probabilities and the variance,
/// usable up to `n` around `10^4`.
#[derive(Clone, Debug)]
pub struct LogFormulas {
    params: EnsembleParams,
    ln_q: f64,
    /// `ln psi_m(i)` for `i = 0..=m`.
    ln_psi: Vec<f64>,
    /// `ln (1/q; 1/q)_k` for `k = 0..=max(n, m)`.
    ln_t_poch: Vec<f64>,
    ln_binom: Vec<f64>,
}

impl LogFormulas {
    pub fn new(params: EnsembleParams) -> Self {
        let EnsembleParams { q, m, n } = params;
        let ln_q = (q as f64).ln();
        let mut ln_psi = Vec::with_capacity(m + 1);
        let mut acc = 0.0;
        ln_psi.push(acc);
        for k in 0..m {
            acc += (-(-ln_q * (m - k) as f64).exp()).ln_1p();
            ln_psi.push(acc);
        }
        let top = n.max(m);
        let mut ln_t_poch = Vec::with_capacity(top + 1);
        let mut acc = 0.0;
        ln_t_poch.push(acc);
        for j in 1..=top {
            acc += (-(-ln_q * j as f64).exp()).ln_1p();
            ln_t_poch.push(acc);
        }
        let ln_binom = (0..=n).map(|i| ln_binomial(n as u64, i as u64)).collect();
        Self { params, ln_q, ln_psi, ln_t_poch, ln_binom }
    }

    pub fn params(&self) -> EnsembleParams {
        self.params
    }

    fn ln_psi(&self, i: i64) -> f64 {
        if i < 0 || i as usize > self.params.m {
            return f64::NEG_INFINITY;
        }
        self.ln_psi[i as usize]
    }

    /// `ln (1 - psi_m(i))`.
    fn ln_one_minus_psi(&self, i: i64) -> f64 {
        let lp = self.ln_psi(i);
        if lp == f64::NEG_INFINITY {
            0.0
        } else {
            (-lp.exp_m1()).ln()
        }
    }

    /// `ln [i j]_q` through `[i j]_q = q^{j(i-j)} [i j]_{1/q}`.
    fn ln_gauss(&self, i: usize, j: usize) -> f64 {
        if j > i {
            return f64::NEG_INFINITY;
        }
        (j * (i - j)) as f64 * self.ln_q + self.ln_t_poch[i]
            - self.ln_t_poch[j]
            - self.ln_t_poch[i - j]
    }

    fn ln_channel(&self, i: usize, ln_e: f64, ln_c: f64) -> f64 {
        ln_pow(ln_e, i) + ln_pow(ln_c, self.params.n - i)
    }

    fn logs(eps: f64) -> (f64, f64) {
        (eps.ln(), (1.0 - eps).ln())
    }

    /// `ln P_ud(R_{m,n}, eps)`.
    pub fn ln_p_ud(&self, eps: f64) -> f64 {
        let (ln_e, ln_c) = Self::logs(eps);
        let n = self.params.n;
        log_sum_exp((1..=n).map(|i| {
            self.ln_one_minus_psi(i as i64) + self.ln_binom[i] + self.ln_channel(i, ln_e, ln_c)
        }))
    }

    /// `ln P_ld(R_{m,n}, ell, eps)`.
    pub fn ln_p_ld(&self, ell: usize, eps: f64) -> f64 {
        let (ln_e, ln_c) = Self::logs(eps);
        let EnsembleParams { m, n, .. } = self.params;
        log_sum_exp((ell + 1..=n).map(|i| {
            let inner = log_sum_exp((ell + 1..=i).map(|j| {
                -((m * j) as f64) * self.ln_q + self.ln_psi((i - j) as i64) + self.ln_gauss(i, j)
            }));
            inner + self.ln_binom[i] + self.ln_channel(i, ln_e, ln_c)
        }))
    }

    /// `ln P_mld(R_{m,n}, eps)`.
    pub fn ln_p_mld(&self, eps: f64) -> f64 {
        let (ln_e, ln_c) = Self::logs(eps);
        let EnsembleParams { m, n, .. } = self.params;
        log_sum_exp((1..=n).map(|i| {
            let inner = log_sum_exp((1..=i).map(|ell| {
                -((m * ell) as f64) * self.ln_q
                    + (-(-self.ln_q * ell as f64).exp()).ln_1p()
                    + self.ln_psi((i - ell) as i64)
                    + self.ln_gauss(i, ell)
            }));
            inner + self.ln_binom[i] + self.ln_channel(i, ln_e, ln_c)
        }))
    }

    /// `ln sigma^2_ud(R_{m,n}, eps)`.
    pub fn ln_variance_ud(&self, eps: f64) -> f64 {
        let (ln_e, ln_c) = Self::logs(eps);
        let EnsembleParams { m, n, .. } = self.params;
        let top = m.min(n);
        let ln_fact = |k: usize| ln_factorial(k as u64);
        let ln_n_fact = ln_fact(n);
        let mut outer = Vec::with_capacity(top * top);
        for i in 1..=top {
            for i2 in 1..=top {
                let inner = log_sum_exp((1..=i.min(i2)).filter(|&s| n + s >= i + i2).map(|s| {
                    let ln_multi = ln_n_fact
                        - ln_fact(s)
                        - ln_fact(i - s)
                        - ln_fact(i2 - s)
                        - ln_fact(n + s - i - i2);
                    // ln(1/psi - 1) = ln(expm1(-ln psi))
                    (-self.ln_psi(s as i64)).exp_m1().ln() + ln_multi
                }));
                let k = i + i2;
                outer.push(
                    inner
                        + self.ln_psi(i as i64)
                        + self.ln_psi(i2 as i64)
                        + ln_pow(ln_e, k)
                        + ln_pow(ln_c, 2 * n - k),
                );
            }
        }
        log_sum_exp(outer)
    }
}
