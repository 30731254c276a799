use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Serialize, Serializer};

use super::profile::IncorrigibleProfile;
use crate::error::{param, Error, Result};
use crate::qcomb::{q_power, ExactProb};

/// Per-code decoding-error probabilities at one erasure probability.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeStats {
    pub p_ud: ExactProb,
    pub p_mld: ExactProb,
    /// `p_ld[l]` for `l = 0..=max_ell`.
    pub p_ld: Vec<ExactProb>,
}

/// Unsuccessful-decoding probabilities of one code, read off its profile.
pub fn code_stats(profile: &IncorrigibleProfile, eps: &ExactProb, max_ell: usize) -> CodeStats {
    let n = profile.n();
    let e = eps.ratio();
    let c = BigRational::one() - e;
    let weight = |i: usize| num_traits::pow(e.clone(), i) * num_traits::pow(c.clone(), n - i);
    let count = |x: u64| BigRational::from_integer(BigInt::from(x));
    let mut p_ud = BigRational::zero();
    let mut p_mld = BigRational::zero();
    let mut p_ld = vec![BigRational::zero(); max_ell + 1];
    for i in 1..=n {
        let w = weight(i);
        p_ud += count(profile.incorrigible(i)) * &w;
        for (ell, acc) in p_ld.iter_mut().enumerate() {
            *acc += count(profile.incorrigible_list(i, ell)) * &w;
        }
        for ell in 1..=i {
            let lost = BigRational::one() - q_power(profile.q() as u64, -(ell as i64));
            p_mld += count(profile.lambda(i, ell)) * lost * &w;
        }
    }
    CodeStats {
        p_ud: ExactProb::from_closed_form(p_ud),
        p_mld: ExactProb::from_closed_form(p_mld),
        p_ld: p_ld.into_iter().map(ExactProb::from_closed_form).collect(),
    }
}

/// Which per-code probability a simulation tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Statistic {
    Pud,
    Pld(usize),
    Pmld,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Pud => f.write_str("p_ud"),
            Self::Pld(ell) => write!(f, "p_ld({ell})"),
            Self::Pmld => f.write_str("p_mld"),
        }
    }
}

impl FromStr for Statistic {
    type Err = Error;

    /// Accepts `p_ud`, `p_mld` and `p_ld(l)`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "p_ud" | "ud" => Ok(Self::Pud),
            "p_mld" | "mld" => Ok(Self::Pmld),
            other => other
                .strip_prefix("p_ld(")
                .and_then(|rest| rest.strip_suffix(')'))
                .and_then(|ell| ell.parse().ok())
                .map(Self::Pld)
                .ok_or_else(|| Error::Parameter(format!("unknown statistic {other:?}"))),
        }
    }
}

impl Serialize for Statistic {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Integer coefficients `c[i][l]` and a common denominator `D` such that the
/// chosen per-code statistic equals `sum lambda[i][l] c[i][l] / D`.
///
/// Keeping per-code values as integers over a shared denominator makes
/// ensemble sums exact and independent of summation order.
#[derive(Clone, Debug)]
pub struct StatWeights {
    n: usize,
    coeff: Vec<Vec<BigUint>>,
    denom: BigUint,
}

fn to_biguint(x: &BigInt) -> BigUint {
    x.to_biguint().expect("probability parts are nonnegative")
}

impl StatWeights {
    pub fn new(q: u64, n: usize, eps: &ExactProb, stat: Statistic) -> Result<Self> {
        if let Statistic::Pld(ell) = stat {
            if ell > n {
                return param(format!("list exponent {ell} exceeds n = {n}"));
            }
        }
        let a = to_biguint(eps.numer());
        let b = to_biguint(eps.denom());
        let c = &b - &a;
        let q_big = BigUint::from(q);
        // w_i = a^i (b-a)^(n-i), so eps^i (1-eps)^(n-i) = w_i / b^n.
        let w: Vec<BigUint> = (0..=n).map(|i| a.pow(i as u32) * c.pow((n - i) as u32)).collect();
        let mut denom = b.pow(n as u32);
        let zero = BigUint::zero();
        let coeff = (0..=n)
            .map(|i| {
                (0..=n)
                    .map(|ell| match stat {
                        Statistic::Pud if ell >= 1 && ell <= i => w[i].clone(),
                        Statistic::Pld(cut) if ell > cut && ell <= i => w[i].clone(),
                        // (1 - q^-l) = (q^l - 1) q^(n-l) / q^n
                        Statistic::Pmld if ell >= 1 && ell <= i => {
                            (q_big.pow(ell as u32) - 1u32) * q_big.pow((n - ell) as u32) * &w[i]
                        }
                        _ => zero.clone(),
                    })
                    .collect()
            })
            .collect();
        if stat == Statistic::Pmld {
            denom *= q_big.pow(n as u32);
        }
        Ok(Self { n, coeff, denom })
    }

    pub fn denominator(&self) -> &BigUint {
        &self.denom
    }

    /// The numerator of the statistic for one code.
    pub fn numerator(&self, profile: &IncorrigibleProfile) -> BigUint {
        debug_assert_eq!(profile.n(), self.n);
        let mut acc = BigUint::zero();
        for (i, row) in profile.table().iter().enumerate() {
            for (ell, &count) in row.iter().enumerate().take(i + 1) {
                if count != 0 && !self.coeff[i][ell].is_zero() {
                    acc += &self.coeff[i][ell] * count;
                }
            }
        }
        acc
    }

    pub fn value(&self, profile: &IncorrigibleProfile) -> ExactProb {
        ExactProb::from_closed_form(BigRational::new(
            self.numerator(profile).into(),
            self.denom.clone().into(),
        ))
    }
}
