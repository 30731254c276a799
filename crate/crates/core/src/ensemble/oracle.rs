use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::profile::IncorrigibleProfile;
use super::stats::code_stats;
use crate::error::{Error, Result};
use crate::formulas::{EnsembleParams, Formulas};
use crate::gfmat::{enumerate_all_matrices, ColumnSet, GfMatrix, PrimeField};
use crate::qcomb::ExactProb;

/// Default bound on the ensemble size, as `log2 q^(mn)`.
pub const DEFAULT_MAX_BITS: u32 = 20;

/// Longest code the oracle enumerates subsets of.
pub const ORACLE_MAX_N: usize = 12;

/// Longest code for which every ordered pair of column sets is checked.
pub const PAIR_CHECK_MAX_N: usize = 8;

const CHUNK: u64 = 1 << 12;

/// Which identities the oracle verifies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OracleChecks {
    pub rank: bool,
    pub joint_rank: bool,
    pub pair_full_rank: bool,
    pub means: bool,
    pub variance: bool,
    pub covariance: bool,
}

impl Default for OracleChecks {
    fn default() -> Self {
        Self { rank: true, joint_rank: true, pair_full_rank: true, means: true, variance: true, covariance: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OracleConfig {
    pub max_bits: u32,
    pub checks: OracleChecks,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { max_bits: DEFAULT_MAX_BITS, checks: OracleChecks::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CheckStatus {
    Passed { comparisons: u64 },
    Failed { counterexample: String },
    Skipped { reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    #[serde(flatten)]
    pub status: CheckStatus,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        !matches!(self.status, CheckStatus::Failed { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleReport {
    pub params: EnsembleParams,
    pub epsilons: Vec<String>,
    pub matrices: u64,
    pub checks: Vec<CheckOutcome>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Exact tallies over a range of the enumeration; merging is addition.
#[derive(Clone, Debug, Default)]
struct Tally {
    total: u64,
    rank: Vec<u64>,
    /// `[(A * (n+1) + j) * (n+1) + r]`: rk H = j and rk H_A = r.
    joint: Vec<u64>,
    /// `[E * 2^n + E']`: both H_E and H_E' have full column rank.
    pairs: Vec<u64>,
    profiles: BTreeMap<IncorrigibleProfile, u64>,
}

impl Tally {
    fn new(n: usize, pairs: bool) -> Self {
        let sets = 1usize << n;
        Self {
            total: 0,
            rank: vec![0; n + 1],
            joint: vec![0; sets * (n + 1) * (n + 1)],
            pairs: if pairs { vec![0; sets * sets] } else { Vec::new() },
            profiles: BTreeMap::new(),
        }
    }

    fn add(&mut self, h: &GfMatrix) {
        let n = h.cols();
        let sets = 1usize << n;
        let ranks: Vec<usize> = (0..sets as u64)
            .map(|mask| h.submatrix_rank(&ColumnSet::from_mask(mask)).expect("mask within n columns"))
            .collect();
        let rk = ranks[sets - 1];
        self.total += 1;
        self.rank[rk] += 1;
        for (a, &r) in ranks.iter().enumerate() {
            self.joint[(a * (n + 1) + rk) * (n + 1) + r] += 1;
        }
        if !self.pairs.is_empty() {
            let full: Vec<usize> =
                (0..sets).filter(|&e| ranks[e] == e.count_ones() as usize).collect();
            for &e in &full {
                for &e2 in &full {
                    self.pairs[e * sets + e2] += 1;
                }
            }
        }
        let mut table = vec![vec![0u64; n + 1]; n + 1];
        for (e, &r) in ranks.iter().enumerate() {
            let size = e.count_ones() as usize;
            table[size][size - r] += 1;
        }
        *self.profiles.entry(IncorrigibleProfile::from_table(h.field().p(), table)).or_default() += 1;
    }

    fn merge(mut self, other: Self) -> Self {
        self.total += other.total;
        for (a, b) in self.rank.iter_mut().zip(other.rank) {
            *a += b;
        }
        for (a, b) in self.joint.iter_mut().zip(other.joint) {
            *a += b;
        }
        for (a, b) in self.pairs.iter_mut().zip(other.pairs) {
            *a += b;
        }
        for (k, v) in other.profiles {
            *self.profiles.entry(k).or_default() += v;
        }
        self
    }
}

fn int(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// Compares `(label, enumerated, closed form)` triples in order and reports
/// the first disagreement.
fn compare(name: &str, items: impl IntoIterator<Item = (String, BigRational, BigRational)>) -> CheckOutcome {
    let mut comparisons = 0;
    for (label, got, want) in items {
        comparisons += 1;
        if got != want {
            return CheckOutcome {
                name: name.to_string(),
                status: CheckStatus::Failed {
                    counterexample: format!("{label}: enumerated {got}, closed form {want}"),
                },
            };
        }
    }
    CheckOutcome { name: name.to_string(), status: CheckStatus::Passed { comparisons } }
}

fn skipped(name: &str, reason: String) -> CheckOutcome {
    CheckOutcome { name: name.to_string(), status: CheckStatus::Skipped { reason } }
}

/// Enumerates every matrix of `R_{m,n}` and checks the closed forms of
/// `formulas` against exact ensemble averages.
pub fn exhaustive_oracle(params: &EnsembleParams, epsilons: &[ExactProb], config: &OracleConfig) -> Result<OracleReport> {
    exhaustive_oracle_with(&Formulas::new(*params)?, epsilons, config)
}

/// As [`exhaustive_oracle`], against a caller-supplied evaluator.
pub fn exhaustive_oracle_with(formulas: &Formulas, epsilons: &[ExactProb], config: &OracleConfig) -> Result<OracleReport> {
    let params = formulas.params();
    let EnsembleParams { q, m, n } = params;
    let field = PrimeField::new(u32::try_from(q).map_err(|_| Error::Parameter(format!("q = {q} is not a usable prime")))?)?;
    if n > ORACLE_MAX_N {
        return Err(Error::CapExceeded {
            what: "oracle subset enumeration",
            requested: format!("n = {n}"),
            cap: format!("n <= {ORACLE_MAX_N}"),
        });
    }
    let size = BigUint::from(q).pow(m * n);
    if size > BigUint::one() << config.max_bits {
        return Err(Error::CapExceeded {
            what: "oracle matrix enumeration",
            requested: format!("{q}^{} matrices", m * n),
            cap: format!("2^{}", config.max_bits),
        });
    }
    let all = enumerate_all_matrices(m, n, field, 1u64 << config.max_bits)?;
    let total = all.total();
    let checks = config.checks;
    let with_pairs = checks.pair_full_rank && n <= PAIR_CHECK_MAX_N;
    let chunks: Vec<u64> = (0..total.div_ceil(CHUNK)).collect();
    let tally = chunks
        .into_par_iter()
        .map(|c| {
            let mut t = Tally::new(n, with_pairs);
            for h in all.clone().range(c * CHUNK, (c + 1) * CHUNK) {
                t.add(&h);
            }
            t
        })
        .reduce(|| Tally::new(n, with_pairs), Tally::merge);

    let total_r = int(total);
    let freq = |count: u64| int(count) / &total_r;
    let sets = 1usize << n;
    let size_of = |mask: usize| mask.count_ones() as i64;
    let mut out = Vec::new();

    if checks.rank {
        out.push(compare(
            "rank_distribution",
            (0..=n).map(|j| (format!("P(rk H = {j})"), freq(tally.rank[j]), formulas.prob_rank(j as i64).into_ratio())),
        ));
    }
    if checks.joint_rank {
        let joint = &tally.joint;
        let items = (0..sets).flat_map(|a| {
            (0..=n).flat_map(move |j| {
                (0..=n).map(move |r| {
                    let got = freq(joint[(a * (n + 1) + j) * (n + 1) + r]);
                    let want = formulas
                        .prob_rank_joint(size_of(a), j as i64, r as i64)
                        .expect("set size within n")
                        .into_ratio();
                    (format!("A = {a:#b}, rk H = {j}, rk H_A = {r}"), got, want)
                })
            })
        });
        out.push(compare("joint_rank", items));
    }
    if checks.pair_full_rank {
        if with_pairs {
            let pairs = &tally.pairs;
            let items = (0..sets).flat_map(|e| {
                (0..sets).map(move |e2| {
                    let got = freq(pairs[e * sets + e2]);
                    let want = match formulas.prob_two_full_ranks(size_of(e), size_of(e2), size_of(e & e2)) {
                        Ok(v) => v.into_ratio(),
                        // Overlap larger than m: full rank is impossible.
                        Err(Error::Undefined(_)) => BigRational::zero(),
                        Err(other) => panic!("{other}"),
                    };
                    (format!("E = {e:#b}, E' = {e2:#b}"), got, want)
                })
            });
            out.push(compare("pair_full_rank", items));
        } else {
            out.push(skipped("pair_full_rank", format!("n = {n} exceeds {PAIR_CHECK_MAX_N}")));
        }
    }
    if checks.means {
        let mut items = Vec::new();
        for i in 0..=n {
            for ell in 0..=n {
                let sum: u64 = tally.profiles.iter().map(|(p, c)| p.lambda(i, ell) * c).sum();
                items.push((format!("E[lambda_{i}^({ell})]"), freq(sum), formulas.expected_lambda(i as i64, ell as i64)));
            }
        }
        out.push(compare("incorrigible_means", items));
        let mut items = Vec::new();
        for eps in epsilons {
            let mut ud = BigRational::zero();
            let mut mld = BigRational::zero();
            let mut ld = vec![BigRational::zero(); n + 1];
            for (prof, &count) in &tally.profiles {
                let s = code_stats(prof, eps, n);
                let c = int(count);
                ud += s.p_ud.ratio() * &c;
                mld += s.p_mld.ratio() * &c;
                for (acc, v) in ld.iter_mut().zip(&s.p_ld) {
                    *acc += v.ratio() * &c;
                }
            }
            items.push((format!("mean P_ud at eps = {eps}"), ud / &total_r, formulas.p_ud(eps).into_ratio()));
            items.push((format!("mean P_mld at eps = {eps}"), mld / &total_r, formulas.p_mld(eps).into_ratio()));
            for (ell, acc) in ld.into_iter().enumerate() {
                items.push((format!("mean P_ld({ell}) at eps = {eps}"), acc / &total_r, formulas.p_ld(ell, eps).into_ratio()));
            }
        }
        out.push(compare("error_prob_means", items));
    }
    if checks.variance {
        let items = epsilons.iter().map(|eps| {
            let mut s1 = BigRational::zero();
            let mut s2 = BigRational::zero();
            for (prof, &count) in &tally.profiles {
                let p = code_stats(prof, eps, 0).p_ud.into_ratio();
                s2 += &p * &p * int(count);
                s1 += p * int(count);
            }
            let mean = s1 / &total_r;
            let var = s2 / &total_r - &mean * &mean;
            (format!("Var P_ud at eps = {eps}"), var, formulas.variance_ud(eps).into_ratio())
        });
        out.push(compare("variance_ud", items.collect::<Vec<_>>()));
    }
    if checks.covariance {
        let mean_i: Vec<BigRational> = (0..=n)
            .map(|i| freq(tally.profiles.iter().map(|(p, c)| p.incorrigible(i) * c).sum()))
            .collect();
        let mut items = Vec::new();
        for i in 0..=n {
            for i2 in 0..=n {
                let joint: BigRational = tally
                    .profiles
                    .iter()
                    .map(|(p, &c)| int(p.incorrigible(i) * p.incorrigible(i2) * c))
                    .sum();
                let cov = joint / &total_r - &mean_i[i] * &mean_i[i2];
                items.push((format!("Cov(I_{i}, I_{i2})"), cov, formulas.covariance_incorrigible(i as i64, i2 as i64)));
            }
        }
        out.push(compare("covariance", items));
    }

    Ok(OracleReport {
        params,
        epsilons: epsilons.iter().map(ToString::to_string).collect(),
        matrices: tally.total,
        checks: out,
    })
}
