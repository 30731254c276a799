use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Signed;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::profile::IncorrigibleProfile;
use super::stats::{Statistic, StatWeights};
use crate::error::{param, Result};
use crate::formulas::{EnsembleParams, Formulas};
use crate::gfmat::{sample_stream, sample_uniform, PrimeField};
use crate::qcomb::{ratio_to_f64, ExactProb};

/// Summary of a Monte Carlo run over the ensemble.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub params: EnsembleParams,
    pub epsilon: String,
    pub statistic: Statistic,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
    pub count: u64,
    pub seed: u64,
    /// SHA-256 over the per-sample values in sample order.
    pub digest: String,
}

/// `m = round((1-R) n)`, at least 1.
pub fn rows_for_rate(rate: f64, n: usize) -> usize {
    (((1.0 - rate) * n as f64).round() as usize).max(1)
}

fn field_for(params: &EnsembleParams) -> Result<PrimeField> {
    match u32::try_from(params.q) {
        Ok(p) => PrimeField::new(p),
        Err(_) => param(format!("q = {} is too large to simulate", params.q)),
    }
}

/// Exact per-sample numerators of `stat`, in sample order.
fn sample_numerators(
    params: &EnsembleParams,
    weights: &StatWeights,
    samples: u64,
    seed: u64,
) -> Result<Vec<BigUint>> {
    let field = field_for(params)?;
    (0..samples)
        .into_par_iter()
        .map(|s| {
            let h = sample_uniform(params.m, params.n, field, &mut sample_stream(seed, s));
            Ok(weights.numerator(&IncorrigibleProfile::from_matrix(&h)?))
        })
        .collect()
}

fn digest(values: &[BigUint]) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        let bytes = v.to_bytes_le();
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    hex::encode(hasher.finalize())
}

/// Samples `H` uniformly from `R_{m,n}` and reports the sample mean and the
/// unbiased sample variance of the chosen per-code statistic.
///
/// Sample `s` draws from its own stream of `master_seed` and all sums are
/// exact, so the report is identical for any number of worker threads.
pub fn monte_carlo(
    params: &EnsembleParams,
    eps: &ExactProb,
    samples: u64,
    master_seed: u64,
    stat: Statistic,
) -> Result<EnsembleReport> {
    if samples < 2 {
        return param(format!("need at least 2 samples, got {samples}"));
    }
    let weights = StatWeights::new(params.q, params.n, eps, stat)?;
    let values = sample_numerators(params, &weights, samples, master_seed)?;
    let sum: BigUint = values.iter().sum();
    let sum_sq: BigUint = values.iter().map(|v| v * v).sum();
    let d = BigInt::from(weights.denominator().clone());
    let count = BigInt::from(samples);
    let mean = BigRational::new(BigInt::from(sum.clone()), &d * &count);
    // (sum x^2 - (sum x)^2 / N) / (N - 1), all over D^2
    let centered = BigRational::new(BigInt::from(sum_sq) * &count - BigInt::from(&sum * &sum), count.clone());
    let variance = centered / BigRational::from_integer(&d * &d * (count - 1));
    let variance = ratio_to_f64(&variance);
    Ok(EnsembleReport {
        params: *params,
        epsilon: eps.to_string(),
        statistic: stat,
        mean: ratio_to_f64(&mean),
        variance,
        stderr: (variance / samples as f64).sqrt(),
        count: samples,
        seed: master_seed,
        digest: digest(&values),
    })
}

/// One bar of the ratio histogram; `ratio_bin` is the lower edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistogramBin {
    pub ratio_bin: f64,
    pub count: u64,
}

/// Share of sampled codes whose ratio lies strictly within `delta` of 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaFraction {
    pub delta: f64,
    pub fraction: f64,
}

/// Distribution of `P_ud(H, eps) / P_ud(R_{m,n}, eps)` over sampled codes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioReport {
    pub params: EnsembleParams,
    pub epsilon: String,
    pub count: u64,
    pub seed: u64,
    pub ensemble_p_ud: f64,
    pub bin_width: f64,
    pub histogram: Vec<HistogramBin>,
    pub within: Vec<DeltaFraction>,
    pub digest: String,
}

impl RatioReport {
    /// `ratio_bin,count` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ratio_bin,count\n");
        for b in &self.histogram {
            out.push_str(&format!("{},{}\n", crate::fmt_g12(b.ratio_bin), b.count));
        }
        out
    }

    pub fn fraction_within(&self, delta: f64) -> Option<f64> {
        self.within.iter().find(|d| d.delta == delta).map(|d| d.fraction)
    }
}

/// Width of the ratio histogram bins.
pub const RATIO_BIN_WIDTH: f64 = 0.05;

/// Tolerances at which the concentration fractions are reported.
pub const RATIO_DELTAS: [f64; 3] = [0.5, 0.25, 0.1];

/// Samples codes and compares each `P_ud(H, eps)` with the closed-form
/// ensemble average.
pub fn ratio_concentration_experiment(
    params: &EnsembleParams,
    eps: &ExactProb,
    samples: u64,
    master_seed: u64,
) -> Result<RatioReport> {
    if samples < 2 {
        return param(format!("need at least 2 samples, got {samples}"));
    }
    let average = Formulas::new(*params)?.p_ud(eps);
    if average.is_zero() {
        return param("the ensemble average P_ud is 0 at this erasure probability, ratios are 0/0");
    }
    let weights = StatWeights::new(params.q, params.n, eps, Statistic::Pud)?;
    let values = sample_numerators(params, &weights, samples, master_seed)?;
    // ratio = N / (D * avg)
    let scale = BigRational::from_integer(weights.denominator().clone().into()) * average.ratio();
    let ratios: Vec<BigRational> = values.iter().map(|v| BigRational::from_integer(v.clone().into()) / &scale).collect();

    let one = BigRational::from_integer(1.into());
    let within = RATIO_DELTAS
        .iter()
        .map(|&delta| {
            let tol = BigRational::from_float(delta).expect("finite delta");
            let hits = ratios.iter().filter(|r| (*r - &one).abs() < tol).count();
            DeltaFraction { delta, fraction: hits as f64 / samples as f64 }
        })
        .collect();

    let floats: Vec<f64> = ratios.iter().map(ratio_to_f64).collect();
    let top = floats.iter().copied().fold(0.0, f64::max);
    let bins = (top / RATIO_BIN_WIDTH).floor() as usize + 1;
    let mut counts = vec![0u64; bins];
    for r in &floats {
        counts[((r / RATIO_BIN_WIDTH).floor() as usize).min(bins - 1)] += 1;
    }
    let histogram = counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin { ratio_bin: k as f64 * RATIO_BIN_WIDTH, count })
        .collect();

    Ok(RatioReport {
        params: *params,
        epsilon: eps.to_string(),
        count: samples,
        seed: master_seed,
        ensemble_p_ud: average.to_f64(),
        bin_width: RATIO_BIN_WIDTH,
        histogram,
        within,
        digest: digest(&values),
    })
}
