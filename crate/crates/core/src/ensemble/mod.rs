//! Concrete codes drawn from `R_{m,n}`: incorrigible profiles, per-code
//! decoding-error probabilities, Monte Carlo over the ensemble and the
//! exhaustive small-instance oracle.

mod monte_carlo;
mod oracle;
mod profile;
mod stats;

pub use monte_carlo::{
    monte_carlo, ratio_concentration_experiment, rows_for_rate, DeltaFraction, EnsembleReport, HistogramBin,
    RatioReport, RATIO_BIN_WIDTH, RATIO_DELTAS,
};
pub use oracle::{
    exhaustive_oracle, exhaustive_oracle_with, CheckOutcome, CheckStatus, OracleChecks, OracleConfig, OracleReport,
    DEFAULT_MAX_BITS, ORACLE_MAX_N, PAIR_CHECK_MAX_N,
};
pub use profile::{IncorrigibleProfile, DEFAULT_SUBSET_CAP};
pub use stats::{code_stats, CodeStats, StatWeights, Statistic};
