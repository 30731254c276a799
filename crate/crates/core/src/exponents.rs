//! Asymptotic exponents of the ensemble `R_{(1-R)n,n}`.
//!
//! Closed forms for the list, unambiguous and maximum-likelihood error
//! exponents, the random-code comparison exponent, the variance exponent and
//! the concentration margin, together with numeric maximizers of the
//! underlying objectives that check each closed form independently.
//!
//! All logarithms are base `q` unless the name says otherwise.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Result};
use crate::qcomb::xlnx;

/// Inputs closer than this to 0 or 1 are rejected.
pub const OPEN_INTERVAL_MARGIN: f64 = 1e-6;

/// Grid spacing of the coarse search in the numeric maximizers.
pub const GRID_STEP: f64 = 1.0 / 200.0;

/// Argument tolerance of the golden-section refinement.
pub const REFINE_TOLERANCE: f64 = 1e-10;

fn check_open(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || !(OPEN_INTERVAL_MARGIN..=1.0 - OPEN_INTERVAL_MARGIN).contains(&v) {
        return param(format!(
            "{name} = {v} must lie in (0, 1) at least {OPEN_INTERVAL_MARGIN} away from the ends"
        ));
    }
    Ok(())
}

fn check_q(q: u64) -> Result<()> {
    if q < 2 {
        return param(format!("q must be at least 2, got {q}"));
    }
    Ok(())
}

/// A rate, an erasure probability and a list exponent (list size `q^ell`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub q: u64,
    pub rate: f64,
    pub epsilon: f64,
    pub ell: u32,
}

impl RatePoint {
    pub fn new(q: u64, rate: f64, epsilon: f64, ell: u32) -> Result<Self> {
        check_q(q)?;
        check_open("R", rate)?;
        check_open("epsilon", epsilon)?;
        Ok(Self { q, rate, epsilon, ell })
    }

    pub fn with_ell(self, ell: u32) -> Self {
        Self { ell, ..self }
    }

    fn ln_q(&self) -> f64 {
        (self.q as f64).ln()
    }

    fn log_q(&self, x: f64) -> f64 {
        x.ln() / self.ln_q()
    }
}

/// Which piece of a piecewise exponent produced the value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    ZeroRegion,
    MiddleRegion,
    LowRateRegion,
    /// Upper piece of the variance exponent.
    HighRateRegion,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ZeroRegion => "zero_region",
            Self::MiddleRegion => "middle_region",
            Self::LowRateRegion => "low_rate_region",
            Self::HighRateRegion => "high_rate_region",
        }
    }
}

/// A closed-form exponent value with its branch and breakpoints.
///
/// For the error exponents the breakpoints are `b1 < b2 = 1 - eps`; the
/// variance exponent has the single breakpoint `(1-eps)/(1+(q-1)eps^2)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentResult {
    pub value: f64,
    pub branch: Branch,
    pub boundary_rates: Vec<f64>,
}

/// Three-branch form shared by the list exponent and the comparison
/// exponent: `low_mult` is the slope of the low branch and `ln_k` is `ln` of
/// the constant `K` in `b1 = (1-eps)/(1-eps+K eps)`.
fn three_branch(p: &RatePoint, low_mult: f64, ln_k: f64) -> ExponentResult {
    let (r, e) = (p.rate, p.epsilon);
    // (1-eps)/(1-eps+K eps) written to survive K overflowing a double.
    let b1 = 1.0 / (1.0 + (ln_k + e.ln() - (1.0 - e).ln()).exp());
    let b2 = 1.0 - e;
    let boundary_rates = vec![b1, b2];
    if r >= b2 {
        return ExponentResult { value: 0.0, branch: Branch::ZeroRegion, boundary_rates };
    }
    if r <= b1 {
        // log_q(1 - eps + K eps) = (ln K + ln eps + ln(1 + (1-eps)/(K eps))) / ln q
        let ln_inner = ln_k + e.ln() + ((1.0 - e) / (ln_k + e.ln()).exp()).ln_1p();
        let value = low_mult * (1.0 - r) - ln_inner / p.ln_q();
        return ExponentResult { value: value.max(0.0), branch: Branch::LowRateRegion, boundary_rates };
    }
    let value = (1.0 - r) * p.log_q((1.0 - r) / e) + r * p.log_q(r / (1.0 - e));
    ExponentResult { value: value.max(0.0), branch: Branch::MiddleRegion, boundary_rates }
}

/// Error exponent of the average list-decoding error, list size `q^ell`.
pub fn t_ld(p: &RatePoint) -> ExponentResult {
    let k = p.ell as f64 + 1.0;
    three_branch(p, k, k * p.ln_q())
}

/// Error exponent of the average unambiguous-decoding error.
pub fn t_ud(q: u64, rate: f64, epsilon: f64) -> Result<ExponentResult> {
    Ok(t_ld(&RatePoint::new(q, rate, epsilon, 0)?))
}

/// Error exponent of the average maximum-likelihood decoding error; equal to
/// [`t_ud`].
pub fn t_mld(q: u64, rate: f64, epsilon: f64) -> Result<ExponentResult> {
    t_ud(q, rate, epsilon)
}

/// Exponent of the list-size-`L` random-code bound that the linear ensemble
/// is compared against.
pub fn t_ld_star(q: u64, list: u32, rate: f64, epsilon: f64) -> Result<ExponentResult> {
    if list < 1 {
        return param("list size L must be at least 1");
    }
    let p = RatePoint::new(q, rate, epsilon, 0)?;
    let l = list as f64;
    Ok(three_branch(&p, l, l * p.ln_q()))
}

/// Stationary point `kappa_0(R)` of the variance objective in its upper branch.
pub fn kappa0(q: u64, rate: f64) -> Result<f64> {
    check_q(q)?;
    check_open("R", rate)?;
    let qm1 = (q - 1) as f64;
    let r = rate;
    Ok(1.0 - r - ((4.0 * r * (1.0 - r) * qm1 + 1.0).sqrt() - 1.0) / (2.0 * qm1))
}

/// Rate where the variance exponent changes branch, `(1-eps)/(1+(q-1)eps^2)`.
pub fn variance_breakpoint(q: u64, epsilon: f64) -> f64 {
    (1.0 - epsilon) / (1.0 + (q - 1) as f64 * epsilon * epsilon)
}

/// Exponent of the variance of the unambiguous-decoding error.
pub fn s_ud(q: u64, rate: f64, epsilon: f64) -> Result<ExponentResult> {
    let p = RatePoint::new(q, rate, epsilon, 0)?;
    let (r, e) = (rate, epsilon);
    let b = variance_breakpoint(q, e);
    let boundary_rates = vec![b];
    if r <= b {
        let value = 1.0 - r - p.log_q(1.0 + (q - 1) as f64 * e * e);
        return Ok(ExponentResult { value, branch: Branch::LowRateRegion, boundary_rates });
    }
    let k0 = kappa0(q, r)?;
    let value = (1.0 - r) * p.log_q(k0 / (e * e)) + r * p.log_q((2.0 * r - 1.0 + k0) / ((1.0 - e) * (1.0 - e)));
    Ok(ExponentResult { value, branch: Branch::HighRateRegion, boundary_rates })
}

/// `c(eps, R) = S_ud - 2 T_ud`; concentration of the per-code error around
/// the ensemble average holds where this is positive.
pub fn concentration_margin(q: u64, rate: f64, epsilon: f64) -> Result<f64> {
    Ok(s_ud(q, rate, epsilon)?.value - 2.0 * t_ud(q, rate, epsilon)?.value)
}

/// The margin when both exponents sit in their upper branches, where `eps`
/// cancels: `(1-R) log(kappa_0/(1-R)^2) + R log((2R-1+kappa_0)/R^2)`.
pub fn concentration_margin_upper(q: u64, rate: f64) -> Result<f64> {
    let k0 = kappa0(q, rate)?;
    let r = rate;
    let lq = (q as f64).ln();
    Ok(((1.0 - r) * (k0 / ((1.0 - r) * (1.0 - r))).ln() + r * ((2.0 * r - 1.0 + k0) / (r * r)).ln()) / lq)
}

/// The margin at `R = (1-eps)/(1+(q-1)eps)`, where both exponents sit in
/// their low branches.
pub fn concentration_margin_at_critical_rate(q: u64, epsilon: f64) -> Result<f64> {
    check_q(q)?;
    check_open("epsilon", epsilon)?;
    let qm1 = (q - 1) as f64;
    let e = epsilon;
    let lq = (q as f64).ln();
    Ok(-(q as f64) * e / (1.0 + qm1 * e) - (qm1 * e * e).ln_1p() / lq + 2.0 * (qm1 * e).ln_1p() / lq)
}

/// Rate regions on which the per-code error is claimed to concentrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcentrationRegion {
    /// `(1-eps)/(1+(q-1)eps^2) <= R < 1-eps`, any `q`.
    AnyAlphabet,
    /// `(1-eps)/(1+(q-1)eps) <= R < 1-eps`, only for `q` in 2..=4.
    SmallAlphabet,
}

/// The widest claimed concentration region containing the point, if any.
pub fn concentration_region(q: u64, rate: f64, epsilon: f64) -> Option<ConcentrationRegion> {
    if rate >= 1.0 - epsilon {
        return None;
    }
    let qm1 = (q - 1) as f64;
    if (2..=4).contains(&q) && rate >= (1.0 - epsilon) / (1.0 + qm1 * epsilon) {
        return Some(ConcentrationRegion::SmallAlphabet);
    }
    if rate >= variance_breakpoint(q, epsilon) {
        return Some(ConcentrationRegion::AnyAlphabet);
    }
    None
}

/// Maximizes `f` on `[a, b]` by golden-section search; the endpoints are
/// candidates too, so a monotone `f` returns its boundary maximum.
pub fn golden_section_max(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    [(a, f(a)), (b, f(b)), (mid, f(mid)), (x1, f1), (x2, f2)]
        .into_iter()
        .fold((mid, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
}

/// Objective whose negated supremum over `t in (0, 1]` is the list exponent.
pub fn objective_f(p: &RatePoint, t: f64) -> f64 {
    let lq = p.ln_q();
    let (r, e) = (p.rate, p.epsilon);
    let penalty = (p.ell as f64 + 1.0) * (1.0 - r - t).max(0.0);
    let h = -(xlnx(t) + xlnx(1.0 - t)) / lq;
    -penalty + h + (t * e.ln() + (1.0 - t) * (1.0 - e).ln()) / lq
}

/// Supremum of [`objective_f`] with its maximizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupF {
    pub value: f64,
    pub t: f64,
}

/// Grid search at [`GRID_STEP`] followed by golden-section refinement;
/// `-value` estimates [`t_ld`].
pub fn sup_f_numeric(p: &RatePoint) -> SupF {
    let steps = (1.0 / GRID_STEP).round() as usize;
    let best = (1..=steps)
        .map(|k| k as f64 * GRID_STEP)
        .map(|t| (t, objective_f(p, t)))
        .fold((GRID_STEP, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    let lo = (best.0 - GRID_STEP).max(0.0);
    let hi = (best.0 + GRID_STEP).min(1.0);
    let (t, value) = golden_section_max(|t| objective_f(p, t), lo, hi, REFINE_TOLERANCE);
    SupF { value, t }
}

/// Objective whose negated supremum over the feasible region is the variance
/// exponent.
pub fn objective_g(p: &RatePoint, t: f64, t2: f64, kappa: f64) -> f64 {
    let lq = p.ln_q();
    let (r, e) = (p.rate, p.epsilon);
    let rest = 1.0 - t - t2 + kappa;
    let h = -(xlnx(kappa) + xlnx(t - kappa) + xlnx(t2 - kappa) + xlnx(rest)) / lq;
    (kappa - 1.0 + r) + h + ((t + t2) * e.ln() + (2.0 - t - t2) * (1.0 - e).ln()) / lq
}

/// Supremum of [`objective_g`] with its maximizer `(t, t', kappa)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupG {
    pub value: f64,
    pub t: f64,
    pub t2: f64,
    pub kappa: f64,
}

/// Feasible interval of `kappa` given `t, t'`.
fn kappa_bounds(t: f64, t2: f64) -> (f64, f64) {
    ((t + t2 - 1.0).max(0.0), t.min(t2))
}

/// Feasible interval of `t` given the other coordinate and `kappa`.
fn t_bounds(top: f64, other: f64, kappa: f64) -> (f64, f64) {
    (kappa, top.min(1.0 + kappa - other))
}

const MAX_SWEEPS: usize = 100_000;

/// Maximizes [`objective_g`] over `t, t' <= 1-R`, `t+t'-1 <= kappa <= min(t, t')`
/// by a grid at [`GRID_STEP`] and then coordinate-wise golden-section sweeps;
/// `-value` estimates [`s_ud`].
pub fn sup_g_numeric(p: &RatePoint) -> SupG {
    let top = 1.0 - p.rate;
    let n_top = (top / GRID_STEP).floor() as usize;
    let g = |t: f64, t2: f64, k: f64| objective_g(p, t, t2, k);
    // The objective is symmetric in t and t', so the grid covers t' <= t.
    let start = (1..=n_top)
        .into_par_iter()
        .map(|a| {
            let t = a as f64 * GRID_STEP;
            let mut best = (t, t, 0.0, f64::NEG_INFINITY);
            for b in 1..=a {
                let t2 = b as f64 * GRID_STEP;
                let (klo, khi) = kappa_bounds(t, t2);
                let c_lo = (klo / GRID_STEP).ceil().max(1.0) as usize;
                let c_hi = (khi / GRID_STEP + 1e-9).floor() as usize;
                for c in c_lo..=c_hi {
                    let k = c as f64 * GRID_STEP;
                    let v = g(t, t2, k);
                    if v > best.3 {
                        best = (t, t2, k, v);
                    }
                }
            }
            best
        })
        .reduce(|| (0.0, 0.0, 0.0, f64::NEG_INFINITY), |x, y| if y.3 > x.3 { y } else { x });
    let (mut t, mut t2, mut k, mut value) = start;
    if value == f64::NEG_INFINITY {
        // Region too thin for the grid; start at its centre.
        t = top / 2.0;
        t2 = top / 2.0;
        k = 0.5 * (kappa_bounds(t, t2).0 + kappa_bounds(t, t2).1);
        value = g(t, t2, k);
    }
    for _ in 0..MAX_SWEEPS {
        let before = (t, t2, k, value);
        let (lo, hi) = t_bounds(top, t2, k);
        t = golden_section_max(|x| g(x, t2, k), lo, hi, REFINE_TOLERANCE).0;
        let (lo, hi) = t_bounds(top, t, k);
        t2 = golden_section_max(|x| g(t, x, k), lo, hi, REFINE_TOLERANCE).0;
        let (lo, hi) = kappa_bounds(t, t2);
        k = golden_section_max(|x| g(t, t2, x), lo, hi, REFINE_TOLERANCE).0;
        value = g(t, t2, k);
        let moved = (t - before.0).abs().max((t2 - before.1).abs()).max((k - before.2).abs());
        if value < before.3 {
            (t, t2, k, value) = before;
            break;
        }
        if moved < REFINE_TOLERANCE {
            break;
        }
    }
    SupG { value, t, t2, kappa: k }
}

/// Finite-length exponents `-log_q(P_n)/n` of a probability series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalExponent {
    pub points: Vec<(usize, f64)>,
    /// Value at the largest `n`.
    pub estimate: f64,
}

impl EmpiricalExponent {
    /// True if the finite-length values move monotonically towards `target`.
    pub fn approaches(&self, target: f64) -> bool {
        self.points
            .windows(2)
            .all(|w| (w[1].1 - target).abs() <= (w[0].1 - target).abs())
    }
}

/// Turns `(n, ln P_n)` pairs into finite-length exponents. No limit model is
/// fitted; the last value is reported as the estimate.
pub fn empirical_exponent(q: u64, series: &[(usize, f64)]) -> Result<EmpiricalExponent> {
    check_q(q)?;
    if series.len() < 3 {
        return param(format!("need at least 3 points, got {}", series.len()));
    }
    let lq = (q as f64).ln();
    let mut points = Vec::with_capacity(series.len());
    for (idx, &(n, ln_p)) in series.iter().enumerate() {
        if n == 0 {
            return param("lengths must be positive");
        }
        if idx > 0 && n <= series[idx - 1].0 {
            return param("lengths must be strictly increasing");
        }
        if !ln_p.is_finite() || ln_p > 0.0 {
            return param(format!("log probability {ln_p} at n = {n} is not the log of a positive probability"));
        }
        points.push((n, -ln_p / (n as f64 * lq)));
    }
    let estimate = points.last().map(|p| p.1).unwrap_or_default();
    Ok(EmpiricalExponent { points, estimate })
}
