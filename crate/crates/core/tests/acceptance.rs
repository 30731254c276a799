//! Acceptance suite. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; the process fails if any criterion fails.

use std::time::{Duration, Instant};

use erasure_ensemble::cli::figure;
use erasure_ensemble::ensemble::{
    code_stats, exhaustive_oracle, monte_carlo, CheckStatus, IncorrigibleProfile, OracleChecks, OracleConfig,
    Statistic,
};
use erasure_ensemble::exponents::{
    concentration_margin, empirical_exponent, kappa0, s_ud, sup_f_numeric, sup_g_numeric, t_ld, t_ud, RatePoint,
};
use erasure_ensemble::formulas::{EnsembleParams, Formulas, LogFormulas};
use erasure_ensemble::gfmat::{sample_stream, sample_uniform, PrimeField};
use erasure_ensemble::qcomb::{binomial, gaussian_binomial, psi, psi_identity_check, ExactProb};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_secs as f64, || {
        format!("took {:.1} s, limit {limit_secs} s", elapsed.as_secs_f64())
    })
}

fn eps_grid() -> Vec<ExactProb> {
    [(1, 4), (1, 2), (3, 4)].iter().map(|&(a, b)| ExactProb::from_ratio(a, b).unwrap()).collect()
}

fn params(q: u64, m: usize, n: usize) -> EnsembleParams {
    EnsembleParams::new(q, m, n).unwrap()
}

/// Runs the selected oracle checks and reports the first failure.
fn oracle_grid(grid: &[(u64, usize, usize)], checks: OracleChecks, names: &[&str]) -> Result<u64, String> {
    let config = OracleConfig { checks, ..OracleConfig::default() };
    let mut comparisons = 0;
    for &(q, m, n) in grid {
        let report = exhaustive_oracle(&params(q, m, n), &eps_grid(), &config).map_err(|e| e.to_string())?;
        for name in names {
            match report.check(name).map(|c| &c.status) {
                Some(CheckStatus::Passed { comparisons: k }) => comparisons += k,
                Some(CheckStatus::Failed { counterexample }) => {
                    return Err(format!("q={q} m={m} n={n} {name}: {counterexample}"))
                }
                Some(CheckStatus::Skipped { reason }) => return Err(format!("q={q} m={m} n={n} {name} skipped: {reason}")),
                None => return Err(format!("{name} not run")),
            }
        }
    }
    Ok(comparisons)
}

const THEOREM_GRID: [(u64, usize, usize); 7] = [(2, 1, 2), (2, 2, 2), (2, 2, 3), (2, 3, 3), (2, 2, 4), (3, 1, 2), (3, 2, 2)];

fn means_only() -> OracleChecks {
    OracleChecks { rank: false, joint_rank: false, pair_full_rank: false, means: true, variance: false, covariance: false }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let k = oracle_grid(&THEOREM_GRID, means_only(), &["error_prob_means"])?;
    within(start.elapsed(), 60)?;
    Ok(format!("{k} exact comparisons of mean P_ud, P_ld, P_mld on 7 ensembles x 3 erasure probabilities"))
}

fn criterion_2() -> Outcome {
    let checks = OracleChecks { means: false, variance: true, ..means_only() };
    let k = oracle_grid(&THEOREM_GRID, checks, &["variance_ud"])?;
    let v = Formulas::new(params(2, 1, 2)).unwrap().variance_ud(&ExactProb::from_ratio(1, 2).unwrap());
    ensure(v == ExactProb::from_ratio(1, 32).unwrap(), || format!("variance at (2,1,2,1/2) is {v}, expected 1/32"))?;
    Ok(format!("{k} exact variance comparisons; (2,1,2,1/2) -> {v}"))
}

fn criterion_3() -> Outcome {
    let mut grid = Vec::new();
    for q in [2u64, 3] {
        for m in 1..=3 {
            for n in 1..=3 {
                grid.push((q, m, n));
            }
        }
    }
    let checks = OracleChecks { rank: true, joint_rank: true, pair_full_rank: true, ..OracleChecks { means: false, ..means_only() } };
    let k = oracle_grid(&grid, checks, &["rank_distribution", "joint_rank", "pair_full_rank"])?;
    Ok(format!("{k} exact comparisons of the three rank lemmas on {} ensembles", grid.len()))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let mut worst_f: f64 = 0.0;
    let mut worst_g: f64 = 0.0;
    for _ in 0..50 {
        let q = rng.random_range(2..=4u64);
        let rate = rng.random_range(0.02..0.98);
        let eps = rng.random_range(0.02..0.98);
        let ell = rng.random_range(0..=3u32);
        let p = RatePoint::new(q, rate, eps, ell).map_err(|e| e.to_string())?;
        let df = (-sup_f_numeric(&p).value - t_ld(&p).value).abs();
        let dg = (-sup_g_numeric(&p).value - s_ud(q, rate, eps).unwrap().value).abs();
        ensure(df < 1e-6 && dg < 1e-6, || format!("q={q} R={rate} eps={eps} ell={ell}: |f gap| {df:e}, |g gap| {dg:e}"))?;
        worst_f = worst_f.max(df);
        worst_g = worst_g.max(dg);
    }
    within(start.elapsed(), 30)?;
    Ok(format!("50 random points, max gap t_ld {worst_f:.2e}, s_ud {worst_g:.2e}, {:.1} s", start.elapsed().as_secs_f64()))
}

fn criterion_5() -> Outcome {
    let step = BigRational::new(1.into(), 500.into());
    let (q, eps) = (2.0f64, 0.25f64);

    let f1 = figure(1, &step).map_err(|e| e.to_string())?;
    for c in &f1.series {
        for w in c.points.windows(2) {
            ensure(w[1].1 <= w[0].1, || format!("{} increases at R = {}", c.label, w[1].0))?;
        }
        for &(r, v) in &c.points {
            ensure(r < 0.75 || v == 0.0, || format!("{} = {v} at R = {r} >= 0.75", c.label))?;
        }
    }
    for pair in f1.series.windows(2) {
        for (a, b) in pair[0].points.iter().zip(&pair[1].points) {
            ensure(b.1 >= a.1, || format!("{} below {} at R = {}", pair[1].label, pair[0].label, a.0))?;
        }
    }

    for (id, ell) in [(2u8, 2i32), (3, 3)] {
        let fig = figure(id, &step).map_err(|e| e.to_string())?;
        let boundary = (1.0 - eps) / (1.0 - eps + q.powi(ell + 1) * eps);
        for (ld, star) in fig.series[0].points.iter().zip(&fig.series[1].points) {
            let r = ld.0;
            if r >= boundary {
                ensure((star.1 - ld.1).abs() <= 1e-12, || format!("figure {id}: curves differ at R = {r}"))?;
            } else {
                ensure(star.1 > ld.1 && ld.1 > 0.0, || format!("figure {id}: no strict separation at R = {r}"))?;
            }
        }
    }

    let f4 = figure(4, &step).map_err(|e| e.to_string())?;
    ensure(f4.series[0].points.iter().all(|p| p.1 > 0.0), || "figure 4 has a nonpositive value".into())?;
    let bp = (1.0 - eps) / (1.0 + (q - 1.0) * eps * eps);
    let h = 1e-12;
    let jump = (s_ud(2, bp - h, eps).unwrap().value - s_ud(2, bp + h, eps).unwrap().value).abs();
    ensure(jump < 1e-9, || format!("s_ud jumps by {jump:e} at R = {bp}"))?;
    Ok(format!("figures 1-4 on a 1/500 grid; s_ud jump at R = {bp:.6} is {jump:.1e}"))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let p = params(2, 10, 20);
    let eps = ExactProb::from_ratio(1, 4).unwrap();
    let f = Formulas::new(p).unwrap();
    let (mean, var) = (f.p_ud(&eps).to_f64(), f.variance_ud(&eps).to_f64());
    let r = monte_carlo(&p, &eps, 10_000, 42, Statistic::Pud).map_err(|e| e.to_string())?;
    let z = (r.mean - mean) / r.stderr;
    ensure(z.abs() <= 4.0, || format!("sample mean {} vs {mean}: {z:.2} standard errors", r.mean))?;
    let rel = (r.variance - var) / var;
    ensure(rel.abs() <= 0.2, || format!("sample variance {} vs {var}: {:.1}%", r.variance, 100.0 * rel))?;
    within(start.elapsed(), 120)?;

    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| monte_carlo(&p, &eps, 500, 42, Statistic::Pud).unwrap())
    };
    let base = run(1);
    ensure(base == run(4) && base == run(1), || "reports differ between repeats or thread counts".into())?;
    let again = monte_carlo(&p, &eps, 10_000, 42, Statistic::Pud).unwrap();
    ensure(again == r, || "repeat of the full run differs".into())?;
    Ok(format!(
        "mean {:.6} vs {mean:.6} ({z:+.2} SE), variance {:.4e} vs {var:.4e} ({:+.1}%), identical across repeats and 1/4 threads",
        r.mean,
        r.variance,
        100.0 * rel
    ))
}

fn criterion_7() -> Outcome {
    let (rate, eps) = (0.5, 0.25);
    let series: Vec<(usize, f64)> =
        [50usize, 100, 200, 400].iter().map(|&n| (n, LogFormulas::new(params(2, n / 2, n)).ln_p_ud(eps))).collect();
    let emp = empirical_exponent(2, &series).map_err(|e| e.to_string())?;
    let target = t_ud(2, rate, eps).unwrap().value;
    let values: Vec<String> = emp.points.iter().map(|(n, v)| format!("{n}:{v:.4}")).collect();
    ensure(emp.approaches(target), || format!("not monotone toward {target}: {values:?}"))?;
    let gap = (emp.estimate - target).abs();
    ensure(gap <= 0.05, || format!("n = 400 value {} is {gap} from {target}", emp.estimate))?;
    Ok(format!("{} -> T_ud = {target:.4}, gap {gap:.4}", values.join(" ")))
}

fn criterion_8() -> Outcome {
    let grid: Vec<f64> = (1..=100).map(|k| k as f64 / 101.0).collect();
    let mut tested = 0;
    let mut min_margin = f64::INFINITY;
    for q in 2u64..=5 {
        let qf = q as f64;
        for &e in &grid {
            let upper = 1.0 - e;
            let lower1 = (1.0 - e) / (1.0 + (qf - 1.0) * e * e);
            let lower2 = (1.0 - e) / (1.0 + (qf - 1.0) * e);
            for &r in &grid {
                let in1 = lower1 <= r && r < upper;
                let in2 = q <= 4 && lower2 <= r && r < upper;
                if !(in1 || in2) {
                    continue;
                }
                let c = concentration_margin(q, r, e).map_err(|err| err.to_string())?;
                ensure(c > 0.0, || format!("margin {c} at q={q} R={r} eps={e}"))?;
                tested += 1;
                min_margin = min_margin.min(c);
            }
        }
    }
    Ok(format!("{tested} grid points in the two regions, smallest margin {min_margin:.3e}"))
}

fn criterion_9() -> Outcome {
    let mut count = 0u64;
    let mut tick = |ok: bool, what: &dyn Fn() -> String| -> Result<(), String> {
        count += 1;
        ensure(ok, what)
    };

    // q-binomial theorem, psi identity and psi range.
    for q in [2u64, 3, 5] {
        for n in 1..=10usize {
            for x in [1i64, 2, q as i64] {
                let x = BigInt::from(x);
                let qb = BigInt::from(q);
                let lhs = (0..n).fold(BigInt::one(), |acc, i| acc * (BigInt::one() + Pow::pow(&qb, i as u32) * &x));
                let rhs = (0..=n).fold(BigInt::zero(), |acc, i| {
                    let g = BigInt::from(gaussian_binomial(n as i64, i as i64, q).unwrap());
                    acc + g * Pow::pow(&qb, (i * i.saturating_sub(1) / 2) as u32) * Pow::pow(&x, i as u32)
                });
                tick(lhs == rhs, &|| format!("q-binomial theorem fails at q={q} n={n}"))?;
            }
        }
    }
    for q in [2u64, 3, 4, 5] {
        for m in 0..=10usize {
            let mut prev = BigRational::one();
            for i in 0..=m {
                tick(psi_identity_check(m, i, q), &|| format!("psi identity fails at q={q} m={m} i={i}"))?;
                let v = psi(m, i as i64, q).unwrap().into_ratio();
                tick(v >= BigRational::zero() && v <= prev, &|| format!("psi range/monotonicity at q={q} m={m} i={i}"))?;
                prev = v;
            }
        }
    }

    // Normalization, marginalization, list/mean identities and sandwich bounds.
    let half = BigRational::new(1.into(), 2.into());
    for q in [2u64, 3, 5] {
        for m in 1..=6usize {
            for n in 1..=6usize {
                let f = Formulas::new(params(q, m, n)).unwrap();
                let total: BigRational = (0..=n as i64).map(|j| f.prob_rank(j).into_ratio()).sum();
                tick(total.is_one(), &|| format!("rank distribution sums to {total} at q={q} m={m} n={n}"))?;
                for s in 0..=n as i64 {
                    for j in 0..=n as i64 {
                        let marginal: BigRational =
                            (0..=n as i64).map(|r| f.prob_rank_joint(s, j, r).unwrap().into_ratio()).sum();
                        tick(marginal == *f.prob_rank(j).ratio(), &|| format!("marginal at q={q} m={m} n={n} s={s} j={j}"))?;
                    }
                }
                for i in 0..=n as i64 {
                    let lam: BigRational = (0..=n as i64).map(|l| f.expected_lambda(i, l)).sum();
                    tick(lam == BigRational::from_integer(BigInt::from(binomial(n as u64, i as u64))), &|| {
                        format!("lambda sum at q={q} m={m} n={n} i={i}")
                    })?;
                    for l in 0..=n as i64 {
                        let tail: BigRational = (l + 1..=n as i64).map(|j| f.expected_lambda(i, j)).sum();
                        tick(f.expected_incorrigible_list(i, l) == tail, &|| format!("list tail at q={q} m={m} n={n} i={i} l={l}"))?;
                    }
                }
                for eps in eps_grid() {
                    let (ud, mld) = (f.p_ud(&eps).into_ratio(), f.p_mld(&eps).into_ratio());
                    tick(f.p_ld(0, &eps).into_ratio() == ud, &|| format!("p_ld(0) != p_ud at q={q} m={m} n={n}"))?;
                    tick(&ud * &half <= mld && mld <= ud, &|| format!("sandwich fails at q={q} m={m} n={n} eps={eps}"))?;
                }
            }
        }
    }

    // Per-code identities on sampled matrices.
    for (p, m, n) in [(2u32, 4usize, 10usize), (3, 3, 7), (5, 2, 5)] {
        let field = PrimeField::new(p).unwrap();
        for s in 0..40 {
            let h = sample_uniform(m, n, field, &mut sample_stream(7, s));
            let prof = IncorrigibleProfile::from_matrix(&h).unwrap();
            for i in 0..=n {
                let row: u64 = (0..=n).map(|l| prof.lambda(i, l)).sum();
                tick(BigInt::from(row) == BigInt::from(binomial(n as u64, i as u64)), &|| format!("per-code lambda sum, p={p} sample {s}"))?;
                tick(prof.incorrigible_list(i, 0) == prof.incorrigible(i), &|| format!("I^(0) != I, p={p} sample {s}"))?;
                for l in 0..=n {
                    let tail: u64 = (l + 1..=n).map(|j| prof.lambda(i, j)).sum();
                    tick(prof.incorrigible_list(i, l) == tail, &|| format!("per-code list tail, p={p} sample {s}"))?;
                }
            }
            for eps in eps_grid() {
                let st = code_stats(&prof, &eps, n);
                let (ud, mld) = (st.p_ud.ratio(), st.p_mld.ratio());
                tick(ud * &half <= *mld && mld <= ud, &|| format!("per-code sandwich, p={p} sample {s}"))?;
                tick(st.p_ld.windows(2).all(|w| w[1] <= w[0]), &|| format!("per-code p_ld not monotone, p={p} sample {s}"))?;
            }
        }
    }

    // kappa0 bounds and S_ud positivity.
    let grid: Vec<f64> = (1..50).map(|k| k as f64 / 50.0).collect();
    for q in [2u64, 3, 4, 5] {
        for &r in &grid {
            let k = kappa0(q, r).unwrap();
            tick((1.0 - r) * (1.0 - r) < k && k < 1.0 - r, &|| format!("kappa0 = {k} out of bounds at q={q} R={r}"))?;
            for &e in &grid {
                let v = s_ud(q, r, e).unwrap().value;
                tick(v > 0.0, &|| format!("s_ud = {v} at q={q} R={r} eps={e}"))?;
            }
        }
    }
    Ok(format!("{count} property checks; module unit and proptest suites run under cargo test"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("exact oracle equality of mean error probabilities", criterion_1),
        ("exact oracle equality of the variance", criterion_2),
        ("rank lemmas against enumeration", criterion_3),
        ("exponents against numeric maximizers", criterion_4),
        ("figure data shape", criterion_5),
        ("Monte Carlo consistency and determinism", criterion_6),
        ("finite-length exponent trend", criterion_7),
        ("concentration margin positivity", criterion_8),
        ("property suites", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id} PASS ({secs:.1} s) {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} FAIL ({secs:.1} s) {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
