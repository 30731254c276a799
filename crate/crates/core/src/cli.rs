//! Command-line front end: closed forms, exponents, figure data, simulation
//! and verification.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::ensemble::{
    exhaustive_oracle, exhaustive_oracle_with, monte_carlo, ratio_concentration_experiment, rows_for_rate,
    CheckStatus, EnsembleReport, OracleConfig, RatioReport, Statistic,
};
use crate::error::{param, Error, Result};
use crate::exponents::{
    concentration_margin, concentration_region, kappa0, s_ud, sup_f_numeric, sup_g_numeric, t_ld, t_ld_star, t_mld,
    t_ud, variance_breakpoint, ExponentResult, RatePoint,
};
use crate::fmt_g12;
use crate::formulas::{EnsembleParams, ErasureProb, Formulas, LogFormulas};
use crate::gfmat::is_prime;
use crate::qcomb::{parse_rational, ratio_to_f64, ExactProb};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "erasure-ensemble", version, about = "Decoding-error analytics for random parity-check ensembles over the q-ary erasure channel")]
pub struct Cli {
    /// Print the resolved run configuration as JSON on stderr before running.
    #[arg(long, global = true)]
    pub json_config: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Ensemble averages and the variance at one erasure probability.
    Formula(FormulaArgs),
    /// Error exponents, the variance exponent and the concentration margin.
    Exponent(ExponentArgs),
    /// Data behind figures 1 to 4.
    Figure(FigureArgs),
    /// Monte Carlo over sampled parity-check matrices.
    Simulate(SimulateArgs),
    /// Exhaustive oracle runs and exponent cross-checks.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FormulaArgs {
    #[arg(long)]
    pub q: u64,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    /// `a/b` for exact rationals, a decimal for doubles.
    #[arg(long)]
    pub eps: String,
    /// List exponent: the list size is q^ell.
    #[arg(long, default_value_t = 1)]
    pub ell: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExponentArgs {
    #[arg(long)]
    pub q: u64,
    #[arg(long = "R", alias = "rate")]
    pub rate: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub ell: u32,
    /// List size of the random-code comparison exponent; defaults to q^ell.
    #[arg(long = "L")]
    pub list: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FigureArgs {
    /// Figure number.
    #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
    pub id: u8,
    /// Spacing of the rate grid, `a/b` or decimal.
    #[arg(long, default_value = "1/500")]
    pub step: String,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub q: u64,
    /// Number of parity checks; use --rate instead to take round((1-R) n).
    #[arg(long, required_unless_present = "rate", conflicts_with = "rate")]
    pub m: Option<usize>,
    #[arg(long = "R", alias = "rate", id = "rate")]
    pub rate: Option<f64>,
    #[arg(long)]
    pub n: usize,
    /// Exact erasure probability, `a/b` or a finite decimal.
    #[arg(long)]
    pub eps: String,
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// p_ud, p_mld or p_ld(l).
    #[arg(long, default_value = "p_ud")]
    pub statistic: String,
    /// Report the distribution of P_ud(H)/P_ud(ensemble) instead.
    #[arg(long)]
    pub ratio: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VerifyArgs {
    /// Largest ensemble enumerated, as log2 of q^(mn).
    #[arg(long, default_value_t = 16)]
    pub max_bits: u32,
    /// Multiplies psi_m(i) by 1 + 1e-9 before verifying.
    #[arg(long, hide = true)]
    pub perturb_psi: Option<usize>,
}

/// Everything a run depends on, as echoed by `--json-config`.
#[derive(Debug, Serialize)]
pub struct RunConfig<'a> {
    pub subcommand: &'a Command,
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run(args: impl IntoIterator<Item = impl Into<OsString> + Clone>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    if cli.json_config {
        let config = RunConfig { subcommand: &cli.command };
        let _ = writeln!(err, "{}", serde_json::to_string(&config).expect("config serializes"));
    }
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(command: &Command, out: &mut dyn Write) -> Result<i32> {
    let text = match command {
        Command::Formula(a) => cmd_formula(a)?,
        Command::Exponent(a) => cmd_exponent(a)?,
        Command::Figure(a) => {
            let fig = figure(a.id, &parse_rational(&a.step)?)?;
            let text = match a.format {
                OutputFormat::Csv => fig.to_csv(),
                OutputFormat::Json => json(&fig),
            };
            return emit(&text, a.output.as_ref(), out).map(|_| EXIT_OK);
        }
        Command::Simulate(a) => {
            let text = cmd_simulate(a)?;
            return emit(&text, a.output.as_ref(), out).map(|_| EXIT_OK);
        }
        Command::Verify(a) => {
            let (text, ok) = cmd_verify(a)?;
            write_out(out, &text);
            return Ok(if ok { EXIT_OK } else { EXIT_VERIFY_FAILED });
        }
    };
    write_out(out, &text);
    Ok(EXIT_OK)
}

fn write_out(out: &mut dyn Write, text: &str) {
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

fn emit(text: &str, path: Option<&PathBuf>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Parameter(format!("cannot write {}: {e}", p.display()))),
        None => {
            write_out(out, text);
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

/// Prints `p_ud`, `p_ld(ell)`, `p_mld` and the variance, exactly for `a/b`
/// input and as doubles otherwise.
pub fn cmd_formula(a: &FormulaArgs) -> Result<String> {
    let params = EnsembleParams::new(a.q, a.m, a.n)?;
    let eps = ErasureProb::parse(&a.eps)?;
    let mut s = String::new();
    let _ = writeln!(s, "q = {}, m = {}, n = {}, eps = {}", a.q, a.m, a.n, a.eps.trim());
    let rows: [(String, String); 4] = match &eps {
        ErasureProb::Exact(e) => {
            let f = Formulas::new(params)?;
            [
                ("p_ud".into(), f.p_ud(e).to_string()),
                (format!("p_ld({})", a.ell), f.p_ld(a.ell, e).to_string()),
                ("p_mld".into(), f.p_mld(e).to_string()),
                ("variance_ud".into(), f.variance_ud(e).to_string()),
            ]
        }
        ErasureProb::Float(e) => {
            let f = LogFormulas::new(params);
            let show = |ln: f64| fmt_g12(ln.exp());
            [
                ("p_ud".into(), show(f.ln_p_ud(*e))),
                (format!("p_ld({})", a.ell), show(f.ln_p_ld(a.ell, *e))),
                ("p_mld".into(), show(f.ln_p_mld(*e))),
                ("variance_ud".into(), show(f.ln_variance_ud(*e))),
            ]
        }
    };
    for (k, v) in rows {
        let _ = writeln!(s, "{k} = {v}");
    }
    Ok(s)
}

fn exponent_line(name: &str, r: &ExponentResult) -> String {
    format!("{name} = {} [{}]\n", fmt_g12(r.value), r.branch.as_str())
}

/// Prints every exponent at one rate point with the numeric cross-check gaps.
pub fn cmd_exponent(a: &ExponentArgs) -> Result<String> {
    let p = RatePoint::new(a.q, a.rate, a.eps, a.ell)?;
    let list = match a.list {
        Some(l) => l,
        None => u32::try_from(a.q)
            .ok()
            .and_then(|q| q.checked_pow(a.ell))
            .ok_or_else(|| Error::Parameter("q^ell does not fit a list size; pass --L".into()))?,
    };
    let ld = t_ld(&p);
    let ud = t_ud(a.q, a.rate, a.eps)?;
    let s = s_ud(a.q, a.rate, a.eps)?;
    let f_delta = (-sup_f_numeric(&p).value - ld.value).abs();
    let g_delta = (-sup_g_numeric(&p).value - s.value).abs();
    let mut out = String::new();
    let _ = writeln!(out, "q = {}, R = {}, eps = {}, ell = {}, L = {list}", a.q, fmt_g12(a.rate), fmt_g12(a.eps), a.ell);
    out += &exponent_line(&format!("t_ld(ell={})", a.ell), &ld);
    out += &exponent_line("t_ud", &ud);
    out += &exponent_line("t_mld", &t_mld(a.q, a.rate, a.eps)?);
    out += &exponent_line(&format!("t_ld_star(L={list})"), &t_ld_star(a.q, list, a.rate, a.eps)?);
    out += &exponent_line("s_ud", &s);
    let _ = writeln!(out, "kappa0 = {}", fmt_g12(kappa0(a.q, a.rate)?));
    let region = match concentration_region(a.q, a.rate, a.eps) {
        Some(r) => serde_json::to_value(r).expect("region serializes").as_str().unwrap_or_default().to_string(),
        None => "none".to_string(),
    };
    let _ = writeln!(out, "concentration_margin = {} [region: {region}]", fmt_g12(concentration_margin(a.q, a.rate, a.eps)?));
    let _ = writeln!(out, "t_ld_boundaries = {}, {}", fmt_g12(ld.boundary_rates[0]), fmt_g12(ld.boundary_rates[1]));
    let _ = writeln!(out, "s_ud_boundary = {}", fmt_g12(variance_breakpoint(a.q, a.eps)));
    let _ = writeln!(out, "sup_f_delta = {}", fmt_g12(f_delta));
    let _ = writeln!(out, "sup_g_delta = {}", fmt_g12(g_delta));
    Ok(out)
}

/// One plotted curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureSeries {
    pub label: String,
    pub function: String,
    pub q: u64,
    pub epsilon: f64,
    pub ell: Option<u32>,
    pub list: Option<u32>,
    /// `(R, value)` with `R` strictly increasing.
    pub points: Vec<(f64, f64)>,
}

/// All curves of one figure on a shared rate grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Figure {
    pub id: u8,
    pub series: Vec<FigureSeries>,
}

const FIGURE_Q: u64 = 2;
const FIGURE_EPS: f64 = 0.25;

/// Rates `k * step` strictly inside (0, 1).
fn rate_grid(step: &BigRational) -> Result<Vec<f64>> {
    let zero = BigRational::from_integer(BigInt::from(0));
    let one = BigRational::from_integer(BigInt::from(1));
    if *step <= zero || *step >= one {
        return param(format!("grid step {step} must lie in (0, 1)"));
    }
    let mut rates = Vec::new();
    let mut r = step.clone();
    while r < one {
        rates.push(ratio_to_f64(&r));
        r += step;
        if rates.len() > 10_000_000 {
            return param("grid step too small");
        }
    }
    Ok(rates)
}

fn curve(label: &str, function: &str, ell: Option<u32>, list: Option<u32>, rates: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<FigureSeries> {
    Ok(FigureSeries {
        label: label.to_string(),
        function: function.to_string(),
        q: FIGURE_Q,
        epsilon: FIGURE_EPS,
        ell,
        list,
        points: rates.iter().map(|&r| Ok((r, f(r)?))).collect::<Result<_>>()?,
    })
}

/// Curves of figure `id` at `q = 2`, `eps = 0.25`.
pub fn figure(id: u8, step: &BigRational) -> Result<Figure> {
    let rates = rate_grid(step)?;
    let (q, e) = (FIGURE_Q, FIGURE_EPS);
    let ld = |ell: u32| {
        curve(&format!("t_ld_ell{ell}"), "t_ld", Some(ell), None, &rates, move |r| Ok(t_ld(&RatePoint::new(q, r, e, ell)?).value))
    };
    let star = |list: u32| {
        curve(&format!("t_ld_star_L{list}"), "t_ld_star", None, Some(list), &rates, move |r| Ok(t_ld_star(q, list, r, e)?.value))
    };
    let series = match id {
        1 => vec![ld(0)?, ld(1)?, ld(2)?],
        2 => vec![ld(2)?, star(4)?],
        3 => vec![ld(3)?, star(8)?],
        4 => vec![curve("s_ud", "s_ud", None, None, &rates, |r| Ok(s_ud(q, r, e)?.value))?],
        other => return param(format!("unknown figure {other}, expected 1 to 4")),
    };
    Ok(Figure { id, series })
}

impl Figure {
    fn parameter_text(&self) -> String {
        let mut s = format!("q={} eps={}", FIGURE_Q, fmt_g12(FIGURE_EPS));
        for c in &self.series {
            let _ = match (c.ell, c.list) {
                (Some(l), _) => write!(s, " {}:ell={l}", c.function),
                (_, Some(l)) => write!(s, " {}:L={l}", c.function),
                _ => write!(s, " {}", c.function),
            };
        }
        s
    }

    /// A `# source:` comment, a header row and one row per rate.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# source: figure {} parameters {}\n", self.id, self.parameter_text());
        s.push('R');
        for c in &self.series {
            s.push(',');
            s.push_str(&c.label);
        }
        s.push('\n');
        let rows = self.series.first().map_or(0, |c| c.points.len());
        for k in 0..rows {
            s.push_str(&fmt_g12(self.series[0].points[k].0));
            for c in &self.series {
                s.push(',');
                s.push_str(&fmt_g12(c.points[k].1));
            }
            s.push('\n');
        }
        s
    }

    /// Reads back the output of [`Figure::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::Parameter(format!("malformed figure csv: {what}"));
        let mut lines = text.lines();
        let source = lines.next().ok_or_else(|| bad("empty"))?;
        let id: u8 = source
            .strip_prefix("# source: figure ")
            .and_then(|r| r.split_whitespace().next())
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| bad("missing source line"))?;
        let template = figure(id, &BigRational::new(1.into(), 2.into()))?;
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("missing header"))?.split(',').collect();
        if header.first() != Some(&"R") || header.len() != template.series.len() + 1 {
            return Err(bad("unexpected header"));
        }
        let mut series = template.series;
        for (c, name) in series.iter_mut().zip(&header[1..]) {
            if c.label != *name {
                return Err(bad("unexpected column"));
            }
            c.points.clear();
        }
        for line in lines {
            let cells: Vec<f64> = line
                .split(',')
                .map(|c| c.parse().map_err(|_| bad("unparsable number")))
                .collect::<Result<_>>()?;
            if cells.len() != series.len() + 1 {
                return Err(bad("ragged row"));
            }
            for (c, v) in series.iter_mut().zip(&cells[1..]) {
                c.points.push((cells[0], *v));
            }
        }
        Ok(Self { id, series })
    }
}

#[derive(Serialize)]
struct MFromRate {
    rate: f64,
    rule: &'static str,
}

#[derive(Serialize)]
struct SimulationOutput<'a> {
    #[serde(flatten)]
    report: &'a EnsembleReport,
    closed_form_mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m_from_rate: Option<MFromRate>,
}

#[derive(Serialize)]
struct RatioOutput<'a> {
    #[serde(flatten)]
    report: &'a RatioReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    m_from_rate: Option<MFromRate>,
}

/// Runs a Monte Carlo or ratio experiment and renders its report.
pub fn cmd_simulate(a: &SimulateArgs) -> Result<String> {
    if u32::try_from(a.q).map_or(true, |q| !is_prime(q)) {
        return param(format!(
            "simulation needs a prime q, got q = {}; prime-power fields are covered by the closed forms only (formula, exponent)",
            a.q
        ));
    }
    let (m, m_from_rate) = match (a.m, a.rate) {
        (Some(m), _) => (m, None),
        (None, Some(r)) => {
            if !(0.0 < r && r < 1.0) {
                return param(format!("R = {r} must lie in (0, 1)"));
            }
            (rows_for_rate(r, a.n), Some(MFromRate { rate: r, rule: "m = round((1 - R) * n)" }))
        }
        (None, None) => return param("either --m or --R is required"),
    };
    let params = EnsembleParams::new(a.q, m, a.n)?;
    let eps: ExactProb = a.eps.parse()?;
    if a.ratio {
        let report = ratio_concentration_experiment(&params, &eps, a.samples, a.seed)?;
        return Ok(match a.format {
            OutputFormat::Csv => report.to_csv(),
            OutputFormat::Json => json(&RatioOutput { report: &report, m_from_rate }),
        });
    }
    if a.format == OutputFormat::Csv {
        return param("CSV output is only available with --ratio");
    }
    let stat: Statistic = a.statistic.parse()?;
    let report = monte_carlo(&params, &eps, a.samples, a.seed, stat)?;
    let f = Formulas::new(params)?;
    let closed = match stat {
        Statistic::Pud => f.p_ud(&eps),
        Statistic::Pld(ell) => f.p_ld(ell, &eps),
        Statistic::Pmld => f.p_mld(&eps),
    };
    let closed_form_variance = (stat == Statistic::Pud).then(|| f.variance_ud(&eps).to_f64());
    Ok(json(&SimulationOutput { report: &report, closed_form_mean: closed.to_f64(), closed_form_variance, m_from_rate }))
}

/// `(q, m, n)` enumerated by default: `q` in {2, 3}, `m, n <= 4`, within the
/// size bound.
pub fn verification_matrix(max_bits: u32) -> Vec<EnsembleParams> {
    let mut out = Vec::new();
    for q in [2u64, 3] {
        for m in 1..=4usize {
            for n in 1..=4usize {
                let bits = (m * n) as f64 * (q as f64).log2();
                if bits <= max_bits as f64 + 1e-9 {
                    out.push(EnsembleParams { q, m, n });
                }
            }
        }
    }
    out
}

/// Runs the default verification suite; the flag is false if any check failed.
pub fn cmd_verify(a: &VerifyArgs) -> Result<(String, bool)> {
    let mut text = String::new();
    let mut ok = true;
    let eps: Vec<ExactProb> = [(1, 4), (1, 2), (3, 4)].iter().map(|&(x, y)| ExactProb::from_ratio(x, y)).collect::<Result<_>>()?;
    let config = OracleConfig { max_bits: a.max_bits, ..OracleConfig::default() };
    for params in verification_matrix(a.max_bits) {
        let report = match a.perturb_psi {
            Some(i) if i <= params.m => {
                let mut f = Formulas::new(params)?;
                f.perturb_psi(i, &BigRational::new(BigInt::from(1_000_000_001u64), BigInt::from(1_000_000_000u64)));
                exhaustive_oracle_with(&f, &eps, &config)?
            }
            _ => exhaustive_oracle(&params, &eps, &config)?,
        };
        for c in &report.checks {
            let line = match &c.status {
                CheckStatus::Passed { comparisons } => format!("PASS {params} {} ({comparisons} comparisons)", c.name),
                CheckStatus::Failed { counterexample } => {
                    ok = false;
                    format!("FAIL {params} {}: {counterexample}", c.name)
                }
                CheckStatus::Skipped { reason } => format!("SKIP {params} {}: {reason}", c.name),
            };
            let _ = writeln!(text, "{line}");
        }
    }
    for (name, passed, detail) in exponent_checks()? {
        ok &= passed;
        let _ = writeln!(text, "{} exponents {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    }
    let _ = writeln!(text, "{}", if ok { "all checks passed" } else { "verification FAILED" });
    Ok((text, ok))
}

/// Closed-form exponents against their numeric maximizers on fixed grids.
fn exponent_checks() -> Result<Vec<(&'static str, bool, String)>> {
    let grid = [0.1, 0.3, 0.5, 0.7, 0.9];
    let mut worst_f: f64 = 0.0;
    let mut worst_g: f64 = 0.0;
    let mut kappa_ok = true;
    let mut margin_ok = true;
    for q in [2u64, 3, 4] {
        for &r in &grid {
            let k = kappa0(q, r)?;
            kappa_ok &= (1.0 - r) * (1.0 - r) < k && k < 1.0 - r;
            for &e in &grid {
                for ell in 0..=2 {
                    let p = RatePoint::new(q, r, e, ell)?;
                    worst_f = worst_f.max((-sup_f_numeric(&p).value - t_ld(&p).value).abs());
                }
                let p = RatePoint::new(q, r, e, 0)?;
                worst_g = worst_g.max((-sup_g_numeric(&p).value - s_ud(q, r, e)?.value).abs());
                if concentration_region(q, r, e).is_some() {
                    margin_ok &= concentration_margin(q, r, e)? > 0.0;
                }
            }
        }
    }
    Ok(vec![
        ("t_ld vs sup f", worst_f < 1e-6, format!("max gap {}", fmt_g12(worst_f))),
        ("s_ud vs sup g", worst_g < 1e-6, format!("max gap {}", fmt_g12(worst_g))),
        ("kappa0 bounds", kappa_ok, "(1-R)^2 < kappa0 < 1-R".to_string()),
        ("concentration margin", margin_ok, "positive on the claimed regions".to_string()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("erasure-ensemble").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn formula_exact_values() {
        let (code, out, _) = run_capture(&["formula", "--q", "2", "--m", "1", "--n", "2", "--eps", "1/2"]);
        assert_eq!(code, 0);
        assert!(out.contains("p_ud = 1/2\n") && out.contains("p_mld = 17/64\n") && out.contains("variance_ud = 1/32\n"), "{out}");
    }

    #[test]
    fn formula_zero_and_list_zero() {
        let (code, out, _) = run_capture(&["formula", "--q", "2", "--m", "2", "--n", "3", "--eps", "0"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().skip(1).filter(|l| l.ends_with(" = 0")).count(), 4, "{out}");
        let (_, out, _) = run_capture(&["formula", "--q", "2", "--m", "2", "--n", "3", "--eps", "1/4", "--ell", "0"]);
        let value = |key: &str| out.lines().find(|l| l.starts_with(key)).unwrap().split(" = ").nth(1).unwrap().to_string();
        assert_eq!(value("p_ud"), value("p_ld(0)"));
    }

    #[test]
    fn formula_float_matches_exact() {
        let (_, out, _) = run_capture(&["formula", "--q", "2", "--m", "1", "--n", "2", "--eps", "0.5"]);
        assert!(out.contains("p_ud = 0.5\n") && out.contains("variance_ud = 0.03125\n"), "{out}");
    }

    #[test]
    fn formula_usage_errors() {
        assert_eq!(run_capture(&["formula", "--q", "2", "--m", "1", "--n", "2", "--eps", "1/x"]).0, 2);
        assert_eq!(run_capture(&["formula", "--q", "2", "--m", "1", "--n", "2", "--eps", "3/2"]).0, 2);
        assert_eq!(run_capture(&["formula", "--q", "2"]).0, 2);
        assert_eq!(run_capture(&["bogus"]).0, 2);
    }

    #[test]
    fn exponent_output() {
        let (code, out, _) = run_capture(&["exponent", "--q", "2", "--R", "0.8", "--eps", "0.25"]);
        assert_eq!(code, 0);
        assert!(out.contains("t_ud = 0 [zero_region]"), "{out}");
        let (_, out, _) = run_capture(&["exponent", "--q", "2", "--R", "0.5", "--eps", "0.25"]);
        assert!(out.contains("kappa0 = 0.292893218813"), "{out}");
        for key in ["sup_f_delta = ", "sup_g_delta = "] {
            let v: f64 = out.lines().find_map(|l| l.strip_prefix(key)).unwrap().parse().unwrap();
            assert!(v < 1e-6);
        }
        assert_eq!(run_capture(&["exponent", "--q", "2", "--R", "1.2", "--eps", "0.25"]).0, 2);
        assert_eq!(run_capture(&["exponent", "--q", "2", "--R", "0.5", "--eps", "0"]).0, 2);
    }

    #[test]
    fn figure_csv_round_trips() {
        for id in 1..=4u8 {
            let fig = figure(id, &BigRational::new(1.into(), 50.into())).unwrap();
            let csv = fig.to_csv();
            assert!(csv.starts_with(&format!("# source: figure {id} parameters q=2 eps=0.25")));
            let back = Figure::from_csv(&csv).unwrap();
            assert_eq!(back.to_csv(), csv);
            for (a, b) in back.series.iter().zip(&fig.series) {
                for (x, y) in a.points.iter().zip(&b.points) {
                    assert!((x.0 - y.0).abs() <= 1e-11 * y.0 && (x.1 - y.1).abs() <= 1e-11 * y.1.abs());
                }
            }
        }
    }

    #[test]
    fn figure_defaults_and_errors() {
        let (code, out, _) = run_capture(&["figure", "1"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 2 + 499);
        assert_eq!(run_capture(&["figure", "5"]).0, 2);
        assert_eq!(run_capture(&["figure", "2", "--step", "2"]).0, 2);
        let (code, out, _) = run_capture(&["figure", "4", "--format", "json", "--step", "1/10"]);
        assert_eq!(code, 0);
        let fig: Figure = serde_json::from_str(&out).unwrap();
        assert_eq!(fig.series[0].points.len(), 9);
    }

    #[test]
    fn simulate_rejects_composite_q() {
        let (code, _, err) = run_capture(&["simulate", "--q", "4", "--m", "2", "--n", "4", "--eps", "1/4", "--samples", "10"]);
        assert_eq!(code, 2);
        assert!(err.contains("prime"), "{err}");
    }

    #[test]
    fn simulate_is_deterministic() {
        let args = ["simulate", "--q", "2", "--m", "3", "--n", "6", "--eps", "0.25", "--samples", "200", "--seed", "7"];
        let (code, a, _) = run_capture(&args);
        assert_eq!(code, 0);
        assert_eq!(a, run_capture(&args).1);
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        for key in ["params", "epsilon", "statistic", "mean", "variance", "stderr", "count", "seed", "digest", "closed_form_mean"] {
            assert!(v.get(key).is_some(), "{key} missing in {a}");
        }
        let (code, csv, _) = run_capture(&["simulate", "--q", "2", "--R", "0.5", "--n", "8", "--eps", "1/4", "--samples", "50", "--ratio", "--format", "csv"]);
        assert_eq!(code, 0);
        assert!(csv.starts_with("ratio_bin,count\n"));
    }

    #[test]
    fn json_config_echo() {
        let (code, _, err) = run_capture(&["--json-config", "exponent", "--q", "3", "--R", "0.4", "--eps", "0.2"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
        assert_eq!(v["subcommand"]["exponent"]["q"], 3);
    }

    #[test]
    fn verify_small_and_perturbed() {
        let (code, out, _) = run_capture(&["verify", "--max-bits", "6"]);
        assert_eq!(code, 0, "{out}");
        assert!(out.ends_with("all checks passed\n"));
        let (code, out, _) = run_capture(&["verify", "--max-bits", "6", "--perturb-psi", "1"]);
        assert_eq!(code, 1);
        assert!(out.contains("FAIL") && out.contains("rank_distribution"));
    }
}
