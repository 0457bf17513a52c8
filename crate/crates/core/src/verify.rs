//! Runnable checks of the growth bounds and exact identities, reported as
//! structured pass/fail records.
//!
//! Precondition violations are errors; a report with `passed = false` always
//! means the quantity was computed and missed its threshold.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greedy::{GreedyRun, Mode};
use crate::kernels::KernelKind;
use crate::metrics::{
    discrepancy_l1_prefixes, discrepancy_l2_sq, fn_l1_prefixes, logpot_l1, logpot_l2_sq,
    logpot_l2_sq_prefixes, pair_energy, pair_energy_prefixes, star_discrepancy_linf_prefixes,
    MetricsRow,
};
use crate::pointset::{van_der_corput, CirclePointSet, Provenance};

/// Upper bound on the growth ratios `R1`, `R2`.
pub const RATIO_CEILING: f64 = 10.0;
/// Allowed relative drift of a growth ratio from its committed baseline.
pub const BASELINE_TOLERANCE: f64 = 0.2;
/// Prefix lengths at which growth ratios are compared against baselines.
pub const RATIO_LENGTHS: [usize; 5] = [64, 128, 256, 512, 1024];
pub const THEOREM3_FLOOR: f64 = 0.1;
pub const WAGNER_FLOOR: f64 = 0.05;
pub const IDENTITY_TOLERANCE: f64 = 1e-9;
/// Relative slack on the pair-energy bound.
pub const LEMMA1_SLACK: f64 = 1e-12;
pub const LEMMA2_TOLERANCE: f64 = 1e-10;
pub const LEMMA2_SAMPLES: usize = 1000;
pub const LEMMA2_RNG_SEED: u64 = 0x1e5a;
pub const FEKETE_TOLERANCE: f64 = 1e-10;
pub const FEKETE_MAX_N: usize = 50;
pub const STABILITY_FACTOR: f64 = 2.0;
/// A perturbed run may carry at most this many manual points ...
pub const STABILITY_MAX_INJECTED: usize = 8;
/// ... all injected at or before this count.
pub const STABILITY_INJECTION_LIMIT: usize = 64;
pub const VDC_ANCHOR_CONSTANT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub passed: bool,
    pub measured: BTreeMap<String, f64>,
    pub threshold: BTreeMap<String, f64>,
    pub notes: String,
}

impl CheckReport {
    fn new(check_name: &str) -> Self {
        Self {
            check_name: check_name.to_string(),
            passed: true,
            measured: BTreeMap::new(),
            threshold: BTreeMap::new(),
            notes: String::new(),
        }
    }

    fn measure(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.measured.insert(key.into(), value);
        self
    }

    fn limit(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.threshold.insert(key.into(), value);
        self
    }
}

/// Committed growth ratios of one sequence, keyed by prefix length.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub theorem1: BTreeMap<usize, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub theorem2: BTreeMap<usize, f64>,
}

/// One JSON document per report, sorted by check name (stable for equal names).
pub fn to_ndjson(reports: &[CheckReport]) -> Result<String> {
    let mut sorted: Vec<&CheckReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.check_name.cmp(&b.check_name));
    let mut out = String::new();
    for r in sorted {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::Numerical(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// growth ratios

/// `[(1/N) sum_{n <= N} n s_n] / (log N)^2` for a per-prefix series `s`.
fn growth_ratio(series: &[f64], n: usize) -> f64 {
    let weighted: f64 = series[..n]
        .iter()
        .enumerate()
        .map(|(i, v)| (i + 1) as f64 * v)
        .sum();
    let log = (n as f64).ln();
    weighted / n as f64 / (log * log)
}

fn check_ratio_length(set: &CirclePointSet, n: usize, even: bool) -> Result<()> {
    if n < 4 || n > set.len() || (even && !n.is_multiple_of(2)) {
        return Err(Error::Domain(format!(
            "prefix length {n} outside [4, {}]{}",
            set.len(),
            if even { " or odd" } else { "" }
        )));
    }
    Ok(())
}

fn require_run(run: &GreedyRun, mode: Mode) -> Result<()> {
    if run.config.kernel != KernelKind::LogSin || run.config.mode != mode {
        return Err(Error::State(format!(
            "expected a {} logsin run, got {} {}",
            mode.name(),
            run.config.mode.name(),
            run.config.kernel.name()
        )));
    }
    Ok(())
}

/// `R1(N)` for each `N` in `lengths`, over `d_l1` of the insertion-order
/// prefixes. Every prefix of length `N` must be paired symmetric.
pub fn theorem1_ratios_of_set(set: &CirclePointSet, lengths: &[usize]) -> Result<Vec<f64>> {
    for &n in lengths {
        check_ratio_length(set, n, true)?;
        if !set.prefix(n).is_paired_symmetric() {
            return Err(Error::Symmetry(format!("prefix of length {n} is not symmetric")));
        }
    }
    let series = discrepancy_l1_prefixes(set);
    Ok(lengths.iter().map(|&n| growth_ratio(&series, n)).collect())
}

/// `R2(N)` for each `N` in `lengths`, over `f_l1` of the insertion-order prefixes.
pub fn theorem2_ratios_of_set(set: &CirclePointSet, lengths: &[usize]) -> Result<Vec<f64>> {
    for &n in lengths {
        check_ratio_length(set, n, false)?;
    }
    let series = fn_l1_prefixes(set);
    Ok(lengths.iter().map(|&n| growth_ratio(&series, n)).collect())
}

/// `R1(N) = [(1/N) sum_{n <= N} n d_l1(n)] / (log N)^2` for a symmetric run.
pub fn theorem1_ratio(run: &GreedyRun, n: usize) -> Result<f64> {
    require_run(run, Mode::Symmetric)?;
    Ok(theorem1_ratios_of_set(&run.final_set, &[n])?[0])
}

/// `R2(N) = [(1/N) sum_{n <= N} n f_l1(n)] / (log N)^2` for a plain run.
pub fn theorem2_ratio(run: &GreedyRun, n: usize) -> Result<f64> {
    require_run(run, Mode::Plain)?;
    Ok(theorem2_ratios_of_set(&run.final_set, &[n])?[0])
}

/// Ceiling and baseline comparison for growth ratios at `lengths`. Every length
/// must have a baseline entry when `baseline` is given.
pub fn ratio_report(
    check_name: &str,
    lengths: &[usize],
    ratios: &[f64],
    baseline: Option<&BTreeMap<usize, f64>>,
) -> Result<CheckReport> {
    let mut report = CheckReport::new(check_name);
    report.limit("ceiling", RATIO_CEILING);
    let mut failures = Vec::new();
    for (k, (&n, &r)) in lengths.iter().zip(ratios).enumerate() {
        report.measure(format!("R({n})"), r);
        if k > 0 {
            report.measure(format!("delta({n})"), (r - ratios[k - 1]).abs());
        }
        if !(r.is_finite() && r > 0.0 && r <= RATIO_CEILING) {
            failures.push(format!("R({n}) = {r} outside (0, {RATIO_CEILING}]"));
        }
        if let Some(base) = baseline {
            let b = *base
                .get(&n)
                .ok_or_else(|| Error::State(format!("baseline has no entry for N = {n}")))?;
            report.limit(format!("baseline({n})"), b);
            if (r / b - 1.0).abs() > BASELINE_TOLERANCE {
                failures.push(format!("R({n}) = {r} drifted from baseline {b}"));
            }
        }
    }
    if baseline.is_some() {
        report.limit("baseline_relative_tolerance", BASELINE_TOLERANCE);
    } else {
        report.notes = "no baseline supplied; ceiling only".into();
    }
    if !failures.is_empty() {
        report.passed = false;
        report.notes = failures.join("; ");
    }
    Ok(report)
}

/// `R1` at each length against the ceiling and an optional baseline. Also
/// records `N d_linf(N) / log N` at the largest length, with no threshold.
pub fn theorem1_check(
    set: &CirclePointSet,
    lengths: &[usize],
    baseline: Option<&Baseline>,
) -> Result<CheckReport> {
    let ratios = theorem1_ratios_of_set(set, lengths)?;
    let mut report = ratio_report("theorem1", lengths, &ratios, baseline.map(|b| &b.theorem1))?;
    record_linf_ratio(&mut report, set, lengths);
    Ok(report)
}

/// `R2` at each length against the ceiling and an optional baseline.
pub fn theorem2_check(
    set: &CirclePointSet,
    lengths: &[usize],
    baseline: Option<&Baseline>,
) -> Result<CheckReport> {
    let ratios = theorem2_ratios_of_set(set, lengths)?;
    let mut report = ratio_report("theorem2", lengths, &ratios, baseline.map(|b| &b.theorem2))?;
    record_linf_ratio(&mut report, set, lengths);
    Ok(report)
}

fn record_linf_ratio(report: &mut CheckReport, set: &CirclePointSet, lengths: &[usize]) {
    if let Some(&n) = lengths.iter().max() {
        let linf = star_discrepancy_linf_prefixes(&set.prefix(n))[n - 1];
        report.measure("linf_ratio", n as f64 * linf / (n as f64).ln());
    }
}

/// Powers of two in `[4, n]`.
pub fn dyadic_lengths(n: usize) -> Vec<usize> {
    std::iter::successors(Some(4usize), |&k| k.checked_mul(2))
        .take_while(|&k| k <= n)
        .collect()
}

// ---------------------------------------------------------------------------
// L2 growth of the log potential

/// `max_n sqrt(logpot_l2_sq(n) / log n)` over rows with `n >= 2`.
pub fn theorem3_growth(rows: &[MetricsRow]) -> Result<f64> {
    growth_max(rows.iter().map(|r| (r.n, r.logpot_l2_sq))).map(|(g, _)| g)
}

fn growth_max(rows: impl Iterator<Item = (usize, f64)>) -> Result<(f64, usize)> {
    rows.filter(|&(n, _)| n >= 2)
        .map(|(n, l2)| ((l2 / (n as f64).ln()).sqrt(), n))
        .fold(None, |best: Option<(f64, usize)>, cur| match best {
            Some(b) if b.0 >= cur.0 => Some(b),
            _ => Some(cur),
        })
        .ok_or_else(|| Error::State("growth needs a prefix with at least two points".into()))
}

/// `theorem3_growth` over every insertion-order prefix of `set`.
pub fn theorem3_growth_of_set(set: &CirclePointSet) -> Result<f64> {
    theorem3_check(set).map(|r| r.measured["growth"])
}

/// `theorem3_growth` over every prefix against `THEOREM3_FLOOR`.
pub fn theorem3_check(set: &CirclePointSet) -> Result<CheckReport> {
    let series = logpot_l2_sq_prefixes(set);
    let (growth, argmax) = growth_max(series.iter().enumerate().map(|(i, &v)| (i + 1, v)))?;
    let mut report = CheckReport::new("theorem3");
    report
        .measure("growth", growth)
        .measure("argmax_n", argmax as f64)
        .limit("floor", THEOREM3_FLOOR);
    report.passed = growth >= THEOREM3_FLOOR;
    Ok(report)
}

// ---------------------------------------------------------------------------
// L1 norm of the log potential against the discrepancy

/// Inputs of the ratio `logpot_l1 log n / (n d_l1)` for one prefix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WagnerSample {
    pub n: usize,
    pub logpot_l1: f64,
    pub d_l1: f64,
}

impl WagnerSample {
    pub fn ratio(&self) -> f64 {
        self.logpot_l1 * (self.n as f64).ln() / (self.n as f64 * self.d_l1)
    }
}

/// Samples for every even prefix `n >= 4`; each must be paired symmetric.
pub fn wagner_samples(set: &CirclePointSet) -> Result<Vec<WagnerSample>> {
    let lengths: Vec<usize> = (4..=set.len()).step_by(2).collect();
    for &n in &lengths {
        if !set.prefix(n).is_paired_symmetric() {
            return Err(Error::Symmetry(format!("prefix of length {n} is not symmetric")));
        }
    }
    let d_l1 = discrepancy_l1_prefixes(set);
    lengths
        .into_par_iter()
        .map(|n| {
            Ok(WagnerSample {
                n,
                logpot_l1: logpot_l1(&set.prefix(n))?,
                d_l1: d_l1[n - 1],
            })
        })
        .collect()
}

/// Minimum ratio over `samples` against `WAGNER_FLOOR`.
pub fn wagner_report(samples: &[WagnerSample]) -> Result<CheckReport> {
    let worst = samples
        .iter()
        .min_by(|a, b| a.ratio().total_cmp(&b.ratio()))
        .ok_or_else(|| Error::State("no even prefixes with at least 4 points".into()))?;
    let min_ratio = worst.ratio();
    let mut report = CheckReport::new("wagner");
    report
        .measure("min_ratio", min_ratio)
        .measure("argmin_n", worst.n as f64)
        .measure("prefixes", samples.len() as f64)
        .limit("floor", WAGNER_FLOOR);
    report.passed = min_ratio >= WAGNER_FLOOR;
    Ok(report)
}

/// Wagner ratio over the even prefixes of a symmetric run.
pub fn wagner_check(run: &GreedyRun) -> Result<CheckReport> {
    if run.config.mode != Mode::Symmetric {
        return Err(Error::State("wagner check needs a symmetric run".into()));
    }
    wagner_report(&wagner_samples(&run.final_set)?)
}

// ---------------------------------------------------------------------------
// exact identities

fn require_paired(set: &CirclePointSet, check: &str) -> Result<()> {
    if set.is_empty() || !set.is_paired_symmetric() {
        return Err(Error::State(format!("{check} needs a nonempty paired symmetric set")));
    }
    Ok(())
}

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `logpot_l2_sq = pi^2 N^2 d_l2_sq` on a paired symmetric set.
pub fn proposition_check(set: &CirclePointSet) -> Result<CheckReport> {
    require_paired(set, "proposition check")?;
    let n = set.len() as f64;
    let lhs = logpot_l2_sq(set)?;
    let rhs = std::f64::consts::PI.powi(2) * n * n * discrepancy_l2_sq(set)?;
    let err = relative_error(lhs, rhs);
    let mut report = CheckReport::new("proposition");
    report
        .measure("logpot_l2_sq", lhs)
        .measure("scaled_d_l2_sq", rhs)
        .measure("relative_error", err)
        .limit("relative_error", IDENTITY_TOLERANCE);
    report.passed = err <= IDENTITY_TOLERANCE;
    Ok(report)
}

fn lemma1_bound(n: usize) -> f64 {
    n as f64 * (n as f64).ln()
}

fn lemma1_ok(energy: f64, n: usize) -> bool {
    let bound = lemma1_bound(n);
    energy <= bound + LEMMA1_SLACK * bound.max(1.0)
}

/// `pair_energy <= N log N`; `relative_gap` is 0 exactly at the roots of unity.
pub fn lemma1_check(set: &CirclePointSet) -> Result<CheckReport> {
    let energy = pair_energy(set)?;
    let bound = lemma1_bound(set.len());
    let mut report = CheckReport::new("lemma1");
    report
        .measure("pair_energy", energy)
        .measure("bound", bound)
        .measure("relative_gap", (bound - energy) / bound)
        .limit("relative_slack", LEMMA1_SLACK);
    report.passed = lemma1_ok(energy, set.len());
    Ok(report)
}

/// `lemma1_check` on every insertion-order prefix with at least two points.
pub fn lemma1_prefix_check(set: &CirclePointSet) -> Result<CheckReport> {
    if set.len() < 2 {
        return Err(Error::State("pair energy needs at least two points".into()));
    }
    let energies = pair_energy_prefixes(set);
    let mut report = CheckReport::new("lemma1");
    let (mut worst, mut worst_n) = (f64::NEG_INFINITY, 0);
    let mut violations = 0usize;
    for (i, &e) in energies.iter().enumerate().skip(1) {
        let n = i + 1;
        let excess = (e - lemma1_bound(n)) / lemma1_bound(n);
        if excess > worst {
            (worst, worst_n) = (excess, n);
        }
        if !lemma1_ok(e, n) {
            violations += 1;
        }
    }
    report
        .measure("max_relative_excess", worst)
        .measure("argmax_n", worst_n as f64)
        .measure("violations", violations as f64)
        .measure("prefixes", (energies.len() - 1) as f64)
        .limit("relative_slack", LEMMA1_SLACK);
    report.passed = violations == 0;
    Ok(report)
}

/// `sum_k (1/2 - {x - x_k}) = #{x_k <= x} - N x` at `LEMMA2_SAMPLES` random
/// points away from the set.
pub fn lemma2_check(set: &CirclePointSet) -> Result<CheckReport> {
    lemma2_check_with(set, LEMMA2_SAMPLES, LEMMA2_RNG_SEED)
}

pub fn lemma2_check_with(set: &CirclePointSet, samples: usize, rng_seed: u64) -> Result<CheckReport> {
    require_paired(set, "lemma 2 check")?;
    let xs = set.sorted_angles();
    let n = xs.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut max_err: f64 = 0.0;
    let mut drawn = 0;
    while drawn < samples {
        let x: f64 = rng.gen_range(0.0..1.0);
        if set.find_near(x, 1e-9).is_some() {
            continue;
        }
        drawn += 1;
        let field: f64 = xs
            .iter()
            .map(|&p| {
                let d = x - p;
                0.5 - (d - d.floor())
            })
            .sum();
        let count = xs.partition_point(|&p| p <= x) as f64;
        max_err = max_err.max((field - (count - n * x)).abs());
    }
    let mut report = CheckReport::new("lemma2");
    report
        .measure("max_abs_error", max_err)
        .measure("samples", samples as f64)
        .limit("max_abs_error", LEMMA2_TOLERANCE);
    report.passed = max_err <= LEMMA2_TOLERANCE;
    Ok(report)
}

/// Relative error of `prod_{k<N} sin(pi k/N) = 2N/2^N`.
fn fekete_error(n: usize) -> f64 {
    let product: f64 = (1..n)
        .map(|k| (std::f64::consts::PI * k as f64 / n as f64).sin())
        .product();
    let closed = 2.0 * n as f64 * 0.5f64.powi(n as i32);
    relative_error(product, closed)
}

/// The sine product identity for one `N >= 1`.
pub fn fekete_check(n: usize) -> Result<CheckReport> {
    fekete_sweep_range(n, n)
}

/// The sine product identity for every `N` in `1..=max_n`.
pub fn fekete_sweep(max_n: usize) -> Result<CheckReport> {
    fekete_sweep_range(1, max_n)
}

fn fekete_sweep_range(lo: usize, hi: usize) -> Result<CheckReport> {
    if lo == 0 || hi < lo {
        return Err(Error::Domain(format!("empty or invalid range {lo}..={hi}")));
    }
    let (err, worst) = (lo..=hi)
        .map(|n| (fekete_error(n), n))
        .fold((0.0, lo), |a, b| if b.0 > a.0 { b } else { a });
    let mut report = CheckReport::new("fekete");
    report
        .measure("max_relative_error", err)
        .measure("argmax_n", worst as f64)
        .measure("max_n", hi as f64)
        .limit("max_relative_error", FEKETE_TOLERANCE);
    report.passed = err <= FEKETE_TOLERANCE;
    Ok(report)
}

// ---------------------------------------------------------------------------
// stability under manual injections

fn scaled_l1(set: &CirclePointSet, n: usize) -> f64 {
    let d = discrepancy_l1_prefixes(&set.prefix(n))[n - 1];
    let log = (n as f64).ln();
    n as f64 * d / (log * log)
}

/// Compares `N d_l1(N) / (log N)^2` of a perturbed run against its base.
pub fn stability_check(base: &GreedyRun, perturbed: &GreedyRun, n: usize) -> Result<CheckReport> {
    if base.config.kernel != perturbed.config.kernel || base.config.mode != perturbed.config.mode {
        return Err(Error::State("runs use different kernels or modes".into()));
    }
    if base.seed.angles() != perturbed.seed.angles() {
        return Err(Error::State("runs start from different seeds".into()));
    }
    if let Some(late) = perturbed
        .injections
        .iter()
        .find(|i| i.at_count > STABILITY_INJECTION_LIMIT)
    {
        return Err(Error::State(format!(
            "injection at count {} is later than {STABILITY_INJECTION_LIMIT}",
            late.at_count
        )));
    }
    if !base.injections.is_empty() {
        return Err(Error::State("base run must have no injections".into()));
    }
    stability_check_sets(&base.final_set, &perturbed.final_set, n)
}

/// `stability_check` on bare sequences, using provenance to count injections.
pub fn stability_check_sets(
    base: &CirclePointSet,
    perturbed: &CirclePointSet,
    n: usize,
) -> Result<CheckReport> {
    let manual = |s: &CirclePointSet| {
        s.points()
            .iter()
            .filter(|p| p.provenance == Provenance::Manual)
            .count()
    };
    if manual(base) != 0 {
        return Err(Error::State("base sequence contains manual points".into()));
    }
    let injected = manual(perturbed);
    if injected > STABILITY_MAX_INJECTED {
        return Err(Error::State(format!(
            "{injected} manual points exceed the limit of {STABILITY_MAX_INJECTED}"
        )));
    }
    if n < 2 || n > base.len() || n > perturbed.len() {
        return Err(Error::Domain(format!("N = {n} not reached by both sequences")));
    }
    let b = scaled_l1(base, n);
    let p = scaled_l1(perturbed, n);
    let factor = p / b;
    let mut report = CheckReport::new("stability");
    report
        .measure("base", b)
        .measure("perturbed", p)
        .measure("factor", factor)
        .measure("injected", injected as f64)
        .measure("n", n as f64)
        .limit("factor", STABILITY_FACTOR);
    report.passed = factor <= STABILITY_FACTOR;
    Ok(report)
}

// ---------------------------------------------------------------------------
// reference sequences

/// `N d_linf(N) <= 2 log N` for van der Corput prefixes `2 <= N <= max_n`.
pub fn van_der_corput_anchor(max_n: usize) -> Result<CheckReport> {
    if max_n < 2 {
        return Err(Error::Domain("anchor needs max_n >= 2".into()));
    }
    let angles = (1..=max_n as i64)
        .map(van_der_corput)
        .collect::<Result<Vec<f64>>>()?;
    let set = CirclePointSet::from_angles(&angles, Provenance::Seed)?;
    let linf = star_discrepancy_linf_prefixes(&set);
    let (worst, worst_n) = (2..=max_n)
        .map(|n| (n as f64 * linf[n - 1] / (n as f64).ln(), n))
        .fold((0.0, 2), |a, b| if b.0 > a.0 { b } else { a });
    let mut report = CheckReport::new("vdc_anchor");
    report
        .measure("max_scaled_linf", worst)
        .measure("argmax_n", worst_n as f64)
        .limit("max_scaled_linf", VDC_ANCHOR_CONSTANT);
    report.passed = worst <= VDC_ANCHOR_CONSTANT;
    Ok(report)
}
