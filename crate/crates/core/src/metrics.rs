//! Regularity functionals of finite point sets, evaluated in closed form.
//!
//! With `C(x) = #{k : x_k <= x}` the signed discrepancy `C(x)/N - x` and the
//! sawtooth field `F_N(x) = (1/N) sum_k (1/2 - {x - x_k})` differ by the
//! constant `mean(x_k) - 1/2` on `[0, 1)`. Both are linear between points, so
//! their L1 and L2 norms are sums of per-piece closed forms.
//!
//! The L2 norms of `F_N` and of the log potential come from the pairwise sum
//! `S = sum_{i,j} B2({x_i - x_j})`, `B2(t) = t^2 - t + 1/6`:
//!
//! ```text
//! ||F_N||^2 = S / (2 N^2),   || sum_k log|2 sin pi(x - x_k)| ||^2 = (pi^2 / 2) S.
//! ```
//!
//! The L1 norm of the log potential `Phi` uses the Clausen antiderivative on
//! the region where `Phi > 0`; since `Phi` has zero mean, `||Phi||_1` is twice
//! that integral.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greedy::{minimize_in_gap, GapMinimum, GreedyRun, DEFAULT_POSITION_TOLERANCE};
use crate::kernels::{kernel_antiderivative, KernelKind};
use crate::pointset::{CirclePointSet, Gap};
use crate::search::increasing_root;

/// Absolute position tolerance for the sign changes of the log potential.
pub const ROOT_TOLERANCE: f64 = 1e-13;

/// One row of regularity measurements for an `N`-point set. Squared L2 norms
/// are reported as squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub d_l1: f64,
    pub d_l2_sq: f64,
    pub d_linf: f64,
    pub f_l1: f64,
    pub f_l2_sq: f64,
    pub logpot_l1: f64,
    pub logpot_l2_sq: f64,
    #[serde(rename = "a_N")]
    pub a_n: f64,
    /// Zero for a single point (empty sum).
    pub pair_energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrefixSelector {
    All,
    /// Lengths 1, 2, 4, 8, ... up to the set size.
    Dyadic,
}

impl std::str::FromStr for PrefixSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(PrefixSelector::All),
            "dyadic" => Ok(PrefixSelector::Dyadic),
            other => Err(Error::Domain(format!("unknown prefix selector `{other}`"))),
        }
    }
}

impl PrefixSelector {
    pub fn lengths(self, len: usize) -> Vec<usize> {
        match self {
            PrefixSelector::All => (1..=len).collect(),
            PrefixSelector::Dyadic => std::iter::successors(Some(1usize), |n| n.checked_mul(2))
                .take_while(|&n| n <= len)
                .collect(),
        }
    }
}

fn sorted_nonempty(set: &CirclePointSet) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::State("metric of an empty set".into()));
    }
    Ok(set.sorted_angles())
}

/// `sup_x |C(x)/N - x|`.
pub fn star_discrepancy_linf(set: &CirclePointSet) -> Result<f64> {
    Ok(linf_sorted(&sorted_nonempty(set)?))
}

pub fn discrepancy_l1(set: &CirclePointSet) -> Result<f64> {
    Ok(piecewise_norms(&sorted_nonempty(set)?, 0.0).0)
}

pub fn discrepancy_l2_sq(set: &CirclePointSet) -> Result<f64> {
    Ok(piecewise_norms(&sorted_nonempty(set)?, 0.0).1)
}

/// `int |F_N|`.
pub fn fn_l1(set: &CirclePointSet) -> Result<f64> {
    let xs = sorted_nonempty(set)?;
    Ok(piecewise_norms(&xs, field_shift(&xs)).0)
}

/// `int F_N^2`, from the pairwise Bernoulli sum.
pub fn fn_l2_sq(set: &CirclePointSet) -> Result<f64> {
    let xs = sorted_nonempty(set)?;
    let n = xs.len() as f64;
    Ok(pairwise_b2(&xs) / (2.0 * n * n))
}

/// `int (sum_k log|2 sin pi(x - x_k)|)^2`.
pub fn logpot_l2_sq(set: &CirclePointSet) -> Result<f64> {
    let xs = sorted_nonempty(set)?;
    Ok(0.5 * PI * PI * pairwise_b2(&xs))
}

/// `int |sum_k log|2 sin pi(x - x_k)||`.
pub fn logpot_l1(set: &CirclePointSet) -> Result<f64> {
    sorted_nonempty(set)?;
    let lp = LogPotential::new(set)?;
    lp.positive_part().map(|p| 2.0 * p)
}

/// `max_{|z|=1} prod_k |z - z_k|`.
pub fn erdos_a(set: &CirclePointSet) -> Result<f64> {
    sorted_nonempty(set)?;
    Ok(LogPotential::new(set)?.max_modulus())
}

/// `sum_{i != j} log|2 sin pi(x_i - x_j)|`, each unordered pair counted twice.
pub fn pair_energy(set: &CirclePointSet) -> Result<f64> {
    if set.len() < 2 {
        return Err(Error::State("pair energy needs at least two points".into()));
    }
    let xs = set.angles();
    let mut total = 0.0;
    for (i, &a) in xs.iter().enumerate() {
        for &b in &xs[..i] {
            total -= KernelKind::LogSin.term_value(a - b);
        }
    }
    Ok(2.0 * total)
}

/// Every functional for one set.
pub fn metrics_row(set: &CirclePointSet) -> Result<MetricsRow> {
    let xs = sorted_nonempty(set)?;
    let n = xs.len() as f64;
    let (d_l1, d_l2_sq) = piecewise_norms(&xs, 0.0);
    let f_l1 = piecewise_norms(&xs, field_shift(&xs)).0;
    let s = pairwise_b2(&xs);
    let lp = LogPotential::new(set)?;
    Ok(MetricsRow {
        n: xs.len(),
        d_l1,
        d_l2_sq,
        d_linf: linf_sorted(&xs),
        f_l1,
        f_l2_sq: s / (2.0 * n * n),
        logpot_l1: 2.0 * lp.positive_part()?,
        logpot_l2_sq: 0.5 * PI * PI * s,
        a_n: lp.max_modulus(),
        pair_energy: if xs.len() < 2 { 0.0 } else { pair_energy(set)? },
    })
}

/// Rows for insertion-order prefixes of `set`, computed in parallel.
pub fn prefix_metrics(set: &CirclePointSet, which: PrefixSelector) -> Result<Vec<MetricsRow>> {
    which
        .lengths(set.len())
        .into_par_iter()
        .map(|n| metrics_row(&set.prefix(n)))
        .collect()
}

/// Rows for prefixes of the run's final set.
pub fn metrics_over_prefixes(run: &GreedyRun, which: PrefixSelector) -> Result<Vec<MetricsRow>> {
    prefix_metrics(&run.final_set, which)
}

// ---------------------------------------------------------------------------
// prefix series, one value per prefix length 1..=N

/// `d_linf` of every prefix, by incremental sorted insertion.
pub fn star_discrepancy_linf_prefixes(set: &CirclePointSet) -> Vec<f64> {
    sorted_prefix_series(set, linf_sorted)
}

/// `d_l1` of every prefix, by incremental sorted insertion.
pub fn discrepancy_l1_prefixes(set: &CirclePointSet) -> Vec<f64> {
    sorted_prefix_series(set, |xs| piecewise_norms(xs, 0.0).0)
}

pub fn discrepancy_l2_sq_prefixes(set: &CirclePointSet) -> Vec<f64> {
    sorted_prefix_series(set, |xs| piecewise_norms(xs, 0.0).1)
}

/// `f_l1` of every prefix.
pub fn fn_l1_prefixes(set: &CirclePointSet) -> Vec<f64> {
    sorted_prefix_series(set, |xs| piecewise_norms(xs, field_shift(xs)).0)
}

/// `logpot_l2_sq` of every prefix, by O(n) updates of the pairwise sum.
pub fn logpot_l2_sq_prefixes(set: &CirclePointSet) -> Vec<f64> {
    let xs = set.angles();
    let mut s = 0.0;
    (0..xs.len())
        .map(|i| {
            let cross: f64 = xs[..i].iter().map(|&b| bernoulli2(xs[i] - b)).sum();
            s += 2.0 * cross + 1.0 / 6.0;
            0.5 * PI * PI * s
        })
        .collect()
}

/// `pair_energy` of every prefix (zero for the first).
pub fn pair_energy_prefixes(set: &CirclePointSet) -> Vec<f64> {
    let xs = set.angles();
    let mut e = 0.0;
    (0..xs.len())
        .map(|i| {
            let cross: f64 = xs[..i]
                .iter()
                .map(|&b| KernelKind::LogSin.term_value(xs[i] - b))
                .sum();
            e -= 2.0 * cross;
            e
        })
        .collect()
}

fn sorted_prefix_series(set: &CirclePointSet, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut sorted: Vec<f64> = Vec::with_capacity(set.len());
    set.points()
        .iter()
        .map(|p| {
            let pos = sorted.partition_point(|&y| y < p.angle);
            sorted.insert(pos, p.angle);
            f(&sorted)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// closed forms

fn linf_sorted(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let hi = (i + 1) as f64 / n - x;
            let lo = i as f64 / n - x;
            hi.abs().max(lo.abs())
        })
        .fold(0.0, f64::max)
}

/// `F_N - (C/N - x)` on `[0, 1)`.
fn field_shift(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64 - 0.5
}

/// L1 and squared L2 norm of `x -> C(x)/N - x + shift` over `[0, 1)`.
fn piecewise_norms(sorted: &[f64], shift: f64) -> (f64, f64) {
    let n = sorted.len() as f64;
    let (mut l1, mut l2) = (0.0, 0.0);
    let mut a = 0.0;
    for i in 0..=sorted.len() {
        let b = if i < sorted.len() { sorted[i] } else { 1.0 };
        let w = b - a;
        if w > 0.0 {
            // on [a, b) the function is v - x
            let v = i as f64 / n + shift;
            let m = v - 0.5 * (a + b);
            l2 += w * (m * m + w * w / 12.0);
            l1 += if v <= a || v >= b {
                w * m.abs()
            } else {
                0.5 * ((v - a) * (v - a) + (b - v) * (b - v))
            };
        }
        a = b;
    }
    (l1, l2)
}

/// `B2({d})`.
fn bernoulli2(d: f64) -> f64 {
    let t = d - d.floor();
    t * t - t + 1.0 / 6.0
}

/// `sum_{i,j} B2({x_i - x_j})` over ordered pairs including `i = j`.
fn pairwise_b2(xs: &[f64]) -> f64 {
    let mut cross = 0.0;
    for (i, &a) in xs.iter().enumerate() {
        for &b in &xs[..i] {
            cross += bernoulli2(a - b);
        }
    }
    2.0 * cross + xs.len() as f64 / 6.0
}

// ---------------------------------------------------------------------------
// log potential

/// Gap minima of `U = -Phi`, one per mirror orbit of gaps.
///
/// For a mirror-symmetric set `U(1 - x) = U(x)`, so a gap and its mirror image
/// contribute equally; only gaps starting in `[0, 1/2)` are kept, with weight 2
/// unless the gap is its own mirror image.
struct LogPotential {
    angles: Vec<f64>,
    gaps: Vec<Gap>,
    weights: Vec<f64>,
    minima: Vec<GapMinimum>,
}

impl LogPotential {
    fn new(set: &CirclePointSet) -> Result<Self> {
        Self::build(set, true)
    }

    fn build(set: &CirclePointSet, use_mirror: bool) -> Result<Self> {
        let angles = set.angles();
        let all = set.gaps()?;
        let mirrored = use_mirror && set.len() >= 2 && set.is_paired_symmetric();
        let (gaps, weights): (Vec<Gap>, Vec<f64>) = if mirrored {
            all.into_iter()
                .filter_map(|g| {
                    // no point sits on the axis, so exactly two gaps straddle it
                    if g.contains(0.0) || g.contains(0.5) {
                        Some((g, 1.0))
                    } else if g.left < 0.5 {
                        Some((g, 2.0))
                    } else {
                        None
                    }
                })
                .unzip()
        } else {
            let w = vec![1.0; all.len()];
            (all, w)
        };
        let minima = gaps
            .par_iter()
            .map(|g| {
                minimize_in_gap(
                    KernelKind::LogSin,
                    &angles,
                    g.left,
                    g.length,
                    DEFAULT_POSITION_TOLERANCE,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            angles,
            gaps,
            weights,
            minima,
        })
    }

    fn max_modulus(&self) -> f64 {
        let u = self
            .minima
            .iter()
            .map(|m| m.value)
            .fold(f64::INFINITY, f64::min);
        (-u).exp()
    }
    /// `(U(x), U'(x), rounding bound on U(x))` with `U = -Phi`.
    fn potential_with_error(angles: &[f64], x: f64) -> (f64, f64, f64) {
        let (mut v, mut s, mut mag) = (0.0, 0.0, 0.0);
        for &p in angles {
            let t = KernelKind::LogSin.term(x - p);
            v += t.value;
            s += t.slope;
            mag += t.value.abs();
        }
        (v, s, 4.0 * f64::EPSILON * mag)
    }

    /// `int max(Phi, 0)`. In each gap `U` is convex with poles at both ends,
    /// so `{U < 0}` is a single interval bracketing the gap minimizer.
    fn positive_part(&self) -> Result<f64> {
        let angles = &self.angles;
        let pieces = self
            .gaps
            .par_iter()
            .zip(&self.minima)
            .zip(&self.weights)
            .map(|((g, m), &w)| (g, m, w))
            .filter(|(_, m, _)| m.value < 0.0)
            .map(|(g, m, w)| {
                let lo = g.left;
                let hi = g.left + g.length;
                // Newton on |p| - 1 = exp(-U) - 1, which is close to linear near
                // the crossings, starting from the quadratic model of U
                let h = (-2.0 * m.value / m.curvature).sqrt();
                let modulus = |x: f64| {
                    let (v, s, e) = Self::potential_with_error(angles, x);
                    let p = (-v).exp();
                    (p - 1.0, -s * p, e * p)
                };
                let r1 = increasing_root(
                    modulus,
                    lo,
                    m.x,
                    (m.x - h).max(0.5 * (lo + m.x)),
                    ROOT_TOLERANCE,
                );
                let r2 = increasing_root(
                    |x| {
                        let (g, d, e) = modulus(x);
                        (-g, -d, e)
                    },
                    m.x,
                    hi,
                    (m.x + h).min(0.5 * (m.x + hi)),
                    ROOT_TOLERANCE,
                );
                if !(r1 <= m.x && m.x <= r2) {
                    return Err(Error::Numerical(format!(
                        "sign changes {r1}, {r2} do not bracket the minimizer {}",
                        m.x
                    )));
                }
                // int_{r1}^{r2} Phi = -sum_k [A(r2 - x_k) - A(r1 - x_k)]
                let integral: f64 = angles
                    .iter()
                    .map(|&p| {
                        kernel_antiderivative(KernelKind::LogSin, r1 - p)
                            - kernel_antiderivative(KernelKind::LogSin, r2 - p)
                    })
                    .sum();
                Ok(w * integral)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(pieces.iter().sum())
    }
}
