//! Potential kernels on the circle `[0, 1)`.
//!
//! Both kernels are stored as energies to be *minimized*:
//!
//! * [`KernelKind::LogSin`]: `G(d) = -log(2 sin(pi d))`, the kernel of the
//!   inverse half Laplacian, `sum_{m>=1} cos(2 pi m d) / m`.
//! * [`KernelKind::Bernoulli`]: `G(d) = (d^2 - d + 1/6) / 4`, the kernel of the
//!   inverse Laplacian, `sum_{m>=1} cos(2 pi m d) / (2 pi m)^2`.
//!
//! The Clausen function `Cl2` supplies an exact antiderivative of the log-sine
//! kernel, which is what makes segment integrals of logarithmic potentials
//! exact.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 2.0 * PI;

/// Below this distance the log-sine kernel is reported as singular.
pub const SINGULARITY_CUTOFF: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    LogSin,
    Bernoulli,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::LogSin => "logsin",
            KernelKind::Bernoulli => "bernoulli",
        }
    }

    /// Lower bound on the second derivative of a single kernel term away from
    /// its pole.
    pub(crate) fn min_curvature(self) -> f64 {
        match self {
            KernelKind::LogSin => PI * PI,
            KernelKind::Bernoulli => 0.5,
        }
    }

    /// Value, first and second derivative of `x -> G(x - p)` at signed offset
    /// `delta = x - p`.
    ///
    /// `delta` may be any real; it is reduced internally. The log-sine branch
    /// returns infinities at `delta = 0`.
    #[inline]
    pub(crate) fn term(self, delta: f64) -> Term {
        match self {
            KernelKind::LogSin => {
                let r = delta - delta.round();
                let (s, c) = sin_cos_pi(r);
                let inv = 1.0 / s;
                Term {
                    value: -(2.0 * s.abs()).ln(),
                    slope: -PI * c * inv,
                    curvature: PI * PI * inv * inv,
                }
            }
            KernelKind::Bernoulli => {
                let t = delta - delta.floor();
                Term {
                    value: 0.25 * (t * t - t + 1.0 / 6.0),
                    slope: 0.25 * (2.0 * t - 1.0),
                    curvature: 0.5,
                }
            }
        }
    }

    /// First and second derivative of `x -> G(x - p)` at `delta = x - p`.
    #[inline]
    pub(crate) fn term_derivatives(self, delta: f64) -> (f64, f64) {
        match self {
            KernelKind::LogSin => {
                let r = delta - delta.round();
                let (s, c) = sin_cos_pi(r);
                let inv = 1.0 / s;
                (-PI * c * inv, PI * PI * inv * inv)
            }
            KernelKind::Bernoulli => {
                let t = delta - delta.floor();
                (0.25 * (2.0 * t - 1.0), 0.5)
            }
        }
    }

    /// Value of `x -> G(x - p)` at signed offset `delta = x - p`.
    #[inline]
    pub(crate) fn term_value(self, delta: f64) -> f64 {
        match self {
            KernelKind::LogSin => {
                let r = delta - delta.round();
                -(2.0 * sin_cos_pi(r).0.abs()).ln()
            }
            KernelKind::Bernoulli => {
                let t = delta - delta.floor();
                0.25 * (t * t - t + 1.0 / 6.0)
            }
        }
    }
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logsin" => Ok(KernelKind::LogSin),
            "bernoulli" => Ok(KernelKind::Bernoulli),
            other => Err(Error::Domain(format!("unknown kernel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Term {
    pub value: f64,
    pub slope: f64,
    pub curvature: f64,
}

/// `(sin(pi t), cos(pi t))` with exact zeros at integer and half-integer `t`,
/// and exact odd/even symmetry in `t`.
#[inline]
pub(crate) fn sin_cos_pi(t: f64) -> (f64, f64) {
    let n = (2.0 * t).round();
    let f = t - 0.5 * n;
    let (s, c) = (PI * f).sin_cos();
    match (n as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

pub(crate) fn check_angle(x: f64) -> Result<()> {
    if x.is_finite() && (0.0..1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("angle {x} is outside [0, 1)")))
    }
}

/// Distance between two angles measured along the circle, in `[0, 1/2]`.
pub fn wrapped_distance(a: f64, b: f64) -> Result<f64> {
    check_angle(a)?;
    check_angle(b)?;
    Ok(circle_distance(a, b))
}

/// Unchecked variant of [`wrapped_distance`] for arbitrary reals.
#[inline]
pub(crate) fn circle_distance(a: f64, b: f64) -> f64 {
    // abs first keeps the result symmetric in its arguments
    let d = (a - b).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Kernel energy at circle distance `d`.
///
/// The log-sine kernel is singular at `d = 0`; distances below
/// [`SINGULARITY_CUTOFF`] are reported as [`Error::Singularity`] instead of
/// being clamped.
pub fn kernel_value(kind: KernelKind, d: f64) -> Result<f64> {
    if !d.is_finite() || !(0.0..=0.5).contains(&d) {
        return Err(Error::Domain(format!("distance {d} is outside [0, 1/2]")));
    }
    match kind {
        KernelKind::LogSin if d < SINGULARITY_CUTOFF => Err(Error::Singularity(d)),
        _ => Ok(kind.term_value(d)),
    }
}

// |B_{2n}| / (2n (2n+1)!) for n = 1..=26.
#[allow(clippy::excessive_precision)]
const CLAUSEN_COEFFS: [f64; 26] = [
    1.3888888888888889e-2,
    6.9444444444444444e-5,
    7.873519778281683e-7,
    1.1482216343327454e-8,
    1.8978869988970999e-10,
    3.3873013709535213e-12,
    6.3726364431831804e-14,
    1.2462059912950672e-15,
    2.5105444608999546e-17,
    5.1782588060906235e-19,
    1.0887357368300849e-20,
    2.3257441143020872e-22,
    5.0351952131473896e-24,
    1.1026499294381215e-25,
    2.4386585509007345e-27,
    5.4401426788562523e-29,
    1.2228340131217352e-30,
    2.7672634689679506e-32,
    6.3000905918320139e-34,
    1.4420868388418475e-35,
    3.3170939991595428e-37,
    7.6639135579206579e-39,
    1.7778714733830658e-40,
    4.1396058982341373e-42,
    9.6715570360811018e-44,
    2.2667187016766124e-45,
];

/// Clausen function `Cl2(theta) = sum_{k>=1} sin(k theta) / k^2`.
///
/// The argument is reduced to `(-pi, pi]` and evaluated with the expansion
/// `theta - theta log|theta| + sum_n |B_2n| theta^(2n+1) / (2n (2n+1)!)`,
/// which converges on the whole reduced range (ratio at most 1/4).
pub fn clausen_cl2(theta: f64) -> f64 {
    if !theta.is_finite() {
        return f64::NAN;
    }
    let r = theta - TAU * (theta / TAU).round();
    let a = r.abs();
    if a == 0.0 {
        return 0.0;
    }
    let a2 = a * a;
    // four interleaved Horner chains in a2^4
    let a4 = a2 * a2;
    let a8 = a4 * a4;
    let mut chains = [0.0; 4];
    for block in CLAUSEN_COEFFS.chunks(4).rev() {
        for (acc, c) in chains.iter_mut().zip(block) {
            *acc = *acc * a8 + c;
        }
    }
    let poly = chains[0] + a2 * (chains[1] + a2 * (chains[2] + a2 * chains[3]));
    let value = a - a * a.ln() + a * a2 * poly;
    value.copysign(r)
}

/// Antiderivative `A` of the kernel along the circle: `A'(x) = G({x})`,
/// `A(0) = 0`, and `A(x + 1) = A(x)` because both kernels have zero mean.
pub fn kernel_antiderivative(kind: KernelKind, x: f64) -> f64 {
    match kind {
        KernelKind::LogSin => clausen_cl2(TAU * x) / TAU,
        KernelKind::Bernoulli => {
            let t = x - x.floor();
            0.25 * t * (t * (t / 3.0 - 0.5) + 1.0 / 6.0)
        }
    }
}

/// Cosine coefficient `c_m` of `G(d) = sum_{m>=1} c_m cos(2 pi m d)`.
pub fn fourier_coefficient(kind: KernelKind, m: i64) -> Result<f64> {
    if m <= 0 {
        return Err(Error::Domain(format!("frequency {m} must be positive")));
    }
    let m = m as f64;
    Ok(match kind {
        KernelKind::LogSin => 1.0 / m,
        KernelKind::Bernoulli => 1.0 / (TAU * m).powi(2),
    })
}
