//! Independent numerical checks of the closed forms.
//!
//! Nothing here calls the series code in [`crate::mp`]: MP expectations come
//! from quadrature against the density, series constants from trapezoid rules
//! on the unit circle with an `r -> 1` extrapolation, and the removed-dimension
//! terms from the arctan integral over the support.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::TestKind;
use crate::error::{Error, Result};
use crate::mp::SeriesConstants;
use crate::sim::{self, ExperimentConfig};

/// Largest grid the node-doubling loops will try.
const MAX_NODES: usize = 1 << 22;
/// Agreement required between successive node doublings.
const DOUBLING_TOL: f64 = 1e-9;
/// Agreement required between extrapolants of different order.
const EXTRAPOLATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadPolicy {
    /// Trapezoid nodes for single integrals and the inner J1 integral.
    pub nodes: usize,
    /// Trapezoid nodes for the outer J1 integral.
    pub outer_nodes: usize,
    /// Radii for the `r -> 1` extrapolation, descending.
    pub r_values: Vec<f64>,
}

impl Default for QuadPolicy {
    fn default() -> Self {
        Self {
            nodes: 1 << 14,
            outer_nodes: 1 << 10,
            r_values: vec![1.02, 1.01, 1.005, 1.0025],
        }
    }
}

impl QuadPolicy {
    pub fn new(nodes: usize, outer_nodes: usize, r_values: Vec<f64>) -> Result<Self> {
        let policy = Self {
            nodes,
            outer_nodes,
            r_values,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 256 || self.outer_nodes < 256 {
            return Err(Error::Config(format!(
                "quadrature needs at least 256 nodes, got {} and {}",
                self.nodes, self.outer_nodes
            )));
        }
        if self.r_values.len() < 2 {
            return Err(Error::Config("need at least two radii".into()));
        }
        if self.r_values.iter().any(|&r| !(r > 1.0) || !r.is_finite())
            || self.r_values.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::Config(format!(
                "radii must exceed 1 and decrease strictly: {:?}",
                self.r_values
            )));
        }
        Ok(())
    }
}

fn check_c(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("oracle ratio", c, "0 < c < 1"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MpKernel {
    /// `log(1 + x)`
    Log1p,
    /// `x`
    Identity,
    /// `x / (1 + x)`
    Ratio,
    /// `1 / (x - z)`
    Resolvent(Complex64),
}

impl MpKernel {
    fn eval(&self, x: f64) -> Complex64 {
        match *self {
            MpKernel::Log1p => x.ln_1p().into(),
            MpKernel::Identity => x.into(),
            MpKernel::Ratio => (x / (1.0 + x)).into(),
            MpKernel::Resolvent(z) => 1.0 / (x - z),
        }
    }
}

/// Periodic trapezoid rule on `[0, 2pi)`, doubling the grid until two
/// successive estimates agree to [`DOUBLING_TOL`].
fn periodic_mean(
    what: &'static str,
    start: usize,
    f: impl Fn(f64) -> Complex64 + Sync,
) -> Result<Complex64> {
    let rule = |n: usize| -> Complex64 {
        let h = 2.0 * PI / n as f64;
        (0..n).map(|j| f(j as f64 * h)).sum::<Complex64>() / n as f64
    };
    let mut n = start;
    let mut last = rule(n);
    while n < MAX_NODES {
        n *= 2;
        let next = rule(n);
        let change = (next - last).norm();
        if change <= DOUBLING_TOL {
            return Ok(next);
        }
        last = next;
    }
    Err(Error::Convergence {
        what,
        iterations: n,
        last: (rule(n) - last).norm(),
    })
}

/// `int f dF^c` for the identity-bulk MP law.
///
/// With `x = 1 + c - 2 sqrt(c) cos(t)` the density becomes `2 sin^2(t) / (pi x)`
/// on `[0, pi]`, and the even extension to `[0, 2pi)` is smooth and periodic.
pub fn mp_expectation(kernel: MpKernel, c: f64, policy: &QuadPolicy) -> Result<Complex64> {
    check_c(c)?;
    if let MpKernel::Resolvent(z) = kernel {
        let (a, b) = ((1.0 - c.sqrt()).powi(2), (1.0 + c.sqrt()).powi(2));
        if z.im.abs() < 1e-12 && z.re >= a && z.re <= b {
            return Err(Error::domain("resolvent point", z.re, "off the MP support"));
        }
    }
    let sc = c.sqrt();
    periodic_mean("MP quadrature", policy.nodes, |t| {
        let x = 1.0 + c - 2.0 * sc * t.cos();
        let s = t.sin();
        kernel.eval(x) * (2.0 * s * s / x)
    })
}

/// Unit-circle constants for one test function, complex before the final
/// realness check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourConstants {
    pub i1: Complex64,
    pub i2: Complex64,
    pub j1: Complex64,
    pub j2: Complex64,
}

impl ContourConstants {
    pub fn max_imaginary(&self) -> f64 {
        [self.i1, self.i2, self.j1, self.j2]
            .iter()
            .map(|v| v.im.abs())
            .fold(0.0, f64::max)
    }

    pub fn real(&self) -> SeriesConstants {
        SeriesConstants {
            i1: self.i1.re,
            i2: self.i2.re,
            j1: self.j1.re,
            j2: self.j2.re,
        }
    }
}

/// `f(|1 + sqrt(c) z|^2)` sampled at `z = e^{i t_j}`, `t_j = 2 pi j / n`.
fn circle_samples(f: fn(f64) -> f64, c: f64, n: usize) -> Vec<f64> {
    let sc = c.sqrt();
    (0..n)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / n as f64;
            f(1.0 + c + 2.0 * sc * t.cos())
        })
        .collect()
}

fn unit(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, t)
}

/// `(1/2 pi i) oint f (z/(z^2 - r^-2) - 1/z) dz` at one radius.
fn i1_at(samples: &[f64], r: f64) -> Complex64 {
    let n = samples.len();
    let r2 = Complex64::from(r.powi(-2));
    samples
        .iter()
        .enumerate()
        .map(|(j, &fv)| {
            let z = unit(2.0 * PI * j as f64 / n as f64);
            fv * (z * z / (z * z - r2) - 1.0)
        })
        .sum::<Complex64>()
        / n as f64
}

/// `(1/2 pi i) oint f / z^3 dz`.
fn i2_of(samples: &[f64]) -> Complex64 {
    let n = samples.len();
    samples
        .iter()
        .enumerate()
        .map(|(j, &fv)| fv * unit(-4.0 * PI * j as f64 / n as f64))
        .sum::<Complex64>()
        / n as f64
}

/// `-(1/4 pi^2) oint oint f(z1) f(z2) / (z1 - r z2)^2 dz1 dz2` at one radius.
///
/// Outer points are evaluated in parallel and combined in index order.
fn j1_at(inner: &[f64], outer: &[f64], r: f64) -> Complex64 {
    let (ni, no) = (inner.len(), outer.len());
    let z1: Vec<Complex64> = (0..ni).map(|j| unit(2.0 * PI * j as f64 / ni as f64)).collect();
    let rows: Vec<Complex64> = (0..no)
        .into_par_iter()
        .map(|k| {
            let z2 = unit(2.0 * PI * k as f64 / no as f64);
            let rz2 = r * z2;
            let inner_sum: Complex64 = z1
                .iter()
                .zip(inner)
                .map(|(&a, &fv)| {
                    let d = a - rz2;
                    fv * a / (d * d)
                })
                .sum();
            outer[k] * z2 * inner_sum / ni as f64
        })
        .collect();
    rows.iter().sum::<Complex64>() / no as f64
}

/// `-(1/4 pi^2) (oint f / z^2 dz)^2`.
fn j2_of(samples: &[f64]) -> Complex64 {
    let n = samples.len();
    let a1 = samples
        .iter()
        .enumerate()
        .map(|(j, &fv)| fv * unit(-2.0 * PI * j as f64 / n as f64))
        .sum::<Complex64>()
        / n as f64;
    a1 * a1
}

/// Neville extrapolation to `h = 0` from samples at `h_i = r_i - 1`.
///
/// Fails when the full-order extrapolant and the one that drops the widest
/// radius disagree by more than [`EXTRAPOLATION_TOL`].
fn extrapolate(what: &'static str, r_values: &[f64], values: &[Complex64]) -> Result<Complex64> {
    let neville = |hs: &[f64], ys: &[Complex64]| -> Complex64 {
        let mut p = ys.to_vec();
        let n = hs.len();
        for k in 1..n {
            for i in 0..n - k {
                p[i] = (hs[i + k] * p[i] - hs[i] * p[i + 1]) / (hs[i + k] - hs[i]);
            }
        }
        p[0]
    };
    let hs: Vec<f64> = r_values.iter().map(|r| r - 1.0).collect();
    let full = neville(&hs, values);
    let reduced = neville(&hs[1..], &values[1..]);
    let gap = (full - reduced).norm();
    if gap > EXTRAPOLATION_TOL {
        return Err(Error::Convergence {
            what,
            iterations: hs.len(),
            last: gap,
        });
    }
    Ok(full)
}

fn contour_series(f: fn(f64) -> f64, c: f64, policy: &QuadPolicy) -> Result<ContourConstants> {
    check_c(c)?;
    policy.validate()?;
    let inner = circle_samples(f, c, policy.nodes);
    let outer = circle_samples(f, c, policy.outer_nodes);
    let i1s: Vec<Complex64> = policy.r_values.iter().map(|&r| i1_at(&inner, r)).collect();
    let j1s: Vec<Complex64> = policy
        .r_values
        .iter()
        .map(|&r| j1_at(&inner, &outer, r))
        .collect();
    Ok(ContourConstants {
        i1: extrapolate("I1 extrapolation", &policy.r_values, &i1s)?,
        i2: i2_of(&inner),
        j1: extrapolate("J1 extrapolation", &policy.r_values, &j1s)?,
        j2: j2_of(&inner),
    })
}

fn f_u(x: f64) -> f64 {
    x.ln_1p()
}

fn f_v(x: f64) -> f64 {
    x / (1.0 + x)
}

/// Contour constants of `log(1 + x)`.
pub fn contour_series_u(c: f64, policy: &QuadPolicy) -> Result<ContourConstants> {
    contour_series(f_u, c, policy)
}

/// Contour constants of `x / (1 + x)`.
pub fn contour_series_v(c: f64, policy: &QuadPolicy) -> Result<ContourConstants> {
    contour_series(f_v, c, policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtraKind {
    U,
    W,
    V,
}

/// Per-spike removed-dimension term, `(1/pi) int_a^b f'(x) arctan(...) dx`.
///
/// The arctan argument `sqrt(4c - (x-1-c)^2) / (-(x+1-c))` has a negative
/// denominator on the whole support, so the principal branch is continuous.
pub fn extra_term_num(kind: ExtraKind, c: f64, policy: &QuadPolicy) -> Result<f64> {
    check_c(c)?;
    let derivative = move |x: f64| match kind {
        ExtraKind::U => 1.0 / (1.0 + x),
        ExtraKind::W => 1.0,
        ExtraKind::V => 1.0 / ((1.0 + x) * (1.0 + x)),
    };
    let sc = c.sqrt();
    let value = periodic_mean("extra-term quadrature", policy.nodes, |t| {
        let x = 1.0 + c - 2.0 * sc * t.cos();
        let s = 2.0 * sc * t.sin();
        let angle = (s / -(x + 1.0 - c)).atan();
        (derivative(x) * angle * s).into()
    })?;
    Ok(value.re)
}

/// Moments of one statistic across replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McMoments {
    pub kind: TestKind,
    pub mean: f64,
    pub variance: f64,
    pub raw_mean: f64,
}

/// Brute-force moments of the standardized U, W, V under `config`, with the
/// replication count and seed overridden.
pub fn mc_moments(config: &ExperimentConfig, reps: usize, seed: u64) -> Result<Vec<McMoments>> {
    if reps < 200 {
        return Err(Error::Config(format!("mc_moments needs at least 200 reps, got {reps}")));
    }
    let config = ExperimentConfig {
        reps,
        seed,
        ..config.clone()
    };
    let report = sim::run_experiment(&config)?;
    Ok([TestKind::U, TestKind::W, TestKind::V]
        .iter()
        .map(|&kind| {
            let s = report.statistic(kind);
            let st = s
                .standardized
                .as_ref()
                .expect("U, W and V are always standardized");
            McMoments {
                kind,
                mean: st.mean,
                variance: st.variance,
                raw_mean: s.raw_mean,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mp_mean_and_second_moment() {
        let policy = QuadPolicy::default();
        for c in [0.05, 0.3, 0.5, 0.9] {
            let m1 = mp_expectation(MpKernel::Identity, c, &policy).unwrap();
            assert!((m1.re - 1.0).abs() < 1e-10 && m1.im == 0.0, "c = {c}");
        }
    }

    #[test]
    fn resolvent_matches_quadratic_root() {
        // The Stieltjes transform of MP at z = -1, c = 0.5 solves
        // c z m^2 + (z + c - 1) m + 1 = 0 with m > 0.
        let (c, z) = (0.5f64, -1.0f64);
        let (a, b) = (c * z, z + c - 1.0);
        let root = (-b - (b * b - 4.0 * a).sqrt()) / (2.0 * a);
        let m = mp_expectation(MpKernel::Resolvent(z.into()), c, &QuadPolicy::default()).unwrap();
        assert!((m.re - root).abs() < 1e-10, "{m} vs {root}");
        let on_support = MpKernel::Resolvent(Complex64::new(1.0, 0.0));
        assert!(mp_expectation(on_support, c, &QuadPolicy::default()).is_err());
    }

    #[test]
    fn contour_results_are_real() {
        let policy = QuadPolicy::default();
        for c in [0.2, 0.7] {
            let u = contour_series_u(c, &policy).unwrap();
            let v = contour_series_v(c, &policy).unwrap();
            assert!(u.max_imaginary() < 1e-9 && v.max_imaginary() < 1e-9);
            assert!(v.j1.re >= 0.0 && u.j1.re >= 0.0);
        }
    }

    #[test]
    fn contour_small_c_vanishes() {
        let u = contour_series_u(0.05, &QuadPolicy::default()).unwrap().real();
        for v in [u.i1, u.i2, u.j1] {
            assert!(v.abs() < 2e-2, "{u:?}");
        }
    }

    #[test]
    fn w_extra_term_is_minus_c() {
        let policy = QuadPolicy::default();
        for c in [0.1, 1.0 / 3.0, 0.8] {
            let w = extra_term_num(ExtraKind::W, c, &policy).unwrap();
            assert!((w + c).abs() < 1e-8, "c = {c}: {w}");
        }
    }

    #[test]
    fn policy_validation() {
        assert!(QuadPolicy::new(128, 1024, vec![1.02, 1.01]).is_err());
        assert!(QuadPolicy::new(1024, 1024, vec![1.01, 1.02]).is_err());
        assert!(QuadPolicy::new(1024, 1024, vec![1.02, 1.0]).is_err());
        assert!(QuadPolicy::new(1024, 1024, vec![1.02, 1.01]).is_ok());
    }
}
