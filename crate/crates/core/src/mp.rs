//! Marchenko–Pastur scalar functions for an identity bulk spectrum.
//!
//! Everything here is a closed form (or a rapidly convergent series) in the
//! aspect ratio `c = p/n`:
//!
//! ```text
//! rho(c)    = (c + sqrt(c^2 + 4)) / 2
//! ctilde(c) = 4c / (2 + c + sqrt(c^2 + 4))^2
//! m(z)      = (-(z + 1 - c) + sqrt((z - 1 - c)^2 - 4c)) / (2z)   (companion Stieltjes transform)
//! phi(a)    = a + c a / (a - 1)                                   (spike location)
//! ```
//!
//! The two factorisations used throughout are
//! `2 + c + 2 sqrt(c) cos t = (1 + rho)(1 + ctilde + 2 sqrt(ctilde) cos t)`, i.e.
//! `(2 + c)/(1 + rho) = 1 + ctilde` and `sqrt(c)/(1 + rho) = sqrt(ctilde)`.
//!
//! Series constants are the mean and covariance functionals of the linear
//! spectral statistic CLT for `f_U(x) = log(1 + x)` and `f_V(x) = x/(1 + x)`.
//! Writing `f(|1 + sqrt(c) z|^2) = a_0 + sum_k a_k (z^k + z^-k)` on the unit
//! circle, they are
//!
//! ```text
//! I1 = sum_{j>=1} a_{2j}      I2 = a_2      J1 = sum_{k>=1} k a_k^2      J2 = a_1^2
//! ```
//!
//! and the bulk variance is `(alpha_x + 1) J1 + beta_x J2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension `p`, sample size `n` and total spike multiplicity `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectRatio {
    p: usize,
    n: usize,
    m: usize,
}

impl AspectRatio {
    pub fn new(p: usize, n: usize, m: usize) -> Result<Self> {
        if p < 1 || n < 1 {
            return Err(Error::Shape(format!("p = {p}, n = {n} must be positive")));
        }
        if p >= n {
            return Err(Error::Shape(format!(
                "p = {p} must be smaller than n = {n} (c_n < 1)"
            )));
        }
        if m >= p {
            return Err(Error::Shape(format!(
                "spike multiplicity M = {m} must be smaller than p = {p}"
            )));
        }
        Ok(Self { p, n, m })
    }

    /// The null configuration (no spikes).
    pub fn null(p: usize, n: usize) -> Result<Self> {
        Self::new(p, n, 0)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `c_n = p / n`.
    pub fn c_n(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    /// `c_nM = (p - M) / n`, the ratio seen by the non-spiked bulk.
    pub fn c_nm(&self) -> f64 {
        (self.p - self.m) as f64 / self.n as f64
    }

    /// Same `p`, `n` with a different spike count.
    pub fn with_spikes(&self, m: usize) -> Result<Self> {
        Self::new(self.p, self.n, m)
    }
}

/// Truncation rule for the series constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPolicy {
    /// Stop once a term falls below this in absolute value.
    pub tol: f64,
    /// Hard bound on the number of terms.
    pub k_max: usize,
}

impl Default for SeriesPolicy {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            k_max: 500,
        }
    }
}

impl SeriesPolicy {
    pub fn new(tol: f64, k_max: usize) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::domain("series tolerance", tol, "tol > 0"));
        }
        if k_max < 1 {
            return Err(Error::domain("series k_max", k_max as f64, "k_max >= 1"));
        }
        Ok(Self { tol, k_max })
    }
}

/// Mean (`i1`, `i2`) and variance (`j1`, `j2`) functionals of one test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesConstants {
    pub i1: f64,
    pub i2: f64,
    pub j1: f64,
    pub j2: f64,
}

impl SeriesConstants {
    /// `alpha_x I1 + beta_x I2`.
    pub fn mean(&self, alpha_x: f64, beta_x: f64) -> f64 {
        alpha_x * self.i1 + beta_x * self.i2
    }

    /// `(alpha_x + 1) J1 + beta_x J2`.
    pub fn variance(&self, alpha_x: f64, beta_x: f64) -> f64 {
        (alpha_x + 1.0) * self.j1 + beta_x * self.j2
    }
}

fn check_ratio(what: &'static str, c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(what, c, "0 < c < 1"))
    }
}

fn check_nonneg(what: &'static str, c: f64) -> Result<()> {
    if c.is_finite() && c >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(what, c, "c >= 0"))
    }
}

/// Lower MP edge `(1 - sqrt(c))^2`.
pub fn lower_edge(c: f64) -> f64 {
    let s = 1.0 - c.sqrt();
    s * s
}

/// Upper MP edge `(1 + sqrt(c))^2`.
pub fn upper_edge(c: f64) -> f64 {
    let s = 1.0 + c.sqrt();
    s * s
}

/// Positive root of `x^2 - c x - 1 = 0`.
pub fn rho(c: f64) -> Result<f64> {
    check_nonneg("rho", c)?;
    Ok((c + (c * c + 4.0).sqrt()) / 2.0)
}

pub fn ctilde(c: f64) -> Result<f64> {
    check_nonneg("ctilde", c)?;
    let d = 2.0 + c + (c * c + 4.0).sqrt();
    Ok(4.0 * c / (d * d))
}

/// `int log(1 + x) dF^c(x)` in closed form.
pub fn ct_value(c: f64) -> Result<f64> {
    check_ratio("ct_value", c)?;
    let r = rho(c)?;
    let ct = ctilde(c)?;
    let sc = c.sqrt();
    let x = (ct * c).sqrt();
    let spread = sc - 1.0 / sc;
    // log(1 - x) + x without cancellation for small x
    let log_term = (-x).ln_1p() + x;
    let numer = -spread * spread * log_term - ct.sqrt() * (sc - c * sc);
    Ok(r.ln_1p() + numer / (1.0 - c))
}

/// `int x/(1 + x) dF^c(x) = 1/(1 + rho(c))`, per bulk dimension.
pub fn v_center(c: f64) -> Result<f64> {
    check_ratio("v_center", c)?;
    Ok(1.0 / (1.0 + rho(c)?))
}

/// Almost-sure limit of the sample eigenvalue generated by a population spike `alpha`.
///
/// Only supercritical spikes are accepted.
pub fn phi(alpha: f64, c: f64) -> Result<f64> {
    check_nonneg("phi", c)?;
    if c >= 1.0 {
        return Err(Error::domain("phi", c, "0 <= c < 1"));
    }
    let threshold = 1.0 + c.sqrt();
    if !(alpha > threshold) || !alpha.is_finite() {
        return Err(Error::Subcritical {
            alpha,
            c,
            threshold,
        });
    }
    Ok(alpha + c * alpha / (alpha - 1.0))
}

/// Inverse of [`phi`]: the larger root of `a^2 - (lambda + 1 - c) a + lambda = 0`.
pub fn phi_inverse(lambda: f64, c: f64) -> Result<f64> {
    check_nonneg("phi_inverse", c)?;
    if c >= 1.0 {
        return Err(Error::domain("phi_inverse", c, "0 <= c < 1"));
    }
    let edge = upper_edge(c);
    if !(lambda > edge) || !lambda.is_finite() {
        return Err(Error::domain(
            "phi_inverse",
            lambda,
            format!("lambda > (1 + sqrt(c))^2 = {edge}"),
        ));
    }
    let b = lambda + 1.0 - c;
    let disc = (b * b - 4.0 * lambda).max(0.0);
    Ok((b + disc.sqrt()) / 2.0)
}

/// Companion Stieltjes transform of the MP law, `m(z) = -(1-c)/z + c int dF^c(x)/(x - z)`.
///
/// The square root is taken as `sqrt(z - a) * sqrt(z - b)` with principal
/// branches, which is analytic off `[a, b]` and behaves like `z - 1 - c` at
/// infinity, so `m(z) ~ -1/z`.
pub fn mp_stieltjes(z: Complex64, c: f64) -> Result<Complex64> {
    check_ratio("mp_stieltjes", c)?;
    let (a, b) = (lower_edge(c), upper_edge(c));
    let scale = 1e-12 * b;
    if z.norm() <= scale {
        return Err(Error::domain("mp_stieltjes", z.norm(), "z != 0 (pole of the companion measure)"));
    }
    if z.im.abs() <= scale && z.re >= a - scale && z.re <= b + scale {
        return Err(Error::domain(
            "mp_stieltjes",
            z.re,
            format!("z off the support [{a}, {b}]"),
        ));
    }
    let root = (z - a).sqrt() * (z - b).sqrt();
    Ok((-(z + 1.0 - c) + root) / (2.0 * z))
}

/// Derivative of [`mp_stieltjes`], from implicit differentiation of
/// `z m^2 + (z + 1 - c) m + 1 = 0`.
pub fn mp_stieltjes_derivative(z: Complex64, c: f64) -> Result<Complex64> {
    let m = mp_stieltjes(z, c)?;
    Ok(-(m * m + m) / (2.0 * z * m + z + 1.0 - c))
}

/// `(theta, nu) = (phi^2 m'(phi), phi^2 m(phi)^2)` at `phi = phi(alpha, c)`.
pub fn theta_nu(alpha: f64, c: f64) -> Result<(f64, f64)> {
    let location = phi(alpha, c)?;
    if c == 0.0 {
        // degenerate bulk: m(z) = -1/z exactly
        return Ok((1.0, 1.0));
    }
    let z = Complex64::new(location, 0.0);
    let m = mp_stieltjes(z, c)?.re;
    let dm = mp_stieltjes_derivative(z, c)?.re;
    let sq = location * location;
    Ok((sq * dm, sq * m * m))
}

/// Sums `sum_{k >= start} t_k` where `t_{k+1} = t_k * ratio(k)`.
fn sum_series(
    what: &'static str,
    first: f64,
    start: usize,
    ratio: impl Fn(f64) -> f64,
    policy: &SeriesPolicy,
) -> Result<f64> {
    let mut term = first;
    let mut total = 0.0;
    let mut k = start;
    for _ in 0..policy.k_max {
        total += term;
        if term.abs() < policy.tol {
            return Ok(total);
        }
        term *= ratio(k as f64);
        k += 1;
    }
    Err(Error::Convergence {
        what,
        iterations: policy.k_max,
        last: term.abs(),
    })
}

/// Series constants for `f_U(x) = log(1 + x)` at ratio `c`.
pub fn series_constants_u(c: f64, policy: &SeriesPolicy) -> Result<SeriesConstants> {
    check_ratio("series_constants_u", c)?;
    let a2 = c / ((2.0 + c) * (2.0 + c));
    let a = a2.sqrt();
    let ct = ctilde(c)?;

    // a_{2j} = -ctilde^j / (2j)
    let i1 = -sum_series("I1(f_U)", ct / 2.0, 1, |j| ct * j / (j + 1.0), policy)?;
    // a_2 = -sum_k a^{2k} (2k-1)! / ((k-1)! (k+1)!)
    let i2 = -sum_series(
        "I2(f_U)",
        a2 / 2.0,
        1,
        |k| a2 * (2.0 * k + 1.0) * (2.0 * k) / (k * (k + 2.0)),
        policy,
    )?;
    // a_1 = sum_k a^{2k-1} (2k-2)! / (k! (k-1)!)
    let first = sum_series(
        "a_1(f_U)",
        a,
        1,
        |k| a2 * (2.0 * k) * (2.0 * k - 1.0) / ((k + 1.0) * k),
        policy,
    )?;
    // |a_k| = ctilde^{k/2} / k, so k a_k^2 = ctilde^k / k
    let j1 = sum_series("J1(f_U)", ct, 1, |k| ct * k / (k + 1.0), policy)?;

    Ok(SeriesConstants {
        i1,
        i2,
        j1,
        j2: first * first,
    })
}

/// Series constants for `f_V(x) = x / (1 + x)` at ratio `c`.
pub fn series_constants_v(c: f64, policy: &SeriesPolicy) -> Result<SeriesConstants> {
    check_ratio("series_constants_v", c)?;
    let a2 = c / ((2.0 + c) * (2.0 + c));
    let a = a2.sqrt();
    let ct = ctilde(c)?;
    let sct = ct.sqrt();
    let r = rho(c)?;
    let scale = 1.0 / (2.0 + c);

    // constant coefficient of 1/(1 + x): sum_k a^{2k} (2k)! / (k!)^2
    let central = sum_series(
        "I1(f_V)",
        1.0,
        0,
        |k| a2 * 2.0 * (2.0 * k + 1.0) / (k + 1.0),
        policy,
    )?;
    let correction = ct / (-(1.0 - ct).powi(2))
        + 1.0 / (2.0 * (sct - 1.0).powi(2))
        + 1.0 / (2.0 * (sct + 1.0).powi(2));
    let i1 = scale * central - correction / (1.0 + r);

    // The k = 0 term carries 1/(-1)! = 0, so the sum starts at k = 1.
    let i2 = -scale
        * sum_series(
            "I2(f_V)",
            a2,
            1,
            |k| a2 * (2.0 * k + 2.0) * (2.0 * k + 1.0) / (k * (k + 2.0)),
            policy,
        )?;

    let first = scale
        * sum_series(
            "a_1(f_V)",
            a,
            0,
            |k| a2 * (2.0 * k + 3.0) * (2.0 * k + 2.0) / ((k + 1.0) * (k + 2.0)),
            policy,
        )?;

    // |a_k| = ctilde^{k/2} / ((1 + rho)(1 - ctilde)), so k a_k^2 = k ctilde^k / D^2
    let denom = (1.0 + r) * (1.0 - ct);
    let j1 = sum_series("J1(f_V)", ct, 1, |k| ct * (k + 1.0) / k, policy)? / (denom * denom);

    Ok(SeriesConstants {
        i1,
        i2,
        j1,
        j2: first * first,
    })
}

/// Mean contributions from removing `M` dimensions from the bulk, for `f_U`, `f_W`, `f_V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtraTerms {
    pub u: f64,
    pub w: f64,
    pub v: f64,
}

pub fn extra_terms(c: f64, m: usize) -> Result<ExtraTerms> {
    check_ratio("extra_terms", c)?;
    let m = m as f64;
    let r = rho(c)?;
    let ct = ctilde(c)?;
    Ok(ExtraTerms {
        u: m * (-(ct * c).sqrt()).ln_1p(),
        w: -m * c,
        v: -m * (c - 2.0) / (2.0 * (1.0 + r) * (1.0 - ct)) - m / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> impl Iterator<Item = f64> {
        (1..100).map(|i| i as f64 / 100.0)
    }

    #[test]
    fn rho_solves_its_quadratic() {
        assert_eq!(rho(0.0).unwrap(), 1.0);
        for c in grid() {
            let r = rho(c).unwrap();
            assert!((r * r - c * r - 1.0).abs() < 1e-14, "c = {c}");
            assert!(r > 1.0);
        }
        assert_abs_diff_eq!(rho(0.75).unwrap(), 1.443_000_468_164_691_4, epsilon = 1e-14);
        assert!(rho(-0.1).is_err());
    }

    #[test]
    fn ctilde_substitution_identities() {
        assert_eq!(ctilde(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(ctilde(1.0).unwrap(), 0.145_898_033_750_315_46, epsilon = 1e-15);
        for c in grid() {
            let r = rho(c).unwrap();
            let ct = ctilde(c).unwrap();
            assert!((ct.sqrt() - c.sqrt() / (1.0 + r)).abs() < 1e-14);
            assert!(((2.0 + c) / (1.0 + r) - (1.0 + ct)).abs() < 1e-14);
            assert!(ct >= 0.0 && ct < c);
        }
        assert!(ctilde(-1e-3).is_err());
    }

    #[test]
    fn ct_value_limits() {
        assert_abs_diff_eq!(ct_value(1e-6).unwrap(), std::f64::consts::LN_2, epsilon = 1e-5);
        assert!(ct_value(0.0).is_err());
        assert!(ct_value(1.0).is_err());
    }

    #[test]
    fn v_center_decreases() {
        assert_abs_diff_eq!(v_center(1e-9).unwrap(), 0.5, epsilon = 1e-9);
        let values: Vec<f64> = grid().map(|c| v_center(c).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(3.0, 0.0).unwrap(), 3.0);
        assert_abs_diff_eq!(phi(2.0, 0.5).unwrap(), 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(phi(601.0, 1.0 / 3.0).unwrap(), 601.333_888_888_888_9, epsilon = 1e-10);
        assert!(matches!(phi(1.5, 0.5), Err(Error::Subcritical { .. })));
        assert!(phi(1.0 + 0.5f64.sqrt(), 0.5).is_err());
    }

    #[test]
    fn phi_inverse_roundtrip() {
        for &c in &[0.1, 0.5] {
            for &alpha in &[2.0, 5.0, 100.0] {
                let back = phi_inverse(phi(alpha, c).unwrap(), c).unwrap();
                assert_abs_diff_eq!(back, alpha, epsilon = 1e-10);
            }
        }
        assert_abs_diff_eq!(phi_inverse(3.0, 0.5).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phi_inverse(7.0, 1e-12).unwrap(), 7.0, epsilon = 1e-9);
        assert!(phi_inverse(upper_edge(0.5), 0.5).is_err());
    }

    #[test]
    fn stieltjes_quadratic_and_asymptote() {
        let c = 0.5;
        let zs = [
            Complex64::new(5.0, 0.0),
            Complex64::new(0.01, 0.0),
            Complex64::new(1.0, 1e-3),
            Complex64::new(1.0, -2.0),
            Complex64::new(-3.0, 0.5),
            Complex64::new(0.0, 1.0),
        ];
        for z in zs {
            let m = mp_stieltjes(z, c).unwrap();
            let residual = z * m * m + (z + 1.0 - c) * m + 1.0;
            assert!(residual.norm() < 1e-12, "z = {z}, residual = {residual}");
        }
        let m = mp_stieltjes(Complex64::new(5.0, 0.0), c).unwrap();
        assert!(m.im.abs() < 1e-15 && m.re < 0.0);
        for scale in [1e2, 1e4, 1e6] {
            let z = Complex64::new(scale, scale / 3.0);
            let m = mp_stieltjes(z, c).unwrap();
            assert!((z * m + 1.0).norm() < 10.0 / scale);
        }
        assert!(mp_stieltjes(Complex64::new(1.0, 0.0), c).is_err());
    }

    #[test]
    fn theta_matches_richardson_finite_difference() {
        let (alpha, c) = (20.0, 1.0 / 3.0);
        let x = phi(alpha, c).unwrap();
        let m = |t: f64| mp_stieltjes(Complex64::new(t, 0.0), c).unwrap().re;
        let d = |h: f64| (m(x + h) - m(x - h)) / (2.0 * h);
        let h = 0.05;
        let derivative = (4.0 * d(h / 2.0) - d(h)) / 3.0;
        let (theta, nu) = theta_nu(alpha, c).unwrap();
        assert_abs_diff_eq!(theta, x * x * derivative, epsilon = 1e-8);
        assert_abs_diff_eq!(nu, x * x * m(x) * m(x), epsilon = 1e-14);
    }

    #[test]
    fn theta_nu_tend_to_one() {
        for &c in &[0.1, 0.5, 0.9] {
            let (theta, nu) = theta_nu(1e6, c).unwrap();
            assert!((theta - 1.0).abs() < 1e-4 && (nu - 1.0).abs() < 1e-4);
            for &alpha in &[2.0, 5.0, 50.0] {
                let (theta, nu) = theta_nu(alpha, c).unwrap();
                assert!(theta > 0.0 && nu > 0.0);
            }
        }
    }

    #[test]
    fn series_vanish_as_c_shrinks() {
        let policy = SeriesPolicy::default();
        let u = series_constants_u(1e-8, &policy).unwrap();
        let v = series_constants_v(1e-8, &policy).unwrap();
        for x in [u.i1, u.i2, u.j1, u.j2, v.i1, v.i2, v.j1, v.j2] {
            assert!(x.abs() < 1e-7);
        }
    }

    #[test]
    fn series_stable_under_tolerance_halving() {
        for c in grid() {
            for tol in [1e-8, 1e-12] {
                let coarse = SeriesPolicy::new(tol, 500).unwrap();
                let fine = SeriesPolicy::new(tol / 2.0, 500).unwrap();
                let pairs = [
                    (series_constants_u(c, &coarse).unwrap(), series_constants_u(c, &fine).unwrap()),
                    (series_constants_v(c, &coarse).unwrap(), series_constants_v(c, &fine).unwrap()),
                ];
                for (s, t) in pairs {
                    assert!((s.i1 - t.i1).abs() <= tol);
                    assert!((s.i2 - t.i2).abs() <= tol);
                    assert!((s.j1 - t.j1).abs() <= tol);
                    assert!((s.j2 - t.j2).abs() <= tol);
                }
            }
        }
    }

    #[test]
    fn series_first_coefficient_closed_forms() {
        // a_1(f_U) = sqrt(ctilde) and a_2(f_U) = -ctilde/2
        let policy = SeriesPolicy::default();
        for c in grid() {
            let ct = ctilde(c).unwrap();
            let u = series_constants_u(c, &policy).unwrap();
            assert_abs_diff_eq!(u.j2, ct, epsilon = 1e-13);
            assert_abs_diff_eq!(u.i2, -ct / 2.0, epsilon = 1e-13);
            assert!(u.j1 >= u.j2);
        }
    }

    #[test]
    fn series_reports_non_convergence() {
        let policy = SeriesPolicy::new(1e-300, 3).unwrap();
        assert!(matches!(
            series_constants_u(0.5, &policy),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn extra_terms_examples() {
        let zero = extra_terms(0.4, 0).unwrap();
        assert_eq!((zero.u, zero.w, zero.v), (0.0, 0.0, 0.0));
        assert_abs_diff_eq!(extra_terms(1.0 / 3.0, 2).unwrap().w, -2.0 / 3.0, epsilon = 1e-15);
    }
}
