//! Centering and scaling of U, W, V and R, decisions, and asymptotic power.
//!
//! Under H0 (identity covariance) each of U, W, V is standardized as
//! `(raw - center - mu) / sigma` with constants at `c_n`; under a spiked
//! alternative the bulk constants move to `c_nM = (p - M)/n` and each spike
//! group adds its own mean and variance contribution. R is referred to the
//! Tracy–Widom law through `(lambda_1 - mu_r) / sigma_r`.
//!
//! All tests reject for large values, with a strict inequality at the
//! critical value.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::mp::{self, AspectRatio, SeriesConstants, SeriesPolicy};
use crate::spectra::{self, MomentProfile, RawStatistics, SpikeGroup, SpikeSpec};
use crate::tw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestKind {
    U,
    W,
    V,
    R,
}

impl TestKind {
    pub const ALL: [TestKind; 4] = [TestKind::U, TestKind::W, TestKind::V, TestKind::R];

    pub fn name(&self) -> &'static str {
        match self {
            TestKind::U => "U",
            TestKind::W => "W",
            TestKind::V => "V",
            TestKind::R => "R",
        }
    }

    pub fn raw(&self, stats: &RawStatistics) -> f64 {
        match self {
            TestKind::U => stats.u,
            TestKind::W => stats.w,
            TestKind::V => stats.v,
            TestKind::R => stats.r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestCalibration {
    pub kind: TestKind,
    pub hypothesis: Hypothesis,
    pub center: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl TestCalibration {
    pub fn standardize(&self, raw: f64) -> f64 {
        (raw - self.center - self.mu) / self.sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub kind: TestKind,
    pub raw: f64,
    pub z: f64,
    pub p_value: f64,
    pub critical: f64,
    pub reject: bool,
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPrediction {
    pub kind: TestKind,
    pub power: f64,
    pub kappa: f64,
}

impl PowerPrediction {
    fn from_kappa(kind: TestKind, kappa: f64) -> Self {
        Self {
            kind,
            power: std_normal().cdf(kappa),
            kappa,
        }
    }
}

pub(crate) fn std_normal() -> Normal {
    Normal::standard()
}

/// `z_xi`, the `1 - xi` quantile of the standard normal law.
pub fn normal_upper_quantile(xi: f64) -> Result<f64> {
    check_level(xi)?;
    Ok(-std_normal().inverse_cdf(xi))
}

fn check_level(xi: f64) -> Result<()> {
    if xi > 0.0 && xi < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("significance level", xi, "0 < xi < 1"))
    }
}

/// Per-group quantities shared by every spiked correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeTerm {
    pub alpha: f64,
    pub multiplicity: usize,
    /// Limit of the spiked sample eigenvalue.
    pub phi: f64,
    pub u_sum: f64,
    pub s_squared: f64,
}

/// Validates a spike specification against the dimensions and evaluates
/// `phi` and `s_k^2` for every group at `c_nM`.
pub fn spike_terms(
    ratios: &AspectRatio,
    spikes: &SpikeSpec,
    moments: &MomentProfile,
) -> Result<Vec<SpikeTerm>> {
    if spikes.total_multiplicity() != ratios.m() {
        return Err(Error::Config(format!(
            "spike multiplicities sum to {} but M = {}",
            spikes.total_multiplicity(),
            ratios.m()
        )));
    }
    if let Some(dim) = spikes.basis_dimension() {
        if dim != ratios.p() {
            return Err(Error::Config(format!(
                "spike basis has {dim} rows but p = {}",
                ratios.p()
            )));
        }
    }
    let c = ratios.c_nm();
    spikes.check_supercritical(c)?;
    spikes
        .groups()
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let u_sum = spectra::u_group_sum(spikes, k)?;
            Ok(SpikeTerm {
                alpha: g.alpha,
                multiplicity: g.multiplicity,
                phi: mp::phi(g.alpha, c)?,
                u_sum,
                s_squared: spectra::s_k_squared(g.alpha, g.multiplicity, u_sum, moments, c)?,
            })
        })
        .collect()
}

/// Everything the U/W/V calibrations need at one ratio.
struct Bulk {
    dims: f64,
    c: f64,
    m: usize,
    terms: Vec<SpikeTerm>,
    hypothesis: Hypothesis,
}

impl Bulk {
    fn new(ratios: &AspectRatio, spikes: Option<&SpikeSpec>, moments: &MomentProfile) -> Result<Self> {
        match spikes {
            None => Ok(Self {
                dims: ratios.p() as f64,
                c: ratios.c_n(),
                m: 0,
                terms: Vec::new(),
                hypothesis: Hypothesis::H0,
            }),
            Some(spec) => Ok(Self {
                dims: (ratios.p() - ratios.m()) as f64,
                c: ratios.c_nm(),
                m: ratios.m(),
                terms: spike_terms(ratios, spec, moments)?,
                hypothesis: Hypothesis::H1,
            }),
        }
    }

    fn spike_variance(&self, n: usize, weight: impl Fn(f64) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.phi * t.phi * weight(t.phi) * t.s_squared / n as f64)
            .sum()
    }
}

fn series_u(c: f64) -> Result<SeriesConstants> {
    mp::series_constants_u(c, &SeriesPolicy::default())
}

fn series_v(c: f64) -> Result<SeriesConstants> {
    mp::series_constants_v(c, &SeriesPolicy::default())
}

/// Wilks' statistic `U = sum log(1 + lambda_i)`.
///
/// `spikes = None` gives the H0 calibration at `c_n`; otherwise the H1
/// calibration at `c_nM` for the given alternative.
pub fn calib_u(
    ratios: &AspectRatio,
    spikes: Option<&SpikeSpec>,
    moments: &MomentProfile,
) -> Result<TestCalibration> {
    let bulk = Bulk::new(ratios, spikes, moments)?;
    let series = series_u(bulk.c)?;
    let extra = mp::extra_terms(bulk.c, bulk.m)?;
    let spiked_mean: f64 = bulk
        .terms
        .iter()
        .map(|t| t.multiplicity as f64 * t.phi.ln_1p())
        .sum();
    let variance = bulk.spike_variance(ratios.n(), |phi| 1.0 / ((1.0 + phi) * (1.0 + phi)))
        + series.variance(moments.alpha_x, moments.beta_x);
    finish(
        TestKind::U,
        bulk.hypothesis,
        bulk.dims * mp::ct_value(bulk.c)?,
        series.mean(moments.alpha_x, moments.beta_x) + spiked_mean + extra.u,
        variance,
    )
}

/// Lawley–Hotelling trace `W = sum lambda_i`.
pub fn calib_w(
    ratios: &AspectRatio,
    spikes: Option<&SpikeSpec>,
    moments: &MomentProfile,
) -> Result<TestCalibration> {
    let bulk = Bulk::new(ratios, spikes, moments)?;
    let extra = mp::extra_terms(bulk.c, bulk.m)?;
    let spiked_mean: f64 = bulk
        .terms
        .iter()
        .map(|t| t.multiplicity as f64 * t.phi)
        .sum();
    let variance = bulk.spike_variance(ratios.n(), |_| 1.0)
        + (moments.alpha_x + moments.beta_x + 1.0) * bulk.c;
    finish(
        TestKind::W,
        bulk.hypothesis,
        bulk.dims,
        spiked_mean + extra.w,
        variance,
    )
}

/// Bartlett–Nanda–Pillai trace `V = sum lambda_i / (1 + lambda_i)`.
pub fn calib_v(
    ratios: &AspectRatio,
    spikes: Option<&SpikeSpec>,
    moments: &MomentProfile,
) -> Result<TestCalibration> {
    let bulk = Bulk::new(ratios, spikes, moments)?;
    let series = series_v(bulk.c)?;
    let extra = mp::extra_terms(bulk.c, bulk.m)?;
    let spiked_mean: f64 = bulk
        .terms
        .iter()
        .map(|t| t.multiplicity as f64 * t.phi / (1.0 + t.phi))
        .sum();
    let variance = bulk.spike_variance(ratios.n(), |phi| (1.0 + phi).powi(-4))
        + series.variance(moments.alpha_x, moments.beta_x);
    finish(
        TestKind::V,
        bulk.hypothesis,
        bulk.dims * mp::v_center(bulk.c)?,
        series.mean(moments.alpha_x, moments.beta_x) + spiked_mean + extra.v,
        variance,
    )
}

fn finish(
    kind: TestKind,
    hypothesis: Hypothesis,
    center: f64,
    mu: f64,
    variance: f64,
) -> Result<TestCalibration> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::domain(
            "calibration variance",
            variance,
            "positive (check beta_x)",
        ));
    }
    Ok(TestCalibration {
        kind,
        hypothesis,
        center,
        mu,
        sigma: variance.sqrt(),
    })
}

/// Centering `(1 + sqrt(c_n))^2` and scale `n^{-2/3} (1 + sqrt(c_n)) (1 + 1/sqrt(c_n))^{1/3}`
/// of the largest eigenvalue under H0.
pub fn rlrt_calibration(ratios: &AspectRatio) -> (f64, f64) {
    let sc = ratios.c_n().sqrt();
    let mu = (1.0 + sc) * (1.0 + sc);
    let sigma = (ratios.n() as f64).powf(-2.0 / 3.0) * (1.0 + sc) * (1.0 + 1.0 / sc).cbrt();
    (mu, sigma)
}

/// H0 calibration of Roy's largest root, in the same shape as the others.
pub fn calib_r(ratios: &AspectRatio) -> TestCalibration {
    let (mu_r, sigma_r) = rlrt_calibration(ratios);
    TestCalibration {
        kind: TestKind::R,
        hypothesis: Hypothesis::H0,
        center: mu_r,
        mu: 0.0,
        sigma: sigma_r,
    }
}

/// H0 calibration of any of the four tests.
pub fn null_calibration(
    kind: TestKind,
    ratios: &AspectRatio,
    moments: &MomentProfile,
) -> Result<TestCalibration> {
    match kind {
        TestKind::U => calib_u(ratios, None, moments),
        TestKind::W => calib_w(ratios, None, moments),
        TestKind::V => calib_v(ratios, None, moments),
        TestKind::R => Ok(calib_r(ratios)),
    }
}

/// Critical value of the standardized statistic at level `xi`.
pub fn critical_value(kind: TestKind, xi: f64) -> Result<f64> {
    match kind {
        TestKind::R => tw::tw_quantile(xi),
        _ => normal_upper_quantile(xi),
    }
}

/// Upper-tail p-value of a standardized statistic.
pub fn upper_p_value(kind: TestKind, z: f64) -> f64 {
    match kind {
        TestKind::R => (1.0 - tw::tw_cdf(z)).clamp(0.0, 1.0),
        _ => std_normal().cdf(-z),
    }
}

/// Standardizes `raw` under H0 and applies the one-sided rule `z > critical`.
pub fn test_statistic(raw: f64, calib: &TestCalibration, level: f64) -> Result<TestReport> {
    if calib.hypothesis != Hypothesis::H0 {
        return Err(Error::Config(
            "decisions need the H0 calibration of the statistic".into(),
        ));
    }
    let critical = critical_value(calib.kind, level)?;
    let z = calib.standardize(raw);
    Ok(TestReport {
        kind: calib.kind,
        raw,
        z,
        p_value: upper_p_value(calib.kind, z),
        critical,
        reject: z > critical,
        level,
    })
}

fn spiked_parts(
    ratios: &AspectRatio,
    spikes: &SpikeSpec,
    moments: &MomentProfile,
    xi: f64,
) -> Result<(Vec<SpikeTerm>, f64)> {
    check_level(xi)?;
    let terms = spike_terms(ratios, spikes, moments)?;
    Ok((terms, normal_upper_quantile(xi)?))
}

/// Asymptotic power of the corrected Wilks test.
pub fn power_u(
    ratios: &AspectRatio,
    spikes: &SpikeSpec,
    moments: &MomentProfile,
    xi: f64,
) -> Result<PowerPrediction> {
    let (terms, z) = spiked_parts(ratios, spikes, moments, xi)?;
    let null = calib_u(ratios, None, moments)?;
    let alt = calib_u(ratios, Some(spikes), moments)?;
    let c = ratios.c_nm();
    let m = ratios.m() as f64;
    let a1: f64 = terms
        .iter()
        .map(|t| t.multiplicity as f64 * t.phi.ln_1p())
        .sum::<f64>()
        + m * (-(mp::ctilde(c)? * c).sqrt()).ln_1p();
    let shift = alt.center - null.center + a1;
    Ok(PowerPrediction::from_kappa(
        TestKind::U,
        (shift - z * null.sigma) / alt.sigma,
    ))
}

/// Asymptotic power of the corrected Lawley–Hotelling test.
pub fn power_w(
    ratios: &AspectRatio,
    spikes: &SpikeSpec,
    moments: &MomentProfile,
    xi: f64,
) -> Result<PowerPrediction> {
    let (terms, z) = spiked_parts(ratios, spikes, moments, xi)?;
    let alt = calib_w(ratios, Some(spikes), moments)?;
    let m = ratios.m() as f64;
    let shift = terms
        .iter()
        .map(|t| t.multiplicity as f64 * t.phi)
        .sum::<f64>()
        - m * ratios.c_nm()
        - m;
    let null_sd = ((moments.alpha_x + moments.beta_x + 1.0) * ratios.c_n()).sqrt();
    Ok(PowerPrediction::from_kappa(
        TestKind::W,
        shift / alt.sigma - z * null_sd / alt.sigma,
    ))
}

fn v_shift(terms: &[SpikeTerm], ratios: &AspectRatio, extra_ratio: f64) -> Result<f64> {
    let p = ratios.p() as f64;
    let m = ratios.m() as f64;
    let spiked: f64 = terms
        .iter()
        .map(|t| t.multiplicity as f64 * t.phi / (1.0 + t.phi))
        .sum();
    let ce = extra_ratio;
    let extra = (ce - 2.0) * m / (2.0 * (1.0 + mp::rho(ce)?) * (1.0 - mp::ctilde(ce)?));
    Ok(spiked + (p - m) * mp::v_center(ratios.c_nm())? - p * mp::v_center(ratios.c_n())?
        - m / 2.0
        - extra)
}

/// Asymptotic power of the corrected Bartlett–Nanda–Pillai test.
pub fn power_v(
    ratios: &AspectRatio,
    spikes: &SpikeSpec,
    moments: &MomentProfile,
    xi: f64,
) -> Result<PowerPrediction> {
    let (terms, z) = spiked_parts(ratios, spikes, moments, xi)?;
    let null = calib_v(ratios, None, moments)?;
    let alt = calib_v(ratios, Some(spikes), moments)?;
    let shift = v_shift(&terms, ratios, ratios.c_nm())?;
    Ok(PowerPrediction::from_kappa(
        TestKind::V,
        shift / alt.sigma - z * null.sigma / alt.sigma,
    ))
}

/// Asymptotic power of Roy's largest root test against a simple leading spike.
///
/// `s1_squared` is the variance factor of the leading sample eigenvalue
/// (see [`spectra::s_k_squared`]).
pub fn power_r(
    ratios: &AspectRatio,
    spike: SpikeGroup,
    s1_squared: f64,
    xi: f64,
) -> Result<PowerPrediction> {
    check_level(xi)?;
    if spike.multiplicity != 1 {
        return Err(Error::Spike(format!(
            "Roy's test power needs a simple leading spike, got multiplicity {}",
            spike.multiplicity
        )));
    }
    if !(s1_squared > 0.0) {
        return Err(Error::domain("s_1^2", s1_squared, "> 0"));
    }
    let location = mp::phi(spike.alpha, ratios.c_nm())?;
    let (mu_r, sigma_r) = rlrt_calibration(ratios);
    let t = tw::tw_quantile(xi)?;
    let scale = s1_squared.sqrt() * location / (ratios.n() as f64).sqrt();
    Ok(PowerPrediction::from_kappa(
        TestKind::R,
        -(t * sigma_r + mu_r - location) / scale,
    ))
}

/// [`power_r`] with `s_1^2` evaluated from the spike specification.
pub fn power_r_for(
    ratios: &AspectRatio,
    spikes: &SpikeSpec,
    moments: &MomentProfile,
    xi: f64,
) -> Result<PowerPrediction> {
    let terms = spike_terms(ratios, spikes, moments)?;
    let lead = terms
        .first()
        .ok_or_else(|| Error::Spike("Roy's test power needs at least one spike".into()))?;
    power_r(
        ratios,
        SpikeGroup {
            alpha: lead.alpha,
            multiplicity: lead.multiplicity,
        },
        lead.s_squared,
        xi,
    )
}

/// Power of one test; `R` uses [`power_r_for`].
pub fn power(
    kind: TestKind,
    ratios: &AspectRatio,
    spikes: &SpikeSpec,
    moments: &MomentProfile,
    xi: f64,
) -> Result<PowerPrediction> {
    match kind {
        TestKind::U => power_u(ratios, spikes, moments, xi),
        TestKind::W => power_w(ratios, spikes, moments, xi),
        TestKind::V => power_v(ratios, spikes, moments, xi),
        TestKind::R => power_r_for(ratios, spikes, moments, xi),
    }
}

/// Which test the large-sample comparison favours, judged by `alpha_1` against `sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerLeader {
    /// `alpha_1` below `sqrt(n)`: Roy's largest root.
    RoyLargestRoot,
    /// `alpha_1` at or above `sqrt(n)`: the Lawley–Hotelling trace.
    LawleyHotelling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaPanel {
    pub kappa_u: f64,
    pub kappa_w: f64,
    pub kappa_v: f64,
    /// Only defined when the leading spike is simple.
    pub kappa_r: Option<f64>,
    pub leader: Option<PowerLeader>,
}

/// Normal-CDF arguments of the four power functions, side by side.
///
/// `kappa_v` evaluates the removed-dimension correction at `c_n`, while
/// [`power_v`] uses `c_nM`; the two agree to `O(1/n)`.
pub fn kappa_panel(
    ratios: &AspectRatio,
    spikes: &SpikeSpec,
    moments: &MomentProfile,
    xi: f64,
) -> Result<KappaPanel> {
    let (terms, z) = spiked_parts(ratios, spikes, moments, xi)?;
    let kappa_u = power_u(ratios, spikes, moments, xi)?.kappa;
    let kappa_w = power_w(ratios, spikes, moments, xi)?.kappa;

    let null_v = calib_v(ratios, None, moments)?;
    let alt_v = calib_v(ratios, Some(spikes), moments)?;
    let kappa_v = v_shift(&terms, ratios, ratios.c_n())? / alt_v.sigma - z * null_v.sigma / alt_v.sigma;

    let kappa_r = match terms.first() {
        Some(lead) if lead.multiplicity == 1 => {
            Some(power_r(ratios, spikes.groups()[0], lead.s_squared, xi)?.kappa)
        }
        _ => None,
    };
    let leader = terms.first().map(|lead| {
        if lead.alpha < (ratios.n() as f64).sqrt() {
            PowerLeader::RoyLargestRoot
        } else {
            PowerLeader::LawleyHotelling
        }
    });
    Ok(KappaPanel {
        kappa_u,
        kappa_w,
        kappa_v,
        kappa_r,
        leader,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::SpikeBasis;
    use approx::assert_abs_diff_eq;

    fn single(alpha: f64) -> SpikeSpec {
        SpikeSpec::new(
            vec![SpikeGroup { alpha, multiplicity: 1 }],
            SpikeBasis::Standard,
        )
        .unwrap()
    }

    fn model1() -> (AspectRatio, SpikeSpec) {
        (AspectRatio::new(200, 600, 1).unwrap(), single(601.0))
    }

    #[test]
    fn gaussian_null_u_sigma() {
        let ratios = AspectRatio::null(200, 600).unwrap();
        let cal = calib_u(&ratios, None, &MomentProfile::gaussian()).unwrap();
        let s = mp::series_constants_u(1.0 / 3.0, &SeriesPolicy::default()).unwrap();
        assert_abs_diff_eq!(cal.sigma, (2.0 * s.j1).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(cal.center, 200.0 * mp::ct_value(1.0 / 3.0).unwrap(), epsilon = 1e-12);
        assert_eq!(cal.hypothesis, Hypothesis::H0);
    }

    #[test]
    fn null_w_sigma() {
        let ratios = AspectRatio::null(200, 600).unwrap();
        let cal = calib_w(&ratios, None, &MomentProfile::gaussian()).unwrap();
        assert_abs_diff_eq!(cal.sigma, (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(cal.sigma, 0.816_496_580_927_726, epsilon = 1e-12);
        assert_eq!((cal.center, cal.mu), (200.0, 0.0));
    }

    #[test]
    fn empty_alternative_equals_null() {
        let ratios = AspectRatio::null(150, 400).unwrap();
        let moments = MomentProfile::new(1.0, 1.5).unwrap();
        let empty = SpikeSpec::empty();
        type Calib = fn(&AspectRatio, Option<&SpikeSpec>, &MomentProfile) -> Result<TestCalibration>;
        for f in [calib_u as Calib, calib_w, calib_v] {
            let h0 = f(&ratios, None, &moments).unwrap();
            let h1 = f(&ratios, Some(&empty), &moments).unwrap();
            assert_eq!((h0.center, h0.mu, h0.sigma), (h1.center, h1.mu, h1.sigma));
        }
    }

    #[test]
    fn model1_calibration_composes_its_parts() {
        let (ratios, spikes) = model1();
        let moments = MomentProfile::gaussian();
        let c = 199.0 / 600.0;
        let location = 601.0 + c * 601.0 / 600.0;
        let (theta, _) = mp::theta_nu(601.0, c).unwrap();
        let s2 = 2.0 / theta;
        let su = mp::series_constants_u(c, &SeriesPolicy::default()).unwrap();
        let cal = calib_u(&ratios, Some(&spikes), &moments).unwrap();
        assert_abs_diff_eq!(cal.center, 199.0 * mp::ct_value(c).unwrap(), epsilon = 1e-10);
        let mu = su.i1 + location.ln_1p() + (-(mp::ctilde(c).unwrap() * c).sqrt()).ln_1p();
        assert_abs_diff_eq!(cal.mu, mu, epsilon = 1e-12);
        let var = location.powi(2) / (600.0 * (1.0 + location).powi(2)) * s2 + 2.0 * su.j1;
        assert_abs_diff_eq!(cal.sigma, var.sqrt(), epsilon = 1e-12);

        let w = calib_w(&ratios, Some(&spikes), &moments).unwrap();
        assert_eq!(w.center, 199.0);
        assert_abs_diff_eq!(w.mu, location - c, epsilon = 1e-10);
        assert_abs_diff_eq!(w.sigma, (location.powi(2) / 600.0 * s2 + 2.0 * c).sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn v_spike_mean_bounded_per_spike() {
        let ratios = AspectRatio::new(200, 600, 2).unwrap();
        let moments = MomentProfile::gaussian();
        let spikes = SpikeSpec::new(
            vec![
                SpikeGroup { alpha: 1e6, multiplicity: 1 },
                SpikeGroup { alpha: 3.0, multiplicity: 1 },
            ],
            SpikeBasis::Standard,
        )
        .unwrap();
        for t in spike_terms(&ratios, &spikes, &moments).unwrap() {
            assert!(t.phi / (1.0 + t.phi) < 1.0);
        }
        assert!(calib_v(&ratios, Some(&spikes), &moments).is_ok());
    }

    #[test]
    fn mismatched_spikes_are_rejected() {
        let ratios = AspectRatio::new(200, 600, 2).unwrap();
        let moments = MomentProfile::gaussian();
        assert!(matches!(
            calib_u(&ratios, Some(&single(20.0)), &moments),
            Err(Error::Config(_))
        ));
        let ratios = AspectRatio::new(200, 600, 1).unwrap();
        assert!(matches!(
            calib_w(&ratios, Some(&single(1.2)), &moments),
            Err(Error::Subcritical { .. })
        ));
    }

    #[test]
    fn rlrt_constants() {
        let (mu, _) = rlrt_calibration(&AspectRatio::null(200, 600).unwrap());
        assert_abs_diff_eq!(mu, 2.488_033_871_712_585, epsilon = 1e-12);
        let mut last = f64::INFINITY;
        for n in [100, 1000, 10_000, 1_000_000] {
            let (_, sigma) = rlrt_calibration(&AspectRatio::null(n / 4, n).unwrap());
            assert!(sigma < last);
            last = sigma;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn decision_rule() {
        let cal = TestCalibration {
            kind: TestKind::W,
            hypothesis: Hypothesis::H0,
            center: 10.0,
            mu: 2.0,
            sigma: 3.0,
        };
        let at_center = test_statistic(12.0, &cal, 0.05).unwrap();
        assert_eq!(at_center.z, 0.0);
        assert_abs_diff_eq!(at_center.p_value, 0.5, epsilon = 1e-15);

        let unit = TestCalibration { center: 0.0, mu: 0.0, sigma: 1.0, ..cal };
        let z05 = normal_upper_quantile(0.05).unwrap();
        let tie = test_statistic(z05, &unit, 0.05).unwrap();
        assert!(!tie.reject);
        assert!(test_statistic(z05 + 1e-9, &unit, 0.05).unwrap().reject);

        let shifted = test_statistic(12.0 + 1.5, &cal, 0.05).unwrap();
        assert_abs_diff_eq!(shifted.z - at_center.z, 0.5, epsilon = 1e-15);

        let h1 = TestCalibration { hypothesis: Hypothesis::H1, ..cal };
        assert!(test_statistic(1.0, &h1, 0.05).is_err());
    }

    #[test]
    fn roy_decision_uses_tracy_widom() {
        let ratios = AspectRatio::null(200, 600).unwrap();
        let cal = calib_r(&ratios);
        let t = tw::tw_quantile(0.05).unwrap();
        let report = test_statistic(cal.center + t * cal.sigma * 1.001, &cal, 0.05).unwrap();
        assert!(report.reject);
        assert_abs_diff_eq!(report.critical, t, epsilon = 0.0);
        assert!((report.p_value - 0.05).abs() < 1e-3);
    }

    #[test]
    fn power_is_size_without_spikes() {
        let ratios = AspectRatio::null(200, 600).unwrap();
        let moments = MomentProfile::new(1.0, 1.5).unwrap();
        let empty = SpikeSpec::empty();
        let z = normal_upper_quantile(0.05).unwrap();
        for f in [power_u, power_w, power_v] {
            let pred = f(&ratios, &empty, &moments, 0.05).unwrap();
            assert_abs_diff_eq!(pred.kappa, -z, epsilon = 1e-12);
            assert_abs_diff_eq!(pred.power, 0.05, epsilon = 1e-9);
        }
        let panel = kappa_panel(&ratios, &empty, &moments, 0.05).unwrap();
        assert!(panel.kappa_r.is_none() && panel.leader.is_none());
        assert_abs_diff_eq!(panel.kappa_v, -z, epsilon = 1e-12);
    }

    #[test]
    fn power_equals_phi_of_kappa() {
        let (ratios, spikes) = model1();
        let moments = MomentProfile::gaussian();
        for kind in TestKind::ALL {
            let pred = power(kind, &ratios, &spikes, &moments, 0.05).unwrap();
            assert_abs_diff_eq!(pred.power, std_normal().cdf(pred.kappa), epsilon = 1e-12);
            if kind == TestKind::V {
                assert!(pred.power > 0.5 && pred.power < 0.99, "{}", pred.power);
            } else {
                assert!(pred.power >= 0.99, "{kind:?}: {}", pred.power);
            }
        }
    }

    #[test]
    fn roy_power_half_at_threshold() {
        let ratios = AspectRatio::new(200, 600, 1).unwrap();
        let (mu_r, sigma_r) = rlrt_calibration(&ratios);
        let target = mu_r + tw::tw_quantile(0.05).unwrap() * sigma_r;
        let alpha = mp::phi_inverse(target, ratios.c_nm()).unwrap();
        let spike = SpikeGroup { alpha, multiplicity: 1 };
        let pred = power_r(&ratios, spike, 2.0, 0.05).unwrap();
        assert!(pred.kappa.abs() < 1e-9);
        assert_abs_diff_eq!(pred.power, 0.5, epsilon = 1e-9);
        let double = SpikeGroup { alpha: 20.0, multiplicity: 2 };
        assert!(power_r(&ratios, double, 2.0, 0.05).is_err());
    }

    #[test]
    fn power_increases_with_spike() {
        let ratios = AspectRatio::new(200, 600, 1).unwrap();
        let moments = MomentProfile::gaussian();
        for kind in TestKind::ALL {
            let powers: Vec<f64> = [3.0, 5.0, 10.0, 20.0, 50.0]
                .iter()
                .map(|&a| power(kind, &ratios, &single(a), &moments, 0.05).unwrap().power)
                .collect();
            assert!(powers.windows(2).all(|w| w[1] >= w[0]), "{kind:?}: {powers:?}");
        }
    }

    #[test]
    fn kappa_ordering() {
        let ratios = AspectRatio::new(200, 600, 1).unwrap();
        let moments = MomentProfile::gaussian();
        let weak = kappa_panel(&ratios, &single(5.0), &moments, 0.05).unwrap();
        let r = weak.kappa_r.unwrap();
        assert!(weak.kappa_v < weak.kappa_u && weak.kappa_u < weak.kappa_w && weak.kappa_w < r, "{weak:?}");
        assert_eq!(weak.leader, Some(PowerLeader::RoyLargestRoot));

        let strong = kappa_panel(&ratios, &single(601.0), &moments, 0.05).unwrap();
        let r = strong.kappa_r.unwrap();
        assert!(strong.kappa_w.min(r) > strong.kappa_u.max(strong.kappa_v), "{strong:?}");
        assert!(strong.kappa_w / r > 0.5 && strong.kappa_w / r < 2.0);
        assert_eq!(strong.leader, Some(PowerLeader::LawleyHotelling));
    }

    #[test]
    fn v_power_plateaus() {
        let ratios = AspectRatio::new(200, 600, 1).unwrap();
        let moments = MomentProfile::gaussian();
        let kappas: Vec<f64> = [10.0, 100.0, 1e3, 1e4, 1e5]
            .iter()
            .map(|&a| power_v(&ratios, &single(a), &moments, 0.05).unwrap().kappa)
            .collect();
        let growth = kappas[4] - kappas[2];
        assert!(growth < 0.05 * kappas[4].abs().max(1.0), "{kappas:?}");
    }
}
