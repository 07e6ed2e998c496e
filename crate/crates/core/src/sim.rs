//! Monte Carlo experiments: entry generators, population models, the
//! replication loop and the empirical summaries.
//!
//! Every replication draws from its own ChaCha stream keyed by
//! `(seed, replication index)`, and results are reduced in replication order,
//! so reports do not depend on the number of worker threads.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::calibration::{self, Hypothesis, TestCalibration, TestKind};
use crate::error::{Error, Result};
use crate::mp::AspectRatio;
use crate::spectra::{self, DataMatrix, MomentProfile, SpikeBasis, SpikeGroup, SpikeSpec};
use crate::tw;

/// Stream reserved for the rotation of the rotated models.
const ROTATION_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistSpec {
    /// Standard normal entries.
    Gaussian,
    /// `Gamma(shape 4, scale 0.5) - 2`.
    GammaShifted,
}

impl DistSpec {
    pub fn moments(&self) -> MomentProfile {
        match self {
            DistSpec::Gaussian => MomentProfile::gaussian(),
            DistSpec::GammaShifted => MomentProfile {
                alpha_x: 1.0,
                beta_x: 1.5,
            },
        }
    }
}

/// Population covariance of an experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `Sigma = I`.
    #[default]
    Null,
    /// `diag(1 + n, 1, ..., 1)`.
    M1,
    /// `diag(1 + n, 1 + 0.8 n, 1, ..., 1)`.
    M2,
    /// Model 1 rotated by a random orthogonal `U_0`.
    M3 {
        #[serde(default)]
        rotation_seed: Option<u64>,
    },
    /// Model 2 rotated by the same kind of `U_0`.
    M4 {
        #[serde(default)]
        rotation_seed: Option<u64>,
    },
    /// Arbitrary spikes on the leading axes, optionally rotated.
    Spiked {
        spikes: Vec<SpikeGroup>,
        #[serde(default)]
        rotation_seed: Option<u64>,
    },
}

impl ModelSpec {
    fn groups(&self, n: usize) -> Vec<SpikeGroup> {
        let n = n as f64;
        let one = |alpha| SpikeGroup {
            alpha,
            multiplicity: 1,
        };
        match self {
            ModelSpec::Null => Vec::new(),
            ModelSpec::M1 | ModelSpec::M3 { .. } => vec![one(1.0 + n)],
            ModelSpec::M2 | ModelSpec::M4 { .. } => vec![one(1.0 + n), one(1.0 + 0.8 * n)],
            ModelSpec::Spiked { spikes, .. } => spikes.clone(),
        }
    }

    /// `Some(seed)` for rotated models; a missing seed falls back to `default_seed`.
    fn rotation(&self, default_seed: u64) -> Option<u64> {
        match self {
            ModelSpec::M3 { rotation_seed } | ModelSpec::M4 { rotation_seed } => {
                Some(rotation_seed.unwrap_or(default_seed))
            }
            ModelSpec::Spiked { rotation_seed, .. } => *rotation_seed,
            _ => None,
        }
    }
}

/// Block of i.i.d. standardized entries from one substream.
pub fn gen_entries(dist: DistSpec, p: usize, n: usize, seed: u64, stream: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    match dist {
        DistSpec::Gaussian => DMatrix::from_fn(p, n, |_, _| StandardNormal.sample(&mut rng)),
        DistSpec::GammaShifted => {
            let gamma = Gamma::new(4.0, 0.5).expect("valid gamma parameters");
            DMatrix::from_fn(p, n, |_, _| gamma.sample(&mut rng) - 2.0)
        }
    }
}

/// Left singular vectors of a `p x p` Gaussian matrix.
pub fn random_rotation(p: usize, seed: u64) -> DMatrix<f64> {
    let g = gen_entries(DistSpec::Gaussian, p, p, seed, ROTATION_STREAM);
    g.svd(true, false).u.expect("requested left singular vectors")
}

/// A spiked population `Sigma = I + U_1 (D - I) U_1^T` ready to transform entries.
#[derive(Debug, Clone)]
pub struct Population {
    p: usize,
    spikes: SpikeSpec,
    /// `sqrt(alpha) - 1` for each spike column.
    gains: Vec<f64>,
    /// `p x M` spike directions when rotated.
    basis: Option<DMatrix<f64>>,
}

impl Population {
    pub fn new(model: &ModelSpec, p: usize, n: usize, seed: u64) -> Result<Self> {
        let groups = model.groups(n);
        let m: usize = groups.iter().map(|g| g.multiplicity).sum();
        if m >= p {
            return Err(Error::Shape(format!("{m} spikes need p > {m}, got p = {p}")));
        }
        let basis = model.rotation(seed).map(|s| random_rotation(p, s).columns(0, m).into_owned());
        let spikes = SpikeSpec::new(
            groups,
            basis.clone().map_or(SpikeBasis::Standard, SpikeBasis::Columns),
        )?;
        let gains = spikes
            .groups()
            .iter()
            .flat_map(|g| std::iter::repeat_n(g.alpha.sqrt() - 1.0, g.multiplicity))
            .collect();
        Ok(Self {
            p,
            spikes,
            gains,
            basis,
        })
    }

    pub fn spikes(&self) -> &SpikeSpec {
        &self.spikes
    }

    /// The population covariance matrix itself.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mut sigma = DMatrix::identity(self.p, self.p);
        for (j, &g) in self.gains.iter().enumerate() {
            let extra = (1.0 + g) * (1.0 + g) - 1.0;
            match &self.basis {
                None => sigma[(j, j)] += extra,
                Some(u) => sigma += extra * u.column(j) * u.column(j).transpose(),
            }
        }
        sigma
    }

    /// `Sigma^{1/2} X` as a rank-M update of `X`.
    pub fn apply(&self, mut x: DMatrix<f64>) -> Result<DataMatrix> {
        if x.nrows() != self.p {
            return Err(Error::Shape(format!(
                "entries have {} rows, population has p = {}",
                x.nrows(),
                self.p
            )));
        }
        match &self.basis {
            None => {
                for (j, &g) in self.gains.iter().enumerate() {
                    x.row_mut(j).scale_mut(1.0 + g);
                }
            }
            Some(u) => {
                let mut proj = u.transpose() * &x;
                for (j, &g) in self.gains.iter().enumerate() {
                    proj.row_mut(j).scale_mut(g);
                }
                x += u * proj;
            }
        }
        DataMatrix::new(x)
    }
}

/// `Sigma^{1/2} X` for a model, drawing the rotation (if any) from `seed`.
pub fn apply_model(model: &ModelSpec, entries: DMatrix<f64>, n: usize, seed: u64) -> Result<DataMatrix> {
    Population::new(model, entries.nrows(), n, seed)?.apply(entries)
}

fn default_level() -> f64 {
    0.05
}

fn default_qq_points() -> usize {
    99
}

fn default_bins() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: usize,
    pub n: usize,
    #[serde(default)]
    pub model: ModelSpec,
    pub dist: DistSpec,
    pub reps: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    pub seed: u64,
    /// Probability levels in the QQ summary.
    #[serde(default = "default_qq_points")]
    pub qq_points: usize,
    /// Histogram bins on `[-5, 5]`.
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.p < 2 || self.p >= self.n {
            return Err(Error::Config(format!(
                "need 2 <= p < n, got p = {}, n = {}",
                self.p, self.n
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level {} outside (0, 1)", self.level)));
        }
        if self.qq_points == 0 || self.histogram_bins == 0 {
            return Err(Error::Config("qq_points and histogram_bins must be positive".into()));
        }
        Ok(())
    }
}

/// Reference law of a standardized statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    Normal,
    TracyWidom,
}

impl Reference {
    fn cdf(&self, x: f64) -> f64 {
        match self {
            Reference::Normal => calibration::std_normal().cdf(x),
            Reference::TracyWidom => tw::tw_cdf(x),
        }
    }

    fn quantile(&self, q: f64) -> Result<f64> {
        match self {
            Reference::Normal => Ok(calibration::std_normal().inverse_cdf(q)),
            Reference::TracyWidom => tw::tw_quantile(1.0 - q),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
}

/// Distributional summary of a standardized statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardized {
    pub reference: Reference,
    pub calibration: TestCalibration,
    pub mean: f64,
    pub variance: f64,
    pub ks_distance: f64,
    /// `(reference quantile, empirical quantile)` pairs.
    pub qq_pairs: Vec<(f64, f64)>,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub kind: TestKind,
    pub raw_mean: f64,
    /// Absent for R under an alternative, whose law is not Tracy–Widom.
    pub standardized: Option<Standardized>,
    pub null_calibration: TestCalibration,
    pub rejection_rate: f64,
    /// Nominal size under H0, asymptotic power under H1 (when defined).
    pub predicted_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub config: ExperimentConfig,
    pub hypothesis: Hypothesis,
    pub spikes: Vec<SpikeGroup>,
    pub statistics: Vec<StatSummary>,
}

impl SummaryReport {
    pub fn statistic(&self, kind: TestKind) -> &StatSummary {
        self.statistics
            .iter()
            .find(|s| s.kind == kind)
            .expect("every report carries all four statistics")
    }
}

/// Sup-norm distance between the empirical CDF and `Phi`.
pub fn ks_distance(sample: &[f64]) -> f64 {
    ks_against(sample, Reference::Normal)
}

fn ks_against(sample: &[f64], reference: Reference) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = reference.cdf(x);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (m - 1.0))
}

/// Empirical quantile by linear interpolation between order statistics.
fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn qq_pairs(sample: &[f64], reference: Reference, points: usize) -> Result<Vec<(f64, f64)>> {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    (1..=points)
        .map(|i| {
            let q = i as f64 / (points + 1) as f64;
            Ok((reference.quantile(q)?, empirical_quantile(&sorted, q)))
        })
        .collect()
}

fn histogram(sample: &[f64], bins: usize) -> Histogram {
    let (lo, hi) = (-5.0, 5.0);
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    let (mut below, mut above) = (0, 0);
    for &x in sample {
        if x < lo {
            below += 1;
        } else if x >= hi {
            above += 1;
        } else {
            counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    Histogram {
        edges,
        counts,
        below,
        above,
    }
}

fn standardized(
    sample: &[f64],
    calibration: TestCalibration,
    reference: Reference,
    config: &ExperimentConfig,
) -> Result<Standardized> {
    let (mean, variance) = mean_variance(sample);
    Ok(Standardized {
        reference,
        calibration,
        mean,
        variance,
        ks_distance: ks_against(sample, reference),
        qq_pairs: qq_pairs(sample, reference, config.qq_points)?,
        histogram: histogram(sample, config.histogram_bins),
    })
}

/// Raw U, W, V, R for every replication, in replication order.
pub fn simulate_raw(
    config: &ExperimentConfig,
    population: &Population,
) -> Result<Vec<spectra::RawStatistics>> {
    (0..config.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let x = gen_entries(config.dist, config.p, config.n, config.seed, rep);
            let data = population.apply(x)?;
            let spectrum = spectra::eigen_spectrum(&spectra::sample_covariance(&data))?;
            Ok(spectra::raw_statistics(&spectrum))
        })
        .collect()
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<SummaryReport> {
    config.validate()?;
    let population = Population::new(&config.model, config.p, config.n, config.seed)?;
    let spikes = population.spikes();
    let moments = config.dist.moments();
    let m = spikes.total_multiplicity();
    let ratios = AspectRatio::new(config.p, config.n, m)?;
    let alternative = if m == 0 { None } else { Some(spikes) };
    // fail on bad spikes before spending time on replications
    if let Some(spec) = alternative {
        calibration::spike_terms(&ratios, spec, &moments)?;
    }
    let raw = simulate_raw(config, &population)?;

    let mut statistics = Vec::with_capacity(4);
    for kind in TestKind::ALL {
        let values: Vec<f64> = raw.iter().map(|s| kind.raw(s)).collect();
        let null_cal = calibration::null_calibration(kind, &ratios, &moments)?;
        let critical = calibration::critical_value(kind, config.level)?;
        let rejections = values
            .iter()
            .filter(|&&x| null_cal.standardize(x) > critical)
            .count();
        let model_cal = match (kind, alternative) {
            (_, None) => Some(null_cal),
            (TestKind::U, Some(s)) => Some(calibration::calib_u(&ratios, Some(s), &moments)?),
            (TestKind::W, Some(s)) => Some(calibration::calib_w(&ratios, Some(s), &moments)?),
            (TestKind::V, Some(s)) => Some(calibration::calib_v(&ratios, Some(s), &moments)?),
            (TestKind::R, Some(_)) => None,
        };
        let reference = match kind {
            TestKind::R => Reference::TracyWidom,
            _ => Reference::Normal,
        };
        let standardized = model_cal
            .map(|cal| {
                let z: Vec<f64> = values.iter().map(|&x| cal.standardize(x)).collect();
                standardized(&z, cal, reference, config)
            })
            .transpose()?;
        let predicted_rate = match alternative {
            None => Some(config.level),
            Some(s) => match calibration::power(kind, &ratios, s, &moments, config.level) {
                Ok(pred) => Some(pred.power),
                Err(Error::Spike(_)) => None,
                Err(e) => return Err(e),
            },
        };
        statistics.push(StatSummary {
            kind,
            raw_mean: mean_variance(&values).0,
            standardized,
            null_calibration: null_cal,
            rejection_rate: rejections as f64 / values.len() as f64,
            predicted_rate,
        });
    }
    Ok(SummaryReport {
        config: config.clone(),
        hypothesis: if m == 0 { Hypothesis::H0 } else { Hypothesis::H1 },
        spikes: spikes.groups().to_vec(),
        statistics,
    })
}

pub fn write_report_json(report: &SummaryReport, path: &Path) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut file, report)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// QQ pairs of every standardized statistic as `statistic,reference,empirical`.
pub fn write_qq_csv(report: &SummaryReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["statistic", "reference", "empirical"]).map_err(csv_error)?;
    for s in &report.statistics {
        if let Some(st) = &s.standardized {
            for &(a, b) in &st.qq_pairs {
                w.write_record([s.kind.name().to_string(), fmt(a), fmt(b)])
                    .map_err(csv_error)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Histogram bins as `statistic,lower,upper,count`.
pub fn write_histogram_csv(report: &SummaryReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["statistic", "lower", "upper", "count"]).map_err(csv_error)?;
    for s in &report.statistics {
        if let Some(st) = &s.standardized {
            let h = &st.histogram;
            for (i, count) in h.counts.iter().enumerate() {
                w.write_record([
                    s.kind.name().to_string(),
                    fmt(h.edges[i]),
                    fmt(h.edges[i + 1]),
                    count.to_string(),
                ])
                .map_err(csv_error)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
