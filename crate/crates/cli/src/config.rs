//! Run configurations, one JSON document per subcommand.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use spikecal::calibration::TestKind;
use spikecal::ingest::DataFormat;
use spikecal::mp::AspectRatio;
use spikecal::oracle::QuadPolicy;
use spikecal::spectra::{MomentProfile, SpikeBasis, SpikeGroup, SpikeSpec};

use crate::CliError;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Validation(format!("cannot read config {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
}

fn default_level() -> f64 {
    0.05
}

fn all_tests() -> Vec<TestKind> {
    TestKind::ALL.to_vec()
}

/// Dimensions, entry moments, the optional spiked alternative and the tests
/// to calibrate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub p: usize,
    pub n: usize,
    #[serde(default = "MomentProfile::gaussian")]
    pub moments: MomentProfile,
    #[serde(default)]
    pub spikes: Vec<SpikeGroup>,
    /// `M` columns of length `p`; the leading axes when absent.
    #[serde(default)]
    pub spike_basis: Option<Vec<Vec<f64>>>,
    #[serde(default = "all_tests")]
    pub tests: Vec<TestKind>,
}

impl CalibrateConfig {
    pub fn moments(&self) -> Result<MomentProfile, CliError> {
        Ok(MomentProfile::new(self.moments.alpha_x, self.moments.beta_x)?)
    }

    pub fn spike_spec(&self) -> Result<SpikeSpec, CliError> {
        let basis = match &self.spike_basis {
            None => SpikeBasis::Standard,
            Some(cols) => {
                if cols.iter().any(|c| c.len() != self.p) {
                    return Err(CliError::Validation(format!(
                        "spike_basis: every column needs p = {} entries",
                        self.p
                    )));
                }
                let m = cols.len();
                SpikeBasis::Columns(DMatrix::from_fn(self.p, m, |i, j| cols[j][i]))
            }
        };
        if self.spikes.is_empty() {
            if self.spike_basis.as_ref().is_some_and(|c| !c.is_empty()) {
                return Err(CliError::Validation(
                    "spike_basis given without spikes".into(),
                ));
            }
            return Ok(SpikeSpec::empty());
        }
        Ok(SpikeSpec::new(self.spikes.clone(), basis)?)
    }

    pub fn ratios(&self) -> Result<AspectRatio, CliError> {
        let m = self.spikes.iter().map(|g| g.multiplicity).sum();
        Ok(AspectRatio::new(self.p, self.n, m)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    /// Relative paths resolve against the config file's directory.
    pub data: PathBuf,
    pub format: DataFormat,
    /// Declared dimensions, checked against the file when present.
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "MomentProfile::gaussian")]
    pub moments: MomentProfile,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_report_format")]
    pub output: ReportFormat,
}

fn default_report_format() -> ReportFormat {
    ReportFormat::Json
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub p: usize,
    pub n: usize,
    #[serde(default = "MomentProfile::gaussian")]
    pub moments: MomentProfile,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Leading spike values; a `null` entry is the no-spike row.
    pub alphas: Vec<Option<f64>>,
}

fn default_c_grid() -> Vec<f64> {
    (1..10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCheckConfig {
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    /// Restrict the check to these quantity names; all when absent.
    #[serde(default)]
    pub quantities: Option<Vec<String>>,
    #[serde(default)]
    pub quadrature: QuadPolicy,
}
