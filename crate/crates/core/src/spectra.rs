//! Sample covariance, eigenvalues and the four raw statistics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp;

/// Observations stored as a `p x n` matrix: one variable per row, one
/// observation per column. Data are taken to be mean-zero; no centering is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    entries: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::Shape(format!(
                "data matrix is empty ({} x {})",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if let Some(bad) = entries.iter().position(|x| !x.is_finite()) {
            let (row, col) = (bad % entries.nrows(), bad / entries.nrows());
            return Err(Error::Shape(format!(
                "non-finite entry at row {row}, column {col}"
            )));
        }
        Ok(Self { entries })
    }

    pub fn p(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }
}

/// Eigenvalues sorted in descending order, all non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    values: Vec<f64>,
}

impl EigenSpectrum {
    /// Builds a spectrum from arbitrary non-negative values (sorted here).
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("empty spectrum".into()));
        }
        if let Some(&v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::domain("eigenvalue", v, "finite and >= 0"));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `B = Y Y^T / n`.
pub fn sample_covariance(data: &DataMatrix) -> DMatrix<f64> {
    let y = data.entries();
    let mut b = y * y.transpose();
    b /= data.n() as f64;
    // symmetric up to rounding in the product; make it exact
    b.fill_upper_triangle_with_lower_triangle();
    b
}

/// Relative clamp for tiny negative eigenvalues produced by the solver.
pub const NEGATIVE_CLAMP: f64 = 1e-10;

pub fn eigen_spectrum(b: &DMatrix<f64>) -> Result<EigenSpectrum> {
    if !b.is_square() || b.nrows() == 0 {
        return Err(Error::Shape(format!(
            "expected a non-empty square matrix, got {} x {}",
            b.nrows(),
            b.ncols()
        )));
    }
    let scale = b.amax();
    let asym = (b - b.transpose()).amax();
    if asym > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Shape(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let mut values: Vec<f64> = b.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let threshold = NEGATIVE_CLAMP * values[0].max(0.0);
    for v in &mut values {
        if *v < 0.0 {
            if -*v > threshold {
                return Err(Error::NotPsd {
                    value: *v,
                    threshold,
                });
            }
            *v = 0.0;
        }
    }
    Ok(EigenSpectrum { values })
}

/// Wilks (`u`), Lawley–Hotelling (`w`), Bartlett–Nanda–Pillai (`v`) and Roy (`r`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawStatistics {
    pub u: f64,
    pub w: f64,
    pub v: f64,
    pub r: f64,
}

pub fn raw_statistics(spectrum: &EigenSpectrum) -> RawStatistics {
    let values = spectrum.values();
    let mut stats = RawStatistics {
        u: 0.0,
        w: 0.0,
        v: 0.0,
        r: spectrum.largest(),
    };
    for &l in values {
        stats.u += l.ln_1p();
        stats.w += l;
        stats.v += l / (1.0 + l);
    }
    stats
}

/// Distribution parameters of the i.i.d. entries.
///
/// `alpha_x = |E x^2|^2` (1 for real data) and `beta_x = E|x|^4 - |E x^2|^2 - 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentProfile {
    pub alpha_x: f64,
    pub beta_x: f64,
}

impl MomentProfile {
    pub fn new(alpha_x: f64, beta_x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha_x) {
            return Err(Error::domain("alpha_x", alpha_x, "0 <= alpha_x <= 1"));
        }
        if !beta_x.is_finite() {
            return Err(Error::domain("beta_x", beta_x, "finite"));
        }
        Ok(Self { alpha_x, beta_x })
    }

    /// Real Gaussian entries.
    pub fn gaussian() -> Self {
        Self {
            alpha_x: 1.0,
            beta_x: 0.0,
        }
    }
}

/// One distinct spiked eigenvalue and its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeGroup {
    pub alpha: f64,
    pub multiplicity: usize,
}

/// Right singular vectors `U_1` belonging to the spikes.
#[derive(Debug, Clone, PartialEq)]
pub enum SpikeBasis {
    /// The spikes sit on the leading coordinate axes.
    Standard,
    /// A `p x M` matrix with orthonormal columns, grouped in spike order.
    Columns(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeSpec {
    groups: Vec<SpikeGroup>,
    basis: SpikeBasis,
}

impl SpikeSpec {
    /// Groups are sorted by `alpha` descending; alphas must be distinct and
    /// multiplicities positive. A column basis must have `M` orthonormal columns.
    pub fn new(mut groups: Vec<SpikeGroup>, basis: SpikeBasis) -> Result<Self> {
        for g in &groups {
            if !(g.alpha.is_finite() && g.alpha > 0.0) {
                return Err(Error::Spike(format!("alpha = {} must be positive", g.alpha)));
            }
            if g.multiplicity == 0 {
                return Err(Error::Spike(format!(
                    "alpha = {} has zero multiplicity",
                    g.alpha
                )));
            }
        }
        groups.sort_by(|a, b| b.alpha.total_cmp(&a.alpha));
        if let Some(w) = groups.windows(2).find(|w| w[0].alpha == w[1].alpha) {
            return Err(Error::Spike(format!(
                "alpha = {} appears in more than one group",
                w[0].alpha
            )));
        }
        let m: usize = groups.iter().map(|g| g.multiplicity).sum();
        if let SpikeBasis::Columns(u) = &basis {
            if u.ncols() != m {
                return Err(Error::Spike(format!(
                    "basis has {} columns but the groups need M = {m}",
                    u.ncols()
                )));
            }
            if u.nrows() < m {
                return Err(Error::Spike(format!(
                    "basis has {} rows, fewer than M = {m}",
                    u.nrows()
                )));
            }
            let gram = u.transpose() * u;
            let defect = (gram - DMatrix::<f64>::identity(m, m)).amax();
            if defect > 1e-10 {
                return Err(Error::Spike(format!(
                    "basis columns are not orthonormal (defect {defect:e})"
                )));
            }
        }
        Ok(Self { groups, basis })
    }

    /// No spikes at all (`M = 0`).
    pub fn empty() -> Self {
        Self {
            groups: Vec::new(),
            basis: SpikeBasis::Standard,
        }
    }

    pub fn groups(&self) -> &[SpikeGroup] {
        &self.groups
    }

    pub fn basis(&self) -> &SpikeBasis {
        &self.basis
    }

    /// Total multiplicity `M`.
    pub fn total_multiplicity(&self) -> usize {
        self.groups.iter().map(|g| g.multiplicity).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Rejects any spike at or below `1 + sqrt(c)`.
    pub fn check_supercritical(&self, c: f64) -> Result<()> {
        for g in &self.groups {
            mp::phi(g.alpha, c)?;
        }
        Ok(())
    }

    /// Dimension `p` implied by the basis, if it is explicit.
    pub fn basis_dimension(&self) -> Option<usize> {
        match &self.basis {
            SpikeBasis::Standard => None,
            SpikeBasis::Columns(u) => Some(u.nrows()),
        }
    }

    fn column_range(&self, group_index: usize) -> std::ops::Range<usize> {
        let start: usize = self.groups[..group_index]
            .iter()
            .map(|g| g.multiplicity)
            .sum();
        start..start + self.groups[group_index].multiplicity
    }
}

/// `sum_{j1, j2 in J_k} sum_t u_{t j1}^2 u_{t j2}^2 = sum_t (sum_{j in J_k} u_{tj}^2)^2`.
pub fn u_group_sum(spec: &SpikeSpec, group_index: usize) -> Result<f64> {
    if group_index >= spec.groups.len() {
        return Err(Error::Spike(format!(
            "group index {group_index} out of range ({} groups)",
            spec.groups.len()
        )));
    }
    match &spec.basis {
        SpikeBasis::Standard => Ok(spec.groups[group_index].multiplicity as f64),
        SpikeBasis::Columns(u) => {
            let cols = spec.column_range(group_index);
            let total = u
                .row_iter()
                .map(|row| {
                    let mass: f64 = row.iter().skip(cols.start).take(cols.len()).map(|x| x * x).sum();
                    mass * mass
                })
                .sum();
            Ok(total)
        }
    }
}

/// Variance factor of the spiked sample eigenvalues of one group:
/// `(alpha_x + 1) d / theta + beta_x nu u_sum / theta^2`.
pub fn s_k_squared(
    alpha: f64,
    multiplicity: usize,
    u_sum: f64,
    moments: &MomentProfile,
    c: f64,
) -> Result<f64> {
    if !(u_sum >= 0.0) {
        return Err(Error::domain("u_sum", u_sum, ">= 0"));
    }
    let (theta, nu) = mp::theta_nu(alpha, c)?;
    Ok((moments.alpha_x + 1.0) * multiplicity as f64 / theta
        + moments.beta_x * nu * u_sum / (theta * theta))
}
