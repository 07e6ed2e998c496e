use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use spikecal::calibration::{self, TestCalibration, TestKind, TestReport};
use spikecal::mp::{self, AspectRatio, ExtraTerms, SeriesConstants, SeriesPolicy};
use spikecal::oracle::{self, ExtraKind, MpKernel, QuadPolicy};
use spikecal::sim::{self, ExperimentConfig};
use spikecal::spectra::{self, MomentProfile, RawStatistics, SpikeGroup, SpikeSpec};
use spikecal::{ingest, Error};

use crate::config::{self, CalibrateConfig, OracleCheckConfig, PowerConfig, ReportFormat, TestConfig};
use crate::{CliError, Common};

fn no_seed(common: &Common, command: &str) -> Result<(), CliError> {
    match common.seed {
        Some(_) => Err(CliError::Validation(format!(
            "--seed has no effect for `{command}`; its configuration has no seed"
        ))),
        None => Ok(()),
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn check_level(level: f64) -> Result<(), CliError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!("level: {level} outside (0, 1)")))
    }
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Reference {
    Normal,
    TracyWidom,
}

#[derive(Debug, Serialize)]
struct CalibEntry {
    test: TestKind,
    reference: Reference,
    center: f64,
    mu: f64,
    sigma: f64,
}

impl CalibEntry {
    fn from(cal: &TestCalibration) -> Self {
        Self {
            test: cal.kind,
            reference: match cal.kind {
                TestKind::R => Reference::TracyWidom,
                _ => Reference::Normal,
            },
            center: cal.center,
            mu: cal.mu,
            sigma: cal.sigma,
        }
    }
}

#[derive(Debug, Serialize)]
struct ConstantsBlock {
    c: f64,
    rho: f64,
    ctilde: f64,
    ct: f64,
    v_center: f64,
    series_u: SeriesConstants,
    series_v: SeriesConstants,
    extra_terms: ExtraTerms,
    tests: Vec<CalibEntry>,
}

#[derive(Debug, Serialize)]
struct CalibrationReport {
    p: usize,
    n: usize,
    m: usize,
    c_n: f64,
    c_nm: f64,
    moments: MomentProfile,
    spikes: Vec<SpikeGroup>,
    h0: ConstantsBlock,
    h1: ConstantsBlock,
}

fn constants_block(c: f64, m: usize, tests: Vec<CalibEntry>) -> Result<ConstantsBlock, CliError> {
    let policy = SeriesPolicy::default();
    Ok(ConstantsBlock {
        c,
        rho: mp::rho(c)?,
        ctilde: mp::ctilde(c)?,
        ct: mp::ct_value(c)?,
        v_center: mp::v_center(c)?,
        series_u: mp::series_constants_u(c, &policy)?,
        series_v: mp::series_constants_v(c, &policy)?,
        extra_terms: mp::extra_terms(c, m)?,
        tests,
    })
}

/// Under an alternative with a simple leading spike, the largest eigenvalue
/// is Gaussian around `phi` with scale `s_1 phi / sqrt(n)`.
fn roy_alternative(
    ratios: &AspectRatio,
    spikes: &SpikeSpec,
    moments: &MomentProfile,
) -> Result<Option<CalibEntry>, CliError> {
    if spikes.is_empty() {
        return Ok(Some(CalibEntry::from(&calibration::calib_r(ratios))));
    }
    let terms = calibration::spike_terms(ratios, spikes, moments)?;
    let lead = terms[0];
    if lead.multiplicity != 1 {
        return Ok(None);
    }
    Ok(Some(CalibEntry {
        test: TestKind::R,
        reference: Reference::Normal,
        center: lead.phi,
        mu: 0.0,
        sigma: lead.s_squared.sqrt() * lead.phi / (ratios.n() as f64).sqrt(),
    }))
}

pub fn calibrate(common: &Common) -> Result<(), CliError> {
    no_seed(common, "calibrate")?;
    let cfg: CalibrateConfig = config::load(&common.config)?;
    let ratios = cfg.ratios()?;
    let moments = cfg.moments()?;
    let spikes = cfg.spike_spec()?;
    let null = AspectRatio::null(ratios.p(), ratios.n())?;

    let mut h0 = Vec::new();
    let mut h1 = Vec::new();
    for &kind in &cfg.tests {
        h0.push(CalibEntry::from(&calibration::null_calibration(kind, &null, &moments)?));
        let alt = match kind {
            TestKind::U => Some(CalibEntry::from(&calibration::calib_u(&ratios, Some(&spikes), &moments)?)),
            TestKind::W => Some(CalibEntry::from(&calibration::calib_w(&ratios, Some(&spikes), &moments)?)),
            TestKind::V => Some(CalibEntry::from(&calibration::calib_v(&ratios, Some(&spikes), &moments)?)),
            TestKind::R => roy_alternative(&ratios, &spikes, &moments)?,
        };
        h1.extend(alt);
    }
    let report = CalibrationReport {
        p: ratios.p(),
        n: ratios.n(),
        m: ratios.m(),
        c_n: ratios.c_n(),
        c_nm: ratios.c_nm(),
        moments,
        spikes: spikes.groups().to_vec(),
        h0: constants_block(ratios.c_n(), 0, h0)?,
        h1: constants_block(ratios.c_nm(), ratios.m(), h1)?,
    };
    write_json(&report, &common.out.join("calibration.json"))
}

#[derive(Debug, Serialize)]
struct TestFileReport {
    data: PathBuf,
    p: usize,
    n: usize,
    level: f64,
    moments: MomentProfile,
    raw: RawStatistics,
    tests: Vec<TestReport>,
}

fn resolve(config_path: &Path, data: &Path) -> PathBuf {
    if data.is_absolute() {
        return data.to_path_buf();
    }
    config_path
        .parent()
        .map_or_else(|| data.to_path_buf(), |dir| dir.join(data))
}

pub fn test(common: &Common) -> Result<(), CliError> {
    no_seed(common, "test")?;
    let cfg: TestConfig = config::load(&common.config)?;
    check_level(cfg.level)?;
    let moments = MomentProfile::new(cfg.moments.alpha_x, cfg.moments.beta_x)?;
    let path = resolve(&common.config, &cfg.data);
    let data = ingest::read_data(&path, cfg.format).map_err(|e| match e {
        Error::Io(io) => CliError::Validation(format!("cannot read {}: {io}", path.display())),
        other => CliError::Validation(format!("{}: {other}", path.display())),
    })?;
    for (name, declared, actual) in [("p", cfg.p, data.p()), ("n", cfg.n, data.n())] {
        if let Some(d) = declared {
            if d != actual {
                return Err(CliError::Validation(format!(
                    "{name}: config declares {d} but the data has {actual}"
                )));
            }
        }
    }
    let ratios = AspectRatio::null(data.p(), data.n())?;
    let spectrum = spectra::eigen_spectrum(&spectra::sample_covariance(&data))?;
    let raw = spectra::raw_statistics(&spectrum);
    let tests = TestKind::ALL
        .iter()
        .map(|&kind| {
            let cal = calibration::null_calibration(kind, &ratios, &moments)?;
            calibration::test_statistic(kind.raw(&raw), &cal, cfg.level)
        })
        .collect::<Result<Vec<_>, Error>>()?;

    match cfg.output {
        ReportFormat::Json => write_json(
            &TestFileReport {
                data: path,
                p: data.p(),
                n: data.n(),
                level: cfg.level,
                moments,
                raw,
                tests,
            },
            &common.out.join("test_report.json"),
        ),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(common.out.join("test_report.csv"))?;
            w.write_record(["statistic", "raw", "z", "p_value", "critical", "reject", "level"])?;
            for t in &tests {
                w.write_record([
                    t.kind.name().to_string(),
                    fmt(t.raw),
                    fmt(t.z),
                    fmt(t.p_value),
                    fmt(t.critical),
                    t.reject.to_string(),
                    fmt(t.level),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

pub fn simulate(common: &Common) -> Result<(), CliError> {
    let mut cfg: ExperimentConfig = config::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let report = sim::run_experiment(&cfg)?;
    sim::write_report_json(&report, &common.out.join("summary.json"))?;
    sim::write_qq_csv(&report, &common.out.join("qq.csv"))?;
    sim::write_histogram_csv(&report, &common.out.join("histogram.csv"))?;
    Ok(())
}

pub fn power(common: &Common) -> Result<(), CliError> {
    no_seed(common, "power")?;
    let cfg: PowerConfig = config::load(&common.config)?;
    check_level(cfg.level)?;
    let moments = MomentProfile::new(cfg.moments.alpha_x, cfg.moments.beta_x)?;
    AspectRatio::null(cfg.p, cfg.n)?;
    let z = calibration::normal_upper_quantile(cfg.level)?;

    let mut rows = Vec::with_capacity(cfg.alphas.len());
    for alpha in &cfg.alphas {
        let row: Vec<String> = match alpha {
            None => {
                let mut row = vec![String::new()];
                row.extend(std::iter::repeat(fmt(cfg.level)).take(4));
                row.extend(std::iter::repeat(fmt(-z)).take(4));
                row
            }
            Some(alpha) => {
                let ratios = AspectRatio::new(cfg.p, cfg.n, 1)?;
                let spikes = SpikeSpec::new(
                    vec![SpikeGroup {
                        alpha: *alpha,
                        multiplicity: 1,
                    }],
                    spectra::SpikeBasis::Standard,
                )?;
                let mut row = vec![fmt(*alpha)];
                for kind in TestKind::ALL {
                    row.push(fmt(calibration::power(kind, &ratios, &spikes, &moments, cfg.level)?.power));
                }
                let panel = calibration::kappa_panel(&ratios, &spikes, &moments, cfg.level)?;
                row.extend([panel.kappa_u, panel.kappa_w, panel.kappa_v].map(fmt));
                row.push(panel.kappa_r.map(fmt).unwrap_or_default());
                row
            }
        };
        rows.push(row);
    }

    let mut w = csv::Writer::from_path(common.out.join("power.csv"))?;
    w.write_record([
        "alpha", "power_U", "power_W", "power_V", "power_R", "kappa_U", "kappa_W", "kappa_V",
        "kappa_R",
    ])?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

const QUANTITIES: [&str; 13] = [
    "u_i1", "u_i2", "u_j1", "u_j2", "v_i1", "v_i2", "v_j1", "v_j2", "u_center", "v_center",
    "u_extra", "w_extra", "v_extra",
];

fn tolerance(quantity: &str) -> f64 {
    match quantity {
        "u_center" | "v_center" | "w_extra" => 1e-8,
        _ => 1e-6,
    }
}

#[derive(Debug, Serialize)]
struct CheckRow {
    quantity: String,
    c: f64,
    closed_form: Option<f64>,
    oracle: Option<f64>,
    abs_diff: Option<f64>,
    tolerance: f64,
    pass: bool,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct CheckReport {
    quadrature: QuadPolicy,
    series: SeriesPolicy,
    rows: Vec<CheckRow>,
    passed: usize,
    failed: usize,
    all_pass: bool,
}

fn pick(s: &SeriesConstants, field: &str) -> f64 {
    match field {
        "i1" => s.i1,
        "i2" => s.i2,
        "j1" => s.j1,
        _ => s.j2,
    }
}

/// Closed form and oracle value of one quantity at one ratio.
fn compare(quantity: &str, c: f64, quad: &QuadPolicy, series: &SeriesPolicy) -> Result<(f64, f64), Error> {
    let (family, field) = quantity.split_once('_').expect("quantity names contain '_'");
    match (family, field) {
        ("u", "center") => Ok((
            mp::ct_value(c)?,
            oracle::mp_expectation(MpKernel::Log1p, c, quad)?.re,
        )),
        ("v", "center") => Ok((
            mp::v_center(c)?,
            oracle::mp_expectation(MpKernel::Ratio, c, quad)?.re,
        )),
        (f, "extra") => {
            let closed = mp::extra_terms(c, 1)?;
            let (value, kind) = match f {
                "u" => (closed.u, ExtraKind::U),
                "w" => (closed.w, ExtraKind::W),
                _ => (closed.v, ExtraKind::V),
            };
            Ok((value, oracle::extra_term_num(kind, c, quad)?))
        }
        ("u", f) => Ok((
            pick(&mp::series_constants_u(c, series)?, f),
            pick(&oracle::contour_series_u(c, quad)?.real(), f),
        )),
        (_, f) => Ok((
            pick(&mp::series_constants_v(c, series)?, f),
            pick(&oracle::contour_series_v(c, quad)?.real(), f),
        )),
    }
}

pub fn oracle_check(common: &Common) -> Result<(), CliError> {
    no_seed(common, "oracle-check")?;
    let cfg: OracleCheckConfig = config::load(&common.config)?;
    cfg.quadrature.validate()?;
    if let Some(bad) = cfg.c_grid.iter().find(|&&c| !(c > 0.0 && c < 1.0)) {
        return Err(CliError::Validation(format!("c_grid: {bad} outside (0, 1)")));
    }
    let selected: Vec<&str> = match &cfg.quantities {
        None => QUANTITIES.to_vec(),
        Some(names) => names
            .iter()
            .map(|name| {
                QUANTITIES
                    .iter()
                    .find(|q| **q == name.as_str())
                    .copied()
                    .ok_or_else(|| {
                        CliError::Validation(format!(
                            "quantities: unknown `{name}` (expected one of {})",
                            QUANTITIES.join(", ")
                        ))
                    })
            })
            .collect::<Result<_, _>>()?,
    };
    let series = SeriesPolicy::default();
    let mut rows = Vec::new();
    for &c in &cfg.c_grid {
        for &quantity in &selected {
            let tol = tolerance(quantity);
            let row = match compare(quantity, c, &cfg.quadrature, &series) {
                Ok((closed, num)) => {
                    let diff = (closed - num).abs();
                    CheckRow {
                        quantity: quantity.into(),
                        c,
                        closed_form: Some(closed),
                        oracle: Some(num),
                        abs_diff: Some(diff),
                        tolerance: tol,
                        pass: diff <= tol,
                        error: None,
                    }
                }
                Err(e) => CheckRow {
                    quantity: quantity.into(),
                    c,
                    closed_form: None,
                    oracle: None,
                    abs_diff: None,
                    tolerance: tol,
                    pass: false,
                    error: Some(e.to_string()),
                },
            };
            println!(
                "{:<9} c={:<5} diff={:<12} tol={:e} {}",
                row.quantity,
                c,
                row.abs_diff.map_or_else(|| "error".into(), |d| format!("{d:.3e}")),
                tol,
                if row.pass { "PASS" } else { "FAIL" }
            );
            rows.push(row);
        }
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    let failed = rows.len() - passed;
    let report = CheckReport {
        quadrature: cfg.quadrature,
        series,
        rows,
        passed,
        failed,
        all_pass: failed == 0,
    };
    write_json(&report, &common.out.join("oracle_check.json"))?;
    if failed > 0 {
        return Err(CliError::Check(format!("{failed} of {} comparisons failed", passed + failed)));
    }
    Ok(())
}
