//! Run configuration and the end-to-end evaluation pipeline.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backtest::{rolling_backtest, EvaluationSpan, OriginFailure, PerfectForesight};
use crate::benchmarks::{
    EstimationSettings, Forecaster, ForecasterKind, ForecasterSpec, ModelForecaster, PointForecast,
};
use crate::error::{Error, Result};
use crate::io::{ingest_csv, ColumnMap};
use crate::metrics::{BiasReport, ErrorPanel, PctBiasDefinition};
use crate::parp::{EstimationMethod, PeriodicModel, DEFAULT_MAX_ORDER};
use crate::report::{write_bias_csv, write_error_panel, write_summary_csv, SummaryEntry};
use crate::scenario::{build_correlation, ResidualSeries, ScenarioPanel, Simulator};
use crate::series::{MonthlySeries, YearMonth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointForecastMode {
    #[default]
    ScenarioMean,
    Deterministic,
}

/// Flat run configuration, loadable from TOML. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `"LABEL=path"` entries, or bare paths whose file names the subsystem.
    pub data: Vec<String>,
    pub date_column: String,
    pub value_column: String,
    pub subsystem_column: String,
    /// First 1-step-ahead target month.
    pub span_start: YearMonth,
    /// Last target month scored.
    pub span_end: YearMonth,
    /// Maximum lead time scored, K.
    pub horizon: usize,
    /// Scenario horizon of the operational setting; must be at least `horizon`.
    pub simulation_horizon: usize,
    pub scenarios: usize,
    pub seed: u64,
    pub forecasters: Vec<String>,
    pub estimation_lag: usize,
    pub max_order: usize,
    pub method: EstimationMethod,
    pub point_forecast: PointForecastMode,
    pub pct_bias: PctBiasDefinition,
    /// Months of data required before the first origin.
    pub min_training_months: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: Vec::new(),
            date_column: "date".into(),
            value_column: "value".into(),
            subsystem_column: "subsystem".into(),
            span_start: YearMonth::new(2011, 1).unwrap(),
            span_end: YearMonth::new(2024, 9).unwrap(),
            horizon: 24,
            simulation_horizon: 60,
            scenarios: 2000,
            seed: 20240901,
            forecasters: vec!["official_parpa".into()],
            estimation_lag: 0,
            max_order: DEFAULT_MAX_ORDER,
            method: EstimationMethod::YuleWalker,
            point_forecast: PointForecastMode::ScenarioMean,
            pct_bias: PctBiasDefinition::RatioOfMeans,
            min_training_months: 120,
            output_dir: PathBuf::from("output"),
        }
    }
}

/// One `data` entry after parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSource {
    pub label: Option<String>,
    pub path: PathBuf,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a TOML file; relative data paths and output directory are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.data = cfg
            .data
            .iter()
            .map(|entry| {
                let src = parse_data_entry(entry);
                let p = if src.path.is_relative() {
                    base.join(&src.path)
                } else {
                    src.path
                };
                match src.label {
                    Some(l) => format!("{l}={}", p.display()),
                    None => p.display().to_string(),
                }
            })
            .collect();
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn columns(&self) -> ColumnMap {
        ColumnMap {
            date: self.date_column.clone(),
            value: self.value_column.clone(),
            subsystem: self.subsystem_column.clone(),
        }
    }

    pub fn sources(&self) -> Vec<DataSource> {
        self.data.iter().map(|d| parse_data_entry(d)).collect()
    }

    pub fn forecaster_specs(&self) -> Result<Vec<ForecasterSpec>> {
        self.forecasters.iter().map(|f| f.parse()).collect()
    }

    pub fn settings(&self) -> EstimationSettings {
        EstimationSettings {
            max_order: self.max_order,
            method: self.method,
            point_forecast: match self.point_forecast {
                PointForecastMode::ScenarioMean => PointForecast::ScenarioMean {
                    scenarios: self.scenarios,
                },
                PointForecastMode::Deterministic => PointForecast::Deterministic,
            },
            estimation_lag: self.estimation_lag,
        }
    }

    pub fn span(&self) -> Result<EvaluationSpan> {
        EvaluationSpan::new(self.span_start, self.span_end).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        if self.data.is_empty() {
            return Err(Error::Config("no data files given".into()));
        }
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.horizon > self.simulation_horizon {
            return Err(Error::Config(format!(
                "horizon {} exceeds the simulation horizon {}",
                self.horizon, self.simulation_horizon
            )));
        }
        if self.scenarios < 1 {
            return Err(Error::Config("scenarios must be at least 1".into()));
        }
        if self.max_order < 1 {
            return Err(Error::Config("max_order must be at least 1".into()));
        }
        if self.forecasters.is_empty() {
            return Err(Error::Config("no forecasters given".into()));
        }
        let specs = self.forecaster_specs()?;
        for (i, a) in specs.iter().enumerate() {
            if specs[..i].iter().any(|b| b.slug() == a.slug()) {
                return Err(Error::Config(format!("forecaster {a} listed twice")));
            }
        }
        self.span()?;
        Ok(())
    }

    /// Checks the data against the span and the training requirement.
    pub fn validate_data(&self, series: &[MonthlySeries]) -> Result<()> {
        let first_origin = self.span_start.add_months(-1);
        for s in series {
            let needed = s.start().add_months(self.min_training_months as i64 - 1);
            if first_origin < needed {
                return Err(Error::Config(format!(
                    "{} starts at {}; the first origin {first_origin} leaves fewer than {} training months",
                    s.label(),
                    s.start(),
                    self.min_training_months
                )));
            }
            if s.end() < self.span_end {
                return Err(Error::Config(format!(
                    "{} ends at {}, before the span end {}",
                    s.label(),
                    s.end(),
                    self.span_end
                )));
            }
        }
        for (i, a) in series.iter().enumerate() {
            if series[..i].iter().any(|b| b.label() == a.label()) {
                return Err(Error::Config(format!("subsystem {} loaded twice", a.label())));
            }
        }
        Ok(())
    }
}

fn parse_data_entry(entry: &str) -> DataSource {
    match entry.split_once('=') {
        Some((label, path)) if !label.is_empty() && !label.contains(['/', '\\']) => DataSource {
            label: Some(label.trim().to_string()),
            path: PathBuf::from(path.trim()),
        },
        _ => DataSource {
            label: None,
            path: PathBuf::from(entry.trim()),
        },
    }
}

/// Loaded input with its content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub subsystem: String,
    pub path: String,
    pub sha256: String,
    pub first: YearMonth,
    pub last: YearMonth,
    pub months: usize,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads every configured source.
pub fn load_inputs(config: &RunConfig) -> Result<(Vec<MonthlySeries>, Vec<InputRecord>)> {
    let columns = config.columns();
    let mut series = Vec::new();
    let mut records = Vec::new();
    for src in config.sources() {
        let bytes = fs::read(&src.path)?;
        let s = ingest_csv(&src.path, &columns, src.label.as_deref())?;
        records.push(InputRecord {
            subsystem: s.label().to_string(),
            path: src.path.display().to_string(),
            sha256: sha256_hex(&bytes),
            first: s.start(),
            last: s.end(),
            months: s.len(),
        });
        series.push(s);
    }
    Ok((series, records))
}

/// Builds the forecaster for `spec`. `data` is needed only by the
/// perfect-foresight diagnostic.
pub fn make_forecaster(
    spec: &ForecasterSpec,
    settings: &EstimationSettings,
    data: &[MonthlySeries],
) -> Result<Box<dyn Forecaster>> {
    Ok(match spec.kind {
        ForecasterKind::PerfectForesight => Box::new(PerfectForesight::new(data.to_vec())),
        _ => Box::new(ModelForecaster::new(spec.clone(), settings.clone())?),
    })
}

/// Per-forecaster outcome of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecasterResult {
    pub spec: ForecasterSpec,
    pub panels: Vec<ErrorPanel>,
    pub reports: Vec<BiasReport>,
    pub failures: Vec<OriginFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct OriginLog<'a> {
    forecaster: String,
    evaluated: usize,
    failures: &'a [OriginFailure],
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    inputs: &'a [InputRecord],
    origins: usize,
    forecasters: Vec<OriginLog<'a>>,
    warnings: Vec<String>,
    files: Vec<String>,
}

/// Everything a run produced, before and after writing.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub inputs: Vec<InputRecord>,
    pub results: Vec<ForecasterResult>,
    pub files: Vec<PathBuf>,
}

/// Evaluates every forecaster over the span without touching the disk.
pub fn evaluate(config: &RunConfig, series: &[MonthlySeries]) -> Result<Vec<ForecasterResult>> {
    config.validate()?;
    config.validate_data(series)?;
    let span = config.span()?;
    let settings = config.settings();
    let mut out = Vec::new();
    for spec in config.forecaster_specs()? {
        let forecaster = make_forecaster(&spec, &settings, series)?;
        log::info!("evaluating {} over {} origins", forecaster.id(), span.origin_count());
        let outcome = rolling_backtest(series, forecaster.as_ref(), span, config.horizon, config.seed)?;
        let reports = outcome
            .panels
            .iter()
            .map(|p| BiasReport::from_panel(p, config.pct_bias))
            .collect::<Result<Vec<_>>>()?;
        out.push(ForecasterResult {
            spec,
            panels: outcome.panels,
            reports,
            failures: outcome.failures,
        });
    }
    Ok(out)
}

/// Renders per-horizon, summary and error files, in a fixed order.
pub fn render_outputs(results: &[ForecasterResult], subsystems: &[String]) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for r in results {
        let slug = r.spec.slug();
        for (report, panel) in r.reports.iter().zip(&r.panels) {
            let mut buf = Vec::new();
            write_bias_csv(report, &mut buf)?;
            files.push((format!("bias_{slug}_{}.csv", report.subsystem), buf));
            let mut buf = Vec::new();
            write_error_panel(panel, &mut buf)?;
            files.push((format!("errors_{slug}_{}.csv", panel.subsystem), buf));
        }
    }
    for sub in subsystems {
        let entries: Vec<SummaryEntry<'_>> = results
            .iter()
            .filter_map(|r| {
                r.reports
                    .iter()
                    .find(|rep| &rep.subsystem == sub)
                    .map(|rep| SummaryEntry {
                        label: r.spec.label(),
                        is_reference: r.spec.kind == ForecasterKind::OfficialParpa,
                        report: rep,
                    })
            })
            .collect();
        let mut buf = Vec::new();
        write_summary_csv(&entries, &mut buf)?;
        files.push((format!("summary_{sub}.csv"), buf));
    }
    Ok(files)
}

/// Writes `files` into `dir`. If any write fails, files written so far are
/// removed.
pub fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(e.into());
        }
        written.push(path);
    }
    Ok(written)
}

/// Full pipeline: ingest, evaluate every forecaster, write reports and a
/// manifest into `config.output_dir`. Nothing is written unless every
/// forecaster produced results.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let (series, inputs) = load_inputs(config)?;
    let results = evaluate(config, &series)?;
    let subsystems: Vec<String> = series.iter().map(|s| s.label().to_string()).collect();
    let mut files = render_outputs(&results, &subsystems)?;

    let mut warnings = Vec::new();
    for r in &results {
        for rep in &r.reports {
            for row in rep.rows.iter().filter(|row| row.fallback) {
                warnings.push(format!(
                    "{}/{}: long-run variance fell back to the sample variance at k = {}",
                    rep.forecaster, rep.subsystem, row.k
                ));
            }
        }
        for f in &r.failures {
            warnings.push(format!("{}: origin {} skipped: {}", r.spec.slug(), f.origin, f.message));
        }
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config,
        inputs: &inputs,
        origins: config.span()?.origin_count(),
        forecasters: results
            .iter()
            .map(|r| OriginLog {
                forecaster: r.spec.slug(),
                evaluated: r.panels.first().map_or(0, |p| p.records.len()),
                failures: &r.failures,
            })
            .collect(),
        warnings,
        files: files.iter().map(|(n, _)| n.clone()).collect(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    files.push(("manifest.json".into(), json));

    let written = write_all(&config.output_dir, &files)?;
    Ok(RunOutcome {
        inputs,
        results,
        files: written,
    })
}

/// Re-renders reports from a previous run's `manifest.json` and stored
/// error files in `dir`, optionally with another percentage-bias
/// definition. Returns the rendered files; nothing is written.
pub fn rerender(dir: &Path, pct_bias: Option<PctBiasDefinition>) -> Result<Vec<(String, Vec<u8>)>> {
    #[derive(Deserialize)]
    struct Stored {
        config: RunConfig,
        inputs: Vec<InputRecord>,
    }
    let manifest: Stored = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    let mut config = manifest.config;
    if let Some(def) = pct_bias {
        config.pct_bias = def;
    }
    let subsystems: Vec<String> = manifest.inputs.iter().map(|i| i.subsystem.clone()).collect();
    let mut results = Vec::new();
    for spec in config.forecaster_specs()? {
        let mut panels = Vec::new();
        for sub in &subsystems {
            let path = dir.join(format!("errors_{}_{sub}.csv", spec.slug()));
            let mut found = crate::report::read_error_panels(fs::File::open(&path)?)?;
            if found.len() != 1 {
                return Err(Error::Validation {
                    row: 0,
                    message: format!("{} should hold exactly one panel", path.display()),
                });
            }
            panels.push(found.remove(0));
        }
        let reports = panels
            .iter()
            .map(|p| BiasReport::from_panel(p, config.pct_bias))
            .collect::<Result<Vec<_>>>()?;
        results.push(ForecasterResult {
            spec,
            panels,
            reports,
            failures: Vec::new(),
        });
    }
    let files = render_outputs(&results, &subsystems)?;
    Ok(files
        .into_iter()
        .filter(|(name, _)| !name.starts_with("errors_"))
        .collect())
}

/// Fits `spec` to every subsystem on data up to `origin`.
pub fn fit_at_origin(
    config: &RunConfig,
    series: &[MonthlySeries],
    spec: &ForecasterSpec,
    origin: YearMonth,
) -> Result<Vec<(PeriodicModel, MonthlySeries, MonthlySeries)>> {
    let f = ModelForecaster::new(spec.clone(), config.settings())?;
    series.iter().map(|s| s.up_to(origin).and_then(|h| f.fit(&h))).collect()
}

/// Joint scenarios from `spec` fitted at `origin`.
pub fn simulate_at_origin(
    config: &RunConfig,
    series: &[MonthlySeries],
    spec: &ForecasterSpec,
    origin: YearMonth,
    horizon: usize,
    scenarios: usize,
) -> Result<ScenarioPanel> {
    let fits = fit_at_origin(config, series, spec, origin)?;
    let residuals = fits
        .iter()
        .map(|(m, f, _)| ResidualSeries::from_model(m, f))
        .collect::<Result<Vec<_>>>()?;
    let corr = build_correlation(&residuals)?;
    let (models, conditions): (Vec<_>, Vec<_>) = fits.into_iter().map(|(m, _, c)| (m, c)).unzip();
    Simulator::new(&models, &conditions, &corr)?.run(horizon, scenarios, config.seed)
}
