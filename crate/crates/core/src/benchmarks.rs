//! The forecaster family evaluated by the backtest harness: the official
//! PAR(p)/PAR(p)-A models and the benchmark variants built around them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parp::{
    fit_periodic, point_forecast, select_orders, EstimationMethod, FitOptions, PeriodicModel, DEFAULT_MAX_ORDER,
};
use crate::scenario::{build_correlation, ResidualSeries, Simulator};
use crate::series::{MonthlySeries, MONTHS};

pub const DEFAULT_ALTM_WINDOW: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecasterKind {
    OfficialParpa,
    OfficialParp,
    SeasonalNaive,
    WindowedParpa,
    WeightedParpa,
    AltmParpa,
    /// Diagnostic only: returns the realized future. Never use for reporting.
    PerfectForesight,
}

/// A forecaster and its variant parameter, e.g. `windowed_parpa:J=30`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterSpec {
    pub kind: ForecasterKind,
    /// Estimation window in years (`WindowedParpa`).
    pub window_years: Option<usize>,
    /// Weight on the last 12 months' squared errors (`WeightedParpa`).
    pub recent_weight: Option<f64>,
    /// Log moving-average length (`AltmParpa`).
    pub altm_window: Option<usize>,
}

impl ForecasterSpec {
    pub fn new(kind: ForecasterKind) -> Result<Self> {
        let spec = Self {
            kind,
            window_years: None,
            recent_weight: None,
            altm_window: (kind == ForecasterKind::AltmParpa).then_some(DEFAULT_ALTM_WINDOW),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn windowed(years: usize) -> Self {
        Self {
            kind: ForecasterKind::WindowedParpa,
            window_years: Some(years),
            recent_weight: None,
            altm_window: None,
        }
    }

    pub fn weighted(w: f64) -> Self {
        Self {
            kind: ForecasterKind::WeightedParpa,
            window_years: None,
            recent_weight: Some(w),
            altm_window: None,
        }
    }

    pub fn altm(window: usize) -> Self {
        Self {
            kind: ForecasterKind::AltmParpa,
            window_years: None,
            recent_weight: None,
            altm_window: Some(window),
        }
    }

    pub fn validate(&self) -> Result<()> {
        use ForecasterKind::*;
        let bad = |msg: &str| Err(Error::Config(format!("{self}: {msg}")));
        if self.window_years.is_some() != (self.kind == WindowedParpa) {
            return bad("window length J is required for, and only for, windowed_parpa");
        }
        if self.recent_weight.is_some() != (self.kind == WeightedParpa) {
            return bad("weight w is required for, and only for, weighted_parpa");
        }
        if self.altm_window.is_some() && self.kind != AltmParpa {
            return bad("window M applies only to altm_parpa");
        }
        if self.window_years == Some(0) {
            return bad("J must be at least 1");
        }
        if let Some(w) = self.recent_weight {
            if !(w > 1.0 && w.is_finite()) {
                return bad("w must be greater than 1");
            }
        }
        if self.altm_window == Some(0) {
            return bad("M must be at least 1");
        }
        Ok(())
    }

    /// File-name friendly identifier.
    pub fn slug(&self) -> String {
        use ForecasterKind::*;
        match self.kind {
            OfficialParpa => "official_parpa".into(),
            OfficialParp => "official_parp".into(),
            SeasonalNaive => "seasonal_naive".into(),
            WindowedParpa => format!("windowed_parpa_J{}", self.window_years.unwrap_or(0)),
            WeightedParpa => format!("weighted_parpa_w{}", self.recent_weight.unwrap_or(0.0)),
            AltmParpa => format!("altm_parpa_M{}", self.altm_window.unwrap_or(DEFAULT_ALTM_WINDOW)),
            PerfectForesight => "perfect_foresight".into(),
        }
    }

    /// Row label in the summary tables.
    pub fn label(&self) -> String {
        use ForecasterKind::*;
        match self.kind {
            OfficialParpa => "Official PARp-A".into(),
            OfficialParp => "Official PARp".into(),
            SeasonalNaive => "Seasonal Naive".into(),
            WindowedParpa => format!("PARp-A (J = {})", self.window_years.unwrap_or(0)),
            WeightedParpa => format!("PARp-A (w = {})", self.recent_weight.unwrap_or(0.0)),
            AltmParpa => "ALTM PARp-A".into(),
            PerfectForesight => "Perfect foresight".into(),
        }
    }
}

impl fmt::Display for ForecasterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ForecasterKind::*;
        let name = match self.kind {
            OfficialParpa => "official_parpa",
            OfficialParp => "official_parp",
            SeasonalNaive => "seasonal_naive",
            WindowedParpa => "windowed_parpa",
            WeightedParpa => "weighted_parpa",
            AltmParpa => "altm_parpa",
            PerfectForesight => "perfect_foresight",
        };
        f.write_str(name)?;
        if let Some(j) = self.window_years {
            write!(f, ":J={j}")?;
        }
        if let Some(w) = self.recent_weight {
            write!(f, ":w={w}")?;
        }
        if let Some(m) = self.altm_window {
            write!(f, ":M={m}")?;
        }
        Ok(())
    }
}

impl FromStr for ForecasterSpec {
    type Err = Error;

    /// `kind[:KEY=VALUE]...`, e.g. `weighted_parpa:w=4`.
    fn from_str(s: &str) -> Result<Self> {
        use ForecasterKind::*;
        let mut parts = s.trim().split(':');
        let kind = match parts.next().unwrap_or_default() {
            "official_parpa" => OfficialParpa,
            "official_parp" => OfficialParp,
            "seasonal_naive" => SeasonalNaive,
            "windowed_parpa" => WindowedParpa,
            "weighted_parpa" => WeightedParpa,
            "altm_parpa" => AltmParpa,
            "perfect_foresight" => PerfectForesight,
            other => return Err(Error::Config(format!("unknown forecaster {other:?}"))),
        };
        let mut spec = Self {
            kind,
            window_years: None,
            recent_weight: None,
            altm_window: None,
        };
        for kv in parts {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected KEY=VALUE in {s:?}")))?;
            let num_err = || Error::Config(format!("bad value for {k} in {s:?}"));
            match k {
                "J" => spec.window_years = Some(v.parse().map_err(|_| num_err())?),
                "w" => spec.recent_weight = Some(v.parse().map_err(|_| num_err())?),
                "M" => spec.altm_window = Some(v.parse().map_err(|_| num_err())?),
                _ => return Err(Error::Config(format!("unknown parameter {k:?} in {s:?}"))),
            }
        }
        if kind == AltmParpa && spec.altm_window.is_none() {
            spec.altm_window = Some(DEFAULT_ALTM_WINDOW);
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// How a fitted periodic model is turned into a point forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum PointForecast {
    /// Average of `scenarios` simulated paths.
    ScenarioMean { scenarios: usize },
    /// Zero-noise recursion.
    Deterministic,
}

/// Estimation settings shared by every PAR-family forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationSettings {
    pub max_order: usize,
    pub method: EstimationMethod,
    pub point_forecast: PointForecast,
    /// Months between the forecast origin and the last observation used for
    /// parameter estimation. The forecast is still conditioned on data up to
    /// the origin.
    pub estimation_lag: usize,
}

impl Default for EstimationSettings {
    fn default() -> Self {
        Self {
            max_order: DEFAULT_MAX_ORDER,
            method: EstimationMethod::YuleWalker,
            point_forecast: PointForecast::ScenarioMean { scenarios: 2000 },
            estimation_lag: 0,
        }
    }
}

/// Forecast for `origin + k`, `k = 1..=horizon`: the last observed value of
/// the same calendar month.
pub fn seasonal_naive_forecast(history: &MonthlySeries, horizon: usize) -> Result<Vec<f64>> {
    if horizon < 1 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if history.len() < MONTHS {
        return Err(Error::InsufficientData(format!(
            "seasonal naive needs at least {MONTHS} months, {} has {}",
            history.label(),
            history.len()
        )));
    }
    let last_year = &history.values()[history.len() - MONTHS..];
    Ok((0..horizon).map(|k| last_year[k % MONTHS]).collect())
}

fn fit_official(series: &MonthlySeries, settings: &EstimationSettings, opts: FitOptions) -> Result<PeriodicModel> {
    let orders = select_orders(series, settings.max_order)?;
    fit_periodic(series, &orders, &opts)
}

/// PAR(p)-A as estimated officially: orders by PACF, all data.
pub fn official_fit(series: &MonthlySeries, settings: &EstimationSettings) -> Result<PeriodicModel> {
    fit_official(series, settings, FitOptions::parpa(settings.method))
}

/// PAR(p)-A on the last `years` years of `series`; `None` keeps everything.
pub fn windowed_fit(
    series: &MonthlySeries,
    years: Option<usize>,
    settings: &EstimationSettings,
) -> Result<PeriodicModel> {
    official_fit(&window_suffix(series, years)?, settings)
}

fn window_suffix(series: &MonthlySeries, years: Option<usize>) -> Result<MonthlySeries> {
    match years {
        Some(0) => Err(Error::InvalidArgument("window must be at least 1 year".into())),
        Some(j) if j.saturating_mul(MONTHS) < series.len() => {
            series.from_date(series.end().add_months(1 - (j * MONTHS) as i64))
        }
        _ => Ok(series.clone()),
    }
}

/// PAR(p)-A by weighted least squares, weight `w` on the squared residuals
/// of the last 12 months.
pub fn weighted_fit(series: &MonthlySeries, w: f64, settings: &EstimationSettings) -> Result<PeriodicModel> {
    if !(w > 1.0 && w.is_finite()) {
        return Err(Error::InvalidArgument(format!("recency weight must exceed 1, got {w}")));
    }
    let opts = FitOptions {
        recent_weight: Some(w),
        ..FitOptions::parpa(EstimationMethod::LeastSquares)
    };
    fit_official(series, settings, opts)
}

/// Re-anchors the local level of `ln y` to its most recent value:
/// `z̃_t = z_t - A_t + A_T` with `A_t` the mean of the last `window` log
/// values up to and including `t` (a shorter prefix for `t < window - 1`).
pub fn altm_transform(series: &MonthlySeries, window: usize) -> Result<MonthlySeries> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    if series.len() <= window {
        return Err(Error::InsufficientData(format!(
            "ALTM needs more than {window} observations, {} has {}",
            series.label(),
            series.len()
        )));
    }
    let z: Vec<f64> = series.values().iter().map(|y| y.ln()).collect();
    // Means are taken relative to the window's first element so that a
    // constant window yields its value exactly.
    let mean = |w: &[f64]| w[0] + w.iter().map(|v| v - w[0]).sum::<f64>() / w.len() as f64;
    let anchor = mean(&z[z.len() - window..]);
    let adjusted = series
        .values()
        .iter()
        .enumerate()
        .map(|(t, y)| y * (anchor - mean(&z[(t + 1).saturating_sub(window)..=t])).exp())
        .collect();
    series.with_values(adjusted)
}

/// PAR(p)-A fitted on the ALTM-adjusted series.
pub fn altm_fit(series: &MonthlySeries, window: usize, settings: &EstimationSettings) -> Result<PeriodicModel> {
    official_fit(&altm_transform(series, window)?, settings)
}

/// Anything that maps histories ending at a common origin to forecasts.
pub trait Forecaster: Send + Sync {
    fn id(&self) -> String;

    /// Forecasts `origin + 1 ..= origin + horizon` for every subsystem;
    /// `result[s][k - 1]`. `seed` drives any simulation.
    fn forecast(&self, histories: &[MonthlySeries], horizon: usize, seed: u64) -> Result<Vec<Vec<f64>>>;
}

/// The configured forecasters of [`ForecasterKind`], other than the
/// perfect-foresight diagnostic.
#[derive(Debug, Clone)]
pub struct ModelForecaster {
    pub spec: ForecasterSpec,
    pub settings: EstimationSettings,
}

impl ModelForecaster {
    pub fn new(spec: ForecasterSpec, settings: EstimationSettings) -> Result<Self> {
        spec.validate()?;
        if spec.kind == ForecasterKind::PerfectForesight {
            return Err(Error::Config(
                "perfect_foresight needs the realized data; build it with PerfectForesight".into(),
            ));
        }
        Ok(Self { spec, settings })
    }

    /// Fits one subsystem. Returns the model and the series it was fitted on
    /// and should be conditioned on (transformed for ALTM).
    pub fn fit(&self, history: &MonthlySeries) -> Result<(PeriodicModel, MonthlySeries, MonthlySeries)> {
        use ForecasterKind::*;
        let lag = self.settings.estimation_lag as i64;
        let condition = match self.spec.kind {
            AltmParpa => altm_transform(history, self.spec.altm_window.unwrap_or(DEFAULT_ALTM_WINDOW))?,
            _ => history.clone(),
        };
        let estimation = condition.up_to(condition.end().add_months(-lag))?;
        let s = &self.settings;
        let model = match self.spec.kind {
            OfficialParpa | AltmParpa => official_fit(&estimation, s)?,
            OfficialParp => fit_official(&estimation, s, FitOptions::parp(s.method))?,
            WindowedParpa => windowed_fit(&estimation, self.spec.window_years, s)?,
            WeightedParpa => weighted_fit(&estimation, self.spec.recent_weight.unwrap_or(0.0), s)?,
            SeasonalNaive | PerfectForesight => {
                return Err(Error::InvalidArgument(format!("{} has no model to fit", self.spec)))
            }
        };
        let fitted_on = match self.spec.kind {
            WindowedParpa => window_suffix(&estimation, self.spec.window_years)?,
            _ => estimation,
        };
        Ok((model, fitted_on, condition))
    }
}

impl Forecaster for ModelForecaster {
    fn id(&self) -> String {
        self.spec.slug()
    }

    fn forecast(&self, histories: &[MonthlySeries], horizon: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if self.spec.kind == ForecasterKind::SeasonalNaive {
            return histories.iter().map(|h| seasonal_naive_forecast(h, horizon)).collect();
        }
        let mut models = Vec::with_capacity(histories.len());
        let mut fitted = Vec::with_capacity(histories.len());
        let mut conditions = Vec::with_capacity(histories.len());
        for h in histories {
            let (model, fit_series, condition) = self.fit(h)?;
            models.push(model);
            fitted.push(fit_series);
            conditions.push(condition);
        }
        let out = match self.settings.point_forecast {
            PointForecast::Deterministic => models
                .iter()
                .zip(&conditions)
                .map(|(m, c)| point_forecast(m, c, horizon))
                .collect::<Result<Vec<_>>>()?,
            PointForecast::ScenarioMean { scenarios } => {
                let residuals = models
                    .iter()
                    .zip(&fitted)
                    .map(|(m, f)| ResidualSeries::from_model(m, f))
                    .collect::<Result<Vec<_>>>()?;
                let corr = build_correlation(&residuals)?;
                Simulator::new(&models, &conditions, &corr)?
                    .run(horizon, scenarios, seed)?
                    .mean_forecast()
            }
        };
        check_output(&self.id(), &out)?;
        Ok(out)
    }
}

pub(crate) fn check_output(id: &str, forecasts: &[Vec<f64>]) -> Result<()> {
    for f in forecasts {
        if let Some(&value) = f.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidForecast {
                id: id.to_string(),
                value,
            });
        }
    }
    Ok(())
}
