//! Out-of-sample error panels and the bias statistics computed from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{MonthlySeries, YearMonth};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

/// Forecasts and realized values issued at one origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginRecord {
    /// Last observed month.
    pub origin: YearMonth,
    /// `forecast[k - 1]` targets `origin + k`.
    pub forecast: Vec<f64>,
    pub observed: Vec<f64>,
}

impl OriginRecord {
    /// `ε̂_{t,k}` = forecast - observed, for `k` 1-based.
    pub fn error(&self, k: usize) -> Option<f64> {
        (k >= 1 && k <= self.forecast.len()).then(|| self.forecast[k - 1] - self.observed[k - 1])
    }

    pub fn horizon(&self) -> usize {
        self.forecast.len()
    }
}

/// k-step errors of one forecaster on one subsystem, ordered by origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPanel {
    pub forecaster: String,
    pub subsystem: String,
    pub horizon: usize,
    pub records: Vec<OriginRecord>,
}

impl ErrorPanel {
    pub fn new(forecaster: impl Into<String>, subsystem: impl Into<String>, horizon: usize) -> Self {
        Self {
            forecaster: forecaster.into(),
            subsystem: subsystem.into(),
            horizon,
            records: Vec::new(),
        }
    }

    /// Builds a panel from a matrix of errors, `errors[origin][k - 1]`, with
    /// zero forecasts. Useful when only errors are known.
    pub fn from_errors(start: YearMonth, errors: &[Vec<f64>]) -> Self {
        let horizon = errors.iter().map(Vec::len).max().unwrap_or(0);
        let records = errors
            .iter()
            .enumerate()
            .map(|(i, e)| OriginRecord {
                origin: start.add_months(i as i64),
                forecast: e.clone(),
                observed: vec![0.0; e.len()],
            })
            .collect();
        Self {
            forecaster: String::new(),
            subsystem: String::new(),
            horizon,
            records,
        }
    }

    /// Time-ordered `ε̂_{·,k}`.
    pub fn errors(&self, k: usize) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.error(k)).collect()
    }

    /// `n_k`.
    pub fn count(&self, k: usize) -> usize {
        self.records.iter().filter(|r| r.horizon() >= k).count()
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k < 1 || k > self.horizon {
            return Err(Error::InvalidArgument(format!(
                "horizon {k} outside 1..={}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// `Δ_k`: mean k-step error.
pub fn bias(panel: &ErrorPanel, k: usize) -> Result<f64> {
    panel.check_k(k)?;
    let e = panel.errors(k);
    if e.is_empty() {
        return Err(Error::InsufficientData(format!("no {k}-step errors")));
    }
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// Sample autocovariance with divisor `n`.
pub fn autocovariance(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    (0..n - lag).map(|t| (x[t] - mean) * (x[t + lag] - mean)).sum::<f64>() / n as f64
}

/// `Σ_{|h| < √n} (1 - |h|/√n) γ̂(h)`. Returns the estimate and whether it
/// was negative and replaced by `γ̂(0)`.
pub fn long_run_variance(x: &[f64]) -> (f64, bool) {
    let root = (x.len() as f64).sqrt();
    let mut v = autocovariance(x, 0);
    let mut h = 1;
    while (h as f64) < root && h < x.len() {
        v += 2.0 * (1.0 - h as f64 / root) * autocovariance(x, h);
        h += 1;
    }
    if v < 0.0 {
        (autocovariance(x, 0), true)
    } else {
        (v, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasInterval {
    pub bias: f64,
    pub low: f64,
    pub high: f64,
    /// `v̂_k`.
    pub long_run_variance: f64,
    /// `v̂_k` came out negative and `γ̂(0)` was used instead.
    pub fallback: bool,
}

/// Bias with its 95% interval `Δ_k ± 1.96 √(v̂_k / n_k)`.
pub fn bias_ci(panel: &ErrorPanel, k: usize) -> Result<BiasInterval> {
    panel.check_k(k)?;
    let e = panel.errors(k);
    if e.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{k}-step interval needs at least 4 errors, have {}",
            e.len()
        )));
    }
    let n = e.len() as f64;
    let b = e.iter().sum::<f64>() / n;
    let (v, fallback) = long_run_variance(&e);
    let half = Z_95 * (v / n).sqrt();
    Ok(BiasInterval {
        bias: b,
        low: b - half,
        high: b + half,
        long_run_variance: v,
        fallback,
    })
}

/// Per-origin `ε̂_{t,[K]} = Σ_{k=1..K} ε̂_{t,k}`, for origins with all `K`
/// horizons realized.
pub fn cumulative_errors(panel: &ErrorPanel, horizon: usize) -> Vec<(YearMonth, f64)> {
    panel
        .records
        .iter()
        .filter(|r| horizon >= 1 && r.horizon() >= horizon)
        .map(|r| {
            let mut acc = 0.0;
            for k in 1..=horizon {
                acc += r.error(k).unwrap();
            }
            (r.origin, acc)
        })
        .collect()
}

/// Mean over qualifying origins of the cumulative `K`-step error.
pub fn cumulative_bias(panel: &ErrorPanel, horizon: usize) -> Result<f64> {
    let c = cumulative_errors(panel, horizon);
    if c.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no origin has all {horizon} horizons realized"
        )));
    }
    Ok(c.iter().map(|(_, e)| e).sum::<f64>() / c.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PctBiasDefinition {
    /// `Δ_k / mean(observed targets)`.
    #[default]
    RatioOfMeans,
    /// `mean(ε̂_{t,k} / y_{t+k})`.
    MeanOfRatios,
}

/// Bias as a percentage of the observed values it targets.
pub fn pct_bias(panel: &ErrorPanel, observed: &MonthlySeries, k: usize, definition: PctBiasDefinition) -> Result<f64> {
    panel.check_k(k)?;
    let mut pairs = Vec::new();
    for r in &panel.records {
        if let Some(e) = r.error(k) {
            let target = r.origin.add_months(k as i64);
            let y = observed.get(target).ok_or_else(|| {
                Error::InsufficientData(format!("no observation for {target} in {}", observed.label()))
            })?;
            pairs.push((e, y));
        }
    }
    pct_from_pairs(&pairs, definition)
}

/// Same as [`pct_bias`] using the observations stored in the panel.
pub fn pct_bias_recorded(panel: &ErrorPanel, k: usize, definition: PctBiasDefinition) -> Result<f64> {
    panel.check_k(k)?;
    let pairs: Vec<(f64, f64)> = panel
        .records
        .iter()
        .filter_map(|r| r.error(k).map(|e| (e, r.observed[k - 1])))
        .collect();
    pct_from_pairs(&pairs, definition)
}

fn pct_from_pairs(pairs: &[(f64, f64)], definition: PctBiasDefinition) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no errors at this horizon".into()));
    }
    let n = pairs.len() as f64;
    let pct = match definition {
        PctBiasDefinition::RatioOfMeans => {
            let mean_obs = pairs.iter().map(|p| p.1).sum::<f64>() / n;
            if mean_obs == 0.0 {
                return Err(Error::InvalidArgument("mean observed value is zero".into()));
            }
            pairs.iter().map(|p| p.0).sum::<f64>() / n / mean_obs
        }
        PctBiasDefinition::MeanOfRatios => {
            if pairs.iter().any(|p| p.1 == 0.0) {
                return Err(Error::InvalidArgument("observed value is zero".into()));
            }
            pairs.iter().map(|p| p.0 / p.1).sum::<f64>() / n
        }
    };
    Ok(100.0 * pct)
}

/// One row of a bias report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonStats {
    pub k: usize,
    pub n: usize,
    pub bias: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub pct_bias: f64,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub forecaster: String,
    pub subsystem: String,
    pub rows: Vec<HorizonStats>,
    /// Mean cumulative error over `cumulative_horizon` steps, if any origin
    /// qualifies.
    pub cumulative_bias: Option<f64>,
    pub cumulative_horizon: usize,
}

impl BiasReport {
    /// Report for every horizon with at least 4 errors.
    pub fn from_panel(panel: &ErrorPanel, definition: PctBiasDefinition) -> Result<Self> {
        let mut rows = Vec::new();
        for k in 1..=panel.horizon {
            if panel.count(k) < 4 {
                continue;
            }
            let ci = bias_ci(panel, k)?;
            if ci.fallback {
                log::warn!(
                    "{}/{}: negative long-run variance at k = {k}, using the sample variance",
                    panel.forecaster,
                    panel.subsystem
                );
            }
            rows.push(HorizonStats {
                k,
                n: panel.count(k),
                bias: ci.bias,
                ci_low: ci.low,
                ci_high: ci.high,
                pct_bias: pct_bias_recorded(panel, k, definition)?,
                fallback: ci.fallback,
            });
        }
        Ok(Self {
            forecaster: panel.forecaster.clone(),
            subsystem: panel.subsystem.clone(),
            rows,
            cumulative_bias: cumulative_bias(panel, panel.horizon).ok(),
            cumulative_horizon: panel.horizon,
        })
    }

    pub fn row(&self, k: usize) -> Option<&HorizonStats> {
        self.rows.iter().find(|r| r.k == k)
    }
}
