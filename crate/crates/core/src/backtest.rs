//! Rolling-origin evaluation: refit at every origin on data up to that
//! origin, forecast ahead, and collect the errors per horizon.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::Forecaster;
use crate::error::{Error, Result};
use crate::metrics::{ErrorPanel, OriginRecord};
use crate::series::{MonthlySeries, YearMonth};

/// Range of 1-step-ahead target months. Origins run from the month before
/// `first_target` to the month before `last_target`, and no forecast is
/// scored past `last_target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationSpan {
    pub first_target: YearMonth,
    pub last_target: YearMonth,
}

impl EvaluationSpan {
    pub fn new(first_target: YearMonth, last_target: YearMonth) -> Result<Self> {
        if last_target < first_target {
            return Err(Error::InvalidArgument(format!(
                "evaluation span {first_target}..{last_target} is empty"
            )));
        }
        Ok(Self {
            first_target,
            last_target,
        })
    }

    pub fn origins(&self) -> impl Iterator<Item = YearMonth> + '_ {
        let n = self.last_target.months_since(self.first_target) + 1;
        (0..n).map(move |i| self.first_target.add_months(i - 1))
    }

    pub fn origin_count(&self) -> usize {
        (self.last_target.months_since(self.first_target) + 1) as usize
    }
}

/// A forecast origin that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginFailure {
    pub origin: YearMonth,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestOutcome {
    /// One panel per subsystem, in input order.
    pub panels: Vec<ErrorPanel>,
    pub failures: Vec<OriginFailure>,
}

/// Seed for the simulation at one origin, independent of evaluation order.
pub fn origin_seed(seed: u64, origin: YearMonth) -> u64 {
    // splitmix64 finalizer over (seed, origin)
    let mut z = seed ^ (origin.ordinal() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `forecaster` at every origin of `span` over all subsystems jointly.
/// Origins whose forecast fails are skipped and listed in the outcome.
pub fn rolling_backtest(
    series: &[MonthlySeries],
    forecaster: &dyn Forecaster,
    span: EvaluationSpan,
    horizon: usize,
    seed: u64,
) -> Result<BacktestOutcome> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("no series to evaluate".into()));
    }
    if horizon < 1 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    for s in series {
        let first_origin = span.first_target.add_months(-1);
        if s.start() > first_origin {
            return Err(Error::InsufficientData(format!(
                "{} starts at {}, after the first origin {first_origin}",
                s.label(),
                s.start()
            )));
        }
        if s.end() < span.last_target {
            return Err(Error::InsufficientData(format!(
                "{} ends at {}, before the last target {}",
                s.label(),
                s.end(),
                span.last_target
            )));
        }
    }

    let origins: Vec<YearMonth> = span.origins().collect();
    let results: Vec<(YearMonth, Result<Vec<Vec<f64>>>)> = origins
        .par_iter()
        .map(|&origin| {
            let steps = (span.last_target.months_since(origin) as usize).min(horizon);
            let out = series
                .iter()
                .map(|s| s.up_to(origin))
                .collect::<Result<Vec<_>>>()
                .and_then(|h| forecaster.forecast(&h, steps, origin_seed(seed, origin)))
                .and_then(|f| {
                    if f.len() != series.len() || f.iter().any(|v| v.len() != steps) {
                        Err(Error::InvalidArgument(format!(
                            "forecaster {} returned the wrong shape at {origin}",
                            forecaster.id()
                        )))
                    } else {
                        Ok(f)
                    }
                });
            (origin, out)
        })
        .collect();

    let mut panels: Vec<ErrorPanel> = series
        .iter()
        .map(|s| ErrorPanel::new(forecaster.id(), s.label(), horizon))
        .collect();
    let mut failures = Vec::new();
    for (origin, result) in results {
        match result {
            Ok(forecasts) => {
                for ((panel, s), forecast) in panels.iter_mut().zip(series).zip(forecasts) {
                    let observed = (1..=forecast.len() as i64)
                        .map(|k| s.get(origin.add_months(k)).expect("span checked against data"))
                        .collect();
                    panel.records.push(OriginRecord {
                        origin,
                        forecast,
                        observed,
                    });
                }
            }
            Err(e) => {
                log::warn!("{}: origin {origin} skipped: {e}", forecaster.id());
                failures.push(OriginFailure {
                    origin,
                    message: e.to_string(),
                });
            }
        }
    }
    if panels[0].records.is_empty() {
        return Err(Error::InsufficientData(format!(
            "forecaster {} failed at every origin; first failure: {}",
            forecaster.id(),
            failures.first().map_or("none", |f| f.message.as_str())
        )));
    }
    Ok(BacktestOutcome { panels, failures })
}

/// Diagnostic forecaster that returns the realized values. It holds the full
/// data, so it deliberately violates the leakage guard.
pub struct PerfectForesight {
    series: Vec<MonthlySeries>,
}

impl PerfectForesight {
    pub fn new(series: Vec<MonthlySeries>) -> Self {
        Self { series }
    }
}

impl Forecaster for PerfectForesight {
    fn id(&self) -> String {
        "perfect_foresight".into()
    }

    fn forecast(&self, histories: &[MonthlySeries], horizon: usize, _seed: u64) -> Result<Vec<Vec<f64>>> {
        histories
            .iter()
            .map(|h| {
                let full = self
                    .series
                    .iter()
                    .find(|s| s.label() == h.label())
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown subsystem {}", h.label())))?;
                (1..=horizon as i64)
                    .map(|k| {
                        let d = h.end().add_months(k);
                        full.get(d)
                            .ok_or_else(|| Error::InsufficientData(format!("no value at {d}")))
                    })
                    .collect()
            })
            .collect()
    }
}
