//! Forecast bias evaluation for periodic autoregressive inflow models.
//!
//! Monthly inflow series are fitted with PAR(p) and PAR(p)-A models, sampled
//! through a shifted log-normal scenario generator, and compared against
//! simple benchmarks in a rolling-origin backtest with HAC bias intervals.

pub mod backtest;
pub mod benchmarks;
pub mod error;
pub mod io;
mod linalg;
pub mod metrics;
pub mod parp;
pub mod report;
pub mod run;
pub mod scenario;
pub mod series;

pub use backtest::{rolling_backtest, EvaluationSpan, PerfectForesight};
pub use benchmarks::{EstimationSettings, Forecaster, ForecasterKind, ForecasterSpec, ModelForecaster, PointForecast};
pub use error::{Error, Result};
pub use metrics::{BiasReport, ErrorPanel, PctBiasDefinition};
pub use parp::{fit_parp, fit_parpa, point_forecast, select_orders, EstimationMethod, PeriodicModel};
pub use run::{run, RunConfig};
pub use scenario::{build_correlation, simulate, CorrelationSet, ScenarioPanel, Simulator};
pub use series::{MonthlySeries, YearMonth};
