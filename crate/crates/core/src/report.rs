//! CSV rendering of bias reports and stored error panels.
//!
//! Per-horizon files are in average MW; summaries are in average GW
//! (average MW / 1000), one row per forecaster.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::metrics::{BiasReport, ErrorPanel, OriginRecord};
use crate::series::YearMonth;

/// Horizons shown in the summary tables.
pub const SUMMARY_HORIZONS: [usize; 4] = [1, 6, 12, 24];

/// Published mean biases (average GW) for k = 1, 6, 12, 24 and the 24-month
/// cumulative bias, for display next to reproduced results. Rows for model
/// families this crate does not implement are included for reference only.
pub struct PublishedRow {
    pub model: &'static str,
    pub bias: [f64; 4],
    pub cumulative: f64,
}

pub const PUBLISHED_SE: &[PublishedRow] = &[
    PublishedRow {
        model: "Official PARp-A",
        bias: [1.28, 3.83, 5.39, 6.73],
        cumulative: 110.07,
    },
    PublishedRow {
        model: "Seasonal Naive",
        bias: [1.16, 1.45, 1.65, 1.77],
        cumulative: 35.21,
    },
    PublishedRow {
        model: "PARp-A (J = 30)",
        bias: [2.73, 6.64, 6.69, 7.22],
        cumulative: 143.58,
    },
    PublishedRow {
        model: "PARp-A (J = 50)",
        bias: [1.37, 5.29, 6.15, 7.44],
        cumulative: 128.00,
    },
    PublishedRow {
        model: "PARp-A (J = 70)",
        bias: [0.95, 4.51, 4.84, 6.05],
        cumulative: 103.30,
    },
    PublishedRow {
        model: "PARp-A (w = 2)",
        bias: [1.10, 4.73, 5.00, 6.08],
        cumulative: 106.92,
    },
    PublishedRow {
        model: "PARp-A (w = 4)",
        bias: [1.10, 4.68, 4.93, 6.04],
        cumulative: 105.85,
    },
    PublishedRow {
        model: "PARp-A (w = 11)",
        bias: [0.93, 4.23, 4.56, 5.81],
        cumulative: 98.70,
    },
    PublishedRow {
        model: "ALTM PARp-A",
        bias: [0.66, 2.02, 1.73, 2.35],
        cumulative: 38.18,
    },
    PublishedRow {
        model: "SARIMA",
        bias: [1.64, 3.22, 3.21, 3.63],
        cumulative: 71.04,
    },
    PublishedRow {
        model: "XGBoost",
        bias: [0.80, 2.11, 3.28, 1.87],
        cumulative: 51.83,
    },
    PublishedRow {
        model: "Prophet",
        bias: [2.31, 3.02, 3.43, 4.21],
        cumulative: 75.85,
    },
    PublishedRow {
        model: "Chronos",
        bias: [1.04, 4.13, 4.25, 3.85],
        cumulative: 89.50,
    },
];

pub const PUBLISHED_NE: &[PublishedRow] = &[
    PublishedRow {
        model: "Official PARp-A",
        bias: [0.54, 1.66, 2.32, 3.17],
        cumulative: 49.03,
    },
    PublishedRow {
        model: "Seasonal Naive",
        bias: [0.09, 0.21, 0.23, 0.30],
        cumulative: 5.27,
    },
    PublishedRow {
        model: "PARp-A (J = 30)",
        bias: [0.51, 1.25, 1.52, 2.03],
        cumulative: 33.84,
    },
    PublishedRow {
        model: "PARp-A (J = 50)",
        bias: [0.30, 1.27, 1.57, 2.29],
        cumulative: 34.54,
    },
    PublishedRow {
        model: "PARp-A (J = 70)",
        bias: [0.49, 1.70, 2.00, 2.80],
        cumulative: 44.73,
    },
    PublishedRow {
        model: "PARp-A (w = 2)",
        bias: [0.47, 1.80, 2.15, 2.98],
        cumulative: 47.64,
    },
    PublishedRow {
        model: "PARp-A (w = 4)",
        bias: [0.46, 1.75, 2.06, 2.89],
        cumulative: 46.11,
    },
    PublishedRow {
        model: "PARp-A (w = 11)",
        bias: [0.39, 1.50, 1.74, 2.58],
        cumulative: 40.19,
    },
    PublishedRow {
        model: "ALTM PARp-A",
        bias: [-0.13, 0.02, 0.11, -0.03],
        cumulative: -0.02,
    },
    PublishedRow {
        model: "SARIMA",
        bias: [0.37, 0.60, 0.67, 0.72],
        cumulative: 14.55,
    },
    PublishedRow {
        model: "XGBoost",
        bias: [-0.09, 0.20, 0.16, 0.30],
        cumulative: 3.83,
    },
    PublishedRow {
        model: "Prophet",
        bias: [-0.20, -0.11, -0.07, 0.08],
        cumulative: -0.98,
    },
    PublishedRow {
        model: "Chronos",
        bias: [-0.15, -0.05, -0.06, 0.01],
        cumulative: -1.99,
    },
];

/// Published table for a subsystem label, if there is one.
pub fn published(subsystem: &str) -> Option<&'static [PublishedRow]> {
    match subsystem {
        "SE" => Some(PUBLISHED_SE),
        "NE" => Some(PUBLISHED_NE),
        _ => None,
    }
}

/// `k,n_k,bias_avgMW,ci_low,ci_high,pct_bias` (pct_bias in percent).
pub fn write_bias_csv<W: Write>(report: &BiasReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "n_k", "bias_avgMW", "ci_low", "ci_high", "pct_bias"])?;
    for r in &report.rows {
        w.write_record([
            r.k.to_string(),
            r.n.to_string(),
            r.bias.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
            r.pct_bias.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Labelled report used to build a summary table.
pub struct SummaryEntry<'a> {
    pub label: String,
    pub is_reference: bool,
    pub report: &'a BiasReport,
}

/// Rows = forecasters; columns = bias at k ∈ {1, 6, 12, 24}, cumulative
/// bias, and cumulative bias as a percentage of the reference forecaster's.
/// All values in average GW; empty cells where a value is unavailable.
pub fn write_summary_csv<W: Write>(entries: &[SummaryEntry<'_>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["forecaster".to_string()];
    header.extend(SUMMARY_HORIZONS.iter().map(|k| format!("k{k}")));
    header.push("cumulative".into());
    header.push("pct_of_reference".into());
    w.write_record(&header)?;
    let reference = entries
        .iter()
        .find(|e| e.is_reference)
        .and_then(|e| e.report.cumulative_bias);
    let gw = |v: f64| (v / 1000.0).to_string();
    for e in entries {
        let mut row = vec![e.label.clone()];
        for k in SUMMARY_HORIZONS {
            row.push(e.report.row(k).map(|r| gw(r.bias)).unwrap_or_default());
        }
        row.push(e.report.cumulative_bias.map(gw).unwrap_or_default());
        row.push(match (e.report.cumulative_bias, reference) {
            (Some(c), Some(r)) if r != 0.0 => (100.0 * c / r).to_string(),
            _ => String::new(),
        });
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format `forecaster,subsystem,origin,k,forecast,observed,error`.
pub fn write_error_panel<W: Write>(panel: &ErrorPanel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "forecaster",
        "subsystem",
        "horizon",
        "origin",
        "k",
        "forecast",
        "observed",
        "error",
    ])?;
    for r in &panel.records {
        for k in 1..=r.horizon() {
            w.write_record([
                panel.forecaster.clone(),
                panel.subsystem.clone(),
                panel.horizon.to_string(),
                r.origin.to_string(),
                k.to_string(),
                r.forecast[k - 1].to_string(),
                r.observed[k - 1].to_string(),
                r.error(k).unwrap().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads panels written by [`write_error_panel`].
pub fn read_error_panels<R: Read>(reader: R) -> Result<Vec<ErrorPanel>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut panels: Vec<ErrorPanel> = Vec::new();
    let mut index: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let field = |j: usize| rec.get(j).unwrap_or_default();
        let parse_err = |what: &str| Error::Parse {
            row,
            message: format!("bad {what}"),
        };
        let key = (field(0).to_string(), field(1).to_string());
        let horizon: usize = field(2).parse().map_err(|_| parse_err("horizon"))?;
        let origin: YearMonth = field(3).parse().map_err(|_| parse_err("origin"))?;
        let k: usize = field(4).parse().map_err(|_| parse_err("k"))?;
        let forecast: f64 = field(5).parse().map_err(|_| parse_err("forecast"))?;
        let observed: f64 = field(6).parse().map_err(|_| parse_err("observed"))?;
        let p = *index.entry(key.clone()).or_insert_with(|| {
            panels.push(ErrorPanel::new(key.0.clone(), key.1.clone(), horizon));
            panels.len() - 1
        });
        let panel = &mut panels[p];
        let new_origin = panel.records.last().is_none_or(|r| r.origin != origin);
        if new_origin {
            if k != 1 {
                return Err(parse_err("k sequence"));
            }
            panel.records.push(OriginRecord {
                origin,
                forecast: Vec::new(),
                observed: Vec::new(),
            });
        }
        let r = panel.records.last_mut().unwrap();
        if k != r.forecast.len() + 1 {
            return Err(parse_err("k sequence"));
        }
        r.forecast.push(forecast);
        r.observed.push(observed);
    }
    Ok(panels)
}
