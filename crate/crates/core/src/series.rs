//! Calendar-anchored monthly series and the periodic statistics shared by
//! every model in the crate.
//!
//! Months are 0-based internally (`0` = January) and 1-based wherever they
//! are shown to a user.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MONTHS: usize = 12;

/// Default length of the annual moving-average window.
pub const ANNUAL_WINDOW: usize = 12;

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidArgument(format!("month must be in 1..=12, got {month}")));
        }
        Ok(Self { year, month })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    /// Calendar month, 1..=12.
    pub fn month(&self) -> u32 {
        self.month
    }

    /// Month index 0..12.
    pub fn month_index(&self) -> usize {
        (self.month - 1) as usize
    }

    /// Months since year 0.
    pub fn ordinal(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        Self {
            year: ordinal.div_euclid(12) as i32,
            month: ordinal.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn add_months(&self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    /// Signed number of months from `other` to `self`.
    pub fn months_since(&self, other: YearMonth) -> i64 {
        self.ordinal() - other.ordinal()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("expected YYYY-MM, got {s:?}"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        YearMonth::new(year, month).map_err(|_| bad())
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A contiguous, strictly positive monthly series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    start: YearMonth,
    values: Vec<f64>,
    label: String,
}

impl MonthlySeries {
    pub fn new(label: impl Into<String>, start: YearMonth, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("series is empty".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Validation {
                row: i + 1,
                message: format!("value {v} at {} is not finite and positive", start.add_months(i as i64)),
            });
        }
        Ok(Self {
            start,
            values,
            label: label.into(),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    /// Last observed month.
    pub fn end(&self) -> YearMonth {
        self.date_of(self.values.len() - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn date_of(&self, i: usize) -> YearMonth {
        self.start.add_months(i as i64)
    }

    /// 0-based calendar month of element `i`.
    pub fn month_of(&self, i: usize) -> usize {
        (self.start.month_index() + i) % MONTHS
    }

    pub fn index_of(&self, date: YearMonth) -> Option<usize> {
        let d = date.months_since(self.start);
        (d >= 0 && (d as usize) < self.values.len()).then_some(d as usize)
    }

    pub fn get(&self, date: YearMonth) -> Option<f64> {
        self.index_of(date).map(|i| self.values[i])
    }

    /// Prefix of the series ending at `end` (inclusive).
    pub fn up_to(&self, end: YearMonth) -> Result<Self> {
        let d = end.months_since(self.start);
        if d < 0 {
            return Err(Error::InsufficientData(format!(
                "{} has no data up to {end}",
                self.label
            )));
        }
        let n = (d as usize + 1).min(self.values.len());
        Ok(Self {
            start: self.start,
            values: self.values[..n].to_vec(),
            label: self.label.clone(),
        })
    }

    /// Suffix of the series starting at `start` (inclusive). Starting before
    /// the first observation returns the whole series.
    pub fn from_date(&self, start: YearMonth) -> Result<Self> {
        let d = start.months_since(self.start).max(0) as usize;
        if d >= self.values.len() {
            return Err(Error::InsufficientData(format!(
                "{} has no data from {start}",
                self.label
            )));
        }
        Ok(Self {
            start: self.start.add_months(d as i64),
            values: self.values[d..].to_vec(),
            label: self.label.clone(),
        })
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.label.clone(), self.start, values)
    }
}

/// Per-calendar-month sample mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicStats {
    pub mean: [f64; MONTHS],
    pub std: [f64; MONTHS],
    pub count: [usize; MONTHS],
}

impl PeriodicStats {
    /// Checked `σ̂_m`, rejecting zero-variance months.
    pub fn std_checked(&self, month: usize) -> Result<f64> {
        let s = self.std[month];
        if s > 0.0 && s.is_finite() {
            Ok(s)
        } else {
            Err(Error::DegenerateMonth { month: month + 1 })
        }
    }
}

/// Monthly means and standard deviations (divisor `N_m - 1`).
pub fn periodic_stats(series: &MonthlySeries) -> Result<PeriodicStats> {
    let mut sum = [0.0; MONTHS];
    let mut count = [0usize; MONTHS];
    for (i, &v) in series.values().iter().enumerate() {
        let m = series.month_of(i);
        sum[m] += v;
        count[m] += 1;
    }
    if let Some(m) = (0..MONTHS).find(|&m| count[m] < 2) {
        return Err(Error::InsufficientData(format!(
            "month {} of {} has {} observation(s), need at least 2",
            m + 1,
            series.label(),
            count[m]
        )));
    }
    let mut mean = [0.0; MONTHS];
    for m in 0..MONTHS {
        mean[m] = sum[m] / count[m] as f64;
    }
    let mut ss = [0.0; MONTHS];
    for (i, &v) in series.values().iter().enumerate() {
        let m = series.month_of(i);
        ss[m] += (v - mean[m]).powi(2);
    }
    let mut std = [0.0; MONTHS];
    for m in 0..MONTHS {
        std[m] = (ss[m] / (count[m] - 1) as f64).sqrt();
    }
    Ok(PeriodicStats { mean, std, count })
}

/// Per-month mean and population standard deviation of the annual moving
/// average, plus the window length. This is what a fitted model keeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualParams {
    pub window: usize,
    pub mean: [f64; MONTHS],
    pub std: [f64; MONTHS],
    pub count: [usize; MONTHS],
}

impl AnnualParams {
    pub fn std_checked(&self, month: usize) -> Result<f64> {
        let s = self.std[month];
        if self.count[month] > 0 && s > 0.0 && s.is_finite() {
            Ok(s)
        } else {
            Err(Error::DegenerateMonth { month: month + 1 })
        }
    }

    /// `(Â_t - μ̂^(A)_m) / σ̂^(A)_m`.
    pub fn normalize(&self, month: usize, average: f64) -> Result<f64> {
        Ok((average - self.mean[month]) / self.std_checked(month)?)
    }
}

/// The annual moving-average series `Â_t` and its per-month statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnualStats {
    /// `averages[j]` is `Â` at series index `window + j`.
    pub averages: Vec<f64>,
    pub params: AnnualParams,
}

impl AnnualStats {
    pub fn window(&self) -> usize {
        self.params.window
    }

    /// `Â_t` at series index `t`, if defined.
    pub fn at(&self, t: usize) -> Option<f64> {
        t.checked_sub(self.params.window)
            .and_then(|j| self.averages.get(j).copied())
    }
}

/// Mean of the `window` values strictly before index `t`.
pub fn trailing_mean(values: &[f64], t: usize, window: usize) -> f64 {
    values[t - window..t].iter().sum::<f64>() / window as f64
}

pub fn annual_stats(series: &MonthlySeries, window: usize) -> Result<AnnualStats> {
    if window == 0 {
        return Err(Error::InvalidArgument("annual window must be positive".into()));
    }
    if series.len() <= window {
        return Err(Error::InsufficientData(format!(
            "annual average needs more than {window} observations, {} has {}",
            series.label(),
            series.len()
        )));
    }
    let values = series.values();
    let averages: Vec<f64> = (window..values.len())
        .map(|t| trailing_mean(values, t, window))
        .collect();

    let mut sum = [0.0; MONTHS];
    let mut count = [0usize; MONTHS];
    for (j, &a) in averages.iter().enumerate() {
        let m = series.month_of(window + j);
        sum[m] += a;
        count[m] += 1;
    }
    let mut mean = [0.0; MONTHS];
    for m in 0..MONTHS {
        if count[m] > 0 {
            mean[m] = sum[m] / count[m] as f64;
        }
    }
    let mut ss = [0.0; MONTHS];
    for (j, &a) in averages.iter().enumerate() {
        let m = series.month_of(window + j);
        ss[m] += (a - mean[m]).powi(2);
    }
    let mut std = [0.0; MONTHS];
    for m in 0..MONTHS {
        if count[m] > 0 {
            std[m] = (ss[m] / count[m] as f64).sqrt();
        }
    }
    Ok(AnnualStats {
        averages,
        params: AnnualParams {
            window,
            mean,
            std,
            count,
        },
    })
}

/// `(y_t - μ̂_m) / σ̂_m` for every element of the series.
pub fn normalize(series: &MonthlySeries, stats: &PeriodicStats) -> Result<Vec<f64>> {
    let mut sigma = [0.0; MONTHS];
    for (m, s) in sigma.iter_mut().enumerate() {
        *s = stats.std_checked(m)?;
    }
    Ok(series
        .values()
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let m = series.month_of(i);
            (y - stats.mean[m]) / sigma[m]
        })
        .collect())
}

/// Inverse of [`normalize`]; `first_month` is the 0-based month of `z[0]`.
pub fn denormalize(z: &[f64], first_month: usize, stats: &PeriodicStats) -> Vec<f64> {
    z.iter()
        .enumerate()
        .map(|(i, &v)| {
            let m = (first_month + i) % MONTHS;
            stats.mean[m] + stats.std[m] * v
        })
        .collect()
}
