//! Periodic autoregressive models: PAR(p) and PAR(p)-A.
//!
//! Each calendar month `m` has its own normalized AR equation
//!
//! ```text
//! z_t = φ_1^(m) z_{t-1} + … + φ_p^(m) z_{t-p} [+ ψ^(m) a_t] + ε_t
//! ```
//!
//! where `z_t = (y_t - μ̂_m) / σ̂_m` and, for PAR(p)-A, `a_t` is the
//! normalized mean of the 12 values preceding `t`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::series::{
    annual_stats, normalize, periodic_stats, trailing_mean, AnnualParams, MonthlySeries, PeriodicStats, ANNUAL_WINDOW,
    MONTHS,
};

pub const DEFAULT_MAX_ORDER: usize = 6;

/// Two-sided 95% normal quantile used for PACF significance.
const PACF_CRITICAL: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    Parp,
    #[serde(rename = "PARPA")]
    ParpA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMethod {
    #[default]
    YuleWalker,
    LeastSquares,
}

/// How the annual moving-average regressor enters the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnualTerm {
    Excluded,
    Estimated,
    /// Same regression rows as `Estimated` but with `ψ` pinned at zero.
    ForcedZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub method: EstimationMethod,
    pub annual: AnnualTerm,
    pub annual_window: usize,
    /// Regression targets with a series index below this are dropped.
    pub min_target: usize,
    /// Weight on the squared residual of rows whose target lies in the last
    /// 12 months of the series. Least squares only.
    pub recent_weight: Option<f64>,
}

impl FitOptions {
    pub fn parp(method: EstimationMethod) -> Self {
        Self {
            method,
            annual: AnnualTerm::Excluded,
            annual_window: ANNUAL_WINDOW,
            min_target: 0,
            recent_weight: None,
        }
    }

    pub fn parpa(method: EstimationMethod) -> Self {
        Self {
            annual: AnnualTerm::Estimated,
            ..Self::parp(method)
        }
    }
}

/// A fitted PAR(p) or PAR(p)-A model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicModel {
    pub kind: ModelKind,
    pub orders: [usize; MONTHS],
    /// `phi[m][j]` multiplies the normalized value `j + 1` months back.
    pub phi: Vec<Vec<f64>>,
    pub psi: Option<[f64; MONTHS]>,
    pub resid_std: [f64; MONTHS],
    pub stats: PeriodicStats,
    pub annual: Option<AnnualParams>,
}

impl PeriodicModel {
    pub fn max_order(&self) -> usize {
        self.orders.iter().copied().max().unwrap_or(0)
    }

    /// Number of trailing observations needed to condition a forecast.
    pub fn memory(&self) -> usize {
        let annual = self.annual.as_ref().map_or(0, |a| a.window);
        self.max_order().max(annual)
    }

    /// Normalized conditional mean `Σ φ_j z_{t-j} [+ ψ a_t]` for a target in
    /// month `month`, given raw values `recent` whose last element is the
    /// observation immediately before the target.
    pub fn conditional_mean(&self, month: usize, recent: &[f64]) -> Result<f64> {
        if recent.len() < self.memory() {
            return Err(Error::InsufficientData(format!(
                "forecast state holds {} values, model needs {}",
                recent.len(),
                self.memory()
            )));
        }
        let n = recent.len();
        let mut acc = 0.0;
        for (j, &phi) in self.phi[month].iter().enumerate() {
            let lag = j + 1;
            let lm = (month + MONTHS * lag - lag) % MONTHS;
            let z = (recent[n - lag] - self.stats.mean[lm]) / self.stats.std_checked(lm)?;
            acc += phi * z;
        }
        if let (Some(psi), Some(annual)) = (&self.psi, &self.annual) {
            let avg = trailing_mean(recent, n, annual.window);
            acc += psi[month] * annual.normalize(month, avg)?;
        }
        Ok(acc)
    }

    /// In-sample normalized residuals aligned with `series`; `None` where a
    /// regressor is unavailable.
    pub fn residuals(&self, series: &MonthlySeries) -> Result<Vec<Option<f64>>> {
        let values = series.values();
        let memory = self.memory();
        let mut out = vec![None; values.len()];
        for t in memory..values.len() {
            let m = series.month_of(t);
            let z = (values[t] - self.stats.mean[m]) / self.stats.std_checked(m)?;
            out[t] = Some(z - self.conditional_mean(m, &values[..t])?);
        }
        Ok(out)
    }
}

/// Sample periodic autocorrelation between `z_t` (month `month`) and
/// `z_{t-lag}`, over targets with index at least `min_target`.
fn periodic_corr(z: &[f64], first_month: usize, month: usize, lag: usize, min_target: usize) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    let mut t = first_target(first_month, month, lag.max(min_target));
    while t < z.len() {
        sxy += z[t] * z[t - lag];
        sxx += z[t] * z[t];
        syy += z[t - lag] * z[t - lag];
        t += MONTHS;
    }
    if sxx > 0.0 && syy > 0.0 {
        sxy / (sxx * syy).sqrt()
    } else {
        0.0
    }
}

/// Smallest index `t >= min` whose calendar month is `month`.
fn first_target(first_month: usize, month: usize, min: usize) -> usize {
    let offset = (month + MONTHS - first_month) % MONTHS;
    if offset >= min {
        offset
    } else {
        offset + (min - offset).div_ceil(MONTHS) * MONTHS
    }
}

/// Yule-Walker matrix and right-hand side for month `month`, order `p`.
fn yule_walker_system(
    z: &[f64],
    first_month: usize,
    month: usize,
    p: usize,
    min_target: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    // E[z_{t-i} z_{t-j}] for i < j is the lag-(j-i) correlation of month m - i.
    let corr = |i: usize, j: usize| -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let m = (month + MONTHS * (lo + 1) - lo) % MONTHS;
        periodic_corr(z, first_month, m, hi - lo, min_target.saturating_sub(lo))
    };
    let r = DMatrix::from_fn(p, p, |i, j| corr(i + 1, j + 1));
    let rhs = DVector::from_fn(p, |i, _| corr(0, i + 1));
    (r, rhs)
}

/// Selects `p_m` per month as the largest lag up to `max_order` whose sample
/// periodic partial autocorrelation exceeds `1.96 / √N_m`, defaulting to 1.
pub fn select_orders(series: &MonthlySeries, max_order: usize) -> Result<[usize; MONTHS]> {
    if max_order < 1 {
        return Err(Error::InvalidArgument("maximum order must be at least 1".into()));
    }
    if series.len() <= max_order + MONTHS {
        return Err(Error::InsufficientData(format!(
            "order selection up to lag {max_order} needs more than {} observations",
            max_order + MONTHS
        )));
    }
    let stats = periodic_stats(series)?;
    let z = normalize(series, &stats)?;
    let first_month = series.month_of(0);
    let mut orders = [1; MONTHS];
    for (m, order) in orders.iter_mut().enumerate() {
        let threshold = PACF_CRITICAL / (stats.count[m] as f64).sqrt();
        for lag in (1..=max_order).rev() {
            let (r, rhs) = yule_walker_system(&z, first_month, m, lag, 0);
            let sol = solve_spd(r, &rhs).ok_or_else(|| Error::SingularSystem {
                month: m + 1,
                detail: format!("partial autocorrelation at lag {lag}"),
            })?;
            if sol[lag - 1].abs() > threshold {
                *order = lag;
                break;
            }
        }
    }
    Ok(orders)
}

pub fn fit_parp(series: &MonthlySeries, orders: &[usize; MONTHS], method: EstimationMethod) -> Result<PeriodicModel> {
    fit_periodic(series, orders, &FitOptions::parp(method))
}

pub fn fit_parpa(series: &MonthlySeries, orders: &[usize; MONTHS], method: EstimationMethod) -> Result<PeriodicModel> {
    fit_periodic(series, orders, &FitOptions::parpa(method))
}

/// General estimator behind [`fit_parp`] and [`fit_parpa`].
pub fn fit_periodic(series: &MonthlySeries, orders: &[usize; MONTHS], opts: &FitOptions) -> Result<PeriodicModel> {
    if let Some(m) = orders.iter().position(|&p| p < 1) {
        return Err(Error::InvalidArgument(format!(
            "order for month {} must be at least 1",
            m + 1
        )));
    }
    if let Some(w) = opts.recent_weight {
        if opts.method != EstimationMethod::LeastSquares {
            return Err(Error::InvalidArgument(
                "recency weighting requires least squares".into(),
            ));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidArgument(format!("row weight {w} must be positive")));
        }
    }
    let with_annual = opts.annual != AnnualTerm::Excluded;
    if with_annual && series.len() <= opts.annual_window {
        return Err(Error::InsufficientData(format!(
            "{} has {} observations; the annual term needs more than {}",
            series.label(),
            series.len(),
            opts.annual_window
        )));
    }

    let stats = periodic_stats(series)?;
    let z = normalize(series, &stats)?;
    let first_month = series.month_of(0);
    let n = z.len();

    let annual = if with_annual {
        let a = annual_stats(series, opts.annual_window)?;
        for m in 0..MONTHS {
            a.params.std_checked(m)?;
        }
        Some(a)
    } else {
        None
    };
    // Normalized annual regressor, indexed like the series.
    let annual_z: Option<Vec<f64>> = annual.as_ref().map(|a| {
        (0..n)
            .map(|t| match a.at(t) {
                Some(avg) => {
                    let m = series.month_of(t);
                    (avg - a.params.mean[m]) / a.params.std[m]
                }
                None => f64::NAN,
            })
            .collect()
    });
    let estimate_psi = opts.annual == AnnualTerm::Estimated;

    let mut phi = Vec::with_capacity(MONTHS);
    let mut psi = [0.0; MONTHS];
    let mut resid_std = [0.0; MONTHS];

    for m in 0..MONTHS {
        let p = orders[m];
        let min_t = p
            .max(opts.min_target)
            .max(if with_annual { opts.annual_window } else { 0 });
        let rows: Vec<usize> = (first_target(first_month, m, min_t)..n).step_by(MONTHS).collect();
        let ncols = p + usize::from(estimate_psi);
        if rows.len() < ncols + 2 {
            return Err(Error::InsufficientData(format!(
                "month {} has {} regression rows, needs at least {}",
                m + 1,
                rows.len(),
                ncols + 2
            )));
        }

        let coef = match opts.method {
            EstimationMethod::LeastSquares => {
                let weight_from = n.saturating_sub(MONTHS);
                let mut xtx = DMatrix::<f64>::zeros(ncols, ncols);
                let mut xty = DVector::<f64>::zeros(ncols);
                let mut x = vec![0.0; ncols];
                for &t in &rows {
                    for j in 0..p {
                        x[j] = z[t - j - 1];
                    }
                    if estimate_psi {
                        x[p] = annual_z.as_ref().unwrap()[t];
                    }
                    let w = match opts.recent_weight {
                        Some(w) if t >= weight_from => w,
                        _ => 1.0,
                    };
                    for i in 0..ncols {
                        xty[i] += w * x[i] * z[t];
                        for k in 0..ncols {
                            xtx[(i, k)] += w * x[i] * x[k];
                        }
                    }
                }
                solve_spd(xtx, &xty).ok_or_else(|| Error::SingularSystem {
                    month: m + 1,
                    detail: "least-squares normal equations".into(),
                })?
            }
            EstimationMethod::YuleWalker => {
                let (r, rhs) = yule_walker_system(&z, first_month, m, p, min_t);
                if estimate_psi {
                    let az = annual_z.as_ref().unwrap();
                    let cross = |lag: usize| -> f64 {
                        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
                        for &t in &rows {
                            sxy += az[t] * z[t - lag];
                            sxx += az[t] * az[t];
                            syy += z[t - lag] * z[t - lag];
                        }
                        sxy / (sxx * syy).sqrt()
                    };
                    let mut big = DMatrix::<f64>::identity(p + 1, p + 1);
                    big.view_mut((0, 0), (p, p)).copy_from(&r);
                    for j in 0..p {
                        let c = cross(j + 1);
                        big[(j, p)] = c;
                        big[(p, j)] = c;
                    }
                    let mut b = DVector::<f64>::zeros(p + 1);
                    b.rows_mut(0, p).copy_from(&rhs);
                    b[p] = cross(0);
                    solve_spd(big, &b)
                } else {
                    solve_spd(r, &rhs)
                }
                .ok_or_else(|| Error::SingularSystem {
                    month: m + 1,
                    detail: "Yule-Walker equations".into(),
                })?
            }
        };

        let coef_phi: Vec<f64> = coef.iter().take(p).copied().collect();
        let coef_psi = if estimate_psi { coef[p] } else { 0.0 };

        let resid: Vec<f64> = rows
            .iter()
            .map(|&t| {
                let mut fit: f64 = (0..p).map(|j| coef_phi[j] * z[t - j - 1]).sum();
                if let Some(az) = &annual_z {
                    fit += coef_psi * az[t];
                }
                z[t] - fit
            })
            .collect();
        resid_std[m] = sample_std(&resid);
        phi.push(coef_phi);
        psi[m] = coef_psi;
    }

    Ok(PeriodicModel {
        kind: if with_annual { ModelKind::ParpA } else { ModelKind::Parp },
        orders: *orders,
        phi,
        psi: with_annual.then_some(psi),
        resid_std,
        stats,
        annual: annual.map(|a| a.params),
    })
}

fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Zero-noise recursion of the model `horizon` steps past the end of
/// `history`, in the series' units. The annual term rolls over observed and
/// already-forecast values.
pub fn point_forecast(model: &PeriodicModel, history: &MonthlySeries, horizon: usize) -> Result<Vec<f64>> {
    if horizon < 1 {
        return Err(Error::InvalidArgument("forecast horizon must be at least 1".into()));
    }
    let memory = model.memory();
    if history.len() < memory {
        return Err(Error::InsufficientData(format!(
            "history has {} values, model needs {memory}",
            history.len()
        )));
    }
    let mut recent = history.values()[history.len() - memory..].to_vec();
    let mut month = history.month_of(history.len() - 1);
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        month = (month + 1) % MONTHS;
        let z = model.conditional_mean(month, &recent)?;
        let y = model.stats.mean[month] + model.stats.std[month] * z;
        out.push(y);
        if memory > 0 {
            recent.rotate_left(1);
            recent[memory - 1] = y;
        }
    }
    Ok(out)
}
