//! Joint scenario generation for several subsystems.
//!
//! Normalized residuals follow a three-parameter (shifted) log-normal law
//! `ε = e^ξ + λ`, `ξ ~ N(μ_ξ, σ_ξ²)`, whose shift `λ` is recomputed at every
//! step from the simulated path so that the next value stays positive while
//! `ε` keeps zero mean and the fitted residual standard deviation.
//! Cross-subsystem dependence enters through the underlying normals, mixed by
//! the Cholesky factor of the month's residual correlation matrix.
//!
//! Random numbers come from one ChaCha8 stream per scenario (keyed by the
//! seed, stream id = scenario index), consumed step-major then
//! subsystem-minor. Panels are therefore independent of the thread count, and
//! the first `k` steps of a longer run equal a `k`-step run.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result, SampleSite};
use crate::linalg::cholesky_lower;
use crate::parp::PeriodicModel;
use crate::series::{MonthlySeries, YearMonth, MONTHS};

/// Parameters of `ε = e^ξ + λ`, `ξ ~ N(mu_xi, sigma_xi²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedLogNormalParams {
    pub lambda: f64,
    pub theta: f64,
    pub mu_xi: f64,
    pub sigma_xi: f64,
}

impl ShiftedLogNormalParams {
    /// Matches a zero mean and standard deviation `resid_std` for the given
    /// (negative) shift.
    pub fn new(lambda: f64, resid_std: f64) -> Result<Self> {
        if !(resid_std.is_finite() && resid_std > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "residual standard deviation must be positive, got {resid_std}"
            )));
        }
        if !(lambda < 0.0) || !lambda.is_finite() {
            return Err(Error::PositivityViolation { lambda, site: None });
        }
        let var = resid_std * resid_std;
        // θ - 1 kept separately: for |λ| ≫ σ it underflows when formed as θ - 1.
        let theta_m1 = var / (lambda * lambda);
        let theta = 1.0 + theta_m1;
        let sigma2 = theta_m1.ln_1p();
        let mu_xi = 0.5 * (var / (theta * theta_m1)).ln();
        Ok(Self {
            lambda,
            theta,
            mu_xi,
            sigma_xi: sigma2.sqrt(),
        })
    }

    /// Maps a standard normal draw to a residual.
    #[inline]
    pub fn residual(&self, normal: f64) -> f64 {
        (self.sigma_xi * normal + self.mu_xi).exp() + self.lambda
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.residual(rng.sample(StandardNormal))
    }

    pub fn mean(&self) -> f64 {
        (self.mu_xi + 0.5 * self.sigma_xi * self.sigma_xi).exp() + self.lambda
    }

    pub fn variance(&self) -> f64 {
        let s2 = self.sigma_xi * self.sigma_xi;
        (2.0 * (self.mu_xi + s2)).exp() - (2.0 * self.mu_xi + s2).exp()
    }
}

pub fn shifted_lognormal_params(lambda: f64, resid_std: f64) -> Result<ShiftedLogNormalParams> {
    ShiftedLogNormalParams::new(lambda, resid_std)
}

/// Infimum of admissible residuals for a target in `month`:
/// `λ = -μ̂_m / σ̂_m - (conditional normalized mean)`.
pub fn lambda_bound(model: &PeriodicModel, month: usize, recent: &[f64]) -> Result<f64> {
    let sigma = model.stats.std_checked(month)?;
    Ok(-model.stats.mean[month] / sigma - model.conditional_mean(month, recent)?)
}

/// In-sample residuals of one subsystem on a calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    pub start: YearMonth,
    pub values: Vec<Option<f64>>,
}

impl ResidualSeries {
    pub fn from_model(model: &PeriodicModel, series: &MonthlySeries) -> Result<Self> {
        Ok(Self {
            start: series.start(),
            values: model.residuals(series)?,
        })
    }

    fn at(&self, ordinal: i64) -> Option<f64> {
        let i = ordinal - self.start.ordinal();
        if i < 0 {
            return None;
        }
        self.values.get(i as usize).copied().flatten()
    }
}

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Per-month residual correlation matrices and their lower Cholesky factors.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSet {
    u: Vec<DMatrix<f64>>,
    b: Vec<DMatrix<f64>>,
    jitter: [f64; MONTHS],
}

impl CorrelationSet {
    pub fn identity(dim: usize) -> Self {
        let eye = DMatrix::identity(dim, dim);
        Self {
            u: vec![eye.clone(); MONTHS],
            b: vec![eye; MONTHS],
            jitter: [0.0; MONTHS],
        }
    }

    /// Factorizes twelve correlation matrices. A matrix that is not positive
    /// definite is replaced by `(U + δI) / (1 + δ)` with δ escalating from
    /// 1e-10 by factors of 10 up to 1e-6.
    pub fn from_matrices(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if matrices.len() != MONTHS {
            return Err(Error::InvalidArgument(format!(
                "expected {MONTHS} correlation matrices, got {}",
                matrices.len()
            )));
        }
        let dim = matrices[0].nrows();
        let mut u = Vec::with_capacity(MONTHS);
        let mut b = Vec::with_capacity(MONTHS);
        let mut jitter = [0.0; MONTHS];
        for (m, mut mat) in matrices.into_iter().enumerate() {
            if mat.nrows() != dim || mat.ncols() != dim {
                return Err(Error::InvalidArgument(format!(
                    "correlation matrix for month {} is not {dim}x{dim}",
                    m + 1
                )));
            }
            for i in 0..dim {
                mat[(i, i)] = 1.0;
            }
            let original = (mat.clone() + mat.transpose()) * 0.5;
            mat = original.clone();
            let mut delta = 0.0;
            let factor = loop {
                if let Some(l) = cholesky_lower(&mat) {
                    break l;
                }
                delta = if delta == 0.0 { JITTER_START } else { delta * 10.0 };
                if delta > JITTER_MAX * 1.000001 {
                    return Err(Error::NotPositiveDefinite {
                        month: m + 1,
                        jitter: JITTER_MAX,
                    });
                }
                log::warn!("correlation matrix for month {} repaired with jitter {delta:e}", m + 1);
                mat = original.map(|v| v / (1.0 + delta));
                for i in 0..dim {
                    mat[(i, i)] = 1.0;
                }
            };
            jitter[m] = delta;
            u.push(mat);
            b.push(factor);
        }
        Ok(Self { u, b, jitter })
    }

    pub fn dim(&self) -> usize {
        self.u[0].nrows()
    }

    pub fn matrix(&self, month: usize) -> &DMatrix<f64> {
        &self.u[month]
    }

    pub fn factor(&self, month: usize) -> &DMatrix<f64> {
        &self.b[month]
    }

    /// Diagonal jitter applied to each month (0 when none was needed).
    pub fn jitter(&self) -> &[f64; MONTHS] {
        &self.jitter
    }
}

/// Sample correlation of month-`m` residual vectors across subsystems, using
/// only dates on which every subsystem has a residual.
pub fn build_correlation(residuals: &[ResidualSeries]) -> Result<CorrelationSet> {
    let dim = residuals.len();
    if dim == 0 {
        return Err(Error::InvalidArgument("no residual series".into()));
    }
    if dim == 1 {
        return Ok(CorrelationSet::identity(1));
    }
    let lo = residuals.iter().map(|r| r.start.ordinal()).max().unwrap();
    let hi = residuals
        .iter()
        .map(|r| r.start.ordinal() + r.values.len() as i64)
        .min()
        .unwrap();

    let mut rows: Vec<Vec<Vec<f64>>> = vec![Vec::new(); MONTHS];
    let mut row = vec![0.0; dim];
    for ord in lo..hi {
        let complete = residuals
            .iter()
            .zip(row.iter_mut())
            .all(|(r, slot)| r.at(ord).map(|v| *slot = v).is_some());
        if complete {
            rows[YearMonth::from_ordinal(ord).month_index()].push(row.clone());
        }
    }

    let mut mats = Vec::with_capacity(MONTHS);
    for (m, obs) in rows.iter().enumerate() {
        if obs.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "month {} has {} aligned residual vectors, need at least 2",
                m + 1,
                obs.len()
            )));
        }
        let n = obs.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|i| obs.iter().map(|r| r[i]).sum::<f64>() / n).collect();
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        for r in obs {
            for i in 0..dim {
                for j in 0..=i {
                    cov[(i, j)] += (r[i] - mean[i]) * (r[j] - mean[j]);
                }
            }
        }
        for i in 0..dim {
            if !(cov[(i, i)] > 0.0) {
                return Err(Error::DegenerateMonth { month: m + 1 });
            }
        }
        let corr = DMatrix::from_fn(dim, dim, |i, j| {
            let (a, b) = if i >= j { (i, j) } else { (j, i) };
            if a == b {
                1.0
            } else {
                cov[(a, b)] / (cov[(a, a)] * cov[(b, b)]).sqrt()
            }
        });
        mats.push(corr);
    }
    CorrelationSet::from_matrices(mats)
}

/// `omega_count × horizon × subsystems` simulated values, in the series'
/// units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPanel {
    /// Last observed month; step `k` is `origin + k`.
    pub origin: YearMonth,
    pub seed: u64,
    pub omega_count: usize,
    pub horizon: usize,
    pub subsystems: Vec<String>,
    values: Vec<f64>,
    residuals: Option<Vec<f64>>,
}

impl ScenarioPanel {
    #[inline]
    fn idx(&self, omega: usize, step: usize, subsystem: usize) -> usize {
        (omega * self.horizon + step) * self.subsystems.len() + subsystem
    }

    /// Value of scenario `omega` at 0-based `step` for `subsystem`.
    pub fn value(&self, omega: usize, step: usize, subsystem: usize) -> f64 {
        self.values[self.idx(omega, step, subsystem)]
    }

    /// Sampled normalized residual, when the panel was generated with
    /// residuals kept.
    pub fn residual(&self, omega: usize, step: usize, subsystem: usize) -> Option<f64> {
        self.residuals.as_ref().map(|r| r[self.idx(omega, step, subsystem)])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Scenario average per subsystem and step: `mean[s][k]`.
    pub fn mean_forecast(&self) -> Vec<Vec<f64>> {
        let ns = self.subsystems.len();
        let mut sums = vec![vec![0.0; self.horizon]; ns];
        for omega in 0..self.omega_count {
            for k in 0..self.horizon {
                for (s, row) in sums.iter_mut().enumerate() {
                    row[k] += self.value(omega, k, s);
                }
            }
        }
        let n = self.omega_count as f64;
        for row in &mut sums {
            for v in row.iter_mut() {
                *v /= n;
            }
        }
        sums
    }

    /// Long format with header `omega,k,subsystem,value`; `omega` and `k`
    /// are 1-based.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["omega", "k", "subsystem", "value"])?;
        for omega in 0..self.omega_count {
            for k in 0..self.horizon {
                for (s, name) in self.subsystems.iter().enumerate() {
                    w.write_record([
                        (omega + 1).to_string(),
                        (k + 1).to_string(),
                        name.clone(),
                        self.value(omega, k, s).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Scenario generator for a fixed set of fitted subsystems.
pub struct Simulator<'a> {
    models: &'a [PeriodicModel],
    histories: &'a [MonthlySeries],
    correlation: &'a CorrelationSet,
    keep_residuals: bool,
}

impl<'a> Simulator<'a> {
    pub fn new(
        models: &'a [PeriodicModel],
        histories: &'a [MonthlySeries],
        correlation: &'a CorrelationSet,
    ) -> Result<Self> {
        let ns = models.len();
        if ns == 0 || histories.len() != ns || correlation.dim() != ns {
            return Err(Error::InvalidArgument(format!(
                "{} models, {} histories and a {}-dimensional correlation set do not match",
                ns,
                histories.len(),
                correlation.dim()
            )));
        }
        let origin = histories[0].end();
        for (model, h) in models.iter().zip(histories) {
            if h.end() != origin {
                return Err(Error::InvalidArgument(format!(
                    "history {} ends at {}, expected {origin}",
                    h.label(),
                    h.end()
                )));
            }
            if h.len() < model.memory() {
                return Err(Error::InsufficientData(format!(
                    "history {} has {} values, model needs {}",
                    h.label(),
                    h.len(),
                    model.memory()
                )));
            }
            if let Some(m) = model.resid_std.iter().position(|&s| !(s > 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "residual standard deviation of {} is zero in month {}",
                    h.label(),
                    m + 1
                )));
            }
        }
        Ok(Self {
            models,
            histories,
            correlation,
            keep_residuals: false,
        })
    }

    pub fn keep_residuals(mut self, keep: bool) -> Self {
        self.keep_residuals = keep;
        self
    }

    pub fn run(&self, horizon: usize, omega_count: usize, seed: u64) -> Result<ScenarioPanel> {
        if horizon < 1 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if omega_count < 1 {
            return Err(Error::InvalidArgument("scenario count must be at least 1".into()));
        }
        let paths: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..omega_count)
            .into_par_iter()
            .map(|omega| self.path(omega, horizon, seed))
            .collect();

        let ns = self.models.len();
        let mut values = Vec::with_capacity(omega_count * horizon * ns);
        let mut residuals = self
            .keep_residuals
            .then(|| Vec::with_capacity(omega_count * horizon * ns));
        for path in paths {
            let (v, e) = path?;
            values.extend_from_slice(&v);
            if let Some(r) = residuals.as_mut() {
                r.extend_from_slice(&e);
            }
        }
        Ok(ScenarioPanel {
            origin: self.histories[0].end(),
            seed,
            omega_count,
            horizon,
            subsystems: self.histories.iter().map(|h| h.label().to_string()).collect(),
            values,
            residuals,
        })
    }

    fn path(&self, omega: usize, horizon: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        let ns = self.models.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(omega as u64);

        let mut recent: Vec<Vec<f64>> = self
            .models
            .iter()
            .zip(self.histories)
            .map(|(model, h)| h.values()[h.len() - model.memory()..].to_vec())
            .collect();
        let mut month = self.histories[0].month_of(self.histories[0].len() - 1);
        let mut a = vec![0.0; ns];
        let mut eta = vec![0.0; ns];
        let mut values = Vec::with_capacity(horizon * ns);
        let mut resid = Vec::with_capacity(if self.keep_residuals { horizon * ns } else { 0 });

        for step in 0..horizon {
            month = (month + 1) % MONTHS;
            for x in a.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            let b = self.correlation.factor(month);
            for (i, e) in eta.iter_mut().enumerate() {
                *e = (0..=i).map(|j| b[(i, j)] * a[j]).sum();
            }
            for (s, model) in self.models.iter().enumerate() {
                let site = SampleSite {
                    omega,
                    step,
                    subsystem: s,
                };
                let lambda = lambda_bound(model, month, &recent[s])?;
                let params =
                    ShiftedLogNormalParams::new(lambda, model.resid_std[month]).map_err(|e| e.with_site(site))?;
                let xi = params.sigma_xi * eta[s] + params.mu_xi;
                let shock = xi.exp();
                // μ + σ (cond + e^ξ + λ) with λ = -μ/σ - cond collapses to σ e^ξ.
                let y = model.stats.std[month] * shock;
                if !(y > 0.0 && y.is_finite()) {
                    return Err(Error::PositivityViolation {
                        lambda,
                        site: Some(site),
                    });
                }
                values.push(y);
                if self.keep_residuals {
                    resid.push(shock + lambda);
                }
                let buf = &mut recent[s];
                let len = buf.len();
                buf.rotate_left(1);
                buf[len - 1] = y;
            }
        }
        Ok((values, resid))
    }
}

/// Convenience wrapper around [`Simulator`].
pub fn simulate(
    models: &[PeriodicModel],
    histories: &[MonthlySeries],
    correlation: &CorrelationSet,
    horizon: usize,
    omega_count: usize,
    seed: u64,
) -> Result<ScenarioPanel> {
    Simulator::new(models, histories, correlation)?.run(horizon, omega_count, seed)
}
