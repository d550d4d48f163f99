//! Synthetic data generators shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use inflow_bias::parp::{ModelKind, PeriodicModel};
use inflow_bias::series::{PeriodicStats, MONTHS};
use inflow_bias::{MonthlySeries, YearMonth};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const SIGMA: f64 = 100.0;

pub fn ym(year: i32, month: u32) -> YearMonth {
    YearMonth::new(year, month).unwrap()
}

pub fn seasonal_mean(m: usize) -> f64 {
    1000.0 + 300.0 * (2.0 * PI * m as f64 / 12.0).sin()
}

pub fn true_stats() -> PeriodicStats {
    PeriodicStats {
        mean: std::array::from_fn(seasonal_mean),
        std: [SIGMA; MONTHS],
        count: [0; MONTHS],
    }
}

/// Gaussian PAR(1)-A recursion in normalized space:
/// `z_t = φ z_{t-1} + ψ mean(z_{t-12..t}) / s + noise · e_t`, `y = μ_m + σ z`.
/// With `s` the standard deviation of the 12-month mean and unit-variance `z`,
/// `ψ` is the coefficient an estimator sees on the normalized annual term.
#[derive(Debug, Clone)]
pub struct ParGen {
    pub phi: f64,
    pub psi: f64,
    pub noise: f64,
    pub annual_scale: f64,
}

impl ParGen {
    /// Stationary PAR(1) with unit variance.
    pub fn par1(phi: f64) -> Self {
        Self {
            phi,
            psi: 0.0,
            noise: (1.0 - phi * phi).sqrt(),
            annual_scale: 1.0,
        }
    }

    /// PAR(1)-A with `noise` and `annual_scale` calibrated by fixed-point
    /// iteration on a long pilot run.
    pub fn par1a(phi: f64, psi: f64, seed: u64) -> Self {
        let mut g = Self {
            phi,
            psi,
            noise: (1.0 - phi * phi).sqrt(),
            annual_scale: 1.0,
        };
        for _ in 0..10 {
            let z = g.normalized(2000 * 12, seed);
            let n = z.len() as f64;
            let var = z.iter().map(|v| v * v).sum::<f64>() / n;
            let means: Vec<f64> = z.windows(12).map(|w| w.iter().sum::<f64>() / 12.0).collect();
            let s = (means.iter().map(|v| v * v).sum::<f64>() / means.len() as f64 / var).sqrt();
            g.annual_scale = (g.annual_scale * s).sqrt();
            g.noise /= var.sqrt();
        }
        g
    }

    fn normalized(&self, months: usize, seed: u64) -> Vec<f64> {
        let burn = 240;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z: Vec<f64> = Vec::with_capacity(burn + months);
        for t in 0..burn + months {
            let prev = if t > 0 { z[t - 1] } else { 0.0 };
            let annual = if t >= 12 {
                z[t - 12..t].iter().sum::<f64>() / 12.0 / self.annual_scale
            } else {
                0.0
            };
            let e: f64 = StandardNormal.sample(&mut rng);
            z.push(self.phi * prev + self.psi * annual + self.noise * e);
        }
        z.split_off(burn)
    }

    pub fn generate(&self, start: YearMonth, months: usize, seed: u64) -> MonthlySeries {
        let z = self.normalized(months, seed);
        let values = z
            .iter()
            .enumerate()
            .map(|(t, z)| seasonal_mean(start.add_months(t as i64).month_index()) + SIGMA * z)
            .collect();
        MonthlySeries::new("SYN", start, values).unwrap()
    }
}

/// Exact PAR(1) model on the true seasonal statistics.
pub fn par1_model(phi: f64, resid_std: f64) -> PeriodicModel {
    PeriodicModel {
        kind: ModelKind::Parp,
        orders: [1; MONTHS],
        phi: vec![vec![phi]; MONTHS],
        psi: None,
        resid_std: [resid_std; MONTHS],
        stats: true_stats(),
        annual: None,
    }
}

/// Series repeating `pattern` (12 values) for `years` years.
pub fn periodic_series(pattern: &[f64; 12], start: YearMonth, years: usize) -> MonthlySeries {
    let offset = start.month_index();
    let values = (0..years * 12).map(|i| pattern[(i + offset) % 12]).collect();
    MonthlySeries::new("P", start, values).unwrap()
}

/// Spearman rank correlation, no ties expected.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}
