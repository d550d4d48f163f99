mod common;

use common::{periodic_series, ym, ParGen};
use inflow_bias::benchmarks::{
    altm_fit, altm_transform, official_fit, seasonal_naive_forecast, weighted_fit, windowed_fit,
};
use inflow_bias::parp::{fit_periodic, FitOptions};
use inflow_bias::series::MONTHS;
use inflow_bias::{
    select_orders, Error, EstimationMethod, EstimationSettings, Forecaster, ForecasterSpec, ModelForecaster,
    MonthlySeries, PointForecast,
};
use proptest::prelude::*;

fn settings() -> EstimationSettings {
    EstimationSettings::default()
}

#[test]
fn unbounded_window_is_the_official_fit() {
    let s = ParGen::par1(0.6).generate(ym(1931, 1), 80 * 12, 1);
    let official = official_fit(&s, &settings()).unwrap();
    assert_eq!(windowed_fit(&s, None, &settings()).unwrap(), official);
    assert_eq!(windowed_fit(&s, Some(500), &settings()).unwrap(), official);
    assert_ne!(windowed_fit(&s, Some(30), &settings()).unwrap(), official);
}

#[test]
fn one_year_window_is_too_short() {
    let s = ParGen::par1(0.6).generate(ym(1931, 1), 80 * 12, 2);
    assert!(matches!(
        windowed_fit(&s, Some(1), &settings()),
        Err(Error::InsufficientData(_))
    ));
}

#[test]
fn weight_near_one_matches_least_squares() {
    let s = ParGen::par1(0.6).generate(ym(1931, 1), 80 * 12, 3);
    let w = weighted_fit(&s, 1.0 + 1e-12, &settings()).unwrap();
    let orders = select_orders(&s, 6).unwrap();
    let ls = fit_periodic(&s, &orders, &FitOptions::parpa(EstimationMethod::LeastSquares)).unwrap();
    for m in 0..MONTHS {
        for (a, b) in w.phi[m].iter().zip(&ls.phi[m]) {
            assert!((a - b).abs() <= 1e-6);
        }
        assert!((w.psi.unwrap()[m] - ls.psi.unwrap()[m]).abs() <= 1e-6);
    }
    assert!(matches!(
        weighted_fit(&s, 0.5, &settings()),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        weighted_fit(&s, 1.0, &settings()),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn heavy_recent_weight_tracks_a_regime_shift() {
    let old = ParGen::par1(0.7).generate(ym(1950, 1), 60 * 12, 4);
    let new = ParGen::par1(-0.6).generate(ym(2010, 1), 12, 5);
    let mut v = old.values().to_vec();
    // Shift the last year's level too so its dynamics differ clearly.
    v.extend(new.values().iter().map(|y| y * 1.3));
    let s = MonthlySeries::new("S", ym(1950, 1), v).unwrap();
    let last_year_ssr = |w: f64| -> f64 {
        let m = weighted_fit(&s, w, &settings()).unwrap();
        let r = m.residuals(&s).unwrap();
        r[r.len() - 12..].iter().map(|e| e.unwrap().powi(2)).sum()
    };
    let (light, heavy) = (last_year_ssr(2.0), last_year_ssr(11.0));
    assert!(heavy < light, "w = 11: {heavy}, w = 2: {light}");
}

#[test]
fn altm_two_regime_hand_oracle() {
    let mut v = vec![100.0; 12];
    v.extend(vec![50.0; 24]);
    let s = MonthlySeries::new("R", ym(2000, 1), v).unwrap();
    let t = altm_transform(&s, 12).unwrap();
    for (i, y) in t.values().iter().enumerate() {
        let expected = match i {
            0..=11 => 50.0,
            12..=22 => 50.0 * 2f64.powf(-((23 - i) as f64) / 12.0),
            _ => 50.0,
        };
        assert!((y / expected - 1.0).abs() < 1e-12, "t = {i}: {y} vs {expected}");
    }
    // Late-regime values are untouched.
    assert_eq!(&t.values()[23..], &s.values()[23..]);
}

#[test]
fn altm_is_identity_and_idempotent_on_constant_series() {
    let s = MonthlySeries::new("C", ym(2000, 1), vec![123.456; 60]).unwrap();
    let t = altm_transform(&s, 12).unwrap();
    assert_eq!(t, s);
    assert_eq!(altm_transform(&t, 12).unwrap(), t);
    // Both paths reject the constant series identically.
    let a = altm_fit(&s, 12, &settings()).unwrap_err();
    let b = official_fit(&s, &settings()).unwrap_err();
    assert_eq!(a.to_string(), b.to_string());
    assert!(matches!(altm_transform(&s, 0), Err(Error::InvalidArgument(_))));
    let short = MonthlySeries::new("C", ym(2000, 1), vec![1.0; 12]).unwrap();
    assert!(matches!(altm_transform(&short, 12), Err(Error::InsufficientData(_))));
}

#[test]
fn seasonal_naive_is_exact_on_periodic_data() {
    let pattern = [5.0, 7.0, 9.0, 11.0, 13.0, 12.0, 10.0, 8.0, 6.0, 4.0, 3.0, 2.0];
    let s = periodic_series(&pattern, ym(2000, 4), 5);
    let f = seasonal_naive_forecast(&s, 24).unwrap();
    for (k, v) in f.iter().enumerate() {
        let month = s.end().add_months(k as i64 + 1).month_index();
        assert_eq!(*v, pattern[month]);
    }
    let c = MonthlySeries::new("C", ym(2000, 1), vec![42.0; 30]).unwrap();
    assert!(seasonal_naive_forecast(&c, 24).unwrap().iter().all(|v| *v == 42.0));
}

const SPECS: [&str; 7] = [
    "official_parpa",
    "official_parp",
    "seasonal_naive",
    "windowed_parpa:J=30",
    "weighted_parpa:w=4",
    "altm_parpa:M=12",
    "altm_parpa:M=6",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forecasters_return_positive_finite_vectors(
        phi in 0.0f64..0.85,
        years in 35usize..60,
        horizon in 1usize..30,
        seed in 0u64..1_000,
        deterministic in any::<bool>(),
    ) {
        let a = ParGen::par1(phi).generate(ym(1950, 1), years * 12, seed);
        let b = ParGen::par1(phi / 2.0).generate(ym(1950, 1), years * 12, seed + 1);
        let b = MonthlySeries::new("B", b.start(), b.values().to_vec()).unwrap();
        let histories = [a, b];
        let settings = EstimationSettings {
            point_forecast: if deterministic {
                PointForecast::Deterministic
            } else {
                PointForecast::ScenarioMean { scenarios: 50 }
            },
            ..EstimationSettings::default()
        };
        for spec in SPECS {
            let f = ModelForecaster::new(spec.parse::<ForecasterSpec>().unwrap(), settings.clone()).unwrap();
            let out = f.forecast(&histories, horizon, seed).unwrap();
            prop_assert_eq!(out.len(), 2);
            for v in &out {
                prop_assert_eq!(v.len(), horizon);
                prop_assert!(v.iter().all(|x| x.is_finite() && *x > 0.0), "{}: {:?}", spec, v);
            }
        }
    }
}
