mod common;

use common::{seasonal_mean, ym, ParGen, SIGMA};
use inflow_bias::parp::{fit_periodic, AnnualTerm, FitOptions};
use inflow_bias::series::{annual_stats, denormalize, normalize, periodic_stats, MONTHS};
use inflow_bias::{fit_parp, fit_parpa, point_forecast, select_orders, EstimationMethod, MonthlySeries};
use proptest::prelude::*;

const YW: EstimationMethod = EstimationMethod::YuleWalker;
const LS: EstimationMethod = EstimationMethod::LeastSquares;

#[test]
fn par1_recovered_over_5000_years() {
    let s = ParGen::par1(0.5).generate(ym(1, 1), 5000 * 12, 11);
    for method in [YW, LS] {
        let m = fit_parp(&s, &[1; MONTHS], method).unwrap();
        for (month, phi) in m.phi.iter().enumerate() {
            assert!((phi[0] - 0.5).abs() <= 0.05, "{method:?} month {month}: {}", phi[0]);
        }
    }
}

// The per-month standard error at 5000 years is about 0.0106, so ±0.02 holds
// in all twelve months for only about half of all samples.
#[test]
#[ignore = "±0.02 per month is under two standard errors; holds for about half of all seeds"]
fn par1_recovered_within_two_hundredths() {
    let s = ParGen::par1(0.5).generate(ym(1, 1), 5000 * 12, 11);
    let m = fit_parp(&s, &[1; MONTHS], YW).unwrap();
    for (month, phi) in m.phi.iter().enumerate() {
        assert!((phi[0] - 0.5).abs() <= 0.02, "month {month}: {}", phi[0]);
    }
}

#[test]
fn white_noise_gives_zero_coefficients() {
    let s = ParGen::par1(0.0).generate(ym(1, 1), 5000 * 12, 12);
    let m = fit_parp(&s, &[1; MONTHS], YW).unwrap();
    for phi in &m.phi {
        assert!(phi[0].abs() <= 0.05, "{}", phi[0]);
    }
}

#[test]
fn yule_walker_and_least_squares_agree() {
    let s = ParGen::par1(0.5).generate(ym(1, 1), 10_000 * 12, 13);
    let a = fit_parp(&s, &[1; MONTHS], YW).unwrap();
    let b = fit_parp(&s, &[1; MONTHS], LS).unwrap();
    for (x, y) in a.phi.iter().zip(&b.phi) {
        assert!((x[0] - y[0]).abs() <= 0.02, "{} vs {}", x[0], y[0]);
    }
}

#[test]
fn parpa_psi_recovered() {
    let g = ParGen::par1a(0.5, 0.3, 21);
    let s = g.generate(ym(1, 1), 5000 * 12, 22);
    for method in [LS, YW] {
        let m = fit_parpa(&s, &[1; MONTHS], method).unwrap();
        let psi = m.psi.unwrap();
        for month in 0..MONTHS {
            assert!(
                (psi[month] - 0.3).abs() <= 0.05,
                "{method:?} month {month}: psi {}",
                psi[month]
            );
            assert!(
                (m.phi[month][0] - 0.5).abs() <= 0.05,
                "{method:?} month {month}: phi {}",
                m.phi[month][0]
            );
        }
    }
}

#[test]
fn pure_parp_gives_zero_psi() {
    let s = ParGen::par1(0.5).generate(ym(1, 1), 5000 * 12, 23);
    let plain = fit_parp(&s, &[1; MONTHS], YW).unwrap();
    for method in [LS, YW] {
        let m = fit_parpa(&s, &[1; MONTHS], method).unwrap();
        let psi = m.psi.unwrap();
        for month in 0..MONTHS {
            assert!(psi[month].abs() <= 0.05, "{method:?} psi {}", psi[month]);
            assert!((m.phi[month][0] - plain.phi[month][0]).abs() <= 0.05);
        }
    }
}

#[test]
fn parpa_moment_estimator_matches_least_squares() {
    let g = ParGen::par1a(0.4, 0.3, 31);
    let s = g.generate(ym(1, 1), 10_000 * 12, 32);
    let a = fit_parpa(&s, &[1; MONTHS], YW).unwrap();
    let b = fit_parpa(&s, &[1; MONTHS], LS).unwrap();
    for month in 0..MONTHS {
        assert!((a.phi[month][0] - b.phi[month][0]).abs() <= 0.02);
        assert!((a.psi.unwrap()[month] - b.psi.unwrap()[month]).abs() <= 0.02);
    }
}

#[test]
fn forced_zero_annual_term_equals_parp() {
    let s = ParGen::par1(0.6).generate(ym(1950, 1), 80 * 12, 41);
    let orders = select_orders(&s, 6).unwrap();
    for method in [YW, LS] {
        // Same regression rows: PARp restricted to targets from index 12 on.
        let parp = fit_periodic(
            &s,
            &orders,
            &FitOptions {
                min_target: 12,
                ..FitOptions::parp(method)
            },
        )
        .unwrap();
        let forced = fit_periodic(
            &s,
            &orders,
            &FitOptions {
                annual: AnnualTerm::ForcedZero,
                ..FitOptions::parp(method)
            },
        )
        .unwrap();
        assert_eq!(parp.phi, forced.phi, "{method:?}");
    }
}

#[test]
fn forecasts_revert_to_the_seasonal_mean() {
    let s = ParGen::par1(0.5).generate(ym(1, 1), 5000 * 12, 51);
    let m = fit_parp(&s, &[1; MONTHS], YW).unwrap();
    let f = point_forecast(&m, &s, 60).unwrap();
    let end = s.end();
    let z60 = (f[59] - m.stats.mean[end.add_months(60).month_index()]) / m.stats.std[end.add_months(60).month_index()];
    assert!(z60.abs() < 1e-3, "{z60}");
}

#[test]
fn in_sample_residuals_are_centred() {
    let s = ParGen::par1(0.5).generate(ym(1900, 1), 300 * 12, 61);
    for model in [
        fit_parp(&s, &select_orders(&s, 6).unwrap(), YW).unwrap(),
        fit_parpa(&s, &select_orders(&s, 6).unwrap(), LS).unwrap(),
    ] {
        let res = model.residuals(&s).unwrap();
        for month in 0..MONTHS {
            let r: Vec<f64> = res
                .iter()
                .enumerate()
                .filter(|(t, _)| s.month_of(*t) == month)
                .filter_map(|(_, v)| *v)
                .collect();
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            let bound = 3.0 * model.resid_std[month] / (r.len() as f64).sqrt();
            assert!(mean.abs() <= bound, "month {month}: {mean} vs {bound}");
        }
    }
}

#[test]
fn white_noise_order_mode_is_one() {
    let mut tally = [0usize; 7];
    for seed in 0..10_000u64 {
        let s = ParGen::par1(0.0).generate(ym(1960, 1), 40 * 12, 1_000 + seed);
        for p in select_orders(&s, 6).unwrap() {
            tally[p] += 1;
        }
    }
    let mode = (1..7).max_by_key(|&p| tally[p]).unwrap();
    assert_eq!(mode, 1, "{tally:?}");
}

#[test]
fn par1_order_selection() {
    // Every month needs lag 1; spurious higher lags occur at the 5% size of
    // the significance test per lag, so the modal order over many series is 1.
    let mut tally = [0usize; 7];
    for seed in 0..200u64 {
        let s = ParGen::par1(0.8).generate(ym(1, 1), 500 * 12, 5_000 + seed);
        let orders = select_orders(&s, 6).unwrap();
        for p in orders {
            assert!(p >= 1);
            tally[p] += 1;
        }
        let model = fit_parp(&s, &[1; MONTHS], YW).unwrap();
        assert!(model.phi.iter().all(|p| (p[0] - 0.8).abs() < 0.1));
    }
    let mode = (1..7).max_by_key(|&p| tally[p]).unwrap();
    assert_eq!(mode, 1, "{tally:?}");
    let share = tally[1] as f64 / (200 * 12) as f64;
    println!("share of months with p = 1: {share:.3} (tally {tally:?})");
}

fn arb_series() -> impl Strategy<Value = MonthlySeries> {
    (1u32..=12, prop::collection::vec(1.0f64..1e4, 36..120))
        .prop_map(|(m, v)| MonthlySeries::new("X", ym(2000, m), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalize_round_trip(s in arb_series()) {
        let stats = periodic_stats(&s).unwrap();
        let z = normalize(&s, &stats).unwrap();
        let back = denormalize(&z, s.start().month_index(), &stats);
        for (a, b) in back.iter().zip(s.values()) {
            prop_assert!(((a - b) / b).abs() <= 1e-10);
        }
    }

    #[test]
    fn periodic_stats_ignore_order_within_month(s in arb_series(), swap_year in 0usize..3) {
        // Swap the first two observations of every calendar month.
        let mut v = s.values().to_vec();
        let years = v.len() / 12;
        if years >= 2 {
            let a = swap_year.min(years - 2) * 12;
            for i in a..a + 12 {
                v.swap(i, i + 12);
            }
        }
        let t = MonthlySeries::new("X", s.start(), v).unwrap();
        let (p, q) = (periodic_stats(&s).unwrap(), periodic_stats(&t).unwrap());
        for m in 0..MONTHS {
            prop_assert!((p.mean[m] - q.mean[m]).abs() <= 1e-9 * p.mean[m].abs().max(1.0));
            prop_assert!((p.std[m] - q.std[m]).abs() <= 1e-9 * p.std[m].max(1.0));
        }
    }

    #[test]
    fn annual_stats_shift_equivariant(s in arb_series(), c in 0.0f64..1e3) {
        let shifted = MonthlySeries::new("X", s.start(), s.values().iter().map(|v| v + c).collect()).unwrap();
        let a = annual_stats(&s, 12).unwrap();
        let b = annual_stats(&shifted, 12).unwrap();
        for (x, y) in a.averages.iter().zip(&b.averages) {
            prop_assert!((y - x - c).abs() <= 1e-10 * (1.0 + y.abs()));
        }
        for m in 0..MONTHS {
            if a.params.count[m] > 0 {
                prop_assert!((b.params.mean[m] - a.params.mean[m] - c).abs() <= 1e-10 * (1.0 + b.params.mean[m].abs()));
                prop_assert!((b.params.std[m] - a.params.std[m]).abs() <= 1e-10 * (1.0 + b.params.mean[m].abs()));
            }
        }
    }
}

#[test]
fn generator_sanity() {
    let s = ParGen::par1(0.5).generate(ym(1, 1), 2000 * 12, 99);
    let st = periodic_stats(&s).unwrap();
    for m in 0..MONTHS {
        assert!((st.mean[m] - seasonal_mean(m)).abs() < 5.0);
        assert!((st.std[m] / SIGMA - 1.0).abs() < 0.05);
    }
}
