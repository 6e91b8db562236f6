use proptest::prelude::*;
use tsecon::diagnostics::*;
use tsecon::sim;

/// Re-simulates the 5% Dickey-Fuller quantile with drift at T = 100.
#[test]
fn drift_table_matches_simulation() {
    let reps = 4000;
    let mut stats: Vec<f64> = (0..reps)
        .map(|s| {
            let y = sim::random_walk(&mut sim::rng(20_000 + s), 101);
            adf(&y, 0, Deterministic::Drift, false).unwrap().statistic
        })
        .collect();
    stats.sort_by(|a, b| a.total_cmp(b));
    let q5 = stats[reps as usize / 20];
    let table = df_critical_values(Deterministic::Drift, 100)[1];
    assert!((q5 - table).abs() < 0.08, "simulated {q5}, table {table}");
}

#[test]
fn stationary_series_needs_no_differencing() {
    let y = sim::arma(&mut sim::rng(3), 10.0, &[0.4], &[], 1.0, 400);
    let s = tsecon::TimeSeries::from_values(y).unwrap();
    assert_eq!(differencing_order(&s, Deterministic::Drift, 2).unwrap().order, 0);
}

#[test]
fn twice_integrated_series_mostly_need_two() {
    let runs = 100;
    let hits = (0..runs)
        .filter(|&seed| {
            let mut level = 0.0;
            let y: Vec<f64> = sim::random_walk(&mut sim::rng(seed), 400)
                .into_iter()
                .map(|g| {
                    level += g;
                    level
                })
                .collect();
            let s = tsecon::TimeSeries::from_values(y).unwrap();
            differencing_order(&s, Deterministic::Drift, 3).unwrap().order == 2
        })
        .count();
    assert!(hits >= 85, "{hits}/{runs}");
}

proptest! {
    #[test]
    fn p_values_decrease_with_the_statistic(a in -8.0f64..2.0, b in -8.0f64..2.0, n in 20usize..1000) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(df_p_value(lo, Deterministic::Drift, n) <= df_p_value(hi, Deterministic::Drift, n));
    }

    #[test]
    fn portmanteau_is_scale_free(seed in 0u64..500, scale in 0.01f64..100.0) {
        let e = sim::normals(&mut sim::rng(seed), 200);
        let scaled: Vec<f64> = e.iter().map(|v| scale * v + 3.0).collect();
        let a = ljung_box(&e, 8, 0).unwrap();
        let b = ljung_box(&scaled, 8, 0).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() <= 1e-8 * a.statistic.max(1.0));
        let j1 = jarque_bera(&e).unwrap();
        let j2 = jarque_bera(&scaled).unwrap();
        prop_assert!((j1.statistic - j2.statistic).abs() <= 1e-7 * j1.statistic.max(1.0));
        prop_assert!((0.0..=1.0).contains(&a.p_value));
    }
}
