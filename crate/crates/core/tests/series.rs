use proptest::prelude::*;
use tsecon::series::*;
use tsecon::{TimeSeries, YearMonth};

fn series(values: Vec<f64>) -> TimeSeries {
    TimeSeries::new("x", YearMonth::new(2000, 1).unwrap(), values).unwrap()
}

#[test]
fn second_difference_of_squares_is_constant() {
    let s = series((1..=8).map(|i| (i * i) as f64).collect());
    let d = difference(&s, 2).unwrap();
    assert!(d.values().iter().all(|v| *v == 2.0));
}

#[test]
fn undifference_continues_a_quadratic() {
    let history: Vec<f64> = (0..6).map(|i| (i * i) as f64).collect();
    let next = undifference(&history, 2, &[2.0, 2.0, 2.0]).unwrap();
    assert_eq!(next, vec![36.0, 49.0, 64.0]);
}

#[test]
fn split_of_ten_at_eighty_percent() {
    assert_eq!(split_point(10, 0.8).unwrap(), 8);
    let (a, b) = chrono_split(&(0..10).collect::<Vec<_>>(), 0.8).unwrap();
    assert_eq!((a.len(), b.len()), (8, 2));
    assert!(split_point(10, 1.0).is_err() || split_point(10, 1.0).unwrap() <= 10);
}

proptest! {
    #[test]
    fn integrate_inverts_difference(v in prop::collection::vec(-1e12f64..1e12, 5..80), d in 0usize..4) {
        let s = series(v);
        let back = integrate(&difference(&s, d).unwrap()).unwrap();
        prop_assert_eq!(back.len(), s.len());
        for (a, b) in back.values().iter().zip(s.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(back.start(), s.start());
    }

    #[test]
    fn first_difference_is_pairwise(v in prop::collection::vec(-1e6f64..1e6, 2..50)) {
        let d = difference(&series(v.clone()), 1).unwrap();
        prop_assert_eq!(d.values().len(), v.len() - 1);
        for (i, x) in d.values().iter().enumerate() {
            prop_assert_eq!(*x, v[i + 1] - v[i]);
        }
    }

    #[test]
    fn split_is_a_partition(n in 2usize..2000, frac in 0.05f64..0.95) {
        let k = split_point(n, frac).unwrap();
        prop_assert!(k <= n);
        prop_assert!((k as f64) >= n as f64 * frac - 1e-6);
        prop_assert!((k as f64) < n as f64 * frac + 1.0);
    }

    #[test]
    fn month_arithmetic_round_trips(y in 1900i32..2100, m in 1u32..=12, k in -600i64..600) {
        let a = YearMonth::new(y, m).unwrap();
        let b = a.add_months(k);
        prop_assert_eq!(a.months_until(&b), k);
        prop_assert_eq!(YearMonth::parse(&b.iso_date()).unwrap(), b);
    }

    #[test]
    fn autocorrelations_are_bounded(v in prop::collection::vec(-100f64..100.0, 20..120)) {
        prop_assume!(v.iter().any(|x| (x - v[0]).abs() > 1e-6));
        let r = autocorrelations(&v, 10).unwrap();
        prop_assert_eq!(r[0], 1.0);
        prop_assert!(r.iter().all(|x| x.abs() <= 1.0 + 1e-12));
    }
}
