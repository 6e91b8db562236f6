use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use tsecon::ensemble::*;
use tsecon::ml::{fit_regressor, knn_predict, FitOptions, Hyper, RegressorFit};
use tsecon::series::{chrono_split, split_point};
use tsecon::{sim, Error, YearMonth};

#[test]
fn slices_structure() {
    let s = make_cv_slices(100, 4).unwrap();
    assert_eq!(s.width(), 12);
    assert_eq!(s.folds().len(), 4);
    for (f, w) in s.folds().iter().zip(s.folds().iter().skip(1)) {
        assert_eq!(f.validation.end, w.validation.start);
        assert!(f.validation.len() == 12);
    }
    assert_eq!(s.folds()[3].validation.end, 100);
    for f in s.folds() {
        assert_eq!(f.train.start, 0);
        assert_eq!(f.train.end, f.validation.start);
    }
    assert_eq!(s.validation_indices(), 52..100);
}

#[test]
fn single_fold_is_a_chronological_split() {
    let s = make_cv_slices(100, 1).unwrap();
    let f = &s.folds()[0];
    let frac = f.train.end as f64 / 100.0;
    let rows: Vec<usize> = (0..100).collect();
    let (train, test) = chrono_split(&rows, frac).unwrap();
    assert_eq!(split_point(100, frac).unwrap(), f.train.end);
    assert_eq!(train, (f.train.clone()).collect::<Vec<_>>());
    assert_eq!(test, (f.validation.clone()).collect::<Vec<_>>());
}

fn linear_data(seed: u64, n: usize) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = sim::rng(seed);
    let x = DMatrix::from_fn(n, 3, |_, _| rng.random::<f64>());
    let y = (0..n)
        .map(|i| 50.0 + 10.0 * x[(i, 0)] - 4.0 * x[(i, 1)] + 0.2 * rng.random::<f64>())
        .collect();
    (x, y)
}

/// With features equal to the row index, a one-neighbour model predicts from
/// the last training row, which exposes any look-ahead.
#[test]
fn out_of_fold_predictions_never_see_their_rows() {
    let n = 120;
    let x = DMatrix::from_fn(n, 1, |i, _| i as f64);
    let y: Vec<f64> = (0..n).map(|i| 1000.0 + i as f64).collect();
    let s = make_cv_slices(n, 5).unwrap();
    let opts = FitOptions { scale_features: false, seed: 0 };
    let oof = out_of_fold(&Hyper::Knn { k: 1 }, &x, &y, &s, &opts).unwrap();
    assert_eq!(oof.len(), s.validation_indices().len());
    let mut r = 0;
    for f in s.folds() {
        for i in f.validation.clone() {
            assert!(f.train.end <= i);
            assert_eq!(oof[r], y[f.train.end - 1]);
            r += 1;
        }
    }
}

#[test]
fn meta_learner_favours_perfect_component() {
    let mut rng = sim::rng(2);
    let n = 200;
    let y: Vec<f64> = (0..n).map(|_| 100.0 + 10.0 * rng.random::<f64>()).collect();
    let noise: Vec<f64> = (0..n).map(|_| 100.0 + 10.0 * rng.random::<f64>()).collect();
    let oof = DMatrix::from_fn(n, 2, |i, j| if j == 0 { y[i] } else { noise[i] });
    let (_, meta) = fit_meta(&oof, &y, &tsecon::ml::ridge_lambda_grid(), 5).unwrap();
    let (_, w) = meta.linear_coefficients().unwrap();
    assert!(w[0].abs() >= 5.0 * w[1].abs(), "{w:?}");
}

fn small_components() -> Vec<ComponentSpec> {
    vec![
        ComponentSpec::new("knn", (1..=4).map(|k| Hyper::Knn { k }).collect()),
        ComponentSpec::new("ridge", [0.0625, 1.0, 16.0].map(|lambda| Hyper::Ridge { lambda }).to_vec()),
        ComponentSpec::new(
            "svr",
            vec![Hyper::Svr { c: 4.0, loss: tsecon::ml::SvrLoss::L2, epsilon: 0.1 }],
        ),
        ComponentSpec::new("ann", vec![Hyper::Ann { hidden: 3, decay: 0.1 }]),
    ]
}

#[test]
fn stacked_model_on_synthetic_linear_data() {
    let (x, y) = linear_data(3, 160);
    let s = make_cv_slices(160, 6).unwrap();
    let m = stack_fit(&x, &y, &s, &small_components(), &StackOptions::default()).unwrap();
    assert_eq!(m.components.len(), 4);
    assert_eq!(m.oof.shape(), (s.validation_indices().len(), 4));
    assert_eq!(m.meta_weights().1.len(), 4);
    let (xt, yt) = linear_data(4, 40);
    let pred = m.predict(&xt).unwrap();
    let report = evaluate("stack", &yt, &pred).unwrap();
    assert!(report.mape < 0.02, "{report:?}");
    let knn = evaluate("knn", &yt, &m.components[0].fit.predict(&xt).unwrap()).unwrap();
    assert!(report.mape < knn.mape);
}

#[test]
fn single_component_stack_is_affine_recalibration() {
    let (x, y) = linear_data(5, 120);
    let s = make_cv_slices(120, 4).unwrap();
    let spec = vec![ComponentSpec::new("knn", vec![Hyper::Knn { k: 3 }])];
    let m = stack_fit(&x, &y, &s, &spec, &StackOptions::default()).unwrap();
    let (a, w) = m.meta_weights();
    let base = m.components[0].fit.predict(&x).unwrap();
    let stacked = m.predict(&x).unwrap();
    for (s, b) in stacked.iter().zip(&base) {
        assert!((s - (a + w[0] * b)).abs() < 1e-9);
    }
}

#[test]
fn component_failure_names_the_component() {
    let (x, y) = linear_data(6, 120);
    let s = make_cv_slices(120, 4).unwrap();
    let spec = vec![ComponentSpec::new("broken-knn", vec![Hyper::Knn { k: 10_000 }])];
    match stack_fit(&x, &y, &s, &spec, &StackOptions::default()) {
        Err(Error::OptimizerFailed(msg)) => assert!(msg.contains("broken-knn"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

struct Constant(f64, usize);

impl Predictor for Constant {
    fn n_features(&self) -> usize {
        self.1
    }
    fn predict_row(&self, _: &[f64]) -> tsecon::Result<f64> {
        Ok(self.0)
    }
}

#[test]
fn constant_model_gives_flat_path() {
    let x = DMatrix::from_element(30, 2, 4.0);
    let ext: [&dyn FeatureExtender; 2] = [&Persistence, &Persistence];
    let path = recursive_forecast(&Constant(7.5, 2), &x, &ext, 6, "y", YearMonth::new(2019, 1).unwrap()).unwrap();
    assert_eq!(path.mean, vec![7.5; 6]);
    assert_eq!(path.months.len(), 6);
}

fn linear_fit() -> (DMatrix<f64>, RegressorFit) {
    let (x, y) = linear_data(7, 80);
    let fit = fit_regressor(&Hyper::Ridge { lambda: 0.5 }, &x, &y, &FitOptions::default()).unwrap();
    (x, fit)
}

#[test]
fn persistence_repeats_the_one_step_prediction() {
    let (x, fit) = linear_fit();
    let last = x.row(x.nrows() - 1).iter().copied().collect::<Vec<_>>();
    let one = fit.predict_row(&last).unwrap();
    let ext: [&dyn FeatureExtender; 3] = [&Persistence, &Persistence, &Persistence];
    let path = recursive_forecast(&fit, &x, &ext, 5, "y", YearMonth::new(2019, 1).unwrap()).unwrap();
    assert!(path.mean.iter().all(|v| *v == one));
}

#[test]
fn horizon_one_equals_direct_prediction() {
    let (x, fit) = linear_fit();
    let ar = ArimaExtender { p_max: 1, q_max: 1, max_d: 1 };
    let ext: [&dyn FeatureExtender; 3] = [&ar, &Persistence, &ar];
    let path = recursive_forecast(&fit, &x, &ext, 1, "y", YearMonth::new(2019, 1).unwrap()).unwrap();
    let cols: Vec<Vec<f64>> = x.column_iter().map(|c| c.iter().copied().collect()).collect();
    let row = vec![ar.extend(&cols[0]).unwrap(), Persistence.extend(&cols[1]).unwrap(), ar.extend(&cols[2]).unwrap()];
    assert_eq!(path.mean[0], fit.predict_row(&row).unwrap());
}

struct Failing;

impl FeatureExtender for Failing {
    fn extend(&self, history: &[f64]) -> tsecon::Result<f64> {
        if history.len() > 31 {
            Err(Error::InsufficientData("stop".into()))
        } else {
            Ok(0.0)
        }
    }
}

#[test]
fn extender_failure_reports_step() {
    let x = DMatrix::from_element(30, 1, 1.0);
    let ext: [&dyn FeatureExtender; 1] = [&Failing];
    let e = recursive_forecast(&Constant(1.0, 1), &x, &ext, 5, "y", YearMonth::new(2019, 1).unwrap()).unwrap_err();
    assert!(matches!(e, Error::ForecastStep { step: 3, .. }), "{e:?}");
    let ext: [&dyn FeatureExtender; 0] = [];
    assert!(recursive_forecast(&Constant(1.0, 1), &x, &ext, 5, "y", YearMonth::new(2019, 1).unwrap()).is_err());
}

#[test]
fn knn_component_matches_direct_call() {
    let (x, y) = linear_data(8, 50);
    let opts = FitOptions { scale_features: false, seed: 0 };
    let f = fit_regressor(&Hyper::Knn { k: 4 }, &x, &y, &opts).unwrap();
    let q = x.rows(0, 5).into_owned();
    assert_eq!(f.predict(&q).unwrap(), knn_predict(&x, &y, &q, 4).unwrap());
}

proptest! {
    #[test]
    fn evaluate_matches_reference_formulas(v in prop::collection::vec((1.0f64..1e4, -1e4f64..1e4, any::<bool>()), 1..60)) {
        let actual: Vec<f64> = v.iter().map(|(a, _, neg)| if *neg { -a } else { *a }).collect();
        let pred: Vec<f64> = v.iter().map(|(_, p, _)| *p).collect();
        let r = evaluate("m", &actual, &pred).unwrap();
        let n = actual.len() as f64;
        let mut mape = 0.0;
        let mut pb = 0.0;
        for i in 0..actual.len() {
            mape += ((actual[i] - pred[i]) / actual[i]).abs();
            pb += 100.0 * (actual[i] - pred[i]) / actual[i];
        }
        mape /= n;
        pb /= n;
        prop_assert!(r.mape >= 0.0);
        prop_assert!((r.mape - mape).abs() <= 1e-12 * mape.max(1.0));
        prop_assert!((r.percent_bias - pb).abs() <= 1e-12 * pb.abs().max(1.0));
    }

    #[test]
    fn slices_are_chronological(n in 30usize..600, folds in 1usize..20) {
        if let Ok(s) = make_cv_slices(n, folds) {
            prop_assert_eq!(s.folds().len(), folds);
            let mut prev_end = s.initial_window();
            for f in s.folds() {
                prop_assert_eq!(f.validation.start, prev_end);
                prop_assert!(f.train.end <= f.validation.start);
                prop_assert_eq!(f.validation.len(), n / (folds + 4));
                prev_end = f.validation.end;
            }
            prop_assert_eq!(prev_end, n);
        }
    }
}
