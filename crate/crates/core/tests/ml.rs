use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use tsecon::ensemble::make_cv_slices;
use tsecon::linalg::ols;
use tsecon::ml::*;
use tsecon::optim::nelder_mead;
use tsecon::{sim, Error};

fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

fn correlated(seed: u64, n: usize, p: usize) -> DMatrix<f64> {
    let mut rng = sim::rng(seed);
    let common = sim::normals(&mut rng, n);
    let noise = sim::normals(&mut rng, n * p);
    DMatrix::from_fn(n, p, |i, j| (j as f64 + 1.0) * common[i] + noise[i * p + j] + j as f64)
}

#[test]
fn pca_perfectly_correlated_pair() {
    let a: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
    let x = DMatrix::from_fn(50, 2, |i, j| if j == 0 { a[i] } else { 3.0 * a[i] - 1.0 });
    let m = fit_pca(&x, &names(2)).unwrap();
    assert!((m.eigenvalues[0] - 2.0).abs() < 1e-12);
    assert!(m.eigenvalues[1].abs() < 1e-12);
    assert!((m.variance_ratio()[0] - 1.0).abs() < 1e-12);
}

#[test]
fn pca_independent_columns_have_unit_eigenvalues() {
    let mut rng = sim::rng(3);
    let v = sim::normals(&mut rng, 5000 * 4);
    let x = DMatrix::from_fn(5000, 4, |i, j| v[i * 4 + j] * (j + 1) as f64);
    let m = fit_pca(&x, &names(4)).unwrap();
    for l in &m.eigenvalues {
        assert!((l - 1.0).abs() < 0.15, "{:?}", m.eigenvalues);
    }
}

#[test]
fn pca_structural_invariants() {
    let x = correlated(4, 300, 5);
    let m = fit_pca(&x, &names(5)).unwrap();
    assert!((m.eigenvalues.iter().sum::<f64>() - 5.0).abs() < 1e-8);
    for w in m.eigenvalues.windows(2) {
        assert!(w[0] >= w[1] && w[1] >= 0.0);
    }
    let e = &m.eigenvectors;
    assert!((e.transpose() * e - DMatrix::identity(5, 5)).abs().max() < 1e-9);
    let scores = m.project(&x, 5).unwrap();
    for c in scores.column_iter() {
        assert!(c.mean().abs() < 1e-9);
    }
    let cov = scores.transpose() * &scores / 299.0;
    for i in 0..5 {
        for j in 0..5 {
            let want = if i == j { m.eigenvalues[i] } else { 0.0 };
            assert!((cov[(i, j)] - want).abs() < 1e-8, "{i} {j}");
        }
    }
    let back = &scores * e.transpose();
    assert!((back - m.standardize(&x).unwrap()).abs().max() < 1e-9);
    let cum = m.cumulative_variance_ratio();
    assert!((cum[4] - 1.0).abs() < 1e-12);
    assert_eq!(m.project(&x, 2).unwrap().ncols(), 2);
}

#[test]
fn pca_contract_errors() {
    let mut x = correlated(5, 40, 3);
    x.set_column(1, &DVector::from_element(40, 2.5));
    assert_eq!(fit_pca(&x, &names(3)).unwrap_err(), Error::DegenerateColumn("x1".into()));
    let m = fit_pca(&correlated(5, 40, 3), &names(3)).unwrap();
    assert!(matches!(m.project(&correlated(5, 10, 2), 2), Err(Error::ShapeMismatch(_))));
    assert!(m.project(&correlated(5, 10, 3), 4).is_err());
    assert!(fit_pca(&correlated(5, 3, 3), &names(3)).is_err());
}

#[test]
fn knn_trivial_cases() {
    let x = correlated(6, 30, 2);
    let y: Vec<f64> = (0..30).map(|i| i as f64 * 1.5).collect();
    let q = x.rows(7, 1).into_owned();
    assert_eq!(knn_predict(&x, &y, &q, 1).unwrap(), vec![y[7]]);
    let mean = y.iter().sum::<f64>() / 30.0;
    for v in knn_predict(&x, &y, &correlated(7, 5, 2), 30).unwrap() {
        assert!((v - mean).abs() < 1e-12);
    }
}

fn ols_slopes(x: &DMatrix<f64>, y: &[f64]) -> (f64, Vec<f64>) {
    let d = DMatrix::from_fn(x.nrows(), x.ncols() + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let c = ols(&d, &DVector::from_column_slice(y)).unwrap().coefficients;
    (c[0], c.iter().skip(1).copied().collect())
}

#[test]
fn ridge_limits() {
    let x = correlated(8, 100, 3);
    let mut rng = sim::rng(9);
    let y: Vec<f64> = (0..100).map(|i| 2.0 + x[(i, 0)] - 0.5 * x[(i, 2)] + rng.random::<f64>()).collect();
    let (b0, b) = ols_slopes(&x, &y);
    let r0 = fit_ridge(&x, &y, 0.0).unwrap();
    let (i0, c0) = r0.linear_coefficients().unwrap();
    assert!((i0 - b0).abs() < 1e-8);
    for (u, v) in c0.iter().zip(&b) {
        assert!((u - v).abs() < 1e-8);
    }
    let big = fit_ridge(&x, &y, 1e6).unwrap();
    let (ib, cb) = big.linear_coefficients().unwrap();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(norm(cb) < 1e-3 * norm(&b) * 10.0);
    let ybar = y.iter().sum::<f64>() / 100.0;
    assert!((ib - ybar).abs() < 0.05 * ybar.abs());
    assert_eq!(cb.len(), 3);
}

/// Brute-force primal minimisation over (w, b) for a one-feature problem.
fn svr_oracle(x: &DMatrix<f64>, y: &[f64], c: f64, loss: SvrLoss, eps: f64) -> f64 {
    let f = |p: &[f64]| svr_objective(x, y, &[p[0]], p[1], c, loss, eps);
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for a in -400..=400 {
        for b in -400..=400 {
            let p = [a as f64 * 0.0125, b as f64 * 0.0125];
            let v = f(&p);
            if v < best.0 {
                best = (v, p);
            }
        }
    }
    nelder_mead(f, &best.1, 0.01, 20_000, 1e-14).value.min(best.0)
}

fn five_points() -> (DMatrix<f64>, Vec<f64>) {
    (DMatrix::from_column_slice(5, 1, &[-1.0, -0.3, 0.2, 0.9, 1.4]), vec![-1.7, -0.2, 0.9, 1.1, 2.6])
}

#[test]
fn svr_matches_brute_force_objective() {
    let (x, y) = five_points();
    for loss in [SvrLoss::L1, SvrLoss::L2] {
        for c in [0.5, 2.0, 8.0] {
            let s = svr_solve(&x, &y, c, loss, 0.1).unwrap();
            let oracle = svr_oracle(&x, &y, c, loss, 0.1);
            assert!(s.objective <= oracle + 1e-7, "{loss:?} C={c}: {} > {oracle}", s.objective);
            assert!((s.objective - oracle).abs() < 1e-4, "{loss:?} C={c}: {} vs {oracle}", s.objective);
        }
    }
}

#[test]
fn svr_doubling_cost_never_adds_slack() {
    let (x, y) = five_points();
    for loss in [SvrLoss::L1, SvrLoss::L2] {
        let mut prev = f64::INFINITY;
        for c in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let s = svr_solve(&x, &y, c, loss, 0.05).unwrap();
            assert!(s.slack <= prev + 1e-7, "{loss:?} C={c}");
            prev = s.slack;
        }
    }
}

#[test]
fn ann_gradient_matches_finite_differences() {
    let mut rng = sim::rng(12);
    for (p, h) in [(1, 1), (3, 4), (2, 8), (6, 10)] {
        let x = DMatrix::from_fn(15, p, |_, _| rng.random::<f64>());
        let y: Vec<f64> = (0..15).map(|_| rng.random::<f64>()).collect();
        for _ in 0..10 {
            let params: Vec<f64> = (0..AnnNet::n_params(p, h)).map(|_| rng.random_range(-1.0..1.0)).collect();
            let net = AnnNet::new(p, h, params.clone()).unwrap();
            let (_, g) = net.loss_and_gradient(&x, &y, 0.3);
            for k in 0..params.len() {
                let step = 1e-6;
                let mut up = params.clone();
                let mut dn = params.clone();
                up[k] += step;
                dn[k] -= step;
                let lu = AnnNet::new(p, h, up).unwrap().loss_and_gradient(&x, &y, 0.3).0;
                let ld = AnnNet::new(p, h, dn).unwrap().loss_and_gradient(&x, &y, 0.3).0;
                let fd = (lu - ld) / (2.0 * step);
                assert!((fd - g[k]).abs() < 1e-5, "{p}-{h} param {k}: {fd} vs {}", g[k]);
            }
        }
    }
}

#[test]
fn ann_beats_linear_on_nonlinear_target() {
    let n = 120;
    let x = DMatrix::from_fn(n, 1, |i, _| i as f64 / (n - 1) as f64);
    let y: Vec<f64> = x.iter().map(|v| 1.0 + (v - 0.5).abs()).collect();
    let (b0, b) = ols_slopes(&x, &y);
    let lin: f64 = x.iter().zip(&y).map(|(v, t)| (t - b0 - b[0] * v).powi(2)).sum::<f64>() / n as f64;
    let fit = fit_ann(&x, &y, 8, 0.001, 1).unwrap();
    let pred = fit.predict(&x).unwrap();
    let mse: f64 = pred.iter().zip(&y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n as f64;
    assert!(mse < 0.5 * lin, "ann {mse} vs linear {lin}");
    let again = fit_ann(&x, &y, 8, 0.001, 1).unwrap().predict(&x).unwrap();
    assert_eq!(pred, again);
}

#[test]
fn single_point_grid() {
    let x = correlated(13, 120, 2);
    let y: Vec<f64> = (0..120).map(|i| 10.0 + x[(i, 0)]).collect();
    let cv = make_cv_slices(120, 4).unwrap();
    let r = grid_search(&[Hyper::Ridge { lambda: 3.0 }], &x, &y, &cv, &FitOptions::default()).unwrap();
    assert_eq!(r.best, Hyper::Ridge { lambda: 3.0 });
    assert!(grid_search(&[], &x, &y, &cv, &FitOptions::default()).is_err());
}

#[test]
fn failing_grid_reports_optimizer_failure() {
    let x = correlated(14, 120, 2);
    let y: Vec<f64> = (0..120).map(|i| 10.0 + x[(i, 0)]).collect();
    let cv = make_cv_slices(120, 4).unwrap();
    let e = grid_search(&[Hyper::Knn { k: 500 }], &x, &y, &cv, &FitOptions::default()).unwrap_err();
    assert!(matches!(e, Error::OptimizerFailed(_)));
}

#[test]
fn knn_grid_prefers_few_neighbours_on_local_signal() {
    let hits = (0..20u64)
        .filter(|&s| {
            let mut rng = sim::rng(700 + s);
            let n = 200;
            let x = DMatrix::from_fn(n, 1, |_, _| rng.random::<f64>());
            let y: Vec<f64> = x.iter().map(|v| 10.0 + 3.0 * (25.0 * v).sin() + 0.05 * rng.random::<f64>()).collect();
            let cv = make_cv_slices(n, 5).unwrap();
            let r = grid_search(&default_grid(ModelKind::Knn), &x, &y, &cv, &FitOptions::default()).unwrap();
            matches!(r.best, Hyper::Knn { k } if k <= 3)
        })
        .count();
    assert!(hits > 10, "{hits}/20");
}

#[test]
fn fitted_regressors_validate_shapes() {
    let x = correlated(15, 60, 3);
    let y: Vec<f64> = (0..60).map(|i| 5.0 + x[(i, 1)]).collect();
    for h in [
        Hyper::Knn { k: 3 },
        Hyper::Ridge { lambda: 1.0 },
        Hyper::Svr { c: 4.0, loss: SvrLoss::L2, epsilon: 0.1 },
        Hyper::Ann { hidden: 2, decay: 0.1 },
    ] {
        let f = fit_regressor(&h, &x, &y, &FitOptions::default()).unwrap();
        assert_eq!(f.predict(&x).unwrap().len(), 60);
        assert!(matches!(f.predict(&correlated(1, 4, 2)), Err(Error::ShapeMismatch(_))));
        assert_eq!(f.kind(), h.kind());
    }
}

#[test]
fn default_grids_cover_stated_ranges() {
    assert_eq!(default_grid(ModelKind::Knn).len(), 10);
    assert_eq!(default_grid(ModelKind::Svr).len(), 8);
    let ridge = default_grid(ModelKind::Ridge);
    assert!(ridge.contains(&Hyper::Ridge { lambda: 32.0 }));
    assert_eq!(ridge.len(), 15);
    assert_eq!(default_grid(ModelKind::Ann).len(), 50);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn knn_ignores_training_row_order(seed in 0u64..10_000, k in 1usize..6) {
        let mut rng = sim::rng(seed);
        let n = 25;
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let q = DMatrix::from_fn(4, 2, |_, _| rng.random::<f64>());
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let xp = DMatrix::from_fn(n, 2, |i, j| x[(perm[i], j)]);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let a = knn_predict(&x, &y, &q, k).unwrap();
        let b = knn_predict(&xp, &yp, &q, k).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn ridge_norm_decreases_with_penalty(seed in 0u64..10_000) {
        let x = correlated(seed, 40, 3);
        let mut rng = sim::rng(seed ^ 0xABCD);
        let y: Vec<f64> = (0..40).map(|i| x[(i, 0)] - x[(i, 2)] + rng.random::<f64>()).collect();
        let mut prev = f64::INFINITY;
        for lambda in ridge_lambda_grid() {
            let f = fit_ridge(&x, &y, lambda).unwrap();
            let norm: f64 = f.linear_coefficients().unwrap().1.iter().map(|b| b * b).sum::<f64>().sqrt();
            prop_assert!(norm <= prev * (1.0 + 1e-12));
            prev = norm;
        }
    }

    #[test]
    fn pca_eigenvalues_sum_to_column_count(seed in 0u64..10_000, p in 2usize..6) {
        let m = fit_pca(&correlated(seed, 60, p), &[]).unwrap();
        prop_assert!((m.eigenvalues.iter().sum::<f64>() - p as f64).abs() < 1e-8);
    }
}
