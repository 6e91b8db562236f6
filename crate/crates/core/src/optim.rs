//! Derivative-free and quasi-Newton minimizers for the likelihood fits.
//!
//! Objectives may return non-finite values for infeasible points; those are
//! treated as `+∞` so line searches back away from them.

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when the gradient infinity-norm falls below `grad_tol·(1 + |f|)`.
    pub grad_tol: f64,
    /// Stop when the relative decrease over one iteration falls below this.
    pub f_tol: f64,
    /// Relative step for central-difference gradients.
    pub fd_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 400,
            grad_tol: 1e-7,
            f_tol: 1e-13,
            fd_step: 1e-6,
        }
    }
}

fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Central-difference gradient.
pub fn numerical_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], rel_step: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = rel_step * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = eval(f, &xp);
        xp[i] = x[i] - h;
        let fm = eval(f, &xp);
        xp[i] = x[i];
        g[i] = if fp.is_finite() && fm.is_finite() {
            (fp - fm) / (2.0 * h)
        } else {
            let f0 = eval(f, x);
            if fp.is_finite() {
                (fp - f0) / h
            } else if fm.is_finite() {
                (f0 - fm) / h
            } else {
                0.0
            }
        };
    }
    g
}

/// Central-difference Hessian.
pub fn numerical_hessian<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], rel_step: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| rel_step * v.abs().max(1.0)).collect();
    let mut out = vec![vec![0.0; n]; n];
    let mut xp = x.to_vec();
    let f0 = eval(f, x);
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                xp[i] = x[i] + h[i];
                let fp = eval(f, &xp);
                xp[i] = x[i] - h[i];
                let fm = eval(f, &xp);
                xp[i] = x[i];
                (fp - 2.0 * f0 + fm) / (h[i] * h[i])
            } else {
                let mut corner = |si: f64, sj: f64| {
                    xp[i] = x[i] + si * h[i];
                    xp[j] = x[j] + sj * h[j];
                    let v = eval(f, &xp);
                    xp[i] = x[i];
                    xp[j] = x[j];
                    v
                };
                (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                    / (4.0 * h[i] * h[j])
            };
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS with central-difference gradients and a backtracking Armijo search.
pub fn bfgs<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: BfgsOptions) -> Minimum {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = eval(&f, &x);
    if n == 0 || !fx.is_finite() {
        return Minimum {
            x,
            value: fx,
            iterations: 0,
            converged: n == 0 && fx.is_finite(),
        };
    }
    let identity = |n: usize| {
        let mut h = vec![vec![0.0; n]; n];
        for (i, row) in h.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        h
    };
    let mut hinv = identity(n);
    let mut g = numerical_gradient(&f, &x, opts.fd_step);
    let mut converged = false;
    let mut iter = 0;
    let mut restarted = false;
    while iter < opts.max_iter {
        iter += 1;
        let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gnorm <= opts.grad_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        let mut dir: Vec<f64> = (0..n).map(|i| -dot(&hinv[i], &g)).collect();
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            hinv = identity(n);
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + alpha * di).collect();
            let ft = eval(&f, &trial);
            if ft <= fx + 1e-4 * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            if restarted {
                converged = gnorm <= 1e-4 * (1.0 + fx.abs());
                break;
            }
            restarted = true;
            hinv = identity(n);
            continue;
        };
        restarted = false;
        let gn = numerical_gradient(&f, &xn, opts.fd_step);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let rel_change = (fx - fnew).abs() / (1.0 + fx.abs());
        x = xn;
        g = gn;
        let done = rel_change < opts.f_tol;
        fx = fnew;
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            // H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&hinv[i], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    hinv[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        if done {
            converged = true;
            break;
        }
    }
    Minimum {
        x,
        value: fx,
        iterations: iter,
        converged,
    }
}

/// Nelder-Mead simplex search.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, max_iter: usize, tol: f64) -> Minimum {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step * x0[i].abs().max(1.0);
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(&f, p)).collect();
    let mut iter = 0;
    let mut converged = false;
    while iter < max_iter {
        iter += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let spread = (values[n] - values[0]).abs();
        if values[0].is_finite() && spread <= tol * (1.0 + values[0].abs()) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect()
        };
        let reflected = along(-1.0);
        let fr = eval(&f, &reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = eval(&f, &expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let contracted = if fr < values[n] { along(-0.5) } else { along(0.5) };
            let fc = eval(&f, &contracted);
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    simplex[i] = best
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, p)| b + 0.5 * (p - b))
                        .collect();
                    values[i] = eval(&f, &simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        iterations: iter,
        converged,
    }
}
