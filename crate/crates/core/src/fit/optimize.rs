//! Derivative-free simplex and quasi-Newton minimizers with
//! central-difference derivatives, plus the small dense linear algebra the
//! fitting layer needs. Everything here minimizes; callers negate the
//! log-likelihood.

#[derive(Debug, Clone, Copy)]
pub(crate) struct OptimOptions {
    pub max_iter: usize,
    pub f_tol: f64,
    pub x_tol: f64,
    pub g_tol: f64,
    pub grad_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iter: 400,
            f_tol: 1e-10,
            x_tol: 1e-8,
            g_tol: 1e-3,
            grad_step: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct OptimOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
}

/// Nelder–Mead simplex minimization with the standard reflection, expansion,
/// contraction and shrink coefficients.
pub(crate) fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    initial_step: f64,
    opts: &OptimOptions,
) -> OptimOutcome {
    let n = x0.len();
    if n == 0 {
        let fx = f(x0);
        return OptimOutcome {
            x: vec![],
            f: fx,
            converged: true,
        };
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += initial_step * (1.0 + p[i].abs());
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        // sort ascending by value
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let reordered: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let reordered_vals: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = reordered;
        values = reordered_vals;

        let f_best = values[0];
        let f_worst = values[n];
        let spread = (f_worst - f_best).abs();
        let x_spread = (0..n)
            .map(|j| {
                let col: Vec<f64> = simplex.iter().map(|p| p[j]).collect();
                let mx = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mn = col.iter().cloned().fold(f64::INFINITY, f64::min);
                mx - mn
            })
            .fold(0.0_f64, f64::max);
        if spread <= opts.f_tol * (f_best.abs() + opts.f_tol) && x_spread <= opts.x_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let blend = |c: f64, w: f64, t: f64| c + t * (c - w);

        let reflected: Vec<f64> = (0..n)
            .map(|j| blend(centroid[j], simplex[n][j], alpha))
            .collect();
        let f_ref = f(&reflected);
        if f_ref < values[0] {
            let expanded: Vec<f64> = (0..n)
                .map(|j| blend(centroid[j], simplex[n][j], gamma))
                .collect();
            let f_exp = f(&expanded);
            if f_exp < f_ref {
                simplex[n] = expanded;
                values[n] = f_exp;
            } else {
                simplex[n] = reflected;
                values[n] = f_ref;
            }
        } else if f_ref < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_ref;
        } else {
            // contraction, outside or inside
            let (contracted, f_con) = if f_ref < values[n] {
                let p: Vec<f64> = (0..n)
                    .map(|j| centroid[j] + rho * (reflected[j] - centroid[j]))
                    .collect();
                let v = f(&p);
                (p, v)
            } else {
                let p: Vec<f64> = (0..n)
                    .map(|j| centroid[j] - rho * (centroid[j] - simplex[n][j]))
                    .collect();
                let v = f(&p);
                (p, v)
            };
            if f_con < values[n].min(f_ref) {
                simplex[n] = contracted;
                values[n] = f_con;
            } else {
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    OptimOutcome {
        x: simplex[best].clone(),
        f: values[best],
        converged,
    }
}

/// Central-difference gradient with per-coordinate steps scaled by
/// (1 + |x_i|).
pub(crate) fn gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], step: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = step * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central-difference Hessian.
pub(crate) fn hessian<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], step: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let f0 = f(x);
    let hs: Vec<f64> = x.iter().map(|v| step * (1.0 + v.abs())).collect();
    let mut h = vec![vec![0.0; n]; n];
    let mut probe = x.to_vec();
    for i in 0..n {
        probe[i] = x[i] + hs[i];
        let fp = f(&probe);
        probe[i] = x[i] - hs[i];
        let fm = f(&probe);
        probe[i] = x[i];
        h[i][i] = (fp - 2.0 * f0 + fm) / (hs[i] * hs[i]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            probe[i] = x[i] + hs[i];
            probe[j] = x[j] + hs[j];
            let fpp = f(&probe);
            probe[j] = x[j] - hs[j];
            let fpm = f(&probe);
            probe[i] = x[i] - hs[i];
            let fmm = f(&probe);
            probe[j] = x[j] + hs[j];
            let fmp = f(&probe);
            probe[i] = x[i];
            probe[j] = x[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * hs[i] * hs[j]);
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    h
}

/// Gauss–Jordan inversion with partial pivoting; None when singular.
pub(crate) fn invert(matrix: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale = matrix
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let factor = a[i][col];
                if factor != 0.0 {
                    for j in 0..n {
                        a[i][j] -= factor * a[col][j];
                        inv[i][j] -= factor * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// BFGS with backtracking Armijo line search and numeric gradients.
pub(crate) fn bfgs<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &OptimOptions,
) -> OptimOutcome {
    let n = x0.len();
    if n == 0 {
        let fx = f(x0);
        return OptimOutcome {
            x: vec![],
            f: fx,
            converged: true,
        };
    }
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut g = gradient(&mut f, &x, opts.grad_step);
    // inverse Hessian approximation
    let mut h: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut converged = false;
    let mut stall = 0;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        if g.iter().fold(0.0_f64, |m, v| m.max(v.abs())) <= opts.g_tol {
            converged = true;
            break;
        }
        let mut d: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| h[i][j] * g[j]).sum::<f64>())
            .collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            // not a descent direction: reset to steepest descent
            h = (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            d = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        // backtracking line search
        let mut t = 1.0;
        let c1 = 1e-4;
        let mut x_new = vec![0.0; n];
        let mut f_new = f64::INFINITY;
        let mut ok = false;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + t * d[i];
            }
            f_new = f(&x_new);
            if f_new <= fx + c1 * t * slope {
                ok = true;
                break;
            }
            t *= 0.5;
        }
        if !ok {
            // no progress possible along this direction
            converged = g.iter().fold(0.0_f64, |m, v| m.max(v.abs())) <= 10.0 * opts.g_tol;
            break;
        }
        let g_new = gradient(&mut f, &x_new, opts.grad_step);
        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let f_drop = fx - f_new;
        x = x_new.clone();
        fx = f_new;
        g = g_new;
        if sy > 1e-12 {
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho_ = 1.0 / sy;
            let hy: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| h[i][j] * y[j]).sum::<f64>())
                .collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += -rho_ * (s[i] * hy[j] + hy[i] * s[j])
                        + rho_ * rho_ * yhy * s[i] * s[j]
                        + rho_ * s[i] * s[j];
                }
            }
        }
        if f_drop.abs() <= opts.f_tol * (fx.abs() + opts.f_tol) {
            stall += 1;
            if stall >= 2 {
                converged = true;
                break;
            }
        } else {
            stall = 0;
        }
    }
    OptimOutcome {
        x,
        f: fx,
        converged,
    }
}
