//! Box-constrained quasi-Newton minimizer (projected BFGS with Armijo
//! backtracking). Small dense problems only.

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when the projected gradient's infinity norm falls below this.
    pub grad_tol: f64,
    /// Stop when successive objective values differ by less than
    /// `f_tol * (1 + |f|)`.
    pub f_tol: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 400,
            grad_tol: 1e-10,
            f_tol: 1e-15,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `objective`, which returns the value and writes the gradient
/// into its second argument.
pub fn minimize<F>(mut objective: F, x0: &[f64], opts: &BfgsOptions) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let clamp = |v: f64| v.clamp(opts.lower, opts.upper);
    let mut x: Vec<f64> = x0.iter().map(|&v| clamp(v)).collect();
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    let mut h = identity(n);

    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut dir = vec![0.0; n];

    for iter in 0..opts.max_iter {
        if projected_norm(&x, &g, opts) < opts.grad_tol {
            return Minimum {
                x,
                f,
                iterations: iter,
                converged: true,
            };
        }
        for i in 0..n {
            dir[i] = -(0..n).map(|j| h[i][j] * g[j]).sum::<f64>();
        }
        if dot(&dir, &g) >= 0.0 {
            h = identity(n);
            for i in 0..n {
                dir[i] = -g[i];
            }
        }

        let mut step = 1.0;
        let mut accepted = false;
        let mut f_new = f;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = clamp(x[i] + step * dir[i]);
            }
            let moved: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &moved);
            let f_try = objective(&x_new, &mut g_new);
            if f_try.is_finite() && f_try <= f + 1e-4 * decrease.min(0.0) {
                f_new = f_try;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no descent possible at machine precision
            let converged = projected_norm(&x, &g, opts) < opts.grad_tol.sqrt();
            return Minimum {
                x,
                f,
                iterations: iter,
                converged,
            };
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let f_old = f;
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        f = f_new;

        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            bfgs_update(&mut h, &s, &y, sy);
        }
        if (f_old - f).abs() <= opts.f_tol * (1.0 + f.abs()) && dot(&s, &s).sqrt() < 1e-12 {
            return Minimum {
                x,
                f,
                iterations: iter + 1,
                converged: true,
            };
        }
    }
    let converged = projected_norm(&x, &g, opts) < opts.grad_tol.sqrt();
    Minimum {
        x,
        f,
        iterations: opts.max_iter,
        converged,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn projected_norm(x: &[f64], g: &[f64], opts: &BfgsOptions) -> f64 {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| {
            if (xi <= opts.lower && gi > 0.0) || (xi >= opts.upper && gi < 0.0) {
                0.0
            } else {
                gi.abs()
            }
        })
        .fold(0.0, f64::max)
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let m = minimize(
            |x, g| {
                g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
                g[1] = 200.0 * (x[1] - x[0] * x[0]);
                (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
            },
            &[-1.2, 1.0],
            &BfgsOptions::default(),
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn respects_bounds() {
        let opts = BfgsOptions {
            lower: 0.0,
            upper: 10.0,
            ..Default::default()
        };
        let m = minimize(
            |x, g| {
                g[0] = 2.0 * (x[0] + 3.0);
                g[1] = 2.0 * (x[1] - 2.0);
                (x[0] + 3.0).powi(2) + (x[1] - 2.0).powi(2)
            },
            &[5.0, 5.0],
            &opts,
        );
        assert!(m.converged);
        assert_eq!(m.x[0], 0.0);
        assert!((m.x[1] - 2.0).abs() < 1e-8);
    }
}
