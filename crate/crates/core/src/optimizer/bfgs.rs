//! Projected quasi-Newton minimization over a box.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iters: usize,
    /// Infinity norm of the projected gradient step at which to stop.
    pub pg_tol: f64,
    /// Relative objective change below which a step counts as stalled.
    pub f_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 300,
            pg_tol: 1e-7,
            f_tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    (0..x.len())
        .map(|i| ((x[i] - g[i]).clamp(lo[i], hi[i]) - x[i]).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `fg` (value and gradient) over `[lo, hi]` from `x0`.
///
/// Variables at a bound whose gradient pushes outward are held fixed for the
/// step; the rest follow the inverse-Hessian direction, with a projected
/// Armijo backtracking search. Falls back to steepest descent when the
/// quasi-Newton direction fails.
pub fn minimize_box<F>(mut fg: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: &BfgsOptions) -> BfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut f, mut g) = fg(&x);
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut Vec<f64>, scale: f64| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = scale;
        }
    };
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    reset(&mut h, if gmax > 1.0 { 1.0 / gmax } else { 1.0 });
    let mut fresh = true;

    for iter in 0..opts.max_iters {
        if projected_gradient_norm(&x, &g, lo, hi) <= opts.pg_tol {
            return BfgsOutcome { x, f, iterations: iter, converged: true };
        }
        let bind = 1e-12;
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] + bind && g[i] > 0.0) || (x[i] >= hi[i] - bind && g[i] < 0.0)))
            .collect();

        let mut accepted = None;
        for attempt in 0..2 {
            let use_h = attempt == 0;
            let mut d = vec![0.0; n];
            for i in 0..n {
                if !free[i] {
                    continue;
                }
                d[i] = if use_h {
                    -(0..n).filter(|&j| free[j]).map(|j| h[i * n + j] * g[j]).sum::<f64>()
                } else {
                    -g[i] * h[i * n + i].abs().max(1e-12)
                };
            }
            if dot(&d, &g) >= 0.0 {
                continue;
            }
            let mut alpha = 1.0;
            for _ in 0..60 {
                let mut xn: Vec<f64> = (0..n).map(|i| x[i] + alpha * d[i]).collect();
                project(&mut xn, lo, hi);
                let step: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
                let decrease = dot(&g, &step);
                if step.iter().all(|s| *s == 0.0) {
                    break;
                }
                let (fnew, gnew) = fg(&xn);
                if fnew.is_finite() && fnew <= f + 1e-4 * decrease {
                    accepted = Some((xn, fnew, gnew, step));
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }

        let Some((xn, fnew, gnew, s)) = accepted else {
            return BfgsOutcome { x, f, iterations: iter, converged: false };
        };
        let y: Vec<f64> = (0..n).map(|i| gnew[i] - g[i]).collect();
        let sy = dot(&s, &y);
        let stalled = (f - fnew).abs() <= opts.f_tol * (1.0 + f.abs());
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if fresh {
                reset(&mut h, sy / dot(&y, &y));
                fresh = false;
            }
            // H <- (I - r s y^T) H (I - r y s^T) + r s s^T
            let r = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -r * (s[i] * hy[j] + hy[i] * s[j]) + (r * r * yhy + r) * s[i] * s[j];
                }
            }
        }
        x = xn;
        f = fnew;
        g = gnew;
        if stalled {
            let converged = projected_gradient_norm(&x, &g, lo, hi) <= opts.pg_tol.sqrt();
            return BfgsOutcome { x, f, iterations: iter + 1, converged };
        }
    }
    let converged = projected_gradient_norm(&x, &g, lo, hi) <= opts.pg_tol;
    BfgsOutcome { x, f, iterations: opts.max_iters, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(c: Vec<f64>, w: Vec<f64>) -> impl FnMut(&[f64]) -> (f64, Vec<f64>) {
        move |x: &[f64]| {
            let f = x.iter().zip(&c).zip(&w).map(|((x, c), w)| w * (x - c).powi(2)).sum();
            let g = x.iter().zip(&c).zip(&w).map(|((x, c), w)| 2.0 * w * (x - c)).collect();
            (f, g)
        }
    }

    #[test]
    fn interior_minimum() {
        let out = minimize_box(quad(vec![0.3, 0.7], vec![1.0, 50.0]), &[0.9, 0.1], &[0.0; 2], &[1.0; 2], &BfgsOptions::default());
        assert!(out.converged);
        assert!((out.x[0] - 0.3).abs() < 1e-6 && (out.x[1] - 0.7).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn bound_active_minimum() {
        let out = minimize_box(quad(vec![1.4, -0.2], vec![1.0, 3.0]), &[0.5, 0.5], &[0.0; 2], &[1.0; 2], &BfgsOptions::default());
        assert!(out.converged);
        assert_eq!(out.x, vec![1.0, 0.0]);
    }

    #[test]
    fn rosenbrock_in_box() {
        let rb = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (f, g)
        };
        let out = minimize_box(rb, &[-1.2, 1.0], &[-2.0, -2.0], &[2.0, 2.0], &BfgsOptions { max_iters: 500, ..Default::default() });
        assert!((out.x[0] - 1.0).abs() < 1e-4 && (out.x[1] - 1.0).abs() < 1e-4, "{:?}", out);
    }
}
