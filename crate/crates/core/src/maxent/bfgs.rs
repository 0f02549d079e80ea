//! BFGS with Armijo backtracking for smooth convex objectives that may be
//! undefined (infeasible) on part of the domain.

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
    pub shrink: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            tol: 1e-8,
            max_iter: 500,
            armijo: 1e-4,
            shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f`, which returns `None` at infeasible points. Returns `None`
/// only if `x0` is infeasible; otherwise the best iterate, flagged
/// `converged` when the gradient norm reached `opts.tol`.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> Option<BfgsResult>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x)?;
    let mut h = identity(n);
    let mut iterations = 0;
    let mut resets = 0;

    while norm(&g) > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i], &g)).collect();
        let mut slope = dot(&p, &g);
        if slope >= 0.0 {
            h = identity(n);
            p = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let gnorm = norm(&g);
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-20 {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
            if let Some((fn_, gn)) = f(&xn) {
                let armijo = fn_ <= fx + opts.armijo * alpha * slope;
                // Near the optimum the decrease drowns in rounding; accept
                // steps that keep the value flat and shrink the gradient.
                let flat = fn_ <= fx + 1e-14 * fx.abs().max(1.0) && norm(&gn) < gnorm;
                if armijo || flat {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            alpha *= opts.shrink;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if resets < 2 {
                resets += 1;
                h = identity(n);
                continue;
            }
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if iterations == 1 || resets > 0 {
                let scale = sy / dot(&y, &y);
                h = identity(n);
                h.iter_mut().for_each(|row| row.iter_mut().for_each(|v| *v *= scale));
                resets = 0;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        x = xn;
        fx = fn_;
        g = gn;
    }
    let grad_norm = norm(&g);
    Some(BfgsResult {
        x,
        value: fx,
        grad_norm,
        iterations,
        converged: grad_norm <= opts.tol,
    })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
