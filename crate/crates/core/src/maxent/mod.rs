//! Maximum-entropy reconstruction of a one-dimensional distribution from its
//! raw moments, and discretization to integer molecule counts.
//!
//! The density is `q(x) = exp(-sum_k lambda_k phi_k(y)) / Z` with
//! `y = (x - shift) / scale` and `phi_k` the orthonormal Hermite
//! polynomials. Multipliers minimize the convex dual
//! `Psi(lambda) = ln Z + sum_k lambda_k E[phi_k]`.

pub mod basis;
pub mod bfgs;
pub mod quadrature;

use std::f64::consts::{PI, SQRT_2};
use std::io::{self, Write};

use thiserror::Error;

use crate::distribution::DiscreteDistribution;
pub use basis::Basis;
use basis::{poly_deriv, poly_eval};
use bfgs::{minimize, BfgsOptions};
pub use quadrature::{build_fullline_rule, build_halfline_rule, QuadratureRule};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaxEntError {
    #[error("invalid moment constraints: {0}")]
    InvalidConstraints(String),
    #[error("infeasible moments: {0}")]
    Infeasible(String),
    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:e})")]
    NoConvergence {
        lambdas: Vec<f64>,
        grad_norm: f64,
        iterations: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// `[0, inf)`.
    HalfLine,
    /// The whole real line; for testing against closed forms.
    FullLine,
}

/// Integer points `offset, offset + step, ...` (reduced modulo `step`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    pub step: u32,
    pub offset: u32,
}

impl Lattice {
    pub const UNIT: Lattice = Lattice { step: 1, offset: 0 };

    pub fn new(step: u32, offset: u32) -> Self {
        assert!(step == 1 || step == 2, "lattice step must be 1 or 2");
        Lattice {
            step,
            offset: offset % step,
        }
    }

    pub fn contains(&self, x: u32) -> bool {
        x % self.step == self.offset
    }
}

impl Default for Lattice {
    fn default() -> Self {
        Lattice::UNIT
    }
}

/// Raw moments `mu_0 = 1, mu_1, ..., mu_M` on a support.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentConstraints {
    pub moments: Vec<f64>,
    pub support: Support,
}

impl MomentConstraints {
    pub fn half_line(moments: Vec<f64>) -> Self {
        MomentConstraints {
            moments,
            support: Support::HalfLine,
        }
    }

    pub fn full_line(moments: Vec<f64>) -> Self {
        MomentConstraints {
            moments,
            support: Support::FullLine,
        }
    }

    /// Highest moment order `M`.
    pub fn order(&self) -> usize {
        self.moments.len().saturating_sub(1)
    }

    /// Checks the invariants; returns warnings for soft violations.
    pub fn validate(&self) -> Result<Vec<String>, MaxEntError> {
        if self.order() < 1 {
            return Err(MaxEntError::InvalidConstraints("need at least mu_0 and mu_1".into()));
        }
        if let Some(v) = self.moments.iter().find(|v| !v.is_finite()) {
            return Err(MaxEntError::InvalidConstraints(format!("non-finite moment {v}")));
        }
        if (self.moments[0] - 1.0).abs() > 1e-9 {
            return Err(MaxEntError::InvalidConstraints(format!(
                "mu_0 must be 1, got {}",
                self.moments[0]
            )));
        }
        let mut warnings = Vec::new();
        if self.order() >= 2 && self.moments[2] < self.moments[1] * self.moments[1] {
            warnings.push(format!(
                "mu_2 = {} < mu_1^2 = {}",
                self.moments[2],
                self.moments[1] * self.moments[1]
            ));
        }
        Ok(warnings)
    }
}

/// Affine map `x -> (x - shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub shift: f64,
    pub scale: f64,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        shift: 0.0,
        scale: 1.0,
    };

    pub fn to_y(&self, x: f64) -> f64 {
        (x - self.shift) / self.scale
    }

    pub fn to_x(&self, y: f64) -> f64 {
        self.shift + self.scale * y
    }

    /// Raw moments of `Y = (X - shift) / scale` from those of `X`.
    pub fn forward_moments(&self, mu: &[f64]) -> Vec<f64> {
        self.affine_moments(mu, -self.shift / self.scale, 1.0 / self.scale)
    }

    /// Raw moments of `X = shift + scale Y` from those of `Y`.
    pub fn backward_moments(&self, nu: &[f64]) -> Vec<f64> {
        self.affine_moments(nu, self.shift, self.scale)
    }

    /// Moments of `a + b Z`: `E[(a + bZ)^k] = sum_j C(k,j) a^(k-j) b^j E[Z^j]`.
    fn affine_moments(&self, m: &[f64], a: f64, b: f64) -> Vec<f64> {
        (0..m.len())
            .map(|k| {
                let mut binom = 1.0;
                let mut s = 0.0;
                for j in 0..=k {
                    s += binom * a.powi((k - j) as i32) * b.powi(j as i32) * m[j];
                    binom = binom * (k - j) as f64 / (j + 1) as f64;
                }
                s
            })
            .collect()
    }
}

/// Standardizes the moments: shift by the mean and scale by the standard
/// deviation (by `max(mu_1, 1)` when only the mean is known).
pub fn precondition(c: &MomentConstraints) -> Result<(Vec<f64>, Transform), MaxEntError> {
    c.validate()?;
    let mu = &c.moments;
    let shift = mu[1];
    let scale = if c.order() == 1 {
        mu[1].max(1.0)
    } else {
        let var = mu[2] - mu[1] * mu[1];
        if !(var > 0.0) {
            return Err(MaxEntError::InvalidConstraints(format!("non-positive variance {var:e}")));
        }
        var.sqrt()
    };
    let tr = Transform { shift, scale };
    Ok((tr.forward_moments(mu), tr))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial quadrature nodes; doubled until `ln Z` is stable.
    pub nodes: usize,
    pub max_nodes: usize,
    /// Use BFGS even when a closed form exists (`M <= 2`).
    pub force_numeric: bool,
    /// Upper end of the integration window, in standard deviations above
    /// `max(mean, 0)`.
    pub window: f64,
}

impl Default for MaxEntOptions {
    fn default() -> Self {
        MaxEntOptions {
            tol: 1e-8,
            max_iter: 500,
            nodes: 128,
            max_nodes: 1024,
            force_numeric: false,
            window: 8.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub grad_norm: f64,
    pub iterations: usize,
    pub nodes: usize,
    pub analytic: bool,
    /// `mu_2` was raised to make the variance positive.
    pub projected: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntSolution {
    /// `lambda_1..lambda_M` on the orthonormal Hermite basis in `y`.
    pub lambdas: Vec<f64>,
    /// `ln Z` for the density in `y`.
    pub log_normalizer: f64,
    pub transform: Transform,
    pub basis: Basis,
    pub support: Support,
    /// Interval in `y` outside which the density is zero.
    pub domain: (f64, f64),
    pub diagnostics: Diagnostics,
}

impl MaxEntSolution {
    pub fn order(&self) -> usize {
        self.lambdas.len()
    }

    /// Lower end of the support in `y`.
    pub fn lower_y(&self) -> f64 {
        match self.support {
            Support::HalfLine => self.transform.to_y(0.0),
            Support::FullLine => f64::NEG_INFINITY,
        }
    }

    fn exponent_poly(&self) -> Vec<f64> {
        self.basis.combine(&self.lambdas)
    }

    /// Density in `y`.
    pub fn density_y(&self, y: f64) -> f64 {
        if y < self.domain.0 || y > self.domain.1 {
            return 0.0;
        }
        (-poly_eval(&self.exponent_poly(), y) - self.log_normalizer).exp()
    }

    /// Density in original coordinates.
    pub fn density(&self, x: f64) -> f64 {
        self.density_y(self.transform.to_y(x)) / self.transform.scale
    }

    /// `(p, ln Z_x)` with `q(x) = exp(-sum_j p[j] x^j - ln Z_x)`.
    pub fn monomial_coefficients(&self) -> (Vec<f64>, f64) {
        let py = self.exponent_poly();
        let Transform { shift, scale } = self.transform;
        // ((x - s) / scale)^j expanded in powers of x
        let m = py.len();
        let mut px = vec![0.0; m];
        let mut pw = vec![0.0; m];
        pw[0] = 1.0;
        for (j, &c) in py.iter().enumerate() {
            if j > 0 {
                for i in (0..=j).rev() {
                    let lower = if i > 0 { pw[i - 1] } else { 0.0 };
                    pw[i] = (lower - shift * pw[i]) / scale;
                }
            }
            for i in 0..=j {
                px[i] += c * pw[i];
            }
        }
        (px, self.log_normalizer + scale.ln())
    }

    /// Raw moments `mu_0..mu_order` of the density in original coordinates.
    pub fn raw_moments(&self, order: usize) -> Vec<f64> {
        let rule = self.rule(self.diagnostics.nodes.max(128));
        let py = self.exponent_poly();
        let mut nu = vec![0.0; order + 1];
        for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
            let q = w * (-poly_eval(&py, y) - self.log_normalizer).exp();
            let mut p = 1.0;
            for v in nu.iter_mut() {
                *v += q * p;
                p *= y;
            }
        }
        self.transform.backward_moments(&nu)
    }

    fn rule(&self, nodes: usize) -> QuadratureRule {
        let (lo, hi) = self.domain;
        if hi.is_finite() {
            return quadrature::window_rule(lo.max(-quadrature::FAR), hi, nodes);
        }
        match self.support {
            Support::HalfLine => build_halfline_rule(lo, nodes),
            Support::FullLine => build_fullline_rule(nodes),
        }
    }

    /// Comment line used by reconstruction dumps.
    pub fn header(&self) -> String {
        let l: Vec<String> = self.lambdas.iter().map(|v| format!("{v:e}")).collect();
        format!(
            "lambdas=[{}], lnZ={:e}, transform=({:e};{:e}), grad_norm={:e}, iters={}",
            l.join(" "),
            self.log_normalizer,
            self.transform.shift,
            self.transform.scale,
            self.diagnostics.grad_norm,
            self.diagnostics.iterations
        )
    }

    /// Writes `dist` as `count,probability` under the solution header.
    pub fn write_csv<W: Write>(&self, dist: &DiscreteDistribution, w: W) -> io::Result<()> {
        dist.write_csv(w, Some(&self.header()))
    }
}

/// Dual value and gradient on a fixed rule with precomputed features.
struct Dual<'a> {
    rule: &'a QuadratureRule,
    basis: &'a Basis,
    targets: &'a [f64],
    phi: Vec<f64>,
    /// Whether the lower end of the rule is an artificial cut.
    open_below: bool,
    /// The rule spans the whole support; no tail checks.
    bounded: bool,
}

/// Initial leading multiplier for `M >= 3`.
const LEAD_START: f64 = 1e-3;

/// Tail drop (in `-ln q`) required at an artificial window end.
const TAIL_DROP: f64 = 40.0;

struct DualEval {
    value: f64,
    grad: Vec<f64>,
    log_z: f64,
}

impl<'a> Dual<'a> {
    fn new(rule: &'a QuadratureRule, basis: &'a Basis, targets: &'a [f64], support: Support) -> Self {
        let m = basis.order();
        let mut phi = vec![0.0; rule.len() * m];
        for (i, &y) in rule.nodes.iter().enumerate() {
            basis.eval_into(y, &mut phi[i * m..(i + 1) * m]);
        }
        let open_below = support == Support::FullLine || rule.lo <= -quadrature::FAR;
        Dual {
            rule,
            basis,
            targets,
            phi,
            open_below,
            bounded: false,
        }
    }

    fn bounded(mut self) -> Self {
        self.bounded = true;
        self
    }

    fn integrable(&self, p: &[f64], p_min: f64) -> bool {
        let scale = p.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let Some(d) = (1..p.len()).rev().find(|&j| p[j].abs() > 1e-13 * scale) else {
            return false;
        };
        if p[d] <= 0.0 || (self.open_below && d % 2 == 1) {
            return false;
        }
        let dp = poly_deriv(p);
        let end_ok = |y: f64, sign: f64| {
            poly_eval(p, y) - p_min >= TAIL_DROP
                && [1.0, 2.0, 4.0, 8.0].iter().all(|f| sign * poly_eval(&dp, f * y) > 0.0)
        };
        end_ok(self.rule.hi, 1.0) && (!self.open_below || end_ok(self.rule.lo, -1.0))
    }

    fn eval(&self, lambda: &[f64]) -> Option<DualEval> {
        let m = lambda.len();
        let n = self.rule.len();
        let mut expo = Vec::with_capacity(n);
        let mut p_min = f64::INFINITY;
        for i in 0..n {
            let pv: f64 = lambda.iter().zip(&self.phi[i * m..(i + 1) * m]).map(|(l, f)| l * f).sum();
            p_min = p_min.min(pv);
            expo.push(-pv);
        }
        if !p_min.is_finite() || !self.bounded && !self.integrable(&self.basis.combine(lambda), p_min) {
            return None;
        }
        let emax = -p_min;
        let mut s = 0.0;
        let mut mean = vec![0.0; m];
        for i in 0..n {
            let q = self.rule.weights[i] * (expo[i] - emax).exp();
            s += q;
            for (acc, f) in mean.iter_mut().zip(&self.phi[i * m..(i + 1) * m]) {
                *acc += q * f;
            }
        }
        let log_z = emax + s.ln();
        let value = log_z + lambda.iter().zip(self.targets).map(|(l, b)| l * b).sum::<f64>();
        let grad: Vec<f64> = self.targets.iter().zip(&mean).map(|(b, e)| b - e / s).collect();
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return None;
        }
        Some(DualEval { value, grad, log_z })
    }

    /// `Cov_q[phi]`, the Hessian of the dual.
    fn hessian(&self, lambda: &[f64]) -> Vec<Vec<f64>> {
        let m = lambda.len();
        let n = self.rule.len();
        let expo: Vec<f64> = (0..n)
            .map(|i| -lambda.iter().zip(&self.phi[i * m..(i + 1) * m]).map(|(l, f)| l * f).sum::<f64>())
            .collect();
        let emax = expo.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut s = 0.0;
        let mut mean = vec![0.0; m];
        let mut second = vec![vec![0.0; m]; m];
        for i in 0..n {
            let q = self.rule.weights[i] * (expo[i] - emax).exp();
            let f = &self.phi[i * m..(i + 1) * m];
            s += q;
            for a in 0..m {
                mean[a] += q * f[a];
                for b in 0..=a {
                    second[a][b] += q * f[a] * f[b];
                }
            }
        }
        let mut h = vec![vec![0.0; m]; m];
        for a in 0..m {
            for b in 0..=a {
                let v = second[a][b] / s - mean[a] * mean[b] / (s * s);
                h[a][b] = v;
                h[b][a] = v;
            }
        }
        h
    }

    /// Damped Newton steps from `lambda`; returns the final point and its
    /// gradient norm.
    fn newton(&self, lambda: &[f64], tol: f64, max_iter: usize) -> Option<(Vec<f64>, f64)> {
        let mut x = lambda.to_vec();
        let mut cur = self.eval(&x)?;
        let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
        for _ in 0..max_iter {
            let gn = norm(&cur.grad);
            if gn <= tol {
                break;
            }
            let neg: Vec<f64> = cur.grad.iter().map(|g| -g).collect();
            let Some(d) = solve_linear(self.hessian(&x), neg) else {
                break;
            };
            let mut t = 1.0;
            let mut next = None;
            while t > 1e-10 {
                let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                if let Some(e) = self.eval(&xn) {
                    if e.value <= cur.value + 1e-14 * cur.value.abs().max(1.0) && norm(&e.grad) < gn {
                        next = Some((xn, e));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((xn, e)) = next else {
                break;
            };
            x = xn;
            cur = e;
        }
        let gn = norm(&cur.grad);
        Some((x, gn))
    }
}

/// Solves `a x = b` for symmetric positive definite `a`.
fn solve_linear(a: Vec<Vec<f64>>, b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let chol = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]).cholesky()?;
    Some(chol.solve(&nalgebra::DVector::from_vec(b)).iter().copied().collect())
}

/// `Psi(lambda) = ln Z + sum_k lambda_k targets_k` and its gradient
/// `targets_k - E_q[phi_k]`, with `Z` integrated by `rule`. `None` when
/// `exp(-sum_k lambda_k phi_k)` is not integrable on the support.
pub fn dual_and_gradient(
    lambda: &[f64],
    targets: &[f64],
    rule: &QuadratureRule,
    basis: &Basis,
    support: Support,
) -> Option<(f64, Vec<f64>)> {
    Dual::new(rule, basis, targets, support)
        .eval(lambda)
        .map(|e| (e.value, e.grad))
}

/// Solves the maximum-entropy problem for `c`. `M <= 2` uses the closed
/// forms unless `opts.force_numeric`. The numeric path integrates over the
/// window `[lower, max(lower, 0) + opts.window]` in standardized units, so
/// moment sets without a half-line solution still get one on the window. If the solve fails and the variance
/// is not positive, `mu_2` is raised to `mu_1^2 (1 + 1e-9)` and the solve is
/// retried once.
pub fn solve_dual(c: &MomentConstraints, opts: &MaxEntOptions) -> Result<MaxEntSolution, MaxEntError> {
    let warnings = c.validate()?;
    let first = solve_once(c, opts);
    let result = match first {
        Err(e) if c.order() >= 2 => {
            let floor = c.moments[1] * c.moments[1] * (1.0 + 1e-9);
            if c.moments[2] >= floor {
                return Err(e);
            }
            let mut projected = c.clone();
            projected.moments[2] = floor;
            solve_once(&projected, opts).map(|mut s| {
                s.diagnostics.projected = true;
                s
            })
        }
        other => other,
    };
    result.map(|mut s| {
        s.diagnostics.warnings.splice(0..0, warnings);
        s
    })
}

fn solve_once(c: &MomentConstraints, opts: &MaxEntOptions) -> Result<MaxEntSolution, MaxEntError> {
    if c.order() <= 2 && !opts.force_numeric {
        return analytic_maxent(c);
    }
    let (nu, transform) = precondition(c)?;
    let m = c.order();
    let basis = Basis::hermite(m);
    let targets = basis.project_moments(&nu);
    let lower = match c.support {
        Support::HalfLine => transform.to_y(0.0),
        Support::FullLine => f64::NEG_INFINITY,
    };
    let upper = lower.max(0.0) + opts.window;
    let make_rule = |nodes: usize| match c.support {
        Support::HalfLine => quadrature::window_rule(lower.max(-quadrature::FAR), upper, nodes),
        Support::FullLine => quadrature::window_rule(-opts.window, opts.window, nodes),
    };
    let mut lambda = vec![0.0; m];
    if m == 1 {
        lambda[0] = 1.0;
    } else {
        lambda[1] = 1.0 / SQRT_2;
    }
    if m >= 3 {
        // the leading multiplier must stay positive; start strictly inside
        lambda[m - 1] = LEAD_START;
    }
    let bopts = BfgsOptions {
        tol: opts.tol,
        max_iter: opts.max_iter,
        ..BfgsOptions::default()
    };
    let mut nodes = opts.nodes.max(quadrature::PANEL * 2);
    let mut iterations = 0;
    loop {
        let rule = make_rule(nodes);
        let dual = Dual::new(&rule, &basis, &targets, c.support).bounded();
        let res = minimize(|l| dual.eval(l).map(|e| (e.value, e.grad)), &lambda, &bopts).ok_or_else(|| {
            MaxEntError::Infeasible("starting point is not integrable".into())
        })?;
        iterations += res.iterations;
        let (x, grad_norm) = if res.converged {
            (res.x, res.grad_norm)
        } else {
            // BFGS stalls near the optimum on ill-conditioned sets
            match dual.newton(&res.x, opts.tol, 20) {
                Some((x, g)) if g <= opts.tol => (x, g),
                _ => {
                    return Err(MaxEntError::NoConvergence {
                        lambdas: res.x,
                        grad_norm: res.grad_norm,
                        iterations,
                    })
                }
            }
        };
        lambda = x;
        let log_z = dual.eval(&lambda).expect("converged point is feasible").log_z;
        let finer_rule = make_rule(nodes * 2);
        let finer = Dual::new(&finer_rule, &basis, &targets, c.support).bounded().eval(&lambda);
        let stable = finer.is_some_and(|f| (f.log_z - log_z).abs() < 1e-10);
        if stable || nodes * 2 > opts.max_nodes {
            let mut warnings = Vec::new();
            let edge = (-poly_eval(&basis.combine(&lambda), rule.hi) - log_z).exp();
            if edge > 1e-12 {
                warnings.push(format!("density {edge:e} at the upper window end y = {}", rule.hi));
            }
            return Ok(MaxEntSolution {
                lambdas: lambda,
                log_normalizer: log_z,
                transform,
                basis,
                support: c.support,
                domain: (rule.lo, rule.hi),
                diagnostics: Diagnostics {
                    grad_norm,
                    iterations,
                    nodes,
                    warnings,
                    ..Diagnostics::default()
                },
            });
        }
        nodes *= 2;
    }
}

/// Closed-form solutions for `M <= 2`: exponential (`M = 1`), truncated
/// normal matched to `(mu_1, mu_2)` on the half-line, normal on the full line.
pub fn analytic_maxent(c: &MomentConstraints) -> Result<MaxEntSolution, MaxEntError> {
    c.validate()?;
    let m = c.order();
    if m > 2 {
        return Err(MaxEntError::InvalidConstraints(format!(
            "closed form needs M <= 2, got {m}"
        )));
    }
    let (_, transform) = precondition(c)?;
    let basis = Basis::hermite(m);
    let a = transform.to_y(0.0);
    let (lambdas, log_normalizer) = match (m, c.support) {
        (1, Support::FullLine) => {
            return Err(MaxEntError::Infeasible("no maximum-entropy density on the line with one moment".into()))
        }
        (1, Support::HalfLine) => {
            if !(c.moments[1] > 0.0) {
                return Err(MaxEntError::Infeasible(format!(
                    "mean {} is not positive",
                    c.moments[1]
                )));
            }
            let rate = transform.scale / c.moments[1];
            (vec![rate], -rate * a - rate.ln())
        }
        (_, Support::FullLine) => (vec![0.0, 1.0 / SQRT_2], 0.5 + (2.0 * PI).sqrt().ln()),
        (_, Support::HalfLine) => {
            let (loc, tau) = match_truncated_normal(a)?;
            let p = [
                loc * loc / (2.0 * tau * tau),
                -loc / (tau * tau),
                1.0 / (2.0 * tau * tau),
            ];
            let (lambdas, k) = basis.decompose(&p);
            let alpha = (a - loc) / tau;
            (lambdas, k + (tau * (2.0 * PI).sqrt()).ln() + ln_upper_tail(alpha))
        }
    };
    Ok(MaxEntSolution {
        lambdas,
        log_normalizer,
        transform,
        basis,
        support: c.support,
        domain: (
            if c.support == Support::HalfLine { a } else { f64::NEG_INFINITY },
            f64::INFINITY,
        ),
        diagnostics: Diagnostics {
            analytic: true,
            ..Diagnostics::default()
        },
    })
}

/// `phi(a) / Q(a)` with `Q` the standard normal upper tail.
fn mills(a: f64) -> f64 {
    if a < 5.0 {
        let phi = (-a * a / 2.0).exp() / (2.0 * PI).sqrt();
        phi / (0.5 * statrs::function::erf::erfc(a / SQRT_2))
    } else {
        // Q/phi = 1/(a + 1/(a + 2/(a + ...)))
        let mut t = a;
        for k in (1..=80).rev() {
            t = a + k as f64 / t;
        }
        t
    }
}

/// `ln Q(a)`.
fn ln_upper_tail(a: f64) -> f64 {
    if a < 5.0 {
        (0.5 * statrs::function::erf::erfc(a / SQRT_2)).ln()
    } else {
        -a * a / 2.0 - (2.0 * PI).sqrt().ln() - mills(a).ln()
    }
}

/// Mean and variance of `N(loc, tau^2)` truncated to `[a, inf)`.
fn truncated_normal_moments(a: f64, loc: f64, tau: f64) -> (f64, f64) {
    let alpha = (a - loc) / tau;
    let l = mills(alpha);
    (loc + tau * l, tau * tau * (1.0 + alpha * l - l * l))
}

/// Finds `(loc, tau)` such that `N(loc, tau^2)` truncated to `[a, inf)` has
/// mean 0 and variance 1, by damped Newton on `(mean, ln var)`.
fn match_truncated_normal(a: f64) -> Result<(f64, f64), MaxEntError> {
    if a >= -1.0 {
        return Err(MaxEntError::Infeasible(format!(
            "no truncated normal on the half-line has mean/std = {:.6}",
            -a
        )));
    }
    let resid = |v: [f64; 2]| {
        let (mean, var) = truncated_normal_moments(a, v[0], v[1].exp());
        [mean, var.ln()]
    };
    let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
    let mut v = [0.0, 0.0];
    let mut r = resid(v);
    for _ in 0..200 {
        if norm(r) < 1e-10 {
            return Ok((v[0], v[1].exp()));
        }
        let h = 1e-7;
        let mut jac = [[0.0; 2]; 2];
        for j in 0..2 {
            let mut vp = v;
            let mut vm = v;
            vp[j] += h;
            vm[j] -= h;
            let (rp, rm) = (resid(vp), resid(vm));
            for i in 0..2 {
                jac[i][j] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !det.is_finite() || det == 0.0 {
            break;
        }
        let step = [
            -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ];
        let mut t = 1.0;
        loop {
            let vn = [v[0] + t * step[0], v[1] + t * step[1]];
            let rn = resid(vn);
            if rn.iter().all(|x| x.is_finite()) && norm(rn) < norm(r) {
                v = vn;
                r = rn;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(MaxEntError::Infeasible("truncated-normal match stalled".into()));
            }
        }
    }
    if norm(r) < 1e-10 {
        return Ok((v[0], v[1].exp()));
    }
    Err(MaxEntError::Infeasible("truncated-normal match did not converge".into()))
}

/// Unnormalized bin masses: `int_{x-w}^{x+w} q` on lattice points `x > 0`
/// and `2 int_0^w q` at `x = 0`, with `w = step / 2`. Bins stop once the
/// covered mass reaches `1 - 1e-12` or `x` passes `cap`
/// (default `100 mu_1 + 1000`).
pub fn bin_masses(sol: &MaxEntSolution, lattice: Lattice, cap: Option<u32>) -> DiscreteDistribution {
    let cap = cap.unwrap_or_else(|| (100.0 * sol.transform.shift.max(0.0) + 1000.0) as u32);
    let w = lattice.step as f64 / 2.0;
    let py = sol.exponent_poly();
    let lnz = sol.log_normalizer;
    let y_end = sol.domain.1.min(sol.lower_y().max(0.0) + quadrature::FAR);
    let tr = sol.transform;
    let integral = |x0: f64, x1: f64| {
        let (y0, y1) = (tr.to_y(x0).max(sol.domain.0), tr.to_y(x1).min(y_end));
        if y1 <= y0 {
            return 0.0;
        }
        let pieces = ((y1 - y0) / 0.5).ceil().max(1.0) as usize;
        let h = (y1 - y0) / pieces as f64;
        (0..pieces)
            .map(|i| {
                let a = y0 + i as f64 * h;
                quadrature::integrate_interval(|y| (-poly_eval(&py, y) - lnz).exp(), a, a + h)
            })
            .sum::<f64>()
    };
    let mut out = DiscreteDistribution::new();
    let mut covered = 0.0;
    let mut x = lattice.offset;
    loop {
        let xf = x as f64;
        let mass = if x == 0 {
            let m = integral(0.0, w);
            covered += m;
            2.0 * m
        } else {
            let m = integral(xf - w, xf + w);
            covered += m;
            m
        };
        out.add(x, mass.max(0.0));
        if covered >= 1.0 - 1e-12 || x >= cap || tr.to_y(xf + w) > y_end {
            break;
        }
        x += lattice.step;
    }
    out
}

/// Bin masses renormalized to sum to 1.
pub fn discretize(sol: &MaxEntSolution, lattice: Lattice) -> DiscreteDistribution {
    bin_masses(sol, lattice, None).normalized()
}

#[cfg(test)]
mod tests;
