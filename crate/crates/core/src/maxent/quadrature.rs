//! Gauss–Legendre rules, single-interval and composite.

use std::f64::consts::PI;

/// Nodes and positive weights approximating `int f(y) dy` over `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&y, &w)| w * f(y)).sum()
    }

}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `P_n(z)` and `P_n'(z)`.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Points per panel of the composite rules.
pub const PANEL: usize = 16;
/// Half-width of the finely resolved core, in standardized units.
pub const CORE: f64 = 10.0;
/// Window end; the integrand is required to be negligible beyond it.
pub const FAR: f64 = 40.0;

/// Appends a `PANEL`-point rule on `[a, b]`.
fn push_panel(rule: &mut QuadratureRule, a: f64, b: f64, gl: &(Vec<f64>, Vec<f64>)) {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    for (x, w) in gl.0.iter().zip(&gl.1) {
        rule.nodes.push(c + r * x);
        rule.weights.push(r * w);
    }
}

/// Composite rule on `[lo, hi]` with about `node_count` nodes. The span
/// `[-CORE, CORE]` gets three quarters of the panels; the rest go to the
/// segments `[CORE, 2 CORE], [2 CORE, 4 CORE]` (and their mirrors).
pub fn window_rule(lo: f64, hi: f64, node_count: usize) -> QuadratureRule {
    assert!(hi > lo);
    let gl = gauss_legendre(PANEL);
    let mut tails_lo = Vec::new();
    let mut tails_hi = Vec::new();
    let core_lo = lo.max(-CORE);
    let core_hi = hi.min(CORE);
    let mut edge = CORE;
    while lo < -edge {
        tails_lo.push(((-2.0 * edge).max(lo), -edge));
        edge *= 2.0;
    }
    edge = CORE;
    while hi > edge {
        tails_hi.push((edge, (2.0 * edge).min(hi)));
        edge *= 2.0;
    }
    let panels = (node_count / PANEL).max(1);
    let mut rule = QuadratureRule {
        nodes: Vec::with_capacity(node_count + 4 * PANEL),
        weights: Vec::with_capacity(node_count + 4 * PANEL),
        lo,
        hi,
    };
    let segments = tails_lo.len() + tails_hi.len();
    let per_tail = if segments == 0 { 0 } else { (panels / 4 / segments).max(1) };
    let uniform = |rule: &mut QuadratureRule, a: f64, b: f64, k: usize| {
        let h = (b - a) / k as f64;
        for i in 0..k {
            push_panel(rule, a + i as f64 * h, a + (i + 1) as f64 * h, &gl);
        }
    };
    for &(a, b) in tails_lo.iter().rev() {
        uniform(&mut rule, a, b, per_tail);
    }
    if core_hi > core_lo {
        let k = panels.saturating_sub(per_tail * segments).max(2);
        uniform(&mut rule, core_lo, core_hi, k);
    }
    for &(a, b) in &tails_hi {
        uniform(&mut rule, a, b, per_tail);
    }
    rule
}

/// Rule for `int_lower^inf`, truncated at `max(lower, 0) + FAR`.
pub fn build_halfline_rule(lower: f64, node_count: usize) -> QuadratureRule {
    window_rule(lower.max(-FAR), lower.max(0.0) + FAR, node_count)
}

/// Rule for `int_{-inf}^{inf}`, truncated to `[-FAR, FAR]`.
pub fn build_fullline_rule(node_count: usize) -> QuadratureRule {
    window_rule(-FAR, FAR, node_count)
}

/// `PANEL`-point Gauss–Legendre integral of `f` over `[a, b]`.
pub fn integrate_interval<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    thread_local! {
        static GL: (Vec<f64>, Vec<f64>) = gauss_legendre(PANEL);
    }
    GL.with(|gl| {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        gl.0.iter().zip(&gl.1).map(|(x, w)| w * f(c + r * x)).sum::<f64>() * r
    })
}
