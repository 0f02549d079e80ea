//! Adaptive Dormand–Prince 5(4) integrator for non-stiff systems.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e}); the system may be stiff")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("maximum of {max_steps} steps exceeded at t = {t}")]
    MaxSteps { t: f64, max_steps: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated from the right-hand side when `None`.
    pub h0: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-8,
            atol: 1e-10,
            h0: None,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order weights minus the embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t0` to each of the ascending `times`,
/// returning the state at every requested time.
pub fn integrate_to<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    times: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<Vec<f64>>, OdeStats), OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut out = Vec::with_capacity(times.len());
    let mut y = y0.to_vec();
    let mut t = t0;
    if n == 0 {
        return Ok((times.iter().map(|_| Vec::new()).collect(), stats));
    }

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];

    f(t, &y, &mut k1);
    stats.evaluations += 1;
    let mut hp = match opts.h0 {
        Some(h) => h,
        None => initial_step(&mut f, t, &y, &k1, opts, &mut stats),
    };

    for &t_target in times {
        while t < t_target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(OdeError::MaxSteps {
                    t,
                    max_steps: opts.max_steps,
                });
            }
            if hp <= 1e-14 * t.abs().max(1.0) {
                return Err(OdeError::StepSizeUnderflow { t, h: hp });
            }
            let last = t + hp >= t_target;
            let h = if last { t_target - t } else { hp };
            for i in 0..n {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            f(t + C2 * h, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            f(t + C3 * h, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(t + C4 * h, &tmp, &mut k4);
            for i in 0..n {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(t + C5 * h, &tmp, &mut k5);
            for i in 0..n {
                tmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f(t + h, &tmp, &mut k6);
            for i in 0..n {
                ynew[i] =
                    y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            f(t + h, &ynew, &mut k7);
            stats.evaluations += 6;

            let mut err = 0.0;
            for i in 0..n {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = (err / n as f64).sqrt();

            if !err.is_finite() {
                hp = h * 0.2;
                stats.rejected += 1;
                continue;
            }
            if err <= 1.0 {
                stats.accepted += 1;
                t = if last { t_target } else { t + h };
                std::mem::swap(&mut y, &mut ynew);
                std::mem::swap(&mut k1, &mut k7);
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(OdeError::NonFinite { t });
                }
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                hp = if last { hp.max(h * fac) } else { h * fac };
            } else {
                stats.rejected += 1;
                hp = h * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`.
pub fn integrate<F>(f: F, t0: f64, y0: &[f64], t_end: f64, opts: &OdeOptions) -> Result<Vec<f64>, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let (mut out, _) = integrate_to(f, t0, y0, &[t_end], opts)?;
    Ok(out.pop().expect("one output time"))
}

fn initial_step<F>(f: &mut F, t: f64, y: &[f64], f0: &[f64], opts: &OdeOptions, stats: &mut OdeStats) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len() as f64;
    let scale: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let norm = |v: &[f64]| {
        (v.iter().zip(&scale).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / n).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    f(t + h0, &y1, &mut f1);
    stats.evaluations += 1;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}
