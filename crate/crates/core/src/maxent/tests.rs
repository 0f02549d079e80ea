use super::*;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Raw moments of `w Gamma(k1, t1) + (1 - w) Gamma(k2, t2)`.
fn gamma_mixture_moments(w: f64, k1: f64, t1: f64, k2: f64, t2: f64, m: usize) -> Vec<f64> {
    let g = |k: f64, t: f64, n: usize| (0..n).map(|i| (k + i as f64) * t).product::<f64>();
    (0..=m)
        .map(|n| w * g(k1, t1, n) + (1.0 - w) * g(k2, t2, n))
        .collect()
}

/// Raw moments of `N(loc, s^2)` truncated to `[0, inf)` by brute quadrature.
fn truncated_normal_raw(loc: f64, s: f64, m: usize) -> Vec<f64> {
    let hi = loc.max(0.0) + 40.0 * s;
    let pieces = 4000;
    let h = hi / pieces as f64;
    let mut out = vec![0.0; m + 1];
    for i in 0..pieces {
        for (k, o) in out.iter_mut().enumerate() {
            *o += quadrature::integrate_interval(
                |x| x.powi(k as i32) * (-(x - loc) * (x - loc) / (2.0 * s * s)).exp(),
                i as f64 * h,
                (i + 1) as f64 * h,
            );
        }
    }
    let z = out[0];
    out.iter().map(|v| v / z).collect()
}

#[test]
fn precondition_standardizes() {
    let (nu, tr) = precondition(&MomentConstraints::half_line(vec![1.0, 10.0, 104.0])).unwrap();
    assert_eq!(tr, Transform { shift: 10.0, scale: 2.0 });
    assert!((nu[0] - 1.0).abs() < 1e-15 && nu[1].abs() < 1e-13 && (nu[2] - 1.0).abs() < 1e-13);

    let (nu, tr) = precondition(&MomentConstraints::full_line(vec![1.0, 0.0, 1.0])).unwrap();
    assert_eq!(tr, Transform::IDENTITY);
    assert_eq!(nu, vec![1.0, 0.0, 1.0]);
}

#[test]
fn precondition_single_moment_scale() {
    let (_, tr) = precondition(&MomentConstraints::half_line(vec![1.0, 4.0])).unwrap();
    assert_eq!(tr, Transform { shift: 4.0, scale: 4.0 });
    let (_, tr) = precondition(&MomentConstraints::half_line(vec![1.0, 0.25])).unwrap();
    assert_eq!(tr.scale, 1.0);
}

#[test]
fn precondition_rejects_degenerate_variance() {
    let c = MomentConstraints::half_line(vec![1.0, 3.0, 9.0]);
    assert!(matches!(precondition(&c), Err(MaxEntError::InvalidConstraints(_))));
}

#[test]
fn moment_transform_round_trip() {
    let mu = gamma_mixture_moments(0.3, 4.0, 2.0, 20.0, 3.0, 5);
    let tr = Transform { shift: 7.0, scale: 3.5 };
    let back = tr.backward_moments(&tr.forward_moments(&mu));
    for (a, b) in back.iter().zip(&mu) {
        assert!(rel(*a, *b) < 1e-10);
    }
}

#[test]
fn validation() {
    assert!(MomentConstraints::half_line(vec![1.0]).validate().is_err());
    assert!(MomentConstraints::half_line(vec![0.5, 1.0]).validate().is_err());
    assert!(MomentConstraints::half_line(vec![1.0, f64::NAN]).validate().is_err());
    let w = MomentConstraints::half_line(vec![1.0, 3.0, 8.0]).validate().unwrap();
    assert_eq!(w.len(), 1);
}

#[test]
fn zero_multipliers_are_not_integrable() {
    let rule = build_halfline_rule(0.0, 128);
    let basis = Basis::hermite(2);
    assert!(dual_and_gradient(&[0.0, 0.0], &[0.0, 0.0], &rule, &basis, Support::HalfLine).is_none());
}

#[test]
fn exponential_is_stationary() {
    for m in [0.5, 1.0, 4.0, 250.0] {
        let c = MomentConstraints::half_line(vec![1.0, m]);
        let (nu, tr) = precondition(&c).unwrap();
        let basis = Basis::hermite(1);
        let targets = basis.project_moments(&nu);
        let rule = build_halfline_rule(tr.to_y(0.0), 128);
        let (_, g) = dual_and_gradient(&[tr.scale / m], &targets, &rule, &basis, Support::HalfLine).unwrap();
        assert!(g[0].abs() < 1e-12, "m={m} g={}", g[0]);
    }
}

#[test]
fn exponential_closed_form() {
    let sol = analytic_maxent(&MomentConstraints::half_line(vec![1.0, 4.0])).unwrap();
    for x in [0.0, 0.3, 1.0, 4.0, 17.5, 60.0] {
        let q = 0.25 * (-x / 4.0f64).exp();
        assert!((sol.density(x) - q).abs() < 1e-10 * q.max(1e-3), "x={x}");
    }
    let numeric = solve_dual(
        &MomentConstraints::half_line(vec![1.0, 4.0]),
        &MaxEntOptions {
            force_numeric: true,
            window: quadrature::FAR,
            ..MaxEntOptions::default()
        },
    )
    .unwrap();
    assert!((numeric.lambdas[0] - sol.lambdas[0]).abs() < 1e-8);
    assert!((numeric.log_normalizer - sol.log_normalizer).abs() < 1e-10);
}

#[test]
fn full_line_normal() {
    let c = MomentConstraints::full_line(vec![1.0, 0.0, 1.0]);
    let sol = solve_dual(&c, &MaxEntOptions::default()).unwrap();
    assert!(sol.diagnostics.analytic);
    let numeric = solve_dual(
        &c,
        &MaxEntOptions {
            force_numeric: true,
            window: quadrature::FAR,
            ..MaxEntOptions::default()
        },
    )
    .unwrap();
    for x in [-3.0, -1.0, 0.0, 0.5, 2.0] {
        let q = (-x * x / 2.0f64).exp() / (2.0 * PI).sqrt();
        assert!((sol.density(x) - q).abs() < 1e-10);
        assert!((numeric.density(x) - q).abs() < 1e-10);
    }
    let c = MomentConstraints::full_line(vec![1.0, 3.0, 13.0]);
    let sol = solve_dual(&c, &MaxEntOptions::default()).unwrap();
    let q = (-0.5f64 / 4.0).exp() / (8.0 * PI).sqrt();
    assert!((sol.density(4.0) - q).abs() < 1e-10);
}

#[test]
fn one_moment_on_full_line_is_infeasible() {
    let c = MomentConstraints::full_line(vec![1.0, 1.0]);
    assert!(matches!(analytic_maxent(&c), Err(MaxEntError::Infeasible(_))));
}

#[test]
fn truncated_normal_recovered() {
    let (loc, s) = (3.0, 2.0);
    let mu = truncated_normal_raw(loc, s, 4);
    let z = 0.5 * statrs::function::erf::erfc(-loc / (s * SQRT_2));
    let target = |x: f64| (-(x - loc) * (x - loc) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt() * z);
    let analytic = solve_dual(&MomentConstraints::half_line(mu[..3].to_vec()), &MaxEntOptions::default()).unwrap();
    let forced = MaxEntOptions {
        force_numeric: true,
        window: quadrature::FAR,
        ..MaxEntOptions::default()
    };
    let numeric2 = solve_dual(&MomentConstraints::half_line(mu[..3].to_vec()), &forced).unwrap();
    let numeric4 = solve_dual(&MomentConstraints::half_line(mu.clone()), &forced).unwrap();
    for x in [0.0, 0.5, 2.0, 3.0, 6.0, 10.0] {
        let q = target(x);
        assert!((analytic.density(x) - q).abs() < 1e-6, "x={x}");
        assert!((numeric2.density(x) - q).abs() < 1e-6, "x={x}");
        assert!((numeric4.density(x) - q).abs() < 1e-6, "x={x}");
    }
}

#[test]
fn far_from_zero_matches_untruncated_normal() {
    let (m, v) = (100.0, 4.0);
    let sol = analytic_maxent(&MomentConstraints::half_line(vec![1.0, m, v + m * m])).unwrap();
    let (p, _) = sol.monomial_coefficients();
    let var = 1.0 / (2.0 * p[2]);
    let loc = -p[1] / (2.0 * p[2]);
    assert!((loc - m).abs() < 1e-6 && (var - v).abs() < 1e-6, "loc={loc} var={var}");
}

#[test]
fn wide_half_line_two_moments_is_infeasible() {
    // coefficient of variation above 1
    let c = MomentConstraints::half_line(vec![1.0, 2.0, 12.0]);
    assert!(matches!(analytic_maxent(&c), Err(MaxEntError::Infeasible(_))));
}

#[test]
fn negative_variance_is_projected() {
    let c = MomentConstraints::half_line(vec![1.0, 50.0, 2499.0]);
    let sol = solve_dual(&c, &MaxEntOptions::default()).unwrap();
    assert!(sol.diagnostics.projected);
    assert_eq!(sol.diagnostics.warnings.len(), 1);
}

#[test]
fn exponential_bins() {
    let sol = analytic_maxent(&MomentConstraints::half_line(vec![1.0, 4.0])).unwrap();
    let raw = bin_masses(&sol, Lattice::UNIT, None);
    assert!((raw.get(0) - 2.0 * (1.0 - (-1.0f64 / 8.0).exp())).abs() < 1e-10);
    assert!((raw.get(0) - 0.23501).abs() < 1e-5);
    assert!((raw.get(3) - ((-5.0f64 / 8.0).exp() - (-7.0f64 / 8.0).exp())).abs() < 1e-10);
    let d = discretize(&sol, Lattice::UNIT);
    assert!((d.total() - 1.0).abs() < 1e-12);
    assert!(d.iter().all(|(_, p)| p >= 0.0));
    assert!((d.get(3) / d.get(0) - raw.get(3) / raw.get(0)).abs() < 1e-12);
}

#[test]
fn parity_lattice_bins() {
    let sol = analytic_maxent(&MomentConstraints::half_line(vec![1.0, 4.0])).unwrap();
    let even = bin_masses(&sol, Lattice::new(2, 0), None);
    assert!((even.get(0) - 2.0 * (1.0 - (-0.25f64).exp())).abs() < 1e-10);
    assert!((even.get(2) - ((-0.25f64).exp() - (-0.75f64).exp())).abs() < 1e-10);
    assert_eq!(even.get(1), 0.0);
    let odd = discretize(&sol, Lattice::new(2, 1));
    assert!(odd.iter().all(|(x, _)| x % 2 == 1));
    assert!((odd.total() - 1.0).abs() < 1e-12);
}

#[test]
fn bin_cap_stops_emission() {
    let sol = analytic_maxent(&MomentConstraints::half_line(vec![1.0, 4.0])).unwrap();
    let d = bin_masses(&sol, Lattice::UNIT, Some(5));
    assert_eq!(d.max_count(), Some(5));
}

#[test]
fn dump_header() {
    let sol = analytic_maxent(&MomentConstraints::half_line(vec![1.0, 4.0])).unwrap();
    let d = discretize(&sol, Lattice::UNIT);
    let mut buf = Vec::new();
    sol.write_csv(&d, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# lambdas=[1e0], lnZ="));
    assert!(first.contains("transform=(4e0;4e0)"));
    assert!(first.ends_with("iters=0"));
    assert_eq!(text.lines().nth(1), Some("count,probability"));
    let back = DiscreteDistribution::read_csv(text.as_bytes()).unwrap();
    assert_eq!(back.len(), d.len());
}

#[test]
fn bimodal_mixture_shows_two_modes() {
    let mu = gamma_mixture_moments(0.5, 3.0, 2.0, 60.0, 2.0, 4);
    let sol = solve_dual(&MomentConstraints::half_line(mu), &MaxEntOptions::default()).unwrap();
    let d = discretize(&sol, Lattice::UNIT);
    assert_eq!(d.local_maxima(1, 0).len(), 2);
}

/// Bins integrated directly in original coordinates from the monomial form.
fn bins_in_x(sol: &MaxEntSolution, lattice: Lattice, upto: u32) -> Vec<(u32, f64)> {
    let (p, lnz) = sol.monomial_coefficients();
    let w = lattice.step as f64 / 2.0;
    let f = |x: f64| (-basis::poly_eval(&p, x) - lnz).exp();
    let integral = |a: f64, b: f64| {
        let n = ((b - a) / (0.5 * sol.transform.scale)).ceil().max(1.0) as usize;
        let h = (b - a) / n as f64;
        (0..n)
            .map(|i| quadrature::integrate_interval(f, a + i as f64 * h, a + (i + 1) as f64 * h))
            .sum::<f64>()
    };
    (lattice.offset..=upto)
        .step_by(lattice.step as usize)
        .map(|x| {
            let xf = x as f64;
            let m = if x == 0 { 2.0 * integral(0.0, w) } else { integral(xf - w, xf + w) };
            (x, m)
        })
        .collect()
}

#[test]
fn transform_invariance() {
    let mu = gamma_mixture_moments(0.4, 5.0, 3.0, 30.0, 2.0, 4);
    let sol = solve_dual(&MomentConstraints::half_line(mu), &MaxEntOptions::default()).unwrap();
    for lattice in [Lattice::UNIT, Lattice::new(2, 1)] {
        let raw = bin_masses(&sol, lattice, None);
        for (x, m) in bins_in_x(&sol, lattice, 150) {
            assert!((raw.get(x) - m).abs() < 1e-8, "x={x}");
        }
    }
}

#[test]
fn reconstructed_moments_round_trip() {
    let mu = gamma_mixture_moments(0.5, 4.0, 1.5, 12.0, 2.5, 3);
    let sol = solve_dual(&MomentConstraints::half_line(mu.clone()), &MaxEntOptions::default()).unwrap();
    for (a, b) in sol.raw_moments(3).iter().zip(&mu) {
        assert!(rel(*a, *b) < 1e-8, "{a} vs {b}");
    }
}

fn random_feasible_lambda(m: usize, seed: &[f64]) -> Vec<f64> {
    let mut l = vec![0.0; m];
    l[1] = 1.0 / SQRT_2;
    for (i, s) in seed.iter().take(m).enumerate() {
        l[i] += 0.2 * s;
    }
    // keep the leading coefficient comfortably positive
    if m > 2 {
        l[m - 1] = 0.05 + 0.1 * l[m - 1].abs();
    }
    l
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dual_gradient_matches_finite_differences(
        m in 2usize..=5,
        seed in prop::collection::vec(-1.0f64..1.0, 5),
        lower in -6.0f64..-1.0,
    ) {
        let basis = Basis::hermite(m);
        let rule = build_halfline_rule(lower, 256);
        let targets: Vec<f64> = (0..m).map(|k| 0.1 * (k as f64 + 1.0)).collect();
        let l = random_feasible_lambda(m, &seed);
        let eval = |l: &[f64]| dual_and_gradient(l, &targets, &rule, &basis, Support::HalfLine);
        let Some((_, g)) = eval(&l) else { return Err(TestCaseError::reject("infeasible")); };
        for k in 0..m {
            let h = 1e-5;
            let mut lp = l.clone();
            let mut lm = l.clone();
            lp[k] += h;
            lm[k] -= h;
            let (Some((fp, _)), Some((fm, _))) = (eval(&lp), eval(&lm)) else {
                return Err(TestCaseError::reject("infeasible neighbour"));
            };
            let fd = (fp - fm) / (2.0 * h);
            prop_assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1.0), "k={} fd={} g={}", k, fd, g[k]);
        }
    }

    #[test]
    fn dual_is_midpoint_convex(
        m in 2usize..=5,
        s1 in prop::collection::vec(-1.0f64..1.0, 5),
        s2 in prop::collection::vec(-1.0f64..1.0, 5),
        lower in -6.0f64..-1.0,
    ) {
        let basis = Basis::hermite(m);
        let rule = build_halfline_rule(lower, 256);
        let targets: Vec<f64> = (0..m).map(|k| 0.3 - 0.1 * k as f64).collect();
        let a = random_feasible_lambda(m, &s1);
        let b = random_feasible_lambda(m, &s2);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let eval = |l: &[f64]| dual_and_gradient(l, &targets, &rule, &basis, Support::HalfLine).map(|r| r.0);
        let (Some(fa), Some(fb), Some(fm)) = (eval(&a), eval(&b), eval(&mid)) else {
            return Err(TestCaseError::reject("infeasible"));
        };
        prop_assert!(fm <= 0.5 * (fa + fb) + 1e-10);
    }

    #[test]
    fn constraints_are_satisfied(
        m in 3usize..=5,
        w in 0.2f64..0.8,
        k1 in 2.0f64..20.0,
        t1 in 0.5f64..4.0,
        k2 in 2.0f64..40.0,
        t2 in 0.5f64..4.0,
    ) {
        let mu = gamma_mixture_moments(w, k1, t1, k2, t2, m);
        let sol = solve_dual(&MomentConstraints::half_line(mu.clone()), &MaxEntOptions::default());
        let sol = sol.map_err(|e| TestCaseError::fail(format!("{e}")))?;
        let tol = if m == 5 { 1e-4 } else { 1e-6 };
        let got = sol.raw_moments(m);
        for k in 1..=m {
            prop_assert!(rel(got[k], mu[k]) < tol, "k={} got={} want={}", k, got[k], mu[k]);
        }
    }

    #[test]
    fn discretized_is_a_distribution(
        mean in 0.5f64..200.0,
        cv in 0.05f64..0.9,
        parity in 0u32..3,
    ) {
        let var = (cv * mean).powi(2);
        let sol = solve_dual(&MomentConstraints::half_line(vec![1.0, mean, var + mean * mean]), &MaxEntOptions::default())
            .map_err(|e| TestCaseError::fail(format!("{e}")))?;
        let lattice = if parity == 2 { Lattice::UNIT } else { Lattice::new(2, parity) };
        let d = discretize(&sol, lattice);
        prop_assert!((d.total() - 1.0).abs() < 1e-12);
        prop_assert!(d.iter().all(|(x, p)| p >= 0.0 && lattice.contains(x)));
    }
}

#[test]
fn hessian_matches_gradient_differences() {
    let basis = Basis::hermite(4);
    let rule = build_halfline_rule(-1.2, 256);
    let targets = [0.1, -0.2, 0.05, 0.0];
    let dual = Dual::new(&rule, &basis, &targets, Support::HalfLine);
    let l = [0.2, 0.6, -0.1, 0.08];
    let h = dual.hessian(&l);
    for j in 0..4 {
        let (mut up, mut dn) = (l, l);
        up[j] += 1e-6;
        dn[j] -= 1e-6;
        let (gu, gd) = (dual.eval(&up).unwrap().grad, dual.eval(&dn).unwrap().grad);
        for i in 0..4 {
            assert!(((gu[i] - gd[i]) / 2e-6 - h[i][j]).abs() < 1e-6, "({i},{j})");
        }
    }
}

#[test]
fn newton_reaches_tight_tolerance() {
    let basis = Basis::hermite(3);
    let rule = build_halfline_rule(-2.0, 256);
    let truth = [0.1, 0.5, 0.05];
    let dual = Dual::new(&rule, &basis, &[0.0; 3], Support::HalfLine);
    let mean: Vec<f64> = dual.eval(&truth).unwrap().grad.iter().map(|g| -g).collect();
    let dual = Dual::new(&rule, &basis, &mean, Support::HalfLine);
    let (x, g) = dual.newton(&[0.0, 0.7, 0.04], 1e-13, 50).unwrap();
    assert!(g <= 1e-13);
    for (a, b) in x.iter().zip(&truth) {
        assert!((a - b).abs() < 1e-9);
    }
}
