use averagedness::{
    certify, derivative_modulus_1d, estimate_lower, estimate_over_radii, oy_bound, oy_pair,
    pair_kappa, ConvexSet, Grid, Injectivity, OperatorExpr, SampleConfig, ScalarFn, Vector,
};
use proptest::prelude::*;

fn v(c: &[f64]) -> Vector {
    Vector::new(c.to_vec()).unwrap()
}

fn coords(dim: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, dim)
}

fn point(dim: usize) -> impl Strategy<Value = Vector> {
    coords(dim, 20.0).prop_map(|c| Vector::new(c).unwrap())
}

fn convex_set(dim: usize) -> impl Strategy<Value = ConvexSet> {
    let nonzero =
        || coords(dim, 3.0).prop_filter("nonzero normal", |a| a.iter().any(|c| c.abs() > 1e-3));
    prop_oneof![
        (nonzero(), -2.0..2.0)
            .prop_map(|(a, b)| ConvexSet::halfspace(Vector::new(a).unwrap(), b).unwrap()),
        (coords(dim, 3.0), 0.1..4.0)
            .prop_map(|(c, r)| ConvexSet::ball(Vector::new(c).unwrap(), r).unwrap()),
        (coords(dim, 3.0), coords(dim, 3.0)).prop_map(|(a, b)| {
            let lo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect();
            let hi: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
            ConvexSet::boxed(lo, hi).unwrap()
        }),
        coords(dim, 3.0).prop_map(|p| ConvexSet::singleton(Vector::new(p).unwrap())),
        (nonzero(), coords(dim, 3.0)).prop_map(|(d, p)| {
            ConvexSet::affine(vec![Vector::new(d).unwrap()], Vector::new(p).unwrap()).unwrap()
        }),
    ]
}

fn leaf(dim: usize) -> impl Strategy<Value = OperatorExpr> {
    prop_oneof![
        Just(OperatorExpr::identity(dim).unwrap()),
        convex_set(dim).prop_map(OperatorExpr::project),
        convex_set(dim).prop_map(OperatorExpr::reflect),
        (convex_set(dim), 0.0..5.0).prop_map(|(c, a)| OperatorExpr::prox_sq_dist(c, a).unwrap()),
        prop_oneof![
            Just(ScalarFn::Tanh),
            Just(ScalarFn::Sin),
            (0.0..2.0).prop_map(|lambda| ScalarFn::SoftThreshold { lambda }),
            (-1.0..1.0).prop_map(|factor| ScalarFn::Scale { factor }),
        ]
        .prop_map(move |f| OperatorExpr::scalar1d(dim, f).unwrap()),
    ]
}

/// Random expressions built only from nonexpansive pieces.
fn expr(dim: usize) -> impl Strategy<Value = OperatorExpr> {
    leaf(dim).prop_recursive(3, 12, 2, move |inner| {
        prop_oneof![
            (inner.clone(), point(dim)).prop_map(|(t, s)| OperatorExpr::translate(&t, s).unwrap()),
            (inner.clone(), 0.0..=1.0).prop_map(|(t, b)| OperatorExpr::relax(&t, b).unwrap()),
            (inner.clone(), inner).prop_map(|(a, b)| OperatorExpr::compose(&a, &b).unwrap()),
        ]
    })
}

fn any_dim_expr_and_pair() -> impl Strategy<Value = (OperatorExpr, Vector, Vector)> {
    prop_oneof![Just(1usize), Just(2), Just(5)].prop_flat_map(|d| (expr(d), point(d), point(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn built_expressions_are_nonexpansive((t, x, y) in any_dim_expr_and_pair()) {
        let lhs = (&t.apply(&x).unwrap() - &t.apply(&y).unwrap()).norm();
        prop_assert!(lhs <= (1.0 + 1e-9) * (&x - &y).norm());
    }

    #[test]
    fn relaxation_identity(t in expr(2), x in point(2), bi in 0usize..5) {
        let beta = [0.0, 0.25, 0.5, 0.75, 1.0][bi];
        let got = OperatorExpr::relax(&t, beta).unwrap().apply(&x).unwrap();
        let nx = t.apply(&x).unwrap();
        for i in 0..2 {
            let want = (1.0 - beta) * x[i] + beta * nx[i];
            let scale = x[i].abs().max(nx[i].abs()).max(f64::MIN_POSITIVE);
            prop_assert!((got[i] - want).abs() <= 4.0 * f64::EPSILON * scale);
        }
    }

    #[test]
    fn projection_is_idempotent(c in convex_set(5), x in point(5)) {
        let p = c.project(&x).unwrap();
        let pp = c.project(&p).unwrap();
        prop_assert!((&pp - &p).norm() <= 1e-12 * p.norm().max(1.0));
        prop_assert!(c.contains(&p, 1e-9));
    }

    #[test]
    fn translation_algebra(t in expr(2), x in point(2), s in point(2)) {
        let moved = OperatorExpr::translate(&t, s.clone()).unwrap().apply(&x).unwrap();
        let diff = &moved - &t.apply(&x).unwrap();
        prop_assert!((&diff - &s).norm() <= 1e-12 * moved.norm().max(s.norm()).max(1.0));
    }

    #[test]
    fn projection_variational_inequality(c in convex_set(2), x in point(2), z in point(2)) {
        // any point of C: project an arbitrary one
        let cz = c.project(&z).unwrap();
        let p = c.project(&x).unwrap();
        prop_assert!((&x - &p).inner(&(&cz - &p)) <= 1e-9 * (1.0 + x.norm_sq() + z.norm_sq()));
    }

    #[test]
    fn projection_is_firmly_nonexpansive(c in convex_set(5), x in point(5), y in point(5)) {
        let (px, py) = (c.project(&x).unwrap(), c.project(&y).unwrap());
        let a = (&px - &py).norm_sq();
        let q = (&(&x - &px) - &(&y - &py)).norm_sq();
        prop_assert!(a + q <= (&x - &y).norm_sq() * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn certificate_intervals_are_sane(t in expr(2)) {
        let c = certify(&t);
        prop_assert!(0.0 <= c.lower && c.lower <= c.upper && c.upper <= 1.0);
        prop_assert_eq!(c.exact, c.lower == c.upper);
        if c.injectivity == Injectivity::NotInjective {
            prop_assert!(c.lower >= 0.5);
        }
        prop_assert!(!c.provenance.is_empty());
    }

    #[test]
    fn pair_kappa_lies_in_unit_interval_and_below_upper((t, x, y) in any_dim_expr_and_pair()) {
        prop_assume!(x != y);
        let k = pair_kappa(&t, &x, &y).unwrap();
        prop_assert!((0.0..=1.0).contains(&k));
        prop_assert!(k <= certify(&t).upper + 1e-6, "pair {} above certificate {:?}", k, certify(&t));
    }

    #[test]
    fn pair_kappa_is_translation_invariant(t in expr(2), x in point(2), y in point(2), s in point(2)) {
        prop_assume!(x != y);
        let moved = OperatorExpr::translate(&t, s).unwrap();
        let (a, b) = (pair_kappa(&t, &x, &y).unwrap(), pair_kappa(&moved, &x, &y).unwrap());
        prop_assert!((a - b).abs() <= 1e-7, "{} vs {}", a, b);
    }

    #[test]
    fn pairwise_multiplication_rule(c in convex_set(2), x in point(2), y in point(2), beta in 0.05..=1.0f64) {
        prop_assume!(x != y);
        let n = OperatorExpr::project(c);
        let k = pair_kappa(&n, &x, &y).unwrap();
        prop_assume!(k > 1e-3);
        let kr = pair_kappa(&OperatorExpr::relax(&n, beta).unwrap(), &x, &y).unwrap();
        prop_assert!((kr - beta * k).abs() <= 1e-8 * beta * k, "{} vs {}", kr, beta * k);
    }

    /// Algebraic oracle for the relaxed pair: with `d = x - y`, `e = Nx - Ny`,
    /// the relaxed slack is `β[(b − a_N) + (1 − β) q_N]` and the relaxed
    /// residual is `β² q_N`, which gives `κ' = β κ_N`.
    #[test]
    fn relaxed_slack_identity(d in coords(3, 5.0), e in coords(3, 5.0), beta in 0.0..=1.0f64) {
        let dot = |u: &[f64], w: &[f64]| u.iter().zip(w).map(|(p, q)| p * q).sum::<f64>();
        let b = dot(&d, &d);
        let a_n = dot(&e, &e);
        let r: Vec<f64> = d.iter().zip(&e).map(|(p, q)| p - q).collect();
        let q_n = dot(&r, &r);
        let er: Vec<f64> = d.iter().zip(&e).map(|(p, q)| (1.0 - beta) * p + beta * q).collect();
        let a_r = dot(&er, &er);
        let lhs = b - a_r;
        let rhs = beta * ((b - a_n) + (1.0 - beta) * q_n);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (b + a_n + q_n));
    }

    #[test]
    fn collision_pairs_score_half(c in convex_set(2), x in point(2)) {
        let p = OperatorExpr::project(c.clone());
        let px = p.apply(&x).unwrap();
        prop_assume!((&x - &px).norm() > 1e-3);
        prop_assert!((pair_kappa(&p, &x, &px).unwrap() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn oy_fold_is_associative(a in 0.0..0.9f64, b in 0.0..0.9f64, c in 0.0..0.9f64) {
        let left = oy_pair(oy_pair(a, b).unwrap(), c).unwrap();
        let right = oy_pair(a, oy_pair(b, c).unwrap()).unwrap();
        prop_assert!((left - right).abs() <= 1e-12);
        prop_assert!((left - oy_bound(&[b, c, a]).unwrap().value).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampled_estimates_never_exceed_certificates(t in expr(2)) {
        let cfg = SampleConfig { n_pairs: 2_000, refine_top_k: 4, refine_steps: 60, ..SampleConfig::default() };
        let r = estimate_lower(&t, &cfg).unwrap();
        prop_assert!(r.kappa_lower <= certify(&t).upper + 1e-6);
        prop_assert_eq!(pair_kappa(&t, &r.witness.x, &r.witness.y).unwrap(), r.kappa_lower);
    }
}

/// Brute-force minimizer of `alpha/2 d_C(x)^2 + 1/2 (x - y)^2` on the line by
/// ternary search (the objective is strictly convex).
fn brute_prox_1d(lo: f64, hi: f64, alpha: f64, y: f64) -> f64 {
    let dist = |x: f64| (lo - x).max(x - hi).max(0.0);
    let f = |x: f64| 0.5 * alpha * dist(x).powi(2) + 0.5 * (x - y).powi(2);
    let (mut a, mut b) = (y - 100.0, y + 100.0);
    for _ in 0..300 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) < f(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    0.5 * (a + b)
}

#[test]
fn prox_sq_dist_matches_brute_force_minimizer() {
    for (lo, hi) in [(0.0, 1.0), (-2.0, -2.0), (f64::NEG_INFINITY, 0.5)] {
        let set = ConvexSet::boxed(vec![lo], vec![hi]).unwrap();
        for alpha in [0.0, 0.5, 1.0, 3.0, 10.0] {
            let prox = OperatorExpr::prox_sq_dist(set.clone(), alpha).unwrap();
            for i in 0..=40 {
                let y = -10.0 + 0.5 * i as f64;
                let got = prox.apply(&v(&[y])).unwrap()[0];
                let want = brute_prox_1d(lo, hi, alpha, y);
                assert!(
                    (got - want).abs() <= 1e-6,
                    "[{lo}, {hi}] alpha {alpha} y {y}: {got} vs {want}"
                );
            }
        }
    }
}

#[test]
fn prox_sq_dist_equals_relaxed_projection_pointwise() {
    let c = ConvexSet::ball(v(&[1.0, -1.0]), 2.0).unwrap();
    for alpha in [0.0, 0.3, 1.0, 7.0] {
        let prox = OperatorExpr::prox_sq_dist(c.clone(), alpha).unwrap();
        let relaxed =
            OperatorExpr::relax(&OperatorExpr::project(c.clone()), alpha / (1.0 + alpha)).unwrap();
        for x in [[5.0, 5.0], [0.0, 0.0], [-3.0, 2.0]] {
            assert_eq!(prox.apply(&v(&x)).unwrap(), relaxed.apply(&v(&x)).unwrap());
        }
    }
}

#[test]
fn prox_neg_log_is_strictly_increasing_and_positive() {
    let p = OperatorExpr::prox_neg_log(1.0).unwrap();
    let mut prev = 0.0;
    for i in 0..=4000 {
        let y = -1000.0 + 0.5 * i as f64;
        let out = p.apply(&v(&[y])).unwrap()[0];
        assert!(out > prev, "not increasing at {y}");
        prev = out;
    }
    // derivative 1/2 + y / (2 sqrt(y^2 + 4)) stays in (0, 1)
    for y in [-50.0, -1.0, 0.0, 2.0, 50.0] {
        let h = 1e-5;
        let slope =
            (p.apply(&v(&[y + h])).unwrap()[0] - p.apply(&v(&[y - h])).unwrap()[0]) / (2.0 * h);
        let exact = 0.5 + 0.5 * y / (y * y + 4.0_f64).sqrt();
        assert!((slope - exact).abs() < 1e-7 && exact > 0.0 && exact < 1.0);
    }
}

#[test]
fn derivative_rule_halves_under_relaxation() {
    let grid = Grid {
        lo: -1000.0,
        hi: 1000.0,
        n_points: 20_001,
    };
    let g = OperatorExpr::prox_neg_log(1.0).unwrap();
    let full = derivative_modulus_1d(&g, &grid).unwrap();
    let half = derivative_modulus_1d(&OperatorExpr::relax(&g, 0.5).unwrap(), &grid).unwrap();
    assert!((0.499..0.5).contains(&full));
    assert!(
        (half - full / 2.0).abs() <= 1e-9,
        "{half} vs {}",
        full / 2.0
    );
}

#[test]
fn estimates_are_monotone_in_radius_for_non_attained_suprema() {
    let cfg = SampleConfig {
        n_pairs: 20_000,
        ..SampleConfig::default()
    };
    let ops = [
        OperatorExpr::prox_neg_log(1.0).unwrap(),
        OperatorExpr::reflect(ConvexSet::halfspace(v(&[1.0, 1.0]), 3.0).unwrap()),
    ];
    for t in &ops {
        let ks: Vec<f64> = estimate_over_radii(t, &cfg, &[1.0, 10.0, 100.0, 1000.0])
            .unwrap()
            .iter()
            .map(|r| r.kappa_lower)
            .collect();
        assert!(ks.windows(2).all(|w| w[0] <= w[1]), "{ks:?}");
    }
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let t = OperatorExpr::compose(
        &OperatorExpr::project(ConvexSet::ball(Vector::zeros(3), 1.0).unwrap()),
        &OperatorExpr::reflect(ConvexSet::halfspace(v(&[0.0, 1.0, 1.0]), 0.2).unwrap()),
    )
    .unwrap();
    let cfg = SampleConfig {
        n_pairs: 20_000,
        ..SampleConfig::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_lower(&t, &cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, estimate_lower(&t, &cfg).unwrap());
}

#[test]
fn exact_attained_certificates_are_reached_after_refinement() {
    let cfg = SampleConfig::default();
    let hs = ConvexSet::halfspace(v(&[2.0, -1.0]), 1.0).unwrap();
    let cases = [
        OperatorExpr::project(hs.clone()),
        OperatorExpr::relax(&OperatorExpr::project(hs.clone()), 0.3).unwrap(),
        OperatorExpr::compose(
            &OperatorExpr::project(ConvexSet::ball(v(&[0.0, 0.0]), 1.0).unwrap()),
            &OperatorExpr::project(ConvexSet::singleton(v(&[4.0, 4.0]))),
        )
        .unwrap(),
    ];
    for t in &cases {
        let c = certify(t);
        let k = estimate_lower(t, &cfg).unwrap().kappa_lower;
        let exact = c.exact_value().unwrap_or(c.lower);
        assert!(k <= exact + 1e-6 && k >= exact - 1e-3, "{k} vs {c:?}");
    }
}
