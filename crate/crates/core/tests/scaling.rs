use proptest::prelude::*;

use rgscale_core::corrmodels::*;
use rgscale_core::qmc::QmcConfig;
use rgscale_core::scaling::*;
use rgscale_core::smearing::{Profile, SmearingKernel};

fn engine(spec: FamilySpec<f64>, profile: Profile) -> ScalingEngine<f64> {
    let family = make_family(&spec).unwrap();
    let n = family.n();
    ScalingEngine::new(family, SmearingKernel::new(n, profile).unwrap()).unwrap()
}

fn simpson_weights(m: usize, h: f64) -> Vec<f64> {
    (0..=m)
        .map(|i| {
            let c = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

/// `∫∫ f(a) f(b) w(|y + a - b|) da db` in one dimension, by tensor Simpson.
fn pair_oracle(profile: Profile, y: f64, w: impl Fn(f64) -> f64, m: usize) -> f64 {
    let k = SmearingKernel::<f64>::new(1, profile).unwrap();
    let h = 4.0 / m as f64;
    let nodes: Vec<f64> = (0..=m).map(|i| -2.0 + h * i as f64).collect();
    let f: Vec<f64> = nodes.iter().map(|x| k.eval_point(&[*x])).collect();
    let sw = simpson_weights(m, h);
    let mut total = 0.0;
    for i in 0..=m {
        let wi = sw[i] * f[i];
        if wi == 0.0 {
            continue;
        }
        for j in 0..=m {
            total += wi * sw[j] * f[j] * w((y + nodes[i] - nodes[j]).abs());
        }
    }
    total
}

#[test]
fn two_point_block_matches_direct_double_integral() {
    let eng = engine(FamilySpec::ExponentialCluster { n: 1, xi: 1.0, max_order: 2 }, Profile::Bump);
    let r = 2.0;
    let s = eng.run(&ScalingRequest::block(2, 0.5, vec![vec![0.0], vec![2.5]], vec![r])).unwrap();
    // prefactor R^{2(n-γ)} = R
    let oracle = r * pair_oracle(Profile::Bump, -2.5, |d| (-r * d).exp(), 1600);
    let rel = ((s.points[0].value - oracle) / oracle).abs();
    assert!(rel < 1e-4, "engine {} oracle {oracle} rel {rel}", s.points[0].value);
}

#[test]
fn exact_power_law_block_is_scale_invariant() {
    let eng = engine(FamilySpec::ExactPowerLaw { n: 1, alpha: 0.5, c0: 1.0 }, Profile::Bump);
    let x = vec![vec![0.0], vec![8.0]];
    let block = eng.run(&ScalingRequest::block(2, 0.75, x.clone(), vec![4.0, 64.0, 1024.0])).unwrap();
    let field = eng.run(&ScalingRequest::field(2, 0.75, x, vec![4.0, 64.0, 1024.0])).unwrap();
    let oracle = pair_oracle(Profile::Bump, -8.0, |d| d.powf(-0.5), 800);
    for (b, f) in block.points.iter().zip(&field.points) {
        assert!(((b.value - oracle) / oracle).abs() < 1e-6, "{} vs {oracle}", b.value);
        assert!((f.value - 8f64.powf(-0.5)).abs() < 1e-14);
    }
}

#[test]
fn normal_limit_holds_for_both_profiles() {
    for profile in [Profile::Bump, Profile::Cos2] {
        let eng = engine(FamilySpec::ExponentialCluster { n: 1, xi: 1.0, max_order: 2 }, profile);
        let s = eng.run(&ScalingRequest::block(2, 0.5, vec![vec![0.0], vec![2.5]], vec![256.0])).unwrap();
        // Ŵ(0) = 2ξ; K_2(2.5) from the double integral with w = δ
        let k2 = {
            let k = SmearingKernel::<f64>::new(1, profile).unwrap();
            let m = 4000;
            let h = 4.0 / m as f64;
            let sw = simpson_weights(m, h);
            (0..=m)
                .map(|i| {
                    let a = -2.0 + h * i as f64;
                    sw[i] * k.eval_point(&[a]) * k.eval_point(&[a - 2.5])
                })
                .sum::<f64>()
        };
        let limit = 2.0 * k2;
        assert!(((s.points[0].value - limit) / limit).abs() < 1e-3, "{profile:?}: {} vs {limit}", s.points[0].value);
    }
}

#[test]
fn kernel_resolution_does_not_move_the_series() {
    let family = make_family(&FamilySpec::PowerLaw(PowerLawSpec::new(1, 0.5, 1.0))).unwrap();
    let req = ScalingRequest::block(2, 0.75, vec![vec![0.0], vec![8.0]], vec![16.0, 256.0]);
    let coarse = SmearingKernel::<f64>::with_resolution(1, Profile::Bump, 64).unwrap();
    let fine = SmearingKernel::<f64>::with_resolution(1, Profile::Bump, 256).unwrap();
    let a = ScalingEngine::new(family.clone(), coarse).unwrap().run(&req).unwrap();
    let b = ScalingEngine::new(family, fine).unwrap().run(&req).unwrap();
    for (p, q) in a.points.iter().zip(&b.points) {
        assert!(((p.value - q.value) / q.value).abs() < 1e-5, "{} vs {}", p.value, q.value);
    }
}

#[test]
fn three_point_limit_matches_dense_grid() {
    let eng = engine(FamilySpec::HomogeneousChannel(HomogeneousChannelSpec::new(1, [(3, 1.0)])), Profile::Bump);
    let x = vec![vec![0.0], vec![6.0], vec![12.0]];
    let est = eng.limit_prediction_lpt(&x, &QmcConfig::default(), 0).unwrap();
    assert!(!est.fallback);

    let k = SmearingKernel::<f64>::new(1, Profile::Bump).unwrap();
    let m = 160;
    let h = 4.0 / m as f64;
    let nodes: Vec<f64> = (0..=m).map(|i| -2.0 + h * i as f64).collect();
    let fw: Vec<f64> = simpson_weights(m, h).iter().zip(&nodes).map(|(w, x)| w * k.eval_point(&[*x])).collect();
    // consecutive differences: y = (x_1 - x_2, x_2 - x_3) = (-6, -6)
    let mut oracle = 0.0;
    for (a, wa) in nodes.iter().zip(&fw) {
        for (b, wb) in nodes.iter().zip(&fw) {
            let z1 = a - b - 6.0;
            for (c, wc) in nodes.iter().zip(&fw) {
                let z2 = b - c - 6.0;
                oracle += wa * wb * wc / (z1 * z1 + z2 * z2).sqrt();
            }
        }
    }
    let gap = (est.value - oracle).abs();
    assert!(gap < 4.0 * est.stderr + 1e-4 * oracle, "qmc {} ± {} vs {oracle}", est.value, est.stderr);
}

#[test]
fn support_overlap_is_rejected_when_enforced() {
    let eng = engine(FamilySpec::ExponentialCluster { n: 1, xi: 1.0, max_order: 3 }, Profile::Bump);
    let mut req = ScalingRequest::block(2, 0.5, vec![vec![0.0], vec![3.0]], vec![8.0]);
    req.enforce_support = true;
    assert!(eng.run(&req).is_err());
    req.x[1][0] = 5.0;
    assert!(eng.run(&req).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_mode_is_exactly_scale_invariant(alpha in 0.05f64..0.95, y in 0.5f64..20.0, r in 1.0f64..1e4) {
        let eng = engine(FamilySpec::ExactPowerLaw { n: 1, alpha, c0: 1.0 }, Profile::Bump);
        let gamma = (1.0 + alpha) / 2.0;
        let run = |yy: f64| eng.run(&ScalingRequest::field(2, gamma, vec![vec![0.0], vec![yy]], vec![r])).unwrap().points[0].value;
        let ratio = run(y) / run(2.0 * y);
        let expected = 2f64.powf(1.0 - alpha);
        prop_assert!(((ratio - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn two_point_block_is_even_in_separation(y in 0.2f64..12.0) {
        let eng = engine(FamilySpec::PowerLaw(PowerLawSpec::new(1, 0.5, 1.0)), Profile::Bump);
        let run = |yy: f64| eng.run(&ScalingRequest::block(2, 0.75, vec![vec![0.0], vec![yy]], vec![32.0])).unwrap().points[0].value;
        let (a, b) = (run(y), run(-y));
        prop_assert!(((a - b) / a).abs() < 1e-12);
    }
}
