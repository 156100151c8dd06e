//! Randomized structural properties of the calculus.

use extito_core::calculus::{ito_integral, AfPath, EvalGrid};
use extito_core::harness::ito_assemble;
use extito_core::jumps::Compensator;
use extito_core::jumps::JumpRegion;
use extito_core::levels::LevelGrid;
use extito_core::local_time::{local_time, local_time_field};
use extito_core::nakao::{gamma, gamma_sweep, reverse_path, MafBuilder};
use extito_core::process::{simulate_path, JumpLaw, ProcessSpec, SamplePath};
use extito_core::quad::QuadConfig;
use extito_core::FunctionDescriptor;
use proptest::prelude::*;

fn u_catalog() -> impl Strategy<Value = FunctionDescriptor> {
    prop_oneof![
        Just(FunctionDescriptor::identity()),
        Just(FunctionDescriptor::tanh()),
        Just(FunctionDescriptor::atan()),
        (0.2..3.0f64).prop_map(|k| FunctionDescriptor::tanh().scaled(k)),
    ]
}

fn diffusive_spec() -> impl Strategy<Value = ProcessSpec> {
    prop_oneof![
        (0.1..4.0f64).prop_map(ProcessSpec::brownian),
        (0.1..2.0f64, 0.5..1.8f64).prop_map(|(s, a)| ProcessSpec::brownian_plus_jumps(s, a, 1.0, 0.2)),
    ]
}

fn pure_jump_spec() -> impl Strategy<Value = ProcessSpec> {
    prop_oneof![
        (0.5..1.8f64, 0.05..0.5f64).prop_map(|(a, d)| ProcessSpec::truncated_stable(a, 1.0, d)),
        (1.0..40.0f64, 0.1..2.0f64).prop_map(|(r, s)| ProcessSpec::compound_poisson(r, JumpLaw::Uniform { half_width: s })),
        (1.0..40.0f64, 0.1..2.0f64).prop_map(|(r, s)| ProcessSpec::compound_poisson(r, JumpLaw::TwoPoint { size: s })),
    ]
}

fn path(spec: &ProcessSpec, seed: u64) -> SamplePath {
    simulate_path(spec, 1.0, 2e-3, seed).unwrap()
}

fn close(a: &AfPath, b: &AfPath, tol: f64) -> bool {
    a.combine(1.0, b, -1.0).unwrap().sup_norm() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn sweep_agrees_with_reversal(spec in diffusive_spec(), u in u_catalog(), seed in any::<u64>(), a in -1.0..1.0f64) {
        let p = path(&spec, seed);
        let g = EvalGrid::uniform(p.steps(), 12);
        for b in [MafBuilder::ContinuousPart { u: u.clone() }, MafBuilder::Level { u: u.clone(), level: a }] {
            prop_assert!(close(&gamma(&b, &p, &g).unwrap(), &gamma_sweep(&b, &p, &g).unwrap(), 1e-12));
        }
    }

    #[test]
    fn gamma_is_additive(spec in diffusive_spec(), u in u_catalog(), seed in any::<u64>(), cut in 1usize..499) {
        let p = path(&spec, seed);
        let b = MafBuilder::ContinuousPart { u };
        let n = p.steps();
        let whole = gamma(&b, &p, &EvalGrid::checkpoints(&[cut, n]).unwrap()).unwrap();
        let tail = gamma(&b, &p.window(cut).unwrap(), &EvalGrid::checkpoints(&[n - cut]).unwrap()).unwrap();
        let lhs = whole.terminal();
        let rhs = whole.values()[1] + tail.terminal();
        prop_assert!((lhs - rhs).abs() <= 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn reversal_is_an_involution_on_continuous_paths(s in 0.1..4.0f64, seed in any::<u64>(), k in 1usize..=500) {
        let p = path(&ProcessSpec::brownian(s), seed);
        let back = reverse_path(&reverse_path(&p, k).unwrap(), k).unwrap();
        prop_assert_eq!(back.raw_values(), &p.raw_values()[..=k]);
        prop_assert_eq!(back.raw_cont(), &p.raw_cont()[..k]);
    }

    #[test]
    fn pure_jump_ito_is_exact(spec in pure_jump_spec(), u in u_catalog(), seed in any::<u64>()) {
        let p = path(&spec, seed);
        let g = EvalGrid::fractions(p.steps(), &[0.25, 0.5, 1.0]).unwrap();
        for f in [FunctionDescriptor::tanh(), FunctionDescriptor::atan(), FunctionDescriptor::neg_part(0.0)] {
            for r in ito_assemble(&p, &u, &f, &spec, &g, &QuadConfig::default()).unwrap() {
                prop_assert!(r.residual().abs() <= 1e-12, "{r:?}");
                prop_assert_eq!(r.level_integral, 0.0);
            }
        }
    }

    #[test]
    fn ito_integral_is_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let p = path(&ProcessSpec::brownian(1.0), seed);
        let g = EvalGrid::uniform(p.steps(), 40);
        let m = MafBuilder::ContinuousPart { u: FunctionDescriptor::identity() }.evaluate(&p, &g).unwrap();
        let n = g.len() - 1;
        let f1: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let f2: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).cos()).collect();
        let mix: Vec<f64> = f1.iter().zip(&f2).map(|(x, y)| a * x + b * y).collect();
        let lhs = ito_integral(&mix, &m).unwrap();
        let rhs = ito_integral(&f1, &m).unwrap().combine(a, &ito_integral(&f2, &m).unwrap(), b).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn local_time_is_nondecreasing_for_identity(s in 0.1..4.0f64, seed in any::<u64>()) {
        let p = path(&ProcessSpec::brownian(s), seed);
        let u = FunctionDescriptor::identity();
        let levels = LevelGrid::for_path(&p, &u, 32).unwrap();
        let field = local_time_field(&p, &u, &levels, &EvalGrid::uniform(p.steps(), 30)).unwrap();
        prop_assert_eq!(field.decrease_fraction(1e-14), 0.0);
    }

    #[test]
    fn local_time_mirror_symmetry(s in 0.1..4.0f64, seed in any::<u64>(), a in -0.5..0.5f64) {
        // L^a(X) = L^{-a}(-X) for identity u, up to ties at the level.
        let p = path(&ProcessSpec::brownian(s), seed);
        let flip = SamplePath::from_parts(
            1,
            p.dt(),
            p.raw_values().iter().map(|v| -v).collect(),
            p.raw_cont().iter().map(|v| -v).collect(),
            Vec::new(),
            p.seed(),
        )
        .unwrap();
        let u = FunctionDescriptor::identity();
        let g = EvalGrid::uniform(p.steps(), 20);
        prop_assert!(close(&local_time(&p, &u, a, &g).unwrap(), &local_time(&flip, &u, -a, &g).unwrap(), 1e-12));
    }

    #[test]
    fn affine_compensator_vanishes(spec in pure_jump_spec(), k in -3.0..3.0f64, x in -2.0..2.0f64) {
        let u = FunctionDescriptor::identity().scaled(k);
        let c = Compensator::new(&spec, &u, &FunctionDescriptor::identity(), JumpRegion::mid(0.0), &QuadConfig::default()).unwrap();
        prop_assert!(c.is_zero());
        prop_assert_eq!(c.density(x).unwrap(), 0.0);
    }
}

#[test]
fn simulated_endpoints_are_symmetric() {
    // Two-sample Kolmogorov-Smirnov statistic of X_1 against -X_1.
    let spec = ProcessSpec::brownian_plus_jumps(0.5, 1.2, 1.0, 0.1);
    let mut xs: Vec<f64> = (0..2000).map(|s| simulate_path(&spec, 1.0, 1e-2, s).unwrap().value(100)).collect();
    let mut ys: Vec<f64> = xs.iter().map(|x| -x).collect();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xs.len() && j < ys.len() {
        if xs[i] <= ys[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / n).abs());
    }
    // 1% critical value for equal samples of size n: 1.63 sqrt(2 / n).
    assert!(d < 1.63 * (2.0 / n).sqrt(), "KS statistic {d}");
}
