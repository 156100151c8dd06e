//! Monte Carlo checks: zero-mean martingales, start-protocol equivalence and
//! the runner's aggregation.

use extito_core::calculus::EvalGrid;
use extito_core::harness::{
    convergence_table, martingale_mean_test, run_identity, ExperimentConfig, Identity, Tolerances,
};
use extito_core::jumps::compensated_jump_sum;
use extito_core::mc::{try_map_seeds, StartProtocol};
use extito_core::nakao::MafBuilder;
use extito_core::process::{simulate_path, JumpLaw, ProcessSpec};
use extito_core::quad::QuadConfig;
use extito_core::stats::Summary;
use extito_core::FunctionDescriptor;

#[test]
fn continuous_martingale_has_zero_mean() {
    let spec = ProcessSpec::brownian(1.0);
    let b = MafBuilder::Integrand { f: FunctionDescriptor::tanh(), u: FunctionDescriptor::identity() };
    let m = try_map_seeds(0, 1000, |s| b.value_at(&simulate_path(&spec, 1.0, 1e-3, s)?, 1000)).unwrap();
    let tol = Tolerances::default();
    assert!(martingale_mean_test(&m, &tol).unwrap().pass);
    let shifted: Vec<f64> = m.iter().map(|v| v + 0.5).collect();
    assert!(!martingale_mean_test(&shifted, &tol).unwrap().pass);
    assert!(martingale_mean_test(&[0.0; 40], &tol).unwrap().pass);
    assert!(martingale_mean_test(&[0.0; 10], &tol).is_err());
}

#[test]
fn compensated_jump_sum_has_zero_mean() {
    let spec = ProcessSpec::compound_poisson(20.0, JumpLaw::Normal { sd: 0.5 });
    let u = FunctionDescriptor::tanh();
    let f = FunctionDescriptor::square();
    let m = try_map_seeds(100, 1000, |s| {
        let p = simulate_path(&spec, 1.0, 1e-3, s)?;
        let t = compensated_jump_sum(&p, &u, &f, &spec, 0.0, &EvalGrid::checkpoints(&[1000])?, &QuadConfig::default())?;
        Ok(t.m_d.terminal())
    })
    .unwrap();
    let z = martingale_mean_test(&m, &Tolerances::default()).unwrap();
    assert!(z.pass, "z = {}", z.z);
}

#[test]
fn start_protocols_agree() {
    // The occupation formula with f = 1 is translation invariant, so its
    // residual law must not depend on where the path starts.
    let base = ExperimentConfig {
        spec: ProcessSpec::brownian(1.0),
        occupation_f: FunctionDescriptor::constant(1.0),
        dts: vec![1e-3],
        n_paths: 400,
        seed_base: 77,
        ..ExperimentConfig::default()
    };
    let fixed = run_identity(&base, Identity::Occupation, 1e-3).unwrap();
    let stat = ExperimentConfig { start: StartProtocol::stationary_for(1.0), seed_base: 7_700, ..base.clone() };
    let stationary = run_identity(&stat, Identity::Occupation, 1e-3).unwrap();
    for (a, b) in fixed.stats.iter().zip(&stationary.stats) {
        let se = (a.se_residual.powi(2) + b.se_residual.powi(2)).sqrt();
        assert!(
            (a.mean_residual - b.mean_residual).abs() <= 2.0 * se,
            "t={}: {} vs {} (se {se})",
            a.t,
            a.mean_residual,
            b.mean_residual
        );
    }
}

#[test]
fn runner_is_deterministic_and_checks_each_checkpoint() {
    let cfg = ExperimentConfig { n_paths: 40, dts: vec![1e-2, 5e-3], ..ExperimentConfig::default() };
    let a = run_identity(&cfg, Identity::Tanaka, 1e-2).unwrap();
    let b = run_identity(&cfg, Identity::Tanaka, 1e-2).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.stats.iter().map(|s| s.k).collect::<Vec<_>>(), vec![25, 50, 100]);
    assert_eq!(a.samples.len(), 3);
    assert!(a.samples.iter().all(|s| s.len() == 40));
    let means = Summary::of(&a.samples[2].iter().map(|s| s.residual.abs()).collect::<Vec<_>>()).mean;
    assert_eq!(means, a.stats[2].mean_residual);
}

#[test]
fn convergence_table_needs_two_step_sizes() {
    let cfg = ExperimentConfig { n_paths: 10, dts: vec![1e-2], ..ExperimentConfig::default() };
    assert!(convergence_table(&cfg, Identity::Ito).is_err());
}

#[test]
fn pure_jump_rows_are_exactly_zero() {
    let cfg = ExperimentConfig {
        spec: ProcessSpec::truncated_stable(1.2, 1.0, 0.05),
        f: FunctionDescriptor::tanh(),
        n_paths: 50,
        dts: vec![1e-2, 1e-3],
        ..ExperimentConfig::default()
    };
    for id in [Identity::Ito, Identity::Tanaka, Identity::Occupation, Identity::LocalTime] {
        let t = convergence_table(&cfg, id).unwrap();
        assert!(t.trend_ok);
        for r in &t.rows {
            assert!(r.pass, "{r:?}");
            assert!(r.max_abs_residual <= 1e-12, "{r:?}");
        }
    }
}

#[test]
fn multidim_requires_planar_spec() {
    let cfg = ExperimentConfig { n_paths: 10, ..ExperimentConfig::default() };
    assert!(run_identity(&cfg, Identity::Multidim, 1e-2).is_err());
    let planar = ExperimentConfig { spec: ProcessSpec::diffusion_2d([[1.0, 0.3], [0.3, 2.0]]), ..cfg };
    assert!(run_identity(&planar, Identity::Ito, 1e-2).is_err());
    assert!(run_identity(&planar, Identity::Multidim, 1e-2).unwrap().pass());
}
