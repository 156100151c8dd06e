//! Acceptance suite. Each test prints one `AC-n PASS|FAIL` line; run with
//! `cargo test -p extito-core --test acceptance -- --nocapture`.

use extito_core::calculus::{fukushima_decompose, ito_integral, EvalGrid};
use extito_core::harness::{
    convergence_table, ito_assemble, martingale_mean_test, multidim_ito_check, residual_trend_ok,
    ExperimentConfig, Identity, Tolerances,
};
use extito_core::jumps::{compensated_jump_sum, total_jump_sum, truncation_sequence};
use extito_core::levels::{integrate_levels, integrate_levels_elementary, ElementaryFunction, LevelGrid};
use extito_core::local_time::{kernel_local_time_oracle, occupation_check, support_check};
use extito_core::mc::try_map_seeds;
use extito_core::nakao::{gamma_a, reverse_path, MafBuilder};
use extito_core::process::{simulate_path, JumpLaw, ProcessSpec, SamplePath, StateWindow};
use extito_core::quad::QuadConfig;
use extito_core::stats::Summary;
use extito_core::{Fn2, FunctionDescriptor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const T: f64 = 1.0;
const DT_LIST: [f64; 3] = [1e-2, 1e-3, 1e-4];
const DT_FINE: f64 = 1e-4;
const N_PATHS: usize = 1000;

const AC1_REL_TO_ORACLE: f64 = 0.05;
const AC1_REL_TO_KERNEL: f64 = 0.10;
const AC1_BANDWIDTH: f64 = 0.02;
const AC2_MEAN_ABS: f64 = 0.05;
const AC3_REL: f64 = 0.05;
const AC3_LEVEL_CELLS: usize = 256;
const AC4_Q_REL: f64 = 0.05;
const AC4_MEAN_ABS: f64 = 0.05;
const AC5_EXACT: f64 = 1e-12;
const AC5_Z: f64 = 3.0;
const AC6_EXACT: f64 = 1e-12;
const AC7_LEVELS: usize = 8;
const AC8_RATIO: f64 = 1e-2;
const AC8_FRACTION: f64 = 0.95;
const AC9_MEAN_ABS: f64 = 0.05;
const AC10_EXACT: f64 = 1e-12;
const AC10_CASES: usize = 100;

fn report(id: &str, pass: bool, detail: String) {
    println!("{id} {}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ")
}

fn tolerances() -> Tolerances {
    Tolerances { exact: AC5_EXACT, residual_mean_abs: AC2_MEAN_ABS, relative: AC3_REL, ..Tolerances::default() }
}

fn bm_config() -> ExperimentConfig {
    ExperimentConfig {
        spec: ProcessSpec::brownian(1.0),
        horizon: T,
        dts: DT_LIST.to_vec(),
        n_paths: N_PATHS,
        seed_base: 1_000,
        tolerances: tolerances(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn ac1_local_time_equivalence() {
    let spec = ProcessSpec::brownian(1.0);
    let u = FunctionDescriptor::identity();
    let n = (T / DT_FINE).round() as usize;
    let per_path = try_map_seeds(1_000, N_PATHS, |seed| {
        let p = simulate_path(&spec, T, DT_FINE, seed)?;
        let g = gamma_a(&p, &u, 0.0, &EvalGrid::checkpoints(&[n])?)?;
        let k = kernel_local_time_oracle(&p, &u, &spec, 0.0, AC1_BANDWIDTH, n)?;
        Ok((-2.0 * g.terminal(), k.value))
    })
    .unwrap();
    let l = Summary::of(&per_path.iter().map(|p| p.0).collect::<Vec<_>>());
    let k = Summary::of(&per_path.iter().map(|p| p.1).collect::<Vec<_>>());
    let oracle = (2.0 / std::f64::consts::PI).sqrt();
    let rel_oracle = (l.mean - oracle).abs() / oracle;
    let rel_kernel = (l.mean - k.mean).abs() / k.mean;
    let pass = rel_oracle <= AC1_REL_TO_ORACLE && rel_kernel <= AC1_REL_TO_KERNEL;
    report(
        "AC-1",
        pass,
        format!(
            "mean -2Γ^0_1 = {:.4} (±{:.4}) vs sqrt(2/π) = {oracle:.4}, rel {rel_oracle:.4}; kernel mean {:.4}, paired rel gap {rel_kernel:.4}",
            l.mean, l.se, k.mean
        ),
    );
    assert!(pass);
}

#[test]
fn ac2_tanaka_residual() {
    let table = convergence_table(&bm_config(), Identity::Tanaka).unwrap();
    let r: Vec<f64> = table.rows.iter().map(|r| r.mean_residual).collect();
    let decreasing = residual_trend_ok(&r, 0.0);
    let fine = *r.last().unwrap();
    let pass = decreasing && fine <= AC2_MEAN_ABS;
    report("AC-2", pass, format!("mean |R_1| along dt {DT_LIST:?}: [{}]", list(&r)));
    assert!(pass);
}

#[test]
fn ac3_occupation_density() {
    let spec = ProcessSpec::brownian(1.0);
    let u = FunctionDescriptor::identity();
    let f = FunctionDescriptor::indicator(-1.0, 1.0);
    let n = (T / DT_FINE).round() as usize;
    let rel = try_map_seeds(1_000, N_PATHS, |seed| {
        let p = simulate_path(&spec, T, DT_FINE, seed)?;
        let levels = LevelGrid::for_path(&p, &u, AC3_LEVEL_CELLS)?;
        let (lhs, rhs) = occupation_check(&p, &u, &f, &spec, &levels, n)?;
        Ok((lhs - rhs).abs() / rhs)
    })
    .unwrap();
    let s = Summary::of(&rel);
    let pass = s.mean <= AC3_REL;
    report("AC-3", pass, format!("mean |lhs - rhs| / rhs = {:.5} (max {:.5})", s.mean, s.max_abs));
    assert!(pass);
}

#[test]
fn ac4_ito_square() {
    let spec = ProcessSpec::brownian(1.0);
    let u = FunctionDescriptor::identity();
    let f = FunctionDescriptor::square();
    let n = (T / DT_FINE).round() as usize;
    let rows = try_map_seeds(1_000, N_PATHS, |seed| {
        let p = simulate_path(&spec, T, DT_FINE, seed)?;
        let g = EvalGrid::checkpoints(&[n])?;
        Ok(ito_assemble(&p, &u, &f, &spec, &g, &QuadConfig::default())?[1])
    })
    .unwrap();
    let q = Summary::of(&rows.iter().map(|r| r.q()).collect::<Vec<_>>());
    let r = Summary::of(&rows.iter().map(|r| r.residual().abs()).collect::<Vec<_>>());
    let pass = (q.mean - 1.0).abs() <= AC4_Q_REL && r.mean <= AC4_MEAN_ABS;
    report("AC-4", pass, format!("mean Q_1 = {:.5}, mean |R_1| = {:.3e}", q.mean, r.mean));
    assert!(pass);
}

#[test]
fn ac5_pure_jump_exactness() {
    let spec = ProcessSpec::truncated_stable(1.2, 1.0, 0.05);
    let dt = 1e-3;
    let u = FunctionDescriptor::identity();
    let n = (T / dt).round() as usize;
    let cfg = QuadConfig::default();
    let forms = [FunctionDescriptor::tanh(), FunctionDescriptor::neg_part(0.0), FunctionDescriptor::atan()];
    let out = try_map_seeds(5_000, N_PATHS, |seed| {
        let p = simulate_path(&spec, T, dt, seed)?;
        let g = EvalGrid::fractions(n, &[0.25, 0.5, 1.0])?;
        let mut worst_gamma = 0.0_f64;
        for a in [-0.5, 0.0, 0.3] {
            worst_gamma = worst_gamma.max(gamma_a(&p, &u, a, &g)?.sup_norm());
        }
        let mut worst_r = 0.0_f64;
        for f in &forms {
            for row in ito_assemble(&p, &u, f, &spec, &g, &cfg)? {
                worst_r = worst_r.max(row.residual().abs());
            }
        }
        let md = compensated_jump_sum(&p, &u, &FunctionDescriptor::tanh(), &spec, 0.0, &g, &cfg)?;
        Ok((worst_gamma, worst_r, md.m_d.terminal()))
    })
    .unwrap();
    let gmax = out.iter().fold(0.0_f64, |m, o| m.max(o.0));
    let rmax = out.iter().fold(0.0_f64, |m, o| m.max(o.1));
    let md: Vec<f64> = out.iter().map(|o| o.2).collect();
    let z = martingale_mean_test(&md, &Tolerances { z_threshold: AC5_Z, ..Tolerances::default() }).unwrap();
    let pass = gmax == 0.0 && rmax <= AC5_EXACT && z.pass;
    report("AC-5", pass, format!("sup |Γ^a| = {gmax:e}, max |R| = {rmax:.3e}, M^d_1(tanh) z = {:.3}", z.z));
    assert!(pass);
}

#[test]
fn ac6_level_integration_identity() {
    let spec = ProcessSpec::brownian(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0_f64;
    for path_seed in 0..20u64 {
        let p = simulate_path(&spec, T, 1e-3, 600 + path_seed).unwrap();
        let u = if path_seed % 2 == 0 { FunctionDescriptor::identity() } else { FunctionDescriptor::tanh() };
        let g = EvalGrid::sqrt(p.steps());
        for _ in 0..20 {
            let cells = rng.random_range(3..40);
            let (lo, hi) = p.u_range(&u);
            let levels = LevelGrid::covering(lo, hi, cells).unwrap();
            let coeffs: Vec<f64> = (0..cells).map(|_| rng.random_range(-2.0..2.0)).collect();
            let f = ElementaryFunction::new(levels, coeffs).unwrap();
            let a = integrate_levels_elementary(&f, &p, &u, &g).unwrap();
            let b = integrate_levels(&f.as_descriptor(), &p, &u, &g).unwrap();
            worst = worst.max(a.combine(1.0, &b, -1.0).unwrap().sup_norm());
        }
    }
    let pass = worst <= AC6_EXACT;
    report("AC-6", pass, format!("max |elementary - Γ((f∘u) * M)| over 400 cases = {worst:.3e}"));
    assert!(pass);
}

#[test]
fn ac7_truncation_sequence_bound() {
    let (alpha, scale, delta) = (1.2, 1.0, 0.05);
    let spec = ProcessSpec::truncated_stable(alpha, scale, delta);
    let seq = truncation_sequence(&spec, &FunctionDescriptor::identity(), AC7_LEVELS, &StateWindow::default(), &QuadConfig::default())
        .unwrap();
    // Closed form: 2 ∫_delta^eps y^2 · scale · y^{-1-alpha} dy.
    let s = |e: f64| {
        if e <= delta {
            0.0
        } else {
            2.0 * scale / (2.0 - alpha) * (e.powf(2.0 - alpha) - delta.powf(2.0 - alpha))
        }
    };
    let complete = seq.len() == AC7_LEVELS || seq.floor_reached;
    let decreasing = seq.eps.windows(2).all(|w| w[0] > w[1]);
    let bounds = seq.eps.iter().enumerate().all(|(i, &e)| s(e) < 0.5_f64.powi(4 * (i as i32 + 1)));
    let pass = complete && decreasing && bounds;
    report(
        "AC-7",
        pass,
        format!("eps = [{}], floor reached: {}", list(&seq.eps), seq.floor_reached),
    );
    assert!(pass);
}

#[test]
fn ac8_support_property() {
    let spec = ProcessSpec::brownian(1.0);
    let u = FunctionDescriptor::identity();
    let n = (T / DT_FINE).round() as usize;
    let ratios = try_map_seeds(1_000, N_PATHS, |seed| {
        let p = simulate_path(&spec, T, DT_FINE, seed)?;
        let num = support_check(&p, &u, 0.0, 4, n)?;
        let den = support_check(&p, &u, 0.0, 0, n)?;
        Ok(if den > 0.0 { num / den } else { f64::INFINITY })
    })
    .unwrap();
    let ok = ratios.iter().filter(|r| **r <= AC8_RATIO).count();
    let frac = ok as f64 / ratios.len() as f64;
    let pass = frac >= AC8_FRACTION;
    let worst = ratios.iter().fold(0.0_f64, |m, r| m.max(*r));
    report("AC-8", pass, format!("{:.1}% of paths with ratio <= {AC8_RATIO}; worst ratio {worst:.3e}", 100.0 * frac));
    assert!(pass);
}

#[test]
fn ac9_multidim_ito() {
    let spec = ProcessSpec::diffusion_2d([[1.0, 0.0], [0.0, 1.0]]);
    let mut means = Vec::new();
    let mut q_fine = Summary::of(&[]);
    for &dt in &DT_LIST {
        let n = (T / dt).round() as usize;
        let rows = try_map_seeds(9_000, N_PATHS, |seed| {
            let p = simulate_path(&spec, T, dt, seed)?;
            Ok(multidim_ito_check(&p, &Fn2::Product, &spec, &EvalGrid::checkpoints(&[n])?)?[1])
        })
        .unwrap();
        means.push(Summary::of(&rows.iter().map(|r| r.residual().abs()).collect::<Vec<_>>()).mean);
        q_fine = Summary::of(&rows.iter().map(|r| r.q()).collect::<Vec<_>>());
    }
    let trend = residual_trend_ok(&means, Tolerances::default().trend_floor);
    let q_ok = q_fine.mean.abs() <= 3.0 * q_fine.se;
    let pass = *means.last().unwrap() <= AC9_MEAN_ABS && trend && q_ok;
    report(
        "AC-9",
        pass,
        format!("mean |R_1| along dt: [{}]; mean Q_1 at dt=1e-4: {:.4} ± {:.4}", list(&means), q_fine.mean, q_fine.se),
    );
    assert!(pass);
}

fn random_jump_path(rng: &mut ChaCha8Rng, seed: u64) -> (ProcessSpec, SamplePath) {
    let spec = match rng.random_range(0..3) {
        0 => ProcessSpec::brownian_plus_jumps(rng.random_range(0.2..2.0), 1.2, 1.0, 0.1),
        1 => ProcessSpec::compound_poisson(rng.random_range(1.0..30.0), JumpLaw::Normal { sd: 0.7 }),
        _ => ProcessSpec::truncated_stable(rng.random_range(0.5..1.8), 1.0, 0.2),
    };
    let p = simulate_path(&spec, 1.0, 1e-3, seed).unwrap();
    (spec, p)
}

#[test]
fn ac10_bookkeeping_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cfg = QuadConfig::default();
    let us = [FunctionDescriptor::identity(), FunctionDescriptor::tanh(), FunctionDescriptor::atan()];
    let (mut fuk, mut ledger, mut lin, mut inv) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for case in 0..AC10_CASES as u64 {
        let (spec, p) = random_jump_path(&mut rng, 10_000 + case);
        let u = &us[case as usize % us.len()];
        let g = EvalGrid::sqrt(p.steps());
        fuk = fuk.max(fukushima_decompose(&p, u, &spec, &g, &cfg).unwrap().bookkeeping_error(&p, u));

        // Every move of the path is a continuous increment or a ledger jump.
        let id = FunctionDescriptor::identity();
        let jumps = total_jump_sum(&p, &id, &id, &g).unwrap();
        let cont = MafBuilder::ContinuousPart { u: id.clone() }.evaluate(&p, &g).unwrap();
        for (pos, &k) in g.indices().iter().enumerate() {
            let moved = p.value(k) - p.value(0);
            ledger = ledger.max((moved - jumps.values()[pos] - cont.values()[pos]).abs());
        }

        let m = cont;
        let steps = m.values().len() - 1;
        let f1: Vec<f64> = (0..steps).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f2: Vec<f64> = (0..steps).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let comb: Vec<f64> = f1.iter().zip(&f2).map(|(x, y)| a * x + b * y).collect();
        let lhs = ito_integral(&comb, &m).unwrap();
        let rhs = ito_integral(&f1, &m).unwrap().combine(a, &ito_integral(&f2, &m).unwrap(), b).unwrap();
        lin = lin.max(lhs.combine(1.0, &rhs, -1.0).unwrap().sup_norm());

        let bm = simulate_path(&ProcessSpec::brownian(rng.random_range(0.1..3.0)), 1.0, 1e-3, 20_000 + case).unwrap();
        let k = rng.random_range(1..=bm.steps());
        let back = reverse_path(&reverse_path(&bm, k).unwrap(), k).unwrap();
        for i in 0..=k {
            inv = inv.max((back.value(i) - bm.value(i)).abs());
        }
    }
    let pass = fuk <= AC10_EXACT && ledger <= AC10_EXACT && lin <= AC10_EXACT && inv <= AC10_EXACT;
    report(
        "AC-10",
        pass,
        format!("fukushima {fuk:.2e}, ledger {ledger:.2e}, linearity {lin:.2e}, involution {inv:.2e} over {AC10_CASES} cases"),
    );
    assert!(pass);
}
