//! Numerical checks of the pathwise identities: Itô assembly, the Tanaka
//! formula, the occupation density formula, local time against a kernel
//! estimate and the two-dimensional Itô formula, plus the Monte Carlo runner
//! that aggregates residuals per checkpoint and per step size.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::calculus::{check_spec, EvalGrid};
use crate::error::{Error, Result};
use crate::func::{Fn2, FunctionDescriptor};
use crate::jumps::{big_jump_term, compensated_jump_sum, total_jump_sum};
use crate::levels::{integrate_levels, integrate_levels_multidim_fn, LevelGrid};
use crate::local_time::{kernel_local_time_oracle, local_time, occupation_sides};
use crate::mc::{self, StartProtocol};
use crate::nakao::{self, MafBuilder};
use crate::process::{ProcessSpec, SamplePath};
use crate::quad::QuadConfig;
use crate::stats::{z_test, Summary, ZTest};

/// Terms of `F(u(X_t)) - F(u(X_0)) = M_t + Q_t + V_t` at one grid index.
///
/// `M = m_d + cont_integral`, `Q = level_integral + a`, and the residual is
/// always derived from the stored parts.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ItoRow {
    pub k: usize,
    pub t: f64,
    pub lhs: f64,
    /// Compensated mid-size jump sum `M^d(F,u)`.
    pub m_d: f64,
    /// `∫ F'(u(X_{s-})) dM^{u,c}`.
    pub cont_integral: f64,
    /// `Γ((F'∘u) * M^{u,c})`.
    pub level_integral: f64,
    /// Compensator `A(F,u)`.
    pub a: f64,
    /// Big-jump term `V(F,u)`.
    pub v: f64,
}

impl ItoRow {
    pub fn m(&self) -> f64 {
        self.m_d + self.cont_integral
    }
    pub fn q(&self) -> f64 {
        self.level_integral + self.a
    }
    pub fn residual(&self) -> f64 {
        self.lhs - (self.m() + self.q() + self.v)
    }
}

/// The decomposition of `F(u(X))` at every point of `grid`.
pub fn ito_assemble(
    path: &SamplePath,
    u: &FunctionDescriptor,
    f: &FunctionDescriptor,
    spec: &ProcessSpec,
    grid: &EvalGrid,
    cfg: &QuadConfig,
) -> Result<Vec<ItoRow>> {
    check_spec(path, spec)?;
    if path.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: path.dim() });
    }
    if f.value(0.0) != 0.0 {
        return Err(Error::domain("F", "must satisfy F(0) = 0"));
    }
    grid.check_fits(path.steps())?;
    let df = f.derivative_fn()?;
    let cont = MafBuilder::Integrand { f: df.clone(), u: u.clone() }.evaluate(path, grid)?;
    let level = integrate_levels(&df, path, u, grid)?;
    let jumps = compensated_jump_sum(path, u, f, spec, 0.0, grid, cfg)?;
    let v = big_jump_term(path, u, f, grid)?;
    let f0 = f.value(u.value(path.value(0)));
    Ok(grid
        .indices()
        .iter()
        .enumerate()
        .map(|(p, &k)| ItoRow {
            k,
            t: path.time(k),
            lhs: f.value(u.value(path.value(k))) - f0,
            m_d: jumps.m_d.values()[p],
            cont_integral: cont.values()[p],
            level_integral: level.values()[p],
            a: jumps.compensator.values()[p],
            v: v.values()[p],
        })
        .collect())
}

/// Both sides of the Tanaka formula for `(u(X) - a)^-` at one grid index.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TanakaRow {
    pub k: usize,
    pub t: f64,
    /// `Γ^a_t`
    pub gamma: f64,
    /// `(u_0 - a)^- - (u_t - a)^- - Z^a_t + Σ Δ(u - a)^-`
    pub rhs: f64,
}

impl TanakaRow {
    pub fn residual(&self) -> f64 {
        self.gamma - self.rhs
    }
}

pub fn tanaka_check(
    path: &SamplePath,
    u: &FunctionDescriptor,
    a: f64,
    spec: &ProcessSpec,
    grid: &EvalGrid,
) -> Result<Vec<TanakaRow>> {
    check_spec(path, spec)?;
    grid.check_fits(path.steps())?;
    let gamma = nakao::gamma_a(path, u, a, grid)?;
    let z = nakao::z_a(path, u, a, grid)?;
    let neg = FunctionDescriptor::neg_part(a);
    let jumps = total_jump_sum(path, u, &neg, grid)?;
    let n0 = neg.value(u.value(path.value(0)));
    Ok(grid
        .indices()
        .iter()
        .enumerate()
        .map(|(p, &k)| TanakaRow {
            k,
            t: path.time(k),
            gamma: gamma.values()[p],
            rhs: n0 - neg.value(u.value(path.value(k))) - z.values()[p] + jumps.values()[p],
        })
        .collect())
}

/// Itô formula for `F(X)` on a planar continuous path: the level part is
/// `Σ_i Γ(∂_i F(X) * M^{i,c})` and there are no jump terms.
pub fn multidim_ito_check(path: &SamplePath, f: &Fn2, spec: &ProcessSpec, grid: &EvalGrid) -> Result<Vec<ItoRow>> {
    check_spec(path, spec)?;
    if path.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: path.dim() });
    }
    if !path.jumps().is_empty() {
        return Err(Error::Unsupported("planar paths with jumps".into()));
    }
    grid.check_fits(path.steps())?;
    let parts: Vec<MafBuilder> =
        (0..2).map(|c| MafBuilder::CoordinateWeighted { f: f.partial_fn(c), component: c }).collect();
    let cont = MafBuilder::Combination(parts.into_iter().map(|b| (1.0, b)).collect()).evaluate(path, grid)?;
    let l0 = integrate_levels_multidim_fn(&f.partial_fn(0), path, 0, grid)?;
    let l1 = integrate_levels_multidim_fn(&f.partial_fn(1), path, 1, grid)?;
    let level = l0.combine(1.0, &l1, 1.0)?;
    let f0 = f.value(path.state(0));
    Ok(grid
        .indices()
        .iter()
        .enumerate()
        .map(|(p, &k)| ItoRow {
            k,
            t: path.time(k),
            lhs: f.value(path.state(k)) - f0,
            m_d: 0.0,
            cont_integral: cont.values()[p],
            level_integral: level.values()[p],
            a: 0.0,
            v: 0.0,
        })
        .collect())
}

/// Pass/fail thresholds of the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tolerances {
    /// Bound on `max |R|` when the identity holds exactly on the grid.
    pub exact: f64,
    /// Bound on the mean absolute residual when a continuous part is present.
    pub residual_mean_abs: f64,
    /// Bound on the mean absolute relative error of the occupation formula.
    pub relative: f64,
    /// Bound on the paired relative gap between local time and its kernel estimate.
    pub kernel_relative: f64,
    pub z_threshold: f64,
    pub min_samples: usize,
    /// Residuals below this count as converged when checking the trend.
    pub trend_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exact: 1e-12,
            residual_mean_abs: 0.05,
            relative: 0.05,
            kernel_relative: 0.10,
            z_threshold: 3.0,
            min_samples: 30,
            trend_floor: 1e-10,
        }
    }
}

/// Zero-mean z-test of martingale samples.
pub fn martingale_mean_test(samples: &[f64], tol: &Tolerances) -> Result<ZTest> {
    z_test(samples, tol.z_threshold, tol.min_samples)
}

/// Identities the runner knows how to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Identity {
    Ito,
    Tanaka,
    Occupation,
    LocalTime,
    Multidim,
}

impl Identity {
    pub const ALL: [Identity; 5] =
        [Identity::Ito, Identity::Tanaka, Identity::Occupation, Identity::LocalTime, Identity::Multidim];

    pub fn name(&self) -> &'static str {
        match self {
            Identity::Ito => "ito",
            Identity::Tanaka => "tanaka",
            Identity::Occupation => "occupation",
            Identity::LocalTime => "localtime",
            Identity::Multidim => "multidim",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.name() == s)
    }
}

/// Everything an experiment needs besides the step size.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub spec: ProcessSpec,
    pub u: FunctionDescriptor,
    /// `F` of the one-dimensional Itô check; needs `F(0) = 0`.
    pub f: FunctionDescriptor,
    /// `F` of the planar Itô check.
    pub f2: Fn2,
    /// Integrand of the occupation formula.
    pub occupation_f: FunctionDescriptor,
    /// Level `a` of the Tanaka and local-time checks.
    pub level: f64,
    /// Kernel half-width `h` of the local-time oracle.
    pub bandwidth: f64,
    pub horizon: f64,
    /// Step sizes, coarsest first.
    pub dts: Vec<f64>,
    pub n_paths: usize,
    pub seed_base: u64,
    pub level_cells: usize,
    /// Extra evaluation points on top of the checkpoints.
    pub eval_points: Option<usize>,
    /// Checkpoints as fractions of the horizon.
    pub checkpoints: Vec<f64>,
    pub start: StartProtocol,
    pub tolerances: Tolerances,
    pub quad: QuadConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            spec: ProcessSpec::brownian(1.0),
            u: FunctionDescriptor::identity(),
            f: FunctionDescriptor::square(),
            f2: Fn2::Product,
            occupation_f: FunctionDescriptor::constant(1.0),
            level: 0.0,
            bandwidth: 0.05,
            horizon: 1.0,
            dts: alloc::vec![1e-2, 1e-3],
            n_paths: 100,
            seed_base: 0,
            level_cells: 256,
            eval_points: None,
            checkpoints: alloc::vec![0.25, 0.5, 1.0],
            start: StartProtocol::Fixed,
            tolerances: Tolerances::default(),
            quad: QuadConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::domain("horizon", "must be positive and finite"));
        }
        if self.dts.is_empty() || self.dts.iter().any(|&d| !(d > 0.0 && d <= self.horizon)) {
            return Err(Error::domain("dt", "step sizes must lie in (0, horizon]"));
        }
        if self.dts.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::domain("dt", "step sizes must be strictly decreasing"));
        }
        if self.n_paths < 2 {
            return Err(Error::TooFewSamples { got: self.n_paths, need: 2 });
        }
        if self.checkpoints.is_empty() || self.checkpoints.iter().any(|&c| !(c > 0.0 && c <= 1.0)) {
            return Err(Error::domain("checkpoints", "fractions must lie in (0, 1]"));
        }
        if self.level_cells < 2 {
            return Err(Error::domain("level_cells", "need at least 2 cells"));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::domain("bandwidth", "must be positive"));
        }
        Ok(())
    }

    /// No continuous part: the one-dimensional identities hold exactly.
    pub fn is_pure_jump(&self) -> bool {
        self.spec.dim() == 1 && self.spec.diffusion_coefficient(0) == 0.0
    }
}

/// Per-path quantities of one identity at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathSample {
    pub residual: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Aggregate over paths at one checkpoint.
///
/// `mean_residual` and `se_residual` describe the statistic the pass rule
/// reads: the mean of `|R|` for the Itô-type identities, the mean absolute
/// relative error for the occupation formula, and the paired relative gap
/// `mean(L - K) / mean(K)` for local time against its kernel estimate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CheckpointStats {
    pub identity: Identity,
    pub dt: f64,
    pub k: usize,
    pub t: f64,
    pub n_paths: usize,
    pub mean_residual: f64,
    pub se_residual: f64,
    pub max_abs_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityRun {
    pub identity: Identity,
    pub dt: f64,
    /// `samples[c][n]` is path `n` at checkpoint `c`.
    pub samples: Vec<Vec<PathSample>>,
    pub stats: Vec<CheckpointStats>,
}

impl IdentityRun {
    pub fn pass(&self) -> bool {
        self.stats.iter().all(|s| s.pass)
    }
}

fn checkpoint_indices(cfg: &ExperimentConfig, steps: usize) -> Result<Vec<usize>> {
    let g = EvalGrid::fractions(steps, &cfg.checkpoints)?;
    Ok(g.indices().iter().copied().filter(|&k| k > 0).collect())
}

fn eval_grid(cfg: &ExperimentConfig, steps: usize, checkpoints: &[usize]) -> Result<EvalGrid> {
    let mut idx: Vec<usize> = checkpoints.to_vec();
    if let Some(m) = cfg.eval_points {
        idx.extend_from_slice(EvalGrid::uniform(steps, m).indices());
    }
    idx.sort_unstable();
    idx.dedup();
    EvalGrid::new(idx)
}

/// Per-checkpoint samples of `identity` on one path.
pub fn path_samples(cfg: &ExperimentConfig, identity: Identity, path: &SamplePath) -> Result<Vec<PathSample>> {
    let cps = checkpoint_indices(cfg, path.steps())?;
    let grid = eval_grid(cfg, path.steps(), &cps)?;
    let pick = |k: usize| grid.position(k).expect("checkpoint on grid");
    let from_rows = |rows: Vec<ItoRow>| {
        cps.iter()
            .map(|&k| {
                let r = rows[pick(k)];
                PathSample { residual: r.residual(), lhs: r.lhs, rhs: r.m() + r.q() + r.v }
            })
            .collect()
    };
    Ok(match identity {
        Identity::Ito => from_rows(ito_assemble(path, &cfg.u, &cfg.f, &cfg.spec, &grid, &cfg.quad)?),
        Identity::Multidim => from_rows(multidim_ito_check(path, &cfg.f2, &cfg.spec, &grid)?),
        Identity::Tanaka => {
            let rows = tanaka_check(path, &cfg.u, cfg.level, &cfg.spec, &grid)?;
            cps.iter()
                .map(|&k| {
                    let r = rows[pick(k)];
                    PathSample { residual: r.residual(), lhs: r.gamma, rhs: r.rhs }
                })
                .collect()
        }
        Identity::Occupation => {
            let levels = LevelGrid::for_path(path, &cfg.u, cfg.level_cells)?;
            let sides = occupation_sides(path, &cfg.u, &cfg.occupation_f, &cfg.spec, &levels, &grid)?;
            cps.iter()
                .map(|&k| {
                    let (lhs, rhs) = sides[pick(k)];
                    let residual = if rhs != 0.0 { (lhs - rhs) / rhs } else { lhs - rhs };
                    PathSample { residual, lhs, rhs }
                })
                .collect()
        }
        Identity::LocalTime => {
            let lt = local_time(path, &cfg.u, cfg.level, &grid)?;
            cps.iter()
                .map(|&k| {
                    let l = lt.values()[pick(k)];
                    let kern = kernel_local_time_oracle(path, &cfg.u, &cfg.spec, cfg.level, cfg.bandwidth, k)?;
                    Ok(PathSample { residual: l - kern.value, lhs: l, rhs: kern.value })
                })
                .collect::<Result<_>>()?
        }
    })
}

/// Aggregates the samples of one checkpoint and applies the pass rule.
pub fn checkpoint_stats(
    cfg: &ExperimentConfig,
    identity: Identity,
    dt: f64,
    k: usize,
    samples: &[PathSample],
) -> CheckpointStats {
    let tol = &cfg.tolerances;
    let n = samples.len();
    let abs: Vec<f64> = samples.iter().map(|s| s.residual.abs()).collect();
    let max_abs = abs.iter().fold(0.0_f64, |m, v| m.max(*v));
    let exact = cfg.is_pure_jump() && identity != Identity::Multidim;
    let (mean, se, pass) = match identity {
        Identity::LocalTime => {
            let diff = Summary::of(&samples.iter().map(|s| s.residual).collect::<Vec<_>>());
            let kern = Summary::of(&samples.iter().map(|s| s.rhs).collect::<Vec<_>>());
            if kern.mean > 0.0 {
                let rel = diff.mean / kern.mean;
                (rel, diff.se / kern.mean, rel.abs() <= tol.kernel_relative)
            } else {
                (diff.mean, diff.se, max_abs <= tol.exact)
            }
        }
        _ => {
            let s = Summary::of(&abs);
            let bound = match identity {
                _ if exact => None,
                Identity::Occupation => Some(tol.relative),
                _ => Some(tol.residual_mean_abs),
            };
            let pass = match bound {
                None => max_abs <= tol.exact,
                Some(b) => s.mean <= b,
            };
            (s.mean, s.se, pass)
        }
    };
    CheckpointStats {
        identity,
        dt,
        k,
        t: k as f64 * dt,
        n_paths: n,
        mean_residual: mean,
        se_residual: se,
        max_abs_residual: max_abs,
        pass: pass && mean.is_finite(),
    }
}

/// Runs `identity` over `cfg.n_paths` paths at step size `dt`.
pub fn run_identity(cfg: &ExperimentConfig, identity: Identity, dt: f64) -> Result<IdentityRun> {
    cfg.validate()?;
    match identity {
        Identity::Multidim if cfg.spec.dim() != 2 => return Err(Error::Dimension { expected: 2, got: cfg.spec.dim() }),
        Identity::Multidim => {}
        _ if cfg.spec.dim() != 1 => return Err(Error::Dimension { expected: 1, got: cfg.spec.dim() }),
        _ => {}
    }
    let per_path = mc::try_map_seeds(cfg.seed_base, cfg.n_paths, |seed| {
        let path = mc::sample_path(&cfg.spec, cfg.horizon, dt, seed, cfg.start)?;
        path_samples(cfg, identity, &path)
    })?;
    let steps = (cfg.horizon / dt).round() as usize;
    let cps = checkpoint_indices(cfg, steps)?;
    let samples: Vec<Vec<PathSample>> =
        (0..cps.len()).map(|c| per_path.iter().map(|p| p[c]).collect()).collect();
    let stats = cps.iter().zip(&samples).map(|(&k, s)| checkpoint_stats(cfg, identity, dt, k, s)).collect();
    Ok(IdentityRun { identity, dt, samples, stats })
}

/// Terminal-checkpoint statistics for every step size of the config.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub identity: Identity,
    pub rows: Vec<CheckpointStats>,
    /// Every refinement kept the residual from increasing (or it was already
    /// below the trend floor).
    pub trend_ok: bool,
}

impl ConvergenceTable {
    pub fn render(&self) -> String {
        let mut s = alloc::format!("{:>12} {:>8} {:>14} {:>14} {:>14} {:>5}\n", "dt", "n_paths", "mean", "se", "max_abs", "pass");
        for r in &self.rows {
            s += &alloc::format!(
                "{:>12.3e} {:>8} {:>14.6e} {:>14.6e} {:>14.6e} {:>5}\n",
                r.dt, r.n_paths, r.mean_residual, r.se_residual, r.max_abs_residual, r.pass
            );
        }
        s += &alloc::format!("trend: {}\n", if self.trend_ok { "ok" } else { "residual increased under refinement" });
        s
    }
}

/// Whether `r_{j+1} <= r_j` (or `r_{j+1} <= floor`) for every consecutive pair.
pub fn residual_trend_ok(residuals: &[f64], floor: f64) -> bool {
    residuals.windows(2).all(|w| w[1] <= w[0] || w[1].abs() <= floor)
}

pub fn convergence_table(cfg: &ExperimentConfig, identity: Identity) -> Result<ConvergenceTable> {
    if cfg.dts.len() < 2 {
        return Err(Error::domain("dt", "a convergence table needs at least two step sizes"));
    }
    let mut rows = Vec::with_capacity(cfg.dts.len());
    for &dt in &cfg.dts {
        let run = run_identity(cfg, identity, dt)?;
        rows.push(run.stats.last().cloned().expect("at least one checkpoint"));
    }
    let r: Vec<f64> = rows.iter().map(|r| r.mean_residual.abs()).collect();
    let trend_ok = residual_trend_ok(&r, cfg.tolerances.trend_floor);
    Ok(ConvergenceTable { identity, rows, trend_ok })
}
