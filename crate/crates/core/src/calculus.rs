//! Discrete stochastic calculus on sample paths: evaluation grids, additive
//! functional trajectories, Itô sums, the Fukushima decomposition of `u(X)`,
//! quadratic variation and energy estimates.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::func::FunctionDescriptor;
use crate::jumps::{Compensator, JumpRegion};
use crate::mc::{self, StartProtocol};
use crate::process::{ProcessSpec, SamplePath};
use crate::quad::QuadConfig;
use crate::stats::{CompensatedSum, Summary};

/// Strictly increasing grid indices at which a functional is reported.
/// Always starts at 0.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalGrid {
    indices: Vec<usize>,
}

impl EvalGrid {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        if indices.first() != Some(&0) {
            indices.insert(0, 0);
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::GridMismatch("evaluation indices must be strictly increasing".into()));
        }
        Ok(EvalGrid { indices })
    }

    /// Every grid point `0..=n`.
    pub fn full(n: usize) -> Self {
        EvalGrid { indices: (0..=n).collect() }
    }

    /// About `points` roughly equispaced indices including `0` and `n`.
    pub fn uniform(n: usize, points: usize) -> Self {
        let m = points.clamp(2, n + 1) - 1;
        let mut idx: Vec<usize> = (0..=m).map(|j| (j * n + m / 2) / m).collect();
        idx[m] = n;
        idx.dedup();
        EvalGrid { indices: idx }
    }

    /// The default grid of about `sqrt(n)` points.
    pub fn sqrt(n: usize) -> Self {
        let p = (n as f64).sqrt().ceil() as usize + 1;
        Self::uniform(n, p)
    }

    /// `0` plus the given checkpoint indices.
    pub fn checkpoints(points: &[usize]) -> Result<Self> {
        Self::new(points.to_vec())
    }

    /// Checkpoints at the given fractions of `n` steps (rounded).
    pub fn fractions(n: usize, fractions: &[f64]) -> Result<Self> {
        let mut idx: Vec<usize> = fractions.iter().map(|f| (f * n as f64).round() as usize).collect();
        idx.sort_unstable();
        idx.dedup();
        if idx.iter().any(|&i| i > n) {
            return Err(Error::domain("checkpoints", "fractions must lie in [0, 1]"));
        }
        Self::new(idx)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
    pub fn len(&self) -> usize {
        self.indices.len()
    }
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
    pub fn last(&self) -> usize {
        *self.indices.last().expect("grid is never empty")
    }
    pub fn position(&self, k: usize) -> Option<usize> {
        self.indices.binary_search(&k).ok()
    }

    /// Fails unless every index fits a path of `steps` steps.
    pub fn check_fits(&self, steps: usize) -> Result<()> {
        if self.last() > steps {
            return Err(Error::IndexOutOfRange { index: self.last(), max: steps });
        }
        Ok(())
    }
}

/// An additive-functional trajectory sampled on an [`EvalGrid`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AfPath {
    grid: EvalGrid,
    values: Vec<f64>,
    dt: f64,
}

impl AfPath {
    pub fn new(grid: EvalGrid, values: Vec<f64>, dt: f64) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::GridMismatch(alloc::format!(
                "{} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        Ok(AfPath { grid, values, dt })
    }

    pub fn zero(grid: &EvalGrid, dt: f64) -> Self {
        AfPath { values: vec![0.0; grid.len()], grid: grid.clone(), dt }
    }

    /// Running compensated sums of per-step increments, sampled on `grid`.
    pub fn from_increments(incr: &[f64], grid: &EvalGrid, dt: f64) -> Result<Self> {
        grid.check_fits(incr.len())?;
        let mut values = Vec::with_capacity(grid.len());
        let mut acc = CompensatedSum::new();
        let mut i = 0;
        for &k in grid.indices() {
            while i < k {
                acc.add(incr[i]);
                i += 1;
            }
            values.push(acc.value());
        }
        Ok(AfPath { grid: grid.clone(), values, dt })
    }

    pub fn grid(&self) -> &EvalGrid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("grid is never empty")
    }

    /// Value at grid index `k`, which must be on the evaluation grid.
    pub fn at(&self, k: usize) -> Result<f64> {
        self.grid
            .position(k)
            .map(|p| self.values[p])
            .ok_or_else(|| Error::GridMismatch(alloc::format!("index {k} is not on the evaluation grid")))
    }

    /// Linear interpolation in time between evaluation points.
    pub fn interpolate(&self, t: f64) -> f64 {
        let idx = self.grid.indices();
        let x = t / self.dt;
        let j = idx.partition_point(|&k| (k as f64) <= x);
        if j == 0 {
            return self.values[0];
        }
        if j == idx.len() {
            return self.terminal();
        }
        let (k0, k1) = (idx[j - 1] as f64, idx[j] as f64);
        let w = (x - k0) / (k1 - k0);
        self.values[j - 1] * (1.0 - w) + self.values[j] * w
    }

    /// Per-interval increments between consecutive evaluation points.
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    fn same_grid(&self, other: &AfPath) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("additive functionals live on different grids".into()));
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &AfPath, b: f64) -> Result<AfPath> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(AfPath { grid: self.grid.clone(), values, dt: self.dt })
    }

    pub fn scale(&self, a: f64) -> AfPath {
        AfPath { grid: self.grid.clone(), values: self.values.iter().map(|v| a * v).collect(), dt: self.dt }
    }

    /// Restriction to a coarser grid whose indices are all present here.
    pub fn resample(&self, grid: &EvalGrid) -> Result<AfPath> {
        let values = grid.indices().iter().map(|&k| self.at(k)).collect::<Result<Vec<_>>>()?;
        Ok(AfPath { grid: grid.clone(), values, dt: self.dt })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// Forward Itô sum `Σ_{i<k} f_i (M_{i+1} - M_i)` over consecutive points of
/// the integrator's grid; `f_values[i]` is the integrand at the left end of
/// interval `i`.
pub fn ito_integral(f_values: &[f64], integrator: &AfPath) -> Result<AfPath> {
    let steps = integrator.values.len() - 1;
    if f_values.len() != steps {
        return Err(Error::GridMismatch(alloc::format!(
            "{} integrand samples for {steps} integrator steps",
            f_values.len()
        )));
    }
    let mut acc = CompensatedSum::new();
    let mut values = Vec::with_capacity(steps + 1);
    values.push(0.0);
    for (f, w) in f_values.iter().zip(integrator.values.windows(2)) {
        acc.add(f * (w[1] - w[0]));
        values.push(acc.value());
    }
    AfPath::new(integrator.grid.clone(), values, integrator.dt)
}

/// Checks that `spec` plausibly generated `path`.
pub(crate) fn check_spec(path: &SamplePath, spec: &ProcessSpec) -> Result<()> {
    if path.dim() != spec.dim() {
        return Err(Error::Dimension { expected: spec.dim(), got: path.dim() });
    }
    Ok(())
}

/// Per-step increments of `M^{u,c}`: `u'(X_i) * cont_i`.
pub fn m_uc_increments(path: &SamplePath, u: &FunctionDescriptor) -> Result<Vec<f64>> {
    if path.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: path.dim() });
    }
    (0..path.steps())
        .map(|i| {
            let c = path.cont(i)[0];
            if c == 0.0 {
                Ok(0.0)
            } else {
                Ok(u.derivative(path.value(i))? * c)
            }
        })
        .collect()
}

/// The three Fukushima parts of `u(X_t) - u(X_0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FukushimaParts {
    pub m_uc: AfPath,
    pub m_uj: AfPath,
    pub n_u: AfPath,
}

impl FukushimaParts {
    /// Largest deviation of `m_uc + m_uj + n_u` from `u(X) - u(X_0)`.
    pub fn bookkeeping_error(&self, path: &SamplePath, u: &FunctionDescriptor) -> f64 {
        let u0 = u.value(path.value(0));
        self.m_uc
            .grid()
            .indices()
            .iter()
            .enumerate()
            .map(|(p, &k)| {
                let lhs = u.value(path.value(k)) - u0;
                (lhs - (self.m_uc.values[p] + self.m_uj.values[p] + self.n_u.values[p])).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Splits `u(X) - u(X_0)` into the continuous martingale part, the
/// compensated jump martingale part and the remainder.
///
/// The jump compensator is `Σ_i dt · g(X_i)` with
/// `g(x) = ∫ (u(x+y) - u(x)) ν(dy)` over all jump sizes.
pub fn fukushima_decompose(
    path: &SamplePath,
    u: &FunctionDescriptor,
    spec: &ProcessSpec,
    grid: &EvalGrid,
    cfg: &QuadConfig,
) -> Result<FukushimaParts> {
    check_spec(path, spec)?;
    grid.check_fits(path.steps())?;
    if !u.is_differentiable() {
        return Err(Error::NotDifferentiable(u.name()));
    }
    let dt = path.dt();
    let m_uc = AfPath::from_increments(&m_uc_increments(path, u)?, grid, dt)?;

    let identity = FunctionDescriptor::identity();
    let comp = Compensator::new(spec, u, &identity, JumpRegion::all(), cfg)?;
    let comp_incr = comp.step_increments(path)?;
    let mut jump_incr = vec![0.0; path.steps()];
    for j in path.jumps() {
        jump_incr[j.index - 1] = u.value(path.value(j.index)) - u.value(j.left[0]);
    }
    let m_uj_incr: Vec<f64> = jump_incr.iter().zip(&comp_incr).map(|(j, c)| j - c).collect();
    let m_uj = AfPath::from_increments(&m_uj_incr, grid, dt)?;

    let u0 = u.value(path.value(0));
    let n_vals = grid
        .indices()
        .iter()
        .enumerate()
        .map(|(p, &k)| (u.value(path.value(k)) - u0) - m_uc.values[p] - m_uj.values[p])
        .collect();
    let n_u = AfPath::new(grid.clone(), n_vals, dt)?;
    Ok(FukushimaParts { m_uc, m_uj, n_u })
}

/// Quadratic variation of `M^{u,c}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum QvMode {
    /// `Σ (ΔM)²`
    Realized,
    /// `Σ u'(X_i)² σ² dt`
    Predictable,
}

pub fn quadratic_variation(
    path: &SamplePath,
    u: &FunctionDescriptor,
    spec: &ProcessSpec,
    mode: QvMode,
    grid: &EvalGrid,
) -> Result<AfPath> {
    check_spec(path, spec)?;
    let incr: Vec<f64> = match mode {
        QvMode::Realized => m_uc_increments(path, u)?.into_iter().map(|d| d * d).collect(),
        QvMode::Predictable => {
            if !u.is_differentiable() {
                return Err(Error::NotDifferentiable(u.name()));
            }
            let s = spec.diffusion_coefficient(0) * path.dt();
            (0..path.steps())
                .map(|i| {
                    let d = u.derivative(path.value(i))?;
                    Ok(d * d * s)
                })
                .collect::<Result<_>>()?
        }
    };
    AfPath::from_increments(&incr, grid, path.dt())
}

/// Realized quadratic variation of an arbitrary trajectory along its grid.
pub fn realized_qv(m: &AfPath) -> AfPath {
    let mut acc = CompensatedSum::new();
    let mut values = Vec::with_capacity(m.values.len());
    values.push(0.0);
    for w in m.values.windows(2) {
        acc.add((w[1] - w[0]) * (w[1] - w[0]));
        values.push(acc.value());
    }
    AfPath { grid: m.grid.clone(), values, dt: m.dt }
}

/// Energy estimate `(1/2t) E[M_t²]` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnergyEstimate {
    pub value: f64,
    pub se: f64,
    pub n_paths: usize,
}

/// Estimates the energy of the additive functional produced by `builder`
/// from `n_paths` paths with seeds `seed_base..`.
#[allow(clippy::too_many_arguments)]
pub fn energy_estimate<B>(
    builder: B,
    spec: &ProcessSpec,
    t: f64,
    n_paths: usize,
    dt: f64,
    seed_base: u64,
    protocol: StartProtocol,
) -> Result<EnergyEstimate>
where
    B: Fn(&SamplePath) -> Result<f64> + Sync + Send,
{
    if n_paths < 2 {
        return Err(Error::TooFewSamples { got: n_paths, need: 2 });
    }
    if !(t > 0.0) {
        return Err(Error::domain("t", "must be positive"));
    }
    let samples = mc::try_map_seeds(seed_base, n_paths, |seed| {
        let path = mc::sample_path(spec, t, dt, seed, protocol)?;
        let m = builder(&path)?;
        Ok(m * m / (2.0 * t))
    })?;
    let s = Summary::of(&samples);
    Ok(EnergyEstimate { value: s.mean, se: s.se, n_paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::simulate_path;

    #[test]
    fn eval_grid_shapes() {
        assert_eq!(EvalGrid::full(3).indices(), &[0, 1, 2, 3]);
        let g = EvalGrid::sqrt(10_000);
        assert_eq!(g.indices()[0], 0);
        assert_eq!(g.last(), 10_000);
        assert!(g.len() >= 100 && g.len() <= 103);
        assert!(EvalGrid::new(vec![0, 3, 3]).is_err());
        assert_eq!(EvalGrid::fractions(100, &[0.25, 0.5, 1.0]).unwrap().indices(), &[0, 25, 50, 100]);
    }

    #[test]
    fn ito_unit_and_zero_integrand() {
        let p = simulate_path(&ProcessSpec::brownian(1.0), 1.0, 0.01, 1).unwrap();
        let g = EvalGrid::full(p.steps());
        let m = AfPath::from_increments(&m_uc_increments(&p, &FunctionDescriptor::identity()).unwrap(), &g, p.dt())
            .unwrap();
        let one = ito_integral(&vec![1.0; p.steps()], &m).unwrap();
        for (a, b) in one.values().iter().zip(m.values()) {
            assert!((a - b).abs() <= 1e-15);
        }
        assert_eq!(ito_integral(&vec![0.0; p.steps()], &m).unwrap().sup_norm(), 0.0);
        assert!(ito_integral(&[1.0], &m).is_err());
    }

    #[test]
    fn identity_on_brownian_is_all_martingale() {
        let spec = ProcessSpec::brownian(1.0);
        let p = simulate_path(&spec, 1.0, 1e-3, 4).unwrap();
        let g = EvalGrid::sqrt(p.steps());
        let parts = fukushima_decompose(&p, &FunctionDescriptor::identity(), &spec, &g, &QuadConfig::default()).unwrap();
        assert_eq!(parts.m_uj.sup_norm(), 0.0);
        assert!(parts.n_u.sup_norm() < 1e-13);
        let c = fukushima_decompose(&p, &FunctionDescriptor::constant(2.0), &spec, &g, &QuadConfig::default()).unwrap();
        assert_eq!(c.m_uc.sup_norm() + c.m_uj.sup_norm() + c.n_u.sup_norm(), 0.0);
    }

    #[test]
    fn predictable_qv_of_brownian_is_time() {
        let spec = ProcessSpec::brownian(1.0);
        let p = simulate_path(&spec, 1.0, 1e-2, 4).unwrap();
        let g = EvalGrid::full(p.steps());
        let qv = quadratic_variation(&p, &FunctionDescriptor::identity(), &spec, QvMode::Predictable, &g).unwrap();
        assert!((qv.terminal() - 1.0).abs() < 1e-14);
        let r = quadratic_variation(&p, &FunctionDescriptor::identity(), &spec, QvMode::Realized, &g).unwrap();
        assert!(r.values().windows(2).all(|w| w[1] >= w[0]));
        assert!(quadratic_variation(&p, &FunctionDescriptor::sign(), &spec, QvMode::Predictable, &g).is_err());
    }

    #[test]
    fn af_path_interpolation() {
        let g = EvalGrid::new(vec![0, 2, 4]).unwrap();
        let a = AfPath::new(g, vec![0.0, 1.0, 3.0], 0.5).unwrap();
        assert_eq!(a.interpolate(0.5), 0.5);
        assert_eq!(a.interpolate(1.5), 2.0);
        assert_eq!(a.interpolate(10.0), 3.0);
        assert!(a.at(1).is_err());
    }
}
