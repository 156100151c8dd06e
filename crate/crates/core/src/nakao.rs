//! Nakao's operator on continuous martingale additive functionals, computed
//! through time reversal: `Γ_t(M) = -½ (M_t + M_t ∘ r_t)` with
//! `r_t(ω)(s) = ω((t - s)-)`.
//!
//! Every martingale in the catalog is an Itô sum `Σ_{i<k} w(X_i) · c_i` of a
//! state-dependent weight against the continuous increments. Re-evaluating it
//! on the reversed path gives `-Σ_{i<k} w(X_{(i+1)-}) · c_i`, so `Γ` can be
//! computed either by literally reversing (`gamma`, cost `Θ(n·m)` for `m`
//! evaluation points) or by the equivalent one-pass sweep (`gamma_sweep`).

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::calculus::{check_spec, AfPath, EvalGrid, QvMode};
use crate::error::{Error, Result};
use crate::func::{Fn2, FunctionDescriptor};
use crate::jumps::{Compensator, JumpRegion};
use crate::levels::{LevelField, LevelGrid};
use crate::process::{JumpRecord, ProcessSpec, SamplePath, MAX_DIM};
use crate::quad::QuadConfig;
use crate::stats::CompensatedSum;

/// Recipe for a martingale additive functional, evaluated on any path.
#[derive(Debug, Clone, PartialEq)]
pub enum MafBuilder {
    Zero,
    /// `M^{u,c}`
    ContinuousPart { u: FunctionDescriptor },
    /// `Z^a = ∫ 1{u(X_{s-}) <= a} dM^{u,c}`
    Level { u: FunctionDescriptor, level: f64 },
    /// `(f∘u) * M^{u,c}`
    Integrand { f: FunctionDescriptor, u: FunctionDescriptor },
    /// `(f∘u) * inner`
    Weighted { f: FunctionDescriptor, u: FunctionDescriptor, inner: Box<MafBuilder> },
    /// Continuous martingale part of one coordinate of a 2D path.
    Coordinate { component: usize },
    /// `∫ 1{X_{s-} <= level} dM^{component,c}`, componentwise order.
    CoordinateLevel { component: usize, level: [f64; 2] },
    /// `f(X) * M^{component,c}`
    CoordinateWeighted { f: Fn2, component: usize },
    Combination(Vec<(f64, MafBuilder)>),
    /// `M^u = M^{u,c} + M^{u,j}`; has jumps, so only the compensator route
    /// applies to it.
    FullMartingale { u: FunctionDescriptor },
}

impl MafBuilder {
    pub fn name(&self) -> String {
        match self {
            MafBuilder::Zero => "zero".into(),
            MafBuilder::ContinuousPart { u } => format!("M^{{{},c}}", u.name()),
            MafBuilder::Level { u, level } => format!("Z^{level}({})", u.name()),
            MafBuilder::Integrand { f, u } => format!("({}∘{})*M^c", f.name(), u.name()),
            MafBuilder::Weighted { f, u, inner } => format!("({}∘{})*{}", f.name(), u.name(), inner.name()),
            MafBuilder::Coordinate { component } => format!("M^{{{component},c}}"),
            MafBuilder::CoordinateLevel { component, level } => {
                format!("Z^({},{})(x{component})", level[0], level[1])
            }
            MafBuilder::CoordinateWeighted { component, .. } => format!("f*M^{{{component},c}}"),
            MafBuilder::Combination(terms) => format!("combination of {}", terms.len()),
            MafBuilder::FullMartingale { u } => format!("M^{{{}}}", u.name()),
        }
    }

    /// `true` when the builder only uses continuous increments.
    pub fn is_continuous(&self) -> bool {
        match self {
            MafBuilder::FullMartingale { .. } => false,
            MafBuilder::Weighted { inner, .. } => inner.is_continuous(),
            MafBuilder::Combination(terms) => terms.iter().all(|(_, b)| b.is_continuous()),
            _ => true,
        }
    }

    fn required_dim(&self) -> Option<usize> {
        match self {
            MafBuilder::Zero | MafBuilder::FullMartingale { .. } => None,
            MafBuilder::ContinuousPart { .. } | MafBuilder::Level { .. } | MafBuilder::Integrand { .. } => Some(1),
            MafBuilder::Weighted { inner, .. } => inner.required_dim().or(Some(1)),
            MafBuilder::Coordinate { .. }
            | MafBuilder::CoordinateLevel { .. }
            | MafBuilder::CoordinateWeighted { .. } => Some(2),
            MafBuilder::Combination(terms) => terms.iter().find_map(|(_, b)| b.required_dim()),
        }
    }

    fn check(&self, path: &SamplePath) -> Result<()> {
        if !self.is_continuous() {
            return Err(Error::DiscontinuousBuilder(self.name()));
        }
        if let Some(d) = self.required_dim() {
            if d != path.dim() {
                return Err(Error::Dimension { expected: d, got: path.dim() });
            }
        }
        if let MafBuilder::Combination(terms) = self {
            for (_, b) in terms {
                b.check(path)?;
            }
        }
        if let MafBuilder::Coordinate { component }
        | MafBuilder::CoordinateLevel { component, .. }
        | MafBuilder::CoordinateWeighted { component, .. } = self
        {
            if *component >= path.dim() {
                return Err(Error::IndexOutOfRange { index: *component, max: path.dim() - 1 });
            }
        }
        Ok(())
    }

    /// The weight vector `w(x)` such that the increment over a step starting
    /// at state `x` with continuous increment `c` is `w(x) · c`.
    pub fn weight(&self, x: &[f64]) -> Result<[f64; MAX_DIM]> {
        let finite = |v: f64| if v.is_finite() { Ok(v) } else { Err(Error::Unbounded) };
        Ok(match self {
            MafBuilder::Zero => [0.0; MAX_DIM],
            MafBuilder::ContinuousPart { u } => [u.derivative(x[0])?, 0.0],
            MafBuilder::Level { u, level } => {
                if u.value(x[0]) <= *level {
                    [u.derivative(x[0])?, 0.0]
                } else {
                    [0.0; MAX_DIM]
                }
            }
            MafBuilder::Integrand { f, u } => {
                let fv = finite(f.value(u.value(x[0])))?;
                [fv * u.derivative(x[0])?, 0.0]
            }
            MafBuilder::Weighted { f, u, inner } => {
                let fv = finite(f.value(u.value(x[0])))?;
                let w = inner.weight(x)?;
                [fv * w[0], fv * w[1]]
            }
            MafBuilder::Coordinate { component } => unit(*component),
            MafBuilder::CoordinateLevel { component, level } => {
                if x[0] <= level[0] && x[1] <= level[1] {
                    unit(*component)
                } else {
                    [0.0; MAX_DIM]
                }
            }
            MafBuilder::CoordinateWeighted { f, component } => {
                let mut w = [0.0; MAX_DIM];
                w[*component] = finite(f.value(x))?;
                w
            }
            MafBuilder::Combination(terms) => {
                let mut w = [0.0; MAX_DIM];
                for (a, b) in terms {
                    let v = b.weight(x)?;
                    w[0] += a * v[0];
                    w[1] += a * v[1];
                }
                w
            }
            MafBuilder::FullMartingale { .. } => return Err(Error::DiscontinuousBuilder(self.name())),
        })
    }

    /// Per-step increments `w(X_i) · c_i` on `path`.
    pub fn increments(&self, path: &SamplePath) -> Result<Vec<f64>> {
        self.check(path)?;
        let d = path.dim();
        (0..path.steps())
            .map(|i| {
                let c = path.cont(i);
                if c.iter().all(|&v| v == 0.0) {
                    return Ok(0.0);
                }
                let w = self.weight(path.state(i))?;
                Ok((0..d).map(|j| w[j] * c[j]).sum())
            })
            .collect()
    }

    /// The functional on `path`, sampled on `grid`.
    pub fn evaluate(&self, path: &SamplePath, grid: &EvalGrid) -> Result<AfPath> {
        AfPath::from_increments(&self.increments(path)?, grid, path.dt())
    }

    /// The functional at grid index `k`.
    pub fn value_at(&self, path: &SamplePath, k: usize) -> Result<f64> {
        let incr = self.increments(path)?;
        if k > incr.len() {
            return Err(Error::IndexOutOfRange { index: k, max: incr.len() });
        }
        let mut acc = CompensatedSum::new();
        incr[..k].iter().for_each(|&v| acc.add(v));
        Ok(acc.value())
    }
}

fn unit(c: usize) -> [f64; MAX_DIM] {
    let mut w = [0.0; MAX_DIM];
    w[c] = 1.0;
    w
}

/// The time-reversed path on `[0, t_k]`.
///
/// Grid value `j` is the left limit of the original at `t_k - t_j` (with
/// `X_{0-} = X_0`), continuous increments are negated and reversed, and a
/// jump at original grid point `m < k` becomes a jump of opposite size at
/// reversed grid point `k - m`. A jump exactly at `t_k` is absorbed into the
/// reversed starting value.
pub fn reverse_path(path: &SamplePath, k: usize) -> Result<SamplePath> {
    let n = path.steps();
    if k > n {
        return Err(Error::IndexOutOfRange { index: k, max: n });
    }
    let d = path.dim();
    let left = path.left_limits();
    let mut values = Vec::with_capacity((k + 1) * d);
    for j in 0..=k {
        values.extend_from_slice(&left[(k - j) * d..(k - j + 1) * d]);
    }
    let mut cont = Vec::with_capacity(k * d);
    for j in 0..k {
        cont.extend(path.cont(k - 1 - j).iter().map(|c| -c));
    }
    let jumps: Vec<JumpRecord> = path
        .jumps()
        .iter()
        .rev()
        .filter(|r| r.index < k)
        .map(|r| {
            let mut left = [0.0; MAX_DIM];
            let mut size = [0.0; MAX_DIM];
            for c in 0..d {
                left[c] = path.state(r.index)[c];
                size[c] = -r.size[c];
            }
            JumpRecord { index: k - r.index, left, size }
        })
        .collect();
    SamplePath::from_parts(d, path.dt(), values, cont, jumps, path.seed())
}

/// `Γ(M)` on `grid` by reversing the path at every evaluation point.
pub fn gamma(builder: &MafBuilder, path: &SamplePath, grid: &EvalGrid) -> Result<AfPath> {
    builder.check(path)?;
    grid.check_fits(path.steps())?;
    let forward = builder.increments(path)?;
    let mut acc = CompensatedSum::new();
    let mut i = 0;
    let mut values = Vec::with_capacity(grid.len());
    for &k in grid.indices() {
        while i < k {
            acc.add(forward[i]);
            i += 1;
        }
        if k == 0 {
            values.push(0.0);
            continue;
        }
        let reversed = reverse_path(path, k)?;
        let mut back = CompensatedSum::new();
        for v in builder.increments(&reversed)? {
            back.add(v);
        }
        values.push(-0.5 * (acc.value() + back.value()));
    }
    AfPath::new(grid.clone(), values, path.dt())
}

/// Per-step increments of `Γ(M)`: `-½ (w(X_i) - w(X_{(i+1)-})) · c_i`.
pub fn gamma_increments(builder: &MafBuilder, path: &SamplePath) -> Result<Vec<f64>> {
    builder.check(path)?;
    let d = path.dim();
    let left = path.left_limits();
    (0..path.steps())
        .map(|i| {
            let c = path.cont(i);
            if c.iter().all(|&v| v == 0.0) {
                return Ok(0.0);
            }
            let w0 = builder.weight(path.state(i))?;
            let w1 = builder.weight(&left[(i + 1) * d..(i + 2) * d])?;
            Ok(-0.5 * (0..d).map(|j| (w0[j] - w1[j]) * c[j]).sum::<f64>())
        })
        .collect()
}

/// `Γ(M)` on `grid` in a single pass over the path.
pub fn gamma_sweep(builder: &MafBuilder, path: &SamplePath, grid: &EvalGrid) -> Result<AfPath> {
    AfPath::from_increments(&gamma_increments(builder, path)?, grid, path.dt())
}

/// `Z^a = ∫ 1{u(X_{s-}) <= a} dM^{u,c}`.
pub fn z_a(path: &SamplePath, u: &FunctionDescriptor, a: f64, grid: &EvalGrid) -> Result<AfPath> {
    MafBuilder::Level { u: u.clone(), level: a }.evaluate(path, grid)
}

/// `Γ^a = Γ(Z^a)`.
pub fn gamma_a(path: &SamplePath, u: &FunctionDescriptor, a: f64, grid: &EvalGrid) -> Result<AfPath> {
    gamma(&MafBuilder::Level { u: u.clone(), level: a }, path, grid)
}

/// `f * Γ(M) = Γ((f∘u) * M) - ½ <M^{f∘u,c}, M>` for a one-dimensional
/// continuous builder `M`.
pub fn gamma_integral(
    f: &FunctionDescriptor,
    u: &FunctionDescriptor,
    builder: &MafBuilder,
    path: &SamplePath,
    spec: &ProcessSpec,
    grid: &EvalGrid,
    mode: QvMode,
) -> Result<AfPath> {
    check_spec(path, spec)?;
    if path.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: path.dim() });
    }
    let weighted = MafBuilder::Weighted { f: f.clone(), u: u.clone(), inner: Box::new(builder.clone()) };
    let g = gamma(&weighted, path, grid)?;
    let s2dt = spec.sigma2 * path.dt();
    let bracket: Vec<f64> = (0..path.steps())
        .map(|i| {
            let c = path.cont(i)[0];
            if c == 0.0 {
                return Ok(0.0);
            }
            let x = path.value(i);
            let fu = f.derivative(u.value(x))?;
            if fu == 0.0 {
                return Ok(0.0);
            }
            let h = builder.weight(path.state(i))?[0];
            let du = u.derivative(x)?;
            Ok(match mode {
                QvMode::Predictable => fu * du * h * s2dt,
                QvMode::Realized => fu * du * h * c * c,
            })
        })
        .collect::<Result<_>>()?;
    let b = AfPath::from_increments(&bracket, grid, path.dt())?;
    g.combine(1.0, &b, -0.5)
}

/// `Γ(M^u) = Γ(M^{u,c}) + A(u)`, the continuous part through reversal and
/// the jump part through its compensator. Equals `N^u`.
pub fn gamma_martingale_part(
    path: &SamplePath,
    u: &FunctionDescriptor,
    spec: &ProcessSpec,
    grid: &EvalGrid,
    cfg: &QuadConfig,
) -> Result<AfPath> {
    check_spec(path, spec)?;
    let c = gamma(&MafBuilder::ContinuousPart { u: u.clone() }, path, grid)?;
    let comp = Compensator::new(spec, u, &FunctionDescriptor::identity(), JumpRegion::all(), cfg)?;
    let a = AfPath::from_increments(&comp.step_increments(path)?, grid, path.dt())?;
    c.combine(1.0, &a, 1.0)
}

/// Adds the per-step contributions `(threshold, value)` produced by `terms`
/// into level buckets and returns the field `Σ_{i<k} value · 1{threshold <= z}`
/// for every level `z` and every evaluation index `k`.
pub(crate) fn level_kernel<T>(
    steps: usize,
    dt: f64,
    levels: &LevelGrid,
    grid: &EvalGrid,
    mut terms: T,
) -> Result<LevelField>
where
    T: FnMut(usize, &mut dyn FnMut(f64, f64)) -> Result<()>,
{
    grid.check_fits(steps)?;
    let z = levels.levels();
    let nl = z.len();
    let mut buckets = vec![CompensatedSum::new(); nl + 1];
    let mut field = vec![0.0; nl * grid.len()];
    let m = grid.len();
    let mut i = 0;
    for (p, &k) in grid.indices().iter().enumerate() {
        while i < k {
            terms(i, &mut |thr: f64, val: f64| {
                if val != 0.0 {
                    buckets[z.partition_point(|&l| l < thr)].add(val);
                }
            })?;
            i += 1;
        }
        let mut run = CompensatedSum::new();
        for j in 0..nl {
            run.add(buckets[j].value());
            field[j * m + p] = run.value();
        }
    }
    LevelField::new(levels.clone(), grid.clone(), field, dt)
}

/// `Γ^z` for every level of `levels` at every point of `grid`, sharing one
/// pass over the path.
pub fn gamma_levels(
    path: &SamplePath,
    u: &FunctionDescriptor,
    levels: &LevelGrid,
    grid: &EvalGrid,
) -> Result<LevelField> {
    if path.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: path.dim() });
    }
    let left = path.left_limits();
    level_kernel(path.steps(), path.dt(), levels, grid, |i, emit| {
        let c = path.cont(i)[0];
        if c == 0.0 {
            return Ok(());
        }
        let x0 = path.value(i);
        let x1 = left[i + 1];
        emit(u.value(x0), -0.5 * u.derivative(x0)? * c);
        emit(u.value(x1), 0.5 * u.derivative(x1)? * c);
        Ok(())
    })
}
