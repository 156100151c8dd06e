//! Compensated jump sums: the truncation sequence `ε_n`, the martingale
//! `M^d(F,u)`, its compensator `A(F,u)` and the big-jump term `V(F,u)`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::calculus::{check_spec, AfPath, EvalGrid};
use crate::error::{Error, Result};
use crate::func::FunctionDescriptor;
use crate::process::{s_epsilon, LevyMeasure, ProcessSpec, SamplePath, StateWindow};
use crate::quad::QuadConfig;

/// Set of jump sizes `lo < |Δu| < hi` of `u(X)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRegion {
    pub lo: f64,
    pub hi: f64,
}

impl JumpRegion {
    /// Every nonzero jump.
    pub fn all() -> Self {
        JumpRegion { lo: 0.0, hi: f64::INFINITY }
    }

    /// Mid-size jumps `eps < |Δu| < 1`; `eps = 0` keeps every small jump.
    pub fn mid(eps: f64) -> Self {
        JumpRegion { lo: eps, hi: 1.0 }
    }

    pub fn contains(&self, du: f64) -> bool {
        let a = du.abs();
        a > self.lo && a < self.hi
    }
}

/// Above this many distinct states the compensator density is tabulated.
const EXACT_STATE_LIMIT: usize = 4096;
const TABLE_MAX_NODES: usize = 2049;
const TABLE_SPACING: f64 = 1e-3;

/// `g(x) = ∫ (F(u(x+y)) - F(u(x))) 1{region}(u(x+y) - u(x)) ν(dy)`, the
/// compensator density of the jump sum of `F(u(X))` over `region`, with the
/// state frozen at the left end of each step.
#[derive(Debug, Clone)]
pub struct Compensator {
    measure: Option<LevyMeasure>,
    u: FunctionDescriptor,
    f: FunctionDescriptor,
    region: JumpRegion,
    cfg: QuadConfig,
}

impl Compensator {
    pub fn new(
        spec: &ProcessSpec,
        u: &FunctionDescriptor,
        f: &FunctionDescriptor,
        region: JumpRegion,
        cfg: &QuadConfig,
    ) -> Result<Self> {
        if !(region.lo >= 0.0 && region.lo < region.hi) {
            return Err(Error::domain("region", "need 0 <= lo < hi"));
        }
        // Affine F of affine u: the integrand is odd in y and the region is
        // symmetric, so the compensator vanishes.
        let odd = u.is_affine() && f.is_affine();
        let trivial = matches!(f.form, crate::func::FnForm::Constant(_))
            || matches!(u.form, crate::func::FnForm::Constant(_));
        let measure = if odd || trivial { None } else { spec.levy_measure() };
        Ok(Compensator { measure, u: u.clone(), f: f.clone(), region, cfg: *cfg })
    }

    pub fn is_zero(&self) -> bool {
        self.measure.is_none()
    }

    /// `g(x)`.
    pub fn density(&self, x: f64) -> Result<f64> {
        let Some(m) = self.measure else {
            return Ok(0.0);
        };
        let (u, f, r) = (&self.u, &self.f, self.region);
        let ux = u.value(x);
        let fx = f.value(ux);
        if u.is_identity() {
            return m.integrate(|y| f.value(x + y) - fx, r.lo, r.hi, &self.cfg);
        }
        let diff = |y: f64| {
            let v = u.value(x + y);
            if r.contains(v - ux) {
                f.value(v) - fx
            } else {
                0.0
            }
        };
        if u.inverse(ux).is_some() {
            // Increasing u: the region is one y-interval on each side.
            let inv = |v: f64| u.inverse(v).unwrap_or(f64::NAN);
            let up = (inv(ux + r.lo) - x, inv(ux + r.hi) - x);
            let down = (x - inv(ux - r.lo), x - inv(ux - r.hi));
            let mut total = 0.0;
            if up.1 > up.0.max(0.0) {
                total += m.integrate_positive(|y| f.value(u.value(x + y)) - fx, up.0.max(0.0), up.1, &self.cfg)?;
            }
            if down.1 > down.0.max(0.0) {
                total += m.integrate_positive(|y| f.value(u.value(x - y)) - fx, down.0.max(0.0), down.1, &self.cfg)?;
            }
            return Ok(total);
        }
        m.integrate(diff, 0.0, f64::INFINITY, &self.cfg)
    }

    /// `dt · g(X_i)` for every step of `path`.
    pub fn step_increments(&self, path: &SamplePath) -> Result<Vec<f64>> {
        let n = path.steps();
        if self.is_zero() {
            return Ok(vec![0.0; n]);
        }
        if path.dim() != 1 {
            return Err(Error::Dimension { expected: 1, got: path.dim() });
        }
        let dt = path.dt();
        let runs = 1 + (1..n).filter(|&i| path.value(i) != path.value(i - 1)).count();
        let mut out = Vec::with_capacity(n);
        if runs <= EXACT_STATE_LIMIT {
            let mut last = (f64::NAN, 0.0);
            for i in 0..n {
                let x = path.value(i);
                if x != last.0 {
                    last = (x, self.density(x)?);
                }
                out.push(dt * last.1);
            }
        } else {
            let table = self.table(path)?;
            for i in 0..n {
                out.push(dt * table.eval(path.value(i)));
            }
        }
        Ok(out)
    }

    fn table(&self, path: &SamplePath) -> Result<Table> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..path.steps() {
            lo = lo.min(path.value(i));
            hi = hi.max(path.value(i));
        }
        let nodes = (((hi - lo) / TABLE_SPACING).ceil() as usize + 1).clamp(4, TABLE_MAX_NODES);
        let h = (hi - lo) / (nodes - 1) as f64;
        let values = (0..nodes).map(|j| self.density(lo + h * j as f64)).collect::<Result<Vec<_>>>()?;
        Ok(Table { lo, h, values })
    }
}

/// Uniform-node cubic (Catmull–Rom) interpolant.
struct Table {
    lo: f64,
    h: f64,
    values: Vec<f64>,
}

impl Table {
    fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let s = ((x - self.lo) / self.h).clamp(0.0, (n - 1) as f64);
        let j = (s.floor() as usize).min(n - 2);
        let t = s - j as f64;
        let v = &self.values;
        let slope = |k: usize| {
            if k == 0 {
                v[1] - v[0]
            } else if k == n - 1 {
                v[n - 1] - v[n - 2]
            } else {
                0.5 * (v[k + 1] - v[k - 1])
            }
        };
        let (p0, p1, m0, m1) = (v[j], v[j + 1], slope(j), slope(j + 1));
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
    }
}

/// Raw jump sum, compensator and their difference on an evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTerms {
    pub raw: AfPath,
    pub compensator: AfPath,
    pub m_d: AfPath,
}

fn jump_sum_increments<P: Fn(f64) -> bool>(
    path: &SamplePath,
    u: &FunctionDescriptor,
    f: &FunctionDescriptor,
    keep: P,
) -> Vec<f64> {
    let mut out = vec![0.0; path.steps()];
    for j in path.jumps() {
        let before = u.value(j.left[0]);
        let after = u.value(path.value(j.index));
        if keep(after - before) {
            out[j.index - 1] = f.value(after) - f.value(before);
        }
    }
    out
}

/// `Σ ΔF(u(X)) 1{eps < |Δu| < 1}` minus its compensator.
///
/// `eps = 0` gives the limit over the truncation sequence, which every
/// finite-activity model reaches exactly.
#[allow(clippy::too_many_arguments)]
pub fn compensated_jump_sum(
    path: &SamplePath,
    u: &FunctionDescriptor,
    f: &FunctionDescriptor,
    spec: &ProcessSpec,
    eps: f64,
    grid: &EvalGrid,
    cfg: &QuadConfig,
) -> Result<JumpTerms> {
    check_spec(path, spec)?;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::domain("eps", "must lie in [0, 1)"));
    }
    let region = JumpRegion::mid(eps);
    let raw_incr = jump_sum_increments(path, u, f, |d| region.contains(d));
    let comp_incr = Compensator::new(spec, u, f, region, cfg)?.step_increments(path)?;
    let md_incr: Vec<f64> = raw_incr.iter().zip(&comp_incr).map(|(a, b)| a - b).collect();
    let dt = path.dt();
    Ok(JumpTerms {
        raw: AfPath::from_increments(&raw_incr, grid, dt)?,
        compensator: AfPath::from_increments(&comp_incr, grid, dt)?,
        m_d: AfPath::from_increments(&md_incr, grid, dt)?,
    })
}

/// `V(F,u) = Σ ΔF(u(X)) 1{|Δu| >= 1}`; the killing term is absent since
/// every model has infinite lifetime.
pub fn big_jump_term(path: &SamplePath, u: &FunctionDescriptor, f: &FunctionDescriptor, grid: &EvalGrid) -> Result<AfPath> {
    AfPath::from_increments(&jump_sum_increments(path, u, f, |d| d.abs() >= 1.0), grid, path.dt())
}

/// `Σ ΔF(u(X))` over every jump of the ledger.
pub fn total_jump_sum(path: &SamplePath, u: &FunctionDescriptor, f: &FunctionDescriptor, grid: &EvalGrid) -> Result<AfPath> {
    AfPath::from_increments(&jump_sum_increments(path, u, f, |_| true), grid, path.dt())
}

/// Decreasing cutoffs `ε_1 > ε_2 > …` with `S_{ε_n} < 2^{-4n}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TruncationSequence {
    pub eps: Vec<f64>,
    pub s_values: Vec<f64>,
    /// Smallest nonzero `|Δu|` the model can produce (0 if none).
    pub floor: f64,
    /// The sequence stopped because it reached `floor`, below which no jump
    /// exists.
    pub floor_reached: bool,
}

impl TruncationSequence {
    pub fn len(&self) -> usize {
        self.eps.len()
    }
    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }
}

/// Relative safety margin kept below each bound `2^{-4n}`.
const BOUND_MARGIN: f64 = 1e-6;

/// Builds up to `count` cutoffs by bisection on `ε ↦ S_ε`.
pub fn truncation_sequence(
    spec: &ProcessSpec,
    u: &FunctionDescriptor,
    count: usize,
    window: &StateWindow,
    cfg: &QuadConfig,
) -> Result<TruncationSequence> {
    if count == 0 {
        return Err(Error::domain("count", "must be at least 1"));
    }
    let Some(m) = spec.levy_measure() else {
        let eps: Vec<f64> = (1..=count).map(|n| 0.5_f64.powi(n as i32)).collect();
        return Ok(TruncationSequence { s_values: vec![0.0; count], eps, floor: 0.0, floor_reached: false });
    };
    let floor = if u.is_identity() { m.lower_support() } else { 0.0 };
    let s = |e: f64| s_epsilon(spec, u, e, window, cfg);
    let mut eps = Vec::with_capacity(count);
    let mut s_values = Vec::with_capacity(count);
    let mut hi = 1.0_f64.max(2.0 * floor);
    let mut floor_reached = false;
    for n in 1..=count {
        let target = 0.5_f64.powi(4 * n as i32) * (1.0 - BOUND_MARGIN);
        if n > 1 {
            hi = eps[n - 2];
        }
        if floor >= hi {
            floor_reached = true;
            break;
        }
        let s_hi = s(hi)?;
        let e = if n == 1 && s_hi < target {
            hi
        } else {
            let (mut a, mut b) = (floor, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if s(mid)? < target {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            a
        };
        if e <= floor {
            if floor == 0.0 {
                return Err(Error::Truncation(alloc::format!("S_eps does not fall below 2^-{} for any eps > 0", 4 * n)));
            }
            eps.push(floor);
            s_values.push(0.0);
            floor_reached = true;
            break;
        }
        eps.push(e);
        s_values.push(s(e)?);
    }
    Ok(TruncationSequence { eps, s_values, floor, floor_reached })
}

/// Convergence diagnostics along the truncation sequence.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MdDiagnostics {
    /// `sup_t |M^d(n+1) - M^d(n)|` for consecutive levels.
    pub sup_diffs: Vec<f64>,
    /// `sup |F'|` over the path's range of `u`.
    pub c_k: f64,
    /// Some successive difference failed to decrease.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdLimit {
    pub m_d: AfPath,
    pub a: AfPath,
    pub raw: AfPath,
    pub per_level: Vec<JumpTerms>,
    pub diagnostics: MdDiagnostics,
}

/// `M^d(F,u)` and `A(F,u)` at the end of the truncation sequence, with the
/// per-level values used as diagnostics.
#[allow(clippy::too_many_arguments)]
pub fn m_d_limit(
    path: &SamplePath,
    u: &FunctionDescriptor,
    f: &FunctionDescriptor,
    spec: &ProcessSpec,
    seq: &TruncationSequence,
    grid: &EvalGrid,
    cfg: &QuadConfig,
) -> Result<MdLimit> {
    if seq.eps.windows(2).any(|w| w[0] <= w[1]) || seq.eps.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Truncation("cutoffs must be positive and strictly decreasing".into()));
    }
    let per_level = seq
        .eps
        .iter()
        .map(|&e| compensated_jump_sum(path, u, f, spec, e.min(1.0 - f64::EPSILON), grid, cfg))
        .collect::<Result<Vec<_>>>()?;
    let limit = compensated_jump_sum(path, u, f, spec, 0.0, grid, cfg)?;
    let sup_diffs: Vec<f64> = per_level
        .windows(2)
        .map(|w| w[1].m_d.combine(1.0, &w[0].m_d, -1.0).map(|d| d.sup_norm()))
        .collect::<Result<_>>()?;
    let flagged = sup_diffs.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-9) + 1e-15);
    let (lo, hi) = path.u_range(u);
    let c_k = (0..=256)
        .map(|j| f.derivative(lo + (hi - lo) * j as f64 / 256.0).map(f64::abs))
        .try_fold(0.0_f64, |m, d| d.map(|d| m.max(d)))
        .unwrap_or(f64::NAN);
    Ok(MdLimit {
        m_d: limit.m_d,
        a: limit.compensator,
        raw: limit.raw,
        per_level,
        diagnostics: MdDiagnostics { sup_diffs, c_k, flagged },
    })
}
