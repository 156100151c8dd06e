//! Symmetric Markov process models: specification, path simulation and
//! Lévy-measure integrals.
//!
//! All jump models are finite-activity symmetric Lévy processes. The truncated
//! α-stable model uses `ν(dy) = c|y|^{-1-α} dy` restricted to `|y| > delta`,
//! and the truncated process itself is the model; nothing is added back for
//! the removed small jumps. The Lévy system is `N(x, dy) = ν(dy - x)`,
//! `H_t = t`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::func::FunctionDescriptor;
use crate::quad::{self, QuadConfig};

/// Largest supported state-space dimension.
pub const MAX_DIM: usize = 2;

/// Per-step jump probability above which binning jumps to grid points is
/// considered coarse.
pub const JUMP_LOAD_WARN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ProcessKind {
    BrownianMotion,
    TruncatedAlphaStable,
    CompoundPoissonSymmetric,
    BrownianPlusJumps,
    Diffusion2D,
}

/// Symmetric jump-size laws for the compound Poisson model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum JumpLaw {
    /// `±size` with probability one half each.
    TwoPoint { size: f64 },
    Uniform { half_width: f64 },
    Normal { sd: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    /// Variance per unit time of the continuous martingale part.
    pub sigma2: f64,
    pub alpha: f64,
    pub scale: f64,
    pub delta: f64,
    /// Intensity of the compound Poisson model.
    pub rate: f64,
    pub jump_law: JumpLaw,
    /// Covariance per unit time of the 2D diffusion.
    pub a_matrix: [[f64; 2]; 2],
    pub start: [f64; 2],
}

impl ProcessSpec {
    fn base(kind: ProcessKind) -> Self {
        ProcessSpec {
            kind,
            sigma2: 0.0,
            alpha: 1.0,
            scale: 1.0,
            delta: 1.0,
            rate: 0.0,
            jump_law: JumpLaw::Normal { sd: 1.0 },
            a_matrix: [[1.0, 0.0], [0.0, 1.0]],
            start: [0.0; 2],
        }
    }

    pub fn brownian(sigma2: f64) -> Self {
        ProcessSpec { sigma2, ..Self::base(ProcessKind::BrownianMotion) }
    }

    pub fn truncated_stable(alpha: f64, scale: f64, delta: f64) -> Self {
        ProcessSpec { alpha, scale, delta, ..Self::base(ProcessKind::TruncatedAlphaStable) }
    }

    pub fn compound_poisson(rate: f64, jump_law: JumpLaw) -> Self {
        ProcessSpec { rate, jump_law, ..Self::base(ProcessKind::CompoundPoissonSymmetric) }
    }

    pub fn brownian_plus_jumps(sigma2: f64, alpha: f64, scale: f64, delta: f64) -> Self {
        ProcessSpec { sigma2, alpha, scale, delta, ..Self::base(ProcessKind::BrownianPlusJumps) }
    }

    pub fn diffusion_2d(a_matrix: [[f64; 2]; 2]) -> Self {
        ProcessSpec { a_matrix, ..Self::base(ProcessKind::Diffusion2D) }
    }

    pub fn with_start(mut self, start: f64) -> Self {
        self.start[0] = start;
        self
    }

    pub fn dim(&self) -> usize {
        if self.kind == ProcessKind::Diffusion2D {
            2
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(name, "must be finite"))
            }
        };
        finite("sigma2", self.sigma2)?;
        finite("start", self.start[0])?;
        finite("start", self.start[1])?;
        if self.sigma2 < 0.0 {
            return Err(Error::domain("sigma2", "must be nonnegative"));
        }
        match self.kind {
            ProcessKind::TruncatedAlphaStable | ProcessKind::BrownianPlusJumps => {
                finite("alpha", self.alpha)?;
                finite("scale", self.scale)?;
                finite("delta", self.delta)?;
                if !(self.alpha > 0.0 && self.alpha < 2.0) {
                    return Err(Error::domain("alpha", "must lie in (0, 2)"));
                }
                if !(self.scale > 0.0) {
                    return Err(Error::domain("scale", "must be positive"));
                }
                if !(self.delta > 0.0) {
                    return Err(Error::domain("delta", "must be positive"));
                }
            }
            ProcessKind::CompoundPoissonSymmetric => {
                finite("rate", self.rate)?;
                if self.rate < 0.0 {
                    return Err(Error::domain("rate", "must be nonnegative"));
                }
                let p = match self.jump_law {
                    JumpLaw::TwoPoint { size } => size,
                    JumpLaw::Uniform { half_width } => half_width,
                    JumpLaw::Normal { sd } => sd,
                };
                if !(p.is_finite() && p > 0.0) {
                    return Err(Error::domain("jump_law", "parameter must be finite and positive"));
                }
            }
            ProcessKind::Diffusion2D => {
                let a = self.a_matrix;
                if a.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::domain("a_matrix", "must be finite"));
                }
                if a[0][1] != a[1][0] {
                    return Err(Error::domain("a_matrix", "must be symmetric"));
                }
                if !(a[0][0] > 0.0 && a[0][0] * a[1][1] - a[0][1] * a[0][1] > 0.0) {
                    return Err(Error::domain("a_matrix", "must be positive definite"));
                }
            }
            ProcessKind::BrownianMotion => {}
        }
        Ok(())
    }

    /// The Lévy measure of the jump part, if any.
    pub fn levy_measure(&self) -> Option<LevyMeasure> {
        match self.kind {
            ProcessKind::TruncatedAlphaStable | ProcessKind::BrownianPlusJumps => Some(LevyMeasure::TruncatedStable {
                alpha: self.alpha,
                scale: self.scale,
                delta: self.delta,
            }),
            ProcessKind::CompoundPoissonSymmetric => Some(LevyMeasure::Finite { rate: self.rate, law: self.jump_law }),
            _ => None,
        }
    }

    /// Total jump intensity `Λ`.
    pub fn jump_intensity(&self) -> f64 {
        self.levy_measure().map_or(0.0, |m| m.total_mass())
    }

    /// Continuous variance per unit time along `component`.
    pub fn diffusion_coefficient(&self, component: usize) -> f64 {
        if self.kind == ProcessKind::Diffusion2D {
            self.a_matrix[component][component]
        } else {
            self.sigma2
        }
    }
}

/// Finite, symmetric Lévy measures of the catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevyMeasure {
    TruncatedStable { alpha: f64, scale: f64, delta: f64 },
    Finite { rate: f64, law: JumpLaw },
}

impl LevyMeasure {
    pub fn total_mass(&self) -> f64 {
        match *self {
            LevyMeasure::TruncatedStable { alpha, scale, delta } => 2.0 * scale * delta.powf(-alpha) / alpha,
            LevyMeasure::Finite { rate, .. } => rate,
        }
    }

    /// Infimum of `|y|` over the support.
    pub fn lower_support(&self) -> f64 {
        match *self {
            LevyMeasure::TruncatedStable { delta, .. } => delta,
            LevyMeasure::Finite { law: JumpLaw::TwoPoint { size }, .. } => size,
            LevyMeasure::Finite { .. } => 0.0,
        }
    }

    /// Supremum of `|y|` over the support.
    pub fn upper_support(&self) -> f64 {
        match *self {
            LevyMeasure::TruncatedStable { .. } => f64::INFINITY,
            LevyMeasure::Finite { law, .. } => match law {
                JumpLaw::TwoPoint { size } => size,
                JumpLaw::Uniform { half_width } => half_width,
                JumpLaw::Normal { .. } => f64::INFINITY,
            },
        }
    }

    /// Draws a jump size from the normalized measure.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let magnitude = match *self {
            LevyMeasure::TruncatedStable { alpha, delta, .. } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                delta * u.powf(-1.0 / alpha)
            }
            LevyMeasure::Finite { law, .. } => match law {
                JumpLaw::TwoPoint { size } => size,
                JumpLaw::Uniform { half_width } => half_width * rng.random::<f64>(),
                JumpLaw::Normal { sd } => {
                    let z: f64 = StandardNormal.sample(rng);
                    sd * z.abs()
                }
            },
        };
        sign * magnitude
    }

    /// `∫_{lo < |y| < hi} g(y) ν(dy)`, with `0 <= lo < hi <= inf`.
    ///
    /// The integrand is paired as `g(y) + g(-y)` over `y > 0`, so odd
    /// integrands cancel pointwise.
    pub fn integrate<G: FnMut(f64) -> f64>(&self, mut g: G, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<f64> {
        self.integrate_positive(|y| g(y) + g(-y), lo, hi, cfg)
    }

    /// `∫_{lo < y < hi} g(y) ν(dy)` over positive jump sizes only.
    pub fn integrate_positive<G: FnMut(f64) -> f64>(
        &self,
        mut g: G,
        lo: f64,
        hi: f64,
        cfg: &QuadConfig,
    ) -> Result<f64> {
        if !(lo >= 0.0 && lo < hi) {
            return Err(Error::domain("region", "need 0 <= lo < hi"));
        }
        let lo_eff = lo.max(self.lower_support());
        let hi_eff = hi.min(self.upper_support());
        let checked = |v: f64| if v.is_finite() { Ok(v) } else { Err(Error::Unbounded) };
        match *self {
            LevyMeasure::Finite { rate, law: JumpLaw::TwoPoint { size } } => {
                if lo < size && size < hi {
                    checked(0.5 * rate * g(size))
                } else {
                    Ok(0.0)
                }
            }
            _ if hi_eff <= lo_eff => Ok(0.0),
            LevyMeasure::TruncatedStable { alpha, scale, .. } => {
                // w = y^{-α} maps c y^{-1-α} dy to (c/α) dw, with a bounded integrand.
                let w_hi = lo_eff.powf(-alpha);
                let w_lo = if hi_eff.is_finite() { hi_eff.powf(-alpha) } else { 0.0 };
                let inv = -1.0 / alpha;
                let (v, _) = quad::integrate(|w| if w <= 0.0 { 0.0 } else { g(w.powf(inv)) }, w_lo, w_hi, cfg)?;
                checked(scale / alpha * v)
            }
            LevyMeasure::Finite { rate, law: JumpLaw::Uniform { half_width } } => {
                let dens = rate / (2.0 * half_width);
                let (v, _) = quad::integrate(g, lo_eff, hi_eff, cfg)?;
                checked(dens * v)
            }
            LevyMeasure::Finite { rate, law: JumpLaw::Normal { sd } } => {
                let top = hi_eff.min(40.0 * sd);
                if top <= lo_eff {
                    return Ok(0.0);
                }
                let norm = rate / (sd * (2.0 * core::f64::consts::PI).sqrt());
                let (v, _) = quad::integrate(
                    |y| {
                        let z = y / sd;
                        g(y) * (-0.5 * z * z).exp()
                    },
                    lo_eff,
                    top,
                    cfg,
                )?;
                checked(norm * v)
            }
        }
    }
}

/// `∫_{eps < |y| < r} g(y) ν(dy)` for the spec's Lévy measure.
pub fn levy_tail_integral<G: FnMut(f64) -> f64>(
    spec: &ProcessSpec,
    g: G,
    eps: f64,
    r: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::domain("eps", "must be positive"));
    }
    if !(eps < r) {
        return Err(Error::domain("region", "need eps < r"));
    }
    match spec.levy_measure() {
        Some(m) => m.integrate(g, eps, r, cfg),
        None => Ok(0.0),
    }
}

/// Compact window of starting states over which `s_epsilon` takes its
/// supremum for non-identity `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateWindow {
    pub half_width: f64,
    pub points: usize,
}

impl Default for StateWindow {
    fn default() -> Self {
        StateWindow { half_width: 4.0, points: 33 }
    }
}

/// `S_ε = sup_x ∫_{|u(x+y) - u(x)| < ε} |u(x+y) - u(x)|² ν(dy)`.
///
/// For the identity the integral does not depend on `x`.
pub fn s_epsilon(
    spec: &ProcessSpec,
    u: &FunctionDescriptor,
    eps: f64,
    window: &StateWindow,
    cfg: &QuadConfig,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::domain("eps", "must be positive"));
    }
    if !u.is_differentiable() {
        return Err(Error::Unsupported(alloc::format!("s_epsilon for u = {}", u.name())));
    }
    let Some(m) = spec.levy_measure() else {
        return Ok(0.0);
    };
    if u.is_identity() {
        return m.integrate(|y| y * y, 0.0, eps, cfg);
    }
    let mut best = 0.0_f64;
    let n = window.points.max(1);
    for j in 0..n {
        let x = if n == 1 { 0.0 } else { -window.half_width + 2.0 * window.half_width * j as f64 / (n - 1) as f64 };
        let ux = u.value(x);
        let v = m.integrate(
            |y| {
                let d = u.value(x + y) - ux;
                if d.abs() < eps {
                    d * d
                } else {
                    0.0
                }
            },
            0.0,
            f64::INFINITY,
            cfg,
        )?;
        best = best.max(v);
    }
    Ok(best)
}

/// One jump of a sample path, located at grid point `index`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JumpRecord {
    pub index: usize,
    /// `X_{t_index -}`; unused components are zero.
    pub left: [f64; MAX_DIM],
    pub size: [f64; MAX_DIM],
}

/// A discretized trajectory on a uniform grid.
///
/// `values[i+1] = (values[i] + cont[i]) + jump(i+1)` componentwise, where the
/// jump at grid point `i+1` (if any) is recorded in the ledger together with
/// its left value `values[i] + cont[i]`. Paths built by reversal carry exact
/// left limits as values and satisfy this closure up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    dim: usize,
    dt: f64,
    values: Vec<f64>,
    cont: Vec<f64>,
    jumps: Vec<JumpRecord>,
    seed: u64,
}

impl SamplePath {
    /// Assembles a path from raw parts, checking shapes and ledger ordering.
    pub fn from_parts(
        dim: usize,
        dt: f64,
        values: Vec<f64>,
        cont: Vec<f64>,
        jumps: Vec<JumpRecord>,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Dimension { expected: 1, got: dim });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain("dt", "must be positive and finite"));
        }
        if !values.len().is_multiple_of(dim) || values.len() < dim || cont.len() + dim != values.len() {
            return Err(Error::GridMismatch(alloc::format!(
                "values {} and increments {} do not form a {dim}-dimensional path",
                values.len(),
                cont.len()
            )));
        }
        let n = cont.len() / dim;
        if jumps.windows(2).any(|w| w[0].index >= w[1].index) {
            return Err(Error::GridMismatch("jump ledger must be strictly increasing in index".into()));
        }
        if let Some(j) = jumps.iter().find(|j| j.index == 0 || j.index > n) {
            return Err(Error::IndexOutOfRange { index: j.index, max: n });
        }
        Ok(SamplePath { dim, dt, values, cont, jumps, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn steps(&self) -> usize {
        self.cont.len() / self.dim
    }
    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn jumps(&self) -> &[JumpRecord] {
        &self.jumps
    }
    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }
    pub fn raw_cont(&self) -> &[f64] {
        &self.cont
    }

    /// State at grid point `i`.
    #[inline]
    pub fn state(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// First coordinate at grid point `i`.
    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.values[i * self.dim]
    }

    /// Continuous increment over step `i` (from grid `i` to `i+1`).
    #[inline]
    pub fn cont(&self, i: usize) -> &[f64] {
        &self.cont[i * self.dim..(i + 1) * self.dim]
    }

    /// Jump located at grid point `i`, if any.
    pub fn jump_at(&self, i: usize) -> Option<&JumpRecord> {
        self.jumps.binary_search_by_key(&i, |j| j.index).ok().map(|k| &self.jumps[k])
    }

    /// Left limits `X_{t_i -}` for every grid point, flattened; equal to the
    /// values except at jump points, where the ledger's left value is used.
    pub fn left_limits(&self) -> Vec<f64> {
        let mut out = self.values.clone();
        for j in &self.jumps {
            out[j.index * self.dim..(j.index + 1) * self.dim].copy_from_slice(&j.left[..self.dim]);
        }
        out
    }

    /// Largest violation of the closure relation and of ledger consistency.
    pub fn closure_error(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0_f64;
        let mut jumps = self.jumps.iter().peekable();
        for i in 0..self.steps() {
            let jump = match jumps.peek() {
                Some(j) if j.index == i + 1 => jumps.next(),
                _ => None,
            };
            for c in 0..d {
                let left = self.values[i * d + c] + self.cont[i * d + c];
                let next = match jump {
                    Some(j) => {
                        worst = worst.max((j.left[c] - left).abs());
                        j.left[c] + j.size[c]
                    }
                    None => left,
                };
                worst = worst.max((self.values[(i + 1) * d + c] - next).abs());
            }
        }
        worst
    }

    /// Rebuilds the values from the start state, the continuous increments and
    /// the jump ledger.
    pub fn reconstruct_values(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = Vec::with_capacity(self.values.len());
        out.extend_from_slice(self.state(0));
        let mut jumps = self.jumps.iter().peekable();
        for i in 0..self.steps() {
            let jump = match jumps.peek() {
                Some(j) if j.index == i + 1 => jumps.next(),
                _ => None,
            };
            for c in 0..d {
                let left = out[i * d + c] + self.cont[i * d + c];
                out.push(match jump {
                    Some(j) => left + j.size[c],
                    None => left,
                });
            }
        }
        out
    }

    /// The shifted path `θ_s` starting at grid point `start`.
    pub fn window(&self, start: usize) -> Result<SamplePath> {
        let n = self.steps();
        if start >= n {
            return Err(Error::IndexOutOfRange { index: start, max: n - 1 });
        }
        let d = self.dim;
        let jumps = self
            .jumps
            .iter()
            .filter(|j| j.index > start)
            .map(|j| JumpRecord { index: j.index - start, ..*j })
            .collect();
        Ok(SamplePath {
            dim: d,
            dt: self.dt,
            values: self.values[start * d..].to_vec(),
            cont: self.cont[start * d..].to_vec(),
            jumps,
            seed: self.seed,
        })
    }

    /// The path restricted to grid points `0..=end`.
    pub fn truncate(&self, end: usize) -> Result<SamplePath> {
        let n = self.steps();
        if end == 0 || end > n {
            return Err(Error::IndexOutOfRange { index: end, max: n });
        }
        let d = self.dim;
        Ok(SamplePath {
            dim: d,
            dt: self.dt,
            values: self.values[..(end + 1) * d].to_vec(),
            cont: self.cont[..end * d].to_vec(),
            jumps: self.jumps.iter().filter(|j| j.index <= end).copied().collect(),
            seed: self.seed,
        })
    }

    /// Minimum and maximum of `u` over the values and left limits.
    pub fn u_range(&self, u: &FunctionDescriptor) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=self.steps() {
            let v = u.value(self.value(i));
            lo = lo.min(v);
            hi = hi.max(v);
        }
        for j in &self.jumps {
            let v = u.value(j.left[0]);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// Simulates a path of `spec` on `[0, horizon]` with step `dt`.
///
/// Each step draws the continuous increment (centered Gaussian with variance
/// `sigma2 * dt`, or `A * dt` in 2D), then at most one jump with probability
/// `Λ dt`, with size drawn from the normalized Lévy measure. The jump sits at
/// the end of the step.
pub fn simulate_path(spec: &ProcessSpec, horizon: f64, dt: f64, seed: u64) -> Result<SamplePath> {
    spec.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::domain("horizon", "must be positive and finite"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::domain("dt", "must be positive and finite"));
    }
    if dt >= horizon || horizon / dt < 2.0 {
        return Err(Error::domain("dt", "need horizon / dt >= 2"));
    }
    let n = (horizon / dt).round() as usize;
    let measure = spec.levy_measure();
    let load = spec.jump_intensity() * dt;
    if load > 1.0 {
        return Err(Error::domain("dt", "jump intensity times dt exceeds 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.dim();
    let mut values = Vec::with_capacity((n + 1) * d);
    let mut cont = Vec::with_capacity(n * d);
    let mut jumps = Vec::new();
    values.extend_from_slice(&spec.start[..d]);

    if d == 2 {
        let a = spec.a_matrix;
        let l00 = a[0][0].sqrt();
        let l10 = a[1][0] / l00;
        let l11 = (a[1][1] - l10 * l10).sqrt();
        let sq = dt.sqrt();
        for i in 0..n {
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            let c0 = sq * l00 * z0;
            let c1 = sq * (l10 * z0 + l11 * z1);
            cont.push(c0);
            cont.push(c1);
            let x0 = values[2 * i] + c0;
            let x1 = values[2 * i + 1] + c1;
            values.push(x0);
            values.push(x1);
        }
    } else {
        let sd = (spec.sigma2 * dt).sqrt();
        for i in 0..n {
            let c = if spec.sigma2 > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            } else {
                0.0
            };
            cont.push(c);
            let left = values[i] + c;
            let mut next = left;
            if let Some(m) = &measure {
                if load > 0.0 && rng.random::<f64>() < load {
                    let size = m.sample(&mut rng);
                    jumps.push(JumpRecord { index: i + 1, left: [left, 0.0], size: [size, 0.0] });
                    next = left + size;
                }
            }
            values.push(next);
        }
    }
    SamplePath::from_parts(d, dt, values, cont, jumps, seed)
}
