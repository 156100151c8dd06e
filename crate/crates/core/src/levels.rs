//! Integration over levels against `a ↦ Γ^a`, its two-dimensional box
//! version, the level norms `‖f‖_k`, the metric `[f]` and the density `U`
//! of the energy measure of `M^{u,c}` pushed forward by `u`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::calculus::{AfPath, EvalGrid};
use crate::error::{Error, Result};
use crate::func::{Fn2, FunctionDescriptor};
use crate::nakao::{self, MafBuilder};
use crate::process::{ProcessSpec, SamplePath};
use crate::quad::{self, QuadConfig};

/// Strictly increasing, finite levels `z_0 < … < z_N` with `N >= 1`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelGrid {
    levels: Vec<f64>,
}

impl LevelGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::domain("levels", "need at least two levels"));
        }
        if levels.iter().any(|z| !z.is_finite()) {
            return Err(Error::domain("levels", "must be finite"));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("levels", "must be strictly increasing"));
        }
        Ok(LevelGrid { levels })
    }

    /// `cells + 1` equispaced levels from `lo` to `hi`.
    pub fn equispaced(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if cells == 0 || !(lo < hi) {
            return Err(Error::domain("levels", "need lo < hi and at least one cell"));
        }
        let h = (hi - lo) / cells as f64;
        let mut levels: Vec<f64> = (0..=cells).map(|j| lo + h * j as f64).collect();
        levels[cells] = hi;
        Self::new(levels)
    }

    /// `cells + 1` equispaced levels covering `[lo - h, hi + h]`, where `h` is
    /// one cell width.
    pub fn covering(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if cells < 3 {
            return Err(Error::domain("cells", "need at least three cells"));
        }
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let h = (hi - lo) / (cells - 2) as f64;
        Self::equispaced(lo - h, hi + h, cells)
    }

    /// The default grid for `u(X)` on a path.
    pub fn for_path(path: &SamplePath, u: &FunctionDescriptor, cells: usize) -> Result<Self> {
        let (lo, hi) = path.u_range(u);
        Self::covering(lo, hi, cells)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
    pub fn cells(&self) -> usize {
        self.levels.len() - 1
    }
    pub fn lo(&self) -> f64 {
        self.levels[0]
    }
    pub fn hi(&self) -> f64 {
        self.levels[self.levels.len() - 1]
    }

    /// Index `j` of the cell `(z_j, z_{j+1}]` containing `x`.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        let j = self.levels.partition_point(|&z| z < x);
        if j == 0 || j == self.levels.len() {
            None
        } else {
            Some(j - 1)
        }
    }

    /// Each cell split into `k` equal parts.
    pub fn refined(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("k", "must be positive"));
        }
        let mut out = Vec::with_capacity(self.cells() * k + 1);
        for w in self.levels.windows(2) {
            let h = (w[1] - w[0]) / k as f64;
            out.extend((0..k).map(|s| w[0] + h * s as f64));
        }
        out.push(self.hi());
        Self::new(out)
    }
}

/// Step function `Σ f_i 1_{(z_i, z_{i+1}]}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ElementaryFunction {
    grid: LevelGrid,
    coeffs: Vec<f64>,
}

impl ElementaryFunction {
    pub fn new(grid: LevelGrid, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != grid.cells() {
            return Err(Error::GridMismatch(alloc::format!(
                "{} coefficients for {} cells",
                coeffs.len(),
                grid.cells()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("coeffs", "must be finite"));
        }
        Ok(ElementaryFunction { grid, coeffs })
    }

    pub fn grid(&self) -> &LevelGrid {
        &self.grid
    }
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self, x: f64) -> f64 {
        self.grid.cell_of(x).map_or(0.0, |j| self.coeffs[j])
    }

    /// The same function on the grid with every cell split in `k`.
    pub fn refined(&self, k: usize) -> Result<Self> {
        let grid = self.grid.refined(k)?;
        let coeffs = self.coeffs.iter().flat_map(|&c| std::iter::repeat_n(c, k)).collect();
        Self::new(grid, coeffs)
    }

    pub fn as_descriptor(&self) -> FunctionDescriptor {
        crate::func::FnForm::Step(self.clone()).into()
    }
}

/// Step function on the plane: `Σ c_b 1_{]x_b, y_b]}` over axis-aligned
/// boxes, with the componentwise order.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ElementaryFunction2D {
    boxes: Vec<([f64; 2], [f64; 2], f64)>,
}

impl ElementaryFunction2D {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_box(mut self, lo: [f64; 2], hi: [f64; 2], coeff: f64) -> Result<Self> {
        if !(lo[0] < hi[0] && lo[1] < hi[1]) {
            return Err(Error::domain("box", "need lo < hi in both coordinates"));
        }
        self.boxes.push((lo, hi, coeff));
        Ok(self)
    }

    pub fn boxes(&self) -> &[([f64; 2], [f64; 2], f64)] {
        &self.boxes
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.boxes
            .iter()
            .filter(|(lo, hi, _)| lo[0] < z[0] && z[0] <= hi[0] && lo[1] < z[1] && z[1] <= hi[1])
            .map(|b| b.2)
            .sum()
    }
}

/// A level × time table, stored level-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelField {
    levels: LevelGrid,
    grid: EvalGrid,
    values: Vec<f64>,
    dt: f64,
}

impl LevelField {
    pub fn new(levels: LevelGrid, grid: EvalGrid, values: Vec<f64>, dt: f64) -> Result<Self> {
        if values.len() != levels.levels().len() * grid.len() {
            return Err(Error::GridMismatch("field size does not match levels × evaluation grid".into()));
        }
        Ok(LevelField { levels, grid, values, dt })
    }

    pub fn levels(&self) -> &LevelGrid {
        &self.levels
    }
    pub fn grid(&self) -> &EvalGrid {
        &self.grid
    }

    /// Value at level index `j` and evaluation position `p`.
    pub fn get(&self, j: usize, p: usize) -> f64 {
        self.values[j * self.grid.len() + p]
    }

    pub fn level_path(&self, j: usize) -> Result<AfPath> {
        let m = self.grid.len();
        if j >= self.levels.levels().len() {
            return Err(Error::IndexOutOfRange { index: j, max: self.levels.levels().len() - 1 });
        }
        AfPath::new(self.grid.clone(), self.values[j * m..(j + 1) * m].to_vec(), self.dt)
    }

    /// All levels at evaluation position `p`.
    pub fn column(&self, p: usize) -> Vec<f64> {
        (0..self.levels.levels().len()).map(|j| self.get(j, p)).collect()
    }

    /// Value at an arbitrary level, right-continuous step interpolation:
    /// `a` in `[z_j, z_{j+1})` reads level `j`; below the grid reads 0 and
    /// above reads the top level.
    pub fn value(&self, a: f64, p: usize) -> f64 {
        let z = self.levels.levels();
        let j = z.partition_point(|&l| l <= a);
        if j == 0 {
            0.0
        } else {
            self.get(j - 1, p)
        }
    }

    /// Position of grid index `k` on the evaluation grid.
    pub fn position(&self, k: usize) -> Result<usize> {
        self.grid
            .position(k)
            .ok_or_else(|| Error::GridMismatch(alloc::format!("index {k} is not on the evaluation grid")))
    }
}

/// `Σ f_i (Γ^{z_{i+1}} - Γ^{z_i})` on `grid`.
pub fn integrate_levels_elementary(
    f: &ElementaryFunction,
    path: &SamplePath,
    u: &FunctionDescriptor,
    grid: &EvalGrid,
) -> Result<AfPath> {
    let field = nakao::gamma_levels(path, u, f.grid(), grid)?;
    let values = (0..grid.len())
        .map(|p| f.coeffs().iter().enumerate().map(|(i, c)| c * (field.get(i + 1, p) - field.get(i, p))).sum())
        .collect();
    AfPath::new(grid.clone(), values, path.dt())
}

/// `∫ f(z) d_z Γ^z = Γ((f∘u) * M^{u,c})`.
pub fn integrate_levels(
    f: &FunctionDescriptor,
    path: &SamplePath,
    u: &FunctionDescriptor,
    grid: &EvalGrid,
) -> Result<AfPath> {
    nakao::gamma(&MafBuilder::Integrand { f: f.clone(), u: u.clone() }, path, grid)
}

/// The same integral computed in one pass over the path.
pub fn integrate_levels_sweep(
    f: &FunctionDescriptor,
    path: &SamplePath,
    u: &FunctionDescriptor,
    grid: &EvalGrid,
) -> Result<AfPath> {
    nakao::gamma_sweep(&MafBuilder::Integrand { f: f.clone(), u: u.clone() }, path, grid)
}

/// Density `U` with `∫ f(u(x)) μ_<M^{u,c}>(dx) = ∫ f(z) U(z) dz`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum UDensity {
    Constant(f64),
    /// Piecewise constant on the bins delimited by `edges`; zero outside.
    Binned { edges: Vec<f64>, values: Vec<f64> },
}

impl UDensity {
    pub fn value(&self, z: f64) -> f64 {
        match self {
            UDensity::Constant(c) => *c,
            UDensity::Binned { edges, values } => {
                let j = edges.partition_point(|&e| e <= z);
                if j == 0 || j == edges.len() {
                    0.0
                } else {
                    values[j - 1]
                }
            }
        }
    }

    /// Smallest interval outside of which the density vanishes.
    pub fn support(&self) -> (f64, f64) {
        match self {
            UDensity::Constant(c) if *c == 0.0 => (0.0, 0.0),
            UDensity::Constant(_) => (f64::NEG_INFINITY, f64::INFINITY),
            UDensity::Binned { edges, values } => {
                let first = values.iter().position(|&v| v != 0.0);
                let last = values.iter().rposition(|&v| v != 0.0);
                match (first, last) {
                    (Some(a), Some(b)) => (edges[a], edges[b + 1]),
                    _ => (0.0, 0.0),
                }
            }
        }
    }
}

/// Settings for the binned density of non-identity `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityConfig {
    /// The energy measure `σ² u'(x)² dx` is sampled on `[-half_width, half_width]`.
    pub half_width: f64,
    pub x_cells: usize,
    pub bins: usize,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig { half_width: 20.0, x_cells: 400_000, bins: 400 }
    }
}

/// The density `U` for `u` under `spec`.
///
/// For the identity `U ≡ σ²`. Otherwise the energy measure `σ² u'(x)² dx` is
/// accumulated by a midpoint rule on a symmetric `x`-window into equal bins in
/// the range of `u`.
pub fn u_density(spec: &ProcessSpec, u: &FunctionDescriptor, cfg: &DensityConfig) -> Result<UDensity> {
    let s2 = spec.diffusion_coefficient(0);
    if s2 == 0.0 {
        return Ok(UDensity::Constant(0.0));
    }
    if u.is_identity() {
        return Ok(UDensity::Constant(s2));
    }
    if !u.is_differentiable() {
        return Err(Error::NotDifferentiable(u.name()));
    }
    if cfg.x_cells == 0 || cfg.bins == 0 || !(cfg.half_width > 0.0) {
        return Err(Error::domain("density", "need positive window, cells and bins"));
    }
    let hx = 2.0 * cfg.half_width / cfg.x_cells as f64;
    let xs: Vec<f64> = (0..cfg.x_cells).map(|i| -cfg.half_width + (i as f64 + 0.5) * hx).collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in &xs {
        let v = u.value(x);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        return Ok(UDensity::Constant(0.0));
    }
    let pad = (hi - lo) * 1e-9;
    let (lo, hi) = (lo - pad, hi + pad);
    let bw = (hi - lo) / cfg.bins as f64;
    let mut mass = vec![0.0; cfg.bins];
    for &x in &xs {
        let d = u.derivative(x)?;
        let b = (((u.value(x) - lo) / bw) as usize).min(cfg.bins - 1);
        mass[b] += s2 * d * d * hx;
    }
    let edges = (0..=cfg.bins).map(|j| lo + bw * j as f64).collect();
    let values = mass.into_iter().map(|m| m / bw).collect();
    Ok(UDensity::Binned { edges, values })
}

/// `‖f‖_k = (∫_{-k}^{k} f(z)² U(z) dz)^{1/2}`; a divergent integral gives `+∞`.
pub fn norm_k(f: &FunctionDescriptor, density: &UDensity, k: u32, cfg: &QuadConfig) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("k", "must be at least 1"));
    }
    let kk = k as f64;
    let mut cuts = f.kinks();
    if let UDensity::Binned { edges, .. } = density {
        cuts.extend(edges.iter().copied());
    }
    cuts.retain(|c| c.abs() < kk);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    cuts.dedup();
    match quad::integrate_split(
        |z| {
            let v = f.value(z);
            v * v * density.value(z)
        },
        -kk,
        kk,
        &cuts,
        cfg,
    ) {
        Ok((v, _)) => Ok(v.max(0.0).sqrt()),
        Err(Error::Unbounded) => Ok(f64::INFINITY),
        Err(Error::Quadrature { estimate, .. }) if estimate.abs() > 1e12 => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// `[f - g] = Σ_{k=1}^{K} 2^{-k} (1 ∧ ‖f - g‖_k)`; the omitted tail is at
/// most `2^{-K}`.
pub fn metric_bracket(
    f: &FunctionDescriptor,
    g: &FunctionDescriptor,
    density: &UDensity,
    k_max: u32,
    cfg: &QuadConfig,
) -> Result<f64> {
    if k_max == 0 {
        return Err(Error::domain("k_max", "must be at least 1"));
    }
    if f == g {
        return Ok(0.0);
    }
    let diff = f.minus(g);
    let mut total = 0.0;
    for k in 1..=k_max {
        total += 0.5_f64.powi(k as i32) * norm_k(&diff, density, k, cfg)?.min(1.0);
    }
    Ok(total)
}

/// `Γ^z(u^i)` for a point `z` of the plane, componentwise order.
pub fn gamma_corner(path: &SamplePath, component: usize, z: [f64; 2], grid: &EvalGrid) -> Result<AfPath> {
    nakao::gamma_sweep(&MafBuilder::CoordinateLevel { component, level: z }, path, grid)
}

/// Alternating corner sum `φ(y) - φ(x_1, y_2) - φ(y_1, x_2) + φ(x)` of the
/// box `]x, y]`.
pub fn box_increment<P: FnMut([f64; 2]) -> f64>(mut phi: P, lo: [f64; 2], hi: [f64; 2]) -> f64 {
    phi(hi) - phi([lo[0], hi[1]]) - phi([hi[0], lo[1]]) + phi(lo)
}

/// `∫ f(z) d_z Γ^z(u^i)` for a planar step function, as a sum of box
/// increments of the corner field.
pub fn integrate_levels_multidim(
    f: &ElementaryFunction2D,
    path: &SamplePath,
    component: usize,
    grid: &EvalGrid,
) -> Result<AfPath> {
    if path.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: path.dim() });
    }
    let mut total = AfPath::zero(grid, path.dt());
    for (lo, hi, c) in f.boxes() {
        let corners = [
            ([hi[0], hi[1]], 1.0),
            ([lo[0], hi[1]], -1.0),
            ([hi[0], lo[1]], -1.0),
            ([lo[0], lo[1]], 1.0),
        ];
        for (z, s) in corners {
            let g = gamma_corner(path, component, z, grid)?;
            total = total.combine(1.0, &g, s * c)?;
        }
    }
    Ok(total)
}

/// `∫ f(z) d_z Γ^z(u^i) = Γ(f(X) * M^{i,c})` for a general planar function.
pub fn integrate_levels_multidim_fn(f: &Fn2, path: &SamplePath, component: usize, grid: &EvalGrid) -> Result<AfPath> {
    if path.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: path.dim() });
    }
    nakao::gamma(&MafBuilder::CoordinateWeighted { f: f.clone(), component }, path, grid)
}
