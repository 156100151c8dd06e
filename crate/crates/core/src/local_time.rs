//! Local time of `u(X)`: `L^a = -2Γ^a + 2 l^a`, with
//! `l^a_t = ∫_0^t 1{u(X_{s-}) <= a} d ^cN^u_s` and `^cN^u = Γ(M^{u,c})`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::calculus::{check_spec, AfPath, EvalGrid};
use crate::error::{Error, Result};
use crate::func::FunctionDescriptor;
use crate::levels::{integrate_levels, LevelField, LevelGrid};
use crate::nakao::{self, MafBuilder};
use crate::process::{ProcessSpec, SamplePath};
use crate::stats::CompensatedSum;

/// Per-step increments of `L^a`.
///
/// Step `i` contributes `u'(X_{(i+1)-}) c_i` when `u(X_i) <= a` and
/// subtracts it when `u(X_{(i+1)-}) <= a`: the `Γ^a` increment and the
/// `^cN^u` correction share the term `u'(X_i) c_i`, which cancels.
pub fn local_time_increments(path: &SamplePath, u: &FunctionDescriptor, a: f64) -> Result<Vec<f64>> {
    if path.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: path.dim() });
    }
    let g = nakao::gamma_increments(&MafBuilder::Level { u: u.clone(), level: a }, path)?;
    let cn = nakao::gamma_increments(&MafBuilder::ContinuousPart { u: u.clone() }, path)?;
    Ok((0..path.steps())
        .map(|i| {
            let l = if u.value(path.value(i)) <= a { cn[i] } else { 0.0 };
            -2.0 * g[i] + 2.0 * l
        })
        .collect())
}

/// `L^a` on `grid`.
pub fn local_time(path: &SamplePath, u: &FunctionDescriptor, a: f64, grid: &EvalGrid) -> Result<AfPath> {
    AfPath::from_increments(&local_time_increments(path, u, a)?, grid, path.dt())
}

/// `L^a_t` for every level and evaluation point, with right-continuous step
/// interpolation in `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeField {
    pub field: LevelField,
    /// Bandwidth of a kernel estimate this field was compared against, if any.
    pub bandwidth: Option<f64>,
}

impl LocalTimeField {
    pub fn value(&self, a: f64, p: usize) -> f64 {
        self.field.value(a, p)
    }

    /// Fraction of (level, step) pairs where `L^a` decreases by more than `tol`.
    pub fn decrease_fraction(&self, tol: f64) -> f64 {
        let nl = self.field.levels().levels().len();
        let m = self.field.grid().len();
        if m < 2 {
            return 0.0;
        }
        let mut bad = 0usize;
        for j in 0..nl {
            for p in 1..m {
                if self.field.get(j, p) < self.field.get(j, p - 1) - tol {
                    bad += 1;
                }
            }
        }
        bad as f64 / (nl * (m - 1)) as f64
    }
}

/// The local-time field of `u(X)` over `levels`, in one pass over the path.
pub fn local_time_field(
    path: &SamplePath,
    u: &FunctionDescriptor,
    levels: &LevelGrid,
    grid: &EvalGrid,
) -> Result<LocalTimeField> {
    if path.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: path.dim() });
    }
    let left = path.left_limits();
    let field = nakao::level_kernel(path.steps(), path.dt(), levels, grid, |i, emit| {
        let c = path.cont(i)[0];
        if c == 0.0 {
            return Ok(());
        }
        let x1 = left[i + 1];
        let v = u.derivative(x1)? * c;
        emit(u.value(path.value(i)), v);
        emit(u.value(x1), -v);
        Ok(())
    })?;
    Ok(LocalTimeField { field, bandwidth: None })
}

/// Both sides of the occupation density formula at grid index `k`:
/// `∫ f(z) L^z_t dz` by the trapezoidal rule over `levels`, and
/// `∫_0^t f(u(X_s)) d<M^{u,c}>_s` with the predictable bracket.
pub fn occupation_check(
    path: &SamplePath,
    u: &FunctionDescriptor,
    f: &FunctionDescriptor,
    spec: &ProcessSpec,
    levels: &LevelGrid,
    k: usize,
) -> Result<(f64, f64)> {
    let grid = EvalGrid::checkpoints(&[k])?;
    let sides = occupation_sides(path, u, f, spec, levels, &grid)?;
    Ok(sides[sides.len() - 1])
}

/// [`occupation_check`] at every point of `grid`, from one local-time field.
pub fn occupation_sides(
    path: &SamplePath,
    u: &FunctionDescriptor,
    f: &FunctionDescriptor,
    spec: &ProcessSpec,
    levels: &LevelGrid,
    grid: &EvalGrid,
) -> Result<Vec<(f64, f64)>> {
    check_spec(path, spec)?;
    grid.check_fits(path.steps())?;
    let lt = local_time_field(path, u, levels, grid)?;
    let z = levels.levels();
    let fz: Vec<f64> = z.iter().map(|&v| f.value(v)).collect();
    let s2dt = spec.diffusion_coefficient(0) * path.dt();
    let mut rhs = CompensatedSum::new();
    let mut i = 0;
    let mut out = Vec::with_capacity(grid.len());
    for (p, &k) in grid.indices().iter().enumerate() {
        if s2dt > 0.0 {
            while i < k {
                let x = path.value(i);
                let d = u.derivative(x)?;
                rhs.add(f.value(u.value(x)) * d * d * s2dt);
                i += 1;
            }
        }
        let mut lhs = CompensatedSum::new();
        for j in 0..z.len() - 1 {
            let a = fz[j] * lt.field.get(j, p);
            let b = fz[j + 1] * lt.field.get(j + 1, p);
            lhs.add(0.5 * (a + b) * (z[j + 1] - z[j]));
        }
        out.push((lhs.value(), rhs.value()));
    }
    Ok(out)
}

/// Kernel occupation estimate of the local time.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelEstimate {
    pub value: f64,
    /// The bandwidth is below twice the RMS increment of `u(X)`.
    pub flagged: bool,
}

/// `(1/2h) ∫_0^t 1{|u(X_s) - a| < h} d<M^{u,c}>_s` up to grid index `k`.
pub fn kernel_local_time_oracle(
    path: &SamplePath,
    u: &FunctionDescriptor,
    spec: &ProcessSpec,
    a: f64,
    h: f64,
    k: usize,
) -> Result<KernelEstimate> {
    check_spec(path, spec)?;
    if !(h > 0.0) {
        return Err(Error::domain("h", "must be positive"));
    }
    if k > path.steps() {
        return Err(Error::IndexOutOfRange { index: k, max: path.steps() });
    }
    let s2dt = spec.diffusion_coefficient(0) * path.dt();
    let mut acc = CompensatedSum::new();
    let mut sq = CompensatedSum::new();
    for i in 0..k {
        let x = path.value(i);
        let ux = u.value(x);
        let du = u.value(path.value(i + 1)) - ux;
        sq.add(du * du);
        if (ux - a).abs() < h {
            let d = u.derivative(x)?;
            acc.add(d * d * s2dt);
        }
    }
    let rms = if k > 0 { (sq.value() / k as f64).sqrt() } else { 0.0 };
    Ok(KernelEstimate { value: acc.value() / (2.0 * h), flagged: h < 2.0 * rms })
}

/// Stieltjes sum `Σ_{i<k} (u(X_i) - a)^p ΔL^a_i`; `p = 0` gives `L^a_t`.
pub fn support_check(path: &SamplePath, u: &FunctionDescriptor, a: f64, p: i32, k: usize) -> Result<f64> {
    if k > path.steps() {
        return Err(Error::IndexOutOfRange { index: k, max: path.steps() });
    }
    let incr = local_time_increments(path, u, a)?;
    let mut acc = CompensatedSum::new();
    for (i, dl) in incr[..k].iter().enumerate() {
        acc.add((u.value(path.value(i)) - a).powi(p) * dl);
    }
    Ok(acc.value())
}

/// `-½ ∫ f(z) d_z L^z = ∫ f(z) d_z Γ^z - ∫ f(u(X_{s-})) d ^cN^u_s`.
pub fn integrate_levels_localtime(
    f: &FunctionDescriptor,
    path: &SamplePath,
    u: &FunctionDescriptor,
    grid: &EvalGrid,
) -> Result<AfPath> {
    let lev = integrate_levels(f, path, u, grid)?;
    let cn = nakao::gamma_increments(&MafBuilder::ContinuousPart { u: u.clone() }, path)?;
    let corr: Vec<f64> = cn
        .iter()
        .enumerate()
        .map(|(i, d)| if *d == 0.0 { 0.0 } else { f.value(u.value(path.value(i))) * d })
        .collect();
    let c = AfPath::from_increments(&corr, grid, path.dt())?;
    lev.combine(1.0, &c, -1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::simulate_path;

    #[test]
    fn pure_jump_local_time_vanishes() {
        let spec = ProcessSpec::truncated_stable(1.2, 1.0, 0.05);
        let p = simulate_path(&spec, 1.0, 1e-3, 1).unwrap();
        let g = EvalGrid::sqrt(p.steps());
        assert_eq!(local_time(&p, &FunctionDescriptor::identity(), 0.0, &g).unwrap().sup_norm(), 0.0);
        assert_eq!(
            integrate_levels_localtime(&FunctionDescriptor::tanh(), &p, &FunctionDescriptor::identity(), &g)
                .unwrap()
                .sup_norm(),
            0.0
        );
    }

    #[test]
    fn far_level_has_no_local_time() {
        let spec = ProcessSpec::brownian(1.0);
        let p = simulate_path(&spec, 1.0, 1e-3, 1).unwrap();
        let g = EvalGrid::sqrt(p.steps());
        assert_eq!(local_time(&p, &FunctionDescriptor::identity(), -50.0, &g).unwrap().sup_norm(), 0.0);
        let k = kernel_local_time_oracle(&p, &FunctionDescriptor::identity(), &spec, -50.0, 0.02, p.steps()).unwrap();
        assert_eq!(k.value, 0.0);
    }

    #[test]
    fn field_matches_single_levels_and_p_zero() {
        let spec = ProcessSpec::brownian(1.0);
        let p = simulate_path(&spec, 1.0, 1e-3, 9).unwrap();
        let u = FunctionDescriptor::tanh();
        let g = EvalGrid::sqrt(p.steps());
        let levels = LevelGrid::for_path(&p, &u, 32).unwrap();
        let field = local_time_field(&p, &u, &levels, &g).unwrap();
        for (j, &a) in levels.levels().iter().enumerate() {
            let single = local_time(&p, &u, a, &g).unwrap();
            for pos in 0..g.len() {
                assert!((field.field.get(j, pos) - single.values()[pos]).abs() < 1e-13);
            }
            let n = p.steps();
            assert_eq!(support_check(&p, &u, a, 0, n).unwrap(), local_time(&p, &u, a, &EvalGrid::full(n)).unwrap().terminal());
        }
    }

    #[test]
    fn kernel_shift_covariance() {
        let spec = ProcessSpec::brownian(1.0);
        let p = simulate_path(&spec, 1.0, 1e-3, 2).unwrap();
        let shifted = SamplePath::from_parts(
            1,
            p.dt(),
            p.raw_values().iter().map(|v| v + 0.5).collect(),
            p.raw_cont().to_vec(),
            Vec::new(),
            0,
        )
        .unwrap();
        let u = FunctionDescriptor::identity();
        let a = kernel_local_time_oracle(&p, &u, &spec, 0.1, 0.05, p.steps()).unwrap();
        let b = kernel_local_time_oracle(&shifted, &u, &spec, 0.6, 0.05, p.steps()).unwrap();
        assert!((a.value - b.value).abs() < 1e-9);
    }

    #[test]
    fn occupation_with_zero_integrand() {
        let spec = ProcessSpec::brownian(1.0);
        let p = simulate_path(&spec, 1.0, 1e-3, 2).unwrap();
        let u = FunctionDescriptor::identity();
        let levels = LevelGrid::for_path(&p, &u, 64).unwrap();
        assert_eq!(occupation_check(&p, &u, &FunctionDescriptor::constant(0.0), &spec, &levels, 1000).unwrap(), (0.0, 0.0));
    }
}
