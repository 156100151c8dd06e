//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
#![allow(clippy::excessive_precision)]

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_641_0,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { rel_tol: 1e-10, abs_tol: 1e-13, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(Error::Unbounded);
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        if !f1.is_finite() || !f2.is_finite() {
            return Err(Error::Unbounded);
        }
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Ok(Panel { a, b, value, error })
}

/// Integrates `f` over `[a, b]`, splitting the panel with the largest error
/// estimate until the total error meets the tolerance.
///
/// Returns `(value, error_estimate)`. Non-finite integrand values yield
/// [`Error::Unbounded`].
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("interval", "quadrature needs finite limits"));
    }
    if a > b {
        let (v, e) = integrate(f, b, a, cfg)?;
        return Ok((-v, e));
    }
    let mut panels: Vec<Panel> = Vec::with_capacity(64);
    panels.push(gk15(&mut f, a, b)?);
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.error).sum();
        if err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            return Ok((total, err));
        }
        if panels.len() >= cfg.max_intervals {
            // Accept a converged-to-roundoff answer; report anything else.
            if err <= 1e3 * cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
                return Ok((total, err));
            }
            return Err(Error::Quadrature { estimate: total, error: err });
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, be), (i, p)| if p.error > be { (i, p.error) } else { (bi, be) });
        let worst = panels.swap_remove(idx);
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            panels.push(Panel { error: 0.0, ..worst });
            continue;
        }
        panels.push(gk15(&mut f, worst.a, mid)?);
        panels.push(gk15(&mut f, mid, worst.b)?);
    }
}

/// Integrates over consecutive sub-intervals delimited by `cuts` (which must
/// be sorted and lie inside `[a, b]`); used to isolate integrand kinks.
pub fn integrate_split<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    cuts: &[f64],
    cfg: &QuadConfig,
) -> Result<(f64, f64)> {
    let mut lo = a;
    let mut total = 0.0;
    let mut err = 0.0;
    for &c in cuts.iter().filter(|&&c| c > a && c < b) {
        let (v, e) = integrate(&mut f, lo, c, cfg)?;
        total += v;
        err += e;
        lo = c;
    }
    let (v, e) = integrate(&mut f, lo, b, cfg)?;
    Ok((total + v, err + e))
}
