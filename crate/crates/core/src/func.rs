//! Catalog of real functions used as `u`, as the outer `F`, and as level
//! integrands.
//!
//! Every form evaluates a value; the locally absolutely continuous forms also
//! expose a Radon–Nikodym derivative. At kinks the left-continuous version is
//! used, so that `NegPart(a)` has derivative `-1{x <= a}`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::levels::ElementaryFunction;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FnForm {
    Constant(f64),
    Identity,
    Tanh,
    Square,
    Atan,
    /// Continuous, `F(0) = 0`; `slopes[j]` applies on `(b_{j}, b_{j+1}]`
    /// with `b_0 = -inf`, so `slopes.len() == breakpoints.len() + 1`.
    PiecewiseLinear { breakpoints: Vec<f64>, slopes: Vec<f64> },
    /// `x -> |x - a|`
    AbsShift(f64),
    /// `x -> (x - a)^- = max(a - x, 0)`
    NegPart(f64),
    /// `+1` on `(0, inf)`, `-1` on `(-inf, 0]`: the left-continuous derivative of `|x|`.
    Sign,
    /// `1{lo < x <= hi}`; either end may be infinite.
    Indicator { lo: f64, hi: f64 },
    Step(ElementaryFunction),
    /// `(-bound) v f ^ bound`
    Clamp { inner: Box<FnForm>, bound: f64 },
    Scaled { inner: Box<FnForm>, factor: f64 },
    Diff(Box<FnForm>, Box<FnForm>),
    /// The derivative version of an absolutely continuous form, as a function.
    Derivative(Box<FnForm>),
}

/// How derivatives are taken at kinks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Convention {
    #[default]
    LeftContinuous,
    /// Refuse to differentiate exactly at a kink.
    Strict,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FunctionDescriptor {
    pub form: FnForm,
    pub convention: Convention,
}

impl From<FnForm> for FunctionDescriptor {
    fn from(form: FnForm) -> Self {
        FunctionDescriptor { form, convention: Convention::LeftContinuous }
    }
}

impl FunctionDescriptor {
    pub fn identity() -> Self {
        FnForm::Identity.into()
    }
    pub fn constant(c: f64) -> Self {
        FnForm::Constant(c).into()
    }
    pub fn tanh() -> Self {
        FnForm::Tanh.into()
    }
    pub fn square() -> Self {
        FnForm::Square.into()
    }
    pub fn atan() -> Self {
        FnForm::Atan.into()
    }
    pub fn abs_shift(a: f64) -> Self {
        FnForm::AbsShift(a).into()
    }
    pub fn neg_part(a: f64) -> Self {
        FnForm::NegPart(a).into()
    }
    pub fn sign() -> Self {
        FnForm::Sign.into()
    }
    pub fn indicator(lo: f64, hi: f64) -> Self {
        FnForm::Indicator { lo, hi }.into()
    }

    pub fn piecewise_linear(breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::domain("slopes", "need one more slope than breakpoints"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::domain("breakpoints", "must be finite and strictly increasing"));
        }
        Ok(FnForm::PiecewiseLinear { breakpoints, slopes }.into())
    }

    pub fn strict(mut self) -> Self {
        self.convention = Convention::Strict;
        self
    }

    /// `(-n) v self ^ n`
    pub fn clamped(&self, bound: f64) -> Self {
        FunctionDescriptor {
            form: FnForm::Clamp { inner: Box::new(self.form.clone()), bound },
            convention: self.convention,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        FunctionDescriptor {
            form: FnForm::Scaled { inner: Box::new(self.form.clone()), factor },
            convention: self.convention,
        }
    }

    pub fn minus(&self, other: &FunctionDescriptor) -> Self {
        FunctionDescriptor {
            form: FnForm::Diff(Box::new(self.form.clone()), Box::new(other.form.clone())),
            convention: self.convention,
        }
    }

    /// The derivative version `F'` as a function in its own right.
    pub fn derivative_fn(&self) -> Result<Self> {
        if !self.form.is_differentiable() {
            return Err(Error::NotDifferentiable(self.form.name()));
        }
        Ok(FunctionDescriptor {
            form: FnForm::Derivative(Box::new(self.form.clone())),
            convention: self.convention,
        })
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.form.value(x)
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> Result<f64> {
        if self.convention == Convention::Strict && self.form.kinks().contains(&x) {
            return Err(Error::Breakpoint { at: x });
        }
        self.form.derivative(x)
    }

    pub fn is_identity(&self) -> bool {
        self.form == FnForm::Identity
    }

    pub fn is_differentiable(&self) -> bool {
        self.form.is_differentiable()
    }

    /// `true` for functions of the form `x ↦ αx + β`.
    pub fn is_affine(&self) -> bool {
        self.form.is_affine()
    }

    /// Inverse of a strictly increasing form, `±∞` outside its range; `None`
    /// for forms that are not known to be increasing.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        self.form.inverse(y)
    }

    pub fn name(&self) -> String {
        self.form.name()
    }

    /// Points where the value or the derivative may jump.
    pub fn kinks(&self) -> Vec<f64> {
        self.form.kinks()
    }
}

impl FnForm {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            FnForm::Constant(c) => *c,
            FnForm::Identity => x,
            FnForm::Tanh => x.tanh(),
            FnForm::Square => x * x,
            FnForm::Atan => x.atan(),
            FnForm::PiecewiseLinear { breakpoints, slopes } => pwl_value(breakpoints, slopes, x),
            FnForm::AbsShift(a) => (x - a).abs(),
            FnForm::NegPart(a) => (a - x).max(0.0),
            FnForm::Sign => {
                if x > 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            FnForm::Indicator { lo, hi } => {
                if *lo < x && x <= *hi {
                    1.0
                } else {
                    0.0
                }
            }
            FnForm::Step(e) => e.value(x),
            FnForm::Clamp { inner, bound } => inner.value(x).max(-bound).min(*bound),
            FnForm::Scaled { inner, factor } => factor * inner.value(x),
            FnForm::Diff(f, g) => f.value(x) - g.value(x),
            FnForm::Derivative(inner) => inner.derivative(x).unwrap_or(f64::NAN),
        }
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        Ok(match self {
            FnForm::Constant(_) => 0.0,
            FnForm::Identity => 1.0,
            FnForm::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            FnForm::Square => 2.0 * x,
            FnForm::Atan => 1.0 / (1.0 + x * x),
            FnForm::PiecewiseLinear { breakpoints, slopes } => slopes[breakpoints.partition_point(|&b| b < x)],
            FnForm::AbsShift(a) => {
                if x <= *a {
                    -1.0
                } else {
                    1.0
                }
            }
            FnForm::NegPart(a) => {
                if x <= *a {
                    -1.0
                } else {
                    0.0
                }
            }
            FnForm::Clamp { inner, bound } => {
                let v = inner.value(x);
                if v.abs() < *bound {
                    inner.derivative(x)?
                } else {
                    0.0
                }
            }
            FnForm::Scaled { inner, factor } => factor * inner.derivative(x)?,
            FnForm::Diff(f, g) => f.derivative(x)? - g.derivative(x)?,
            FnForm::Sign | FnForm::Indicator { .. } | FnForm::Step(_) | FnForm::Derivative(_) => {
                return Err(Error::NotDifferentiable(self.name()))
            }
        })
    }

    pub fn is_differentiable(&self) -> bool {
        match self {
            FnForm::Sign | FnForm::Indicator { .. } | FnForm::Step(_) | FnForm::Derivative(_) => false,
            FnForm::Clamp { inner, .. } | FnForm::Scaled { inner, .. } => inner.is_differentiable(),
            FnForm::Diff(f, g) => f.is_differentiable() && g.is_differentiable(),
            _ => true,
        }
    }

    pub fn is_affine(&self) -> bool {
        match self {
            FnForm::Constant(_) | FnForm::Identity => true,
            FnForm::Scaled { inner, .. } => inner.is_affine(),
            FnForm::Diff(f, g) => f.is_affine() && g.is_affine(),
            _ => false,
        }
    }

    pub fn inverse(&self, y: f64) -> Option<f64> {
        let half_pi = core::f64::consts::FRAC_PI_2;
        match self {
            FnForm::Identity => Some(y),
            FnForm::Tanh => Some(if y <= -1.0 {
                f64::NEG_INFINITY
            } else if y >= 1.0 {
                f64::INFINITY
            } else {
                y.atanh()
            }),
            FnForm::Atan => Some(if y <= -half_pi {
                f64::NEG_INFINITY
            } else if y >= half_pi {
                f64::INFINITY
            } else {
                y.tan()
            }),
            FnForm::Scaled { inner, factor } if *factor > 0.0 => inner.inverse(y / factor),
            _ => None,
        }
    }

    pub fn kinks(&self) -> Vec<f64> {
        let mut out = match self {
            FnForm::PiecewiseLinear { breakpoints, .. } => breakpoints.clone(),
            FnForm::AbsShift(a) | FnForm::NegPart(a) => alloc::vec![*a],
            FnForm::Sign => alloc::vec![0.0],
            FnForm::Indicator { lo, hi } => [*lo, *hi].into_iter().filter(|v| v.is_finite()).collect(),
            FnForm::Step(e) => e.grid().levels().to_vec(),
            FnForm::Clamp { inner, .. } | FnForm::Scaled { inner, .. } | FnForm::Derivative(inner) => inner.kinks(),
            FnForm::Diff(f, g) => {
                let mut k = f.kinks();
                k.extend(g.kinks());
                k
            }
            _ => Vec::new(),
        };
        out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        out.dedup();
        out
    }

    pub fn name(&self) -> String {
        match self {
            FnForm::Constant(c) => format!("const({c})"),
            FnForm::Identity => "identity".into(),
            FnForm::Tanh => "tanh".into(),
            FnForm::Square => "square".into(),
            FnForm::Atan => "atan".into(),
            FnForm::PiecewiseLinear { breakpoints, .. } => format!("pwl({} breakpoints)", breakpoints.len()),
            FnForm::AbsShift(a) => format!("abs({a})"),
            FnForm::NegPart(a) => format!("negpart({a})"),
            FnForm::Sign => "sign".into(),
            FnForm::Indicator { lo, hi } => format!("indicator({lo},{hi}]"),
            FnForm::Step(e) => format!("step({} cells)", e.coeffs().len()),
            FnForm::Clamp { inner, bound } => format!("clamp({}, {bound})", inner.name()),
            FnForm::Scaled { inner, factor } => format!("{factor}*{}", inner.name()),
            FnForm::Diff(f, g) => format!("{}-{}", f.name(), g.name()),
            FnForm::Derivative(inner) => format!("d/dx {}", inner.name()),
        }
    }
}

fn pwl_value(breakpoints: &[f64], slopes: &[f64], x: f64) -> f64 {
    // Integrate the slope function from 0 to x.
    let integral_to = |x: f64| -> f64 {
        let mut acc = 0.0;
        let mut prev = f64::NEG_INFINITY;
        for (j, &s) in slopes.iter().enumerate() {
            let next = breakpoints.get(j).copied().unwrap_or(f64::INFINITY);
            let lo = prev.max(0.0_f64.min(x));
            let hi = next.min(0.0_f64.max(x));
            if hi > lo {
                acc += s * (hi - lo);
            }
            prev = next;
        }
        acc
    };
    let v = integral_to(x);
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// A function of two real variables with its partial derivatives.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Fn2 {
    Constant(f64),
    /// `x + y`
    Sum,
    /// `x * y`
    Product,
    /// `f(x) * g(y)`
    Separable(FunctionDescriptor, FunctionDescriptor),
    /// `f(x) + g(y)`
    Additive(FunctionDescriptor, FunctionDescriptor),
    /// The `axis`-th partial derivative of `inner`, as a function.
    Partial { inner: Box<Fn2>, axis: usize },
}

impl Fn2 {
    pub fn value(&self, z: &[f64]) -> f64 {
        let (x, y) = (z[0], z[1]);
        match self {
            Fn2::Constant(c) => *c,
            Fn2::Sum => x + y,
            Fn2::Product => x * y,
            Fn2::Separable(f, g) => f.value(x) * g.value(y),
            Fn2::Additive(f, g) => f.value(x) + g.value(y),
            Fn2::Partial { inner, axis } => inner.partial(*axis, z).unwrap_or(f64::NAN),
        }
    }

    pub fn partial(&self, axis: usize, z: &[f64]) -> Result<f64> {
        if axis > 1 {
            return Err(Error::Dimension { expected: 2, got: axis + 1 });
        }
        let (x, y) = (z[0], z[1]);
        Ok(match self {
            Fn2::Constant(_) => 0.0,
            Fn2::Sum => 1.0,
            Fn2::Product => {
                if axis == 0 {
                    y
                } else {
                    x
                }
            }
            Fn2::Separable(f, g) => {
                if axis == 0 {
                    f.derivative(x)? * g.value(y)
                } else {
                    f.value(x) * g.derivative(y)?
                }
            }
            Fn2::Additive(f, g) => {
                if axis == 0 {
                    f.derivative(x)?
                } else {
                    g.derivative(y)?
                }
            }
            Fn2::Partial { .. } => return Err(Error::NotDifferentiable("partial derivative".into())),
        })
    }

    pub fn partial_fn(&self, axis: usize) -> Fn2 {
        Fn2::Partial { inner: Box::new(self.clone()), axis }
    }
}
