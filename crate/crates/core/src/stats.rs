//! Summation and Monte Carlo summary statistics.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Mean, standard deviation and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    pub max_abs: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Summary { n, mean: f64::NAN, sd: f64::NAN, se: f64::NAN, max_abs: f64::NAN };
        }
        let mean = compensated_sum(xs.iter().copied()) / n as f64;
        let var = if n > 1 {
            compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64
        } else {
            0.0
        };
        let sd = var.sqrt();
        let max_abs = xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        Summary { n, mean, sd, se: sd / (n as f64).sqrt(), max_abs }
    }
}

/// Outcome of a one-sample z-test of zero mean.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ZTest {
    pub z: f64,
    pub mean: f64,
    pub se: f64,
    pub pass: bool,
}

/// Z-statistic of the sample mean against zero; passes iff `|z| <= threshold`.
///
/// A sample with zero variance passes only when its mean is exactly zero.
pub fn z_test(samples: &[f64], threshold: f64, min_samples: usize) -> Result<ZTest> {
    if samples.len() < min_samples {
        return Err(Error::TooFewSamples { got: samples.len(), need: min_samples });
    }
    let s = Summary::of(samples);
    if s.se == 0.0 {
        let z = if s.mean == 0.0 { 0.0 } else { f64::INFINITY.copysign(s.mean) };
        return Ok(ZTest { z, mean: s.mean, se: 0.0, pass: s.mean == 0.0 });
    }
    let z = s.mean / s.se;
    Ok(ZTest { z, mean: s.mean, se: s.se, pass: z.abs() <= threshold })
}
