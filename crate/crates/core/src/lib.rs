//! Pathwise extended Itô calculus for simulated symmetric Markov processes.
//!
//! The crate builds every term of the extended Itô decomposition
//! `F(u(X_t)) = F(u(X_0)) + M_t(F,u) + Q_t(F,u) + V_t(F,u)` on discretized
//! sample paths: the continuous martingale part, the zero-energy part obtained
//! from Nakao's operator through time reversal and level integration, and the
//! compensated and bounded-variation jump parts. Companion modules expose the
//! local time of `u(X)`, the occupation density formula and the
//! multidimensional box-increment calculus.
//!
//! The crate is `no_std` (it needs `alloc`). Enable `parallel` to run Monte
//! Carlo map-reduce over seeds with rayon; results are identical either way.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod calculus;
pub mod error;
pub mod func;
pub mod harness;
pub mod jumps;
pub mod levels;
pub mod local_time;
pub mod mc;
pub mod nakao;
pub mod process;
pub mod quad;
pub mod stats;

pub use calculus::{AfPath, EvalGrid, FukushimaParts};
pub use error::{Error, Result};
pub use func::{Convention, Fn2, FnForm, FunctionDescriptor};
pub use levels::{ElementaryFunction, ElementaryFunction2D, LevelGrid};
pub use nakao::MafBuilder;
pub use process::{JumpLaw, JumpRecord, LevyMeasure, ProcessKind, ProcessSpec, SamplePath};
