//! Stability analysis and stabilizing-parameter synthesis for linear delay
//! differential equations
//!
//! ```text
//! x'(t) = A_0(θ) x(t) + Σ_i A_i(θ) x(t - τ_i)
//! ```
//!
//! with coefficient matrices affine in a parameter vector `θ` and rational
//! delays `τ_i`.
//!
//! The pipeline:
//!
//! 1. [`stencil`] builds backward finite-difference weights from moment conditions.
//! 2. [`disc`] turns the DDE into a block recurrence `u(t) = M(θ) u(t - Lδt)`
//!    over windows of `L` samples.
//! 3. [`lmi`] expands the contraction condition into
//!    `Q + δt E(θ) + δt² F(θ) ≻ 0`, classifies the constant term `Q`
//!    (also through the reduced `(m-1)×(m-1)` test), and extracts its null space.
//! 4. [`sdp`] maximizes `λ_min(Vᵀ E(θ) V)` over a parameter box and returns a verdict.
//! 5. [`oracle`] supplies independent checks: spectral radius of `M(θ)`,
//!    time-domain simulation, and a root scan of the characteristic function.
//!
//! [`cli`] holds the config format, the command implementations used by the
//! `dde-stab` binary, and the CSV/SVG emitters. The crate's `examples/`
//! directory has one runnable program per capability.

// NaN-rejecting guards and index loops over matrix entries are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod disc;
pub mod error;
pub mod linalg;
pub mod lmi;
pub mod model;
pub mod oracle;
pub mod sdp;
pub mod stencil;
pub mod verify;

pub use disc::Discretization;
pub use error::{Error, Result};
pub use lmi::{Definiteness, GapForm, GramGap, LmiSystem};
pub use model::{AffineMatrix, DdeSystem, HigherOrderSystem, Rational};
pub use sdp::{analyze, AnalyzeOptions, ParamBox, StabilityCase, StabilityVerdict};
pub use stencil::{Stencil, StencilKind};
