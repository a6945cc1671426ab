//! Stability certification and simulation for Lur'e systems
//! `ẋ = Ax + Bu, y = Cx, u = −ψ(y)` with piecewise continuous, possibly
//! discontinuous, decentralized feedback.
//!
//! Modules build bottom-up: [`densemat`] and [`pwfun`] supply linear algebra
//! and scalar nonlinearities, [`luresys`] the plant and its Krasovskii
//! regularization, [`lyapunov`] and [`certify`] the nonsmooth Lyapunov
//! analysis, [`krasim`] the simulator, and [`presets`] reference systems.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod boxqp;
pub mod certify;
pub mod densemat;
pub mod error;
pub mod krasim;
pub mod luresys;
pub mod lyapunov;
pub mod presets;
pub mod pwfun;

pub use batch::Execution;
pub use certify::{Certificate, CertificateKind, StabilityReport, Verdict};
pub use densemat::Matrix;
pub use error::{Error, Result};
pub use krasim::{SimOptions, Trajectory};
pub use luresys::{IntervalBox, LureSystem};
pub use lyapunov::{LieSet, LyapunovData};
pub use pwfun::{Expr, Interval, PiecewiseFn, Term};
