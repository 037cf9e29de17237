//! Modal Galerkin toolkit for pointwise stabilization of a coupled
//! string-beam system.
//!
//! The pipeline is: [`SystemConfig`] → per-mode adjoint solutions
//! ([`adjoint`]) → weighted controllability Gramian ([`gramian`]) →
//! feedback and closed-loop simulation ([`closed_loop`]).

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the matrix formulas
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::excessive_precision)]

pub mod adjoint;
pub mod closed_loop;
pub mod error;
pub mod gramian;
pub mod linalg;
pub mod modal;
pub mod quadrature;
pub mod real;

pub use adjoint::{AdjointMode, AdjointModeSolution, ModeSystem};
pub use closed_loop::{
    ClosedLoop, DecayFit, EnergySeries, GalerkinModel, IntegrationMethod, NaturalEnergyForm, TrajectoryRecord,
};
pub use error::{Error, Result};
pub use gramian::{FeedbackOperator, FeedbackSign, Gramian, GramianSpec, HumControl, WeightKind};
pub use modal::{Coupling, DegeneracyReport, ModalState, StateSpaceSpec, SystemConfig, WeightedSpaceSpec};
pub use real::{Dd, Real};

pub use nalgebra::{DMatrix, DVector};
