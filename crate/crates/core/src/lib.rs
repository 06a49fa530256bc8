//! Hitting-time statistics for shift-invariant measures on symbolic systems.

pub mod ball;
pub mod error;
pub mod measures;
pub mod numeric;
pub mod open_system;
pub mod rational;
pub mod recurrence;
pub mod symbolic;

pub use ball::{Ball, Metric};
pub use error::{HitError, Result};
pub use measures::{DecayClass, MeasureKind, MeasureModel, PhiProfile};
pub use open_system::{compile_hole, OpenChain, SurvivalCurve};
pub use rational::Rational;
pub use symbolic::{HoleSpec, PointSpec, Side, Symbol, SymbolicSystem, Word};
