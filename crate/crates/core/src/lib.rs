//! Driven three-mode optomechanics: mean-field dynamics, exceptional point
//! and instability threshold of the pumped state, and parametric (Floquet)
//! gain under a periodically modulated drive.
//!
//! Everything is dimensionless, in units of the first optical frequency.

pub mod error;
pub mod floquet;
pub mod integrator;
pub mod model;
pub mod ode;
pub mod roots;
pub mod sweep;

pub use error::{BracketError, ModelError};
pub use floquet::{FloquetOptions, FloquetResult, LinearizedSystem, Observable, PumpResponse};
pub use integrator::{ClassifyOptions, Method, SolverOptions, SteadyClass, Trajectory};
pub use model::{
    DriveModulation, EigenPair, ModeState, PhaseMode, Regime, SystemParams, ThreeWaveDrive,
};
pub use num_complex::Complex64;
pub use sweep::{Axis, ScanKind, ScanQuantity, ScanSpec, ScanTable, Spacing, SteadySettings, SweepError, TongueGrid};
