//! Physical learning agent: a single-photon or weak-coherent probe, a
//! population-inverted Raman detector, and a gradient-descent learner that
//! tunes its detector mode to an unknown optical element while tracking the
//! work and free energy exchanged.

pub mod detector;
pub mod error;
pub mod fock_oracle;
pub mod harness;
pub mod learner;
pub mod modes;
pub mod quadrature;
pub mod rng;
pub mod source;
pub mod thermo;

pub use detector::{DetectionModel, DetectorParams};
pub use error::{Error, Result};
pub use learner::{AgentConfig, Bounds, GradientBackend, LearningRecord, UpdateSign, WorldConfig};
pub use modes::{ModeParams, Overlap, TemporalMode};
pub use rng::RngStreamKey;
pub use source::{BathParams, ControlEnvelope};
pub use thermo::{ScaledThermo, ThermoSummary};
