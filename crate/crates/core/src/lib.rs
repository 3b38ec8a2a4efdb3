//! Evaluation of population health and productivity distributions.
//!
//! The crate covers the QALY, PALY and hybrid evaluation families, a sampled
//! axiom-conformance engine, parameter threshold search and person trade-off
//! elicitation sessions.

pub mod axioms;
pub mod elicitation;
pub mod error;
pub mod evaluators;
pub mod io;
pub mod model;
pub mod report;
pub mod sensitivity;

pub use error::{AxiomError, ElicitationError, EvalError, IoError, ModelError, SensitivityError};
pub use evaluators::{EvaluatorSpec, FamilyId, Preference};
pub use model::{example1, example_registry, Distribution, HealthRegistry, HealthStateId, Profile};
