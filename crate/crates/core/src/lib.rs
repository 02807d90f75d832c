//! Classical and quantum dynamics of a diatomic molecule driven by a
//! circularly polarized field near vibrational resonance.

pub mod classical;
pub mod error;
pub mod evolution;
pub mod observables;
pub mod ode;
pub mod output;
pub mod params;
pub mod quantum;
pub mod runner;

pub use error::{Error, Result};
pub use params::{geo_preset, CodeUnits, ModelParameters};
