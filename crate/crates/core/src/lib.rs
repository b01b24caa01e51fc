//! Compressive matched-field processing.
//!
//! A source in a Pekeris waveguide is localized from a vertical array by
//! comparing its observation against replica Green's functions over a
//! range/depth grid. The compressive variant replaces the N replica fields
//! with M ≤ N random combinations `Φ G` computed once up front, so each
//! new observation costs `O(M)` per grid point instead of `O(N)`.
//!
//! Modules follow the processing chain: [`waveguide`] (modes, grid, replica
//! fields), [`sensing`] (synthetic data, SNR), [`compression`] (random
//! orthoprojections), [`ambiguity`] (Bartlett and MVDR surfaces),
//! [`experiments`] (Monte Carlo studies) and [`io`] (cache and CSV).

pub mod ambiguity;
pub mod compression;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod seeds;
pub mod sensing;
pub mod waveguide;

pub use ambiguity::{locate, AmbiguitySurface, Variant};
pub use compression::{compress_field, draw_encoder, Encoder, Projection};
pub use error::{Error, Result};
pub use experiments::{Band, EllipticalMetric, Estimator, Scenario, ScenarioConfig, TrialRecord};
pub use linalg::C64;
pub use sensing::{NoiseModel, Observation, SourceSpec};
pub use waveguide::{
    greens_field, solve_modes, Environment, GreensField, Location, ModeSet, ReceiverArray, SearchGrid,
};
