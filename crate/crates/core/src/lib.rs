//! Quantum-photonic model of the transverse electro-optic effect in layered
//! organic crystals.
//!
//! Photons cross a stack of molecular layers and meet one π-electron per
//! layer. Each electron sits on a Kepler ellipse and delays the photon by an
//! attosecond-scale amount that depends on where on the orbit it was found.
//! The summed delays give refractive indices and phase retardation; an
//! applied field deforms the ellipse and shifts the retardation.
//!
//! Modules:
//! - [`crystal`]: unit cell, layer stack, physical constants
//! - [`orbit`]: Kepler time map, dwell-time PDF, sampler, field perturbation
//! - [`huckel`]: Hückel π-orbitals and density asymmetry
//! - [`transport`]: the Monte-Carlo engine
//! - [`classical`]: index-ellipsoid and Sellmeier relations
//! - [`calibration`]: parameter fitting
//! - [`config`]: configuration and data files

pub mod calibration;
pub mod classical;
pub mod config;
pub mod crystal;
pub mod error;
pub mod huckel;
pub mod orbit;
pub mod rng;
mod stats;
pub mod transport;

pub use classical::{IndexEllipsoid, Polarization, SellmeierSet};
pub use crystal::{Degrees, LayerStack, PhysicalConstants, UnitCell};
pub use error::{ErrorKind, QpmError, Result};
pub use orbit::{FieldPerturbation, OrbitShape};
pub use transport::{BeamSpec, SimulationConfig, SimulationResult};

pub use stats::{mean_and_stderr, pairwise_sum};
