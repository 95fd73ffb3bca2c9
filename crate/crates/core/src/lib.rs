//! Open-system dynamics of a periodically driven qubit coupled to a
//! Lorentz-Drude bosonic bath.
//!
//! Two solvers are provided for the reduced dynamics: a hierarchical
//! equations of motion (HEOM) integrator, which is exact for the bath's
//! exponential correlation function, and a Floquet-Lindblad master equation
//! built from the Fourier components of the coupling operator in the Floquet
//! basis. On top of these the [`analysis`] module computes trace-distance
//! non-Markovianity, envelope relaxation times and amplitude sweeps that tie
//! both quantities to quasienergy crossings.
//!
//! Units: `ħ = k_B = 1`, frequencies in units of the qubit splitting `ω₀`,
//! times in units of `1/ω₀`.

// `!(x > 0.0)` is used on purpose so that NaN lands in the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod bath;
pub mod config;
pub mod error;
pub mod floquet;
pub mod heom;
pub mod lindblad;
pub mod maps;
pub mod ode;
pub mod output;
pub mod quadrature;
pub mod qubit;
pub mod trajectory;

pub use bath::{BathModel, ExponentialSeries};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use floquet::{CoefficientTable, DriveSpec, FloquetSolution};
pub use heom::{HeomDiagnostics, HeomSettings};
pub use lindblad::{DissipatorSpec, JumpChannel, RelaxationTimes};
pub use maps::{DynamicalMaps, Superop};
pub use qubit::{BlochVector, DensityMatrix, Mat2};
pub use trajectory::Trajectory;

/// Version string embedded in every output file.
pub const VERSION: &str = concat!("floqmem ", env!("CARGO_PKG_VERSION"));
