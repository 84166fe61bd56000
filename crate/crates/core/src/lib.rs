//! Synthetic turbulence from a shallow quantum circuit.
//!
//! A layered U3/CX circuit is executed on a statevector; the amplitudes are
//! read as the Fourier coefficients of a two-component spinor on a periodic
//! lattice. Hydrodynamic fields (density, momentum, spin, velocity,
//! vorticity) follow from bilinear observables of that spinor, and the
//! [`diagnostics`] module measures the usual turbulence statistics on them.
//!
//! The pipeline, bottom to top:
//!
//! * [`lattice`] – qubit register ↔ wavenumber bookkeeping.
//! * [`circuit`] – shaping-factor angle sampling and gate lists.
//! * [`simulator`] – statevector execution and spinor assembly.
//! * [`spectral`] – FFT conventions shared by everything above the spinor.
//! * [`madelung`] – bilinear observables and physical fields.
//! * [`diagnostics`] – spectra, vorticity statistics, invariants, structure functions.
//! * [`config`], [`io`], [`pipeline`] – run configuration, dumps and the
//!   end-to-end stages behind the `turbogen` binary.
//! * [`verify`] – the desk-scale conformance suite.

pub mod circuit;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod lattice;
pub mod madelung;
pub mod pipeline;
pub mod simulator;
pub mod spectral;
pub mod synthetic;
pub mod verify;

pub use circuit::{build_circuit, sample_angles, shaping_factor, CircuitSpec, Gate, GateList, ShapingParams};
pub use error::{Error, Result};
pub use lattice::GridSpec;
pub use madelung::{FieldSet, KernelKind, SpinConvention};
pub use simulator::{prepare_spinor, run, SpinorField, StateVector};
