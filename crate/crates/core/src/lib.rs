//! Design and analysis toolkit for slit-loaded coplanar waveguides driving
//! S=3/2 colour-centre spins.
//!
//! * [`geometry`]: cross-section description and current-element layout.
//! * [`emfield`]: quasi-static microwave field, impedance and drive.
//! * [`spinphys`]: spin Hamiltonian, resonance lines, ODMR and Rabi synthesis.
//! * [`fitting`]: Voigt profile, damped least squares, ODMR and Rabi fits.
//! * [`analysis`]: Rabi-to-field conversion, static-field inversion and
//!   profile comparison.
//! * [`io`]: CSV and JSON file formats.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod emfield;
pub mod error;
pub mod fitting;
pub mod geometry;
pub mod io;
pub mod spinphys;

pub use error::{AnalysisError, FieldError, FitError, FormatError, GeometryError, SpinError};
