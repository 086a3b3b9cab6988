//! Curve fitting: a bounded Levenberg-Marquardt engine and the two
//! measurement models built on it.

pub mod lm;
pub mod models;
pub mod voigt;

pub use lm::{lm_fit, Bound, CurveProblem, LmOptions, LmReport, Residuals};
pub use models::{fit_odmr, fit_rabi, FitResult, OdmrFit, OdmrInit, RabiFit, RabiInit, VoigtParams};
pub use voigt::{faddeeva, normalized_voigt, voigt};
