//! Quasi-static microwave magnetic field of the waveguide, its
//! characteristic impedance and drive conversion.
//!
//! The cross-section is much smaller than the guided wavelength across the
//! whole 70 MHz to 3 GHz band, so the field is computed as the magnetostatic
//! field of the line current per unit length. Results are therefore
//! independent of the drive frequency; [`DriveConditions::frequency_hz`] is
//! carried for bookkeeping and band warnings only.

mod field;
mod impedance;

pub use field::{
    b_field_at, depth_profile, element_field, field_map, line_scan, nearest_element_distance,
    DepthProfile, FieldMap, FieldModel, FieldSample, Grid, MIN_DISTANCE_UM, MU_0,
};
pub use impedance::{
    cpw_impedance, ellip_k, ellip_k_complement, power_to_current, reflection_estimate,
    CpwImpedance, DriveConditions, REFLECTION_FLOOR_DB, VALIDATED_BAND_HZ,
};
