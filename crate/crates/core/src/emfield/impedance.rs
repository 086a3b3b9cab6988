//! Characteristic impedance of a coplanar waveguide on a dielectric slab of
//! finite thickness (conformal mapping), plus drive and mismatch helpers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::FieldError;
use crate::geometry::WaveguideGeometry;

/// Band over which the quasi-static field picture has been checked against
/// full-wave results (Hz).
pub const VALIDATED_BAND_HZ: (f64, f64) = (70e6, 3e9);

/// Reflection reported for a perfect match (dB).
pub const REFLECTION_FLOOR_DB: f64 = -200.0;

const AGM_TOL: f64 = 1e-12;

/// Complete elliptic integral of the first kind given the complementary
/// modulus `kc = sqrt(1 - k^2)`: `K = pi / (2 agm(1, kc))`.
///
/// Taking the complement as input keeps full precision for moduli close to
/// zero or one.
pub fn ellip_k_complement(kc: f64) -> Result<f64, FieldError> {
    if !(kc > 0.0 && kc <= 1.0) {
        return Err(FieldError::EllipticDomain((1.0 - kc * kc).max(0.0).sqrt()));
    }
    let (mut a, mut b) = (1.0_f64, kc);
    for _ in 0..64 {
        if (a - b).abs() <= AGM_TOL * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    Ok(PI / (2.0 * a))
}

/// Complete elliptic integral of the first kind `K(k)`, `0 <= k < 1`.
pub fn ellip_k(k: f64) -> Result<f64, FieldError> {
    if !(0.0..1.0).contains(&k) {
        return Err(FieldError::EllipticDomain(k));
    }
    ellip_k_complement(((1.0 - k) * (1.0 + k)).sqrt())
}

/// `sinh(x) / sinh(y)` for `0 < x <= y` without overflow.
fn sinh_ratio(x: f64, y: f64) -> f64 {
    if y < 20.0 {
        x.sinh() / y.sinh()
    } else {
        (x - y).exp() * (-(-2.0 * x).exp_m1()) / (-(-2.0 * y).exp_m1())
    }
}

/// Impedance and effective permittivity of the unslit cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpwImpedance {
    pub z0_ohm: f64,
    pub eps_eff: f64,
}

/// Quasi-TEM characteristic impedance of the coplanar waveguide, ignoring
/// the slit and the finite ground width.
pub fn cpw_impedance(geometry: &WaveguideGeometry) -> Result<CpwImpedance, FieldError> {
    let g = geometry.validate()?;
    let a = g.signal_width_um / 2.0;
    let b = a + g.gap_width_um;
    let h = g.substrate_thickness_um;

    // air-side modulus
    let k0 = a / b;
    let k0c = ((b - a) * (b + a)).sqrt() / b;
    // substrate-side modulus
    let (xa, xb) = (PI * a / (2.0 * h), PI * b / (2.0 * h));
    let k1 = sinh_ratio(xa, xb);
    // 1 - k1^2 = sinh(xb - xa) sinh(xb + xa) / sinh(xb)^2
    let k1c = (sinh_ratio(xb - xa, xb) * sinh_ratio(xb + xa, xb)).sqrt();

    let k_k0 = ellip_k_complement(k0c)?;
    let k_k0c = ellip_k_complement(k0)?;
    let k_k1 = ellip_k_complement(k1c)?;
    let k_k1c = ellip_k_complement(k1)?;

    let eps_eff = 1.0 + 0.5 * (g.eps_r - 1.0) * (k_k1 / k_k1c) * (k_k0c / k_k0);
    let z0_ohm = 30.0 * PI / eps_eff.sqrt() * (k_k0c / k_k0);
    Ok(CpwImpedance { z0_ohm, eps_eff })
}

/// Continuous-wave drive applied to the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConditions {
    pub input_power_w: f64,
    pub frequency_hz: f64,
    pub reference_impedance_ohm: f64,
}

impl Default for DriveConditions {
    fn default() -> Self {
        Self { input_power_w: 1.0, frequency_hz: 70e6, reference_impedance_ohm: 50.0 }
    }
}

impl DriveConditions {
    pub fn with_power(input_power_w: f64) -> Self {
        Self { input_power_w, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if !(self.input_power_w.is_finite() && self.input_power_w >= 0.0) {
            return Err(FieldError::Precondition(format!(
                "input power must be >= 0 W, got {}",
                self.input_power_w
            )));
        }
        if !(self.reference_impedance_ohm > 0.0) {
            return Err(FieldError::Precondition(format!(
                "reference impedance must be > 0, got {}",
                self.reference_impedance_ohm
            )));
        }
        Ok(())
    }

    /// The model is frequency independent; outside this band that
    /// approximation is unchecked and callers should warn.
    pub fn in_validated_band(&self) -> bool {
        (VALIDATED_BAND_HZ.0..=VALIDATED_BAND_HZ.1).contains(&self.frequency_hz)
    }
}

/// Peak current of a matched travelling wave carrying `drive.input_power_w`
/// on a line of impedance `z0_ohm`.
pub fn power_to_current(drive: &DriveConditions, z0_ohm: f64) -> Result<f64, FieldError> {
    drive.validate()?;
    if !(z0_ohm > 0.0) {
        return Err(FieldError::Precondition(format!("z0 must be > 0, got {z0_ohm}")));
    }
    Ok((2.0 * drive.input_power_w / z0_ohm).sqrt())
}

/// Lumped mismatch reflection `20 log10 |Γ|` in dB, floored at
/// [`REFLECTION_FLOOR_DB`].
pub fn reflection_estimate(z_line_ohm: f64, z_ref_ohm: f64) -> Result<f64, FieldError> {
    if !(z_line_ohm > 0.0 && z_ref_ohm > 0.0) {
        return Err(FieldError::Precondition(format!(
            "impedances must be > 0, got {z_line_ohm} and {z_ref_ohm}"
        )));
    }
    let gamma = (z_line_ohm - z_ref_ohm).abs() / (z_line_ohm + z_ref_ohm);
    if gamma == 0.0 {
        return Ok(REFLECTION_FLOOR_DB);
    }
    Ok((20.0 * gamma.log10()).max(REFLECTION_FLOOR_DB))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// K(k) by composite Gauss-Legendre on the smooth integrand
    /// 1/sqrt(1 - k^2 sin^2 t), independent of the AGM path.
    fn ellip_k_quadrature(k: f64) -> f64 {
        // 5-point Gauss-Legendre nodes/weights on [-1, 1]
        const X: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let n = 4000;
        let h = PI / 2.0 / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let mid = (i as f64 + 0.5) * h;
            for (x, w) in X.iter().zip(W) {
                let t = mid + 0.5 * h * x;
                s += w * 0.5 * h / (1.0 - k * k * t.sin().powi(2)).sqrt();
            }
        }
        s
    }

    #[test]
    fn agm_matches_quadrature() {
        for k in [0.0, 0.1, 0.5, 0.5556, 0.9, 0.99] {
            let agm = ellip_k(k).unwrap();
            let quad = ellip_k_quadrature(k);
            assert!((agm - quad).abs() < 1e-10 * quad, "k={k}: {agm} vs {quad}");
        }
        assert!((ellip_k(0.0).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!(ellip_k(1.0).is_err());
        assert!(ellip_k(-0.1).is_err());
    }

    #[test]
    fn default_impedance_near_fifty_ohm() {
        let z = cpw_impedance(&WaveguideGeometry::default()).unwrap();
        assert!((46.5..=53.5).contains(&z.z0_ohm), "{z:?}");
        assert!(z.eps_eff > 1.0 && z.eps_eff < (9.66 + 1.0) / 2.0);
    }

    #[test]
    fn vacuum_substrate_matches_infinite_slab_closed_form() {
        let g = WaveguideGeometry { eps_r: 1.0, ..Default::default() };
        let z = cpw_impedance(&g).unwrap();
        // 30 pi K(k')/K(k) with k = 50/90, integrals by quadrature
        let k: f64 = 50.0 / 90.0;
        let kc = (1.0 - k * k).sqrt();
        let oracle = 30.0 * PI * ellip_k_quadrature(kc) / ellip_k_quadrature(k);
        assert!((z.z0_ohm - oracle).abs() < 1e-8 * oracle);
        assert_eq!(z.eps_eff, 1.0);
        let scaled = 50.0 * ((9.66_f64 + 1.0) / 2.0).sqrt();
        assert!((z.z0_ohm - scaled).abs() < 0.1 * scaled, "{} vs {scaled}", z.z0_ohm);
    }

    #[test]
    fn impedance_falls_with_permittivity() {
        let mut last = f64::INFINITY;
        for eps_r in [1.0, 2.0, 4.0, 9.66, 12.0, 30.0] {
            let g = WaveguideGeometry { eps_r, ..Default::default() };
            let z = cpw_impedance(&g).unwrap().z0_ohm;
            assert!(z < last);
            last = z;
        }
    }

    #[test]
    fn slit_does_not_change_impedance() {
        let a = cpw_impedance(&WaveguideGeometry::default()).unwrap();
        let b = cpw_impedance(&WaveguideGeometry { slit_width_um: 0.0, ..Default::default() })
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn thin_substrate_stays_finite() {
        let g = WaveguideGeometry { substrate_thickness_um: 1.0, ..Default::default() };
        let z = cpw_impedance(&g).unwrap();
        assert!(z.z0_ohm.is_finite() && z.z0_ohm > 0.0);
    }

    #[test]
    fn drive_current() {
        let i = power_to_current(&DriveConditions::with_power(1.0), 50.0).unwrap();
        assert!((i - 0.2).abs() < 1e-15);
        assert_eq!(power_to_current(&DriveConditions::with_power(0.0), 50.0).unwrap(), 0.0);
        let i4 = power_to_current(&DriveConditions::with_power(4.0), 50.0).unwrap();
        assert!((i4 - 0.4).abs() < 1e-15);
        assert!(power_to_current(&DriveConditions::with_power(1.0), 0.0).is_err());
        assert!(power_to_current(&DriveConditions::with_power(-1.0), 50.0).is_err());
    }

    #[test]
    fn band_check() {
        let mut d = DriveConditions::default();
        assert!(d.in_validated_band());
        d.frequency_hz = 3e9;
        assert!(d.in_validated_band());
        d.frequency_hz = 10e9;
        assert!(!d.in_validated_band());
    }

    #[test]
    fn reflection_values() {
        assert_eq!(reflection_estimate(50.0, 50.0).unwrap(), REFLECTION_FLOOR_DB);
        let r = reflection_estimate(53.5, 50.0).unwrap();
        let oracle = 20.0 * (3.5_f64 / 103.5).log10();
        assert!((r - oracle).abs() < 1e-12);
        assert!((r + 29.4).abs() < 0.05);
        let r = reflection_estimate(100.0, 50.0).unwrap();
        assert!((r - 20.0 * (1.0_f64 / 3.0).log10()).abs() < 1e-12);
        assert!((r + 9.54).abs() < 0.01);
        assert!(reflection_estimate(0.0, 50.0).is_err());
    }
}
