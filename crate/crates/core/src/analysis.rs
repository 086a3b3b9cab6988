//! Rabi-to-field conversion, static-field inversion and normalized profile
//! comparison.

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::spinphys::SpinParams;

/// Prior interval for `D/h` used to flag plausible branches, MHz.
pub const D_PRIOR_MHZ: (f64, f64) = (30.0, 40.0);

/// In-plane drive amplitude (G) that produces Rabi frequency `f_rabi_mhz`
/// on the `|3/2> <-> |1/2>` transition.
pub fn rabi_to_field(params: &SpinParams, f_rabi_mhz: f64) -> Result<f64, AnalysisError> {
    if !(f_rabi_mhz >= 0.0 && f_rabi_mhz.is_finite()) {
        return Err(AnalysisError::Precondition(format!(
            "Rabi frequency must be >= 0, got {f_rabi_mhz}"
        )));
    }
    Ok(f_rabi_mhz / (3.0_f64.sqrt() * params.gyro_mhz_per_g()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// Zeeman shift below the zero-field splitting, `g muB B0 < 2D`.
    LowField,
    HighField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceInversion {
    pub branch: Branch,
    pub b0_g: f64,
    pub d_mhz: f64,
    /// Whether `d_mhz` lies in the supplied prior; absent without a prior.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plausible: Option<bool>,
}

/// Both `(B0, D)` solutions reproducing an axial resonance pair. The
/// absolute value in the lower line makes the inversion two-valued; neither
/// branch is preferred here.
pub fn b0_and_d_from_resonances(
    params: &SpinParams,
    f_plus_mhz: f64,
    f_minus_mhz: f64,
    d_prior_mhz: Option<(f64, f64)>,
) -> Result<[ResonanceInversion; 2], AnalysisError> {
    if !(f_minus_mhz >= 0.0 && f_plus_mhz.is_finite()) {
        return Err(AnalysisError::Precondition(format!(
            "resonances must be finite and >= 0, got f+ = {f_plus_mhz}, f- = {f_minus_mhz}"
        )));
    }
    if f_plus_mhz < f_minus_mhz {
        return Err(AnalysisError::Precondition(format!(
            "f+ ({f_plus_mhz} MHz) is below f- ({f_minus_mhz} MHz)"
        )));
    }
    let gamma = params.gyro_mhz_per_g();
    let sum = f_plus_mhz + f_minus_mhz;
    let diff = f_plus_mhz - f_minus_mhz;
    let flag = |d: f64| d_prior_mhz.map(|(lo, hi)| (lo..=hi).contains(&d));
    let low = ResonanceInversion {
        branch: Branch::LowField,
        b0_g: diff / (2.0 * gamma),
        d_mhz: sum / 4.0,
        plausible: flag(sum / 4.0),
    };
    let high = ResonanceInversion {
        branch: Branch::HighField,
        b0_g: sum / (2.0 * gamma),
        d_mhz: diff / 4.0,
        plausible: flag(diff / 4.0),
    };
    Ok([low, high])
}

/// Field amplitude along a lateral line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldProfile {
    pub positions_um: Vec<f64>,
    pub values: Vec<f64>,
    /// Raw value at `x = 0` that was divided out, if normalized.
    pub normalization_reference: Option<f64>,
}

impl FieldProfile {
    pub fn new(positions_um: Vec<f64>, values: Vec<f64>) -> Result<Self, AnalysisError> {
        if positions_um.len() != values.len() || positions_um.is_empty() {
            return Err(AnalysisError::Precondition(format!(
                "profile needs matching non-empty columns, got {} positions and {} values",
                positions_um.len(),
                values.len()
            )));
        }
        if !positions_um.windows(2).all(|w| w[1] > w[0]) {
            return Err(AnalysisError::Precondition(
                "profile positions must be strictly increasing".into(),
            ));
        }
        if !positions_um.iter().chain(&values).all(|v| v.is_finite()) {
            return Err(AnalysisError::Precondition("non-finite value in profile".into()));
        }
        Ok(Self { positions_um, values, normalization_reference: None })
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization_reference.is_some()
    }

    /// Linear interpolation; `None` outside the sampled range.
    pub fn interpolate(&self, x_um: f64) -> Option<f64> {
        interpolate(&self.positions_um, &self.values, x_um)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let (first, last) = (*xs.first()?, *xs.last()?);
    if !(x >= first && x <= last) {
        return None;
    }
    let i = xs.partition_point(|&v| v < x);
    if xs[i] == x {
        return Some(ys[i]);
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    let t = (x - x0) / (x1 - x0);
    Some(ys[i - 1] + t * (ys[i] - ys[i - 1]))
}

/// Divides every value by the (interpolated) value at `x = 0`. Already
/// normalized profiles are returned unchanged.
pub fn normalize_profile(profile: &FieldProfile) -> Result<FieldProfile, AnalysisError> {
    if profile.is_normalized() {
        return Ok(profile.clone());
    }
    let reference = profile.interpolate(0.0).ok_or_else(|| {
        AnalysisError::Precondition(format!(
            "profile [{}, {}] um does not bracket x = 0",
            profile.positions_um[0],
            profile.positions_um[profile.positions_um.len() - 1]
        ))
    })?;
    let scale = profile.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if reference == 0.0 || reference.abs() <= 1e-12 * scale {
        return Err(AnalysisError::ZeroReference);
    }
    Ok(FieldProfile {
        positions_um: profile.positions_um.clone(),
        values: profile.values.iter().map(|v| v / reference).collect(),
        normalization_reference: Some(reference),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonPoint {
    pub x_um: f64,
    pub measured: f64,
    pub simulated: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileComparison {
    pub rms_deviation: f64,
    pub max_deviation: f64,
    pub points: Vec<ComparisonPoint>,
}

/// Resamples `simulated` onto the measured positions and reports the rms
/// and max absolute deviation. Both profiles are expected to be
/// normalized already.
pub fn compare_profiles(
    measured: &FieldProfile,
    simulated: &FieldProfile,
) -> Result<ProfileComparison, AnalysisError> {
    let lo = simulated.positions_um[0];
    let hi = simulated.positions_um[simulated.positions_um.len() - 1];
    let points = measured
        .positions_um
        .iter()
        .zip(&measured.values)
        .map(|(&x, &m)| {
            let s = simulated.interpolate(x).ok_or(AnalysisError::OutOfRange(x, lo, hi))?;
            Ok(ComparisonPoint { x_um: x, measured: m, simulated: s, deviation: m - s })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    let n = points.len() as f64;
    let rms_deviation = (points.iter().map(|p| p.deviation.powi(2)).sum::<f64>() / n).sqrt();
    let max_deviation = points.iter().fold(0.0_f64, |m, p| m.max(p.deviation.abs()));
    Ok(ProfileComparison { rms_deviation, max_deviation, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinphys::{f_minus, f_plus, rabi_frequency};
    use proptest::prelude::*;

    #[test]
    fn rabi_conversion() {
        let p = SpinParams::default();
        // 4.848 MHz is 1 G with the rounded 2.7993 MHz/G gyromagnetic ratio
        let b = rabi_to_field(&p, 4.848).unwrap();
        assert!((b - 1.0).abs() < 5e-4, "{b}");
        assert_eq!(rabi_to_field(&p, 0.0).unwrap(), 0.0);
        assert!(rabi_to_field(&p, -1.0).is_err());
        let f = rabi_frequency(&p, 2.5).unwrap();
        assert!((rabi_to_field(&p, f).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn resonance_inversion_examples() {
        let p = SpinParams::default();
        let [_, high] = b0_and_d_from_resonances(&p, 431.1, 291.1, None).unwrap();
        assert!((high.b0_g - 129.0).abs() < 0.05 && (high.d_mhz - 35.0).abs() < 1e-9);
        assert_eq!(high.plausible, None);
        let [low, _] = b0_and_d_from_resonances(&p, 70.0, 70.0, Some(D_PRIOR_MHZ)).unwrap();
        assert_eq!(low.b0_g, 0.0);
        assert_eq!(low.d_mhz, 35.0);
        assert_eq!(low.plausible, Some(true));
        let [low, high] = b0_and_d_from_resonances(&p, 562.7, 422.7, Some(D_PRIOR_MHZ)).unwrap();
        assert!((high.b0_g - 176.0).abs() < 0.1);
        assert_eq!((low.plausible, high.plausible), (Some(false), Some(true)));
        assert!(b0_and_d_from_resonances(&p, 100.0, 200.0, None).is_err());
    }

    #[test]
    fn normalization() {
        let p = FieldProfile::new(vec![-20.0, -10.0, 10.0, 20.0], vec![4.0, 2.0, 4.0, 8.0]).unwrap();
        let n = normalize_profile(&p).unwrap();
        assert_eq!(n.normalization_reference, Some(3.0));
        assert_eq!(n.interpolate(0.0), Some(1.0));
        assert_eq!(normalize_profile(&n).unwrap(), n);
        let zero = FieldProfile::new(vec![-1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(normalize_profile(&zero), Err(AnalysisError::ZeroReference)));
        let off = FieldProfile::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        assert!(normalize_profile(&off).is_err());
        assert!(FieldProfile::new(vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn comparison_arithmetic() {
        let xs = vec![-2.0, -1.0, 0.0, 1.0];
        let a = FieldProfile::new(xs.clone(), vec![1.0; 4]).unwrap();
        let b = FieldProfile::new(xs.clone(), vec![1.1; 4]).unwrap();
        let c = compare_profiles(&b, &a).unwrap();
        assert!((c.rms_deviation - 0.1).abs() < 1e-15);
        assert!((c.max_deviation - 0.1).abs() < 1e-15);
        assert_eq!(compare_profiles(&a, &a).unwrap().rms_deviation, 0.0);
        let narrow = FieldProfile::new(vec![-1.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(compare_profiles(&a, &narrow), Err(AnalysisError::OutOfRange(..))));
    }

    proptest! {
        #[test]
        fn inversion_closes(b0 in 0.0..400.0f64, d in 20.0..50.0f64) {
            let p = SpinParams { zero_field_splitting_mhz: d, ..Default::default() };
            let (fp, fm) = (f_plus(&p, b0), f_minus(&p, b0));
            for est in b0_and_d_from_resonances(&p, fp, fm, None).unwrap() {
                let q = SpinParams { zero_field_splitting_mhz: est.d_mhz, ..p };
                prop_assert!((f_plus(&q, est.b0_g) - fp).abs() < 1e-9);
                prop_assert!((f_minus(&q, est.b0_g) - fm).abs() < 1e-9);
            }
        }

        #[test]
        fn rabi_to_field_linear(f in 0.0..100.0f64, k in 0.0..10.0f64) {
            let p = SpinParams::default();
            let a = rabi_to_field(&p, f).unwrap();
            let b = rabi_to_field(&p, k * f).unwrap();
            prop_assert!((b - k * a).abs() <= 1e-12 * (1.0 + b.abs()));
        }

        #[test]
        fn normalize_idempotent_and_unit_at_origin(vals in prop::collection::vec(0.1..10.0f64, 5)) {
            let p = FieldProfile::new(vec![-2.0, -1.0, 0.0, 1.0, 2.0], vals).unwrap();
            let n = normalize_profile(&p).unwrap();
            prop_assert_eq!(n.interpolate(0.0), Some(1.0));
            prop_assert_eq!(normalize_profile(&n).unwrap(), n);
        }

        #[test]
        fn rms_symmetric(a in prop::collection::vec(0.0..2.0f64, 6), b in prop::collection::vec(0.0..2.0f64, 6)) {
            let xs: Vec<f64> = (0..6).map(|i| i as f64 - 3.0).collect();
            let pa = FieldProfile::new(xs.clone(), a).unwrap();
            let pb = FieldProfile::new(xs, b).unwrap();
            let ab = compare_profiles(&pa, &pb).unwrap().rms_deviation;
            let ba = compare_profiles(&pb, &pa).unwrap().rms_deviation;
            prop_assert!((ab - ba).abs() < 1e-15);
        }
    }
}
