//! Browser bindings for three demo operations: the depth profile under the
//! slit, a lateral field cut at fixed depth, and synthesize-then-fit of a
//! CW-ODMR spectrum.
//!
//! Every operation has a plain Rust entry point returning `Result<_, String>`
//! so it can be tested natively; the exported wrappers only turn the error
//! into a JS exception.

use slitcpw::analysis::{b0_and_d_from_resonances, D_PRIOR_MHZ};
use slitcpw::emfield::{DriveConditions, FieldModel};
use slitcpw::fitting::fit_odmr;
use slitcpw::geometry::{Section, WaveguideGeometry};
use slitcpw::spinphys::{
    synthesize_odmr, uniform_grid, Noise, PeakShape, SpinParams, StaticField,
};
use wasm_bindgen::prelude::*;

/// Elements per strip. Half the library default keeps a solve interactive
/// and moves fields by well under a percent.
const DEMO_RESOLUTION: usize = 100;

const DEPTH_RANGE_UM: (f64, f64, f64) = (0.5, 150.0, 0.5);
const LATERAL_POINTS: f64 = 400.0;

const PEAK: PeakShape = PeakShape { amplitude: 0.004, sigma_mhz: 3.0, gamma_mhz: 2.0 };
const ODMR_STEP_MHZ: f64 = 0.25;
const ODMR_MARGIN_MHZ: f64 = 40.0;

/// A sampled curve together with the location of its maximum.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    x: Vec<f64>,
    y: Vec<f64>,
    peak_x: f64,
    peak_y: f64,
}

#[wasm_bindgen]
impl Curve {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    #[wasm_bindgen(getter, js_name = peakX)]
    pub fn peak_x(&self) -> f64 {
        self.peak_x
    }

    #[wasm_bindgen(getter, js_name = peakY)]
    pub fn peak_y(&self) -> f64 {
        self.peak_y
    }
}

impl Curve {
    fn from_samples(x: Vec<f64>, y: Vec<f64>) -> Self {
        let (k, peak_y) =
            y.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        Self { peak_x: x[k], peak_y, x, y }
    }
}

/// A synthetic spectrum, its two-peak fit and both field inversions.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct OdmrDemo {
    frequencies: Vec<f64>,
    data: Vec<f64>,
    fitted: Vec<f64>,
    centers: Vec<f64>,
    /// `[b0_g, d_mhz]` for the low- and high-field branches.
    low: [f64; 2],
    high: [f64; 2],
}

#[wasm_bindgen]
impl OdmrDemo {
    #[wasm_bindgen(getter)]
    pub fn frequencies(&self) -> Vec<f64> {
        self.frequencies.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn data(&self) -> Vec<f64> {
        self.data.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn fitted(&self) -> Vec<f64> {
        self.fitted.clone()
    }

    /// Fitted line centres in MHz, ascending.
    #[wasm_bindgen(getter)]
    pub fn centers(&self) -> Vec<f64> {
        self.centers.clone()
    }

    #[wasm_bindgen(getter, js_name = lowFieldB0)]
    pub fn low_field_b0(&self) -> f64 {
        self.low[0]
    }

    #[wasm_bindgen(getter, js_name = lowFieldD)]
    pub fn low_field_d(&self) -> f64 {
        self.low[1]
    }

    #[wasm_bindgen(getter, js_name = highFieldB0)]
    pub fn high_field_b0(&self) -> f64 {
        self.high[0]
    }

    #[wasm_bindgen(getter, js_name = highFieldD)]
    pub fn high_field_d(&self) -> f64 {
        self.high[1]
    }
}

fn model(signal_um: f64, slit_um: f64, power_w: f64) -> Result<FieldModel, String> {
    let geometry = WaveguideGeometry {
        signal_width_um: signal_um,
        slit_width_um: slit_um,
        ..WaveguideGeometry::default()
    }
    .validate()
    .map_err(|e| e.to_string())?;
    let section = if geometry.has_slit() { Section::WithSlit } else { Section::WithoutSlit };
    FieldModel::with_resolution(&geometry, &DriveConditions::with_power(power_w), section, DEMO_RESOLUTION)
        .map_err(|e| e.to_string())
}

/// `B_x(0, z)` in gauss for 0.5 <= z <= 150 um. A slit width of 0 gives the
/// plain line.
pub fn depth_curve(signal_um: f64, slit_um: f64, power_w: f64) -> Result<Curve, String> {
    let (z0, z1, dz) = DEPTH_RANGE_UM;
    let p = model(signal_um, slit_um, power_w)?.depth_profile(z0, z1, dz).map_err(|e| e.to_string())?;
    Ok(Curve { x: p.z_values, y: p.bx_values, peak_x: p.argmax_depth_um, peak_y: p.max_bx_g })
}

/// `B_x(x)` in gauss at depth `z_um`, across the signal line and both gaps.
pub fn lateral_curve(signal_um: f64, slit_um: f64, power_w: f64, z_um: f64) -> Result<Curve, String> {
    let m = model(signal_um, slit_um, power_w)?;
    let half = 0.5 * m.geometry.signal_width_um + m.geometry.gap_width_um + 20.0;
    let samples = m.line_scan(-half, half, 2.0 * half / LATERAL_POINTS, z_um).map_err(|e| e.to_string())?;
    let (x, y) = samples.iter().map(|s| (s.x_um, s.bx_g)).unzip();
    Ok(Curve::from_samples(x, y))
}

/// Synthesizes both axial-field lines at `b0_g`, fits two Voigt peaks and
/// inverts the fitted pair back to `(B0, D)`.
pub fn odmr_fit(b0_g: f64, d_mhz: f64, noise: f64, seed: u64) -> Result<OdmrDemo, String> {
    let params = SpinParams { zero_field_splitting_mhz: d_mhz, ..SpinParams::default() };
    params.validate().map_err(|e| e.to_string())?;
    let gamma = params.gyro_mhz_per_g();
    let f_plus = 2.0 * d_mhz + gamma * b0_g;
    let f_minus = (2.0 * d_mhz - gamma * b0_g).abs();
    let lo = (f_minus - ODMR_MARGIN_MHZ).max(0.0);
    let grid = uniform_grid(lo, f_plus + ODMR_MARGIN_MHZ, ODMR_STEP_MHZ);
    let noise = (noise > 0.0).then_some(Noise { sigma: noise, seed });
    let spectrum = synthesize_odmr(&params, &StaticField::axial(b0_g), &[PEAK, PEAK], &grid, noise)
        .map_err(|e| e.to_string())?;
    let fit = fit_odmr(&spectrum, 2, None).map_err(|e| e.to_string())?;
    let centers = fit.centers_mhz();
    let [low, high] = b0_and_d_from_resonances(&params, centers[1], centers[0], Some(D_PRIOR_MHZ))
        .map_err(|e| e.to_string())?;
    let fitted = grid.iter().map(|&f| fit.baseline + fit.peaks.iter().map(|p| p.eval(f)).sum::<f64>()).collect();
    Ok(OdmrDemo {
        frequencies: spectrum.frequencies_mhz,
        data: spectrum.contrast,
        fitted,
        centers,
        low: [low.b0_g, low.d_mhz],
        high: [high.b0_g, high.d_mhz],
    })
}

#[wasm_bindgen(js_name = depthProfile)]
pub fn depth_profile_js(signal_um: f64, slit_um: f64, power_w: f64) -> Result<Curve, JsError> {
    depth_curve(signal_um, slit_um, power_w).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = lateralProfile)]
pub fn lateral_profile_js(signal_um: f64, slit_um: f64, power_w: f64, z_um: f64) -> Result<Curve, JsError> {
    lateral_curve(signal_um, slit_um, power_w, z_um).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = odmrFit)]
pub fn odmr_fit_js(b0_g: f64, d_mhz: f64, noise: f64, seed: u32) -> Result<OdmrDemo, JsError> {
    odmr_fit(b0_g, d_mhz, noise, u64::from(seed)).map_err(|e| JsError::new(&e))
}
