//! Magnetostatic field of the filament model.
//!
//! Every element is a uniform current ribbon lying in the `z = 0` plane and
//! extending to infinity along `y`, so the field has no `y` component. The
//! closed form reduces to `mu0 I / (2 pi r)` for a zero-width element.

use std::f64::consts::PI;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emfield::impedance::{cpw_impedance, power_to_current, CpwImpedance, DriveConditions};
use crate::error::FieldError;
use crate::geometry::{
    build_filaments, Filament, FilamentSet, Section, WaveguideGeometry,
    DEFAULT_FILAMENTS_PER_STRIP,
};

/// Vacuum permeability (CODATA 2018), H/m.
pub const MU_0: f64 = 1.256_637_062_12e-6;

/// `mu0 / 2pi` in gauss * micrometre / ampere.
const MU0_OVER_2PI: f64 = MU_0 / (2.0 * PI) * 1e4 * 1e6;

/// Closest approach to a conductor element before the evaluation is refused.
pub const MIN_DISTANCE_UM: f64 = 0.01;

/// Field phasor amplitude (peak, gauss) at a point (micrometres).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub x_um: f64,
    pub y_um: f64,
    pub z_um: f64,
    pub bx_g: f64,
    pub by_g: f64,
    pub bz_g: f64,
}

impl FieldSample {
    pub fn magnitude(&self) -> f64 {
        (self.bx_g * self.bx_g + self.by_g * self.by_g + self.bz_g * self.bz_g).sqrt()
    }
}

/// Field of one element at `(x, z)`, `(Bx, Bz)` in gauss.
pub fn element_field(f: &Filament, x_um: f64, z_um: f64) -> (f64, f64) {
    let dx = x_um - f.x_um;
    if f.width_um == 0.0 {
        let r2 = dx * dx + z_um * z_um;
        let k = MU0_OVER_2PI * f.current_a / r2;
        return (k * z_um, -k * dx);
    }
    let w = f.width_um;
    let half = 0.5 * w;
    let (l, r) = (f.x_um - half, f.x_um + half);
    let k = MU0_OVER_2PI * f.current_a / w;
    // angle subtended by the ribbon
    let bx = k * (z_um * w).atan2((l - x_um) * (r - x_um) + z_um * z_um);
    let dl2 = (x_um - l) * (x_um - l) + z_um * z_um;
    let bz = 0.5 * k * (-2.0 * w * dx / dl2).ln_1p();
    (bx, bz)
}

fn distance_to_element(f: &Filament, x_um: f64, z_um: f64) -> f64 {
    let dx = ((x_um - f.x_um).abs() - 0.5 * f.width_um).max(0.0);
    dx.hypot(z_um)
}

/// Nearest distance from `(x, z)` to any element of the set.
pub fn nearest_element_distance(set: &FilamentSet, x_um: f64, z_um: f64) -> f64 {
    set.filaments
        .iter()
        .map(|f| distance_to_element(f, x_um, z_um))
        .fold(f64::INFINITY, f64::min)
}

/// Superposed `(Bx, Bz)` of all elements at `(x, z)` in gauss.
pub fn b_field_at(set: &FilamentSet, x_um: f64, z_um: f64) -> Result<(f64, f64), FieldError> {
    let d = nearest_element_distance(set, x_um, z_um);
    if d < MIN_DISTANCE_UM {
        return Err(FieldError::SingularProximity { x_um, z_um, distance_um: d });
    }
    Ok(set.filaments.iter().fold((0.0, 0.0), |(bx, bz), f| {
        let (ex, ez) = element_field(f, x_um, z_um);
        (bx + ex, bz + ez)
    }))
}

/// Rectangular observation grid in the `x`-`z` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub x1: f64,
    pub dx: f64,
    pub z0: f64,
    pub z1: f64,
    pub dz: f64,
}

fn axis(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| start + i as f64 * step).collect()
}

impl Grid {
    pub fn new(x0: f64, x1: f64, dx: f64, z0: f64, z1: f64, dz: f64) -> Result<Self, FieldError> {
        let g = Self { x0, x1, dx, z0, z1, dz };
        let ok = [x0, x1, dx, z0, z1, dz].iter().all(|v| v.is_finite())
            && dx > 0.0
            && dz > 0.0
            && x1 >= x0
            && z1 >= z0;
        if !ok {
            return Err(FieldError::Precondition(format!("invalid grid {g:?}")));
        }
        Ok(g)
    }

    /// Parses `x0,x1,dx,z0,z1,dz`.
    pub fn parse(text: &str) -> Result<Self, FieldError> {
        let v: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| FieldError::Precondition(format!("grid `{text}`: {e}")))?;
        let [x0, x1, dx, z0, z1, dz] = v[..] else {
            return Err(FieldError::Precondition(format!(
                "grid `{text}` must have 6 values x0,x1,dx,z0,z1,dz"
            )));
        };
        Self::new(x0, x1, dx, z0, z1, dz)
    }

    pub fn xs(&self) -> Vec<f64> {
        axis(self.x0, self.x1, self.dx)
    }

    pub fn zs(&self) -> Vec<f64> {
        axis(self.z0, self.z1, self.dz)
    }

    pub fn len(&self) -> usize {
        self.xs().len() * self.zs().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Field samples on a [`Grid`], row-major with `z` as the slow index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMap {
    pub grid: Grid,
    pub nx: usize,
    pub nz: usize,
    pub samples: Vec<FieldSample>,
}

impl FieldMap {
    pub fn at(&self, ix: usize, iz: usize) -> &FieldSample {
        &self.samples[iz * self.nx + ix]
    }
}

/// `B_x` at the slit centre as a function of depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthProfile {
    pub z_values: Vec<f64>,
    pub bx_values: Vec<f64>,
    pub argmax_depth_um: f64,
    pub max_bx_g: f64,
    /// Whether the maximum lies strictly inside the sampled range.
    pub interior_max: bool,
}

impl DepthProfile {
    pub fn is_strictly_decreasing(&self) -> bool {
        self.bx_values.windows(2).all(|w| w[1] < w[0])
    }
}

/// The filament model of one cross-section under a given drive.
#[derive(Debug, Clone)]
pub struct FieldModel {
    pub geometry: WaveguideGeometry,
    pub drive: DriveConditions,
    pub impedance: CpwImpedance,
    pub current_a: f64,
    pub filaments: FilamentSet,
}

impl FieldModel {
    pub fn new(
        geometry: &WaveguideGeometry,
        drive: &DriveConditions,
        section: Section,
    ) -> Result<Self, FieldError> {
        Self::with_resolution(geometry, drive, section, DEFAULT_FILAMENTS_PER_STRIP)
    }

    pub fn with_resolution(
        geometry: &WaveguideGeometry,
        drive: &DriveConditions,
        section: Section,
        filaments_per_strip: usize,
    ) -> Result<Self, FieldError> {
        let impedance = cpw_impedance(geometry)?;
        let current_a = power_to_current(drive, impedance.z0_ohm)?;
        let filaments = build_filaments(geometry, section, current_a, filaments_per_strip)?;
        Ok(Self { geometry: *geometry, drive: *drive, impedance, current_a, filaments })
    }

    pub fn section(&self) -> Section {
        self.filaments.section
    }

    pub fn sample(&self, x_um: f64, z_um: f64) -> Result<FieldSample, FieldError> {
        let (bx_g, bz_g) = b_field_at(&self.filaments, x_um, z_um)?;
        Ok(FieldSample { x_um, y_um: 0.0, z_um, bx_g, by_g: 0.0, bz_g })
    }

    /// Samples every grid node. Nodes closer than [`MIN_DISTANCE_UM`] to a
    /// conductor are moved half a grid step deeper; the reported position is
    /// the one actually evaluated.
    pub fn field_map(&self, grid: &Grid) -> Result<FieldMap, FieldError> {
        let xs = grid.xs();
        let zs = grid.zs();
        let nodes: Vec<(f64, f64)> =
            zs.iter().flat_map(|&z| xs.iter().map(move |&x| (x, z))).collect();
        let eval = |&(x, z): &(f64, f64)| {
            let z = if nearest_element_distance(&self.filaments, x, z) < MIN_DISTANCE_UM {
                z + 0.5 * grid.dz
            } else {
                z
            };
            self.sample(x, z)
        };
        #[cfg(feature = "parallel")]
        let samples: Result<Vec<_>, _> = nodes.par_iter().map(eval).collect();
        #[cfg(not(feature = "parallel"))]
        let samples: Result<Vec<_>, _> = nodes.iter().map(eval).collect();
        Ok(FieldMap { grid: *grid, nx: xs.len(), nz: zs.len(), samples: samples? })
    }

    /// Samples along `x` from `x0` to `x1` (inclusive) at fixed depth.
    pub fn line_scan(
        &self,
        x0: f64,
        x1: f64,
        dx: f64,
        z_um: f64,
    ) -> Result<Vec<FieldSample>, FieldError> {
        if !(dx > 0.0 && x1 >= x0) {
            return Err(FieldError::Precondition(format!(
                "invalid scan range {x0}..{x1} step {dx}"
            )));
        }
        axis(x0, x1, dx).into_iter().map(|x| self.sample(x, z_um)).collect()
    }

    /// `B_x(0, z)` sampled from `z0` to `z1` in steps of `dz`; an interior
    /// maximum is refined by golden-section search inside its bracket.
    pub fn depth_profile(&self, z0: f64, z1: f64, dz: f64) -> Result<DepthProfile, FieldError> {
        let zmax = self.geometry.substrate_thickness_um;
        if !(z0 > 0.0 && z1 >= z0 && z1 <= zmax && dz > 0.0) {
            return Err(FieldError::Precondition(format!(
                "depth range must satisfy 0 < z0 <= z1 <= {zmax} with dz > 0, got {z0}..{z1} step {dz}"
            )));
        }
        let z_values = axis(z0, z1, dz);
        let bx_values = z_values
            .iter()
            .map(|&z| self.sample(0.0, z).map(|s| s.bx_g))
            .collect::<Result<Vec<_>, _>>()?;
        let (k, _) = bx_values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &b)| if b > acc.1 { (i, b) } else { acc });
        let interior_max = k > 0 && k + 1 < z_values.len();
        let (argmax_depth_um, max_bx_g) = if interior_max {
            let f = |z: f64| self.sample(0.0, z).map(|s| s.bx_g);
            golden_max(f, z_values[k - 1], z_values[k + 1], 1e-6)?
        } else {
            (z_values[k], bx_values[k])
        };
        // keep the summary consistent with the stored samples
        let (argmax_depth_um, max_bx_g) = if max_bx_g >= bx_values[k] {
            (argmax_depth_um, max_bx_g)
        } else {
            (z_values[k], bx_values[k])
        };
        Ok(DepthProfile { z_values, bx_values, argmax_depth_um, max_bx_g, interior_max })
    }
}

fn golden_max<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64), FieldError>
where
    F: Fn(f64) -> Result<f64, FieldError>,
{
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let z = 0.5 * (a + b);
    Ok((z, f(z)?))
}

/// One-shot map for a geometry/drive/section.
pub fn field_map(
    geometry: &WaveguideGeometry,
    drive: &DriveConditions,
    section: Section,
    grid: &Grid,
) -> Result<FieldMap, FieldError> {
    FieldModel::new(geometry, drive, section)?.field_map(grid)
}

/// One-shot `x` line scan at depth `z_um`.
pub fn line_scan(
    geometry: &WaveguideGeometry,
    drive: &DriveConditions,
    section: Section,
    (x0, x1, dx): (f64, f64, f64),
    z_um: f64,
) -> Result<Vec<FieldSample>, FieldError> {
    FieldModel::new(geometry, drive, section)?.line_scan(x0, x1, dx, z_um)
}

/// One-shot depth profile at the slit centre.
pub fn depth_profile(
    geometry: &WaveguideGeometry,
    drive: &DriveConditions,
    section: Section,
    (z0, z1): (f64, f64),
    z_step: f64,
) -> Result<DepthProfile, FieldError> {
    FieldModel::new(geometry, drive, section)?.depth_profile(z0, z1, z_step)
}
