//! Cross-section of a slit-loaded coplanar waveguide and its discretization
//! into current-carrying elements.
//!
//! Coordinates follow the usual layout convention for this structure: the
//! origin sits at the center of the slit on the substrate surface, `x` runs
//! across the line, `y` along it and `z` is depth into the substrate. All
//! lengths are in micrometres.
//!
//! Conductors are treated as infinitely thin sheets at `z = 0`. The current
//! distribution across each strip is obtained from a quasi-static
//! method-of-moments solve: in the high-frequency limit the longitudinal
//! vector potential is constant over every conductor, which produces the
//! familiar `1/sqrt` edge crowding and, for the slit case, the shielding of
//! the inner slit edges by the rest of the line.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Default number of elements per strip.
pub const DEFAULT_FILAMENTS_PER_STRIP: usize = 200;

/// Slit-loaded coplanar waveguide cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideGeometry {
    pub signal_width_um: f64,
    pub gap_width_um: f64,
    pub ground_width_um: f64,
    /// Width of the opening in the signal strip. Zero means a plain CPW.
    pub slit_width_um: f64,
    pub slit_length_um: f64,
    pub metal_thickness_um: f64,
    pub substrate_thickness_um: f64,
    pub eps_r: f64,
}

impl Default for WaveguideGeometry {
    /// Fabricated device: 100 um signal line with a 40 um x 300 um slit on
    /// 300 um of 4H-SiC.
    fn default() -> Self {
        Self {
            signal_width_um: 100.0,
            gap_width_um: 40.0,
            ground_width_um: 200.0,
            slit_width_um: 40.0,
            slit_length_um: 300.0,
            metal_thickness_um: 2.0,
            substrate_thickness_um: 300.0,
            eps_r: 9.66,
        }
    }
}

/// A single violated geometry constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub value: f64,
    pub constraint: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} violates {}", self.field, self.value, self.constraint)
    }
}

const KEYS: [&str; 8] = [
    "signal_width_um",
    "gap_width_um",
    "ground_width_um",
    "slit_width_um",
    "slit_length_um",
    "metal_thickness_um",
    "substrate_thickness_um",
    "eps_r",
];

impl WaveguideGeometry {
    /// Returns the geometry unchanged when every constraint holds, otherwise
    /// all violations at once.
    pub fn validate(self) -> Result<Self, GeometryError> {
        let mut violations = Vec::new();
        let mut positive = |field: &'static str, value: f64| {
            if !(value.is_finite() && value > 0.0) {
                violations.push(Violation { field, value, constraint: "> 0" });
            }
        };
        positive("signal_width_um", self.signal_width_um);
        positive("gap_width_um", self.gap_width_um);
        positive("ground_width_um", self.ground_width_um);
        positive("slit_length_um", self.slit_length_um);
        positive("metal_thickness_um", self.metal_thickness_um);
        positive("substrate_thickness_um", self.substrate_thickness_um);
        if !(self.slit_width_um.is_finite() && self.slit_width_um >= 0.0) {
            violations.push(Violation {
                field: "slit_width_um",
                value: self.slit_width_um,
                constraint: ">= 0",
            });
        }
        if self.slit_width_um >= self.signal_width_um {
            violations.push(Violation {
                field: "slit_width_um",
                value: self.slit_width_um,
                constraint: "slit_width < signal_width",
            });
        }
        if !(self.eps_r.is_finite() && self.eps_r >= 1.0) {
            violations.push(Violation { field: "eps_r", value: self.eps_r, constraint: ">= 1" });
        }
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(GeometryError::Invalid(violations))
        }
    }

    pub fn has_slit(&self) -> bool {
        self.slit_width_um > 0.0
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are ignored,
    /// keys not given keep their default value, unknown keys are rejected.
    pub fn from_kv_str(text: &str) -> Result<Self, GeometryError> {
        let mut g = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| GeometryError::Parse {
                line: lineno + 1,
                message: format!("expected key=value, got `{line}`"),
            })?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|_| GeometryError::Parse {
                line: lineno + 1,
                message: format!("`{}` is not a number", value.trim()),
            })?;
            let slot = match key {
                "signal_width_um" => &mut g.signal_width_um,
                "gap_width_um" => &mut g.gap_width_um,
                "ground_width_um" => &mut g.ground_width_um,
                "slit_width_um" => &mut g.slit_width_um,
                "slit_length_um" => &mut g.slit_length_um,
                "metal_thickness_um" => &mut g.metal_thickness_um,
                "substrate_thickness_um" => &mut g.substrate_thickness_um,
                "eps_r" => &mut g.eps_r,
                other => return Err(GeometryError::UnknownKey(other.to_string())),
            };
            *slot = value;
        }
        g.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| GeometryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_kv_str(&text)
    }

    /// Serializes in the format read by [`WaveguideGeometry::from_kv_str`].
    pub fn to_kv_string(&self) -> String {
        let values = [
            self.signal_width_um,
            self.gap_width_um,
            self.ground_width_um,
            self.slit_width_um,
            self.slit_length_um,
            self.metal_thickness_um,
            self.substrate_thickness_um,
            self.eps_r,
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Strips of the requested section as `(left, right, current)` with
    /// currents for a signal current of `total_current`.
    fn strips(&self, section: Section, total_current: f64) -> Vec<Strip> {
        let a = self.signal_width_um / 2.0;
        let g0 = a + self.gap_width_um;
        let g1 = g0 + self.ground_width_um;
        let mut strips = vec![Strip {
            left: -g1,
            right: -g0,
            current_a: -total_current / 2.0,
            role: StripRole::Ground,
        }];
        match section {
            Section::WithSlit => {
                let s = self.slit_width_um / 2.0;
                strips.push(Strip {
                    left: -a,
                    right: -s,
                    current_a: total_current / 2.0,
                    role: StripRole::Signal,
                });
                strips.push(Strip {
                    left: s,
                    right: a,
                    current_a: total_current / 2.0,
                    role: StripRole::Signal,
                });
            }
            Section::WithoutSlit => strips.push(Strip {
                left: -a,
                right: a,
                current_a: total_current,
                role: StripRole::Signal,
            }),
        }
        strips.push(Strip {
            left: g0,
            right: g1,
            current_a: -total_current / 2.0,
            role: StripRole::Ground,
        });
        strips
    }
}

/// Which cross-section of the line is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Section {
    /// Through the slit, signal line split into two half-strips.
    WithSlit,
    /// Away from the slit, solid signal line.
    WithoutSlit,
}

impl FromStr for Section {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "with-slit" | "with_slit" => Ok(Section::WithSlit),
            "without-slit" | "without_slit" => Ok(Section::WithoutSlit),
            other => Err(format!("unknown section `{other}` (expected with-slit or without-slit)")),
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Section::WithSlit => "with-slit",
            Section::WithoutSlit => "without-slit",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StripRole {
    Signal,
    Ground,
}

/// One conductor strip of the cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub left: f64,
    pub right: f64,
    pub current_a: f64,
    pub role: StripRole,
}

impl Strip {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.left && x <= self.right
    }
}

/// A current element: a thin ribbon of `width_um` centred on `x_um` at
/// `z = 0` carrying `current_a` along `+y`. A zero width is an ideal line
/// current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Filament {
    pub x_um: f64,
    pub width_um: f64,
    pub current_a: f64,
    /// Index into [`FilamentSet::strips`].
    pub strip: usize,
}

impl Filament {
    pub fn line(x_um: f64, current_a: f64) -> Self {
        Self { x_um, width_um: 0.0, current_a, strip: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilamentSet {
    pub filaments: Vec<Filament>,
    pub strips: Vec<Strip>,
    pub section: Section,
}

impl FilamentSet {
    pub fn net_current(&self) -> f64 {
        self.filaments.iter().map(|f| f.current_a).sum()
    }

    pub fn strip_current(&self, strip: usize) -> f64 {
        self.filaments.iter().filter(|f| f.strip == strip).map(|f| f.current_a).sum()
    }

    /// Total extent of the layout from the outer ground edges.
    pub fn layout_width(&self) -> f64 {
        let left = self.strips.iter().map(|s| s.left).fold(f64::INFINITY, f64::min);
        let right = self.strips.iter().map(|s| s.right).fold(f64::NEG_INFINITY, f64::max);
        right - left
    }
}

/// Discretizes the requested section into `filaments_per_strip` elements on
/// every strip, carrying a signal current of `total_current` (amperes, peak).
///
/// The half-strips of a slit section carry `total_current / 2` each and each
/// ground strip returns `-total_current / 2`.
pub fn build_filaments(
    geometry: &WaveguideGeometry,
    section: Section,
    total_current: f64,
    filaments_per_strip: usize,
) -> Result<FilamentSet, GeometryError> {
    let geometry = geometry.validate()?;
    if filaments_per_strip < 2 {
        return Err(GeometryError::TooFewFilaments(filaments_per_strip));
    }
    if !total_current.is_finite() {
        return Err(GeometryError::NonFiniteCurrent(total_current));
    }
    if section == Section::WithSlit && !geometry.has_slit() {
        return Err(GeometryError::NoSlit);
    }

    let strips = geometry.strips(section, total_current);
    let n = filaments_per_strip;

    // Panels are generated on the right half only and mirrored, so the layout
    // is exactly symmetric. A strip straddling x = 0 contributes its right
    // half plus, for odd n, a self-mirrored central panel.
    let mut groups: Vec<PanelGroup> = Vec::new();
    for (si, strip) in strips.iter().enumerate() {
        if strip.right <= 0.0 {
            continue;
        }
        let edges = cosine_edges(strip.left, strip.right, n);
        for k in 0..n {
            let (l, r) = (edges[k], edges[k + 1]);
            if strip.left < 0.0 {
                let mk = n - 1 - k;
                if mk > k {
                    continue;
                }
                if mk == k {
                    let h = 0.5 * (r - l);
                    groups.push(PanelGroup { left: -h, right: h, strip: si, self_mirror: true });
                    continue;
                }
            }
            groups.push(PanelGroup { left: l, right: r, strip: si, self_mirror: false });
        }
    }

    // Conductors: each right-side strip is its own unknown potential level;
    // its mirror shares it by symmetry.
    let conductor_strips: Vec<usize> = {
        let mut v: Vec<usize> = groups.iter().map(|g| g.strip).collect();
        v.dedup();
        v
    };
    let ng = groups.len();
    let nc = conductor_strips.len();
    let dim = ng + nc;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);

    for (i, gi) in groups.iter().enumerate() {
        let xc = 0.5 * (gi.left + gi.right);
        for (j, gj) in groups.iter().enumerate() {
            let mut p = log_panel_integral(xc, gj.left, gj.right);
            if !gj.self_mirror {
                p += log_panel_integral(xc, -gj.right, -gj.left);
            }
            a[(i, j)] = p;
        }
        let c = conductor_strips.iter().position(|&s| s == gi.strip).unwrap();
        a[(i, ng + c)] = -1.0;
    }
    for (c, &si) in conductor_strips.iter().enumerate() {
        // Current carried by the right-side part of the strip.
        let strip = strips[si];
        let target = if strip.left < 0.0 { strip.current_a / 2.0 } else { strip.current_a };
        for (j, gj) in groups.iter().enumerate() {
            if gj.strip == si {
                let w = gj.right - gj.left;
                a[(ng + c, j)] = if gj.self_mirror { w / 2.0 } else { w };
            }
        }
        b[ng + c] = target;
    }

    let solution = a.lu().solve(&b).ok_or(GeometryError::SingularCurrentSolve)?;

    // Expand to the full layout: mirror images on the left, then sort by x.
    let mut filaments = Vec::with_capacity(strips.len() * n);
    for (j, g) in groups.iter().enumerate() {
        let w = g.right - g.left;
        let current = solution[j] * w;
        let xc = 0.5 * (g.left + g.right);
        if g.self_mirror {
            filaments.push(Filament { x_um: 0.0, width_um: w, current_a: current, strip: g.strip });
            continue;
        }
        filaments.push(Filament { x_um: xc, width_um: w, current_a: current, strip: g.strip });
        let mirror_strip = mirror_strip_index(&strips, g.strip);
        filaments.push(Filament { x_um: -xc, width_um: w, current_a: current, strip: mirror_strip });
    }
    filaments.sort_by(|p, q| p.x_um.total_cmp(&q.x_um));

    // Absorb solver round-off so each strip carries its assigned current.
    for (si, strip) in strips.iter().enumerate() {
        let sum: f64 = filaments.iter().filter(|f| f.strip == si).map(|f| f.current_a).sum();
        if sum != 0.0 && strip.current_a != 0.0 {
            let scale = strip.current_a / sum;
            for f in filaments.iter_mut().filter(|f| f.strip == si) {
                f.current_a *= scale;
            }
        }
    }

    Ok(FilamentSet { filaments, strips, section })
}

#[derive(Debug, Clone, Copy)]
struct PanelGroup {
    left: f64,
    right: f64,
    strip: usize,
    self_mirror: bool,
}

fn mirror_strip_index(strips: &[Strip], si: usize) -> usize {
    let s = strips[si];
    strips
        .iter()
        .position(|o| o.left == -s.right && o.right == -s.left)
        .unwrap_or(si)
}

/// Panel edges clustered toward both strip edges (Chebyshev spacing).
fn cosine_edges(left: f64, right: f64, n: usize) -> Vec<f64> {
    let mid = 0.5 * (left + right);
    let half = 0.5 * (right - left);
    let mut e: Vec<f64> = (0..=n)
        .map(|k| mid - half * (std::f64::consts::PI * k as f64 / n as f64).cos())
        .collect();
    e[0] = left;
    e[n] = right;
    e
}

/// `∫_l^r ln|x - t| dt`.
fn log_panel_integral(x: f64, l: f64, r: f64) -> f64 {
    fn anti(u: f64) -> f64 {
        if u == 0.0 {
            0.0
        } else {
            u * u.abs().ln() - u
        }
    }
    anti(x - l) - anti(x - r)
}
