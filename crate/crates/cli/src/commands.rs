use std::path::{Path, PathBuf};

use serde::Serialize;
use slitcpw::analysis::{
    b0_and_d_from_resonances, compare_profiles, normalize_profile, rabi_to_field, FieldProfile,
    ResonanceInversion, D_PRIOR_MHZ,
};
use slitcpw::emfield::{
    cpw_impedance, power_to_current, reflection_estimate, DriveConditions, FieldMap, FieldModel,
    Grid,
};
use slitcpw::fitting::{fit_odmr, fit_rabi, FitResult};
use slitcpw::geometry::{Section, WaveguideGeometry};
use slitcpw::io::{self, DepthSummary};
use slitcpw::spinphys::{
    rabi_frequency, synthesize_odmr, synthesize_rabi, uniform_grid, Noise, PeakShape, SpinParams,
    StaticField,
};

use crate::error::CliError;
use crate::{DriveArgs, OdmrArgs, RabiArgs, SpinArgs};

/// Symmetry residual above which `--verify` fails, G.
const SYMMETRY_TOL_G: f64 = 1e-10;

/// Files go to `--out <dir>` when given, otherwise the primary output is
/// printed to stdout.
struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name))
    }

    fn csv(&self, name: &str, header: &[&str], cols: &[&[f64]]) -> Result<(), CliError> {
        match self.path(name) {
            Some(p) => io::write_csv(&p, header, cols)?,
            None => io::write_columns(std::io::stdout().lock(), header, cols)
                .map_err(|e| CliError::Domain(format!("stdout: {e}")))?,
        }
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        match self.path(name) {
            Some(p) => io::write_json(&p, value)?,
            None => print!("{}", io::to_json_string(value)),
        }
        Ok(())
    }
}

pub fn load_geometry(drive: &DriveArgs) -> Result<WaveguideGeometry, CliError> {
    let g = match &drive.geometry {
        Some(p) => WaveguideGeometry::load(p)?,
        None => WaveguideGeometry::default(),
    };
    Ok(g.validate()?)
}

pub fn drive_conditions(drive: &DriveArgs) -> Result<DriveConditions, CliError> {
    let d = DriveConditions {
        input_power_w: drive.power_w,
        frequency_hz: drive.freq_mhz * 1e6,
        ..Default::default()
    };
    d.validate()?;
    if !d.in_validated_band() {
        eprintln!(
            "warning: {} MHz is outside the 70 MHz - 3 GHz band where the quasi-static field is checked",
            drive.freq_mhz
        );
    }
    Ok(d)
}

fn spin_params(s: &SpinArgs) -> Result<SpinParams, CliError> {
    let p = SpinParams { zero_field_splitting_mhz: s.d_mhz, g_factor: s.g_factor, ..Default::default() };
    p.validate()?;
    Ok(p)
}

fn parse_list<const N: usize>(text: &str, flag: &str) -> Result<[f64; N], CliError> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("{flag} `{text}`: {e}")))?;
    values
        .try_into()
        .map_err(|_| CliError::Usage(format!("{flag} `{text}`: expected {N} comma-separated numbers")))
}

fn range(text: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    let [a, b, step] = parse_list::<3>(text, flag)?;
    if !(step > 0.0 && b >= a && a.is_finite() && b.is_finite()) {
        return Err(CliError::Domain(format!("{flag} `{text}`: need start <= stop and step > 0")));
    }
    Ok(uniform_grid(a, b, step))
}

fn noise(sigma: f64, seed: u64) -> Option<Noise> {
    (sigma != 0.0).then_some(Noise { sigma, seed })
}

#[derive(Serialize)]
struct ImpedanceReport {
    z0_ohm: f64,
    eps_eff: f64,
    reference_impedance_ohm: f64,
    reflection_db: f64,
    peak_current_a: f64,
}

pub fn impedance(drive: &DriveArgs) -> Result<(), CliError> {
    let g = load_geometry(drive)?;
    let d = drive_conditions(drive)?;
    let z = cpw_impedance(&g)?;
    let report = ImpedanceReport {
        z0_ohm: z.z0_ohm,
        eps_eff: z.eps_eff,
        reference_impedance_ohm: d.reference_impedance_ohm,
        reflection_db: reflection_estimate(z.z0_ohm, d.reference_impedance_ohm)?,
        peak_current_a: power_to_current(&d, z.z0_ohm)?,
    };
    print!("{}", io::to_json_string(&report));
    Ok(())
}

fn map_columns(map: &FieldMap) -> [Vec<f64>; 6] {
    let col = |f: fn(&slitcpw::emfield::FieldSample) -> f64| map.samples.iter().map(f).collect();
    [
        col(|s| s.x_um),
        col(|s| s.y_um),
        col(|s| s.z_um),
        col(|s| s.bx_g),
        col(|s| s.by_g),
        col(|s| s.bz_g),
    ]
}

/// Mirror residuals `max |Bx(x) - Bx(-x)|`, `max |Bz(x) + Bz(-x)|` over the
/// map, and the fraction of near-surface gap nodes with `|Bz| > |Bx|`.
fn verify_map(model: &FieldModel, map: &FieldMap) -> Result<(f64, f64, Option<f64>), CliError> {
    let (mut even, mut odd) = (0.0_f64, 0.0_f64);
    let g = &model.geometry;
    let inner = g.signal_width_um / 2.0;
    let outer = inner + g.gap_width_um;
    let (mut gap_nodes, mut gap_vertical) = (0usize, 0usize);
    for s in &map.samples {
        let m = model.sample(-s.x_um, s.z_um)?;
        even = even.max((s.bx_g - m.bx_g).abs());
        odd = odd.max((s.bz_g + m.bz_g).abs());
        let ax = s.x_um.abs();
        if ax > inner && ax < outer && s.z_um <= g.gap_width_um / 2.0 {
            gap_nodes += 1;
            if s.bz_g.abs() > s.bx_g.abs() {
                gap_vertical += 1;
            }
        }
    }
    let fraction = (gap_nodes > 0).then(|| gap_vertical as f64 / gap_nodes as f64);
    Ok((even, odd, fraction))
}

pub fn field_map(
    drive: &DriveArgs,
    section: Section,
    grid: &Grid,
    verify: bool,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let g = load_geometry(drive)?;
    let d = drive_conditions(drive)?;
    let model = FieldModel::new(&g, &d, section)?;
    let map = model.field_map(grid)?;
    if verify {
        let (even, odd, gap) = verify_map(&model, &map)?;
        let gap_text = gap.map_or("no gap nodes near the surface".to_string(), |f| {
            format!("|Bz| > |Bx| at {:.0}% of near-surface gap nodes", 100.0 * f)
        });
        eprintln!("verify: Bx even to {even:.2e} G, Bz odd to {odd:.2e} G; {gap_text}");
        if even > SYMMETRY_TOL_G || odd > SYMMETRY_TOL_G {
            return Err(CliError::Numerical(format!(
                "symmetry check failed: Bx even residual {even:.3e} G, Bz odd residual {odd:.3e} G"
            )));
        }
    }
    let cols = map_columns(&map);
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    Sink { dir: out }.csv(&format!("field_map_{section}.csv"), &io::FIELD_MAP_HEADER, &refs)
}

pub fn simulated_profile(
    model: &FieldModel,
    xs: &[f64],
    z_um: f64,
) -> Result<FieldProfile, CliError> {
    let values = xs.iter().map(|&x| model.sample(x, z_um).map(|s| s.bx_g)).collect::<Result<_, _>>()?;
    Ok(FieldProfile::new(xs.to_vec(), values)?)
}

pub fn line_scan(
    drive: &DriveArgs,
    section: Section,
    z_um: f64,
    x_range: &str,
    as_profile: bool,
    normalize: bool,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let g = load_geometry(drive)?;
    let d = drive_conditions(drive)?;
    let xs = range(x_range, "--x-range")?;
    let model = FieldModel::new(&g, &d, section)?;
    let sink = Sink { dir: out };
    let name = format!("line_scan_z{z_um}um.csv");
    if as_profile {
        let mut p = simulated_profile(&model, &xs, z_um)?;
        if normalize {
            p = normalize_profile(&p)?;
        }
        sink.csv(&name, &io::PROFILE_HEADER, &[&p.positions_um, &p.values])
    } else {
        let samples = xs.iter().map(|&x| model.sample(x, z_um)).collect::<Result<Vec<_>, _>>()?;
        let map = FieldMap {
            grid: Grid::new(xs[0], xs[xs.len() - 1], 1.0, z_um, z_um, 1.0)?,
            nx: samples.len(),
            nz: 1,
            samples,
        };
        let cols = map_columns(&map);
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        sink.csv(&name, &io::FIELD_MAP_HEADER, &refs)
    }
}

#[derive(Serialize)]
struct SweepReport {
    power_w: f64,
    signal_width_um: f64,
    profiles: Vec<DepthSummary>,
    /// Over the nonzero widths in the order given.
    peak_strictly_decreasing: bool,
    depth_strictly_increasing: bool,
}

pub fn depth_sweep(
    drive: &DriveArgs,
    widths: &[f64],
    z_range: &str,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let base = load_geometry(drive)?;
    let d = drive_conditions(drive)?;
    let [z0, z1, dz] = parse_list::<3>(z_range, "--z-range")?;
    let sink = Sink { dir: out };
    let mut profiles = Vec::new();
    for &w in widths {
        let geometry = WaveguideGeometry { slit_width_um: w, ..base }.validate()?;
        let section = if w == 0.0 { Section::WithoutSlit } else { Section::WithSlit };
        let model = FieldModel::new(&geometry, &d, section)?;
        let profile = model.depth_profile(z0, z1, dz)?;
        if let Some(p) = sink.path(&depth_file_name(w)) {
            io::write_depth_profile(&p, &profile)?;
        }
        profiles.push(DepthSummary::new(&profile, Some(w)));
    }
    let slit: Vec<&DepthSummary> = profiles.iter().filter(|p| p.slit_width_um != Some(0.0)).collect();
    let report = SweepReport {
        power_w: d.input_power_w,
        signal_width_um: base.signal_width_um,
        peak_strictly_decreasing: slit.windows(2).all(|w| w[1].max_bx_g < w[0].max_bx_g),
        depth_strictly_increasing: slit.windows(2).all(|w| w[1].argmax_depth_um > w[0].argmax_depth_um),
        profiles,
    };
    sink.json("depth_sweep.json", &report)
}

pub fn depth_file_name(w: f64) -> String {
    if w == 0.0 {
        "depth_no_slit.csv".to_string()
    } else {
        format!("depth_slit_{w}um.csv")
    }
}

#[derive(Serialize)]
struct OdmrReport<'a> {
    #[serde(flatten)]
    fit: &'a FitResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    b0_estimates: Option<[ResonanceInversion; 2]>,
}

pub fn odmr(args: &OdmrArgs) -> Result<(), CliError> {
    let params = spin_params(&args.spin)?;
    let sink = Sink { dir: args.out.clone() };
    let n_peaks = args.peaks as usize;
    match &args.fit {
        None => {
            let freqs = range(&args.freq_range, "--freq-range")?;
            let shape = PeakShape { amplitude: args.amplitude, sigma_mhz: args.sigma_mhz, gamma_mhz: args.gamma_mhz };
            let s = synthesize_odmr(
                &params,
                &StaticField::axial(args.b0_g),
                &vec![shape; n_peaks],
                &freqs,
                noise(args.noise, args.seed),
            )?;
            sink.csv("odmr.csv", &io::ODMR_HEADER, &[&s.frequencies_mhz, &s.contrast])
        }
        Some(path) => {
            let spectrum = io::read_odmr(path)?;
            let fit = fit_odmr(&spectrum, n_peaks, None)?;
            let b0_estimates = if args.estimate_b0 {
                let [lo, hi] = fit.centers_mhz()[..] else {
                    return Err(CliError::Domain("--estimate-b0 needs a two-peak fit".into()));
                };
                Some(b0_and_d_from_resonances(&params, hi, lo, Some(D_PRIOR_MHZ))?)
            } else {
                None
            };
            sink.json("odmr_fit.json", &OdmrReport { fit: &fit.result, b0_estimates })
        }
    }
}

#[derive(Serialize)]
struct RabiReport<'a> {
    #[serde(flatten)]
    fit: &'a FitResult,
    #[serde(rename = "b_ac_x_G", skip_serializing_if = "Option::is_none")]
    b_ac_x_g: Option<f64>,
}

pub fn rabi(args: &RabiArgs) -> Result<(), CliError> {
    let params = spin_params(&args.spin)?;
    let sink = Sink { dir: args.out.clone() };
    match &args.fit {
        None => {
            let f = match (args.f_rabi_mhz, args.b_ac_g) {
                (Some(f), _) => f,
                (None, Some(b)) => rabi_frequency(&params, b)?,
                (None, None) => 1.5,
            };
            let t = range(&args.t_range, "--t-range")?;
            let trace = synthesize_rabi(args.a_rabi, f, args.t2_star_us, &t, noise(args.noise, args.seed))?;
            sink.csv("rabi.csv", &io::RABI_HEADER, &[&trace.durations_us, &trace.contrast])
        }
        Some(path) => {
            let trace = io::read_rabi(path)?;
            let fit = fit_rabi(&trace, None)?;
            let b_ac_x_g = if args.to_field { Some(rabi_to_field(&params, fit.f_rabi_mhz)?) } else { None };
            sink.json("rabi_fit.json", &RabiReport { fit: &fit.result, b_ac_x_g })?;
            if let (Some(b), Some(_)) = (b_ac_x_g, &args.out) {
                println!("B_AC,x = {b} G");
            }
            Ok(())
        }
    }
}

pub fn compare(
    measured: &Path,
    simulated: &Path,
    normalize: bool,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut m = io::read_profile(measured)?;
    let mut s = io::read_profile(simulated)?;
    if normalize {
        m = normalize_profile(&m)?;
        s = normalize_profile(&s)?;
    }
    let report = compare_profiles(&m, &s)?;
    Sink { dir: out }.json("compare.json", &report)
}
