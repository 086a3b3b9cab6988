//! `reproduce-paper`: runs the reference pipelines with the default layout
//! and prints one pass/fail row per check.

use std::path::PathBuf;

use serde::Serialize;
use slitcpw::analysis::{
    b0_and_d_from_resonances, compare_profiles, normalize_profile, rabi_to_field, FieldProfile,
};
use slitcpw::emfield::{cpw_impedance, element_field, DriveConditions, FieldModel, MU_0};
use slitcpw::fitting::{fit_odmr, fit_rabi};
use slitcpw::geometry::{Section, WaveguideGeometry};
use slitcpw::io::{self, DepthSummary};
use slitcpw::spinphys::{
    f_minus, f_plus, rabi_frequency, spin_operators, synthesize_odmr, synthesize_rabi,
    transition_frequencies, uniform_grid, Noise, PeakShape, SpinParams, StaticField,
};

use crate::commands::{depth_file_name, simulated_profile};
use crate::error::CliError;

const DEPTH_RANGE: (f64, f64, f64) = (0.5, 200.0, 0.5);
const TRIALS: u64 = 100;

#[derive(Debug, Serialize)]
struct Row {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

struct Context {
    geometry: WaveguideGeometry,
    drive: DriveConditions,
    params: SpinParams,
    seed: u64,
    out: Option<PathBuf>,
}

impl Context {
    fn model(&self, g: &WaveguideGeometry, section: Section) -> Result<FieldModel, CliError> {
        Ok(FieldModel::new(g, &self.drive, section)?)
    }

    fn save_depth(&self, w: f64, p: &slitcpw::emfield::DepthProfile) -> Result<(), CliError> {
        if let Some(dir) = &self.out {
            io::write_depth_profile(&dir.join(depth_file_name(w)), p)?;
        }
        Ok(())
    }
}

fn resonance_lines(c: &Context) -> Result<Row, CliError> {
    let p = &c.params;
    let lines = [(97.0, 339.5, 343.5), (129.0, 429.0, 433.0), (176.0, 561.0, 565.0)];
    let mut pass = true;
    let mut detail = Vec::new();
    for (b, lo, hi) in lines {
        let f = f_plus(p, b);
        pass &= (lo..=hi).contains(&f);
        detail.push(format!("f+({b} G)={f:.2}"));
    }
    let fp = 340.76;
    let fm = fp - 4.0 * p.zero_field_splitting_mhz;
    let [_, high] = b0_and_d_from_resonances(p, fp, fm, None)?;
    pass &= (96.0..=98.0).contains(&high.b0_g);
    detail.push(format!("340.76 MHz -> {:.2} G", high.b0_g));
    Ok(Row { id: 1, name: "resonance formulas", pass, detail: detail.join(", ") })
}

fn eigen_vs_closed_form(c: &Context) -> Result<Row, CliError> {
    let mut worst = 0.0_f64;
    for b in 0..=500 {
        let b = b as f64;
        let s = transition_frequencies(&c.params, &StaticField::axial(b))?;
        worst = worst
            .max((s.f_plus() - f_plus(&c.params, b)).abs())
            .max((s.f_minus() - f_minus(&c.params, b)).abs());
    }
    let sx = spin_operators()[0][(0, 1)].norm();
    let sx_err = (sx - 3.0_f64.sqrt() / 2.0).abs();
    Ok(Row {
        id: 2,
        name: "diagonalization vs closed form",
        pass: worst < 1e-3 && sx_err < 1e-12,
        detail: format!("max diff {:.1e} kHz, |<3/2|Sx|1/2>| err {sx_err:.1e}", worst * 1e3),
    })
}

fn symmetry_zeros(c: &Context) -> Result<Row, CliError> {
    let m = c.model(&c.geometry, Section::WithSlit)?;
    let origin = m.sample(0.0, 0.0)?.bx_g.abs();
    let mut bz = 0.0_f64;
    for z in uniform_grid(0.5, 100.0, 0.5) {
        bz = bz.max(m.sample(0.0, z)?.bz_g.abs());
    }
    Ok(Row {
        id: 3,
        name: "symmetry zeros",
        pass: origin <= 1e-10 && bz <= 1e-10,
        detail: format!("|Bx(0,0)|={origin:.1e} G, max |Bz(0,z)|={bz:.1e} G"),
    })
}

fn depth_profiles(c: &Context) -> Result<Row, CliError> {
    let (z0, z1, dz) = DEPTH_RANGE;
    let slit = c.model(&c.geometry, Section::WithSlit)?.depth_profile(z0, z1, dz)?;
    let plain = c.model(&c.geometry, Section::WithoutSlit)?.depth_profile(z0, z1, dz)?;
    c.save_depth(c.geometry.slit_width_um, &slit)?;
    c.save_depth(0.0, &plain)?;
    let pass = slit.interior_max
        && (15.0..=40.0).contains(&slit.argmax_depth_um)
        && (2.0..=5.0).contains(&slit.max_bx_g)
        && plain.is_strictly_decreasing();
    Ok(Row {
        id: 4,
        name: "depth profile",
        pass,
        detail: format!(
            "peak {:.2} G at z*={:.1} um; no-slit monotone: {}",
            slit.max_bx_g,
            slit.argmax_depth_um,
            plain.is_strictly_decreasing()
        ),
    })
}

fn slit_width_trend(c: &Context) -> Result<Row, CliError> {
    let (z0, z1, dz) = DEPTH_RANGE;
    let mut summaries = Vec::new();
    for w in [10.0, 20.0, 40.0, 80.0] {
        let g = WaveguideGeometry { slit_width_um: w, ..c.geometry };
        let p = c.model(&g, Section::WithSlit)?.depth_profile(z0, z1, dz)?;
        c.save_depth(w, &p)?;
        summaries.push(DepthSummary::new(&p, Some(w)));
    }
    if let Some(dir) = &c.out {
        io::write_json(&dir.join("slit_width_sweep.json"), &summaries)?;
    }
    let pass = summaries.windows(2).all(|s| {
        s[1].max_bx_g < s[0].max_bx_g && s[1].argmax_depth_um > s[0].argmax_depth_um
    });
    let detail = summaries
        .iter()
        .map(|s| format!("{}:{:.2}G@{:.1}", s.slit_width_um.unwrap_or(0.0), s.max_bx_g, s.argmax_depth_um))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(Row { id: 5, name: "slit-width trend", pass, detail })
}

fn signal_width_trend(c: &Context) -> Result<Row, CliError> {
    let (z0, z1, dz) = DEPTH_RANGE;
    let narrow = c.model(&c.geometry, Section::WithSlit)?.depth_profile(z0, z1, dz)?;
    let g = WaveguideGeometry { signal_width_um: 1000.0, ..c.geometry };
    let wide = c.model(&g, Section::WithSlit)?.depth_profile(z0, z1, dz)?;
    let ratio = narrow.max_bx_g / wide.max_bx_g;
    Ok(Row {
        id: 6,
        name: "signal-width trend",
        pass: ratio >= 5.0 && wide.argmax_depth_um > narrow.argmax_depth_um,
        detail: format!(
            "1 mm: {:.2} G at {:.1} um ({ratio:.1}x weaker than 100 um)",
            wide.max_bx_g, wide.argmax_depth_um
        ),
    })
}

fn in_slit_floor(c: &Context) -> Result<Row, CliError> {
    let m = c.model(&c.geometry, Section::WithSlit)?;
    let z = 8.1;
    let mut min_bx = f64::INFINITY;
    let mut dominant = true;
    for x in uniform_grid(-18.0, 18.0, 0.25) {
        let s = m.sample(x, z)?;
        min_bx = min_bx.min(s.bx_g);
        dominant &= s.bx_g.abs() > s.bz_g.abs();
    }
    let inner = c.geometry.signal_width_um / 2.0;
    let gap = uniform_grid(inner, inner + c.geometry.gap_width_um, 0.25)
        .into_iter()
        .map(|x| m.sample(x, z).map(|s| s.bx_g))
        .collect::<Result<Vec<_>, _>>()?;
    let crosses = gap.windows(2).any(|w| w[0].signum() != w[1].signum());
    Ok(Row {
        id: 7,
        name: "in-slit field floor",
        pass: min_bx >= 1.5 && dominant && crosses,
        detail: format!("min Bx {min_bx:.2} G, |Bx|>|Bz|: {dominant}, gap zero crossing: {crosses}"),
    })
}

fn impedance(c: &Context) -> Result<Row, CliError> {
    let z = cpw_impedance(&c.geometry)?.z0_ohm;
    Ok(Row {
        id: 8,
        name: "impedance",
        pass: (46.5..=53.5).contains(&z),
        detail: format!("Z0 = {z:.2} ohm"),
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn fit_round_trips(c: &Context) -> Result<Row, CliError> {
    let p = &c.params;
    let field = StaticField::axial(97.0);
    let truth = transition_frequencies(p, &field)?;
    let centers = [truth.f_minus(), truth.f_plus()];
    let shape = PeakShape { amplitude: 0.004, sigma_mhz: 3.0, gamma_mhz: 2.0 };
    let freqs = uniform_grid(150.0, 400.0, 0.5);
    let odmr = |noise| synthesize_odmr(p, &field, &[shape; 2], &freqs, noise);

    let fit = fit_odmr(&odmr(None)?, 2, None)?;
    let mut worst = fit.baseline.abs() / shape.amplitude;
    for (pk, c0) in fit.peaks.iter().zip(centers) {
        worst = worst
            .max(rel(pk.center_mhz, c0))
            .max(rel(pk.sigma_mhz, shape.sigma_mhz))
            .max(rel(pk.gamma_mhz, shape.gamma_mhz))
            .max(rel(pk.amplitude, shape.amplitude));
    }
    let t = uniform_grid(0.0, 4.0, 0.02);
    let (a, f, t2) = (0.01, 1.5, 2.0);
    let r = fit_rabi(&synthesize_rabi(a, f, t2, &t, None)?, None)?;
    worst = worst.max(rel(r.a_rabi, a)).max(rel(r.f_rabi_mhz, f)).max(rel(r.t2_star_us, t2));

    let mut odmr_hits = 0;
    let mut rabi_hits = 0;
    for k in 0..TRIALS {
        let seed = c.seed.wrapping_add(k);
        let s = odmr(Some(Noise { sigma: 0.1 * shape.amplitude, seed }))?;
        if let Ok(fit) = fit_odmr(&s, 2, None) {
            if fit.peaks.iter().zip(centers).all(|(pk, c0)| rel(pk.center_mhz, c0) < 0.01) {
                odmr_hits += 1;
            }
        }
        let tr = synthesize_rabi(a, f, t2, &t, Some(Noise { sigma: 0.1 * a, seed }))?;
        if let Ok(fit) = fit_rabi(&tr, None) {
            if rel(fit.f_rabi_mhz, f) < 0.01 {
                rabi_hits += 1;
            }
        }
    }
    Ok(Row {
        id: 9,
        name: "fit round trips",
        pass: worst < 1e-3 && odmr_hits >= 95 && rabi_hits >= 95,
        detail: format!(
            "noiseless worst rel err {worst:.1e}; noisy hits ODMR {odmr_hits}/{TRIALS}, Rabi {rabi_hits}/{TRIALS}"
        ),
    })
}

/// Field -> Rabi trace -> fit -> field at each position, normalized at x = 0.
fn recovered_profile(
    c: &Context,
    model: &FieldModel,
    xs: &[f64],
    z: f64,
    noise_fraction: f64,
) -> Result<FieldProfile, CliError> {
    let t = uniform_grid(0.0, 2.0, 0.002);
    let a = 0.01;
    let mut values = Vec::new();
    for (k, &x) in xs.iter().enumerate() {
        let b = model.sample(x, z)?.bx_g;
        let f = rabi_frequency(&c.params, b)?;
        let noise = (noise_fraction > 0.0)
            .then(|| Noise { sigma: noise_fraction * a, seed: c.seed.wrapping_add(k as u64) });
        let fit = fit_rabi(&synthesize_rabi(a, f, 1.0, &t, noise)?, None)?;
        values.push(rabi_to_field(&c.params, fit.f_rabi_mhz)?);
    }
    Ok(normalize_profile(&FieldProfile::new(xs.to_vec(), values)?)?)
}

fn rabi_pipeline(c: &Context) -> Result<Row, CliError> {
    let m = c.model(&c.geometry, Section::WithSlit)?;
    let points = [-20.0, -16.0, -10.0, 0.0];
    let dense = uniform_grid(-40.0, 40.0, 0.5);

    let sim81 = normalize_profile(&simulated_profile(&m, &dense, 8.1)?)?;
    let exact = recovered_profile(c, &m, &points, 8.1, 0.0)?;
    let self_rms = compare_profiles(&exact, &sim81)?.rms_deviation;
    let noisy = recovered_profile(c, &m, &points, 8.1, 0.1)?;
    let report = compare_profiles(&noisy, &sim81)?;

    let sim17 = normalize_profile(&simulated_profile(&m, &dense, 1.7)?)?;
    let edge = |x: f64| sim17.interpolate(x).unwrap_or(f64::NAN);
    let edges = edge(-16.0) > 1.0 && edge(16.0) > 1.0;

    if let Some(dir) = &c.out {
        io::write_profile(&dir.join("profile_sim_z8.1um.csv"), &sim81)?;
        io::write_profile(&dir.join("profile_sim_z1.7um.csv"), &sim17)?;
        io::write_profile(&dir.join("profile_rabi_z8.1um.csv"), &noisy)?;
        io::write_json(&dir.join("profile_comparison.json"), &report)?;
    }
    Ok(Row {
        id: 10,
        name: "Rabi-to-field pipeline",
        pass: self_rms < 0.05 && report.rms_deviation < 0.25 && edges,
        detail: format!(
            "self-consistency rms {self_rms:.1e}, noisy 4-point rms {:.3}, z=1.7 edges {:.2}/{:.2}",
            report.rms_deviation,
            edge(-16.0),
            edge(16.0)
        ),
    })
}

fn field_properties(c: &Context) -> Result<Row, CliError> {
    let m1 = c.model(&c.geometry, Section::WithSlit)?;
    let d4 = DriveConditions { input_power_w: 4.0, ..c.drive };
    let m4 = FieldModel::new(&c.geometry, &d4, Section::WithSlit)?;
    let probes = [(0.0, 8.1), (-16.0, 1.7), (30.0, 20.0), (70.0, 5.0), (-150.0, 40.0)];
    let (mut scaling, mut superposition, mut symmetry) = (0.0_f64, 0.0_f64, 0.0_f64);
    for &(x, z) in &probes {
        let a = m1.sample(x, z)?;
        let b = m4.sample(x, z)?;
        let mag = a.magnitude();
        scaling = scaling.max(((b.bx_g - 2.0 * a.bx_g).abs() + (b.bz_g - 2.0 * a.bz_g).abs()) / mag);
        let mut sum = (0.0, 0.0);
        for strip in 0..m1.filaments.strips.len() {
            for f in m1.filaments.filaments.iter().filter(|f| f.strip == strip) {
                let (bx, bz) = element_field(f, x, z);
                sum.0 += bx;
                sum.1 += bz;
            }
        }
        superposition = superposition.max(((sum.0 - a.bx_g).abs() + (sum.1 - a.bz_g).abs()) / mag);
        let mirror = m1.sample(-x, z)?;
        symmetry = symmetry.max((a.bx_g - mirror.bx_g).abs()).max((a.bz_g + mirror.bz_g).abs());
    }
    let r = 10.0 * m1.filaments.layout_width();
    let far = m1.sample(0.0, r)?.magnitude();
    let single = MU_0 / (2.0 * std::f64::consts::PI) * m1.current_a / (r * 1e-6) * 1e4;
    let suppression = far / single;
    Ok(Row {
        id: 11,
        name: "field linearity and symmetry",
        pass: scaling < 1e-12 && superposition < 1e-12 && symmetry < 1e-10 && suppression <= 0.05,
        detail: format!(
            "sqrt(P) {scaling:.1e}, superposition {superposition:.1e}, mirror {symmetry:.1e} G, far field {:.2}%",
            100.0 * suppression
        ),
    })
}

type Check = fn(&Context) -> Result<Row, CliError>;

pub fn run(seed: u64, out: Option<PathBuf>) -> Result<(), CliError> {
    let c = Context {
        geometry: WaveguideGeometry::default(),
        drive: DriveConditions::default(),
        params: SpinParams::default(),
        seed,
        out,
    };
    let checks: [Check; 11] = [
        resonance_lines,
        eigen_vs_closed_form,
        symmetry_zeros,
        depth_profiles,
        slit_width_trend,
        signal_width_trend,
        in_slit_floor,
        impedance,
        fit_round_trips,
        rabi_pipeline,
        field_properties,
    ];
    let mut rows = Vec::new();
    for check in checks {
        let row = check(&c)?;
        println!(
            "{:>2}  {}  {:<30} {}",
            row.id,
            if row.pass { "PASS" } else { "FAIL" },
            row.name,
            row.detail
        );
        rows.push(row);
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    println!("{} of {} checks passed", rows.len() - failed, rows.len());
    if let Some(dir) = &c.out {
        io::write_json(&dir.join("reproduce.json"), &rows)?;
    }
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} check(s) failed")));
    }
    Ok(())
}
