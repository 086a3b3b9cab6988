//! Ground-state spin of the silicon vacancy (S = 3/2).
//!
//! All energies are frequencies in MHz. The Hamiltonian is
//! `H/h = D (Sz^2 - S(S+1)/3) + (g muB / h) B0 (n . S)` with the transverse
//! zero-field term and hyperfine coupling left out.

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::SpinError;
use crate::fitting::voigt;

/// Bohr magneton over Planck's constant, MHz per gauss (CODATA 2018).
pub const BOHR_MHZ_PER_G: f64 = 1.399_624_493_61;

/// Spin quantum number of the defect.
pub const SPIN: f64 = 1.5;

/// Magnetic quantum numbers in basis order.
pub const M_VALUES: [f64; 4] = [1.5, 0.5, -0.5, -1.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinParams {
    /// `D/h` in MHz; the zero-field splitting between the `|3/2|` and
    /// `|1/2|` doublets is `2D/h`.
    pub zero_field_splitting_mhz: f64,
    pub g_factor: f64,
    /// `muB/h` in MHz/G; only changed to study unit conventions.
    pub bohr_mhz_per_g: f64,
}

impl Default for SpinParams {
    fn default() -> Self {
        Self { zero_field_splitting_mhz: 35.0, g_factor: 2.0, bohr_mhz_per_g: BOHR_MHZ_PER_G }
    }
}

impl SpinParams {
    /// `g muB / h` in MHz per gauss.
    pub fn gyro_mhz_per_g(&self) -> f64 {
        self.g_factor * self.bohr_mhz_per_g
    }

    pub fn validate(&self) -> Result<(), SpinError> {
        if !(self.zero_field_splitting_mhz > 0.0 && self.g_factor > 0.0 && self.bohr_mhz_per_g > 0.0)
        {
            return Err(SpinError::Precondition(format!("invalid spin parameters {self:?}")));
        }
        Ok(())
    }
}

/// Static bias field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticField {
    pub b0_g: f64,
    /// Unit vector; `(0, 0, 1)` is the c-axis.
    pub orientation: [f64; 3],
}

impl StaticField {
    pub fn axial(b0_g: f64) -> Self {
        Self { b0_g, orientation: [0.0, 0.0, 1.0] }
    }

    /// Field tilted by `theta` from the c-axis, azimuth `phi` (radians).
    pub fn tilted(b0_g: f64, theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self { b0_g, orientation: [st * cp, st * sp, ct] }
    }

    pub fn validate(&self) -> Result<(), SpinError> {
        let n = self.orientation.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-12 || !self.b0_g.is_finite() {
            return Err(SpinError::Precondition(format!(
                "orientation must be a unit vector (|n| = {n}) and B0 finite"
            )));
        }
        Ok(())
    }
}

pub type SpinMatrix = Matrix4<Complex64>;

/// Spin-3/2 operators `(Sx, Sy, Sz)` in the `m = 3/2, 1/2, -1/2, -3/2` basis.
pub fn spin_operators() -> [SpinMatrix; 3] {
    let mut sp = SpinMatrix::zeros();
    // <m+1|S+|m> = sqrt(s(s+1) - m(m+1))
    for (row, &m) in M_VALUES.iter().enumerate().skip(1) {
        sp[(row - 1, row)] = Complex64::new((SPIN * (SPIN + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let sm = sp.adjoint();
    let half = Complex64::new(0.5, 0.0);
    let sx = (sp + sm) * half;
    let sy = (sp - sm) * Complex64::new(0.0, -0.5);
    let sz = SpinMatrix::from_diagonal(&nalgebra::Vector4::from_iterator(
        M_VALUES.iter().map(|&m| Complex64::new(m, 0.0)),
    ));
    [sx, sy, sz]
}

/// Spin Hamiltonian in MHz.
pub fn hamiltonian(params: &SpinParams, field: &StaticField) -> SpinMatrix {
    let [sx, sy, sz] = spin_operators();
    let d = Complex64::new(params.zero_field_splitting_mhz, 0.0);
    let shift = Complex64::new(SPIN * (SPIN + 1.0) / 3.0, 0.0);
    let zfs = (sz * sz - SpinMatrix::identity() * shift) * d;
    let gb = params.gyro_mhz_per_g() * field.b0_g;
    let [nx, ny, nz] = field.orientation;
    let zeeman = (sx * Complex64::new(nx, 0.0) + sy * Complex64::new(ny, 0.0) + sz * Complex64::new(nz, 0.0))
        * Complex64::new(gb, 0.0);
    zfs + zeeman
}

/// Frobenius norm of `H - H^dagger`.
pub fn hermiticity_residual(h: &SpinMatrix) -> f64 {
    (h - h.adjoint()).norm()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Level indices into [`SpinSpectrum::eigenvalues_mhz`], lower first.
    pub levels: (usize, usize),
    pub frequency_mhz: f64,
    /// `|<i|Sx|j>|`
    pub sx_element: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSpectrum {
    /// Ascending energies in MHz.
    pub eigenvalues_mhz: [f64; 4],
    /// `<Sz^2>` of each eigenstate, 9/4 for pure `|3/2|` and 1/4 for `|1/2|`.
    pub sz2_expectation: [f64; 4],
    pub transitions: Vec<Transition>,
    /// Indices into `transitions` of the lower (`f-`) and upper (`f+`)
    /// observed resonance.
    pub f_minus_index: usize,
    pub f_plus_index: usize,
    pub hermiticity_residual: f64,
}

impl SpinSpectrum {
    pub fn f_minus(&self) -> f64 {
        self.transitions[self.f_minus_index].frequency_mhz
    }

    pub fn f_plus(&self) -> f64 {
        self.transitions[self.f_plus_index].frequency_mhz
    }
}

/// Diagonalizes the Hamiltonian and tabulates all six level pairs.
///
/// The two observed resonances are the `|3/2| <-> |1/2|` transitions: among
/// pairs linking a state with `<Sz^2> > 5/4` to one below it, the two with
/// the largest `|<i|Sx|j>|`.
pub fn transition_frequencies(
    params: &SpinParams,
    field: &StaticField,
) -> Result<SpinSpectrum, SpinError> {
    params.validate()?;
    field.validate()?;
    let h = hamiltonian(params, field);
    let herm = hermiticity_residual(&h);
    let eig = SymmetricEigen::new(h);

    let residual = (h * eig.eigenvectors
        - eig.eigenvectors * SpinMatrix::from_diagonal(&eig.eigenvalues.map(|v| Complex64::new(v, 0.0))))
    .norm();
    if residual > 1e-9 * (1.0 + h.norm()) {
        return Err(SpinError::EigenResidual(residual));
    }

    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vecs: Vec<_> = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    let eigenvalues_mhz: [f64; 4] = std::array::from_fn(|k| eig.eigenvalues[order[k]]);

    let [sx, _, sz] = spin_operators();
    let sz2 = sz * sz;
    let sz2_expectation: [f64; 4] =
        std::array::from_fn(|k| (vecs[k].adjoint() * sz2 * vecs[k])[(0, 0)].re);

    let mut transitions = Vec::with_capacity(6);
    for i in 0..4 {
        for j in i + 1..4 {
            transitions.push(Transition {
                levels: (i, j),
                frequency_mhz: eigenvalues_mhz[j] - eigenvalues_mhz[i],
                sx_element: (vecs[i].adjoint() * sx * vecs[j])[(0, 0)].norm(),
            });
        }
    }

    let doublet_mid = 1.25;
    let mut candidates: Vec<usize> = (0..transitions.len())
        .filter(|&t| {
            let (i, j) = transitions[t].levels;
            (sz2_expectation[i] > doublet_mid) != (sz2_expectation[j] > doublet_mid)
        })
        .collect();
    candidates.sort_by(|&a, &b| {
        transitions[b]
            .sx_element
            .total_cmp(&transitions[a].sx_element)
            .then(transitions[a].frequency_mhz.total_cmp(&transitions[b].frequency_mhz))
    });
    if candidates.len() < 2 {
        return Err(SpinError::Precondition(
            "could not identify the two |3/2> <-> |1/2> resonances".into(),
        ));
    }
    let (a, b) = (candidates[0], candidates[1]);
    let (f_minus_index, f_plus_index) =
        if transitions[a].frequency_mhz <= transitions[b].frequency_mhz { (a, b) } else { (b, a) };

    Ok(SpinSpectrum {
        eigenvalues_mhz,
        sz2_expectation,
        transitions,
        f_minus_index,
        f_plus_index,
        hermiticity_residual: herm,
    })
}

/// Upper resonance for an axial field: `2D/h + g muB B0 / h`.
pub fn f_plus(params: &SpinParams, b0_g: f64) -> f64 {
    2.0 * params.zero_field_splitting_mhz + params.gyro_mhz_per_g() * b0_g
}

/// Lower resonance for an axial field: `|2D/h - g muB B0 / h|`.
pub fn f_minus(params: &SpinParams, b0_g: f64) -> f64 {
    (2.0 * params.zero_field_splitting_mhz - params.gyro_mhz_per_g() * b0_g).abs()
}

/// Axial field at which `f-` vanishes (level crossing).
pub fn crossing_field_g(params: &SpinParams) -> f64 {
    2.0 * params.zero_field_splitting_mhz / params.gyro_mhz_per_g()
}

/// Rabi frequency driven by an in-plane field amplitude, MHz.
pub fn rabi_frequency(params: &SpinParams, b_ac_x_g: f64) -> Result<f64, SpinError> {
    if !(b_ac_x_g >= 0.0) {
        return Err(SpinError::Precondition(format!("B_AC,x must be >= 0, got {b_ac_x_g}")));
    }
    Ok(3.0_f64.sqrt() * params.gyro_mhz_per_g() * b_ac_x_g)
}

/// Additive white Gaussian noise with a fixed seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub sigma: f64,
    pub seed: u64,
}

impl Noise {
    fn apply(&self, values: &mut [f64]) -> Result<(), SpinError> {
        if self.sigma == 0.0 {
            return Ok(());
        }
        let normal = Normal::new(0.0, self.sigma)
            .map_err(|e| SpinError::Precondition(format!("noise sigma {}: {e}", self.sigma)))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for v in values {
            *v += normal.sample(&mut rng);
        }
        Ok(())
    }
}

/// Line shape of one resonance. `amplitude` is the peak contrast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakShape {
    pub amplitude: f64,
    pub sigma_mhz: f64,
    pub gamma_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrSpectrum {
    pub frequencies_mhz: Vec<f64>,
    pub contrast: Vec<f64>,
}

impl OdmrSpectrum {
    pub fn new(frequencies_mhz: Vec<f64>, contrast: Vec<f64>) -> Result<Self, SpinError> {
        check_series(&frequencies_mhz, &contrast, "frequency")?;
        Ok(Self { frequencies_mhz, contrast })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiTrace {
    pub durations_us: Vec<f64>,
    pub contrast: Vec<f64>,
}

impl RabiTrace {
    pub fn new(durations_us: Vec<f64>, contrast: Vec<f64>) -> Result<Self, SpinError> {
        check_series(&durations_us, &contrast, "duration")?;
        if durations_us.first().is_some_and(|&t| t < 0.0) {
            return Err(SpinError::Precondition("durations must start at >= 0".into()));
        }
        Ok(Self { durations_us, contrast })
    }
}

fn check_series(x: &[f64], y: &[f64], what: &str) -> Result<(), SpinError> {
    if x.len() != y.len() {
        return Err(SpinError::Precondition(format!(
            "{what} grid has {} points but {} contrast values",
            x.len(),
            y.len()
        )));
    }
    if !x.windows(2).all(|w| w[1] > w[0]) {
        return Err(SpinError::Precondition(format!("{what} grid must be strictly increasing")));
    }
    if !x.iter().chain(y).all(|v| v.is_finite()) {
        return Err(SpinError::Precondition("non-finite value in series".into()));
    }
    Ok(())
}

/// Uniform grid from `start` to `stop` inclusive.
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| start + i as f64 * step).collect()
}

/// Synthetic CW-ODMR spectrum: normalized Voigt peaks at `f-` (first shape)
/// and `f+` (second shape) of the axial-field resonances. A single shape
/// places one peak at `f+`.
pub fn synthesize_odmr(
    params: &SpinParams,
    field: &StaticField,
    peaks: &[PeakShape],
    frequencies_mhz: &[f64],
    noise: Option<Noise>,
) -> Result<OdmrSpectrum, SpinError> {
    let spectrum = transition_frequencies(params, field)?;
    let centres = match peaks.len() {
        1 => vec![spectrum.f_plus()],
        2 => vec![spectrum.f_minus(), spectrum.f_plus()],
        n => return Err(SpinError::Precondition(format!("need 1 or 2 peak shapes, got {n}"))),
    };
    for p in peaks {
        if !(p.sigma_mhz > 0.0 && p.gamma_mhz > 0.0) {
            return Err(SpinError::Precondition(format!("peak widths must be > 0, got {p:?}")));
        }
    }
    if let (Some(&lo), Some(&hi)) = (frequencies_mhz.first(), frequencies_mhz.last()) {
        if centres.iter().any(|&c| c < lo || c > hi) {
            return Err(SpinError::Precondition(format!(
                "grid {lo}..{hi} MHz does not cover resonances {centres:?}"
            )));
        }
    }
    let mut contrast: Vec<f64> = frequencies_mhz
        .iter()
        .map(|&f| {
            peaks
                .iter()
                .zip(&centres)
                .map(|(p, &c)| p.amplitude * voigt::normalized_voigt(f - c, p.sigma_mhz, p.gamma_mhz))
                .sum()
        })
        .collect();
    if let Some(noise) = noise {
        noise.apply(&mut contrast)?;
    }
    OdmrSpectrum::new(frequencies_mhz.to_vec(), contrast)
}

/// Damped Rabi oscillation `C(t) = -A cos(2 pi f t) exp(-t / T2*)`.
pub fn rabi_model(t_us: f64, a_rabi: f64, f_rabi_mhz: f64, t2_star_us: f64) -> f64 {
    -a_rabi * (2.0 * std::f64::consts::PI * f_rabi_mhz * t_us).cos() * (-t_us / t2_star_us).exp()
}

pub fn synthesize_rabi(
    a_rabi: f64,
    f_rabi_mhz: f64,
    t2_star_us: f64,
    durations_us: &[f64],
    noise: Option<Noise>,
) -> Result<RabiTrace, SpinError> {
    if !(t2_star_us > 0.0) {
        return Err(SpinError::Precondition(format!("T2* must be > 0, got {t2_star_us}")));
    }
    if !(f_rabi_mhz >= 0.0) {
        return Err(SpinError::Precondition(format!("f_Rabi must be >= 0, got {f_rabi_mhz}")));
    }
    let mut contrast: Vec<f64> =
        durations_us.iter().map(|&t| rabi_model(t, a_rabi, f_rabi_mhz, t2_star_us)).collect();
    if let Some(noise) = noise {
        noise.apply(&mut contrast)?;
    }
    RabiTrace::new(durations_us.to_vec(), contrast)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> SpinParams {
        SpinParams::default()
    }

    #[test]
    fn zero_field_doublets() {
        let s = transition_frequencies(&p(), &StaticField::axial(0.0)).unwrap();
        let e = s.eigenvalues_mhz;
        for (got, want) in e.iter().zip([-35.0, -35.0, 35.0, 35.0]) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!((s.f_plus() - 70.0).abs() < 1e-9);
        assert!((s.f_minus() - 70.0).abs() < 1e-9);
    }

    #[test]
    fn upper_line_at_129_gauss() {
        let s = transition_frequencies(&p(), &StaticField::axial(129.0)).unwrap();
        assert!((s.f_plus() - 431.1).abs() < 0.05, "{}", s.f_plus());
        assert!((s.f_plus() - f_plus(&p(), 129.0)).abs() < 1e-6);
        assert!((s.f_minus() - 291.1).abs() < 0.05);
    }

    #[test]
    fn closed_forms() {
        assert_eq!(f_plus(&p(), 0.0), 70.0);
        assert_eq!(f_minus(&p(), 0.0), 70.0);
        assert!((f_plus(&p(), 97.0) - 341.5).abs() < 0.05);
        assert!((f_plus(&p(), 176.0) - 562.7).abs() < 0.05);
        assert!((f_minus(&p(), 20.0) - 14.0).abs() < 0.05);
        let bc = crossing_field_g(&p());
        assert!((bc - 25.0).abs() < 0.05);
        assert!(f_minus(&p(), bc).abs() < 1e-12);
    }

    #[test]
    fn hermitian_and_traceless() {
        for (b, th, ph) in [(0.0, 0.0, 0.0), (97.0, 0.3, 1.0), (500.0, 1.2, -2.0)] {
            let h = hamiltonian(&p(), &StaticField::tilted(b, th, ph));
            assert!(hermiticity_residual(&h) < 1e-12);
            assert!(h.trace().norm() < 1e-10);
        }
    }

    #[test]
    fn sx_element_origin_of_sqrt3() {
        let [sx, _, _] = spin_operators();
        assert!((sx[(0, 1)].re - 3.0_f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((sx[(3, 2)].re - 3.0_f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((sx[(1, 2)].re - 1.0).abs() < 1e-12);
        let s = transition_frequencies(&p(), &StaticField::axial(97.0)).unwrap();
        for t in [s.f_plus_index, s.f_minus_index] {
            assert!((s.transitions[t].sx_element - 3.0_f64.sqrt() / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn azimuthal_invariance() {
        let base = transition_frequencies(&p(), &StaticField::tilted(150.0, 0.7, 0.0)).unwrap();
        for phi in [0.3, 1.0, 2.5, -1.7] {
            let s = transition_frequencies(&p(), &StaticField::tilted(150.0, 0.7, phi)).unwrap();
            for (a, b) in s.eigenvalues_mhz.iter().zip(base.eigenvalues_mhz) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rabi_conversion() {
        assert!((rabi_frequency(&p(), 1.0).unwrap() - 4.848).abs() < 5e-4);
        assert_eq!(rabi_frequency(&p(), 0.0).unwrap(), 0.0);
        let r1 = rabi_frequency(&p(), 1.0).unwrap();
        assert!((rabi_frequency(&p(), 2.0).unwrap() - 2.0 * r1).abs() < 1e-12);
        assert!(rabi_frequency(&p(), -1.0).is_err());
    }

    #[test]
    fn odmr_synthesis_peaks_at_resonances() {
        let grid = uniform_grid(150.0, 400.0, 0.5);
        let shape = PeakShape { amplitude: 0.004, sigma_mhz: 3.0, gamma_mhz: 2.0 };
        let s = synthesize_odmr(&p(), &StaticField::axial(97.0), &[shape, shape], &grid, None)
            .unwrap();
        let fm = f_minus(&p(), 97.0);
        let fp = f_plus(&p(), 97.0);
        let local_max: Vec<f64> = (1..grid.len() - 1)
            .filter(|&i| s.contrast[i] > s.contrast[i - 1] && s.contrast[i] >= s.contrast[i + 1])
            .map(|i| grid[i])
            .collect();
        assert_eq!(local_max.len(), 2);
        assert!((local_max[0] - fm).abs() <= 0.5);
        assert!((local_max[1] - fp).abs() <= 0.5);
        let peak = s.contrast.iter().cloned().fold(0.0, f64::max);
        assert!((0.003..=0.005).contains(&peak));
    }

    #[test]
    fn odmr_synthesis_errors() {
        let grid = uniform_grid(150.0, 400.0, 0.5);
        let bad = PeakShape { amplitude: 0.004, sigma_mhz: 0.0, gamma_mhz: 2.0 };
        assert!(synthesize_odmr(&p(), &StaticField::axial(97.0), &[bad, bad], &grid, None).is_err());
        let ok = PeakShape { amplitude: 0.004, sigma_mhz: 1.0, gamma_mhz: 2.0 };
        let narrow = uniform_grid(300.0, 400.0, 0.5);
        assert!(synthesize_odmr(&p(), &StaticField::axial(97.0), &[ok, ok], &narrow, None).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let grid = uniform_grid(0.0, 2.0, 0.01);
        let n = Some(Noise { sigma: 0.001, seed: 7 });
        let a = synthesize_rabi(0.01, 1.5, 2.0, &grid, n).unwrap();
        let b = synthesize_rabi(0.01, 1.5, 2.0, &grid, n).unwrap();
        assert_eq!(a, b);
        let c = synthesize_rabi(0.01, 1.5, 2.0, &grid, Some(Noise { sigma: 0.001, seed: 8 }))
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rabi_trace_landmarks() {
        let a = 0.01;
        let t = synthesize_rabi(a, 1.0, 1e9, &[0.0, 0.5], None).unwrap();
        assert_eq!(t.contrast[0], -a);
        assert!((t.contrast[1] - a).abs() < 1e-9);
        // extremum at t = T2* = 2 us (integer number of periods)
        let t = synthesize_rabi(a, 1.0, 2.0, &[2.0], None).unwrap();
        assert!((t.contrast[0].abs() - a / std::f64::consts::E).abs() < 1e-9);
        assert!(synthesize_rabi(a, 1.0, 0.0, &[0.0], None).is_err());
        assert!(synthesize_rabi(a, -1.0, 1.0, &[0.0], None).is_err());
    }

    #[test]
    fn series_validation() {
        assert!(RabiTrace::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(RabiTrace::new(vec![-1.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(OdmrSpectrum::new(vec![1.0, 2.0], vec![1.0]).is_err());
    }
}
