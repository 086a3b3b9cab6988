//! ODMR (multi-Voigt) and Rabi (damped cosine) fits with automatic
//! initialization.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lm::{lm_fit, Bound, CurveProblem, LmOptions, LmReport};
use super::voigt::{normalized_voigt, voigt_unchecked};
use crate::error::FitError;
use crate::spinphys::{rabi_model, OdmrSpectrum, RabiTrace};

const SMOOTHING_WINDOW: usize = 5;
/// Local maxima must rise this many noise deviations above the baseline.
const DETECTION_SIGMAS: f64 = 5.0;
const MIN_GAMMA_MHZ: f64 = 1e-9;
const MIN_T2_STAR_US: f64 = 1e-9;
const ZERO_PADDING: usize = 4;

/// One Voigt peak. `amplitude` is the peak contrast above the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoigtParams {
    pub center_mhz: f64,
    pub sigma_mhz: f64,
    pub gamma_mhz: f64,
    pub amplitude: f64,
}

impl VoigtParams {
    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.sigma_mhz >= 0.0 && self.gamma_mhz >= 0.0)
            || self.sigma_mhz + self.gamma_mhz == 0.0
        {
            return Err(FitError::Precondition(format!(
                "Voigt widths must be >= 0 and not both 0, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn eval(&self, f_mhz: f64) -> f64 {
        self.amplitude * normalized_voigt(f_mhz - self.center_mhz, self.sigma_mhz, self.gamma_mhz)
    }
}

/// Named fit output, serialized as
/// `{model, params, stderr, residual_norm, iterations, converged}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub stderr: BTreeMap<String, f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    fn from_report(model: &str, names: &[String], report: &LmReport) -> Self {
        let params = names.iter().cloned().zip(report.params.iter().copied()).collect();
        let stderr = names.iter().cloned().zip(report.std_errors.iter().copied()).collect();
        Self {
            model: model.to_string(),
            params,
            stderr,
            residual_norm: report.residual_norm,
            iterations: report.iterations,
            converged: report.converged,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrInit {
    pub baseline: f64,
    pub peaks: Vec<VoigtParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdmrFit {
    pub baseline: f64,
    /// Sorted by centre frequency.
    pub peaks: Vec<VoigtParams>,
    pub result: FitResult,
}

impl OdmrFit {
    pub fn centers_mhz(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.center_mhz).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiInit {
    pub a_rabi: f64,
    pub f_rabi_mhz: f64,
    pub t2_star_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RabiFit {
    pub a_rabi: f64,
    pub f_rabi_mhz: f64,
    pub t2_star_us: f64,
    pub result: FitResult,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn moving_average(y: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..y.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(y.len());
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// White-noise deviation from the median absolute deviation of successive
/// differences, insensitive to smooth peaks.
fn noise_estimate(y: &[f64]) -> f64 {
    let d: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let m = median(&d);
    let dev: Vec<f64> = d.iter().map(|v| (v - m).abs()).collect();
    1.482_6 * median(&dev) / std::f64::consts::SQRT_2
}

/// Peak guesses from smoothed local maxima, strongest first, skipping any
/// maximum inside an already accepted peak's half-prominence region.
fn auto_init_odmr(spectrum: &OdmrSpectrum, n_peaks: usize) -> Result<OdmrInit, FitError> {
    let f = &spectrum.frequencies_mhz;
    let y = &spectrum.contrast;
    let baseline = median(y);
    let smooth = moving_average(y, SMOOTHING_WINDOW);
    let threshold = DETECTION_SIGMAS * noise_estimate(y);
    let n = y.len();

    let mut candidates: Vec<(usize, f64)> = (1..n - 1)
        .filter(|&i| smooth[i] > smooth[i - 1] && smooth[i] >= smooth[i + 1])
        .map(|i| (i, smooth[i] - baseline))
        .filter(|&(_, prom)| prom > threshold && prom > 0.0)
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut regions: Vec<(usize, usize)> = Vec::new();
    let mut peaks = Vec::new();
    for (i, prom) in candidates {
        if regions.iter().any(|&(lo, hi)| (lo..=hi).contains(&i)) {
            continue;
        }
        let half = baseline + 0.5 * prom;
        let mut lo = i;
        while lo > 0 && smooth[lo - 1] > half {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < n && smooth[hi + 1] > half {
            hi += 1;
        }
        regions.push((lo, hi));
        let span = if hi > lo { f[hi] - f[lo] } else { f[1] - f[0] };
        peaks.push(VoigtParams {
            center_mhz: f[i],
            sigma_mhz: 0.5 * span,
            gamma_mhz: 0.5 * span,
            amplitude: y[i] - baseline,
        });
        if peaks.len() == n_peaks {
            break;
        }
    }
    if peaks.len() < n_peaks {
        return Err(FitError::Initialization(format!(
            "expected {n_peaks} peak(s) but found {} local maxima above the noise",
            peaks.len()
        )));
    }
    peaks.sort_by(|a, b| a.center_mhz.total_cmp(&b.center_mhz));
    Ok(OdmrInit { baseline, peaks })
}

/// Fits `baseline + sum amplitude_k * V(f - center_k)` with `V` the Voigt
/// profile scaled to unit height.
pub fn fit_odmr(
    spectrum: &OdmrSpectrum,
    n_peaks: usize,
    init: Option<&OdmrInit>,
) -> Result<OdmrFit, FitError> {
    if !(1..=2).contains(&n_peaks) {
        return Err(FitError::Precondition(format!("n_peaks must be 1 or 2, got {n_peaks}")));
    }
    let f = &spectrum.frequencies_mhz;
    let needed = 8 * n_peaks;
    if f.len() < needed {
        return Err(FitError::TooFewPoints { needed, got: f.len() });
    }
    let init = match init {
        Some(i) => {
            if i.peaks.len() != n_peaks {
                return Err(FitError::Precondition(format!(
                    "initial guess has {} peaks, n_peaks is {n_peaks}",
                    i.peaks.len()
                )));
            }
            for p in &i.peaks {
                p.validate()?;
            }
            i.clone()
        }
        None => auto_init_odmr(spectrum, n_peaks)?,
    };

    // work relative to the band centre so a uniform shift of the axis
    // leaves the problem unchanged
    let reference = 0.5 * (f[0] + f[f.len() - 1]);
    let xs: Vec<f64> = f.iter().map(|v| v - reference).collect();
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);

    let mut initial = vec![init.baseline];
    let mut bounds = vec![Bound::FREE];
    for p in &init.peaks {
        initial.extend([
            (p.center_mhz - reference).clamp(lo, hi),
            p.sigma_mhz.max(0.0),
            p.gamma_mhz.max(MIN_GAMMA_MHZ),
            p.amplitude,
        ]);
        bounds.extend([
            Bound::between(lo, hi),
            Bound::at_least(0.0),
            Bound::at_least(MIN_GAMMA_MHZ),
            Bound::FREE,
        ]);
    }

    let model = |x: f64, p: &[f64]| {
        p[0] + p[1..]
            .chunks_exact(4)
            .map(|q| q[3] * voigt_unchecked(x - q[0], q[1], q[2]) / voigt_unchecked(0.0, q[1], q[2]))
            .sum::<f64>()
    };
    let problem = CurveProblem { xs: &xs, ys: &spectrum.contrast, model };
    let report = lm_fit(&problem, &initial, &bounds, &LmOptions::default())?;

    let mut peaks: Vec<(VoigtParams, [f64; 4])> = report.params[1..]
        .chunks_exact(4)
        .zip(report.std_errors[1..].chunks_exact(4))
        .map(|(q, e)| {
            (
                VoigtParams {
                    center_mhz: q[0] + reference,
                    sigma_mhz: q[1],
                    gamma_mhz: q[2],
                    amplitude: q[3],
                },
                [e[0], e[1], e[2], e[3]],
            )
        })
        .collect();
    peaks.sort_by(|a, b| a.0.center_mhz.total_cmp(&b.0.center_mhz));

    let mut names = vec!["baseline_contrast".to_string()];
    let mut values = vec![report.params[0]];
    let mut errors = vec![report.std_errors[0]];
    for (k, (p, e)) in peaks.iter().enumerate() {
        let k = k + 1;
        names.extend([
            format!("center_{k}_mhz"),
            format!("sigma_{k}_mhz"),
            format!("gamma_{k}_mhz"),
            format!("amplitude_{k}_contrast"),
        ]);
        values.extend([p.center_mhz, p.sigma_mhz, p.gamma_mhz, p.amplitude]);
        errors.extend(e);
    }
    let sorted = LmReport { params: values, std_errors: errors, ..report.clone() };
    Ok(OdmrFit {
        baseline: report.params[0],
        peaks: peaks.into_iter().map(|(p, _)| p).collect(),
        result: FitResult::from_report("odmr_voigt", &names, &sorted),
    })
}

/// Dominant frequency of the mean-subtracted trace from a zero-padded
/// discrete Fourier transform, refined by a parabola through the peak bin.
fn dominant_frequency(t: &[f64], y: &[f64]) -> Result<f64, FitError> {
    let n = t.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let spread = y.iter().fold(0.0_f64, |m, v| m.max((v - mean).abs()));
    if spread <= 1e-12 * mean.abs() || spread == 0.0 {
        return Err(FitError::Initialization(
            "trace is constant; supply an initial guess".into(),
        ));
    }
    let span = t[n - 1] - t[0];
    let df = 1.0 / (ZERO_PADDING as f64 * n as f64 * span / (n - 1) as f64);
    let bins = ZERO_PADDING * n / 2;
    let mags: Vec<f64> = (1..=bins)
        .map(|k| {
            let w = -2.0 * PI * k as f64 * df;
            t.iter()
                .zip(y)
                .map(|(&ti, &yi)| (yi - mean) * Complex64::from_polar(1.0, w * ti))
                .sum::<Complex64>()
                .norm()
        })
        .collect();
    let (peak, &peak_mag) = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("at least one bin");
    let med = median(&mags);
    if !(peak_mag > 0.0 && peak_mag >= 2.0 * med) {
        return Err(FitError::Initialization(format!(
            "Fourier peak is indistinct ({peak_mag:.3e} vs median {med:.3e}); \
             supply an initial guess"
        )));
    }
    let mut offset = 0.0;
    if peak > 0 && peak + 1 < mags.len() {
        let (a, b, c) = (mags[peak - 1], mags[peak], mags[peak + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        }
    }
    Ok((peak as f64 + 1.0 + offset) * df)
}

/// Fits `C(t) = -A cos(2 pi f t) exp(-t / T2*)`.
pub fn fit_rabi(trace: &RabiTrace, init: Option<&RabiInit>) -> Result<RabiFit, FitError> {
    let t = &trace.durations_us;
    let y = &trace.contrast;
    if t.len() < 8 {
        return Err(FitError::TooFewPoints { needed: 8, got: t.len() });
    }
    let span = t[t.len() - 1] - t[0];
    let init = match init {
        Some(i) => *i,
        None => {
            let f0 = dominant_frequency(t, y)?;
            RabiInit { a_rabi: y[0].abs(), f_rabi_mhz: f0, t2_star_us: span }
        }
    };
    if !(init.f_rabi_mhz * span >= 1.0) {
        return Err(FitError::Precondition(format!(
            "trace spans {span} us, less than one period at {} MHz",
            init.f_rabi_mhz
        )));
    }
    let initial = [init.a_rabi, init.f_rabi_mhz, init.t2_star_us.max(MIN_T2_STAR_US)];
    let bounds = [Bound::FREE, Bound::at_least(0.0), Bound::at_least(MIN_T2_STAR_US)];
    let problem = CurveProblem { xs: t, ys: y, model: |x: f64, p: &[f64]| rabi_model(x, p[0], p[1], p[2]) };
    let report = lm_fit(&problem, &initial, &bounds, &LmOptions::default())?;
    let names = ["a_rabi_contrast", "f_rabi_mhz", "t2_star_us"].map(String::from);
    Ok(RabiFit {
        a_rabi: report.params[0],
        f_rabi_mhz: report.params[1],
        t2_star_us: report.params[2],
        result: FitResult::from_report("rabi_damped_cosine", &names, &report),
    })
}
