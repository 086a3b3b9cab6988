//! Voigt line shape via the Faddeeva function.
//!
//! `w(z)` in the upper half plane is evaluated with Weideman's rational
//! expansion (32 terms), switching to the asymptotic continued-fraction
//! tail far from the origin. The pure Gaussian and pure Lorentzian limits
//! are handled exactly.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::FitError;

const TERMS: usize = 32;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

struct Weideman {
    l: f64,
    /// Polynomial coefficients, highest degree first.
    coeffs: [f64; TERMS],
}

fn weideman() -> &'static Weideman {
    static TABLE: OnceLock<Weideman> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = TERMS;
        let m = 2 * n;
        let m2 = 2 * m;
        let l = (n as f64 / std::f64::consts::SQRT_2).sqrt();
        let f = |k: i64| {
            let theta = k as f64 * PI / m as f64;
            let t = l * (theta / 2.0).tan();
            (-t * t).exp() * (l * l + t * t)
        };
        // f is even in k, so its DFT is a cosine sum
        let mut a = [0.0; TERMS];
        for (idx, slot) in a.iter_mut().enumerate() {
            let j = idx + 1;
            let mut s = f(0);
            for k in 1..m as i64 {
                s += 2.0 * f(k) * (2.0 * PI * k as f64 * j as f64 / m2 as f64).cos();
            }
            *slot = s / m2 as f64;
        }
        a.reverse();
        Weideman { l, coeffs: a }
    })
}

/// Faddeeva function `w(z) = exp(-z^2) erfc(-iz)`.
pub fn faddeeva(z: Complex64) -> Complex64 {
    if z.im < 0.0 {
        // w(z) = 2 exp(-z^2) - w(-z)
        return 2.0 * (-z * z).exp() - faddeeva(-z);
    }
    if z.norm() > 1e3 {
        return asymptotic(z);
    }
    rational(z)
}

fn rational(z: Complex64) -> Complex64 {
    let w = weideman();
    let iz = Complex64::i() * z;
    let denom = w.l - iz;
    let zz = (w.l + iz) / denom;
    let p = w.coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * zz + c);
    2.0 * p / (denom * denom) + FRAC_1_SQRT_PI / denom
}

/// Laplace continued fraction truncated after two levels,
/// `i/sqrt(pi) / (z - (1/2)/(z - 1/z))`; relative error O(|z|^-6).
fn asymptotic(z: Complex64) -> Complex64 {
    let z2 = z * z;
    Complex64::i() * FRAC_1_SQRT_PI * (z2 - 1.0) / (z * (z2 - 1.5))
}

/// Voigt profile (unit area) at offset `x`, Gaussian standard deviation
/// `sigma` and Lorentzian half width `gamma`.
pub fn voigt(x: f64, sigma: f64, gamma: f64) -> Result<f64, FitError> {
    if !(sigma >= 0.0 && gamma >= 0.0) || sigma + gamma == 0.0 {
        return Err(FitError::Precondition(format!(
            "Voigt widths must be >= 0 and not both 0, got sigma={sigma}, gamma={gamma}"
        )));
    }
    Ok(voigt_unchecked(x, sigma, gamma))
}

pub(crate) fn voigt_unchecked(x: f64, sigma: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        let u = x / sigma;
        return (-0.5 * u * u).exp() / (sigma * (2.0 * PI).sqrt());
    }
    if sigma == 0.0 {
        return gamma / (PI * (x * x + gamma * gamma));
    }
    let s = sigma * std::f64::consts::SQRT_2;
    faddeeva(Complex64::new(x / s, gamma / s)).re / (sigma * (2.0 * PI).sqrt())
}

/// Voigt profile scaled to 1 at `x = 0`.
pub fn normalized_voigt(x: f64, sigma: f64, gamma: f64) -> f64 {
    voigt_unchecked(x, sigma, gamma) / voigt_unchecked(0.0, sigma, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson on the Gaussian-Lorentzian convolution integral.
    fn convolution_oracle(x: f64, sigma: f64, gamma: f64) -> f64 {
        let g = |t: f64| (-0.5 * (t / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt());
        let l = |u: f64| gamma / (PI * (u * u + gamma * gamma));
        let f = |t: f64| g(t) * l(x - t);
        #[allow(clippy::too_many_arguments)]
        fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        // split at the Lorentzian centre so the sharp feature sits on a node
        let lo = -14.0 * sigma;
        let hi = 14.0 * sigma;
        let mut knots = vec![lo, hi];
        if x > lo && x < hi {
            knots.insert(1, x);
        }
        knots
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
                let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
                simpson(&f, a, b, fa, fm, fb, whole, 1e-16, 50)
            })
            .sum()
    }

    #[test]
    fn matches_convolution_oracle() {
        for &(x, s, g) in &[
            (0.0, 1.0, 1.0),
            (0.7, 1.0, 1.0),
            (3.0, 1.0, 0.2),
            (-2.0, 0.5, 2.0),
            (10.0, 3.0, 2.0),
            (0.0, 3.0, 0.01),
            (1.0, 0.05, 1.0),
        ] {
            let v = voigt(x, s, g).unwrap();
            let o = convolution_oracle(x, s, g);
            assert!((v - o).abs() <= 1e-6 * o, "x={x} s={s} g={g}: {v} vs {o}");
        }
    }

    #[test]
    fn voigt_at_origin_unit_widths() {
        // frozen from the quadrature oracle; equals exp(1/2) erfc(1/sqrt 2) / sqrt(2 pi)
        let o = convolution_oracle(0.0, 1.0, 1.0);
        assert!((o - 0.208_709_280_520_367_7).abs() < 1e-9, "{o}");
        assert!((voigt(0.0, 1.0, 1.0).unwrap() - o).abs() < 1e-7 * o);
    }

    #[test]
    fn gaussian_and_lorentzian_limits() {
        let g = voigt(0.0, 2.0, 0.0).unwrap();
        assert!((g - 1.0 / (2.0 * (2.0 * PI).sqrt())).abs() < 1e-9);
        let gamma = 1.5;
        let l = voigt(0.0, 1e-8 * gamma, gamma).unwrap();
        assert!((l - 1.0 / (PI * gamma)).abs() < 1e-6 * l);
        assert!(voigt(0.0, 0.0, 0.0).is_err());
        assert!(voigt(0.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn faddeeva_reference_values() {
        // w(0) = 1, w(i) = exp(1) erfc(1)
        assert!((faddeeva(Complex64::new(0.0, 0.0)) - 1.0).norm() < 1e-12);
        let w = faddeeva(Complex64::new(0.0, 1.0));
        assert!((w.re - 0.427_583_576_155_807).abs() < 1e-12 && w.im.abs() < 1e-14);
        // both branches agree at the switch radius
        for z in [Complex64::new(1000.0, 1.0), Complex64::new(600.0, 800.0), Complex64::new(0.5, 1000.0)] {
            let (a, b) = (rational(z), asymptotic(z));
            assert!((a - b).norm() < 1e-9 * b.norm(), "{z}: {a} vs {b}");
        }
    }

    #[test]
    fn shape_properties() {
        for &(s, g) in &[(1.0, 1.0), (3.0, 0.5), (0.2, 2.0)] {
            let xs: Vec<f64> = (0..400).map(|i| i as f64 * 0.05 * (s + g)).collect();
            let vs: Vec<f64> = xs.iter().map(|&x| voigt(x, s, g).unwrap()).collect();
            for (x, v) in xs.iter().zip(&vs) {
                assert!(*v > 0.0);
                assert_eq!(*v, voigt(-x, s, g).unwrap());
            }
            assert!(vs.windows(2).all(|w| w[1] < w[0]));
        }
    }
}
