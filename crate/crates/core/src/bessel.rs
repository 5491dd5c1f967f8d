//! Modified Bessel functions `K0` and `I0` of real positive argument.
//!
//! Besides the plain functions this module exposes the rescaled pair used
//! by the Green-function integrand,
//!
//! ```text
//! K(τ) = (2/π) K0(τ) = kbar · e^{-τ}
//! I(τ) = 2 I0(τ)     = ibar · e^{+τ}
//! ```
//!
//! where `kbar` and `ibar` stay of order `τ^{-1/2}` for large `τ`, so no
//! overflow or underflow occurs anywhere on `(0, ∞)`.
//!
//! Evaluation strategy:
//!
//! * `I0`, `τ ≤ 8`: power series in `(τ/2)²`, all terms positive.
//! * `I0`, `τ > 8`: Chebyshev expansion of `√τ e^{-τ} I0(τ)` in `32/τ − 2`.
//! * `K0`, `τ ≤ 1`: `−ln(τ/2) I0(τ) + Σ (H_k − γ) (τ²/4)^k / (k!)²`.
//! * `K0`, `1 < τ ≤ 20`: trapezoidal rule on `e^{τ} K0(τ) = ∫_0^∞ exp(−2τ sinh²(t/2)) dt`,
//!   whose integrand is positive and analytic in a strip, so the rule
//!   converges geometrically without cancellation.
//! * `K0`, `τ > 20`: Hankel asymptotic series, truncated before the
//!   smallest term (which is below `e^{-2τ}`).

use std::f64::consts::{FRAC_2_PI, PI};

use thiserror::Error;

use crate::dd::Dd;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest argument for which `I0` is finite in double precision.
pub const I0_OVERFLOW_THRESHOLD: f64 = 713.986_908_543_968_2;

/// Upper end of the `I0` power-series branch.
pub const I0_SERIES_MAX: f64 = 8.0;
/// Upper end of the logarithmic-series branch of `K0`.
pub const K0_SERIES_MAX: f64 = 1.0;
/// Lower end of the asymptotic branch of `K0`.
pub const K0_ASYMPTOTIC_MIN: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum BesselError {
    #[error("argument {0} is outside the domain of the function")]
    Domain(f64),
    #[error("I0({tau}) overflows double precision (threshold {threshold}); use the scaled form")]
    Overflow { tau: f64, threshold: f64 },
}

/// Exponentially rescaled values of `K(τ) = (2/π)K0(τ)` and `I(τ) = 2I0(τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselPair {
    /// `e^{τ} (2/π) K0(τ)`
    pub kbar: f64,
    /// `e^{-τ} 2 I0(τ)`
    pub ibar: f64,
    pub tau: f64,
}

/// `1/(k!)²`, correctly rounded.
const I0_SERIES: [f64; 25] = [
    1.0,
    1.0,
    0.25,
    0.027777777777777776,
    0.001736111111111111,
    6.944444444444444e-05,
    1.9290123456790124e-06,
    3.936759889140842e-08,
    6.151187326782565e-10,
    7.594058428126624e-12,
    7.594058428126623e-14,
    6.276081345559193e-16,
    4.358389823304995e-18,
    2.5789288895295828e-20,
    1.3157800456783586e-22,
    5.8479113141260385e-25,
    2.2843403570804838e-27,
    7.904291893012054e-30,
    2.4395962632753253e-32,
    6.757884385804225e-35,
    1.6894710964510564e-37,
    3.8310002187098785e-40,
    7.915289708078262e-43,
    1.4962740468957016e-45,
    2.5976979980828152e-48,
];

/// `(H_k − γ)/(k!)²` with `H_k` the harmonic numbers, correctly rounded.
const K0_SERIES: [f64; 14] = [
    -0.5772156649015329,
    0.42278433509846713,
    0.23069608377461678,
    0.0348921574564389,
    0.0026147876188052093,
    0.00011848039364109726,
    3.6126241031992037e-06,
    7.935096521304209e-08,
    1.3167486730385647e-09,
    1.709994072705808e-11,
    1.785934656987074e-13,
    1.5330343403208473e-15,
    1.1009270959725744e-17,
    6.712740659979047e-20,
];

/// Chebyshev coefficients of `√x e^{-x} I0(x)` on `x ≥ 8` in the variable `32/x − 2`
/// (Cephes `i0`).
#[allow(clippy::excessive_precision)]
const I0E_CHEBYSHEV: [f64; 25] = [
    -7.233_180_487_874_754E-18,
    -4.830_504_485_944_182E-18,
    4.465_621_420_296_76E-17,
    3.461_222_867_697_461E-17,
    -2.827_623_980_516_583_6E-16,
    -3.425_485_619_677_219E-16,
    1.772_560_133_056_526_3E-15,
    3.811_680_669_352_622_4E-15,
    -9.554_846_698_828_307E-15,
    -4.150_569_347_287_222E-14,
    1.540_086_217_521_41E-14,
    3.852_778_382_742_142_6E-13,
    7.180_124_451_383_666E-13,
    -1.794_178_531_506_806_2E-12,
    -1.321_581_184_044_771_3E-11,
    -3.149_916_527_963_241_6E-11,
    1.188_914_710_784_643_9E-11,
    4.940_602_388_224_97E-10,
    3.396_232_025_708_386_5E-9,
    2.266_668_990_498_178E-8,
    2.048_918_589_469_063_8E-7,
    2.891_370_520_834_756_7E-6,
    6.889_758_346_916_825E-5,
    3.369_116_478_255_694_3E-3,
    8.044_904_110_141_088E-1,
];

fn chebyshev_sum(x: f64, coeffs: &[f64]) -> f64 {
    let mut b0 = coeffs[0];
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in &coeffs[1..] {
        b2 = b1;
        b1 = b0;
        b0 = x.mul_add(b1, c) - b2;
    }
    0.5 * (b0 - b2)
}

fn horner(t: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc.mul_add(t, c))
}

fn i0_series(x: f64) -> f64 {
    let half = 0.5 * x;
    horner(half * half, &I0_SERIES)
}

fn i0e_chebyshev(x: f64) -> f64 {
    chebyshev_sum(32.0 / x - 2.0, &I0E_CHEBYSHEV) / x.sqrt()
}

fn k0_series(x: f64) -> f64 {
    let half = 0.5 * x;
    let t = half * half;
    horner(t, &K0_SERIES) - half.ln() * i0_series(x)
}

/// `e^{x} K0(x)` from the trapezoidal rule in `t` with step 0.1.
///
/// The truncation point satisfies `2x sinh²(t/2) ≥ 40`; the discretisation
/// error is below `1e-17` relative for `1 ≤ x ≤ 20`.
fn k0e_trapezoid(x: f64) -> f64 {
    const STEP: f64 = 0.1;
    const CUTOFF: f64 = 40.0;
    let mut sum = 0.5;
    let mut k = 1u32;
    loop {
        let s = (0.5 * STEP * f64::from(k)).sinh();
        let arg = 2.0 * x * s * s;
        if arg > CUTOFF {
            break;
        }
        sum += (-arg).exp();
        k += 1;
    }
    STEP * sum
}

fn k0e_asymptotic(x: f64) -> f64 {
    let inv8x = 0.125 / x;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut k = 1.0_f64;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = -term * odd * odd * inv8x / k;
        if next.abs() >= term.abs() || next.abs() < 0.25 * f64::EPSILON * sum.abs() {
            break;
        }
        sum += next;
        term = next;
        k += 1.0;
    }
    (PI / (2.0 * x)).sqrt() * sum
}

fn check_positive(tau: f64) -> Result<(), BesselError> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(BesselError::Domain(tau))
    }
}

/// `e^{τ} K0(τ)` for `τ > 0` (no domain check).
fn k0e_unchecked(tau: f64) -> f64 {
    if tau <= K0_SERIES_MAX {
        k0_series(tau) * tau.exp()
    } else if tau <= K0_ASYMPTOTIC_MIN {
        k0e_trapezoid(tau)
    } else {
        k0e_asymptotic(tau)
    }
}

/// `e^{-τ} I0(τ)` for `τ ≥ 0` (no domain check).
fn i0e_unchecked(tau: f64) -> f64 {
    if tau <= I0_SERIES_MAX {
        i0_series(tau) * (-tau).exp()
    } else {
        i0e_chebyshev(tau)
    }
}

/// Modified Bessel function of the second kind, order zero.
pub fn bessel_k0(tau: f64) -> Result<f64, BesselError> {
    check_positive(tau)?;
    Ok(if tau <= K0_SERIES_MAX {
        k0_series(tau)
    } else if tau <= K0_ASYMPTOTIC_MIN {
        k0e_trapezoid(tau) * (-tau).exp()
    } else {
        k0e_asymptotic(tau) * (-tau).exp()
    })
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(tau: f64) -> Result<f64, BesselError> {
    if tau.is_nan() || tau < 0.0 {
        return Err(BesselError::Domain(tau));
    }
    if tau > I0_OVERFLOW_THRESHOLD {
        return Err(BesselError::Overflow {
            tau,
            threshold: I0_OVERFLOW_THRESHOLD,
        });
    }
    if tau <= I0_SERIES_MAX {
        return Ok(i0_series(tau));
    }
    // Split the exponential so that e^{τ} itself never overflows.
    let half = (0.5 * tau).exp();
    Ok(i0e_chebyshev(tau) * half * half)
}

/// `e^{τ} K0(τ)`.
pub fn bessel_k0_scaled(tau: f64) -> Result<f64, BesselError> {
    check_positive(tau)?;
    Ok(k0e_unchecked(tau))
}

/// `e^{-τ} I0(τ)`.
pub fn bessel_i0_scaled(tau: f64) -> Result<f64, BesselError> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(BesselError::Domain(tau));
    }
    Ok(i0e_unchecked(tau))
}

/// Both rescaled functions of the integrand at once.
pub fn bessel_scaled(tau: f64) -> Result<BesselPair, BesselError> {
    check_positive(tau)?;
    Ok(scaled_pair(tau))
}

/// [`bessel_scaled`] without the domain check, for hot loops that already
/// guarantee `τ > 0`.
pub(crate) fn scaled_pair(tau: f64) -> BesselPair {
    BesselPair {
        kbar: FRAC_2_PI * k0e_unchecked(tau),
        ibar: 2.0 * i0e_unchecked(tau),
        tau,
    }
}

/// Largest argument accepted by [`plain_pair_dd`].
pub(crate) const DD_SERIES_MAX: f64 = 2.0;

/// `((2/π)K0(τ), 2I0(τ))` in double-double from the ascending series,
/// for `0 < τ ≤ DD_SERIES_MAX` (the `K0` cancellation costs about one digit there).
pub(crate) fn plain_pair_dd(tau: Dd) -> (Dd, Dd) {
    let q = tau.square().mul_f64(0.25);
    let mut term = Dd::ONE;
    let mut harmonic = Dd::ZERO;
    let mut i0 = Dd::ONE;
    let mut tail = Dd::ZERO;
    for k in 1..60 {
        let kf = f64::from(k);
        term = (term * q).div_f64(kf * kf);
        harmonic += Dd::ONE.div_f64(kf);
        i0 += term;
        tail += harmonic * term;
        if term.hi < 1e-34 * i0.hi {
            break;
        }
    }
    let log_half = tau.mul_f64(0.5).ln();
    let k0 = tail - (log_half + Dd::EULER_GAMMA) * i0;
    (Dd::FRAC_2_PI * k0, i0.mul_f64(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_double_series() {
        let cases = [
            (1e-10, (23.14178244559887, -1.5128608681756457e-15), (1.0, 2.5000000000000002e-21)),
            (0.01, (4.721244730161095, 2.50625688237564e-16), (1.0000250001562505, -7.574569415490313e-17)),
            (0.5, (0.9244190712276659, -5.4589060988523284e-18), (1.0634833707413236, -7.776752973879811e-17)),
            (1.0, (0.42102443824070834, -9.659705789588543e-18), (1.2660658777520084, -7.057804265547195e-17)),
            (2.0, (0.11389387274953344, -6.7706223918546385e-18), (2.2795853023360673, 2.320678481355194e-18)),
        ];
        for (tau, k, i) in cases {
            let (kk, ii) = plain_pair_dd(Dd::from_f64(tau));
            let k_ref = Dd { hi: k.0, lo: k.1 } * Dd::FRAC_2_PI;
            let i_ref = Dd { hi: i.0 * 2.0, lo: i.1 * 2.0 };
            let ek = ((kk - k_ref).to_f64() / k_ref.hi).abs();
            let ei = ((ii - i_ref).to_f64() / i_ref.hi).abs();
            assert!(ek < 1e-30, "K τ={tau} rel {ek:e}");
            assert!(ei < 1e-31, "I τ={tau} rel {ei:e}");
        }
    }

    fn ulps(a: f64, b: f64) -> f64 {
        (a - b).abs() / (f64::EPSILON * b.abs())
    }

    #[test]
    fn spot_values() {
        let cases = [
            (bessel_k0(1.0).unwrap(), 0.421024438240708),
            (bessel_k0(10.0).unwrap(), 1.77800623161676e-5),
            (bessel_i0(1.0).unwrap(), 1.26606587775201),
            (bessel_i0(10.0).unwrap(), 2815.71662846625),
        ];
        for (got, want) in cases {
            assert!((got - want).abs() <= 1e-14 * want, "{got} vs {want}");
        }
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors() {
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(bessel_k0(bad), Err(BesselError::Domain(_))));
            assert!(bessel_scaled(bad).is_err());
        }
        assert!(matches!(bessel_i0(-1e-300), Err(BesselError::Domain(_))));
        assert!(matches!(bessel_i0(f64::NAN), Err(BesselError::Domain(_))));
        match bessel_i0(714.0) {
            Err(BesselError::Overflow { threshold, .. }) => {
                assert_eq!(threshold, I0_OVERFLOW_THRESHOLD)
            }
            other => panic!("expected overflow, got {other:?}"),
        }
        assert!(bessel_i0(713.98).unwrap().is_finite());
    }

    #[test]
    fn large_argument_limits() {
        assert_eq!(bessel_k0(800.0).unwrap(), 0.0);
        let tau = 1e4;
        let p = bessel_scaled(tau).unwrap();
        let target = (2.0 / PI).sqrt();
        // The first correction, -1/(8τ), is 1.25e-5 at τ = 1e4.
        assert!((p.kbar * tau.sqrt() - target).abs() < 1.1e-5);
        assert!((p.kbar * tau.sqrt() / (target * (1.0 - 0.125 / tau)) - 1.0).abs() < 1e-8);
        assert!((0.5 * p.ibar * (2.0 * PI * tau).sqrt() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn small_argument_limit() {
        let tau = 1e-12;
        let k0 = bessel_k0(tau).unwrap();
        let lead = -(0.5 * tau).ln() - EULER_GAMMA;
        assert!((k0 - lead).abs() < 1e-20 * lead.abs() + 1e-14);
        assert!((bessel_i0(tau).unwrap() - 1.0).abs() < 1e-16);
    }

    #[test]
    fn seams_agree_within_two_ulp() {
        let x = K0_SERIES_MAX;
        let series = k0_series(x) * x.exp();
        let trap = k0e_trapezoid(x);
        assert!(ulps(series, trap) <= 2.0, "K0 seam at {x}: {}", ulps(series, trap));

        let x = K0_ASYMPTOTIC_MIN;
        let trap = k0e_trapezoid(x);
        let asym = k0e_asymptotic(x);
        assert!(ulps(trap, asym) <= 2.0, "K0 seam at {x}: {}", ulps(trap, asym));

        let x = I0_SERIES_MAX;
        let series = i0_series(x) * (-x).exp();
        let cheb = i0e_chebyshev(x);
        assert!(ulps(series, cheb) <= 2.0, "I0 seam at {x}: {}", ulps(series, cheb));
    }

    #[test]
    fn scaled_pair_is_positive() {
        let mut tau = 1e-10;
        while tau < 1e5 {
            let p = bessel_scaled(tau).unwrap();
            assert!(p.kbar > 0.0 && p.ibar > 0.0, "tau = {tau}");
            tau *= 1.7;
        }
    }
}
