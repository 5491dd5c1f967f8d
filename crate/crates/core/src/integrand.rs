//! The real-τ integrand for `G_d(ω)`, in overflow-safe form.
//!
//! With `kbar = K e^{τ}` and `ibar = I e^{−τ}`, the term `K^{d−m} I^m e^{∓ωτ}`
//! becomes `kbar^{d−m} ibar^m e^{(2m−d∓ω)τ}`. All such exponents are `≤ 0`,
//! and one of them is exactly zero when `ω` is a van Hove frequency.

use num_complex::Complex64;

use num_bigint::BigInt;
use num_traits::{FromPrimitive, ToPrimitive};

use crate::bessel;
use crate::coefficients::{self, CoefficientError, PhasedInteger};
use crate::dd::{self, Dd};
use crate::quadrature::{Integrand, Sample, SampleDd};

/// Powers at or above this switch to log-space evaluation.
pub const LOG_SPACE_MIN_POWER: u32 = 30;
const LOG_SPACE_MIN_IBAR_POWER: u32 = 512;
const VAN_HOVE_REL_TOL: f64 = 1e-13;
/// Largest dimension evaluated in double-double; `K^d` stays below the
/// double range for every node the rules produce.
pub const DD_MAX_DIM: u32 = 96;
const DD_NOISE_ULPS: f64 = 4.0;

/// Half-width of the window in which `ω` counts as a van Hove frequency.
pub fn van_hove_tolerance(d: u32) -> f64 {
    VAN_HOVE_REL_TOL * f64::from(d.max(1))
}

/// Nearest van Hove frequency `−d + 2n`, `n ∈ [0, d]`, and the distance to it.
pub fn nearest_van_hove(d: u32, omega: f64) -> (f64, f64) {
    let n = ((omega + f64::from(d)) / 2.0).round().clamp(0.0, f64::from(d));
    let v = 2.0 * n - f64::from(d);
    (v, (omega - v).abs())
}

pub fn is_van_hove(d: u32, omega: f64) -> bool {
    nearest_van_hove(d, omega).1 <= van_hove_tolerance(d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailClass {
    Exponential { rate: f64 },
    PowerLaw { power: f64 },
    Divergent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermSpec {
    pub m: u32,
    pub coeff: PhasedInteger,
    /// +1 for the `e^{−ωτ}` sum, −1 for the `e^{ωτ}` sum.
    pub sign: i8,
    pub exponent: f64,
}

#[derive(Debug, Clone, Copy)]
struct Prepared {
    k_power: u32,
    i_power: u32,
    /// Phase of `sign · coeff` as a power of `i`.
    phase: u8,
    scale: f64,
    scale_dd: Dd,
    ln_scale: f64,
    exponent: f64,
    log_space: bool,
    first_sum: bool,
}

#[derive(Debug, Clone)]
pub struct IntegrandSpec {
    d: u32,
    omega: f64,
    j: i64,
    terms: Vec<TermSpec>,
    prepared: Vec<Prepared>,
    /// Inside the band more than one term survives and the integral
    /// cancels; there the small-τ region is evaluated in double-double.
    use_dd: bool,
}

fn magnitude_dd(c: &PhasedInteger, d: u32) -> Dd {
    let hi = c.magnitude_f64();
    let rest = c.magnitude() - BigInt::from_f64(hi).unwrap_or_default();
    Dd { hi, lo: rest.to_f64().unwrap_or(0.0) }.ldexp(-(d as i32))
}

/// Assemble the integrand for `(d, ω)`. Frequencies within
/// [`van_hove_tolerance`] of a van Hove point are moved onto it.
pub fn build_integrand(d: u32, omega: f64) -> Result<IntegrandSpec, CoefficientError> {
    let j0 = coefficients::staircase_j(d, omega)?;
    let (v, dist) = nearest_van_hove(d, omega);
    let omega = if dist <= van_hove_tolerance(d) { v } else { omega };
    let j = if omega == v { coefficients::staircase_j(d, v)? } else { j0 };
    let table = coefficients::coefficient_table(d, j)?;
    let df = f64::from(d);

    let mut terms = Vec::with_capacity(d as usize + 1);
    for (m, c) in table.c.iter().enumerate() {
        if !c.is_zero() {
            let exponent = (2.0 * m as f64 - df - omega).min(0.0);
            terms.push(TermSpec { m: m as u32, coeff: c.clone(), sign: 1, exponent });
        }
    }
    for (m, c) in table.dcoef.iter().enumerate() {
        if !c.is_zero() {
            let exponent = (2.0 * m as f64 - df + omega).min(0.0);
            terms.push(TermSpec { m: m as u32, coeff: c.clone(), sign: -1, exponent });
        }
    }

    let ln_2d = df * std::f64::consts::LN_2;
    let prepared = terms
        .iter()
        .map(|t| {
            let ln_scale = t.coeff.ln_magnitude() - ln_2d;
            let k_power = d - t.m;
            Prepared {
                k_power,
                i_power: t.m,
                phase: (t.coeff.phase() + if t.sign < 0 { 2 } else { 0 }) % 4,
                scale: ln_scale.exp(),
                scale_dd: magnitude_dd(&t.coeff, d),
                ln_scale,
                exponent: t.exponent,
                log_space: k_power >= LOG_SPACE_MIN_POWER || t.m >= LOG_SPACE_MIN_IBAR_POWER,
                first_sum: t.sign > 0,
            }
        })
        .collect();

    let use_dd = d <= DD_MAX_DIM && terms.len() > 1;
    Ok(IntegrandSpec { d, omega, j, terms, prepared, use_dd })
}

impl IntegrandSpec {
    pub fn d(&self) -> u32 {
        self.d
    }

    /// Frequency actually used, after van Hove snapping.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn j(&self) -> i64 {
        self.j
    }

    pub fn terms(&self) -> &[TermSpec] {
        &self.terms
    }

    pub fn max_exponent(&self) -> f64 {
        self.terms.iter().map(|t| t.exponent).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Phase (power of `i`, sign included) of the term with zero exponent.
    pub fn marginal_phase(&self) -> Option<u8> {
        self.terms
            .iter()
            .zip(&self.prepared)
            .find(|(t, _)| t.exponent == 0.0)
            .map(|(_, p)| p.phase)
    }

    /// Value at `τ` and the sum of term magnitudes.
    pub fn sample_at(&self, tau: f64) -> Sample {
        if !(tau > 0.0) {
            let nan = Complex64::new(f64::NAN, f64::NAN);
            return Sample { value: nan, magnitude: f64::NAN };
        }
        let bessel::BesselPair { kbar, ibar, .. } = bessel::scaled_pair(tau);
        let (ln_k, ln_i) = (kbar.ln(), ibar.ln());
        let mut by_phase = [0.0f64; 4];
        for p in &self.prepared {
            let term = if p.log_space {
                (p.ln_scale + f64::from(p.k_power) * ln_k + f64::from(p.i_power) * ln_i + p.exponent * tau).exp()
            } else {
                p.scale
                    * kbar.powi(p.k_power as i32)
                    * ibar.powi(p.i_power as i32)
                    * (p.exponent * tau).exp()
            };
            by_phase[p.phase as usize] += term;
        }
        let value = Complex64::new(by_phase[0] - by_phase[2], by_phase[1] - by_phase[3]);
        Sample { value, magnitude: by_phase.iter().sum() }
    }
}

impl IntegrandSpec {
    /// Double-double evaluation for `τ ≤ 2`, where the terms are largest.
    pub fn sample_at_dd(&self, tau: Dd) -> Option<SampleDd> {
        if !self.use_dd || !(tau.hi > 0.0) || tau.hi > bessel::DD_SERIES_MAX {
            return None;
        }
        let (k, i) = bessel::plain_pair_dd(tau);
        let n = self.d as usize;
        let mut kpow = [Dd::ONE; DD_MAX_DIM as usize + 1];
        let mut ipow = [Dd::ONE; DD_MAX_DIM as usize + 1];
        for p in 1..=n {
            kpow[p] = kpow[p - 1] * k;
            ipow[p] = ipow[p - 1] * i;
        }
        let e_minus = (-tau.mul_f64(self.omega)).exp();
        let e_plus = Dd::ONE / e_minus;
        let mut by_phase = [Dd::ZERO; 4];
        let mut magnitude = 0.0;
        for p in &self.prepared {
            // the plain form: K^{d−m} I^m e^{∓ωτ}
            let e = if p.first_sum { e_minus } else { e_plus };
            let term = p.scale_dd * kpow[p.k_power as usize] * ipow[p.i_power as usize] * e;
            magnitude += term.hi;
            by_phase[p.phase as usize] += term;
        }
        Some(SampleDd {
            re: by_phase[0] - by_phase[2],
            im: by_phase[1] - by_phase[3],
            magnitude,
            rel_noise: DD_NOISE_ULPS * f64::from(self.d.max(1)) * dd::EPSILON,
        })
    }
}

impl Integrand for IntegrandSpec {
    fn sample(&self, x: f64) -> Sample {
        self.sample_at(x)
    }

    fn sample_dd(&self, x: Dd) -> Option<SampleDd> {
        self.sample_at_dd(x)
    }
}

pub fn eval_integrand(spec: &IntegrandSpec, tau: f64) -> Complex64 {
    spec.sample_at(tau).value
}

pub fn tail_class(spec: &IntegrandSpec) -> TailClass {
    let top = spec.max_exponent();
    if top < 0.0 {
        TailClass::Exponential { rate: -top }
    } else if spec.d >= 3 {
        TailClass::PowerLaw { power: -f64::from(spec.d) / 2.0 }
    } else {
        TailClass::Divergent
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::bessel_k0;
    use std::f64::consts::FRAC_2_PI;

    fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
        (a - b).norm() <= rel * b.norm()
    }

    #[test]
    fn cubic_band_center() {
        let s = build_integrand(3, 0.0).unwrap();
        assert_eq!(s.terms().len(), 4);
        assert_eq!(s.j(), 1);
        let k = FRAC_2_PI * 0.421_024_438_240_708_3;
        let expect = Complex64::new(0.0, -0.5 * k * k * k);
        assert!(close(eval_integrand(&s, 1.0), expect, 1e-14), "{}", eval_integrand(&s, 1.0));
        assert_eq!(tail_class(&s), TailClass::Exponential { rate: 1.0 });
    }

    #[test]
    fn cubic_above_band_is_single_term() {
        let s = build_integrand(3, 4.0).unwrap();
        assert_eq!(s.terms().len(), 1);
        assert_eq!(s.terms()[0].exponent, -1.0);
        assert_eq!(s.terms()[0].m, 3);
        let tau = 0.7;
        let i = 2.0 * crate::bessel::bessel_i0(tau).unwrap();
        let expect = Complex64::new(i * i * i * (-4.0 * tau).exp() / 8.0, 0.0);
        assert!(close(eval_integrand(&s, tau), expect, 1e-14));
    }

    #[test]
    fn chain_band_center() {
        let s = build_integrand(1, 0.0).unwrap();
        let expect = Complex64::new(0.0, -FRAC_2_PI * 0.421_024_438_240_708_3);
        assert!(close(eval_integrand(&s, 1.0), expect, 1e-14));
        let k = FRAC_2_PI * bessel_k0(3.0).unwrap();
        assert!(close(eval_integrand(&s, 3.0), Complex64::new(0.0, -k), 1e-14));
    }

    #[test]
    fn tail_classes() {
        assert_eq!(tail_class(&build_integrand(5, 3.0).unwrap()), TailClass::PowerLaw { power: -2.5 });
        assert_eq!(tail_class(&build_integrand(1, 1.0).unwrap()), TailClass::Divergent);
        assert_eq!(tail_class(&build_integrand(2, 0.0).unwrap()), TailClass::Divergent);
        assert_eq!(tail_class(&build_integrand(2, 1e-14).unwrap()), TailClass::Divergent);
        assert!(matches!(tail_class(&build_integrand(2, 1e-9).unwrap()), TailClass::Exponential { .. }));
    }

    #[test]
    fn exponent_bookkeeping() {
        for d in 1..=8u32 {
            let df = f64::from(d);
            let mut omega = -df - 2.0;
            while omega <= df + 2.0 {
                let s = build_integrand(d, omega).unwrap();
                assert!(s.terms().iter().all(|t| t.exponent <= 0.0));
                let expect = if omega.abs() <= df { -nearest_van_hove(d, omega).1 } else { -(omega.abs() - df) };
                assert!((s.max_exponent() - expect).abs() < 1e-12, "d={d} ω={omega}");
                assert_eq!(s.marginal_phase().is_some(), is_van_hove(d, omega));
                omega += 0.125;
            }
        }
    }

    #[test]
    fn underflow_gives_zero() {
        let s = build_integrand(4, 30.0).unwrap();
        assert_eq!(eval_integrand(&s, 600.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn log_space_seam() {
        // d = 30 uses log space for m = 0 and plain products for m ≥ 1
        let plain = |d: u32, omega: f64, tau: f64| -> Complex64 {
            let s = build_integrand(d, omega).unwrap();
            let crate::bessel::BesselPair { kbar: kb, ibar: ib, .. } = crate::bessel::scaled_pair(tau);
            let mut z = Complex64::new(0.0, 0.0);
            for t in s.terms() {
                let mag = t.coeff.magnitude_f64() / 2f64.powi(d as i32);
                let v = mag * kb.powi((d - t.m) as i32) * ib.powi(t.m as i32) * (t.exponent * tau).exp();
                z += t.coeff.to_complex() / t.coeff.magnitude_f64() * v * f64::from(t.sign);
            }
            z
        };
        for d in [29u32, 30, 31] {
            for tau in [1e-3, 0.1, 1.0, 5.0] {
                let s = build_integrand(d, 0.5).unwrap();
                let got = s.sample_at(tau);
                let want = plain(d, 0.5, tau);
                assert!((got.value - want).norm() <= 1e-13 * got.magnitude, "d={d} τ={tau}");
            }
        }
    }
}
