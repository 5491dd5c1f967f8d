//! Staircase index and exact coefficient tables.
//!
//! The integrand for piece `j` of dimension `d` is
//!
//! ```text
//! 2^{-d} [ e^{-ωτ} Σ_{m=0}^{j} C_jm K^{d-m} I^m  −  e^{ωτ} Σ_{m=0}^{d-j-1} D_jm K^{d-m} I^m ]
//! C_jm = Σ_{n=m}^{j}     binom(d,n) binom(n,m) i^{2n-d-m}
//! D_jm = Σ_{n=m}^{d-j-1} binom(d,n) binom(n,m) i^{d+m-2n}
//! ```
//!
//! Because `i^{2n} = (−1)^n`, every coefficient is an integer times a fixed
//! quarter-turn phase, so the tables are held exactly as [`PhasedInteger`]s.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoefficientError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("frequency {0} is not finite")]
    NonFiniteFrequency(f64),
    #[error("piece index {j} outside [-1, {d}]")]
    PieceOutOfRange { d: u32, j: i64 },
}

/// `magnitude · i^phase` with `magnitude ≥ 0` and `phase ∈ {0,1,2,3}`.
///
/// Negative integers are stored with the sign folded into the phase
/// (`−n = n·i²`); zero is stored with phase 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhasedInteger {
    magnitude: BigInt,
    phase: u8,
}

impl PhasedInteger {
    pub fn new(value: BigInt, phase: i64) -> Self {
        let mut phase = phase.rem_euclid(4) as u8;
        if value.is_zero() {
            return Self { magnitude: value, phase: 0 };
        }
        let magnitude = if value.is_negative() {
            phase = (phase + 2) % 4;
            -value
        } else {
            value
        };
        Self { magnitude, phase }
    }

    pub fn magnitude(&self) -> &BigInt {
        &self.magnitude
    }

    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn is_zero(&self) -> bool {
        self.magnitude.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self {
            magnitude: self.magnitude.clone(),
            phase: (4 - self.phase) % 4,
        }
    }

    /// Nearest double to the magnitude (infinite beyond the double range).
    pub fn magnitude_f64(&self) -> f64 {
        self.magnitude.to_f64().unwrap_or(f64::INFINITY)
    }

    /// Natural log of the magnitude, accurate even when the magnitude
    /// exceeds the double range.
    pub fn ln_magnitude(&self) -> f64 {
        let bits = self.magnitude.bits();
        if bits < 1000 {
            return self.magnitude_f64().ln();
        }
        let shift = bits - 64;
        let top: BigInt = &self.magnitude >> shift;
        top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
    }

    pub fn to_complex(&self) -> Complex64 {
        let m = self.magnitude_f64();
        match self.phase {
            0 => Complex64::new(m, 0.0),
            1 => Complex64::new(0.0, m),
            2 => Complex64::new(-m, 0.0),
            _ => Complex64::new(0.0, -m),
        }
    }
}

impl fmt::Display for PhasedInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.phase {
            0 => write!(f, "{}", self.magnitude),
            1 => write!(f, "{}i", self.magnitude),
            2 => write!(f, "-{}", self.magnitude),
            _ => write!(f, "-{}i", self.magnitude),
        }
    }
}

/// `C_jm` (m = 0..=j) and `D_jm` (m = 0..d-j) for one `(d, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub d: u32,
    pub j: i64,
    pub c: Vec<PhasedInteger>,
    pub dcoef: Vec<PhasedInteger>,
}

/// `floor((ω + d)/2)` clamped to `[-1, d]`.
pub fn staircase_j(d: u32, omega: f64) -> Result<i64, CoefficientError> {
    if d == 0 {
        return Err(CoefficientError::ZeroDimension);
    }
    if !omega.is_finite() {
        return Err(CoefficientError::NonFiniteFrequency(omega));
    }
    let raw = ((omega + f64::from(d)) / 2.0).floor();
    Ok(raw.clamp(-1.0, f64::from(d)) as i64)
}

fn binomial_row(n: u32) -> Vec<BigInt> {
    let mut row = vec![BigInt::from(1u32)];
    for k in 1..=n {
        let next = &row[k as usize - 1] * BigInt::from(n - k + 1) / BigInt::from(k);
        row.push(next);
    }
    row
}

/// `Σ_{n=m}^{upper} (−1)^n binom(d,n) binom(n,m)`.
fn alternating_sum(d_row: &[BigInt], pascal: &[Vec<BigInt>], m: usize, upper: usize) -> BigInt {
    let mut acc = BigInt::zero();
    for n in m..=upper {
        let term = &d_row[n] * &pascal[n][m];
        if n % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

fn build_table(d: u32, j: i64) -> CoefficientTable {
    let d_row = binomial_row(d);
    let pascal: Vec<Vec<BigInt>> = (0..=d).map(binomial_row).collect();
    let di = i64::from(d);

    let c = (0..=j.max(-1))
        .filter(|&m| m >= 0)
        .map(|m| {
            let mag = alternating_sum(&d_row, &pascal, m as usize, j as usize);
            PhasedInteger::new(mag, -(di + m))
        })
        .collect();

    let upper = di - j - 1;
    let dcoef = (0..=upper.max(-1))
        .filter(|&m| m >= 0)
        .map(|m| {
            let mag = alternating_sum(&d_row, &pascal, m as usize, upper as usize);
            PhasedInteger::new(mag, di + m)
        })
        .collect();

    CoefficientTable { d, j, c, dcoef }
}

type TableCache = RwLock<HashMap<(u32, i64), Arc<CoefficientTable>>>;

fn cache() -> &'static TableCache {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Exact coefficient table for `(d, j)`, built once and shared.
pub fn coefficient_table(d: u32, j: i64) -> Result<Arc<CoefficientTable>, CoefficientError> {
    if d == 0 {
        return Err(CoefficientError::ZeroDimension);
    }
    if j < -1 || j > i64::from(d) {
        return Err(CoefficientError::PieceOutOfRange { d, j });
    }
    if let Some(table) = cache().read().unwrap().get(&(d, j)) {
        return Ok(Arc::clone(table));
    }
    let table = Arc::new(build_table(d, j));
    let mut guard = cache().write().unwrap();
    Ok(Arc::clone(guard.entry((d, j)).or_insert(table)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi(v: i64, phase: i64) -> PhasedInteger {
        PhasedInteger::new(BigInt::from(v), phase)
    }

    #[test]
    fn staircase_examples() {
        assert_eq!(staircase_j(3, 0.0).unwrap(), 1);
        assert_eq!(staircase_j(3, 3.5).unwrap(), 3);
        assert_eq!(staircase_j(3, -3.5).unwrap(), -1);
        assert_eq!(staircase_j(3, -100.0).unwrap(), -1);
        assert_eq!(staircase_j(3, 100.0).unwrap(), 3);
        // van Hove points go to the upper piece
        assert_eq!(staircase_j(3, -1.0).unwrap(), 1);
        assert_eq!(staircase_j(3, -3.0).unwrap(), 0);
        assert!(staircase_j(0, 0.0).is_err());
        assert!(staircase_j(2, f64::NAN).is_err());
    }

    #[test]
    fn cubic_middle_piece() {
        let t = coefficient_table(3, 1).unwrap();
        assert_eq!(t.c, vec![pi(-2, 1), pi(-3, 0)]);
        assert_eq!(t.dcoef, vec![pi(2, 1), pi(-3, 0)]);
    }

    #[test]
    fn cubic_lower_piece() {
        let t = coefficient_table(3, 0).unwrap();
        assert_eq!(t.c, vec![pi(1, 1)]);
        assert_eq!(t.dcoef, vec![pi(-1, 1), pi(3, 0), pi(3, 1)]);
    }

    #[test]
    fn magnitudes_match_partial_alternating_identity() {
        // Σ_{n=m}^{u} (−1)^n C(d,n) C(n,m) = (−1)^u C(d,m) C(d−m−1, u−m) for u < d
        for d in 1..=12u32 {
            let d_row = binomial_row(d);
            for j in -1..=i64::from(d) {
                let t = coefficient_table(d, j).unwrap();
                for (m, c) in t.c.iter().enumerate() {
                    let expect = if j == i64::from(d) {
                        if m as u32 == d { BigInt::from(1) } else { BigInt::zero() }
                    } else {
                        &d_row[m] * &binomial_row(d - m as u32 - 1)[j as usize - m]
                    };
                    assert_eq!(c.magnitude(), &expect, "C d={d} j={j} m={m}");
                }
                let upper = i64::from(d) - j - 1;
                for (m, dc) in t.dcoef.iter().enumerate() {
                    let expect = if upper == i64::from(d) {
                        if m as u32 == d { BigInt::from(1) } else { BigInt::zero() }
                    } else {
                        &d_row[m] * &binomial_row(d - m as u32 - 1)[upper as usize - m]
                    };
                    assert_eq!(dc.magnitude(), &expect, "D d={d} j={j} m={m}");
                }
            }
        }
    }

    #[test]
    fn cubic_top_piece_and_chain() {
        let t = coefficient_table(3, 3).unwrap();
        assert_eq!(t.c, vec![pi(0, 0), pi(0, 0), pi(0, 0), pi(1, 0)]);
        assert!(t.dcoef.is_empty());

        let t = coefficient_table(1, 0).unwrap();
        assert_eq!(t.c, vec![pi(-1, 1)]);
        assert_eq!(t.dcoef, vec![pi(1, 1)]);
        assert_eq!(t.c[0].to_complex(), Complex64::new(0.0, -1.0));
    }

    #[test]
    fn table_lengths_and_range() {
        for d in 1..=9u32 {
            for j in -1..=i64::from(d) {
                let t = coefficient_table(d, j).unwrap();
                assert_eq!(t.c.len() as i64, j + 1);
                assert_eq!(t.dcoef.len() as i64, i64::from(d) - j);
            }
            assert!(coefficient_table(d, -2).is_err());
            assert!(coefficient_table(d, i64::from(d) + 1).is_err());
        }
    }

    #[test]
    fn canonical_phase() {
        let p = pi(-5, 7);
        assert_eq!(p.phase(), 1);
        assert_eq!(p.magnitude(), &BigInt::from(5));
        assert_eq!(pi(0, 3).phase(), 0);
        assert_eq!(pi(4, 1).conj(), pi(4, 3));
        assert_eq!(format!("{}", pi(-2, 1)), "-2i");
    }

    #[test]
    fn ln_magnitude_beyond_double_range() {
        let big = BigInt::from(3u32).pow(1000);
        let p = PhasedInteger::new(big, 0);
        let expect = 1000.0 * 3f64.ln();
        assert!((p.ln_magnitude() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn large_dimension_is_exact() {
        // binomial products exceed 64 bits here
        let t = coefficient_table(80, 40).unwrap();
        assert!(t.c[0].magnitude().bits() > 64);
    }
}
