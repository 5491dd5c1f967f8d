//! Independent checks on the main evaluator: exact walk-count moments and
//! the Laurent series, the chain closed form, density-of-states convolution,
//! Brillouin-zone sums, and the oscillatory `J0(t)^d` Fourier integral.

use std::cell::RefCell;
use std::f64::consts::{FRAC_2_PI, PI};

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::green::{self, GreenError};
use crate::integrand;
use crate::quadrature::{self, QuadratureConfig, QuadratureError, QuadratureResult};

pub const MAX_MOMENT_K: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("truncation too coarse: tail bound {bound:.3e} exceeds {tol:.3e}")]
    TruncationTooCoarse { bound: f64, tol: f64 },
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

fn domain(msg: impl Into<String>) -> OracleError {
    OracleError::Domain(msg.into())
}

/// Even moments `m_{2k} = ∫ ω^{2k} A_d(ω) dω = W_d(2k) / 4^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub d: u32,
    pub moments: Vec<BigRational>,
}

impl MomentTable {
    pub fn kmax(&self) -> usize {
        self.moments.len() - 1
    }

    /// `m_{2k} / d^{2k}` as a double; lies in `(0, 1]`.
    pub fn normalized(&self, k: usize) -> f64 {
        let scale = BigInt::from(self.d).pow(2 * k as u32);
        (&self.moments[k] / BigRational::from_integer(scale)).to_f64().unwrap_or(0.0)
    }
}

fn central_binomials(kmax: usize) -> Vec<BigUint> {
    let mut out = vec![BigUint::one()];
    for k in 1..=kmax {
        // C(2k,k) = C(2k−2,k−1)·(2k)(2k−1)/k²
        let prev = &out[k - 1];
        out.push(prev * BigUint::from(2 * k) * BigUint::from(2 * k - 1) / BigUint::from(k * k));
    }
    out
}

fn binomial_table(n: usize) -> Vec<Vec<BigUint>> {
    let mut rows: Vec<Vec<BigUint>> = vec![vec![BigUint::one()]];
    for i in 1..=n {
        let prev = &rows[i - 1];
        let mut row = vec![BigUint::one(); i + 1];
        for j in 1..i {
            row[j] = &prev[j - 1] + &prev[j];
        }
        rows.push(row);
    }
    rows
}

/// Closed walks of length `2k`, `k = 0..=kmax`, on the `d`-dimensional
/// integer lattice, by convolving one dimension at a time:
/// `W_d(2k) = Σ_j C(2k,2j) W_1(2j) W_{d−1}(2k−2j)`.
pub fn walk_counts(d: u32, kmax: usize) -> Vec<BigUint> {
    let one_d = central_binomials(kmax);
    let binom = binomial_table(2 * kmax);
    let mut w = one_d.clone();
    for _ in 1..d {
        w = (0..=kmax)
            .map(|k| {
                (0..=k)
                    .map(|j| &binom[2 * k][2 * j] * &one_d[j] * &w[k - j])
                    .fold(BigUint::zero(), |a, b| a + b)
            })
            .collect();
    }
    w
}

pub fn moments(d: u32, kmax: usize) -> Result<MomentTable, OracleError> {
    if d == 0 {
        return Err(domain("dimension must be at least 1"));
    }
    if kmax > MAX_MOMENT_K {
        return Err(domain(format!("kmax {kmax} exceeds {MAX_MOMENT_K}")));
    }
    let moments = walk_counts(d, kmax)
        .into_iter()
        .enumerate()
        .map(|(k, w)| {
            let den = BigInt::from(4u32).pow(k as u32);
            BigRational::new(BigInt::from(w), den)
        })
        .collect();
    Ok(MomentTable { d, moments })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaurentResult {
    pub value: f64,
    /// Bound on the omitted terms `k > kmax`.
    pub truncation_bound: f64,
    pub kmax: usize,
}

fn laurent_sum(table: &MomentTable, omega: f64, kmax: usize) -> LaurentResult {
    let d = f64::from(table.d);
    let r = (d / omega).powi(2);
    let mut sum = 0.0;
    let mut ratio_pow = 1.0;
    for k in 0..=kmax {
        sum += table.normalized(k) * ratio_pow;
        ratio_pow *= r;
    }
    // m_{2k+2} ≤ d² m_{2k}, so the tail is dominated by a geometric series
    let last = table.normalized(kmax) * r.powi(kmax as i32);
    let bound = last * r / (1.0 - r) / omega.abs();
    LaurentResult { value: sum / omega, truncation_bound: bound, kmax }
}

/// `Σ_{k ≤ kmax} m_{2k} ω^{−2k−1}` for `|ω| > d`.
pub fn laurent_green(d: u32, omega: f64, kmax: usize) -> Result<LaurentResult, OracleError> {
    if !(omega.abs() > f64::from(d)) || !omega.is_finite() {
        return Err(domain(format!("Laurent series needs |ω| > d, got ω={omega}, d={d}")));
    }
    let table = moments(d, kmax)?;
    Ok(laurent_sum(&table, omega, kmax))
}

/// Laurent series with the smallest `kmax ≤ 200` whose truncation bound is
/// below `tol`.
pub fn laurent_green_auto(d: u32, omega: f64, tol: f64) -> Result<LaurentResult, OracleError> {
    if !(omega.abs() > f64::from(d)) || !omega.is_finite() {
        return Err(domain(format!("Laurent series needs |ω| > d, got ω={omega}, d={d}")));
    }
    let table = moments(d, MAX_MOMENT_K)?;
    let mut best = laurent_sum(&table, omega, 0);
    for kmax in 0..=MAX_MOMENT_K {
        best = laurent_sum(&table, omega, kmax);
        if best.truncation_bound <= tol {
            return Ok(best);
        }
    }
    Err(OracleError::TruncationTooCoarse { bound: best.truncation_bound, tol })
}

/// `G_1(ω)`: `sign(ω)/sqrt(ω²−1)` outside the band, `−i/sqrt(1−ω²)` inside.
pub fn g1_closed_form(omega: f64) -> Result<Complex64, OracleError> {
    if !omega.is_finite() || omega.abs() == 1.0 {
        return Err(domain(format!("G_1 is singular or undefined at ω={omega}")));
    }
    if omega.abs() > 1.0 {
        Ok(Complex64::new(omega.signum() / ((omega - 1.0) * (omega + 1.0)).sqrt(), 0.0))
    } else {
        Ok(Complex64::new(0.0, -1.0 / ((1.0 - omega) * (1.0 + omega)).sqrt()))
    }
}

/// `A_1(ω) = 1/(π sqrt(1−ω²))` on the open band, 0 outside.
pub fn dos_1d(omega: f64) -> f64 {
    if omega.abs() < 1.0 {
        1.0 / (PI * ((1.0 - omega) * (1.0 + omega)).sqrt())
    } else {
        0.0
    }
}

fn outer_config(cfg: &QuadratureConfig) -> QuadratureConfig {
    QuadratureConfig {
        rel_tol: cfg.rel_tol.max(1e-11),
        abs_tol: cfg.abs_tol.max(1e-13),
        max_levels: cfg.max_levels.min(8),
        split_point: cfg.split_point,
    }
}

/// `A_d` from the closed form (d = 1) or the main evaluator; 0 where the
/// evaluator reports a divergence, since such points carry no mass.
fn dos_any(d: u32, omega: f64, cfg: &QuadratureConfig) -> Result<f64, OracleError> {
    if d == 1 {
        return Ok(dos_1d(omega));
    }
    let r = green::evaluate(d, omega, cfg)?;
    Ok(if r.divergent { 0.0 } else { r.dos() })
}

fn accumulate(total: &mut QuadratureResult, piece: Result<QuadratureResult, QuadratureError>) -> Result<(), OracleError> {
    let piece = match piece {
        Ok(q) | Err(QuadratureError::NonConvergence(q)) => q,
        Err(e) => return Err(e.into()),
    };
    total.value += piece.value;
    total.abs_error_estimate += piece.abs_error_estimate;
    total.evaluations += piece.evaluations;
    total.converged &= piece.converged;
    Ok(())
}

fn empty_result() -> QuadratureResult {
    QuadratureResult { value: Complex64::new(0.0, 0.0), abs_error_estimate: 0.0, evaluations: 0, converged: true }
}

/// `∫ A_{d1}(x) A_{d2}(ω − x) dx`, which equals `A_{d1+d2}(ω)`.
///
/// The range is split at every van Hove point of either factor. For `d1 = 1`
/// the substitution `x = −cos θ` removes the inverse square roots at the
/// chain band edges. `cfg` drives the inner evaluations; the outer rule runs
/// at `rel_tol ≥ 1e-11` with at most 8 levels.
pub fn dos_convolution(d1: u32, d2: u32, omega: f64, cfg: &QuadratureConfig) -> Result<QuadratureResult, OracleError> {
    if d1 == 0 || d2 == 0 {
        return Err(domain("dimensions must be at least 1"));
    }
    if !omega.is_finite() {
        return Err(domain("frequency must be finite"));
    }
    let d = d1 + d2;
    if d <= 2 && integrand::is_van_hove(d, omega) {
        return Err(domain(format!("A_{d} diverges at ω={omega}")));
    }
    let (f1, f2) = (f64::from(d1), f64::from(d2));
    let lo = (-f1).max(omega - f2);
    let hi = f1.min(omega + f2);
    if lo >= hi {
        return Ok(empty_result());
    }
    let mut cuts: Vec<f64> = green::van_hove_points(d1)
        .into_iter()
        .chain(green::van_hove_points(d2).into_iter().map(|v| omega - v))
        .filter(|&x| x > lo && x < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let outer = outer_config(cfg);
    let mut total = empty_result();
    let failure = RefCell::new(None);
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let piece = if d1 == 1 {
            // A_1(x) dx = dθ/π with x = −cos θ
            let (ta, tb) = ((-a).clamp(-1.0, 1.0).acos(), (-b).clamp(-1.0, 1.0).acos());
            let f = |theta: f64| match dos_any(d2, omega + theta.cos(), cfg) {
                Ok(v) => v / PI,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            };
            quadrature::integrate_finite_real(f, ta, tb, &outer)
        } else {
            let f = |x: f64| match (dos_any(d1, x, cfg), dos_any(d2, omega - x, cfg)) {
                (Ok(p), Ok(q)) => p * q,
                (Err(e), _) | (_, Err(e)) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            };
            quadrature::integrate_finite_real(f, a, b, &outer)
        };
        accumulate(&mut total, piece)?;
    }
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Midpoint-rule estimate of `G_d(ω + iη) = ⟨1/(ω + iη − Σ cos k_i)⟩` over
/// the Brillouin zone, using `n` points per axis on `[0, π]`.
pub fn bz_bruteforce(d: u32, omega: f64, eta: f64, n: usize) -> Result<Complex64, OracleError> {
    if !(1..=3).contains(&d) {
        return Err(domain("brute-force sums are limited to d ≤ 3"));
    }
    if n < 64 {
        return Err(domain("need at least 64 points per axis"));
    }
    let spacing = PI / n as f64;
    if !(eta >= spacing) || !omega.is_finite() {
        return Err(domain(format!("η={eta} must be finite and at least the grid spacing {spacing:.3e}")));
    }
    let c: Vec<f64> = (0..n).map(|i| ((i as f64 + 0.5) * spacing).cos()).collect();
    let z = Complex64::new(omega, eta);
    let sum: Complex64 = match d {
        1 => c.iter().map(|&a| 1.0 / (z - a)).sum(),
        2 => c.iter().flat_map(|&a| c.iter().map(move |&b| 1.0 / (z - a - b))).sum(),
        _ => {
            use rayon::prelude::*;
            c.par_iter()
                .map(|&a| {
                    let mut s = Complex64::new(0.0, 0.0);
                    for &b in &c {
                        for &e in &c {
                            s += 1.0 / (z - a - b - e);
                        }
                    }
                    s
                })
                .sum()
        }
    };
    Ok(sum / (n as f64).powi(d as i32))
}

/// `G_d(ω + iη) = ∫ A_d(ε)/(ω + iη − ε) dε` from the main evaluator's DOS,
/// split at the van Hove points and at `ε = ω`.
pub fn lorentz_broadened_green(d: u32, omega: f64, eta: f64, cfg: &QuadratureConfig) -> Result<Complex64, OracleError> {
    if d == 0 || !(eta > 0.0) || !omega.is_finite() {
        return Err(domain("need d ≥ 1, η > 0 and finite ω"));
    }
    let mut cuts = green::van_hove_points(d);
    let df = f64::from(d);
    for extra in [omega - eta, omega, omega + eta] {
        if extra > -df && extra < df {
            cuts.push(extra);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let outer = outer_config(cfg);
    let z = Complex64::new(omega, eta);
    let mut total = empty_result();
    let failure = RefCell::new(None);
    for pair in cuts.windows(2) {
        let f = |e: f64| match dos_any(d, e, cfg) {
            Ok(a) => a / (z - e),
            Err(err) => {
                failure.borrow_mut().get_or_insert(err);
                Complex64::new(0.0, 0.0)
            }
        };
        accumulate(&mut total, quadrature::integrate_finite(&f, pair[0], pair[1], &outer))?;
    }
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(total.value),
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if m == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

const FOURIER_GL_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierResult {
    pub value: Complex64,
    /// Estimate of `|∫_{tmax}^∞ e^{iωt} J0(t)^d dt|`.
    pub tail_bound: f64,
}

/// Tail estimate for the truncated `J0^d` Fourier integral.
///
/// `|J0(t)| ≤ sqrt(2/(πt))`; each harmonic `e^{i(ω+d−2n)t}` of the
/// asymptotic expansion gains a factor `1/|ω+d−2n|` from integration by
/// parts. When some harmonic is at zero frequency the bound falls back to
/// the absolute integral of the envelope.
pub fn fourier_tail_bound(d: u32, omega: f64, tmax: f64) -> f64 {
    let df = f64::from(d);
    let envelope = (FRAC_2_PI / tmax).powf(df / 2.0);
    let nu_min = (0..=d).map(|n| (omega + df - 2.0 * f64::from(n)).abs()).fold(f64::INFINITY, f64::min);
    if nu_min > 1e-9 {
        2.0 * envelope / nu_min
    } else if d > 2 {
        envelope * tmax / (df / 2.0 - 1.0)
    } else {
        f64::INFINITY
    }
}

/// `−i ∫_0^{tmax} e^{iωt} J0(t)^d dt` by composite Gauss–Legendre on `n`
/// panels, refusing when the tail estimate exceeds `tol`.
pub fn bessel_j_fourier(d: u32, omega: f64, tmax: f64, n: usize, tol: f64) -> Result<FourierResult, OracleError> {
    if d == 0 || !omega.is_finite() || !(tmax > 0.0) || !tmax.is_finite() || n == 0 {
        return Err(domain("need d ≥ 1, finite ω, tmax > 0 and n ≥ 1"));
    }
    let tail_bound = fourier_tail_bound(d, omega, tmax);
    if !(tail_bound <= tol) {
        return Err(OracleError::TruncationTooCoarse { bound: tail_bound, tol });
    }
    let panel = tmax / n as f64;
    // resolve the fastest oscillation, frequency |ω| + d
    if panel * (omega.abs() + f64::from(d)) > 2.0 {
        return Err(domain(format!("panel width {panel:.3e} too coarse for frequency {}", omega.abs() + f64::from(d))));
    }
    let (x, w) = gauss_legendre(FOURIER_GL_POINTS);
    let mut sum = Complex64::new(0.0, 0.0);
    for p in 0..n {
        let mid = (p as f64 + 0.5) * panel;
        let mut s = Complex64::new(0.0, 0.0);
        for (xi, wi) in x.iter().zip(&w) {
            let t = mid + 0.5 * panel * xi;
            let j = libm::j0(t).powi(d as i32);
            s += Complex64::from_polar(wi * j, omega * t);
        }
        sum += s * (0.5 * panel);
    }
    Ok(FourierResult { value: Complex64::new(0.0, -1.0) * sum, tail_bound })
}
