//! `G_d(ω)` on the real axis (retarded, `Im G ≤ 0`) and the density of
//! states `A_d(ω) = −Im G_d(ω)/π`.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::coefficients::CoefficientError;
use crate::integrand::{self, TailClass};
use crate::quadrature::{self, QuadratureConfig, QuadratureError, QuadratureResult};

/// Distance from a van Hove frequency below which a result is flagged
/// as adjacent to it.
pub const VAN_HOVE_ADJACENT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenResult {
    pub omega: f64,
    pub d: u32,
    pub value: Complex64,
    pub abs_error: f64,
    pub piece_j: i64,
    pub van_hove_adjacent: bool,
    pub divergent: bool,
    pub converged: bool,
    pub evaluations: usize,
}

impl GreenResult {
    pub fn dos(&self) -> f64 {
        -self.value.im / std::f64::consts::PI
    }

    /// Short labels for the flags that are set, in a fixed order.
    pub fn flags(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.divergent {
            out.push("divergent");
        }
        if !self.converged {
            out.push("nonconverged");
        }
        if self.van_hove_adjacent {
            out.push("van_hove_adjacent");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GreenError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("G_{} diverges at the van Hove frequency {}", .0.d, .0.omega)]
    DivergentAtVanHove(Box<GreenResult>),
    #[error("quadrature did not converge for d={} at ω={} (error {:.3e})", .0.d, .0.omega, .0.abs_error)]
    NonConvergence(Box<GreenResult>),
}

impl GreenError {
    /// The flagged result carried by divergence and convergence failures.
    pub fn result(&self) -> Option<&GreenResult> {
        match self {
            GreenError::InvalidInput(_) => None,
            GreenError::DivergentAtVanHove(r) | GreenError::NonConvergence(r) => Some(r),
        }
    }
}

impl From<CoefficientError> for GreenError {
    fn from(e: CoefficientError) -> Self {
        GreenError::InvalidInput(e.to_string())
    }
}

fn signed_infinity(phase: u8) -> Complex64 {
    match phase {
        0 => Complex64::new(f64::INFINITY, 0.0),
        1 => Complex64::new(0.0, f64::INFINITY),
        2 => Complex64::new(f64::NEG_INFINITY, 0.0),
        _ => Complex64::new(0.0, f64::NEG_INFINITY),
    }
}

fn divergent_value(d: u32, v: f64) -> Result<Complex64, GreenError> {
    // At ω = −|v| the staircase picks the piece on the other side of the
    // singularity, so take the mirror image to keep G(−ω) = −conj G(ω).
    let spec = integrand::build_integrand(d, v.abs())?;
    let z = signed_infinity(spec.marginal_phase().unwrap_or(0));
    Ok(if v < 0.0 { -z.conj() } else { z })
}

/// Evaluate `G_d(ω)`; divergence and non-convergence are reported through
/// the flags of the result rather than as errors.
pub fn evaluate(d: u32, omega: f64, cfg: &QuadratureConfig) -> Result<GreenResult, GreenError> {
    cfg.validate().map_err(|e| GreenError::InvalidInput(e.to_string()))?;
    let spec = integrand::build_integrand(d, omega)?;
    let (_, dist) = integrand::nearest_van_hove(d, omega);
    let mut out = GreenResult {
        omega,
        d,
        value: Complex64::new(0.0, 0.0),
        abs_error: 0.0,
        piece_j: spec.j(),
        van_hove_adjacent: dist <= VAN_HOVE_ADJACENT,
        divergent: false,
        converged: true,
        evaluations: 0,
    };
    let tail = integrand::tail_class(&spec);
    if tail == TailClass::Divergent {
        out.value = divergent_value(d, spec.omega())?;
        out.divergent = true;
        return Ok(out);
    }
    let q = match quadrature::integrate_semiinfinite(&spec, tail, cfg) {
        Ok(q) | Err(QuadratureError::NonConvergence(q)) => q,
        Err(e) => return Err(GreenError::InvalidInput(e.to_string())),
    };
    out.value = q.value;
    out.abs_error = q.abs_error_estimate;
    out.converged = q.converged;
    out.evaluations = q.evaluations;
    Ok(out)
}

/// `G_d(ω)`, with divergence and non-convergence returned as errors that
/// still carry the flagged result.
pub fn green_local(d: u32, omega: f64, cfg: &QuadratureConfig) -> Result<GreenResult, GreenError> {
    let r = evaluate(d, omega, cfg)?;
    if r.divergent {
        Err(GreenError::DivergentAtVanHove(Box::new(r)))
    } else if !r.converged {
        Err(GreenError::NonConvergence(Box::new(r)))
    } else {
        Ok(r)
    }
}

pub fn dos(d: u32, omega: f64, cfg: &QuadratureConfig) -> Result<f64, GreenError> {
    green_local(d, omega, cfg).map(|r| r.dos())
}

/// Element-wise [`evaluate`] in parallel, preserving input order.
pub fn green_sweep(d: u32, omegas: &[f64], cfg: &QuadratureConfig) -> Result<Vec<GreenResult>, GreenError> {
    if let Some(bad) = omegas.iter().find(|w| !w.is_finite()) {
        return Err(GreenError::InvalidInput(format!("frequency {bad} is not finite")));
    }
    omegas.par_iter().map(|&w| evaluate(d, w, cfg)).collect()
}

/// Van Hove frequencies `−d, −d+2, …, d`.
pub fn van_hove_points(d: u32) -> Vec<f64> {
    (0..=d).map(|n| 2.0 * f64::from(n) - f64::from(d)).collect()
}

/// `∫ ω^power A_d(ω) dω` over the band, split at the van Hove frequencies.
///
/// Quadrature nodes that land on a divergent van Hove point (d ≤ 2) are
/// moved just outside its snapping window, toward the interior of the piece.
pub fn dos_moment(
    d: u32,
    power: u32,
    inner: &QuadratureConfig,
    outer: &QuadratureConfig,
) -> Result<QuadratureResult, GreenError> {
    if d == 0 {
        return Err(CoefficientError::ZeroDimension.into());
    }
    inner.validate().map_err(|e| GreenError::InvalidInput(e.to_string()))?;
    let window = 2.0 * integrand::van_hove_tolerance(d);
    let points = van_hove_points(d);
    let mut total = QuadratureResult {
        value: Complex64::new(0.0, 0.0),
        abs_error_estimate: 0.0,
        evaluations: 0,
        converged: true,
    };
    if d == 1 {
        // ω = −cos θ absorbs the inverse square roots at both band edges;
        // the Jacobian is recomputed from the rounded ω so that A·dω/dθ
        // stays smooth even where ω ± 1 has few significant bits.
        let f = |theta: f64| {
            let w = (-theta.cos()).clamp(-1.0 + window, 1.0 - window);
            let jac = ((1.0 + w) * (1.0 - w)).sqrt();
            let a_w = evaluate(1, w, inner).map(|r| r.dos()).unwrap_or(f64::NAN);
            a_w * jac * w.powi(power as i32)
        };
        return quadrature::integrate_finite_real(f, 0.0, std::f64::consts::PI, outer)
            .or_else(|e| match e {
                QuadratureError::NonConvergence(q) => Ok(q),
                e => Err(GreenError::InvalidInput(e.to_string())),
            });
    }
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let f = |w: f64| {
            let w = if d <= 2 && integrand::is_van_hove(d, w) {
                if (w - a).abs() < (w - b).abs() { a + window } else { b - window }
            } else {
                w
            };
            let a_w = evaluate(d, w, inner).map(|r| r.dos()).unwrap_or(f64::NAN);
            a_w * w.powi(power as i32)
        };
        let piece = match quadrature::integrate_finite_real(f, a, b, outer) {
            Ok(q) | Err(QuadratureError::NonConvergence(q)) => q,
            Err(e) => return Err(GreenError::InvalidInput(e.to_string())),
        };
        total.value += piece.value;
        total.abs_error_estimate += piece.abs_error_estimate;
        total.evaluations += piece.evaluations;
        total.converged &= piece.converged;
    }
    Ok(total)
}
