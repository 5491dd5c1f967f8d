//! Double-exponential quadrature on finite intervals and on `(0, ∞)`.
//!
//! Finite pieces use tanh-sinh; the semi-infinite tail uses exp-sinh when it
//! decays exponentially and `τ = s/u` followed by tanh-sinh when it decays as
//! a power. Abscissae are stored as distances from both endpoints so nodes
//! that sit `1e-275` away from a singular endpoint are still resolved.
//!
//! Refinement halves the step; each level reuses the previous sum. The error
//! estimate is the change between the last two levels, floored at one ulp of
//! the value and at a rounding-noise estimate `Σ w·noise(f)`, which matters
//! when the integral is much smaller than the integral of `|f|`. Nodes,
//! weights and running sums are kept in double-double so that integrands
//! able to evaluate in double-double are not limited by the rule itself.

use std::sync::OnceLock;

use num_complex::Complex64;
use thiserror::Error;

use crate::dd::Dd;
use crate::integrand::TailClass;

/// Step of level 0; level `L` uses `H0 / 2^L`.
const H0: f64 = 0.5;
const TANH_SINH_EXTENT: f64 = 6.0;
const EXP_SINH_EXTENT: f64 = 4.5;
const MIN_LEVELS: u32 = 3;
/// Hard cap on refinement depth regardless of configuration.
pub const MAX_LEVELS_CAP: u32 = 20;
/// Level-0 contributions below this fraction of `Σ w|f|` (and below a
/// small multiple of `abs_tol`) mark the ends of the usable range.
const PRUNE: f64 = 1e-20;
const PRUNE_ABS: f64 = 1e-3;
const NOISE_ULPS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_levels: u32,
    pub split_point: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            abs_tol: 1e-15,
            max_levels: 12,
            split_point: 1.0,
        }
    }
}

impl QuadratureConfig {
    /// Looser preset for large sweeps.
    pub fn fast() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_levels: 8,
            split_point: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), QuadratureError> {
        let bad = |msg: &str| Err(QuadratureError::InvalidConfig(msg.to_string()));
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return bad("rel_tol must be positive");
        }
        if !(self.abs_tol > 0.0) || !self.abs_tol.is_finite() {
            return bad("abs_tol must be positive");
        }
        if self.max_levels < MIN_LEVELS || self.max_levels > MAX_LEVELS_CAP {
            return bad("max_levels must lie in [3, 20]");
        }
        if !(self.split_point > 0.0) || !self.split_point.is_finite() {
            return bad("split_point must be positive");
        }
        Ok(())
    }

    pub fn tolerance_for(&self, value: Complex64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(String),
    #[error("integral diverges")]
    DivergentIntegral,
    #[error("no convergence within the level budget (estimate {:.3e}, error {:.3e})", .0.value, .0.abs_error_estimate)]
    NonConvergence(QuadratureResult),
}

/// A function value plus the magnitude used for the rounding-noise estimate.
///
/// For a sum of terms the magnitude should be the sum of term magnitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: Complex64,
    pub magnitude: f64,
}

impl Sample {
    pub fn new(value: Complex64) -> Self {
        Self { value, magnitude: value.norm() }
    }
}

/// A double-double sample; `rel_noise` is the relative rounding error to
/// assume for `magnitude`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleDd {
    pub re: Dd,
    pub im: Dd,
    pub magnitude: f64,
    pub rel_noise: f64,
}

pub trait Integrand {
    fn sample(&self, x: f64) -> Sample;

    /// Extended-precision evaluation at an extended-precision abscissa,
    /// where available. Integrands whose integral suffers heavy cancellation
    /// should provide it.
    fn sample_dd(&self, _x: Dd) -> Option<SampleDd> {
        None
    }
}

impl<F: Fn(f64) -> Complex64> Integrand for F {
    fn sample(&self, x: f64) -> Sample {
        Sample::new(self(x))
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    x: f64,
    /// Fraction of the interval measured from the left end (tanh-sinh), or
    /// the abscissa `t` itself (exp-sinh).
    left: Dd,
    /// Fraction measured from the right end (tanh-sinh only).
    right: Dd,
    weight: Dd,
}

fn tanh_sinh_node(x: f64) -> Node {
    let (sh, ch) = Dd::from_f64(x).sinh_cosh();
    let u = Dd::FRAC_PI_2 * sh;
    // e = e^{−2|u|}; 1/(2cosh²u) = 2e/(1+e)²
    let e = (-u.abs().mul_f64(2.0)).exp();
    let one_e = Dd::ONE + e;
    let (small, large) = (e / one_e, Dd::ONE / one_e);
    let (left, right) = if u.hi >= 0.0 { (large, small) } else { (small, large) };
    let weight = Dd::FRAC_PI_2 * ch * e.mul_f64(2.0) / one_e.square();
    Node { x, left, right, weight }
}

fn exp_sinh_node(x: f64) -> Node {
    let (sh, ch) = Dd::from_f64(x).sinh_cosh();
    let t = (Dd::FRAC_PI_2 * sh).exp();
    Node { x, left: t, right: Dd::ZERO, weight: Dd::FRAC_PI_2 * ch * t }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Rule {
    TanhSinh,
    ExpSinh,
}

impl Rule {
    fn extent(self) -> f64 {
        match self {
            Rule::TanhSinh => TANH_SINH_EXTENT,
            Rule::ExpSinh => EXP_SINH_EXTENT,
        }
    }

    fn node(self, x: f64) -> Node {
        match self {
            Rule::TanhSinh => tanh_sinh_node(x),
            Rule::ExpSinh => exp_sinh_node(x),
        }
    }
}

type LevelTable = Vec<OnceLock<Vec<Node>>>;

fn level_tables(rule: Rule) -> &'static LevelTable {
    static TS: OnceLock<LevelTable> = OnceLock::new();
    static ES: OnceLock<LevelTable> = OnceLock::new();
    let cell = match rule {
        Rule::TanhSinh => &TS,
        Rule::ExpSinh => &ES,
    };
    cell.get_or_init(|| (0..=MAX_LEVELS_CAP).map(|_| OnceLock::new()).collect())
}

/// Nodes first introduced at `level`, in increasing `x`.
fn level_nodes(rule: Rule, level: u32) -> &'static [Node] {
    level_tables(rule)[level as usize].get_or_init(|| {
        let extent = rule.extent();
        if level == 0 {
            let n = (extent / H0).round() as i64;
            (-n..=n).map(|k| rule.node(k as f64 * H0)).collect()
        } else {
            let h = H0 / f64::from(1u32 << level);
            let n = (extent / h).round() as i64;
            (-n..n)
                .filter(|k| k.rem_euclid(2) == 1)
                .map(|k| rule.node(k as f64 * h))
                .collect()
        }
    })
}

/// How abscissae of a rule map onto the integration variable.
#[derive(Clone, Copy)]
enum Map {
    Finite { a: f64, b: f64 },
    Tail { a: f64 },
    Inverse { split: f64 },
}

/// A weighted sample `w · f(x) · dx/dt` with its noise bound.
#[derive(Clone, Copy, Default)]
struct Weighted {
    re: Dd,
    im: Dd,
    magnitude: f64,
    noise: f64,
}

impl Map {
    fn rule(self) -> Rule {
        match self {
            Map::Tail { .. } => Rule::ExpSinh,
            _ => Rule::TanhSinh,
        }
    }

    /// Abscissa and Jacobian-times-weight, or `None` when the node falls
    /// outside the open interval in working precision.
    fn place(self, node: &Node) -> Option<(Dd, Dd)> {
        if node.weight.hi == 0.0 {
            return None;
        }
        match self {
            Map::Finite { a, b } => {
                let len = b - a;
                let x = if node.left.hi <= node.right.hi {
                    Dd::from_f64(a) + node.left.mul_f64(len)
                } else {
                    Dd::from_f64(b) - node.right.mul_f64(len)
                };
                let inside = (x - Dd::from_f64(a)).hi > 0.0 && (Dd::from_f64(b) - x).hi > 0.0;
                inside.then(|| (x, node.weight.mul_f64(len)))
            }
            Map::Tail { a } => {
                let x = Dd::from_f64(a) + node.left;
                (x.is_finite() && node.left.hi > 0.0).then_some((x, node.weight))
            }
            Map::Inverse { split } => {
                // x = split/u, dx = (x/u) du
                let u = node.left;
                if u.hi <= 0.0 || node.right.hi <= 0.0 {
                    return None;
                }
                let x = Dd::from_f64(split) / u;
                (x.is_finite()).then(|| (x, x / u * node.weight))
            }
        }
    }

    fn contribution<F: Integrand + ?Sized>(self, f: &F, node: &Node) -> Weighted {
        let Some((x, jac)) = self.place(node) else {
            return Weighted::default();
        };
        let (re, im, magnitude, rel_noise) = match f.sample_dd(x) {
            Some(s) => (s.re, s.im, s.magnitude, s.rel_noise),
            None => {
                let s = f.sample(x.to_f64());
                (Dd::from_f64(s.value.re), Dd::from_f64(s.value.im), s.magnitude, NOISE_ULPS * f64::EPSILON)
            }
        };
        if magnitude == 0.0 {
            return Weighted::default();
        }
        let w = Weighted {
            re: re * jac,
            im: im * jac,
            magnitude: magnitude * jac.hi,
            noise: rel_noise * magnitude * jac.hi,
        };
        // a node sitting on an integrable singularity carries no weight
        if w.re.is_finite() && w.im.is_finite() && w.magnitude.is_finite() {
            w
        } else {
            Weighted::default()
        }
    }
}

/// One refinable trapezoid sum in the transformed variable.
struct Segment {
    map: Map,
    lo: f64,
    hi: f64,
    /// Σ w f over all nodes so far, before multiplying by the step.
    re: Dd,
    im: Dd,
    abs_sum: f64,
    noise_sum: f64,
    evaluations: usize,
}

impl Segment {
    fn add(&mut self, w: &Weighted) {
        self.re += w.re;
        self.im += w.im;
        self.abs_sum += w.magnitude;
        self.noise_sum += w.noise;
    }

    fn start<F: Integrand + ?Sized>(map: Map, f: &F, cfg: &QuadratureConfig) -> Self {
        let nodes = level_nodes(map.rule(), 0);
        let samples: Vec<(f64, Weighted)> = nodes.iter().map(|n| (n.x, map.contribution(f, n))).collect();
        let total: f64 = samples.iter().map(|(_, s)| s.magnitude).sum();
        let cutoff = (PRUNE * total).min(PRUNE_ABS * cfg.abs_tol);
        let first = samples.iter().position(|(_, s)| s.magnitude > cutoff);
        let last = samples.iter().rposition(|(_, s)| s.magnitude > cutoff);
        let extent = map.rule().extent();
        let (lo, hi) = match (first, last) {
            (Some(i), Some(k)) => ((samples[i].0 - H0).max(-extent), (samples[k].0 + H0).min(extent)),
            _ => (0.0, 0.0),
        };
        let mut seg = Segment {
            map,
            lo,
            hi,
            re: Dd::ZERO,
            im: Dd::ZERO,
            abs_sum: 0.0,
            noise_sum: 0.0,
            evaluations: nodes.len(),
        };
        for (x, w) in &samples {
            if *x >= lo && *x <= hi {
                seg.add(w);
            }
        }
        seg
    }

    fn refine<F: Integrand + ?Sized>(&mut self, f: &F, level: u32) {
        for node in level_nodes(self.map.rule(), level) {
            if node.x < self.lo || node.x > self.hi {
                continue;
            }
            self.evaluations += 1;
            let w = self.map.contribution(f, node);
            self.add(&w);
        }
    }

    /// Current estimate `h · Σ w f` in double-double.
    fn total(&self, level: u32) -> (Dd, Dd) {
        let e = -(level as i32) - 1;
        (self.re.ldexp(e), self.im.ldexp(e))
    }
}

/// Refines all segments together until the summed estimate converges.
fn run<F: Integrand + ?Sized>(f: &F, maps: &[Map], cfg: &QuadratureConfig) -> QuadratureResult {
    debug_assert_eq!(H0, 0.5);
    let mut segments: Vec<Segment> = maps.iter().map(|&m| Segment::start(m, f, cfg)).collect();
    let totals = |segs: &[Segment], level: u32| -> Vec<(Dd, Dd)> { segs.iter().map(|s| s.total(level)).collect() };
    let sum = |t: &[(Dd, Dd)]| -> Complex64 {
        let (re, im) = t.iter().fold((Dd::ZERO, Dd::ZERO), |(a, b), (r, i)| (a + *r, b + *i));
        Complex64::new(re.to_f64(), im.to_f64())
    };
    let mut previous = totals(&segments, 0);
    let mut result = QuadratureResult {
        value: sum(&previous),
        abs_error_estimate: f64::INFINITY,
        evaluations: segments.iter().map(|s| s.evaluations).sum(),
        converged: false,
    };
    for level in 1..=cfg.max_levels {
        for seg in segments.iter_mut() {
            seg.refine(f, level);
        }
        let current = totals(&segments, level);
        let value = sum(&current);
        let change: f64 = current
            .iter()
            .zip(&previous)
            .map(|(c, p)| Complex64::new((c.0 - p.0).to_f64(), (c.1 - p.1).to_f64()).norm())
            .sum();
        let h = step(level);
        let noise = segments.iter().map(|s| s.noise_sum).sum::<f64>() * h;
        let ulp = f64::EPSILON * value.norm();
        let error = change.max(noise).max(ulp);
        let tol = cfg.tolerance_for(value);
        result = QuadratureResult {
            value,
            abs_error_estimate: error,
            evaluations: segments.iter().map(|s| s.evaluations).sum(),
            converged: error <= tol,
        };
        previous = current;
        // Rounding noise above tolerance cannot be refined away.
        if level >= MIN_LEVELS && change <= tol.max(noise) {
            break;
        }
    }
    result
}

fn step(level: u32) -> f64 {
    H0 / f64::from(1u32 << level)
}

fn finish(result: QuadratureResult) -> Result<QuadratureResult, QuadratureError> {
    if result.converged {
        Ok(result)
    } else {
        Err(QuadratureError::NonConvergence(result))
    }
}

/// `∫_0^∞ f(τ) dτ` with the tail treatment chosen by `tail`.
pub fn integrate_semiinfinite<F: Integrand + ?Sized>(
    f: &F,
    tail: TailClass,
    cfg: &QuadratureConfig,
) -> Result<QuadratureResult, QuadratureError> {
    cfg.validate()?;
    let split = cfg.split_point;
    let head = Map::Finite { a: 0.0, b: split };
    let tail_map = match tail {
        TailClass::Divergent => return Err(QuadratureError::DivergentIntegral),
        TailClass::Exponential { .. } => Map::Tail { a: split },
        TailClass::PowerLaw { .. } => Map::Inverse { split },
    };
    finish(run(f, &[head, tail_map], cfg))
}

/// `∫_a^b f(x) dx` by tanh-sinh; endpoint singularities are allowed.
pub fn integrate_finite<F: Integrand + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadratureResult, QuadratureError> {
    cfg.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(QuadratureError::InvalidConfig("interval ends must be finite".into()));
    }
    if a == b {
        return Ok(QuadratureResult {
            value: Complex64::new(0.0, 0.0),
            abs_error_estimate: 0.0,
            evaluations: 0,
            converged: true,
        });
    }
    if a > b {
        return integrate_finite(f, b, a, cfg).map(|r| QuadratureResult { value: -r.value, ..r });
    }
    finish(run(f, &[Map::Finite { a, b }], cfg))
}

/// Real-valued convenience wrapper over [`integrate_finite`].
pub fn integrate_finite_real<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadratureResult, QuadratureError> {
    integrate_finite(&|x: f64| Complex64::new(f(x), 0.0), a, b, cfg)
}
