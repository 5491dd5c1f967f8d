//! Double-double arithmetic (about 32 significant digits).
//!
//! Used where the integrand is large but its integral is small, so that
//! rounding in f64 would swamp the result. Only the operations the
//! integrand and the quadrature nodes need are provided.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Unit roundoff of the format, `2^-104`.
pub const EPSILON: f64 = 4.930_380_657_631_324e-32;

const LN2_TAIL: f64 = 5.707_708_438_416_212e-34;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const LN2: Dd = Dd { hi: std::f64::consts::LN_2, lo: 2.319_046_813_846_299_6e-17 };
    pub const PI: Dd = Dd { hi: std::f64::consts::PI, lo: 1.224_646_799_147_353_2e-16 };
    pub const FRAC_PI_2: Dd = Dd { hi: std::f64::consts::FRAC_PI_2, lo: 6.123_233_995_736_766e-17 };
    pub const FRAC_2_PI: Dd = Dd { hi: std::f64::consts::FRAC_2_PI, lo: -3.935_735_335_036_497e-17 };
    pub const EULER_GAMMA: Dd = Dd { hi: 0.577_215_664_901_532_9, lo: -4.942_915_152_430_645e-18 };

    pub const fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 { -self } else { self }
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    /// Exact product with a power of two.
    pub fn ldexp(self, k: i32) -> Dd {
        let s = 2f64.powi(k);
        Dd { hi: self.hi * s, lo: self.lo * s }
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }

    pub fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let r = self - Dd::from_f64(b).mul_f64(q1);
        let q2 = r.hi / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    pub fn square(self) -> Dd {
        self * self
    }

    pub fn powi(self, mut n: u32) -> Dd {
        let mut base = self;
        let mut acc = Dd::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base.square();
            n >>= 1;
        }
        acc
    }

    /// `e^x − 1`, accurate for small `|x|` and used by [`Dd::exp`].
    fn expm1_reduced(r: Dd) -> Dd {
        // |r| ≤ ln2/2 / 512 here; 12 Taylor terms are far below 2^-104
        let mut term = r;
        let mut sum = r;
        for k in 2..=12 {
            term = (term * r).div_f64(k as f64);
            sum += term;
            if term.hi.abs() < 1e-36 * sum.hi.abs() {
                break;
            }
        }
        sum
    }

    pub fn exp(self) -> Dd {
        if self.hi > 709.7 {
            return Dd::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / Dd::LN2.hi).round();
        // three-part ln2 keeps the reduction exact to 2^-104 for |k| ≤ 1100
        let (p1, e1) = two_prod(Dd::LN2.hi, k);
        let (p2, e2) = two_prod(Dd::LN2.lo, k);
        let r = self - Dd::from_f64(p1) - Dd::from_f64(e1) - Dd::from_f64(p2) - Dd::from_f64(e2 + LN2_TAIL * k);
        let r = r.ldexp(-9);
        let mut s = Dd::expm1_reduced(r);
        // (1+s)^2 − 1 = 2s + s^2, nine times
        for _ in 0..9 {
            s = s.mul_f64(2.0) + s.square();
        }
        let e = s + Dd::ONE;
        // split the scaling so subnormal results and e^709 both survive
        let k = k as i32;
        let half = k / 2;
        e.ldexp(half).ldexp(k - half)
    }

    /// Natural log by one correction step from the f64 estimate `y`:
    /// `ln x = y + ln(1+u)` with `u = x e^{−y} − 1`, which is `O(1e-16·|y|)`.
    pub fn ln(self) -> Dd {
        if !(self.hi > 0.0) {
            return Dd::from_f64(if self.hi == 0.0 { f64::NEG_INFINITY } else { f64::NAN });
        }
        let y = Dd::from_f64(self.hi.ln());
        let u = self * (-y).exp() - Dd::ONE;
        y + (u - u.square().mul_f64(0.5))
    }

    /// `(sinh x, cosh x)` for moderate `|x|`.
    pub fn sinh_cosh(self) -> (Dd, Dd) {
        let e = self.exp();
        let inv = Dd::ONE / e;
        let c = (e + inv).mul_f64(0.5);
        let s = if self.hi.abs() < 0.5 {
            // avoid cancellation in (e − 1/e)/2
            let m = Dd::expm1_small(self);
            (m + m / (m + Dd::ONE)).mul_f64(0.5)
        } else {
            (e - inv).mul_f64(0.5)
        };
        (s, c)
    }

    fn expm1_small(x: Dd) -> Dd {
        let mut s = Dd::expm1_reduced(x.ldexp(-9));
        for _ in 0..9 {
            s = s.mul_f64(2.0) + s.square();
        }
        s
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Dd {
        Dd::from_f64(x)
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl AddAssign for Dd {
    #[inline]
    fn add_assign(&mut self, b: Dd) {
        *self = *self + b;
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}
