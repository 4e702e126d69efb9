//! Closed real intervals with outward-rounded endpoints.
//!
//! Rounding is handled after the fact: each endpoint is computed in round-to-
//! nearest and then stepped one unit in the last place outward whenever the
//! operation was inexact in that direction. The rounding residual comes from
//! error-free transformations (TwoSum for sums, Dekker's split product for
//! products, FMA for quotients), so exact results are left untouched.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack added to libm `sin`/`cos` endpoint values. libm is not
/// correctly rounded but stays within a couple of ulps of the true value.
const TRIG_SLACK: f64 = 4.0 * f64::EPSILON;

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

#[inline]
fn down(x: f64) -> f64 {
    if x == 0.0 {
        // an IEEE sum or difference that rounds to 0.0 is exact;
        // products handle underflow separately
        x
    } else {
        x.next_down()
    }
}

#[inline]
fn up(x: f64) -> f64 {
    if x == 0.0 {
        x
    } else {
        x.next_up()
    }
}

/// Smallest magnitude below which product residuals are no longer exact.
const UNDERFLOW_GUARD: f64 = 1e-290;

/// Exact rounding residual of `a + b` (TwoSum): `a + b == s + err`.
#[inline]
fn sum_residual(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

/// Lower and upper bounds on the exact sum `a + b`.
#[inline]
pub(crate) fn add_bounds(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    if !s.is_finite() {
        return (if s == f64::INFINITY { f64::MAX } else { s }, s);
    }
    let err = sum_residual(a, b, s);
    (
        if err < 0.0 { down(s) } else { s },
        if err > 0.0 { up(s) } else { s },
    )
}

/// Operands above this magnitude could overflow the Veltkamp split.
const SPLIT_GUARD: f64 = 1e290;

#[inline]
fn split(a: f64) -> (f64, f64) {
    let c = 134_217_729.0 * a; // 2^27 + 1
    let hi = c - (c - a);
    (hi, a - hi)
}

/// Exact residual `a * b - p` for `p = fl(a * b)` (Dekker TwoProduct).
/// Plain multiplications are much cheaper than a software `mul_add`
/// on targets without hardware FMA.
#[inline]
fn product_residual(a: f64, b: f64, p: f64) -> f64 {
    if a.abs() > SPLIT_GUARD || b.abs() > SPLIT_GUARD {
        return a.mul_add(b, -p);
    }
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    ((ah * bh - p) + ah * bl + al * bh) + al * bl
}

/// Lower and upper bounds on the exact product `a * b`.
#[inline]
pub(crate) fn mul_bounds(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    if a == 0.0 || b == 0.0 {
        return (0.0, 0.0);
    }
    if !p.is_finite() {
        return (if p == f64::INFINITY { f64::MAX } else { p }, if p == f64::NEG_INFINITY { f64::MIN } else { p });
    }
    if p.abs() < UNDERFLOW_GUARD {
        let tiny = f64::from_bits(1);
        return ((p - tiny).next_down().min(p.next_down()), (p + tiny).next_up().max(p.next_up()));
    }
    let err = product_residual(a, b, p);
    (
        if err < 0.0 { p.next_down() } else { p },
        if err > 0.0 { p.next_up() } else { p },
    )
}

/// Lower and upper bounds on the exact quotient `a / b`, `b != 0`.
#[inline]
pub(crate) fn div_bounds(a: f64, b: f64) -> (f64, f64) {
    let q = a / b;
    if a == 0.0 {
        return (0.0, 0.0);
    }
    if !q.is_finite() || q.abs() < UNDERFLOW_GUARD {
        return (q.next_down(), q.next_up());
    }
    // a - q*b is exact; a/b - q has its sign divided by b
    let r = (-q).mul_add(b, a);
    let above = (r > 0.0) == (b > 0.0) && r != 0.0;
    let below = (r < 0.0) == (b > 0.0) && r != 0.0;
    (
        if below { q.next_down() } else { q },
        if above { q.next_up() } else { q },
    )
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const UNIT: Interval = Interval { lo: -1.0, hi: 1.0 };

    /// Builds `[lo, hi]`, rejecting NaN endpoints and inverted bounds.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    /// Internal constructor for endpoints already known to be ordered.
    #[inline]
    pub(crate) fn raw(lo: f64, hi: f64) -> Self {
        debug_assert!(!(lo > hi), "inverted interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Symmetric interval `[-r, r]`; `r` is taken by magnitude.
    pub fn symmetric(r: f64) -> Self {
        let r = r.abs();
        Interval { lo: -r, hi: r }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        up(self.hi - self.lo)
    }

    pub fn mid(&self) -> f64 {
        let m = 0.5 * self.lo + 0.5 * self.hi;
        m.clamp(self.lo, self.hi)
    }

    /// Upper bound on `|x - mid|` for every `x` in the interval.
    pub fn radius(&self) -> f64 {
        let m = self.mid();
        up((self.hi - m).max(m - self.lo))
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// True when `other` lies strictly inside `self`.
    pub fn interior_contains(&self, other: &Interval) -> bool {
        self.lo < other.lo && other.hi < self.hi
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn hull_point(&self, x: f64) -> Interval {
        Interval {
            lo: self.lo.min(x),
            hi: self.hi.max(x),
        }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    /// Widens both ends by `amount >= 0`.
    pub fn inflate(&self, amount: f64) -> Interval {
        Interval {
            lo: down(self.lo - amount),
            hi: up(self.hi + amount),
        }
    }

    /// Scales the interval about its midpoint by `factor >= 1` and adds
    /// `abs` absolute padding.
    pub fn blow_up(&self, factor: f64, abs: f64) -> Interval {
        let m = self.mid();
        let r = self.radius() * factor + abs;
        Interval {
            lo: down(m - r),
            hi: up(m + r),
        }
    }

    pub fn scale(&self, k: f64) -> Interval {
        *self * Interval::point(k)
    }

    /// Division by a nonzero scalar.
    pub fn div_scalar(&self, d: f64) -> Interval {
        let (a, b) = (div_bounds(self.lo, d), div_bounds(self.hi, d));
        Interval {
            lo: a.0.min(b.0),
            hi: a.1.max(b.1),
        }
    }

    /// Clamps both endpoints into `[lo, hi]`.
    pub fn clamp_to(&self, lo: f64, hi: f64) -> Interval {
        Interval {
            lo: self.lo.clamp(lo, hi),
            hi: self.hi.clamp(lo, hi),
        }
    }

    pub fn sqr(&self) -> Interval {
        self.powi(2)
    }

    /// Integer power. Even powers of intervals straddling zero start at 0.
    pub fn powi(&self, n: u32) -> Interval {
        match n {
            0 => Interval::point(1.0),
            1 => *self,
            _ => {
                let mut acc_lo = Interval::point(1.0);
                let mut acc_hi = Interval::point(1.0);
                let a = Interval::point(self.lo);
                let b = Interval::point(self.hi);
                for _ in 0..n {
                    acc_lo = acc_lo * a;
                    acc_hi = acc_hi * b;
                }
                let h = acc_lo.hull(&acc_hi);
                if n % 2 == 0 && self.lo < 0.0 && self.hi > 0.0 {
                    Interval { lo: 0.0, hi: h.hi }
                } else {
                    h
                }
            }
        }
    }

    pub fn sin(&self) -> Interval {
        trig(self, Trig::Sin)
    }

    pub fn cos(&self) -> Interval {
        trig(self, Trig::Cos)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trig {
    Sin,
    Cos,
}

/// Range of `sin` or `cos` over `a`.
///
/// `cos` is handled as `sin(x + pi/2)` only for locating critical points;
/// endpoint values use the direct libm function.
pub fn trig(a: &Interval, which: Trig) -> Interval {
    if !(a.lo.is_finite() && a.hi.is_finite()) || a.hi - a.lo >= TAU {
        return Interval::UNIT;
    }
    let f = |x: f64| match which {
        Trig::Sin => x.sin(),
        Trig::Cos => x.cos(),
    };
    let (va, vb) = (f(a.lo), f(a.hi));
    let mut lo = va.min(vb) - TRIG_SLACK;
    let mut hi = va.max(vb) + TRIG_SLACK;
    // maxima of sin at pi/2 + 2k pi, minima at -pi/2 + 2k pi; cos is the
    // same pattern shifted by -pi/2
    let shift = match which {
        Trig::Sin => 0.0,
        Trig::Cos => FRAC_PI_2,
    };
    // slack guards against `PI` being rounded and against libm error when
    // an endpoint sits right at an extremum
    let eps = 1e-12 * (1.0 + a.lo.abs().max(a.hi.abs()));
    if contains_critical(a.lo + shift - eps, a.hi + shift + eps, FRAC_PI_2) {
        hi = 1.0;
    }
    if contains_critical(a.lo + shift - eps, a.hi + shift + eps, -FRAC_PI_2) {
        lo = -1.0;
    }
    Interval {
        lo: lo.max(-1.0),
        hi: hi.min(1.0),
    }
}

/// Does `[lo, hi]` contain a point of the form `base + 2k pi`?
fn contains_critical(lo: f64, hi: f64, base: f64) -> bool {
    let k = ((lo - base) / TAU).ceil();
    base + k * TAU <= hi + 1e-15 * PI
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_bounds(self.lo, rhs.lo).0,
            hi: add_bounds(self.hi, rhs.hi).1,
        }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        self + (-rhs)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        if rhs.lo == rhs.hi {
            return self * rhs.lo;
        }
        if self.lo == self.hi {
            return rhs * self.lo;
        }
        let (a, b) = (self, rhs);
        // sign classes pick the extreme corners; only a mixed x mixed
        // product needs all four
        let (l, h) = if a.lo >= 0.0 {
            if b.lo >= 0.0 {
                ((a.lo, b.lo), (a.hi, b.hi))
            } else if b.hi <= 0.0 {
                ((a.hi, b.lo), (a.lo, b.hi))
            } else {
                ((a.hi, b.lo), (a.hi, b.hi))
            }
        } else if a.hi <= 0.0 {
            if b.lo >= 0.0 {
                ((a.lo, b.hi), (a.hi, b.lo))
            } else if b.hi <= 0.0 {
                ((a.hi, b.hi), (a.lo, b.lo))
            } else {
                ((a.lo, b.hi), (a.lo, b.lo))
            }
        } else if b.lo >= 0.0 {
            ((a.lo, b.hi), (a.hi, b.hi))
        } else if b.hi <= 0.0 {
            ((a.hi, b.lo), (a.lo, b.lo))
        } else {
            let lo = mul_bounds(a.lo, b.hi).0.min(mul_bounds(a.hi, b.lo).0);
            let hi = mul_bounds(a.lo, b.lo).1.max(mul_bounds(a.hi, b.hi).1);
            return Interval { lo, hi };
        };
        Interval { lo: mul_bounds(l.0, l.1).0, hi: mul_bounds(h.0, h.1).1 }
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, rhs: f64) -> Interval {
        if self.lo == self.hi {
            let (lo, hi) = mul_bounds(self.lo, rhs);
            return Interval { lo, hi };
        }
        let (a, b) = if rhs >= 0.0 { (self.lo, self.hi) } else { (self.hi, self.lo) };
        Interval { lo: mul_bounds(a, rhs).0, hi: mul_bounds(b, rhs).1 }
    }
}

impl Add<f64> for Interval {
    type Output = Interval;
    fn add(self, rhs: f64) -> Interval {
        self + Interval::point(rhs)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}
