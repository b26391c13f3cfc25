//! Working-precision reals and tolerance-aware predicates.
//!
//! All geometry runs on MPFR floats at a caller-chosen precision. Values are
//! compared through a [`Tolerance`], which is relative with a floor of one so
//! that quantities near zero are compared absolutely.

use std::cmp::Ordering;
use std::fmt;

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};

/// Default working precision in bits.
pub const DEFAULT_PRECISION: u32 = 128;

/// Smallest precision accepted by [`Precision::new`].
pub const MIN_PRECISION: u32 = 64;

/// Default relative tolerance for geometric predicates.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Mantissa size of the floats used for geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Precision(u32);

impl Precision {
    pub fn new(bits: u32) -> Result<Self> {
        if bits < MIN_PRECISION {
            return Err(Error::RejectedParameter(format!(
                "precision {bits} bits is below the minimum of {MIN_PRECISION}"
            )));
        }
        Ok(Precision(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn zero(self) -> Float {
        Float::new(self.0)
    }

    pub fn from_f64(self, x: f64) -> Float {
        Float::with_val(self.0, x)
    }

    pub fn from_i64(self, x: i64) -> Float {
        Float::with_val(self.0, x)
    }

    pub fn pi(self) -> Float {
        Float::with_val(self.0, Constant::Pi)
    }

    /// Parses a decimal string at this precision.
    pub fn parse(self, s: &str) -> Result<Float> {
        let parsed =
            Float::parse(s.trim()).map_err(|e| Error::Parse(format!("bad decimal {s:?}: {e}")))?;
        Ok(Float::with_val(self.0, parsed))
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision(DEFAULT_PRECISION)
    }
}

/// Relative tolerance `eps`: `a ~ b` iff `|a - b| <= eps * max(1, |a|, |b|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance(f64);

impl Tolerance {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::RejectedParameter(format!(
                "tolerance must be positive and finite, got {eps}"
            )));
        }
        Ok(Tolerance(eps))
    }

    pub fn eps(self) -> f64 {
        self.0
    }

    fn bound(self, a: &Float, b: &Float) -> Float {
        let prec = a.prec().max(b.prec());
        let mut scale = Float::with_val(prec, 1);
        let aa = Float::with_val(prec, a.abs_ref());
        let bb = Float::with_val(prec, b.abs_ref());
        if aa > scale {
            scale = aa;
        }
        if bb > scale {
            scale = bb;
        }
        scale * self.0
    }

    pub fn eq(self, a: &Float, b: &Float) -> bool {
        let diff = Float::with_val(a.prec().max(b.prec()), a - b).abs();
        diff <= self.bound(a, b)
    }

    pub fn is_zero(self, a: &Float) -> bool {
        let zero = Float::new(a.prec());
        self.eq(a, &zero)
    }

    /// Three-way comparison that reports `Equal` inside the tolerance band.
    pub fn cmp(self, a: &Float, b: &Float) -> Ordering {
        if self.eq(a, b) {
            Ordering::Equal
        } else if a < b {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }

    /// `a < b` by more than the tolerance.
    pub fn lt(self, a: &Float, b: &Float) -> bool {
        self.cmp(a, b) == Ordering::Less
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance(DEFAULT_TOLERANCE)
    }
}

/// Decimal rendering with enough digits to round-trip at the value's precision.
pub fn to_decimal(x: &Float) -> String {
    // digits = ceil(prec * log10(2)) + 2
    let digits = (x.prec() as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2;
    if x.is_zero() {
        return "0".to_string();
    }
    x.to_string_radix(10, Some(digits))
}

pub fn relative_error(a: &Float, b: &Float) -> f64 {
    let prec = a.prec().max(b.prec());
    let diff = Float::with_val(prec, a - b).abs();
    let scale = Float::with_val(prec, a.abs_ref()).max(&Float::with_val(prec, b.abs_ref()));
    if scale.is_zero() {
        0.0
    } else {
        (diff / scale).to_f64()
    }
}

/// Point or vector in the plane.
#[derive(Clone, PartialEq)]
pub struct Vec2 {
    pub x: Float,
    pub y: Float,
}

impl Vec2 {
    pub fn new(x: Float, y: Float) -> Self {
        Vec2 { x, y }
    }

    pub fn zero(prec: Precision) -> Self {
        Vec2::new(prec.zero(), prec.zero())
    }

    pub fn prec(&self) -> u32 {
        self.x.prec().max(self.y.prec())
    }

    pub fn add(&self, o: &Vec2) -> Vec2 {
        let p = self.prec().max(o.prec());
        Vec2::new(
            Float::with_val(p, &self.x + &o.x),
            Float::with_val(p, &self.y + &o.y),
        )
    }

    pub fn sub(&self, o: &Vec2) -> Vec2 {
        let p = self.prec().max(o.prec());
        Vec2::new(
            Float::with_val(p, &self.x - &o.x),
            Float::with_val(p, &self.y - &o.y),
        )
    }

    pub fn scale(&self, s: &Float) -> Vec2 {
        let p = self.prec().max(s.prec());
        Vec2::new(
            Float::with_val(p, &self.x * s),
            Float::with_val(p, &self.y * s),
        )
    }

    pub fn neg(&self) -> Vec2 {
        Vec2::new(-self.x.clone(), -self.y.clone())
    }

    pub fn cross(&self, o: &Vec2) -> Float {
        let p = self.prec().max(o.prec());
        Float::with_val(p, &self.x * &o.y) - Float::with_val(p, &self.y * &o.x)
    }

    pub fn dot(&self, o: &Vec2) -> Float {
        let p = self.prec().max(o.prec());
        Float::with_val(p, &self.x * &o.x) + Float::with_val(p, &self.y * &o.y)
    }

    pub fn norm(&self) -> Float {
        let p = self.prec();
        Float::with_val(p, self.x.clone().pow(2u32) + self.y.clone().pow(2u32)).sqrt()
    }

    /// Rotation by a quarter turn clockwise, `(x, y) -> (y, -x)`. Exact.
    pub fn rot_cw(&self) -> Vec2 {
        Vec2::new(self.y.clone(), -self.x.clone())
    }

    /// Inverse of [`Vec2::rot_cw`], `(x, y) -> (-y, x)`. Exact.
    pub fn rot_ccw(&self) -> Vec2 {
        Vec2::new(-self.y.clone(), self.x.clone())
    }

    /// Rotation by `angle` radians counterclockwise.
    pub fn rotate(&self, angle: &Float) -> Vec2 {
        let (s, c) = angle.clone().sin_cos(Float::new(angle.prec()));
        let p = self.prec().max(angle.prec());
        let x = Float::with_val(p, &self.x * &c) - Float::with_val(p, &self.y * &s);
        let y = Float::with_val(p, &self.x * &s) + Float::with_val(p, &self.y * &c);
        Vec2::new(x, y)
    }

    pub fn approx_eq(&self, o: &Vec2, tol: Tolerance) -> bool {
        tol.eq(&self.x, &o.x) && tol.eq(&self.y, &o.y)
    }

    pub fn to_f64(&self) -> [f64; 2] {
        [self.x.to_f64(), self.y.to_f64()]
    }
}

impl fmt::Debug for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6e}, {:.6e})", self.x.to_f64(), self.y.to_f64())
    }
}
