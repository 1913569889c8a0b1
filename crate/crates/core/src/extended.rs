//! Points of the extended complex plane and Möbius transformations on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtendedComplex {
    Finite(Complex64),
    Infinity,
}

pub use ExtendedComplex::{Finite, Infinity};

impl ExtendedComplex {
    pub fn new(re: f64, im: f64) -> Self {
        Finite(Complex64::new(re, im))
    }
    pub fn is_infinite(&self) -> bool {
        matches!(self, Infinity)
    }
    pub fn finite(&self) -> Option<Complex64> {
        match *self {
            Finite(z) => Some(z),
            Infinity => None,
        }
    }
    /// Modulus, `+∞` at infinity.
    pub fn norm(&self) -> f64 {
        match self {
            Finite(z) => z.norm(),
            Infinity => f64::INFINITY,
        }
    }
    pub fn conj(&self) -> Self {
        match *self {
            Finite(z) => Finite(z.conj()),
            Infinity => Infinity,
        }
    }
    /// Chordal distance between the stereographic images on the unit
    /// sphere, in [0, 2].
    pub fn chordal(&self, other: &Self) -> f64 {
        match (*self, *other) {
            (Infinity, Infinity) => 0.0,
            (Finite(z), Infinity) | (Infinity, Finite(z)) => 2.0 / (1.0 + z.norm_sqr()).sqrt(),
            (Finite(a), Finite(b)) => 2.0 * (a - b).norm() / ((1.0 + a.norm_sqr()).sqrt() * (1.0 + b.norm_sqr()).sqrt()),
        }
    }
}

impl From<Complex64> for ExtendedComplex {
    fn from(z: Complex64) -> Self {
        Finite(z)
    }
}

/// Division that avoids the overflow of the textbook formula (Smith's
/// algorithm). Returns a non-finite value only if the quotient overflows.
pub fn cdiv(n: Complex64, d: Complex64) -> Complex64 {
    if d.re.abs() >= d.im.abs() {
        let r = d.im / d.re;
        let t = 1.0 / (d.re + d.im * r);
        Complex64::new((n.re + n.im * r) * t, (n.im - n.re * r) * t)
    } else {
        let r = d.re / d.im;
        let t = 1.0 / (d.re * r + d.im);
        Complex64::new((n.re * r + n.im) * t, (n.im * r - n.re) * t)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MobiusError {
    #[error("degenerate Möbius coefficients (ad − bc = 0)")]
    Degenerate,
    #[error("three-point data must be distinct")]
    RepeatedPoints,
}

/// `z ↦ (az + b)/(cz + d)` with `ad − bc ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mobius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Mobius {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self, MobiusError> {
        let det = a * d - b * c;
        let finite = [a, b, c, d].iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite || det == Complex64::new(0.0, 0.0) || !(det.norm() > 0.0) {
            return Err(MobiusError::Degenerate);
        }
        Ok(Self { a, b, c, d })
    }

    pub fn identity() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Self { a: o, b: z, c: z, d: o }
    }

    pub fn translation(t: Complex64) -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Self { a: o, b: t, c: z, d: o }
    }

    pub fn scaling(s: Complex64) -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Self { a: s, b: z, c: z, d: o }
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    /// Exact at the two special points: `∞ ↦ a/c` and `−d/c ↦ ∞`.
    pub fn apply(&self, z: ExtendedComplex) -> ExtendedComplex {
        let zero = Complex64::new(0.0, 0.0);
        match z {
            Infinity => {
                if self.c == zero {
                    Infinity
                } else {
                    Finite(cdiv(self.a, self.c))
                }
            }
            Finite(z) => {
                let den = self.c * z + self.d;
                if den == zero {
                    return Infinity;
                }
                let w = cdiv(self.a * z + self.b, den);
                if w.re.is_finite() && w.im.is_finite() {
                    Finite(w)
                } else {
                    Infinity
                }
            }
        }
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &Mobius) -> Mobius {
        let m = Mobius {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        };
        m.normalized()
    }

    pub fn inverse(&self) -> Mobius {
        Mobius { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// Same map with the largest coefficient scaled to modulus 1.
    pub fn normalized(&self) -> Mobius {
        let s = [self.a, self.b, self.c, self.d].iter().map(|z| z.norm()).fold(0.0, f64::max);
        if s > 0.0 && s.is_finite() {
            Mobius { a: self.a / s, b: self.b / s, c: self.c / s, d: self.d / s }
        } else {
            *self
        }
    }

    /// The map sending (z₁, z₂, z₃) to (0, 1, ∞).
    fn to_standard(z: [ExtendedComplex; 3]) -> Result<Mobius, MobiusError> {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let m = match z {
            [Infinity, Finite(z2), Finite(z3)] => Mobius { a: zero, b: z2 - z3, c: one, d: -z3 },
            [Finite(z1), Infinity, Finite(z3)] => Mobius { a: one, b: -z1, c: one, d: -z3 },
            [Finite(z1), Finite(z2), Infinity] => Mobius { a: one, b: -z1, c: zero, d: z2 - z1 },
            [Finite(z1), Finite(z2), Finite(z3)] => Mobius { a: z2 - z3, b: -z1 * (z2 - z3), c: z2 - z1, d: -z3 * (z2 - z1) },
            _ => return Err(MobiusError::RepeatedPoints),
        };
        Mobius::new(m.a, m.b, m.c, m.d).map_err(|_| MobiusError::RepeatedPoints).map(|m| m.normalized())
    }

    /// The unique Möbius map with `zᵢ ↦ wᵢ`.
    pub fn from_three_points(z: [ExtendedComplex; 3], w: [ExtendedComplex; 3]) -> Result<Mobius, MobiusError> {
        let zs = Self::to_standard(z)?;
        let ws = Self::to_standard(w)?;
        Ok(ws.inverse().compose(&zs))
    }
}

/// Cross-ratio `(z₁, z₂; z₃, z₄) = (z₁−z₃)(z₂−z₄) / ((z₁−z₄)(z₂−z₃))` of
/// finite points.
pub fn cross_ratio(z: [Complex64; 4]) -> Complex64 {
    cdiv((z[0] - z[2]) * (z[1] - z[3]), (z[0] - z[3]) * (z[1] - z[2]))
}
