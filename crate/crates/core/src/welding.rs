//! Zipper-style conformal welding.
//!
//! Everything here works in the right half-plane picture: zipped boundary
//! lies on the imaginary axis, one side of a weld on `+i·ℝ₊`, the other on
//! `−i·ℝ₊`. Every map is recorded as a primitive in a [`ConformalMapLog`];
//! computing a weld and replaying its log run the same code, so replaying
//! on the original points reproduces the stored outputs exactly.
//!
//! Points on the axis carry a flag, because the square roots used by the
//! zipper are two-valued there. The branch for an axis point is read off
//! its own position (the sign of its imaginary part), not off a fixed
//! per-side label: once a chain has been pulled through the pole of a
//! normalising Möbius map, part of it legitimately sits on the other half.

use crate::extended::{ExtendedComplex, Finite, Infinity, Mobius, MobiusError};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for snapping a point that should sit exactly at a
/// zipper tip. Without it the square roots turn 1e-16 of round-off into
/// 1e-8 of seam error.
const SNAP: f64 = 1e-12;

/// Consecutive boundary images closer than this (relative to the largest
/// modulus) mean the zipper has crowded past double precision.
pub const COLLAPSE_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum WeldError {
    #[error("{0}")]
    Mobius(#[from] MobiusError),
    #[error("need at least {need} boundary points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("shared count k = {k} out of range 1..={max}")]
    BadK { k: usize, max: usize },
    #[error("boundary point {index} is not finite")]
    NonFinitePoint { index: usize },
    #[error("boundary points {i} and {j} coincide")]
    Duplicate { i: usize, j: usize },
    #[error("zipping point {index} left the right half-plane (Re = {re:e}); the boundary is not a Jordan curve or is badly crowded")]
    LeftHalfPlane { index: usize, re: f64 },
    #[error("boundary images {i} and {j} collapsed to within {gap:e} (relative); numerical crowding")]
    Collapse { i: usize, j: usize, gap: f64 },
    #[error("alignment point {index} not strictly ordered: got {alpha:e} and {beta:e} on the two sides")]
    NotOrdered { index: usize, alpha: f64, beta: f64 },
    #[error("side labels: expected {expected}, got {got}")]
    SideCount { expected: usize, got: usize },
    #[error("point {index} labelled as lying on the slit is not on the imaginary axis")]
    OffSlit { index: usize },
}

/// Which half of the imaginary axis receives the zipped points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Position of a marked point relative to an already zipped slit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Interior,
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pt {
    z: ExtendedComplex,
    axis: bool,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn on_axis(t: f64) -> ExtendedComplex {
    Finite(c(0.0, t))
}

/// Elementary maps a log is made of.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Primitive {
    /// Generic Möbius map; clears axis flags.
    Mobius(Mobius),
    /// Möbius map preserving the imaginary axis; axis points stay on it.
    AxisMobius(Mobius),
    /// Principal square root; the images of 0 and ∞ become axis points.
    Sqrt,
    /// `z ↦ √(z² − 1)`, opening the segment [0, 1] onto the axis. A free
    /// point at 1 becomes the new tip at 0; the old tip goes to `branch·i`.
    Open(Branch),
    /// `z ↦ √(z² + 1)`, gluing the axis segment between `−i` and `i`.
    Close,
    /// `z ↦ z²`, gluing the two halves of the axis.
    Square,
}

fn sqrt_ext(z: ExtendedComplex) -> ExtendedComplex {
    match z {
        Infinity => Infinity,
        Finite(w) => Finite(w.sqrt()),
    }
}

fn square_ext(z: ExtendedComplex) -> ExtendedComplex {
    match z {
        Infinity => Infinity,
        Finite(w) => {
            let s = w * w;
            if s.re.is_finite() && s.im.is_finite() {
                Finite(s)
            } else {
                Infinity
            }
        }
    }
}

impl Primitive {
    fn apply(&self, p: Pt) -> Pt {
        match *self {
            Primitive::Mobius(m) => Pt { z: m.apply(p.z), axis: false },
            Primitive::AxisMobius(m) => {
                let z = m.apply(p.z);
                match (p.axis, z) {
                    (true, Finite(w)) => Pt { z: on_axis(w.im), axis: true },
                    _ => Pt { z, axis: p.axis },
                }
            }
            Primitive::Sqrt => {
                let z = sqrt_ext(p.z);
                let axis = p.axis || z == Infinity || z == Finite(c(0.0, 0.0));
                Pt { z, axis }
            }
            Primitive::Open(branch) => match (p.axis, p.z) {
                (_, Infinity) => p,
                (true, Finite(w)) => {
                    let t = w.im;
                    let s = if t == 0.0 { branch.sign() } else { t.signum() };
                    Pt { z: on_axis(s * (t * t + 1.0).sqrt()), axis: true }
                }
                (false, Finite(w)) => {
                    if (w - 1.0).norm() <= SNAP {
                        return Pt { z: Finite(c(0.0, 0.0)), axis: true };
                    }
                    // w² − 1 = (w − 1)(w + 1) keeps precision near ±1
                    Pt { z: Finite(((w - 1.0) * (w + 1.0)).sqrt()), axis: false }
                }
            },
            Primitive::Close => match (p.axis, p.z) {
                (_, Infinity) => p,
                (true, Finite(w)) => {
                    let t = w.im;
                    let d = (t.abs() - 1.0).abs();
                    if d <= SNAP {
                        Pt { z: Finite(c(0.0, 0.0)), axis: false }
                    } else if t.abs() < 1.0 {
                        Pt { z: Finite(c(((1.0 - t) * (1.0 + t)).sqrt(), 0.0)), axis: false }
                    } else {
                        Pt { z: on_axis(t.signum() * ((t.abs() - 1.0) * (t.abs() + 1.0)).sqrt()), axis: true }
                    }
                }
                (false, Finite(w)) => Pt { z: Finite((w * w + 1.0).sqrt()), axis: false },
            },
            Primitive::Square => Pt { z: square_ext(p.z), axis: false },
        }
    }
}

/// Ordered record of the maps applied by a weld.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConformalMapLog {
    pub primitives: Vec<Primitive>,
}

impl ConformalMapLog {
    pub fn len(&self) -> usize {
        self.primitives.len()
    }
    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }
    /// Log of `other ∘ self`.
    pub fn then(&self, other: &ConformalMapLog) -> ConformalMapLog {
        let mut primitives = self.primitives.clone();
        primitives.extend_from_slice(&other.primitives);
        ConformalMapLog { primitives }
    }
}

/// Applies a log to new points. `sides` says which points start on an
/// already zipped slit; `None` means all are interior.
pub fn apply_log(log: &ConformalMapLog, points: &[ExtendedComplex], sides: Option<&[Side]>) -> Result<Vec<ExtendedComplex>, WeldError> {
    let mut pts = Vec::with_capacity(points.len());
    for (i, &z) in points.iter().enumerate() {
        let side = match sides {
            Some(s) if s.len() != points.len() => return Err(WeldError::SideCount { expected: points.len(), got: s.len() }),
            Some(s) => s[i],
            None => Side::Interior,
        };
        let axis = side != Side::Interior;
        if axis {
            if let Finite(w) = z {
                if w.re != 0.0 {
                    return Err(WeldError::OffSlit { index: i });
                }
            }
        }
        pts.push(Pt { z, axis });
    }
    for prim in &log.primitives {
        for p in pts.iter_mut() {
            *p = prim.apply(*p);
        }
    }
    Ok(pts.into_iter().map(|p| p.z).collect())
}

/// Working set of points plus the log that produced them.
struct Zipper {
    pts: Vec<Pt>,
    log: ConformalMapLog,
}

impl Zipper {
    fn new(points: &[Complex64]) -> Self {
        Self { pts: points.iter().map(|&z| Pt { z: Finite(z), axis: false }).collect(), log: ConformalMapLog::default() }
    }

    fn push(&mut self, prim: Primitive) {
        for p in self.pts.iter_mut() {
            *p = prim.apply(*p);
        }
        self.log.primitives.push(prim);
    }

    /// Axis Möbius map `z ↦ Xz / (X − z)`: sends the axis point X to ∞,
    /// fixes 0 and keeps the right half-plane.
    fn renormalize(&mut self, x: ExtendedComplex) -> Result<(), WeldError> {
        if let Finite(x) = x {
            let m = Mobius::new(x, c(0.0, 0.0), c(-1.0, 0.0), x)?;
            self.push(Primitive::AxisMobius(m));
        }
        Ok(())
    }
}

fn check_input(points: &[Complex64], need: usize) -> Result<(), WeldError> {
    if points.len() < need {
        return Err(WeldError::TooFewPoints { need, got: points.len() });
    }
    for (i, z) in points.iter().enumerate() {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(WeldError::NonFinitePoint { index: i });
        }
    }
    for i in 0..points.len() {
        let j = (i + 1) % points.len();
        if points[i] == points[j] {
            return Err(WeldError::Duplicate { i, j });
        }
    }
    Ok(())
}

/// Largest finite modulus among the points.
pub fn max_modulus(z: &[ExtendedComplex]) -> f64 {
    z.iter().filter_map(|p| p.finite()).map(|w| w.norm()).fold(0.0, f64::max)
}

fn collapse_check(z: &[ExtendedComplex], upto: usize, closed: bool) -> Result<(), WeldError> {
    let scale = max_modulus(&z[..upto]).max(f64::MIN_POSITIVE);
    let n = upto;
    let pairs = if closed { n } else { n.saturating_sub(1) };
    for i in 0..pairs {
        let j = (i + 1) % n;
        if let (Finite(a), Finite(b)) = (z[i], z[j]) {
            let gap = (a - b).norm() / scale;
            if gap < COLLAPSE_TOL {
                return Err(WeldError::Collapse { i, j, gap });
            }
        }
    }
    Ok(())
}

/// Result of [`intermediate_form`]: transformed points in input order.
#[derive(Debug, Clone)]
pub struct MarkedBoundary {
    pub points: Vec<ExtendedComplex>,
    /// Points that ended up on the imaginary axis.
    pub on_axis: Vec<bool>,
    pub log: ConformalMapLog,
}

/// Zips `z₀ … z_k` of a boundary polygon onto the imaginary axis: after the
/// call `z₀ = ∞`, `z_k = 0` and `z₁ … z_{k−1}` lie on the `branch` half.
/// The rest of the boundary and any extra points (appended after the
/// polygon, `extra` of them) end up in the open right half-plane.
fn zip_prefix(points: &[Complex64], extra: usize, k: usize, branch: Branch) -> Result<Zipper, WeldError> {
    let n = points.len() - extra;
    let mut zp = Zipper::new(points);
    let (z0, z1) = (points[0], points[1]);
    zp.push(Primitive::Mobius(Mobius::new(c(1.0, 0.0), -z1, c(1.0, 0.0), -z0)?));
    zp.push(Primitive::Sqrt);
    for j in 2..=k {
        let xi = match zp.pts[j].z {
            Finite(w) => w,
            Infinity => return Err(WeldError::LeftHalfPlane { index: j, re: f64::INFINITY }),
        };
        let scale = zp.pts[..n].iter().filter_map(|p| p.z.finite()).map(|w| w.norm()).fold(0.0, f64::max);
        if !(xi.re > 0.0) || xi.norm() <= COLLAPSE_TOL * scale {
            return Err(WeldError::LeftHalfPlane { index: j, re: xi.re });
        }
        // L(z) = R z / (1 + i I z) sends ξ to 1, fixes 0, keeps the axis
        let r2 = xi.norm_sqr();
        let l = Mobius::new(c(xi.re / r2, 0.0), c(0.0, 0.0), c(0.0, xi.im / r2), c(1.0, 0.0))?;
        zp.push(Primitive::AxisMobius(l));
        zp.push(Primitive::Open(branch));
        let x = zp.pts[0].z;
        zp.renormalize(x)?;
    }
    let z: Vec<ExtendedComplex> = zp.pts[..n].iter().map(|p| p.z).collect();
    collapse_check(&z, n, false)?;
    Ok(zp)
}

/// Conformal map of the exterior of the zipped arc `z₀ … z_k` of a
/// boundary polygon onto the right half-plane, see [`zip_prefix`].
pub fn intermediate_form(points: &[Complex64], k: usize, branch: Branch) -> Result<MarkedBoundary, WeldError> {
    check_input(points, 2)?;
    if k == 0 || k >= points.len() {
        return Err(WeldError::BadK { k, max: points.len() - 1 });
    }
    let zp = zip_prefix(points, 0, k, branch)?;
    Ok(MarkedBoundary { points: zp.pts.iter().map(|p| p.z).collect(), on_axis: zp.pts.iter().map(|p| p.axis).collect(), log: zp.log })
}

/// Output of a weld. `a` and `b` are the images of the two input
/// polygons; on the shared prefix they agree up to `seam_residual`.
#[derive(Debug, Clone)]
pub struct Weld {
    pub a: Vec<ExtendedComplex>,
    pub b: Vec<ExtendedComplex>,
    pub log_a: ConformalMapLog,
    pub log_b: ConformalMapLog,
    /// Max distance between the two images of a shared point divided by
    /// the largest finite modulus.
    pub seam_residual: f64,
}

/// Glues A and B along their first `k + 1` points. A is traversed with
/// its interior on the left, B with its interior on the right, both
/// starting at the same shared point, so `a[j]` and `b[j]` are the same
/// point for `j ≤ k`. Each domain must contain 0 (the auxiliary point
/// used for normalisation); afterwards A's 0 sits at −1, B's at 1, and
/// the midpoint of the two images of ∞ at ∞.
pub fn partial_weld(a: &[Complex64], b: &[Complex64], k: usize) -> Result<Weld, WeldError> {
    let max = a.len().min(b.len()) - 1;
    if k == 0 || k > max {
        return Err(WeldError::BadK { k, max });
    }
    let (mut za, mut zb) = zip_both(a, b, k)?;
    let (na, nb) = (a.len(), b.len());
    let mid = match (za.pts[na + 1].z, zb.pts[nb + 1].z) {
        (Finite(x), Finite(y)) => Finite((x + y) * 0.5),
        _ => Infinity,
    };
    let m = Mobius::from_three_points([za.pts[na].z, zb.pts[nb].z, mid], [ExtendedComplex::new(-1.0, 0.0), ExtendedComplex::new(1.0, 0.0), Infinity])?;
    za.push(Primitive::Mobius(m));
    zb.push(Primitive::Mobius(m));
    finish(za, zb, na, nb, k, false)
}

/// Closed weld: A and B share their whole boundary (`a` and `b` list the
/// same loop, A's interior on the left, B's on the right). The result
/// covers the sphere; A's 0 goes to 0, B's 0 to ∞, and the shared
/// boundary is scaled to geometric-mean modulus 1.
pub fn closed_weld(a: &[Complex64], b: &[Complex64]) -> Result<Weld, WeldError> {
    if a.len() != b.len() {
        return Err(WeldError::BadK { k: a.len() - 1, max: b.len() - 1 });
    }
    let m = a.len() - 1;
    let (mut za, mut zb) = zip_both(a, b, m)?;
    let (na, nb) = (a.len(), b.len());
    let seam = Finite(za.pts[m / 2 + 1].z.finite().unwrap_or(c(1.0, 0.0)));
    let mo = Mobius::from_three_points([za.pts[na].z, zb.pts[nb].z, seam], [ExtendedComplex::new(0.0, 0.0), Infinity, ExtendedComplex::new(1.0, 0.0)])?;
    za.push(Primitive::Mobius(mo));
    zb.push(Primitive::Mobius(mo));
    let logmean = za.pts[..na].iter().filter_map(|p| p.z.finite()).map(|w| w.norm().ln()).sum::<f64>() / na as f64;
    let s = Mobius::scaling(c((-logmean).exp(), 0.0));
    za.push(Primitive::Mobius(s));
    zb.push(Primitive::Mobius(s));
    finish(za, zb, na, nb, m, true)
}

/// Shared part of both welds: intermediate forms, alignment and gluing.
/// Auxiliary points 0 and ∞ are appended to each side.
fn zip_both(a: &[Complex64], b: &[Complex64], k: usize) -> Result<(Zipper, Zipper), WeldError> {
    check_input(a, 2)?;
    check_input(b, 2)?;
    let aux = |p: &[Complex64]| {
        let mut v = p.to_vec();
        v.push(c(0.0, 0.0));
        v
    };
    let mut za = zip_prefix(&aux(a), 1, k, Branch::Plus)?;
    let mut zb = zip_prefix(&aux(b), 1, k, Branch::Minus)?;
    za.pts.push(Pt { z: Infinity, axis: false });
    zb.pts.push(Pt { z: Infinity, axis: false });
    // ∞ was not part of the zipped sets above; replay to place it
    for z in [&mut za, &mut zb] {
        let mut p = Pt { z: Infinity, axis: false };
        for prim in &z.log.primitives {
            p = prim.apply(p);
        }
        *z.pts.last_mut().unwrap() = p;
    }
    for j in (1..k).rev() {
        let x = za.pts[0].z;
        za.renormalize(x)?;
        zb.renormalize(x)?;
        let alpha = za.pts[j].z.finite().map_or(f64::NAN, |w| w.im);
        let beta = zb.pts[j].z.finite().map_or(f64::NAN, |w| w.im);
        if !(alpha > 0.0 && beta < 0.0) {
            return Err(WeldError::NotOrdered { index: j, alpha, beta });
        }
        // T(z) = z / (cc − i d z): iα ↦ i, iβ ↦ −i
        let d = (alpha + beta) / (alpha - beta);
        let cc = -2.0 * alpha * beta / (alpha - beta);
        let t = Mobius::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, -d), c(cc, 0.0))?;
        for z in [&mut za, &mut zb] {
            z.push(Primitive::AxisMobius(t));
            z.push(Primitive::Close);
        }
    }
    let x = za.pts[0].z;
    za.renormalize(x)?;
    zb.renormalize(x)?;
    za.push(Primitive::Square);
    zb.push(Primitive::Square);
    Ok((za, zb))
}

fn finish(za: Zipper, zb: Zipper, na: usize, nb: usize, k: usize, closed: bool) -> Result<Weld, WeldError> {
    let a: Vec<ExtendedComplex> = za.pts[..na].iter().map(|p| p.z).collect();
    let b: Vec<ExtendedComplex> = zb.pts[..nb].iter().map(|p| p.z).collect();
    let scale = max_modulus(&a).max(max_modulus(&b)).max(f64::MIN_POSITIVE);
    let mut res = 0.0f64;
    for j in 0..=k.min(na - 1) {
        let r = match (a[j], b[j]) {
            (Finite(x), Finite(y)) => (x - y).norm() / scale,
            (Infinity, Infinity) => 0.0,
            _ => f64::INFINITY,
        };
        res = res.max(r);
    }
    // union boundary: A's free part then B's free part, plus the seam
    let mut union: Vec<ExtendedComplex> = Vec::new();
    if !closed {
        union.extend_from_slice(&a[k..]);
        union.push(a[0]);
        union.extend(b[k + 1..].iter().rev());
        collapse_check(&union, union.len(), true)?;
    } else {
        collapse_check(&a, na, true)?;
    }
    Ok(Weld { a, b, log_a: za.log, log_b: zb.log, seam_residual: res })
}

/// Maps a Jordan polygon's interior onto the unit disk (zipper with the
/// last edge treated as a geodesic). Boundary images lie on the unit
/// circle in the same cyclic order.
pub fn geodesic_to_circle(points: &[Complex64]) -> Result<(Vec<ExtendedComplex>, ConformalMapLog), WeldError> {
    check_input(points, 3)?;
    let n = points.len();
    let mut zp = zip_prefix(points, 0, n - 1, Branch::Plus)?;
    zp.push(Primitive::Square);
    let cayley = Mobius::new(c(1.0, 0.0), c(0.0, -1.0), c(1.0, 0.0), c(0.0, 1.0))?;
    zp.push(Primitive::Mobius(cayley));
    let out: Vec<ExtendedComplex> = zp.pts.iter().map(|p| p.z).collect();
    collapse_check(&out, n, true)?;
    Ok((out, zp.log))
}
