//! Distortion measures, summary statistics and the optional Möbius
//! post-optimization of area distortion.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::assemble::{stereographic, stereographic_inverse, GlobalParam};
use crate::dncp::{area_matrix, cotangent_laplacian};
use crate::extended::{ExtendedComplex, Finite, Mobius};
use crate::mesh::{cross, dot, norm, sub, ParamCoords, TriMesh, Vec3};
use crate::partition::Mode;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cannot summarize an empty sample")]
    Empty,
    #[error("parameterization has {got} coordinates for {expected} vertices")]
    Length { got: usize, expected: usize },
}

/// Parameterized triangles smaller than this (relative to the mean face)
/// count as degenerate and are left out of the statistics.
const DEGENERATE_REL: f64 = 1e-14;

fn angle(u: Vec3, v: Vec3) -> f64 {
    norm(cross(u, v)).atan2(dot(u, v))
}

fn to3(z: Complex64) -> Vec3 {
    [z.re, z.im, 0.0]
}

/// Vertex angles of a flat triangle.
fn flat_angles(p: [Vec3; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| angle(sub(p[(i + 1) % 3], p[i]), sub(p[(i + 2) % 3], p[i])))
}

/// Vertex angles of the spherical triangle with these (unit) corners,
/// measured between the great-circle arcs in each corner's tangent plane.
fn spherical_angles(p: [Vec3; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| {
        let a = p[i];
        let t = |b: Vec3| {
            let d = dot(a, b);
            [b[0] - d * a[0], b[1] - d * a[1], b[2] - d * a[2]]
        };
        angle(t(p[(i + 1) % 3]), t(p[(i + 2) % 3]))
    })
}

/// Area of a spherical triangle (unit sphere) from its spherical excess.
fn spherical_area(p: [Vec3; 3]) -> f64 {
    let num = dot(p[0], cross(p[1], p[2]));
    let den = 1.0 + dot(p[0], p[1]) + dot(p[1], p[2]) + dot(p[2], p[0]);
    2.0 * num.atan2(den)
}

fn param_face(param: &ParamCoords, f: &[usize; 3]) -> ([Vec3; 3], bool) {
    match param {
        ParamCoords::Planar(p) => (f.map(|v| to3(p[v])), false),
        ParamCoords::Spherical(p) => (f.map(|v| p[v]), true),
    }
}

/// Signed area of a parameterized face (spherical area on S²).
fn param_area(param: &ParamCoords, f: &[usize; 3]) -> f64 {
    let (q, sph) = param_face(param, f);
    if sph {
        spherical_area(q)
    } else {
        0.5 * cross(sub(q[1], q[0]), sub(q[2], q[0]))[2]
    }
}

/// Per-corner `angle in param − angle in mesh`, degrees, corners in face
/// order. Corners of degenerate parameterized faces are `None`.
pub fn angular_distortion(mesh: &TriMesh, param: &ParamCoords) -> Result<Vec<Option<f64>>, MetricsError> {
    check_len(mesh, param)?;
    let p = mesh.vertices();
    let areas: Vec<f64> = mesh.faces().iter().map(|f| param_area(param, f)).collect();
    let mean = areas.iter().map(|a| a.abs()).sum::<f64>() / areas.len().max(1) as f64;
    let mut out = Vec::with_capacity(3 * mesh.num_faces());
    for (f, a) in mesh.faces().iter().zip(&areas) {
        let m = flat_angles(f.map(|v| p[v]));
        if !(a.abs() > DEGENERATE_REL * mean) {
            out.extend([None; 3]);
            continue;
        }
        let (q, sph) = param_face(param, f);
        let t = if sph { spherical_angles(q) } else { flat_angles(q) };
        for i in 0..3 {
            out.push(Some((t[i] - m[i]).to_degrees()));
        }
    }
    Ok(out)
}

/// Per-face `ln((A_f(T)/ΣA_f) / (A(T)/ΣA))`. Degenerate faces are `None`.
pub fn area_distortion(mesh: &TriMesh, param: &ParamCoords) -> Result<Vec<Option<f64>>, MetricsError> {
    check_len(mesh, param)?;
    let pa: Vec<f64> = mesh.faces().iter().map(|f| param_area(param, f)).collect();
    Ok(area_distortion_from(mesh, &pa))
}

fn area_distortion_from(mesh: &TriMesh, pa: &[f64]) -> Vec<Option<f64>> {
    let ma: Vec<f64> = (0..mesh.num_faces()).map(|f| mesh.face_area(f)).collect();
    let (sp, sm) = (pa.iter().map(|a| a.abs()).sum::<f64>(), ma.iter().sum::<f64>());
    let mean = sp / pa.len().max(1) as f64;
    pa.iter().zip(&ma).map(|(a, m)| if a.abs() > DEGENERATE_REL * mean { Some(((a.abs() / sp) / (m / sm)).ln()) } else { None }).collect()
}

/// `E_D − A` of a planar parameterization.
pub fn conformal_energy(mesh: &TriMesh, param: &[Complex64]) -> f64 {
    let lap = cotangent_laplacian(mesh).expect("mesh already validated");
    let am = area_matrix(mesh).expect("mesh already validated");
    lap.dirichlet_energy(param) - am.area(param)
}

fn check_len(mesh: &TriMesh, param: &ParamCoords) -> Result<(), MetricsError> {
    if param.len() != mesh.num_vertices() {
        return Err(MetricsError::Length { got: param.len(), expected: mesh.num_vertices() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// population standard deviation
    pub sd: f64,
    pub median: f64,
    pub iqr: f64,
    pub max: f64,
}

/// Quantile by linear interpolation between order statistics (position
/// `(n − 1)·q` in the sorted sample).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Result<Summary, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    // sum in sorted order so permutations of the input give identical bits
    let mean = s.iter().sum::<f64>() / n;
    let var = s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok(Summary {
        count: s.len(),
        mean,
        sd: var.sqrt(),
        median: quantile_sorted(&s, 0.5),
        iqr: quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25),
        max: s[s.len() - 1],
    })
}

/// Fixed-width histogram; bin `i` covers `[start + i·width, start + (i+1)·width)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub width: f64,
    pub start: f64,
    pub counts: Vec<u64>,
}

pub fn histogram(values: &[f64], width: f64) -> Histogram {
    if values.is_empty() {
        return Histogram { width, start: 0.0, counts: Vec::new() };
    }
    let idx = |x: f64| (x / width).floor() as i64;
    let lo = values.iter().map(|&x| idx(x)).min().unwrap();
    let hi = values.iter().map(|&x| idx(x)).max().unwrap();
    let mut counts = vec![0u64; (hi - lo + 1) as usize];
    for &x in values {
        counts[(idx(x) - lo) as usize] += 1;
    }
    Histogram { width, start: lo as f64 * width, counts }
}

pub const ANGLE_BIN_DEG: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct DistortionReport {
    pub angular: Vec<Option<f64>>,
    pub area: Vec<Option<f64>>,
    pub abs_angular: Summary,
    pub abs_area: Summary,
    pub conformal_energy: Option<f64>,
    pub excluded_corners: usize,
    pub excluded_faces: usize,
}

impl DistortionReport {
    pub fn compute(mesh: &TriMesh, param: &ParamCoords) -> Result<Self, MetricsError> {
        let angular = angular_distortion(mesh, param)?;
        let area = area_distortion(mesh, param)?;
        let ad: Vec<f64> = angular.iter().flatten().map(|d| d.abs()).collect();
        let ar: Vec<f64> = area.iter().flatten().map(|d| d.abs()).collect();
        let conformal_energy = match param {
            ParamCoords::Planar(p) => Some(conformal_energy(mesh, p)),
            ParamCoords::Spherical(_) => None,
        };
        Ok(Self {
            abs_angular: summarize(&ad)?,
            abs_area: summarize(&ar)?,
            excluded_corners: angular.len() - ad.len(),
            excluded_faces: area.len() - ar.len(),
            angular,
            area,
            conformal_energy,
        })
    }

    pub fn signed_angular(&self) -> Vec<f64> {
        self.angular.iter().flatten().copied().collect()
    }

    pub fn to_json(&self, include_raw: bool) -> serde_json::Value {
        let mut v = json!({
            "angular_abs_deg": self.abs_angular,
            "area_abs_log": self.abs_area,
            "conformal_energy": self.conformal_energy,
            "excluded_corners": self.excluded_corners,
            "excluded_faces": self.excluded_faces,
            "angular_histogram_deg": histogram(&self.signed_angular(), ANGLE_BIN_DEG),
        });
        if include_raw {
            v["angular_deg"] = json!(self.angular);
            v["area_log"] = json!(self.area);
        }
        v
    }
}

/// Mean |d_area|; infinite when a face degenerates.
fn mean_abs_area(mesh: &TriMesh, param: &ParamCoords) -> f64 {
    let d = area_distortion(mesh, param).expect("lengths already checked");
    let mut s = 0.0;
    for x in &d {
        match x {
            Some(v) => s += v.abs(),
            None => return f64::INFINITY,
        }
    }
    s / d.len() as f64
}

/// Result of the area post-optimization.
#[derive(Debug, Clone)]
pub struct MobiusOptimum {
    pub param: GlobalParam,
    pub map: Mobius,
    pub before: f64,
    pub after: f64,
    pub evaluations: usize,
}

pub const NM_BUDGET: usize = 500;
const POLE_PENALTY: f64 = 1e6;

/// Plain Nelder–Mead with the usual coefficients.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, budget: usize) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut evals = n + 1;
    while evals < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= 1e-12 * (best.abs() + 1e-300) {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|s| s.0[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (simplex[n].0[k] - centroid[k])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            evals += 1;
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    for k in 0..n {
                        s.0[k] = x0[k] + 0.5 * (s.0[k] - x0[k]);
                    }
                    s.1 = f(&s.0);
                }
                evals += n;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    (x, fx, evals)
}

/// Andrew's monotone chain.
fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let turn = |o: Complex64, a: Complex64, b: Complex64| ((a - o).conj() * (b - o)).im;
    let mut h: Vec<Complex64> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = h.len();
        let it: Box<dyn Iterator<Item = &Complex64>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in it {
            while h.len() >= start + 2 && turn(h[h.len() - 2], h[h.len() - 1], q) <= 0.0 {
                h.pop();
            }
            h.push(q);
        }
        h.pop();
    }
    h
}

fn inside_convex(hull: &[Complex64], z: Complex64) -> bool {
    if hull.len() < 3 {
        return false;
    }
    (0..hull.len()).all(|i| ((hull[(i + 1) % hull.len()] - hull[i]).conj() * (z - hull[i])).im >= 0.0)
}

fn mobius_from_params(x: &[f64]) -> Option<Mobius> {
    let c = |i: usize| Complex64::new(x[2 * i], x[2 * i + 1]);
    Mobius::new(c(0), c(1), c(2), c(3)).ok()
}

fn disk_map(x: &[f64]) -> Option<Mobius> {
    let a = Complex64::new(x[0], x[1]);
    if a.norm() >= 0.999 {
        return None;
    }
    Mobius::new(Complex64::new(1.0, 0.0), -a, -a.conj(), Complex64::new(1.0, 0.0)).ok()
}

/// Applies `m` to a parameterization (through the stereographic chart on
/// the sphere). `None` if a point is sent to infinity in the plane.
pub fn apply_mobius(param: &ParamCoords, m: &Mobius) -> Option<ParamCoords> {
    match param {
        ParamCoords::Planar(p) => {
            let mut out = Vec::with_capacity(p.len());
            for &z in p {
                match m.apply(Finite(z)) {
                    Finite(w) => out.push(w),
                    _ => return None,
                }
            }
            Some(ParamCoords::Planar(out))
        }
        ParamCoords::Spherical(p) => Some(ParamCoords::Spherical(p.iter().map(|&q| stereographic_inverse(m.apply(stereographic(q)))).collect())),
    }
}

/// Searches a Möbius map (disk automorphism in disk mode) reducing the
/// mean |d_area|. The identity is always a candidate, so the objective
/// never gets worse.
pub fn mobius_area_optimize(mesh: &TriMesh, param: &GlobalParam, mode: Mode, seed: u64) -> MobiusOptimum {
    let hull = param.planar().map(convex_hull).unwrap_or_default();
    let objective = |x: &[f64]| -> f64 {
        let m = match mode {
            Mode::Disk => disk_map(x),
            _ => mobius_from_params(x),
        };
        let Some(m) = m.map(|m| m.normalized()) else { return POLE_PENALTY };
        if mode == Mode::Free && m.c.norm() > 0.0 {
            let pole = -m.d / m.c;
            if inside_convex(&hull, pole) {
                return POLE_PENALTY;
            }
        }
        match apply_mobius(&param.coords, &m) {
            Some(p) => {
                let v = mean_abs_area(mesh, &p);
                if v.is_finite() {
                    v
                } else {
                    POLE_PENALTY
                }
            }
            None => POLE_PENALTY,
        }
    };
    let identity: Vec<f64> = match mode {
        Mode::Disk => vec![0.0, 0.0],
        _ => vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    };
    let before = objective(&identity);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![identity.clone()];
    for _ in 0..3 {
        let s: Vec<f64> = identity.iter().map(|&v| v + rng.random_range(-0.3..0.3)).collect();
        starts.push(s);
    }
    let step = if mode == Mode::Disk { 0.1 } else { 0.2 };
    let runs: Vec<(Vec<f64>, f64, usize)> = starts.par_iter().map(|s| nelder_mead(&objective, s, step, NM_BUDGET)).collect();
    let evaluations = runs.iter().map(|r| r.2).sum();
    let mut best: (Vec<f64>, f64) = (identity.clone(), before);
    for (x, fx, _) in runs {
        if fx < best.1 {
            best = (x, fx);
        }
    }
    let map = match mode {
        Mode::Disk => disk_map(&best.0),
        _ => mobius_from_params(&best.0),
    }
    .unwrap_or_else(Mobius::identity);
    let coords = apply_mobius(&param.coords, &map).unwrap_or_else(|| param.coords.clone());
    let after = mean_abs_area(mesh, &coords);
    let (map, coords, after) = if after <= before { (map, coords, after) } else { (Mobius::identity(), param.coords.clone(), before) };
    let out = GlobalParam { coords, flipped: param.flipped.clone(), owner: param.owner.clone(), seam_gap: param.seam_gap };
    MobiusOptimum { param: out, map, before, after, evaluations }
}

/// Disk automorphism `z ↦ (z − α)/(1 − ᾱz)`.
pub fn disk_automorphism(alpha: Complex64) -> Mobius {
    Mobius::new(Complex64::new(1.0, 0.0), -alpha, -alpha.conj(), Complex64::new(1.0, 0.0)).expect("|α| < 1")
}

pub fn extended_to_planar(z: &[ExtendedComplex]) -> Option<Vec<Complex64>> {
    z.iter().map(|p| p.finite()).collect()
}
