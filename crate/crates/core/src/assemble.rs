//! Harmonic reassembly of submesh interiors, Beltrami-based fold checks
//! and repair, stitching into one global parameterization.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::dncp::CotanLaplacian;
use crate::extended::{ExtendedComplex, Finite, Infinity};
use crate::mesh::{boundary_loops, cross, dot, norm, sub, ParamCoords, TriMesh, Vec3};
use crate::partition::{Mode, Partition};
use crate::sparse::{solve_dirichlet, SolveError, SymMatrix};

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error("boundary vertex {0} has no finite position")]
    MissingBoundary(usize),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("face {0} is degenerate in the source configuration")]
    DegenerateSource(usize),
    #[error("fold repair left {} flipped faces after {iterations} iterations (first: {:?})", .remaining.len(), .remaining.iter().take(8).collect::<Vec<_>>())]
    RepairFailed { remaining: Vec<usize>, iterations: usize },
    #[error("seam vertex {vertex} disagrees across submeshes by {gap:e} (relative)")]
    SeamMismatch { vertex: usize, gap: f64 },
    #[error("vertex {0} is not covered by any submesh")]
    Uncovered(usize),
    #[error("disk boundary vertex {vertex} is off the unit circle by {err:e}")]
    OffCircle { vertex: usize, err: f64 },
}

pub const SEAM_SNAP: f64 = 1e-8;
pub const SEAM_HARD: f64 = 1e-6;
pub const BELTRAMI_THRESHOLD: f64 = 0.99;

/// Per-face Beltrami coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeltramiField {
    pub mu: Vec<Complex64>,
}

impl BeltramiField {
    pub fn max_norm(&self) -> f64 {
        self.mu.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }
    pub fn mean_norm(&self) -> f64 {
        if self.mu.is_empty() {
            return 0.0;
        }
        self.mu.iter().map(|m| m.norm()).sum::<f64>() / self.mu.len() as f64
    }
}

/// Harmonic extension with cotangent weights. `boundary[v]` must be set
/// for every boundary vertex; interior entries may be set too (they are
/// then held fixed).
pub fn harmonic_solve(mesh: &TriMesh, lap: &CotanLaplacian, boundary: &[Option<Complex64>]) -> Result<Vec<Complex64>, AssembleError> {
    for lp in boundary_loops(mesh) {
        for &v in &lp.0 {
            match boundary[v] {
                Some(z) if z.re.is_finite() && z.im.is_finite() => {}
                _ => return Err(AssembleError::MissingBoundary(v)),
            }
        }
    }
    let fixed: Vec<Option<[f64; 2]>> = boundary.iter().map(|b| b.map(|z| [z.re, z.im])).collect();
    let sol = solve_dirichlet(&lap.matrix, &fixed, None)?;
    Ok(sol.into_iter().map(|[x, y]| Complex64::new(x, y)).collect())
}

/// μ = f_z̄ / f_z of the affine map taking triangle `s` to triangle `t`.
pub fn affine_beltrami(s: [Complex64; 3], t: [Complex64; 3]) -> Option<Complex64> {
    let (d1, d2) = (s[1] - s[0], s[2] - s[0]);
    let (w1, w2) = (t[1] - t[0], t[2] - t[0]);
    let den = d1 * d2.conj() - d2 * d1.conj();
    if den.norm() <= 1e-300 {
        return None;
    }
    let fz = (w1 * d2.conj() - w2 * d1.conj()) / den;
    let fzb = (d1 * w2 - d2 * w1) / den;
    if fz.norm() == 0.0 {
        return Some(Complex64::new(f64::INFINITY, 0.0));
    }
    Some(fzb / fz)
}

pub fn beltrami_per_face(source: &[Complex64], target: &[Complex64], faces: &[[usize; 3]]) -> Result<BeltramiField, AssembleError> {
    let mut mu = Vec::with_capacity(faces.len());
    for (f, t) in faces.iter().enumerate() {
        let s = [source[t[0]], source[t[1]], source[t[2]]];
        let d = [target[t[0]], target[t[1]], target[t[2]]];
        mu.push(affine_beltrami(s, d).ok_or(AssembleError::DegenerateSource(f))?);
    }
    Ok(BeltramiField { mu })
}

/// Isometric 2D coordinates of a 3D triangle, first vertex at 0 and
/// second on the positive real axis.
pub fn local_frame(p: [Vec3; 3]) -> [Complex64; 3] {
    let e1 = sub(p[1], p[0]);
    let l = norm(e1);
    let u = [e1[0] / l, e1[1] / l, e1[2] / l];
    let n = cross(e1, sub(p[2], p[0]));
    let nn = norm(n);
    let nv = [n[0] / nn, n[1] / nn, n[2] / nn];
    let v = cross(nv, u);
    let q = sub(p[2], p[0]);
    [Complex64::new(0.0, 0.0), Complex64::new(l, 0.0), Complex64::new(dot(q, u), dot(q, v))]
}

fn face_frames(mesh: &TriMesh) -> Vec<[Complex64; 3]> {
    let p = mesh.vertices();
    mesh.faces().iter().map(|f| local_frame([p[f[0]], p[f[1]], p[f[2]]])).collect()
}

/// Beltrami field of a planar parameterization, measured against each
/// face's own isometric frame. With `inverse` the map goes from the
/// parameter domain back to the surface.
pub fn mesh_beltrami(mesh: &TriMesh, param: &[Complex64], inverse: bool) -> Result<BeltramiField, AssembleError> {
    let frames = face_frames(mesh);
    let mut mu = Vec::with_capacity(frames.len());
    for (f, (t, fr)) in mesh.faces().iter().zip(&frames).enumerate() {
        let w = [param[t[0]], param[t[1]], param[t[2]]];
        let m = if inverse { affine_beltrami(w, *fr) } else { affine_beltrami(*fr, w) };
        mu.push(m.ok_or(AssembleError::DegenerateSource(f))?);
    }
    Ok(BeltramiField { mu })
}

fn signed_area(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    0.5 * ((b - a).conj() * (c - a)).im
}

/// Faces with non-positive signed area in the plane.
pub fn planar_flips(faces: &[[usize; 3]], param: &[Complex64]) -> Vec<usize> {
    faces.iter().enumerate().filter(|(_, f)| !(signed_area(param[f[0]], param[f[1]], param[f[2]]) > 0.0)).map(|(i, _)| i).collect()
}

/// Faces whose triangle on the sphere faces inward.
pub fn spherical_flips(faces: &[[usize; 3]], p: &[Vec3]) -> Vec<usize> {
    faces
        .iter()
        .enumerate()
        .filter(|(_, f)| {
            let (a, b, c) = (p[f[0]], p[f[1]], p[f[2]]);
            let n = cross(sub(b, a), sub(c, a));
            let m = [a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2]];
            !(dot(n, m) > 0.0)
        })
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct BijectivityReport {
    /// faces with |μ| ≥ threshold
    pub flagged: Vec<usize>,
    pub max_mu: f64,
}

impl BijectivityReport {
    pub fn is_clean(&self) -> bool {
        self.flagged.is_empty()
    }
}

pub fn check_bijectivity(field: &BeltramiField, threshold: f64) -> BijectivityReport {
    let flagged = field.mu.iter().enumerate().filter(|(_, m)| !(m.norm() < threshold)).map(|(i, _)| i).collect();
    BijectivityReport { flagged, max_mu: field.max_norm() }
}

/// Stiffness of the linear Beltrami system: per face, the Dirichlet form
/// of the coefficient matrix [[α₁, α₂], [α₂, α₃]] built from μ. With μ = 0
/// this is the cotangent Laplacian.
fn beltrami_stiffness(n: usize, faces: &[[usize; 3]], frames: &[[Complex64; 3]], mu: &[Complex64]) -> SymMatrix {
    let mut k = SymMatrix::new(n);
    for ((f, fr), m) in faces.iter().zip(frames).zip(mu) {
        let (rho, tau) = (m.re, m.im);
        let d = 1.0 - m.norm_sqr();
        let a1 = ((rho - 1.0) * (rho - 1.0) + tau * tau) / d;
        let a2 = -2.0 * tau / d;
        let a3 = ((1.0 + rho) * (1.0 + rho) + tau * tau) / d;
        let area = signed_area(fr[0], fr[1], fr[2]);
        // hat-function gradients, up to the common factor 1/(2·area)
        let g: Vec<(f64, f64)> = (0..3)
            .map(|i| {
                let e = fr[(i + 2) % 3] - fr[(i + 1) % 3];
                (-e.im, e.re)
            })
            .collect();
        for i in 0..3 {
            for j in i..3 {
                let (gi, gj) = (g[i], g[j]);
                let v = (gi.0 * (a1 * gj.0 + a2 * gj.1) + gi.1 * (a2 * gj.0 + a3 * gj.1)) / (4.0 * area);
                k.add_sym(f[i], f[j], v);
            }
        }
    }
    k
}

/// Solves the linear Beltrami system: the map with per-face coefficient
/// `mu` (relative to each face's isometric frame) and the given fixed
/// positions.
pub fn linear_beltrami_solve(mesh: &TriMesh, mu: &[Complex64], fixed: &[Option<Complex64>]) -> Result<Vec<Complex64>, AssembleError> {
    let frames = face_frames(mesh);
    let k = beltrami_stiffness(mesh.num_vertices(), mesh.faces(), &frames, mu);
    let fx: Vec<Option<[f64; 2]>> = fixed.iter().map(|b| b.map(|z| [z.re, z.im])).collect();
    let sol = solve_dirichlet(&k, &fx, None)?;
    Ok(sol.into_iter().map(|[x, y]| Complex64::new(x, y)).collect())
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RepairReport {
    pub iterations: usize,
    pub initial_flips: usize,
    pub initial_flagged: usize,
    pub max_mu_before: f64,
    pub max_mu_after: f64,
}

const MU_CAP: f64 = 0.95;

/// Removes fold-overs from a planar embedding, boundary held fixed.
///
/// The coefficient of the inverse map is truncated and smoothed on the
/// flagged faces and a growing ring around them; the composition of the
/// embedding with the map having that coefficient has, away from the
/// flagged region, exactly the embedding's own coefficient. That
/// composition is computed in one linear Beltrami solve on the surface.
pub fn qc_correct(mesh: &TriMesh, param: &[Complex64], max_iter: usize, threshold: f64) -> Result<(Vec<Complex64>, RepairReport), AssembleError> {
    let inv = mesh_beltrami(mesh, param, true)?;
    let flips = planar_flips(mesh.faces(), param);
    let first = check_bijectivity(&inv, threshold);
    let mut report = RepairReport { initial_flips: flips.len(), initial_flagged: first.flagged.len(), max_mu_before: first.max_mu, max_mu_after: first.max_mu, ..Default::default() };
    if first.is_clean() && flips.is_empty() {
        return Ok((param.to_vec(), report));
    }
    let nv = mesh.num_vertices();
    let mut fixed: Vec<Option<Complex64>> = vec![None; nv];
    for lp in boundary_loops(mesh) {
        for &v in &lp.0 {
            fixed[v] = Some(param[v]);
        }
    }
    let faces = mesh.faces();
    let mut current = param.to_vec();
    let mut bad: Vec<bool> = vec![false; faces.len()];
    let mut remaining = Vec::new();
    for it in 1..=max_iter {
        let fwd = mesh_beltrami(mesh, &current, false)?;
        let inv = mesh_beltrami(mesh, &current, true)?;
        for &f in check_bijectivity(&inv, threshold).flagged.iter().chain(planar_flips(faces, &current).iter()) {
            bad[f] = true;
        }
        // grow the repair region by `it` vertex rings
        let mut region = bad.clone();
        for _ in 0..it {
            let mut next = region.clone();
            for (f, t) in faces.iter().enumerate() {
                if region[f] {
                    for &v in t {
                        for &g in mesh.vertex_faces(v) {
                            next[g] = true;
                        }
                    }
                }
            }
            region = next;
        }
        let mut mu: Vec<Complex64> = fwd.mu.iter().map(|m| if m.norm() < MU_CAP { *m } else { *m / m.norm() * MU_CAP }).collect();
        // Jacobi smoothing in the region: trusted faces keep their value
        for _ in 0..4 * it {
            let prev = mu.clone();
            for (f, t) in faces.iter().enumerate() {
                if !region[f] {
                    continue;
                }
                let mut acc = Complex64::new(0.0, 0.0);
                let mut cnt = 0.0;
                for &v in t {
                    for &g in mesh.vertex_faces(v) {
                        if g != f && !bad[g] {
                            acc += prev[g];
                            cnt += 1.0;
                        }
                    }
                }
                mu[f] = if cnt > 0.0 { acc / cnt } else { Complex64::new(0.0, 0.0) };
                if mu[f].norm() > MU_CAP {
                    let s = MU_CAP / mu[f].norm();
                    mu[f] *= s;
                }
            }
        }
        current = linear_beltrami_solve(mesh, &mu, &fixed)?;
        report.iterations = it;
        let after = mesh_beltrami(mesh, &current, true)?;
        remaining = planar_flips(faces, &current);
        report.max_mu_after = after.max_norm();
        if remaining.is_empty() {
            return Ok((current, report));
        }
    }
    Err(AssembleError::RepairFailed { remaining, iterations: report.iterations })
}

/// Inverse stereographic projection, south pole at 0.
pub fn stereographic_inverse(z: ExtendedComplex) -> Vec3 {
    match z {
        Infinity => [0.0, 0.0, 1.0],
        Finite(w) => {
            let r2 = w.norm_sqr();
            if !r2.is_finite() || r2 > 1e300 {
                return [0.0, 0.0, 1.0];
            }
            let d = 1.0 + r2;
            let p = [2.0 * w.re / d, 2.0 * w.im / d, (r2 - 1.0) / d];
            let l = norm(p);
            [p[0] / l, p[1] / l, p[2] / l]
        }
    }
}

pub fn stereographic(p: Vec3) -> ExtendedComplex {
    if p[2] >= 1.0 {
        return Infinity;
    }
    let s = 1.0 / (1.0 - p[2]);
    if !s.is_finite() {
        return Infinity;
    }
    Finite(Complex64::new(p[0] * s, p[1] * s))
}

/// Global parameterization: one coordinate per parent vertex.
#[derive(Debug, Clone)]
pub struct GlobalParam {
    pub coords: ParamCoords,
    pub flipped: Vec<bool>,
    /// lowest submesh id containing each vertex
    pub owner: Vec<usize>,
    /// largest disagreement between seam copies before snapping
    pub seam_gap: f64,
}

impl GlobalParam {
    pub fn flip_count(&self) -> usize {
        self.flipped.iter().filter(|&&f| f).count()
    }
    pub fn planar(&self) -> Option<&[Complex64]> {
        match &self.coords {
            ParamCoords::Planar(p) => Some(p),
            _ => None,
        }
    }
    pub fn spherical(&self) -> Option<&[Vec3]> {
        match &self.coords {
            ParamCoords::Spherical(p) => Some(p),
            _ => None,
        }
    }
}

/// Merges per-submesh vertex coordinates (local indexing) into one
/// coordinate per parent vertex. In sphere mode the inputs are points of
/// the extended plane and the output lives on S².
pub fn stitch_global(mesh: &TriMesh, partition: &Partition, local: &[Vec<ExtendedComplex>], mode: Mode) -> Result<GlobalParam, AssembleError> {
    let n = mesh.num_vertices();
    let mut owner = vec![usize::MAX; n];
    let mut copies: Vec<Vec<ExtendedComplex>> = vec![Vec::new(); n];
    for (s, map) in partition.vertex_maps.iter().enumerate() {
        for (l, &p) in map.iter().enumerate() {
            if owner[p] == usize::MAX {
                owner[p] = s;
            }
            copies[p].push(local[s][l]);
        }
    }
    if let Some(v) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(AssembleError::Uncovered(v));
    }
    let mut gap = 0.0f64;
    let coords = if mode == Mode::Sphere {
        let mut pts = Vec::with_capacity(n);
        for (v, c) in copies.iter().enumerate() {
            let sp: Vec<Vec3> = c.iter().map(|z| stereographic_inverse(*z)).collect();
            let mut m = [0.0; 3];
            for p in &sp {
                for k in 0..3 {
                    m[k] += p[k];
                }
            }
            for p in &sp {
                let g = norm(sub(*p, sp[0]));
                if g > SEAM_HARD {
                    return Err(AssembleError::SeamMismatch { vertex: v, gap: g });
                }
                gap = gap.max(g);
            }
            let l = norm(m);
            pts.push([m[0] / l, m[1] / l, m[2] / l]);
        }
        ParamCoords::Spherical(pts)
    } else {
        let scale = copies.iter().flatten().filter_map(|z| z.finite()).map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut pts = Vec::with_capacity(n);
        for (v, c) in copies.iter().enumerate() {
            let fin: Vec<Complex64> = c.iter().map(|z| z.finite().ok_or(AssembleError::MissingBoundary(v))).collect::<Result<_, _>>()?;
            let mean = fin.iter().sum::<Complex64>() / fin.len() as f64;
            for z in &fin {
                let g = (z - fin[0]).norm() / scale;
                if g > SEAM_HARD {
                    return Err(AssembleError::SeamMismatch { vertex: v, gap: g });
                }
                gap = gap.max(g);
            }
            pts.push(mean);
        }
        if mode == Mode::Disk {
            for lp in boundary_loops(mesh) {
                for &v in &lp.0 {
                    let err = (pts[v].norm() - 1.0).abs();
                    if err > 1e-9 {
                        return Err(AssembleError::OffCircle { vertex: v, err });
                    }
                }
            }
        }
        ParamCoords::Planar(pts)
    };
    let flips = match &coords {
        ParamCoords::Planar(p) => planar_flips(mesh.faces(), p),
        ParamCoords::Spherical(p) => spherical_flips(mesh.faces(), p),
    };
    let mut flipped = vec![false; mesh.num_faces()];
    for f in flips {
        flipped[f] = true;
    }
    Ok(GlobalParam { coords, flipped, owner, seam_gap: gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dncp::cotangent_laplacian;
    use crate::fixtures::grid;

    fn planar(m: &TriMesh) -> Vec<Complex64> {
        m.vertices().iter().map(|p| Complex64::new(p[0], p[1])).collect()
    }

    fn boundary_data(m: &TriMesh, f: impl Fn(Complex64) -> Complex64) -> Vec<Option<Complex64>> {
        let mut b = vec![None; m.num_vertices()];
        let p = planar(m);
        for lp in boundary_loops(m) {
            for &v in &lp.0 {
                b[v] = Some(f(p[v]));
            }
        }
        b
    }

    #[test]
    fn harmonic_reproduces_identity_and_constants() {
        let g = grid(9, 7, 1.0, 1.0);
        let lap = cotangent_laplacian(&g).unwrap();
        let p = planar(&g);
        let sol = harmonic_solve(&g, &lap, &boundary_data(&g, |z| z)).unwrap();
        for (a, b) in sol.iter().zip(&p) {
            assert!((a - b).norm() < 1e-8);
        }
        let k = Complex64::new(2.0, -3.0);
        for z in harmonic_solve(&g, &lap, &boundary_data(&g, |_| k)).unwrap() {
            assert!((z - k).norm() < 1e-12);
        }
    }

    #[test]
    fn harmonic_is_linear() {
        let g = grid(8, 8, 1.0, 1.0);
        let lap = cotangent_laplacian(&g).unwrap();
        let f1 = |z: Complex64| z * z;
        let f2 = |z: Complex64| Complex64::new(z.re.sin(), z.im.cos());
        let s1 = harmonic_solve(&g, &lap, &boundary_data(&g, f1)).unwrap();
        let s2 = harmonic_solve(&g, &lap, &boundary_data(&g, f2)).unwrap();
        let s12 = harmonic_solve(&g, &lap, &boundary_data(&g, |z| f1(z) * 2.0 - f2(z) * 0.5)).unwrap();
        for i in 0..s1.len() {
            assert!((s12[i] - (s1[i] * 2.0 - s2[i] * 0.5)).norm() < 1e-10);
        }
    }

    #[test]
    fn beltrami_examples() {
        let g = grid(5, 5, 1.0, 1.0);
        let p = planar(&g);
        let same = beltrami_per_face(&p, &p, g.faces()).unwrap();
        assert_eq!(same.max_norm(), 0.0);
        let sim: Vec<Complex64> = p.iter().map(|z| z * Complex64::new(0.3, 1.7) + 4.0).collect();
        assert!(beltrami_per_face(&p, &sim, g.faces()).unwrap().max_norm() < 1e-12);
        let aff: Vec<Complex64> = p.iter().map(|z| z + 0.5 * z.conj()).collect();
        for m in beltrami_per_face(&p, &aff, g.faces()).unwrap().mu {
            assert!((m - 0.5).norm() < 1e-12);
        }
        let refl: Vec<Complex64> = p.iter().map(|z| z.conj()).collect();
        let r = check_bijectivity(&beltrami_per_face(&p, &refl, g.faces()).unwrap(), BELTRAMI_THRESHOLD);
        assert_eq!(r.flagged.len(), g.num_faces());
        assert!(check_bijectivity(&same, BELTRAMI_THRESHOLD).is_clean());
    }

    #[test]
    fn linear_beltrami_reproduces_piecewise_linear_maps() {
        let g = grid(10, 10, 1.0, 1.0);
        let f: Vec<Complex64> = planar(&g).iter().map(|z| z + 0.15 * z.conj() * z.conj() + 0.01 * (z * 3.0).sin()).collect();
        let mu = mesh_beltrami(&g, &f, false).unwrap();
        assert!(mu.max_norm() < 0.9 && mu.max_norm() > 0.05, "{}", mu.max_norm());
        let mut fixed = vec![None; f.len()];
        for lp in boundary_loops(&g) {
            for &v in &lp.0 {
                fixed[v] = Some(f[v]);
            }
        }
        let sol = linear_beltrami_solve(&g, &mu.mu, &fixed).unwrap();
        for (a, b) in sol.iter().zip(&f) {
            assert!((a - b).norm() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn repair_clears_an_injected_fold() {
        let g = grid(12, 12, 1.0, 1.0);
        let mut p = planar(&g);
        let orig = p.clone();
        // move an interior vertex across the far side of its star
        let v = 5 * 12 + 6;
        p[v] += Complex64::new(0.14, 0.11);
        assert!(!planar_flips(g.faces(), &p).is_empty());
        let (fixed, rep) = qc_correct(&g, &p, 5, BELTRAMI_THRESHOLD).unwrap();
        assert!(planar_flips(g.faces(), &fixed).is_empty());
        assert!(rep.iterations <= 5 && rep.max_mu_after < rep.max_mu_before);
        for lp in boundary_loops(&g) {
            for &b in &lp.0 {
                assert!((fixed[b] - orig[b]).norm() < 1e-12);
            }
        }
        // fold-free input short-circuits
        let (same, rep) = qc_correct(&g, &orig, 5, BELTRAMI_THRESHOLD).unwrap();
        assert_eq!(same, orig);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn stereographic_convention() {
        assert_eq!(stereographic_inverse(ExtendedComplex::new(0.0, 0.0)), [0.0, 0.0, -1.0]);
        assert_eq!(stereographic_inverse(Infinity), [0.0, 0.0, 1.0]);
        let e = stereographic_inverse(ExtendedComplex::new(1.0, 0.0));
        assert!((e[0] - 1.0).abs() < 1e-15 && e[1].abs() < 1e-15 && e[2].abs() < 1e-15);
        let z = ExtendedComplex::new(0.3, -2.5);
        let back = stereographic(stereographic_inverse(z));
        assert!(back.chordal(&z) < 1e-14);
        assert!((norm(stereographic_inverse(z)) - 1.0).abs() < 1e-12);
    }
}
