//! Free-boundary conformal flattening of one disk-type submesh by
//! minimizing Dirichlet energy minus area (discrete natural conformal
//! parameterization).
//!
//! Normalization used throughout: `E_D(u) = ½ uᵀ diag(L, L) u` with the
//! standard cotangent Laplacian L (negative off-diagonals), and the area
//! matrix M holds the ±1 boundary pattern so that `uᵀ M u = 4·A(u)`. The
//! energy `E_D − A` then has gradient `(diag(L, L) − ½M) u`, which is
//! positive definite once two vertices are pinned.

use num_complex::Complex64;
use thiserror::Error;

use crate::mesh::{boundary_loops, cross, dot, norm, sub, TriMesh};
use crate::sparse::{solve_dirichlet, SolveError, SymMatrix};

#[derive(Debug, Error)]
pub enum DncpError {
    #[error("face {0} has a non-finite cotangent weight")]
    NonFiniteCot(usize),
    #[error("submesh has {0} boundary loops; flattening needs exactly one")]
    NotDisk(usize),
    #[error("pins must be two distinct boundary vertices with distinct targets")]
    BadPins,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("flattened submesh has non-positive total signed area {0:e}")]
    Orientation(f64),
    #[error("conformal energy {0:e} is negative beyond round-off")]
    NegativeEnergy(f64),
}

pub const COT_CLAMP: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct CotanLaplacian {
    pub matrix: SymMatrix,
    /// number of cotangents that hit the clamp
    pub clamped: usize,
}

impl CotanLaplacian {
    pub fn n(&self) -> usize {
        self.matrix.n
    }

    /// `½ (xᵀLx + yᵀLy)`
    pub fn dirichlet_energy(&self, u: &[Complex64]) -> f64 {
        let x: Vec<f64> = u.iter().map(|z| z.re).collect();
        let y: Vec<f64> = u.iter().map(|z| z.im).collect();
        0.5 * (self.matrix.bilinear(&x, &x) + self.matrix.bilinear(&y, &y))
    }
}

/// Cotangent of the corner at `o` in triangle (o, a, b).
pub fn corner_cot(o: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let (u, v) = (sub(a, o), sub(b, o));
    dot(u, v) / norm(cross(u, v))
}

pub fn cotangent_laplacian(mesh: &TriMesh) -> Result<CotanLaplacian, DncpError> {
    let p = mesh.vertices();
    let mut m = SymMatrix::new(mesh.num_vertices());
    m.entries.reserve(mesh.num_faces() * 12);
    let mut clamped = 0;
    for (fi, f) in mesh.faces().iter().enumerate() {
        for k in 0..3 {
            let (o, i, j) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let mut c = corner_cot(p[o], p[i], p[j]);
            if !c.is_finite() {
                return Err(DncpError::NonFiniteCot(fi));
            }
            if c.abs() > COT_CLAMP {
                c = c.signum() * COT_CLAMP;
                clamped += 1;
            }
            let w = 0.5 * c;
            m.add_sym(i, j, -w);
            m.add(i, i, w);
            m.add(j, j, w);
        }
    }
    Ok(CotanLaplacian { matrix: m, clamped })
}

/// The ±1 boundary pattern on the 2n×2n (x, y) block layout.
#[derive(Debug, Clone)]
pub struct AreaMatrix {
    pub matrix: SymMatrix,
    /// boundary edges (p, q) oriented along the loop
    pub edges: Vec<(usize, usize)>,
}

impl AreaMatrix {
    /// Signed shoelace area of the boundary polygon, `¼ uᵀ M u`.
    pub fn area(&self, u: &[Complex64]) -> f64 {
        let mut v: Vec<f64> = u.iter().map(|z| z.re).collect();
        v.extend(u.iter().map(|z| z.im));
        0.25 * self.matrix.bilinear(&v, &v)
    }
}

pub fn area_matrix(mesh: &TriMesh) -> Result<AreaMatrix, DncpError> {
    let loops = boundary_loops(mesh);
    if loops.len() != 1 {
        return Err(DncpError::NotDisk(loops.len()));
    }
    let n = mesh.num_vertices();
    let lp = &loops[0].0;
    let mut m = SymMatrix::new(2 * n);
    let mut edges = Vec::with_capacity(lp.len());
    for t in 0..lp.len() {
        let (p, q) = (lp[t], lp[(t + 1) % lp.len()]);
        m.add_sym(p, q + n, 1.0);
        m.add_sym(q, p + n, -1.0);
        edges.push((p, q));
    }
    Ok(AreaMatrix { matrix: m, edges })
}

/// Shoelace area computed directly from a closed polygon.
pub fn shoelace(poly: &[Complex64]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| (poly[i].conj() * poly[(i + 1) % n]).im).sum::<f64>() * 0.5
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarEmbedding {
    pub coords: Vec<Complex64>,
    pub boundary: Vec<bool>,
    /// vertex sitting at the point at infinity, if any
    pub infinity: Option<usize>,
}

impl PlanarEmbedding {
    pub fn len(&self) -> usize {
        self.coords.len()
    }
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pins {
    pub a: usize,
    pub b: usize,
    pub za: Complex64,
    pub zb: Complex64,
}

/// The first boundary vertex and the one closest to half the perimeter
/// (measured in 3D) away from it, pinned at 0 and 1.
pub fn default_pins(mesh: &TriMesh) -> Result<Pins, DncpError> {
    let loops = boundary_loops(mesh);
    if loops.len() != 1 {
        return Err(DncpError::NotDisk(loops.len()));
    }
    let lp = &loops[0].0;
    let p = mesh.vertices();
    let n = lp.len();
    let mut acc = vec![0.0; n + 1];
    for t in 0..n {
        acc[t + 1] = acc[t] + norm(sub(p[lp[(t + 1) % n]], p[lp[t]]));
    }
    let half = 0.5 * acc[n];
    let mut best = 1;
    for t in 1..n {
        if (acc[t] - half).abs() < (acc[best] - half).abs() {
            best = t;
        }
    }
    Ok(Pins { a: lp[0], b: lp[best], za: Complex64::new(0.0, 0.0), zb: Complex64::new(1.0, 0.0) })
}

#[derive(Debug, Clone)]
pub struct Flattening {
    pub embedding: PlanarEmbedding,
    pub dirichlet: f64,
    pub area: f64,
    pub clamped_cotangents: usize,
}

impl Flattening {
    pub fn conformal_energy(&self) -> f64 {
        self.dirichlet - self.area
    }
}

pub fn dncp_flatten(mesh: &TriMesh, pins: Option<Pins>) -> Result<Flattening, DncpError> {
    let lap = cotangent_laplacian(mesh)?;
    let am = area_matrix(mesh)?;
    dncp_flatten_with(mesh, &lap, &am, pins)
}

pub fn dncp_flatten_with(mesh: &TriMesh, lap: &CotanLaplacian, am: &AreaMatrix, pins: Option<Pins>) -> Result<Flattening, DncpError> {
    let n = mesh.num_vertices();
    let pins = match pins {
        Some(p) => p,
        None => default_pins(mesh)?,
    };
    let mut boundary = vec![false; n];
    for &(p, _) in &am.edges {
        boundary[p] = true;
    }
    if pins.a == pins.b || pins.a >= n || pins.b >= n || !boundary[pins.a] || !boundary[pins.b] || pins.za == pins.zb {
        return Err(DncpError::BadPins);
    }
    let mut sys = SymMatrix::new(2 * n);
    sys.entries.reserve(2 * lap.matrix.entries.len() + am.matrix.entries.len());
    for &(i, j, v) in &lap.matrix.entries {
        sys.add(i, j, v);
        sys.add(i + n, j + n, v);
    }
    for &(i, j, v) in &am.matrix.entries {
        sys.add(i, j, -0.5 * v);
    }
    let mut fixed = vec![None; 2 * n];
    fixed[pins.a] = Some([pins.za.re]);
    fixed[pins.a + n] = Some([pins.za.im]);
    fixed[pins.b] = Some([pins.zb.re]);
    fixed[pins.b + n] = Some([pins.zb.im]);
    let sol = solve_dirichlet(&sys, &fixed, None)?;
    let coords: Vec<Complex64> = (0..n).map(|i| Complex64::new(sol[i][0], sol[i + n][0])).collect();
    let dirichlet = lap.dirichlet_energy(&coords);
    let area = am.area(&coords);
    if !(area > 0.0) {
        return Err(DncpError::Orientation(area));
    }
    let scale2 = (pins.zb - pins.za).norm_sqr();
    if dirichlet - area < -1e-8 * scale2 {
        return Err(DncpError::NegativeEnergy(dirichlet - area));
    }
    Ok(Flattening { embedding: PlanarEmbedding { coords, boundary, infinity: None }, dirichlet, area, clamped_cotangents: lap.clamped })
}
