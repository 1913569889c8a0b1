//! Triangle meshes, topology checks, boundary extraction and OBJ I/O.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

pub type Vec3 = [f64; 3];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: face with {count} vertices cannot be fan-triangulated")]
    BadPolygon { line: usize, count: usize },
    #[error("line {line}: vertex index {index} out of range (mesh has {count} vertices)")]
    IndexOutOfRange { line: usize, index: i64, count: usize },
    #[error("face {face} references vertex {index}, but the mesh has {count} vertices")]
    FaceIndex { face: usize, index: usize, count: usize },
    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },
    #[error("edge ({0}, {1}) is shared by more than two faces")]
    NonManifoldEdge(usize, usize),
    #[error("edge ({0}, {1}) is traversed twice in the same direction; face orientation is inconsistent")]
    InconsistentOrientation(usize, usize),
    #[error("parameterization has {got} coordinates for {expected} vertices")]
    ParamLength { got: usize, expected: usize },
}

/// Indexed triangle mesh. Immutable after construction; all derived
/// adjacency is computed once in [`TriMesh::new`].
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    // directed edge (a, b) -> face containing it in that direction
    half_edges: HashMap<(usize, usize), usize>,
    vertex_faces: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    DiskType,
    SphereType,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct TopologyReport {
    pub euler_characteristic: i64,
    pub boundary_loop_count: usize,
    pub classification: Classification,
}

/// Vertex indices of one boundary loop, surface on the left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryLoop(pub Vec<usize>);

impl BoundaryLoop {
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Relative area threshold for rejecting slivers, against the squared
/// bounding-box diagonal.
pub const DEGENERATE_AREA_EPS: f64 = 1e-12;

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(MeshError::FaceIndex { face: fi, index: v, count: n });
                }
            }
        }
        let mesh = Self::build(vertices, faces)?;
        let diag2 = mesh.bbox_diagonal().powi(2);
        for fi in 0..mesh.faces.len() {
            let f = mesh.faces[fi];
            let area = mesh.face_area(fi);
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] || !(area > DEGENERATE_AREA_EPS * diag2) {
                return Err(MeshError::DegenerateFace { face: fi, area });
            }
        }
        Ok(mesh)
    }

    /// Builds adjacency without the degenerate-face check. Submeshes are
    /// carved out of an already validated parent, so they skip it.
    fn build(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mut half_edges = HashMap::with_capacity(faces.len() * 3);
        let mut vertex_faces = vec![Vec::new(); vertices.len()];
        let mut undirected: HashMap<(usize, usize), u8> = HashMap::with_capacity(faces.len() * 2);
        for (fi, f) in faces.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                if half_edges.insert((a, b), fi).is_some() {
                    return Err(MeshError::InconsistentOrientation(a, b));
                }
                let c = undirected.entry((a.min(b), a.max(b))).or_insert(0);
                *c += 1;
                if *c > 2 {
                    return Err(MeshError::NonManifoldEdge(a.min(b), a.max(b)));
                }
                vertex_faces[a].push(fi);
            }
        }
        Ok(Self { vertices, faces, half_edges, vertex_faces })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }
    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }
    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    /// Face containing the directed edge a→b, if any.
    pub fn face_of_half_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.half_edges.get(&(a, b)).copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.half_edges.contains_key(&(a, b)) || self.half_edges.contains_key(&(b, a))
    }

    pub fn is_boundary_edge(&self, a: usize, b: usize) -> bool {
        self.half_edges.contains_key(&(a, b)) != self.half_edges.contains_key(&(b, a))
    }

    /// Undirected edges as sorted pairs, in face order of first appearance.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.faces.len() * 3 / 2 + 8);
        for f in &self.faces {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                // each undirected edge emitted once: by its a<b half-edge, or
                // by the only half-edge present on the boundary
                if a < b || !self.half_edges.contains_key(&(b, a)) {
                    out.push((a.min(b), a.max(b)));
                }
            }
        }
        out
    }

    pub fn num_edges(&self) -> usize {
        let interior = self.half_edges.keys().filter(|&&(a, b)| a < b && self.half_edges.contains_key(&(b, a))).count();
        let boundary = self.half_edges.keys().filter(|&&(a, b)| !self.half_edges.contains_key(&(b, a))).count();
        interior + boundary
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f].map(|i| self.vertices[i]);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if self.vertices.is_empty() {
            return 0.0;
        }
        norm(sub(hi, lo))
    }

    /// Mean edge length, used as the length scale in tolerances.
    pub fn mean_edge_length(&self) -> f64 {
        let edges = self.edges();
        if edges.is_empty() {
            return 0.0;
        }
        edges.iter().map(|&(a, b)| norm(sub(self.vertices[a], self.vertices[b]))).sum::<f64>() / edges.len() as f64
    }

    /// Signed volume enclosed by the surface; positive for outward faces on
    /// closed meshes.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.vertices[i]);
                dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }

    /// Reverses every face. Used when a closed mesh arrives with inward
    /// normals.
    pub fn flipped(&self) -> TriMesh {
        let faces = self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect();
        Self::build(self.vertices.clone(), faces).expect("flipping preserves manifoldness")
    }

    /// Carves out the faces listed, renumbering vertices in order of first
    /// use. Returns the submesh and the local→parent vertex map.
    pub fn submesh(&self, face_ids: &[usize]) -> (TriMesh, Vec<usize>) {
        let mut local = HashMap::new();
        let mut to_parent = Vec::new();
        let mut faces = Vec::with_capacity(face_ids.len());
        for &fi in face_ids {
            let f = self.faces[fi].map(|v| {
                *local.entry(v).or_insert_with(|| {
                    to_parent.push(v);
                    to_parent.len() - 1
                })
            });
            faces.push(f);
        }
        let verts = to_parent.iter().map(|&v| self.vertices[v]).collect();
        let mesh = Self::build(verts, faces).expect("a subset of a manifold mesh is manifold");
        (mesh, to_parent)
    }

    fn is_connected(&self) -> bool {
        if self.faces.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.faces.len()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(f) = stack.pop() {
            for &v in &self.faces[f] {
                for &g in &self.vertex_faces[v] {
                    if !seen[g] {
                        seen[g] = true;
                        count += 1;
                        stack.push(g);
                    }
                }
            }
        }
        count == self.faces.len()
    }

    fn boundary_is_simple(&self) -> bool {
        let mut out_deg: HashMap<usize, u32> = HashMap::new();
        for &(a, b) in self.half_edges.keys() {
            if !self.half_edges.contains_key(&(b, a)) {
                *out_deg.entry(a).or_default() += 1;
            }
        }
        out_deg.values().all(|&d| d == 1)
    }
}

pub fn validate_topology(mesh: &TriMesh) -> TopologyReport {
    let used = mesh.vertex_faces.iter().filter(|f| !f.is_empty()).count() as i64;
    let chi = used - mesh.num_edges() as i64 + mesh.num_faces() as i64;
    let loops = boundary_loops(mesh).len();
    let ok = mesh.is_connected() && used == mesh.num_vertices() as i64 && mesh.boundary_is_simple();
    let classification = match (ok, chi, loops) {
        (true, 1, 1) => Classification::DiskType,
        (true, 2, 0) => Classification::SphereType,
        _ => Classification::Unsupported,
    };
    TopologyReport { euler_characteristic: chi, boundary_loop_count: loops, classification }
}

/// Boundary loops with the surface on the left. Each loop starts at its
/// smallest vertex index so the output is independent of hash order.
pub fn boundary_loops(mesh: &TriMesh) -> Vec<BoundaryLoop> {
    // boundary half-edges a→b whose twin is missing; the face lies to the left of a→b
    let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(a, b) in mesh.half_edges.keys() {
        if !mesh.half_edges.contains_key(&(b, a)) {
            next.entry(a).or_default().push(b);
        }
    }
    for v in next.values_mut() {
        v.sort_unstable();
    }
    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut used: HashMap<(usize, usize), bool> = HashMap::new();
    let mut loops = Vec::new();
    for s in starts {
        for &first in &next[&s] {
            if used.contains_key(&(s, first)) {
                continue;
            }
            let mut lp = vec![s];
            let (mut a, mut b) = (s, first);
            loop {
                used.insert((a, b), true);
                if b == s {
                    break;
                }
                lp.push(b);
                let cand = next[&b].iter().copied().find(|&c| !used.contains_key(&(b, c)));
                match cand {
                    Some(c) => {
                        a = b;
                        b = c;
                    }
                    None => break,
                }
            }
            loops.push(BoundaryLoop(lp));
        }
    }
    loops
}

pub fn parse_obj(text: &str) -> Result<TriMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut face_lines = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut it = content.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut p = [0.0; 3];
                for c in &mut p {
                    let tok = it.next().ok_or_else(|| MeshError::Parse { line, msg: "vertex needs 3 coordinates".into() })?;
                    *c = tok.parse().map_err(|_| MeshError::Parse { line, msg: format!("bad coordinate '{tok}'") })?;
                }
                vertices.push(p);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in it {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: i64 = head.parse().map_err(|_| MeshError::Parse { line, msg: format!("bad face index '{tok}'") })?;
                    let n = vertices.len() as i64;
                    // OBJ allows negative (relative) indices
                    let abs = if i < 0 { n + i } else { i - 1 };
                    if i == 0 || abs < 0 || abs >= n {
                        return Err(MeshError::IndexOutOfRange { line, index: i, count: vertices.len() });
                    }
                    idx.push(abs as usize);
                }
                if idx.len() < 3 {
                    return Err(MeshError::BadPolygon { line, count: idx.len() });
                }
                for t in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[t], idx[t + 1]]);
                    face_lines.push(line);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<TriMesh, MeshError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MeshError::Io { path: path.display().to_string(), source })?;
    parse_obj(&text)
}

/// Per-vertex parameter coordinates.
#[derive(Debug, Clone)]
pub enum ParamCoords {
    Planar(Vec<Complex64>),
    Spherical(Vec<Vec3>),
}

impl ParamCoords {
    pub fn len(&self) -> usize {
        match self {
            ParamCoords::Planar(p) => p.len(),
            ParamCoords::Spherical(p) => p.len(),
        }
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn fmt_num(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
}

/// OBJ text for a parameterized mesh. Planar parameters become a `vt`
/// channel next to the original geometry; spherical ones replace the
/// geometry.
pub fn obj_with_param(mesh: &TriMesh, param: &ParamCoords, digits: usize) -> Result<String, MeshError> {
    if param.len() != mesh.num_vertices() {
        return Err(MeshError::ParamLength { got: param.len(), expected: mesh.num_vertices() });
    }
    let mut s = String::with_capacity(mesh.num_vertices() * 64 + mesh.num_faces() * 32);
    let d = |x| fmt_num(x, digits);
    match param {
        ParamCoords::Planar(uv) => {
            for p in &mesh.vertices {
                let _ = writeln!(s, "v {} {} {}", d(p[0]), d(p[1]), d(p[2]));
            }
            for z in uv {
                let _ = writeln!(s, "vt {} {}", d(z.re), d(z.im));
            }
            for f in &mesh.faces {
                let _ = writeln!(s, "f {0}/{0} {1}/{1} {2}/{2}", f[0] + 1, f[1] + 1, f[2] + 1);
            }
        }
        ParamCoords::Spherical(pts) => {
            for p in pts {
                let _ = writeln!(s, "v {} {} {}", d(p[0]), d(p[1]), d(p[2]));
            }
            for f in &mesh.faces {
                let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
            }
        }
    }
    Ok(s)
}

pub fn write_obj_with_param(path: impl AsRef<Path>, mesh: &TriMesh, param: &ParamCoords) -> Result<(), MeshError> {
    let path = path.as_ref();
    let text = obj_with_param(mesh, param, 9)?;
    fs::write(path, text).map_err(|source| MeshError::Io { path: path.display().to_string(), source })
}

/// Reads the `vt` channel back; the inverse of the planar branch of
/// [`obj_with_param`].
pub fn parse_obj_texcoords(text: &str) -> Vec<Complex64> {
    text.lines()
        .filter_map(|l| {
            let mut it = l.split_whitespace();
            if it.next() != Some("vt") {
                return None;
            }
            let u: f64 = it.next()?.parse().ok()?;
            let v: f64 = it.next()?.parse().ok()?;
            Some(Complex64::new(u, v))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> TriMesh {
        TriMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    fn tetra() -> TriMesh {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        TriMesh::new(v, vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]]).unwrap()
    }

    #[test]
    fn minimal_obj() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!((m.num_vertices(), m.num_faces()), (3, 1));
    }

    #[test]
    fn quad_is_fanned() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn out_of_range_index() {
        let e = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 99\n").unwrap_err();
        assert!(matches!(e, MeshError::IndexOutOfRange { index: 99, .. }));
    }

    #[test]
    fn slash_and_negative_indices() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1 -2/1 -1/1\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn non_manifold_edge_rejected() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 1.0, 0.0], [0.5, -1.0, 0.0], [0.5, 0.0, 1.0]];
        let e = TriMesh::new(v, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap_err();
        assert!(matches!(e, MeshError::InconsistentOrientation(..) | MeshError::NonManifoldEdge(..)));
    }

    #[test]
    fn degenerate_face_rejected() {
        let e = TriMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(e, MeshError::DegenerateFace { face: 0, .. }));
    }

    #[test]
    fn topology_examples() {
        let tri = TriMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        let r = validate_topology(&tri);
        assert_eq!((r.euler_characteristic, r.boundary_loop_count, r.classification), (1, 1, Classification::DiskType));
        let r = validate_topology(&tetra());
        assert_eq!((r.euler_characteristic, r.boundary_loop_count, r.classification), (2, 0, Classification::SphereType));
    }

    #[test]
    fn torus_is_unsupported() {
        let n = 3;
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (i as f64 * 2.0 * std::f64::consts::PI / n as f64, j as f64 * 2.0 * std::f64::consts::PI / n as f64);
                v.push([(2.0 + b.cos()) * a.cos(), (2.0 + b.cos()) * a.sin(), b.sin()]);
            }
        }
        let id = |i: usize, j: usize| (i % n) * n + (j % n);
        let mut f = Vec::new();
        for i in 0..n {
            for j in 0..n {
                f.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                f.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let m = TriMesh::new(v, f).unwrap();
        let r = validate_topology(&m);
        assert_eq!(r.euler_characteristic, 0);
        assert_eq!(r.classification, Classification::Unsupported);
    }

    #[test]
    fn bowtie_is_unsupported() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]];
        let m = TriMesh::new(v, vec![[0, 1, 2], [0, 3, 4]]).unwrap();
        assert_eq!(validate_topology(&m).classification, Classification::Unsupported);
    }

    #[test]
    fn loops() {
        let tri = TriMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert_eq!(boundary_loops(&tri), vec![BoundaryLoop(vec![0, 1, 2])]);
        assert_eq!(boundary_loops(&square()), vec![BoundaryLoop(vec![0, 1, 2, 3])]);
        assert!(boundary_loops(&tetra()).is_empty());
    }

    #[test]
    fn planar_round_trip() {
        let m = square();
        let uv: Vec<_> = m.vertices().iter().map(|p| Complex64::new(p[0], p[1])).collect();
        let text = obj_with_param(&m, &ParamCoords::Planar(uv.clone()), 9).unwrap();
        let back = parse_obj(&text).unwrap();
        assert_eq!((back.num_vertices(), back.num_faces()), (4, 2));
        assert_eq!(parse_obj_texcoords(&text), uv);
    }

    #[test]
    fn spherical_output_is_unit() {
        let m = tetra();
        let pts: Vec<Vec3> = m
            .vertices()
            .iter()
            .map(|p| {
                let q = sub(*p, [0.25, 0.25, 0.25]);
                let l = norm(q);
                [q[0] / l, q[1] / l, q[2] / l]
            })
            .collect();
        let text = obj_with_param(&m, &ParamCoords::Spherical(pts), 9).unwrap();
        let back = parse_obj(&text).unwrap();
        for p in back.vertices() {
            assert!((norm(*p) - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn closed_tetra_volume_positive() {
        assert!(tetra().signed_volume() > 0.0);
        assert!(tetra().flipped().signed_volume() < 0.0);
    }
}
