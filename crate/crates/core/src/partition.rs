//! Splitting a mesh into disk-type submeshes along cut edges, the shared
//! arcs between them, and the order in which they are welded back.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::mesh::{validate_topology, Classification, TopologyReport, TriMesh};

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cut ({0}, {1}) is not an edge of the mesh")]
    NotAnEdge(usize, usize),
    #[error("cut ({0}, {1}) is listed twice")]
    DuplicateCut(usize, usize),
    #[error("submesh {id} is not disk-type (χ = {}, {} boundary loops)", .report.euler_characteristic, .report.boundary_loop_count)]
    NotDisk { id: usize, report: TopologyReport },
    #[error("cut ({0}, {1}) does not separate two submeshes")]
    DanglingCut(usize, usize),
    #[error("components {a:?} and {b:?} share {runs} disjoint boundary arcs; no contiguous weld exists")]
    NonContiguous { a: Vec<usize>, b: Vec<usize>, runs: usize },
    #[error("no weld schedule: {0}")]
    NoSchedule(String),
}

/// Undirected cut edges, stored as sorted pairs of parent vertex indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CutEdgeSet {
    edges: Vec<(usize, usize)>,
}

impl CutEdgeSet {
    pub fn new(mesh: &TriMesh, pairs: &[(usize, usize)]) -> Result<Self, PartitionError> {
        let mut seen = HashSet::new();
        let mut edges = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            let e = (a.min(b), a.max(b));
            if a == b || !mesh.has_edge(a, b) {
                return Err(PartitionError::NotAnEdge(a, b));
            }
            if !seen.insert(e) {
                return Err(PartitionError::DuplicateCut(a, b));
            }
            edges.push(e);
        }
        Ok(Self { edges })
    }

    /// Text format: one `i j` pair per line, 1-based. `#` starts a comment.
    pub fn parse(mesh: &TriMesh, text: &str) -> Result<Self, PartitionError> {
        let mut pairs = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let nums: Vec<&str> = content.split_whitespace().collect();
            if nums.len() != 2 {
                return Err(PartitionError::Parse { line, msg: format!("expected two indices, got '{content}'") });
            }
            let mut ij = [0usize; 2];
            for (k, t) in nums.iter().enumerate() {
                let v: usize = t.parse().map_err(|_| PartitionError::Parse { line, msg: format!("bad index '{t}'") })?;
                if v == 0 || v > mesh.num_vertices() {
                    return Err(PartitionError::Parse { line, msg: format!("index {v} out of range 1..={}", mesh.num_vertices()) });
                }
                ij[k] = v - 1;
            }
            pairs.push((ij[0], ij[1]));
        }
        Self::new(mesh, &pairs)
    }

    pub fn to_text(&self) -> String {
        self.edges.iter().map(|&(a, b)| format!("{} {}\n", a + 1, b + 1)).collect()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
    pub fn len(&self) -> usize {
        self.edges.len()
    }
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub submeshes: Vec<TriMesh>,
    /// local vertex → parent vertex, per submesh
    pub vertex_maps: Vec<Vec<usize>>,
    /// local face → parent face, per submesh
    pub face_maps: Vec<Vec<usize>>,
    /// parent face → owning submesh
    pub face_assignment: Vec<usize>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.submeshes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.submeshes.is_empty()
    }

    /// parent vertex → local index, per submesh
    pub fn local_index_maps(&self) -> Vec<HashMap<usize, usize>> {
        self.vertex_maps.iter().map(|m| m.iter().enumerate().map(|(l, &p)| (p, l)).collect()).collect()
    }

    pub fn summary_json(&self, arcs: &[SharedArc]) -> serde_json::Value {
        serde_json::json!({
            "submeshes": self.submeshes.iter().map(|m| serde_json::json!({
                "vertices": m.num_vertices(), "faces": m.num_faces()
            })).collect::<Vec<_>>(),
            "arcs": arcs.iter().map(|a| serde_json::json!({
                "pair": [a.pair.0, a.pair.1], "vertices": a.parent.len(), "closed": a.closed
            })).collect::<Vec<_>>(),
        })
    }
}

/// Common boundary segment of two submeshes. `parent` follows submesh
/// `pair.0`'s boundary orientation; `local_i` / `local_j` list the same
/// vertices as local indices in each submesh. A closed arc is a whole
/// boundary loop, listed once without repeating the first vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedArc {
    pub pair: (usize, usize),
    pub parent: Vec<usize>,
    pub local_i: Vec<usize>,
    pub local_j: Vec<usize>,
    pub closed: bool,
}

impl SharedArc {
    pub fn edge_count(&self) -> usize {
        if self.closed {
            self.parent.len()
        } else {
            self.parent.len() - 1
        }
    }
}

pub fn partition_mesh(mesh: &TriMesh, cuts: &CutEdgeSet) -> Result<Partition, PartitionError> {
    let nf = mesh.num_faces();
    let cut: HashSet<(usize, usize)> = cuts.edges().iter().copied().collect();
    let mut assign = vec![usize::MAX; nf];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for seed in 0..nf {
        if assign[seed] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut faces = vec![seed];
        assign[seed] = id;
        let mut head = 0;
        while head < faces.len() {
            let f = mesh.faces()[faces[head]];
            head += 1;
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                if cut.contains(&(a.min(b), a.max(b))) {
                    continue;
                }
                if let Some(g) = mesh.face_of_half_edge(b, a) {
                    if assign[g] == usize::MAX {
                        assign[g] = id;
                        faces.push(g);
                    }
                }
            }
        }
        faces.sort_unstable();
        comps.push(faces);
    }
    let mut submeshes = Vec::with_capacity(comps.len());
    let mut vertex_maps = Vec::with_capacity(comps.len());
    for (id, faces) in comps.iter().enumerate() {
        let (sub, map) = mesh.submesh(faces);
        let report = validate_topology(&sub);
        if report.classification != Classification::DiskType {
            return Err(PartitionError::NotDisk { id, report });
        }
        submeshes.push(sub);
        vertex_maps.push(map);
    }
    Ok(Partition { submeshes, vertex_maps, face_maps: comps, face_assignment: assign })
}

/// Boundary loop of the union of the given submeshes, as parent vertex
/// indices with the union on the left, starting at the smallest index.
/// Fails unless the union has exactly one loop.
pub fn component_boundary(mesh: &TriMesh, face_assignment: &[usize], members: &[usize]) -> Result<Vec<usize>, PartitionError> {
    let inside = |f: Option<usize>| f.is_some_and(|f| members.contains(&face_assignment[f]));
    let mut next: BTreeMap<usize, usize> = BTreeMap::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        if !members.contains(&face_assignment[fi]) {
            continue;
        }
        for e in 0..3 {
            let (a, b) = (f[e], f[(e + 1) % 3]);
            if !inside(mesh.face_of_half_edge(b, a)) && next.insert(a, b).is_some() {
                return Err(PartitionError::NoSchedule(format!("component {members:?} has a pinched boundary at vertex {a}")));
            }
        }
    }
    let Some((&start, _)) = next.iter().next() else {
        return Ok(Vec::new());
    };
    let mut lp = vec![start];
    let mut v = next[&start];
    while v != start {
        lp.push(v);
        v = *next.get(&v).ok_or_else(|| PartitionError::NoSchedule(format!("open boundary at vertex {v}")))?;
        if lp.len() > next.len() {
            break;
        }
    }
    if lp.len() != next.len() {
        return Err(PartitionError::NoSchedule(format!("component {members:?} has {} boundary edges outside its first loop", next.len() - lp.len())));
    }
    Ok(lp)
}

/// Where the boundary of component A meets component B.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedRun {
    /// index into A's loop of the first arc vertex
    pub start: usize,
    /// number of shared edges
    pub edges: usize,
    /// the shared edges cover A's entire loop
    pub closed: bool,
}

/// Contiguous runs of edges of `loop_a` whose other side lies in `members_b`.
pub fn shared_runs(mesh: &TriMesh, face_assignment: &[usize], loop_a: &[usize], members_b: &[usize]) -> Vec<SharedRun> {
    let n = loop_a.len();
    let shared: Vec<bool> = (0..n)
        .map(|t| {
            let (a, b) = (loop_a[t], loop_a[(t + 1) % n]);
            mesh.face_of_half_edge(b, a).is_some_and(|f| members_b.contains(&face_assignment[f]))
        })
        .collect();
    if n > 0 && shared.iter().all(|&s| s) {
        return vec![SharedRun { start: 0, edges: n, closed: true }];
    }
    let mut runs = Vec::new();
    for t in 0..n {
        if shared[t] && !shared[(t + n - 1) % n] {
            let mut len = 0;
            while shared[(t + len) % n] {
                len += 1;
            }
            runs.push(SharedRun { start: t, edges: len, closed: false });
        }
    }
    runs
}

pub fn shared_arcs(mesh: &TriMesh, partition: &Partition, cuts: &CutEdgeSet) -> Result<Vec<SharedArc>, PartitionError> {
    let assign = &partition.face_assignment;
    for &(a, b) in cuts.edges() {
        let f1 = mesh.face_of_half_edge(a, b);
        let f2 = mesh.face_of_half_edge(b, a);
        match (f1, f2) {
            (Some(x), Some(y)) if assign[x] != assign[y] => {}
            _ => return Err(PartitionError::DanglingCut(a, b)),
        }
    }
    let locals = partition.local_index_maps();
    let mut arcs = Vec::new();
    for i in 0..partition.len() {
        let lp = component_boundary(mesh, assign, &[i])?;
        let mut neighbours = BTreeSet::new();
        for t in 0..lp.len() {
            let (a, b) = (lp[t], lp[(t + 1) % lp.len()]);
            if let Some(f) = mesh.face_of_half_edge(b, a) {
                neighbours.insert(assign[f]);
            }
        }
        for j in neighbours.into_iter().filter(|&j| j > i) {
            for run in shared_runs(mesh, assign, &lp, &[j]) {
                let count = if run.closed { run.edges } else { run.edges + 1 };
                let parent: Vec<usize> = (0..count).map(|s| lp[(run.start + s) % lp.len()]).collect();
                arcs.push(SharedArc {
                    pair: (i, j),
                    local_i: parent.iter().map(|p| locals[i][p]).collect(),
                    local_j: parent.iter().map(|p| locals[j][p]).collect(),
                    parent,
                    closed: run.closed,
                });
            }
        }
    }
    Ok(arcs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Free,
    Disk,
    Sphere,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "free" => Ok(Mode::Free),
            "disk" => Ok(Mode::Disk),
            "sphere" => Ok(Mode::Sphere),
            _ => Err(format!("unknown mode '{s}' (expected free, disk or sphere)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Free => "free",
            Mode::Disk => "disk",
            Mode::Sphere => "sphere",
        })
    }
}

/// One merge: component `b` is welded onto component `a`. Components are
/// listed by their member submeshes; the merged component keeps `a`'s
/// ordering followed by `b`'s.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct WeldStep {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub shared_edges: usize,
    pub closed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct WeldSchedule {
    pub steps: Vec<WeldStep>,
}

/// Greedy schedule: repeatedly weld the adjacent pair with the longest
/// contiguous common boundary, ties going to the smallest submesh ids.
pub fn plan_weld_schedule(mesh: &TriMesh, partition: &Partition, arcs: &[SharedArc], mode: Mode) -> Result<WeldSchedule, PartitionError> {
    let k = partition.len();
    if k > 1 && arcs.is_empty() {
        return Err(PartitionError::NoSchedule(format!("{k} submeshes but no shared arcs")));
    }
    let assign = &partition.face_assignment;
    let mut comps: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
    let mut steps = Vec::new();
    while comps.len() > 1 {
        let loops: Vec<Vec<usize>> = comps.iter().map(|c| component_boundary(mesh, assign, c)).collect::<Result<_, _>>()?;
        // (shared edges, tie key, a, b, closed)
        let mut best: Option<(usize, (usize, usize), usize, usize, bool)> = None;
        let mut blocked = None;
        for x in 0..comps.len() {
            for y in x + 1..comps.len() {
                let runs = shared_runs(mesh, assign, &loops[x], &comps[y]);
                if runs.is_empty() {
                    continue;
                }
                if runs.len() > 1 {
                    blocked.get_or_insert((x, y, runs.len()));
                    continue;
                }
                let run = &runs[0];
                if run.closed && comps.len() > 2 {
                    continue;
                }
                let key = (comps[x][0].min(comps[y][0]), comps[x][0].max(comps[y][0]));
                let better = match &best {
                    None => true,
                    Some((e, bk, ..)) => run.edges > *e || (run.edges == *e && key < *bk),
                };
                if better {
                    best = Some((run.edges, key, x, y, run.closed));
                }
            }
        }
        let Some((edges, _, x, y, closed)) = best else {
            if let Some((x, y, runs)) = blocked {
                return Err(PartitionError::NonContiguous { a: comps[x].clone(), b: comps[y].clone(), runs });
            }
            return Err(PartitionError::NoSchedule("remaining components are not adjacent".into()));
        };
        // the lower-id component plays A
        let (x, y) = if comps[x][0] <= comps[y][0] { (x, y) } else { (y, x) };
        if closed && mode != Mode::Sphere {
            return Err(PartitionError::NoSchedule("a closed weld is only possible in sphere mode".into()));
        }
        steps.push(WeldStep { a: comps[x].clone(), b: comps[y].clone(), shared_edges: edges, closed });
        let mut merged = comps[x].clone();
        merged.extend(comps[y].iter().copied());
        let (lo, hi) = (x.min(y), x.max(y));
        comps.remove(hi);
        comps[lo] = merged;
    }
    if mode == Mode::Sphere && !steps.last().is_some_and(|s| s.closed) {
        return Err(PartitionError::NoSchedule("sphere mode needs at least two submeshes ending in a closed weld".into()));
    }
    Ok(WeldSchedule { steps })
}
