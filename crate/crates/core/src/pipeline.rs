//! End-to-end run: partition, parallel flattening, welding, boundary
//! constraint, parallel harmonic reassembly, stitching and metrics.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::assemble::{self, harmonic_solve, mesh_beltrami, planar_flips, qc_correct, stitch_global, check_bijectivity, GlobalParam, RepairReport};
use crate::dncp::{cotangent_laplacian, dncp_flatten, shoelace, Flattening};
use crate::extended::{ExtendedComplex, Finite, Infinity, Mobius};
use crate::fixtures;
use crate::mesh::{self, validate_topology, Classification, TriMesh};
use crate::metrics::{disk_automorphism, mobius_area_optimize, DistortionReport};
use crate::partition::{self, component_boundary, plan_weld_schedule, shared_arcs, shared_runs, CutEdgeSet, Mode, Partition, WeldSchedule};
use crate::welding::{self, apply_log, closed_weld, geodesic_to_circle, partial_weld};

/// Failure category, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Io => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Load,
    Partition,
    Flatten,
    Weld,
    Boundary,
    Reassemble,
    Stitch,
    Metrics,
    Output,
    Benchmark,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

/// Error with the stage it came from, what it concerned and what to try.
#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: ErrorKind,
    pub context: String,
    pub message: String,
    pub hint: String,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.message)?;
        if !self.context.is_empty() {
            write!(f, " ({})", self.context)?;
        }
        if !self.hint.is_empty() {
            write!(f, "\n  hint: {}", self.hint)?;
        }
        Ok(())
    }
}

impl std::error::Error for PipelineError {}

impl PipelineError {
    pub fn new(stage: Stage, kind: ErrorKind, message: impl fmt::Display) -> Self {
        Self { stage, kind, context: String::new(), message: message.to_string(), hint: String::new() }
    }
    pub fn context(mut self, c: impl Into<String>) -> Self {
        self.context = c.into();
        self
    }
    pub fn hint(mut self, h: impl Into<String>) -> Self {
        self.hint = h.into();
        self
    }
    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// accepted weld seam residual, relative to the largest modulus
    pub seam: f64,
    pub solver_residual: f64,
    pub beltrami: f64,
    pub qc_iterations: usize,
    /// pieces each boundary edge is split into before welding
    pub edge_subdivision: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { seam: assemble::SEAM_SNAP, solver_residual: crate::sparse::RESIDUAL_TOL, beltrami: assemble::BELTRAMI_THRESHOLD, qc_iterations: 5, edge_subdivision: 2 }
    }
}

/// Options that affect the computation itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Options {
    pub mode: Mode,
    pub workers: usize,
    pub mobius_area: bool,
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Default for Options {
    fn default() -> Self {
        Self { mode: Mode::Free, workers: 1, mobius_area: false, seed: 0, tolerances: Tolerances::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub cuts: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// write per-corner and per-face arrays into the report
    pub raw_metrics: bool,
    pub options: Options,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>) -> Self {
        Self { input: input.into(), cuts: None, out: None, report: None, raw_metrics: false, options: Options::default() }
    }

    /// Applies `key = value` lines (`#` starts a comment). Paths are taken
    /// relative to the current directory.
    pub fn apply_config_text(&mut self, text: &str) -> Result<(), PipelineError> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(cfg_err(format!("line {}: expected key = value", no + 1)));
            };
            self.set(k.trim(), v.trim().trim_matches('"')).map_err(|e| cfg_err(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("bad value '{v}' for {k}"))
        }
        let t = &mut self.options.tolerances;
        match key {
            "input" => self.input = v.into(),
            "cuts" => self.cuts = Some(v.into()),
            "out" => self.out = Some(v.into()),
            "report" => self.report = Some(v.into()),
            "mode" => self.options.mode = v.parse()?,
            "workers" => self.options.workers = num(key, v)?,
            "mobius_area" => self.options.mobius_area = num(key, v)?,
            "seed" => self.options.seed = num(key, v)?,
            "seam_tolerance" => t.seam = num(key, v)?,
            "solver_residual" => t.solver_residual = num(key, v)?,
            "beltrami_threshold" => t.beltrami = num(key, v)?,
            "qc_iterations" => t.qc_iterations = num(key, v)?,
            "edge_subdivision" => t.edge_subdivision = num(key, v)?,
            "raw_metrics" => self.raw_metrics = num(key, v)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.options.workers == 0 {
            return Err(cfg_err("worker count must be at least 1"));
        }
        let t = &self.options.tolerances;
        if t.edge_subdivision == 0 {
            return Err(cfg_err("edge subdivision must be at least 1"));
        }
        if !(t.seam > 0.0 && t.solver_residual > 0.0 && t.beltrami > 0.0 && t.beltrami <= 1.0) {
            return Err(cfg_err("tolerances must be positive and the Beltrami threshold at most 1"));
        }
        Ok(())
    }
}

fn cfg_err(msg: impl fmt::Display) -> PipelineError {
    PipelineError::new(Stage::Config, ErrorKind::Validation, msg)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StageTimings {
    pub partition: f64,
    pub flatten: f64,
    pub weld: f64,
    pub boundary: f64,
    pub reassemble: f64,
    pub stitch: f64,
    pub metrics: f64,
    pub mobius: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlattenRecord {
    pub submesh: usize,
    pub vertices: usize,
    pub faces: usize,
    pub dirichlet: f64,
    pub area: f64,
    pub conformal_energy: f64,
    pub clamped_cotangents: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeldRecord {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub shared_vertices: usize,
    pub closed: bool,
    /// relative to the largest modulus of the welded configuration
    pub residual: f64,
    /// in output coordinates
    pub residual_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RepairRecord {
    pub submesh: usize,
    pub flagged: usize,
    pub flips: usize,
    pub report: RepairReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct MobiusRecord {
    pub before: f64,
    pub after: f64,
    pub evaluations: usize,
    pub map: [[f64; 2]; 4],
}

pub struct RunOutput {
    pub param: GlobalParam,
    pub metrics: DistortionReport,
    pub partition: Partition,
    pub schedule: WeldSchedule,
    pub flatten: Vec<FlattenRecord>,
    pub welds: Vec<WeldRecord>,
    pub repairs: Vec<RepairRecord>,
    pub mobius: Option<MobiusRecord>,
    pub timings: StageTimings,
    pub options: Options,
}

impl RunOutput {
    pub fn max_seam_residual(&self) -> f64 {
        self.welds.iter().map(|w| w.residual).fold(0.0, f64::max)
    }
    pub fn max_seam_residual_abs(&self) -> f64 {
        self.welds.iter().map(|w| w.residual_abs).fold(0.0, f64::max)
    }
    pub fn flips(&self) -> usize {
        self.param.flip_count()
    }
    /// Zero flips and every seam within tolerance.
    pub fn accepted(&self) -> bool {
        self.flips() == 0 && self.max_seam_residual() <= self.options.tolerances.seam
    }

    pub fn report_json(&self, mesh: &TriMesh, include_raw: bool) -> serde_json::Value {
        let arcs_summary = json!({
            "submeshes": self.partition.submeshes.iter().map(|m| json!({"vertices": m.num_vertices(), "faces": m.num_faces()})).collect::<Vec<_>>(),
        });
        json!({
            "schema": "pgcp-report/1",
            "mode": self.options.mode,
            "workers": self.options.workers,
            "seed": self.options.seed,
            "tolerances": self.options.tolerances,
            "mesh": {"vertices": mesh.num_vertices(), "faces": mesh.num_faces()},
            "partition": arcs_summary,
            "schedule": self.schedule.steps,
            "timings_s": self.timings,
            "flatten": self.flatten,
            "welds": self.welds,
            "max_seam_residual": self.max_seam_residual(),
            "max_seam_residual_abs": self.max_seam_residual_abs(),
            "repairs": self.repairs,
            "flipped_faces": self.flips(),
            "metrics": self.metrics.to_json(include_raw),
            "mobius_area": self.mobius,
            "accepted": self.accepted(),
        })
    }
}

/// Points tracked for one group of already welded submeshes: a single
/// coordinate per parent boundary/seam vertex, plus the anchor used to
/// place the group before it is welded and the optional disk centre.
#[derive(Debug, Clone)]
struct Component {
    members: Vec<usize>,
    coords: BTreeMap<usize, ExtendedComplex>,
    anchor: ExtendedComplex,
    center: Option<ExtendedComplex>,
}

impl Component {
    fn map(&mut self, m: &Mobius) {
        for z in self.coords.values_mut() {
            *z = m.apply(*z);
        }
        self.anchor = m.apply(self.anchor);
        if let Some(c) = self.center.as_mut() {
            *c = m.apply(*c);
        }
    }

    /// Replays a log on every tracked point that is not on `boundary`.
    fn replay_interior(&mut self, log: &welding::ConformalMapLog, boundary: &[usize]) -> Result<(), welding::WeldError> {
        let on: std::collections::HashSet<usize> = boundary.iter().copied().collect();
        let keys: Vec<usize> = self.coords.keys().copied().filter(|k| !on.contains(k)).collect();
        let mut pts: Vec<ExtendedComplex> = keys.iter().map(|k| self.coords[k]).collect();
        pts.push(self.anchor);
        if let Some(c) = self.center {
            pts.push(c);
        }
        let out = apply_log(log, &pts, None)?;
        for (k, z) in keys.iter().zip(&out) {
            self.coords.insert(*k, *z);
        }
        self.anchor = out[keys.len()];
        if self.center.is_some() {
            self.center = Some(out[keys.len() + 1]);
        }
        Ok(())
    }
}

/// Face farthest (in face-adjacency steps) from the boundary; ties go to
/// the smallest id. Closed meshes yield face 0.
pub fn deepest_face(mesh: &TriMesh) -> usize {
    let nf = mesh.num_faces();
    let mut depth = vec![usize::MAX; nf];
    let mut q = VecDeque::new();
    for (f, t) in mesh.faces().iter().enumerate() {
        if (0..3).any(|e| mesh.face_of_half_edge(t[(e + 1) % 3], t[e]).is_none()) {
            depth[f] = 0;
            q.push_back(f);
        }
    }
    while let Some(f) = q.pop_front() {
        let t = mesh.faces()[f];
        for e in 0..3 {
            if let Some(g) = mesh.face_of_half_edge(t[(e + 1) % 3], t[e]) {
                if depth[g] == usize::MAX {
                    depth[g] = depth[f] + 1;
                    q.push_back(g);
                }
            }
        }
    }
    let mut best = 0;
    for f in 0..nf {
        if depth[f] != usize::MAX && depth[f] > depth[best] {
            best = f;
        }
    }
    best
}

fn face_center(coords: &[Complex64], t: [usize; 3]) -> Complex64 {
    (coords[t[0]] + coords[t[1]] + coords[t[2]]) / 3.0
}

fn num_err(stage: Stage, e: impl fmt::Display) -> PipelineError {
    PipelineError::new(stage, ErrorKind::Numerical, e)
}

fn weld_hint() -> &'static str {
    "the shared boundary may be too crowded for double precision; try cut paths that give rounder submeshes"
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| PipelineError::new(Stage::Config, ErrorKind::Validation, e))
}

/// Runs the whole method on an in-memory mesh.
pub fn run_on_mesh(mesh: &TriMesh, cuts: &CutEdgeSet, options: &Options) -> Result<RunOutput, PipelineError> {
    let pool = build_pool(options.workers)?;
    pool.install(|| run_inner(mesh, cuts, options))
}

fn run_inner(mesh: &TriMesh, cuts: &CutEdgeSet, options: &Options) -> Result<RunOutput, PipelineError> {
    let t_start = Instant::now();
    let mut timings = StageTimings::default();
    let mode = options.mode;
    let tol = options.tolerances;
    crate::sparse::set_residual_tolerance(tol.solver_residual);

    // topology must match the mode
    let topo = validate_topology(mesh);
    match (mode, topo.classification) {
        (Mode::Sphere, Classification::SphereType) | (Mode::Free | Mode::Disk, Classification::DiskType) => {}
        (m, c) => {
            return Err(PipelineError::new(Stage::Partition, ErrorKind::Validation, format!("mode {m} does not apply to a {c:?} mesh (χ = {}, {} boundary loops)", topo.euler_characteristic, topo.boundary_loop_count))
                .hint("free and disk modes need a disk-type mesh, sphere mode a closed genus-0 mesh"))
        }
    }

    // 1. partition
    let t = Instant::now();
    let part = partition::partition_mesh(mesh, cuts).map_err(|e| PipelineError::new(Stage::Partition, ErrorKind::Validation, &e).hint("every cut region must be a topological disk; check the cut file for gaps"))?;
    let arcs = shared_arcs(mesh, &part, cuts).map_err(|e| PipelineError::new(Stage::Partition, ErrorKind::Validation, &e).hint("remove cut edges that do not separate two regions"))?;
    let schedule = if part.len() > 1 || mode == Mode::Sphere {
        plan_weld_schedule(mesh, &part, &arcs, mode).map_err(|e| PipelineError::new(Stage::Partition, ErrorKind::Validation, &e).hint("each welded pair of regions must share one contiguous arc"))?
    } else {
        WeldSchedule::default()
    };
    timings.partition = t.elapsed().as_secs_f64();

    // 2. independent flattenings
    let t = Instant::now();
    let flats: Vec<Result<Flattening, _>> = part.submeshes.par_iter().map(|m| dncp_flatten(m, None)).collect();
    let mut flattenings = Vec::with_capacity(flats.len());
    for (i, f) in flats.into_iter().enumerate() {
        flattenings.push(f.map_err(|e| num_err(Stage::Flatten, e).context(format!("submesh {i}")).hint("degenerate or needle triangles make the cotangent system ill-posed"))?);
    }
    let flatten: Vec<FlattenRecord> = flattenings
        .iter()
        .enumerate()
        .map(|(i, f)| FlattenRecord {
            submesh: i,
            vertices: part.submeshes[i].num_vertices(),
            faces: part.submeshes[i].num_faces(),
            dirichlet: f.dirichlet,
            area: f.area,
            conformal_energy: f.conformal_energy(),
            clamped_cotangents: f.clamped_cotangents,
        })
        .collect();
    timings.flatten = t.elapsed().as_secs_f64();

    // K = 1 free: the flattening is the answer
    if part.len() == 1 && mode == Mode::Free {
        let local = vec![flattenings[0].embedding.coords.iter().map(|&z| Finite(z)).collect::<Vec<_>>()];
        let t = Instant::now();
        let param = stitch_global(mesh, &part, &local, mode).map_err(|e| num_err(Stage::Stitch, e))?;
        timings.stitch = t.elapsed().as_secs_f64();
        return finish_run(mesh, part, schedule, flatten, Vec::new(), Vec::new(), param, options, timings, t_start);
    }

    // only boundary coordinates survive; anchors mark each submesh's inside
    let mut components: Vec<Component> = Vec::with_capacity(part.len());
    let global_center_face = if mode == Mode::Disk { Some(deepest_face(mesh)) } else { None };
    for (i, (sm, fl)) in part.submeshes.iter().zip(&flattenings).enumerate() {
        let c = &fl.embedding.coords;
        let mut coords = BTreeMap::new();
        for lp in mesh::boundary_loops(sm) {
            for &l in &lp.0 {
                coords.insert(part.vertex_maps[i][l], Finite(c[l]));
            }
        }
        let anchor = Finite(face_center(c, sm.faces()[deepest_face(sm)]));
        let center = global_center_face.and_then(|gf| {
            let local = part.face_maps[i].iter().position(|&f| f == gf)?;
            Some(Finite(face_center(c, sm.faces()[local])))
        });
        components.push(Component { members: vec![i], coords, anchor, center });
    }

    // 3. welding, in schedule order
    let t = Instant::now();
    let mut welds = Vec::new();
    for (si, step) in schedule.steps.iter().enumerate() {
        let ia = components.iter().position(|c| c.members == step.a).expect("schedule refers to live components");
        let ca = components.remove(ia);
        let ib = components.iter().position(|c| c.members == step.b).expect("schedule refers to live components");
        let cb = components.remove(ib);
        let (merged, rec) = weld_components(mesh, &part.face_assignment, ca, cb, step.closed, tol.edge_subdivision).map_err(|e| e.context(format!("weld step {si}: {:?} + {:?}", step.a, step.b)))?;
        welds.push(rec);
        components.push(merged);
    }
    timings.weld = t.elapsed().as_secs_f64();
    let mut comp = components.pop().expect("one component left");
    debug_assert!(components.is_empty());

    // 4. boundary constraint
    let t = Instant::now();
    if mode == Mode::Disk {
        disk_constraint(mesh, &part.face_assignment, &mut comp, tol.edge_subdivision)?;
    }
    timings.boundary = t.elapsed().as_secs_f64();

    // 5. harmonic reassembly per submesh, in parallel
    let t = Instant::now();
    let jobs: Vec<Result<(Vec<ExtendedComplex>, Option<RepairRecord>), PipelineError>> =
        (0..part.len()).into_par_iter().map(|s| reassemble_submesh(&part, s, &comp.coords, mode, &tol)).collect();
    let mut local = Vec::with_capacity(part.len());
    let mut repairs = Vec::new();
    for r in jobs {
        let (l, rep) = r?;
        local.push(l);
        repairs.extend(rep);
    }
    timings.reassemble = t.elapsed().as_secs_f64();

    // 6. stitch
    let t = Instant::now();
    let param = stitch_global(mesh, &part, &local, mode).map_err(|e| num_err(Stage::Stitch, e).hint("seam copies disagree; this indicates a welding defect"))?;
    timings.stitch = t.elapsed().as_secs_f64();
    finish_run(mesh, part, schedule, flatten, welds, repairs, param, options, timings, t_start)
}

#[allow(clippy::too_many_arguments)]
fn finish_run(
    mesh: &TriMesh,
    partition: Partition,
    schedule: WeldSchedule,
    flatten: Vec<FlattenRecord>,
    welds: Vec<WeldRecord>,
    repairs: Vec<RepairRecord>,
    mut param: GlobalParam,
    options: &Options,
    mut timings: StageTimings,
    t_start: Instant,
) -> Result<RunOutput, PipelineError> {
    let mut mobius = None;
    if options.mobius_area {
        let t = Instant::now();
        let o = mobius_area_optimize(mesh, &param, options.mode, options.seed);
        let m = o.map;
        mobius = Some(MobiusRecord { before: o.before, after: o.after, evaluations: o.evaluations, map: [m.a, m.b, m.c, m.d].map(|z| [z.re, z.im]) });
        param = o.param;
        timings.mobius = t.elapsed().as_secs_f64();
    }
    let t = Instant::now();
    let metrics = DistortionReport::compute(mesh, &param.coords).map_err(|e| num_err(Stage::Metrics, e))?;
    timings.metrics = t.elapsed().as_secs_f64();
    timings.total = t_start.elapsed().as_secs_f64();
    Ok(RunOutput { param, metrics, partition, schedule, flatten, welds, repairs, mobius, timings, options: *options })
}

/// Closed polygon with every edge split into `m` equal pieces. The zipper
/// treats each step as a geodesic of the current picture; on jagged
/// staircase boundaries the corners alone are too coarse for that.
pub fn subdivide(p: &[Complex64], m: usize) -> Vec<Complex64> {
    let n = p.len();
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        let (a, b) = (p[i], p[(i + 1) % n]);
        out.push(a);
        for s in 1..m {
            out.push(a + (b - a) * (s as f64 / m as f64));
        }
    }
    out
}

/// Boundary loop of a component, rotated to start at `start`.
fn rotate_to(lp: &[usize], start: usize) -> Vec<usize> {
    (0..lp.len()).map(|t| lp[(start + t) % lp.len()]).collect()
}

fn weld_components(mesh: &TriMesh, assign: &[usize], mut ca: Component, mut cb: Component, closed: bool, sub: usize) -> Result<(Component, WeldRecord), PipelineError> {
    let perr = |e: partition::PartitionError| PipelineError::new(Stage::Weld, ErrorKind::Validation, e);
    let loop_a = component_boundary(mesh, assign, &ca.members).map_err(perr)?;
    let loop_b = component_boundary(mesh, assign, &cb.members).map_err(perr)?;
    // A counter-clockwise from the first shared vertex, B the other way
    let (pa, k) = if closed {
        (loop_a.clone(), loop_a.len() - 1)
    } else {
        let runs = shared_runs(mesh, assign, &loop_a, &cb.members);
        if runs.len() != 1 {
            return Err(PipelineError::new(Stage::Weld, ErrorKind::Validation, format!("components share {} separate arcs", runs.len())).hint("cut paths must leave each welded pair one contiguous common arc"));
        }
        (rotate_to(&loop_a, runs[0].start), runs[0].edges)
    };
    let i0 = loop_b.iter().position(|&v| v == pa[0]).ok_or_else(|| PipelineError::new(Stage::Weld, ErrorKind::Validation, "shared arc start is not on the second component's boundary"))?;
    let nb = loop_b.len();
    let pb: Vec<usize> = if closed { pa.clone() } else { (0..nb).map(|t| loop_b[(i0 + nb - t) % nb]).collect() };
    if pa[..=k] != pb[..=k] {
        return Err(PipelineError::new(Stage::Weld, ErrorKind::Validation, "shared arc is traversed inconsistently by the two components"));
    }
    for c in [&mut ca, &mut cb] {
        let a = c.anchor.finite().ok_or_else(|| num_err(Stage::Weld, "component anchor left the finite plane"))?;
        c.map(&Mobius::translation(-a));
    }
    let take = |c: &Component, p: &[usize]| -> Result<Vec<Complex64>, PipelineError> {
        p.iter().map(|v| c.coords[v].finite().ok_or_else(|| num_err(Stage::Weld, format!("boundary vertex {v} sits at infinity")))).collect()
    };
    let (za, zb) = (take(&ca, &pa)?, take(&cb, &pb)?);
    let m = sub.max(1);
    let (za, zb) = (subdivide(&za, m), subdivide(&zb, m));
    let w = if closed { closed_weld(&za, &zb) } else { partial_weld(&za, &zb, k * m) }.map_err(|e| num_err(Stage::Weld, e).hint(weld_hint()))?;
    let pick = |z: &[ExtendedComplex]| -> Vec<ExtendedComplex> { z.iter().step_by(m).copied().collect() };
    let (wa, wb) = (pick(&w.a), pick(&w.b));
    ca.replay_interior(&w.log_a, &pa).map_err(|e| num_err(Stage::Weld, e))?;
    cb.replay_interior(&w.log_b, &pb).map_err(|e| num_err(Stage::Weld, e))?;
    let mut residual_abs = 0.0f64;
    for (t, &v) in pa.iter().enumerate() {
        ca.coords.insert(v, wa[t]);
    }
    for (t, &v) in pb.iter().enumerate() {
        cb.coords.insert(v, wb[t]);
    }
    let mut coords = ca.coords;
    for (v, z) in cb.coords {
        coords.entry(v).or_insert(z);
    }
    for j in 0..=k.min(pa.len() - 1) {
        if let (Finite(x), Finite(y)) = (wa[j], wb[j]) {
            residual_abs = residual_abs.max((x - y).norm());
            coords.insert(pa[j], Finite((x + y) * 0.5));
        }
    }
    let mut members = ca.members.clone();
    members.extend(&cb.members);
    let rec = WeldRecord { a: ca.members, b: cb.members.clone(), shared_vertices: if closed { pa.len() } else { k + 1 }, closed, residual: w.seam_residual, residual_abs };
    let merged = Component { members, coords, anchor: ca.anchor, center: ca.center.or(cb.center) };
    Ok((merged, rec))
}

/// Sends the global boundary onto the unit circle, the disk centre to 0
/// and the smallest-id boundary vertex onto the positive real axis.
fn disk_constraint(mesh: &TriMesh, assign: &[usize], comp: &mut Component, sub: usize) -> Result<(), PipelineError> {
    let lp = component_boundary(mesh, assign, &comp.members).map_err(|e| PipelineError::new(Stage::Boundary, ErrorKind::Validation, e))?;
    let pts: Vec<Complex64> = lp.iter().map(|v| comp.coords[v].finite().ok_or_else(|| num_err(Stage::Boundary, "boundary vertex at infinity"))).collect::<Result<_, _>>()?;
    let m = sub.max(1);
    let (out, log) = geodesic_to_circle(&subdivide(&pts, m)).map_err(|e| num_err(Stage::Boundary, e).hint(weld_hint()))?;
    let out: Vec<ExtendedComplex> = out.into_iter().step_by(m).collect();
    comp.replay_interior(&log, &lp).map_err(|e| num_err(Stage::Boundary, e))?;
    for (v, z) in lp.iter().zip(out) {
        comp.coords.insert(*v, z);
    }
    let c = comp.center.and_then(|c| c.finite()).unwrap_or(Complex64::new(0.0, 0.0));
    if !(c.norm() < 1.0) {
        return Err(num_err(Stage::Boundary, format!("disk centre image {c} is not inside the unit disk")));
    }
    comp.map(&disk_automorphism(c));
    let first = lp.iter().min().expect("nonempty loop");
    let z0 = comp.coords[first].finite().expect("finite on the circle");
    comp.map(&Mobius::scaling(z0.conj() / z0.norm()));
    Ok(())
}

/// Harmonic extension of one submesh's welded boundary, with fold repair.
fn reassemble_submesh(part: &Partition, s: usize, coords: &BTreeMap<usize, ExtendedComplex>, mode: Mode, tol: &Tolerances) -> Result<(Vec<ExtendedComplex>, Option<RepairRecord>), PipelineError> {
    let sm = &part.submeshes[s];
    let map = &part.vertex_maps[s];
    let n = sm.num_vertices();
    let loops = mesh::boundary_loops(sm);
    let lp = &loops[0].0;
    let bz: Vec<ExtendedComplex> = lp.iter().map(|&l| coords[&map[l]]).collect();
    // a submesh whose boundary winds clockwise contains ∞: use the 1/z chart
    let finite: Option<Vec<Complex64>> = bz.iter().map(|z| z.finite()).collect();
    let invert = mode == Mode::Sphere && finite.as_ref().is_none_or(|f| shoelace(f) < 0.0);
    let chart = |z: ExtendedComplex| -> Option<Complex64> {
        if invert {
            match z {
                Infinity => Some(Complex64::new(0.0, 0.0)),
                Finite(w) if w.norm() > 0.0 => Some(crate::extended::cdiv(Complex64::new(1.0, 0.0), w)),
                _ => None,
            }
        } else {
            z.finite()
        }
    };
    let mut fixed = vec![None; n];
    for (l, z) in lp.iter().zip(&bz) {
        fixed[*l] = Some(chart(*z).ok_or_else(|| num_err(Stage::Reassemble, "boundary vertex at the chart's pole").context(format!("submesh {s}")))?);
    }
    let lap = cotangent_laplacian(sm).map_err(|e| num_err(Stage::Reassemble, e).context(format!("submesh {s}")))?;
    let mut w = harmonic_solve(sm, &lap, &fixed).map_err(|e| num_err(Stage::Reassemble, e).context(format!("submesh {s}")))?;
    let flips = planar_flips(sm.faces(), &w);
    let flagged = mesh_beltrami(sm, &w, true).map(|f| check_bijectivity(&f, tol.beltrami).flagged.len()).unwrap_or(usize::MAX);
    let mut record = None;
    if !flips.is_empty() || flagged > 0 {
        let (fixed_w, rep) = qc_correct(sm, &w, tol.qc_iterations, tol.beltrami)
            .map_err(|e| num_err(Stage::Reassemble, e).context(format!("submesh {s}")).hint("fold repair failed; finer cuts or a better-shaped mesh usually help"))?;
        w = fixed_w;
        record = Some(RepairRecord { submesh: s, flagged, flips: flips.len(), report: rep });
    }
    let out = w
        .into_iter()
        .map(|z| {
            let e = if invert {
                if z.norm() == 0.0 {
                    Infinity
                } else {
                    Finite(crate::extended::cdiv(Complex64::new(1.0, 0.0), z))
                }
            } else {
                Finite(z)
            };
            // the plane is mirrored before projecting so that faces keep
            // facing outward on the sphere
            if mode == Mode::Sphere {
                e.conj()
            } else {
                e
            }
        })
        .collect();
    Ok((out, record))
}

/// Result of reading inputs and running the pipeline from a config.
pub struct PipelineRun {
    pub mesh: TriMesh,
    pub output: RunOutput,
    pub report: serde_json::Value,
}

fn io_err(stage: Stage, e: impl fmt::Display, path: &Path) -> PipelineError {
    PipelineError::new(stage, ErrorKind::Io, e).context(path.display().to_string())
}

pub fn load_inputs(config: &RunConfig) -> Result<(TriMesh, CutEdgeSet), PipelineError> {
    let mesh = mesh::load_obj(&config.input).map_err(|e| match e {
        mesh::MeshError::Io { .. } => io_err(Stage::Load, &e, &config.input),
        other => PipelineError::new(Stage::Load, ErrorKind::Validation, other).context(config.input.display().to_string()),
    })?;
    let cuts = match &config.cuts {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(Stage::Load, e, p))?;
            CutEdgeSet::parse(&mesh, &text).map_err(|e| PipelineError::new(Stage::Load, ErrorKind::Validation, e).context(p.display().to_string()))?
        }
        None => CutEdgeSet::default(),
    };
    Ok((mesh, cuts))
}

/// Loads the inputs, runs, writes the outputs named in the config.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineRun, PipelineError> {
    config.validate()?;
    let (mesh, cuts) = load_inputs(config)?;
    let output = run_on_mesh(&mesh, &cuts, &config.options)?;
    let report = output.report_json(&mesh, config.raw_metrics);
    write_outputs(config, &mesh, &output, &report)?;
    Ok(PipelineRun { mesh, output, report })
}

pub fn write_outputs(config: &RunConfig, mesh: &TriMesh, output: &RunOutput, report: &serde_json::Value) -> Result<(), PipelineError> {
    if let Some(p) = &config.out {
        mesh::write_obj_with_param(p, mesh, &output.param.coords).map_err(|e| io_err(Stage::Output, e, p))?;
    }
    if let Some(p) = &config.report {
        let text = serde_json::to_string_pretty(report).expect("report serializes");
        std::fs::write(p, text).map_err(|e| io_err(Stage::Output, e, p))?;
    }
    Ok(())
}

/// Cut layout splitting a mesh into `n` slabs of equal face count along
/// its longest bounding-box axis.
pub fn balanced_cuts(mesh: &TriMesh, n: usize) -> CutEdgeSet {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in mesh.vertices() {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap();
    let mut dir = [0.0; 3];
    dir[axis] = 1.0;
    let labels = fixtures::slab_labels(mesh, n, dir);
    CutEdgeSet::new(mesh, &fixtures::label_cuts(mesh, &labels)).expect("label boundaries are mesh edges")
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub workers: usize,
    pub submeshes: usize,
    /// every run's wall-clock seconds
    pub runs: Vec<f64>,
    #[serde(rename = "T_n")]
    pub t_n: f64,
    #[serde(rename = "S_n")]
    pub s_n: f64,
    #[serde(rename = "E_n")]
    pub e_n: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub vertices: usize,
    pub faces: usize,
    pub mode: Mode,
    pub repetitions: usize,
    pub available_cores: usize,
    pub rows: Vec<BenchRow>,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    crate::metrics::quantile_sorted(&s, 0.5)
}

/// Times the pipeline for each subdomain count (median of `reps` runs),
/// with `n` workers unless `workers` overrides it. `n = 2` is the
/// baseline of the speedup and is added when missing.
pub fn benchmark_subdomains(
    mesh: &TriMesh,
    n_values: &[usize],
    layouts: Option<&dyn Fn(usize) -> CutEdgeSet>,
    options: &Options,
    workers: Option<usize>,
    reps: usize,
) -> Result<BenchReport, (PipelineError, Option<BenchReport>)> {
    let mut ns: Vec<usize> = n_values.to_vec();
    if !ns.contains(&2) {
        ns.push(2);
    }
    ns.sort_unstable();
    ns.dedup();
    let mut report = BenchReport {
        vertices: mesh.num_vertices(),
        faces: mesh.num_faces(),
        mode: options.mode,
        repetitions: reps,
        available_cores: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        rows: Vec::new(),
    };
    if ns[0] < 2 {
        return Err((PipelineError::new(Stage::Benchmark, ErrorKind::Validation, "subdomain counts must be at least 2"), None));
    }
    let mut t2 = f64::NAN;
    for &n in &ns {
        let cuts = match layouts {
            Some(f) => f(n),
            None => balanced_cuts(mesh, n),
        };
        let mut opts = *options;
        opts.workers = workers.unwrap_or(n);
        let mut runs = Vec::with_capacity(reps);
        let mut submeshes = 0;
        for _ in 0..reps.max(1) {
            let t = Instant::now();
            match run_on_mesh(mesh, &cuts, &opts) {
                Ok(out) => submeshes = out.partition.len(),
                Err(e) => return Err((e.context(format!("benchmark n = {n}")), Some(report))),
            }
            runs.push(t.elapsed().as_secs_f64());
        }
        let t_n = median(&runs);
        if n == 2 {
            t2 = t_n;
        }
        let s_n = t2 / t_n;
        report.rows.push(BenchRow { n, workers: opts.workers, submeshes, runs, t_n, s_n, e_n: s_n / (n as f64 / 2.0) });
    }
    Ok(report)
}
