//! Acceptance run: one PASS/FAIL line per criterion. Built with
//! `harness = false` so the lines are printed whether or not they pass.

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::Instant;

use pgcp_core::assemble::{beltrami_per_face, planar_flips, qc_correct, spherical_flips, stereographic};
use pgcp_core::dncp::dncp_flatten;
use pgcp_core::fixtures::*;
use pgcp_core::mesh::{boundary_loops, norm, obj_with_param};
use pgcp_core::pipeline::{benchmark_subdomains, RunOutput};
use pgcp_core::welding::{intermediate_form, partial_weld, Branch};
use pgcp_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
    /// the criterion's stated hardware precondition does not hold here
    precondition_unmet: bool,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail, precondition_unmet: false }
}

fn cuts(m: &TriMesh, labels: &[usize]) -> CutEdgeSet {
    CutEdgeSet::new(m, &label_cuts(m, labels)).expect("label cuts are mesh edges")
}

fn quadrants(m: &TriMesh, c: [f64; 2]) -> CutEdgeSet {
    cuts(m, &plane_labels(m, &[([1.0, 0.0, 0.0], c[0]), ([0.0, 1.0, 0.0], c[1])]))
}

fn run(m: &TriMesh, c: &CutEdgeSet, mode: Mode) -> Result<RunOutput, PipelineError> {
    run_on_mesh(m, c, &Options { mode, ..Default::default() })
}

fn negative_faces(m: &TriMesh, p: &[Complex64]) -> usize {
    m.faces()
        .iter()
        .filter(|f| {
            let (a, b, c) = (p[f[0]], p[f[1]], p[f[2]]);
            ((b - a).conj() * (c - a)).im < 0.0
        })
        .count()
}

fn segments_cross(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let o = |p: Complex64, q: Complex64, r: Complex64| ((q - p).conj() * (r - p)).im;
    o(a, b, c) * o(a, b, d) < 0.0 && o(c, d, a) * o(c, d, b) < 0.0
}

fn is_simple(p: &[Complex64]) -> bool {
    let n = p.len();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

fn polygon_corpus() -> Vec<(Vec<Complex64>, Vec<Complex64>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..100).map(|_| split_polygon_pair(&mut rng)).collect()
}

fn c1_welding() -> Outcome {
    let corpus = polygon_corpus();
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for (i, (a, b, k)) in corpus.iter().enumerate() {
        match partial_weld(a, b, *k) {
            Ok(w) => {
                worst = worst.max(w.seam_residual);
                let mut union: Vec<ExtendedComplex> = w.a[*k..].to_vec();
                union.push(w.a[0]);
                union.extend(w.b[*k + 1..].iter().rev());
                let finite: Option<Vec<Complex64>> = union.iter().map(|z| z.finite()).collect();
                if w.seam_residual > 1e-8 || !finite.is_some_and(|f| is_simple(&f)) {
                    bad.push(i);
                }
            }
            Err(_) => bad.push(i),
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(bad.is_empty() && secs < 10.0, format!("100 pairs, max seam residual {worst:.1e} (≤ 1e-8), {} failing {:?}, {secs:.2} s (< 10 s)", bad.len(), bad))
}

fn c2_intermediate() -> Outcome {
    let mut worst_axis = 0.0f64;
    let mut min_free = f64::INFINITY;
    let mut failures = 0;
    for (a, b, k) in polygon_corpus() {
        for (p, br) in [(&a, Branch::Plus), (&b, Branch::Minus)] {
            let Ok(mb) = intermediate_form(p, k, br) else {
                failures += 1;
                continue;
            };
            let scale = mb.points.iter().filter_map(|z| z.finite()).map(|z| z.norm()).fold(0.0, f64::max);
            for (j, z) in mb.points.iter().enumerate() {
                let Some(z) = z.finite() else { continue };
                if j <= k {
                    worst_axis = worst_axis.max(z.re.abs() / scale);
                } else {
                    min_free = min_free.min(z.re);
                }
            }
        }
    }
    outcome(failures == 0 && worst_axis <= 1e-10 && min_free > 0.0, format!("200 transforms, max |Re Z_j|/max|Z| on the arc {worst_axis:.1e} (≤ 1e-10), min Re Z_j off the arc {min_free:.2e} (> 0), {failures} errors"))
}

fn c3_conformality() -> Outcome {
    let cap = round_cap(5, 90.0);
    let t = Instant::now();
    let out = match run(&cap, &quadrants(&cap, [0.0, 0.0]), Mode::Disk) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("pipeline failed: {e}")),
    };
    let secs = t.elapsed().as_secs_f64();
    // the mesh's outward orientation views the plane from below
    let exact: Vec<Complex64> = cap.vertices().iter().map(|p| stereographic(*p).finite().expect("cap avoids the north pole").conj()).collect();
    let mu = beltrami_per_face(&exact, out.param.planar().expect("disk mode is planar"), cap.faces()).expect("faces are nondegenerate");
    let (mean, max) = (mu.mean_norm(), mu.max_norm());
    outcome(
        out.partition.len() == 4 && mean < 0.05 && max < 0.3 && secs < 30.0,
        format!("{} vertices, {} subdomains, mean |μ| {mean:.4} (< 0.05), max |μ| {max:.4} (< 0.3), {secs:.2} s (< 30 s)", cap.num_vertices(), out.partition.len()),
    )
}

fn c4_planar() -> Outcome {
    let g = grid(64, 64, 1.0, 1.0);
    let out = match run(&g, &quadrants(&g, [0.5, 0.5]), Mode::Free) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("pipeline failed: {e}")),
    };
    let mean = out.metrics.abs_angular.mean;
    let seam = out.max_seam_residual_abs() / g.bbox_diagonal();
    let neg = negative_faces(&g, out.param.planar().unwrap());
    outcome(mean < 0.01 && seam < 1e-9 && out.flips() == 0 && neg == 0, format!("mean |d| {mean:.2e}° (< 0.01), seam residual / diagonal {seam:.1e} (< 1e-9), {} flipped, {neg} negative", out.flips()))
}

fn c5_sphere() -> Outcome {
    let s = icosphere(4);
    let labels: Vec<usize> = (0..s.num_faces()).map(|f| usize::from(face_centroid(&s, f)[2] > 0.0)).collect();
    let out = match run(&s, &cuts(&s, &labels), Mode::Sphere) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("pipeline failed: {e}")),
    };
    let p = out.param.spherical().unwrap();
    let norm_err = p.iter().map(|q| (norm(*q) - 1.0).abs()).fold(0.0, f64::max);
    let inverted = spherical_flips(s.faces(), p).len();
    let mean = out.metrics.abs_angular.mean;
    outcome(norm_err <= 1e-9 && inverted == 0 && mean < 1.0, format!("{} vertices, max ||p|-1| {norm_err:.1e} (≤ 1e-9), {inverted} inverted, mean |d| {mean:.3}° (< 1)", s.num_vertices()))
}

fn c6_disk() -> Outcome {
    let cases: Vec<(&str, TriMesh, Box<dyn Fn(&TriMesh) -> CutEdgeSet>)> = vec![
        ("round cap, 3 slabs", round_cap(4, 90.0), Box::new(|m| cuts(m, &slab_labels(m, 3, [1.0, 0.0, 0.0])))),
        ("cap 70°, 4 sectors", spherical_cap(5, 70.0), Box::new(|m| cuts(m, &sector_labels(m, 4, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 0.4)))),
        ("bumpy square, quadrants", heightfield(48, 48, 0.2, 2), Box::new(|m| quadrants(m, [0.5, 0.5]))),
    ];
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, m, layout) in &cases {
        let out = match run(m, &layout(m), Mode::Disk) {
            Ok(o) => o,
            Err(e) => {
                ok = false;
                notes.push(format!("{name}: {e}"));
                continue;
            }
        };
        let p = out.param.planar().unwrap();
        let lp = &boundary_loops(m)[0].0;
        worst = lp.iter().map(|&v| (p[v].norm() - 1.0).abs()).fold(worst, f64::max);
        // the loop must wind once, counter-clockwise, with every step forward
        let steps: Vec<f64> = (0..lp.len()).map(|t| (p[lp[(t + 1) % lp.len()]] / p[lp[t]]).arg()).collect();
        let turns = steps.iter().sum::<f64>() / TAU;
        if steps.iter().any(|&s| s <= 0.0) || (turns - 1.0).abs() > 1e-9 {
            ok = false;
            notes.push(format!("{name}: order not preserved"));
        }
    }
    outcome(ok && worst <= 1e-9, format!("3 meshes, max ||z|-1| {worst:.1e} (≤ 1e-9), cyclic order {}{}", if notes.is_empty() { "preserved" } else { "broken" }, notes.iter().map(|n| format!("; {n}")).collect::<String>()))
}

struct CorpusCase {
    name: &'static str,
    mesh: TriMesh,
    cuts: CutEdgeSet,
    mode: Mode,
}

fn corpus() -> Vec<CorpusCase> {
    let mk = |name, mesh: TriMesh, f: &dyn Fn(&TriMesh) -> CutEdgeSet, mode| {
        let cuts = f(&mesh);
        CorpusCase { name, mesh, cuts, mode }
    };
    let sectors = |n: usize, c: [f64; 3]| move |m: &TriMesh| cuts(m, &sector_labels(m, n, c, [0.0, 0.0, 1.0], 0.25));
    let slabs = |n: usize, d: [f64; 3]| move |m: &TriMesh| cuts(m, &slab_labels(m, n, d));
    vec![
        mk("grid 32²", grid(32, 32, 1.0, 1.0), &|m| quadrants(m, [0.5, 0.5]), Mode::Free),
        mk("grid 100×60", grid(100, 60, 1.6, 1.0), &slabs(3, [1.0, 0.2, 0.0]), Mode::Free),
        mk("bumps 40²", heightfield(40, 40, 0.15, 2), &sectors(4, [0.5, 0.5, 0.0]), Mode::Free),
        mk("bumps 100²", heightfield(100, 100, 0.2, 3), &slabs(4, [1.0, 0.0, 0.0]), Mode::Free),
        mk("bumps 150²", heightfield(150, 150, 0.3, 2), &|m| quadrants(m, [0.5, 0.5]), Mode::Free),
        mk("bumps 220²", heightfield(220, 220, 0.1, 4), &sectors(3, [0.5, 0.5, 0.0]), Mode::Free),
        mk("round cap 90°", round_cap(4, 90.0), &sectors(4, [0.0, 0.0, 0.0]), Mode::Disk),
        mk("cap 60°", spherical_cap(5, 60.0), &|m| quadrants(m, [0.0, 0.0]), Mode::Disk),
        mk("cap 120°", spherical_cap(5, 120.0), &slabs(3, [1.0, 0.0, 0.0]), Mode::Free),
        mk("round cap 80°", round_cap(6, 80.0), &slabs(4, [0.0, 1.0, 0.0]), Mode::Disk),
    ]
}

/// The corpus runs feed criteria 7 and 8.
struct CorpusResult {
    name: &'static str,
    vertices: usize,
    planar: bool,
    diag: f64,
    out: Result<RunOutput, PipelineError>,
}

fn run_corpus() -> Vec<CorpusResult> {
    corpus()
        .into_iter()
        .map(|c| {
            let planar = c.mesh.vertices().iter().all(|p| p[2] == 0.0);
            CorpusResult { name: c.name, vertices: c.mesh.num_vertices(), planar, diag: c.mesh.bbox_diagonal(), out: run(&c.mesh, &c.cuts, c.mode).map(|o| check_neg(o, &c.mesh)) }
        })
        .collect()
}

// the flip flags must agree with independently computed signed areas
fn check_neg(o: RunOutput, m: &TriMesh) -> RunOutput {
    let n = o.param.planar().map(|p| negative_faces(m, p)).unwrap_or(0);
    assert_eq!(n, o.flips(), "flip flags disagree with signed areas");
    o
}

fn inject_fold(m: &TriMesh, p: &mut [Complex64], v: usize) {
    // reflect v across its lowest-id neighbour
    let nb = m.vertex_faces(v).iter().flat_map(|&f| m.faces()[f]).filter(|&u| u != v).min().unwrap();
    p[v] = p[nb] * 2.0 - p[v];
}

fn c7_bijectivity(results: &[CorpusResult]) -> Outcome {
    let sizes: Vec<usize> = results.iter().map(|r| r.vertices).collect();
    let in_range = sizes.iter().all(|&n| (1_000..=50_000).contains(&n));
    let mut accepted = 0;
    let mut negative = 0;
    let mut failed = Vec::new();
    for r in results {
        match &r.out {
            Ok(o) if o.accepted() => {
                accepted += 1;
                negative += o.flips();
            }
            Ok(_) => {}
            Err(e) => failed.push(format!("{}: {}", r.name, e.message)),
        }
    }
    // fold injection
    let mut repairs = Vec::new();
    let mut repair_ok = true;
    for (m, vs) in [(grid(30, 30, 1.0, 1.0), [465usize, 200, 700]), (heightfield(40, 40, 0.2, 2), [820, 300, 1100])] {
        let base = dncp_flatten(&m, None).expect("flattening").embedding.coords;
        for v in vs {
            let mut p = base.clone();
            inject_fold(&m, &mut p, v);
            let before = planar_flips(m.faces(), &p).len();
            match qc_correct(&m, &p, 5, 0.99) {
                Ok((q, rep)) => {
                    let after = planar_flips(m.faces(), &q).len();
                    repair_ok &= before > 0 && after == 0 && rep.iterations <= 5;
                    repairs.push(format!("{before}→{after} in {}", rep.iterations));
                }
                Err(e) => {
                    repair_ok = false;
                    repairs.push(format!("{e}"));
                }
            }
        }
    }
    outcome(
        in_range && accepted > 0 && negative == 0 && repair_ok,
        format!("{} meshes of {}–{} vertices, {accepted} accepted with {negative} negative faces{}; injected folds {}", results.len(), sizes.iter().min().unwrap(), sizes.iter().max().unwrap(), failed.iter().map(|f| format!(", {f}")).collect::<String>(), repairs.join(", ")),
    )
}

fn c8_energy(results: &[CorpusResult]) -> Outcome {
    let mut count = 0;
    let mut violations = 0;
    let mut worst_planar = 0.0f64;
    let mut check = |dirichlet: f64, area: f64, planar: bool, diag: f64| {
        count += 1;
        // rounding slack only: the two sums agree to about 1e-15 on flat input
        if dirichlet < area * (1.0 - 1e-12) {
            violations += 1;
        }
        if planar {
            worst_planar = worst_planar.max((dirichlet - area) / (diag * diag));
        }
    };
    for r in results {
        if let Ok(o) = &r.out {
            for f in &o.flatten {
                check(f.dirichlet, f.area, r.planar, r.diag);
            }
        }
    }
    for m in [grid(20, 20, 1.0, 1.0), grid(64, 64, 1.0, 1.0), heightfield(40, 40, 0.3, 2), round_cap(4, 90.0), spherical_cap(4, 150.0)] {
        let planar = m.vertices().iter().all(|p| p[2] == 0.0);
        let f = dncp_flatten(&m, None).expect("flattening");
        check(f.dirichlet, f.area, planar, m.bbox_diagonal());
    }
    outcome(violations == 0 && worst_planar < 1e-6, format!("{count} embeddings, {violations} with E_D < A, max planar E_C / scale² {worst_planar:.1e} (< 1e-6)"))
}

fn c9_speedup() -> Outcome {
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let m = heightfield(320, 320, 0.1, 3);
    let opts = Options::default();
    let report = match benchmark_subdomains(&m, &[2, 3, 4], None, &opts, None, 3) {
        Ok(r) => r,
        Err((e, _)) => return outcome(false, format!("benchmark failed: {e}")),
    };
    let row = |n: usize| report.rows.iter().find(|r| r.n == n).expect("row present");
    let s4 = row(4).s_n;
    let e: Vec<f64> = report.rows.iter().map(|r| r.e_n).collect();
    let monotone = e.windows(2).all(|w| w[1] <= w[0]);
    let detail = format!(
        "{} vertices, T_n = {}, S_4 {s4:.2} (≥ 1.3), E_n = {} (nonincreasing: {monotone}), {cores} core(s) available",
        m.num_vertices(),
        report.rows.iter().map(|r| format!("{:.2}s", r.t_n)).collect::<Vec<_>>().join("/"),
        e.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join("/")
    );
    let mut o = outcome(s4 >= 1.3 && monotone && m.num_vertices() >= 100_000, detail);
    if cores < 4 {
        o.precondition_unmet = true;
        o.detail.push_str("; needs ≥ 4 cores");
    }
    o
}

fn c10_mobius() -> Outcome {
    let cap = round_cap(4, 90.0);
    let mut lines = Vec::new();
    let mut ok = true;
    let cases: Vec<(&str, TriMesh, CutEdgeSet, Mode)> = vec![
        ("hemisphere disk", cap.clone(), quadrants(&cap, [0.0, 0.0]), Mode::Disk),
        ("cap 120° free", spherical_cap(4, 120.0), CutEdgeSet::default(), Mode::Free),
        ("sphere", icosphere(3), {
            let s = icosphere(3);
            let l: Vec<usize> = (0..s.num_faces()).map(|f| usize::from(face_centroid(&s, f)[0] > 0.2)).collect();
            cuts(&s, &l)
        }, Mode::Sphere),
    ];
    for (name, m, c, mode) in cases {
        for seed in [0u64, 1] {
            match run_on_mesh(&m, &c, &Options { mode, mobius_area: true, seed, ..Default::default() }) {
                Ok(o) => {
                    let mob = o.mobius.as_ref().expect("optimizer ran");
                    let recomputed = o.metrics.abs_area.mean;
                    let good = mob.after <= mob.before && (recomputed - mob.after).abs() <= 1e-12 * mob.before.max(1.0);
                    ok &= good;
                    if seed == 0 {
                        lines.push(format!("{name} {:.4}→{:.4}", mob.before, mob.after));
                    }
                }
                Err(e) => {
                    ok = false;
                    lines.push(format!("{name}: {e}"));
                }
            }
        }
    }
    outcome(ok, format!("mean |d_area| before→after: {}", lines.join(", ")))
}

fn c11_cuts() -> Outcome {
    let g = grid(64, 64, 1.0, 1.0);
    let cap = round_cap(5, 90.0);
    let layouts_g: Vec<CutEdgeSet> = vec![
        quadrants(&g, [0.5, 0.5]),
        cuts(&g, &slab_labels(&g, 3, [1.0, 0.3, 0.0])),
        cuts(&g, &sector_labels(&g, 5, [0.45, 0.55, 0.0], [0.0, 0.0, 1.0], 0.2)),
    ];
    let layouts_c: Vec<CutEdgeSet> = vec![
        quadrants(&cap, [0.0, 0.0]),
        cuts(&cap, &slab_labels(&cap, 4, [1.0, 0.0, 0.0])),
        cuts(&cap, &sector_labels(&cap, 3, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 0.7)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, m, layouts, mode) in [("grid", &g, &layouts_g, Mode::Free), ("cap", &cap, &layouts_c, Mode::Disk)] {
        let means: Vec<f64> = layouts
            .iter()
            .filter_map(|c| match run(m, c, mode) {
                Ok(o) => Some(o.metrics.abs_angular.mean),
                Err(_) => None,
            })
            .collect();
        let spread = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - means.iter().cloned().fold(f64::INFINITY, f64::min);
        ok &= means.len() == 3 && spread < 0.05;
        parts.push(format!("{name} mean |d| {} spread {spread:.4}°", means.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join("/")));
    }
    outcome(ok, format!("{} (< 0.05)", parts.join("; ")))
}

fn c12_determinism() -> Outcome {
    let m = heightfield(60, 60, 0.2, 2);
    let c = cuts(&m, &sector_labels(&m, 4, [0.5, 0.5, 0.0], [0.0, 0.0, 1.0], 0.3));
    let s = icosphere(3);
    let sc = cuts(&s, &sector_labels(&s, 3, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 0.1));
    let mut ok = true;
    let mut errors = Vec::new();
    let mut worst = 0.0f64;
    for (mesh, cut, mode) in [(&m, &c, Mode::Free), (&m, &c, Mode::Disk), (&s, &sc, Mode::Sphere)] {
        let opts = |workers| Options { mode, workers, mobius_area: true, seed: 11, ..Default::default() };
        let texts: Vec<Option<String>> = [1, 1, 4]
            .iter()
            .map(|&w| match run_on_mesh(mesh, cut, &opts(w)) {
                Ok(o) => obj_with_param(mesh, &o.param.coords, 17).ok(),
                Err(e) => {
                    errors.push(format!("{mode}: {}", e.message));
                    None
                }
            })
            .collect();
        let [Some(a), Some(b), Some(c4)] = [&texts[0], &texts[1], &texts[2]] else {
            ok = false;
            continue;
        };
        ok &= a == b;
        let nums = |t: &str| -> Vec<f64> { t.lines().filter(|l| l.starts_with("vt ")).flat_map(|l| l.split_whitespace().skip(1).map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>()).collect() };
        let (x, y) = (nums(a), nums(c4));
        let scale = x.iter().map(|v| v.abs()).fold(f64::MIN_POSITIVE, f64::max);
        let rel = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max) / scale;
        worst = worst.max(rel);
        ok &= x.len() == y.len() && rel <= 1e-9;
    }
    ok &= errors.is_empty();
    outcome(ok, format!("free/disk/sphere: single-worker reruns bitwise identical {}, 4 vs 1 workers max relative difference {worst:.1e} (≤ 1e-9){}", if ok { "yes" } else { "no" }, errors.iter().map(|e| format!("; {e}")).collect::<String>()))
}

fn main() -> ExitCode {
    let filter: Option<HashSet<usize>> = std::env::var("PGCP_CRITERIA").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| filter.as_ref().is_none_or(|f| f.contains(&n));
    let corpus = if wanted(7) || wanted(8) { Some(run_corpus()) } else { None };
    let checks: Vec<(usize, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "welding contract", Box::new(c1_welding)),
        (2, "intermediate form contract", Box::new(c2_intermediate)),
        (3, "conformality oracle", Box::new(c3_conformality)),
        (4, "planar exactness", Box::new(c4_planar)),
        (5, "sphere mode", Box::new(c5_sphere)),
        (6, "disk mode", Box::new(c6_disk)),
        (7, "bijectivity", Box::new(|| c7_bijectivity(corpus.as_ref().unwrap()))),
        (8, "DNCP energy bound", Box::new(|| c8_energy(corpus.as_ref().unwrap()))),
        (9, "parallel speedup", Box::new(c9_speedup)),
        (10, "Möbius area optimization", Box::new(c10_mobius)),
        (11, "robustness to cuts", Box::new(c11_cuts)),
        (12, "determinism", Box::new(c12_determinism)),
    ];
    let mut blocking = 0;
    for (n, name, f) in checks {
        if !wanted(n) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        let tag = match (o.pass, o.precondition_unmet) {
            (true, _) => "PASS",
            (false, true) => "FAIL (precondition unmet)",
            (false, false) => "FAIL",
        };
        println!("criterion {n:>2} {tag}: {name}: {} [{:.1} s]", o.detail, t.elapsed().as_secs_f64());
        if !o.pass && !o.precondition_unmet {
            blocking += 1;
        }
    }
    if blocking > 0 {
        println!("{blocking} criterion/criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
