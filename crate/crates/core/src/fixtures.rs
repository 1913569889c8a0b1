//! Synthetic meshes and cut layouts used by the tests, the benchmarks and
//! `pgcp bench`.

use std::collections::HashMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::mesh::{boundary_loops, cross, norm, sub, validate_topology, Classification, TriMesh, Vec3};

/// Flat `nx × ny`-vertex grid on `[0, w] × [0, h]`, faces facing +z.
pub fn grid(nx: usize, ny: usize, w: f64, h: f64) -> TriMesh {
    surface_grid(nx, ny, |x, y| [x * w, y * h, 0.0])
}

/// Grid on the unit square lifted to `z = amp·Σ bumps`, where `bumps`
/// controls the number of sine lobes per side.
pub fn heightfield(nx: usize, ny: usize, amp: f64, bumps: usize) -> TriMesh {
    let k = bumps as f64 * std::f64::consts::PI;
    surface_grid(nx, ny, |x, y| [x, y, amp * (k * x).sin() * (k * y).sin() + 0.5 * amp * (0.7 * k * (x + 0.3 * y)).cos()])
}

fn surface_grid(nx: usize, ny: usize, f: impl Fn(f64, f64) -> Vec3) -> TriMesh {
    assert!(nx >= 2 && ny >= 2);
    let mut v = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            v.push(f(i as f64 / (nx - 1) as f64, j as f64 / (ny - 1) as f64));
        }
    }
    let id = |i: usize, j: usize| j * nx + i;
    let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            // alternate diagonals so the grid has no preferred direction
            if (i + j) % 2 == 0 {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            }
        }
    }
    TriMesh::new(v, faces).expect("grid is a valid mesh")
}

/// Unit icosphere with `subdiv` rounds of 4-to-1 subdivision
/// (`10·4^subdiv + 2` vertices), outward faces.
pub fn icosphere(subdiv: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vec3> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    for p in &mut v {
        *p = unit(*p);
    }
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdiv {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut m = [0; 3];
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                m[e] = *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    let p = unit([(v[a][0] + v[b][0]) / 2.0, (v[a][1] + v[b][1]) / 2.0, (v[a][2] + v[b][2]) / 2.0]);
                    v.push(p);
                    v.len() - 1
                });
            }
            next.push([f[0], m[0], m[2]]);
            next.push([f[1], m[1], m[0]]);
            next.push([f[2], m[2], m[1]]);
            next.push(m);
        }
        faces = next;
    }
    TriMesh::new(v, faces).expect("icosphere is a valid mesh")
}

fn unit(p: Vec3) -> Vec3 {
    let l = norm(p);
    [p[0] / l, p[1] / l, p[2] / l]
}

pub fn face_centroid(mesh: &TriMesh, f: usize) -> Vec3 {
    let [a, b, c] = mesh.faces()[f].map(|i| mesh.vertices()[i]);
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0, (a[2] + b[2] + c[2]) / 3.0]
}

/// Faces whose centroid satisfies `keep`, grown around pinched vertices
/// until the selection is a topological disk.
pub fn region(mesh: &TriMesh, keep: impl Fn(Vec3) -> bool) -> TriMesh {
    let mut sel: Vec<bool> = (0..mesh.num_faces()).map(|f| keep(face_centroid(mesh, f))).collect();
    for _ in 0..64 {
        let ids: Vec<usize> = (0..sel.len()).filter(|&f| sel[f]).collect();
        let (sub, map) = mesh.submesh(&ids);
        if validate_topology(&sub).classification == Classification::DiskType {
            return sub;
        }
        let mut out_deg: HashMap<usize, u32> = HashMap::new();
        for f in sub.faces() {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                if sub.face_of_half_edge(b, a).is_none() {
                    *out_deg.entry(a).or_default() += 1;
                }
            }
        }
        let mut changed = false;
        for (v, d) in out_deg {
            if d > 1 {
                for &g in mesh.vertex_faces(map[v]) {
                    changed |= !sel[g];
                    sel[g] = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    panic!("region selection did not converge to a disk");
}

/// Spherical cap around the south pole `(0, 0, −1)` of polar radius
/// `max_polar_deg`, cut from an icosphere.
pub fn spherical_cap(subdiv: usize, max_polar_deg: f64) -> TriMesh {
    let s = icosphere(subdiv);
    let zmax = -(max_polar_deg.to_radians()).cos();
    region(&s, |c| unit(c)[2] <= zmax)
}

/// [`spherical_cap`] with its boundary vertices slid along their meridians
/// onto the latitude circle, after shaving off ears (faces with two
/// boundary edges) that would flatten into slivers. The stereographic
/// image of the boundary is then exactly a circle.
pub fn round_cap(subdiv: usize, max_polar_deg: f64) -> TriMesh {
    let mut m = spherical_cap(subdiv, max_polar_deg);
    loop {
        let ears: Vec<usize> = (0..m.num_faces())
            .filter(|&f| {
                let t = m.faces()[f];
                (0..3).filter(|&e| m.face_of_half_edge(t[(e + 1) % 3], t[e]).is_none()).count() == 2
            })
            .collect();
        if ears.is_empty() {
            break;
        }
        let keep: Vec<usize> = (0..m.num_faces()).filter(|f| !ears.contains(f)).collect();
        m = m.submesh(&keep).0;
    }
    let (s, c) = max_polar_deg.to_radians().sin_cos();
    let mut p = m.vertices().to_vec();
    for &v in &boundary_loops(&m)[0].0 {
        let r = p[v][0].hypot(p[v][1]);
        p[v] = [s * p[v][0] / r, s * p[v][1] / r, -c];
    }
    TriMesh::new(p, m.faces().to_vec()).expect("snapped cap stays valid")
}

/// Random counter-clockwise polygon, star-shaped about the origin: a few
/// random Fourier modes on the radius and jittered angles.
pub fn random_polygon(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let modes: Vec<(f64, f64)> = (1..=4).map(|m| (rng.random_range(0.0..0.5 / m as f64), rng.random_range(0.0..TAU))).collect();
    let step = TAU / n as f64;
    (0..n)
        .map(|i| {
            let t = step * (i as f64 + rng.random_range(-0.3..0.3));
            let r = 1.0 + modes.iter().enumerate().map(|(m, (a, ph))| a * ((m + 1) as f64 * t + ph).sin()).sum::<f64>() * 0.5;
            Complex64::from_polar(r, t)
        })
        .collect()
}

/// Two neighbouring Jordan polygons in independent random similarity
/// frames, made by splitting a random star polygon along a bent path
/// through the origin. Returns `(a, b, k)` in the order expected by
/// [`crate::welding::partial_weld`]: `a` counter-clockwise, `b` clockwise,
/// both starting with the `k + 1` shared path points, and each domain
/// containing 0. Each side has 20 to 200 points and `2 ≤ k ≤ n/2`.
pub fn split_polygon_pair(rng: &mut impl Rng) -> (Vec<Complex64>, Vec<Complex64>, usize) {
    loop {
        let n = rng.random_range(24..=300);
        let p = random_polygon(n, rng);
        let i0 = rng.random_range(0..n);
        let j0 = (i0 + rng.random_range(n / 4..=3 * n / 4)) % n;
        let k = rng.random_range(2..=40usize);
        let half = k.div_ceil(2);
        // interior path points from p[j0] in to 0 and back out to p[i0]
        let mut path: Vec<Complex64> = (1..=half).map(|s| p[j0] * (1.0 - s as f64 / half as f64)).collect();
        path.extend((1..k - half).map(|s| p[i0] * (s as f64 / (k - half) as f64)));
        let arc = |from: usize, len: usize| -> Vec<Complex64> { (0..len).map(|t| p[(from + t) % n]).collect() };
        let len_a = (j0 + n - i0) % n;
        let mut a = vec![p[j0]];
        a.extend(&path);
        a.extend(arc(i0, len_a));
        let mut b = vec![p[j0]];
        b.extend(&path);
        let mut outer = arc(j0 + 1, n - len_a);
        outer.reverse();
        b.extend(outer);
        let m = a.len().min(b.len());
        if a.len() > 200 || b.len() > 200 || m < 20 || k > m / 2 {
            continue;
        }
        // a point well inside each piece, on the mid-ray of its outer arc
        let inner = |from: usize, len: usize| p[(from + len / 2) % n] * 0.35;
        let (ca, cb) = (inner(i0, len_a), inner(j0, n - len_a));
        let mut frame = |ctr: Complex64, pts: Vec<Complex64>| {
            let s = Complex64::from_polar(rng.random_range(0.5..2.0), rng.random_range(0.0..TAU));
            pts.into_iter().map(|z| (z - ctr) * s).collect::<Vec<_>>()
        };
        let a = frame(ca, a);
        let b = frame(cb, b);
        return (a, b, k);
    }
}

/// Cut edges separating faces with different labels.
pub fn label_cuts(mesh: &TriMesh, labels: &[usize]) -> Vec<(usize, usize)> {
    mesh.edges()
        .into_iter()
        .filter(|&(a, b)| match (mesh.face_of_half_edge(a, b), mesh.face_of_half_edge(b, a)) {
            (Some(f), Some(g)) => labels[f] != labels[g],
            _ => false,
        })
        .collect()
}

/// Makes every label region meet each vertex in one fan, so that label
/// regions partition into disks. Faces in extra fans take the label of the
/// neighbouring fan.
pub fn untangle_labels(mesh: &TriMesh, labels: &mut [usize]) {
    for _ in 0..16 {
        let mut changed = false;
        for v in 0..mesh.num_vertices() {
            let (fan, cyclic) = ordered_fan(mesh, v);
            if fan.len() < 2 {
                continue;
            }
            let runs = label_runs(&fan, labels, cyclic);
            let mut seen: HashMap<usize, usize> = HashMap::new();
            for (r, run) in runs.iter().enumerate() {
                let l = labels[run[0]];
                if let Some(&first) = seen.get(&l) {
                    // relabel the shorter of the two runs with its predecessor's label
                    let victim = if runs[first].len() <= run.len() { first } else { r };
                    let pred = &runs[(victim + runs.len() - 1) % runs.len()];
                    let nl = labels[pred[0]];
                    for &f in &runs[victim] {
                        labels[f] = nl;
                    }
                    changed = true;
                    break;
                }
                seen.insert(l, r);
            }
        }
        if !changed {
            return;
        }
    }
}

fn label_runs(fan: &[usize], labels: &[usize], cyclic: bool) -> Vec<Vec<usize>> {
    let n = fan.len();
    // start a cyclic scan at a label change so the first run is whole
    let start = if cyclic { (0..n).find(|&i| labels[fan[i]] != labels[fan[(i + n - 1) % n]]).unwrap_or(0) } else { 0 };
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for k in 0..n {
        let f = fan[(start + k) % n];
        match runs.last_mut() {
            Some(r) if labels[r[0]] == labels[f] => r.push(f),
            _ => runs.push(vec![f]),
        }
    }
    runs
}

/// Faces around v in rotational order (open fans start at the boundary),
/// and whether the fan closes up.
fn ordered_fan(mesh: &TriMesh, v: usize) -> (Vec<usize>, bool) {
    let faces = mesh.vertex_faces(v);
    if faces.is_empty() {
        return (Vec::new(), false);
    }
    let next_vertex = |f: usize| {
        let t = mesh.faces()[f];
        let k = t.iter().position(|&x| x == v).unwrap();
        (t[(k + 1) % 3], t[(k + 2) % 3])
    };
    // walk backwards to an open end, if any
    let mut start = faces[0];
    for _ in 0..faces.len() {
        let (a, _) = next_vertex(start);
        match mesh.face_of_half_edge(a, v) {
            Some(g) if g != faces[0] => start = g,
            _ => break,
        }
    }
    let mut fan = vec![start];
    let mut cur = start;
    loop {
        let (_, b) = next_vertex(cur);
        match mesh.face_of_half_edge(v, b) {
            Some(g) if g == start => return (fan, true),
            Some(g) if fan.len() < faces.len() => {
                fan.push(g);
                cur = g;
            }
            _ => return (fan, false),
        }
    }
}

/// Labels faces by the sign pattern of centroid offsets against a set of
/// planes `(normal, offset)`: label = Σ 2^k [n_k·c > o_k].
pub fn plane_labels(mesh: &TriMesh, planes: &[(Vec3, f64)]) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..mesh.num_faces())
        .map(|f| {
            let c = face_centroid(mesh, f);
            planes.iter().enumerate().map(|(k, (n, o))| if n[0] * c[0] + n[1] * c[1] + n[2] * c[2] > *o { 1 << k } else { 0 }).sum()
        })
        .collect();
    untangle_labels(mesh, &mut labels);
    labels
}

/// `n` slabs of roughly equal face count along the axis `dir`.
pub fn slab_labels(mesh: &TriMesh, n: usize, dir: Vec3) -> Vec<usize> {
    let proj: Vec<f64> = (0..mesh.num_faces())
        .map(|f| {
            let c = face_centroid(mesh, f);
            c[0] * dir[0] + c[1] * dir[1] + c[2] * dir[2]
        })
        .collect();
    let mut sorted = proj.clone();
    sorted.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..n).map(|k| sorted[k * sorted.len() / n]).collect();
    let mut labels: Vec<usize> = proj.iter().map(|&p| cuts.iter().filter(|&&c| p >= c).count()).collect();
    untangle_labels(mesh, &mut labels);
    labels
}

/// `n` angular sectors around the axis through `center` along `dir`.
pub fn sector_labels(mesh: &TriMesh, n: usize, center: Vec3, dir: Vec3, phase: f64) -> Vec<usize> {
    let d = unit(dir);
    let helper = if d[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = unit(cross(d, helper));
    let e2 = cross(d, e1);
    let mut labels: Vec<usize> = (0..mesh.num_faces())
        .map(|f| {
            let c = sub(face_centroid(mesh, f), center);
            let a = (c[0] * e2[0] + c[1] * e2[1] + c[2] * e2[2]).atan2(c[0] * e1[0] + c[1] * e1[1] + c[2] * e1[2]) - phase;
            let t = a.rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU;
            ((t * n as f64) as usize).min(n - 1)
        })
        .collect();
    untangle_labels(mesh, &mut labels);
    labels
}
