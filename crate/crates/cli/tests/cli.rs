use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pgcp_core::fixtures::{grid, heightfield, label_cuts, plane_labels};
use pgcp_core::mesh::{load_obj, parse_obj_texcoords};
use pgcp_core::{CutEdgeSet, TriMesh};

fn pgcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgcp")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_obj(path: &Path, m: &TriMesh) {
    let mut s = String::new();
    for p in m.vertices() {
        s += &format!("v {} {} {}\n", p[0], p[1], p[2]);
    }
    for f in m.faces() {
        s += &format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    std::fs::write(path, s).unwrap();
}

struct Case {
    dir: tempfile::TempDir,
    mesh: PathBuf,
    cuts: PathBuf,
}

impl Case {
    fn quadrant_grid() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let g = grid(12, 12, 1.0, 1.0);
        let mesh = dir.path().join("grid.obj");
        write_obj(&mesh, &g);
        let labels = plane_labels(&g, &[([1.0, 0.0, 0.0], 0.5), ([0.0, 1.0, 0.0], 0.5)]);
        let cuts = dir.path().join("cuts.txt");
        std::fs::write(&cuts, CutEdgeSet::new(&g, &label_cuts(&g, &labels)).unwrap().to_text()).unwrap();
        Case { dir, mesh, cuts }
    }
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn free_run_writes_param_and_report() {
    let c = Case::quadrant_grid();
    let (out, rep) = (c.path("param.obj"), c.path("report.json"));
    let o = pgcp(&["--input", s(&c.mesh), "--cuts", s(&c.cuts), "--mode", "free", "--workers", "2", "--out", s(&out), "--report", s(&rep)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = load_obj(&out).unwrap();
    assert_eq!(m.num_vertices(), 144);
    assert_eq!(parse_obj_texcoords(&std::fs::read_to_string(&out).unwrap()).len(), 144);
    let r = read_json(&rep);
    assert_eq!(r["schema"], "pgcp-report/1");
    assert_eq!(r["accepted"], true);
    assert_eq!(r["workers"], 2);
    assert_eq!(r["flipped_faces"], 0);
    assert_eq!(r["partition"]["submeshes"].as_array().unwrap().len(), 4);
    assert!(r["metrics"]["angular_deg"].is_null());
    let raw = c.path("raw.json");
    assert_eq!(code(&pgcp(&["--input", s(&c.mesh), "--cuts", s(&c.cuts), "--report", s(&raw), "--raw-metrics"])), 0);
    assert_eq!(read_json(&raw)["metrics"]["angular_deg"].as_array().unwrap().len(), 3 * 2 * 11 * 11);
}

#[test]
fn single_worker_runs_are_bitwise_identical() {
    let c = Case::quadrant_grid();
    let mut bytes = Vec::new();
    for i in 0..2 {
        let out = c.path(&format!("p{i}.obj"));
        let o = pgcp(&["--input", s(&c.mesh), "--cuts", s(&c.cuts), "--workers", "1", "--seed", "7", "--out", s(&out)]);
        assert_eq!(code(&o), 0);
        bytes.push(std::fs::read(out).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn flags_override_config_file() {
    let c = Case::quadrant_grid();
    let cfg = c.path("run.cfg");
    let rep = c.path("r.json");
    std::fs::write(&cfg, format!("# run settings\ninput = {}\ncuts = {}\nmode = sphere\nworkers = 3\nreport = {}\n", s(&c.mesh), s(&c.cuts), s(&rep))).unwrap();
    // sphere mode on a disk mesh is rejected
    let o = pgcp(&["--config", s(&cfg)]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sphere"));
    let o = pgcp(&["--config", s(&cfg), "--mode", "disk"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&rep);
    assert_eq!(r["mode"], "disk");
    assert_eq!(r["workers"], 3);
}

#[test]
fn error_kinds_map_to_exit_codes() {
    let c = Case::quadrant_grid();
    assert_eq!(code(&pgcp(&["--input", s(&c.path("missing.obj"))])), 4);
    let bad = c.path("bad.obj");
    std::fs::write(&bad, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 99\n").unwrap();
    assert_eq!(code(&pgcp(&["--input", s(&bad)])), 2);
    let bad_cuts = c.path("bad_cuts.txt");
    std::fs::write(&bad_cuts, "1 144\n").unwrap();
    assert_eq!(code(&pgcp(&["--input", s(&c.mesh), "--cuts", s(&bad_cuts)])), 2);
    assert_eq!(code(&pgcp(&["--input", s(&c.mesh), "--workers", "0"])), 2);
    assert_eq!(code(&pgcp(&[])), 2);
    let cfg = c.path("typo.cfg");
    std::fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(code(&pgcp(&["--config", s(&cfg), "--input", s(&c.mesh)])), 2);
    assert_eq!(code(&pgcp(&["--input", s(&c.mesh), "--out", s(&c.path("no/such/dir/p.obj"))])), 4);
}

#[test]
fn bench_reports_table_fields() {
    let c = Case::quadrant_grid();
    let rep = c.path("bench.json");
    let o = pgcp(&["bench", "--synthetic", "16", "--n", "3,4", "--reps", "1", "--report", s(&rep)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&rep);
    assert_eq!(r["complete"], true);
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["n"], 2);
    assert_eq!(rows[0]["S_n"], 1.0);
    assert_eq!(rows[0]["E_n"], 1.0);
    for row in rows {
        let (n, s_n, e_n) = (row["n"].as_f64().unwrap(), row["S_n"].as_f64().unwrap(), row["E_n"].as_f64().unwrap());
        assert_eq!(e_n, s_n / (n / 2.0));
        assert!(row["T_n"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn bench_failure_keeps_partial_rows() {
    let c = Case::quadrant_grid();
    let m = heightfield(12, 12, 0.1, 2);
    let mesh = c.path("hf.obj");
    write_obj(&mesh, &m);
    let cuts = c.path("cuts");
    std::fs::create_dir(&cuts).unwrap();
    let halves = plane_labels(&m, &[([1.0, 0.0, 0.0], 0.5)]);
    std::fs::write(cuts.join("cuts_2.txt"), CutEdgeSet::new(&m, &label_cuts(&m, &halves)).unwrap().to_text()).unwrap();
    // a closed ring of cuts leaves an annulus, which the partition rejects
    let ring: Vec<usize> = m
        .vertices()
        .iter()
        .map(|p| usize::from((p[0] - 0.5).abs() < 0.2 && (p[1] - 0.5).abs() < 0.2))
        .collect();
    let lab: Vec<usize> = m.faces().iter().map(|f| f.iter().map(|&v| ring[v]).min().unwrap()).collect();
    std::fs::write(cuts.join("cuts_4.txt"), CutEdgeSet::new(&m, &label_cuts(&m, &lab)).unwrap().to_text()).unwrap();
    let rep = c.path("bench.json");
    let o = pgcp(&["bench", "--input", s(&mesh), "--n", "4", "--reps", "1", "--cuts-dir", s(&cuts), "--report", s(&rep)]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&rep);
    assert_eq!(r["complete"], false);
    assert_eq!(r["rows"].as_array().unwrap().len(), 1);
    assert_eq!(r["error"]["stage"], "partition");

    let o = pgcp(&["bench", "--input", s(&mesh), "--n", "3", "--cuts-dir", s(&cuts)]);
    assert_eq!(code(&o), 4);
}
