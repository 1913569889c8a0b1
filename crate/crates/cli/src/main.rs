use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pgcp_core::fixtures;
use pgcp_core::pipeline::{self, benchmark_subdomains, ErrorKind, PipelineError, RunConfig, Stage};
use pgcp_core::{CutEdgeSet, Mode, TriMesh};

/// Parallel global conformal parameterization of disk- and sphere-type
/// triangle meshes.
#[derive(Parser, Debug)]
#[command(name = "pgcp", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Time the pipeline for several subdomain counts (S_n = T_2 / T_n).
    Bench(BenchArgs),
}

/// Settings shared by runs and benchmarks. Everything is optional so a
/// config file can supply it; flags given here win over the file.
#[derive(Args, Debug, Default)]
struct Common {
    /// key = value file read before the flags are applied
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_parser = ["free", "disk", "sphere"])]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    seam_tolerance: Option<f64>,
    #[arg(long)]
    solver_residual: Option<f64>,
    #[arg(long)]
    beltrami_threshold: Option<f64>,
    #[arg(long)]
    qc_iterations: Option<usize>,
    #[arg(long)]
    edge_subdivision: Option<usize>,
    /// run the area-reducing Moebius optimization after stitching
    #[arg(long)]
    mobius_area: bool,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// cut-edge file, one "a b" vertex pair (1-based) per line
    #[arg(long)]
    cuts: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// parameterized OBJ
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run report
    #[arg(long)]
    report: Option<PathBuf>,
    /// include per-corner and per-face distortion arrays in the report
    #[arg(long)]
    raw_metrics: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// subdomain counts; 2 is always added as the baseline
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    n: Vec<usize>,
    /// fixed worker count for every n (default: n workers for n subdomains)
    #[arg(long)]
    workers: Option<usize>,
    /// timed runs per n; the median is reported
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// directory holding cuts_<n>.txt per subdomain count; balanced slabs otherwise
    #[arg(long)]
    cuts_dir: Option<PathBuf>,
    /// benchmark a generated k×k heightfield instead of --input
    #[arg(long, conflicts_with = "input")]
    synthetic: Option<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn build_config(common: &Common, extra: &[(&str, Option<String>)]) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::new("");
    if let Some(p) = &common.config {
        let text = std::fs::read_to_string(p)
            .map_err(|e| PipelineError::new(Stage::Config, ErrorKind::Io, e).context(p.display().to_string()))?;
        cfg.apply_config_text(&text).map_err(|e| e.context(p.display().to_string()))?;
    }
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let mut flags: Vec<(&str, Option<String>)> = vec![
        ("input", path(&common.input)),
        ("mode", common.mode.clone()),
        ("seed", common.seed.map(|v| v.to_string())),
        ("seam_tolerance", common.seam_tolerance.map(|v| v.to_string())),
        ("solver_residual", common.solver_residual.map(|v| v.to_string())),
        ("beltrami_threshold", common.beltrami_threshold.map(|v| v.to_string())),
        ("qc_iterations", common.qc_iterations.map(|v| v.to_string())),
        ("edge_subdivision", common.edge_subdivision.map(|v| v.to_string())),
        ("mobius_area", common.mobius_area.then(|| "true".to_string())),
    ];
    flags.extend(extra.iter().cloned());
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v).map_err(|e| PipelineError::new(Stage::Config, ErrorKind::Validation, e).context(format!("--{}", k.replace('_', "-"))))?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn missing_input() -> PipelineError {
    PipelineError::new(Stage::Config, ErrorKind::Validation, "no input mesh").hint("pass --input or set input = ... in the config file")
}

fn run(args: &RunArgs) -> Result<ExitCode, PipelineError> {
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let cfg = build_config(
        &args.common,
        &[
            ("cuts", path(&args.cuts)),
            ("workers", args.workers.map(|v| v.to_string())),
            ("out", path(&args.out)),
            ("report", path(&args.report)),
            ("raw_metrics", args.raw_metrics.then(|| "true".to_string())),
        ],
    )?;
    if cfg.input.as_os_str().is_empty() {
        return Err(missing_input());
    }
    let run = pipeline::run_pipeline(&cfg)?;
    let out = &run.output;
    let m = &out.metrics;
    eprintln!(
        "{} submeshes, {} welds, seam residual {:.1e}, {} flipped faces, mean |d| {:.4} deg, mean |d_area| {:.4}, {:.2} s",
        out.partition.len(),
        out.welds.len(),
        out.max_seam_residual(),
        out.flips(),
        m.abs_angular.mean,
        m.abs_area.mean,
        out.timings.total
    );
    if out.accepted() {
        return Ok(ExitCode::SUCCESS);
    }
    eprintln!(
        "pgcp: result not accepted (flipped faces {}, seam residual {:.1e} against tolerance {:.1e}); outputs were still written",
        out.flips(),
        out.max_seam_residual(),
        cfg.options.tolerances.seam
    );
    Ok(ExitCode::from(ErrorKind::Numerical.exit_code() as u8))
}

fn load_cut_file(mesh: &TriMesh, dir: &Path, n: usize) -> Result<CutEdgeSet, PipelineError> {
    let p = dir.join(format!("cuts_{n}.txt"));
    let text = std::fs::read_to_string(&p).map_err(|e| PipelineError::new(Stage::Load, ErrorKind::Io, e).context(p.display().to_string()))?;
    CutEdgeSet::parse(mesh, &text).map_err(|e| PipelineError::new(Stage::Load, ErrorKind::Validation, e).context(p.display().to_string()))
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<(), PipelineError> {
    std::fs::write(path, serde_json::to_string_pretty(v).expect("json serializes"))
        .map_err(|e| PipelineError::new(Stage::Output, ErrorKind::Io, e).context(path.display().to_string()))
}

fn bench(args: &BenchArgs) -> Result<ExitCode, PipelineError> {
    let mut cfg = build_config(&args.common, &[])?;
    if let Some(w) = args.workers {
        cfg.options.workers = w;
        cfg.validate()?;
    }
    let mesh = match args.synthetic {
        Some(k) if k >= 2 => fixtures::heightfield(k, k, 0.15, 3),
        Some(_) => return Err(PipelineError::new(Stage::Config, ErrorKind::Validation, "--synthetic needs k >= 2")),
        None if cfg.input.as_os_str().is_empty() => return Err(missing_input().hint("pass --input, --synthetic K or set input in the config file")),
        None => pipeline::load_inputs(&cfg)?.0,
    };
    if cfg.options.mode == Mode::Sphere && args.cuts_dir.is_none() {
        return Err(PipelineError::new(Stage::Config, ErrorKind::Validation, "sphere benchmarks need explicit cut files")
            .hint("balanced slab cuts produce annuli on closed surfaces; pass --cuts-dir"));
    }
    // Cut files are read up front so a bad file fails before any timing.
    let mut layouts = std::collections::BTreeMap::new();
    if let Some(dir) = &args.cuts_dir {
        let mut ns = args.n.clone();
        ns.push(2);
        for n in ns {
            layouts.insert(n, load_cut_file(&mesh, dir, n)?);
        }
    }
    let lookup = |n: usize| layouts[&n].clone();
    let layout_fn: Option<&dyn Fn(usize) -> CutEdgeSet> = if layouts.is_empty() { None } else { Some(&lookup) };
    let result = benchmark_subdomains(&mesh, &args.n, layout_fn, &cfg.options, args.workers, args.reps);
    let (report, err) = match result {
        Ok(r) => (Some(r), None),
        Err((e, partial)) => (partial, Some(e)),
    };
    if let Some(r) = &report {
        for row in &r.rows {
            eprintln!("n = {:>2}  workers {:>2}  T_n {:.3} s  S_n {:.3}  E_n {:.3}", row.n, row.workers, row.t_n, row.s_n, row.e_n);
        }
    }
    if let Some(p) = &args.report {
        let mut v = serde_json::json!({ "schema": "pgcp-bench/1" });
        if let Some(r) = &report {
            v = serde_json::to_value(r).expect("bench report serializes");
            v["schema"] = "pgcp-bench/1".into();
        }
        v["complete"] = err.is_none().into();
        if let Some(e) = &err {
            v["error"] = serde_json::json!({ "stage": e.stage, "kind": e.kind, "message": e.message, "context": e.context });
        }
        write_json(p, &v)?;
    }
    match err {
        None => Ok(ExitCode::SUCCESS),
        Some(e) => Err(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Some(Command::Bench(b)) => bench(b),
        None => run(&cli.run),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("pgcp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
