//! `anigreen` subcommands. Exit status 0 on success, 1 on rejected input or
//! a failed check, 2 on numerical failure. Errors go to stderr as
//! `ERROR <code>: <message>`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anigreen_core::coords::{compute_coords_with, deform, CoordinateTable};
use anigreen_core::io::{format_obj, read_table, write_table};
use anigreen_core::metrics::{measure, sweep};
use anigreen_core::nalgebra::DMatrix;
use anigreen_core::quadrature::oracle_gap;
use anigreen_core::scene::{parse_scene, MatrixSpec, Scene};
use anigreen_core::shapes::interior_points;
use anigreen_core::solver::{evaluate_map, solve};
use anigreen_core::{Error, KernelContext, Point, SpdMatrix};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "anigreen", version, about = "Cage-based deformation with anisotropic Green coordinates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the coordinate table of the scene's object and write a .agc cache.
    Coords {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Deform the object by the scene's target cage; writes .obj or .json.
    Deform {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Reuse a table written by `coords`.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Run the variational solver; writes coefficients, energy trace and the deformed object.
    Varsolve {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare closed-form coordinates with adaptive quadrature at random interior points.
    Validate {
        scene: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Relative tolerance handed to the quadrature.
        #[arg(long, default_value_t = 1e-10)]
        quad_tol: f64,
    },
    /// Distortion report of the scene's deformation, optionally over a matrix grid.
    Metrics {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON list of `{"label": ..., "matrix": ...}` entries.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Start the session service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Directory that mesh paths in posted scenes resolve against.
        #[arg(long, default_value = ".")]
        root: PathBuf,
    },
}

enum Failure {
    Core(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Error> {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn rows(points: &[Point]) -> Vec<Vec<f64>> {
    points.iter().map(|p| p.as_slice().to_vec()).collect()
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn table_for(scene: &Scene) -> Result<CoordinateTable, Error> {
    let ctx = KernelContext::new(&scene.source, &scene.matrix)?;
    compute_coords_with(&ctx, &scene.object, &scene.coord_options())
}

fn cmd_coords(scene: &Path, out: &Path) -> Outcome {
    let scene = parse_scene(scene)?;
    let table = table_for(&scene)?;
    write_table(out, &table)?;
    println!(
        "wrote {} x ({} + {}) coordinates to {}",
        table.n_points(),
        table.n_vertices(),
        table.n_faces(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct Geometry {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    faces: Vec<Vec<usize>>,
}

fn write_geometry(path: &Path, dim: usize, vertices: &[Point], faces: &[Vec<usize>]) -> Result<(), Error> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj")) {
        write(path, format_obj(vertices, faces))
    } else {
        write(path, to_json(&Geometry { dim, vertices: rows(vertices), faces: faces.to_vec() }))
    }
}

fn cmd_deform(scene: &Path, out: &Path, table: Option<&Path>) -> Outcome {
    let scene = parse_scene(scene)?;
    let table = match table {
        Some(p) => {
            let t = read_table(p)?;
            if t.points != scene.object {
                return Err(Error::InvalidInput(format!("{} was built for a different object", p.display())).into());
            }
            t
        }
        None => table_for(&scene)?,
    };
    let deformed = deform(&table, &scene.pair()?, &scene.matrix, scene.file.use_scale)?;
    write_geometry(out, scene.file.dim, &deformed, &scene.object_faces)?;
    println!("wrote {} deformed points to {}", deformed.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct VarsolveReport {
    iterations: usize,
    energy_trace: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    normals: Vec<Vec<f64>>,
    vertices: Vec<Vec<f64>>,
}

fn cmd_varsolve(scene: &Path, out: &Path) -> Outcome {
    let scene = parse_scene(scene)?;
    let problem = scene.variational_problem()?;
    let state = solve(&problem)?;
    let ctx = KernelContext::new(&scene.source, &scene.matrix)?;
    let vertices = evaluate_map(&ctx, &state, &scene.object)?;
    let report = VarsolveReport {
        iterations: state.iterations,
        energy_trace: state.energy_trace.clone(),
        a: matrix_rows(&state.a),
        b: matrix_rows(&state.b),
        normals: matrix_rows(&state.normals(&scene.matrix)),
        vertices: rows(&vertices),
    };
    write(out, to_json(&report))?;
    println!("{} iterations, final energy {:e}", state.iterations, state.energy_trace.last().copied().unwrap_or(0.0));
    Ok(())
}

fn cmd_validate(scene: &Path, samples: usize, tol: f64, seed: u64, quad_tol: f64) -> Outcome {
    let scene = parse_scene(scene)?;
    let ctx = KernelContext::new(&scene.source, &scene.matrix)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = interior_points(&mut rng, &scene.source, samples, 1e-3)?;
    let mut worst = 0.0f64;
    for p in &points {
        worst = worst.max(oracle_gap(&ctx, p, quad_tol)?.max());
    }
    println!("max relative error {worst:e} over {} points (tolerance {tol:e})", points.len());
    if worst <= tol {
        Ok(())
    } else {
        Err(Failure::Check(format!("max relative error {worst:e} exceeds {tol:e}")))
    }
}

#[derive(Deserialize)]
struct GridEntry {
    label: String,
    matrix: MatrixSpec,
}

fn cmd_metrics(scene: &Path, out: &Path, grid: Option<&Path>) -> Outcome {
    let scene = parse_scene(scene)?;
    let pair = scene.pair()?;
    match grid {
        None => {
            let ctx = KernelContext::new(&scene.source, &scene.matrix)?;
            let mut report = measure(&ctx, &pair, &scene.object)?;
            report.label = "scene".into();
            println!("mean iso {:e}, mean area {:e}", report.mean_iso, report.mean_area);
            write(out, to_json(&report))?;
        }
        Some(g) => {
            let text = std::fs::read_to_string(g).map_err(|e| io_err(g, e))?;
            let entries: Vec<GridEntry> = serde_json::from_str(&text).map_err(|e| Error::Parse {
                location: format!("{}:{}:{}", g.display(), e.line(), e.column()),
                message: e.to_string(),
            })?;
            let dim = scene.file.dim;
            let grid = entries
                .iter()
                .map(|e| Ok((e.label.clone(), e.matrix.build(dim)?)))
                .collect::<Result<Vec<(String, SpdMatrix)>, Error>>()?;
            let reports = sweep(&pair, &grid, &scene.object)?;
            for r in &reports {
                println!("{:<24} mean iso {:e}, mean area {:e}", r.label, r.mean_iso, r.mean_area);
            }
            write(out, to_json(&reports))?;
        }
    }
    Ok(())
}

fn cmd_serve(addr: &str, root: PathBuf) -> Outcome {
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Io(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| Error::Io(format!("{addr}: {e}")))?;
        eprintln!("listening on {}", listener.local_addr().map_err(|e| Error::Io(e.to_string()))?);
        anigreen_service::serve(listener, root).await.map_err(|e| Error::Io(e.to_string()))
    })?;
    Ok(())
}

fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("ANIGREEN_THREADS") else {
        return Ok(());
    };
    let n: usize =
        value.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            Error::InvalidInput(format!("ANIGREEN_THREADS must be a positive integer, got {value:?}"))
        })?;
    // a second call within one process (tests) finds the pool already built
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = configure_threads().map_err(Failure::from).and_then(|()| match &cli.command {
        Command::Coords { scene, out } => cmd_coords(scene, out),
        Command::Deform { scene, out, table } => cmd_deform(scene, out, table.as_deref()),
        Command::Varsolve { scene, out } => cmd_varsolve(scene, out),
        Command::Validate { scene, samples, tol, seed, quad_tol } => {
            cmd_validate(scene, *samples, *tol, *seed, *quad_tol)
        }
        Command::Metrics { scene, out, grid } => cmd_metrics(scene, out, grid.as_deref()),
        Command::Serve { addr, root } => cmd_serve(addr, root.clone()),
    });
    match outcome {
        Ok(()) => 0,
        Err(Failure::Core(e)) => {
            eprintln!("ERROR {}: {e}", e.code());
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
        Err(Failure::Check(msg)) => {
            eprintln!("ERROR ToleranceExceeded: {msg}");
            1
        }
    }
}
