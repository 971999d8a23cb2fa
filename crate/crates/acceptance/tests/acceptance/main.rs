//! One line per acceptance criterion; exits non-zero when any fails.

mod iso_reference;

use std::net::SocketAddr;
use std::path::Path;
use std::time::Instant;

use anigreen_core::cage::CagePair;
use anigreen_core::coords::{compute_coords, deform, similarity_deform, similarity_reference_deform, CoordOptions};
use anigreen_core::diff::compute_differentials;
use anigreen_core::io::format_obj;
use anigreen_core::nalgebra::{DMatrix, DVector, Vector2, Vector3};
use anigreen_core::quadrature::oracle_gap;
use anigreen_core::shapes::{
    cube, icosphere, interior_points, perturbed_icosphere, random_polygon, random_spd, regular_polygon, star_polygon,
};
use anigreen_core::solver::{evaluate_map, sample_hessian_points, solve, VariationalProblem, Weights, MONOTONE_SLACK};
use anigreen_core::{Cage, KernelContext, Point, SpdMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
}

fn check(name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f();
    let out = Outcome { name, pass, detail, secs: start.elapsed().as_secs_f64() };
    println!("{} {:<28} {} [{:.1} s]", if out.pass { "PASS" } else { "FAIL" }, out.name, out.detail, out.secs);
    out
}

fn random_cage<R: Rng>(rng: &mut R, dim: usize, k: usize) -> Cage {
    if dim == 2 {
        let n = rng.gen_range(4..=32);
        match k % 3 {
            0 => regular_polygon(n, 1.0).unwrap(),
            1 => loop {
                if let Ok(c) = random_polygon(rng, n, 0.3) {
                    break c;
                }
            },
            _ => star_polygon((n / 2).max(2), rng.gen_range(0.35..0.7), 1.0).unwrap(),
        }
    } else {
        match k % 3 {
            0 => cube(),
            1 => icosphere(1),
            _ => perturbed_icosphere(rng, 1, 0.2).unwrap(),
        }
    }
}

fn max_dist(a: &[Point], b: &[Point]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

// Closed forms against quadrature, plus reproduction and partition of unity
// on the same cases.
fn oracle_cases() -> Vec<Outcome> {
    let mut out = Vec::new();
    for dim in [2, 3] {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + dim as u64);
        let (mut gap, mut repro, mut pou) = (0.0f64, 0.0f64, 0.0f64);
        let mut failure = None;
        for k in 0..200 {
            let cage = random_cage(&mut rng, dim, k);
            let a = random_spd(&mut rng, dim, 100.0).unwrap();
            let ctx = KernelContext::new(&cage, &a).unwrap();
            let p = interior_points(&mut rng, &cage, 1, 1e-2).unwrap().remove(0);
            match oracle_gap(&ctx, &p, 1e-10) {
                Ok(g) => gap = gap.max(g.max()),
                Err(e) => failure = Some(format!("case {k}: {e}")),
            }
            let t = compute_coords(&cage, &a, std::slice::from_ref(&p), &CoordOptions::default()).unwrap();
            let mut eta = DVector::zeros(dim);
            for (v, x) in cage.vertices().iter().enumerate() {
                eta += x * t.phi[(0, v)];
            }
            for (j, n) in cage.normals().iter().enumerate() {
                eta += a.entries() * n * t.psi[(0, j)];
            }
            repro = repro.max((eta - &p).norm() / cage.bbox_diagonal());
            pou = pou.max((t.phi.row(0).sum() - 1.0).abs());
        }
        let secs = start.elapsed().as_secs_f64();
        let name = if dim == 2 { "oracle_equivalence_2d" } else { "oracle_equivalence_3d" };
        out.push(Outcome {
            name,
            pass: failure.is_none() && gap <= 1e-6 && secs < 120.0,
            detail: format!(
                "200 cases, max rel gap {gap:.2e} (tol 1e-6), {secs:.1} s (limit 120 s){}",
                failure.map(|f| format!(", {f}")).unwrap_or_default()
            ),
            secs,
        });
        println!(
            "{} {:<28} {}",
            if out.last().unwrap().pass { "PASS" } else { "FAIL" },
            name,
            out.last().unwrap().detail
        );
        let r = Outcome {
            name: if dim == 2 { "linear_reproduction_2d" } else { "linear_reproduction_3d" },
            pass: repro < 1e-8,
            detail: format!("max |sum phi v + sum psi A n - eta| / diag = {repro:.2e} (tol 1e-8)"),
            secs: 0.0,
        };
        println!("{} {:<28} {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
        out.push(r);
        let r = Outcome {
            name: if dim == 2 { "partition_of_unity_2d" } else { "partition_of_unity_3d" },
            pass: pou < 1e-8,
            detail: format!("max |sum phi - 1| = {pou:.2e} (tol 1e-8)"),
            secs: 0.0,
        };
        println!("{} {:<28} {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
        out.push(r);
    }
    out
}

fn isotropic_reduction() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = [0.0f64; 2];
    for k in 0..50 {
        let dim = if k % 2 == 0 { 2 } else { 3 };
        let cage = random_cage(&mut rng, dim, k / 2);
        let id = SpdMatrix::identity(dim).unwrap();
        let p = interior_points(&mut rng, &cage, 1, 1e-2).unwrap().remove(0);
        let t = compute_coords(&cage, &id, std::slice::from_ref(&p), &CoordOptions::default()).unwrap();
        let (phi, psi) = if dim == 2 {
            let poly: Vec<Vector2<f64>> = cage.vertices().iter().map(|v| Vector2::new(v[0], v[1])).collect();
            iso_reference::green_2d(&poly, Vector2::new(p[0], p[1]))
        } else {
            let verts: Vec<Vector3<f64>> = cage.vertices().iter().map(|v| Vector3::new(v[0], v[1], v[2])).collect();
            iso_reference::green_3d(&verts, &cage.triangles(), Vector3::new(p[0], p[1], p[2]))
        };
        let w = &mut worst[dim - 2];
        for (v, x) in phi.iter().enumerate() {
            *w = w.max((t.phi[(0, v)] - x).abs());
        }
        for (j, x) in psi.iter().enumerate() {
            *w = w.max((t.psi[(0, j)] - x).abs());
        }
    }
    (
        worst[0] <= 1e-10 && worst[1] <= 1e-10,
        format!("50 cases, max |difference| 2D {:.2e}, 3D {:.2e} (tol 1e-10)", worst[0], worst[1]),
    )
}

fn perturbed_pair<R: Rng>(rng: &mut R, cage: &Cage) -> CagePair {
    let diag = cage.bbox_diagonal();
    loop {
        let target = cage
            .vertices()
            .iter()
            .map(|v| v + DVector::from_fn(v.len(), |_, _| rng.gen_range(-0.05..0.05) * diag))
            .collect();
        if let Ok(pair) = CagePair::with_target_vertices(cage, target) {
            return pair;
        }
    }
}

fn similarity_equivalence() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut literal, mut scaled) = (0.0f64, 0.0f64);
    let (mut scaled2, mut scaled3) = (0.0f64, 0.0f64);
    for k in 0..50 {
        let dim = if k % 2 == 0 { 2 } else { 3 };
        let cage = random_cage(&mut rng, dim, k / 2);
        let a = random_spd(&mut rng, dim, 100.0).unwrap();
        let pair = perturbed_pair(&mut rng, &cage);
        let pts = interior_points(&mut rng, &cage, 5, 1e-2).unwrap();
        let diag = cage.bbox_diagonal();
        let t = compute_coords(&cage, &a, &pts, &CoordOptions::default()).unwrap();
        let ours = deform(&t, &pair, &a, false).unwrap();
        let reference = similarity_reference_deform(&pair, &a, &pts).unwrap();
        literal = literal.max(max_dist(&ours, &reference) / diag);
        let ours_s = deform(&t, &pair, &a, true).unwrap();
        let reference_s = similarity_deform(&pair, &a, &pts, true).unwrap();
        let e = max_dist(&ours_s, &reference_s) / diag;
        scaled = scaled.max(e);
        if dim == 2 {
            scaled2 = scaled2.max(e);
        } else {
            scaled3 = scaled3.max(e);
        }
    }
    (
        literal <= 1e-8,
        format!(
            "50 pairs, s_j = 1 on both paths: max err / diag {literal:.2e} (tol 1e-8); with scale factors on both paths: 2D {scaled2:.2e}, 3D {scaled3:.2e}"
        ),
    )
}

fn fd_step(cage: &Cage) -> f64 {
    1e-5 * cage.bbox_diagonal()
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.norm();
    if scale > 0.0 {
        (a - b).norm() / scale
    } else {
        (a - b).norm()
    }
}

fn differentials() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let opts = CoordOptions::default();
    let (mut g_err, mut h_err, mut harm) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..1000 {
        let dim = if k % 2 == 0 { 2 } else { 3 };
        let cage = random_cage(&mut rng, dim, k / 2);
        let a = random_spd(&mut rng, dim, 100.0).unwrap();
        let ctx = KernelContext::new(&cage, &a).unwrap();
        let p = interior_points(&mut rng, &cage, 1, 2e-2).unwrap().remove(0);
        let h = fd_step(&cage);
        let mut pts = vec![p.clone()];
        for c in 0..dim {
            for s in [1.0, -1.0] {
                let mut q = p.clone();
                q[c] += s * h;
                pts.push(q);
            }
        }
        let vals = compute_coords(&cage, &a, &pts, &opts).unwrap();
        let diff = compute_differentials(&ctx, &pts, &opts).unwrap();
        let (nv, nf) = (cage.n_vertices(), cage.n_faces());
        let mut gphi = DMatrix::zeros(dim, nv);
        let mut gpsi = DMatrix::zeros(dim, nf);
        for c in 0..dim {
            let (fw, bw) = (1 + 2 * c, 2 + 2 * c);
            gphi.row_mut(c).copy_from(&((vals.phi.row(fw) - vals.phi.row(bw)) / (2.0 * h)));
            gpsi.row_mut(c).copy_from(&((vals.psi.row(fw) - vals.psi.row(bw)) / (2.0 * h)));
        }
        g_err = g_err.max(rel(&diff.grad_phi[0], &gphi)).max(rel(&diff.grad_psi[0], &gpsi));
        // full Hessians from central differences of the analytic gradients
        let order = diff.flatten_order();
        for (an, grads) in [(&diff.hess_phi[0], &diff.grad_phi), (&diff.hess_psi[0], &diff.grad_psi)] {
            let mut fd = DMatrix::zeros(order.len(), an.ncols());
            for (r, &(i, j)) in order.iter().enumerate() {
                let d = (grads[1 + 2 * j].row(i) - grads[2 + 2 * j].row(i)) / (2.0 * h);
                fd.row_mut(r).copy_from(&d);
            }
            h_err = h_err.max(rel(an, &fd));
            let mut worst_h = 0.0f64;
            let mut worst_trace = 0.0f64;
            for col in 0..an.ncols() {
                let mut full = DMatrix::zeros(dim, dim);
                for (r, &(i, j)) in order.iter().enumerate() {
                    full[(i, j)] = an[(r, col)];
                    full[(j, i)] = an[(r, col)];
                }
                worst_h = worst_h.max(full.norm());
                worst_trace = worst_trace.max(a.entries().component_mul(&full).sum().abs());
            }
            if worst_h > 0.0 {
                harm = harm.max(worst_trace / (a.entries().norm() * worst_h));
            }
        }
    }
    (
        g_err <= 1e-5 && h_err <= 1e-4 && harm <= 1e-6,
        format!("1000 triples, gradient rel err {g_err:.2e} (tol 1e-5), Hessian rel err {h_err:.2e} (tol 1e-4), <A,H> rel {harm:.2e} (tol 1e-6)"),
    )
}

fn random_problem<R: Rng>(rng: &mut R, k: usize) -> VariationalProblem {
    let dim = if k.is_multiple_of(2) { 2 } else { 3 };
    let cage = if dim == 2 {
        loop {
            let n = rng.gen_range(5..=12);
            if let Ok(c) = random_polygon(rng, n, 0.5) {
                break c;
            }
        }
    } else if k % 4 == 1 {
        cube()
    } else {
        perturbed_icosphere(rng, 0, 0.15).unwrap()
    };
    let a = random_spd(rng, dim, 10.0).unwrap();
    let mut problem = VariationalProblem::new(cage.clone(), a).unwrap();
    problem.arap_points = anigreen_core::solver::default_arap_points(&cage, 32, k as u64).unwrap();
    let per_face = if dim == 2 { 10 } else { 3 };
    problem.hessian_points = sample_hessian_points(&cage, per_face, 0.01).unwrap().points;
    let diag = cage.bbox_diagonal();
    let m = rng.gen_range(2..=4);
    let qs = interior_points(rng, &cage, m, 0.05).unwrap();
    problem.constraints = qs
        .into_iter()
        .map(|q| {
            let d = DVector::from_fn(dim, |_, _| rng.gen_range(-0.1..0.1) * diag);
            let f = &q + d;
            (q, f)
        })
        .collect();
    problem.weights = match k % 4 {
        0 => Weights::PAPER_2D,
        1 => Weights::PAPER_BAR,
        2 => Weights::PAPER_BOTIJO,
        _ => Weights {
            lambda1: rng.gen_range(1.0..1000.0),
            lambda2: rng.gen_range(0.01..10.0),
            lambda3: rng.gen_range(1e-3..1.0),
        },
    };
    problem
}

fn constraint_residual(problem: &VariationalProblem, state: &anigreen_core::VariationalState) -> f64 {
    let ctx = KernelContext::new(&problem.cage, &problem.a).unwrap();
    let qs: Vec<Point> = problem.constraints.iter().map(|c| c.0.clone()).collect();
    let out = evaluate_map(&ctx, state, &qs).unwrap();
    out.iter().zip(&problem.constraints).map(|(x, c)| (x - &c.1).norm()).fold(0.0, f64::max)
}

fn solver_criteria() -> (bool, String) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut notes = Vec::new();
    let mut ok = true;

    let mut worst_rise = 0.0f64;
    let mut worst_rot = 0.0f64;
    let mut iters = Vec::new();
    for k in 0..20 {
        let problem = random_problem(&mut rng, k);
        match solve(&problem) {
            Ok(st) => {
                let e0 = st.energy_trace[0];
                for w in st.energy_trace.windows(2) {
                    worst_rise = worst_rise.max((w[1] - w[0]) / e0);
                }
                for r in &st.rotations {
                    let d = r.nrows();
                    worst_rot = worst_rot
                        .max((r.transpose() * r - DMatrix::identity(d, d)).norm())
                        .max((r.determinant() - 1.0).abs());
                }
                iters.push(st.iterations);
            }
            Err(e) => {
                ok = false;
                notes.push(format!("problem {k}: {e}"));
            }
        }
    }
    ok &= worst_rise <= MONOTONE_SLACK && worst_rot <= 1e-10;
    notes.push(format!(
        "20 problems monotone (max rise {:.1e} of E0, slack 1e-12), rotations within {worst_rot:.1e}, iterations {}..{}",
        worst_rise.max(0.0),
        iters.iter().min().unwrap_or(&0),
        iters.iter().max().unwrap_or(&0)
    ));

    // translation-consistent constraints
    let mut worst_exact = 0.0f64;
    let mut worst_paper = 0.0f64;
    let mut worst_ratio = 0.0f64;
    let mut energy_ok = true;
    for (k, cage) in
        [star_polygon(5, 0.5, 1.0).unwrap(), regular_polygon(7, 1.0).unwrap(), cube()].into_iter().enumerate()
    {
        let dim = cage.dim();
        let diag = cage.bbox_diagonal();
        let a = random_spd(&mut rng, dim, 10.0).unwrap();
        let t = DVector::from_fn(dim, |_, _| rng.gen_range(-0.2..0.2) * diag);
        let qs = interior_points(&mut rng, &cage, 3, 0.05).unwrap();
        let mut problem = VariationalProblem::new(cage.clone(), a.clone()).unwrap();
        problem.arap_points = anigreen_core::solver::default_arap_points(&cage, 32, 100 + k as u64).unwrap();
        problem.constraints = qs.iter().map(|q| (q.clone(), q + &t)).collect();
        problem.weights = Weights::PAPER_2D;
        let probe = interior_points(&mut rng, &cage, 20, 1e-2).unwrap();
        let ctx = KernelContext::new(&cage, &a).unwrap();
        let moved: Vec<Point> = probe.iter().map(|p| p + &t).collect();

        // Best energy over the maps q + s t: ARAP and Hessian terms vanish,
        // leaving λ₁m(1-s)²|t|² + λ₃n_v s²|t|². The optimum cannot do worse,
        // so its constraint residual is bounded by sqrt(E/λ₁).
        let st = solve(&problem).unwrap();
        let (l1, l3) = (problem.weights.lambda1, problem.weights.lambda3);
        let (m, nv) = (problem.constraints.len() as f64, cage.n_vertices() as f64);
        let family = l1 * m * l3 * nv / (l1 * m + l3 * nv) * t.norm_squared();
        let reached = *st.energy_trace.last().unwrap();
        energy_ok &= reached <= family * (1.0 + 1e-9);
        let bound = (family / l1).sqrt() + 1e-6 * diag;
        worst_ratio = worst_ratio.max(constraint_residual(&problem, &st) / bound);
        worst_paper = worst_paper.max(max_dist(&evaluate_map(&ctx, &st, &probe).unwrap(), &moved) / diag);

        problem.weights.lambda3 = 0.0;
        problem.lambda3_floor = 0.0;
        let st = solve(&problem).unwrap();
        let err = max_dist(&evaluate_map(&ctx, &st, &probe).unwrap(), &moved);
        worst_exact = worst_exact.max(err / diag);
    }
    ok &= worst_exact <= 1e-6 && worst_ratio <= 1.0 && energy_ok;
    notes.push(format!(
        "translation: lambda3 = 0 err/diag {worst_exact:.1e} (tol 1e-6); paper weights residual at {:.2} of the lambda3/lambda1 pull bound, energy below the translation family {energy_ok}, probe err/diag {worst_paper:.1e}",
        worst_ratio
    ));

    // residual against λ₁
    let mut problem = random_problem(&mut rng, 0);
    problem.weights = Weights::PAPER_2D;
    let mut residuals = Vec::new();
    for l1 in [1.0, 10.0, 100.0, 1000.0] {
        problem.weights.lambda1 = l1;
        residuals.push(constraint_residual(&problem, &solve(&problem).unwrap()));
    }
    let monotone = residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    ok &= monotone;
    notes.push(format!(
        "lambda1 sweep residuals {}",
        residuals.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>().join(" > ")
    ));

    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 300.0;
    notes.push(format!("{secs:.1} s (limit 300 s)"));
    (ok, notes.join("; "))
}

fn scale_factors() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let (mut id_err, mut dbl_err) = (0.0f64, 0.0f64);
    for k in 0..20 {
        let dim = if k % 2 == 0 { 2 } else { 3 };
        let cage = random_cage(&mut rng, dim, k / 2);
        let pair = CagePair::identity(cage.clone());
        id_err = id_err.max(pair.scale_factors().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max));
        let doubled = CagePair::with_target_vertices(&cage, cage.vertices().iter().map(|v| v * 2.0).collect()).unwrap();
        dbl_err = dbl_err.max(doubled.scale_factors().iter().map(|s| (s - 2.0).abs()).fold(0.0, f64::max));
    }
    (
        id_err <= 1e-12 && dbl_err <= 1e-12,
        format!("20 cages, |s_j - 1| identity {id_err:.1e}, |s_j - 2| under x2 {dbl_err:.1e}"),
    )
}

const SCENE_2D: &str = r#"{
    "dim": 2,
    "source_cage": { "vertices": [[0,0],[2,0],[2,1],[1.2,1.1],[1,1.8],[0,1]] },
    "target_cage": { "vertices": [[0,0],[2.3,0.1],[2.1,1.2],[1.1,1.3],[1.2,2.0],[-0.2,1]] },
    "matrix": { "theta": "pi/6", "lambdas": [1, 4] },
    "object": { "grid": { "nx": 9, "ny": 5, "bbox": [0.1, 0.1, 1.9, 0.9] } },
    "variational": { "constraints": [ { "source": [0.5, 0.5], "target": [0.6, 0.55] } ], "solver": { "max_iters": 40 } }
}"#;

fn scene_3d(dir: &Path) -> String {
    let ico = icosphere(1);
    std::fs::write(dir.join("cage.obj"), format_obj(ico.vertices(), ico.faces())).unwrap();
    let target: Vec<Point> =
        ico.vertices().iter().map(|v| DVector::from_vec(vec![1.3 * v[0], v[1], 0.8 * v[2] + 0.1 * v[0]])).collect();
    std::fs::write(dir.join("target.obj"), format_obj(&target, ico.faces())).unwrap();
    r#"{
        "dim": 3,
        "source_cage": { "obj": "cage.obj" },
        "target_cage": { "obj": "target.obj" },
        "matrix": { "lambdas": [1, 2, 4], "euler": ["pi/6", "pi/4", 0] },
        "variational": { "constraints": [ { "source": [0, 0, 0.3], "target": [0.1, 0, 0.35] } ],
                         "lambdas": [1000, 0.5, 0.001], "arap_count": 16, "solver": { "max_iters": 20 } }
    }"#
    .to_string()
}

fn cli_determinism() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s2.json"), SCENE_2D).unwrap();
    std::fs::write(dir.path().join("s3.json"), scene_3d(dir.path())).unwrap();
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for scene in ["s2.json", "s3.json"] {
        for (cmd, ext) in [("coords", "agc"), ("deform", "obj"), ("varsolve", "json"), ("metrics", "json")] {
            let mut bytes = Vec::new();
            for round in 0..2 {
                let out = dir.path().join(format!("{scene}.{cmd}.{round}.{ext}"));
                let status = anigreen_cli::run_cli([
                    "anigreen",
                    cmd,
                    dir.path().join(scene).to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                ]);
                if status != 0 {
                    mismatches.push(format!("{cmd} {scene} exit {status}"));
                }
                bytes.push(std::fs::read(&out).unwrap_or_default());
            }
            compared += 1;
            if bytes[0] != bytes[1] || bytes[0].is_empty() {
                mismatches.push(format!("{cmd} {scene}"));
            }
        }
    }
    (
        mismatches.is_empty(),
        format!(
            "{compared} outputs (2D and 3D scenes) byte-identical across two runs{}",
            if mismatches.is_empty() { String::new() } else { format!("; mismatched: {}", mismatches.join(", ")) }
        ),
    )
}

async fn service_echo(addr: SocketAddr, scene: &str) -> Result<f64, String> {
    use futures::{SinkExt, StreamExt};
    use tokio_tungstenite::tungstenite::Message;
    let client = reqwest::Client::new();
    let created: serde_json::Value = client
        .post(format!("http://{addr}/sessions"))
        .body(scene.to_string())
        .send()
        .await
        .map_err(|e| e.to_string())?
        .json()
        .await
        .map_err(|e| e.to_string())?;
    let id = created["id"].as_str().ok_or(format!("create failed: {created}"))?.to_string();
    let info: serde_json::Value = client
        .get(format!("http://{addr}/sessions/{id}/info"))
        .send()
        .await
        .map_err(|e| e.to_string())?
        .json()
        .await
        .map_err(|e| e.to_string())?;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{id}/stream"))
        .await
        .map_err(|e| e.to_string())?;
    let msg = serde_json::json!({"type": "cage_update", "vertices": info["source_vertices"]});
    ws.send(Message::Text(msg.to_string().into())).await.map_err(|e| e.to_string())?;
    let reply = loop {
        match ws.next().await {
            Some(Ok(Message::Text(t))) => {
                break serde_json::from_str::<serde_json::Value>(t.as_str()).map_err(|e| e.to_string())?
            }
            Some(Ok(_)) => continue,
            other => return Err(format!("stream ended: {other:?}")),
        }
    };
    let floats = |v: &serde_json::Value| {
        v.as_array().map(|a| a.iter().filter_map(|x| x.as_f64()).collect::<Vec<f64>>()).unwrap_or_default()
    };
    let out = floats(&reply["vertices"]);
    let object = floats(&info["object"]);
    let src = floats(&info["source_vertices"]);
    if out.len() != object.len() || out.is_empty() {
        return Err(format!("unexpected reply {reply}"));
    }
    let dim = info["dim"].as_u64().unwrap() as usize;
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for (i, x) in src.iter().enumerate() {
        lo[i % dim] = lo[i % dim].min(*x);
        hi[i % dim] = hi[i % dim].max(*x);
    }
    let diag = lo.iter().zip(&hi).map(|(l, h)| (h - l).powi(2)).sum::<f64>().sqrt();
    let mut worst = 0.0f64;
    for (a, b) in out.chunks(dim).zip(object.chunks(dim)) {
        worst = worst.max(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt());
    }
    Ok(worst / diag)
}

fn service_round_trip() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let s3 = scene_3d(dir.path());
    let root = dir.path().to_path_buf();
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(anigreen_service::serve(listener, root));
        let mut details = Vec::new();
        let mut ok = true;
        for (label, scene) in [("2D", SCENE_2D.to_string()), ("3D", s3)] {
            match service_echo(addr, &scene).await {
                Ok(e) => {
                    ok &= e <= 1e-8;
                    details.push(format!("{label} echo err/diag {e:.1e}"));
                }
                Err(e) => {
                    ok = false;
                    details.push(format!("{label} {e}"));
                }
            }
        }
        (ok, format!("{} (tol 1e-8), no UI involved", details.join(", ")))
    })
}

fn main() {
    let start = Instant::now();
    let mut results = oracle_cases();
    results.push(check("isotropic_reduction", isotropic_reduction));
    results.push(check("similarity_equivalence", similarity_equivalence));
    results.push(check("differentials", differentials));
    results.push(check("variational_solver", solver_criteria));
    results.push(check("scale_factors", scale_factors));
    results.push(check("cli_determinism", cli_determinism));
    results.push(check("service_round_trip", service_round_trip));
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.name).collect();
    println!(
        "acceptance: {} passed, {} failed in {:.1} s{}",
        results.len() - failed.len(),
        failed.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!(" ({})", failed.join(", ")) }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
