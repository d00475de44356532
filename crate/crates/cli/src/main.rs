use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use iwave::billiard::{analyze_dynamics, Billiard, DynamicsOptions, DynamicsReport};
use iwave::deformation::{grid_dump, verify_deformation, DeformationMap, GRID_DUMP_HEADER};
use iwave::escape::{build_escape_field, build_x0, y_of, EscapeField};
use iwave::geometry::DomainSpec;
use iwave::potentials::{branch_study, gaussian_identity_error, kernel_table, layer_ops, CellGrid};
use iwave::report::{svg_chart, svg_document, svg_heatmap, svg_planar, write_csv, write_json, Series};
use iwave::solver::{
    assemble, cycle_polygon, floors, omega_grid, sigma_min_scan, solve_pde, viscosity_sweep, Discretization,
};
use iwave::symbols::{certify_ellipticity, coercivity_at, CertifyOptions};
use iwave::{Error, Sign, C64};

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "IWAVE_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "iwave", version, about = "Internal-wave billiards, deformations and solvers")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Built-in domain: circle, ellipse, superellipse4, ellipse(a,b), superellipse4(rot)
    #[arg(long, global = true)]
    preset: Option<String>,
    /// TOML file with Fourier coefficients of the boundary
    #[arg(long, global = true)]
    domain: Option<PathBuf>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Output directory (default: $IWAVE_OUT_DIR or ./iwave-out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML run configuration; its values override flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Trajectory and graphs of b and b^2
    Billiard {
        #[arg(long, default_value_t = 0.1)]
        t0: f64,
        #[arg(long, default_value_t = 400)]
        steps: usize,
    },
    /// Morse-Smale verdict for b
    CheckMs,
    /// Escape function h and its sign certificates
    Escape,
    /// Deformation certificate and a dump of Xi on a grid
    Deform {
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Ellipticity and coercivity certificates of the deformed symbols
    Symbols {
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Fundamental-solution checks, branch study and boundary kernels
    Potentials {
        #[arg(long)]
        tau: Option<f64>,
        /// Nodes on the boundary for the kernel table
        #[arg(long, default_value_t = 64)]
        n: usize,
    },
    /// Solve P u = f for a centred bump
    Solve {
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        omega_re: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        omega_im: f64,
        /// Comma-separated viscosities; more than one runs a sweep at real omega
        #[arg(long, value_delimiter = ',')]
        nu: Option<Vec<f64>>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Smallest singular values over a box of complex omega
    Eigenscan {
        #[arg(long, value_delimiter = ',')]
        nu: Option<Vec<f64>>,
        /// re_min,re_max,im_min,im_max
        #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true)]
        omega_box: Option<Vec<f64>>,
        #[arg(long = "nre")]
        n_re: Option<usize>,
        #[arg(long = "nim")]
        n_im: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Trajectory and b^2 graph for the rotated superellipse at lambda = 1/sqrt 2
    Figure1 {
        #[arg(long, default_value_t = 400)]
        steps: usize,
    },
}

/// Values read from `--config`; every present field replaces the corresponding flag.
#[derive(Deserialize, Serialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    preset: Option<String>,
    domain: Option<PathBuf>,
    lambda: Option<f64>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    tau: Option<f64>,
    grid: Option<usize>,
    nu: Option<Vec<f64>>,
    #[serde(rename = "box")]
    omega_box: Option<Vec<f64>>,
    n_re: Option<usize>,
    n_im: Option<usize>,
    omega_re: Option<f64>,
    omega_im: Option<f64>,
    steps: Option<usize>,
    t0: Option<f64>,
}

/// A non-zero outcome that is not an error of the inputs.
struct Failed(serde_json::Value);

type Outcome = std::result::Result<Option<Failed>, Error>;

struct Ctx {
    spec: DomainSpec,
    out: PathBuf,
    cfg: RunConfig,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn bil(&self) -> Result<Billiard, Error> {
        Billiard::new(&self.spec)
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
}

fn setup(common: &Common) -> Result<Ctx, Error> {
    let cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let preset = cfg.preset.clone().or_else(|| common.preset.clone());
    let domain = cfg.domain.clone().or_else(|| common.domain.clone());
    let lambda = cfg.lambda.or(common.lambda);
    let spec = match (domain, preset) {
        (Some(path), _) => {
            let s = DomainSpec::from_config_path(&path)?;
            match lambda {
                Some(l) => s.with_lambda(l),
                None => s,
            }
        }
        (None, p) => DomainSpec::preset(p.as_deref().unwrap_or("superellipse4"), lambda)?,
    };
    spec.validate()?;
    let out = cfg
        .out
        .clone()
        .or_else(|| common.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("iwave-out"));
    std::fs::create_dir_all(&out)?;
    if let Some(j) = cfg.jobs.or(common.jobs) {
        if j == 0 {
            return Err(Error::InvalidInput("--jobs must be positive".into()));
        }
        // a second initialisation in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    Ok(Ctx { spec, out, cfg })
}

fn dynamics(bil: &Billiard) -> DynamicsReport {
    analyze_dynamics(&bil.as_map(), &DynamicsOptions::default())
}

fn require_ms(bil: &Billiard) -> Result<(DynamicsReport, EscapeField), Error> {
    let d = dynamics(bil);
    if !d.morse_smale {
        return Err(Error::NotMorseSmale(d.reason.clone()));
    }
    let x0 = build_x0(&bil.as_map(), &d, 4096)?;
    let field = build_escape_field(bil, &x0)?;
    Ok((d, field))
}

fn dmap_for(ctx: &Ctx, tau: f64) -> Result<DeformationMap, Error> {
    let bil = ctx.bil()?;
    let (_, field) = require_ms(&bil)?;
    DeformationMap::from_escape(&bil, &field, tau)
}

fn trajectory_rows(bil: &Billiard, t0: f64, steps: usize) -> Vec<Vec<f64>> {
    bil.trajectory(t0, steps)
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let p = bil.spec.point(t, 0);
            vec![k as f64, t, p[0], p[1]]
        })
        .collect()
}

fn b_rows(bil: &Billiard, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|j| {
            let t = j as f64 / n as f64;
            vec![t, bil.b(t).0, bil.b_pow(t, 2).0]
        })
        .collect()
}

/// Splits a circle-valued graph where it wraps so the chart does not draw vertical jumps.
fn unwrap_graph(rows: &[Vec<f64>], col: usize) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(rows.len());
    for (k, r) in rows.iter().enumerate() {
        if k > 0 && (r[col] - rows[k - 1][col]).abs() > 0.5 {
            pts.push((f64::NAN, f64::NAN));
        }
        pts.push((r[0], r[col]));
    }
    pts
}

fn billiard_svg(bil: &Billiard, traj: &[Vec<f64>], graph: &[Vec<f64>], title: &str) -> String {
    let outline: Vec<(f64, f64)> = (0..=400)
        .map(|j| {
            let p = bil.spec.point(j as f64 / 400.0, 0);
            (p[0], p[1])
        })
        .collect();
    let tail = traj.len().saturating_sub(traj.len() / 4);
    let mut body = String::new();
    svg_planar(
        &mut body,
        (20.0, 30.0, 340.0, 340.0),
        title,
        &[
            Series { label: "boundary", color: "black", points: outline },
            Series {
                label: "trajectory",
                color: "lightsteelblue",
                points: traj[..tail.max(1)].iter().map(|r| (r[2], r[3])).collect(),
            },
            Series {
                label: "late trajectory",
                color: "crimson",
                points: traj[tail.saturating_sub(1)..].iter().map(|r| (r[2], r[3])).collect(),
            },
        ],
    );
    svg_chart(
        &mut body,
        (400.0, 30.0, 340.0, 340.0),
        "b^2(theta) against theta",
        &[
            Series { label: "b^2", color: "crimson", points: unwrap_graph(graph, 2) },
            Series { label: "diagonal", color: "gray", points: vec![(0.0, 0.0), (1.0, 1.0)] },
        ],
    );
    svg_document(760.0, 400.0, &body)
}

fn cmd_billiard(ctx: &Ctx, t0: f64, steps: usize, prefix: &str) -> Outcome {
    let bil = ctx.bil()?;
    let t0 = ctx.cfg.t0.unwrap_or(t0);
    let steps = ctx.cfg.steps.unwrap_or(steps);
    let traj = trajectory_rows(&bil, t0, steps);
    let graph = b_rows(&bil, 1024);
    write_csv(&ctx.path(&format!("{prefix}_trajectory.csv")), &["step", "theta", "x1", "x2"], &traj)?;
    write_csv(&ctx.path(&format!("{prefix}_b2.csv")), &["theta", "b_theta", "b2_theta"], &graph)?;
    std::fs::write(ctx.path(&format!("{prefix}.svg")), billiard_svg(&bil, &traj, &graph, &bil.spec.name))?;
    let d = dynamics(&bil);
    write_json(&ctx.path(&format!("{prefix}.json")), &json!({ "domain": bil.spec.name, "dynamics": d }))?;
    println!("{}", json!({ "command": prefix, "rotation_number": d.rotation_number, "morse_smale": d.morse_smale }));
    Ok(None)
}

fn cmd_check_ms(ctx: &Ctx) -> Outcome {
    let d = dynamics(&ctx.bil()?);
    write_json(&ctx.path("check_ms.json"), &d)?;
    let summary = json!({
        "command": "check-ms",
        "ms": d.morse_smale,
        "reason": d.reason,
        "period": d.period,
        "min_abs_log_multiplier": d.min_abs_log_multiplier,
    });
    println!("{summary}");
    Ok((!d.morse_smale).then_some(Failed(summary)))
}

fn cmd_escape(ctx: &Ctx) -> Outcome {
    let bil = ctx.bil()?;
    let (_, field) = require_ms(&bil)?;
    write_json(&ctx.path("escape.json"), &field)?;
    let h = |t: f64| field.eval(t);
    let rows: Vec<Vec<f64>> = (0..1024)
        .map(|j| {
            let t = j as f64 / 1024.0;
            vec![t, h(t), y_of(&bil, &h, Sign::Plus, t), y_of(&bil, &h, Sign::Minus, t)]
        })
        .collect();
    write_csv(&ctx.path("escape.csv"), &["theta", "h", "Y_plus", "Y_minus"], &rows)?;
    std::fs::write(ctx.path("escape.svg"), field.svg(&bil))?;
    let pass = field.margin_plus_truncated > 0.0 && field.margin_minus_truncated > 0.0;
    let summary = json!({
        "command": "escape",
        "margin_plus": field.margin_plus,
        "margin_minus": field.margin_minus,
        "modes": field.modes,
        "truncation_error": field.truncation_error,
        "pass": pass,
    });
    println!("{summary}");
    Ok((!pass).then_some(Failed(summary)))
}

fn cmd_deform(ctx: &Ctx, tau: Option<f64>, grid: Option<usize>) -> Outcome {
    let tau = ctx.cfg.tau.or(tau).unwrap_or(0.02);
    let grid = ctx.cfg.grid.or(grid).unwrap_or(32);
    let dm = dmap_for(ctx, tau)?;
    let cert = verify_deformation(&dm, grid)?;
    write_json(&ctx.path("deform.json"), &cert)?;
    write_csv(&ctx.path("deform_grid.csv"), &GRID_DUMP_HEADER, &grid_dump(&dm, grid)?)?;
    let summary = json!({ "command": "deform", "tau": tau, "passed": cert.passed() });
    println!("{summary}");
    Ok((!cert.passed()).then_some(Failed(json!({ "certificate": cert }))))
}

fn cmd_symbols(ctx: &Ctx, tau: Option<f64>) -> Outcome {
    let tau = ctx.cfg.tau.or(tau).unwrap_or(0.02);
    let dm = dmap_for(ctx, tau)?;
    let cert = certify_ellipticity(&dm, &CertifyOptions::around(ctx.spec.lambda))?;
    let mut coercive = Vec::new();
    for j in 0..16 {
        for nu in [1e-4, 1e-2, 1.0] {
            coercive.push(coercivity_at(&dm, (j as f64 + 0.5) / 16.0, nu)?);
        }
    }
    let roots_ok = coercive.iter().all(|c| c.expected());
    let pass = cert.inviscid_pass && cert.singular_pass && roots_ok;
    write_json(&ctx.path("symbols.json"), &json!({ "ellipticity": cert, "coercivity": coercive }))?;
    let summary = json!({
        "command": "symbols",
        "c0": cert.c0,
        "inviscid_pass": cert.inviscid_pass,
        "singular_pass": cert.singular_pass,
        "root_counts_pass": roots_ok,
    });
    println!("{summary}");
    Ok((!pass).then_some(Failed(summary)))
}

fn cmd_potentials(ctx: &Ctx, tau: Option<f64>, n: usize) -> Outcome {
    let tau = ctx.cfg.tau.or(tau).unwrap_or(0.02);
    let lambda = ctx.spec.lambda;
    let errs: Vec<f64> = [128, 256]
        .iter()
        .map(|&k| gaussian_identity_error(lambda, CellGrid { n: k, half: 1.0 }, 0.15, [0.0, 0.0]))
        .collect::<Result<_, _>>()?;
    let dm = dmap_for(ctx, tau)?;
    let branch = branch_study(&dm, 12, 10_000)?;
    let table = kernel_table(&dm, n)?;
    write_csv(
        &ctx.path("kernel_k.csv"),
        &["theta", "theta_prime", "re_K_plus", "im_K_plus", "re_K_minus", "im_K_minus"],
        &table,
    )?;
    let sys = layer_ops(&dm, n.max(8) & !1)?;
    let summary = json!({
        "command": "potentials",
        "flat_identity_error": { "n128": errs[0], "n256": errs[1], "ratio": errs[0] / errs[1] },
        "branch": branch,
        "nystrom": {
            "n": sys.data.n,
            "min_branch_angle": sys.min_branch_angle,
            "max_branch_angle": sys.max_branch_angle,
        },
    });
    write_json(&ctx.path("potentials.json"), &summary)?;
    println!("{summary}");
    Ok((!branch.pass).then_some(Failed(summary)))
}

fn solver_disc(ctx: &Ctx, tau: f64, grid: usize) -> Result<Discretization, Error> {
    if tau == 0.0 {
        Discretization::flat(&ctx.spec, grid, grid)
    } else {
        Discretization::deformed(&dmap_for(ctx, tau)?, grid, grid)
    }
}

fn centred_bump(disc: &Discretization) -> Vec<C64> {
    let c = disc.mesh.center;
    disc.sample(|x| C64::new((-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / 0.02).exp(), 0.0))
}

fn cmd_solve(ctx: &Ctx, tau: Option<f64>, omega_re: Option<f64>, omega_im: f64, nu: Option<Vec<f64>>, grid: Option<usize>) -> Outcome {
    let tau = ctx.cfg.tau.or(tau).unwrap_or(0.0);
    let grid = ctx.cfg.grid.or(grid).unwrap_or(64);
    let nus = ctx.cfg.nu.clone().or(nu).unwrap_or_else(|| vec![1e-3]);
    let w = C64::new(ctx.cfg.omega_re.or(omega_re).unwrap_or(ctx.spec.lambda), ctx.cfg.omega_im.unwrap_or(omega_im));
    let disc = solver_disc(ctx, tau, grid)?;
    let f = centred_bump(&disc);
    if nus.len() > 1 {
        let bil = ctx.bil()?;
        let d = dynamics(&bil);
        let t0 = d.orbits.iter().find(|o| !o.repelling).map_or(0.1, |o| o.points[0]);
        let period = d.orbits.first().map_or(2, |o| o.points.len());
        let poly = cycle_polygon(&bil, t0, 0, 2 * period);
        let rows = viscosity_sweep(&disc, &f, w.re, &nus, Some(&poly));
        let table: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| vec![r.nu, r.l2, r.h1, r.correlation.unwrap_or(f64::NAN), r.green_residual])
            .collect();
        write_csv(&ctx.path("sweep.csv"), &["nu", "l2", "h1", "attractor_correlation", "green_residual"], &table)?;
        let cells = disc.mesh.cells();
        let mut body = String::new();
        for (k, r) in rows.iter().enumerate() {
            if r.gradient.is_empty() {
                continue;
            }
            let pts: Vec<([f64; 2], f64)> = cells.iter().zip(&r.gradient).map(|(c, g)| (c.0, *g)).collect();
            svg_heatmap(
                &mut body,
                (20.0 + 300.0 * k as f64, 30.0, 280.0, 280.0),
                &format!("|grad u|, nu = {:e}", r.nu),
                &pts,
                2.0 / grid as f64,
            );
        }
        std::fs::write(ctx.path("sweep.svg"), svg_document(20.0 + 300.0 * rows.len() as f64, 330.0, &body))?;
        let summary = json!({ "command": "solve", "sweep": rows });
        write_json(&ctx.path("solve.json"), &summary)?;
        println!("{summary}");
        return Ok(None);
    }
    let op = assemble(&disc, w, nus[0])?;
    let sol = solve_pde(&disc, &op, &f)?;
    let rows: Vec<Vec<f64>> = disc
        .mesh
        .nodes
        .iter()
        .zip(&sol.u)
        .map(|(x, u)| vec![x[0], x[1], u.re, u.im])
        .collect();
    write_csv(&ctx.path("solution.csv"), &["x1", "x2", "re_u", "im_u"], &rows)?;
    let pts: Vec<([f64; 2], f64)> = disc.mesh.nodes.iter().zip(&sol.u).map(|(x, u)| (*x, u.norm())).collect();
    let mut body = String::new();
    svg_heatmap(&mut body, (20.0, 30.0, 360.0, 360.0), "|u|", &pts, 2.0 / grid as f64);
    std::fs::write(ctx.path("solution.svg"), svg_document(400.0, 410.0, &body))?;
    let summary = json!({
        "command": "solve",
        "tau": tau,
        "omega": [w.re, w.im],
        "nu": nus[0],
        "unknowns": disc.unknowns(),
        "solution": sol,
    });
    write_json(&ctx.path("solve.json"), &summary)?;
    println!("{summary}");
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
fn cmd_eigenscan(
    ctx: &Ctx,
    nu: Option<Vec<f64>>,
    omega_box: Option<Vec<f64>>,
    n_re: Option<usize>,
    n_im: Option<usize>,
    grid: Option<usize>,
    tau: Option<f64>,
) -> Outcome {
    let l = ctx.spec.lambda;
    let nus = ctx.cfg.nu.clone().or(nu).unwrap_or_else(|| vec![1e-3, 3e-4, 1e-4]);
    let b = ctx.cfg.omega_box.clone().or(omega_box).unwrap_or_else(|| vec![l - 0.02, l + 0.02, -0.02, 0.02]);
    if b.len() != 4 || b[0] > b[1] || b[2] > b[3] {
        return Err(Error::InvalidInput("--box needs re_min,re_max,im_min,im_max".into()));
    }
    if nus.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidInput("viscosities must be non-negative".into()));
    }
    let (n_re, n_im) = (ctx.cfg.n_re.or(n_re).unwrap_or(9), ctx.cfg.n_im.or(n_im).unwrap_or(9));
    let grid = ctx.cfg.grid.or(grid).unwrap_or(96);
    let tau = ctx.cfg.tau.or(tau).unwrap_or(0.0);
    let disc = solver_disc(ctx, tau, grid)?;
    let omegas = omega_grid((b[0], b[1]), (b[2], b[3]), n_re, n_im);
    let rows = sigma_min_scan(&disc, &omegas, &nus)?;
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.omega_re, r.omega_im, r.nu, r.sigma_min_raw, r.sigma_min_scaled, r.converged as u8 as f64])
        .collect();
    write_csv(
        &ctx.path("eigenscan.csv"),
        &["omega_re", "omega_im", "nu", "sigma_min_raw", "sigma_min_scaled", "converged"],
        &table,
    )?;
    let fl = floors(&rows, &nus);
    let mut body = String::new();
    let cell = ((b[1] - b[0]) / n_re.max(2) as f64).max((b[3] - b[2]) / n_im.max(2) as f64);
    for (k, &nu) in nus.iter().enumerate() {
        let pts: Vec<([f64; 2], f64)> = rows
            .iter()
            .filter(|r| r.nu == nu)
            .map(|r| ([r.omega_re, r.omega_im], r.sigma_min_scaled))
            .collect();
        svg_heatmap(&mut body, (20.0 + 260.0 * k as f64, 30.0, 240.0, 240.0), &format!("sigma_min, nu = {nu:e}"), &pts, cell);
    }
    std::fs::write(ctx.path("eigenscan.svg"), svg_document(20.0 + 260.0 * nus.len() as f64, 290.0, &body))?;
    let summary = json!({
        "command": "eigenscan",
        "tau": tau,
        "grid": grid,
        "cells": rows.len(),
        "floors": fl,
        "unconverged": rows.iter().filter(|r| !r.converged).count(),
    });
    write_json(&ctx.path("eigenscan.json"), &summary)?;
    println!("{summary}");
    Ok(None)
}

fn cmd_figure1(ctx: &Ctx, steps: usize) -> Outcome {
    let ctx = Ctx {
        spec: DomainSpec::figure1(),
        out: ctx.out.clone(),
        cfg: RunConfig { steps: ctx.cfg.steps, t0: ctx.cfg.t0, ..RunConfig::default() },
    };
    cmd_billiard(&ctx, 0.1, steps, "figure1")?;
    let d = dynamics(&ctx.bil()?);
    Ok((!d.morse_smale).then_some(Failed(json!({ "ms": false, "reason": d.reason }))))
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::Io(_) => "io",
        Error::NotSimple(_) => "not_simple",
        Error::Analyticity { .. } => "analyticity",
        Error::OutsideDomain => "outside_domain",
        Error::NotMorseSmale(_) => "not_morse_smale",
        Error::NoConvergence(_) => "no_convergence",
        Error::Certificate(_) => "certificate",
        Error::Branch(_) => "branch",
        Error::Linear(_) => "linear",
    }
}

fn run(cli: Cli) -> Outcome {
    let ctx = setup(&cli.common)?;
    match cli.command {
        Command::Billiard { t0, steps } => cmd_billiard(&ctx, t0, steps, "billiard"),
        Command::CheckMs => cmd_check_ms(&ctx),
        Command::Escape => cmd_escape(&ctx),
        Command::Deform { tau, grid } => cmd_deform(&ctx, tau, grid),
        Command::Symbols { tau } => cmd_symbols(&ctx, tau),
        Command::Potentials { tau, n } => cmd_potentials(&ctx, tau, n),
        Command::Solve { tau, omega_re, omega_im, nu, grid } => cmd_solve(&ctx, tau, omega_re, omega_im, nu, grid),
        Command::Eigenscan { nu, omega_box, n_re, n_im, grid, tau } => {
            cmd_eigenscan(&ctx, nu, omega_box, n_re, n_im, grid, tau)
        }
        Command::Figure1 { steps } => cmd_figure1(&ctx, steps),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", json!({ "error": "usage", "message": e.to_string() }));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Failed(v))) => {
            eprintln!("{}", json!({ "error": "certificate", "details": v }));
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": kind(&e), "message": e.to_string() }));
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
