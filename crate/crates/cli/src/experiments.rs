//! The four experiments.

use std::fs;
use std::path::Path;
use std::time::Instant;

use mmotflow_core::coupling::reconstruct_pair_marginal;
use mmotflow_core::dual::gradient;
use mmotflow_core::euler_chain::{centered, chain_contract, chain_sinkhorn, euler_ode_solve, ChainSinkhornOptions};
use mmotflow_core::linalg::sup_norm;
use mmotflow_core::ode::{integrate, step_count, IntegrateOptions};
use mmotflow_core::refsolve::{minimize_backtracking, DescentOptions, DescentReport};
use mmotflow_core::sinkhorn_mm::{solve_symmetric_mm, MmSinkhornOptions};
use mmotflow_core::study::convergence_slope;
use mmotflow_core::two_marginal::solve_initial;
use mmotflow_core::{Potential, ProblemParams};

use crate::config::{Config, Experiment};
use crate::output::{float, write_coupling, write_pgm, write_potentials, Report};
use crate::CliError;

/// Two-marginal tolerance for the `eps = 0` potential.
const INITIAL_TOL: f64 = 1e-12;

/// Outcome of one experiment.
#[derive(Debug, Clone)]
pub struct Summary {
    /// One-line human-readable summary.
    pub line: String,
    pub report: Report,
}

/// Runs the configured experiment, writing all files into `out`.
pub fn run(cfg: &Config, out: &Path) -> Result<Summary, CliError> {
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let mut summary = match cfg.experiment {
        Experiment::ConvergenceStudy => convergence_study(cfg, out)?,
        Experiment::Compare => compare(cfg, out)?,
        Experiment::Trajectory => trajectory(cfg, out)?,
        Experiment::Euler => euler(cfg, out)?,
    };
    summary.report.set("wall_seconds", format!("{:.3}", start.elapsed().as_secs_f64()));
    summary.report.write(&out.join("report.txt"))?;
    Ok(summary)
}

fn header(cfg: &Config) -> Report {
    let mut r = Report::default();
    r.set("experiment", cfg.experiment.name());
    r.set("n", cfg.n);
    r.set("m", cfg.m);
    r.set("eta", cfg.eta);
    r
}

fn rel_sup(a: &[f64], reference: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(reference).map(|(x, y)| x - y).collect();
    sup_norm(&diff) / sup_norm(reference).max(f64::MIN_POSITIVE)
}

fn initial(p: &ProblemParams) -> Result<Potential, CliError> {
    Ok(Potential::anchored(solve_initial(p, INITIAL_TOL, 1_000_000)?.phi, p.anchor()))
}

fn reference(cfg: &Config, p: &ProblemParams, phi0: &Potential) -> Result<(Potential, DescentReport), CliError> {
    let opts = DescentOptions {
        tol: cfg.tol,
        ..Default::default()
    };
    Ok(minimize_backtracking(p, 1.0, phi0.values(), opts)?)
}

fn residual(p: &ProblemParams, phi: &[f64], eps: f64) -> Result<f64, CliError> {
    Ok(sup_norm(&gradient(p, phi, eps)?))
}

fn convergence_study(cfg: &Config, out: &Path) -> Result<Summary, CliError> {
    let p = cfg.params()?;
    let grid = p.rho().grid().clone();
    let phi0 = initial(&p)?;
    let (best, rep) = reference(cfg, &p, &phi0)?;
    write_potentials(&out.join("potentials.csv"), &grid, &[(1.0, best.values())])?;

    let mut report = header(cfg);
    report.set("reference_iterations", rep.iterations);
    report.set_float("residual", residual(&p, best.values(), 1.0)?);
    let mut w = csv::Writer::from_path(out.join("convergence.csv"))?;
    w.write_record(["scheme", "h", "relative_error", "wall_seconds"])?;
    let opts = IntegrateOptions {
        eigen_diagnostics: false,
        ..Default::default()
    };
    let mut slopes = Vec::new();
    for &scheme in &cfg.schemes {
        let mut pts = Vec::new();
        for &h in &cfg.h_list {
            let t = Instant::now();
            let traj = integrate(&p, &phi0, scheme, h, opts)?;
            let err = rel_sup(traj.endpoint().values(), best.values());
            let secs = t.elapsed().as_secs_f64();
            w.write_record([scheme.name().to_string(), float(h), float(err), format!("{secs:.3}")])?;
            pts.push((h, err.max(f64::MIN_POSITIVE)));
        }
        let slope = convergence_slope(&pts)?;
        report.set(format!("slope.{}", scheme.name()), format!("{slope:.4}"));
        slopes.push(format!("{}={slope:.3}", scheme.name()));
    }
    w.flush()?;
    Ok(Summary {
        line: format!("convergence_study: slopes {}", slopes.join(" ")),
        report,
    })
}

fn compare(cfg: &Config, out: &Path) -> Result<Summary, CliError> {
    let p = cfg.params()?;
    let grid = p.rho().grid().clone();
    let phi0 = initial(&p)?;
    let (best, rep) = reference(cfg, &p, &phi0)?;
    write_potentials(&out.join("potentials.csv"), &grid, &[(1.0, best.values())])?;

    let mut report = header(cfg);
    report.set_float("h", cfg.h);
    report.set("reference_iterations", rep.iterations);
    report.set_float("residual", residual(&p, best.values(), 1.0)?);
    let mut w = csv::Writer::from_path(out.join("compare.csv"))?;
    w.write_record(["method", "relative_error", "iterations", "wall_seconds"])?;
    let mut row = |name: &str, err: f64, iters: usize, secs: f64, report: &mut Report| -> Result<(), CliError> {
        w.write_record([name.to_string(), float(err), iters.to_string(), format!("{secs:.3}")])?;
        report.set_float(format!("{name}.relative_error"), err);
        report.set(format!("{name}.iterations"), iters);
        report.set(format!("{name}.wall_seconds"), format!("{secs:.3}"));
        Ok(())
    };
    let mut parts = Vec::new();
    for &scheme in &cfg.schemes {
        let t = Instant::now();
        let traj = integrate(
            &p,
            &phi0,
            scheme,
            cfg.h,
            IntegrateOptions {
                eigen_diagnostics: false,
                ..Default::default()
            },
        )?;
        let secs = t.elapsed().as_secs_f64();
        let err = rel_sup(traj.endpoint().values(), best.values());
        row(scheme.name(), err, step_count(cfg.h)?, secs, &mut report)?;
        parts.push(format!("{} {err:.2e}", scheme.name()));
    }
    let t = Instant::now();
    let (sk, sk_rep) = solve_symmetric_mm(
        &p,
        1.0,
        None,
        MmSinkhornOptions {
            tol: cfg.sinkhorn_tol,
            ..Default::default()
        },
    )?;
    let secs = t.elapsed().as_secs_f64();
    let err = rel_sup(sk.values(), best.values());
    row("sinkhorn", err, sk_rep.iterations, secs, &mut report)?;
    parts.push(format!("sinkhorn {err:.2e}"));
    w.flush()?;
    Ok(Summary {
        line: format!("compare: relative errors {}", parts.join(", ")),
        report,
    })
}

fn snapshot_indices(cfg: &Config) -> Result<Vec<(f64, usize)>, CliError> {
    let steps = step_count(cfg.h)? as f64;
    Ok(cfg.snapshots.iter().map(|&s| (s, (s * steps).round() as usize)).collect())
}

fn trajectory(cfg: &Config, out: &Path) -> Result<Summary, CliError> {
    let p = cfg.params()?;
    let grid = p.rho().grid().clone();
    let n = grid.len();
    let phi0 = initial(&p)?;
    let traj = integrate(&p, &phi0, cfg.scheme, cfg.h, IntegrateOptions::default())?;
    let snaps = snapshot_indices(cfg)?;
    let rows: Vec<(f64, &[f64])> = snaps.iter().map(|&(s, k)| (s, traj.potentials[k].values())).collect();
    write_potentials(&out.join("potentials.csv"), &grid, &rows)?;
    for &(s, k) in &snaps {
        let pair = reconstruct_pair_marginal(&p, traj.potentials[k].values(), s)?;
        write_coupling(&out.join(format!("coupling_eps{s}.csv")), &grid, |i, j| pair[(i, j)])?;
        if cfg.heatmap {
            write_pgm(&out.join(format!("coupling_eps{s}.pgm")), n, |i, j| pair[(i, j)])?;
        }
    }

    let end = traj.endpoint().values();
    let res = residual(&p, end, 1.0)?;
    let min_eig = traj
        .diagnostics
        .iter()
        .filter_map(|d| d.min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    let max_phi = traj.diagnostics.iter().map(|d| d.phi_sup).fold(0.0, f64::max);
    let mut report = header(cfg);
    report.set("scheme", cfg.scheme.name());
    report.set_float("h", cfg.h);
    report.set("iterations", traj.eps.len() - 1);
    report.set("spd_solves", traj.spd_solves);
    report.set_float("residual", res);
    report.set_float("min_eigenvalue", min_eig);
    report.set_float("max_phi", max_phi);
    report.set_float("potential_bound", p.potential_bound());
    Ok(Summary {
        line: format!(
            "trajectory: {} h={} residual {res:.2e}, min eigenvalue {min_eig:.2e}, max |phi| {max_phi:.3}",
            cfg.scheme.name(),
            cfg.h
        ),
        report,
    })
}

fn euler(cfg: &Config, out: &Path) -> Result<Summary, CliError> {
    let problem = cfg.euler_problem()?;
    let grid = problem.marginal().grid().clone();
    let (n, m) = (problem.n(), problem.marginals());
    let traj = euler_ode_solve(&problem, cfg.scheme, cfg.h)?;
    let snaps = snapshot_indices(cfg)?;
    for i in 0..m {
        let rows: Vec<(f64, &[f64])> = snaps.iter().map(|&(s, k)| (s, traj.stacks[k].block(i))).collect();
        write_potentials(&out.join(format!("potentials_{}.csv", i + 1)), &grid, &rows)?;
    }
    let end = traj.endpoint();
    let c = chain_contract(&problem, end, 1.0, true)?;
    for j in 1..m {
        let pair = c.pair(0, j).expect("pairs requested");
        write_coupling(&out.join(format!("coupling_1_{}.csv", j + 1)), &grid, |a, b| pair[(a, b)])?;
        if cfg.heatmap {
            write_pgm(&out.join(format!("coupling_1_{}.pgm", j + 1)), n, |a, b| pair[(a, b)])?;
        }
    }
    let rho = problem.rho();
    let res = c
        .one
        .iter()
        .flat_map(|g| g.iter().zip(rho).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    let (sk, sk_rep) = chain_sinkhorn(
        &problem,
        1.0,
        None,
        ChainSinkhornOptions {
            tol: cfg.sinkhorn_tol,
            max_iter: 1_000_000,
        },
    )?;
    let err = rel_sup(end.flat(), sk.flat());
    let first = centered(end.block(0));
    let last = centered(end.block(m - 1));
    let sym = first.iter().zip(&last).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let mut report = header(cfg);
    report.set("scheme", cfg.scheme.name());
    report.set_float("h", cfg.h);
    report.set("iterations", traj.eps.len() - 1);
    report.set("spd_solves", traj.spd_solves);
    report.set_float("residual", res);
    report.set_float("relative_error", err);
    report.set("sinkhorn_sweeps", sk_rep.sweeps);
    report.set_float("phi1_vs_phim", sym);
    Ok(Summary {
        line: format!("euler: {} h={} relative error vs sinkhorn {err:.2e}, phi1 vs phim {sym:.2e}", cfg.scheme.name(), cfg.h),
        report,
    })
}
