//! Command-line interface: discrete transport distances on geometric
//! graphs, exact continuum references, heat smoothing, and the experiment
//! drivers. Exit codes: 0 success, 2 configuration or input error, 3
//! excessive solver failures in an experiment run.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use graphot::continuum::{bottleneck_dinf, heat_smooth, wasserstein2, AtomicMeasure};
use graphot::discrete::{solve_wn, DiscreteDensity};
use graphot::graph::build_graph;
use graphot::harness::{
    kernel_moment_check, run_convergence, run_diameter_study, run_eigen_study, ExperimentConfig,
};
use graphot::interp::parse_theta;
use graphot::torus::PointCloud;
use graphot::Result;

#[derive(Parser)]
#[command(
    name = "graphot",
    about = "Discrete and continuum optimal transport on the flat torus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discrete transport distance between two densities on a geometric graph
    Wn {
        /// Point-cloud CSV (columns x0..x{d-1}); the graph is built from it
        #[arg(long)]
        graph: PathBuf,
        /// Neighborhood radius for the graph construction
        #[arg(long)]
        eps: f64,
        /// Interpolation: "arithmetic"/"theta1" or "logarithmic"/"theta2"
        #[arg(long, default_value = "logarithmic")]
        theta: String,
        /// Initial density CSV (single "rho" column, one value per node)
        #[arg(long)]
        rho0: PathBuf,
        /// Terminal density CSV
        #[arg(long)]
        rho1: PathBuf,
        /// Number of time steps
        #[arg(long, default_value_t = 32)]
        t: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Write the solve report as JSON here (stdout otherwise)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact Wasserstein distance between two atomic measures
    W2 {
        /// Measure CSV (columns x0..x{d-1},mass)
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Bottleneck (min-max) matching between equal-size uniform supports
    Dinf {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
    },
    /// Heat-smooth an atomic measure onto a regular grid
    Heat {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        s: f64,
        /// Grid resolution per axis
        #[arg(long, default_value_t = 64)]
        kappa: usize,
        /// Output grid-density CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Distortion experiment: discrete vs rescaled continuum distances
    Converge {
        /// JSON config mirroring ExperimentConfig
        #[arg(long)]
        config: PathBuf,
        /// Per-pair rows CSV
        #[arg(long)]
        rows: Option<PathBuf>,
        /// Per-n summaries JSON
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Complete-graph diameter growth study
    Diameter {
        /// Comma-separated node counts, e.g. 2,4,8,16,32
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, default_value = "logarithmic")]
        theta: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Graph Laplacian eigenvalue study across sizes
    Eigen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numerical check of the kernel second-moment constant
    Moments {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 24)]
        quad: usize,
    },
}

fn read_density(path: &PathBuf) -> Result<DiscreteDensity> {
    let mut r = csv::Reader::from_reader(std::fs::File::open(path)?);
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        values.push(rec[0].trim().parse::<f64>().map_err(|e| {
            graphot::GraphotError::InvalidParameter(format!("bad density value: {e}"))
        })?);
    }
    DiscreteDensity::new(values)
}

fn emit_json(value: &serde_json::Value, out: Option<&PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

/// Runs a subcommand; `Ok(code)` carries the process exit code so that
/// experiment-level failure policies can pick 3 without an error type.
fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Wn {
            graph,
            eps,
            theta,
            rho0,
            rho1,
            t,
            tol,
            out,
        } => {
            let cloud = PointCloud::from_csv(&graph)?;
            let g = build_graph(&cloud, eps)?;
            let th = parse_theta(&theta)?;
            let r0 = read_density(&rho0)?;
            let r1 = read_density(&rho1)?;
            let rep = solve_wn(&g, &th, &r0, &r1, t, tol)?;
            let json = serde_json::json!({
                "distance_upper": rep.distance_upper,
                "action": rep.action,
                "feas_residual": rep.feas_residual,
                "gap_estimate": rep.gap_estimate,
                "iterations": rep.iterations,
                "converged": rep.converged,
                "T": rep.t_steps,
                "theta": rep.theta,
            });
            emit_json(&json, out.as_ref())?;
            Ok(0)
        }
        Command::W2 { mu, nu, tol } => {
            let a = AtomicMeasure::from_csv(&mu)?;
            let b = AtomicMeasure::from_csv(&nu)?;
            let w = wasserstein2(&a, &b, tol)?;
            println!("{w:.12}");
            Ok(0)
        }
        Command::Dinf { mu, nu } => {
            let a = AtomicMeasure::from_csv(&mu)?;
            let b = AtomicMeasure::from_csv(&nu)?;
            let m = bottleneck_dinf(&a, &b)?;
            let json = serde_json::json!({
                "delta": m.delta,
                "assignment": m.assignment,
            });
            emit_json(&json, None)?;
            Ok(0)
        }
        Command::Heat { mu, s, kappa, out } => {
            let a = AtomicMeasure::from_csv(&mu)?;
            let rho = heat_smooth(&a, s, kappa, None)?;
            rho.to_csv(&out)?;
            Ok(0)
        }
        Command::Converge {
            config,
            rows,
            summary,
        } => {
            let cfg = ExperimentConfig::from_json_file(&config)?;
            let report = run_convergence(&cfg)?;
            if let Some(p) = rows.as_ref() {
                report.rows_to_csv(p)?;
            }
            if let Some(p) = summary.as_ref() {
                report.summaries_to_json(p)?;
            }
            let brief = serde_json::json!({
                "summaries": report.summaries,
                "rows_total": report.rows_total,
                "failed_total": report.failed_total,
            });
            emit_json(&brief, None)?;
            if report.failure_fraction() > 0.1 {
                eprintln!(
                    "error: {} of {} solver runs failed to converge",
                    report.failed_total, report.rows_total
                );
                return Ok(3);
            }
            Ok(0)
        }
        Command::Diameter { n, theta, out } => {
            let th = parse_theta(&theta)?;
            let table = run_diameter_study(&n, &th)?;
            let json = serde_json::to_value(&table)?;
            emit_json(&json, out.as_ref())?;
            Ok(0)
        }
        Command::Eigen { config, out } => {
            let cfg = ExperimentConfig::from_json_file(&config)?;
            let rows = run_eigen_study(&cfg)?;
            let json = serde_json::to_value(&rows)?;
            emit_json(&json, out.as_ref())?;
            Ok(0)
        }
        Command::Moments { d, eps, quad } => {
            let rep = kernel_moment_check(d, eps, quad)?;
            let json = serde_json::to_value(&rep)?;
            emit_json(&json, None)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
