//! `settle`: solve convex programs through a prescribed-settling-time ODE,
//! or reproduce the benchmark suites.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use settle_core::harness::csv::{infeasibility_csv, settling_csv, trajectory_csv};
use settle_core::harness::{
    reference_solution, run_infeasibility_experiment, run_settling_experiment, ExperimentSpec,
    RefSolution,
};
use settle_core::hmcp::Outcome;
use settle_core::problem::Family;
use settle_core::solver::SolverConfig;
use settle_core::{parse_problem_file, solve, Program, Real};

const EXIT_OPTIMAL: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_INDETERMINATE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "settle",
    version,
    about = "Convex NLP solver with a prescribed settling time: integrates a \
             fixed-time-stable ODE over a homogeneous complementarity embedding \
             and reads optimality or infeasibility off the settled state."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file; exit code 0 optimal, 2 infeasible, 3 indeterminate.
    Solve(SolveArgs),
    /// Benchmark suites with CSV outputs.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Reference solution (enumeration/barrier oracle), bypassing the ODE.
    Oracle { problem: PathBuf },
}

#[derive(Args)]
struct SolveArgs {
    problem: PathBuf,
    /// Prescribed settling time T_p; the flow gain is mu*pi/(4*T_p).
    #[arg(long, default_value_t = 1.0)]
    tp: Real,
    #[arg(long, default_value_t = 2.0)]
    mu: Real,
    /// Initial homogeneous state is this scale times the all-ones vector.
    #[arg(long = "init-scale", default_value_t = 1.0)]
    init_scale: Real,
    /// Write the sampled trajectory as CSV
    /// (t, x_1..x_n, y_1..y_m, tau, s_1..s_n, v_1..v_m, kappa, z_norm).
    #[arg(long)]
    traj: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Random instances with a contradictory constraint appended; reports
    /// the infeasibility detection rate.
    Infeasible {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        tp: Real,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-instance CSV (index, seed, tau, kappa, outcome, detected).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Settling sweeps on one fixed feasible instance: every prescribed
    /// time at unit start, then every initial scale at the first time.
    Settling {
        #[arg(long, value_enum, default_value_t = FamilyArg::Expsum)]
        family: FamilyArg,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long = "tp-list", value_delimiter = ',',
              default_values_t = [1.0, 0.8, 0.6, 0.4, 0.2, 0.1])]
        tp_list: Vec<Real>,
        #[arg(long = "init-list", value_delimiter = ',',
              default_values_t = [2.0, 5.0, 10.0, 20.0, 40.0, 60.0, 80.0])]
        init_list: Vec<Real>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for one CSV per run (t, x_err, z_norm).
        #[arg(long = "out-dir")]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Lp,
    Qp,
    Expsum,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Lp => Family::Lp,
            FamilyArg::Qp => Family::Qp,
            FamilyArg::Expsum => Family::ExpSum,
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run() -> Result<u8> {
    match Cli::parse().command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Bench(bench) => cmd_bench(bench),
        Command::Oracle { problem } => cmd_oracle(&problem),
    }
}

fn load_program(path: &Path) -> Result<Program> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading problem file {}", path.display()))?;
    parse_problem_file(&text).with_context(|| format!("parsing {}", path.display()))
}

fn format_vec(values: &[Real]) -> String {
    let entries: Vec<String> = values.iter().map(|v| format!("{v:.9}")).collect();
    format!("[{}]", entries.join(", "))
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    let program = load_program(&args.problem)?;
    let config = SolverConfig {
        t_p: args.tp,
        mu: args.mu,
        init_scale: args.init_scale,
        record_trajectory: args.traj.is_some(),
        ..SolverConfig::default()
    };
    let report = solve(&program, &config);

    if let Some(path) = &args.traj {
        let traj = report.trajectory.as_ref().expect("trajectory was recorded");
        fs::write(path, trajectory_csv(program.n(), program.m(), traj))
            .with_context(|| format!("writing {}", path.display()))?;
    }

    let (tau, kappa) = report.terminal_tau_kappa.unwrap_or((Real::NAN, Real::NAN));
    let code = match &report.outcome {
        Outcome::Optimal(point) => {
            println!("outcome: optimal");
            println!("x*: {}", format_vec(&point.x));
            println!("y*: {}", format_vec(&point.y));
            EXIT_OPTIMAL
        }
        Outcome::Infeasible(cert) => {
            println!("outcome: infeasible");
            println!("certificate x_bar/kappa: {}", format_vec(&cert.x_bar));
            println!("certificate s_bar/kappa: {}", format_vec(&cert.s_bar));
            EXIT_INFEASIBLE
        }
        Outcome::Indeterminate => {
            println!("outcome: indeterminate ({:?})", report.stop_event);
            EXIT_INDETERMINATE
        }
    };
    println!("tau: {tau:.6e}");
    println!("kappa: {kappa:.6e}");
    println!("z_norm: {:.6e}", report.terminal_residual);
    if let Some(t) = report.settle_time {
        println!("settled_at: {t:.9}");
    }
    if let Some(kkt) = &report.kkt {
        println!(
            "kkt: stationarity={:.3e} feasibility={:.3e} complementarity={:.3e}",
            kkt.stationarity, kkt.feasibility, kkt.complementarity
        );
    }
    println!("wall: {:?}", report.wall_time);
    Ok(code)
}

fn cmd_bench(bench: BenchCommand) -> Result<u8> {
    match bench {
        BenchCommand::Infeasible { family, count, n, m, tp, seed, out } => {
            let spec = ExperimentSpec {
                family: family.into(),
                count,
                n,
                m,
                seed,
                make_infeasible: true,
                tp_list: vec![tp],
                init_scales: vec![1.0],
            };
            let summary = run_infeasibility_experiment(&spec)?;
            if let Some(path) = out {
                fs::write(&path, infeasibility_csv(&summary))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            println!(
                "detection rate: {}/{} = {:.4}",
                summary.detected,
                summary.count,
                summary.rate()
            );
            Ok(if summary.detected == summary.count { 0 } else { 1 })
        }
        BenchCommand::Settling { family, n, m, tp_list, init_list, seed, out_dir } => {
            let spec = ExperimentSpec {
                family: family.into(),
                count: 1,
                n,
                m,
                seed,
                make_infeasible: false,
                tp_list,
                init_scales: init_list,
            };
            let results = run_settling_experiment(&spec)?;
            if let Some(dir) = &out_dir {
                fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
            }
            for curve in &results.tp_sweep {
                println!(
                    "tp={:<5} init=1  terminal x_err={:.3e} z_norm={:.3e}",
                    curve.t_p, curve.terminal_x_err, curve.terminal_z_norm
                );
                if let Some(dir) = &out_dir {
                    let path = dir.join(format!("settling_tp_{}.csv", curve.t_p));
                    fs::write(&path, settling_csv(curve))
                        .with_context(|| format!("writing {}", path.display()))?;
                }
            }
            for curve in &results.init_sweep {
                println!(
                    "tp={:<5} init={:<3} terminal x_err={:.3e} z_norm={:.3e}",
                    curve.t_p, curve.init_scale, curve.terminal_x_err, curve.terminal_z_norm
                );
                if let Some(dir) = &out_dir {
                    let path = dir.join(format!("settling_init_{}.csv", curve.init_scale));
                    fs::write(&path, settling_csv(curve))
                        .with_context(|| format!("writing {}", path.display()))?;
                }
            }
            Ok(0)
        }
    }
}

fn cmd_oracle(path: &Path) -> Result<u8> {
    let program = load_program(path)?;
    match reference_solution(&program)? {
        RefSolution::Optimal { x, y } => {
            println!("outcome: optimal");
            println!("x*: {}", format_vec(&x));
            println!("y*: {}", format_vec(&y));
            Ok(EXIT_OPTIMAL)
        }
        RefSolution::Infeasible => {
            println!("outcome: infeasible");
            Ok(EXIT_INFEASIBLE)
        }
    }
}
