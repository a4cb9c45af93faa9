//! The two simulation-study suites: infeasibility detection over random
//! instance batches, and settling-time sweeps on a fixed feasible instance.

use rayon::prelude::*;
use thiserror::Error;

use super::generate::generate_random;
use super::oracle::{reference_solution, OracleError, RefSolution};
use crate::hmcp::{HmcpState, Outcome, TAU_SAFEGUARD};
use crate::linalg::norm2;
use crate::problem::Family;
use crate::solver::{solve, SolverConfig};
use crate::Real;

/// Parameters of one experiment batch. The same seed always reproduces the
/// same problems bit for bit; instance `i` uses stream seed `seed + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub family: Family,
    pub count: usize,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub make_infeasible: bool,
    pub tp_list: Vec<Real>,
    pub init_scales: Vec<Real>,
}

impl ExperimentSpec {
    pub fn instance_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("experiment needs at least one prescribed settling time")]
    EmptyTpList,
    #[error("reference oracle failed: {0}")]
    Oracle(#[from] OracleError),
    #[error("settling experiments need a feasible instance, got an infeasible one")]
    InfeasibleInstance,
}

/// One row of the infeasibility-detection batch.
#[derive(Debug, Clone)]
pub struct InfeasibilityRow {
    pub index: usize,
    pub seed: u64,
    pub tau: Real,
    pub kappa: Real,
    pub outcome: &'static str,
    pub detected: bool,
    /// Smallest state component over the run (nonnegativity diagnostic).
    pub min_state_component: Real,
}

#[derive(Debug, Clone)]
pub struct InfeasibilitySummary {
    pub rows: Vec<InfeasibilityRow>,
    pub detected: usize,
    pub count: usize,
}

impl InfeasibilitySummary {
    pub fn rate(&self) -> Real {
        self.detected as Real / self.count.max(1) as Real
    }
}

fn outcome_label<F>(outcome: &Outcome<F>) -> &'static str {
    match outcome {
        Outcome::Optimal(_) => "optimal",
        Outcome::Infeasible(_) => "infeasible",
        Outcome::Indeterminate => "indeterminate",
    }
}

/// Solves `count` random instances (augmented with the contradictory row
/// when `make_infeasible` is set) and tallies how many are reported
/// infeasible. Step failures count as missed detections, not crashes.
pub fn run_infeasibility_experiment(
    spec: &ExperimentSpec,
) -> Result<InfeasibilitySummary, ExperimentError> {
    let t_p = *spec.tp_list.first().ok_or(ExperimentError::EmptyTpList)?;
    let config = SolverConfig { t_p, ..SolverConfig::default() };

    let rows: Vec<InfeasibilityRow> = (0..spec.count)
        .into_par_iter()
        .map(|index| {
            let seed = spec.instance_seed(index);
            let mut program = generate_random(spec.family, spec.n, spec.m, seed);
            if spec.make_infeasible {
                program = program.augment_infeasible().expect("built-in families augment");
            }
            let report = solve(&program, &config);
            let (tau, kappa) = report.terminal_tau_kappa.unwrap_or((Real::NAN, Real::NAN));
            InfeasibilityRow {
                index,
                seed,
                tau,
                kappa,
                outcome: outcome_label(&report.outcome),
                detected: report.outcome.is_infeasible(),
                min_state_component: report.min_state_component,
            }
        })
        .collect();

    let detected = rows.iter().filter(|r| r.detected).count();
    Ok(InfeasibilitySummary { rows, detected, count: spec.count })
}

/// One sampled point of a settling curve.
#[derive(Debug, Clone, Copy)]
pub struct SettlingSample {
    pub t: Real,
    /// `||x(t)/tau(t) - x*||` against the reference optimum.
    pub x_err: Real,
    pub z_norm: Real,
}

/// Error trajectory of one run of the settling study.
#[derive(Debug, Clone)]
pub struct SettlingCurve {
    pub t_p: Real,
    pub init_scale: Real,
    pub samples: Vec<SettlingSample>,
    pub terminal_x_err: Real,
    pub terminal_z_norm: Real,
    /// Smallest state component over the run (nonnegativity diagnostic).
    pub min_state_component: Real,
}

#[derive(Debug, Clone)]
pub struct SettlingResults {
    pub x_star: Vec<Real>,
    /// One curve per prescribed settling time, at the default unit start.
    pub tp_sweep: Vec<SettlingCurve>,
    /// One curve per initial scale, at the first prescribed settling time.
    pub init_sweep: Vec<SettlingCurve>,
}

/// Runs both sweeps of the settling study on one feasible generated
/// instance: prescribed times from `tp_list` at unit initial scale, then
/// initial scales from `init_scales` at `tp_list[0]`.
pub fn run_settling_experiment(spec: &ExperimentSpec) -> Result<SettlingResults, ExperimentError> {
    if spec.tp_list.is_empty() {
        return Err(ExperimentError::EmptyTpList);
    }
    let program = generate_random(spec.family, spec.n, spec.m, spec.seed);
    let x_star = match reference_solution(&program)? {
        RefSolution::Optimal { x, .. } => x,
        RefSolution::Infeasible => return Err(ExperimentError::InfeasibleInstance),
    };

    let run_one = |t_p: Real, init_scale: Real| -> SettlingCurve {
        let config = SolverConfig {
            t_p,
            init_scale,
            record_trajectory: true,
            ..SolverConfig::default()
        };
        let report = solve(&program, &config);
        let traj = report.trajectory.expect("trajectory recording was requested");
        let n = program.n();
        let samples: Vec<SettlingSample> = traj
            .times
            .iter()
            .zip(&traj.states)
            .zip(&traj.residual_norms)
            .map(|((&t, state), &z_norm)| {
                let hmcp = HmcpState::from_flat(state);
                let tau = hmcp.tau().max(TAU_SAFEGUARD);
                let diff: Vec<Real> = hmcp.x_bar()[..n]
                    .iter()
                    .zip(&x_star)
                    .map(|(&xi, &si)| xi / tau - si)
                    .collect();
                SettlingSample { t, x_err: norm2(&diff), z_norm }
            })
            .collect();
        let terminal = samples.last().copied().expect("trajectory has samples");
        SettlingCurve {
            t_p,
            init_scale,
            samples,
            terminal_x_err: terminal.x_err,
            terminal_z_norm: terminal.z_norm,
            min_state_component: traj.min_state_component,
        }
    };

    let tp_sweep: Vec<SettlingCurve> =
        spec.tp_list.par_iter().map(|&t_p| run_one(t_p, 1.0)).collect();
    let init_sweep: Vec<SettlingCurve> = spec
        .init_scales
        .par_iter()
        .map(|&scale| run_one(spec.tp_list[0], scale))
        .collect();

    Ok(SettlingResults { x_star, tp_sweep, init_sweep })
}
