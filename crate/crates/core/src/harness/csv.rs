//! CSV rendering with fixed column orders and mandatory headers.
//!
//! Values use Rust's shortest round-trip float formatting, so identical
//! inputs produce byte-identical files on one platform.

use std::fmt::Write;

use super::experiments::{InfeasibilitySummary, SettlingCurve};
use crate::hmcp::HmcpState;
use crate::integrator::Trajectory;
use crate::Real;

/// Full homogeneous-state trajectory:
/// `t, x_1..x_n, y_1..y_m, tau, s_1..s_n, v_1..v_m, kappa, z_norm`.
pub fn trajectory_csv(n: usize, m: usize, traj: &Trajectory<Real>) -> String {
    let mut out = String::new();
    out.push('t');
    for i in 1..=n {
        let _ = write!(out, ",x_{i}");
    }
    for i in 1..=m {
        let _ = write!(out, ",y_{i}");
    }
    out.push_str(",tau");
    for i in 1..=n {
        let _ = write!(out, ",s_{i}");
    }
    for i in 1..=m {
        let _ = write!(out, ",v_{i}");
    }
    out.push_str(",kappa,z_norm\n");

    for ((t, state), z_norm) in traj.times.iter().zip(&traj.states).zip(&traj.residual_norms) {
        let hmcp = HmcpState::from_flat(state);
        let _ = write!(out, "{t}");
        for v in &hmcp.x_hat {
            let _ = write!(out, ",{v}");
        }
        for v in &hmcp.s_hat {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{z_norm}");
    }
    out
}

/// Per-instance rows of an infeasibility batch:
/// `index, seed, tau, kappa, outcome, detected`.
pub fn infeasibility_csv(summary: &InfeasibilitySummary) -> String {
    let mut out = String::from("index,seed,tau,kappa,outcome,detected\n");
    for row in &summary.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.index, row.seed, row.tau, row.kappa, row.outcome, row.detected
        );
    }
    out
}

/// One settling curve: `t, x_err, z_norm`.
pub fn settling_csv(curve: &SettlingCurve) -> String {
    let mut out = String::from("t,x_err,z_norm\n");
    for s in &curve.samples {
        let _ = writeln!(out, "{},{},{}", s.t, s.x_err, s.z_norm);
    }
    out
}
