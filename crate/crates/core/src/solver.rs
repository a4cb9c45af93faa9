//! End-to-end orchestration: embed a program, prescribe the gain, integrate
//! the homogeneous flow to the prescribed time, classify, and recover a
//! solution or certificate — plus the unconstrained-flow path.

use std::time::{Duration, Instant};

use crate::flows::{
    full_hmcp_rhs, gradient_flow_rhs, newton_flow_rhs, prescribe_gain, FlowError, Scheme,
};
use crate::hmcp::{classify, residual_z, HmcpState, Outcome, OutcomeThresholds, TAU_SAFEGUARD};
use crate::integrator::{integrate, FlowSystem, IntegratorConfig, StopEvent, Trajectory};
use crate::linalg::{norm2, norm_inf, DMat};
use crate::mcp::{kkt_residual, KktResiduals};
use crate::problem::ConvexProgram;
use crate::scalar::Scalar;

/// Configuration of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<F> {
    /// Prescribed settling time of the flow (ODE seconds).
    pub t_p: F,
    pub mu: F,
    /// Initial state is `x_hat(0) = s_hat(0) = init_scale * ones`.
    pub init_scale: F,
    pub thresholds: OutcomeThresholds<F>,
    pub integrator: IntegratorConfig<F>,
    pub record_trajectory: bool,
}

impl<F: Scalar> Default for SolverConfig<F> {
    fn default() -> Self {
        Self {
            t_p: F::one(),
            mu: F::of(2.0),
            init_scale: F::one(),
            thresholds: OutcomeThresholds::default(),
            integrator: IntegratorConfig::default(),
            record_trajectory: false,
        }
    }
}

/// Everything a solve run reports.
#[derive(Debug, Clone)]
pub struct SolveReport<F> {
    pub outcome: Outcome<F>,
    /// KKT residual triple at the recovered point (optimal outcomes only).
    pub kkt: Option<KktResiduals<F>>,
    /// Terminal `(tau, kappa)`; absent for unconstrained solves.
    pub terminal_tau_kappa: Option<(F, F)>,
    /// Terminal residual norm (`||z||`, or the gradient norm for
    /// unconstrained flows).
    pub terminal_residual: F,
    /// Settling event time, when the residual crossed the stop threshold
    /// before `t_p`.
    pub settle_time: Option<F>,
    pub stop_event: StopEvent<F>,
    pub wall_time: Duration,
    pub trajectory: Option<Trajectory<F>>,
    /// Terminal iterate of an unconstrained flow.
    pub x_terminal: Option<Vec<F>>,
    /// Smallest state component seen across the whole integration.
    pub min_state_component: F,
}

/// Problem-scale factor used to put KKT residual thresholds on an affine
/// scale: `||x||_inf + ||y||_inf + ||grad f(x)||_inf + ||g(x)||_inf`.
pub fn kkt_scale<F: Scalar>(program: &ConvexProgram<F>, x: &[F], y: &[F]) -> F {
    let eval = program.evaluate(x, y);
    norm_inf(x) + norm_inf(y) + norm_inf(&eval.grad_f) + norm_inf(&eval.g)
}

/// The homogeneous embedding flow in the integrator's flat layout
/// `[x_hat; s_hat]`.
pub struct HmcpSystem<'a, F: Scalar> {
    program: &'a ConvexProgram<F>,
    k: F,
    mu: F,
    tau_min: F,
}

impl<'a, F: Scalar> HmcpSystem<'a, F> {
    pub fn new(program: &'a ConvexProgram<F>, k: F, mu: F) -> Self {
        Self { program, k, mu, tau_min: F::of(TAU_SAFEGUARD) }
    }

    pub fn residual(&self, state: &HmcpState<F>) -> Vec<F> {
        residual_z(self.program, state, self.tau_min)
    }
}

impl<F: Scalar> FlowSystem<F> for HmcpSystem<'_, F> {
    fn dim(&self) -> usize {
        2 * (self.program.n() + self.program.m() + 1)
    }

    fn rhs(&self, y: &[F], dy: &mut [F]) -> Result<(), FlowError> {
        let state = HmcpState::from_flat(y);
        let deriv = full_hmcp_rhs(self.program, &state, self.k, self.mu, self.tau_min)?;
        let d = state.dim();
        dy[..d].copy_from_slice(&deriv.x_hat_dot);
        dy[d..].copy_from_slice(&deriv.s_hat_dot);
        Ok(())
    }

    fn residual_norm(&self, y: &[F]) -> F {
        let state = HmcpState::from_flat(y);
        norm2(&residual_z(self.program, &state, self.tau_min))
    }

    fn state_floor(&self) -> Option<F> {
        Some(F::of(-1e-9))
    }
}

/// Solves a convex program by integrating the homogeneous fixed-time flow
/// to `t_p` and classifying the retrieved state.
///
/// Never panics on degenerate problems: integration failures surface as an
/// `Indeterminate` outcome with diagnostics attached.
pub fn solve<F: Scalar>(program: &ConvexProgram<F>, config: &SolverConfig<F>) -> SolveReport<F> {
    let started = Instant::now();
    let k = prescribe_gain(config.t_p, config.mu, Scheme::FullHmcp, None)
        .expect("solver config invariants hold");
    let system = HmcpSystem::new(program, k, config.mu);
    let d = program.n() + program.m() + 1;
    let state0 = HmcpState::uniform(d, config.init_scale).to_flat();

    let traj = integrate(&system, &state0, config.t_p, &config.integrator);
    let terminal = HmcpState::from_flat(&traj.final_state);
    let terminal_residual = traj.final_residual;
    let tau = terminal.tau();
    let kappa = terminal.kappa();

    let outcome = if matches!(traj.stop_event, StopEvent::StepFailure { .. }) {
        Outcome::Indeterminate
    } else {
        classify(program.n(), program.m(), &terminal, terminal_residual, &config.thresholds)
    };
    let kkt = match &outcome {
        Outcome::Optimal(point) => Some(kkt_residual(program, &point.x, &point.y)),
        _ => None,
    };

    SolveReport {
        outcome,
        kkt,
        terminal_tau_kappa: Some((tau, kappa)),
        terminal_residual,
        settle_time: traj.settled_at(),
        stop_event: traj.stop_event.clone(),
        wall_time: started.elapsed(),
        min_state_component: traj.min_state_component,
        trajectory: config.record_trajectory.then_some(traj),
        x_terminal: None,
    }
}

/// Smooth unconstrained objective with exact first- and second-order
/// oracles.
pub trait UnconstrainedOracle<F: Scalar>: Send + Sync {
    fn dim(&self) -> usize;
    fn gradient(&self, x: &[F]) -> Vec<F>;
    fn hessian(&self, x: &[F]) -> DMat<F>;
}

/// Convenience quadratic `f(x) = 1/2 x^T Q x + c^T x`.
pub struct QuadraticObjective<F> {
    pub q: DMat<F>,
    pub c: Vec<F>,
}

impl<F: Scalar> UnconstrainedOracle<F> for QuadraticObjective<F> {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn gradient(&self, x: &[F]) -> Vec<F> {
        let mut g = self.q.matvec(x);
        for (gi, &ci) in g.iter_mut().zip(&self.c) {
            *gi = *gi + ci;
        }
        g
    }

    fn hessian(&self, _x: &[F]) -> DMat<F> {
        self.q.clone()
    }
}

struct UnconstrainedSystem<'a, F: Scalar> {
    oracle: &'a dyn UnconstrainedOracle<F>,
    scheme: Scheme,
    k: F,
    mu: F,
}

impl<F: Scalar> FlowSystem<F> for UnconstrainedSystem<'_, F> {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn rhs(&self, y: &[F], dy: &mut [F]) -> Result<(), FlowError> {
        let grad = self.oracle.gradient(y);
        let out = match self.scheme {
            Scheme::GradientFlow => gradient_flow_rhs(&grad, self.k, self.mu),
            Scheme::NewtonFlow => {
                let hess = self.oracle.hessian(y);
                newton_flow_rhs(&grad, &hess, self.k, self.mu)?
            }
            _ => unreachable!("unconstrained solves use gradient or Newton flows"),
        };
        dy.copy_from_slice(&out);
        Ok(())
    }

    fn residual_norm(&self, y: &[F]) -> F {
        norm2(&self.oracle.gradient(y))
    }
}

/// Drives the gradient or Newton fixed-time flow on a strongly convex
/// unconstrained objective from `x0` and reports the terminal iterate and
/// gradient norm.
pub fn solve_unconstrained<F: Scalar>(
    oracle: &dyn UnconstrainedOracle<F>,
    scheme: Scheme,
    x0: &[F],
    m_f: Option<F>,
    config: &SolverConfig<F>,
) -> Result<SolveReport<F>, FlowError> {
    assert!(
        matches!(scheme, Scheme::GradientFlow | Scheme::NewtonFlow),
        "unconstrained solves use gradient or Newton flows"
    );
    let started = Instant::now();
    let k = prescribe_gain(config.t_p, config.mu, scheme, m_f)?;
    let system = UnconstrainedSystem { oracle, scheme, k, mu: config.mu };
    let traj = integrate(&system, x0, config.t_p, &config.integrator);

    let grad_norm = traj.final_residual;
    let outcome = if matches!(traj.stop_event, StopEvent::StepFailure { .. })
        || grad_norm > config.thresholds.residual_tol
    {
        Outcome::Indeterminate
    } else {
        Outcome::Optimal(crate::hmcp::OptimalPoint {
            x: traj.final_state.clone(),
            y: Vec::new(),
            s: Vec::new(),
            v: Vec::new(),
        })
    };

    Ok(SolveReport {
        outcome,
        kkt: None,
        terminal_tau_kappa: None,
        terminal_residual: grad_norm,
        settle_time: traj.settled_at(),
        stop_event: traj.stop_event.clone(),
        wall_time: started.elapsed(),
        min_state_component: traj.min_state_component,
        x_terminal: Some(traj.final_state.clone()),
        trajectory: config.record_trajectory.then_some(traj),
    })
}
