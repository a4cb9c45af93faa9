//! Adaptive implicit integration of the stiff, non-Lipschitz-at-equilibrium
//! flows, with event-based stopping and dense trajectory output.
//!
//! The scheme is the classical 5-stage SDIRK of order 4 with diagonal 1/4:
//! L-stable, stiffly accurate, with an embedded third-order error estimate
//! filtered through the stage matrix. All stages share one iteration matrix
//! per step. Implicit stages are solved by a simplified Newton iteration
//! against a finite-difference Jacobian of the right-hand side, refreshed
//! every step.
//!
//! Two behaviors matter for the fixed-time flows:
//! * steps are capped at a fraction of `residual / |d residual/dt|`, so the
//!   integrator approaches the settling point geometrically instead of
//!   stepping across the non-Lipschitz origin, and
//! * integration stops by event when the residual norm falls below
//!   `stop_residual`, freezing the state for the remaining samples.

use crate::flows::FlowError;
use crate::linalg::{norm2, DMat, Lu};
use crate::scalar::Scalar;

/// A flow the integrator can drive.
pub trait FlowSystem<F: Scalar> {
    fn dim(&self) -> usize;

    /// Writes the derivative of `y` into `dy`.
    fn rhs(&self, y: &[F], dy: &mut [F]) -> Result<(), FlowError>;

    /// Norm whose decay to zero defines settling (for the homogeneous flow,
    /// `||z||`).
    fn residual_norm(&self, y: &[F]) -> F;

    /// Smallest admissible state component; steps below it are rejected and
    /// retried with half the step. `None` leaves the state unconstrained.
    fn state_floor(&self) -> Option<F> {
        None
    }
}

/// Plain ODE adapter: any closure with the Euclidean state norm as the
/// residual.
pub struct OdeFn<G> {
    dim: usize,
    f: G,
}

impl<G> OdeFn<G> {
    pub fn new(dim: usize, f: G) -> Self {
        Self { dim, f }
    }
}

impl<F: Scalar, G: Fn(&[F], &mut [F])> FlowSystem<F> for OdeFn<G> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, y: &[F], dy: &mut [F]) -> Result<(), FlowError> {
        (self.f)(y, dy);
        Ok(())
    }

    fn residual_norm(&self, y: &[F]) -> F {
        norm2(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<F> {
    pub rel_tol: F,
    pub abs_tol: F,
    /// Residual norm below which the settling event fires.
    pub stop_residual: F,
    pub max_steps: usize,
    /// First step size; `None` uses `1e-6 * t_end`.
    pub initial_step: Option<F>,
    /// Number of uniformly spaced sample times recorded over `[0, t_end]`.
    pub sample_count: usize,
}

impl<F: Scalar> Default for IntegratorConfig<F> {
    fn default() -> Self {
        Self {
            rel_tol: F::of(1e-8),
            abs_tol: F::of(1e-10),
            stop_residual: F::of(1e-10),
            max_steps: 1_000_000,
            initial_step: None,
            sample_count: 200,
        }
    }
}

/// Why an integration ended.
#[derive(Debug, Clone, PartialEq)]
pub enum StopEvent<F> {
    /// Integrated through `t_end` without settling.
    ReachedEnd,
    /// Residual norm crossed `stop_residual`; the state is frozen from
    /// `time` onward.
    ResidualSettled { time: F },
    /// The step controller gave up; the trajectory is partial.
    StepFailure { reason: String, time: F },
}

/// Time-stamped samples of the state plus residual norms.
#[derive(Debug, Clone)]
pub struct Trajectory<F> {
    pub times: Vec<F>,
    pub states: Vec<Vec<F>>,
    pub residual_norms: Vec<F>,
    pub stop_event: StopEvent<F>,
    pub final_time: F,
    pub final_state: Vec<F>,
    pub final_residual: F,
    /// Smallest state component seen across accepted steps and samples.
    pub min_state_component: F,
    /// Accepted step count.
    pub steps: usize,
}

impl<F: Scalar> Trajectory<F> {
    pub fn settled_at(&self) -> Option<F> {
        match self.stop_event {
            StopEvent::ResidualSettled { time } => Some(time),
            _ => None,
        }
    }
}

const STAGES: usize = 5;

// SDIRK4: 5 stages, diagonal 1/4, order 4, L-stable and stiffly accurate
// (the weights are the last stage row). `e = b - b_hat` carries the
// embedded order-3 error estimate.
fn tableau<F: Scalar>() -> ([[F; STAGES]; STAGES], [F; STAGES], F) {
    let f = |num: f64, den: f64| F::of(num / den);
    let a = [
        [f(1.0, 4.0), F::zero(), F::zero(), F::zero(), F::zero()],
        [f(1.0, 2.0), f(1.0, 4.0), F::zero(), F::zero(), F::zero()],
        [f(17.0, 50.0), f(-1.0, 25.0), f(1.0, 4.0), F::zero(), F::zero()],
        [f(371.0, 1360.0), f(-137.0, 2720.0), f(15.0, 544.0), f(1.0, 4.0), F::zero()],
        [f(25.0, 24.0), f(-49.0, 48.0), f(125.0, 16.0), f(-85.0, 12.0), f(1.0, 4.0)],
    ];
    let e = [f(-3.0, 16.0), f(-27.0, 32.0), f(25.0, 32.0), F::zero(), f(1.0, 4.0)];
    (a, e, f(1.0, 4.0))
}

struct StepWorkspace<F> {
    dim: usize,
    base_f: Vec<F>,
    k: Vec<Vec<F>>,
    stage: Vec<F>,
    resid: Vec<F>,
    scratch: Vec<F>,
}

impl<F: Scalar> StepWorkspace<F> {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            base_f: vec![F::zero(); dim],
            k: vec![vec![F::zero(); dim]; STAGES],
            stage: vec![F::zero(); dim],
            resid: vec![F::zero(); dim],
            scratch: vec![F::zero(); dim],
        }
    }
}

/// Integrates `dy/dt = rhs(y)` from `state0` over `[0, t_end]`.
///
/// Local error per step is controlled against `abs_tol`/`rel_tol` via the
/// embedded estimate; the run stops early when the system's residual norm
/// falls below `stop_residual`, with the event time bracketed to 1e-9 by
/// bisection on the sign of `residual - stop_residual` along the crossing
/// step.
pub fn integrate<F: Scalar, S: FlowSystem<F>>(
    system: &S,
    state0: &[F],
    t_end: F,
    config: &IntegratorConfig<F>,
) -> Trajectory<F> {
    let dim = system.dim();
    assert_eq!(state0.len(), dim, "state dimension mismatch");
    assert!(t_end > F::zero(), "t_end must be positive");
    let sample_count = config.sample_count.max(2);
    let grid: Vec<F> = (0..sample_count)
        .map(|i| t_end * F::of(i as f64) / F::of((sample_count - 1) as f64))
        .collect();

    let mut traj = Trajectory {
        times: Vec::with_capacity(sample_count),
        states: Vec::with_capacity(sample_count),
        residual_norms: Vec::with_capacity(sample_count),
        stop_event: StopEvent::ReachedEnd,
        final_time: F::zero(),
        final_state: state0.to_vec(),
        final_residual: system.residual_norm(state0),
        min_state_component: min_component(state0),
        steps: 0,
    };

    let mut y = state0.to_vec();
    let mut t = F::zero();
    let mut res = traj.final_residual;
    record_sample(&mut traj, grid[0], &y, res);
    let mut next_sample = 1;

    if res < config.stop_residual {
        freeze(&mut traj, &grid, next_sample, t, &y, res);
        traj.stop_event = StopEvent::ResidualSettled { time: t };
        return traj;
    }

    let h_min = F::of(1e-15) * t_end;
    let mut h = config.initial_step.unwrap_or(F::of(1e-6) * t_end).max(h_min);
    let mut ws = StepWorkspace::new(dim);
    let (a_coef, e_weights, diag) = tableau::<F>();
    let mut attempts = 0usize;
    let mut consecutive_rejects = 0usize;

    'outer: loop {
        if t >= t_end {
            traj.stop_event = StopEvent::ReachedEnd;
            break;
        }
        attempts += 1;
        if attempts > config.max_steps {
            traj.stop_event = StopEvent::StepFailure {
                reason: format!("exceeded max_steps = {}", config.max_steps),
                time: t,
            };
            break;
        }

        // Base derivative; failure here means the accepted state itself is
        // out of domain and no step size will help.
        if let Err(e) = system.rhs(&y, &mut ws.base_f) {
            traj.stop_event = StopEvent::StepFailure {
                reason: format!("right-hand side failed at accepted state: {e}"),
                time: t,
            };
            break;
        }

        // Residual-guided cap: keep |expected residual drop| below half the
        // current residual so the flow never steps across its equilibrium.
        let res_rate = residual_rate(system, &y, &ws.base_f, res);
        let mut h_cap = t_end;
        if let Some(rate) = res_rate {
            if rate < F::zero() {
                h_cap = (F::of(0.5) * res / -rate).max(h_min);
            }
        }

        let mut h_try = h.min(h_cap);
        // Land exactly on the next sample time (and on t_end).
        let t_target = grid[next_sample.min(sample_count - 1)];
        let mut hit_target = false;
        if t + h_try >= t_target - F::of(1e-14) * t_end {
            h_try = t_target - t;
            hit_target = true;
        }
        if h_try < h_min {
            traj.stop_event = StopEvent::StepFailure {
                reason: "step size underflow".into(),
                time: t,
            };
            break;
        }

        // Error is controlled per unit step (estimate <= tol * h / t_end),
        // so terminal accuracy tracks the tolerances themselves; the stage
        // iteration must then resolve well below the allowed local error.
        let err_allowance = h_try / t_end;
        let newton_tol = (F::of(0.05) * err_allowance).max(F::of(1e-7));

        match attempt_step(
            system,
            &y,
            h_try,
            diag,
            &a_coef,
            &e_weights,
            config,
            &mut ws,
            newton_tol,
            err_allowance,
        ) {
            StepAttempt::Accepted { y_new, error } => {
                if let Some(floor) = system.state_floor() {
                    if min_component(&y_new) < floor {
                        // Positivity is preserved by the exact flow; a dip
                        // below the floor is discretization error.
                        h = (h_try * F::of(0.5)).max(h_min);
                        consecutive_rejects += 1;
                        if consecutive_rejects > 60 {
                            traj.stop_event = StopEvent::StepFailure {
                                reason: "persistent state-floor rejections".into(),
                                time: t,
                            };
                            break 'outer;
                        }
                        continue;
                    }
                }
                consecutive_rejects = 0;
                let t_new = if hit_target { t_target } else { t + h_try };
                let res_new = system.residual_norm(&y_new);
                traj.steps += 1;
                traj.min_state_component = traj.min_state_component.min(min_component(&y_new));

                if res_new < config.stop_residual {
                    let (t_star, y_star, res_star) =
                        bracket_event(system, t, &y, t_new, &y_new, config.stop_residual);
                    freeze(&mut traj, &grid, next_sample, t_star, &y_star, res_star);
                    traj.stop_event = StopEvent::ResidualSettled { time: t_star };
                    break 'outer;
                }

                y = y_new;
                t = t_new;
                res = res_new;
                if hit_target {
                    record_sample(&mut traj, t_target, &y, res);
                    next_sample += 1;
                    if next_sample >= sample_count {
                        traj.stop_event = StopEvent::ReachedEnd;
                        break 'outer;
                    }
                }
                traj.final_time = t;
                traj.final_state = y.clone();
                traj.final_residual = res;

                // Per-unit-step error behaves like h^3 for this pair.
                let third = F::of(1.0 / 3.0);
                let factor = (F::of(0.8) * error.powf(-third)).max(F::of(0.25)).min(F::of(5.0));
                h = (h_try * factor).max(h_min);
            }
            StepAttempt::ErrorTooLarge { error } => {
                consecutive_rejects += 1;
                let third = F::of(1.0 / 3.0);
                let factor = (F::of(0.8) * error.powf(-third)).max(F::of(0.1)).min(F::of(0.5));
                h = (h_try * factor).max(h_min);
                if h <= h_min && consecutive_rejects > 60 {
                    traj.stop_event = StopEvent::StepFailure {
                        reason: "persistent error-control rejections at minimum step".into(),
                        time: t,
                    };
                    break;
                }
            }
            StepAttempt::StageFailed => {
                consecutive_rejects += 1;
                h = (h_try * F::of(0.5)).max(h_min);
                if consecutive_rejects > 60 {
                    traj.stop_event = StopEvent::StepFailure {
                        reason: "implicit stage repeatedly failed to converge".into(),
                        time: t,
                    };
                    break;
                }
            }
        }
    }

    if matches!(traj.stop_event, StopEvent::ReachedEnd) {
        traj.final_time = t_end;
        traj.final_state = y.clone();
        traj.final_residual = res;
    }
    traj
}

enum StepAttempt<F> {
    Accepted { y_new: Vec<F>, error: F },
    ErrorTooLarge { error: F },
    StageFailed,
}

#[allow(clippy::too_many_arguments)]
fn attempt_step<F: Scalar, S: FlowSystem<F>>(
    system: &S,
    y: &[F],
    h: F,
    diag: F,
    a_coef: &[[F; STAGES]; STAGES],
    e_weights: &[F; STAGES],
    config: &IntegratorConfig<F>,
    ws: &mut StepWorkspace<F>,
    newton_tol: F,
    err_allowance: F,
) -> StepAttempt<F> {
    let dim = ws.dim;

    // Finite-difference Jacobian at y, then the iteration matrix
    // M = I - h*gamma*J shared by every stage.
    let jac = match fd_jacobian(system, y, &ws.base_f, &mut ws.scratch, &mut ws.stage) {
        Some(j) => j,
        None => return StepAttempt::StageFailed,
    };
    let mut m = jac.scaled(-h * diag);
    for i in 0..dim {
        m[(i, i)] = m[(i, i)] + F::one();
    }
    let lu = match Lu::factor(&m) {
        Ok(lu) => lu,
        Err(_) => return StepAttempt::StageFailed,
    };

    // Y_i = y + h sum_{j<i} a_ij k_j + h*gamma*f(Y_i), k_i recovered
    // algebraically from the converged stage.
    let mut y_stage = y.to_vec();
    for i in 0..STAGES {
        let c_i: Vec<F> = (0..dim)
            .map(|d| {
                let mut acc = y[d];
                for (j, kj) in ws.k.iter().enumerate().take(i) {
                    acc = acc + h * a_coef[i][j] * kj[d];
                }
                acc
            })
            .collect();
        y_stage = match solve_stage(system, &c_i, &y_stage, h, diag, &lu, config, newton_tol, ws) {
            Some(v) => v,
            None => return StepAttempt::StageFailed,
        };
        for d in 0..dim {
            ws.k[i][d] = (y_stage[d] - c_i[d]) / (h * diag);
        }
    }
    let y3 = y_stage; // stiffly accurate: the last stage is y_{n+1}

    // Embedded error, filtered through M for stiff robustness.
    let raw: Vec<F> = (0..dim)
        .map(|d| {
            let mut acc = F::zero();
            for (i, ki) in ws.k.iter().enumerate() {
                acc = acc + e_weights[i] * ki[d];
            }
            h * acc
        })
        .collect();
    let est = lu.solve(&raw);
    let est_wrms = wrms(&est, y, &y3, config);
    if !est_wrms.is_finite() {
        return StepAttempt::StageFailed;
    }
    // The stage recoveries k_i = (Y_i - C_i)/(h d) put the estimate's
    // roundoff floor near eps/rel_tol regardless of h; estimates at that
    // floor carry no information and are accepted.
    let roundoff_floor = F::of(10.0) * F::epsilon() / config.rel_tol;
    let error = est_wrms / err_allowance;
    if est_wrms <= roundoff_floor {
        // the estimate carries no information at the floor; treat the step
        // as excellent and let the caps rein the growth in
        return StepAttempt::Accepted { y_new: y3, error: F::of(0.04) };
    }
    if error <= F::one() {
        StepAttempt::Accepted { y_new: y3, error: error.max(F::of(0.04)) }
    } else {
        StepAttempt::ErrorTooLarge { error }
    }
}

/// Newton iteration for `Y = c + h*d*f(Y)`, warm-started from an explicit
/// predictor with fallback to the simpler base point.
#[allow(clippy::too_many_arguments)]
fn solve_stage<F: Scalar, S: FlowSystem<F>>(
    system: &S,
    c: &[F],
    start: &[F],
    h: F,
    diag: F,
    lu: &Lu<F>,
    config: &IntegratorConfig<F>,
    newton_tol: F,
    ws: &mut StepWorkspace<F>,
) -> Option<Vec<F>> {
    let dim = ws.dim;
    let mut yk = start.to_vec();
    let mut last_norm = F::infinity();
    for _iter in 0..8 {
        if system.rhs(&yk, &mut ws.stage).is_err() {
            return None;
        }
        for i in 0..dim {
            ws.resid[i] = c[i] + h * diag * ws.stage[i] - yk[i];
        }
        let delta = lu.solve(&ws.resid);
        for i in 0..dim {
            yk[i] = yk[i] + delta[i];
        }
        let dn = wrms(&delta, &yk, &yk, config);
        if !dn.is_finite() {
            return None;
        }
        if dn <= newton_tol {
            return Some(yk);
        }
        if dn > F::of(2.0) * last_norm {
            return None; // diverging
        }
        last_norm = dn;
    }
    None
}

fn fd_jacobian<F: Scalar, S: FlowSystem<F>>(
    system: &S,
    y: &[F],
    f0: &[F],
    pert: &mut [F],
    out_col: &mut [F],
) -> Option<DMat<F>> {
    let dim = y.len();
    let mut jac = DMat::zeros(dim, dim);
    let sqrt_eps = F::epsilon().sqrt();
    pert.copy_from_slice(y);
    for j in 0..dim {
        let mut delta = sqrt_eps * y[j].abs().max(F::of(1e-5));
        let mut ok = false;
        for _ in 0..2 {
            pert[j] = y[j] + delta;
            if system.rhs(pert, out_col).is_ok() {
                ok = true;
                break;
            }
            delta = delta * F::of(1e-3);
        }
        if ok {
            let inv = F::one() / delta;
            for i in 0..dim {
                jac[(i, j)] = (out_col[i] - f0[i]) * inv;
            }
        }
        // A failed column leaves zeros; the Newton matrix then degrades
        // toward the identity, which the step controller compensates for.
        pert[j] = y[j];
    }
    if jac.is_finite() {
        Some(jac)
    } else {
        None
    }
}

fn wrms<F: Scalar>(err: &[F], y_old: &[F], y_new: &[F], config: &IntegratorConfig<F>) -> F {
    let n = err.len();
    let mut acc = F::zero();
    for i in 0..n {
        let scale = config.abs_tol + config.rel_tol * y_old[i].abs().max(y_new[i].abs());
        let q = err[i] / scale;
        acc = acc + q * q;
    }
    (acc / F::of(n as f64)).sqrt()
}

fn residual_rate<F: Scalar, S: FlowSystem<F>>(
    system: &S,
    y: &[F],
    direction: &[F],
    res: F,
) -> Option<F> {
    if !(res.is_finite() && res > F::zero()) {
        return None;
    }
    let dn = norm2(direction);
    if !(dn.is_finite() && dn > F::zero()) {
        return None;
    }
    let eps = F::epsilon().sqrt() * (F::one() + norm2(y)) / dn;
    let probe: Vec<F> = y.iter().zip(direction).map(|(&yi, &di)| yi + eps * di).collect();
    let r2 = system.residual_norm(&probe);
    if !r2.is_finite() {
        return None;
    }
    Some((r2 - res) / eps)
}

/// Bisects the crossing of `residual == eps` along the linear interpolant of
/// the accepted step, to 1e-9 absolute in time.
fn bracket_event<F: Scalar, S: FlowSystem<F>>(
    system: &S,
    t0: F,
    y0: &[F],
    t1: F,
    y1: &[F],
    eps: F,
) -> (F, Vec<F>, F) {
    let mut lo = F::zero();
    let mut hi = F::one();
    let width = t1 - t0;
    let tol = F::of(1e-9);
    let lerp = |lambda: F| -> Vec<F> {
        y0.iter()
            .zip(y1)
            .map(|(&a, &b)| a + lambda * (b - a))
            .collect()
    };
    for _ in 0..200 {
        if width * (hi - lo) <= tol {
            break;
        }
        let mid = (lo + hi) * F::of(0.5);
        let r = system.residual_norm(&lerp(mid));
        if r < eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t_star = t0 + width * (lo + hi) * F::of(0.5);
    let y_star = lerp(hi);
    let r_star = system.residual_norm(&y_star);
    (t_star, y_star, r_star)
}

fn record_sample<F: Scalar>(traj: &mut Trajectory<F>, t: F, y: &[F], res: F) {
    traj.times.push(t);
    traj.states.push(y.to_vec());
    traj.residual_norms.push(res);
    traj.min_state_component = traj.min_state_component.min(min_component(y));
}

/// Fills every remaining sample with the frozen post-settling state.
fn freeze<F: Scalar>(
    traj: &mut Trajectory<F>,
    grid: &[F],
    next_sample: usize,
    t_star: F,
    y_star: &[F],
    res_star: F,
) {
    for &tg in &grid[next_sample..] {
        record_sample(traj, tg, y_star, res_star);
    }
    traj.final_time = t_star;
    traj.final_state = y_star.to_vec();
    traj.final_residual = res_star;
}

fn min_component<F: Scalar>(y: &[F]) -> F {
    y.iter().fold(F::infinity(), |a, &b| a.min(b))
}
