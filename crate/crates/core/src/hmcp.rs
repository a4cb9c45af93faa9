//! Homogeneous embedding of the KKT complementarity system.
//!
//! Two scalars `tau` and `kappa` extend the system so it is always
//! (asymptotically) solvable: `tau > 0` at the solution recovers an optimal
//! point, `kappa > 0` certifies infeasibility.

use crate::linalg::{dot, DMat};
use crate::mcp::{phi, phi_jacobian};
use crate::problem::ConvexProgram;
use crate::scalar::Scalar;

/// Safeguard floor for `tau` when evaluating the embedding: `psi` evaluates
/// the KKT map at `x_bar / tau`, which blows up as infeasible trajectories
/// drive `tau -> 0`. The tau-vs-kappa comparison at retrieval time only
/// needs relative magnitudes, so clamped evaluations still classify right.
///
/// The floor must sit well below `stop_residual / ||z(0)||`, the size of
/// the complementarity products at the settling event: a clamp that binds
/// before the event biases the flow and stalls the residual just above the
/// stop threshold. 1e-14 leaves an order of magnitude of headroom for
/// initial residual norms in the hundreds while still keeping every
/// evaluation finite.
pub const TAU_SAFEGUARD: f64 = 1e-14;

/// Homogeneous state: `x_hat = col(x_bar, tau)`, `s_hat = col(s_bar, kappa)`,
/// each of dimension `n_bar + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HmcpState<F> {
    pub x_hat: Vec<F>,
    pub s_hat: Vec<F>,
}

impl<F: Scalar> HmcpState<F> {
    /// `x_hat = s_hat = scale * ones`, the standard strictly positive start.
    pub fn uniform(n_bar_plus_1: usize, scale: F) -> Self {
        Self {
            x_hat: vec![scale; n_bar_plus_1],
            s_hat: vec![scale; n_bar_plus_1],
        }
    }

    pub fn dim(&self) -> usize {
        self.x_hat.len()
    }

    pub fn tau(&self) -> F {
        *self.x_hat.last().expect("state is nonempty")
    }

    pub fn kappa(&self) -> F {
        *self.s_hat.last().expect("state is nonempty")
    }

    pub fn x_bar(&self) -> &[F] {
        &self.x_hat[..self.x_hat.len() - 1]
    }

    pub fn s_bar(&self) -> &[F] {
        &self.s_hat[..self.s_hat.len() - 1]
    }

    /// Reads a state back from the flat layout `[x_hat; s_hat]` used by the
    /// integrator.
    pub fn from_flat(flat: &[F]) -> Self {
        assert!(flat.len() % 2 == 0, "flat state must split evenly");
        let d = flat.len() / 2;
        Self { x_hat: flat[..d].to_vec(), s_hat: flat[d..].to_vec() }
    }

    pub fn to_flat(&self) -> Vec<F> {
        let mut flat = self.x_hat.clone();
        flat.extend_from_slice(&self.s_hat);
        flat
    }
}

/// Value of the homogeneous map together with the safeguard flag.
#[derive(Debug, Clone)]
pub struct PsiEval<F> {
    /// `psi = col(tau * phi(x_bar/tau), -x_bar^T phi(x_bar/tau))`.
    pub value: Vec<F>,
    /// True when `tau` fell below [`TAU_SAFEGUARD`] and was clamped.
    pub tau_clamped: bool,
}

/// Evaluates `psi` at `x_hat`, clamping `tau` at `tau_min`.
pub fn psi<F: Scalar>(program: &ConvexProgram<F>, x_hat: &[F], tau_min: F) -> PsiEval<F> {
    let n_bar = x_hat.len() - 1;
    let tau = x_hat[n_bar];
    let tau_clamped = tau < tau_min;
    let tau_c = tau.max(tau_min);
    let x_bar = &x_hat[..n_bar];
    let u: Vec<F> = x_bar.iter().map(|&v| v / tau_c).collect();
    let phi_u = phi(program, &u);
    let mut value: Vec<F> = phi_u.iter().map(|&p| tau_c * p).collect();
    value.push(-dot(x_bar, &phi_u));
    PsiEval { value, tau_clamped }
}

/// Jacobian of `psi` in block form:
/// `[[Dphi(u), phi(u) - Dphi(u) u], [-phi(u)^T - u^T Dphi(u), u^T Dphi(u) u]]`
/// with `u = x_bar/tau`. Positive semidefinite as a quadratic form.
pub fn psi_jacobian<F: Scalar>(program: &ConvexProgram<F>, x_hat: &[F], tau_min: F) -> DMat<F> {
    let n_bar = x_hat.len() - 1;
    let tau_c = x_hat[n_bar].max(tau_min);
    let u: Vec<F> = x_hat[..n_bar].iter().map(|&v| v / tau_c).collect();
    let phi_u = phi(program, &u);
    let dphi = phi_jacobian(program, &u);
    let dphi_u = dphi.matvec(&u);
    let ut_dphi = dphi.matvec_t(&u);

    let d = n_bar + 1;
    let mut j = DMat::zeros(d, d);
    for i in 0..n_bar {
        for k in 0..n_bar {
            j[(i, k)] = dphi[(i, k)];
        }
        j[(i, n_bar)] = phi_u[i] - dphi_u[i];
        j[(n_bar, i)] = -phi_u[i] - ut_dphi[i];
    }
    j[(n_bar, n_bar)] = dot(&u, &dphi_u);
    j
}

/// Stacked residual `z = col(psi(x_hat) - s_hat, x_hat .* s_hat)`;
/// `||z|| = 0` exactly at a complementary solution of the embedding.
pub fn residual_z<F: Scalar>(
    program: &ConvexProgram<F>,
    state: &HmcpState<F>,
    tau_min: F,
) -> Vec<F> {
    let psi_val = psi(program, &state.x_hat, tau_min).value;
    let mut z: Vec<F> = psi_val.iter().zip(&state.s_hat).map(|(&p, &s)| p - s).collect();
    z.extend(state.x_hat.iter().zip(&state.s_hat).map(|(&x, &s)| x * s));
    z
}

/// Thresholds used when reading an outcome off a terminal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeThresholds<F> {
    /// Both `tau` and `kappa` at or below this floor means the run is
    /// inconclusive.
    pub tau_floor: F,
    /// Multiplier on the tau-vs-kappa comparison; 1 compares them directly.
    pub ratio: F,
    /// Residual norms above this mean the trajectory did not settle.
    pub residual_tol: F,
}

impl<F: Scalar> Default for OutcomeThresholds<F> {
    fn default() -> Self {
        Self { tau_floor: F::of(1e-8), ratio: F::one(), residual_tol: F::of(1e-6) }
    }
}

/// Recovered optimal point `(x, y, s, v) = (x, y, s, v)/tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPoint<F> {
    pub x: Vec<F>,
    pub y: Vec<F>,
    pub s: Vec<F>,
    pub v: Vec<F>,
}

/// Infeasibility certificate `(x_bar, s_bar)/kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityCertificate<F> {
    pub x_bar: Vec<F>,
    pub s_bar: Vec<F>,
}

/// Solve outcome read off the terminal homogeneous state.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome<F> {
    Optimal(OptimalPoint<F>),
    Infeasible(InfeasibilityCertificate<F>),
    Indeterminate,
}

impl<F> Outcome<F> {
    pub fn is_optimal(&self) -> bool {
        matches!(self, Outcome::Optimal(_))
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Outcome::Infeasible(_))
    }
}

/// Classifies a terminal state: `tau >= ratio * kappa` (ties go to Optimal)
/// with `tau` above the floor recovers an optimal point scaled by `1/tau`;
/// `kappa > ratio * tau` above the floor yields an infeasibility certificate
/// scaled by `1/kappa`; anything else, or an unsettled residual, is
/// inconclusive.
pub fn classify<F: Scalar>(
    n: usize,
    m: usize,
    state: &HmcpState<F>,
    residual_norm: F,
    thresholds: &OutcomeThresholds<F>,
) -> Outcome<F> {
    assert_eq!(state.dim(), n + m + 1, "classify dimension mismatch");
    if residual_norm > thresholds.residual_tol {
        return Outcome::Indeterminate;
    }
    let tau = state.tau();
    let kappa = state.kappa();
    if tau >= thresholds.ratio * kappa && tau > thresholds.tau_floor {
        let inv = F::one() / tau;
        let xb = state.x_bar();
        let sb = state.s_bar();
        return Outcome::Optimal(OptimalPoint {
            x: xb[..n].iter().map(|&v| v * inv).collect(),
            y: xb[n..].iter().map(|&v| v * inv).collect(),
            s: sb[..n].iter().map(|&v| v * inv).collect(),
            v: sb[n..].iter().map(|&v| v * inv).collect(),
        });
    }
    if kappa > thresholds.ratio * tau && kappa > thresholds.tau_floor {
        let inv = F::one() / kappa;
        return Outcome::Infeasible(InfeasibilityCertificate {
            x_bar: state.x_bar().iter().map(|&v| v * inv).collect(),
            s_bar: state.s_bar().iter().map(|&v| v * inv).collect(),
        });
    }
    Outcome::Indeterminate
}
