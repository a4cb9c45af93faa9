//! Fixed-time-stable vector fields and their gain prescriptions.
//!
//! Every flow here drives a residual `z` along
//! `dz/dt = -k z / ||z||^(2/mu) - k z ||z||^(2/mu)`, whose norm obeys the
//! scalar law `dr/dt = -k (r^(1-2/mu) + r^(1+2/mu))` and therefore settles
//! to zero no later than `mu*pi/(4k)` regardless of the initial condition.
//! Choosing `k = mu*pi/(4*T_p)` pins the settling time at `T_p`.

use thiserror::Error;

use crate::hmcp::{psi_jacobian, residual_z, HmcpState};
use crate::linalg::{norm2, DMat, Lu};
use crate::problem::ConvexProgram;
use crate::scalar::Scalar;

/// Condition-estimate ceiling beyond which a linear solve inside a flow is
/// treated as boundary-degenerate instead of trusted.
pub const CONDITION_LIMIT: f64 = 1e14;

#[derive(Debug, Clone, Error)]
pub enum FlowError {
    #[error("state has a non-positive component (min {min:.3e}); boundary-degenerate point")]
    BoundaryDegenerate { min: f64 },
    #[error("linear system is ill-conditioned (estimate {estimate:.3e})")]
    IllConditioned { estimate: f64 },
    #[error("linear system is singular")]
    Singular,
    #[error("gradient-flow gain prescription requires the strong-convexity modulus m_f")]
    MissingModulus,
    #[error("parameter out of range: {0}")]
    BadParameter(String),
    #[error("flow evaluation produced non-finite values")]
    NonFinite,
}

/// Which fixed-time flow a gain is being prescribed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Dynamics of the stacked residual itself.
    ReducedZ,
    /// Full implicit dynamics of the homogeneous embedding.
    FullHmcp,
    /// Gradient flow for unconstrained problems; needs the modulus `m_f`.
    GradientFlow,
    /// Newton flow for unconstrained problems; gain is data-independent.
    NewtonFlow,
}

/// Gain, exponent, and prescribed settling time of one flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig<F> {
    pub mu: F,
    pub k: F,
    pub t_p: F,
    pub scheme: Scheme,
    pub m_f: Option<F>,
}

impl<F: Scalar> FlowConfig<F> {
    /// Builds a config whose gain is prescribed from the settling time.
    pub fn with_settling_time(
        t_p: F,
        mu: F,
        scheme: Scheme,
        m_f: Option<F>,
    ) -> Result<Self, FlowError> {
        let k = prescribe_gain(t_p, mu, scheme, m_f)?;
        Ok(Self { mu, k, t_p, scheme, m_f })
    }
}

/// Gain that makes the flow settle no later than `t_p`:
/// `mu*pi/(4*m_f*t_p)` for the gradient flow and `mu*pi/(4*t_p)` for the
/// Newton-type flows (at `mu = 2` the latter is `pi/(2*t_p)`).
pub fn prescribe_gain<F: Scalar>(
    t_p: F,
    mu: F,
    scheme: Scheme,
    m_f: Option<F>,
) -> Result<F, FlowError> {
    if !(t_p > F::zero()) {
        return Err(FlowError::BadParameter("T_p must be positive".into()));
    }
    if !(mu > F::one()) {
        return Err(FlowError::BadParameter("mu must exceed 1".into()));
    }
    let pi = F::of(std::f64::consts::PI);
    let four = F::of(4.0);
    match scheme {
        Scheme::GradientFlow => {
            let m_f = m_f.ok_or(FlowError::MissingModulus)?;
            if !(m_f > F::zero()) {
                return Err(FlowError::BadParameter("m_f must be positive".into()));
            }
            Ok(mu * pi / (four * m_f * t_p))
        }
        Scheme::ReducedZ | Scheme::FullHmcp | Scheme::NewtonFlow => Ok(mu * pi / (four * t_p)),
    }
}

/// `dz/dt = -k z/||z||^(2/mu) - k z ||z||^(2/mu)`; returns zero at `z = 0`
/// (the equilibrium; integration stops there by event).
pub fn reduced_rhs<F: Scalar>(z: &[F], k: F, mu: F) -> Vec<F> {
    let r = norm2(z);
    if r == F::zero() {
        return vec![F::zero(); z.len()];
    }
    let p = (F::of(2.0) / mu).lossy_f64();
    let factor = -k * (r.powf(F::of(-p)) + r.powf(F::of(p)));
    z.iter().map(|&zi| zi * factor).collect()
}

/// Norm trajectory of the reduced dynamics from `r0` at time `t`.
///
/// For `mu = 2` this is the closed form
/// `r(t) = tan(arctan(r0) - k t)` clamped at zero after the settling time
/// `arctan(r0)/k`; other exponents fall back to high-accuracy integration
/// of the scalar radial law.
pub fn radial_norm<F: Scalar>(r0: F, k: F, t: F, mu: F) -> F {
    assert!(r0 > F::zero(), "radial law needs r0 > 0");
    if t <= F::zero() {
        return r0;
    }
    if (mu - F::of(2.0)).abs() <= F::epsilon() {
        let phase = r0.atan() - k * t;
        if phase <= F::zero() {
            F::zero()
        } else {
            phase.tan()
        }
    } else {
        integrate_radial(r0, k, t, mu)
    }
}

/// Settling time of the reduced dynamics for `mu = 2`: `arctan(r0)/k`.
pub fn radial_settling_time<F: Scalar>(r0: F, k: F) -> F {
    r0.atan() / k
}

/// Fixed-step RK4 on `dr/dt = -k (r^(1-2/mu) + r^(1+2/mu))`, stopping at the
/// origin. Step count is chosen so local error is far below the 1e-10
/// contract of the callers.
fn integrate_radial<F: Scalar>(r0: F, k: F, t_end: F, mu: F) -> F {
    let p = F::of(2.0) / mu;
    let rate = |r: F| -> F {
        if r <= F::zero() {
            F::zero()
        } else {
            -k * (r.powf(F::one() - p) + r.powf(F::one() + p))
        }
    };
    let steps = 200_000;
    let h = t_end / F::of(steps as f64);
    let mut r = r0;
    for _ in 0..steps {
        let k1 = rate(r);
        let k2 = rate((r + h * k1 * F::of(0.5)).max(F::zero()));
        let k3 = rate((r + h * k2 * F::of(0.5)).max(F::zero()));
        let k4 = rate((r + h * k3).max(F::zero()));
        let six = F::of(6.0);
        r = r + h * (k1 + F::of(2.0) * (k2 + k3) + k4) / six;
        if r <= F::zero() {
            return F::zero();
        }
    }
    r
}

/// Derivative pair of the full homogeneous dynamics.
#[derive(Debug, Clone)]
pub struct HmcpDerivative<F> {
    pub x_hat_dot: Vec<F>,
    pub s_hat_dot: Vec<F>,
}

/// Right-hand side of the implicit homogeneous dynamics
///
/// ```text
/// Dpsi(x_hat) dx_hat - ds_hat             = -k w z_1
/// diag(s_hat) dx_hat + diag(x_hat) ds_hat = -k w z_2
/// ```
///
/// with `z_1 = psi - s_hat`, `z_2 = x_hat .* s_hat`, and the shared factor
/// `w = ||z||^(-2/mu) + ||z||^(2/mu)`. Solved via the Schur complement
/// `(Dpsi + diag(s_hat/x_hat)) dx_hat = -k w (z_1 + s_hat)`; the Schur
/// matrix is PSD plus a positive diagonal, hence nonsingular away from the
/// boundary.
pub fn full_hmcp_rhs<F: Scalar>(
    program: &ConvexProgram<F>,
    state: &HmcpState<F>,
    k: F,
    mu: F,
    tau_min: F,
) -> Result<HmcpDerivative<F>, FlowError> {
    let d = state.dim();
    let floor = -F::of(1e-9);
    let min_x = state.x_hat.iter().fold(F::infinity(), |a, &b| a.min(b));
    let min_s = state.s_hat.iter().fold(F::infinity(), |a, &b| a.min(b));
    if min_x < floor || min_s < floor {
        return Err(FlowError::BoundaryDegenerate { min: min_x.min(min_s).lossy_f64() });
    }

    let z = residual_z(program, state, tau_min);
    let r = norm2(&z);
    if !r.is_finite() {
        return Err(FlowError::NonFinite);
    }
    if r == F::zero() {
        return Ok(HmcpDerivative {
            x_hat_dot: vec![F::zero(); d],
            s_hat_dot: vec![F::zero(); d],
        });
    }
    let p = F::of(2.0) / mu;
    let kw = k * (r.powf(-p) + r.powf(p));
    let (z1, z2) = z.split_at(d);

    // Schur system: (Dpsi + diag(s/x)) dx = -k w (z1 + z2/x), then
    // ds = (-k w z2 - diag(s) dx)/x. Components pinned at the boundary get
    // the same safeguard as tau in psi: divisions are floored at tau_min,
    // regularizing the dynamics exactly where the exact flow has already
    // frozen the coordinate.
    let mut schur = psi_jacobian(program, &state.x_hat, tau_min);
    if !schur.is_finite() {
        return Err(FlowError::NonFinite);
    }
    let x_safe: Vec<F> = state.x_hat.iter().map(|&x| x.max(tau_min)).collect();
    let ratios: Vec<F> =
        x_safe.iter().zip(&state.s_hat).map(|(&x, &s)| s / x).collect();
    for (i, &ratio) in ratios.iter().enumerate() {
        schur[(i, i)] = schur[(i, i)] + ratio;
    }
    let rhs: Vec<F> = (0..d).map(|i| -kw * (z1[i] + z2[i] / x_safe[i])).collect();

    let lu = Lu::factor(&schur).map_err(|_| FlowError::Singular)?;
    let estimate = lu.condition_estimate();
    if estimate > F::of(CONDITION_LIMIT) {
        return Err(FlowError::IllConditioned { estimate: estimate.lossy_f64() });
    }
    let x_hat_dot = lu.solve(&rhs);

    let s_hat_dot: Vec<F> = (0..d)
        .map(|i| (-kw * z2[i] - state.s_hat[i] * x_hat_dot[i]) / x_safe[i])
        .collect();

    if x_hat_dot.iter().chain(&s_hat_dot).any(|v| !v.is_finite()) {
        return Err(FlowError::NonFinite);
    }
    Ok(HmcpDerivative { x_hat_dot, s_hat_dot })
}

/// Gradient flow `dx/dt = -k grad/||grad||^(2/mu) - k grad ||grad||^(2/mu)`.
pub fn gradient_flow_rhs<F: Scalar>(grad: &[F], k: F, mu: F) -> Vec<F> {
    reduced_rhs(grad, k, mu)
}

/// Newton flow `dx/dt = -H^{-1} (k grad/||grad||^(2/mu) + k grad ||grad||^(2/mu))`;
/// the gradient image of this flow follows the reduced dynamics exactly.
pub fn newton_flow_rhs<F: Scalar>(
    grad: &[F],
    hess: &DMat<F>,
    k: F,
    mu: F,
) -> Result<Vec<F>, FlowError> {
    let steered = reduced_rhs(grad, k, mu);
    let lu = Lu::factor(hess).map_err(|_| FlowError::Singular)?;
    let estimate = lu.condition_estimate();
    if estimate > F::of(CONDITION_LIMIT) {
        return Err(FlowError::IllConditioned { estimate: estimate.lossy_f64() });
    }
    Ok(lu.solve(&steered))
}

/// Settling-time bound families exposed by the stability lemmas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SettlingBound<F> {
    /// `V0^(1-alpha) / (k (1-alpha))`: finite-time bound, initial-state
    /// dependent.
    FiniteTime { v0: F, k: F, alpha: F },
    /// `1/(k1 (1-alpha1)) + 1/(k2 (alpha2-1))`: fixed-time bound.
    FixedTimeSum { k1: F, k2: F, alpha1: F, alpha2: F },
    /// `mu*pi/k`: the tighter fixed-time bound used for gain prescription.
    FixedTimeTan { mu: F, k: F },
}

/// Evaluates the requested bound; errs when an exponent leaves the range its
/// lemma requires.
pub fn settling_bound<F: Scalar>(bound: SettlingBound<F>) -> Result<F, FlowError> {
    match bound {
        SettlingBound::FiniteTime { v0, k, alpha } => {
            if !(k > F::zero()) || !(alpha > F::zero() && alpha < F::one()) {
                return Err(FlowError::BadParameter(
                    "finite-time bound needs k > 0 and alpha in (0,1)".into(),
                ));
            }
            if !(v0 >= F::zero()) {
                return Err(FlowError::BadParameter("V0 must be nonnegative".into()));
            }
            Ok(v0.powf(F::one() - alpha) / (k * (F::one() - alpha)))
        }
        SettlingBound::FixedTimeSum { k1, k2, alpha1, alpha2 } => {
            if !(k1 > F::zero() && k2 > F::zero()) {
                return Err(FlowError::BadParameter("gains must be positive".into()));
            }
            if !(alpha1 > F::zero() && alpha1 < F::one()) || !(alpha2 > F::one()) {
                return Err(FlowError::BadParameter(
                    "fixed-time bound needs alpha1 in (0,1) and alpha2 > 1".into(),
                ));
            }
            Ok(F::one() / (k1 * (F::one() - alpha1)) + F::one() / (k2 * (alpha2 - F::one())))
        }
        SettlingBound::FixedTimeTan { mu, k } => {
            if !(mu > F::one()) || !(k > F::zero()) {
                return Err(FlowError::BadParameter(
                    "tan bound needs mu > 1 and k > 0".into(),
                ));
            }
            Ok(mu * F::of(std::f64::consts::PI) / k)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gain_formulas() {
        let k = prescribe_gain(1.0, 2.0, Scheme::FullHmcp, None).unwrap();
        assert!((k - PI / 2.0).abs() < 1e-15);
        let k = prescribe_gain(2.0, 2.0, Scheme::NewtonFlow, None).unwrap();
        assert!((k - PI / 4.0).abs() < 1e-15);
        let k = prescribe_gain(1.0, 2.0, Scheme::GradientFlow, Some(1.0)).unwrap();
        assert!((k - PI / 2.0).abs() < 1e-15);
        assert!(matches!(
            prescribe_gain(1.0, 2.0, Scheme::GradientFlow, None::<f64>),
            Err(FlowError::MissingModulus)
        ));
    }

    #[test]
    fn reduced_rhs_hand_values() {
        let zdot = reduced_rhs(&[1.0_f64, 0.0], 1.0, 2.0);
        assert!((zdot[0] + 2.0).abs() < 1e-15);
        assert_eq!(zdot[1], 0.0);

        let zdot = reduced_rhs(&[3.0_f64, 4.0], 1.0, 2.0);
        assert!((zdot[0] + 15.6).abs() < 1e-12);
        assert!((zdot[1] + 20.8).abs() < 1e-12);
    }

    #[test]
    fn reduced_rhs_descends_and_handles_origin() {
        let z = [0.3, -0.7, 0.05];
        let zdot = reduced_rhs(&z, 0.8, 2.0);
        let descent: f64 = z.iter().zip(&zdot).map(|(a, b)| a * b).sum();
        assert!(descent < 0.0);
        assert_eq!(reduced_rhs(&[0.0, 0.0], 1.0, 2.0), vec![0.0, 0.0]);
    }

    #[test]
    fn radial_closed_form_at_mu2() {
        let k = PI / 2.0;
        let r = radial_norm(1.0, k, 0.25, 2.0);
        assert!((r - (PI / 8.0).tan()).abs() < 1e-14);
        assert_eq!(radial_norm(1.0, k, 0.5, 2.0), 0.0);
        assert_eq!(radial_norm(1.0, k, 0.9, 2.0), 0.0);
        assert!((radial_settling_time(1.0, k) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn radial_fallback_matches_general_closed_form() {
        // u = r^(2/mu) follows du/dt = -(2k/mu)(1+u^2), so
        // r(t) = tan(arctan(r0^(2/mu)) - (2k/mu) t)^(mu/2).
        let (r0, k, mu, t) = (2.0_f64, 0.9_f64, 3.0_f64, 0.4_f64);
        let got = radial_norm(r0, k, t, mu);
        let u0 = r0.powf(2.0 / mu);
        let expect = (u0.atan() - 2.0 * k / mu * t).tan().powf(mu / 2.0);
        assert!((got - expect).abs() < 1e-8, "got {got}, expect {expect}");
    }

    #[test]
    fn settling_bounds() {
        let t: f64 = settling_bound(SettlingBound::FixedTimeTan { mu: 2.0, k: PI / 2.0 }).unwrap();
        assert!((t - 4.0).abs() < 1e-15);
        let t: f64 = settling_bound(SettlingBound::FixedTimeSum {
            k1: 1.0,
            k2: 1.0,
            alpha1: 0.5,
            alpha2: 2.0,
        })
        .unwrap();
        assert!((t - 3.0).abs() < 1e-15);
        let t: f64 = settling_bound(SettlingBound::FiniteTime { v0: 1.0, k: 1.0, alpha: 0.5 }).unwrap();
        assert!((t - 2.0).abs() < 1e-15);
        assert!(settling_bound(SettlingBound::<f64>::FiniteTime { v0: 1.0, k: 1.0, alpha: 1.5 }).is_err());
    }

    #[test]
    fn full_hmcp_rhs_is_zero_at_equilibrium() {
        use crate::problem::ConvexProgram;
        let p = ConvexProgram::make_qp(
            DMat::identity(1),
            vec![0.0],
            DMat::from_rows(&[vec![1.0]]).unwrap(),
            vec![0.0],
        )
        .unwrap();
        let state = HmcpState { x_hat: vec![0.0, 0.0, 1.0], s_hat: vec![0.0, 0.0, 0.0] };
        let deriv = full_hmcp_rhs(&p, &state, 1.0, 2.0, 1e-14).unwrap();
        assert!(deriv.x_hat_dot.iter().all(|&v| v == 0.0));
        assert!(deriv.s_hat_dot.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn newton_flow_with_identity_hessian_matches_gradient_flow() {
        let grad = [0.3_f64, -1.2];
        let h = DMat::identity(2);
        let newton = newton_flow_rhs(&grad, &h, 0.7, 2.0).unwrap();
        let gradient = gradient_flow_rhs(&grad, 0.7, 2.0);
        for (a, b) in newton.iter().zip(&gradient) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn newton_flow_rejects_singular_hessian() {
        let h = DMat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(newton_flow_rhs(&[1.0, 0.0], &h, 1.0, 2.0).is_err());
    }
}
