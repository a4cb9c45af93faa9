//! Cross-module structural properties, each checked against an oracle that
//! is independent of the implementation path it validates (finite
//! differences, scalar quadrature, explicit reconstruction, or the
//! enumeration oracle).

use proptest::prelude::*;

use settle_core::flows::{
    full_hmcp_rhs, prescribe_gain, radial_norm, reduced_rhs, Scheme,
};
use settle_core::harness::{generate_random, reference_solution, RefSolution, SplitMix64};
use settle_core::hmcp::{psi, residual_z, HmcpState, TAU_SAFEGUARD};
use settle_core::integrator::{integrate, IntegratorConfig};
use settle_core::linalg::{dot, norm2, DMat};
use settle_core::mcp::{monotone_gap, phi};
use settle_core::problem::{parse_problem_file, to_problem_file, ConvexProgram, Family};
use settle_core::solver::{solve, HmcpSystem, SolverConfig};
use settle_core::{Outcome, Program, Real};

const FAMILIES: [Family; 3] = [Family::Lp, Family::Qp, Family::ExpSum];

fn sample_program(family: Family, seed: u64) -> Program {
    generate_random(family, 5, 2, seed)
}

fn positive_vec(rng: &mut SplitMix64, len: usize, scale: Real) -> Vec<Real> {
    (0..len).map(|_| scale * (0.05 + rng.next_f64())).collect()
}

/// Oracle gradients by central differences of the scalar objective.
#[test]
fn oracle_gradients_match_central_differences() {
    let mut rng = SplitMix64::new(11);
    for family in FAMILIES {
        for trial in 0..20 {
            let p = sample_program(family, 100 + trial);
            let x = positive_vec(&mut rng, p.n(), 2.0);
            let y = positive_vec(&mut rng, p.m(), 1.0);
            let eval = p.evaluate(&x, &y);
            for j in 0..p.n() {
                let h = 1e-6 * (1.0 + x[j].abs());
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (p.objective(&xp) - p.objective(&xm)) / (2.0 * h);
                let diff = (eval.grad_f[j] - fd).abs();
                assert!(
                    diff <= 1e-6 * (1.0 + eval.grad_f[j].abs()),
                    "{family:?} grad[{j}]: analytic {} vs fd {fd}",
                    eval.grad_f[j]
                );
                let g_p = p.evaluate(&xp, &y).g;
                let g_m = p.evaluate(&xm, &y).g;
                for i in 0..p.m() {
                    let fd = (g_p[i] - g_m[i]) / (2.0 * h);
                    let diff = (eval.g_jacobian[(i, j)] - fd).abs();
                    assert!(diff <= 1e-6 * (1.0 + fd.abs()), "{family:?} jac[{i},{j}]");
                }
            }
        }
    }
}

/// Weighted Hessians stay PSD for nonnegative multipliers.
#[test]
fn weighted_hessian_quadratic_form_nonnegative() {
    let mut rng = SplitMix64::new(13);
    for family in FAMILIES {
        let p = sample_program(family, 5);
        for _ in 0..200 {
            let x = positive_vec(&mut rng, p.n(), 3.0);
            let y = positive_vec(&mut rng, p.m(), 2.0);
            let h = p.evaluate(&x, &y).weighted_hessian;
            let d: Vec<Real> = (0..p.n()).map(|_| rng.next_normal()).collect();
            let quad = dot(&h.matvec(&d), &d);
            assert!(quad >= -1e-10, "{family:?}: d^T H d = {quad}");
        }
    }
}

/// The KKT map of the affine families is affine in the stacked point.
#[test]
fn phi_is_affine_for_lp_and_qp() {
    let mut rng = SplitMix64::new(17);
    for family in [Family::Lp, Family::Qp] {
        let p = sample_program(family, 21);
        let d = p.n() + p.m();
        for _ in 0..50 {
            let u = positive_vec(&mut rng, d, 2.0);
            let w = positive_vec(&mut rng, d, 2.0);
            let alpha = rng.next_f64();
            let mixed: Vec<Real> =
                u.iter().zip(&w).map(|(&a, &b)| alpha * a + (1.0 - alpha) * b).collect();
            let lhs = phi(&p, &mixed);
            let pu = phi(&p, &u);
            let pw = phi(&p, &w);
            for i in 0..d {
                let rhs = alpha * pu[i] + (1.0 - alpha) * pw[i];
                assert!((lhs[i] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }
    }
}

/// Reconstruction check: the derivative returned by the flow satisfies both
/// block equations of the implicit system it was solved from.
#[test]
fn full_hmcp_rhs_reconstructs_block_equations() {
    let mut rng = SplitMix64::new(19);
    let k = prescribe_gain(1.0, 2.0, Scheme::FullHmcp, None).unwrap();
    for family in FAMILIES {
        let p = sample_program(family, 31);
        let d = p.n() + p.m() + 1;
        for _ in 0..20 {
            let state = HmcpState {
                x_hat: positive_vec(&mut rng, d, 1.5),
                s_hat: positive_vec(&mut rng, d, 1.5),
            };
            let deriv = full_hmcp_rhs(&p, &state, k, 2.0, TAU_SAFEGUARD).unwrap();
            let z = residual_z(&p, &state, TAU_SAFEGUARD);
            let r = norm2(&z);
            let kw = k * (1.0 / r + r);
            let jac = settle_core::hmcp::psi_jacobian(&p, &state.x_hat, TAU_SAFEGUARD);

            // Dpsi dx - ds = -k w z1
            let jdx = jac.matvec(&deriv.x_hat_dot);
            for i in 0..d {
                let lhs = jdx[i] - deriv.s_hat_dot[i];
                let rhs = -kw * z[i];
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()),
                    "{family:?} row {i}: {lhs} vs {rhs}"
                );
            }
            // diag(s) dx + diag(x) ds = -k w z2
            for i in 0..d {
                let lhs = state.s_hat[i] * deriv.x_hat_dot[i]
                    + state.x_hat[i] * deriv.s_hat_dot[i];
                let rhs = -kw * z[d + i];
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()),
                    "{family:?} hadamard row {i}: {lhs} vs {rhs}"
                );
            }
        }
    }
}

/// Chain rule along the flow: the time derivative of the stacked residual,
/// measured by finite differences of two nearby states along the returned
/// direction, follows the reduced dynamics.
#[test]
fn full_flow_drives_residual_along_reduced_law() {
    let mut rng = SplitMix64::new(23);
    let k = prescribe_gain(1.0, 2.0, Scheme::FullHmcp, None).unwrap();
    for family in FAMILIES {
        let p = sample_program(family, 37);
        let d = p.n() + p.m() + 1;
        for _ in 0..10 {
            let state = HmcpState {
                x_hat: positive_vec(&mut rng, d, 1.2),
                s_hat: positive_vec(&mut rng, d, 1.2),
            };
            let deriv = full_hmcp_rhs(&p, &state, k, 2.0, TAU_SAFEGUARD).unwrap();
            let z0 = residual_z(&p, &state, TAU_SAFEGUARD);
            let expected = reduced_rhs(&z0, k, 2.0);

            let eps = 1e-7;
            let shifted = |sign: Real| HmcpState {
                x_hat: state
                    .x_hat
                    .iter()
                    .zip(&deriv.x_hat_dot)
                    .map(|(&v, &dv)| v + sign * eps * dv)
                    .collect(),
                s_hat: state
                    .s_hat
                    .iter()
                    .zip(&deriv.s_hat_dot)
                    .map(|(&v, &dv)| v + sign * eps * dv)
                    .collect(),
            };
            let zp = residual_z(&p, &shifted(1.0), TAU_SAFEGUARD);
            let zm = residual_z(&p, &shifted(-1.0), TAU_SAFEGUARD);
            let scale = norm2(&expected);
            for i in 0..2 * d {
                let fd = (zp[i] - zm[i]) / (2.0 * eps);
                assert!(
                    (fd - expected[i]).abs() <= 1e-6 * (1.0 + scale),
                    "{family:?} z[{i}]: fd {fd} vs reduced {}",
                    expected[i]
                );
            }
        }
    }
}

/// Direction invariance of the reduced dynamics under tight integration.
#[test]
fn reduced_flow_preserves_direction() {
    let k = std::f64::consts::PI / 2.0;
    let dim = 6;
    let mut rng = SplitMix64::new(29);
    let z0: Vec<Real> = (0..dim).map(|_| rng.next_normal() * 3.0).collect();
    let system = settle_core::integrator::OdeFn::new(dim, move |z: &[Real], dz: &mut [Real]| {
        dz.copy_from_slice(&reduced_rhs(z, k, 2.0));
    });
    let traj = integrate(&system, &z0, 1.0, &IntegratorConfig::default());
    let n0 = norm2(&z0);
    for (state, &r) in traj.states.iter().zip(&traj.residual_norms) {
        if r < 1e-6 {
            break;
        }
        let cosine = dot(state, &z0) / (norm2(state) * n0);
        assert!(cosine >= 1.0 - 1e-8, "direction drifted: cos = {cosine}");
    }
}

/// Along the Newton flow the gradient stays parallel to its initial
/// direction (its image follows the reduced dynamics).
#[test]
fn newton_flow_gradient_direction_is_invariant() {
    let dim = 4;
    let mut q = DMat::zeros(dim, dim);
    for i in 0..dim {
        q[(i, i)] = 10f64.powi(i as i32); // condition number 1e3
    }
    let k = prescribe_gain(1.0, 2.0, Scheme::NewtonFlow, None).unwrap();
    let q_flow = q.clone();
    let system = settle_core::integrator::OdeFn::new(dim, move |x: &[Real], dx: &mut [Real]| {
        let grad = q_flow.matvec(x);
        let out = settle_core::flows::newton_flow_rhs(&grad, &q_flow, k, 2.0).unwrap();
        dx.copy_from_slice(&out);
    });
    let x0 = vec![2.0; dim];
    let g0 = q.matvec(&x0);
    let traj = integrate(&system, &x0, 1.0, &IntegratorConfig::default());
    for state in &traj.states {
        let g = q.matvec(state);
        let gn = norm2(&g);
        if gn < 1e-6 {
            break;
        }
        let cosine = dot(&g, &g0) / (gn * norm2(&g0));
        assert!(cosine >= 1.0 - 1e-8, "gradient direction drifted: {cosine}");
    }
}

/// Halving the prescribed time doubles the gain, which rescales the whole
/// trajectory in time; the error curves coincide at normalized times.
#[test]
fn settling_curves_time_rescale() {
    use settle_core::harness::{run_settling_experiment, ExperimentSpec};
    let spec = ExperimentSpec {
        family: Family::ExpSum,
        count: 1,
        n: 5,
        m: 2,
        seed: 3000,
        make_infeasible: false,
        tp_list: vec![1.0, 0.1],
        init_scales: vec![],
    };
    let results = run_settling_experiment(&spec).unwrap();
    let (slow, fast) = (&results.tp_sweep[0], &results.tp_sweep[1]);
    assert_eq!(slow.samples.len(), fast.samples.len());
    for (a, b) in slow.samples.iter().zip(&fast.samples) {
        // same index = same t/T_p
        assert!((a.t / slow.t_p - b.t / fast.t_p).abs() < 1e-12);
        assert!(
            (a.x_err - b.x_err).abs() <= 1e-4 * (1.0 + a.x_err),
            "normalized curves diverge at t/T_p = {}: {} vs {}",
            a.t / slow.t_p,
            a.x_err,
            b.x_err
        );
    }
}

/// Recovered optima agree across initial scales (ray recovery).
#[test]
fn solve_is_scale_invariant_in_the_initialization() {
    let p = sample_program(Family::Qp, 51);
    let mut solutions = Vec::new();
    for scale in [1.0, 5.0, 10.0] {
        let config = SolverConfig { init_scale: scale, ..SolverConfig::default() };
        match solve(&p, &config).outcome {
            Outcome::Optimal(point) => solutions.push(point.x),
            other => panic!("scale {scale}: {other:?}"),
        }
    }
    for pair in solutions.windows(2) {
        let diff: Real = pair[0]
            .iter()
            .zip(&pair[1])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, Real::max);
        assert!(diff <= 1e-4, "solutions differ by {diff}");
    }
}

/// Splitting a free-variable LP and solving the doubled program recovers
/// the hand-solved free optimum through the recovery map.
#[test]
fn split_free_lp_recovers_negative_optimum() {
    // min x s.t. x >= -1 (free x): optimum x = -1
    let p: ConvexProgram<Real> = ConvexProgram::make_lp(
        vec![1.0],
        DMat::from_rows(&[vec![1.0]]).unwrap(),
        vec![-1.0],
    )
    .unwrap();
    let (split, recovery) = p.split_free();
    assert_eq!(split.n(), 2);

    match reference_solution(&split).unwrap() {
        RefSolution::Optimal { x, .. } => {
            let free = recovery.recover(&x);
            assert!((free[0] + 1.0).abs() < 1e-9, "oracle recovery: {free:?}");
        }
        other => panic!("{other:?}"),
    }

    match solve(&split, &SolverConfig::default()).outcome {
        Outcome::Optimal(point) => {
            let free = recovery.recover(&point.x);
            assert!((free[0] + 1.0).abs() < 1e-4, "ode recovery: {free:?}");
        }
        other => panic!("{other:?}"),
    }
}

/// A program whose variable is already sign-constrained splits into a
/// doubled program whose negative parts vanish at the recovered optimum.
#[test]
fn split_of_nonnegative_program_has_zero_negative_part() {
    // min x s.t. x >= 1 treated as free: optimum x = 1 > 0
    let p: ConvexProgram<Real> = ConvexProgram::make_lp(
        vec![1.0],
        DMat::from_rows(&[vec![1.0]]).unwrap(),
        vec![1.0],
    )
    .unwrap();
    let (split, recovery) = p.split_free();
    match reference_solution(&split).unwrap() {
        RefSolution::Optimal { x, .. } => {
            assert!(x[1].abs() < 1e-9, "negative part {x:?}");
            assert!((recovery.recover(&x)[0] - 1.0).abs() < 1e-9);
        }
        other => panic!("{other:?}"),
    }
}

/// The generic-scalar core instantiates at f32 as well.
#[test]
fn core_math_works_at_f32() {
    let z = [3.0_f32, 4.0];
    let zdot = reduced_rhs(&z, 1.0_f32, 2.0);
    assert!((zdot[0] + 15.6).abs() < 1e-4);
    let r = radial_norm(1.0_f32, std::f32::consts::PI / 2.0, 0.25, 2.0);
    assert!((r - (std::f32::consts::PI / 8.0).tan()).abs() < 1e-5);
    let p: ConvexProgram<f32> = ConvexProgram::make_lp(
        vec![1.0_f32],
        DMat::from_rows(&[vec![1.0_f32]]).unwrap(),
        vec![1.0_f32],
    )
    .unwrap();
    assert_eq!(phi(&p, &[1.0, 1.0]), vec![0.0, 0.0]);
}

/// Solver path states stay (numerically) nonnegative, and the recorded
/// residual norms never increase.
#[test]
fn trajectory_invariants_on_a_generated_instance() {
    let p = sample_program(Family::ExpSum, 77);
    let config = SolverConfig { record_trajectory: true, ..SolverConfig::default() };
    let report = solve(&p, &config);
    let traj = report.trajectory.unwrap();
    assert!(traj.min_state_component >= -1e-9);
    for w in traj.residual_norms.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "residual increased: {} -> {}", w[0], w[1]);
    }
    // times strictly increasing over the sample grid
    for w in traj.times.windows(2) {
        assert!(w[1] > w[0]);
    }
}

/// Solving the same program from the flat-file round trip gives the same
/// report (the parse/serialize pair preserves program data bit for bit).
#[test]
fn round_trip_preserves_solver_behavior() {
    let p = sample_program(Family::Qp, 91);
    let text = to_problem_file(&p).unwrap();
    let q: Program = parse_problem_file(&text).unwrap();
    let a = solve(&p, &SolverConfig::default());
    let b = solve(&q, &SolverConfig::default());
    match (a.outcome, b.outcome) {
        (Outcome::Optimal(pa), Outcome::Optimal(pb)) => assert_eq!(pa.x, pb.x),
        other => panic!("{other:?}"),
    }
}

fn radial_oracle(r0: Real, k: Real, t: Real) -> Real {
    // independent fixed-step RK4 on dr/dt = -k (1 + r^2)
    let steps = 40_000;
    let h = t / steps as Real;
    let rate = |r: Real| -k * (1.0 + r * r);
    let mut r = r0;
    for _ in 0..steps {
        let k1 = rate(r);
        let k2 = rate(r + 0.5 * h * k1);
        let k3 = rate(r + 0.5 * h * k2);
        let k4 = rate(r + h * k3);
        r += h * (k1 + 2.0 * (k2 + k3) + k4) / 6.0;
        if r <= 0.0 {
            return 0.0;
        }
    }
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Closed-form radial law against an independent scalar integrator.
    #[test]
    fn radial_law_matches_scalar_quadrature(r0 in 0.05_f64..20.0, k in 0.2_f64..3.0) {
        let t_star = r0.atan() / k;
        for frac in [0.25, 0.6, 0.9] {
            let t = frac * t_star;
            let closed = radial_norm(r0, k, t, 2.0);
            let numeric = radial_oracle(r0, k, t);
            prop_assert!((closed - numeric).abs() <= 1e-8 * (1.0 + closed));
        }
        prop_assert_eq!(radial_norm(r0, k, t_star * 1.0001, 2.0), 0.0);
    }

    /// Reduced dynamics: antiparallel to z with the prescribed speed.
    #[test]
    fn reduced_rhs_speed_law(seed in 0u64..500, k in 0.1_f64..4.0, mu in 1.1_f64..4.0) {
        let mut rng = SplitMix64::new(seed);
        let z: Vec<Real> = (0..5).map(|_| rng.next_normal()).collect();
        let r = norm2(&z);
        prop_assume!(r > 1e-6);
        let zdot = reduced_rhs(&z, k, mu);
        let expected_speed = k * (r.powf(1.0 - 2.0 / mu) + r.powf(1.0 + 2.0 / mu));
        prop_assert!((norm2(&zdot) - expected_speed).abs() <= 1e-9 * (1.0 + expected_speed));
        // antiparallel
        let cosine = dot(&z, &zdot) / (r * norm2(&zdot));
        prop_assert!((cosine + 1.0).abs() <= 1e-12);
    }

    /// Problem files round-trip bit for bit.
    #[test]
    fn problem_files_round_trip(seed in 0u64..2000, fam in 0usize..3) {
        let family = FAMILIES[fam];
        let p = generate_random(family, 4, 3, seed);
        let text = to_problem_file(&p).unwrap();
        let q: Program = parse_problem_file(&text).unwrap();
        let (pa, pb) = p.affine_constraints().unwrap();
        let (qa, qb) = q.affine_constraints().unwrap();
        prop_assert_eq!(pa, qa);
        prop_assert_eq!(pb, qb);
        prop_assert_eq!(p.cost_vector(), q.cost_vector());
        prop_assert_eq!(p.quadratic_term(), q.quadratic_term());
        let text2 = to_problem_file(&q).unwrap();
        prop_assert_eq!(text, text2);
    }

    /// Monotone gap stays nonnegative for arbitrary nonnegative pairs.
    #[test]
    fn monotone_gap_nonnegative(seed in 0u64..300, fam in 0usize..3) {
        let family = FAMILIES[fam];
        let p = generate_random(family, 5, 2, seed);
        let mut rng = SplitMix64::new(seed ^ 0xD1CE);
        let d = p.n() + p.m();
        let u: Vec<Real> = (0..d).map(|_| 3.0 * rng.next_f64()).collect();
        let w: Vec<Real> = (0..d).map(|_| 3.0 * rng.next_f64()).collect();
        prop_assert!(monotone_gap(&p, &u, &w) >= -1e-9);
    }

    /// Degree-1 homogeneity of the embedding.
    #[test]
    fn psi_homogeneity(seed in 0u64..300, lambda in 0.1_f64..10.0) {
        let p = generate_random(Family::ExpSum, 5, 2, seed);
        let mut rng = SplitMix64::new(seed ^ 0xABCD);
        let d = p.n() + p.m() + 1;
        let x_hat: Vec<Real> = (0..d).map(|_| 0.05 + 2.0 * rng.next_f64()).collect();
        let base = psi(&p, &x_hat, TAU_SAFEGUARD).value;
        let scaled_in: Vec<Real> = x_hat.iter().map(|v| v * lambda).collect();
        let scaled = psi(&p, &scaled_in, TAU_SAFEGUARD).value;
        let norm_base = norm2(&base);
        let diff: Real = scaled
            .iter()
            .zip(&base)
            .map(|(s, b)| (s - lambda * b).abs())
            .fold(0.0, Real::max);
        prop_assert!(diff <= 1e-12 * (1.0 + lambda * norm_base));
    }
}

/// The event time reported by the integrator agrees with the analytic
/// settling time of the radial law on the full embedding flow.
#[test]
fn hmcp_settling_time_matches_radial_law() {
    let p = sample_program(Family::Lp, 123);
    let k = prescribe_gain(1.0, 2.0, Scheme::FullHmcp, None).unwrap();
    let system = HmcpSystem::new(&p, k, 2.0);
    let d = p.n() + p.m() + 1;
    let state0 = HmcpState::uniform(d, 1.0).to_flat();
    let traj = integrate(&system, &state0, 1.0, &IntegratorConfig::default());
    let r0 = traj.residual_norms[0];
    let expected = r0.atan() / k;
    let got = traj.settled_at().expect("settles before T_p");
    assert!((got - expected).abs() <= 1e-6, "t* = {got}, analytic {expected}");
}
