//! Ground-truth reference solutions, independent of the ODE pipeline.
//!
//! * LP: exhaustive enumeration of basic solutions over active-set
//!   combinations, accepting a vertex only with a sign-feasible dual.
//! * QP: enumeration of complementarity patterns, each solved as an
//!   equality-constrained system.
//! * exp-sum: damped-Newton log-barrier path following from a strictly
//!   interior point found by a max-slack LP.

use thiserror::Error;

use crate::linalg::{dot, norm_inf, DMat, Lu};
use crate::problem::{ConvexProgram, Family};
use crate::Real;

/// Enumeration budget: active-set searches beyond this many candidate
/// patterns are declared unavailable instead of ground truth.
const PATTERN_BUDGET: u64 = 1 << 20;

const FEAS_TOL: Real = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum RefSolution {
    Optimal { x: Vec<Real>, y: Vec<Real> },
    Infeasible,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("reference oracle unavailable: {0}")]
    Unavailable(String),
    #[error("problem is feasible but admits no KKT point (objective unbounded below)")]
    Unbounded,
}

/// Reference solution for a built-in desk-scale program (`n + m <= 30`).
pub fn reference_solution(program: &ConvexProgram<Real>) -> Result<RefSolution, OracleError> {
    if program.n() + program.m() > 30 {
        return Err(OracleError::Unavailable("problem exceeds desk scale (n + m > 30)".into()));
    }
    match program.family() {
        Family::Lp => lp_reference(program),
        Family::Qp => qp_reference(program),
        Family::ExpSum => expsum_reference(program),
        Family::Generic => {
            Err(OracleError::Unavailable("no reference oracle for generic oracles".into()))
        }
    }
}

/// Vertices of `{x >= 0, A x >= b}` come from choosing `n` active rows of
/// `[A; I]`; a vertex with a sign-feasible dual is optimal.
fn lp_reference(program: &ConvexProgram<Real>) -> Result<RefSolution, OracleError> {
    let (a, b) = program.affine_constraints().expect("LP stores affine data");
    let c = program.cost_vector().expect("LP stores a cost vector");
    let (n, m) = (program.n(), program.m());
    let total = m + n;

    let combos = binomial(total, n);
    if combos > PATTERN_BUDGET {
        return Err(OracleError::Unavailable(format!(
            "vertex enumeration needs {combos} combinations"
        )));
    }

    let row = |i: usize| -> Vec<Real> {
        if i < m {
            a.row(i).to_vec()
        } else {
            let mut e = vec![0.0; n];
            e[i - m] = 1.0;
            e
        }
    };
    let rhs = |i: usize| -> Real { if i < m { b[i] } else { 0.0 } };

    let scale = 1.0 + norm_inf(b) + norm_inf(c);
    let mut any_feasible = false;
    let mut best: Option<(Real, Vec<Real>)> = None;

    for active in Combinations::new(total, n) {
        let rows: Vec<Vec<Real>> = active.iter().map(|&i| row(i)).collect();
        let basis = DMat::from_rows(&rows).expect("rows share length n");
        let lu = match Lu::factor(&basis) {
            Ok(lu) => lu,
            Err(_) => continue,
        };
        let r: Vec<Real> = active.iter().map(|&i| rhs(i)).collect();
        let x = lu.solve(&r);
        if !is_lp_feasible(a, b, &x, scale) {
            continue;
        }
        any_feasible = true;
        let obj = dot(c, &x);
        if best.as_ref().map_or(true, |(bo, _)| obj < *bo) {
            best = Some((obj, x.clone()));
        }

        // dual: c = [A; I]_S^T lambda_S with lambda_S >= 0
        let lu_t = match Lu::factor(&basis.transpose()) {
            Ok(lu) => lu,
            Err(_) => continue,
        };
        let lambda = lu_t.solve(c);
        if lambda.iter().any(|&l| l < -FEAS_TOL * scale) {
            continue;
        }
        let mut y = vec![0.0; m];
        for (pos, &i) in active.iter().enumerate() {
            if i < m {
                y[i] = lambda[pos].max(0.0);
            }
        }
        return Ok(RefSolution::Optimal { x, y });
    }

    if any_feasible {
        Err(OracleError::Unbounded)
    } else {
        Ok(RefSolution::Infeasible)
    }
}

/// Enumerates complementarity patterns `(W, B)`: constraints in `W` hold
/// with equality (multiplier free), variables in `B` sit at zero (reduced
/// cost free). Each pattern is one square KKT system.
fn qp_reference(program: &ConvexProgram<Real>) -> Result<RefSolution, OracleError> {
    let (a, b) = program.affine_constraints().expect("QP stores affine data");
    let c = program.cost_vector().expect("QP stores a cost vector");
    let q = program.quadratic_term().expect("QP stores Q");
    let (n, m) = (program.n(), program.m());
    let bits = m + n;
    if (1u64 << bits) > PATTERN_BUDGET {
        return Err(OracleError::Unavailable(format!(
            "pattern enumeration needs 2^{bits} systems"
        )));
    }

    let scale = 1.0 + norm_inf(b) + norm_inf(c);
    for pattern in 0u64..(1u64 << bits) {
        let active_rows: Vec<usize> = (0..m).filter(|i| pattern >> i & 1 == 1).collect();
        let zero_vars: Vec<usize> = (0..n).filter(|j| pattern >> (m + j) & 1 == 1).collect();
        let dim = n + active_rows.len() + zero_vars.len();

        // unknown layout: [x, y_W, s_B]
        let mut sys = DMat::zeros(dim, dim);
        let mut rhs = vec![0.0; dim];
        for i in 0..n {
            for j in 0..n {
                sys[(i, j)] = q[(i, j)];
            }
            for (col, &w) in active_rows.iter().enumerate() {
                sys[(i, n + col)] = -a[(w, i)];
            }
            for (col, &z) in zero_vars.iter().enumerate() {
                if z == i {
                    sys[(i, n + active_rows.len() + col)] = -1.0;
                }
            }
            rhs[i] = -c[i];
        }
        for (row, &w) in active_rows.iter().enumerate() {
            for j in 0..n {
                sys[(n + row, j)] = a[(w, j)];
            }
            rhs[n + row] = b[w];
        }
        for (row, &z) in zero_vars.iter().enumerate() {
            sys[(n + active_rows.len() + row, z)] = 1.0;
        }

        let lu = match Lu::factor(&sys) {
            Ok(lu) => lu,
            Err(_) => continue,
        };
        let sol = lu.solve(&rhs);
        let x = &sol[..n];
        let y_w = &sol[n..n + active_rows.len()];
        let s_b = &sol[n + active_rows.len()..];

        if !is_lp_feasible(a, b, x, scale) {
            continue;
        }
        if y_w.iter().any(|&v| v < -FEAS_TOL * scale) || s_b.iter().any(|&v| v < -FEAS_TOL * scale)
        {
            continue;
        }
        let mut y = vec![0.0; m];
        for (pos, &w) in active_rows.iter().enumerate() {
            y[w] = y_w[pos].max(0.0);
        }
        return Ok(RefSolution::Optimal { x: x.to_vec(), y });
    }

    // No KKT pattern: a strictly convex QP is solvable iff feasible.
    match feasibility_via_lp(a, b)? {
        true => Err(OracleError::Unavailable(
            "no complementarity pattern passed; degenerate instance".into(),
        )),
        false => Ok(RefSolution::Infeasible),
    }
}

fn expsum_reference(program: &ConvexProgram<Real>) -> Result<RefSolution, OracleError> {
    let (a, b) = program.affine_constraints().expect("exp-sum stores affine data");
    let (n, m) = (program.n(), program.m());

    let interior = match max_slack_interior(a, b)? {
        Some(x) => x,
        None => return Ok(RefSolution::Infeasible),
    };

    // Damped Newton on the mu-central-path equations in primal-dual form
    //
    //   grad f(x) - A^T ys - yb = 0,  ys .* (Ax - b) = mu,  yb .* x = mu.
    //
    // Carrying the multipliers as iterates (rather than reconstructing them
    // as mu/slack) keeps the stationarity residual at roundoff level even
    // though the late-path Newton systems are ill-conditioned.
    let mut x = interior;
    let mut mu = 1.0_f64;
    let mu_end = 0.5e-10 / (n + m) as Real;
    let slack_of = |x: &[Real]| -> Vec<Real> {
        let ax = a.matvec(x);
        ax.iter().zip(b).map(|(axi, bi)| axi - bi).collect()
    };
    let mut ys: Vec<Real> = slack_of(&x).iter().map(|&s| mu / s).collect();
    let mut yb: Vec<Real> = x.iter().map(|&xi| mu / xi).collect();

    loop {
        let target = if mu <= mu_end { 1e-12 } else { 0.1 * mu };
        central_path_stage(program, a, &mut x, &mut ys, &mut yb, mu, target)?;
        if mu <= mu_end {
            break;
        }
        mu = (mu * 0.2).max(mu_end);
    }

    Ok(RefSolution::Optimal { x, y: ys })
}

/// Newton iterations on the primal-dual central-path residual at fixed
/// `mu`, damped by fraction-to-boundary, until the residual infinity norm
/// drops below `target`.
#[allow(clippy::too_many_arguments)]
fn central_path_stage(
    program: &ConvexProgram<Real>,
    a: &DMat<Real>,
    x: &mut Vec<Real>,
    ys: &mut Vec<Real>,
    yb: &mut Vec<Real>,
    mu: Real,
    target: Real,
) -> Result<(), OracleError> {
    let (n, m) = (program.n(), program.m());
    let dim = n + m + n;

    for _iter in 0..80 {
        let eval = program.evaluate(x, ys);
        let slack: Vec<Real> = eval.g.iter().map(|&gi| -gi).collect();
        if slack.iter().any(|&s| s <= 0.0)
            || x.iter().any(|&v| v <= 0.0)
            || ys.iter().chain(yb.iter()).any(|&v| v <= 0.0)
        {
            return Err(OracleError::Unavailable("central-path iterate left the interior".into()));
        }

        let at_ys = a.matvec_t(ys);
        let r_stat: Vec<Real> = (0..n).map(|j| eval.grad_f[j] - at_ys[j] - yb[j]).collect();
        let r_slack: Vec<Real> = (0..m).map(|i| ys[i] * slack[i] - mu).collect();
        let r_bound: Vec<Real> = (0..n).map(|j| yb[j] * x[j] - mu).collect();
        let res_inf = norm_inf(&r_stat).max(norm_inf(&r_slack)).max(norm_inf(&r_bound));
        if res_inf <= target {
            return Ok(());
        }

        // [ H        -A^T      -I      ] [dx ]   [ -r_stat  ]
        // [ Ys A      S         0      ] [dys] = [ -r_slack ]
        // [ Yb        0         X      ] [dyb]   [ -r_bound ]
        let h = &eval.weighted_hessian;
        let mut sys = DMat::zeros(dim, dim);
        let mut rhs = vec![0.0; dim];
        for j in 0..n {
            for l in 0..n {
                sys[(j, l)] = h[(j, l)];
            }
            for i in 0..m {
                sys[(j, n + i)] = -a[(i, j)];
            }
            sys[(j, n + m + j)] = -1.0;
            rhs[j] = -r_stat[j];
        }
        for i in 0..m {
            for l in 0..n {
                sys[(n + i, l)] = ys[i] * a[(i, l)];
            }
            sys[(n + i, n + i)] = slack[i];
            rhs[n + i] = -r_slack[i];
        }
        for j in 0..n {
            sys[(n + m + j, j)] = yb[j];
            sys[(n + m + j, n + m + j)] = x[j];
            rhs[n + m + j] = -r_bound[j];
        }

        let lu = Lu::factor(&sys)
            .map_err(|_| OracleError::Unavailable("central-path system is singular".into()))?;
        let step = lu.solve(&rhs);
        if step.iter().any(|v| !v.is_finite()) {
            return Err(OracleError::Unavailable("central-path step is non-finite".into()));
        }
        let (dx, rest) = step.split_at(n);
        let (dys, dyb) = rest.split_at(m);

        // fraction-to-boundary over x, slacks, and both multiplier blocks
        let a_dx = a.matvec(dx);
        let mut alpha = 1.0_f64;
        let mut clamp = |value: Real, delta: Real| {
            if delta < 0.0 {
                alpha = alpha.min(-0.995 * value / delta);
            }
        };
        for (j, &dj) in dx.iter().enumerate() {
            clamp(x[j], dj);
        }
        for (i, &di) in a_dx.iter().enumerate() {
            clamp(slack[i], di);
        }
        for (i, &di) in dys.iter().enumerate() {
            clamp(ys[i], di);
        }
        for (j, &dj) in dyb.iter().enumerate() {
            clamp(yb[j], dj);
        }

        for j in 0..n {
            x[j] += alpha * dx[j];
        }
        for i in 0..m {
            ys[i] += alpha * dys[i];
        }
        for j in 0..n {
            yb[j] += alpha * dyb[j];
        }
    }
    Err(OracleError::Unavailable("central-path stage failed to converge".into()))
}

/// Strictly interior point of `{x >= 0, A x >= b}` via the max-slack LP
/// `max t  s.t.  A x - t 1 >= b, x - t 1 >= 0, t <= 1, (x, t) >= 0`,
/// followed by a min-sum pass that keeps the point's coordinates small (a
/// max-slack vertex can have huge coordinates, which makes an exponential
/// objective start astronomically off-center).
/// `None` means the region is empty; an error means it has no interior.
fn max_slack_interior(
    a: &DMat<Real>,
    b: &[Real],
) -> Result<Option<Vec<Real>>, OracleError> {
    let (m, n) = (a.rows(), a.cols());
    let mut rows: Vec<Vec<Real>> = Vec::with_capacity(m + n + 1);
    let mut rhs: Vec<Real> = Vec::with_capacity(m + n + 1);
    for i in 0..m {
        let mut row = a.row(i).to_vec();
        row.push(-1.0);
        rows.push(row);
        rhs.push(b[i]);
    }
    for j in 0..n {
        let mut row = vec![0.0; n + 1];
        row[j] = 1.0;
        row[n] = -1.0;
        rows.push(row);
        rhs.push(0.0);
    }
    let mut cap = vec![0.0; n + 1];
    cap[n] = -1.0;
    rows.push(cap);
    rhs.push(-1.0);

    let mut cost = vec![0.0; n + 1];
    cost[n] = -1.0;
    let ext = ConvexProgram::make_lp(cost, DMat::from_rows(&rows).unwrap(), rhs)
        .expect("max-slack LP dimensions are consistent");
    let t_star = match lp_reference(&ext)? {
        RefSolution::Infeasible => return Ok(None),
        RefSolution::Optimal { x: z, .. } => z[n],
    };
    if t_star <= 1e-9 {
        return Err(OracleError::Unavailable("feasible region has no strict interior".into()));
    }

    // min sum(x) over the margin-t/2 shrunk region: strictly interior with
    // coordinates no larger than a smallest-sum vertex needs
    let margin = 0.5 * t_star.min(1.0);
    let mut rows: Vec<Vec<Real>> = Vec::with_capacity(m + n);
    let mut rhs: Vec<Real> = Vec::with_capacity(m + n);
    for i in 0..m {
        rows.push(a.row(i).to_vec());
        rhs.push(b[i] + margin);
    }
    for j in 0..n {
        let mut row = vec![0.0; n];
        row[j] = 1.0;
        rows.push(row);
        rhs.push(margin);
    }
    let shrunk = ConvexProgram::make_lp(vec![1.0; n], DMat::from_rows(&rows).unwrap(), rhs)
        .expect("shrunk LP dimensions are consistent");
    match lp_reference(&shrunk)? {
        RefSolution::Optimal { x, .. } => Ok(Some(x)),
        RefSolution::Infeasible => Err(OracleError::Unavailable(
            "interior shrink unexpectedly infeasible".into(),
        )),
    }
}

fn feasibility_via_lp(a: &DMat<Real>, b: &[Real]) -> Result<bool, OracleError> {
    let n = a.cols();
    let probe = ConvexProgram::make_lp(vec![0.0; n], a.clone(), b.to_vec())
        .expect("dimensions already validated");
    match lp_reference(&probe) {
        Ok(RefSolution::Optimal { .. }) => Ok(true),
        Ok(RefSolution::Infeasible) => Ok(false),
        Err(OracleError::Unbounded) => Ok(true),
        Err(e) => Err(e),
    }
}

fn is_lp_feasible(a: &DMat<Real>, b: &[Real], x: &[Real], scale: Real) -> bool {
    let tol = FEAS_TOL * scale;
    if x.iter().any(|&xi| xi < -tol) {
        return false;
    }
    let ax = a.matvec(x);
    ax.iter().zip(b).all(|(axi, bi)| *axi >= bi - tol)
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    acc
}

/// Lexicographic k-subsets of `0..n`.
struct Combinations {
    n: usize,
    indices: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self { n, indices: (0..k).collect(), done: k > n }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let current = self.indices.clone();
        let k = self.indices.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.indices[i] != i + self.n - k {
                self.indices[i] += 1;
                for j in i + 1..k {
                    self.indices[j] = self.indices[j - 1] + 1;
                }
                break;
            }
        }
        Some(current)
    }
}
