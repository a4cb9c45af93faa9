//! Convex programs over nonnegative variables with evaluation oracles.
//!
//! A program is `min f(x)  s.t.  g(x) <= 0, x >= 0`. The built-in families
//! (LP, QP, exp-sum) store affine constraint data `(A, b)` given in the
//! `A x >= b` convention and canonicalize it as `g(x) = b - A x`, so both
//! conventions describe the same feasible set.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{symmetric_eigenvalues, DMat};
use crate::scalar::Scalar;

/// Exponent arguments in the exp-sum family are capped here before
/// exponentiation so evaluations stay finite when homogeneous trajectories
/// drive `x/tau` large; evaluations flag when the cap fires.
pub const EXP_ARG_CAP: f64 = 700.0;

/// Floating-point slack allowed on the min eigenvalue of a symmetrized
/// quadratic term before the program is rejected as nonconvex.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("quadratic term is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotConvex { min_eig: f64 },
    #[error("{op} is not supported for the {family:?} family")]
    Unsupported { op: &'static str, family: Family },
    #[error("problem file: {0}")]
    Parse(String),
    #[error("problem file: missing field `{field}` for family \"{family}\"")]
    MissingField { field: &'static str, family: &'static str },
}

/// Evaluation handles for a user-supplied convex program.
///
/// `f` and every `g_i` must be twice continuously differentiable and convex
/// on the nonnegative orthant; the weighted Hessian must be returned exactly
/// (no finite-difference fallback is applied on top of it).
pub trait NlpOracle<F: Scalar>: Send + Sync {
    /// `(n, m)`: variable and inequality-constraint counts.
    fn dims(&self) -> (usize, usize);
    fn objective(&self, x: &[F]) -> F;
    fn grad_f(&self, x: &[F]) -> Vec<F>;
    fn g(&self, x: &[F]) -> Vec<F>;
    /// `m x n` Jacobian of `g`.
    fn g_jacobian(&self, x: &[F]) -> DMat<F>;
    /// `nabla^2 f(x) + sum_i y_i nabla^2 g_i(x)`; symmetric PSD whenever `y >= 0`.
    fn weighted_hessian(&self, x: &[F], y: &[F]) -> DMat<F>;
}

/// Program family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Lp,
    Qp,
    ExpSum,
    Generic,
}

#[derive(Clone)]
enum FamilyData<F: Scalar> {
    Lp { c: Vec<F> },
    Qp { q: DMat<F>, c: Vec<F> },
    ExpSum,
    Generic(Arc<dyn NlpOracle<F>>),
}

/// All first- and second-order information needed at a point `(x, y)`.
#[derive(Debug, Clone)]
pub struct OracleEval<F> {
    pub grad_f: Vec<F>,
    pub g: Vec<F>,
    /// `m x n` Jacobian of `g`.
    pub g_jacobian: DMat<F>,
    /// `nabla^2 f(x) + sum_i y_i nabla^2 g_i(x)`.
    pub weighted_hessian: DMat<F>,
    /// True when the exp-sum argument cap fired during this evaluation.
    pub exp_capped: bool,
}

/// A convex NLP in nonnegative variables.
///
/// Immutable after construction and safe to share across threads; oracle
/// evaluation is pure.
#[derive(Clone)]
pub struct ConvexProgram<F: Scalar> {
    n: usize,
    m: usize,
    family: FamilyData<F>,
    affine: Option<(DMat<F>, Vec<F>)>,
}

impl<F: Scalar> std::fmt::Debug for ConvexProgram<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvexProgram")
            .field("family", &self.family())
            .field("n", &self.n)
            .field("m", &self.m)
            .finish_non_exhaustive()
    }
}

impl<F: Scalar> ConvexProgram<F> {
    /// LP: `min c^T x  s.t.  A x >= b, x >= 0`, i.e. `g(x) = b - A x`.
    pub fn make_lp(c: Vec<F>, a: DMat<F>, b: Vec<F>) -> Result<Self, ProblemError> {
        let (n, m) = check_affine_dims(c.len(), &a, &b)?;
        Ok(Self { n, m, family: FamilyData::Lp { c }, affine: Some((a, b)) })
    }

    /// QP: `min 1/2 x^T Q x + c^T x  s.t.  A x >= b, x >= 0`.
    ///
    /// `Q` is symmetrized before a min-eigenvalue check; a purely
    /// antisymmetric part is dropped silently.
    pub fn make_qp(q: DMat<F>, c: Vec<F>, a: DMat<F>, b: Vec<F>) -> Result<Self, ProblemError> {
        let (n, m) = check_affine_dims(c.len(), &a, &b)?;
        if q.rows() != n || q.cols() != n {
            return Err(ProblemError::DimensionMismatch(format!(
                "Q is {}x{}, expected {n}x{n}",
                q.rows(),
                q.cols()
            )));
        }
        let q = q.symmetrized();
        let min_eig = symmetric_eigenvalues(&q)
            .first()
            .copied()
            .unwrap_or_else(F::zero);
        if min_eig < F::of(-PSD_TOLERANCE) {
            return Err(ProblemError::NotConvex { min_eig: min_eig.lossy_f64() });
        }
        Ok(Self { n, m, family: FamilyData::Qp { q, c }, affine: Some((a, b)) })
    }

    /// Exp-sum NLP: `min sum_i e^{x_i}  s.t.  A x >= b, x >= 0`.
    pub fn make_expsum(a: DMat<F>, b: Vec<F>) -> Result<Self, ProblemError> {
        let (n, m) = check_affine_dims(a.cols(), &a, &b)?;
        Ok(Self { n, m, family: FamilyData::ExpSum, affine: Some((a, b)) })
    }

    /// Wraps user-supplied evaluation handles.
    pub fn from_oracle(oracle: Arc<dyn NlpOracle<F>>) -> Self {
        let (n, m) = oracle.dims();
        Self { n, m, family: FamilyData::Generic(oracle), affine: None }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn family(&self) -> Family {
        match self.family {
            FamilyData::Lp { .. } => Family::Lp,
            FamilyData::Qp { .. } => Family::Qp,
            FamilyData::ExpSum => Family::ExpSum,
            FamilyData::Generic(_) => Family::Generic,
        }
    }

    /// Constraint data `(A, b)` for the affine families.
    pub fn affine_constraints(&self) -> Option<(&DMat<F>, &[F])> {
        self.affine.as_ref().map(|(a, b)| (a, b.as_slice()))
    }

    pub fn cost_vector(&self) -> Option<&[F]> {
        match &self.family {
            FamilyData::Lp { c } | FamilyData::Qp { c, .. } => Some(c),
            _ => None,
        }
    }

    pub fn quadratic_term(&self) -> Option<&DMat<F>> {
        match &self.family {
            FamilyData::Qp { q, .. } => Some(q),
            _ => None,
        }
    }

    pub fn objective(&self, x: &[F]) -> F {
        assert_eq!(x.len(), self.n, "objective dimension mismatch");
        match &self.family {
            FamilyData::Lp { c } => crate::linalg::dot(c, x),
            FamilyData::Qp { q, c } => {
                F::of(0.5) * crate::linalg::dot(&q.matvec(x), x) + crate::linalg::dot(c, x)
            }
            FamilyData::ExpSum => x.iter().map(|&xi| xi.min(F::of(EXP_ARG_CAP)).exp()).sum(),
            FamilyData::Generic(o) => o.objective(x),
        }
    }

    /// Evaluates all oracle fields at `(x, y)`.
    ///
    /// Callers on the solver path supply `x >= 0` (tolerance -1e-12) and
    /// `y >= 0`; the built-in formulas remain well defined slightly outside
    /// that set, which integration transients rely on.
    pub fn evaluate(&self, x: &[F], y: &[F]) -> OracleEval<F> {
        assert_eq!(x.len(), self.n, "evaluate: x dimension mismatch");
        assert_eq!(y.len(), self.m, "evaluate: y dimension mismatch");
        match &self.family {
            FamilyData::Lp { c } => {
                let (a, b) = self.affine.as_ref().expect("LP stores affine data");
                OracleEval {
                    grad_f: c.clone(),
                    g: affine_g(a, b, x),
                    g_jacobian: a.scaled(-F::one()),
                    weighted_hessian: DMat::zeros(self.n, self.n),
                    exp_capped: false,
                }
            }
            FamilyData::Qp { q, c } => {
                let (a, b) = self.affine.as_ref().expect("QP stores affine data");
                let mut grad = q.matvec(x);
                for (gi, &ci) in grad.iter_mut().zip(c) {
                    *gi = *gi + ci;
                }
                OracleEval {
                    grad_f: grad,
                    g: affine_g(a, b, x),
                    g_jacobian: a.scaled(-F::one()),
                    weighted_hessian: q.clone(),
                    exp_capped: false,
                }
            }
            FamilyData::ExpSum => {
                let (a, b) = self.affine.as_ref().expect("exp-sum stores affine data");
                let cap = F::of(EXP_ARG_CAP);
                let mut capped = false;
                let grad: Vec<F> = x
                    .iter()
                    .map(|&xi| {
                        if xi > cap {
                            capped = true;
                        }
                        xi.min(cap).exp()
                    })
                    .collect();
                let mut hess = DMat::zeros(self.n, self.n);
                for (i, &gi) in grad.iter().enumerate() {
                    hess[(i, i)] = gi;
                }
                OracleEval {
                    grad_f: grad,
                    g: affine_g(a, b, x),
                    g_jacobian: a.scaled(-F::one()),
                    weighted_hessian: hess,
                    exp_capped: capped,
                }
            }
            FamilyData::Generic(o) => OracleEval {
                grad_f: o.grad_f(x),
                g: o.g(x),
                g_jacobian: o.g_jacobian(x),
                weighted_hessian: o.weighted_hessian(x, y),
                exp_capped: false,
            },
        }
    }

    /// Appends the contradictory row `sum_i x_i <= -1` (`A <- [A; -1^T]`,
    /// `b <- [b; 1]`), which no `x >= 0` satisfies.
    pub fn augment_infeasible(&self) -> Result<Self, ProblemError> {
        let (a, b) = self.affine.as_ref().ok_or(ProblemError::Unsupported {
            op: "augment_infeasible",
            family: self.family(),
        })?;
        let row = DMat::from_rows(&[vec![-F::one(); self.n]]).expect("single row");
        let a2 = a.vstack(&row);
        let mut b2 = b.clone();
        b2.push(F::one());
        let mut out = self.clone();
        out.m += 1;
        out.affine = Some((a2, b2));
        Ok(out)
    }

    /// Reformulates this program, reinterpreting its variable as free, into
    /// an equivalent program over `2n` nonnegative variables via
    /// `x = x_plus - x_minus`, with a map back to the free variable.
    pub fn split_free(&self) -> (Self, FreeRecovery) {
        let recovery = FreeRecovery { n_free: self.n };
        let split = match &self.family {
            FamilyData::Lp { c } => {
                let (a, b) = self.affine.as_ref().expect("LP stores affine data");
                let c2 = doubled_cost(c);
                let a2 = a.hstack(&a.scaled(-F::one()));
                Self::make_lp(c2, a2, b.clone()).expect("split dims are consistent")
            }
            FamilyData::Qp { q, c } => {
                let (a, b) = self.affine.as_ref().expect("QP stores affine data");
                let neg = q.scaled(-F::one());
                let top = q.hstack(&neg);
                let bottom = neg.hstack(q);
                let q2 = top.vstack(&bottom);
                let c2 = doubled_cost(c);
                let a2 = a.hstack(&a.scaled(-F::one()));
                Self::make_qp(q2, c2, a2, b.clone()).expect("split Q stays PSD")
            }
            _ => Self::from_oracle(Arc::new(SplitOracle { inner: self.clone() })),
        };
        (split, recovery)
    }
}

/// Map from a split program's `2n` nonnegative variables back to the
/// original `n` free variables.
#[derive(Debug, Clone, Copy)]
pub struct FreeRecovery {
    n_free: usize,
}

impl FreeRecovery {
    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn recover<F: Scalar>(&self, split_x: &[F]) -> Vec<F> {
        assert_eq!(split_x.len(), 2 * self.n_free, "recover dimension mismatch");
        (0..self.n_free).map(|i| split_x[i] - split_x[self.n_free + i]).collect()
    }
}

/// Presents any program, with its variable reinterpreted as free, as an
/// oracle over the doubled nonnegative variables.
struct SplitOracle<F: Scalar> {
    inner: ConvexProgram<F>,
}

impl<F: Scalar> SplitOracle<F> {
    fn fold(&self, u: &[F]) -> Vec<F> {
        let n = self.inner.n();
        (0..n).map(|i| u[i] - u[n + i]).collect()
    }
}

impl<F: Scalar> NlpOracle<F> for SplitOracle<F> {
    fn dims(&self) -> (usize, usize) {
        (2 * self.inner.n(), self.inner.m())
    }

    fn objective(&self, u: &[F]) -> F {
        self.inner.objective(&self.fold(u))
    }

    fn grad_f(&self, u: &[F]) -> Vec<F> {
        let x = self.fold(u);
        let g = self.inner.evaluate(&x, &vec![F::zero(); self.inner.m()]).grad_f;
        doubled_cost(&g)
    }

    fn g(&self, u: &[F]) -> Vec<F> {
        let x = self.fold(u);
        self.inner.evaluate(&x, &vec![F::zero(); self.inner.m()]).g
    }

    fn g_jacobian(&self, u: &[F]) -> DMat<F> {
        let x = self.fold(u);
        let j = self.inner.evaluate(&x, &vec![F::zero(); self.inner.m()]).g_jacobian;
        j.hstack(&j.scaled(-F::one()))
    }

    fn weighted_hessian(&self, u: &[F], y: &[F]) -> DMat<F> {
        let x = self.fold(u);
        let h = self.inner.evaluate(&x, y).weighted_hessian;
        let neg = h.scaled(-F::one());
        h.hstack(&neg).vstack(&neg.hstack(&h))
    }
}

fn doubled_cost<F: Scalar>(c: &[F]) -> Vec<F> {
    let mut out = c.to_vec();
    out.extend(c.iter().map(|&ci| -ci));
    out
}

fn affine_g<F: Scalar>(a: &DMat<F>, b: &[F], x: &[F]) -> Vec<F> {
    let ax = a.matvec(x);
    b.iter().zip(&ax).map(|(&bi, &axi)| bi - axi).collect()
}

fn check_affine_dims<F: Scalar>(
    n: usize,
    a: &DMat<F>,
    b: &[F],
) -> Result<(usize, usize), ProblemError> {
    if n == 0 {
        return Err(ProblemError::DimensionMismatch("n must be positive".into()));
    }
    if a.cols() != n {
        return Err(ProblemError::DimensionMismatch(format!(
            "A has {} columns, expected {n}",
            a.cols()
        )));
    }
    if a.rows() == 0 {
        return Err(ProblemError::DimensionMismatch("m must be positive".into()));
    }
    if b.len() != a.rows() {
        return Err(ProblemError::DimensionMismatch(format!(
            "b has length {}, expected {} (rows of A)",
            b.len(),
            a.rows()
        )));
    }
    Ok((n, a.rows()))
}

/// On-disk problem document (UTF-8 JSON).
#[derive(Debug, Serialize, Deserialize)]
struct ProblemDoc {
    family: String,
    n: usize,
    m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<Vec<f64>>,
    #[serde(rename = "Q", skip_serializing_if = "Option::is_none")]
    q: Option<Vec<Vec<f64>>>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

/// Parses a problem document:
/// `{"family":"lp"|"qp"|"expsum","n":..,"m":..,"c":[..],"Q":[[..]],"A":[[..]],"b":[..]}`
/// with row-major matrices; `c` is required for lp/qp and `Q` for qp.
pub fn parse_problem_file<F: Scalar>(text: &str) -> Result<ConvexProgram<F>, ProblemError> {
    let doc: ProblemDoc =
        serde_json::from_str(text).map_err(|e| ProblemError::Parse(e.to_string()))?;

    let a = matrix_from_doc(&doc.a, "A")?;
    if a.rows() != doc.m || a.cols() != doc.n {
        return Err(ProblemError::DimensionMismatch(format!(
            "A is {}x{}, header says m={} n={}",
            a.rows(),
            a.cols(),
            doc.m,
            doc.n
        )));
    }
    let b: Vec<F> = doc.b.iter().map(|&v| F::of(v)).collect();

    match doc.family.as_str() {
        "lp" => {
            let c = doc
                .c
                .ok_or(ProblemError::MissingField { field: "c", family: "lp" })?
                .iter()
                .map(|&v| F::of(v))
                .collect();
            ConvexProgram::make_lp(c, a, b)
        }
        "qp" => {
            let c = doc
                .c
                .ok_or(ProblemError::MissingField { field: "c", family: "qp" })?
                .iter()
                .map(|&v| F::of(v))
                .collect();
            let q_rows = doc.q.ok_or(ProblemError::MissingField { field: "Q", family: "qp" })?;
            let q = matrix_from_doc(&q_rows, "Q")?;
            ConvexProgram::make_qp(q, c, a, b)
        }
        "expsum" => ConvexProgram::make_expsum(a, b),
        other => Err(ProblemError::Parse(format!(
            "unknown family tag \"{other}\" (expected \"lp\", \"qp\", or \"expsum\")"
        ))),
    }
}

/// Serializes a built-in program back to the document format; round-trips
/// bit-for-bit through [`parse_problem_file`].
pub fn to_problem_file<F: Scalar>(program: &ConvexProgram<F>) -> Result<String, ProblemError> {
    let (a, b) = program.affine_constraints().ok_or(ProblemError::Unsupported {
        op: "to_problem_file",
        family: program.family(),
    })?;
    let family = match program.family() {
        Family::Lp => "lp",
        Family::Qp => "qp",
        Family::ExpSum => "expsum",
        Family::Generic => unreachable!("generic has no affine data"),
    };
    let doc = ProblemDoc {
        family: family.to_string(),
        n: program.n(),
        m: program.m(),
        c: program.cost_vector().map(|c| c.iter().map(|v| v.lossy_f64()).collect()),
        q: program.quadratic_term().map(matrix_to_doc),
        a: matrix_to_doc(a),
        b: b.iter().map(|v| v.lossy_f64()).collect(),
    };
    serde_json::to_string_pretty(&doc).map_err(|e| ProblemError::Parse(e.to_string()))
}

fn matrix_from_doc<F: Scalar>(rows: &[Vec<f64>], name: &str) -> Result<DMat<F>, ProblemError> {
    let converted: Vec<Vec<F>> = rows
        .iter()
        .map(|row| row.iter().map(|&v| F::of(v)).collect())
        .collect();
    DMat::from_rows(&converted)
        .ok_or_else(|| ProblemError::Parse(format!("matrix {name} has ragged rows")))
}

fn matrix_to_doc<F: Scalar>(m: &DMat<F>) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).iter().map(|v| v.lossy_f64()).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    fn unit_lp() -> ConvexProgram<f64> {
        // min x s.t. x >= 1, x >= 0
        ConvexProgram::make_lp(
            vec![1.0],
            DMat::from_rows(&[vec![1.0]]).unwrap(),
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn lp_sign_convention() {
        let p = unit_lp();
        let eval = p.evaluate(&[2.0], &[0.0]);
        // g(x) = 1 - x
        assert_eq!(eval.g, vec![-1.0]);
        assert_eq!(eval.weighted_hessian[(0, 0)], 0.0);
    }

    #[test]
    fn lp_rejects_dimension_mismatch() {
        let a = DMat::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let err = ConvexProgram::make_lp(vec![1.0], a, vec![1.0]).unwrap_err();
        assert!(matches!(err, ProblemError::DimensionMismatch(_)), "{err}");
    }

    #[test]
    fn qp_identity_hessian() {
        let p = ConvexProgram::make_qp(
            DMat::identity(1),
            vec![0.0],
            DMat::from_rows(&[vec![1.0]]).unwrap(),
            vec![0.0],
        )
        .unwrap();
        let eval = p.evaluate(&[0.7], &[0.3]);
        assert_eq!(eval.weighted_hessian[(0, 0)], 1.0);
        assert_eq!(eval.grad_f, vec![0.7]);
    }

    #[test]
    fn qp_symmetrization_drops_antisymmetric_part() {
        let q = DMat::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let a = DMat::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let p = ConvexProgram::make_qp(q, vec![0.0, 0.0], a, vec![0.0]).unwrap();
        // effective Q is zero
        assert_eq!(p.objective(&[3.0, 4.0]), 0.0);
    }

    #[test]
    fn qp_rejects_indefinite() {
        let q = DMat::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let a = DMat::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let err = ConvexProgram::make_qp(q, vec![0.0, 0.0], a, vec![0.0]).unwrap_err();
        assert!(matches!(err, ProblemError::NotConvex { .. }));
    }

    #[test]
    fn expsum_values_at_origin_and_ln2() {
        let a = DMat::from_rows(&[vec![1.0, 1.0, 1.0, 1.0, 1.0]]).unwrap();
        let p = ConvexProgram::make_expsum(a, vec![0.0]).unwrap();
        let x0 = vec![0.0; 5];
        assert_eq!(p.objective(&x0), 5.0);
        let eval = p.evaluate(&x0, &[0.0]);
        assert_eq!(eval.grad_f, vec![1.0; 5]);
        for i in 0..5 {
            assert_eq!(eval.weighted_hessian[(i, i)], 1.0);
        }

        let mut x = vec![0.0; 5];
        x[0] = 2.0f64.ln();
        let eval = p.evaluate(&x, &[0.0]);
        assert!((eval.grad_f[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn expsum_cap_fires_and_stays_finite() {
        let a = DMat::from_rows(&[vec![1.0]]).unwrap();
        let p = ConvexProgram::make_expsum(a, vec![0.0_f64]).unwrap();
        let eval = p.evaluate(&[800.0], &[0.0]);
        assert!(eval.exp_capped);
        assert!(eval.grad_f[0].is_finite());
    }

    #[test]
    fn augment_adds_contradictory_row() {
        let p = unit_lp();
        let aug = p.augment_infeasible().unwrap();
        assert_eq!(aug.m(), 2);
        let (a, b) = aug.affine_constraints().unwrap();
        assert_eq!(a.row(1), &[-1.0]);
        assert_eq!(b[1], 1.0);
        // augmenting twice keeps it infeasible
        let aug2 = aug.augment_infeasible().unwrap();
        assert_eq!(aug2.m(), 3);
    }

    #[test]
    fn augmented_row_violated_on_nonnegative_grid() {
        let a = DMat::from_rows(&[vec![0.3, -0.2, 0.9], vec![1.0, 0.5, -0.4]]).unwrap();
        let p = ConvexProgram::make_lp(vec![1.0, 2.0, 3.0], a, vec![-1.0, -2.0]).unwrap();
        let aug = p.augment_infeasible().unwrap();
        let (a2, b2) = aug.affine_constraints().unwrap();
        // any nonnegative sample violates the added row (A x)_last >= 1
        let mut state = 0.5_f64;
        for _ in 0..1000 {
            state = (state * 997.0 + 0.123).fract();
            let x = vec![3.0 * state, (state * 7.0).fract(), (state * 13.0).fract()];
            let ax_last = dot(a2.row(a2.rows() - 1), &x);
            assert!(ax_last < b2[2]);
        }
    }

    #[test]
    fn split_identity_recovery() {
        let p = unit_lp();
        let (split, rec) = p.split_free();
        assert_eq!(split.n(), 2);
        assert_eq!(rec.recover(&[2.0, 0.5]), vec![1.5]);
        // zero objective, equal parts map to zero
        assert_eq!(rec.recover(&[0.7, 0.7]), vec![0.0]);
    }

    #[test]
    fn split_expsum_matches_folded_oracle() {
        let a = DMat::from_rows(&[vec![1.0, -1.0]]).unwrap();
        let p = ConvexProgram::make_expsum(a, vec![0.0]).unwrap();
        let (split, _) = p.split_free();
        assert_eq!(split.family(), Family::Generic);
        let u = [0.4_f64, 0.1, 0.2, 0.9];
        let x = [0.2_f64, -0.8];
        assert!((split.objective(&u) - p.objective(&x)).abs() < 1e-15);
        let se = split.evaluate(&u, &[0.3]);
        let pe = p.evaluate(&x, &[0.3]);
        assert_eq!(se.g, pe.g);
        assert_eq!(se.grad_f[0], pe.grad_f[0]);
        assert_eq!(se.grad_f[2], -pe.grad_f[0]);
    }

    #[test]
    fn parse_minimal_lp_document() {
        let text = r#"{"family":"lp","n":1,"m":1,"c":[1.0],"A":[[1.0]],"b":[1.0]}"#;
        let p: ConvexProgram<f64> = parse_problem_file(text).unwrap();
        assert_eq!(p.family(), Family::Lp);
        assert_eq!((p.n(), p.m()), (1, 1));
    }

    #[test]
    fn parse_qp_missing_q_names_field() {
        let text = r#"{"family":"qp","n":1,"m":1,"c":[1.0],"A":[[1.0]],"b":[1.0]}"#;
        let err = parse_problem_file::<f64>(text).unwrap_err();
        assert!(err.to_string().contains('Q'), "{err}");
    }

    #[test]
    fn parse_rejects_unknown_family() {
        let text = r#"{"family":"sdp","n":1,"m":1,"A":[[1.0]],"b":[1.0]}"#;
        let err = parse_problem_file::<f64>(text).unwrap_err();
        assert!(err.to_string().contains("sdp"), "{err}");
    }

    #[test]
    fn parse_reports_non_numeric_entries_with_context() {
        let text = "{\"family\":\"lp\",\"n\":1,\"m\":1,\n\"c\":[\"x\"],\"A\":[[1.0]],\"b\":[1.0]}";
        let err = parse_problem_file::<f64>(text).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }
}
