//! The KKT mapping of a convex program, viewed as a monotone
//! complementarity system over the stacked point `x_bar = col(x, y)`.

use crate::linalg::{dot, norm2, DMat};
use crate::problem::ConvexProgram;
use crate::scalar::Scalar;

/// Stacked primal-dual pair of dimension `n_bar = n + m` each.
#[derive(Debug, Clone, PartialEq)]
pub struct McpPoint<F> {
    pub x_bar: Vec<F>,
    pub s_bar: Vec<F>,
}

/// KKT diagnostics split into the three classical blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals<F> {
    /// `||min(phi_1, 0)|| + ||min(x, 0)||`: dual-cone and sign violations.
    pub stationarity: F,
    /// `||max(g(x), 0)||`: primal constraint violation.
    pub feasibility: F,
    /// `|x^T phi_1| + |y^T g|`: complementary-slackness violation.
    pub complementarity: F,
}

impl<F: Scalar> KktResiduals<F> {
    pub fn max(&self) -> F {
        self.stationarity.max(self.feasibility).max(self.complementarity)
    }
}

/// `phi(x_bar) = col(grad f(x) + sum_i y_i grad g_i(x), -g(x))`.
pub fn phi<F: Scalar>(program: &ConvexProgram<F>, x_bar: &[F]) -> Vec<F> {
    let (n, m) = (program.n(), program.m());
    assert_eq!(x_bar.len(), n + m, "phi dimension mismatch");
    let (x, y) = x_bar.split_at(n);
    let eval = program.evaluate(x, y);
    let mut out = eval.grad_f;
    let jty = eval.g_jacobian.matvec_t(y);
    for (oi, ji) in out.iter_mut().zip(jty) {
        *oi = *oi + ji;
    }
    out.extend(eval.g.iter().map(|&gi| -gi));
    out
}

/// Jacobian of `phi`: `[[H_w, Dg^T], [-Dg, 0]]` with
/// `H_w = nabla^2 f + sum_i y_i nabla^2 g_i`. Generally nonsymmetric.
pub fn phi_jacobian<F: Scalar>(program: &ConvexProgram<F>, x_bar: &[F]) -> DMat<F> {
    let (n, m) = (program.n(), program.m());
    assert_eq!(x_bar.len(), n + m, "phi_jacobian dimension mismatch");
    let (x, y) = x_bar.split_at(n);
    let eval = program.evaluate(x, y);
    let d = n + m;
    let mut j = DMat::zeros(d, d);
    for i in 0..n {
        for k in 0..n {
            j[(i, k)] = eval.weighted_hessian[(i, k)];
        }
    }
    for i in 0..m {
        for k in 0..n {
            let dg = eval.g_jacobian[(i, k)];
            j[(k, n + i)] = dg;
            j[(n + i, k)] = -dg;
        }
    }
    j
}

/// `(x_bar1 - x_bar2)^T (phi(x_bar1) - phi(x_bar2))`; nonnegative (to
/// roundoff) for convex programs, which is what makes the KKT system a
/// monotone complementarity problem.
pub fn monotone_gap<F: Scalar>(program: &ConvexProgram<F>, x_bar1: &[F], x_bar2: &[F]) -> F {
    let p1 = phi(program, x_bar1);
    let p2 = phi(program, x_bar2);
    let dx: Vec<F> = x_bar1.iter().zip(x_bar2).map(|(&a, &b)| a - b).collect();
    let dp: Vec<F> = p1.iter().zip(&p2).map(|(&a, &b)| a - b).collect();
    dot(&dx, &dp)
}

/// KKT residual triple at `(x, y)`, as a pure diagnostic.
pub fn kkt_residual<F: Scalar>(program: &ConvexProgram<F>, x: &[F], y: &[F]) -> KktResiduals<F> {
    let n = program.n();
    let mut x_bar = x.to_vec();
    x_bar.extend_from_slice(y);
    let p = phi(program, &x_bar);
    let (phi1, neg_g) = p.split_at(n);
    let g: Vec<F> = neg_g.iter().map(|&v| -v).collect();

    let phi1_neg: Vec<F> = phi1.iter().map(|&v| v.min(F::zero())).collect();
    let x_neg: Vec<F> = x.iter().map(|&v| v.min(F::zero())).collect();
    let g_pos: Vec<F> = g.iter().map(|&v| v.max(F::zero())).collect();

    KktResiduals {
        stationarity: norm2(&phi1_neg) + norm2(&x_neg),
        feasibility: norm2(&g_pos),
        complementarity: dot(x, phi1).abs() + dot(y, &g).abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DMat;
    use crate::problem::ConvexProgram;

    fn unit_lp() -> ConvexProgram<f64> {
        ConvexProgram::make_lp(
            vec![1.0],
            DMat::from_rows(&[vec![1.0]]).unwrap(),
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn phi_vanishes_at_kkt_point() {
        let p = unit_lp();
        assert_eq!(phi(&p, &[1.0, 1.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn phi_matches_affine_formula_for_lp() {
        let a = DMat::from_rows(&[vec![2.0, -1.0], vec![0.5, 3.0]]).unwrap();
        let c = vec![1.0, -2.0];
        let b = vec![0.3, -0.7];
        let p = ConvexProgram::make_lp(c.clone(), a.clone(), b.clone()).unwrap();
        let x = [0.4_f64, 1.3];
        let y = [0.9_f64, 0.2];
        let got = phi(&p, &[x[0], x[1], y[0], y[1]]);
        // phi = (c - A^T y, A x - b)
        let aty = a.matvec_t(&y);
        let ax = a.matvec(&x);
        let expect = [c[0] - aty[0], c[1] - aty[1], ax[0] - b[0], ax[1] - b[1]];
        for (g, e) in got.iter().zip(expect) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn phi_zero_at_qp_origin() {
        let p = ConvexProgram::make_qp(
            DMat::identity(1),
            vec![0.0],
            DMat::from_rows(&[vec![1.0]]).unwrap(),
            vec![0.0],
        )
        .unwrap();
        assert_eq!(phi(&p, &[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn jacobian_blocks_for_lp() {
        let a = DMat::from_rows(&[vec![2.0, -1.0]]).unwrap();
        let p = ConvexProgram::make_lp(vec![1.0, 1.0], a, vec![0.0]).unwrap();
        let j = phi_jacobian(&p, &[1.0, 1.0, 1.0]);
        // [[0, -A^T], [A, 0]]
        assert_eq!(j[(0, 0)], 0.0);
        assert_eq!(j[(0, 2)], -2.0);
        assert_eq!(j[(1, 2)], 1.0);
        assert_eq!(j[(2, 0)], 2.0);
        assert_eq!(j[(2, 1)], -1.0);
        assert_eq!(j[(2, 2)], 0.0);
    }

    #[test]
    fn qp_jacobian_top_left_is_q() {
        let p = ConvexProgram::make_qp(
            DMat::identity(2),
            vec![0.0, 0.0],
            DMat::from_rows(&[vec![1.0, 1.0]]).unwrap(),
            vec![0.0],
        )
        .unwrap();
        let j = phi_jacobian(&p, &[0.3, 0.4, 0.5]);
        assert_eq!(j[(0, 0)], 1.0);
        assert_eq!(j[(1, 1)], 1.0);
        assert_eq!(j[(0, 1)], 0.0);
    }

    #[test]
    fn monotone_gap_identical_points_is_zero() {
        let p = unit_lp();
        assert_eq!(monotone_gap(&p, &[0.4, 0.2], &[0.4, 0.2]), 0.0);
    }

    #[test]
    fn monotone_gap_lp_skew_cancels() {
        let a = DMat::from_rows(&[vec![2.0, -1.0], vec![0.5, 3.0]]).unwrap();
        let p = ConvexProgram::make_lp(vec![1.0, -2.0], a, vec![0.3, -0.7]).unwrap();
        let gap = monotone_gap(&p, &[0.1_f64, 2.0, 0.5, 0.1], &[1.0, 0.2, 0.0, 3.0]);
        assert!(gap.abs() < 1e-12, "{gap}");
    }

    #[test]
    fn kkt_residual_zero_at_kkt_point() {
        let p = unit_lp();
        let r = kkt_residual(&p, &[1.0], &[1.0]);
        assert_eq!((r.stationarity, r.feasibility, r.complementarity), (0.0, 0.0, 0.0));
    }

    #[test]
    fn kkt_feasibility_positive_at_violated_point() {
        let p = unit_lp();
        let r = kkt_residual(&p, &[0.5], &[0.0]);
        assert!(r.feasibility > 0.0);
    }
}
