//! Random problem generation with construction-guaranteed solvability.
//!
//! Draw order is part of the format and must not change between releases
//! (it is what makes a `(family, n, m, seed)` tuple portable):
//!
//! * qp only: `M` (`n*n`, row-major normal), giving `Q = M^T M + 0.1 I`
//! * `A` (`m*n`, row-major normal)
//! * `x0` (`n`, absolute normal) and `eta` (`m`, absolute normal), giving
//!   `b = A x0 - eta` so `x0` is strictly feasible
//! * lp only: `y0` (`m`, absolute normal) and `s0` (`n`, absolute normal),
//!   giving `c = A^T y0 + s0` so the dual is feasible and an optimum exists
//! * qp only: `c` (`n`, normal)
//!
//! Feasibility is a construction property (`b = A x0 - eta` with `eta > 0`);
//! for LPs, attainment is too: a random-normal cost leaves roughly half of
//! the instances unbounded over `{x >= 0, A x >= b}`, which would have no
//! KKT point at all.

use super::rng::SplitMix64;
use crate::linalg::DMat;
use crate::problem::{ConvexProgram, Family};
use crate::Real;

/// Quadratic-term regularization added on top of `M^T M`.
pub const QP_EIG_FLOOR: f64 = 0.1;

/// Generates a deterministic random program; identical inputs produce a
/// bit-identical program.
pub fn generate_random(family: Family, n: usize, m: usize, seed: u64) -> ConvexProgram<Real> {
    generate_random_with_witness(family, n, m, seed).0
}

/// As [`generate_random`], also returning the strictly feasible construction
/// point `x0`.
pub fn generate_random_with_witness(
    family: Family,
    n: usize,
    m: usize,
    seed: u64,
) -> (ConvexProgram<Real>, Vec<Real>) {
    assert!(n >= 1 && m >= 1, "generate_random needs n, m >= 1");
    let mut rng = SplitMix64::new(seed);

    let q = if family == Family::Qp {
        let m_rows: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(n)).collect();
        let m_mat = DMat::from_rows(&m_rows).expect("rectangular by construction");
        let mut q = m_mat.transpose().matmul(&m_mat);
        for i in 0..n {
            q[(i, i)] += QP_EIG_FLOOR;
        }
        Some(q)
    } else {
        None
    };

    let a_rows: Vec<Vec<f64>> = (0..m).map(|_| rng.normal_vec(n)).collect();
    let a = DMat::from_rows(&a_rows).expect("rectangular by construction");

    let x0 = rng.abs_normal_vec(n);
    let eta = rng.abs_normal_vec(m);
    let ax0 = a.matvec(&x0);
    let b: Vec<f64> = ax0.iter().zip(&eta).map(|(axi, ei)| axi - ei).collect();

    let program = match family {
        Family::Lp => {
            let y0 = rng.abs_normal_vec(m);
            let s0 = rng.abs_normal_vec(n);
            let aty0 = a.matvec_t(&y0);
            let c: Vec<f64> = aty0.iter().zip(&s0).map(|(ai, si)| ai + si).collect();
            ConvexProgram::make_lp(c, a, b)
        }
        Family::Qp => {
            let c = rng.normal_vec(n);
            ConvexProgram::make_qp(q.expect("drawn above"), c, a, b)
        }
        Family::ExpSum => ConvexProgram::make_expsum(a, b),
        Family::Generic => panic!("generate_random covers the built-in families"),
    }
    .expect("generated dimensions are consistent");

    (program, x0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigenvalues;

    fn assert_programs_identical(a: &ConvexProgram<Real>, b: &ConvexProgram<Real>) {
        assert_eq!(a.family(), b.family());
        assert_eq!((a.n(), a.m()), (b.n(), b.m()));
        let (aa, ab) = a.affine_constraints().unwrap();
        let (ba, bb) = b.affine_constraints().unwrap();
        assert_eq!(aa, ba);
        assert_eq!(ab, bb);
        assert_eq!(a.cost_vector(), b.cost_vector());
        assert_eq!(a.quadratic_term(), b.quadratic_term());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_random(Family::Lp, 5, 2, 42);
        let b = generate_random(Family::Lp, 5, 2, 42);
        assert_programs_identical(&a, &b);
    }

    #[test]
    fn witness_is_strictly_feasible() {
        for seed in 0..20 {
            let (p, x0) = generate_random_with_witness(Family::ExpSum, 5, 2, seed);
            let (a, b) = p.affine_constraints().unwrap();
            let ax0 = a.matvec(&x0);
            for (axi, bi) in ax0.iter().zip(b) {
                assert!(axi > bi, "A x0 > b must hold strictly");
            }
            assert!(x0.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn qp_quadratic_term_is_well_conditioned_psd() {
        let p = generate_random(Family::Qp, 5, 2, 9);
        let eigs = symmetric_eigenvalues(p.quadratic_term().unwrap());
        assert!(eigs[0] >= QP_EIG_FLOOR - 1e-9, "min eig {}", eigs[0]);
    }
}
