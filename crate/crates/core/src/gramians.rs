//! Controllability and observability Gramians for LD_QO systems.
//!
//! The controllability Gramian is the classical solution of
//! `A P + P A^T + B B^T = 0`. The quadratic-output observability Gramian
//! solves `A^T Q + Q A + M P M = 0`, coupling the output weight with the
//! controllability Gramian of the same system. The quadrature functions
//! at the bottom approximate the defining integrals directly and serve as
//! independent oracles for the solver path.

use crate::error::{Error, Result};
use crate::linalg::{
    self, psd_factor, solve_lyapunov, DenseMatrix, GramianFactor, GramianSource,
};
use crate::systems::{LdSystem, LdqoSystem};

/// Controllability Gramian `P` of `x' = A x + B u` and its PSD factor.
pub fn controllability_gramian(
    sys: &LdqoSystem,
    rank_tol: f64,
) -> Result<(DenseMatrix, GramianFactor)> {
    let w = sys.b().mul_tr(sys.b());
    let p = solve_lyapunov(sys.a(), &w)?;
    let mut factor = psd_factor(&p, rank_tol)?;
    factor.source = GramianSource::Controllability;
    Ok((p, factor))
}

/// Quadratic-output observability Gramian: the solution `Q` of
/// `A^T Q + Q A + M P M = 0` where `P` is the controllability Gramian.
pub fn qo_observability_gramian(
    sys: &LdqoSystem,
    p: &DenseMatrix,
    rank_tol: f64,
) -> Result<(DenseMatrix, GramianFactor)> {
    if p.rows() != sys.order() || p.cols() != sys.order() {
        return Err(Error::invalid("P has the wrong shape for this system"));
    }
    if p.asymmetry() > 1e-6 * p.frobenius_norm().max(1.0) {
        return Err(Error::invalid("P must be symmetric"));
    }
    let mpm = sys.m().mul(p).mul(sys.m()).symmetrized();
    let q = solve_lyapunov(&sys.a().transpose(), &mpm)?;
    let mut factor = psd_factor(&q, rank_tol)?;
    factor.source = GramianSource::QoObservability;
    Ok((q, factor))
}

/// Classical observability Gramian of an LD system:
/// `A^T Q + Q A + C^T C = 0`.
pub fn ld_observability_gramian(
    ld: &LdSystem,
    rank_tol: f64,
) -> Result<(DenseMatrix, GramianFactor)> {
    let ctc = ld.c.tr_mul(&ld.c);
    let q = solve_lyapunov(&ld.a.transpose(), &ctc)?;
    let mut factor = psd_factor(&q, rank_tol)?;
    factor.source = GramianSource::LdObservability;
    Ok((q, factor))
}

/// Orthonormal basis of the numerical kernel of a symmetric PSD matrix:
/// eigenvectors whose eigenvalues fall below `tol * lambda_max`.
/// A full-rank input yields a matrix with zero columns.
pub fn unobservable_directions(q: &DenseMatrix, tol: f64) -> Result<DenseMatrix> {
    let (vals, vecs) = linalg::sym_eigen(q)?;
    let n = q.rows();
    let lam_max = vals.first().copied().unwrap_or(0.0).max(0.0);
    let kept: Vec<usize> = (0..n).filter(|&i| vals[i] < tol * lam_max).collect();
    let mut basis = DenseMatrix::zeros(n, kept.len());
    for (col, &i) in kept.iter().enumerate() {
        for row in 0..n {
            basis[(row, col)] = vecs[(row, i)];
        }
    }
    Ok(basis)
}

/// Default kernel tolerance, relative to the largest eigenvalue.
pub const KERNEL_TOL: f64 = 1e-10;

/// Quadrature horizon from the spectral abscissa: long enough that the
/// propagator has decayed to about 1e-9.
pub fn default_horizon(a: &DenseMatrix) -> Result<f64> {
    let abscissa = linalg::spectral_abscissa(a)?;
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz {
            abscissa,
            tol: 0.0,
        });
    }
    Ok((9.0 * std::f64::consts::LN_10 / -abscissa).min(1e6))
}

/// Default panel count for the Simpson oracles.
pub const DEFAULT_PANELS: usize = 2000;

/// Composite-Simpson approximation of the controllability integral
/// `int_0^T e^{At} B B^T e^{A^T t} dt`, propagating `e^{At} B` one step at
/// a time. Independent of the Bartels-Stewart solver path.
pub fn controllability_quadrature(
    sys: &LdqoSystem,
    horizon: f64,
    panels: usize,
) -> DenseMatrix {
    let panels = panels + panels % 2;
    let h = horizon / panels as f64;
    let step = linalg::expm(&sys.a().scale(h));
    let n = sys.order();
    let mut f = sys.b().clone(); // e^{At} B at the current node
    let mut acc = DenseMatrix::zeros(n, n);
    for k in 0..=panels {
        let weight = simpson_weight(k, panels);
        acc = acc.add(&f.mul_tr(&f).scale(weight));
        f = step.mul(&f);
    }
    acc.scale(h / 3.0)
}

/// Composite-Simpson approximation of the quadratic-output observability
/// integral `int_0^T e^{A^T t} M P M e^{At} dt`.
pub fn qo_observability_quadrature(
    sys: &LdqoSystem,
    p: &DenseMatrix,
    horizon: f64,
    panels: usize,
) -> DenseMatrix {
    let mpm = sys.m().mul(p).mul(sys.m()).symmetrized();
    lyapunov_integral_quadrature(sys.a(), &mpm, horizon, panels)
}

/// Composite-Simpson approximation of
/// `int_0^T e^{A^T t} W e^{At} dt` for symmetric `W`.
pub fn lyapunov_integral_quadrature(
    a: &DenseMatrix,
    w: &DenseMatrix,
    horizon: f64,
    panels: usize,
) -> DenseMatrix {
    let panels = panels + panels % 2;
    let h = horizon / panels as f64;
    let step = linalg::expm(&a.scale(h));
    let n = a.rows();
    let mut e = DenseMatrix::identity(n);
    let mut acc = DenseMatrix::zeros(n, n);
    for k in 0..=panels {
        let weight = simpson_weight(k, panels);
        let f = e.tr_mul(&w.mul(&e));
        acc = acc.add(&f.scale(weight));
        e = e.mul(&step);
    }
    acc.scale(h / 3.0)
}

fn simpson_weight(k: usize, panels: usize) -> f64 {
    if k == 0 || k == panels {
        1.0
    } else if k % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn rank_one_input_2x2() -> LdqoSystem {
        LdqoSystem::new(
            DenseMatrix::from_diagonal(&[-1.0, -1.0]),
            DenseMatrix::column(&[1.0, 2.0]),
            DenseMatrix::identity(2),
        )
        .unwrap()
    }

    fn prebalanced_2x2() -> LdqoSystem {
        LdqoSystem::new(
            DenseMatrix::from_nested(&[&[-0.25, -1.0 / 3.0], &[-1.0 / 3.0, -1.5]]).unwrap(),
            DenseMatrix::from_nested(&[&[1.0, 0.0], &[1.0, 2.0f64.sqrt()]]).unwrap(),
            DenseMatrix::from_nested(&[&[0.0, 1.0], &[1.0, 1.0]]).unwrap(),
        )
        .unwrap()
    }

    pub(crate) fn random_stable_ldqo(n: usize, m: usize, seed: u64) -> LdqoSystem {
        let mut rng = SplitMix64::new(seed);
        let g = DenseMatrix::from_fn(n, n, |_, _| rng.next_normal() / (n as f64).sqrt());
        let alpha = linalg::spectral_abscissa(&g).unwrap();
        let a = DenseMatrix::from_fn(n, n, |i, j| {
            g[(i, j)] - if i == j { alpha + 0.5 } else { 0.0 }
        });
        let b = DenseMatrix::from_fn(n, m, |_, _| rng.next_normal());
        let gm = DenseMatrix::from_fn(n, n, |_, _| rng.next_normal());
        let mw = gm.tr_mul(&gm).scale(1.0 / n as f64);
        LdqoSystem::new(a, b, mw).unwrap()
    }

    #[test]
    fn paper_controllability_gramian() {
        let (p, factor) = controllability_gramian(&rank_one_input_2x2(), 1e-12).unwrap();
        let expected = DenseMatrix::from_nested(&[&[0.5, 1.0], &[1.0, 2.0]]).unwrap();
        assert!(p.sub(&expected).max_abs() < 1e-13);
        assert_eq!(factor.rank, 1);
        assert!(factor.gramian().sub(&p).frobenius_norm() < 1e-12);
    }

    #[test]
    fn prebalanced_gramians_are_diag_2_1() {
        let sys = prebalanced_2x2();
        let (p, _) = controllability_gramian(&sys, 1e-12).unwrap();
        let expected = DenseMatrix::from_diagonal(&[2.0, 1.0]);
        assert!(p.sub(&expected).max_abs() < 1e-12, "P = {p:?}");
        let (q, _) = qo_observability_gramian(&sys, &p, 1e-12).unwrap();
        assert!(q.sub(&expected).max_abs() < 1e-12, "Q = {q:?}");
    }

    #[test]
    fn rank_one_input_2x2_observability_closed_form() {
        // M = I, A = -I gives M P M = P and -2Q + P = 0.
        let sys = rank_one_input_2x2();
        let (p, _) = controllability_gramian(&sys, 1e-12).unwrap();
        let (q, _) = qo_observability_gramian(&sys, &p, 1e-12).unwrap();
        assert!(q.sub(&p.scale(0.5)).max_abs() < 1e-13);
        // rank claim: M P M = P has rank 1 while M itself has rank 2
        assert_eq!(linalg::symmetric_rank(&p, 1e-10).unwrap(), 1);
        assert_eq!(linalg::symmetric_rank(sys.m(), 1e-10).unwrap(), 2);
    }

    #[test]
    fn ld_observability_identity_output() {
        let ld = LdSystem::new(
            DenseMatrix::from_diagonal(&[-1.0, -1.0]),
            DenseMatrix::column(&[1.0, 2.0]),
            DenseMatrix::identity(2),
        )
        .unwrap();
        let (q, _) = ld_observability_gramian(&ld, 1e-12).unwrap();
        assert!(q.sub(&DenseMatrix::identity(2).scale(0.5)).max_abs() < 1e-13);
    }

    #[test]
    fn gramians_match_quadrature_oracles() {
        let sys = random_stable_ldqo(8, 1, 2);
        let (p, _) = controllability_gramian(&sys, 1e-12).unwrap();
        let p_quad = controllability_quadrature(&sys, 60.0, 40_000);
        assert!(
            p.sub(&p_quad).frobenius_norm() < 1e-7 * p.frobenius_norm(),
            "P quadrature mismatch {}",
            p.sub(&p_quad).frobenius_norm() / p.frobenius_norm()
        );

        let sys6 = random_stable_ldqo(6, 1, 9);
        let (p6, _) = controllability_gramian(&sys6, 1e-12).unwrap();
        let (q6, _) = qo_observability_gramian(&sys6, &p6, 1e-12).unwrap();
        let q_quad = qo_observability_quadrature(&sys6, &p6, 60.0, 40_000);
        assert!(
            q6.sub(&q_quad).frobenius_norm() < 1e-7 * q6.frobenius_norm(),
            "Q quadrature mismatch {}",
            q6.sub(&q_quad).frobenius_norm() / q6.frobenius_norm()
        );
    }

    #[test]
    fn kernel_basis_of_singular_gramian() {
        let q = DenseMatrix::from_diagonal(&[2.0, 1.0, 0.0]);
        let basis = unobservable_directions(&q, KERNEL_TOL).unwrap();
        assert_eq!(basis.cols(), 1);
        assert!((basis[(2, 0)].abs() - 1.0).abs() < 1e-12);
        let full = unobservable_directions(&DenseMatrix::identity(3), KERNEL_TOL).unwrap();
        assert_eq!(full.cols(), 0);
    }

    #[test]
    fn kernel_vectors_annihilate_pm_when_p_positive() {
        // Block construction: invariant subspace inside ker M gives a
        // singular Q while P stays positive definite.
        let mut rng = SplitMix64::new(33);
        let a = {
            let mut a = DenseMatrix::zeros(4, 4);
            a.set_block(0, 0, &DenseMatrix::from_nested(&[&[-1.0, 0.3], &[0.0, -2.0]]).unwrap());
            a.set_block(2, 2, &DenseMatrix::from_nested(&[&[-0.5, 0.1], &[-0.1, -0.8]]).unwrap());
            a
        };
        let b = DenseMatrix::from_fn(4, 2, |_, _| rng.next_normal());
        let m = {
            let mut m = DenseMatrix::zeros(4, 4);
            m.set_block(0, 0, &DenseMatrix::from_nested(&[&[1.0, 0.2], &[0.2, 2.0]]).unwrap());
            m
        };
        let sys = LdqoSystem::new(a, b, m).unwrap();
        let (p, _) = controllability_gramian(&sys, 1e-12).unwrap();
        let (vals, _) = linalg::sym_eigen(&p).unwrap();
        assert!(vals.last().copied().unwrap() > 1e-8, "P should be positive definite");
        let (q, _) = qo_observability_gramian(&sys, &p, 1e-12).unwrap();
        let basis = unobservable_directions(&q, KERNEL_TOL).unwrap();
        assert_eq!(basis.cols(), 2);
        let (qvals, _) = linalg::sym_eigen(&q).unwrap();
        let lam_max = qvals[0];
        let pm = p.mul(sys.m());
        let qa = q.mul(sys.a());
        for col in 0..basis.cols() {
            let v: Vec<f64> = (0..4).map(|i| basis[(i, col)]).collect();
            let pmv = pm.matvec(&v);
            let norm_pmv = pmv.iter().map(|x| x * x).sum::<f64>().sqrt();
            // consequence used in the kernel theorem: P M v = 0
            let bound = 10.0
                * KERNEL_TOL
                * p.frobenius_norm()
                * sys.m().frobenius_norm();
            assert!(norm_pmv <= bound.max(1e-10), "|PMv| = {norm_pmv}");
            // kernel invariance: A ker(Q) stays in ker(Q)
            let qav = qa.matvec(&v);
            let norm_qav = qav.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(
                norm_qav <= 10.0 * KERNEL_TOL * lam_max * (1.0 + sys.a().frobenius_norm()),
                "|QAv| = {norm_qav}"
            );
        }
    }

    #[test]
    fn gramian_psd_over_random_suite() {
        for seed in 0..100u64 {
            let n = 2 + (seed % 19) as usize;
            let sys = random_stable_ldqo(n, 1 + (seed % 3) as usize, 400 + seed);
            let (p, _) = controllability_gramian(&sys, 1e-12).unwrap();
            let (q, _) = qo_observability_gramian(&sys, &p, 1e-12).unwrap();
            for (label, g) in [("P", &p), ("Q", &q)] {
                let (vals, _) = linalg::sym_eigen(g).unwrap();
                let lam_max = vals[0].max(0.0);
                let lam_min = *vals.last().unwrap();
                assert!(
                    lam_min >= -1e-10 * lam_max.max(1e-300),
                    "seed {seed}: {label} min eigenvalue {lam_min}"
                );
            }
        }
    }

    #[test]
    fn rank_inequality_mpm() {
        for seed in 0..100u64 {
            let mut rng = SplitMix64::new(7000 + seed);
            let n = 3 + (seed % 8) as usize;
            let k = 1 + rng.next_index(n - 1);
            let sys = random_stable_ldqo(n, 2, 9000 + seed);
            let g = DenseMatrix::from_fn(k, n, |_, _| rng.next_normal());
            let m_lowrank = g.tr_mul(&g);
            let sys = LdqoSystem::new(sys.a().clone(), sys.b().clone(), m_lowrank).unwrap();
            let (p, _) = controllability_gramian(&sys, 1e-12).unwrap();
            let mpm = sys.m().mul(&p).mul(sys.m()).symmetrized();
            let rank_mpm = linalg::symmetric_rank(&mpm, 1e-10).unwrap();
            let rank_m = linalg::symmetric_rank(sys.m(), 1e-10).unwrap();
            let rank_p = linalg::symmetric_rank(&p, 1e-10).unwrap();
            assert!(
                rank_mpm <= rank_m.min(rank_p),
                "seed {seed}: rank(MPM) = {rank_mpm}, rank(M) = {rank_m}, rank(P) = {rank_p}"
            );
        }
    }

    #[test]
    fn non_hurwitz_is_rejected() {
        let sys = LdqoSystem::new(
            DenseMatrix::from_diagonal(&[0.5, -1.0]),
            DenseMatrix::column(&[1.0, 1.0]),
            DenseMatrix::identity(2),
        )
        .unwrap();
        assert!(matches!(
            controllability_gramian(&sys, 1e-12),
            Err(Error::NotHurwitz { .. })
        ));
    }
}
