//! Bartels-Stewart solvers for Lyapunov and Sylvester equations over the
//! real Schur form.

use super::schur::{ensure_hurwitz_schur, real_schur, SchurForm};
use super::{DenseMatrix, HURWITZ_TOL_FACTOR};
use crate::error::{Error, Result};

/// Solve `A X + X A^T + W = 0` for symmetric `W` and Hurwitz `A`.
///
/// The returned solution is symmetrized before return, so downstream
/// factorizations can rely on exact symmetry.
pub fn solve_lyapunov(a: &DenseMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() || !w.is_square() || a.rows() != w.rows() {
        return Err(Error::invalid(format!(
            "lyapunov dimension mismatch: A is {}x{}, W is {}x{}",
            a.rows(),
            a.cols(),
            w.rows(),
            w.cols()
        )));
    }
    let w_scale = w.frobenius_norm().max(1.0);
    if w.asymmetry() > 1e-6 * w_scale {
        return Err(Error::invalid("lyapunov right-hand side is not symmetric"));
    }
    let w_sym = w.symmetrized();

    let schur = real_schur(a)?;
    ensure_hurwitz_schur(&schur, a.frobenius_norm(), HURWITZ_TOL_FACTOR)?;

    // A = U S U^T, A^T = V T V^T with V = U J and T = J S^T J, so a single
    // Schur decomposition serves both operands.
    let u = &schur.orthogonal;
    let s = &schur.quasi_triangular;
    let n = a.rows();
    let t = DenseMatrix::from_fn(n, n, |i, j| s[(n - 1 - j, n - 1 - i)]);
    let v = DenseMatrix::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);

    // S Y + Y T = -U^T W V
    let rhs = u.tr_mul(&w_sym).mul(&v).scale(-1.0);
    let y = solve_quasi_triangular_sylvester(s, &t, &rhs)?;
    let x = u.mul(&y).mul_tr(&v);
    Ok(x.symmetrized())
}

/// Solve `A X + X B + C = 0`; requires the spectra of `A` and `-B` to be
/// disjoint (always true when both are Hurwitz).
pub fn solve_sylvester(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() || !b.is_square() || c.rows() != a.rows() || c.cols() != b.rows() {
        return Err(Error::invalid(format!(
            "sylvester dimension mismatch: A {}x{}, B {}x{}, C {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols(),
            c.rows(),
            c.cols()
        )));
    }
    let sa = real_schur(a)?;
    let sb = real_schur(b)?;
    check_spectra_disjoint(&sa, &sb, a, b)?;

    let rhs = sa
        .orthogonal
        .tr_mul(c)
        .mul(&sb.orthogonal)
        .scale(-1.0);
    let y = solve_quasi_triangular_sylvester(&sa.quasi_triangular, &sb.quasi_triangular, &rhs)?;
    Ok(sa.orthogonal.mul(&y).mul_tr(&sb.orthogonal))
}

fn check_spectra_disjoint(
    sa: &SchurForm,
    sb: &SchurForm,
    a: &DenseMatrix,
    b: &DenseMatrix,
) -> Result<()> {
    let tol = 1e-12 * (a.frobenius_norm() + b.frobenius_norm()).max(1.0);
    let ea = sa.eigenvalues();
    let eb = sb.eigenvalues();
    let mut min_sum = f64::INFINITY;
    for &(ra, ia) in &ea {
        for &(rb, ib) in &eb {
            min_sum = min_sum.min((ra + rb).hypot(ia + ib));
        }
    }
    if min_sum < tol {
        return Err(Error::SingularOperator {
            value: min_sum,
            tol,
        });
    }
    Ok(())
}

/// Solve `S Y + Y T = C` with `S`, `T` upper quasi-triangular, by block
/// back-substitution: one column block of `T` at a time (left to right),
/// rows of `S` bottom-up, with 1x1/2x2 coupled cells solved as small
/// dense systems.
fn solve_quasi_triangular_sylvester(
    s: &DenseMatrix,
    t: &DenseMatrix,
    c: &DenseMatrix,
) -> Result<DenseMatrix> {
    let n = s.rows();
    let m = t.rows();
    let s_blocks = quasi_blocks(s);
    let t_blocks = quasi_blocks(t);
    let mut y = DenseMatrix::zeros(n, m);

    for &(tc, tq) in &t_blocks {
        // Right-hand side for this column block, with contributions of the
        // already-solved columns of Y moved over.
        let mut rhs = DenseMatrix::zeros(n, tq);
        for col in 0..tq {
            for i in 0..n {
                let mut v = c[(i, tc + col)];
                for j in 0..tc {
                    v -= y[(i, j)] * t[(j, tc + col)];
                }
                rhs[(i, col)] = v;
            }
        }
        for &(sc, sp) in s_blocks.iter().rev() {
            // Subtract S-coupling to the already-solved rows below.
            let mut local = DenseMatrix::zeros(sp, tq);
            for r in 0..sp {
                for col in 0..tq {
                    let mut v = rhs[(sc + r, col)];
                    for k in (sc + sp)..n {
                        v -= s[(sc + r, k)] * y[(k, tc + col)];
                    }
                    local[(r, col)] = v;
                }
            }
            // (I_q (x) S_blk + T_blk^T (x) I_p) vec(Y_blk) = vec(local),
            // vec in column-major order, system size at most 4.
            let sz = sp * tq;
            let mut mat = [0.0f64; 16];
            let mut vec = [0.0f64; 4];
            for col in 0..tq {
                for r in 0..sp {
                    let row_idx = col * sp + r;
                    vec[row_idx] = local[(r, col)];
                    for c2 in 0..tq {
                        for r2 in 0..sp {
                            let col_idx = c2 * sp + r2;
                            let mut v = 0.0;
                            if col == c2 {
                                v += s[(sc + r, sc + r2)];
                            }
                            if r == r2 {
                                v += t[(tc + c2, tc + col)];
                            }
                            mat[row_idx * sz + col_idx] = v;
                        }
                    }
                }
            }
            solve_small(&mut mat[..sz * sz], &mut vec[..sz], sz)?;
            for col in 0..tq {
                for r in 0..sp {
                    y[(sc + r, tc + col)] = vec[col * sp + r];
                }
            }
        }
    }
    Ok(y)
}

fn quasi_blocks(t: &DenseMatrix) -> Vec<(usize, usize)> {
    let n = t.rows();
    let scale = t.frobenius_norm().max(1.0);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > f64::EPSILON * scale {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

/// Gaussian elimination with partial pivoting on a tiny system (n <= 4).
fn solve_small(a: &mut [f64], b: &mut [f64], n: usize) -> Result<()> {
    for k in 0..n {
        let mut piv = k;
        for r in (k + 1)..n {
            if a[r * n + k].abs() > a[piv * n + k].abs() {
                piv = r;
            }
        }
        if a[piv * n + k].abs() < 1e-280 {
            return Err(Error::SingularOperator {
                value: a[piv * n + k].abs(),
                tol: 1e-280,
            });
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            b.swap(k, piv);
        }
        for r in (k + 1)..n {
            let f = a[r * n + k] / a[k * n + k];
            if f == 0.0 {
                continue;
            }
            for c in k..n {
                a[r * n + c] -= f * a[k * n + c];
            }
            b[r] -= f * b[k];
        }
    }
    for k in (0..n).rev() {
        let mut v = b[k];
        for c in (k + 1)..n {
            v -= a[k * n + c] * b[c];
        }
        b[k] = v / a[k * n + k];
    }
    Ok(())
}

/// `||A X + X A^T + W||_F`, recomputed from scratch.
pub fn lyapunov_residual(a: &DenseMatrix, w: &DenseMatrix, x: &DenseMatrix) -> f64 {
    a.mul(x).add(&x.mul_tr(a)).add(w).frobenius_norm()
}

/// `||A X + X B + C||_F`.
pub fn sylvester_residual(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    x: &DenseMatrix,
) -> f64 {
    a.mul(x).add(&x.mul(b)).add(c).frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm;
    use crate::rng::SplitMix64;

    fn random_stable(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = SplitMix64::new(seed);
        let g = DenseMatrix::from_fn(n, n, |_, _| rng.next_normal() / (n as f64).sqrt());
        let alpha = crate::linalg::spectral_abscissa(&g).unwrap();
        DenseMatrix::from_fn(n, n, |i, j| g[(i, j)] - if i == j { alpha + 0.5 } else { 0.0 })
    }

    #[test]
    fn rank_one_input_2x2_controllability_solution() {
        let a = DenseMatrix::from_diagonal(&[-1.0, -1.0]);
        let w = DenseMatrix::from_nested(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        let x = solve_lyapunov(&a, &w).unwrap();
        let expected = DenseMatrix::from_nested(&[&[0.5, 1.0], &[1.0, 2.0]]).unwrap();
        assert!(x.sub(&expected).max_abs() < 1e-13);
    }

    #[test]
    fn scalar_lyapunov() {
        let a = DenseMatrix::new(1, 1, vec![-0.5]).unwrap();
        let w = DenseMatrix::new(1, 1, vec![1.0]).unwrap();
        let x = solve_lyapunov(&a, &w).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_rejects_unstable_a() {
        let a = DenseMatrix::from_diagonal(&[1.0, -1.0]);
        let w = DenseMatrix::identity(2);
        assert!(matches!(
            solve_lyapunov(&a, &w),
            Err(Error::NotHurwitz { .. })
        ));
    }

    /// Composite-Simpson quadrature of the Gramian integral; independent of
    /// the Schur-based solver path.
    fn simpson_gramian(a: &DenseMatrix, w: &DenseMatrix, horizon: f64, panels: usize) -> DenseMatrix {
        let n = a.rows();
        let h = horizon / panels as f64;
        let step = expm(&a.scale(h));
        let mut e = DenseMatrix::identity(n);
        let mut acc = DenseMatrix::zeros(n, n);
        for k in 0..=panels {
            let f = e.mul(w).mul_tr(&e);
            let weight = if k == 0 || k == panels {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc = acc.add(&f.scale(weight));
            e = e.mul(&step);
        }
        acc.scale(h / 3.0)
    }

    #[test]
    fn lyapunov_matches_quadrature_oracle() {
        let a = random_stable(6, 7);
        let mut rng = SplitMix64::new(70);
        let b = DenseMatrix::from_fn(6, 2, |_, _| rng.next_normal());
        let w = b.mul_tr(&b);
        let x = solve_lyapunov(&a, &w).unwrap();
        let oracle = simpson_gramian(&a, &w, 60.0, 40_000);
        assert!(
            x.sub(&oracle).frobenius_norm() < 1e-7 * x.frobenius_norm().max(1.0),
            "difference {}",
            x.sub(&oracle).frobenius_norm()
        );
        let res = lyapunov_residual(&a, &w, &x);
        assert!(res <= 1e-10 * w.frobenius_norm().max(1.0), "residual {res}");
        assert!(x.asymmetry() < 1e-12);
    }

    #[test]
    fn sylvester_trivial_diagonal() {
        let a = DenseMatrix::from_diagonal(&[-1.0, -1.0]);
        let b = DenseMatrix::from_diagonal(&[-1.0, -1.0]);
        let c = DenseMatrix::from_nested(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        let x = solve_sylvester(&a, &b, &c).unwrap();
        assert!(x.sub(&c.scale(0.5)).max_abs() < 1e-14);
    }

    #[test]
    fn sylvester_reduces_to_lyapunov() {
        let a = random_stable(5, 21);
        let mut rng = SplitMix64::new(22);
        let b = DenseMatrix::from_fn(5, 1, |_, _| rng.next_normal());
        let w = b.mul_tr(&b);
        let x1 = solve_lyapunov(&a, &w).unwrap();
        let x2 = solve_sylvester(&a, &a.transpose(), &w).unwrap();
        assert!(x1.sub(&x2).frobenius_norm() < 1e-10 * x1.frobenius_norm());
    }

    /// Kronecker-vectorization oracle: solve
    /// (I (x) A + B^T (x) I) vec(X) = -vec(C) column-major with plain LU.
    #[test]
    fn sylvester_matches_kron_oracle() {
        let mut rng = SplitMix64::new(11);
        let n = 4;
        let m = 3;
        let a = random_stable(n, 11);
        let b = random_stable(m, 12);
        let c = DenseMatrix::from_fn(n, m, |_, _| rng.next_normal());
        let x = solve_sylvester(&a, &b, &c).unwrap();

        let op = DenseMatrix::identity(m)
            .kron(&a)
            .add(&b.transpose().kron(&DenseMatrix::identity(n)));
        // column-major vec of C
        let vec_c = DenseMatrix::from_fn(n * m, 1, |i, _| c[(i % n, i / n)]);
        let vec_x = crate::linalg::solve_linear(&op, &vec_c.scale(-1.0)).unwrap();
        let x_oracle = DenseMatrix::from_fn(n, m, |i, j| vec_x[(j * n + i, 0)]);
        assert!(x.sub(&x_oracle).frobenius_norm() < 1e-10 * x_oracle.frobenius_norm().max(1.0));
        assert!(sylvester_residual(&a, &b, &c, &x) <= 1e-10 * c.frobenius_norm().max(1.0));
    }

    #[test]
    fn sylvester_detects_spectrum_overlap() {
        let a = DenseMatrix::from_diagonal(&[-1.0, -2.0]);
        let b = DenseMatrix::from_diagonal(&[1.0, -3.0]); // -1 + 1 = 0
        let c = DenseMatrix::identity(2);
        assert!(matches!(
            solve_sylvester(&a, &b, &c),
            Err(Error::SingularOperator { .. })
        ));
    }

    #[test]
    fn residual_contract_on_random_suite() {
        for seed in 0..20u64 {
            let n = 3 + (seed % 7) as usize;
            let a = random_stable(n, 1000 + seed);
            let mut rng = SplitMix64::new(2000 + seed);
            let b = DenseMatrix::from_fn(n, 2, |_, _| rng.next_normal());
            let w = b.mul_tr(&b);
            let x = solve_lyapunov(&a, &w).unwrap();
            let res = lyapunov_residual(&a, &w, &x);
            assert!(
                res <= 1e-10 * w.frobenius_norm().max(1.0),
                "seed {seed}: residual {res}"
            );
            assert!(x.asymmetry() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn lyapunov_with_complex_spectrum() {
        // Damped oscillator block plus a fast real mode: exercises 2x2
        // Schur blocks in the back-substitution.
        let a = DenseMatrix::from_nested(&[
            &[0.0, 1.0, 0.0],
            &[-4.0, -0.4, 0.0],
            &[0.0, 0.0, -3.0],
        ])
        .unwrap();
        let mut rng = SplitMix64::new(5);
        let b = DenseMatrix::from_fn(3, 1, |_, _| rng.next_normal());
        let w = b.mul_tr(&b);
        let x = solve_lyapunov(&a, &w).unwrap();
        assert!(lyapunov_residual(&a, &w, &x) <= 1e-10 * w.frobenius_norm().max(1.0));
    }
}
