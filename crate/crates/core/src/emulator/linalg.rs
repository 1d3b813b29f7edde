//! Dense row-major kernels for the GP: blocked Cholesky, triangular inverse
//! and the products built on them. Blocks go through `matrixmultiply`, whose
//! per-element accumulation order depends only on the inner dimension, so a
//! column of a product is bit-identical whatever other columns ride along.

const NB: usize = 64;

/// `C = alpha·A·B + beta·C` with explicit element strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    rsc: usize,
    csc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    assert!(last(m, n, rsc, csc) < c.len());
    if k > 0 {
        assert!(last(m, k, rsa, csa) < a.len());
        assert!(last(k, n, rsb, csb) < b.len());
    }
    // SAFETY: every index the routine touches was bounds-checked above, and `c`
    // is borrowed mutably so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// In-place lower Cholesky factor of the symmetric `n × n` matrix `a` (only
/// the lower triangle is read). The strict upper triangle is zeroed. Returns
/// false when a pivot is not positive.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    assert_eq!(a.len(), n * n);
    let mut k0 = 0;
    while k0 < n {
        let kb = NB.min(n - k0);
        // Diagonal block.
        for j in k0..k0 + kb {
            let mut d = a[j * n + j];
            for t in k0..j {
                d -= a[j * n + t] * a[j * n + t];
            }
            if !(d > 0.0) || !d.is_finite() {
                return false;
            }
            let d = d.sqrt();
            a[j * n + j] = d;
            for i in j + 1..k0 + kb {
                let mut s = a[i * n + j];
                for t in k0..j {
                    s -= a[i * n + t] * a[j * n + t];
                }
                a[i * n + j] = s / d;
            }
        }
        // Panel below the diagonal block: L21 = A21 · L11^-T.
        for i in k0 + kb..n {
            for j in k0..k0 + kb {
                let mut s = a[i * n + j];
                for t in k0..j {
                    s -= a[i * n + t] * a[j * n + t];
                }
                a[i * n + j] = s / a[j * n + j];
            }
        }
        // Trailing update A22 -= L21 L21^T, block row by block row on the lower part.
        let r0 = k0 + kb;
        let mut i0 = r0;
        while i0 < n {
            let ib = NB.min(n - i0);
            let (head, tail) = a.split_at_mut(i0 * n);
            let panel_rows = &head[..];
            // Rows i0..i0+ib of L21 live in `tail`; copy them out so the
            // destination can be borrowed mutably.
            let mut li = vec![0.0; ib * kb];
            for r in 0..ib {
                li[r * kb..(r + 1) * kb].copy_from_slice(&tail[r * n + k0..r * n + k0 + kb]);
            }
            // Columns r0..i0 use earlier panel rows; the diagonal block uses `li` itself.
            let cols_before = i0 - r0;
            if cols_before > 0 {
                gemm(
                    ib,
                    kb,
                    cols_before,
                    -1.0,
                    &li,
                    kb,
                    1,
                    &panel_rows[r0 * n + k0..],
                    1,
                    n,
                    1.0,
                    &mut tail[r0..],
                    n,
                    1,
                );
            }
            gemm(
                ib,
                kb,
                ib,
                -1.0,
                &li,
                kb,
                1,
                &li,
                1,
                kb,
                1.0,
                &mut tail[i0..],
                n,
                1,
            );
            i0 += ib;
        }
        k0 += kb;
    }
    for i in 0..n {
        for j in i + 1..n {
            a[i * n + j] = 0.0;
        }
    }
    true
}

/// Inverse of a lower-triangular matrix (also lower triangular).
pub(crate) fn lower_inverse(l: &[f64], n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n * n];
    let mut i0 = 0;
    while i0 < n {
        let ib = NB.min(n - i0);
        // Inverse of the diagonal block by forward substitution.
        let mut d = vec![0.0; ib * ib];
        for c in 0..ib {
            for r in c..ib {
                let mut s = if r == c { 1.0 } else { 0.0 };
                for t in c..r {
                    s -= l[(i0 + r) * n + i0 + t] * d[t * ib + c];
                }
                d[r * ib + c] = s / l[(i0 + r) * n + i0 + r];
            }
        }
        if i0 > 0 {
            // T = L[I, 0..i0] · X[0..i0, 0..i0]; X[I, 0..i0] = -D · T.
            let mut t = vec![0.0; ib * i0];
            gemm(
                ib,
                i0,
                i0,
                1.0,
                &l[i0 * n..],
                n,
                1,
                &x,
                n,
                1,
                0.0,
                &mut t,
                i0,
                1,
            );
            gemm(
                ib,
                ib,
                i0,
                -1.0,
                &d,
                ib,
                1,
                &t,
                i0,
                1,
                0.0,
                &mut x[i0 * n..],
                n,
                1,
            );
        }
        for r in 0..ib {
            x[(i0 + r) * n + i0..(i0 + r) * n + i0 + ib].copy_from_slice(&d[r * ib..(r + 1) * ib]);
        }
        i0 += ib;
    }
    x
}

/// `XᵀX` for lower-triangular `X`, i.e. `K⁻¹` from `X = L⁻¹`.
pub(crate) fn lower_gram(x: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    let mut t0 = 0;
    while t0 < n {
        let tb = NB.min(n - t0);
        let w = t0 + tb;
        // Rows t0..t0+tb of X are zero beyond column w.
        let mut tmp = vec![0.0; w * w];
        gemm(
            w,
            tb,
            w,
            1.0,
            &x[t0 * n..],
            1,
            n,
            &x[t0 * n..],
            n,
            1,
            0.0,
            &mut tmp,
            w,
            1,
        );
        for i in 0..w {
            for j in 0..w {
                out[i * n + j] += tmp[i * w + j];
            }
        }
        t0 += tb;
    }
    out
}

/// Solves `L x = b`.
pub(crate) fn forward_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
        x[i] = (x[i] - s) / l[i * n + i];
    }
    x
}

/// Solves `Lᵀ x = b`.
pub(crate) fn backward_solve_t(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        x[i] /= l[i * n + i];
        let xi = x[i];
        for j in 0..i {
            x[j] -= l[i * n + j] * xi;
        }
    }
    x
}

/// `V = X · B` for lower-triangular `X` (`n × n`) and `B` (`n × m`), row-major.
pub(crate) fn lower_mul(x: &[f64], n: usize, b: &[f64], m: usize) -> Vec<f64> {
    let mut v = vec![0.0; n * m];
    let mut i0 = 0;
    while i0 < n {
        let ib = NB.min(n - i0);
        let w = i0 + ib;
        gemm(
            ib,
            w,
            m,
            1.0,
            &x[i0 * n..],
            n,
            1,
            b,
            m,
            1,
            0.0,
            &mut v[i0 * m..],
            m,
            1,
        );
        i0 += ib;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spd(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|t| g[i * n + t] * g[j * n + t]).sum::<f64>();
            }
            a[i * n + i] += n as f64 * 0.1;
        }
        a
    }

    fn to_na(a: &[f64], n: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(n, n, a)
    }

    #[test]
    fn cholesky_matches_reference_across_block_edges() {
        for &n in &[1, 5, 63, 64, 65, 150] {
            let a = spd(n, n as u64);
            let mut l = a.clone();
            assert!(cholesky_in_place(&mut l, n));
            let want = to_na(&a, n).cholesky().unwrap().l();
            let diff = (to_na(&l, n) - want).amax();
            assert!(diff < 1e-10, "n={n} diff={diff}");
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = vec![1.0, 2.0, 2.0, 1.0];
        assert!(!cholesky_in_place(&mut a, 2));
    }

    #[test]
    fn inverse_and_gram() {
        for &n in &[3, 64, 130] {
            let a = spd(n, 7 + n as u64);
            let mut l = a.clone();
            assert!(cholesky_in_place(&mut l, n));
            let x = lower_inverse(&l, n);
            let prod = to_na(&l, n) * to_na(&x, n);
            assert!((prod - DMatrix::identity(n, n)).amax() < 1e-10);
            let kinv = lower_gram(&x, n);
            let want = to_na(&a, n).try_inverse().unwrap();
            assert!((to_na(&kinv, n) - &want).amax() < 1e-8 * want.amax());
        }
    }

    #[test]
    fn triangular_solves() {
        let n = 70;
        let a = spd(n, 3);
        let mut l = a.clone();
        assert!(cholesky_in_place(&mut l, n));
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let y = forward_solve(&l, n, &b);
        let x = backward_solve_t(&l, n, &y);
        let want = to_na(&a, n)
            .lu()
            .solve(&nalgebra::DVector::from_vec(b))
            .unwrap();
        for i in 0..n {
            assert!((x[i] - want[i]).abs() < 1e-9 * want.amax());
        }
    }

    #[test]
    fn lower_mul_columns_independent_of_batch() {
        let n = 150;
        let mut l = spd(n, 11);
        assert!(cholesky_in_place(&mut l, n));
        let m = 37;
        let b: Vec<f64> = (0..n * m).map(|i| ((i * 31) % 97) as f64 / 97.0).collect();
        let full = lower_mul(&l, n, &b, m);
        for c in [0, 5, 36] {
            let col: Vec<f64> = (0..n).map(|r| b[r * m + c]).collect();
            let one = lower_mul(&l, n, &col, 1);
            for r in 0..n {
                assert_eq!(one[r].to_bits(), full[r * m + c].to_bits());
            }
        }
    }
}
