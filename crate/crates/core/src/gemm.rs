//! Row-major matrix products on top of `matrixmultiply`.

/// How a row-major operand is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Op {
    /// Stored as rows × cols and used as is.
    N,
    /// Stored as cols × rows and used transposed.
    T,
}

/// A row-major operand with row stride `ld`.
#[derive(Clone, Copy)]
pub(crate) struct Mat<'a> {
    pub data: &'a [f64],
    pub ld: usize,
    pub op: Op,
}

impl<'a> Mat<'a> {
    pub fn n(data: &'a [f64], ld: usize) -> Self {
        Self { data, ld, op: Op::N }
    }

    pub fn t(data: &'a [f64], ld: usize) -> Self {
        Self { data, ld, op: Op::T }
    }

    // (row stride, column stride) of the logical operand and the slice
    // length it needs
    fn strides(&self, rows: usize, cols: usize) -> (isize, isize, usize) {
        match self.op {
            Op::N => (self.ld as isize, 1, if rows == 0 { 0 } else { (rows - 1) * self.ld + cols }),
            Op::T => (1, self.ld as isize, if cols == 0 { 0 } else { (cols - 1) * self.ld + rows }),
        }
    }
}

/// `c = alpha · a · b + beta · c` where the logical `a` is `m × k`, `b` is
/// `k × n` and `c` is `m × n` with row stride `ldc`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(m: usize, k: usize, n: usize, alpha: f64, a: Mat<'_>, b: Mat<'_>, beta: f64, c: &mut [f64], ldc: usize) {
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa, need_a) = a.strides(m, k);
    let (rsb, csb, need_b) = b.strides(k, n);
    assert!(a.data.len() >= need_a && b.data.len() >= need_b, "gemm operand too small");
    assert!(ldc >= n && c.len() >= (m - 1) * ldc + n, "gemm output too small");
    // SAFETY: the strides address only elements inside the slices checked
    // above, and `c` is a unique borrow so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    extern crate std;

    fn at(m: &Mat<'_>, i: usize, j: usize) -> f64 {
        match m.op {
            Op::N => m.data[i * m.ld + j],
            Op::T => m.data[j * m.ld + i],
        }
    }

    #[test]
    fn matches_naive_for_all_transposes_and_strides() {
        let (m, k, n) = (5, 7, 3);
        let pool: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        for (ta, tb) in [(Op::N, Op::N), (Op::N, Op::T), (Op::T, Op::N), (Op::T, Op::T)] {
            for pad in [0usize, 2] {
                let lda = pad + if ta == Op::N { k } else { m };
                let ldb = pad + if tb == Op::N { n } else { k };
                let a = Mat { data: &pool[..], ld: lda, op: ta };
                let b = Mat { data: &pool[50..], ld: ldb, op: tb };
                let ldc = n + pad;
                let mut c = vec![1.0; m * ldc];
                gemm(m, k, n, 2.0, a, b, 0.5, &mut c, ldc);
                for i in 0..m {
                    for j in 0..n {
                        let want: f64 = (0..k).map(|p| at(&a, i, p) * at(&b, p, j)).sum();
                        assert!((c[i * ldc + j] - (2.0 * want + 0.5)).abs() < 1e-12);
                    }
                    for j in n..ldc {
                        assert_eq!(c[i * ldc + j], 1.0);
                    }
                }
            }
        }
    }
}
