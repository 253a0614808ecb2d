//! Flat-slice matrix kernels. Everything is expressed in accumulate ("axpy")
//! form — the inner loops write independent lanes, which the compiler can
//! vectorize without reassociating float sums, keeping results identical
//! across optimization levels and the parallel/sequential feature split.

use super::Scalar;

/// `c[m x n] += a[m x k] * b[k x n]`, all row-major.
pub fn matmul_acc<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            let brow = &b[kk * n..(kk + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv = *cv + av * bv;
            }
        }
    }
}

/// `dst[cols x rows] = src[rows x cols]` transposed. Staged through a stack
/// tile so both the reads and the writes stream sequentially; matrix strides
/// here are often powers of two, where a naive transpose thrashes one cache
/// set.
pub fn transpose<T: Scalar>(rows: usize, cols: usize, src: &[T], dst: &mut [T]) {
    debug_assert_eq!(src.len(), rows * cols);
    debug_assert_eq!(dst.len(), rows * cols);
    const TILE: usize = 32;
    let mut tile = [T::zero(); TILE * TILE];
    let mut ib = 0;
    while ib < rows {
        let ih = (rows - ib).min(TILE);
        let mut jb = 0;
        while jb < cols {
            let jw = (cols - jb).min(TILE);
            for i in 0..ih {
                let srow = &src[(ib + i) * cols + jb..(ib + i) * cols + jb + jw];
                let trow = &mut tile[i * TILE..i * TILE + jw];
                trow.copy_from_slice(srow);
            }
            for j in 0..jw {
                let drow = &mut dst[(jb + j) * rows + ib..(jb + j) * rows + ib + ih];
                for (i, d) in drow.iter_mut().enumerate() {
                    *d = tile[i * TILE + j];
                }
            }
            jb += jw;
        }
        ib += ih;
    }
}

/// `y[..] += alpha * x[..]`.
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv = *yv + alpha * xv;
    }
}
