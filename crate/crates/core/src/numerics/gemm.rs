//! Safe wrappers over `matrixmultiply::dgemm` for the three products the
//! layer kernels need. All matrices are dense row-major slices.

/// `c = a · b` (+ `c` when `accumulate`), with `a` m×k and `b` k×n.
pub(crate) fn ab(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], accumulate: bool) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    gemm(m, k, n, a, (k as isize, 1), b, (n as isize, 1), c, accumulate);
}

/// `c = aᵀ · b`, with `a` stored k×m and `b` k×n.
pub(crate) fn atb(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], accumulate: bool) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    gemm(m, k, n, a, (1, m as isize), b, (n as isize, 1), c, accumulate);
}

/// `c = a · bᵀ`, with `a` m×k and `b` stored n×k.
pub(crate) fn abt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], accumulate: bool) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    gemm(m, k, n, a, (k as isize, 1), b, (1, k as isize), c, accumulate);
}

#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    if k == 0 {
        if !accumulate {
            c[..m * n].iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    // SAFETY: the debug asserts in the public wrappers document the extents;
    // every (row, col) reached through the given strides lies inside the
    // slices because the strides describe dense row-major or transposed
    // row-major layouts of exactly those extents.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
