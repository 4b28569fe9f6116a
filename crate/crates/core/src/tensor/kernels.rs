//! Slice-level compute kernels shared by the tape and the inference path.

use super::Real;

/// Extent of a strided `rows × cols` matrix in its backing slice.
fn extent(rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

/// `c ← a·b + beta·c` for `a: m×k`, `b: k×n`, `c: m×n` with the given
/// (row, column) strides.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    (rsa, csa): (usize, usize),
    b: &[T],
    (rsb, csb): (usize, usize),
    beta: T,
    c: &mut [T],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(extent(m, k, rsa, csa) <= a.len(), "gemm: lhs out of bounds");
    assert!(extent(k, n, rsb, csb) <= b.len(), "gemm: rhs out of bounds");
    assert!(extent(m, n, rsc, csc) <= c.len(), "gemm: output out of bounds");
    // SAFETY: all three operands were bounds-checked against their extents.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
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

/// Valid output range `[t0, t1)` for a tap offset `off` on `n` samples.
fn tap_range(n: usize, off: isize) -> Option<(usize, usize)> {
    let n = n as isize;
    let t0 = 0.max(-off);
    let t1 = n.min(n - off);
    (t0 < t1).then_some((t0 as usize, t1 as usize))
}

fn tap_offset(tap: usize, kernel: usize, dilation: usize) -> isize {
    (tap as isize - (kernel / 2) as isize) * dilation as isize
}

/// Zero-padded "same" dilated convolution.
///
/// `out[τ, o] = bias[o] + Σ_{k, i} x[τ + k·dilation, i] · w[k + K/2, i, o]`
/// for `k ∈ [−K/2, K/2]`; samples outside `[0, n)` read as zero.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_forward<T: Real>(
    x: &[T],
    n: usize,
    c_in: usize,
    w: &[T],
    kernel: usize,
    c_out: usize,
    bias: &[T],
    dilation: usize,
    out: &mut [T],
) {
    debug_assert_eq!(x.len(), n * c_in);
    debug_assert_eq!(w.len(), kernel * c_in * c_out);
    debug_assert_eq!(out.len(), n * c_out);
    for row in out.chunks_exact_mut(c_out) {
        row.copy_from_slice(bias);
    }
    let tap_len = c_in * c_out;
    for tap in 0..kernel {
        let off = tap_offset(tap, kernel, dilation);
        let Some((t0, t1)) = tap_range(n, off) else { continue };
        let src = (t0 as isize + off) as usize * c_in;
        gemm(
            t1 - t0,
            c_in,
            c_out,
            &x[src..],
            (c_in, 1),
            &w[tap * tap_len..(tap + 1) * tap_len],
            (c_out, 1),
            T::one(),
            &mut out[t0 * c_out..],
            (c_out, 1),
        );
    }
}

/// Accumulates the convolution gradients for upstream gradient `g (n × c_out)`.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_backward<T: Real>(
    x: &[T],
    n: usize,
    c_in: usize,
    w: &[T],
    kernel: usize,
    c_out: usize,
    dilation: usize,
    g: &[T],
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    db: Option<&mut [T]>,
) {
    debug_assert_eq!(g.len(), n * c_out);
    if let Some(db) = db {
        for row in g.chunks_exact(c_out) {
            for (b, v) in db.iter_mut().zip(row) {
                *b += *v;
            }
        }
    }
    let tap_len = c_in * c_out;
    for tap in 0..kernel {
        let off = tap_offset(tap, kernel, dilation);
        let Some((t0, t1)) = tap_range(n, off) else { continue };
        let len = t1 - t0;
        let src = (t0 as isize + off) as usize * c_in;
        let g_sub = &g[t0 * c_out..];
        if let Some(dw) = dw.as_deref_mut() {
            // dW_k += X_kᵀ · G
            gemm(
                c_in,
                len,
                c_out,
                &x[src..],
                (1, c_in),
                g_sub,
                (c_out, 1),
                T::one(),
                &mut dw[tap * tap_len..(tap + 1) * tap_len],
                (c_out, 1),
            );
        }
        if let Some(dx) = dx.as_deref_mut() {
            // dX_k += G · W_kᵀ
            gemm(
                len,
                c_out,
                c_in,
                g_sub,
                (c_out, 1),
                &w[tap * tap_len..(tap + 1) * tap_len],
                (1, c_out),
                T::one(),
                &mut dx[src..],
                (c_in, 1),
            );
        }
    }
}

/// `out = x·w (+ b)` for a row vector `x (f_in)` and `w (f_in × f_out)`.
pub fn linear_forward<T: Real>(x: &[T], w: &[T], b: Option<&[T]>, out: &mut [T]) {
    let f_out = out.len();
    debug_assert_eq!(w.len(), x.len() * f_out);
    match b {
        Some(b) => out.copy_from_slice(b),
        None => out.iter_mut().for_each(|v| *v = T::zero()),
    }
    for (xi, row) in x.iter().zip(w.chunks_exact(f_out)) {
        if *xi == T::zero() {
            continue;
        }
        for (o, wv) in out.iter_mut().zip(row) {
            *o += *xi * *wv;
        }
    }
}

/// Accumulates gradients of [`linear_forward`].
pub fn linear_backward<T: Real>(
    x: &[T],
    w: &[T],
    g: &[T],
    dx: Option<&mut [T]>,
    dw: Option<&mut [T]>,
    db: Option<&mut [T]>,
) {
    let f_out = g.len();
    if let Some(dx) = dx {
        for (d, row) in dx.iter_mut().zip(w.chunks_exact(f_out)) {
            *d += row.iter().zip(g).map(|(a, b)| *a * *b).sum::<T>();
        }
    }
    if let Some(dw) = dw {
        for (xi, row) in x.iter().zip(dw.chunks_exact_mut(f_out)) {
            for (d, gv) in row.iter_mut().zip(g) {
                *d += *xi * *gv;
            }
        }
    }
    if let Some(db) = db {
        for (d, gv) in db.iter_mut().zip(g) {
            *d += *gv;
        }
    }
}
