//! Shared per-point dense layers over row-major activation matrices.
//!
//! Weights are stored input-major (`w[i * out + o]`) so the forward pass and
//! the weight gradient are axpy loops over contiguous output rows.

use crate::real::Real;

/// `y[r] = b + x[r] W`, optionally followed by ReLU.
pub(crate) fn forward<T: Real>(
    x: &[T],
    rows: usize,
    in_dim: usize,
    w: &[T],
    b: &[T],
    relu: bool,
    y: &mut [T],
) {
    let out_dim = b.len();
    debug_assert_eq!(x.len(), rows * in_dim);
    debug_assert_eq!(y.len(), rows * out_dim);
    debug_assert_eq!(w.len(), in_dim * out_dim);
    for (xr, yr) in x.chunks_exact(in_dim).zip(y.chunks_exact_mut(out_dim)) {
        yr.copy_from_slice(b);
        for (i, &xi) in xr.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            axpy(xi, &w[i * out_dim..(i + 1) * out_dim], yr);
        }
        if relu {
            for v in yr.iter_mut() {
                if *v < T::zero() {
                    *v = T::zero();
                }
            }
        }
    }
}

/// Backward through one layer.
///
/// `dy` holds the gradient w.r.t. the layer output and is masked in place by
/// the ReLU derivative (taken from the stored output `y`). Weight and bias
/// gradients are accumulated; `dx` is overwritten when given.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward<T: Real>(
    x: &[T],
    y: &[T],
    dy: &mut [T],
    rows: usize,
    in_dim: usize,
    w: &[T],
    relu: bool,
    dw: &mut [T],
    db: &mut [T],
    dx: Option<&mut [T]>,
) {
    let out_dim = db.len();
    debug_assert_eq!(dy.len(), rows * out_dim);
    if relu {
        for (g, &v) in dy.iter_mut().zip(y) {
            if v <= T::zero() {
                *g = T::zero();
            }
        }
    }
    for (xr, gr) in x.chunks_exact(in_dim).zip(dy.chunks_exact(out_dim)) {
        if gr.iter().all(|g| *g == T::zero()) {
            continue;
        }
        for (dbo, &g) in db.iter_mut().zip(gr) {
            *dbo += g;
        }
        for (i, &xi) in xr.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            axpy(xi, gr, &mut dw[i * out_dim..(i + 1) * out_dim]);
        }
    }
    if let Some(dx) = dx {
        for (dxr, gr) in dx.chunks_exact_mut(in_dim).zip(dy.chunks_exact(out_dim)) {
            for (i, slot) in dxr.iter_mut().enumerate() {
                *slot = dot(gr, &w[i * out_dim..(i + 1) * out_dim]);
            }
        }
    }
}

#[inline]
pub(crate) fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with eight independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn forward_matches_manual() {
        // 2 rows, 3 -> 2
        let x = [1.0f64, 2.0, 3.0, -1.0, 0.0, 0.5];
        let w = [1.0, 0.0, 0.0, 1.0, 1.0, -1.0];
        let b = [0.5, -10.0];
        let mut y = [0.0; 4];
        forward(&x, 2, 3, &w, &b, false, &mut y);
        assert_eq!(
            y,
            [
                1.0 + 3.0 + 0.5,
                2.0 - 3.0 - 10.0,
                -1.0 + 0.5 + 0.5,
                -0.5 - 10.0
            ]
        );
        forward(&x, 2, 3, &w, &b, true, &mut y);
        assert_eq!(y, [4.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dot_handles_tails() {
        let a: alloc::vec::Vec<f64> = (0..13).map(|i| i as f64).collect();
        let b = vec![2.0; 13];
        assert_eq!(dot(&a, &b), 156.0);
    }
}
