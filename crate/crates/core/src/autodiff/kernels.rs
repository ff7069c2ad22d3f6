//! Dense loops behind the convolution operator.

use super::Real;

/// Pixels processed per block in the convolution matmuls.
const BLOCK: usize = 512;

#[inline]
pub(crate) fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with eight independent accumulators, summed in a fixed order.
#[inline]
pub(crate) fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let chunks = x.len() / 8;
    for c in 0..chunks {
        let xs = &x[c * 8..c * 8 + 8];
        let ys = &y[c * 8..c * 8 + 8];
        for l in 0..8 {
            acc[l] += xs[l] * ys[l];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..x.len() {
        tail += x[i] * y[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// Unfolds one `[C, H, W]` image into `[C*k*k, H*W]` patches with zero padding `k/2`.
pub(crate) fn im2col<T: Real>(x: &[T], c: usize, h: usize, w: usize, k: usize, col: &mut [T]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut col[((ci * k + ky) * k + kx) * hw..][..hw];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as isize - dx).min(w as isize).max(0) as usize;
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize || x_lo >= x_hi {
                        dst.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    dst[..x_lo].iter_mut().for_each(|v| *v = T::zero());
                    dst[x_hi..].iter_mut().for_each(|v| *v = T::zero());
                    let s0 = (x_lo as isize + dx) as usize;
                    dst[x_lo..x_hi].copy_from_slice(&src[s0..s0 + (x_hi - x_lo)]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch gradients back, accumulating into `dx`.
pub(crate) fn col2im<T: Real>(col: &[T], c: usize, h: usize, w: usize, k: usize, dx_out: &mut [T]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..c {
        let plane = &mut dx_out[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &col[((ci * k + ky) * k + kx) * hw..][..hw];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as isize - dx).min(w as isize).max(0) as usize;
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let s0 = (x_lo as isize + dx) as usize;
                    let dst = &mut plane[sy as usize * w + s0..][..x_hi - x_lo];
                    for (d, &g) in dst.iter_mut().zip(&row[y * w + x_lo..y * w + x_hi]) {
                        *d += g;
                    }
                }
            }
        }
    }
}

/// `out[f, p] = bias[f] + sum_j weight[f, j] * col[j, p]` for one image.
pub(crate) fn conv_forward<T: Real>(col: &[T], weight: &[T], bias: &[T], f: usize, ckk: usize, hw: usize, out: &mut [T]) {
    for fi in 0..f {
        out[fi * hw..(fi + 1) * hw].iter_mut().for_each(|v| *v = bias[fi]);
    }
    let mut start = 0;
    while start < hw {
        let len = BLOCK.min(hw - start);
        for fi in 0..f {
            let wrow = &weight[fi * ckk..(fi + 1) * ckk];
            let (_, rest) = out.split_at_mut(fi * hw + start);
            let dst = &mut rest[..len];
            for (j, &a) in wrow.iter().enumerate() {
                axpy(a, &col[j * hw + start..j * hw + start + len], dst);
            }
        }
        start += len;
    }
}

/// `dcol[j, p] = sum_f weight[f, j] * dout[f, p]` for one image.
pub(crate) fn conv_backward_input<T: Real>(dout: &[T], weight: &[T], f: usize, ckk: usize, hw: usize, dcol: &mut [T]) {
    dcol.iter_mut().for_each(|v| *v = T::zero());
    let mut start = 0;
    while start < hw {
        let len = BLOCK.min(hw - start);
        for fi in 0..f {
            let g = &dout[fi * hw + start..fi * hw + start + len];
            for j in 0..ckk {
                let a = weight[fi * ckk + j];
                axpy(a, g, &mut dcol[j * hw + start..j * hw + start + len]);
            }
        }
        start += len;
    }
}

/// `dw[f, j] += sum_p dout[f, p] * col[j, p]` and `db[f] += sum_p dout[f, p]`.
pub(crate) fn conv_backward_weight<T: Real>(
    dout: &[T],
    col: &[T],
    f: usize,
    ckk: usize,
    hw: usize,
    dw: &mut [T],
    db: &mut [T],
) {
    for fi in 0..f {
        let g = &dout[fi * hw..(fi + 1) * hw];
        for j in 0..ckk {
            dw[fi * ckk + j] += dot(g, &col[j * hw..(j + 1) * hw]);
        }
        db[fi] += g.iter().copied().sum::<T>();
    }
}
