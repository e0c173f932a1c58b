//! Slice-level compute kernels. Summation order is fixed so results are
//! reproducible bit for bit.

use super::Scalar;

/// Dot product with eight independent accumulators.
#[inline(always)]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] = acc[i] + x[i] * y[i];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail = tail + *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `dst += alpha * src`
#[inline(always)]
pub(crate) fn axpy<T: Scalar>(alpha: T, src: &[T], dst: &mut [T]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = *d + alpha * *s;
    }
}

/// Writes `c` planes of `h x w` into zero-bordered `(h + 2) x (w + 2)` planes.
fn pad_into<T: Scalar>(input: &[T], c: usize, h: usize, w: usize, out: &mut Vec<T>) {
    let pw = w + 2;
    out.clear();
    out.resize(c * (h + 2) * pw, T::zero());
    for ch in 0..c {
        for y in 0..h {
            let dst = (ch * (h + 2) + y + 1) * pw + 1;
            out[dst..dst + w].copy_from_slice(&input[(ch * h + y) * w..(ch * h + y + 1) * w]);
        }
    }
}

/// `out[y][x] += sum_{ky,kx} k[ky][kx] * padded[y + ky][x + kx]` over one plane.
#[inline(always)]
fn correlate_acc<T: Scalar>(out: &mut [T], padded: &[T], k: &[T], h: usize, w: usize) {
    let pw = w + 2;
    for y in 0..h {
        let r0 = &padded[y * pw..y * pw + pw];
        let r1 = &padded[(y + 1) * pw..(y + 1) * pw + pw];
        let r2 = &padded[(y + 2) * pw..(y + 2) * pw + pw];
        let (a0, a1, a2) = (&r0[..w], &r0[1..w + 1], &r0[2..w + 2]);
        let (b0, b1, b2) = (&r1[..w], &r1[1..w + 1], &r1[2..w + 2]);
        let (c0, c1, c2) = (&r2[..w], &r2[1..w + 1], &r2[2..w + 2]);
        let o = &mut out[y * w..(y + 1) * w];
        for x in 0..w {
            o[x] = o[x]
                + k[0] * a0[x]
                + k[1] * a1[x]
                + k[2] * a2[x]
                + k[3] * b0[x]
                + k[4] * b1[x]
                + k[5] * b2[x]
                + k[6] * c0[x]
                + k[7] * c1[x]
                + k[8] * c2[x];
        }
    }
}

/// 3x3 convolution, stride 1, zero padding 1, no bias, accumulated into the
/// zeroed `out`. `weights` layout: `[cout][cin][ky][kx]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv3x3_forward<T: Scalar>(
    input: &[T],
    weights: &[T],
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    scratch: &mut Vec<T>,
    out: &mut [T],
) {
    let (hw, phw) = (h * w, (h + 2) * (w + 2));
    pad_into(input, cin, h, w, scratch);
    for o in 0..cout {
        let out_o = &mut out[o * hw..(o + 1) * hw];
        for c in 0..cin {
            let k = &weights[(o * cin + c) * 9..(o * cin + c + 1) * 9];
            correlate_acc(out_o, &scratch[c * phw..(c + 1) * phw], k, h, w);
        }
    }
}

/// Accumulates the weight gradient into `grad_w` and, when given, writes the
/// input gradient into the zeroed `grad_in`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv3x3_backward<T: Scalar>(
    input: &[T],
    weights: &[T],
    grad_out: &[T],
    grad_w: &mut [T],
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    scratch: &mut Vec<T>,
    grad_in: Option<&mut [T]>,
) {
    let (hw, pw, phw) = (h * w, w + 2, (h + 2) * (w + 2));
    pad_into(input, cin, h, w, scratch);
    for o in 0..cout {
        let g_o = &grad_out[o * hw..(o + 1) * hw];
        for c in 0..cin {
            let p_c = &scratch[c * phw..(c + 1) * phw];
            for tap in 0..9 {
                let (ky, kx) = (tap / 3, tap % 3);
                let mut acc = T::zero();
                for y in 0..h {
                    let src = &p_c[(y + ky) * pw + kx..(y + ky) * pw + kx + w];
                    acc = acc + dot(&g_o[y * w..(y + 1) * w], src);
                }
                let wi = (o * cin + c) * 9 + tap;
                grad_w[wi] = grad_w[wi] + acc;
            }
        }
    }
    let Some(grad_in) = grad_in else { return };
    // correlate the padded output gradient with the flipped kernel
    pad_into(grad_out, cout, h, w, scratch);
    for c in 0..cin {
        let gi_c = &mut grad_in[c * hw..(c + 1) * hw];
        for o in 0..cout {
            let k = &weights[(o * cin + c) * 9..(o * cin + c + 1) * 9];
            let flipped: [T; 9] = std::array::from_fn(|i| k[8 - i]);
            correlate_acc(gi_c, &scratch[o * phw..(o + 1) * phw], &flipped, h, w);
        }
    }
}

/// 2x2 max pooling, stride 2, ceil mode. Returns the pooled values and the
/// flat input index of each window's maximum (first occurrence on ties).
pub(crate) fn maxpool2_forward<T: Scalar>(input: &[T], c: usize, h: usize, w: usize, out: &mut [T], arg: &mut Vec<usize>) {
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    arg.clear();
    arg.resize(c * oh * ow, 0);
    // windows are scanned in row-major order: (0,0), (0,1), (1,0), (1,1)
    let pick = |idx: &[usize], out: &mut T, arg: &mut usize| {
        let mut bi = idx[0];
        for &i in &idx[1..] {
            if input[i] > input[bi] {
                bi = i;
            }
        }
        *out = input[bi];
        *arg = bi;
    };
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            let r0 = base + 2 * oy * w;
            let full_rows = 2 * oy + 1 < h;
            let o_row = (ch * oh + oy) * ow;
            for ox in 0..ow {
                let i0 = r0 + 2 * ox;
                let full_cols = 2 * ox + 1 < w;
                let (o, a) = (&mut out[o_row + ox], &mut arg[o_row + ox]);
                match (full_rows, full_cols) {
                    (true, true) => {
                        let (mut bv, mut bi) = (input[i0], i0);
                        for i in [i0 + 1, i0 + w, i0 + w + 1] {
                            let v = input[i];
                            let gt = v > bv;
                            bv = if gt { v } else { bv };
                            bi = if gt { i } else { bi };
                        }
                        *o = bv;
                        *a = bi;
                    }
                    (true, false) => pick(&[i0, i0 + w], o, a),
                    (false, true) => pick(&[i0, i0 + 1], o, a),
                    (false, false) => pick(&[i0], o, a),
                }
            }
        }
    }
}

pub(crate) fn dense_forward<T: Scalar>(input: &[T], weights: &[T], fan_in: usize, out: &mut [T]) {
    for (o, v) in out.iter_mut().enumerate() {
        *v = dot(&weights[o * fan_in..(o + 1) * fan_in], input);
    }
}

/// Accumulates the weight gradient and, when given, writes the input
/// gradient into the zeroed `grad_in`.
pub(crate) fn dense_backward<T: Scalar>(
    input: &[T],
    weights: &[T],
    grad_out: &[T],
    grad_w: &mut [T],
    fan_in: usize,
    mut grad_in: Option<&mut [T]>,
) {
    for (o, &g) in grad_out.iter().enumerate() {
        if g == T::zero() {
            continue;
        }
        axpy(g, input, &mut grad_w[o * fan_in..(o + 1) * fan_in]);
        if let Some(gi) = grad_in.as_deref_mut() {
            axpy(g, &weights[o * fan_in..(o + 1) * fan_in], gi);
        }
    }
}
