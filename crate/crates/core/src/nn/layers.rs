//! Per-sample layer kernels. Tensors are flat `[channels, height, width]`.

use super::arch::{PoolKind, PoolSpec, Shape};

/// `c = a·b + beta·c` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (isize, isize),
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: callers pass slices covering every index reachable from the
    // given dimensions and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConvGeometry {
    pub input: Shape,
    pub output: Shape,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    fn patch_len(&self) -> usize {
        self.input.channels * self.kernel * self.kernel
    }

    fn positions(&self) -> usize {
        self.output.height * self.output.width
    }
}

/// Unrolls receptive fields into a `[c·k·k, oh·ow]` matrix; padding reads as 0.
pub fn im2col(g: &ConvGeometry, input: &[f64], col: &mut Vec<f64>) {
    let (k, s, p) = (g.kernel, g.stride, g.padding as isize);
    let (h, w) = (g.input.height as isize, g.input.width as isize);
    let (oh, ow) = (g.output.height, g.output.width);
    let n = oh * ow;
    col.clear();
    col.resize(g.patch_len() * n, 0.0);
    for c in 0..g.input.channels {
        let plane = &input[c * (h * w) as usize..(c + 1) * (h * w) as usize];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut col[row * n..(row + 1) * n];
                for oy in 0..oh {
                    let y = (oy * s + ky) as isize - p;
                    if y < 0 || y >= h {
                        continue;
                    }
                    let src = &plane[(y * w) as usize..((y + 1) * w) as usize];
                    for ox in 0..ow {
                        let x = (ox * s + kx) as isize - p;
                        if x >= 0 && x < w {
                            dst[oy * ow + ox] = src[x as usize];
                        }
                    }
                }
            }
        }
    }
}

fn col2im_add(g: &ConvGeometry, col: &[f64], grad_input: &mut [f64]) {
    let (k, s, p) = (g.kernel, g.stride, g.padding as isize);
    let (h, w) = (g.input.height as isize, g.input.width as isize);
    let (oh, ow) = (g.output.height, g.output.width);
    let n = oh * ow;
    for c in 0..g.input.channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &col[row * n..(row + 1) * n];
                for oy in 0..oh {
                    let y = (oy * s + ky) as isize - p;
                    if y < 0 || y >= h {
                        continue;
                    }
                    for ox in 0..ow {
                        let x = (ox * s + kx) as isize - p;
                        if x >= 0 && x < w {
                            grad_input[(c * (h * w) as usize) + (y * w + x) as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Convolution (cross-correlation) of one sample; writes `[filters, oh, ow]`.
pub fn conv_forward(
    g: &ConvGeometry,
    weight: &[f64],
    bias: &[f64],
    input: &[f64],
    col: &mut Vec<f64>,
    out: &mut Vec<f64>,
) {
    im2col(g, input, col);
    let (f, kk, n) = (g.output.channels, g.patch_len(), g.positions());
    out.clear();
    out.reserve(f * n);
    for &b in bias {
        out.extend(std::iter::repeat_n(b, n));
    }
    gemm(f, kk, n, weight, (kk as isize, 1), col, (n as isize, 1), 1.0, out, (n as isize, 1));
}

/// Accumulates weight/bias gradients and, when requested, the input gradient.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward(
    g: &ConvGeometry,
    weight: &[f64],
    input: &[f64],
    grad_out: &[f64],
    grad_weight: &mut [f64],
    grad_bias: &mut [f64],
    grad_input: Option<&mut Vec<f64>>,
    col: &mut Vec<f64>,
) {
    let (f, kk, n) = (g.output.channels, g.patch_len(), g.positions());
    im2col(g, input, col);
    gemm(f, n, kk, grad_out, (n as isize, 1), col, (1, n as isize), 1.0, grad_weight, (kk as isize, 1));
    for (gb, row) in grad_bias.iter_mut().zip(grad_out.chunks_exact(n)) {
        *gb += row.iter().sum::<f64>();
    }
    if let Some(gi) = grad_input {
        let mut dcol = vec![0.0; kk * n];
        gemm(kk, f, n, weight, (1, kk as isize), grad_out, (n as isize, 1), 0.0, &mut dcol, (n as isize, 1));
        gi.clear();
        gi.resize(g.input.len(), 0.0);
        col2im_add(g, &dcol, gi);
    }
}

pub fn relu(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Zeroes the gradient wherever the pre-activation was not positive.
pub fn relu_backward(pre: &[f64], grad: &mut [f64]) {
    for (g, &p) in grad.iter_mut().zip(pre) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

pub fn pool_output_shape(input: Shape, spec: &PoolSpec) -> Shape {
    Shape::new(
        input.channels,
        (input.height - spec.window) / spec.stride + 1,
        (input.width - spec.window) / spec.stride + 1,
    )
}

/// Pools one sample. For max pooling `argmax` receives the flat input index
/// of each output's maximum (first in scan order on ties).
pub fn pool_forward(input: &[f64], shape: Shape, spec: &PoolSpec, out: &mut Vec<f64>, argmax: &mut Vec<u32>) {
    let os = pool_output_shape(shape, spec);
    let (w, s) = (spec.window, spec.stride);
    out.clear();
    argmax.clear();
    let plane = shape.height * shape.width;
    let inv = 1.0 / (w * w) as f64;
    for c in 0..shape.channels {
        let base = c * plane;
        for oy in 0..os.height {
            for ox in 0..os.width {
                match spec.kind {
                    PoolKind::Max => {
                        let mut best = f64::NEG_INFINITY;
                        let mut at = 0;
                        for dy in 0..w {
                            for dx in 0..w {
                                let idx = base + (oy * s + dy) * shape.width + ox * s + dx;
                                if input[idx] > best {
                                    best = input[idx];
                                    at = idx;
                                }
                            }
                        }
                        out.push(best);
                        argmax.push(at as u32);
                    }
                    PoolKind::Average => {
                        let mut acc = 0.0;
                        for dy in 0..w {
                            for dx in 0..w {
                                acc += input[base + (oy * s + dy) * shape.width + ox * s + dx];
                            }
                        }
                        out.push(acc * inv);
                    }
                }
            }
        }
    }
}

/// Routes the pooled gradient back: to the cached argmax for max pooling,
/// uniformly over the window for average pooling.
pub fn pool_backward(grad_out: &[f64], shape: Shape, spec: &PoolSpec, argmax: &[u32], grad_input: &mut Vec<f64>) {
    grad_input.clear();
    grad_input.resize(shape.len(), 0.0);
    match spec.kind {
        PoolKind::Max => {
            for (&g, &i) in grad_out.iter().zip(argmax) {
                grad_input[i as usize] += g;
            }
        }
        PoolKind::Average => {
            let os = pool_output_shape(shape, spec);
            let (w, s) = (spec.window, spec.stride);
            let plane = shape.height * shape.width;
            let share = 1.0 / (w * w) as f64;
            for c in 0..shape.channels {
                for oy in 0..os.height {
                    for ox in 0..os.width {
                        let g = grad_out[(c * os.height + oy) * os.width + ox] * share;
                        for dy in 0..w {
                            for dx in 0..w {
                                grad_input[c * plane + (oy * s + dy) * shape.width + ox * s + dx] += g;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `out = W·x + b`, `W` is `[out, in]` row-major.
pub fn dense_forward(weight: &[f64], bias: &[f64], x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(
        weight
            .chunks_exact(x.len())
            .zip(bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()),
    );
}

pub fn dense_backward(
    weight: &[f64],
    x: &[f64],
    grad_out: &[f64],
    grad_weight: &mut [f64],
    grad_bias: &mut [f64],
    grad_input: Option<&mut Vec<f64>>,
) {
    let n_in = x.len();
    for (o, &g) in grad_out.iter().enumerate() {
        grad_bias[o] += g;
        if g != 0.0 {
            for (gw, &v) in grad_weight[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                *gw += g * v;
            }
        }
    }
    if let Some(gi) = grad_input {
        gi.clear();
        gi.resize(n_in, 0.0);
        for (o, &g) in grad_out.iter().enumerate() {
            if g != 0.0 {
                for (d, &w) in gi.iter_mut().zip(&weight[o * n_in..(o + 1) * n_in]) {
                    *d += g * w;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_pool_routes_to_argmax() {
        let spec = PoolSpec { kind: PoolKind::Max, window: 2, stride: 2 };
        let shape = Shape::new(1, 2, 2);
        let (mut out, mut arg) = (Vec::new(), Vec::new());
        pool_forward(&[1.0, 2.0, 3.0, 4.0], shape, &spec, &mut out, &mut arg);
        assert_eq!(out, vec![4.0]);
        let mut gi = Vec::new();
        pool_backward(&[1.0], shape, &spec, &arg, &mut gi);
        assert_eq!(gi, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn average_pool_spreads_uniformly() {
        let spec = PoolSpec { kind: PoolKind::Average, window: 2, stride: 2 };
        let shape = Shape::new(1, 2, 2);
        let (mut out, mut arg) = (Vec::new(), Vec::new());
        pool_forward(&[1.0, 2.0, 3.0, 4.0], shape, &spec, &mut out, &mut arg);
        assert_eq!(out, vec![2.5]);
        let mut gi = Vec::new();
        pool_backward(&[1.0], shape, &spec, &arg, &mut gi);
        assert_eq!(gi, vec![0.25; 4]);
    }

    #[test]
    fn conv_matches_nested_loops() {
        let g = ConvGeometry {
            input: Shape::new(2, 5, 4),
            output: Shape::new(3, 3, 2),
            kernel: 3,
            stride: 2,
            padding: 1,
        };
        let input: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let weight: Vec<f64> = (0..54).map(|i| (i as f64 * 0.11).cos()).collect();
        let bias = [0.1, -0.2, 0.3];
        let (mut col, mut out) = (Vec::new(), Vec::new());
        conv_forward(&g, &weight, &bias, &input, &mut col, &mut out);
        for f in 0..3 {
            for oy in 0..3 {
                for ox in 0..2 {
                    let mut acc = bias[f];
                    for c in 0..2 {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let y = (oy * 2 + ky) as isize - 1;
                                let x = (ox * 2 + kx) as isize - 1;
                                if (0..5).contains(&y) && (0..4).contains(&x) {
                                    acc += weight[((f * 2 + c) * 3 + ky) * 3 + kx]
                                        * input[(c * 5 + y as usize) * 4 + x as usize];
                                }
                            }
                        }
                    }
                    assert!((out[(f * 3 + oy) * 2 + ox] - acc).abs() < 1e-12);
                }
            }
        }
    }
}
