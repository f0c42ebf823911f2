//! Small-tensor numerical core: valid convolution, 2x2 pooling, the rational
//! tanh activation and the forward/backward passes every cascade stage runs on.

use crate::error::{Error, Result};
use crate::model::{LayerSpec, NetworkSpec, NetworkWeights};
use crate::plane::{FeatureStack, ImagePlane};

/// Output amplitude of the activation function.
pub const ACTIVATION_AMPLITUDE: f32 = 1.7159;

const TANH_ARG_SCALE: f32 = 2.0 / 3.0;
const TANH_QUARTIC: f32 = 1.41645;

#[inline]
fn approx_tanh(y: f32) -> f32 {
    let a = y.abs();
    let p = 1.0 + a + a * a + TANH_QUARTIC * a * a * a * a;
    let sgn = if y > 0.0 {
        1.0
    } else if y < 0.0 {
        -1.0
    } else {
        0.0
    };
    sgn * (1.0 - 1.0 / p)
}

/// Rational approximation of the scaled hyperbolic tangent,
/// `1.7159 * tanh(2x/3)`. Output lies in (-1.7159, 1.7159).
#[inline]
pub fn activation(x: f32) -> f32 {
    ACTIVATION_AMPLITUDE * approx_tanh(x * TANH_ARG_SCALE)
}

/// Analytic derivative of [`activation`]. Continuous at 0; both one-sided
/// branches reduce to the same expression in |y|.
#[inline]
pub fn activation_derivative(x: f32) -> f32 {
    let y = x * TANH_ARG_SCALE;
    let a = y.abs();
    let p = 1.0 + a + a * a + TANH_QUARTIC * a * a * a * a;
    let dp = 1.0 + 2.0 * a + 4.0 * TANH_QUARTIC * a * a * a;
    ACTIVATION_AMPLITUDE * TANH_ARG_SCALE * dp / (p * p)
}

/// Pooling reduction, fixed per model file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    Max,
    Mean,
}

/// Weights of one convolution layer: per (output-map, input-map) kernel
/// matrices plus one bias per output map.
///
/// Kernel storage is output-map-major: `[out][in][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerWeights {
    in_maps: usize,
    out_maps: usize,
    kernel_w: usize,
    kernel_h: usize,
    kernels: Vec<f32>,
    biases: Vec<f32>,
}

impl ConvLayerWeights {
    pub fn zeros(in_maps: usize, out_maps: usize, kernel_w: usize, kernel_h: usize) -> Self {
        Self {
            in_maps,
            out_maps,
            kernel_w,
            kernel_h,
            kernels: vec![0.0; out_maps * in_maps * kernel_w * kernel_h],
            biases: vec![0.0; out_maps],
        }
    }

    pub fn from_parts(
        in_maps: usize,
        out_maps: usize,
        kernel_w: usize,
        kernel_h: usize,
        kernels: Vec<f32>,
        biases: Vec<f32>,
    ) -> Result<Self> {
        if kernels.len() != out_maps * in_maps * kernel_w * kernel_h {
            return Err(Error::Dimension(format!(
                "kernel buffer length {} does not match {}x{}x{}x{}",
                kernels.len(),
                out_maps,
                in_maps,
                kernel_h,
                kernel_w
            )));
        }
        if biases.len() != out_maps {
            return Err(Error::Dimension(format!(
                "bias count {} does not match {} output maps",
                biases.len(),
                out_maps
            )));
        }
        Ok(Self {
            in_maps,
            out_maps,
            kernel_w,
            kernel_h,
            kernels,
            biases,
        })
    }

    #[inline]
    pub fn in_maps(&self) -> usize {
        self.in_maps
    }

    #[inline]
    pub fn out_maps(&self) -> usize {
        self.out_maps
    }

    #[inline]
    pub fn kernel_w(&self) -> usize {
        self.kernel_w
    }

    #[inline]
    pub fn kernel_h(&self) -> usize {
        self.kernel_h
    }

    /// Kernel matrix for the (out, in) map pair, row-major `kernel_h x kernel_w`.
    #[inline]
    pub fn kernel(&self, out: usize, inp: usize) -> &[f32] {
        let k = self.kernel_w * self.kernel_h;
        let base = (out * self.in_maps + inp) * k;
        &self.kernels[base..base + k]
    }

    #[inline]
    pub fn kernel_mut(&mut self, out: usize, inp: usize) -> &mut [f32] {
        let k = self.kernel_w * self.kernel_h;
        let base = (out * self.in_maps + inp) * k;
        &mut self.kernels[base..base + k]
    }

    #[inline]
    pub fn bias(&self, out: usize) -> f32 {
        self.biases[out]
    }

    pub fn kernels(&self) -> &[f32] {
        &self.kernels
    }

    pub fn kernels_mut(&mut self) -> &mut [f32] {
        &mut self.kernels
    }

    pub fn biases(&self) -> &[f32] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f32] {
        &mut self.biases
    }

    /// `outMaps * (inMaps * kernelW * kernelH + 1)`
    pub fn param_count(&self) -> usize {
        self.out_maps * (self.in_maps * self.kernel_w * self.kernel_h + 1)
    }
}

/// Valid cross-correlation with stride 1. No activation applied.
pub fn conv2d_valid(input: &FeatureStack, weights: &ConvLayerWeights) -> Result<FeatureStack> {
    if input.len() != weights.in_maps {
        return Err(Error::Dimension(format!(
            "conv expects {} input maps, got {}",
            weights.in_maps,
            input.len()
        )));
    }
    let (w, h) = (input.width(), input.height());
    if w < weights.kernel_w || h < weights.kernel_h {
        return Err(Error::Dimension(format!(
            "input {}x{} smaller than kernel {}x{}",
            w, h, weights.kernel_w, weights.kernel_h
        )));
    }
    let ow = w - weights.kernel_w + 1;
    let oh = h - weights.kernel_h + 1;

    let mut out_maps = Vec::with_capacity(weights.out_maps);
    for o in 0..weights.out_maps {
        let mut out = ImagePlane::constant(ow, oh, weights.bias(o));
        for i in 0..input.len() {
            let src = input.map(i);
            let kernel = weights.kernel(o, i);
            for ky in 0..weights.kernel_h {
                for kx in 0..weights.kernel_w {
                    let kv = kernel[ky * weights.kernel_w + kx];
                    if kv == 0.0 {
                        continue;
                    }
                    for y in 0..oh {
                        let src_row = src.row(y + ky);
                        let dst = &mut out.data_mut()[y * ow..(y + 1) * ow];
                        for (x, d) in dst.iter_mut().enumerate() {
                            *d += kv * src_row[x + kx];
                        }
                    }
                }
            }
        }
        out_maps.push(out);
    }
    FeatureStack::new(out_maps)
}

/// Non-overlapping 2x2 pooling with stride 2; a trailing odd row/column is
/// dropped (floor division of dimensions).
pub fn pool2(input: &FeatureStack, mode: PoolMode) -> Result<FeatureStack> {
    let (w, h) = (input.width(), input.height());
    if w < 2 || h < 2 {
        return Err(Error::Dimension(format!(
            "pool2 needs at least 2x2 input, got {}x{}",
            w, h
        )));
    }
    let ow = w / 2;
    let oh = h / 2;
    let mut out_maps = Vec::with_capacity(input.len());
    for m in input.maps() {
        let mut out = ImagePlane::zeros(ow, oh);
        for y in 0..oh {
            for x in 0..ow {
                let a = m.get(2 * x, 2 * y);
                let b = m.get(2 * x + 1, 2 * y);
                let c = m.get(2 * x, 2 * y + 1);
                let d = m.get(2 * x + 1, 2 * y + 1);
                let v = match mode {
                    PoolMode::Max => a.max(b).max(c).max(d),
                    PoolMode::Mean => (a + b + c + d) * 0.25,
                };
                out.set(x, y, v);
            }
        }
        out_maps.push(out);
    }
    FeatureStack::new(out_maps)
}

fn apply_activation(stack: &FeatureStack) -> FeatureStack {
    let maps = stack
        .maps()
        .iter()
        .map(|m| {
            let data = m.data().iter().map(|&v| activation(v)).collect();
            ImagePlane::from_vec(m.width(), m.height(), data).expect("same shape")
        })
        .collect();
    FeatureStack::new(maps).expect("same shape")
}

/// Run the layer stack on one input plane, returning the final response map(s).
///
/// Every conv layer is followed by the activation; pooling layers use the
/// spec's pooling mode.
pub fn forward(
    input: &ImagePlane,
    spec: &NetworkSpec,
    weights: &NetworkWeights,
) -> Result<FeatureStack> {
    let mut stack = FeatureStack::from_plane(input.clone());
    let mut conv_idx = 0;
    for layer in spec.layers() {
        match layer {
            LayerSpec::Conv { .. } => {
                let lw = weights.layer(conv_idx).ok_or_else(|| {
                    Error::Dimension("weights missing a conv layer".into())
                })?;
                stack = apply_activation(&conv2d_valid(&stack, lw)?);
                conv_idx += 1;
            }
            LayerSpec::Pool2 => {
                stack = pool2(&stack, spec.pooling())?;
            }
        }
    }
    Ok(stack)
}

enum LayerTrace {
    Conv {
        input: FeatureStack,
        pre_activation: FeatureStack,
    },
    Pool {
        input: FeatureStack,
    },
}

fn forward_trace(
    input: &ImagePlane,
    spec: &NetworkSpec,
    weights: &NetworkWeights,
) -> Result<(Vec<LayerTrace>, FeatureStack)> {
    let mut stack = FeatureStack::from_plane(input.clone());
    let mut traces = Vec::with_capacity(spec.layers().len());
    let mut conv_idx = 0;
    for layer in spec.layers() {
        match layer {
            LayerSpec::Conv { .. } => {
                let lw = weights.layer(conv_idx).ok_or_else(|| {
                    Error::Dimension("weights missing a conv layer".into())
                })?;
                let pre = conv2d_valid(&stack, lw)?;
                let post = apply_activation(&pre);
                traces.push(LayerTrace::Conv {
                    input: stack,
                    pre_activation: pre,
                });
                stack = post;
                conv_idx += 1;
            }
            LayerSpec::Pool2 => {
                let pooled = pool2(&stack, spec.pooling())?;
                traces.push(LayerTrace::Pool { input: stack });
                stack = pooled;
            }
        }
    }
    Ok((traces, stack))
}

fn grad_stack_like(stack: &FeatureStack) -> Vec<Vec<f32>> {
    stack
        .maps()
        .iter()
        .map(|m| vec![0.0; m.width() * m.height()])
        .collect()
}

/// Backpropagate one sample, accumulating parameter gradients into `grads`.
/// `d_out` is the loss gradient with respect to the (post-activation) output.
fn backprop_sample(
    traces: &[LayerTrace],
    spec: &NetworkSpec,
    weights: &NetworkWeights,
    grads: &mut [ConvLayerWeights],
    mut d_out: Vec<Vec<f32>>,
) {
    let mut conv_idx = weights.layer_count();
    for (layer, trace) in spec.layers().iter().zip(traces.iter()).rev() {
        match (layer, trace) {
            (
                LayerSpec::Conv { .. },
                LayerTrace::Conv {
                    input,
                    pre_activation,
                },
            ) => {
                conv_idx -= 1;
                let lw = weights.layer(conv_idx).expect("conv index in range");
                let grad = &mut grads[conv_idx];
                let (ow, oh) = (pre_activation.width(), pre_activation.height());
                let (kw, kh) = (lw.kernel_w(), lw.kernel_h());

                // dz = d_out * f'(z)
                let mut dz: Vec<Vec<f32>> = Vec::with_capacity(lw.out_maps());
                for (o, d_map) in d_out.iter().enumerate() {
                    let z = pre_activation.map(o);
                    let mut v = vec![0.0f32; ow * oh];
                    for (idx, dv) in v.iter_mut().enumerate() {
                        *dv = d_map[idx] * activation_derivative(z.data()[idx]);
                    }
                    dz.push(v);
                }

                let mut d_in = grad_stack_like(input);
                let iw = input.width();
                for o in 0..lw.out_maps() {
                    let dzo = &dz[o];
                    grad.biases_mut()[o] += dzo.iter().sum::<f32>();
                    for i in 0..input.len() {
                        let src = input.map(i);
                        let kernel = lw.kernel(o, i);
                        let kgrad = grad.kernel_mut(o, i);
                        let din = &mut d_in[i];
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let kv = kernel[ky * kw + kx];
                                let mut acc = 0.0f32;
                                for y in 0..oh {
                                    let src_row = src.row(y + ky);
                                    let din_row = &mut din[(y + ky) * iw..(y + ky + 1) * iw];
                                    let dz_row = &dzo[y * ow..(y + 1) * ow];
                                    for x in 0..ow {
                                        let g = dz_row[x];
                                        acc += g * src_row[x + kx];
                                        din_row[x + kx] += g * kv;
                                    }
                                }
                                kgrad[ky * kw + kx] += acc;
                            }
                        }
                    }
                }
                d_out = d_in;
            }
            (LayerSpec::Pool2, LayerTrace::Pool { input }) => {
                let (iw, ih) = (input.width(), input.height());
                let (ow, oh) = (iw / 2, ih / 2);
                let mut d_in = grad_stack_like(input);
                for (m, d_map) in d_out.iter().enumerate() {
                    let src = input.map(m);
                    let din = &mut d_in[m];
                    for y in 0..oh {
                        for x in 0..ow {
                            let g = d_map[y * ow + x];
                            match spec.pooling() {
                                PoolMode::Max => {
                                    // route to first-in-scan-order maximum,
                                    // matching pool2's a.max(b).max(c).max(d)
                                    let coords = [
                                        (2 * x, 2 * y),
                                        (2 * x + 1, 2 * y),
                                        (2 * x, 2 * y + 1),
                                        (2 * x + 1, 2 * y + 1),
                                    ];
                                    let mut best = coords[0];
                                    let mut best_v = src.get(best.0, best.1);
                                    for &(cx, cy) in &coords[1..] {
                                        let v = src.get(cx, cy);
                                        if v > best_v {
                                            best_v = v;
                                            best = (cx, cy);
                                        }
                                    }
                                    din[best.1 * iw + best.0] += g;
                                }
                                PoolMode::Mean => {
                                    let q = g * 0.25;
                                    din[2 * y * iw + 2 * x] += q;
                                    din[2 * y * iw + 2 * x + 1] += q;
                                    din[(2 * y + 1) * iw + 2 * x] += q;
                                    din[(2 * y + 1) * iw + 2 * x + 1] += q;
                                }
                            }
                        }
                    }
                }
                d_out = d_in;
            }
            _ => unreachable!("trace kind follows layer kind"),
        }
    }
}

/// Momentum buffers for SGD training, shaped like the network weights.
#[derive(Debug, Clone)]
pub struct SgdMomentum {
    velocity: Vec<ConvLayerWeights>,
}

impl SgdMomentum {
    pub fn zeros_like(weights: &NetworkWeights) -> Self {
        Self {
            velocity: weights.layers().iter().map(zero_like).collect(),
        }
    }
}

fn zero_like(w: &ConvLayerWeights) -> ConvLayerWeights {
    ConvLayerWeights::zeros(w.in_maps(), w.out_maps(), w.kernel_w(), w.kernel_h())
}

/// Mean-squared-error gradients over a labeled batch, without applying them.
/// Returns the per-layer gradients and the mean loss.
pub fn mse_batch_gradients(
    batch: &[(ImagePlane, f32)],
    spec: &NetworkSpec,
    weights: &NetworkWeights,
) -> Result<(Vec<ConvLayerWeights>, f32)> {
    if batch.is_empty() {
        return Err(Error::Training("empty batch".into()));
    }
    let mut grads: Vec<ConvLayerWeights> = weights.layers().iter().map(zero_like).collect();
    let inv_n = 1.0 / batch.len() as f32;
    let mut loss_sum = 0.0f32;
    for (sample, target) in batch {
        let (traces, out) = forward_trace(sample, spec, weights)?;
        if out.len() != 1 || out.width() != 1 || out.height() != 1 {
            return Err(Error::Dimension(format!(
                "training sample produced {}x{}x{} output, expected single 1x1 response",
                out.len(),
                out.width(),
                out.height()
            )));
        }
        let y = out.map(0).get(0, 0);
        let diff = y - target;
        loss_sum += diff * diff;
        let d_out = vec![vec![2.0 * diff * inv_n]];
        backprop_sample(&traces, spec, weights, &mut grads, d_out);
    }
    let loss = loss_sum * inv_n;
    if !loss.is_finite() {
        return Err(Error::Training("non-finite loss".into()));
    }
    Ok((grads, loss))
}

/// One SGD-with-momentum step on mean squared error between the final
/// response and the +-1 target. Returns the mean loss before the update.
pub fn backward_sgd_step(
    batch: &[(ImagePlane, f32)],
    spec: &NetworkSpec,
    weights: &mut NetworkWeights,
    state: &mut SgdMomentum,
    lr: f32,
    momentum: f32,
) -> Result<f32> {
    let (grads, loss) = mse_batch_gradients(batch, spec, weights)?;
    for (li, grad) in grads.iter().enumerate() {
        let vel = &mut state.velocity[li];
        let w = weights.layer_mut(li).expect("layer index in range");
        for ((vk, gk), wk) in vel
            .kernels_mut()
            .iter_mut()
            .zip(grad.kernels())
            .zip(w.kernels_mut())
        {
            *vk = momentum * *vk - lr * gk;
            *wk += *vk;
        }
        for ((vb, gb), wb) in vel
            .biases_mut()
            .iter_mut()
            .zip(grad.biases())
            .zip(w.biases_mut())
        {
            *vb = momentum * *vb - lr * gb;
            *wb += *vb;
        }
    }
    Ok(loss)
}
