//! Network architecture descriptions, geometric derivations (receptive field,
//! output stride, parameter count), the reference cascade configurations and
//! bit-exact weight serialization.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{ConvLayerWeights, PoolMode};

/// Stage-1 scanning window of the reference cascade.
pub const STAGE1_WINDOW: (usize, usize) = (27, 31);
/// Patch size fed to the selective unit.
pub const SELECTIVE_PATCH: (usize, usize) = (51, 55);
/// Response map size the selective networks must produce on a full patch.
pub const SELECTIVE_MAP: (usize, usize) = (5, 5);
/// Parameter budgets the reference configurations are tuned toward.
pub const PARAM_TARGETS: [usize; 3] = [797, 1_819, 2_923];
/// Published total feature-map budget across all three networks.
pub const FEATURE_MAP_TARGET: usize = 355;

const MODEL_MAGIC: &[u8; 4] = b"CCNC";
const MODEL_VERSION: u32 = 1;

/// One layer of a network: convolution (stride 1, activation applied) or
/// 2x2 pooling (stride 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        in_maps: usize,
        out_maps: usize,
        kernel_w: usize,
        kernel_h: usize,
    },
    Pool2,
}

/// Ordered layer stack plus the pooling mode it runs with.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    layers: Vec<LayerSpec>,
    pooling: PoolMode,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>, pooling: PoolMode) -> Result<Self> {
        let spec = Self { layers, pooling };
        spec.validate()?;
        Ok(spec)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn pooling(&self) -> PoolMode {
        self.pooling
    }

    fn validate(&self) -> Result<()> {
        match self.layers.last() {
            Some(LayerSpec::Conv { out_maps: 1, .. }) => {}
            _ => {
                return Err(Error::Geometry(
                    "final layer must be a conv with a single output map".into(),
                ))
            }
        }
        let mut maps = 1usize;
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                LayerSpec::Conv {
                    in_maps,
                    out_maps,
                    kernel_w,
                    kernel_h,
                } => {
                    if in_maps != maps {
                        return Err(Error::Geometry(format!(
                            "layer {} expects {} input maps, previous layer provides {}",
                            i, in_maps, maps
                        )));
                    }
                    if out_maps == 0 || kernel_w == 0 || kernel_h == 0 {
                        return Err(Error::Geometry(format!(
                            "layer {} has a zero dimension",
                            i
                        )));
                    }
                    maps = out_maps;
                }
                LayerSpec::Pool2 => {}
            }
        }
        // the receptive-field chain must stay positive
        let _ = self.receptive_field();
        Ok(())
    }

    /// Input size producing a 1x1 final map, by inverse dimension-chaining.
    pub fn receptive_field(&self) -> (usize, usize) {
        let mut w = 1usize;
        let mut h = 1usize;
        for layer in self.layers.iter().rev() {
            match *layer {
                LayerSpec::Conv {
                    kernel_w, kernel_h, ..
                } => {
                    w += kernel_w - 1;
                    h += kernel_h - 1;
                }
                LayerSpec::Pool2 => {
                    w *= 2;
                    h *= 2;
                }
            }
        }
        (w, h)
    }

    /// Spacing in input pixels between adjacent response-map cells:
    /// the product of all pooling strides.
    pub fn output_stride(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::Pool2))
            .fold(1, |s, _| s * 2)
    }

    /// Output map dimensions for a given input size, or None when the input
    /// is smaller than some layer's kernel along the way.
    pub fn output_shape(&self, mut w: usize, mut h: usize) -> Option<(usize, usize)> {
        for layer in &self.layers {
            match *layer {
                LayerSpec::Conv {
                    kernel_w, kernel_h, ..
                } => {
                    if w < kernel_w || h < kernel_h {
                        return None;
                    }
                    w = w - kernel_w + 1;
                    h = h - kernel_h + 1;
                }
                LayerSpec::Pool2 => {
                    if w < 2 || h < 2 {
                        return None;
                    }
                    w /= 2;
                    h /= 2;
                }
            }
        }
        Some((w, h))
    }

    /// Closed-form parameter count: sum over conv layers of
    /// `outMaps * (inMaps * kW * kH + 1)`.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match *l {
                LayerSpec::Conv {
                    in_maps,
                    out_maps,
                    kernel_w,
                    kernel_h,
                } => out_maps * (in_maps * kernel_w * kernel_h + 1),
                LayerSpec::Pool2 => 0,
            })
            .sum()
    }

    /// Feature maps emitted by conv layers (the hidden-map tally).
    pub fn feature_map_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match *l {
                LayerSpec::Conv { out_maps, .. } => out_maps,
                LayerSpec::Pool2 => 0,
            })
            .sum()
    }

    pub fn conv_layer_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::Conv { .. }))
            .count()
    }
}

/// Learned coefficients for one network: one weight set per conv layer,
/// in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    layers: Vec<ConvLayerWeights>,
}

impl NetworkWeights {
    pub fn new(layers: Vec<ConvLayerWeights>) -> Self {
        Self { layers }
    }

    /// Zeroed weights shaped to match `spec`.
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layers = spec
            .layers()
            .iter()
            .filter_map(|l| match *l {
                LayerSpec::Conv {
                    in_maps,
                    out_maps,
                    kernel_w,
                    kernel_h,
                } => Some(ConvLayerWeights::zeros(in_maps, out_maps, kernel_w, kernel_h)),
                LayerSpec::Pool2 => None,
            })
            .collect();
        Self { layers }
    }

    /// Random initialization scaled by 1/sqrt(fan-in) per layer.
    pub fn random<R: Rng>(spec: &NetworkSpec, rng: &mut R) -> Self {
        let mut weights = Self::zeros(spec);
        for layer in &mut weights.layers {
            let fan_in = (layer.in_maps() * layer.kernel_w() * layer.kernel_h()) as f32;
            let scale = 1.0 / fan_in.sqrt();
            for k in layer.kernels_mut() {
                *k = rng.gen_range(-scale..scale);
            }
            for b in layer.biases_mut() {
                *b = rng.gen_range(-0.1..0.1);
            }
        }
        weights
    }

    pub fn layers(&self) -> &[ConvLayerWeights] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> Option<&ConvLayerWeights> {
        self.layers.get(i)
    }

    pub fn layer_mut(&mut self, i: usize) -> Option<&mut ConvLayerWeights> {
        self.layers.get_mut(i)
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Parameter count by enumeration of the stored coefficients.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.kernels().len() + l.biases().len())
            .sum()
    }

    /// Check the weight shapes against a spec.
    pub fn matches(&self, spec: &NetworkSpec) -> Result<()> {
        let conv_specs: Vec<_> = spec
            .layers()
            .iter()
            .filter_map(|l| match *l {
                LayerSpec::Conv {
                    in_maps,
                    out_maps,
                    kernel_w,
                    kernel_h,
                } => Some((in_maps, out_maps, kernel_w, kernel_h)),
                LayerSpec::Pool2 => None,
            })
            .collect();
        if conv_specs.len() != self.layers.len() {
            return Err(Error::Geometry(format!(
                "weights have {} conv layers, spec has {}",
                self.layers.len(),
                conv_specs.len()
            )));
        }
        for (i, ((im, om, kw, kh), lw)) in conv_specs.iter().zip(&self.layers).enumerate() {
            if (lw.in_maps(), lw.out_maps(), lw.kernel_w(), lw.kernel_h()) != (*im, *om, *kw, *kh)
            {
                return Err(Error::Geometry(format!("weight layer {} shape mismatch", i)));
            }
        }
        Ok(())
    }
}

/// The full three-stage cascade: specs and weights for CNN1..CNN3.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    specs: [NetworkSpec; 3],
    weights: [NetworkWeights; 3],
}

impl CascadeModel {
    pub fn new(specs: [NetworkSpec; 3], weights: [NetworkWeights; 3]) -> Result<Self> {
        let model = Self { specs, weights };
        model.validate()?;
        Ok(model)
    }

    /// Stage-1 scanning window: the receptive field of CNN1.
    pub fn window(&self) -> (usize, usize) {
        self.specs[0].receptive_field()
    }

    pub fn spec(&self, stage: usize) -> &NetworkSpec {
        &self.specs[stage]
    }

    pub fn weights(&self, stage: usize) -> &NetworkWeights {
        &self.weights[stage]
    }

    pub fn weights_mut(&mut self, stage: usize) -> &mut NetworkWeights {
        &mut self.weights[stage]
    }

    pub fn validate(&self) -> Result<()> {
        if self.specs[0].output_stride() != 4 {
            return Err(Error::Geometry(format!(
                "stage-1 output stride must be 4, got {}",
                self.specs[0].output_stride()
            )));
        }
        for (i, stage) in [1usize, 2].into_iter().enumerate() {
            let shape = self.specs[stage].output_shape(SELECTIVE_PATCH.0, SELECTIVE_PATCH.1);
            if shape != Some(SELECTIVE_MAP) {
                return Err(Error::Geometry(format!(
                    "CNN{} must map {}x{} to {}x{}, got {:?}",
                    i + 2,
                    SELECTIVE_PATCH.0,
                    SELECTIVE_PATCH.1,
                    SELECTIVE_MAP.0,
                    SELECTIVE_MAP.1,
                    shape
                )));
            }
        }
        for (spec, weights) in self.specs.iter().zip(&self.weights) {
            weights.matches(spec)?;
        }
        let p0 = self.specs[0].pooling();
        if self.specs.iter().any(|s| s.pooling() != p0) {
            return Err(Error::Geometry(
                "all networks in a model must share the pooling mode".into(),
            ));
        }
        Ok(())
    }

    /// Human-readable manifest: per-network parameter counts alongside the
    /// published targets, plus both feature-map tallies.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        out.push_str("network  params  target  maps  window\n");
        let mut hidden_total = 0;
        for (i, spec) in self.specs.iter().enumerate() {
            let rf = spec.receptive_field();
            hidden_total += spec.feature_map_count();
            out.push_str(&format!(
                "CNN{}     {:<7} {:<7} {:<5} {}x{}\n",
                i + 1,
                spec.param_count(),
                PARAM_TARGETS[i],
                spec.feature_map_count(),
                rf.0,
                rf.1
            ));
        }
        out.push_str(&format!(
            "total feature maps (conv outputs): {} / target {}\n",
            hidden_total, FEATURE_MAP_TARGET
        ));
        out.push_str(&format!(
            "total feature maps (incl. input planes): {}\n",
            hidden_total + 3
        ));
        out.push_str(&format!(
            "total parameters: {}\n",
            self.specs.iter().map(|s| s.param_count()).sum::<usize>()
        ));
        out
    }
}

fn conv(in_maps: usize, out_maps: usize, kernel_w: usize, kernel_h: usize) -> LayerSpec {
    LayerSpec::Conv {
        in_maps,
        out_maps,
        kernel_w,
        kernel_h,
    }
}

/// Reference architecture for the stage-1 scanning network:
/// receptive field 27x31, output stride 4, 797 parameters.
pub fn reference_cnn1(pooling: PoolMode) -> NetworkSpec {
    NetworkSpec::new(
        vec![
            conv(1, 4, 8, 6),
            LayerSpec::Pool2,
            conv(4, 4, 9, 4),
            LayerSpec::Pool2,
            conv(4, 1, 1, 5),
        ],
        pooling,
    )
    .expect("reference config is valid")
}

/// Reference architecture for the second stage: 51x55 -> 5x5, 1,819 parameters.
pub fn reference_cnn2(pooling: PoolMode) -> NetworkSpec {
    NetworkSpec::new(
        vec![
            conv(1, 4, 4, 4),
            LayerSpec::Pool2,
            conv(4, 7, 7, 8),
            LayerSpec::Pool2,
            conv(7, 1, 5, 5),
        ],
        pooling,
    )
    .expect("reference config is valid")
}

/// Reference architecture for the third stage: 51x55 -> 5x5, 2,923 parameters.
pub fn reference_cnn3(pooling: PoolMode) -> NetworkSpec {
    NetworkSpec::new(
        vec![
            conv(1, 9, 3, 3),
            LayerSpec::Pool2,
            conv(9, 6, 7, 7),
            LayerSpec::Pool2,
            conv(6, 1, 5, 6),
        ],
        pooling,
    )
    .expect("reference config is valid")
}

pub fn reference_specs(pooling: PoolMode) -> [NetworkSpec; 3] {
    [
        reference_cnn1(pooling),
        reference_cnn2(pooling),
        reference_cnn3(pooling),
    ]
}

/// Reference cascade with randomly initialized weights.
pub fn reference_cascade_random<R: Rng>(pooling: PoolMode, rng: &mut R) -> CascadeModel {
    let specs = reference_specs(pooling);
    let weights = [
        NetworkWeights::random(&specs[0], rng),
        NetworkWeights::random(&specs[1], rng),
        NetworkWeights::random(&specs[2], rng),
    ];
    CascadeModel::new(specs, weights).expect("reference cascade is valid")
}

// ---- serialization ----------------------------------------------------
//
// Little-endian binary layout:
//   magic "CCNC" | u32 version | u8 pooling mode
//   3 x network:
//     u32 layer count
//     per layer: u8 kind (0 conv, 1 pool); conv adds u32 in, out, kw, kh
//     per conv layer, in order: f32 kernels (output-map-major, then input
//     map, then row-major matrix), then f32 biases

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Truncated(format!(
                "need {} bytes at offset {}, file has {}",
                n,
                self.pos,
                self.buf.len()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self) -> Result<f32> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn encode_model(model: &CascadeModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.push(match model.specs[0].pooling() {
        PoolMode::Max => 0,
        PoolMode::Mean => 1,
    });
    for (spec, weights) in model.specs.iter().zip(&model.weights) {
        out.extend_from_slice(&(spec.layers().len() as u32).to_le_bytes());
        for layer in spec.layers() {
            match *layer {
                LayerSpec::Conv {
                    in_maps,
                    out_maps,
                    kernel_w,
                    kernel_h,
                } => {
                    out.push(0);
                    for v in [in_maps, out_maps, kernel_w, kernel_h] {
                        out.extend_from_slice(&(v as u32).to_le_bytes());
                    }
                }
                LayerSpec::Pool2 => out.push(1),
            }
        }
        for lw in weights.layers() {
            for k in lw.kernels() {
                out.extend_from_slice(&k.to_le_bytes());
            }
            for b in lw.biases() {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<CascadeModel> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let magic = cur.take(4)?;
    if magic != MODEL_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", magic)));
    }
    let version = cur.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {} (expected {})",
            version, MODEL_VERSION
        )));
    }
    let pooling = match cur.u8()? {
        0 => PoolMode::Max,
        1 => PoolMode::Mean,
        m => return Err(Error::Format(format!("unknown pooling mode {}", m))),
    };

    let mut specs = Vec::with_capacity(3);
    let mut weights = Vec::with_capacity(3);
    for net in 0..3 {
        let layer_count = cur.u32()? as usize;
        if layer_count == 0 || layer_count > 64 {
            return Err(Error::Format(format!(
                "network {} declares {} layers",
                net, layer_count
            )));
        }
        let mut layers = Vec::with_capacity(layer_count);
        for _ in 0..layer_count {
            match cur.u8()? {
                0 => {
                    let in_maps = cur.u32()? as usize;
                    let out_maps = cur.u32()? as usize;
                    let kernel_w = cur.u32()? as usize;
                    let kernel_h = cur.u32()? as usize;
                    layers.push(conv(in_maps, out_maps, kernel_w, kernel_h));
                }
                1 => layers.push(LayerSpec::Pool2),
                k => return Err(Error::Format(format!("unknown layer kind {}", k))),
            }
        }
        let spec = NetworkSpec::new(layers, pooling)?;
        let mut net_weights = Vec::new();
        for layer in spec.layers() {
            if let LayerSpec::Conv {
                in_maps,
                out_maps,
                kernel_w,
                kernel_h,
            } = *layer
            {
                let nk = out_maps * in_maps * kernel_w * kernel_h;
                let mut kernels = Vec::with_capacity(nk);
                for _ in 0..nk {
                    kernels.push(cur.f32()?);
                }
                let mut biases = Vec::with_capacity(out_maps);
                for _ in 0..out_maps {
                    biases.push(cur.f32()?);
                }
                net_weights.push(ConvLayerWeights::from_parts(
                    in_maps, out_maps, kernel_w, kernel_h, kernels, biases,
                )?);
            }
        }
        specs.push(spec);
        weights.push(NetworkWeights::new(net_weights));
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            bytes.len() - cur.pos
        )));
    }

    let specs: [NetworkSpec; 3] = specs.try_into().expect("three networks parsed");
    let weights: [NetworkWeights; 3] = weights.try_into().expect("three networks parsed");
    CascadeModel::new(specs, weights)
}

pub fn save_model<P: AsRef<Path>>(model: &CascadeModel, path: P) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&encode_model(model))?;
    f.flush()?;
    Ok(())
}

pub fn load_model<P: AsRef<Path>>(path: P) -> Result<CascadeModel> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    decode_model(&buf)
}
