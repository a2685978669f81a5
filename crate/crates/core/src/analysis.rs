//! Exact MAdds and parameter counts, and latency-model features.
//!
//! One multiply-accumulate counts as one MAdd. Only convolution (and
//! squeeze-and-excitation FC) kernels are counted: biases, batch norm,
//! activations, residual adds and the SE gating multiply are free.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arch::{derive_shapes, round8, LayerKind, LayerSpec, NetworkSpec, STEM_KERNEL};
use crate::error::{NasError, Result};
use crate::space::SpaceSpec;

/// Squeeze ratio of the SE bottleneck, relative to the layer output width.
pub const SE_RATIO: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpClass {
    RegularConv,
    DepthwiseConv,
    PointwiseConv,
    SeBlock,
}

/// A primitive operation inside a layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvOp {
    pub class: OpClass,
    pub madds: u64,
    pub params: u64,
}

impl ConvOp {
    /// KxK regular convolution producing an `h_out` x `w_out` map.
    pub fn regular(kernel: usize, c_in: usize, c_out: usize, h_out: usize, w_out: usize) -> Self {
        let params = (kernel * kernel * c_in * c_out) as u64;
        ConvOp {
            class: if kernel == 1 {
                OpClass::PointwiseConv
            } else {
                OpClass::RegularConv
            },
            madds: (h_out * w_out) as u64 * params,
            params,
        }
    }

    pub fn pointwise(c_in: usize, c_out: usize, h: usize, w: usize) -> Self {
        ConvOp::regular(1, c_in, c_out, h, w)
    }

    pub fn depthwise(kernel: usize, channels: usize, h_out: usize, w_out: usize) -> Self {
        let params = (kernel * kernel * channels) as u64;
        ConvOp {
            class: OpClass::DepthwiseConv,
            madds: (h_out * w_out) as u64 * params,
            params,
        }
    }

    /// Squeeze-and-excitation on `channels`: two FC layers through
    /// `round8(SE_RATIO * channels)`.
    pub fn se(channels: usize) -> Self {
        let n = (2 * channels * round8(SE_RATIO * channels as f64)) as u64;
        ConvOp {
            class: OpClass::SeBlock,
            madds: n,
            params: n,
        }
    }
}

fn out_dim(x: usize, stride: usize) -> usize {
    x.div_ceil(stride)
}

/// The 1x1 / KxK / 1x1 sequence of a Tucker layer with explicit internal
/// widths. Does not require the widths to be compressions of the endpoints.
#[allow(clippy::too_many_arguments)]
pub fn tucker_ops(
    kernel: usize,
    c_in: usize,
    c_out: usize,
    r_in: usize,
    r_out: usize,
    h: usize,
    w: usize,
    stride: usize,
) -> [ConvOp; 3] {
    let (ho, wo) = (out_dim(h, stride), out_dim(w, stride));
    [
        ConvOp::pointwise(c_in, r_in, h, w),
        ConvOp::regular(kernel, r_in, r_out, ho, wo),
        ConvOp::pointwise(r_out, c_out, ho, wo),
    ]
}

/// Primitive operations of `layer` applied to an `h` x `w` input.
pub fn layer_ops(layer: &LayerSpec, h: usize, w: usize) -> Result<Vec<ConvOp>> {
    layer.check().map_err(NasError::InvalidLayer)?;
    if h == 0 || w == 0 {
        return Err(NasError::InvalidLayer("spatial dims must be >= 1".into()));
    }
    let (ho, wo) = (out_dim(h, layer.stride), out_dim(w, layer.stride));
    let k = layer.kind.kernel();
    let mut ops = match (layer.kind, layer.internal_widths()) {
        (LayerKind::Ibn { .. }, (mid, _)) => vec![
            ConvOp::pointwise(layer.c_in, mid, h, w),
            ConvOp::depthwise(k, mid, ho, wo),
            ConvOp::pointwise(mid, layer.c_out, ho, wo),
        ],
        (LayerKind::Fused { .. }, (mid, _)) => vec![
            ConvOp::regular(k, layer.c_in, mid, ho, wo),
            ConvOp::pointwise(mid, layer.c_out, ho, wo),
        ],
        (LayerKind::Tucker { .. }, (r_in, Some(r_out))) => {
            tucker_ops(k, layer.c_in, layer.c_out, r_in, r_out, h, w, layer.stride).to_vec()
        }
        (LayerKind::Tucker { .. }, (_, None)) => unreachable!("tucker has two internal widths"),
    };
    if layer.use_se {
        ops.push(ConvOp::se(layer.c_out));
    }
    Ok(ops)
}

pub fn layer_madds(layer: &LayerSpec, h: usize, w: usize) -> Result<u64> {
    Ok(layer_ops(layer, h, w)?.iter().map(|o| o.madds).sum())
}

pub fn layer_params(layer: &LayerSpec) -> Result<u64> {
    Ok(layer_ops(layer, 1, 1)?.iter().map(|o| o.params).sum())
}

/// The stem convolution of `net` as a primitive op.
pub fn stem_op(net: &NetworkSpec, h_out: usize, w_out: usize) -> ConvOp {
    ConvOp::regular(
        STEM_KERNEL,
        crate::arch::STEM_INPUT_CHANNELS,
        net.stem_channels,
        h_out,
        w_out,
    )
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCost {
    pub madds: u64,
    pub params: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub stem: LayerCost,
    pub layers: Vec<LayerCost>,
    pub total_madds: u64,
    pub total_params: u64,
}

pub fn network_cost(net: &NetworkSpec) -> Result<CostBreakdown> {
    let trace = derive_shapes(net)?;
    let stem = stem_op(net, trace.stem.out_height, trace.stem.out_width);
    let stem = LayerCost {
        madds: stem.madds,
        params: stem.params,
    };
    let layers = net
        .layers()
        .zip(&trace.layers)
        .map(|((_, _, layer), shape)| {
            let ops = layer_ops(layer, shape.height, shape.width)?;
            Ok(LayerCost {
                madds: ops.iter().map(|o| o.madds).sum(),
                params: ops.iter().map(|o| o.params).sum(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total_madds = stem.madds + layers.iter().map(|c| c.madds).sum::<u64>();
    let total_params = stem.params + layers.iter().map(|c| c.params).sum::<u64>();
    Ok(CostBreakdown {
        stem,
        layers,
        total_madds,
        total_params,
    })
}

/// Options for [`extract_features`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// Collapse channel counts into power-of-two bands. Shrinks the feature
    /// space for large layouts at the cost of exact realizability.
    #[serde(default)]
    pub channel_bands: bool,
}

/// One feature column of the latency model.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bucket {
    Stem,
    Layer {
        kind: LayerKind,
        c_in: usize,
        c_out: usize,
        stride: usize,
        /// Input feature map height.
        resolution: usize,
        se: bool,
    },
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bucket::Stem => f.write_str("stem"),
            Bucket::Layer {
                kind,
                c_in,
                c_out,
                stride,
                resolution,
                se,
            } => {
                write!(
                    f,
                    "{}|{c_in}->{c_out}|s{stride}|{resolution}px",
                    kind.key()
                )?;
                if *se {
                    f.write_str("|se")?;
                }
                Ok(())
            }
        }
    }
}

fn band(c: usize) -> usize {
    c.next_power_of_two()
}

/// Sparse per-bucket layer counts keyed by the bucket's display string.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub BTreeMap<String, u32>);

impl FeatureVector {
    pub fn total(&self) -> u64 {
        self.0.values().map(|&c| c as u64).sum()
    }

    pub fn get(&self, bucket: &str) -> u32 {
        self.0.get(bucket).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Buckets whose counts differ between the two vectors.
    pub fn differing_buckets(&self, other: &FeatureVector) -> Vec<String> {
        let mut keys: Vec<&String> = self.0.keys().chain(other.0.keys()).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .filter(|k| self.get(k) != other.get(k))
            .cloned()
            .collect()
    }
}

/// One count per layer at its (kind, c_in, c_out, stride, resolution, se)
/// bucket, plus one for the stem. Fails on layers whose kind the space does
/// not offer.
pub fn extract_features(
    net: &NetworkSpec,
    space: &SpaceSpec,
    opts: FeatureOptions,
) -> Result<FeatureVector> {
    if let Some((_, _, layer)) = net.layers().find(|(_, _, l)| !space.contains_kind(&l.kind)) {
        return Err(NasError::UnknownAtom(layer.kind.key()));
    }
    bucket_counts(net, opts)
}

/// Bucket counts without checking layer kinds against a space.
pub fn bucket_counts(net: &NetworkSpec, opts: FeatureOptions) -> Result<FeatureVector> {
    let trace = derive_shapes(net)?;
    let mut counts = BTreeMap::new();
    *counts.entry(Bucket::Stem.to_string()).or_insert(0) += 1;
    for ((_, _, layer), shape) in net.layers().zip(&trace.layers) {
        let (c_in, c_out) = if opts.channel_bands {
            (band(layer.c_in), band(layer.c_out))
        } else {
            (layer.c_in, layer.c_out)
        };
        let bucket = Bucket::Layer {
            kind: layer.kind,
            c_in,
            c_out,
            stride: layer.stride,
            resolution: shape.height,
            se: layer.use_se,
        };
        *counts.entry(bucket.to_string()).or_insert(0) += 1;
    }
    Ok(FeatureVector(counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::Ratio;

    /// Counts multiply-adds of a (grouped) convolution by walking every output
    /// position, output channel, kernel tap and input channel.
    fn brute_conv(k: usize, c_in: usize, c_out: usize, groups: usize, ho: usize, wo: usize) -> u64 {
        let per_group_in = c_in / groups;
        let mut n = 0u64;
        for _y in 0..ho {
            for _x in 0..wo {
                for _co in 0..c_out {
                    for _ky in 0..k {
                        for _kx in 0..k {
                            for _ci in 0..per_group_in {
                                n += 1;
                            }
                        }
                    }
                }
            }
        }
        n
    }

    fn ibn(k: usize, s: f64) -> LayerKind {
        LayerKind::Ibn {
            kernel: k,
            expansion: Ratio(s),
        }
    }

    fn fused(k: usize, s: f64) -> LayerKind {
        LayerKind::Fused {
            kernel: k,
            expansion: Ratio(s),
        }
    }

    fn tucker(k: usize, s: f64, e: f64) -> LayerKind {
        LayerKind::Tucker {
            kernel: k,
            input_compression: Ratio(s),
            output_compression: Ratio(e),
        }
    }

    #[test]
    fn ibn_madds_against_loops() {
        let layer = LayerSpec::new(ibn(3, 4.0), 16, 16, 1);
        let expected = brute_conv(1, 16, 64, 1, 14, 14)
            + brute_conv(3, 64, 64, 64, 14, 14)
            + brute_conv(1, 64, 16, 1, 14, 14);
        assert_eq!(expected, 514_304);
        assert_eq!(layer_madds(&layer, 14, 14).unwrap(), 514_304);
        assert_eq!(layer_params(&layer).unwrap(), 2_624);
    }

    #[test]
    fn fused_madds_against_loops() {
        let layer = LayerSpec::new(fused(3, 4.0), 16, 16, 1);
        let expected = brute_conv(3, 16, 64, 1, 14, 14) + brute_conv(1, 64, 16, 1, 14, 14);
        assert_eq!(expected, 2_007_040);
        assert_eq!(layer_madds(&layer, 14, 14).unwrap(), 2_007_040);
        assert_eq!(layer_params(&layer).unwrap(), 10_240);
    }

    #[test]
    fn tucker_madds_against_loops() {
        let layer = LayerSpec::new(tucker(3, 0.25, 0.75), 32, 32, 1);
        assert_eq!(layer.internal_widths(), (8, Some(24)));
        let expected = brute_conv(1, 32, 8, 1, 14, 14)
            + brute_conv(3, 8, 24, 1, 14, 14)
            + brute_conv(1, 24, 32, 1, 14, 14);
        assert_eq!(expected, 539_392);
        assert_eq!(layer_madds(&layer, 14, 14).unwrap(), 539_392);
        assert_eq!(layer_params(&layer).unwrap(), 256 + 1_728 + 768);
    }

    #[test]
    fn strided_ibn_expands_at_input_resolution() {
        let layer = LayerSpec::new(ibn(5, 8.0), 16, 24, 2);
        let expected = brute_conv(1, 16, 128, 1, 15, 15)
            + brute_conv(5, 128, 128, 128, 8, 8)
            + brute_conv(1, 128, 24, 1, 8, 8);
        assert_eq!(layer_madds(&layer, 15, 15).unwrap(), expected);
    }

    #[test]
    fn se_cost() {
        let layer = LayerSpec::new(ibn(3, 4.0), 16, 16, 1).with_se(true, crate::arch::Activation::Hswish);
        let plain = LayerSpec::new(ibn(3, 4.0), 16, 16, 1);
        // 2 * 16 * round8(4) = 256
        assert_eq!(
            layer_madds(&layer, 14, 14).unwrap() - layer_madds(&plain, 14, 14).unwrap(),
            256
        );
        assert_eq!(layer_params(&layer).unwrap() - layer_params(&plain).unwrap(), 256);
    }

    #[test]
    fn tucker_full_width_degenerates_cleanly() {
        let ops = tucker_ops(3, 32, 32, 32, 32, 14, 14, 1);
        let total: u64 = ops.iter().map(|o| o.madds).sum();
        assert_eq!(total, 196 * (32 * 32 + 9 * 32 * 32 + 32 * 32));
    }

    #[test]
    fn invalid_layer_is_an_error() {
        let layer = LayerSpec::new(ibn(4, 4.0), 16, 16, 1);
        assert!(layer_madds(&layer, 14, 14).is_err());
        let layer = LayerSpec::new(tucker(3, 1.0, 0.5), 16, 16, 1);
        assert!(layer_params(&layer).is_err());
    }
}
