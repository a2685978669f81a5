//! Architecture intermediate representation.
//!
//! A [`NetworkSpec`] is a fixed stem convolution followed by a list of
//! [`BlockSpec`]s. Every block scales a base channel count by a multiplier and
//! holds one or more [`LayerSpec`]s, each an inverted bottleneck (IBN), a fused
//! inverted bottleneck or a Tucker (compression) layer.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{NasError, Result};

/// Kernel size of the stem convolution.
pub const STEM_KERNEL: usize = 3;
/// Stride of the stem convolution.
pub const STEM_STRIDE: usize = 2;
/// Image channels consumed by the stem.
pub const STEM_INPUT_CHANNELS: usize = 3;
/// Smallest channel count produced by [`round8`].
pub const MIN_WIDTH: usize = 8;

/// Round to the nearest multiple of 8 (halves round up), never below 8.
pub fn round8(x: f64) -> usize {
    let r = (x / 8.0).round() * 8.0;
    if r.is_finite() && r >= MIN_WIDTH as f64 {
        r as usize
    } else {
        MIN_WIDTH
    }
}

/// A real-valued ratio (expansion, compression, channel multiplier) with total
/// ordering and bitwise equality, so it can key maps and be compared exactly.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ratio(pub f64);

impl Ratio {
    pub fn get(self) -> f64 {
        self.0
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for Ratio {}

impl Hash for Ratio {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<f64> for Ratio {
    fn from(x: f64) -> Self {
        Ratio(x)
    }
}

/// The searchable structure of a layer.
///
/// Variant order (IBN < Fused < Tucker) is the canonical atom order used by
/// search spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerKind {
    /// 1x1 expand, KxK depthwise, 1x1 project.
    Ibn { kernel: usize, expansion: Ratio },
    /// KxK regular conv expanding channels, 1x1 project.
    Fused { kernel: usize, expansion: Ratio },
    /// 1x1 compress, KxK regular conv, 1x1 restore.
    Tucker {
        kernel: usize,
        input_compression: Ratio,
        output_compression: Ratio,
    },
}

impl LayerKind {
    pub fn kernel(&self) -> usize {
        match *self {
            LayerKind::Ibn { kernel, .. }
            | LayerKind::Fused { kernel, .. }
            | LayerKind::Tucker { kernel, .. } => kernel,
        }
    }

    pub fn is_ibn(&self) -> bool {
        matches!(self, LayerKind::Ibn { .. })
    }

    /// True for layers built around a KxK regular (non-depthwise) convolution.
    pub fn uses_regular_conv(&self) -> bool {
        !self.is_ibn()
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            LayerKind::Ibn { .. } => "IBN",
            LayerKind::Fused { .. } => "Fused",
            LayerKind::Tucker { .. } => "Tucker",
        }
    }

    /// Check the per-kind ratio and kernel constraints.
    pub fn check(&self) -> std::result::Result<(), String> {
        let k = self.kernel();
        if k == 0 || k.is_multiple_of(2) {
            return Err(format!("kernel must be odd (got {k})"));
        }
        match *self {
            LayerKind::Ibn { expansion, .. } | LayerKind::Fused { expansion, .. } => {
                if !(expansion.0.is_finite() && expansion.0 > 1.0) {
                    return Err(format!("expansion must be > 1 (got {expansion})"));
                }
            }
            LayerKind::Tucker {
                input_compression,
                output_compression,
                ..
            } => {
                for (name, r) in [("input", input_compression), ("output", output_compression)] {
                    if !(r.0.is_finite() && r.0 > 0.0 && r.0 < 1.0) {
                        return Err(format!("{name} compression must be in (0, 1) (got {r})"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Short identifier such as `ibn_k3_s4` or `tucker_k3_s0.25_e0.75`.
    pub fn key(&self) -> String {
        match *self {
            LayerKind::Ibn { kernel, expansion } => format!("ibn_k{kernel}_s{expansion}"),
            LayerKind::Fused { kernel, expansion } => format!("fused_k{kernel}_s{expansion}"),
            LayerKind::Tucker {
                kernel,
                input_compression,
                output_compression,
            } => format!("tucker_k{kernel}_s{input_compression}_e{output_compression}"),
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerKind::Ibn { kernel, expansion } => {
                write!(f, "IBN {kernel}x{kernel}, {expansion}")
            }
            LayerKind::Fused { kernel, expansion } => {
                write!(f, "Fused {kernel}x{kernel}, {expansion}")
            }
            LayerKind::Tucker {
                kernel,
                input_compression,
                output_compression,
            } => write!(
                f,
                "Tucker {kernel}x{kernel}, {input_compression}-{output_compression}"
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu6,
    Hswish,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub c_in: usize,
    pub c_out: usize,
    pub stride: usize,
    pub use_se: bool,
    pub activation: Activation,
    pub residual: bool,
}

impl LayerSpec {
    /// Builds a layer with the residual flag derived from stride and widths.
    pub fn new(kind: LayerKind, c_in: usize, c_out: usize, stride: usize) -> Self {
        LayerSpec {
            kind,
            c_in,
            c_out,
            stride,
            use_se: false,
            activation: Activation::Relu6,
            residual: stride == 1 && c_in == c_out,
        }
    }

    pub fn with_se(mut self, use_se: bool, activation: Activation) -> Self {
        self.use_se = use_se;
        self.activation = activation;
        self
    }

    /// Internal widths after rounding: the expanded width for IBN / Fused,
    /// `(s*C1, e*C2)` for Tucker.
    pub fn internal_widths(&self) -> (usize, Option<usize>) {
        match self.kind {
            LayerKind::Ibn { expansion, .. } | LayerKind::Fused { expansion, .. } => {
                (round8(expansion.0 * self.c_in as f64), None)
            }
            LayerKind::Tucker {
                input_compression,
                output_compression,
                ..
            } => (
                round8(input_compression.0 * self.c_in as f64),
                Some(round8(output_compression.0 * self.c_out as f64)),
            ),
        }
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        self.kind.check()?;
        if self.c_in == 0 || self.c_out == 0 {
            return Err("channel counts must be >= 1".into());
        }
        if self.stride != 1 && self.stride != 2 {
            return Err(format!("stride must be 1 or 2 (got {})", self.stride));
        }
        if self.residual && (self.stride != 1 || self.c_in != self.c_out) {
            return Err(format!(
                "residual requires stride 1 and c_in == c_out (got stride {}, {} -> {})",
                self.stride, self.c_in, self.c_out
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpec {
    pub base_channels: usize,
    pub multiplier: Ratio,
    pub first_stride: usize,
    pub layers: Vec<LayerSpec>,
}

impl BlockSpec {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Output width every layer of the block must produce.
    pub fn width(&self) -> usize {
        round8(self.multiplier.0 * self.base_channels as f64)
    }
}

/// Block indices of the C4 (output stride 16) and C5 (output stride 32) taps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoints {
    pub c4: Option<usize>,
    pub c5: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub input_resolution: usize,
    pub stem_channels: usize,
    pub blocks: Vec<BlockSpec>,
    pub endpoints: Endpoints,
}

impl NetworkSpec {
    pub fn layers(&self) -> impl Iterator<Item = (usize, usize, &LayerSpec)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(b, blk)| blk.layers.iter().enumerate().map(move |(l, x)| (b, l, x)))
    }

    pub fn num_layers(&self) -> usize {
        self.blocks.iter().map(|b| b.layers.len()).sum()
    }
}

/// Stride-only description of a network: what search spaces are built over.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    pub input_resolution: usize,
    pub stem_channels: usize,
    pub blocks: Vec<BlockLayout>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockLayout {
    pub base_channels: usize,
    pub num_layers: usize,
    pub first_stride: usize,
}

impl Layout {
    /// Stem (32 channels, stride 2) plus eight searchable blocks with base
    /// widths 16-32-48-96-96-160-192-192 at 320x320.
    pub fn default_layout() -> Self {
        let bases = [16, 32, 48, 96, 96, 160, 192, 192];
        let depths = [1, 2, 3, 3, 2, 3, 1, 1];
        let strides = [1, 2, 2, 2, 1, 2, 1, 1];
        Layout {
            input_resolution: 320,
            stem_channels: 32,
            blocks: (0..bases.len())
                .map(|i| BlockLayout {
                    base_channels: bases[i],
                    num_layers: depths[i],
                    first_stride: strides[i],
                })
                .collect(),
        }
    }

    /// One block of two layers at 64x64 input.
    pub fn toy2() -> Self {
        Layout {
            input_resolution: 64,
            stem_channels: 16,
            blocks: vec![BlockLayout {
                base_channels: 16,
                num_layers: 2,
                first_stride: 2,
            }],
        }
    }

    /// Two single-layer blocks at 64x64 input.
    pub fn toy2block() -> Self {
        Layout {
            input_resolution: 64,
            stem_channels: 16,
            blocks: vec![
                BlockLayout {
                    base_channels: 16,
                    num_layers: 1,
                    first_stride: 2,
                },
                BlockLayout {
                    base_channels: 32,
                    num_layers: 1,
                    first_stride: 2,
                },
            ],
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::default_layout()),
            "toy2" => Some(Self::toy2()),
            "toy2block" => Some(Self::toy2block()),
            _ => None,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.blocks.iter().map(|b| b.num_layers).sum()
    }

    /// Endpoints implied by the stride schedule.
    pub fn endpoints(&self) -> Endpoints {
        endpoints_for(self.blocks.iter().map(|b| b.first_stride))
    }

    pub fn check(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.input_resolution == 0 {
            problems.push("input_resolution must be >= 1".to_string());
        }
        if self.stem_channels == 0 {
            problems.push("stem_channels must be >= 1".to_string());
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.base_channels == 0 {
                problems.push(format!("block {i}: base_channels must be >= 1"));
            }
            if b.num_layers == 0 {
                problems.push(format!("block {i}: num_layers must be >= 1"));
            }
            if b.first_stride != 1 && b.first_stride != 2 {
                problems.push(format!("block {i}: first_stride must be 1 or 2"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(NasError::Config(problems.join("; ")))
        }
    }

    pub fn from_json(doc: &str) -> Result<Self> {
        let layout: Layout = serde_json::from_str(doc).map_err(NasError::from_json)?;
        layout.check()?;
        Ok(layout)
    }
}

fn endpoints_for(first_strides: impl Iterator<Item = usize>) -> Endpoints {
    let mut total = STEM_STRIDE;
    let mut ep = Endpoints::default();
    for (i, s) in first_strides.enumerate() {
        total *= s;
        match total {
            16 => ep.c4 = Some(i),
            32 => ep.c5 = Some(i),
            _ => {}
        }
    }
    ep
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Network,
    Block(usize),
    Layer { block: usize, layer: usize },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Network => write!(f, "network"),
            Location::Block(b) => write!(f, "block {b}"),
            Location::Layer { block, layer } => write!(f, "block {block} layer {layer}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// Every invariant violation in `net`, in traversal order. Empty means valid.
pub fn validate(net: &NetworkSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |location, message: String| out.push(Violation { location, message });

    if net.input_resolution == 0 {
        push(Location::Network, "input_resolution must be >= 1".into());
    }
    if net.stem_channels == 0 {
        push(Location::Network, "stem_channels must be >= 1".into());
    }

    let mut prev_out = net.stem_channels;
    for (b, block) in net.blocks.iter().enumerate() {
        if block.layers.is_empty() {
            push(Location::Block(b), "block has no layers".into());
        }
        if !(block.multiplier.0.is_finite() && block.multiplier.0 > 0.0) {
            push(Location::Block(b), format!("multiplier must be > 0 (got {})", block.multiplier));
        }
        if block.first_stride != 1 && block.first_stride != 2 {
            push(Location::Block(b), format!("first_stride must be 1 or 2 (got {})", block.first_stride));
        }
        let width = block.width();
        for (l, layer) in block.layers.iter().enumerate() {
            let loc = Location::Layer { block: b, layer: l };
            if let Err(msg) = layer.check() {
                push(loc, msg);
            }
            if layer.c_out % 8 != 0 {
                push(loc, format!("c_out {} is not a multiple of 8", layer.c_out));
            }
            if layer.c_out != width {
                push(
                    loc,
                    format!(
                        "c_out {} does not match block width round8({} x {}) = {}",
                        layer.c_out, block.multiplier, block.base_channels, width
                    ),
                );
            }
            if layer.c_in != prev_out {
                push(
                    loc,
                    format!("c_in {} does not match previous output {}", layer.c_in, prev_out),
                );
            }
            let expected_stride = if l == 0 { block.first_stride } else { 1 };
            if layer.stride != expected_stride {
                push(
                    loc,
                    format!("stride {} but block expects {}", layer.stride, expected_stride),
                );
            }
            prev_out = layer.c_out;
        }
    }

    let expected = endpoints_for(net.blocks.iter().map(|b| b.first_stride));
    if net.endpoints != expected {
        push(
            Location::Network,
            format!(
                "endpoints {:?} do not match stride schedule {:?}",
                net.endpoints, expected
            ),
        );
    }
    out
}

/// Spatial and channel dimensions around one convolution layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub height: usize,
    pub width: usize,
    pub out_height: usize,
    pub out_width: usize,
    pub c_in: usize,
    pub c_out: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeTrace {
    pub stem: LayerShape,
    /// One entry per searchable layer, in execution order.
    pub layers: Vec<LayerShape>,
}

fn strided(x: usize, stride: usize) -> usize {
    x.div_ceil(stride)
}

pub fn derive_shapes(net: &NetworkSpec) -> Result<ShapeTrace> {
    let violations = validate(net);
    if !violations.is_empty() {
        return Err(NasError::Invalid(violations));
    }
    let r = net.input_resolution;
    let s = strided(r, STEM_STRIDE);
    let stem = LayerShape {
        height: r,
        width: r,
        out_height: s,
        out_width: s,
        c_in: STEM_INPUT_CHANNELS,
        c_out: net.stem_channels,
    };
    let (mut h, mut w) = (s, s);
    let layers = net
        .layers()
        .map(|(_, _, layer)| {
            let shape = LayerShape {
                height: h,
                width: w,
                out_height: strided(h, layer.stride),
                out_width: strided(w, layer.stride),
                c_in: layer.c_in,
                c_out: layer.c_out,
            };
            h = shape.out_height;
            w = shape.out_width;
            shape
        })
        .collect();
    Ok(ShapeTrace { stem, layers })
}

// ---------------------------------------------------------------------------
// Canonical document

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
    input_resolution: usize,
    stem_channels: usize,
    blocks: Vec<BlockDoc>,
    endpoints: Endpoints,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockDoc {
    base_channels: usize,
    multiplier: f64,
    first_stride: usize,
    layers: Vec<LayerDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    kind: KindTag,
    kernel: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expansion: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    compressions: Option<[f64; 2]>,
    c_in: usize,
    c_out: usize,
    stride: usize,
    se: bool,
    activation: Activation,
    residual: bool,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum KindTag {
    Ibn,
    Fused,
    Tucker,
}

impl From<&LayerSpec> for LayerDoc {
    fn from(l: &LayerSpec) -> Self {
        let (kind, expansion, compressions) = match l.kind {
            LayerKind::Ibn { expansion, .. } => (KindTag::Ibn, Some(expansion.0), None),
            LayerKind::Fused { expansion, .. } => (KindTag::Fused, Some(expansion.0), None),
            LayerKind::Tucker {
                input_compression,
                output_compression,
                ..
            } => (
                KindTag::Tucker,
                None,
                Some([input_compression.0, output_compression.0]),
            ),
        };
        LayerDoc {
            kind,
            kernel: l.kind.kernel(),
            expansion,
            compressions,
            c_in: l.c_in,
            c_out: l.c_out,
            stride: l.stride,
            se: l.use_se,
            activation: l.activation,
            residual: l.residual,
        }
    }
}

impl LayerDoc {
    fn into_spec(self, location: Location) -> Result<LayerSpec> {
        let bad = |message: String| NasError::Invalid(vec![Violation { location, message }]);
        let kind = match (self.kind, self.expansion, self.compressions) {
            (KindTag::Ibn, Some(s), None) => LayerKind::Ibn {
                kernel: self.kernel,
                expansion: Ratio(s),
            },
            (KindTag::Fused, Some(s), None) => LayerKind::Fused {
                kernel: self.kernel,
                expansion: Ratio(s),
            },
            (KindTag::Tucker, None, Some([s, e])) => LayerKind::Tucker {
                kernel: self.kernel,
                input_compression: Ratio(s),
                output_compression: Ratio(e),
            },
            (KindTag::Tucker, _, _) => {
                return Err(bad("tucker layers take `compressions` and no `expansion`".into()))
            }
            _ => return Err(bad("ibn/fused layers take `expansion` and no `compressions`".into())),
        };
        Ok(LayerSpec {
            kind,
            c_in: self.c_in,
            c_out: self.c_out,
            stride: self.stride,
            use_se: self.se,
            activation: self.activation,
            residual: self.residual,
        })
    }
}

fn to_doc(net: &NetworkSpec, meta: Option<serde_json::Value>) -> NetworkDoc {
    NetworkDoc {
        meta,
        input_resolution: net.input_resolution,
        stem_channels: net.stem_channels,
        blocks: net
            .blocks
            .iter()
            .map(|b| BlockDoc {
                base_channels: b.base_channels,
                multiplier: b.multiplier.0,
                first_stride: b.first_stride,
                layers: b.layers.iter().map(LayerDoc::from).collect(),
            })
            .collect(),
        endpoints: net.endpoints,
    }
}

/// Canonical JSON document for `net`.
pub fn serialize(net: &NetworkSpec) -> String {
    serialize_with_meta(net, None)
}

/// Like [`serialize`], with a free-form `meta` object (tool version,
/// invocation) embedded at the top. `meta` is ignored when reading back.
pub fn serialize_with_meta(net: &NetworkSpec, meta: Option<serde_json::Value>) -> String {
    serde_json::to_string_pretty(&to_doc(net, meta)).expect("document serializes")
}

/// Parses and validates an architecture document.
pub fn deserialize(doc: &str) -> Result<NetworkSpec> {
    let doc: NetworkDoc = serde_json::from_str(doc).map_err(NasError::from_json)?;
    let mut blocks = Vec::with_capacity(doc.blocks.len());
    for (b, bd) in doc.blocks.into_iter().enumerate() {
        let layers = bd
            .layers
            .into_iter()
            .enumerate()
            .map(|(l, ld)| ld.into_spec(Location::Layer { block: b, layer: l }))
            .collect::<Result<Vec<_>>>()?;
        blocks.push(BlockSpec {
            base_channels: bd.base_channels,
            multiplier: Ratio(bd.multiplier),
            first_stride: bd.first_stride,
            layers,
        });
    }
    let net = NetworkSpec {
        input_resolution: doc.input_resolution,
        stem_channels: doc.stem_channels,
        blocks,
        endpoints: doc.endpoints,
    };
    let violations = validate(&net);
    if violations.is_empty() {
        Ok(net)
    } else {
        Err(NasError::Invalid(violations))
    }
}

/// Graphviz DOT rendering: stem, one node per layer in execution order, and a
/// head marker. Layers closing the C4 / C5 blocks are annotated.
pub fn export_dot(net: &NetworkSpec) -> String {
    use std::fmt::Write;

    let mut out = String::new();
    out.push_str("digraph network {\n  rankdir=TB;\n  node [shape=box, fontname=\"Helvetica\"];\n");
    let _ = writeln!(
        out,
        "  stem [label=\"Stem Conv {k}x{k}\\n{ci}->{co} s{s}\"];",
        k = STEM_KERNEL,
        ci = STEM_INPUT_CHANNELS,
        co = net.stem_channels,
        s = STEM_STRIDE
    );
    let mut prev = "stem".to_string();
    let mut edges = Vec::new();
    let mut idx = 0;
    for (b, block) in net.blocks.iter().enumerate() {
        for (l, layer) in block.layers.iter().enumerate() {
            let name = format!("l{idx}");
            let mut label = format!(
                "{}\\n{}->{} s{}",
                layer.kind, layer.c_in, layer.c_out, layer.stride
            );
            if layer.use_se {
                label.push_str(" +SE");
            }
            let last = l + 1 == block.layers.len();
            let mut style = "";
            if last && net.endpoints.c4 == Some(b) {
                label.push_str("\\nC4");
                style = ", style=bold";
            }
            if last && net.endpoints.c5 == Some(b) {
                label.push_str("\\nC5");
                style = ", style=bold";
            }
            let fill = match layer.kind {
                LayerKind::Ibn { .. } => "#cfe2f3",
                LayerKind::Fused { .. } => "#f4cccc",
                LayerKind::Tucker { .. } => "#d9ead3",
            };
            let _ = writeln!(
                out,
                "  {name} [label=\"{label}\", fillcolor=\"{fill}\", style=filled{style}];"
            );
            edges.push((prev, name.clone()));
            prev = name;
            idx += 1;
        }
    }
    out.push_str("  head [label=\"Head\", shape=ellipse];\n");
    edges.push((prev, "head".to_string()));
    for (a, b) in edges {
        let _ = writeln!(out, "  {a} -> {b};");
    }
    out.push_str("}\n");
    out
}
