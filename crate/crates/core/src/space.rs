//! Search spaces as ordered categorical decisions.
//!
//! Every layer gets a kind decision (which IBN / Fused / Tucker
//! configuration), every block gets a channel multiplier decision. Decisions
//! are ordered block by block: the layer kind decisions of the block, then
//! its multiplier.

use std::fmt;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arch::{Activation, BlockSpec, LayerKind, LayerSpec, Layout, NetworkSpec, Ratio};
use crate::error::{NasError, Result};

pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceVariant {
    IbnOnly,
    IbnFused,
    IbnFusedTucker,
}

impl SpaceVariant {
    pub const ALL: [SpaceVariant; 3] = [
        SpaceVariant::IbnOnly,
        SpaceVariant::IbnFused,
        SpaceVariant::IbnFusedTucker,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpaceVariant::IbnOnly => "ibn",
            SpaceVariant::IbnFused => "ibn_fused",
            SpaceVariant::IbnFusedTucker => "ibn_fused_tucker",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ibn" | "ibn_only" => Some(SpaceVariant::IbnOnly),
            "ibn_fused" | "ibn+fused" => Some(SpaceVariant::IbnFused),
            "ibn_fused_tucker" | "ibn+fused+tucker" | "tucker" => {
                Some(SpaceVariant::IbnFusedTucker)
            }
            _ => None,
        }
    }
}

impl fmt::Display for SpaceVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardwareAdaptation {
    /// Squeeze-and-excitation and h-swish on every layer.
    CpuLike,
    /// No 5x5 kernels.
    DspLike,
    Neutral,
}

impl HardwareAdaptation {
    pub fn name(self) -> &'static str {
        match self {
            HardwareAdaptation::CpuLike => "cpu_like",
            HardwareAdaptation::DspLike => "dsp_like",
            HardwareAdaptation::Neutral => "neutral",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cpu" | "cpu_like" => Some(HardwareAdaptation::CpuLike),
            "dsp" | "dsp_like" => Some(HardwareAdaptation::DspLike),
            "neutral" | "none" => Some(HardwareAdaptation::Neutral),
            _ => None,
        }
    }
}

/// One choice of a decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Kind(LayerKind),
    Multiplier(Ratio),
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Kind(k) => write!(f, "{k}"),
            Atom::Multiplier(m) => write!(f, "x{m}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Layer { block: usize, layer: usize },
    Block(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub id: usize,
    pub scope: Scope,
    pub choices: Vec<Atom>,
}

/// Value menus a space is built from. All lists are kept sorted ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Menus {
    pub multipliers: Vec<f64>,
    pub kernels: Vec<usize>,
    pub expansions: Vec<f64>,
    pub compressions: Vec<f64>,
}

impl Default for Menus {
    fn default() -> Self {
        Menus {
            multipliers: vec![0.5, 0.625, 0.75, 1.0, 1.25, 1.5, 2.0],
            kernels: vec![3, 5],
            expansions: vec![4.0, 8.0],
            compressions: vec![0.25, 0.75],
        }
    }
}

fn sorted_unique_f64(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| a.to_bits() == b.to_bits());
    out
}

impl Menus {
    fn normalized(&self) -> Menus {
        let mut kernels = self.kernels.clone();
        kernels.sort_unstable();
        kernels.dedup();
        Menus {
            multipliers: sorted_unique_f64(&self.multipliers),
            kernels,
            expansions: sorted_unique_f64(&self.expansions),
            compressions: sorted_unique_f64(&self.compressions),
        }
    }

    /// Layer kind atoms in canonical order.
    pub fn kind_atoms(&self, variant: SpaceVariant, adaptation: HardwareAdaptation) -> Vec<LayerKind> {
        let m = self.normalized();
        let kernels: Vec<usize> = m
            .kernels
            .iter()
            .copied()
            .filter(|&k| !(adaptation == HardwareAdaptation::DspLike && k == 5))
            .collect();
        let mut atoms = Vec::new();
        for &kernel in &kernels {
            for &s in &m.expansions {
                atoms.push(LayerKind::Ibn {
                    kernel,
                    expansion: Ratio(s),
                });
            }
        }
        if variant != SpaceVariant::IbnOnly {
            for &kernel in &kernels {
                for &s in &m.expansions {
                    atoms.push(LayerKind::Fused {
                        kernel,
                        expansion: Ratio(s),
                    });
                }
            }
        }
        if variant == SpaceVariant::IbnFusedTucker {
            for &kernel in &kernels {
                for &s in &m.compressions {
                    for &e in &m.compressions {
                        atoms.push(LayerKind::Tucker {
                            kernel,
                            input_compression: Ratio(s),
                            output_compression: Ratio(e),
                        });
                    }
                }
            }
        }
        atoms
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionVector(pub Vec<usize>);

impl DecisionVector {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for DecisionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceSpec {
    pub layout: Layout,
    pub variant: SpaceVariant,
    pub adaptation: HardwareAdaptation,
    pub menus: Menus,
    pub decisions: Vec<Decision>,
    pub enumeration_cap: u64,
}

/// Builds a space from the default menus.
pub fn build_space(
    variant: SpaceVariant,
    adaptation: HardwareAdaptation,
    layout: &Layout,
) -> Result<SpaceSpec> {
    build_space_with(variant, adaptation, layout, &Menus::default())
}

pub fn build_space_with(
    variant: SpaceVariant,
    adaptation: HardwareAdaptation,
    layout: &Layout,
    menus: &Menus,
) -> Result<SpaceSpec> {
    layout.check()?;
    let menus = menus.normalized();
    for &k in &menus.kernels {
        if k % 2 == 0 {
            return Err(NasError::Space(format!("kernel must be odd (got {k})")));
        }
    }
    if menus.multipliers.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
        return Err(NasError::Space("multipliers must be positive".into()));
    }
    if menus.expansions.iter().any(|&s| !(s.is_finite() && s > 1.0)) {
        return Err(NasError::Space("expansions must be > 1".into()));
    }
    if menus
        .compressions
        .iter()
        .any(|&s| !(s.is_finite() && s > 0.0 && s < 1.0))
    {
        return Err(NasError::Space("compressions must be in (0, 1)".into()));
    }

    let kinds: Vec<Atom> = menus
        .kind_atoms(variant, adaptation)
        .into_iter()
        .map(Atom::Kind)
        .collect();
    let multipliers: Vec<Atom> = menus
        .multipliers
        .iter()
        .map(|&m| Atom::Multiplier(Ratio(m)))
        .collect();
    if !layout.blocks.is_empty() {
        if kinds.is_empty() {
            return Err(NasError::Space(format!(
                "no layer choices left for {variant} under {}",
                adaptation.name()
            )));
        }
        if multipliers.is_empty() {
            return Err(NasError::Space("empty multiplier menu".into()));
        }
    }

    let mut decisions = Vec::new();
    for (b, block) in layout.blocks.iter().enumerate() {
        for l in 0..block.num_layers {
            decisions.push(Decision {
                id: decisions.len(),
                scope: Scope::Layer { block: b, layer: l },
                choices: kinds.clone(),
            });
        }
        decisions.push(Decision {
            id: decisions.len(),
            scope: Scope::Block(b),
            choices: multipliers.clone(),
        });
    }

    Ok(SpaceSpec {
        layout: layout.clone(),
        variant,
        adaptation,
        menus,
        decisions,
        enumeration_cap: DEFAULT_ENUMERATION_CAP,
    })
}

impl SpaceSpec {
    pub fn cardinalities(&self) -> Vec<usize> {
        self.decisions.iter().map(|d| d.choices.len()).collect()
    }

    /// Short identifier, e.g. `ibn_fused/neutral/2x[1]`.
    pub fn describe(&self) -> String {
        let depths: Vec<String> = self
            .layout
            .blocks
            .iter()
            .map(|b| b.num_layers.to_string())
            .collect();
        format!(
            "{}/{}/{}px/[{}]",
            self.variant,
            self.adaptation.name(),
            self.layout.input_resolution,
            depths.join(",")
        )
    }

    pub fn check_vector(&self, dv: &DecisionVector) -> Result<()> {
        if dv.0.len() != self.decisions.len() {
            return Err(NasError::DecisionLength {
                expected: self.decisions.len(),
                got: dv.0.len(),
            });
        }
        for (d, (&i, dec)) in dv.0.iter().zip(&self.decisions).enumerate() {
            if i >= dec.choices.len() {
                return Err(NasError::DecisionOutOfRange {
                    decision: d,
                    index: i,
                    len: dec.choices.len(),
                });
            }
        }
        Ok(())
    }

    /// Whether `kind` is one of the layer atoms this space offers.
    pub fn contains_kind(&self, kind: &LayerKind) -> bool {
        self.decisions.iter().any(|d| {
            matches!(d.scope, Scope::Layer { .. }) && d.choices.contains(&Atom::Kind(*kind))
        })
    }

    /// Maps `dv` (a vector of `self`) to the vector of `other` choosing the same
    /// atoms, if `other` offers all of them.
    pub fn translate(&self, other: &SpaceSpec, dv: &DecisionVector) -> Option<DecisionVector> {
        if self.decisions.len() != other.decisions.len() || self.check_vector(dv).is_err() {
            return None;
        }
        dv.0.iter()
            .zip(self.decisions.iter().zip(&other.decisions))
            .map(|(&i, (a, b))| {
                if a.scope != b.scope {
                    return None;
                }
                let atom = a.choices[i];
                b.choices.iter().position(|x| *x == atom)
            })
            .collect::<Option<Vec<_>>>()
            .map(DecisionVector)
    }
}

/// Decodes a decision vector into a concrete network.
pub fn decode(space: &SpaceSpec, dv: &DecisionVector) -> Result<NetworkSpec> {
    space.check_vector(dv)?;
    let cpu = space.adaptation == HardwareAdaptation::CpuLike;
    let activation = if cpu { Activation::Hswish } else { Activation::Relu6 };

    let mut cursor = 0;
    let mut c_in = space.layout.stem_channels;
    let mut blocks = Vec::with_capacity(space.layout.blocks.len());
    for bl in &space.layout.blocks {
        let kind_idx = &dv.0[cursor..cursor + bl.num_layers];
        let mult = match space.decisions[cursor + bl.num_layers].choices[dv.0[cursor + bl.num_layers]] {
            Atom::Multiplier(m) => m,
            Atom::Kind(_) => unreachable!("block decisions hold multipliers"),
        };
        let mut block = BlockSpec {
            base_channels: bl.base_channels,
            multiplier: mult,
            first_stride: bl.first_stride,
            layers: Vec::with_capacity(bl.num_layers),
        };
        let width = block.width();
        for (l, &i) in kind_idx.iter().enumerate() {
            let kind = match space.decisions[cursor + l].choices[i] {
                Atom::Kind(k) => k,
                Atom::Multiplier(_) => unreachable!("layer decisions hold kinds"),
            };
            let stride = if l == 0 { bl.first_stride } else { 1 };
            block
                .layers
                .push(LayerSpec::new(kind, c_in, width, stride).with_se(cpu, activation));
            c_in = width;
        }
        blocks.push(block);
        cursor += bl.num_layers + 1;
    }

    Ok(NetworkSpec {
        input_resolution: space.layout.input_resolution,
        stem_channels: space.layout.stem_channels,
        blocks,
        endpoints: space.layout.endpoints(),
    })
}

/// Number of distinct decision vectors.
pub fn space_size(space: &SpaceSpec) -> BigUint {
    space
        .decisions
        .iter()
        .fold(BigUint::from(1u32), |acc, d| acc * BigUint::from(d.choices.len()))
}

/// Lexicographic stream of every decision vector (last decision varies
/// fastest). Errors when the space exceeds the enumeration cap.
pub fn enumerate(space: &SpaceSpec) -> Result<Enumerator> {
    let size = space_size(space);
    if size > BigUint::from(space.enumeration_cap) {
        return Err(NasError::EnumerationCap {
            size: size.to_string(),
            cap: space.enumeration_cap,
        });
    }
    Ok(Enumerator {
        radices: space.cardinalities(),
        next: Some(vec![0; space.decisions.len()]),
    })
}

#[derive(Clone, Debug)]
pub struct Enumerator {
    radices: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Iterator for Enumerator {
    type Item = DecisionVector;

    fn next(&mut self) -> Option<DecisionVector> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut carried = true;
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < self.radices[i] {
                carried = false;
                break;
            }
            succ[i] = 0;
        }
        if !carried {
            self.next = Some(succ);
        }
        Some(DecisionVector(current))
    }
}

/// Uniform draw over the whole space.
pub fn random_sample<R: Rng + ?Sized>(space: &SpaceSpec, rng: &mut R) -> DecisionVector {
    DecisionVector(
        space
            .decisions
            .iter()
            .map(|d| rng.random_range(0..d.choices.len()))
            .collect(),
    )
}

/// On-disk space definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDefinition {
    pub variant: SpaceVariant,
    pub adaptation: HardwareAdaptation,
    /// Built-in layout name (`default`, `toy2`, `toy2block`) or a path.
    pub layout_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplier_menu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_menu: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion_menu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compression_menu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enumeration_cap: Option<u64>,
}

impl SpaceDefinition {
    pub fn from_json(doc: &str) -> Result<Self> {
        serde_json::from_str(doc).map_err(NasError::from_json)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("definition serializes")
    }

    pub fn menus(&self) -> Menus {
        let d = Menus::default();
        Menus {
            multipliers: self.multiplier_menu.clone().unwrap_or(d.multipliers),
            kernels: self.kernel_menu.clone().unwrap_or(d.kernels),
            expansions: self.expansion_menu.clone().unwrap_or(d.expansions),
            compressions: self.compression_menu.clone().unwrap_or(d.compressions),
        }
    }

    /// Builds the space given the resolved layout.
    pub fn build(&self, layout: &Layout) -> Result<SpaceSpec> {
        let mut space = build_space_with(self.variant, self.adaptation, layout, &self.menus())?;
        if let Some(cap) = self.enumeration_cap {
            space.enumeration_cap = cap;
        }
        Ok(space)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{validate, BlockLayout};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_by_one() -> Layout {
        Layout {
            input_resolution: 32,
            stem_channels: 16,
            blocks: vec![BlockLayout {
                base_channels: 48,
                num_layers: 1,
                first_stride: 1,
            }],
        }
    }

    #[test]
    fn ibn_only_atoms() {
        let s = build_space(SpaceVariant::IbnOnly, HardwareAdaptation::Neutral, &one_by_one()).unwrap();
        assert_eq!(s.cardinalities(), vec![4, 7]);
    }

    #[test]
    fn tucker_space_atoms() {
        let s = build_space(SpaceVariant::IbnFusedTucker, HardwareAdaptation::Neutral, &one_by_one())
            .unwrap();
        assert_eq!(s.cardinalities(), vec![16, 7]);
        let s = build_space(SpaceVariant::IbnFusedTucker, HardwareAdaptation::DspLike, &one_by_one())
            .unwrap();
        let kinds = &s.decisions[0].choices;
        assert_eq!(kinds.len(), 8);
        let count = |f: fn(&LayerKind) -> bool| {
            kinds
                .iter()
                .filter(|a| matches!(a, Atom::Kind(k) if f(k)))
                .count()
        };
        assert_eq!(count(|k| matches!(k, LayerKind::Ibn { .. })), 2);
        assert_eq!(count(|k| matches!(k, LayerKind::Fused { .. })), 2);
        assert_eq!(count(|k| matches!(k, LayerKind::Tucker { .. })), 4);
    }

    #[test]
    fn dsp_with_only_five_is_empty() {
        let menus = Menus {
            kernels: vec![5],
            ..Menus::default()
        };
        let err = build_space_with(
            SpaceVariant::IbnOnly,
            HardwareAdaptation::DspLike,
            &one_by_one(),
            &menus,
        );
        assert!(matches!(err, Err(NasError::Space(_))));
    }

    #[test]
    fn atoms_are_canonically_ordered() {
        let s = build_space(SpaceVariant::IbnFusedTucker, HardwareAdaptation::Neutral, &one_by_one())
            .unwrap();
        let kinds = &s.decisions[0].choices;
        assert!(kinds.windows(2).all(|w| w[0] < w[1]));
        let mults = &s.decisions[1].choices;
        assert!(mults.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_vector_decodes_to_first_atoms() {
        let s = build_space(SpaceVariant::IbnOnly, HardwareAdaptation::Neutral, &Layout::default_layout())
            .unwrap();
        let dv = DecisionVector(vec![0; s.decisions.len()]);
        let net = decode(&s, &dv).unwrap();
        assert!(validate(&net).is_empty());
        for (_, _, l) in net.layers() {
            assert_eq!(
                l.kind,
                LayerKind::Ibn {
                    kernel: 3,
                    expansion: Ratio(4.0)
                }
            );
        }
        assert!(net.blocks.iter().all(|b| b.multiplier == Ratio(0.5)));
    }

    #[test]
    fn multiplier_rounding() {
        let s = build_space(SpaceVariant::IbnOnly, HardwareAdaptation::Neutral, &one_by_one()).unwrap();
        let net = decode(&s, &DecisionVector(vec![0, 3])).unwrap();
        assert_eq!(net.blocks[0].layers[0].c_out, 48);
        let net = decode(&s, &DecisionVector(vec![0, 1])).unwrap();
        assert_eq!(net.blocks[0].layers[0].c_out, 32);
    }

    #[test]
    fn decode_rejects_out_of_range() {
        let s = build_space(SpaceVariant::IbnOnly, HardwareAdaptation::Neutral, &one_by_one()).unwrap();
        assert!(matches!(
            decode(&s, &DecisionVector(vec![4, 0])),
            Err(NasError::DecisionOutOfRange { decision: 0, .. })
        ));
        assert!(matches!(
            decode(&s, &DecisionVector(vec![0])),
            Err(NasError::DecisionLength { .. })
        ));
    }

    #[test]
    fn cpu_adaptation_sets_se() {
        let s = build_space(SpaceVariant::IbnFused, HardwareAdaptation::CpuLike, &Layout::toy2()).unwrap();
        let net = decode(&s, &DecisionVector(vec![1, 5, 2])).unwrap();
        assert!(net
            .layers()
            .all(|(_, _, l)| l.use_se && l.activation == Activation::Hswish));
    }

    #[test]
    fn sizes() {
        let toy = Layout::toy2();
        let s = build_space(SpaceVariant::IbnOnly, HardwareAdaptation::Neutral, &toy).unwrap();
        assert_eq!(space_size(&s), BigUint::from(112u32));
        let s = build_space(SpaceVariant::IbnFusedTucker, HardwareAdaptation::Neutral, &one_by_one())
            .unwrap();
        assert_eq!(space_size(&s), BigUint::from(112u32));
        let empty = Layout {
            blocks: vec![],
            ..toy
        };
        let s = build_space(SpaceVariant::IbnOnly, HardwareAdaptation::Neutral, &empty).unwrap();
        assert_eq!(space_size(&s), BigUint::from(1u32));
        let all: Vec<_> = enumerate(&s).unwrap().collect();
        assert_eq!(all, vec![DecisionVector(vec![])]);
    }

    #[test]
    fn enumeration_is_lexicographic_and_complete() {
        let s = build_space(SpaceVariant::IbnOnly, HardwareAdaptation::Neutral, &Layout::toy2()).unwrap();
        let all: Vec<_> = enumerate(&s).unwrap().collect();
        assert_eq!(all.len(), 112);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(all[0], DecisionVector(vec![0, 0, 0]));
        assert_eq!(all[1], DecisionVector(vec![0, 0, 1]));
        assert_eq!(all[111], DecisionVector(vec![3, 3, 6]));
    }

    #[test]
    fn enumeration_cap() {
        let s = build_space(SpaceVariant::IbnOnly, HardwareAdaptation::Neutral, &Layout::default_layout())
            .unwrap();
        assert!(matches!(enumerate(&s), Err(NasError::EnumerationCap { .. })));
        // larger than any u64 cap
        let mut s = build_space(
            SpaceVariant::IbnFusedTucker,
            HardwareAdaptation::Neutral,
            &Layout::default_layout(),
        )
        .unwrap();
        s.enumeration_cap = u64::MAX;
        assert!(space_size(&s) > BigUint::from(u64::MAX));
        assert!(enumerate(&s).is_err());
        let mut s = build_space(SpaceVariant::IbnOnly, HardwareAdaptation::Neutral, &Layout::toy2()).unwrap();
        s.enumeration_cap = 100;
        assert!(enumerate(&s).is_err());
        s.enumeration_cap = 112;
        assert_eq!(enumerate(&s).unwrap().count(), 112);
    }

    #[test]
    fn random_sample_is_seeded() {
        let s = build_space(SpaceVariant::IbnFusedTucker, HardwareAdaptation::Neutral, &Layout::default_layout())
            .unwrap();
        let a = random_sample(&s, &mut ChaCha8Rng::seed_from_u64(3));
        let b = random_sample(&s, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert!(s.check_vector(&a).is_ok());
    }

    #[test]
    fn coupon_collector_on_toy_space() {
        let s = build_space(SpaceVariant::IbnOnly, HardwareAdaptation::Neutral, &Layout::toy2()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let seen: std::collections::HashSet<_> =
            (0..10_000).map(|_| random_sample(&s, &mut rng)).collect();
        assert_eq!(seen.len(), 112);
    }

    #[test]
    fn definition_file_roundtrip() {
        let def = SpaceDefinition {
            variant: SpaceVariant::IbnFused,
            adaptation: HardwareAdaptation::DspLike,
            layout_ref: "toy2".into(),
            multiplier_menu: Some(vec![1.0, 0.5]),
            kernel_menu: None,
            expansion_menu: None,
            compression_menu: None,
            enumeration_cap: Some(5000),
        };
        let back = SpaceDefinition::from_json(&def.to_json()).unwrap();
        assert_eq!(back, def);
        let space = back.build(&Layout::toy2()).unwrap();
        assert_eq!(space.enumeration_cap, 5000);
        assert_eq!(space.cardinalities(), vec![4, 4, 2]);
        assert!(SpaceDefinition::from_json(r#"{"variant":"ibn","adaptation":"neutral"}"#).is_err());
    }
}
