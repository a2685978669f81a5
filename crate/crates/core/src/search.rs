//! Search loops and baselines.
//!
//! [`run_search`] couples a space, a [`QualityOracle`], a [`LatencySource`]
//! and the REINFORCE controller. [`exhaustive_best`] and
//! [`random_search_baseline`] give ground truth and a reference point;
//! [`ablation_report`] compares space variants across devices.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{bucket_counts, network_cost, FeatureOptions};
use crate::arch::{Layout, NetworkSpec};
use crate::controller::{reward, Controller, RewardConfig, Sample};
use crate::cost::{predict, simulate_latency, DeviceSimulator, LatencyModel};
use crate::error::{NasError, Result};
use crate::space::{build_space, decode, enumerate, random_sample, DecisionVector, SpaceSpec, SpaceVariant};

/// Estimates the quality (a stand-in for detection mAP) of an architecture.
pub trait QualityOracle {
    /// Possibly noisy estimate, clamped to `[0, 1]`.
    fn evaluate(&self, net: &NetworkSpec, rng: &mut dyn RngCore) -> Result<f64>;
    /// Noise-free value.
    fn expected(&self, net: &NetworkSpec) -> Result<f64>;
    fn descriptor(&self) -> String;
}

/// Synthetic quality functions for desk-scale experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SyntheticOracle {
    /// `intercept + sum_b weight(b) * count(b)` over latency-model buckets.
    /// Weights are drawn uniformly from `[0, scale)` by hashing the bucket
    /// name with `seed`.
    LinearFeature {
        seed: u64,
        scale: f64,
        intercept: f64,
        noise_sigma: f64,
    },
    /// `q_max * (1 - exp(-MAdds / madds_scale))`, plus `early_bonus` times the
    /// fraction of regular-conv layers in the first half of the network.
    Affinity {
        q_max: f64,
        /// In MAdds.
        madds_scale: f64,
        early_bonus: f64,
        noise_sigma: f64,
    },
}

fn unit_hash(seed: u64, key: &str) -> f64 {
    let digest = Sha256::new().chain_update(seed.to_le_bytes()).chain_update(key.as_bytes()).finalize();
    let x = u64::from_le_bytes(digest[..8].try_into().unwrap());
    (x >> 11) as f64 / (1u64 << 53) as f64
}

impl SyntheticOracle {
    pub fn linear_feature(seed: u64) -> Self {
        SyntheticOracle::LinearFeature {
            seed,
            scale: 0.1,
            intercept: 0.2,
            noise_sigma: 0.0,
        }
    }

    pub fn affinity() -> Self {
        SyntheticOracle::Affinity {
            q_max: 1.0,
            madds_scale: 4.0e6,
            early_bonus: 0.0,
            noise_sigma: 0.0,
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        match &mut self {
            SyntheticOracle::LinearFeature { noise_sigma, .. }
            | SyntheticOracle::Affinity { noise_sigma, .. } => *noise_sigma = sigma,
        }
        self
    }

    pub fn noise_sigma(&self) -> f64 {
        match *self {
            SyntheticOracle::LinearFeature { noise_sigma, .. }
            | SyntheticOracle::Affinity { noise_sigma, .. } => noise_sigma,
        }
    }

    pub fn from_json(doc: &str) -> Result<Self> {
        serde_json::from_str(doc).map_err(NasError::from_json)
    }

    /// Weight the linear oracle assigns to a bucket.
    pub fn bucket_weight(&self, bucket: &str) -> f64 {
        match *self {
            SyntheticOracle::LinearFeature { seed, scale, .. } => scale * unit_hash(seed, bucket),
            SyntheticOracle::Affinity { .. } => 0.0,
        }
    }
}

impl QualityOracle for SyntheticOracle {
    fn evaluate(&self, net: &NetworkSpec, rng: &mut dyn RngCore) -> Result<f64> {
        let q = self.expected(net)?;
        let sigma = self.noise_sigma();
        if sigma == 0.0 {
            return Ok(q);
        }
        let eps: f64 = Normal::new(0.0, sigma)
            .map_err(|e| NasError::Config(e.to_string()))?
            .sample(rng);
        Ok((q + eps).clamp(0.0, 1.0))
    }

    fn expected(&self, net: &NetworkSpec) -> Result<f64> {
        let q = match *self {
            SyntheticOracle::LinearFeature { intercept, .. } => {
                let fv = bucket_counts(net, FeatureOptions::default())?;
                intercept
                    + fv.iter()
                        .map(|(b, c)| self.bucket_weight(b) * c as f64)
                        .sum::<f64>()
            }
            SyntheticOracle::Affinity {
                q_max,
                madds_scale,
                early_bonus,
                ..
            } => {
                let madds = network_cost(net)?.total_madds as f64;
                let (_, early) = regular_conv_fractions(net);
                q_max * (1.0 - (-madds / madds_scale).exp()) + early_bonus * early
            }
        };
        Ok(q.clamp(0.0, 1.0))
    }

    fn descriptor(&self) -> String {
        serde_json::to_string(self).expect("oracle serializes")
    }
}

/// Wraps an oracle so that every architecture gets one fixed noisy estimate
/// per `seed`, drawn from `N(0, sigma)` and keyed by the architecture's
/// serialized form. `expected` returns that frozen estimate, so exhaustive
/// search sees one realization of the noise.
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenNoise<O> {
    pub inner: O,
    pub seed: u64,
    pub sigma: f64,
}

impl<O: QualityOracle> QualityOracle for FrozenNoise<O> {
    fn evaluate(&self, net: &NetworkSpec, _rng: &mut dyn RngCore) -> Result<f64> {
        self.expected(net)
    }

    fn expected(&self, net: &NetworkSpec) -> Result<f64> {
        let q = self.inner.expected(net)?;
        if self.sigma == 0.0 {
            return Ok(q);
        }
        let digest = Sha256::new()
            .chain_update(self.seed.to_le_bytes())
            .chain_update(crate::arch::serialize(net).as_bytes())
            .finalize();
        let mut rng = ChaCha8Rng::from_seed(digest.into());
        let eps: f64 = Normal::new(0.0, self.sigma)
            .map_err(|e| NasError::Config(e.to_string()))?
            .sample(&mut rng);
        Ok((q + eps).clamp(0.0, 1.0))
    }

    fn descriptor(&self) -> String {
        format!("frozen_noise(seed={},sigma={}):{}", self.seed, self.sigma, self.inner.descriptor())
    }
}

/// Fraction of layers built on a regular KxK conv (Fused or Tucker), over the
/// whole network and over its first half (rounded up).
pub fn regular_conv_fractions(net: &NetworkSpec) -> (f64, f64) {
    let flags: Vec<bool> = net.layers().map(|(_, _, l)| l.kind.uses_regular_conv()).collect();
    if flags.is_empty() {
        return (0.0, 0.0);
    }
    let frac = |xs: &[bool]| xs.iter().filter(|&&x| x).count() as f64 / xs.len() as f64;
    let half = flags.len().div_ceil(2);
    (frac(&flags), frac(&flags[..half]))
}

/// Where latencies come from during a search.
#[derive(Clone, Debug, PartialEq)]
pub enum LatencySource {
    Simulator(DeviceSimulator),
    Model(LatencyModel),
}

impl LatencySource {
    pub fn measure<R: Rng + ?Sized>(&self, net: &NetworkSpec, space: &SpaceSpec, rng: &mut R) -> Result<f64> {
        match self {
            LatencySource::Simulator(dev) => simulate_latency(dev, net, rng),
            LatencySource::Model(m) => predict(m, net, space),
        }
    }

    pub fn expected(&self, net: &NetworkSpec, space: &SpaceSpec) -> Result<f64> {
        match self {
            LatencySource::Simulator(dev) => dev.expected_latency(net),
            LatencySource::Model(m) => predict(m, net, space),
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            LatencySource::Simulator(dev) => format!("simulator:{}", dev.name),
            LatencySource::Model(m) => format!("model:{}", m.space_ref),
        }
    }
}

/// How oracle noise is drawn during a search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityNoise {
    /// Seeded by (run seed, architecture): an architecture always gets the
    /// same estimate within a run.
    #[default]
    PerArchitecture,
    /// Fresh draw per evaluation.
    Iid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub steps: usize,
    pub samples_per_step: usize,
    pub tau: f64,
    /// Latency budget in ms; `None` uses [`default_budget`].
    pub budget_ms: Option<f64>,
    pub seed: u64,
    /// Record every n-th step in the log (the last step is always recorded).
    pub log_every: usize,
    pub quality_noise: QualityNoise,
    /// Adam step size for the controller.
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
}

fn default_learning_rate() -> f64 {
    crate::controller::DEFAULT_LEARNING_RATE
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            steps: 5_000,
            samples_per_step: 1,
            tau: -0.3,
            budget_ms: None,
            seed: 0,
            log_every: 1,
            quality_noise: QualityNoise::PerArchitecture,
            learning_rate: default_learning_rate(),
        }
    }
}

impl SearchConfig {
    fn check(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(NasError::Config("steps must be >= 1".into()));
        }
        if self.samples_per_step == 0 {
            return Err(NasError::Config("samples_per_step must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NasError::Config("learning_rate must be > 0".into()));
        }
        if self.log_every == 0 {
            return Err(NasError::Config("log_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Reward parameters, resolving a missing budget with [`default_budget`].
    pub fn reward_config(&self, space: &SpaceSpec, latency: &LatencySource) -> Result<RewardConfig> {
        let budget = match self.budget_ms {
            Some(b) => b,
            None => default_budget(space, latency, self.seed)?,
        };
        RewardConfig::new(self.tau, budget)
    }
}

/// Median noiseless latency of 256 uniform samples.
pub fn default_budget(space: &SpaceSpec, latency: &LatencySource, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6275_6467_6574);
    let mut lat = (0..256)
        .map(|_| latency.expected(&decode(space, &random_sample(space, &mut rng))?, space))
        .collect::<Result<Vec<_>>>()?;
    lat.sort_by(f64::total_cmp);
    Ok(0.5 * (lat[127] + lat[128]))
}

fn arch_rng(seed: u64, dv: &DecisionVector) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for &i in &dv.0 {
        h.update((i as u64).to_le_bytes());
    }
    let d = h.finalize();
    ChaCha8Rng::from_seed(d.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub dv: DecisionVector,
    pub quality: f64,
    pub latency_ms: f64,
    pub reward: f64,
    /// Policy entropy after the update.
    pub entropy: f64,
    /// Baseline after the update.
    pub baseline: f64,
}

/// Noise-free metrics of a chosen architecture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluated {
    pub dv: DecisionVector,
    pub quality: f64,
    pub latency_ms: f64,
    pub reward: f64,
    pub madds: u64,
    pub params: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchHeader {
    pub space: String,
    pub oracle: String,
    pub latency_source: String,
    pub config: SearchConfig,
    pub reward: RewardConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchLog {
    pub header: SearchHeader,
    pub steps: Vec<StepRecord>,
    pub final_arch: Evaluated,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum LogLine {
    Header(SearchHeader),
    Step(StepRecord),
    Final(Evaluated),
}

impl SearchLog {
    /// One JSON object per line: a header, every recorded step, the result.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        let mut push = |line: LogLine| {
            out.push_str(&serde_json::to_string(&line).expect("log serializes"));
            out.push('\n');
        };
        push(LogLine::Header(self.header.clone()));
        for s in &self.steps {
            push(LogLine::Step(s.clone()));
        }
        push(LogLine::Final(self.final_arch.clone()));
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut final_arch = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: LogLine = serde_json::from_str(line).map_err(|e| NasError::Parse {
                line: i + 1,
                column: e.column(),
                message: e.to_string(),
            })?;
            let misplaced = |what: &str| NasError::Parse {
                line: i + 1,
                column: 1,
                message: format!("unexpected {what} record"),
            };
            match parsed {
                LogLine::Header(h) if header.is_none() && steps.is_empty() => header = Some(h),
                LogLine::Step(s) if header.is_some() && final_arch.is_none() => steps.push(s),
                LogLine::Final(f) if header.is_some() && final_arch.is_none() => final_arch = Some(f),
                LogLine::Header(_) => return Err(misplaced("header")),
                LogLine::Step(_) => return Err(misplaced("step")),
                LogLine::Final(_) => return Err(misplaced("final")),
            }
        }
        let missing = |what: &str| NasError::Parse {
            line: 0,
            column: 0,
            message: format!("log has no {what} record"),
        };
        Ok(SearchLog {
            header: header.ok_or_else(|| missing("header"))?,
            steps,
            final_arch: final_arch.ok_or_else(|| missing("final"))?,
        })
    }
}

/// Noise-free metrics of `dv` under the given reward.
pub fn evaluate_arch(
    space: &SpaceSpec,
    dv: &DecisionVector,
    oracle: &dyn QualityOracle,
    latency: &LatencySource,
    cfg: &RewardConfig,
) -> Result<(NetworkSpec, Evaluated)> {
    let net = decode(space, dv)?;
    let quality = oracle.expected(&net)?;
    let latency_ms = latency.expected(&net, space)?;
    let cost = network_cost(&net)?;
    let ev = Evaluated {
        dv: dv.clone(),
        quality,
        latency_ms,
        reward: reward(quality, latency_ms, cfg),
        madds: cost.total_madds,
        params: cost.total_params,
    };
    Ok((net, ev))
}

/// Controller search. Returns the decoded most-likely architecture.
pub fn run_search(
    space: &SpaceSpec,
    oracle: &dyn QualityOracle,
    latency: &LatencySource,
    cfg: &SearchConfig,
) -> Result<(NetworkSpec, SearchLog)> {
    cfg.check()?;
    let reward_cfg = cfg.reward_config(space, latency)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut controller = Controller::with_learning_rate(space, cfg.learning_rate);
    let mut records = Vec::new();
    let mut batch = Vec::with_capacity(cfg.samples_per_step);
    let mut observed = Vec::with_capacity(cfg.samples_per_step);

    for step in 0..cfg.steps {
        let at = |source: NasError| NasError::AtStep {
            step,
            source: Box::new(source),
        };
        batch.clear();
        observed.clear();
        for _ in 0..cfg.samples_per_step {
            let (dv, logprob) = controller.policy.sample(&mut rng);
            let net = decode(space, &dv).map_err(at)?;
            let quality = match cfg.quality_noise {
                QualityNoise::PerArchitecture => oracle.evaluate(&net, &mut arch_rng(cfg.seed, &dv)),
                QualityNoise::Iid => oracle.evaluate(&net, &mut rng),
            }
            .map_err(at)?;
            let latency_ms = latency.measure(&net, space, &mut rng).map_err(at)?;
            let r = reward(quality, latency_ms, &reward_cfg);
            observed.push((quality, latency_ms));
            batch.push(Sample { dv, logprob, reward: r });
        }
        controller.step(&batch).map_err(at)?;
        if step % cfg.log_every == 0 || step + 1 == cfg.steps {
            let entropy = controller.policy.entropy();
            let baseline = controller.baseline.value.unwrap_or(f64::NAN);
            for (s, &(quality, latency_ms)) in batch.iter().zip(&observed) {
                records.push(StepRecord {
                    step,
                    dv: s.dv.clone(),
                    quality,
                    latency_ms,
                    reward: s.reward,
                    entropy,
                    baseline,
                });
            }
        }
    }

    let best = controller.policy.most_likely();
    let (net, final_arch) = evaluate_arch(space, &best, oracle, latency, &reward_cfg)?;
    let log = SearchLog {
        header: SearchHeader {
            space: space.describe(),
            oracle: oracle.descriptor(),
            latency_source: latency.descriptor(),
            config: cfg.clone(),
            reward: reward_cfg,
            meta: None,
        },
        steps: records,
        final_arch,
    };
    Ok((net, log))
}

/// Noise-free reward of every architecture, in enumeration order.
pub fn reward_table(
    space: &SpaceSpec,
    oracle: &dyn QualityOracle,
    latency: &LatencySource,
    cfg: &RewardConfig,
) -> Result<Vec<(DecisionVector, f64)>> {
    enumerate(space)?
        .map(|dv| {
            let net = decode(space, &dv)?;
            let r = reward(oracle.expected(&net)?, latency.expected(&net, space)?, cfg);
            Ok((dv, r))
        })
        .collect()
}

/// Best architecture by noise-free reward; ties go to the lexicographically
/// first vector.
pub fn exhaustive_best(
    space: &SpaceSpec,
    oracle: &dyn QualityOracle,
    latency: &LatencySource,
    cfg: &RewardConfig,
) -> Result<(NetworkSpec, Evaluated)> {
    let mut best: Option<(DecisionVector, f64)> = None;
    for dv in enumerate(space)? {
        let net = decode(space, &dv)?;
        let r = reward(oracle.expected(&net)?, latency.expected(&net, space)?, cfg);
        if best.as_ref().is_none_or(|(_, b)| r > *b) {
            best = Some((dv, r));
        }
    }
    let (dv, _) = best.expect("enumeration yields at least one vector");
    evaluate_arch(space, &dv, oracle, latency, cfg)
}

/// Best of `n` uniform samples, judged by the same (possibly noisy)
/// measurements a search would see. The returned metrics are noise-free.
pub fn random_search_baseline<R: Rng + ?Sized>(
    space: &SpaceSpec,
    oracle: &dyn QualityOracle,
    latency: &LatencySource,
    cfg: &SearchConfig,
    n: usize,
    rng: &mut R,
) -> Result<(NetworkSpec, Evaluated)> {
    if n == 0 {
        return Err(NasError::Config("n must be >= 1".into()));
    }
    let reward_cfg = cfg.reward_config(space, latency)?;
    let mut best: Option<(DecisionVector, f64)> = None;
    for _ in 0..n {
        let dv = random_sample(space, rng);
        let net = decode(space, &dv)?;
        let q = match cfg.quality_noise {
            QualityNoise::PerArchitecture => oracle.evaluate(&net, &mut arch_rng(cfg.seed, &dv))?,
            QualityNoise::Iid => oracle.evaluate(&net, &mut ChaCha8Rng::seed_from_u64(rng.next_u64()))?,
        };
        let r = reward(q, latency.measure(&net, space, rng)?, &reward_cfg);
        if best.as_ref().is_none_or(|(_, b)| r > *b) {
            best = Some((dv, r));
        }
    }
    let (dv, _) = best.expect("n >= 1");
    evaluate_arch(space, &dv, oracle, latency, &reward_cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMethod {
    Exhaustive,
    Controller,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub space: SpaceVariant,
    pub device: String,
    pub budget_ms: f64,
    pub reward: f64,
    pub quality: f64,
    pub latency_ms: f64,
    pub madds: u64,
    pub params: u64,
    pub frac_regular_all: f64,
    pub frac_regular_early: f64,
    pub dv: DecisionVector,
}

/// Best architecture per (space variant, device). Every device uses one
/// budget for all variants: `cfg.budget_ms`, or the [`default_budget`] of the
/// first variant's space.
pub fn ablation_report(
    variants: &[SpaceVariant],
    devices: &[DeviceSimulator],
    layout: &Layout,
    oracle: &dyn QualityOracle,
    cfg: &SearchConfig,
    method: AblationMethod,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for dev in devices {
        let latency = LatencySource::Simulator(dev.clone());
        let spaces = variants
            .iter()
            .map(|&v| build_space(v, dev.adaptation, layout))
            .collect::<Result<Vec<_>>>()?;
        let Some(first) = spaces.first() else {
            continue;
        };
        let reward_cfg = cfg.reward_config(first, &latency)?;
        let run_cfg = SearchConfig {
            budget_ms: Some(reward_cfg.budget_ms),
            ..cfg.clone()
        };
        for space in &spaces {
            let (net, ev) = match method {
                AblationMethod::Exhaustive => exhaustive_best(space, oracle, &latency, &reward_cfg)?,
                AblationMethod::Controller => {
                    let (_, log) = run_search(space, oracle, &latency, &run_cfg)?;
                    evaluate_arch(space, &log.final_arch.dv, oracle, &latency, &reward_cfg)?
                }
            };
            let (frac_regular_all, frac_regular_early) = regular_conv_fractions(&net);
            rows.push(AblationRow {
                space: space.variant,
                device: dev.name.clone(),
                budget_ms: reward_cfg.budget_ms,
                reward: ev.reward,
                quality: ev.quality,
                latency_ms: ev.latency_ms,
                madds: ev.madds,
                params: ev.params,
                frac_regular_all,
                frac_regular_early,
                dv: ev.dv,
            });
        }
    }
    Ok(rows)
}
