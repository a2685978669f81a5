//! REINFORCE controller over independent categorical decisions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NasError, Result};
use crate::space::{DecisionVector, SpaceSpec};

/// Per-decision logits; sampling probabilities are their softmax.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalPolicy {
    pub logits: Vec<Vec<f64>>,
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    logits.iter().map(|x| x - lse).collect()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

impl CategoricalPolicy {
    /// All-zero logits (uniform) for the given decision sizes.
    pub fn uniform(cardinalities: &[usize]) -> Self {
        CategoricalPolicy {
            logits: cardinalities.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_space(space: &SpaceSpec) -> Self {
        Self::uniform(&space.cardinalities())
    }

    pub fn probabilities(&self, decision: usize) -> Vec<f64> {
        softmax(&self.logits[decision])
    }

    /// Sum of per-decision log-probabilities of `dv`.
    pub fn log_prob(&self, dv: &DecisionVector) -> f64 {
        self.logits
            .iter()
            .zip(&dv.0)
            .map(|(l, &i)| log_softmax(l)[i])
            .sum()
    }

    /// One independent categorical draw per decision.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (DecisionVector, f64) {
        let mut logprob = 0.0;
        let choice = self
            .logits
            .iter()
            .map(|l| {
                let lp = log_softmax(l);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = lp.len() - 1;
                for (i, x) in lp.iter().enumerate() {
                    acc += x.exp();
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                logprob += lp[pick];
                pick
            })
            .collect();
        (DecisionVector(choice), logprob)
    }

    /// Argmax per decision; ties go to the lowest index.
    pub fn most_likely(&self) -> DecisionVector {
        DecisionVector(
            self.logits
                .iter()
                .map(|l| {
                    l.iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
                        .0
                })
                .collect(),
        )
    }

    /// Sum of per-decision Shannon entropies, in nats.
    pub fn entropy(&self) -> f64 {
        self.logits
            .iter()
            .map(|l| {
                log_softmax(l)
                    .iter()
                    .map(|&lp| if lp.is_finite() { -lp.exp() * lp } else { 0.0 })
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Latency-penalized reward parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Penalty weight, negative.
    pub tau: f64,
    /// Latency budget in ms.
    pub budget_ms: f64,
}

impl RewardConfig {
    pub fn new(tau: f64, budget_ms: f64) -> Result<Self> {
        if !(tau.is_finite() && tau < 0.0) {
            return Err(NasError::Config(format!("tau must be < 0 (got {tau})")));
        }
        if !(budget_ms.is_finite() && budget_ms > 0.0) {
            return Err(NasError::Config(format!("budget must be > 0 (got {budget_ms})")));
        }
        Ok(RewardConfig { tau, budget_ms })
    }
}

/// `quality + tau * |latency / budget - 1|`.
pub fn reward(quality: f64, latency_ms: f64, cfg: &RewardConfig) -> f64 {
    quality + cfg.tau * (latency_ms / cfg.budget_ms - 1.0).abs()
}

pub const DEFAULT_LEARNING_RATE: f64 = 5e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// lr 5e-3, betas (0, 0.999), eps 1e-8.
    pub fn new(policy: &CategoricalPolicy) -> Self {
        Self::with_hyper(policy, DEFAULT_LEARNING_RATE, 0.0, 0.999, 1e-8)
    }

    pub fn with_hyper(policy: &CategoricalPolicy, lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros: Vec<Vec<f64>> = policy.logits.iter().map(|l| vec![0.0; l.len()]).collect();
        AdamState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
            lr,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// One ascent step along `grad`.
    pub fn apply(&mut self, params: &mut [Vec<f64>], grad: &[Vec<f64>]) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (d, g_row) in grad.iter().enumerate() {
            for (i, &g) in g_row.iter().enumerate() {
                let m = &mut self.m[d][i];
                let v = &mut self.v[d][i];
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                params[d][i] += self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

/// Exponential moving average of rewards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineState {
    pub value: Option<f64>,
    pub decay: f64,
}

impl Default for BaselineState {
    fn default() -> Self {
        BaselineState {
            value: None,
            decay: 0.9,
        }
    }
}

/// A sampled architecture with its log-probability and reward.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub dv: DecisionVector,
    pub logprob: f64,
    pub reward: f64,
}

/// Batch-mean of `(reward - baseline) * d logprob / d logits`, where the
/// derivative for decision `d` is `onehot(chosen) - softmax(logits_d)`.
pub fn reinforce_gradient(policy: &CategoricalPolicy, batch: &[Sample], baseline: f64) -> Vec<Vec<f64>> {
    let probs: Vec<Vec<f64>> = (0..policy.logits.len()).map(|d| policy.probabilities(d)).collect();
    let mut grad: Vec<Vec<f64>> = probs.iter().map(|p| vec![0.0; p.len()]).collect();
    let n = batch.len() as f64;
    for s in batch {
        let adv = (s.reward - baseline) / n;
        for (d, &chosen) in s.dv.0.iter().enumerate() {
            for (i, p) in probs[d].iter().enumerate() {
                let onehot = if i == chosen { 1.0 } else { 0.0 };
                grad[d][i] += adv * (onehot - p);
            }
        }
    }
    grad
}

/// One policy-gradient update. The baseline is initialized to the first
/// batch's mean reward and updated after the gradient is taken.
pub fn reinforce_step(
    policy: &mut CategoricalPolicy,
    batch: &[Sample],
    baseline: &mut BaselineState,
    adam: &mut AdamState,
) -> Result<()> {
    if batch.is_empty() {
        return Err(NasError::Config("empty batch".into()));
    }
    if let Some(s) = batch.iter().find(|s| !s.reward.is_finite()) {
        return Err(NasError::NonFinite(format!("reward {} for {}", s.reward, s.dv)));
    }
    let mean = batch.iter().map(|s| s.reward).sum::<f64>() / batch.len() as f64;
    let b = *baseline.value.get_or_insert(mean);
    let grad = reinforce_gradient(policy, batch, b);
    adam.apply(&mut policy.logits, &grad);
    baseline.value = Some(baseline.decay * b + (1.0 - baseline.decay) * mean);
    Ok(())
}

/// Policy, optimizer and baseline bundled together.
#[derive(Clone, Debug, PartialEq)]
pub struct Controller {
    pub policy: CategoricalPolicy,
    pub adam: AdamState,
    pub baseline: BaselineState,
}

impl Controller {
    pub fn new(space: &SpaceSpec) -> Self {
        let policy = CategoricalPolicy::for_space(space);
        Controller {
            adam: AdamState::new(&policy),
            policy,
            baseline: BaselineState::default(),
        }
    }

    pub fn with_learning_rate(space: &SpaceSpec, lr: f64) -> Self {
        let mut c = Self::new(space);
        c.adam.lr = lr;
        c
    }

    pub fn step(&mut self, batch: &[Sample]) -> Result<()> {
        reinforce_step(&mut self.policy, batch, &mut self.baseline, &mut self.adam)
    }

    pub fn checkpoint(&self, space_ref: &str) -> PolicyCheckpoint {
        PolicyCheckpoint {
            space_ref: space_ref.to_string(),
            logits: self.policy.logits.clone(),
            adam: self.adam.clone(),
            baseline: self.baseline.clone(),
            step: self.adam.step,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyCheckpoint {
    pub space_ref: String,
    pub logits: Vec<Vec<f64>>,
    pub adam: AdamState,
    pub baseline: BaselineState,
    pub step: u64,
}

impl PolicyCheckpoint {
    pub fn from_json(doc: &str) -> Result<Self> {
        let ck: PolicyCheckpoint = serde_json::from_str(doc).map_err(NasError::from_json)?;
        let shape = |v: &Vec<Vec<f64>>| v.iter().map(Vec::len).collect::<Vec<_>>();
        if shape(&ck.logits) != shape(&ck.adam.m) || shape(&ck.logits) != shape(&ck.adam.v) {
            return Err(NasError::Shape("adam moments do not match logits".into()));
        }
        if ck.logits.iter().flatten().any(|x| !x.is_finite()) {
            return Err(NasError::NonFinite("logit".into()));
        }
        Ok(ck)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn into_controller(self) -> Controller {
        Controller {
            policy: CategoricalPolicy { logits: self.logits },
            adam: self.adam,
            baseline: self.baseline,
        }
    }
}
