//! Simulated devices and the linear latency model.
//!
//! A [`DeviceSimulator`] charges each primitive op class its own rate in
//! milliseconds per million MAdds, which is enough to express "depthwise
//! convolutions are expensive here" without modelling any real hardware.
//! [`fit`] then learns a ridge regression from layer-bucket counts to
//! latency, the surrogate used during search.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analysis::{extract_features, layer_ops, stem_op, ConvOp, FeatureOptions, FeatureVector, OpClass};
use crate::arch::{derive_shapes, NetworkSpec};
use crate::error::{NasError, Result};
use crate::space::{decode, random_sample, HardwareAdaptation, SpaceSpec};

pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSimulator {
    pub name: String,
    /// ms per million MAdds of KxK regular convolutions.
    pub regular_conv: f64,
    pub depthwise_conv: f64,
    pub pointwise_conv: f64,
    pub se_block: f64,
    /// Fixed cost per layer (stem included), ms.
    pub layer_overhead_ms: f64,
    /// Relative standard deviation of the multiplicative measurement noise.
    pub noise_sigma: f64,
    /// Search-space adaptation this device calls for.
    pub adaptation: HardwareAdaptation,
}

impl DeviceSimulator {
    /// Uniform rates: latency tracks MAdds.
    pub fn cpu_sim() -> Self {
        DeviceSimulator {
            name: "cpu_sim".into(),
            regular_conv: 1.0,
            depthwise_conv: 1.0,
            pointwise_conv: 1.0,
            se_block: 1.0,
            layer_overhead_ms: 0.01,
            noise_sigma: 0.0,
            adaptation: HardwareAdaptation::CpuLike,
        }
    }

    /// Depthwise MAdds cost 21x regular ones, so a regular conv with 7x the
    /// MAdds of a depthwise one runs 3x faster. SE is poorly supported.
    pub fn accel_sim() -> Self {
        DeviceSimulator {
            name: "accel_sim".into(),
            regular_conv: 1.0,
            depthwise_conv: 21.0,
            pointwise_conv: 1.0,
            se_block: 50.0,
            layer_overhead_ms: 0.01,
            noise_sigma: 0.0,
            adaptation: HardwareAdaptation::Neutral,
        }
    }

    /// Same rates as [`accel_sim`](Self::accel_sim); the space drops 5x5 kernels.
    pub fn dsp_sim() -> Self {
        DeviceSimulator {
            name: "dsp_sim".into(),
            adaptation: HardwareAdaptation::DspLike,
            ..Self::accel_sim()
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "cpu_sim" => Some(Self::cpu_sim()),
            "accel_sim" => Some(Self::accel_sim()),
            "dsp_sim" => Some(Self::dsp_sim()),
            _ => None,
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn rate(&self, class: OpClass) -> f64 {
        match class {
            OpClass::RegularConv => self.regular_conv,
            OpClass::DepthwiseConv => self.depthwise_conv,
            OpClass::PointwiseConv => self.pointwise_conv,
            OpClass::SeBlock => self.se_block,
        }
    }

    pub fn check(&self) -> Result<()> {
        let rates = [
            self.regular_conv,
            self.depthwise_conv,
            self.pointwise_conv,
            self.se_block,
            self.layer_overhead_ms,
        ];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(NasError::Config(format!("{}: rates must be >= 0", self.name)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(NasError::Config(format!("{}: noise_sigma must be >= 0", self.name)));
        }
        Ok(())
    }

    pub fn from_json(doc: &str) -> Result<Self> {
        let dev: DeviceSimulator = serde_json::from_str(doc).map_err(NasError::from_json)?;
        dev.check()?;
        Ok(dev)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    /// Noiseless latency of one layer made of `ops`.
    pub fn layer_latency(&self, ops: &[ConvOp]) -> f64 {
        ops.iter()
            .map(|op| self.rate(op.class) * op.madds as f64 / 1e6)
            .sum::<f64>()
            + self.layer_overhead_ms
    }

    /// Noiseless latency of `net`.
    pub fn expected_latency(&self, net: &NetworkSpec) -> Result<f64> {
        let trace = derive_shapes(net)?;
        let stem = stem_op(net, trace.stem.out_height, trace.stem.out_width);
        let mut total = self.layer_latency(&[stem]);
        for ((_, _, layer), shape) in net.layers().zip(&trace.layers) {
            total += self.layer_latency(&layer_ops(layer, shape.height, shape.width)?);
        }
        Ok(total)
    }
}

/// Simulated measurement: expected latency times `1 + eps`,
/// `eps ~ Normal(0, noise_sigma)`.
pub fn simulate_latency<R: Rng + ?Sized>(dev: &DeviceSimulator, net: &NetworkSpec, rng: &mut R) -> Result<f64> {
    let base = dev.expected_latency(net)?;
    if dev.noise_sigma == 0.0 {
        return Ok(base);
    }
    let eps = Normal::new(0.0, dev.noise_sigma)
        .map_err(|e| NasError::Config(e.to_string()))?
        .sample(rng);
    // keep measurements positive even under absurd noise levels
    Ok(base * (1.0 + eps).max(1e-6))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRecord {
    pub arch: NetworkSpec,
    pub latency_ms: f64,
}

/// Benchmarks `n` uniformly sampled architectures on `dev`.
pub fn generate_benchmarks<R: Rng + ?Sized>(
    space: &SpaceSpec,
    dev: &DeviceSimulator,
    n: usize,
    rng: &mut R,
) -> Result<Vec<BenchmarkRecord>> {
    if n == 0 {
        return Err(NasError::Config("need at least one benchmark".into()));
    }
    (0..n)
        .map(|_| {
            let dv = random_sample(space, rng);
            let arch = decode(space, &dv)?;
            let latency_ms = simulate_latency(dev, &arch, rng)?;
            Ok(BenchmarkRecord { arch, latency_ms })
        })
        .collect()
}

/// Linear latency model over feature buckets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyModel {
    pub space_ref: String,
    pub buckets: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub train_r2: f64,
    #[serde(default)]
    pub holdout_r2: Option<f64>,
    #[serde(default)]
    pub features: FeatureOptions,
    /// Free-form run metadata (tool version, invocation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl LatencyModel {
    pub fn from_json(doc: &str) -> Result<Self> {
        let m: LatencyModel = serde_json::from_str(doc).map_err(NasError::from_json)?;
        if m.buckets.len() != m.weights.len() {
            return Err(NasError::Shape(format!(
                "{} buckets but {} weights",
                m.buckets.len(),
                m.weights.len()
            )));
        }
        if m.buckets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(NasError::Config("model buckets must be sorted and unique".into()));
        }
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Prediction from an already extracted feature vector.
    pub fn predict_features(&self, fv: &FeatureVector) -> Result<f64> {
        let mut total = self.intercept;
        for (bucket, count) in fv.iter() {
            let col = self
                .buckets
                .binary_search_by(|b| b.as_str().cmp(bucket))
                .map_err(|_| NasError::UnknownBucket(bucket.to_string()))?;
            total += self.weights[col] * count as f64;
        }
        Ok(total)
    }
}

/// Predicted latency of `net` (ms).
pub fn predict(model: &LatencyModel, net: &NetworkSpec, space: &SpaceSpec) -> Result<f64> {
    model.predict_features(&extract_features(net, space, model.features)?)
}

/// Coefficient of determination. With constant targets it is 1 for a perfect
/// fit and 0 otherwise.
pub fn r2_score(predicted: &[f64], actual: &[f64]) -> f64 {
    weighted_r2_score(predicted, actual, &vec![1.0; actual.len()])
}

/// [`r2_score`] where each sample counts `weights[i]` times.
pub fn weighted_r2_score(predicted: &[f64], actual: &[f64], weights: &[f64]) -> f64 {
    assert_eq!(predicted.len(), actual.len());
    assert_eq!(weights.len(), actual.len());
    let total: f64 = weights.iter().sum();
    if actual.is_empty() || total <= 0.0 {
        return 1.0;
    }
    let mean = actual.iter().zip(weights).map(|(y, w)| w * y).sum::<f64>() / total;
    let ss_tot: f64 = actual.iter().zip(weights).map(|(y, w)| w * (y - mean).powi(2)).sum();
    let ss_res: f64 = predicted
        .iter()
        .zip(actual)
        .zip(weights)
        .map(|((p, y), w)| w * (y - p).powi(2))
        .sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

pub fn r2(model: &LatencyModel, records: &[BenchmarkRecord], space: &SpaceSpec) -> Result<f64> {
    let predicted = records
        .iter()
        .map(|r| predict(model, &r.arch, space))
        .collect::<Result<Vec<_>>>()?;
    let actual: Vec<f64> = records.iter().map(|r| r.latency_ms).collect();
    Ok(r2_score(&predicted, &actual))
}

/// Ridge fit of latency on bucket counts with an unpenalized intercept.
pub fn fit(
    records: &[BenchmarkRecord],
    space: &SpaceSpec,
    ridge_lambda: f64,
    opts: FeatureOptions,
) -> Result<LatencyModel> {
    let rows = records
        .iter()
        .map(|r| Ok((extract_features(&r.arch, space, opts)?, r.latency_ms, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    let mut model = fit_weighted(&rows, ridge_lambda)?;
    model.space_ref = space.describe();
    model.features = opts;
    Ok(model)
}

/// Weighted ridge regression over `(features, target, weight)` rows: minimizes
/// `sum w_i (x_i.b + b0 - y_i)^2 + lambda |b|^2` through the normal equations.
pub fn fit_weighted(rows: &[(FeatureVector, f64, f64)], ridge_lambda: f64) -> Result<LatencyModel> {
    if rows.len() < 2 {
        return Err(NasError::TooFewRecords {
            need: 2,
            got: rows.len(),
        });
    }
    if !(ridge_lambda.is_finite() && ridge_lambda >= 0.0) {
        return Err(NasError::Config("ridge lambda must be >= 0".into()));
    }
    for (_, y, w) in rows {
        if !y.is_finite() || !(w.is_finite() && *w > 0.0) {
            return Err(NasError::NonFinite("record latency or weight".into()));
        }
    }

    let mut buckets: Vec<String> = rows
        .iter()
        .flat_map(|(fv, _, _)| fv.0.keys().cloned())
        .collect();
    buckets.sort();
    buckets.dedup();
    let p = buckets.len() + 1; // column 0 is the intercept

    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut sparse: Vec<(usize, f64)> = Vec::new();
    for (fv, y, w) in rows {
        sparse.clear();
        sparse.push((0, 1.0));
        for (bucket, count) in fv.iter() {
            let col = buckets.binary_search_by(|b| b.as_str().cmp(bucket)).expect("collected") + 1;
            sparse.push((col, count as f64));
        }
        for &(i, xi) in &sparse {
            rhs[i] += w * xi * y;
            for &(j, xj) in &sparse {
                gram[(i, j)] += w * xi * xj;
            }
        }
    }
    for i in 1..p {
        gram[(i, i)] += ridge_lambda;
    }

    let scale = (0..p).map(|i| gram[(i, i)]).fold(0.0, f64::max);
    let chol = gram.cholesky().ok_or(NasError::Singular)?;
    let l = chol.l();
    let min_pivot = (0..p).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
    if min_pivot * min_pivot <= scale * 1e-12 {
        return Err(NasError::Singular);
    }
    let beta = chol.solve(&rhs);

    let predicted: Vec<f64> = rows
        .iter()
        .map(|(fv, _, _)| {
            beta[0]
                + fv.iter()
                    .map(|(b, c)| {
                        let col = buckets.binary_search_by(|x| x.as_str().cmp(b)).expect("collected") + 1;
                        beta[col] * c as f64
                    })
                    .sum::<f64>()
        })
        .collect();
    let actual: Vec<f64> = rows.iter().map(|(_, y, _)| *y).collect();
    let weights: Vec<f64> = rows.iter().map(|(_, _, w)| *w).collect();

    Ok(LatencyModel {
        space_ref: String::new(),
        weights: beta.iter().skip(1).copied().collect(),
        intercept: beta[0],
        buckets,
        lambda: ridge_lambda,
        train_r2: weighted_r2_score(&predicted, &actual, &weights),
        holdout_r2: None,
        features: FeatureOptions::default(),
        meta: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::Layout;
    use crate::space::{build_space, SpaceVariant};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pointwise_arithmetic() {
        let dev = DeviceSimulator {
            pointwise_conv: 2.0,
            layer_overhead_ms: 0.1,
            ..DeviceSimulator::cpu_sim()
        };
        // a 1x1 conv of exactly 1e6 MAdds: 1000 positions x 25 x 40
        let op = ConvOp::pointwise(25, 40, 25, 40);
        assert_eq!(op.madds, 1_000_000);
        assert!((dev.layer_latency(&[op]) - 2.1).abs() < 1e-12);
    }

    #[test]
    fn accel_depthwise_vs_regular() {
        let dev = DeviceSimulator::accel_sim();
        let dw = ConvOp::depthwise(3, 64, 56, 56);
        let reg = ConvOp::regular(3, 64, 7, 56, 56);
        assert_eq!(reg.madds, 7 * dw.madds);
        let ratio = dev.layer_latency(&[dw]) / dev.layer_latency(&[reg]);
        assert!((ratio - 3.0).abs() / 3.0 < 0.01, "{ratio}");
    }

    #[test]
    fn seeded_latency_is_deterministic() {
        let space = build_space(SpaceVariant::IbnFused, HardwareAdaptation::Neutral, &Layout::toy2()).unwrap();
        let dev = DeviceSimulator::accel_sim().with_noise(0.05);
        let net = decode(&space, &random_sample(&space, &mut ChaCha8Rng::seed_from_u64(1))).unwrap();
        let a = simulate_latency(&dev, &net, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = simulate_latency(&dev, &net, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let c = simulate_latency(&dev, &net, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn r2_degenerate_cases() {
        assert_eq!(r2_score(&[2.0, 2.0], &[2.0, 2.0]), 1.0);
        assert_eq!(r2_score(&[2.0, 2.5], &[2.0, 2.0]), 0.0);
        assert_eq!(r2_score(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 1.0);
        assert!((r2_score(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0])).abs() < 1e-15);
    }

    #[test]
    fn constant_latency_fit() {
        let rows: Vec<_> = (0..4)
            .map(|i| {
                let mut fv = FeatureVector::default();
                fv.0.insert(format!("b{}", i % 2), 1);
                (fv, 3.0, 1.0)
            })
            .collect();
        let m = fit_weighted(&rows, 1e-6).unwrap();
        assert!((m.intercept + m.weights[0] - 3.0).abs() < 1e-6);
        assert!(m.train_r2 == 0.0 || m.train_r2 == 1.0);
    }

    #[test]
    fn singular_without_ridge() {
        // every row has the same single bucket: collinear with the intercept
        let rows: Vec<_> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&y| {
                let mut fv = FeatureVector::default();
                fv.0.insert("stem".into(), 1);
                (fv, y, 1.0)
            })
            .collect();
        assert!(matches!(fit_weighted(&rows, 0.0), Err(NasError::Singular)));
        assert!(fit_weighted(&rows, 1e-6).is_ok());
    }

    #[test]
    fn too_few_records() {
        assert!(matches!(
            fit_weighted(&[(FeatureVector::default(), 1.0, 1.0)], 1e-6),
            Err(NasError::TooFewRecords { .. })
        ));
    }

    #[test]
    fn unknown_bucket_is_named() {
        let m = LatencyModel {
            space_ref: "x".into(),
            buckets: vec!["stem".into()],
            weights: vec![1.0],
            intercept: 0.0,
            lambda: 0.0,
            train_r2: 1.0,
            holdout_r2: None,
            features: FeatureOptions::default(),
            meta: None,
        };
        let mut fv = FeatureVector::default();
        fv.0.insert("ibn_k3_s4|16->16|s1|32px".into(), 1);
        match m.predict_features(&fv) {
            Err(NasError::UnknownBucket(b)) => assert_eq!(b, "ibn_k3_s4|16->16|s1|32px"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn profile_json_roundtrip() {
        let dev = DeviceSimulator::dsp_sim();
        assert_eq!(DeviceSimulator::from_json(&dev.to_json()).unwrap(), dev);
        let bad = dev.to_json().replace("\"se_block\": 50.0", "\"se_block\": -1.0");
        assert!(DeviceSimulator::from_json(&bad).is_err());
    }
}
