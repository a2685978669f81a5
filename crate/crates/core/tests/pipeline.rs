use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hwnas::analysis::{bucket_counts, network_cost, FeatureOptions};
use hwnas::arch::Layout;
use hwnas::controller::{reward, CategoricalPolicy, RewardConfig};
use hwnas::cost::{fit, fit_weighted, generate_benchmarks, predict, r2, simulate_latency, DeviceSimulator};
use hwnas::search::{
    exhaustive_best, random_search_baseline, reward_table, run_search, LatencySource, QualityOracle,
    SearchConfig, SyntheticOracle,
};
use hwnas::space::{build_space, decode, enumerate, random_sample, HardwareAdaptation, SpaceSpec, SpaceVariant};
use hwnas::NasError;

fn toy(v: SpaceVariant) -> SpaceSpec {
    build_space(v, HardwareAdaptation::Neutral, &Layout::toy2()).unwrap()
}

/// Pearson chi-square statistic.
fn chi_square(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum()
}

#[test]
fn benchmarks_are_reproducible_and_positive() {
    let space = toy(SpaceVariant::IbnFusedTucker);
    let dev = DeviceSimulator::dsp_sim().with_noise(0.05);
    let space = build_space(SpaceVariant::IbnFusedTucker, dev.adaptation, &space.layout).unwrap();
    let a = generate_benchmarks(&space, &dev, 1000, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let b = generate_benchmarks(&space, &dev, 1000, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let c = generate_benchmarks(&space, &dev, 1000, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.iter().all(|r| r.latency_ms > 0.0));
}

#[test]
fn noiseless_fit_is_exact() {
    let dev = DeviceSimulator::accel_sim();
    let space = toy(SpaceVariant::IbnFused);
    let recs = generate_benchmarks(&space, &dev, 800, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    let model = fit(&recs, &space, 1e-9, FeatureOptions::default()).unwrap();
    assert!((model.train_r2 - 1.0).abs() < 1e-9, "{}", model.train_r2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let net = decode(&space, &random_sample(&space, &mut rng)).unwrap();
        let p = predict(&model, &net, &space).unwrap();
        let s = simulate_latency(&dev, &net, &mut rng).unwrap();
        assert!((p - s).abs() < 1e-6, "{p} vs {s}");
    }
}

#[test]
fn duplicates_equal_weights() {
    let dev = DeviceSimulator::cpu_sim().with_noise(0.03);
    let space = toy(SpaceVariant::IbnOnly);
    let recs = generate_benchmarks(&space, &dev, 60, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let feats = |r: &hwnas::cost::BenchmarkRecord| bucket_counts(&r.arch, FeatureOptions::default()).unwrap();
    let mut dup = Vec::new();
    let mut weighted = Vec::new();
    for (i, r) in recs.iter().enumerate() {
        let copies = 1 + i % 3;
        for _ in 0..copies {
            dup.push((feats(r), r.latency_ms, 1.0));
        }
        weighted.push((feats(r), r.latency_ms, copies as f64));
    }
    let a = fit_weighted(&dup, 1e-6).unwrap();
    let b = fit_weighted(&weighted, 1e-6).unwrap();
    assert_eq!(a.buckets, b.buckets);
    // compare predictions; the stem bucket is collinear with the intercept
    for (fv, y, _) in &weighted {
        let (pa, pb) = (a.predict_features(fv).unwrap(), b.predict_features(fv).unwrap());
        assert!((pa - pb).abs() < 1e-9 * y.abs().max(1.0), "{pa} vs {pb}");
    }
    assert!((a.train_r2 - b.train_r2).abs() < 1e-9);
}

#[test]
fn unknown_bucket_is_an_error() {
    let dev = DeviceSimulator::cpu_sim();
    let small = toy(SpaceVariant::IbnOnly);
    let big = toy(SpaceVariant::IbnFused);
    let recs = generate_benchmarks(&small, &dev, 200, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let model = fit(&recs, &small, 1e-6, FeatureOptions::default()).unwrap();
    let fused = decode(&big, &hwnas::space::DecisionVector(vec![5, 5, 3])).unwrap();
    match predict(&model, &fused, &big) {
        Err(NasError::UnknownBucket(b)) => assert!(b.starts_with("fused_")),
        other => panic!("{other:?}"),
    }
    assert!(r2(&model, &recs, &small).unwrap() > 0.999);
}

#[test]
fn uniform_sampling_chi_square() {
    let space = toy(SpaceVariant::IbnOnly);
    let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 112 * 200;
    for _ in 0..n {
        *counts.entry(random_sample(&space, &mut rng).0).or_default() += 1;
    }
    let observed: Vec<u64> = enumerate(&space).unwrap().map(|dv| counts.get(&dv.0).copied().unwrap_or(0)).collect();
    let stat = chi_square(&observed, &vec![200.0; 112]);
    // 111 degrees of freedom, p = 0.001
    assert!(stat < 158.0, "chi-square {stat}");
}

#[test]
fn policy_sampling_chi_square() {
    let policy = CategoricalPolicy {
        logits: vec![vec![0.0, 1.0, -1.0, 2.0]],
    };
    let p = policy.probabilities(0);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 40_000;
    let mut counts = [0u64; 4];
    for _ in 0..n {
        let (dv, lp) = policy.sample(&mut rng);
        assert!((lp - p[dv.0[0]].ln()).abs() < 1e-12);
        counts[dv.0[0]] += 1;
    }
    let expected: Vec<f64> = p.iter().map(|x| x * n as f64).collect();
    // 3 degrees of freedom, p = 0.001
    assert!(chi_square(&counts, &expected) < 16.27);
}

#[test]
fn searches_are_reproducible() {
    let space = toy(SpaceVariant::IbnFusedTucker);
    let lat = LatencySource::Simulator(DeviceSimulator::accel_sim().with_noise(0.02));
    let oracle = SyntheticOracle::linear_feature(4).with_noise(0.02);
    let cfg = SearchConfig {
        steps: 300,
        samples_per_step: 2,
        seed: 21,
        ..SearchConfig::default()
    };
    let (a, la) = run_search(&space, &oracle, &lat, &cfg).unwrap();
    let (b, lb) = run_search(&space, &oracle, &lat, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(la.to_ndjson(), lb.to_ndjson());
    assert_eq!(la.steps.len(), 600);
    for s in &la.steps {
        decode(&space, &s.dv).unwrap();
    }
}

#[test]
fn steep_penalty_picks_budget_closest() {
    let space = toy(SpaceVariant::IbnFused);
    let lat = LatencySource::Simulator(DeviceSimulator::accel_sim());
    let oracle = SyntheticOracle::linear_feature(0);
    let budget = 6.0;
    let cfg = RewardConfig::new(-1e6, budget).unwrap();
    let (_, best) = exhaustive_best(&space, &oracle, &lat, &cfg).unwrap();
    let closest = enumerate(&space)
        .unwrap()
        .map(|dv| (lat.expected(&decode(&space, &dv).unwrap(), &space).unwrap() / budget - 1.0).abs())
        .fold(f64::INFINITY, f64::min);
    assert!(((best.latency_ms / budget - 1.0).abs() - closest).abs() < 1e-12);
}

#[test]
fn reward_table_rows_by_hand() {
    let space = toy(SpaceVariant::IbnOnly);
    let dev = DeviceSimulator::cpu_sim();
    let lat = LatencySource::Simulator(dev.clone());
    let oracle = SyntheticOracle::affinity();
    let cfg = RewardConfig::new(-0.3, 4.0).unwrap();
    let table = reward_table(&space, &oracle, &lat, &cfg).unwrap();
    assert_eq!(table.len(), 112);
    for &i in &[0usize, 17, 55, 90, 111] {
        let (dv, r) = &table[i];
        let net = decode(&space, dv).unwrap();
        let madds = network_cost(&net).unwrap().total_madds as f64;
        // cpu_sim: 1 ms per million MAdds, 0.01 ms per layer and for the stem
        let latency = madds / 1e6 + 0.01 * 3.0;
        let quality = 1.0 - (-madds / 4.0e6).exp();
        let by_hand = quality - 0.3 * (latency / 4.0 - 1.0).abs();
        assert!((r - by_hand).abs() < 1e-12, "row {i}: {r} vs {by_hand}");
        assert_eq!(*r, reward(oracle.expected(&net).unwrap(), lat.expected(&net, &space).unwrap(), &cfg));
    }
}

#[test]
fn full_random_coverage_finds_optimum() {
    let space = toy(SpaceVariant::IbnOnly);
    let lat = LatencySource::Simulator(DeviceSimulator::cpu_sim());
    let oracle = SyntheticOracle::linear_feature(3);
    let cfg = SearchConfig {
        budget_ms: Some(4.0),
        ..SearchConfig::default()
    };
    let rc = cfg.reward_config(&space, &lat).unwrap();
    let (_, best) = exhaustive_best(&space, &oracle, &lat, &rc).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (_, found) = random_search_baseline(&space, &oracle, &lat, &cfg, 5000, &mut rng).unwrap();
    assert_eq!(found.reward, best.reward);
    let (_, one) = random_search_baseline(&space, &oracle, &lat, &cfg, 1, &mut rng).unwrap();
    assert!(one.reward <= best.reward);
    assert!(random_search_baseline(&space, &oracle, &lat, &cfg, 0, &mut rng).is_err());
}

#[test]
fn controller_beats_random_baseline_median() {
    let dev = DeviceSimulator::accel_sim();
    let space = toy(SpaceVariant::IbnFusedTucker);
    let lat = LatencySource::Simulator(dev);
    let oracle = SyntheticOracle::LinearFeature {
        seed: 0,
        scale: 0.2,
        intercept: 0.2,
        noise_sigma: 0.0,
    };
    let mut controller = Vec::new();
    let mut random = Vec::new();
    for seed in 0..10 {
        let cfg = SearchConfig {
            steps: 2000,
            samples_per_step: 16,
            seed,
            log_every: 2000,
            ..SearchConfig::default()
        };
        controller.push(run_search(&space, &oracle, &lat, &cfg).unwrap().1.final_arch.reward);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random.push(random_search_baseline(&space, &oracle, &lat, &cfg, 100, &mut rng).unwrap().1.reward);
    }
    random.sort_by(f64::total_cmp);
    let median = 0.5 * (random[4] + random[5]);
    controller.sort_by(f64::total_cmp);
    assert!(controller[5] >= median, "controller {controller:?} random median {median}");
}
