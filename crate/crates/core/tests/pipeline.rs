mod common;

use std::sync::Arc;

use bigfcm::numeric::membership_terms;
use bigfcm::pipeline::{
    run_bigfcm, run_bigfcm_with_clock, run_combiner, run_driver, run_reducer, stage_seed,
    CombinerOutput, CombinerSeeds, DriverDecision, Flag, SampleSizing, ScriptedClock, Seeding,
};
use bigfcm::sampling::reservoir_sample;
use bigfcm::solvers::{fcm_naive, seed_uniform};
use bigfcm::{FcmParams, PipelineConfig, Points, Stage};
use common::{aligned_gap, four_corners};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corner_config(partitions: usize) -> PipelineConfig {
    PipelineConfig::new(FcmParams::new(4).with_seed(11)).with_partitions(partitions, partitions)
}

fn combiner_outputs(
    data: &Points,
    config: &PipelineConfig,
    parts: usize,
) -> Vec<CombinerOutput<f64>> {
    let params = config.params;
    let sample: Vec<&[f64]> = reservoir_sample(data.rows(), 3000, 5).unwrap();
    let sample = Points::from_rows(&sample).unwrap();
    let clock = ScriptedClock::from_secs(&[0.0, 1.0, 1.0, 1.5]);
    let decision: DriverDecision<f64> =
        run_driver(sample.view(), &params, 5e-9, 3000, &clock).unwrap();
    let seeds = CombinerSeeds::Driver(decision.seed_centers, decision.flag);
    let chunk = data.len() / parts;
    (0..parts)
        .map(|i| {
            let part = data.view().slice(i * chunk..(i + 1) * chunk);
            run_combiner(part, i, &seeds, &params, 3000).unwrap()
        })
        .collect()
}

#[test]
fn reduction_never_creates_mass() {
    for seed in 0..5 {
        let (points, init) = common::random_instance(seed, 400, 6, 2);
        let config = PipelineConfig::new(FcmParams::new(3).with_intermediate(6).with_seed(seed));
        let outputs: Vec<CombinerOutput<f64>> = (0..4)
            .map(|i| {
                let part = points.view().slice(i * 100..(i + 1) * 100);
                let seeds = CombinerSeeds::Driver(Arc::new(init.clone()), Flag::Fcm);
                run_combiner(part, i, &seeds, &config.params, 100).unwrap()
            })
            .collect();
        let pooled: f64 = outputs.iter().flat_map(|o| &o.weights).sum();
        let reduced = run_reducer(&outputs, &config.params).unwrap();
        let fin: f64 = reduced.weights.iter().sum();
        assert!(fin <= pooled * (1.0 + 1e-12), "{fin} > {pooled}");
    }
}

#[test]
fn crisp_reduction_conserves_mass() {
    let (points, _, _) = four_corners(40_000, 3);
    let config = corner_config(8);
    let outputs = combiner_outputs(&points, &config, 8);
    let reduced = run_reducer(&outputs, &config.params).unwrap();
    for o in &outputs {
        for row in o.centers.rows() {
            let terms = membership_terms(row, &reduced.centers, config.params.m).unwrap();
            let top = terms.iter().cloned().fold(0.0, f64::max).sqrt();
            assert!(top >= 0.99);
        }
    }
    let pooled: f64 = outputs.iter().flat_map(|o| &o.weights).sum();
    let fin: f64 = reduced.weights.iter().sum();
    assert!((pooled - fin).abs() <= 1e-6 * pooled, "{fin} vs {pooled}");
}

#[test]
fn both_flags_reach_the_same_clusters() {
    let (points, _, means) = four_corners(100_000, 4);
    let mut centers = Vec::new();
    for flag in [Flag::Wfcmpb, Flag::Fcm] {
        let mut config = corner_config(8);
        config.force_flag = Some(flag);
        let model = run_bigfcm(points.view(), &config, None).unwrap();
        assert_eq!(model.report.flag, Some(flag));
        assert!(aligned_gap(&model.centers, &means) <= 0.05);
        centers.push(model.centers);
    }
    assert!(aligned_gap(&centers[0], &centers[1]) <= 0.05);
}

#[test]
fn driver_seeds_land_near_the_means() {
    let (points, _, means) = four_corners(3184, 8);
    let params = FcmParams::new(4).with_seed(2);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let init = seed_uniform(points.view(), 4, &mut rng).unwrap();
    let oracle = fcm_naive(points.view(), &init, &params).unwrap();
    assert!(aligned_gap(&oracle.centers, &means) <= 0.1);
    for (readings, flag) in [
        ([0.0, 5.0, 5.0, 8.0], Flag::Fcm),
        ([0.0, 1.0, 1.0, 2.0], Flag::Wfcmpb),
    ] {
        let clock = ScriptedClock::from_secs(&readings);
        let d: DriverDecision<f64> =
            run_driver(points.view(), &params, 5e-9, 3184, &clock).unwrap();
        assert_eq!(d.flag, flag);
        assert_eq!(d.seed_centers.len(), 4);
        assert!(aligned_gap(&d.seed_centers, &oracle.centers) <= 0.1);
        assert!(aligned_gap(&d.seed_centers, &means) <= 0.1);
    }
}

#[test]
fn same_distribution_partitions_agree() {
    let params = FcmParams::new(4);
    let (_, _, means) = four_corners(1, 0);
    let seeds = CombinerSeeds::Driver(Arc::new(means.clone()), Flag::Fcm);
    for trial in 0..20 {
        let (a, _, _) = four_corners(5000, 100 + 2 * trial);
        let (b, _, _) = four_corners(5000, 101 + 2 * trial);
        let ra = run_combiner(a.view(), 0, &seeds, &params, 5000).unwrap();
        let rb = run_combiner(b.view(), 1, &seeds, &params, 5000).unwrap();
        assert!(
            aligned_gap(&ra.centers, &rb.centers) <= 0.1,
            "trial {trial}"
        );
        let total: f64 = ra.weights.iter().sum();
        assert!(total <= 5000.0);
    }
}

#[test]
fn one_partition_is_combiner_then_reducer() {
    let (points, _, _) = four_corners(5000, 6);
    let n = points.len();
    for seeding in [Seeding::Random, Seeding::Driver] {
        let mut config = corner_config(1);
        config.seeding = seeding;
        config.sample = SampleSizing::Fixed(n);
        config.block_size = Some(1000);
        let clock = ScriptedClock::from_secs(&[0.0, 2.0, 2.0, 3.0]);
        let model = run_bigfcm_with_clock(points.view(), &config, None, &clock).unwrap();

        let combiner_params = config.params.with_epsilon(config.combiner_epsilon());
        let seeds = match seeding {
            Seeding::Random => {
                CombinerSeeds::Random(stage_seed(config.params.seed, Stage::Combine))
            }
            Seeding::Driver => {
                let clock = ScriptedClock::from_secs(&[0.0, 2.0, 2.0, 3.0]);
                let d = run_driver(
                    points.view(),
                    &config.params,
                    config.driver_epsilon(),
                    1000,
                    &clock,
                )
                .unwrap();
                CombinerSeeds::Driver(d.seed_centers, d.flag)
            }
        };
        let out = run_combiner(points.view(), 0, &seeds, &combiner_params, 1000).unwrap();
        let direct = run_reducer(&[out], &config.params).unwrap();
        assert_eq!(model.centers, direct.centers);
        assert_eq!(model.weights, direct.weights);
    }
}

#[test]
fn reruns_are_bit_identical() {
    let (points, _, _) = four_corners(20_000, 7);
    let config = corner_config(4);
    let a = run_bigfcm(points.view(), &config, None).unwrap();
    let b = run_bigfcm(points.view(), &config, None).unwrap();
    // Flags come from wall-clock timing; pin them to compare the numbers.
    let mut pinned = config.clone();
    pinned.force_flag = a.report.flag;
    let c = run_bigfcm(points.view(), &pinned, None).unwrap();
    assert_eq!(a.centers, c.centers);
    if a.report.flag == b.report.flag {
        assert_eq!(a.centers, b.centers);
        assert_eq!(a.weights, b.weights);
    }
}

#[test]
fn tiny_partitions_pass_through() {
    let rows: Vec<[f64; 1]> = (0..10).map(|i| [f64::from(i)]).collect();
    let points = Points::from_rows(&rows).unwrap();
    let config = PipelineConfig::new(FcmParams::new(2).with_intermediate(3)).with_partitions(8, 2);
    let model = run_bigfcm(points.view(), &config, None).unwrap();
    assert_eq!(model.centers.len(), 2);
    assert_eq!(model.report.partition_count, 8);
}

#[test]
fn model_report_is_consistent() {
    let (points, _, _) = four_corners(20_000, 9);
    let model = run_bigfcm(points.view(), &corner_config(4), None).unwrap();
    let r = &model.report;
    assert_eq!(model.centers.len(), 4);
    assert_eq!(r.combiner_iterations.len(), 4);
    let stages = [
        r.sample_ms,
        r.driver_ms,
        r.combine_ms,
        r.reduce_ms,
        r.evaluate_ms,
    ];
    assert!(stages.iter().all(|t| *t >= 0.0));
    assert!(stages.iter().sum::<f64>() <= r.total_ms);
    assert!(model.objective >= 0.0);
}

#[test]
fn partition_counts_agree() {
    let (points, _, _) = four_corners(100_000, 12);
    let models: Vec<_> = [2, 4, 8, 16]
        .into_iter()
        .map(|p| {
            run_bigfcm(points.view(), &corner_config(p), None)
                .unwrap()
                .centers
        })
        .collect();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            assert!(aligned_gap(&models[i], &models[j]) <= 0.05);
        }
    }
}

#[test]
fn driver_seeds_save_combiner_iterations() {
    let (points, _, _) = four_corners(100_000, 13);
    let mut wins = 0;
    for trial in 0..10u64 {
        let mut config = corner_config(8);
        config.params.seed = trial;
        config.force_flag = Some(Flag::Fcm);
        let driven = run_bigfcm(points.view(), &config, None).unwrap();
        config.seeding = Seeding::Random;
        let random = run_bigfcm(points.view(), &config, None).unwrap();
        if driven.report.total_combiner_iterations() < random.report.total_combiner_iterations() {
            wins += 1;
        }
    }
    assert!(wins >= 9, "{wins} of 10");
}
