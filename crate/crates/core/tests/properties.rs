mod common;

use std::collections::BTreeSet;
use std::io::Cursor;

use bigfcm::ingest::{
    encode_categorical, normalize_minmax, plan_partitions, read_records, write_records,
    DatasetSchema,
};
use bigfcm::metrics::{assign, confusion_accuracy};
use bigfcm::numeric::{fcm_objective, fcm_objective_unweighted, membership_terms};
use bigfcm::sampling::{parker_hall_size, reservoir_sample_indexed};
use bigfcm::solvers::{fcm_fast, fcm_naive, fcm_naive_traced, wfcm, wfcmpb};
use bigfcm::{CenterSet, FcmParams, Points};
use common::random_instance;
use proptest::prelude::*;

fn coords(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

/// A point and a center set of the same dimension.
fn point_and_centers() -> impl Strategy<Value = (Vec<f64>, Points)> {
    (1usize..=4, 1usize..=6).prop_flat_map(|(d, c)| {
        (coords(d), coords(c * d)).prop_map(move |(x, v)| (x, Points::new(v, d).unwrap()))
    })
}

fn weighted_problem() -> impl Strategy<Value = (Points, Vec<f64>, CenterSet, f64)> {
    (1usize..=4, 2usize..=40, 1usize..=5, any::<u64>()).prop_flat_map(|(d, n, c, seed)| {
        let c = c.min(n);
        (
            prop::collection::vec(0.1f64..5.0, n),
            prop::sample::select(vec![1.5, 2.0, 3.0]),
        )
            .prop_map(move |(w, m)| {
                let (points, init) = random_instance(seed, n, c, d);
                (points, w, init, m)
            })
    })
}

fn params(c: usize, m: f64, iterations: usize) -> FcmParams {
    FcmParams::new(c)
        .with_fuzzifier(m)
        .with_epsilon(f64::MIN_POSITIVE)
        .with_max_iterations(iterations)
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn memberships_sum_to_one((x, centers) in point_and_centers(), m in 1.001f64..=4.0) {
        let terms = membership_terms(&x, &centers, m).unwrap();
        let mut total = 0.0;
        for t in &terms {
            prop_assert!((0.0..=1.0).contains(t));
            total += t.powf(1.0 / m);
        }
        prop_assert!((total - 1.0).abs() <= 1e-9, "sum {total}");
    }
}

proptest! {
    #[test]
    fn terms_follow_center_permutation(
        (x, centers) in point_and_centers(),
        m in 1.1f64..=4.0,
        shuffle in any::<prop::sample::Index>(),
    ) {
        let c = centers.len();
        let mut order: Vec<usize> = (0..c).collect();
        order.rotate_left(shuffle.index(c.max(1)));
        order.swap(0, c - 1);
        let rows: Vec<&[f64]> = order.iter().map(|&i| centers.row(i)).collect();
        let permuted = Points::from_rows(&rows).unwrap();
        let a = membership_terms(&x, &centers, m).unwrap();
        let b = membership_terms(&x, &permuted, m).unwrap();
        for (k, &i) in order.iter().enumerate() {
            prop_assert!((b[k] - a[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn translation_leaves_terms_and_objective(
        (x, centers) in point_and_centers(),
        m in 1.1f64..=4.0,
        shift in coords(4),
    ) {
        let d = x.len();
        let moved_x: Vec<f64> = x.iter().zip(&shift).map(|(a, s)| a + s).collect();
        let mut moved_c = centers.clone();
        for i in 0..moved_c.len() {
            for (v, s) in moved_c.row_mut(i).iter_mut().zip(&shift) {
                *v += s;
            }
        }
        let a = membership_terms(&x, &centers, m).unwrap();
        let b = membership_terms(&moved_x, &moved_c, m).unwrap();
        prop_assert!(max_gap(&a, &b) <= 1e-9);

        let p = Points::new(x.clone(), d).unwrap();
        let q = Points::new(moved_x, d).unwrap();
        let qa = fcm_objective_unweighted(p.view(), &centers, m).unwrap();
        let qb = fcm_objective_unweighted(q.view(), &moved_c, m).unwrap();
        prop_assert!((qa - qb).abs() <= 1e-9 * qa.max(1.0));
    }

    #[test]
    fn objective_weight_forms_agree((points, w, centers, m) in weighted_problem(), scale in 0.01f64..100.0) {
        let ones = vec![1.0; points.len()];
        let weighted = fcm_objective(points.view(), &ones, &centers, m).unwrap();
        let plain = fcm_objective_unweighted(points.view(), &centers, m).unwrap();
        prop_assert_eq!(weighted, plain);
        prop_assert!(plain >= 0.0);

        let base = fcm_objective(points.view(), &w, &centers, m).unwrap();
        let scaled_w: Vec<f64> = w.iter().map(|v| v * scale).collect();
        let scaled = fcm_objective(points.view(), &scaled_w, &centers, m).unwrap();
        prop_assert!((scaled - scale * base).abs() <= 1e-12 * (scale * base).max(1e-300));
    }

    #[test]
    fn fast_matches_naive(
        seed in any::<u64>(),
        n in 5usize..=200,
        c in 1usize..=5,
        d in 1usize..=4,
        m in prop::sample::select(vec![1.5, 2.0, 3.0]),
        iterations in 1usize..=15,
    ) {
        let (points, init) = random_instance(seed, n, c, d);
        let p = params(c, m, iterations);
        let fast = fcm_fast(points.view(), &init, &p).unwrap();
        let naive = fcm_naive(points.view(), &init, &p).unwrap();
        prop_assert!(max_gap(fast.centers.as_slice(), naive.centers.as_slice()) <= 1e-9);
    }

    #[test]
    fn unit_weights_reduce_to_fcm(seed in any::<u64>(), n in 5usize..=100, c in 1usize..=5, d in 1usize..=4) {
        let (points, init) = random_instance(seed, n, c, d);
        let p = FcmParams::new(c);
        let fast = fcm_fast(points.view(), &init, &p).unwrap();
        let weighted = wfcm(points.view(), &vec![1.0; n], &init, &p).unwrap();
        prop_assert_eq!(fast, weighted);
    }

    #[test]
    fn naive_objective_never_increases(
        seed in any::<u64>(),
        n in 5usize..=120,
        c in 1usize..=5,
        d in 1usize..=4,
        m in 1.2f64..=3.0,
    ) {
        let (points, init) = random_instance(seed, n, c, d);
        let (_, trace) = fcm_naive_traced(points.view(), &init, &params(c, m, 25)).unwrap();
        for pair in trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn weight_scale_leaves_centers(
        (points, w, init, m) in weighted_problem(),
        scale in prop::sample::select(vec![0.5, 2.0, 10.0]),
    ) {
        let p = FcmParams::new(init.len()).with_fuzzifier(m);
        let base = wfcm(points.view(), &w, &init, &p).unwrap();
        let scaled_w: Vec<f64> = w.iter().map(|v| v * scale).collect();
        let scaled = wfcm(points.view(), &scaled_w, &init, &p).unwrap();
        prop_assert!(max_gap(base.centers.as_slice(), scaled.centers.as_slice()) <= 1e-12);
        for (a, b) in base.weights.iter().zip(&scaled.weights) {
            prop_assert!((b - scale * a).abs() <= 1e-12 * (scale * a).max(1e-300));
        }
    }

    #[test]
    fn duplicating_a_point_splits_its_weight(
        (points, w, init, m) in weighted_problem(),
        pick in any::<prop::sample::Index>(),
        fraction in 0.05f64..0.95,
    ) {
        let k = pick.index(points.len());
        let mut split = points.clone();
        split.push(points.row(k)).unwrap();
        let mut split_w = w.clone();
        split_w[k] = w[k] * fraction;
        split_w.push(w[k] * (1.0 - fraction));
        let p = params(init.len(), m, 20);
        let a = wfcm(points.view(), &w, &init, &p).unwrap();
        let b = wfcm(split.view(), &split_w, &init, &p).unwrap();
        prop_assert!(max_gap(a.centers.as_slice(), b.centers.as_slice()) <= 1e-9);
    }

    #[test]
    fn centers_stay_in_bounding_box(
        (points, w, init, m) in weighted_problem(),
        block in 1usize..=30,
    ) {
        let c = init.len();
        let p = FcmParams::new(c).with_fuzzifier(m).with_max_iterations(50);
        let bounds = points.view().bounds();
        let results = [
            fcm_fast(points.view(), &init, &p).unwrap(),
            fcm_naive(points.view(), &init, &p).unwrap(),
            wfcm(points.view(), &w, &init, &p).unwrap(),
            wfcmpb(points.view(), &init, &p, block.max(c)).unwrap(),
        ];
        for r in &results {
            for row in r.centers.rows() {
                for (v, (lo, hi)) in row.iter().zip(&bounds) {
                    prop_assert!(*v >= lo - 1e-9 && *v <= hi + 1e-9);
                }
            }
            prop_assert!(r.weights.iter().all(|w| *w >= 0.0));
            prop_assert_eq!(r.converged, r.final_shift <= p.epsilon);
        }
    }

    #[test]
    fn parker_hall_is_monotone(
        v in 1.0f64..5.0,
        dv in 0.0f64..2.0,
        c in 1usize..=50,
        r in 0.01f64..=1.0,
        dr in 0.0f64..0.5,
    ) {
        let base = parker_hall_size(v, c, r).unwrap();
        prop_assert!(base >= c);
        prop_assert!(parker_hall_size(v + dv, c, r).unwrap() >= base);
        prop_assert!(parker_hall_size(v, c + 1, r).unwrap() >= base);
        let r2 = (r + dr).min(1.0);
        prop_assert!(parker_hall_size(v, c, r2).unwrap() <= base);
    }

    #[test]
    fn reservoir_is_a_subset(n in 0usize..500, k in 1usize..100, seed in any::<u64>()) {
        let stream: Vec<usize> = (0..n).map(|i| i * 7).collect();
        let picked = reservoir_sample_indexed(stream.iter().copied(), k, seed).unwrap();
        prop_assert_eq!(picked.len(), k.min(n));
        let positions: BTreeSet<usize> = picked.iter().map(|(i, _)| *i).collect();
        prop_assert_eq!(positions.len(), picked.len());
        for (i, item) in picked {
            prop_assert_eq!(stream[i], item);
        }
    }

    #[test]
    fn written_records_read_back(
        rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..40),
        delimiter in prop::sample::select(vec![',', ';', '\t', '|']),
    ) {
        let points = Points::from_rows(&rows).unwrap();
        let mut text = Vec::new();
        write_records(&mut text, &points, delimiter).unwrap();
        let schema = DatasetSchema::default().with_delimiter(delimiter);
        let table = read_records(Cursor::new(text), &schema).unwrap();
        let (back, _) = encode_categorical(&table).unwrap();
        prop_assert!(max_gap(points.as_slice(), back.as_slice()) <= 1e-12);
    }

    #[test]
    fn minmax_maps_into_unit_box(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 1..60)) {
        let points = Points::from_rows(&rows).unwrap();
        let (normalized, scaler) = normalize_minmax(&points).unwrap();
        prop_assert!(normalized.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        let mut again = points.clone();
        scaler.apply(&mut again).unwrap();
        prop_assert_eq!(again, normalized);
    }

    #[test]
    fn assignment_is_the_membership_argmax(
        seed in any::<u64>(),
        n in 1usize..60,
        c in 1usize..=5,
        d in 1usize..=4,
    ) {
        let (points, _) = random_instance(seed, n.max(c), c, d);
        let (_, centers) = random_instance(seed ^ 1, c, c, d);
        let hard = assign(points.view(), &centers).unwrap();
        for m in [1.2, 2.0, 3.0] {
            for (x, &a) in points.rows().zip(&hard) {
                let terms = membership_terms(x, &centers, m).unwrap();
                let best = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(terms.iter().position(|&t| t == best), Some(a));
            }
        }
    }

    #[test]
    fn confusion_ignores_naming(
        data in prop::collection::vec((0usize..5, 0usize..4), 1..120),
        cluster_shift in 0usize..5,
        label_shift in 0usize..4,
    ) {
        let names = ["a", "b", "c", "d"];
        let (clusters, labels): (Vec<usize>, Vec<&str>) =
            data.iter().map(|&(k, l)| (k, names[l])).unzip();
        let base = confusion_accuracy(&clusters, &labels).unwrap();

        let renamed_clusters: Vec<usize> = clusters.iter().map(|k| (k + cluster_shift) % 5).collect();
        let renamed_labels: Vec<&str> = data.iter().map(|&(_, l)| names[(l + label_shift) % 4]).collect();
        let other = confusion_accuracy(&renamed_clusters, &renamed_labels).unwrap();
        prop_assert_eq!(base.matched, other.matched);

        // Any one-to-one mapping scores no better than the best one.
        let distinct: BTreeSet<usize> = clusters.iter().copied().collect();
        if distinct.len() <= 4 {
            let guess: Vec<(usize, &str)> = distinct
                .iter()
                .enumerate()
                .map(|(j, &k)| (k, names[(j + label_shift) % 4]))
                .collect();
            let hits = clusters
                .iter()
                .zip(&labels)
                .filter(|(k, l)| guess.iter().any(|(gk, gl)| gk == *k && gl == *l))
                .count();
            prop_assert!(hits <= base.matched);
        }
    }

    #[test]
    fn confusion_beats_majority_with_spare_clusters(
        labels in prop::collection::vec(0usize..3, 1..120),
        clusters in prop::collection::vec(0usize..6, 120),
    ) {
        let clusters = &clusters[..labels.len()];
        let distinct: BTreeSet<usize> = clusters.iter().copied().collect();
        let classes: BTreeSet<usize> = labels.iter().copied().collect();
        prop_assume!(distinct.len() > classes.len());
        let largest = classes
            .iter()
            .map(|c| labels.iter().filter(|l| *l == c).count())
            .max()
            .unwrap();
        let conf = confusion_accuracy(clusters, &labels).unwrap();
        prop_assert!(conf.matched >= largest);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn partitions_cover_every_record(n in 1usize..=10_000, p in 1usize..=10_000) {
        let p = p.min(n);
        let plan = plan_partitions(n, p).unwrap();
        prop_assert_eq!(plan.partition_count(), p);
        let mut next = 0;
        for r in &plan.boundaries {
            prop_assert_eq!(r.start, next);
            prop_assert!(!r.is_empty());
            next = r.end;
        }
        prop_assert_eq!(next, n);
        let sizes = plan.sizes();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
    }
}
