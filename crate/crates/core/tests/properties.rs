//! Property-based invariants: identities that must hold for every input,
//! not just hand-picked cases.

mod common;

use auditfl::dataset::{gen_synthetic_normal, inject_synthetic_anomalies, AnomalySpec, Label};
use auditfl::eval::{aggregate_runs, average_precision, ApTriple};
use auditfl::numerics::{pca_fit, pinv, Matrix};
use auditfl::partition::{assign_iid, assign_noniid_kmeans};
use auditfl::seeding;
use common::mean_std_two_pass;
use proptest::prelude::*;

/// Small dense matrix with entries in [-10, 10].
fn small_matrix() -> impl Strategy<Value = Matrix> {
    (1usize..=8, 1usize..=8).prop_flat_map(|(r, c)| {
        proptest::collection::vec(-10.0f64..10.0, r * c)
            .prop_map(move |data| Matrix::from_vec(r, c, data).unwrap())
    })
}

/// Scores plus labels with at least one positive and one negative; scores
/// are drawn from a small integer grid half the time to exercise ties.
fn scored_set() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..=48, any::<bool>())
        .prop_flat_map(|(n, gridded)| {
            let score = if gridded {
                (0i32..4).prop_map(|v| v as f64 / 3.0).boxed()
            } else {
                (-5.0f64..5.0).boxed()
            };
            (
                proptest::collection::vec(score, n),
                proptest::collection::vec(any::<bool>(), n),
            )
        })
        .prop_filter("need both classes", |(_, positive)| {
            positive.iter().any(|&p| p) && positive.iter().any(|&p| !p)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pseudoinverse_penrose_identities(a in small_matrix()) {
        let x = pinv(&a);
        let axa = a.matmul(&x).unwrap().matmul(&a).unwrap();
        let xax = x.matmul(&a).unwrap().matmul(&x).unwrap();
        let scale = a.frob_norm().max(1.0);
        prop_assert!(axa.sub(&a).unwrap().frob_norm() / scale < 1e-8);
        prop_assert!(xax.sub(&x).unwrap().frob_norm() / x.frob_norm().max(1e-12) < 1e-8);
        let ax = a.matmul(&x).unwrap();
        prop_assert!(ax.sub(&ax.transpose()).unwrap().frob_norm() < 1e-8 * scale.max(1.0));
        let xa = x.matmul(&a).unwrap();
        prop_assert!(xa.sub(&xa.transpose()).unwrap().frob_norm() < 1e-8 * scale.max(1.0));
    }

    #[test]
    fn ap_stays_within_the_unit_interval((scores, positive) in scored_set()) {
        let ap = average_precision(&scores, &positive).unwrap();
        prop_assert!((0.0..=1.0).contains(&ap), "ap = {}", ap);
        // The sweep must end at full recall, so AP is at least the final
        // precision contribution and never NaN.
        prop_assert!(ap.is_finite());
    }

    #[test]
    fn ap_is_invariant_under_strictly_increasing_transforms(
        (scores, positive) in scored_set(),
        a in 0.1f64..10.0,
        b in -5.0f64..5.0,
    ) {
        let base = average_precision(&scores, &positive).unwrap();
        let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        prop_assert_eq!(average_precision(&affine, &positive).unwrap(), base);
        // atan is strictly increasing and nonlinear.
        let warped: Vec<f64> = scores.iter().map(|s| s.atan()).collect();
        prop_assert_eq!(average_precision(&warped, &positive).unwrap(), base);
    }

    #[test]
    fn ap_is_invariant_under_joint_permutation(
        (scores, positive) in scored_set(),
        seed in any::<u64>(),
    ) {
        let base = average_precision(&scores, &positive).unwrap();
        let n = scores.len();
        // Fisher-Yates driven by the seed.
        let mut order: Vec<usize> = (0..n).collect();
        let mut state = seed | 1;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            order.swap(i, j);
        }
        let p_scores: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
        let p_pos: Vec<bool> = order.iter().map(|&i| positive[i]).collect();
        prop_assert_eq!(average_precision(&p_scores, &p_pos).unwrap(), base);
    }

    #[test]
    fn pca_explained_variance_is_nonnegative_and_sorted(
        a in (4usize..=12, 3usize..=6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-3.0f64..3.0, r * c)
                .prop_map(move |d| Matrix::from_vec(r, c, d).unwrap())
        }),
        k in 1usize..=2,
    ) {
        if let Ok(model) = pca_fit(&a, k) {
            for w in model.explained_variance.windows(2) {
                prop_assert!(w[0] >= w[1] - 1e-12);
            }
            prop_assert!(model.explained_variance.iter().all(|&v| v >= 0.0));
            // Projection keeps every sample finite and the shapes line up.
            let z = model.project(&a).unwrap();
            prop_assert_eq!((z.rows(), z.cols()), (a.rows(), k));
            prop_assert!(z.data().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn iid_assignment_is_a_disjoint_cover(
        rows in 16usize..200,
        orgs in 2usize..=9,
        seed in any::<u64>(),
    ) {
        let data = gen_synthetic_normal(rows, seed ^ 0xda7a).unwrap();
        let groups = assign_iid(&data, orgs, seed).unwrap();
        prop_assert_eq!(groups.len(), orgs);
        let mut seen = vec![false; rows];
        for g in &groups {
            for &i in g {
                prop_assert!(!seen[i], "index {} assigned twice", i);
                seen[i] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s), "some rows were never assigned");
        // Sizes within one of each other.
        let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        prop_assert!(hi - lo <= 1, "unbalanced i.i.d. split {:?}", sizes);
    }

    #[test]
    fn kmeans_assignment_is_a_disjoint_cover(
        rows in 32usize..150,
        orgs in 2usize..=5,
        seed in any::<u64>(),
    ) {
        let data = gen_synthetic_normal(rows, seed ^ 0x5eed).unwrap();
        let groups = assign_noniid_kmeans(&data, orgs, seed).unwrap();
        prop_assert_eq!(groups.len(), orgs);
        let mut seen = vec![false; rows];
        for g in &groups {
            for &i in g {
                prop_assert!(!seen[i], "index {} assigned twice", i);
                seen[i] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn generation_and_assignment_are_deterministic(
        rows in 16usize..80,
        seed in any::<u64>(),
    ) {
        let a = gen_synthetic_normal(rows, seed).unwrap();
        let b = gen_synthetic_normal(rows, seed).unwrap();
        prop_assert_eq!(a.features.data(), b.features.data());
        prop_assert_eq!(&a.labels, &b.labels);

        let ga = assign_iid(&a, 4, seed).unwrap();
        let gb = assign_iid(&b, 4, seed).unwrap();
        prop_assert_eq!(ga, gb);
    }

    #[test]
    fn injection_hits_the_requested_counts(
        rows in 40usize..120,
        ratio in 0.05f64..0.4,
        seed in any::<u64>(),
    ) {
        let test = gen_synthetic_normal(rows, seed ^ 1).unwrap();
        let spec = AnomalySpec::for_test_size(ratio, rows).unwrap();
        let injected = inject_synthetic_anomalies(&test, &spec, seed ^ 2).unwrap();
        let globals = injected.labels.iter().filter(|&&l| l == Label::Global).count();
        let locals = injected.labels.iter().filter(|&&l| l == Label::Local).count();
        prop_assert_eq!(globals, spec.n_global);
        prop_assert_eq!(locals, spec.n_local);
        prop_assert_eq!(injected.len(), rows);
    }

    #[test]
    fn run_aggregation_matches_two_pass_statistics(
        values in proptest::collection::vec(0.0f64..1.0, 1..20),
    ) {
        let triples: Vec<ApTriple> = values
            .iter()
            .map(|&v| ApTriple { ap_all: v, ap_global: None, ap_local: Some(v / 2.0) })
            .collect();
        let summary = aggregate_runs(&triples).unwrap();
        let (mean, std) = mean_std_two_pass(&values);
        prop_assert!((summary.all.mean - mean).abs() < 1e-12);
        prop_assert!((summary.all.std - std).abs() < 1e-12);
        prop_assert!(summary.global.is_none());
        prop_assert_eq!(summary.local.unwrap().n, values.len());
    }

    #[test]
    fn derived_seeds_differ_across_tags(base in any::<u64>(), tag in 1u64..1000) {
        prop_assert_ne!(seeding::derive(base, &[0]), seeding::derive(base, &[tag]));
        prop_assert_ne!(seeding::derive(base, &[tag]), seeding::derive(base, &[tag, tag]));
    }
}
