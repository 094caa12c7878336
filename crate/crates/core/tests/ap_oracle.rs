//! Average precision checked bit-for-bit against brute-force threshold
//! enumeration, with tie-heavy score distributions.

mod common;

use auditfl::eval::average_precision;
use common::ap_threshold_enumeration;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Random scored set of size 2..=64 with at least one positive and one
/// negative. Scores mix a coarse grid (forcing ties) with continuous draws.
fn random_set(rng: &mut ChaCha12Rng) -> (Vec<f64>, Vec<bool>) {
    let n = rng.gen_range(2..=64usize);
    loop {
        let gridded = rng.gen::<f64>() < 0.5;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if gridded {
                    // 5-level grid: heavy ties, including across labels.
                    (rng.gen_range(0..5) as f64) / 4.0
                } else if rng.gen::<f64>() < 0.3 {
                    rng.gen_range(0..3) as f64
                } else {
                    rng.gen::<f64>()
                }
            })
            .collect();
        let positive: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < 0.3).collect();
        let pos = positive.iter().filter(|&&p| p).count();
        if pos > 0 && pos < n {
            return (scores, positive);
        }
    }
}

#[test]
fn matches_brute_force_enumeration_on_1000_sets() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xa9_0bac1e);
    for case in 0..1000 {
        let (scores, positive) = random_set(&mut rng);
        let fast = average_precision(&scores, &positive).unwrap();
        let slow = ap_threshold_enumeration(&scores, &positive);
        assert_eq!(
            fast, slow,
            "case {}: sweep {} vs enumeration {} on {:?} / {:?}",
            case, fast, slow, scores, positive
        );
    }
}

#[test]
fn hand_worked_three_sample_case() {
    let ap = average_precision(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap();
    assert!((ap - 0.8333333333333333).abs() <= 1e-9, "ap = {}", ap);
}

#[test]
fn all_tied_scores_collapse_to_prevalence() {
    let scores = vec![0.5; 10];
    let mut positive = vec![false; 10];
    positive[3] = true;
    positive[7] = true;
    let fast = average_precision(&scores, &positive).unwrap();
    let slow = ap_threshold_enumeration(&scores, &positive);
    assert_eq!(fast, slow);
    assert_eq!(fast, 0.2);
}
