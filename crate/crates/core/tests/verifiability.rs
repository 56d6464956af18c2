mod common;

use notrade::enumerate::{frames, injective_security, instance_rng, random_frame, random_security};
use notrade::verifiability::{
    is_collectively_verifiable, is_maxmin_verifiable, is_threshold_verifiable, is_verifiable, maxmin_everywhere,
    threshold_everywhere,
};
use notrade::{Model, Prior, Security};
use proptest::prelude::*;

fn payoffs(frame_states: usize, values: &[i64]) -> Security {
    Security::from_ints(&values[..frame_states])
}

#[test]
fn threshold_agrees_with_the_pair_scan() {
    for n in 1..=4 {
        let x = injective_security(n);
        for frame in frames(n, 2) {
            for w in frame.states() {
                let fast = is_threshold_verifiable(&frame, &x, w).unwrap().is_some();
                assert_eq!(fast, common::threshold_by_pairs(&frame, &x, w.0));
            }
        }
    }
}

#[test]
fn threshold_agrees_with_the_pair_scan_on_repeated_payoffs() {
    let x = Security::from_ints(&[2, 1, 2, 1]);
    for frame in frames(4, 2) {
        for w in frame.states() {
            let fast = is_threshold_verifiable(&frame, &x, w).unwrap().is_some();
            assert_eq!(fast, common::threshold_by_pairs(&frame, &x, w.0));
        }
    }
}

#[test]
fn implication_chain_for_injective_payoffs() {
    for n in 1..=4 {
        let x = injective_security(n);
        for frame in frames(n, 2) {
            let verifiable = is_verifiable(&frame, &x).unwrap().holds;
            let maxmin = maxmin_everywhere(&frame, &x).unwrap().holds;
            let threshold = threshold_everywhere(&frame, &x).unwrap().holds;
            assert!(!verifiable || maxmin);
            assert!(!maxmin || threshold);
        }
    }
}

#[test]
fn witnesses_validate() {
    let x = injective_security(4);
    for frame in frames(4, 2) {
        for check in [
            is_verifiable(&frame, &x).unwrap(),
            is_collectively_verifiable(&frame, &x).unwrap(),
            maxmin_everywhere(&frame, &x).unwrap(),
            threshold_everywhere(&frame, &x).unwrap(),
        ] {
            assert!(check.witnesses.iter().all(|w| w.validate(&frame, &x)));
        }
    }
}

#[test]
fn verdicts_ignore_priors() {
    // The checks take a frame; two models differing only in priors share it.
    let x = injective_security(4);
    for frame in frames(4, 2).into_iter().step_by(7) {
        let a = Model::with_common_prior(frame.clone(), Prior::uniform(4)).unwrap();
        let skewed = Prior::from_weights([1, 2, 3, 4].map(notrade::rational::int).to_vec()).unwrap();
        let b = Model::new(frame.clone(), vec![skewed.clone(), Prior::uniform(4)]).unwrap();
        for w in frame.states() {
            assert_eq!(
                is_threshold_verifiable(a.frame(), &x, w).unwrap(),
                is_threshold_verifiable(b.frame(), &x, w).unwrap()
            );
            assert_eq!(
                is_maxmin_verifiable(a.frame(), &x, w).unwrap(),
                is_maxmin_verifiable(b.frame(), &x, w).unwrap()
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn random_witnesses_validate(seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let frame = random_frame(&mut rng, 6, 3);
        let x = random_security(&mut rng, frame.n_states());
        for w in frame.states() {
            if let Some(witness) = is_threshold_verifiable(&frame, &x, w).unwrap() {
                prop_assert!(witness.validate(&frame, &x));
            }
            if let Some(witness) = is_maxmin_verifiable(&frame, &x, w).unwrap() {
                prop_assert!(witness.validate(&frame, &x));
            }
            prop_assert_eq!(
                is_threshold_verifiable(&frame, &x, w).unwrap().is_some(),
                common::threshold_by_pairs(&frame, &x, w.0)
            );
        }
    }

    #[test]
    fn relabelled_payoffs_keep_threshold_verdicts(values in proptest::collection::vec(-5i64..5, 4)) {
        // Adding a constant or scaling by a positive factor preserves every threshold.
        let x = payoffs(4, &values);
        let shifted = x.shift(&notrade::rational::int(7));
        let scaled = Security::new(x.payoffs().iter().map(|v| v * notrade::rational::int(3)).collect());
        for frame in frames(4, 2).into_iter().step_by(11) {
            for w in frame.states() {
                let base = is_threshold_verifiable(&frame, &x, w).unwrap().is_some();
                prop_assert_eq!(base, is_threshold_verifiable(&frame, &shifted, w).unwrap().is_some());
                prop_assert_eq!(base, is_threshold_verifiable(&frame, &scaled, w).unwrap().is_some());
                prop_assert_eq!(base, is_threshold_verifiable(&frame, &x.negate(), w).unwrap().is_some());
            }
        }
    }
}
