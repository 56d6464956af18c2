use notrade::enumerate::{instance_rng, random_common_prior_instance, random_security};
use notrade::io::{parse_model, DiagnosticCode, ModelDocument};
use notrade::{fixtures, Model};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn documents_round_trip(seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let (common, x) = random_common_prior_instance(&mut rng, 6, 3);
        let frame = common.frame().clone();
        let priors = frame.agents().map(|_| notrade::agreement::random_prior(frame.n_states(), &mut rng)).collect();
        let model = Model::new(frame.clone(), priors).unwrap();
        let y = random_security(&mut rng, frame.n_states());
        let doc = ModelDocument::from_model(&model, [("X", &x), ("Y", &y)]);
        let text = doc.to_json();
        let parsed = parse_model(&text).unwrap();
        prop_assert_eq!(&parsed, &doc);
        prop_assert_eq!(parsed.to_json(), text);
        prop_assert_eq!(parsed.model().unwrap(), model);
        prop_assert_eq!(parsed.security("Y").unwrap(), y);
    }

    #[test]
    fn perturbed_priors_are_rejected_with_a_position(seed in any::<u64>()) {
        let (model, x) = random_common_prior_instance(&mut instance_rng(seed, 1), 6, 3);
        let mut doc = ModelDocument::from_model(&model, [("X", &x)]);
        let first_agent = doc.agents[0].clone();
        let first_state = doc.states[0].clone();
        let entry = doc.priors.get_mut(&first_agent).unwrap().get_mut(&first_state).unwrap();
        entry.0 += notrade::rational::ratio(1, 7);
        let diags = parse_model(&doc.to_json()).unwrap_err();
        prop_assert!(diags.iter().any(|d| d.code == DiagnosticCode::PriorNotNormalized && d.line > 1));
    }
}

#[test]
fn fixtures_are_canonical() {
    for text in [fixtures::E1_JSON, fixtures::E2_JSON] {
        let doc = parse_model(text).unwrap();
        assert_eq!(parse_model(&doc.to_json()).unwrap(), doc);
    }
}
