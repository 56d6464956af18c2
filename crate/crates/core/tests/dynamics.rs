mod common;

use notrade::dynamics::{default_schedule, run_announcements};
use notrade::enumerate::{instance_rng, random_common_prior_instance};
use notrade::market::{run_market, ScoringRule};
use notrade::model::Event;
use notrade::rational::{self, Rational};
use notrade::AgentId;
use proptest::prelude::*;

fn states_of(event: &Event) -> common::States {
    event.iter().map(|s| s.0).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn common_priors_end_in_agreement(seed in any::<u64>()) {
        let (model, x) = random_common_prior_instance(&mut instance_rng(seed, 0), 6, 3);
        let order = default_schedule(model.frame());
        for w in model.frame().states() {
            let t = run_announcements(&model, &x, w, &order).unwrap();
            prop_assert!(t.agree);
        }
    }

    #[test]
    fn announcements_follow_the_public_information(seed in any::<u64>()) {
        let (model, x) = random_common_prior_instance(&mut instance_rng(seed, 1), 5, 3);
        let frame = model.frame();
        let order = default_schedule(frame);
        for w in frame.states() {
            let t = run_announcements(&model, &x, w, &order).unwrap();
            let mut public: common::States = (0..frame.n_states()).collect();
            for round in &t.rounds {
                let a = round.agent.0;
                let say = |v: usize| {
                    let cell: common::States = common::cell_of(frame, a, v).intersection(&public).copied().collect();
                    common::expectation(model.prior(AgentId(a)), &x, &cell)
                };
                let value = say(w.0);
                prop_assert_eq!(&round.announcement, &value);
                public = public.iter().copied().filter(|&v| say(v) == value).collect();
                prop_assert_eq!(&states_of(&round.public), &public);
            }
            prop_assert!(t.t_star <= t.rounds.len());
        }
    }

    #[test]
    fn market_prices_are_the_announcements(seed in any::<u64>()) {
        let (model, x) = random_common_prior_instance(&mut instance_rng(seed, 2), 5, 3);
        let order = default_schedule(model.frame());
        for w in model.frame().states() {
            let t = run_announcements(&model, &x, w, &order).unwrap();
            let run = run_market(&model, &x, w, &ScoringRule::Quadratic, None, &order, None).unwrap();
            for (round, trade) in t.rounds.iter().zip(&run.trades) {
                prop_assert_eq!(&round.announcement, &trade.price);
            }
            prop_assert_eq!(run.t_star, t.t_star);
            prop_assert_eq!(&run.terminal_public, t.terminal_public());
        }
    }

    #[test]
    fn payoffs_telescope(seed in any::<u64>()) {
        let (model, x) = random_common_prior_instance(&mut instance_rng(seed, 3), 5, 3);
        let order = default_schedule(model.frame());
        let log = ScoringRule::logarithmic_for(&x);
        let (a, b) = match &log {
            ScoringRule::Logarithmic { a, b } => (rational::to_f64(a), rational::to_f64(b)),
            ScoringRule::Quadratic => unreachable!(),
        };
        for w in model.frame().states() {
            let outcome = x.payoff(w).clone();
            let run = run_market(&model, &x, w, &ScoringRule::Quadratic, None, &order, None).unwrap();
            let total: Rational = run.trades.iter().map(|t| t.payoff.exact().unwrap().clone()).sum();
            prop_assert_eq!(total, common::quadratic(run.final_price(), &outcome) - common::quadratic(&run.initial, &outcome));

            let run = run_market(&model, &x, w, &log, None, &order, None).unwrap();
            let total: f64 = run.trades.iter().map(|t| t.payoff.to_f64()).sum();
            let o = rational::to_f64(&outcome);
            let expected = common::logarithmic(a, b, rational::to_f64(run.final_price()), o)
                - common::logarithmic(a, b, rational::to_f64(&run.initial), o);
            prop_assert!((total - expected).abs() < 1e-9);
        }
    }
}
