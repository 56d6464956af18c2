//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use notrade::agreement::{self, detect_ck_trade, synthesize_disagreement_priors, verify_theorem_on, Synthesis};
use notrade::dynamics::{default_schedule, run_announcements};
use notrade::enumerate::{
    frames, injective_security, instance_rng, random_common_prior_instance, random_distribution, split_bundles,
};
use notrade::market::{properness_probe, run_market, ScoringRule, Terminal};
use notrade::multi::{is_threshold_verifiable_multi, is_tradable, verify_proposition_on, SecurityBundle};
use notrade::rational::{self, int, ratio, Rational};
use notrade::verifiability::{is_collectively_verifiable, is_maxmin_verifiable, is_threshold_verifiable};
use notrade::{fixtures, AgentId, Frame, Model, Prior, Security, StateId};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, Option<Duration>, fn() -> Outcome);

fn ensure(condition: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if condition {
        Ok(())
    } else {
        Err(message())
    }
}

fn e1() -> Outcome {
    let e1 = fixtures::e1();
    let frame = e1.model.frame();
    let x = &e1.security;
    for w in frame.states() {
        let report = detect_ck_trade(&e1.model, x, w).map_err(|e| e.to_string())?;
        let expected = vec![ratio(-1, 3), ratio(1, 3)];
        let oracle = common::ck_trade(&e1.model, x, w.0);
        ensure(oracle.as_ref() == Some(&expected), || {
            format!("oracle disagrees at {w}: {oracle:?}")
        })?;
        ensure(report.as_ref().map(|r| &r.expectations) == Some(&expected), || {
            format!("no trade detected at {w}")
        })?;
        let threshold = is_threshold_verifiable(frame, x, w).map_err(|e| e.to_string())?;
        ensure(
            threshold.is_none() && !common::threshold_by_pairs(frame, x, w.0),
            || format!("threshold verifiable at {w}"),
        )?;
    }
    let collective = is_collectively_verifiable(frame, x).map_err(|e| e.to_string())?;
    ensure(collective.holds, || "not collectively verifiable".into())?;
    Ok("trade (-1/3, 1/3) at all 4 states".into())
}

fn e2() -> Outcome {
    let e2 = fixtures::e2();
    let model = &e2.model;
    let frame = model.frame();
    let x = &e2.security;
    let order = default_schedule(frame);
    let t = run_announcements(model, x, StateId(0), &order).map_err(|e| e.to_string())?;
    let said: Vec<(AgentId, Rational)> = t
        .rounds
        .iter()
        .take(2)
        .map(|r| (r.agent, r.announcement.clone()))
        .collect();
    ensure(
        said == vec![(AgentId(0), ratio(-1, 3)), (AgentId(1), ratio(1, 3))],
        || format!("announcements {said:?}"),
    )?;
    // Oracle: agent 1's cell {w1, w2} and agent 2's cell {w1, w3, w4} after w5 is ruled out.
    let first = common::expectation(model.prior(AgentId(0)), x, &[0, 1].into());
    let second = common::expectation(model.prior(AgentId(1)), x, &[0, 2].into());
    ensure(first == ratio(-1, 3) && second == ratio(1, 3), || {
        "oracle announcements differ".into()
    })?;
    ensure(t.t_star == 2 && !t.agree, || {
        format!("t* = {}, agree = {}", t.t_star, t.agree)
    })?;

    let t5 = run_announcements(model, x, StateId(4), &order).map_err(|e| e.to_string())?;
    ensure(t5.rounds.iter().take(2).all(|r| r.announcement == int(5)), || {
        "w5 announcements are not 5".into()
    })?;
    let run =
        run_market(model, x, StateId(4), &ScoringRule::Quadratic, None, &order, None).map_err(|e| e.to_string())?;
    ensure(
        run.aggregated && run.terminal == Terminal::Constant { price: int(5) },
        || format!("w5 market terminal {:?}", run.terminal),
    )?;
    for w in frame.states() {
        ensure(
            is_maxmin_verifiable(frame, x, w).map_err(|e| e.to_string())?.is_some(),
            || format!("not maxmin verifiable at {w}"),
        )?;
    }
    Ok("w1 disagrees at t*=2, w5 aggregates at 5".into())
}

fn theorem() -> Outcome {
    let mut checks = 0;
    let mut instances = 0;
    for n in 2..=4 {
        let x = injective_security(n);
        let all = frames(n, 2);
        instances += all.len();
        for frame in &all {
            for w in frame.states() {
                checks += 1;
                let v = verify_theorem_on(frame, &x, w).map_err(|e| e.to_string())?;
                let threshold = common::threshold_by_pairs(frame, &x, w.0);
                ensure(threshold == v.threshold_verifiable(), || {
                    format!("threshold oracle differs at {w} in {frame:?}")
                })?;
                ensure(threshold != v.feasibility.possible(), || {
                    format!("XOR fails at {w} in {frame:?}")
                })?;
                if v.feasibility.possible() {
                    let s = v.synthesis.as_ref().ok_or("trade possible but nothing synthesized")?;
                    let model = Model::new(frame.clone(), s.priors.clone()).map_err(|e| e.to_string())?;
                    let oracle = common::ck_trade(&model, &x, w.0);
                    ensure(oracle.as_ref() == Some(&s.targets), || {
                        format!("synthesis not confirmed at {w}")
                    })?;
                    ensure(
                        detect_ck_trade(&model, &x, w).map_err(|e| e.to_string())?.is_some(),
                        || "detector misses synthesized trade".into(),
                    )?;
                }
            }
        }
    }
    Ok(format!("{instances} frames, {checks} state checks, 0 violations"))
}

fn synthesis_regression() -> Outcome {
    let e1 = fixtures::e1();
    let frame = e1.model.frame();
    let x = &e1.security;
    let Synthesis::Synthesized(s) = synthesize_disagreement_priors(frame, x, StateId(0)).map_err(|e| e.to_string())?
    else {
        return Err("no priors synthesized".into());
    };
    // Oracle: each two-state cell {lo, hi} with target k puts (k - lo)/(hi - lo) on the high state, cells weighted 1/2.
    let mut oracle = Vec::new();
    for (agent, k) in [(0usize, ratio(-1, 3)), (1, ratio(1, 3))] {
        let mut mass = vec![rational::zero(); 4];
        for block in frame.partition(AgentId(agent)).blocks() {
            let (a, b) = (block[0], block[1]);
            let (va, vb) = (x.payoff(a).clone(), x.payoff(b).clone());
            let on_b = (&k - &va) / (&vb - &va);
            mass[b.0] = &on_b * ratio(1, 2);
            mass[a.0] = (rational::one() - on_b) * ratio(1, 2);
        }
        oracle.push(mass);
    }
    let expected = [
        vec![ratio(1, 6), ratio(1, 3), ratio(1, 3), ratio(1, 6)],
        vec![ratio(1, 3), ratio(1, 6), ratio(1, 6), ratio(1, 3)],
    ];
    for agent in 0..2 {
        let got = s.priors[agent].masses();
        ensure(
            got == oracle[agent].as_slice() && got == expected[agent].as_slice(),
            || format!("agent {} prior {:?}", agent + 1, got),
        )?;
    }
    ensure(s.targets == vec![ratio(-1, 3), ratio(1, 3)], || {
        format!("targets {:?}", s.targets)
    })?;
    Ok("p1 = (1/6, 1/3, 1/3, 1/6), p2 = (1/3, 1/6, 1/6, 1/3)".into())
}

fn random_models() -> Vec<(Model, Security)> {
    (0..500u64)
        .map(|i| random_common_prior_instance(&mut instance_rng(2024, i), 6, 3))
        .collect()
}

fn agreement_under_common_priors() -> Outcome {
    let mut runs = 0;
    for (model, x) in random_models() {
        let frame = model.frame();
        let order = default_schedule(frame);
        for w in frame.states() {
            runs += 1;
            let t = run_announcements(&model, &x, w, &order).map_err(|e| e.to_string())?;
            let public: common::States = t.terminal_public().iter().map(|s| s.0).collect();
            // Oracle: every agent's expectation given its cell and the terminal public information.
            let finals: Vec<Rational> = frame
                .agents()
                .map(|a| {
                    let cell = common::cell_of(frame, a.0, w.0)
                        .intersection(&public)
                        .copied()
                        .collect();
                    common::expectation(model.prior(a), &x, &cell)
                })
                .collect();
            ensure(finals.windows(2).all(|p| p[0] == p[1]) && t.agree, || {
                format!("disagreement at {w}: {finals:?}")
            })?;
        }
    }
    Ok(format!("500 models, {runs} runs agree"))
}

fn properness() -> Outcome {
    let step = ratio(1, 1000);
    for i in 0..100u64 {
        let (values, probabilities) = random_distribution(&mut instance_rng(77, i), 6);
        let mean: Rational = values.iter().zip(&probabilities).map(|(v, p)| v * p).sum();
        let min = values.iter().min().expect("values").clone();
        let max = values.iter().max().expect("values").clone();
        let log = ScoringRule::Logarithmic {
            a: &min - int(1),
            b: &max + int(1),
        };
        for rule in [ScoringRule::Quadratic, log] {
            let best = properness_probe(&rule, &values, &probabilities, &step).map_err(|e| e.to_string())?;
            let gap = if best > mean { &best - &mean } else { &mean - &best };
            ensure(gap <= step, || format!("{rule}: argmax {best} vs mean {mean}"))?;
        }
    }
    Ok("100 distributions, both rules within 1/1000".into())
}

/// Market and announcement runs used by the telescoping and corollary criteria.
fn suite_models() -> Vec<(Model, Security)> {
    let mut out = Vec::new();
    for f in [fixtures::e1(), fixtures::e2()] {
        out.push((f.model, f.security));
    }
    for n in 2..=4 {
        let x = injective_security(n);
        for (i, frame) in frames(n, 2).into_iter().enumerate() {
            out.push((
                Model::with_common_prior(frame.clone(), Prior::uniform(n)).expect("uniform"),
                x.clone(),
            ));
            let mut rng = instance_rng(99, (n * 1000 + i) as u64);
            let priors = (0..2).map(|_| agreement::random_prior(n, &mut rng)).collect();
            out.push((Model::new(frame.clone(), priors).expect("random priors"), x.clone()));
            if let Ok(Synthesis::Synthesized(s)) = synthesize_disagreement_priors(&frame, &x, StateId(0)) {
                out.push((Model::new(frame, s.priors).expect("synthesized priors"), x.clone()));
            }
        }
    }
    out.extend(random_models());
    out
}

fn rules_for(x: &Security) -> [ScoringRule; 2] {
    [ScoringRule::Quadratic, ScoringRule::logarithmic_for(x)]
}

fn telescoping() -> Outcome {
    let mut runs = 0;
    for (model, x) in suite_models() {
        let order = default_schedule(model.frame());
        for w in model.frame().states() {
            let outcome = x.payoff(w).clone();
            for rule in rules_for(&x) {
                runs += 1;
                let run = run_market(&model, &x, w, &rule, None, &order, None).map_err(|e| e.to_string())?;
                match &rule {
                    ScoringRule::Quadratic => {
                        let total: Rational = run
                            .trades
                            .iter()
                            .map(|t| t.payoff.exact().expect("exact").clone())
                            .sum();
                        let expected =
                            common::quadratic(run.final_price(), &outcome) - common::quadratic(&run.initial, &outcome);
                        ensure(total == expected, || format!("quadratic sum {total} vs {expected}"))?;
                    }
                    ScoringRule::Logarithmic { a, b } => {
                        let (a, b, o) = (rational::to_f64(a), rational::to_f64(b), rational::to_f64(&outcome));
                        let total: f64 = run.trades.iter().map(|t| t.payoff.to_f64()).sum();
                        let expected = common::logarithmic(a, b, rational::to_f64(run.final_price()), o)
                            - common::logarithmic(a, b, rational::to_f64(&run.initial), o);
                        ensure((total - expected).abs() <= 1e-9, || {
                            format!("log sum {total} vs {expected}")
                        })?;
                    }
                }
            }
        }
    }
    Ok(format!("{runs} market runs"))
}

fn corollaries() -> Outcome {
    let (mut runs, mut hypotheses) = (0, 0);
    for (model, x) in suite_models() {
        let frame: &Frame = model.frame();
        let order = default_schedule(frame);
        for w in frame.states() {
            runs += 1;
            let t = run_announcements(&model, &x, w, &order).map_err(|e| e.to_string())?;
            let public: common::States = t.terminal_public().iter().map(|s| s.0).collect();
            let threshold = common::threshold_on_public(frame, &x, &public, w.0);
            let library = notrade::dynamics::terminal_threshold(frame, &x, t.terminal_public(), w)
                .map_err(|e| e.to_string())?
                .is_some();
            ensure(threshold == library, || {
                format!("terminal threshold oracle differs at {w}")
            })?;
            if !threshold {
                continue;
            }
            hypotheses += 1;
            ensure(t.agree, || format!("threshold verifiable but no agreement at {w}"))?;
            for rule in rules_for(&x) {
                let run = run_market(&model, &x, w, &rule, None, &order, None).map_err(|e| e.to_string())?;
                let expected = Terminal::Constant {
                    price: x.payoff(w).clone(),
                };
                ensure(run.terminal == expected && run.final_price() == x.payoff(w), || {
                    format!("{rule}: terminal {:?} at {w}, payoff {}", run.terminal, x.payoff(w))
                })?;
            }
        }
    }
    Ok(format!(
        "{runs} runs, {hypotheses} with threshold verifiability at the fixed point"
    ))
}

fn bundle_threshold_by_pairs(frame: &Frame, bundle: &SecurityBundle, state: usize) -> bool {
    let component = common::reach_by_subsets(frame, state);
    let constant = frame.agents().all(|a| {
        let x = bundle.security(a);
        component
            .iter()
            .all(|&w| x.payoff(StateId(w)) == x.payoff(StateId(state)))
    });
    constant
        || frame.agents().any(|a| {
            let x = bundle.security(a);
            component.iter().any(|&p| {
                component.iter().any(|&q| {
                    common::max_on(x, &common::cell_of(frame, a.0, p))
                        < common::min_on(x, &common::cell_of(frame, a.0, q))
                })
            })
        })
}

fn proposition_on(frame: &Frame, bundle: &SecurityBundle) -> Result<usize, String> {
    let mut checks = 0;
    for w in frame.states() {
        checks += 1;
        let v = verify_proposition_on(frame, bundle, w).map_err(|e| e.to_string())?;
        let threshold = bundle_threshold_by_pairs(frame, bundle, w.0);
        let fast = is_threshold_verifiable_multi(frame, bundle, w)
            .map_err(|e| e.to_string())?
            .is_some();
        ensure(threshold == fast && threshold == v.threshold_verifiable(), || {
            format!("bundle threshold oracle differs at {w}")
        })?;
        ensure(threshold != v.trade_possible(), || {
            format!("XOR fails at {w} in {frame:?} for {bundle:?}")
        })?;
        if v.trade_possible() {
            let s = v.synthesis.as_ref().ok_or("trade possible but nothing synthesized")?;
            let model = Model::new(frame.clone(), s.priors.clone()).map_err(|e| e.to_string())?;
            let profits = common::constant_expectations(&model, &bundle.securities(), w.0);
            ensure(
                profits
                    .as_ref()
                    .is_some_and(|p| p.iter().all(rational::is_positive) && p == &s.targets),
                || format!("synthesized bundle priors fail at {w}: {profits:?}"),
            )?;
        }
    }
    Ok(checks)
}

fn proposition() -> Outcome {
    let (mut bundles, mut skipped, mut checks) = (0, 0, 0);
    for n in 2..=4 {
        let x = injective_security(n);
        for frame in frames(n, 2) {
            for split in split_bundles(&frame, &x).map_err(|e| e.to_string())? {
                if is_tradable(&frame, &split.bundle).map_err(|e| e.to_string())?.is_some() {
                    skipped += 1;
                    continue;
                }
                bundles += 1;
                checks += proposition_on(&frame, &split.bundle)?;
            }
        }
    }
    let e1 = fixtures::e1();
    let bundle = SecurityBundle::new(vec![e1.security.negate(), e1.security.clone()]);
    ensure(
        is_tradable(e1.model.frame(), &bundle)
            .map_err(|e| e.to_string())?
            .is_none(),
        || "fixture e1 bundle not tradable".into(),
    )?;
    checks += proposition_on(e1.model.frame(), &bundle)?;
    Ok(format!(
        "{} bundles, {checks} state checks, {skipped} untradable splits skipped",
        bundles + 1
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "fixture e1 reproduction", Some(Duration::from_secs(1)), e1),
        (2, "fixture e2 reproduction", Some(Duration::from_secs(1)), e2),
        (
            3,
            "threshold verifiability iff no possible trade",
            Some(Duration::from_secs(60)),
            theorem,
        ),
        (4, "synthesis regression", None, synthesis_regression),
        (
            5,
            "agreement under common priors",
            Some(Duration::from_secs(30)),
            agreement_under_common_priors,
        ),
        (6, "strict properness probe", None, properness),
        (7, "telescoping payoffs", None, telescoping),
        (8, "agreement and aggregation corollaries", None, corollaries),
        (
            9,
            "bundle-level equivalence",
            Some(Duration::from_secs(60)),
            proposition,
        ),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()))
            .and_then(|detail| match limit {
                Some(limit) if start.elapsed() > limit => Err(format!("took {:.2?}, limit {limit:?}", start.elapsed())),
                _ => Ok(detail),
            });
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {id} [{name}]: PASS ({elapsed:.2?}; {detail})"),
            Err(reason) => {
                failed += 1;
                println!("criterion {id} [{name}]: FAIL ({elapsed:.2?}; {reason})");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
