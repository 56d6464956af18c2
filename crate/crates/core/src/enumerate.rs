//! Exhaustive and randomized instance generation, and the sweeps built on it.
//!
//! Instances are produced in a fixed canonical order, so a sweep reports a
//! violation count together with the first counterexample in that order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agreement::{self, Synthesis};
use crate::dynamics::{self, CorollaryVerdict};
use crate::error::Result;
use crate::market::{self, ScoringRule};
use crate::model::{Frame, Model, Partition, Prior, Security, StateId};
use crate::multi::{self, SecurityBundle, Split};
use crate::rational::{self, Rational};

/// All partitions of `n` states, via restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Partition> {
    let mut out = Vec::new();
    let mut labels = vec![0usize; n];
    loop {
        out.push(Partition::from_labels(&labels).expect("growth string is a partition"));
        // Next restricted growth string: bump the rightmost position that may grow.
        let Some(i) = (1..n)
            .rev()
            .find(|&i| labels[i] <= labels[..i].iter().copied().max().unwrap_or(0))
        else {
            return out;
        };
        labels[i] += 1;
        labels[i + 1..].iter_mut().for_each(|l| *l = 0);
    }
}

/// Every frame with `n_agents` agents over `n_states` states, agent 0's partition varying slowest.
pub fn frames(n_states: usize, n_agents: usize) -> Vec<Frame> {
    let partitions = set_partitions(n_states);
    let mut index = vec![0usize; n_agents];
    let mut out = Vec::new();
    loop {
        let chosen = index.iter().map(|&i| partitions[i].clone()).collect();
        out.push(Frame::numbered(chosen).expect("enumerated frame is valid"));
        let Some(pos) = (0..n_agents).rev().find(|&p| index[p] + 1 < partitions.len()) else {
            return out;
        };
        index[pos] += 1;
        index[pos + 1..].iter_mut().for_each(|i| *i = 0);
    }
}

/// The security paying `1, 2, …, n`.
pub fn injective_security(n_states: usize) -> Security {
    Security::new((1..=n_states as i64).map(rational::int).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub instance: usize,
    pub partitions: Vec<Vec<Vec<String>>>,
    pub state: String,
    pub detail: String,
}

impl Counterexample {
    fn new(instance: usize, frame: &Frame, state: StateId, detail: String) -> Self {
        Counterexample {
            instance,
            partitions: frame
                .partitions()
                .iter()
                .map(|p| {
                    p.blocks()
                        .iter()
                        .map(|b| b.iter().map(|s| frame.state_name(*s).to_owned()).collect())
                        .collect()
                })
                .collect(),
            state: frame.state_name(state).to_owned(),
            detail,
        }
    }
}

/// Aggregate of a sweep: how much was checked and what failed first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SweepSummary {
    pub instances: usize,
    pub checks: usize,
    /// Checks on which the interesting side held (trade possible, agreement, ...).
    pub positives: usize,
    /// Generated cases that did not meet the check's precondition.
    pub skipped: usize,
    pub violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<Counterexample>,
}

impl SweepSummary {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn violation(&mut self, counterexample: impl FnOnce() -> Counterexample) {
        self.violations += 1;
        if self.first_violation.is_none() {
            self.first_violation = Some(counterexample());
        }
    }

    /// Adds another summary, keeping the earlier first violation.
    pub fn absorb(&mut self, other: SweepSummary) {
        self.instances += other.instances;
        self.checks += other.checks;
        self.positives += other.positives;
        self.skipped += other.skipped;
        self.violations += other.violations;
        if self.first_violation.is_none() {
            self.first_violation = other.first_violation;
        }
    }
}

/// Threshold verifiability against possible trade at every state of every frame, with `X = (1, …, n)`.
pub fn theorem_sweep(n_states: usize, n_agents: usize) -> Result<SweepSummary> {
    let security = injective_security(n_states);
    let mut summary = SweepSummary::default();
    for (instance, frame) in frames(n_states, n_agents).iter().enumerate() {
        summary.instances += 1;
        for state in frame.states() {
            let verdict = agreement::verify_theorem_on(frame, &security, state)?;
            summary.checks += 1;
            if verdict.feasibility.possible() {
                summary.positives += 1;
            }
            if !verdict.holds() {
                summary.violation(|| {
                    Counterexample::new(
                        instance,
                        frame,
                        state,
                        format!(
                            "threshold={} trade={} synthesis_confirmed={:?}",
                            verdict.threshold_verifiable(),
                            verdict.feasibility.possible(),
                            verdict.synthesis_confirmed
                        ),
                    )
                });
            }
        }
    }
    Ok(summary)
}

/// Split bundles of `security` for a two-agent frame: one per disagreement
/// that synthesis produces at some state, and one per gap between
/// consecutive payoffs in each orientation. Duplicates are dropped.
pub fn split_bundles(frame: &Frame, security: &Security) -> Result<Vec<Split>> {
    let mut expectations: Vec<Vec<Rational>> = Vec::new();
    for state in frame.states() {
        if let Synthesis::Synthesized(s) = agreement::synthesize_disagreement_priors(frame, security, state)? {
            expectations.push(s.targets);
        }
    }
    let mut values: Vec<Rational> = security.payoffs().to_vec();
    values.sort();
    values.dedup();
    for gap in values.windows(2) {
        expectations.push(vec![gap[1].clone(), gap[0].clone()]);
        expectations.push(vec![gap[0].clone(), gap[1].clone()]);
    }
    let mut out: Vec<Split> = Vec::new();
    for e in expectations {
        let split = multi::split_security(security, &e)?;
        if !out.iter().any(|s| s.bundle == split.bundle) {
            out.push(split);
        }
    }
    Ok(out)
}

/// The bundle-level equivalence on every state of every two-agent frame, over
/// split bundles of `X = (1, …, n)`. Untradable bundles are skipped and counted.
pub fn proposition_sweep(n_states: usize) -> Result<SweepSummary> {
    let security = injective_security(n_states);
    let mut summary = SweepSummary::default();
    for (instance, frame) in frames(n_states, 2).iter().enumerate() {
        summary.instances += 1;
        for split in split_bundles(frame, &security)? {
            if multi::is_tradable(frame, &split.bundle)?.is_some() {
                summary.skipped += 1;
                continue;
            }
            summary.absorb(proposition_checks(instance, frame, &split.bundle)?);
        }
    }
    Ok(summary)
}

/// Checks the bundle-level equivalence at every state of one frame.
pub fn proposition_checks(instance: usize, frame: &Frame, bundle: &SecurityBundle) -> Result<SweepSummary> {
    let mut summary = SweepSummary::default();
    for state in frame.states() {
        let verdict = multi::verify_proposition_on(frame, bundle, state)?;
        summary.checks += 1;
        if verdict.trade_possible() {
            summary.positives += 1;
        }
        if !verdict.holds() {
            let prices: Vec<String> = bundle
                .securities()
                .iter()
                .map(|s| format!("{:?}", s.payoffs()))
                .collect();
            summary.violation(|| {
                Counterexample::new(
                    instance,
                    frame,
                    state,
                    format!(
                        "bundle={} threshold={} trade={} synthesis_confirmed={:?}",
                        prices.join(";"),
                        verdict.threshold_verifiable(),
                        verdict.trade_possible(),
                        verdict.synthesis_confirmed
                    ),
                )
            });
        }
    }
    Ok(summary)
}

/// A random frame over `2..=max_states` states with `1..=max_agents` agents.
pub fn random_frame<R: Rng>(rng: &mut R, max_states: usize, max_agents: usize) -> Frame {
    let n = rng.random_range(2..=max_states.max(2));
    let agents = rng.random_range(1..=max_agents.max(1));
    let partitions = (0..agents)
        .map(|_| {
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            Partition::from_labels(&labels).expect("labels define a partition")
        })
        .collect();
    Frame::numbered(partitions).expect("random frame is valid")
}

/// A random rational in `[-6, 6]` with denominator at most 3.
pub fn random_rational<R: Rng>(rng: &mut R) -> Rational {
    let den = rng.random_range(1..=3i64);
    rational::ratio(rng.random_range(-6 * den..=6 * den), den)
}

pub fn random_security<R: Rng>(rng: &mut R, n_states: usize) -> Security {
    Security::new((0..n_states).map(|_| random_rational(rng)).collect())
}

/// A random model with a common prior and a random security.
pub fn random_common_prior_instance<R: Rng>(rng: &mut R, max_states: usize, max_agents: usize) -> (Model, Security) {
    let frame = random_frame(rng, max_states, max_agents);
    let n = frame.n_states();
    let prior = agreement::random_prior(n, rng);
    let security = random_security(rng, n);
    let model = Model::with_common_prior(frame, prior).expect("common prior fits the frame");
    (model, security)
}

/// A distribution over `1..=max_values` distinct values in `[-6, 6]`.
pub fn random_distribution<R: Rng>(rng: &mut R, max_values: usize) -> (Vec<Rational>, Vec<Rational>) {
    let k = rng.random_range(1..=max_values.max(1));
    let mut values: Vec<Rational> = Vec::with_capacity(k);
    while values.len() < k {
        let v = random_rational(rng);
        if !values.contains(&v) {
            values.push(v);
        }
    }
    let prior: Prior = agreement::random_prior(k, rng);
    (values, prior.masses().to_vec())
}

/// Deterministic generator for sweep instance `index` under `seed`.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Agreement at the end of the announcements, on `count` random common-prior models at every state.
pub fn common_prior_agreement_sweep(count: usize, seed: u64) -> Result<SweepSummary> {
    let mut summary = SweepSummary::default();
    for index in 0..count {
        let mut rng = instance_rng(seed, index as u64);
        let (model, security) = random_common_prior_instance(&mut rng, 6, 3);
        let order = dynamics::default_schedule(model.frame());
        summary.instances += 1;
        for state in model.frame().states() {
            let transcript = dynamics::run_announcements(&model, &security, state, &order)?;
            summary.checks += 1;
            if transcript.agree {
                summary.positives += 1;
            } else {
                summary.violation(|| {
                    Counterexample::new(
                        index,
                        model.frame(),
                        state,
                        format!("final expectations {:?}", transcript.final_expectations),
                    )
                });
            }
        }
    }
    Ok(summary)
}

/// Both corollaries at every state of one model under the default schedule and the given rule.
pub fn corollary_checks(
    instance: usize,
    model: &Model,
    security: &Security,
    rule: &ScoringRule,
) -> Result<SweepSummary> {
    let frame = model.frame();
    let order = dynamics::default_schedule(frame);
    let mut summary = SweepSummary::default();
    for state in frame.states() {
        let agreement = dynamics::check_corollary1(model, security, state, &order)?;
        let aggregation = market::check_corollary2(model, security, state, rule, &order)?;
        summary.checks += 1;
        if agreement.verdict == CorollaryVerdict::Pass {
            summary.positives += 1;
        }
        let failed = [agreement.verdict, aggregation.verdict].contains(&CorollaryVerdict::Violation);
        if failed {
            summary.violation(|| {
                Counterexample::new(
                    instance,
                    frame,
                    state,
                    format!(
                        "agreement {:?}, aggregation {:?}",
                        agreement.verdict, aggregation.verdict
                    ),
                )
            });
        }
    }
    Ok(summary)
}
