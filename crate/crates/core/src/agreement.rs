//! Static no-trade analysis.
//!
//! [`detect_ck_trade`] checks a concrete model. [`feasible_expectations`] and
//! [`ck_trade_possible`] answer, from partitions alone, whether *some* priors
//! produce common-knowledge trade, and [`synthesize_disagreement_priors`]
//! builds such priors explicitly.
//!
//! An agent can hold a constant expectation `k` across its cells in `C(ω)`
//! exactly when every cell admits a full-support posterior with mean `k`:
//! a cell with a single payoff `v` forces `k = v`, any other cell allows
//! exactly the open interval `(min, max)` of its payoffs.

use std::fmt;

use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AgentId, Event, Frame, Model, Prior, Security, StateId};
use crate::rational::{self, Rational};
use crate::verifiability::{self, Witness};

/// An interval of rationals with open or closed ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Interval {
    #[serde(with = "rational::as_string")]
    pub lower: Rational,
    #[serde(with = "rational::as_string")]
    pub upper: Rational,
    pub lower_open: bool,
    pub upper_open: bool,
}

impl Interval {
    pub fn point(value: Rational) -> Self {
        Interval {
            lower: value.clone(),
            upper: value,
            lower_open: false,
            upper_open: false,
        }
    }

    pub fn open(lower: Rational, upper: Rational) -> Self {
        Interval {
            lower,
            upper,
            lower_open: true,
            upper_open: true,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lower > self.upper || (self.lower == self.upper && (self.lower_open || self.upper_open))
    }

    pub fn is_point(&self) -> bool {
        !self.is_empty() && self.lower == self.upper
    }

    pub fn contains(&self, value: &Rational) -> bool {
        let above = if self.lower_open {
            value > &self.lower
        } else {
            value >= &self.lower
        };
        let below = if self.upper_open {
            value < &self.upper
        } else {
            value <= &self.upper
        };
        above && below
    }

    /// Intersection, or `None` when it is empty.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let (lower, lower_open) = match self.lower.cmp(&other.lower) {
            std::cmp::Ordering::Greater => (self.lower.clone(), self.lower_open),
            std::cmp::Ordering::Less => (other.lower.clone(), other.lower_open),
            std::cmp::Ordering::Equal => (self.lower.clone(), self.lower_open || other.lower_open),
        };
        let (upper, upper_open) = match self.upper.cmp(&other.upper) {
            std::cmp::Ordering::Less => (self.upper.clone(), self.upper_open),
            std::cmp::Ordering::Greater => (other.upper.clone(), other.upper_open),
            std::cmp::Ordering::Equal => (self.upper.clone(), self.upper_open || other.upper_open),
        };
        let out = Interval {
            lower,
            upper,
            lower_open,
            upper_open,
        };
        (!out.is_empty()).then_some(out)
    }

    /// Intersection with the open half-line `(bound, ∞)`.
    pub fn above(&self, bound: &Rational) -> Option<Interval> {
        let mut out = self.clone();
        if &out.lower <= bound {
            out.lower = bound.clone();
            out.lower_open = true;
        }
        (!out.is_empty()).then_some(out)
    }

    /// The `position`-th of `slots` evenly spaced interior points.
    pub(crate) fn interior_point(&self, position: usize, slots: usize) -> Rational {
        let span = &self.upper - &self.lower;
        &self.lower + span * Rational::new(position.into(), (slots + 1).into())
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_point() {
            return write!(f, "{{{}}}", self.lower);
        }
        write!(
            f,
            "{}{}, {}{}",
            if self.lower_open { '(' } else { '[' },
            self.lower,
            self.upper,
            if self.upper_open { ')' } else { ']' }
        )
    }
}

/// The constant expectations an agent can hold across all its cells in `C(ω)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibleSet {
    pub agent: AgentId,
    /// `None` when no value is achievable.
    pub interval: Option<Interval>,
}

impl FeasibleSet {
    pub fn is_empty(&self) -> bool {
        self.interval.is_none()
    }

    /// The forced value, when the set is a single point.
    pub fn forced(&self) -> Option<&Rational> {
        self.interval.as_ref().filter(|i| i.is_point()).map(|i| &i.lower)
    }

    pub fn contains(&self, value: &Rational) -> bool {
        self.interval.as_ref().is_some_and(|i| i.contains(value))
    }
}

/// Name-resolved [`FeasibleSet`] for reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeasibleSetRecord {
    pub agent: String,
    pub empty: bool,
    #[serde(skip_serializing_if = "Option::is_none", with = "rational::opt_string")]
    pub lower: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none", with = "rational::opt_string")]
    pub upper: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_open: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_open: Option<bool>,
}

impl FeasibleSet {
    pub fn record(&self, frame: &Frame) -> FeasibleSetRecord {
        let i = self.interval.as_ref();
        FeasibleSetRecord {
            agent: frame.agent_name(self.agent).to_owned(),
            empty: i.is_none(),
            lower: i.map(|i| i.lower.clone()),
            upper: i.map(|i| i.upper.clone()),
            lower_open: i.map(|i| i.lower_open),
            upper_open: i.map(|i| i.upper_open),
        }
    }
}

/// Achievable constant expectation of `security` for `agent` across its cells meeting `component`.
pub(crate) fn feasible_set(frame: &Frame, security: &Security, agent: AgentId, component: &Event) -> FeasibleSet {
    let mut cells = verifiability::cell_intervals(frame, security, agent, component)
        .into_iter()
        .map(|c| {
            if c.is_point() {
                Interval::point(c.min)
            } else {
                Interval::open(c.min, c.max)
            }
        });
    let first = cells.next();
    let interval = cells.fold(first, |acc, cell| acc.and_then(|a| a.intersect(&cell)));
    FeasibleSet { agent, interval }
}

/// Per-agent feasible sets at `state`. Reads partitions and payoffs only.
pub fn feasible_expectations(frame: &Frame, security: &Security, state: StateId) -> Result<Vec<FeasibleSet>> {
    frame.check_security(security)?;
    let component = frame.reach(state)?;
    Ok(frame
        .agents()
        .map(|agent| feasible_set(frame, security, agent, &component))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Infeasibility {
    /// The agent cannot hold a constant expectation across `C(ω)`.
    EmptySet(AgentId),
    /// Every agent is forced to the same value.
    AllForced(Rational),
    /// A lone agent has nobody to disagree with.
    SingleAgent,
}

impl Infeasibility {
    pub fn describe(&self, frame: &Frame) -> String {
        match self {
            Infeasibility::EmptySet(agent) => format!(
                "agent {} cannot hold a constant expectation across C(w)",
                frame.agent_name(*agent)
            ),
            Infeasibility::AllForced(v) => format!("every agent is forced to expect {v}"),
            Infeasibility::SingleAgent => "a single agent cannot disagree with anyone".into(),
        }
    }
}

/// Whether some priors produce common-knowledge trade at a state, with the sets that decide it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradeFeasibility {
    pub state: StateId,
    pub sets: Vec<FeasibleSet>,
    pub obstruction: Option<Infeasibility>,
}

impl TradeFeasibility {
    pub fn possible(&self) -> bool {
        self.obstruction.is_none()
    }
}

/// Exact decision of whether any full-support priors yield common-knowledge trade at `state`.
pub fn ck_trade_possible(frame: &Frame, security: &Security, state: StateId) -> Result<TradeFeasibility> {
    let sets = feasible_expectations(frame, security, state)?;
    let obstruction = obstruction(&sets);
    Ok(TradeFeasibility {
        state,
        sets,
        obstruction,
    })
}

fn obstruction(sets: &[FeasibleSet]) -> Option<Infeasibility> {
    if let Some(empty) = sets.iter().find(|s| s.is_empty()) {
        return Some(Infeasibility::EmptySet(empty.agent));
    }
    if sets.len() < 2 {
        return Some(Infeasibility::SingleAgent);
    }
    let first = sets[0].forced()?;
    sets.iter()
        .all(|s| s.forced() == Some(first))
        .then(|| Infeasibility::AllForced(first.clone()))
}

/// Target expectations: agent `i` (1-based) of `n` takes the point `i/(n+1)`
/// of the way through its interval, or its forced value. If that makes every
/// target equal, the last agent with a proper interval moves halfway to its
/// upper end. Returns `None` only when every set is the same point.
pub fn select_targets(sets: &[FeasibleSet]) -> Option<Vec<Rational>> {
    let n = sets.len();
    let mut targets: Vec<Rational> = sets
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let interval = s.interval.as_ref()?;
            Some(if interval.is_point() {
                interval.lower.clone()
            } else {
                interval.interior_point(i + 1, n)
            })
        })
        .collect::<Option<_>>()?;
    if targets.windows(2).all(|w| w[0] == w[1]) {
        let free = sets.iter().rposition(|s| s.forced().is_none())?;
        let upper = &sets[free].interval.as_ref()?.upper;
        targets[free] = rational::midpoint(&targets[free], upper);
    }
    Some(targets)
}

/// Full-support posterior on `cell` (aligned with it) with mean `target`.
///
/// Mixes a point mass on the first minimum-payoff state, a point mass on the
/// first maximum-payoff state and the uniform distribution with weight
/// `γ ∈ {1/2, 1/4, …}`, taking the largest `γ` that keeps the point masses
/// non-negative.
pub fn cell_posterior(security: &Security, cell: &[StateId], target: &Rational) -> Option<Vec<Rational>> {
    let size = Rational::from_integer(cell.len().into());
    if let Some(value) = security.constant_on(cell) {
        return (value == target).then(|| vec![Rational::one() / &size; cell.len()]);
    }
    let (min, max) = security.interval_on(cell);
    if !(&min < target && target < &max) {
        return None;
    }
    let mean: Rational = cell.iter().map(|s| security.payoff(*s)).sum::<Rational>() / &size;
    let low = cell.iter().position(|s| security.payoff(*s) == &min)?;
    let high = cell.iter().position(|s| security.payoff(*s) == &max)?;
    let mut gamma = rational::half();
    let (alpha, beta) = loop {
        let rest = Rational::one() - &gamma;
        let alpha = (&rest * &max + &gamma * &mean - target) / (&max - &min);
        let beta = &rest - &alpha;
        if alpha >= Rational::zero() && beta >= Rational::zero() {
            break (alpha, beta);
        }
        gamma /= rational::int(2);
    };
    let mut posterior = vec![&gamma / &size; cell.len()];
    posterior[low] += alpha;
    posterior[high] += beta;
    Some(posterior)
}

/// Priors and the data they were built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthesizedPriors {
    pub state: StateId,
    pub priors: Vec<Prior>,
    pub targets: Vec<Rational>,
    /// Weight of each of the agent's blocks, in block order.
    pub cell_weights: Vec<Vec<Rational>>,
}

/// One agent's prior: target posteriors on cells meeting `component`,
/// uniform posteriors elsewhere, equal weights across all its cells.
fn assemble_prior(
    frame: &Frame,
    security: &Security,
    agent: AgentId,
    component: &Event,
    target: &Rational,
) -> Option<(Prior, Vec<Rational>)> {
    let blocks = frame.partition(agent).blocks();
    let weight = Rational::new(1.into(), blocks.len().into());
    let mut mass = vec![Rational::zero(); frame.n_states()];
    for block in blocks {
        let posterior = if component.contains(block[0]) {
            cell_posterior(security, block, target)?
        } else {
            vec![Rational::new(1.into(), block.len().into()); block.len()]
        };
        for (state, p) in block.iter().zip(posterior) {
            mass[state.0] = &weight * p;
        }
    }
    let prior = Prior::new(mass).ok()?;
    Some((prior, vec![weight; blocks.len()]))
}

/// Builds priors under which each agent expects `securities[i]` to be `targets[i]` at every state of `C(state)`.
///
/// Returns `None` when some target is not achievable for its agent.
pub fn synthesize_with_targets(
    frame: &Frame,
    securities: &[&Security],
    state: StateId,
    targets: &[Rational],
) -> Result<Option<SynthesizedPriors>> {
    if securities.len() != frame.n_agents() || targets.len() != frame.n_agents() {
        return Err(Error::Input(format!(
            "need one security and one target per agent ({} agents)",
            frame.n_agents()
        )));
    }
    for security in securities {
        frame.check_security(security)?;
    }
    let component = frame.reach(state)?;
    let mut priors = Vec::with_capacity(targets.len());
    let mut cell_weights = Vec::with_capacity(targets.len());
    for agent in frame.agents() {
        let Some((prior, weights)) = assemble_prior(frame, securities[agent.0], agent, &component, &targets[agent.0])
        else {
            return Ok(None);
        };
        priors.push(prior);
        cell_weights.push(weights);
    }
    Ok(Some(SynthesizedPriors {
        state,
        priors,
        targets: targets.to_vec(),
        cell_weights,
    }))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Synthesis {
    Synthesized(SynthesizedPriors),
    Infeasible(TradeFeasibility),
}

/// Constructs priors producing common-knowledge trade at `state`, or reports why none exist.
pub fn synthesize_disagreement_priors(frame: &Frame, security: &Security, state: StateId) -> Result<Synthesis> {
    let feasibility = ck_trade_possible(frame, security, state)?;
    if !feasibility.possible() {
        return Ok(Synthesis::Infeasible(feasibility));
    }
    let targets = select_targets(&feasibility.sets)
        .ok_or_else(|| Error::Precondition("no distinct targets despite feasible sets".into()))?;
    let securities = vec![security; frame.n_agents()];
    synthesize_with_targets(frame, &securities, state, &targets)?
        .map(Synthesis::Synthesized)
        .ok_or_else(|| Error::Precondition("selected targets fell outside a feasible set".into()))
}

/// Each agent's expectation of its own security, if constant on `C(state)`.
pub(crate) fn common_knowledge_expectations(
    model: &Model,
    securities: &[&Security],
    state: StateId,
) -> Result<Option<Vec<Rational>>> {
    let frame = model.frame();
    let component = frame.reach(state)?;
    let mut values = Vec::with_capacity(frame.n_agents());
    for agent in frame.agents() {
        let security = securities[agent.0];
        let mut cells = frame.blocks_meeting(agent, &component);
        let first = cells.next().expect("component is non-empty");
        let e = model.expectation(security, agent, first[0])?;
        for cell in cells {
            if model.expectation(security, agent, cell[0])? != e {
                return Ok(None);
            }
        }
        values.push(e);
    }
    Ok(Some(values))
}

/// Evidence of common-knowledge trade at a state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CkTradeReport {
    pub state: StateId,
    /// Each agent's constant expectation on `C(state)`.
    pub expectations: Vec<Rational>,
    /// First pair of agents (model order) whose expectations differ.
    pub pair: (AgentId, AgentId),
}

/// Common-knowledge trade: every agent's expectation is constant on `C(state)` and two of them differ.
pub fn detect_ck_trade(model: &Model, security: &Security, state: StateId) -> Result<Option<CkTradeReport>> {
    model.frame().check_security(security)?;
    let securities = vec![security; model.frame().n_agents()];
    let Some(expectations) = common_knowledge_expectations(model, &securities, state)? else {
        return Ok(None);
    };
    let n = expectations.len();
    let pair = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .find(|&(i, j)| expectations[i] != expectations[j]);
    Ok(pair.map(|(i, j)| CkTradeReport {
        state,
        expectations,
        pair: (AgentId(i), AgentId(j)),
    }))
}

/// Outcome of checking the threshold/no-trade equivalence at one state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheoremVerdict {
    pub state: StateId,
    pub threshold: Option<Witness>,
    pub feasibility: TradeFeasibility,
    pub synthesis: Option<SynthesizedPriors>,
    /// Whether the synthesized priors really produce the targeted trade.
    pub synthesis_confirmed: Option<bool>,
}

impl TheoremVerdict {
    pub fn threshold_verifiable(&self) -> bool {
        self.threshold.is_some()
    }

    /// Exactly one of threshold verifiability and possible trade holds, and any synthesis checks out.
    pub fn holds(&self) -> bool {
        self.threshold_verifiable() != self.feasibility.possible() && self.synthesis_confirmed != Some(false)
    }
}

/// Checks that threshold verifiability at `state` holds exactly when no priors give
/// common-knowledge trade there. When trade is possible the synthesized priors are
/// confirmed with [`detect_ck_trade`]. Requires a security with distinct payoffs.
pub fn verify_theorem_on(frame: &Frame, security: &Security, state: StateId) -> Result<TheoremVerdict> {
    frame.check_security(security)?;
    frame.check_state(state)?;
    if let Some((first, second)) = security.duplicate_payoff() {
        return Err(Error::NotInjective {
            value: security.payoff(first).clone(),
            first: frame.state_name(first).to_owned(),
            second: frame.state_name(second).to_owned(),
        });
    }
    let threshold = verifiability::is_threshold_verifiable(frame, security, state)?;
    let feasibility = ck_trade_possible(frame, security, state)?;
    let (synthesis, synthesis_confirmed) = if feasibility.possible() {
        match synthesize_disagreement_priors(frame, security, state)? {
            Synthesis::Synthesized(s) => {
                let confirmed = confirm_synthesis(frame, security, &s)?;
                (Some(s), Some(confirmed))
            }
            Synthesis::Infeasible(_) => (None, Some(false)),
        }
    } else {
        (None, None)
    };
    Ok(TheoremVerdict {
        state,
        threshold,
        feasibility,
        synthesis,
        synthesis_confirmed,
    })
}

/// Runs [`detect_ck_trade`] on the synthesized model and compares against the targets.
pub fn confirm_synthesis(frame: &Frame, security: &Security, synthesized: &SynthesizedPriors) -> Result<bool> {
    let model = Model::new(frame.clone(), synthesized.priors.clone())?;
    Ok(detect_ck_trade(&model, security, synthesized.state)?.is_some_and(|r| r.expectations == synthesized.targets))
}

/// Draws random full-support priors and looks for common-knowledge trade.
///
/// One-sided: a hit proves trade is possible, a miss proves nothing.
pub fn sampled_trade_search<R: Rng>(
    frame: &Frame,
    security: &Security,
    state: StateId,
    samples: usize,
    rng: &mut R,
) -> Result<Option<(Model, CkTradeReport)>> {
    frame.check_security(security)?;
    frame.check_state(state)?;
    for _ in 0..samples {
        let priors = frame.agents().map(|_| random_prior(frame.n_states(), rng)).collect();
        let model = Model::new(frame.clone(), priors)?;
        if let Some(report) = detect_ck_trade(&model, security, state)? {
            return Ok(Some((model, report)));
        }
    }
    Ok(None)
}

/// A full-support prior with small integer weights, so that coincidences are likely.
pub fn random_prior<R: Rng>(n_states: usize, rng: &mut R) -> Prior {
    let weights = (0..n_states).map(|_| rational::int(rng.random_range(1..=4))).collect();
    Prior::from_weights(weights).expect("positive weights")
}
