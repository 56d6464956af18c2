//! Trade in agent-specific securities.
//!
//! Each agent `i` holds its own security `X_i`; the bundle is zero-sum. Trade
//! is common knowledge when every agent's expected profit `E_i[X_i]` is
//! constant on `C(ω)` and strictly positive. The static analysis mirrors
//! [`crate::agreement`] with each feasible set cut down to `(0, ∞)`.

use serde::Serialize;

use crate::agreement::{self, FeasibleSet, FeasibleSetRecord, SynthesizedPriors};
use crate::error::{Error, Result};
use crate::model::{AgentId, Frame, Model, Security, StateId};
use crate::rational::{self, Rational};
use crate::verifiability::{self, Witness, WitnessRecord};

/// One security per agent, in agent order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecurityBundle {
    securities: Vec<Security>,
}

impl SecurityBundle {
    pub fn new(securities: Vec<Security>) -> Self {
        SecurityBundle { securities }
    }

    pub fn len(&self) -> usize {
        self.securities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.securities.is_empty()
    }

    pub fn security(&self, agent: AgentId) -> &Security {
        &self.securities[agent.0]
    }

    pub fn securities(&self) -> Vec<&Security> {
        self.securities.iter().collect()
    }

    /// Total payoff at `state`.
    pub fn total(&self, state: StateId) -> Rational {
        self.securities.iter().map(|s| s.payoff(state)).sum()
    }

    /// One security per model agent, each with one payoff per state.
    pub fn check(&self, frame: &Frame) -> Result<()> {
        if self.securities.len() != frame.n_agents() {
            return Err(Error::Input(format!(
                "bundle has {} securities for {} agents",
                self.securities.len(),
                frame.n_agents()
            )));
        }
        self.securities.iter().try_for_each(|s| frame.check_security(s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum TradabilityFailure {
    NonzeroSum {
        state: String,
        #[serde(with = "rational::as_string")]
        total: Rational,
    },
    NonpositiveCell {
        agent: String,
        cell: Vec<String>,
        #[serde(with = "rational::as_string")]
        max: Rational,
    },
}

/// Payoffs sum to zero everywhere and every agent's security has a positive maximum on each of its cells.
pub fn is_tradable(frame: &Frame, bundle: &SecurityBundle) -> Result<Option<TradabilityFailure>> {
    bundle.check(frame)?;
    if let Some(state) = frame.states().find(|&s| bundle.total(s) != rational::zero()) {
        return Ok(Some(TradabilityFailure::NonzeroSum {
            state: frame.state_name(state).to_owned(),
            total: bundle.total(state),
        }));
    }
    for agent in frame.agents() {
        let security = bundle.security(agent);
        for block in frame.partition(agent).blocks() {
            let (_, max) = security.interval_on(block);
            if !rational::is_positive(&max) {
                return Ok(Some(TradabilityFailure::NonpositiveCell {
                    agent: frame.agent_name(agent).to_owned(),
                    cell: block.iter().map(|s| frame.state_name(*s).to_owned()).collect(),
                    max,
                }));
            }
        }
    }
    Ok(None)
}

/// Expected profits at a state where multi-security trade is common knowledge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiTradeReport {
    pub state: StateId,
    pub profits: Vec<Rational>,
}

/// Requires a tradable bundle.
pub fn detect_ck_trade_multi(
    model: &Model,
    bundle: &SecurityBundle,
    state: StateId,
) -> Result<Option<MultiTradeReport>> {
    if let Some(failure) = is_tradable(model.frame(), bundle)? {
        return Err(Error::Precondition(format!("bundle is not tradable: {failure:?}")));
    }
    positive_ck_profits(model, bundle, state)
}

fn positive_ck_profits(model: &Model, bundle: &SecurityBundle, state: StateId) -> Result<Option<MultiTradeReport>> {
    let profits = agreement::common_knowledge_expectations(model, &bundle.securities(), state)?;
    Ok(profits
        .filter(|p| p.iter().all(rational::is_positive))
        .map(|profits| MultiTradeReport { state, profits }))
}

/// A single security split into a zero-sum bundle at price `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub bundle: SecurityBundle,
    pub price: Rational,
    /// Agents holding `X - p`; the rest hold `p - X`.
    pub long: Vec<AgentId>,
}

/// Splits `security` given each agent's expectation of it (agent order).
///
/// Agents are ranked by expectation; the upper half buy `X - p`, the lower
/// half sell it, with `p` midway between the two middle expectations.
pub fn split_security(security: &Security, expectations: &[Rational]) -> Result<Split> {
    let n = expectations.len();
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::Input(format!(
            "splitting needs an even number of agents, got {n}"
        )));
    }
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&a, &b| expectations[b].cmp(&expectations[a]).then(a.cmp(&b)));
    let (upper, lower) = (&expectations[ranked[n / 2 - 1]], &expectations[ranked[n / 2]]);
    if upper == lower {
        return Err(Error::Input(format!("expectations tie at the split point ({upper})")));
    }
    let price = rational::midpoint(upper, lower);
    let long_side = security.shift(&-&price);
    let short_side = long_side.negate();
    let mut long: Vec<AgentId> = ranked[..n / 2].iter().map(|&i| AgentId(i)).collect();
    long.sort();
    let securities = (0..n)
        .map(|i| {
            if long.contains(&AgentId(i)) {
                long_side.clone()
            } else {
                short_side.clone()
            }
        })
        .collect();
    Ok(Split {
        bundle: SecurityBundle::new(securities),
        price,
        long,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BundleWitness {
    /// Every security is constant on `C(state)`.
    Constant { state: StateId, values: Vec<Rational> },
    /// An agent separates two of its cells on its own security.
    Separated(Witness),
}

impl BundleWitness {
    pub fn record(&self, frame: &Frame) -> BundleWitnessRecord {
        match self {
            BundleWitness::Constant { state, values } => BundleWitnessRecord {
                kind: "constant-on-component",
                states: vec![frame.state_name(*state).to_owned()],
                values: values.clone(),
                separation: None,
            },
            BundleWitness::Separated(w) => BundleWitnessRecord {
                kind: "threshold",
                states: Vec::new(),
                values: Vec::new(),
                separation: Some(w.record(frame)),
            },
        }
    }

    /// Re-checks the witness against the bundle.
    pub fn validate(&self, frame: &Frame, bundle: &SecurityBundle) -> bool {
        match self {
            BundleWitness::Constant { state, values } => frame.reach(*state).is_ok_and(|component| {
                frame
                    .agents()
                    .all(|a| bundle.security(a).constant_on(&component) == values.get(a.0))
            }),
            BundleWitness::Separated(w @ Witness::Threshold { agent, .. }) => {
                agent.0 < bundle.len() && w.validate(frame, bundle.security(*agent))
            }
            BundleWitness::Separated(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BundleWitnessRecord {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", with = "rational::vec_string")]
    pub values: Vec<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation: Option<WitnessRecord>,
}

/// Every security is constant on `C(state)`, or some agent has two cells in
/// `C(state)` whose ranges of its own security are strictly separated.
pub fn is_threshold_verifiable_multi(
    frame: &Frame,
    bundle: &SecurityBundle,
    state: StateId,
) -> Result<Option<BundleWitness>> {
    bundle.check(frame)?;
    let component = frame.reach(state)?;
    let constants: Option<Vec<Rational>> = bundle
        .securities
        .iter()
        .map(|s| s.constant_on(&component).cloned())
        .collect();
    if let Some(values) = constants {
        return Ok(Some(BundleWitness::Constant { state, values }));
    }
    Ok(frame.agents().find_map(|agent| {
        let intervals = verifiability::cell_intervals(frame, bundle.security(agent), agent, &component);
        verifiability::separated_pair(agent, &intervals).map(BundleWitness::Separated)
    }))
}

/// Achievable constant positive expected profits for each agent at `state`.
pub fn feasible_profits(frame: &Frame, bundle: &SecurityBundle, state: StateId) -> Result<Vec<FeasibleSet>> {
    bundle.check(frame)?;
    let component = frame.reach(state)?;
    Ok(frame
        .agents()
        .map(|agent| {
            let set = agreement::feasible_set(frame, bundle.security(agent), agent, &component);
            FeasibleSet {
                agent,
                interval: set.interval.and_then(|i| i.above(&rational::zero())),
            }
        })
        .collect())
}

/// Agent `i` of `n` targets the point `i/(n+1)` through its set, or its forced value.
fn profit_targets(sets: &[FeasibleSet]) -> Option<Vec<Rational>> {
    let n = sets.len();
    sets.iter()
        .enumerate()
        .map(|(i, s)| {
            let interval = s.interval.as_ref()?;
            Some(if interval.is_point() {
                interval.lower.clone()
            } else {
                interval.interior_point(i + 1, n)
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropositionVerdict {
    pub state: StateId,
    pub tradable: Option<TradabilityFailure>,
    pub threshold: Option<BundleWitness>,
    pub sets: Vec<FeasibleSet>,
    pub synthesis: Option<SynthesizedPriors>,
    pub synthesis_confirmed: Option<bool>,
}

impl PropositionVerdict {
    pub fn trade_possible(&self) -> bool {
        !self.sets.is_empty() && self.sets.iter().all(|s| !s.is_empty())
    }

    pub fn threshold_verifiable(&self) -> bool {
        self.threshold.is_some()
    }

    /// Exactly one side holds and any synthesis checks out.
    pub fn holds(&self) -> bool {
        self.threshold_verifiable() != self.trade_possible() && self.synthesis_confirmed != Some(false)
    }

    pub fn record(&self, frame: &Frame) -> PropositionRecord {
        PropositionRecord {
            state: frame.state_name(self.state).to_owned(),
            tradable: self.tradable.is_none(),
            threshold_verifiable: self.threshold_verifiable(),
            witness: self.threshold.as_ref().map(|w| w.record(frame)),
            trade_possible: self.trade_possible(),
            feasible_profits: self.sets.iter().map(|s| s.record(frame)).collect(),
            targets: self.synthesis.as_ref().map(|s| s.targets.clone()).unwrap_or_default(),
            synthesis_confirmed: self.synthesis_confirmed,
            holds: self.holds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropositionRecord {
    pub state: String,
    pub tradable: bool,
    pub threshold_verifiable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<BundleWitnessRecord>,
    pub trade_possible: bool,
    pub feasible_profits: Vec<FeasibleSetRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty", with = "rational::vec_string")]
    pub targets: Vec<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthesis_confirmed: Option<bool>,
    pub holds: bool,
}

/// Checks that bundle threshold verifiability at `state` holds exactly when no
/// priors make every agent's expected profit constant and positive on `C(state)`.
/// Priors are synthesized and confirmed whenever such trade is possible.
pub fn verify_proposition_on(frame: &Frame, bundle: &SecurityBundle, state: StateId) -> Result<PropositionVerdict> {
    frame.check_state(state)?;
    let tradable = is_tradable(frame, bundle)?;
    let threshold = is_threshold_verifiable_multi(frame, bundle, state)?;
    let sets = feasible_profits(frame, bundle, state)?;
    let mut verdict = PropositionVerdict {
        state,
        tradable,
        threshold,
        sets,
        synthesis: None,
        synthesis_confirmed: None,
    };
    if verdict.trade_possible() {
        let targets = profit_targets(&verdict.sets).expect("non-empty sets give targets");
        let synthesis = agreement::synthesize_with_targets(frame, &bundle.securities(), state, &targets)?;
        let confirmed = match &synthesis {
            Some(s) => {
                let model = Model::new(frame.clone(), s.priors.clone())?;
                positive_ck_profits(&model, bundle, state)?.is_some_and(|r| r.profits == s.targets)
            }
            None => false,
        };
        verdict.synthesis = synthesis;
        verdict.synthesis_confirmed = Some(confirmed);
    }
    Ok(verdict)
}
