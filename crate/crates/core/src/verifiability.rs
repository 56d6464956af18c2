//! The four verifiability conditions on a security.
//!
//! Every positive verdict comes with a [`Witness`] that can be re-checked
//! against the raw definition with [`Witness::validate`]. Witness search
//! scans agents in model order and states in canonical order and returns
//! the first hit. None of these checks reads priors.

use serde::Serialize;

use crate::error::Result;
use crate::model::{AgentId, Event, Frame, Security, StateId};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Extreme {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// At `state`, the agent's cell lies in the level set of `value`.
    VerifiablePerState {
        state: StateId,
        agent: AgentId,
        value: Rational,
    },
    /// The agent's cell at `state` lies in the level set of an extreme value of `X(C(state))`.
    Maxmin {
        agent: AgentId,
        state: StateId,
        extreme: Extreme,
        value: Rational,
    },
    /// `max X(cell(low)) < threshold < min X(cell(high))` for the same agent.
    Threshold {
        agent: AgentId,
        low: StateId,
        high: StateId,
        threshold: Rational,
    },
    /// The intersection of all agents' cells at `state` lies in the level set of `value`.
    Collective { state: StateId, value: Rational },
    /// The security pays `value` throughout `C(state)`.
    ConstantOnComponent { state: StateId, value: Rational },
}

/// Flat, name-resolved form of a [`Witness`] for reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessRecord {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    pub states: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", with = "rational::opt_string")]
    pub threshold: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extreme: Option<Extreme>,
    #[serde(skip_serializing_if = "Option::is_none", with = "rational::opt_string")]
    pub value: Option<Rational>,
}

impl Witness {
    pub fn kind(&self) -> &'static str {
        match self {
            Witness::VerifiablePerState { .. } => "verifiable-per-state",
            Witness::Maxmin { .. } => "maxmin",
            Witness::Threshold { .. } => "threshold",
            Witness::Collective { .. } => "collective",
            Witness::ConstantOnComponent { .. } => "constant-on-component",
        }
    }

    pub fn record(&self, frame: &Frame) -> WitnessRecord {
        let name = |s: &StateId| frame.state_name(*s).to_owned();
        let agent_name = |a: &AgentId| Some(frame.agent_name(*a).to_owned());
        let mut record = WitnessRecord {
            kind: self.kind(),
            agent: None,
            states: Vec::new(),
            threshold: None,
            extreme: None,
            value: None,
        };
        match self {
            Witness::VerifiablePerState { state, agent, value } => {
                record.agent = agent_name(agent);
                record.states = vec![name(state)];
                record.value = Some(value.clone());
            }
            Witness::Maxmin {
                agent,
                state,
                extreme,
                value,
            } => {
                record.agent = agent_name(agent);
                record.states = vec![name(state)];
                record.extreme = Some(*extreme);
                record.value = Some(value.clone());
            }
            Witness::Threshold {
                agent,
                low,
                high,
                threshold,
            } => {
                record.agent = agent_name(agent);
                record.states = vec![name(low), name(high)];
                record.threshold = Some(threshold.clone());
            }
            Witness::Collective { state, value } | Witness::ConstantOnComponent { state, value } => {
                record.states = vec![name(state)];
                record.value = Some(value.clone());
            }
        }
        record
    }

    /// Re-checks the witness against the definition it certifies.
    pub fn validate(&self, frame: &Frame, security: &Security) -> bool {
        let in_range = |s: StateId| frame.check_state(s).is_ok();
        let agent_ok = |a: AgentId| frame.check_agent(a).is_ok();
        if frame.check_security(security).is_err() {
            return false;
        }
        match self {
            Witness::VerifiablePerState { state, agent, value } => {
                in_range(*state) && agent_ok(*agent) && security.pays_on(frame.block(*agent, *state), value)
            }
            Witness::Maxmin {
                agent,
                state,
                extreme,
                value,
            } => {
                if !in_range(*state) || !agent_ok(*agent) {
                    return false;
                }
                let Ok(component) = frame.reach(*state) else {
                    return false;
                };
                let Ok(range) = security.values_on(&component) else {
                    return false;
                };
                let target = match extreme {
                    Extreme::Max => &range.max,
                    Extreme::Min => &range.min,
                };
                target == value && security.pays_on(frame.block(*agent, *state), value)
            }
            Witness::Threshold {
                agent,
                low,
                high,
                threshold,
            } => {
                if !in_range(*low) || !in_range(*high) || !agent_ok(*agent) {
                    return false;
                }
                let same_component = frame.reach(*low).is_ok_and(|c| c.contains(*high));
                let (_, low_max) = security.interval_on(frame.block(*agent, *low));
                let (high_min, _) = security.interval_on(frame.block(*agent, *high));
                same_component && &low_max < threshold && threshold < &high_min
            }
            Witness::Collective { state, value } => {
                in_range(*state) && security.pays_on(&pooled_cell(frame, *state), value)
            }
            Witness::ConstantOnComponent { state, value } => {
                in_range(*state)
                    && frame
                        .reach(*state)
                        .is_ok_and(|c| c.iter().all(|s| security.payoff(s) == value))
            }
        }
    }
}

/// Outcome of a whole-model check: a witness per passing state, and the failing states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub holds: bool,
    pub witnesses: Vec<Witness>,
    pub failing: Vec<StateId>,
}

impl Check {
    fn from_states(per_state: Vec<(StateId, Option<Witness>)>) -> Self {
        let mut witnesses = Vec::new();
        let mut failing = Vec::new();
        for (state, witness) in per_state {
            match witness {
                Some(w) => witnesses.push(w),
                None => failing.push(state),
            }
        }
        Check {
            holds: failing.is_empty(),
            witnesses,
            failing,
        }
    }
}

/// Payoff interval of one of an agent's cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellInterval {
    /// First state of the cell in canonical order.
    pub representative: StateId,
    pub min: Rational,
    pub max: Rational,
}

impl CellInterval {
    pub fn is_point(&self) -> bool {
        self.min == self.max
    }
}

/// Payoff intervals of the agent's cells that meet `event`, in canonical block order.
pub fn cell_intervals(frame: &Frame, security: &Security, agent: AgentId, event: &Event) -> Vec<CellInterval> {
    frame
        .blocks_meeting(agent, event)
        .map(|block| {
            let (min, max) = security.interval_on(block);
            CellInterval {
                representative: block[0],
                min,
                max,
            }
        })
        .collect()
}

/// At every state some agent's cell determines the payoff.
pub fn is_verifiable(frame: &Frame, security: &Security) -> Result<Check> {
    frame.check_security(security)?;
    let per_state = frame
        .states()
        .map(|state| {
            let witness = frame.agents().find_map(|agent| {
                security
                    .constant_on(frame.block(agent, state))
                    .map(|value| Witness::VerifiablePerState {
                        state,
                        agent,
                        value: value.clone(),
                    })
            });
            (state, witness)
        })
        .collect();
    Ok(Check::from_states(per_state))
}

/// Some agent, at some state of `C(state)`, knows that the payoff is the
/// maximum (or the minimum) of the payoffs on `C(state)`.
pub fn is_maxmin_verifiable(frame: &Frame, security: &Security, state: StateId) -> Result<Option<Witness>> {
    frame.check_security(security)?;
    let component = frame.reach(state)?;
    let range = security.values_on(&component)?;
    for agent in frame.agents() {
        for other in component.iter() {
            let cell = frame.block(agent, other);
            for (extreme, value) in [(Extreme::Max, &range.max), (Extreme::Min, &range.min)] {
                if security.pays_on(cell, value) {
                    return Ok(Some(Witness::Maxmin {
                        agent,
                        state: other,
                        extreme,
                        value: value.clone(),
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// The payoff is constant on `C(state)`, or some agent has two cells in
/// `C(state)` whose payoff ranges are strictly separated by a threshold.
///
/// Decided by emptiness of the intersection of the agent's closed cell
/// intervals; the separated pair is the cell with the smallest maximum and
/// the cell with the largest minimum. The threshold is the midpoint of the gap.
pub fn is_threshold_verifiable(frame: &Frame, security: &Security, state: StateId) -> Result<Option<Witness>> {
    frame.check_security(security)?;
    let component = frame.reach(state)?;
    if let Some(value) = security.constant_on(&component) {
        return Ok(Some(Witness::ConstantOnComponent {
            state,
            value: value.clone(),
        }));
    }
    Ok(frame
        .agents()
        .find_map(|agent| separated_pair(agent, &cell_intervals(frame, security, agent, &component))))
}

pub(crate) fn separated_pair(agent: AgentId, intervals: &[CellInterval]) -> Option<Witness> {
    // Ties keep the earliest cell.
    let mut lowest = intervals.first()?;
    let mut highest = lowest;
    for iv in &intervals[1..] {
        if iv.max < lowest.max {
            lowest = iv;
        }
        if iv.min > highest.min {
            highest = iv;
        }
    }
    (lowest.max < highest.min).then(|| Witness::Threshold {
        agent,
        low: lowest.representative,
        high: highest.representative,
        threshold: rational::midpoint(&lowest.max, &highest.min),
    })
}

/// Threshold verifiability at every state.
pub fn threshold_everywhere(frame: &Frame, security: &Security) -> Result<Check> {
    let per_state = frame
        .states()
        .map(|s| is_threshold_verifiable(frame, security, s).map(|w| (s, w)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Check::from_states(per_state))
}

/// Maxmin verifiability at every state.
pub fn maxmin_everywhere(frame: &Frame, security: &Security) -> Result<Check> {
    let per_state = frame
        .states()
        .map(|s| is_maxmin_verifiable(frame, security, s).map(|w| (s, w)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Check::from_states(per_state))
}

/// States every agent's cell at `state` has in common.
pub(crate) fn pooled_cell(frame: &Frame, state: StateId) -> Vec<StateId> {
    frame
        .states()
        .filter(|&s| {
            frame
                .partitions()
                .iter()
                .all(|p| p.block_index(s) == p.block_index(state))
        })
        .collect()
}

/// Pooling all agents' information determines the payoff at every state.
pub fn is_collectively_verifiable(frame: &Frame, security: &Security) -> Result<Check> {
    frame.check_security(security)?;
    let per_state = frame
        .states()
        .map(|state| {
            let witness = security
                .constant_on(pooled_cell(frame, state))
                .map(|value| Witness::Collective {
                    state,
                    value: value.clone(),
                });
            (state, witness)
        })
        .collect();
    Ok(Check::from_states(per_state))
}

/// Explains a state where maxmin verifiability holds but threshold
/// verifiability fails. This only happens for securities that pay the same
/// amount at two states.
pub fn maxmin_threshold_divergence(frame: &Frame, security: &Security, state: StateId) -> Result<Option<String>> {
    let maxmin = is_maxmin_verifiable(frame, security, state)?;
    let threshold = is_threshold_verifiable(frame, security, state)?;
    Ok(match (maxmin, threshold) {
        (Some(w), None) => {
            let record = w.record(frame);
            Some(format!(
                "maxmin verifiable at {} (agent {} knows the {} value {} at {}) but not threshold verifiable: \
                 the security repeats payoffs, so the known extreme does not separate two cells",
                frame.state_name(state),
                record.agent.unwrap_or_default(),
                if matches!(record.extreme, Some(Extreme::Max)) {
                    "maximum"
                } else {
                    "minimum"
                },
                record.value.map(|v| v.to_string()).unwrap_or_default(),
                record.states.join(","),
            ))
        }
        _ => None,
    })
}
