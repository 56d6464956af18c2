//! Sequential public announcements of conditional expectations.
//!
//! Public information starts at the whole state space. At round `t` the
//! scheduled agent announces its expectation given its private cell at the
//! true state intersected with the current public information `C^{t-1}`;
//! everyone then discards the states at which that agent would have
//! announced something else. The run stops after one full pass of the
//! schedule without any refinement.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AgentId, Event, Frame, Model, Security, StateId};
use crate::rational::{self, Rational};
use crate::verifiability::{self, WitnessRecord};

/// Round-robin over the agents in model order.
pub fn default_schedule(frame: &Frame) -> Vec<AgentId> {
    frame.agents().collect()
}

/// A schedule must be non-empty, name known agents, and give every agent a turn.
pub fn check_schedule(frame: &Frame, order: &[AgentId]) -> Result<()> {
    if order.is_empty() {
        return Err(Error::EmptySchedule);
    }
    for &agent in order {
        frame.check_agent(agent)?;
    }
    if let Some(missing) = frame.agents().find(|a| !order.contains(a)) {
        return Err(Error::ScheduleMissingAgent(frame.agent_name(missing).to_owned()));
    }
    Ok(())
}

/// Parses a comma-separated list of agent names.
pub fn parse_schedule(frame: &Frame, text: &str) -> Result<Vec<AgentId>> {
    let order = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| frame.agent(name))
        .collect::<Result<Vec<_>>>()?;
    check_schedule(frame, &order)?;
    Ok(order)
}

/// One announcement: the value and the public information it leaves behind.
pub(crate) fn announce(
    model: &Model,
    security: &Security,
    true_state: StateId,
    agent: AgentId,
    public: &Event,
) -> Result<(Rational, Event)> {
    let value = model.expectation_given(security, agent, true_state, public)?;
    let mut next = Event::new();
    for state in public.iter() {
        if model.expectation_given(security, agent, state, public)? == value {
            next.insert(state);
        }
    }
    Ok((value, next))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round {
    pub t: usize,
    pub agent: AgentId,
    pub announcement: Rational,
    /// `C^t`: states consistent with every announcement so far.
    pub public: Event,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub true_state: StateId,
    pub order: Vec<AgentId>,
    pub rounds: Vec<Round>,
    /// First round of the final pass in which public information no longer changes.
    pub t_star: usize,
    /// Each agent's announcement in the final pass.
    pub final_expectations: Vec<Rational>,
    pub agree: bool,
}

impl Transcript {
    /// `C^{t*}`.
    pub fn terminal_public(&self) -> &Event {
        &self.rounds.last().expect("a transcript has at least one round").public
    }

    pub fn record(&self, frame: &Frame) -> TranscriptRecord {
        TranscriptRecord {
            true_state: frame.state_name(self.true_state).to_owned(),
            order: self.order.iter().map(|a| frame.agent_name(*a).to_owned()).collect(),
            rounds: self
                .rounds
                .iter()
                .map(|r| RoundRecord {
                    t: r.t,
                    agent: frame.agent_name(r.agent).to_owned(),
                    announcement: r.announcement.clone(),
                    public: r.public.names(frame.space()),
                })
                .collect(),
            t_star: self.t_star,
            final_expectations: frame
                .agents()
                .map(|a| (frame.agent_name(a).to_owned(), self.final_expectations[a.0].clone()))
                .map(|(agent, value)| AgentValue { agent, value })
                .collect(),
            agree: self.agree,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgentValue {
    pub agent: String,
    #[serde(with = "rational::as_string")]
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub t: usize,
    pub agent: String,
    #[serde(with = "rational::as_string")]
    pub announcement: Rational,
    pub public: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranscriptRecord {
    pub true_state: String,
    pub order: Vec<String>,
    pub rounds: Vec<RoundRecord>,
    pub t_star: usize,
    pub final_expectations: Vec<AgentValue>,
    pub agree: bool,
}

/// Runs the announcement protocol until a full pass of `order` refines nothing.
pub fn run_announcements(
    model: &Model,
    security: &Security,
    true_state: StateId,
    order: &[AgentId],
) -> Result<Transcript> {
    let frame = model.frame();
    frame.check_security(security)?;
    frame.check_state(true_state)?;
    check_schedule(frame, order)?;

    let mut public = frame.space().all();
    let mut rounds = Vec::new();
    let mut last_refinement = 0;
    let mut silent = 0;
    let mut t = 0;
    while silent < order.len() {
        t += 1;
        let agent = order[(t - 1) % order.len()];
        let (announcement, next) = announce(model, security, true_state, agent, &public)?;
        if next.len() < public.len() {
            last_refinement = t;
            silent = 0;
        } else {
            silent += 1;
        }
        public = next;
        rounds.push(Round {
            t,
            agent,
            announcement,
            public: public.clone(),
        });
    }

    let window = &rounds[rounds.len() - order.len()..];
    let final_expectations: Vec<Rational> = frame
        .agents()
        .map(|agent| {
            window
                .iter()
                .rev()
                .find(|r| r.agent == agent)
                .map(|r| r.announcement.clone())
                .expect("every agent speaks in the final pass")
        })
        .collect();
    let agree = final_expectations.windows(2).all(|w| w[0] == w[1]);
    Ok(Transcript {
        true_state,
        order: order.to_vec(),
        rounds,
        t_star: last_refinement + 1,
        final_expectations,
        agree,
    })
}

/// Whether the announcements end in agreement.
pub fn cannot_disagree_forever(model: &Model, security: &Security, state: StateId, order: &[AgentId]) -> Result<bool> {
    Ok(run_announcements(model, security, state, order)?.agree)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CorollaryVerdict {
    /// The hypothesis holds and so does the conclusion.
    Pass,
    /// The hypothesis does not hold.
    Vacuous,
    /// The hypothesis holds and the conclusion fails.
    Violation,
}

impl CorollaryVerdict {
    pub fn from_implication(hypothesis: bool, conclusion: bool) -> Self {
        match (hypothesis, conclusion) {
            (false, _) => CorollaryVerdict::Vacuous,
            (true, true) => CorollaryVerdict::Pass,
            (true, false) => CorollaryVerdict::Violation,
        }
    }
}

/// Threshold verifiability on the terminal public information, evaluated in
/// the model restricted to it. The witness uses the original state names.
pub fn terminal_threshold(
    frame: &Frame,
    security: &Security,
    terminal: &Event,
    true_state: StateId,
) -> Result<Option<WitnessRecord>> {
    let restricted = frame.restrict(terminal)?;
    let payoffs = security.restrict(terminal);
    let rank = terminal
        .rank_of(true_state)
        .ok_or_else(|| Error::Precondition("true state left the public information".into()))?;
    let witness = verifiability::is_threshold_verifiable(&restricted, &payoffs, StateId(rank))?;
    Ok(witness.map(|w| w.record(&restricted)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementCheck {
    pub transcript: Transcript,
    pub terminal_threshold: Option<WitnessRecord>,
    pub verdict: CorollaryVerdict,
}

/// Threshold verifiability at the fixed point implies agreement.
pub fn check_corollary1(
    model: &Model,
    security: &Security,
    state: StateId,
    order: &[AgentId],
) -> Result<AgreementCheck> {
    let transcript = run_announcements(model, security, state, order)?;
    let terminal_threshold = terminal_threshold(model.frame(), security, transcript.terminal_public(), state)?;
    let verdict = CorollaryVerdict::from_implication(terminal_threshold.is_some(), transcript.agree);
    Ok(AgreementCheck {
        transcript,
        terminal_threshold,
        verdict,
    })
}
