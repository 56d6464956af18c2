//! Finite partition models of asymmetric information.
//!
//! A [`Frame`] holds the state space, the agents and one partition per agent.
//! Everything that depends only on who-knows-what (knowledge, reachability,
//! common knowledge) lives on the frame, so prior-free analyses cannot read
//! priors by construction. A [`Model`] adds one full-support prior per agent
//! and provides conditional expectations.
//!
//! States and agents are addressed by dense indices ([`StateId`],
//! [`AgentId`]) whose order is the canonical declaration order; every
//! iteration in the crate follows it.

use std::borrow::Borrow;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::union_find::UnionFind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct StateId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AgentId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent#{}", self.0)
    }
}

/// Ordered, duplicate-free list of state names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    names: Vec<String>,
    index: HashMap<String, StateId>,
}

impl StateSpace {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::NoStates);
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), StateId(i)).is_some() {
                return Err(Error::DuplicateId(name.clone()));
            }
        }
        Ok(StateSpace { names, index })
    }

    /// States named `w1`, `w2`, ... `wn`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| format!("w{i}")))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Result<StateId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownState(name.to_owned()))
    }

    pub fn name(&self, state: StateId) -> &str {
        &self.names[state.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.names.len()).map(StateId)
    }

    pub fn all(&self) -> Event {
        self.ids().collect()
    }
}

/// A set of states.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    members: BTreeSet<StateId>,
}

impl Event {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(state: StateId) -> Self {
        std::iter::once(state).collect()
    }

    pub fn contains(&self, state: StateId) -> bool {
        self.members.contains(&state)
    }

    pub fn is_subset(&self, other: &Event) -> bool {
        self.members.is_subset(&other.members)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = StateId> + '_ {
        self.members.iter().copied()
    }

    pub fn first(&self) -> Option<StateId> {
        self.members.first().copied()
    }

    pub fn insert(&mut self, state: StateId) -> bool {
        self.members.insert(state)
    }

    pub fn intersection(&self, other: &Event) -> Event {
        self.members.intersection(&other.members).copied().collect()
    }

    pub fn union(&self, other: &Event) -> Event {
        self.members.union(&other.members).copied().collect()
    }

    /// Position of `state` among the members, i.e. its index after restriction.
    pub fn rank_of(&self, state: StateId) -> Option<usize> {
        self.members.iter().position(|&s| s == state)
    }

    pub fn names<'a>(&'a self, space: &'a StateSpace) -> Vec<String> {
        self.iter().map(|s| space.name(s).to_owned()).collect()
    }
}

impl FromIterator<StateId> for Event {
    fn from_iter<I: IntoIterator<Item = StateId>>(iter: I) -> Self {
        Event {
            members: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a Event {
    type Item = StateId;
    type IntoIter = std::iter::Copied<std::collections::btree_set::Iter<'a, StateId>>;

    fn into_iter(self) -> Self::IntoIter {
        self.members.iter().copied()
    }
}

/// One agent's information partition: disjoint non-empty blocks covering the state space.
///
/// Blocks are stored canonically: each block sorted, blocks ordered by their
/// smallest state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    blocks: Vec<Vec<StateId>>,
    block_of: Vec<usize>,
}

impl Partition {
    pub fn new(n_states: usize, blocks: Vec<Vec<StateId>>) -> Result<Self> {
        let mut block_of = vec![usize::MAX; n_states];
        let mut blocks = blocks;
        for block in &mut blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            block.sort();
        }
        blocks.sort();
        for (b, block) in blocks.iter().enumerate() {
            for &state in block {
                let slot = block_of.get_mut(state.0).ok_or(Error::StateOutOfRange(state.0))?;
                if *slot != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "state {} appears in more than one block",
                        state.0
                    )));
                }
                *slot = b;
            }
        }
        if let Some(missing) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::InvalidPartition(format!(
                "state {missing} is not covered by any block"
            )));
        }
        Ok(Partition { blocks, block_of })
    }

    /// Builds a partition from a block label per state (labels need not be dense).
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let mut groups: Vec<(usize, Vec<StateId>)> = Vec::new();
        for (i, &label) in labels.iter().enumerate() {
            match groups.iter_mut().find(|(l, _)| *l == label) {
                Some((_, block)) => block.push(StateId(i)),
                None => groups.push((label, vec![StateId(i)])),
            }
        }
        Self::new(labels.len(), groups.into_iter().map(|(_, b)| b).collect())
    }

    /// All singletons: the agent knows the state.
    pub fn discrete(n_states: usize) -> Self {
        let labels: Vec<usize> = (0..n_states).collect();
        Self::from_labels(&labels).expect("discrete partition is valid")
    }

    /// A single block: the agent knows nothing.
    pub fn trivial(n_states: usize) -> Self {
        Self::from_labels(&vec![0; n_states]).expect("trivial partition is valid")
    }

    pub fn n_states(&self) -> usize {
        self.block_of.len()
    }

    pub fn blocks(&self) -> &[Vec<StateId>] {
        &self.blocks
    }

    pub fn block_index(&self, state: StateId) -> usize {
        self.block_of[state.0]
    }

    /// The block containing `state`. Panics if `state` is out of range.
    pub fn cell(&self, state: StateId) -> &[StateId] {
        &self.blocks[self.block_of[state.0]]
    }

    /// Block label per state, as accepted by [`Partition::from_labels`].
    pub fn labels(&self) -> &[usize] {
        &self.block_of
    }

    /// Restriction to `event`: blocks intersected with the event, states re-indexed by rank.
    pub fn restrict(&self, event: &Event) -> Result<Partition> {
        let labels: Vec<usize> = event.iter().map(|s| self.block_of[s.0]).collect();
        Partition::from_labels(&labels)
    }
}

/// A full-support probability distribution over the states.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Prior {
    mass: Vec<Rational>,
}

impl Prior {
    /// Masses must be strictly positive and sum to exactly one.
    pub fn new(mass: Vec<Rational>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::InvalidPrior("no states".into()));
        }
        if let Some(i) = mass.iter().position(|m| !m.is_positive()) {
            return Err(Error::InvalidPrior(format!(
                "state {i} has non-positive mass {}",
                mass[i]
            )));
        }
        let total: Rational = mass.iter().sum();
        if !total.is_one() {
            return Err(Error::InvalidPrior(format!("masses sum to {total}, not 1")));
        }
        Ok(Prior { mass })
    }

    /// Normalizes positive weights into a prior.
    pub fn from_weights(weights: Vec<Rational>) -> Result<Self> {
        let total: Rational = weights.iter().sum();
        if total.is_zero() {
            return Err(Error::InvalidPrior("weights sum to zero".into()));
        }
        Self::new(weights.into_iter().map(|w| w / &total).collect())
    }

    pub fn uniform(n_states: usize) -> Self {
        let m = Rational::new(1.into(), n_states.into());
        Prior {
            mass: vec![m; n_states],
        }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self, state: StateId) -> &Rational {
        &self.mass[state.0]
    }

    pub fn masses(&self) -> &[Rational] {
        &self.mass
    }

    pub fn of<'a>(&self, states: impl IntoIterator<Item = &'a StateId>) -> Rational {
        states.into_iter().map(|s| &self.mass[s.0]).sum()
    }

    /// Conditional distribution on `event`, re-indexed by rank.
    pub fn restrict(&self, event: &Event) -> Result<Prior> {
        if event.is_empty() {
            return Err(Error::EmptyEvent);
        }
        Prior::from_weights(event.iter().map(|s| self.mass[s.0].clone()).collect())
    }
}

/// A payoff at every state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Security {
    payoff: Vec<Rational>,
}

/// The image of a security on an event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueRange {
    pub values: BTreeSet<Rational>,
    pub min: Rational,
    pub max: Rational,
}

impl ValueRange {
    pub fn is_constant(&self) -> bool {
        self.values.len() == 1
    }
}

impl Security {
    pub fn new(payoff: Vec<Rational>) -> Self {
        Security { payoff }
    }

    pub fn from_ints(payoff: &[i64]) -> Self {
        Security::new(payoff.iter().map(|&v| crate::rational::int(v)).collect())
    }

    pub fn constant(n_states: usize, value: Rational) -> Self {
        Security::new(vec![value; n_states])
    }

    pub fn len(&self) -> usize {
        self.payoff.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payoff.is_empty()
    }

    pub fn payoff(&self, state: StateId) -> &Rational {
        &self.payoff[state.0]
    }

    pub fn payoffs(&self) -> &[Rational] {
        &self.payoff
    }

    /// `X⁻¹(k)` restricted to the states in `states`: true iff the security pays `value` on all of them.
    pub fn pays_on(&self, states: &[StateId], value: &Rational) -> bool {
        states.iter().all(|s| &self.payoff[s.0] == value)
    }

    /// The common payoff over `states`, if the security is constant there.
    pub fn constant_on<S: Borrow<StateId>>(&self, states: impl IntoIterator<Item = S>) -> Option<&Rational> {
        let mut iter = states.into_iter();
        let first = &self.payoff[iter.next()?.borrow().0];
        iter.all(|s| &self.payoff[s.borrow().0] == first).then_some(first)
    }

    /// Closed payoff interval `[min, max]` over a non-empty slice of states.
    pub fn interval_on(&self, states: &[StateId]) -> (Rational, Rational) {
        let mut values = states.iter().map(|s| &self.payoff[s.0]);
        let first = values.next().expect("non-empty cell");
        let (lo, hi) = values.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
        (lo.clone(), hi.clone())
    }

    pub fn values_on(&self, event: &Event) -> Result<ValueRange> {
        let values: BTreeSet<Rational> = event.iter().map(|s| self.payoff[s.0].clone()).collect();
        let min = values.first().cloned().ok_or(Error::EmptyEvent)?;
        let max = values.last().cloned().ok_or(Error::EmptyEvent)?;
        Ok(ValueRange { values, min, max })
    }

    /// First pair of distinct states (canonical order) paying the same amount.
    pub fn duplicate_payoff(&self) -> Option<(StateId, StateId)> {
        let mut seen: HashMap<&Rational, usize> = HashMap::new();
        for (i, v) in self.payoff.iter().enumerate() {
            if let Some(&j) = seen.get(v) {
                return Some((StateId(j), StateId(i)));
            }
            seen.insert(v, i);
        }
        None
    }

    pub fn restrict(&self, event: &Event) -> Security {
        Security::new(event.iter().map(|s| self.payoff[s.0].clone()).collect())
    }

    pub fn negate(&self) -> Security {
        Security::new(self.payoff.iter().map(|v| -v).collect())
    }

    pub fn shift(&self, by: &Rational) -> Security {
        Security::new(self.payoff.iter().map(|v| v + by).collect())
    }
}

/// States, agents and one partition per agent. No priors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    space: StateSpace,
    agents: Vec<String>,
    partitions: Vec<Partition>,
    component: Vec<usize>,
}

impl Frame {
    pub fn new<S: Into<String>>(
        space: StateSpace,
        agents: impl IntoIterator<Item = S>,
        partitions: Vec<Partition>,
    ) -> Result<Self> {
        let agents: Vec<String> = agents.into_iter().map(Into::into).collect();
        if agents.is_empty() {
            return Err(Error::NoAgents);
        }
        let mut seen = BTreeSet::new();
        for a in &agents {
            if !seen.insert(a.as_str()) {
                return Err(Error::DuplicateId(a.clone()));
            }
        }
        if partitions.len() != agents.len() {
            return Err(Error::InvalidPartition(format!(
                "{} agents but {} partitions",
                agents.len(),
                partitions.len()
            )));
        }
        if let Some(p) = partitions.iter().find(|p| p.n_states() != space.len()) {
            return Err(Error::InvalidPartition(format!(
                "partition covers {} states, state space has {}",
                p.n_states(),
                space.len()
            )));
        }
        let component = components_of(space.len(), &partitions);
        Ok(Frame {
            space,
            agents,
            partitions,
            component,
        })
    }

    /// Agents named `1`, `2`, ... over states `w1`..`wn`.
    pub fn numbered(partitions: Vec<Partition>) -> Result<Self> {
        let n = partitions.first().map_or(0, Partition::n_states);
        let agents: Vec<String> = (1..=partitions.len()).map(|i| i.to_string()).collect();
        Frame::new(StateSpace::numbered(n)?, agents, partitions)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn n_states(&self) -> usize {
        self.space.len()
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.space.ids()
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        (0..self.agents.len()).map(AgentId)
    }

    pub fn agent_names(&self) -> &[String] {
        &self.agents
    }

    pub fn agent(&self, name: &str) -> Result<AgentId> {
        self.agents
            .iter()
            .position(|a| a == name)
            .map(AgentId)
            .ok_or_else(|| Error::UnknownAgent(name.to_owned()))
    }

    pub fn state(&self, name: &str) -> Result<StateId> {
        self.space.id(name)
    }

    pub fn agent_name(&self, agent: AgentId) -> &str {
        &self.agents[agent.0]
    }

    pub fn state_name(&self, state: StateId) -> &str {
        self.space.name(state)
    }

    pub fn partition(&self, agent: AgentId) -> &Partition {
        &self.partitions[agent.0]
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn check_agent(&self, agent: AgentId) -> Result<()> {
        if agent.0 < self.agents.len() {
            Ok(())
        } else {
            Err(Error::AgentOutOfRange(agent.0))
        }
    }

    pub fn check_state(&self, state: StateId) -> Result<()> {
        if state.0 < self.space.len() {
            Ok(())
        } else {
            Err(Error::StateOutOfRange(state.0))
        }
    }

    pub fn check_event(&self, event: &Event) -> Result<()> {
        event.iter().try_for_each(|s| self.check_state(s))
    }

    pub fn check_security(&self, security: &Security) -> Result<()> {
        if security.len() == self.space.len() {
            Ok(())
        } else {
            Err(Error::SecurityLength {
                expected: self.space.len(),
                got: security.len(),
            })
        }
    }

    /// Slice view of the agent's block at `state`, unchecked.
    pub(crate) fn block(&self, agent: AgentId, state: StateId) -> &[StateId] {
        self.partitions[agent.0].cell(state)
    }

    /// The agent's information set `Π_i(ω)` at `state`.
    pub fn cell(&self, agent: AgentId, state: StateId) -> Result<Event> {
        self.check_agent(agent)?;
        self.check_state(state)?;
        Ok(self.block(agent, state).iter().copied().collect())
    }

    /// Whether the agent knows `event` at `state`: its cell there lies inside the event.
    pub fn knows(&self, agent: AgentId, event: &Event, state: StateId) -> Result<bool> {
        self.check_agent(agent)?;
        self.check_state(state)?;
        self.check_event(event)?;
        Ok(self.block(agent, state).iter().all(|&s| event.contains(s)))
    }

    /// `C(ω)`: the states reachable from `state` by chains of shared cells.
    ///
    /// This is the smallest self-evident event containing `state`; it is
    /// computed once per frame by union-find over block co-membership.
    pub fn reach(&self, state: StateId) -> Result<Event> {
        self.check_state(state)?;
        let label = self.component[state.0];
        Ok(self.states().filter(|s| self.component[s.0] == label).collect())
    }

    /// The reachable sets, one per component, ordered by their smallest state.
    pub fn components(&self) -> Vec<Event> {
        let n = self.component.iter().max().map_or(0, |m| m + 1);
        let mut out = vec![Event::new(); n];
        for s in self.states() {
            out[self.component[s.0]].insert(s);
        }
        out
    }

    /// `event` is common knowledge at `state` iff it contains `C(state)`.
    pub fn is_common_knowledge(&self, event: &Event, state: StateId) -> Result<bool> {
        self.check_event(event)?;
        Ok(self.reach(state)?.is_subset(event))
    }

    /// The agent's blocks that meet `event`, in canonical block order.
    pub fn blocks_meeting<'a>(&'a self, agent: AgentId, event: &'a Event) -> impl Iterator<Item = &'a [StateId]> + 'a {
        self.partitions[agent.0]
            .blocks()
            .iter()
            .filter(move |b| b.iter().any(|&s| event.contains(s)))
            .map(Vec::as_slice)
    }

    /// Sub-frame on `event`: each partition intersected with it; states keep their names.
    pub fn restrict(&self, event: &Event) -> Result<Frame> {
        if event.is_empty() {
            return Err(Error::EmptyEvent);
        }
        self.check_event(event)?;
        let space = StateSpace::new(event.names(&self.space))?;
        let partitions = self
            .partitions
            .iter()
            .map(|p| p.restrict(event))
            .collect::<Result<Vec<_>>>()?;
        Frame::new(space, self.agents.clone(), partitions)
    }
}

fn components_of(n_states: usize, partitions: &[Partition]) -> Vec<usize> {
    let mut uf = UnionFind::new(n_states);
    for partition in partitions {
        for block in partition.blocks() {
            for pair in block.windows(2) {
                uf.union(pair[0].0, pair[1].0);
            }
        }
    }
    uf.labels()
}

/// A frame together with one full-support prior per agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    frame: Frame,
    priors: Vec<Prior>,
}

impl Model {
    pub fn new(frame: Frame, priors: Vec<Prior>) -> Result<Self> {
        if priors.len() != frame.n_agents() {
            return Err(Error::InvalidPrior(format!(
                "{} agents but {} priors",
                frame.n_agents(),
                priors.len()
            )));
        }
        if let Some(p) = priors.iter().find(|p| p.len() != frame.n_states()) {
            return Err(Error::InvalidPrior(format!(
                "prior over {} states, state space has {}",
                p.len(),
                frame.n_states()
            )));
        }
        Ok(Model { frame, priors })
    }

    /// Every agent holds the same prior.
    pub fn with_common_prior(frame: Frame, prior: Prior) -> Result<Self> {
        let priors = vec![prior; frame.n_agents()];
        Model::new(frame, priors)
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn prior(&self, agent: AgentId) -> &Prior {
        &self.priors[agent.0]
    }

    pub fn priors(&self) -> &[Prior] {
        &self.priors
    }

    /// `e_i(ω)`: the agent's conditional expectation of the security given its cell at `state`.
    pub fn expectation(&self, security: &Security, agent: AgentId, state: StateId) -> Result<Rational> {
        self.frame.check_security(security)?;
        self.frame.check_agent(agent)?;
        self.frame.check_state(state)?;
        conditional_expectation(&self.priors[agent.0], security, self.frame.block(agent, state))
    }

    /// Expectation given the agent's cell at `state` intersected with `public`.
    pub fn expectation_given(
        &self,
        security: &Security,
        agent: AgentId,
        state: StateId,
        public: &Event,
    ) -> Result<Rational> {
        self.frame.check_security(security)?;
        self.frame.check_agent(agent)?;
        self.frame.check_state(state)?;
        let info: Vec<StateId> = self
            .frame
            .block(agent, state)
            .iter()
            .copied()
            .filter(|&s| public.contains(s))
            .collect();
        conditional_expectation(&self.priors[agent.0], security, &info)
    }

    /// Sub-model on `event` with each prior conditioned on it.
    pub fn restrict(&self, event: &Event) -> Result<Model> {
        let frame = self.frame.restrict(event)?;
        let priors = self
            .priors
            .iter()
            .map(|p| p.restrict(event))
            .collect::<Result<Vec<_>>>()?;
        Model::new(frame, priors)
    }
}

/// `E_p[X | states]`. Fails on an empty conditioning set.
pub fn conditional_expectation(prior: &Prior, security: &Security, states: &[StateId]) -> Result<Rational> {
    if states.is_empty() {
        return Err(Error::EmptyEvent);
    }
    let (weighted, total) = states
        .iter()
        .fold((Rational::zero(), Rational::zero()), |(weighted, total), s| {
            let m = prior.mass(*s);
            (weighted + security.payoff(*s) * m, total + m)
        });
    Ok(weighted / total)
}
