//! Model documents: the JSON file format for models, securities, bundles
//! and announcement schedules.
//!
//! Rationals are written as strings (`"1/6"`, `"-1"`), never as JSON
//! numbers. Parsing validates every model invariant and reports each
//! violation as a [`Diagnostic`] carrying a stable code and the line and
//! column of the offending value.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use indexmap::IndexMap;
use json_spanned_value::Spanned;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AgentId, Frame, Model, Partition, Prior, Security, StateId, StateSpace};
use crate::multi::SecurityBundle;
use crate::rational::{self, Exact, Rational};

pub const SCHEMA_VERSION: u32 = 1;

/// A validated model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub states: Vec<String>,
    pub agents: Vec<String>,
    pub partitions: IndexMap<String, Vec<Vec<String>>>,
    pub priors: IndexMap<String, IndexMap<String, Exact>>,
    #[serde(default)]
    pub securities: IndexMap<String, IndexMap<String, Exact>>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub bundles: IndexMap<String, IndexMap<String, String>>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub schedules: IndexMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticCode {
    Syntax,
    UnsupportedSchema,
    NoStates,
    DuplicateState,
    NoAgents,
    DuplicateAgent,
    UnknownAgent,
    UnknownState,
    MissingPartition,
    EmptyBlock,
    BlocksOverlap,
    BlocksIncomplete,
    MissingPrior,
    PriorMissingState,
    BadRational,
    ZeroMass,
    NegativeMass,
    PriorNotNormalized,
    SecurityMissingState,
    BundleUnknownSecurity,
    BundleMissingAgent,
    EmptySchedule,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        use DiagnosticCode::*;
        match self {
            Syntax => "syntax",
            UnsupportedSchema => "unsupported-schema",
            NoStates => "no-states",
            DuplicateState => "duplicate-state",
            NoAgents => "no-agents",
            DuplicateAgent => "duplicate-agent",
            UnknownAgent => "unknown-agent",
            UnknownState => "unknown-state",
            MissingPartition => "missing-partition",
            EmptyBlock => "empty-block",
            BlocksOverlap => "blocks-overlap",
            BlocksIncomplete => "blocks-incomplete",
            MissingPrior => "missing-prior",
            PriorMissingState => "prior-missing-state",
            BadRational => "bad-rational",
            ZeroMass => "zero-mass",
            NegativeMass => "negative-mass",
            PriorNotNormalized => "prior-not-normalized",
            SecurityMissingState => "security-missing-state",
            BundleUnknownSecurity => "bundle-unknown-security",
            BundleMissingAgent => "bundle-missing-agent",
            EmptySchedule => "empty-schedule",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.line, self.column, self.code, self.message)
    }
}

type S<T> = Spanned<T>;
type SpannedMap<V> = IndexMap<S<String>, S<V>>;
type Names = Vec<S<String>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    schema: S<u32>,
    #[serde(default)]
    comment: Option<String>,
    states: S<Vec<S<String>>>,
    agents: S<Vec<S<String>>>,
    partitions: S<SpannedMap<Vec<S<Names>>>>,
    priors: S<SpannedMap<SpannedMap<String>>>,
    #[serde(default)]
    securities: Option<S<SpannedMap<SpannedMap<String>>>>,
    #[serde(default)]
    bundles: Option<S<SpannedMap<SpannedMap<String>>>>,
    #[serde(default)]
    schedules: Option<S<SpannedMap<Vec<S<String>>>>>,
}

struct Validator<'t> {
    text: &'t str,
    diagnostics: Vec<Diagnostic>,
}

impl<'t> Validator<'t> {
    fn report<T>(&mut self, at: &S<T>, code: DiagnosticCode, message: impl Into<String>) {
        let (line, column) = line_column(self.text, at.start());
        self.diagnostics.push(Diagnostic {
            code,
            message: message.into(),
            line,
            column,
        });
    }

    /// Checks keys against a known id set and reports missing ones at `whole`.
    fn keyed_by<V>(
        &mut self,
        whole: &S<SpannedMap<V>>,
        known: &[String],
        unknown: DiagnosticCode,
        missing: DiagnosticCode,
        what: &str,
    ) {
        let known_set: HashSet<&str> = known.iter().map(String::as_str).collect();
        for key in whole.keys() {
            if !known_set.contains(key.as_str()) {
                self.report(key, unknown, format!("{what} refers to undeclared {:?}", key.as_str()));
            }
        }
        for id in known {
            if !whole.contains_key(id.as_str()) {
                self.report(whole, missing, format!("{what} missing for {id:?}"));
            }
        }
    }

    fn rational(&mut self, value: &S<String>) -> Option<Rational> {
        let parsed = rational::parse(value);
        if parsed.is_none() {
            self.report(
                value,
                DiagnosticCode::BadRational,
                format!("{:?} is not a rational of the form \"a/b\"", value.as_str()),
            );
        }
        parsed
    }

    fn payoff_map(
        &mut self,
        map: &S<SpannedMap<String>>,
        states: &[String],
        missing: DiagnosticCode,
        owner: &str,
    ) -> Option<IndexMap<String, Exact>> {
        let mut out = IndexMap::new();
        let mut ok = true;
        let known: HashSet<&str> = states.iter().map(String::as_str).collect();
        for (state, value) in map.iter() {
            if !known.contains(state.as_str()) {
                self.report(
                    state,
                    DiagnosticCode::UnknownState,
                    format!("{owner}: unknown state {:?}", state.as_str()),
                );
                ok = false;
            }
            match self.rational(value) {
                Some(v) => {
                    out.insert(state.get_ref().clone(), Exact(v));
                }
                None => ok = false,
            }
        }
        for s in states {
            if !map.contains_key(s.as_str()) {
                self.report(map, missing, format!("{owner}: no value for state {s:?}"));
                ok = false;
            }
        }
        ok.then_some(out)
    }
}

/// 1-based line and column (in characters) of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    (line, before[line_start..].chars().count() + 1)
}

fn id_list(
    v: &mut Validator<'_>,
    ids: &S<Vec<S<String>>>,
    empty: DiagnosticCode,
    dup: DiagnosticCode,
    what: &str,
) -> Vec<String> {
    if ids.is_empty() {
        v.report(ids, empty, format!("at least one {what} is required"));
    }
    let mut seen = HashSet::new();
    for id in ids.iter() {
        if !seen.insert(id.as_str()) {
            v.report(id, dup, format!("{what} {:?} declared twice", id.as_str()));
        }
    }
    ids.iter().map(|s| s.get_ref().clone()).collect()
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> std::result::Result<ModelDocument, Vec<Diagnostic>> {
    let raw: RawDocument = json_spanned_value::from_str(text).map_err(|e| {
        vec![Diagnostic {
            code: DiagnosticCode::Syntax,
            message: e.to_string(),
            line: e.line(),
            column: e.column(),
        }]
    })?;
    let mut v = Validator {
        text,
        diagnostics: Vec::new(),
    };

    if *raw.schema != SCHEMA_VERSION {
        v.report(
            &raw.schema,
            DiagnosticCode::UnsupportedSchema,
            format!("schema {} is not supported (expected {SCHEMA_VERSION})", *raw.schema),
        );
    }
    let states = id_list(
        &mut v,
        &raw.states,
        DiagnosticCode::NoStates,
        DiagnosticCode::DuplicateState,
        "state",
    );
    let agents = id_list(
        &mut v,
        &raw.agents,
        DiagnosticCode::NoAgents,
        DiagnosticCode::DuplicateAgent,
        "agent",
    );
    let state_set: HashSet<&str> = states.iter().map(String::as_str).collect();

    v.keyed_by(
        &raw.partitions,
        &agents,
        DiagnosticCode::UnknownAgent,
        DiagnosticCode::MissingPartition,
        "partition",
    );
    let mut partitions = IndexMap::new();
    for (agent, blocks) in raw.partitions.iter() {
        let mut covered: BTreeSet<&str> = BTreeSet::new();
        for block in blocks.iter() {
            if block.is_empty() {
                v.report(
                    block,
                    DiagnosticCode::EmptyBlock,
                    format!("partition of agent {:?} has an empty block", agent.as_str()),
                );
            }
            for state in block.iter() {
                if !state_set.contains(state.as_str()) {
                    v.report(
                        state,
                        DiagnosticCode::UnknownState,
                        format!(
                            "partition of agent {:?}: unknown state {:?}",
                            agent.as_str(),
                            state.as_str()
                        ),
                    );
                } else if !covered.insert(state.as_str()) {
                    v.report(
                        state,
                        DiagnosticCode::BlocksOverlap,
                        format!(
                            "partition of agent {:?}: state {:?} appears in more than one block",
                            agent.as_str(),
                            state.as_str()
                        ),
                    );
                }
            }
        }
        let uncovered: Vec<&str> = states
            .iter()
            .map(String::as_str)
            .filter(|s| !covered.contains(s))
            .collect();
        if !uncovered.is_empty() {
            v.report(
                blocks,
                DiagnosticCode::BlocksIncomplete,
                format!("partition of agent {:?} does not cover {uncovered:?}", agent.as_str()),
            );
        }
        let plain: Vec<Vec<String>> = blocks
            .iter()
            .map(|b| b.iter().map(|s| s.get_ref().clone()).collect())
            .collect();
        partitions.insert(agent.get_ref().clone(), plain);
    }

    v.keyed_by(
        &raw.priors,
        &agents,
        DiagnosticCode::UnknownAgent,
        DiagnosticCode::MissingPrior,
        "prior",
    );
    let mut priors = IndexMap::new();
    for (agent, masses) in raw.priors.iter() {
        let owner = format!("prior of agent {:?}", agent.as_str());
        let Some(map) = v.payoff_map(masses, &states, DiagnosticCode::PriorMissingState, &owner) else {
            continue;
        };
        let mut ok = true;
        for (state, mass) in masses.iter() {
            let value = &map[state.as_str()].0;
            if value.is_zero() {
                v.report(
                    mass,
                    DiagnosticCode::ZeroMass,
                    format!("{owner}: state {:?} has zero mass", state.as_str()),
                );
                ok = false;
            } else if value.is_negative() {
                v.report(
                    mass,
                    DiagnosticCode::NegativeMass,
                    format!("{owner}: state {:?} has negative mass", state.as_str()),
                );
                ok = false;
            }
        }
        let total: Rational = map.values().map(|m| &m.0).sum();
        if ok && !total.is_one() {
            v.report(
                masses,
                DiagnosticCode::PriorNotNormalized,
                format!("{owner} sums to {total}, not 1"),
            );
        }
        priors.insert(agent.get_ref().clone(), map);
    }

    let mut securities = IndexMap::new();
    if let Some(raw_securities) = &raw.securities {
        for (name, payoffs) in raw_securities.iter() {
            let owner = format!("security {:?}", name.as_str());
            if let Some(map) = v.payoff_map(payoffs, &states, DiagnosticCode::SecurityMissingState, &owner) {
                securities.insert(name.get_ref().clone(), map);
            }
        }
    }

    let mut bundles = IndexMap::new();
    if let Some(raw_bundles) = &raw.bundles {
        for (name, members) in raw_bundles.iter() {
            v.keyed_by(
                members,
                &agents,
                DiagnosticCode::UnknownAgent,
                DiagnosticCode::BundleMissingAgent,
                &format!("bundle {:?}", name.as_str()),
            );
            let mut plain = IndexMap::new();
            for (agent, security) in members.iter() {
                if !securities.contains_key(security.as_str()) && !raw_securities_has(&raw, security.as_str()) {
                    v.report(
                        security,
                        DiagnosticCode::BundleUnknownSecurity,
                        format!(
                            "bundle {:?} refers to undeclared security {:?}",
                            name.as_str(),
                            security.as_str()
                        ),
                    );
                }
                plain.insert(agent.get_ref().clone(), security.get_ref().clone());
            }
            bundles.insert(name.get_ref().clone(), plain);
        }
    }

    let mut schedules = IndexMap::new();
    if let Some(raw_schedules) = &raw.schedules {
        let agent_set: HashSet<&str> = agents.iter().map(String::as_str).collect();
        for (name, order) in raw_schedules.iter() {
            if order.is_empty() {
                v.report(
                    order,
                    DiagnosticCode::EmptySchedule,
                    format!("schedule {:?} is empty", name.as_str()),
                );
            }
            for agent in order.iter() {
                if !agent_set.contains(agent.as_str()) {
                    v.report(
                        agent,
                        DiagnosticCode::UnknownAgent,
                        format!(
                            "schedule {:?} refers to undeclared agent {:?}",
                            name.as_str(),
                            agent.as_str()
                        ),
                    );
                }
            }
            schedules.insert(
                name.get_ref().clone(),
                order.iter().map(|a| a.get_ref().clone()).collect(),
            );
        }
    }

    if !v.diagnostics.is_empty() {
        return Err(v.diagnostics);
    }
    Ok(ModelDocument {
        schema: *raw.schema,
        comment: raw.comment,
        states,
        agents,
        partitions,
        priors,
        securities,
        bundles,
        schedules,
    })
}

fn raw_securities_has(raw: &RawDocument, name: &str) -> bool {
    raw.securities.as_ref().is_some_and(|s| s.contains_key(name))
}

impl ModelDocument {
    /// Canonical document for a model: maps follow agent and state order.
    pub fn from_model<'a>(model: &Model, securities: impl IntoIterator<Item = (&'a str, &'a Security)>) -> Self {
        let frame = model.frame();
        let states = frame.space().names().to_vec();
        let state_map = |values: &[Rational]| -> IndexMap<String, Exact> {
            states.iter().cloned().zip(values.iter().cloned().map(Exact)).collect()
        };
        let partitions = frame
            .agents()
            .map(|a| {
                let blocks = frame
                    .partition(a)
                    .blocks()
                    .iter()
                    .map(|b| b.iter().map(|&s| frame.state_name(s).to_owned()).collect())
                    .collect();
                (frame.agent_name(a).to_owned(), blocks)
            })
            .collect();
        let priors = frame
            .agents()
            .map(|a| (frame.agent_name(a).to_owned(), state_map(model.prior(a).masses())))
            .collect();
        let securities = securities
            .into_iter()
            .map(|(name, x)| (name.to_owned(), state_map(x.payoffs())))
            .collect();
        ModelDocument {
            schema: SCHEMA_VERSION,
            comment: None,
            states,
            agents: frame.agent_names().to_vec(),
            partitions,
            priors,
            securities,
            bundles: IndexMap::new(),
            schedules: IndexMap::new(),
        }
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("document serializes");
        out.push('\n');
        out
    }

    pub fn frame(&self) -> Result<Frame> {
        let space = StateSpace::new(self.states.iter().cloned())?;
        let partitions = self
            .agents
            .iter()
            .map(|agent| {
                let blocks = self
                    .partitions
                    .get(agent)
                    .ok_or_else(|| Error::InvalidPartition(format!("no partition for agent {agent:?}")))?;
                let blocks = blocks
                    .iter()
                    .map(|b| b.iter().map(|s| space.id(s)).collect::<Result<Vec<StateId>>>())
                    .collect::<Result<Vec<_>>>()?;
                Partition::new(space.len(), blocks)
            })
            .collect::<Result<Vec<_>>>()?;
        Frame::new(space, self.agents.iter().cloned(), partitions)
    }

    pub fn model(&self) -> Result<Model> {
        let frame = self.frame()?;
        let priors = self
            .agents
            .iter()
            .map(|agent| {
                let masses = self
                    .priors
                    .get(agent)
                    .ok_or_else(|| Error::InvalidPrior(format!("no prior for agent {agent:?}")))?;
                Prior::new(self.state_values(masses)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Model::new(frame, priors)
    }

    fn state_values(&self, map: &IndexMap<String, Exact>) -> Result<Vec<Rational>> {
        self.states
            .iter()
            .map(|s| {
                map.get(s)
                    .map(|v| v.0.clone())
                    .ok_or_else(|| Error::UnknownState(s.clone()))
            })
            .collect()
    }

    pub fn security(&self, name: &str) -> Result<Security> {
        let map = self
            .securities
            .get(name)
            .ok_or_else(|| Error::Input(format!("no security named {name:?}")))?;
        Ok(Security::new(self.state_values(map)?))
    }

    pub fn bundle(&self, name: &str) -> Result<SecurityBundle> {
        let members = self
            .bundles
            .get(name)
            .ok_or_else(|| Error::Input(format!("no bundle named {name:?}")))?;
        let securities = self
            .agents
            .iter()
            .map(|agent| {
                let security = members
                    .get(agent)
                    .ok_or_else(|| Error::Input(format!("bundle {name:?} has no security for agent {agent:?}")))?;
                self.security(security)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SecurityBundle::new(securities))
    }

    pub fn schedule(&self, name: &str) -> Result<Vec<AgentId>> {
        let order = self
            .schedules
            .get(name)
            .ok_or_else(|| Error::Input(format!("no schedule named {name:?}")))?;
        let frame = self.frame()?;
        order.iter().map(|a| frame.agent(a)).collect()
    }
}
