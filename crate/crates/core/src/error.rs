use thiserror::Error;

use crate::rational::Rational;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("unknown state {0:?}")]
    UnknownState(String),
    #[error("agent index {0} out of range")]
    AgentOutOfRange(usize),
    #[error("state index {0} out of range")]
    StateOutOfRange(usize),
    #[error("duplicate identifier {0:?}")]
    DuplicateId(String),
    #[error("state space must contain at least one state")]
    NoStates,
    #[error("model must contain at least one agent")]
    NoAgents,
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("security must assign a payoff to each of the {expected} states, got {got}")]
    SecurityLength { expected: usize, got: usize },
    #[error("event is empty")]
    EmptyEvent,
    #[error("announcement schedule is empty")]
    EmptySchedule,
    #[error("announcement schedule never lets agent {0:?} speak")]
    ScheduleMissingAgent(String),
    #[error("prediction {prediction} outside the scoring rule domain ({lower}, {upper})")]
    ScoreDomain {
        prediction: String,
        lower: String,
        upper: String,
    },
    #[error("invalid scoring rule: {0}")]
    InvalidRule(String),
    #[error("security is not injective: payoff {value} at states {first:?} and {second:?}")]
    NotInjective {
        value: Rational,
        first: String,
        second: String,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid input: {0}")]
    Input(String),
}
