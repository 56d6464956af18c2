//! The two worked examples, shipped as model documents.

use crate::io::{parse_model, ModelDocument};
use crate::model::{Model, Security};

pub const E1_JSON: &str = include_str!("../fixtures/e1.json");
pub const E2_JSON: &str = include_str!("../fixtures/e2.json");

/// A parsed fixture with its primary security `X`.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub document: ModelDocument,
    pub model: Model,
    pub security: Security,
}

fn load(text: &str) -> Fixture {
    let document = parse_model(text).expect("fixture parses");
    let model = document.model().expect("fixture is a valid model");
    let security = document.security("X").expect("fixture defines X");
    Fixture {
        document,
        model,
        security,
    }
}

/// Four states, two agents, crossed partitions, opposite priors.
pub fn e1() -> Fixture {
    load(E1_JSON)
}

/// Five states; agent 1 alone observes the high-payoff state `w5`.
pub fn e2() -> Fixture {
    load(E2_JSON)
}

/// Looks up a built-in fixture by name (`e1`, `e2`).
pub fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "e1" => Some(E1_JSON),
        "e2" => Some(E2_JSON),
        _ => None,
    }
}
