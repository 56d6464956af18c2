//! Brute-force oracles, written directly from the definitions and sharing no
//! code with the library beyond its data types.
#![allow(dead_code)]

use std::collections::BTreeSet;

use notrade::rational::Rational;
use notrade::{AgentId, Frame, Model, Prior, Security, StateId};
use num_traits::Zero;

pub type States = BTreeSet<usize>;

pub fn cell_of(frame: &Frame, agent: usize, state: usize) -> States {
    let partition = frame.partition(AgentId(agent));
    partition
        .blocks()
        .iter()
        .find(|b| b.contains(&StateId(state)))
        .expect("partition covers the state")
        .iter()
        .map(|s| s.0)
        .collect()
}

/// States where every agent's cell lies inside `event`.
pub fn everyone_knows(frame: &Frame, event: &States) -> States {
    (0..frame.n_states())
        .filter(|&w| (0..frame.n_agents()).all(|i| cell_of(frame, i, w).is_subset(event)))
        .collect()
}

/// The iterated everyone-knows fixed point `K*(E)`.
pub fn common_knowledge_fixpoint(frame: &Frame, event: &States) -> States {
    let mut current = everyone_knows(frame, event);
    loop {
        let next = everyone_knows(frame, &current);
        if next == current {
            return current;
        }
        current = next;
    }
}

pub fn is_self_evident(frame: &Frame, event: &States) -> bool {
    event
        .iter()
        .all(|&w| (0..frame.n_agents()).all(|i| cell_of(frame, i, w).is_subset(event)))
}

/// Smallest self-evident event containing `state`, by scanning every subset.
pub fn reach_by_subsets(frame: &Frame, state: usize) -> States {
    let n = frame.n_states();
    let mut best: Option<States> = None;
    for mask in 0u32..(1 << n) {
        if mask & (1 << state) == 0 {
            continue;
        }
        let event: States = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if is_self_evident(frame, &event) && best.as_ref().is_none_or(|b| event.len() < b.len()) {
            best = Some(event);
        }
    }
    best.expect("the whole space is self-evident")
}

pub fn expectation(prior: &Prior, x: &Security, cell: &States) -> Rational {
    let mut mass = Rational::zero();
    let mut total = Rational::zero();
    for &w in cell {
        let p = prior.mass(StateId(w));
        mass += p;
        total += p * x.payoff(StateId(w));
    }
    total / mass
}

pub fn max_on(x: &Security, states: &States) -> Rational {
    states
        .iter()
        .map(|&w| x.payoff(StateId(w)).clone())
        .max()
        .expect("non-empty")
}

pub fn min_on(x: &Security, states: &States) -> Rational {
    states
        .iter()
        .map(|&w| x.payoff(StateId(w)).clone())
        .min()
        .expect("non-empty")
}

/// Threshold verifiability by scanning every pair of states in `C(state)` for every agent.
pub fn threshold_by_pairs(frame: &Frame, x: &Security, state: usize) -> bool {
    let component = reach_by_subsets(frame, state);
    if component
        .iter()
        .all(|&w| x.payoff(StateId(w)) == x.payoff(StateId(state)))
    {
        return true;
    }
    (0..frame.n_agents()).any(|i| {
        component.iter().any(|&a| {
            component
                .iter()
                .any(|&b| max_on(x, &cell_of(frame, i, a)) < min_on(x, &cell_of(frame, i, b)))
        })
    })
}

/// Each agent's expectation at every state of `C(state)`, if constant per agent.
pub fn constant_expectations(model: &Model, xs: &[&Security], state: usize) -> Option<Vec<Rational>> {
    let frame = model.frame();
    let component = reach_by_subsets(frame, state);
    (0..frame.n_agents())
        .map(|i| {
            let values: BTreeSet<Rational> = component
                .iter()
                .map(|&w| expectation(model.prior(AgentId(i)), xs[i], &cell_of(frame, i, w)))
                .collect();
            (values.len() == 1).then(|| values.into_iter().next().expect("one value"))
        })
        .collect()
}

/// Common-knowledge trade in a single security, from the definition.
pub fn ck_trade(model: &Model, x: &Security, state: usize) -> Option<Vec<Rational>> {
    let xs = vec![x; model.frame().n_agents()];
    constant_expectations(model, &xs, state).filter(|e| e.iter().any(|v| v != &e[0]))
}

/// Threshold verifiability of `x` at `state` in the model where every cell is cut down to `public`.
pub fn threshold_on_public(frame: &Frame, x: &Security, public: &States, state: usize) -> bool {
    let cut = |i: usize, w: usize| -> States { cell_of(frame, i, w).intersection(public).copied().collect() };
    // Reach inside `public`.
    let mut component: States = [state].into();
    loop {
        let next: States = component
            .iter()
            .flat_map(|&w| (0..frame.n_agents()).flat_map(move |i| cut(i, w)))
            .chain(component.iter().copied())
            .collect();
        if next == component {
            break;
        }
        component = next;
    }
    if component
        .iter()
        .all(|&w| x.payoff(StateId(w)) == x.payoff(StateId(state)))
    {
        return true;
    }
    (0..frame.n_agents()).any(|i| {
        component
            .iter()
            .any(|&a| component.iter().any(|&b| max_on(x, &cut(i, a)) < min_on(x, &cut(i, b))))
    })
}

pub fn quadratic(y: &Rational, x: &Rational) -> Rational {
    -((x - y) * (x - y))
}

pub fn logarithmic(a: f64, b: f64, y: f64, x: f64) -> f64 {
    (x - a) * (y - a).ln() + (b - x) * (b - y).ln()
}
