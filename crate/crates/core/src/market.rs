//! Market scoring rules with myopic traders.
//!
//! A market maker opens with a prediction `y_0`; traders then move the
//! prediction in schedule order and are paid `s(y_t, x*) - s(y_{t-1}, x*)`
//! once the true payoff `x*` is revealed. A myopic trader facing a strictly
//! proper rule announces its conditional expectation, so the information
//! dynamics are exactly those of [`crate::dynamics`].
//!
//! On a finite model the price path becomes periodic after the fixed point
//! `t*`, with period dividing the schedule length. Prices converge to the
//! true payoff (information is aggregated) iff that periodic tail is the
//! constant `X(true state)`; this is how convergence is decided here.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;
use serde::{Serialize, Serializer};

use crate::dynamics::{self, CorollaryVerdict};
use crate::error::{Error, Result};
use crate::model::{AgentId, Event, Frame, Model, Security, StateId};
use crate::rational::{self, Rational};
use crate::verifiability::WitnessRecord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScoringRule {
    /// `s(y, x) = -(x - y)^2`, evaluated exactly.
    Quadratic,
    /// `s(y, x) = (x - a) ln(y - a) + (b - x) ln(b - y)`, evaluated in `f64`.
    Logarithmic { a: Rational, b: Rational },
}

impl ScoringRule {
    /// Logarithmic rule with a unit margin around the security's payoffs.
    pub fn logarithmic_for(security: &Security) -> Self {
        let (min, max) = payoff_range(security);
        ScoringRule::Logarithmic {
            a: min - rational::one(),
            b: max + rational::one(),
        }
    }

    /// The logarithmic bounds must strictly enclose every payoff.
    pub fn check_for(&self, security: &Security) -> Result<()> {
        if let ScoringRule::Logarithmic { a, b } = self {
            let (min, max) = payoff_range(security);
            if !(a < &min && b > &max) {
                return Err(Error::InvalidRule(format!(
                    "logarithmic bounds ({a}, {b}) must strictly enclose payoffs [{min}, {max}]"
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScoringRule::Quadratic => "quadratic",
            ScoringRule::Logarithmic { .. } => "logarithmic",
        }
    }
}

impl fmt::Display for ScoringRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoringRule::Quadratic => f.write_str("quadratic"),
            ScoringRule::Logarithmic { a, b } => write!(f, "logarithmic(a={a}, b={b})"),
        }
    }
}

impl Serialize for ScoringRule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

fn payoff_range(security: &Security) -> (Rational, Rational) {
    let mut values = security.payoffs().iter();
    let first = values.next().cloned().unwrap_or_default();
    values.fold((first.clone(), first), |(lo, hi), v| {
        (lo.min(v.clone()), hi.max(v.clone()))
    })
}

/// A score: exact for the quadratic rule, floating point for the logarithmic one.
#[derive(Debug, Clone, PartialEq)]
pub enum Score {
    Exact(Rational),
    Approx(f64),
}

impl Score {
    pub fn to_f64(&self) -> f64 {
        match self {
            Score::Exact(q) => rational::to_f64(q),
            Score::Approx(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&Rational> {
        match self {
            Score::Exact(q) => Some(q),
            Score::Approx(_) => None,
        }
    }

    pub fn minus(&self, other: &Score) -> Score {
        match (self, other) {
            (Score::Exact(a), Score::Exact(b)) => Score::Exact(a - b),
            _ => Score::Approx(self.to_f64() - other.to_f64()),
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Score::Exact(q) => write!(f, "{q}"),
            Score::Approx(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Score::Exact(q) => s.serialize_str(&rational::format(q)),
            Score::Approx(x) => s.serialize_f64(*x),
        }
    }
}

/// Score of `prediction` once the payoff turns out to be `outcome`.
pub fn score(rule: &ScoringRule, prediction: &Rational, outcome: &Rational) -> Result<Score> {
    match rule {
        ScoringRule::Quadratic => {
            let miss = outcome - prediction;
            Ok(Score::Exact(-(&miss * &miss)))
        }
        ScoringRule::Logarithmic { a, b } => {
            if !(a < prediction && prediction < b) {
                return Err(Error::ScoreDomain {
                    prediction: prediction.to_string(),
                    lower: a.to_string(),
                    upper: b.to_string(),
                });
            }
            let (a, b) = (rational::to_f64(a), rational::to_f64(b));
            let (y, x) = (rational::to_f64(prediction), rational::to_f64(outcome));
            Ok(Score::Approx((x - a) * (y - a).ln() + (b - x) * (b - y).ln()))
        }
    }
}

/// A myopic trader's prediction: its expectation given its cell at `state` and the public information.
pub fn myopic_prediction(
    model: &Model,
    security: &Security,
    agent: AgentId,
    state: StateId,
    public: &Event,
) -> Result<Rational> {
    model.frame().check_event(public)?;
    model.expectation_given(security, agent, state, public)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Terminal {
    Constant {
        #[serde(with = "rational::as_string")]
        price: Rational,
    },
    /// Prices repeat with `period`; `prices` lists one period starting at the first schedule slot.
    Cycle {
        period: usize,
        #[serde(with = "rational::vec_string")]
        prices: Vec<Rational>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trade {
    pub t: usize,
    pub agent: AgentId,
    pub price: Rational,
    pub payoff: Score,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketRun {
    pub true_state: StateId,
    pub rule: ScoringRule,
    pub initial: Rational,
    pub schedule: Vec<AgentId>,
    pub trades: Vec<Trade>,
    pub t_star: usize,
    pub terminal_public: Event,
    pub terminal: Terminal,
    pub aggregated: bool,
}

impl MarketRun {
    pub fn prices(&self) -> Vec<Rational> {
        self.trades.iter().map(|t| t.price.clone()).collect()
    }

    pub fn final_price(&self) -> &Rational {
        self.trades.last().map_or(&self.initial, |t| &t.price)
    }

    pub fn total_payoff(&self) -> Score {
        self.trades
            .iter()
            .fold(Score::Exact(Rational::zero()), |acc, t| match (&acc, &t.payoff) {
                (Score::Exact(a), Score::Exact(b)) => Score::Exact(a + b),
                _ => Score::Approx(acc.to_f64() + t.payoff.to_f64()),
            })
    }

    /// One row per round: `t,agent,price,payoff`.
    pub fn to_csv(&self, frame: &Frame) -> String {
        let mut out = String::from("t,agent,price,payoff\n");
        for trade in &self.trades {
            out.push_str(&format!(
                "{},{},{},{}\n",
                trade.t,
                frame.agent_name(trade.agent),
                trade.price,
                trade.payoff
            ));
        }
        out
    }

    pub fn record(&self, frame: &Frame) -> MarketRecord {
        MarketRecord {
            true_state: frame.state_name(self.true_state).to_owned(),
            rule: self.rule.to_string(),
            initial: self.initial.clone(),
            schedule: self.schedule.iter().map(|a| frame.agent_name(*a).to_owned()).collect(),
            trades: self
                .trades
                .iter()
                .map(|t| TradeRecord {
                    t: t.t,
                    agent: frame.agent_name(t.agent).to_owned(),
                    price: t.price.clone(),
                    payoff: t.payoff.clone(),
                })
                .collect(),
            t_star: self.t_star,
            terminal_public: self.terminal_public.names(frame.space()),
            terminal: self.terminal.clone(),
            aggregated: self.aggregated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeRecord {
    pub t: usize,
    pub agent: String,
    #[serde(with = "rational::as_string")]
    pub price: Rational,
    pub payoff: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketRecord {
    pub true_state: String,
    pub rule: String,
    #[serde(with = "rational::as_string")]
    pub initial: Rational,
    pub schedule: Vec<String>,
    pub trades: Vec<TradeRecord>,
    pub t_star: usize,
    pub terminal_public: Vec<String>,
    pub terminal: Terminal,
    pub aggregated: bool,
}

/// Default opening prediction: the midpoint of the payoff range.
pub fn default_initial(security: &Security) -> Rational {
    let (min, max) = payoff_range(security);
    rational::midpoint(&min, &max)
}

/// Default number of schedule passes: enough to pass the fixed point and observe the tail.
pub fn default_cycles(n_states: usize) -> usize {
    2 * n_states + 2
}

/// Runs `max_cycles` passes of the schedule (default `2|Ω| + 2`).
pub fn run_market(
    model: &Model,
    security: &Security,
    true_state: StateId,
    rule: &ScoringRule,
    initial: Option<Rational>,
    schedule: &[AgentId],
    max_cycles: Option<usize>,
) -> Result<MarketRun> {
    let frame = model.frame();
    frame.check_security(security)?;
    frame.check_state(true_state)?;
    dynamics::check_schedule(frame, schedule)?;
    rule.check_for(security)?;
    let (min, max) = payoff_range(security);
    let initial = initial.unwrap_or_else(|| default_initial(security));
    if initial < min || initial > max {
        return Err(Error::Input(format!(
            "opening prediction {initial} outside the payoff range [{min}, {max}]"
        )));
    }
    let cycles = max_cycles.unwrap_or_else(|| default_cycles(frame.n_states()));
    let rounds = cycles * schedule.len();
    let outcome = security.payoff(true_state).clone();

    let mut public = frame.space().all();
    let mut trades = Vec::with_capacity(rounds);
    let mut last_refinement = 0;
    let mut previous = score(rule, &initial, &outcome)?;
    for t in 1..=rounds {
        let agent = schedule[(t - 1) % schedule.len()];
        let (price, next) = dynamics::announce(model, security, true_state, agent, &public)?;
        if next.len() < public.len() {
            last_refinement = t;
        }
        public = next;
        let current = score(rule, &price, &outcome)?;
        trades.push(Trade {
            t,
            agent,
            price,
            payoff: current.minus(&previous),
        });
        previous = current;
    }
    let t_star = last_refinement + 1;
    if t_star + schedule.len() > rounds + 1 {
        return Err(Error::Precondition(format!(
            "{cycles} cycles end before a full pass without refinement; increase max_cycles"
        )));
    }

    let terminal = classify_tail(&trades[t_star - 1..], schedule.len());
    let aggregated = matches!(&terminal, Terminal::Constant { price } if price == &outcome);
    Ok(MarketRun {
        true_state,
        rule: rule.clone(),
        initial,
        schedule: schedule.to_vec(),
        trades,
        t_star,
        terminal_public: public,
        terminal,
        aggregated,
    })
}

/// Classifies the tail after `t*`, which repeats with the schedule length.
fn classify_tail(tail: &[Trade], schedule_len: usize) -> Terminal {
    let mut slots: Vec<Option<Rational>> = vec![None; schedule_len];
    for trade in tail {
        slots[(trade.t - 1) % schedule_len].get_or_insert_with(|| trade.price.clone());
    }
    let pattern: Vec<Rational> = slots.into_iter().map(|s| s.expect("tail covers a full pass")).collect();
    let period = (1..=schedule_len)
        .filter(|d| schedule_len.is_multiple_of(*d))
        .find(|&d| (0..schedule_len).all(|i| pattern[i] == pattern[(i + d) % schedule_len]))
        .unwrap_or(schedule_len);
    if period == 1 {
        Terminal::Constant {
            price: pattern[0].clone(),
        }
    } else {
        Terminal::Cycle {
            period,
            prices: pattern[..period].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationCheck {
    pub run: MarketRun,
    pub terminal_threshold: Option<WitnessRecord>,
    pub verdict: CorollaryVerdict,
}

/// Threshold verifiability on the terminal public information implies aggregation.
pub fn check_corollary2(
    model: &Model,
    security: &Security,
    state: StateId,
    rule: &ScoringRule,
    schedule: &[AgentId],
) -> Result<AggregationCheck> {
    let run = run_market(model, security, state, rule, None, schedule, None)?;
    let terminal_threshold = dynamics::terminal_threshold(model.frame(), security, &run.terminal_public, state)?;
    let verdict = CorollaryVerdict::from_implication(terminal_threshold.is_some(), run.aggregated);
    Ok(AggregationCheck {
        run,
        terminal_threshold,
        verdict,
    })
}

/// Grid search for the prediction maximizing the expected score under a
/// discrete distribution. The grid runs from the smallest to the largest
/// value in steps of `step`.
pub fn properness_probe(
    rule: &ScoringRule,
    values: &[Rational],
    probabilities: &[Rational],
    step: &Rational,
) -> Result<Rational> {
    if values.is_empty() || values.len() != probabilities.len() {
        return Err(Error::Input("need one probability per value".into()));
    }
    if step <= &Rational::zero() {
        return Err(Error::Input("grid step must be positive".into()));
    }
    let security = Security::new(values.to_vec());
    rule.check_for(&security)?;
    let (min, max) = payoff_range(&security);

    let points = ((&max - &min) / step).floor().to_integer();
    let points: u64 = points.try_into().map_err(|_| Error::Input("grid too large".into()))?;
    let grid = |j: u64| &min + step * Rational::from_integer(j.into());
    let best = match rule {
        ScoringRule::Quadratic => {
            // With y = min + j*step, E[-(X - y)^2] = c0 + c1 j + c2 j^2; scaling the
            // coefficients by a common positive denominator keeps the scan in integers.
            let (m1, m2) = moments(values, probabilities);
            let c0 = -(&m2 - rational::int(2) * &min * &m1 + &min * &min);
            let c1 = rational::int(2) * step * (&m1 - &min);
            let c2 = -(step * step);
            let scale = [&c0, &c1, &c2]
                .iter()
                .fold(BigInt::from(1), |acc, c| acc.lcm(c.denom()));
            let [k0, k1, k2] = [c0, c1, c2].map(|c| (c * Rational::from_integer(scale.clone())).to_integer());
            let expected = |j: u64| {
                let j = BigInt::from(j);
                &k0 + &k1 * &j + &k2 * &j * &j
            };
            let mut best = (0, expected(0));
            for j in 1..=points {
                let e = expected(j);
                if e > best.1 {
                    best = (j, e);
                }
            }
            best.0
        }
        ScoringRule::Logarithmic { a, b } => {
            let (a, b) = (rational::to_f64(a), rational::to_f64(b));
            let weighted: Vec<(f64, f64)> = values
                .iter()
                .zip(probabilities)
                .map(|(v, p)| (rational::to_f64(v), rational::to_f64(p)))
                .collect();
            let expected = |y: f64| {
                weighted
                    .iter()
                    .map(|(x, p)| p * ((x - a) * (y - a).ln() + (b - x) * (b - y).ln()))
                    .sum::<f64>()
            };
            let mut best = (0, f64::NEG_INFINITY);
            let (start, delta) = (rational::to_f64(&min), rational::to_f64(step));
            for j in 0..=points {
                let e = expected(start + j as f64 * delta);
                if e > best.1 {
                    best = (j, e);
                }
            }
            best.0
        }
    };
    Ok(grid(best))
}

fn moments(values: &[Rational], probabilities: &[Rational]) -> (Rational, Rational) {
    values
        .iter()
        .zip(probabilities)
        .fold((Rational::zero(), Rational::zero()), |(m1, m2), (v, p)| {
            (m1 + v * p, m2 + v * v * p)
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::{int, ratio};

    fn w(i: usize) -> StateId {
        StateId(i - 1)
    }

    #[test]
    fn score_examples() {
        assert_eq!(
            score(&ScoringRule::Quadratic, &ratio(-1, 3), &int(1)).unwrap(),
            Score::Exact(ratio(-16, 9))
        );
        assert_eq!(
            score(&ScoringRule::Quadratic, &ratio(2, 7), &ratio(2, 7)).unwrap(),
            Score::Exact(int(0))
        );
        let log = ScoringRule::Logarithmic { a: int(-2), b: int(6) };
        let s = score(&log, &int(5), &int(5)).unwrap().to_f64();
        assert!((s - 7.0 * 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_score_domain() {
        let log = ScoringRule::Logarithmic { a: int(-2), b: int(6) };
        assert!(matches!(score(&log, &int(6), &int(1)), Err(Error::ScoreDomain { .. })));
        assert!(matches!(score(&log, &int(-2), &int(1)), Err(Error::ScoreDomain { .. })));
        let e2 = fixtures::e2();
        let tight = ScoringRule::Logarithmic { a: int(-1), b: int(6) };
        assert!(tight.check_for(&e2.security).is_err());
        assert!(ScoringRule::logarithmic_for(&e2.security)
            .check_for(&e2.security)
            .is_ok());
    }

    #[test]
    fn myopic_examples() {
        let e2 = fixtures::e2();
        let all = e2.model.frame().space().all();
        assert_eq!(
            myopic_prediction(&e2.model, &e2.security, AgentId(0), w(1), &all).unwrap(),
            ratio(-1, 3)
        );
        let only3 = Event::singleton(w(3));
        assert_eq!(
            myopic_prediction(&e2.model, &e2.security, AgentId(1), w(3), &only3).unwrap(),
            int(-1)
        );
        assert_eq!(
            myopic_prediction(&e2.model, &e2.security, AgentId(1), w(2), &only3),
            Err(Error::EmptyEvent)
        );
        let e1 = fixtures::e1();
        let all = e1.model.frame().space().all();
        assert_eq!(
            myopic_prediction(&e1.model, &e1.security, AgentId(1), w(1), &all).unwrap(),
            ratio(1, 3)
        );
    }

    #[test]
    fn market_examples() {
        let e2 = fixtures::e2();
        let order = dynamics::default_schedule(e2.model.frame());
        let run = run_market(
            &e2.model,
            &e2.security,
            w(5),
            &ScoringRule::Quadratic,
            Some(int(0)),
            &order,
            None,
        )
        .unwrap();
        assert!(run.prices().iter().all(|p| p == &int(5)));
        assert!(run.aggregated);
        assert_eq!(run.terminal, Terminal::Constant { price: int(5) });

        let run = run_market(
            &e2.model,
            &e2.security,
            w(1),
            &ScoringRule::Quadratic,
            Some(int(0)),
            &order,
            None,
        )
        .unwrap();
        assert_eq!(
            run.terminal,
            Terminal::Cycle {
                period: 2,
                prices: vec![ratio(-1, 3), ratio(1, 3)]
            }
        );
        assert!(!run.aggregated);
        assert_eq!(run.trades.len(), 2 * default_cycles(5));
    }

    #[test]
    fn payoffs_telescope() {
        let e2 = fixtures::e2();
        let order = dynamics::default_schedule(e2.model.frame());
        for s in e2.model.frame().states() {
            let run = run_market(&e2.model, &e2.security, s, &ScoringRule::Quadratic, None, &order, None).unwrap();
            let x = e2.security.payoff(s);
            let expected = score(&run.rule, run.final_price(), x)
                .unwrap()
                .minus(&score(&run.rule, &run.initial, x).unwrap());
            assert_eq!(run.total_payoff(), expected);
        }
    }

    #[test]
    fn market_input_errors() {
        let e2 = fixtures::e2();
        let order = dynamics::default_schedule(e2.model.frame());
        assert!(run_market(
            &e2.model,
            &e2.security,
            w(1),
            &ScoringRule::Quadratic,
            Some(int(9)),
            &order,
            None
        )
        .is_err());
        assert!(run_market(
            &e2.model,
            &e2.security,
            w(1),
            &ScoringRule::Quadratic,
            None,
            &order,
            Some(1)
        )
        .is_err());
        assert!(run_market(
            &e2.model,
            &e2.security,
            w(1),
            &ScoringRule::Quadratic,
            None,
            &[AgentId(0)],
            None
        )
        .is_err());
    }

    #[test]
    fn corollary2_examples() {
        let e2 = fixtures::e2();
        let order = dynamics::default_schedule(e2.model.frame());
        let c = check_corollary2(&e2.model, &e2.security, w(5), &ScoringRule::Quadratic, &order).unwrap();
        assert_eq!(c.verdict, CorollaryVerdict::Pass);
        let c = check_corollary2(&e2.model, &e2.security, w(1), &ScoringRule::Quadratic, &order).unwrap();
        assert_eq!(c.verdict, CorollaryVerdict::Vacuous);
    }

    #[test]
    fn properness_examples() {
        let step = ratio(1, 1000);
        let values = [int(0), int(1)];
        let half = [ratio(1, 2), ratio(1, 2)];
        let q = properness_probe(&ScoringRule::Quadratic, &values, &half, &step).unwrap();
        assert_eq!(q, ratio(1, 2));
        let log = ScoringRule::Logarithmic { a: int(-1), b: int(2) };
        let l = properness_probe(&log, &values, &half, &step).unwrap();
        assert!((&l - ratio(1, 2)) <= step && (ratio(1, 2) - &l) <= step);
        let point = properness_probe(&ScoringRule::Quadratic, &[int(3)], &[int(1)], &step).unwrap();
        assert_eq!(point, int(3));
    }

    #[test]
    fn csv_export() {
        let e2 = fixtures::e2();
        let order = dynamics::default_schedule(e2.model.frame());
        let run = run_market(
            &e2.model,
            &e2.security,
            w(1),
            &ScoringRule::Quadratic,
            Some(int(0)),
            &order,
            Some(3),
        )
        .unwrap();
        let csv = run.to_csv(e2.model.frame());
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,agent,price,payoff"));
        // -(1 + 1/3)^2 - (-(1 - 0)^2) = -16/9 + 1
        assert_eq!(lines.next(), Some("1,1,-1/3,-7/9"));
        assert_eq!(lines.next(), Some("2,2,1/3,4/3"));
    }
}
