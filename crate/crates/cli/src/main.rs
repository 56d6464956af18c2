use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use notrade::agreement::{self, Synthesis};
use notrade::dynamics;
use notrade::enumerate;
use notrade::io::{parse_model, ModelDocument};
use notrade::market::{self, ScoringRule};
use notrade::multi;
use notrade::rational::{self, Rational};
use notrade::report::{emit_report, Format, Report, Status};
use notrade::verifiability;
use notrade::{fixtures, AgentId, Error, Frame, Model, Security, StateId};

#[derive(Parser)]
#[command(
    name = "notrade",
    version,
    about = "Verifiability, common-knowledge trade and market dynamics on finite partition models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verifiability conditions per state.
    Check(ModelArgs),
    /// Common-knowledge trade under the model's priors, and whether any priors allow it.
    Trade(ModelArgs),
    /// Compare the exact trade decision with a randomized prior search.
    Oracle {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Build priors that produce common-knowledge trade.
    Synthesize(ModelArgs),
    /// Public announcements of conditional expectations.
    Dynamics {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Market scoring rule with myopic traders.
    Market {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long, value_enum, default_value_t = RuleArg::Quadratic)]
        rule: RuleArg,
        /// Opening prediction (default: midpoint of the payoff range).
        #[arg(long, allow_hyphen_values = true)]
        y0: Option<String>,
        /// Lower bound of the logarithmic rule (default: minimum payoff - 1).
        #[arg(long, allow_hyphen_values = true)]
        log_a: Option<String>,
        /// Upper bound of the logarithmic rule (default: maximum payoff + 1).
        #[arg(long, allow_hyphen_values = true)]
        log_b: Option<String>,
        /// Passes through the schedule (default: 2|states| + 2).
        #[arg(long)]
        cycles: Option<usize>,
    },
    /// Agent-specific securities: a named bundle, or the split of --security.
    Multi {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        bundle: Option<String>,
    },
    /// Exhaustive check of threshold verifiability against possible trade.
    Theorem(SweepArgs),
    /// Exhaustive check of the bundle-level equivalence over split bundles.
    Proposition(SweepArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Model file, or a built-in fixture (e1, e2).
    #[arg(long, default_value = "e1")]
    model: String,
    #[arg(long, default_value = "X")]
    security: String,
    /// State name; all states when omitted.
    #[arg(long)]
    state: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Comma-separated agent names, or the name of a schedule in the model file.
    #[arg(long)]
    order: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 4)]
    states: usize,
    #[arg(long, default_value_t = 2)]
    agents: usize,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Table,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    Quadratic,
    #[value(alias = "log")]
    Logarithmic,
}

/// Failure before any verdict: bad input or usage.
struct Usage(String);

impl From<Error> for Usage {
    fn from(e: Error) -> Self {
        Usage(e.to_string())
    }
}

/// What a subcommand produced.
enum Output {
    Report(Report),
    Csv(String, Status),
}

struct Loaded {
    text: String,
    document: ModelDocument,
    model: Model,
    security: Security,
}

impl Loaded {
    fn frame(&self) -> &Frame {
        self.model.frame()
    }

    fn states(&self, state: &Option<String>) -> Result<Vec<StateId>, Usage> {
        match state {
            Some(name) => Ok(vec![self.frame().state(name)?]),
            None => Ok(self.frame().states().collect()),
        }
    }

    fn state_name(&self, s: StateId) -> String {
        self.frame().state_name(s).to_owned()
    }
}

fn load(args: &ModelArgs) -> Result<Loaded, Usage> {
    let text = match fixtures::builtin(&args.model) {
        Some(text) => text.to_owned(),
        None => fs::read_to_string(&args.model).map_err(|e| Usage(format!("{}: {e}", args.model)))?,
    };
    let document = parse_model(&text).map_err(|diags| {
        let lines: Vec<String> = diags.iter().map(|d| format!("{}:{d}", args.model)).collect();
        Usage(lines.join("\n"))
    })?;
    let model = document.model()?;
    let security = document.security(&args.security)?;
    Ok(Loaded {
        text,
        document,
        model,
        security,
    })
}

fn format_of(arg: FormatArg) -> Result<Format, Usage> {
    match arg {
        FormatArg::Json => Ok(Format::Json),
        FormatArg::Table => Ok(Format::Table),
        FormatArg::Csv => Err(Usage("csv output is only available for the market subcommand".into())),
    }
}

fn parse_rational(flag: &str, text: &str) -> Result<Rational, Usage> {
    rational::parse(text).ok_or_else(|| Usage(format!("--{flag}: {text:?} is not a rational of the form a/b")))
}

fn exact(values: &[Rational]) -> Vec<String> {
    values.iter().map(rational::format).collect()
}

fn agent_values(frame: &Frame, values: &[Rational]) -> Value {
    Value::Object(
        frame
            .agents()
            .map(|a| (frame.agent_name(a).to_owned(), json!(rational::format(&values[a.0]))))
            .collect(),
    )
}

fn inputs<'a>(command: &'a str, args: &'a ModelArgs, loaded: &'a Loaded, extra: &[&'a str]) -> Vec<&'a str> {
    let mut parts = vec![
        command,
        loaded.text.as_str(),
        args.security.as_str(),
        args.state.as_deref().unwrap_or("*"),
    ];
    parts.extend_from_slice(extra);
    parts
}

fn check(args: &ModelArgs) -> Result<Output, Usage> {
    let l = load(args)?;
    let frame = l.frame();
    let x = &l.security;
    let verifiable = verifiability::is_verifiable(frame, x)?;
    let collective = verifiability::is_collectively_verifiable(frame, x)?;
    let mut rows = Vec::new();
    for s in l.states(&args.state)? {
        let maxmin = verifiability::is_maxmin_verifiable(frame, x, s)?;
        let threshold = verifiability::is_threshold_verifiable(frame, x, s)?;
        rows.push(json!({
            "state": l.state_name(s),
            "verifiable": !verifiable.failing.contains(&s),
            "maxmin": maxmin.map(|w| w.record(frame)),
            "threshold": threshold.map(|w| w.record(frame)),
            "collective": !collective.failing.contains(&s),
        }));
    }
    let parts = inputs("check", args, &l, &[]);
    Ok(Output::Report(Report::new("check", &parts, Status::Pass, &rows)))
}

fn trade(args: &ModelArgs) -> Result<Output, Usage> {
    let l = load(args)?;
    let frame = l.frame();
    let mut rows = Vec::new();
    for s in l.states(&args.state)? {
        let detected = agreement::detect_ck_trade(&l.model, &l.security, s)?;
        let feasibility = agreement::ck_trade_possible(frame, &l.security, s)?;
        rows.push(json!({
            "state": l.state_name(s),
            "trade": detected.is_some(),
            "expectations": detected.as_ref().map(|r| agent_values(frame, &r.expectations)),
            "pair": detected.as_ref().map(|r| [frame.agent_name(r.pair.0), frame.agent_name(r.pair.1)]),
            "possible": feasibility.possible(),
            "feasible_sets": feasibility.sets.iter().map(|s| s.record(frame)).collect::<Vec<_>>(),
            "obstruction": feasibility.obstruction.as_ref().map(|o| o.describe(frame)),
        }));
    }
    let parts = inputs("trade", args, &l, &[]);
    Ok(Output::Report(Report::new("trade", &parts, Status::Pass, &rows)))
}

fn oracle(args: &ModelArgs, samples: usize) -> Result<Output, Usage> {
    let l = load(args)?;
    let frame = l.frame();
    let mut rows = Vec::new();
    let mut pass = true;
    for s in l.states(&args.state)? {
        let exact = agreement::ck_trade_possible(frame, &l.security, s)?.possible();
        let mut rng = enumerate::instance_rng(args.seed, s.0 as u64);
        let hit = agreement::sampled_trade_search(frame, &l.security, s, samples, &mut rng)?;
        // A sampled hit proves trade is possible; a miss proves nothing.
        let consistent = exact || hit.is_none();
        pass &= consistent;
        rows.push(json!({
            "state": l.state_name(s),
            "possible": exact,
            "sampled_hit": hit.is_some(),
            "sampled_expectations": hit.as_ref().map(|(_, r)| agent_values(frame, &r.expectations)),
            "consistent": consistent,
        }));
    }
    let seed = args.seed.to_string();
    let samples = samples.to_string();
    let parts = inputs("oracle", args, &l, &[&seed, &samples]);
    Ok(Output::Report(Report::new(
        "oracle",
        &parts,
        Status::from_pass(pass),
        &rows,
    )))
}

fn synthesize(args: &ModelArgs) -> Result<Output, Usage> {
    let l = load(args)?;
    let frame = l.frame();
    let mut rows = Vec::new();
    let mut pass = true;
    for s in l.states(&args.state)? {
        let row = match agreement::synthesize_disagreement_priors(frame, &l.security, s)? {
            Synthesis::Synthesized(p) => {
                let confirmed = agreement::confirm_synthesis(frame, &l.security, &p)?;
                pass &= confirmed;
                json!({
                    "state": l.state_name(s),
                    "synthesized": true,
                    "targets": agent_values(frame, &p.targets),
                    "priors": frame.agents().map(|a| (frame.agent_name(a).to_owned(), json!(exact(p.priors[a.0].masses())))).collect::<serde_json::Map<_, _>>(),
                    "confirmed": confirmed,
                })
            }
            Synthesis::Infeasible(f) => json!({
                "state": l.state_name(s),
                "synthesized": false,
                "reason": f.obstruction.as_ref().map(|o| o.describe(frame)),
            }),
        };
        rows.push(row);
    }
    let parts = inputs("synthesize", args, &l, &[]);
    Ok(Output::Report(Report::new(
        "synthesize",
        &parts,
        Status::from_pass(pass),
        &rows,
    )))
}

fn schedule(l: &Loaded, args: &ScheduleArgs) -> Result<Vec<AgentId>, Usage> {
    match &args.order {
        None => Ok(dynamics::default_schedule(l.frame())),
        Some(text) if l.document.schedules.contains_key(text) => Ok(l.document.schedule(text)?),
        Some(text) => Ok(dynamics::parse_schedule(l.frame(), text)?),
    }
}

fn order_names(frame: &Frame, order: &[AgentId]) -> String {
    order.iter().map(|a| frame.agent_name(*a)).collect::<Vec<_>>().join(",")
}

fn run_dynamics(args: &ModelArgs, schedule_args: &ScheduleArgs) -> Result<Output, Usage> {
    let l = load(args)?;
    let frame = l.frame();
    let order = schedule(&l, schedule_args)?;
    let mut rows = Vec::new();
    let mut pass = true;
    for s in l.states(&args.state)? {
        let c = dynamics::check_corollary1(&l.model, &l.security, s, &order)?;
        pass &= c.verdict != dynamics::CorollaryVerdict::Violation;
        let mut row = serde_json::to_value(c.transcript.record(frame)).expect("record serializes");
        row["terminal_threshold"] = serde_json::to_value(&c.terminal_threshold).expect("record serializes");
        row["verdict"] = serde_json::to_value(c.verdict).expect("verdict serializes");
        rows.push(row);
    }
    let names = order_names(frame, &order);
    let parts = inputs("dynamics", args, &l, &[&names]);
    Ok(Output::Report(Report::new(
        "dynamics",
        &parts,
        Status::from_pass(pass),
        &rows,
    )))
}

#[allow(clippy::too_many_arguments)]
fn run_market(
    args: &ModelArgs,
    schedule_args: &ScheduleArgs,
    rule: RuleArg,
    y0: &Option<String>,
    log_a: &Option<String>,
    log_b: &Option<String>,
    cycles: Option<usize>,
) -> Result<Output, Usage> {
    let l = load(args)?;
    let frame = l.frame();
    let order = schedule(&l, schedule_args)?;
    let rule = match rule {
        RuleArg::Quadratic => ScoringRule::Quadratic,
        RuleArg::Logarithmic => {
            let ScoringRule::Logarithmic { a, b } = ScoringRule::logarithmic_for(&l.security) else {
                unreachable!("logarithmic_for builds a logarithmic rule")
            };
            ScoringRule::Logarithmic {
                a: log_a
                    .as_deref()
                    .map(|t| parse_rational("log-a", t))
                    .transpose()?
                    .unwrap_or(a),
                b: log_b
                    .as_deref()
                    .map(|t| parse_rational("log-b", t))
                    .transpose()?
                    .unwrap_or(b),
            }
        }
    };
    let initial = y0.as_deref().map(|t| parse_rational("y0", t)).transpose()?;
    let states = l.states(&args.state)?;
    if args.format == FormatArg::Csv && states.len() != 1 {
        return Err(Usage("csv output needs a single --state".into()));
    }
    let mut rows = Vec::new();
    let mut csv = String::new();
    let mut pass = true;
    for s in states {
        let run = market::run_market(&l.model, &l.security, s, &rule, initial.clone(), &order, cycles)?;
        let threshold = dynamics::terminal_threshold(frame, &l.security, &run.terminal_public, s)?;
        let verdict = dynamics::CorollaryVerdict::from_implication(threshold.is_some(), run.aggregated);
        pass &= verdict != dynamics::CorollaryVerdict::Violation;
        csv = run.to_csv(frame);
        let mut row = serde_json::to_value(run.record(frame)).expect("record serializes");
        row["terminal_threshold"] = serde_json::to_value(&threshold).expect("record serializes");
        row["verdict"] = serde_json::to_value(verdict).expect("verdict serializes");
        rows.push(row);
    }
    let status = Status::from_pass(pass);
    if args.format == FormatArg::Csv {
        return Ok(Output::Csv(csv, status));
    }
    let names = order_names(frame, &order);
    let rule_text = rule.to_string();
    let y0_text = y0.clone().unwrap_or_default();
    let cycles_text = cycles.map(|c| c.to_string()).unwrap_or_default();
    let parts = inputs("market", args, &l, &[&names, &rule_text, &y0_text, &cycles_text]);
    Ok(Output::Report(Report::new("market", &parts, status, &rows)))
}

fn run_multi(args: &ModelArgs, bundle_name: &Option<String>) -> Result<Output, Usage> {
    let l = load(args)?;
    let frame = l.frame();
    let states = l.states(&args.state)?;
    let (bundle, price) = match bundle_name {
        Some(name) => (l.document.bundle(name)?, None),
        None => {
            let at = states[0];
            let report = agreement::detect_ck_trade(&l.model, &l.security, at)?.ok_or_else(|| {
                Usage(format!(
                    "no common-knowledge trade in {} at {} to split; pass --bundle",
                    args.security,
                    l.state_name(at)
                ))
            })?;
            let split = multi::split_security(&l.security, &report.expectations)?;
            (split.bundle, Some(split.price))
        }
    };
    let failure = multi::is_tradable(frame, &bundle)?;
    let mut rows = Vec::new();
    let mut pass = true;
    for s in states {
        let detected = if failure.is_none() {
            multi::detect_ck_trade_multi(&l.model, &bundle, s)?
        } else {
            None
        };
        let verdict = multi::verify_proposition_on(frame, &bundle, s)?;
        pass &= verdict.holds();
        let mut row = serde_json::to_value(verdict.record(frame)).expect("record serializes");
        row["tradability_failure"] = serde_json::to_value(&failure).expect("record serializes");
        row["profits"] = detected.map_or(Value::Null, |r| agent_values(frame, &r.profits));
        if let Some(p) = &price {
            row["split_price"] = json!(rational::format(p));
        }
        rows.push(row);
    }
    let bundle_text = bundle_name.clone().unwrap_or_default();
    let parts = inputs("multi", args, &l, &[&bundle_text]);
    Ok(Output::Report(Report::new(
        "multi",
        &parts,
        Status::from_pass(pass),
        &rows,
    )))
}

fn sweep(command: &str, args: &SweepArgs) -> Result<Output, Usage> {
    if !(1..=5).contains(&args.states) || !(1..=3).contains(&args.agents) {
        return Err(Usage("--states must be in 1..=5 and --agents in 1..=3".into()));
    }
    let summary = if command == "theorem" {
        enumerate::theorem_sweep(args.states, args.agents)?
    } else {
        if args.agents != 2 {
            return Err(Usage("the proposition sweep uses two agents".into()));
        }
        enumerate::proposition_sweep(args.states)?
    };
    let states = args.states.to_string();
    let agents = args.agents.to_string();
    let parts = [command, states.as_str(), agents.as_str()];
    Ok(Output::Report(Report::new(
        command,
        &parts,
        Status::from_pass(summary.passed()),
        &summary,
    )))
}

fn run(cli: Cli) -> Result<(Output, FormatArg), Usage> {
    let (output, format) = match &cli.command {
        Command::Check(a) => (check(a)?, a.format),
        Command::Trade(a) => (trade(a)?, a.format),
        Command::Oracle { model, samples } => (oracle(model, *samples)?, model.format),
        Command::Synthesize(a) => (synthesize(a)?, a.format),
        Command::Dynamics { model, schedule } => (run_dynamics(model, schedule)?, model.format),
        Command::Market {
            model,
            schedule,
            rule,
            y0,
            log_a,
            log_b,
            cycles,
        } => (
            run_market(model, schedule, *rule, y0, log_a, log_b, *cycles)?,
            model.format,
        ),
        Command::Multi { model, bundle } => (run_multi(model, bundle)?, model.format),
        Command::Theorem(a) => (sweep("theorem", a)?, a.format),
        Command::Proposition(a) => (sweep("proposition", a)?, a.format),
    };
    Ok((output, format))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli).and_then(|(output, format)| match output {
        Output::Csv(text, status) => Ok((text, status)),
        Output::Report(report) => Ok((emit_report(&report, format_of(format)?), report.status)),
    });
    match result {
        Ok((text, status)) => {
            print!("{text}");
            ExitCode::from(status.exit_code() as u8)
        }
        Err(Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
