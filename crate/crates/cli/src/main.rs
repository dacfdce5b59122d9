use std::path::PathBuf;
use std::process::ExitCode;

use apbsim::matching::{MatchError, DEFAULT_ENUMERATION_LIMIT};
use apbsim::model::ScenarioError;
use apbsim::ranking::{RankingError, Variant};
use apbsim::report::{serialize_comparison, serialize_oracle, serialize_report};
use apbsim::rounds::{AnswerPolicy, ProposingSide, RoundsError, RoundsOptions};
use apbsim::scenario::parse_scenario;
use apbsim::sim;
use clap::{Parser, ValueEnum};

const SEED_ENV: &str = "APBSIM_SEED";

/// Exit codes, one per error class.
mod code {
    pub const USAGE: u8 = 2;
    pub const IO: u8 = 3;
    pub const BAD_ENV_SEED: u8 = 4;
    pub const SYNTAX: u8 = 10;
    pub const UNKNOWN_ID: u8 = 11;
    pub const DUPLICATE_ID: u8 = 12;
    pub const MISSING_FAMILY: u8 = 13;
    pub const RELATION_INVALID: u8 = 14;
    pub const RANK_OVERFLOW: u8 = 15;
    pub const SELECTIVE_LIST: u8 = 16;
    pub const BAD_CAPACITY: u8 = 17;
    pub const TIES_PRESENT: u8 = 20;
    pub const POLICY_GAP: u8 = 21;
    pub const NO_ROUNDS: u8 = 22;
    pub const TOO_LARGE: u8 = 30;
    pub const CHECK_FAILED: u8 = 31;
    pub const INTERNAL: u8 = 70;
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Run,
    Compare,
    OracleCheck,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    V1,
    V2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    AlwaysDefinitelyYes,
    YesButUntilFirstChoice,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProposingArg {
    Institutions,
    Applicants,
}

/// Simulates the multi-round APB admission process on a scenario file.
#[derive(Debug, Parser)]
#[command(name = "apbsim", version)]
struct Cli {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Tie-break seed. Falls back to the scenario, then to APBSIM_SEED, then to 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    foreign_bac_first: Option<bool>,
    #[arg(long)]
    max_disj: Option<usize>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "run")]
    mode: Mode,
    /// Answer policy of applicants without one in the scenario.
    #[arg(long, value_enum, default_value = "always-definitely-yes")]
    policy: PolicyArg,
    #[arg(long, value_enum, default_value = "institutions")]
    proposing: ProposingArg,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Failure { code, message: message.to_string() }
    }
}

fn scenario_code(e: &ScenarioError) -> u8 {
    match e {
        ScenarioError::Syntax { .. } => code::SYNTAX,
        ScenarioError::UnknownId { .. } => code::UNKNOWN_ID,
        ScenarioError::DuplicateId { .. } => code::DUPLICATE_ID,
        ScenarioError::MissingFamily(_) => code::MISSING_FAMILY,
        ScenarioError::RelationInvalid { .. } => code::RELATION_INVALID,
        ScenarioError::RankOverflow { .. } => code::RANK_OVERFLOW,
        ScenarioError::SelectiveList { .. } => code::SELECTIVE_LIST,
        ScenarioError::BadCapacity { .. } => code::BAD_CAPACITY,
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::new(scenario_code(&e), e)
    }
}

impl From<RoundsError> for Failure {
    fn from(e: RoundsError) -> Self {
        let code = match &e {
            RoundsError::InvalidScenario(inner) => scenario_code(inner),
            RoundsError::Ranking(RankingError::TiesPresent(_)) => code::TIES_PRESENT,
            RoundsError::Ranking(RankingError::RankOverflow { .. }) => code::RANK_OVERFLOW,
            RoundsError::Ranking(RankingError::Relation { .. }) => code::RELATION_INVALID,
            RoundsError::Ranking(RankingError::UnknownStudy(_)) => code::MISSING_FAMILY,
            RoundsError::Ranking(RankingError::NotRanked { .. }) => code::INTERNAL,
            RoundsError::Match(MatchError::TooLarge { .. }) => code::TOO_LARGE,
            RoundsError::Match(_) => code::INTERNAL,
            RoundsError::PolicyGap { .. } => code::POLICY_GAP,
            RoundsError::NoRounds => code::NO_ROUNDS,
        };
        Failure::new(code, e)
    }
}

fn options(cli: &Cli, config: &apbsim::model::ScenarioConfig) -> Result<RoundsOptions, Failure> {
    let mut opts = RoundsOptions::from_config(config);
    opts.seed = match (cli.seed, config.seed) {
        (Some(seed), _) | (None, Some(seed)) => seed,
        (None, None) => match std::env::var(SEED_ENV) {
            Ok(raw) => raw
                .trim()
                .parse()
                .map_err(|_| Failure::new(code::BAD_ENV_SEED, format!("{SEED_ENV}=`{raw}` is not a u64")))?,
            Err(_) => 0,
        },
    };
    if let Some(v) = cli.variant {
        opts.variant = match v {
            VariantArg::V1 => Variant::V1,
            VariantArg::V2 => Variant::V2,
        };
    }
    if let Some(r) = cli.rounds {
        opts.num_rounds = r;
    }
    if let Some(f) = cli.foreign_bac_first {
        opts.ranking.foreign_bac_first = f;
    }
    if let Some(d) = cli.max_disj {
        opts.ranking.max_disj = d;
    }
    opts.default_policy = match cli.policy {
        PolicyArg::AlwaysDefinitelyYes => AnswerPolicy::AlwaysDefinitelyYes,
        PolicyArg::YesButUntilFirstChoice => AnswerPolicy::YesButUntilFirstChoice,
    };
    opts.proposing = match cli.proposing {
        ProposingArg::Institutions => ProposingSide::Institutions,
        ProposingArg::Applicants => ProposingSide::Applicants,
    };
    Ok(opts)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&cli.scenario)
        .map_err(|e| Failure::new(code::IO, format!("{}: {e}", cli.scenario.display())))?;
    let scenario = parse_scenario(&text)?;
    let opts = options(cli, &scenario.config)?;
    let seed = opts.seed;
    let (report, passed) = match cli.mode {
        Mode::Run => {
            let outcome = sim::run(&scenario, opts)?;
            (serialize_report(&outcome.ledger, &outcome.metrics), true)
        }
        Mode::Compare => {
            let c = sim::compare(&scenario, opts)?;
            let text = serialize_comparison(
                (&c.v1.ledger, &c.v1.metrics),
                (&c.v2.ledger, &c.v2.metrics),
                &c.refinement,
            );
            (text, true)
        }
        Mode::OracleCheck => {
            let r = sim::oracle_check(&scenario, opts, DEFAULT_ENUMERATION_LIMIT)?;
            (serialize_oracle(&r, seed), r.passed())
        }
    };
    match &cli.out {
        Some(path) => std::fs::write(path, &report)
            .map_err(|e| Failure::new(code::IO, format!("{}: {e}", path.display())))?,
        None => print!("{report}"),
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::new(code::CHECK_FAILED, "engine output is not the proposer-optimal stable matching"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { code::USAGE } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("apbsim: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
