//! Multi-round proposal/answer process.
//!
//! Each round rebuilds every study's ranking over the applicants still in play,
//! runs deferred acceptance once with the seats still free, and hands each
//! matched applicant a single proposal. Answers then update held seats and
//! wish lists:
//!
//! * `DefinitelyYes` keeps the seat and leaves the process.
//! * `YesBut` keeps the seat and stays in play for strictly better classes only.
//! * `NoBut` drops the proposed study and keeps only strictly better classes.
//! * `Resign` releases everything and leaves.
//!
//! Seats released during a round are offered again from the next round on.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::matching::{deferred_acceptance_traced, Agent, Capacity, MatchError, MatchInstance, Matching, Schedule};
use crate::model::{AdmissionKind, BacOrigin, Scenario, ScenarioConfig, ScenarioError};
use crate::preference::{ObjectId, OrderedPartition};
use crate::ranking::{build_preferences, Candidate, RankingConfig, RankingError, TieBreak, Variant};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoundsError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(#[from] ScenarioError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("scripted policy of `{applicant}` has no answer for round {round}")]
    PolicyGap { applicant: ObjectId, round: usize },
    #[error("at least one round is required")]
    NoRounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Answer {
    DefinitelyYes,
    YesBut,
    NoBut,
    Resign,
}

impl Answer {
    pub fn token(self) -> &'static str {
        match self {
            Answer::DefinitelyYes => "definitely_yes",
            Answer::YesBut => "yes_but",
            Answer::NoBut => "no_but",
            Answer::Resign => "resign",
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl std::str::FromStr for Answer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "definitely_yes" => Ok(Answer::DefinitelyYes),
            "yes_but" => Ok(Answer::YesBut),
            "no_but" => Ok(Answer::NoBut),
            "resign" => Ok(Answer::Resign),
            other => Err(format!("unknown answer `{other}`")),
        }
    }
}

/// What an applicant knows when answering a proposal.
#[derive(Debug, Clone, Copy)]
pub struct ProposalContext<'a> {
    pub applicant: &'a ObjectId,
    pub round: usize,
    pub study: &'a ObjectId,
    /// 1-based preference class of the proposed study.
    pub class_index: usize,
    pub holding: Option<&'a ObjectId>,
}

/// Deterministic stand-in for an applicant's answers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum AnswerPolicy {
    #[default]
    AlwaysDefinitelyYes,
    /// `YesBut` until a study of the first preference class is proposed.
    YesButUntilFirstChoice,
    /// Explicit answer per round (1-based).
    Scripted(BTreeMap<usize, Answer>),
}

impl AnswerPolicy {
    pub fn answer(&self, ctx: &ProposalContext<'_>) -> Result<Answer, RoundsError> {
        match self {
            AnswerPolicy::AlwaysDefinitelyYes => Ok(Answer::DefinitelyYes),
            AnswerPolicy::YesButUntilFirstChoice if ctx.class_index == 1 => Ok(Answer::DefinitelyYes),
            AnswerPolicy::YesButUntilFirstChoice => Ok(Answer::YesBut),
            AnswerPolicy::Scripted(table) => table
                .get(&ctx.round)
                .copied()
                .ok_or_else(|| RoundsError::PolicyGap { applicant: ctx.applicant.clone(), round: ctx.round }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProposingSide {
    #[default]
    Institutions,
    Applicants,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundsOptions {
    pub variant: Variant,
    pub seed: u64,
    pub num_rounds: usize,
    pub ranking: RankingConfig,
    pub proposing: ProposingSide,
    pub default_policy: AnswerPolicy,
    pub schedule: Schedule,
}

impl Default for RoundsOptions {
    fn default() -> Self {
        Self::from_config(&ScenarioConfig::default())
    }
}

impl RoundsOptions {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        RoundsOptions {
            variant: config.variant,
            seed: config.seed.unwrap_or(0),
            num_rounds: config.num_rounds,
            ranking: RankingConfig { foreign_bac_first: config.foreign_bac_first, max_disj: config.max_disj },
            proposing: ProposingSide::Institutions,
            default_policy: AnswerPolicy::AlwaysDefinitelyYes,
            schedule: Schedule::Fifo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundEntry {
    pub proposal: Option<ObjectId>,
    pub answer: Option<Answer>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Held {
    pub study: ObjectId,
    /// 1-based preference class of the study for its holder.
    pub class_index: usize,
    /// Round in which the seat was taken.
    pub since: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRecord {
    pub round: usize,
    /// Every applicant still in play at the start of the round.
    pub entries: BTreeMap<ObjectId, RoundEntry>,
    /// Seats held once the round's answers are applied.
    pub held: BTreeMap<ObjectId, Held>,
    /// Random shuffles used to build this round's institution lists.
    pub tiebreaks: Vec<(ObjectId, TieBreak)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundLedger {
    pub seed: u64,
    pub variant: Variant,
    pub num_rounds: usize,
    /// Resolved seat count per study.
    pub capacities: BTreeMap<ObjectId, usize>,
    pub rounds: Vec<RoundRecord>,
    /// `None` for unassigned applicants.
    pub final_assignment: BTreeMap<ObjectId, Option<Held>>,
    /// Tied alternatives with a free seat, for assigned applicants who have any.
    pub delayed_choices: BTreeMap<ObjectId, Vec<ObjectId>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    InPlay,
    Done,
    Resigned,
}

struct ApplicantState {
    partition: OrderedPartition,
    active: BTreeSet<ObjectId>,
    held: Option<Held>,
    status: Status,
}

impl ApplicantState {
    fn class_index(&self, study: &ObjectId) -> usize {
        self.partition.class_of(study).expect("wish belongs to the applicant's relation") + 1
    }

    fn keep_strictly_better_than(&mut self, class_index: usize) {
        let partition = &self.partition;
        self.active.retain(|s| partition.class_of(s).map(|c| c + 1 < class_index).unwrap_or(false));
    }
}

/// The round-by-round engine. Single owner; one instance per run.
pub struct Admission<'a> {
    scenario: &'a Scenario,
    options: RoundsOptions,
    states: BTreeMap<ObjectId, ApplicantState>,
    capacities: BTreeMap<ObjectId, usize>,
}

struct RoundInstance {
    instance: MatchInstance,
    tiebreaks: Vec<(ObjectId, TieBreak)>,
}

impl<'a> Admission<'a> {
    pub fn new(scenario: &'a Scenario, options: RoundsOptions) -> Result<Self, RoundsError> {
        scenario.validate()?;
        if options.num_rounds == 0 {
            return Err(RoundsError::NoRounds);
        }
        let mut states = BTreeMap::new();
        for a in &scenario.applicants {
            let partition = a.relation.linearize_optimistic().map_err(|cause| ScenarioError::RelationInvalid {
                applicant: a.id.clone(),
                cause,
            })?;
            let active = a.relation.domain().iter().cloned().collect();
            states.insert(a.id.clone(), ApplicantState { partition, active, held: None, status: Status::InPlay });
        }
        let capacities = scenario
            .studies
            .iter()
            .map(|s| {
                let seats = match s.capacity {
                    Capacity::Limited(q) => q,
                    Capacity::Unlimited => scenario.applicants.len(),
                };
                (s.id.clone(), seats)
            })
            .collect();
        Ok(Admission { scenario, options, states, capacities })
    }

    fn free_seats(&self) -> BTreeMap<ObjectId, usize> {
        let mut free = self.capacities.clone();
        for st in self.states.values() {
            if let Some(h) = &st.held {
                *free.get_mut(&h.study).expect("held study exists") -= 1;
            }
        }
        free
    }

    fn participants(&self) -> Vec<&ObjectId> {
        self.states
            .iter()
            .filter(|(_, st)| st.status == Status::InPlay && !st.active.is_empty())
            .map(|(id, _)| id)
            .collect()
    }

    fn build_instance(&self) -> Result<RoundInstance, RoundsError> {
        let free = self.free_seats();
        let participants = self.participants();
        let mut tiebreaks = Vec::new();
        let mut study_agents = Vec::new();
        let mut open = BTreeSet::new();

        for study in &self.scenario.studies {
            let seats = free[&study.id];
            if seats == 0 {
                continue;
            }
            let pool: Vec<&ObjectId> =
                participants.iter().copied().filter(|a| self.states[*a].active.contains(&study.id)).collect();
            if pool.is_empty() {
                continue;
            }
            let list: Vec<ObjectId> = match study.kind {
                AdmissionKind::Selective => {
                    let ranking = study.exogenous_ranking.as_deref().unwrap_or_default();
                    ranking.iter().filter(|a| pool.contains(a)).cloned().collect()
                }
                AdmissionKind::Unlimited => pool.iter().map(|&a| a.clone()).collect(),
                AdmissionKind::Limited => {
                    let candidates: Vec<Candidate<'_>> = pool
                        .iter()
                        .map(|&id| {
                            let a = self.scenario.applicant(id).expect("participant exists");
                            Candidate {
                                id: &a.id,
                                local: a.academy == study.academy,
                                abroad: a.bac == BacOrigin::Abroad,
                                relation: &a.relation,
                            }
                        })
                        .collect();
                    let ranked = build_preferences(
                        self.options.variant,
                        &study.id,
                        &candidates,
                        &self.scenario.families,
                        self.options.seed,
                        &self.options.ranking,
                    )?;
                    tiebreaks.extend(ranked.tiebreak_events.iter().map(|t| (study.id.clone(), t.clone())));
                    ranked.entries
                }
            };
            let capacity = match study.capacity {
                Capacity::Unlimited => Capacity::Unlimited,
                Capacity::Limited(_) => Capacity::Limited(seats),
            };
            open.insert(study.id.clone());
            study_agents.push(Agent::new(study.id.to_string(), list.iter().map(ToString::to_string), capacity));
        }

        let applicant_agents: Vec<Agent> = participants
            .iter()
            .map(|&id| {
                let st = &self.states[id];
                let wishes = st.partition.objects().filter(|s| st.active.contains(*s) && open.contains(*s));
                Agent::single(id.to_string(), wishes.map(ToString::to_string))
            })
            .collect();

        let instance = match self.options.proposing {
            ProposingSide::Institutions => MatchInstance::new(study_agents, applicant_agents)?,
            ProposingSide::Applicants => MatchInstance::new(applicant_agents, study_agents)?,
        };
        Ok(RoundInstance { instance, tiebreaks })
    }

    /// Applicant id -> proposed study.
    fn proposals(&self, matching: &Matching) -> BTreeMap<ObjectId, ObjectId> {
        matching
            .pairs()
            .iter()
            .map(|(p, r)| match self.options.proposing {
                ProposingSide::Institutions => (ObjectId::from(r.as_str()), ObjectId::from(p.as_str())),
                ProposingSide::Applicants => (ObjectId::from(p.as_str()), ObjectId::from(r.as_str())),
            })
            .collect()
    }

    fn play_round(&mut self, round: usize) -> Result<RoundRecord, RoundsError> {
        let built = self.build_instance()?;
        let (matching, _) = deferred_acceptance_traced(&built.instance, self.options.schedule);
        let proposals = self.proposals(&matching);

        let mut entries = BTreeMap::new();
        for (id, st) in self.states.iter_mut() {
            if st.status != Status::InPlay {
                continue;
            }
            let Some(study) = proposals.get(id) else {
                entries.insert(id.clone(), RoundEntry { proposal: None, answer: None });
                continue;
            };
            let class_index = st.class_index(study);
            let applicant = self.scenario.applicant(id).expect("state belongs to an applicant");
            let policy = applicant.policy.as_ref().unwrap_or(&self.options.default_policy);
            let answer = policy.answer(&ProposalContext {
                applicant: id,
                round,
                study,
                class_index,
                holding: st.held.as_ref().map(|h| &h.study),
            })?;
            let take = Held { study: study.clone(), class_index, since: round };
            match answer {
                Answer::DefinitelyYes => {
                    st.held = Some(take);
                    st.status = Status::Done;
                    st.active.clear();
                }
                Answer::YesBut => {
                    st.held = Some(take);
                    st.keep_strictly_better_than(class_index);
                }
                Answer::NoBut => {
                    st.active.remove(study);
                    st.keep_strictly_better_than(class_index);
                }
                Answer::Resign => {
                    st.held = None;
                    st.status = Status::Resigned;
                    st.active.clear();
                }
            }
            entries.insert(id.clone(), RoundEntry { proposal: Some(study.clone()), answer: Some(answer) });
        }

        let held = self
            .states
            .iter()
            .filter_map(|(id, st)| st.held.clone().map(|h| (id.clone(), h)))
            .collect();
        Ok(RoundRecord { round, entries, held, tiebreaks: built.tiebreaks })
    }

    fn delayed_choices(&self) -> BTreeMap<ObjectId, Vec<ObjectId>> {
        let free = self.free_seats();
        let mut out = BTreeMap::new();
        for (id, st) in &self.states {
            let Some(held) = &st.held else { continue };
            let class = &st.partition.classes()[held.class_index - 1];
            let options: Vec<ObjectId> = class
                .iter()
                .filter(|s| **s != held.study && free.get(*s).copied().unwrap_or(0) > 0)
                .filter(|s| match self.scenario.study(s) {
                    Some(p) if p.kind == AdmissionKind::Selective => {
                        p.exogenous_ranking.as_ref().is_some_and(|list| list.contains(id))
                    }
                    Some(_) => true,
                    None => false,
                })
                .cloned()
                .collect();
            if !options.is_empty() {
                out.insert(id.clone(), options);
            }
        }
        out
    }

    pub fn run(mut self) -> Result<RoundLedger, RoundsError> {
        let mut rounds = Vec::with_capacity(self.options.num_rounds);
        for round in 1..=self.options.num_rounds {
            rounds.push(self.play_round(round)?);
        }
        let final_assignment = self.states.iter().map(|(id, st)| (id.clone(), st.held.clone())).collect();
        Ok(RoundLedger {
            seed: self.options.seed,
            variant: self.options.variant,
            num_rounds: self.options.num_rounds,
            capacities: self.capacities.clone(),
            delayed_choices: self.delayed_choices(),
            rounds,
            final_assignment,
        })
    }
}

pub fn run_rounds(scenario: &Scenario, options: RoundsOptions) -> Result<RoundLedger, RoundsError> {
    Admission::new(scenario, options)?.run()
}

/// The matching instance the first round would solve.
pub fn first_round_instance(scenario: &Scenario, options: RoundsOptions) -> Result<MatchInstance, RoundsError> {
    Ok(Admission::new(scenario, options)?.build_instance()?.instance)
}
