//! End-to-end entry points: a single run, a v1/v2 comparison and the
//! exhaustive stable-matching check of the first round.

use std::collections::BTreeSet;

use crate::matching::{deferred_acceptance_traced, enumerate_stable_matchings, is_proposer_optimal};
use crate::model::{AdmissionKind, BacOrigin, Scenario};
use crate::preference::ObjectId;
use crate::ranking::{cell_profile, tie_exposure, Candidate, Variant};
use crate::report::{MetricsReport, OracleReport, Refinement};
use crate::rounds::{first_round_instance, run_rounds, ProposingSide, RoundLedger, RoundsError, RoundsOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub ledger: RoundLedger,
    pub metrics: MetricsReport,
}

pub fn run(scenario: &Scenario, options: RoundsOptions) -> Result<RunOutcome, RoundsError> {
    let ledger = run_rounds(scenario, options)?;
    let metrics = MetricsReport::from_ledger(&ledger);
    Ok(RunOutcome { ledger, metrics })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    /// Original ranking on the forced-linear version of every wish list.
    pub v1: RunOutcome,
    /// Indifference-aware ranking on the true wish lists.
    pub v2: RunOutcome,
    pub refinement: Refinement,
}

/// Runs both rankings on the same scenario and seed. Tied or partial wish
/// lists are forced into a seeded strict order for v1.
pub fn compare(scenario: &Scenario, options: RoundsOptions) -> Result<Comparison, RoundsError> {
    scenario.validate()?;
    let forced = scenario.forced_linear(options.seed)?;
    let (v1, v2) = std::thread::scope(|scope| {
        let v1 = scope.spawn(|| run(&forced, RoundsOptions { variant: Variant::V1, ..options.clone() }));
        let v2 = run(scenario, RoundsOptions { variant: Variant::V2, ..options.clone() });
        (v1.join().expect("v1 run panicked"), v2)
    });
    Ok(Comparison { v1: v1?, v2: v2?, refinement: refinement(scenario, &options)? })
}

/// Compares, on the first-round pools of every limited study, the cells with
/// and without disjunction sizes. Both use the same (optimistic) ranks.
pub fn refinement(scenario: &Scenario, options: &RoundsOptions) -> Result<Refinement, RoundsError> {
    let mut out = Refinement { cells_nested: true, ..Refinement::default() };
    for study in scenario.studies.iter().filter(|s| s.kind == AdmissionKind::Limited) {
        let pool: Vec<Candidate<'_>> = scenario
            .applicants
            .iter()
            .filter(|a| a.relation.contains(&study.id))
            .map(|a| Candidate {
                id: &a.id,
                local: a.academy == study.academy,
                abroad: a.bac == BacOrigin::Abroad,
                relation: &a.relation,
            })
            .collect();
        let families = &scenario.families;
        let coarse = cell_profile(&study.id, &pool, families, Variant::V1, &options.ranking)?;
        let refined = cell_profile(&study.id, &pool, families, Variant::V2, &options.ranking)?;
        for (cell, members) in &refined {
            let parent = crate::ranking::Cell { disjunction: None, ..*cell };
            let inside = coarse.get(&parent).is_some_and(|outer| {
                let outer: BTreeSet<&ObjectId> = outer.iter().collect();
                members.iter().all(|m| outer.contains(m))
            });
            out.cells_nested &= inside;
        }
        let (c, r) = (tie_exposure(&coarse), tie_exposure(&refined));
        out.coarse_exposed += c;
        out.refined_exposed += r;
        out.per_study.insert(study.id.to_string(), (c, r));
    }
    Ok(out)
}

/// Enumerates every stable matching of the first round's instance and checks
/// that deferred acceptance returns the proposer-optimal one.
pub fn oracle_check(scenario: &Scenario, options: RoundsOptions, limit: u128) -> Result<OracleReport, RoundsError> {
    let proposers = match options.proposing {
        ProposingSide::Institutions => "institutions",
        ProposingSide::Applicants => "applicants",
    };
    let schedule = options.schedule;
    let instance = first_round_instance(scenario, options)?;
    let stable = enumerate_stable_matchings(&instance, limit)?;
    let (engine, _) = deferred_acceptance_traced(&instance, schedule);
    let member = stable.contains(&engine);
    let proposer_optimal = is_proposer_optimal(&instance, &engine, &stable)?;
    Ok(OracleReport { proposers, stable, engine, member, proposer_optimal })
}
