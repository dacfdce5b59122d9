//! Independent checks shared by the property suites and the acceptance run.

use std::collections::BTreeMap;

use apbsim::matching::Matching;
use apbsim::model::Scenario;
use apbsim::preference::{ObjectId, OrderedPartition, PreferenceRelation};
use apbsim::rounds::{Answer, Held, RoundLedger};
use proptest::prelude::*;

use super::{ordered_partitions, RawInstance};

type Side<'a> = BTreeMap<&'a str, (&'a [String], usize)>;

fn side(agents: &[(String, Vec<String>, usize)]) -> Side<'_> {
    agents.iter().map(|(id, list, cap)| (id.as_str(), (list.as_slice(), *cap))).collect()
}

fn rank(list: &[String], who: &str) -> Option<usize> {
    list.iter().position(|x| x == who)
}

/// Would `agent` take `other`, given its current partners?
fn wants(agents: &Side<'_>, agent: &str, other: &str, partners: &[&str]) -> bool {
    let (list, cap) = agents[agent];
    let Some(r) = rank(list, other) else { return false };
    partners.len() < cap || partners.iter().any(|p| rank(list, p).is_some_and(|q| q > r))
}

/// Blocking pairs from first principles.
pub fn blocking(raw: &RawInstance, m: &Matching) -> Vec<(String, String)> {
    let (ps, rs) = (side(&raw.proposers), side(&raw.receivers));
    let mut out = Vec::new();
    for &p in ps.keys() {
        for &r in rs.keys() {
            if m.contains(p, r) {
                continue;
            }
            let p_partners: Vec<&str> = m.partners_of_proposer(p).collect();
            let r_partners: Vec<&str> = m.partners_of_receiver(r).collect();
            if wants(&ps, p, r, &p_partners) && wants(&rs, r, p, &r_partners) {
                out.push((p.to_owned(), r.to_owned()));
            }
        }
    }
    out
}

pub fn feasible(raw: &RawInstance, m: &Matching) -> bool {
    let (ps, rs) = (side(&raw.proposers), side(&raw.receivers));
    m.pairs().iter().all(|(p, r)| {
        rank(ps[p.as_str()].0, r).is_some() && rank(rs[r.as_str()].0, p).is_some()
    }) && ps.iter().all(|(p, (_, c))| m.partners_of_proposer(p).count() <= *c)
        && rs.iter().all(|(r, (_, c))| m.partners_of_receiver(r).count() <= *c)
}

/// Sorted list ranks of a proposer's partners.
pub fn partner_ranks(raw: &RawInstance, m: &Matching, p: &str) -> Vec<usize> {
    let list = &side(&raw.proposers)[p].0;
    let mut r: Vec<usize> = m.partners_of_proposer(p).map(|x| rank(list, x).unwrap()).collect();
    r.sort_unstable();
    r
}

/// Class index vectors (over `rel.domain()`) of every total preorder that
/// extends `rel`.
pub fn extensions(rel: &PreferenceRelation) -> Vec<Vec<usize>> {
    let idx = |id| rel.index_of(id).unwrap();
    let strict: Vec<(usize, usize)> = rel.strict_pairs().map(|(a, b)| (idx(a), idx(b))).collect();
    let indiff: Vec<(usize, usize)> = rel.indifferent_pairs().map(|(a, b)| (idx(a), idx(b))).collect();
    ordered_partitions(rel.len())
        .into_iter()
        .filter(|f| strict.iter().all(|&(a, b)| f[a] < f[b]) && indiff.iter().all(|&(a, b)| f[a] == f[b]))
        .collect()
}

pub fn classes_of(rel: &PreferenceRelation, p: &OrderedPartition) -> Vec<usize> {
    rel.domain().iter().map(|id| p.class_of(id).unwrap()).collect()
}

pub fn check_ledger(s: &Scenario, ledger: &RoundLedger) -> Result<(), TestCaseError> {
    prop_assert_eq!(ledger.rounds.len(), ledger.num_rounds);
    let class = |a: &ObjectId, study: &ObjectId| {
        s.applicant(a).unwrap().relation.linearize_optimistic().unwrap().class_of(study).unwrap() + 1
    };
    let mut previous: BTreeMap<ObjectId, Held> = BTreeMap::new();
    let mut finished: BTreeMap<ObjectId, Option<ObjectId>> = BTreeMap::new();
    for (r, round) in ledger.rounds.iter().enumerate() {
        prop_assert_eq!(round.round, r + 1);
        // Seat conservation: carried and new seats never exceed capacity.
        let mut load: BTreeMap<&ObjectId, usize> = BTreeMap::new();
        for h in round.held.values() {
            *load.entry(&h.study).or_insert(0) += 1;
        }
        for (study, n) in load {
            prop_assert!(n <= ledger.capacities[study], "{} over capacity in round {}", study, r + 1);
        }
        for (id, entry) in &round.entries {
            prop_assert!(!finished.contains_key(id), "{} plays after leaving", id);
            prop_assert_eq!(entry.proposal.is_some(), entry.answer.is_some());
            if let Some(study) = &entry.proposal {
                prop_assert!(s.applicant(id).unwrap().relation.contains(study));
                if let Some(h) = previous.get(id) {
                    prop_assert!(class(id, study) < h.class_index, "proposal no better than held seat");
                }
            }
        }
        for id in s.applicants.iter().map(|a| &a.id) {
            let before = previous.get(id);
            let after = round.held.get(id);
            let answer = round.entries.get(id).and_then(|e| e.answer);
            match (before, after) {
                (Some(b), Some(a)) if a.study != b.study => {
                    prop_assert!(a.class_index < b.class_index, "{} moved to a worse study", id);
                    prop_assert!(matches!(answer, Some(Answer::YesBut | Answer::DefinitelyYes)));
                }
                (Some(b), Some(a)) => prop_assert_eq!(a, b),
                (Some(_), None) => prop_assert_eq!(answer, Some(Answer::Resign)),
                (None, Some(a)) => {
                    prop_assert_eq!(a.since, r + 1);
                    prop_assert!(matches!(answer, Some(Answer::YesBut | Answer::DefinitelyYes)));
                }
                (None, None) => {}
            }
            if let Some(a) = after {
                prop_assert_eq!(a.class_index, class(id, &a.study));
            }
            match answer {
                Some(Answer::DefinitelyYes) => {
                    finished.insert(id.clone(), after.map(|h| h.study.clone()));
                }
                Some(Answer::Resign) => {
                    finished.insert(id.clone(), None);
                }
                _ => {}
            }
        }
        previous = round.held.clone();
    }
    for (id, fin) in &finished {
        prop_assert_eq!(ledger.final_assignment[id].as_ref().map(|h| h.study.clone()), fin.clone());
    }
    for (id, held) in &ledger.final_assignment {
        prop_assert_eq!(held.as_ref(), previous.get(id));
    }
    Ok(())
}
