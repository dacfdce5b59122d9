#![allow(dead_code)]

pub mod oracles;

use std::collections::BTreeMap;

use apbsim::matching::{Agent, Capacity, MatchInstance};
use apbsim::model::{AdmissionKind, Applicant, BacOrigin, Scenario, ScenarioConfig, StudyProgram};
use apbsim::preference::{ObjectId, PreferenceRelation, Statement};
use apbsim::ranking::Variant;
use apbsim::rounds::{Answer, AnswerPolicy};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

pub const MASTER_SEED: u64 = 0x00A9_B517_2015;

pub fn config(cases: u32) -> Config {
    Config { cases, rng_seed: RngSeed::Fixed(MASTER_SEED), failure_persistence: None, ..Config::default() }
}

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Shuffled list of the given ids, truncated to a random length (possibly empty
/// when `allow_empty`).
fn ranked_subset(pool: Vec<String>, allow_empty: bool) -> impl Strategy<Value = Vec<String>> {
    let n = pool.len();
    let min = usize::from(!allow_empty).min(n);
    (Just(pool).prop_shuffle(), min..=n).prop_map(|(mut list, keep)| {
        list.truncate(keep);
        list
    })
}

#[derive(Debug, Clone)]
pub struct RawInstance {
    pub proposers: Vec<(String, Vec<String>, usize)>,
    pub receivers: Vec<(String, Vec<String>, usize)>,
}

impl RawInstance {
    pub fn build(&self) -> MatchInstance {
        let agents = |side: &[(String, Vec<String>, usize)]| {
            side.iter().map(|(id, list, c)| Agent::new(id.clone(), list.clone(), Capacity::Limited(*c))).collect()
        };
        MatchInstance::new(agents(&self.proposers), agents(&self.receivers)).expect("generated instance is well formed")
    }

    pub fn transposed(&self) -> RawInstance {
        RawInstance { proposers: self.receivers.clone(), receivers: self.proposers.clone() }
    }
}

/// Two-sided instance with arbitrary (possibly incomplete) lists.
pub fn instance(max_side: usize, max_proposer_cap: usize, max_receiver_cap: usize) -> impl Strategy<Value = RawInstance> {
    lists_instance(max_side, max_proposer_cap, max_receiver_cap, false)
}

/// Every agent ranks the whole other side.
pub fn complete_instance(max_side: usize, max_proposer_cap: usize, max_receiver_cap: usize) -> impl Strategy<Value = RawInstance> {
    lists_instance(max_side, max_proposer_cap, max_receiver_cap, true)
}

fn lists_instance(max_side: usize, max_proposer_cap: usize, max_receiver_cap: usize, complete: bool) -> impl Strategy<Value = RawInstance> {
    (1..=max_side, 1..=max_side).prop_flat_map(move |(n, m)| {
        let p_ids = ids("p", n);
        let r_ids = ids("r", m);
        let list = |pool: &[String]| {
            let pool = pool.to_vec();
            let n = pool.len();
            (Just(pool).prop_shuffle(), if complete { n..=n } else { 0..=n }).prop_map(|(mut l, k)| {
                l.truncate(k);
                l
            })
        };
        (
            proptest::collection::vec(list(&r_ids), n),
            proptest::collection::vec(list(&p_ids), m),
            proptest::collection::vec(1..=max_proposer_cap, n),
            proptest::collection::vec(1..=max_receiver_cap, m),
        )
            .prop_map(move |(p_lists, r_lists, p_caps, r_caps)| RawInstance {
                proposers: p_ids.iter().cloned().zip(p_lists).zip(p_caps).map(|((a, b), c)| (a, b, c)).collect(),
                receivers: r_ids.iter().cloned().zip(r_lists).zip(r_caps).map(|((a, b), c)| (a, b, c)).collect(),
            })
    })
}

/// Latin-square instance: proposer `i` ranks `r(i+k)` k-th, receiver `j`
/// ranks `p(j+1+k)` k-th, so every cyclic shift is stable. Ids are permuted
/// and one random swap per agent perturbs the lists.
pub fn cyclic_instance(max_side: usize) -> impl Strategy<Value = RawInstance> {
    (2..=max_side).prop_flat_map(|n| {
        let swaps = proptest::collection::vec(proptest::option::of((0..n, 0..n)), 2 * n);
        (Just(ids("p", n)).prop_shuffle(), Just(ids("r", n)).prop_shuffle(), swaps).prop_map(move |(ps, rs, swaps)| {
            let mut p_lists: Vec<Vec<String>> = (0..n).map(|i| (0..n).map(|k| rs[(i + k) % n].clone()).collect()).collect();
            let mut r_lists: Vec<Vec<String>> = (0..n).map(|j| (0..n).map(|k| ps[(j + 1 + k) % n].clone()).collect()).collect();
            for (list, swap) in p_lists.iter_mut().chain(r_lists.iter_mut()).zip(swaps) {
                if let Some((a, b)) = swap {
                    list.swap(a, b);
                }
            }
            RawInstance {
                proposers: ps.iter().cloned().zip(p_lists).map(|(a, b)| (a, b, 1)).collect(),
                receivers: rs.iter().cloned().zip(r_lists).map(|(a, b)| (a, b, 1)).collect(),
            }
        })
    })
}

/// Instances small enough for exhaustive enumeration.
pub fn oracle_instance() -> impl Strategy<Value = RawInstance> {
    prop_oneof![
        1 => instance(6, 1, 2),
        1 => complete_instance(6, 1, 1),
        1 => complete_instance(4, 2, 2),
        2 => cyclic_instance(6),
    ]
}

/// Consistent relation over `domain`: a hidden total preorder from which a
/// random subset of statements is revealed.
pub fn relation_over(domain: Vec<String>) -> impl Strategy<Value = PreferenceRelation> {
    let n = domain.len();
    let pairs = n * n.saturating_sub(1) / 2;
    (proptest::collection::vec(0..n.max(1), n), proptest::collection::vec(0..4u8, pairs)).prop_map(
        move |(levels, reveal)| {
            let mut statements = Vec::new();
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    let show = reveal[k] != 0;
                    k += 1;
                    if !show {
                        continue;
                    }
                    let (a, b) = (domain[i].as_str(), domain[j].as_str());
                    match levels[i].cmp(&levels[j]) {
                        std::cmp::Ordering::Less => statements.push(Statement::strict(a, b)),
                        std::cmp::Ordering::Greater => statements.push(Statement::strict(b, a)),
                        std::cmp::Ordering::Equal => statements.push(Statement::indifferent(a, b)),
                    }
                }
            }
            PreferenceRelation::build(domain.iter().map(|s| ObjectId::from(s.as_str())), &statements)
                .expect("revealed statements of a total preorder are consistent")
        },
    )
}

pub fn relation(max: usize) -> impl Strategy<Value = PreferenceRelation> {
    (1..=max).prop_flat_map(|n| relation_over(ids("o", n)))
}

pub fn strict_chain(order: &[String]) -> PreferenceRelation {
    let st: Vec<Statement> = order.windows(2).map(|w| Statement::strict(w[0].as_str(), w[1].as_str())).collect();
    PreferenceRelation::build(order.iter().map(|s| ObjectId::from(s.as_str())), &st).unwrap()
}

/// Strict total order over a random non-empty subset of `domain`.
pub fn strict_over(domain: Vec<String>) -> impl Strategy<Value = PreferenceRelation> {
    ranked_subset(domain, false).prop_map(|order| strict_chain(&order))
}

/// Relation over a random non-empty subset of `domain`.
pub fn wishes_over(domain: Vec<String>) -> impl Strategy<Value = PreferenceRelation> {
    ranked_subset(domain, false).prop_flat_map(relation_over)
}

fn answer() -> impl Strategy<Value = Answer> {
    prop_oneof![
        1 => Just(Answer::DefinitelyYes),
        3 => Just(Answer::YesBut),
        1 => Just(Answer::NoBut),
        2 => Just(Answer::Resign),
    ]
}

fn policy(rounds: usize) -> impl Strategy<Value = Option<AnswerPolicy>> {
    prop_oneof![
        1 => Just(None),
        1 => Just(Some(AnswerPolicy::AlwaysDefinitelyYes)),
        2 => Just(Some(AnswerPolicy::YesButUntilFirstChoice)),
        4 => proptest::collection::vec(answer(), rounds)
            .prop_map(|a| Some(AnswerPolicy::Scripted((1..).zip(a).collect::<BTreeMap<_, _>>()))),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wishes {
    Any,
    Strict,
}

/// Valid multi-round scenario. Selective lists cover a random subset of the
/// applicants; every scripted policy answers each round.
pub fn scenario(max_studies: usize, max_applicants: usize, wishes: Wishes) -> impl Strategy<Value = Scenario> {
    scenario_shape(1..=max_studies, 0..=max_applicants, 1..=4, false, wishes)
}

/// Single-seat studies only, with more applicants than seats, so that
/// answers release seats that later rounds reassign.
pub fn contended_scenario(wishes: Wishes) -> impl Strategy<Value = Scenario> {
    scenario_shape(3..=4, 3..=5, 2..=4, true, wishes)
}

/// Mix of free-form and contended scenarios.
pub fn any_scenario(wishes: Wishes) -> impl Strategy<Value = Scenario> {
    prop_oneof![scenario(5, 7, wishes), contended_scenario(wishes)]
}

fn scenario_shape(
    studies: std::ops::RangeInclusive<usize>,
    applicants: std::ops::RangeInclusive<usize>,
    rounds: std::ops::RangeInclusive<usize>,
    contended: bool,
    wishes: Wishes,
) -> impl Strategy<Value = Scenario> {
    (studies, applicants, rounds).prop_flat_map(move |(ns, na, rounds)| {
        let s_ids = ids("S", ns);
        let a_ids = ids("c", na);
        let unlimited_weight = if contended { 0 } else { 1 };
        let kinds = proptest::collection::vec(
            prop_oneof![
                1 => Just(AdmissionKind::Selective),
                3 => Just(AdmissionKind::Limited),
                unlimited_weight => Just(AdmissionKind::Unlimited),
            ],
            ns,
        );
        let max_cap: usize = if contended { 1 } else { 2 };
        let study_meta =
            proptest::collection::vec((1..=max_cap, 0..2usize, 0..2usize, ranked_subset(a_ids.clone(), !contended)), ns);
        let relations: BoxedStrategy<Vec<PreferenceRelation>> = match wishes {
            Wishes::Any if contended => proptest::collection::vec(relation_over(s_ids.clone()), na).boxed(),
            Wishes::Any => proptest::collection::vec(wishes_over(s_ids.clone()), na).boxed(),
            Wishes::Strict if contended => proptest::collection::vec(
                Just(s_ids.clone()).prop_shuffle().prop_map(|order| strict_chain(&order)),
                na,
            )
            .boxed(),
            Wishes::Strict => proptest::collection::vec(strict_over(s_ids.clone()), na).boxed(),
        };
        let applicant_meta = proptest::collection::vec((0..2usize, any::<bool>(), policy(rounds)), na);
        (kinds, study_meta, relations, applicant_meta, any::<bool>(), 1..=3usize).prop_map(
            move |(kinds, study_meta, relations, applicant_meta, foreign_bac_first, max_disj)| {
                let academies = ["A", "B"];
                let fams = ["LMD", "CPGE"];
                let mut families = BTreeMap::new();
                let studies = s_ids
                    .iter()
                    .zip(kinds)
                    .zip(study_meta)
                    .map(|((id, kind), (cap, acad, fam, list))| {
                        families.insert(ObjectId::from(id.as_str()), fams[fam].to_owned());
                        StudyProgram {
                            id: ObjectId::from(id.as_str()),
                            institution: format!("U{id}"),
                            academy: academies[acad].into(),
                            kind,
                            capacity: if kind == AdmissionKind::Unlimited {
                                Capacity::Unlimited
                            } else {
                                Capacity::Limited(cap)
                            },
                            exogenous_ranking: (kind == AdmissionKind::Selective)
                                .then(|| list.iter().map(|s| ObjectId::from(s.as_str())).collect()),
                        }
                    })
                    .collect();
                let applicants = a_ids
                    .iter()
                    .zip(relations)
                    .zip(applicant_meta)
                    .map(|((id, relation), (acad, abroad, policy))| Applicant {
                        id: ObjectId::from(id.as_str()),
                        academy: academies[acad].into(),
                        bac: if abroad { BacOrigin::Abroad } else { BacOrigin::Local },
                        relation,
                        policy,
                    })
                    .collect();
                Scenario {
                    config: ScenarioConfig {
                        seed: Some(0),
                        variant: Variant::V2,
                        foreign_bac_first,
                        max_disj,
                        num_rounds: rounds,
                    },
                    families,
                    studies,
                    applicants,
                }
            },
        )
    })
}

/// Every ordered partition of `n` labelled objects, as class indices.
pub fn ordered_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for k in 1..=n {
        let mut f = vec![0usize; n];
        loop {
            let mut used = vec![false; k];
            for &c in &f {
                used[c] = true;
            }
            if used.iter().all(|&u| u) {
                out.push(f.clone());
            }
            let mut i = 0;
            while i < n {
                f[i] += 1;
                if f[i] < k {
                    break;
                }
                f[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
    }
    out
}
