//! Institution-side rankings for limited-capacity studies.
//!
//! A limited study cannot rank applicants on merit, so it orders them by how
//! they ranked the study: academy block first, then relative wish rank, then
//! absolute wish rank. Applicants sharing a cell are shuffled. The
//! indifference-aware variant adds the size of the tied class the study sits in
//! (its disjunction size) as a last criterion before shuffling, so applicants
//! with more specific preferences come first.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::preference::{ObjectId, OrderedPartition, PreferenceRelation, RelationError, Structure};
use crate::seeding::token_rng;

/// Wish lists hold at most this many ranks.
pub const MAX_RANK: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RankingError {
    #[error("study `{0}` has no family tag")]
    UnknownStudy(ObjectId),
    #[error("applicant `{0}` has ties in a strict-order-only ranking")]
    TiesPresent(ObjectId),
    #[error("applicant `{applicant}` did not rank study `{study}`")]
    NotRanked { applicant: ObjectId, study: ObjectId },
    #[error("applicant `{applicant}` ranks study `{study}` beyond {MAX_RANK}")]
    RankOverflow { applicant: ObjectId, study: ObjectId },
    #[error("applicant `{applicant}`: {cause}")]
    Relation { applicant: ObjectId, cause: RelationError },
}

/// Where a study sits in one applicant's linearized wish list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WishRank {
    /// Class index among classes holding a study of the same family.
    pub relative: usize,
    /// Class index in the whole list.
    pub absolute: usize,
    /// Size of the class the study belongs to.
    pub disjunction: usize,
}

/// Computes the wish rank of every study in `prefs`. Ranks are 1-based class
/// indices, so tied studies share their ranks.
pub fn compute_wish_ranks(
    prefs: &OrderedPartition,
    family_of: &BTreeMap<ObjectId, String>,
) -> Result<BTreeMap<ObjectId, WishRank>, RankingError> {
    let mut seen_per_family: BTreeMap<&str, usize> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for (i, class) in prefs.classes().iter().enumerate() {
        let mut families_here = Vec::new();
        for study in class {
            let family = family_of.get(study).ok_or_else(|| RankingError::UnknownStudy(study.clone()))?;
            if !families_here.contains(&family.as_str()) {
                families_here.push(family.as_str());
            }
        }
        for family in &families_here {
            *seen_per_family.entry(family).or_insert(0) += 1;
        }
        for study in class {
            let relative = seen_per_family[family_of[study].as_str()];
            out.insert(study.clone(), WishRank { relative, absolute: i + 1, disjunction: class.len() });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Variant {
    /// Strict wish lists, random tie-breaks over (block, relative, absolute) cells.
    V1,
    /// Any preorder, linearized optimistically; cells also split by disjunction size.
    #[default]
    V2,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::V1 => "v1",
            Variant::V2 => "v2",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "v1" => Ok(Variant::V1),
            "v2" => Ok(Variant::V2),
            other => Err(format!("unknown variant `{other}` (expected v1 or v2)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankingConfig {
    /// Applicants whose baccalaureate was taken abroad form a block ahead of locals.
    pub foreign_bac_first: bool,
    /// Largest disjunction size with its own cell; larger ones share an overflow cell.
    pub max_disj: usize,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig { foreign_bac_first: false, max_disj: MAX_RANK }
    }
}

/// An applicant competing for one study.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub id: &'a ObjectId,
    /// Same academy as the study.
    pub local: bool,
    pub abroad: bool,
    pub relation: &'a PreferenceRelation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    Abroad,
    Local,
    NonLocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Disjunction {
    Size(usize),
    Overflow,
}

/// Equivalence cell of applicants. Derived ordering is the processing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub block: Block,
    pub relative: usize,
    pub absolute: usize,
    /// `None` for v1 cells.
    pub disjunction: Option<Disjunction>,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let block = match self.block {
            Block::Abroad => "abroad",
            Block::Local => "local",
            Block::NonLocal => "nonlocal",
        };
        write!(f, "{block}/r{}/a{}", self.relative, self.absolute)?;
        match self.disjunction {
            Some(Disjunction::Size(d)) => write!(f, "/d{d}"),
            Some(Disjunction::Overflow) => f.write_str("/d+"),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TieBreak {
    pub cell: Cell,
    pub size: usize,
}

/// A study's strict order over its applicants, plus every random shuffle used
/// to produce it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedCandidateList {
    pub study: ObjectId,
    pub entries: Vec<ObjectId>,
    pub tiebreak_events: Vec<TieBreak>,
}

impl RankedCandidateList {
    pub fn random_cells(&self) -> usize {
        self.tiebreak_events.len()
    }

    pub fn tie_exposed(&self) -> usize {
        self.tiebreak_events.iter().map(|t| t.size).sum()
    }
}

/// Groups the pool into cells for `study` without shuffling. `V1` grouping
/// ignores disjunction sizes but, unlike [`build_preferences_v1`], accepts
/// tied relations; ranks always come from the optimistic linearization.
pub fn cell_profile(
    study: &ObjectId,
    pool: &[Candidate<'_>],
    families: &BTreeMap<ObjectId, String>,
    variant: Variant,
    config: &RankingConfig,
) -> Result<BTreeMap<Cell, Vec<ObjectId>>, RankingError> {
    let mut cells: BTreeMap<Cell, Vec<ObjectId>> = BTreeMap::new();
    for cand in pool {
        let partition = cand
            .relation
            .linearize_optimistic()
            .map_err(|cause| RankingError::Relation { applicant: cand.id.clone(), cause })?;
        let ranks = compute_wish_ranks(&partition, families)?;
        let rank = ranks
            .get(study)
            .ok_or_else(|| RankingError::NotRanked { applicant: cand.id.clone(), study: study.clone() })?;
        if rank.relative > MAX_RANK || rank.absolute > MAX_RANK {
            return Err(RankingError::RankOverflow { applicant: cand.id.clone(), study: study.clone() });
        }
        let block = if config.foreign_bac_first && cand.abroad {
            Block::Abroad
        } else if cand.local {
            Block::Local
        } else {
            Block::NonLocal
        };
        let disjunction = match variant {
            Variant::V1 => None,
            Variant::V2 if rank.disjunction <= config.max_disj => Some(Disjunction::Size(rank.disjunction)),
            Variant::V2 => Some(Disjunction::Overflow),
        };
        let cell = Cell { block, relative: rank.relative, absolute: rank.absolute, disjunction };
        cells.entry(cell).or_default().push(cand.id.clone());
    }
    for members in cells.values_mut() {
        members.sort();
    }
    Ok(cells)
}

fn assemble(study: &ObjectId, cells: BTreeMap<Cell, Vec<ObjectId>>, seed: u64) -> RankedCandidateList {
    let mut rng = token_rng(seed, study.as_str());
    let mut entries = Vec::new();
    let mut tiebreak_events = Vec::new();
    for (cell, mut members) in cells {
        if members.len() > 1 {
            members.shuffle(&mut rng);
            tiebreak_events.push(TieBreak { cell, size: members.len() });
        }
        entries.extend(members);
    }
    RankedCandidateList { study: study.clone(), entries, tiebreak_events }
}

/// Original ranking: every candidate must hold a strict total order.
pub fn build_preferences_v1(
    study: &ObjectId,
    pool: &[Candidate<'_>],
    families: &BTreeMap<ObjectId, String>,
    seed: u64,
    config: &RankingConfig,
) -> Result<RankedCandidateList, RankingError> {
    if let Some(tied) = pool.iter().find(|c| c.relation.classify() != Structure::StrictTotalOrder) {
        return Err(RankingError::TiesPresent(tied.id.clone()));
    }
    let cells = cell_profile(study, pool, families, Variant::V1, config)?;
    Ok(assemble(study, cells, seed))
}

/// Indifference-aware ranking over arbitrary preorders.
pub fn build_preferences_v2(
    study: &ObjectId,
    pool: &[Candidate<'_>],
    families: &BTreeMap<ObjectId, String>,
    seed: u64,
    config: &RankingConfig,
) -> Result<RankedCandidateList, RankingError> {
    let cells = cell_profile(study, pool, families, Variant::V2, config)?;
    Ok(assemble(study, cells, seed))
}

pub fn build_preferences(
    variant: Variant,
    study: &ObjectId,
    pool: &[Candidate<'_>],
    families: &BTreeMap<ObjectId, String>,
    seed: u64,
    config: &RankingConfig,
) -> Result<RankedCandidateList, RankingError> {
    match variant {
        Variant::V1 => build_preferences_v1(study, pool, families, seed, config),
        Variant::V2 => build_preferences_v2(study, pool, families, seed, config),
    }
}

/// Sum of the sizes of cells holding two or more applicants.
pub fn tie_exposure(cells: &BTreeMap<Cell, Vec<ObjectId>>) -> usize {
    cells.values().filter(|m| m.len() > 1).map(Vec::len).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preference::Statement;

    fn o(s: &str) -> ObjectId {
        ObjectId::from(s)
    }

    fn chain(items: &[&str]) -> PreferenceRelation {
        let st: Vec<_> = items.windows(2).map(|w| Statement::strict(w[0], w[1])).collect();
        PreferenceRelation::build(items.iter().map(|&s| o(s)), &st).unwrap()
    }

    fn families(pairs: &[(&str, &str)]) -> BTreeMap<ObjectId, String> {
        pairs.iter().map(|&(s, f)| (o(s), f.to_owned())).collect()
    }

    fn s_families() -> BTreeMap<ObjectId, String> {
        families(&[("S1", "L"), ("S2", "L"), ("S3", "L")])
    }

    fn c2() -> PreferenceRelation {
        PreferenceRelation::build(
            [o("S1"), o("S2"), o("S3")],
            &[Statement::strict("S1", "S3"), Statement::strict("S2", "S3")],
        )
        .unwrap()
    }

    #[test]
    fn cpge_lmd_wish_ranks() {
        let prefs = chain(&["CPGE1", "LMD-Physique", "CPGE2", "LMD-Maths"]).ordered_partition().unwrap();
        let fam = families(&[("CPGE1", "CPGE"), ("CPGE2", "CPGE"), ("LMD-Physique", "LMD"), ("LMD-Maths", "LMD")]);
        let ranks = compute_wish_ranks(&prefs, &fam).unwrap();
        assert_eq!(ranks[&o("LMD-Maths")], WishRank { relative: 2, absolute: 4, disjunction: 1 });
        assert_eq!(ranks[&o("CPGE2")], WishRank { relative: 2, absolute: 3, disjunction: 1 });
        assert_eq!(ranks[&o("LMD-Physique")], WishRank { relative: 1, absolute: 2, disjunction: 1 });
    }

    #[test]
    fn single_wish_ranks() {
        let prefs = OrderedPartition::from_tokens(&[&["S1"]]);
        let ranks = compute_wish_ranks(&prefs, &s_families()).unwrap();
        assert_eq!(ranks[&o("S1")], WishRank { relative: 1, absolute: 1, disjunction: 1 });
    }

    #[test]
    fn tied_wishes_share_class_rank() {
        let prefs = c2().linearize_optimistic().unwrap();
        let ranks = compute_wish_ranks(&prefs, &s_families()).unwrap();
        assert_eq!(ranks[&o("S1")], WishRank { relative: 1, absolute: 1, disjunction: 2 });
        assert_eq!(ranks[&o("S2")], WishRank { relative: 1, absolute: 1, disjunction: 2 });
        assert_eq!(ranks[&o("S3")], WishRank { relative: 2, absolute: 2, disjunction: 1 });
    }

    #[test]
    fn missing_family_is_unknown_study() {
        let prefs = OrderedPartition::from_tokens(&[&["S9"]]);
        assert_eq!(compute_wish_ranks(&prefs, &s_families()), Err(RankingError::UnknownStudy(o("S9"))));
    }

    #[test]
    fn v1_shuffles_identical_candidates() {
        let (c1, c2) = (o("C1"), o("C2"));
        let r = chain(&["S1", "S2", "S3"]);
        let pool = [
            Candidate { id: &c1, local: true, abroad: false, relation: &r },
            Candidate { id: &c2, local: true, abroad: false, relation: &r },
        ];
        let list = build_preferences_v1(&o("S1"), &pool, &s_families(), 5, &RankingConfig::default()).unwrap();
        assert_eq!(list.entries.len(), 2);
        assert_eq!(list.tiebreak_events.len(), 1);
        assert_eq!(list.tiebreak_events[0].size, 2);
        assert_eq!(list.tiebreak_events[0].cell.to_string(), "local/r1/a1");
    }

    #[test]
    fn locals_precede_better_ranked_nonlocals() {
        let (x, y) = (o("X"), o("Y"));
        let local = chain(&["S2", "S1"]);
        let outsider = chain(&["S1", "S2"]);
        let pool = [
            Candidate { id: &y, local: false, abroad: false, relation: &outsider },
            Candidate { id: &x, local: true, abroad: false, relation: &local },
        ];
        let list = build_preferences_v1(&o("S1"), &pool, &s_families(), 0, &RankingConfig::default()).unwrap();
        assert_eq!(list.entries, vec![x, y]);
        assert!(list.tiebreak_events.is_empty());
    }

    #[test]
    fn abroad_block_goes_first_when_enabled() {
        let (x, y) = (o("X"), o("Y"));
        let best = chain(&["S1", "S2"]);
        let worst = chain(&["S2", "S3", "S1"]);
        let pool = [
            Candidate { id: &x, local: true, abroad: false, relation: &best },
            Candidate { id: &y, local: false, abroad: true, relation: &worst },
        ];
        let on = RankingConfig { foreign_bac_first: true, ..RankingConfig::default() };
        let list = build_preferences_v1(&o("S1"), &pool, &s_families(), 0, &on).unwrap();
        assert_eq!(list.entries, vec![y.clone(), x.clone()]);
        let off = build_preferences_v1(&o("S1"), &pool, &s_families(), 0, &RankingConfig::default()).unwrap();
        assert_eq!(off.entries, vec![x, y]);
    }

    #[test]
    fn single_candidate_no_events() {
        let c = o("C");
        let r = chain(&["S1"]);
        let pool = [Candidate { id: &c, local: true, abroad: false, relation: &r }];
        let list = build_preferences_v1(&o("S1"), &pool, &s_families(), 1, &RankingConfig::default()).unwrap();
        assert_eq!(list.entries, vec![c]);
        assert!(list.tiebreak_events.is_empty());
    }

    #[test]
    fn v1_rejects_ties() {
        let c = o("C2");
        let r = c2();
        let pool = [Candidate { id: &c, local: true, abroad: false, relation: &r }];
        let err = build_preferences_v1(&o("S1"), &pool, &s_families(), 1, &RankingConfig::default()).unwrap_err();
        assert_eq!(err, RankingError::TiesPresent(c));
    }

    #[test]
    fn v2_two_applicant_scenario() {
        let (c1, c2id) = (o("C1"), o("C2"));
        let r1 = chain(&["S1", "S2", "S3"]);
        let r2 = c2();
        let pool = [
            Candidate { id: &c1, local: true, abroad: false, relation: &r1 },
            Candidate { id: &c2id, local: true, abroad: false, relation: &r2 },
        ];
        for seed in 0..8 {
            let s1 = build_preferences_v2(&o("S1"), &pool, &s_families(), seed, &RankingConfig::default()).unwrap();
            assert_eq!(s1.entries, vec![c1.clone(), c2id.clone()]);
            assert!(s1.tiebreak_events.is_empty());
        }
    }

    #[test]
    fn v2_three_applicant_scenario_for_s2() {
        let (c1, c2id, c3) = (o("C1"), o("C2"), o("C3"));
        let r1 = chain(&["S1", "S2", "S3"]);
        let r2 = c2();
        let r3 = chain(&["S2", "S1", "S3"]);
        let pool = [
            Candidate { id: &c1, local: true, abroad: false, relation: &r1 },
            Candidate { id: &c2id, local: true, abroad: false, relation: &r2 },
            Candidate { id: &c3, local: true, abroad: false, relation: &r3 },
        ];
        let s2 = build_preferences_v2(&o("S2"), &pool, &s_families(), 3, &RankingConfig::default()).unwrap();
        assert_eq!(s2.entries, vec![c3, c2id, c1]);
        assert!(s2.tiebreak_events.is_empty());
    }

    #[test]
    fn overflow_cell_follows_sized_cells() {
        let (a, b) = (o("A"), o("B"));
        let tied = PreferenceRelation::build([o("S1"), o("S2"), o("S3")], &[]).unwrap();
        let pair = PreferenceRelation::build([o("S1"), o("S2")], &[Statement::indifferent("S1", "S2")]).unwrap();
        let pool = [
            Candidate { id: &a, local: true, abroad: false, relation: &tied },
            Candidate { id: &b, local: true, abroad: false, relation: &pair },
        ];
        let cfg = RankingConfig { max_disj: 2, ..RankingConfig::default() };
        let cells = cell_profile(&o("S1"), &pool, &s_families(), Variant::V2, &cfg).unwrap();
        let keys: Vec<_> = cells.keys().map(|c| c.to_string()).collect();
        assert_eq!(keys, vec!["local/r1/a1/d2", "local/r1/a1/d+"]);
        let list = build_preferences_v2(&o("S1"), &pool, &s_families(), 0, &cfg).unwrap();
        assert_eq!(list.entries, vec![b, a]);
    }

    #[test]
    fn unranked_candidate_is_an_error() {
        let c = o("C");
        let r = chain(&["S2"]);
        let pool = [Candidate { id: &c, local: true, abroad: false, relation: &r }];
        let err = build_preferences_v2(&o("S1"), &pool, &s_families(), 0, &RankingConfig::default()).unwrap_err();
        assert!(matches!(err, RankingError::NotRanked { .. }));
    }
}
