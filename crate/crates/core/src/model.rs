//! Scenario data: studies, applicants and run configuration.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::matching::Capacity;
use crate::preference::{ObjectId, OrderedPartition, PreferenceRelation, RelationError};
use crate::ranking::{Variant, MAX_RANK};
use crate::rounds::AnswerPolicy;
use crate::seeding::token_rng;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{}unknown id `{id}`", at(*.line))]
    UnknownId { line: Option<usize>, id: String },
    #[error("{}duplicate id `{id}`", at(*.line))]
    DuplicateId { line: Option<usize>, id: String },
    #[error("study `{0}` has no family tag")]
    MissingFamily(ObjectId),
    #[error("applicant `{applicant}` has an invalid preference relation: {cause}")]
    RelationInvalid { applicant: ObjectId, cause: RelationError },
    #[error("applicant `{applicant}` has {classes} preference classes, more than {MAX_RANK}")]
    RankOverflow { applicant: ObjectId, classes: usize },
    #[error("{}selective study `{study}`: {message}", at(*.line))]
    SelectiveList { line: Option<usize>, study: ObjectId, message: String },
    #[error("{}study `{study}` needs a positive capacity", at(*.line))]
    BadCapacity { line: Option<usize>, study: ObjectId },
}

fn at(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdmissionKind {
    /// Ranks applicants with its own exogenous list.
    Selective,
    /// Ranks applicants from their wish lists, with limited seats.
    Limited,
    /// Accepts every applicant.
    Unlimited,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudyProgram {
    pub id: ObjectId,
    pub institution: String,
    pub academy: String,
    pub kind: AdmissionKind,
    pub capacity: Capacity,
    /// Best first; only for selective studies.
    pub exogenous_ranking: Option<Vec<ObjectId>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BacOrigin {
    Local,
    Abroad,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applicant {
    pub id: ObjectId,
    pub academy: String,
    pub bac: BacOrigin,
    /// Preferences over study ids.
    pub relation: PreferenceRelation,
    /// `None` defers to the run's default policy.
    pub policy: Option<AnswerPolicy>,
}

impl Applicant {
    /// Replaces ties and incomparabilities by a seeded strict order that
    /// extends the optimistic linearization of the applicant's preferences.
    pub fn forced_linear(&self, seed: u64) -> Result<Applicant, RelationError> {
        let partition = self.relation.linearize_optimistic()?;
        let mut rng = token_rng(seed, self.id.as_str());
        let mut order: Vec<ObjectId> = Vec::with_capacity(self.relation.len());
        for class in partition.classes() {
            let mut members: Vec<ObjectId> = class.iter().cloned().collect();
            if members.len() > 1 {
                members.shuffle(&mut rng);
            }
            order.extend(members);
        }
        let singletons = order.into_iter().map(|id| BTreeSet::from([id])).collect();
        let strict = OrderedPartition::new(singletons).expect("permutation of a partition").to_relation();
        Ok(Applicant { relation: strict, ..self.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioConfig {
    /// Falls back to the environment or zero when absent.
    pub seed: Option<u64>,
    pub variant: Variant,
    pub foreign_bac_first: bool,
    pub max_disj: usize,
    pub num_rounds: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig { seed: None, variant: Variant::V2, foreign_bac_first: false, max_disj: MAX_RANK, num_rounds: 3 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub families: BTreeMap<ObjectId, String>,
    pub studies: Vec<StudyProgram>,
    pub applicants: Vec<Applicant>,
}

impl Scenario {
    pub fn study(&self, id: &ObjectId) -> Option<&StudyProgram> {
        self.studies.iter().find(|s| &s.id == id)
    }

    pub fn applicant(&self, id: &ObjectId) -> Option<&Applicant> {
        self.applicants.iter().find(|a| &a.id == id)
    }

    /// Checks every cross-reference and size bound of the scenario.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut study_ids = BTreeSet::new();
        for s in &self.studies {
            if !study_ids.insert(&s.id) {
                return Err(ScenarioError::DuplicateId { line: None, id: s.id.to_string() });
            }
            if !self.families.contains_key(&s.id) {
                return Err(ScenarioError::MissingFamily(s.id.clone()));
            }
            if s.capacity == Capacity::Limited(0) {
                return Err(ScenarioError::BadCapacity { line: None, study: s.id.clone() });
            }
        }
        if let Some(extra) = self.families.keys().find(|k| !study_ids.contains(k)) {
            return Err(ScenarioError::UnknownId { line: None, id: extra.to_string() });
        }
        let mut applicant_ids = BTreeSet::new();
        for a in &self.applicants {
            if !applicant_ids.insert(&a.id) {
                return Err(ScenarioError::DuplicateId { line: None, id: a.id.to_string() });
            }
            if let Some(unknown) = a.relation.domain().iter().find(|s| !study_ids.contains(s)) {
                return Err(ScenarioError::UnknownId { line: None, id: unknown.to_string() });
            }
            let partition = a
                .relation
                .linearize_optimistic()
                .map_err(|cause| ScenarioError::RelationInvalid { applicant: a.id.clone(), cause })?;
            if partition.len() > MAX_RANK {
                return Err(ScenarioError::RankOverflow { applicant: a.id.clone(), classes: partition.len() });
            }
        }
        for s in &self.studies {
            match (&s.kind, &s.exogenous_ranking) {
                (AdmissionKind::Selective, None) => {
                    return Err(ScenarioError::SelectiveList {
                        line: None,
                        study: s.id.clone(),
                        message: "missing exogenous ranking".into(),
                    })
                }
                (AdmissionKind::Selective, Some(list)) => {
                    let mut seen = BTreeSet::new();
                    for id in list {
                        if !applicant_ids.contains(id) {
                            return Err(ScenarioError::UnknownId { line: None, id: id.to_string() });
                        }
                        if !seen.insert(id) {
                            return Err(ScenarioError::SelectiveList {
                                line: None,
                                study: s.id.clone(),
                                message: format!("`{id}` listed twice"),
                            });
                        }
                    }
                }
                (_, Some(_)) => {
                    return Err(ScenarioError::SelectiveList {
                        line: None,
                        study: s.id.clone(),
                        message: "only selective studies carry an exogenous ranking".into(),
                    })
                }
                (_, None) => {}
            }
        }
        Ok(())
    }

    /// Every applicant's relation replaced by its forced strict order.
    pub fn forced_linear(&self, seed: u64) -> Result<Scenario, ScenarioError> {
        let applicants = self
            .applicants
            .iter()
            .map(|a| a.forced_linear(seed).map_err(|cause| ScenarioError::RelationInvalid { applicant: a.id.clone(), cause }))
            .collect::<Result<_, _>>()?;
        Ok(Scenario { applicants, ..self.clone() })
    }
}
