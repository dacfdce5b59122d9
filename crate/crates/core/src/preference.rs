//! Preference relations over a finite set of named objects.
//!
//! A [`PreferenceRelation`] stores strict preferences (`a > b`) and indifferences
//! (`a = b`). Pairs with no statement are incomparable; incomparability is never
//! stored explicitly. Relations produced by [`PreferenceRelation::build`] are
//! transitively closed, including mixed chains (`a = b`, `b > c` gives `a > c`).
//!
//! Total preorders are represented canonically as an [`OrderedPartition`], and any
//! valid relation can be linearized into one by optimistic or pessimistic
//! level peeling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Opaque token naming an object of a preference domain (a study, an applicant...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId(String);

impl ObjectId {
    pub fn new(token: impl Into<String>) -> Self {
        ObjectId(token.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        ObjectId(s.to_owned())
    }
}

impl From<String> for ObjectId {
    fn from(s: String) -> Self {
        ObjectId(s)
    }
}

impl std::borrow::Borrow<str> for ObjectId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelationError {
    #[error("object id must be a nonempty token")]
    EmptyId,
    #[error("statement references `{0}`, which is not in the domain")]
    UnknownId(ObjectId),
    #[error("strict preferences are cyclic through `{0}`")]
    Cycle(ObjectId),
    #[error("conflicting statements: `{0}` is both strictly preferred to `{1}` and at most as good")]
    Conflict(ObjectId, ObjectId),
    #[error("relation is not total: `{0}` and `{1}` are incomparable")]
    NotTotal(ObjectId, ObjectId),
    #[error("relations are defined over different domains")]
    DomainMismatch,
    #[error("inconsistent preference statements: no object can be placed at level {level}")]
    Inconsistent { level: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StatementKind {
    Strict,
    Indifferent,
}

/// A raw preference statement: `left > right` or `left = right`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Statement {
    pub kind: StatementKind,
    pub left: ObjectId,
    pub right: ObjectId,
}

impl Statement {
    pub fn strict(left: impl Into<ObjectId>, right: impl Into<ObjectId>) -> Self {
        Statement { kind: StatementKind::Strict, left: left.into(), right: right.into() }
    }

    pub fn indifferent(left: impl Into<ObjectId>, right: impl Into<ObjectId>) -> Self {
        Statement { kind: StatementKind::Indifferent, left: left.into(), right: right.into() }
    }
}

/// Structural type of a valid relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    StrictTotalOrder,
    TotalPreorder,
    PartialPreorder,
}

// Strength of a derived `>=` link; `max` of two strengths is the stronger one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Link {
    None,
    Weak,
    Strict,
}

impl Link {
    fn chain(self, next: Link) -> Link {
        match (self, next) {
            (Link::None, _) | (_, Link::None) => Link::None,
            (Link::Strict, _) | (_, Link::Strict) => Link::Strict,
            _ => Link::Weak,
        }
    }
}

/// A preference relation over a finite domain.
///
/// Objects are addressed internally by their index in the sorted domain.
/// `strict` holds ordered pairs `(better, worse)`, `indiff` holds unordered pairs
/// normalized as `(low, high)` index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceRelation {
    domain: Vec<ObjectId>,
    strict: BTreeSet<(usize, usize)>,
    indiff: BTreeSet<(usize, usize)>,
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl PreferenceRelation {
    /// Builds and transitively closes a relation, rejecting cycles and conflicts.
    pub fn build<I>(domain: I, statements: &[Statement]) -> Result<Self, RelationError>
    where
        I: IntoIterator<Item = ObjectId>,
    {
        let raw = Self::from_statements_unchecked(domain, statements)?;
        raw.closed()
    }

    /// Stores the statements as given, with no closure and no consistency check.
    ///
    /// Reflexive indifferences (`a = a`) are dropped. A reflexive strict statement
    /// is kept so that linearization reports it as inconsistent.
    pub fn from_statements_unchecked<I>(domain: I, statements: &[Statement]) -> Result<Self, RelationError>
    where
        I: IntoIterator<Item = ObjectId>,
    {
        let domain: Vec<ObjectId> = domain.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if domain.iter().any(|o| o.as_str().is_empty()) {
            return Err(RelationError::EmptyId);
        }
        let mut rel = PreferenceRelation { domain, strict: BTreeSet::new(), indiff: BTreeSet::new() };
        for st in statements {
            let l = rel.index_of(&st.left).ok_or_else(|| RelationError::UnknownId(st.left.clone()))?;
            let r = rel.index_of(&st.right).ok_or_else(|| RelationError::UnknownId(st.right.clone()))?;
            match st.kind {
                StatementKind::Strict => {
                    rel.strict.insert((l, r));
                }
                StatementKind::Indifferent if l != r => {
                    rel.indiff.insert(ordered(l, r));
                }
                StatementKind::Indifferent => {}
            }
        }
        Ok(rel)
    }

    /// The relation with no statements: every pair of distinct objects is incomparable.
    pub fn empty<I>(domain: I) -> Result<Self, RelationError>
    where
        I: IntoIterator<Item = ObjectId>,
    {
        Self::build(domain, &[])
    }

    fn closed(&self) -> Result<Self, RelationError> {
        let n = self.domain.len();

        // Pure strict chains first, so a strict cycle is reported as such even
        // when indifferences are also involved elsewhere.
        let mut reach = vec![vec![false; n]; n];
        for &(a, b) in &self.strict {
            reach[a][b] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        if let Some(i) = (0..n).find(|&i| reach[i][i]) {
            return Err(RelationError::Cycle(self.domain[i].clone()));
        }

        let mut m = vec![vec![Link::None; n]; n];
        for &(a, b) in &self.strict {
            m[a][b] = Link::Strict;
        }
        for &(a, b) in &self.indiff {
            m[a][b] = m[a][b].max(Link::Weak);
            m[b][a] = m[b][a].max(Link::Weak);
        }
        for k in 0..n {
            for i in 0..n {
                if m[i][k] == Link::None {
                    continue;
                }
                for j in 0..n {
                    let via = m[i][k].chain(m[k][j]);
                    if via > m[i][j] {
                        m[i][j] = via;
                    }
                }
            }
        }

        let mut strict = BTreeSet::new();
        let mut indiff = BTreeSet::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                match (m[i][j], m[j][i]) {
                    (Link::Strict, Link::None) => {
                        strict.insert((i, j));
                    }
                    (Link::Strict, _) => {
                        return Err(RelationError::Conflict(self.domain[i].clone(), self.domain[j].clone()));
                    }
                    (Link::Weak, Link::Weak) => {
                        indiff.insert(ordered(i, j));
                    }
                    _ => {}
                }
            }
        }
        Ok(PreferenceRelation { domain: self.domain.clone(), strict, indiff })
    }

    pub fn domain(&self) -> &[ObjectId] {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn index_of(&self, id: &ObjectId) -> Option<usize> {
        self.domain.binary_search(id).ok()
    }

    pub fn contains(&self, id: &ObjectId) -> bool {
        self.index_of(id).is_some()
    }

    /// `a > b`.
    pub fn prefers(&self, a: &ObjectId, b: &ObjectId) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.strict.contains(&(i, j)),
            _ => false,
        }
    }

    /// `a = b` for distinct objects.
    pub fn indifferent(&self, a: &ObjectId, b: &ObjectId) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => i != j && self.indiff.contains(&ordered(i, j)),
            _ => false,
        }
    }

    pub fn comparable(&self, a: &ObjectId, b: &ObjectId) -> bool {
        a == b || self.prefers(a, b) || self.prefers(b, a) || self.indifferent(a, b)
    }

    /// Strict pairs as `(better, worse)`, in index order.
    pub fn strict_pairs(&self) -> impl Iterator<Item = (&ObjectId, &ObjectId)> + '_ {
        self.strict.iter().map(|&(a, b)| (&self.domain[a], &self.domain[b]))
    }

    /// Indifference pairs, each listed once with the smaller token first.
    pub fn indifferent_pairs(&self) -> impl Iterator<Item = (&ObjectId, &ObjectId)> + '_ {
        self.indiff.iter().map(|&(a, b)| (&self.domain[a], &self.domain[b]))
    }

    /// The statements that, once closed, reproduce this relation.
    pub fn statements(&self) -> Vec<Statement> {
        self.strict_pairs()
            .map(|(a, b)| Statement::strict(a.clone(), b.clone()))
            .chain(self.indifferent_pairs().map(|(a, b)| Statement::indifferent(a.clone(), b.clone())))
            .collect()
    }

    /// The same relation with every strict pair reversed; indifferences unchanged.
    pub fn reversed(&self) -> Self {
        PreferenceRelation {
            domain: self.domain.clone(),
            strict: self.strict.iter().map(|&(a, b)| (b, a)).collect(),
            indiff: self.indiff.clone(),
        }
    }

    pub fn classify(&self) -> Structure {
        let n = self.domain.len();
        let mut all_comparable = true;
        for i in 0..n {
            for j in (i + 1)..n {
                if !self.strict.contains(&(i, j)) && !self.strict.contains(&(j, i)) && !self.indiff.contains(&(i, j)) {
                    all_comparable = false;
                }
            }
        }
        match (all_comparable, self.indiff.is_empty()) {
            (true, true) => Structure::StrictTotalOrder,
            (true, false) => Structure::TotalPreorder,
            (false, _) => Structure::PartialPreorder,
        }
    }

    /// The ordered partition of a total preorder.
    pub fn ordered_partition(&self) -> Result<OrderedPartition, RelationError> {
        let n = self.domain.len();
        for i in 0..n {
            for j in (i + 1)..n {
                if !self.strict.contains(&(i, j)) && !self.strict.contains(&(j, i)) && !self.indiff.contains(&(i, j)) {
                    return Err(RelationError::NotTotal(self.domain[i].clone(), self.domain[j].clone()));
                }
            }
        }
        // In a closed total preorder the number of strictly better objects identifies the class.
        let mut by_rank: BTreeMap<usize, BTreeSet<ObjectId>> = BTreeMap::new();
        for (j, id) in self.domain.iter().enumerate() {
            let better = (0..n).filter(|&i| self.strict.contains(&(i, j))).count();
            by_rank.entry(better).or_default().insert(id.clone());
        }
        Ok(OrderedPartition { classes: by_rank.into_values().collect() })
    }

    /// Whether every statement of `inner` also holds in `self`.
    pub fn extends(&self, inner: &PreferenceRelation) -> Result<bool, RelationError> {
        if self.domain != inner.domain {
            return Err(RelationError::DomainMismatch);
        }
        Ok(inner.strict.is_subset(&self.strict) && inner.indiff.is_subset(&self.indiff))
    }

    /// Optimistic linearization: each level holds the remaining objects that no
    /// remaining object is strictly preferred to.
    pub fn linearize_optimistic(&self) -> Result<OrderedPartition, RelationError> {
        let levels = self.peel(|strict, x, o| strict.contains(&(x, o)))?;
        Ok(self.partition_from(levels))
    }

    /// Pessimistic linearization: levels of objects strictly preferred to no
    /// remaining object, collected from the bottom and then reversed.
    pub fn linearize_pessimistic(&self) -> Result<OrderedPartition, RelationError> {
        let mut levels = self.peel(|strict, x, o| strict.contains(&(o, x)))?;
        levels.reverse();
        Ok(self.partition_from(levels))
    }

    // Repeatedly extracts the objects not blocked by any remaining object, then
    // defers (to a fixed point) every extracted object that is indifferent to an
    // object left behind.
    fn peel<F>(&self, blocked_by: F) -> Result<Vec<BTreeSet<usize>>, RelationError>
    where
        F: Fn(&BTreeSet<(usize, usize)>, usize, usize) -> bool,
    {
        let mut remaining: BTreeSet<usize> = (0..self.domain.len()).collect();
        let mut pending_indiff = self.indiff.clone();
        let mut levels = Vec::new();
        while !remaining.is_empty() {
            let mut level: BTreeSet<usize> = remaining
                .iter()
                .copied()
                .filter(|&o| !remaining.iter().any(|&x| blocked_by(&self.strict, x, o)))
                .collect();
            loop {
                let deferred: Vec<usize> = level
                    .iter()
                    .copied()
                    .filter(|&o| {
                        pending_indiff.iter().any(|&(a, b)| {
                            (a == o && !level.contains(&b)) || (b == o && !level.contains(&a))
                        })
                    })
                    .collect();
                if deferred.is_empty() {
                    break;
                }
                for o in deferred {
                    level.remove(&o);
                }
            }
            if level.is_empty() {
                return Err(RelationError::Inconsistent { level: levels.len() + 1 });
            }
            pending_indiff.retain(|(a, b)| !(level.contains(a) && level.contains(b)));
            for o in &level {
                remaining.remove(o);
            }
            levels.push(level);
        }
        Ok(levels)
    }

    fn partition_from(&self, levels: Vec<BTreeSet<usize>>) -> OrderedPartition {
        OrderedPartition {
            classes: levels
                .into_iter()
                .map(|level| level.into_iter().map(|i| self.domain[i].clone()).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("class {0} is empty")]
    EmptyClass(usize),
    #[error("`{0}` appears in more than one class")]
    Overlap(ObjectId),
}

/// Ordered sequence of nonempty, disjoint equivalence classes, best class first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OrderedPartition {
    classes: Vec<BTreeSet<ObjectId>>,
}

impl OrderedPartition {
    pub fn new(classes: Vec<BTreeSet<ObjectId>>) -> Result<Self, PartitionError> {
        let mut seen = BTreeSet::new();
        for (i, class) in classes.iter().enumerate() {
            if class.is_empty() {
                return Err(PartitionError::EmptyClass(i + 1));
            }
            for id in class {
                if !seen.insert(id.clone()) {
                    return Err(PartitionError::Overlap(id.clone()));
                }
            }
        }
        Ok(OrderedPartition { classes })
    }

    /// Convenience constructor from nested token slices; panics on invalid input.
    pub fn from_tokens(classes: &[&[&str]]) -> Self {
        Self::new(classes.iter().map(|c| c.iter().map(|&t| ObjectId::from(t)).collect()).collect())
            .expect("valid ordered partition")
    }

    pub fn classes(&self) -> &[BTreeSet<ObjectId>] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Zero-based index of the class holding `id`.
    pub fn class_of(&self, id: &ObjectId) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(id))
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectId> + '_ {
        self.classes.iter().flatten()
    }

    pub fn reversed(&self) -> Self {
        OrderedPartition { classes: self.classes.iter().rev().cloned().collect() }
    }

    /// The total preorder this partition encodes.
    pub fn to_relation(&self) -> PreferenceRelation {
        let mut statements = Vec::new();
        for (i, class) in self.classes.iter().enumerate() {
            let mut members = class.iter();
            if let Some(first) = members.next() {
                for other in members {
                    statements.push(Statement::indifferent(first.clone(), other.clone()));
                }
                if let Some(next) = self.classes.get(i + 1).and_then(|c| c.iter().next()) {
                    statements.push(Statement::strict(first.clone(), next.clone()));
                }
            }
        }
        PreferenceRelation::build(self.objects().cloned(), &statements).expect("ordered partitions are consistent")
    }
}

impl fmt::Display for OrderedPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, class) in self.classes.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str("{")?;
            for (j, id) in class.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{id}")?;
            }
            f.write_str("}")?;
        }
        f.write_str(")")
    }
}
