//! Capacitated deferred acceptance over incomplete strict lists.
//!
//! Both sides carry a capacity. With every capacity equal to one and complete
//! lists this is the classic stable marriage procedure; with capacities on the
//! receiving side it is the hospitals/residents generalization, where a full
//! receiver evicts its least preferred held proposer when a better one arrives.
//! Agents missing from a counterpart's list are mutually unacceptable.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("agent `{0}` is declared twice on the same side")]
    DuplicateAgent(String),
    #[error("`{agent}` lists unknown counterpart `{listed}`")]
    UnknownCounterpart { agent: String, listed: String },
    #[error("`{agent}` lists `{listed}` more than once")]
    DuplicatePreference { agent: String, listed: String },
    #[error("agent `{0}` has zero capacity")]
    ZeroCapacity(String),
    #[error("matching mentions unknown agent `{0}`")]
    ForeignAgent(String),
    #[error("exhaustive search needs {size} candidate assignments, above the limit of {limit}")]
    TooLarge { size: u128, limit: u128 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Capacity {
    Limited(usize),
    /// Resolved to the size of the opposite side.
    Unlimited,
}

/// One agent as supplied to [`MatchInstance::new`]: its id, its strict
/// preference list over counterpart ids (best first) and its capacity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agent {
    pub id: String,
    pub prefs: Vec<String>,
    pub capacity: Capacity,
}

impl Agent {
    pub fn new<S: Into<String>>(id: impl Into<String>, prefs: impl IntoIterator<Item = S>, capacity: Capacity) -> Self {
        Agent { id: id.into(), prefs: prefs.into_iter().map(Into::into).collect(), capacity }
    }

    /// An agent holding at most one partner.
    pub fn single<S: Into<String>>(id: impl Into<String>, prefs: impl IntoIterator<Item = S>) -> Self {
        Self::new(id, prefs, Capacity::Limited(1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Side {
    ids: Vec<String>,
    prefs: Vec<Vec<usize>>,
    capacity: Vec<usize>,
    // rank[agent][counterpart], `None` when unlisted
    rank: Vec<Vec<Option<usize>>>,
}

impl Side {
    fn index(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }
}

/// A validated two-sided matching instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchInstance {
    proposers: Side,
    receivers: Side,
}

fn build_side(agents: &[Agent], counterparts: &[Agent]) -> Result<Side, MatchError> {
    let mut lookup = BTreeMap::new();
    for (i, a) in counterparts.iter().enumerate() {
        lookup.insert(a.id.as_str(), i);
    }
    let mut seen = BTreeSet::new();
    let mut side = Side { ids: Vec::new(), prefs: Vec::new(), capacity: Vec::new(), rank: Vec::new() };
    for agent in agents {
        if !seen.insert(agent.id.as_str()) {
            return Err(MatchError::DuplicateAgent(agent.id.clone()));
        }
        let capacity = match agent.capacity {
            Capacity::Limited(0) => return Err(MatchError::ZeroCapacity(agent.id.clone())),
            Capacity::Limited(q) => q,
            Capacity::Unlimited => counterparts.len().max(1),
        };
        let mut rank = vec![None; counterparts.len()];
        let mut prefs = Vec::with_capacity(agent.prefs.len());
        for (pos, listed) in agent.prefs.iter().enumerate() {
            let &j = lookup.get(listed.as_str()).ok_or_else(|| MatchError::UnknownCounterpart {
                agent: agent.id.clone(),
                listed: listed.clone(),
            })?;
            if rank[j].is_some() {
                return Err(MatchError::DuplicatePreference { agent: agent.id.clone(), listed: listed.clone() });
            }
            rank[j] = Some(pos);
            prefs.push(j);
        }
        side.ids.push(agent.id.clone());
        side.prefs.push(prefs);
        side.capacity.push(capacity);
        side.rank.push(rank);
    }
    Ok(side)
}

impl MatchInstance {
    pub fn new(proposers: Vec<Agent>, receivers: Vec<Agent>) -> Result<Self, MatchError> {
        Ok(MatchInstance { proposers: build_side(&proposers, &receivers)?, receivers: build_side(&receivers, &proposers)? })
    }

    pub fn proposers(&self) -> &[String] {
        &self.proposers.ids
    }

    pub fn receivers(&self) -> &[String] {
        &self.receivers.ids
    }

    /// The same market with the roles of proposers and receivers swapped.
    pub fn transposed(&self) -> Self {
        MatchInstance { proposers: self.receivers.clone(), receivers: self.proposers.clone() }
    }

    fn acceptable(&self, p: usize, r: usize) -> bool {
        self.proposers.rank[p][r].is_some() && self.receivers.rank[r][p].is_some()
    }

    /// Position of `receiver` in `proposer`'s list.
    pub fn proposer_rank(&self, proposer: &str, receiver: &str) -> Option<usize> {
        let p = self.proposers.index(proposer)?;
        let r = self.receivers.index(receiver)?;
        self.proposers.rank[p][r]
    }

    /// Upper bound on the number of assignments [`enumerate_stable_matchings`] visits.
    pub fn search_space(&self) -> u128 {
        self.proposers
            .prefs
            .iter()
            .zip(&self.proposers.capacity)
            .fold(1u128, |acc, (list, &cap)| {
                let n = list.len() as u128;
                let mut subsets = 0u128;
                let mut binom = 1u128;
                for k in 0..=(cap.min(list.len()) as u128) {
                    subsets = subsets.saturating_add(binom);
                    binom = binom.saturating_mul(n - k) / (k + 1);
                }
                acc.saturating_mul(subsets)
            })
    }
}

/// A set of (proposer, receiver) engagements.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Matching {
    pairs: BTreeSet<(String, String)>,
}

impl Matching {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<A: Into<String>, B: Into<String>>(pairs: impl IntoIterator<Item = (A, B)>) -> Self {
        Matching { pairs: pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect() }
    }

    pub fn pairs(&self) -> &BTreeSet<(String, String)> {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, proposer: &str, receiver: &str) -> bool {
        self.pairs.iter().any(|(p, r)| p == proposer && r == receiver)
    }

    pub fn partners_of_proposer<'a>(&'a self, proposer: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.pairs.iter().filter(move |(p, _)| p == proposer).map(|(_, r)| r.as_str())
    }

    pub fn partners_of_receiver<'a>(&'a self, receiver: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.pairs.iter().filter(move |(_, r)| r == receiver).map(|(p, _)| p.as_str())
    }

    /// The matching with each pair flipped, for use with [`MatchInstance::transposed`].
    pub fn transposed(&self) -> Self {
        Matching { pairs: self.pairs.iter().map(|(a, b)| (b.clone(), a.clone())).collect() }
    }
}

impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (p, r)) in self.pairs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "({p},{r})")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockingPair {
    pub proposer: String,
    pub receiver: String,
}

/// Order in which free proposers are served.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    Fifo,
    Lifo,
}

/// Counters recorded while running deferred acceptance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaTrace {
    pub proposals: usize,
    /// Highest number of proposers each receiver held at any instant.
    pub peak_load: Vec<usize>,
}

pub fn deferred_acceptance(instance: &MatchInstance) -> Matching {
    deferred_acceptance_traced(instance, Schedule::Fifo).0
}

pub fn deferred_acceptance_traced(instance: &MatchInstance, schedule: Schedule) -> (Matching, DaTrace) {
    let props = &instance.proposers;
    let recvs = &instance.receivers;
    let mut next = vec![0usize; props.ids.len()];
    let mut load = vec![0usize; props.ids.len()];
    // held[r] keeps (rank of proposer in r's list, proposer)
    let mut held: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); recvs.ids.len()];
    let mut trace = DaTrace { proposals: 0, peak_load: vec![0; recvs.ids.len()] };

    let mut free: VecDeque<usize> = (0..props.ids.len()).collect();
    let mut queued = vec![true; props.ids.len()];
    let pop = |q: &mut VecDeque<usize>| match schedule {
        Schedule::Fifo => q.pop_front(),
        Schedule::Lifo => q.pop_back(),
    };

    while let Some(p) = pop(&mut free) {
        queued[p] = false;
        while load[p] < props.capacity[p] && next[p] < props.prefs[p].len() {
            let r = props.prefs[p][next[p]];
            next[p] += 1;
            trace.proposals += 1;
            let Some(rank) = recvs.rank[r][p] else { continue };
            if held[r].len() < recvs.capacity[r] {
                held[r].insert((rank, p));
                load[p] += 1;
            } else {
                let &(worst_rank, worst) = held[r].last().expect("full receiver holds someone");
                if rank >= worst_rank {
                    continue;
                }
                held[r].remove(&(worst_rank, worst));
                load[worst] -= 1;
                held[r].insert((rank, p));
                load[p] += 1;
                if !queued[worst] {
                    queued[worst] = true;
                    free.push_back(worst);
                }
            }
            trace.peak_load[r] = trace.peak_load[r].max(held[r].len());
        }
    }

    let pairs = held
        .iter()
        .enumerate()
        .flat_map(|(r, hs)| hs.iter().map(move |&(_, p)| (props.ids[p].clone(), recvs.ids[r].clone())))
        .collect();
    (Matching { pairs }, trace)
}

struct Indexed {
    partners_of_p: Vec<Vec<usize>>,
    partners_of_r: Vec<Vec<usize>>,
}

fn index_matching(instance: &MatchInstance, matching: &Matching) -> Result<Indexed, MatchError> {
    let mut partners_of_p = vec![Vec::new(); instance.proposers.ids.len()];
    let mut partners_of_r = vec![Vec::new(); instance.receivers.ids.len()];
    for (p, r) in &matching.pairs {
        let pi = instance.proposers.index(p).ok_or_else(|| MatchError::ForeignAgent(p.clone()))?;
        let ri = instance.receivers.index(r).ok_or_else(|| MatchError::ForeignAgent(r.clone()))?;
        partners_of_p[pi].push(ri);
        partners_of_r[ri].push(pi);
    }
    Ok(Indexed { partners_of_p, partners_of_r })
}

fn blocking_in(instance: &MatchInstance, m: &Indexed) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    visit_blocking(instance, &m.partners_of_p, &m.partners_of_r, |pair| {
        out.insert(pair);
        true
    });
    out
}

/// Calls `f` on each blocking pair until it returns `false`.
fn visit_blocking(
    instance: &MatchInstance,
    partners_of_p: &[Vec<usize>],
    partners_of_r: &[Vec<usize>],
    mut f: impl FnMut((usize, usize)) -> bool,
) {
    let props = &instance.proposers;
    let recvs = &instance.receivers;
    // Worst held rank, or `None` while below capacity (any acceptable partner is welcome).
    let threshold = |side: &Side, agent: usize, partners: &[usize]| -> Option<usize> {
        if partners.len() < side.capacity[agent] {
            None
        } else {
            partners.iter().filter_map(|&x| side.rank[agent][x]).max()
        }
    };
    let r_thr: Vec<_> = (0..recvs.ids.len()).map(|r| threshold(recvs, r, &partners_of_r[r])).collect();
    for p in 0..props.ids.len() {
        let p_thr = threshold(props, p, &partners_of_p[p]);
        for &r in &props.prefs[p] {
            if !instance.acceptable(p, r) || partners_of_p[p].contains(&r) {
                continue;
            }
            let p_wants = p_thr.is_none_or(|worst| props.rank[p][r].unwrap() < worst);
            let r_wants = r_thr[r].is_none_or(|worst| recvs.rank[r][p].unwrap() < worst);
            if p_wants && r_wants && !f((p, r)) {
                return;
            }
        }
    }
}

/// All pairs that would both rather be matched to each other than keep their
/// current situation. Being unmatched, or under capacity, counts as worst.
pub fn find_blocking_pairs(instance: &MatchInstance, matching: &Matching) -> Result<BTreeSet<BlockingPair>, MatchError> {
    let indexed = index_matching(instance, matching)?;
    Ok(blocking_in(instance, &indexed)
        .into_iter()
        .map(|(p, r)| BlockingPair {
            proposer: instance.proposers.ids[p].clone(),
            receiver: instance.receivers.ids[r].clone(),
        })
        .collect())
}

pub fn is_stable(instance: &MatchInstance, matching: &Matching) -> Result<bool, MatchError> {
    find_blocking_pairs(instance, matching).map(|b| b.is_empty())
}

/// Default bound on [`MatchInstance::search_space`] for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_LIMIT: u128 = 2_000_000;

/// Every stable matching of `instance`, by exhaustive generation of feasible
/// matchings filtered through [`find_blocking_pairs`]. The result is sorted.
pub fn enumerate_stable_matchings(instance: &MatchInstance, limit: u128) -> Result<Vec<Matching>, MatchError> {
    let size = instance.search_space();
    if size > limit {
        return Err(MatchError::TooLarge { size, limit });
    }
    let mut search = Enumeration {
        instance,
        partners_of_p: vec![Vec::new(); instance.proposers.ids.len()],
        partners_of_r: vec![Vec::new(); instance.receivers.ids.len()],
        found: BTreeSet::new(),
    };
    search.assign(0, 0);
    Ok(search.found.into_iter().collect())
}

struct Enumeration<'a> {
    instance: &'a MatchInstance,
    partners_of_p: Vec<Vec<usize>>,
    partners_of_r: Vec<Vec<usize>>,
    found: BTreeSet<Matching>,
}

impl Enumeration<'_> {
    // Decides, for proposer `p`, whether to take the receiver at list position `pos`.
    fn assign(&mut self, p: usize, pos: usize) {
        let props = &self.instance.proposers;
        if p == props.ids.len() {
            self.visit();
            return;
        }
        if pos == props.prefs[p].len() || self.partners_of_p[p].len() == props.capacity[p] {
            self.assign(p + 1, 0);
            return;
        }
        let r = props.prefs[p][pos];
        if self.instance.acceptable(p, r) && self.partners_of_r[r].len() < self.instance.receivers.capacity[r] {
            self.partners_of_p[p].push(r);
            self.partners_of_r[r].push(p);
            self.assign(p, pos + 1);
            self.partners_of_p[p].pop();
            self.partners_of_r[r].pop();
        }
        self.assign(p, pos + 1);
    }

    fn visit(&mut self) {
        let mut stable = true;
        visit_blocking(self.instance, &self.partners_of_p, &self.partners_of_r, |_| {
            stable = false;
            false
        });
        if stable {
            let props = &self.instance.proposers;
            let recvs = &self.instance.receivers;
            let pairs = self
                .partners_of_p
                .iter()
                .enumerate()
                .flat_map(|(p, rs)| rs.iter().map(move |&r| (props.ids[p].clone(), recvs.ids[r].clone())))
                .collect();
            self.found.insert(Matching { pairs });
        }
    }
}

/// Whether `candidate` gives every proposer a partner set at least as good as
/// in each matching of `stable`: comparing partners best-first, position by
/// position, and never fewer partners.
pub fn is_proposer_optimal(instance: &MatchInstance, candidate: &Matching, stable: &[Matching]) -> Result<bool, MatchError> {
    let ranks = |m: &Matching| -> Result<Vec<Vec<usize>>, MatchError> {
        let idx = index_matching(instance, m)?;
        Ok(idx
            .partners_of_p
            .iter()
            .enumerate()
            .map(|(p, rs)| {
                let mut v: Vec<usize> = rs.iter().filter_map(|&r| instance.proposers.rank[p][r]).collect();
                v.sort_unstable();
                v
            })
            .collect())
    };
    let mine = ranks(candidate)?;
    for other in stable {
        let theirs = ranks(other)?;
        for (a, b) in mine.iter().zip(&theirs) {
            if a.len() < b.len() || a.iter().zip(b).any(|(x, y)| x > y) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
