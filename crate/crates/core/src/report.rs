//! Run metrics and canonical report text.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_integer::Integer;

use crate::matching::Matching;
use crate::rounds::RoundLedger;

/// Exposure to random tie-breaking and satisfaction counters of one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetricsReport {
    /// Shuffled cells holding two or more applicants, over all rounds.
    pub random_cells: usize,
    /// Applicants in such cells, counted once per cell.
    pub tie_exposed_applicants: usize,
    pub assigned_count: usize,
    pub unassigned_count: usize,
    /// Assigned applicants per 1-based preference class of their final study.
    pub wish_rank_histogram: BTreeMap<usize, usize>,
}

impl MetricsReport {
    pub fn from_ledger(ledger: &RoundLedger) -> Self {
        let mut m = MetricsReport::default();
        for round in &ledger.rounds {
            m.random_cells += round.tiebreaks.len();
            m.tie_exposed_applicants += round.tiebreaks.iter().map(|(_, t)| t.size).sum::<usize>();
        }
        for held in ledger.final_assignment.values() {
            match held {
                Some(h) => {
                    m.assigned_count += 1;
                    *m.wish_rank_histogram.entry(h.class_index).or_insert(0) += 1;
                }
                None => m.unassigned_count += 1,
            }
        }
        m
    }

    /// Histogram as reduced fractions of assigned applicants, e.g. `1=2/3 2=1/3`.
    pub fn histogram_text(&self) -> String {
        if self.wish_rank_histogram.is_empty() {
            return "-".into();
        }
        self.wish_rank_histogram
            .iter()
            .map(|(class, &count)| format!("{class}={}", fraction(count, self.assigned_count)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn rows(&self) -> [(&'static str, String); 5] {
        [
            ("random_cells", self.random_cells.to_string()),
            ("tie_exposed_applicants", self.tie_exposed_applicants.to_string()),
            ("assigned_count", self.assigned_count.to_string()),
            ("unassigned_count", self.unassigned_count.to_string()),
            ("wish_rank_histogram", self.histogram_text()),
        ]
    }
}

fn fraction(num: usize, den: usize) -> String {
    let g = num.gcd(&den).max(1);
    format!("{}/{}", num / g, den / g)
}

fn write_ledger(out: &mut String, ledger: &RoundLedger, tag: &str) {
    for round in &ledger.rounds {
        let _ = writeln!(out, "[ROUND {}{tag}]", round.round);
        for (id, entry) in &round.entries {
            let proposal = entry.proposal.as_ref().map_or("-".to_owned(), ToString::to_string);
            let answer = entry.answer.map_or("-", |a| a.token());
            let _ = writeln!(out, "{id}|{proposal}|{answer}");
        }
        for (study, t) in &round.tiebreaks {
            let _ = writeln!(out, "tiebreak|{study}|{}|{}", t.cell, t.size);
        }
    }
    let _ = writeln!(out, "[FINAL{tag}]");
    for (id, held) in &ledger.final_assignment {
        match held {
            Some(h) => {
                let _ = writeln!(out, "{id}|{}|{}", h.study, h.class_index);
            }
            None => {
                let _ = writeln!(out, "{id}|UNASSIGNED");
            }
        }
    }
    let _ = writeln!(out, "[DELAYED_CHOICES{tag}]");
    for (id, options) in &ledger.delayed_choices {
        let names: Vec<&str> = options.iter().map(|s| s.as_str()).collect();
        let _ = writeln!(out, "{id}|{}", names.join("|"));
    }
}

/// Canonical report of one run. Identical runs give identical bytes.
pub fn serialize_report(ledger: &RoundLedger, metrics: &MetricsReport) -> String {
    let mut out = String::from("# apbsim run\n");
    let _ = writeln!(out, "seed: {}", ledger.seed);
    let _ = writeln!(out, "variant: {}", ledger.variant);
    let _ = writeln!(out, "rounds: {}", ledger.num_rounds);
    write_ledger(&mut out, ledger, "");
    out.push_str("[METRICS]\n");
    for (key, value) in metrics.rows() {
        let _ = writeln!(out, "{key}: {value}");
    }
    out
}

/// Per-study tie exposure of the first-round pools, grouped once by
/// (block, relative, absolute) and once with disjunction sizes added.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Refinement {
    pub per_study: BTreeMap<String, (usize, usize)>,
    pub coarse_exposed: usize,
    pub refined_exposed: usize,
    /// Every refined cell lies inside one coarse cell.
    pub cells_nested: bool,
}

impl Refinement {
    pub fn holds(&self) -> bool {
        self.cells_nested && self.refined_exposed <= self.coarse_exposed
    }
}

pub fn serialize_comparison(
    v1: (&RoundLedger, &MetricsReport),
    v2: (&RoundLedger, &MetricsReport),
    refinement: &Refinement,
) -> String {
    let mut out = String::from("# apbsim compare\n");
    let _ = writeln!(out, "seed: {}", v2.0.seed);
    let _ = writeln!(out, "rounds: {}", v2.0.num_rounds);
    out.push_str("[METRICS]\nmetric|v1|v2\n");
    for ((key, a), (_, b)) in v1.1.rows().into_iter().zip(v2.1.rows()) {
        let _ = writeln!(out, "{key}|{a}|{b}");
    }
    out.push_str("[REFINEMENT]\n");
    for (study, (coarse, refined)) in &refinement.per_study {
        let _ = writeln!(out, "{study}|{coarse}|{refined}");
    }
    let _ = writeln!(out, "coarse_tie_exposed: {}", refinement.coarse_exposed);
    let _ = writeln!(out, "refined_tie_exposed: {}", refinement.refined_exposed);
    let _ = writeln!(out, "cells_nested: {}", refinement.cells_nested);
    let _ = writeln!(out, "holds: {}", refinement.holds());
    write_ledger(&mut out, v1.0, " v1");
    write_ledger(&mut out, v2.0, " v2");
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub proposers: &'static str,
    pub stable: Vec<Matching>,
    pub engine: Matching,
    pub member: bool,
    pub proposer_optimal: bool,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.member && self.proposer_optimal
    }
}

pub fn serialize_oracle(report: &OracleReport, seed: u64) -> String {
    let mut out = String::from("# apbsim oracle-check\n");
    let _ = writeln!(out, "seed: {seed}");
    let _ = writeln!(out, "proposers: {}", report.proposers);
    let _ = writeln!(out, "stable_matchings: {}", report.stable.len());
    for m in &report.stable {
        let _ = writeln!(out, "stable|{m}");
    }
    let _ = writeln!(out, "engine|{}", report.engine);
    let _ = writeln!(out, "member: {}", report.member);
    let _ = writeln!(out, "proposer_optimal: {}", report.proposer_optimal);
    out
}
