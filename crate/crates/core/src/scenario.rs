//! Line-oriented scenario format.
//!
//! ```text
//! # comment
//! [CONFIG]
//! seed|7
//! variant|v2
//! foreign_bac_first|false
//! max_disj|24
//! num_rounds|3
//! [FAMILIES]
//! S1|LMD
//! [STUDIES]
//! S1|Univ1|A|limited|1
//! S3|Univ3|A|unlimited|unlimited
//! [APPLICANTS]
//! C1|A|local|S1>S2>S3
//! C2|A|abroad|S1>S3,S2>S3
//! [SELECTIVE_LISTS]
//! S4|C2>C1
//! [POLICIES]
//! C1|scripted|1:yes_but,2:definitely_yes
//! ```
//!
//! Preferences are comma-separated statements. Each statement is a chain of
//! tiers joined by `>`, each tier a set of tokens joined by `=`; `S1=S2>S3`
//! stands for `S1=S2`, `S1>S3` and `S2>S3`. A lone token only adds the study to
//! the applicant's wish list.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::matching::Capacity;
use crate::model::{AdmissionKind, Applicant, BacOrigin, Scenario, ScenarioConfig, ScenarioError, StudyProgram};
use crate::preference::{ObjectId, PreferenceRelation, Statement, Structure};
use crate::ranking::MAX_RANK;
use crate::rounds::{Answer, AnswerPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Config,
    Families,
    Studies,
    Applicants,
    SelectiveLists,
    Policies,
}

impl Section {
    fn from_header(h: &str) -> Option<Section> {
        Some(match h {
            "[CONFIG]" => Section::Config,
            "[FAMILIES]" => Section::Families,
            "[STUDIES]" => Section::Studies,
            "[APPLICANTS]" => Section::Applicants,
            "[SELECTIVE_LISTS]" => Section::SelectiveLists,
            "[POLICIES]" => Section::Policies,
            _ => return None,
        })
    }
}

fn syntax(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Syntax { line, message: message.into() }
}

fn token(line: usize, raw: &str, what: &str) -> Result<ObjectId, ScenarioError> {
    let t = raw.trim();
    if t.is_empty() || t.chars().any(|c| c.is_whitespace() || "|,>=#[]".contains(c)) {
        return Err(syntax(line, format!("invalid {what} `{t}`")));
    }
    Ok(ObjectId::from(t))
}

fn fields(line: usize, text: &str, expected: usize) -> Result<Vec<&str>, ScenarioError> {
    let parts: Vec<&str> = text.split('|').map(str::trim).collect();
    if parts.len() != expected {
        return Err(syntax(line, format!("expected {expected} fields separated by `|`, found {}", parts.len())));
    }
    Ok(parts)
}

/// Parses a preference field into its domain and raw statements.
pub fn parse_preferences(line: usize, text: &str) -> Result<(BTreeSet<ObjectId>, Vec<Statement>), ScenarioError> {
    let mut domain = BTreeSet::new();
    let mut statements = Vec::new();
    if text.trim().is_empty() {
        return Ok((domain, statements));
    }
    for stmt in text.split(',') {
        let tiers: Vec<Vec<ObjectId>> = stmt
            .split('>')
            .map(|tier| tier.split('=').map(|t| token(line, t, "study id")).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        for (i, tier) in tiers.iter().enumerate() {
            domain.extend(tier.iter().cloned());
            for (j, a) in tier.iter().enumerate() {
                for b in &tier[j + 1..] {
                    statements.push(Statement::indifferent(a.clone(), b.clone()));
                }
            }
            for later in &tiers[i + 1..] {
                for a in tier {
                    for b in later {
                        statements.push(Statement::strict(a.clone(), b.clone()));
                    }
                }
            }
        }
    }
    Ok((domain, statements))
}

fn parse_bool(line: usize, v: &str) -> Result<bool, ScenarioError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(syntax(line, format!("expected true or false, found `{v}`"))),
    }
}

fn parse_number<T: std::str::FromStr>(line: usize, v: &str) -> Result<T, ScenarioError> {
    v.parse().map_err(|_| syntax(line, format!("expected a non-negative integer, found `{v}`")))
}

fn parse_policy(line: usize, parts: &[&str]) -> Result<AnswerPolicy, ScenarioError> {
    match parts {
        ["always_definitely_yes"] => Ok(AnswerPolicy::AlwaysDefinitelyYes),
        ["yes_but_until_first_choice"] => Ok(AnswerPolicy::YesButUntilFirstChoice),
        ["scripted", table] => {
            let mut answers = BTreeMap::new();
            for item in table.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (round, answer) =
                    item.split_once(':').ok_or_else(|| syntax(line, format!("expected round:answer, found `{item}`")))?;
                let round: usize = parse_number(line, round.trim())?;
                if round == 0 {
                    return Err(syntax(line, "rounds are numbered from 1"));
                }
                let answer: Answer = answer.trim().parse().map_err(|e: String| syntax(line, e))?;
                if answers.insert(round, answer).is_some() {
                    return Err(syntax(line, format!("round {round} scripted twice")));
                }
            }
            Ok(AnswerPolicy::Scripted(answers))
        }
        _ => Err(syntax(line, format!("unknown policy `{}`", parts.join("|")))),
    }
}

/// Parses and fully validates a scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut section: Option<Section> = None;
    let mut seen_sections = BTreeSet::new();
    let mut config = ScenarioConfig::default();
    let mut seen_keys = BTreeSet::new();
    let mut families: BTreeMap<ObjectId, (usize, String)> = BTreeMap::new();
    let mut studies: Vec<(usize, StudyProgram)> = Vec::new();
    let mut applicants: Vec<(usize, ObjectId, String, BacOrigin, BTreeSet<ObjectId>, Vec<Statement>)> = Vec::new();
    let mut lists: Vec<(usize, ObjectId, Vec<ObjectId>)> = Vec::new();
    let mut policies: Vec<(usize, ObjectId, AnswerPolicy)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        if content.starts_with('[') {
            let s = Section::from_header(content).ok_or_else(|| syntax(line, format!("unknown section `{content}`")))?;
            if !seen_sections.insert(s) {
                return Err(syntax(line, format!("section `{content}` repeated")));
            }
            section = Some(s);
            continue;
        }
        match section {
            None => return Err(syntax(line, "record outside of any section")),
            Some(Section::Config) => {
                let f = fields(line, content, 2)?;
                if !seen_keys.insert(f[0].to_owned()) {
                    return Err(syntax(line, format!("config key `{}` repeated", f[0])));
                }
                match f[0] {
                    "seed" => config.seed = Some(parse_number(line, f[1])?),
                    "variant" => config.variant = f[1].parse().map_err(|e: String| syntax(line, e))?,
                    "foreign_bac_first" => config.foreign_bac_first = parse_bool(line, f[1])?,
                    "max_disj" => {
                        config.max_disj = parse_number(line, f[1])?;
                        if config.max_disj == 0 {
                            return Err(syntax(line, "max_disj must be positive"));
                        }
                    }
                    "num_rounds" => {
                        config.num_rounds = parse_number(line, f[1])?;
                        if config.num_rounds == 0 {
                            return Err(syntax(line, "num_rounds must be positive"));
                        }
                    }
                    other => return Err(syntax(line, format!("unknown config key `{other}`"))),
                }
            }
            Some(Section::Families) => {
                let f = fields(line, content, 2)?;
                let study = token(line, f[0], "study id")?;
                let family = token(line, f[1], "family tag")?;
                if families.insert(study.clone(), (line, family.to_string())).is_some() {
                    return Err(ScenarioError::DuplicateId { line: Some(line), id: study.to_string() });
                }
            }
            Some(Section::Studies) => {
                let f = fields(line, content, 5)?;
                let id = token(line, f[0], "study id")?;
                let kind = match f[3] {
                    "selective" => AdmissionKind::Selective,
                    "limited" => AdmissionKind::Limited,
                    "unlimited" => AdmissionKind::Unlimited,
                    other => return Err(syntax(line, format!("unknown admission kind `{other}`"))),
                };
                let capacity = match (kind, f[4]) {
                    (AdmissionKind::Unlimited, "unlimited") => Capacity::Unlimited,
                    (AdmissionKind::Unlimited, other) => {
                        return Err(syntax(line, format!("unlimited studies take capacity `unlimited`, found `{other}`")))
                    }
                    (_, n) => match parse_number::<usize>(line, n)? {
                        0 => return Err(ScenarioError::BadCapacity { line: Some(line), study: id }),
                        q => Capacity::Limited(q),
                    },
                };
                studies.push((
                    line,
                    StudyProgram {
                        id,
                        institution: token(line, f[1], "institution")?.to_string(),
                        academy: token(line, f[2], "academy")?.to_string(),
                        kind,
                        capacity,
                        exogenous_ranking: None,
                    },
                ));
            }
            Some(Section::Applicants) => {
                let f = fields(line, content, 4)?;
                let id = token(line, f[0], "applicant id")?;
                let academy = token(line, f[1], "academy")?.to_string();
                let bac = match f[2] {
                    "local" => BacOrigin::Local,
                    "abroad" => BacOrigin::Abroad,
                    other => return Err(syntax(line, format!("bac origin must be local or abroad, found `{other}`"))),
                };
                let (domain, statements) = parse_preferences(line, f[3])?;
                applicants.push((line, id, academy, bac, domain, statements));
            }
            Some(Section::SelectiveLists) => {
                let f = fields(line, content, 2)?;
                let study = token(line, f[0], "study id")?;
                let ranking = if f[1].is_empty() {
                    Vec::new()
                } else {
                    f[1].split('>').map(|t| token(line, t, "applicant id")).collect::<Result<Vec<_>, _>>()?
                };
                lists.push((line, study, ranking));
            }
            Some(Section::Policies) => {
                let parts: Vec<&str> = content.split('|').map(str::trim).collect();
                if parts.len() < 2 {
                    return Err(syntax(line, "expected applicant|policy"));
                }
                let id = token(line, parts[0], "applicant id")?;
                policies.push((line, id, parse_policy(line, &parts[1..])?));
            }
        }
    }

    // Cross-references, reported with the line that introduced them.
    let mut study_ids = BTreeSet::new();
    for (line, s) in &studies {
        if !study_ids.insert(s.id.clone()) {
            return Err(ScenarioError::DuplicateId { line: Some(*line), id: s.id.to_string() });
        }
    }
    for (study, (line, _)) in &families {
        if !study_ids.contains(study) {
            return Err(ScenarioError::UnknownId { line: Some(*line), id: study.to_string() });
        }
    }
    let mut built = Vec::with_capacity(applicants.len());
    let mut applicant_ids = BTreeSet::new();
    for (line, id, academy, bac, domain, statements) in applicants {
        if !applicant_ids.insert(id.clone()) {
            return Err(ScenarioError::DuplicateId { line: Some(line), id: id.to_string() });
        }
        if let Some(unknown) = domain.iter().find(|s| !study_ids.contains(*s)) {
            return Err(ScenarioError::UnknownId { line: Some(line), id: unknown.to_string() });
        }
        let relation = PreferenceRelation::build(domain, &statements)
            .map_err(|cause| ScenarioError::RelationInvalid { applicant: id.clone(), cause })?;
        let classes = relation
            .linearize_optimistic()
            .map_err(|cause| ScenarioError::RelationInvalid { applicant: id.clone(), cause })?
            .len();
        if classes > MAX_RANK {
            return Err(ScenarioError::RankOverflow { applicant: id, classes });
        }
        built.push(Applicant { id, academy, bac, relation, policy: None });
    }
    let mut studies: Vec<StudyProgram> = studies.into_iter().map(|(_, s)| s).collect();
    for (line, study, ranking) in lists {
        let target = studies
            .iter_mut()
            .find(|s| s.id == study)
            .ok_or_else(|| ScenarioError::UnknownId { line: Some(line), id: study.to_string() })?;
        if target.kind != AdmissionKind::Selective {
            return Err(ScenarioError::SelectiveList {
                line: Some(line),
                study,
                message: "only selective studies carry an exogenous ranking".into(),
            });
        }
        if target.exogenous_ranking.is_some() {
            return Err(ScenarioError::DuplicateId { line: Some(line), id: study.to_string() });
        }
        let mut seen = BTreeSet::new();
        for a in &ranking {
            if !applicant_ids.contains(a) {
                return Err(ScenarioError::UnknownId { line: Some(line), id: a.to_string() });
            }
            if !seen.insert(a) {
                return Err(ScenarioError::SelectiveList {
                    line: Some(line),
                    study: study.clone(),
                    message: format!("`{a}` listed twice"),
                });
            }
        }
        target.exogenous_ranking = Some(ranking);
    }
    let mut with_policy = BTreeSet::new();
    for (line, id, policy) in policies {
        let target = built
            .iter_mut()
            .find(|a| a.id == id)
            .ok_or_else(|| ScenarioError::UnknownId { line: Some(line), id: id.to_string() })?;
        if !with_policy.insert(id.clone()) {
            return Err(ScenarioError::DuplicateId { line: Some(line), id: id.to_string() });
        }
        target.policy = Some(policy);
    }

    let scenario = Scenario {
        config,
        families: families.into_iter().map(|(k, (_, v))| (k, v)).collect(),
        studies,
        applicants: built,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Writes a relation in the preference-field syntax: a tier chain for total
/// preorders, otherwise every closed statement plus any unmentioned study.
pub fn format_preferences(relation: &PreferenceRelation) -> String {
    if relation.is_empty() {
        return String::new();
    }
    if relation.classify() != Structure::PartialPreorder {
        let partition = relation.ordered_partition().expect("total relations have a partition");
        return partition
            .classes()
            .iter()
            .map(|c| c.iter().map(ObjectId::as_str).collect::<Vec<_>>().join("="))
            .collect::<Vec<_>>()
            .join(">");
    }
    let mut parts = Vec::new();
    let mut mentioned = BTreeSet::new();
    for (a, b) in relation.strict_pairs() {
        parts.push(format!("{a}>{b}"));
        mentioned.extend([a, b]);
    }
    for (a, b) in relation.indifferent_pairs() {
        parts.push(format!("{a}={b}"));
        mentioned.extend([a, b]);
    }
    for id in relation.domain() {
        if !mentioned.contains(id) {
            parts.push(id.to_string());
        }
    }
    parts.join(",")
}

fn format_policy(policy: &AnswerPolicy) -> String {
    match policy {
        AnswerPolicy::AlwaysDefinitelyYes => "always_definitely_yes".into(),
        AnswerPolicy::YesButUntilFirstChoice => "yes_but_until_first_choice".into(),
        AnswerPolicy::Scripted(table) => {
            let items: Vec<String> = table.iter().map(|(r, a)| format!("{r}:{a}")).collect();
            format!("scripted|{}", items.join(","))
        }
    }
}

/// Canonical text of a scenario; [`parse_scenario`] reads it back unchanged.
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    out.push_str("[CONFIG]\n");
    if let Some(seed) = s.config.seed {
        let _ = writeln!(out, "seed|{seed}");
    }
    let _ = writeln!(out, "variant|{}", s.config.variant);
    let _ = writeln!(out, "foreign_bac_first|{}", s.config.foreign_bac_first);
    let _ = writeln!(out, "max_disj|{}", s.config.max_disj);
    let _ = writeln!(out, "num_rounds|{}", s.config.num_rounds);
    out.push_str("[FAMILIES]\n");
    for (study, family) in &s.families {
        let _ = writeln!(out, "{study}|{family}");
    }
    out.push_str("[STUDIES]\n");
    for st in &s.studies {
        let kind = match st.kind {
            AdmissionKind::Selective => "selective",
            AdmissionKind::Limited => "limited",
            AdmissionKind::Unlimited => "unlimited",
        };
        let capacity = match st.capacity {
            Capacity::Limited(q) => q.to_string(),
            Capacity::Unlimited => "unlimited".into(),
        };
        let _ = writeln!(out, "{}|{}|{}|{kind}|{capacity}", st.id, st.institution, st.academy);
    }
    out.push_str("[APPLICANTS]\n");
    for a in &s.applicants {
        let bac = match a.bac {
            BacOrigin::Local => "local",
            BacOrigin::Abroad => "abroad",
        };
        let _ = writeln!(out, "{}|{}|{bac}|{}", a.id, a.academy, format_preferences(&a.relation));
    }
    out.push_str("[SELECTIVE_LISTS]\n");
    for st in &s.studies {
        if let Some(list) = &st.exogenous_ranking {
            let names: Vec<&str> = list.iter().map(ObjectId::as_str).collect();
            let _ = writeln!(out, "{}|{}", st.id, names.join(">"));
        }
    }
    out.push_str("[POLICIES]\n");
    for a in &s.applicants {
        if let Some(p) = &a.policy {
            let _ = writeln!(out, "{}|{}", a.id, format_policy(p));
        }
    }
    out
}
