//! Shipped word lists, templates and value sets.
//!
//! Every resource has a built-in copy compiled from `data/`; a directory with
//! files of the same names can override any subset of them.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entity::{Entity, EntityType};
use crate::error::{DataError, PromptError};

pub const NEWSPAPER_TEMPLATES: &str = "newspaper_templates.txt";
pub const GOVERNMENT_TEMPLATES: &str = "government_templates.tsv";
pub const LOCATIONS: &str = "locations.tsv";
pub const ADJECTIVES: &str = "adjectives.txt";
pub const NOUNS: &str = "nouns.txt";
pub const FIRST_NAMES: &str = "first_names.tsv";
pub const LAST_NAMES: &str = "last_names.txt";
pub const CURATED_VALUES: &str = "curated_values.tsv";
pub const OPEN_ATTRIBUTES: &str = "open_attributes.tsv";
pub const NUMERIC_ATTRIBUTES: &str = "numeric_attributes.txt";
pub const PROMPTED_QUESTIONS: &str = "prompted_questions.txt";
pub const DENYLIST: &str = "denylist.txt";
pub const QUESTION_TEMPLATES: &str = "question_templates.tsv";

pub const SAMPLE_ENTITIES: &str = include_str!("../data/sample_entities.jsonl");
pub const SAMPLE_GENERATIONS: &str = include_str!("../data/sample_generations.jsonl");

fn builtin_text(file: &str) -> &'static str {
    match file {
        NEWSPAPER_TEMPLATES => include_str!("../data/newspaper_templates.txt"),
        GOVERNMENT_TEMPLATES => include_str!("../data/government_templates.tsv"),
        LOCATIONS => include_str!("../data/locations.tsv"),
        ADJECTIVES => include_str!("../data/adjectives.txt"),
        NOUNS => include_str!("../data/nouns.txt"),
        FIRST_NAMES => include_str!("../data/first_names.tsv"),
        LAST_NAMES => include_str!("../data/last_names.txt"),
        CURATED_VALUES => include_str!("../data/curated_values.tsv"),
        OPEN_ATTRIBUTES => include_str!("../data/open_attributes.tsv"),
        NUMERIC_ATTRIBUTES => include_str!("../data/numeric_attributes.txt"),
        PROMPTED_QUESTIONS => include_str!("../data/prompted_questions.txt"),
        DENYLIST => include_str!("../data/denylist.txt"),
        QUESTION_TEMPLATES => include_str!("../data/question_templates.tsv"),
        other => panic!("no built-in resource named {other}"),
    }
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn fields<'a>(file: &str, line: usize, l: &'a str, n: usize) -> Result<Vec<&'a str>, DataError> {
    let parts: Vec<&str> = l.split('\t').map(str::trim).collect();
    if parts.len() != n || parts.iter().any(|p| p.is_empty()) {
        return Err(DataError::Resource {
            file: file.to_string(),
            line,
            reason: format!("expected {n} tab-separated fields"),
        });
    }
    Ok(parts)
}

fn lines(text: &str) -> Vec<String> {
    records(text).map(|(_, l)| l.trim().to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "F")]
    Female,
    #[serde(rename = "M")]
    Male,
}

impl Gender {
    pub fn marker(&self) -> &'static str {
        match self {
            Gender::Female => "F",
            Gender::Male => "M",
        }
    }

    pub fn from_marker(s: &str) -> Option<Self> {
        match s {
            "F" => Some(Gender::Female),
            "M" => Some(Gender::Male),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeGroup {
    Young,
    Middle,
    Old,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 3] = [AgeGroup::Young, AgeGroup::Middle, AgeGroup::Old];

    pub fn range(&self) -> std::ops::RangeInclusive<u8> {
        match self {
            AgeGroup::Young => 18..=25,
            AgeGroup::Middle => 40..=55,
            AgeGroup::Old => 65..=80,
        }
    }

    pub fn of_age(age: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.range().contains(&age))
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            AgeGroup::Young => "young",
            AgeGroup::Middle => "middle",
            AgeGroup::Old => "old",
        }
    }
}

impl std::str::FromStr for AgeGroup {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown age group `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirstName {
    pub name: String,
    pub gender: Gender,
    pub cohort: AgeGroup,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub timeline_id: String,
    pub name: String,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Case-folded title set; a candidate is rejected when its trimmed, lowercased
/// form is present.
#[derive(Debug, Clone, Default)]
pub struct Denylist(HashSet<String>);

impl Denylist {
    pub fn normalize(s: &str) -> String {
        s.trim().to_lowercase()
    }

    pub fn from_titles<I, S>(titles: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(
            titles
                .into_iter()
                .map(|t| Self::normalize(t.as_ref()))
                .filter(|t| !t.is_empty() && !t.starts_with('#'))
                .collect(),
        )
    }

    pub fn parse(text: &str) -> Self {
        Self::from_titles(text.lines())
    }

    pub fn contains(&self, candidate: &str) -> bool {
        self.0.contains(&Self::normalize(candidate))
    }

    pub fn filter(&self, candidates: &[String]) -> Vec<String> {
        candidates.iter().filter(|c| !self.contains(c)).cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Curated value sets for small categorical attributes.
#[derive(Debug, Clone, Default)]
pub struct CuratedValues(BTreeMap<String, Vec<String>>);

impl CuratedValues {
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (line, l) in records(text) {
            let f = fields(CURATED_VALUES, line, l, 2)?;
            let values = map.entry(f[0].to_string()).or_default();
            if !values.iter().any(|v| v.to_lowercase() == f[1].to_lowercase()) {
                values.push(f[1].to_string());
            }
        }
        Ok(Self(map))
    }

    pub fn contains_attribute(&self, attribute: &str) -> bool {
        self.0.contains_key(attribute)
    }

    pub fn values(&self, attribute: &str) -> Option<&[String]> {
        self.0.get(attribute).map(Vec::as_slice)
    }
}

/// What the value classifier needs to know about attribute names.
#[derive(Debug, Clone, Default)]
pub struct AttributeLexicon {
    pub curated: CuratedValues,
    open: BTreeMap<EntityType, BTreeSet<String>>,
    numeric_names: BTreeSet<String>,
}

impl AttributeLexicon {
    pub fn parse(curated: &str, open: &str, numeric: &str) -> Result<Self, DataError> {
        let mut open_map: BTreeMap<EntityType, BTreeSet<String>> = BTreeMap::new();
        for (line, l) in records(open) {
            let f = fields(OPEN_ATTRIBUTES, line, l, 2)?;
            open_map.entry(f[0].parse()?).or_default().insert(f[1].to_string());
        }
        Ok(Self {
            curated: CuratedValues::parse(curated)?,
            open: open_map,
            numeric_names: lines(numeric).into_iter().collect(),
        })
    }

    pub fn builtin() -> Self {
        Self::parse(
            builtin_text(CURATED_VALUES),
            builtin_text(OPEN_ATTRIBUTES),
            builtin_text(NUMERIC_ATTRIBUTES),
        )
        .expect("built-in attribute lexicon is well formed")
    }

    pub fn is_open_attribute(&self, entity_type: EntityType, attribute: &str) -> bool {
        self.open.get(&entity_type).is_some_and(|s| s.contains(attribute))
    }

    pub fn is_numeric_attribute(&self, attribute: &str) -> bool {
        self.numeric_names.contains(attribute)
    }

    pub fn is_year_attribute(&self, attribute: &str) -> bool {
        attribute.contains("year") || attribute == "founded"
    }
}

/// Question templates keyed by (entity type, attribute), each with one `{NAME}` slot.
#[derive(Debug, Clone, Default)]
pub struct QuestionTemplates(BTreeMap<(EntityType, String), String>);

impl QuestionTemplates {
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut map = BTreeMap::new();
        for (line, l) in records(text) {
            let f = fields(QUESTION_TEMPLATES, line, l, 3)?;
            if f[2].matches("{NAME}").count() != 1 {
                return Err(DataError::Resource {
                    file: QUESTION_TEMPLATES.into(),
                    line,
                    reason: "template needs exactly one {NAME}".into(),
                });
            }
            map.insert((f[0].parse()?, f[1].to_string()), f[2].to_string());
        }
        Ok(Self(map))
    }

    pub fn insert(&mut self, entity_type: EntityType, attribute: &str, template: &str) {
        self.0.insert((entity_type, attribute.to_string()), template.to_string());
    }

    pub fn template(&self, entity_type: EntityType, attribute: &str) -> Option<&str> {
        self.0.get(&(entity_type, attribute.to_string())).map(String::as_str)
    }

    pub fn question(&self, entity: &Entity, attribute: &str) -> Result<String, PromptError> {
        self.template(entity.entity_type, attribute)
            .map(|t| t.replace("{NAME}", entity.name()))
            .ok_or_else(|| PromptError::MissingQuestion {
                entity_type: entity.entity_type,
                attribute: attribute.to_string(),
            })
    }
}

/// All resources used for data, source and prompt generation.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub newspaper_templates: Vec<String>,
    pub government_templates: BTreeMap<EntityType, Vec<String>>,
    pub locations: Vec<Location>,
    pub adjectives: Vec<String>,
    pub nouns: Vec<String>,
    pub first_names: Vec<FirstName>,
    pub last_names: Vec<String>,
    pub attributes: AttributeLexicon,
    pub prompted_questions: Vec<String>,
    pub denylist: Denylist,
    pub questions: QuestionTemplates,
}

impl Lexicon {
    pub fn builtin() -> Self {
        Self::build(|f| Ok(builtin_text(f).to_string())).expect("built-in lexicon is well formed")
    }

    /// Loads resources from `dir`, falling back to the built-in copy for any
    /// file that is absent.
    pub fn load_dir(dir: &Path) -> Result<Self, DataError> {
        Self::build(|f| {
            let p = dir.join(f);
            if p.exists() {
                Ok(std::fs::read_to_string(p)?)
            } else {
                Ok(builtin_text(f).to_string())
            }
        })
    }

    fn build(read: impl Fn(&str) -> Result<String, DataError>) -> Result<Self, DataError> {
        let mut government_templates: BTreeMap<EntityType, Vec<String>> = BTreeMap::new();
        for (line, l) in records(&read(GOVERNMENT_TEMPLATES)?) {
            let f = fields(GOVERNMENT_TEMPLATES, line, l, 2)?;
            government_templates.entry(f[0].parse()?).or_default().push(f[1].to_string());
        }
        let mut locations = Vec::new();
        for (line, l) in records(&read(LOCATIONS)?) {
            let f = fields(LOCATIONS, line, l, 2)?;
            locations.push(Location { timeline_id: f[0].into(), name: f[1].into() });
        }
        let mut first_names = Vec::new();
        for (line, l) in records(&read(FIRST_NAMES)?) {
            let f = fields(FIRST_NAMES, line, l, 3)?;
            let bad = |reason: &str| DataError::Resource {
                file: FIRST_NAMES.into(),
                line,
                reason: reason.into(),
            };
            first_names.push(FirstName {
                name: f[0].into(),
                gender: Gender::from_marker(f[1]).ok_or_else(|| bad("gender must be F or M"))?,
                cohort: f[2].parse().map_err(|e: String| bad(&e))?,
            });
        }
        Ok(Self {
            newspaper_templates: lines(&read(NEWSPAPER_TEMPLATES)?),
            government_templates,
            locations,
            adjectives: lines(&read(ADJECTIVES)?),
            nouns: lines(&read(NOUNS)?),
            first_names,
            last_names: lines(&read(LAST_NAMES)?),
            attributes: AttributeLexicon::parse(
                &read(CURATED_VALUES)?,
                &read(OPEN_ATTRIBUTES)?,
                &read(NUMERIC_ATTRIBUTES)?,
            )?,
            prompted_questions: lines(&read(PROMPTED_QUESTIONS)?),
            denylist: Denylist::parse(&read(DENYLIST)?),
            questions: QuestionTemplates::parse(&read(QUESTION_TEMPLATES)?)?,
        })
    }

    pub fn first_names_where(&self, gender: Gender, cohort: Option<AgeGroup>) -> Vec<&FirstName> {
        self.first_names
            .iter()
            .filter(|f| f.gender == gender && cohort.is_none_or(|c| f.cohort == c))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_resources_load() {
        let lx = Lexicon::builtin();
        assert_eq!(lx.newspaper_templates.len(), 59);
        assert!(lx.newspaper_templates.iter().all(|t| t.matches("{LOC}").count() == 1));
        for t in EntityType::ALL {
            assert!(!lx.government_templates[&t].is_empty(), "{t} has no government template");
        }
        assert_eq!(lx.prompted_questions.len(), 20);
        let f = lx.first_names_where(Gender::Female, None).len();
        let m = lx.first_names_where(Gender::Male, None).len();
        assert_eq!(f, m);
        assert!(lx.denylist.contains("  natalie KENNEDY "));
    }

    #[test]
    fn denylist_filtering() {
        let empty = Denylist::default();
        let c = vec!["Natalie Kennedy".to_string(), "Evan Mason".to_string()];
        assert_eq!(empty.filter(&c), c);
        let d = Denylist::from_titles(["natalie kennedy"]);
        assert_eq!(d.filter(&c), vec!["Evan Mason".to_string()]);
        let all = Denylist::from_titles(["Natalie Kennedy", "EVAN MASON"]);
        assert!(all.filter(&c).is_empty());
    }

    #[test]
    fn curated_duplicates_collapse() {
        let c = CuratedValues::parse("price\tFree\nprice\tfree\nprice\tOn request\n").unwrap();
        assert_eq!(c.values("price").unwrap().len(), 2);
    }

    #[test]
    fn malformed_rows_report_line() {
        let err = QuestionTemplates::parse("# h\nperson\tname\n").unwrap_err();
        assert!(matches!(err, DataError::Resource { line: 2, .. }));
    }

    #[test]
    fn overrides_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(DENYLIST), "Evan Mason\n").unwrap();
        let lx = Lexicon::load_dir(dir.path()).unwrap();
        assert!(lx.denylist.contains("evan mason"));
        assert!(!lx.denylist.contains("natalie kennedy"));
        assert_eq!(lx.newspaper_templates.len(), 59);
    }
}
