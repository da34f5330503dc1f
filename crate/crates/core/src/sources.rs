//! Synthetic source identities and their display decorations.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::LazyLock;

use rand::seq::IndexedRandom;
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::conflict::ConflictPair;
use crate::entity::{AttributeValue, Entity, EntityType};
use crate::error::SourceError;
use crate::lexicon::{AgeGroup, Denylist, FirstName, Gender, Lexicon, Location};
use crate::rng::StreamRng;

type Result<T> = std::result::Result<T, SourceError>;

pub const NO_SOURCE: &str = "No source available";
pub const USER_ROLE: &str = "User";
pub const AI_ROLE: &str = "AI Assistant";
/// Normalized edit distance at or below which an entity value counts as a
/// known location.
pub const DEFAULT_LOCATION_MATCH: f64 = 0.2;
pub const MAX_AGE_GAP: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceType {
    Government,
    Newspaper,
    SocialMedia,
    Person,
    None,
    UserRole,
    AiRole,
}

impl SourceType {
    /// The four attributed types compared against each other.
    pub const INTER: [SourceType; 4] =
        [SourceType::Government, SourceType::Newspaper, SourceType::Person, SourceType::SocialMedia];

    pub fn as_str(&self) -> &'static str {
        match self {
            SourceType::Government => "government",
            SourceType::Newspaper => "newspaper",
            SourceType::SocialMedia => "social_media",
            SourceType::Person => "person",
            SourceType::None => "none",
            SourceType::UserRole => "user_role",
            SourceType::AiRole => "ai_role",
        }
    }

    /// Human-readable type name used in recognizability probes.
    pub fn description(&self) -> &'static str {
        match self {
            SourceType::Government => "Government agency",
            SourceType::Newspaper => "Newspaper",
            SourceType::SocialMedia => "Social media user",
            SourceType::Person => "Individual person",
            SourceType::None => "No source",
            SourceType::UserRole => "User",
            SourceType::AiRole => "AI assistant",
        }
    }
}

impl fmt::Display for SourceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SourceType {
    type Err = SourceError;
    fn from_str(s: &str) -> Result<Self> {
        [
            SourceType::Government,
            SourceType::Newspaper,
            SourceType::SocialMedia,
            SourceType::Person,
            SourceType::None,
            SourceType::UserRole,
            SourceType::AiRole,
        ]
        .into_iter()
        .find(|t| t.as_str() == s)
        .ok_or_else(|| SourceError::ConfigError(format!("unknown source type `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PopularityKind {
    Circulation,
    Followers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Low,
    High,
}

impl Band {
    pub fn range(&self, kind: PopularityKind) -> std::ops::RangeInclusive<u64> {
        match (kind, self) {
            (PopularityKind::Circulation, Band::Low) => 100..=5_000,
            (PopularityKind::Circulation, Band::High) => 25_000..=600_000,
            (PopularityKind::Followers, Band::Low) => 1..=99,
            (PopularityKind::Followers, Band::High) => 1_000..=999_999,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Popularity {
    pub kind: PopularityKind,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Regional,
    NonRegional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Title {
    Dr,
    Prof,
    PhD,
    Mr,
    Mrs,
    Ms,
}

impl Title {
    pub const ACADEMIC: [Title; 3] = [Title::Dr, Title::Prof, Title::PhD];

    pub fn is_academic(&self) -> bool {
        Self::ACADEMIC.contains(self)
    }

    pub fn courtesy_for(gender: Gender) -> &'static [Title] {
        match gender {
            Gender::Male => &[Title::Mr],
            Gender::Female => &[Title::Mrs, Title::Ms],
        }
    }

    fn prefix(&self) -> Option<&'static str> {
        match self {
            Title::Dr => Some("Dr."),
            Title::Prof => Some("Prof."),
            Title::Mr => Some("Mr."),
            Title::Mrs => Some("Mrs."),
            Title::Ms => Some("Ms."),
            Title::PhD => None,
        }
    }

    fn from_prefix(s: &str) -> Option<Self> {
        [Title::Dr, Title::Prof, Title::Mr, Title::Mrs, Title::Ms]
            .into_iter()
            .find(|t| t.prefix() == Some(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsernameStyle {
    Internet,
    Underscore,
    Camel,
}

/// Decorations that are rendered into the display string. Everything here is
/// recoverable from the display by [`parse_display`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSet {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub popularity: Option<Popularity>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gender: Option<Gender>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub age: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub title: Option<Title>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub username_style: Option<UsernameStyle>,
}

/// How a source was assembled; not rendered. Used for vocabulary-split checks
/// and for the contrasts that depend on hidden attributes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub template: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub location: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub region: Option<Region>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub first_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub last_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gender: Option<Gender>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub adjective: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noun: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub digits: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceSpec {
    pub source_type: SourceType,
    /// Undecorated identity, e.g. `@GrantedMortal7505` or `Evan Mason`.
    pub name: String,
    #[serde(default)]
    pub features: FeatureSet,
    #[serde(default)]
    pub provenance: Provenance,
    display: String,
}

impl SourceSpec {
    pub fn new(source_type: SourceType, name: impl Into<String>, features: FeatureSet, provenance: Provenance) -> Self {
        let name = name.into();
        let display = decorate(source_type, &name, &features);
        Self { source_type, name, features, provenance, display }
    }

    /// A source shown exactly as given, with no decorations or provenance.
    pub fn verbatim(source_type: SourceType, display: impl Into<String>) -> Self {
        let display = display.into();
        Self {
            source_type,
            name: display.clone(),
            features: FeatureSet::default(),
            provenance: Provenance::default(),
            display,
        }
    }

    pub fn none() -> Self {
        Self::verbatim(SourceType::None, NO_SOURCE)
    }

    pub fn user_role() -> Self {
        Self::verbatim(SourceType::UserRole, USER_ROLE)
    }

    pub fn ai_role() -> Self {
        Self::verbatim(SourceType::AiRole, AI_ROLE)
    }

    pub fn display(&self) -> &str {
        &self.display
    }

    /// Text used in prompts. Social media handles are introduced as users.
    pub fn label(&self) -> String {
        match self.source_type {
            SourceType::SocialMedia => format!("User {}", self.display),
            _ => self.display.clone(),
        }
    }

    pub fn is_none(&self) -> bool {
        self.source_type == SourceType::None
    }

    fn with_features(&self, features: FeatureSet) -> Self {
        Self::new(self.source_type, self.name.clone(), features, self.provenance.clone())
    }
}

fn decorate(source_type: SourceType, name: &str, f: &FeatureSet) -> String {
    let mut out = String::new();
    if let Some(p) = f.title.and_then(|t| t.prefix()) {
        out.push_str(p);
        out.push(' ');
    }
    out.push_str(name);
    if f.title == Some(Title::PhD) {
        out.push_str(", PhD");
    }
    if let Some(g) = f.gender {
        out.push_str(&format!(" ({})", g.marker()));
    }
    if let Some(a) = f.age {
        out.push_str(&format!(", aged {a}"));
    }
    if let Some(p) = f.popularity {
        match p.kind {
            PopularityKind::Circulation => out.push_str(&format!(" (circulation: {})", p.count)),
            PopularityKind::Followers => out.push_str(&format!(" ({} followers)", p.count)),
        }
    }
    let _ = source_type;
    out
}

fn fill(template: &str, location: &str) -> Result<String> {
    if template.matches("{LOC}").count() != 1 {
        return Err(SourceError::TemplateError(format!("`{template}` needs exactly one {{LOC}}")));
    }
    let out = template.replace("{LOC}", location);
    if out.contains('{') || out.contains('}') {
        return Err(SourceError::TemplateError(format!("`{template}` has stray braces")));
    }
    Ok(out)
}

pub fn make_newspaper(template: &str, location: &str) -> Result<SourceSpec> {
    let name = fill(template, location)?;
    Ok(SourceSpec::new(
        SourceType::Newspaper,
        name,
        FeatureSet::default(),
        Provenance { template: Some(template.into()), location: Some(location.into()), ..Default::default() },
    ))
}

pub fn make_government(lexicon: &Lexicon, entity_type: EntityType, template: &str, location: &str) -> Result<SourceSpec> {
    let registered = lexicon
        .government_templates
        .get(&entity_type)
        .is_some_and(|ts| ts.iter().any(|t| t == template));
    if !registered {
        return Err(SourceError::TemplateError(format!("`{template}` is not registered for {entity_type}")));
    }
    let name = fill(template, location)?;
    Ok(SourceSpec::new(
        SourceType::Government,
        name,
        FeatureSet::default(),
        Provenance { template: Some(template.into()), location: Some(location.into()), ..Default::default() },
    ))
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c.flat_map(char::to_lowercase)).collect(),
        None => String::new(),
    }
}

/// Builds `@<Adjective><Noun><dddd>` from explicit parts.
pub fn username_from_parts(adjective: &str, noun: &str, digits: &str) -> SourceSpec {
    SourceSpec::new(
        SourceType::SocialMedia,
        format!("@{}{}{digits}", capitalize(adjective), capitalize(noun)),
        FeatureSet { username_style: Some(UsernameStyle::Internet), ..Default::default() },
        Provenance {
            adjective: Some(adjective.into()),
            noun: Some(noun.into()),
            digits: Some(digits.into()),
            ..Default::default()
        },
    )
}

pub fn random_digits(rng: &mut StreamRng) -> String {
    format!("{:04}", rng.random_range(0..10_000u32))
}

pub fn make_username(rng: &mut StreamRng, adjectives: &[String], nouns: &[String]) -> Result<SourceSpec> {
    let adj = adjectives.choose(rng).ok_or_else(|| SourceError::ConfigError("no adjectives".into()))?;
    let noun = nouns.choose(rng).ok_or_else(|| SourceError::ConfigError("no nouns".into()))?;
    Ok(username_from_parts(adj, noun, &random_digits(rng)))
}

pub fn make_traditional_username(first: &str, last: &str, style: UsernameStyle) -> Result<SourceSpec> {
    if first.trim().is_empty() || last.trim().is_empty() {
        return Err(SourceError::ConfigError("empty name".into()));
    }
    let name = match style {
        UsernameStyle::Underscore => format!("@{first}_{last}"),
        UsernameStyle::Camel => format!("@{first}{last}"),
        UsernameStyle::Internet => {
            return Err(SourceError::FeatureError("traditional usernames are underscore or camel".into()))
        }
    };
    Ok(SourceSpec::new(
        SourceType::SocialMedia,
        name,
        FeatureSet { username_style: Some(style), ..Default::default() },
        Provenance { first_name: Some(first.into()), last_name: Some(last.into()), ..Default::default() },
    ))
}

pub const MAX_NAME_DRAWS: usize = 1000;

/// Draws a gender uniformly, then a first name of that gender and a last name,
/// rejecting denylisted combinations.
pub fn make_person(
    rng: &mut StreamRng,
    first_names: &[&FirstName],
    last_names: &[String],
    denylist: &Denylist,
) -> Result<SourceSpec> {
    let female: Vec<&FirstName> = first_names.iter().copied().filter(|f| f.gender == Gender::Female).collect();
    let male: Vec<&FirstName> = first_names.iter().copied().filter(|f| f.gender == Gender::Male).collect();
    if last_names.is_empty() {
        return Err(SourceError::ConfigError("last-name pool is empty".into()));
    }
    let pools: Vec<&Vec<&FirstName>> = [&female, &male].into_iter().filter(|p| !p.is_empty()).collect();
    if pools.is_empty() {
        return Err(SourceError::ConfigError("first-name pool is empty".into()));
    }
    for _ in 0..MAX_NAME_DRAWS {
        let pool = pools[rng.random_range(0..pools.len())];
        let first = pool.choose(rng).expect("non-empty pool");
        let last = last_names.choose(rng).expect("non-empty pool");
        let name = format!("{} {last}", first.name);
        if denylist.contains(&name) {
            continue;
        }
        return Ok(SourceSpec::new(
            SourceType::Person,
            name,
            FeatureSet::default(),
            Provenance {
                first_name: Some(first.name.clone()),
                last_name: Some(last.clone()),
                gender: Some(first.gender),
                ..Default::default()
            },
        ));
    }
    Err(SourceError::ConfigError("every drawn name was denylisted".into()))
}

pub fn augment_popularity(source: &SourceSpec, band: Band, rng: &mut StreamRng) -> Result<SourceSpec> {
    let kind = match source.source_type {
        SourceType::Newspaper => PopularityKind::Circulation,
        SourceType::SocialMedia => PopularityKind::Followers,
        t => return Err(SourceError::FeatureError(format!("{t} sources carry no popularity"))),
    };
    let count = rng.random_range(band.range(kind));
    Ok(source.with_features(FeatureSet { popularity: Some(Popularity { kind, count }), ..source.features.clone() }))
}

pub fn augment_person_features(
    source: &SourceSpec,
    gender_marker: bool,
    age: Option<u8>,
    title: Option<Title>,
) -> Result<SourceSpec> {
    if source.source_type != SourceType::Person {
        return Err(SourceError::FeatureError("only person sources take person features".into()));
    }
    if let Some(a) = age {
        if AgeGroup::of_age(a).is_none() {
            return Err(SourceError::FeatureError(format!("age {a} is outside every age group")));
        }
    }
    let gender = if gender_marker {
        Some(source.provenance.gender.ok_or_else(|| SourceError::FeatureError("person has no recorded gender".into()))?)
    } else {
        None
    };
    Ok(source.with_features(FeatureSet { gender, age, title, ..source.features.clone() }))
}

static PERSON_DISPLAY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:(?P<title>Dr\.|Prof\.|Mr\.|Mrs\.|Ms\.) )?(?P<name>.+?)(?P<phd>, PhD)?(?: \((?P<g>[FM])\))?(?:, aged (?P<age>\d+))?$")
        .expect("valid regex")
});
static CIRCULATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?P<name>.+) \(circulation: (?P<n>\d+)\)$").expect("valid regex"));
static FOLLOWERS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?P<name>@\S+) \((?P<n>\d+) followers\)$").expect("valid regex"));
static INTERNET_HANDLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^@[A-Z][a-z]+[A-Z][a-z]+\d{4}$").expect("valid regex"));

pub fn username_style_of(handle: &str) -> Option<UsernameStyle> {
    let body = handle.strip_prefix('@')?;
    if INTERNET_HANDLE.is_match(handle) {
        Some(UsernameStyle::Internet)
    } else if body.contains('_') {
        Some(UsernameStyle::Underscore)
    } else if body.chars().all(char::is_alphabetic) {
        Some(UsernameStyle::Camel)
    } else {
        None
    }
}

/// Reference parser: splits a display string back into the undecorated name
/// and the rendered features.
pub fn parse_display(source_type: SourceType, display: &str) -> Result<(String, FeatureSet)> {
    let unparseable = || SourceError::Unparseable(display.to_string());
    match source_type {
        SourceType::Newspaper => Ok(match CIRCULATION.captures(display) {
            Some(c) => (
                c["name"].to_string(),
                FeatureSet {
                    popularity: Some(Popularity {
                        kind: PopularityKind::Circulation,
                        count: c["n"].parse().map_err(|_| unparseable())?,
                    }),
                    ..Default::default()
                },
            ),
            None => (display.to_string(), FeatureSet::default()),
        }),
        SourceType::SocialMedia => {
            let (name, popularity) = match FOLLOWERS.captures(display) {
                Some(c) => (
                    c["name"].to_string(),
                    Some(Popularity {
                        kind: PopularityKind::Followers,
                        count: c["n"].parse().map_err(|_| unparseable())?,
                    }),
                ),
                None => (display.to_string(), None),
            };
            let style = username_style_of(&name).ok_or_else(unparseable)?;
            Ok((name, FeatureSet { popularity, username_style: Some(style), ..Default::default() }))
        }
        SourceType::Person => {
            let c = PERSON_DISPLAY.captures(display).ok_or_else(unparseable)?;
            let title = match (c.name("title"), c.name("phd")) {
                (Some(_), Some(_)) => return Err(unparseable()),
                (Some(t), None) => Title::from_prefix(t.as_str()),
                (None, Some(_)) => Some(Title::PhD),
                (None, None) => None,
            };
            Ok((
                c["name"].to_string(),
                FeatureSet {
                    title,
                    gender: c.name("g").and_then(|g| Gender::from_marker(g.as_str())),
                    age: c.name("age").map(|a| a.as_str().parse()).transpose().map_err(|_| unparseable())?,
                    ..Default::default()
                },
            ))
        }
        _ => Ok((display.to_string(), FeatureSet::default())),
    }
}

/// Training-reserved vocabulary for the mitigation split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReservedVocab {
    pub government_templates: BTreeSet<String>,
    pub locations: BTreeSet<String>,
    pub adjectives: BTreeSet<String>,
    pub nouns: BTreeSet<String>,
    pub digits: BTreeSet<String>,
}

/// Reserved fractions as (reserved, total) in the reference split.
pub const RESERVED_GOV_TEMPLATES: (usize, usize) = (86, 131);
pub const RESERVED_LOCATIONS: (usize, usize) = (43, 268);
pub const RESERVED_ADJECTIVES: (usize, usize) = (170, 768);
pub const RESERVED_NOUNS: (usize, usize) = (172, 1000);
pub const RESERVED_DIGITS: usize = 198;

fn reserve_count(len: usize, (num, den): (usize, usize)) -> usize {
    if len < 2 {
        return 0;
    }
    ((len * num + den / 2) / den).clamp(1, len - 1)
}

fn reserve<'a>(items: impl IntoIterator<Item = &'a String>, ratio: (usize, usize), rng: &mut StreamRng) -> BTreeSet<String> {
    let mut pool: Vec<&String> = items.into_iter().collect();
    pool.sort();
    pool.dedup();
    let k = reserve_count(pool.len(), ratio);
    pool.choose_multiple(rng, k).map(|s| (*s).clone()).collect()
}

impl ReservedVocab {
    /// Reserves the reference fractions of each list. Government templates are
    /// split per entity type so both sides cover every type.
    pub fn split(lexicon: &Lexicon, rng: &mut StreamRng) -> Self {
        let mut government_templates = BTreeSet::new();
        for templates in lexicon.government_templates.values() {
            government_templates.extend(reserve(templates, RESERVED_GOV_TEMPLATES, rng));
        }
        let location_names: Vec<String> = lexicon.locations.iter().map(|l| l.name.clone()).collect();
        let mut digits = BTreeSet::new();
        while digits.len() < RESERVED_DIGITS {
            digits.insert(random_digits(rng));
        }
        Self {
            government_templates,
            locations: reserve(&location_names, RESERVED_LOCATIONS, rng),
            adjectives: reserve(&lexicon.adjectives, RESERVED_ADJECTIVES, rng),
            nouns: reserve(&lexicon.nouns, RESERVED_NOUNS, rng),
            digits,
        }
    }

    /// `kind<TAB>value` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# kind\tvalue\n");
        for (kind, set) in self.sections() {
            for v in set {
                out.push_str(&format!("{kind}\t{v}\n"));
            }
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
            let (kind, value) = line
                .split_once('\t')
                .ok_or_else(|| SourceError::ConfigError(format!("bad reserved-vocabulary line `{line}`")))?;
            let set = match kind {
                "government_template" => &mut out.government_templates,
                "location" => &mut out.locations,
                "adjective" => &mut out.adjectives,
                "noun" => &mut out.nouns,
                "digits" => &mut out.digits,
                other => return Err(SourceError::ConfigError(format!("unknown reserved kind `{other}`"))),
            };
            set.insert(value.to_string());
        }
        Ok(out)
    }

    fn sections(&self) -> [(&'static str, &BTreeSet<String>); 5] {
        [
            ("government_template", &self.government_templates),
            ("location", &self.locations),
            ("adjective", &self.adjectives),
            ("noun", &self.nouns),
            ("digits", &self.digits),
        ]
    }

    /// Reserved items a source uses. Only government and social media
    /// sources are subject to the split.
    pub fn reserved_items(&self, s: &SourceSpec) -> Vec<String> {
        let p = &s.provenance;
        let check = |v: &Option<String>, set: &BTreeSet<String>| v.as_ref().filter(|x| set.contains(*x)).cloned();
        let found = match s.source_type {
            SourceType::Government => {
                vec![check(&p.template, &self.government_templates), check(&p.location, &self.locations)]
            }
            SourceType::SocialMedia => vec![
                check(&p.adjective, &self.adjectives),
                check(&p.noun, &self.nouns),
                check(&p.digits, &self.digits),
            ],
            _ => vec![],
        };
        found.into_iter().flatten().collect()
    }

    /// True when a government or social media source is built only from
    /// reserved parts.
    pub fn is_fully_reserved(&self, s: &SourceSpec) -> bool {
        let p = &s.provenance;
        let has = |v: &Option<String>, set: &BTreeSet<String>| v.as_ref().is_some_and(|x| set.contains(x));
        match s.source_type {
            SourceType::Government => has(&p.template, &self.government_templates) && has(&p.location, &self.locations),
            SourceType::SocialMedia => {
                has(&p.adjective, &self.adjectives) && has(&p.noun, &self.nouns) && has(&p.digits, &self.digits)
            }
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum VocabSide<'a> {
    Unrestricted,
    Train(&'a ReservedVocab),
    Test(&'a ReservedVocab),
}

/// Checks the split over every emitted source: training government and social
/// media sources use only reserved parts, test sources use none, and no
/// template, location or handle appears on both sides.
pub fn check_split(reserved: &ReservedVocab, train: &[&SourceSpec], test: &[&SourceSpec]) -> Result<()> {
    for s in train {
        if !reserved.is_fully_reserved(s) {
            return Err(SourceError::SplitViolation(format!("training source `{}` uses test vocabulary", s.display())));
        }
    }
    for s in test {
        let hits = reserved.reserved_items(s);
        if !hits.is_empty() {
            return Err(SourceError::SplitViolation(format!(
                "test source `{}` uses reserved {}",
                s.display(),
                hits.join(", ")
            )));
        }
    }
    let side = |sources: &[&SourceSpec]| -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for s in sources {
            let p = &s.provenance;
            match s.source_type {
                SourceType::Government => {
                    out.extend(p.template.iter().map(|t| format!("template:{t}")));
                    out.extend(p.location.iter().map(|l| format!("location:{l}")));
                }
                SourceType::SocialMedia => {
                    out.insert(format!("handle:{}", s.name));
                }
                _ => {}
            }
        }
        out
    };
    let shared: Vec<String> = side(train).intersection(&side(test)).cloned().collect();
    if let Some(first) = shared.first() {
        return Err(SourceError::SplitViolation(format!("{} shared items, e.g. {first}", shared.len())));
    }
    Ok(())
}

/// Draws sources of any type, honoring a vocabulary side.
pub struct SourceSampler<'a> {
    pub lexicon: &'a Lexicon,
    pub side: VocabSide<'a>,
}

impl<'a> SourceSampler<'a> {
    pub fn new(lexicon: &'a Lexicon) -> Self {
        Self { lexicon, side: VocabSide::Unrestricted }
    }

    pub fn with_side(lexicon: &'a Lexicon, side: VocabSide<'a>) -> Self {
        Self { lexicon, side }
    }

    fn allowed<'s>(&self, items: &'s [String], pick: impl Fn(&ReservedVocab) -> &BTreeSet<String>) -> Vec<&'s String> {
        match self.side {
            VocabSide::Unrestricted => items.iter().collect(),
            VocabSide::Train(r) => items.iter().filter(|i| pick(r).contains(*i)).collect(),
            VocabSide::Test(r) => items.iter().filter(|i| !pick(r).contains(*i)).collect(),
        }
    }

    fn pick<'s>(&self, items: &[&'s String], what: &str, rng: &mut StreamRng) -> Result<&'s String> {
        items
            .choose(rng)
            .copied()
            .ok_or_else(|| SourceError::ConfigError(format!("no {what} available on this vocabulary side")))
    }

    pub fn location_names(&self) -> Vec<String> {
        self.lexicon.locations.iter().map(|l| l.name.clone()).collect()
    }

    pub fn government(&self, entity_type: EntityType, rng: &mut StreamRng) -> Result<SourceSpec> {
        let templates = self
            .lexicon
            .government_templates
            .get(&entity_type)
            .ok_or_else(|| SourceError::TemplateError(format!("no government template for {entity_type}")))?;
        let templates = self.allowed(templates, |r| &r.government_templates);
        let template = self.pick(&templates, "government template", rng)?;
        let names = self.location_names();
        let locations = self.allowed(&names, |r| &r.locations);
        let location = self.pick(&locations, "location", rng)?;
        make_government(self.lexicon, entity_type, template, location)
    }

    pub fn newspaper(&self, rng: &mut StreamRng) -> Result<SourceSpec> {
        let template = self
            .lexicon
            .newspaper_templates
            .choose(rng)
            .ok_or_else(|| SourceError::ConfigError("no newspaper templates".into()))?;
        let location = self
            .lexicon
            .locations
            .choose(rng)
            .ok_or_else(|| SourceError::ConfigError("no locations".into()))?;
        make_newspaper(template, &location.name)
    }

    pub fn newspaper_at(&self, location: &str, rng: &mut StreamRng) -> Result<SourceSpec> {
        let template = self
            .lexicon
            .newspaper_templates
            .choose(rng)
            .ok_or_else(|| SourceError::ConfigError("no newspaper templates".into()))?;
        make_newspaper(template, location)
    }

    pub fn social_media(&self, rng: &mut StreamRng) -> Result<SourceSpec> {
        let adjectives = self.allowed(&self.lexicon.adjectives, |r| &r.adjectives);
        let nouns = self.allowed(&self.lexicon.nouns, |r| &r.nouns);
        let adj = self.pick(&adjectives, "adjective", rng)?;
        let noun = self.pick(&nouns, "noun", rng)?;
        let digits = match self.side {
            VocabSide::Train(r) => {
                let codes: Vec<&String> = r.digits.iter().collect();
                self.pick(&codes, "digit code", rng)?.clone()
            }
            VocabSide::Test(r) => loop {
                let d = random_digits(rng);
                if !r.digits.contains(&d) {
                    break d;
                }
            },
            VocabSide::Unrestricted => random_digits(rng),
        };
        Ok(username_from_parts(adj, noun, &digits))
    }

    pub fn person(&self, rng: &mut StreamRng) -> Result<SourceSpec> {
        let firsts: Vec<&FirstName> = self.lexicon.first_names.iter().collect();
        make_person(rng, &firsts, &self.lexicon.last_names, &self.lexicon.denylist)
    }

    /// A person of a given gender whose first name comes from `cohort`.
    pub fn person_of(&self, gender: Gender, cohort: AgeGroup, rng: &mut StreamRng) -> Result<SourceSpec> {
        let firsts = self.lexicon.first_names_where(gender, Some(cohort));
        make_person(rng, &firsts, &self.lexicon.last_names, &self.lexicon.denylist)
    }

    pub fn sample(&self, source_type: SourceType, entity_type: EntityType, rng: &mut StreamRng) -> Result<SourceSpec> {
        match source_type {
            SourceType::Government => self.government(entity_type, rng),
            SourceType::Newspaper => self.newspaper(rng),
            SourceType::SocialMedia => self.social_media(rng),
            SourceType::Person => self.person(rng),
            SourceType::None => Ok(SourceSpec::none()),
            SourceType::UserRole => Ok(SourceSpec::user_role()),
            SourceType::AiRole => Ok(SourceSpec::ai_role()),
        }
    }

    /// Draws two sources, redrawing the second until its display differs from the first.
    pub fn sample_distinct(
        &self,
        x: SourceType,
        y: SourceType,
        entity_type: EntityType,
        rng: &mut StreamRng,
    ) -> Result<(SourceSpec, SourceSpec)> {
        let a = self.sample(x, entity_type, rng)?;
        for _ in 0..MAX_NAME_DRAWS {
            let b = self.sample(y, entity_type, rng)?;
            if b.display() != a.display() {
                return Ok((a, b));
            }
        }
        Err(SourceError::ConfigError(format!("cannot draw distinct {x} and {y} sources")))
    }
}

/// Attributes that may name the place an entity belongs to.
pub const LOCATION_ATTRIBUTES: [&str; 4] = ["location", "headquarters", "city", "venue"];

/// Closest lexicon location to any location-like attribute, if within `threshold`
/// normalized edit distance.
pub fn match_entity_location<'l>(entity: &Entity, locations: &'l [Location], threshold: f64) -> Option<&'l Location> {
    let mut best: Option<(f64, &Location)> = None;
    for attr in LOCATION_ATTRIBUTES {
        let Some(v) = entity.get(attr) else { continue };
        let value = v.raw().trim().to_lowercase();
        for loc in locations {
            let d = 1.0 - strsim::normalized_levenshtein(&value, &loc.name.to_lowercase());
            if d <= threshold && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, loc));
            }
        }
    }
    best.map(|(_, l)| l)
}

/// A regional and a non-regional newspaper for a pair. When the entity has no
/// matchable location, a `location` row from another timeline is added to both
/// views first.
pub fn regional_newspapers(
    pair: &ConflictPair,
    lexicon: &Lexicon,
    threshold: f64,
    rng: &mut StreamRng,
) -> Result<(ConflictPair, SourceSpec, SourceSpec)> {
    let entity = pair.entity();
    let (pair, home) = match match_entity_location(entity, &lexicon.locations, threshold) {
        Some(l) => (pair.clone(), l.name.clone()),
        None => {
            let foreign: Vec<&Location> =
                lexicon.locations.iter().filter(|l| l.timeline_id != entity.timeline_id).collect();
            let loc = foreign
                .choose(rng)
                .ok_or_else(|| SourceError::ConfigError("no location from another timeline".into()))?;
            let row = AttributeValue::text(loc.name.clone());
            let base = entity
                .with_appended("location", row.clone())
                .map_err(|e| SourceError::ConfigError(e.to_string()))?;
            let variant = pair
                .variant
                .with_appended("location", row)
                .map_err(|e| SourceError::ConfigError(e.to_string()))?;
            let p = ConflictPair::new(pair.id.clone(), base, variant, &pair.conflict_attribute)
                .map_err(|e| SourceError::ConfigError(e.to_string()))?;
            (p, loc.name.clone())
        }
    };
    let others: Vec<&Location> = lexicon.locations.iter().filter(|l| l.name != home).collect();
    let away = others.choose(rng).ok_or_else(|| SourceError::ConfigError("only one location known".into()))?;
    let template = lexicon
        .newspaper_templates
        .choose(rng)
        .ok_or_else(|| SourceError::ConfigError("no newspaper templates".into()))?;
    let mut regional = make_newspaper(template, &home)?;
    regional.provenance.region = Some(Region::Regional);
    let template = lexicon.newspaper_templates.choose(rng).expect("checked non-empty");
    let mut distant = make_newspaper(template, &away.name)?;
    distant.provenance.region = Some(Region::NonRegional);
    Ok((pair, regional, distant))
}

fn age_in(group: AgeGroup, rng: &mut StreamRng) -> u8 {
    rng.random_range(group.range())
}

/// A female and a male person from the same name cohort, ages within five years.
pub fn gender_contrast(sampler: &SourceSampler<'_>, cohort: AgeGroup, rng: &mut StreamRng) -> Result<(SourceSpec, SourceSpec)> {
    let range = cohort.range();
    let age_f = age_in(cohort, rng);
    let lo = age_f.saturating_sub(MAX_AGE_GAP).max(*range.start());
    let hi = (age_f + MAX_AGE_GAP).min(*range.end());
    let age_m = rng.random_range(lo..=hi);
    let f = sampler.person_of(Gender::Female, cohort, rng)?;
    let m = sampler.person_of(Gender::Male, cohort, rng)?;
    let pair = (
        augment_person_features(&f, true, Some(age_f), None)?,
        augment_person_features(&m, true, Some(age_m), None)?,
    );
    check_gender_contrast(&pair.0, &pair.1)?;
    Ok(pair)
}

pub fn check_gender_contrast(a: &SourceSpec, b: &SourceSpec) -> Result<()> {
    let (Some(x), Some(y)) = (a.features.age, b.features.age) else {
        return Err(SourceError::FeatureError("gender contrast needs ages on both sources".into()));
    };
    if x.abs_diff(y) > MAX_AGE_GAP {
        return Err(SourceError::FeatureError(format!("ages {x} and {y} differ by more than {MAX_AGE_GAP}")));
    }
    if a.features.gender == b.features.gender {
        return Err(SourceError::FeatureError("gender contrast needs two genders".into()));
    }
    Ok(())
}

/// Two people of the same gender from different age groups (`older` first).
pub fn age_contrast(
    sampler: &SourceSampler<'_>,
    older: AgeGroup,
    younger: AgeGroup,
    rng: &mut StreamRng,
) -> Result<(SourceSpec, SourceSpec)> {
    let gender = if rng.random_bool(0.5) { Gender::Female } else { Gender::Male };
    let a = sampler.person_of(gender, older, rng)?;
    let b = sampler.person_of(gender, younger, rng)?;
    Ok((
        augment_person_features(&a, true, Some(age_in(older, rng)), None)?,
        augment_person_features(&b, true, Some(age_in(younger, rng)), None)?,
    ))
}

/// An academic and a courtesy-titled person of the same gender and cohort.
pub fn title_contrast(sampler: &SourceSampler<'_>, rng: &mut StreamRng) -> Result<(SourceSpec, SourceSpec)> {
    let gender = if rng.random_bool(0.5) { Gender::Female } else { Gender::Male };
    let cohort = *AgeGroup::ALL.choose(rng).expect("non-empty");
    let academic = sampler.person_of(gender, cohort, rng)?;
    let plain = sampler.person_of(gender, cohort, rng)?;
    let t_a = *Title::ACADEMIC.choose(rng).expect("non-empty");
    let t_p = *Title::courtesy_for(gender).choose(rng).expect("non-empty");
    Ok((
        augment_person_features(&academic, false, None, Some(t_a))?,
        augment_person_features(&plain, false, None, Some(t_p))?,
    ))
}

/// A traditional handle and an internet-style handle.
pub fn username_contrast(
    sampler: &SourceSampler<'_>,
    style: UsernameStyle,
    rng: &mut StreamRng,
) -> Result<(SourceSpec, SourceSpec)> {
    let first = sampler
        .lexicon
        .first_names
        .choose(rng)
        .ok_or_else(|| SourceError::ConfigError("no first names".into()))?;
    let last = sampler
        .lexicon
        .last_names
        .choose(rng)
        .ok_or_else(|| SourceError::ConfigError("no last names".into()))?;
    Ok((make_traditional_username(&first.name, last, style)?, sampler.social_media(rng)?))
}
