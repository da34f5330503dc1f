//! Counterfactual alternatives for single attribute values.

use std::collections::{HashMap, HashSet};

use chrono::{Duration, NaiveDate};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chat::ChatMessage;
use crate::entity::{AttributeValue, Entity, ParsedValue, ValueKind, PROTECTED_ATTRIBUTES};
use crate::error::PerturbError;
use crate::lexicon::{CuratedValues, Denylist, Lexicon};
use crate::numeric::{round_like, NumericValue};
use crate::rng::{substream, StreamRng};

pub const DEFAULT_ALTERNATIVES: usize = 4;
/// Rejected draws tolerated before giving up on a numeric value.
pub const MAX_RESAMPLES: usize = 100;
pub const NUMERIC_SPREAD: f64 = 0.2;
pub const YEAR_SPREAD: i32 = 30;
pub const YEAR_FLOOR: i32 = 1850;
pub const YEAR_CEIL: i32 = 2025;
pub const DATE_SPREAD_DAYS: i64 = 365;

type Result<T> = std::result::Result<T, PerturbError>;

/// Draws `n` distinct values in `[0.8 v, 1.2 v]`, rounded to `decimals`
/// places (three significant digits at five or more integer digits).
pub fn perturb_number(v: f64, decimals: usize, n: usize, rng: &mut StreamRng) -> Result<Vec<f64>> {
    if !v.is_finite() || v < 0.0 {
        return Err(PerturbError::InvalidInput(format!("{v} is not a non-negative number")));
    }
    if v == 0.0 {
        return Err(PerturbError::DegenerateInput("multiplicative perturbation of 0".into()));
    }
    let (lo, hi) = numeric_bounds(v);
    let mut out: Vec<f64> = Vec::with_capacity(n);
    let mut rejected = 0;
    while out.len() < n {
        let r = round_like(rng.random_range(lo..=hi), decimals);
        if r == v || r < lo || r > hi || out.contains(&r) {
            rejected += 1;
            if rejected > MAX_RESAMPLES {
                return Err(PerturbError::InsufficientAlternatives { wanted: n, found: out.len() });
            }
            continue;
        }
        out.push(r);
    }
    Ok(out)
}

pub fn numeric_bounds(v: f64) -> (f64, f64) {
    (v * (1.0 - NUMERIC_SPREAD), v * (1.0 + NUMERIC_SPREAD))
}

/// Formatted alternatives for a number shown with units, currency or separators.
pub fn perturb_numeric(value: &NumericValue, n: usize, rng: &mut StreamRng) -> Result<Vec<String>> {
    Ok(perturb_number(value.value, value.decimals, n, rng)?
        .into_iter()
        .map(|v| value.format(v))
        .collect())
}

pub fn year_window(year: i32) -> (i32, i32) {
    ((year - YEAR_SPREAD).max(YEAR_FLOOR), (year + YEAR_SPREAD).min(YEAR_CEIL))
}

pub fn perturb_year(year: i32, n: usize, rng: &mut StreamRng) -> Result<Vec<i32>> {
    let (lo, hi) = year_window(year);
    let candidates: Vec<i32> = (lo..=hi).filter(|&y| y != year).collect();
    if candidates.len() < n {
        return Err(PerturbError::InsufficientAlternatives { wanted: n, found: candidates.len() });
    }
    Ok(candidates.choose_multiple(rng, n).copied().collect())
}

pub fn perturb_exact_date(date: NaiveDate, n: usize, rng: &mut StreamRng) -> Result<Vec<NaiveDate>> {
    let mut out: Vec<NaiveDate> = Vec::with_capacity(n);
    while out.len() < n {
        let offset = rng.random_range(-DATE_SPREAD_DAYS..=DATE_SPREAD_DAYS);
        if offset == 0 {
            continue;
        }
        let d = date
            .checked_add_signed(Duration::days(offset))
            .ok_or_else(|| PerturbError::InvalidInput(format!("{date} is too close to the calendar limits")))?;
        if !out.contains(&d) {
            out.push(d);
        }
    }
    Ok(out)
}

/// Copies the letter case style of `model` onto `value`.
fn match_case(value: &str, model: &str) -> String {
    let has_alpha = model.chars().any(char::is_alphabetic);
    if has_alpha && model.chars().all(|c| !c.is_uppercase()) {
        return value.to_lowercase();
    }
    if model.chars().next().is_some_and(char::is_uppercase) {
        let mut c = value.chars();
        if let Some(first) = c.next() {
            return first.to_uppercase().chain(c).collect();
        }
    }
    value.to_string()
}

pub fn sample_categorical(
    curated: &CuratedValues,
    attribute: &str,
    original: &str,
    n: usize,
    rng: &mut StreamRng,
) -> Result<Vec<String>> {
    let set = curated
        .values(attribute)
        .ok_or_else(|| PerturbError::NoCuratedSet(attribute.to_string()))?;
    let folded = original.trim().to_lowercase();
    let pool: Vec<&String> = set.iter().filter(|v| v.to_lowercase() != folded).collect();
    if pool.len() < n {
        return Err(PerturbError::InsufficientAlternatives { wanted: n, found: pool.len() });
    }
    Ok(pool.choose_multiple(rng, n).map(|v| match_case(v, original)).collect())
}

/// Context handed to a text generator for one open-value request.
#[derive(Debug, Clone)]
pub struct GenerationRequest<'a> {
    pub entity: &'a Entity,
    pub attribute: &'a str,
    pub messages: Vec<ChatMessage>,
}

pub trait TextGenerator: Send + Sync {
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<String>;
}

pub const ALTERNATIVES_PROMPT: &str = "You are an AI assistant tasked with creating fictional entities based on provided information.
Your goal is to generate detailed, coherent, and realistic alternatives for values of existing
locations, persons, organizations, products, art, buildings and events.
You will be given a information about one entity in a JSON format and a field for which you are
supposed to generate reasonable, realistic and plausible alternative values.
For example, make sure that professions fit the education level and background of
the original entity.
If these values are entities themselves, make sure they are fictional.

Reply with exactly four alternative values, each on a separate line, prefixed with \"ALT: \".
Do not include any other text.

Example format:
ALT: Alternative value 1
ALT: Alternative value 2
ALT: Alternative value 3
ALT: Alternative value 4

Entity Information:
{entity_json}

Target field:
{target_field}";

pub fn entity_json(entity: &Entity) -> String {
    let mut map = serde_json::Map::new();
    map.insert("type".into(), entity.entity_type.as_str().into());
    for a in entity.attributes() {
        map.insert(a.name.clone(), a.value.raw().into());
    }
    serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("string map serializes")
}

pub fn alternatives_request<'a>(entity: &'a Entity, attribute: &'a str) -> GenerationRequest<'a> {
    let prompt = ALTERNATIVES_PROMPT
        .replace("{entity_json}", &entity_json(entity))
        .replace("{target_field}", attribute);
    GenerationRequest { entity, attribute, messages: vec![ChatMessage::system(prompt)] }
}

/// Parses a reply made of exactly `n` lines prefixed `ALT: `.
pub fn parse_alternatives(reply: &str, n: usize) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in reply.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let value = line
            .strip_prefix("ALT:")
            .map(str::trim)
            .ok_or_else(|| PerturbError::GeneratorFormatError(format!("unexpected line `{line}`")))?;
        if value.is_empty() {
            return Err(PerturbError::GeneratorFormatError("empty ALT value".into()));
        }
        out.push(value.to_string());
    }
    if out.len() != n {
        return Err(PerturbError::GeneratorFormatError(format!(
            "expected {n} ALT lines, found {}",
            out.len()
        )));
    }
    Ok(out)
}

/// Asks the generator for alternatives and drops denylisted values, repeats
/// and the original. The result may hold fewer than `n` values.
pub fn generate_open_categorical(
    entity: &Entity,
    attribute: &str,
    generator: &dyn TextGenerator,
    denylist: &Denylist,
    n: usize,
) -> Result<Vec<String>> {
    let original = entity
        .get(attribute)
        .ok_or_else(|| PerturbError::InvalidInput(format!("no attribute `{attribute}`")))?;
    let reply = generator.generate(&alternatives_request(entity, attribute))?;
    let parsed = parse_alternatives(&reply, n)?;
    Ok(dedupe_against(denylist.filter(&parsed), original.raw()))
}

fn dedupe_against(values: Vec<String>, original: &str) -> Vec<String> {
    let mut seen: HashSet<String> = HashSet::from([original.trim().to_lowercase()]);
    values.into_iter().filter(|v| seen.insert(v.trim().to_lowercase())).collect()
}

/// Replays canned replies keyed by (entity id, attribute).
#[derive(Debug, Clone, Default)]
pub struct FixtureGenerator {
    replies: HashMap<(String, String), String>,
}

#[derive(Deserialize)]
struct FixtureRecord {
    entity_id: String,
    attribute: String,
    reply: String,
}

impl FixtureGenerator {
    pub fn parse_jsonl(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let mut replies = HashMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let r: FixtureRecord = serde_json::from_str(line)?;
            replies.insert((r.entity_id, r.attribute), r.reply);
        }
        Ok(Self { replies })
    }

    pub fn builtin() -> Self {
        Self::parse_jsonl(crate::lexicon::SAMPLE_GENERATIONS).expect("built-in generations parse")
    }

    pub fn insert(&mut self, entity_id: &str, attribute: &str, reply: &str) {
        self.replies.insert((entity_id.into(), attribute.into()), reply.into());
    }
}

impl TextGenerator for FixtureGenerator {
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<String> {
        self.replies
            .get(&(request.entity.id.clone(), request.attribute.to_string()))
            .cloned()
            .ok_or_else(|| {
                PerturbError::GeneratorUnavailable(format!(
                    "no fixture reply for {}.{}",
                    request.entity.id, request.attribute
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Numeric,
    Year,
    ExactDate,
    Curated,
    Generated,
}

/// Alternatives produced for one attribute of one entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternatives {
    pub entity_id: String,
    pub attribute: String,
    pub method: Method,
    pub original: AttributeValue,
    pub values: Vec<AttributeValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub entity_id: String,
    pub attribute: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy)]
pub struct PerturbConfig {
    pub seed: u64,
    pub alternatives: usize,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self { seed: 0, alternatives: DEFAULT_ALTERNATIVES }
    }
}

fn typed(kind: ValueKind, raw: String) -> AttributeValue {
    AttributeValue::new(kind, raw.clone()).unwrap_or_else(|_| AttributeValue::text(raw))
}

/// Perturbs one attribute with the method its kind calls for. Numbers the
/// multiplicative rule cannot handle fall back to the generator when one is
/// available.
pub fn perturb_attribute(
    entity: &Entity,
    attribute: &str,
    lexicon: &Lexicon,
    generator: Option<&dyn TextGenerator>,
    config: PerturbConfig,
) -> Result<Alternatives> {
    if PROTECTED_ATTRIBUTES.contains(&attribute) {
        return Err(PerturbError::NotPerturbable(attribute.to_string()));
    }
    let original = entity
        .get(attribute)
        .ok_or_else(|| PerturbError::InvalidInput(format!("no attribute `{attribute}`")))?;
    let n = config.alternatives;
    let mut rng = substream(config.seed, &format!("{}/{attribute}", entity.id));
    let generated = |kind: ValueKind| -> Result<(Method, Vec<AttributeValue>)> {
        let generator = generator.ok_or_else(|| PerturbError::GeneratorUnavailable("no generator configured".into()))?;
        let values = generate_open_categorical(entity, attribute, generator, &lexicon.denylist, n)?;
        Ok((Method::Generated, values.into_iter().map(|v| typed(kind, v)).collect()))
    };
    let (method, values) = match (original.kind(), original.parsed()) {
        (ValueKind::Numeric, Some(ParsedValue::Number(num))) => match perturb_numeric(num, n, &mut rng) {
            Ok(v) => (Method::Numeric, v.into_iter().map(|r| typed(ValueKind::Numeric, r)).collect()),
            Err(e @ (PerturbError::DegenerateInput(_) | PerturbError::InsufficientAlternatives { .. }))
                if generator.is_some() =>
            {
                log::debug!("{}.{attribute}: {e}; falling back to generation", entity.id);
                generated(ValueKind::Numeric)?
            }
            Err(e) => return Err(e),
        },
        (ValueKind::Year, Some(ParsedValue::Year(y))) => (
            Method::Year,
            perturb_year(*y, n, &mut rng)?
                .into_iter()
                .map(|y| typed(ValueKind::Year, y.to_string()))
                .collect(),
        ),
        (ValueKind::ExactDate, Some(ParsedValue::Date(d))) => (
            Method::ExactDate,
            perturb_exact_date(*d, n, &mut rng)?
                .into_iter()
                .map(|d| typed(ValueKind::ExactDate, d.format("%Y-%m-%d").to_string()))
                .collect(),
        ),
        (ValueKind::CategoricalSmall, _) => (
            Method::Curated,
            sample_categorical(&lexicon.attributes.curated, attribute, original.raw(), n, &mut rng)?
                .into_iter()
                .map(|v| typed(ValueKind::CategoricalSmall, v))
                .collect(),
        ),
        (ValueKind::CategoricalOpen, _) => generated(ValueKind::CategoricalOpen)?,
        _ => return Err(PerturbError::NotPerturbable(attribute.to_string())),
    };
    let values: Vec<AttributeValue> = values
        .into_iter()
        .filter(|v| !lexicon.denylist.contains(v.raw()) && v.raw() != original.raw())
        .collect();
    Ok(Alternatives {
        entity_id: entity.id.clone(),
        attribute: attribute.to_string(),
        method,
        original: original.clone(),
        values,
    })
}

/// Perturbs every eligible attribute of an entity; failures are reported as
/// skipped rows rather than aborting the entity.
pub fn perturb_entity(
    entity: &Entity,
    lexicon: &Lexicon,
    generator: Option<&dyn TextGenerator>,
    config: PerturbConfig,
) -> (Vec<Alternatives>, Vec<Skipped>) {
    let mut done = Vec::new();
    let mut skipped = Vec::new();
    for a in entity.attributes() {
        if PROTECTED_ATTRIBUTES.contains(&a.name.as_str()) || a.value.kind() == ValueKind::Text {
            continue;
        }
        match perturb_attribute(entity, &a.name, lexicon, generator, config) {
            Ok(alt) if !alt.values.is_empty() => done.push(alt),
            Ok(_) => skipped.push(Skipped {
                entity_id: entity.id.clone(),
                attribute: a.name.clone(),
                reason: "every alternative was filtered".into(),
            }),
            Err(e) => skipped.push(Skipped {
                entity_id: entity.id.clone(),
                attribute: a.name.clone(),
                reason: e.to_string(),
            }),
        }
    }
    (done, skipped)
}
