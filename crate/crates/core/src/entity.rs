use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::lexicon::AttributeLexicon;
use crate::numeric::NumericValue;

/// Attributes that identify an entity or interact with other attributes; they
/// are rendered but never perturbed.
pub const PROTECTED_ATTRIBUTES: [&str; 3] = ["name", "gender", "spouse"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityType {
    Art,
    Building,
    Event,
    Location,
    Organization,
    Person,
    Product,
}

impl EntityType {
    pub const ALL: [EntityType; 7] = [
        EntityType::Art,
        EntityType::Building,
        EntityType::Event,
        EntityType::Location,
        EntityType::Organization,
        EntityType::Person,
        EntityType::Product,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EntityType::Art => "art",
            EntityType::Building => "building",
            EntityType::Event => "event",
            EntityType::Location => "location",
            EntityType::Organization => "organization",
            EntityType::Person => "person",
            EntityType::Product => "product",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityType::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| DataError::UnknownEntityType(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Numeric,
    Year,
    ExactDate,
    CategoricalSmall,
    CategoricalOpen,
    /// Free text that is shown but has no perturbation method.
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedValue {
    Number(NumericValue),
    Year(i32),
    Date(NaiveDate),
}

/// A raw attribute value plus its kind. The parsed form is derived from `raw`
/// and validated on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAttributeValue", into = "RawAttributeValue")]
pub struct AttributeValue {
    kind: ValueKind,
    raw: String,
    parsed: Option<ParsedValue>,
}

#[derive(Serialize, Deserialize)]
struct RawAttributeValue {
    kind: ValueKind,
    raw: String,
}

impl TryFrom<RawAttributeValue> for AttributeValue {
    type Error = DataError;
    fn try_from(r: RawAttributeValue) -> Result<Self, Self::Error> {
        AttributeValue::new(r.kind, r.raw)
    }
}

impl From<AttributeValue> for RawAttributeValue {
    fn from(v: AttributeValue) -> Self {
        RawAttributeValue { kind: v.kind, raw: v.raw }
    }
}

pub fn parse_year(raw: &str) -> Option<i32> {
    let t = raw.trim();
    if t.len() == 4 && t.bytes().all(|b| b.is_ascii_digit()) {
        t.parse().ok()
    } else {
        None
    }
}

pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let t = raw.trim();
    if t.len() != 10 {
        return None;
    }
    NaiveDate::parse_from_str(t, "%Y-%m-%d").ok()
}

fn looks_like_date(raw: &str) -> bool {
    let b = raw.trim().as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter().enumerate().all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
}

impl AttributeValue {
    pub fn new(kind: ValueKind, raw: impl Into<String>) -> Result<Self, DataError> {
        let raw = raw.into();
        let invalid = |why: &str| DataError::InvalidValue {
            raw: raw.clone(),
            reason: why.to_string(),
        };
        let parsed = match kind {
            ValueKind::Numeric => Some(ParsedValue::Number(
                NumericValue::parse(&raw).ok_or_else(|| invalid("not a number"))?,
            )),
            ValueKind::Year => {
                let y = parse_year(&raw).ok_or_else(|| invalid("not a four-digit year"))?;
                if !(1000..=3000).contains(&y) {
                    return Err(invalid("year outside [1000, 3000]"));
                }
                Some(ParsedValue::Year(y))
            }
            ValueKind::ExactDate => Some(ParsedValue::Date(
                parse_date(&raw).ok_or_else(|| invalid("not a valid calendar date"))?,
            )),
            _ => None,
        };
        Ok(Self { kind, raw, parsed })
    }

    pub fn text(raw: impl Into<String>) -> Self {
        Self { kind: ValueKind::Text, raw: raw.into(), parsed: None }
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn parsed(&self) -> Option<&ParsedValue> {
        self.parsed.as_ref()
    }

    /// Same kind, new raw text.
    pub fn with_raw(&self, raw: impl Into<String>) -> Result<Self, DataError> {
        Self::new(self.kind, raw)
    }

    /// Assigns a kind to a seed value from its attribute name and shape.
    pub fn classify(
        entity_type: EntityType,
        attribute: &str,
        raw: &str,
        lexicon: &AttributeLexicon,
    ) -> Result<Self, DataError> {
        if PROTECTED_ATTRIBUTES.contains(&attribute) {
            return Ok(Self::text(raw));
        }
        let numeric = NumericValue::parse(raw);
        if lexicon.curated.contains_attribute(attribute) && numeric.is_none() {
            return Self::new(ValueKind::CategoricalSmall, raw);
        }
        if looks_like_date(raw) {
            return Self::new(ValueKind::ExactDate, raw);
        }
        if lexicon.is_year_attribute(attribute) && parse_year(raw).is_some() {
            return Self::new(ValueKind::Year, raw);
        }
        if numeric.is_some() {
            return Self::new(ValueKind::Numeric, raw);
        }
        if lexicon.is_open_attribute(entity_type, attribute) || lexicon.is_numeric_attribute(attribute) {
            return Self::new(ValueKind::CategoricalOpen, raw);
        }
        Ok(Self::text(raw))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub value: AttributeValue,
}

/// A typed fictional entity with an ordered attribute list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub entity_type: EntityType,
    pub timeline_id: String,
    attributes: Vec<Attribute>,
}

impl Entity {
    pub fn new(
        id: impl Into<String>,
        entity_type: EntityType,
        timeline_id: impl Into<String>,
        attributes: Vec<Attribute>,
    ) -> Result<Self, DataError> {
        let id = id.into();
        let mut seen = std::collections::HashSet::new();
        for a in &attributes {
            if !seen.insert(a.name.as_str()) {
                return Err(DataError::DuplicateAttribute {
                    entity: id,
                    attribute: a.name.clone(),
                });
            }
        }
        Ok(Self { id, entity_type, timeline_id: timeline_id.into(), attributes })
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn get(&self, name: &str) -> Option<&AttributeValue> {
        self.attributes.iter().find(|a| a.name == name).map(|a| &a.value)
    }

    pub fn name(&self) -> &str {
        self.get("name").map(AttributeValue::raw).unwrap_or(&self.id)
    }

    /// Copy with one attribute value replaced; order is preserved.
    pub fn with_value(&self, name: &str, value: AttributeValue) -> Result<Self, DataError> {
        let mut out = self.clone();
        let slot = out
            .attributes
            .iter_mut()
            .find(|a| a.name == name)
            .ok_or_else(|| DataError::UnknownAttribute {
                entity: self.id.clone(),
                attribute: name.to_string(),
            })?;
        slot.value = value;
        Ok(out)
    }

    /// Copy with an extra attribute appended (used for inserted location rows).
    pub fn with_appended(&self, name: &str, value: AttributeValue) -> Result<Self, DataError> {
        let mut attrs = self.attributes.clone();
        attrs.push(Attribute { name: name.to_string(), value });
        Entity::new(self.id.clone(), self.entity_type, self.timeline_id.clone(), attrs)
    }

    /// Names of attributes whose rendered values differ, plus any attribute
    /// present on only one side.
    pub fn diff(&self, other: &Entity) -> Vec<String> {
        let mut out: Vec<String> = self
            .attributes
            .iter()
            .filter(|a| other.get(&a.name).map(|v| v.raw()) != Some(a.value.raw()))
            .map(|a| a.name.clone())
            .collect();
        out.extend(
            other
                .attributes
                .iter()
                .filter(|a| self.get(&a.name).is_none())
                .map(|a| a.name.clone()),
        );
        out
    }
}

/// Seed record shape: `{"id", "entity_type", "timeline_id", "attributes": {name: value}}`
/// with attribute order taken from the JSON object.
#[derive(Debug, Deserialize)]
struct SeedRecord {
    id: String,
    entity_type: String,
    timeline_id: String,
    attributes: serde_json::Map<String, serde_json::Value>,
}

pub fn parse_seed_line(line: &str, lexicon: &AttributeLexicon) -> Result<Entity, DataError> {
    let rec: SeedRecord = serde_json::from_str(line)?;
    let entity_type: EntityType = rec.entity_type.parse()?;
    let mut attrs = Vec::with_capacity(rec.attributes.len());
    for (name, value) in rec.attributes {
        let raw = match value {
            serde_json::Value::String(s) => s,
            serde_json::Value::Null => continue,
            other => other.to_string(),
        };
        let value = AttributeValue::classify(entity_type, &name, &raw, lexicon)?;
        attrs.push(Attribute { name, value });
    }
    Entity::new(rec.id, entity_type, rec.timeline_id, attrs)
}

/// Reads newline-delimited seed entities; blank lines are skipped.
pub fn read_seed_entities<R: BufRead>(reader: R, lexicon: &AttributeLexicon) -> Result<Vec<Entity>, DataError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_seed_line(&line, lexicon).map_err(|e| DataError::AtLine {
            line: i + 1,
            source: Box::new(e),
        })?);
    }
    Ok(out)
}
