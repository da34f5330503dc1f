//! Conflict pairs, dataset generation and dataset files.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::entity::{AttributeValue, Entity, PROTECTED_ATTRIBUTES};
use crate::error::DataError;
use crate::lexicon::Lexicon;
use crate::perturb::{perturb_entity, Alternatives, PerturbConfig, Skipped, TextGenerator};

/// Two views of one entity that differ in exactly one attribute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictPair {
    pub id: String,
    pub base: Entity,
    pub variant: Entity,
    pub conflict_attribute: String,
    pub base_value: AttributeValue,
    pub variant_value: AttributeValue,
}

impl ConflictPair {
    /// Builds the variant by replacing one value of `base`.
    pub fn from_replacement(
        id: impl Into<String>,
        base: &Entity,
        attribute: &str,
        value: AttributeValue,
    ) -> Result<Self, DataError> {
        let variant = base.with_value(attribute, value)?;
        Self::new(id, base.clone(), variant, attribute)
    }

    pub fn new(id: impl Into<String>, base: Entity, variant: Entity, attribute: &str) -> Result<Self, DataError> {
        let id = id.into();
        let invalid = |reason: String| DataError::InvalidValue { raw: id.clone(), reason };
        if PROTECTED_ATTRIBUTES.contains(&attribute) {
            return Err(invalid(format!("`{attribute}` may not be perturbed")));
        }
        if base.diff(&variant) != [attribute] {
            return Err(invalid(format!("views must differ exactly in `{attribute}`")));
        }
        let base_value = base.get(attribute).cloned().ok_or_else(|| invalid("missing base value".into()))?;
        let variant_value = variant.get(attribute).cloned().ok_or_else(|| invalid("missing variant value".into()))?;
        Ok(Self { id, base, variant, conflict_attribute: attribute.to_string(), base_value, variant_value })
    }

    pub fn entity(&self) -> &Entity {
        &self.base
    }

    /// The same conflict with the two views exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            id: self.id.clone(),
            base: self.variant.clone(),
            variant: self.base.clone(),
            conflict_attribute: self.conflict_attribute.clone(),
            base_value: self.variant_value.clone(),
            variant_value: self.base_value.clone(),
        }
    }
}

/// One pair per surviving alternative, in input order.
pub fn build_conflict_pairs(entities: &[Entity], alternatives: &[Alternatives]) -> Result<Vec<ConflictPair>, DataError> {
    let by_id: BTreeMap<&str, &Entity> = entities.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut out = Vec::new();
    for alt in alternatives {
        let entity = by_id.get(alt.entity_id.as_str()).ok_or_else(|| DataError::UnknownAttribute {
            entity: alt.entity_id.clone(),
            attribute: alt.attribute.clone(),
        })?;
        for (k, v) in alt.values.iter().enumerate() {
            let id = format!("{}/{}/{k}", alt.entity_id, alt.attribute);
            out.push(ConflictPair::from_replacement(id, entity, &alt.attribute, v.clone())?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub alternatives: Vec<Alternatives>,
    pub pairs: Vec<ConflictPair>,
    pub skipped: Vec<Skipped>,
}

/// Perturbs every entity (in id order) and expands the result into pairs.
pub fn generate_dataset(
    entities: &[Entity],
    lexicon: &Lexicon,
    generator: Option<&dyn TextGenerator>,
    config: PerturbConfig,
) -> Result<Dataset, DataError> {
    let mut sorted: Vec<&Entity> = entities.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut alternatives = Vec::new();
    let mut skipped = Vec::new();
    for e in sorted {
        let (a, s) = perturb_entity(e, lexicon, generator, config);
        alternatives.extend(a);
        skipped.extend(s);
    }
    let pairs = build_conflict_pairs(entities, &alternatives)?;
    Ok(Dataset { alternatives, pairs, skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub alternatives_per_value: usize,
    pub entities: usize,
    pub perturbed_values: usize,
    pub pairs: usize,
    pub skipped: Vec<Skipped>,
    /// Input name → hex SHA-256.
    pub input_digests: BTreeMap<String, String>,
}

impl DatasetManifest {
    pub fn new(dataset: &Dataset, entities: usize, config: PerturbConfig, input_digests: BTreeMap<String, String>) -> Self {
        Self {
            seed: config.seed,
            alternatives_per_value: config.alternatives,
            entities,
            perturbed_values: dataset.alternatives.len(),
            pairs: dataset.pairs.len(),
            skipped: dataset.skipped.clone(),
            input_digests,
        }
    }
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut w: W) -> Result<(), DataError> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(reader: R) -> Result<Vec<T>, DataError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DataError::AtLine { line: i + 1, source: Box::new(e.into()) })?);
    }
    Ok(out)
}

/// Tab-separated listing of every alternative for manual review.
pub fn write_review_tsv<W: Write>(alternatives: &[Alternatives], mut w: W) -> Result<(), DataError> {
    writeln!(w, "entity_id\tattribute\tmethod\toriginal\talternative")?;
    for a in alternatives {
        let method = serde_json::to_value(a.method)?;
        for v in &a.values {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                a.entity_id,
                a.attribute,
                method.as_str().unwrap_or_default(),
                a.original.raw(),
                v.raw()
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entity::{parse_seed_line, ValueKind};
    use crate::perturb::{FixtureGenerator, Method};

    fn sarah() -> Entity {
        let lx = Lexicon::builtin();
        parse_seed_line(crate::lexicon::SAMPLE_ENTITIES.lines().next().unwrap(), &lx.attributes).unwrap()
    }

    #[test]
    fn one_pair_per_alternative() {
        let e = sarah();
        let alt = Alternatives {
            entity_id: e.id.clone(),
            attribute: "weight".into(),
            method: Method::Numeric,
            original: e.get("weight").unwrap().clone(),
            values: ["120 lbs", "140 lbs", "150 lbs", "125 lbs"]
                .iter()
                .map(|s| AttributeValue::new(ValueKind::Numeric, *s).unwrap())
                .collect(),
        };
        let pairs = build_conflict_pairs(std::slice::from_ref(&e), &[alt]).unwrap();
        assert_eq!(pairs.len(), 4);
        for p in &pairs {
            assert_eq!(p.base.diff(&p.variant), ["weight"]);
        }
    }

    #[test]
    fn protected_and_noop_pairs_rejected() {
        let e = sarah();
        assert!(ConflictPair::from_replacement("x", &e, "name", AttributeValue::text("Other")).is_err());
        let same = e.get("weight").unwrap().clone();
        assert!(ConflictPair::from_replacement("x", &e, "weight", same).is_err());
    }

    #[test]
    fn swap_is_involution() {
        let e = sarah();
        let p = ConflictPair::from_replacement("x", &e, "eye_color", AttributeValue::text("Green")).unwrap();
        assert_eq!(p.swapped().swapped(), p);
        assert_eq!(p.swapped().base_value.raw(), "Green");
    }

    #[test]
    fn dataset_round_trips_through_jsonl() {
        let lx = Lexicon::builtin();
        let e = sarah();
        let g = FixtureGenerator::builtin();
        let ds = generate_dataset(std::slice::from_ref(&e), &lx, Some(&g), PerturbConfig { seed: 3, alternatives: 4 }).unwrap();
        assert!(!ds.pairs.is_empty());
        let mut buf = Vec::new();
        write_jsonl(&ds.pairs, &mut buf).unwrap();
        let back: Vec<ConflictPair> = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, ds.pairs);
        let mut tsv = Vec::new();
        write_review_tsv(&ds.alternatives, &mut tsv).unwrap();
        let rows = String::from_utf8(tsv).unwrap().lines().count();
        assert_eq!(rows, ds.pairs.len() + 1);
    }
}
