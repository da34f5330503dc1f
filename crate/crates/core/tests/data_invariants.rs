use std::collections::BTreeSet;

use chrono::NaiveDate;
use srcpref_core::conflict::{generate_dataset, write_jsonl, Dataset};
use srcpref_core::entity::{read_seed_entities, Entity, PROTECTED_ATTRIBUTES};
use srcpref_core::lexicon::{Lexicon, SAMPLE_ENTITIES};
use srcpref_core::numeric::NumericValue;
use srcpref_core::perturb::{FixtureGenerator, Method, PerturbConfig};

fn sample() -> (Lexicon, Vec<Entity>) {
    let lx = Lexicon::builtin();
    let es = read_seed_entities(SAMPLE_ENTITIES.as_bytes(), &lx.attributes).unwrap();
    (lx, es)
}

fn generate(seed: u64) -> Dataset {
    let (lx, es) = sample();
    let g = FixtureGenerator::builtin();
    generate_dataset(&es, &lx, Some(&g), PerturbConfig { seed, alternatives: 4 }).unwrap()
}

#[test]
fn every_pair_differs_in_exactly_one_unprotected_attribute() {
    let ds = generate(11);
    assert!(ds.pairs.len() > 100, "only {} pairs", ds.pairs.len());
    for p in &ds.pairs {
        assert_eq!(p.base.diff(&p.variant), [p.conflict_attribute.clone()], "{}", p.id);
        assert!(!PROTECTED_ATTRIBUTES.contains(&p.conflict_attribute.as_str()));
        for a in PROTECTED_ATTRIBUTES {
            assert_eq!(p.base.get(a), p.variant.get(a));
        }
    }
}

#[test]
fn perturbations_respect_bounds() {
    let (lx, _) = sample();
    let ds = generate(5);
    for alt in &ds.alternatives {
        let orig = alt.original.raw();
        let values: BTreeSet<&str> = alt.values.iter().map(|v| v.raw()).collect();
        assert_eq!(values.len(), alt.values.len(), "duplicates in {}/{}", alt.entity_id, alt.attribute);
        for v in &alt.values {
            let raw = v.raw();
            assert_ne!(raw.to_lowercase(), orig.to_lowercase(), "{}/{}", alt.entity_id, alt.attribute);
            assert!(!lx.denylist.contains(raw), "denylisted {raw}");
            match alt.method {
                Method::Numeric => {
                    let o = NumericValue::parse(orig).unwrap();
                    let n = NumericValue::parse(raw).unwrap();
                    assert!(n.value >= 0.8 * o.value - 1e-9 && n.value <= 1.2 * o.value + 1e-9, "{raw} vs {orig}");
                    assert_eq!(n.prefix, o.prefix);
                    assert_eq!(n.suffix, o.suffix);
                }
                Method::Year => {
                    let (o, n): (i32, i32) = (orig.parse().unwrap(), raw.parse().unwrap());
                    assert!((o - n).abs() <= 30 && (1850..=2025).contains(&n), "{raw} vs {orig}");
                }
                Method::ExactDate => {
                    let o = NaiveDate::parse_from_str(orig, "%Y-%m-%d").unwrap();
                    let n = NaiveDate::parse_from_str(raw, "%Y-%m-%d").unwrap();
                    assert!((n - o).num_days().abs() <= 365);
                }
                Method::Curated => {
                    let set = lx.attributes.curated.values(&alt.attribute).unwrap();
                    assert!(set.iter().any(|s| s.eq_ignore_ascii_case(raw)), "{raw} not curated");
                }
                Method::Generated => {}
            }
        }
    }
}

#[test]
fn seeded_regeneration_is_byte_identical() {
    let dump = |ds: &Dataset| {
        let mut buf = Vec::new();
        write_jsonl(&ds.pairs, &mut buf).unwrap();
        buf
    };
    let a = dump(&generate(42));
    let b = dump(&generate(42));
    assert_eq!(a, b);
    assert_ne!(a, dump(&generate(43)));
}

#[test]
fn protected_attributes_are_never_targets() {
    let ds = generate(1);
    assert!(ds.alternatives.iter().all(|a| !PROTECTED_ATTRIBUTES.contains(&a.attribute.as_str())));
}
