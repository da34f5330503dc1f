use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Ordering of source types by their preference score against the
/// unattributed baseline. Exact ties are broken lexicographically and reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRanking {
    pub order: Vec<String>,
    pub tied_pairs: Vec<(String, String)>,
    pub full_tie: bool,
}

pub fn attribution_rank(scores: &BTreeMap<String, f64>) -> AttributionRanking {
    let mut order: Vec<(&String, f64)> = scores.iter().map(|(k, v)| (k, *v)).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tied_pairs: Vec<(String, String)> = order
        .windows(2)
        .filter(|w| w[0].1 == w[1].1)
        .map(|w| (w[0].0.clone(), w[1].0.clone()))
        .collect();
    let full_tie = order.len() > 1 && tied_pairs.len() == order.len() - 1;
    AttributionRanking {
        order: order.into_iter().map(|(k, _)| k.clone()).collect(),
        tied_pairs,
        full_tie,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descending() {
        let s = BTreeMap::from([
            ("government".to_string(), 30.0),
            ("newspaper".to_string(), 20.0),
            ("person".to_string(), 5.0),
            ("social_media".to_string(), 2.0),
        ]);
        let r = attribution_rank(&s);
        assert_eq!(r.order, vec!["government", "newspaper", "person", "social_media"]);
        assert!(r.tied_pairs.is_empty());
        assert!(!r.full_tie);
    }

    #[test]
    fn all_equal_flags_full_tie() {
        let s = BTreeMap::from([("b".to_string(), 1.0), ("a".to_string(), 1.0), ("c".to_string(), 1.0)]);
        let r = attribution_rank(&s);
        assert_eq!(r.order, vec!["a", "b", "c"]);
        assert!(r.full_tie);
    }
}
