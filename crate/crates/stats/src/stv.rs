use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::{Result, StatsError};

/// One voter's preference order. Each tier holds candidates ranked equally;
/// strict ballots have exactly one candidate per tier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub voter_id: String,
    pub ranking: Vec<Vec<String>>,
}

impl Ballot {
    pub fn strict<S: AsRef<str>>(voter_id: impl Into<String>, order: &[S]) -> Self {
        Self {
            voter_id: voter_id.into(),
            ranking: order.iter().map(|c| vec![c.as_ref().to_string()]).collect(),
        }
    }

    /// Parses a fixture line: candidates in preference order, comma-separated.
    /// `=` joins candidates sharing a tier (`g,n=p,s`).
    pub fn parse_line(voter_id: impl Into<String>, line: &str) -> Self {
        Self {
            voter_id: voter_id.into(),
            ranking: line
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|tier| tier.split('=').map(|c| c.trim().to_string()).collect())
                .collect(),
        }
    }

    pub fn candidates(&self) -> BTreeSet<&str> {
        self.ranking.iter().flatten().map(String::as_str).collect()
    }

    pub fn is_strict(&self) -> bool {
        self.ranking.iter().all(|t| t.len() == 1)
    }

    // Top tier restricted to the active set.
    fn top<'a>(&'a self, active: &BTreeSet<String>) -> Vec<&'a str> {
        self.ranking
            .iter()
            .map(|tier| {
                tier.iter()
                    .filter(|c| active.contains(c.as_str()))
                    .map(String::as_str)
                    .collect::<Vec<_>>()
            })
            .find(|t| !t.is_empty())
            .unwrap_or_default()
    }
}

/// Droop quota for `seats` seats: floor(votes / (seats + 1)) + 1.
pub fn droop_quota(votes: f64, seats: usize) -> f64 {
    (votes / (seats as f64 + 1.0)).floor() + 1.0
}

fn validate(ballots: &[Ballot]) -> Result<BTreeSet<String>> {
    let first = ballots.first().ok_or(StatsError::EmptyElection)?;
    let candidates: BTreeSet<String> = first.candidates().into_iter().map(str::to_string).collect();
    for b in ballots {
        let listed: Vec<&String> = b.ranking.iter().flatten().collect();
        let unique: BTreeSet<&str> = listed.iter().map(|c| c.as_str()).collect();
        if unique.len() != listed.len() {
            return Err(StatsError::InvalidBallot {
                voter: b.voter_id.clone(),
                reason: "candidate listed more than once".into(),
            });
        }
        if unique.len() != candidates.len() || unique.iter().any(|c| !candidates.contains(*c)) {
            return Err(StatsError::InvalidBallot {
                voter: b.voter_id.clone(),
                reason: "candidate set differs from other ballots".into(),
            });
        }
    }
    if candidates.is_empty() {
        return Err(StatsError::EmptyElection);
    }
    Ok(candidates)
}

// First-preference tallies; tied top tiers split the ballot evenly.
fn tally(ballots: &[Ballot], active: &BTreeSet<String>) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, f64> = active.iter().map(|c| (c.clone(), 0.0)).collect();
    for b in ballots {
        let top = b.top(active);
        let share = 1.0 / top.len() as f64;
        for c in top {
            *counts.get_mut(c).expect("active candidate") += share;
        }
    }
    counts
}

/// Induces a full ordering by repeated single-seat STV (Droop quota) rounds.
///
/// Each round counts first preferences among the still-unordered candidates,
/// elects a candidate reaching the quota, and otherwise eliminates the
/// last-placed candidate and recounts. The winner is appended to the ordering
/// and removed before the next round. Elimination ties go to the candidate
/// with fewer first preferences on the original ballots, then to the
/// lexicographically greatest id.
pub fn stv_rank(ballots: &[Ballot]) -> Result<Vec<String>> {
    let candidates = validate(ballots)?;
    let original = tally(ballots, &candidates);
    let votes = ballots.len() as f64;
    let quota = droop_quota(votes, 1);

    let mut remaining = candidates;
    let mut ordering = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mut active = remaining.clone();
        let winner = loop {
            if active.len() == 1 {
                break active.iter().next().cloned().expect("one candidate");
            }
            let counts = tally(ballots, &active);
            if let Some((c, _)) = counts
                .iter()
                .filter(|(_, v)| **v + 1e-9 >= quota)
                .max_by(|a, b| a.1.total_cmp(b.1).then_with(|| b.0.cmp(a.0)))
            {
                break c.clone();
            }
            let loser = counts
                .iter()
                .min_by(|a, b| {
                    a.1.total_cmp(b.1)
                        .then_with(|| original[a.0].total_cmp(&original[b.0]))
                        .then_with(|| b.0.cmp(a.0))
                })
                .map(|(c, _)| c.clone())
                .expect("non-empty tally");
            active.remove(&loser);
        };
        remaining.remove(&winner);
        ordering.push(winner);
    }
    Ok(ordering)
}
