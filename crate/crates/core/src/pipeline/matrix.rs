//! Aggregating match records into comparison counts.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::data::ComparisonData;
use crate::error::{Error, Result};

use super::records::MatchRecord;

/// Comparison counts over a fixed, labelled player set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlayerMatrix {
    pub data: ComparisonData,
    pub labels: Vec<String>,
    /// Records that survived filtering.
    pub records_used: usize,
}

impl PlayerMatrix {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }
}

fn aggregate(records: &[&MatchRecord], labels: Vec<String>) -> Result<PlayerMatrix> {
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(k, l)| (l.as_str(), k)).collect();
    let outcomes = records
        .iter()
        .map(|r| (index[r.winner.as_str()], index[r.loser.as_str()]));
    let data = ComparisonData::from_outcomes(labels.len(), outcomes)?.with_labels(labels.clone())?;
    Ok(PlayerMatrix {
        data,
        labels,
        records_used: records.len(),
    })
}

/// Removes players without a win or without a loss until none remain, then
/// aggregates. Labels are sorted.
pub fn build_matrix(records: &[MatchRecord]) -> Result<PlayerMatrix> {
    let mut active: Vec<&MatchRecord> = records.iter().collect();
    loop {
        let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for r in &active {
            tally.entry(&r.winner).or_default().0 += 1;
            tally.entry(&r.loser).or_default().1 += 1;
        }
        let dropped: BTreeSet<&str> = tally
            .iter()
            .filter(|(_, &(w, l))| w == 0 || l == 0)
            .map(|(&p, _)| p)
            .collect();
        if dropped.is_empty() {
            if tally.is_empty() {
                return Err(Error::Degenerate(
                    "every player was removed by the win/loss filter".into(),
                ));
            }
            let labels = tally.keys().map(|s| s.to_string()).collect();
            return aggregate(&active, labels);
        }
        active.retain(|r| !dropped.contains(r.winner.as_str()) && !dropped.contains(r.loser.as_str()));
    }
}

/// Aggregates over exactly `reference` (sorted, deduplicated), dropping
/// records that involve anyone else. No win/loss filter is applied.
pub fn build_matrix_against(records: &[MatchRecord], reference: &[String]) -> Result<PlayerMatrix> {
    let labels: Vec<String> = reference.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if labels.len() < 2 {
        return Err(Error::InvalidData(
            "reference player set needs at least two players".into(),
        ));
    }
    let known: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
    let kept: Vec<&MatchRecord> = records
        .iter()
        .filter(|r| known.contains(r.winner.as_str()) && known.contains(r.loser.as_str()))
        .collect();
    aggregate(&kept, labels)
}
