//! Match-record files and the train/validation/test split.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::ComparisonData;
use crate::error::{Error, Result};
use crate::simulate::{derive_seed, rng_for};

const SPLIT_STREAM: u64 = 10;

/// One observed game. `date` (or any ordinal tag) is carried along but never
/// used for modeling.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchRecord {
    pub winner: String,
    pub loser: String,
    pub date: Option<String>,
}

impl MatchRecord {
    pub fn new(winner: impl Into<String>, loser: impl Into<String>) -> Result<Self> {
        let (winner, loser) = (winner.into(), loser.into());
        if winner == loser {
            return Err(Error::InvalidData(format!("player `{winner}` cannot play itself")));
        }
        if winner.is_empty() || loser.is_empty() {
            return Err(Error::InvalidData("empty player label".into()));
        }
        Ok(Self {
            winner,
            loser,
            date: None,
        })
    }

    pub fn with_date(mut self, date: impl Into<String>) -> Self {
        self.date = Some(date.into());
        self
    }
}

fn is_numeric(field: &str) -> bool {
    field.parse::<f64>().is_ok()
}

fn looks_like_header(first: &csv::StringRecord, second: Option<&csv::StringRecord>) -> bool {
    let named = first.get(0).is_some_and(|f| f.eq_ignore_ascii_case("winner"))
        && first.get(1).is_some_and(|f| f.eq_ignore_ascii_case("loser"));
    let numeric = |r: &csv::StringRecord| r.iter().take(2).all(is_numeric);
    named || (!first.iter().take(2).any(is_numeric) && second.is_some_and(numeric))
}

/// Reads `winner,loser[,date]` lines. A first line is taken as a header when
/// it names the `winner` and `loser` columns, or when it is non-numeric while
/// the labels that follow are numeric.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<MatchRecord>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let rows: Vec<csv::StringRecord> = csv
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(e.to_string()))?;
    let skip = usize::from(rows.first().is_some_and(|first| looks_like_header(first, rows.get(1))));
    rows.iter()
        .skip(skip)
        .map(|row| {
            let line = row.position().map_or(0, |p| p.line());
            if row.len() < 2 || row.len() > 3 {
                return Err(Error::Parse(format!(
                    "line {line}: expected `winner,loser[,date]`, found {} fields",
                    row.len()
                )));
            }
            let record = MatchRecord::new(&row[0], &row[1]).map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
            Ok(match row.get(2) {
                Some(date) if !date.is_empty() => record.with_date(date),
                _ => record,
            })
        })
        .collect()
}

pub fn read_records_path(path: impl AsRef<Path>) -> Result<Vec<MatchRecord>> {
    read_records(File::open(path)?)
}

/// Writes records with a `winner,loser,date` header.
pub fn write_records<W: Write>(records: &[MatchRecord], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.into());
    out.write_record(["winner", "loser", "date"]).map_err(io)?;
    for r in records {
        out.write_record([r.winner.as_str(), r.loser.as_str(), r.date.as_deref().unwrap_or("")])
            .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

/// Expands aggregated counts into one record per comparison, in pair order
/// with the wins of the lower index first. Players are labelled by
/// `data.labels()` or by their index.
pub fn expand_records(data: &ComparisonData) -> Vec<MatchRecord> {
    let label = |i: usize| match data.labels() {
        Some(labels) => labels[i].clone(),
        None => i.to_string(),
    };
    let mut out = Vec::with_capacity(data.total_comparisons() as usize);
    for (i, j, t, w) in data.iter_pairs() {
        let (a, b) = (label(i), label(j));
        for _ in 0..w {
            out.push(MatchRecord {
                winner: a.clone(),
                loser: b.clone(),
                date: None,
            });
        }
        for _ in w..t {
            out.push(MatchRecord {
                winner: b.clone(),
                loser: a.clone(),
                date: None,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<MatchRecord>,
    pub validation: Vec<MatchRecord>,
    pub test: Vec<MatchRecord>,
}

impl Split {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

/// Uniform record-level split: `round(0.3 N)` test, `round(0.5 N)` train and
/// the rest validation. Each part keeps the input order.
pub fn split(records: &[MatchRecord], seed: u64) -> Result<Split> {
    let total = records.len();
    if total == 0 {
        return Err(Error::InvalidData("no match records to split".into()));
    }
    let n_test = (0.3 * total as f64).round() as usize;
    let n_train = ((0.5 * total as f64).round() as usize).min(total - n_test);

    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng_for(derive_seed(seed, 0, SPLIT_STREAM)));
    let take = |range: std::ops::Range<usize>| {
        let mut idx = order[range].to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|k| records[k].clone()).collect::<Vec<_>>()
    };
    let test = take(0..n_test);
    let train = take(n_test..n_test + n_train);
    let validation = take(n_test + n_train..total);
    Ok(Split {
        train,
        validation,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn records(n: usize) -> Vec<MatchRecord> {
        (0..n)
            .map(|k| {
                MatchRecord::new(format!("p{}", k % 7), format!("q{}", k % 5))
                    .unwrap()
                    .with_date(k.to_string())
            })
            .collect()
    }

    #[test]
    fn parses_with_and_without_header() {
        let with = "winner,loser,date\nA,B,2020-01-01\nB,C\n";
        let parsed = read_records(with.as_bytes()).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0], MatchRecord::new("A", "B").unwrap().with_date("2020-01-01"));
        assert_eq!(parsed[1].date, None);

        let without = "A,B\nB,C\n";
        assert_eq!(read_records(without.as_bytes()).unwrap().len(), 2);

        let numeric = "home,away\n1,2\n3,1\n";
        let parsed = read_records(numeric.as_bytes()).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].winner, "1");
    }

    #[test]
    fn utf8_labels_survive() {
        let parsed = read_records("Zoë,Ørjan\nŁukasz,Zoë\n".as_bytes()).unwrap();
        assert_eq!(parsed[0].winner, "Zoë");
        assert_eq!(parsed[1].winner, "Łukasz");
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(read_records("A\n".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(read_records("A,B,c,d\n".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(read_records("A,A\n".as_bytes()), Err(Error::Parse(_))));
    }

    #[test]
    fn write_then_read_round_trips() {
        let recs = records(12);
        let mut buf = Vec::new();
        write_records(&recs, &mut buf).unwrap();
        assert_eq!(read_records(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn split_sizes_follow_fifty_twenty_thirty() {
        let s = split(&records(100), 1).unwrap();
        assert_eq!(s.sizes(), (50, 20, 30));
        for total in 1..40 {
            let (a, b, c) = split(&records(total), 3).unwrap().sizes();
            assert_eq!(a + b + c, total);
        }
    }

    #[test]
    fn split_is_deterministic_and_a_partition() {
        let recs = records(57);
        let a = split(&recs, 9).unwrap();
        assert_eq!(a, split(&recs, 9).unwrap());
        assert_ne!(a, split(&recs, 10).unwrap());

        let mut counts: HashMap<&MatchRecord, i32> = HashMap::new();
        for r in &recs {
            *counts.entry(r).or_default() += 1;
        }
        for r in a.train.iter().chain(&a.validation).chain(&a.test) {
            *counts.get_mut(r).unwrap() -= 1;
        }
        assert!(counts.values().all(|&c| c == 0));
    }

    #[test]
    fn split_rejects_empty_input() {
        assert!(split(&[], 0).is_err());
    }

    #[test]
    fn expansion_matches_counts() {
        let data = ComparisonData::new(3, vec![2, 0, 3], vec![1, 0, 3]).unwrap();
        let recs = expand_records(&data);
        assert_eq!(recs.len(), 5);
        assert_eq!(recs.iter().filter(|r| r.winner == "1" && r.loser == "2").count(), 3);
    }
}
