//! Regenerates the match-record fixtures under `tests/data`.
//!
//! ```text
//! cargo run --release -p skewrank --example gen_fixtures
//! ```

use std::fs::File;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skewrank::pipeline::{write_records, MatchRecord};
use skewrank::simulate::gen_truth;
use skewrank::ProbMatrix;

fn sample(pi: &ProbMatrix, labels: &[String], count: usize, seed: u64) -> Vec<MatchRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = pi.n();
    (0..count)
        .map(|k| {
            let i = rng.random_range(0..n);
            let j = (i + rng.random_range(1..n)) % n;
            let (w, l) = if rng.random_bool(pi.get(i, j)) { (i, j) } else { (j, i) };
            let date = format!("2024-{:02}-{:02}", 1 + (k / 28) % 12, 1 + k % 28);
            MatchRecord::new(labels[w].clone(), labels[l].clone())
                .unwrap()
                .with_date(date)
        })
        .collect()
}

fn write(path: &Path, records: &[MatchRecord]) {
    write_records(records, File::create(path).unwrap()).unwrap();
    println!("wrote {} records to {}", records.len(), path.display());
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    std::fs::create_dir_all(&dir).unwrap();

    let labels: Vec<String> = (1..=10).map(|k| format!("P{k:02}")).collect();
    let truth = gen_truth(10, 1, 2024).unwrap();
    write(&dir.join("toy_200.csv"), &sample(&truth.pi, &labels, 200, 1));

    let labels: Vec<String> = (1..=30).map(|k| format!("team_{k:02}")).collect();
    let truth = gen_truth(30, 3, 77).unwrap();
    write(&dir.join("synthetic_2000.csv"), &sample(&truth.pi, &labels, 2000, 2));
}
