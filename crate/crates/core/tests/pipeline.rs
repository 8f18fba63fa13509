use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use skewrank::bt::BtParams;
use skewrank::pipeline::{
    build_matrix, build_matrix_against, expand_records, read_records_path, run_real_data, split, MatchRecord,
    PipelineConfig,
};
use skewrank::simulate::{gen_counts, gen_rates, gen_truth, Regime};
use skewrank::spectral::nuclear_norm;
use skewrank::unvectorize;

fn fixture(name: &str) -> Vec<MatchRecord> {
    read_records_path(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)).unwrap()
}

#[test]
fn fixtures_load() {
    let toy = fixture("toy_200.csv");
    assert_eq!(toy.len(), 200);
    assert!(toy.iter().all(|r| r.date.is_some()));
    assert_eq!(build_matrix(&toy).unwrap().n(), 10);
    assert_eq!(fixture("synthetic_2000.csv").len(), 2000);
}

#[test]
fn split_of_fixture_follows_proportions() {
    let records = fixture("toy_200.csv");
    let parts = split(&records[..100], 4).unwrap();
    assert_eq!(parts.sizes(), (50, 20, 30));
    let parts = split(&records, 4).unwrap();
    assert_eq!(parts.sizes(), (100, 40, 60));
}

#[test]
fn validation_is_restricted_to_training_players() {
    let records = fixture("synthetic_2000.csv");
    let parts = split(&records, 2).unwrap();
    let train = build_matrix(&parts.train).unwrap();
    let validation = build_matrix_against(&parts.validation, &train.labels).unwrap();
    assert_eq!(validation.labels, train.labels);
    let known = |p: &str| train.index_of(p).is_some();
    let expected = parts
        .validation
        .iter()
        .filter(|r| known(&r.winner) && known(&r.loser))
        .count();
    assert_eq!(validation.records_used, expected);
}

fn bt_records(n: usize, scale: f64, seed: u64) -> (Vec<MatchRecord>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    let params = BtParams::new(u);
    let truth_cn = nuclear_norm(&unvectorize(&params.logits(), n).unwrap()).unwrap() / n as f64;
    let rates = gen_rates(n, Regime::Dense, seed + 1).unwrap();
    let data = gen_counts(&params.prob_matrix(), &rates, 5, seed + 2).unwrap();
    (expand_records(&data), truth_cn)
}

#[test]
fn tuning_tracks_the_scale_of_a_transitive_truth() {
    let config = |seed| PipelineConfig {
        seed,
        ..PipelineConfig::default()
    };
    let mut near_truth = 0;
    let mut small = 0;
    for seed in 0..10 {
        let (records, truth_cn) = bt_records(100, 1.0, 1000 + seed);
        let chosen = run_real_data(&records, &config(seed)).unwrap().chosen_cn;
        near_truth += usize::from(chosen >= truth_cn / 2.0 && chosen <= truth_cn * 2.0);

        let (records, _) = bt_records(100, 0.25, 2000 + seed);
        small += usize::from(run_real_data(&records, &config(seed)).unwrap().chosen_cn <= 1.0);
    }
    assert!(near_truth >= 8, "{near_truth}/10 within a factor 2 of the truth");
    assert!(small >= 8, "{small}/10 chose C_n <= 1");
}

#[test]
fn intransitive_truth_favours_the_proposed_model() {
    let n = 40;
    let mut wins = 0;
    for seed in 0..10u64 {
        let truth = gen_truth(n, 3, 500 + seed).unwrap();
        let rates = gen_rates(n, Regime::Dense, 600 + seed).unwrap();
        let data = gen_counts(&truth.pi, &rates, 5, 700 + seed).unwrap();
        let report = run_real_data(
            &expand_records(&data),
            &PipelineConfig {
                seed,
                ..PipelineConfig::default()
            },
        )
        .unwrap();
        wins += usize::from(report.proposed.test_accuracy > report.bt.test_accuracy);
    }
    assert!(wins > 5, "proposed more accurate in {wins}/10 runs");
}
