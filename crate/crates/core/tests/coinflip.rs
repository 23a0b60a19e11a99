use hallu_core::coinflip::{
    bayes_prediction, generate_dataset, least_squares_solution, poisson_binomial_pmf, train_estimator, CoinSet,
    FlipDataset, LatentCoinTask, TrainConfig,
};
use hallu_core::stats::wilson_interval;

fn small_task() -> LatentCoinTask {
    let coins = CoinSet::new(vec![0.1, 0.3, 0.5, 0.7, 0.9, 0.6]).unwrap();
    LatentCoinTask::visible(coins, vec![(vec![0, 1, 2], 0.5), (vec![2, 3], 0.3), (vec![4, 5], 0.2)]).unwrap()
}

#[test]
fn full_batch_descent_reaches_min_norm_least_squares() {
    let task = small_task();
    let train = generate_dataset(&task, 3000, 11).unwrap();
    let val = generate_dataset(&task, 500, 12).unwrap();
    let cfg = TrainConfig { epochs: 6_000, learning_rate: 0.6, batch_size: 0, seed: 1 };
    let (model, _) = train_estimator(&task, &train, &val, &cfg).unwrap();
    let oracle = least_squares_solution(&train).unwrap();
    for (a, b) in model.weights.iter().zip(&oracle.weights) {
        assert!((a - b).abs() < 1e-3, "{:?} vs {:?}", model.weights, oracle.weights);
    }
}

#[test]
fn single_state_prediction_approaches_subset_mean() {
    let coins = CoinSet::new(vec![0.2, 0.4, 0.6, 0.8]).unwrap();
    let task = LatentCoinTask::visible(coins, vec![(vec![1, 2, 3], 1.0)]).unwrap();
    let train = generate_dataset(&task, 5000, 3).unwrap();
    let val = generate_dataset(&task, 500, 4).unwrap();
    let cfg = TrainConfig { epochs: 20, learning_rate: 0.01, batch_size: 32, seed: 5 };
    let (model, trace) = train_estimator(&task, &train, &val, &cfg).unwrap();
    let pred = model.predict(&task.encoding(0));
    assert!((pred - 1.8).abs() < 0.05, "prediction {pred}");
    assert!(trace.last().unwrap().loss < trace.initial().unwrap().loss);
}

#[test]
fn generated_flips_follow_state_law() {
    let task = small_task();
    let m = 100_000;
    let data = generate_dataset(&task, m, 21).unwrap();
    assert_eq!(data.len(), m);
    let weights = [0.5, 0.3, 0.2];
    for (s, w) in weights.iter().enumerate() {
        let rows: Vec<_> = data.rows.iter().filter(|r| r.state == s).collect();
        let (lo, hi) = wilson_interval(rows.len() as u64, m as u64, 4.0);
        assert!(lo <= *w && *w <= hi, "state {s} frequency");
        assert!(rows.iter().all(|r| r.encoding == task.encoding(s)));
        let probs = task.state_probs(s);
        let var: f64 = probs.iter().map(|p| p * (1.0 - p)).sum();
        let mean = rows.iter().map(|r| f64::from(r.heads)).sum::<f64>() / rows.len() as f64;
        let se = (var / rows.len() as f64).sqrt();
        assert!((mean - task.state_mean(s)).abs() < 4.0 * se, "state {s}: {mean}");
    }
}

#[test]
fn pmf_matches_brute_force_enumeration() {
    let probs = [0.1, 0.35, 0.5, 0.8, 0.95];
    let mut brute = vec![0.0; probs.len() + 1];
    for mask in 0u32..(1 << probs.len()) {
        let p: f64 = probs.iter().enumerate().map(|(i, q)| if mask >> i & 1 == 1 { *q } else { 1.0 - q }).product();
        brute[mask.count_ones() as usize] += p;
    }
    let dp = poisson_binomial_pmf(&probs).unwrap();
    for (a, b) in dp.iter().zip(&brute) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn bayes_prediction_averages_hidden_states() {
    let coins = CoinSet::new(vec![0.1, 0.2, 0.8, 0.9]).unwrap();
    let task = LatentCoinTask::hidden_pair(coins, vec![0, 1], vec![2, 3], 0.25).unwrap();
    let enc = task.encoding(0);
    assert_eq!(enc, task.encoding(1));
    let want = 0.25 * 0.3 + 0.75 * 1.7;
    assert!((bayes_prediction(&task, &enc).unwrap() - want).abs() < 1e-12);
}

#[test]
fn dataset_csv_round_trip() {
    let task = small_task();
    let data = generate_dataset(&task, 200, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flips.csv");
    data.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("c0,c1,c2,c3,c4,c5,state,heads"));
    assert_eq!(FlipDataset::read_csv(&path).unwrap(), data);
}

#[test]
fn same_seed_same_data() {
    let task = small_task();
    assert_eq!(generate_dataset(&task, 500, 1).unwrap(), generate_dataset(&task, 500, 1).unwrap());
    assert_ne!(generate_dataset(&task, 500, 1).unwrap(), generate_dataset(&task, 500, 2).unwrap());
}
