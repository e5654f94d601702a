use lineopt::encoding::BitString;
use lineopt::mpsgen::{MpsModel, TrainParams, WeightedDataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn all_strings(n: usize) -> Vec<BitString> {
    (0..1u32 << n)
        .map(|v| BitString::from_bits((0..n).rev().map(|i| ((v >> i) & 1) as u8).collect()))
        .collect()
}

fn index_of(b: &BitString) -> usize {
    b.bits().iter().fold(0, |acc, &x| acc * 2 + x as usize)
}

fn params(max_bond: usize) -> TrainParams {
    TrainParams {
        max_bond,
        ..TrainParams::default()
    }
}

#[test]
fn probabilities_sum_to_one_after_init_and_training() {
    for n in [1, 2, 5, 8] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let mut m = MpsModel::random(n, &params(4), &mut rng).unwrap();
        let total: f64 = all_strings(n).iter().map(|b| m.probability(b).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9, "n={n} total={total}");

        let data = WeightedDataset::new(
            all_strings(n)
                .into_iter()
                .step_by(3)
                .enumerate()
                .map(|(i, b)| (b, 1.0 + i as f64))
                .collect(),
        )
        .unwrap();
        m.train(&data, &params(4)).unwrap();
        let total: f64 = all_strings(n).iter().map(|b| m.probability(b).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9, "trained n={n} total={total}");
        assert!((m.norm_squared() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let n = 7;
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut m = MpsModel::random(n, &params(3), &mut rng).unwrap();
    // a couple of sweeps so the bonds are not at their initial values
    let warm = WeightedDataset::uniform(all_strings(n).into_iter().step_by(5).collect()).unwrap();
    m.train(&warm, &TrainParams { sweeps: 2, ..params(3) }).unwrap();

    let data = WeightedDataset::new(
        all_strings(n)
            .into_iter()
            .step_by(7)
            .enumerate()
            .map(|(i, b)| (b, (i % 3 + 1) as f64))
            .collect(),
    )
    .unwrap();
    let h = 1e-6;
    for k in 0..n - 1 {
        let (merged, grad) = m.bond_gradient(k, &data);
        for j in 0..merged.len() {
            let mut plus = merged.clone();
            plus[j] += h;
            let mut minus = merged.clone();
            minus[j] -= h;
            let fd = (m.loss_with_merged(k, &plus, &data) - m.loss_with_merged(k, &minus, &data))
                / (2.0 * h);
            let rel = (fd - grad[j]).abs() / grad[j].abs().max(fd.abs()).max(1e-12);
            assert!(rel < 1e-4 || (fd - grad[j]).abs() < 1e-7, "bond {k} entry {j}: fd {fd} analytic {}", grad[j]);
        }
    }
}

#[test]
fn samples_follow_the_born_distribution() {
    let n = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut m = MpsModel::random(n, &params(4), &mut rng).unwrap();
    let data = WeightedDataset::new(
        all_strings(n)
            .into_iter()
            .enumerate()
            .filter(|(i, _)| i % 4 != 1)
            .map(|(i, b)| (b, 1.0 + (i % 5) as f64))
            .collect(),
    )
    .unwrap();
    m.train(&data, &params(4)).unwrap();
    let probs: Vec<f64> = all_strings(n).iter().map(|b| m.probability(b).unwrap()).collect();

    let draws = 20_000;
    let mut counts = vec![0usize; 1 << n];
    for s in m.sample(draws, &mut rng) {
        counts[index_of(&s)] += 1;
    }
    // pool cells with small expectation into one
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (c, p) in counts.iter().zip(&probs) {
        let e = p * draws as f64;
        if e < 5.0 {
            pooled_obs += *c as f64;
            pooled_exp += e;
        } else {
            stat += (*c as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp.max(1e-12);
        cells += 1;
    }
    let dist = ChiSquared::new((cells - 1) as f64).unwrap();
    let p_value = 1.0 - dist.cdf(stat);
    assert!(p_value > 0.01, "chi2 {stat} on {cells} cells, p={p_value}");
}

#[test]
fn sampling_is_reproducible_per_seed() {
    let mut a = MpsModel::random(12, &params(6), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let mut b = a.clone();
    let sa = a.sample(40, &mut ChaCha8Rng::seed_from_u64(9));
    let sb = b.sample(40, &mut ChaCha8Rng::seed_from_u64(9));
    assert_eq!(sa, sb);
}

#[test]
fn training_reduces_the_loss_and_caps_bonds() {
    let n = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let strings: Vec<BitString> = (0..30)
        .map(|i| BitString::from_bits((0..n).map(|j| (((i * 7 + j * 3) % 5) < 2) as u8).collect()))
        .collect();
    let data = WeightedDataset::uniform(strings).unwrap();
    let mut m = MpsModel::random(n, &params(6), &mut rng).unwrap();
    let report = m.train(&data, &params(6)).unwrap();
    let first = report.loss_history[0];
    let last = *report.loss_history.last().unwrap();
    assert!(last < first, "{:?}", report.loss_history);
    assert!(m.bond_dims().iter().all(|&d| d <= 6));
}

fn entropy(data: &WeightedDataset) -> f64 {
    -data.items().iter().map(|(_, w)| w * w.ln()).sum::<f64>()
}

#[test]
fn product_state_is_deterministic() {
    let zeros = BitString::zeros(6);
    let mut m = MpsModel::product_state(&zeros, 3);
    assert_eq!(m.probability(&zeros).unwrap(), 1.0);
    for b in all_strings(6).iter().filter(|b| **b != zeros) {
        assert_eq!(m.probability(b).unwrap(), 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(m.sample(50, &mut rng).iter().all(|s| *s == zeros));
}

#[test]
fn long_chains_respect_the_bond_cap() {
    let m = MpsModel::random(39, &params(6), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let dims = m.bond_dims();
    assert_eq!(dims.len(), 38);
    assert!(dims.iter().all(|&d| d <= 6));
    assert_eq!(dims[0], 2);
    assert!((m.norm_squared() - 1.0).abs() < 1e-9);
    let again = MpsModel::random(39, &params(6), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(m.to_text(), again.to_text());
}

#[test]
fn loss_is_the_weighted_negative_log_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = MpsModel::random(6, &params(3), &mut rng).unwrap();
    let data = WeightedDataset::new(
        all_strings(6).into_iter().step_by(9).map(|b| (b, 2.0)).collect(),
    )
    .unwrap();
    let direct: f64 = -data
        .items()
        .iter()
        .map(|(b, w)| w * m.probability(b).unwrap().ln())
        .sum::<f64>();
    assert!((m.loss(&data).unwrap() - direct).abs() < 1e-12);

    let uniform = MpsModel::product_state(&BitString::zeros(1), 1);
    let one = WeightedDataset::uniform(vec![BitString::zeros(1)]).unwrap();
    assert_eq!(uniform.loss(&one).unwrap(), 0.0);
}

#[test]
fn single_string_is_memorised() {
    let target: BitString = "1011001110".parse().unwrap();
    let data = WeightedDataset::uniform(vec![target.clone()]).unwrap();
    let mut m = MpsModel::random(10, &params(4), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let report = m.train(&data, &TrainParams { sweeps: 30, ..params(4) }).unwrap();
    assert!(m.probability(&target).unwrap() >= 0.99, "{:?}", report.loss_history);
    assert!(*report.loss_history.last().unwrap() < 0.01);
}

#[test]
fn uniform_data_reaches_the_entropy_floor() {
    let n = 6;
    let data = WeightedDataset::uniform(all_strings(n)).unwrap();
    let mut m = MpsModel::random(n, &params(8), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let report = m.train(&data, &TrainParams { sweeps: 30, ..params(8) }).unwrap();
    let floor = n as f64 * std::f64::consts::LN_2;
    let last = *report.loss_history.last().unwrap();
    assert!(last >= floor - 1e-9);
    assert!(last - floor < 1e-3, "{:?}", report.loss_history);
}

#[test]
fn two_clusters_are_learned_to_within_five_percent_of_the_entropy() {
    let n = 8;
    let mut items = Vec::new();
    for centre in [0u8, 1] {
        items.push((BitString::from_bits(vec![centre; n]), 3.0));
        for flip in 0..n {
            let mut bits = vec![centre; n];
            bits[flip] ^= 1;
            items.push((BitString::from_bits(bits), 1.0));
        }
    }
    let data = WeightedDataset::new(items).unwrap();
    let h = entropy(&data);
    let mut m = MpsModel::random(n, &params(6), &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let report = m.train(&data, &TrainParams { sweeps: 40, ..params(6) }).unwrap();
    let last = *report.loss_history.last().unwrap();
    assert!(last <= 1.05 * h, "loss {last} entropy {h}: {:?}", report.loss_history);
    assert!(m.bond_dims().iter().all(|&d| d <= 6));
}

#[test]
fn accepted_sweeps_never_raise_the_loss() {
    let n = 10;
    let data = WeightedDataset::new(
        all_strings(n)
            .into_iter()
            .step_by(37)
            .enumerate()
            .map(|(i, b)| (b, 1.0 + (i % 4) as f64))
            .collect(),
    )
    .unwrap();
    let mut m = MpsModel::random(n, &params(5), &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
    let report = m.train(&data, &TrainParams { sweeps: 15, learning_rate: 0.5, ..params(5) }).unwrap();
    assert!(report.loss_history.windows(2).all(|w| w[1] <= w[0] + 1e-8), "{:?}", report.loss_history);
}
