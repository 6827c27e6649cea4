use demine::baselines::{ksg_estimate, KsgConfig};
use demine::meta::sample_transform;
use demine::nn::Matrix;
use demine::synthetic::{gaussian_ground_truth, gen_gaussian, gen_sine, sine_oracle, GaussianSpec, SineSpec};
use demine::{PairedDataset, Provenance};
use rand::Rng;

fn ksg(ds: &PairedDataset) -> f64 {
    ksg_estimate(ds, &KsgConfig::default()).unwrap()
}

#[test]
fn correlated_gaussian_close_to_closed_form() {
    let ds = gen_gaussian(&GaussianSpec { k: 1, rho: 0.8, n: 20_000, seed: 3 }).unwrap();
    let truth = gaussian_ground_truth(1, 0.8).unwrap();
    assert!((ksg(&ds) - truth).abs() < 0.03);
}

#[test]
fn independent_uniforms_near_zero() {
    let mut rng = demine::seed::rng(5);
    let x = Matrix::from_fn(2000, 1, |_, _| rng.random::<f64>());
    let z = Matrix::from_fn(2000, 1, |_, _| rng.random::<f64>());
    let ds = PairedDataset::new(x, z, Provenance::Derived("uniform".into())).unwrap();
    assert!(ksg(&ds).abs() < 0.05);
}

#[test]
fn row_order_does_not_matter() {
    let ds = gen_gaussian(&GaussianSpec { k: 2, rho: 0.5, n: 1000, seed: 8 }).unwrap();
    let idx: Vec<usize> = (0..1000).rev().collect();
    let shuffled = ds.select(&idx, "reversed");
    assert!((ksg(&ds) - ksg(&shuffled)).abs() < 1e-9);
}

#[test]
fn invariant_under_monotone_coordinate_maps() {
    let ds = gen_gaussian(&GaussianSpec { k: 2, rho: 0.5, n: 2000, seed: 9 }).unwrap();
    let base = ksg(&ds);
    for (i, mode) in ["m", "O", "G", "m(O(G(·)))"].iter().enumerate() {
        let t = sample_transform(2, 2, mode, 100 + i as u64).unwrap();
        let v = ksg(&t.apply(&ds).unwrap());
        assert!((v - base).abs() < 0.05, "{mode}: {v} vs {base}");
    }
}

#[test]
fn sine_oracle_behaviour() {
    let spec = SineSpec::standard(0, 0);
    let samples = 100_000;
    let a = sine_oracle(&spec, samples, 1).unwrap();
    let b = sine_oracle(&spec, samples, 2).unwrap();
    assert!((a - b).abs() < 0.02, "{a} vs {b}");
    let noisier = sine_oracle(&SineSpec { noise_sigma: 0.1, ..spec }, samples, 1).unwrap();
    assert!(noisier < a);
    let drowned = sine_oracle(&SineSpec { noise_sigma: 100.0, ..spec }, samples, 1).unwrap();
    assert!(drowned.abs() < 0.02);
    assert!(gen_sine(&SineSpec { n: 10, ..spec }).is_ok());
}
