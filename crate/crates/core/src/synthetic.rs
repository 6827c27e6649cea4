//! Synthetic benchmarks with known (or oracle-approximated) mutual information.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::baselines::{ksg_estimate, KsgConfig};
use crate::dataset::{PairedDataset, Provenance};
use crate::error::{invalid, Result};
use crate::nn::Matrix;
use crate::seed;

/// Two `k`-dimensional standard Gaussians with `corr(X_i, Z_j) = δ_ij ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub k: usize,
    pub rho: f64,
    pub n: usize,
    pub seed: u64,
}

impl GaussianSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return invalid("gaussian dimension k must be at least 1");
        }
        if !(self.rho.abs() < 1.0) {
            return invalid(format!("correlation must satisfy |rho| < 1, got {}", self.rho));
        }
        Ok(())
    }
}

/// `X ~ U(−1, 1)`, `Z = sin(aX + phase) + σ·ε`, `ε ~ N(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineSpec {
    pub a: f64,
    pub phase: f64,
    pub noise_sigma: f64,
    pub n: usize,
    pub seed: u64,
}

impl SineSpec {
    /// Frequency `8π`, phase `π/2`, noise 0.05.
    pub fn standard(n: usize, seed: u64) -> Self {
        SineSpec {
            a: 8.0 * std::f64::consts::PI,
            phase: std::f64::consts::FRAC_PI_2,
            noise_sigma: 0.05,
            n,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return invalid(format!("sine frequency must be positive, got {}", self.a));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return invalid(format!("noise sigma must be non-negative, got {}", self.noise_sigma));
        }
        Ok(())
    }
}

pub fn gen_gaussian(spec: &GaussianSpec) -> Result<PairedDataset> {
    spec.validate()?;
    let mut rng = seed::rng_for(spec.seed, &["gaussian"]);
    let (k, n) = (spec.k, spec.n);
    let c = (1.0 - spec.rho * spec.rho).sqrt();
    let mut x = Vec::with_capacity(n * k);
    let mut z = Vec::with_capacity(n * k);
    for _ in 0..n * k {
        let xi: f64 = rng.sample(StandardNormal);
        let eta: f64 = rng.sample(StandardNormal);
        x.push(xi);
        z.push(spec.rho * xi + c * eta);
    }
    PairedDataset::new(
        Matrix::new(n, k, x)?,
        Matrix::new(n, k, z)?,
        Provenance::Gaussian(*spec),
    )
}

pub fn gen_sine(spec: &SineSpec) -> Result<PairedDataset> {
    spec.validate()?;
    let mut rng = seed::rng_for(spec.seed, &["sine"]);
    let mut x = Vec::with_capacity(spec.n);
    let mut z = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let xi: f64 = rng.random_range(-1.0..1.0);
        let e: f64 = rng.sample(StandardNormal);
        x.push(xi);
        z.push((spec.a * xi + spec.phase).sin() + spec.noise_sigma * e);
    }
    PairedDataset::new(
        Matrix::new(spec.n, 1, x)?,
        Matrix::new(spec.n, 1, z)?,
        Provenance::Sine(*spec),
    )
}

/// `I(X; Z) = −(k/2)·ln(1 − ρ²)` nats, i.e. `−½ ln det` of the joint
/// correlation matrix `[[I, ρI], [ρI, I]]`.
pub fn gaussian_ground_truth(k: usize, rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return invalid(format!("correlation must satisfy |rho| < 1, got {rho}"));
    }
    Ok(k as f64 * (-0.5 * (1.0 - rho * rho).ln()))
}

/// Samples used for the sine-wave oracle.
pub const SINE_ORACLE_SAMPLES: usize = 1_000_000;
const SINE_ORACLE_SEED: u64 = 0x5151_0e5e_ed00_0001;

/// KSG estimate on `samples` fresh draws of the sine model (`spec.n` and
/// `spec.seed` are ignored).
pub fn sine_oracle(spec: &SineSpec, samples: usize, seed: u64) -> Result<f64> {
    let fresh = SineSpec {
        n: samples,
        seed,
        ..*spec
    };
    ksg_estimate(&gen_sine(&fresh)?, &KsgConfig::default())
}

#[derive(Serialize, Deserialize)]
struct CachedTruth {
    a: f64,
    phase: f64,
    noise_sigma: f64,
    samples: usize,
    mi_nats: f64,
}

/// Ground truth for the sine model: KSG on 10⁶ samples with a fixed oracle
/// seed, cached under `cache_dir` keyed by `(a, phase, σ)`.
pub fn sine_ground_truth(spec: &SineSpec, cache_dir: Option<&Path>) -> Result<f64> {
    spec.validate()?;
    let key = format!(
        "sine-{:016x}-{:016x}-{:016x}.json",
        spec.a.to_bits(),
        spec.phase.to_bits(),
        spec.noise_sigma.to_bits()
    );
    if let Some(dir) = cache_dir {
        let path = dir.join(&key);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(c) = serde_json::from_str::<CachedTruth>(&text) {
                if c.samples == SINE_ORACLE_SAMPLES {
                    return Ok(c.mi_nats);
                }
            }
        }
    }
    let mi = sine_oracle(spec, SINE_ORACLE_SAMPLES, SINE_ORACLE_SEED)?;
    if let Some(dir) = cache_dir {
        std::fs::create_dir_all(dir)?;
        let rec = CachedTruth {
            a: spec.a,
            phase: spec.phase,
            noise_sigma: spec.noise_sigma,
            samples: SINE_ORACLE_SAMPLES,
            mi_nats: mi,
        };
        std::fs::write(dir.join(&key), serde_json::to_string_pretty(&rec)?)?;
    }
    Ok(mi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn column(m: &Matrix, j: usize) -> Vec<f64> {
        (0..m.rows()).map(|i| m.get(i, j)).collect()
    }

    #[test]
    fn gaussian_moments() {
        let ds = gen_gaussian(&GaussianSpec { k: 1, rho: 0.8, n: 100_000, seed: 1 }).unwrap();
        assert!((corr(&column(ds.x(), 0), &column(ds.z(), 0)) - 0.8).abs() < 0.01);
        let ds = gen_gaussian(&GaussianSpec { k: 1, rho: 0.0, n: 100_000, seed: 2 }).unwrap();
        assert!(corr(&column(ds.x(), 0), &column(ds.z(), 0)).abs() < 0.01);
    }

    #[test]
    fn gaussian_cross_components_uncorrelated() {
        let ds = gen_gaussian(&GaussianSpec { k: 3, rho: 0.6, n: 100_000, seed: 3 }).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let c = corr(&column(ds.x(), i), &column(ds.z(), j));
                if i == j {
                    assert!((c - 0.6).abs() < 0.02);
                } else {
                    assert!(c.abs() < 0.02, "corr(x{i}, z{j}) = {c}");
                }
            }
        }
    }

    #[test]
    fn gaussian_rejects_bad_spec() {
        assert!(gen_gaussian(&GaussianSpec { k: 1, rho: 1.0, n: 5, seed: 0 }).is_err());
        assert!(gen_gaussian(&GaussianSpec { k: 0, rho: 0.1, n: 5, seed: 0 }).is_err());
    }

    #[test]
    fn sine_formula_and_support() {
        let spec = SineSpec { noise_sigma: 0.0, ..SineSpec::standard(2000, 4) };
        let ds = gen_sine(&spec).unwrap();
        for i in 0..ds.len() {
            let x = ds.x().get(i, 0);
            assert!(x > -1.0 && x < 1.0);
            assert_eq!(ds.z().get(i, 0), (spec.a * x + spec.phase).sin());
        }
        assert_eq!((spec.a * 0.0 + spec.phase).sin(), 1.0);
    }

    #[test]
    fn sine_noise_level() {
        let spec = SineSpec::standard(100_000, 5);
        let ds = gen_sine(&spec).unwrap();
        let r: Vec<f64> = (0..ds.len())
            .map(|i| ds.z().get(i, 0) - (spec.a * ds.x().get(i, 0) + spec.phase).sin())
            .collect();
        let m = r.iter().sum::<f64>() / r.len() as f64;
        let sd = (r.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (r.len() - 1) as f64).sqrt();
        assert!((sd - 0.05).abs() < 0.005, "sd = {sd}");
    }

    #[test]
    fn generators_are_seeded() {
        let s = GaussianSpec { k: 2, rho: 0.3, n: 50, seed: 9 };
        assert_eq!(gen_gaussian(&s).unwrap(), gen_gaussian(&s).unwrap());
        let t = SineSpec::standard(50, 9);
        assert_eq!(gen_sine(&t).unwrap(), gen_sine(&t).unwrap());
        assert_ne!(gen_sine(&t).unwrap(), gen_sine(&SineSpec { seed: 10, ..t }).unwrap());
    }

    #[test]
    fn gaussian_truth_values() {
        assert_eq!(gaussian_ground_truth(7, 0.0).unwrap(), 0.0);
        assert!((gaussian_ground_truth(1, 0.8).unwrap() - 0.510_825_6).abs() < 1e-7);
        assert!((gaussian_ground_truth(20, 0.3).unwrap() - 0.943_106_8).abs() < 1e-7);
        for k in 1..30 {
            assert_eq!(
                gaussian_ground_truth(k, 0.45).unwrap(),
                k as f64 * gaussian_ground_truth(1, 0.45).unwrap()
            );
        }
        assert!(gaussian_ground_truth(1, -1.0).is_err());
    }
}
