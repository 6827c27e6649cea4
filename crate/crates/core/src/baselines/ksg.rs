use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::digamma::digamma;
use super::kdtree::KdTree;
use crate::dataset::PairedDataset;
use crate::error::{invalid, Result};
use crate::nn::Matrix;
use crate::seed;

/// Kraskov–Stögbauer–Grassberger estimator settings (algorithm 1, max-norm).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsgConfig {
    pub k_neighbors: usize,
}

impl Default for KsgConfig {
    fn default() -> Self {
        KsgConfig { k_neighbors: 3 }
    }
}

const JITTER: f64 = 1e-10;
const JITTER_SEED: u64 = 0x6b73_675f_6a69_7474;

/// `ψ(k) + ψ(n) − ⟨ψ(n_x + 1) + ψ(n_z + 1)⟩` in nats. Not clamped at zero.
pub fn ksg_estimate(ds: &PairedDataset, cfg: &KsgConfig) -> Result<f64> {
    let n = ds.len();
    let k = cfg.k_neighbors;
    if k == 0 {
        return invalid("KSG needs k_neighbors ≥ 1");
    }
    if n <= k {
        return invalid(format!("KSG with k = {k} needs more than {k} samples, got {n}"));
    }
    let (mut x, mut z) = (ds.x().clone(), ds.z().clone());
    let mut radii = kth_radii(&x, &z, k)?;
    if radii.contains(&0.0) {
        log::warn!("KSG: duplicate joint points give zero radii; adding {JITTER:e} jitter");
        let mut rng = seed::rng(JITTER_SEED);
        for v in x.data_mut().iter_mut().chain(z.data_mut().iter_mut()) {
            let e: f64 = rng.sample(StandardNormal);
            *v += JITTER * e;
        }
        radii = kth_radii(&x, &z, k)?;
    }
    let nx = marginal_counts(&x, &radii);
    let nz = marginal_counts(&z, &radii);
    let mut acc = 0.0;
    for (a, b) in nx.iter().zip(&nz) {
        acc += digamma(*a as f64 + 1.0)? + digamma(*b as f64 + 1.0)?;
    }
    Ok(digamma(k as f64)? + digamma(n as f64)? - acc / n as f64)
}

fn kth_radii(x: &Matrix, z: &Matrix, k: usize) -> Result<Vec<f64>> {
    let joint = x.hstack(z)?;
    let tree = KdTree::new(joint.data(), joint.cols());
    Ok((0..joint.rows())
        .into_par_iter()
        .map(|i| tree.kth_neighbor_distance(i, k))
        .collect())
}

/// For each point, the number of other points strictly closer than its radius.
fn marginal_counts(m: &Matrix, radii: &[f64]) -> Vec<usize> {
    if m.cols() == 1 {
        let v = m.data();
        let mut sorted = v.to_vec();
        sorted.sort_by(f64::total_cmp);
        return v
            .par_iter()
            .zip(radii.par_iter())
            .map(|(&c, &r)| {
                let lo = sorted.partition_point(|&s| s < c && c - s >= r);
                let hi = sorted.partition_point(|&s| s <= c || s - c < r);
                hi - lo - 1
            })
            .collect();
    }
    let tree = KdTree::new(m.data(), m.cols());
    (0..m.rows())
        .into_par_iter()
        .map(|i| tree.count_within(i, radii[i]) - 1)
        .collect()
}
