//! Empirical energy-based lower bounds on mutual information.
//!
//! All estimators take a square score matrix `S` with `S[i][j] = T(x_i, z_j)`;
//! the diagonal holds the joint pairs and all `n²` entries (diagonal included)
//! stand in for the product of marginals.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::nn::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundKind {
    Eb1,
    Mine,
    MineF,
}

impl BoundKind {
    pub const ALL: [BoundKind; 3] = [BoundKind::Eb1, BoundKind::Mine, BoundKind::MineF];
}

/// `log(mean(exp(v)))` with max subtraction.
pub fn exp_mean_stable(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return invalid("log-mean-exp of an empty sequence");
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return invalid("log-mean-exp needs finite values");
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + (sum / values.len() as f64).ln())
}

fn check_square(s: &Matrix) -> Result<usize> {
    if s.rows() != s.cols() {
        return invalid(format!(
            "score matrix must be square, got {}×{}",
            s.rows(),
            s.cols()
        ));
    }
    if s.rows() < 2 {
        return invalid("score matrix needs at least 2 rows");
    }
    Ok(s.rows())
}

fn diag_mean(s: &Matrix) -> f64 {
    let n = s.rows();
    (0..n).map(|i| s.get(i, i)).sum::<f64>() / n as f64
}

/// Bound value in nats.
pub fn estimate(kind: BoundKind, s: &Matrix) -> Result<f64> {
    let n = check_square(s)?;
    let joint = diag_mean(s);
    let value = match kind {
        BoundKind::Mine => joint - exp_mean_stable(s.data())?,
        BoundKind::MineF => {
            let m = s.data().iter().map(|v| v.exp()).sum::<f64>() / (n * n) as f64;
            joint - m + 1.0
        }
        BoundKind::Eb1 => {
            let mut acc = 0.0;
            for row in s.row_iter() {
                acc += exp_mean_stable(row)?;
            }
            joint - acc / n as f64
        }
    };
    Ok(value)
}

/// Training loss, the exact negation of the MINE-f estimate.
pub fn loss(s: &Matrix) -> Result<f64> {
    Ok(-estimate(BoundKind::MineF, s)?)
}

/// Loss together with `∂loss/∂S`: `−δ_ij/n + e^{S_ij}/n²`.
pub fn loss_with_adjoint(s: &Matrix) -> Result<(f64, Matrix)> {
    let n = check_square(s)?;
    let nf = n as f64;
    let mut adj = s.map(|v| v.exp() / (nf * nf));
    let mean_exp: f64 = adj.data().iter().sum();
    let mut joint = 0.0;
    for i in 0..n {
        joint += s.get(i, i);
        let d = adj.get(i, i) - 1.0 / nf;
        adj.set(i, i, d);
    }
    Ok((-(joint / nf) + mean_exp - 1.0, adj))
}

/// Range of the MINE-f estimate for scores confined to `[lower, upper]`.
pub fn mine_f_range(lower: f64, upper: f64) -> (f64, f64) {
    (lower - upper.exp() + 1.0, upper - lower.exp() + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_by_two() -> Matrix {
        Matrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn constant_scores_give_zero() {
        for c in [0.0, -3.2, 0.7, 5.0] {
            let s = Matrix::filled(4, 4, c);
            for k in BoundKind::ALL {
                let v = estimate(k, &s).unwrap();
                if k == BoundKind::MineF && c != 0.0 {
                    // MINE-f is not shift invariant: c − e^c + 1
                    assert!((v - (c - c.exp() + 1.0)).abs() < 1e-12);
                } else {
                    assert!(v.abs() < 1e-12, "{k:?} c={c}: {v}");
                }
            }
        }
    }

    #[test]
    fn hand_evaluated_two_by_two() {
        let e = std::f64::consts::E;
        let s = two_by_two();
        let mine_f = 1.0 - (2.0 * e + 2.0) / 4.0 + 1.0;
        let mine = 1.0 - ((2.0 * e + 2.0) / 4.0).ln();
        assert!((estimate(BoundKind::MineF, &s).unwrap() - mine_f).abs() < 1e-15);
        assert!((estimate(BoundKind::Mine, &s).unwrap() - mine).abs() < 1e-15);
        assert!((mine_f - 0.140859).abs() < 1e-6);
        assert!((mine - 0.379885).abs() < 1e-6);
        assert!((loss(&s).unwrap() + 0.140859).abs() < 1e-6);
    }

    #[test]
    fn log_mean_exp_cases() {
        assert!((exp_mean_stable(&[2.5; 7]).unwrap() - 2.5).abs() < 1e-15);
        assert!((exp_mean_stable(&[0.0, 3f64.ln()]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(exp_mean_stable(&[1000.0, 1000.0]).unwrap(), 1000.0);
        assert!(exp_mean_stable(&[]).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(estimate(BoundKind::Mine, &Matrix::zeros(2, 3)).is_err());
        assert!(estimate(BoundKind::Eb1, &Matrix::zeros(1, 1)).is_err());
        assert!(loss(&Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn adjoint_matches_finite_differences() {
        let s = Matrix::from_fn(3, 3, |i, j| (i as f64 - j as f64) * 0.4 + 0.1 * i as f64);
        let (l, adj) = loss_with_adjoint(&s).unwrap();
        assert!((l - loss(&s).unwrap()).abs() < 1e-15);
        let h = 1e-6;
        for k in 0..9 {
            let mut p = s.clone();
            p.data_mut()[k] += h;
            let mut m = s.clone();
            m.data_mut()[k] -= h;
            let fd = (loss(&p).unwrap() - loss(&m).unwrap()) / (2.0 * h);
            assert!((fd - adj.data()[k]).abs() < 1e-9);
        }
    }

    fn score_matrix() -> impl Strategy<Value = Matrix> {
        (2usize..7).prop_flat_map(|n| {
            prop::collection::vec(-4.0f64..4.0, n * n)
                .prop_map(move |d| Matrix::new(n, n, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn bound_ordering(s in score_matrix()) {
            let eb1 = estimate(BoundKind::Eb1, &s).unwrap();
            let mine = estimate(BoundKind::Mine, &s).unwrap();
            let mine_f = estimate(BoundKind::MineF, &s).unwrap();
            prop_assert!(eb1 >= mine - 1e-12);
            prop_assert!(mine >= mine_f - 1e-12);
        }

        #[test]
        fn loss_is_negated_mine_f(s in score_matrix()) {
            let total = loss(&s).unwrap() + estimate(BoundKind::MineF, &s).unwrap();
            prop_assert!(total.abs() <= 1e-15);
        }

        #[test]
        fn shift_behaviour(s in score_matrix(), mag in 0.1f64..2.0, up in any::<bool>()) {
            let c = if up { mag } else { -mag };
            let shifted = s.map(|v| v + c);
            for k in [BoundKind::Mine, BoundKind::Eb1] {
                let a = estimate(k, &s).unwrap();
                let b = estimate(k, &shifted).unwrap();
                prop_assert!((a - b).abs() < 1e-10);
            }
            // MINE-f moves by c − (e^c − 1)·mean(e^S)
            let a = estimate(BoundKind::MineF, &s).unwrap();
            let b = estimate(BoundKind::MineF, &shifted).unwrap();
            let n = s.rows() as f64;
            let mean_exp = s.data().iter().map(|v| v.exp()).sum::<f64>() / (n * n);
            let want = a + c - (c.exp() - 1.0) * mean_exp;
            prop_assert!((b - want).abs() < 1e-9 * (1.0 + want.abs()));
        }

        #[test]
        fn mine_f_within_range(lo in -3.0f64..0.0, width in 0.01f64..4.0, n in 2usize..6, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let hi = lo + width;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let s = Matrix::from_fn(n, n, |_, _| rng.random_range(lo..=hi));
            let (a, b) = mine_f_range(lo, hi);
            let v = estimate(BoundKind::MineF, &s).unwrap();
            prop_assert!(v >= a - 1e-12 && v <= b + 1e-12);
        }
    }
}
