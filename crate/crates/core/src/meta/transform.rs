use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{PairedDataset, Provenance};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::seed;

/// Composition of elementary transforms written outermost first, e.g.
/// `m(P(O(·)))` applies the offset, then the permutation, then the mirror.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AugmentationMode {
    outer_first: Vec<char>,
}

impl AugmentationMode {
    pub const SYMBOLS: [char; 4] = ['m', 'P', 'O', 'G'];

    /// Accepts the bracket notation (`m(P(O(·)))`, `.` also allowed for the
    /// argument) or bare letters (`mPO`). `·`, `.`, `x`, `none` and the empty
    /// string are the identity.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("none") || t.eq_ignore_ascii_case("identity") {
            return Ok(AugmentationMode { outer_first: Vec::new() });
        }
        let mut outer_first = Vec::new();
        for c in t.chars() {
            match c {
                'm' | 'P' | 'O' | 'G' => outer_first.push(c),
                '(' | ')' | '·' | '.' | 'x' | ' ' => {}
                other => return Err(Error::UnknownSymbol(other)),
            }
        }
        Ok(AugmentationMode { outer_first })
    }

    pub fn identity() -> Self {
        AugmentationMode { outer_first: Vec::new() }
    }

    pub fn is_identity(&self) -> bool {
        self.outer_first.is_empty()
    }

    /// Symbols in application order (innermost first).
    pub fn application_order(&self) -> impl Iterator<Item = char> + '_ {
        self.outer_first.iter().rev().copied()
    }
}

impl fmt::Display for AugmentationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.outer_first {
            write!(f, "{c}(")?;
        }
        write!(f, "·")?;
        for _ in &self.outer_first {
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// One invertible map on a single variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Elementary {
    /// `v_i ↦ s_i v_i` with `s_i = ±1`.
    Mirror { signs: Vec<f64> },
    /// `v_i ↦ v_{perm[i]}`.
    Permute { perm: Vec<usize> },
    /// `v_i ↦ v_i + o_i`, `o_i ~ U(−0.1, 0.1)`.
    Offset { offsets: Vec<f64> },
    /// `v ↦ sign(v)|v|^γ`, `γ ~ U(0.5, 2)`.
    Gamma { gamma: f64 },
}

impl Elementary {
    fn apply(&self, v: &mut [f64], scratch: &mut Vec<f64>) {
        match self {
            Elementary::Mirror { signs } => v.iter_mut().zip(signs).for_each(|(x, s)| *x *= s),
            Elementary::Permute { perm } => {
                scratch.clear();
                scratch.extend(perm.iter().map(|&p| v[p]));
                v.copy_from_slice(scratch);
            }
            Elementary::Offset { offsets } => v.iter_mut().zip(offsets).for_each(|(x, o)| *x += o),
            Elementary::Gamma { gamma } => v.iter_mut().for_each(|x| *x = signed_pow(*x, *gamma)),
        }
    }

    fn inverse(&self) -> Elementary {
        match self {
            Elementary::Mirror { signs } => Elementary::Mirror { signs: signs.clone() },
            Elementary::Permute { perm } => {
                let mut inv = vec![0; perm.len()];
                for (i, &p) in perm.iter().enumerate() {
                    inv[p] = i;
                }
                Elementary::Permute { perm: inv }
            }
            Elementary::Offset { offsets } => Elementary::Offset {
                offsets: offsets.iter().map(|o| -o).collect(),
            },
            Elementary::Gamma { gamma } => Elementary::Gamma { gamma: 1.0 / gamma },
        }
    }
}

fn signed_pow(x: f64, g: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(g)
    }
}

/// Steps applied in order to one variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableTransform {
    pub steps: Vec<Elementary>,
}

impl VariableTransform {
    pub fn sample<R: Rng + ?Sized>(dim: usize, mode: &AugmentationMode, rng: &mut R) -> Self {
        let steps = mode
            .application_order()
            .map(|c| match c {
                'm' => Elementary::Mirror {
                    signs: (0..dim)
                        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
                        .collect(),
                },
                'P' => {
                    let mut perm: Vec<usize> = (0..dim).collect();
                    perm.shuffle(rng);
                    Elementary::Permute { perm }
                }
                'O' => Elementary::Offset {
                    offsets: (0..dim).map(|_| rng.random_range(-0.1..=0.1)).collect(),
                },
                'G' => Elementary::Gamma {
                    gamma: rng.random_range(0.5..=2.0),
                },
                _ => unreachable!("mode symbols are validated on parse"),
            })
            .collect();
        VariableTransform { steps }
    }

    pub fn apply_vec(&self, v: &mut [f64]) {
        let mut scratch = Vec::with_capacity(v.len());
        for s in &self.steps {
            s.apply(v, &mut scratch);
        }
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        let mut scratch = Vec::with_capacity(m.cols());
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for s in &self.steps {
                s.apply(row, &mut scratch);
            }
        }
        out
    }

    pub fn inverse(&self) -> VariableTransform {
        VariableTransform {
            steps: self.steps.iter().rev().map(Elementary::inverse).collect(),
        }
    }
}

/// Independent transforms for X and Z, shared by both splits of a task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskTransform {
    pub x: VariableTransform,
    pub z: VariableTransform,
}

impl TaskTransform {
    pub fn apply(&self, ds: &PairedDataset) -> Result<PairedDataset> {
        PairedDataset::new(
            self.x.apply(ds.x()),
            self.z.apply(ds.z()),
            Provenance::Derived("augmented".into()),
        )
    }

    pub fn inverse(&self) -> TaskTransform {
        TaskTransform {
            x: self.x.inverse(),
            z: self.z.inverse(),
        }
    }
}

/// Fresh transform pair for `mode`; X and Z sides are drawn independently.
pub fn sample_transform(dim_x: usize, dim_z: usize, mode: &str, seed: u64) -> Result<TaskTransform> {
    let mode = AugmentationMode::parse(mode)?;
    Ok(sample_transform_for(dim_x, dim_z, &mode, seed))
}

pub(crate) fn sample_transform_for(
    dim_x: usize,
    dim_z: usize,
    mode: &AugmentationMode,
    seed: u64,
) -> TaskTransform {
    let mut rx = seed::rng_for(seed, &["x"]);
    let mut rz = seed::rng_for(seed, &["z"]);
    TaskTransform {
        x: VariableTransform::sample(dim_x, mode, &mut rx),
        z: VariableTransform::sample(dim_z, mode, &mut rz),
    }
}
