use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nn::Matrix;
use crate::seed;
use crate::synthetic::{GaussianSpec, SineSpec};

/// Where a dataset came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Gaussian(GaussianSpec),
    Sine(SineSpec),
    File(PathBuf),
    Derived(String),
}

/// `n` aligned sample pairs; row `i` of `x` and row `i` of `z` are one joint draw.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedDataset {
    x: Matrix,
    z: Matrix,
    pub provenance: Provenance,
}

impl PairedDataset {
    pub fn new(x: Matrix, z: Matrix, provenance: Provenance) -> Result<Self> {
        if x.rows() != z.rows() {
            return Err(Error::Dimension {
                expected: x.rows(),
                got: z.rows(),
                context: "paired dataset row counts",
            });
        }
        if !x.is_finite() || !z.is_finite() {
            return invalid("dataset contains non-finite values");
        }
        Ok(PairedDataset { x, z, provenance })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim_x(&self) -> usize {
        self.x.cols()
    }

    pub fn dim_z(&self) -> usize {
        self.z.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn z(&self) -> &Matrix {
        &self.z
    }

    /// Rows `idx` of both variables, pairing preserved.
    pub fn select(&self, idx: &[usize], label: &str) -> PairedDataset {
        PairedDataset {
            x: self.x.select_rows(idx),
            z: self.z.select_rows(idx),
            provenance: Provenance::Derived(label.to_string()),
        }
    }

    /// Seeded shuffle followed by a split into the first
    /// `round(fraction·n)` rows and the rest.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(PairedDataset, PairedDataset)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return invalid(format!("split fraction must lie in (0, 1), got {train_fraction}"));
        }
        let n = self.len();
        let n_train = (train_fraction * n as f64).round() as usize;
        if n_train == 0 || n_train >= n {
            return invalid(format!(
                "splitting {n} rows at {train_fraction} leaves an empty part"
            ));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut seed::rng(seed));
        Ok((
            self.select(&idx[..n_train], "train"),
            self.select(&idx[n_train..], "validation"),
        ))
    }

    /// Write `x0,…,z0,…` CSV.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = (0..self.dim_x())
            .map(|i| format!("x{i}"))
            .chain((0..self.dim_z()).map(|i| format!("z{i}")))
            .collect();
        w.write_record(&header)?;
        let mut rec = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            rec.clear();
            rec.extend(self.x.row(i).iter().chain(self.z.row(i)).map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Read a CSV written by [`PairedDataset::write_csv`]; columns are assigned
    /// by their `x`/`z` header prefix.
    pub fn read_csv<R: std::io::Read>(input: R, provenance: Provenance) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let mut xs = Vec::new();
        let mut zs = Vec::new();
        for (i, h) in header.iter().enumerate() {
            match h.trim().chars().next() {
                Some('x') => xs.push(i),
                Some('z') => zs.push(i),
                _ => return invalid(format!("unexpected CSV column {h:?}; want x*/z*")),
            }
        }
        if xs.is_empty() || zs.is_empty() {
            return invalid("CSV needs at least one x column and one z column");
        }
        let (mut xd, mut zd) = (Vec::new(), Vec::new());
        let mut rows = 0;
        for rec in r.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                let s = rec.get(i).unwrap_or("").trim();
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad number {s:?} in CSV row {}", rows + 1)))
            };
            for &i in &xs {
                xd.push(parse(i)?);
            }
            for &i in &zs {
                zd.push(parse(i)?);
            }
            rows += 1;
        }
        PairedDataset::new(
            Matrix::new(rows, xs.len(), xd)?,
            Matrix::new(rows, zs.len(), zd)?,
            provenance,
        )
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        PairedDataset::read_csv(std::io::BufReader::new(f), Provenance::File(path.to_path_buf()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> PairedDataset {
        let x = Matrix::from_fn(n, 2, |i, j| (i * 10 + j) as f64);
        let z = Matrix::from_fn(n, 1, |i, _| -(i as f64));
        PairedDataset::new(x, z, Provenance::Derived("toy".into())).unwrap()
    }

    fn row_set(ds: &PairedDataset) -> Vec<(Vec<u64>, Vec<u64>)> {
        let mut v: Vec<_> = (0..ds.len())
            .map(|i| {
                (
                    ds.x().row(i).iter().map(|f| f.to_bits()).collect(),
                    ds.z().row(i).iter().map(|f| f.to_bits()).collect(),
                )
            })
            .collect();
        v.sort();
        v
    }

    #[test]
    fn split_partitions_rows() {
        let ds = toy(10);
        let (a, b) = ds.split(0.5, 3).unwrap();
        assert_eq!((a.len(), b.len()), (5, 5));
        let mut joined = row_set(&a);
        joined.extend(row_set(&b));
        joined.sort();
        assert_eq!(joined, row_set(&ds));
        let (a2, _) = ds.split(0.5, 3).unwrap();
        assert_eq!(a.x(), a2.x());
        let (c, d) = toy(300).split(0.8, 1).unwrap();
        assert_eq!((c.len(), d.len()), (240, 60));
    }

    #[test]
    fn split_rejects_degenerate() {
        assert!(toy(1).split(0.5, 0).is_err());
        assert!(toy(10).split(1.0, 0).is_err());
        assert!(toy(10).split(0.01, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ds = toy(4);
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0,x1,z0\n"));
        let back = PairedDataset::read_csv(&buf[..], Provenance::Derived("t".into())).unwrap();
        assert_eq!(back.x(), ds.x());
        assert_eq!(back.z(), ds.z());
        assert!(PairedDataset::read_csv("a,z0\n1,2\n".as_bytes(), Provenance::Derived("t".into())).is_err());
        assert!(PairedDataset::read_csv("x0,z0\n1,oops\n".as_bytes(), Provenance::Derived("t".into())).is_err());
    }

    #[test]
    fn mismatched_rows_rejected() {
        let r = PairedDataset::new(Matrix::zeros(3, 1), Matrix::zeros(2, 1), Provenance::Derived("t".into()));
        assert!(r.is_err());
    }
}
