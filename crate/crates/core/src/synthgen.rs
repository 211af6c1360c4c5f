//! Synthetic outlier benchmarks: four cluster families, dimension,
//! irrelevant-variable and volume sweeps.
//!
//! Normal points are laid out in the informative subspace and then shrunk
//! toward the origin by `LAYOUT_SCALE`, so every informative dimension has
//! a normal mean away from the outlier mean; outliers are uniform over the
//! unit box. Irrelevant dimensions are appended as
//! uniform noise for every row, then each column is min-max normalized.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Provenance};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    SingleCluster,
    MultiCluster,
    MultiDensity,
    MultiShaped,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::SingleCluster,
        Family::MultiCluster,
        Family::MultiDensity,
        Family::MultiShaped,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::SingleCluster => "single-cluster",
            Family::MultiCluster => "multi-cluster",
            Family::MultiDensity => "multi-density",
            Family::MultiShaped => "multi-shaped",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown family `{s}`")))
    }
}

fn default_rate() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub family: Family,
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub irrelevant_ratio: f64,
    #[serde(default = "default_rate")]
    pub outlier_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(family: Family, n: usize, d: usize) -> Self {
        Self {
            family,
            n,
            d,
            irrelevant_ratio: 0.0,
            outlier_rate: default_rate(),
            seed: 0,
        }
    }

    pub fn outlier_count(&self) -> usize {
        (self.n as f64 * self.outlier_rate).floor() as usize
    }

    /// `floor(d · ratio)`, with a small guard against ratios like 0.3 landing just below an integer.
    pub fn noise_dims(&self) -> usize {
        (self.d as f64 * self.irrelevant_ratio + 1e-9).floor() as usize
    }

    pub fn informative_dims(&self) -> usize {
        self.d - self.noise_dims().min(self.d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("d must be positive"));
        }
        if !(0.0..1.0).contains(&self.irrelevant_ratio) {
            return Err(Error::invalid("irrelevant_ratio must lie in [0, 1)"));
        }
        if !(self.outlier_rate > 0.0 && self.outlier_rate < 1.0) {
            return Err(Error::invalid("outlier_rate must lie in (0, 1)"));
        }
        let n_out = self.outlier_count();
        if n_out < 1 {
            return Err(Error::invalid(format!(
                "n = {} at rate {} yields no outliers",
                self.n, self.outlier_rate
            )));
        }
        if n_out >= self.n {
            return Err(Error::invalid("no normal points left"));
        }
        if self.noise_dims() >= self.d {
            return Err(Error::invalid("at least one informative dimension is required"));
        }
        Ok(())
    }
}

/// Gaussian blob with isotropic spread.
struct Blob {
    center: Vec<f64>,
    std: f64,
}

impl Blob {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.center
            .iter()
            .map(|c| c + self.std * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

/// Evenly spread component centers; 2-d layouts are fixed, extra informative
/// dimensions get seeded coordinates in [0.25, 0.75].
fn centers(planar: &[[f64; 2]], dims: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let c = planar.len();
    planar
        .iter()
        .enumerate()
        .map(|(i, p)| match dims {
            1 => vec![(i + 1) as f64 / (c + 1) as f64],
            _ => {
                let mut v = vec![p[0], p[1]];
                v.extend((2..dims).map(|_| rng.random_range(0.25..0.75)));
                v
            }
        })
        .collect()
}

fn split_counts(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| total / parts + usize::from(i < total % parts))
        .collect()
}

fn blobs_points(blobs: &[Blob], count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    for (blob, c) in blobs.iter().zip(split_counts(count, blobs.len())) {
        for _ in 0..c {
            out.push(blob.sample(rng));
        }
    }
    out
}

fn normal_points(family: Family, count: usize, dims: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    match family {
        Family::SingleCluster => {
            let blobs = [Blob {
                center: vec![0.5; dims],
                std: 0.06,
            }];
            blobs_points(&blobs, count, rng)
        }
        Family::MultiCluster => {
            let grid = [[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]];
            let blobs: Vec<Blob> = centers(&grid, dims, rng)
                .into_iter()
                .map(|center| Blob { center, std: 0.05 })
                .collect();
            blobs_points(&blobs, count, rng)
        }
        Family::MultiDensity => {
            let layout = [[0.2, 0.75], [0.75, 0.75], [0.5, 0.3]];
            let blobs: Vec<Blob> = centers(&layout, dims, rng)
                .into_iter()
                .zip([0.01, 0.03, 0.09])
                .map(|(center, std)| Blob { center, std })
                .collect();
            blobs_points(&blobs, count, rng)
        }
        Family::MultiShaped if dims == 2 => shaped_planar(count, rng),
        Family::MultiShaped => {
            let layout = [[0.2, 0.2], [0.2, 0.8], [0.5, 0.5], [0.8, 0.2], [0.8, 0.8]];
            let blobs: Vec<Blob> = centers(&layout, dims, rng)
                .into_iter()
                .zip([0.02, 0.03, 0.04, 0.05, 0.06])
                .map(|(center, std)| Blob { center, std })
                .collect();
            blobs_points(&blobs, count, rng)
        }
    }
}

/// Ring, line segment, tight blob, wide blob and arc in the unit square.
fn shaped_planar(count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let counts = split_counts(count, 5);
    let mut out = Vec::with_capacity(count);
    let gauss = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);
    for _ in 0..counts[0] {
        let a = rng.random_range(0.0..2.0 * PI);
        let r = 0.12 + 0.01 * gauss(rng);
        out.push(vec![0.25 + r * a.cos(), 0.75 + r * a.sin()]);
    }
    for _ in 0..counts[1] {
        let t = rng.random_range(0.0..1.0);
        let off = 0.01 * gauss(rng) / 2f64.sqrt();
        out.push(vec![0.55 + 0.35 * t + off, 0.55 + 0.35 * t - off]);
    }
    for _ in 0..counts[2] {
        out.push(vec![0.85 + 0.02 * gauss(rng), 0.15 + 0.02 * gauss(rng)]);
    }
    for _ in 0..counts[3] {
        out.push(vec![0.2 + 0.04 * gauss(rng), 0.2 + 0.04 * gauss(rng)]);
    }
    for _ in 0..counts[4] {
        let a = rng.random_range(PI / 6.0..5.0 * PI / 6.0);
        let r = 0.2 + 0.01 * gauss(rng);
        out.push(vec![0.55 + r * a.cos(), 0.15 + r * a.sin()]);
    }
    out
}

/// Shrink factor applied to normal layouts inside the outlier box.
pub const LAYOUT_SCALE: f64 = 0.55;

pub fn gen_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_out = spec.outlier_count();
    let n_norm = spec.n - n_out;
    let inf = spec.informative_dims();
    let noise = spec.d - inf;

    let mut rows: Vec<(Vec<f64>, u8)> = normal_points(spec.family, n_norm, inf, &mut rng)
        .into_iter()
        .map(|p| (p.into_iter().map(|v| LAYOUT_SCALE * v).collect(), 0))
        .collect();
    for _ in 0..n_out {
        let p = (0..inf).map(|_| rng.random::<f64>()).collect();
        rows.push((p, 1));
    }
    for (p, _) in rows.iter_mut() {
        p.extend((0..noise).map(|_| rng.random::<f64>()));
    }
    rows.shuffle(&mut rng);

    let (points, labels): (Vec<Vec<f64>>, Vec<u8>) = rows.into_iter().unzip();
    let raw = Matrix::from_rows(&points)?;
    Dataset::from_raw(raw, Some(labels), Provenance::Synthetic(spec.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Dimension,
    Irrelevant,
    Volume,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dimension" => Ok(SweepAxis::Dimension),
            "irrelevant" => Ok(SweepAxis::Irrelevant),
            "volume" => Ok(SweepAxis::Volume),
            other => Err(Error::invalid(format!("unknown sweep axis `{other}`"))),
        }
    }
}

/// Number of datasets in the volume sweep.
pub const VOLUME_STEPS: usize = 19;

/// Log-spaced sizes from 1,000 to 100,000.
pub fn volume_sizes() -> Vec<usize> {
    (0..VOLUME_STEPS)
        .map(|i| (1000.0 * 100f64.powf(i as f64 / (VOLUME_STEPS - 1) as f64)).round() as usize)
        .collect()
}

/// Specs for one benchmark axis, all on the multi-density family. Outlier
/// rate, seed and (except on the volume axis) `n` come from `base`.
pub fn sweep_specs(axis: SweepAxis, base: &SynthSpec) -> Vec<SynthSpec> {
    let md = SynthSpec {
        family: Family::MultiDensity,
        ..base.clone()
    };
    match axis {
        SweepAxis::Dimension => (1..=10)
            .map(|i| SynthSpec {
                d: 10 * i,
                irrelevant_ratio: 0.0,
                ..md.clone()
            })
            .collect(),
        SweepAxis::Irrelevant => (0..10)
            .map(|i| SynthSpec {
                d: 10,
                irrelevant_ratio: i as f64 / 10.0,
                ..md.clone()
            })
            .collect(),
        SweepAxis::Volume => volume_sizes()
            .into_iter()
            .map(|n| SynthSpec {
                n,
                d: 10,
                irrelevant_ratio: 0.0,
                ..md.clone()
            })
            .collect(),
    }
}
