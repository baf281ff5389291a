//! Distributions over sketching matrices `S` and the bound quantities they induce.
//!
//! A draw is never materialised as a matrix: [`SampleOp`] keeps the selected
//! row indices and their scaling, which is all `S^T v` and `A^T S w` need.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::spectral::largest_eigenvalue;

/// Subset enumeration for the uniform-block bound is exact up to this many subsets.
pub const EXACT_SUBSET_LIMIT: u64 = 100_000;

/// Number of random subsets inspected when enumeration is too expensive.
pub const SAMPLED_SUBSETS: usize = 2_000;

/// Textual scheme selector: `row`, `uniform:<p>`, `partition:<p>` or `identity`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeSpec {
    Row,
    Uniform(usize),
    Partition(usize),
    Identity,
}

impl SchemeSpec {
    /// Block size of the scheme (1 for single rows, 0 for the identity).
    pub fn block_size(&self) -> Option<usize> {
        match self {
            SchemeSpec::Row => Some(1),
            SchemeSpec::Uniform(p) | SchemeSpec::Partition(p) => Some(*p),
            SchemeSpec::Identity => None,
        }
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeSpec::Row => write!(f, "row"),
            SchemeSpec::Uniform(p) => write!(f, "uniform:{p}"),
            SchemeSpec::Partition(p) => write!(f, "partition:{p}"),
            SchemeSpec::Identity => write!(f, "identity"),
        }
    }
}

impl FromStr for SchemeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let block = |p: &str| -> Result<usize> {
            let p: usize = p
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad block size in {s:?}")))?;
            if p == 0 {
                return Err(Error::InvalidParameter(format!("block size must be >= 1 in {s:?}")));
            }
            Ok(p)
        };
        match s.split_once(':') {
            None if s == "row" => Ok(SchemeSpec::Row),
            None if s == "identity" => Ok(SchemeSpec::Identity),
            Some(("uniform", p)) => Ok(SchemeSpec::Uniform(block(p)?)),
            Some(("partition", p)) => Ok(SchemeSpec::Partition(block(p)?)),
            _ => Err(Error::InvalidParameter(format!(
                "unknown sampling scheme {s:?} (expected row, uniform:<p>, partition:<p> or identity)"
            ))),
        }
    }
}

impl Serialize for SchemeSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SchemeSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A partition of `0..m` into consecutive chunks of a random permutation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates that `blocks` partitions `0..m`.
    pub fn from_blocks(m: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; m];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidParameter("empty partition block".into()));
            }
            for &i in block {
                if i >= m || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidParameter(format!(
                        "row {i} is out of range or appears twice in the partition"
                    )));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameter("partition does not cover every row".into()));
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Splits a seeded uniform permutation of `0..m` into `ceil(m/p)` blocks; all
/// but the last have exactly `p` rows.
pub fn build_partition(m: usize, p: usize, seed: u64) -> Result<Partition> {
    if p == 0 || p > m {
        return Err(Error::InvalidBlockSize { block: p, rows: m });
    }
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let blocks = perm.chunks(p).map(<[usize]>::to_vec).collect();
    Ok(Partition { blocks })
}

/// Per-row scaling of a sampled block.
#[derive(Clone, Debug, PartialEq)]
pub enum Scale {
    Uniform(f64),
    PerRow(Vec<f64>),
}

/// One realised sketching matrix `S`.
#[derive(Clone, Debug, PartialEq)]
pub enum SampleOp {
    /// `S = I`.
    Identity,
    /// `S = I_{:,J} diag(scale)`, with `J = rows` in order.
    Rows { rows: Vec<usize>, scale: Scale },
}

impl SampleOp {
    pub fn rows(rows: Vec<usize>, scale: f64) -> Self {
        SampleOp::Rows {
            rows,
            scale: Scale::Uniform(scale),
        }
    }

    pub fn weighted_rows(rows: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if rows.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: weights.len(),
            });
        }
        Ok(SampleOp::Rows {
            rows,
            scale: Scale::PerRow(weights),
        })
    }

    /// Number of columns of `S` (the sketch dimension), given `m` rows.
    pub fn sketch_dim(&self, m: usize) -> usize {
        match self {
            SampleOp::Identity => m,
            SampleOp::Rows { rows, .. } => rows.len(),
        }
    }

    #[inline]
    fn weight(scale: &Scale, k: usize) -> f64 {
        match scale {
            Scale::Uniform(s) => *s,
            Scale::PerRow(w) => w[k],
        }
    }

    /// `S^T v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        match self {
            SampleOp::Identity => v.to_vec(),
            SampleOp::Rows { rows, scale } => rows
                .iter()
                .enumerate()
                .map(|(k, &i)| Self::weight(scale, k) * v[i])
                .collect(),
        }
    }

    /// `S^T (A x - b)`, touching only the selected rows.
    pub fn sketch_residual(&self, a: &Matrix, x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        self.sketch_residual_into(a, x, b, &mut out);
        out
    }

    pub fn sketch_residual_into(&self, a: &Matrix, x: &[f64], b: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match self {
            SampleOp::Identity => out.extend((0..a.rows()).map(|i| a.row_dot(i, x) - b[i])),
            SampleOp::Rows { rows, scale } => out.extend(
                rows.iter()
                    .enumerate()
                    .map(|(k, &i)| Self::weight(scale, k) * (a.row_dot(i, x) - b[i])),
            ),
        }
    }

    /// `A^T S w`, touching only the selected rows.
    pub fn pullback(&self, a: &Matrix, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.cols()];
        self.pullback_into(a, w, &mut out);
        out
    }

    /// Overwrites `out` with `A^T S w`.
    pub fn pullback_into(&self, a: &Matrix, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match self {
            SampleOp::Identity => {
                for (i, &wi) in w.iter().enumerate() {
                    a.add_row_scaled(i, wi, out);
                }
            }
            SampleOp::Rows { rows, scale } => {
                for (k, &i) in rows.iter().enumerate() {
                    a.add_row_scaled(i, Self::weight(scale, k) * w[k], out);
                }
            }
        }
    }

    /// Dense `m x q` matrix of `S`, for small-instance checks.
    pub fn to_dense(&self, m: usize) -> DMatrix<f64> {
        match self {
            SampleOp::Identity => DMatrix::identity(m, m),
            SampleOp::Rows { rows, scale } => {
                let mut s = DMatrix::zeros(m, rows.len());
                for (k, &i) in rows.iter().enumerate() {
                    s[(i, k)] = Self::weight(scale, k);
                }
                s
            }
        }
    }
}

/// `S^T v` as a free function.
pub fn apply_sample_transpose(sample: &SampleOp, v: &[f64]) -> Result<Vec<f64>> {
    check_sample(sample, v.len())?;
    Ok(sample.apply_transpose(v))
}

/// `A^T S w` as a free function.
pub fn pullback(sample: &SampleOp, a: &Matrix, w: &[f64]) -> Result<Vec<f64>> {
    check_sample(sample, a.rows())?;
    let q = sample.sketch_dim(a.rows());
    if w.len() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            found: w.len(),
        });
    }
    Ok(sample.pullback(a, w))
}

fn check_sample(sample: &SampleOp, m: usize) -> Result<()> {
    if let SampleOp::Rows { rows, scale } = sample {
        if let Some(&bad) = rows.iter().find(|&&i| i >= m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: bad + 1,
            });
        }
        if let Scale::PerRow(w) = scale {
            if w.len() != rows.len() {
                return Err(Error::DimensionMismatch {
                    expected: rows.len(),
                    found: w.len(),
                });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
enum Kind {
    SingleRowWeighted {
        dist: WeightedIndex<f64>,
        inv_norms: Vec<f64>,
    },
    UniformBlock {
        block: usize,
        scale: f64,
    },
    PartitionBlock {
        partition: Partition,
        dist: WeightedIndex<f64>,
        probabilities: Vec<f64>,
        inv_fro: Vec<f64>,
    },
    FixedIdentity,
}

/// A distribution over sketching matrices, prepared for a specific matrix.
#[derive(Clone, Debug)]
pub struct SamplingScheme {
    spec: SchemeSpec,
    rows: usize,
    kind: Kind,
}

impl SamplingScheme {
    /// Row `i` with probability `||A_i||^2 / ||A||_F^2`, `S = e_i / ||A_i||`.
    pub fn single_row(a: &Matrix) -> Result<Self> {
        let dist = WeightedIndex::new(a.row_norms_sq()).map_err(|_| Error::ZeroMatrix)?;
        let inv_norms = a
            .row_norms_sq()
            .iter()
            .map(|&n| if n > 0.0 { 1.0 / n.sqrt() } else { 0.0 })
            .collect();
        Ok(Self {
            spec: SchemeSpec::Row,
            rows: a.rows(),
            kind: Kind::SingleRowWeighted { dist, inv_norms },
        })
    }

    /// `p` distinct rows uniformly at random, `S = sqrt(m/p) I_{:,J} / ||A||_F`.
    pub fn uniform_block(a: &Matrix, p: usize) -> Result<Self> {
        let m = a.rows();
        if p == 0 || p > m {
            return Err(Error::InvalidBlockSize { block: p, rows: m });
        }
        if a.fro_norm_sq() == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        let scale = (m as f64 / p as f64).sqrt() / a.fro_norm_sq().sqrt();
        Ok(Self {
            spec: SchemeSpec::Uniform(p),
            rows: m,
            kind: Kind::UniformBlock { block: p, scale },
        })
    }

    /// Block `I_i` of a fixed partition with probability `||A_{I_i}||_F^2 / ||A||_F^2`,
    /// `S = I_{:,I_i} / ||A_{I_i}||_F`.
    pub fn partition_block(a: &Matrix, partition: Partition) -> Result<Self> {
        let m = a.rows();
        let covered: usize = partition.blocks.iter().map(Vec::len).sum();
        if covered != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: covered,
            });
        }
        let norms = a.row_norms_sq();
        let block_fro: Vec<f64> = partition
            .blocks
            .iter()
            .map(|b| b.iter().map(|&i| norms[i]).sum())
            .collect();
        let total: f64 = block_fro.iter().sum();
        if total == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        let dist = WeightedIndex::new(&block_fro).map_err(|_| Error::ZeroMatrix)?;
        let probabilities = block_fro.iter().map(|f| f / total).collect();
        let inv_fro = block_fro
            .iter()
            .map(|&f| if f > 0.0 { 1.0 / f.sqrt() } else { 0.0 })
            .collect();
        let p = partition.blocks.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Self {
            spec: SchemeSpec::Partition(p),
            rows: m,
            kind: Kind::PartitionBlock {
                partition,
                dist,
                probabilities,
                inv_fro,
            },
        })
    }

    pub fn identity(a: &Matrix) -> Self {
        Self {
            spec: SchemeSpec::Identity,
            rows: a.rows(),
            kind: Kind::FixedIdentity,
        }
    }

    /// Prepares a scheme from its textual form; `seed` drives the partition permutation.
    pub fn from_spec(spec: SchemeSpec, a: &Matrix, seed: u64) -> Result<Self> {
        match spec {
            SchemeSpec::Row => Self::single_row(a),
            SchemeSpec::Uniform(p) => Self::uniform_block(a, p),
            SchemeSpec::Partition(p) => Self::partition_block(a, build_partition(a.rows(), p, seed)?),
            SchemeSpec::Identity => Ok(Self::identity(a)),
        }
    }

    pub fn spec(&self) -> SchemeSpec {
        self.spec
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn partition(&self) -> Option<&Partition> {
        match &self.kind {
            Kind::PartitionBlock { partition, .. } => Some(partition),
            _ => None,
        }
    }

    /// Selection probabilities of the partition blocks, if this is a partition scheme.
    pub fn block_probabilities(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::PartitionBlock { probabilities, .. } => Some(probabilities),
            _ => None,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.kind, Kind::FixedIdentity)
    }

    /// Number of distinct draws needed to cover every row once.
    pub fn support_blocks(&self) -> usize {
        match &self.kind {
            Kind::SingleRowWeighted { .. } => self.rows,
            Kind::UniformBlock { block, .. } => self.rows.div_ceil(*block),
            Kind::PartitionBlock { partition, .. } => partition.len(),
            Kind::FixedIdentity => 1,
        }
    }

    /// A sampler with its own random stream.
    pub fn sampler(&self, seed: u64) -> Sampler<'_> {
        Sampler {
            scheme: self,
            rng: ChaCha8Rng::seed_from_u64(seed),
            perm: (0..self.rows).collect(),
        }
    }

    fn draw_with<R: Rng>(&self, rng: &mut R, perm: &mut [usize]) -> SampleOp {
        match &self.kind {
            Kind::SingleRowWeighted { dist, inv_norms } => {
                let i = dist.sample(rng);
                SampleOp::rows(vec![i], inv_norms[i])
            }
            Kind::UniformBlock { block, scale } => {
                // Partial Fisher-Yates: the first `block` slots become a uniform subset.
                let m = perm.len();
                for k in 0..*block {
                    let j = rng.gen_range(k..m);
                    perm.swap(k, j);
                }
                SampleOp::rows(perm[..*block].to_vec(), *scale)
            }
            Kind::PartitionBlock {
                partition,
                dist,
                inv_fro,
                ..
            } => {
                let i = dist.sample(rng);
                SampleOp::rows(partition.blocks[i].clone(), inv_fro[i])
            }
            Kind::FixedIdentity => SampleOp::Identity,
        }
    }
}

/// Draws one sketch from `scheme` using `rng`.
pub fn draw_sample<R: Rng>(scheme: &SamplingScheme, rng: &mut R) -> SampleOp {
    let mut perm: Vec<usize> = match scheme.kind {
        Kind::UniformBlock { .. } => (0..scheme.rows).collect(),
        _ => Vec::new(),
    };
    scheme.draw_with(rng, &mut perm)
}

/// A seeded stream of draws from one scheme.
pub struct Sampler<'a> {
    scheme: &'a SamplingScheme,
    rng: ChaCha8Rng,
    perm: Vec<usize>,
}

impl Sampler<'_> {
    pub fn draw(&mut self) -> SampleOp {
        self.scheme.draw_with(&mut self.rng, &mut self.perm)
    }

    pub fn scheme(&self) -> &SamplingScheme {
        self.scheme
    }
}

/// `E[S S^T]` for a bounded scheme, which for every shipped scheme is a multiple of `I_m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedGram {
    pub dim: usize,
    pub scale: f64,
}

impl ExpectedGram {
    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * self.scale
    }
}

pub fn expected_gram(scheme: &SamplingScheme, a: &Matrix) -> ExpectedGram {
    let scale = match scheme.kind {
        Kind::FixedIdentity => 1.0,
        _ => 1.0 / a.fro_norm_sq(),
    };
    ExpectedGram {
        dim: a.rows(),
        scale,
    }
}

/// `sup_S lambda_max(A^T S S^T A)` over the support of a scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaMax {
    pub value: f64,
    /// Set when the supremum was estimated from sampled subsets.
    pub estimate: bool,
}

/// `lambda_max(A_J^T A_J)`, through whichever Gram matrix is smaller.
fn block_lambda_max(a: &Matrix, rows: &[usize]) -> f64 {
    if rows.len() <= a.cols() {
        largest_eigenvalue(&a.row_gram(rows))
    } else {
        let mut g = DMatrix::zeros(a.cols(), a.cols());
        let mut row = vec![0.0; a.cols()];
        for &i in rows {
            row.iter_mut().for_each(|v| *v = 0.0);
            a.add_row_scaled(i, 1.0, &mut row);
            for (c, rc) in row.iter().enumerate() {
                if *rc != 0.0 {
                    for (d, rd) in row.iter().enumerate() {
                        g[(c, d)] += rc * rd;
                    }
                }
            }
        }
        largest_eigenvalue(&g)
    }
}

/// `C(m, p)`, saturating at `u64::MAX`.
pub fn binomial(m: usize, p: usize) -> u64 {
    if p > m {
        return 0;
    }
    let p = p.min(m - p);
    let mut acc: u128 = 1;
    for k in 0..p {
        acc = acc * (m - k) as u128 / (k + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Visits every `p`-subset of `0..m` in lexicographic order.
fn for_each_subset(m: usize, p: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..p).collect();
    loop {
        visit(&idx);
        let Some(k) = (0..p).rev().find(|&k| idx[k] != k + m - p) else {
            return;
        };
        idx[k] += 1;
        for l in k + 1..p {
            idx[l] = idx[l - 1] + 1;
        }
    }
}

pub fn lambda_max_sup(scheme: &SamplingScheme, a: &Matrix) -> LambdaMax {
    match &scheme.kind {
        Kind::SingleRowWeighted { .. } => LambdaMax {
            value: 1.0,
            estimate: false,
        },
        Kind::FixedIdentity => {
            let all: Vec<usize> = (0..a.rows()).collect();
            LambdaMax {
                value: block_lambda_max(a, &all),
                estimate: false,
            }
        }
        Kind::PartitionBlock {
            partition, inv_fro, ..
        } => {
            let value = partition
                .blocks
                .iter()
                .zip(inv_fro)
                .filter(|(_, s)| **s > 0.0)
                .map(|(block, s)| block_lambda_max(a, block) * s * s)
                .fold(0.0, f64::max);
            LambdaMax {
                value,
                estimate: false,
            }
        }
        Kind::UniformBlock { block, scale } => {
            let p = *block;
            let m = a.rows();
            let mut best = 0.0f64;
            let estimate = binomial(m, p) > EXACT_SUBSET_LIMIT;
            if estimate {
                let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a4b_da00_0001);
                let mut perm: Vec<usize> = (0..m).collect();
                for _ in 0..SAMPLED_SUBSETS {
                    if let SampleOp::Rows { rows, .. } = scheme.draw_with(&mut rng, &mut perm) {
                        best = best.max(block_lambda_max(a, &rows));
                    }
                }
            } else {
                for_each_subset(m, p, |rows| best = best.max(block_lambda_max(a, rows)));
            }
            LambdaMax {
                value: best * scale * scale,
                estimate,
            }
        }
    }
}
