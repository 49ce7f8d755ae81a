//! Base distances, core distances and the mutual reachability transform.

use std::io::{Read, Write};

use thiserror::Error;

use crate::embedding_io::EmbeddingSet;

pub const DMX_MAGIC: &[u8; 4] = b"DMX1";

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("distance between points {i} and {j} is not finite")]
    NonFinite { i: usize, j: usize },
    #[error("minPts = {min_pts} exceeds n - 1 = {max}")]
    MinPtsTooLarge { min_pts: usize, max: usize },
    #[error("shape mismatch: matrix has {matrix} points, core distances have {core}")]
    Shape { matrix: usize, core: usize },
    #[error("expected a base-metric matrix")]
    NotBase,
    #[error("malformed matrix dump: {0}")]
    Dump(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Base,
    MutualReachability { min_pts: usize },
}

/// Dense symmetric distance matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
    kind: MetricKind,
}

impl DistanceMatrix {
    /// Wraps a row-major `n*n` buffer. The caller guarantees symmetry.
    pub fn from_raw(n: usize, values: Vec<f64>, kind: MetricKind) -> Self {
        assert_eq!(values.len(), n * n, "matrix buffer must hold n*n values");
        Self { n, values, kind }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Debug dump: `DMX1`, n as u32 LE, then row-major f64 LE.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(DMX_MAGIC)?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a dump back; the metric tag is not persisted and comes back as `Base`.
    pub fn read_dump<R: Read>(mut r: R) -> Result<Self, MetricError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| MetricError::Dump(e.to_string()))?;
        if bytes.len() < 8 || &bytes[..4] != DMX_MAGIC {
            return Err(MetricError::Dump("missing DMX1 magic".into()));
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if bytes.len() != 8 + n * n * 8 {
            return Err(MetricError::Dump("body length does not match n".into()));
        }
        let values = bytes[8..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self::from_raw(n, values, MetricKind::Base))
    }
}

/// Euclidean distance matrix over the rows of `set`.
pub fn pairwise_distance(set: &EmbeddingSet) -> Result<DistanceMatrix, MetricError> {
    let n = set.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        let a = set.row(i);
        for j in (i + 1)..n {
            let b = set.row(j);
            let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            let d = sq.sqrt();
            if !d.is_finite() {
                return Err(MetricError::NonFinite { i, j });
            }
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix::from_raw(n, values, MetricKind::Base))
}

/// Distance from each point to its `min_pts`-th nearest other point.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreDistances {
    pub values: Vec<f64>,
    pub min_pts: usize,
}

impl CoreDistances {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            min_pts: 0,
        }
    }
}

/// The query point itself is never counted as its own neighbour.
pub fn core_distances(d: &DistanceMatrix, min_pts: usize) -> Result<CoreDistances, MetricError> {
    if d.kind() != MetricKind::Base {
        return Err(MetricError::NotBase);
    }
    let n = d.len();
    if min_pts > n.saturating_sub(1) {
        return Err(MetricError::MinPtsTooLarge {
            min_pts,
            max: n.saturating_sub(1),
        });
    }
    if min_pts == 0 {
        return Ok(CoreDistances::zeros(n));
    }
    let mut scratch = Vec::with_capacity(n.saturating_sub(1));
    let values = (0..n)
        .map(|i| {
            scratch.clear();
            scratch.extend(
                d.row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &v)| v),
            );
            let (_, kth, _) = scratch.select_nth_unstable_by(min_pts - 1, f64::total_cmp);
            *kth
        })
        .collect();
    Ok(CoreDistances { values, min_pts })
}

/// `max(core[i], core[j], d[i][j])` off the diagonal, zero on it.
pub fn mutual_reachability(
    d: &DistanceMatrix,
    core: &CoreDistances,
) -> Result<DistanceMatrix, MetricError> {
    if d.kind() != MetricKind::Base {
        return Err(MetricError::NotBase);
    }
    let n = d.len();
    if core.len() != n {
        return Err(MetricError::Shape {
            matrix: n,
            core: core.len(),
        });
    }
    let mut values = d.as_slice().to_vec();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = &mut values[i * n + j];
                *v = v.max(core.values[i]).max(core.values[j]);
            }
        }
    }
    Ok(DistanceMatrix::from_raw(
        n,
        values,
        MetricKind::MutualReachability {
            min_pts: core.min_pts,
        },
    ))
}
