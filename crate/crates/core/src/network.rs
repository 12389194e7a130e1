//! Weighted undirected networks: storage, edge-list ingestion, and the small
//! transformations (regularization, binarization, degrees) used everywhere
//! else.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::ops::Deref;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Symmetric, nonnegative, finite `n x n` weight matrix with `n >= 2`.
///
/// Self-loops are allowed and live on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAdjacency {
    weights: DMatrix<f64>,
}

impl WeightedAdjacency {
    /// Validates and wraps a dense matrix. Symmetry is checked exactly.
    pub fn from_matrix(weights: DMatrix<f64>) -> Result<Self> {
        let n = weights.nrows();
        if weights.ncols() != n {
            return Err(Error::InvalidMatrix(format!(
                "expected a square matrix, got {}x{}",
                n,
                weights.ncols()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidMatrix(format!("need at least 2 nodes, got {n}")));
        }
        for j in 0..n {
            for i in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i}, {j}) = {w} is not a finite nonnegative weight"
                    )));
                }
                if i < j && w != weights[(j, i)] {
                    return Err(Error::InvalidMatrix(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { weights })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.weights
    }

    /// Row sums, diagonal included.
    pub fn degrees(&self) -> DegreeVector {
        let n = self.n();
        DegreeVector((0..n).map(|i| self.weights.column(i).iter().sum::<f64>()).collect())
    }

    /// `A + tau * J`: every entry, diagonal included, shifted by `tau`.
    pub fn regularize(&self, tau: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "regularization tau must be a finite nonnegative number, got {tau}"
            )));
        }
        Ok(Self {
            weights: self.weights.map(|w| w + tau),
        })
    }

    /// Replaces every positive weight with 1.
    pub fn binarize(&self) -> Self {
        Self {
            weights: self.weights.map(|w| if w > 0.0 { 1.0 } else { 0.0 }),
        }
    }

    pub fn without_self_loops(&self) -> Self {
        let mut weights = self.weights.clone();
        weights.fill_diagonal(0.0);
        Self { weights }
    }

    pub fn has_self_loops(&self) -> bool {
        self.weights.diagonal().iter().any(|&w| w != 0.0)
    }

    /// Number of nonzero entries in the upper triangle, diagonal included.
    pub fn edge_count(&self) -> usize {
        let n = self.n();
        (0..n)
            .map(|j| (0..=j).filter(|&i| self.weights[(i, j)] != 0.0).count())
            .sum()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.min()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.max()
    }
}

/// Degrees `d_i = sum_j A_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector(Vec<f64>);

impl DegreeVector {
    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for DegreeVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// How node identifiers in an edge list map onto matrix indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Indexing {
    #[default]
    ZeroBased,
    OneBased,
    /// Arbitrary tokens, numbered in order of first appearance.
    Labels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DuplicatePolicy {
    #[default]
    Accumulate,
    Reject,
}

/// Parsing options for [`load_edge_list`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EdgeListFormat {
    pub indexing: Indexing,
    /// Declared node count. When absent, a `# nodes: N` header is honoured,
    /// otherwise the count is the largest id seen plus one.
    pub nodes: Option<usize>,
    pub duplicates: DuplicatePolicy,
}

impl EdgeListFormat {
    pub fn zero_based() -> Self {
        Self::default()
    }

    pub fn one_based() -> Self {
        Self {
            indexing: Indexing::OneBased,
            ..Self::default()
        }
    }

    pub fn with_nodes(mut self, n: usize) -> Self {
        self.nodes = Some(n);
        self
    }

    pub fn rejecting_duplicates(mut self) -> Self {
        self.duplicates = DuplicatePolicy::Reject;
        self
    }
}

/// A loaded network together with the label of every node index.
#[derive(Debug, Clone)]
pub struct LoadedNetwork {
    pub adjacency: WeightedAdjacency,
    pub labels: Vec<String>,
}

struct Record {
    line: usize,
    u: usize,
    v: usize,
    weight: f64,
}

fn parse_nodes_header(comment: &str) -> Option<usize> {
    let rest = comment.trim_start_matches('#').trim();
    let value = rest.strip_prefix("nodes:")?;
    value.trim().parse().ok()
}

/// Reads a whitespace-separated `u v w` edge list.
///
/// Lines starting with `#` are comments; LF and CRLF endings are accepted.
/// Missing pairs are zero, duplicate records accumulate (or are rejected, see
/// [`DuplicatePolicy`]) and a self-loop record adds its weight to the
/// diagonal once.
pub fn load_edge_list<R: BufRead>(source: R, format: &EdgeListFormat) -> Result<LoadedNetwork> {
    let mut header_nodes = None;
    let mut records = Vec::new();
    let mut label_index: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut max_index: Option<usize> = None;

    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text.starts_with('#') {
            if header_nodes.is_none() {
                header_nodes = parse_nodes_header(text);
            }
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 fields `u v w`, found {}", fields.len()),
            });
        }
        let weight: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("cannot parse weight `{}`", fields[2]),
        })?;
        if weight.is_nan() || weight.is_infinite() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("weight `{}` is not finite", fields[2]),
            });
        }
        if weight < 0.0 {
            return Err(Error::NegativeWeight { line: line_no, weight });
        }

        let mut resolve = |token: &str| -> Result<usize> {
            match format.indexing {
                Indexing::Labels => {
                    let next = label_index.len();
                    let index = *label_index.entry(token.to_string()).or_insert_with(|| {
                        labels.push(token.to_string());
                        next
                    });
                    Ok(index)
                }
                Indexing::ZeroBased | Indexing::OneBased => {
                    let id: i64 = token.parse().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("cannot parse node id `{token}`"),
                    })?;
                    let offset = if format.indexing == Indexing::OneBased { 1 } else { 0 };
                    let index = id - offset;
                    let declared = format.nodes.unwrap_or(usize::MAX);
                    if index < 0 || index as u64 >= declared as u64 {
                        return Err(Error::NodeOutOfRange {
                            line: line_no,
                            id,
                            n: format.nodes.unwrap_or(0),
                        });
                    }
                    Ok(index as usize)
                }
            }
        };
        let u = resolve(fields[0])?;
        let v = resolve(fields[1])?;
        max_index = Some(max_index.map_or(u.max(v), |m: usize| m.max(u).max(v)));
        records.push(Record {
            line: line_no,
            u,
            v,
            weight,
        });
    }

    let inferred = max_index.map_or(0, |m| m + 1);
    let n = match (format.nodes, header_nodes) {
        (Some(n), _) => n,
        (None, Some(h)) if h >= inferred => h,
        (None, Some(h)) => {
            return Err(Error::Parse {
                line: 0,
                message: format!("header declares {h} nodes but ids reach {}", inferred - 1),
            })
        }
        (None, None) => inferred,
    };
    if format.indexing == Indexing::Labels {
        if let Some(declared) = format.nodes {
            if labels.len() > declared {
                return Err(Error::NodeOutOfRange {
                    line: 0,
                    id: labels.len() as i64,
                    n: declared,
                });
            }
        }
        while labels.len() < n {
            labels.push(format!("_{}", labels.len()));
        }
    } else {
        let offset = usize::from(format.indexing == Indexing::OneBased);
        labels = (0..n).map(|i| (i + offset).to_string()).collect();
    }
    if n < 2 {
        return Err(Error::InvalidMatrix(format!("need at least 2 nodes, got {n}")));
    }

    let mut weights = DMatrix::zeros(n, n);
    let mut seen = HashSet::new();
    for rec in records {
        let (a, b) = (rec.u.min(rec.v), rec.u.max(rec.v));
        if format.duplicates == DuplicatePolicy::Reject && !seen.insert((a, b)) {
            return Err(Error::DuplicateEdge {
                line: rec.line,
                u: a,
                v: b,
            });
        }
        weights[(a, b)] += rec.weight;
        if a != b {
            weights[(b, a)] += rec.weight;
        }
    }
    Ok(LoadedNetwork {
        adjacency: WeightedAdjacency::from_matrix(weights)?,
        labels,
    })
}

/// Writes the upper triangle (diagonal included) as an edge list, preceded
/// by a `# nodes: N` header. Weights use the shortest representation that
/// parses back to the same `f64`.
pub fn write_edge_list<W: Write>(a: &WeightedAdjacency, indexing: Indexing, mut sink: W) -> Result<()> {
    let offset = usize::from(indexing == Indexing::OneBased);
    let n = a.n();
    writeln!(sink, "# nodes: {n}")?;
    for i in 0..n {
        for j in i..n {
            let w = a.weights[(i, j)];
            if w != 0.0 {
                writeln!(sink, "{}\t{}\t{}", i + offset, j + offset, w)?;
            }
        }
    }
    Ok(())
}

/// Reads a dense matrix from headerless CSV.
pub fn read_matrix_csv<R: std::io::Read>(source: R) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(source);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: line + 1,
                    message: format!("cannot parse `{f}` as a number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidMatrix("CSV matrix is not square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}
