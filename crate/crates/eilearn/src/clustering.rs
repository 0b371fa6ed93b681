//! Phase-level clustering: a numeric encoding of the training records, a
//! diagonal-covariance Gaussian mixture fitted by EM (default), a k-means
//! fallback, and the grouping of records into per-cluster training sets.

use crate::data::{AttrKind, Dataset, Instance, Value};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower bound applied to every mixture variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Default log-likelihood improvement below which EM stops.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Default iteration cap for both fitters.
pub const DEFAULT_MAX_ITERS: usize = 200;
/// Cluster parts smaller than this are merged into the nearest cluster.
pub const MIN_CLUSTER_SIZE: usize = 5;

const LOG_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cannot encode an empty dataset")]
    EmptyInput,
    #[error("component count must be >= 1")]
    ZeroComponents,
    #[error("{m} components exceed {rows} rows")]
    TooManyComponents { m: usize, rows: usize },
    #[error("non-finite value at row {row}, dim {dim}")]
    NonFinite { row: usize, dim: usize },
    #[error("dimension mismatch: model has {expected} dims, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Provenance and scaling of one encoded dimension. Numeric attributes map
/// to a single standardized dim; categorical attributes to one 0/1 dim per
/// category. A `std` of 0 marks a constant column, encoded as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DimEncoding {
    pub attr: usize,
    pub category: Option<usize>,
    pub mean: f64,
    pub std: f64,
}

/// Row-major numeric view of a dataset, with the per-dim encoding metadata
/// needed to project further instances into the same space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dims: usize,
    values: Vec<f64>,
    encoding: Vec<DimEncoding>,
}

impl FeatureMatrix {
    /// Wraps pre-encoded rows (identity encoding). All rows must share one
    /// length and every value must be finite.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ClusterError> {
        if rows.is_empty() {
            return Err(ClusterError::EmptyInput);
        }
        let dims = rows[0].len();
        let mut values = Vec::with_capacity(rows.len() * dims);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dims {
                return Err(ClusterError::DimensionMismatch {
                    expected: dims,
                    got: row.len(),
                });
            }
            for (d, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(ClusterError::NonFinite { row: r, dim: d });
                }
                values.push(v);
            }
        }
        let encoding = (0..dims)
            .map(|d| DimEncoding {
                attr: d,
                category: None,
                mean: 0.0,
                std: 1.0,
            })
            .collect();
        Ok(Self {
            rows: rows.len(),
            dims,
            values,
            encoding,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    pub fn encoding(&self) -> &[DimEncoding] {
        &self.encoding
    }

    /// Projects an instance into this matrix's feature space using the
    /// standardization fitted at encode time.
    pub fn encode_row(&self, x: &Instance) -> Vec<f64> {
        self.encoding
            .iter()
            .map(|e| match e.category {
                Some(cat) => match x.values[e.attr] {
                    Value::Cat(c) => f64::from(c == cat),
                    Value::Num(_) => panic!("one-hot dim over numeric value (schema mismatch)"),
                },
                None => match x.values[e.attr] {
                    Value::Num(v) => {
                        if e.std == 0.0 {
                            0.0
                        } else {
                            (v - e.mean) / e.std
                        }
                    }
                    Value::Cat(_) => panic!("numeric dim over categorical value (schema mismatch)"),
                },
            })
            .collect()
    }
}

/// Numeric view of a dataset for clustering: numeric attributes standardized
/// to zero mean and unit variance over this set (constant columns map to 0),
/// categorical attributes one-hot encoded, label excluded.
pub fn encode(data: &Dataset) -> Result<FeatureMatrix, ClusterError> {
    if data.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    let n = data.len() as f64;
    let mut encoding = Vec::new();
    for (a, attr) in data.schema().attributes.iter().enumerate() {
        match &attr.kind {
            AttrKind::Numeric => {
                let mut mean = 0.0;
                for inst in data.instances() {
                    if let Value::Num(v) = inst.values[a] {
                        mean += v;
                    }
                }
                mean /= n;
                let mut var = 0.0;
                for inst in data.instances() {
                    if let Value::Num(v) = inst.values[a] {
                        var += (v - mean) * (v - mean);
                    }
                }
                var /= n;
                encoding.push(DimEncoding {
                    attr: a,
                    category: None,
                    mean,
                    std: var.sqrt(),
                });
            }
            AttrKind::Categorical(cats) => {
                for c in 0..cats.len() {
                    encoding.push(DimEncoding {
                        attr: a,
                        category: Some(c),
                        mean: 0.0,
                        std: 1.0,
                    });
                }
            }
        }
    }
    let dims = encoding.len();
    let probe = FeatureMatrix {
        rows: 0,
        dims,
        values: Vec::new(),
        encoding,
    };
    let mut values = Vec::with_capacity(data.len() * dims);
    for inst in data.instances() {
        values.extend(probe.encode_row(inst));
    }
    Ok(FeatureMatrix {
        rows: data.len(),
        values,
        ..probe
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterAlgorithm {
    Em,
    KMeans,
}

/// A fitted mixture/partition model with diagonal covariance. K-means fits
/// emit uniform weights and unit variances so [`assign`] reduces to
/// nearest-center for them.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub m: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub converged: bool,
    /// EM: log-likelihood of the last evaluated iteration. K-means: negative
    /// within-cluster sum of squares.
    pub final_log_likelihood: f64,
    pub algorithm: ClusterAlgorithm,
    /// One entry per iteration; non-decreasing for EM.
    pub objective_trace: Vec<f64>,
}

fn validate_fit_input(x: &FeatureMatrix, m: usize) -> Result<(), ClusterError> {
    if m == 0 {
        return Err(ClusterError::ZeroComponents);
    }
    if m > x.rows() {
        return Err(ClusterError::TooManyComponents { m, rows: x.rows() });
    }
    for r in 0..x.rows() {
        for (d, v) in x.row(r).iter().enumerate() {
            if !v.is_finite() {
                return Err(ClusterError::NonFinite { row: r, dim: d });
            }
        }
    }
    Ok(())
}

fn seeded_initial_rows(x: &FeatureMatrix, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, x.rows(), m)
        .iter()
        .map(|i| x.row(i).to_vec())
        .collect()
}

fn per_dim_variance(x: &FeatureMatrix) -> Vec<f64> {
    let n = x.rows() as f64;
    let mut mean = vec![0.0; x.dims()];
    for r in 0..x.rows() {
        for (d, v) in x.row(r).iter().enumerate() {
            mean[d] += v;
        }
    }
    for v in &mut mean {
        *v /= n;
    }
    let mut var = vec![0.0; x.dims()];
    for r in 0..x.rows() {
        for (d, v) in x.row(r).iter().enumerate() {
            var[d] += (v - mean[d]) * (v - mean[d]);
        }
    }
    for v in &mut var {
        *v = (*v / n).max(VARIANCE_FLOOR);
    }
    var
}

fn log_density(row: &[f64], mean: &[f64], variance: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((x, mu), var) in row.iter().zip(mean).zip(variance) {
        let diff = x - mu;
        acc += LOG_2PI + var.ln() + diff * diff / var;
    }
    -0.5 * acc
}

/// Fits an `m`-component diagonal Gaussian mixture by EM. Initialization is
/// seeded: means are `m` distinct sampled rows, variances the per-dim sample
/// variance, weights uniform. Stops when the log-likelihood improves by less
/// than `tol` or after `max_iters` iterations.
pub fn em_fit(
    x: &FeatureMatrix,
    m: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<ClusterModel, ClusterError> {
    validate_fit_input(x, m)?;
    let n = x.rows();
    let dims = x.dims();

    let mut means = seeded_initial_rows(x, m, seed);
    let mut variances = vec![per_dim_variance(x); m];
    let mut weights = vec![1.0 / m as f64; m];

    let mut trace = Vec::new();
    let mut converged = false;
    let mut resp = vec![0.0; n * m];

    for iter in 0..max_iters.max(1) {
        // E-step: responsibilities and the current log-likelihood.
        let mut ll = 0.0;
        for r in 0..n {
            let row = x.row(r);
            let scores: Vec<f64> = (0..m)
                .map(|j| weights[j].ln() + log_density(row, &means[j], &variances[j]))
                .collect();
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = scores.iter().map(|s| (s - max).exp()).sum();
            let lse = max + sum_exp.ln();
            ll += lse;
            for j in 0..m {
                resp[r * m + j] = (scores[j] - lse).exp();
            }
        }
        if let Some(&prev) = trace.last() {
            if ll - prev < tol {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        if iter + 1 == max_iters.max(1) {
            break;
        }

        // M-step.
        let mut totals = vec![0.0; m];
        for r in 0..n {
            for j in 0..m {
                totals[j] += resp[r * m + j];
            }
        }
        let grand: f64 = totals.iter().sum();
        for j in 0..m {
            weights[j] = totals[j] / grand;
            let safe = totals[j].max(1e-12);
            let mut mu = vec![0.0; dims];
            for r in 0..n {
                let w = resp[r * m + j];
                for (d, v) in x.row(r).iter().enumerate() {
                    mu[d] += w * v;
                }
            }
            for v in &mut mu {
                *v /= safe;
            }
            let mut var = vec![0.0; dims];
            for r in 0..n {
                let w = resp[r * m + j];
                for (d, v) in x.row(r).iter().enumerate() {
                    let diff = v - mu[d];
                    var[d] += w * diff * diff;
                }
            }
            for v in &mut var {
                *v = (*v / safe).max(VARIANCE_FLOOR);
            }
            means[j] = mu;
            variances[j] = var;
        }
    }

    Ok(ClusterModel {
        m,
        weights,
        means,
        variances,
        converged,
        final_log_likelihood: *trace.last().expect("at least one iteration"),
        algorithm: ClusterAlgorithm::Em,
        objective_trace: trace,
    })
}

/// Lloyd's algorithm with seeded initial centers. Empty clusters keep their
/// previous center. The emitted model has uniform weights and unit variances.
pub fn kmeans_fit(
    x: &FeatureMatrix,
    m: usize,
    max_iters: usize,
    seed: u64,
) -> Result<ClusterModel, ClusterError> {
    validate_fit_input(x, m)?;
    let n = x.rows();
    let dims = x.dims();
    let mut centers = seeded_initial_rows(x, m, seed);
    let mut trace = Vec::new();
    let mut converged = false;

    for _ in 0..max_iters.max(1) {
        let mut assignments = vec![0usize; n];
        let mut inertia = 0.0;
        for (r, slot) in assignments.iter_mut().enumerate() {
            let row = x.row(r);
            let (mut best_j, mut best_d) = (0usize, sq_dist(row, &centers[0]));
            for (j, c) in centers.iter().enumerate().skip(1) {
                let d = sq_dist(row, c);
                if d < best_d {
                    best_d = d;
                    best_j = j;
                }
            }
            *slot = best_j;
            inertia += best_d;
        }
        trace.push(-inertia);

        let mut next = vec![vec![0.0; dims]; m];
        let mut counts = vec![0usize; m];
        for (r, &j) in assignments.iter().enumerate() {
            counts[j] += 1;
            for (d, v) in x.row(r).iter().enumerate() {
                next[j][d] += v;
            }
        }
        for j in 0..m {
            if counts[j] == 0 {
                next[j] = centers[j].clone();
            } else {
                for v in &mut next[j] {
                    *v /= counts[j] as f64;
                }
            }
        }
        if next == centers {
            converged = true;
            break;
        }
        centers = next;
    }

    Ok(ClusterModel {
        m,
        weights: vec![1.0 / m as f64; m],
        means: centers,
        variances: vec![vec![1.0; dims]; m],
        converged,
        final_log_likelihood: *trace.last().expect("at least one iteration"),
        algorithm: ClusterAlgorithm::KMeans,
        objective_trace: trace,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Cluster index for an encoded row: the component maximizing
/// `weight x density`, ties toward the lowest index.
pub fn assign(model: &ClusterModel, row: &[f64]) -> Result<usize, ClusterError> {
    let dims = model.means.first().map_or(0, Vec::len);
    if row.len() != dims {
        return Err(ClusterError::DimensionMismatch {
            expected: dims,
            got: row.len(),
        });
    }
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for j in 0..model.m {
        let score = model.weights[j].ln() + log_density(row, &model.means[j], &model.variances[j]);
        if score > best_score {
            best_score = score;
            best = j;
        }
    }
    Ok(best)
}

/// Groups the records of `data` by assigned cluster, then merges parts
/// smaller than `min_cluster_size` into the cluster with the nearest mean
/// until every returned part meets the minimum (or a single part remains).
/// Instance order within each part follows the dataset order.
pub fn partition_by_cluster(
    data: &Dataset,
    model: &ClusterModel,
    min_cluster_size: usize,
) -> Result<Vec<Dataset>, ClusterError> {
    let x = encode(data)?;
    if x.dims() != model.means.first().map_or(0, Vec::len) {
        return Err(ClusterError::DimensionMismatch {
            expected: model.means.first().map_or(0, Vec::len),
            got: x.dims(),
        });
    }

    let mut groups: Vec<(usize, Vec<usize>)> = (0..model.m).map(|j| (j, Vec::new())).collect();
    for r in 0..x.rows() {
        let j = assign(model, x.row(r))?;
        groups[j].1.push(r);
    }
    groups.retain(|(_, members)| !members.is_empty());

    // Fold undersized parts into the surviving cluster with the nearest
    // component mean; smallest part first, ties toward the lower index.
    while groups.len() > 1 {
        let victim = groups
            .iter()
            .enumerate()
            .filter(|(_, (_, members))| members.len() < min_cluster_size)
            .min_by_key(|(_, (cluster, members))| (members.len(), *cluster))
            .map(|(pos, _)| pos);
        let Some(pos) = victim else { break };
        let (victim_cluster, members) = groups.remove(pos);
        let target = groups
            .iter()
            .enumerate()
            .min_by(|(_, (a, _)), (_, (b, _))| {
                sq_dist(&model.means[victim_cluster], &model.means[*a])
                    .total_cmp(&sq_dist(&model.means[victim_cluster], &model.means[*b]))
                    .then(a.cmp(b))
            })
            .map(|(pos, _)| pos)
            .expect("at least one remaining group");
        groups[target].1.extend(members);
        groups[target].1.sort_unstable();
    }

    Ok(groups
        .into_iter()
        .map(|(_, members)| data.select(&members))
        .collect())
}
