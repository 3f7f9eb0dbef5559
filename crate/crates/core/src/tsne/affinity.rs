//! Input-space affinities: distances, perplexity calibration and symmetrization.

use crate::encode::EncodedCorpus;
use crate::error::{Error, Result};
use crate::par;

/// Dense table of squared Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d2: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d2[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d2[i * self.n..(i + 1) * self.n]
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn pairwise_distances(corpus: &EncodedCorpus) -> Result<DistanceMatrix> {
    if corpus.is_empty() {
        return Err(Error::Param("cannot compute distances of an empty corpus".into()));
    }
    if corpus.data.len() != corpus.len() * corpus.dim {
        return Err(Error::DimensionMismatch {
            expected: corpus.len() * corpus.dim,
            found: corpus.data.len(),
        });
    }
    let n = corpus.len();
    let rows = par::map_range(n, |i| {
        (0..n)
            .map(|j| if i == j { 0.0 } else { squared_distance(corpus.row(i), corpus.row(j)) })
            .collect::<Vec<_>>()
    });
    Ok(DistanceMatrix { n, d2: rows.concat() })
}

/// The `k` nearest other points of `i`, ascending by distance (ties by index).
pub fn nearest_neighbors(corpus: &EncodedCorpus, i: usize, k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..corpus.len())
        .filter(|&j| j != i)
        .map(|j| (j, squared_distance(corpus.row(i), corpus.row(j))))
        .collect();
    let by_dist = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < all.len() {
        all.select_nth_unstable_by(k, by_dist);
        all.truncate(k);
    }
    all.sort_by(by_dist);
    all
}

/// A calibrated conditional distribution over one point's neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalRow {
    pub beta: f64,
    pub probs: Vec<f64>,
    /// exp of the achieved entropy (in nats), i.e. the effective neighbor count.
    pub perplexity: f64,
}

pub const PERPLEXITY_TOL: f64 = 1e-5;
pub const PERPLEXITY_MAX_ITER: usize = 50;

fn gaussian_row(d2: &[f64], d_min: f64, beta: f64) -> (Vec<f64>, f64) {
    let mut probs: Vec<f64> = d2.iter().map(|&d| (-beta * (d - d_min)).exp()).collect();
    let sum: f64 = probs.iter().sum();
    let mut entropy = 0.0;
    for p in &mut probs {
        *p /= sum;
        if *p > 0.0 {
            entropy -= *p * p.ln();
        }
    }
    (probs, entropy)
}

/// Bisects the Gaussian precision so the row's perplexity hits `target`.
///
/// Stops once `|perplexity - target| <= tol * target` or after `max_iter`
/// steps, returning the closest row seen. Distances are shifted by their
/// minimum before exponentiation, which leaves the normalized row unchanged.
pub fn perplexity_search(d2: &[f64], target: f64, tol: f64, max_iter: usize) -> ConditionalRow {
    let n = d2.len();
    if n == 0 {
        return ConditionalRow { beta: 1.0, probs: Vec::new(), perplexity: 0.0 };
    }
    let d_min = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let d_max = d2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if d_max <= 0.0 {
        log::warn!("all {n} neighbor distances are zero; using a uniform row");
        return ConditionalRow {
            beta: 1.0,
            probs: vec![1.0 / n as f64; n],
            perplexity: n as f64,
        };
    }

    let mut beta = 1.0;
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    let mut best: Option<ConditionalRow> = None;
    for _ in 0..max_iter.max(1) {
        let (probs, h) = gaussian_row(d2, d_min, beta);
        let perp = h.exp();
        let row = ConditionalRow { beta, probs, perplexity: perp };
        let err = (perp - target).abs();
        if best.as_ref().is_none_or(|b| err < (b.perplexity - target).abs()) {
            best = Some(row);
        }
        if err <= tol * target {
            break;
        }
        if perp > target {
            // too flat: sharpen
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    best.expect("at least one iteration")
}

/// Symmetric joint affinities in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl AffinityMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzero `(j, p_ij)` entries of row `i`, ascending by `j`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.vals.iter().sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, p) in self.row(i) {
                out[i * self.n + j] = p;
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> AffinityMatrix {
        AffinityMatrix {
            vals: self.vals.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Builds from a dense symmetric matrix, dropping zeros.
    pub fn from_dense(n: usize, dense: &[f64]) -> AffinityMatrix {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = dense[i * n + j];
                if i != j && v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        AffinityMatrix { n, row_ptr, cols, vals }
    }
}

/// Sparse conditional rows: `neighbors[i]` holds `(j, p_{j|i})`.
pub type Conditionals = Vec<Vec<(usize, f64)>>;

/// `p_ij = (p_{j|i} + p_{i|j}) / 2N` over the union of both neighbor sets.
pub fn symmetrize(conditionals: &Conditionals) -> AffinityMatrix {
    let n = conditionals.len();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in conditionals.iter().enumerate() {
        for &(j, p) in row {
            if i == j {
                continue;
            }
            rows[i].push((j, p));
            rows[j].push((i, p));
        }
    }
    let scale = 1.0 / (2.0 * n as f64);
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for mut row in rows {
        // stable: each entry is the sum of at most two terms, added in index order
        row.sort_by_key(|&(j, _)| j);
        let mut k = 0;
        while k < row.len() {
            let j = row[k].0;
            let mut sum = 0.0;
            while k < row.len() && row[k].0 == j {
                sum += row[k].1;
                k += 1;
            }
            if sum > 0.0 {
                cols.push(j);
                vals.push(sum * scale);
            }
        }
        row_ptr.push(cols.len());
    }
    AffinityMatrix { n, row_ptr, cols, vals }
}

/// Calibrated conditionals over each point's `k` nearest neighbors.
pub fn knn_conditionals(corpus: &EncodedCorpus, perplexity: f64, k: usize) -> Conditionals {
    par::map_range(corpus.len(), |i| {
        let nn = nearest_neighbors(corpus, i, k);
        let d2: Vec<f64> = nn.iter().map(|&(_, d)| d).collect();
        let row = perplexity_search(&d2, perplexity, PERPLEXITY_TOL, PERPLEXITY_MAX_ITER);
        nn.iter().map(|&(j, _)| j).zip(row.probs).collect()
    })
}
