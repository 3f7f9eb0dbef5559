//! t-SNE with Barnes-Hut gradients.
//!
//! Pipeline: k-nearest-neighbor squared Euclidean distances, per-point
//! perplexity calibration, symmetrized sparse affinities, then momentum
//! gradient descent with per-coordinate gains and early exaggeration.
//! Every per-point computation is independent and reductions run in index
//! order, so a fixed seed gives bit-identical output at any thread count.

pub mod affinity;
pub mod gradient;
pub mod quadtree;

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::encode::EncodedCorpus;
use crate::error::{Error, Result};

pub use affinity::{
    knn_conditionals, nearest_neighbors, pairwise_distances, perplexity_search, symmetrize, AffinityMatrix,
    ConditionalRow, DistanceMatrix,
};
pub use gradient::{gradient_bh, gradient_exact, kl_divergence};
pub use quadtree::Quadtree;

/// KL divergence is recorded every this many iterations.
pub const KL_EVERY: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneParams {
    pub perplexity: f64,
    pub theta: f64,
    pub n_iter: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
    pub seed: u64,
    pub init_scale: f64,
    /// Dense affinities over all pairs and the O(N^2) gradient.
    pub exact: bool,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 30.0,
            theta: 0.5,
            n_iter: 1000,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 250,
            seed: 42,
            init_scale: 1e-4,
            exact: false,
        }
    }
}

impl TsneParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.perplexity > 0.0) {
            return Err(Error::Param(format!("perplexity must be positive, got {}", self.perplexity)));
        }
        if !(self.theta >= 0.0) {
            return Err(Error::Param(format!("theta must be non-negative, got {}", self.theta)));
        }
        if self.n_iter < 1 {
            return Err(Error::Param("n_iter must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.init_scale > 0.0) {
            return Err(Error::Param("learning_rate and init_scale must be positive".into()));
        }
        if n < 2 || (n as f64) < 3.0 * self.perplexity + 1.0 {
            let max = (n.saturating_sub(1)) as f64 / 3.0;
            return Err(Error::Param(format!(
                "perplexity {} is too large for {n} points (need N >= 3*perplexity + 1); use perplexity <= {:.2}",
                self.perplexity,
                max.floor()
            )));
        }
        Ok(())
    }

    pub fn neighbors(&self, n: usize) -> usize {
        if self.exact {
            n - 1
        } else {
            ((3.0 * self.perplexity).ceil() as usize).min(n - 1)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub points: Vec<[f64; 2]>,
    /// `(iteration, KL)` pairs.
    pub kl_history: Vec<(usize, f64)>,
    pub params: TsneParams,
    pub ids: Vec<String>,
    pub n_turns: Vec<usize>,
    pub labels: Vec<Option<String>>,
}

impl Embedding {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn kl_at(&self, iter: usize) -> Option<f64> {
        self.kl_history.iter().find(|(i, _)| *i == iter).map(|(_, kl)| *kl)
    }

    pub fn final_kl(&self) -> Option<f64> {
        self.kl_history.last().map(|(_, kl)| *kl)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trace_id", "n_turns", "label", "x", "y"])?;
        for i in 0..self.len() {
            w.write_record([
                self.ids[i].clone(),
                self.n_turns[i].to_string(),
                self.labels[i].clone().unwrap_or_default(),
                format!("{:?}", self.points[i][0]),
                format!("{:?}", self.points[i][1]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_kl_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "kl"])?;
        for (i, kl) in &self.kl_history {
            w.write_record([i.to_string(), format!("{kl:?}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the point table; KL history and parameters are not part of it.
    pub fn read_csv<R: Read>(input: R) -> Result<Embedding> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["trace_id", "n_turns", "label", "x", "y"] {
            return Err(Error::format("embedding csv", "expected header trace_id,n_turns,label,x,y"));
        }
        let mut e = Embedding {
            points: Vec::new(),
            kl_history: Vec::new(),
            params: TsneParams::default(),
            ids: Vec::new(),
            n_turns: Vec::new(),
            labels: Vec::new(),
        };
        for (line, row) in r.records().enumerate() {
            let row = row?;
            let bad = |f: &str, v: &str| Error::format("embedding csv", format!("row {}: bad {f} {v:?}", line + 1));
            e.ids.push(row[0].to_string());
            e.n_turns.push(row[1].parse().map_err(|_| bad("n_turns", &row[1]))?);
            e.labels.push(Some(row[2].to_string()).filter(|s| !s.is_empty()));
            let x: f64 = row[3].parse().map_err(|_| bad("x", &row[3]))?;
            let y: f64 = row[4].parse().map_err(|_| bad("y", &row[4]))?;
            e.points.push([x, y]);
        }
        Ok(e)
    }
}

/// Joint affinities for `corpus` under `params`.
pub fn affinities(corpus: &EncodedCorpus, params: &TsneParams) -> Result<AffinityMatrix> {
    params.validate(corpus.len())?;
    if corpus.data.len() != corpus.len() * corpus.dim {
        return Err(Error::DimensionMismatch {
            expected: corpus.len() * corpus.dim,
            found: corpus.data.len(),
        });
    }
    let conditionals = knn_conditionals(corpus, params.perplexity, params.neighbors(corpus.len()));
    Ok(symmetrize(&conditionals))
}

pub fn initial_points(n: usize, params: &TsneParams) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0, params.init_scale).expect("init_scale validated");
    (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect()
}

/// Runs gradient descent from `y` on fixed affinities.
pub fn optimize(p: &AffinityMatrix, mut y: Vec<[f64; 2]>, params: &TsneParams) -> (Vec<[f64; 2]>, Vec<(usize, f64)>) {
    let n = y.len();
    let exaggerated = p.scaled(params.early_exaggeration);
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_history = Vec::new();

    for iter in 0..params.n_iter {
        let p_eff = if iter < params.exaggeration_iters { &exaggerated } else { p };
        let grad = if params.exact {
            gradient_exact(p_eff, &y)
        } else {
            gradient_bh(p_eff, &y, params.theta)
        };
        let momentum = if iter < params.momentum_switch_iter {
            params.initial_momentum
        } else {
            params.final_momentum
        };
        for i in 0..n {
            for d in 0..2 {
                let g = grad[i][d];
                let gain = &mut gains[i][d];
                *gain = if (g > 0.0) != (update[i][d] > 0.0) { *gain + 0.2 } else { *gain * 0.8 };
                *gain = gain.max(0.01);
                update[i][d] = momentum * update[i][d] - params.learning_rate * *gain * g;
                y[i][d] += update[i][d];
            }
        }
        let mean = y.iter().fold([0.0, 0.0], |a, v| [a[0] + v[0], a[1] + v[1]]);
        let mean = [mean[0] / n as f64, mean[1] / n as f64];
        for v in &mut y {
            v[0] -= mean[0];
            v[1] -= mean[1];
        }

        let done = iter + 1;
        if done % KL_EVERY == 0 || done == params.n_iter {
            let kl = kl_divergence(p, &y);
            log::debug!("iteration {done}: KL {kl:.6}");
            kl_history.push((done, kl));
        }
    }
    (y, kl_history)
}

/// Embeds every corpus row into 2-D.
pub fn embed(corpus: &EncodedCorpus, params: &TsneParams) -> Result<Embedding> {
    let p = affinities(corpus, params)?;
    let y0 = initial_points(corpus.len(), params);
    let (points, kl_history) = optimize(&p, y0, params);
    if points.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
        return Err(Error::Param("optimization diverged to non-finite coordinates; lower the learning rate".into()));
    }
    Ok(Embedding {
        points,
        kl_history,
        params: params.clone(),
        ids: corpus.ids.clone(),
        n_turns: corpus.n_turns.clone(),
        labels: corpus.labels.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(n_per: usize, dim: usize, sep: f64, seed: u64) -> EncodedCorpus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let offset = sep / (dim as f64).sqrt();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for b in 0..2 {
            for _ in 0..n_per {
                rows.push((0..dim).map(|_| normal.sample(&mut rng) + b as f64 * offset).collect());
                labels.push(Some(format!("blob{b}")));
            }
        }
        EncodedCorpus::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn rejects_oversized_perplexity() {
        let c = blobs(10, 3, 5.0, 1);
        let err = embed(&c, &TsneParams::default()).unwrap_err();
        assert!(err.to_string().contains("use perplexity <= 6"), "{err}");
        assert!(err.is_config());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let c = blobs(20, 5, 8.0, 2);
        let params = TsneParams { perplexity: 5.0, n_iter: 120, ..Default::default() };
        let a = embed(&c, &params).unwrap();
        let b = embed(&c, &params).unwrap();
        assert_eq!(a, b);
        let c1 = crate::par::with_threads(Some(1), || embed(&c, &params).unwrap());
        assert_eq!(a.points, c1.points);
    }

    #[test]
    fn kl_history_sampling() {
        let c = blobs(15, 4, 8.0, 3);
        let params = TsneParams { perplexity: 5.0, n_iter: 275, ..Default::default() };
        let e = embed(&c, &params).unwrap();
        let iters: Vec<usize> = e.kl_history.iter().map(|h| h.0).collect();
        assert_eq!(iters, vec![50, 100, 150, 200, 250, 275]);
        assert!(e.kl_history.iter().all(|h| h.1 >= 0.0));
    }

    #[test]
    fn exact_mode_runs() {
        let c = blobs(12, 3, 8.0, 4);
        let params = TsneParams { perplexity: 4.0, n_iter: 60, exact: true, ..Default::default() };
        let p = affinities(&c, &params).unwrap();
        assert_eq!(p.nnz(), 24 * 23);
        let e = embed(&c, &params).unwrap();
        assert!(e.points.iter().all(|v| v[0].is_finite()));
    }

    #[test]
    fn embedding_csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = Embedding {
            points: (0..4).map(|_| [rng.random::<f64>(), -rng.random::<f64>()]).collect(),
            kl_history: vec![(50, 1.5)],
            params: TsneParams::default(),
            ids: (0..4).map(|i| format!("g/{i}")).collect(),
            n_turns: vec![10, 11, 12, 13],
            labels: vec![Some("a".into()), None, Some("b".into()), None],
        };
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let back = Embedding::read_csv(&buf[..]).unwrap();
        assert_eq!(back.points, e.points);
        assert_eq!(back.ids, e.ids);
        assert_eq!(back.labels, e.labels);
        let mut kl = Vec::new();
        e.write_kl_csv(&mut kl).unwrap();
        assert_eq!(String::from_utf8(kl).unwrap(), "iter,kl\n50,1.5\n");
    }
}
