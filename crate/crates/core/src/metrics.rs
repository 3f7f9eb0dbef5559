//! Structure measures for embeddings.

use crate::par;
use crate::tsne::Embedding;

fn d2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Mean fraction of each point's `k` nearest 2-D neighbors sharing its label.
/// Unlabeled points are skipped as queries and count as mismatches as neighbors.
pub fn knn_label_agreement(points: &[[f64; 2]], labels: &[Option<String>], k: usize) -> f64 {
    assert_eq!(points.len(), labels.len());
    let n = points.len();
    let k = k.min(n.saturating_sub(1));
    if k == 0 {
        return 0.0;
    }
    let per_point = par::map_range(n, |i| {
        let label = labels[i].as_ref()?;
        let mut others: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (d2(points[i], points[j]), j)).collect();
        others.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let hits = others[..k].iter().filter(|(_, j)| labels[*j].as_ref() == Some(label)).count();
        Some(hits as f64 / k as f64)
    });
    let scored: Vec<f64> = per_point.into_iter().flatten().collect();
    if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    }
}

pub fn embedding_knn_agreement(e: &Embedding, k: usize) -> f64 {
    knn_label_agreement(&e.points, &e.labels, k)
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// Spearman correlation over all point pairs between 2-D distance and the
/// absolute difference in trace length.
pub fn length_distance_correlation(e: &Embedding) -> f64 {
    let n = e.len();
    let mut dist = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let mut dlen = Vec::with_capacity(dist.capacity());
    for i in 0..n {
        for j in i + 1..n {
            dist.push(d2(e.points[i], e.points[j]).sqrt());
            dlen.push((e.n_turns[i] as f64 - e.n_turns[j] as f64).abs());
        }
    }
    spearman(&dist, &dlen)
}
