//! KL-divergence gradients: exact O(N^2) and Barnes-Hut.

use super::affinity::AffinityMatrix;
use super::quadtree::Quadtree;
use crate::par;

pub type Points = [[f64; 2]];

#[inline]
fn student_t(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    1.0 / (1.0 + dx * dx + dy * dy)
}

/// `dC/dy_i = 4 sum_j (p_ij - q_ij) (y_i - y_j) / (1 + |y_i - y_j|^2)`.
pub fn gradient_exact(p: &AffinityMatrix, y: &Points) -> Vec<[f64; 2]> {
    let n = y.len();
    assert_eq!(p.len(), n, "affinity and embedding sizes differ");
    let z: f64 = par::map_range(n, |i| (0..n).filter(|&j| j != i).map(|j| student_t(y[i], y[j])).sum::<f64>())
        .into_iter()
        .sum();
    par::map_range(n, |i| {
        let mut pi = vec![0.0; n];
        for (j, v) in p.row(i) {
            pi[j] = v;
        }
        let mut g = [0.0, 0.0];
        for j in 0..n {
            if j == i {
                continue;
            }
            let w = student_t(y[i], y[j]);
            let coeff = (pi[j] - w / z) * w;
            g[0] += coeff * (y[i][0] - y[j][0]);
            g[1] += coeff * (y[i][1] - y[j][1]);
        }
        [4.0 * g[0], 4.0 * g[1]]
    })
}

/// Attractive term exact over the sparse affinities, repulsive term from a
/// quadtree traversal with accuracy `theta`.
pub fn gradient_bh(p: &AffinityMatrix, y: &Points, theta: f64) -> Vec<[f64; 2]> {
    let n = y.len();
    assert_eq!(p.len(), n, "affinity and embedding sizes differ");
    let tree = Quadtree::build(y);
    let parts = par::map_range(n, |i| {
        let mut attr = [0.0, 0.0];
        for (j, v) in p.row(i) {
            let w = v * student_t(y[i], y[j]);
            attr[0] += w * (y[i][0] - y[j][0]);
            attr[1] += w * (y[i][1] - y[j][1]);
        }
        let (rep, z) = tree.repulsion(y, i, theta);
        (attr, rep, z)
    });
    let z: f64 = parts.iter().map(|t| t.2).sum();
    parts
        .into_iter()
        .map(|(a, r, _)| [4.0 * (a[0] - r[0] / z), 4.0 * (a[1] - r[1] / z)])
        .collect()
}

/// `KL(P || Q)` with exact Student-t similarities.
pub fn kl_divergence(p: &AffinityMatrix, y: &Points) -> f64 {
    let n = y.len();
    let z: f64 = par::map_range(n, |i| (0..n).filter(|&j| j != i).map(|j| student_t(y[i], y[j])).sum::<f64>())
        .into_iter()
        .sum();
    let per_row = par::map_range(n, |i| {
        p.row(i)
            .filter(|&(_, v)| v > 0.0)
            .map(|(j, v)| v * (v / (student_t(y[i], y[j]) / z)).ln())
            .sum::<f64>()
    });
    per_row.into_iter().sum::<f64>().max(0.0)
}
