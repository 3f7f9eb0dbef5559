//! Quadtree over embedding coordinates with per-node center of mass.

/// Splitting stops at this depth; deeper coincident points share a leaf list.
pub const MAX_DEPTH: usize = 48;

#[derive(Debug, Clone)]
pub struct Node {
    pub center: [f64; 2],
    pub half_width: f64,
    pub center_of_mass: [f64; 2],
    pub mass: usize,
    /// Indices into `Quadtree::nodes`; empty for leaves.
    pub children: Vec<usize>,
    /// Point indices held by a leaf.
    pub points: Vec<usize>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn width(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (p[0] - self.center[0]).abs() <= self.half_width && (p[1] - self.center[1]).abs() <= self.half_width
    }
}

#[derive(Debug, Clone)]
pub struct Quadtree {
    pub nodes: Vec<Node>,
}

impl Quadtree {
    pub const ROOT: usize = 0;

    /// Builds a tree over finite `points` (row-major `[x, y]`).
    pub fn build(points: &[[f64; 2]]) -> Quadtree {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let (center, half_width) = if points.is_empty() {
            ([0.0, 0.0], 1.0)
        } else {
            let c = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
            let hw = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / 2.0).max(f64::MIN_POSITIVE);
            // pad so boundary points are strictly inside
            (c, hw * (1.0 + 1e-9) + 1e-12)
        };
        let mut tree = Quadtree { nodes: Vec::with_capacity(2 * points.len().max(1)) };
        let all: Vec<usize> = (0..points.len()).collect();
        tree.build_node(points, all, center, half_width, 0);
        tree
    }

    fn build_node(&mut self, points: &[[f64; 2]], members: Vec<usize>, center: [f64; 2], half_width: f64, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            center,
            half_width,
            center_of_mass: [0.0, 0.0],
            mass: members.len(),
            children: Vec::new(),
            points: Vec::new(),
        });
        // cells narrower than a few ulps of their center cannot split cleanly
        let resolvable = half_width > 1e-12 * (1.0 + center[0].abs().max(center[1].abs()));
        if members.len() <= 1 || depth >= MAX_DEPTH || !resolvable {
            let mut com = [0.0, 0.0];
            for &i in &members {
                com[0] += points[i][0];
                com[1] += points[i][1];
            }
            if !members.is_empty() {
                com[0] /= members.len() as f64;
                com[1] /= members.len() as f64;
            }
            self.nodes[id].center_of_mass = com;
            self.nodes[id].points = members;
            return id;
        }

        let mut quads: [Vec<usize>; 4] = Default::default();
        for i in members {
            let q = usize::from(points[i][0] > center[0]) | (usize::from(points[i][1] > center[1]) << 1);
            quads[q].push(i);
        }
        let hw = half_width / 2.0;
        let mut children = Vec::with_capacity(4);
        for (q, m) in quads.into_iter().enumerate() {
            if m.is_empty() {
                continue;
            }
            let c = [
                center[0] + if q & 1 == 1 { hw } else { -hw },
                center[1] + if q & 2 == 2 { hw } else { -hw },
            ];
            children.push(self.build_node(points, m, c, hw, depth + 1));
        }
        let mut com = [0.0, 0.0];
        let mut mass = 0;
        for &c in &children {
            let n = &self.nodes[c];
            com[0] += n.center_of_mass[0] * n.mass as f64;
            com[1] += n.center_of_mass[1] * n.mass as f64;
            mass += n.mass;
        }
        let node = &mut self.nodes[id];
        node.center_of_mass = [com[0] / mass as f64, com[1] / mass as f64];
        node.mass = mass;
        node.children = children;
        id
    }

    pub fn root(&self) -> &Node {
        &self.nodes[Self::ROOT]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Barnes-Hut repulsion on point `i` at `y`: returns the unnormalized
    /// force `sum_j q_ij^2 (y - y_j)` and partial normalizer `sum_j q_ij`
    /// with `q_ij = 1 / (1 + |y - y_j|^2)`.
    ///
    /// A cell is summarized by its center of mass when it does not contain
    /// `y` and `width / distance < theta`; leaves are always summed point by
    /// point, so `theta = 0` is exact.
    pub fn repulsion(&self, points: &[[f64; 2]], i: usize, theta: f64) -> ([f64; 2], f64) {
        let y = points[i];
        let mut force = [0.0, 0.0];
        let mut z = 0.0;
        let mut stack = vec![Self::ROOT];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.mass == 0 {
                continue;
            }
            if node.is_leaf() {
                for &j in &node.points {
                    if j == i {
                        continue;
                    }
                    let dx = y[0] - points[j][0];
                    let dy = y[1] - points[j][1];
                    let q = 1.0 / (1.0 + dx * dx + dy * dy);
                    z += q;
                    force[0] += q * q * dx;
                    force[1] += q * q * dy;
                }
                continue;
            }
            let dx = y[0] - node.center_of_mass[0];
            let dy = y[1] - node.center_of_mass[1];
            let d2 = dx * dx + dy * dy;
            if !node.contains(y) && node.width() < theta * d2.sqrt() {
                let q = 1.0 / (1.0 + d2);
                let m = node.mass as f64;
                z += m * q;
                force[0] += m * q * q * dx;
                force[1] += m * q * q * dy;
            } else {
                // reverse so children are visited in index order
                stack.extend(node.children.iter().rev());
            }
        }
        (force, z)
    }
}
