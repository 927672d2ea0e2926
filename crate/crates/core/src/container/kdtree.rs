//! Incremental k-d tree over descriptor vectors.
//!
//! Points carry an external id. Insertion descends to a leaf; removal marks
//! the node dead so the structure stays valid. `rebuild` restores balance.

#[derive(Debug, Clone)]
struct Node {
    id: usize,
    axis: usize,
    alive: bool,
    left: Option<usize>,
    right: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    nodes: Vec<Node>,
    coords: Vec<f64>,
    root: Option<usize>,
    /// Node index of each live id.
    node_of: Vec<Option<usize>>,
    live: usize,
}

impl KdTree {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            nodes: Vec::new(),
            coords: Vec::new(),
            root: None,
            node_of: Vec::new(),
            live: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    fn point(&self, node: usize) -> &[f64] {
        &self.coords[node * self.dim..(node + 1) * self.dim]
    }

    /// Balanced tree from scratch.
    pub fn build<'a>(dim: usize, points: impl IntoIterator<Item = (usize, &'a [f64])>) -> Self {
        let mut tree = Self::new(dim);
        let mut staged: Vec<(usize, &[f64])> = points.into_iter().collect();
        tree.nodes.reserve(staged.len());
        tree.root = tree.build_rec(&mut staged, 0);
        tree
    }

    fn build_rec(&mut self, points: &mut [(usize, &[f64])], depth: usize) -> Option<usize> {
        if points.is_empty() {
            return None;
        }
        let axis = depth % self.dim;
        let mid = points.len() / 2;
        points.select_nth_unstable_by(mid, |a, b| {
            a.1[axis].total_cmp(&b.1[axis]).then(a.0.cmp(&b.0))
        });
        let (id, p) = points[mid];
        let node = self.push_node(id, p, axis);
        let (lo, hi) = points.split_at_mut(mid);
        let left = self.build_rec(lo, depth + 1);
        let right = self.build_rec(&mut hi[1..], depth + 1);
        self.nodes[node].left = left;
        self.nodes[node].right = right;
        Some(node)
    }

    fn push_node(&mut self, id: usize, point: &[f64], axis: usize) -> usize {
        let node = self.nodes.len();
        self.nodes.push(Node {
            id,
            axis,
            alive: true,
            left: None,
            right: None,
        });
        self.coords.extend_from_slice(point);
        if self.node_of.len() <= id {
            self.node_of.resize(id + 1, None);
        }
        debug_assert!(self.node_of[id].is_none(), "id {id} inserted twice");
        self.node_of[id] = Some(node);
        self.live += 1;
        node
    }

    pub fn insert(&mut self, id: usize, point: &[f64]) {
        assert_eq!(point.len(), self.dim);
        let Some(mut cur) = self.root else {
            let node = self.push_node(id, point, 0);
            self.root = Some(node);
            return;
        };
        loop {
            let axis = self.nodes[cur].axis;
            let go_left = point[axis] < self.point(cur)[axis];
            let next = if go_left {
                self.nodes[cur].left
            } else {
                self.nodes[cur].right
            };
            match next {
                Some(n) => cur = n,
                None => {
                    let node = self.push_node(id, point, (axis + 1) % self.dim);
                    if go_left {
                        self.nodes[cur].left = Some(node);
                    } else {
                        self.nodes[cur].right = Some(node);
                    }
                    return;
                }
            }
        }
    }

    /// Removes `id`; returns whether it was present.
    pub fn remove(&mut self, id: usize) -> bool {
        match self.node_of.get_mut(id).and_then(Option::take) {
            Some(node) => {
                self.nodes[node].alive = false;
                self.live -= 1;
                true
            }
            None => false,
        }
    }

    /// The `k` nearest live points as `(squared distance, id)`, ordered by
    /// distance then id.
    pub fn nearest(&self, query: &[f64], k: usize) -> Vec<(f64, usize)> {
        assert_eq!(query.len(), self.dim);
        let mut best = Vec::with_capacity(k + 1);
        if k > 0 {
            if let Some(root) = self.root {
                self.search(root, query, k, &mut best);
            }
        }
        best
    }

    fn search(&self, node: usize, query: &[f64], k: usize, best: &mut Vec<(f64, usize)>) {
        let n = &self.nodes[node];
        let p = self.point(node);
        if n.alive {
            let d2 = squared_distance(p, query);
            let cand = (d2, n.id);
            if best.len() < k || lex_less(cand, best[best.len() - 1]) {
                let pos = best.partition_point(|&b| lex_less(b, cand));
                best.insert(pos, cand);
                best.truncate(k);
            }
        }
        let diff = query[n.axis] - p[n.axis];
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if let Some(c) = near {
            self.search(c, query, k, best);
        }
        if let Some(c) = far {
            // Ties at the worst distance still matter for the id tie-break.
            if best.len() < k || diff * diff <= best[best.len() - 1].0 {
                self.search(c, query, k, best);
            }
        }
    }
}

fn lex_less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
