//! Static k-d tree over row-major points with the max-norm (Chebyshev) metric.

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

pub(crate) struct KdTree<'a> {
    points: &'a [f64],
    dim: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
fn cheb(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [f64], dim: usize) -> Self {
        let n = points.len() / dim;
        let mut tree = KdTree {
            points,
            dim,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    #[inline]
    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split on the axis of largest spread
        let mut axis = 0;
        let mut spread = -1.0;
        for a in 0..self.dim {
            let (lo, hi) = self.order[start..end].iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), &i| {
                    let v = self.points[i * self.dim + a];
                    (lo.min(v), hi.max(v))
                },
            );
            if hi - lo > spread {
                spread = hi - lo;
                axis = a;
            }
        }
        if spread <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let (pts, dim) = (self.points, self.dim);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a * dim + axis].total_cmp(&pts[b * dim + axis])
        });
        let value = pts[self.order[mid] * dim + axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Distance from point `query_idx` to its k-th nearest other point.
    pub fn kth_neighbor_distance(&self, query_idx: usize, k: usize) -> f64 {
        let q = self.point(query_idx);
        // sorted ascending, at most k entries
        let mut best: Vec<f64> = Vec::with_capacity(k + 1);
        self.knn(0, q, query_idx, k, &mut best);
        best[k - 1]
    }

    fn knn(&self, node: usize, q: &[f64], skip: usize, k: usize, best: &mut Vec<f64>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if i == skip {
                        continue;
                    }
                    let d = cheb(q, self.point(i));
                    if best.len() < k || d < best[k - 1] {
                        let pos = best.partition_point(|&b| b <= d);
                        best.insert(pos, d);
                        best.truncate(k);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn(near, q, skip, k, best);
                if best.len() < k || diff.abs() <= best[k - 1] {
                    self.knn(far, q, skip, k, best);
                }
            }
        }
    }

    /// Number of points (the query included) strictly within `radius` of
    /// point `query_idx`.
    pub fn count_within(&self, query_idx: usize, radius: f64) -> usize {
        let q = self.point(query_idx);
        self.count(0, q, radius)
    }

    fn count(&self, node: usize, q: &[f64], radius: f64) -> usize {
        match self.nodes[node] {
            Node::Leaf { start, end } => self.order[start..end]
                .iter()
                .filter(|&&i| cheb(q, self.point(i)) < radius)
                .count(),
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                let mut c = self.count(near, q, radius);
                if diff.abs() < radius {
                    c += self.count(far, q, radius);
                }
                c
            }
        }
    }
}
