//! Similarity graphs over functional supports and their unnormalized
//! Laplacians `L = D − W`.
//!
//! Distances between functionals are box-to-box distances of their support
//! boxes. The ε-neighbourhood and k-nearest-neighbour schemes produce sparse
//! weights and are found with a bounding-box tree; the Gaussian scheme is
//! stored densely.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::linalg::SymOperator;
use crate::measures::{Functional, SupportBox};

/// Largest node count for which a dense Gaussian graph is built.
pub const DENSE_GRAPH_LIMIT: usize = 16_384;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimilarityScheme {
    /// `w = 1` if `d < ε`, else `0`.
    EpsilonNeighborhood(f64),
    /// `w = 1` if either functional is among the `k` nearest of the other.
    MutualKNN(usize),
    /// `w = exp(−d² / (2ℓ²))`.
    Gaussian(f64),
}

impl SimilarityScheme {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SimilarityScheme::EpsilonNeighborhood(eps) if !(eps > 0.0 && eps.is_finite()) => {
                invalid(format!("epsilon must be positive and finite, got {eps}"))
            }
            SimilarityScheme::MutualKNN(0) => invalid("k must be at least 1"),
            SimilarityScheme::Gaussian(l) if !(l > 0.0 && l.is_finite()) => {
                invalid(format!("length scale must be positive and finite, got {l}"))
            }
            _ => Ok(()),
        }
    }

    /// Weight of a pair at distance `d`, for the schemes where it depends on
    /// `d` alone.
    pub fn weight_at(&self, d: f64) -> Option<f64> {
        match *self {
            SimilarityScheme::EpsilonNeighborhood(eps) => Some(if d < eps { 1.0 } else { 0.0 }),
            SimilarityScheme::Gaussian(l) => Some((-d * d / (2.0 * l * l)).exp()),
            SimilarityScheme::MutualKNN(_) => None,
        }
    }
}

/// Euclidean distance between the support boxes of two functionals.
pub fn support_distance(fi: &Functional, fj: &Functional) -> Result<f64> {
    fi.support_box().distance(&fj.support_box())
}

/// Similarity of a pair considered on its own. For the nearest-neighbour
/// scheme a two-element set makes each the other's nearest neighbour, so
/// distinct functionals get weight 1; inside a larger set use [`build_graph`].
pub fn similarity(fi: &Functional, fj: &Functional, scheme: SimilarityScheme) -> Result<f64> {
    scheme.validate()?;
    let d = support_distance(fi, fj)?;
    Ok(scheme.weight_at(d).unwrap_or(1.0))
}

#[derive(Debug, Clone, PartialEq)]
enum Weights {
    Dense(DMatrix<f64>),
    /// Off-diagonal entries only; `self_weight` holds the diagonal.
    Sparse {
        offsets: Vec<usize>,
        cols: Vec<u32>,
        vals: Vec<f64>,
        self_weight: Vec<f64>,
    },
}

/// Symmetric nonnegative similarity matrix with its degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    weights: Weights,
    degrees: Vec<f64>,
}

impl SimilarityGraph {
    pub fn from_dense(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::DimensionMismatch {
                expected: w.nrows(),
                found: w.ncols(),
            });
        }
        let n = w.nrows();
        for i in 0..n {
            for j in 0..n {
                let v = w[(i, j)];
                if !(v >= 0.0 && v.is_finite()) {
                    return invalid(format!(
                        "weight ({i}, {j}) = {v} is not finite and nonnegative"
                    ));
                }
                if v != w[(j, i)] {
                    return invalid(format!("weights are not symmetric at ({i}, {j})"));
                }
            }
        }
        let degrees = (0..n).map(|i| w.row(i).sum()).collect();
        Ok(Self {
            weights: Weights::Dense(w),
            degrees,
        })
    }

    /// Sparse graph from off-diagonal triplets `(i, j, w)` with `i ≠ j`.
    /// Each undirected edge must be listed once; duplicates are summed.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize, f64)],
        self_weight: Vec<f64>,
    ) -> Result<Self> {
        if self_weight.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: self_weight.len(),
            });
        }
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return invalid(format!("bad edge ({i}, {j})"));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return invalid(format!("edge weight {w} is not finite and nonnegative"));
            }
            if w > 0.0 {
                rows[i].push((j as u32, w));
                rows[j].push((i as u32, w));
            }
        }
        Ok(Self::from_rows(rows, self_weight))
    }

    fn from_rows(mut rows: Vec<Vec<(u32, f64)>>, self_weight: Vec<f64>) -> Self {
        let n = rows.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut degrees = Vec::with_capacity(n);
        offsets.push(0);
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            let mut deg = self_weight[i];
            let mut last = u32::MAX;
            for &(j, w) in row.iter() {
                if j == last {
                    *vals.last_mut().unwrap() += w;
                } else {
                    cols.push(j);
                    vals.push(w);
                    last = j;
                }
                deg += w;
            }
            offsets.push(cols.len());
            degrees.push(deg);
        }
        Self {
            weights: Weights::Sparse {
                offsets,
                cols,
                vals,
                self_weight,
            },
            degrees,
        }
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.weights, Weights::Dense(_))
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match &self.weights {
            Weights::Dense(w) => w[(i, j)],
            Weights::Sparse {
                offsets,
                cols,
                vals,
                self_weight,
            } => {
                if i == j {
                    return self_weight[i];
                }
                let row = &cols[offsets[i]..offsets[i + 1]];
                match row.binary_search(&(j as u32)) {
                    Ok(p) => vals[offsets[i] + p],
                    Err(_) => 0.0,
                }
            }
        }
    }

    /// Calls `f(j, w_ij)` for every off-diagonal `j` with `w_ij > 0`.
    pub fn for_each_neighbor(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        match &self.weights {
            Weights::Dense(w) => {
                for j in 0..w.ncols() {
                    let v = w[(i, j)];
                    if j != i && v > 0.0 {
                        f(j, v);
                    }
                }
            }
            Weights::Sparse {
                offsets,
                cols,
                vals,
                ..
            } => {
                for p in offsets[i]..offsets[i + 1] {
                    f(cols[p] as usize, vals[p]);
                }
            }
        }
    }

    pub fn weights_dense(&self) -> DMatrix<f64> {
        match &self.weights {
            Weights::Dense(w) => w.clone(),
            Weights::Sparse { self_weight, .. } => {
                let n = self.n();
                let mut w = DMatrix::zeros(n, n);
                for i in 0..n {
                    w[(i, i)] = self_weight[i];
                    self.for_each_neighbor(i, |j, v| w[(i, j)] = v);
                }
                w
            }
        }
    }

    pub fn laplacian_dense(&self) -> DMatrix<f64> {
        let mut l = -self.weights_dense();
        for i in 0..self.n() {
            // w_ii cancels; summing only off-diagonals keeps that exact
            let mut s = 0.0;
            self.for_each_neighbor(i, |_, w| s += w);
            l[(i, i)] = s;
        }
        l
    }

    /// Gershgorin bound `2·max_i Σ_{j≠i} w_ij ≥ ‖L‖₂`, equal to `‖L‖_∞`.
    pub fn laplacian_norm_bound(&self) -> f64 {
        (0..self.n())
            .map(|i| 2.0 * (self.degrees[i] - self.weight(i, i)))
            .fold(0.0, f64::max)
    }

    /// `½ Σ_{i,j} w_ij (x_i − x_j)²`.
    pub fn dirichlet_energy(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n() {
            self.for_each_neighbor(i, |j, w| {
                let d = x[i] - x[j];
                s += w * d * d;
            });
        }
        0.5 * s
    }

    /// Graph restricted to `local` (rows and columns of `W`), with degrees
    /// recomputed. Node `k` of the result is `local[k]` of `self`.
    pub fn induced(&self, local: &[usize]) -> SimilarityGraph {
        match &self.weights {
            Weights::Dense(w) => {
                let m = local.len();
                let sub = DMatrix::from_fn(m, m, |a, b| w[(local[a], local[b])]);
                let degrees = (0..m).map(|a| sub.row(a).sum()).collect();
                SimilarityGraph {
                    weights: Weights::Dense(sub),
                    degrees,
                }
            }
            Weights::Sparse {
                offsets,
                cols,
                vals,
                self_weight,
            } => {
                let mut position = std::collections::HashMap::with_capacity(local.len());
                for (k, &g) in local.iter().enumerate() {
                    position.insert(g as u32, k as u32);
                }
                let mut rows = Vec::with_capacity(local.len());
                for &g in local {
                    let mut row = Vec::new();
                    for p in offsets[g]..offsets[g + 1] {
                        if let Some(&k) = position.get(&cols[p]) {
                            row.push((k, vals[p]));
                        }
                    }
                    rows.push(row);
                }
                let sw = local.iter().map(|&g| self_weight[g]).collect();
                SimilarityGraph::from_rows(rows, sw)
            }
        }
    }

    /// Connected components of the off-diagonal adjacency `w_ij > 0`, each
    /// sorted ascending, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![s];
            label[s] = id;
            stack.push(s);
            while let Some(i) = stack.pop() {
                self.for_each_neighbor(i, |j, _| {
                    if label[j] == usize::MAX {
                        label[j] = id;
                        members.push(j);
                        stack.push(j);
                    }
                });
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}

impl SymOperator for SimilarityGraph {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match &self.weights {
            Weights::Dense(w) => {
                let n = self.n();
                for i in 0..n {
                    y[i] = self.degrees[i] * x[i];
                }
                for j in 0..n {
                    let xj = x[j];
                    let col = w.column(j);
                    for i in 0..n {
                        y[i] -= col[i] * xj;
                    }
                }
            }
            Weights::Sparse {
                offsets,
                cols,
                vals,
                ..
            } => {
                for i in 0..self.n() {
                    let mut acc = 0.0;
                    let mut deg = 0.0;
                    for p in offsets[i]..offsets[i + 1] {
                        acc += vals[p] * x[cols[p] as usize];
                        deg += vals[p];
                    }
                    y[i] = deg * x[i] - acc;
                }
            }
        }
    }
}

/// Builds `W` and `D` for `functionals` under `scheme`. Self-similarities are
/// kept as the scheme defines them (`1` for ε and Gaussian, `0` for kNN).
pub fn build_graph(
    functionals: &[Functional],
    scheme: SimilarityScheme,
) -> Result<SimilarityGraph> {
    build_graph_with(functionals, scheme, true)
}

/// As [`build_graph`]; with `self_loops == false` all `w_ii` are zero.
pub fn build_graph_with(
    functionals: &[Functional],
    scheme: SimilarityScheme,
    self_loops: bool,
) -> Result<SimilarityGraph> {
    scheme.validate()?;
    if functionals.is_empty() {
        return invalid("cannot build a graph on zero functionals");
    }
    let boxes: Vec<SupportBox> = functionals.iter().map(Functional::support_box).collect();
    let d = boxes[0].dim();
    if let Some(b) = boxes.iter().find(|b| b.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: b.dim(),
        });
    }
    build_graph_on_boxes(&boxes, scheme, self_loops)
}

pub fn build_graph_on_boxes(
    boxes: &[SupportBox],
    scheme: SimilarityScheme,
    self_loops: bool,
) -> Result<SimilarityGraph> {
    let n = boxes.len();
    let self_w = |w: f64| if self_loops { w } else { 0.0 };
    match scheme {
        SimilarityScheme::Gaussian(_) => {
            if n > DENSE_GRAPH_LIMIT {
                return invalid(format!(
                    "gaussian similarity is dense; {n} functionals exceed the limit of {DENSE_GRAPH_LIMIT}"
                ));
            }
            let mut w = DMatrix::zeros(n, n);
            for i in 0..n {
                w[(i, i)] = self_w(1.0);
                for j in 0..i {
                    let v = scheme.weight_at(boxes[i].distance(&boxes[j])?).unwrap();
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
            SimilarityGraph::from_dense(w)
        }
        SimilarityScheme::EpsilonNeighborhood(eps) => {
            let tree = BoxTree::new(boxes);
            let mut rows = vec![Vec::new(); n];
            for i in 0..n {
                tree.within(&boxes[i], eps, |j| {
                    if j != i {
                        rows[i].push((j as u32, 1.0));
                    }
                });
            }
            Ok(SimilarityGraph::from_rows(rows, vec![self_w(1.0); n]))
        }
        SimilarityScheme::MutualKNN(k) => {
            let tree = BoxTree::new(boxes);
            let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
            for i in 0..n {
                for j in tree.nearest(&boxes[i], i, k) {
                    rows[i].push((j as u32, 1.0));
                    rows[j].push((i as u32, 1.0));
                }
            }
            // Symmetrize as a union: duplicate entries collapse to weight 1.
            for row in &mut rows {
                row.sort_by_key(|&(j, _)| j);
                row.dedup_by_key(|&mut (j, _)| j);
            }
            Ok(SimilarityGraph::from_rows(rows, vec![0.0; n]))
        }
    }
}

/// Bounding-volume tree over boxes for range and nearest-neighbour queries
/// under the box-to-box distance.
struct BoxTree<'a> {
    boxes: &'a [SupportBox],
    order: Vec<usize>,
    nodes: Vec<BoxNode>,
}

struct BoxNode {
    lower: Vec<f64>,
    upper: Vec<f64>,
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

const BOX_TREE_LEAF: usize = 16;

impl<'a> BoxTree<'a> {
    fn new(boxes: &'a [SupportBox]) -> Self {
        let mut tree = BoxTree {
            boxes,
            order: (0..boxes.len()).collect(),
            nodes: Vec::new(),
        };
        tree.build(0, boxes.len());
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let d = self.boxes[0].dim();
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for &i in &self.order[start..end] {
            let b = &self.boxes[i];
            for k in 0..d {
                lower[k] = lower[k].min(b.lower()[k]);
                upper[k] = upper[k].max(b.upper()[k]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(BoxNode {
            lower: lower.clone(),
            upper: upper.clone(),
            start,
            end,
            children: None,
        });
        if end - start > BOX_TREE_LEAF {
            let axis = (0..d)
                .max_by(|&a, &b| (upper[a] - lower[a]).total_cmp(&(upper[b] - lower[b])))
                .unwrap();
            let mid = (start + end) / 2;
            let boxes = self.boxes;
            let center = |i: usize| boxes[i].lower()[axis] + boxes[i].upper()[axis];
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                center(a).total_cmp(&center(b)).then(a.cmp(&b))
            });
            let left = self.build(start, mid);
            let right = self.build(mid, end);
            self.nodes[id].children = Some((left, right));
        }
        id
    }

    fn node_distance(&self, node: usize, b: &SupportBox) -> f64 {
        let nd = &self.nodes[node];
        let mut s = 0.0;
        for k in 0..b.dim() {
            let gap = (nd.lower[k] - b.upper()[k])
                .max(b.lower()[k] - nd.upper[k])
                .max(0.0);
            s += gap * gap;
        }
        s.sqrt()
    }

    fn within(&self, query: &SupportBox, radius: f64, mut f: impl FnMut(usize)) {
        let mut stack = vec![0];
        while let Some(node) = stack.pop() {
            if self.node_distance(node, query) >= radius {
                continue;
            }
            let nd = &self.nodes[node];
            match nd.children {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => {
                    for &i in &self.order[nd.start..nd.end] {
                        if dist_unchecked(&self.boxes[i], query) < radius {
                            f(i);
                        }
                    }
                }
            }
        }
    }

    /// The `k` nearest boxes to `query` other than `skip`, ranked by
    /// `(distance, index)`.
    fn nearest(&self, query: &SupportBox, skip: usize, k: usize) -> Vec<usize> {
        let mut best: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
        let mut stack = vec![(0usize, 0.0f64)];
        while let Some((node, lb)) = stack.pop() {
            if best.len() == k && lb > best.peek().unwrap().dist {
                continue;
            }
            let nd = &self.nodes[node];
            match nd.children {
                Some((l, r)) => {
                    let dl = self.node_distance(l, query);
                    let dr = self.node_distance(r, query);
                    // visit the closer child first
                    if dl <= dr {
                        stack.push((r, dr));
                        stack.push((l, dl));
                    } else {
                        stack.push((l, dl));
                        stack.push((r, dr));
                    }
                }
                None => {
                    for &i in &self.order[nd.start..nd.end] {
                        if i == skip {
                            continue;
                        }
                        let cand = Ranked {
                            dist: dist_unchecked(&self.boxes[i], query),
                            index: i,
                        };
                        if best.len() < k {
                            best.push(cand);
                        } else if cand < *best.peek().unwrap() {
                            best.pop();
                            best.push(cand);
                        }
                    }
                }
            }
        }
        best.into_iter().map(|r| r.index).collect()
    }
}

fn dist_unchecked(a: &SupportBox, b: &SupportBox) -> f64 {
    a.distance(b)
        .expect("uniform dimension checked at graph build")
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ranked {
    dist: f64,
    index: usize,
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.index.cmp(&other.index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diracs(points: &[f64]) -> Vec<Functional> {
        points
            .iter()
            .enumerate()
            .map(|(i, &x)| Functional::dirac(i, vec![x]).unwrap())
            .collect()
    }

    fn box_functional(lo: [f64; 2], hi: [f64; 2]) -> Functional {
        use crate::measures::Atom;
        Functional::new(
            0,
            vec![
                Atom::point_mass(lo.to_vec(), 1.0).unwrap(),
                Atom::point_mass(hi.to_vec(), 1.0).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn support_distance_examples() {
        let f = diracs(&[0.0, 1.0]);
        assert_eq!(support_distance(&f[0], &f[1]).unwrap(), 1.0);
        let a = box_functional([0.0, 0.0], [1.0, 1.0]);
        let b = box_functional([0.5, 0.5], [2.0, 2.0]);
        assert_eq!(support_distance(&a, &b).unwrap(), 0.0);
        let c = box_functional([2.0, 0.0], [4.0, 1.0]);
        assert_eq!(support_distance(&a, &c).unwrap(), 1.0);
        assert_eq!(support_distance(&c, &a).unwrap(), 1.0);
        assert!(support_distance(&f[0], &a).is_err());
    }

    #[test]
    fn similarity_examples() {
        let f = diracs(&[0.0, 0.3]);
        let g = Functional::dirac(0, vec![0.0, 0.0]).unwrap();
        let h = Functional::dirac(1, vec![1.0, 1.0]).unwrap();
        assert_eq!(
            similarity(&f[0], &f[0], SimilarityScheme::Gaussian(1.0)).unwrap(),
            1.0
        );
        assert_eq!(
            similarity(&f[0], &f[1], SimilarityScheme::EpsilonNeighborhood(0.5)).unwrap(),
            1.0
        );
        let v = similarity(&g, &h, SimilarityScheme::Gaussian(1.0)).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
        assert!(similarity(&g, &h, SimilarityScheme::Gaussian(-1.0)).is_err());
        assert!(similarity(&g, &h, SimilarityScheme::MutualKNN(0)).is_err());
    }

    #[test]
    fn two_node_laplacian() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let g = SimilarityGraph::from_dense(w).unwrap();
        assert_eq!(
            g.laplacian_dense(),
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])
        );
    }

    #[test]
    fn two_disjoint_edges_have_double_zero_eigenvalue() {
        let g = SimilarityGraph::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)], vec![0.0; 4]).unwrap();
        let eig = g.laplacian_dense().symmetric_eigen();
        let zeros = eig.eigenvalues.iter().filter(|v| v.abs() < 1e-12).count();
        assert_eq!(zeros, 2);
        assert_eq!(g.components(), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn knn_breaks_ties_by_lower_index() {
        // 1 is equidistant from 0 and 2; with k = 1 it links to 0.
        let f = diracs(&[0.0, 1.0, 2.0, 10.0]);
        let g = build_graph(&f, SimilarityScheme::MutualKNN(1)).unwrap();
        assert_eq!(g.weight(1, 0), 1.0);
        assert_eq!(g.weight(1, 2), 1.0); // 2 chose 1
        assert_eq!(g.weight(0, 2), 0.0);
        assert_eq!(g.weight(3, 2), 1.0);
        assert_eq!(g.weight(1, 1), 0.0);
    }

    #[test]
    fn sparse_schemes_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Functional> = (0..300)
            .map(|i| Functional::dirac(i, vec![rng.random::<f64>(), rng.random::<f64>()]).unwrap())
            .collect();
        let dist = |i: usize, j: usize| support_distance(&pts[i], &pts[j]).unwrap();
        let eps = build_graph(&pts, SimilarityScheme::EpsilonNeighborhood(0.1)).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let expect = if dist(i, j) < 0.1 { 1.0 } else { 0.0 };
                assert_eq!(eps.weight(i, j), expect, "({i}, {j})");
            }
        }
        let k = 5;
        let knn = build_graph(&pts, SimilarityScheme::MutualKNN(k)).unwrap();
        let nearest = |i: usize| -> Vec<usize> {
            let mut others: Vec<usize> = (0..pts.len()).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| dist(i, a).total_cmp(&dist(i, b)).then(a.cmp(&b)));
            others.truncate(k);
            others
        };
        let lists: Vec<Vec<usize>> = (0..pts.len()).map(nearest).collect();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let expect = i != j && (lists[i].contains(&j) || lists[j].contains(&i));
                assert_eq!(knn.weight(i, j), if expect { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn induced_subgraph_recomputes_degrees() {
        let f = diracs(&[0.0, 0.1, 0.2, 0.3, 5.0]);
        for scheme in [
            SimilarityScheme::Gaussian(1.0),
            SimilarityScheme::EpsilonNeighborhood(0.15),
            SimilarityScheme::MutualKNN(2),
        ] {
            let g = build_graph(&f, scheme).unwrap();
            let local = [4, 1, 2];
            let sub = g.induced(&local);
            let full = g.weights_dense();
            let expect = DMatrix::from_fn(3, 3, |a, b| full[(local[a], local[b])]);
            assert_eq!(sub.weights_dense(), expect);
            for a in 0..3 {
                assert!((sub.degrees()[a] - expect.row(a).sum()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn operator_matches_dense_laplacian() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f: Vec<Functional> = (0..60)
            .map(|i| Functional::dirac(i, vec![rng.random::<f64>()]).unwrap())
            .collect();
        let x: Vec<f64> = (0..60).map(|_| rng.random::<f64>() - 0.5).collect();
        for scheme in [
            SimilarityScheme::Gaussian(0.2),
            SimilarityScheme::MutualKNN(3),
        ] {
            let g = build_graph(&f, scheme).unwrap();
            let mut y = vec![0.0; 60];
            g.apply(&x, &mut y);
            let dense = g.laplacian_dense() * DMatrix::from_column_slice(60, 1, &x);
            for i in 0..60 {
                assert!((y[i] - dense[i]).abs() < 1e-12);
            }
        }
    }

    fn arb_weights() -> impl Strategy<Value = DMatrix<f64>> {
        (2usize..40).prop_flat_map(|n| {
            prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), n * n).prop_map(move |raw| {
                let mut w = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..=i {
                        let (p, v) = raw[i * n + j];
                        let v = if p < 0.4 { 0.0 } else { v };
                        w[(i, j)] = v;
                        w[(j, i)] = v;
                    }
                }
                w
            })
        })
    }

    proptest! {
        #[test]
        fn quadratic_form_identity(w in arb_weights(), seed in 0u64..1000) {
            let n = w.nrows();
            let g = SimilarityGraph::from_dense(w.clone()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let xv = DMatrix::from_column_slice(n, 1, &x);
            let lhs = (xv.transpose() * g.laplacian_dense() * &xv)[(0, 0)];
            let mut rhs = 0.0;
            for i in 0..n {
                for j in 0..n {
                    rhs += 0.5 * w[(i, j)] * (x[i] - x[j]).powi(2);
                }
            }
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300) + 1e-15);
            prop_assert!((g.dirichlet_energy(&x) - rhs).abs() <= 1e-12 * rhs.abs() + 1e-15);
        }

        #[test]
        fn laplacian_kills_constants_and_is_psd(w in arb_weights()) {
            let g = SimilarityGraph::from_dense(w).unwrap();
            let l = g.laplacian_dense();
            let norm = g.laplacian_norm_bound().max(1e-300);
            for i in 0..g.n() {
                prop_assert!(l.row(i).sum().abs() <= 1e-12 * norm);
            }
            prop_assert_eq!(&l, &l.transpose());
            let eig = l.symmetric_eigen();
            prop_assert!(eig.eigenvalues.iter().all(|&v| v >= -1e-10 * norm));
        }

        #[test]
        fn self_loops_do_not_change_laplacian(pts in prop::collection::vec(0.0..1.0f64, 2..30)) {
            let f = diracs(&pts);
            for scheme in [SimilarityScheme::Gaussian(0.3), SimilarityScheme::EpsilonNeighborhood(0.2)] {
                let a = build_graph_with(&f, scheme, true).unwrap().laplacian_dense();
                let b = build_graph_with(&f, scheme, false).unwrap().laplacian_dense();
                prop_assert_eq!(a, b);
            }
        }
    }
}
