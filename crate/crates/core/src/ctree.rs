//! Cluster trees by recursive spectral bisection.
//!
//! Each cluster is split by the sign pattern of the Fiedler vector of its
//! induced similarity subgraph. Nodes are stored in preorder and every
//! node's functional indices form a contiguous slice of one permutation, so
//! a subtree is a contiguous node range and a cluster is a contiguous index
//! range.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{lanczos_extreme, Extreme, LanczosOptions};
use crate::measures::{Functional, SupportBox};
use crate::simgraph::{build_graph, SimilarityGraph, SimilarityScheme};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    /// Clusters up to this size use a dense symmetric eigensolver.
    pub dense_limit: usize,
    /// Residual tolerance relative to `‖L‖`.
    pub rel_tol: f64,
    pub max_matvecs: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_limit: 128,
            rel_tol: 1e-8,
            max_matvecs: 50_000,
            seed: 0x0f1ed1e7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeOptions {
    /// Clusters with at most this many functionals are not split.
    pub leaf_max: usize,
    /// A split is rejected if a child would have at most this many
    /// functionals; normally the number of primitives.
    pub min_cluster: usize,
    pub eigen: EigenOptions,
}

impl TreeOptions {
    pub fn new(leaf_max: usize, min_cluster: usize) -> Self {
        Self {
            leaf_max,
            min_cluster,
            eigen: EigenOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fiedler {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// Eigenvector for the second smallest eigenvalue of the Laplacian of
/// `graph`, unit norm, with its first entry of largest magnitude positive.
///
/// `start` seeds the iterative solver and is ignored on the dense path.
pub fn fiedler_vector(
    graph: &SimilarityGraph,
    start: Option<&[f64]>,
    opts: &EigenOptions,
) -> Result<Fiedler> {
    fiedler_for_cluster(graph, start, opts, 0)
}

fn fiedler_for_cluster(
    graph: &SimilarityGraph,
    start: Option<&[f64]>,
    opts: &EigenOptions,
    cluster: usize,
) -> Result<Fiedler> {
    let n = graph.n();
    if n < 2 {
        return invalid("the Fiedler vector needs at least two nodes");
    }
    let (value, mut vector) = if n <= opts.dense_limit {
        let eig = graph.laplacian_dense().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let k = order[1];
        (
            eig.eigenvalues[k],
            eig.eigenvectors
                .column(k)
                .iter()
                .copied()
                .collect::<Vec<f64>>(),
        )
    } else {
        let norm = graph.laplacian_norm_bound();
        let tol = opts.rel_tol * norm;
        let ones = vec![1.0 / (n as f64).sqrt(); n];
        let lopts = LanczosOptions {
            tol,
            max_matvecs: opts.max_matvecs,
            seed: opts.seed,
            ..LanczosOptions::default()
        };
        match lanczos_extreme(graph, Extreme::Smallest, start, &[ones], &lopts) {
            Ok(p) => (p.value, p.vector),
            Err(e) => {
                return Err(Error::EigenNonConvergence {
                    cluster,
                    size: n,
                    residual: e.best.residual,
                    tolerance: tol,
                })
            }
        }
    };
    normalize_sign(&mut vector);
    Ok(Fiedler { value, vector })
}

fn normalize_sign(v: &mut [f64]) {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let lead = v
        .iter()
        .position(|x| x.abs() >= (1.0 - 1e-8) * max)
        .unwrap_or(0);
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// How a cluster was split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRule {
    Sign,
    Median,
    Components,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bisection {
    /// Local positions (into the cluster's index list) of the first part.
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub rule: SplitRule,
}

/// Splits the graph into `{v_i ≥ 0}` and `{v_i < 0}` for its Fiedler vector
/// `v`. A disconnected graph is split along components, and a one-sided
/// sign pattern falls back to the median of `v`.
pub fn spectral_bisection(
    graph: &SimilarityGraph,
    start: Option<&[f64]>,
    opts: &EigenOptions,
) -> Result<Bisection> {
    bisect(graph, start, opts, 0)
}

fn bisect(
    graph: &SimilarityGraph,
    start: Option<&[f64]>,
    opts: &EigenOptions,
    cluster: usize,
) -> Result<Bisection> {
    let n = graph.n();
    if n < 2 {
        return invalid(format!("cannot bisect a cluster of size {n}"));
    }
    let comps = graph.components();
    if comps.len() > 1 {
        return Ok(split_components(comps));
    }
    let v = fiedler_for_cluster(graph, start, opts, cluster)?.vector;
    let (first, second): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| v[i] >= 0.0);
    if !first.is_empty() && !second.is_empty() {
        return Ok(Bisection {
            first,
            second,
            rule: SplitRule::Sign,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let half = n.div_ceil(2);
    let mut first = order[..half].to_vec();
    let mut second = order[half..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    Ok(Bisection {
        first,
        second,
        rule: SplitRule::Median,
    })
}

/// Largest components first, each to the currently smaller side.
fn split_components(mut comps: Vec<Vec<usize>>) -> Bisection {
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    let mut first = Vec::new();
    let mut second = Vec::new();
    for c in comps {
        if first.len() <= second.len() {
            first.extend(c);
        } else {
            second.extend(c);
        }
    }
    first.sort_unstable();
    second.sort_unstable();
    Bisection {
        first,
        second,
        rule: SplitRule::Components,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNode {
    level: usize,
    start: usize,
    end: usize,
    parent: Option<usize>,
    children: Option<[usize; 2]>,
    subtree_end: usize,
    bbox: SupportBox,
}

impl ClusterNode {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// Range of this cluster inside [`ClusterTree::permutation`].
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }

    pub fn parent(&self) -> Option<usize> {
        self.parent
    }

    pub fn children(&self) -> Option<[usize; 2]> {
        self.children
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    /// One past the last node of this subtree in preorder.
    pub fn subtree_end(&self) -> usize {
        self.subtree_end
    }

    pub fn bbox(&self) -> &SupportBox {
        &self.bbox
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTree {
    nodes: Vec<ClusterNode>,
    perm: Vec<usize>,
    depth: usize,
}

impl ClusterTree {
    /// Tree with the root as its only leaf.
    pub fn single(functionals: &[Functional]) -> Result<Self> {
        if functionals.is_empty() {
            return invalid("no functionals");
        }
        let boxes = member_boxes(functionals)?;
        let perm: Vec<usize> = (0..functionals.len()).collect();
        Self::from_parts(
            vec![NodeSpec {
                level: 0,
                start: 0,
                end: perm.len(),
                children: None,
            }],
            perm,
            &boxes,
        )
    }

    /// Rebuilds a tree from preorder node ranges over `perm`. Checks every
    /// structural invariant.
    pub fn from_parts(
        specs: Vec<NodeSpec>,
        perm: Vec<usize>,
        boxes: &[SupportBox],
    ) -> Result<Self> {
        let n = perm.len();
        if boxes.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: boxes.len(),
            });
        }
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return invalid("cluster permutation is not a permutation");
            }
            seen[p] = true;
        }
        let Some(root) = specs.first() else {
            return invalid("cluster tree has no nodes");
        };
        if root.start != 0 || root.end != n || root.level != 0 {
            return invalid("root must span all functionals at level 0");
        }
        let mut nodes: Vec<ClusterNode> = Vec::with_capacity(specs.len());
        for (id, s) in specs.iter().enumerate() {
            if s.start >= s.end || s.end > n {
                return invalid(format!(
                    "node {id} has an empty or out-of-range index range"
                ));
            }
            let bbox = SupportBox::union(perm[s.start..s.end].iter().map(|&i| &boxes[i]))?;
            nodes.push(ClusterNode {
                level: s.level,
                start: s.start,
                end: s.end,
                parent: None,
                children: s.children,
                subtree_end: id + 1,
                bbox,
            });
        }
        for id in 0..nodes.len() {
            if let Some([a, b]) = nodes[id].children {
                if a != id + 1 || b <= a || b >= nodes.len() {
                    return invalid(format!("node {id} children are not in preorder"));
                }
                let (p, ca, cb) = (&nodes[id], &nodes[a], &nodes[b]);
                if ca.start != p.start || ca.end != cb.start || cb.end != p.end {
                    return invalid(format!("children of node {id} do not partition it"));
                }
                if ca.level != p.level + 1 || cb.level != p.level + 1 {
                    return invalid(format!("children of node {id} have wrong levels"));
                }
                nodes[a].parent = Some(id);
                nodes[b].parent = Some(id);
            }
        }
        for id in (0..nodes.len()).rev() {
            if let Some([_, b]) = nodes[id].children {
                nodes[id].subtree_end = nodes[b].subtree_end;
                if nodes[id + 1].subtree_end != b {
                    return invalid(format!("node {id} subtree is not contiguous"));
                }
            }
        }
        if nodes[0].subtree_end != nodes.len() {
            return invalid("nodes outside the root subtree");
        }
        let depth = nodes.iter().map(|x| x.level).max().unwrap_or(0);
        Ok(Self { nodes, perm, depth })
    }

    pub fn nodes(&self) -> &[ClusterNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &ClusterNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> &ClusterNode {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Maximal level `J`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Functional indices in cluster order; each node owns a slice.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Functional indices of node `id`.
    pub fn indices(&self, id: usize) -> &[usize] {
        &self.perm[self.nodes[id].range()]
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf())
    }

    /// Node ids at level `j`, in preorder.
    pub fn level_nodes(&self, j: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].level == j)
            .collect()
    }

    pub fn specs(&self) -> Vec<NodeSpec> {
        self.nodes
            .iter()
            .map(|x| NodeSpec {
                level: x.level,
                start: x.start,
                end: x.end,
                children: x.children,
            })
            .collect()
    }
}

/// Serializable shape of one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeSpec {
    pub level: usize,
    pub start: usize,
    pub end: usize,
    pub children: Option<[usize; 2]>,
}

fn member_boxes(functionals: &[Functional]) -> Result<Vec<SupportBox>> {
    let d = functionals[0].dim();
    functionals
        .iter()
        .map(|f| {
            if f.dim() != d {
                Err(Error::DimensionMismatch {
                    expected: d,
                    found: f.dim(),
                })
            } else {
                Ok(f.support_box())
            }
        })
        .collect()
}

/// Recursive spectral bisection of `functionals`.
///
/// Clusters of at most `leaf_max` functionals become leaves, and so does any
/// cluster whose split would leave a child with at most `min_cluster`
/// functionals.
pub fn build_cluster_tree(
    functionals: &[Functional],
    scheme: SimilarityScheme,
    opts: &TreeOptions,
) -> Result<ClusterTree> {
    let n = functionals.len();
    if n <= opts.min_cluster {
        return invalid(format!(
            "no samplets constructible: {n} functionals but {} primitives",
            opts.min_cluster
        ));
    }
    if opts.leaf_max <= opts.min_cluster {
        return invalid(format!(
            "leaf_max = {} must exceed the number of primitives {}",
            opts.leaf_max, opts.min_cluster
        ));
    }
    let boxes = member_boxes(functionals)?;
    let graph = build_graph(functionals, scheme)?;
    let centers: Vec<Vec<f64>> = boxes.iter().map(SupportBox::center).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut specs: Vec<NodeSpec> = Vec::new();
    // (start, end, level, parent, child slot)
    let mut stack = vec![(0usize, n, 0usize, usize::MAX, 0usize)];
    while let Some((start, end, level, parent, slot)) = stack.pop() {
        let id = specs.len();
        specs.push(NodeSpec {
            level,
            start,
            end,
            children: None,
        });
        if parent != usize::MAX {
            let ch = specs[parent].children.get_or_insert([0, 0]);
            ch[slot] = id;
        }
        let size = end - start;
        if size <= opts.leaf_max {
            continue;
        }
        let members = &perm[start..end];
        let sub: Cow<SimilarityGraph> = if size == n {
            Cow::Borrowed(&graph)
        } else {
            Cow::Owned(graph.induced(members))
        };
        let guess = (size > opts.eigen.dense_limit)
            .then(|| geometric_guess(members, &centers, opts.eigen.seed ^ id as u64));
        let split = bisect(&sub, guess.as_deref(), &opts.eigen, id)?;
        if split.first.len() <= opts.min_cluster || split.second.len() <= opts.min_cluster {
            continue;
        }
        let reordered: Vec<usize> = split
            .first
            .iter()
            .chain(&split.second)
            .map(|&k| members[k])
            .collect();
        perm[start..end].copy_from_slice(&reordered);
        let mid = start + split.first.len();
        specs[id].children = Some([0, 0]);
        stack.push((mid, end, level + 1, id, 1));
        stack.push((start, mid, level + 1, id, 0));
    }
    ClusterTree::from_parts(specs, perm, &boxes)
}

/// Centered coordinate of largest spread, slightly perturbed so it is never
/// exactly an eigenvector of a symmetric configuration.
fn geometric_guess(members: &[usize], centers: &[Vec<f64>], seed: u64) -> Vec<f64> {
    let d = centers[members[0]].len();
    let m = members.len() as f64;
    let mut best_axis = 0;
    let mut best_var = -1.0;
    let mut best_mean = 0.0;
    for k in 0..d {
        let mean = members.iter().map(|&i| centers[i][k]).sum::<f64>() / m;
        let var = members
            .iter()
            .map(|&i| (centers[i][k] - mean).powi(2))
            .sum::<f64>()
            / m;
        if var > best_var {
            best_var = var;
            best_axis = k;
            best_mean = mean;
        }
    }
    let sd = best_var.sqrt().max(1e-300);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    members
        .iter()
        .map(|&i| (centers[i][best_axis] - best_mean) / sd + 1e-3 * rng.random_range(-1.0..1.0))
        .collect()
}

/// Checks all structural invariants against the functional count; used by
/// tests and by loaders.
pub fn check_tree(tree: &ClusterTree, min_leaf: usize) -> Result<()> {
    let n = tree.len();
    let mut covered = vec![0u32; n];
    for id in tree.leaves() {
        if id != 0 && tree.node(id).len() <= min_leaf {
            return invalid(format!(
                "leaf {id} has {} functionals, not more than {min_leaf}",
                tree.node(id).len()
            ));
        }
        for &i in tree.indices(id) {
            covered[i] += 1;
        }
    }
    if covered.iter().any(|&c| c != 1) {
        return invalid("leaves do not partition the functionals");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn path(n: usize) -> SimilarityGraph {
        let edges: Vec<(usize, usize, f64)> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        SimilarityGraph::from_edges(n, &edges, vec![0.0; n]).unwrap()
    }

    fn diracs(points: &[f64]) -> Vec<Functional> {
        points
            .iter()
            .enumerate()
            .map(|(i, &x)| Functional::dirac(i, vec![x]).unwrap())
            .collect()
    }

    #[test]
    fn fiedler_of_two_path() {
        let f = fiedler_vector(&path(2), None, &EigenOptions::default()).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((f.value - 2.0).abs() < 1e-14);
        assert!((f.vector[0] - s).abs() < 1e-14 && (f.vector[1] + s).abs() < 1e-14);
    }

    #[test]
    fn fiedler_of_four_path_sign_pattern() {
        let f = fiedler_vector(&path(4), None, &EigenOptions::default()).unwrap();
        let signs: Vec<bool> = f.vector.iter().map(|&x| x > 0.0).collect();
        assert_eq!(signs, vec![true, true, false, false]);
    }

    #[test]
    fn fiedler_of_triangle() {
        let w = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        let g = SimilarityGraph::from_dense(w).unwrap();
        let f = fiedler_vector(&g, None, &EigenOptions::default()).unwrap();
        assert!((f.value - 3.0).abs() < 1e-12);
        let sum: f64 = f.vector.iter().sum();
        let nrm: f64 = f.vector.iter().map(|x| x * x).sum();
        assert!(sum.abs() < 1e-12 && (nrm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_path_agrees_with_dense() {
        let g = build_graph(
            &diracs(
                &(0..700)
                    .map(|i| (i as f64 / 699.0).powf(1.3))
                    .collect::<Vec<_>>(),
            ),
            SimilarityScheme::MutualKNN(4),
        )
        .unwrap();
        let dense = fiedler_vector(&g, None, &EigenOptions::default()).unwrap();
        let opts = EigenOptions {
            dense_limit: 10,
            ..EigenOptions::default()
        };
        let iter = fiedler_vector(&g, None, &opts).unwrap();
        assert!((dense.value - iter.value).abs() < 1e-8 * g.laplacian_norm_bound());
        let overlap: f64 = dense
            .vector
            .iter()
            .zip(&iter.vector)
            .map(|(a, b)| a * b)
            .sum();
        assert!(overlap > 1.0 - 1e-6, "overlap {overlap}");
    }

    #[test]
    fn nonconvergence_is_reported() {
        let g = path(800);
        let opts = EigenOptions {
            dense_limit: 10,
            max_matvecs: 20,
            ..EigenOptions::default()
        };
        match fiedler_vector(&g, None, &opts) {
            Err(Error::EigenNonConvergence { size, .. }) => assert_eq!(size, 800),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn separated_groups_bisect() {
        let f = diracs(&[0.0, 0.1, 10.0, 10.1]);
        let g = build_graph(&f, SimilarityScheme::Gaussian(1.0)).unwrap();
        let b = spectral_bisection(&g, None, &EigenOptions::default()).unwrap();
        let mut parts = [b.first.clone(), b.second.clone()];
        parts.sort();
        assert_eq!(parts, [vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn two_nodes_split_apart() {
        let b = spectral_bisection(&path(2), None, &EigenOptions::default()).unwrap();
        assert_eq!((b.first.len(), b.second.len()), (1, 1));
    }

    #[test]
    fn disconnected_edges_split_by_component() {
        let g = SimilarityGraph::from_edges(4, &[(0, 2, 1.0), (1, 3, 1.0)], vec![0.0; 4]).unwrap();
        let b = spectral_bisection(&g, None, &EigenOptions::default()).unwrap();
        assert_eq!(b.rule, SplitRule::Components);
        assert_eq!((b.first, b.second), (vec![0, 2], vec![1, 3]));
    }

    #[test]
    fn eight_uniform_points() {
        let pts: Vec<f64> = (0..8).map(|k| k as f64 / 7.0).collect();
        let tree = build_cluster_tree(
            &diracs(&pts),
            SimilarityScheme::Gaussian(0.5),
            &TreeOptions::new(2, 1),
        )
        .unwrap();
        assert_eq!(tree.depth(), 2);
        let leaves: Vec<Vec<usize>> = tree
            .leaves()
            .map(|id| {
                let mut v = tree.indices(id).to_vec();
                v.sort();
                v
            })
            .collect();
        for leaf in &leaves {
            assert!(leaf.len() >= 2);
            assert!(leaf.windows(2).all(|w| w[1] == w[0] + 1), "{leaf:?}");
        }
        check_tree(&tree, 1).unwrap();
    }

    #[test]
    fn root_can_be_the_only_leaf() {
        let tree = build_cluster_tree(
            &diracs(&[0.0, 0.5, 1.0]),
            SimilarityScheme::Gaussian(1.0),
            &TreeOptions::new(3, 1),
        )
        .unwrap();
        assert_eq!(tree.nodes().len(), 1);
        assert_eq!(tree.depth(), 0);
    }

    #[test]
    fn rejects_too_few_functionals() {
        let f = diracs(&[0.0, 1.0, 2.0]);
        let r = build_cluster_tree(&f, SimilarityScheme::Gaussian(1.0), &TreeOptions::new(8, 3));
        assert!(matches!(r, Err(Error::InvalidInput(_))));
        let r = build_cluster_tree(&f, SimilarityScheme::Gaussian(1.0), &TreeOptions::new(1, 1));
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn from_parts_rejects_broken_partitions() {
        let f = diracs(&[0.0, 1.0, 2.0, 3.0]);
        let boxes: Vec<SupportBox> = f.iter().map(Functional::support_box).collect();
        let bad = vec![
            NodeSpec {
                level: 0,
                start: 0,
                end: 4,
                children: Some([1, 2]),
            },
            NodeSpec {
                level: 1,
                start: 0,
                end: 2,
                children: None,
            },
            NodeSpec {
                level: 1,
                start: 3,
                end: 4,
                children: None,
            },
        ];
        assert!(ClusterTree::from_parts(bad, vec![0, 1, 2, 3], &boxes).is_err());
        let dup = vec![NodeSpec {
            level: 0,
            start: 0,
            end: 4,
            children: None,
        }];
        assert!(ClusterTree::from_parts(dup, vec![0, 1, 1, 3], &boxes).is_err());
    }

    fn arb_points() -> impl Strategy<Value = Vec<Functional>> {
        prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 12..120).prop_map(|pts| {
            pts.into_iter()
                .enumerate()
                .map(|(i, (x, y))| Functional::dirac(i, vec![x, y]).unwrap())
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn trees_partition_and_are_deterministic(f in arb_points(), k in 2usize..6) {
            let opts = TreeOptions::new(8, 3);
            let scheme = SimilarityScheme::MutualKNN(k);
            let a = build_cluster_tree(&f, scheme, &opts).unwrap();
            let b = build_cluster_tree(&f, scheme, &opts).unwrap();
            prop_assert_eq!(&a, &b);
            check_tree(&a, 3).unwrap();
            for id in 0..a.nodes().len() {
                let node = a.node(id);
                if let Some([l, r]) = node.children() {
                    let mut union: Vec<usize> = a.indices(l).iter().chain(a.indices(r)).copied().collect();
                    union.sort();
                    let mut parent = a.indices(id).to_vec();
                    parent.sort();
                    prop_assert_eq!(union, parent);
                    prop_assert!(node.bbox().contains_box(a.node(l).bbox()));
                } else {
                    prop_assert!(node.len() > 3);
                }
            }
            for j in 0..=a.depth() {
                let mut seen = std::collections::HashSet::new();
                for id in a.level_nodes(j) {
                    for &i in a.indices(id) {
                        prop_assert!(seen.insert(i));
                    }
                }
            }
        }
    }
}
