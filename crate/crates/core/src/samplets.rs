//! Samplet bases: per-cluster QR filters of moment matrices assembled into an
//! orthogonal transform.
//!
//! For a cluster with child scaling functionals `Φ` and moment matrix `M`
//! (primitives × functionals), the QR decomposition `Mᵀ = Q R` gives the
//! new functionals `Qᵀ Φ`. Their moments are the rows of `R`, so the first
//! `m_Φ = min(m_𝒫, n)` of them carry all moments (scaling functionals) and
//! the remaining ones annihilate every primitive (samplets).
//!
//! Rows of the global transform `U` are ordered by level, then by cluster in
//! preorder, then by QR column; the `m_Φ` scaling functionals of the root
//! come last. `U` is never stored: transforms run the two-scale cascade.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::ctree::ClusterTree;
use crate::error::{invalid, Error, Result};
use crate::linalg::householder_qr;
use crate::measures::{primitive_count, Functional, PrimitiveBasis, SupportBox};

/// Moments of the functionals attached to one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    /// `m_𝒫 × n`, rows in primitive order.
    pub values: DMatrix<f64>,
    pub cluster: usize,
}

/// `M[a, i] = ⟨p_a, f_i⟩` for the given functionals in order.
pub fn leaf_moment_matrix(
    cluster: usize,
    functionals: &[&Functional],
    primitives: &PrimitiveBasis,
) -> Result<MomentMatrix> {
    let m = primitives.len();
    let mut values = DMatrix::zeros(m, functionals.len());
    let mut col = vec![0.0; m];
    for (b, f) in functionals.iter().enumerate() {
        primitives.moments_into(f, &mut col)?;
        values.column_mut(b).copy_from_slice(&col);
    }
    Ok(MomentMatrix { values, cluster })
}

/// Moment matrix of functionals given as coefficient rows over
/// `functionals`: entry `(a, b)` is `rows[b, :] · [⟨p_a, f_i⟩]_i`.
pub fn moment_matrix(
    cluster: usize,
    functionals: &[&Functional],
    rows: &DMatrix<f64>,
    primitives: &PrimitiveBasis,
) -> Result<MomentMatrix> {
    if rows.ncols() != functionals.len() {
        return Err(Error::LengthMismatch {
            expected: functionals.len(),
            found: rows.ncols(),
        });
    }
    let raw = leaf_moment_matrix(cluster, functionals, primitives)?;
    Ok(MomentMatrix {
        values: raw.values * rows.transpose(),
        cluster,
    })
}

/// Orthogonal two-scale filter of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFilters {
    /// `n × n` orthogonal; first `m_phi` columns are `Q_Φ`, the rest `Q_Ψ`.
    pub q: DMatrix<f64>,
    /// `n × m_𝒫` upper trapezoidal with `Mᵀ = Q R`.
    pub r: DMatrix<f64>,
    pub m_phi: usize,
}

impl ClusterFilters {
    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn samplets(&self) -> usize {
        self.n() - self.m_phi
    }

    /// Moments of the scaling functionals, `m_𝒫 × m_Φ`.
    pub fn scaling_moments(&self) -> DMatrix<f64> {
        self.r.rows(0, self.m_phi).transpose()
    }
}

/// Householder QR of `Mᵀ` with nonnegative diagonal of `R`.
pub fn cluster_filters(m: &MomentMatrix) -> ClusterFilters {
    let (q, r) = householder_qr(&m.values.transpose());
    let m_phi = m.values.nrows().min(m.values.ncols());
    ClusterFilters { q, r, m_phi }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Samplet,
    Scaling,
}

/// Description of one row of `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampletMeta {
    pub kind: RowKind,
    pub level: usize,
    pub node: usize,
    /// QR column inside the node's filter.
    pub local: usize,
    /// Bounding box of the node, which contains the row's support.
    pub bbox: SupportBox,
    pub diameter: f64,
}

/// Sparse coefficient row over functional indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, v)| v * x[i])
            .sum()
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampletBasis {
    tree: ClusterTree,
    dim: usize,
    degree: u32,
    filters: Vec<ClusterFilters>,
    /// First output row of each node's samplets.
    samplet_offset: Vec<usize>,
    /// Offset of each node's scaling coefficients in cascade scratch.
    phi_offset: Vec<usize>,
    meta: Vec<SampletMeta>,
}

/// Builds the samplet basis bottom-up over `tree`.
///
/// Leaves use the raw functionals as finest scaling functionals; parents
/// re-expand their children's scaling moments in their own primitive basis.
pub fn build_samplet_basis(
    functionals: &[Functional],
    tree: &ClusterTree,
    degree: u32,
) -> Result<SampletBasis> {
    let n = functionals.len();
    if tree.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: tree.len(),
        });
    }
    if n == 0 {
        return invalid("no functionals");
    }
    let dim = functionals[0].dim();
    if let Some(f) = functionals.iter().find(|f| f.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: f.dim(),
        });
    }
    let m_p = primitive_count(dim, degree);
    check_leaves(tree, m_p)?;

    let nodes = tree.nodes();
    let mut filters: Vec<Option<ClusterFilters>> = vec![None; nodes.len()];
    let mut bases: Vec<Option<PrimitiveBasis>> = vec![None; nodes.len()];
    let mut scaling: Vec<Option<DMatrix<f64>>> = vec![None; nodes.len()];
    for id in (0..nodes.len()).rev() {
        let node = &nodes[id];
        let basis = PrimitiveBasis::new(dim, degree, node.bbox())?;
        let moments = match node.children() {
            None => {
                let members: Vec<&Functional> =
                    tree.indices(id).iter().map(|&i| &functionals[i]).collect();
                leaf_moment_matrix(id, &members, &basis)?
            }
            Some(children) => {
                let blocks: Vec<DMatrix<f64>> = children
                    .iter()
                    .map(|&c| {
                        let t = basis.transfer_from(bases[c].as_ref().unwrap());
                        t * scaling[c].take().unwrap()
                    })
                    .collect();
                let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
                let mut values = DMatrix::zeros(m_p, cols);
                let mut at = 0;
                for b in &blocks {
                    values.columns_mut(at, b.ncols()).copy_from(b);
                    at += b.ncols();
                }
                for &c in &children {
                    bases[c] = None;
                }
                MomentMatrix {
                    values,
                    cluster: id,
                }
            }
        };
        let f = cluster_filters(&moments);
        scaling[id] = Some(f.scaling_moments());
        bases[id] = Some(basis);
        filters[id] = Some(f);
    }
    let filters = filters.into_iter().map(Option::unwrap).collect();
    SampletBasis::assemble(tree.clone(), dim, degree, filters)
}

fn check_leaves(tree: &ClusterTree, m_p: usize) -> Result<()> {
    for id in tree.leaves() {
        // The root may be a leaf of any size; it then only carries scaling
        // functionals (and samplets if it is larger than m_𝒫).
        if id != 0 && tree.node(id).len() <= m_p {
            return invalid(format!(
                "leaf {id} has {} functionals; leaves need more than {m_p}",
                tree.node(id).len()
            ));
        }
    }
    Ok(())
}

impl SampletBasis {
    /// Reassembles a basis from a tree and its per-node filters, validating
    /// all shapes.
    pub fn from_parts(
        tree: ClusterTree,
        dim: usize,
        degree: u32,
        filters: Vec<ClusterFilters>,
    ) -> Result<Self> {
        check_leaves(&tree, primitive_count(dim, degree))?;
        if tree.root().bbox().dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: tree.root().bbox().dim(),
            });
        }
        Self::assemble(tree, dim, degree, filters)
    }

    fn assemble(
        tree: ClusterTree,
        dim: usize,
        degree: u32,
        filters: Vec<ClusterFilters>,
    ) -> Result<Self> {
        let nodes = tree.nodes();
        if filters.len() != nodes.len() {
            return Err(Error::LengthMismatch {
                expected: nodes.len(),
                found: filters.len(),
            });
        }
        let m_p = primitive_count(dim, degree);
        for (id, node) in nodes.iter().enumerate() {
            let expect = match node.children() {
                None => node.len(),
                Some(ch) => ch.iter().map(|&c| filters[c].m_phi).sum(),
            };
            let f = &filters[id];
            if f.q.nrows() != expect
                || f.q.ncols() != expect
                || f.r.nrows() != expect
                || f.r.ncols() != m_p
                || f.m_phi != expect.min(m_p)
            {
                return invalid(format!("filter shapes of node {id} do not match the tree"));
            }
        }

        let mut phi_offset = Vec::with_capacity(nodes.len() + 1);
        let mut acc = 0;
        for f in &filters {
            phi_offset.push(acc);
            acc += f.m_phi;
        }
        phi_offset.push(acc);

        let mut samplet_offset = vec![0; nodes.len()];
        let mut meta = Vec::with_capacity(tree.len());
        for j in 0..=tree.depth() {
            for id in tree.level_nodes(j) {
                samplet_offset[id] = meta.len();
                let f = &filters[id];
                let bbox = nodes[id].bbox();
                for k in f.m_phi..f.n() {
                    meta.push(SampletMeta {
                        kind: RowKind::Samplet,
                        level: j,
                        node: id,
                        local: k,
                        bbox: bbox.clone(),
                        diameter: bbox.diameter(),
                    });
                }
            }
        }
        let root_box = nodes[0].bbox();
        for k in 0..filters[0].m_phi {
            meta.push(SampletMeta {
                kind: RowKind::Scaling,
                level: 0,
                node: 0,
                local: k,
                bbox: root_box.clone(),
                diameter: root_box.diameter(),
            });
        }
        if meta.len() != tree.len() {
            return invalid(format!(
                "filters produce {} rows for {} functionals",
                meta.len(),
                tree.len()
            ));
        }
        Ok(Self {
            tree,
            dim,
            degree,
            filters,
            samplet_offset,
            phi_offset,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn primitive_count(&self) -> usize {
        primitive_count(self.dim, self.degree)
    }

    pub fn tree(&self) -> &ClusterTree {
        &self.tree
    }

    pub fn filters(&self) -> &[ClusterFilters] {
        &self.filters
    }

    pub fn meta(&self) -> &[SampletMeta] {
        &self.meta
    }

    pub fn samplet_count(&self) -> usize {
        self.len() - self.filters[0].m_phi
    }

    /// Rows of node `id`'s samplets in `U`.
    pub fn samplet_rows(&self, id: usize) -> Range<usize> {
        let s = self.samplet_offset[id];
        s..s + self.filters[id].samplets()
    }

    /// Number of samplets on each level `0..=J`.
    pub fn samplets_per_level(&self) -> Vec<usize> {
        let mut out = vec![0; self.tree.depth() + 1];
        for m in &self.meta {
            if m.kind == RowKind::Samplet {
                out[m.level] += 1;
            }
        }
        out
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: len,
            });
        }
        Ok(())
    }

    /// `U x`, with `x` indexed by functional.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let perm = self.tree.permutation();
        let mut c = vec![0.0; self.len()];
        let root_phi = self.cascade_up(
            0,
            |p| x[perm[p]],
            |id, s| {
                let at = self.samplet_offset[id];
                c[at..at + s.len()].copy_from_slice(s);
            },
        );
        let n = self.len();
        c[n - root_phi.len()..].copy_from_slice(&root_phi);
        Ok(c)
    }

    /// `Uᵀ c`.
    pub fn inverse(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.check_len(c.len())?;
        let n = self.len();
        let m_phi = self.filters[0].m_phi;
        let perm = self.tree.permutation();
        let mut x = vec![0.0; n];
        self.cascade_down(
            0,
            &c[n - m_phi..],
            |id| Some(&c[self.samplet_rows(id)]),
            |p, v| x[perm[p]] = v,
        );
        Ok(x)
    }

    /// Two-scale analysis of the subtree rooted at `top`. `leaf_value(p)`
    /// supplies the data at permutation position `p`; `emit` receives each
    /// node's samplet coefficients. Returns the scaling coefficients of `top`.
    fn cascade_up(
        &self,
        top: usize,
        leaf_value: impl Fn(usize) -> f64,
        mut emit: impl FnMut(usize, &[f64]),
    ) -> Vec<f64> {
        let nodes = self.tree.nodes();
        let end = nodes[top].subtree_end();
        let base = self.phi_offset[top];
        let mut phi = vec![0.0; self.phi_offset[end] - base];
        let mut input = Vec::new();
        let mut out = Vec::new();
        for id in (top..end).rev() {
            let node = &nodes[id];
            input.clear();
            match node.children() {
                None => input.extend(node.range().map(&leaf_value)),
                Some(ch) => {
                    for c in ch {
                        let s = self.phi_offset[c] - base;
                        input.extend_from_slice(&phi[s..s + self.filters[c].m_phi]);
                    }
                }
            }
            let f = &self.filters[id];
            out.clear();
            out.extend(
                f.q.column_iter()
                    .map(|col| col.iter().zip(&input).map(|(a, b)| a * b).sum::<f64>()),
            );
            let s = self.phi_offset[id] - base;
            phi[s..s + f.m_phi].copy_from_slice(&out[..f.m_phi]);
            if f.samplets() > 0 {
                emit(id, &out[f.m_phi..]);
            }
        }
        phi[..self.filters[top].m_phi].to_vec()
    }

    /// Two-scale synthesis of the subtree rooted at `top` from its scaling
    /// coefficients and, where given, each node's samplet coefficients.
    /// `write(p, v)` receives the value at permutation position `p`.
    fn cascade_down<'a>(
        &self,
        top: usize,
        top_phi: &[f64],
        samplets: impl Fn(usize) -> Option<&'a [f64]>,
        mut write: impl FnMut(usize, f64),
    ) {
        let nodes = self.tree.nodes();
        let end = nodes[top].subtree_end();
        let base = self.phi_offset[top];
        let mut phi = vec![0.0; self.phi_offset[end] - base];
        phi[..top_phi.len()].copy_from_slice(top_phi);
        let mut input = Vec::new();
        for id in top..end {
            let node = &nodes[id];
            let f = &self.filters[id];
            let s = self.phi_offset[id] - base;
            input.clear();
            input.extend_from_slice(&phi[s..s + f.m_phi]);
            match samplets(id) {
                Some(c) => input.extend_from_slice(c),
                None => input.resize(f.n(), 0.0),
            }
            let out = &f.q * nalgebra::DVector::from_column_slice(&input);
            match node.children() {
                None => {
                    for (k, p) in node.range().enumerate() {
                        write(p, out[k]);
                    }
                }
                Some(ch) => {
                    let mut at = 0;
                    for c in ch {
                        let m = self.filters[c].m_phi;
                        let t = self.phi_offset[c] - base;
                        phi[t..t + m].copy_from_slice(&out.as_slice()[at..at + m]);
                        at += m;
                    }
                }
            }
        }
    }

    /// Row `i` of `U` as a sparse vector over the functionals of its cluster.
    pub fn coefficient_row(&self, i: usize) -> SparseRow {
        let m = &self.meta[i];
        let f = &self.filters[m.node];
        // A unit coefficient at QR column `local`, pushed through the
        // synthesis cascade of the node's subtree.
        let mut top_phi = vec![0.0; f.m_phi];
        let mut own = vec![0.0; f.samplets()];
        if m.local < f.m_phi {
            top_phi[m.local] = 1.0;
        } else {
            own[m.local - f.m_phi] = 1.0;
        }
        let node = self.tree.node(m.node);
        let range = node.range();
        let mut values = vec![0.0; range.len()];
        let start = range.start;
        let top = m.node;
        self.cascade_down(
            top,
            &top_phi,
            |id| (id == top).then_some(&own[..]),
            |p, v| values[p - start] = v,
        );
        SparseRow {
            indices: self.tree.permutation()[range].to_vec(),
            values,
        }
    }

    /// Dense `U`, assembled row by row.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut u = DMatrix::zeros(n, n);
        for i in 0..n {
            let row = self.coefficient_row(i);
            for (&j, &v) in row.indices.iter().zip(&row.values) {
                u[(i, j)] = v;
            }
        }
        u
    }

    /// `U A Uᵀ` through cascades over columns, then rows.
    pub fn transform_matrix(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.len();
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if a.nrows() != n { a.nrows() } else { a.ncols() },
            });
        }
        let mut ua = DMatrix::zeros(n, n);
        for j in 0..n {
            let col = self.forward(a.column(j).as_slice())?;
            ua.column_mut(j).copy_from_slice(&col);
        }
        // (U (UA)ᵀ)ᵀ = U A Uᵀ; rows of UA are columns of its transpose
        let uat = ua.transpose();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let col = self.forward(uat.column(j).as_slice())?;
            out.column_mut(j).copy_from_slice(&col);
        }
        Ok(out.transpose())
    }

    /// Inverse of [`transform_matrix`](Self::transform_matrix): `Uᵀ C U`.
    pub fn inverse_transform_matrix(&self, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.len();
        if c.nrows() != n || c.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.nrows(),
            });
        }
        let mut utc = DMatrix::zeros(n, n);
        for j in 0..n {
            let col = self.inverse(c.column(j).as_slice())?;
            utc.column_mut(j).copy_from_slice(&col);
        }
        let t = utc.transpose();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let col = self.inverse(t.column(j).as_slice())?;
            out.column_mut(j).copy_from_slice(&col);
        }
        Ok(out.transpose())
    }
}

pub fn forward_transform(basis: &SampletBasis, x: &[f64]) -> Result<Vec<f64>> {
    basis.forward(x)
}

pub fn inverse_transform(basis: &SampletBasis, c: &[f64]) -> Result<Vec<f64>> {
    basis.inverse(c)
}

pub fn transform_matrix(basis: &SampletBasis, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    basis.transform_matrix(a)
}

/// Largest relative primitive moment of any samplet:
/// `|u_i · m| / ‖m‖₂`, where `m = [⟨p, f_j⟩]_j` over the samplet's cluster
/// and `p` runs over the primitives of total degree `≤ degree`, rescaled to
/// that cluster's box. Zero when there are no samplets.
pub fn verify_vanishing_moments(
    basis: &SampletBasis,
    functionals: &[Functional],
    degree: u32,
) -> Result<f64> {
    basis.check_len(functionals.len())?;
    let tree = basis.tree();
    let perm = tree.permutation();
    let mut worst = 0.0f64;
    for id in 0..tree.nodes().len() {
        if basis.filters[id].samplets() == 0 {
            continue;
        }
        let node = tree.node(id);
        let prims = PrimitiveBasis::new(basis.dim, degree, node.bbox())?;
        let members: Vec<&Functional> = perm[node.range()]
            .iter()
            .map(|&i| &functionals[i])
            .collect();
        let raw = leaf_moment_matrix(id, &members, &prims)?;
        let start = node.range().start;
        for a in 0..prims.len() {
            let row = raw.values.row(a);
            let scale = row.norm();
            if scale == 0.0 {
                continue;
            }
            let mut own = Vec::new();
            basis.cascade_up(
                id,
                |p| row[p - start],
                |nid, s| {
                    if nid == id {
                        own = s.to_vec();
                    }
                },
            );
            for v in own {
                worst = worst.max(v.abs() / scale);
            }
        }
    }
    Ok(worst)
}

/// Result of hard thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct Compressed<T> {
    pub values: T,
    /// Entries with `|e| ≥ σ·max|e|`.
    pub kept: usize,
    /// Frobenius norm of the zeroed part.
    pub dropped_norm: f64,
    pub threshold: f64,
}

fn compress_slice(values: &mut [f64], sigma: f64) -> Result<(usize, f64, f64)> {
    if !(sigma >= 0.0) {
        return invalid(format!("threshold must be nonnegative, got {sigma}"));
    }
    let max = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cut = sigma * max;
    let mut kept = 0;
    let mut dropped = 0.0;
    for v in values.iter_mut() {
        if v.abs() < cut {
            dropped += *v * *v;
            *v = 0.0;
        } else {
            kept += 1;
        }
    }
    Ok((kept, dropped.sqrt(), cut))
}

/// Zeroes every entry with `|e| < σ·max|e|`.
pub fn threshold_compress(c: &DMatrix<f64>, sigma: f64) -> Result<Compressed<DMatrix<f64>>> {
    let mut values = c.clone();
    let (kept, dropped_norm, threshold) = compress_slice(values.as_mut_slice(), sigma)?;
    Ok(Compressed {
        values,
        kept,
        dropped_norm,
        threshold,
    })
}

pub fn threshold_compress_vec(c: &[f64], sigma: f64) -> Result<Compressed<Vec<f64>>> {
    let mut values = c.to_vec();
    let (kept, dropped_norm, threshold) = compress_slice(&mut values, sigma)?;
    Ok(Compressed {
        values,
        kept,
        dropped_norm,
        threshold,
    })
}
