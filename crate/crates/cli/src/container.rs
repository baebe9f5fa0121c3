//! Binary basis container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic    b"SAMPLET\0"
//! version  u32
//! N u64, d u32, q u32
//! per functional: id u64, support box (d lower, d upper f64)
//! permutation: N × u64
//! node count u64, then per node in preorder:
//!     level u32, start u64, end u64, leaf u8, children 2 × u64, box (2d f64)
//! per node: n u64, m_phi u64, m u64, Q (n × n, row-major), R (n × m, row-major)
//! row count u64, then per row of U:
//!     kind u8 (0 samplet, 1 scaling), level u32, node u64, local u64, diameter f64
//! SHA-256 of everything above
//! ```
//!
//! Loading rebuilds the basis from the tree and the filters and rejects the
//! file unless the stored node boxes and row table match the rebuilt ones
//! bit for bit.

use std::path::Path;

use gensamplet::{
    ClusterFilters, ClusterTree, Functional, NodeSpec, RowKind, SampletBasis, SupportBox,
};
use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"SAMPLET\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Container {
    pub basis: SampletBasis,
    /// Functional ids in functional order.
    pub ids: Vec<usize>,
    pub checksum: [u8; 32],
}

pub fn checksum_hex(sum: &[u8; 32]) -> String {
    sum.iter().map(|b| format!("{b:02x}")).collect()
}

struct Sink(Vec<u8>);

impl Sink {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn bbox(&mut self, b: &SupportBox) {
        b.lower().iter().chain(b.upper()).for_each(|&v| self.f64(v));
    }
    fn row_major(&mut self, m: &DMatrix<f64>) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self.f64(m[(i, j)]);
            }
        }
    }
}

/// Serializes `basis`, built over `functionals`.
pub fn write_container(basis: &SampletBasis, functionals: &[Functional]) -> Result<Vec<u8>> {
    let tree = basis.tree();
    let n = basis.len();
    if functionals.len() != n {
        return Err(CliError::input(format!(
            "basis has {n} rows but {} functionals were given",
            functionals.len()
        )));
    }
    let d = basis.dim();
    let mut s = Sink(Vec::new());
    s.0.extend_from_slice(MAGIC);
    s.u32(VERSION);
    s.u64(n);
    s.u32(d as u32);
    s.u32(basis.degree());
    for f in functionals {
        s.u64(f.id());
        s.bbox(&f.support_box());
    }
    tree.permutation().iter().for_each(|&p| s.u64(p));
    s.u64(tree.nodes().len());
    for node in tree.nodes() {
        s.u32(node.level() as u32);
        s.u64(node.range().start);
        s.u64(node.range().end);
        let ch = node.children();
        s.u8(ch.is_none() as u8);
        let [a, b] = ch.unwrap_or([0, 0]);
        s.u64(a);
        s.u64(b);
        s.bbox(node.bbox());
    }
    for f in basis.filters() {
        s.u64(f.n());
        s.u64(f.m_phi);
        s.u64(f.r.ncols());
        s.row_major(&f.q);
        s.row_major(&f.r);
    }
    s.u64(basis.meta().len());
    for m in basis.meta() {
        s.u8(match m.kind {
            RowKind::Samplet => 0,
            RowKind::Scaling => 1,
        });
        s.u32(m.level as u32);
        s.u64(m.node);
        s.u64(m.local);
        s.f64(m.diameter);
    }
    let sum: [u8; 32] = Sha256::digest(&s.0).into();
    s.0.extend_from_slice(&sum);
    Ok(s.0)
}

struct Source<'a> {
    buf: &'a [u8],
    at: usize,
}

fn malformed(msg: impl std::fmt::Display) -> CliError {
    CliError::input(format!("malformed basis container: {msg}"))
}

impl<'a> Source<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(k)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| malformed(format!("truncated at byte {}", self.at)))?;
        let out = &self.buf[self.at..end];
        self.at = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| malformed(format!("count {v} does not fit")))
    }
    /// A count of items of `item` bytes each that must fit in what is left.
    fn count(&mut self, item: usize) -> Result<usize> {
        let k = self.u64()?;
        if k.saturating_mul(item) > self.buf.len() - self.at {
            return Err(malformed(format!("count {k} exceeds the file size")));
        }
        Ok(k)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn bbox(&mut self, d: usize) -> Result<SupportBox> {
        let lower = (0..d).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        let upper = (0..d).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        SupportBox::new(lower, upper).map_err(malformed)
    }
    fn row_major(&mut self, r: usize, c: usize) -> Result<DMatrix<f64>> {
        if r.saturating_mul(c).saturating_mul(8) > self.buf.len() - self.at {
            return Err(malformed("matrix exceeds the file size"));
        }
        let mut m = DMatrix::zeros(r, c);
        for i in 0..r {
            for j in 0..c {
                m[(i, j)] = self.f64()?;
            }
        }
        Ok(m)
    }
}

pub fn read_container(bytes: &[u8]) -> Result<Container> {
    if bytes.len() < MAGIC.len() + 32 || &bytes[..8] != MAGIC {
        return Err(malformed("bad magic"));
    }
    let (body, stored) = bytes.split_at(bytes.len() - 32);
    let sum: [u8; 32] = Sha256::digest(body).into();
    if sum[..] != stored[..] {
        return Err(malformed("checksum mismatch"));
    }
    let mut r = Source { buf: body, at: 8 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(malformed(format!("unsupported version {version}")));
    }
    let n = r.u64()?;
    let d = r.u32()? as usize;
    let q = r.u32()?;
    if n == 0 || d == 0 {
        return Err(malformed("empty basis"));
    }
    if n.saturating_mul(8 + 16 * d) > body.len() {
        return Err(malformed("functional table exceeds the file size"));
    }
    let mut ids = Vec::with_capacity(n);
    let mut boxes = Vec::with_capacity(n);
    for _ in 0..n {
        ids.push(r.u64()?);
        boxes.push(r.bbox(d)?);
    }
    let perm = (0..n).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
    let nodes = r.count(37 + 16 * d)?;
    let mut specs = Vec::with_capacity(nodes);
    let mut node_boxes = Vec::with_capacity(nodes);
    for _ in 0..nodes {
        let level = r.u32()? as usize;
        let start = r.u64()?;
        let end = r.u64()?;
        let leaf = r.u8()?;
        let (a, b) = (r.u64()?, r.u64()?);
        let children = match leaf {
            1 => None,
            0 => Some([a, b]),
            _ => return Err(malformed("bad leaf flag")),
        };
        specs.push(NodeSpec {
            level,
            start,
            end,
            children,
        });
        node_boxes.push(r.bbox(d)?);
    }
    let tree = ClusterTree::from_parts(specs, perm, &boxes).map_err(malformed)?;
    if tree
        .nodes()
        .iter()
        .zip(&node_boxes)
        .any(|(x, b)| x.bbox() != b)
    {
        return Err(malformed(
            "stored node boxes disagree with the functional boxes",
        ));
    }
    let mut filters = Vec::with_capacity(nodes);
    for _ in 0..nodes {
        let rows = r.u64()?;
        let m_phi = r.u64()?;
        let m = r.u64()?;
        let qm = r.row_major(rows, rows)?;
        let rm = r.row_major(rows, m)?;
        filters.push(ClusterFilters {
            q: qm,
            r: rm,
            m_phi,
        });
    }
    let basis = SampletBasis::from_parts(tree, d, q, filters).map_err(malformed)?;
    let rows = r.count(29)?;
    if rows != n {
        return Err(malformed(format!("row table has {rows} rows for N = {n}")));
    }
    for (i, m) in basis.meta().iter().enumerate() {
        let kind = match r.u8()? {
            0 => RowKind::Samplet,
            1 => RowKind::Scaling,
            k => return Err(malformed(format!("bad row kind {k}"))),
        };
        let level = r.u32()? as usize;
        let node = r.u64()?;
        let local = r.u64()?;
        let diameter = r.f64()?;
        if kind != m.kind
            || level != m.level
            || node != m.node
            || local != m.local
            || diameter.to_bits() != m.diameter.to_bits()
        {
            return Err(malformed(format!(
                "row {i} disagrees with the rebuilt basis"
            )));
        }
    }
    if r.at != body.len() {
        return Err(malformed("trailing bytes before the checksum"));
    }
    Ok(Container {
        basis,
        ids,
        checksum: sum,
    })
}

/// Writes the container and returns its checksum.
pub fn save_basis(
    path: &Path,
    basis: &SampletBasis,
    functionals: &[Functional],
) -> Result<[u8; 32]> {
    let bytes = write_container(basis, functionals)?;
    std::fs::write(path, &bytes).map_err(|e| CliError::io(path, e))?;
    let mut sum = [0u8; 32];
    sum.copy_from_slice(&bytes[bytes.len() - 32..]);
    Ok(sum)
}

pub fn load_basis(path: &Path) -> Result<Container> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    read_container(&bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}
