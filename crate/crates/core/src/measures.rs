//! Functionals as compactly supported discrete signed measures.
//!
//! A [`Functional`] is a finite sum of weighted point atoms, each optionally
//! carrying a derivative multi-index, so that
//!
//! ```text
//! (f, v) = Σ_atoms weight · (∂^deriv v)(point).
//! ```
//!
//! Dirac evaluations, quadrature rules for integrals against finite element
//! ansatz functions and derivative evaluations are all of this form.
//! [`PrimitiveBasis`] spans the polynomials of total degree `≤ q`, written in
//! coordinates that are affinely rescaled to a reference box.

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    point: Vec<f64>,
    weight: f64,
    deriv: Vec<u32>,
}

impl Atom {
    pub fn new(point: Vec<f64>, weight: f64, deriv: Vec<u32>) -> Result<Self> {
        if point.is_empty() {
            return invalid("atom point must have at least one coordinate");
        }
        if deriv.len() != point.len() {
            return Err(Error::DimensionMismatch {
                expected: point.len(),
                found: deriv.len(),
            });
        }
        if point.iter().any(|x| !x.is_finite()) {
            return invalid("atom point has a non-finite coordinate");
        }
        if !weight.is_finite() {
            return invalid("atom weight is not finite");
        }
        Ok(Self {
            point,
            weight,
            deriv,
        })
    }

    /// Point evaluation with the given weight.
    pub fn point_mass(point: Vec<f64>, weight: f64) -> Result<Self> {
        let d = point.len();
        Self::new(point, weight, vec![0; d])
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn deriv(&self) -> &[u32] {
        &self.deriv
    }

    pub fn dim(&self) -> usize {
        self.point.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Functional {
    id: usize,
    atoms: Vec<Atom>,
}

impl Functional {
    pub fn new(id: usize, atoms: Vec<Atom>) -> Result<Self> {
        let Some(first) = atoms.first() else {
            return invalid(format!("functional {id} has no atoms"));
        };
        let d = first.dim();
        if let Some(bad) = atoms.iter().find(|a| a.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        Ok(Self { id, atoms })
    }

    /// The point evaluation `δ_x`.
    pub fn dirac(id: usize, point: Vec<f64>) -> Result<Self> {
        Self::new(id, vec![Atom::point_mass(point, 1.0)?])
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn support_box(&self) -> SupportBox {
        SupportBox::from_points(self.atoms.iter().map(Atom::point))
            .expect("functional has at least one atom")
    }

    /// Duality pairing with a polynomial.
    pub fn evaluate(&self, p: &Polynomial) -> Result<f64> {
        evaluate(self, p)
    }

    /// Duality pairing with an arbitrary test function.
    pub fn apply(&self, v: &dyn TestFunction) -> Result<f64> {
        let mut acc = 0.0;
        for a in &self.atoms {
            let val = v.value(a.point(), a.deriv()).ok_or_else(|| {
                Error::NotEvaluable(format!(
                    "derivative {:?} at {:?} (functional {})",
                    a.deriv(),
                    a.point(),
                    self.id
                ))
            })?;
            if !val.is_finite() {
                return Err(Error::NotEvaluable(format!(
                    "non-finite value at {:?} (functional {})",
                    a.point(),
                    self.id
                )));
            }
            acc += a.weight() * val;
        }
        Ok(acc)
    }
}

/// `Σ_atoms weight · (∂^deriv p)(point)`.
pub fn evaluate(f: &Functional, p: &Polynomial) -> Result<f64> {
    if f.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: f.dim(),
        });
    }
    Ok(f.atoms
        .iter()
        .map(|a| a.weight() * p.eval_deriv(a.point(), a.deriv()))
        .sum())
}

/// Componentwise bounding box of the atoms of `f`.
pub fn support_box(f: &Functional) -> SupportBox {
    f.support_box()
}

/// Axis-aligned box `[lower, upper]`. Degenerate (zero-width) boxes are valid.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SupportBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return invalid("box lower corner exceeds upper corner");
        }
        Ok(Self { lower, upper })
    }

    pub fn from_points<'a>(mut points: impl Iterator<Item = &'a [f64]>) -> Result<Self> {
        let Some(first) = points.next() else {
            return invalid("cannot bound an empty point set");
        };
        let mut lower = first.to_vec();
        let mut upper = first.to_vec();
        for p in points {
            if p.len() != lower.len() {
                return Err(Error::DimensionMismatch {
                    expected: lower.len(),
                    found: p.len(),
                });
            }
            for k in 0..p.len() {
                lower[k] = lower[k].min(p[k]);
                upper[k] = upper[k].max(p[k]);
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn union<'a>(mut boxes: impl Iterator<Item = &'a SupportBox>) -> Result<Self> {
        let Some(first) = boxes.next() else {
            return invalid("cannot bound an empty box set");
        };
        let mut out = first.clone();
        for b in boxes {
            if b.dim() != out.dim() {
                return Err(Error::DimensionMismatch {
                    expected: out.dim(),
                    found: b.dim(),
                });
            }
            for k in 0..b.dim() {
                out.lower[k] = out.lower[k].min(b.lower[k]);
                out.upper[k] = out.upper[k].max(b.upper[k]);
            }
        }
        Ok(out)
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn contains_box(&self, other: &SupportBox) -> bool {
        self.contains(&other.lower) && self.contains(&other.upper)
    }

    /// Euclidean length of the diagonal.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    /// Euclidean distance between two boxes; zero when they intersect.
    pub fn distance(&self, other: &SupportBox) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let mut s = 0.0;
        for k in 0..self.dim() {
            let gap = (other.lower[k] - self.upper[k])
                .max(self.lower[k] - other.upper[k])
                .max(0.0);
            s += gap * gap;
        }
        Ok(s.sqrt())
    }
}

/// `t_k = (x_k − center_k) / scale_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl AffineMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            center: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Maps `bx` onto `[−1, 1]^d`. Degenerate coordinates are only centered.
    pub fn onto_reference(bx: &SupportBox) -> Self {
        let center = bx.center();
        let scale = bx
            .lower()
            .iter()
            .zip(bx.upper())
            .map(|(l, u)| {
                let h = 0.5 * (u - l);
                if h > 0.0 {
                    h
                } else {
                    1.0
                }
            })
            .collect();
        Self { center, scale }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    #[inline]
    pub fn apply(&self, x: &[f64], k: usize) -> f64 {
        (x[k] - self.center[k]) / self.scale[k]
    }
}

/// Polynomial `Σ c_e t^e` in affinely mapped coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    map: AffineMap,
    terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn new(map: AffineMap, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        if let Some((_, e)) = terms.iter().find(|(_, e)| e.len() != map.dim()) {
            return Err(Error::DimensionMismatch {
                expected: map.dim(),
                found: e.len(),
            });
        }
        Ok(Self { map, terms })
    }

    /// Polynomial in the raw coordinates.
    pub fn from_terms(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        Self::new(AffineMap::identity(dim), terms)
    }

    pub fn monomial(map: AffineMap, exponents: Vec<u32>) -> Result<Self> {
        Self::new(map, vec![(1.0, exponents)])
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn map(&self) -> &AffineMap {
        &self.map
    }

    pub fn terms(&self) -> &[(f64, Vec<u32>)] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(_, e)| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// `α·self + β·other`; both must share the same affine map.
    pub fn combine(&self, alpha: f64, other: &Polynomial, beta: f64) -> Result<Polynomial> {
        if self.map != other.map {
            return invalid("polynomials use different coordinate maps");
        }
        let mut terms: Vec<(f64, Vec<u32>)> = self
            .terms
            .iter()
            .map(|(c, e)| (alpha * c, e.clone()))
            .collect();
        terms.extend(other.terms.iter().map(|(c, e)| (beta * c, e.clone())));
        Ok(Polynomial {
            map: self.map.clone(),
            terms,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_deriv(x, &vec![0; self.dim()])
    }

    /// `(∂^deriv p)(x)`, derivatives taken with respect to the raw coordinates.
    pub fn eval_deriv(&self, x: &[f64], deriv: &[u32]) -> f64 {
        let d = self.dim();
        let mut chain = 1.0;
        for k in 0..d {
            chain /= self.map.scale[k].powi(deriv[k] as i32);
        }
        let t: Vec<f64> = (0..d).map(|k| self.map.apply(x, k)).collect();
        let mut acc = 0.0;
        'term: for (c, e) in &self.terms {
            let mut v = *c;
            for k in 0..d {
                match falling_power(t[k], e[k], deriv[k]) {
                    Some(f) => v *= f,
                    None => continue 'term,
                }
            }
            acc += v;
        }
        acc * chain
    }
}

impl TestFunction for Polynomial {
    fn value(&self, x: &[f64], deriv: &[u32]) -> Option<f64> {
        Some(self.eval_deriv(x, deriv))
    }
}

/// `∂^a t^e = e!/(e−a)! · t^(e−a)`, or `None` when `a > e`.
#[inline]
fn falling_power(t: f64, e: u32, a: u32) -> Option<f64> {
    if a > e {
        return None;
    }
    let mut f = 1.0;
    for j in 0..a {
        f *= (e - j) as f64;
    }
    Some(f * t.powi((e - a) as i32))
}

/// Something that can be paired with a functional: values and partial
/// derivatives at points. Returning `None` marks an unavailable derivative.
pub trait TestFunction {
    fn value(&self, x: &[f64], deriv: &[u32]) -> Option<f64>;
}

/// Wraps a plain closure; only point values (no derivatives) are available.
pub struct PointFn<F>(pub F);

impl<F: Fn(&[f64]) -> f64> TestFunction for PointFn<F> {
    fn value(&self, x: &[f64], deriv: &[u32]) -> Option<f64> {
        deriv.iter().all(|&a| a == 0).then(|| (self.0)(x))
    }
}

/// `exp(x_1 + … + x_d)`, with all derivatives.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExpSum;

impl TestFunction for ExpSum {
    fn value(&self, x: &[f64], _deriv: &[u32]) -> Option<f64> {
        Some(x.iter().sum::<f64>().exp())
    }
}

/// `|x_1 − at|`: continuous with a derivative jump at `x_1 = at`.
#[derive(Debug, Clone, Copy)]
pub struct Kink {
    pub at: f64,
}

impl TestFunction for Kink {
    fn value(&self, x: &[f64], deriv: &[u32]) -> Option<f64> {
        let (first, rest) = deriv.split_first()?;
        if rest.iter().any(|&a| a != 0) {
            return Some(0.0);
        }
        let s = x[0] - self.at;
        match first {
            0 => Some(s.abs()),
            1 if s != 0.0 => Some(s.signum()),
            _ => None,
        }
    }
}

/// `Π_k sin(freq · x_k)` with all derivatives.
#[derive(Debug, Clone, Copy)]
pub struct SinProduct {
    pub freq: f64,
}

impl TestFunction for SinProduct {
    fn value(&self, x: &[f64], deriv: &[u32]) -> Option<f64> {
        let mut v = 1.0;
        for (xk, &a) in x.iter().zip(deriv) {
            let phase = self.freq * xk + a as f64 * std::f64::consts::FRAC_PI_2;
            v *= self.freq.powi(a as i32) * phase.sin();
        }
        Some(v)
    }
}

/// The polynomials of total degree `≤ q` in `d` variables, as monomials in
/// coordinates mapped from a reference box onto `[−1, 1]^d`.
///
/// Monomials are sorted by total degree, constant first; within one degree
/// the exponent vectors are in descending lexicographic order, so for
/// `d = 2, q = 1` the elements are `1, t₁, t₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveBasis {
    dim: usize,
    degree: u32,
    reference: SupportBox,
    map: AffineMap,
    exponents: Vec<Vec<u32>>,
}

impl PrimitiveBasis {
    pub fn new(dim: usize, degree: u32, reference: &SupportBox) -> Result<Self> {
        if dim == 0 {
            return invalid("primitive basis needs dimension ≥ 1");
        }
        if reference.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: reference.dim(),
            });
        }
        Ok(Self {
            dim,
            degree,
            reference: reference.clone(),
            map: AffineMap::onto_reference(reference),
            exponents: graded_exponents(dim, degree),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn reference(&self) -> &SupportBox {
        &self.reference
    }

    pub fn map(&self) -> &AffineMap {
        &self.map
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn elements(&self) -> Vec<Polynomial> {
        self.exponents
            .iter()
            .map(|e| Polynomial {
                map: self.map.clone(),
                terms: vec![(1.0, e.clone())],
            })
            .collect()
    }

    pub fn element(&self, a: usize) -> Polynomial {
        Polynomial {
            map: self.map.clone(),
            terms: vec![(1.0, self.exponents[a].clone())],
        }
    }

    /// `[⟨p_a, f⟩]_a` for every primitive, written into `out`.
    pub fn moments_into(&self, f: &Functional, out: &mut [f64]) -> Result<()> {
        if f.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: f.dim(),
            });
        }
        let q = self.degree as usize;
        let d = self.dim;
        out.iter_mut().for_each(|v| *v = 0.0);
        // pow[k][e] = ∂^{a_k} t_k^e / scale_k^{a_k}, precomputed per atom.
        let mut table = vec![0.0; d * (q + 1)];
        for atom in f.atoms() {
            for k in 0..d {
                let t = self.map.apply(atom.point(), k);
                let a = atom.deriv()[k];
                let chain = self.map.scale[k].powi(-(a as i32));
                for e in 0..=q {
                    table[k * (q + 1) + e] =
                        falling_power(t, e as u32, a).map_or(0.0, |v| v * chain);
                }
            }
            for (slot, e) in out.iter_mut().zip(&self.exponents) {
                let mut v = atom.weight();
                for k in 0..d {
                    v *= table[k * (q + 1) + e[k] as usize];
                }
                *slot += v;
            }
        }
        Ok(())
    }

    pub fn moments(&self, f: &Functional) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.moments_into(f, &mut out)?;
        Ok(out)
    }

    /// Change of basis onto `other` (same dimension and degree):
    /// `self.element(a) = Σ_c T[a, c] · other.element(c)` exactly as
    /// polynomials. Affine maps preserve total degree, so the expansion stays
    /// inside the span.
    pub fn transfer_from(&self, other: &PrimitiveBasis) -> nalgebra::DMatrix<f64> {
        assert_eq!(self.dim, other.dim);
        assert_eq!(self.degree, other.degree);
        let d = self.dim;
        let q = self.degree as usize;
        let m = self.len();
        // t_k = shift_k + ratio_k · s_k with s the coordinates of `other`.
        let shift: Vec<f64> = (0..d)
            .map(|k| (other.map.center[k] - self.map.center[k]) / self.map.scale[k])
            .collect();
        let ratio: Vec<f64> = (0..d)
            .map(|k| other.map.scale[k] / self.map.scale[k])
            .collect();
        // expand[k][e][j] = coefficient of s_k^j in (shift_k + ratio_k s_k)^e
        let mut expand = vec![vec![vec![0.0; q + 1]; q + 1]; d];
        for k in 0..d {
            for e in 0..=q {
                for j in 0..=e {
                    expand[k][e][j] =
                        binomial(e, j) * shift[k].powi((e - j) as i32) * ratio[k].powi(j as i32);
                }
            }
        }
        let index_of = |e: &[u32]| -> usize {
            other
                .exponents
                .iter()
                .position(|x| x.as_slice() == e)
                .expect("exponent within degree bound")
        };
        let mut t = nalgebra::DMatrix::zeros(m, m);
        let mut target = vec![0u32; d];
        for (a, e) in self.exponents.iter().enumerate() {
            // iterate over all j ≤ e componentwise
            let mut j = vec![0u32; d];
            loop {
                let mut c = 1.0;
                for k in 0..d {
                    c *= expand[k][e[k] as usize][j[k] as usize];
                }
                if c != 0.0 {
                    target.copy_from_slice(&j);
                    t[(a, index_of(&target))] += c;
                }
                // increment multi-index j within the box [0, e]
                let mut k = 0;
                loop {
                    if k == d {
                        break;
                    }
                    if j[k] < e[k] {
                        j[k] += 1;
                        break;
                    }
                    j[k] = 0;
                    k += 1;
                }
                if k == d {
                    break;
                }
            }
        }
        t
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b
}

/// `C(d + q, q)`.
pub fn primitive_count(dim: usize, degree: u32) -> usize {
    binomial(dim + degree as usize, degree as usize).round() as usize
}

fn graded_exponents(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut level = Vec::new();
        compositions(dim, total, &mut vec![0; dim], 0, &mut level);
        // descending lexicographic inside one total degree
        level.sort_by(|a, b| b.cmp(a));
        out.extend(level);
    }
    out
}

fn compositions(dim: usize, left: u32, cur: &mut Vec<u32>, k: usize, out: &mut Vec<Vec<u32>>) {
    if k + 1 == dim {
        cur[k] = left;
        out.push(cur.clone());
        return;
    }
    for v in 0..=left {
        cur[k] = v;
        compositions(dim, left - v, cur, k + 1, out);
    }
}

/// Builds the primitive basis for `bx`.
pub fn primitive_basis(dim: usize, degree: u32, bx: &SupportBox) -> Result<PrimitiveBasis> {
    PrimitiveBasis::new(dim, degree, bx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_box(d: usize) -> SupportBox {
        SupportBox::new(vec![0.0; d], vec![1.0; d]).unwrap()
    }

    #[test]
    fn dirac_evaluates_point_value() {
        let f = Functional::dirac(0, vec![0.5]).unwrap();
        let p = Polynomial::from_terms(1, vec![(1.0, vec![1])]).unwrap();
        assert_eq!(evaluate(&f, &p).unwrap(), 0.5);
    }

    #[test]
    fn derivative_atom() {
        // 2 · d/dx x² at 0.25 = 2 · 0.5
        let f = Functional::new(0, vec![Atom::new(vec![0.25], 2.0, vec![1]).unwrap()]).unwrap();
        let p = Polynomial::from_terms(1, vec![(1.0, vec![2])]).unwrap();
        assert_eq!(evaluate(&f, &p).unwrap(), 1.0);
    }

    #[test]
    fn signed_pair_annihilates_constants() {
        let f = Functional::new(
            0,
            vec![
                Atom::point_mass(vec![0.0], 1.0).unwrap(),
                Atom::point_mass(vec![1.0], -1.0).unwrap(),
            ],
        )
        .unwrap();
        let one = Polynomial::from_terms(1, vec![(1.0, vec![0])]).unwrap();
        assert_eq!(evaluate(&f, &one).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_rejects_dimension_mismatch() {
        let f = Functional::dirac(0, vec![0.5, 0.5]).unwrap();
        let p = Polynomial::from_terms(1, vec![(1.0, vec![1])]).unwrap();
        assert!(matches!(
            evaluate(&f, &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_atoms_and_functionals() {
        assert!(Atom::new(vec![f64::NAN], 1.0, vec![0]).is_err());
        assert!(Atom::new(vec![0.0], 1.0, vec![0, 0]).is_err());
        assert!(Functional::new(3, vec![]).is_err());
        let mixed = vec![
            Atom::point_mass(vec![0.0], 1.0).unwrap(),
            Atom::point_mass(vec![0.0, 1.0], 1.0).unwrap(),
        ];
        assert!(Functional::new(0, mixed).is_err());
    }

    #[test]
    fn support_boxes() {
        let f = Functional::dirac(0, vec![0.3, 0.7]).unwrap();
        let b = f.support_box();
        assert_eq!(b.lower(), &[0.3, 0.7]);
        assert_eq!(b.upper(), &[0.3, 0.7]);

        let g = Functional::new(
            1,
            vec![
                Atom::point_mass(vec![0.0], 1.0).unwrap(),
                Atom::point_mass(vec![1.0], 1.0).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(g.support_box().lower(), &[0.0]);
        assert_eq!(g.support_box().upper(), &[1.0]);

        let h = Functional::new(
            2,
            [[0.0, 0.0], [2.0, 1.0], [1.0, 3.0]]
                .iter()
                .map(|p| Atom::point_mass(p.to_vec(), 1.0).unwrap())
                .collect(),
        )
        .unwrap();
        assert_eq!(h.support_box().lower(), &[0.0, 0.0]);
        assert_eq!(h.support_box().upper(), &[2.0, 3.0]);
        assert!(SupportBox::from_points(std::iter::empty()).is_err());
    }

    #[test]
    fn basis_sizes_and_order() {
        let b = primitive_basis(1, 2, &unit_box(1)).unwrap();
        assert_eq!(b.exponents(), &[vec![0], vec![1], vec![2]]);
        let b = primitive_basis(2, 1, &unit_box(2)).unwrap();
        assert_eq!(b.exponents(), &[vec![0, 0], vec![1, 0], vec![0, 1]]);
        let b = primitive_basis(3, 0, &unit_box(3)).unwrap();
        assert_eq!(b.exponents(), &[vec![0, 0, 0]]);
        let b = primitive_basis(2, 2, &unit_box(2)).unwrap();
        assert_eq!(
            b.exponents(),
            &[
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
        for d in 1..=4 {
            for q in 0..=6u32 {
                let b = primitive_basis(d, q, &unit_box(d)).unwrap();
                assert_eq!(b.len(), primitive_count(d, q));
                let degrees: Vec<u32> = b.exponents().iter().map(|e| e.iter().sum()).collect();
                assert!(degrees.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn reference_box_maps_to_unit_cube() {
        let bx = SupportBox::new(vec![2.0, -1.0], vec![4.0, -1.0]).unwrap();
        let b = primitive_basis(2, 1, &bx).unwrap();
        let t1 = b.element(1);
        assert_eq!(t1.eval(&[2.0, -1.0]), -1.0);
        assert_eq!(t1.eval(&[4.0, -1.0]), 1.0);
        // degenerate coordinate is centered only
        let t2 = b.element(2);
        assert_eq!(t2.eval(&[3.0, 0.5]), 1.5);
    }

    #[test]
    fn moments_match_elementwise_evaluation() {
        let bx = SupportBox::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let b = primitive_basis(2, 3, &bx).unwrap();
        let f = Functional::new(
            0,
            vec![
                Atom::new(vec![0.3, 0.9], 1.5, vec![1, 0]).unwrap(),
                Atom::new(vec![1.7, 0.1], -0.5, vec![0, 2]).unwrap(),
                Atom::new(vec![1.0, 0.5], 2.0, vec![1, 1]).unwrap(),
            ],
        )
        .unwrap();
        let m = b.moments(&f).unwrap();
        for (a, p) in b.elements().iter().enumerate() {
            let direct = evaluate(&f, p).unwrap();
            assert!((m[a] - direct).abs() < 1e-14, "{a}: {} vs {direct}", m[a]);
        }
    }

    #[test]
    fn transfer_is_exact_change_of_basis() {
        let parent = SupportBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let child = SupportBox::new(vec![0.2, 0.5], vec![0.4, 0.6]).unwrap();
        let bp = primitive_basis(2, 3, &parent).unwrap();
        let bc = primitive_basis(2, 3, &child).unwrap();
        let t = bp.transfer_from(&bc);
        let children = bc.elements();
        for (a, p) in bp.elements().iter().enumerate() {
            for x in [[0.1, 0.3], [0.35, 0.55], [0.9, 1.7]] {
                let recombined: f64 = (0..bc.len())
                    .map(|c| t[(a, c)] * children[c].eval(&x))
                    .sum();
                assert!((recombined - p.eval(&x)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn point_fn_rejects_derivatives() {
        let v = PointFn(|x: &[f64]| x[0]);
        let f = Functional::new(0, vec![Atom::new(vec![0.1], 1.0, vec![1]).unwrap()]).unwrap();
        assert!(matches!(f.apply(&v), Err(Error::NotEvaluable(_))));
    }

    fn arb_functional() -> impl Strategy<Value = Functional> {
        prop::collection::vec(
            (-1.0..1.0f64, -1.0..1.0f64, -2.0..2.0f64, 0u32..3, 0u32..3),
            1..6,
        )
        .prop_map(|atoms| {
            Functional::new(
                0,
                atoms
                    .into_iter()
                    .map(|(x, y, w, a, b)| Atom::new(vec![x, y], w, vec![a, b]).unwrap())
                    .collect(),
            )
            .unwrap()
        })
    }

    fn arb_poly() -> impl Strategy<Value = Polynomial> {
        prop::collection::vec((-1.0..1.0f64, 0u32..4, 0u32..4), 1..6).prop_map(|terms| {
            Polynomial::from_terms(
                2,
                terms.into_iter().map(|(c, a, b)| (c, vec![a, b])).collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn evaluate_is_linear(f in arb_functional(), p in arb_poly(), r in arb_poly(),
                              alpha in -3.0..3.0f64, beta in -3.0..3.0f64) {
            let combo = p.combine(alpha, &r, beta).unwrap();
            let lhs = evaluate(&f, &combo).unwrap();
            let rhs = alpha * evaluate(&f, &p).unwrap() + beta * evaluate(&f, &r).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
        }

        #[test]
        fn support_box_contains_atoms(f in arb_functional()) {
            let b = f.support_box();
            for a in f.atoms() {
                prop_assert!(b.contains(a.point()));
            }
        }

        #[test]
        fn dirac_is_exact_at_dyadic_points(i in -64i32..64, j in -64i32..64, p in arb_poly()) {
            // Dyadic rationals and small integer exponents keep everything
            // exactly representable, so both routes must agree bit for bit.
            let x = vec![i as f64 / 64.0, j as f64 / 64.0];
            let f = Functional::dirac(0, x.clone()).unwrap();
            let mut exact = 0.0;
            for (c, e) in p.terms() {
                exact += c * x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32);
            }
            prop_assert!((evaluate(&f, &p).unwrap() - exact).abs() <= 1e-15 * (1.0 + exact.abs()));
        }
    }
}
