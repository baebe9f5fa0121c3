//! Finite frame operators in Gram-matrix coordinates.
//!
//! A [`GramModel`] holds the matrix `G = [(f_i, f_j)]` of a family of
//! functionals under some inner product: a reproducing kernel, the `L²`
//! product of piecewise linear hat functions, or the energy product of
//! `−d²/dx²` with homogeneous boundary values. Canonical duals, frame bounds
//! and dual samplets all follow from `G`.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg::extreme_eigenvalues;
use crate::measures::{Atom, Functional, Polynomial, PrimitiveBasis, TestFunction};
use crate::samplets::{RowKind, SampletBasis};

/// Default cap on the condition estimate accepted by [`dual_coefficients`].
pub const CONDITION_CAP: f64 = 1e12;

/// Frame bounds use a dense eigensolver up to this size.
pub const DENSE_SPECTRUM_LIMIT: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `exp(−r/ℓ)`
    Exponential(f64),
    /// `exp(−r²/(2ℓ²))`
    Gaussian(f64),
    /// `(1 + √3 r/ℓ) exp(−√3 r/ℓ)`
    Matern32(f64),
}

impl Kernel {
    pub fn length(&self) -> f64 {
        match *self {
            Kernel::Exponential(l) | Kernel::Gaussian(l) | Kernel::Matern32(l) => l,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Exponential(_) => "exponential",
            Kernel::Gaussian(_) => "gaussian",
            Kernel::Matern32(_) => "matern32",
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Kernel::Exponential(l) => (-r / l).exp(),
            Kernel::Gaussian(l) => (-r * r / (2.0 * l * l)).exp(),
            Kernel::Matern32(l) => {
                let s = 3f64.sqrt() * r / l;
                (1.0 + s) * (-s).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Kernel(Kernel),
    /// P1 mass matrix on the given mesh nodes.
    Mass {
        nodes: Vec<f64>,
    },
    /// Green's function of `−d²/dx²` on `(0, 1)` at the given points.
    Green {
        points: Vec<f64>,
    },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramModel {
    matrix: DMatrix<f64>,
    provenance: Provenance,
    shift: f64,
}

impl GramModel {
    pub fn new(matrix: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let n = matrix.nrows();
        for i in 0..n {
            for j in 0..i {
                if matrix[(i, j)] != matrix[(j, i)] {
                    return invalid(format!("Gram matrix is not symmetric at ({i}, {j})"));
                }
            }
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return invalid("Gram matrix has non-finite entries");
        }
        Ok(Self {
            matrix,
            provenance,
            shift: 0.0,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Tikhonov shift `μ` applied to the diagonal.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    /// `G + μI`.
    pub fn shifted(&self) -> DMatrix<f64> {
        let mut g = self.matrix.clone();
        for i in 0..g.nrows() {
            g[(i, i)] += self.shift;
        }
        g
    }

    /// Applies `μ = 1e−12 · trace(G) / N`.
    pub fn regularized(mut self) -> Self {
        let n = self.len().max(1) as f64;
        self.shift = 1e-12 * self.matrix.trace() / n;
        self
    }
}

/// Kernel matrix `G_ij = K(‖x_i − x_j‖)` of mutually distinct points.
pub fn gram_kernel(points: &[Vec<f64>], kernel: Kernel) -> Result<GramModel> {
    let l = kernel.length();
    if !(l > 0.0 && l.is_finite()) {
        return invalid(format!("kernel length must be positive, got {l}"));
    }
    let n = points.len();
    if n == 0 {
        return invalid("no points");
    }
    let d = points[0].len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        if points[i].len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: points[i].len(),
            });
        }
        g[(i, i)] = kernel.eval(0.0);
        for j in 0..i {
            let r = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if r == 0.0 {
                return invalid(format!("points {j} and {i} coincide"));
            }
            let v = kernel.eval(r);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    GramModel::new(g, Provenance::Kernel(kernel))
}

/// Mass matrix of the interior hat functions on a strictly increasing 1D
/// mesh, together with the functionals `v ↦ ∫ φ_i v` as two-point Gauss
/// rules on each element of `supp φ_i`.
pub fn gram_mass_p1(nodes: &[f64]) -> Result<(GramModel, Vec<Functional>)> {
    if nodes.len() < 3 {
        return invalid("a P1 mesh needs at least three nodes");
    }
    if nodes.iter().any(|x| !x.is_finite()) {
        return invalid("mesh nodes must be finite");
    }
    if nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("mesh nodes must be strictly increasing");
    }
    let h: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
    let n = nodes.len() - 2;
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = (h[i] + h[i + 1]) / 3.0;
        if i + 1 < n {
            g[(i, i + 1)] = h[i + 1] / 6.0;
            g[(i + 1, i)] = h[i + 1] / 6.0;
        }
    }
    let gauss = 1.0 / 3f64.sqrt();
    let mut functionals = Vec::with_capacity(n);
    for i in 0..n {
        // hat i lives on [nodes[i], nodes[i + 2]] with peak at nodes[i + 1]
        let mut atoms = Vec::with_capacity(4);
        for e in 0..2 {
            let (a, b) = (nodes[i + e], nodes[i + e + 1]);
            for s in [-gauss, gauss] {
                let x = 0.5 * (a + b) + 0.5 * (b - a) * s;
                let phi = if e == 0 {
                    (x - a) / (b - a)
                } else {
                    (b - x) / (b - a)
                };
                atoms.push(Atom::point_mass(vec![x], 0.5 * (b - a) * phi)?);
            }
        }
        functionals.push(Functional::new(i, atoms)?);
    }
    Ok((
        GramModel::new(
            g,
            Provenance::Mass {
                nodes: nodes.to_vec(),
            },
        )?,
        functionals,
    ))
}

/// `G(x, y) = min(x, y) − x y`, the Green's function of `−d²/dx²` on
/// `(0, 1)` with zero boundary values.
pub fn green_1d(x: f64, y: f64) -> f64 {
    x.min(y) - x * y
}

pub fn gram_green_1d(points: &[f64]) -> Result<GramModel> {
    if points.is_empty() {
        return invalid("no points");
    }
    if let Some(x) = points.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
        return invalid(format!("point {x} is not inside (0, 1)"));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return invalid("duplicate points");
    }
    let n = points.len();
    let g = DMatrix::from_fn(n, n, |i, j| green_1d(points[i], points[j]));
    GramModel::new(
        g,
        Provenance::Green {
            points: points.to_vec(),
        },
    )
}

/// `(G + μI)⁻¹`, rejected when the 1-norm condition estimate exceeds `cap`.
pub fn dual_coefficients(model: &GramModel, cap: f64) -> Result<DMatrix<f64>> {
    let g = model.shifted();
    let n = g.nrows();
    let chol = Cholesky::new(g.clone()).ok_or_else(|| {
        Error::NotPositiveDefinite(format!("Cholesky factorization failed (N = {n})"))
    })?;
    let c = chol.inverse();
    let estimate = norm1(&g) * norm1(&c);
    if !(estimate <= cap) {
        return Err(Error::IllConditioned { estimate, cap });
    }
    Ok(c)
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Extreme eigenvalues of `G + μI`.
pub fn frame_bounds(model: &GramModel) -> Result<FrameBounds> {
    let g = model.shifted();
    let (lower, upper) = extreme_eigenvalues(&g, DENSE_SPECTRUM_LIMIT, 1e-12);
    if !(lower > 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {lower:e} is not positive"
        )));
    }
    Ok(FrameBounds { lower, upper })
}

/// `αᵀG²α / αᵀGα`, the squared norm of the analysis of `Σ α_i g_i` over the
/// squared norm of that element, where `g_i` are the Riesz representers.
pub fn rayleigh_quotient(g: &DMatrix<f64>, alpha: &[f64]) -> f64 {
    let a = DVector::from_column_slice(alpha);
    let ga = g * &a;
    ga.dot(&ga) / a.dot(&ga)
}

/// `D = (G + μI)⁻¹ Uᵀ`; column `i` holds the dual of samplet `i`.
pub fn dual_samplet_coefficients(
    basis: &SampletBasis,
    model: &GramModel,
    cap: f64,
) -> Result<DMatrix<f64>> {
    if basis.len() != model.len() {
        return Err(Error::LengthMismatch {
            expected: basis.len(),
            found: model.len(),
        });
    }
    let c = dual_coefficients(model, cap)?;
    Ok(c * basis.to_dense().transpose())
}

/// `[(f_i, v)]_i`.
pub fn analysis(functionals: &[Functional], v: &dyn TestFunction) -> Result<Vec<f64>> {
    functionals.iter().map(|f| f.apply(v)).collect()
}

/// One samplet coefficient with its geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayRow {
    pub row: usize,
    pub level: usize,
    pub diameter: f64,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelDecay {
    pub level: usize,
    pub samplets: usize,
    pub max_coefficient: f64,
    pub max_diameter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    pub levels: Vec<LevelDecay>,
    /// Least-squares slope of `log max|c|` against `log max diam` over the
    /// levels with at least two samplets; `None` when annihilated or when
    /// fewer than two such levels remain.
    pub slope: Option<f64>,
    /// Every samplet coefficient is below `1e−10 · ‖x‖₂`.
    pub annihilated: bool,
}

/// Samplet coefficients of `v` and their decay across levels.
pub fn decay_report(
    basis: &SampletBasis,
    functionals: &[Functional],
    v: &dyn TestFunction,
) -> Result<DecayReport> {
    let x = analysis(functionals, v)?;
    decay_report_from_data(basis, &x)
}

pub fn decay_report_from_data(basis: &SampletBasis, x: &[f64]) -> Result<DecayReport> {
    let c = basis.forward(x)?;
    let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut rows = Vec::new();
    let depth = basis.tree().depth();
    let mut levels: Vec<LevelDecay> = (0..=depth)
        .map(|level| LevelDecay {
            level,
            samplets: 0,
            max_coefficient: 0.0,
            max_diameter: 0.0,
        })
        .collect();
    for (i, m) in basis.meta().iter().enumerate() {
        if m.kind != RowKind::Samplet {
            continue;
        }
        rows.push(DecayRow {
            row: i,
            level: m.level,
            diameter: m.diameter,
            coefficient: c[i],
        });
        let l = &mut levels[m.level];
        l.samplets += 1;
        l.max_coefficient = l.max_coefficient.max(c[i].abs());
        l.max_diameter = l.max_diameter.max(m.diameter);
    }
    levels.retain(|l| l.samplets > 0);
    let annihilated = rows.iter().all(|r| r.coefficient.abs() <= 1e-10 * scale);
    let slope = if annihilated {
        None
    } else {
        let pts: Vec<(f64, f64)> = levels
            .iter()
            .filter(|l| l.samplets >= 2 && l.max_coefficient > 0.0 && l.max_diameter > 0.0)
            .map(|l| (l.max_diameter.ln(), l.max_coefficient.ln()))
            .collect();
        least_squares_slope(&pts)
    };
    Ok(DecayReport {
        rows,
        levels,
        slope,
        annihilated,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Both sides of `|u_i · x| ≤ ‖(x − y)|_{supp u_i}‖₂`, where `x = [(f_j, v)]`
/// and `y = [(f_j, p)]` for a primitive `p`.
pub fn localization_sides(basis: &SampletBasis, row: usize, x: &[f64], y: &[f64]) -> (f64, f64) {
    let u = basis.coefficient_row(row);
    let lhs = u.dot(x).abs();
    let rhs = u
        .indices
        .iter()
        .zip(&u.values)
        .filter(|(_, v)| **v != 0.0)
        .map(|(&j, _)| (x[j] - y[j]).powi(2))
        .sum::<f64>()
        .sqrt();
    (lhs, rhs)
}

/// Least-squares fit of `x` on the support of row `row` by primitives of
/// the basis degree on the row's cluster box. Returns the fitted polynomial.
pub fn local_fit(
    basis: &SampletBasis,
    functionals: &[Functional],
    row: usize,
    x: &[f64],
) -> Result<Polynomial> {
    let m = &basis.meta()[row];
    let prims = PrimitiveBasis::new(basis.dim(), basis.degree(), &m.bbox)?;
    let u = basis.coefficient_row(row);
    let support: Vec<usize> = u
        .indices
        .iter()
        .zip(&u.values)
        .filter(|(_, v)| **v != 0.0)
        .map(|(&j, _)| j)
        .collect();
    let mut a = DMatrix::zeros(support.len(), prims.len());
    for (r, &j) in support.iter().enumerate() {
        let mom = prims.moments(&functionals[j])?;
        for (k, v) in mom.into_iter().enumerate() {
            a[(r, k)] = v;
        }
    }
    let b = DVector::from_iterator(support.len(), support.iter().map(|&j| x[j]));
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-13)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Polynomial::new(
        prims.map().clone(),
        prims
            .exponents()
            .iter()
            .zip(coef.iter())
            .map(|(e, &c)| (c, e.clone()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctree::{build_cluster_tree, TreeOptions};
    use crate::linalg::max_abs_diff;
    use crate::measures::{primitive_count, ExpSum};
    use crate::samplets::build_samplet_basis;
    use crate::simgraph::SimilarityScheme;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let mut g = &a * a.transpose();
        for i in 0..n {
            g[(i, i)] += 0.1;
        }
        // exact symmetry
        DMatrix::from_fn(n, n, |i, j| if i <= j { g[(i, j)] } else { g[(j, i)] })
    }

    #[test]
    fn kernel_examples() {
        let one = gram_kernel(&[vec![0.3]], Kernel::Gaussian(1.0)).unwrap();
        assert_eq!(one.matrix()[(0, 0)], 1.0);
        let far = gram_kernel(&[vec![0.0], vec![1e3]], Kernel::Gaussian(1.0)).unwrap();
        assert!(far.matrix()[(0, 1)] < 1e-300);
        let e = gram_kernel(&[vec![0.0], vec![1.0]], Kernel::Exponential(1.0)).unwrap();
        assert!((e.matrix()[(0, 1)] - (-1.0f64).exp()).abs() < 1e-16);
        assert!(gram_kernel(&[vec![0.5], vec![0.5]], Kernel::Matern32(1.0)).is_err());
        assert!((Kernel::Matern32(2.0).eval(0.0) - 1.0).abs() < 1e-16);
    }

    #[test]
    fn mass_matrix_examples() {
        let h = 0.25;
        let nodes: Vec<f64> = (0..5).map(|k| k as f64 * h).collect();
        let (m, f) = gram_mass_p1(&nodes).unwrap();
        assert_eq!(m.len(), 3);
        for i in 0..3 {
            assert!((m.matrix()[(i, i)] - 2.0 * h / 3.0).abs() < 1e-16);
        }
        assert!((m.matrix()[(0, 1)] - h / 6.0).abs() < 1e-16);
        assert_eq!(m.matrix()[(0, 2)], 0.0);

        let (single, _) = gram_mass_p1(&[0.0, 0.3, 1.0]).unwrap();
        assert!((single.matrix()[(0, 0)] - (0.3 + 0.7) / 3.0).abs() < 1e-16);

        let one = crate::measures::PointFn(|_: &[f64]| 1.0);
        for i in 0..3 {
            assert!((f[i].apply(&one).unwrap() - h).abs() < 1e-15);
        }
        assert!((m.matrix().row(1).sum() - h).abs() < 1e-15);
        assert!(gram_mass_p1(&[0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(gram_mass_p1(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn mass_row_sums_on_graded_mesh() {
        let nodes = [0.0, 0.1, 0.25, 0.5, 0.6, 1.0];
        let (m, f) = gram_mass_p1(&nodes).unwrap();
        let one = crate::measures::PointFn(|_: &[f64]| 1.0);
        let last = m.len() - 1;
        for i in 0..m.len() {
            let integral = 0.5 * (nodes[i + 2] - nodes[i]);
            // the boundary hats are not in the basis, so their coupling is
            // missing from the first and last rows
            let mut missing = 0.0;
            if i == 0 {
                missing += (nodes[1] - nodes[0]) / 6.0;
            }
            if i == last {
                missing += (nodes[last + 2] - nodes[last + 1]) / 6.0;
            }
            let row: f64 = m.matrix().row(i).sum();
            assert!((row + missing - integral).abs() < 1e-15);
            assert!((f[i].apply(&one).unwrap() - integral).abs() < 1e-15);
        }
    }

    #[test]
    fn quadrature_functionals_reproduce_mass_matrix() {
        // (f_i, φ_j) with exact quadrature for the quadratic integrands
        let nodes = [0.0, 0.2, 0.3, 0.7, 1.0];
        let (m, f) = gram_mass_p1(&nodes).unwrap();
        for j in 0..m.len() {
            let hat = crate::measures::PointFn(move |x: &[f64]| {
                let (a, c, b) = (nodes[j], nodes[j + 1], nodes[j + 2]);
                let t = x[0];
                if t <= a || t >= b {
                    0.0
                } else if t <= c {
                    (t - a) / (c - a)
                } else {
                    (b - t) / (b - c)
                }
            });
            for i in 0..m.len() {
                assert!((f[i].apply(&hat).unwrap() - m.matrix()[(i, j)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn green_examples() {
        assert!((green_1d(0.5, 0.5) - 0.25).abs() < 1e-16);
        assert!((green_1d(0.25, 0.75) - 0.0625).abs() < 1e-16);
        assert!(green_1d(0.3, 1e-12).abs() < 1e-11);
        let g = gram_green_1d(&[0.25, 0.5, 0.75]).unwrap();
        assert!((g.matrix()[(0, 2)] - 0.0625).abs() < 1e-16);
        assert!(gram_green_1d(&[0.0, 0.5]).is_err());
        assert!(gram_green_1d(&[0.5, 0.5]).is_err());
    }

    #[test]
    fn dual_examples() {
        let id = GramModel::new(DMatrix::identity(4, 4), Provenance::Custom).unwrap();
        assert_eq!(
            dual_coefficients(&id, CONDITION_CAP).unwrap(),
            DMatrix::identity(4, 4)
        );
        let k = gram_kernel(&[vec![0.2, 0.1]], Kernel::Exponential(0.5)).unwrap();
        assert_eq!(dual_coefficients(&k, CONDITION_CAP).unwrap()[(0, 0)], 1.0);
        let g = GramModel::new(random_spd(8, 3), Provenance::Custom).unwrap();
        let c = dual_coefficients(&g, CONDITION_CAP).unwrap();
        assert!(max_abs_diff(&(g.matrix() * c), &DMatrix::identity(8, 8)) < 1e-8);
    }

    #[test]
    fn ill_conditioning_is_reported() {
        let g = GramModel::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-14])),
            Provenance::Custom,
        )
        .unwrap();
        assert!(matches!(
            dual_coefficients(&g, CONDITION_CAP),
            Err(Error::IllConditioned { .. })
        ));
        let singular =
            GramModel::new(DMatrix::from_element(2, 2, 1.0), Provenance::Custom).unwrap();
        let err = dual_coefficients(&singular, CONDITION_CAP).unwrap_err();
        assert!(err.is_numerical());
        let shifted = singular.regularized();
        assert!(shifted.shift() > 0.0);
    }

    #[test]
    fn frame_bound_examples() {
        let id = GramModel::new(DMatrix::identity(3, 3), Provenance::Custom).unwrap();
        let b = frame_bounds(&id).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-15 && (b.upper - 1.0).abs() < 1e-15);
        let d = GramModel::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5])),
            Provenance::Custom,
        )
        .unwrap();
        let b = frame_bounds(&d).unwrap();
        assert!((b.lower - 0.5).abs() < 1e-15 && (b.upper - 2.0).abs() < 1e-15);
        let neg = GramModel::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0])),
            Provenance::Custom,
        )
        .unwrap();
        assert!(frame_bounds(&neg).is_err());
    }

    #[test]
    fn rayleigh_sandwich_on_random_spd() {
        let g = GramModel::new(random_spd(16, 8), Provenance::Custom).unwrap();
        let b = frame_bounds(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let a: Vec<f64> = (0..16).map(|_| rng.random::<f64>() - 0.5).collect();
            let q = rayleigh_quotient(g.matrix(), &a);
            assert!(q >= b.lower - 1e-10 && q <= b.upper + 1e-10);
        }
    }

    fn line_basis(n: usize, q: u32) -> (Vec<Functional>, SampletBasis) {
        let f: Vec<Functional> = (0..n)
            .map(|k| Functional::dirac(k, vec![k as f64 / (n - 1) as f64]).unwrap())
            .collect();
        let m_p = primitive_count(1, q);
        let tree = build_cluster_tree(
            &f,
            SimilarityScheme::MutualKNN(4),
            &TreeOptions::new(4 * m_p, m_p),
        )
        .unwrap();
        let b = build_samplet_basis(&f, &tree, q).unwrap();
        (f, b)
    }

    #[test]
    fn dual_samplets() {
        let (f, b) = line_basis(64, 2);
        let id = GramModel::new(DMatrix::identity(64, 64), Provenance::Custom).unwrap();
        let d = dual_samplet_coefficients(&b, &id, CONDITION_CAP).unwrap();
        assert_eq!(d, b.to_dense().transpose());

        let pts: Vec<Vec<f64>> = f.iter().map(|g| g.atoms()[0].point().to_vec()).collect();
        let k = gram_kernel(&pts, Kernel::Exponential(0.5)).unwrap();
        let d = dual_samplet_coefficients(&b, &k, CONDITION_CAP).unwrap();
        let u = b.to_dense();
        let bio = &u * k.matrix() * &d;
        assert!(max_abs_diff(&bio, &DMatrix::identity(64, 64)) < 1e-8);
    }

    #[test]
    fn decay_of_smooth_data_and_annihilation() {
        let (f, b) = line_basis(256, 2);
        let r = decay_report(&b, &f, &ExpSum).unwrap();
        assert!(!r.annihilated);
        assert!(r.slope.unwrap() > 2.5, "slope {:?}", r.slope);
        let p = Polynomial::from_terms(1, vec![(1.0, vec![0]), (-3.0, vec![1]), (2.0, vec![2])])
            .unwrap();
        let r = decay_report(&b, &f, &p).unwrap();
        assert!(r.annihilated);
        assert_eq!(r.slope, None);
    }

    #[test]
    fn localization_holds_with_local_fit() {
        let (f, b) = line_basis(128, 1);
        let x = analysis(&f, &ExpSum).unwrap();
        for row in [0, 10, 50, 100] {
            if b.meta()[row].kind != RowKind::Samplet {
                continue;
            }
            let p = local_fit(&b, &f, row, &x).unwrap();
            let y = analysis(&f, &p).unwrap();
            let (lhs, rhs) = localization_sides(&b, row, &x, &y);
            assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
            let zero = vec![0.0; x.len()];
            let (lhs0, rhs0) = localization_sides(&b, row, &x, &zero);
            assert!(lhs0 <= rhs0 + 1e-12);
            assert!(rhs <= rhs0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn biorthogonality_of_random_spd(n in 1usize..24, seed in 0u64..1000) {
            let g = GramModel::new(random_spd(n, seed), Provenance::Custom).unwrap();
            let c = dual_coefficients(&g, CONDITION_CAP).unwrap();
            prop_assert!(max_abs_diff(&(g.matrix() * c), &DMatrix::identity(n, n)) < 1e-8);
        }
    }
}
