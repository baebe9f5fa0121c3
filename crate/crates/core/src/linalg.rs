//! Dense kernels shared by the clustering, filter and frame modules.
//!
//! Two pieces live here: a Householder QR that returns the *full* square
//! orthogonal factor (nalgebra only exposes the thin one), and a restarted
//! Lanczos iteration for one extreme eigenpair of a symmetric operator,
//! optionally restricted to the orthogonal complement of a few known vectors.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Full Householder QR of an `n × m` matrix.
///
/// Returns `(q, r)` with `q` square orthogonal (`n × n`) and `r` upper
/// trapezoidal (`n × m`) such that `a = q r`. The diagonal of `r` is made
/// nonnegative by flipping the matching columns of `q`, which makes the
/// factorization unique for full-rank input.
pub fn householder_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = a.shape();
    let mut r = a.clone();
    let mut q = DMatrix::<f64>::identity(n, n);
    let steps = m.min(n.saturating_sub(1));
    let mut v = vec![0.0; n];

    for k in 0..steps {
        let mut norm2 = 0.0;
        for i in k..n {
            norm2 += r[(i, k)] * r[(i, k)];
        }
        let norm = norm2.sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = r[(k, k)];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        v[k] = x0 - alpha;
        for i in k + 1..n {
            v[i] = r[(i, k)];
        }
        let vnorm2: f64 = v[k..n].iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;

        // r <- (I - beta v v^T) r on rows k..n
        for j in k..m {
            let mut s = 0.0;
            for i in k..n {
                s += v[i] * r[(i, j)];
            }
            s *= beta;
            for i in k..n {
                r[(i, j)] -= s * v[i];
            }
        }
        // q <- q (I - beta v v^T) on columns k..n
        for row in 0..n {
            let mut s = 0.0;
            for i in k..n {
                s += q[(row, i)] * v[i];
            }
            s *= beta;
            for i in k..n {
                q[(row, i)] -= s * v[i];
            }
        }
        for i in k + 1..n {
            r[(i, k)] = 0.0;
        }
    }

    for k in 0..m.min(n) {
        if r[(k, k)] < 0.0 {
            for j in 0..m {
                r[(k, j)] = -r[(k, j)];
            }
            for row in 0..n {
                q[(row, k)] = -q[(row, k)];
            }
        }
    }
    (q, r)
}

/// Symmetric matrix-free operator.
pub trait SymOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl SymOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.nrows();
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let col = &self.as_slice()[j * n..(j + 1) * n];
            for (yi, &a) in y.iter_mut().zip(col) {
                *yi += a * xj;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Smallest,
    Largest,
}

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    /// Converged once `‖A y − θ y‖ ≤ tol`.
    pub tol: f64,
    /// Basis size at which the iteration thick-restarts.
    pub max_basis: usize,
    /// Ritz vectors retained across a restart.
    pub keep: usize,
    pub max_matvecs: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_basis: 32,
            keep: 8,
            max_matvecs: 20_000,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub matvecs: usize,
}

#[derive(Debug, Clone)]
pub struct NotConverged {
    pub best: EigenPair,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project_out(v: &mut [f64], deflate: &[Vec<f64>]) {
    for u in deflate {
        let c = dot(u, v);
        axpy(-c, u, v);
    }
}

/// One extreme eigenpair of `op` restricted to the orthogonal complement of
/// the orthonormal vectors in `deflate`.
///
/// Thick-restart Lanczos with full (two-pass classical Gram-Schmidt)
/// reorthogonalization. The projected matrix is accumulated column by
/// column, so `A V = V T + w e_jᵀ` holds and the residual of a Ritz pair
/// `(θ, V s)` is `‖w‖·|s_j|`. A pair is accepted after its residual has been
/// recomputed explicitly.
pub fn lanczos_extreme<A: SymOperator + ?Sized>(
    op: &A,
    target: Extreme,
    start: Option<&[f64]>,
    deflate: &[Vec<f64>],
    opts: &LanczosOptions,
) -> Result<EigenPair, NotConverged> {
    let n = op.dim();
    let free = n.saturating_sub(deflate.len()).max(1);
    let m = opts.max_basis.max(opts.keep + 2).min(free);
    let keep = opts.keep.min(m.saturating_sub(1)).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut basis = DMatrix::<f64>::zeros(n, m + 1);
    let mut proj = DMatrix::<f64>::zeros(m, m);
    let mut w = vec![0.0; n];
    let mut matvecs = 0usize;
    let mut best: Option<EigenPair> = None;

    // Fills column `j` with a unit vector orthogonal to the deflation space
    // and to columns `0..j`, starting from `w`. Returns false if none exists.
    let seat = |basis: &mut DMatrix<f64>, j: usize, w: &mut [f64], rng: &mut ChaCha8Rng| -> bool {
        for attempt in 0..5 {
            if attempt > 0 {
                w.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
            }
            let before = norm(w);
            for _ in 0..2 {
                project_out(w, deflate);
                if j > 0 {
                    let v = basis.columns(0, j);
                    let h = v.tr_mul(&nalgebra::DVectorView::from_slice(w, n));
                    let mut wv = nalgebra::DVectorViewMut::from_slice(w, n);
                    wv.gemv(-1.0, &v, &h, 1.0);
                }
            }
            let after = norm(w);
            if after > 1e-10 * before && after > 0.0 && after.is_finite() {
                basis.column_mut(j).copy_from_slice(w);
                basis.column_mut(j).unscale_mut(after);
                return true;
            }
        }
        false
    };

    match start {
        Some(s) if s.len() == n => w.copy_from_slice(s),
        _ => w.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0)),
    }
    if !seat(&mut basis, 0, &mut w, &mut rng) {
        w.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        seat(&mut basis, 0, &mut w, &mut rng);
    }

    let mut j = 0usize; // columns 0..j hold the current basis, column j is next
    let mut steps_since_check = 0usize;
    loop {
        // expand with column j
        op.apply(basis.column(j).as_slice(), &mut w);
        matvecs += 1;
        project_out(&mut w, deflate);
        let mut h = nalgebra::DVector::<f64>::zeros(j + 1);
        for _ in 0..2 {
            let v = basis.columns(0, j + 1);
            let hp = v.tr_mul(&nalgebra::DVectorView::from_slice(&w, n));
            let mut wv = nalgebra::DVectorViewMut::from_slice(&mut w, n);
            wv.gemv(-1.0, &v, &hp, 1.0);
            h += hp;
        }
        for i in 0..=j {
            proj[(i, j)] = h[i];
            proj[(j, i)] = h[i];
        }
        let mut beta = norm(&w);
        j += 1;
        steps_since_check += 1;

        let exhausted = j >= free;
        let full = j >= m;
        if !exhausted {
            let scale = proj.view((0, 0), (j, j)).amax().max(f64::MIN_POSITIVE);
            if beta <= 1e-12 * scale {
                // invariant subspace: continue with a fresh direction
                beta = 0.0;
                if !seat(&mut basis, j, &mut w, &mut rng) {
                    return finish(op, deflate, &basis, &proj, j, target, matvecs, best, opts);
                }
            } else {
                basis.column_mut(j).copy_from_slice(&w);
                basis.column_mut(j).unscale_mut(beta);
            }
        }

        if !(exhausted || full || j <= 8 || steps_since_check >= 4) {
            continue;
        }
        steps_since_check = 0;
        let eig = proj.view((0, 0), (j, j)).into_owned().symmetric_eigen();
        let order = ranked(&eig.eigenvalues, target);
        let t = order[0];
        let estimate = beta * eig.eigenvectors[(j - 1, t)].abs();
        if estimate <= opts.tol || exhausted {
            let y = basis.columns(0, j) * eig.eigenvectors.column(t);
            let pair = explicit_pair(op, deflate, y.as_slice(), matvecs + 1);
            matvecs += 1;
            if best.as_ref().map_or(true, |b| pair.residual < b.residual) {
                best = Some(pair.clone());
            }
            if pair.residual <= opts.tol {
                return Ok(pair);
            }
            if exhausted {
                return Err(NotConverged {
                    best: best.unwrap(),
                });
            }
        }
        if matvecs >= opts.max_matvecs {
            let y = basis.columns(0, j) * eig.eigenvectors.column(t);
            let pair = explicit_pair(op, deflate, y.as_slice(), matvecs);
            let best = match best {
                Some(b) if b.residual <= pair.residual => b,
                _ => pair,
            };
            return Err(NotConverged { best });
        }
        if full {
            // thick restart: keep the best Ritz vectors, then the residual
            let sel: Vec<usize> = order.iter().copied().take(keep).collect();
            let mut s = DMatrix::<f64>::zeros(j, keep);
            for (a, &col) in sel.iter().enumerate() {
                s.column_mut(a).copy_from(&eig.eigenvectors.column(col));
            }
            let kept = basis.columns(0, j) * &s;
            basis.columns_mut(0, keep).copy_from(&kept);
            let next = basis.column(j).clone_owned();
            basis.column_mut(keep).copy_from(&next);
            proj.fill(0.0);
            for (a, &col) in sel.iter().enumerate() {
                proj[(a, a)] = eig.eigenvalues[col];
            }
            j = keep;
        }
    }
}

fn ranked(values: &nalgebra::DVector<f64>, target: Extreme) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (values[a], values[b]);
        match target {
            Extreme::Smallest => x.total_cmp(&y),
            Extreme::Largest => y.total_cmp(&x),
        }
    });
    order
}

fn explicit_pair<A: SymOperator + ?Sized>(
    op: &A,
    deflate: &[Vec<f64>],
    y: &[f64],
    matvecs: usize,
) -> EigenPair {
    let mut y = y.to_vec();
    project_out(&mut y, deflate);
    let ny = norm(&y);
    y.iter_mut().for_each(|v| *v /= ny);
    let mut ay = vec![0.0; y.len()];
    op.apply(&y, &mut ay);
    project_out(&mut ay, deflate);
    let theta = dot(&y, &ay);
    axpy(-theta, &y, &mut ay);
    EigenPair {
        value: theta,
        residual: norm(&ay),
        vector: y,
        matvecs,
    }
}

#[allow(clippy::too_many_arguments)]
fn finish<A: SymOperator + ?Sized>(
    op: &A,
    deflate: &[Vec<f64>],
    basis: &DMatrix<f64>,
    proj: &DMatrix<f64>,
    j: usize,
    target: Extreme,
    matvecs: usize,
    best: Option<EigenPair>,
    opts: &LanczosOptions,
) -> Result<EigenPair, NotConverged> {
    let eig = proj.view((0, 0), (j, j)).into_owned().symmetric_eigen();
    let t = ranked(&eig.eigenvalues, target)[0];
    let y = basis.columns(0, j) * eig.eigenvectors.column(t);
    let pair = explicit_pair(op, deflate, y.as_slice(), matvecs + 1);
    if pair.residual <= opts.tol {
        return Ok(pair);
    }
    let best = match best {
        Some(b) if b.residual <= pair.residual => b,
        _ => pair,
    };
    Err(NotConverged { best })
}

/// Smallest and largest eigenvalue of a symmetric matrix, using a dense
/// decomposition up to `dense_limit` and Lanczos above.
pub fn extreme_eigenvalues(a: &DMatrix<f64>, dense_limit: usize, rel_tol: f64) -> (f64, f64) {
    let n = a.nrows();
    if n <= dense_limit {
        let ev = a.clone().symmetric_eigen().eigenvalues;
        let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return (lo, hi);
    }
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())) * n as f64;
    let opts = LanczosOptions {
        tol: rel_tol * scale.max(f64::MIN_POSITIVE),
        max_matvecs: 50 * n.max(100),
        ..LanczosOptions::default()
    };
    let pick = |r: Result<EigenPair, NotConverged>| match r {
        Ok(p) => p.value,
        Err(e) => e.best.value,
    };
    let hi = pick(lanczos_extreme(a, Extreme::Largest, None, &[], &opts));
    let lo = pick(lanczos_extreme(a, Extreme::Smallest, None, &[], &opts));
    (lo, hi)
}

/// Largest entrywise difference.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn qr_reconstructs_and_is_orthogonal() {
        for &(n, m) in &[(5, 3), (3, 5), (4, 4), (1, 3), (6, 1)] {
            let a = random_matrix(n, m, (n * 10 + m) as u64);
            let (q, r) = householder_qr(&a);
            assert_eq!(q.shape(), (n, n));
            assert_eq!(r.shape(), (n, m));
            let qtq = q.transpose() * &q;
            assert!(max_abs_diff(&qtq, &DMatrix::identity(n, n)) < 1e-13);
            assert!(max_abs_diff(&(&q * &r), &a) < 1e-13);
            for i in 0..n {
                for j in 0..m.min(i) {
                    assert_eq!(r[(i, j)], 0.0);
                }
                if i < m {
                    assert!(r[(i, i)] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn qr_of_ones_column() {
        let a = DMatrix::from_element(3, 1, 1.0);
        let (q, r) = householder_qr(&a);
        let s = 1.0 / 3f64.sqrt();
        for i in 0..3 {
            assert!((q[(i, 0)] - s).abs() < 1e-15);
        }
        assert!((r[(0, 0)] - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn qr_rank_deficient_keeps_orthogonality() {
        let mut a = DMatrix::zeros(5, 3);
        for i in 0..5 {
            a[(i, 0)] = 1.0;
            a[(i, 1)] = 2.0;
        }
        let (q, r) = householder_qr(&a);
        let qtq = q.transpose() * &q;
        assert!(max_abs_diff(&qtq, &DMatrix::identity(5, 5)) < 1e-13);
        assert!(max_abs_diff(&(&q * &r), &a) < 1e-13);
    }

    #[test]
    fn lanczos_matches_dense_on_random_spd() {
        let b = random_matrix(80, 80, 3);
        let a = &b * b.transpose() + DMatrix::identity(80, 80);
        let ev = a.clone().symmetric_eigen().eigenvalues;
        let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let opts = LanczosOptions {
            tol: 1e-9,
            max_basis: 30,
            keep: 8,
            ..Default::default()
        };
        let s = lanczos_extreme(&a, Extreme::Smallest, None, &[], &opts).unwrap();
        let l = lanczos_extreme(&a, Extreme::Largest, None, &[], &opts).unwrap();
        assert!((s.value - lo).abs() < 1e-8, "{} vs {}", s.value, lo);
        assert!((l.value - hi).abs() < 1e-8 * hi);
    }

    #[test]
    fn lanczos_respects_deflation() {
        // Path-graph Laplacian: smallest eigenvalue 0 on the constant vector.
        let n = 40;
        let mut l = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            l[(i, i)] += 1.0;
            l[(i + 1, i + 1)] += 1.0;
            l[(i, i + 1)] -= 1.0;
            l[(i + 1, i)] -= 1.0;
        }
        let ones = vec![1.0 / (n as f64).sqrt(); n];
        let opts = LanczosOptions {
            tol: 1e-10,
            ..Default::default()
        };
        let p = lanczos_extreme(&l, Extreme::Smallest, None, &[ones], &opts).unwrap();
        let expected = 2.0 - 2.0 * (std::f64::consts::PI / n as f64).cos();
        assert!((p.value - expected).abs() < 1e-10);
    }
}
