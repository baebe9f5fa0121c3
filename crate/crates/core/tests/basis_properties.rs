use gensamplet::measures::ExpSum;
use gensamplet::{
    build_cluster_tree, build_samplet_basis, check_tree, primitive_basis, primitive_count,
    verify_vanishing_moments, Atom, Functional, RowKind, SimilarityScheme, TreeOptions,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mixed family: point values, first derivatives and short averages.
fn mixed(n: usize, d: usize, seed: u64) -> Vec<Functional> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let p: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            match i % 3 {
                0 => Functional::dirac(i, p).unwrap(),
                1 => {
                    let mut deriv = vec![0; d];
                    deriv[rng.random_range(0..d)] = 1;
                    Functional::new(i, vec![Atom::new(p, 0.5, deriv).unwrap()]).unwrap()
                }
                _ => {
                    let q: Vec<f64> = p.iter().map(|x| x + 0.01).collect();
                    Functional::new(
                        i,
                        vec![
                            Atom::point_mass(p, 0.5).unwrap(),
                            Atom::point_mass(q, 0.5).unwrap(),
                        ],
                    )
                    .unwrap()
                }
            }
        })
        .collect()
}

#[test]
fn mixed_functionals_give_an_orthogonal_basis_with_vanishing_moments() {
    for (d, q) in [(1, 2), (2, 1), (2, 2), (3, 1)] {
        let f = mixed(300, d, 5 + d as u64);
        let m = primitive_count(d, q);
        let tree = build_cluster_tree(
            &f,
            SimilarityScheme::MutualKNN(6),
            &TreeOptions::new(3 * m, m),
        )
        .unwrap();
        check_tree(&tree, m).unwrap();
        let basis = build_samplet_basis(&f, &tree, q).unwrap();
        let u = basis.to_dense();
        let err = (&u * u.transpose() - nalgebra::DMatrix::<f64>::identity(300, 300)).amax();
        assert!(err < 1e-12, "d={d} q={q}: {err:e}");
        let vm = verify_vanishing_moments(&basis, &f, q).unwrap();
        assert!(vm < 1e-10, "d={d} q={q}: {vm:e}");
    }
}

#[test]
fn samplets_annihilate_global_polynomials() {
    let f = mixed(240, 2, 17);
    let tree = build_cluster_tree(
        &f,
        SimilarityScheme::EpsilonNeighborhood(0.15),
        &TreeOptions::new(24, 6),
    )
    .unwrap();
    let basis = build_samplet_basis(&f, &tree, 2).unwrap();
    let prims = primitive_basis(2, 2, tree.root().bbox()).unwrap();
    for p in prims.elements() {
        let x: Vec<f64> = f.iter().map(|g| g.evaluate(&p).unwrap()).collect();
        let c = basis.forward(&x).unwrap();
        let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (i, m) in basis.meta().iter().enumerate() {
            if m.kind == RowKind::Samplet {
                assert!(c[i].abs() < 1e-10 * scale, "row {i}: {}", c[i]);
            }
        }
    }
}

#[test]
fn rows_are_supported_in_their_cluster() {
    let f = mixed(200, 2, 3);
    let tree =
        build_cluster_tree(&f, SimilarityScheme::MutualKNN(5), &TreeOptions::new(12, 3)).unwrap();
    let basis = build_samplet_basis(&f, &tree, 1).unwrap();
    for i in 0..basis.len() {
        let meta = &basis.meta()[i];
        let row = basis.coefficient_row(i);
        let members = tree.indices(meta.node);
        for (&j, &v) in row.indices.iter().zip(&row.values) {
            if v != 0.0 {
                assert!(
                    members.contains(&j),
                    "row {i} touches {j} outside node {}",
                    meta.node
                );
                assert!(meta.bbox.contains_box(&f[j].support_box()));
            }
        }
    }
}

#[test]
fn coarse_levels_carry_smooth_data() {
    let f: Vec<Functional> = (0..512)
        .map(|k| Functional::dirac(k, vec![k as f64 / 511.0]).unwrap())
        .collect();
    let tree =
        build_cluster_tree(&f, SimilarityScheme::MutualKNN(4), &TreeOptions::new(12, 3)).unwrap();
    let basis = build_samplet_basis(&f, &tree, 2).unwrap();
    let x: Vec<f64> = f.iter().map(|g| g.apply(&ExpSum).unwrap()).collect();
    let c = basis.forward(&x).unwrap();
    let per_level = basis.samplets_per_level();
    let mut offset = 0;
    let mut maxima = Vec::new();
    for n in per_level {
        let m = c[offset..offset + n]
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        maxima.push(m);
        offset += n;
    }
    for w in maxima.windows(2) {
        assert!(w[1] < w[0], "{maxima:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_is_an_isometry(n in 20usize..160, d in 1usize..=3, q in 0u32..=2, seed in any::<u64>()) {
        let m = primitive_count(d, q);
        prop_assume!(n > 2 * m);
        let f = mixed(n, d, seed);
        let tree = build_cluster_tree(&f, SimilarityScheme::MutualKNN(4), &TreeOptions::new(2 * m + 2, m)).unwrap();
        let basis = build_samplet_basis(&f, &tree, q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = basis.forward(&x).unwrap();
        let nx: f64 = x.iter().map(|v| v * v).sum();
        let nc: f64 = c.iter().map(|v| v * v).sum();
        prop_assert!((nx - nc).abs() <= 1e-12 * nx);
        let y = basis.inverse(&c).unwrap();
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert_eq!(basis.samplet_count() + basis.filters()[0].m_phi, n);
    }

    #[test]
    fn tree_rebuild_is_identical(n in 10usize..200, seed in any::<u64>()) {
        let f = mixed(n, 2, seed);
        let opts = TreeOptions::new(8, 3);
        let a = build_cluster_tree(&f, SimilarityScheme::MutualKNN(3), &opts).unwrap();
        let b = build_cluster_tree(&f, SimilarityScheme::MutualKNN(3), &opts).unwrap();
        prop_assert_eq!(a.specs(), b.specs());
        prop_assert_eq!(a.permutation(), b.permutation());
        check_tree(&a, 3).unwrap();
    }
}
