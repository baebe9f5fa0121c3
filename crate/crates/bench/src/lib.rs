//! Benchmark fixtures.

use gensamplet::{
    build_cluster_tree, build_samplet_basis, primitive_count, Functional, SampletBasis,
    SimilarityScheme, TreeOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SCHEME: SimilarityScheme = SimilarityScheme::MutualKNN(8);

/// `n` uniform random Diracs in `[0, 1]^d`.
pub fn random_diracs(n: usize, d: usize, seed: u64) -> Vec<Functional> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| Functional::dirac(i, (0..d).map(|_| rng.random::<f64>()).collect()).unwrap())
        .collect()
}

pub fn tree_options(d: usize, q: u32) -> TreeOptions {
    let m = primitive_count(d, q);
    TreeOptions::new(4 * m, m)
}

pub fn basis(functionals: &[Functional], q: u32) -> SampletBasis {
    let d = functionals[0].dim();
    let tree = build_cluster_tree(functionals, SCHEME, &tree_options(d, q)).unwrap();
    build_samplet_basis(functionals, &tree, q).unwrap()
}
