//! Samplet bases for finite families of compactly supported functionals.
//!
//! Functionals are discrete signed measures ([`Functional`]). They are
//! organized into a [`ClusterTree`] by recursive spectral bisection of a
//! similarity graph on their supports, and every cluster receives an
//! orthogonal filter from the QR decomposition of its moment matrix. The
//! result is a [`SampletBasis`]: an orthogonal transform whose rows have
//! vanishing moments up to a chosen polynomial degree and are localized to
//! their clusters.
//!
//! ```
//! use gensamplet::{build_cluster_tree, build_samplet_basis, Functional, SimilarityScheme, TreeOptions};
//!
//! let f: Vec<Functional> = (0..64)
//!     .map(|k| Functional::dirac(k, vec![k as f64 / 63.0]).unwrap())
//!     .collect();
//! let tree = build_cluster_tree(&f, SimilarityScheme::MutualKNN(4), &TreeOptions::new(8, 2)).unwrap();
//! let basis = build_samplet_basis(&f, &tree, 1).unwrap();
//!
//! // linear data has no samplet content
//! let x: Vec<f64> = (0..64).map(|k| 3.0 - 2.0 * k as f64 / 63.0).collect();
//! let c = basis.forward(&x).unwrap();
//! assert!(c[..basis.samplet_count()].iter().all(|v| v.abs() < 1e-12));
//! ```

pub mod ctree;
pub mod error;
pub mod frameops;
pub mod linalg;
pub mod measures;
pub mod samplets;
pub mod simgraph;

pub use ctree::{
    build_cluster_tree, check_tree, fiedler_vector, spectral_bisection, Bisection, ClusterNode,
    ClusterTree, EigenOptions, NodeSpec, SplitRule, TreeOptions,
};
pub use error::{Error, Result};
pub use frameops::{
    decay_report, dual_coefficients, dual_samplet_coefficients, frame_bounds, gram_green_1d,
    gram_kernel, gram_mass_p1, DecayReport, FrameBounds, GramModel, Kernel, Provenance,
};
pub use measures::{
    evaluate, primitive_basis, primitive_count, support_box, Atom, Functional, Polynomial,
    PrimitiveBasis, SupportBox, TestFunction,
};
pub use samplets::{
    build_samplet_basis, cluster_filters, forward_transform, inverse_transform, threshold_compress,
    transform_matrix, verify_vanishing_moments, ClusterFilters, MomentMatrix, RowKind,
    SampletBasis, SampletMeta,
};
pub use simgraph::{build_graph, similarity, support_distance, SimilarityGraph, SimilarityScheme};
