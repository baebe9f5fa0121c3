//! Deterministic example families.

use gensamplet::{gram_green_1d, gram_mass_p1, primitive_count, Functional, GramModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{tag, CliError, Result};

pub const EXAMPLE_NAMES: &[&str] = &["uniform-diracs", "random-diracs", "p1-mass", "green-1d"];

#[derive(Debug, Clone)]
pub struct Example {
    pub functionals: Vec<Functional>,
    pub gram: Option<GramModel>,
}

fn diracs(points: Vec<Vec<f64>>) -> Result<Vec<Functional>> {
    points
        .into_iter()
        .enumerate()
        .map(|(i, p)| Functional::dirac(i, p).map_err(tag("measures")))
        .collect()
}

fn one_dimensional(name: &str, dim: usize) -> Result<()> {
    if dim != 1 {
        return Err(CliError::input(format!(
            "{name} is one-dimensional, got dim = {dim}"
        )));
    }
    Ok(())
}

/// `uniform-diracs`: Diracs on the uniform grid of `[0, 1]^d` (`N` must be a
/// perfect `d`-th power). `random-diracs`: `N` uniform random Diracs.
/// `p1-mass`: the `N` interior hats of a uniform mesh with `N + 2` nodes,
/// with their mass matrix. `green-1d`: Diracs at `k/(N + 1)` with the Green
/// Gram matrix.
pub fn generate_example(
    name: &str,
    n: usize,
    dim: usize,
    degree: u32,
    seed: u64,
) -> Result<Example> {
    if !EXAMPLE_NAMES.contains(&name) {
        return Err(CliError::input(format!(
            "unknown example {name:?}; expected one of {}",
            EXAMPLE_NAMES.join(", ")
        )));
    }
    if dim == 0 {
        return Err(CliError::input("dim must be at least 1"));
    }
    let m = primitive_count(dim, degree);
    if n <= m {
        return Err(CliError::input(format!(
            "N = {n} must exceed the {m} primitives of degree {degree} in {dim} dimensions"
        )));
    }
    match name {
        "uniform-diracs" => {
            let side = (n as f64).powf(1.0 / dim as f64).round() as usize;
            if side.checked_pow(dim as u32) != Some(n) {
                return Err(CliError::input(format!(
                    "N = {n} is not a perfect power of {dim}"
                )));
            }
            let last = (side - 1) as f64;
            let points = (0..n)
                .map(|mut k| {
                    (0..dim)
                        .map(|_| {
                            let c = k % side;
                            k /= side;
                            c as f64 / last
                        })
                        .collect()
                })
                .collect();
            Ok(Example {
                functionals: diracs(points)?,
                gram: None,
            })
        }
        "random-diracs" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points = (0..n)
                .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
                .collect();
            Ok(Example {
                functionals: diracs(points)?,
                gram: None,
            })
        }
        "p1-mass" => {
            one_dimensional(name, dim)?;
            let nodes: Vec<f64> = (0..n + 2).map(|j| j as f64 / (n + 1) as f64).collect();
            let (gram, functionals) = gram_mass_p1(&nodes).map_err(tag("frameops"))?;
            Ok(Example {
                functionals,
                gram: Some(gram),
            })
        }
        _ => {
            one_dimensional(name, dim)?;
            let points: Vec<f64> = (1..=n).map(|k| k as f64 / (n + 1) as f64).collect();
            let gram = gram_green_1d(&points).map_err(tag("frameops"))?;
            Ok(Example {
                functionals: diracs(points.into_iter().map(|x| vec![x]).collect())?,
                gram: Some(gram),
            })
        }
    }
}
