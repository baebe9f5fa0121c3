//! Run configuration: a `key = value` file, overridden by command line flags.
//!
//! Every setting goes through [`RunConfig::set`], so the file and the flags
//! accept exactly the same keys and value syntax. Dashes and underscores in
//! keys are interchangeable.

use std::path::{Path, PathBuf};

use gensamplet::{primitive_count, Kernel, SimilarityScheme};

use crate::{CliError, Result};

/// Which Gram model `compress` and `report` use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GramChoice {
    /// Whatever the example generator provides, else an exponential kernel.
    Auto,
    Kernel(Kernel),
    /// P1 mass matrix; only from the `p1-mass` generator.
    Mass,
    /// Green's function of `−d²/dx²` at 1D Dirac points.
    Green,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub example: Option<String>,
    /// Size of a generated example.
    pub n: usize,
    pub dim: usize,
    pub degree: u32,
    pub scheme: String,
    pub scheme_param: Option<f64>,
    /// Defaults to `4·m_𝒫`.
    pub leaf_max: Option<usize>,
    pub gram: String,
    pub gram_length: f64,
    pub sigma: f64,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Basis container to read; defaults to `<out_dir>/basis.smp`.
    pub basis: Option<PathBuf>,
    /// CSV `id,value` data for `transform`.
    pub data: Option<PathBuf>,
    /// Test function sampled by the functionals: `exp`, `kink` or `sin`.
    pub function: Option<String>,
    /// CSV of coefficients for `inverse`.
    pub coefficients: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            example: None,
            n: 1024,
            dim: 1,
            degree: 2,
            scheme: "knn".into(),
            scheme_param: None,
            leaf_max: None,
            gram: "auto".into(),
            gram_length: 0.5,
            sigma: 1e-6,
            out_dir: PathBuf::from("."),
            seed: 1,
            basis: None,
            data: None,
            function: None,
            coefficients: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::input(format!("{key} = {value:?}: {e}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "input" => self.input = Some(value.into()),
            "example" => self.example = Some(value.to_string()),
            "n" => self.n = parse(&key, value)?,
            "dim" => self.dim = parse(&key, value)?,
            "degree" => self.degree = parse(&key, value)?,
            "scheme" => self.scheme = value.to_ascii_lowercase(),
            "scheme_param" => self.scheme_param = Some(parse(&key, value)?),
            "leaf_max" => self.leaf_max = Some(parse(&key, value)?),
            "gram" => self.gram = value.to_ascii_lowercase(),
            "gram_length" => self.gram_length = parse(&key, value)?,
            "sigma" => self.sigma = parse(&key, value)?,
            "out_dir" => self.out_dir = value.into(),
            "seed" => self.seed = parse(&key, value)?,
            "basis" => self.basis = Some(value.into()),
            "data" => self.data = Some(value.into()),
            "function" => self.function = Some(value.to_ascii_lowercase()),
            "coefficients" => self.coefficients = Some(value.into()),
            _ => {
                return Err(CliError::input(format!(
                    "unknown configuration key {key:?}"
                )))
            }
        }
        Ok(())
    }

    /// Applies a `key = value` text. Blank lines and `#` comments are
    /// skipped.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CliError::Parse {
                path: origin.to_path_buf(),
                line: no as u64 + 1,
                msg: "expected `key = value`".into(),
            })?;
            self.set(k, v).map_err(|e| CliError::Parse {
                path: origin.to_path_buf(),
                line: no as u64 + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }

    pub fn primitives(&self) -> usize {
        primitive_count(self.dim, self.degree)
    }

    pub fn leaf_max(&self) -> usize {
        self.leaf_max.unwrap_or(4 * self.primitives())
    }

    pub fn similarity(&self) -> Result<SimilarityScheme> {
        let s = match self.scheme.as_str() {
            "knn" | "mutual-knn" => {
                let k = self.scheme_param.unwrap_or(8.0);
                if !(k >= 1.0 && k.fract() == 0.0) {
                    return Err(CliError::input(format!(
                        "knn needs a positive integer k, got {k}"
                    )));
                }
                SimilarityScheme::MutualKNN(k as usize)
            }
            "epsilon" => SimilarityScheme::EpsilonNeighborhood(
                self.scheme_param
                    .ok_or_else(|| CliError::input("scheme epsilon needs scheme_param"))?,
            ),
            "gaussian" => SimilarityScheme::Gaussian(
                self.scheme_param
                    .ok_or_else(|| CliError::input("scheme gaussian needs scheme_param"))?,
            ),
            other => {
                return Err(CliError::input(format!(
                    "unknown similarity scheme {other:?}"
                )))
            }
        };
        s.validate().map_err(|e| CliError::input(e.to_string()))?;
        Ok(s)
    }

    pub fn gram_choice(&self) -> Result<GramChoice> {
        let l = self.gram_length;
        let kernel = |k: Kernel| -> Result<GramChoice> {
            if !(l > 0.0 && l.is_finite()) {
                return Err(CliError::input(format!(
                    "gram_length must be positive, got {l}"
                )));
            }
            Ok(GramChoice::Kernel(k))
        };
        match self.gram.as_str() {
            "auto" => Ok(GramChoice::Auto),
            "exponential" => kernel(Kernel::Exponential(l)),
            "gaussian" => kernel(Kernel::Gaussian(l)),
            "matern32" => kernel(Kernel::Matern32(l)),
            "mass" => Ok(GramChoice::Mass),
            "green" => Ok(GramChoice::Green),
            other => Err(CliError::input(format!("unknown Gram model {other:?}"))),
        }
    }

    pub fn basis_path(&self) -> PathBuf {
        self.basis
            .clone()
            .unwrap_or_else(|| self.out_dir.join("basis.smp"))
    }

    /// Checks the invariants that do not depend on the input data.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(CliError::input("dim must be at least 1"));
        }
        let m = self.primitives();
        if self.leaf_max() <= m {
            return Err(CliError::input(format!(
                "leaf_max = {} must exceed the {m} primitives of degree {} in {} dimensions",
                self.leaf_max(),
                self.degree,
                self.dim
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(CliError::input(format!(
                "sigma must be nonnegative, got {}",
                self.sigma
            )));
        }
        if self.input.is_some() && self.example.is_some() {
            return Err(CliError::input("give either input or example, not both"));
        }
        self.similarity()?;
        self.gram_choice()?;
        Ok(())
    }
}
