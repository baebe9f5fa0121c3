//! The six verbs behind the binary.
//!
//! Every verb writes its artifacts into `out_dir` and returns a few summary
//! lines for the terminal.

use std::path::PathBuf;

use gensamplet::frameops::{decay_report_from_data, CONDITION_CAP};
use gensamplet::measures::{ExpSum, Kink, SinProduct};
use gensamplet::samplets::threshold_compress;
use gensamplet::{
    build_cluster_tree, build_samplet_basis, dual_coefficients, frame_bounds, gram_green_1d,
    gram_kernel, verify_vanishing_moments, Functional, GramModel, Provenance, RowKind,
    SampletBasis, TestFunction, TreeOptions,
};
use nalgebra::DMatrix;

use crate::config::{GramChoice, RunConfig};
use crate::container::{checksum_hex, load_basis, save_basis, write_container};
use crate::generate::generate_example;
use crate::ingest::{
    num, read_functionals, read_values, write_functionals, write_table, write_values,
};
use crate::{tag, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Build,
    Transform,
    Inverse,
    Compress,
    Report,
    Example,
}

pub const BASIS_FILE: &str = "basis.smp";

struct Loaded {
    functionals: Vec<Functional>,
    gram: Option<GramModel>,
}

fn load_functionals(cfg: &mut RunConfig) -> Result<Loaded> {
    let loaded = match (&cfg.input, &cfg.example) {
        (Some(path), None) => Loaded {
            functionals: read_functionals(path)?,
            gram: None,
        },
        (None, Some(name)) => {
            let e = generate_example(name, cfg.n, cfg.dim, cfg.degree, cfg.seed)?;
            Loaded {
                functionals: e.functionals,
                gram: e.gram,
            }
        }
        (None, None) => return Err(CliError::input("no input file or example given")),
        (Some(_), Some(_)) => {
            return Err(CliError::input("give either input or example, not both"))
        }
    };
    cfg.dim = loaded.functionals[0].dim();
    cfg.validate()?;
    Ok(loaded)
}

/// Tree and basis for the configured degree, scheme and leaf size.
pub fn build(cfg: &RunConfig, functionals: &[Functional]) -> Result<SampletBasis> {
    let m = cfg.primitives();
    let mut opts = TreeOptions::new(cfg.leaf_max(), m);
    opts.eigen.seed ^= cfg.seed;
    let tree = build_cluster_tree(functionals, cfg.similarity()?, &opts).map_err(tag("ctree"))?;
    build_samplet_basis(functionals, &tree, cfg.degree).map_err(tag("samplets"))
}

fn test_function(name: &str) -> Result<Box<dyn TestFunction>> {
    match name {
        "exp" => Ok(Box::new(ExpSum)),
        "kink" => Ok(Box::new(Kink { at: 0.3 })),
        "sin" => Ok(Box::new(SinProduct { freq: 6.0 })),
        other => Err(CliError::input(format!(
            "unknown test function {other:?}; expected exp, kink or sin"
        ))),
    }
}

fn sample(functionals: &[Functional], name: &str) -> Result<Vec<f64>> {
    let v = test_function(name)?;
    functionals
        .iter()
        .map(|f| f.apply(v.as_ref()).map_err(tag("measures")))
        .collect()
}

/// Places `(id, value)` pairs in functional order.
fn by_id(ids: &[usize], pairs: Vec<(usize, f64)>, what: &str) -> Result<Vec<f64>> {
    let index: std::collections::HashMap<usize, usize> =
        ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let mut out = vec![None; ids.len()];
    for (id, v) in pairs {
        let k = *index
            .get(&id)
            .ok_or_else(|| CliError::input(format!("{what}: unknown id {id}")))?;
        if out[k].replace(v).is_some() {
            return Err(CliError::input(format!("{what}: id {id} appears twice")));
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(k, v)| {
            v.ok_or_else(|| CliError::input(format!("{what}: no value for id {}", ids[k])))
        })
        .collect()
}

fn out(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::io(&cfg.out_dir, e))?;
    Ok(cfg.out_dir.join(name))
}

fn write_moments(cfg: &RunConfig, basis: &SampletBasis, functionals: &[Functional]) -> Result<f64> {
    let worst =
        verify_vanishing_moments(basis, functionals, cfg.degree).map_err(tag("samplets"))?;
    write_table(
        &out(cfg, "vanishing_moments.csv")?,
        &["degree", "samplets", "max_relative_moment"],
        &[vec![
            cfg.degree.to_string(),
            basis.samplet_count().to_string(),
            num(worst),
        ]],
    )?;
    Ok(worst)
}

fn write_coefficients(cfg: &RunConfig, basis: &SampletBasis, c: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = basis
        .meta()
        .iter()
        .zip(c)
        .enumerate()
        .map(|(i, (m, v))| {
            vec![
                i.to_string(),
                match m.kind {
                    RowKind::Samplet => "samplet",
                    RowKind::Scaling => "scaling",
                }
                .to_string(),
                m.level.to_string(),
                num(m.diameter),
                num(*v),
            ]
        })
        .collect();
    write_table(
        &out(cfg, "coefficients.csv")?,
        &["samplet", "kind", "level", "diameter", "coefficient"],
        &rows,
    )
}

/// The Gram model selected by the configuration.
fn gram_model(cfg: &RunConfig, loaded: &Loaded) -> Result<GramModel> {
    let centers = || -> Vec<Vec<f64>> {
        loaded
            .functionals
            .iter()
            .map(|f| f.support_box().center())
            .collect()
    };
    match cfg.gram_choice()? {
        GramChoice::Auto => match &loaded.gram {
            Some(g) => Ok(g.clone()),
            None => gram_kernel(&centers(), gensamplet::Kernel::Exponential(cfg.gram_length))
                .map_err(tag("frameops")),
        },
        GramChoice::Kernel(k) => gram_kernel(&centers(), k).map_err(tag("frameops")),
        GramChoice::Mass => match &loaded.gram {
            Some(g) if matches!(g.provenance(), Provenance::Mass { .. }) => Ok(g.clone()),
            _ => Err(CliError::input(
                "the mass Gram model needs example = p1-mass",
            )),
        },
        GramChoice::Green => {
            let mut points = Vec::with_capacity(loaded.functionals.len());
            for f in &loaded.functionals {
                match f.atoms() {
                    [a] if a.dim() == 1 && a.deriv() == [0] && a.weight() == 1.0 => {
                        points.push(a.point()[0])
                    }
                    _ => {
                        return Err(CliError::input(
                            "the Green Gram model needs 1D Dirac functionals",
                        ))
                    }
                }
            }
            gram_green_1d(&points).map_err(tag("frameops"))
        }
    }
}

/// Runs `verb` and returns summary lines.
pub fn run(verb: Verb, cfg: &RunConfig) -> Result<Vec<String>> {
    let mut cfg = cfg.clone();
    match verb {
        Verb::Example => {
            let loaded = load_functionals(&mut cfg)?;
            let atoms = out(&cfg, "atoms.csv")?;
            write_functionals(&atoms, &loaded.functionals)?;
            let mut lines = vec![format!(
                "wrote {} functionals to {}",
                loaded.functionals.len(),
                atoms.display()
            )];
            if let Some(g) = &loaded.gram {
                let path = out(&cfg, "gram.csv")?;
                let m = g.matrix();
                let mut rows = Vec::new();
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        if m[(i, j)] != 0.0 {
                            rows.push(vec![i.to_string(), j.to_string(), num(m[(i, j)])]);
                        }
                    }
                }
                write_table(&path, &["i", "j", "value"], &rows)?;
                lines.push(format!("wrote Gram matrix to {}", path.display()));
            }
            Ok(lines)
        }
        Verb::Build => {
            let loaded = load_functionals(&mut cfg)?;
            let basis = build(&cfg, &loaded.functionals)?;
            let path = out(&cfg, BASIS_FILE)?;
            let sum = save_basis(&path, &basis, &loaded.functionals)?;
            let worst = write_moments(&cfg, &basis, &loaded.functionals)?;
            Ok(vec![
                format!(
                    "N = {}, depth {}, {} clusters, {} samplets",
                    basis.len(),
                    basis.tree().depth(),
                    basis.tree().nodes().len(),
                    basis.samplet_count()
                ),
                format!("max relative moment {worst:e}"),
                format!("checksum {}", checksum_hex(&sum)),
            ])
        }
        Verb::Transform => {
            let c = load_basis(&cfg.basis_path())?;
            let x = match (cfg.data.clone(), cfg.function.clone()) {
                (Some(path), None) => by_id(
                    &c.ids,
                    read_values(&path, "value")?,
                    &path.display().to_string(),
                )?,
                (None, Some(name)) => {
                    let loaded = load_functionals(&mut cfg)?;
                    let ids: Vec<usize> = loaded.functionals.iter().map(Functional::id).collect();
                    if ids != c.ids {
                        return Err(CliError::input(
                            "functionals do not match the basis container",
                        ));
                    }
                    sample(&loaded.functionals, &name)?
                }
                _ => {
                    return Err(CliError::input(
                        "transform needs exactly one of data or function",
                    ))
                }
            };
            let coeffs = c.basis.forward(&x).map_err(tag("samplets"))?;
            write_coefficients(&cfg, &c.basis, &coeffs)?;
            Ok(vec![format!("transformed {} values", x.len())])
        }
        Verb::Inverse => {
            let c = load_basis(&cfg.basis_path())?;
            let path = cfg
                .coefficients
                .clone()
                .unwrap_or_else(|| cfg.out_dir.join("coefficients.csv"));
            let rows: Vec<usize> = (0..c.basis.len()).collect();
            let mut pairs = Vec::new();
            let mut rdr = csv::Reader::from_path(&path)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            let header = rdr
                .headers()
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
                .clone();
            let (Some(sc), Some(vc)) = (
                header.iter().position(|h| h == "samplet"),
                header.iter().position(|h| h == "coefficient"),
            ) else {
                return Err(CliError::Parse {
                    path: path.clone(),
                    line: 1,
                    msg: "header needs columns `samplet` and `coefficient`".into(),
                });
            };
            for rec in rdr.records() {
                let rec = rec.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
                let line = rec.position().map_or(0, |p| p.line());
                let bad = |msg: String| CliError::Parse {
                    path: path.clone(),
                    line,
                    msg,
                };
                let i: usize = rec[sc]
                    .parse()
                    .map_err(|_| bad(format!("bad row {:?}", &rec[sc])))?;
                let v: f64 = rec[vc]
                    .parse()
                    .map_err(|_| bad(format!("bad coefficient {:?}", &rec[vc])))?;
                if !v.is_finite() {
                    return Err(bad("non-finite coefficient".into()));
                }
                pairs.push((i, v));
            }
            let coeffs = by_id(&rows, pairs, &path.display().to_string())?;
            let x = c.basis.inverse(&coeffs).map_err(tag("samplets"))?;
            let dest = out(&cfg, "reconstruction.csv")?;
            write_values(&dest, &c.ids, &x)?;
            Ok(vec![format!(
                "wrote {} values to {}",
                x.len(),
                dest.display()
            )])
        }
        Verb::Compress => {
            let loaded = load_functionals(&mut cfg)?;
            let basis = build(&cfg, &loaded.functionals)?;
            let g = gram_model(&cfg, &loaded)?;
            let stats = compression(&basis, g.matrix(), cfg.sigma)?;
            write_table(
                &out(&cfg, "compression.csv")?,
                &[
                    "sigma",
                    "threshold",
                    "kept",
                    "total",
                    "kept_fraction",
                    "dense_fraction",
                    "relative_error",
                ],
                &[vec![
                    num(cfg.sigma),
                    num(stats.threshold),
                    stats.kept.to_string(),
                    stats.total.to_string(),
                    num(stats.kept_fraction()),
                    num(stats.dense_fraction()),
                    num(stats.relative_error),
                ]],
            )?;
            Ok(vec![format!(
                "kept {} of {} entries ({:.4}), dense matrix above the same threshold {:.4}, relative error {:e}",
                stats.kept,
                stats.total,
                stats.kept_fraction(),
                stats.dense_fraction(),
                stats.relative_error
            )])
        }
        Verb::Report => report(&mut cfg),
    }
}

/// Outcome of thresholding `U A Uᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionStats {
    pub threshold: f64,
    pub kept: usize,
    /// Entries of `A` itself with `|a| ≥ threshold`.
    pub dense_kept: usize,
    pub total: usize,
    /// `‖Uᵀ C_σ U − A‖_F / ‖A‖_F`.
    pub relative_error: f64,
}

impl CompressionStats {
    pub fn kept_fraction(&self) -> f64 {
        self.kept as f64 / self.total as f64
    }

    pub fn dense_fraction(&self) -> f64 {
        self.dense_kept as f64 / self.total as f64
    }
}

pub fn compression(basis: &SampletBasis, a: &DMatrix<f64>, sigma: f64) -> Result<CompressionStats> {
    let c = basis.transform_matrix(a).map_err(tag("samplets"))?;
    let comp = threshold_compress(&c, sigma).map_err(tag("samplets"))?;
    let back = basis
        .inverse_transform_matrix(&comp.values)
        .map_err(tag("samplets"))?;
    let dense_kept = a.iter().filter(|v| v.abs() >= comp.threshold).count();
    let norm = a.norm();
    Ok(CompressionStats {
        threshold: comp.threshold,
        kept: comp.kept,
        dense_kept,
        total: a.len(),
        relative_error: if norm > 0.0 {
            (back - a).norm() / norm
        } else {
            0.0
        },
    })
}

fn report(cfg: &mut RunConfig) -> Result<Vec<String>> {
    let loaded = load_functionals(cfg)?;
    let basis = build(cfg, &loaded.functionals)?;
    let mut lines = Vec::new();

    let worst = write_moments(cfg, &basis, &loaded.functionals)?;
    lines.push(format!("max relative moment {worst:e}"));

    let name = cfg.function.clone().unwrap_or_else(|| "exp".into());
    let x = sample(&loaded.functionals, &name)?;
    let decay = decay_report_from_data(&basis, &x).map_err(tag("frameops"))?;
    let rows: Vec<Vec<String>> = decay
        .levels
        .iter()
        .map(|l| {
            vec![
                l.level.to_string(),
                l.samplets.to_string(),
                num(l.max_coefficient),
                num(l.max_diameter),
            ]
        })
        .collect();
    write_table(
        &out(cfg, "decay_levels.csv")?,
        &["level", "samplets", "max_coefficient", "max_diameter"],
        &rows,
    )?;
    write_table(
        &out(cfg, "decay_summary.csv")?,
        &["function", "degree", "slope", "annihilated"],
        &[vec![
            name.clone(),
            cfg.degree.to_string(),
            decay.slope.map(num).unwrap_or_default(),
            decay.annihilated.to_string(),
        ]],
    )?;
    lines.push(match decay.slope {
        Some(s) => format!("decay slope for {name}: {s:.3}"),
        None if decay.annihilated => format!("{name} is annihilated by the samplets"),
        None => "too few levels for a decay slope".to_string(),
    });

    if cfg.gram != "auto" || loaded.gram.is_some() {
        let g = gram_model(cfg, &loaded)?;
        let fb = frame_bounds(&g).map_err(tag("frameops"))?;
        let dual = dual_coefficients(&g, CONDITION_CAP).map_err(tag("frameops"))?;
        let bi = (g.shifted() * dual - DMatrix::<f64>::identity(g.len(), g.len())).amax();
        write_table(
            &out(cfg, "frame.csv")?,
            &["lower", "upper", "biorthogonality_error"],
            &[vec![num(fb.lower), num(fb.upper), num(bi)]],
        )?;
        lines.push(format!("frame bounds [{:e}, {:e}]", fb.lower, fb.upper));
    }

    let path = cfg.basis_path();
    if path.exists() {
        let stored = load_basis(&path)?;
        let rebuilt = write_container(&basis, &loaded.functionals)?;
        let mut sum = [0u8; 32];
        sum.copy_from_slice(&rebuilt[rebuilt.len() - 32..]);
        let same = sum == stored.checksum;
        write_table(
            &out(cfg, "checksum.csv")?,
            &["stored", "rebuilt", "identical"],
            &[vec![
                checksum_hex(&stored.checksum),
                checksum_hex(&sum),
                same.to_string(),
            ]],
        )?;
        lines.push(format!(
            "container checksum {} {} rebuilt basis",
            checksum_hex(&stored.checksum),
            if same { "matches" } else { "differs from" }
        ));
    }
    Ok(lines)
}
