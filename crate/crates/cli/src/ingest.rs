//! CSV atom files and `id,value` vectors.
//!
//! An atom file has the header `id,x1,…,xd,weight` optionally followed by
//! `d1,…,dd`. Each row is one atom; rows sharing an id form one functional,
//! and functionals keep the order in which their ids first appear.

use std::collections::HashMap;
use std::path::Path;

use gensamplet::{Atom, Functional};

use crate::{CliError, Result};

fn parse_error(path: &Path, line: u64, msg: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        kind => parse_error(path, line, format!("{kind:?}")),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

/// Dimension and presence of derivative columns, from the header.
fn atom_layout(path: &Path, header: &csv::StringRecord) -> Result<(usize, bool)> {
    let cols: Vec<&str> = header.iter().collect();
    if cols.first() != Some(&"id") {
        return Err(parse_error(path, 1, "first column must be `id`"));
    }
    let d = cols[1..].iter().take_while(|c| c.starts_with('x')).count();
    if d == 0 {
        return Err(parse_error(path, 1, "no coordinate columns x1..xd"));
    }
    for (k, c) in cols[1..=d].iter().enumerate() {
        if *c != format!("x{}", k + 1) {
            return Err(parse_error(
                path,
                1,
                format!("expected column x{}, found {c}", k + 1),
            ));
        }
    }
    if cols.get(d + 1) != Some(&"weight") {
        return Err(parse_error(
            path,
            1,
            "coordinate columns must be followed by `weight`",
        ));
    }
    let rest = &cols[d + 2..];
    if rest.is_empty() {
        return Ok((d, false));
    }
    let expected: Vec<String> = (1..=d).map(|k| format!("d{k}")).collect();
    if rest != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(parse_error(
            path,
            1,
            format!("derivative columns must be {}", expected.join(",")),
        ));
    }
    Ok((d, true))
}

pub fn read_functionals(path: &Path) -> Result<Vec<Functional>> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let (d, has_deriv) = atom_layout(path, &header)?;
    let mut order: Vec<usize> = Vec::new();
    let mut atoms: HashMap<usize, Vec<Atom>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize| rec.get(k).unwrap_or("");
        let id: usize = field(0)
            .parse()
            .map_err(|_| parse_error(path, line, format!("bad id {:?}", field(0))))?;
        let num = |k: usize| -> Result<f64> {
            let v: f64 = field(k).parse().map_err(|_| {
                parse_error(
                    path,
                    line,
                    format!("bad number {:?} in column {}", field(k), k + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_error(
                    path,
                    line,
                    format!("non-finite value in column {}", k + 1),
                ));
            }
            Ok(v)
        };
        let point = (1..=d).map(num).collect::<Result<Vec<f64>>>()?;
        let weight = num(d + 1)?;
        let deriv = if has_deriv {
            (0..d)
                .map(|k| {
                    let s = field(d + 2 + k);
                    s.parse::<u32>().map_err(|_| {
                        parse_error(
                            path,
                            line,
                            format!("derivative order {s:?} is not a nonnegative integer"),
                        )
                    })
                })
                .collect::<Result<Vec<u32>>>()?
        } else {
            vec![0; d]
        };
        let atom =
            Atom::new(point, weight, deriv).map_err(|e| parse_error(path, line, e.to_string()))?;
        atoms
            .entry(id)
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(atom);
    }
    if order.is_empty() {
        return Err(CliError::input(format!("{}: no atoms", path.display())));
    }
    order
        .into_iter()
        .map(|id| {
            Functional::new(id, atoms.remove(&id).unwrap_or_default())
                .map_err(|e| CliError::input(format!("{}: functional {id}: {e}", path.display())))
        })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn fmt(v: f64) -> String {
    // shortest representation that round-trips
    format!("{v:?}")
}

pub fn write_functionals(path: &Path, functionals: &[Functional]) -> Result<()> {
    let d = functionals.first().map_or(1, Functional::dim);
    let has_deriv = functionals
        .iter()
        .flat_map(Functional::atoms)
        .any(|a| a.deriv().iter().any(|&k| k > 0));
    let mut header = vec!["id".to_string()];
    header.extend((1..=d).map(|k| format!("x{k}")));
    header.push("weight".into());
    if has_deriv {
        header.extend((1..=d).map(|k| format!("d{k}")));
    }
    let mut w = writer(path)?;
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for f in functionals {
        for a in f.atoms() {
            let mut row = vec![f.id().to_string()];
            row.extend(a.point().iter().map(|&x| fmt(x)));
            row.push(fmt(a.weight()));
            if has_deriv {
                row.extend(a.deriv().iter().map(u32::to_string));
            }
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads `id,<column>` rows in file order.
pub fn read_values(path: &Path, column: &str) -> Result<Vec<(usize, f64)>> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let id_col = header.iter().position(|c| c == "id");
    let val_col = header.iter().position(|c| c == column);
    let (Some(ic), Some(vc)) = (id_col, val_col) else {
        return Err(parse_error(
            path,
            1,
            format!("header needs columns `id` and `{column}`"),
        ));
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let id = rec[ic]
            .parse()
            .map_err(|_| parse_error(path, line, format!("bad id {:?}", &rec[ic])))?;
        let v: f64 = rec[vc]
            .parse()
            .map_err(|_| parse_error(path, line, format!("bad value {:?}", &rec[vc])))?;
        if !v.is_finite() {
            return Err(parse_error(path, line, "non-finite value"));
        }
        out.push((id, v));
    }
    Ok(out)
}

pub fn write_values(path: &Path, ids: &[usize], values: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["id", "value"])
        .map_err(|e| csv_error(path, e))?;
    for (id, v) in ids.iter().zip(values) {
        w.write_record([id.to_string(), fmt(*v)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Generic CSV table writer for reports.
pub(crate) fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub(crate) fn num(v: f64) -> String {
    fmt(v)
}
