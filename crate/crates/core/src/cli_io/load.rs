//! File ingestion.
//!
//! * one-way data: CSV with a `group,value` header, one observation per row;
//!   groups are labelled by arbitrary strings and numbered in order of first
//!   appearance.
//! * general data: headerless numeric CSV matrices `y` (n×1), `X` (n×p),
//!   `Z` (n×a) and `A` (a×a).
//! * eigenstructures: `λ:r` pairs separated by commas, inline or in a file.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model_reduction::{Eigenstructure, MixedModelSpec};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        kind => Error::Parse {
            line,
            msg: format!("{}: {kind:?}", path.display()),
        },
    }
}

fn parse_cell(cell: &str, line: u64, what: &str) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{what} '{cell}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("{what} '{cell}' is not finite"),
        });
    }
    Ok(v)
}

/// One-way layout from a `group,value` CSV: intercept-only `X`, indicator
/// `Z`, `A = I`.
pub fn load_oneway(path: &Path) -> Result<MixedModelSpec> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("{}: missing column '{name}'", path.display())))
    };
    let (gi, vi) = (col("group")?, col("value")?);

    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut groups = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let (Some(g), Some(v)) = (rec.get(gi), rec.get(vi)) else {
            return Err(Error::Parse {
                line,
                msg: "row is missing the group or value field".into(),
            });
        };
        let next = ids.len();
        groups.push(*ids.entry(g.to_string()).or_insert(next));
        values.push(parse_cell(v, line, "value")?);
    }
    if values.len() < 3 {
        return Err(Error::Schema(format!(
            "{}: need at least 3 rows, got {}",
            path.display(),
            values.len()
        )));
    }
    if ids.len() < 2 {
        return Err(Error::Schema(format!(
            "{}: need at least 2 groups, got {}",
            path.display(),
            ids.len()
        )));
    }
    let n = values.len();
    let a = ids.len();
    let mut z = DMatrix::zeros(n, a);
    for (i, &g) in groups.iter().enumerate() {
        z[(i, g)] = 1.0;
    }
    MixedModelSpec::new(
        DVector::from_vec(values),
        DMatrix::from_element(n, 1, 1.0),
        z,
        DMatrix::identity(a, a),
    )
}

/// Headerless numeric CSV as a dense matrix.
pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .map(|c| parse_cell(c, line, "entry"))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("{} fields, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Schema(format!("{}: empty matrix", path.display())));
    }
    let c = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

/// Where the relationship matrix comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ASource<'a> {
    Identity,
    File(&'a Path),
}

impl<'a> ASource<'a> {
    /// `identity` or a path.
    pub fn from_arg(arg: &'a str) -> Self {
        if arg == "identity" {
            ASource::Identity
        } else {
            ASource::File(Path::new(arg))
        }
    }
}

/// General model from separate matrix files. Dimension errors name the
/// mismatched pair.
pub fn load_general(y_path: &Path, x_path: &Path, z_path: &Path, a: ASource<'_>) -> Result<MixedModelSpec> {
    let ym = load_matrix(y_path)?;
    let y = if ym.ncols() == 1 {
        ym.column(0).into_owned()
    } else if ym.nrows() == 1 {
        ym.row(0).transpose()
    } else {
        return Err(Error::Dimension(format!(
            "y is {}x{}, expected a vector",
            ym.nrows(),
            ym.ncols()
        )));
    };
    let x = load_matrix(x_path)?;
    let z = load_matrix(z_path)?;
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "y has {} rows but X has {}",
            y.len(),
            x.nrows()
        )));
    }
    if z.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "y has {} rows but Z has {}",
            y.len(),
            z.nrows()
        )));
    }
    let a = match a {
        ASource::Identity => DMatrix::identity(z.ncols(), z.ncols()),
        ASource::File(p) => load_matrix(p)?,
    };
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "A is {}x{}, not square",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() != z.ncols() {
        return Err(Error::Dimension(format!(
            "Z has {} columns but A is {}x{}",
            z.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    MixedModelSpec::new(y, x, z, a)
}

/// Parse `λ₁:r₁,λ₂:r₂,...`; if `arg` names an existing file its contents are
/// parsed instead (pairs may then also be separated by newlines).
pub fn load_eigen(arg: &str) -> Result<Eigenstructure> {
    let path = Path::new(arg);
    let text = if path.is_file() {
        fs::read_to_string(path).map_err(|e| io_err(path, e))?
    } else {
        arg.to_string()
    };
    let mut lambdas = Vec::new();
    let mut mults = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for item in line.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let bad = |msg: String| Error::Parse {
                line: ln as u64 + 1,
                msg,
            };
            let (l, r) = item
                .split_once(':')
                .ok_or_else(|| bad(format!("'{item}' is not of the form lambda:mult")))?;
            let l: f64 = l
                .trim()
                .parse()
                .map_err(|_| bad(format!("eigenvalue '{l}' is not a number")))?;
            let r: usize = r
                .trim()
                .parse()
                .map_err(|_| bad(format!("multiplicity '{r}' is not a positive integer")))?;
            lambdas.push(l);
            mults.push(r);
        }
    }
    Eigenstructure::new(lambdas, mults)
}

/// Comma-separated positive reals, e.g. sufficient statistics.
pub fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{what}: '{t}' is not a number")))
        })
        .collect()
}

/// Comma-separated group sizes.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("group size '{t}' is not a nonnegative integer")))
        })
        .collect()
}
