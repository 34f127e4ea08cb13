//! JSON spec files and the built-in example corpus.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::expr::{Expr, ParseError};
use crate::manifold::{Connection, ManifoldError, ManifoldSpec, MetricField};

#[derive(Debug, Error)]
pub enum SpecFileError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed spec JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("in {field}: {source}")]
    Expression {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("dimension is {dimension} but {what} has {found} entries")]
    DimensionMismatch {
        what: String,
        dimension: usize,
        found: usize,
    },
    #[error("connection kind {0:?} needs a gamma array")]
    MissingGamma(String),
    #[error("gamma is only allowed with the explicit connection kind, not {0:?}")]
    UnexpectedGamma(String),
    #[error("unknown connection kind {0:?} (expected flat, levi-civita, hessian-dual or explicit)")]
    UnknownConnection(String),
    #[error("{0:?} is neither a built-in example nor a readable file")]
    UnknownExample(String),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDocument {
    name: Option<String>,
    dimension: usize,
    coordinates: Vec<String>,
    metric: MetricDocument,
    connection: ConnectionDocument,
    sample_box: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum MetricDocument {
    Components(Vec<Vec<String>>),
    Potential(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConnectionDocument {
    kind: String,
    gamma: Option<Vec<Vec<Vec<String>>>>,
}

const BUILTINS: [(&str, &str); 6] = [
    ("euclidean2", include_str!("../specs/euclidean2.json")),
    ("hessian-exp2", include_str!("../specs/hessian-exp2.json")),
    ("flat-skew-metric", include_str!("../specs/flat-skew-metric.json")),
    ("sphere2", include_str!("../specs/sphere2.json")),
    ("flat-torsionful", include_str!("../specs/flat-torsionful.json")),
    ("pullback-flat", include_str!("../specs/pullback-flat.json")),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(name, _)| *name).collect()
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// All built-in specs in corpus order.
pub fn builtin_corpus() -> Vec<ManifoldSpec> {
    BUILTINS
        .iter()
        .map(|(name, text)| parse_spec(text, name).expect("built-in specs are valid"))
        .collect()
}

/// A built-in name, or else a path to a spec file.
pub fn load_spec(name_or_path: &str) -> Result<ManifoldSpec, SpecFileError> {
    if let Some(text) = builtin_source(name_or_path) {
        return parse_spec(text, name_or_path);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        return Err(SpecFileError::UnknownExample(name_or_path.to_string()));
    }
    load_spec_file(path)
}

pub fn load_spec_file(path: &Path) -> Result<ManifoldSpec, SpecFileError> {
    let text = fs::read_to_string(path).map_err(|source| SpecFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_spec(&text, &fallback)
}

/// Parses spec JSON; `fallback_name` is used when the document has no `name`.
pub fn parse_spec(text: &str, fallback_name: &str) -> Result<ManifoldSpec, SpecFileError> {
    let doc: SpecDocument = serde_json::from_str(text).map_err(|e| SpecFileError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let n = doc.dimension;
    let check = |what: &str, found: usize| {
        if found == n {
            Ok(())
        } else {
            Err(SpecFileError::DimensionMismatch {
                what: what.to_string(),
                dimension: n,
                found,
            })
        }
    };
    check("coordinates", doc.coordinates.len())?;
    check("sample_box", doc.sample_box.len())?;
    let coords = &doc.coordinates;
    let parse = |field: String, text: &str| {
        Expr::parse(text, coords).map_err(|source| SpecFileError::Expression { field, source })
    };

    let metric = match &doc.metric {
        MetricDocument::Components(rows) => {
            check("metric", rows.len())?;
            let mut grid = Vec::with_capacity(n);
            for (i, row) in rows.iter().enumerate() {
                check(&format!("metric row {i}"), row.len())?;
                grid.push(
                    row.iter()
                        .enumerate()
                        .map(|(j, t)| parse(format!("metric[{i}][{j}]"), t))
                        .collect::<Result<Vec<_>, _>>()?,
                );
            }
            MetricField::Components(grid)
        }
        MetricDocument::Potential(t) => MetricField::Potential(parse("potential".into(), t)?),
    };

    let kind = doc.connection.kind.as_str();
    let connection = match (kind, &doc.connection.gamma) {
        ("explicit", None) => return Err(SpecFileError::MissingGamma(kind.into())),
        ("explicit", Some(gamma)) => {
            check("gamma", gamma.len())?;
            let mut planes = Vec::with_capacity(n);
            for (k, plane) in gamma.iter().enumerate() {
                check(&format!("gamma[{k}]"), plane.len())?;
                let mut rows = Vec::with_capacity(n);
                for (i, row) in plane.iter().enumerate() {
                    check(&format!("gamma[{k}][{i}]"), row.len())?;
                    rows.push(
                        row.iter()
                            .enumerate()
                            .map(|(j, t)| parse(format!("gamma[{k}][{i}][{j}]"), t))
                            .collect::<Result<Vec<_>, _>>()?,
                    );
                }
                planes.push(rows);
            }
            Connection::Explicit(planes)
        }
        ("flat" | "levi-civita" | "hessian-dual", Some(_)) => return Err(SpecFileError::UnexpectedGamma(kind.into())),
        ("flat", None) => Connection::Flat,
        ("levi-civita", None) => Connection::LeviCivita,
        ("hessian-dual", None) => Connection::HessianDual,
        _ => return Err(SpecFileError::UnknownConnection(kind.into())),
    };

    let name = doc.name.clone().unwrap_or_else(|| fallback_name.to_string());
    Ok(ManifoldSpec::new(
        name,
        doc.coordinates.clone(),
        metric,
        connection,
        doc.sample_box.clone(),
    )?)
}
