//! Result files: CSV tables, JSON documents and subset files read back by
//! `eval`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mts_select::{Dataset, Error, Result};
use serde::Serialize;

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_error(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            row: 0,
            message: format!("{other:?}"),
        },
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

/// Writes `rows` under `header` with LF line endings.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    let mut f = fs::File::create(path).map_err(|e| io_error(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| io_error(path, e))
}

/// A feature subset read from `alpha.csv` or `scores.csv`.
#[derive(Debug, Clone, PartialEq)]
pub enum SubsetFile {
    /// `(feature id, alpha)` for every row.
    Alpha(Vec<(usize, f64)>),
    /// `(feature id, rank)` for every row.
    Scores(Vec<(usize, usize)>),
}

fn parse_field<T: std::str::FromStr>(path: &Path, row: usize, field: Option<&str>, what: &str) -> Result<T> {
    field
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            row,
            message: format!("missing or invalid {what}"),
        })
}

/// Reads a subset file, checking feature ids and names against `dataset`.
pub fn read_subset(path: &Path, dataset: &Dataset) -> Result<SubsetFile> {
    if !path.is_file() {
        return Err(Error::MissingFile {
            what: "subset",
            path: path.to_path_buf(),
        });
    }
    let mut r = csv::ReaderBuilder::new().from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let is_alpha = header == ["feature_id", "name", "alpha"];
    if !is_alpha && header != ["feature_id", "name", "score", "rank"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            message: format!("expected an alpha.csv or scores.csv header, found {header:?}"),
        });
    }
    let mut alpha = Vec::new();
    let mut ranks = Vec::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        let id: usize = parse_field(path, row, record.get(0), "feature_id")?;
        let name = record.get(1).unwrap_or_default();
        match dataset.descriptors().get(id) {
            Some(d) if d.name == name => {}
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    message: format!("feature {id} {name:?} does not match the dataset"),
                })
            }
        }
        if is_alpha {
            let a: f64 = parse_field(path, row, record.get(2), "alpha")?;
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    message: format!("alpha {a} must be finite and nonnegative"),
                });
            }
            alpha.push((id, a));
        } else {
            ranks.push((id, parse_field(path, row, record.get(3), "rank")?));
        }
    }
    Ok(if is_alpha {
        SubsetFile::Alpha(alpha)
    } else {
        SubsetFile::Scores(ranks)
    })
}

/// `(results path, run.json path)` for an eval `--out` that is either a
/// `.json` file or a directory.
pub fn eval_paths(out: &Path) -> (PathBuf, PathBuf) {
    if out.extension().is_some_and(|e| e == "json") {
        let dir = out.parent().map(Path::to_path_buf).unwrap_or_default();
        (out.to_path_buf(), dir.join("run.json"))
    } else {
        (out.join("results.json"), out.join("run.json"))
    }
}
