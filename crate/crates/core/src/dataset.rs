//! Labeled heterogeneous multivariate time-series datasets and their on-disk
//! layout.
//!
//! A dataset directory holds:
//!
//! ```text
//! meta.json           {"features":[{"name":"hr","kind":"timeseries"}, ...]}
//! labels.csv          segment_id,label
//! values/<name>.csv   segment_id,t,value   (timeseries)
//!                     segment_id,value     (scalar, categorical)
//! split.csv           segment_id,set       (optional; set is train|test)
//! ```
//!
//! Without `split.csv` every segment is a training segment.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{self, Stage};

const META_FILE: &str = "meta.json";
const LABELS_FILE: &str = "labels.csv";
const SPLIT_FILE: &str = "split.csv";
const VALUES_DIR: &str = "values";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    #[serde(rename = "timeseries")]
    TimeSeries,
    #[serde(rename = "scalar")]
    Scalar,
    #[serde(rename = "categorical")]
    Categorical,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::TimeSeries => "timeseries",
            FeatureKind::Scalar => "scalar",
            FeatureKind::Categorical => "categorical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "timeseries" => Some(FeatureKind::TimeSeries),
            "scalar" => Some(FeatureKind::Scalar),
            "categorical" => Some(FeatureKind::Categorical),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureDescriptor {
    pub id: usize,
    pub name: String,
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Series(Vec<f64>),
    Scalar(f64),
    Category(String),
}

impl Value {
    pub fn kind(&self) -> FeatureKind {
        match self {
            Value::Series(_) => FeatureKind::TimeSeries,
            Value::Scalar(_) => FeatureKind::Scalar,
            Value::Category(_) => FeatureKind::Categorical,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: usize,
    /// One value per feature descriptor, indexed by feature id.
    pub values: Vec<Value>,
    /// Index into [`Dataset::classes`].
    pub label: usize,
}

/// An immutable, validated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    descriptors: Vec<FeatureDescriptor>,
    segments: Vec<Segment>,
    classes: Vec<String>,
    train_ids: Vec<usize>,
    test_ids: Vec<usize>,
}

impl Dataset {
    /// Validates every invariant and builds the dataset.
    pub fn new(
        descriptors: Vec<FeatureDescriptor>,
        segments: Vec<Segment>,
        classes: Vec<String>,
        train_ids: Vec<usize>,
        test_ids: Vec<usize>,
    ) -> Result<Self> {
        let ds = Self {
            descriptors,
            segments,
            classes,
            train_ids,
            test_ids,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Builds a dataset from per-segment values and label tokens. Classes are
    /// numbered in first-appearance order; every segment is a training segment.
    pub fn from_labeled(
        features: Vec<(String, FeatureKind)>,
        values: Vec<Vec<Value>>,
        labels: Vec<String>,
    ) -> Result<Self> {
        if values.len() != labels.len() {
            return Err(Error::CountMismatch {
                message: format!("{} value rows but {} labels", values.len(), labels.len()),
            });
        }
        let descriptors = features
            .into_iter()
            .enumerate()
            .map(|(id, (name, kind))| FeatureDescriptor { id, name, kind })
            .collect();
        let mut classes: Vec<String> = Vec::new();
        let mut segments = Vec::with_capacity(values.len());
        for (id, (values, label)) in values.into_iter().zip(labels).enumerate() {
            let label = class_index(&mut classes, label);
            segments.push(Segment { id, values, label });
        }
        let n = segments.len();
        Self::new(descriptors, segments, classes, (0..n).collect(), Vec::new())
    }

    fn validate(&self) -> Result<()> {
        let m = self.descriptors.len();
        let n = self.segments.len();
        if m == 0 {
            return Err(Error::InvalidDataset("no features".into()));
        }
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 segments, found {n}")));
        }
        let mut names = HashSet::new();
        for (idx, d) in self.descriptors.iter().enumerate() {
            if d.id != idx {
                return Err(Error::InvalidDataset(format!(
                    "feature ids must be contiguous: position {idx} has id {}",
                    d.id
                )));
            }
            if !valid_feature_name(&d.name) {
                return Err(Error::InvalidDataset(format!("invalid feature name {:?}", d.name)));
            }
            if !names.insert(d.name.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate feature name {:?}", d.name)));
            }
        }
        let mut seen = HashSet::new();
        for c in &self.classes {
            if !seen.insert(c.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate class token {c:?}")));
            }
        }
        let mut used = HashSet::new();
        for (idx, seg) in self.segments.iter().enumerate() {
            if seg.id != idx {
                return Err(Error::InvalidDataset(format!(
                    "segment ids must be contiguous: position {idx} has id {}",
                    seg.id
                )));
            }
            if seg.label >= self.classes.len() {
                return Err(Error::InvalidDataset(format!(
                    "segment {idx} has label index {} outside {} classes",
                    seg.label,
                    self.classes.len()
                )));
            }
            used.insert(seg.label);
            if seg.values.len() != m {
                return Err(Error::CountMismatch {
                    message: format!("segment {idx} has {} values for {m} features", seg.values.len()),
                });
            }
            for (d, v) in self.descriptors.iter().zip(&seg.values) {
                if v.kind() != d.kind {
                    return Err(Error::InvalidDataset(format!(
                        "segment {idx}, feature {:?}: expected {} value, found {}",
                        d.name,
                        d.kind.as_str(),
                        v.kind().as_str()
                    )));
                }
                match v {
                    Value::Series(s) if s.is_empty() => {
                        return Err(Error::EmptySeries {
                            path: PathBuf::from("<memory>"),
                            segment: idx,
                            feature: d.name.clone(),
                        })
                    }
                    Value::Series(s) if s.iter().any(|x| !x.is_finite()) => {
                        return Err(Error::InvalidDataset(format!(
                            "segment {idx}, feature {:?}: non-finite sample",
                            d.name
                        )))
                    }
                    Value::Scalar(x) if !x.is_finite() => {
                        return Err(Error::InvalidDataset(format!(
                            "segment {idx}, feature {:?}: non-finite value",
                            d.name
                        )))
                    }
                    Value::Category(t) if t.is_empty() => {
                        return Err(Error::MissingValue {
                            segment: idx,
                            feature: d.name.clone(),
                        })
                    }
                    _ => {}
                }
            }
        }
        if used.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 classes, found {}",
                used.len()
            )));
        }
        let mut membership = vec![0u8; n];
        for (ids, what) in [(&self.train_ids, "train"), (&self.test_ids, "test")] {
            if ids.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidDataset(format!("{what} ids must be strictly ascending")));
            }
            for &id in ids.iter() {
                if id >= n {
                    return Err(Error::InvalidDataset(format!("{what} id {id} out of range")));
                }
                membership[id] += 1;
            }
        }
        if let Some(id) = membership.iter().position(|&c| c != 1) {
            return Err(Error::InvalidDataset(format!(
                "train/test split must partition the segments; segment {id} appears {} times",
                membership[id]
            )));
        }
        Ok(())
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.descriptors
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn train_ids(&self) -> &[usize] {
        &self.train_ids
    }

    pub fn test_ids(&self) -> &[usize] {
        &self.test_ids
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn n_features(&self) -> usize {
        self.descriptors.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Label indices of all segments.
    pub fn labels(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.label).collect()
    }

    pub fn labels_of(&self, ids: &[usize]) -> Vec<usize> {
        ids.iter().map(|&i| self.segments[i].label).collect()
    }

    pub fn value(&self, segment: usize, feature: usize) -> &Value {
        &self.segments[segment].values[feature]
    }

    /// Same data with a different train/test partition.
    pub fn with_split(&self, train_ids: Vec<usize>, test_ids: Vec<usize>) -> Result<Self> {
        Self::new(
            self.descriptors.clone(),
            self.segments.clone(),
            self.classes.clone(),
            train_ids,
            test_ids,
        )
    }

    /// Same data with the listed features reordered or subset (`order[k]` is
    /// the old id of new feature `k`).
    pub fn with_features(&self, order: &[usize]) -> Result<Self> {
        let descriptors = order
            .iter()
            .enumerate()
            .map(|(id, &old)| FeatureDescriptor {
                id,
                ..self.descriptors[old].clone()
            })
            .collect();
        let segments = self
            .segments
            .iter()
            .map(|s| Segment {
                id: s.id,
                values: order.iter().map(|&old| s.values[old].clone()).collect(),
                label: s.label,
            })
            .collect();
        Self::new(
            descriptors,
            segments,
            self.classes.clone(),
            self.train_ids.clone(),
            self.test_ids.clone(),
        )
    }

    /// Hex SHA-256 over feature descriptors, values and labels. The split is
    /// excluded: distance matrices do not depend on it.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for d in &self.descriptors {
            h.update(d.name.as_bytes());
            h.update([0u8]);
            h.update(d.kind.as_str().as_bytes());
            h.update([0u8]);
        }
        for seg in &self.segments {
            h.update(self.classes[seg.label].as_bytes());
            h.update([0u8]);
            for v in &seg.values {
                match v {
                    Value::Series(s) => {
                        h.update((s.len() as u64).to_le_bytes());
                        for x in s {
                            h.update(x.to_bits().to_le_bytes());
                        }
                    }
                    Value::Scalar(x) => h.update(x.to_bits().to_le_bytes()),
                    Value::Category(t) => {
                        h.update(t.as_bytes());
                        h.update([0u8]);
                    }
                }
            }
        }
        hex::encode(h.finalize())
    }
}

fn class_index(classes: &mut Vec<String>, label: String) -> usize {
    match classes.iter().position(|c| *c == label) {
        Some(i) => i,
        None => {
            classes.push(label);
            classes.len() - 1
        }
    }
}

fn valid_feature_name(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && !name.contains(['/', '\\', '\0'])
}

#[derive(Deserialize)]
struct RawMeta {
    features: Vec<RawFeature>,
}

#[derive(Deserialize)]
struct RawFeature {
    name: String,
    kind: String,
}

#[derive(Serialize)]
struct MetaOut<'a> {
    features: Vec<FeatureOut<'a>>,
}

#[derive(Serialize)]
struct FeatureOut<'a> {
    name: &'a str,
    kind: FeatureKind,
}

fn csv_reader(path: &Path, what: &'static str) -> Result<csv::Reader<fs::File>> {
    if !path.is_file() {
        return Err(Error::MissingFile {
            what,
            path: path.to_path_buf(),
        });
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn check_header(rdr: &mut csv::Reader<fs::File>, path: &Path, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e))?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            message: format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn parse_err(path: &Path, row: usize, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        message: e.to_string(),
    }
}

fn parse_field<T: std::str::FromStr>(path: &Path, row: usize, field: &str, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    field
        .trim()
        .parse::<T>()
        .map_err(|e| parse_err(path, row, format!("bad {what} {field:?}: {e}")))
}

fn parse_real(path: &Path, row: usize, field: &str) -> Result<f64> {
    let x: f64 = parse_field(path, row, field, "value")?;
    if !x.is_finite() {
        return Err(parse_err(path, row, format!("non-finite value {field:?}")));
    }
    Ok(x)
}

/// Iterates data records with their 1-based line numbers (header is line 1).
fn records(
    rdr: &mut csv::Reader<fs::File>,
    path: &Path,
    width: usize,
) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 2;
        let rec = rec.map_err(|e| parse_err(path, row, e))?;
        if rec.len() != width {
            return Err(parse_err(path, row, format!("expected {width} fields, found {}", rec.len())));
        }
        out.push((row, rec));
    }
    Ok(out)
}

fn segment_id(path: &Path, row: usize, field: &str, n: usize) -> Result<usize> {
    let id: usize = parse_field(path, row, field, "segment_id")?;
    if id >= n {
        return Err(Error::CountMismatch {
            message: format!(
                "{}:{row}: segment_id {id} but labels.csv has {n} segments",
                path.display()
            ),
        });
    }
    Ok(id)
}

/// Loads and validates the dataset stored under `root`.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Dataset> {
    let root = root.as_ref();

    let meta_path = root.join(META_FILE);
    if !meta_path.is_file() {
        return Err(Error::MissingFile {
            what: "meta",
            path: meta_path,
        });
    }
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: RawMeta = serde_json::from_str(&meta_text).map_err(|source| Error::Json {
        path: meta_path.clone(),
        source,
    })?;
    let mut descriptors = Vec::with_capacity(meta.features.len());
    for (id, f) in meta.features.into_iter().enumerate() {
        let kind = FeatureKind::parse(&f.kind).ok_or_else(|| Error::UnknownKind {
            feature: f.name.clone(),
            kind: f.kind.clone(),
        })?;
        descriptors.push(FeatureDescriptor {
            id,
            name: f.name,
            kind,
        });
    }

    let labels_path = root.join(LABELS_FILE);
    let mut rdr = csv_reader(&labels_path, "labels")?;
    check_header(&mut rdr, &labels_path, &["segment_id", "label"])?;
    let rows = records(&mut rdr, &labels_path, 2)?;
    let mut by_id: BTreeMap<usize, (usize, String)> = BTreeMap::new();
    for (row, rec) in &rows {
        let id: usize = parse_field(&labels_path, *row, &rec[0], "segment_id")?;
        if by_id.insert(id, (*row, rec[1].to_string())).is_some() {
            return Err(parse_err(&labels_path, *row, format!("duplicate segment_id {id}")));
        }
    }
    let n = by_id.len();
    if let Some(pos) = by_id.keys().enumerate().position(|(pos, &id)| pos != id) {
        return Err(Error::CountMismatch {
            message: format!(
                "{}: segment ids must be 0..{n}; segment {pos} is missing",
                labels_path.display()
            ),
        });
    }
    // first-appearance order follows file order, not id order
    let mut file_order: Vec<(usize, usize, &String)> =
        by_id.iter().map(|(&id, (row, label))| (*row, id, label)).collect();
    file_order.sort_unstable();
    let mut classes = Vec::new();
    let mut labels = vec![0usize; n];
    for (_, id, label) in file_order {
        labels[id] = class_index(&mut classes, label.clone());
    }

    let mut values: Vec<Vec<Option<Value>>> = vec![vec![None; descriptors.len()]; n];
    for d in &descriptors {
        if !valid_feature_name(&d.name) {
            return Err(Error::InvalidDataset(format!("invalid feature name {:?}", d.name)));
        }
        let path = root.join(VALUES_DIR).join(format!("{}.csv", d.name));
        let mut rdr = csv_reader(&path, "values")?;
        match d.kind {
            FeatureKind::TimeSeries => {
                check_header(&mut rdr, &path, &["segment_id", "t", "value"])?;
                let mut samples: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n];
                let mut declared_empty = vec![false; n];
                for (row, rec) in records(&mut rdr, &path, 3)? {
                    let seg = segment_id(&path, row, &rec[0], n)?;
                    if rec[1].trim().is_empty() && rec[2].trim().is_empty() {
                        declared_empty[seg] = true;
                        continue;
                    }
                    let t: usize = parse_field(&path, row, &rec[1], "t")?;
                    let x = parse_real(&path, row, &rec[2])?;
                    samples[seg].push((t, row, x));
                }
                for (seg, mut s) in samples.into_iter().enumerate() {
                    if s.is_empty() {
                        if declared_empty[seg] {
                            return Err(Error::EmptySeries {
                                path: path.clone(),
                                segment: seg,
                                feature: d.name.clone(),
                            });
                        }
                        continue;
                    }
                    s.sort_unstable_by_key(|&(t, row, _)| (t, row));
                    for (expect, &(t, row, _)) in s.iter().enumerate() {
                        if t != expect {
                            return Err(parse_err(
                                &path,
                                row,
                                format!("segment {seg}: sample index {t} where {expect} expected"),
                            ));
                        }
                    }
                    values[seg][d.id] = Some(Value::Series(s.into_iter().map(|(_, _, x)| x).collect()));
                }
            }
            FeatureKind::Scalar | FeatureKind::Categorical => {
                check_header(&mut rdr, &path, &["segment_id", "value"])?;
                for (row, rec) in records(&mut rdr, &path, 2)? {
                    let seg = segment_id(&path, row, &rec[0], n)?;
                    if values[seg][d.id].is_some() {
                        return Err(parse_err(&path, row, format!("duplicate value for segment {seg}")));
                    }
                    let v = if d.kind == FeatureKind::Scalar {
                        Value::Scalar(parse_real(&path, row, &rec[1])?)
                    } else {
                        if rec[1].is_empty() {
                            continue;
                        }
                        Value::Category(rec[1].to_string())
                    };
                    values[seg][d.id] = Some(v);
                }
            }
        }
    }

    let mut segments = Vec::with_capacity(n);
    for (id, (vals, label)) in values.into_iter().zip(labels).enumerate() {
        let vals = vals
            .into_iter()
            .enumerate()
            .map(|(j, v)| {
                v.ok_or_else(|| Error::MissingValue {
                    segment: id,
                    feature: descriptors[j].name.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        segments.push(Segment {
            id,
            values: vals,
            label,
        });
    }

    let (train_ids, test_ids) = load_split(root, n)?;
    Dataset::new(descriptors, segments, classes, train_ids, test_ids)
}

fn load_split(root: &Path, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let path = root.join(SPLIT_FILE);
    if !path.exists() {
        return Ok(((0..n).collect(), Vec::new()));
    }
    let mut rdr = csv_reader(&path, "split")?;
    check_header(&mut rdr, &path, &["segment_id", "set"])?;
    let mut assigned: Vec<Option<bool>> = vec![None; n];
    for (row, rec) in records(&mut rdr, &path, 2)? {
        let seg = segment_id(&path, row, &rec[0], n)?;
        let is_train = match rec[1].trim() {
            "train" => true,
            "test" => false,
            other => return Err(parse_err(&path, row, format!("unknown set {other:?}"))),
        };
        if assigned[seg].replace(is_train).is_some() {
            return Err(parse_err(&path, row, format!("duplicate segment {seg}")));
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (seg, a) in assigned.into_iter().enumerate() {
        match a {
            Some(true) => train.push(seg),
            Some(false) => test.push(seg),
            None => {
                return Err(Error::CountMismatch {
                    message: format!("{}: segment {seg} not assigned", path.display()),
                })
            }
        }
    }
    Ok((train, test))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv_writer(path)?;
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `dataset` under `root` in the layout read by [`load_dataset`],
/// including `split.csv` when a test set is present.
pub fn write_dataset(dataset: &Dataset, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    let values_dir = root.join(VALUES_DIR);
    fs::create_dir_all(&values_dir).map_err(|e| Error::io(&values_dir, e))?;

    let meta = MetaOut {
        features: dataset
            .descriptors
            .iter()
            .map(|d| FeatureOut {
                name: &d.name,
                kind: d.kind,
            })
            .collect(),
    };
    let meta_path = root.join(META_FILE);
    let text = serde_json::to_string_pretty(&meta).map_err(|source| Error::Json {
        path: meta_path.clone(),
        source,
    })?;
    fs::write(&meta_path, text + "\n").map_err(|e| Error::io(&meta_path, e))?;

    write_rows(
        &root.join(LABELS_FILE),
        &["segment_id", "label"],
        dataset
            .segments
            .iter()
            .map(|s| [s.id.to_string(), dataset.classes[s.label].clone()]),
    )?;

    for d in &dataset.descriptors {
        let path = values_dir.join(format!("{}.csv", d.name));
        let column = dataset.segments.iter().map(|s| (s.id, &s.values[d.id]));
        match d.kind {
            FeatureKind::TimeSeries => write_rows(
                &path,
                &["segment_id", "t", "value"],
                column.flat_map(|(seg, v)| {
                    let Value::Series(s) = v else { unreachable!("validated kind") };
                    s.iter()
                        .enumerate()
                        .map(move |(t, x)| vec![seg.to_string(), t.to_string(), x.to_string()])
                }),
            )?,
            _ => write_rows(
                &path,
                &["segment_id", "value"],
                column.map(|(seg, v)| {
                    let value = match v {
                        Value::Scalar(x) => x.to_string(),
                        Value::Category(t) => t.clone(),
                        Value::Series(_) => unreachable!("validated kind"),
                    };
                    [seg.to_string(), value]
                }),
            )?,
        }
    }

    let split_path = root.join(SPLIT_FILE);
    if dataset.test_ids.is_empty() {
        if split_path.exists() {
            fs::remove_file(&split_path).map_err(|e| Error::io(&split_path, e))?;
        }
    } else {
        let test: HashSet<usize> = dataset.test_ids.iter().copied().collect();
        write_rows(
            &split_path,
            &["segment_id", "set"],
            (0..dataset.n_segments()).map(|i| {
                [i.to_string(), if test.contains(&i) { "test" } else { "train" }.to_string()]
            }),
        )?;
    }
    Ok(())
}

/// Deterministic stratified train/test split.
///
/// Each class contributes `round(train_fraction * count)` segments to the
/// training side, clamped so both sides keep at least one member.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<Dataset> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_classes()];
    for seg in &dataset.segments {
        by_class[seg.label].push(seg.id);
    }
    let mut rng = rng::stream(seed, Stage::Split);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut ids) in by_class.into_iter().enumerate() {
        if ids.is_empty() {
            continue;
        }
        if ids.len() < 2 {
            return Err(Error::CannotStratify {
                class: dataset.classes[class].clone(),
                count: ids.len(),
            });
        }
        ids.shuffle(&mut rng);
        let k = ((train_fraction * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
        train.extend_from_slice(&ids[..k]);
        test.extend_from_slice(&ids[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    dataset.with_split(train, test)
}

/// Per-feature lookup by name.
pub fn feature_index(dataset: &Dataset) -> HashMap<&str, usize> {
    dataset
        .descriptors
        .iter()
        .map(|d| (d.name.as_str(), d.id))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset::from_labeled(
            vec![
                ("hr".into(), FeatureKind::TimeSeries),
                ("age".into(), FeatureKind::Scalar),
                ("icu".into(), FeatureKind::Categorical),
            ],
            vec![
                vec![Value::Series(vec![1.0, 2.5]), Value::Scalar(40.0), Value::Category("ICU1".into())],
                vec![Value::Series(vec![0.5]), Value::Scalar(61.5), Value::Category("ICU2".into())],
                vec![Value::Series(vec![3.0, 1.0, 0.0]), Value::Scalar(-1.0), Value::Category("ICU1".into())],
                vec![Value::Series(vec![2.0, 2.0]), Value::Scalar(0.1), Value::Category("a,b".into())],
            ],
            vec!["dead".into(), "alive".into(), "dead".into(), "alive".into()],
        )
        .unwrap()
    }

    #[test]
    fn classes_follow_first_appearance() {
        let ds = tiny();
        assert_eq!(ds.classes(), ["dead", "alive"]);
        assert_eq!(ds.labels(), [0, 1, 0, 1]);
        assert_eq!(ds.train_ids(), [0, 1, 2, 3]);
    }

    #[test]
    fn round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let ds = split(&tiny(), 0.5, 3).unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    }

    #[test]
    fn missing_labels_file() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&tiny(), dir.path()).unwrap();
        fs::remove_file(dir.path().join("labels.csv")).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("labels file not found"), "{err}");
    }

    #[test]
    fn missing_value_names_segment_and_feature() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&tiny(), dir.path()).unwrap();
        let p = dir.path().join("values/hr.csv");
        let text = fs::read_to_string(&p).unwrap();
        let kept: Vec<&str> = text.lines().filter(|l| !l.starts_with("3,")).collect();
        fs::write(&p, kept.join("\n") + "\n").unwrap();
        match load_dataset(dir.path()).unwrap_err() {
            Error::MissingValue { segment, feature } => {
                assert_eq!(segment, 3);
                assert_eq!(feature, "hr");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn distinct_load_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&tiny(), dir.path()).unwrap();
        let root = dir.path();

        let age = root.join("values/age.csv");
        let orig = fs::read_to_string(&age).unwrap();
        fs::write(&age, orig.replace("61.5", "sixty")).unwrap();
        assert!(matches!(load_dataset(root), Err(Error::Parse { row: 3, .. })));
        fs::write(&age, &orig).unwrap();

        let hr = root.join("values/hr.csv");
        let orig_hr = fs::read_to_string(&hr).unwrap();
        let kept: Vec<&str> = orig_hr.lines().filter(|l| !l.starts_with("1,")).collect();
        fs::write(&hr, kept.join("\n") + "\n1,,\n").unwrap();
        assert!(matches!(load_dataset(root), Err(Error::EmptySeries { segment: 1, .. })));
        fs::write(&hr, &orig_hr).unwrap();

        let meta = root.join("meta.json");
        let orig_meta = fs::read_to_string(&meta).unwrap();
        fs::write(&meta, orig_meta.replace("\"scalar\"", "\"image\"")).unwrap();
        assert!(matches!(load_dataset(root), Err(Error::UnknownKind { .. })));
        fs::write(&meta, &orig_meta).unwrap();

        fs::write(&age, orig.clone() + "9,1.0\n").unwrap();
        assert!(matches!(load_dataset(root), Err(Error::CountMismatch { .. })));
        fs::write(&age, &orig).unwrap();

        fs::remove_file(root.join("values/icu.csv")).unwrap();
        assert!(matches!(load_dataset(root), Err(Error::MissingFile { what: "values", .. })));
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let values: Vec<Vec<Value>> = (0..10).map(|i| vec![Value::Scalar(i as f64)]).collect();
        let labels = (0..10).map(|i| if i % 2 == 0 { "a" } else { "b" }.to_string()).collect();
        let ds = Dataset::from_labeled(vec![("x".into(), FeatureKind::Scalar)], values, labels).unwrap();
        let a = split(&ds, 0.5, 7).unwrap();
        let b = split(&ds, 0.5, 7).unwrap();
        assert_eq!(a, b);
        // 2.5 per class rounds away from zero
        assert_eq!(a.train_ids().len(), 6);
        assert_eq!(a.test_ids().len(), 4);
        for side in [a.train_ids(), a.test_ids()] {
            let labels = ds.labels_of(side);
            assert!(labels.contains(&0) && labels.contains(&1));
        }
    }

    #[test]
    fn singleton_class_cannot_stratify() {
        let values: Vec<Vec<Value>> = (0..5).map(|i| vec![Value::Scalar(i as f64)]).collect();
        let labels = ["a", "a", "a", "a", "b"].map(String::from).to_vec();
        let ds = Dataset::from_labeled(vec![("x".into(), FeatureKind::Scalar)], values, labels).unwrap();
        let err = split(&ds, 0.5, 1).unwrap_err();
        assert!(err.to_string().contains("cannot stratify"), "{err}");
    }

    #[test]
    fn validation_rejects_single_field_corruptions() {
        let ds = tiny();
        let parts = || {
            (
                ds.descriptors.clone(),
                ds.segments.clone(),
                ds.classes.clone(),
                ds.train_ids.clone(),
                ds.test_ids.clone(),
            )
        };
        let mut cases: Vec<(&str, Box<dyn Fn(&mut (Vec<FeatureDescriptor>, Vec<Segment>, Vec<String>, Vec<usize>, Vec<usize>))>)> = Vec::new();
        cases.push(("descriptor id gap", Box::new(|p| p.0[1].id = 5)));
        cases.push(("duplicate name", Box::new(|p| p.0[1].name = "hr".into())));
        cases.push(("bad name", Box::new(|p| p.0[0].name = "a/b".into())));
        cases.push(("kind mismatch", Box::new(|p| p.0[1].kind = FeatureKind::Categorical)));
        cases.push(("no features", Box::new(|p| {
            p.0.clear();
            for s in &mut p.1 {
                s.values.clear();
            }
        })));
        cases.push(("segment id", Box::new(|p| p.1[2].id = 7)));
        cases.push(("label out of range", Box::new(|p| p.1[0].label = 9)));
        cases.push(("missing value", Box::new(|p| {
            p.1[0].values.pop();
        })));
        cases.push(("empty series", Box::new(|p| p.1[0].values[0] = Value::Series(vec![]))));
        cases.push(("nan series", Box::new(|p| p.1[0].values[0] = Value::Series(vec![f64::NAN]))));
        cases.push(("inf scalar", Box::new(|p| p.1[0].values[1] = Value::Scalar(f64::INFINITY))));
        cases.push(("empty token", Box::new(|p| p.1[0].values[2] = Value::Category(String::new()))));
        cases.push(("single class", Box::new(|p| {
            for s in &mut p.1 {
                s.label = 0;
            }
        })));
        cases.push(("duplicate class", Box::new(|p| p.2[1] = "dead".into())));
        cases.push(("overlap", Box::new(|p| p.4 = vec![0])));
        cases.push(("uncovered", Box::new(|p| {
            p.3.pop();
        })));
        cases.push(("unsorted", Box::new(|p| p.3.swap(0, 1))));
        cases.push(("one segment", Box::new(|p| {
            p.1.truncate(1);
            p.3 = vec![0];
        })));
        for (name, mutate) in cases {
            let mut p = parts();
            mutate(&mut p);
            assert!(Dataset::new(p.0, p.1, p.2, p.3, p.4).is_err(), "accepted corruption: {name}");
        }
        let p = parts();
        assert!(Dataset::new(p.0, p.1, p.2, p.3, p.4).is_ok());
    }
}
