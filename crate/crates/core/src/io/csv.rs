use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::data::{Dataset, FeatureKind, FeatureMatrix, FeatureSchema, FeatureSpec, Features, CATEGORY_MISSING};
use crate::error::{Error, Result};

/// How to map CSV columns onto a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvOptions {
    pub target: String,
    /// Exposure column; every exposure is 1.0 when `None`.
    pub exposure: Option<String>,
    pub categoricals: Vec<String>,
    /// Feature columns in order; `None` takes every other column.
    pub features: Option<Vec<String>>,
    pub missing_markers: Vec<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            target: "y".into(),
            exposure: None,
            categoricals: Vec::new(),
            features: None,
            missing_markers: vec![String::new(), "NA".into()],
        }
    }
}

fn input_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Input {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn row_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Row {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn column(headers: &[String], name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| input_error(path, format!("missing column {name:?}")))
}

pub(crate) fn open(path: &Path) -> Result<::csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| input_error(path, e.to_string()))?;
    Ok(::csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn read_headers(path: &Path) -> Result<Vec<String>> {
    let mut reader = open(path)?;
    Ok(reader.headers()?.iter().map(|h| h.trim().to_string()).collect())
}

struct Columns {
    target: Option<usize>,
    exposure: Option<usize>,
    features: Vec<usize>,
}

struct Parsed {
    n_rows: usize,
    numeric: Vec<Vec<f64>>,
    categorical: Vec<Vec<u32>>,
    target: Vec<f64>,
    exposure: Vec<f64>,
}

/// Reads every row. Category dictionaries grow only when `grow` is set;
/// otherwise unseen labels become missing.
fn parse(path: &Path, schema: &mut FeatureSchema, cols: &Columns, grow: bool) -> Result<Parsed> {
    let mut reader = open(path)?;
    let layout = schema.layout();
    let markers = schema.missing_markers.clone();
    let is_missing = |cell: &str| markers.iter().any(|m| m == cell.trim());
    let mut numeric = vec![Vec::new(); layout.numeric];
    let mut categorical = vec![Vec::new(); layout.categorical];
    let mut target = Vec::new();
    let mut exposure = Vec::new();
    let mut lookup: Vec<HashMap<String, u32>> = schema
        .features
        .iter()
        .filter(|f| f.kind == FeatureKind::Categorical)
        .map(|f| f.categories.iter().enumerate().map(|(c, s)| (s.clone(), c as u32)).collect())
        .collect();

    let mut record = ::csv::StringRecord::new();
    let mut n_rows = 0;
    while reader.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        let cell = |i: usize| record.get(i).unwrap_or("");

        if let Some(t) = cols.target {
            let raw = cell(t).trim();
            let y: f64 = raw
                .parse()
                .map_err(|_| row_error(path, line, format!("response {raw:?} is not a number")))?;
            if !(y >= 0.0 && y.is_finite()) {
                return Err(row_error(path, line, format!("response {raw} is negative or not finite")));
            }
            target.push(y);
        }
        let w = match cols.exposure {
            Some(e) if !is_missing(cell(e)) => {
                let raw = cell(e).trim();
                let w: f64 = raw
                    .parse()
                    .map_err(|_| row_error(path, line, format!("exposure {raw:?} is not a number")))?;
                if !(w > 0.0 && w.is_finite()) {
                    return Err(row_error(path, line, format!("exposure {raw} is not positive")));
                }
                w
            }
            _ => 1.0,
        };
        exposure.push(w);

        let (mut jn, mut jc) = (0, 0);
        for (spec, &c) in schema.features.iter_mut().zip(&cols.features) {
            let raw = cell(c);
            match spec.kind {
                FeatureKind::Numeric => {
                    let v = if is_missing(raw) {
                        f64::NAN
                    } else {
                        raw.trim().parse::<f64>().ok().filter(|v| v.is_finite()).unwrap_or(f64::NAN)
                    };
                    numeric[jn].push(v);
                    jn += 1;
                }
                FeatureKind::Categorical => {
                    let label = raw.trim();
                    let code = if is_missing(raw) {
                        CATEGORY_MISSING
                    } else if let Some(&code) = lookup[jc].get(label) {
                        code
                    } else if grow {
                        let code = spec.categories.len() as u32;
                        spec.categories.push(label.to_string());
                        lookup[jc].insert(label.to_string(), code);
                        code
                    } else {
                        CATEGORY_MISSING
                    };
                    categorical[jc].push(code);
                    jc += 1;
                }
            }
        }
        n_rows += 1;
    }
    Ok(Parsed {
        n_rows,
        numeric,
        categorical,
        target,
        exposure,
    })
}

/// Feature columns ordered numeric first, then categorical, matching the
/// storage order of [`FeatureMatrix`].
fn kind_ordered(features: Vec<FeatureSpec>) -> Vec<FeatureSpec> {
    let (mut num, cat): (Vec<_>, Vec<_>) = features.into_iter().partition(|f| f.kind == FeatureKind::Numeric);
    num.extend(cat);
    num
}

/// Load a training dataset, building the schema from the header and
/// assigning category codes by first appearance.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let headers = read_headers(path)?;
    let target = column(&headers, &options.target, path)?;
    let exposure = options
        .exposure
        .as_deref()
        .map(|e| column(&headers, e, path))
        .transpose()?;
    for c in &options.categoricals {
        column(&headers, c, path)?;
    }
    let names: Vec<String> = match &options.features {
        Some(list) => list.clone(),
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target && Some(*i) != exposure)
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let features = kind_ordered(
        names
            .into_iter()
            .map(|name| FeatureSpec {
                kind: if options.categoricals.contains(&name) {
                    FeatureKind::Categorical
                } else {
                    FeatureKind::Numeric
                },
                name,
                categories: Vec::new(),
            })
            .collect(),
    );
    let mut schema = FeatureSchema::new(features, options.target.clone(), options.exposure.clone())?;
    schema.missing_markers = options.missing_markers.clone();
    let feature_cols = schema
        .features
        .iter()
        .map(|f| column(&headers, &f.name, path))
        .collect::<Result<Vec<_>>>()?;
    let cols = Columns {
        target: Some(target),
        exposure,
        features: feature_cols,
    };
    let parsed = parse(path, &mut schema, &cols, true)?;
    finish(schema, parsed)
}

fn finish(schema: FeatureSchema, parsed: Parsed) -> Result<Dataset> {
    let features = FeatureMatrix::new(parsed.n_rows, parsed.numeric, parsed.categorical)?;
    Dataset::new(schema, features, parsed.target, parsed.exposure)
}

fn schema_columns(path: &Path, headers: &[String], schema: &FeatureSchema, need_target: bool) -> Result<Columns> {
    let target = if need_target {
        Some(column(headers, &schema.target, path)?)
    } else {
        None
    };
    let exposure = match &schema.exposure {
        Some(e) => headers.iter().position(|h| h == e),
        None => None,
    };
    let features = schema
        .features
        .iter()
        .map(|f| column(headers, &f.name, path))
        .collect::<Result<Vec<_>>>()?;
    Ok(Columns {
        target,
        exposure,
        features,
    })
}

/// Load a labelled dataset using a frozen schema; unseen categories are missing.
pub fn load_with_schema(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let headers = read_headers(path)?;
    let cols = schema_columns(path, &headers, schema, true)?;
    let mut schema = schema.clone();
    let parsed = parse(path, &mut schema, &cols, false)?;
    finish(schema, parsed)
}

/// Load features and exposures only; the response column may be absent.
pub fn load_features(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<(FeatureMatrix, Vec<f64>)> {
    let path = path.as_ref();
    let headers = read_headers(path)?;
    let cols = schema_columns(path, &headers, schema, false)?;
    let mut schema = schema.clone();
    let parsed = parse(path, &mut schema, &cols, false)?;
    Ok((
        FeatureMatrix::new(parsed.n_rows, parsed.numeric, parsed.categorical)?,
        parsed.exposure,
    ))
}

/// Write `contents` to a temporary sibling file, then rename it into place.
pub fn write_text_atomic(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Write rows of already formatted cells as CSV, atomically.
pub fn write_rows_csv(path: impl AsRef<Path>, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut writer = ::csv::Writer::from_writer(Vec::new());
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(&row)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))?;
    write_text_atomic(path, &text)
}

/// Write a dataset in schema order plus response and exposure columns.
/// Floats use the shortest representation that reads back exactly.
pub fn write_dataset_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let schema = &data.schema;
    let mut header: Vec<&str> = schema.features.iter().map(|f| f.name.as_str()).collect();
    header.push(&schema.target);
    let exposure_name = schema.exposure.clone().unwrap_or_else(|| "w".to_string());
    header.push(&exposure_name);

    let rows = (0..data.len()).map(|i| {
        let r = data.features.row(i);
        let (mut jn, mut jc) = (0, 0);
        let mut cells: Vec<String> = schema
            .features
            .iter()
            .map(|f| match f.kind {
                FeatureKind::Numeric => {
                    jn += 1;
                    r.numeric(jn - 1).map_or(String::new(), |v| v.to_string())
                }
                FeatureKind::Categorical => {
                    jc += 1;
                    r.categorical(jc - 1)
                        .map_or(String::new(), |c| f.categories.get(c as usize).cloned().unwrap_or_default())
                }
            })
            .collect();
        cells.push(data.target[i].to_string());
        cells.push(data.exposure[i].to_string());
        cells
    });
    write_rows_csv(path, &header, rows)
}
