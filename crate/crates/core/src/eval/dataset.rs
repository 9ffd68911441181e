//! Streaming readers for ARFF (numeric and nominal attributes) and CSV with
//! a header row. The class is the last column.
//!
//! CSV headers mark nominal columns with their value list in braces, e.g.
//! `day{mon,tue}`; other columns are numeric. The class column must be
//! nominal.

use super::EvalError;
use crate::instance::{AttributeKind, Instance, Schema};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Arff,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self, EvalError> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("arff") => Ok(Format::Arff),
            Some("csv") => Ok(Format::Csv),
            _ => Err(EvalError::UnknownFormat(path.display().to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColumnKind {
    Nominal(Vec<String>),
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    fn index_of(&self, value: &str) -> Option<usize> {
        match &self.kind {
            ColumnKind::Nominal(values) => values.iter().position(|v| v == value),
            ColumnKind::Numeric => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetHeader {
    pub relation: String,
    pub attributes: Vec<Column>,
    pub class: Column,
    /// Known only when the caller counted rows beforehand.
    pub instances: Option<u64>,
}

impl DatasetHeader {
    fn new(relation: String, mut columns: Vec<Column>) -> Result<Self, EvalError> {
        let class = columns.pop().ok_or_else(|| EvalError::Header("no columns".into()))?;
        if columns.is_empty() {
            return Err(EvalError::Header("need at least one attribute besides the class".into()));
        }
        match &class.kind {
            ColumnKind::Nominal(values) if values.len() >= 2 => {}
            ColumnKind::Nominal(_) => {
                return Err(EvalError::Header(format!("class '{}' has fewer than 2 values", class.name)))
            }
            ColumnKind::Numeric => {
                return Err(EvalError::Header(format!("class '{}' must be nominal", class.name)))
            }
        }
        Ok(Self {
            relation,
            attributes: columns,
            class,
            instances: None,
        })
    }

    pub fn num_classes(&self) -> u32 {
        match &self.class.kind {
            ColumnKind::Nominal(v) => v.len() as u32,
            ColumnKind::Numeric => 0,
        }
    }

    pub fn schema(&self) -> Schema {
        let attributes = self
            .attributes
            .iter()
            .map(|c| match &c.kind {
                ColumnKind::Nominal(v) => AttributeKind::Categorical { values: v.len() as u32 },
                ColumnKind::Numeric => AttributeKind::Numeric,
            })
            .collect();
        Schema::new(attributes, self.num_classes())
    }

    /// Parses one data row. Missing values (`?`) read as 0 for attributes
    /// and as "unlabeled" for the class.
    fn parse_row(&self, fields: &[&str], line: u64) -> Result<Instance, EvalError> {
        let expected = self.attributes.len() + 1;
        if fields.len() != expected {
            return Err(EvalError::Arity {
                line,
                expected,
                found: fields.len(),
            });
        }
        let mut values = Vec::with_capacity(self.attributes.len());
        let mut label = None;
        for (i, raw) in fields.iter().enumerate() {
            let raw = unquote(raw.trim());
            let column = self.attributes.get(i).unwrap_or(&self.class);
            let is_class = i == self.attributes.len();
            if raw == "?" {
                if !is_class {
                    values.push(0.0);
                }
                continue;
            }
            let v = match &column.kind {
                ColumnKind::Numeric => raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    EvalError::Parse {
                        line,
                        message: format!("'{raw}' is not a number (column '{}')", column.name),
                    }
                })?,
                ColumnKind::Nominal(_) => column.index_of(raw).ok_or_else(|| EvalError::UnknownValue {
                    line,
                    column: column.name.clone(),
                    value: raw.to_string(),
                })? as f64,
            };
            if is_class {
                label = Some(v as u32);
            } else {
                values.push(v);
            }
        }
        Ok(Instance::dense(values, label))
    }
}

fn unquote(s: &str) -> &str {
    let b = s.as_bytes();
    if b.len() >= 2 && (b[0] == b'\'' || b[0] == b'"') && b[b.len() - 1] == b[0] {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

/// Splits on commas outside single or double quotes.
fn split_fields(line: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut quote: Option<u8> = None;
    for (i, b) in line.bytes().enumerate() {
        match (quote, b) {
            (None, b'\'' | b'"') => quote = Some(b),
            (Some(q), _) if b == q => quote = None,
            (None, b',') => {
                out.push(&line[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&line[start..]);
    out
}

/// Instances of a dataset, parsed one row at a time.
pub struct DatasetReader {
    header: DatasetHeader,
    rows: Rows,
}

enum Rows {
    Arff { lines: std::io::Lines<BufReader<Box<dyn Read + Send>>>, line: u64 },
    Csv { records: csv::StringRecordsIntoIter<Box<dyn Read + Send>> },
}

impl DatasetReader {
    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }
}

impl Iterator for DatasetReader {
    type Item = Result<Instance, EvalError>;

    fn next(&mut self) -> Option<Self::Item> {
        match &mut self.rows {
            Rows::Arff { lines, line } => loop {
                let text = match lines.next()? {
                    Ok(t) => t,
                    Err(e) => return Some(Err(EvalError::Read(e))),
                };
                *line += 1;
                let t = text.trim();
                if t.is_empty() || t.starts_with('%') {
                    continue;
                }
                if t.starts_with('{') {
                    return Some(Err(EvalError::Parse {
                        line: *line,
                        message: "sparse ARFF rows are not supported".into(),
                    }));
                }
                return Some(self.header.parse_row(&split_fields(t), *line));
            },
            Rows::Csv { records } => {
                let record = match records.next()? {
                    Ok(r) => r,
                    Err(e) => return Some(Err(EvalError::Csv(e))),
                };
                let line = record.position().map_or(0, |p| p.line());
                Some(self.header.parse_row(&record.iter().collect::<Vec<_>>(), line))
            }
        }
    }
}

/// Opens a dataset and parses its header; rows are read lazily.
pub fn load_dataset(path: &Path, format: Format) -> Result<DatasetReader, EvalError> {
    let file = File::open(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_reader(Box::new(file), format, path.to_path_buf())
}

pub fn from_reader(input: Box<dyn Read + Send>, format: Format, origin: PathBuf) -> Result<DatasetReader, EvalError> {
    match format {
        Format::Arff => read_arff(input),
        Format::Csv => read_csv_header(input, origin),
    }
}

fn read_arff(input: Box<dyn Read + Send>) -> Result<DatasetReader, EvalError> {
    let mut lines = BufReader::new(input).lines();
    let mut line = 0u64;
    let mut relation = String::new();
    let mut columns = Vec::new();
    loop {
        let Some(text) = lines.next() else {
            return Err(EvalError::Header("missing @data section".into()));
        };
        let text = text.map_err(EvalError::Read)?;
        line += 1;
        let t = text.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let lower = t.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            relation = unquote(t["@relation".len()..].trim()).to_string();
        } else if lower.starts_with("@attribute") {
            columns.push(parse_arff_attribute(t["@attribute".len()..].trim(), line)?);
        } else if lower.starts_with("@data") {
            break;
        } else {
            return Err(EvalError::Parse {
                line,
                message: format!("unexpected header line '{t}'"),
            });
        }
    }
    Ok(DatasetReader {
        header: DatasetHeader::new(relation, columns)?,
        rows: Rows::Arff { lines, line },
    })
}

fn parse_arff_attribute(rest: &str, line: u64) -> Result<Column, EvalError> {
    let (name, kind) = match rest.chars().next() {
        Some(q @ ('\'' | '"')) => {
            let end = rest[1..].find(q).ok_or_else(|| EvalError::Parse {
                line,
                message: "unterminated attribute name".into(),
            })?;
            (&rest[1..=end], rest[end + 2..].trim())
        }
        _ => {
            let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            (&rest[..end], rest[end..].trim())
        }
    };
    let kind = if let Some(list) = kind.strip_prefix('{') {
        let list = list.strip_suffix('}').ok_or_else(|| EvalError::Parse {
            line,
            message: format!("unterminated value list for '{name}'"),
        })?;
        ColumnKind::Nominal(split_fields(list).into_iter().map(|v| unquote(v.trim()).to_string()).collect())
    } else {
        match kind.to_ascii_lowercase().as_str() {
            "numeric" | "real" | "integer" => ColumnKind::Numeric,
            other => {
                return Err(EvalError::Parse {
                    line,
                    message: format!("unsupported attribute type '{other}' for '{name}'"),
                })
            }
        }
    };
    Ok(Column {
        name: name.to_string(),
        kind,
    })
}

fn parse_csv_column(raw: &str) -> Column {
    let raw = raw.trim();
    if let (Some(open), true) = (raw.find('{'), raw.ends_with('}')) {
        let values = raw[open + 1..raw.len() - 1].split(',').map(|v| v.trim().to_string()).collect();
        Column {
            name: raw[..open].trim().to_string(),
            kind: ColumnKind::Nominal(values),
        }
    } else {
        Column {
            name: raw.to_string(),
            kind: ColumnKind::Numeric,
        }
    }
}

fn read_csv_header(input: Box<dyn Read + Send>, origin: PathBuf) -> Result<DatasetReader, EvalError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let columns: Vec<Column> = reader.headers().map_err(EvalError::Csv)?.iter().map(parse_csv_column).collect();
    let relation = origin.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(DatasetReader {
        header: DatasetHeader::new(relation, columns)?,
        rows: Rows::Csv {
            records: reader.into_records(),
        },
    })
}

/// Writes instances as CSV in the header convention [`load_dataset`]
/// reads. Sparse instances are written densely.
pub fn write_csv<W: std::io::Write>(
    out: W,
    schema: &Schema,
    instances: impl IntoIterator<Item = Instance>,
) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = schema
        .attributes
        .iter()
        .enumerate()
        .map(|(i, k)| match k {
            AttributeKind::Categorical { values } => {
                format!("a{i}{{{}}}", (0..*values).map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            }
            AttributeKind::Numeric => format!("a{i}"),
        })
        .collect();
    header.push(format!(
        "class{{{}}}",
        (0..schema.num_classes).map(|c| c.to_string()).collect::<Vec<_>>().join(",")
    ));
    w.write_record(&header).map_err(EvalError::Csv)?;
    let m = schema.num_attributes();
    let mut row = Vec::with_capacity(m + 1);
    for inst in instances {
        row.clear();
        for a in 0..m {
            let v = inst.value(a as u32);
            row.push(match schema.attributes[a] {
                AttributeKind::Categorical { .. } => format!("{}", v as u32),
                AttributeKind::Numeric => format!("{v}"),
            });
        }
        row.push(inst.label.map_or_else(|| "?".to_string(), |c| c.to_string()));
        w.write_record(&row).map_err(EvalError::Csv)?;
    }
    w.flush().map_err(EvalError::Read)?;
    Ok(())
}
