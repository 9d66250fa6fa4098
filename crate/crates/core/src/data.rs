//! Tabular datasets and CSV ingestion.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::Serialize;

use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Categorical { levels: Vec<String>, codes: Vec<Option<usize>> },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Numeric(v) => v[row].is_none(),
            Column::Categorical { codes, .. } => codes[row].is_none(),
        }
    }

    pub fn kind(&self) -> ColumnType {
        match self {
            Column::Numeric(_) => ColumnType::Numeric,
            Column::Categorical { .. } => ColumnType::Categorical,
        }
    }

    /// Builds a categorical column with sorted distinct levels.
    pub fn categorical<S: AsRef<str>>(values: &[Option<S>]) -> Column {
        let levels: Vec<String> = values
            .iter()
            .flatten()
            .map(|s| s.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Self::categorical_with_levels(values, levels).expect("levels cover all values")
    }

    /// Builds a categorical column with an explicit level order.
    pub fn categorical_with_levels<S: AsRef<str>>(
        values: &[Option<S>],
        levels: Vec<String>,
    ) -> Result<Column> {
        let index: HashMap<&str, usize> =
            levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let codes = values
            .iter()
            .map(|v| match v {
                None => Ok(None),
                Some(s) => index
                    .get(s.as_ref())
                    .copied()
                    .map(Some)
                    .ok_or_else(|| Error::Data(format!("value '{}' is not a declared level", s.as_ref()))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Column::Categorical { levels, codes })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Numeric,
    Categorical,
}

/// Per-column type override for [`read_csv`].
#[derive(Debug, Clone, PartialEq)]
pub enum TypeHint {
    Numeric,
    Categorical,
    /// Categorical with the given level order (first level is the reference).
    Levels(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Column>,
    nrows: usize,
}

impl Dataset {
    pub fn new(columns: Vec<(String, Column)>) -> Result<Dataset> {
        ensure!(!columns.is_empty(), Data, "dataset has no columns");
        let nrows = columns[0].1.len();
        let mut seen = BTreeSet::new();
        for (name, col) in &columns {
            ensure!(seen.insert(name.clone()), Data, "duplicate column name '{name}'");
            ensure!(col.len() == nrows, Data, "column '{name}' has {} rows, expected {nrows}", col.len());
        }
        let (names, columns) = columns.into_iter().unzip();
        Ok(Dataset { names, columns, nrows })
    }

    /// Convenience constructor for all-numeric data without missing cells.
    pub fn from_numeric(columns: Vec<(&str, Vec<f64>)>) -> Result<Dataset> {
        Dataset::new(
            columns
                .into_iter()
                .map(|(n, v)| (n.to_string(), Column::Numeric(v.into_iter().map(Some).collect())))
                .collect(),
        )
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.position(name).map(|i| &self.columns[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.names.iter().map(String::as_str).zip(self.columns.iter())
    }

    /// Numeric values of a column, failing on missing cells or categorical data.
    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        match self.column(name) {
            Some(Column::Numeric(v)) => v
                .iter()
                .enumerate()
                .map(|(i, x)| x.ok_or_else(|| Error::Data(format!("missing value in '{name}' at row {}", i + 1))))
                .collect(),
            Some(_) => Err(Error::Data(format!("column '{name}' is not numeric"))),
            None => Err(Error::Data(format!("no column named '{name}'"))),
        }
    }

    /// Keeps only the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| match c {
                Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
                Column::Categorical { levels, codes } => Column::Categorical {
                    levels: levels.clone(),
                    codes: rows.iter().map(|&r| codes[r]).collect(),
                },
            })
            .collect();
        Dataset { names: self.names.clone(), columns, nrows: rows.len() }
    }
}

fn is_missing_token(s: &str) -> bool {
    matches!(s, "" | "NA" | "NaN" | "nan" | "null" | "NULL" | ".")
}

/// Reads a UTF-8 CSV file with a header row.
pub fn read_csv(path: impl AsRef<Path>, hints: &HashMap<String, TypeHint>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open '{}': {e}", path.display())))?;
    read_csv_from(file, hints)
}

pub fn read_csv_from<R: std::io::Read>(reader: R, hints: &HashMap<String, TypeHint>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    ensure!(!header.is_empty() && !(header.len() == 1 && header[0].is_empty()), Data, "empty file");
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Data(format!(
                "ragged row {}: expected {expected_len} fields, found {len}",
                line + 2
            )),
            _ => Error::Csv(e),
        })?;
        for (j, field) in rec.iter().enumerate() {
            cells[j].push(field.trim().to_string());
        }
    }
    ensure!(!cells[0].is_empty(), Data, "file has a header but no data rows");

    let mut columns = Vec::with_capacity(header.len());
    for (name, raw) in header.iter().zip(cells) {
        let col = match hints.get(name) {
            Some(TypeHint::Numeric) => Column::Numeric(
                raw.iter()
                    .enumerate()
                    .map(|(i, s)| {
                        if is_missing_token(s) {
                            Ok(None)
                        } else {
                            s.parse::<f64>().map(Some).map_err(|_| {
                                Error::Data(format!("column '{name}' row {}: '{s}' is not numeric", i + 2))
                            })
                        }
                    })
                    .collect::<Result<_>>()?,
            ),
            Some(TypeHint::Categorical) => Column::categorical(&as_options(&raw)),
            Some(TypeHint::Levels(levels)) => {
                Column::categorical_with_levels(&as_options(&raw), levels.clone())?
            }
            None => {
                let parsed: Option<Vec<Option<f64>>> = raw
                    .iter()
                    .map(|s| if is_missing_token(s) { Some(None) } else { s.parse::<f64>().ok().map(Some) })
                    .collect();
                match parsed {
                    Some(v) if v.iter().any(Option::is_some) => Column::Numeric(v),
                    _ => Column::categorical(&as_options(&raw)),
                }
            }
        };
        columns.push((name.clone(), col));
    }
    Dataset::new(columns)
}

/// Writes the dataset as CSV with a header row; missing cells are empty.
pub fn write_csv_to<W: std::io::Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&data.names)?;
    for i in 0..data.nrows {
        let row: Vec<String> = data
            .columns
            .iter()
            .map(|c| match c {
                Column::Numeric(v) => v[i].map(|x| x.to_string()).unwrap_or_default(),
                Column::Categorical { levels, codes } => codes[i].map(|k| levels[k].clone()).unwrap_or_default(),
            })
            .collect();
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Data(format!("cannot write CSV: {e}")))?;
    Ok(())
}

fn as_options(raw: &[String]) -> Vec<Option<&str>> {
    raw.iter().map(|s| if is_missing_token(s) { None } else { Some(s.as_str()) }).collect()
}
