//! CSV ingestion: header row, one label column, numeric or categorical
//! features.

use std::collections::{BTreeMap, BTreeSet};

use mcboost::{Example, Label, LabelSpace};

use crate::config::{DatasetSpec, Encoding, MissingRule};
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub space: LabelSpace,
    /// Class names in label order (label 1 first).
    pub classes: Vec<String>,
    /// Names of the encoded feature coordinates.
    pub feature_names: Vec<String>,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }
}

fn is_missing(v: &str) -> bool {
    v.is_empty() || v == "?" || v.eq_ignore_ascii_case("na")
}

/// How one source column becomes encoded coordinates.
enum Column {
    Numeric,
    OneHot(Vec<String>),
    Ordinal(Vec<String>),
}

impl Column {
    fn width(&self) -> usize {
        match self {
            Column::OneHot(levels) => levels.len(),
            _ => 1,
        }
    }
}

fn data_line(line: u64, message: impl Into<String>) -> HarnessError {
    HarnessError::DataLine { line, message: message.into() }
}

pub fn load_csv(spec: &DatasetSpec) -> Result<Dataset> {
    let text = std::fs::read_to_string(&spec.path).map_err(|e| HarnessError::io(&spec.path, e))?;
    parse_csv(spec, &text)
}

pub fn parse_csv(spec: &DatasetSpec, text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| HarnessError::Data(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(HarnessError::Data(format!("{}: empty file", spec.path.display())));
    }
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| HarnessError::Data(format!("no column named `{name}`")))
    };
    let label_col = find(&spec.label)?;
    let feature_cols: Vec<usize> = if spec.features.is_empty() {
        (0..headers.len()).filter(|&c| c != label_col).collect()
    } else {
        spec.features.iter().map(|f| find(f)).collect::<Result<_>>()?
    };
    if let Some(col) = spec.encodings.keys().find(|c| !headers.contains(c)) {
        return Err(HarnessError::Data(format!("encoding given for unknown column `{col}`")));
    }

    let mut rows: Vec<(u64, Vec<String>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            data_line(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(HarnessError::Data(format!("{}: no data rows", spec.path.display())));
    }

    let classes: Vec<String> = if spec.classes.is_empty() {
        let seen: BTreeSet<&str> = rows.iter().map(|(_, r)| r[label_col].as_str()).collect();
        seen.into_iter().map(str::to_string).collect()
    } else {
        spec.classes.clone()
    };
    let space = LabelSpace::new(classes.len())
        .map_err(|_| HarnessError::Data(format!("need at least two classes, found {}", classes.len())))?;
    let class_index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

    let columns: Vec<Column> = feature_cols
        .iter()
        .map(|&c| {
            let name = &headers[c];
            match spec.encodings.get(name) {
                Some(Encoding::Numeric) => Column::Numeric,
                Some(Encoding::Ordinal(levels)) => Column::Ordinal(levels.clone()),
                Some(Encoding::OneHot) => Column::OneHot(distinct(&rows, c)),
                None => {
                    let numeric = rows.iter().all(|(_, r)| is_missing(&r[c]) || r[c].parse::<f64>().is_ok());
                    if numeric {
                        Column::Numeric
                    } else {
                        Column::OneHot(distinct(&rows, c))
                    }
                }
            }
        })
        .collect();

    let mut feature_names = Vec::new();
    for (&c, col) in feature_cols.iter().zip(&columns) {
        match col {
            Column::OneHot(levels) => feature_names.extend(levels.iter().map(|l| format!("{}={l}", headers[c]))),
            _ => feature_names.push(headers[c].clone()),
        }
    }

    let mut examples = Vec::with_capacity(rows.len());
    for (line, row) in &rows {
        let line = *line;
        if row.len() != headers.len() {
            return Err(data_line(line, format!("expected {} fields, found {}", headers.len(), row.len())));
        }
        let raw_label = row[label_col].as_str();
        let label = *class_index
            .get(raw_label)
            .ok_or_else(|| data_line(line, format!("label `{raw_label}` is not a declared class")))?;
        let mut x = Vec::with_capacity(feature_names.len());
        for (&c, col) in feature_cols.iter().zip(&columns) {
            let v = row[c].as_str();
            if is_missing(v) {
                match spec.missing {
                    MissingRule::Reject => {
                        return Err(data_line(line, format!("missing value in column `{}`", headers[c])));
                    }
                    MissingRule::Zero => {
                        x.extend(std::iter::repeat_n(0.0, col.width()));
                        continue;
                    }
                }
            }
            match col {
                Column::Numeric => {
                    let f: f64 = v
                        .parse()
                        .map_err(|_| data_line(line, format!("`{v}` in column `{}` is not a number", headers[c])))?;
                    if !f.is_finite() {
                        return Err(data_line(line, format!("non-finite value in column `{}`", headers[c])));
                    }
                    x.push(f);
                }
                Column::Ordinal(levels) => {
                    let pos = levels.iter().position(|l| l == v).ok_or_else(|| {
                        data_line(line, format!("`{v}` is not a level of ordinal column `{}`", headers[c]))
                    })?;
                    x.push(pos as f64);
                }
                Column::OneHot(levels) => x.extend(levels.iter().map(|l| if l == v { 1.0 } else { 0.0 })),
            }
        }
        examples.push(Example::unweighted(x, Label::from_index(label)));
    }

    Ok(Dataset { name: spec.name.clone(), space, classes, feature_names, examples })
}

fn distinct(rows: &[(u64, Vec<String>)], col: usize) -> Vec<String> {
    let seen: BTreeSet<&str> = rows.iter().map(|(_, r)| r[col].as_str()).filter(|v| !is_missing(v)).collect();
    seen.into_iter().map(str::to_string).collect()
}
