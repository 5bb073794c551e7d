//! Row-aligned dataset triples and CSV ingestion.

use std::path::Path;

use ndarray::prelude::*;

use crate::error::{Error, Result};

/// Row-aligned sample {(x_i, y_i, z_i)}. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub z: Array2<f64>,
    /// Labels of the selected columns in x, y, z order, when known.
    pub column_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array2<f64>, z: Array2<f64>) -> Result<Self> {
        let n = x.nrows();
        if y.nrows() != n || z.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "row counts differ: x {} y {} z {}",
                n,
                y.nrows(),
                z.nrows()
            )));
        }
        if n < 2 {
            return Err(Error::TooFewSamples { n, min: 2 });
        }
        for (name, m) in [("x", &x), ("y", &y), ("z", &z)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("matrix {name}")));
            }
        }
        Ok(Self {
            x,
            y,
            z,
            column_names: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }
}

/// One entry of a column selector: a header name or a 0-based file column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

/// Comma-separated selector; numeric tokens are 0-based indices, `a-b` is an
/// inclusive index range, anything else is a header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSelector(pub Vec<ColumnRef>);

impl ColumnSelector {
    pub fn parse(s: &str) -> Result<Self> {
        let mut refs = Vec::new();
        for token in s.split(',') {
            let token = token.trim();
            if token.is_empty() {
                return Err(Error::Selector(format!("empty token in selector {s:?}")));
            }
            if let Ok(idx) = token.parse::<usize>() {
                refs.push(ColumnRef::Index(idx));
            } else if let Some((a, b)) = token.split_once('-') {
                match (a.trim().parse::<usize>(), b.trim().parse::<usize>()) {
                    (Ok(lo), Ok(hi)) if lo <= hi => {
                        refs.extend((lo..=hi).map(ColumnRef::Index));
                    }
                    (Ok(lo), Ok(hi)) => {
                        return Err(Error::Selector(format!("range {lo}-{hi} is reversed")));
                    }
                    _ => refs.push(ColumnRef::Name(token.to_string())),
                }
            } else {
                refs.push(ColumnRef::Name(token.to_string()));
            }
        }
        if refs.is_empty() {
            return Err(Error::Selector("empty selector".into()));
        }
        Ok(Self(refs))
    }

    fn resolve(&self, header: Option<&[String]>, width: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(self.0.len());
        for r in &self.0 {
            match r {
                ColumnRef::Index(i) => {
                    if *i >= width {
                        return Err(Error::Selector(format!(
                            "column index {i} out of range (file has {width} columns)"
                        )));
                    }
                    out.push(*i);
                }
                ColumnRef::Name(name) => {
                    let header = header.ok_or_else(|| {
                        Error::Selector(format!(
                            "selector names column {name:?} but the file has no header row"
                        ))
                    })?;
                    match header.iter().position(|h| h == name) {
                        Some(i) => out.push(i),
                        None => {
                            return Err(Error::Selector(format!("no column named {name:?}")));
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Loads a comma-separated file into a [`Dataset`]. A header row is assumed
/// when any cell of the first row fails to parse as a number. Selector
/// overlap across x, y, z is rejected.
pub fn load_csv(
    path: impl AsRef<Path>,
    x_cols: &ColumnSelector,
    y_cols: &ColumnSelector,
    z_cols: &ColumnSelector,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path.as_ref())?;
    let mut records = Vec::new();
    for rec in reader.records() {
        records.push(rec?);
    }
    if records.is_empty() {
        return Err(Error::DegenerateData("empty csv file".into()));
    }
    let width = records[0].len();
    let has_header = records[0].iter().any(|cell| cell.trim().parse::<f64>().is_err());
    let header: Option<Vec<String>> = if has_header {
        Some(records[0].iter().map(str::to_string).collect())
    } else {
        None
    };
    let data_rows = &records[usize::from(has_header)..];
    if data_rows.is_empty() {
        return Err(Error::DegenerateData("csv file has a header but no data".into()));
    }

    let xi = x_cols.resolve(header.as_deref(), width)?;
    let yi = y_cols.resolve(header.as_deref(), width)?;
    let zi = z_cols.resolve(header.as_deref(), width)?;
    let mut seen = std::collections::BTreeSet::new();
    for i in xi.iter().chain(&yi).chain(&zi) {
        if !seen.insert(*i) {
            return Err(Error::Selector(format!(
                "column {} selected more than once across x/y/z",
                describe_col(header.as_deref(), *i)
            )));
        }
    }

    let parse_block = |cols: &[usize]| -> Result<Array2<f64>> {
        let mut m = Array2::zeros((data_rows.len(), cols.len()));
        for (r, rec) in data_rows.iter().enumerate() {
            // File rows are 1-based and include the header line.
            let file_row = r + 1 + usize::from(has_header);
            if rec.len() != width {
                return Err(Error::Selector(format!(
                    "row {file_row} has {} fields, expected {width}",
                    rec.len()
                )));
            }
            for (c, col) in cols.iter().enumerate() {
                let cell = rec.get(*col).unwrap_or("").trim();
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    value: cell.to_string(),
                    row: file_row,
                    column: describe_col(header.as_deref(), *col),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "row {file_row}, column {}",
                        describe_col(header.as_deref(), *col)
                    )));
                }
                m[[r, c]] = v;
            }
        }
        Ok(m)
    };

    let x = parse_block(&xi)?;
    let y = parse_block(&yi)?;
    let z = parse_block(&zi)?;
    let names = header.map(|h| {
        xi.iter()
            .chain(&yi)
            .chain(&zi)
            .map(|i| h[*i].clone())
            .collect()
    });
    let mut ds = Dataset::new(x, y, z)?;
    ds.column_names = names;
    Ok(ds)
}

fn describe_col(header: Option<&[String]>, idx: usize) -> String {
    match header {
        Some(h) => h[idx].clone(),
        None => idx.to_string(),
    }
}

/// Writes a dataset with canonical headers x1..xp, y1..yq, z1..zd. Numbers are
/// printed in shortest round-trip form, so load_csv(save_csv(ds)) reproduces
/// the matrices bitwise.
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header = Vec::new();
    for (tag, m) in [("x", &ds.x), ("y", &ds.y), ("z", &ds.z)] {
        for j in 1..=m.ncols() {
            header.push(format!("{tag}{j}"));
        }
    }
    w.write_record(&header)?;
    for r in 0..ds.n() {
        let mut rec = Vec::with_capacity(header.len());
        for m in [&ds.x, &ds.y, &ds.z] {
            for j in 0..m.ncols() {
                rec.push(format!("{}", m[[r, j]]));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Rescales every column to sample mean 0 and sample standard deviation 1
/// (n−1 denominator).
pub fn standardize(m: &Array2<f64>) -> Result<Array2<f64>> {
    let n = m.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples { n, min: 2 });
    }
    let mut out = m.clone();
    for j in 0..m.ncols() {
        let col = m.column(j);
        let mean = col.sum() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        if sd <= 0.0 {
            return Err(Error::DegenerateColumn(j.to_string()));
        }
        out.column_mut(j).mapv_inplace(|v| (v - mean) / sd);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn selector_parse_mixes_names_ranges_indices() {
        let s = ColumnSelector::parse("a, 3, 5-7 ,b").unwrap();
        assert_eq!(
            s.0,
            vec![
                ColumnRef::Name("a".into()),
                ColumnRef::Index(3),
                ColumnRef::Index(5),
                ColumnRef::Index(6),
                ColumnRef::Index(7),
                ColumnRef::Name("b".into()),
            ]
        );
    }

    #[test]
    fn standardize_hand_case() {
        // Column (0, 2): mean 1, sd sqrt(2) with the n−1 denominator.
        let m = array![[0.0], [2.0]];
        let s = standardize(&m).unwrap();
        assert_abs_diff_eq!(s[[0, 0]], -0.7071068, epsilon = 1e-6);
        assert_abs_diff_eq!(s[[1, 0]], 0.7071068, epsilon = 1e-6);
    }

    #[test]
    fn standardize_is_idempotent() {
        let m = array![[1.0, 5.0], [2.0, -1.0], [4.0, 0.5], [0.0, 2.0]];
        let once = standardize(&m).unwrap();
        let twice = standardize(&once).unwrap();
        for (a, b) in once.iter().zip(twice.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let m = array![[1.0, 3.0], [1.0, 4.0]];
        match standardize(&m) {
            Err(Error::DegenerateColumn(c)) => assert_eq!(c, "0"),
            other => panic!("expected degenerate column, got {other:?}"),
        }
    }

    #[test]
    fn dataset_rejects_mismatched_rows() {
        let err = Dataset::new(
            Array2::zeros((3, 1)),
            Array2::zeros((2, 1)),
            Array2::zeros((3, 1)),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn dataset_rejects_nan() {
        let mut x = Array2::zeros((2, 1));
        x[[0, 0]] = f64::NAN;
        let err = Dataset::new(x, Array2::zeros((2, 1)), Array2::zeros((2, 1)));
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }
}
