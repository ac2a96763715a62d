//! Dyadic trade-flow ingestion.
//!
//! Input is a comma-separated table with the columns `year`, `importer`,
//! `exporter` and `value` (any order). Only import-reported flows are read
//! and nothing is symmetrised: a row `y,A,B,v` is the value `v` of goods
//! imported into `A` from `B` during year `y`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Read;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const REQUIRED_COLUMNS: [&str; 4] = ["year", "importer", "exporter", "value"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("{} row error(s); first: {}", .0.len(), .0.first().map(ToString::to_string).unwrap_or_default())]
    Rows(Vec<RowError>),
    #[error("no records for year {0}")]
    EmptyYear(i32),
    #[error("invalid year range {from}:{to}")]
    YearRange { from: i32, to: i32 },
    #[error("invalid import matrix: {0}")]
    InvalidMatrix(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// A row that could not be turned into a record, with its 1-based line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub year: i32,
    pub importer: String,
    pub exporter: String,
    pub value: f64,
}

impl TradeRecord {
    pub fn new(year: i32, importer: impl Into<String>, exporter: impl Into<String>, value: f64) -> Self {
        Self { year, importer: importer.into(), exporter: exporter.into(), value }
    }
}

/// Summary of what the loader kept, merged or discarded.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestDiagnostics {
    pub rows_read: u64,
    /// Negative sentinels, blanks and non-numeric values.
    pub rows_dropped_missing: u64,
    /// Rows whose importer equals the exporter.
    pub rows_dropped_self: u64,
    pub rows_summed_duplicates: u64,
    pub years_empty: Vec<i32>,
}

/// Parses a dyadic trade table.
///
/// Records come back sorted by `(year, importer, exporter)` with duplicate
/// dyad-years summed. Every unparseable year (or blank country code) is
/// collected before the call fails, so one pass reports all bad lines.
pub fn parse_dyadic_csv<R: Read>(input: R) -> Result<(Vec<TradeRecord>, IngestDiagnostics), IngestError> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(input);

    let headers = reader.headers()?.clone();
    let mut columns = [usize::MAX; 4];
    for (slot, name) in columns.iter_mut().zip(REQUIRED_COLUMNS) {
        let hits: Vec<usize> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
            .map(|(i, _)| i)
            .collect();
        match hits.as_slice() {
            [one] => *slot = *one,
            [] => return Err(IngestError::MalformedHeader(format!("missing column `{name}`"))),
            _ => return Err(IngestError::MalformedHeader(format!("duplicate column `{name}`"))),
        }
    }
    let [year_col, importer_col, exporter_col, value_col] = columns;

    let mut diag = IngestDiagnostics::default();
    let mut row_errors = Vec::new();
    let mut merged: BTreeMap<(i32, String, String), f64> = BTreeMap::new();

    for result in reader.records() {
        let record = result?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        diag.rows_read += 1;

        let field = |col: usize| record.get(col).unwrap_or("");
        let year = match field(year_col).parse::<i32>() {
            Ok(y) => y,
            Err(_) => {
                row_errors
                    .push(RowError { line, message: format!("unparseable year `{}`", field(year_col)) });
                continue;
            }
        };
        let importer = field(importer_col);
        let exporter = field(exporter_col);
        if importer.is_empty() || exporter.is_empty() {
            row_errors.push(RowError { line, message: "blank country code".to_string() });
            continue;
        }
        let value = match field(value_col).parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => v,
            _ => {
                diag.rows_dropped_missing += 1;
                continue;
            }
        };
        if importer == exporter {
            diag.rows_dropped_self += 1;
            continue;
        }
        match merged.entry((year, importer.to_string(), exporter.to_string())) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(value);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += value;
                diag.rows_summed_duplicates += 1;
            }
        }
    }

    if !row_errors.is_empty() {
        return Err(IngestError::Rows(row_errors));
    }

    let records = merged
        .into_iter()
        .map(|((year, importer, exporter), value)| TradeRecord { year, importer, exporter, value })
        .collect();
    Ok((records, diag))
}

/// Labelled square matrix of import values for one year.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportMatrix {
    year: i32,
    labels: Vec<String>,
    values: DMatrix<f64>,
}

impl ImportMatrix {
    /// Validating constructor: square, nonnegative, finite, zero diagonal,
    /// unique labels, at least one node.
    pub fn new(year: i32, labels: Vec<String>, values: DMatrix<f64>) -> Result<Self, IngestError> {
        let n = labels.len();
        if n == 0 {
            return Err(IngestError::InvalidMatrix("no nodes".into()));
        }
        if values.nrows() != n || values.ncols() != n {
            return Err(IngestError::InvalidMatrix(format!(
                "{}x{} values for {n} labels",
                values.nrows(),
                values.ncols()
            )));
        }
        let unique: HashSet<&String> = labels.iter().collect();
        if unique.len() != n {
            return Err(IngestError::InvalidMatrix("duplicate labels".into()));
        }
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(IngestError::InvalidMatrix(format!("nonzero diagonal at {i}")));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(IngestError::InvalidMatrix(format!("entry {v} is not a nonnegative number")));
        }
        Ok(Self { year, labels, values })
    }

    /// Builds a matrix from row slices with labels `"1"`, `"2"`, ... and year 0.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, IngestError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(IngestError::InvalidMatrix("ragged rows".into()));
        }
        let values = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let labels = (1..=n).map(|i| i.to_string()).collect();
        Self::new(0, labels, values)
    }

    /// Same nodes and year, new values. Callers keep the invariants.
    pub(crate) fn with_values(&self, values: DMatrix<f64>) -> Self {
        debug_assert_eq!(values.nrows(), self.n());
        Self { year: self.year, labels: self.labels.clone(), values }
    }

    pub(crate) fn from_parts_unchecked(year: i32, labels: Vec<String>, values: DMatrix<f64>) -> Self {
        Self { year, labels, values }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Sum of every entry.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `c * M` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c > 0.0 && c.is_finite(), "scale must be positive");
        self.with_values(&self.values * c)
    }

    /// Reorders nodes so that new node `k` is old node `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let n = self.n();
        assert_eq!(order.len(), n);
        let values = DMatrix::from_fn(n, n, |i, j| self.values[(order[i], order[j])]);
        let labels = order.iter().map(|&k| self.labels[k].clone()).collect();
        Self { year: self.year, labels, values }
    }
}

/// Assembles the import matrix for one year. Labels are the sorted distinct
/// country codes seen in that year.
pub fn build_import_matrix(records: &[TradeRecord], year: i32) -> Result<ImportMatrix, IngestError> {
    assemble(year, records.iter().filter(|r| r.year == year))
}

fn assemble<'a>(
    year: i32,
    records: impl Iterator<Item = &'a TradeRecord>,
) -> Result<ImportMatrix, IngestError> {
    let mut cells: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    let mut countries: BTreeSet<&str> = BTreeSet::new();
    for r in records {
        countries.insert(&r.importer);
        countries.insert(&r.exporter);
        if r.importer != r.exporter {
            cells.entry((&r.importer, &r.exporter)).or_default().push(r.value);
        }
    }
    if countries.is_empty() {
        return Err(IngestError::EmptyYear(year));
    }
    let labels: Vec<String> = countries.iter().map(|c| c.to_string()).collect();
    let index: BTreeMap<&str, usize> = countries.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let n = labels.len();
    let mut values = DMatrix::zeros(n, n);
    for ((importer, exporter), mut parts) in cells {
        // summation order must not depend on record order
        parts.sort_by(f64::total_cmp);
        values[(index[importer], index[exporter])] = parts.iter().sum::<f64>();
    }
    ImportMatrix::new(year, labels, values)
}

/// Per-year matrices over an inclusive year range.
#[derive(Debug, Clone)]
pub struct MatrixSeries {
    pub matrices: Vec<ImportMatrix>,
    pub years_empty: Vec<i32>,
}

/// Builds one matrix per year in `year_from..=year_to` that has records.
/// Years without records are skipped and reported in `years_empty`.
pub fn matrix_series(
    records: &[TradeRecord],
    year_from: i32,
    year_to: i32,
) -> Result<MatrixSeries, IngestError> {
    if year_from > year_to {
        return Err(IngestError::YearRange { from: year_from, to: year_to });
    }
    let mut by_year: BTreeMap<i32, Vec<&TradeRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| (year_from..=year_to).contains(&r.year)) {
        by_year.entry(r.year).or_default().push(r);
    }
    let years_empty = (year_from..=year_to).filter(|y| !by_year.contains_key(y)).collect();
    let matrices = by_year
        .into_par_iter()
        .map(|(year, rows)| assemble(year, rows.into_iter()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MatrixSeries { matrices, years_empty })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> (Vec<TradeRecord>, IngestDiagnostics) {
        parse_dyadic_csv(text.as_bytes()).unwrap()
    }

    fn m3_records(year: i32) -> Vec<TradeRecord> {
        [("1", "2", 2.0), ("1", "3", 1.0), ("2", "1", 1.0), ("2", "3", 1.0), ("3", "1", 1.0), ("3", "2", 2.0)]
            .into_iter()
            .map(|(i, e, v)| TradeRecord::new(year, i, e, v))
            .collect()
    }

    #[test]
    fn single_row_maps_fields() {
        let (recs, diag) = parse("year,importer,exporter,value\n1965,USA,CAN,4800.0\n");
        assert_eq!(recs, vec![TradeRecord::new(1965, "USA", "CAN", 4800.0)]);
        assert_eq!(diag.rows_read, 1);
    }

    #[test]
    fn header_order_is_free_and_crlf_is_accepted() {
        let (recs, _) = parse("value,exporter,year,importer\r\n4800.0,CAN,1965,USA\r\n");
        assert_eq!(recs, vec![TradeRecord::new(1965, "USA", "CAN", 4800.0)]);
    }

    #[test]
    fn negative_sentinels_and_garbage_are_dropped() {
        let text = "year,importer,exporter,value\n\
                    2000,A,B,-9\n\
                    2000,A,C,n/a\n\
                    2000,B,A,\n\
                    2000,C,A,3\n";
        let (recs, diag) = parse(text);
        assert_eq!(recs.len(), 1);
        assert_eq!(diag.rows_read, 4);
        assert_eq!(diag.rows_dropped_missing, 3);
    }

    #[test]
    fn duplicates_are_summed() {
        let (recs, diag) = parse("year,importer,exporter,value\n2006,A,B,1\n2006,A,B,2\n");
        assert_eq!(recs, vec![TradeRecord::new(2006, "A", "B", 3.0)]);
        assert_eq!(diag.rows_summed_duplicates, 1);
    }

    #[test]
    fn self_flows_are_dropped() {
        let (recs, diag) = parse("year,importer,exporter,value\n2006,A,A,1\n2006,A,B,2\n");
        assert_eq!(recs.len(), 1);
        assert_eq!(diag.rows_dropped_self, 1);
    }

    #[test]
    fn missing_column_is_a_header_error() {
        let err = parse_dyadic_csv("year,importer,value\n2006,A,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::MalformedHeader(_)));
        let err = parse_dyadic_csv("".as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::MalformedHeader(_)));
    }

    #[test]
    fn all_bad_years_are_reported_with_lines() {
        let text = "year,importer,exporter,value\nabc,A,B,1\n2000,A,B,1\n19x0,B,A,1\n";
        match parse_dyadic_csv(text.as_bytes()).unwrap_err() {
            IngestError::Rows(errs) => {
                assert_eq!(errs.iter().map(|e| e.line).collect::<Vec<_>>(), vec![2, 4]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_node_construction() {
        let recs = vec![TradeRecord::new(2006, "A", "B", 5.0), TradeRecord::new(2006, "B", "A", 5.0)];
        let m = build_import_matrix(&recs, 2006).unwrap();
        assert_eq!(m.labels(), ["A", "B"]);
        assert_eq!(m.values(), &DMatrix::from_row_slice(2, 2, &[0.0, 5.0, 5.0, 0.0]));

        let m = build_import_matrix(&recs[..1], 2006).unwrap();
        assert_eq!(m.values(), &DMatrix::from_row_slice(2, 2, &[0.0, 5.0, 0.0, 0.0]));
    }

    #[test]
    fn canonical_three_node_fixture() {
        let m = build_import_matrix(&m3_records(1990), 1990).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0., 2., 1., 1., 0., 1., 1., 2., 0.]);
        assert_eq!(m.values(), &expected);
        assert_eq!(m.labels(), ["1", "2", "3"]);
    }

    #[test]
    fn empty_year_is_an_error() {
        assert!(matches!(build_import_matrix(&m3_records(1990), 1991), Err(IngestError::EmptyYear(1991))));
    }

    #[test]
    fn series_skips_empty_years() {
        let mut recs = m3_records(1870);
        recs.extend(m3_records(1872));
        let s = matrix_series(&recs, 1870, 1872).unwrap();
        assert_eq!(s.matrices.iter().map(ImportMatrix::year).collect::<Vec<_>>(), vec![1870, 1872]);
        assert_eq!(s.years_empty, vec![1871]);

        let s = matrix_series(&recs, 1870, 1870).unwrap();
        assert_eq!(s.matrices.len(), 1);
    }

    #[test]
    fn labels_are_per_year() {
        let mut recs = m3_records(1870);
        recs.extend(m3_records(1871));
        recs.push(TradeRecord::new(1871, "1", "ZZZ", 4.0));
        let s = matrix_series(&recs, 1870, 1871).unwrap();
        assert!(s.matrices[0].index_of("ZZZ").is_none());
        assert_eq!(s.matrices[1].index_of("ZZZ"), Some(3));
        assert_eq!(s.matrices[1].get(0, 3), 4.0);
    }

    #[test]
    fn inverted_range_is_an_error() {
        assert!(matches!(matrix_series(&[], 1900, 1899), Err(IngestError::YearRange { .. })));
    }

    #[test]
    fn matrix_constructor_validates() {
        assert!(ImportMatrix::from_rows(&[&[1.0]]).is_err());
        assert!(ImportMatrix::from_rows(&[&[0.0, -1.0], &[0.0, 0.0]]).is_err());
        assert!(ImportMatrix::new(0, vec!["a".into(), "a".into()], DMatrix::zeros(2, 2)).is_err());
        assert!(ImportMatrix::new(0, vec![], DMatrix::zeros(0, 0)).is_err());
    }
}
