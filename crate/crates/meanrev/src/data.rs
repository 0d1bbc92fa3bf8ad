//! Price panel loading, validation, and windowing.
//!
//! Panels hold price *levels* (not returns). The first CSV column is either
//! an ISO-8601 date or an integer index; the header row names the assets.

use crate::{sc, to_f64, Error, Result, Scalar};
use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// Trading-day convention used to annualize: dt = 1/252 years per row.
pub const DEFAULT_DT: f64 = 1.0 / 252.0;

/// Row timestamp: a calendar date or a plain integer index.
/// A panel must use one kind consistently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimeIndex {
    Index(i64),
    Date(NaiveDate),
}

impl fmt::Display for TimeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeIndex::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            TimeIndex::Index(i) => write!(f, "{i}"),
        }
    }
}

fn parse_time_index(s: &str) -> Option<TimeIndex> {
    let s = s.trim();
    if let Ok(i) = s.parse::<i64>() {
        return Some(TimeIndex::Index(i));
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().map(TimeIndex::Date)
}

/// An m x n matrix of asset price observations with timestamps and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePanel<T: Scalar> {
    values: DMatrix<T>,
    timestamps: Vec<TimeIndex>,
    labels: Vec<String>,
    dt: T,
}

impl<T: Scalar> TimePanel<T> {
    /// Build a panel, validating shape and strict timestamp ordering.
    pub fn new(
        values: DMatrix<T>,
        timestamps: Vec<TimeIndex>,
        labels: Vec<String>,
        dt: T,
    ) -> Result<Self> {
        if values.ncols() == 0 || values.nrows() == 0 {
            return Err(Error::Shape("panel must have at least one row and one column".into()));
        }
        if values.ncols() != labels.len() {
            return Err(Error::Shape(format!(
                "{} labels for {} columns",
                labels.len(),
                values.ncols()
            )));
        }
        if values.nrows() != timestamps.len() {
            return Err(Error::Shape(format!(
                "{} timestamps for {} rows",
                timestamps.len(),
                values.nrows()
            )));
        }
        if dt <= T::zero() {
            return Err(Error::Domain("dt must be positive".into()));
        }
        for i in 1..timestamps.len() {
            let same_kind = matches!(
                (&timestamps[i - 1], &timestamps[i]),
                (TimeIndex::Date(_), TimeIndex::Date(_)) | (TimeIndex::Index(_), TimeIndex::Index(_))
            );
            if !same_kind || timestamps[i] <= timestamps[i - 1] {
                return Err(Error::Ordering { row: i });
            }
        }
        Ok(TimePanel { values, timestamps, labels, dt })
    }

    /// Panel with integer timestamps 0..m and labels A1..An; handy for fixtures.
    pub fn from_values(values: DMatrix<T>, dt: T) -> Result<Self> {
        let timestamps = (0..values.nrows()).map(|i| TimeIndex::Index(i as i64)).collect();
        let labels = (1..=values.ncols()).map(|j| format!("A{j}")).collect();
        TimePanel::new(values, timestamps, labels, dt)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn timestamps(&self) -> &[TimeIndex] {
        &self.timestamps
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Column means over the full panel.
    pub fn column_means(&self) -> DVector<T> {
        let m = sc::<T>(self.nrows() as f64);
        DVector::from_iterator(self.ncols(), self.values.column_iter().map(|c| c.sum() / m))
    }

    /// Sub-panel over a row range (half-open).
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.nrows() {
            return Err(Error::Shape(format!(
                "row range {start}..{end} out of bounds for {} rows",
                self.nrows()
            )));
        }
        TimePanel::new(
            self.values.rows(start, end - start).into_owned(),
            self.timestamps[start..end].to_vec(),
            self.labels.clone(),
            self.dt,
        )
    }

    /// Sub-panel restricted to the given column indices (in the given order).
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::Shape("no columns selected".into()));
        }
        for &c in cols {
            if c >= self.ncols() {
                return Err(Error::Shape(format!("column {c} out of bounds")));
            }
        }
        let values = DMatrix::from_fn(self.nrows(), cols.len(), |i, j| self.values[(i, cols[j])]);
        let labels = cols.iter().map(|&c| self.labels[c].clone()).collect();
        TimePanel::new(values, self.timestamps.clone(), labels, self.dt)
    }

    /// First-difference panel: row t = row t+1 - row t of the original.
    /// Used for Johansen-style analysis of level data.
    pub fn difference(&self) -> Result<Self> {
        if self.nrows() < 2 {
            return Err(Error::InsufficientData("need at least 2 rows to difference".into()));
        }
        let m = self.nrows() - 1;
        let diff = self.values.rows(1, m) - self.values.rows(0, m);
        TimePanel::new(
            diff.into_owned(),
            self.timestamps[1..].to_vec(),
            self.labels.clone(),
            self.dt,
        )
    }

    /// Track of one portfolio: P_t = S_t . x.
    pub fn portfolio_track(&self, weights: &DVector<T>) -> Result<DVector<T>> {
        if weights.len() != self.ncols() {
            return Err(Error::Shape(format!(
                "{} weights for {} assets",
                weights.len(),
                self.ncols()
            )));
        }
        Ok(&self.values * weights)
    }

    /// Write the panel as CSV. Values use the shortest round-trip float
    /// representation so a reload reproduces them bit-exactly.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (i, ts) in self.timestamps.iter().enumerate() {
            let mut rec = vec![ts.to_string()];
            for j in 0..self.ncols() {
                rec.push(format!("{}", self.values[(i, j)]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file)
    }
}

/// What to do with a row that has missing cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillPolicy {
    /// Drop the whole row (default; forward-filling risks bias).
    #[default]
    DropRow,
    /// Copy the previous row's value into the gap.
    ForwardFill,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub fill: FillPolicy,
    pub dt: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { delimiter: b',', fill: FillPolicy::DropRow, dt: DEFAULT_DT }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DroppedRow {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilledCell {
    pub row: usize,
    pub column: String,
}

/// Summary of what the loader did, emitted as JSON next to results when
/// reporting is enabled.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub dropped: Vec<DroppedRow>,
    pub filled: Vec<FilledCell>,
}

#[derive(Debug, Clone)]
pub struct LoadedPanel<T: Scalar> {
    pub panel: TimePanel<T>,
    pub report: LoadReport,
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("nan") || t.eq_ignore_ascii_case("na")
}

/// Load a panel from CSV. Header row names the assets; first column is the
/// date or integer index. Rows with gaps are dropped or forward-filled per
/// the fill policy and recorded in the load report.
pub fn load_panel<T: Scalar, P: AsRef<Path>>(path: P, options: &LoadOptions) -> Result<LoadedPanel<T>> {
    let file = std::fs::File::open(path)?;
    read_panel(file, options)
}

pub fn read_panel<T: Scalar, R: std::io::Read>(reader: R, options: &LoadOptions) -> Result<LoadedPanel<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::Shape("need a time column plus at least one asset column".into()));
    }
    let labels: Vec<String> = headers.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let n = labels.len();

    let mut report = LoadReport::default();
    let mut timestamps: Vec<TimeIndex> = Vec::new();
    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut last_complete: Option<Vec<T>> = None;

    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = i + 2; // 1-based, counting the header
        report.rows_read += 1;
        if record.len() != n + 1 {
            return Err(Error::Parse {
                row: row_no,
                column: "<record>".into(),
                message: format!("expected {} fields, found {}", n + 1, record.len()),
            });
        }
        let ts = parse_time_index(&record[0]).ok_or_else(|| Error::Parse {
            row: row_no,
            column: headers[0].to_string(),
            message: format!("unparseable time value {:?}", &record[0]),
        })?;

        let mut vals: Vec<Option<T>> = Vec::with_capacity(n);
        for (j, cell) in record.iter().skip(1).enumerate() {
            if is_missing(cell) {
                vals.push(None);
                continue;
            }
            let parsed: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row: row_no,
                column: labels[j].clone(),
                message: format!("malformed numeric cell {:?}", cell),
            })?;
            vals.push(Some(sc(parsed)));
        }

        if vals.iter().any(Option::is_none) {
            match options.fill {
                FillPolicy::DropRow => {
                    report.dropped.push(DroppedRow {
                        row: row_no,
                        reason: "missing value".into(),
                    });
                    continue;
                }
                FillPolicy::ForwardFill => {
                    let Some(prev) = &last_complete else {
                        report.dropped.push(DroppedRow {
                            row: row_no,
                            reason: "missing value with no prior row to fill from".into(),
                        });
                        continue;
                    };
                    for j in 0..n {
                        if vals[j].is_none() {
                            vals[j] = Some(prev[j]);
                            report.filled.push(FilledCell { row: row_no, column: labels[j].clone() });
                        }
                    }
                }
            }
        }

        let row: Vec<T> = vals.into_iter().map(|v| v.unwrap()).collect();
        last_complete = Some(row.clone());
        timestamps.push(ts);
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::InsufficientData("no usable rows in input".into()));
    }
    report.rows_kept = rows.len();

    // Ordering check here so the error carries the original file row number.
    for i in 1..timestamps.len() {
        let same_kind = matches!(
            (&timestamps[i - 1], &timestamps[i]),
            (TimeIndex::Date(_), TimeIndex::Date(_)) | (TimeIndex::Index(_), TimeIndex::Index(_))
        );
        if !same_kind || timestamps[i] <= timestamps[i - 1] {
            return Err(Error::Ordering { row: i + 1 });
        }
    }

    let m = rows.len();
    let values = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    let panel = TimePanel::new(values, timestamps, labels, sc(options.dt))?;
    Ok(LoadedPanel { panel, report })
}

/// Aligned (S_t, S_{t-1}) views of a panel, optionally centered with the
/// full-panel column means (the same shift on both views keeps them aligned).
#[derive(Debug, Clone)]
pub struct LaggedPair<T: Scalar> {
    current: DMatrix<T>,
    lagged: DMatrix<T>,
    centered: bool,
}

impl<T: Scalar> LaggedPair<T> {
    /// Build a pair from aligned views directly; the usual route is
    /// [`make_lagged_pair`].
    pub fn from_parts(current: DMatrix<T>, lagged: DMatrix<T>, centered: bool) -> Result<Self> {
        if current.shape() != lagged.shape() {
            return Err(Error::Shape(format!(
                "current {:?} and lagged {:?} views must have equal shape",
                current.shape(),
                lagged.shape()
            )));
        }
        if current.nrows() < 2 {
            return Err(Error::InsufficientData("lagged pair needs at least 2 rows".into()));
        }
        Ok(LaggedPair { current, lagged, centered })
    }

    pub fn current(&self) -> &DMatrix<T> {
        &self.current
    }

    pub fn lagged(&self) -> &DMatrix<T> {
        &self.lagged
    }

    pub fn centered(&self) -> bool {
        self.centered
    }

    pub fn nrows(&self) -> usize {
        self.current.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.current.ncols()
    }
}

/// Split a panel into current rows 2..m and lagged rows 1..m-1.
pub fn make_lagged_pair<T: Scalar>(panel: &TimePanel<T>, center: bool) -> Result<LaggedPair<T>> {
    let m = panel.nrows();
    if m < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 rows for a lagged pair, got {m}"
        )));
    }
    let mut current = panel.values().rows(1, m - 1).into_owned();
    let mut lagged = panel.values().rows(0, m - 1).into_owned();
    if center {
        let means = panel.column_means();
        for j in 0..panel.ncols() {
            let mu = means[j];
            for i in 0..m - 1 {
                current[(i, j)] -= mu;
                lagged[(i, j)] -= mu;
            }
        }
    }
    Ok(LaggedPair { current, lagged, centered: center })
}

/// Rolling (in-sample, out-of-sample) pairs. Each in-sample window has
/// `window` rows; the out-of-sample block is the next `window` rows,
/// truncated at the panel end. Pairs with an empty out-sample are dropped.
pub fn rolling_windows<T: Scalar>(
    panel: &TimePanel<T>,
    window: usize,
    step: usize,
) -> Result<Vec<(TimePanel<T>, TimePanel<T>)>> {
    if window < 3 {
        return Err(Error::Domain("window must be at least 3".into()));
    }
    if step < 1 {
        return Err(Error::Domain("step must be at least 1".into()));
    }
    let m = panel.nrows();
    let mut out = Vec::new();
    let mut start = 0;
    while start + window < m {
        let in_sample = panel.slice_rows(start, start + window)?;
        let out_end = (start + 2 * window).min(m);
        let out_sample = panel.slice_rows(start + window, out_end)?;
        out.push((in_sample, out_sample));
        start += step;
    }
    Ok(out)
}

/// Serializable panel summary used in JSON manifests.
#[derive(Debug, Clone, Serialize)]
pub struct PanelMeta {
    pub rows: usize,
    pub assets: Vec<String>,
    pub dt: f64,
    pub first: String,
    pub last: String,
}

impl<T: Scalar> TimePanel<T> {
    pub fn meta(&self) -> PanelMeta {
        PanelMeta {
            rows: self.nrows(),
            assets: self.labels.to_vec(),
            dt: to_f64(self.dt),
            first: self.timestamps[0].to_string(),
            last: self.timestamps[self.nrows() - 1].to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn panel_123() -> TimePanel<f64> {
        TimePanel::from_values(DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]), DEFAULT_DT).unwrap()
    }

    #[test]
    fn loads_well_formed_csv() {
        let csv = "date,a,b\n2020-01-01,1.0,2.0\n2020-01-02,1.5,2.5\n2020-01-03,2.0,3.0\n";
        let loaded = read_panel::<f64, _>(csv.as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(loaded.panel.nrows(), 3);
        assert_eq!(loaded.panel.ncols(), 2);
        assert_eq!(loaded.panel.labels(), &["a".to_string(), "b".to_string()]);
        assert!(loaded.report.dropped.is_empty());
        assert_eq!(loaded.panel.values()[(2, 1)], 3.0);
    }

    #[test]
    fn drop_row_policy_reduces_m_and_reports() {
        let csv = "date,a,b\n1,1.0,2.0\n2,,2.5\n3,2.0,3.0\n";
        let loaded = read_panel::<f64, _>(csv.as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(loaded.panel.nrows(), 2);
        assert_eq!(loaded.report.dropped.len(), 1);
        assert_eq!(loaded.report.dropped[0].row, 3);
    }

    #[test]
    fn forward_fill_policy_fills_and_reports() {
        let csv = "date,a,b\n1,1.0,2.0\n2,,2.5\n3,2.0,3.0\n";
        let opts = LoadOptions { fill: FillPolicy::ForwardFill, ..Default::default() };
        let loaded = read_panel::<f64, _>(csv.as_bytes(), &opts).unwrap();
        assert_eq!(loaded.panel.nrows(), 3);
        assert_eq!(loaded.panel.values()[(1, 0)], 1.0);
        assert_eq!(loaded.report.filled.len(), 1);
    }

    #[test]
    fn out_of_order_dates_error() {
        let csv = "date,a\n2020-01-02,1.0\n2020-01-01,2.0\n";
        let err = read_panel::<f64, _>(csv.as_bytes(), &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Ordering { .. }));
    }

    #[test]
    fn malformed_cell_names_row_and_column() {
        let csv = "date,a,b\n1,1.0,2.0\n2,oops,2.5\n";
        let err = read_panel::<f64, _>(csv.as_bytes(), &LoadOptions::default()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "a");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let values = DMatrix::from_row_slice(3, 2, &[0.1, 1.0 / 3.0, -2.5e-11, 7.25, 1e300, 0.3]);
        let panel = TimePanel::from_values(values, DEFAULT_DT).unwrap();
        let mut buf = Vec::new();
        panel.write_csv(&mut buf).unwrap();
        let reloaded = read_panel::<f64, _>(buf.as_slice(), &LoadOptions::default()).unwrap();
        assert_eq!(reloaded.panel.values(), panel.values());
        assert_eq!(reloaded.panel.timestamps(), panel.timestamps());
    }

    #[test]
    fn lagged_pair_uncentered() {
        let pair = make_lagged_pair(&panel_123(), false).unwrap();
        assert_eq!(pair.current().as_slice(), &[2.0, 3.0]);
        assert_eq!(pair.lagged().as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn lagged_pair_centered_uses_full_panel_means() {
        let pair = make_lagged_pair(&panel_123(), true).unwrap();
        assert_abs_diff_eq!(pair.current().as_slice()[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pair.current().as_slice()[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pair.lagged().as_slice()[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pair.lagged().as_slice()[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lagged_pair_rejects_short_panel() {
        let panel =
            TimePanel::from_values(DMatrix::from_column_slice(2, 1, &[1.0, 2.0]), DEFAULT_DT).unwrap();
        assert!(matches!(
            make_lagged_pair(&panel, false),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn lagged_pair_reconstructs_panel() {
        let panel = panel_123();
        let pair = make_lagged_pair(&panel, false).unwrap();
        // lagged row 0 + current rows = original panel rows
        let mut rows = vec![pair.lagged().row(0).into_owned()];
        for i in 0..pair.nrows() {
            rows.push(pair.current().row(i).into_owned());
        }
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row[(0, 0)], panel.values()[(i, 0)]);
        }
    }

    #[test]
    fn windows_paper_layout() {
        let values = DMatrix::from_fn(400, 1, |i, _| i as f64);
        let panel = TimePanel::from_values(values, DEFAULT_DT).unwrap();
        let pairs = rolling_windows(&panel, 200, 50).unwrap();
        assert_eq!(pairs[0].0.nrows(), 200);
        assert_eq!(pairs[0].1.nrows(), 200);
        assert_eq!(pairs[0].0.values()[(0, 0)], 0.0);
        assert_eq!(pairs[0].1.values()[(0, 0)], 200.0);
        assert_eq!(pairs[0].1.values()[(199, 0)], 399.0);
        // starts advance by exactly `step`
        for (w, pair) in pairs.iter().enumerate() {
            assert_eq!(pair.0.values()[(0, 0)], (w * 50) as f64);
        }
    }

    #[test]
    fn windows_without_out_sample_are_dropped() {
        let values = DMatrix::from_fn(200, 1, |i, _| i as f64);
        let panel = TimePanel::from_values(values, DEFAULT_DT).unwrap();
        assert!(rolling_windows(&panel, 200, 50).unwrap().is_empty());
        // window larger than the panel: empty, not an error
        assert!(rolling_windows(&panel, 300, 50).unwrap().is_empty());
    }

    #[test]
    fn windows_truncated_out_sample() {
        let values = DMatrix::from_fn(250, 1, |i, _| i as f64);
        let panel = TimePanel::from_values(values, DEFAULT_DT).unwrap();
        let pairs = rolling_windows(&panel, 100, 100).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].1.nrows(), 100);
        assert_eq!(pairs[1].1.nrows(), 50);
        assert_eq!(pairs[1].0.values()[(0, 0)], 100.0);
        assert_eq!(pairs[1].1.values()[(0, 0)], 200.0);
    }

    #[test]
    fn difference_panel() {
        let panel = panel_123();
        let d = panel.difference().unwrap();
        assert_eq!(d.nrows(), 2);
        assert_eq!(d.values().as_slice(), &[1.0, 1.0]);
    }
}
