//! CSV ingestion and descriptive statistics of claim series.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::zero_mixed::ordered_subsets;
use crate::model::{ActiveSet, ClaimSeries};

/// Unit of the amounts in the input file. Series are held in millions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Dkk,
    #[default]
    Millions,
}

impl Unit {
    fn scale(self) -> f64 {
        match self {
            Unit::Dkk => 1e-6,
            Unit::Millions => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadOptions {
    pub unit: Unit,
    /// Column carried as opaque row labels. When unset, a first column named
    /// `date` (any case) is used.
    pub date_column: Option<String>,
    /// Keep only these claim columns, in this order.
    pub columns: Option<Vec<String>>,
}

pub fn load_claims(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<ClaimSeries> {
    let file = std::fs::File::open(path.as_ref())?;
    read_claims(file, opts)
}

pub fn read_claims<R: Read>(reader: R, opts: &LoadOptions) -> Result<ClaimSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Parse("missing header row".into()));
    }
    let date_col = match &opts.date_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse(format!("no column named {name:?}")))?,
        ),
        None => header.first().filter(|h| h.eq_ignore_ascii_case("date")).map(|_| 0),
    };
    let claim_cols: Vec<usize> = match &opts.columns {
        Some(names) => names
            .iter()
            .map(|n| {
                header
                    .iter()
                    .position(|h| h == n)
                    .filter(|&i| Some(i) != date_col)
                    .ok_or_else(|| Error::Parse(format!("no claim column named {n:?}")))
            })
            .collect::<Result<_>>()?,
        None => (0..header.len()).filter(|&i| Some(i) != date_col).collect(),
    };
    if claim_cols.is_empty() {
        return Err(Error::Parse("no claim columns".into()));
    }
    let scale = opts.unit.scale();
    let mut rows = Vec::new();
    let mut dates = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Parse(format!(
                "row {r} has {} fields, header has {}",
                rec.len(),
                header.len()
            )));
        }
        let mut row = Vec::with_capacity(claim_cols.len());
        for &c in &claim_cols {
            let cell = &rec[c];
            if cell.is_empty() {
                return Err(Error::Parse(format!("row {r}: missing value in column {:?}", header[c])));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Parse(format!("row {r}: {cell:?} in column {:?} is not a number", header[c])))?;
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Domain(format!("row {r}: claim {v} in column {:?} is negative", header[c])));
            }
            row.push(v * scale);
        }
        rows.push(row);
        if let Some(dc) = date_col {
            dates.push(rec[dc].to_string());
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    let labels = claim_cols.iter().map(|&c| header[c].clone()).collect();
    let mut series = ClaimSeries::new(labels, rows)?;
    if date_col.is_some() {
        series.row_labels = Some(dates);
    }
    Ok(series)
}

/// Writes a header and one line per row; floats use the shortest
/// representation that reads back to the same value.
pub fn write_claims<W: Write>(series: &ClaimSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let dated = series.row_labels.is_some();
    let mut header: Vec<&str> = Vec::new();
    if dated {
        header.push("date");
    }
    header.extend(series.labels().iter().map(String::as_str));
    w.write_record(&header)?;
    for (i, row) in series.rows().enumerate() {
        let mut rec: Vec<String> = Vec::with_capacity(row.len() + 1);
        if let Some(d) = &series.row_labels {
            rec.push(d[i].clone());
        }
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_claims(series: &ClaimSeries, path: impl AsRef<Path>) -> Result<()> {
    write_claims(series, std::fs::File::create(path.as_ref())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub label: String,
    pub n_positive: usize,
    pub share: f64,
    /// Moments over the positive entries; `None` for an all-zero column.
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetCount {
    pub subset: Vec<usize>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_days: usize,
    pub columns: Vec<ColumnSummary>,
    /// `[i][j]`: rows with both `x_i > 0` and `x_j > 0`.
    pub co_jumps: Vec<Vec<usize>>,
    /// `[i][j]`: rows with both `x_i = 0` and `x_j = 0`.
    pub no_jumps: Vec<Vec<usize>>,
    /// Rows with every column positive.
    pub all_co_jumps: usize,
    /// Rows with every column zero.
    pub all_no_jumps: usize,
    /// Rows per exact active set, ordered by size then lexicographically;
    /// omitted for more than 12 columns.
    pub exact_active_sets: Option<Vec<SubsetCount>>,
}

pub fn summarize(series: &ClaimSeries) -> DatasetSummary {
    let d = series.n_cols();
    let n = series.n_rows();
    let mut co = vec![vec![0usize; d]; d];
    let mut none = vec![vec![0usize; d]; d];
    let mut positives: Vec<Vec<f64>> = vec![Vec::new(); d];
    let (mut all_co, mut all_none) = (0, 0);
    let track = d <= 12;
    let mut exact = vec![0usize; if track { 1 << d } else { 0 }];
    for x in series.rows() {
        for i in 0..d {
            if x[i] > 0.0 {
                positives[i].push(x[i]);
            }
            for j in 0..d {
                match (x[i] > 0.0, x[j] > 0.0) {
                    (true, true) => co[i][j] += 1,
                    (false, false) => none[i][j] += 1,
                    _ => {}
                }
            }
        }
        all_co += x.iter().all(|&v| v > 0.0) as usize;
        all_none += x.iter().all(|&v| v == 0.0) as usize;
        if track {
            let s = ActiveSet::of(x).expect("validated series");
            exact[s.mask() as usize] += 1;
        }
    }
    let columns = positives
        .iter_mut()
        .enumerate()
        .map(|(i, v)| {
            // summed in sorted order so the mean does not depend on row order
            v.sort_by(f64::total_cmp);
            let k = v.len();
            ColumnSummary {
                label: series.labels()[i].clone(),
                n_positive: k,
                share: k as f64 / n as f64,
                mean: (k > 0).then(|| v.iter().sum::<f64>() / k as f64),
                min: v.first().copied(),
                max: v.last().copied(),
            }
        })
        .collect();
    let exact_active_sets = track.then(|| {
        ordered_subsets(d)
            .into_iter()
            .map(|s| {
                let mask = s.iter().fold(0usize, |m, &i| m | 1 << i);
                SubsetCount {
                    subset: s,
                    count: exact[mask],
                }
            })
            .collect()
    });
    DatasetSummary {
        n_days: n,
        columns,
        co_jumps: co,
        no_jumps: none,
        all_co_jumps: all_co,
        all_no_jumps: all_none,
        exact_active_sets,
    }
}

/// Location of the bundled trivariate fire-claims fixture, overridable with
/// `COMBFIT_DANISH`.
pub fn danish_fixture_path() -> std::path::PathBuf {
    match std::env::var_os("COMBFIT_DANISH") {
        Some(p) => p.into(),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("data/danish_trivariate.csv"),
    }
}
