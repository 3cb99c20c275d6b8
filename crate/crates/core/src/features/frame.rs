use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::FeatureError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub date: NaiveDate,
    pub store: String,
    /// Currency units per day.
    pub sales: f64,
    pub promo: bool,
}

/// Dated panel of store observations, sorted by `(store, date)` with unique keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeriesFrame {
    rows: Vec<Observation>,
}

impl TimeSeriesFrame {
    pub fn new(mut rows: Vec<Observation>) -> Result<Self, FeatureError> {
        rows.sort_by(|a, b| a.store.cmp(&b.store).then(a.date.cmp(&b.date)));
        if let Some(w) = rows
            .windows(2)
            .find(|w| w[0].store == w[1].store && w[0].date == w[1].date)
        {
            return Err(FeatureError::DuplicateKey {
                date: w[0].date,
                store: w[0].store.clone(),
            });
        }
        Ok(Self { rows })
    }

    // Rows taken from an already-valid frame keep its order and uniqueness.
    fn from_sorted(rows: Vec<Observation>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct store ids in sorted order.
    pub fn stores(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| r.store.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_string)
            .collect()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.rows.iter().map(|r| r.date).collect()
    }

    pub fn sales(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.sales).collect()
    }

    pub fn promo(&self) -> Vec<f64> {
        self.rows.iter().map(|r| f64::from(u8::from(r.promo))).collect()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.rows.iter().map(|r| r.date).min()
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.rows.iter().map(|r| r.date).max()
    }

    pub fn filter<F: Fn(&Observation) -> bool>(&self, keep: F) -> Self {
        Self::from_sorted(self.rows.iter().filter(|r| keep(r)).cloned().collect())
    }

    pub fn select_stores(&self, stores: &[String]) -> Self {
        self.filter(|r| stores.contains(&r.store))
    }

    /// Splits off rows with `sales <= 0` (closed days). Returns the remaining
    /// frame and the removed rows.
    pub fn drop_nonpositive_sales(&self) -> (Self, Vec<Observation>) {
        let (keep, dropped): (Vec<_>, Vec<_>) = self.rows.iter().cloned().partition(|r| r.sales > 0.0);
        (Self::from_sorted(keep), dropped)
    }

    /// Keeps only the most recent `keep` rows of `store`, leaving other stores
    /// untouched. Mimics a store with a short history.
    pub fn truncate_store(&self, store: &str, keep: usize) -> Self {
        let count = self.rows.iter().filter(|r| r.store == store).count();
        let mut skip = count.saturating_sub(keep);
        let mut rows = Vec::with_capacity(self.rows.len() - skip);
        for r in &self.rows {
            if r.store == store && skip > 0 {
                skip -= 1;
                continue;
            }
            rows.push(r.clone());
        }
        Self::from_sorted(rows)
    }

    /// CSV with the default [`CsvSchema`] headers, readable by [`load_csv`].
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let schema = CsvSchema::default();
        let mut out = csv::Writer::from_writer(writer);
        out.write_record([&schema.date, &schema.store, &schema.sales, &schema.promo])?;
        for r in &self.rows {
            out.write_record([
                r.date.to_string(),
                r.store.clone(),
                r.sales.to_string(),
                u8::from(r.promo).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// One row per date summing sales over all stores, labelled `store`.
    /// Promo is set when any store ran one that day.
    pub fn total_by_date(&self, store: &str) -> Self {
        let mut by_date: std::collections::BTreeMap<NaiveDate, (f64, bool)> = Default::default();
        for r in &self.rows {
            let e = by_date.entry(r.date).or_insert((0.0, false));
            e.0 += r.sales;
            e.1 |= r.promo;
        }
        Self::from_sorted(
            by_date
                .into_iter()
                .map(|(date, (sales, promo))| Observation {
                    date,
                    store: store.to_string(),
                    sales,
                    promo,
                })
                .collect(),
        )
    }
}

/// Column names for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub date: String,
    pub store: String,
    pub sales: String,
    pub promo: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            date: "Date".into(),
            store: "Store".into(),
            sales: "Sales".into(),
            promo: "Promo".into(),
        }
    }
}

/// A malformed input row that was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectRecord {
    /// 1-based line number in the source file.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadedFrame {
    pub frame: TimeSeriesFrame,
    pub rejects: Vec<RejectRecord>,
}

impl LoadedFrame {
    pub fn write_rejects_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        write_rejects(&self.rejects, writer)
    }
}

pub(crate) fn write_rejects<W: Write>(rejects: &[RejectRecord], writer: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["line", "reason"])?;
    for r in rejects {
        out.write_record([r.line.to_string(), r.reason.clone()])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `Date, Store, Sales, Promo` rows (column names per `schema`). Extra
/// columns such as `DayOfWeek` are ignored. Rows with unparseable fields are
/// collected as rejects; a duplicated `(date, store)` pair is a hard error.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadedFrame, FeatureError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let index_of = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FeatureError::Schema(format!("missing required column `{name}`")))
    };
    let date_col = index_of(&schema.date)?;
    let store_col = index_of(&schema.store)?;
    let sales_col = index_of(&schema.sales)?;
    let promo_col = index_of(&schema.promo)?;

    let mut rows = Vec::new();
    let mut rejects = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        match parse_row(&record, date_col, store_col, sales_col, promo_col) {
            Ok(obs) => rows.push(obs),
            Err(reason) => rejects.push(RejectRecord { line, reason }),
        }
    }
    Ok(LoadedFrame {
        frame: TimeSeriesFrame::new(rows)?,
        rejects,
    })
}

fn parse_row(
    record: &csv::StringRecord,
    date_col: usize,
    store_col: usize,
    sales_col: usize,
    promo_col: usize,
) -> Result<Observation, String> {
    let field = |i: usize| record.get(i).ok_or_else(|| format!("missing field {}", i + 1));
    let date_text = field(date_col)?;
    let date = NaiveDate::parse_from_str(date_text, "%Y-%m-%d")
        .map_err(|_| format!("unparseable date `{date_text}`"))?;
    let store = field(store_col)?.to_string();
    if store.is_empty() {
        return Err("empty store id".into());
    }
    let sales_text = field(sales_col)?;
    let sales: f64 = sales_text
        .parse()
        .map_err(|_| format!("unparseable sales `{sales_text}`"))?;
    if !sales.is_finite() || sales < 0.0 {
        return Err(format!("sales must be finite and non-negative, got `{sales_text}`"));
    }
    let promo = match field(promo_col)? {
        "0" => false,
        "1" => true,
        other => return Err(format!("promo must be 0 or 1, got `{other}`")),
    };
    Ok(Observation {
        date,
        store,
        sales,
        promo,
    })
}
