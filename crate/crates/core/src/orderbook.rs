//! Order-book ingestion: CSV parsing, dense cube construction, item
//! filtering, and the zero-count / volume-by-delivery summaries.
//!
//! The raw export is one row per (item, fulfillment period, delivery date)
//! with a quantity. Periods with no row are zero-volume periods, so the cube
//! is densified over the full `[min period, max period]` range with explicit
//! zeros.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Whether cube cells hold cumulative (gross) volumes along the delivery
/// axis, or per-window net bookings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semantics {
    Gross,
    Net,
}

impl std::fmt::Display for Semantics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Semantics::Gross => write!(f, "gross"),
            Semantics::Net => write!(f, "net"),
        }
    }
}

/// One ingested order-book row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderRecord {
    pub item_code: String,
    pub period: i64,
    pub delivery_date: usize,
    pub quantity: i64,
}

/// Column-name mapping for CSV inputs whose headers differ from the
/// standard `item_code,period,delivery_date,quantity`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub item_code: String,
    pub period: String,
    pub delivery_date: String,
    pub quantity: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            item_code: "item_code".into(),
            period: "period".into(),
            delivery_date: "delivery_date".into(),
            quantity: "quantity".into(),
        }
    }
}

/// Dense per-item storage shared by gross and net cubes: `values[item]`
/// is a `n_periods * horizon` row-major block indexed `[t][h]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeData {
    items: Vec<String>,
    first_period: i64,
    n_periods: usize,
    horizon: usize,
    values: Vec<Vec<i64>>,
}

impl CubeData {
    pub fn new(items: Vec<String>, first_period: i64, n_periods: usize, horizon: usize) -> Self {
        let values = vec![vec![0i64; n_periods * horizon]; items.len()];
        Self {
            items,
            first_period,
            n_periods,
            horizon,
            values,
        }
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn item_index(&self, code: &str) -> Option<usize> {
        self.items.iter().position(|i| i == code)
    }

    pub fn first_period(&self) -> i64 {
        self.first_period
    }

    pub fn last_period(&self) -> i64 {
        self.first_period + self.n_periods as i64 - 1
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Cell lookup; periods outside the densified range do not exist.
    pub fn get(&self, item: usize, period: i64, delivery: usize) -> i64 {
        let t = (period - self.first_period) as usize;
        self.values[item][t * self.horizon + delivery]
    }

    pub fn set(&mut self, item: usize, period: i64, delivery: usize, v: i64) {
        let t = (period - self.first_period) as usize;
        self.values[item][t * self.horizon + delivery] = v;
    }

    pub fn add(&mut self, item: usize, period: i64, delivery: usize, v: i64) {
        let t = (period - self.first_period) as usize;
        self.values[item][t * self.horizon + delivery] += v;
    }

    /// True when every delivery cell of the period is zero.
    pub fn period_is_zero(&self, item: usize, period: i64) -> bool {
        (0..self.horizon).all(|h| self.get(item, period, h) == 0)
    }

    pub fn total(&self) -> i64 {
        self.values.iter().flatten().sum()
    }

    pub fn periods(&self) -> impl Iterator<Item = i64> + '_ {
        self.first_period..=self.last_period()
    }

    /// Sub-cube with only the listed item indices, order preserved.
    pub fn take_items(&self, idx: &[usize]) -> CubeData {
        CubeData {
            items: idx.iter().map(|&i| self.items[i].clone()).collect(),
            first_period: self.first_period,
            n_periods: self.n_periods,
            horizon: self.horizon,
            values: idx.iter().map(|&i| self.values[i].clone()).collect(),
        }
    }
}

/// Dense order-book cube with gross or net quantity semantics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandCube {
    pub data: CubeData,
    pub semantics: Semantics,
}

impl DemandCube {
    /// Counts cells violating gross monotonicity `q[t][h] >= q[t][h+1]`
    /// (cancellations in the export). Violations are reported, never
    /// repaired, because repairing would corrupt the differencing analysis.
    pub fn monotonicity_violations(&self) -> usize {
        let h = self.data.horizon;
        let mut count = 0;
        for item in 0..self.data.items.len() {
            for t in self.data.periods() {
                for j in 0..h.saturating_sub(1) {
                    if self.data.get(item, t, j) < self.data.get(item, t, j + 1) {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

/// Per-item and per-cell totals used by the zero-order and
/// volume-by-delivery summaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubeSummary {
    pub items: Vec<String>,
    /// Periods where every delivery cell of the item is zero.
    pub zero_period_count: Vec<usize>,
    pub first_period: i64,
    /// `totals[t][h]` = sum over items of the cell volume.
    pub totals: Vec<Vec<i64>>,
    pub item_count: usize,
    pub period_count: usize,
    pub monotonicity_violations: usize,
}

/// Parses order rows from a CSV stream. Rows with quantity 0 are retained
/// and row order is preserved.
pub fn parse_orders<R: Read>(
    source: R,
    schema: &ColumnSchema,
    horizon: usize,
) -> Result<Vec<OrderRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let item_col = col(&schema.item_code)?;
    let period_col = col(&schema.period)?;
    let delivery_col = col(&schema.delivery_date)?;
    let quantity_col = col(&schema.quantity)?;

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i as u64 + 2; // header is line 1
        let row = row?;
        let field = |c: usize, name: &str| -> Result<&str> {
            row.get(c).ok_or_else(|| Error::MalformedRow {
                line,
                message: format!("missing field `{name}`"),
            })
        };
        let parse_int = |s: &str, name: &str| -> Result<i64> {
            s.parse::<i64>().map_err(|_| Error::MalformedRow {
                line,
                message: format!("field `{name}` is not an integer: `{s}`"),
            })
        };

        let item_code = field(item_col, "item_code")?.to_string();
        let period = parse_int(field(period_col, "period")?, "period")?;
        let delivery = parse_int(field(delivery_col, "delivery_date")?, "delivery_date")?;
        let quantity = parse_int(field(quantity_col, "quantity")?, "quantity")?;

        if quantity < 0 {
            return Err(Error::NegativeQuantity { line, quantity });
        }
        if delivery < 0 || delivery as usize >= horizon {
            return Err(Error::DeliveryOutOfRange {
                value: delivery,
                horizon,
                line,
            });
        }

        records.push(OrderRecord {
            item_code,
            period,
            delivery_date: delivery as usize,
            quantity,
        });
    }
    Ok(records)
}

/// Builds a dense cube spanning `[min period, max period]` over all records.
/// Missing cells are zero; duplicate (item, t, h) rows are summed.
pub fn build_cube(
    records: &[OrderRecord],
    horizon: usize,
    semantics: Semantics,
) -> Result<DemandCube> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let first = records.iter().map(|r| r.period).min().unwrap();
    let last = records.iter().map(|r| r.period).max().unwrap();
    let n_periods = (last - first + 1) as usize;

    // first-appearance item order
    let mut items: Vec<String> = Vec::new();
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        if !index.contains_key(r.item_code.as_str()) {
            index.insert(r.item_code.as_str(), items.len());
            items.push(r.item_code.clone());
        }
    }

    let mut data = CubeData::new(items, first, n_periods, horizon);
    let mut seen: BTreeMap<(usize, i64, usize), u32> = BTreeMap::new();
    let mut duplicates = 0u64;
    for r in records {
        let item = index[r.item_code.as_str()];
        let key = (item, r.period, r.delivery_date);
        let count = seen.entry(key).or_insert(0);
        *count += 1;
        if *count == 2 {
            duplicates += 1;
        }
        data.add(item, r.period, r.delivery_date, r.quantity);
    }
    if duplicates > 0 {
        log::info!("summed duplicate rows for {duplicates} (item, period, delivery) cells");
    }

    Ok(DemandCube { data, semantics })
}

/// Keeps items whose fraction of non-zero periods is at least the threshold.
/// A period counts as non-zero when any delivery cell of it is non-zero.
pub fn filter_items(cube: &DemandCube, min_nonzero_frac: f64) -> Result<DemandCube> {
    assert!(
        (0.0..=1.0).contains(&min_nonzero_frac),
        "fraction out of [0, 1]"
    );
    let n_periods = cube.data.n_periods as f64;
    let keep: Vec<usize> = (0..cube.data.items.len())
        .filter(|&i| {
            let nonzero = cube
                .data
                .periods()
                .filter(|&t| !cube.data.period_is_zero(i, t))
                .count();
            nonzero as f64 / n_periods >= min_nonzero_frac
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::NoItemsSurvive(min_nonzero_frac));
    }
    Ok(DemandCube {
        data: cube.data.take_items(&keep),
        semantics: cube.semantics,
    })
}

/// Zero-period counts per item and per-(period, delivery) totals.
pub fn summarize(cube: &DemandCube) -> CubeSummary {
    let data = &cube.data;
    let zero_period_count = (0..data.items.len())
        .map(|i| data.periods().filter(|&t| data.period_is_zero(i, t)).count())
        .collect();
    let totals = data
        .periods()
        .map(|t| {
            (0..data.horizon)
                .map(|h| (0..data.items.len()).map(|i| data.get(i, t, h)).sum())
                .collect()
        })
        .collect();
    CubeSummary {
        items: data.items.clone(),
        zero_period_count,
        first_period: data.first_period,
        totals,
        item_count: data.items.len(),
        period_count: data.n_periods,
        monotonicity_violations: match cube.semantics {
            Semantics::Gross => cube.monotonicity_violations(),
            Semantics::Net => 0,
        },
    }
}

/// Writes a cube back out in the order-book CSV schema, omitting zero cells
/// (absent periods are zero-volume by convention).
pub fn write_orders<W: Write>(cube: &DemandCube, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["item_code", "period", "delivery_date", "quantity"])?;
    let data = &cube.data;
    for (i, item) in data.items.iter().enumerate() {
        for t in data.periods() {
            for h in 0..data.horizon {
                let q = data.get(i, t, h);
                if q != 0 {
                    w.write_record([
                        item.as_str(),
                        &t.to_string(),
                        &h.to_string(),
                        &q.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the per-item zero-period counts (`zeros_per_item.csv` data).
pub fn write_zeros_per_item<W: Write>(summary: &CubeSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["item_code", "zero_periods", "total_periods"])?;
    for (item, zeros) in summary.items.iter().zip(&summary.zero_period_count) {
        w.write_record([
            item.as_str(),
            &zeros.to_string(),
            &summary.period_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes per-period totals with one column per delivery date
/// (`quantity_by_delivery.csv` data).
pub fn write_quantity_by_delivery<W: Write>(summary: &CubeSummary, out: W) -> Result<()> {
    let horizon = summary.totals.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["period".to_string()];
    header.extend((0..horizon).map(|h| format!("delivery_{h}")));
    w.write_record(&header)?;
    for (t, row) in summary.totals.iter().enumerate() {
        let mut rec = vec![(summary.first_period + t as i64).to_string()];
        rec.extend(row.iter().map(|q| q.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
