//! The frontier (triangular) representation of an order book, plus
//! gross/net differencing and forecast reassembly.
//!
//! A cell `q[s][f]` (volume for fulfillment at period `s`, booked `f`
//! periods in advance) is revealed at period `s - f`. Anchored at a frontier
//! period `t`, the `(H+1) x H` window starting at row `t` therefore splits
//! into an upper triangle of already-known cells (`s - f <= t`) and a lower
//! triangle of future ones (`s - f > t`). The known triangle, optionally
//! extended with `L` fully-known lagged rows, becomes the feature vector
//! `x`; the future triangle becomes the target vector `y`.
//!
//! Slot order is row-major. For horizon 4 the feature triangle is
//! `x0..x9` (row offsets 0..3, deliveries from the diagonal rightwards) and
//! the target triangle is `y0..y9` (row offsets 1..4, deliveries from 0 up
//! to the diagonal). The earliest future volumes sit on the main diagonal
//! of the target triangle, slots 0, 2, 5, 9.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::orderbook::{CubeData, DemandCube, Semantics};
use crate::{Error, Result};

/// One slot of a frontier layout: the cell `q[t + offset][delivery]`
/// relative to the frontier period `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub period_offset: i64,
    pub delivery: usize,
}

/// Slot map for frontier samples at a given horizon and lag depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub horizon: usize,
    pub lags: usize,
}

impl Layout {
    pub fn new(horizon: usize, lags: usize) -> Self {
        assert!(horizon >= 1, "horizon must be at least 1");
        Self { horizon, lags }
    }

    /// Number of feature slots: known triangle plus `lags` full rows.
    pub fn x_dim(&self) -> usize {
        self.horizon * (self.horizon + 1) / 2 + self.lags * self.horizon
    }

    /// Number of target slots.
    pub fn y_dim(&self) -> usize {
        self.horizon * (self.horizon + 1) / 2
    }

    /// Feature slots in emission order: the known triangle row-major
    /// (offset 0..H, delivery from the diagonal to H-1), then lag rows
    /// `t-1, t-2, ...` left to right.
    pub fn x_slots(&self) -> Vec<Slot> {
        let h = self.horizon;
        let mut slots = Vec::with_capacity(self.x_dim());
        for offset in 0..h {
            for delivery in offset..h {
                slots.push(Slot {
                    period_offset: offset as i64,
                    delivery,
                });
            }
        }
        for lag in 1..=self.lags {
            for delivery in 0..h {
                slots.push(Slot {
                    period_offset: -(lag as i64),
                    delivery,
                });
            }
        }
        slots
    }

    /// Target slots in emission order: future triangle row-major
    /// (offset 1..=H, deliveries 0 up to the diagonal).
    pub fn y_slots(&self) -> Vec<Slot> {
        let h = self.horizon;
        let mut slots = Vec::with_capacity(self.y_dim());
        for offset in 1..=h {
            for delivery in 0..offset.min(h) {
                slots.push(Slot {
                    period_offset: offset as i64,
                    delivery,
                });
            }
        }
        slots
    }

    pub fn x_labels(&self) -> Vec<String> {
        let triangle = self.horizon * (self.horizon + 1) / 2;
        self.x_slots()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if i < triangle {
                    format!("x{i}")
                } else {
                    format!("lag{}_h{}", -s.period_offset, s.delivery)
                }
            })
            .collect()
    }

    pub fn y_labels(&self) -> Vec<String> {
        (0..self.y_dim()).map(|i| format!("y{i}")).collect()
    }

    /// Indices into the y vector of the earliest future volumes
    /// `q[t+p][p-1]`, p = 1..=H.
    pub fn main_diagonal_indices(&self) -> Vec<usize> {
        let mut idx = Vec::with_capacity(self.horizon);
        let mut base = 0;
        for p in 1..=self.horizon {
            idx.push(base + p - 1);
            base += p;
        }
        idx
    }

    /// Position in the y vector of the cell at (period offset, delivery),
    /// if the layout contains it.
    pub fn y_index(&self, period_offset: i64, delivery: usize) -> Option<usize> {
        self.y_slots()
            .iter()
            .position(|s| s.period_offset == period_offset && s.delivery == delivery)
    }
}

/// One frontier training example.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierSample {
    pub item: String,
    pub t: i64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Net bookings per (period, delivery) window; cells may be negative when
/// the source gross cube had cancellations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetCube {
    pub data: CubeData,
}

/// First differences along the delivery axis: `net[t][h] = q[t][h] - q[t][h+1]`,
/// with the boundary convention `net[t][H-1] = q[t][H-1]` (one row beyond the
/// horizon is zero), which makes [`accumulate`] an exact inverse.
pub fn difference(cube: &DemandCube) -> Result<NetCube> {
    if cube.semantics != Semantics::Gross {
        return Err(Error::AlreadyDifferenced);
    }
    let h = cube.data.horizon();
    let mut data = CubeData::new(
        cube.data.items().to_vec(),
        cube.data.first_period(),
        cube.data.n_periods(),
        h,
    );
    for i in 0..cube.data.items().len() {
        for t in cube.data.periods() {
            for j in 0..h {
                let next = if j + 1 < h { cube.data.get(i, t, j + 1) } else { 0 };
                data.set(i, t, j, cube.data.get(i, t, j) - next);
            }
        }
    }
    Ok(NetCube { data })
}

/// Suffix sums along the delivery axis: `q[t][h] = sum of net[t][f] for f >= h`.
/// Negative resulting gross cells are possible for inconsistent net inputs
/// and are flagged, not repaired.
pub fn accumulate(net: &NetCube) -> DemandCube {
    let h = net.data.horizon();
    let mut data = CubeData::new(
        net.data.items().to_vec(),
        net.data.first_period(),
        net.data.n_periods(),
        h,
    );
    let mut negatives = 0usize;
    for i in 0..net.data.items().len() {
        for t in net.data.periods() {
            let mut acc = 0i64;
            for j in (0..h).rev() {
                acc += net.data.get(i, t, j);
                if acc < 0 {
                    negatives += 1;
                }
                data.set(i, t, j, acc);
            }
        }
    }
    if negatives > 0 {
        log::warn!("accumulate produced {negatives} negative gross cells");
    }
    DemandCube {
        data,
        semantics: Semantics::Gross,
    }
}

impl DemandCube {
    /// Reinterprets a net-semantics cube as a [`NetCube`] so it can be
    /// accumulated into gross form.
    pub fn to_net(&self) -> Result<NetCube> {
        if self.semantics != Semantics::Net {
            return Err(Error::InvalidConfig(
                "cube does not have net semantics".into(),
            ));
        }
        Ok(NetCube {
            data: self.data.clone(),
        })
    }
}

/// Builds one frontier sample per eligible period `t` of the item:
/// `first + L <= t` and `t + H <= last`. A series too short for any
/// eligible frontier yields an empty list with a warning.
pub fn build_frontiers(data: &CubeData, item: usize, lags: usize) -> Vec<FrontierSample> {
    let layout = Layout::new(data.horizon(), lags);
    let first = data.first_period() + lags as i64;
    let last = data.last_period() - data.horizon() as i64;
    if first > last {
        log::warn!(
            "item `{}`: series of {} periods too short for horizon {} with {} lags",
            data.items()[item],
            data.n_periods(),
            data.horizon(),
            lags
        );
        return Vec::new();
    }
    let x_slots = layout.x_slots();
    let y_slots = layout.y_slots();
    let mut samples = Vec::with_capacity((last - first + 1) as usize);
    for t in first..=last {
        let x = x_slots
            .iter()
            .map(|s| data.get(item, t + s.period_offset, s.delivery) as f64)
            .collect();
        let y = y_slots
            .iter()
            .map(|s| data.get(item, t + s.period_offset, s.delivery) as f64)
            .collect();
        samples.push(FrontierSample {
            item: data.items()[item].clone(),
            t,
            x,
            y,
        });
    }
    samples
}

/// Row provenance of a pooled dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowKey {
    pub item: String,
    pub t: i64,
}

/// Row-stacked design and target matrices with per-row provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Matrix,
    pub x_labels: Vec<String>,
    pub y_labels: Vec<String>,
    pub rows: Vec<RowKey>,
}

/// Pools per-item frontier samples into one dataset. Row order is
/// deterministic: input item order, then `t` ascending.
pub fn pool_frontiers(
    groups: &[(String, Vec<FrontierSample>)],
    layout: &Layout,
) -> Result<Dataset> {
    let x_dim = layout.x_dim();
    let y_dim = layout.y_dim();
    let mut x_rows = Vec::new();
    let mut y_rows = Vec::new();
    let mut rows = Vec::new();
    for (item, samples) in groups {
        let mut sorted: Vec<&FrontierSample> = samples.iter().collect();
        sorted.sort_by_key(|s| s.t);
        for s in sorted {
            if s.x.len() != x_dim || s.y.len() != y_dim {
                return Err(Error::DimensionMismatch {
                    item: item.clone(),
                    expected: x_dim,
                    got: s.x.len(),
                });
            }
            x_rows.push(s.x.clone());
            y_rows.push(s.y.clone());
            rows.push(RowKey {
                item: item.clone(),
                t: s.t,
            });
        }
    }
    Ok(Dataset {
        x: if x_rows.is_empty() {
            Matrix::zeros(0, x_dim)
        } else {
            Matrix::from_rows(&x_rows)
        },
        y: if y_rows.is_empty() {
            Matrix::zeros(0, y_dim)
        } else {
            Matrix::from_rows(&y_rows)
        },
        x_labels: layout.x_labels(),
        y_labels: layout.y_labels(),
        rows,
    })
}

/// A predicted target vector anchored at one (item, frontier) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierForecast {
    pub item: String,
    pub t: i64,
    /// Post-processed integer predictions in y-slot order.
    pub y_hat: Vec<i64>,
}

/// One forecast observed for an absolute cell `q[period][delivery]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellVote {
    pub frontier_t: i64,
    pub value: i64,
}

/// All forecasts for one future cell. Overlapping frontiers predict the
/// same cell more than once; every vote is retained and `chosen` is the
/// vote from the latest frontier, which conditions on the most revealed
/// pre-orders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellForecast {
    pub item: String,
    pub period: i64,
    pub delivery: usize,
    pub votes: Vec<CellVote>,
    pub chosen: i64,
}

/// Reassembled forecast table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastTable {
    pub horizon: usize,
    /// Per (item, frontier): the full predicted vector plus its extracted
    /// main diagonal (earliest future volume per future period).
    pub frontiers: Vec<FrontierEntry>,
    pub cells: Vec<CellForecast>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierEntry {
    pub item: String,
    pub t: i64,
    pub y_hat: Vec<i64>,
    pub main_diagonal: Vec<i64>,
}

/// Reassembles per-frontier predictions into per-cell forecasts.
pub fn assemble_forecast(
    predictions: &[FrontierForecast],
    layout: &Layout,
) -> Result<ForecastTable> {
    let y_slots = layout.y_slots();
    let diag = layout.main_diagonal_indices();

    let mut frontiers = Vec::with_capacity(predictions.len());
    // (item, period, delivery) -> votes, keyed in first-appearance order
    let mut cell_order: Vec<(String, i64, usize)> = Vec::new();
    let mut votes: std::collections::BTreeMap<(String, i64, usize), Vec<CellVote>> =
        std::collections::BTreeMap::new();

    for p in predictions {
        if p.y_hat.len() != y_slots.len() {
            return Err(Error::LayoutMismatch {
                expected: y_slots.len(),
                got: p.y_hat.len(),
            });
        }
        frontiers.push(FrontierEntry {
            item: p.item.clone(),
            t: p.t,
            y_hat: p.y_hat.clone(),
            main_diagonal: diag.iter().map(|&i| p.y_hat[i]).collect(),
        });
        for (slot, &value) in y_slots.iter().zip(&p.y_hat) {
            let key = (p.item.clone(), p.t + slot.period_offset, slot.delivery);
            let entry = votes.entry(key.clone()).or_insert_with(|| {
                cell_order.push(key);
                Vec::new()
            });
            entry.push(CellVote {
                frontier_t: p.t,
                value,
            });
        }
    }

    let cells = cell_order
        .into_iter()
        .map(|key| {
            let mut cell_votes = votes.remove(&key).unwrap();
            cell_votes.sort_by_key(|v| v.frontier_t);
            let chosen = cell_votes.last().unwrap().value;
            CellForecast {
                item: key.0,
                period: key.1,
                delivery: key.2,
                votes: cell_votes,
                chosen,
            }
        })
        .collect();

    Ok(ForecastTable {
        horizon: layout.horizon,
        frontiers,
        cells,
    })
}

/// Sidecar description of a dataset's column layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutDescriptor {
    pub horizon: usize,
    pub lags: usize,
    pub x: Vec<SlotDescriptor>,
    pub y: Vec<SlotDescriptor>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotDescriptor {
    pub label: String,
    pub period_offset: i64,
    pub delivery_date: usize,
}

impl LayoutDescriptor {
    pub fn from_layout(layout: &Layout) -> Self {
        let describe = |slots: &[Slot], labels: &[String]| {
            slots
                .iter()
                .zip(labels)
                .map(|(s, l)| SlotDescriptor {
                    label: l.clone(),
                    period_offset: s.period_offset,
                    delivery_date: s.delivery,
                })
                .collect()
        };
        Self {
            horizon: layout.horizon,
            lags: layout.lags,
            x: describe(&layout.x_slots(), &layout.x_labels()),
            y: describe(&layout.y_slots(), &layout.y_labels()),
        }
    }
}

/// Writes a pooled dataset as CSV: provenance columns, features, targets.
pub fn write_dataset<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["item".to_string(), "t".to_string()];
    header.extend(dataset.x_labels.iter().cloned());
    header.extend(dataset.y_labels.iter().cloned());
    w.write_record(&header)?;
    for (i, key) in dataset.rows.iter().enumerate() {
        let mut rec = vec![key.item.clone(), key.t.to_string()];
        rec.extend(dataset.x.row(i).iter().map(|v| format_value(*v)));
        rec.extend(dataset.y.row(i).iter().map(|v| format_value(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 9e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
