//! Spearman rank correlation and the pooled slot-pair correlation table.
//!
//! Rank correlation is the right diagnostic for zero-inflated volume data:
//! it is invariant under monotone transformations and insensitive to scale.
//! Ties (heavy at zero) receive average ranks.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagonal::Dataset;
use crate::{Error, Result};

/// Average ranks (1-based); tied values receive the mean of their rank range.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share the mean rank
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return None;
    }
    Some(cov / (var_a * var_b).sqrt())
}

/// Spearman rank correlation with mid-rank tie handling.
///
/// Returns `Ok(None)` when either vector is constant — the correlation is
/// undefined there and a fabricated zero would be misleading.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::TooFewObservations(a.len()));
    }
    Ok(pearson(&average_ranks(a), &average_ranks(b)))
}

/// Square rank-correlation table over labeled columns. Entries for constant
/// columns are `None` and surfaced as `NA` in the CSV output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrTable {
    pub labels: Vec<String>,
    pub entries: Vec<Vec<Option<f64>>>,
}

impl CorrTable {
    pub fn get(&self, row_label: &str, col_label: &str) -> Option<f64> {
        let r = self.labels.iter().position(|l| l == row_label)?;
        let c = self.labels.iter().position(|l| l == col_label)?;
        self.entries[r][c]
    }
}

/// Rank correlation between every pair of pooled columns (features and
/// targets), computed across all items and frontiers.
pub fn correlation_table(dataset: &Dataset) -> Result<CorrTable> {
    let n = dataset.x.rows();
    if n < 2 {
        return Err(Error::TooFewObservations(n));
    }
    let mut labels = dataset.x_labels.clone();
    labels.extend(dataset.y_labels.iter().cloned());

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(labels.len());
    for c in 0..dataset.x.cols() {
        columns.push(dataset.x.column(c));
    }
    for c in 0..dataset.y.cols() {
        columns.push(dataset.y.column(c));
    }

    // rank once per column, correlate per pair
    let ranked: Vec<Vec<f64>> = columns.par_iter().map(|c| average_ranks(c)).collect();
    let k = ranked.len();
    let entries: Vec<Vec<Option<f64>>> = (0..k)
        .into_par_iter()
        .map(|i| {
            (0..k)
                .map(|j| pearson(&ranked[i], &ranked[j]))
                .collect::<Vec<_>>()
        })
        .collect();

    Ok(CorrTable { labels, entries })
}

/// Writes a correlation table as CSV with slot labels as headers; undefined
/// entries (constant columns) appear as `NA`.
pub fn write_corr_table<W: Write>(table: &CorrTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["slot".to_string()];
    header.extend(table.labels.iter().cloned());
    w.write_record(&header)?;
    for (label, row) in table.labels.iter().zip(&table.entries) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(|e| match e {
            Some(v) => format!("{v:.6}"),
            None => "NA".to_string(),
        }));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagonal::RowKey;
    use crate::matrix::Matrix;
    use proptest::prelude::*;

    #[test]
    fn perfect_monotone_is_one() {
        let r = spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(r, Some(1.0));
    }

    #[test]
    fn perfect_antitone_is_minus_one() {
        let r = spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(r, Some(-1.0));
    }

    #[test]
    fn tied_ranks_use_the_mid_rank() {
        // ranks (1.5, 1.5, 3) vs (1, 2, 3): Pearson = 1.5 / sqrt(1.5 * 2)
        let r = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0])
            .unwrap()
            .unwrap();
        assert!((r - 0.8660).abs() < 1e-4);
    }

    #[test]
    fn constant_vector_yields_sentinel() {
        let r = spearman(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r, None);
    }

    #[test]
    fn errors_on_bad_shapes() {
        assert!(matches!(
            spearman(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch(1, 2))
        ));
        assert!(matches!(
            spearman(&[1.0], &[1.0]),
            Err(Error::TooFewObservations(1))
        ));
    }

    fn tiny_dataset(x_cols: Vec<Vec<f64>>, y_cols: Vec<Vec<f64>>) -> Dataset {
        let n = x_cols[0].len();
        let x_rows: Vec<Vec<f64>> = (0..n)
            .map(|r| x_cols.iter().map(|c| c[r]).collect())
            .collect();
        let y_rows: Vec<Vec<f64>> = (0..n)
            .map(|r| y_cols.iter().map(|c| c[r]).collect())
            .collect();
        Dataset {
            x: Matrix::from_rows(&x_rows),
            y: Matrix::from_rows(&y_rows),
            x_labels: (0..x_cols.len()).map(|i| format!("x{i}")).collect(),
            y_labels: (0..y_cols.len()).map(|i| format!("y{i}")).collect(),
            rows: (0..n)
                .map(|i| RowKey {
                    item: "A".into(),
                    t: i as i64,
                })
                .collect(),
        }
    }

    #[test]
    fn diagonal_entries_are_one() {
        let d = tiny_dataset(
            vec![vec![1.0, 2.0, 3.0, 1.0]],
            vec![vec![4.0, 1.0, 2.0, 2.0]],
        );
        let table = correlation_table(&d).unwrap();
        assert_eq!(table.get("x0", "x0"), Some(1.0));
        assert_eq!(table.get("y0", "y0"), Some(1.0));
    }

    #[test]
    fn table_is_invariant_under_positive_scaling() {
        let d = tiny_dataset(
            vec![vec![1.0, 5.0, 2.0, 9.0], vec![3.0, 1.0, 4.0, 1.0]],
            vec![vec![2.0, 8.0, 1.0, 4.0]],
        );
        let scaled = tiny_dataset(
            vec![
                vec![7.0, 35.0, 14.0, 63.0],
                vec![0.3, 0.1, 0.4, 0.1],
            ],
            vec![vec![200.0, 800.0, 100.0, 400.0]],
        );
        let a = correlation_table(&d).unwrap();
        let b = correlation_table(&scaled).unwrap();
        assert_eq!(a.entries, b.entries);
    }

    #[test]
    fn constant_column_is_flagged_na() {
        let d = tiny_dataset(
            vec![vec![5.0, 5.0, 5.0, 5.0], vec![1.0, 2.0, 3.0, 4.0]],
            vec![vec![2.0, 8.0, 1.0, 4.0]],
        );
        let table = correlation_table(&d).unwrap();
        assert_eq!(table.get("x0", "x1"), None);
        assert_eq!(table.get("x0", "x0"), None);
        assert!(table.get("x1", "y0").is_some());

        let mut buf = Vec::new();
        write_corr_table(&table, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("NA"));
    }

    proptest! {
        #[test]
        fn monotone_transforms_leave_spearman_unchanged(
            values in proptest::collection::vec((0i32..1000, 0i32..1000), 3..40),
            scale_a in 0.1f64..10.0,
            scale_b in 0.1f64..10.0,
        ) {
            // integer-valued inputs so strict order survives the maps exactly
            let a: Vec<f64> = values.iter().map(|(x, _)| *x as f64).collect();
            let b: Vec<f64> = values.iter().map(|(_, y)| *y as f64).collect();
            // strictly increasing maps: affine and exp-based
            let fa: Vec<f64> = a.iter().map(|v| v * scale_a + 3.0).collect();
            let gb: Vec<f64> = b.iter().map(|v| (v * scale_b * 0.01).exp()).collect();
            let base = spearman(&a, &b).unwrap();
            let mapped = spearman(&fa, &gb).unwrap();
            match (base, mapped) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                (None, None) => {}
                other => prop_assert!(false, "sentinel mismatch: {other:?}"),
            }
        }

        #[test]
        fn self_correlation_is_one_and_antisymmetry_holds(
            a in proptest::collection::vec(-50.0f64..50.0, 2..30)
        ) {
            let distinct = a.iter().any(|&v| v != a[0]);
            prop_assume!(distinct);
            let own = spearman(&a, &a).unwrap().unwrap();
            prop_assert!((own - 1.0).abs() < 1e-12);
            let neg: Vec<f64> = a.iter().map(|v| -v).collect();
            let anti = spearman(&a, &neg).unwrap().unwrap();
            prop_assert!((anti + 1.0).abs() < 1e-12);
        }
    }
}
