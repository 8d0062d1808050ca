use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::FactorError;
use crate::metrics::{Metric, MetricsMatrix, METRIC_COUNT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrunedColumn {
    pub index: usize,
    pub name: String,
    pub reason: String,
}

/// Column z-scores (population sd) with zero-variance columns removed.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardizedMatrix {
    /// n x p, kept columns only.
    pub values: DMatrix<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Original column index of each kept column.
    pub kept_columns: Vec<usize>,
    pub column_names: Vec<String>,
    pub pruned: Vec<PrunedColumn>,
}

impl StandardizedMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Standardize the 19 metric columns.
pub fn standardize(matrix: &MetricsMatrix) -> Result<StandardizedMatrix, FactorError> {
    let n = matrix.len();
    let data = DMatrix::from_row_slice(n, METRIC_COUNT, &matrix.values());
    let names: Vec<String> = Metric::ALL.iter().map(|m| m.key().to_string()).collect();
    standardize_columns(&data, &names)
}

/// Standardize arbitrary named columns.
pub fn standardize_columns(
    data: &DMatrix<f64>,
    names: &[String],
) -> Result<StandardizedMatrix, FactorError> {
    let (n, p) = data.shape();
    assert_eq!(names.len(), p, "one name per column");
    if n < 2 {
        return Err(FactorError::InsufficientRows(n));
    }
    let nf = n as f64;
    let mut kept = Vec::new();
    let mut pruned = Vec::new();
    let mut means = Vec::new();
    let mut sds = Vec::new();
    for j in 0..p {
        let col = data.column(j);
        let rough = col.sum() / nf;
        // second pass corrects the rounding of the first
        let mean = rough + col.iter().map(|x| x - rough).sum::<f64>() / nf;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf;
        let sd = var.sqrt();
        if !sd.is_finite() || sd <= 1e-12 * mean.abs().max(1.0) {
            log::warn!("pruning zero-variance column {}", names[j]);
            pruned.push(PrunedColumn {
                index: j,
                name: names[j].clone(),
                reason: "zero variance".to_string(),
            });
            continue;
        }
        kept.push(j);
        means.push(mean);
        sds.push(sd);
    }
    if kept.len() < 2 {
        return Err(FactorError::DegenerateMatrix { kept: kept.len() });
    }
    let values = DMatrix::from_fn(n, kept.len(), |i, c| {
        (data[(i, kept[c])] - means[c]) / sds[c]
    });
    Ok(StandardizedMatrix {
        values,
        column_names: kept.iter().map(|&j| names[j].clone()).collect(),
        means,
        sds,
        kept_columns: kept,
        pruned,
    })
}
