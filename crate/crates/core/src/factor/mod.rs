//! Activity dimensions: standardization, principal-axis factoring, oblique
//! rotation and regression factor scores.

mod paf;
mod report;
mod rotate;
mod scores;
mod standardize;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use paf::{
    correlation_matrix, kaiser_count, paf_extract, paf_from_correlation,
    squared_multiple_correlations, PafOptions, PafResult, HEYWOOD_CAP,
};
pub use report::{
    loading_strength, read_loadings_csv, report_factors, write_loadings_csv, write_phi_csv,
    LoadingStrength, LoadingTable, MODERATE_LOADING, STRONG_LOADING,
};
pub use rotate::{orient_factors, rotate_oblimin, Rotation, RotationOptions};
pub use scores::{factor_scores, score_weights, RIDGE};
pub use standardize::{standardize, standardize_columns, PrunedColumn, StandardizedMatrix};

use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("need at least 2 data rows, got {0}")]
    InsufficientRows(usize),
    #[error("only {kept} column(s) have nonzero variance; need at least 2")]
    DegenerateMatrix { kept: usize },
    #[error("no factor has an eigenvalue above 1.0 (largest {largest_eigenvalue:.4})")]
    NoFactorsRetained { largest_eigenvalue: f64 },
    #[error("correlation matrix is singular even after ridge regularization")]
    SingularCorrelation,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FactorOptions {
    pub paf: PafOptions,
    pub rotation: RotationOptions,
}

/// Human labels for retained factors, by factor index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActivityLabels(pub Vec<String>);

impl ActivityLabels {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Configured label for factor `i` (0-based), else `Factor{i+1}`.
    pub fn label(&self, i: usize) -> String {
        self.0
            .get(i)
            .filter(|s| !s.trim().is_empty())
            .cloned()
            .unwrap_or_else(|| format!("Factor{}", i + 1))
    }

    pub fn labels(&self, k: usize) -> Vec<String> {
        (0..k).map(|i| self.label(i)).collect()
    }
}

impl Default for ActivityLabels {
    fn default() -> Self {
        Self(
            [
                "Knowledge Sharing",
                "Code Contribution",
                "Issue Coordination",
                "Progress Control",
                "Code Tweaking",
                "Issue Reporting",
            ]
            .map(String::from)
            .to_vec(),
        )
    }
}

/// A fitted factor model together with the scores of the rows it was fit on.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel {
    pub column_names: Vec<String>,
    pub kept_columns: Vec<usize>,
    pub pruned: Vec<PrunedColumn>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub unrotated: DMatrix<f64>,
    /// p x k pattern loadings.
    pub loadings: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub communalities: Vec<f64>,
    pub uniqueness: Vec<f64>,
    pub variance_explained: f64,
    /// p x k regression weights mapping z-scores to factor scores.
    pub score_weights: DMatrix<f64>,
    /// n x k.
    pub scores: DMatrix<f64>,
    pub paf_iterations: usize,
    pub paf_converged: bool,
    pub rotation_iterations: usize,
    pub rotation_converged: bool,
}

impl FactorModel {
    pub fn k(&self) -> usize {
        self.loadings.ncols()
    }
}

/// Extract, rotate and score.
pub fn fit_factor_model(
    z: &StandardizedMatrix,
    opts: FactorOptions,
) -> Result<FactorModel, FactorError> {
    let r = correlation_matrix(z);
    let extracted = paf_from_correlation(&r, opts.paf)?;
    let rotation = rotate_oblimin(&extracted.loadings, opts.rotation);
    let (mut pattern, mut phi) = (rotation.pattern, rotation.phi);
    orient_factors(&mut pattern, &mut phi);
    let weights = score_weights(&r, &pattern, &phi)?;
    let scores = &z.values * &weights;
    let p = z.ncols();
    let communalities = extracted.communalities.clone();
    let uniqueness = communalities.iter().map(|h| 1.0 - h).collect();
    let variance_explained = communalities.iter().sum::<f64>() / p as f64;
    Ok(FactorModel {
        column_names: z.column_names.clone(),
        kept_columns: z.kept_columns.clone(),
        pruned: z.pruned.clone(),
        means: z.means.clone(),
        sds: z.sds.clone(),
        eigenvalues: extracted.eigenvalues,
        unrotated: extracted.loadings,
        loadings: pattern,
        phi,
        communalities,
        uniqueness,
        variance_explained,
        score_weights: weights,
        scores,
        paf_iterations: extracted.iterations,
        paf_converged: extracted.converged,
        rotation_iterations: rotation.iterations,
        rotation_converged: rotation.converged,
    })
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn from_rows(rows: &[Vec<f64>], ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

/// Serialized form of a model (scores excluded).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorModelDoc {
    pub schema_version: u32,
    pub columns: Vec<String>,
    pub kept_columns: Vec<usize>,
    pub pruned: Vec<PrunedColumn>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub k: usize,
    pub factor_labels: Vec<String>,
    pub eigenvalues: Vec<f64>,
    /// Pattern loadings, one row per kept column.
    pub loadings: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub communalities: Vec<f64>,
    pub uniqueness: Vec<f64>,
    pub variance_explained: f64,
    pub score_weights: Vec<Vec<f64>>,
    pub paf_iterations: usize,
    pub paf_converged: bool,
    pub rotation_iterations: usize,
    pub rotation_converged: bool,
}

impl FactorModel {
    pub fn to_doc(&self, labels: &ActivityLabels) -> FactorModelDoc {
        FactorModelDoc {
            schema_version: SCHEMA_VERSION,
            columns: self.column_names.clone(),
            kept_columns: self.kept_columns.clone(),
            pruned: self.pruned.clone(),
            means: self.means.clone(),
            sds: self.sds.clone(),
            k: self.k(),
            factor_labels: labels.labels(self.k()),
            eigenvalues: self.eigenvalues.clone(),
            loadings: rows_of(&self.loadings),
            phi: rows_of(&self.phi),
            communalities: self.communalities.clone(),
            uniqueness: self.uniqueness.clone(),
            variance_explained: self.variance_explained,
            score_weights: rows_of(&self.score_weights),
            paf_iterations: self.paf_iterations,
            paf_converged: self.paf_converged,
            rotation_iterations: self.rotation_iterations,
            rotation_converged: self.rotation_converged,
        }
    }
}

impl FactorModelDoc {
    pub fn loadings_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.loadings, self.k)
    }

    pub fn phi_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.phi, self.k)
    }

    pub fn score_weight_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.score_weights, self.k)
    }
}
