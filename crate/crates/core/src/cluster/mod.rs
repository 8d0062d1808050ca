//! Ward clustering of factor scores, the Active/Supporting split,
//! silhouette-guided cuts and the labelled role model.

mod dendrogram;
mod roles;
mod silhouette;
mod ward;

use nalgebra::DMatrix;
use thiserror::Error;

pub use dendrogram::{Dendrogram, DendrogramDoc, Merge};
pub use roles::{
    build_role_model, cut_roles, default_label_rules, read_centroids_csv, split_groups,
    write_centroids_csv, write_silhouette_csv, CandidateSilhouette, CutOptions, CutSelection,
    Group, GroupPartition, GroupSplit, LabelRule, Predicate, Role, RoleAssignment, RoleModel,
    RoleModelDoc, SilhouetteReport, RARE_LABEL,
};
pub use silhouette::{silhouette, silhouette_from, SilhouetteSampling};
pub use ward::{ward_cluster, ward_distance};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("invalid cluster candidate range: {0}")]
    InvalidCandidateRange(String),
    #[error("label rules {first:?} and {second:?} both match role {role} at the same priority")]
    LabelRuleConflict {
        role: usize,
        first: String,
        second: String,
    },
    #[error("invalid dendrogram: {0}")]
    InvalidDendrogram(String),
    #[error("need at least 2 points to cluster, got {0}")]
    TooFewPoints(usize),
    #[error("invalid points: {0}")]
    InvalidPoints(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
}

/// Row-major point set in factor space.
#[derive(Clone, Debug, PartialEq)]
pub struct Points {
    data: Vec<f64>,
    dim: usize,
}

impl Points {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self, ClusterError> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(ClusterError::InvalidPoints(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(ClusterError::InvalidPoints(format!(
                "non-finite value in row {}",
                i / dim
            )));
        }
        Ok(Self { data, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ClusterError> {
        let dim = rows.first().map_or(1, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(ClusterError::InvalidPoints("rows differ in length".into()));
        }
        Self::new(rows.concat(), dim)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self, ClusterError> {
        let data = (0..m.nrows())
            .flat_map(|i| m.row(i).iter().copied().collect::<Vec<_>>())
            .collect();
        Self::new(data, m.ncols().max(1))
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn subset(&self, rows: &[usize]) -> Points {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Points {
            data,
            dim: self.dim,
        }
    }

    /// Mean of the given rows; the origin for an empty selection.
    pub fn centroid(&self, rows: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for &r in rows {
            for (acc, v) in c.iter_mut().zip(self.row(r)) {
                *acc += v;
            }
        }
        if !rows.is_empty() {
            c.iter_mut().for_each(|x| *x /= rows.len() as f64);
        }
        c
    }
}
