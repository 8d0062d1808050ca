use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{DynamicsError, PopulationTag, RoleCatalog, RoleTrajectory, Slot};
use crate::ingest::ProjectRef;
use crate::util::{euclidean, norm, quantile_sorted};

/// Where Absent sits in factor space when measuring role changes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsentMode {
    /// Absent is the origin, so leaving or returning counts.
    #[default]
    Origin,
    /// Steps into or out of Absent contribute nothing.
    Skip,
}

fn step(a: Slot, b: Slot, catalog: &RoleCatalog, mode: AbsentMode) -> Result<f64, DynamicsError> {
    let centroid = |id: usize| {
        catalog
            .centroids
            .get(&id)
            .ok_or(DynamicsError::MissingCentroid(id))
    };
    Ok(match (a, b) {
        (Slot::Absent, Slot::Absent) => 0.0,
        (Slot::Role(x), Slot::Role(y)) if x == y => 0.0,
        (Slot::Role(x), Slot::Role(y)) => euclidean(centroid(x)?, centroid(y)?),
        (Slot::Role(x), Slot::Absent) | (Slot::Absent, Slot::Role(x)) => match mode {
            AbsentMode::Origin => norm(centroid(x)?),
            AbsentMode::Skip => {
                centroid(x)?;
                0.0
            }
        },
    })
}

/// Role change intensity: log10 of the summed centroid distances between
/// consecutive periods. `None` when the sum is zero.
///
/// Terms are added in ascending order so the result is identical for a
/// trajectory and its reverse.
pub fn rci(
    t: &RoleTrajectory,
    catalog: &RoleCatalog,
    mode: AbsentMode,
) -> Result<Option<f64>, DynamicsError> {
    let mut terms = t
        .sequence
        .windows(2)
        .map(|w| step(w[0], w[1], catalog, mode))
        .collect::<Result<Vec<f64>, _>>()?;
    terms.sort_by(f64::total_cmp);
    let total: f64 = terms.iter().sum();
    Ok((total > 0.0).then(|| total.log10()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RciScore {
    pub project: ProjectRef,
    pub login: String,
    pub population: PopulationTag,
    pub excluded: bool,
    pub value: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RciSummary {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub histogram: Vec<HistogramBin>,
}

/// Quartiles (linear interpolation) and a fixed-width histogram over the
/// observed range.
pub fn rci_summary(values: &[f64], bins: usize) -> Result<RciSummary, DynamicsError> {
    if values.is_empty() {
        return Err(DynamicsError::EmptyPopulation);
    }
    if bins == 0 {
        return Err(DynamicsError::InvalidInput(
            "histogram needs at least one bin".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let width = (max - min) / bins as f64;
    let mut histogram: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lower: min + width * i as f64,
            upper: if i + 1 == bins {
                max
            } else {
                min + width * (i + 1) as f64
            },
            count: 0,
        })
        .collect();
    for &v in &sorted {
        let i = if width > 0.0 {
            (((v - min) / width) as usize).min(bins - 1)
        } else {
            0
        };
        histogram[i].count += 1;
    }
    Ok(RciSummary {
        count: sorted.len(),
        min,
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max,
        histogram,
    })
}

/// Columns: `project`, `login`, `population`, `excluded`, `rci` (empty when undefined).
pub fn write_rci_csv<W: Write>(scores: &[RciScore], out: W) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["project", "login", "population", "excluded", "rci"])?;
    for s in scores {
        w.write_record([
            s.project.to_string(),
            s.login.clone(),
            s.population.as_str().to_string(),
            s.excluded.to_string(),
            s.value.map_or_else(String::new, |v| v.to_string()),
        ])?;
    }
    w.flush().map_err(|e| crate::Error::io("<rci>", e))?;
    Ok(())
}

/// Columns: `bin`, `lower`, `upper`, `count`.
pub fn write_rci_histogram_csv<W: Write>(summary: &RciSummary, out: W) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin", "lower", "upper", "count"])?;
    for (i, b) in summary.histogram.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            b.lower.to_string(),
            b.upper.to_string(),
            b.count.to_string(),
        ])?;
    }
    w.flush().map_err(|e| crate::Error::io("<rci_hist>", e))?;
    Ok(())
}
