use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::{ActivityLabels, FactorModel};
use crate::{Error, Result};

/// Loadings at or above this magnitude are flagged strong.
pub const STRONG_LOADING: f64 = 0.5;
/// Loadings above this magnitude (and below strong) are flagged moderate.
pub const MODERATE_LOADING: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadingStrength {
    Strong,
    Moderate,
}

impl LoadingStrength {
    pub fn as_str(self) -> &'static str {
        match self {
            LoadingStrength::Strong => "strong",
            LoadingStrength::Moderate => "moderate",
        }
    }
}

pub fn loading_strength(value: f64) -> Option<LoadingStrength> {
    let a = value.abs();
    if a >= STRONG_LOADING {
        Some(LoadingStrength::Strong)
    } else if a > MODERATE_LOADING {
        Some(LoadingStrength::Moderate)
    } else {
        None
    }
}

/// Metric x factor loadings with communality and uniqueness columns.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadingTable {
    pub metrics: Vec<String>,
    pub factors: Vec<String>,
    pub loadings: DMatrix<f64>,
    pub communalities: Vec<f64>,
    pub uniqueness: Vec<f64>,
}

impl LoadingTable {
    pub fn from_model(model: &FactorModel, labels: &ActivityLabels) -> Self {
        Self {
            metrics: model.column_names.clone(),
            factors: labels.labels(model.k()),
            loadings: model.loadings.clone(),
            communalities: model.communalities.clone(),
            uniqueness: model.uniqueness.clone(),
        }
    }

    pub fn flagged(&self, strength: LoadingStrength, row: usize) -> Vec<&str> {
        (0..self.factors.len())
            .filter(|&j| loading_strength(self.loadings[(row, j)]) == Some(strength))
            .map(|j| self.factors[j].as_str())
            .collect()
    }
}

/// Columns: `metric`, one per factor, `h2`, `u2`, `strong`, `moderate`.
/// The flag columns list factor labels joined with `;`.
pub fn write_loadings_csv<W: Write>(table: &LoadingTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["metric".to_string()];
    header.extend(table.factors.iter().cloned());
    header.extend(["h2", "u2", "strong", "moderate"].map(String::from));
    w.write_record(&header)?;
    for (i, metric) in table.metrics.iter().enumerate() {
        let mut rec = vec![metric.clone()];
        rec.extend((0..table.factors.len()).map(|j| table.loadings[(i, j)].to_string()));
        rec.push(table.communalities[i].to_string());
        rec.push(table.uniqueness[i].to_string());
        rec.push(table.flagged(LoadingStrength::Strong, i).join(";"));
        rec.push(table.flagged(LoadingStrength::Moderate, i).join(";"));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<loadings>", e))?;
    Ok(())
}

pub fn read_loadings_csv<R: Read>(input: R) -> Result<LoadingTable> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let bad = |m: String| Error::Schema {
        path: PathBuf::from("loadings.csv"),
        message: m,
    };
    if header.len() < 5
        || header[0] != "metric"
        || header[header.len() - 4..] != ["h2", "u2", "strong", "moderate"]
    {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let factors: Vec<String> = header[1..header.len() - 4].to_vec();
    let k = factors.len();
    let mut metrics = Vec::new();
    let mut cells = Vec::new();
    let mut h2 = Vec::new();
    let mut u2 = Vec::new();
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| bad(format!("bad number {s:?}: {e}")))
    };
    for rec in r.records() {
        let rec = rec?;
        metrics.push(rec[0].to_string());
        for j in 0..k {
            cells.push(num(&rec[1 + j])?);
        }
        h2.push(num(&rec[1 + k])?);
        u2.push(num(&rec[2 + k])?);
    }
    Ok(LoadingTable {
        loadings: DMatrix::from_row_slice(metrics.len(), k, &cells),
        metrics,
        factors,
        communalities: h2,
        uniqueness: u2,
    })
}

/// Square factor-correlation table with labels on both axes.
pub fn write_phi_csv<W: Write>(factors: &[String], phi: &DMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["factor".to_string()];
    header.extend(factors.iter().cloned());
    w.write_record(&header)?;
    for (i, name) in factors.iter().enumerate() {
        let mut rec = vec![name.clone()];
        rec.extend((0..factors.len()).map(|j| phi[(i, j)].to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<phi>", e))?;
    Ok(())
}

/// Write `loadings.csv` and `phi.csv` into `dir`.
pub fn report_factors(
    model: &FactorModel,
    labels: &ActivityLabels,
    dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    let table = LoadingTable::from_model(model, labels);
    let loadings_path = dir.join("loadings.csv");
    let phi_path = dir.join("phi.csv");
    let mut buf = Vec::new();
    write_loadings_csv(&table, &mut buf)?;
    std::fs::write(&loadings_path, &buf).map_err(|e| Error::io(&loadings_path, e))?;
    buf.clear();
    write_phi_csv(&table.factors, &model.phi, &mut buf)?;
    std::fs::write(&phi_path, &buf).map_err(|e| Error::io(&phi_path, e))?;
    Ok((loadings_path, phi_path))
}
