//! Role trajectories over the analysis window, transition counts and role
//! change intensity.

mod rci;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{Group, RoleModel};
use crate::ingest::ProjectRef;

pub use rci::{
    rci, rci_summary, write_rci_csv, write_rci_histogram_csv, AbsentMode, HistogramBin, RciScore,
    RciSummary,
};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("no centroid for role {0}")]
    MissingCentroid(usize),
    #[error("no RCI scores in the population")]
    EmptyPopulation,
    #[error("invalid trajectory input: {0}")]
    InvalidInput(String),
}

/// One quarter of a trajectory. Serialized as 0 for Absent, else the role id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "usize", into = "usize")]
pub enum Slot {
    Absent,
    Role(usize),
}

impl Slot {
    /// Row/column index in a transition matrix: 0 for Absent.
    pub fn index(self) -> usize {
        match self {
            Slot::Absent => 0,
            Slot::Role(id) => id,
        }
    }
}

impl From<usize> for Slot {
    fn from(v: usize) -> Self {
        if v == 0 {
            Slot::Absent
        } else {
            Slot::Role(v)
        }
    }
}

impl From<Slot> for usize {
    fn from(s: Slot) -> usize {
        s.index()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleTrajectory {
    pub project: ProjectRef,
    pub login: String,
    pub sequence: Vec<Slot>,
}

impl RoleTrajectory {
    pub fn new(project: ProjectRef, login: impl Into<String>, sequence: Vec<Slot>) -> Self {
        Self {
            project,
            login: login.into(),
            sequence,
        }
    }

    /// Same non-Absent role in every period.
    pub fn is_constant(&self) -> bool {
        match self.sequence.first() {
            Some(&first @ Slot::Role(_)) => self.sequence.iter().all(|&s| s == first),
            _ => false,
        }
    }
}

/// One trajectory per (contributor, project), sorted by (project, login).
/// Periods without a data row are Absent.
pub fn build_trajectories(
    model: &RoleModel,
    periods: u32,
) -> Result<Vec<RoleTrajectory>, DynamicsError> {
    let mut map: BTreeMap<(&ProjectRef, &str), Vec<Slot>> = BTreeMap::new();
    for (key, &role) in model.keys.iter().zip(&model.assignment) {
        if key.period == 0 || key.period > periods {
            return Err(DynamicsError::InvalidInput(format!(
                "{}@{} has period {} outside 1..={periods}",
                key.login, key.project, key.period
            )));
        }
        let seq = map
            .entry((&key.project, key.login.as_str()))
            .or_insert_with(|| vec![Slot::Absent; periods as usize]);
        seq[key.period as usize - 1] = Slot::Role(role);
    }
    Ok(map
        .into_iter()
        .map(|((p, l), s)| RoleTrajectory::new(p.clone(), l, s))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopulationTag {
    RareOnly,
    SupportingOnly,
    EverActive,
}

impl PopulationTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PopulationTag::RareOnly => "rare_only",
            PopulationTag::SupportingOnly => "supporting_only",
            PopulationTag::EverActive => "ever_active",
        }
    }
}

impl fmt::Display for PopulationTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the dynamics stage needs to know about roles.
#[derive(Clone, Debug, PartialEq)]
pub struct RoleCatalog {
    pub groups: BTreeMap<usize, Group>,
    pub centroids: BTreeMap<usize, Vec<f64>>,
    pub labels: BTreeMap<usize, String>,
    pub rare: Option<usize>,
}

impl RoleCatalog {
    pub fn from_model(model: &RoleModel) -> Self {
        Self {
            groups: model.roles.iter().map(|r| (r.id, r.group)).collect(),
            centroids: model
                .roles
                .iter()
                .map(|r| (r.id, r.centroid.clone()))
                .collect(),
            labels: model
                .roles
                .iter()
                .map(|r| (r.id, r.label.clone()))
                .collect(),
            rare: model.rare_role(),
        }
    }

    pub fn role_count(&self) -> usize {
        self.groups.keys().max().copied().unwrap_or(0)
    }

    /// "Absent" followed by role labels, indexed like a transition matrix.
    pub fn slot_labels(&self) -> Vec<String> {
        let mut out = vec!["Absent".to_string()];
        out.extend((1..=self.role_count()).map(|id| {
            self.labels
                .get(&id)
                .cloned()
                .unwrap_or_else(|| format!("Role-{id}"))
        }));
        out
    }
}

/// Population tag plus whether the trajectory is dropped from dynamics
/// (constant non-Absent role in all periods).
pub fn tag_population(t: &RoleTrajectory, catalog: &RoleCatalog) -> (PopulationTag, bool) {
    let roles = t.sequence.iter().filter_map(|s| match s {
        Slot::Role(id) => Some(*id),
        Slot::Absent => None,
    });
    let mut ever_active = false;
    let mut only_rare = true;
    for id in roles {
        if catalog.groups.get(&id) == Some(&Group::Active) {
            ever_active = true;
        }
        if Some(id) != catalog.rare {
            only_rare = false;
        }
    }
    let tag = if ever_active {
        PopulationTag::EverActive
    } else if only_rare {
        PopulationTag::RareOnly
    } else {
        PopulationTag::SupportingOnly
    };
    (tag, t.is_constant())
}

/// Counts of consecutive-period pairs. Index 0 is Absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionMatrix {
    pub population: Option<PopulationTag>,
    pub counts: Vec<Vec<u64>>,
}

impl TransitionMatrix {
    pub fn zeros(roles: usize) -> Self {
        Self {
            population: None,
            counts: vec![vec![0; roles + 1]; roles + 1],
        }
    }

    pub fn size(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn add(&mut self, t: &RoleTrajectory) -> Result<(), DynamicsError> {
        for w in t.sequence.windows(2) {
            let (a, b) = (w[0].index(), w[1].index());
            if a >= self.size() || b >= self.size() {
                return Err(DynamicsError::InvalidInput(format!(
                    "role {} outside a {}-slot matrix",
                    a.max(b),
                    self.size()
                )));
            }
            self.counts[a][b] += 1;
        }
        Ok(())
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn column_totals(&self) -> Vec<u64> {
        (0..self.size())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    /// Off-diagonal transitions by descending count, then (from, to).
    pub fn top_transitions(&self, n: usize) -> Vec<(usize, usize, u64)> {
        let mut all: Vec<(usize, usize, u64)> = (0..self.size())
            .flat_map(|i| (0..self.size()).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j)
            .map(|(i, j)| (i, j, self.counts[i][j]))
            .filter(|&(_, _, c)| c > 0)
            .collect();
        all.sort_by(|a, b| b.2.cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
        all.truncate(n);
        all
    }
}

/// Transition counts over any set of trajectories.
pub fn count_transitions<'a>(
    trajectories: impl IntoIterator<Item = &'a RoleTrajectory>,
    roles: usize,
) -> Result<TransitionMatrix, DynamicsError> {
    let mut m = TransitionMatrix::zeros(roles);
    for t in trajectories {
        m.add(t)?;
    }
    Ok(m)
}

/// Transition counts for one population; excluded trajectories are skipped.
pub fn transition_matrix(
    trajectories: &[RoleTrajectory],
    catalog: &RoleCatalog,
    population: PopulationTag,
) -> Result<TransitionMatrix, DynamicsError> {
    let selected = trajectories
        .iter()
        .filter(|t| tag_population(t, catalog) == (population, false));
    let mut m = count_transitions(selected, catalog.role_count())?;
    m.population = Some(population);
    Ok(m)
}

/// Square CSV with a `from` column and one column per slot label.
pub fn write_transitions_csv<W: Write>(
    m: &TransitionMatrix,
    labels: &[String],
    out: W,
) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["from".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    for (i, row) in m.counts.iter().enumerate() {
        let mut rec = vec![labels[i].clone()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()
        .map_err(|e| crate::Error::io("<transitions>", e))?;
    Ok(())
}

pub fn read_transitions_csv<R: std::io::Read>(
    input: R,
) -> crate::Result<(Vec<String>, TransitionMatrix)> {
    let mut r = csv::Reader::from_reader(input);
    let labels: Vec<String> = r.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut counts = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<u64>().map_err(|e| crate::Error::Schema {
                    path: "transitions.csv".into(),
                    message: format!("bad count {s:?}: {e}"),
                })
            })
            .collect::<crate::Result<Vec<_>>>()?;
        counts.push(row);
    }
    Ok((
        labels,
        TransitionMatrix {
            population: None,
            counts,
        },
    ))
}

/// One JSON object per line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub project: ProjectRef,
    pub login: String,
    pub sequence: Vec<Slot>,
    pub population: PopulationTag,
    pub excluded: bool,
}

pub fn write_trajectories_jsonl<W: Write>(
    trajectories: &[RoleTrajectory],
    catalog: &RoleCatalog,
    mut out: W,
) -> crate::Result<()> {
    for t in trajectories {
        let (population, excluded) = tag_population(t, catalog);
        let rec = TrajectoryRecord {
            project: t.project.clone(),
            login: t.login.clone(),
            sequence: t.sequence.clone(),
            population,
            excluded,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")
            .map_err(|e| crate::Error::io("<trajectories>", e))?;
    }
    Ok(())
}
