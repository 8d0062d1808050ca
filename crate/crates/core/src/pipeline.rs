//! End-to-end stages behind the `fetch`, `metrics` and `analyze` commands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cluster::{
    build_role_model, cut_roles, split_groups, ward_cluster, write_centroids_csv,
    write_silhouette_csv, Dendrogram, Group, GroupPartition, GroupSplit, Points, RoleModel,
};
use crate::config::RunConfig;
use crate::dynamics::{
    build_trajectories, rci, rci_summary, tag_population, transition_matrix, write_rci_csv,
    write_rci_histogram_csv, write_trajectories_jsonl, write_transitions_csv, PopulationTag,
    RciScore, RciSummary, RoleCatalog, RoleTrajectory, TransitionMatrix,
};
use crate::factor::{
    fit_factor_model, standardize, write_loadings_csv, write_phi_csv, FactorModel, LoadingTable,
};
use crate::ingest::github::{
    Clock, FetchReport, GitHubClient, HttpTransport, ManualClock, ReplayTransport, SystemClock,
    Transport,
};
use crate::ingest::{filter_bots, ActionEvent, EventStore};
use crate::metrics::{compute_metrics, read_matrix_csv, write_matrix_csv, MetricsMatrix};
use crate::util::{sha256_hex, write_atomic};
use crate::{Error, Result, SCHEMA_VERSION};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Artifacts written by `analyze`, in manifest order.
pub const ARTIFACTS: [&str; 13] = [
    "metrics.csv",
    "model.json",
    "loadings.csv",
    "phi.csv",
    "dendrogram.json",
    "roles.json",
    "centroids.csv",
    "silhouette.csv",
    "trajectories.jsonl",
    "transitions_supporting.csv",
    "transitions_active.csv",
    "rci.csv",
    "rci_hist.csv",
];

/// Fetch every configured project into the event store.
///
/// The API token is read from the environment variable named in the config.
/// With `api.replay_dir` set, recorded responses are served instead of the
/// network and rate-limit waits advance a virtual clock.
pub fn cmd_fetch(cfg: &RunConfig) -> Result<Vec<FetchReport>> {
    let (transport, clock): (Arc<dyn Transport>, Arc<dyn Clock>) = match &cfg.api.replay_dir {
        Some(dir) => (
            Arc::new(ReplayTransport::from_dir(&cfg.resolve(dir))?),
            Arc::new(ManualClock::new(chrono::Utc::now())),
        ),
        None => (Arc::new(HttpTransport::new()), Arc::new(SystemClock)),
    };
    let token = std::env::var(&cfg.api.token_env)
        .ok()
        .filter(|t| !t.trim().is_empty());
    fetch_with(cfg, transport, clock, token)
}

/// [`cmd_fetch`] with an explicit transport, clock and token.
pub fn fetch_with(
    cfg: &RunConfig,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    token: Option<String>,
) -> Result<Vec<FetchReport>> {
    if cfg.projects.is_empty() {
        return Err(Error::Config("no projects configured".into()));
    }
    let aliases = cfg.aliases()?;
    let client = GitHubClient::new(transport, clock, token, cfg.fetch_options());
    let mut store = EventStore::open(cfg.store_path())?;
    let mut reports = Vec::new();
    for project in &cfg.projects {
        let report = client.fetch_project(project, &cfg.window, &mut store, &aliases)?;
        log::info!("{project}: {} new events", report.new_events);
        reports.push(report);
    }
    Ok(reports)
}

/// Bot-filtered events of the configured projects (all projects when none
/// are configured).
pub fn load_events(cfg: &RunConfig) -> Result<Vec<ActionEvent>> {
    let root = cfg.store_path();
    if !root.is_dir() {
        log::warn!("event store {} does not exist", root.display());
        return Ok(Vec::new());
    }
    let store = EventStore::open(&root)?;
    let events: Vec<ActionEvent> = if cfg.projects.is_empty() {
        store.events()
    } else {
        cfg.projects
            .iter()
            .flat_map(|p| store.project_events(p))
            .collect()
    };
    let before = events.len();
    let events = filter_bots(events, &cfg.denylist());
    if events.len() < before {
        log::info!("dropped {} bot events", before - events.len());
    }
    Ok(events)
}

/// Metrics matrix from the store; [`Error::NoData`] when it has no rows.
pub fn build_metrics(cfg: &RunConfig) -> Result<MetricsMatrix> {
    let events = load_events(cfg)?;
    let matrix = compute_metrics(&events, &cfg.window);
    if matrix.is_empty() {
        return Err(Error::NoData);
    }
    Ok(matrix)
}

/// Compute metrics and write `metrics.csv` into the output directory.
pub fn cmd_metrics(cfg: &RunConfig) -> Result<PathBuf> {
    let matrix = build_metrics(cfg)?;
    let dir = cfg.output_path();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join("metrics.csv");
    let mut buf = Vec::new();
    write_matrix_csv(&matrix, &mut buf)?;
    write_atomic(&path, &buf).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Everything `analyze` computes.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub matrix: MetricsMatrix,
    pub model: FactorModel,
    pub factor_labels: Vec<String>,
    pub dendrogram: Dendrogram,
    pub split: GroupSplit,
    pub partitions: Vec<GroupPartition>,
    pub roles: RoleModel,
    pub trajectories: Vec<RoleTrajectory>,
    pub catalog: RoleCatalog,
    pub transitions_supporting: TransitionMatrix,
    pub transitions_active: TransitionMatrix,
    pub rci: Vec<RciScore>,
    pub rci_summary: Option<RciSummary>,
}

/// Factor, cluster and dynamics stages over a metrics matrix.
pub fn analyze_matrix(matrix: MetricsMatrix, cfg: &RunConfig) -> Result<Analysis> {
    if matrix.is_empty() {
        return Err(Error::NoData);
    }
    let z = standardize(&matrix)?;
    let model = fit_factor_model(&z, cfg.factor_options())?;
    let factor_labels = cfg.activity_labels().labels(model.k());
    log::info!(
        "retained {} factors explaining {:.1}% of variance",
        model.k(),
        100.0 * model.variance_explained
    );

    let points = Points::from_matrix(&model.scores)?;
    let dendrogram = ward_cluster(&points);
    let split = split_groups(&dendrogram, &points)?;
    let mut partitions = Vec::new();
    for (group, k) in [
        (Group::Active, cfg.cluster.active_k),
        (Group::Supporting, cfg.cluster.supporting_k),
    ] {
        let part = cut_roles(
            &dendrogram,
            split.node(group),
            group,
            &points,
            &cfg.cut_options(k),
        )?;
        log::info!("{group}: {} roles", part.clusters.len());
        partitions.push(part);
    }
    let keys: Vec<_> = matrix.keys().cloned().collect();
    let roles = build_role_model(
        &dendrogram,
        &points,
        &keys,
        &partitions,
        &cfg.labels.roles,
        &factor_labels,
    )?;

    let trajectories = build_trajectories(&roles, cfg.window.periods() as u32)?;
    let catalog = RoleCatalog::from_model(&roles);
    let transitions_supporting =
        transition_matrix(&trajectories, &catalog, PopulationTag::SupportingOnly)?;
    let transitions_active = transition_matrix(&trajectories, &catalog, PopulationTag::EverActive)?;
    let mut scores = Vec::with_capacity(trajectories.len());
    for t in &trajectories {
        let (population, excluded) = tag_population(t, &catalog);
        scores.push(RciScore {
            project: t.project.clone(),
            login: t.login.clone(),
            population,
            excluded,
            value: rci(t, &catalog, cfg.dynamics.absent)?,
        });
    }
    let active_values: Vec<f64> = scores
        .iter()
        .filter(|s| s.population == PopulationTag::EverActive && !s.excluded)
        .filter_map(|s| s.value)
        .collect();
    let summary = if active_values.is_empty() {
        log::warn!("no RCI scores in the ever-active population; histogram left empty");
        None
    } else {
        Some(rci_summary(&active_values, cfg.dynamics.histogram_bins)?)
    };

    Ok(Analysis {
        matrix,
        model,
        factor_labels,
        dendrogram,
        split,
        partitions,
        roles,
        trajectories,
        catalog,
        transitions_supporting,
        transitions_active,
        rci: scores,
        rci_summary: summary,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub rows: usize,
    pub factors: usize,
    pub variance_explained: f64,
    pub active_roles: usize,
    pub supporting_roles: usize,
    pub trajectories: usize,
    pub rci_median: Option<f64>,
}

/// `manifest.json`: tool versions, the full config, a summary and artifact
/// checksums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub summary: RunSummary,
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

fn render(a: &Analysis, cfg: &RunConfig) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let mut out = Vec::new();
    let mut buf = Vec::new();
    write_matrix_csv(&a.matrix, &mut buf)?;
    out.push(("metrics.csv", std::mem::take(&mut buf)));

    let labels = cfg.activity_labels();
    out.push(("model.json", pretty(&a.model.to_doc(&labels))?));
    let table = LoadingTable::from_model(&a.model, &labels);
    write_loadings_csv(&table, &mut buf)?;
    out.push(("loadings.csv", std::mem::take(&mut buf)));
    write_phi_csv(&table.factors, &a.model.phi, &mut buf)?;
    out.push(("phi.csv", std::mem::take(&mut buf)));

    out.push(("dendrogram.json", compact(&a.dendrogram.to_doc())?));
    out.push(("roles.json", compact(&a.roles.to_doc())?));
    write_centroids_csv(&a.roles, &mut buf)?;
    out.push(("centroids.csv", std::mem::take(&mut buf)));
    let reports: Vec<_> = a.partitions.iter().map(|p| &p.report).collect();
    write_silhouette_csv(&reports, &mut buf)?;
    out.push(("silhouette.csv", std::mem::take(&mut buf)));

    write_trajectories_jsonl(&a.trajectories, &a.catalog, &mut buf)?;
    out.push(("trajectories.jsonl", std::mem::take(&mut buf)));
    let slot_labels = a.catalog.slot_labels();
    write_transitions_csv(&a.transitions_supporting, &slot_labels, &mut buf)?;
    out.push(("transitions_supporting.csv", std::mem::take(&mut buf)));
    write_transitions_csv(&a.transitions_active, &slot_labels, &mut buf)?;
    out.push(("transitions_active.csv", std::mem::take(&mut buf)));
    write_rci_csv(&a.rci, &mut buf)?;
    out.push(("rci.csv", std::mem::take(&mut buf)));
    match &a.rci_summary {
        Some(s) => write_rci_histogram_csv(s, &mut buf)?,
        None => buf.extend_from_slice(b"bin,lower,upper,count\n"),
    }
    out.push(("rci_hist.csv", std::mem::take(&mut buf)));
    debug_assert_eq!(out.iter().map(|(n, _)| *n).collect::<Vec<_>>(), ARTIFACTS);
    Ok(out)
}

fn pretty<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

fn compact<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec(v)?;
    b.push(b'\n');
    Ok(b)
}

/// Write every artifact plus the manifest into `dir`.
///
/// Files are staged in a sibling directory and moved in only once all of them
/// were written, so a failure leaves `dir` as it was.
pub fn write_artifacts(a: &Analysis, cfg: &RunConfig, dir: &Path) -> Result<RunManifest> {
    let files = render(a, cfg)?;
    let mut artifacts = BTreeMap::new();
    for (name, bytes) in &files {
        artifacts.insert(
            name.to_string(),
            ArtifactEntry {
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            },
        );
    }
    let count = |g: Group| a.roles.roles.iter().filter(|r| r.group == g).count();
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        summary: RunSummary {
            rows: a.matrix.len(),
            factors: a.model.k(),
            variance_explained: a.model.variance_explained,
            active_roles: count(Group::Active),
            supporting_roles: count(Group::Supporting),
            trajectories: a.trajectories.len(),
            rci_median: a.rci_summary.as_ref().map(|s| s.median),
        },
        artifacts,
    };
    let manifest_bytes = pretty(&manifest)?;

    let staging = staging_dir(dir);
    let result = (|| -> Result<()> {
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        for (name, bytes) in files
            .iter()
            .map(|(n, b)| (*n, b))
            .chain([(MANIFEST_FILE, &manifest_bytes)])
        {
            let p = staging.join(name);
            fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        }
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for name in ARTIFACTS.iter().chain([&MANIFEST_FILE]) {
            let (from, to) = (staging.join(name), dir.join(name));
            fs::rename(&from, &to).map_err(|e| Error::io(&to, e))?;
        }
        Ok(())
    })();
    let _ = fs::remove_dir_all(&staging);
    result.map(|()| manifest)
}

fn staging_dir(dir: &Path) -> PathBuf {
    let name = dir
        .file_name()
        .map_or_else(|| "out".into(), |n| n.to_string_lossy().into_owned());
    dir.with_file_name(format!(".{name}.partial"))
}

/// Run the whole analysis and write artifacts to the configured output
/// directory. With `metrics` set, the matrix is read from that CSV instead of
/// being recomputed from the store.
pub fn cmd_analyze(cfg: &RunConfig, metrics: Option<&Path>) -> Result<RunManifest> {
    let matrix = match metrics {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            read_matrix_csv(file, path)?
        }
        None => build_metrics(cfg)?,
    };
    let analysis = analyze_matrix(matrix, cfg)?;
    write_artifacts(&analysis, cfg, &cfg.output_path())
}
