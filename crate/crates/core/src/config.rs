//! Run configuration (TOML).
//!
//! Unknown keys are rejected. Relative paths are resolved against the
//! directory holding the config file; the config itself is stored verbatim in
//! every run manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::{
    default_label_rules, CutOptions, CutSelection, LabelRule, SilhouetteSampling,
};
use crate::dynamics::AbsentMode;
use crate::factor::{ActivityLabels, FactorOptions, PafOptions, RotationOptions};
use crate::ingest::github::FetchOptions;
use crate::ingest::{ProjectRef, TimeWindow};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub projects: Vec<ProjectRef>,
    pub window: TimeWindow,
    pub store_dir: PathBuf,
    pub output_dir: PathBuf,
    /// CSV with `email,login` columns mapping unlinked commit authors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alias_file: Option<PathBuf>,
    pub bots: BotConfig,
    pub api: ApiConfig,
    pub factor: FactorConfig,
    pub cluster: ClusterConfig,
    pub dynamics: DynamicsConfig,
    pub labels: LabelConfig,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            projects: Vec::new(),
            window: TimeWindow::default(),
            store_dir: PathBuf::from("store"),
            output_dir: PathBuf::from("out"),
            alias_file: None,
            bots: BotConfig::default(),
            api: ApiConfig::default(),
            factor: FactorConfig::default(),
            cluster: ClusterConfig::default(),
            dynamics: DynamicsConfig::default(),
            labels: LabelConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BotConfig {
    pub denylist: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApiConfig {
    pub base_url: String,
    pub web_host: String,
    /// Environment variable holding the API token.
    pub token_env: String,
    pub per_page: u32,
    pub workers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub requests_per_second: Option<f64>,
    pub max_retries: u32,
    /// Serve requests from recorded responses instead of the network.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay_dir: Option<PathBuf>,
}

impl Default for ApiConfig {
    fn default() -> Self {
        let f = FetchOptions::default();
        Self {
            base_url: f.base_url,
            web_host: f.web_host,
            token_env: "GITHUB_TOKEN".to_string(),
            per_page: f.per_page,
            workers: f.workers,
            requests_per_second: f.requests_per_second,
            max_retries: f.max_retries,
            replay_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactorConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub rotation_max_iter: usize,
    pub rotation_tol: f64,
}

impl Default for FactorConfig {
    fn default() -> Self {
        let (p, r) = (PafOptions::default(), RotationOptions::default());
        Self {
            tol: p.tol,
            max_iter: p.max_iter,
            rotation_max_iter: r.max_iter,
            rotation_tol: r.tol,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    Fixed,
    Silhouette,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    pub select: Selection,
    pub active_k: usize,
    pub supporting_k: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub silhouette_exact_limit: usize,
    pub silhouette_sample: usize,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        let s = SilhouetteSampling::default();
        Self {
            select: Selection::Fixed,
            active_k: 4,
            supporting_k: 5,
            k_min: 2,
            k_max: 8,
            silhouette_exact_limit: s.exact_limit,
            silhouette_sample: s.sample_size,
            seed: s.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    pub absent: AbsentMode,
    pub histogram_bins: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            absent: AbsentMode::Origin,
            histogram_bins: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelConfig {
    pub factors: Vec<String>,
    pub roles: Vec<LabelRule>,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            factors: ActivityLabels::default().0,
            roles: default_label_rules(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Directory relative paths are resolved against.
    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn store_path(&self) -> PathBuf {
        self.resolve(&self.store_dir)
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let c = &self.cluster;
        if c.k_min == 0 || c.k_min > c.k_max {
            return bad(format!(
                "cluster.k_min..k_max = {}..{} is not a valid range",
                c.k_min, c.k_max
            ));
        }
        if c.active_k == 0 || c.supporting_k == 0 {
            return bad("cluster.active_k and cluster.supporting_k must be positive".into());
        }
        if self.dynamics.histogram_bins == 0 {
            return bad("dynamics.histogram_bins must be positive".into());
        }
        if self.api.per_page == 0 || self.api.per_page > 100 {
            return bad(format!(
                "api.per_page = {} must be in 1..=100",
                self.api.per_page
            ));
        }
        if !(self.factor.tol > 0.0 && self.factor.rotation_tol > 0.0) {
            return bad("factor tolerances must be positive".into());
        }
        let mut seen = BTreeSet::new();
        for p in &self.projects {
            if !seen.insert(p) {
                return bad(format!("project {p} listed twice"));
            }
        }
        for r in &self.labels.roles {
            use crate::cluster::Predicate::*;
            if matches!(r.rule, HighestFactor | LowestFactor) && r.factor.is_none() {
                return bad(format!("label rule {:?} needs a factor", r.label));
            }
        }
        Ok(())
    }

    pub fn denylist(&self) -> BTreeSet<String> {
        self.bots
            .denylist
            .iter()
            .map(|s| s.to_lowercase())
            .collect()
    }

    pub fn fetch_options(&self) -> FetchOptions {
        FetchOptions {
            base_url: self.api.base_url.clone(),
            web_host: self.api.web_host.clone(),
            per_page: self.api.per_page,
            workers: self.api.workers.max(1),
            requests_per_second: self.api.requests_per_second,
            max_retries: self.api.max_retries,
            ..FetchOptions::default()
        }
    }

    pub fn factor_options(&self) -> FactorOptions {
        FactorOptions {
            paf: PafOptions {
                max_iter: self.factor.max_iter,
                tol: self.factor.tol,
            },
            rotation: RotationOptions {
                max_iter: self.factor.rotation_max_iter,
                tol: self.factor.rotation_tol,
                ..RotationOptions::default()
            },
        }
    }

    pub fn cut_options(&self, fixed_k: usize) -> CutOptions {
        let c = &self.cluster;
        CutOptions {
            selection: match c.select {
                Selection::Fixed => CutSelection::Fixed(fixed_k),
                Selection::Silhouette => CutSelection::Silhouette,
            },
            k_min: c.k_min,
            k_max: c.k_max,
            sampling: SilhouetteSampling {
                exact_limit: c.silhouette_exact_limit,
                sample_size: c.silhouette_sample,
                seed: c.seed,
            },
        }
    }

    pub fn activity_labels(&self) -> ActivityLabels {
        ActivityLabels(self.labels.factors.clone())
    }

    /// E-mail (lowercased) to login map from the alias file, if configured.
    pub fn aliases(&self) -> Result<BTreeMap<String, String>> {
        let Some(file) = &self.alias_file else {
            return Ok(BTreeMap::new());
        };
        let path = self.resolve(file);
        let mut r = csv::Reader::from_path(&path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut out = BTreeMap::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::Config(format!(
                    "{}: expected email,login rows",
                    path.display()
                )));
            }
            out.insert(rec[0].trim().to_lowercase(), rec[1].trim().to_string());
        }
        Ok(out)
    }
}
