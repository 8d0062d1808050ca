use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::silhouette::{nested_silhouettes, SilhouetteSampling};
use super::{ClusterError, Dendrogram, Points};
use crate::ingest::ProjectRef;
use crate::metrics::RowKey;
use crate::util::norm;
use crate::SCHEMA_VERSION;

/// Label that marks the low-activity role used for population tagging.
pub const RARE_LABEL: &str = "Rare Contributor";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Active,
    Supporting,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Active => "active",
            Group::Supporting => "supporting",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Active => "Active",
            Group::Supporting => "Supporting",
        })
    }
}

/// The two subtrees under the root merge.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSplit {
    pub active: usize,
    pub supporting: usize,
    pub active_centroid: Vec<f64>,
    pub supporting_centroid: Vec<f64>,
}

impl GroupSplit {
    pub fn node(&self, group: Group) -> usize {
        match group {
            Group::Active => self.active,
            Group::Supporting => self.supporting,
        }
    }
}

/// Cut at the root; the side whose centroid lies farther from the origin is
/// Active. An exact tie goes to the side holding the lowest leaf.
pub fn split_groups(d: &Dendrogram, points: &Points) -> Result<GroupSplit, ClusterError> {
    if d.n_leaves() < 2 {
        return Err(ClusterError::TooFewPoints(d.n_leaves()));
    }
    if points.len() != d.n_leaves() {
        return Err(ClusterError::InvalidPoints(format!(
            "{} points for a tree over {} leaves",
            points.len(),
            d.n_leaves()
        )));
    }
    let sides = d.cut_node(d.root(), 2)?;
    let c0 = points.centroid(&d.leaves(sides[0]));
    let c1 = points.centroid(&d.leaves(sides[1]));
    Ok(if norm(&c1) > norm(&c0) {
        GroupSplit {
            active: sides[1],
            supporting: sides[0],
            active_centroid: c1,
            supporting_centroid: c0,
        }
    } else {
        GroupSplit {
            active: sides[0],
            supporting: sides[1],
            active_centroid: c0,
            supporting_centroid: c1,
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutSelection {
    /// Use this many clusters; candidates are still scored for the report.
    Fixed(usize),
    /// Pick the candidate with the highest mean silhouette.
    Silhouette,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CutOptions {
    pub selection: CutSelection,
    pub k_min: usize,
    pub k_max: usize,
    pub sampling: SilhouetteSampling,
}

impl CutOptions {
    pub fn fixed(k: usize) -> Self {
        Self {
            selection: CutSelection::Fixed(k),
            ..Self::silhouette(2, 8)
        }
    }

    pub fn silhouette(k_min: usize, k_max: usize) -> Self {
        Self {
            selection: CutSelection::Silhouette,
            k_min,
            k_max,
            sampling: SilhouetteSampling::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSilhouette {
    pub k: usize,
    /// `None` when the cut has a single cluster.
    pub mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SilhouetteReport {
    pub group: Group,
    pub candidates: Vec<CandidateSilhouette>,
    pub selected_k: usize,
    pub sampled: bool,
    /// Leaf ids that were scored.
    pub evaluated: Vec<usize>,
    /// Per-point silhouettes of the selected cut, aligned with `evaluated`.
    pub values: Vec<f64>,
}

impl SilhouetteReport {
    pub fn mean_for(&self, k: usize) -> Option<f64> {
        self.candidates
            .iter()
            .find(|c| c.k == k)
            .and_then(|c| c.mean)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupPartition {
    pub group: Group,
    pub node: usize,
    /// Cluster root nodes, ordered by lowest leaf.
    pub clusters: Vec<usize>,
    pub report: SilhouetteReport,
}

/// Cut the subtree at `node` into roles.
pub fn cut_roles(
    d: &Dendrogram,
    node: usize,
    group: Group,
    points: &Points,
    opts: &CutOptions,
) -> Result<GroupPartition, ClusterError> {
    let available = d.size(node);
    if opts.k_min == 0 || opts.k_min > opts.k_max {
        return Err(ClusterError::InvalidCandidateRange(format!(
            "k range {}..={} is empty or starts at 0",
            opts.k_min, opts.k_max
        )));
    }
    let mut ks: Vec<usize> = (opts.k_min..=opts.k_max).collect();
    match opts.selection {
        CutSelection::Silhouette => {
            if opts.k_max > available {
                return Err(ClusterError::InvalidCandidateRange(format!(
                    "{group} subtree has {available} points, fewer than k_max = {}",
                    opts.k_max
                )));
            }
        }
        CutSelection::Fixed(k) => {
            if k == 0 || k > available {
                return Err(ClusterError::InvalidCandidateRange(format!(
                    "{group} subtree has {available} points; cannot cut into {k}"
                )));
            }
            ks.retain(|&c| c <= available);
            if !ks.contains(&k) {
                ks.push(k);
                ks.sort_unstable();
            }
        }
    }
    if ks.contains(&1) {
        log::warn!("{group}: silhouette is undefined for k = 1; candidate skipped");
    }
    let scored: Vec<usize> = ks.iter().copied().filter(|&k| k >= 2).collect();
    if scored.is_empty() && opts.selection == CutSelection::Silhouette {
        return Err(ClusterError::InvalidCandidateRange(format!(
            "no candidate k >= 2 in {}..={}",
            opts.k_min, opts.k_max
        )));
    }

    let members = d.leaves(node);
    let position: BTreeMap<usize, usize> =
        members.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let k_fine = *ks.last().unwrap();
    let fine_roots = d.cut_node(node, k_fine)?;
    let mut fine = vec![0usize; members.len()];
    for (c, &r) in fine_roots.iter().enumerate() {
        for l in d.leaves(r) {
            fine[position[&l]] = c;
        }
    }
    let mut coarse_roots = Vec::with_capacity(scored.len());
    let mut maps = Vec::with_capacity(scored.len());
    for &k in &scored {
        let roots = d.cut_node(node, k)?;
        let mut coarse_of_leaf = BTreeMap::new();
        for (c, &r) in roots.iter().enumerate() {
            for l in d.leaves(r) {
                coarse_of_leaf.insert(l, c);
            }
        }
        maps.push(
            fine_roots
                .iter()
                .map(|&fr| coarse_of_leaf[&d.leaves(fr)[0]])
                .collect::<Vec<_>>(),
        );
        coarse_roots.push(roots);
    }
    let scores = nested_silhouettes(points, &members, &fine, &maps, opts.sampling);

    let means: Vec<f64> = scores
        .values
        .iter()
        .map(|v| v.iter().sum::<f64>() / v.len().max(1) as f64)
        .collect();
    let candidates: Vec<CandidateSilhouette> = ks
        .iter()
        .map(|&k| CandidateSilhouette {
            k,
            mean: scored.iter().position(|&s| s == k).map(|i| means[i]),
        })
        .collect();
    let selected_k = match opts.selection {
        CutSelection::Fixed(k) => k,
        CutSelection::Silhouette => {
            let mut best = 0;
            for i in 1..scored.len() {
                if means[i] > means[best] {
                    best = i;
                }
            }
            scored[best]
        }
    };
    let (clusters, values) = match scored.iter().position(|&k| k == selected_k) {
        Some(i) => (coarse_roots[i].clone(), scores.values[i].clone()),
        None => (d.cut_node(node, selected_k)?, Vec::new()),
    };
    let evaluated = if values.is_empty() {
        Vec::new()
    } else {
        scores.evaluated.iter().map(|&e| members[e]).collect()
    };
    Ok(GroupPartition {
        group,
        node,
        clusters,
        report: SilhouetteReport {
            group,
            candidates,
            selected_k,
            sampled: scores.sampled,
            evaluated,
            values,
        },
    })
}

/// Predicate evaluated over a group's still-unlabelled roles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    HighestFactor,
    LowestFactor,
    HighestNorm,
    LowestNorm,
    /// Sum of the centroid's factor scores.
    HighestTotal,
    LowestTotal,
    /// Every open role; numbered when more than one matches.
    Remaining,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRule {
    pub label: String,
    pub group: Group,
    pub rule: Predicate,
    /// Factor label for the factor predicates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<String>,
    /// Lower runs first. Defaults to the rule's position in the list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<i64>,
}

impl LabelRule {
    fn new(label: &str, group: Group, rule: Predicate, factor: Option<&str>) -> Self {
        Self {
            label: label.to_string(),
            group,
            rule,
            factor: factor.map(str::to_string),
            priority: None,
        }
    }
}

/// Rules naming the nine roles by their activity profiles.
pub fn default_label_rules() -> Vec<LabelRule> {
    use Group::*;
    use Predicate::*;
    vec![
        LabelRule::new(
            "Intense Code Contributor",
            Active,
            HighestFactor,
            Some("Code Contribution"),
        ),
        LabelRule::new(
            "Coordinator",
            Active,
            HighestFactor,
            Some("Issue Coordination"),
        ),
        LabelRule::new(
            "Core Developer",
            Active,
            HighestFactor,
            Some("Progress Control"),
        ),
        LabelRule::new("All-Rounder", Active, Remaining, None),
        LabelRule::new(RARE_LABEL, Supporting, LowestTotal, None),
        LabelRule::new(
            "Engaged Issue Reporter",
            Supporting,
            HighestFactor,
            Some("Issue Reporting"),
        ),
        LabelRule::new(
            "Progress Controller",
            Supporting,
            HighestFactor,
            Some("Progress Control"),
        ),
        LabelRule::new(
            "Issue Fixer",
            Supporting,
            HighestFactor,
            Some("Code Tweaking"),
        ),
        LabelRule::new("Occasional Issue Reporter", Supporting, Remaining, None),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Role {
    /// 1-based; Active roles come first.
    pub id: usize,
    pub group: Group,
    pub label: String,
    pub centroid: Vec<f64>,
    pub size: usize,
    /// Dendrogram node the role's members hang under.
    pub node: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoleModel {
    pub factor_labels: Vec<String>,
    pub roles: Vec<Role>,
    pub keys: Vec<RowKey>,
    /// Role id per row, aligned with `keys`.
    pub assignment: Vec<usize>,
}

impl RoleModel {
    pub fn role(&self, id: usize) -> Option<&Role> {
        id.checked_sub(1).and_then(|i| self.roles.get(i))
    }

    /// The role labelled as rare, else the Supporting role with the lowest score total.
    pub fn rare_role(&self) -> Option<usize> {
        if let Some(r) = self.roles.iter().find(|r| r.label == RARE_LABEL) {
            return Some(r.id);
        }
        self.roles
            .iter()
            .filter(|r| r.group == Group::Supporting)
            .min_by(|a, b| {
                total(&a.centroid)
                    .total_cmp(&total(&b.centroid))
                    .then(a.id.cmp(&b.id))
            })
            .map(|r| r.id)
    }

    pub fn to_doc(&self) -> RoleModelDoc {
        RoleModelDoc {
            schema_version: SCHEMA_VERSION,
            factor_labels: self.factor_labels.clone(),
            roles: self.roles.clone(),
            assignment: self
                .keys
                .iter()
                .zip(&self.assignment)
                .map(|(k, &role)| RoleAssignment {
                    project: k.project.clone(),
                    login: k.login.clone(),
                    period: k.period,
                    role,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleAssignment {
    pub project: ProjectRef,
    pub login: String,
    pub period: u32,
    pub role: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleModelDoc {
    pub schema_version: u32,
    pub factor_labels: Vec<String>,
    pub roles: Vec<Role>,
    pub assignment: Vec<RoleAssignment>,
}

impl RoleModelDoc {
    pub fn into_model(self) -> RoleModel {
        let (keys, assignment) = self
            .assignment
            .into_iter()
            .map(|a| {
                (
                    RowKey {
                        project: a.project,
                        login: a.login,
                        period: a.period,
                    },
                    a.role,
                )
            })
            .unzip();
        RoleModel {
            factor_labels: self.factor_labels,
            roles: self.roles,
            keys,
            assignment,
        }
    }
}

/// Assemble roles from group partitions and label them.
pub fn build_role_model(
    d: &Dendrogram,
    points: &Points,
    keys: &[RowKey],
    partitions: &[GroupPartition],
    rules: &[LabelRule],
    factor_labels: &[String],
) -> Result<RoleModel, ClusterError> {
    let n = points.len();
    if keys.len() != n || d.n_leaves() != n {
        return Err(ClusterError::InvalidPartition(format!(
            "{} keys, {} points, {} leaves",
            keys.len(),
            n,
            d.n_leaves()
        )));
    }
    let mut ordered: Vec<&GroupPartition> = partitions.iter().collect();
    ordered.sort_by_key(|p| p.group);
    let mut assignment = vec![0usize; n];
    let mut roles = Vec::new();
    for part in ordered {
        for &node in &part.clusters {
            let id = roles.len() + 1;
            let leaves = d.leaves(node);
            for &l in &leaves {
                if assignment[l] != 0 {
                    return Err(ClusterError::InvalidPartition(format!(
                        "row {l} assigned twice"
                    )));
                }
                assignment[l] = id;
            }
            roles.push(Role {
                id,
                group: part.group,
                label: String::new(),
                centroid: points.centroid(&leaves),
                size: leaves.len(),
                node,
            });
        }
    }
    if let Some(l) = assignment.iter().position(|&a| a == 0) {
        return Err(ClusterError::InvalidPartition(format!(
            "row {l} has no role"
        )));
    }

    let labels = apply_label_rules(&roles, rules, factor_labels)?;
    for (role, label) in roles.iter_mut().zip(labels) {
        role.label = label.unwrap_or_else(|| format!("Role-{}", role.id));
    }
    Ok(RoleModel {
        factor_labels: factor_labels.to_vec(),
        roles,
        keys: keys.to_vec(),
        assignment,
    })
}

fn apply_label_rules(
    roles: &[Role],
    rules: &[LabelRule],
    factor_labels: &[String],
) -> Result<Vec<Option<String>>, ClusterError> {
    let mut levels: BTreeMap<i64, Vec<&LabelRule>> = BTreeMap::new();
    for (i, rule) in rules.iter().enumerate() {
        levels
            .entry(rule.priority.unwrap_or(i as i64))
            .or_default()
            .push(rule);
    }
    let mut labels: Vec<Option<String>> = vec![None; roles.len()];
    for level in levels.values() {
        let mut claims: BTreeMap<usize, (&LabelRule, String)> = BTreeMap::new();
        for rule in level {
            let open: Vec<&Role> = roles
                .iter()
                .filter(|r| r.group == rule.group && labels[r.id - 1].is_none())
                .collect();
            let matched = evaluate(rule, &open, factor_labels);
            let numbered = matched.len() > 1;
            for (n, id) in matched.into_iter().enumerate() {
                let label = if numbered {
                    format!("{} {}", rule.label, n + 1)
                } else {
                    rule.label.clone()
                };
                if let Some((first, _)) = claims.insert(id, (rule, label)) {
                    return Err(ClusterError::LabelRuleConflict {
                        role: id,
                        first: first.label.clone(),
                        second: rule.label.clone(),
                    });
                }
            }
        }
        for (id, (_, label)) in claims {
            labels[id - 1] = Some(label);
        }
    }
    Ok(labels)
}

fn total(v: &[f64]) -> f64 {
    v.iter().sum()
}

fn evaluate(rule: &LabelRule, open: &[&Role], factor_labels: &[String]) -> Vec<usize> {
    if open.is_empty() {
        return Vec::new();
    }
    let factor = || {
        let name = rule.factor.as_deref().unwrap_or("");
        let idx = factor_labels
            .iter()
            .position(|f| f.eq_ignore_ascii_case(name));
        if idx.is_none() {
            log::debug!("label rule {:?}: no factor named {name:?}", rule.label);
        }
        idx
    };
    // ties go to the lowest role id, which is first in `open`
    let pick = |key: &dyn Fn(&Role) -> f64, highest: bool| {
        let mut best = open[0];
        for r in &open[1..] {
            let (a, b) = (key(r), key(best));
            if (highest && a > b) || (!highest && a < b) {
                best = r;
            }
        }
        vec![best.id]
    };
    match rule.rule {
        Predicate::HighestFactor => {
            factor().map_or_else(Vec::new, |f| pick(&|r| r.centroid[f], true))
        }
        Predicate::LowestFactor => {
            factor().map_or_else(Vec::new, |f| pick(&|r| r.centroid[f], false))
        }
        Predicate::HighestNorm => pick(&|r| norm(&r.centroid), true),
        Predicate::LowestNorm => pick(&|r| norm(&r.centroid), false),
        Predicate::HighestTotal => pick(&|r| total(&r.centroid), true),
        Predicate::LowestTotal => pick(&|r| total(&r.centroid), false),
        Predicate::Remaining => open.iter().map(|r| r.id).collect(),
    }
}

/// Columns: `role`, `group`, `label`, `size`, one per factor.
pub fn write_centroids_csv<W: Write>(model: &RoleModel, out: W) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["role", "group", "label", "size"]
        .map(String::from)
        .to_vec();
    header.extend(model.factor_labels.iter().cloned());
    w.write_record(&header)?;
    for r in &model.roles {
        let mut rec = vec![
            r.id.to_string(),
            r.group.as_str().into(),
            r.label.clone(),
            r.size.to_string(),
        ];
        rec.extend(r.centroid.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| crate::Error::io("<centroids>", e))?;
    Ok(())
}

/// Parse a centroid table back into (role id, centroid) pairs.
pub fn read_centroids_csv<R: std::io::Read>(input: R) -> crate::Result<BTreeMap<usize, Vec<f64>>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = BTreeMap::new();
    let schema = |m: String| crate::Error::Schema {
        path: "centroids.csv".into(),
        message: m,
    };
    for rec in r.records() {
        let rec = rec?;
        let id: usize = rec[0]
            .parse()
            .map_err(|e| schema(format!("bad role id: {e}")))?;
        let c = rec
            .iter()
            .skip(4)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| schema(format!("bad coordinate {s:?}: {e}")))
            })
            .collect::<crate::Result<Vec<_>>>()?;
        out.insert(id, c);
    }
    Ok(out)
}

/// Columns: `group`, `k`, `mean_silhouette`, `selected`, `sampled`.
pub fn write_silhouette_csv<W: Write>(reports: &[&SilhouetteReport], out: W) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "k", "mean_silhouette", "selected", "sampled"])?;
    for rep in reports {
        for c in &rep.candidates {
            w.write_record([
                rep.group.as_str().to_string(),
                c.k.to_string(),
                c.mean.map_or_else(String::new, |m| m.to_string()),
                (c.k == rep.selected_k).to_string(),
                rep.sampled.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| crate::Error::io("<silhouette>", e))?;
    Ok(())
}
