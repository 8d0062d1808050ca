//! The 19 action metrics per (contributor, project, quarter).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Index;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ingest::{resolve_mentions, ActionEvent, EventKind, ProjectRef, TimeWindow};
use crate::{Error, Result};

pub const METRIC_COUNT: usize = 19;

/// Action metrics in their fixed column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    CommitsMade,
    LocChanged,
    FilesWorkedOn,
    PrsMade,
    AvgPrDescLen,
    IssuesReported,
    AvgIssueDescLen,
    IssueComments,
    AvgIssueCommentLen,
    PrComments,
    AvgPrCommentLen,
    MentionedInIssueComments,
    MentionedInPrComments,
    RefsInIssueComments,
    RefsInPrComments,
    IssueLabelChanges,
    PrLabelChanges,
    IssuesClosed,
    PrsClosed,
}

impl Metric {
    pub const ALL: [Metric; METRIC_COUNT] = [
        Metric::CommitsMade,
        Metric::LocChanged,
        Metric::FilesWorkedOn,
        Metric::PrsMade,
        Metric::AvgPrDescLen,
        Metric::IssuesReported,
        Metric::AvgIssueDescLen,
        Metric::IssueComments,
        Metric::AvgIssueCommentLen,
        Metric::PrComments,
        Metric::AvgPrCommentLen,
        Metric::MentionedInIssueComments,
        Metric::MentionedInPrComments,
        Metric::RefsInIssueComments,
        Metric::RefsInPrComments,
        Metric::IssueLabelChanges,
        Metric::PrLabelChanges,
        Metric::IssuesClosed,
        Metric::PrsClosed,
    ];

    pub fn column(self) -> usize {
        self as usize
    }

    pub fn from_column(i: usize) -> Option<Metric> {
        Self::ALL.get(i).copied()
    }

    /// CSV column name.
    pub fn key(self) -> &'static str {
        match self {
            Metric::CommitsMade => "commits_made",
            Metric::LocChanged => "loc_changed",
            Metric::FilesWorkedOn => "files_worked_on",
            Metric::PrsMade => "prs_made",
            Metric::AvgPrDescLen => "avg_pr_desc_len",
            Metric::IssuesReported => "issues_reported",
            Metric::AvgIssueDescLen => "avg_issue_desc_len",
            Metric::IssueComments => "issue_comments",
            Metric::AvgIssueCommentLen => "avg_issue_comment_len",
            Metric::PrComments => "pr_comments",
            Metric::AvgPrCommentLen => "avg_pr_comment_len",
            Metric::MentionedInIssueComments => "mentioned_in_issue_comments",
            Metric::MentionedInPrComments => "mentioned_in_pr_comments",
            Metric::RefsInIssueComments => "refs_in_issue_comments",
            Metric::RefsInPrComments => "refs_in_pr_comments",
            Metric::IssueLabelChanges => "issue_label_changes",
            Metric::PrLabelChanges => "pr_label_changes",
            Metric::IssuesClosed => "issues_closed",
            Metric::PrsClosed => "prs_closed",
        }
    }

    /// Human-readable description.
    pub fn description(self) -> &'static str {
        match self {
            Metric::CommitsMade => "# of commits made",
            Metric::LocChanged => "# of line of code changed in the codebase",
            Metric::FilesWorkedOn => "# of files worked on",
            Metric::PrsMade => "# of pull requests (PRs) made",
            Metric::AvgPrDescLen => "Avg. length of PR descriptions",
            Metric::IssuesReported => "# of issues reported",
            Metric::AvgIssueDescLen => "Avg. length of issue descriptions",
            Metric::IssueComments => "# of comments made in issue discussions",
            Metric::AvgIssueCommentLen => "Avg. length of issue comments",
            Metric::PrComments => "# of comments made in PR discussions",
            Metric::AvgPrCommentLen => "Avg. length of PR comments",
            Metric::MentionedInIssueComments => "# of times being mentioned in issue comments",
            Metric::MentionedInPrComments => "# of times being mentioned in PR comments",
            Metric::RefsInIssueComments => "# of times referred other issues/PRs in issue comments",
            Metric::RefsInPrComments => "# of times referred other issues/PRs in PR comments",
            Metric::IssueLabelChanges => "# of times applied or removed labels on issues",
            Metric::PrLabelChanges => "# of times applied or removed labels on PRs",
            Metric::IssuesClosed => "# of times closed issues",
            Metric::PrsClosed => "# of times closed pull requests",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Row identity. Ordering is (project, login, period), the export order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub project: ProjectRef,
    pub login: String,
    pub period: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub key: RowKey,
    pub values: [f64; METRIC_COUNT],
}

impl MetricsRow {
    pub fn is_active(&self) -> bool {
        self.values.iter().any(|v| *v != 0.0)
    }
}

impl Index<Metric> for MetricsRow {
    type Output = f64;

    fn index(&self, m: Metric) -> &f64 {
        &self.values[m.column()]
    }
}

/// Active contributor-quarters in canonical key order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsMatrix {
    rows: Vec<MetricsRow>,
}

impl MetricsMatrix {
    /// Sorts rows; fails on duplicate keys or all-zero rows.
    pub fn from_rows(mut rows: Vec<MetricsRow>) -> Result<Self> {
        rows.sort_by(|a, b| a.key.cmp(&b.key));
        if let Some(w) = rows.windows(2).find(|w| w[0].key == w[1].key) {
            return Err(Error::Config(format!(
                "duplicate metrics row {:?}",
                w[0].key
            )));
        }
        if let Some(r) = rows.iter().find(|r| !r.is_active()) {
            return Err(Error::Config(format!(
                "metrics row {:?} has no activity",
                r.key
            )));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &RowKey> {
        self.rows.iter().map(|r| &r.key)
    }

    /// Row-major n x 19 values.
    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().flat_map(|r| r.values).collect()
    }
}

#[derive(Default)]
struct Accumulator {
    counts: [f64; METRIC_COUNT],
    files: BTreeSet<String>,
    pr_desc_total: u64,
    issue_desc_total: u64,
    issue_comment_total: u64,
    pr_comment_total: u64,
}

impl Accumulator {
    fn bump(&mut self, m: Metric, by: f64) {
        self.counts[m.column()] += by;
    }

    fn finish(self, key: RowKey) -> MetricsRow {
        let mut values = self.counts;
        let avg = |total: u64, count: f64| {
            if count > 0.0 {
                total as f64 / count
            } else {
                0.0
            }
        };
        values[Metric::FilesWorkedOn.column()] = self.files.len() as f64;
        values[Metric::AvgPrDescLen.column()] =
            avg(self.pr_desc_total, values[Metric::PrsMade.column()]);
        values[Metric::AvgIssueDescLen.column()] = avg(
            self.issue_desc_total,
            values[Metric::IssuesReported.column()],
        );
        values[Metric::AvgIssueCommentLen.column()] = avg(
            self.issue_comment_total,
            values[Metric::IssueComments.column()],
        );
        values[Metric::AvgPrCommentLen.column()] =
            avg(self.pr_comment_total, values[Metric::PrComments.column()]);
        MetricsRow { key, values }
    }
}

/// Compute the metrics matrix from bot-filtered events.
///
/// Mentions count only logins that act in the same project and are credited
/// to the mentioned contributor in the quarter of the mentioning comment.
/// Events outside `window` are skipped with a warning.
pub fn compute_metrics(events: &[ActionEvent], window: &TimeWindow) -> MetricsMatrix {
    let mut actors: BTreeMap<&ProjectRef, BTreeMap<String, String>> = BTreeMap::new();
    for e in events {
        actors
            .entry(&e.project)
            .or_default()
            .insert(e.actor.to_lowercase(), e.actor.clone());
    }

    let mut acc: BTreeMap<RowKey, Accumulator> = BTreeMap::new();
    let mut skipped = 0usize;
    for e in events {
        let Ok(period) = window.assign_quarter(e.timestamp) else {
            skipped += 1;
            continue;
        };
        let key = RowKey {
            project: e.project.clone(),
            login: e.actor.clone(),
            period,
        };
        let a = acc.entry(key).or_default();
        match e.kind {
            EventKind::Commit => {
                a.bump(Metric::CommitsMade, 1.0);
                a.bump(Metric::LocChanged, e.loc_changed as f64);
                a.files.extend(e.files.iter().cloned());
            }
            EventKind::PrOpened => {
                a.bump(Metric::PrsMade, 1.0);
                a.pr_desc_total += e.body_length;
            }
            EventKind::IssueOpened => {
                a.bump(Metric::IssuesReported, 1.0);
                a.issue_desc_total += e.body_length;
            }
            EventKind::IssueComment => {
                a.bump(Metric::IssueComments, 1.0);
                a.bump(Metric::RefsInIssueComments, e.references as f64);
                a.issue_comment_total += e.body_length;
            }
            EventKind::PrComment => {
                a.bump(Metric::PrComments, 1.0);
                a.bump(Metric::RefsInPrComments, e.references as f64);
                a.pr_comment_total += e.body_length;
            }
            EventKind::IssueLabelChange => a.bump(Metric::IssueLabelChanges, 1.0),
            EventKind::PrLabelChange => a.bump(Metric::PrLabelChanges, 1.0),
            EventKind::IssueClosed => a.bump(Metric::IssuesClosed, 1.0),
            EventKind::PrClosed => a.bump(Metric::PrsClosed, 1.0),
        }

        let mention_metric = match e.kind {
            EventKind::IssueComment => Metric::MentionedInIssueComments,
            EventKind::PrComment => Metric::MentionedInPrComments,
            _ => continue,
        };
        for login in resolve_mentions(&e.mentions, &actors[&e.project]) {
            let key = RowKey {
                project: e.project.clone(),
                login,
                period,
            };
            acc.entry(key).or_default().bump(mention_metric, 1.0);
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} events outside the analysis window");
    }

    let rows = acc
        .into_iter()
        .map(|(k, a)| a.finish(k))
        .filter(MetricsRow::is_active)
        .collect();
    MetricsMatrix { rows }
}

const KEY_COLUMNS: [&str; 3] = ["project", "login", "period"];

pub fn csv_header() -> Vec<&'static str> {
    KEY_COLUMNS
        .iter()
        .copied()
        .chain(Metric::ALL.iter().map(|m| m.key()))
        .collect()
}

pub fn write_matrix_csv<W: std::io::Write>(matrix: &MetricsMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header())?;
    for row in &matrix.rows {
        let mut rec = vec![
            row.key.project.to_string(),
            row.key.login.clone(),
            row.key.period.to_string(),
        ];
        rec.extend(row.values.iter().map(|v| v.to_string()));
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Write the matrix as CSV: key columns then the 19 metrics, one row per line.
pub fn export_matrix(matrix: &MetricsMatrix, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_matrix_csv(matrix, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn import_matrix(path: &Path) -> Result<MetricsMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix_csv(file, path)
}

pub fn read_matrix_csv<R: std::io::Read>(input: R, path: &Path) -> Result<MetricsMatrix> {
    let schema = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != csv_header() {
        return Err(schema(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let project: ProjectRef = rec[0].parse().map_err(|e| schema(format!("{e}")))?;
        let period = rec[2]
            .parse()
            .map_err(|e| schema(format!("bad period {:?}: {e}", &rec[2])))?;
        let mut values = [0.0; METRIC_COUNT];
        for (i, v) in values.iter_mut().enumerate() {
            let cell = &rec[KEY_COLUMNS.len() + i];
            *v = cell
                .parse()
                .map_err(|e| schema(format!("bad value {cell:?}: {e}")))?;
        }
        rows.push(MetricsRow {
            key: RowKey {
                project,
                login: rec[1].to_string(),
                period,
            },
            values,
        });
    }
    MetricsMatrix::from_rows(rows)
}
