//! Human-readable summary of an `analyze` output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::cluster::{Group, Role, RoleModelDoc};
use crate::dynamics::{rci_summary, read_transitions_csv, PopulationTag, RciSummary};
use crate::factor::{loading_strength, read_loadings_csv, LoadingStrength, LoadingTable};
use crate::pipeline::{RunManifest, ARTIFACTS, MANIFEST_FILE};
use crate::util::sha256_hex;
use crate::{Error, Result, SCHEMA_VERSION};

/// Transitions listed per population.
pub const TOP_TRANSITIONS: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReportFormat {
    #[default]
    Text,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(ReportFormat::Text),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub from: String,
    pub to: String,
    pub count: u64,
}

/// Everything the summary shows, read back from the artifacts.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub manifest: RunManifest,
    pub loadings: LoadingTable,
    pub roles: Vec<Role>,
    pub top_supporting: Vec<Transition>,
    pub top_active: Vec<Transition>,
    pub rci: Option<RciSummary>,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

fn read(dir: &Path, name: &str) -> Result<Vec<u8>> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(Error::MissingArtifact(path));
    }
    fs::read(&path).map_err(|e| Error::io(&path, e))
}

fn schema_error(path: PathBuf, message: impl Into<String>) -> Error {
    Error::Schema {
        path,
        message: message.into(),
    }
}

/// Read the manifest, check its version and every artifact checksum.
pub fn verify_artifacts(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = read(dir, MANIFEST_FILE)?;
    let probe: VersionProbe = serde_json::from_slice(&bytes)
        .map_err(|e| schema_error(path.clone(), format!("unreadable manifest: {e}")))?;
    if probe.schema_version != SCHEMA_VERSION {
        return Err(schema_error(
            path,
            format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                probe.schema_version
            ),
        ));
    }
    let manifest: RunManifest =
        serde_json::from_slice(&bytes).map_err(|e| schema_error(path.clone(), e.to_string()))?;
    for name in ARTIFACTS {
        let entry = manifest
            .artifacts
            .get(name)
            .ok_or_else(|| schema_error(path.clone(), format!("manifest does not list {name}")))?;
        let data = read(dir, name)?;
        if sha256_hex(&data) != entry.sha256 {
            return Err(schema_error(
                dir.join(name),
                "checksum does not match the manifest",
            ));
        }
    }
    Ok(manifest)
}

fn top(dir: &Path, name: &str) -> Result<Vec<Transition>> {
    let (labels, m) = read_transitions_csv(read(dir, name)?.as_slice())?;
    if labels.len() != m.size() {
        return Err(schema_error(
            dir.join(name),
            "header and matrix size differ",
        ));
    }
    Ok(m.top_transitions(TOP_TRANSITIONS)
        .into_iter()
        .map(|(i, j, count)| Transition {
            from: labels[i].clone(),
            to: labels[j].clone(),
            count,
        })
        .collect())
}

fn ever_active_rci(dir: &Path, bins: usize) -> Result<Option<RciSummary>> {
    let name = "rci.csv";
    let bytes = read(dir, name)?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let header = r.headers()?.clone();
    let col = |c: &str| {
        header
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| schema_error(dir.join(name), format!("missing column {c}")))
    };
    let (pop, excluded, value) = (col("population")?, col("excluded")?, col("rci")?);
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if &rec[pop] != PopulationTag::EverActive.as_str()
            || &rec[excluded] == "true"
            || rec[value].is_empty()
        {
            continue;
        }
        let v = rec[value]
            .parse::<f64>()
            .map_err(|e| schema_error(dir.join(name), format!("bad rci {:?}: {e}", &rec[value])))?;
        values.push(v);
    }
    if values.is_empty() {
        return Ok(None);
    }
    Ok(Some(rci_summary(&values, bins)?))
}

/// Verify and load the artifacts in `dir`.
pub fn load_report(dir: &Path) -> Result<Report> {
    let manifest = verify_artifacts(dir)?;
    let loadings = read_loadings_csv(read(dir, "loadings.csv")?.as_slice())?;
    let doc: RoleModelDoc = serde_json::from_slice(&read(dir, "roles.json")?)
        .map_err(|e| schema_error(dir.join("roles.json"), e.to_string()))?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(schema_error(
            dir.join("roles.json"),
            format!("schema version {} is not supported", doc.schema_version),
        ));
    }
    let bins = manifest.config.dynamics.histogram_bins.max(1);
    Ok(Report {
        loadings,
        roles: doc.roles,
        top_supporting: top(dir, "transitions_supporting.csv")?,
        top_active: top(dir, "transitions_active.csv")?,
        rci: ever_active_rci(dir, bins)?,
        manifest,
    })
}

/// Load and render the summary of `dir`.
pub fn cmd_report(dir: &Path, format: ReportFormat) -> Result<String> {
    Ok(render(&load_report(dir)?, format))
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    /// Columns aligned right in text output.
    numeric: Vec<bool>,
}

impl Table {
    fn new(header: &[&str], numeric: &[bool]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            numeric: numeric.to_vec(),
        }
    }

    fn render(&self, format: ReportFormat, out: &mut String) {
        match format {
            ReportFormat::Markdown => {
                let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
                out.push_str(&line(&self.header));
                let rule: Vec<String> = self
                    .numeric
                    .iter()
                    .map(|&n| if n { "---:".into() } else { "---".into() })
                    .collect();
                out.push_str(&line(&rule));
                for row in &self.rows {
                    out.push_str(&line(
                        &row.iter()
                            .map(|c| c.replace('|', "\\|"))
                            .collect::<Vec<_>>(),
                    ));
                }
            }
            ReportFormat::Text => {
                let widths: Vec<usize> = (0..self.header.len())
                    .map(|j| {
                        self.rows
                            .iter()
                            .map(|r| r[j].chars().count())
                            .chain([self.header[j].chars().count()])
                            .max()
                            .unwrap_or(0)
                    })
                    .collect();
                let line = |cells: &[String]| {
                    let padded: Vec<String> = cells
                        .iter()
                        .enumerate()
                        .map(|(j, c)| {
                            if self.numeric[j] {
                                format!("{c:>w$}", w = widths[j])
                            } else {
                                format!("{c:<w$}", w = widths[j])
                            }
                        })
                        .collect();
                    format!("  {}\n", padded.join("  ").trim_end())
                };
                out.push_str(&line(&self.header));
                let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
                out.push_str(&line(&rule));
                for row in &self.rows {
                    out.push_str(&line(row));
                }
            }
        }
    }
}

fn heading(format: ReportFormat, title: &str, out: &mut String) {
    match format {
        ReportFormat::Markdown => {
            let _ = writeln!(out, "\n## {title}\n");
        }
        ReportFormat::Text => {
            let _ = writeln!(out, "\n{title}\n");
        }
    }
}

fn loading_cell(v: f64, format: ReportFormat) -> String {
    let s = format!("{v:.2}");
    match (loading_strength(v), format) {
        (Some(LoadingStrength::Strong), ReportFormat::Markdown) => format!("**{s}**"),
        (Some(LoadingStrength::Moderate), ReportFormat::Markdown) => format!("_{s}_"),
        (Some(LoadingStrength::Strong), ReportFormat::Text) => format!("{s}**"),
        (Some(LoadingStrength::Moderate), ReportFormat::Text) => format!("{s}* "),
        (None, ReportFormat::Text) => format!("{s}  "),
        (None, ReportFormat::Markdown) => s,
    }
}

pub fn render(report: &Report, format: ReportFormat) -> String {
    let m = &report.manifest;
    let s = &m.summary;
    let mut out = String::new();
    let title = format!("{} {} run summary", m.tool, m.tool_version);
    match format {
        ReportFormat::Markdown => {
            let _ = writeln!(out, "# {title}");
        }
        ReportFormat::Text => {
            let _ = writeln!(out, "{title}\n{}", "=".repeat(title.chars().count()));
        }
    }
    let _ = writeln!(
        out,
        "\n{} contributor-quarters, {} factors explaining {:.1}% of variance, {} roles ({} active, {} supporting), {} trajectories.",
        s.rows,
        s.factors,
        100.0 * s.variance_explained,
        s.active_roles + s.supporting_roles,
        s.active_roles,
        s.supporting_roles,
        s.trajectories
    );

    heading(format, "Factor loadings", &mut out);
    let t = &report.loadings;
    let mut header: Vec<&str> = vec!["metric"];
    header.extend(t.factors.iter().map(String::as_str));
    header.extend(["h2", "u2"]);
    let mut numeric = vec![false];
    numeric.extend(std::iter::repeat_n(true, t.factors.len() + 2));
    let mut table = Table::new(&header, &numeric);
    for (i, metric) in t.metrics.iter().enumerate() {
        let mut row = vec![metric.clone()];
        row.extend((0..t.factors.len()).map(|j| loading_cell(t.loadings[(i, j)], format)));
        row.push(format!("{:.3}", t.communalities[i]));
        row.push(format!("{:.3}", t.uniqueness[i]));
        table.rows.push(row);
    }
    table.render(format, &mut out);
    let legend = match format {
        ReportFormat::Markdown => {
            "\nBold: |loading| >= 0.5 (strong). Italic: 0.3 < |loading| < 0.5 (moderate).\n"
        }
        ReportFormat::Text => {
            "\n  ** |loading| >= 0.5 (strong), * 0.3 < |loading| < 0.5 (moderate)\n"
        }
    };
    out.push_str(legend);

    heading(format, "Roles", &mut out);
    let total: usize = report.roles.iter().map(|r| r.size).sum();
    let mut table = Table::new(
        &["id", "group", "label", "size", "share"],
        &[true, false, false, true, true],
    );
    for group in [Group::Active, Group::Supporting] {
        for r in report.roles.iter().filter(|r| r.group == group) {
            table.rows.push(vec![
                r.id.to_string(),
                r.group.as_str().to_string(),
                r.label.clone(),
                r.size.to_string(),
                format!("{:.1}%", 100.0 * r.size as f64 / total.max(1) as f64),
            ]);
        }
    }
    table.render(format, &mut out);

    for (title, list) in [
        ("Top transitions (supporting only)", &report.top_supporting),
        ("Top transitions (ever active)", &report.top_active),
    ] {
        heading(format, title, &mut out);
        if list.is_empty() {
            out.push_str("  none\n");
            continue;
        }
        let mut table = Table::new(&["from", "to", "count"], &[false, false, true]);
        for tr in list {
            table
                .rows
                .push(vec![tr.from.clone(), tr.to.clone(), tr.count.to_string()]);
        }
        table.render(format, &mut out);
    }

    heading(format, "Role change intensity (ever active)", &mut out);
    match &report.rci {
        None => out.push_str("  no scores\n"),
        Some(r) => {
            let mut table = Table::new(&["count", "min", "q1", "median", "q3", "max"], &[true; 6]);
            table.rows.push(
                [r.count as f64, r.min, r.q1, r.median, r.q3, r.max]
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        if i == 0 {
                            r.count.to_string()
                        } else {
                            format!("{v:.3}")
                        }
                    })
                    .collect(),
            );
            table.render(format, &mut out);
        }
    }
    out
}
