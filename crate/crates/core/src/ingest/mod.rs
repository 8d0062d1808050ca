//! Raw action data: fetching, normalization, bot filtering and quarter
//! bucketing.

mod body;
mod bots;
pub mod github;
mod store;
mod window;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use body::{mention_candidates, parse_body, resolve_mentions, ParsedBody};
pub use bots::{filter_bots, is_bot};
pub use store::{EndpointSync, EventStore, StoreManifest, STORE_MANIFEST};
pub use window::TimeWindow;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("authentication failed for {url} (HTTP {status})")]
    Auth { url: String, status: u16 },
    #[error("not found: {url} (project renamed or deleted?)")]
    NotFound { url: String },
    #[error("partial fetch of {project} {endpoint}: {reason}; progress saved, rerun to resume")]
    PartialFetch {
        project: ProjectRef,
        endpoint: String,
        reason: String,
    },
    #[error("timestamp {0} is outside the analysis window")]
    OutOfWindow(DateTime<Utc>),
    #[error("invalid time window: {0}")]
    InvalidWindow(String),
    #[error("invalid project reference {0:?}; expected owner/name")]
    InvalidProject(String),
    #[error("malformed API payload from {url}: {message}")]
    Payload { url: String, message: String },
    #[error("event store {path}: {message}")]
    Store { path: String, message: String },
}

/// `owner/name` of a hosted repository.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ProjectRef {
    owner: String,
    name: String,
}

impl ProjectRef {
    pub fn new(owner: impl Into<String>, name: impl Into<String>) -> Result<Self, IngestError> {
        let owner = owner.into();
        let name = name.into();
        let valid =
            |s: &str| !s.is_empty() && !s.contains('/') && !s.chars().any(char::is_whitespace);
        if !valid(&owner) || !valid(&name) {
            return Err(IngestError::InvalidProject(format!("{owner}/{name}")));
        }
        Ok(Self { owner, name })
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Directory name used inside the event store.
    pub fn dir_name(&self) -> String {
        format!("{}__{}", self.owner, self.name)
    }
}

impl fmt::Display for ProjectRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.owner, self.name)
    }
}

impl FromStr for ProjectRef {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('/') {
            Some((owner, name)) => ProjectRef::new(owner, name),
            None => Err(IngestError::InvalidProject(s.to_string())),
        }
    }
}

impl TryFrom<String> for ProjectRef {
    type Error = IngestError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ProjectRef> for String {
    fn from(p: ProjectRef) -> String {
        p.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Commit,
    IssueOpened,
    IssueComment,
    PrOpened,
    PrComment,
    IssueLabelChange,
    PrLabelChange,
    IssueClosed,
    PrClosed,
}

impl EventKind {
    pub const ALL: [EventKind; 9] = [
        EventKind::Commit,
        EventKind::IssueOpened,
        EventKind::IssueComment,
        EventKind::PrOpened,
        EventKind::PrComment,
        EventKind::IssueLabelChange,
        EventKind::PrLabelChange,
        EventKind::IssueClosed,
        EventKind::PrClosed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Commit => "commit",
            EventKind::IssueOpened => "issue_opened",
            EventKind::IssueComment => "issue_comment",
            EventKind::PrOpened => "pr_opened",
            EventKind::PrComment => "pr_comment",
            EventKind::IssueLabelChange => "issue_label_change",
            EventKind::PrLabelChange => "pr_label_change",
            EventKind::IssueClosed => "issue_closed",
            EventKind::PrClosed => "pr_closed",
        }
    }

    /// Kinds whose payload carries a text body.
    pub fn has_body(self) -> bool {
        matches!(
            self,
            EventKind::IssueOpened
                | EventKind::IssueComment
                | EventKind::PrOpened
                | EventKind::PrComment
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One timestamped contributor action.
///
/// `mentions` holds every `@login` candidate found in the body; restricting
/// them to logins active in the project happens when metrics are computed,
/// since that set is only known once all of a project's data is in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionEvent {
    /// Source API node id; the event identity.
    pub id: String,
    pub project: ProjectRef,
    pub actor: String,
    /// Account type reported by the API was `Bot`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub actor_is_bot: bool,
    pub timestamp: DateTime<Utc>,
    pub kind: EventKind,
    #[serde(default)]
    pub loc_changed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<String>,
    #[serde(default)]
    pub body_length: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mentions: Vec<String>,
    #[serde(default)]
    pub references: u64,
}

impl ActionEvent {
    /// A bare event with no payload counts.
    pub fn new(
        id: impl Into<String>,
        project: ProjectRef,
        actor: impl Into<String>,
        timestamp: DateTime<Utc>,
        kind: EventKind,
    ) -> Self {
        Self {
            id: id.into(),
            project,
            actor: actor.into(),
            actor_is_bot: false,
            timestamp,
            kind,
            loc_changed: 0,
            files: Vec::new(),
            body_length: 0,
            mentions: Vec::new(),
            references: 0,
        }
    }

    /// Fill body-derived fields from raw text.
    pub fn with_body(mut self, body: &str, web_host: &str) -> Self {
        let parsed = body::parse_raw(body, web_host);
        self.body_length = parsed.body_length;
        self.mentions = parsed.mentions;
        self.references = parsed.references;
        self
    }

    /// Canonical replay order: timestamp, then source id.
    pub fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.timestamp
            .cmp(&other.timestamp)
            .then_with(|| self.id.cmp(&other.id))
    }
}
