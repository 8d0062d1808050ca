//! GitHub REST v3 ingestion.
//!
//! Five list endpoints are walked per project (commits, issues including PRs,
//! issue comments, PR review comments, issue events), each following the
//! `Link: rel="next"` chain. Commits additionally need one detail request each
//! for line and file counts. Endpoints run on a bounded worker pool sharing one
//! token bucket; results are merged in a fixed endpoint order and the store is
//! canonically sorted, so concurrency never shows up in the output.
//!
//! Rate limits: a 403/429 carrying `Retry-After` or an exhausted
//! `X-RateLimit-Remaining` sleeps until the advertised reset and retries.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::Deserialize;
use thiserror::Error;

use super::{
    ActionEvent, EndpointSync, EventKind, EventStore, IngestError, ProjectRef, TimeWindow,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    /// Header names are lowercase.
    pub headers: BTreeMap<String, String>,
    pub body: String,
}

impl HttpResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .get(&name.to_ascii_lowercase())
            .map(String::as_str)
    }
}

#[derive(Debug, Error)]
#[error("transport failure: {0}")]
pub struct TransportError(pub String);

/// One GET round trip. Non-2xx statuses are responses, not errors.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str, token: Option<&str>) -> Result<HttpResponse, TransportError>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new() -> Self {
        Self {
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(60))
                .build(),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str, token: Option<&str>) -> Result<HttpResponse, TransportError> {
        let mut req = self
            .agent
            .get(url)
            .set("Accept", "application/vnd.github+json")
            .set(
                "User-Agent",
                concat!("rolescope/", env!("CARGO_PKG_VERSION")),
            );
        if let Some(token) = token {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        let resp = match req.call() {
            Ok(resp) | Err(ureq::Error::Status(_, resp)) => resp,
            Err(ureq::Error::Transport(t)) => return Err(TransportError(t.to_string())),
        };
        let status = resp.status();
        let headers = resp
            .headers_names()
            .into_iter()
            .filter_map(|name| {
                let value = resp.header(&name)?.to_string();
                Some((name.to_ascii_lowercase(), value))
            })
            .collect();
        let body = resp
            .into_string()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpResponse {
            status,
            headers,
            body,
        })
    }
}

/// A recorded HTTP exchange, as stored in replay fixture files.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordedResponse {
    pub url: String,
    #[serde(default = "default_status")]
    pub status: u16,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default)]
    pub body: serde_json::Value,
}

fn default_status() -> u16 {
    200
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FixtureFile {
    Many(Vec<RecordedResponse>),
    One(RecordedResponse),
}

/// Serves recorded responses keyed by URL. Several recordings of one URL are
/// replayed in file order, the last one repeating. Unknown URLs fail like a
/// dropped connection.
pub struct ReplayTransport {
    responses: Mutex<BTreeMap<String, VecDeque<HttpResponse>>>,
    log: Mutex<Vec<String>>,
}

impl ReplayTransport {
    pub fn new(recorded: impl IntoIterator<Item = RecordedResponse>) -> Self {
        let mut responses: BTreeMap<String, VecDeque<HttpResponse>> = BTreeMap::new();
        for r in recorded {
            let body = match r.body {
                serde_json::Value::String(s) => s,
                serde_json::Value::Null => String::new(),
                other => other.to_string(),
            };
            responses.entry(r.url).or_default().push_back(HttpResponse {
                status: r.status,
                headers: r
                    .headers
                    .into_iter()
                    .map(|(k, v)| (k.to_ascii_lowercase(), v))
                    .collect(),
                body,
            });
        }
        Self {
            responses: Mutex::new(responses),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Load every `*.json` file in `dir` (sorted by name).
    pub fn from_dir(dir: &Path) -> Result<Self, IngestError> {
        let err = |m: String| IngestError::Store {
            path: dir.display().to_string(),
            message: m,
        };
        let mut files: Vec<_> = fs::read_dir(dir)
            .map_err(|e| err(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let mut recorded = Vec::new();
        for f in files {
            let text = fs::read_to_string(&f).map_err(|e| err(e.to_string()))?;
            match serde_json::from_str::<FixtureFile>(&text)
                .map_err(|e| err(format!("{}: {e}", f.display())))?
            {
                FixtureFile::Many(v) => recorded.extend(v),
                FixtureFile::One(r) => recorded.push(r),
            }
        }
        Ok(Self::new(recorded))
    }

    /// URLs requested so far, in order.
    pub fn requests(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }
}

impl Transport for ReplayTransport {
    fn get(&self, url: &str, _token: Option<&str>) -> Result<HttpResponse, TransportError> {
        self.log.lock().unwrap().push(url.to_string());
        let mut responses = self.responses.lock().unwrap();
        let queue = responses
            .get_mut(url)
            .ok_or_else(|| TransportError(format!("connection reset (no recording for {url})")))?;
        if queue.len() > 1 {
            Ok(queue.pop_front().unwrap())
        } else {
            Ok(queue.front().cloned().unwrap())
        }
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Clock whose `sleep` only advances virtual time; used with replayed
/// responses.
pub struct ManualClock {
    now: Mutex<DateTime<Utc>>,
    slept: Mutex<Duration>,
}

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self {
            now: Mutex::new(start),
            slept: Mutex::new(Duration::ZERO),
        }
    }

    pub fn total_slept(&self) -> Duration {
        *self.slept.lock().unwrap()
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        *self.now.lock().unwrap() += chrono::Duration::from_std(d).unwrap_or_default();
        *self.slept.lock().unwrap() += d;
    }
}

struct TokenBucket {
    capacity: f64,
    per_second: f64,
    state: Mutex<(f64, DateTime<Utc>)>,
}

impl TokenBucket {
    fn new(per_second: f64, now: DateTime<Utc>) -> Self {
        let capacity = per_second.max(1.0);
        Self {
            capacity,
            per_second,
            state: Mutex::new((capacity, now)),
        }
    }

    fn acquire(&self, clock: &dyn Clock) {
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap();
                let now = clock.now();
                let elapsed = (now - state.1).num_microseconds().unwrap_or(0).max(0) as f64 / 1e6;
                state.0 = (state.0 + elapsed * self.per_second).min(self.capacity);
                state.1 = now;
                if state.0 >= 1.0 {
                    state.0 -= 1.0;
                    return;
                }
                (1.0 - state.0) / self.per_second
            };
            clock.sleep(Duration::from_secs_f64(wait));
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FetchOptions {
    pub base_url: String,
    /// Host used to recognise issue/PR URLs in bodies.
    pub web_host: String,
    pub per_page: u32,
    pub workers: usize,
    pub requests_per_second: Option<f64>,
    /// Retries for transport failures and 5xx before giving up.
    pub max_retries: u32,
    /// Cap on consecutive rate-limit sleeps for a single request.
    pub max_rate_limit_waits: u32,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            base_url: "https://api.github.com".to_string(),
            web_host: "github.com".to_string(),
            per_page: 100,
            workers: 4,
            requests_per_second: None,
            max_retries: 2,
            max_rate_limit_waits: 10,
        }
    }
}

/// Outcome of one project fetch.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FetchReport {
    pub project: Option<ProjectRef>,
    pub new_events: usize,
    /// In-window events returned by the API, stored or not.
    pub seen_events: usize,
    pub unattributed_commits: usize,
    /// endpoint -> newly stored events
    pub per_endpoint: BTreeMap<String, usize>,
}

#[derive(Debug)]
enum GetError {
    Auth(u16),
    NotFound,
    EmptyRepository,
    Transport(String),
    Status(u16),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Endpoint {
    Commits,
    Issues,
    IssueComments,
    PrReviewComments,
    IssueEvents,
}

impl Endpoint {
    const ALL: [Endpoint; 5] = [
        Endpoint::Commits,
        Endpoint::Issues,
        Endpoint::IssueComments,
        Endpoint::PrReviewComments,
        Endpoint::IssueEvents,
    ];

    fn name(self) -> &'static str {
        match self {
            Endpoint::Commits => "commits",
            Endpoint::Issues => "issues",
            Endpoint::IssueComments => "issue_comments",
            Endpoint::PrReviewComments => "pr_review_comments",
            Endpoint::IssueEvents => "issue_events",
        }
    }
}

struct EndpointOutcome {
    events: Vec<ActionEvent>,
    sync: EndpointSync,
    unattributed: usize,
    /// Commits skipped without a detail request because they are stored.
    known_commits: usize,
    error: Option<IngestError>,
}

#[derive(Deserialize)]
struct ApiUser {
    login: Option<String>,
    #[serde(rename = "type", default)]
    account_type: Option<String>,
}

impl ApiUser {
    fn is_bot(&self) -> bool {
        self.account_type.as_deref() == Some("Bot")
    }
}

#[derive(Deserialize)]
struct ApiGitActor {
    email: Option<String>,
    date: Option<DateTime<Utc>>,
}

#[derive(Deserialize)]
struct ApiCommitInner {
    author: Option<ApiGitActor>,
}

#[derive(Deserialize)]
struct ApiCommit {
    sha: String,
    node_id: Option<String>,
    author: Option<ApiUser>,
    commit: ApiCommitInner,
}

#[derive(Deserialize)]
struct ApiStats {
    additions: u64,
    deletions: u64,
}

#[derive(Deserialize)]
struct ApiFile {
    filename: String,
}

#[derive(Deserialize)]
struct ApiCommitDetail {
    stats: Option<ApiStats>,
    #[serde(default)]
    files: Vec<ApiFile>,
}

#[derive(Deserialize)]
struct ApiIssue {
    id: u64,
    node_id: Option<String>,
    user: Option<ApiUser>,
    created_at: DateTime<Utc>,
    body: Option<String>,
    pull_request: Option<serde_json::Value>,
}

#[derive(Deserialize)]
struct ApiComment {
    id: u64,
    node_id: Option<String>,
    user: Option<ApiUser>,
    created_at: DateTime<Utc>,
    body: Option<String>,
    html_url: Option<String>,
}

#[derive(Deserialize)]
struct ApiIssueRef {
    pull_request: Option<serde_json::Value>,
}

#[derive(Deserialize)]
struct ApiIssueEvent {
    id: u64,
    node_id: Option<String>,
    actor: Option<ApiUser>,
    event: String,
    created_at: DateTime<Utc>,
    issue: Option<ApiIssueRef>,
}

/// `rel="next"` target of a `Link` header.
pub fn next_link(link: &str) -> Option<String> {
    link.split(',').find_map(|part| {
        let mut pieces = part.split(';');
        let url = pieces.next()?.trim();
        let is_next = pieces.any(|p| p.trim() == "rel=\"next\"");
        (is_next && url.starts_with('<') && url.ends_with('>'))
            .then(|| url[1..url.len() - 1].to_string())
    })
}

fn rfc3339(ts: DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn event_id(node_id: Option<String>, prefix: &str, id: u64) -> String {
    node_id.unwrap_or_else(|| format!("{prefix}:{id}"))
}

pub struct GitHubClient {
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    token: Option<String>,
    opts: FetchOptions,
    limiter: Option<TokenBucket>,
}

impl GitHubClient {
    pub fn new(
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
        token: Option<String>,
        opts: FetchOptions,
    ) -> Self {
        let limiter = opts
            .requests_per_second
            .filter(|r| *r > 0.0)
            .map(|r| TokenBucket::new(r, clock.now()));
        Self {
            transport,
            clock,
            token,
            opts,
            limiter,
        }
    }

    fn rate_limit_wait(&self, resp: &HttpResponse) -> Option<Duration> {
        if let Some(secs) = resp
            .header("retry-after")
            .and_then(|v| v.trim().parse::<u64>().ok())
        {
            return Some(Duration::from_secs(secs));
        }
        if resp.header("x-ratelimit-remaining").map(str::trim) == Some("0") {
            let reset: i64 = resp.header("x-ratelimit-reset")?.trim().parse().ok()?;
            let now = self.clock.now().timestamp();
            return Some(Duration::from_secs((reset - now).max(0) as u64 + 1));
        }
        None
    }

    fn get(&self, url: &str) -> Result<HttpResponse, GetError> {
        let mut failures = 0;
        let mut waits = 0;
        loop {
            if let Some(limiter) = &self.limiter {
                limiter.acquire(self.clock.as_ref());
            }
            let resp = match self.transport.get(url, self.token.as_deref()) {
                Ok(resp) => resp,
                Err(e) => {
                    failures += 1;
                    if failures > self.opts.max_retries {
                        return Err(GetError::Transport(e.0));
                    }
                    self.clock.sleep(Duration::from_secs(1 << failures));
                    continue;
                }
            };
            match resp.status {
                200..=299 => return Ok(resp),
                401 => return Err(GetError::Auth(401)),
                403 | 429 => {
                    if let Some(wait) = self.rate_limit_wait(&resp) {
                        waits += 1;
                        if waits > self.opts.max_rate_limit_waits {
                            return Err(GetError::Status(resp.status));
                        }
                        log::info!("rate limited on {url}; sleeping {}s", wait.as_secs());
                        self.clock.sleep(wait);
                        continue;
                    }
                    if resp.status == 403 {
                        return Err(GetError::Auth(403));
                    }
                    failures += 1;
                    if failures > self.opts.max_retries {
                        return Err(GetError::Status(429));
                    }
                    self.clock.sleep(Duration::from_secs(1 << failures));
                }
                404 => return Err(GetError::NotFound),
                409 => return Err(GetError::EmptyRepository),
                s if s >= 500 => {
                    failures += 1;
                    if failures > self.opts.max_retries {
                        return Err(GetError::Status(s));
                    }
                    self.clock.sleep(Duration::from_secs(1 << failures));
                }
                s => return Err(GetError::Status(s)),
            }
        }
    }

    fn repo_url(&self, project: &ProjectRef) -> String {
        format!(
            "{}/repos/{}/{}",
            self.opts.base_url.trim_end_matches('/'),
            project.owner(),
            project.name()
        )
    }

    fn first_page(&self, endpoint: Endpoint, project: &ProjectRef, window: &TimeWindow) -> String {
        let repo = self.repo_url(project);
        let pp = self.opts.per_page;
        let since = rfc3339(window.start());
        match endpoint {
            Endpoint::Commits => format!(
                "{repo}/commits?since={since}&until={}&per_page={pp}",
                rfc3339(window.end())
            ),
            Endpoint::Issues => format!("{repo}/issues?state=all&since={since}&per_page={pp}"),
            Endpoint::IssueComments => {
                format!("{repo}/issues/comments?since={since}&per_page={pp}")
            }
            Endpoint::PrReviewComments => {
                format!("{repo}/pulls/comments?since={since}&per_page={pp}")
            }
            Endpoint::IssueEvents => format!("{repo}/issues/events?per_page={pp}"),
        }
    }

    /// Fetch every in-window action of `project` into `store` and flush it.
    ///
    /// `aliases` maps commit author e-mails to logins for commits the API
    /// could not link to an account. On failure, whatever was fetched is still
    /// persisted along with the page to resume from.
    pub fn fetch_project(
        &self,
        project: &ProjectRef,
        window: &TimeWindow,
        store: &mut EventStore,
        aliases: &BTreeMap<String, String>,
    ) -> Result<FetchReport, IngestError> {
        let jobs: Vec<(Endpoint, String, EndpointSync)> = Endpoint::ALL
            .iter()
            .map(|&ep| {
                let prev = store
                    .sync_state(project, ep.name())
                    .cloned()
                    .unwrap_or_default();
                let start = match (&prev.next_url, prev.complete) {
                    (Some(url), false) => url.clone(),
                    _ => self.first_page(ep, project, window),
                };
                (ep, start, prev)
            })
            .collect();

        let outcomes: Vec<Mutex<Option<EndpointOutcome>>> =
            jobs.iter().map(|_| Mutex::new(None)).collect();
        let next_job = AtomicUsize::new(0);
        let workers = self.opts.workers.clamp(1, jobs.len());
        {
            let store_ref: &EventStore = store;
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let i = next_job.fetch_add(1, Ordering::SeqCst);
                        let Some((ep, start, prev)) = jobs.get(i) else {
                            break;
                        };
                        let outcome = self.run_endpoint(
                            *ep,
                            project,
                            window,
                            start.clone(),
                            prev,
                            store_ref,
                            aliases,
                        );
                        *outcomes[i].lock().unwrap() = Some(outcome);
                    });
                }
            });
        }

        let mut report = FetchReport {
            project: Some(project.clone()),
            ..FetchReport::default()
        };
        let mut first_error = None;
        for ((ep, _, _), slot) in jobs.iter().zip(outcomes) {
            let outcome = slot.into_inner().unwrap().expect("every job ran");
            report.seen_events += outcome.events.len() + outcome.known_commits;
            let added = store.insert(outcome.events);
            report.new_events += added;
            report.unattributed_commits += outcome.unattributed;
            report.per_endpoint.insert(ep.name().to_string(), added);
            store.set_sync_state(project, ep.name(), outcome.sync);
            if first_error.is_none() {
                first_error = outcome.error;
            }
        }
        store.flush()?;
        match first_error {
            Some(e) => Err(e),
            None => Ok(report),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn run_endpoint(
        &self,
        endpoint: Endpoint,
        project: &ProjectRef,
        window: &TimeWindow,
        start: String,
        prev: &EndpointSync,
        store: &EventStore,
        aliases: &BTreeMap<String, String>,
    ) -> EndpointOutcome {
        let mut out = EndpointOutcome {
            events: Vec::new(),
            sync: EndpointSync {
                next_url: None,
                complete: false,
                pages: if prev.complete { 0 } else { prev.pages },
                fetched_at: Some(self.clock.now()),
            },
            unattributed: 0,
            known_commits: 0,
            error: None,
        };
        let mut url = Some(start);
        while let Some(current) = url.take() {
            let page = self.get(&current).and_then(|resp| {
                let next = resp.header("link").and_then(next_link);
                self.parse_page(
                    endpoint, project, window, &resp.body, store, aliases, &mut out,
                )
                .map(|_| next)
            });
            match page {
                Ok(next) => {
                    out.sync.pages += 1;
                    url = next;
                }
                Err(GetError::EmptyRepository) => break,
                Err(e) => {
                    out.sync.next_url = Some(current.clone());
                    out.error = Some(self.map_error(e, endpoint, project, &current));
                    return out;
                }
            }
        }
        out.sync.complete = true;
        out
    }

    fn map_error(
        &self,
        e: GetError,
        endpoint: Endpoint,
        project: &ProjectRef,
        url: &str,
    ) -> IngestError {
        match e {
            GetError::Auth(status) => IngestError::Auth {
                url: url.to_string(),
                status,
            },
            GetError::NotFound => IngestError::NotFound {
                url: url.to_string(),
            },
            GetError::Transport(reason) => IngestError::PartialFetch {
                project: project.clone(),
                endpoint: endpoint.name().to_string(),
                reason,
            },
            GetError::Status(s) => IngestError::PartialFetch {
                project: project.clone(),
                endpoint: endpoint.name().to_string(),
                reason: format!("HTTP {s} from {url}"),
            },
            GetError::EmptyRepository => unreachable!("handled by caller"),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn parse_page(
        &self,
        endpoint: Endpoint,
        project: &ProjectRef,
        window: &TimeWindow,
        body: &str,
        store: &EventStore,
        aliases: &BTreeMap<String, String>,
        out: &mut EndpointOutcome,
    ) -> Result<(), GetError> {
        let bad = |e: serde_json::Error| GetError::Transport(format!("malformed payload: {e}"));
        let host = self.opts.web_host.as_str();
        match endpoint {
            Endpoint::Commits => {
                let commits: Vec<ApiCommit> = serde_json::from_str(body).map_err(bad)?;
                for c in commits {
                    let Some(ts) = c.commit.author.as_ref().and_then(|a| a.date) else {
                        continue;
                    };
                    if !window.contains(ts) {
                        continue;
                    }
                    let linked = c
                        .author
                        .as_ref()
                        .and_then(|u| u.login.clone().map(|l| (l, u.is_bot())));
                    let (actor, bot) = match linked {
                        Some(found) => found,
                        None => {
                            let email = c.commit.author.as_ref().and_then(|a| a.email.clone());
                            match email.as_ref().and_then(|e| aliases.get(&e.to_lowercase())) {
                                Some(login) => (login.clone(), false),
                                None => {
                                    log::warn!(
                                        "{project}: dropping commit {} with unresolvable author {:?}",
                                        c.sha,
                                        email
                                    );
                                    out.unattributed += 1;
                                    continue;
                                }
                            }
                        }
                    };
                    let id = c
                        .node_id
                        .clone()
                        .unwrap_or_else(|| format!("commit:{}", c.sha));
                    if store.contains(project, EventKind::Commit, &id) {
                        out.known_commits += 1;
                        continue;
                    }
                    let detail_url = format!("{}/commits/{}", self.repo_url(project), c.sha);
                    let detail: ApiCommitDetail =
                        serde_json::from_str(&self.get(&detail_url)?.body).map_err(bad)?;
                    let mut files: Vec<String> =
                        detail.files.into_iter().map(|f| f.filename).collect();
                    files.sort();
                    files.dedup();
                    let mut ev =
                        ActionEvent::new(id, project.clone(), actor, ts, EventKind::Commit);
                    ev.actor_is_bot = bot;
                    ev.loc_changed = detail.stats.map_or(0, |s| s.additions + s.deletions);
                    ev.files = files;
                    out.events.push(ev);
                }
            }
            Endpoint::Issues => {
                let issues: Vec<ApiIssue> = serde_json::from_str(body).map_err(bad)?;
                for i in issues {
                    let Some((login, bot)) = user_of(&i.user) else {
                        continue;
                    };
                    if !window.contains(i.created_at) {
                        continue;
                    }
                    let kind = if i.pull_request.is_some() {
                        EventKind::PrOpened
                    } else {
                        EventKind::IssueOpened
                    };
                    let mut ev = ActionEvent::new(
                        event_id(i.node_id, "issue", i.id),
                        project.clone(),
                        login,
                        i.created_at,
                        kind,
                    )
                    .with_body(i.body.as_deref().unwrap_or(""), host);
                    ev.actor_is_bot = bot;
                    out.events.push(ev);
                }
            }
            Endpoint::IssueComments | Endpoint::PrReviewComments => {
                let comments: Vec<ApiComment> = serde_json::from_str(body).map_err(bad)?;
                for c in comments {
                    let Some((login, bot)) = user_of(&c.user) else {
                        continue;
                    };
                    if !window.contains(c.created_at) {
                        continue;
                    }
                    let on_pr = endpoint == Endpoint::PrReviewComments
                        || c.html_url.as_deref().is_some_and(|u| u.contains("/pull/"));
                    let kind = if on_pr {
                        EventKind::PrComment
                    } else {
                        EventKind::IssueComment
                    };
                    let mut ev = ActionEvent::new(
                        event_id(c.node_id, "comment", c.id),
                        project.clone(),
                        login,
                        c.created_at,
                        kind,
                    )
                    .with_body(c.body.as_deref().unwrap_or(""), host);
                    ev.actor_is_bot = bot;
                    out.events.push(ev);
                }
            }
            Endpoint::IssueEvents => {
                let events: Vec<ApiIssueEvent> = serde_json::from_str(body).map_err(bad)?;
                for e in events {
                    let Some((login, bot)) = user_of(&e.actor) else {
                        continue;
                    };
                    if !window.contains(e.created_at) {
                        continue;
                    }
                    let on_pr = e.issue.as_ref().is_some_and(|i| i.pull_request.is_some());
                    let kind = match (e.event.as_str(), on_pr) {
                        ("labeled" | "unlabeled", false) => EventKind::IssueLabelChange,
                        ("labeled" | "unlabeled", true) => EventKind::PrLabelChange,
                        ("closed", false) => EventKind::IssueClosed,
                        ("closed", true) => EventKind::PrClosed,
                        _ => continue,
                    };
                    let mut ev = ActionEvent::new(
                        event_id(e.node_id, "event", e.id),
                        project.clone(),
                        login,
                        e.created_at,
                        kind,
                    );
                    ev.actor_is_bot = bot;
                    out.events.push(ev);
                }
            }
        }
        Ok(())
    }
}

fn user_of(user: &Option<ApiUser>) -> Option<(String, bool)> {
    let u = user.as_ref()?;
    Some((u.login.clone()?, u.is_bot()))
}
