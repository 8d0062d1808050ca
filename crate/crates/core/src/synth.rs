//! Seeded synthetic event data with a planted activity and role structure.
//!
//! Each contributor-quarter draws its activity from one of five planted roles.
//! A role is a profile over three latent activities (code, issue work, pull
//! request work); every event count is Poisson with a rate proportional to
//! one activity level, so the 19 metrics share three common factors. Two of
//! the roles are high-volume (the Active group), three are low-volume.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::Duration;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::cluster::Group;
use crate::ingest::{ActionEvent, EventKind, EventStore, IngestError, ProjectRef, TimeWindow};
use crate::metrics::RowKey;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedRole {
    pub name: String,
    pub group: Group,
    /// Mean levels of the code, issue and pull request activities.
    pub profile: [f64; 3],
    /// Relative share of contributors whose home role this is.
    pub share: f64,
    /// Probability of being present in a quarter.
    pub presence: f64,
}

pub fn planted_roles() -> Vec<PlantedRole> {
    let role = |name: &str, group, profile, share, presence| PlantedRole {
        name: name.to_string(),
        group,
        profile,
        share,
        presence,
    };
    vec![
        role("Code Lead", Group::Active, [10.0, 5.0, 5.0], 0.05, 0.9),
        role("Maintainer", Group::Active, [4.0, 10.0, 10.0], 0.05, 0.9),
        role("Rare", Group::Supporting, [0.3, 0.3, 0.3], 0.5, 0.35),
        role("Reporter", Group::Supporting, [0.2, 3.0, 0.3], 0.2, 0.5),
        role("Fixer", Group::Supporting, [3.0, 0.2, 0.5], 0.2, 0.5),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub contributors: usize,
    pub projects: usize,
    pub window: TimeWindow,
    pub seed: u64,
    /// Chance per quarter of acting in a different role of the same group.
    pub switch_within_group: f64,
    /// Chance per quarter of acting in a role of the other group.
    pub switch_across_groups: f64,
    /// Log-scale spread of per-quarter activity around the role profile.
    pub jitter: f64,
    /// Bot accounts per project; their events must be filtered out.
    pub bots_per_project: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            contributors: 1000,
            projects: 10,
            window: TimeWindow::default(),
            seed: 42,
            switch_within_group: 0.15,
            switch_across_groups: 0.05,
            jitter: 0.25,
            bots_per_project: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub events: Vec<ActionEvent>,
    pub roles: Vec<PlantedRole>,
    /// Planted role index per contributor-quarter that produced activity.
    pub truth: BTreeMap<RowKey, usize>,
}

struct Draw<'a> {
    rng: &'a mut ChaCha8Rng,
}

impl Draw<'_> {
    fn poisson(&mut self, rate: f64) -> u64 {
        if rate <= 0.0 {
            return 0;
        }
        Poisson::new(rate).expect("positive rate").sample(self.rng) as u64
    }
}

/// Generate the dataset. Identical options give identical output.
pub fn generate(opts: &SynthOptions) -> SynthDataset {
    let roles = planted_roles();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let home_dist = WeightedIndex::new(roles.iter().map(|r| r.share)).expect("positive shares");
    let jitter = LogNormal::new(0.0, opts.jitter).expect("valid jitter");
    let projects: Vec<ProjectRef> = (0..opts.projects.max(1))
        .map(|i| ProjectRef::new("synth", format!("project-{i:02}")).expect("valid name"))
        .collect();
    let periods = opts.window.periods() as u32;
    let quarter_secs = 89 * 24 * 3600;

    let mut events = Vec::new();
    let mut truth = BTreeMap::new();
    let mut next_id = 0u64;
    let mut id = || {
        next_id += 1;
        format!("synth-{next_id:08}")
    };
    // (project, period) -> comment event indices, for planting mentions
    let mut comments: BTreeMap<(usize, u32, EventKind), Vec<usize>> = BTreeMap::new();
    let mut mention_targets: Vec<(usize, u32, String, EventKind, u64, usize)> = Vec::new();

    for c in 0..opts.contributors {
        let project_ix = c % projects.len();
        let project = &projects[project_ix];
        let login = format!("dev{c:04}");
        let home = home_dist.sample(&mut rng);
        for period in 1..=periods {
            if !rng.gen_bool(roles[home].presence) {
                continue;
            }
            let u: f64 = rng.gen();
            let role = if u < opts.switch_across_groups {
                pick_in_group(&roles, roles[home].group, true, home, &mut rng)
            } else if u < opts.switch_across_groups + opts.switch_within_group {
                pick_in_group(&roles, roles[home].group, false, home, &mut rng)
            } else {
                home
            };
            let level: Vec<f64> = roles[role]
                .profile
                .iter()
                .map(|p| p * jitter.sample(&mut rng))
                .collect();
            let (code, issue, pr) = (level[0], level[1], level[2]);
            let start = opts.window.period_start(period);
            let when =
                |rng: &mut ChaCha8Rng| start + Duration::seconds(rng.gen_range(0..quarter_secs));
            let mut d = Draw { rng: &mut rng };
            let before = events.len();

            for _ in 0..d.poisson(1.0 * code) {
                let t = when(d.rng);
                let mut e = ActionEvent::new(id(), project.clone(), &login, t, EventKind::Commit);
                e.loc_changed = 5 + d.poisson(30.0);
                let nfiles = 1 + d.poisson(1.0);
                e.files = (0..nfiles)
                    .map(|_| format!("src/f{:03}.rs", d.rng.gen_range(0..400)))
                    .collect();
                events.push(e);
            }
            for _ in 0..d.poisson(0.5 * code) {
                let t = when(d.rng);
                let mut e = ActionEvent::new(id(), project.clone(), &login, t, EventKind::PrOpened);
                e.body_length = 40 + d.poisson(60.0 + 6.0 * code);
                events.push(e);
            }
            for _ in 0..d.poisson(0.5 * issue) {
                let t = when(d.rng);
                let mut e =
                    ActionEvent::new(id(), project.clone(), &login, t, EventKind::IssueOpened);
                e.body_length = 40 + d.poisson(80.0 + 8.0 * issue);
                events.push(e);
            }
            for _ in 0..d.poisson(1.0 * issue) {
                let t = when(d.rng);
                let mut e =
                    ActionEvent::new(id(), project.clone(), &login, t, EventKind::IssueComment);
                e.body_length = 20 + d.poisson(40.0 + 5.0 * issue);
                e.references = d.poisson(0.4);
                comments
                    .entry((project_ix, period, EventKind::IssueComment))
                    .or_default()
                    .push(events.len());
                events.push(e);
            }
            for _ in 0..d.poisson(1.0 * pr) {
                let t = when(d.rng);
                let mut e =
                    ActionEvent::new(id(), project.clone(), &login, t, EventKind::PrComment);
                e.body_length = 20 + d.poisson(40.0 + 5.0 * pr);
                e.references = d.poisson(0.4);
                comments
                    .entry((project_ix, period, EventKind::PrComment))
                    .or_default()
                    .push(events.len());
                events.push(e);
            }
            let simple = [
                (EventKind::IssueLabelChange, 0.4 * issue),
                (EventKind::IssueClosed, 0.4 * issue),
                (EventKind::PrLabelChange, 0.4 * pr),
                (EventKind::PrClosed, 0.4 * pr),
            ];
            for (kind, rate) in simple {
                for _ in 0..d.poisson(rate) {
                    let t = when(d.rng);
                    events.push(ActionEvent::new(id(), project.clone(), &login, t, kind));
                }
            }
            let issue_mentions = d.poisson(0.4 * issue);
            let pr_mentions = d.poisson(0.4 * pr);
            mention_targets.push((
                project_ix,
                period,
                login.clone(),
                EventKind::IssueComment,
                issue_mentions,
                role,
            ));
            mention_targets.push((
                project_ix,
                period,
                login.clone(),
                EventKind::PrComment,
                pr_mentions,
                role,
            ));

            if events.len() > before {
                truth.insert(
                    RowKey {
                        project: project.clone(),
                        login: login.clone(),
                        period,
                    },
                    role,
                );
            }
        }
    }

    // attach mentions to comments written by someone else in the same quarter
    for (project_ix, period, login, kind, count, role) in mention_targets {
        let Some(pool) = comments.get(&(project_ix, period, kind)) else {
            continue;
        };
        let others: Vec<usize> = pool
            .iter()
            .copied()
            .filter(|&i| events[i].actor != login)
            .collect();
        if others.is_empty() || count == 0 {
            continue;
        }
        for _ in 0..count {
            let i = others[rng.gen_range(0..others.len())];
            events[i].mentions.push(login.clone());
            events[i].body_length += login.len() as u64 + 2;
        }
        let key = RowKey {
            project: projects[project_ix].clone(),
            login,
            period,
        };
        truth.entry(key).or_insert(role);
    }

    for (p, project) in projects.iter().enumerate() {
        for b in 0..opts.bots_per_project {
            let login = if b % 2 == 0 {
                format!("synth-ci-{p}[bot]")
            } else {
                format!("autobot-{p}")
            };
            for period in 1..=periods {
                let t = opts.window.period_start(period) + Duration::hours(1 + b as i64);
                let mut e =
                    ActionEvent::new(id(), project.clone(), &login, t, EventKind::PrComment);
                e.actor_is_bot = b % 2 == 1;
                e.body_length = 30;
                events.push(e);
            }
        }
    }

    events.sort_by(|a, b| a.canonical_cmp(b));
    SynthDataset {
        events,
        roles,
        truth,
    }
}

fn pick_in_group(
    roles: &[PlantedRole],
    group: Group,
    across: bool,
    home: usize,
    rng: &mut ChaCha8Rng,
) -> usize {
    let candidates: Vec<usize> = (0..roles.len())
        .filter(|&i| i != home && ((roles[i].group == group) != across))
        .collect();
    if candidates.is_empty() {
        home
    } else {
        candidates[rng.gen_range(0..candidates.len())]
    }
}

/// Write a generated dataset into a fresh event store at `dir`.
pub fn write_store(
    dir: &Path,
    opts: &SynthOptions,
) -> Result<(EventStore, SynthDataset), IngestError> {
    let data = generate(opts);
    let mut store = EventStore::open(dir)?;
    store.insert(data.events.iter().cloned());
    store.flush()?;
    Ok((store, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_seeded() {
        let opts = SynthOptions {
            contributors: 40,
            ..SynthOptions::default()
        };
        let a = generate(&opts);
        let b = generate(&opts);
        assert_eq!(a, b);
        let c = generate(&SynthOptions { seed: 7, ..opts });
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn events_fall_in_window_and_ids_are_unique() {
        let opts = SynthOptions {
            contributors: 60,
            ..SynthOptions::default()
        };
        let data = generate(&opts);
        let mut ids: Vec<&str> = data.events.iter().map(|e| e.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), data.events.len());
        assert!(data
            .events
            .iter()
            .all(|e| opts.window.contains(e.timestamp)));
    }
}
