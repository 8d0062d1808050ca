//! Helpers shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeZone, Utc};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rolescope::cluster::Points;
use rolescope::config::RunConfig;
use rolescope::ingest::{ActionEvent, EventKind, EventStore, ProjectRef};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(seed: u64, n: usize, dim: usize) -> Points {
    let mut r = rng(seed);
    let data = (0..n * dim).map(|_| r.gen_range(-10.0..10.0)).collect();
    Points::new(data, dim).unwrap()
}

/// One merge of the naive agglomeration: node ids as in `Dendrogram`
/// (leaves `0..n`, merge `i` is node `n + i`), `left < right`.
#[derive(Clone, Debug, PartialEq)]
pub struct NaiveMerge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Ward clustering by exhaustive search over a Lance-Williams updated
/// dissimilarity matrix, O(n^3). Dissimilarities are the increase in
/// within-cluster sum of squares, so two singletons start at half their
/// squared distance.
pub fn naive_ward(points: &Points) -> Vec<NaiveMerge> {
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let s: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[i][j] = s / 2.0;
        }
    }
    let mut size = vec![1usize; n];
    let mut node: Vec<usize> = (0..n).collect();
    let mut alive = vec![true; n];
    let mut merges = Vec::new();
    for step in 0..n.saturating_sub(1) {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            for j in i + 1..n {
                if alive[i] && alive[j] && d[i][j] < best.0 {
                    best = (d[i][j], i, j);
                }
            }
        }
        let (h, i, j) = best;
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for k in 0..n {
            if !alive[k] || k == i || k == j {
                continue;
            }
            let nk = size[k] as f64;
            let v = ((ni + nk) * d[i][k] + (nj + nk) * d[j][k] - nk * h) / (ni + nj + nk);
            d[i][k] = v;
            d[k][i] = v;
        }
        alive[j] = false;
        size[i] += size[j];
        let (a, b) = (node[i].min(node[j]), node[i].max(node[j]));
        merges.push(NaiveMerge {
            left: a,
            right: b,
            height: h,
            size: size[i],
        });
        node[i] = n + step;
    }
    merges
}

pub fn total_sum_of_squares(points: &Points) -> f64 {
    let all: Vec<usize> = (0..points.len()).collect();
    let c = points.centroid(&all);
    (0..points.len())
        .map(|i| {
            points
                .row(i)
                .iter()
                .zip(&c)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum()
}

/// A 19-variable, 3-factor oblique model: each variable loads mainly on one
/// factor, a few carry a secondary loading.
pub struct PlantedFactorModel {
    pub pattern: DMatrix<f64>,
    pub phi: DMatrix<f64>,
}

impl PlantedFactorModel {
    pub fn standard() -> Self {
        let p = 19;
        let mut pattern = DMatrix::zeros(p, 3);
        let primary = [0.85, 0.8, 0.75, 0.7, 0.65, 0.8];
        for i in 0..p {
            let f = i % 3;
            pattern[(i, f)] = primary[i % primary.len()];
        }
        for (i, f, v) in [(3, 1, 0.3), (7, 2, 0.25), (11, 0, 0.3), (16, 2, -0.2)] {
            pattern[(i, f)] = v;
        }
        let phi = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.2, 0.3, 1.0, 0.4, 0.2, 0.4, 1.0]);
        Self { pattern, phi }
    }

    /// Rows `x = pattern * f + e` with `f ~ N(0, phi)` and unique noise sized
    /// so every variable has unit variance.
    pub fn sample(&self, n: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng(seed);
        let l = self
            .phi
            .clone()
            .cholesky()
            .expect("phi is positive definite")
            .l();
        let common = &self.pattern * &self.phi * self.pattern.transpose();
        let p = self.pattern.nrows();
        let unique: Vec<f64> = (0..p)
            .map(|i| (1.0 - common[(i, i)]).max(0.0).sqrt())
            .collect();
        let mut x = DMatrix::zeros(n, p);
        for row in 0..n {
            let z = DVector::from_fn(3, |_, _| r.sample::<f64, _>(StandardNormal));
            let f = &l * z;
            let xs = &self.pattern * f;
            for j in 0..p {
                x[(row, j)] = xs[j] + unique[j] * r.sample::<f64, _>(StandardNormal);
            }
        }
        x
    }
}

/// Tucker congruence of two loading columns.
pub fn congruence(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Best per-factor congruence over all column permutations and sign flips.
pub fn matched_congruence(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> Vec<f64> {
    let k = truth.ncols();
    assert_eq!(est.ncols(), k);
    let col = |m: &DMatrix<f64>, j: usize| m.column(j).iter().copied().collect::<Vec<f64>>();
    let mut best: Option<Vec<f64>> = None;
    for perm in permutations(k) {
        let c: Vec<f64> = (0..k)
            .map(|j| congruence(&col(est, perm[j]), &col(truth, j)).abs())
            .collect();
        let worst = c.iter().copied().fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|b| {
            worst > b.iter().copied().fold(f64::INFINITY, f64::min)
        }) {
            best = Some(c);
        }
    }
    best.unwrap_or_default()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(k - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out
}

pub fn ts(y: i32, m: u32, d: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(y, m, d, 12, 0, 0).unwrap()
}

/// Hand-authored events for one project with known metric values. Every
/// number asserted by the metrics fixture tests is derived from this list.
pub fn metrics_fixture_events() -> Vec<ActionEvent> {
    let p = ProjectRef::new("fixture", "metrics").unwrap();
    let mut out = Vec::new();
    let mut id = 0;
    let mut ev = |actor: &str, t: DateTime<Utc>, kind: EventKind| {
        id += 1;
        ActionEvent::new(format!("ev-{id:03}"), p.clone(), actor, t, kind)
    };

    // alice, Q1 2015: 3 commits, 120 LOC, files {a, b}; PRs of length 10 and 20
    for (loc, files) in [
        (50, vec!["a.rs", "b.rs"]),
        (40, vec!["a.rs"]),
        (30, vec!["b.rs"]),
    ] {
        let mut e = ev("alice", ts(2015, 1, 10), EventKind::Commit);
        e.loc_changed = loc;
        e.files = files.into_iter().map(String::from).collect();
        out.push(e);
    }
    for len in [10, 20] {
        let mut e = ev("alice", ts(2015, 2, 1), EventKind::PrOpened);
        e.body_length = len;
        out.push(e);
    }
    // bob, Q1 2015: 2 issues (lengths 30, 50), 3 issue comments (lengths 10,
    // 20, 60) mentioning alice twice and an outsider once, 4 references
    for len in [30, 50] {
        let mut e = ev("bob", ts(2015, 2, 3), EventKind::IssueOpened);
        e.body_length = len;
        out.push(e);
    }
    for (len, mentions, refs) in [
        (10, vec!["alice"], 1),
        (20, vec!["ALICE", "outsider"], 0),
        (60, vec![], 3),
    ] {
        let mut e = ev("bob", ts(2015, 2, 4), EventKind::IssueComment);
        e.body_length = len;
        e.mentions = mentions.into_iter().map(String::from).collect();
        e.references = refs;
        out.push(e);
    }
    // carol, Q1 2015: 2 PR comments (lengths 5, 15) mentioning bob and alice,
    // 2 references; admin actions
    for (len, mentions, refs) in [(5, vec!["bob"], 2), (15, vec!["alice"], 0)] {
        let mut e = ev("carol", ts(2015, 3, 1), EventKind::PrComment);
        e.body_length = len;
        e.mentions = mentions.into_iter().map(String::from).collect();
        e.references = refs;
        out.push(e);
    }
    out.push(ev("carol", ts(2015, 3, 2), EventKind::IssueLabelChange));
    out.push(ev("carol", ts(2015, 3, 2), EventKind::IssueLabelChange));
    out.push(ev("carol", ts(2015, 3, 3), EventKind::PrLabelChange));
    out.push(ev("carol", ts(2015, 3, 4), EventKind::IssueClosed));
    out.push(ev("carol", ts(2015, 3, 5), EventKind::PrClosed));
    out.push(ev("carol", ts(2015, 3, 5), EventKind::PrClosed));
    // Q2: bob mentions alice, who is otherwise idle that quarter
    let mut e = ev("bob", ts(2015, 5, 1), EventKind::IssueComment);
    e.body_length = 8;
    e.mentions = vec!["alice".into()];
    out.push(e);
    // bot activity that must not reach the matrix
    let mut bot = ev("ci[bot]", ts(2015, 1, 11), EventKind::PrComment);
    bot.mentions = vec!["alice".into()];
    out.push(bot);
    let mut typed = ev("helper", ts(2015, 1, 12), EventKind::Commit);
    typed.actor_is_bot = true;
    out.push(typed);
    out.push(ev("denied-user", ts(2015, 1, 13), EventKind::IssueOpened));
    out
}

/// Write the metrics fixture into an event store and return a config
/// reading it (denylisting `denied-user`).
pub fn metrics_fixture_config(dir: &Path) -> RunConfig {
    let mut store = EventStore::open(dir.join("store")).unwrap();
    store.insert(metrics_fixture_events());
    store.flush().unwrap();
    let text = r#"
        projects = ["fixture/metrics"]
        [bots]
        denylist = ["Denied-User"]
    "#;
    RunConfig::from_toml_str(text).unwrap().with_base_dir(dir)
}

/// Config fetching `fix/small` from the recorded responses.
pub fn replay_config(dir: &Path) -> RunConfig {
    let text = format!(
        r#"
        projects = ["fix/small"]
        alias_file = "{aliases}"
        [bots]
        denylist = ["ci-helper"]
        [api]
        base_url = "https://api.fixture.test"
        per_page = 2
        workers = 2
        replay_dir = "{replay}"
        "#,
        aliases = fixtures().join("aliases.csv").display(),
        replay = fixtures().join("replay/small").display(),
    );
    RunConfig::from_toml_str(&text).unwrap().with_base_dir(dir)
}
