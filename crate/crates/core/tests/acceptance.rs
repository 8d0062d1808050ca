//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Timing limits apply to the build profile the run uses.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;

use rolescope::cluster::{silhouette, ward_cluster, Group};
use rolescope::config::RunConfig;
use rolescope::dynamics::{count_transitions, rci, AbsentMode, RoleCatalog, RoleTrajectory, Slot};
use rolescope::factor::{
    fit_factor_model, paf_from_correlation, rotate_oblimin, standardize_columns, FactorOptions,
    PafOptions, RotationOptions,
};
use rolescope::metrics::{Metric, MetricsRow};
use rolescope::pipeline::{
    build_metrics, cmd_analyze, cmd_fetch, load_events, ARTIFACTS, MANIFEST_FILE,
};
use rolescope::synth::{write_store, SynthOptions};

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("v{j}")).collect()
}

fn standardization() -> Check {
    let mut r = common::rng(1);
    for case in 0..200 {
        let n = r.gen_range(2..300);
        let p = r.gen_range(2..10);
        let mut x = DMatrix::from_fn(n, p, |_, _| r.gen_range(-1e4..1e4));
        let constant = r.gen_range(0..p);
        x.column_mut(constant).fill(3.25);
        let z = match standardize_columns(&x, &names(p)) {
            // a single remaining column is rejected as degenerate
            Err(_) if p == 2 => continue,
            other => other.map_err(|e| format!("case {case}: {e}"))?,
        };
        ensure!(
            z.pruned.len() == 1 && z.pruned[0].index == constant,
            "case {case}: pruned {:?}",
            z.pruned
        );
        check_moments(&z.values).map_err(|e| format!("case {case}: {e}"))?;
    }
    let n = 50_000;
    let x = DMatrix::from_fn(n, 19, |i, j| {
        ((i * 31 + j * 17) % 97) as f64 * (j + 1) as f64
    });
    let t = Instant::now();
    let z = standardize_columns(&x, &names(19)).map_err(|e| e.to_string())?;
    let took = t.elapsed();
    check_moments(&z.values)?;
    ensure!(took < Duration::from_secs(1), "n = 50000 took {took:?}");
    Ok(format!("200 random matrices; n = 50000 in {took:.2?}"))
}

fn check_moments(z: &DMatrix<f64>) -> std::result::Result<(), String> {
    let n = z.nrows() as f64;
    for j in 0..z.ncols() {
        let col = z.column(j);
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        ensure!(mean.abs() < 1e-9, "column {j}: mean {mean:e}");
        ensure!((var - 1.0).abs() < 1e-9, "column {j}: var {var}");
    }
    Ok(())
}

fn paf_oracle() -> Check {
    let r = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.64 });
    let res = paf_from_correlation(&r, PafOptions::default()).map_err(|e| e.to_string())?;
    ensure!(res.loadings.ncols() == 1, "k = {}", res.loadings.ncols());
    for i in 0..3 {
        let (l, h2) = (res.loadings[(i, 0)], res.communalities[i]);
        ensure!((l - 0.8).abs() <= 0.01, "loading {i} = {l}");
        ensure!((h2 - 0.64).abs() <= 0.01, "h2 {i} = {h2}");
    }
    Ok(format!(
        "loading {:.4}, h2 {:.4}",
        res.loadings[(0, 0)].abs(),
        res.communalities[0]
    ))
}

fn paf_recovery() -> Check {
    let t = Instant::now();
    let planted = common::PlantedFactorModel::standard();
    let x = planted.sample(10_000, 11);
    let z = standardize_columns(&x, &names(19)).map_err(|e| e.to_string())?;
    let model = fit_factor_model(&z, FactorOptions::default()).map_err(|e| e.to_string())?;
    let took = t.elapsed();
    ensure!(model.k() == 3, "retained {} factors", model.k());
    let c = common::matched_congruence(&model.loadings, &planted.pattern);
    ensure!(c.iter().all(|&v| v >= 0.95), "congruence {c:?}");
    ensure!(took < Duration::from_secs(30), "took {took:?}");
    Ok(format!(
        "k = 3, congruence {:.3}/{:.3}/{:.3} in {took:.2?}",
        c[0], c[1], c[2]
    ))
}

fn rotation_invariant() -> Check {
    let mut r = common::rng(4);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let p = r.gen_range(4..20);
        let k = r.gen_range(2..6).min(p - 1);
        let a = DMatrix::from_fn(p, k, |_, _| r.gen_range(-0.7..0.7));
        let rot = rotate_oblimin(&a, RotationOptions::default());
        let implied = &rot.pattern * &rot.phi * rot.pattern.transpose();
        for i in 0..p {
            let h2: f64 = a.row(i).iter().map(|v| v * v).sum();
            let d = (implied[(i, i)] - h2).abs();
            worst = worst.max(d);
            ensure!(d < 1e-6, "model {case}, row {i}: off by {d:e}");
        }
        ensure!(
            (0..k).all(|j| rot.phi[(j, j)] == 1.0),
            "model {case}: diag(phi) not exactly 1"
        );
    }
    Ok(format!("100 models, max communality drift {worst:.1e}"))
}

fn ward_oracle() -> Check {
    let mut r = common::rng(5);
    for case in 0..200 {
        let n = r.gen_range(2..=10);
        let dim = r.gen_range(1..=3);
        let p = common::random_points(r.gen(), n, dim);
        let fast = ward_cluster(&p);
        let slow = common::naive_ward(&p);
        for (step, (f, s)) in fast.merges().iter().zip(&slow).enumerate() {
            let tol = 1e-9 * f.height.abs().max(1.0);
            ensure!(
                (f.left, f.right, f.size) == (s.left, s.right, s.size)
                    && (f.height - s.height).abs() <= tol,
                "instance {case}, merge {step}: {f:?} vs {s:?}"
            );
        }
    }
    for n in [10, 100, 1000] {
        let p = common::random_points(n as u64, n, 3);
        let sum: f64 = ward_cluster(&p).merges().iter().map(|m| m.height).sum();
        let tss = common::total_sum_of_squares(&p);
        ensure!(
            (sum - tss).abs() <= 1e-6 * tss.max(1.0),
            "n = {n}: {sum} vs {tss}"
        );
    }
    Ok("200 instances match; ESS decomposition holds to n = 1000".into())
}

fn silhouette_check() -> Check {
    let p = rolescope::cluster::Points::new(vec![0.0, 1.0, 10.0, 11.0], 1)
        .map_err(|e| e.to_string())?;
    let s = silhouette(&p, &[0, 0, 1, 1]).ok_or("no silhouette")?;
    ensure!((s[0] - 0.904762).abs() <= 1e-6, "point 0: {}", s[0]);
    let mut r = common::rng(6);
    for case in 0..100 {
        let n = r.gen_range(3..80);
        let k = r.gen_range(2..6).min(n);
        let pts = common::random_points(r.gen(), n, 3);
        let labels: Vec<usize> = (0..n)
            .map(|i| if i < k { i } else { r.gen_range(0..k) })
            .collect();
        let s = silhouette(&pts, &labels).ok_or("no silhouette")?;
        ensure!(
            s.iter().all(|v| (-1.0..=1.0).contains(v)),
            "case {case} out of range"
        );
    }
    Ok(format!(
        "point 0 = {:.6}; 100 random labelings bounded",
        s[0]
    ))
}

fn catalog() -> RoleCatalog {
    RoleCatalog {
        groups: [
            (1, Group::Active),
            (2, Group::Active),
            (3, Group::Supporting),
            (4, Group::Supporting),
        ]
        .into(),
        centroids: [
            (1, vec![0.0, 0.0]),
            (2, vec![6.0, 8.0]),
            (3, vec![3.0, 4.0]),
            (4, vec![-1.0, 2.0]),
        ]
        .into(),
        labels: BTreeMap::new(),
        rare: Some(3),
    }
}

fn traj(seq: Vec<Slot>) -> RoleTrajectory {
    RoleTrajectory::new("o/r".parse().unwrap(), "u", seq)
}

fn random_sequence(r: &mut impl Rng, len: usize) -> Vec<Slot> {
    (0..len)
        .map(|_| match r.gen_range(0..5) {
            0 => Slot::Absent,
            id => Slot::Role(id),
        })
        .collect()
}

fn rci_exact() -> Check {
    use Slot::*;
    let c = catalog();
    let v = |s: Vec<Slot>| rci(&traj(s), &c, AbsentMode::Origin).map_err(|e| e.to_string());
    ensure!(v(vec![Role(1), Role(2)])? == Some(1.0), "distance 10");
    ensure!(v(vec![Role(1), Role(3), Role(2)])? == Some(1.0), "5 + 5");
    ensure!(
        v(vec![Role(2); 12])?.is_none(),
        "constant trajectory scored"
    );
    let mut r = common::rng(7);
    for case in 0..1000 {
        let len = r.gen_range(2..=12);
        let seq = random_sequence(&mut r, len);
        let mut rev = seq.clone();
        rev.reverse();
        for mode in [AbsentMode::Origin, AbsentMode::Skip] {
            let (a, b) = (
                rci(&traj(seq.clone()), &c, mode).map_err(|e| e.to_string())?,
                rci(&traj(rev.clone()), &c, mode).map_err(|e| e.to_string())?,
            );
            ensure!(a == b, "trajectory {case}: {a:?} vs reversed {b:?}");
        }
    }
    Ok("crafted values exact; 1000 reversals identical".into())
}

fn transition_conservation() -> Check {
    use Slot::*;
    let mut r = common::rng(8);
    for case in 0..1000 {
        let count = r.gen_range(1..20);
        let trajs: Vec<RoleTrajectory> = (0..count)
            .map(|_| traj(random_sequence(&mut r, 12)))
            .collect();
        let m = count_transitions(&trajs, 4).map_err(|e| e.to_string())?;
        let mut starts = vec![0u64; 5];
        let mut ends = vec![0u64; 5];
        for t in &trajs {
            for w in t.sequence.windows(2) {
                starts[w[0].index()] += 1;
                ends[w[1].index()] += 1;
            }
        }
        ensure!(m.row_totals() == starts, "set {case}: row totals");
        ensure!(m.column_totals() == ends, "set {case}: column totals");
        ensure!(m.total() == 11 * count as u64, "set {case}: total");
    }
    let t = traj(vec![Absent, Role(3), Role(3), Absent]);
    let m = count_transitions([&t], 4).map_err(|e| e.to_string())?;
    let mut expected = vec![vec![0u64; 5]; 5];
    expected[0][3] = 1;
    expected[3][3] = 1;
    expected[3][0] = 1;
    ensure!(m.counts == expected, "worked example: {:?}", m.counts);
    Ok("1000 random sets conserve marginals; worked example exact".into())
}

fn metrics_fixture() -> Check {
    use Metric::*;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = common::metrics_fixture_config(dir.path());
    let m = build_metrics(&cfg).map_err(|e| e.to_string())?;
    let q1 = cfg
        .window
        .assign_quarter(common::ts(2015, 1, 10))
        .map_err(|e| e.to_string())?;
    let expected: Vec<(&str, u32, Vec<(Metric, f64)>)> = vec![
        (
            "alice",
            q1,
            vec![
                (CommitsMade, 3.0),
                (LocChanged, 120.0),
                (FilesWorkedOn, 2.0),
                (PrsMade, 2.0),
                (AvgPrDescLen, 15.0),
                (MentionedInIssueComments, 2.0),
                (MentionedInPrComments, 1.0),
            ],
        ),
        ("alice", q1 + 1, vec![(MentionedInIssueComments, 1.0)]),
        (
            "bob",
            q1,
            vec![
                (IssuesReported, 2.0),
                (AvgIssueDescLen, 40.0),
                (IssueComments, 3.0),
                (AvgIssueCommentLen, 30.0),
                (RefsInIssueComments, 4.0),
                (MentionedInPrComments, 1.0),
            ],
        ),
        (
            "bob",
            q1 + 1,
            vec![(IssueComments, 1.0), (AvgIssueCommentLen, 8.0)],
        ),
        (
            "carol",
            q1,
            vec![
                (PrComments, 2.0),
                (AvgPrCommentLen, 10.0),
                (RefsInPrComments, 2.0),
                (IssueLabelChanges, 2.0),
                (PrLabelChanges, 1.0),
                (IssuesClosed, 1.0),
                (PrsClosed, 2.0),
            ],
        ),
    ];
    ensure!(
        m.len() == expected.len(),
        "{} rows, expected {}",
        m.len(),
        expected.len()
    );
    for (row, (login, period, values)) in m.rows().iter().zip(&expected) {
        ensure!(
            row.key.login == *login && row.key.period == *period,
            "unexpected row {:?}",
            row.key
        );
        let mut want = [0.0; 19];
        for &(metric, v) in values {
            want[metric.column()] = v;
        }
        check_row(row, &want)?;
    }
    Ok("5 rows, all 19 metrics exact".into())
}

fn check_row(row: &MetricsRow, want: &[f64; 19]) -> std::result::Result<(), String> {
    for (j, (got, want)) in row.values.iter().zip(want).enumerate() {
        ensure!(
            got == want,
            "{} period {}: {} = {got}, expected {want}",
            row.key.login,
            row.key.period,
            Metric::from_column(j).unwrap().key()
        );
    }
    Ok(())
}

fn analyze_synthetic(
    dir: &Path,
) -> std::result::Result<(rolescope::pipeline::RunManifest, Duration), String> {
    write_store(&dir.join("store"), &SynthOptions::default()).map_err(|e| e.to_string())?;
    let cfg = RunConfig::from_toml_str("[cluster]\nselect = \"silhouette\"\n")
        .map_err(|e| e.to_string())?
        .with_base_dir(dir);
    let t = Instant::now();
    let manifest = cmd_analyze(&cfg, None).map_err(|e| e.to_string())?;
    Ok((manifest, t.elapsed()))
}

fn end_to_end() -> Check {
    let (a, b) = (
        tempfile::tempdir().map_err(|e| e.to_string())?,
        tempfile::tempdir().map_err(|e| e.to_string())?,
    );
    let (manifest, took) = analyze_synthetic(a.path())?;
    analyze_synthetic(b.path())?;
    let s = &manifest.summary;
    ensure!(s.factors == 3, "{} factors", s.factors);
    ensure!(
        (s.active_roles, s.supporting_roles) == (2, 3),
        "{} active + {} supporting roles, planted 2 + 3",
        s.active_roles,
        s.supporting_roles
    );
    for name in ARTIFACTS.iter().chain([&MANIFEST_FILE]) {
        let x = fs::read(a.path().join("out").join(name)).map_err(|e| e.to_string())?;
        let y = fs::read(b.path().join("out").join(name)).map_err(|e| e.to_string())?;
        ensure!(x == y, "{name} differs between runs");
    }
    ensure!(took < Duration::from_secs(60), "analyze took {took:?}");
    Ok(format!(
        "{} rows, 3 factors, 2 + 3 roles, identical artifacts; analyze in {took:.2?}",
        s.rows
    ))
}

fn ingestion_replay() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = common::replay_config(dir.path());
    let first = cmd_fetch(&cfg).map_err(|e| e.to_string())?;
    ensure!(
        first[0].new_events == 12,
        "{} events stored, expected 12",
        first[0].new_events
    );
    let per: Vec<usize> = first[0].per_endpoint.values().copied().collect();
    // commits, issue_comments, issue_events, issues, pr_review_comments
    ensure!(
        per == [3, 2, 3, 3, 1],
        "per endpoint {:?}",
        first[0].per_endpoint
    );
    let again = cmd_fetch(&cfg).map_err(|e| e.to_string())?;
    ensure!(
        again[0].new_events == 0,
        "re-fetch added {}",
        again[0].new_events
    );
    let kept = load_events(&cfg).map_err(|e| e.to_string())?;
    ensure!(
        kept.len() == 9,
        "{} events after bot filtering, expected 9",
        kept.len()
    );
    for dropped in ["renovate[bot]", "dependabot[bot]", "ci-helper"] {
        ensure!(
            !kept.iter().any(|e| e.actor == dropped),
            "{dropped} not filtered"
        );
    }
    Ok("12 events, re-fetch adds 0, 3 bot events filtered".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("standardization", standardization),
        ("PAF analytic oracle", paf_oracle),
        ("PAF planted recovery", paf_recovery),
        ("rotation invariant", rotation_invariant),
        ("Ward oracle equivalence", ward_oracle),
        ("silhouette hand-check", silhouette_check),
        ("RCI exactness", rci_exact),
        ("transition conservation", transition_conservation),
        ("metrics fixture", metrics_fixture),
        ("end-to-end determinism and scale", end_to_end),
        ("ingestion replay", ingestion_replay),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2}: {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
