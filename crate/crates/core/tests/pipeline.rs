mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use rolescope::config::RunConfig;
use rolescope::pipeline::{cmd_analyze, ARTIFACTS, MANIFEST_FILE};
use rolescope::report::{cmd_report, verify_artifacts, ReportFormat};
use rolescope::synth::{write_store, SynthOptions};
use rolescope::Error;

fn synth_config(dir: &Path, out: &str) -> RunConfig {
    let opts = SynthOptions {
        contributors: 300,
        projects: 4,
        seed: 7,
        ..SynthOptions::default()
    };
    write_store(&dir.join("store"), &opts).unwrap();
    let text = format!("output_dir = \"{out}\"\n[cluster]\nactive_k = 2\nsupporting_k = 3\n");
    RunConfig::from_toml_str(&text).unwrap().with_base_dir(dir)
}

fn read_all(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    ARTIFACTS
        .iter()
        .chain([&MANIFEST_FILE])
        .map(|n| (n.to_string(), fs::read(dir.join(n)).unwrap()))
        .collect()
}

#[test]
fn analysis_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth_config(dir.path(), "a");
    let b = synth_config(dir.path(), "b");
    let ma = cmd_analyze(&a, None).unwrap();
    cmd_analyze(&b, None).unwrap();
    let (fa, mut fb) = (read_all(&a.output_path()), read_all(&b.output_path()));
    // the manifest records the configured output directory, nothing else differs
    let strip = |bytes: &[u8]| {
        String::from_utf8_lossy(bytes).replace("\"output_dir\": \"b\"", "\"output_dir\": \"a\"")
    };
    let mb = fb.remove(MANIFEST_FILE).unwrap();
    assert_eq!(strip(&mb), String::from_utf8_lossy(&fa[MANIFEST_FILE]));
    for (name, bytes) in &fb {
        assert!(fa[name] == *bytes, "{name} differs");
    }
    assert_eq!(ma.summary.active_roles + ma.summary.supporting_roles, 5);
    assert!(!dir.path().join(".a.partial").exists());

    // re-running into the same directory reproduces it exactly
    cmd_analyze(&a, None).unwrap();
    assert_eq!(read_all(&a.output_path()), fa);
}

#[test]
fn report_renders_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_config(dir.path(), "out");
    let manifest = cmd_analyze(&cfg, None).unwrap();
    let out = cfg.output_path();
    let text = cmd_report(&out, ReportFormat::Text).unwrap();
    let md = cmd_report(&out, ReportFormat::Markdown).unwrap();
    assert!(
        text.contains(&format!("{} contributor-quarters", manifest.summary.rows)),
        "{text}"
    );
    assert!(
        md.lines().any(|l| l.starts_with('|') && l.contains("---:")),
        "{md}"
    );
    for label in ["Rare Contributor", "commits_made"] {
        assert!(
            text.contains(label) && md.contains(label),
            "missing {label}"
        );
    }
    assert!(md.contains("**"));
}

#[test]
fn tampered_artifacts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_config(dir.path(), "out");
    cmd_analyze(&cfg, None).unwrap();
    let out = cfg.output_path();
    verify_artifacts(&out).unwrap();

    let rci = out.join("rci.csv");
    let original = fs::read(&rci).unwrap();
    fs::write(&rci, [original.as_slice(), b"\n"].concat()).unwrap();
    let err = verify_artifacts(&out).unwrap_err();
    assert!(
        matches!(err, Error::Schema { .. }) && err.to_string().contains("checksum"),
        "{err}"
    );
    fs::write(&rci, &original).unwrap();

    let manifest_path = out.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["schema_version"] = serde_json::json!(999);
    fs::write(&manifest_path, serde_json::to_vec(&doc).unwrap()).unwrap();
    let err = cmd_report(&out, ReportFormat::Text).unwrap_err();
    assert!(err.to_string().contains("schema version 999"), "{err}");
    fs::write(&manifest_path, text).unwrap();

    fs::remove_file(out.join("roles.json")).unwrap();
    assert!(matches!(
        verify_artifacts(&out).unwrap_err(),
        Error::MissingArtifact(_)
    ));
}

fn cli(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rolescope"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    // nothing fetched yet: no data
    assert_eq!(cli(p, &["analyze"]).status.code(), Some(4));
    // malformed config
    fs::write(p.join("bad.toml"), "unknown_key = 1\n").unwrap();
    assert_eq!(
        cli(p, &["-c", "bad.toml", "analyze"]).status.code(),
        Some(2)
    );
    fs::write(p.join("range.toml"), "[cluster]\nk_min = 5\nk_max = 2\n").unwrap();
    assert_eq!(
        cli(p, &["-c", "range.toml", "metrics"]).status.code(),
        Some(2)
    );

    let ok = cli(
        p,
        &[
            "synth",
            "--contributors",
            "200",
            "--projects",
            "3",
            "--seed",
            "3",
        ],
    );
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    let ok = cli(p, &["analyze"]);
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    let report = cli(p, &["report", "--format", "markdown"]);
    assert!(report.status.success());
    assert!(String::from_utf8_lossy(&report.stdout).starts_with('#'));
    assert!(p.join("out/metrics.csv").exists());
}
