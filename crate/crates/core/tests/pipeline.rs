mod common;

use std::path::{Path, PathBuf};

use minilang::{run_test, statement_lines, ExecutionLimits, RawCoverage};
use slicegen::config::RunConfig;
use slicegen::gateway::Transcript;
use slicegen::pipeline::{run_pipeline, PipelineError};
use slicegen::report::{format_percent, parse_csv, parse_json, render_csv, MethodStatus};

use common::{fixtures, tree_hashes};

fn config(project: PathBuf, out: &Path) -> RunConfig {
    RunConfig {
        project,
        out: out.to_path_buf(),
        stable_output: true,
        ..RunConfig::default()
    }
}

/// Copies proj-a into a temporary directory, keeping only the transcripts
/// that `keep` accepts.
fn proj_a_copy(keep: impl Fn(&Transcript) -> bool) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for name in ["grades.mini", "shipping.mini"] {
        std::fs::copy(fixtures().join("proj-a").join(name), dir.path().join(name)).unwrap();
    }
    let text = std::fs::read_to_string(fixtures().join("proj-a/transcripts.jsonl")).unwrap();
    let kept: String = text
        .lines()
        .filter(|l| keep(&serde_json::from_str(l).unwrap()))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(dir.path().join("transcripts.jsonl"), kept).unwrap();
    dir
}

#[test]
fn accepted_tests_pass_again_and_reproduce_the_coverage() {
    let out = tempfile::tempdir().unwrap();
    let result = run_pipeline(&config(fixtures().join("proj-a"), out.path())).unwrap();
    let project = slicegen::focal::Project::load(&fixtures().join("proj-a")).unwrap();
    for m in &result.report.projects[0].methods {
        let (file, name) = m.focal.split_once("::").unwrap();
        let program = &project.file(file).unwrap().program;
        let dir = result.run_dir.join(slicegen::focal::focal_dir_name(&m.focal));
        let mut merged = RawCoverage::default();
        for id in &m.accepted {
            let (slice, test) = id
                .rsplit_once('/')
                .map(|(a, t)| (a.rsplit('/').next().unwrap(), t))
                .unwrap();
            let fixed = dir.join(slice).join(format!("test-{test}.fixed.mini"));
            let path = if fixed.exists() {
                fixed
            } else {
                dir.join(slice).join(format!("test-{test}.mini"))
            };
            let outcome = run_test(
                program,
                &std::fs::read_to_string(&path).unwrap(),
                &ExecutionLimits::default(),
            );
            assert!(outcome.passed(), "{}: {}", path.display(), outcome.message);
            merged.merge(&outcome.coverage);
        }
        let f = program.function(name).unwrap();
        let executable = statement_lines(f);
        let covered = merged.lines_of(name).intersection(&executable).count() as u64;
        assert_eq!(
            (covered, executable.len() as u64),
            (m.line_covered, m.line_total),
            "{}",
            m.focal
        );
    }
}

#[test]
fn a_replay_miss_errors_only_that_method() {
    let project = proj_a_copy(|t| !t.request.messages.iter().any(|m| m.content.contains("shipping_cost")));
    let out = tempfile::tempdir().unwrap();
    let result = run_pipeline(&config(project.path().to_path_buf(), out.path())).unwrap();
    let methods = &result.report.projects[0].methods;
    assert_eq!(methods.len(), 2);
    assert_eq!(methods[0].status, MethodStatus::Ok);
    assert_eq!(methods[0].passed, 5);
    assert_eq!(methods[1].status, MethodStatus::Errored);
    assert!(
        methods[1].error.as_deref().unwrap().contains("no recorded transcript"),
        "{:?}",
        methods[1].error
    );
    assert!(result.report.any_errored());
    assert!(result.run_dir.join("report.json").exists());
}

#[test]
fn missing_transcripts_are_fatal() {
    let project = proj_a_copy(|_| true);
    std::fs::remove_file(project.path().join("transcripts.jsonl")).unwrap();
    let out = tempfile::tempdir().unwrap();
    assert!(matches!(
        run_pipeline(&config(project.path().to_path_buf(), out.path())),
        Err(PipelineError::Backend(_))
    ));
}

#[test]
fn worker_count_does_not_change_the_tree() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let one = run_pipeline(&config(fixtures().join("proj-a"), a.path())).unwrap();
    let two = run_pipeline(&RunConfig {
        workers: 2,
        ..config(fixtures().join("proj-a"), b.path())
    })
    .unwrap();
    assert_eq!(tree_hashes(&one.run_dir), tree_hashes(&two.run_dir));
}

#[test]
fn refuses_to_overwrite_unrelated_directories() {
    let out = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(out.path().join("stable")).unwrap();
    std::fs::write(out.path().join("stable/notes.txt"), "mine").unwrap();
    assert!(matches!(
        run_pipeline(&config(fixtures().join("proj-a"), out.path())),
        Err(PipelineError::Io { .. })
    ));
    assert!(out.path().join("stable/notes.txt").exists());
}

#[test]
fn written_reports_agree_with_an_independent_recomputation() {
    let out = tempfile::tempdir().unwrap();
    let result = run_pipeline(&config(fixtures().join("proj-a"), out.path())).unwrap();
    let json = std::fs::read_to_string(result.run_dir.join("report.json")).unwrap();
    let csv = std::fs::read_to_string(result.run_dir.join("report.csv")).unwrap();
    let report = parse_json(&json).unwrap();
    assert_eq!(report, result.report);
    assert_eq!(parse_csv(&csv).unwrap(), report);
    assert_eq!(render_csv(&report), csv);

    let methods = &report.projects[0].methods;
    let mean = |f: &dyn Fn(&slicegen::report::MethodReport) -> (u64, u64)| {
        let xs: Vec<f64> = methods.iter().map(f).map(|(n, d)| n as f64 / d as f64).collect();
        xs.iter().sum::<f64>() / xs.len() as f64 * 100.0
    };
    let line = mean(&|m| (m.line_covered, m.line_total));
    let branch = mean(&|m| (m.branch_covered, m.branch_total));
    let passed: u64 = methods.iter().map(|m| m.passed).sum();
    let total: u64 = methods.iter().map(|m| m.candidates).sum();
    let avg = report.average();
    for (got, want) in [
        (format_percent(&avg.line_coverage), line),
        (format_percent(&avg.branch_coverage), branch),
        (format_percent(&avg.pass_rate), passed as f64 / total as f64 * 100.0),
    ] {
        assert_eq!(got, format!("{want:.2}"));
    }
}
