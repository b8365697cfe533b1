//! The end-to-end run: scan, decompose, generate per slice, isolate,
//! execute, repair, then measure the accepted suite.
//!
//! Focal methods are independent work units. Workers return their
//! artifacts in memory and the calling thread writes every file, so the
//! output tree does not depend on scheduling.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use minilang::{branch_lines, run_test, statement_lines, Program, RawCoverage, Status};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::config::RunConfig;
use crate::context::{build_context, render_markdown, ContextBundle};
use crate::extraction::{extract_payload, PayloadKind};
use crate::focal::{FocalMethod, Project, ScanError};
use crate::gateway::{BackendMode, Gateway, GatewayError, HttpTransport, TranscriptStore};
use crate::isolate::{isolate_tests, split_tests, CandidateState, TestCandidate};
use crate::prompting::{PromptAssets, PromptError};
use crate::repair::{self_debug_loop, FixContext, OutcomeSummary};
use crate::report::{
    render_csv, render_json, render_text, CalleeCoverage, CoverageReport, MethodReport, MethodStatus, ProjectReport,
};
use crate::slicing::{estimate_conditions, fallback_slice, validate_slice_plan, SlicePlan};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Project(#[from] ScanError),
    #[error(transparent)]
    Assets(#[from] PromptError),
    #[error("backend unavailable: {0}")]
    Backend(GatewayError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Builds the gateway the config asks for. Live and record modes need
/// `SLICEGEN_API_KEY`.
pub fn gateway_from_config(cfg: &RunConfig) -> Result<Gateway, PipelineError> {
    let gateway = match cfg.backend {
        BackendMode::Replay => {
            let path = cfg.transcripts_path();
            if !path.exists() {
                return Err(PipelineError::Backend(GatewayError::Store(format!(
                    "{}: no transcripts to replay",
                    path.display()
                ))));
            }
            let store = TranscriptStore::open(&path).map_err(PipelineError::Backend)?;
            Gateway::replay(&cfg.model, store)
        }
        BackendMode::Record => {
            let transport = Arc::new(HttpTransport::from_env().map_err(PipelineError::Backend)?);
            let store = TranscriptStore::open(&cfg.transcripts_path()).map_err(PipelineError::Backend)?;
            Gateway::record(&cfg.model, transport, store, cfg.max_in_flight)
        }
        BackendMode::Live => {
            let transport = Arc::new(HttpTransport::from_env().map_err(PipelineError::Backend)?);
            Gateway::live(&cfg.model, transport, cfg.max_in_flight)
        }
    };
    Ok(gateway.with_max_output_tokens(cfg.max_output_tokens))
}

#[derive(Debug)]
pub struct RunResult {
    pub report: CoverageReport,
    pub run_dir: PathBuf,
}

/// Runs the pipeline with the backend and prompt assets named by `cfg`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunResult, PipelineError> {
    let gateway = gateway_from_config(cfg)?;
    let assets = PromptAssets::load_default()?;
    run_pipeline_with(cfg, &gateway, &assets)
}

/// One candidate's record in `outcomes.jsonl`.
#[derive(Debug, Serialize)]
struct CandidateRecord<'a> {
    id: &'a str,
    slice: usize,
    test: &'a str,
    file: &'a str,
    initial: OutcomeSummary,
    state: CandidateState,
    history: &'a [CandidateState],
    fix_rounds: u32,
    abandon_reason: Option<&'a str>,
    #[serde(rename = "final")]
    final_outcome: OutcomeSummary,
}

/// Everything one focal method produced.
struct MethodRun {
    dir: String,
    report: MethodReport,
    /// Paths relative to the method directory, with contents.
    files: Vec<(String, String)>,
}

impl MethodRun {
    fn put(&mut self, path: impl Into<String>, text: impl Into<String>) {
        self.files.push((path.into(), text.into()));
    }
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("serializable") + "\n")
        .collect()
}

fn pretty(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// File stem of a candidate: its test name, plus `-n` for a deduplicated id.
fn candidate_stem(c: &TestCandidate) -> String {
    match c.id.rsplit_once('#') {
        Some((_, n)) => format!("test-{}-{n}", c.test_name),
        None => format!("test-{}", c.test_name),
    }
}

struct MethodCtx<'a> {
    cfg: &'a RunConfig,
    gateway: &'a Gateway,
    assets: &'a PromptAssets,
    program: &'a Program,
    focal: &'a FocalMethod,
    context: ContextBundle,
}

fn process_method(
    cfg: &RunConfig,
    gateway: &Gateway,
    assets: &PromptAssets,
    program: &Program,
    focal: &FocalMethod,
) -> MethodRun {
    let _span = tracing::info_span!("focal", method = %focal.qualified_name).entered();
    let mut run = MethodRun {
        dir: focal.dir_name(),
        report: MethodReport::new(&focal.qualified_name, focal.complexity.cyclomatic),
        files: Vec::new(),
    };
    run.report.line_total = statement_lines(&focal.function).len() as u64;
    run.report.branch_total = 2 * branch_lines(&focal.function).len() as u64;
    let mx = MethodCtx {
        cfg,
        gateway,
        assets,
        program,
        focal,
        context: build_context(program, focal, cfg.context_depth),
    };
    run.put("context.md", render_markdown(focal, &mx.context));
    let mut suite = RawCoverage::default();
    if let Err(e) = generate_and_repair(&mx, &mut run, &mut suite) {
        tracing::error!(error = %e, "focal method errored");
        run.report.status = MethodStatus::Errored;
        run.report.error = Some(e.to_string());
    }
    measure(&mx, &mut run.report, &suite);
    run
}

/// Decomposition, generation, isolation and repair. Gateway failures other
/// than exhausted format retries stop the method.
fn generate_and_repair(mx: &MethodCtx, run: &mut MethodRun, suite: &mut RawCoverage) -> Result<(), GatewayError> {
    let (focal, program) = (mx.focal, mx.program);
    let decompose = mx.assets.render_decompose(focal, &mx.context);
    run.put("prompts/decompose.md", decompose.to_text());
    let reply = mx.gateway.complete_with_escalation(&decompose.messages, |raw| {
        let payload = extract_payload(raw, PayloadKind::SlicePlan).map_err(|e| e.to_string())?;
        validate_slice_plan(payload.slice_plan().expect("slice plan payload"), program, focal)
            .map_err(|e| e.to_string())
    });
    let plan: SlicePlan = match reply {
        Ok(r) => {
            run.report.llm_calls += r.attempts as u64;
            r.value
        }
        Err(GatewayError::FormatExhausted { attempts, last_error }) => {
            run.report.llm_calls += attempts.len() as u64;
            tracing::warn!(%last_error, "slice plan rejected, using the fallback plan");
            fallback_slice(program, focal, mx.cfg.target_decisions)
        }
        Err(e) => return Err(e),
    };
    run.report.plan_origin = Some(plan.origin);
    run.report.slices = plan.slices.len() as u64;
    let estimate = estimate_conditions(&plan, focal);
    run.put("slices.json", pretty(&json!({ "plan": plan, "estimate": estimate })));

    let mut taken = HashSet::new();
    let mut fixlog = Vec::new();
    let mut outcomes = Vec::new();
    let files = mx.cfg.tests_per_slice as usize;
    for slice in &plan.slices {
        let i = slice.index;
        for k in 1..=files {
            let suffix = if files > 1 { format!("-{k}") } else { String::new() };
            let bundle = mx
                .assets
                .render_generate(focal, &mx.context, &plan, i, (k, files))
                .expect("slice index from the plan");
            run.put(format!("prompts/generate-{i}{suffix}.md"), bundle.to_text());
            let reply = mx.gateway.complete_with_escalation(&bundle.messages, |raw| {
                let payload = extract_payload(raw, PayloadKind::TestFile).map_err(|e| e.to_string())?;
                let source = payload.test_source().expect("test file payload").to_string();
                split_tests(&source).map_err(|e| e.to_string())?;
                Ok::<_, String>(source)
            });
            let source = match reply {
                Ok(r) => {
                    run.report.llm_calls += r.attempts as u64;
                    r.value
                }
                Err(GatewayError::FormatExhausted { attempts, last_error }) => {
                    run.report.llm_calls += attempts.len() as u64;
                    tracing::warn!(slice = i, %last_error, "no usable test file for slice");
                    run.put(format!("slice-{i}/generation-failed{suffix}.txt"), last_error + "\n");
                    continue;
                }
                Err(e) => {
                    flush_logs(run, &fixlog, &outcomes);
                    return Err(e);
                }
            };
            run.put(format!("slice-{i}/generated{suffix}.mini"), source.clone());
            let candidates = isolate_tests(&source, &focal.qualified_name, i, &mut taken).expect("validated above");
            for candidate in candidates {
                run_candidate(mx, run, candidate, suite, &mut fixlog, &mut outcomes);
            }
        }
    }
    flush_logs(run, &fixlog, &outcomes);
    Ok(())
}

fn flush_logs(run: &mut MethodRun, fixlog: &[serde_json::Value], outcomes: &[serde_json::Value]) {
    run.put("fixlog.jsonl", jsonl(fixlog));
    run.put("outcomes.jsonl", jsonl(outcomes));
}

fn run_candidate(
    mx: &MethodCtx,
    run: &mut MethodRun,
    mut candidate: TestCandidate,
    suite: &mut RawCoverage,
    fixlog: &mut Vec<serde_json::Value>,
    outcomes: &mut Vec<serde_json::Value>,
) {
    let stem = candidate_stem(&candidate);
    let file = format!("slice-{}/{stem}.mini", candidate.slice_index);
    run.put(file.clone(), candidate.original_source.clone());
    let initial = run_test(mx.program, &candidate.source, &mx.cfg.limits);
    candidate.initial_status = Some(initial.status);
    run.report.candidates += 1;
    match initial.status {
        Status::Passed => {}
        Status::CompileError => run.report.compile_errors += 1,
        Status::RuntimeError => run.report.runtime_errors += 1,
    }
    let final_outcome = if initial.passed() {
        candidate.transition(CandidateState::Passed);
        initial.clone()
    } else {
        let fx = FixContext {
            program: mx.program,
            focal: mx.focal,
            context: &mx.context,
            assets: mx.assets,
            gateway: mx.gateway,
            limits: mx.cfg.limits,
            max_rounds: mx.cfg.max_fix_rounds,
        };
        let repaired = self_debug_loop(candidate, &initial, &fx);
        run.report.llm_calls += repaired.llm_calls as u64;
        fixlog.extend(
            repaired
                .attempts
                .iter()
                .map(|a| serde_json::to_value(a).expect("serializable")),
        );
        candidate = repaired.candidate;
        if candidate.passed() {
            run.put(
                format!("slice-{}/{stem}.fixed.mini", candidate.slice_index),
                candidate.source.clone(),
            );
        }
        run_test(mx.program, &candidate.source, &mx.cfg.limits)
    };
    if candidate.passed() {
        // Coverage comes from a run of the final source, so only a passing
        // run contributes.
        if final_outcome.passed() {
            run.report.passed += 1;
            run.report.accepted.push(candidate.id.clone());
            suite.merge(&final_outcome.coverage);
        } else {
            tracing::error!(id = %candidate.id, "accepted test failed when re-run");
        }
    }
    let record = CandidateRecord {
        id: &candidate.id,
        slice: candidate.slice_index,
        test: &candidate.test_name,
        file: &file,
        initial: OutcomeSummary::from(&initial),
        state: candidate.state,
        history: &candidate.history,
        fix_rounds: candidate.fix_round,
        abandon_reason: candidate.abandon_reason.as_deref(),
        final_outcome: OutcomeSummary::from(&final_outcome),
    };
    outcomes.push(serde_json::to_value(&record).expect("serializable"));
}

/// Focal coverage of the accepted suite, plus callee line coverage.
fn measure(mx: &MethodCtx, report: &mut MethodReport, suite: &RawCoverage) {
    let f = &mx.focal.function;
    let lines = statement_lines(f);
    let branches = branch_lines(f);
    report.line_covered = suite.lines_of(&f.name).intersection(&lines).count() as u64;
    report.branch_covered = suite
        .arms_covered(&f.name)
        .iter()
        .filter(|(line, _)| branches.contains(line))
        .count() as u64;
    report.callees = mx
        .context
        .callee_bodies
        .iter()
        .filter_map(|c| mx.program.function(&c.name))
        .map(|g| {
            let total = statement_lines(g);
            CalleeCoverage {
                function: g.name.clone(),
                line_covered: suite.lines_of(&g.name).intersection(&total).count() as u64,
                line_total: total.len() as u64,
            }
        })
        .collect();
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Runs the pipeline with an explicit gateway and prompt assets.
pub fn run_pipeline_with(
    cfg: &RunConfig,
    gateway: &Gateway,
    assets: &PromptAssets,
) -> Result<RunResult, PipelineError> {
    let started = now_secs();
    let project = Project::load(&cfg.project)?;
    let focals = project.focal_methods(cfg.threshold);
    tracing::info!(project = %project.name(), focal_methods = focals.len(), "scanned");

    let next = AtomicUsize::new(0);
    let results: Mutex<BTreeMap<usize, MethodRun>> = Mutex::new(BTreeMap::new());
    std::thread::scope(|s| {
        for _ in 0..cfg.workers.max(1).min(focals.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(focal) = focals.get(i) else { break };
                let program = &project.file(&focal.file).expect("focal file").program;
                let run = process_method(cfg, gateway, assets, program, focal);
                results.lock().expect("results lock").insert(i, run);
            });
        }
    });
    let runs: Vec<MethodRun> = results.into_inner().expect("results lock").into_values().collect();

    let run_id = if cfg.stable_output {
        "stable".to_string()
    } else {
        format!("run-{started}")
    };
    let run_dir = cfg.out.join(&run_id);
    prepare_run_dir(&run_dir)?;
    let write = |rel: &Path, text: &str| -> Result<(), PipelineError> {
        let path = run_dir.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))
    };
    for run in &runs {
        for (rel, text) in &run.files {
            write(&Path::new(&run.dir).join(rel), text)?;
        }
    }
    let report = CoverageReport::new(vec![ProjectReport {
        name: project.name(),
        methods: runs.into_iter().map(|r| r.report).collect(),
    }]);
    write(Path::new("report.txt"), &render_text(&report))?;
    write(Path::new("report.csv"), &render_csv(&report))?;
    write(Path::new("report.json"), &render_json(&report))?;
    let skipped: BTreeSet<String> = project
        .skipped
        .iter()
        .map(|s| format!("{}: {}", s.rel_path, s.error))
        .collect();
    let mut manifest = json!({
        "run_id": run_id,
        "project": project.name(),
        "backend": cfg.backend,
        "model": cfg.model,
        "threshold": cfg.threshold,
        "max_fix_rounds": cfg.max_fix_rounds,
        "tests_per_slice": cfg.tests_per_slice,
        "context_depth": cfg.context_depth,
        "limits": cfg.limits,
        "focal_methods": focals.iter().map(|f| &f.qualified_name).collect::<Vec<_>>(),
        "skipped_files": skipped,
    });
    if !cfg.stable_output {
        manifest["started_at"] = started.into();
        manifest["finished_at"] = now_secs().into();
    }
    write(Path::new("manifest.json"), &pretty(&manifest))?;
    Ok(RunResult { report, run_dir })
}

/// Clears a previous run in `dir`. A non-empty directory that is not a run
/// directory is left alone and reported.
fn prepare_run_dir(dir: &Path) -> Result<(), PipelineError> {
    if dir.exists() {
        let empty = std::fs::read_dir(dir).map_err(|e| io_err(dir, e))?.next().is_none();
        if !empty && !dir.join("manifest.json").exists() {
            return Err(io_err(dir, "exists and is not a previous run directory"));
        }
        std::fs::remove_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}
