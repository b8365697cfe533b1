use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use minilang::{parse_program, run_test, run_test_traced, ExecutionLimits};
use slicegen::config::RunConfig;
use slicegen::focal::Project;
use slicegen::gateway::BackendMode;
use slicegen::pipeline::run_pipeline;
use slicegen::report::{parse_json, render_csv, render_json, render_text, CoverageReport};

#[derive(Parser)]
#[command(name = "slicegen", version, about = "Slice-based unit-test generation for MiniLang")]
struct Cli {
    /// Log every pipeline step to stderr.
    #[arg(long, global = true)]
    trace: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    project: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// List the complex functions of a project.
    Scan {
        #[command(flatten)]
        base: Overrides,
    },
    /// Run the pipeline and write the output tree and reports.
    Generate {
        #[command(flatten)]
        base: Overrides,
        #[arg(long)]
        backend: Option<BackendMode>,
        /// Transcript file or directory for record and replay.
        #[arg(long)]
        transcripts: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        max_fix_rounds: Option<u32>,
        #[arg(long)]
        tests_per_slice: Option<u32>,
        #[arg(long)]
        context_depth: Option<u32>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fixed run directory name and no timestamps, for reproducible trees.
        #[arg(long)]
        stable_output: bool,
    },
    /// Render one or more `report.json` files as a combined report.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Run a test file against a program and print its outcome and coverage.
    Exec {
        program: PathBuf,
        test: PathBuf,
        #[arg(long)]
        max_steps: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

impl Overrides {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(p) = &self.project {
            cfg.project = p.clone();
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = if cli.trace {
        tracing_subscriber::EnvFilter::new("slicegen=trace,info")
    } else {
        tracing_subscriber::EnvFilter::try_from_env("SLICEGEN_LOG").unwrap_or_else(|_| "warn".into())
    };
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Scan { base } => {
            let cfg = base.config()?;
            let project = Project::load(&cfg.project)?;
            for s in &project.skipped {
                eprintln!("skipped {}: {}", s.rel_path, s.error);
            }
            for f in project.focal_methods(cfg.threshold) {
                println!(
                    "{}\t{}\tlines {}-{}",
                    f.qualified_name, f.complexity.cyclomatic, f.function.span.first_line, f.function.span.last_line
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate {
            base,
            backend,
            transcripts,
            model,
            max_fix_rounds,
            tests_per_slice,
            context_depth,
            workers,
            out,
            stable_output,
        } => {
            let mut cfg = base.config()?;
            if let Some(b) = backend {
                cfg.backend = b;
            }
            if transcripts.is_some() {
                cfg.transcripts = transcripts;
            }
            if let Some(m) = model {
                cfg.model = m;
            }
            for (key, value) in [
                ("max_fix_rounds", max_fix_rounds.map(|v| v.to_string())),
                ("tests_per_slice", tests_per_slice.map(|v| v.to_string())),
                ("context_depth", context_depth.map(|v| v.to_string())),
                ("workers", workers.map(|v| v.to_string())),
            ] {
                if let Some(v) = value {
                    cfg.set(key, &v)?;
                }
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            cfg.stable_output |= stable_output;
            let result = run_pipeline(&cfg)?;
            print!("{}", render_text(&result.report));
            eprintln!("wrote {}", result.run_dir.display());
            Ok(if result.report.any_errored() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Report { reports, format } => {
            let mut projects = Vec::new();
            for path in &reports {
                let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
                projects.extend(parse_json(&text).with_context(|| path.display().to_string())?.projects);
            }
            let report = CoverageReport::new(projects);
            print!(
                "{}",
                match format {
                    Format::Text => render_text(&report),
                    Format::Csv => render_csv(&report),
                    Format::Json => render_json(&report),
                }
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Exec {
            program,
            test,
            max_steps,
        } => {
            let read = |p: &PathBuf| std::fs::read_to_string(p).with_context(|| p.display().to_string());
            let name = program.display().to_string();
            let program = match parse_program(&read(&program)?, &name) {
                Ok(p) => p,
                Err(e) => bail!("{name}: parse error at {e}"),
            };
            let test = read(&test)?;
            let mut limits = ExecutionLimits::default();
            if let Some(n) = max_steps {
                limits.max_steps = n;
            }
            let outcome = if cli.trace {
                let (outcome, trace) = run_test_traced(&program, &test, &limits);
                for event in trace {
                    println!("{}", serde_json::to_string(&event)?);
                }
                outcome
            } else {
                run_test(&program, &test, &limits)
            };
            println!(
                "status: {}",
                serde_json::to_value(outcome.status)?.as_str().unwrap_or("?")
            );
            if !outcome.passed() {
                let line = outcome.failing_line.map_or(String::new(), |l| format!(" (line {l})"));
                println!("error: {}{line}", outcome.message);
            }
            for f in &program.functions {
                let lines = outcome.coverage.lines_of(&f.name);
                if lines.is_empty() {
                    continue;
                }
                let total = minilang::statement_lines(f);
                let arms = outcome.coverage.arms_covered(&f.name).len();
                println!(
                    "{}: lines {}/{} branches {}/{}",
                    f.name,
                    lines.len(),
                    total.len(),
                    arms,
                    2 * minilang::branch_lines(f).len()
                );
            }
            Ok(if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
    }
}
