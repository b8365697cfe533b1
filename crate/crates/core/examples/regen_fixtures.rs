//! Re-records `fixtures/proj-a/transcripts.jsonl` from the canned responses
//! in `fixtures/proj-a/responses/`. Run it after changing a prompt asset:
//!
//!     cargo run -p slicegen --example regen_fixtures

use std::path::PathBuf;
use std::sync::Arc;

use slicegen::config::RunConfig;
use slicegen::gateway::{BackendMode, DirectoryTransport, Gateway, TranscriptStore};
use slicegen::pipeline::run_pipeline_with;
use slicegen::prompting::PromptAssets;
use slicegen::report::render_text;

fn main() -> anyhow::Result<()> {
    let project = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/proj-a");
    let transcripts = project.join("transcripts.jsonl");
    if transcripts.exists() {
        std::fs::remove_file(&transcripts)?;
    }
    let out = tempfile::tempdir()?;
    let cfg = RunConfig {
        project: project.clone(),
        backend: BackendMode::Record,
        out: out.path().to_path_buf(),
        stable_output: true,
        ..RunConfig::default()
    };
    let transport = Arc::new(DirectoryTransport::new(&project.join("responses")));
    let store = TranscriptStore::open(&transcripts)?;
    let gateway = Gateway::record(&cfg.model, transport, store, 1);
    let result = run_pipeline_with(&cfg, &gateway, &PromptAssets::load_default()?)?;
    print!("{}", render_text(&result.report));
    Ok(())
}
