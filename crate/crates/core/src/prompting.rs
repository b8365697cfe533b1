//! Prompt rendering for the three prompt families: decompose, generate (one
//! per slice) and fix. Every bundle is `[system, context prefix, task]`.
//!
//! Template text lives in plain files under `assets/prompts/`. Templates use
//! `{{name}}` placeholders; each template must use exactly its declared set.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use minilang::{ExecutionOutcome, Status};
use serde::Serialize;
use thiserror::Error;

use crate::context::{render_markdown, ContextBundle};
use crate::extraction::PayloadKind;
use crate::focal::FocalMethod;
use crate::gateway::{ChatMessage, Role};
use crate::isolate::TestCandidate;
use crate::slicing::SlicePlan;

/// The four instruction categories, in registry order.
pub const REGISTRY_CATEGORIES: [&str; 4] = [
    "Test-file structure",
    "Accessing non-public elements",
    "Nested-construct handling",
    "Stub and double usage",
];

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("prompt asset {path}: {message}")]
    Asset { path: PathBuf, message: String },
    #[error("slice index {index} is out of range for a plan of {count} slices")]
    IndexOutOfRange { index: usize, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Decompose,
    Generate,
    Fix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub family: Family,
    pub messages: Vec<ChatMessage>,
    pub expected_payload_kind: PayloadKind,
}

impl PromptBundle {
    /// Total characters over all messages. Prompts are never truncated.
    pub fn rendered_len(&self) -> usize {
        self.messages.iter().map(|m| m.content.chars().count()).sum()
    }

    /// Plain-text dump used for golden files.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            let role = match m.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            out.push_str(&format!("<<< {role} >>>\n{}\n", m.content));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryEntry {
    pub category: String,
    pub description: String,
    pub example: String,
}

/// Tips for avoiding common mistakes, one entry per category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionRegistry {
    pub entries: Vec<RegistryEntry>,
}

impl InstructionRegistry {
    fn parse(text: &str) -> Result<Self, String> {
        let mut entries = Vec::new();
        for section in sections(text) {
            let (category, body) = section;
            let fence = body
                .find("```")
                .ok_or_else(|| format!("`{category}` has no example block"))?;
            entries.push(RegistryEntry {
                category,
                description: body[..fence].trim().to_string(),
                example: body[fence..].trim().to_string(),
            });
        }
        let found: Vec<&str> = entries.iter().map(|e| e.category.as_str()).collect();
        if found != REGISTRY_CATEGORIES {
            return Err(format!("categories {found:?} differ from {REGISTRY_CATEGORIES:?}"));
        }
        Ok(Self { entries })
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("### {}\n\n{}\n\n{}", e.category, e.description, e.example))
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

/// Splits text into `## heading` sections; text before the first heading is dropped.
fn sections(text: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        if let Some(h) = line.strip_prefix("## ") {
            out.push((h.trim().to_string(), String::new()));
        } else if let Some((_, body)) = out.last_mut() {
            body.push_str(line);
            body.push('\n');
        }
    }
    out
}

/// Placeholder names used by `text`, in first-use order.
fn placeholders(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        let Some(end) = after.find("}}") else { break };
        let name = &after[..end];
        if !name.is_empty() && name.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
            if !out.iter().any(|n| n == name) {
                out.push(name.to_string());
            }
            rest = &after[end + 2..];
        } else {
            rest = after;
        }
    }
    out
}

/// Single-pass substitution; inserted values are not scanned again.
fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let hit = after
            .find("}}")
            .and_then(|end| values.iter().find(|(k, _)| *k == &after[..end]).map(|(_, v)| (end, *v)));
        match hit {
            Some((end, v)) => {
                out.push_str(v);
                rest = &after[end + 2..];
            }
            None => {
                out.push_str("{{");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone)]
struct Template {
    text: String,
}

#[derive(Debug, Clone)]
pub struct PromptAssets {
    system: String,
    decompose: Template,
    decompose_example: String,
    generate: Template,
    scenario_example: String,
    environment_example: String,
    test_skeleton: String,
    pub registry: InstructionRegistry,
    fix: Template,
    compile_catalog: String,
    runtime_catalog: String,
}

const DECOMPOSE_KEYS: &[&str] = &["qualified_name", "focal_name", "dependencies", "example"];
const GENERATE_KEYS: &[&str] = &[
    "slice_index",
    "slice_count",
    "qualified_name",
    "file_note",
    "plan",
    "scenario_example",
    "focal_name",
    "environment_example",
    "registry",
    "skeleton",
];
const FIX_KEYS: &[&str] = &[
    "candidate_id",
    "test_source",
    "status",
    "error",
    "failing_line",
    "catalog",
];

impl PromptAssets {
    /// Directory shipped with the repository.
    pub fn default_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/prompts")
    }

    pub fn load_default() -> Result<Self, PromptError> {
        Self::load(&Self::default_dir())
    }

    pub fn load(dir: &Path) -> Result<Self, PromptError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path)
                .map(|s| s.trim_end().to_string())
                .map_err(|e| PromptError::Asset {
                    path: path.clone(),
                    message: e.to_string(),
                })
        };
        let template = |name: &str, keys: &[&str]| -> Result<Template, PromptError> {
            let text = read(name)?;
            let used: BTreeSet<String> = placeholders(&text).into_iter().collect();
            let declared: BTreeSet<String> = keys.iter().map(|k| k.to_string()).collect();
            if used != declared {
                let unknown: Vec<&String> = used.difference(&declared).collect();
                let missing: Vec<&String> = declared.difference(&used).collect();
                return Err(PromptError::Asset {
                    path: dir.join(name),
                    message: format!("unknown placeholders {unknown:?}, missing placeholders {missing:?}"),
                });
            }
            Ok(Template { text })
        };
        let plain = |name: &str| -> Result<String, PromptError> {
            let text = read(name)?;
            match placeholders(&text).first() {
                Some(p) => Err(PromptError::Asset {
                    path: dir.join(name),
                    message: format!("unexpected placeholder {{{{{p}}}}}"),
                }),
                None => Ok(text),
            }
        };
        let registry_text = plain("registry.md")?;
        let registry = InstructionRegistry::parse(&registry_text).map_err(|message| PromptError::Asset {
            path: dir.join("registry.md"),
            message,
        })?;
        let catalog = plain("fix_catalog.md")?;
        let catalog_sections = sections(&catalog);
        let section = |name: &str| {
            catalog_sections
                .iter()
                .find(|(h, _)| h == name)
                .map(|(h, b)| format!("### {h}\n\n{}", b.trim()))
                .ok_or_else(|| PromptError::Asset {
                    path: dir.join("fix_catalog.md"),
                    message: format!("missing `## {name}` section"),
                })
        };
        Ok(Self {
            system: plain("system.md")?,
            decompose: template("decompose.md", DECOMPOSE_KEYS)?,
            decompose_example: plain("decompose_example.md")?,
            generate: template("generate.md", GENERATE_KEYS)?,
            scenario_example: plain("scenario_example.md")?,
            environment_example: plain("environment_example.md")?,
            test_skeleton: plain("test_skeleton.md")?,
            registry,
            fix: template("fix.md", FIX_KEYS)?,
            compile_catalog: section("Compile errors")?,
            runtime_catalog: section("Runtime errors")?,
        })
    }

    fn bundle(
        &self,
        family: Family,
        kind: PayloadKind,
        focal: &FocalMethod,
        ctx: &ContextBundle,
        task: String,
    ) -> PromptBundle {
        PromptBundle {
            family,
            messages: vec![
                ChatMessage::new(Role::System, self.system.clone()),
                ChatMessage::new(Role::User, render_markdown(focal, ctx)),
                ChatMessage::new(Role::User, task),
            ],
            expected_payload_kind: kind,
        }
    }

    pub fn render_decompose(&self, focal: &FocalMethod, ctx: &ContextBundle) -> PromptBundle {
        let mut deps: Vec<String> = ctx
            .global_decls
            .iter()
            .map(|d| {
                let decl = d.lines().last().unwrap_or_default().trim();
                format!("- Global: `{decl}`")
            })
            .collect();
        deps.extend(ctx.callee_bodies.iter().map(|c| {
            let header = c
                .source
                .lines()
                .find(|l| l.trim_start().starts_with("fn "))
                .map(|h| h.trim().trim_end_matches('{').trim_end().to_string());
            match header {
                Some(h) => format!("- Function: `{h}`"),
                None => format!("- Function: `{}` (not defined in the project)", c.name),
            }
        }));
        if deps.is_empty() {
            deps.push("- None: the method reads no globals and calls no other functions.".into());
        }
        let task = fill(
            &self.decompose.text,
            &[
                ("qualified_name", &focal.qualified_name),
                ("focal_name", &focal.function.name),
                ("dependencies", &deps.join("\n")),
                ("example", &self.decompose_example),
            ],
        );
        self.bundle(Family::Decompose, PayloadKind::SlicePlan, focal, ctx, task)
    }

    /// Prompt for test file `file` of `files` (1-based) for slice `slice_index`.
    pub fn render_generate(
        &self,
        focal: &FocalMethod,
        ctx: &ContextBundle,
        plan: &SlicePlan,
        slice_index: usize,
        (file, files): (usize, usize),
    ) -> Result<PromptBundle, PromptError> {
        let count = plan.slices.len();
        if slice_index == 0 || slice_index > count {
            return Err(PromptError::IndexOutOfRange {
                index: slice_index,
                count,
            });
        }
        let listing = plan
            .slices
            .iter()
            .map(|s| {
                let label = if s.index == slice_index {
                    "target slice".to_string()
                } else {
                    "already analyzed".to_string()
                };
                format!(
                    "### Slice {} ({label}, lines {}-{})\n\n{}\n\n```minilang\n{}\n```",
                    s.index, s.first_line, s.last_line, s.description, s.recited_code
                )
            })
            .collect::<Vec<_>>()
            .join("\n\n");
        let file_note = if files > 1 {
            format!(" This is test file {file} of {files} for this slice; cover scenarios the other files are likely to miss.")
        } else {
            String::new()
        };
        let task = fill(
            &self.generate.text,
            &[
                ("slice_index", &slice_index.to_string()),
                ("slice_count", &count.to_string()),
                ("qualified_name", &focal.qualified_name),
                ("file_note", &file_note),
                ("plan", &listing),
                ("scenario_example", &self.scenario_example),
                ("focal_name", &focal.function.name),
                ("environment_example", &self.environment_example),
                ("registry", &self.registry.render()),
                ("skeleton", &self.test_skeleton),
            ],
        );
        Ok(self.bundle(Family::Generate, PayloadKind::TestFile, focal, ctx, task))
    }

    /// Prompt asking to repair `broken`, whose latest run produced `outcome`.
    pub fn render_fix(
        &self,
        focal: &FocalMethod,
        ctx: &ContextBundle,
        broken: &TestCandidate,
        outcome: &ExecutionOutcome,
    ) -> PromptBundle {
        let lines: Vec<&str> = broken.source.lines().collect();
        let width = lines.len().max(1).to_string().len();
        let numbered = lines
            .iter()
            .enumerate()
            .map(|(i, l)| format!("{:>width$} | {l}", i + 1))
            .collect::<Vec<_>>()
            .join("\n");
        let failing = match outcome.failing_line {
            Some(n) => match lines.get(n as usize - 1).filter(|_| n > 0) {
                Some(text) => format!("The error points at line {n} of the test:\n\n```minilang\n{text}\n```"),
                None => format!("The error points at line {n} of the test, past its end."),
            },
            None => "The error does not point at a line of the test.".to_string(),
        };
        let (status, catalog) = match outcome.status {
            Status::CompileError => (
                "compile error",
                format!("{}\n\n{}", self.compile_catalog, self.runtime_catalog),
            ),
            _ => (
                "runtime error",
                format!("{}\n\n{}", self.runtime_catalog, self.compile_catalog),
            ),
        };
        let task = fill(
            &self.fix.text,
            &[
                ("candidate_id", &broken.id),
                ("test_source", &numbered),
                ("status", status),
                ("error", &outcome.message),
                ("failing_line", &failing),
                ("catalog", &catalog),
            ],
        );
        self.bundle(Family::Fix, PayloadKind::FixedTest, focal, ctx, task)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholder_scan() {
        assert_eq!(placeholders("a {{x}} b {{y_z}} {{x}} {{Bad}} {{"), ["x", "y_z"]);
    }

    #[test]
    fn fill_is_single_pass() {
        assert_eq!(fill("<{{a}}|{{b}}>", &[("a", "{{b}}"), ("b", "B")]), "<{{b}}|B>");
        assert_eq!(fill("{{unknown}}", &[]), "{{unknown}}");
    }

    #[test]
    fn shipped_assets_load() {
        let a = PromptAssets::load_default().unwrap();
        let cats: Vec<&str> = a.registry.entries.iter().map(|e| e.category.as_str()).collect();
        assert_eq!(cats, REGISTRY_CATEGORIES);
    }

    fn copy_assets(dir: &Path) {
        for entry in std::fs::read_dir(PromptAssets::default_dir()).unwrap() {
            let p = entry.unwrap().path();
            std::fs::copy(&p, dir.join(p.file_name().unwrap())).unwrap();
        }
    }

    #[test]
    fn missing_asset_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        copy_assets(dir.path());
        std::fs::remove_file(dir.path().join("fix_catalog.md")).unwrap();
        let err = PromptAssets::load(dir.path()).unwrap_err().to_string();
        assert!(err.contains("fix_catalog.md"), "{err}");
    }

    #[test]
    fn unknown_placeholder_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        copy_assets(dir.path());
        let path = dir.path().join("decompose.md");
        let text = std::fs::read_to_string(&path).unwrap() + "\n{{surprise}}\n";
        std::fs::write(&path, text).unwrap();
        let err = PromptAssets::load(dir.path()).unwrap_err().to_string();
        assert!(err.contains("surprise"), "{err}");
    }

    #[test]
    fn wrong_registry_categories_are_an_error() {
        let dir = tempfile::tempdir().unwrap();
        copy_assets(dir.path());
        let path = dir.path().join("registry.md");
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("## Stub and double usage", "## Mocking");
        std::fs::write(&path, text).unwrap();
        assert!(PromptAssets::load(dir.path()).is_err());
    }
}
