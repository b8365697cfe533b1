//! Project loading and selection of complex focal methods.

use std::path::{Path, PathBuf};

use minilang::check::check;
use minilang::{cyclomatic_complexity, parse_program, ComplexityScore, FunctionDecl, Program};
use serde::Serialize;
use thiserror::Error;
use walkdir::WalkDir;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("no .mini files found under {0}")]
    EmptyProject(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A parsed and checked source file, addressed by its path relative to the
/// project root with `/` separators.
#[derive(Debug, Clone)]
pub struct SourceFile {
    pub rel_path: String,
    pub program: Program,
}

/// A file that failed to parse or check and was left out of the project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedFile {
    pub rel_path: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct Project {
    pub root: PathBuf,
    pub files: Vec<SourceFile>,
    pub skipped: Vec<SkippedFile>,
}

impl Project {
    /// Reads every `.mini` file below `root`.
    pub fn load(root: &Path) -> Result<Project, ScanError> {
        let mut sources = Vec::new();
        for entry in WalkDir::new(root).follow_links(true) {
            let entry = entry.map_err(|e| ScanError::Io {
                path: e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf()),
                source: e.into(),
            })?;
            let path = entry.path();
            if !entry.file_type().is_file() || path.extension().is_none_or(|x| x != "mini") {
                continue;
            }
            let text = std::fs::read(path).map_err(|source| ScanError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let rel = path.strip_prefix(root).unwrap_or(path);
            let rel_path = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            sources.push((rel_path, String::from_utf8_lossy(&text).into_owned()));
        }
        Project::from_sources(root, sources)
    }

    /// Builds a project from in-memory `(relative path, text)` pairs. The
    /// result does not depend on the order of `sources`.
    pub fn from_sources(
        root: &Path,
        sources: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Project, ScanError> {
        let mut sources: Vec<(String, String)> = sources.into_iter().collect();
        if sources.is_empty() {
            return Err(ScanError::EmptyProject(root.to_path_buf()));
        }
        sources.sort();
        let mut files = Vec::new();
        let mut skipped = Vec::new();
        for (rel_path, text) in sources {
            let parsed = parse_program(&text, &rel_path)
                .map_err(|e| format!("parse error at {e}"))
                .and_then(|p| check(&p, None).map(|()| p).map_err(|e| e.to_string()));
            match parsed {
                Ok(program) => files.push(SourceFile { rel_path, program }),
                Err(error) => {
                    tracing::warn!(file = %rel_path, %error, "skipping file");
                    skipped.push(SkippedFile { rel_path, error });
                }
            }
        }
        Ok(Project {
            root: root.to_path_buf(),
            files,
            skipped,
        })
    }

    pub fn file(&self, rel_path: &str) -> Option<&SourceFile> {
        self.files.iter().find(|f| f.rel_path == rel_path)
    }

    /// Project name used in reports: the root directory's final component.
    pub fn name(&self) -> String {
        self.root
            .canonicalize()
            .unwrap_or_else(|_| self.root.clone())
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "project".to_string())
    }

    /// Functions with cyclomatic complexity strictly above `threshold`,
    /// ordered by file path then first line.
    pub fn focal_methods(&self, threshold: u32) -> Vec<FocalMethod> {
        let mut out = Vec::new();
        for file in &self.files {
            let mut funcs: Vec<&FunctionDecl> = file.program.functions.iter().collect();
            funcs.sort_by_key(|f| f.span.first_line);
            for f in funcs {
                let complexity = cyclomatic_complexity(f);
                if complexity.exceeds(threshold) {
                    out.push(FocalMethod {
                        qualified_name: format!("{}::{}", file.rel_path, f.name),
                        file: file.rel_path.clone(),
                        source_text: file.program.function_text(f),
                        function: f.clone(),
                        complexity,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FocalMethod {
    /// `file::function`, e.g. `shipping.mini::shipping_cost`.
    pub qualified_name: String,
    pub file: String,
    pub function: FunctionDecl,
    pub complexity: ComplexityScore,
    /// Verbatim text from the `fn` line to the closing brace line.
    pub source_text: String,
}

impl FocalMethod {
    /// Directory name for per-method artifacts.
    pub fn dir_name(&self) -> String {
        focal_dir_name(&self.qualified_name)
    }
}

/// Directory name for a qualified focal name: `a/b.mini::f` becomes `a_b.mini__f`.
pub fn focal_dir_name(qualified_name: &str) -> String {
    qualified_name.replace("::", "__").replace('/', "_")
}

/// Loads `root` and returns its complex methods.
pub fn scan_project(root: &Path, threshold: u32) -> Result<Vec<FocalMethod>, ScanError> {
    Ok(Project::load(root)?.focal_methods(threshold))
}
