//! Dependency context attached to every prompt about a focal method: the
//! globals it reads and the functions it calls, with their doc comments.

use minilang::analysis::{callees, referenced_names};
use minilang::check::is_builtin;
use minilang::Program;
use serde::Serialize;

use crate::focal::FocalMethod;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CalleeBody {
    pub name: String,
    /// Verbatim function text; empty when the callee is not defined in the project.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CalleeDoc {
    pub name: String,
    pub doc: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContextBundle {
    pub focal: String,
    /// Declaration text of each global the focal method references,
    /// including any doc comment lines directly above it.
    pub global_decls: Vec<String>,
    pub callee_bodies: Vec<CalleeBody>,
    pub callee_docs: Vec<CalleeDoc>,
    pub focal_doc: Option<String>,
}

impl ContextBundle {
    pub fn unknown_callees(&self) -> impl Iterator<Item = &str> {
        self.callee_bodies
            .iter()
            .filter(|c| c.source.is_empty())
            .map(|c| c.name.as_str())
    }
}

/// Collects context for `focal`, which must be defined in `program`.
/// Callees are followed `depth` levels deep (1 = direct callees only), in
/// call-site order with duplicates removed. Builtins and the focal method
/// itself are never listed.
pub fn build_context(program: &Program, focal: &FocalMethod, depth: u32) -> ContextBundle {
    let mut names: Vec<String> = Vec::new();
    let mut frontier = vec![focal.function.name.clone()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for caller in &frontier {
            let Some(f) = program.function(caller) else { continue };
            for name in callees(f) {
                if is_builtin(&name) || name == focal.function.name || names.contains(&name) {
                    continue;
                }
                names.push(name.clone());
                next.push(name);
            }
        }
        frontier = next;
    }

    let mut callee_bodies = Vec::new();
    let mut callee_docs = Vec::new();
    for name in names {
        match program.function(&name) {
            Some(f) => {
                if let Some(doc) = &f.doc {
                    callee_docs.push(CalleeDoc {
                        name: name.clone(),
                        doc: doc.clone(),
                    });
                }
                callee_bodies.push(CalleeBody {
                    name,
                    source: program.function_text(f),
                });
            }
            None => callee_bodies.push(CalleeBody {
                name,
                source: String::new(),
            }),
        }
    }

    let global_decls = referenced_names(&focal.function)
        .iter()
        .filter_map(|n| program.global(n))
        .map(|g| {
            let doc_lines = g.doc.as_ref().map_or(0, |d| d.lines().count() as u32);
            program.lines_text(g.line - doc_lines, g.line)
        })
        .collect();

    ContextBundle {
        focal: focal.qualified_name.clone(),
        global_decls,
        callee_bodies,
        callee_docs,
        focal_doc: focal.function.doc.clone(),
    }
}

fn quote_doc(doc: &str) -> String {
    doc.lines()
        .map(|l| {
            if l.is_empty() {
                ">".to_string()
            } else {
                format!("> {l}")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Markdown rendering used for `context.md` and as the shared prompt prefix.
pub fn render_markdown(focal: &FocalMethod, ctx: &ContextBundle) -> String {
    let mut out = String::new();
    out.push_str("# Focal method\n\n");
    out.push_str(&format!(
        "`{}` from `{}` (cyclomatic complexity {}).\n\n",
        focal.function.name, focal.file, focal.complexity.cyclomatic
    ));
    if let Some(doc) = &ctx.focal_doc {
        out.push_str(&quote_doc(doc));
        out.push_str("\n\n");
    }
    out.push_str("```minilang\n");
    out.push_str(&focal.source_text);
    out.push_str("\n```\n\n");

    out.push_str("# Dependencies\n\n## Globals\n\n");
    if ctx.global_decls.is_empty() {
        out.push_str("The focal method reads no globals.\n\n");
    } else {
        out.push_str("```minilang\n");
        out.push_str(&ctx.global_decls.join("\n"));
        out.push_str("\n```\n\n");
    }

    out.push_str("## Invoked functions\n\n");
    if ctx.callee_bodies.is_empty() {
        out.push_str("The focal method invokes no other functions.\n");
    }
    for (i, callee) in ctx.callee_bodies.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("### `{}`\n\n", callee.name));
        if let Some(d) = ctx.callee_docs.iter().find(|d| d.name == callee.name) {
            out.push_str(&quote_doc(&d.doc));
            out.push_str("\n\n");
        }
        if callee.source.is_empty() {
            out.push_str("Not defined in the project; its body is unavailable.\n");
        } else {
            out.push_str("```minilang\n");
            out.push_str(&callee.source);
            out.push_str("\n```\n");
        }
    }
    out
}
