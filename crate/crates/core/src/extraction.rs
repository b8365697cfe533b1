//! Locating and decoding the JSON payload inside a model response.
//!
//! Responses are Markdown analysis followed by a JSON object. Fenced blocks
//! tagged `json` are tried first; failing that, the longest balanced
//! `{...}` region that decodes is used.

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::slicing::{RawSlice, RawSlicePlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    SlicePlan,
    TestFile,
    FixedTest,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    SlicePlan(RawSlicePlan),
    /// Test file source, for both `test_file` and `fixed_test` payloads.
    TestFile(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payload {
    pub kind: PayloadKind,
    pub json_text: String,
    pub decoded: Decoded,
}

impl Payload {
    pub fn test_source(&self) -> Option<&str> {
        match &self.decoded {
            Decoded::TestFile(s) => Some(s),
            Decoded::SlicePlan(_) => None,
        }
    }

    pub fn slice_plan(&self) -> Option<&RawSlicePlan> {
        match &self.decoded {
            Decoded::SlicePlan(p) => Some(p),
            Decoded::TestFile(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("no JSON block found in the response")]
    NoJsonBlock,
    #[error("JSON block does not parse: {0}")]
    ParseFailure(String),
    #[error("JSON payload violates the schema at `{0}`")]
    SchemaViolation(String),
}

/// Bodies of fenced code blocks whose info string is `json`.
fn json_fences(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in raw.lines() {
        let t = line.trim();
        match current.as_mut() {
            None => {
                if let Some(info) = t.strip_prefix("```") {
                    if info.trim().eq_ignore_ascii_case("json") {
                        current = Some(Vec::new());
                    }
                }
            }
            Some(body) => {
                if t.starts_with("```") {
                    out.push(body.join("\n"));
                    current = None;
                } else {
                    body.push(line);
                }
            }
        }
    }
    out
}

/// Balanced `{...}` regions that start outside any other region, found by a
/// string-aware brace scan. A `{` with no matching close is skipped.
fn brace_regions(raw: &str) -> Vec<&str> {
    let bytes = raw.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    while let Some(off) = raw[start..].find('{') {
        let open = start + off;
        let (mut depth, mut in_str, mut escaped) = (0usize, false, false);
        let mut close = None;
        for (i, &b) in bytes.iter().enumerate().skip(open) {
            if in_str {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        match close {
            Some(c) => {
                out.push(&raw[open..=c]);
                start = c + 1;
            }
            None => start = open + 1,
        }
    }
    out
}

fn require_str(v: &Value, field: &str, path: &str) -> Result<String, FormatError> {
    v.get(field)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| FormatError::SchemaViolation(path.to_string()))
}

fn decode(kind: PayloadKind, v: &Value) -> Result<Decoded, FormatError> {
    if !v.is_object() {
        return Err(FormatError::SchemaViolation("$".into()));
    }
    match kind {
        PayloadKind::SlicePlan => {
            let summary = require_str(v, "summary", "summary")?;
            let items = v
                .get("slices")
                .and_then(Value::as_array)
                .ok_or_else(|| FormatError::SchemaViolation("slices".into()))?;
            let mut slices = Vec::new();
            for (i, item) in items.iter().enumerate() {
                let at = |f: &str| format!("slices[{i}].{f}");
                if !item.is_object() {
                    return Err(FormatError::SchemaViolation(format!("slices[{i}]")));
                }
                let index = item
                    .get("index")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| FormatError::SchemaViolation(at("index")))?;
                slices.push(RawSlice {
                    index,
                    description: require_str(item, "description", &at("description"))?,
                    code: require_str(item, "code", &at("code"))?,
                });
            }
            Ok(Decoded::SlicePlan(RawSlicePlan { summary, slices }))
        }
        PayloadKind::TestFile | PayloadKind::FixedTest => {
            Ok(Decoded::TestFile(require_str(v, "test_file", "test_file")?))
        }
    }
}

/// Finds and decodes the payload of `kind` in a raw response.
///
/// Among candidate blocks that parse as JSON, the first one satisfying the
/// schema wins; if none does, the schema violation of the first parsed block
/// is reported.
pub fn extract_payload(raw: &str, kind: PayloadKind) -> Result<Payload, FormatError> {
    let fences = json_fences(raw);
    let mut regions: Vec<String> = brace_regions(raw).into_iter().map(str::to_string).collect();
    regions.sort_by_key(|r| std::cmp::Reverse(r.len()));

    let mut first_error: Option<FormatError> = None;
    for group in [fences, regions] {
        let mut parsed_any = false;
        for text in group {
            match serde_json::from_str::<Value>(text.trim()) {
                Ok(v) => {
                    parsed_any = true;
                    match decode(kind, &v) {
                        Ok(decoded) => {
                            return Ok(Payload {
                                kind,
                                json_text: text.trim().to_string(),
                                decoded,
                            })
                        }
                        Err(e) => {
                            if !matches!(first_error, Some(FormatError::SchemaViolation(_))) {
                                first_error = Some(e);
                            }
                        }
                    }
                }
                Err(e) => {
                    first_error.get_or_insert(FormatError::ParseFailure(e.to_string()));
                }
            }
        }
        if parsed_any {
            break;
        }
    }
    Err(first_error.unwrap_or(FormatError::NoJsonBlock))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLAN: &str = r#"{"summary": "s", "slices": [{"index": 1, "description": "d", "code": "return 1;"}]}"#;

    #[test]
    fn fenced_plan() {
        let raw = format!("## Analysis\n\nSome prose.\n\n```json\n{PLAN}\n```\n");
        let p = extract_payload(&raw, PayloadKind::SlicePlan).unwrap();
        assert_eq!(p.slice_plan().unwrap().slices[0].code, "return 1;");
        assert_eq!(p.json_text, PLAN);
    }

    #[test]
    fn prose_only() {
        assert_eq!(
            extract_payload("I could not decompose this method.", PayloadKind::SlicePlan),
            Err(FormatError::NoJsonBlock)
        );
    }

    #[test]
    fn unfenced_json_is_found() {
        let raw = format!("Here is the plan: {PLAN} -- done {{ not json }}");
        assert!(extract_payload(&raw, PayloadKind::SlicePlan).is_ok());
    }

    #[test]
    fn missing_code_on_second_slice() {
        let raw = r#"```json
{"summary": "s", "slices": [
  {"index": 1, "description": "a", "code": "x = 1;"},
  {"index": 2, "description": "b"}
]}
```"#;
        assert_eq!(
            extract_payload(raw, PayloadKind::SlicePlan),
            Err(FormatError::SchemaViolation("slices[1].code".into()))
        );
    }

    #[test]
    fn broken_fence_reports_parse_failure() {
        let raw = "```json\n{\"test_file\": \"fn test_a() {\n```\n";
        assert!(matches!(
            extract_payload(raw, PayloadKind::TestFile),
            Err(FormatError::ParseFailure(_))
        ));
    }

    #[test]
    fn braces_inside_strings_do_not_confuse_the_scan() {
        let raw = r#"Result: {"test_file": "fn test_a() {\n    print(\"}\");\n}\n"} trailing"#;
        let p = extract_payload(raw, PayloadKind::TestFile).unwrap();
        assert_eq!(p.test_source().unwrap(), "fn test_a() {\n    print(\"}\");\n}\n");
    }

    #[test]
    fn later_fence_satisfying_schema_wins() {
        let raw = "```json\n{\"example\": true}\n```\n\n```json\n{\"test_file\": \"x\"}\n```\n";
        let p = extract_payload(raw, PayloadKind::FixedTest).unwrap();
        assert_eq!(p.test_source(), Some("x"));
    }
}
