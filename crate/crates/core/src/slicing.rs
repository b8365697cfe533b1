//! Slice plans: validation of recited decompositions, the deterministic
//! fallback slicer, and condition-combination estimates.

use std::collections::BTreeSet;

use minilang::analysis::{decisions_by_line, stmt_decisions};
use minilang::{statement_lines, Program};
use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::focal::FocalMethod;

/// Default decision points per fallback slice.
pub const DEFAULT_TARGET_DECISIONS: u32 = 3;

/// Cap on the exponent of nᵢ = 2^decisions.
const MAX_EXPONENT: u32 = 20;

/// A slice plan as decoded from a model response, before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSlicePlan {
    pub summary: String,
    pub slices: Vec<RawSlice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSlice {
    pub index: u64,
    pub description: String,
    pub code: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanOrigin {
    Llm,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    /// 1-based position in the plan.
    pub index: usize,
    pub description: String,
    /// The focal source lines of `resolved_span`, verbatim.
    pub recited_code: String,
    pub first_line: u32,
    pub last_line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlicePlan {
    pub focal: String,
    pub origin: PlanOrigin,
    pub summary: String,
    pub slices: Vec<Slice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SliceValidationError {
    #[error("the plan has no slices")]
    EmptyPlan,
    #[error("slice {0}: recited code does not occur in the focal method")]
    UnlocatableSegment(usize),
    #[error("slice {0}: recited code overlaps or precedes an earlier slice")]
    Overlap(usize),
    #[error("slice {0}: executable lines before it are not covered by any slice")]
    Gap(usize),
}

/// One line of the focal body with the function header and closing brace cut away.
#[derive(Debug, Clone)]
struct BodyLine {
    line: u32,
    text: String,
    norm: String,
}

/// Collapses runs of whitespace to one space and trims.
pub fn normalize(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn body_lines(program: &Program, focal: &FocalMethod) -> Vec<BodyLine> {
    let body = &focal.function.body;
    let (open, close) = (body.open, body.close);
    let mut out = Vec::new();
    for line in open.line..=close.line {
        let raw = program.lines_text(line, line);
        let chars: Vec<char> = raw.chars().collect();
        let start = if line == open.line { open.col as usize } else { 0 };
        let end = if line == close.line {
            (close.col as usize).saturating_sub(1)
        } else {
            chars.len()
        };
        let text: String = chars
            .get(start..end.max(start))
            .map(|c| c.iter().collect())
            .unwrap_or_default();
        let norm = normalize(&text);
        if !norm.is_empty() {
            out.push(BodyLine { line, text, norm });
        }
    }
    out
}

fn recite(body: &[BodyLine], first: u32, last: u32) -> String {
    body.iter()
        .filter(|b| (first..=last).contains(&b.line))
        .map(|b| b.text.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

fn find_run(body: &[BodyLine], from: usize, needle: &[String]) -> Option<usize> {
    if needle.len() > body.len() {
        return None;
    }
    (from..=body.len() - needle.len())
        .find(|&i| body[i..i + needle.len()].iter().zip(needle).all(|(b, n)| &b.norm == n))
}

/// Locates every recited segment in the focal body. Segments must appear in
/// order, must not overlap, and together must cover every executable line.
pub fn validate_slice_plan(
    raw: &RawSlicePlan,
    program: &Program,
    focal: &FocalMethod,
) -> Result<SlicePlan, SliceValidationError> {
    if raw.slices.is_empty() {
        return Err(SliceValidationError::EmptyPlan);
    }
    let body = body_lines(program, focal);
    let executable = statement_lines(&focal.function);
    let uncovered = |from: u32, to: u32| executable.range(from..to).next().is_some();

    let mut slices = Vec::new();
    let mut cursor = 0;
    let mut next_line = focal.function.body.open.line;
    for (k, s) in raw.slices.iter().enumerate() {
        let index = k + 1;
        let needle: Vec<String> = s.code.lines().map(normalize).filter(|l| !l.is_empty()).collect();
        if needle.is_empty() {
            return Err(SliceValidationError::UnlocatableSegment(index));
        }
        let Some(at) = find_run(&body, cursor, &needle) else {
            return Err(if find_run(&body, 0, &needle).is_some() {
                SliceValidationError::Overlap(index)
            } else {
                SliceValidationError::UnlocatableSegment(index)
            });
        };
        let (first, last) = (body[at].line, body[at + needle.len() - 1].line);
        if uncovered(next_line, first) {
            return Err(SliceValidationError::Gap(index));
        }
        slices.push(Slice {
            index,
            description: s.description.clone(),
            recited_code: recite(&body, first, last),
            first_line: first,
            last_line: last,
        });
        cursor = at + needle.len();
        next_line = last + 1;
    }
    if uncovered(next_line, focal.function.span.last_line + 1) {
        return Err(SliceValidationError::Gap(slices.len()));
    }
    Ok(SlicePlan {
        focal: focal.qualified_name.clone(),
        origin: PlanOrigin::Llm,
        summary: raw.summary.clone(),
        slices,
    })
}

/// Groups top-level statements greedily, closing a group as soon as its
/// decision points reach `target_decisions`. Compound statements stay whole.
pub fn fallback_slice(program: &Program, focal: &FocalMethod, target_decisions: u32) -> SlicePlan {
    let target = target_decisions.max(1);
    let body = body_lines(program, focal);
    let mut groups: Vec<(u32, u32, u32)> = Vec::new();
    let mut open: Option<(u32, u32, u32)> = None;
    for stmt in &focal.function.body.stmts {
        let d = stmt_decisions(stmt);
        let g = open.get_or_insert((stmt.line, stmt.line, 0));
        g.1 = stmt.last_line();
        g.2 += d;
        if g.2 >= target {
            groups.extend(open.take());
        }
    }
    groups.extend(open);
    let slices = groups
        .into_iter()
        .enumerate()
        .map(|(k, (first, last, d))| Slice {
            index: k + 1,
            description: format!("Statements on lines {first}-{last} ({d} decision points)."),
            recited_code: recite(&body, first, last),
            first_line: first,
            last_line: last,
        })
        .collect();
    SlicePlan {
        focal: focal.qualified_name.clone(),
        origin: PlanOrigin::Fallback,
        summary: format!(
            "Top-level statements of `{}` grouped by about {target} decision points each.",
            focal.function.name
        ),
        slices,
    }
}

/// Per-slice condition-combination counts nᵢ with their exact sum and product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceComplexityEstimate {
    pub decisions: Vec<u32>,
    pub per_slice_conditions: Vec<u64>,
    #[serde(with = "decimal")]
    pub sum: BigUint,
    #[serde(with = "decimal")]
    pub product: BigUint,
}

/// Big integers as decimal strings, so any JSON reader can take them.
mod decimal {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

impl SliceComplexityEstimate {
    pub fn from_conditions(per_slice_conditions: Vec<u64>) -> Self {
        let sum = per_slice_conditions.iter().map(|&n| BigUint::from(n)).sum();
        let product = per_slice_conditions
            .iter()
            .fold(BigUint::one(), |acc, &n| acc * BigUint::from(n));
        Self {
            decisions: Vec::new(),
            per_slice_conditions,
            sum,
            product,
        }
    }

    pub fn from_decisions(decisions: Vec<u32>) -> Self {
        let n = decisions.iter().map(|&d| 1u64 << d.min(MAX_EXPONENT)).collect();
        Self {
            decisions,
            ..Self::from_conditions(n)
        }
    }
}

/// nᵢ = 2^(decision points whose owning statement lies inside slice i).
pub fn estimate_conditions(plan: &SlicePlan, focal: &FocalMethod) -> SliceComplexityEstimate {
    let by_line = decisions_by_line(&focal.function);
    let decisions = plan
        .slices
        .iter()
        .map(|s| by_line.range(s.first_line..=s.last_line).map(|(_, d)| d).sum())
        .collect();
    SliceComplexityEstimate::from_decisions(decisions)
}

/// Executable lines of the focal method covered by the plan's spans, in order.
pub fn covered_executable_lines(plan: &SlicePlan, focal: &FocalMethod) -> Vec<u32> {
    let executable: BTreeSet<u32> = statement_lines(&focal.function);
    plan.slices
        .iter()
        .flat_map(|s| {
            executable
                .range(s.first_line..=s.last_line)
                .copied()
                .collect::<Vec<_>>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;
    use crate::focal::Project;

    fn focal(src: &str) -> (Program, FocalMethod) {
        let p = Project::from_sources(Path::new("p"), [("a.mini".to_string(), src.to_string())]).unwrap();
        let f = p.focal_methods(0).pop().unwrap();
        (p.files[0].program.clone(), f)
    }

    const BODY: &str =
        "fn f(x: int) -> int {\n    let y: int = x;\n    if (x > 0) {\n        y = y + 1;\n    }\n    return y;\n}\n";

    fn raw(codes: &[&str]) -> RawSlicePlan {
        RawSlicePlan {
            summary: "s".into(),
            slices: codes
                .iter()
                .enumerate()
                .map(|(i, c)| RawSlice {
                    index: i as u64 + 1,
                    description: format!("step {}", i + 1),
                    code: c.to_string(),
                })
                .collect(),
        }
    }

    #[test]
    fn whole_body_is_one_slice() {
        let (p, f) = focal(BODY);
        let plan = validate_slice_plan(
            &raw(&["let y: int = x;\nif (x > 0) {\n    y = y + 1;\n}\nreturn y;"]),
            &p,
            &f,
        )
        .unwrap();
        assert_eq!(plan.slices.len(), 1);
        assert_eq!((plan.slices[0].first_line, plan.slices[0].last_line), (2, 6));
    }

    #[test]
    fn whitespace_differences_are_tolerated() {
        let (p, f) = focal(BODY);
        let plan = validate_slice_plan(
            &raw(&["  let   y: int = x;", "if (x > 0) {\n\ty = y + 1;\n}\n\nreturn   y;"]),
            &p,
            &f,
        )
        .unwrap();
        assert_eq!(
            plan.slices[1].recited_code,
            "    if (x > 0) {\n        y = y + 1;\n    }\n    return y;"
        );
    }

    #[test]
    fn errors_name_the_offending_slice() {
        let (p, f) = focal(BODY);
        let v = |codes: &[&str]| validate_slice_plan(&raw(codes), &p, &f).unwrap_err();
        assert_eq!(v(&[]), SliceValidationError::EmptyPlan);
        assert_eq!(
            v(&["let y: int = x;", "y = y + 2;"]),
            SliceValidationError::UnlocatableSegment(2)
        );
        assert_eq!(
            v(&[
                "let y: int = x;\nif (x > 0) {",
                "if (x > 0) {\n    y = y + 1;\n}\nreturn y;"
            ]),
            SliceValidationError::Overlap(2)
        );
        assert_eq!(v(&["let y: int = x;", "return y;"]), SliceValidationError::Gap(2));
        assert_eq!(
            v(&["if (x > 0) {\n    y = y + 1;\n}\nreturn y;"]),
            SliceValidationError::Gap(1)
        );
        assert_eq!(
            v(&["let y: int = x;\nif (x > 0) {\n    y = y + 1;\n}"]),
            SliceValidationError::Gap(1)
        );
    }

    #[test]
    fn one_line_function_body() {
        let (p, f) = focal("fn add(a: int, b: int) -> int { return a + b; }\n");
        let plan = validate_slice_plan(&raw(&["return a + b;"]), &p, &f).unwrap();
        assert_eq!((plan.slices[0].first_line, plan.slices[0].last_line), (1, 1));
        let fb = fallback_slice(&p, &f, 3);
        assert_eq!(fb.slices[0].recited_code, " return a + b; ");
        assert!(validate_slice_plan(&to_raw(&fb), &p, &f).is_ok());
    }

    fn to_raw(plan: &SlicePlan) -> RawSlicePlan {
        RawSlicePlan {
            summary: plan.summary.clone(),
            slices: plan
                .slices
                .iter()
                .map(|s| RawSlice {
                    index: s.index as u64,
                    description: s.description.clone(),
                    code: s.recited_code.clone(),
                })
                .collect(),
        }
    }

    #[test]
    fn fallback_on_straight_line_body_is_one_slice() {
        let (p, f) = focal("fn f() -> int {\n    let a: int = 1;\n    let b: int = 2;\n    return a + b;\n}\n");
        let plan = fallback_slice(&p, &f, 1);
        assert_eq!(plan.slices.len(), 1);
        assert_eq!((plan.slices[0].first_line, plan.slices[0].last_line), (2, 4));
    }

    #[test]
    fn fallback_target_one_splits_every_if() {
        let (p, f) = focal(
            "fn f(x: int) {\n    if (x > 0) {\n        print(1);\n    }\n    if (x > 1) {\n        print(2);\n    } else {\n        print(3);\n    }\n    if (x > 2) {\n        print(4);\n    }\n}\n",
        );
        let plan = fallback_slice(&p, &f, 1);
        let spans: Vec<(u32, u32)> = plan.slices.iter().map(|s| (s.first_line, s.last_line)).collect();
        assert_eq!(spans, [(2, 4), (5, 9), (10, 12)]);
    }

    #[test]
    fn estimate_examples() {
        let e = SliceComplexityEstimate::from_conditions(vec![2, 3, 4]);
        assert_eq!((e.sum, e.product), (BigUint::from(9u32), BigUint::from(24u32)));
        let e = SliceComplexityEstimate::from_decisions(vec![2, 1, 3]);
        assert_eq!(e.per_slice_conditions, [4, 2, 8]);
        assert_eq!((e.sum, e.product), (BigUint::from(14u32), BigUint::from(64u32)));
        let e = SliceComplexityEstimate::from_decisions(vec![0]);
        assert_eq!((e.sum, e.product), (BigUint::one(), BigUint::one()));
        let e = SliceComplexityEstimate::from_decisions(vec![40, 40]);
        assert_eq!(e.per_slice_conditions, [1 << 20, 1 << 20]);
    }

    #[test]
    fn estimate_json_uses_decimal_strings() {
        let e = SliceComplexityEstimate::from_conditions(vec![1 << 40, 1 << 40]);
        let json = serde_json::to_value(&e).unwrap();
        assert_eq!(json["product"], "1208925819614629174706176");
        assert_eq!(serde_json::from_value::<SliceComplexityEstimate>(json).unwrap(), e);
    }
}
