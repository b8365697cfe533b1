//! Coverage, pass-rate and error-distribution reports.
//!
//! Method reports hold integer counters only; every percentage is derived
//! from them with exact rational arithmetic and rounded half-up to two
//! decimals when rendered. Project figures are unweighted means over focal
//! methods, the pass rate and error split are pooled over candidates, and
//! the average row is the unweighted mean over projects. A ratio with a
//! zero denominator is N/A and takes no part in any mean.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::slicing::PlanOrigin;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodStatus {
    Ok,
    Errored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalleeCoverage {
    pub function: String,
    pub line_covered: u64,
    pub line_total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodReport {
    pub focal: String,
    pub complexity: u32,
    pub status: MethodStatus,
    pub error: Option<String>,
    pub plan_origin: Option<PlanOrigin>,
    pub slices: u64,
    pub candidates: u64,
    pub passed: u64,
    /// First-run compile errors among candidates.
    pub compile_errors: u64,
    /// First-run runtime errors among candidates.
    pub runtime_errors: u64,
    pub line_covered: u64,
    pub line_total: u64,
    pub branch_covered: u64,
    pub branch_total: u64,
    pub llm_calls: u64,
    /// Ids of the passing candidates whose coverage is counted.
    pub accepted: Vec<String>,
    /// Coverage of functions the focal method calls; informational only.
    pub callees: Vec<CalleeCoverage>,
}

impl MethodReport {
    /// An empty report for a method whose counters are filled in later.
    pub fn new(focal: &str, complexity: u32) -> Self {
        Self {
            focal: focal.to_string(),
            complexity,
            status: MethodStatus::Ok,
            error: None,
            plan_origin: None,
            slices: 0,
            candidates: 0,
            passed: 0,
            compile_errors: 0,
            runtime_errors: 0,
            line_covered: 0,
            line_total: 0,
            branch_covered: 0,
            branch_total: 0,
            llm_calls: 0,
            accepted: Vec::new(),
            callees: Vec::new(),
        }
    }

    pub fn line_coverage(&self) -> Option<BigRational> {
        ratio(self.line_covered, self.line_total)
    }

    pub fn branch_coverage(&self) -> Option<BigRational> {
        ratio(self.branch_covered, self.branch_total)
    }

    pub fn pass_rate(&self) -> Option<BigRational> {
        ratio(self.passed, self.candidates)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectReport {
    pub name: String,
    pub methods: Vec<MethodReport>,
}

/// Derived figures of one table row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowFigures {
    pub methods: u64,
    pub line_coverage: Option<BigRational>,
    pub branch_coverage: Option<BigRational>,
    pub pass_rate: Option<BigRational>,
    pub compile_errors: u64,
    pub runtime_errors: u64,
    pub compile_share: Option<BigRational>,
    pub runtime_share: Option<BigRational>,
}

impl ProjectReport {
    pub fn figures(&self) -> RowFigures {
        let m = &self.methods;
        let passed = m.iter().map(|r| r.passed).sum();
        let candidates = m.iter().map(|r| r.candidates).sum();
        let compile_errors = m.iter().map(|r| r.compile_errors).sum();
        let runtime_errors = m.iter().map(|r| r.runtime_errors).sum();
        RowFigures {
            methods: m.len() as u64,
            line_coverage: mean(m.iter().map(MethodReport::line_coverage)),
            branch_coverage: mean(m.iter().map(MethodReport::branch_coverage)),
            pass_rate: ratio(passed, candidates),
            compile_errors,
            runtime_errors,
            compile_share: ratio(compile_errors, compile_errors + runtime_errors),
            runtime_share: ratio(runtime_errors, compile_errors + runtime_errors),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub schema_version: u32,
    pub projects: Vec<ProjectReport>,
}

impl CoverageReport {
    pub fn new(projects: Vec<ProjectReport>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            projects,
        }
    }

    /// The Avg. row: unweighted mean of the project rows.
    pub fn average(&self) -> RowFigures {
        let rows: Vec<RowFigures> = self.projects.iter().map(ProjectReport::figures).collect();
        let pick = |f: fn(&RowFigures) -> Option<BigRational>| mean(rows.iter().map(f));
        RowFigures {
            methods: rows.iter().map(|r| r.methods).sum(),
            line_coverage: pick(|r| r.line_coverage.clone()),
            branch_coverage: pick(|r| r.branch_coverage.clone()),
            pass_rate: pick(|r| r.pass_rate.clone()),
            compile_errors: rows.iter().map(|r| r.compile_errors).sum(),
            runtime_errors: rows.iter().map(|r| r.runtime_errors).sum(),
            compile_share: pick(|r| r.compile_share.clone()),
            runtime_share: pick(|r| r.runtime_share.clone()),
        }
    }

    pub fn any_errored(&self) -> bool {
        self.projects
            .iter()
            .flat_map(|p| &p.methods)
            .any(|m| m.status == MethodStatus::Errored)
    }
}

pub fn ratio(num: u64, den: u64) -> Option<BigRational> {
    (den > 0).then(|| BigRational::new(num.into(), den.into()))
}

/// Mean of the defined values; N/A when none is defined.
pub fn mean(values: impl IntoIterator<Item = Option<BigRational>>) -> Option<BigRational> {
    let defined: Vec<BigRational> = values.into_iter().flatten().collect();
    if defined.is_empty() {
        return None;
    }
    let n = BigRational::from_integer(BigInt::from(defined.len()));
    Some(defined.into_iter().fold(BigRational::zero(), |a, b| a + b) / n)
}

/// `x` as a percentage with two decimals, rounded half-up; N/A for `None`.
pub fn format_percent(x: &Option<BigRational>) -> String {
    let Some(x) = x else { return "N/A".into() };
    let scaled = x * BigRational::from_integer(10_000.into());
    let half = BigRational::new(1.into(), 2.into());
    let hundredths = if scaled.is_negative() {
        -((-scaled) + half).floor().to_integer()
    } else {
        (scaled + half).floor().to_integer()
    };
    let sign = if hundredths.is_negative() { "-" } else { "" };
    let abs = hundredths.abs();
    let (whole, frac) = (&abs / 100, &abs % 100);
    format!("{sign}{whole}.{frac:0>2}")
}

fn table(out: &mut String, title: &str, header: &[&str], rows: &[Vec<String>]) {
    let cols = header.len();
    let mut width = vec![0; cols];
    for row in std::iter::once(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>()).chain(rows) {
        for (i, cell) in row.iter().enumerate() {
            width[i] = width[i].max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i == 0 {
                    format!("{c:<w$}", w = width[i])
                } else {
                    format!("{c:>w$}", w = width[i])
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "{}",
        line(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>())
    );
    let _ = writeln!(out, "{}", "-".repeat(width.iter().sum::<usize>() + 2 * (cols - 1)));
    for row in rows {
        let _ = writeln!(out, "{}", line(row));
    }
    out.push('\n');
}

fn rows_with_avg(report: &CoverageReport, cells: impl Fn(&RowFigures) -> Vec<String>) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = report
        .projects
        .iter()
        .map(|p| std::iter::once(p.name.clone()).chain(cells(&p.figures())).collect())
        .collect();
    rows.push(
        std::iter::once("Avg.".to_string())
            .chain(cells(&report.average()))
            .collect(),
    );
    rows
}

pub fn render_text(report: &CoverageReport) -> String {
    let mut out = String::new();
    table(
        &mut out,
        "Line coverage on complex methods (%)",
        &["Project", "Methods", "Line"],
        &rows_with_avg(report, |f| {
            vec![f.methods.to_string(), format_percent(&f.line_coverage)]
        }),
    );
    table(
        &mut out,
        "Branch coverage on complex methods (%)",
        &["Project", "Methods", "Branch"],
        &rows_with_avg(report, |f| {
            vec![f.methods.to_string(), format_percent(&f.branch_coverage)]
        }),
    );
    table(
        &mut out,
        "Pass rate on complex methods (%)",
        &["Project", "Methods", "Pass rate"],
        &rows_with_avg(report, |f| vec![f.methods.to_string(), format_percent(&f.pass_rate)]),
    );
    table(
        &mut out,
        "Non-executable test distribution",
        &["Project", "Compile", "Runtime", "Compile %", "Runtime %"],
        &rows_with_avg(report, |f| {
            vec![
                f.compile_errors.to_string(),
                f.runtime_errors.to_string(),
                format_percent(&f.compile_share),
                format_percent(&f.runtime_share),
            ]
        }),
    );
    let methods: Vec<Vec<String>> = report
        .projects
        .iter()
        .flat_map(|p| {
            p.methods.iter().map(move |m| {
                vec![
                    format!("{}/{}", p.name, m.focal),
                    m.complexity.to_string(),
                    format!("{}/{}", m.line_covered, m.line_total),
                    format!("{}/{}", m.branch_covered, m.branch_total),
                    format!("{}/{}", m.passed, m.candidates),
                    match m.status {
                        MethodStatus::Ok => "ok".to_string(),
                        MethodStatus::Errored => format!("errored: {}", m.error.as_deref().unwrap_or("")),
                    },
                ]
            })
        })
        .collect();
    table(
        &mut out,
        "Focal methods",
        &["Method", "CC", "Lines", "Branches", "Passed", "Status"],
        &methods,
    );
    out.truncate(out.trim_end().len());
    out.push('\n');
    out
}

pub fn render_json(report: &CoverageReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn parse_json(text: &str) -> Result<CoverageReport, ReportParseError> {
    let report: CoverageReport = serde_json::from_str(text).map_err(|e| ReportParseError(e.to_string()))?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(ReportParseError(format!(
            "unsupported schema version {}",
            report.schema_version
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed report: {0}")]
pub struct ReportParseError(pub String);

/// One CSV row: `project,focal,field,value`. Method fields carry the raw
/// counters; rows with an empty focal hold the derived project figures and
/// the `Avg.` project holds the average row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CsvRow {
    project: String,
    focal: String,
    field: String,
    value: String,
}

const AVG: &str = "Avg.";

fn figure_rows(project: &str, f: &RowFigures, out: &mut Vec<CsvRow>) {
    let mut push = |field: &str, value: String| {
        out.push(CsvRow {
            project: project.to_string(),
            focal: String::new(),
            field: field.to_string(),
            value,
        })
    };
    push("methods", f.methods.to_string());
    push("line_coverage", format_percent(&f.line_coverage));
    push("branch_coverage", format_percent(&f.branch_coverage));
    push("pass_rate", format_percent(&f.pass_rate));
    push("compile_errors", f.compile_errors.to_string());
    push("runtime_errors", f.runtime_errors.to_string());
    push("compile_share", format_percent(&f.compile_share));
    push("runtime_share", format_percent(&f.runtime_share));
}

/// Long-format CSV holding every method counter plus the derived figures.
pub fn render_csv(report: &CoverageReport) -> String {
    let mut rows = Vec::new();
    for p in &report.projects {
        for m in &p.methods {
            let value = serde_json::to_value(m).expect("method serializes");
            for (field, v) in value.as_object().expect("object") {
                if field == "focal" {
                    continue;
                }
                rows.push(CsvRow {
                    project: p.name.clone(),
                    focal: m.focal.clone(),
                    field: field.clone(),
                    value: v.to_string(),
                });
            }
        }
        figure_rows(&p.name, &p.figures(), &mut rows);
    }
    figure_rows(AVG, &report.average(), &mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("utf-8")
}

/// Method fields keyed by focal name, grouped by project in row order.
type CsvProjects = Vec<(String, Vec<(String, serde_json::Map<String, serde_json::Value>)>)>;

/// Rebuilds a report from [`render_csv`] output. Derived rows are ignored.
pub fn parse_csv(text: &str) -> Result<CoverageReport, ReportParseError> {
    let err = |e: &dyn std::fmt::Display| ReportParseError(e.to_string());
    let mut projects: CsvProjects = Vec::new();
    for row in csv::Reader::from_reader(text.as_bytes()).deserialize::<CsvRow>() {
        let row = row.map_err(|e| err(&e))?;
        if row.project == AVG {
            continue;
        }
        let pos = match projects.iter().position(|(n, _)| *n == row.project) {
            Some(i) => i,
            None => {
                projects.push((row.project.clone(), Vec::new()));
                projects.len() - 1
            }
        };
        if row.focal.is_empty() {
            continue;
        }
        let methods = &mut projects[pos].1;
        let mpos = match methods.iter().position(|(f, _)| *f == row.focal) {
            Some(i) => i,
            None => {
                let mut map = serde_json::Map::new();
                map.insert("focal".into(), row.focal.clone().into());
                methods.push((row.focal.clone(), map));
                methods.len() - 1
            }
        };
        let value: serde_json::Value = serde_json::from_str(&row.value).map_err(|e| err(&e))?;
        methods[mpos].1.insert(row.field, value);
    }
    let projects = projects
        .into_iter()
        .map(|(name, methods)| {
            let methods = methods
                .into_iter()
                .map(|(_, m)| serde_json::from_value(m.into()).map_err(|e| err(&e)))
                .collect::<Result<_, _>>()?;
            Ok(ProjectReport { name, methods })
        })
        .collect::<Result<_, ReportParseError>>()?;
    Ok(CoverageReport::new(projects))
}

/// Derived figures keyed by `project/field`, as rendered. Used to compare
/// encodings.
pub fn figure_map(report: &CoverageReport) -> BTreeMap<String, String> {
    let mut rows = Vec::new();
    for p in &report.projects {
        figure_rows(&p.name, &p.figures(), &mut rows);
    }
    figure_rows(AVG, &report.average(), &mut rows);
    rows.into_iter()
        .map(|r| (format!("{}/{}", r.project, r.field), r.value))
        .collect()
}
