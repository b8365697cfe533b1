use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// One arm of an `if`/`while`/`for` condition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BranchSite {
    pub function: String,
    pub line: u32,
    pub arm: bool,
}

/// Line and branch counters collected while running tests, restricted to
/// functions of the program under test.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawCoverage {
    pub covered_lines: BTreeSet<(String, u32)>,
    /// Both arms of a site are present once its condition has been evaluated;
    /// the arm not taken keeps a count of zero.
    pub branch_hits: BTreeMap<BranchSite, u64>,
}

impl RawCoverage {
    pub fn is_empty(&self) -> bool {
        self.covered_lines.is_empty() && self.branch_hits.is_empty()
    }

    pub fn hits(&self, function: &str, line: u32, arm: bool) -> u64 {
        self.branch_hits
            .get(&BranchSite {
                function: function.to_string(),
                line,
                arm,
            })
            .copied()
            .unwrap_or(0)
    }

    pub(crate) fn record_branch(&mut self, function: &str, line: u32, taken: bool) {
        let site = |arm| BranchSite {
            function: function.to_string(),
            line,
            arm,
        };
        *self.branch_hits.entry(site(taken)).or_insert(0) += 1;
        self.branch_hits.entry(site(!taken)).or_insert(0);
    }

    pub fn lines_of(&self, function: &str) -> BTreeSet<u32> {
        self.covered_lines
            .iter()
            .filter(|(f, _)| f == function)
            .map(|&(_, l)| l)
            .collect()
    }

    /// Branch arms of `function` taken at least once, as `(line, arm)`.
    pub fn arms_covered(&self, function: &str) -> BTreeSet<(u32, bool)> {
        self.branch_hits
            .iter()
            .filter(|(site, &n)| site.function == function && n > 0)
            .map(|(site, _)| (site.line, site.arm))
            .collect()
    }

    /// Union of lines; hit counts add up.
    pub fn merge(&mut self, other: &RawCoverage) {
        self.covered_lines.extend(other.covered_lines.iter().cloned());
        for (site, n) in &other.branch_hits {
            *self.branch_hits.entry(site.clone()).or_insert(0) += n;
        }
    }

    /// Covered lines and taken arms only, dropping hit counts. Two runs with
    /// equal footprints cover the same things.
    pub fn footprint(&self) -> (BTreeSet<(String, u32)>, BTreeSet<BranchSite>) {
        (
            self.covered_lines.clone(),
            self.branch_hits
                .iter()
                .filter(|(_, &n)| n > 0)
                .map(|(s, _)| s.clone())
                .collect(),
        )
    }
}
