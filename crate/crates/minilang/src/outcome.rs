use serde::{Deserialize, Serialize};

use crate::interp::{ExecutionOutcome, Status};

/// Split of non-passing outcomes into compile and runtime errors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub compile_errors: u64,
    pub runtime_errors: u64,
}

impl ErrorDistribution {
    pub fn from_statuses(statuses: impl IntoIterator<Item = Status>) -> Self {
        let mut d = Self::default();
        for s in statuses {
            match s {
                Status::Passed => {}
                Status::CompileError => d.compile_errors += 1,
                Status::RuntimeError => d.runtime_errors += 1,
            }
        }
        d
    }

    pub fn non_passing(&self) -> u64 {
        self.compile_errors + self.runtime_errors
    }

    /// Fraction of compile errors among non-passing outcomes; 0 when none failed.
    pub fn compile_fraction(&self) -> f64 {
        match self.non_passing() {
            0 => 0.0,
            n => self.compile_errors as f64 / n as f64,
        }
    }

    pub fn runtime_fraction(&self) -> f64 {
        match self.non_passing() {
            0 => 0.0,
            n => self.runtime_errors as f64 / n as f64,
        }
    }

    pub fn add(&mut self, other: &ErrorDistribution) {
        self.compile_errors += other.compile_errors;
        self.runtime_errors += other.runtime_errors;
    }
}

pub fn classify_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a ExecutionOutcome>) -> ErrorDistribution {
    ErrorDistribution::from_statuses(outcomes.into_iter().map(|o| o.status))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_passed_is_zero() {
        let d = ErrorDistribution::from_statuses([Status::Passed, Status::Passed]);
        assert_eq!((d.compile_fraction(), d.runtime_fraction()), (0.0, 0.0));
    }

    #[test]
    fn mixed() {
        let d = ErrorDistribution::from_statuses([
            Status::CompileError,
            Status::RuntimeError,
            Status::RuntimeError,
            Status::Passed,
        ]);
        assert_eq!(d.compile_fraction(), 1.0 / 3.0);
        assert_eq!(d.runtime_fraction(), 2.0 / 3.0);
        assert_eq!(d.compile_fraction() + d.runtime_fraction(), 1.0);
    }
}
