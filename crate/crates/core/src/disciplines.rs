//! Symmetric service disciplines.
//!
//! A discipline assigns, for every queue length `n >= 1`, a service-rate
//! share `gamma(n, i) >= 0` to the customer in position `i` (positions are
//! 1-based, position 1 at the head). The shares of each row sum to one, so
//! the server is work conserving. The same row doubles as the insertion law:
//! an arrival finding `n` customers takes position `i` with probability
//! `gamma(n + 1, i)`.

use thiserror::Error;

/// Absolute tolerance for a rate row to count as normalized.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisciplineError {
    #[error("invalid discipline table: {0}")]
    InvalidTable(ValidationReport),
    #[error("insertion variate {0} outside [0, 1)")]
    BadVariate(f64),
}

/// How a finite rate table extends to queue lengths beyond its last row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extension {
    /// Use the last row, padded with zero rates for the extra positions.
    /// The padded row still sums to one, so no mass is lost.
    RepeatLastRow,
    /// Equal rates `1/n` for all positions (processor-sharing tail).
    Uniform,
}

/// A symmetric service discipline.
#[derive(Debug, Clone, PartialEq)]
pub enum Discipline {
    /// Processor sharing: `gamma(n, i) = 1/n`.
    Ps,
    /// Preemptive last-come-first-served: `gamma(n, 1) = 1`.
    Lcfs,
    /// Explicit triangular rate table; row `n` (1-based) has `n` entries.
    /// Rows are normalized at construction.
    Table {
        rows: Vec<Vec<f64>>,
        extension: Extension,
    },
}

/// One violated constraint found while validating a rate table.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Row (queue length), 1-based.
    pub n: usize,
    /// Offending position within the row, 1-based; `None` for whole-row
    /// defects such as an all-zero row.
    pub i: Option<usize>,
    pub message: String,
}

/// Outcome of checking the discipline invariants.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (idx, v) in self.violations.iter().enumerate() {
            if idx > 0 {
                writeln!(f)?;
            }
            match v.i {
                Some(i) => write!(f, "(n={}, i={}): {}", v.n, i, v.message)?,
                None => write!(f, "(n={}): {}", v.n, v.message)?,
            }
        }
        Ok(())
    }
}

/// Checks a raw triangular weight table: row `n` must have exactly `n`
/// nonnegative finite entries, at least one of them positive.
///
/// This runs before normalization, so row sums other than one are fine;
/// only negativity, wrong arity, non-finite entries, and all-zero rows are
/// reported.
pub fn validate_table(rows: &[Vec<f64>]) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (idx, row) in rows.iter().enumerate() {
        let n = idx + 1;
        if row.len() != n {
            report.violations.push(Violation {
                n,
                i: None,
                message: format!("row has {} entries, expected {}", row.len(), n),
            });
            continue;
        }
        let mut all_zero = true;
        for (j, &w) in row.iter().enumerate() {
            if !w.is_finite() {
                report.violations.push(Violation {
                    n,
                    i: Some(j + 1),
                    message: format!("non-finite weight {w}"),
                });
                all_zero = false;
            } else if w < 0.0 {
                report.violations.push(Violation {
                    n,
                    i: Some(j + 1),
                    message: format!("negative weight {w}"),
                });
                all_zero = false;
            } else if w > 0.0 {
                all_zero = false;
            }
        }
        if all_zero {
            report.violations.push(Violation {
                n,
                i: None,
                message: "all weights zero".to_string(),
            });
        }
    }
    report
}

impl Discipline {
    pub fn ps() -> Self {
        Discipline::Ps
    }

    pub fn lcfs() -> Self {
        Discipline::Lcfs
    }

    /// Builds a table discipline from raw weights, normalizing each row to
    /// sum to one. Rows with negative, non-finite, or all-zero weights are
    /// rejected here, so `rates` never fails afterwards.
    pub fn table(rows: Vec<Vec<f64>>, extension: Extension) -> Result<Self, DisciplineError> {
        if rows.is_empty() {
            return Err(DisciplineError::InvalidTable(ValidationReport {
                violations: vec![Violation {
                    n: 1,
                    i: None,
                    message: "table has no rows".to_string(),
                }],
            }));
        }
        let report = validate_table(&rows);
        if !report.is_ok() {
            return Err(DisciplineError::InvalidTable(report));
        }
        let rows = rows
            .into_iter()
            .map(|row| {
                let sum: f64 = row.iter().sum();
                row.into_iter().map(|w| w / sum).collect()
            })
            .collect();
        Ok(Discipline::Table { rows, extension })
    }

    /// Service-rate shares `gamma(n, i)` for `i = 1..=n`; entry `i - 1` of
    /// the result is the share of position `i`. The row sums to one.
    pub fn rates(&self, n: usize) -> Vec<f64> {
        assert!(n >= 1, "rates undefined for an empty queue");
        match self {
            Discipline::Ps => vec![1.0 / n as f64; n],
            Discipline::Lcfs => {
                let mut row = vec![0.0; n];
                row[0] = 1.0;
                row
            }
            Discipline::Table { rows, extension } => {
                if n <= rows.len() {
                    rows[n - 1].clone()
                } else {
                    match extension {
                        Extension::Uniform => vec![1.0 / n as f64; n],
                        Extension::RepeatLastRow => {
                            let mut row = rows[rows.len() - 1].clone();
                            row.resize(n, 0.0);
                            let sum: f64 = row.iter().sum();
                            row.iter_mut().for_each(|w| *w /= sum);
                            row
                        }
                    }
                }
            }
        }
    }

    /// Rate share of a single position (1-based).
    pub fn rate(&self, n: usize, i: usize) -> f64 {
        assert!(i >= 1 && i <= n, "position {i} out of 1..={n}");
        match self {
            Discipline::Ps => 1.0 / n as f64,
            Discipline::Lcfs => {
                if i == 1 {
                    1.0
                } else {
                    0.0
                }
            }
            Discipline::Table { .. } => self.rates(n)[i - 1],
        }
    }

    /// Position (1-based) taken by an arrival that finds `n_before`
    /// customers, driven by a uniform variate `u` in `[0, 1)`.
    ///
    /// Inverse-CDF walk over `rates(n_before + 1)` in increasing position
    /// order: the smallest `i` whose cumulative rate exceeds `u`.
    pub fn insertion_position(&self, n_before: usize, u: f64) -> Result<usize, DisciplineError> {
        if !(0.0..1.0).contains(&u) {
            return Err(DisciplineError::BadVariate(u));
        }
        let n = n_before + 1;
        let row = self.rates(n);
        let mut cum = 0.0;
        for (j, &g) in row.iter().enumerate() {
            cum += g;
            if u < cum {
                return Ok(j + 1);
            }
        }
        // Cumulative fell short of 1 by rounding; the last positive-rate
        // position absorbs the remainder.
        let last = row.iter().rposition(|&g| g > 0.0).unwrap_or(n - 1);
        Ok(last + 1)
    }

    /// Checks both defining invariants (nonnegative rates, row sums equal to
    /// one within [`ROW_SUM_TOL`]) for every `n <= n_check`.
    pub fn validate(&self, n_check: usize) -> ValidationReport {
        let mut report = ValidationReport::default();
        for n in 1..=n_check {
            let row = self.rates(n);
            for (j, &g) in row.iter().enumerate() {
                if !(g >= 0.0) {
                    report.violations.push(Violation {
                        n,
                        i: Some(j + 1),
                        message: format!("negative rate {g}"),
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                report.violations.push(Violation {
                    n,
                    i: None,
                    message: format!("row sums to {sum}, expected 1"),
                });
            }
        }
        report
    }

    /// Short name used in experiment outputs.
    pub fn label(&self) -> String {
        match self {
            Discipline::Ps => "ps".to_string(),
            Discipline::Lcfs => "lcfs".to_string(),
            Discipline::Table { rows, .. } => format!("table{}", rows.len()),
        }
    }
}
