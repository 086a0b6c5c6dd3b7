//! Regression execution and dataset collection.
//!
//! A regression plan is a list of tests, each with its own constraint set and
//! transaction budget, driven from one master seed. Every transaction is
//! randomized, applied to the design, and sampled against the covergroup;
//! the stimulus values and the per-bin hit flags become one dataset row.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coverage::{CoverGroup, CoverGroupState};
use crate::duv::DuvKind;
use crate::error::{Error, Result};
use crate::stimulus::{randomize, seed_schedule, ConstraintSet, FieldKind, FieldValue, RngState};

/// One planned test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestPlan {
    pub name: String,
    pub constraints: ConstraintSet,
    pub transactions: usize,
}

/// A full regression plan. Serializes to JSON as emitted by the synthesizer
/// and consumed by the runner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionPlan {
    pub duv: DuvKind,
    pub master_seed: u64,
    pub tests: Vec<TestPlan>,
}

impl RegressionPlan {
    /// Uniform plan: `tests` tests sharing one constraint set.
    pub fn uniform(
        duv: DuvKind,
        base: &ConstraintSet,
        tests: usize,
        transactions: usize,
        master_seed: u64,
    ) -> Self {
        let tests = (0..tests)
            .map(|i| TestPlan {
                name: format!("test_{i:03}"),
                constraints: base.clone(),
                transactions,
            })
            .collect();
        RegressionPlan {
            duv,
            master_seed,
            tests,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = std::collections::HashSet::new();
        for test in &self.tests {
            if test.transactions < 1 {
                return Err(Error::Config(format!(
                    "test `{}` has zero transactions",
                    test.name
                )));
            }
            if !names.insert(&test.name) {
                return Err(Error::Config(format!("duplicate test name `{}`", test.name)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("regression plan: {e}")))
    }
}

/// One collected sample: the test it came from, the stimulus values, and the
/// per-bin hit flags.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub test_index: usize,
    pub values: Vec<FieldValue>,
    pub flags: Vec<u8>,
}

/// Column-labelled collection of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub field_names: Vec<String>,
    pub field_kinds: Vec<FieldKind>,
    pub bin_names: Vec<String>,
    pub rows: Vec<DatasetRow>,
}

impl Dataset {
    pub fn header(&self) -> String {
        let mut cols = vec!["test_index".to_string()];
        cols.extend(self.field_names.iter().cloned());
        cols.extend(self.bin_names.iter().cloned());
        cols.join(",")
    }

    /// Stimulus column as doubles (integers convert exactly at these widths).
    pub fn field_column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.values[idx].as_f64()).collect()
    }

    /// Bin flag column as doubles.
    pub fn flag_column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| f64::from(r.flags[idx])).collect()
    }
}

/// Cumulative coverage after each completed test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tests_completed: usize,
    pub coverage_pct: f64,
}

/// Outcome of one regression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub n_test_runs: usize,
    pub wall_time_secs: f64,
    pub merged_coverage: CoverGroupState,
    pub coverage_pct: f64,
    pub coverage_curve: Vec<CurvePoint>,
}

/// Run a regression plan against a resolved covergroup.
///
/// Per-test seeds come from the seed schedule; the dataset contents are a
/// pure function of (plan, covergroup); only the wall time varies between
/// runs.
pub fn run_regression(
    plan: &RegressionPlan,
    group: &CoverGroup,
) -> Result<(RegressionSummary, Dataset)> {
    plan.validate()?;
    let specs = plan.duv.field_specs();
    let resolved: Vec<_> = plan
        .tests
        .iter()
        .map(|t| t.constraints.resolve(&specs))
        .collect::<Result<_>>()?;

    let mut state = group.new_state();
    let mut rows = Vec::new();
    let mut curve = Vec::with_capacity(plan.tests.len());
    let seeds = seed_schedule(plan.master_seed, plan.tests.len());

    let start = Instant::now();
    for (ti, (test, constraints)) in plan.tests.iter().zip(&resolved).enumerate() {
        let mut rng = RngState::new(seeds[ti]);
        for _ in 0..test.transactions {
            let rec = randomize(constraints, &specs, &mut rng);
            plan.duv.step(&rec)?;
            let flags = state.sample(&rec)?;
            rows.push(DatasetRow {
                test_index: ti,
                values: rec.values,
                flags,
            });
        }
        curve.push(CurvePoint {
            tests_completed: ti + 1,
            coverage_pct: state.coverage_pct()?,
        });
    }
    let wall_time_secs = start.elapsed().as_secs_f64();

    let coverage_pct = state.coverage_pct()?;
    let summary = RegressionSummary {
        n_test_runs: plan.tests.len(),
        wall_time_secs,
        merged_coverage: state,
        coverage_pct,
        coverage_curve: curve,
    };
    let dataset = Dataset {
        field_names: specs.iter().map(|s| s.name.clone()).collect(),
        field_kinds: specs.iter().map(|s| s.kind()).collect(),
        bin_names: group.bin_names(),
        rows,
    };
    Ok((summary, dataset))
}

/// Write a dataset as CSV: decimal integers, six-decimal reals, 0/1 flags,
/// LF line endings.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&dataset.header());
    out.push('\n');
    for row in &dataset.rows {
        out.push_str(&row.test_index.to_string());
        for v in &row.values {
            out.push(',');
            out.push_str(&v.to_string());
        }
        for f in &row.flags {
            out.push(',');
            out.push_str(if *f == 0 { "0" } else { "1" });
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a dataset back. The caller supplies the stimulus schema (names and
/// kinds, in order); all remaining columns are bin flags. Malformed content
/// reports its 1-based line number.
pub fn read_dataset(path: &Path, field_names: &[String], field_kinds: &[FieldKind]) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"test_index") {
        return Err(parse_err(1, "first column must be test_index".into()));
    }
    let nf = field_names.len();
    if cols.len() < 1 + nf {
        return Err(parse_err(1, format!("expected at least {} columns", 1 + nf)));
    }
    for (i, name) in field_names.iter().enumerate() {
        if cols[1 + i] != name {
            return Err(parse_err(
                1,
                format!("column {} is `{}`, expected `{name}`", i + 2, cols[1 + i]),
            ));
        }
    }
    let bin_names: Vec<String> = cols[1 + nf..].iter().map(|s| s.to_string()).collect();

    let mut rows = Vec::new();
    for (li, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = li + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(parse_err(
                lineno,
                format!("expected {} cells, found {}", cols.len(), cells.len()),
            ));
        }
        let test_index: usize = cells[0]
            .parse()
            .map_err(|e| parse_err(lineno, format!("bad test_index: {e}")))?;
        let mut values = Vec::with_capacity(nf);
        for (i, kind) in field_kinds.iter().enumerate() {
            let cell = cells[1 + i];
            let value = match kind {
                FieldKind::Int => FieldValue::Int(
                    cell.parse()
                        .map_err(|e| parse_err(lineno, format!("bad integer `{cell}`: {e}")))?,
                ),
                FieldKind::Real => FieldValue::Real(
                    cell.parse()
                        .map_err(|e| parse_err(lineno, format!("bad real `{cell}`: {e}")))?,
                ),
            };
            values.push(value);
        }
        let mut flags = Vec::with_capacity(bin_names.len());
        for cell in &cells[1 + nf..] {
            match *cell {
                "0" => flags.push(0),
                "1" => flags.push(1),
                other => return Err(parse_err(lineno, format!("bad flag `{other}`"))),
            }
        }
        rows.push(DatasetRow {
            test_index,
            values,
            flags,
        });
    }
    Ok(Dataset {
        field_names: field_names.to_vec(),
        field_kinds: field_kinds.to_vec(),
        bin_names,
        rows,
    })
}
