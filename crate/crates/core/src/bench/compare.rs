//! Side-by-side performance table of several runs of one benchmark.

use std::fmt::Write as _;

use serde::Serialize;

use crate::mesh::Benchmark;
use crate::solvers::SolverKind;

use super::{BenchError, RunSummary};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub solver: SolverKind,
    pub max_iterations_per_increment: usize,
    pub total_iterations: usize,
    pub ic_iterations: usize,
    pub wall_time_s: f64,
    pub factorizations: usize,
    /// Wall time of the slowest run divided by this run's.
    pub speedup: f64,
    /// Total iterations of the slowest run divided by this run's.
    pub iteration_ratio: f64,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub benchmark: Benchmark,
    pub rows: Vec<ComparisonRow>,
}

/// Builds the comparison table. Requires at least two summaries, all of the
/// same benchmark.
pub fn compare_runs(summaries: &[RunSummary]) -> Result<Comparison, BenchError> {
    if summaries.len() < 2 {
        return Err(BenchError::Compare(format!("need at least two summaries, got {}", summaries.len())));
    }
    let benchmark = summaries[0].benchmark;
    if let Some(other) = summaries.iter().find(|s| s.benchmark != benchmark) {
        return Err(BenchError::Compare(format!("mixed benchmarks {benchmark} and {}", other.benchmark)));
    }
    let slowest = summaries
        .iter()
        .max_by(|a, b| a.wall_time_s.total_cmp(&b.wall_time_s))
        .expect("non-empty");
    let rows = summaries
        .iter()
        .map(|s| ComparisonRow {
            solver: s.solver,
            max_iterations_per_increment: s.max_iterations_per_increment,
            total_iterations: s.total_iterations,
            ic_iterations: s.ic_iterations,
            wall_time_s: s.wall_time_s,
            factorizations: s.factorizations,
            speedup: slowest.wall_time_s / s.wall_time_s,
            iteration_ratio: slowest.total_iterations as f64 / s.total_iterations as f64,
            completed: s.completed(),
        })
        .collect();
    Ok(Comparison { benchmark, rows })
}

impl Comparison {
    pub fn row(&self, solver: SolverKind) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.solver == solver)
    }

    pub fn to_csv(&self) -> Result<String, BenchError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| BenchError::Compare(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "### {}\n", self.benchmark);
        s.push_str("| Method | Max it. / inc. | Total it. | IC it. | Total time [s] | Factorizations | Speedup |\n");
        s.push_str("|---|---:|---:|---:|---:|---:|---:|\n");
        for r in &self.rows {
            let flag = if r.completed { "" } else { " (failed)" };
            let _ = writeln!(
                s,
                "| {}{flag} | {} | {} | {} | {:.2} | {} | {:.2} |",
                r.solver, r.max_iterations_per_increment, r.total_iterations, r.ic_iterations, r.wall_time_s,
                r.factorizations, r.speedup
            );
        }
        s
    }
}
