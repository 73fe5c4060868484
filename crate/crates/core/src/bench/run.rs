//! Running a configured benchmark and writing its artifacts.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::{Assembler, State};
use crate::mesh::{extract_dirichlet_dofs, Benchmark, Mesh};
use crate::solvers::{run_load_stepping, Problem, RunFailure, SolverKind, StepReport};

use super::{write_vtk, BenchError, BenchmarkConfig, Scale};

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub benchmark: Benchmark,
    pub solver: SolverKind,
    pub scale: Scale,
    pub l: f64,
    pub fine_h: f64,
    pub n_nodes: usize,
    pub n_elements: usize,
    pub increments: usize,
    pub completed_increments: usize,
    pub total_iterations: usize,
    pub max_iterations_per_increment: usize,
    pub ic_iterations: usize,
    pub qm_corrections: usize,
    pub factorizations: usize,
    pub backtrack_failures: usize,
    /// Sum of the per-increment solve times.
    pub wall_time_s: f64,
    pub peak_reaction: f64,
    pub peak_displacement: f64,
    /// Smallest nodal damage change over all increments.
    pub min_damage_increment: f64,
    /// Increments whose correction loop stopped at its cap.
    pub qm_cap_reached_increments: Vec<usize>,
    pub failure: Option<RunFailure>,
}

impl RunSummary {
    fn new(cfg: &BenchmarkConfig, kind: SolverKind, mesh: &Mesh, reports: &[StepReport]) -> Self {
        let peak = reports
            .iter()
            .fold(None::<&StepReport>, |best, r| match best {
                Some(b) if b.reaction >= r.reaction => Some(b),
                _ => Some(r),
            });
        RunSummary {
            benchmark: cfg.geometry.benchmark,
            solver: kind,
            scale: cfg.scale,
            l: cfg.material.l,
            fine_h: cfg.geometry.refinement_ratio * cfg.material.l,
            n_nodes: mesh.n_nodes(),
            n_elements: mesh.n_elements(),
            increments: cfg.loading.increments,
            completed_increments: reports.len(),
            total_iterations: reports.iter().map(|r| r.iterations).sum(),
            max_iterations_per_increment: reports.iter().map(|r| r.iterations).max().unwrap_or(0),
            ic_iterations: reports.iter().map(|r| r.ic_iterations).sum(),
            qm_corrections: reports.iter().map(|r| r.qm_corrections).sum(),
            factorizations: reports.iter().map(|r| r.factorizations).sum(),
            backtrack_failures: reports.iter().map(|r| r.backtrack_failures).sum(),
            wall_time_s: reports.iter().map(|r| r.wall_time_s).sum(),
            peak_reaction: peak.map_or(0.0, |r| r.reaction),
            peak_displacement: peak.map_or(0.0, |r| r.applied_displacement),
            min_damage_increment: reports.iter().map(|r| r.min_damage_increment).reduce(f64::min).unwrap_or(0.0),
            qm_cap_reached_increments: reports.iter().filter(|r| r.qm_cap_reached).map(|r| r.increment).collect(),
            failure: None,
        }
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Everything a finished (or stopped) run produced.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub summary: RunSummary,
    pub reports: Vec<StepReport>,
    pub state: State,
    pub mesh: Mesh,
    /// Directory holding the artifacts.
    pub out_dir: PathBuf,
}

impl BenchmarkRun {
    /// `(applied displacement, reaction)` including the unloaded origin.
    pub fn force_displacement(&self) -> Vec<(f64, f64)> {
        std::iter::once((0.0, 0.0))
            .chain(self.reports.iter().map(|r| (r.applied_displacement, r.reaction)))
            .collect()
    }
}

#[derive(Serialize)]
struct FdRow {
    step: usize,
    u_applied_mm: f64,
    #[serde(rename = "reaction_N")]
    reaction_n: f64,
}

#[derive(Serialize)]
struct ReportRow {
    step: usize,
    iterations: usize,
    ic_iterations: usize,
    qm_corrections: usize,
    residual_inf: f64,
    wall_time_s: f64,
    factorizations: usize,
    backtrack_failures: usize,
    min_damage_increment: f64,
    max_damage: f64,
    qm_cap_reached: bool,
}

impl From<&StepReport> for ReportRow {
    fn from(r: &StepReport) -> Self {
        ReportRow {
            step: r.increment,
            iterations: r.iterations,
            ic_iterations: r.ic_iterations,
            qm_corrections: r.qm_corrections,
            residual_inf: r.residual_inf,
            wall_time_s: r.wall_time_s,
            factorizations: r.factorizations,
            backtrack_failures: r.backtrack_failures,
            min_damage_increment: r.min_damage_increment,
            max_damage: r.max_damage,
            qm_cap_reached: r.qm_cap_reached,
        }
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, BenchError> {
    let f = File::create(path).map_err(|e| BenchError::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

/// Runs `kind` on the configured benchmark and writes, into
/// `output.directory/<solver>/`, `fd.csv`, `report.csv`, `summary.json` and
/// `field_NNNN.vtk` every `dump_stride` increments. Rows are flushed as each
/// increment finishes, so a failed run keeps its partial artifacts; the
/// failure is recorded in the summary rather than returned as an error.
pub fn run_benchmark(cfg: &BenchmarkConfig, kind: SolverKind) -> Result<BenchmarkRun, BenchError> {
    cfg.validate()?;
    let mesh = cfg.build_mesh()?;
    let material = cfg.material.params()?;
    let asm = Assembler::new(&mesh, material)?;
    let dirichlet = extract_dirichlet_dofs(&mesh, &cfg.boundary_conditions())?;
    let problem = Problem {
        assembler: &asm,
        dirichlet: &dirichlet,
        reaction_nodes: mesh.set(cfg.reaction_set())?.to_vec(),
        reaction_component: cfg.loading.component,
        total_displacement: cfg.loading.total,
        increments: cfg.loading.increments,
        continue_on_failure: false,
    };

    let out_dir = cfg.output.directory.join(kind.as_str());
    fs::create_dir_all(&out_dir).map_err(|e| BenchError::io(&out_dir, e))?;
    log::info!(
        "{} ({}, {}): {} nodes, {} elements, output in {}",
        cfg.geometry.benchmark,
        cfg.scale,
        kind,
        mesh.n_nodes(),
        mesh.n_elements(),
        out_dir.display()
    );

    let mut fd = csv_writer(&out_dir.join("fd.csv"))?;
    let mut report = csv_writer(&out_dir.join("report.csv"))?;
    fd.serialize(FdRow { step: 0, u_applied_mm: 0.0, reaction_n: 0.0 })?;
    fd.flush().map_err(|e| BenchError::io(&out_dir, e))?;
    let stride = cfg.output.dump_stride;
    let mut write_error: Option<BenchError> = None;

    let outcome = run_load_stepping(&problem, kind, &cfg.solver, |rep, st| {
        if write_error.is_some() {
            return;
        }
        let mut step = || -> Result<(), BenchError> {
            fd.serialize(FdRow { step: rep.increment, u_applied_mm: rep.applied_displacement, reaction_n: rep.reaction })?;
            fd.flush().map_err(|e| BenchError::io(&out_dir, e))?;
            report.serialize(ReportRow::from(rep))?;
            report.flush().map_err(|e| BenchError::io(&out_dir, e))?;
            if stride > 0 && rep.increment % stride == 0 {
                let p = out_dir.join(format!("field_{:04}.vtk", rep.increment));
                write_vtk(&mesh, st, &p)?;
            }
            Ok(())
        };
        if let Err(e) = step() {
            write_error = Some(e);
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }

    let mut summary = RunSummary::new(cfg, kind, &mesh, &outcome.reports);
    summary.failure = outcome.failures.first().cloned();
    let p = out_dir.join("summary.json");
    fs::write(&p, serde_json::to_string_pretty(&summary)? + "\n").map_err(|e| BenchError::io(&p, e))?;
    Ok(BenchmarkRun { summary, reports: outcome.reports, state: outcome.state, mesh, out_dir })
}

/// Fine element sizes of the refinement study, as fractions of `l`.
pub const MESH_STUDY_RATIOS: [f64; 3] = [0.1, 0.2, 0.4];

#[derive(Debug, Clone, Serialize)]
pub struct MeshStudyRow {
    pub refinement_ratio: f64,
    pub h: f64,
    pub n_nodes: usize,
    pub n_elements: usize,
    pub peak_reaction: f64,
    /// Relative peak deviation from the finest mesh.
    pub peak_deviation: f64,
    pub total_iterations: usize,
    pub wall_time_s: f64,
    pub completed: bool,
}

#[derive(Debug, Clone)]
pub struct MeshStudy {
    pub rows: Vec<MeshStudyRow>,
    pub runs: Vec<BenchmarkRun>,
}

/// Runs the benchmark with fine sizes `l/10`, `l/5` and `2l/5` in the
/// fracture band, each into `output.directory/mesh_study/h_<ratio>/`, and
/// writes `output.directory/mesh_study/summary.csv`.
pub fn mesh_study(cfg: &BenchmarkConfig, kind: SolverKind) -> Result<MeshStudy, BenchError> {
    if cfg.geometry.mesh_file.is_some() {
        return Err(BenchError::Invalid("the mesh study needs a generated mesh, not geometry.mesh_file".into()));
    }
    let root = cfg.output.directory.join("mesh_study");
    let mut runs = Vec::new();
    for ratio in MESH_STUDY_RATIOS {
        let mut c = cfg.clone();
        c.geometry.refinement_ratio = ratio;
        c.output.directory = root.join(format!("h_{ratio}"));
        runs.push(run_benchmark(&c, kind)?);
    }
    let finest = runs[0].summary.peak_reaction;
    let rows: Vec<MeshStudyRow> = runs
        .iter()
        .zip(MESH_STUDY_RATIOS)
        .map(|(r, ratio)| MeshStudyRow {
            refinement_ratio: ratio,
            h: r.summary.fine_h,
            n_nodes: r.summary.n_nodes,
            n_elements: r.summary.n_elements,
            peak_reaction: r.summary.peak_reaction,
            peak_deviation: (r.summary.peak_reaction - finest).abs() / finest.abs(),
            total_iterations: r.summary.total_iterations,
            wall_time_s: r.summary.wall_time_s,
            completed: r.summary.completed(),
        })
        .collect();
    let mut w = csv_writer(&root.join("summary.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| BenchError::io(&root, e))?;
    Ok(MeshStudy { rows, runs })
}
