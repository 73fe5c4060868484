//! Benchmark configuration files, the run driver that writes CSV / VTK / JSON
//! artifacts, run comparison and the mesh-refinement study.

mod compare;
mod run;
mod vtk;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constitutive::{MaterialError, MaterialParams};
use crate::mesh::{
    build_benchmark_mesh, parse_abaqus_inp, BcSpec, Benchmark, BoundaryValue, Component, GeometrySpec, Mesh,
    MeshError,
};
use crate::solvers::{SolverConfig, SolverError};

pub use compare::{compare_runs, Comparison, ComparisonRow};
pub use run::{mesh_study, run_benchmark, BenchmarkRun, MeshStudy, MeshStudyRow, RunSummary};
pub use vtk::write_vtk;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: at `{key}`: {message}")]
    Schema { path: PathBuf, key: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Assembly(#[from] crate::assembly::AssemblyError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot compare runs: {0}")]
    Compare(String),
}

impl BenchError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io { path: path.to_path_buf(), source }
    }
}

/// Which parameter set of a configuration file is used.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Values as written in the main sections.
    #[default]
    Paper,
    /// Main sections with the `[desk]` overrides applied.
    Desk,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Paper => "paper",
            Scale::Desk => "desk",
        })
    }
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            other => Err(format!("unknown scale '{other}' (expected paper or desk)")),
        }
    }
}

fn default_ratio() -> f64 {
    0.2
}

fn default_tol_ir() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub benchmark: Benchmark,
    /// Fine element size as a fraction of `l`.
    #[serde(default = "default_ratio")]
    pub refinement_ratio: f64,
    #[serde(default)]
    pub coarse_h: Option<f64>,
    #[serde(default)]
    pub band_x: Option<[f64; 2]>,
    #[serde(default)]
    pub band_y: Option<[f64; 2]>,
    /// Abaqus input deck used instead of the generated mesh, relative to the
    /// configuration file.
    #[serde(default)]
    pub mesh_file: Option<PathBuf>,
    /// Out-of-plane thickness; benchmark default if absent.
    #[serde(default)]
    pub thickness: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    /// MPa.
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// N/mm.
    pub gc: f64,
    /// mm.
    pub l: f64,
    #[serde(default = "default_tol_ir")]
    pub tol_ir: f64,
}

impl MaterialSection {
    pub fn params(&self) -> Result<MaterialParams, MaterialError> {
        MaterialParams::new(self.youngs_modulus, self.poisson_ratio, self.gc, self.l, self.tol_ir)
    }
}

/// Homogeneous condition on the listed components of a node set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportSpec {
    pub set: String,
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadingSection {
    /// Node set driven by the ramp.
    pub set: String,
    pub component: Component,
    /// Total prescribed displacement (mm), reached at the last increment.
    pub total: f64,
    pub increments: usize,
    /// Set on which the reaction is summed; the loaded set if absent.
    #[serde(default)]
    pub reaction_set: Option<String>,
    #[serde(default)]
    pub supports: Vec<SupportSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Write a VTK snapshot every `dump_stride` increments; 0 disables them.
    pub dump_stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: PathBuf::from("results"), dump_stride: 10 }
    }
}

/// Parameters replaced when running at desk scale.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeskOverrides {
    pub l: Option<f64>,
    pub refinement_ratio: Option<f64>,
    pub coarse_h: Option<f64>,
    pub band_x: Option<[f64; 2]>,
    pub band_y: Option<[f64; 2]>,
    pub increments: Option<usize>,
    pub tol_qm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub geometry: GeometrySection,
    pub material: MaterialSection,
    pub loading: LoadingSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub desk: Option<DeskOverrides>,
    /// Scale the values currently describe.
    #[serde(skip)]
    pub scale: Scale,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Node sets created by the benchmark mesh generator.
pub fn generated_sets(benchmark: Benchmark) -> &'static [&'static str] {
    match benchmark {
        Benchmark::SenpTension | Benchmark::SenpShear => &["bottom_edge", "top_edge", "left_edge", "right_edge"],
        Benchmark::ThreePointBending => &["support_left", "support_right", "load_node", "bottom_edge", "top_edge"],
        Benchmark::LPanel => &["bottom_edge", "load_node"],
    }
}

/// Reads and validates a TOML benchmark configuration. Unknown keys are
/// rejected with the path of the offending key.
pub fn load_config(path: impl AsRef<Path>) -> Result<BenchmarkConfig, BenchError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let mut cfg = parse_config(&text).map_err(|(key, message)| BenchError::Schema {
        path: path.to_path_buf(),
        key,
        message,
    })?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.validate()?;
    if cfg.desk.is_some() {
        cfg.at_scale(Scale::Desk).validate()?;
    }
    Ok(cfg)
}

/// Parses configuration text without validation; errors carry the key path.
pub fn parse_config(text: &str) -> Result<BenchmarkConfig, (String, String)> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let message = e.into_inner().message().trim().to_string();
        (key, message)
    })
}

impl BenchmarkConfig {
    /// Copy with the `[desk]` overrides applied for `Scale::Desk`. A config
    /// without overrides is returned unchanged.
    pub fn at_scale(&self, scale: Scale) -> BenchmarkConfig {
        let mut c = self.clone();
        if scale == Scale::Desk {
            if let Some(d) = &self.desk {
                if let Some(l) = d.l {
                    c.material.l = l;
                }
                if let Some(r) = d.refinement_ratio {
                    c.geometry.refinement_ratio = r;
                }
                if d.coarse_h.is_some() {
                    c.geometry.coarse_h = d.coarse_h;
                }
                if d.band_x.is_some() {
                    c.geometry.band_x = d.band_x;
                }
                if d.band_y.is_some() {
                    c.geometry.band_y = d.band_y;
                }
                if let Some(n) = d.increments {
                    c.loading.increments = n;
                }
                if let Some(t) = d.tol_qm {
                    c.solver.tol_qm = t;
                }
            }
        }
        c.scale = scale;
        c
    }

    pub fn geometry_spec(&self) -> GeometrySpec {
        let g = &self.geometry;
        GeometrySpec {
            benchmark: g.benchmark,
            l: self.material.l,
            refinement_ratio: g.refinement_ratio,
            coarse_h: g.coarse_h,
            band_x: g.band_x,
            band_y: g.band_y,
        }
    }

    /// Every boundary condition, supports first and the ramp last.
    pub fn boundary_conditions(&self) -> Vec<BcSpec> {
        let mut bcs = Vec::new();
        for s in &self.loading.supports {
            for &c in &s.components {
                bcs.push(BcSpec::new(s.set.clone(), c, BoundaryValue::zero()));
            }
        }
        bcs.push(BcSpec::new(
            self.loading.set.clone(),
            self.loading.component,
            BoundaryValue::Ramp { total: self.loading.total },
        ));
        bcs
    }

    pub fn reaction_set(&self) -> &str {
        self.loading.reaction_set.as_deref().unwrap_or(&self.loading.set)
    }

    fn referenced_sets(&self) -> Vec<&str> {
        let mut sets: Vec<&str> = self.loading.supports.iter().map(|s| s.set.as_str()).collect();
        sets.push(&self.loading.set);
        sets.push(self.reaction_set());
        sets
    }

    fn mesh_path(&self) -> Option<PathBuf> {
        self.geometry.mesh_file.as_ref().map(|p| self.base_dir.join(p))
    }

    /// Checks parameter ranges. Set names are checked against the generator
    /// for generated meshes; meshes read from file are checked when built.
    pub fn validate(&self) -> Result<(), BenchError> {
        self.material.params()?;
        self.solver.validate()?;
        if self.loading.increments == 0 {
            return Err(BenchError::Invalid("loading.increments must be at least 1".into()));
        }
        if !(self.loading.total != 0.0 && self.loading.total.is_finite()) {
            return Err(BenchError::Invalid(format!(
                "loading.total must be finite and nonzero, got {}",
                self.loading.total
            )));
        }
        if let Some(t) = self.geometry.thickness {
            if !(t > 0.0 && t.is_finite()) {
                return Err(BenchError::Invalid(format!("geometry.thickness must be positive, got {t}")));
            }
        }
        if self.geometry.mesh_file.is_none() {
            self.geometry_spec().validate()?;
            let known = generated_sets(self.geometry.benchmark);
            for s in self.referenced_sets() {
                if !known.contains(&s) {
                    return Err(BenchError::Mesh(MeshError::UnknownSet(s.to_string())));
                }
            }
        }
        Ok(())
    }

    /// Generates or reads the mesh and checks every referenced set exists.
    pub fn build_mesh(&self) -> Result<Mesh, BenchError> {
        let mut mesh = match self.mesh_path() {
            Some(p) => {
                let text = fs::read_to_string(&p).map_err(|e| BenchError::io(&p, e))?;
                let inp = parse_abaqus_inp(&text)?;
                for w in &inp.warnings {
                    log::warn!("{}: {w}", p.display());
                }
                let mut m = inp.mesh;
                m.thickness = self.geometry.benchmark.thickness();
                m
            }
            None => build_benchmark_mesh(&self.geometry_spec())?,
        };
        if let Some(t) = self.geometry.thickness {
            mesh.thickness = t;
        }
        for s in self.referenced_sets() {
            mesh.set(s)?;
        }
        Ok(mesh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[geometry]
benchmark = "senp_tension"

[material]
youngs_modulus = 210000.0
poisson_ratio = 0.3
gc = 2.7
l = 0.1

[loading]
set = "top_edge"
component = "y"
total = 0.01
increments = 5
supports = [{ set = "bottom_edge", components = ["x", "y"] }]

[desk]
l = 0.2
increments = 2
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.output.dump_stride, 10);
        assert_eq!(c.material.tol_ir, 0.01);
        assert_eq!(c.boundary_conditions().len(), 3);
        assert_eq!(c.reaction_set(), "top_edge");
    }

    #[test]
    fn desk_overrides_apply() {
        let c = parse_config(MINIMAL).unwrap();
        let d = c.at_scale(Scale::Desk);
        assert_eq!(d.material.l, 0.2);
        assert_eq!(d.loading.increments, 2);
        assert_eq!(d.scale, Scale::Desk);
        let p = c.at_scale(Scale::Paper);
        assert_eq!((p.material, p.loading.increments), (c.material, c.loading.increments));
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let text = MINIMAL.replace("gc = 2.7", "gc = 2.7\nyoung = 1.0");
        let (key, msg) = parse_config(&text).unwrap_err();
        assert_eq!(key, "material.young");
        assert!(msg.contains("young"), "{msg}");
        let text = format!("{MINIMAL}\n[solver.ic]\nkappa = 2.0\n");
        let (key, _) = parse_config(&text).unwrap_err();
        assert_eq!(key, "solver.ic.kappa");
    }

    #[test]
    fn invariants_are_enforced() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.solver.rho = 1.5;
        assert!(matches!(c.validate(), Err(BenchError::Solver(_))));
        let mut c = parse_config(MINIMAL).unwrap();
        c.loading.increments = 0;
        assert!(c.validate().is_err());
        let mut c = parse_config(MINIMAL).unwrap();
        c.loading.total = 0.0;
        assert!(c.validate().is_err());
        let mut c = parse_config(MINIMAL).unwrap();
        c.loading.set = "load_node".into();
        assert!(matches!(c.validate(), Err(BenchError::Mesh(MeshError::UnknownSet(_)))));
    }

    #[test]
    fn scale_parsing() {
        assert_eq!("Desk".parse::<Scale>().unwrap(), Scale::Desk);
        assert!("huge".parse::<Scale>().is_err());
    }
}
