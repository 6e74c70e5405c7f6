//! JSON run configuration shared by the command-line subcommands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{build_interval_mesh, build_rectangle_mesh, Domain, Mesh};
use crate::nonlinearity::{Coefficient, ProblemDocument, ProblemSpec};
use crate::solver::SolverConfig;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Subcommand {
    Solve,
    Compare,
    Sweep,
    Verify,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Solve => "solve",
            Subcommand::Compare => "compare",
            Subcommand::Sweep => "sweep",
            Subcommand::Verify => "verify",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub domain: Domain,
    /// Cells per axis: one entry for intervals, two for rectangles.
    pub cells: Vec<usize>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            domain: Domain::Interval { a: 0.0, b: 1.0 },
            cells: vec![256],
        }
    }
}

impl MeshConfig {
    pub fn build(&self) -> Result<Arc<Mesh>> {
        let mesh = match (self.domain, self.cells.as_slice()) {
            (Domain::Interval { a, b }, [n]) => build_interval_mesh(a, b, *n)?,
            (Domain::Rectangle { low, high }, [n1, n2]) => build_rectangle_mesh(low, high, *n1, *n2)?,
            (d, c) => {
                return Err(Error::Config(format!(
                    "mesh.cells needs {} entries for a {}D domain, got {}",
                    d.dimension(),
                    d.dimension(),
                    c.len()
                )))
            }
        };
        Ok(Arc::new(mesh))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub gammas: Vec<f64>,
    /// Integrability exponents of `f`; `null` stands for `m = inf`.
    pub ms: Vec<Option<f64>>,
    /// Run an energy refinement probe per cell; otherwise only predicates.
    pub observe: bool,
    pub refinements: usize,
    /// Worker threads for the cells; `0` uses all cores.
    pub parallelism: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            gammas: vec![1.2, 1.8, 2.5],
            ms: vec![Some(2.0)],
            observe: true,
            refinements: 3,
            parallelism: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Forces every check onto meshes with this many cells per axis;
    /// values below 16 skip the convergence-rate checks.
    pub cells: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<Subcommand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemDocument>,
    /// Second problem of a comparison run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem2: Option<ProblemDocument>,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            subcommand: None,
            problem: None,
            problem2: None,
            mesh: MeshConfig::default(),
            solver: SolverConfig::default(),
            sweep: SweepConfig::default(),
            verify: VerifyConfig::default(),
            output: OutputConfig::default(),
            seed: DEFAULT_SEED,
        }
    }
}

impl RunConfig {
    /// Parses a JSON document; errors name the path of the offending key.
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("at `{path}`: {}", e.inner()))
        })
    }

    /// Reads a config file; relative CSV coefficient paths are resolved
    /// against the file's directory.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::from_json(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for doc in [self.problem.as_mut(), self.problem2.as_mut()].into_iter().flatten() {
            for c in [&mut doc.f, &mut doc.g] {
                if let Coefficient::Csv { path, .. } = c {
                    if path.is_relative() {
                        *path = base.join(&*path);
                    }
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.output.formats.is_empty() {
            return Err(Error::Config("output.formats must not be empty".into()));
        }
        for doc in [&self.problem, &self.problem2].into_iter().flatten() {
            for c in [&doc.f, &doc.g] {
                if let Coefficient::Csv { path, .. } = c {
                    if !path.exists() {
                        return Err(Error::Config(format!(
                            "coefficient file {} does not exist",
                            path.display()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn wants(&self, format: OutputFormat) -> bool {
        self.output.formats.contains(&format)
    }

    pub fn problem_spec(&self, mesh: &Arc<Mesh>) -> Result<ProblemSpec> {
        let doc = self
            .problem
            .clone()
            .ok_or_else(|| Error::Config("missing key `problem`".into()))?;
        ProblemSpec::new(doc, mesh)
    }

    pub fn second_spec(&self, mesh: &Arc<Mesh>) -> Result<ProblemSpec> {
        let doc = self
            .problem2
            .clone()
            .ok_or_else(|| Error::Config("missing key `problem2`".into()))?;
        ProblemSpec::new(doc, mesh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig {
            subcommand: Some(Subcommand::Compare),
            problem: Some(ProblemDocument::power(
                2.0,
                1.0,
                0.5,
                Coefficient::expr("2*x*(1-x)").unwrap(),
                Coefficient::constant(1.0),
            )),
            ..RunConfig::default()
        };
        cfg.sweep.ms = vec![None, Some(3.0)];
        cfg.solver.n_schedule = Some(vec![1, 3, 9]);
        let text = cfg.to_json().unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn errors_name_the_key() {
        let err = RunConfig::from_json(r#"{"solver": {"omega": "big"}}"#).unwrap_err();
        assert!(err.to_string().contains("solver.omega"), "{err}");
        let err = RunConfig::from_json(r#"{"mesh": {"domain": {"kind": "interval", "a": 0, "b": 1}, "cells": [4], "extra": 1}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
        let err = RunConfig::from_json(r#"{"problem": {"gamma": 1, "f": {"kind": "constant", "value": 1}}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("p"), "{err}");
    }

    #[test]
    fn mesh_cells_must_match_dimension() {
        let m = MeshConfig {
            domain: Domain::Rectangle {
                low: [0.0, 0.0],
                high: [1.0, 1.0],
            },
            cells: vec![4],
        };
        assert!(m.build().is_err());
    }

    #[test]
    fn relative_csv_paths_resolve() {
        let mut cfg = RunConfig::from_json(
            r#"{"problem": {"p": 2, "gamma": 1, "f": {"kind": "csv", "path": "f.csv"}}}"#,
        )
        .unwrap();
        cfg.resolve_paths(Path::new("/data"));
        match &cfg.problem.unwrap().f {
            Coefficient::Csv { path, .. } => assert_eq!(path, Path::new("/data/f.csv")),
            other => panic!("{other:?}"),
        }
    }
}
