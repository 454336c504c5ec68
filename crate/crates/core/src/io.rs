//! Versioned CSV and JSON formats for every emitted artifact, and parsers
//! for the JSON configuration files.
//!
//! Every CSV row and every JSON document carries `schema_version`; readers
//! reject anything else. Each CSV has a JSON twin holding the same rows.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{
    path, Achievement, AsymptoticPath, EndpointLimits, HeterogeneousFamily, LambdaGrid, PathFailure,
};
use crate::boundaries::{l1_value, l2_value, BoundaryCurve, DtTransition};
use crate::error::{Error, Result};
use crate::region::{BoundarySegment, DiagramCase, RegionSpec, TradeoffPoint};
use crate::scalar_math::{Atom, DiscretePrior};
use crate::simulate::{BetaLevel, ContainmentReport, EmpiricalPath, SimulationConfig, SimulationPlan};
use crate::state_evolution::{NoiseLevel, ProblemShape};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest grid accepted from a configuration file.
const MAX_GRID_POINTS: usize = 100_000;

pub trait Versioned {
    fn schema_version(&self) -> u32;
}

macro_rules! versioned {
    ($($t:ty),* $(,)?) => {
        $(impl Versioned for $t {
            fn schema_version(&self) -> u32 {
                self.schema_version
            }
        })*
    };
}

fn check_version(found: u32) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "schema_version {found} is not supported (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub schema_version: u32,
    pub u: f64,
    pub q: f64,
    pub l1: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub schema_version: u32,
    pub u: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRow {
    pub schema_version: u32,
    pub lambda: f64,
    pub alpha: f64,
    pub tau: f64,
    pub tpp: f64,
    pub fdp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub schema_version: u32,
    pub lambda: f64,
    pub mean_tpp: f64,
    pub mean_fdp: f64,
    pub std_tpp: f64,
    pub std_fdp: f64,
    pub n_trials: usize,
}

versioned!(BoundaryRow, RegionRow, AsymptoticRow, SimulationRow);

pub fn write_csv<T: Serialize>(out: impl Write, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))
}

pub fn read_csv<T: DeserializeOwned + Versioned>(input: impl Read) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        let row: T = row?;
        check_version(row.schema_version())?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_boundary_csv(input: &[u8]) -> Result<Vec<BoundaryRow>> {
    read_csv(input)
}

pub fn read_region_csv(input: &[u8]) -> Result<Vec<RegionRow>> {
    read_csv(input)
}

pub fn read_asymptotic_csv(input: &[u8]) -> Result<Vec<AsymptoticRow>> {
    read_csv(input)
}

pub fn read_simulation_csv(input: &[u8]) -> Result<Vec<SimulationRow>> {
    read_csv(input)
}

pub fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}

pub fn parse_document<T: DeserializeOwned + Versioned>(text: &str) -> Result<T> {
    let doc: T = serde_json::from_str(text)?;
    check_version(doc.schema_version())?;
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDocument {
    pub schema_version: u32,
    pub shape: ProblemShape,
    pub ceiling: f64,
    pub rows: Vec<BoundaryRow>,
}

impl BoundaryDocument {
    pub fn from_curve(curve: &BoundaryCurve) -> Self {
        let shape = curve.shape;
        let rows: Vec<BoundaryRow> = curve
            .samples
            .iter()
            .map(|&(u, q)| BoundaryRow {
                schema_version: SCHEMA_VERSION,
                u,
                q,
                l1: l1_value(shape),
                l2: l2_value(u, shape),
            })
            .collect();
        BoundaryDocument {
            schema_version: SCHEMA_VERSION,
            shape,
            ceiling: rows.last().map_or(0.0, |r| r.u),
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDocument {
    pub schema_version: u32,
    pub shape: ProblemShape,
    pub case_label: DiagramCase,
    pub active: Vec<BoundarySegment>,
    pub ceiling: f64,
    pub transition: Option<DtTransition>,
    pub area: f64,
    /// Closed boundary, counterclockwise.
    pub vertices: Vec<RegionRow>,
}

impl RegionDocument {
    pub fn from_region(region: &RegionSpec, active: Vec<BoundarySegment>) -> Self {
        RegionDocument {
            schema_version: SCHEMA_VERSION,
            shape: region.shape,
            case_label: region.case_label,
            active,
            ceiling: region.u_star,
            transition: region.dt,
            area: region.signed_area(),
            vertices: region
                .vertices()
                .iter()
                .map(|v| RegionRow {
                    schema_version: SCHEMA_VERSION,
                    u: v.tpp,
                    q: v.fdp,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionDocument {
    pub schema_version: u32,
    pub delta: f64,
    /// Set when `δ ≥ 1`: every sparsity lies below the transition.
    pub always_below_transition: bool,
    pub transition: Option<DtTransition>,
}

/// How the nonzero coefficients are distributed in an asymptotic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSpec {
    Atoms(Vec<Atom>),
    Levels(Vec<BetaLevel>),
    Family(HeterogeneousFamily),
}

impl PriorSpec {
    pub fn prior_star(&self) -> Result<DiscretePrior> {
        match self {
            PriorSpec::Atoms(atoms) => DiscretePrior::new(atoms.clone(), 0.0).and_then(|p| {
                if p.is_conditional() {
                    Ok(p)
                } else {
                    Err(Error::Config("prior needs at least one atom".into()))
                }
            }),
            PriorSpec::Levels(levels) => {
                let l: Vec<(f64, usize)> = levels.iter().map(|l| (l.magnitude, l.count)).collect();
                DiscretePrior::from_levels(&l)
            }
            PriorSpec::Family(f) => Ok(f.prior()),
        }
    }
}

/// A noise level in a configuration file: a number, or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Value(f64),
    Named(String),
}

impl NoiseSpec {
    pub fn level(&self) -> Result<NoiseLevel> {
        match self {
            NoiseSpec::Value(v) => NoiseLevel::new(*v),
            NoiseSpec::Named(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => {
                Ok(NoiseLevel::Infinite)
            }
            NoiseSpec::Named(s) => Err(Error::Config(format!("unknown noise level {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConfig {
    pub delta: f64,
    pub epsilon: f64,
    pub prior: PriorSpec,
    pub sigma: NoiseSpec,
    pub grid: LambdaGrid,
}

impl AsymptoticConfig {
    pub fn shape(&self) -> Result<ProblemShape> {
        ProblemShape::new(self.delta, self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        self.shape()?;
        self.prior.prior_star()?;
        self.sigma.level()?;
        if self.grid.n > MAX_GRID_POINTS {
            return Err(Error::Config(format!(
                "grid has {} points, at most {MAX_GRID_POINTS} allowed",
                self.grid.n
            )));
        }
        self.grid.values()?;
        Ok(())
    }

    pub fn run(&self) -> Result<AsymptoticPath> {
        self.validate()?;
        path(self.shape()?, &self.prior.prior_star()?, self.sigma.level()?, &self.grid)
    }
}

pub fn parse_asymptotic_config(text: &str) -> Result<AsymptoticConfig> {
    let config: AsymptoticConfig = serde_json::from_str(text)?;
    config.validate()?;
    Ok(config)
}

pub fn parse_simulation_plan(text: &str) -> Result<SimulationPlan> {
    let plan: SimulationPlan = serde_json::from_str(text)?;
    for c in plan.configs() {
        c.validate()?;
        c.shape()?;
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticDocument {
    pub schema_version: u32,
    pub config: AsymptoticConfig,
    pub rows: Vec<AsymptoticRow>,
    pub failures: Vec<PathFailure>,
    pub endpoints: Option<EndpointLimits>,
}

impl AsymptoticDocument {
    pub fn new(config: &AsymptoticConfig, path: &AsymptoticPath) -> Self {
        AsymptoticDocument {
            schema_version: SCHEMA_VERSION,
            config: config.clone(),
            rows: path
                .points
                .iter()
                .map(|p| AsymptoticRow {
                    schema_version: SCHEMA_VERSION,
                    lambda: p.lambda,
                    alpha: p.se.alpha,
                    tau: p.se.tau,
                    tpp: p.point.tpp,
                    fdp: p.point.fdp,
                })
                .collect(),
            failures: path.failures.clone(),
            endpoints: path.endpoints,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationDocument {
    pub schema_version: u32,
    pub config: SimulationConfig,
    pub failed_trials: usize,
    pub rows: Vec<SimulationRow>,
}

impl SimulationDocument {
    pub fn new(path: &EmpiricalPath) -> Self {
        SimulationDocument {
            schema_version: SCHEMA_VERSION,
            config: path.config.clone(),
            failed_trials: path.failed_trials,
            rows: path
                .points
                .iter()
                .map(|p| SimulationRow {
                    schema_version: SCHEMA_VERSION,
                    lambda: p.lambda,
                    mean_tpp: p.mean_tpp,
                    mean_fdp: p.mean_fdp,
                    std_tpp: p.std_tpp,
                    std_fdp: p.std_fdp,
                    n_trials: p.n_trials,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentDocument {
    pub schema_version: u32,
    pub levels: Vec<ContainmentLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentLevel {
    pub sigma: f64,
    pub failed_trials: usize,
    pub report: ContainmentReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AchieveDocument {
    pub schema_version: u32,
    pub shape: ProblemShape,
    pub target: TradeoffPoint,
    pub tol: f64,
    pub achievement: Achievement,
}

versioned!(
    AchieveDocument,
    BoundaryDocument,
    RegionDocument,
    TransitionDocument,
    AsymptoticDocument,
    SimulationDocument,
    ContainmentDocument,
);
