//! Experiment configuration: a flat `key = value` file with the sections
//! `[problem]`, `[solver]` and `[output]`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use mmotflow_core::costs::build_cost_matrix;
use mmotflow_core::euler_chain::{EulerProblem, FinalMap};
use mmotflow_core::ode::step_count;
use mmotflow_core::{CostKind, DiscreteMarginal, Grid, ProblemParams, Scheme};

use crate::CliError;

const PROBLEM_KEYS: &[&str] = &[
    "grid.n",
    "grid.domain",
    "cost.kind",
    "cost.a",
    "cost.cap",
    "eta",
    "m",
    "anchor_index",
    "euler.F",
    "euler.beta",
    "euler.T",
];
const SOLVER_KEYS: &[&str] = &["experiment", "scheme", "schemes", "h", "h_list", "tol", "sinkhorn_tol", "snapshots"];
const OUTPUT_KEYS: &[&str] = &["dir", "heatmap"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    ConvergenceStudy,
    Compare,
    Trajectory,
    Euler,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::ConvergenceStudy => "convergence_study",
            Experiment::Compare => "compare",
            Experiment::Trajectory => "trajectory",
            Experiment::Euler => "euler",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "convergence_study" => Ok(Experiment::ConvergenceStudy),
            "compare" => Ok(Experiment::Compare),
            "trajectory" => Ok(Experiment::Trajectory),
            "euler" => Ok(Experiment::Euler),
            _ => Err(format!(
                "unknown experiment '{s}' (expected convergence_study, compare, trajectory or euler)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostName {
    Log,
    NegHarmonic,
    Coulomb,
    Squared,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub experiment: Experiment,
    pub n: usize,
    pub domain: (f64, f64),
    pub cost: CostName,
    pub cost_a: f64,
    pub cost_cap: Option<f64>,
    pub eta: f64,
    pub m: usize,
    pub anchor: usize,
    pub final_map: FinalMap,
    pub beta: f64,
    pub final_time: f64,
    pub scheme: Scheme,
    pub schemes: Vec<Scheme>,
    pub h: f64,
    pub h_list: Vec<f64>,
    /// Tolerance of the reference gradient-descent solve.
    pub tol: f64,
    pub sinkhorn_tol: f64,
    pub snapshots: Vec<f64>,
    pub out_dir: PathBuf,
    pub heatmap: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            experiment: Experiment::Trajectory,
            n: 40,
            domain: (0.0, 1.0),
            cost: CostName::Log,
            cost_a: 0.1,
            cost_cap: None,
            eta: 0.05,
            m: 3,
            anchor: 0,
            final_map: FinalMap::Reflect,
            beta: 20.0,
            final_time: 1.0,
            scheme: Scheme::Rk3,
            schemes: vec![Scheme::Euler, Scheme::Rk3],
            h: 0.01,
            h_list: vec![0.1, 0.05, 0.025, 0.0125],
            tol: 1e-10,
            sinkhorn_tol: 1e-9,
            snapshots: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            out_dir: PathBuf::from("out"),
            heatmap: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse {key} = '{value}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value.split(',').map(|v| parse(key, v)).collect()
}

/// Accepts `0.01` or `1/100`.
fn parse_step(key: &str, value: &str) -> Result<f64, CliError> {
    match value.trim().split_once('/') {
        Some((a, b)) => Ok(parse::<f64>(key, a)? / parse::<f64>(key, b)?),
        None => parse(key, value),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("cannot parse {key} = '{value}' as a boolean"))),
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut entries: HashMap<String, String> = HashMap::new();
        for (section, props) in ini.iter() {
            let allowed = match section {
                Some("problem") => PROBLEM_KEYS,
                Some("solver") => SOLVER_KEYS,
                Some("output") => OUTPUT_KEYS,
                None if props.is_empty() => continue,
                None => return Err(CliError::Config("keys must appear under [problem], [solver] or [output]".into())),
                Some(other) => return Err(CliError::Config(format!("unknown section [{other}]"))),
            };
            for (key, value) in props.iter() {
                if !allowed.contains(&key) {
                    return Err(CliError::Config(format!(
                        "unknown key '{key}' in [{}]",
                        section.unwrap_or_default()
                    )));
                }
                if entries.insert(key.to_string(), value.to_string()).is_some() {
                    return Err(CliError::Config(format!("duplicate key '{key}'")));
                }
            }
        }

        let mut c = Config::default();
        let experiment = entries
            .get("experiment")
            .ok_or_else(|| CliError::Config("missing [solver] experiment".into()))?;
        c.experiment = experiment.trim().parse().map_err(CliError::Config)?;
        if c.experiment == Experiment::Euler {
            c.m = 5;
            c.n = 30;
        }
        for (key, v) in &entries {
            match key.as_str() {
                "grid.n" => c.n = parse(key, v)?,
                "grid.domain" => {
                    let d: Vec<f64> = parse_list(key, v)?;
                    if d.len() != 2 || d[0] >= d[1] || d.iter().any(|v| !v.is_finite()) {
                        return Err(CliError::Config(format!("grid.domain must be 'lo, hi' with lo < hi, got '{v}'")));
                    }
                    c.domain = (d[0], d[1]);
                }
                "cost.kind" => {
                    c.cost = match v.trim() {
                        "log" => CostName::Log,
                        "neg_harmonic" => CostName::NegHarmonic,
                        "coulomb" => CostName::Coulomb,
                        "squared" => CostName::Squared,
                        other => {
                            return Err(CliError::Config(format!(
                                "unknown cost.kind '{other}' (expected log, neg_harmonic, coulomb or squared)"
                            )))
                        }
                    }
                }
                "cost.a" => c.cost_a = parse(key, v)?,
                "cost.cap" => c.cost_cap = Some(parse(key, v)?),
                "eta" => c.eta = parse(key, v)?,
                "m" => c.m = parse(key, v)?,
                "anchor_index" => c.anchor = parse(key, v)?,
                "euler.F" => c.final_map = v.parse().map_err(|e: mmotflow_core::Error| CliError::Config(e.to_string()))?,
                "euler.beta" => c.beta = parse(key, v)?,
                "euler.T" => c.final_time = parse(key, v)?,
                "scheme" => c.scheme = parse(key, v)?,
                "schemes" => c.schemes = parse_list(key, v)?,
                "h" => c.h = parse_step(key, v)?,
                "h_list" => c.h_list = v.split(',').map(|s| parse_step(key, s)).collect::<Result<_, _>>()?,
                "tol" => c.tol = parse(key, v)?,
                "sinkhorn_tol" => c.sinkhorn_tol = parse(key, v)?,
                "snapshots" => c.snapshots = parse_list(key, v)?,
                "dir" => c.out_dir = PathBuf::from(v.trim()),
                "heatmap" => c.heatmap = parse_bool(key, v)?,
                _ => {}
            }
        }
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.n < 2 {
            return bad(format!("grid.n must be at least 2, got {}", self.n));
        }
        if self.m < 3 {
            return bad(format!("m must be at least 3, got {}", self.m));
        }
        if self.anchor >= self.n {
            return bad(format!("anchor_index {} out of range", self.anchor));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.tol > 0.0 && self.sinkhorn_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.schemes.is_empty() {
            return bad("schemes must not be empty".into());
        }
        for &h in std::iter::once(&self.h).chain(&self.h_list) {
            step_count(h).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if self.experiment == Experiment::ConvergenceStudy && self.h_list.len() < 3 {
            return bad("h_list needs at least three step sizes".into());
        }
        let steps = step_count(self.h).map_err(|e| CliError::Config(e.to_string()))? as f64;
        let uses_snapshots = matches!(self.experiment, Experiment::Trajectory | Experiment::Euler);
        for &s in self.snapshots.iter().filter(|_| uses_snapshots) {
            if !(0.0..=1.0).contains(&s) || ((s * steps).round() - s * steps).abs() > 1e-9 {
                return bad(format!("snapshot {s} is not a multiple of h = {} in [0, 1]", self.h));
            }
        }
        if self.experiment == Experiment::Euler {
            self.euler_problem()?;
        } else {
            self.params()?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Grid::uniform_1d(self.n, self.domain.0, self.domain.1).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn cost_kind(&self, grid: &Grid) -> CostKind {
        match self.cost {
            CostName::Log => CostKind::Log { offset: self.cost_a },
            CostName::NegHarmonic => CostKind::NegHarmonic,
            CostName::Coulomb => match self.cost_cap {
                Some(cap) => CostKind::CoulombTruncated { cap },
                None => CostKind::coulomb_default(grid),
            },
            CostName::Squared => CostKind::SquaredDistance,
        }
    }

    pub fn params(&self) -> Result<ProblemParams, CliError> {
        let grid = self.grid()?;
        let bundle = build_cost_matrix(&grid, self.cost_kind(&grid), self.m).map_err(|e| CliError::Config(e.to_string()))?;
        ProblemParams::new(self.eta, DiscreteMarginal::uniform(grid), bundle, self.anchor)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn euler_problem(&self) -> Result<EulerProblem, CliError> {
        let rho = DiscreteMarginal::uniform(self.grid()?);
        EulerProblem::new(rho, self.m, self.beta, &self.final_map, self.eta)
            .and_then(|p| p.with_final_time(self.final_time))
            .and_then(|p| p.with_anchor(self.anchor))
            .map_err(|e| CliError::Config(e.to_string()))
    }
}
