//! Experiment configuration and dispatch.
//!
//! A config names one experiment, the network it runs on and its
//! parameters. `run_experiment` returns a [`Report`] and, when an output
//! prefix is set, writes `<prefix>.csv` and `<prefix>.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bridges::bridge_check;
use crate::coupling::verify_gff_law;
use crate::error::{Error, Result};
use crate::gff::verify_connectivity;
use crate::green::compute_green;
use crate::interlacement::{interlacement_check, isomorphism_check, levelset_containment_check, InterlacementCheck, StarGraph};
use crate::loopsoup::{verify_edge_avoidance, verify_occupation_law, DEFAULT_LENGTH_CUTOFF};
use crate::network::{
    build_box_network, build_grid_network, build_path_network, edge_ids, BoundaryMode, Network, NetworkDocument,
};
use crate::report::{Report, TestRecord};
use crate::stats::Thresholds;

pub const EXPERIMENTS: [&str; 8] =
    ["connectivity", "det-ratio", "coupling", "occupation", "bridge", "interlacement", "isomorphism", "levelset"];

fn default_seed() -> u64 {
    1
}

fn default_replicas() -> usize {
    100_000
}

fn one() -> f64 {
    1.0
}

fn absorbing() -> BoundaryMode {
    BoundaryMode::Absorbing
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    /// `two-vertex`, `path3`, `grid3x3`, `grid4x4` or `single`.
    Builtin(String),
    /// JSON network document.
    File(PathBuf),
    Box {
        dimension: usize,
        half_width: usize,
        #[serde(default = "one")]
        conductance: f64,
        #[serde(default)]
        killing: f64,
        #[serde(default = "absorbing")]
        boundary: BoundaryMode,
    },
    Grid {
        shape: Vec<usize>,
        #[serde(default = "one")]
        conductance: f64,
        killing: f64,
    },
    Path {
        len: usize,
        #[serde(default = "one")]
        conductance: f64,
        killing: f64,
    },
    Inline(NetworkDocument),
}

pub const BUILTIN_NETWORKS: [&str; 5] = ["two-vertex", "path3", "grid3x3", "grid4x4", "single"];

impl NetworkSpec {
    /// A builtin name, or else a file path.
    pub fn from_arg(s: &str) -> Self {
        if BUILTIN_NETWORKS.contains(&s) {
            Self::Builtin(s.to_string())
        } else {
            Self::File(PathBuf::from(s))
        }
    }

    pub fn build(&self) -> Result<Network> {
        match self {
            Self::Builtin(name) => match name.as_str() {
                "two-vertex" => Network::from_triples(2, &[(0, 1, 1.0)], vec![1.0, 1.0]),
                "path3" => build_path_network(3, 1.0, 1.0),
                "grid3x3" => build_grid_network(&[3, 3], 1.0, 0.5),
                "grid4x4" => build_grid_network(&[4, 4], 1.0, 0.5),
                "single" => Network::from_triples(1, &[], vec![1.0]),
                other => Err(Error::Config(format!(
                    "unknown builtin network `{other}`; expected one of {BUILTIN_NETWORKS:?}"
                ))),
            },
            Self::File(path) => Network::from_json(&fs::read_to_string(path)?),
            Self::Box { dimension, half_width, conductance, killing, boundary } => {
                build_box_network(*dimension, *half_width, *conductance, *killing, *boundary)
            }
            Self::Grid { shape, conductance, killing } => build_grid_network(shape, *conductance, *killing),
            Self::Path { len, conductance, killing } => build_path_network(*len, *conductance, *killing),
            Self::Inline(doc) => Network::try_from(doc.clone()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Vertex pairs for `connectivity`.
    pub pairs: Option<Vec<[usize; 2]>>,
    /// Edges, as vertex pairs, removed in `det-ratio`.
    pub removed: Option<Vec<[usize; 2]>>,
    pub alpha: Option<f64>,
    /// Levels for the interlacement experiments.
    pub u: Option<Vec<f64>>,
    pub lambdas: Option<Vec<f64>>,
    pub length_cutoff: Option<f64>,
    pub rel_tol: Option<f64>,
    pub dimension: Option<usize>,
    pub half_width: Option<usize>,
    pub window_radius: Option<usize>,
    /// Sets of lattice points whose vacancy is tested.
    pub sets: Option<Vec<Vec<Vec<i64>>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    pub network: Option<NetworkSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Output prefix; `None` keeps the report in memory.
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            seed: default_seed(),
            replicas: default_replicas(),
            network: None,
            params: Params::default(),
            thresholds: Thresholds::default(),
            output: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !EXPERIMENTS.contains(&self.experiment.as_str()) {
            return Err(Error::UnknownExperiment(self.experiment.clone()));
        }
        if self.replicas == 0 {
            return Err(Error::Config("replicas: must be at least 1".into()));
        }
        let th = &self.thresholds;
        if !(th.z_max > 0.0) || !(th.ks_p_min > 0.0 && th.ks_p_min < 1.0) {
            return Err(Error::Config(format!("thresholds: invalid values {th:?}")));
        }
        Ok(())
    }

    fn network(&self) -> Result<Network> {
        self.network
            .as_ref()
            .ok_or_else(|| Error::Config(format!("network: required by experiment `{}`", self.experiment)))?
            .build()
    }

    fn cutoff(&self) -> f64 {
        self.params.length_cutoff.unwrap_or(DEFAULT_LENGTH_CUTOFF)
    }

    fn levels(&self) -> Vec<f64> {
        self.params.u.clone().unwrap_or_else(|| vec![0.5])
    }

    fn box_size(&self, d: usize, n: usize) -> (usize, usize) {
        (self.params.dimension.unwrap_or(d), self.params.half_width.unwrap_or(n))
    }
}

fn run_records(config: &ExperimentConfig) -> Result<Vec<TestRecord>> {
    let th = &config.thresholds;
    let (replicas, seed) = (config.replicas, config.seed);
    let p = &config.params;
    match config.experiment.as_str() {
        "connectivity" => {
            let net = config.network()?;
            let gop = compute_green(&net)?;
            let pairs = p.pairs.clone().unwrap_or_else(|| vec![[0, net.vertex_count() - 1]]);
            let mut records = Vec::new();
            for (i, [x, y]) in pairs.into_iter().enumerate() {
                records.extend(verify_connectivity(&net, &gop, x, y, replicas, seed.wrapping_add(i as u64), th)?);
            }
            Ok(records)
        }
        "det-ratio" => {
            let net = config.network()?;
            let gop = compute_green(&net)?;
            let pairs: Vec<(usize, usize)> = match &p.removed {
                Some(r) => r.iter().map(|e| (e[0], e[1])).collect(),
                None => net.edges().first().map(|e| vec![(e.u, e.v)]).unwrap_or_default(),
            };
            let removed = edge_ids(&net, &pairs)?;
            Ok(vec![verify_edge_avoidance(&net, &gop, &removed, replicas, seed, config.cutoff(), th)?])
        }
        "coupling" => {
            let net = config.network()?;
            let gop = compute_green(&net)?;
            verify_gff_law(&net, &gop, replicas, seed, config.cutoff(), th)
        }
        "occupation" => {
            let net = config.network()?;
            let gop = compute_green(&net)?;
            verify_occupation_law(&net, &gop, p.alpha.unwrap_or(0.5), replicas, seed, config.cutoff(), th)
        }
        "bridge" => {
            let lambdas = p.lambdas.clone().unwrap_or_else(|| vec![1e-4, 1e-2, 0.25, 1.0, 4.0, 25.0]);
            Ok(bridge_check(&lambdas, replicas, seed, p.rel_tol.unwrap_or(1e-10), th)?.1)
        }
        "interlacement" => {
            let (dimension, half_width) = config.box_size(3, 8);
            let sets = p.sets.clone().unwrap_or_else(|| {
                let origin = vec![0; dimension];
                let mut next = origin.clone();
                next[0] = 1;
                vec![vec![origin.clone()], vec![origin, next]]
            });
            let mut records = Vec::new();
            for (i, u) in config.levels().into_iter().enumerate() {
                let check = InterlacementCheck {
                    dimension,
                    half_width,
                    window_radius: p.window_radius.unwrap_or(2),
                    u,
                    sets: sets.clone(),
                };
                records.extend(interlacement_check(&check, replicas, seed.wrapping_add(i as u64), th)?.0);
            }
            Ok(records)
        }
        "isomorphism" | "levelset" => {
            let (dimension, half_width) = config.box_size(2, 5);
            let star = StarGraph::new(dimension, half_width)?;
            let mut records = Vec::new();
            for (i, u) in config.levels().into_iter().enumerate() {
                let s = seed.wrapping_add(i as u64);
                let recs = if config.experiment == "isomorphism" {
                    isomorphism_check(&star, u, replicas, s, th)?
                } else {
                    levelset_containment_check(&star, u, replicas, s, config.cutoff(), th)?
                };
                records.extend(recs.into_iter().map(|mut r| {
                    r.test = format!("u={u}:{}", r.test);
                    r
                }));
            }
            Ok(records)
        }
        other => Err(Error::UnknownExperiment(other.to_string())),
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let start = Instant::now();
    let records = run_records(config)?;
    // where the report goes is not part of what it reports
    let echo = ExperimentConfig { output: None, ..config.clone() };
    let report = Report {
        experiment: config.experiment.clone(),
        seed: config.seed,
        config: serde_json::to_value(&echo)?,
        records,
        runtime_secs: start.elapsed().as_secs_f64(),
    };
    if let Some(prefix) = &config.output {
        write_report(&report, prefix)?;
    }
    Ok(report)
}

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(".");
    name.push(ext);
    PathBuf::from(name)
}

/// Writes `<prefix>.json` and `<prefix>.csv`.
pub fn write_report(report: &Report, prefix: &Path) -> Result<()> {
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(with_extension(prefix, "json"), report.to_json())?;
    report.write_csv(fs::File::create(with_extension(prefix, "csv"))?)?;
    Ok(())
}
