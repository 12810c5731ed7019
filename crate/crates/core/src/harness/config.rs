use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::batch_means::{BatchSchedule, LeadIn};
use crate::engine::{RunSettings, StepSchedule, TruncationSchedule};
use crate::error::{Error, Result};
use crate::objective::{Objective, ObjectiveKind, DEFAULT_REG};
use crate::stream::{
    load_csv, AgentPopulation, AgentStream, ArChainParams, CsvSchema, DataStream, IidStream,
    LabelMode, MarkovChainStream, StreamRng,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Iid,
    Ar1,
    StateDep,
    Agents,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthMode {
    #[default]
    MonteCarlo,
    /// Closed form, i.i.d. linear model only.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamConfig {
    pub kind: StreamKind,
    pub rho: f64,
    pub eps: f64,
    pub sigma: f64,
    /// Generating parameter; all ones when absent.
    pub theta_r: Option<Vec<f64>>,
    /// How the perturbation `ε θ ṽ` draws `ṽ`; only `"scalar"` is supported.
    pub vtilde: String,
    pub lambda: f64,
    /// Agent step size; `0.5·lambda` when absent.
    pub alpha: Option<f64>,
    pub n1: usize,
    pub csv_path: Option<PathBuf>,
    pub label_column: Option<String>,
    pub modifiable_columns: Vec<String>,
    pub feature_columns: Option<Vec<String>>,
    pub subsample: Option<usize>,
    /// Seed for dataset-level randomness (subsampling).
    pub seed: u64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            kind: StreamKind::StateDep,
            rho: 0.5,
            eps: 0.5,
            sigma: 1.0,
            theta_r: None,
            vtilde: "scalar".into(),
            lambda: 0.01,
            alpha: None,
            n1: 50,
            csv_path: None,
            label_column: None,
            modifiable_columns: Vec::new(),
            feature_columns: None,
            subsample: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveKind,
    pub reg: f64,
    pub stream: StreamConfig,
    pub d: usize,
    pub n_iters: u64,
    pub n_reps: usize,
    pub n_truth_reps: usize,
    /// Explicit checkpoints; a geometric grid `⌈n·2^{-j}⌉` otherwise.
    pub checkpoints: Option<Vec<u64>>,
    pub n_checkpoints: usize,
    pub seed: u64,
    pub eta0: f64,
    pub a: f64,
    pub d0: f64,
    pub b: f64,
    pub r0: f64,
    pub growth: f64,
    pub batch_c: f64,
    /// `2/(1 − a)` when absent.
    pub beta: Option<f64>,
    pub lead_in: LeadIn,
    pub burn_in: u64,
    pub theta0: Option<Vec<f64>>,
    /// Projection for the interval; all ones when absent.
    pub v: Option<Vec<f64>>,
    pub level: f64,
    pub truth: TruthMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            objective: ObjectiveKind::LinearSq,
            reg: DEFAULT_REG,
            stream: StreamConfig::default(),
            d: 2,
            n_iters: 50_000,
            n_reps: 200,
            n_truth_reps: 500,
            checkpoints: None,
            n_checkpoints: 8,
            seed: 0,
            eta0: 2.0,
            a: 0.5005,
            d0: 10.0,
            b: 0.3,
            r0: 10.0,
            growth: 2.0,
            batch_c: 2.0,
            beta: None,
            lead_in: LeadIn::GrowingBlock,
            burn_in: 0,
            theta0: None,
            v: None,
            level: 0.95,
            truth: TruthMode::MonteCarlo,
        }
    }
}

/// Which part of the master seed a replication draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedDomain {
    Run,
    Truth,
    Bootstrap,
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent per-replication seed derived from the master seed.
pub fn rep_seed(master: u64, domain: SeedDomain, rep: usize) -> u64 {
    let tag = match domain {
        SeedDomain::Run => 0x52_55_4e,
        SeedDomain::Truth => 0x54_52_55_54_48,
        SeedDomain::Bootstrap => 0x42_4f_4f_54,
    };
    mix(mix(mix(master) ^ tag) ^ rep as u64)
}

fn vector_or(v: &Option<Vec<f64>>, d: usize, fill: f64, what: &str) -> Result<DVector<f64>> {
    match v {
        Some(x) if x.len() != d => Err(Error::Config(format!(
            "{what} has {} entries but d = {d}",
            x.len()
        ))),
        Some(x) => Ok(DVector::from_column_slice(x)),
        None => Ok(DVector::from_element(d, fill)),
    }
}

/// Data-stream template; each replication gets its own copy and generator.
#[derive(Debug, Clone)]
pub enum StreamSource {
    Iid {
        sigma: f64,
        theta_r: DVector<f64>,
        label: LabelMode,
    },
    Chain {
        params: ArChainParams,
        label: LabelMode,
    },
    Agents(AgentPopulation),
}

impl StreamSource {
    pub fn dim(&self) -> usize {
        match self {
            StreamSource::Iid { theta_r, .. } => theta_r.len(),
            StreamSource::Chain { params, .. } => params.theta_r.len(),
            StreamSource::Agents(p) => p.dim(),
        }
    }

    pub fn instantiate(&self, seed: u64) -> Result<Box<dyn DataStream + Send>> {
        let rng = StreamRng::seed_from_u64(seed);
        Ok(match self {
            StreamSource::Iid {
                sigma,
                theta_r,
                label,
            } => Box::new(IidStream::new(*sigma, theta_r.clone(), *label, rng)?),
            StreamSource::Chain { params, label } => {
                Box::new(MarkovChainStream::new(params.clone(), *label, rng))
            }
            StreamSource::Agents(p) => Box::new(AgentStream::new(p.clone(), rng)),
        })
    }
}

/// Everything a replication needs, resolved once from the config.
#[derive(Debug, Clone)]
pub struct Model {
    pub objective: Objective,
    pub source: StreamSource,
    pub settings: RunSettings,
    pub theta0: DVector<f64>,
    pub v: DVector<f64>,
    pub checkpoints: Vec<u64>,
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn beta(&self) -> f64 {
        self.beta
            .unwrap_or_else(|| BatchSchedule::default_beta(self.a))
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("dimension d must be positive".into()));
        }
        if self.n_reps == 0 {
            return Err(Error::Config("n_reps must be at least 1".into()));
        }
        if self.n_iters == 0 {
            return Err(Error::Config("n_iters must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if self.stream.vtilde != "scalar" {
            return Err(Error::Config(format!(
                "vtilde = '{}' is not supported (only 'scalar')",
                self.stream.vtilde
            )));
        }
        if let Some(c) = &self.checkpoints {
            if c.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(
                    "checkpoints must be strictly increasing".into(),
                ));
            }
            if c.last().is_some_and(|&l| l > self.n_iters) {
                return Err(Error::Config("last checkpoint exceeds n_iters".into()));
            }
        }
        if self.truth == TruthMode::Analytic
            && !(self.stream.kind == StreamKind::Iid && self.objective == ObjectiveKind::LinearSq)
        {
            return Err(Error::Config(
                "analytic ground truth exists only for the i.i.d. linear model".into(),
            ));
        }
        Ok(())
    }

    /// Resolved checkpoint list.
    pub fn checkpoint_list(&self) -> Vec<u64> {
        let mut c: Vec<u64> = match &self.checkpoints {
            Some(c) => c.clone(),
            None => (0..self.n_checkpoints.max(1))
                .map(|j| (self.n_iters as f64 / 2f64.powi(j as i32)).ceil() as u64)
                .collect(),
        };
        c.retain(|&k| k > self.burn_in && k <= self.n_iters);
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn objective(&self) -> Result<Objective> {
        match self.objective {
            ObjectiveKind::LinearSq => Ok(Objective::linear()),
            ObjectiveKind::LogisticL2 => Objective::logistic(self.reg),
        }
    }

    pub fn run_settings(&self) -> Result<RunSettings> {
        let mut s = RunSettings::new(
            StepSchedule::new(self.eta0, self.a)?,
            TruncationSchedule::new(self.d0, self.b, self.r0, self.growth)?,
            BatchSchedule::with_lead_in(self.batch_c, self.beta(), self.lead_in)?,
        );
        s.burn_in = self.burn_in;
        Ok(s)
    }

    pub fn stream_source(&self) -> Result<StreamSource> {
        let s = &self.stream;
        let label = match self.objective {
            ObjectiveKind::LinearSq => LabelMode::Regression,
            ObjectiveKind::LogisticL2 => LabelMode::Logistic,
        };
        let theta_r = || vector_or(&s.theta_r, self.d, 1.0, "theta_r");
        Ok(match s.kind {
            StreamKind::Iid => StreamSource::Iid {
                sigma: s.sigma,
                theta_r: theta_r()?,
                label,
            },
            StreamKind::Ar1 => StreamSource::Chain {
                params: ArChainParams::ar1(s.rho, s.sigma, theta_r()?)?,
                label,
            },
            StreamKind::StateDep => StreamSource::Chain {
                params: ArChainParams::new(s.rho, s.eps, s.sigma, theta_r()?)?,
                label,
            },
            StreamKind::Agents => {
                if self.objective != ObjectiveKind::LogisticL2 {
                    return Err(Error::Config(
                        "the agent stream produces class labels; use logistic_l2".into(),
                    ));
                }
                let path = s
                    .csv_path
                    .as_ref()
                    .ok_or_else(|| Error::Config("agents stream needs csv_path".into()))?;
                let label_column = s
                    .label_column
                    .clone()
                    .ok_or_else(|| Error::Config("agents stream needs label_column".into()))?;
                let schema = CsvSchema {
                    label_column,
                    modifiable_columns: s.modifiable_columns.clone(),
                    feature_columns: s.feature_columns.clone(),
                    subsample: s.subsample,
                    alpha: s.alpha.unwrap_or(0.5 * s.lambda),
                    lambda: s.lambda,
                    n1: s.n1,
                    seed: s.seed,
                    ..CsvSchema::new("", &[])
                };
                let pop = load_csv(path, &schema)?;
                if pop.dim() != self.d {
                    return Err(Error::Config(format!(
                        "dataset has {} feature columns but d = {}",
                        pop.dim(),
                        self.d
                    )));
                }
                StreamSource::Agents(pop)
            }
        })
    }

    pub fn model(&self) -> Result<Model> {
        self.validate()?;
        let checkpoints = self.checkpoint_list();
        if checkpoints.is_empty() {
            return Err(Error::Config("no checkpoint lies after the burn-in".into()));
        }
        Ok(Model {
            objective: self.objective()?,
            source: self.stream_source()?,
            settings: self.run_settings()?,
            theta0: vector_or(&self.theta0, self.d, 0.0, "theta0")?,
            v: vector_or(&self.v, self.d, 1.0, "v")?,
            checkpoints,
        })
    }

    /// Hash of every field that influences the ground truth.
    pub fn truth_hash(&self) -> String {
        let mut key = self.clone();
        key.n_reps = 0;
        key.checkpoints = None;
        key.n_checkpoints = 0;
        key.v = None;
        key.level = 0.0;
        let json = serde_json::to_vec(&key).expect("config is always serializable");
        hex::encode(Sha256::digest(&json))
    }
}
