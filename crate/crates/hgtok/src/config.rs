//! `key = value` run configuration. Blank lines and `#` comments are ignored;
//! unknown keys are rejected.

use std::str::FromStr;

use hgtok_core::diag::{diag_template_spec, DiagConfig};
use hgtok_core::hidto::TemplateSpec;
use hgtok_core::hip::HipConfig;
use hgtok_core::lm::LmConfig;
use hgtok_core::protocol::{Task, Vocabulary};
use hgtok_core::rng;
use hgtok_core::train::TrainConfig;
use hgtok_core::Buckets;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub train: TrainConfig,
    /// Template for classification tasks; the diagnostic has its own fixed
    /// detail-only template.
    pub template: TemplateSpec,
    pub d_text: usize,
    pub d_llm: usize,
    pub d_core: usize,
    pub d_sidecar: usize,
    pub num_blocks: usize,
    pub max_len: usize,
    pub diag: DiagConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            train: TrainConfig::default(),
            template: TemplateSpec::default(),
            d_text: 32,
            d_llm: 128,
            d_core: 384,
            d_sidecar: 64,
            num_blocks: 1,
            max_len: 1024,
            diag: DiagConfig::clean_d8(),
        }
    }
}

/// Sub-seeds derived from the run seed, one per independent consumer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedUse {
    Projector = 1,
    Lm = 2,
    Encoder = 3,
    Diag = 4,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Usage(format!("config key {key}: cannot parse {value:?}")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("config line {}: expected key=value", n + 1)))?;
            c.set(k.trim(), v.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "seed" => self.seed = parse(key, v)?,
            "lr" => t.lr = parse(key, v)?,
            "warmup_ratio" => t.warmup_ratio = parse(key, v)?,
            "lambda_ord" => t.lambda_ord = parse(key, v)?,
            "lambda_rel" => t.lambda_rel = parse(key, v)?,
            "batch" => t.batch = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "k_rel" => t.k_rel = parse(key, v)?,
            "weight_decay" => t.weight_decay = parse(key, v)?,
            "max_grad_norm" => {
                let x: f64 = parse(key, v)?;
                t.max_grad_norm = (x > 0.0).then_some(x);
            }
            "budgets" => self.template.layer_budgets = list(key, v)?,
            "overview_hops" => self.template.overview_hops = parse(key, v)?,
            "include_overview" => self.template.include_overview = parse(key, v)?,
            "order_bounds" => self.template.buckets.order = buckets(key, v)?,
            "degree_bounds" => self.template.buckets.degree = buckets(key, v)?,
            "max_tokens" => self.template.max_tokens = parse(key, v)?,
            "pe_dim" => self.template.pe_dim = parse(key, v)?,
            "d_text" => self.d_text = parse(key, v)?,
            "d_llm" => self.d_llm = parse(key, v)?,
            "d_core" => self.d_core = parse(key, v)?,
            "d_sidecar" => self.d_sidecar = parse(key, v)?,
            "num_blocks" => self.num_blocks = parse(key, v)?,
            "max_len" => self.max_len = parse(key, v)?,
            "preset" => {
                self.diag = DiagConfig::preset(v).ok_or_else(|| Error::Usage(format!("unknown preset {v:?}")))?
            }
            "distractor_vertices" => self.diag.distractor_vertices = parse(key, v)?,
            "distractor_hyperedges" => self.diag.distractor_hyperedges = parse(key, v)?,
            "decoys" => self.diag.decoys_per_pattern = parse(key, v)?,
            "train_pairs" => self.diag.train_pairs = parse(key, v)?,
            "test_pairs" => self.diag.test_pairs = parse(key, v)?,
            _ => return Err(Error::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate().map_err(|e| Error::Usage(e.to_string()))?;
        self.template.validate().map_err(|e| Error::Usage(e.to_string()))?;
        if [self.d_text, self.d_llm, self.d_core, self.d_sidecar, self.num_blocks].contains(&0) {
            return Err(Error::Usage("model widths must be positive".into()));
        }
        Ok(())
    }

    /// Applies a command-line seed; the training stream uses it directly.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.train.seed = self.seed;
        self.diag.seed = self.sub_seed(SeedUse::Diag);
        self
    }

    pub fn sub_seed(&self, what: SeedUse) -> u64 {
        rng::mix(self.seed, &[what as u64])
    }

    pub fn template_for(&self, task: Task) -> TemplateSpec {
        match task {
            Task::Diag => diag_template_spec(),
            _ => self.template.clone(),
        }
    }

    pub fn hip_config(&self, d_struct: usize, task: Task) -> HipConfig {
        HipConfig {
            d_core: self.d_core,
            d_sidecar: self.d_sidecar,
            num_blocks: self.num_blocks,
            ..HipConfig::new(self.d_text, d_struct, self.d_llm, self.template_for(task).buckets.order.len())
        }
    }

    pub fn lm_config(&self) -> LmConfig {
        LmConfig { d_model: self.d_llm, max_ctx: self.max_len, ..LmConfig::tiny(Vocabulary::byte_level().size()) }
    }
}

fn buckets(key: &str, v: &str) -> Result<Buckets> {
    Buckets::new(list(key, v)?).map_err(|e| Error::Usage(e.to_string()))
}

/// Reads the optional config file and applies the command-line seed.
pub fn load(path: Option<&std::path::Path>, seed: Option<u64>) -> Result<RunConfig> {
    let base = match path {
        Some(p) => RunConfig::parse(&std::fs::read_to_string(p).map_err(Error::io(p))?)?,
        None => RunConfig::default(),
    };
    Ok(base.with_seed(seed))
}
