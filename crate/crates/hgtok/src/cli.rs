//! Command-line driver. Every command prints a one-line JSON summary on
//! success; failures print a JSON error line on stderr and exit with 2
//! (usage), 3 (data) or 4 (numeric).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hgtok_core::bench::{ccdf, stats, vertex_degrees};
use hgtok_core::diag::{
    clique_baseline, gen_dataset, majority_vote, metrics, pair_up, verify_equivalence, Answer, DiagConfig,
    MatchedPair,
};
use hgtok_core::hidto::{Binding, SlotRole};
use hgtok_core::protocol::{parse_answer, task_labels, Task};
use hgtok_core::train::{evaluate, train, PreparedSample};
use hgtok_core::Object;
use serde_json::json;

use crate::binary;
use crate::config::{self, RunConfig};
use crate::error::{Error, Result};
use crate::hgjl;
use crate::ingest::{self, manifest_json};
use crate::records::{read_jsonl, write_jsonl, DialogueRecord, PairRecord, PredictionRecord};
use crate::workflow::{self, Encoder, Query};

#[derive(Debug, Parser)]
#[command(name = "hgtok", version, about = "Hypergraph tokenization and alignment toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Vc,
    Hec,
    Diag,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Vc => Task::Vc,
            TaskArg::Hec => Task::Hec,
            TaskArg::Diag => Task::Diag,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    /// Yes when at least two of the three query pairs co-occur.
    Majority,
    AlwaysYes,
    AlwaysNo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CcdfOf {
    Degree,
    Order,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// key=value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        config::load(self.config.as_deref(), self.seed)
    }
}

#[derive(Debug, Clone, Args)]
pub struct QueryArgs {
    #[command(flatten)]
    pub common: Common,
    /// HGJL1 hypergraph
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "vc")]
    pub task: TaskArg,
    /// Center vertex (vc, diag) or hyperedge (hec) id
    #[arg(long)]
    pub center: u32,
    /// The two candidate vertices of a diagnostic query, comma separated
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<u32>>,
    /// HIPCK1 checkpoint; freshly initialized weights when absent
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serialize a query-centered context into slot JSON.
    Serialize(QueryArgs),
    /// Project a query into an HGTOK1 token matrix.
    Project(QueryArgs),
    /// Write the token matrix plus a dialogue JSONL sidecar.
    ExportTokens(QueryArgs),
    /// Train the projector against the frozen language model.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset HGJL1 file (vc, hec) or diagnostic JSONL (diag); the
        /// diagnostic is generated from the config when absent
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// HIPCK1 checkpoint to write
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Training log CSV
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Greedy evaluation on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        params: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Prediction JSONL to write
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Summary JSON to write in addition to stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a matched-pair diagnostic dataset.
    DiagGenerate {
        #[command(flatten)]
        common: Common,
        /// clean-d20, adversarial-d50 or clean-d8; overrides the config
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check every pair of a diagnostic file for equivalence and labels.
    DiagVerify {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Score predictions or a clique-only baseline on the test pairs.
    DiagScore {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
        predictions: Option<PathBuf>,
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
    },
    /// Ingest a dataset and write its recomputed manifest.
    BenchStats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the canonical dataset into this directory
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Write the vertex-degree or hyperedge-order CCDF as CSV.
    BenchCcdf {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "degree")]
        of: CcdfOf,
    },
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    fs::write(path, bytes).map_err(Error::io(path))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(Error::io(path))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(Error::io(path))
}

fn read_pairs(path: &Path) -> Result<Vec<(String, MatchedPair)>> {
    read_jsonl::<PairRecord>(&read_text(path)?)?.iter().map(|r| Ok((r.split.clone(), r.to_pair()?))).collect()
}

fn test_pairs(path: &Path) -> Result<Vec<MatchedPair>> {
    Ok(read_pairs(path)?.into_iter().filter(|(s, _)| s == "test").map(|(_, p)| p).collect())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn csv_bytes<R: serde::Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::format("CSV", e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::format("CSV", e.to_string()))
}

fn encode_query(a: &QueryArgs, cfg: &RunConfig) -> Result<Query> {
    let h = hgjl::read(&read_text(&a.input)?)?;
    let task = Task::from(a.task);
    match (task, a.candidates.as_deref()) {
        (Task::Diag, Some(&[u, v])) => workflow::diag_query(cfg, &h, a.center, [u, v]),
        (Task::Diag, Some(_)) => Err(Error::Usage("--candidates takes exactly two ids".into())),
        (Task::Diag, None) => Err(Error::Usage("--task diag needs --candidates U,V".into())),
        (_, Some(_)) => Err(Error::Usage("--candidates only applies to --task diag".into())),
        (_, None) => Encoder::new(cfg, task, &h)?.query(cfg, &h, a.center),
    }
}

fn projector_for(a: &QueryArgs, cfg: &RunConfig, q: &Query) -> Result<hgtok_core::hip::HipParams<f32>> {
    match &a.params {
        Some(p) => {
            let p = binary::read_checkpoint(&read(p)?)?;
            workflow::check_projector(&p, cfg, q.input.g.cols)?;
            Ok(p)
        }
        None => workflow::init_projector(cfg, a.task.into(), q.input.g.cols),
    }
}

fn serialize_cmd(a: &QueryArgs) -> Result<String> {
    let cfg = a.common.load()?;
    let q = encode_query(a, &cfg)?;
    let slots: Vec<_> = q
        .seq
        .slots
        .iter()
        .map(|s| {
            let role = match s.role {
                SlotRole::Center => "center",
                SlotRole::Vertex => "vertex",
                SlotRole::Hyperedge => "hyperedge",
                SlotRole::Overview => "overview",
                SlotRole::VertexPad => "vertex_pad",
                SlotRole::HyperedgePad => "hyperedge_pad",
            };
            let binding = match s.binding {
                Binding::None => json!(null),
                Binding::Vertex(v) => json!({ "vertex": v.0 }),
                Binding::Hyperedge(e) => json!({ "hyperedge": e.0 }),
                Binding::Overview { hop, bucket, count } => json!({ "hop": hop, "bucket": bucket, "count": count }),
            };
            json!({ "index": s.index, "role": role, "layer": s.layer, "parent": s.parent, "binding": binding })
        })
        .collect();
    let center = match q.seq.center {
        Object::Vertex(v) => json!({ "vertex": v.0 }),
        Object::Hyperedge(e) => json!({ "hyperedge": e.0 }),
    };
    let doc = json!({ "center": center, "detail_len": q.seq.detail_len, "slots": slots, "prompt": q.prompt });
    write(&a.out, serde_json::to_string_pretty(&doc).expect("json") + "\n")?;
    Ok(json!({ "L": q.seq.len(), "detail_len": q.seq.detail_len }).to_string())
}

fn project_cmd(a: &QueryArgs, dialogue: bool) -> Result<String> {
    let cfg = a.common.load()?;
    let q = encode_query(a, &cfg)?;
    let p = projector_for(a, &cfg, &q)?;
    let tokens = workflow::project(&p, &q.input)?;
    write(&a.out, binary::write_tokens(&tokens)?)?;
    let mut summary = json!({ "L": tokens.rows, "d_llm": tokens.cols, "tokens": a.out });
    if dialogue {
        let side = sidecar_path(&a.out);
        let rec = DialogueRecord {
            prompt: q.prompt,
            hg_region_index: q.hg_region_index,
            answer: q.answer,
            l_h: tokens.rows,
            tokens: a.out.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
        };
        write(&side, write_jsonl([rec]))?;
        summary["dialogue"] = json!(side);
    }
    Ok(summary.to_string())
}

/// `tokens.hgtok` → `tokens.dialogue.jsonl`.
pub fn sidecar_path(tokens: &Path) -> PathBuf {
    tokens.with_extension("dialogue.jsonl")
}

/// Training or evaluation samples for a task.
fn task_samples(
    cfg: &RunConfig,
    task: Task,
    input: Option<&Path>,
    part: &str,
) -> Result<(Vec<PreparedSample<f32>>, Vec<String>, Vec<MatchedPair>)> {
    if task == Task::Diag {
        let pairs = match input {
            Some(p) => read_pairs(p)?.into_iter().filter(|(s, _)| s == part).map(|(_, p)| p).collect(),
            None => {
                let ds = gen_dataset(&cfg.diag)?;
                if part == "test" { ds.test } else { ds.train }
            }
        };
        let samples = workflow::diag_samples(cfg, &pairs)?;
        return Ok((samples, task_labels(Task::Diag, 0), pairs));
    }
    let path = input.ok_or_else(|| Error::Usage("--in is required for vc and hec".into()))?;
    let ds = ingest::ingest(path)?;
    let split = workflow::split_of(&ds.splits, task)?;
    let ids = split.parts().into_iter().find(|(n, _)| *n == part).map(|(_, ids)| ids.to_vec()).unwrap_or_default();
    let enc = Encoder::new(cfg, task, &ds.hypergraph)?;
    let samples = enc.prepare(cfg, &ds.hypergraph, &ids)?;
    Ok((samples, enc.labels, Vec::new()))
}

#[derive(serde::Serialize)]
struct LogRow {
    step: usize,
    #[serde(rename = "L_lm")]
    lm: f64,
    #[serde(rename = "L_ord")]
    ord: f64,
    #[serde(rename = "L_rel")]
    rel: f64,
    total: f64,
}

fn train_cmd(common: &Common, input: Option<&Path>, out: &Path, task: Task, log: Option<&Path>) -> Result<String> {
    let cfg = common.load()?;
    let (data, _, _) = task_samples(&cfg, task, input, "train")?;
    let first = data.first().ok_or(Error::Core(hgtok_core::Error::EmptyInput))?;
    let lm = workflow::lm(&cfg)?;
    let theta = lm.theta_hash();
    let mut p = workflow::init_projector(&cfg, task, first.input.g.cols)?;
    let logs = train(&lm, &mut p, &data, &cfg.train, |_| {})?;
    if lm.theta_hash() != theta {
        return Err(Error::Core(hgtok_core::Error::StaleCache));
    }
    write(out, binary::write_checkpoint(&p)?)?;
    if let Some(log) = log {
        let rows = logs.iter().map(|l| LogRow {
            step: l.step,
            lm: l.loss.lm,
            ord: l.loss.ord,
            rel: l.loss.rel,
            total: l.loss.total,
        });
        write(log, csv_bytes(rows)?)?;
    }
    let last = logs.last().map(|l| l.loss.total);
    Ok(json!({ "steps": logs.len(), "samples": data.len(), "final_loss": last, "theta_sha256": hex(&theta) })
        .to_string())
}

fn eval_cmd(
    common: &Common,
    input: Option<&Path>,
    params: &Path,
    task: Task,
    predictions: Option<&Path>,
    out: Option<&Path>,
) -> Result<String> {
    let cfg = common.load()?;
    let (data, labels, pairs) = task_samples(&cfg, task, input, "test")?;
    let first = data.first().ok_or(Error::Core(hgtok_core::Error::EmptyInput))?;
    let p = binary::read_checkpoint(&read(params)?)?;
    workflow::check_projector(&p, &cfg, first.input.g.cols)?;
    let lm = workflow::lm(&cfg)?;
    let rep = evaluate(&lm, &p, &data, &labels, &hgtok_core::protocol::Vocabulary::byte_level())?;
    let summary = if task == Task::Diag {
        let answers: Vec<Answer> = rep.predictions.iter().map(|x| Answer::from_parsed(x.parsed)).collect();
        if let Some(path) = predictions {
            let recs = pairs.iter().zip(rep.predictions.chunks(2)).flat_map(|(pair, pr)| {
                [PredictionRecord::new(pair.id, pair.a.side, &pr[0].text), PredictionRecord::new(pair.id, pair.b.side, &pr[1].text)]
            });
            write(path, write_jsonl(recs))?;
        }
        metrics_json(&metrics(&pair_up(&answers), &pairs)?)
    } else {
        if let Some(path) = predictions {
            let recs = rep.predictions.iter().map(|x| json!({ "text": x.text, "parsed": x.parsed, "gold": x.gold }));
            write(path, write_jsonl(recs))?;
        }
        json!({ "accuracy": rep.accuracy, "invalid": rep.invalid, "samples": rep.predictions.len() })
    };
    if let Some(o) = out {
        write(o, summary.to_string() + "\n")?;
    }
    Ok(summary.to_string())
}

fn metrics_json(m: &hgtok_core::diag::DiagMetrics) -> serde_json::Value {
    json!({
        "pairs": m.pairs,
        "sample_acc": m.sample_acc,
        "pair_acc": m.pair_acc,
        "flip_rate": m.flip_rate,
        "invalid": m.invalid,
    })
}

fn diag_generate(common: &Common, preset: Option<&str>, out: &Path) -> Result<String> {
    let mut cfg = common.load()?;
    if let Some(name) = preset {
        let seed = cfg.diag.seed;
        cfg.diag = DiagConfig { seed, ..DiagConfig::preset(name).ok_or_else(|| Error::Usage(format!("unknown preset {name:?}")))? };
    }
    let ds = gen_dataset(&cfg.diag)?;
    let recs = ds
        .test
        .iter()
        .map(|p| PairRecord::new("test", p))
        .chain(ds.train.iter().map(|p| PairRecord::new("train", p)));
    write(out, write_jsonl(recs))?;
    Ok(json!({ "train": ds.train.len(), "test": ds.test.len(), "seed": cfg.diag.seed }).to_string())
}

fn diag_verify(input: &Path) -> Result<String> {
    let pairs = read_pairs(input)?;
    for (_, p) in &pairs {
        let r = verify_equivalence(p);
        if !r.ok() {
            return Err(Error::ManifestMismatch(format!("pair {} fails verification: {r:?}", p.id)));
        }
    }
    Ok(json!({ "pairs": pairs.len(), "passed": pairs.len() }).to_string())
}

fn diag_score(input: &Path, predictions: Option<&Path>, baseline: Option<Baseline>) -> Result<String> {
    let pairs = test_pairs(input)?;
    let m = match (predictions, baseline) {
        (_, Some(b)) => clique_baseline(&pairs, |c, q| match b {
            Baseline::Majority => majority_vote(c, q),
            Baseline::AlwaysYes => Answer::Yes,
            Baseline::AlwaysNo => Answer::No,
        })?,
        (Some(path), None) => {
            let labels = task_labels(Task::Diag, 0);
            let recs: Vec<PredictionRecord> = read_jsonl(&read_text(path)?)?;
            let mut by_key = std::collections::BTreeMap::new();
            for r in &recs {
                let a = Answer::from_parsed(parse_answer(&r.text, &labels));
                if by_key.insert((r.id, r.side()?), a).is_some() {
                    return Err(Error::Malformed { line: 0, reason: format!("duplicate prediction for pair {}", r.id) });
                }
            }
            let preds: Vec<[Answer; 2]> = pairs
                .iter()
                .map(|p| p.samples().map(|s| by_key.get(&(p.id, s.side)).copied().unwrap_or(Answer::Invalid)))
                .collect();
            metrics(&preds, &pairs)?
        }
        (None, None) => return Err(Error::Usage("give --predictions or --baseline".into())),
    };
    Ok(metrics_json(&m).to_string())
}

fn bench_stats(input: &Path, out: Option<&Path>, export: Option<&Path>) -> Result<String> {
    let ds = ingest::ingest(input)?;
    if let Some(o) = out {
        write(o, manifest_json(&ds.manifest))?;
    }
    if let Some(dir) = export {
        ingest::export(&ds, dir)?;
    }
    let s = stats(&ds.hypergraph);
    Ok(json!({
        "name": ds.manifest.name,
        "num_vertices": s.num_vertices,
        "num_hyperedges": s.num_hyperedges,
        "num_incidences": s.num_incidences,
        "num_classes": ds.manifest.num_classes,
        "degree_hist": s.degree_hist,
        "order_hist": s.order_hist,
    })
    .to_string())
}

#[derive(serde::Serialize)]
struct CcdfRow {
    value: u64,
    fraction: f64,
}

fn bench_ccdf(input: &Path, out: &Path, of: CcdfOf) -> Result<String> {
    let ds = ingest::ingest(input)?;
    let h = &ds.hypergraph;
    let values = match of {
        CcdfOf::Degree => vertex_degrees(h),
        CcdfOf::Order => h.hyperedges().iter().map(|e| e.members.len() as u64).collect(),
    };
    let c = ccdf(&values)?;
    write(out, csv_bytes(c.iter().map(|&(value, fraction)| CcdfRow { value, fraction }))?)?;
    Ok(json!({ "points": c.len() }).to_string())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Result<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Usage(e.to_string().trim_end().to_string()))?;
    match &cli.command {
        Command::Serialize(a) => serialize_cmd(a),
        Command::Project(a) => project_cmd(a, false),
        Command::ExportTokens(a) => project_cmd(a, true),
        Command::Train { common, input, out, task, log } => {
            train_cmd(common, input.as_deref(), out, (*task).into(), log.as_deref())
        }
        Command::Eval { common, input, params, task, predictions, out } => {
            eval_cmd(common, input.as_deref(), params, (*task).into(), predictions.as_deref(), out.as_deref())
        }
        Command::DiagGenerate { common, preset, out } => diag_generate(common, preset.as_deref(), out),
        Command::DiagVerify { input } => diag_verify(input),
        Command::DiagScore { input, predictions, baseline } => diag_score(input, predictions.as_deref(), *baseline),
        Command::BenchStats { input, out, export } => bench_stats(input, out.as_deref(), export.as_deref()),
        Command::BenchCcdf { input, out, of } => bench_ccdf(input, out, *of),
    }
}

/// Process entry point; returns the exit code.
pub fn main() -> i32 {
    let args: Vec<OsString> = std::env::args_os().collect();
    if let Err(e) = Cli::try_parse_from(&args) {
        if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
            print!("{e}");
            return 0;
        }
    }
    match run(args) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}
