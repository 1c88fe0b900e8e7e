use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use blockmol::chem::{corpus_lines, parse_smiles, tokenize};
use blockmol::curate::{curate_stream, CurationConfig};
use blockmol::decode::{generate_parallel, DecodeConfig, TokenChoice};
use blockmol::diffusion::{train, Checkpoint, Sampling, TrainOptions};
use blockmol::fragment::{pad_and_partition, FragmentConfig};
use blockmol::metrics::standard_metrics;
use blockmol::oracle::{builtin_profile, ExternalOracle, ExternalOracleConfig, Oracle, OracleProfile, SurrogateOracle};
use blockmol::search::{run_search, GateConfig, SearchConfig, SearchError, SearchResult};
use blockmol::selftest::run_selftest;
use blockmol::toy::toy_corpus;
use blockmol::vocab::Vocab;

static QUIET: AtomicBool = AtomicBool::new(false);

macro_rules! log {
    ($($arg:tt)*) => {
        if !QUIET.load(Ordering::Relaxed) {
            eprintln!($($arg)*);
        }
    };
}

#[derive(Parser)]
#[command(name = "blockmol", version, about = "Block diffusion molecule generation and gated tree search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON file with flat namespaced keys, e.g. {"search.exploration": 2.1}
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key; the value is read as JSON, else as a string
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for batched sampling
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write the run manifest to this file instead of standard error
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Silence diagnostics on standard error
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check that each line parses as a molecule
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run the four-stage curation pipeline
    Curate {
        #[arg(long = "in")]
        input: PathBuf,
        /// Survivors, one per line; standard output when absent
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON report; standard error when absent
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train the predictor and write a checkpoint
    Train {
        /// Training SMILES; the built-in toy corpus when absent
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Generate molecules as JSON lines
    Sample {
        /// Checkpoint; trains on the toy corpus when absent
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k_sample: Option<usize>,
        #[arg(long)]
        temp: Option<f64>,
        #[arg(long)]
        nucleus: Option<f64>,
        /// Draw tokens instead of taking the most likely one
        #[arg(long)]
        stochastic: bool,
        /// SMILES prefix to complete
        #[arg(long)]
        prefix: Option<String>,
    },
    /// Gated tree search against a target profile
    Search {
        #[arg(long)]
        params: Option<PathBuf>,
        /// Built-in profile name or profile JSON file
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        qed: Option<f64>,
        #[arg(long)]
        sa: Option<f64>,
        /// Final summary JSON; standard error when absent
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Standard metrics over a file of SMILES or sample records
    Eval {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        qed: Option<f64>,
        #[arg(long)]
        sa: Option<f64>,
    },
    /// Run the built-in worked examples
    Selftest,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Clone)]
struct RunConfig {
    seed: u64,
    workers: usize,
    train: TrainOptions,
    corpus_size: usize,
    fragment_length: usize,
    fragment_block: usize,
    decode: DecodeConfig,
    search: SearchConfig,
    search_sampling: Sampling,
    gate: GateConfig,
    curate: CurationConfig,
    target: String,
    oracle_program: Option<String>,
    oracle_args: Vec<String>,
    oracle_timeout: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let search = SearchConfig::default();
        Self {
            seed: 42,
            workers: 1,
            train: TrainOptions::default(),
            corpus_size: 500,
            fragment_length: 72,
            fragment_block: 8,
            decode: DecodeConfig::default(),
            search_sampling: search.decode.sampling,
            gate: search.gate,
            search,
            curate: CurationConfig::default(),
            target: "parp1".into(),
            oracle_program: None,
            oracle_args: Vec::new(),
            oracle_timeout: 60.0,
        }
    }
}

fn put<T: DeserializeOwned>(slot: &mut T, key: &str, v: &Value) -> CliResult {
    *slot = serde_json::from_value(v.clone()).map_err(|e| usage(format!("config key {key}: {e}")))?;
    Ok(())
}

macro_rules! config_keys {
    ($($key:literal => $($field:ident).+),* $(,)?) => {
        impl RunConfig {
            fn set(&mut self, key: &str, v: &Value) -> CliResult {
                match key {
                    $($key => put(&mut self.$($field).+, key, v),)*
                    _ => Err(usage(format!("unknown config key {key}"))),
                }
            }

            fn flat(&self) -> BTreeMap<&'static str, Value> {
                let mut m = BTreeMap::new();
                $(m.insert($key, serde_json::to_value(&self.$($field).+).expect("plain data"));)*
                m
            }
        }
    };
}

config_keys! {
    "seed" => seed,
    "workers" => workers,
    "train.epochs" => train.epochs,
    "train.learning_rate" => train.learning_rate,
    "train.batch_size" => train.batch_size,
    "train.dim" => train.dim,
    "train.window" => train.window,
    "train.init_scale" => train.init_scale,
    "train.clip_norm" => train.clip_norm,
    "train.seed" => train.seed,
    "train.corpus_size" => corpus_size,
    "fragment.length" => fragment_length,
    "fragment.block" => fragment_block,
    "decode.block" => decode.block,
    "decode.length" => decode.length,
    "decode.window" => decode.window,
    "decode.budget" => decode.budget,
    "decode.temperature" => decode.sampling.temperature,
    "decode.nucleus" => decode.sampling.nucleus,
    "decode.batch" => decode.batch,
    "decode.max_blocks" => decode.max_blocks,
    "decode.choice" => decode.choice,
    "search.iterations" => search.iterations,
    "search.exploration" => search.exploration,
    "search.lambda" => search.lambda,
    "search.beta" => search.beta,
    "search.root_cap" => search.root_cap,
    "search.child_cap" => search.child_cap,
    "search.cap_min" => search.cap_min,
    "search.cap_max" => search.cap_max,
    "search.expansion_batch" => search.expansion_batch,
    "search.rollouts" => search.rollouts,
    "search.max_depth" => search.max_depth,
    "search.temperature" => search_sampling.temperature,
    "search.nucleus" => search_sampling.nucleus,
    "gate.qed_min" => gate.qed_min,
    "gate.sa_max" => gate.sa_max,
    "gate.penalty" => gate.penalty,
    "curate.qed_min" => curate.qed_min,
    "curate.sa_max" => curate.sa_max,
    "curate.tpsa_max" => curate.tpsa_max,
    "curate.mw_range" => curate.mw_range,
    "curate.logp_max" => curate.logp_max,
    "curate.hbd_max" => curate.hbd_max,
    "curate.hba_max" => curate.hba_max,
    "curate.rot_max" => curate.rot_max,
    "curate.max_ring" => curate.max_ring,
    "curate.bridgehead_max" => curate.bridgehead_max,
    "curate.heavy_range" => curate.heavy_range,
    "curate.tanimoto_max" => curate.tanimoto_max,
    "curate.banned_elements" => curate.banned_elements,
    "curate.banned_patterns" => curate.banned_patterns,
    "oracle.target" => target,
    "oracle.program" => oracle_program,
    "oracle.args" => oracle_args,
    "oracle.timeout_secs" => oracle_timeout,
}

impl RunConfig {
    /// Decode settings for sampling with the run seed applied.
    fn sample_decode(&self) -> DecodeConfig {
        DecodeConfig { seed: self.seed, ..self.decode.clone() }
    }

    /// Search settings; expansion and rollouts always draw tokens.
    fn resolved_search(&self) -> SearchConfig {
        let decode = DecodeConfig {
            sampling: self.search_sampling,
            choice: TokenChoice::Sample,
            batch: 1,
            seed: self.seed,
            ..self.decode.clone()
        };
        SearchConfig { decode, gate: self.gate, seed: self.seed, ..self.search.clone() }
    }
}

fn parse_override(raw: &str) -> CliResult<(String, Value)> {
    let (k, v) = raw.split_once('=').ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {raw}")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

fn resolve(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let map: BTreeMap<String, Value> =
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        for (k, v) in &map {
            cfg.set(k, v)?;
        }
    }
    for raw in &cli.overrides {
        let (k, v) = parse_override(raw)?;
        cfg.set(&k, &v)?;
    }
    let mut flags: Vec<(&str, Value)> = Vec::new();
    if let Some(s) = cli.seed {
        flags.push(("seed", json!(s)));
    }
    if let Some(w) = cli.workers {
        flags.push(("workers", json!(w)));
    }
    match &cli.command {
        Command::Train { epochs, .. } => {
            if let Some(e) = epochs {
                flags.push(("train.epochs", json!(e)));
            }
        }
        Command::Sample { n, k_sample, temp, nucleus, stochastic, .. } => {
            let pairs = [("decode.batch", n.map(|x| json!(x))), ("decode.block", k_sample.map(|x| json!(x)))];
            flags.extend(pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))));
            let pairs = [("decode.temperature", temp), ("decode.nucleus", nucleus)];
            flags.extend(pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k, json!(v)))));
            if *stochastic {
                flags.push(("decode.choice", json!("sample")));
            }
        }
        Command::Search { target, budget, qed, sa, .. } => {
            if let Some(t) = target {
                flags.push(("oracle.target", json!(t)));
            }
            if let Some(b) = budget {
                flags.push(("search.iterations", json!(b)));
            }
            let pairs = [("gate.qed_min", qed), ("gate.sa_max", sa)];
            flags.extend(pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k, json!(v)))));
        }
        Command::Eval { target, qed, sa, .. } => {
            if let Some(t) = target {
                flags.push(("oracle.target", json!(t)));
            }
            let pairs = [("gate.qed_min", qed), ("gate.sa_max", sa)];
            flags.extend(pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k, json!(v)))));
        }
        _ => {}
    }
    for (k, v) in &flags {
        cfg.set(k, v)?;
    }
    cfg.sample_decode().validate().map_err(usage)?;
    cfg.resolved_search().validate().map_err(usage)?;
    FragmentConfig::new(cfg.fragment_length, cfg.fragment_block).map_err(usage)?;
    Ok(cfg)
}

fn write_manifest(cli: &Cli, command: &str, cfg: &RunConfig, extra: Value) -> CliResult {
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = json!({ "command": command, "config": cfg.flat(), "run": extra, "timestamp": timestamp });
    let text = serde_json::to_string_pretty(&manifest).expect("plain data");
    match &cli.manifest {
        Some(path) => fs::write(path, text + "\n").map_err(runtime),
        None => {
            log!("manifest: {text}");
            Ok(())
        }
    }
}

fn json_line<T: Serialize>(out: &mut impl Write, value: &T) -> CliResult {
    serde_json::to_writer(&mut *out, value).map_err(runtime)?;
    out.write_all(b"\n").map_err(runtime)
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn load_profile(target: &str) -> CliResult<OracleProfile> {
    if target.ends_with(".json") || Path::new(target).is_file() {
        OracleProfile::load(Path::new(target)).map_err(runtime)
    } else {
        builtin_profile(target).map_err(usage)
    }
}

fn make_oracle(cfg: &RunConfig, profile: &OracleProfile) -> Box<dyn Oracle> {
    match &cfg.oracle_program {
        Some(program) => Box::new(ExternalOracle::new(ExternalOracleConfig {
            program: program.clone(),
            args: cfg.oracle_args.clone(),
            timeout_secs: cfg.oracle_timeout,
        })),
        None => Box::new(SurrogateOracle::new(profile.clone())),
    }
}

/// Tokenizes, encodes and partitions a corpus, skipping lines that fail.
fn train_checkpoint(cfg: &RunConfig, corpus: &[String]) -> CliResult<Checkpoint> {
    let frag = FragmentConfig::new(cfg.fragment_length, cfg.fragment_block).map_err(usage)?;
    let seqs: Vec<_> = corpus.iter().filter_map(|s| tokenize(s).ok()).collect();
    let vocab = Vocab::from_corpus(seqs.iter());
    let tensors: Vec<_> = seqs
        .iter()
        .filter_map(|t| vocab.encode(t).ok().and_then(|ids| pad_and_partition(&ids, frag).ok()))
        .collect();
    log!("training on {} of {} molecules, {} tokens in vocabulary", tensors.len(), corpus.len(), vocab.len());
    let report = train(&tensors, vocab.len(), &cfg.train).map_err(runtime)?;
    Ok(Checkpoint::new(vocab, frag, report.params, cfg.train.seed, report.epoch_losses))
}

fn toy_checkpoint(cfg: &RunConfig) -> CliResult<Checkpoint> {
    let (corpus, _) = toy_corpus(cfg.corpus_size, cfg.fragment_length - 2, cfg.train.seed);
    log!("no checkpoint given, training on {} toy molecules", corpus.len());
    train_checkpoint(cfg, &corpus)
}

fn load_or_train(cfg: &RunConfig, params: &Option<PathBuf>) -> CliResult<Checkpoint> {
    match params {
        Some(p) => Checkpoint::load(p).map_err(runtime),
        None => toy_checkpoint(cfg),
    }
}

fn cmd_validate(input: &Path, out: &mut impl Write) -> CliResult {
    let text = read_text(input)?;
    let mut failures = 0;
    let mut total = 0;
    for (i, line) in text.lines().enumerate() {
        let smiles = line.trim();
        if smiles.is_empty() || smiles.starts_with('#') {
            continue;
        }
        total += 1;
        let result = parse_smiles(smiles);
        if result.is_err() {
            failures += 1;
        }
        let error = result.err().map(|e| e.to_string());
        json_line(out, &json!({ "line": i + 1, "smiles": smiles, "valid": error.is_none(), "error": error }))?;
    }
    log!("{total} molecules checked, {failures} failed");
    Ok(())
}

fn cmd_curate(cfg: &RunConfig, input: &Path, dest: Option<&Path>, report_path: Option<&Path>, out: &mut impl Write) -> CliResult {
    let text = read_text(input)?;
    let (kept, report) = curate_stream(corpus_lines(&text), &cfg.curate);
    let body: String = kept.iter().map(|s| format!("{s}\n")).collect();
    match dest {
        Some(p) => fs::write(p, body).map_err(runtime)?,
        None => out.write_all(body.as_bytes()).map_err(runtime)?,
    }
    let report_text = serde_json::to_string_pretty(&report).expect("plain data");
    match report_path {
        Some(p) => fs::write(p, report_text + "\n").map_err(runtime)?,
        None => log!("report: {report_text}"),
    }
    log!("{} of {} molecules admitted", report.accepted_count, report.input_count);
    Ok(())
}

fn cmd_train(cfg: &RunConfig, input: &Option<PathBuf>, dest: &Path, out: &mut impl Write) -> CliResult {
    let ckpt = match input {
        Some(p) => {
            let text = read_text(p)?;
            let corpus: Vec<String> = corpus_lines(&text).map(String::from).collect();
            train_checkpoint(cfg, &corpus)?
        }
        None => toy_checkpoint(cfg)?,
    };
    for (epoch, loss) in ckpt.epoch_losses.iter().enumerate() {
        json_line(out, &json!({ "epoch": epoch + 1, "loss": loss }))?;
    }
    ckpt.save(dest).map_err(runtime)?;
    log!("checkpoint written to {}", dest.display());
    Ok(())
}

fn cmd_sample(cfg: &RunConfig, ckpt: &Checkpoint, prefix: Option<&str>, out: &mut impl Write) -> CliResult {
    let dcfg = cfg.sample_decode();
    let prefix_ids = match prefix {
        Some(p) => Some(ckpt.vocab.encode_smiles(p).map_err(usage)?),
        None => None,
    };
    let generated = generate_parallel(&ckpt.params, &dcfg, prefix_ids.as_deref(), cfg.workers).map_err(runtime)?;
    let mut valid = 0;
    for g in &generated {
        let smiles = ckpt.vocab.decode(&g.body).map_err(runtime)?;
        let ok = g.completed && parse_smiles(&smiles).is_ok();
        valid += ok as usize;
        json_line(out, &json!({ "smiles": smiles, "valid": ok, "block_count": g.blocks, "seed": dcfg.seed }))?;
    }
    log!("{valid} of {} samples valid", generated.len());
    Ok(())
}

fn search_summary(result: &SearchResult) -> Value {
    let unique: HashSet<&str> = result.rollouts.iter().filter(|r| r.props.is_some()).map(|r| r.smiles.as_str()).collect();
    json!({
        "best_smiles": result.best.as_ref().map(|b| b.smiles.clone()),
        "best_reward": result.best.as_ref().map(|b| b.reward),
        "unique_count": unique.len(),
        "gate_pass_count": result.hits.len(),
        "iterations": result.iterations,
        "nodes": result.nodes,
    })
}

fn emit_hits(result: &SearchResult, out: &mut impl Write) -> CliResult {
    for h in &result.hits {
        let p = h.props.expect("hits carry properties");
        let rec = json!({
            "smiles": h.smiles, "reward": h.reward, "ds": p.ds, "qed": p.qed, "sa": p.sa,
            "depth": h.depth, "iteration": h.iteration,
        });
        json_line(out, &rec)?;
    }
    Ok(())
}

fn cmd_search(cfg: &RunConfig, ckpt: &Checkpoint, summary_path: Option<&Path>, out: &mut impl Write) -> CliResult {
    let profile = load_profile(&cfg.target)?;
    let mut oracle = make_oracle(cfg, &profile);
    let scfg = cfg.resolved_search();
    let (result, failure) = match run_search(&ckpt.params, &ckpt.vocab, &scfg, oracle.as_mut()) {
        Ok(r) => (r, None),
        Err(SearchError::OracleUnavailable { reason, partial }) => (*partial, Some(reason)),
        Err(e) => return Err(runtime(e)),
    };
    emit_hits(&result, out)?;
    let summary = serde_json::to_string_pretty(&search_summary(&result)).expect("plain data");
    match summary_path {
        Some(p) => fs::write(p, summary + "\n").map_err(runtime)?,
        None => log!("summary: {summary}"),
    }
    match failure {
        Some(reason) => Err(runtime(format!("oracle unavailable after {} iterations: {reason}", result.iterations))),
        None => Ok(()),
    }
}

fn eval_inputs(text: &str) -> Vec<String> {
    corpus_lines(text)
        .map(|line| {
            if line.starts_with('{') {
                let v: Value = serde_json::from_str(line).unwrap_or(Value::Null);
                v.get("smiles").and_then(Value::as_str).unwrap_or_default().to_string()
            } else {
                line.to_string()
            }
        })
        .collect()
}

fn cmd_eval(cfg: &RunConfig, input: &Path, out: &mut impl Write) -> CliResult {
    let samples = eval_inputs(&read_text(input)?);
    let profile = load_profile(&cfg.target)?;
    let mut oracle = make_oracle(cfg, &profile);
    let report = standard_metrics(&samples, oracle.as_mut(), profile.threshold_ds, &cfg.gate).map_err(runtime)?;
    json_line(out, &report)
}

fn cmd_selftest(out: &mut impl Write) -> CliResult {
    let outcomes = run_selftest();
    for c in &outcomes {
        writeln!(out, "{} {}", if c.passed { "pass" } else { "FAIL" }, c.name).map_err(runtime)?;
    }
    let failed = outcomes.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} passed, {failed} failed", outcomes.len() - failed).map_err(runtime)?;
    if failed > 0 {
        return Err(runtime(format!("{failed} self-test checks failed")));
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    let cfg = resolve(cli)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match &cli.command {
        Command::Validate { input } => cmd_validate(input, &mut out)?,
        Command::Curate { input, out: dest, report } => {
            write_manifest(cli, "curate", &cfg, json!({ "input": input }))?;
            cmd_curate(&cfg, input, dest.as_deref(), report.as_deref(), &mut out)?
        }
        Command::Train { input, out: dest, .. } => {
            write_manifest(cli, "train", &cfg, json!({ "input": input, "checkpoint": dest }))?;
            cmd_train(&cfg, input, dest, &mut out)?
        }
        Command::Sample { params, prefix, .. } => {
            write_manifest(cli, "sample", &cfg, json!({ "params": params, "prefix": prefix }))?;
            let ckpt = load_or_train(&cfg, params)?;
            cmd_sample(&cfg, &ckpt, prefix.as_deref(), &mut out)?
        }
        Command::Search { params, summary, .. } => {
            write_manifest(cli, "search", &cfg, json!({ "params": params, "profile": cfg.target }))?;
            let ckpt = load_or_train(&cfg, params)?;
            let result = cmd_search(&cfg, &ckpt, summary.as_deref(), &mut out);
            out.flush().map_err(runtime)?;
            result?
        }
        Command::Eval { input, .. } => {
            write_manifest(cli, "eval", &cfg, json!({ "input": input, "profile": cfg.target }))?;
            cmd_eval(&cfg, input, &mut out)?
        }
        Command::Selftest => {
            let result = cmd_selftest(&mut out);
            out.flush().map_err(runtime)?;
            result?
        }
    }
    out.flush().map_err(runtime)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    QUIET.store(cli.quiet, Ordering::Relaxed);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
