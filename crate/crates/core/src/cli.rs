//! `qidfair` command line: train, search, localize, mitigate, report.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::{Preset, RunConfig};
use crate::dataset::{AttributeSchema, Dataset};
use crate::debug::{Debugger, Localization, MitigationMode, MitigationResult};
use crate::error::Error;
use crate::nn::{Intervention, Network};
use crate::report::{self, ReportFile};
use crate::search::run_search;
use crate::train_classifier;

#[derive(Debug, Parser)]
#[command(name = "qidfair", version, about = "Quantitative individual discrimination testing and debugging")]
pub struct Cli {
    /// Run configuration (TOML). Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for search and debugging (1 is deterministic).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Takes precedence over QIDFAIR_OUTPUT_DIR and the config file.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier on the dataset and save the weights.
    Train {
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Search for inputs with many protected-value clusters.
    Search {
        /// Seconds per run.
        #[arg(long)]
        timeout: Option<f64>,
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Stop each run after this many seeds.
        #[arg(long)]
        max_seeds: Option<usize>,
    },
    /// Localize the layer and neurons driving the cluster count.
    Localize {
        /// Search run whose test cases are used.
        #[arg(long, default_value_t = 0)]
        run: usize,
    },
    /// Apply a single-neuron intervention suggested by `localize`.
    Mitigate {
        #[arg(long, value_enum, default_value_t = ModeArg::Deactivate)]
        mode: ModeArg,
        /// Neuron at the localized layer, instead of the top-ranked one.
        #[arg(long)]
        neuron: Option<usize>,
        #[arg(long, default_value_t = 0)]
        run: usize,
    },
    /// Print every report found in the output directory.
    Report {
        /// Emit one JSON document instead of text.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Desk,
    Short,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Activate,
    Deactivate,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<MitigationMode> {
        match self {
            ModeArg::Activate => vec![MitigationMode::Activate],
            ModeArg::Deactivate => vec![MitigationMode::Deactivate],
            ModeArg::Both => vec![MitigationMode::Deactivate, MitigationMode::Activate],
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        message: message.into(),
    }
}

trait UsageExt<T> {
    fn or_usage(self) -> Result<T, CliError>;
}

impl<T> UsageExt<T> for crate::Result<T> {
    fn or_usage(self) -> Result<T, CliError> {
        self.map_err(|e| usage(e.to_string()))
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `args` (program name first), runs the command, returns the exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn run(cli: Cli) -> CliResult {
    let cfg = resolve_config(&cli)?;
    match cli.command {
        Command::Train { .. } => cmd_train(&cfg),
        Command::Search { .. } => cmd_search(&cfg),
        Command::Localize { run } => cmd_localize(&cfg, run),
        Command::Mitigate { mode, neuron, run } => cmd_mitigate(&cfg, mode, neuron, run),
        Command::Report { json } => cmd_report(&cfg, json),
    }
}

/// Config file, then flags; the seed and worker count are copied into each stage.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).or_usage()?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(p) = &cli.dataset {
        cfg.paths.dataset = p.clone();
    }
    if let Some(p) = &cli.schema {
        cfg.paths.schema = p.clone();
    }
    if let Some(p) = &cli.model {
        cfg.paths.model = Some(p.clone());
    }
    match &cli.command {
        Command::Train { epochs: Some(e) } => cfg.train.epochs = *e,
        Command::Search {
            timeout,
            preset,
            repeats,
            max_seeds,
        } => {
            if let Some(p) = preset {
                cfg.search.timeout_secs = match p {
                    PresetArg::Desk => Preset::Desk,
                    PresetArg::Short => Preset::Short,
                    PresetArg::Long => Preset::Long,
                }
                .timeout_secs();
            }
            if let Some(t) = timeout {
                cfg.search.timeout_secs = *t;
            }
            if let Some(r) = repeats {
                cfg.repeats = *r;
            }
            if max_seeds.is_some() {
                cfg.search.max_seeds = *max_seeds;
            }
        }
        _ => {}
    }
    cfg.resolve();
    if let Some(p) = &cli.output_dir {
        cfg.paths.output_dir = p.clone();
    }
    cfg.validate().or_usage()?;
    Ok(cfg)
}

fn load_inputs(cfg: &RunConfig) -> CliResult<(AttributeSchema, Dataset)> {
    let schema = AttributeSchema::load(&cfg.paths.schema).or_usage()?;
    let data = Dataset::load_csv(&cfg.paths.dataset, &schema).or_usage()?;
    Ok((schema, data))
}

fn load_model(cfg: &RunConfig, schema: &AttributeSchema) -> CliResult<Network> {
    let path = cfg.model_path();
    let net = Network::load(&path).or_usage()?;
    if net.input_dim() != schema.num_features() {
        return Err(usage(format!(
            "{}: model takes {} inputs but the schema has {} attributes (train it on this schema first)",
            path.display(),
            net.input_dim(),
            schema.num_features()
        )));
    }
    Ok(net)
}

fn secs(start: Instant) -> f64 {
    (start.elapsed().as_secs_f64() * 1000.0).round() / 1000.0
}

pub fn cmd_train(cfg: &RunConfig) -> CliResult {
    let (schema, data) = load_inputs(cfg)?;
    let start = Instant::now();
    let out = train_classifier(&data, &schema, &cfg.train)?;
    let path = cfg.model_path();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    out.network.save(&path)?;
    let payload = json!({
        "accuracy": out.accuracy,
        "rows": data.len(),
        "layer_dims": out.network.layer_dims(),
    });
    ReportFile::new("train", cfg, payload, json!({ "elapsed": secs(start) }))
        .save(cfg.paths.output_dir.join("train.json"))?;
    println!("accuracy {:.4} on {} rows", out.accuracy, data.len());
    println!("model written to {}", path.display());
    Ok(())
}

pub fn cmd_search(cfg: &RunConfig) -> CliResult {
    let (schema, data) = load_inputs(cfg)?;
    let net = load_model(cfg, &schema)?;
    let mut files = Vec::with_capacity(cfg.repeats);
    for run in 0..cfg.repeats {
        let mut run_cfg = cfg.clone();
        run_cfg.search.seed = cfg.seed.wrapping_add(run as u64);
        let report = run_search(&net, &data, &schema, &run_cfg.search)?;
        let dir = cfg.run_dir(run);
        let file = report::search_report_file(&report, &run_cfg);
        file.save(dir.join("report.json"))?;
        report::write_test_cases(&dir.join("test_cases.csv"), &report.test_cases, &schema, &run_cfg)?;
        report::write_id_instances(&dir.join("id_instances.csv"), &report.id_instances, &schema, &run_cfg)?;
        if cfg.repeats > 1 {
            println!("run {run}");
        }
        print!("{}", report::format_search(&file));
        files.push(file);
    }
    let (summary, summary_timing) = report::summarize_runs(&files.iter().collect::<Vec<_>>());
    if cfg.repeats > 1 {
        println!(
            "mean over {} runs: K_F {:.2} ({:.2}), #ID {:.1} ({:.1})",
            cfg.repeats,
            summary["k_max"]["mean"].as_f64().unwrap_or(0.0),
            summary["k_max"]["std"].as_f64().unwrap_or(0.0),
            summary["id_instances"]["mean"].as_f64().unwrap_or(0.0),
            summary["id_instances"]["std"].as_f64().unwrap_or(0.0),
        );
    }
    ReportFile::new("search_summary", cfg, summary, summary_timing).save(cfg.search_dir().join("summary.json"))?;
    Ok(())
}

fn debugger_inputs(cfg: &RunConfig, run: usize, schema: &AttributeSchema) -> CliResult<Vec<crate::search::TestCase>> {
    let path = cfg.run_dir(run).join("test_cases.csv");
    if !path.exists() {
        return Err(usage(format!("{}: no search output (run `search` first)", path.display())));
    }
    let cases = report::read_test_cases(&path, schema)?;
    if cases.is_empty() {
        return Err(CliError {
            code: 1,
            message: format!("{}: no test cases", path.display()),
        });
    }
    Ok(cases)
}

pub fn cmd_localize(cfg: &RunConfig, run: usize) -> CliResult {
    let (schema, data) = load_inputs(cfg)?;
    let net = load_model(cfg, &schema)?;
    let cases = debugger_inputs(cfg, run, &schema)?;
    let start = Instant::now();
    let dbg = Debugger::from_test_cases(&net, &schema, &data, &cases, cfg.debug.clone())?;
    let loc = dbg.localize()?;
    let payload = serde_json::to_value(&loc).map_err(Error::from)?;
    ReportFile::new("localize", cfg, payload, json!({ "elapsed": secs(start) }))
        .save(cfg.paths.output_dir.join("localize.json"))?;
    print!("{}", report::format_localization(&loc));
    Ok(())
}

fn pick(loc: &Localization, net: &Network, mode: MitigationMode, neuron: Option<usize>) -> CliResult<Option<Intervention>> {
    let Some(j) = neuron else {
        let top = match mode {
            MitigationMode::Deactivate => loc.negative.first().map(|a| Intervention::new(a.layer, a.neuron, a.v2)),
            MitigationMode::Activate => loc.positive.first().map(|a| Intervention::new(a.layer, a.neuron, a.v1)),
        };
        return Ok(top);
    };
    let layer = loc.layer();
    if j >= net.width(layer) {
        return Err(usage(format!(
            "neuron {j} does not exist at layer {layer} (width {})",
            net.width(layer)
        )));
    }
    let cand = loc.candidates.iter().find(|c| c.neuron == j);
    let value = match mode {
        MitigationMode::Deactivate => cand.and_then(|c| c.v2).unwrap_or(0.0),
        MitigationMode::Activate => cand.and_then(|c| c.v1).ok_or_else(|| CliError {
            code: 1,
            message: format!("neuron {j} at layer {layer} has no admissible activated value"),
        })?,
    };
    Ok(Some(Intervention::new(layer, j, value)))
}

pub fn cmd_mitigate(cfg: &RunConfig, mode: ModeArg, neuron: Option<usize>, run: usize) -> CliResult {
    let (schema, data) = load_inputs(cfg)?;
    let net = load_model(cfg, &schema)?;
    let loc_path = cfg.paths.output_dir.join("localize.json");
    if !loc_path.exists() {
        return Err(usage(format!("{}: no localization (run `localize` first)", loc_path.display())));
    }
    let loc_file = ReportFile::load(&loc_path)?;
    let loc: Localization = loc_file.payload_as()?;
    let cases = debugger_inputs(cfg, run, &schema)?;
    let start = Instant::now();
    let dbg = Debugger::from_test_cases(&net, &schema, &data, &cases, cfg.debug.clone())?;
    let mut results: Vec<MitigationResult> = Vec::new();
    let mut missing = Vec::new();
    for m in mode.modes() {
        match pick(&loc, &net, m, neuron)? {
            Some(iv) => {
                let mut r = dbg.mitigate(iv)?;
                r.mode = Some(m);
                results.push(r);
            }
            None => missing.push(m.to_string()),
        }
    }
    let localize_secs = loc_file.timing.get("elapsed").and_then(|v| v.as_f64()).unwrap_or(0.0);
    let elapsed = secs(start);
    let payload = json!({ "layer": loc.layer(), "results": results, "not_applicable": missing });
    ReportFile::new(
        "mitigate",
        cfg,
        payload,
        json!({ "elapsed": elapsed, "t_i": localize_secs + elapsed }),
    )
    .save(cfg.paths.output_dir.join("mitigate.json"))?;
    print!("{}", report::format_mitigation(&results));
    for m in missing {
        println!("{m}: N/A (no ranked neuron)");
    }
    Ok(())
}

fn load_if(path: &Path) -> CliResult<Option<ReportFile>> {
    if path.exists() {
        Ok(Some(ReportFile::load(path)?))
    } else {
        Ok(None)
    }
}

pub fn cmd_report(cfg: &RunConfig, as_json: bool) -> CliResult {
    let out = &cfg.paths.output_dir;
    let train = load_if(&out.join("train.json"))?;
    let mut runs = Vec::new();
    let mut run = 0;
    while let Some(f) = load_if(&cfg.run_dir(run).join("report.json"))? {
        runs.push(f);
        run += 1;
    }
    let summary = load_if(&cfg.search_dir().join("summary.json"))?;
    let localize = load_if(&out.join("localize.json"))?;
    let mitigate = load_if(&out.join("mitigate.json"))?;
    if train.is_none() && runs.is_empty() && localize.is_none() && mitigate.is_none() {
        return Err(CliError {
            code: 1,
            message: format!("{}: no reports found", out.display()),
        });
    }
    if as_json {
        let doc = json!({
            "train": train,
            "search_runs": runs,
            "search_summary": summary,
            "localize": localize,
            "mitigate": mitigate,
        });
        println!("{}", serde_json::to_string_pretty(&doc).map_err(Error::from)?);
        return Ok(());
    }
    if let Some(t) = &train {
        println!("== train");
        println!("accuracy {:.4}", t.payload["accuracy"].as_f64().unwrap_or(f64::NAN));
    }
    for (i, r) in runs.iter().enumerate() {
        println!("== search run {i}");
        print!("{}", report::format_search(r));
    }
    if let Some(l) = &localize {
        println!("== localize");
        print!("{}", report::format_localization(&l.payload_as()?));
    }
    if let Some(m) = &mitigate {
        println!("== mitigate");
        let results: Vec<MitigationResult> = serde_json::from_value(m.payload["results"].clone()).map_err(Error::from)?;
        print!("{}", report::format_mitigation(&results));
        if let Some(t) = m.timing.get("t_i").and_then(|v| v.as_f64()) {
            println!("T_I    {t:.2}");
        }
    }
    Ok(())
}
