//! The `sigscat` command line.
//!
//! Every command resolves a [`RunConfig`] (defaults, then `--config`, then
//! `--set key=value`, then the named flags) and, when it writes anything,
//! echoes the resolved config as `config.toml` into its output directory
//! before doing any work. Failed commands remove what they wrote.
//!
//! Exit status: 0 on success (and for a genuine `verify` decision), 1 for a
//! forged `verify` decision, 2 for any error.

mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use toml::Value;

use crate::dataset::{
    export_cedar_tree, generate_eval_pairs, index_dataset, load_image, read_manifest_split, synthesize_dataset,
    writer_disjoint_split, Label, Layout, SignatureCatalog, Split,
};
use crate::error::{Error, Result};
use crate::evaluation::{read_summary, score_pairs, scores_csv, verify, CurveReport};
use crate::model::{load_weights, SiameseModel};
use crate::training::train_with;

pub use config::{parse_config, parse_value, set_key, DatasetSection, EvalSection, ModelSection, RunConfig, SynthSection, TrainSection};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FORGED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sigscat", version, about = "Offline signature verification with scattering features and a triplet-trained Siamese network")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set train.margin=0.3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; `1` runs everything on the calling thread.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory (file for `embed`).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset tree (CEDAR naming) and its manifest.
    Synth {
        #[arg(long)]
        writers: Option<usize>,
        #[arg(long)]
        genuine: Option<usize>,
        #[arg(long)]
        forged: Option<usize>,
    },
    /// Train on the train split of a dataset; writes weights and a log.
    Train {
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        /// cedar, sigcomp-dutch or synthetic.
        #[arg(long)]
        layout: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score the test split and write curves and a summary.
    Evaluate {
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        #[arg(long)]
        layout: Option<String>,
        #[arg(long, value_name = "FILE")]
        weights: PathBuf,
    },
    /// Compare two images; prints the decision and score.
    Verify {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, value_name = "FILE")]
        weights: PathBuf,
        /// Accept as genuine when the score is at most this. Defaults to the
        /// EER threshold of a `summary.json` next to the weights.
        #[arg(long)]
        threshold: Option<f64>,
        /// Evaluation summary to take the threshold from.
        #[arg(long, value_name = "FILE")]
        summary: Option<PathBuf>,
    },
    /// Print (or write with `--out`) one embedding per image as CSV.
    Embed {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        #[arg(long, value_name = "FILE")]
        weights: PathBuf,
    },
    /// Per-layer and total parameter counts of the configured model.
    Params,
}

/// Parses `args` and runs the command; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            EXIT_ERROR
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let g = &cli.global;
    let mut flags: Vec<(&str, Value)> = Vec::new();
    if let Some(s) = g.seed {
        flags.push(("seed", Value::Integer(to_i64(s as u128)?)));
    }
    if let Some(t) = g.threads {
        flags.push(("threads", Value::Integer(to_i64(t as u128)?)));
    }
    if let Some(o) = &g.out {
        flags.push(("out", Value::String(o.display().to_string())));
    }
    let int = |v: usize| to_i64(v as u128).map(Value::Integer);
    match &cli.command {
        Command::Synth { writers, genuine, forged } => {
            for (key, v) in [("synth.writers", writers), ("synth.genuine", genuine), ("synth.forged", forged)] {
                if let Some(v) = v {
                    flags.push((key, int(*v)?));
                }
            }
        }
        Command::Train { data, layout, epochs } => {
            push_dataset(&mut flags, data, layout);
            if let Some(e) = epochs {
                flags.push(("train.epochs", int(*e)?));
            }
        }
        Command::Evaluate { data, layout, .. } => push_dataset(&mut flags, data, layout),
        Command::Verify { threshold: Some(t), .. } => flags.push(("eval.threshold", Value::Float(*t))),
        _ => {}
    }
    parse_config(g.config.as_deref(), &g.set, &flags)
}

fn to_i64(v: u128) -> Result<i64> {
    i64::try_from(v).map_err(|_| Error::Config(format!("{v} does not fit a config integer")))
}

fn push_dataset(flags: &mut Vec<(&str, Value)>, data: &Option<PathBuf>, layout: &Option<String>) {
    if let Some(d) = data {
        flags.push(("dataset.root", Value::String(d.display().to_string())));
    }
    if let Some(l) = layout {
        flags.push(("dataset.layout", Value::String(l.clone())));
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    let config = resolve(&cli)?;
    if let Some(n) = config.threads {
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Params => params(&config),
        Command::Synth { .. } => with_output(&config, |out| synth(&config, out)),
        Command::Train { .. } => with_output(&config, |out| train(&config, out)),
        Command::Evaluate { weights, .. } => with_output(&config, |out| evaluate(&config, weights, out)),
        Command::Verify {
            first,
            second,
            weights,
            summary,
            ..
        } => verify_command(&config, first, second, weights, summary.as_deref()),
        Command::Embed { images, weights } => embed(&config, images, weights),
    }
}

/// Tracks what a command wrote so a failure can take it back.
pub struct Output {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
}

impl Output {
    fn open(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
        })
    }

    /// Path of an output entry, remembered for cleanup.
    pub fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    fn clean(self) {
        if self.created_dir {
            let _ = fs::remove_dir_all(&self.dir);
            return;
        }
        for p in self.written.iter().rev() {
            if p.is_dir() {
                let _ = fs::remove_dir_all(p);
            } else {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn with_output(config: &RunConfig, work: impl FnOnce(&mut Output) -> Result<()>) -> Result<i32> {
    let dir = config
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("an output directory is required (--out)".into()))?;
    if let Some(root) = &config.dataset.root {
        if same_path(root, dir) {
            return Err(Error::Config("the output directory must differ from the dataset root".into()));
        }
    }
    let mut out = Output::open(dir)?;
    let result = write_file(&out.path("config.toml"), &config.to_toml()?).and_then(|_| work(&mut out));
    match result {
        Ok(()) => Ok(EXIT_OK),
        Err(e) => {
            out.clean();
            Err(e)
        }
    }
}

fn same_path(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn params(config: &RunConfig) -> Result<i32> {
    let counts = config.model_config().layer_counts()?;
    let mut stdout = std::io::stdout().lock();
    let mut line = |s: String| writeln!(stdout, "{s}").map_err(|e| Error::io("writing to stdout", e));
    line(format!("{:<8} {:<46} {:>9} {:>7} {:>9}", "layer", "shape", "weights", "biases", "total"))?;
    let mut total = 0;
    for c in &counts {
        total += c.total();
        line(format!(
            "{:<8} {:<46} {:>9} {:>7} {:>9}",
            c.name,
            c.description,
            c.weights,
            c.biases,
            c.total()
        ))?;
    }
    line(format!("{:<8} {:<46} {:>9} {:>7} {:>9}", "total", "", "", "", total))?;
    Ok(EXIT_OK)
}

fn synth(config: &RunConfig, out: &mut Output) -> Result<()> {
    let s = &config.synth;
    let catalog = synthesize_dataset(s.writers, s.genuine, s.forged, config.seed)?;
    let catalog = split(catalog, s.train_writers, config.seed)?;
    out.path("full_org");
    out.path("full_forg");
    let on_disk = export_cedar_tree(&catalog, &out.dir)?;
    on_disk.write_manifest(&out.path("manifest.tsv"))?;
    eprintln!(
        "wrote {} signatures of {} writers to {}",
        on_disk.len(),
        on_disk.writers().len(),
        out.dir.display()
    );
    Ok(())
}

fn split(catalog: SignatureCatalog, train: usize, seed: u64) -> Result<SignatureCatalog> {
    if catalog.provenance().layout == Layout::SigcompDutch {
        return Ok(catalog);
    }
    if train >= catalog.writers().len() {
        return Err(Error::Config(format!(
            "train_writers = {train} leaves no test writers among {}",
            catalog.writers().len()
        )));
    }
    writer_disjoint_split(catalog, train, seed)
}

/// Applies the split recorded in `manifest` when it covers exactly the
/// catalog's writers, else draws one from the config.
fn split_as_recorded(catalog: SignatureCatalog, manifest: Option<PathBuf>, config: &RunConfig) -> Result<SignatureCatalog> {
    if let Some(m) = manifest.filter(|m| m.is_file()) {
        let recorded = read_manifest_split(&m)?;
        let writers = catalog.writers();
        if recorded.len() == writers.len() && recorded.keys().all(|w| writers.contains_key(w)) {
            log::info!("using the split recorded in {}", m.display());
            return catalog.with_split(recorded);
        }
        log::warn!("{} describes other writers; splitting from the config", m.display());
    }
    split(catalog, config.dataset.train_writers, config.seed)
}

fn open_dataset(config: &RunConfig) -> Result<SignatureCatalog> {
    let root = config
        .dataset
        .root
        .as_deref()
        .ok_or_else(|| Error::Config("a dataset root is required (--data or dataset.root)".into()))?;
    let catalog = index_dataset(root, config.dataset.layout)?;
    for s in catalog.skipped() {
        log::warn!("skipped {}: {}", s.path.display(), s.reason);
    }
    for w in catalog.warnings() {
        log::warn!("{w}");
    }
    Ok(catalog)
}

fn train(config: &RunConfig, out: &mut Output) -> Result<()> {
    let root_manifest = config.dataset.root.as_ref().map(|r| r.join("manifest.tsv"));
    let catalog = split_as_recorded(open_dataset(config)?, root_manifest, config)?;
    catalog.write_manifest(&out.path("manifest.tsv"))?;
    let train_config = config.train_config();
    eprintln!(
        "training on {} writers for {} epochs",
        catalog.writers_in(Split::Train).len(),
        train_config.epochs
    );
    let weights_path = out.path("weights.ssnw");
    let (_, report) = train_with(
        &catalog,
        &config.model_config(),
        &train_config,
        Some(&weights_path),
        &mut |e| eprintln!("epoch {}\tloss {:.6}\tactive {:.4}\t{:.1}s", e.epoch, e.mean_loss, e.active_fraction, e.seconds),
    )?;
    report.write_log(&out.path("train_log.tsv"))?;
    eprintln!("wrote {} in {:.1?}", weights_path.display(), report.wall_time);
    Ok(())
}

fn evaluate(config: &RunConfig, weights: &Path, out: &mut Output) -> Result<()> {
    // prefer the split recorded at training time
    let manifest = weights.parent().map(|d| d.join("manifest.tsv"));
    let catalog = split_as_recorded(open_dataset(config)?, manifest, config)?;
    let model = SiameseModel::new(load_weights(weights)?)?;
    let pairs = generate_eval_pairs(&catalog, Split::Test, config.eval.per_writer_cap, config.seed)?;
    eprintln!(
        "scoring {} pairs over {} test writers",
        pairs.len(),
        catalog.writers_in(Split::Test).len()
    );
    let scored = score_pairs(&catalog, &pairs, &model)?;
    let report = CurveReport::new(&scored, config.eval.bins)?;
    for name in ["roc.csv", "pr.csv", "det.csv", "hist_genuine.csv", "hist_forged.csv", "summary.json"] {
        out.path(name);
    }
    report.write(&out.dir)?;
    write_file(&out.path("scores.csv"), &scores_csv(&scored))?;
    let s = report.summary();
    eprintln!(
        "auc {:.4}  aupr {:.4}  eer {:.4} at threshold {:.6}",
        s.auc, s.aupr, s.eer, s.eer_threshold
    );
    Ok(())
}

fn verify_command(config: &RunConfig, first: &Path, second: &Path, weights: &Path, summary: Option<&Path>) -> Result<i32> {
    let threshold = match (config.eval.threshold, summary) {
        (Some(t), _) => t,
        (None, Some(path)) => read_summary(path)?.eer_threshold,
        (None, None) => {
            let beside = weights.parent().map(|d| d.join("summary.json")).filter(|p| p.is_file());
            match beside {
                Some(path) => read_summary(&path)?.eer_threshold,
                None => {
                    return Err(Error::Config(
                        "no threshold: pass --threshold or --summary, or keep summary.json next to the weights".into(),
                    ))
                }
            }
        }
    };
    let model = SiameseModel::new(load_weights(weights)?)?;
    let v = verify(first, second, &model, threshold)?;
    println!("{} {:.6}", v.decision, v.score);
    Ok(match v.decision {
        Label::Genuine => EXIT_OK,
        Label::Forged => EXIT_FORGED,
    })
}

fn embed(config: &RunConfig, images: &[PathBuf], weights: &Path) -> Result<i32> {
    let model = SiameseModel::new(load_weights(weights)?)?;
    let mut csv = String::new();
    for path in images {
        let e = model.embed(&load_image(path)?)?;
        let values: Vec<String> = e.values.iter().map(|v| v.to_string()).collect();
        csv.push_str(&format!("{},{}\n", path.display(), values.join(",")));
    }
    match &config.out {
        Some(path) => write_file(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(EXIT_OK)
}
