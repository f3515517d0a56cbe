//! `sessnas` — batch front end for the session-classification pipeline:
//! decode captures into fixed-length session datasets, estimate genome
//! hardware costs, run the constrained evolutionary search, evaluate trained
//! models, and render comparison tables.
//!
//! One TOML configuration file (`--config`) supplies per-module settings;
//! command-line flags override individual values. All artifacts are
//! deterministic functions of their inputs and the `[seeds]` seed.
//!
//! Exit codes are stable and documented on [`error::CliError::exit_code`]:
//! 0 success, 1 unexpected failure, 2 usage errors, 3 unparsable input
//! (config, capture, dataset, model), 4 invalid genome, 5 no feasible
//! genome, 6 model/dataset class-count mismatch.

mod config;
mod error;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use sessnas::cost::{check_constraints, estimate_cost, params_by_section, CostReport, Quantity};
use sessnas::nn::{evaluate, read_model, write_model, Network, Tensor};
use sessnas::report::{
    comparison_report, confusion, metrics, Averaging, ComparisonRow, HwRow, MetricCells,
};
use sessnas::search::run_search;
use sessnas::session::{
    build_dataset_from_files, load_scaled, stratified_split, write_dataset, write_manifest,
    Dataset,
};
use sessnas::space::Genome;
use sessnas::SAMPLE_LEN;

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "sessnas",
    version,
    about = "Session-level traffic classification: preprocess captures, search tiny 1D CNNs \
             under hardware constraints, evaluate, and compare"
)]
struct Cli {
    /// TOML run configuration; flags override individual keys.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for candidate evaluation (1 = fully serial).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode capture files into a dataset of fixed-length session samples.
    Preprocess {
        /// Capture files; each is labeled by the [labelmap] patterns.
        inputs: Vec<PathBuf>,
        /// Dataset file to write (falls back to [paths] dataset).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Manifest file (default: <out>.manifest).
        #[arg(long, value_name = "FILE")]
        manifest: Option<PathBuf>,
    },
    /// Print the hardware cost report of a genome file.
    Cost {
        /// Genome in the text encoding.
        genome: PathBuf,
        /// Also check the configured thresholds, printing one
        /// pass/violation line per quantity.
        #[arg(long)]
        thresholds: bool,
        /// Input length used for shape inference.
        #[arg(long, default_value_t = SAMPLE_LEN, value_name = "LEN")]
        input_len: usize,
    },
    /// Evolve a constraint-satisfying architecture on a dataset.
    Search {
        /// Dataset file (falls back to [paths] dataset).
        #[arg(long, value_name = "FILE")]
        dataset: Option<PathBuf>,
        /// Directory for best.genome, best.model, and search.log
        /// (falls back to [paths] out_dir, then ".").
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Evaluate a trained model on one split of a dataset.
    Eval {
        /// Model file written by `search`.
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Dataset file (falls back to [paths] dataset).
        #[arg(long, value_name = "FILE")]
        dataset: Option<PathBuf>,
        /// Split to evaluate; the split derivation re-uses the configured
        /// fractions and seed, so it matches the one `search` trained on.
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        /// Baselines table; adds the hardware comparison to the output
        /// (falls back to [paths] baselines when set).
        #[arg(long, value_name = "FILE")]
        baselines: Option<PathBuf>,
        /// Aggregate averaging for precision/recall/F1.
        #[arg(long, value_enum, default_value_t = AveragingArg::Weighted)]
        averaging: AveragingArg,
    },
    /// Render the comparison tables of a baselines file.
    Report {
        /// Baselines table (falls back to [paths] baselines).
        #[arg(long, value_name = "FILE")]
        baselines: Option<PathBuf>,
        /// Emit delimiter-separated cells instead of aligned columns.
        #[arg(long, value_name = "CHAR")]
        delimiter: Option<char>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl SplitArg {
    fn name(self) -> &'static str {
        match self {
            SplitArg::Train => "train",
            SplitArg::Val => "val",
            SplitArg::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AveragingArg {
    Weighted,
    Macro,
}

impl From<AveragingArg> for Averaging {
    fn from(a: AveragingArg) -> Averaging {
        match a {
            AveragingArg::Weighted => Averaging::Weighted,
            AveragingArg::Macro => Averaging::Macro,
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Preprocess { inputs, out, manifest } => {
            cmd_preprocess(&cfg, &inputs, out, manifest)
        }
        Command::Cost { genome, thresholds, input_len } => {
            cmd_cost(&cfg, &genome, thresholds, input_len)
        }
        Command::Search { dataset, out_dir } => cmd_search(&cfg, dataset, out_dir, cli.jobs),
        Command::Eval { model, dataset, split, baselines, averaging } => {
            cmd_eval(&cfg, &model, dataset, split, baselines, averaging.into())
        }
        Command::Report { baselines, delimiter } => cmd_report(&cfg, baselines, delimiter),
    }
}

fn cmd_preprocess(
    cfg: &RunConfig,
    inputs: &[PathBuf],
    out: Option<PathBuf>,
    manifest: Option<PathBuf>,
) -> Result<(), CliError> {
    if inputs.is_empty() {
        return Err(CliError::EmptyInput);
    }
    let labels = cfg.label_map()?;
    let out = out
        .or_else(|| cfg.paths.dataset.clone())
        .ok_or(CliError::Missing("dataset output path (--out or [paths] dataset)"))?;
    let (samples, stats) = build_dataset_from_files(inputs, &labels)?;
    let num_classes = labels.class_names.len();
    write_dataset(&out, &samples, num_classes)?;
    let manifest = manifest.unwrap_or_else(|| manifest_path(&out));
    write_manifest(&manifest, &labels.class_names, &stats)?;
    println!(
        "wrote {} ({} sessions, {} classes)",
        out.display(),
        samples.len(),
        num_classes
    );
    println!("dropped_sessions {}", stats.dropped_sessions);
    for (i, name) in labels.class_names.iter().enumerate() {
        println!("class {i} {name} {}", stats.per_class[i]);
    }
    println!("manifest {}", manifest.display());
    Ok(())
}

/// `<out>.manifest`, keeping any existing extension.
fn manifest_path(out: &Path) -> PathBuf {
    let mut os = out.as_os_str().to_owned();
    os.push(".manifest");
    PathBuf::from(os)
}

fn cost_lines(c: &CostReport) -> String {
    format!(
        "params {}\nmax_tensor {}\nflops {}\nflash_bytes {}\nram_bytes {}\n",
        c.params, c.max_tensor, c.flops, c.flash_bytes, c.ram_bytes
    )
}

fn cmd_cost(
    cfg: &RunConfig,
    genome_path: &Path,
    thresholds: bool,
    input_len: usize,
) -> Result<(), CliError> {
    let text = fs::read_to_string(genome_path)?;
    let genome: Genome = text.parse()?;
    let report = estimate_cost(&genome, input_len)?;
    let (per_block, head) = params_by_section(&genome, input_len)?;
    for (i, p) in per_block.iter().enumerate() {
        println!("block {} params {p}", i + 1);
    }
    println!("head params {head}");
    print!("{}", cost_lines(&report));
    if thresholds {
        let th = cfg.thresholds();
        let violations = check_constraints(&report, &th);
        let quantities = [
            (Quantity::Params, report.params, th.d_th),
            (Quantity::MaxTensor, report.max_tensor, th.r_th),
            (Quantity::Flops, report.flops, th.flops_th),
        ];
        for (q, value, bound) in quantities {
            if let Some(v) = violations.iter().find(|v| v.quantity == q) {
                println!("violation: {v}");
            } else {
                match bound {
                    Some(b) => println!("pass: {q} {value} < {b}"),
                    None => println!("pass: {q} unbounded"),
                }
            }
        }
    }
    Ok(())
}

fn cmd_search(
    cfg: &RunConfig,
    dataset: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let dataset_path = dataset
        .or_else(|| cfg.paths.dataset.clone())
        .ok_or(CliError::Missing("dataset path (--dataset or [paths] dataset)"))?;
    let out_dir = out_dir
        .or_else(|| cfg.paths.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)?;

    let data = load_scaled(&dataset_path)?;
    let mut scfg = cfg.search_config()?;
    if let Some(j) = jobs {
        scfg.jobs = j;
    }
    let (train, val, _test) =
        stratified_split(&data, cfg.split.test, cfg.split.val, cfg.seeds.seed)?;
    log::info!(
        "searching on {} train / {} val samples ({} classes)",
        train.len(),
        val.len(),
        data.num_classes
    );
    let (best, search_log) = run_search(&scfg, &train, &val)?;

    let genome_path = out_dir.join("best.genome");
    let model_path = out_dir.join("best.model");
    let log_path = out_dir.join("search.log");
    fs::write(&genome_path, best.genome.to_string())?;
    write_model(&model_path, &best.outcome.net)?;
    search_log.write(&log_path)?;

    print!("{}", best.genome);
    print!("{}", cost_lines(&best.cost));
    println!("val_accuracy {:.6}", best.outcome.best_val_accuracy);
    println!("wrote {}", genome_path.display());
    println!("wrote {}", model_path.display());
    println!("wrote {}", log_path.display());
    Ok(())
}

fn predict_all(net: &Network<f32>, data: &Dataset) -> Result<Vec<u32>, CliError> {
    let mut out = Vec::with_capacity(data.len());
    for chunk in data.samples.chunks(256) {
        let rows: Vec<&[f32]> = chunk.iter().map(|s| s.as_slice()).collect();
        out.extend(net.predict(Tensor::from_samples(&rows))?);
    }
    Ok(out)
}

fn cmd_eval(
    cfg: &RunConfig,
    model_path: &Path,
    dataset: Option<PathBuf>,
    split: SplitArg,
    baselines: Option<PathBuf>,
    averaging: Averaging,
) -> Result<(), CliError> {
    let dataset_path = dataset
        .or_else(|| cfg.paths.dataset.clone())
        .ok_or(CliError::Missing("dataset path (--dataset or [paths] dataset)"))?;
    let data = load_scaled(&dataset_path)?;
    let input_len = data.samples.first().map_or(SAMPLE_LEN, |s| s.len());
    let net = read_model(model_path, input_len)?;
    let model_classes = net.genome.head.num_classes;
    if model_classes != data.num_classes {
        return Err(CliError::ClassMismatch { model: model_classes, dataset: data.num_classes });
    }

    let (train, val, test) =
        stratified_split(&data, cfg.split.test, cfg.split.val, cfg.seeds.seed)?;
    let subset = match split {
        SplitArg::Train => {
            println!("warning: evaluating on the training split");
            log::warn!("evaluating on the training split");
            train
        }
        SplitArg::Val => val,
        SplitArg::Test => test,
    };

    let predicted = predict_all(&net, &subset)?;
    let (loss, _) = evaluate(&net, &subset, 256)?;
    let cm = confusion(&subset.labels, &predicted, data.num_classes)?;
    let m = metrics(&cm, averaging);
    println!("split {} ({} samples)", split.name(), subset.len());
    println!("loss {loss:.6}");
    print!("{}", m.text());

    if let Some(bp) = baselines.or_else(|| cfg.paths.baselines.clone()) {
        let (mut rows, _) = config::load_baselines(&bp)?;
        let hw = HwRow::from(&estimate_cost(&net.genome, input_len)?);
        rows.push(ComparisonRow {
            name: "evaluated".into(),
            metrics: MetricCells::from(&m),
            hw,
        });
        let ours = rows.len() - 1;
        let report = comparison_report(rows, ours)?;
        println!();
        print!("{}", report.raw_text());
        println!();
        print!("{}", report.ratio_text());
    }
    Ok(())
}

fn cmd_report(
    cfg: &RunConfig,
    baselines: Option<PathBuf>,
    delimiter: Option<char>,
) -> Result<(), CliError> {
    let path = baselines
        .or_else(|| cfg.paths.baselines.clone())
        .ok_or(CliError::Missing("baselines path (--baselines or [paths] baselines)"))?;
    let (rows, ours) = config::load_baselines(&path)?;
    let ours = ours.ok_or_else(|| {
        CliError::Config(format!(
            "{}: exactly one [[model]] entry must set ours = true",
            path.display()
        ))
    })?;
    let report = comparison_report(rows, ours)?;
    match delimiter {
        Some(sep) => {
            print!("{}", report.raw_delimited(sep));
            println!();
            print!("{}", report.ratio_delimited(sep));
        }
        None => {
            print!("{}", report.raw_text());
            println!();
            print!("{}", report.ratio_text());
        }
    }
    Ok(())
}
