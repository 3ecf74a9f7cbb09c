//! `btof` — build-to-order pre-order forecasting workflows:
//! ingest → summarize → corr → transform → train → evaluate, plus a
//! synthetic order-book generator for verification.

mod config_file;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use btof_core::diagonal::{
    self, accumulate, build_frontiers, difference, pool_frontiers, Layout, LayoutDescriptor,
};
use btof_core::eval::{self, EvalReport, MethodReport, SmapeTensor};
use btof_core::orderbook::{self, ColumnSchema, DemandCube, Semantics};
use btof_core::pipeline::{self, run_experiment, Mode, SavedModel};
use btof_core::stats;
use btof_core::synth;

use config_file::TrainConfig;
use manifest::ManifestBuilder;

#[derive(Parser)]
#[command(
    name = "btof",
    version,
    about = "Build-to-order pre-order forecasting toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an order-book CSV and write the normalized cube plus summaries
    Ingest(IngestArgs),
    /// Write the zero-period and volume-by-delivery summaries
    Summarize(SummarizeArgs),
    /// Pooled rank-correlation tables over the frontier slots
    Corr(CorrArgs),
    /// Emit the pooled frontier dataset as CSV with a layout sidecar
    Transform(TransformArgs),
    /// Generate a synthetic order book
    Synth(SynthArgs),
    /// Cross-validated model selection and holdout evaluation
    Train(TrainArgs),
    /// Evaluate a saved model on the holdout of a dataset
    Evaluate(EvaluateArgs),
    /// Reprint and verify a persisted report
    Report(ReportArgs),
    /// Show configuration defaults
    Config(ConfigArgs),
}

#[derive(Args)]
struct InputOpts {
    /// Order-book CSV path
    #[arg(long)]
    input: PathBuf,
    /// Quantity semantics of the input
    #[arg(long, default_value = "gross", value_parser = parse_semantics)]
    semantics: Semantics,
    /// Number of delivery dates
    #[arg(long, default_value_t = 4)]
    horizon: usize,
    /// Column names in item,period,delivery,quantity order
    #[arg(long, value_parser = parse_columns)]
    columns: Option<ColumnSchema>,
}

fn parse_semantics(s: &str) -> Result<Semantics, String> {
    match s {
        "gross" => Ok(Semantics::Gross),
        "net" => Ok(Semantics::Net),
        other => Err(format!("expected gross|net, got `{other}`")),
    }
}

fn parse_columns(s: &str) -> Result<ColumnSchema, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err("expected four comma-separated column names".into());
    }
    Ok(ColumnSchema {
        item_code: parts[0].trim().to_string(),
        period: parts[1].trim().to_string(),
        delivery_date: parts[2].trim().to_string(),
        quantity: parts[3].trim().to_string(),
    })
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: InputOpts,
    /// Keep only items with at least this fraction of non-zero periods
    #[arg(long, default_value_t = 0.0)]
    min_nonzero_frac: f64,
    /// Output directory
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SummarizeArgs {
    #[command(flatten)]
    input: InputOpts,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CorrArgs {
    #[command(flatten)]
    input: InputOpts,
    /// Also write the table for first-differenced (net) data
    #[arg(long)]
    differenced: bool,
    /// Lagged full rows appended to the feature slots
    #[arg(long, default_value_t = 0)]
    lags: usize,
    /// Keep only items with at least this fraction of non-zero periods
    #[arg(long, default_value_t = 0.6)]
    min_nonzero_frac: f64,
    /// Worker thread cap for the table computation
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TransformArgs {
    #[command(flatten)]
    input: InputOpts,
    /// Difference the cube before building frontiers
    #[arg(long)]
    difference: bool,
    #[arg(long, default_value_t = 1)]
    lags: usize,
    /// Output CSV path (layout sidecar goes next to it)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    items: usize,
    #[arg(long, default_value_t = 45)]
    periods: usize,
    #[arg(long, default_value_t = 4)]
    horizon: usize,
    /// Anticipation strength in [0, 1]
    #[arg(long, default_value_t = 0.9)]
    rho: f64,
    /// Probability of a zero-demand period
    #[arg(long, default_value_t = 0.1)]
    sparsity: f64,
    #[arg(long, default_value_t = 100.0)]
    base_volume: f64,
    #[arg(long, default_value_t = 0.6)]
    ar: f64,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML configuration file (see `btof config --defaults`)
    #[arg(long)]
    config: PathBuf,
    /// Worker thread cap, overriding the config file; results at any count
    /// equal the 1-thread reference
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Saved model JSON produced by `btof train`
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    input: InputOpts,
    /// Evaluate on the last N periods of each item
    #[arg(long, default_value_t = 8)]
    holdout_periods: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// report.json produced by `btof train`
    #[arg(long)]
    input: PathBuf,
    /// Where to rewrite scores.csv and summary.csv (defaults beside input)
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    /// Print the default train configuration
    #[arg(long)]
    defaults: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Summarize(args) => summarize(args),
        Command::Corr(args) => corr(args),
        Command::Transform(args) => transform(args),
        Command::Synth(args) => synth_cmd(args),
        Command::Train(args) => train(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Report(args) => report(args),
        Command::Config(args) => config_cmd(args),
    }
}

/// Parses an order-book CSV into a gross cube (net inputs are accumulated).
fn load_gross_cube(opts: &InputOpts) -> Result<DemandCube> {
    let file = fs::File::open(&opts.input)
        .with_context(|| format!("cannot open input file {}", opts.input.display()))?;
    let schema = opts.columns.clone().unwrap_or_default();
    let records = orderbook::parse_orders(file, &schema, opts.horizon)?;
    let cube = orderbook::build_cube(&records, opts.horizon, opts.semantics)?;
    Ok(match opts.semantics {
        Semantics::Gross => cube,
        Semantics::Net => accumulate(&cube.to_net()?),
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn ingest(args: IngestArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("ingest");
    manifest.input(&args.input.input)?;
    ensure_dir(&args.out_dir)?;

    let mut cube = load_gross_cube(&args.input)?;
    if args.min_nonzero_frac > 0.0 {
        cube = orderbook::filter_items(&cube, args.min_nonzero_frac)?;
    }
    let summary = orderbook::summarize(&cube);

    let cube_path = args.out_dir.join("cube.csv");
    let mut buf = Vec::new();
    orderbook::write_orders(&cube, &mut buf)?;
    write_file(&cube_path, &buf)?;

    let zeros_path = args.out_dir.join("zeros_per_item.csv");
    let mut buf = Vec::new();
    orderbook::write_zeros_per_item(&summary, &mut buf)?;
    write_file(&zeros_path, &buf)?;

    let qty_path = args.out_dir.join("quantity_by_delivery.csv");
    let mut buf = Vec::new();
    orderbook::write_quantity_by_delivery(&summary, &mut buf)?;
    write_file(&qty_path, &buf)?;

    manifest
        .output(&cube_path)
        .output(&zeros_path)
        .output(&qty_path)
        .write(&args.out_dir)?;

    println!(
        "ingested {} items x {} periods (horizon {}), {} gross-monotonicity violations",
        summary.item_count,
        summary.period_count,
        cube.data.horizon(),
        summary.monotonicity_violations
    );
    Ok(())
}

fn summarize(args: SummarizeArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("summarize");
    manifest.input(&args.input.input)?;
    ensure_dir(&args.out_dir)?;

    let cube = load_gross_cube(&args.input)?;
    let summary = orderbook::summarize(&cube);

    let zeros_path = args.out_dir.join("zeros_per_item.csv");
    let mut buf = Vec::new();
    orderbook::write_zeros_per_item(&summary, &mut buf)?;
    write_file(&zeros_path, &buf)?;

    let qty_path = args.out_dir.join("quantity_by_delivery.csv");
    let mut buf = Vec::new();
    orderbook::write_quantity_by_delivery(&summary, &mut buf)?;
    write_file(&qty_path, &buf)?;

    manifest
        .output(&zeros_path)
        .output(&qty_path)
        .write(&args.out_dir)?;

    println!(
        "{} items, {} periods; zero-period counts and per-delivery totals written",
        summary.item_count, summary.period_count
    );
    Ok(())
}

fn pooled_dataset(cube_data: &btof_core::orderbook::CubeData, lags: usize) -> Result<diagonal::Dataset> {
    let layout = Layout::new(cube_data.horizon(), lags);
    let groups: Vec<(String, Vec<diagonal::FrontierSample>)> = (0..cube_data.items().len())
        .map(|i| {
            (
                cube_data.items()[i].clone(),
                build_frontiers(cube_data, i, lags),
            )
        })
        .collect();
    Ok(pool_frontiers(&groups, &layout)?)
}

fn corr(args: CorrArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("corr");
    manifest.input(&args.input.input)?;
    ensure_dir(&args.out_dir)?;

    let mut cube = load_gross_cube(&args.input)?;
    if args.min_nonzero_frac > 0.0 {
        cube = orderbook::filter_items(&cube, args.min_nonzero_frac)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .context("cannot build worker pool")?;

    let gross_path = args.out_dir.join("corr_gross.csv");
    let dataset = pooled_dataset(&cube.data, args.lags)?;
    let table = pool.install(|| stats::correlation_table(&dataset))?;
    let mut buf = Vec::new();
    stats::write_corr_table(&table, &mut buf)?;
    write_file(&gross_path, &buf)?;
    manifest.output(&gross_path);
    println!("wrote {}", gross_path.display());

    if args.differenced {
        let net = difference(&cube)?;
        let net_path = args.out_dir.join("corr_differenced.csv");
        let dataset = pooled_dataset(&net.data, args.lags)?;
        let table = pool.install(|| stats::correlation_table(&dataset))?;
        let mut buf = Vec::new();
        stats::write_corr_table(&table, &mut buf)?;
        write_file(&net_path, &buf)?;
        manifest.output(&net_path);
        println!("wrote {}", net_path.display());
    }

    manifest.write(&args.out_dir)?;
    Ok(())
}

fn transform(args: TransformArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("transform");
    manifest.input(&args.input.input)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }

    let cube = load_gross_cube(&args.input)?;
    let working = if args.difference {
        difference(&cube)?.data
    } else {
        cube.data
    };
    let dataset = pooled_dataset(&working, args.lags)?;

    let mut buf = Vec::new();
    diagonal::write_dataset(&dataset, &mut buf)?;
    write_file(&args.out, &buf)?;

    let layout = Layout::new(working.horizon(), args.lags);
    let descriptor = LayoutDescriptor::from_layout(&layout);
    let sidecar = args.out.with_extension("layout.json");
    write_file(&sidecar, serde_json::to_string_pretty(&descriptor)?.as_bytes())?;

    manifest.output(&args.out).output(&sidecar);
    let manifest_dir = args
        .out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    manifest.write(manifest_dir)?;

    println!(
        "wrote {} rows x ({} features + {} targets) to {}",
        dataset.x.rows(),
        dataset.x.cols(),
        dataset.y.cols(),
        args.out.display()
    );
    Ok(())
}

fn synth_cmd(args: SynthArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("synth");
    manifest.seed(args.seed);
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }

    let config = synth::SynthConfig {
        n_items: args.items,
        periods: args.periods,
        horizon: args.horizon,
        rho: args.rho,
        sparsity: args.sparsity,
        base_volume: args.base_volume,
        ar_coefficient: args.ar,
        noise_scale: args.noise,
        seed: args.seed,
    };
    let cube = synth::generate(&config)?;
    let mut buf = Vec::new();
    orderbook::write_orders(&cube, &mut buf)?;
    write_file(&args.out, &buf)?;

    manifest.output(&args.out);
    let manifest_dir = args
        .out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    manifest.write(manifest_dir)?;

    println!(
        "generated {} items x {} periods (rho {}, sparsity {}) into {}",
        args.items,
        args.periods,
        args.rho,
        args.sparsity,
        args.out.display()
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read config file {}", args.config.display()))?;
    let config: TrainConfig =
        toml::from_str(&text).with_context(|| "invalid train configuration")?;

    let mut manifest = ManifestBuilder::new("train");
    manifest.config_path(&args.config).seed(config.seed);
    manifest.input(Path::new(&config.input))?;
    let out_dir = PathBuf::from(&config.out_dir);
    ensure_dir(&out_dir)?;

    let input_opts = InputOpts {
        input: PathBuf::from(&config.input),
        semantics: config.semantics,
        horizon: config.horizon,
        columns: None,
    };
    let mut cube = load_gross_cube(&input_opts)?;
    if config.min_nonzero_frac > 0.0 {
        cube = orderbook::filter_items(&cube, config.min_nonzero_frac)?;
    }

    let experiment = config.experiment();
    let threads = args.threads.unwrap_or(config.threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("cannot build worker pool")?;
    let output = pool.install(|| run_experiment(&experiment, &cube))?;

    let report_path = out_dir.join("report.json");
    write_file(&report_path, output.report.to_json()?.as_bytes())?;
    manifest.output(&report_path);

    let scores_path = out_dir.join("scores.csv");
    let mut buf = Vec::new();
    eval::write_scores(&output.report, &mut buf)?;
    write_file(&scores_path, &buf)?;
    manifest.output(&scores_path);

    let summary_path = out_dir.join("summary.csv");
    let mut buf = Vec::new();
    eval::write_summary(&output.report, &mut buf)?;
    write_file(&summary_path, &buf)?;
    manifest.output(&summary_path);

    for model in &output.models {
        let model_path = out_dir.join(format!("model_{}.json", model.family));
        write_file(&model_path, model.to_json()?.as_bytes())?;
        manifest.output(&model_path);
    }
    manifest.write(&out_dir)?;

    if !output.failures.is_empty() {
        println!("{} scope failures recorded in the report run:", output.failures.len());
        for f in output.failures.iter().take(5) {
            println!("  {} / {}: {}", f.scope, f.method, f.error);
        }
    }
    print_method_table(&output.report);
    println!(
        "median SMAPE across methods: {:.4}",
        output.report.median_smape_across_methods
    );
    println!("report written to {}", report_path.display());
    Ok(())
}

fn print_method_table(report: &EvalReport) {
    println!(
        "{:<14} {:>9} {:>9} {:>9}  per-slot SMAPE [0,2] (percent)",
        "method", "overall", "median", "slot0"
    );
    for m in &report.methods {
        let slots: Vec<String> = m.s_j.iter().map(|v| format!("{v:.2}")).collect();
        println!(
            "{:<14} {:>9.4} {:>9.4} {:>9.4}  [{}] ({:.1}%)",
            m.method,
            m.overall_smape,
            m.median_smape,
            m.s_j[0],
            slots.join(" "),
            m.overall_smape * 100.0
        );
    }
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("evaluate");
    manifest.input(&args.model)?;
    manifest.input(&args.input.input)?;
    ensure_dir(&args.out_dir)?;

    let text = fs::read_to_string(&args.model)
        .with_context(|| format!("cannot read model file {}", args.model.display()))?;
    let saved = SavedModel::from_json(&text)?;

    let mut opts = args.input;
    opts.horizon = saved.horizon;
    let cube = load_gross_cube(&opts)?;
    let working = if saved.differenced {
        difference(&cube)?.data
    } else {
        cube.data.clone()
    };

    let n_periods = working.n_periods();
    let mut items = Vec::new();
    let mut frontiers = Vec::new();
    let mut values: Vec<Vec<Vec<f64>>> = vec![Vec::new(); saved.y_labels.len()];
    for i in 0..working.items().len() {
        let item = working.items()[i].clone();
        let samples = match saved.mode {
            Mode::NoDf => pipeline::build_nodf_samples(&working, i, saved.lags),
            _ => build_frontiers(&working, i, saved.lags),
        };
        let split = pipeline::split_dev_holdout(
            &samples,
            working.first_period(),
            working.last_period(),
            saved.horizon,
            n_periods,
            args.holdout_periods,
        );
        if split.holdout.is_empty() {
            log::warn!("item `{item}` has no holdout frontiers, skipped");
            continue;
        }
        let scope = match saved.mode {
            Mode::DfAllItems => "*",
            _ => item.as_str(),
        };
        let Some(entry) = saved.entry(scope) else {
            log::warn!("no saved model for scope `{scope}`, item skipped");
            continue;
        };
        let x_rows: Vec<Vec<f64>> = split.holdout.iter().map(|s| s.x.clone()).collect();
        let x = btof_core::matrix::Matrix::from_rows(&x_rows);
        let raw = entry.model.predict(&x)?;
        let predictions =
            eval::postprocess_forecast(&entry.transform.invert(&raw)?, &saved.family)?;

        items.push(item);
        frontiers.push(split.holdout.iter().map(|s| s.t).collect::<Vec<i64>>());
        for (j, per_item) in values.iter_mut().enumerate() {
            per_item.push(
                split
                    .holdout
                    .iter()
                    .enumerate()
                    .map(|(r, s)| eval::smape_point(s.y[j], predictions.get(r, j)))
                    .collect(),
            );
        }
    }
    if items.is_empty() {
        bail!("no items could be evaluated against this model");
    }

    let tensor = SmapeTensor {
        items: items.clone(),
        frontiers,
        values,
    };
    let method = MethodReport::from_tensor(saved.family.clone(), Vec::new(), Vec::new(), tensor);
    let report = EvalReport {
        version: pipeline::REPORT_VERSION,
        config_hash: String::new(),
        seed: 0,
        mode: saved.mode.to_string(),
        transform: match saved.entries.first() {
            Some(e) => e.transform.kind.to_string(),
            None => "identity".into(),
        },
        differenced: saved.differenced,
        horizon: saved.horizon,
        lags: saved.lags,
        dev_periods: 0,
        holdout_periods: args.holdout_periods,
        items,
        slot_labels: saved.y_labels.clone(),
        methods: vec![method],
        median_smape_across_methods: 0.0,
    };
    let report = EvalReport {
        median_smape_across_methods: report.methods[0].overall_smape,
        ..report
    };

    let scores_path = args.out_dir.join("eval_scores.csv");
    let mut buf = Vec::new();
    eval::write_scores(&report, &mut buf)?;
    write_file(&scores_path, &buf)?;
    manifest.output(&scores_path);
    manifest.write(&args.out_dir)?;

    print_method_table(&report);
    println!("holdout scores written to {}", scores_path.display());
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("cannot read report {}", args.input.display()))?;
    let report = EvalReport::from_json(&text)?;
    if !report.verify_aggregates() {
        bail!("persisted aggregates do not match the stored score tensor");
    }

    let out_dir = match args.out_dir {
        Some(dir) => dir,
        None => args
            .input
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf(),
    };
    ensure_dir(&out_dir)?;
    let mut manifest = ManifestBuilder::new("report");
    manifest.input(&args.input)?;

    let scores_path = out_dir.join("scores.csv");
    let mut buf = Vec::new();
    eval::write_scores(&report, &mut buf)?;
    write_file(&scores_path, &buf)?;

    let summary_path = out_dir.join("summary.csv");
    let mut buf = Vec::new();
    eval::write_summary(&report, &mut buf)?;
    write_file(&summary_path, &buf)?;

    manifest.output(&scores_path).output(&summary_path);
    manifest.write(&out_dir)?;

    println!(
        "aggregates verified for {} methods over {} items",
        report.methods.len(),
        report.items.len()
    );
    print_method_table(&report);
    Ok(())
}

fn config_cmd(args: ConfigArgs) -> Result<()> {
    if args.defaults {
        let defaults = TrainConfig::defaults();
        print!("{}", toml::to_string_pretty(&defaults)?);
        Ok(())
    } else {
        bail!("nothing to do; use --defaults to print the default configuration")
    }
}
