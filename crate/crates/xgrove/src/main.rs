//! `xgrove` command line: run the selection pipeline, explain a saved
//! model, or recompute metrics from an emitted ledger.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use xgrove::data::stratified_split;
use xgrove::error::{Error, Result};
use xgrove::metrics::MetricName;
use xgrove::model_select::PipelineModel;
use xgrove::report::{
    apply_config_file, canonical_json, emit_report, explain_pipeline, recompute_ledger,
    recompute_report_explainability, run, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "xgrove",
    version,
    about = "Ensemble-tree model selection with built-in explainability"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: split, grid search, explainability scoring,
    /// held-out evaluation and explanation exports.
    Run(RunArgs),
    /// Run the explainer suite on a previously saved model.
    Explain(ExplainArgs),
    /// Recompute the metric formulas from an emitted ledger and verify
    /// the stored values.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// CSV dataset path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Master seed; every randomized stage derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Held-out fraction in [0, 1).
    #[arg(long)]
    test_ratio: Option<f64>,
    /// Cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Grid scoring metric (accuracy, balanced_accuracy, sensitivity,
    /// specificity, precision, f1).
    #[arg(long)]
    scoring: Option<String>,
    /// Skip the feature-selection stage (every classifier sees all
    /// features).
    #[arg(long)]
    no_feature_selection: bool,
    /// Drop a column before the pipeline runs (repeatable).
    #[arg(long = "drop-feature")]
    drop_feature: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Key = value config file; overrides the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ExplainArgs {
    /// Serialized pipeline model (model.json from a run).
    #[arg(long)]
    model: PathBuf,
    /// CSV dataset path.
    #[arg(long)]
    data: PathBuf,
    /// Seed for the randomized explainers and the split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Held-out fraction used to pick the evaluation rows.
    #[arg(long, default_value_t = 0.3)]
    test_ratio: f64,
    /// Explainers to run (comma-separated; default all).
    #[arg(long)]
    explainers: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "xgrove-explain")]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// candidates.json or report.json from a run.
    #[arg(long)]
    ledger: PathBuf,
    /// Write the recomputed table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comparison tolerance; ledgers store floats at 6 decimals, so the
    /// default sits just above that rounding noise.
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
}

fn build_run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(data) = &args.data {
        config.data_path = data.clone();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(ratio) = args.test_ratio {
        config.test_ratio = ratio;
    }
    if let Some(folds) = args.folds {
        config.folds = folds;
    }
    if let Some(scoring) = &args.scoring {
        config.scoring = scoring.parse::<MetricName>()?;
    }
    if args.no_feature_selection {
        config.grid.feature_selection = false;
    }
    config.drop_features = args.drop_feature.clone();
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)?;
        apply_config_file(&mut config, &text)?;
    }
    config.validate()?;
    Ok(config)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let config = build_run_config(args)?;
    if !config.data_path.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("data file '{}' not found", config.data_path.display()),
        )));
    }
    log::info!(
        "running grid over {} with seed {}",
        config.data_path.display(),
        config.seed
    );
    let outcome = match run(&config) {
        Ok(outcome) => outcome,
        Err(e) => {
            // Leave a partial report recording the failure (best effort).
            #[derive(serde::Serialize)]
            struct FailureReport<'a> {
                config: &'a RunConfig,
                failure: String,
            }
            if std::fs::create_dir_all(&config.out_dir).is_ok() {
                let record = FailureReport {
                    config: &config,
                    failure: e.to_string(),
                };
                if let Ok(text) = canonical_json(&record) {
                    let _ = std::fs::write(config.out_dir.join("report.json"), text);
                }
            }
            return Err(e);
        }
    };
    let manifest = emit_report(&outcome, &config.out_dir)?;
    println!(
        "evaluated {} candidates over {} train / {} test rows",
        outcome.report.n_candidates,
        outcome.report.split.train_rows,
        outcome.report.split.test_rows
    );
    for row in &outcome.report.classifier_rows {
        println!(
            "  {:<18} cv_bacc {:.3}  test_bacc {:.3}  I {:.2} F {:.2} FIR {:.2}  ({} features)",
            row.classifier,
            row.cv.balanced_accuracy,
            row.test.balanced_accuracy,
            row.explainability.interpretability,
            row.explainability.fidelity,
            row.explainability.fir,
            row.selected_count
        );
    }
    println!(
        "balanced pick: {} (FIR {:.3}) with features {:?}",
        outcome.report.fir_balanced.classifier,
        outcome.report.fir_balanced.fir,
        outcome.report.fir_balanced.selected_features
    );
    println!(
        "wrote {} files to {}",
        manifest.files.len() + 1,
        config.out_dir.display()
    );
    Ok(())
}

fn cmd_explain(args: &ExplainArgs) -> Result<()> {
    let model_text = std::fs::read_to_string(&args.model)?;
    let pipeline = PipelineModel::from_json(&model_text)?;
    let ds = xgrove::data::load_csv(&args.data, &pipeline.schema)?;
    let split = stratified_split(&ds, args.test_ratio, args.seed)?;
    let mut config = RunConfig::default();
    config.seed = args.seed;
    config.test_ratio = args.test_ratio;
    if let Some(list) = &args.explainers {
        config.explainers = list
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
    }
    config.validate()?;
    let bundle = explain_pipeline(&config, &ds, &split, &pipeline)?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(
        args.out.join("explanations.json"),
        canonical_json(&bundle)?,
    )?;
    println!(
        "explained {} features; wrote {}",
        bundle.model_features.len(),
        args.out.join("explanations.json").display()
    );
    if let Some(gini) = &bundle.gini {
        for entry in gini.entries.iter().take(5) {
            println!("  gini {:<24} {:.4} ± {:.4}", entry.feature, entry.weight, entry.std);
        }
    }
    Ok(())
}

fn cmd_metrics(args: &MetricsArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.ledger)?;
    // A report carries classifier rows; a ledger is a candidate array.
    let (output, mismatches) = if text.trim_start().starts_with('[') {
        recompute_ledger(&text, args.tolerance)?
    } else {
        let mismatches = recompute_report_explainability(&text, args.tolerance)?;
        (
            format!("explainability rows checked; {mismatches} mismatch(es)\n"),
            mismatches,
        )
    };
    match &args.out {
        Some(path) => std::fs::write(path, &output)?,
        None => print!("{output}"),
    }
    if mismatches > 0 {
        return Err(Error::Argument(format!(
            "{mismatches} stored value(s) disagree with the recomputed formulas"
        )));
    }
    println!("all stored metrics match the recomputed formulas");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Explain(args) => cmd_explain(args),
        Command::Metrics(args) => cmd_metrics(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
