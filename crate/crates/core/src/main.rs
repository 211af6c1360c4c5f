use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gaal_core::bench::{report_stats, run_bench, BenchGrid, BenchmarkReport, StatsBlock, DEFAULT_Q_ALPHA};
use gaal_core::detector::{read_table, scores_csv, telemetry_csv};
use gaal_core::{fit_detector, gen_synthetic, DetectorKind, Error, Family, ModelFile, Result, RunConfig, SynthSpec};

/// Outlier detection with generative adversarial active learning.
///
/// Exit codes: 0 success, 2 usage or input error, 3 numeric failure during training.
#[derive(Parser)]
#[command(name = "gaal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset as CSV.
    Synth(SynthArgs),
    /// Train a detector and write the model file and telemetry.
    Fit(FitArgs),
    /// Score a dataset with a saved model.
    Score(ScoreArgs),
    /// Run a datasets × detectors × seeds grid and report AUCs and rank statistics.
    Bench(BenchArgs),
    /// Rank statistics for an existing AUC report or a list of average ranks.
    Stats(StatsArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    /// Outlier fraction.
    #[arg(long, default_value_t = 0.02)]
    rate: f64,
    /// Fraction of uniform noise dimensions.
    #[arg(long, default_value_t = 0.0)]
    irrelevant: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short = 'o', long = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Dataset CSV; overrides `paths.dataset`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Overrides the config's detector.
    #[arg(long)]
    detector: Option<DetectorKind>,
    /// Overrides the first entry of `seeds`.
    #[arg(long)]
    seed: Option<u64>,
    /// Model file; overrides `paths.model`.
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
    /// Telemetry CSV; overrides `paths.telemetry`.
    #[arg(long)]
    telemetry: Option<PathBuf>,
    /// Training-set scores CSV; overrides `paths.scores`.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Ground-truth column, default `label` when present.
    #[arg(long)]
    label_column: Option<String>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(short = 'o', long = "out")]
    out: PathBuf,
    #[arg(long)]
    label_column: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON grid: datasets, detectors, seeds, optional q_alpha and chi2_critical.
    #[arg(long)]
    grid: PathBuf,
    /// Report CSV `dataset,algorithm,seed,auc,seconds`.
    #[arg(short = 'o', long = "out")]
    out: PathBuf,
    /// Also write the stats block here.
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Report CSV produced by `bench`.
    #[arg(long, conflicts_with = "avg_ranks", required_unless_present = "avg_ranks")]
    report: Option<PathBuf>,
    /// Comma-separated average ranks, one per algorithm.
    #[arg(long, value_delimiter = ',', requires = "datasets")]
    avg_ranks: Option<Vec<f64>>,
    /// Number of datasets behind `--avg-ranks`.
    #[arg(long)]
    datasets: Option<usize>,
    /// Comma-separated algorithm names for `--avg-ranks`.
    #[arg(long, value_delimiter = ',')]
    names: Option<Vec<String>>,
    /// Studentized-range constants for the Nemenyi critical difference.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_Q_ALPHA)]
    q: Vec<f64>,
    /// Friedman critical value to compare against.
    #[arg(long)]
    chi2_critical: Option<f64>,
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Fit(a) => fit(a),
        Command::Score(a) => score(a),
        Command::Bench(a) => bench(a),
        Command::Stats(a) => stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        irrelevant_ratio: a.irrelevant,
        outlier_rate: a.rate,
        seed: a.seed,
        ..SynthSpec::new(a.family, a.n, a.d)
    };
    let ds = gen_synthetic(&spec)?;
    write(&a.out, &ds.to_csv_string())?;
    println!("n={} d={} outliers={}", ds.n(), ds.d(), ds.outlier_count().unwrap_or(0));
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(d) = a.detector {
        cfg.spec.detector = d;
        cfg.spec.validate()?;
    }
    let seed = a.seed.unwrap_or(cfg.seeds[0]);
    let dataset = a
        .dataset
        .or(cfg.paths.dataset.clone())
        .ok_or_else(|| Error::InvalidInput("no dataset: pass --dataset or set paths.dataset".into()))?;
    let model_path = a
        .out
        .or(cfg.paths.model.clone())
        .ok_or_else(|| Error::InvalidInput("no model path: pass -o or set paths.model".into()))?;
    let table = read_table(&dataset, a.label_column.as_deref())?;
    let data = gaal_core::Dataset::from_raw(table.features, table.labels, gaal_core::Provenance::File(dataset))?;

    let outcome = fit_detector(&cfg.spec, &data, seed)?;
    write(&model_path, &outcome.model.to_json()?)?;
    if let Some(p) = a.telemetry.or(cfg.paths.telemetry) {
        write(&p, &telemetry_csv(&outcome.telemetry))?;
    }
    if let Some(p) = a.scores.or(cfg.paths.scores) {
        write(&p, &scores_csv(&outcome.scores))?;
    }
    let last_auc = outcome.telemetry.iter().rev().find_map(|r| r.auc);
    match last_auc {
        Some(auc) => println!(
            "{} seed={seed} epochs={} final_auc={auc:.4}",
            cfg.spec.detector,
            outcome.telemetry.len()
        ),
        None => println!("{} seed={seed} epochs={}", cfg.spec.detector, outcome.telemetry.len()),
    }
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    let model = ModelFile::load(&a.model)?;
    let table = read_table(&a.dataset, a.label_column.as_deref())?;
    let scores = model.score_raw(&table.features)?;
    write(&a.out, &scores_csv(&scores))?;
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let grid = BenchGrid::load(&a.grid)?;
    let report = run_bench(&grid, |w| eprintln!("warning: {w}"))?;
    write(&a.out, &report.to_csv())?;
    if let Some(block) = report_stats(&report, &grid.q_alpha, grid.chi2_critical)? {
        let text = block.render();
        print!("{text}");
        if let Some(p) = &a.stats_out {
            write(p, &text)?;
        }
    }
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let block = match (&a.report, a.avg_ranks) {
        (Some(path), _) => {
            let report = BenchmarkReport::from_csv(&gaal_core::dataset::read_text(path)?)?;
            report_stats(&report, &a.q, a.chi2_critical)?
                .ok_or_else(|| Error::InvalidInput("report has fewer than two algorithms".into()))?
        }
        (None, Some(ranks)) => {
            let names = a
                .names
                .unwrap_or_else(|| (1..=ranks.len()).map(|i| format!("A{i}")).collect());
            let n = a.datasets.unwrap_or_default();
            StatsBlock::from_ranks(names, ranks, n, n, &a.q, a.chi2_critical)?
        }
        (None, None) => unreachable!("clap requires --report or --avg-ranks"),
    };
    let text = block.render();
    print!("{text}");
    if let Some(p) = &a.out {
        write(p, &text)?;
    }
    Ok(())
}
