use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use streamflow::datapipe::{load_csv, repeated_splits, write_csv, DailyRecord, Schema, SplitMode, SynthConfig};
use streamflow::harness::{
    cell_seed, compare_all, fit_model, lookback_sweep, prepare, sweep_argmin, write_sweep_csv, ExperimentConfig,
    ModelKind, TrainedModel,
};
use streamflow::modelfile::ModelFile;
use streamflow::training::write_history;
use streamflow::{Error, Result};

#[derive(Parser)]
#[command(name = "streamflow", version, about = "Daily streamflow forecasting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic basin series and its schema.
    Generate {
        #[arg(long)]
        days: usize,
        #[arg(long)]
        features: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Schema destination; defaults to `<out>.schema`.
        #[arg(long)]
        schema_out: Option<PathBuf>,
    },
    /// Fit one model on the first split of the data and save it.
    Train {
        #[arg(long, value_parser = parse_kind)]
        model: ModelKind,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 7)]
        lookback: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss history for CNN and LSTM.
        #[arg(long)]
        history: Option<PathBuf>,
        #[command(flatten)]
        tuning: TuningArgs,
    },
    /// Score a saved model on the test part of a split.
    Evaluate {
        #[arg(long)]
        model_file: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Split seed; defaults to the seed the model was trained with.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run all five models over repeated splits and write the comparison table.
    Compare {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 7)]
        lookback: usize,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Table destination; the key-value report goes to `<out>.kv`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        tuning: TuningArgs,
    },
    /// Mean test error of one model for each lookback in a grid.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        /// `a..b` (inclusive) or a comma-separated list.
        #[arg(long, default_value = "1..14", value_parser = parse_grid)]
        grid: Grid,
        #[arg(long, value_parser = parse_kind, default_value = "lstm")]
        model: ModelKind,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        tuning: TuningArgs,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Args)]
struct TuningArgs {
    /// Experiment settings as `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Clone, Debug)]
struct Grid(Vec<usize>);

fn parse_kind(s: &str) -> std::result::Result<ModelKind, String> {
    ModelKind::parse(s).map_err(|e| e.to_string())
}

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let number = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("`{v}` is not a lookback"));
    let values = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (number(a)?, number(b.trim_start_matches('='))?);
        if a > b {
            return Err(format!("empty range `{s}`"));
        }
        (a..=b).collect()
    } else {
        s.split(',').map(number).collect::<std::result::Result<Vec<_>, _>>()?
    };
    Ok(Grid(values))
}

impl TuningArgs {
    fn resolve(&self, lookback: usize) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Argument(format!("cannot read config {}: {e}", path.display())))?;
                ExperimentConfig::parse(&text)?
            }
            None => ExperimentConfig::default(),
        };
        config.lookback = lookback;
        if let Some(e) = self.max_epochs {
            config.train.max_epochs = e;
        }
        if let Some(p) = self.patience {
            config.train.patience = p;
        }
        Ok(config)
    }
}

fn load(data: &DataArgs) -> Result<(Schema, Vec<DailyRecord>)> {
    let schema = Schema::load(&data.schema)?;
    let series = load_csv(&data.data, &schema)?;
    for gap in &series.gaps {
        eprintln!("warning: {} missing day(s) between {} and {}", gap.missing_days, gap.after, gap.before);
    }
    Ok((schema, series.records))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn dataset_label(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { days, features, seed, out, schema_out } => {
            let synth = SynthConfig::new(days, features, seed);
            let records = synth.generate()?;
            write_csv(&records, &synth.schema(), create(&out)?)?;
            let schema_path = schema_out.unwrap_or_else(|| PathBuf::from(format!("{}.schema", out.display())));
            std::fs::write(&schema_path, synth.schema().to_text())?;
            println!("wrote {days} days to {} (schema {})", out.display(), schema_path.display());
        }
        Command::Train { model, data, lookback, seed, out, history, tuning } => {
            let config = tuning.resolve(lookback)?;
            let (_, records) = load(&data)?;
            let n = records.len().saturating_sub(lookback);
            let split = repeated_splits(n, 1, seed, config.split_mode)?.remove(0);
            let prepared = prepare(&records, lookback, &split)?;
            let (trained, epochs) = fit_model(model, &prepared, &config, cell_seed(seed, 0, model))?;
            trained.to_file(&prepared.stats, lookback, seed, config.split_mode).save(&out)?;
            if let Some(path) = history {
                write_history(&epochs, create(&path)?)?;
            }
            println!(
                "trained {} on {} windows ({} validation, {} test held out); saved {}",
                model.label(),
                prepared.train.len(),
                prepared.val.len(),
                prepared.test.len(),
                out.display()
            );
        }
        Command::Evaluate { model_file, data, seed } => {
            let file = ModelFile::load(&model_file)?;
            let (model, stats) = TrainedModel::from_file(&file)?;
            let lookback: usize = file.meta_parsed("lookback")?;
            let mode = SplitMode::parse(file.require_meta("split_mode")?)?;
            let seed = match seed {
                Some(s) => s,
                None => file.meta_parsed("seed")?,
            };
            let (schema, records) = load(&data)?;
            if schema.features.len() != stats.feature_mean.len() {
                return Err(Error::Schema(format!(
                    "model was trained on {} features, schema lists {}",
                    stats.feature_mean.len(),
                    schema.features.len()
                )));
            }
            let n = records.len().saturating_sub(lookback);
            let split = repeated_splits(n, 1, seed, mode)?.remove(0);
            let err = model.score(&stats, &records, lookback, &split)?;
            println!("{} relative error on {} test windows: {:.4}%", model.kind().label(), split.test.len(), 100.0 * err);
        }
        Command::Compare { data, lookback, repeats, seed, out, tuning } => {
            let config = tuning.resolve(lookback)?;
            let (_, records) = load(&data)?;
            let report = compare_all(&records, &config, repeats, seed, &dataset_label(&data.data))?;
            std::fs::write(&out, report.to_table())?;
            let kv_path = PathBuf::from(format!("{}.kv", out.display()));
            std::fs::write(&kv_path, report.to_kv())?;
            print!("{}", report.to_table());
            println!("wrote {} and {}", out.display(), kv_path.display());
        }
        Command::Sweep { data, grid, model, repeats, seed, out, tuning } => {
            let config = tuning.resolve(grid.0.first().copied().unwrap_or(7))?;
            let (_, records) = load(&data)?;
            let series = lookback_sweep(&records, &grid.0, model, &config, repeats, seed)?;
            write_sweep_csv(&series, create(&out)?)?;
            for (l, e) in &series {
                println!("L={l:>2}  {e:.4}%");
            }
            if let Some(best) = sweep_argmin(&series) {
                println!("lowest error at L={best}");
            }
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
