mod commands;
mod error;

use calibkit::decision::CostConstraint;
use calibkit::Malignancy;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

pub use error::CliError;

/// Temperature scaling and calibration diagnostics for classifier logits.
#[derive(Debug, Parser)]
#[command(name = "calibkit", version)]
pub struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Append a machine-readable JSON error line to stderr on failure.
    #[arg(long, global = true)]
    pub json_errors: bool,

    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic logit dataset with a ground-truth posterior sidecar.
    Synth(SynthArgs),
    /// Fit a temperature on a calibration subset.
    Fit(FitArgs),
    /// Compute the calibration and discrimination panel for T = 1, T and T*.
    Eval(EvalArgs),
    /// Draw reliability diagrams with consistency bars.
    Plot(PlotArgs),
    /// Make expected-cost-minimising decisions.
    Decide(DecideArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FileFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Dataset output path.
    #[arg(long)]
    pub out: PathBuf,

    /// Ground-truth posterior sidecar [default: <out>.oracle.csv].
    #[arg(long)]
    pub oracle: Option<PathBuf>,

    /// Dataset format [default: from the file extension].
    #[arg(long, value_enum)]
    pub format: Option<FileFormat>,

    #[arg(long, default_value_t = 10_000)]
    pub n: usize,

    /// Number of classes; 2 produces a binary scalar-logit dataset.
    #[arg(long, default_value_t = 2)]
    pub classes: usize,

    /// Comma-separated class priors [default: uniform].
    #[arg(long, value_delimiter = ',')]
    pub priors: Option<Vec<f64>>,

    /// Binary: the two class means. Multi-class: per-class mean shift.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub separation: Option<Vec<f64>>,

    /// Miscalibration scale applied to every calibrated logit.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,

    /// Binary: scale for examples with negative calibrated logit.
    #[arg(long, requires = "scale_pos")]
    pub scale_neg: Option<f64>,

    /// Binary: scale for examples with non-negative calibrated logit.
    #[arg(long, requires = "scale_neg")]
    pub scale_pos: Option<f64>,

    /// Multi-class: scale for examples whose calibrated argmax is benign.
    #[arg(long, requires_all = ["scale_malignant", "malignancy"])]
    pub scale_benign: Option<f64>,

    /// Multi-class: scale for examples whose calibrated argmax is malignant.
    #[arg(long, requires = "scale_benign")]
    pub scale_malignant: Option<f64>,

    /// Comma-separated malignancy flags (benign/malignant or b/m), one per class.
    #[arg(long, value_delimiter = ',')]
    pub malignancy: Option<Vec<Malignancy>>,

    /// Comma-separated class names.
    #[arg(long, value_delimiter = ',')]
    pub class_names: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectorArg {
    All,
    NegativeLogit,
    PredictedBenign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    GoldenSection,
    Grid,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Dataset path.
    #[arg(long)]
    pub input: PathBuf,

    /// Dataset format [default: from the file extension].
    #[arg(long, value_enum)]
    pub input_format: Option<FileFormat>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Report output path.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, value_enum, default_value_t = SelectorArg::All)]
    pub selector: SelectorArg,

    #[arg(long, value_enum, default_value_t = MethodArg::GoldenSection)]
    pub method: MethodArg,

    /// Lower end of the temperature bracket.
    #[arg(long, default_value_t = 0.05)]
    pub t_lo: f64,

    /// Upper end of the temperature bracket.
    #[arg(long, default_value_t = 20.0)]
    pub t_hi: f64,

    /// Golden-section stopping width on ln T.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,

    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,

    /// Grid size for `--method grid`.
    #[arg(long, default_value_t = 2001)]
    pub grid_points: usize,
}

/// A temperature given directly or read from a `fit` report.
#[derive(Debug, Args)]
pub struct TemperatureArgs {
    /// Temperature fitted on all calibration examples.
    #[arg(long, conflicts_with = "t_report")]
    pub temperature: Option<f64>,

    /// `fit` report supplying T.
    #[arg(long)]
    pub t_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Report output path.
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub t: TemperatureArgs,

    /// Temperature fitted on the restricted subset.
    #[arg(long, conflicts_with = "t_star_report")]
    pub t_star: Option<f64>,

    /// `fit` report supplying T*.
    #[arg(long)]
    pub t_star_report: Option<PathBuf>,

    #[arg(long, default_value_t = 15)]
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotFormatArg {
    Svg,
    Csv,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Directory receiving one diagram per temperature.
    #[arg(long)]
    pub out_dir: PathBuf,

    /// File name prefix; files are `<prefix>-<i>.<ext>`.
    #[arg(long, default_value = "reliability")]
    pub prefix: String,

    /// Temperatures to plot, in order; repeatable. Defaults to T = 1 when
    /// neither this nor `--t-report` is given.
    #[arg(long)]
    pub temperature: Vec<f64>,

    /// `fit` reports whose temperatures are plotted after `--temperature`; repeatable.
    #[arg(long)]
    pub t_report: Vec<PathBuf>,

    #[arg(long, value_enum, default_value_t = PlotFormatArg::Svg)]
    pub format: PlotFormatArg,

    #[arg(long, default_value_t = 15)]
    pub bins: usize,

    /// Resampling replicates per diagram.
    #[arg(long, default_value_t = 1000)]
    pub n_boot: usize,

    /// Optional JSON summary of every diagram.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecideArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Report output path.
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub t: TemperatureArgs,

    /// Cost matrix CSV with header `action,<class names>`.
    #[arg(long, conflicts_with_all = ["c_fp", "c_fn", "sample_costs"])]
    pub costs: Option<PathBuf>,

    /// Binary: cost of acting malignant on a benign case.
    #[arg(long, requires = "c_fn", conflicts_with = "sample_costs")]
    pub c_fp: Option<f64>,

    /// Binary: cost of acting benign on a malignant case.
    #[arg(long, requires = "c_fp")]
    pub c_fn: Option<f64>,

    /// Binary: cost of acting malignant on a malignant case.
    #[arg(long, default_value_t = 0.0, requires = "c_fp")]
    pub c_tp: f64,

    /// Binary: cost of acting benign on a benign case.
    #[arg(long, default_value_t = 0.0, requires = "c_fp")]
    pub c_tn: f64,

    /// Draw cost matrices from a constrained family instead.
    #[arg(long, value_parser = parse_constraint)]
    pub sample_costs: Option<CostConstraint>,

    /// Number of cost matrices drawn with `--sample-costs`.
    #[arg(long, default_value_t = 100, requires = "sample_costs")]
    pub n: usize,
}

fn parse_constraint(s: &str) -> Result<CostConstraint, String> {
    s.parse()
}

fn init_logging(quiet: bool) {
    let level = if quiet {
        log::LevelFilter::Warn
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .try_init();
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let _ = e.print();
            if std::env::args().any(|a| a == "--json-errors") {
                let message = e.kind().to_string();
                error::report("usage", 1, &message, true);
            }
            return 1;
        }
    };
    init_logging(cli.quiet);
    let json = cli.json_errors;

    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| commands::run(&cli)));
    match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            error::report(e.code(), e.exit_code(), &e.to_string(), json);
            e.exit_code()
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            let e = CliError::Internal(message);
            error::report(e.code(), e.exit_code(), &e.to_string(), json);
            e.exit_code()
        }
    }
}
