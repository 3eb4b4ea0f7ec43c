use super::{
    Cli, Command, DecideArgs, EvalArgs, FileFormat, FitArgs, InputArgs, MethodArg, PlotArgs, PlotFormatArg,
    SelectorArg, SynthArgs, TemperatureArgs,
};
use crate::cli::CliError;
use calibkit::decision::{
    binary_threshold, decide_all, implied_threshold, realised_cost, sample_constrained_costs, BinaryCosts,
};
use calibkit::fit::{fit_temperature, fit_temperature_grid, geometric_grid, FitConfig, FitResult};
use calibkit::io::{self, DatasetFormat, DatasetHeader, IoError, LoadedDataset, Report};
use calibkit::metrics::{
    auc_ovr, balanced_accuracy, classwise_ece, ece_binary, BinningConfig, LogitRegion, MalignancySplit,
    MetricError,
};
use calibkit::reliability::{
    render_reliability, reliability_report, PlotFormat, ReliabilityConfig, MIN_REPLICATES,
};
use calibkit::rng::substream;
use calibkit::synth::{self, SynthMode, SynthSpec};
use calibkit::{ClassTaxonomy, CostMatrix, SubsetSelector, Temperature};
use serde::Serialize;
use std::path::{Path, PathBuf};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(args) => cmd_synth(args, cli.seed),
        Command::Fit(args) => cmd_fit(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Plot(args) => cmd_plot(args, cli.seed),
        Command::Decide(args) => cmd_decide(args, cli.seed),
    }
}

fn to_format(format: Option<FileFormat>, path: &Path) -> DatasetFormat {
    match format {
        Some(FileFormat::Csv) => DatasetFormat::Csv,
        Some(FileFormat::Jsonl) => DatasetFormat::Jsonl,
        None => DatasetFormat::from_path(path),
    }
}

fn load(input: &InputArgs) -> Result<(LoadedDataset, String), CliError> {
    let loaded = io::read_dataset(&input.input, to_format(input.input_format, &input.input))?;
    let digest = io::file_digest(&input.input)?;
    Ok((loaded, digest))
}

fn check_positive(flag: &'static str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::flag(flag, format!("must be finite and > 0, got {v}")))
    }
}

fn check_temperature(flag: &'static str, v: f64) -> Result<Temperature, CliError> {
    check_positive(flag, v)?;
    Ok(Temperature::new(v)?)
}

fn check_bins(bins: usize) -> Result<BinningConfig, CliError> {
    BinningConfig::new(bins).map_err(|_| CliError::flag("bins", format!("must be >= 2, got {bins}")))
}

/// Reads `results.temperature` from a `fit` report.
fn read_fit_temperature(flag: &'static str, path: &Path) -> Result<Temperature, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(IoError::Json)?;
    let t = value
        .pointer("/results/temperature")
        .and_then(serde_json::Value::as_f64)
        .ok_or_else(|| CliError::flag(flag, format!("{} has no results.temperature", path.display())))?;
    check_temperature(flag, t)
}

fn resolve_temperature(
    value: Option<f64>,
    value_flag: &'static str,
    report: Option<&PathBuf>,
    report_flag: &'static str,
) -> Result<Option<Temperature>, CliError> {
    match (value, report) {
        (Some(v), _) => check_temperature(value_flag, v).map(Some),
        (None, Some(path)) => read_fit_temperature(report_flag, path).map(Some),
        (None, None) => Ok(None),
    }
}

fn supplied_temperature(t: &TemperatureArgs) -> Result<Option<Temperature>, CliError> {
    resolve_temperature(t.temperature, "temperature", t.t_report.as_ref(), "t-report")
}

fn cmd_synth(args: &SynthArgs, seed: u64) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(CliError::flag("n", "must be >= 1"));
    }
    if args.classes < 2 {
        return Err(CliError::flag("classes", format!("must be >= 2, got {}", args.classes)));
    }
    check_positive("scale", args.scale)?;
    for (flag, v) in [
        ("scale-neg", args.scale_neg),
        ("scale-pos", args.scale_pos),
        ("scale-benign", args.scale_benign),
        ("scale-malignant", args.scale_malignant),
    ] {
        if let Some(v) = v {
            check_positive(flag, v)?;
        }
    }
    let k = args.classes;
    let binary = k == 2;
    if binary && args.scale_benign.is_some() {
        return Err(CliError::flag("scale-benign", "needs --classes >= 3"));
    }
    if !binary && args.scale_neg.is_some() {
        return Err(CliError::flag("scale-neg", "needs --classes 2"));
    }

    let mut spec = if binary {
        SynthSpec::binary(args.n, args.scale, seed)
    } else {
        SynthSpec::multiclass(args.n, k, args.scale, seed)
    };
    if let Some(priors) = &args.priors {
        if priors.len() != k {
            return Err(CliError::flag("priors", format!("expected {k} values, got {}", priors.len())));
        }
        spec.class_priors = priors.clone();
    }
    if let Some(sep) = &args.separation {
        if sep.len() != k {
            return Err(CliError::flag("separation", format!("expected {k} values, got {}", sep.len())));
        }
        spec.separation = sep.clone();
    }
    spec.validate()?;

    let names = match &args.class_names {
        Some(names) if names.len() != k => {
            return Err(CliError::flag("class-names", format!("expected {k} names, got {}", names.len())))
        }
        Some(names) => names.clone(),
        None if binary => ClassTaxonomy::binary().names().to_vec(),
        None => (0..k).map(|c| format!("class{c}")).collect(),
    };
    let taxonomy = match &args.malignancy {
        Some(flags) if flags.len() != k => {
            return Err(CliError::flag("malignancy", format!("expected {k} flags, got {}", flags.len())))
        }
        Some(flags) => Some(ClassTaxonomy::new(names.clone(), flags.clone())?),
        None if binary => Some(ClassTaxonomy::new(names.clone(), ClassTaxonomy::binary().malignancy().to_vec())?),
        None => None,
    };

    let (dataset, oracle) = match (args.scale_neg, args.scale_pos, args.scale_benign, args.scale_malignant) {
        (Some(neg), Some(pos), _, _) => synth::generate_region_miscalibrated(&spec, neg, pos)?,
        (_, _, Some(ben), Some(mal)) => synth::generate_group_miscalibrated(
            &spec,
            taxonomy.as_ref().expect("clap requires --malignancy"),
            ben,
            mal,
        )?,
        _ => synth::generate(&spec)?,
    };
    debug_assert_eq!(matches!(spec.mode, SynthMode::Binary), dataset.is_binary());

    let oracle_path = args.oracle.clone().unwrap_or_else(|| {
        let mut name = args.out.as_os_str().to_owned();
        name.push(".oracle.csv");
        PathBuf::from(name)
    });
    let format = to_format(args.format, &args.out);
    let header = match &taxonomy {
        Some(tax) => DatasetHeader::for_dataset(&dataset).with_taxonomy(tax),
        None => DatasetHeader::for_dataset(&dataset).with_class_names(names),
    };
    io::write_dataset(&args.out, &dataset, &header, format)?;
    io::write_oracle(&oracle_path, &oracle)?;
    println!(
        "wrote {} examples to {} (oracle: {})",
        dataset.len(),
        args.out.display(),
        oracle_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct FitReportConfig {
    selector: &'static str,
    method: &'static str,
    t_lo: f64,
    t_hi: f64,
    tolerance: f64,
    max_iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_points: Option<usize>,
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let config = FitConfig {
        t_lo: args.t_lo,
        t_hi: args.t_hi,
        tolerance: args.tolerance,
        max_iterations: args.max_iterations,
    };
    check_positive("t-lo", args.t_lo)?;
    check_positive("t-hi", args.t_hi)?;
    if args.t_lo >= args.t_hi {
        return Err(CliError::flag("t-hi", format!("must exceed --t-lo ({} >= {})", args.t_lo, args.t_hi)));
    }
    check_positive("tolerance", args.tolerance)?;
    if args.max_iterations == 0 {
        return Err(CliError::flag("max-iterations", "must be >= 1"));
    }
    if args.method == MethodArg::Grid && args.grid_points < 2 {
        return Err(CliError::flag("grid-points", format!("must be >= 2, got {}", args.grid_points)));
    }

    let (loaded, digest) = load(&args.input)?;
    let selector = match args.selector {
        SelectorArg::All => SubsetSelector::All,
        SelectorArg::NegativeLogit => SubsetSelector::NegativeLogit,
        SelectorArg::PredictedBenign => SubsetSelector::PredictedBenign(loaded.require_taxonomy()?.clone()),
    };
    let result: FitResult = match args.method {
        MethodArg::GoldenSection => fit_temperature(&loaded.dataset, &selector, &config)?,
        MethodArg::Grid => fit_temperature_grid(
            &loaded.dataset,
            &selector,
            &geometric_grid(args.t_lo, args.t_hi, args.grid_points),
        )?,
    };
    let report_config = FitReportConfig {
        selector: selector.name(),
        method: match args.method {
            MethodArg::GoldenSection => "golden_section",
            MethodArg::Grid => "grid",
        },
        t_lo: args.t_lo,
        t_hi: args.t_hi,
        tolerance: args.tolerance,
        max_iterations: args.max_iterations,
        grid_points: (args.method == MethodArg::Grid).then_some(args.grid_points),
    };
    io::write_report(&Report::new("fit", digest, report_config, &result), &args.out)?;
    println!("{}", result.temperature.value());
    Ok(())
}

#[derive(Serialize)]
struct EvalReportConfig {
    bins: usize,
    temperature: Option<f64>,
    t_star: Option<f64>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum EvalMetrics {
    Binary {
        ece_neg: Option<f64>,
        ece_pos: Option<f64>,
        balanced_accuracy: f64,
        auc: f64,
    },
    Multiclass {
        ece_benign: Option<f64>,
        ece_malignant: Option<f64>,
        balanced_accuracy: f64,
        auc: f64,
    },
}

#[derive(Serialize)]
struct EvalRow {
    method: &'static str,
    temperature: f64,
    #[serde(flatten)]
    metrics: EvalMetrics,
}

#[derive(Serialize)]
struct EvalResults {
    task: &'static str,
    n: usize,
    rows: Vec<EvalRow>,
}

/// Metric value, or `None` with a warning when its region holds no examples.
fn allow_empty<T>(r: Result<T, MetricError>) -> Result<Option<T>, CliError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e @ (MetricError::EmptyRegion(_) | MetricError::EmptySplit(_))) => {
            log::warn!("{e}; reporting null");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let bins = check_bins(args.bins)?;
    let t = supplied_temperature(&args.t)?;
    let t_star = resolve_temperature(args.t_star, "t-star", args.t_star_report.as_ref(), "t-star-report")?;

    let (loaded, digest) = load(&args.input)?;
    let ds = &loaded.dataset;
    let taxonomy = if ds.is_binary() {
        None
    } else {
        Some(loaded.require_taxonomy()?)
    };
    let bal_acc = balanced_accuracy(ds, loaded.taxonomy.as_ref())?;

    let methods = [("none", Some(Temperature::ONE)), ("temp_scaling_t", t), ("temp_scaling_t_star", t_star)];
    let mut rows = Vec::new();
    for (method, temp) in methods {
        let Some(temp) = temp else { continue };
        let auc = auc_ovr(ds, temp)?;
        let metrics = match taxonomy {
            None => EvalMetrics::Binary {
                ece_neg: allow_empty(ece_binary(ds, temp, LogitRegion::LogitNegative, bins))?.map(|r| r.value),
                ece_pos: allow_empty(ece_binary(ds, temp, LogitRegion::LogitNonNegative, bins))?.map(|r| r.value),
                balanced_accuracy: bal_acc,
                auc,
            },
            Some(tax) => EvalMetrics::Multiclass {
                ece_benign: allow_empty(classwise_ece(ds, tax, temp, MalignancySplit::PredictedBenign, bins))?
                    .map(|r| r.value),
                ece_malignant: allow_empty(classwise_ece(ds, tax, temp, MalignancySplit::PredictedMalignant, bins))?
                    .map(|r| r.value),
                balanced_accuracy: bal_acc,
                auc,
            },
        };
        rows.push(EvalRow {
            method,
            temperature: temp.value(),
            metrics,
        });
    }

    print_eval_table(&rows, taxonomy.is_none());
    let config = EvalReportConfig {
        bins: args.bins,
        temperature: t.map(Temperature::value),
        t_star: t_star.map(Temperature::value),
    };
    let results = EvalResults {
        task: if taxonomy.is_none() { "binary" } else { "multiclass" },
        n: ds.len(),
        rows,
    };
    io::write_report(&Report::new("eval", digest, config, results), &args.out)?;
    Ok(())
}

fn print_eval_table(rows: &[EvalRow], binary: bool) {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    let (a, b) = if binary { ("ECE(z<0)", "ECE(z>=0)") } else { ("ECE_Ben", "ECE_Mal") };
    println!(
        "{:<20} {:>10} {:>10} {:>10} {:>8} {:>8}",
        "method", "T", a, b, "BalAcc", "AUC"
    );
    for row in rows {
        let (e1, e2, acc, auc) = match &row.metrics {
            EvalMetrics::Binary {
                ece_neg,
                ece_pos,
                balanced_accuracy,
                auc,
            } => (*ece_neg, *ece_pos, *balanced_accuracy, *auc),
            EvalMetrics::Multiclass {
                ece_benign,
                ece_malignant,
                balanced_accuracy,
                auc,
            } => (*ece_benign, *ece_malignant, *balanced_accuracy, *auc),
        };
        println!(
            "{:<20} {:>10.4} {:>10} {:>10} {:>8.4} {:>8.4}",
            row.method,
            row.temperature,
            fmt(e1),
            fmt(e2),
            acc,
            auc
        );
    }
}

#[derive(Serialize)]
struct PlotReportConfig {
    bins: usize,
    n_boot: usize,
    seed: u64,
    temperatures: Vec<f64>,
}

#[derive(Serialize)]
struct PlotSummary {
    file: String,
    temperature: f64,
    non_empty_bins: usize,
    consistent_bins: usize,
    bins: Vec<calibkit::reliability::ReliabilityBin>,
}

fn cmd_plot(args: &PlotArgs, seed: u64) -> Result<(), CliError> {
    let bins = check_bins(args.bins)?;
    if args.n_boot < MIN_REPLICATES {
        return Err(CliError::flag(
            "n-boot",
            format!("must be >= {MIN_REPLICATES}, got {}", args.n_boot),
        ));
    }
    if args.prefix.is_empty() || args.prefix.contains(['/', '\\']) {
        return Err(CliError::flag("prefix", "must be a non-empty file name without separators"));
    }
    let mut temps = args
        .temperature
        .iter()
        .map(|&t| check_temperature("temperature", t))
        .collect::<Result<Vec<_>, _>>()?;
    for path in &args.t_report {
        temps.push(read_fit_temperature("t-report", path)?);
    }
    if temps.is_empty() {
        temps.push(Temperature::ONE);
    }

    let (loaded, digest) = load(&args.input)?;
    if !loaded.dataset.is_binary() {
        return Err(CliError::Usage(
            "plot needs a binary dataset (binary_mode=true)".into(),
        ));
    }
    let config = ReliabilityConfig {
        bins,
        n_boot: args.n_boot,
        seed,
    };
    let (format, ext) = match args.format {
        PlotFormatArg::Svg => (PlotFormat::Svg, "svg"),
        PlotFormatArg::Csv => (PlotFormat::Csv, "csv"),
    };
    std::fs::create_dir_all(&args.out_dir).map_err(|source| IoError::Io {
        path: args.out_dir.clone(),
        source,
    })?;

    let mut summaries = Vec::new();
    for (i, &t) in temps.iter().enumerate() {
        let report = reliability_report(&loaded.dataset, t, &config)?;
        let file = format!("{}-{i}.{ext}", args.prefix);
        let path = args.out_dir.join(&file);
        render_reliability(&report, format, &path)?;
        let non_empty = report.bins.iter().filter(|b| b.count > 0).count();
        let consistent = report.bins.iter().filter(|b| b.is_consistent() == Some(true)).count();
        println!(
            "T={}: {consistent}/{non_empty} bins inside consistency bars -> {}",
            t.value(),
            path.display()
        );
        summaries.push(PlotSummary {
            file,
            temperature: t.value(),
            non_empty_bins: non_empty,
            consistent_bins: consistent,
            bins: report.bins,
        });
    }
    if let Some(path) = &args.report {
        let config = PlotReportConfig {
            bins: args.bins,
            n_boot: args.n_boot,
            seed,
            temperatures: temps.iter().map(|t| t.value()).collect(),
        };
        io::write_report(&Report::new("plot", digest, config, summaries), path)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DecideReportConfig {
    temperature: f64,
    cost_source: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    constraint: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct CostsEcho {
    action_names: Vec<String>,
    class_names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl CostsEcho {
    fn new(costs: &CostMatrix, class_names: &[String]) -> Self {
        Self {
            action_names: costs.action_names().to_vec(),
            class_names: class_names.to_vec(),
            rows: costs.rows().map(<[f64]>::to_vec).collect(),
        }
    }
}

#[derive(Serialize)]
struct DecisionResults {
    costs: CostsEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    expected_cost: f64,
    actions: Vec<usize>,
}

#[derive(Serialize)]
struct SampledDraw {
    threshold: Option<f64>,
    expected_cost: f64,
    costs: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct SampledResults {
    class_names: Vec<String>,
    mean_expected_cost: f64,
    min_expected_cost: f64,
    max_expected_cost: f64,
    draws: Vec<SampledDraw>,
}

fn cmd_decide(args: &DecideArgs, seed: u64) -> Result<(), CliError> {
    let t = supplied_temperature(&args.t)?.unwrap_or_else(|| {
        log::info!("no temperature supplied; deciding on unscaled logits (T = 1)");
        Temperature::ONE
    });
    if args.sample_costs.is_some() && args.n == 0 {
        return Err(CliError::flag("n", "must be >= 1"));
    }
    let binary_costs = match (args.c_fp, args.c_fn) {
        (Some(fp), Some(fn_)) => Some(
            BinaryCosts::new(fp, fn_, args.c_tp, args.c_tn)
                .map_err(|e| CliError::flag("c-fp", e.to_string()))?,
        ),
        _ => None,
    };
    if args.costs.is_none() && binary_costs.is_none() && args.sample_costs.is_none() {
        return Err(CliError::Usage(
            "one of --costs, --c-fp/--c-fn or --sample-costs is required".into(),
        ));
    }

    let (loaded, digest) = load(&args.input)?;
    let ds = &loaded.dataset;

    if let Some(constraint) = args.sample_costs {
        let taxonomy = if ds.is_binary() {
            loaded.taxonomy.clone().unwrap_or_else(ClassTaxonomy::binary)
        } else {
            loaded.require_taxonomy()?.clone()
        };
        let mut draws = Vec::with_capacity(args.n);
        for i in 0..args.n {
            let mut rng = substream(seed, i as u64);
            let costs = sample_constrained_costs(constraint, &taxonomy, &mut rng);
            let actions = decide_all(ds, t, &costs)?;
            draws.push(SampledDraw {
                threshold: implied_threshold(&costs),
                expected_cost: realised_cost(&actions, ds.labels(), &costs),
                costs: costs.rows().map(<[f64]>::to_vec).collect(),
            });
        }
        let values: Vec<f64> = draws.iter().map(|d| d.expected_cost).collect();
        let results = SampledResults {
            class_names: taxonomy.names().to_vec(),
            mean_expected_cost: calibkit::scaling::pairwise_sum(&values) / values.len() as f64,
            min_expected_cost: values.iter().copied().fold(f64::INFINITY, f64::min),
            max_expected_cost: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            draws,
        };
        println!(
            "{} cost draws ({}): mean expected cost {:.6} [{:.6}, {:.6}]",
            args.n,
            constraint.name(),
            results.mean_expected_cost,
            results.min_expected_cost,
            results.max_expected_cost
        );
        let config = DecideReportConfig {
            temperature: t.value(),
            cost_source: "sampled",
            constraint: Some(constraint.name()),
            draws: Some(args.n),
            seed: Some(seed),
        };
        io::write_report(&Report::new("decide", digest, config, results), &args.out)?;
        return Ok(());
    }

    let (costs, class_names, threshold, source) = if let Some(bc) = binary_costs {
        if !ds.is_binary() {
            return Err(CliError::flag("c-fp", "binary costs need a binary dataset; use --costs"));
        }
        let names = loaded
            .taxonomy
            .as_ref()
            .map_or_else(|| ClassTaxonomy::binary().names().to_vec(), |t| t.names().to_vec());
        (bc.cost_matrix(), names, Some(binary_threshold(&bc)?), "binary")
    } else {
        let path = args.costs.as_ref().expect("checked above");
        let costs = io::read_cost_matrix(path, Some(&loaded.class_names))?;
        let threshold = implied_threshold(&costs);
        (costs, loaded.class_names.clone(), threshold, "file")
    };
    let actions = decide_all(ds, t, &costs)?;
    let expected_cost = realised_cost(&actions, ds.labels(), &costs);
    println!("empirical expected cost: {expected_cost}");
    if let Some(th) = threshold {
        println!("decision threshold: {th}");
    }
    let config = DecideReportConfig {
        temperature: t.value(),
        cost_source: source,
        constraint: None,
        draws: None,
        seed: None,
    };
    let results = DecisionResults {
        costs: CostsEcho::new(&costs, &class_names),
        threshold,
        expected_cost,
        actions,
    };
    io::write_report(&Report::new("decide", digest, config, results), &args.out)?;
    Ok(())
}
