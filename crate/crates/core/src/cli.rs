//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bootstrap::bootstrap_compare;
use crate::chart::render_bar_chart;
use crate::data::ScaleMode;
use crate::error::{Error, Result};
use crate::evaluate::{EvalParams, MetricReport};
use crate::filter::{preset, PRESET_NAMES};
use crate::matching::IouThresholds;
use crate::report::{
    comparison_csv, plot_spec, report_to_text, resolve_bank, run_suite, write_report, OutputFormat, SuiteConfig,
};
use crate::synth::{generate, SynthConfig};
use crate::weighted_ap::Integration;

#[derive(Debug, Parser)]
#[command(
    name = "bandap",
    version,
    about = "Scale-wise AP with band-pass filter banks over object scale"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate detection files against ground truth.
    Eval(EvalArgs),
    /// Evaluate several detection files and write an aligned comparison and chart.
    Compare(CompareArgs),
    /// List preset banks or emit one as an editable JSON config.
    Banks(BanksArgs),
    /// Generate a synthetic dataset and optionally bootstrap metric stability.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScaleModeArg {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum IntegrationArg {
    Interp101,
    Trapezoidal,
}

#[derive(Debug, Args)]
struct CommonEval {
    /// COCO annotation JSON.
    #[arg(long)]
    gt: PathBuf,
    /// COCO result JSON; repeat for several methods.
    #[arg(long = "dets", required = true)]
    dets: Vec<PathBuf>,
    /// coco, asap, bandasap, or a bank JSON file.
    #[arg(long, default_value = "bandasap")]
    bank: String,
    #[arg(long, value_enum, default_value = "absolute")]
    scale_mode: ScaleModeArg,
    /// Multiplier for relative scales.
    #[arg(long, default_value_t = 1.0)]
    reference_resolution: f64,
    #[arg(long, default_value_t = 100)]
    max_dets: usize,
    /// `lo:hi:step` or a comma-separated list.
    #[arg(long, default_value = "0.5:0.95:0.05")]
    iou_thrs: String,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Comma-separated category ids.
    #[arg(long, value_delimiter = ',')]
    categories: Option<Vec<u64>>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_enum, default_value = "interp101")]
    integration: IntegrationArg,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonEval,
    /// text, json, csv, svg; comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "json")]
    format: Vec<String>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonEval,
    #[arg(long, value_delimiter = ',', default_value = "json,csv,svg")]
    format: Vec<String>,
    /// Series names, one per --dets (defaults to file stems).
    #[arg(long = "name")]
    names: Vec<String>,
    #[arg(long)]
    title: Option<String>,
    /// Label the chart axis in percent.
    #[arg(long)]
    percent: bool,
}

#[derive(Debug, Args)]
struct BanksArgs {
    /// Preset to emit as JSON.
    #[arg(long)]
    emit: Option<String>,
    /// Write the emitted bank here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// small_skewed, log_normal, log_uniform, or perfect.
    #[arg(long, default_value = "small_skewed")]
    preset: String,
    /// SynthConfig JSON; overrides --preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    images: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Number of bootstrap resamples; 0 skips the bootstrap.
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    /// Banks for the bootstrap; repeatable.
    #[arg(long = "bank")]
    banks: Vec<String>,
    #[arg(long, default_value_t = 100)]
    max_dets: usize,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

/// Parses `0.5:0.95:0.05` or `0.5,0.75`.
pub fn parse_iou_thresholds(s: &str) -> Result<IouThresholds> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::Value(format!("bad IoU threshold {t:?}")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if !(step > 0.0) || hi < lo {
                return Err(Error::Value(format!("bad IoU range {s:?}")));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            (0..n).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect()
        }
        [_] => s.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(Error::Value(format!("bad IoU thresholds {s:?}"))),
    };
    IouThresholds::new(values)
}

fn suite_config(c: &CommonEval, formats: &[String]) -> Result<SuiteConfig> {
    let bank = resolve_bank(&c.bank)?;
    let scale_mode = match c.scale_mode {
        ScaleModeArg::Absolute => ScaleMode::Absolute,
        ScaleModeArg::Relative => ScaleMode::Relative {
            reference_resolution: c.reference_resolution,
        },
    };
    let mut output_formats = formats
        .iter()
        .map(|f| f.parse())
        .collect::<Result<Vec<OutputFormat>>>()?;
    output_formats.sort();
    output_formats.dedup();
    let config = SuiteConfig {
        bank,
        scale_mode,
        params: EvalParams {
            thresholds: parse_iou_thresholds(&c.iou_thrs)?,
            max_dets: c.max_dets,
            categories: c.categories.clone(),
            integration: match c.integration {
                IntegrationArg::Interp101 => Integration::Interpolated(101),
                IntegrationArg::Trapezoidal => Integration::Trapezoidal,
            },
            jobs: c.jobs,
        },
        output_formats,
    };
    config.validate()?;
    Ok(config)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dets".into())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let c = &args.common;
    let config = suite_config(c, &args.format)?;
    let reports = run_suite(&c.gt, &c.dets, &config)?;
    let single = reports.len() == 1;
    for (path, report) in c.dets.iter().zip(&reports) {
        let name = if single {
            "report".to_string()
        } else {
            format!("{}.report", stem(path))
        };
        if config.output_formats.contains(&OutputFormat::Text) {
            print!("{}", report_to_text(report));
        }
        for p in write_report(report, &config.output_formats, &c.out_dir, &name)? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let c = &args.common;
    let config = suite_config(c, &args.format)?;
    if !args.names.is_empty() && args.names.len() != c.dets.len() {
        return Err(Error::Value("give one --name per --dets".into()));
    }
    let reports = run_suite(&c.gt, &c.dets, &config)?;
    let names: Vec<String> = if args.names.is_empty() {
        c.dets.iter().map(|p| stem(p)).collect()
    } else {
        args.names.clone()
    };
    let named: Vec<(String, &MetricReport)> = names.iter().cloned().zip(&reports).collect();
    let report_formats: Vec<OutputFormat> = config
        .output_formats
        .iter()
        .copied()
        .filter(|f| *f != OutputFormat::Svg)
        .collect();
    for (name, report) in &named {
        if config.output_formats.contains(&OutputFormat::Text) {
            println!("== {name}");
            print!("{}", report_to_text(report));
        }
        write_report(report, &report_formats, &c.out_dir, &format!("{name}.report"))?;
    }
    let path = c.out_dir.join("comparison.csv");
    std::fs::write(&path, comparison_csv(&named)).map_err(|e| Error::io(&path, e))?;
    if config.output_formats.contains(&OutputFormat::Svg) {
        let title = args.title.clone().unwrap_or_else(|| config.bank.name().to_string());
        let mut spec = plot_spec(&title, &named)?;
        spec.percent = args.percent;
        render_bar_chart(&spec, &c.out_dir.join("chart.svg"))?;
    }
    eprintln!(
        "wrote comparison of {} reports to {}",
        reports.len(),
        c.out_dir.display()
    );
    Ok(())
}

fn cmd_banks(args: BanksArgs) -> Result<()> {
    let Some(name) = args.emit else {
        for name in PRESET_NAMES {
            let bank = preset(name).expect("listed preset exists");
            let labels: Vec<&str> = bank.filters().iter().map(|f| f.label()).collect();
            println!("{name} ({} bands): {}", bank.len(), labels.join(" "));
        }
        return Ok(());
    };
    let bank = preset(&name).ok_or_else(|| Error::Value(format!("unknown preset {name:?}")))?;
    let mut json = bank.to_json();
    json.push('\n');
    match args.out {
        Some(path) => std::fs::write(&path, json).map_err(|e| Error::io(&path, e)),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut c: SynthConfig =
                serde_json::from_str(&text).map_err(|e| Error::MalformedFile(e.to_string()).in_file(path))?;
            c.seed = args.seed;
            c
        }
        None => SynthConfig::preset(&args.preset, args.seed)
            .ok_or_else(|| Error::Value(format!("unknown synth preset {:?}", args.preset)))?,
    };
    if let Some(n) = args.images {
        config.n_images = n;
    }
    let ds = generate(&config)?;
    let out = &args.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let write = |name: &str, body: String| {
        let p = out.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    write("gt.json", ds.ground_truth_to_json())?;
    write("dets.json", ds.detections_to_json())?;
    eprintln!(
        "wrote {} images, {} objects, {} detections to {}",
        ds.images().len(),
        ds.annotations().len(),
        ds.detections().len(),
        out.display()
    );
    if args.bootstrap > 0 {
        let specs = if args.banks.is_empty() {
            vec!["asap".to_string(), "bandasap".to_string()]
        } else {
            args.banks.clone()
        };
        let banks = specs.iter().map(|s| resolve_bank(s)).collect::<Result<Vec<_>>>()?;
        let params = EvalParams {
            max_dets: args.max_dets,
            jobs: args.jobs,
            ..EvalParams::default()
        };
        for result in bootstrap_compare(&ds, &banks, args.bootstrap, config.seed, &params)? {
            write(&format!("bootstrap_{}.json", result.bank), result.to_json())?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Banks(a) => cmd_banks(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Exit codes: 0 success, 1 usage or input error, 2 internal error.
pub fn cli_main<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
        Err(_) => ExitCode::from(2),
    }
}
