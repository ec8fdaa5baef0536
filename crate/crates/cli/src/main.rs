use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use gpufreq_core::device::read_latency_samples;
use gpufreq_core::freq::mhz_range;
use gpufreq_core::predictor::load_profiles;
use gpufreq_core::{
    fit_dram_latency, frequency_grid, predict, read_measurements_csv, read_predictions_csv,
    read_predictions_json, validate, write_predictions_csv, write_predictions_json,
    write_samples_csv, Comparison, DeviceSpec, ExecutionCase, PredictionRow, ScenarioGenerator,
};

const EXIT_INPUT: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gpufreq",
    version,
    about = "GPU kernel execution time under core/memory clock scaling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the DRAM latency line from microbenchmark samples.
    Fit {
        /// CSV with header core_mhz,mem_mhz,latency_cycles.
        samples: PathBuf,
        /// Device spec to update; the built-in GTX980 spec when omitted.
        #[arg(long)]
        device: Option<PathBuf>,
        /// Where to write the updated spec; defaults to --device.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict execution time over a grid of clock pairs.
    Predict {
        #[arg(long)]
        device: Option<PathBuf>,
        /// Kernel profile JSON (one object or an array); repeatable.
        #[arg(long, required = true)]
        kernel: Vec<PathBuf>,
        /// Core clock range as start:stop:step in MHz.
        #[arg(long, default_value = "400:1000:100")]
        core: String,
        /// Memory clock range as start:stop:step in MHz.
        #[arg(long, default_value = "400:1000:100")]
        mem: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Compare predictions against measured runtimes.
    Validate {
        /// Prediction file written by `predict` (CSV, or JSON by extension).
        predictions: PathBuf,
        /// CSV with header kernel,core_mhz,mem_mhz,seconds.
        measurements: PathBuf,
        /// Report JSON; per-sample rows go next to it as <stem>.samples.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-check every closed-form pipeline shape against the simulator.
    Check {
        #[arg(long)]
        device: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated case names; all six when omitted.
        #[arg(long, value_delimiter = ',')]
        cases: Vec<String>,
        /// Instances per case; 100 for plain cases and 50 for shared ones when omitted.
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Input(anyhow::Error),
    Check(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit {
            samples,
            device,
            out,
        } => run_fit(&samples, device.as_deref(), out.as_deref()),
        Command::Predict {
            device,
            kernel,
            core,
            mem,
            out,
            format,
        } => run_predict(
            device.as_deref(),
            &kernel,
            &core,
            &mem,
            out.as_deref(),
            format,
        ),
        Command::Validate {
            predictions,
            measurements,
            out,
        } => run_validate(&predictions, &measurements, &out),
        Command::Check {
            device,
            seed,
            cases,
            samples,
        } => run_check(device.as_deref(), seed, &cases, samples),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Check(report)) => {
            eprintln!("{report}");
            ExitCode::from(EXIT_CHECK)
        }
    }
}

fn load_device(path: Option<&Path>) -> anyhow::Result<DeviceSpec> {
    match path {
        Some(p) => DeviceSpec::from_json_file(p)
            .with_context(|| format!("reading device spec {}", p.display())),
        None => Ok(DeviceSpec::gtx980()),
    }
}

fn parse_range(text: &str) -> anyhow::Result<Vec<u32>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, step] = parts[..] else {
        bail!("invalid range `{text}`, expected start:stop:step");
    };
    let num = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|_| anyhow!("invalid range `{text}`: `{s}` is not a whole number of MHz"))
    };
    Ok(mhz_range(num(start)?, num(stop)?, num(step)?)?)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn run_fit(samples: &Path, device: Option<&Path>, out: Option<&Path>) -> Result<(), Failure> {
    let out = out
        .or(device)
        .ok_or_else(|| anyhow!("fit needs --out or --device to know where to write the spec"))?;
    let mut spec = load_device(device)?;
    let file = File::open(samples).with_context(|| format!("opening {}", samples.display()))?;
    let points = read_latency_samples(file).with_context(|| samples.display().to_string())?;
    spec.dram_fit = fit_dram_latency(&points).map_err(anyhow::Error::from)?;
    std::fs::write(out, spec.to_json_string().map_err(anyhow::Error::from)?)
        .with_context(|| format!("writing {}", out.display()))?;
    println!("slope      {:.6}", spec.dram_fit.slope);
    println!("intercept  {:.6}", spec.dram_fit.intercept);
    println!("r_squared  {:.6}", spec.dram_fit.r_squared);
    Ok(())
}

fn run_predict(
    device: Option<&Path>,
    kernels: &[PathBuf],
    core: &str,
    mem: &str,
    out: Option<&Path>,
    format: Format,
) -> Result<(), Failure> {
    let spec = load_device(device)?;
    let grid = frequency_grid(&parse_range(core)?, &parse_range(mem)?);
    let mut rows = Vec::new();
    for path in kernels {
        let profiles = load_profiles(path)
            .with_context(|| format!("reading kernel profile {}", path.display()))?;
        for profile in &profiles {
            for &f in &grid {
                let p = predict(&spec, profile, f).map_err(anyhow::Error::from)?;
                rows.push(PredictionRow::from_prediction(&p).map_err(anyhow::Error::from)?);
            }
        }
    }
    let write = |w: &mut dyn Write| -> anyhow::Result<()> {
        match format {
            Format::Csv => write_predictions_csv(&rows, w)?,
            Format::Json => write_predictions_json(&rows, w)?,
        }
        Ok(())
    };
    match out {
        Some(path) => {
            let mut w = create(path)?;
            write(&mut w)?;
            w.flush().context("flushing predictions")?;
        }
        None => write(&mut io::stdout().lock())?,
    }
    Ok(())
}

fn samples_path(report: &Path) -> PathBuf {
    let stem = report
        .file_stem()
        .map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    report.with_file_name(format!("{stem}.samples.csv"))
}

fn run_validate(predictions: &Path, measurements: &Path, out: &Path) -> Result<(), Failure> {
    let pf =
        File::open(predictions).with_context(|| format!("opening {}", predictions.display()))?;
    let rows = if predictions
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        read_predictions_json(pf)
    } else {
        read_predictions_csv(pf)
    }
    .with_context(|| predictions.display().to_string())?;
    let mf =
        File::open(measurements).with_context(|| format!("opening {}", measurements.display()))?;
    let meas = read_measurements_csv(mf).with_context(|| measurements.display().to_string())?;

    let report = validate(&rows, &meas).map_err(anyhow::Error::from)?;
    let mut w = create(out)?;
    serde_json::to_writer_pretty(&mut w, &report).context("writing report")?;
    writeln!(w)
        .and_then(|_| w.flush())
        .context("writing report")?;
    let mut w = create(&samples_path(out))?;
    write_samples_csv(&report, &mut w).map_err(anyhow::Error::from)?;

    println!("samples   {}", report.per_sample.len());
    for (kernel, mape) in &report.per_kernel_mape {
        println!("{kernel:<24} mape {:.4}%", mape * 100.0);
    }
    println!("overall mape {:.4}%", report.overall_mape * 100.0);
    println!("max ape      {:.4}%", report.max_ape * 100.0);
    if !report.unmatched_predictions.is_empty() || !report.unmatched_measurements.is_empty() {
        println!(
            "unmatched: {} predictions, {} measurements",
            report.unmatched_predictions.len(),
            report.unmatched_measurements.len()
        );
    }
    Ok(())
}

fn run_check(
    device: Option<&Path>,
    seed: u64,
    names: &[String],
    samples: Option<usize>,
) -> Result<(), Failure> {
    let spec = load_device(device)?;
    let cases: Vec<ExecutionCase> = if names.is_empty() {
        ExecutionCase::ALL.to_vec()
    } else {
        names
            .iter()
            .map(|n| n.parse().map_err(anyhow::Error::from))
            .collect::<anyhow::Result<_>>()?
    };
    if samples == Some(0) {
        return Err(anyhow!("--samples must be at least 1").into());
    }

    let mut gen = ScenarioGenerator::new(&spec, seed);
    let mut breach: Option<Comparison> = None;
    for case in cases {
        let n = samples.unwrap_or(if case.is_shared() { 50 } else { 100 });
        let mut worst: Option<Comparison> = None;
        for _ in 0..n {
            let cmp = gen
                .generate(case)
                .and_then(|s| s.compare())
                .map_err(anyhow::Error::from)?;
            if !cmp.within_tolerance() && breach.is_none() {
                breach = Some(cmp.clone());
            }
            if worst
                .as_ref()
                .is_none_or(|w| cmp.diff().abs() > w.diff().abs())
            {
                worst = Some(cmp);
            }
        }
        let worst = worst.expect("at least one sample");
        println!(
            "{:<22} n={n:<4} max|diff| {:>10.3} cycles  rel {:.4}%  slot {:.3}",
            case.as_str(),
            worst.diff().abs(),
            worst.rel_diff() * 100.0,
            worst.scenario.config.mem_service,
        );
    }
    match breach {
        Some(cmp) => Err(breach_report(&cmp)?),
        None => Ok(()),
    }
}

fn breach_report(cmp: &Comparison) -> anyhow::Result<Failure> {
    let config = serde_json::to_string_pretty(&cmp.scenario).context("serializing config")?;
    Ok(Failure::Check(format!(
        "tolerance exceeded for {}: closed form {:.3}, simulated {:.3}\n{config}",
        cmp.scenario.case, cmp.closed_form, cmp.makespan
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_syntax() {
        assert_eq!(parse_range("400:1000:100").unwrap().len(), 7);
        assert_eq!(parse_range("700:700:100").unwrap(), vec![700]);
        assert!(parse_range("1000:400:100")
            .unwrap_err()
            .to_string()
            .contains("empty range"));
        assert!(parse_range("400:1000").is_err());
        assert!(parse_range("400:x:100").is_err());
        assert!(parse_range("400:1000:0").is_err());
    }

    #[test]
    fn samples_file_sits_next_to_report() {
        assert_eq!(
            samples_path(Path::new("out/report.json")),
            Path::new("out/report.samples.csv")
        );
    }

    #[test]
    fn breach_report_carries_reproducible_config() {
        let spec = DeviceSpec::gtx980();
        let scenario = ScenarioGenerator::new(&spec, 5)
            .generate(ExecutionCase::MemoryDominated)
            .unwrap();
        let mut cmp = scenario.compare().unwrap();
        cmp.closed_form += 100.0;
        assert!(!cmp.within_tolerance());
        let Ok(Failure::Check(text)) = breach_report(&cmp) else {
            panic!("expected a check failure");
        };
        assert!(text.starts_with("tolerance exceeded for MemoryDominated"));
        let json = &text[text.find('{').unwrap()..];
        let back: gpufreq_core::Scenario = serde_json::from_str(json).unwrap();
        assert_eq!(back, scenario);
        assert_eq!(back.compare().unwrap().makespan, cmp.makespan);
    }
}
