//! `hhbench`: run heavy-hitter experiments from the command line.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hhsketch::bench::{
    self, Algorithm, ExperimentConfig, OutputFormat, ResultRow, TraceSource, DEFAULT_LAMBDAS,
    DEFAULT_MEMORIES_KB,
};
use hhsketch::metrics::{CdfSamples, Oracle, QuerySet};
use hhsketch::{Error, HeavyLightRatio, Lambda, Result, TraceFormat, ZipfSpec};

#[derive(Parser)]
#[command(name = "hhbench", version, about = "Heavy-hitter sketch experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run every algorithm across memory sizes.
    SweepMemory {
        #[command(flatten)]
        config: ConfigArgs,
        /// Memory sizes in KiB.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_MEMORIES_KB)]
        memories: Vec<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run elastic-hh across lambda values, with elastic at 8 and 1 for reference.
    SweepLambda {
        #[command(flatten)]
        config: ConfigArgs,
        /// Lambda values (`0.25`, `1/4`, `8`, ...).
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<Lambda>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write a synthetic Zipf trace.
    GenTrace {
        #[arg(long, default_value_t = 1_000_000)]
        packets: usize,
        #[arg(long, default_value_t = 100_000)]
        distinct: usize,
        #[arg(long, default_value_t = 1.0)]
        skew: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "binary-u32")]
        format: TraceFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count a trace exactly and list its heavy hitters.
    Oracle {
        #[command(flatten)]
        trace: TraceArgs,
        #[arg(long, default_value_t = 0.0001)]
        threshold_frac: f64,
        /// Where to write `key,count` lines; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TraceArgs {
    /// Trace file; the default Zipf trace is generated when absent.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value = "binary-u32")]
    trace_format: TraceFormat,
    #[arg(long)]
    zipf_packets: Option<usize>,
    #[arg(long)]
    zipf_distinct: Option<usize>,
    #[arg(long)]
    zipf_skew: Option<f64>,
    #[arg(long)]
    zipf_seed: Option<u64>,
}

impl TraceArgs {
    fn any_set(&self) -> bool {
        self.trace.is_some()
            || self.zipf_packets.is_some()
            || self.zipf_distinct.is_some()
            || self.zipf_skew.is_some()
            || self.zipf_seed.is_some()
    }

    fn apply(&self, base: &TraceSource) -> Result<TraceSource> {
        if let Some(path) = &self.trace {
            if self.zipf_packets.is_some()
                || self.zipf_distinct.is_some()
                || self.zipf_skew.is_some()
            {
                return Err(Error::Config(
                    "--trace cannot be combined with --zipf-* flags".into(),
                ));
            }
            return Ok(TraceSource::File {
                path: path.clone(),
                format: self.trace_format,
            });
        }
        let mut spec = match base {
            TraceSource::Zipf(spec) => *spec,
            TraceSource::File { .. } if !self.any_set() => return Ok(base.clone()),
            TraceSource::File { .. } => ZipfSpec::default(),
        };
        spec.packets = self.zipf_packets.unwrap_or(spec.packets);
        spec.distinct = self.zipf_distinct.unwrap_or(spec.distinct);
        spec.skew = self.zipf_skew.unwrap_or(spec.skew);
        spec.seed = self.zipf_seed.unwrap_or(spec.seed);
        Ok(TraceSource::Zipf(spec))
    }
}

/// Flags mirror `ExperimentConfig` fields; any flag given overrides the
/// value from `--config`.
#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration, e.g. the `config` echoed in a JSON result row.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    memory_kb: Option<usize>,
    #[arg(long)]
    threshold_frac: Option<f64>,
    #[arg(long)]
    lambda: Option<Lambda>,
    #[arg(long)]
    cells_per_bucket: Option<usize>,
    /// Heavy:light memory split for elastic, e.g. `3:1`.
    #[arg(long)]
    heavy_light_ratio: Option<HeavyLightRatio>,
    #[arg(long)]
    heap_capacity: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    heap_in_budget: Option<bool>,
    #[command(flatten)]
    trace: TraceArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// `true-heavy-hitters` or `reported-correct`.
    #[arg(long, value_parser = parse_query_set)]
    query_set: Option<QuerySet>,
    /// `correct-only` or `all-reported`.
    #[arg(long, value_parser = parse_cdf_samples)]
    cdf_samples: Option<CdfSamples>,
}

fn parse_query_set(s: &str) -> std::result::Result<QuerySet, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|e| e.to_string())
}

fn parse_cdf_samples(s: &str) -> std::result::Result<CdfSamples, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|e| e.to_string())
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let json = fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                ExperimentConfig::from_json(&json)?
            }
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { c.$field = v; })*
            };
        }
        set!(
            algo,
            memory_kb,
            threshold_frac,
            cells_per_bucket,
            heavy_light_ratio,
            heap_capacity,
            rows,
            heap_in_budget,
            seed,
            repeats,
            query_set,
            cdf_samples
        );
        if self.lambda.is_some() {
            c.lambda = self.lambda;
        }
        c.trace = self.trace.apply(&c.trace)?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Results file; CDF files are written next to it. Stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutputArgs {
    fn write(&self, rows: &[ResultRow]) -> Result<()> {
        match &self.out {
            Some(path) => {
                let written = bench::emit(rows, self.format, path)?;
                eprintln!("wrote {} ({} CDF files)", path.display(), written.len() - 1);
            }
            None => {
                let text = match self.format {
                    OutputFormat::Csv => bench::to_csv(rows),
                    OutputFormat::Json => {
                        serde_json::to_string_pretty(rows).expect("rows serialize") + "\n"
                    }
                };
                std::io::stdout()
                    .write_all(text.as_bytes())
                    .map_err(|e| Error::io("<stdout>", e))?;
            }
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, output } => {
            let row = bench::run_single(&config.resolve()?)?;
            output.write(&[row])
        }
        Command::SweepMemory {
            config,
            memories,
            output,
        } => output.write(&bench::run_memory_sweep(&config.resolve()?, &memories)?),
        Command::SweepLambda {
            config,
            lambdas,
            output,
        } => {
            let lambdas = if lambdas.is_empty() {
                DEFAULT_LAMBDAS
                    .iter()
                    .map(|&(n, d)| Lambda::new(n, d))
                    .collect::<Result<Vec<_>>>()?
            } else {
                lambdas
            };
            output.write(&bench::run_lambda_sweep(&config.resolve()?, &lambdas)?)
        }
        Command::GenTrace {
            packets,
            distinct,
            skew,
            seed,
            format,
            out,
        } => {
            let trace = hhsketch::generate_zipf(&ZipfSpec {
                packets,
                distinct,
                skew,
                seed,
            })?;
            hhsketch::trace::write_trace(&trace, &out, format)?;
            eprintln!("wrote {} packets to {}", trace.len(), out.display());
            Ok(())
        }
        Command::Oracle {
            trace,
            threshold_frac,
            out,
        } => {
            let source = trace.apply(&TraceSource::default())?;
            let trace = bench::build_trace(&source)?;
            let oracle = Oracle::build(&trace);
            let threshold = oracle.threshold(threshold_frac);
            let hh = oracle.true_heavy_hitters(threshold);
            eprintln!(
                "packets={} distinct={} remapped_zeros={} threshold={} heavy_hitters={}",
                oracle.total(),
                oracle.distinct(),
                trace.remapped_zeros(),
                threshold,
                hh.len()
            );
            let mut text = String::from("key,count\n");
            for (k, c) in hh {
                text.push_str(&format!("{k},{c}\n"));
            }
            match out {
                Some(path) => fs::write(&path, text).map_err(|e| Error::io(path, e)),
                None => std::io::stdout()
                    .write_all(text.as_bytes())
                    .map_err(|e| Error::io("<stdout>", e)),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hhbench: {e}");
            ExitCode::FAILURE
        }
    }
}
