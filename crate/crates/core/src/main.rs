use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use posted_pricing::harness::{
    gen_fixture, gen_random, read_instances, read_results, render_report, run_experiment, summarize_results,
    verify_outputs, write_instances, write_outputs, CurveFamily, ExperimentConfig, Fixture, Instance, RandomSpec,
    ReportFormat, ValuationFamily, DEFAULT_FIXTURE_SIZE,
};
use posted_pricing::market::read_transcripts;
use posted_pricing::oracle::DEFAULT_OPT_BUDGET;
use posted_pricing::{Money, SchemeConfig};

#[derive(Parser)]
#[command(name = "posted-pricing", version, about = "Posted-price market simulator with increasing production costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate instances as JSON lines.
    Gen(GenArgs),
    /// Run pricing schemes on instances.
    Run(RunArgs),
    /// Replay stored transcripts and recheck result rows.
    Verify(VerifyArgs),
    /// Summarize a results file.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Adversarial fixture family; random generation if omitted.
    #[arg(long)]
    fixture: Option<String>,
    /// Fixture size; repeat for several sizes.
    #[arg(long)]
    size: Vec<u64>,
    #[arg(long, default_value_t = 3)]
    items: usize,
    #[arg(long, default_value_t = 4)]
    buyers: usize,
    #[arg(long, default_value = "linear")]
    curve: String,
    #[arg(long, default_value = "mixed")]
    valuation: String,
    /// Number of random instances (seeds `seed..seed+count`).
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    value_max: u64,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Instance file produced by `gen`.
    instances: PathBuf,
    /// Scheme name, e.g. `twice_index` or `profit_wrap:chunked`. Repeatable.
    #[arg(long = "scheme", required = true)]
    schemes: Vec<String>,
    #[arg(long)]
    chunk_size: Option<u64>,
    /// Upper bound on any bundle value; defaults to each instance's own bound.
    #[arg(long)]
    vmax: Option<Money>,
    #[arg(long, default_value = "1")]
    rho: Money,
    #[arg(long, default_value = "1")]
    mu: Money,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: u32,
    #[arg(long, default_value_t = DEFAULT_OPT_BUDGET)]
    opt_budget: u64,
    /// Output directory for results.jsonl and transcripts.jsonl.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    instances: PathBuf,
    /// Directory written by `run`.
    dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Table,
}

#[derive(Args)]
struct ReportArgs {
    /// results.jsonl, or the directory containing it.
    results: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn gen(args: GenArgs) -> Result<()> {
    let instances: Vec<Instance> = match &args.fixture {
        Some(name) => {
            let fixture: Fixture = name.parse()?;
            let sizes = if args.size.is_empty() { vec![DEFAULT_FIXTURE_SIZE] } else { args.size.clone() };
            sizes.into_iter().map(|s| gen_fixture(fixture, s)).collect::<Result<_, _>>()?
        }
        None => {
            let curves: CurveFamily = args.curve.parse()?;
            let valuations: ValuationFamily = args.valuation.parse()?;
            (args.seed..args.seed + args.count)
                .map(|seed| {
                    gen_random(&RandomSpec {
                        items: args.items,
                        buyers: args.buyers,
                        curves,
                        valuations,
                        seed,
                        value_max: args.value_max,
                    })
                })
                .collect::<Result<_, _>>()?
        }
    };
    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
            write_instances(&instances, &mut w)?;
            w.flush()?;
        }
        None => {
            let mut w = io::stdout().lock();
            write_instances(&instances, &mut w)?;
        }
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let instances = read_instances(open(&args.instances)?)?;
    let schemes = args
        .schemes
        .iter()
        .map(|name| {
            let mut config = SchemeConfig::parse(name)?;
            config.chunk_size = args.chunk_size;
            config.vmax_bound = args.vmax;
            config.rho = args.rho;
            config.mu = args.mu;
            Ok(config)
        })
        .collect::<Result<Vec<_>>>()?;
    if args.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let config = ExperimentConfig { schemes, trials: args.trials, master_seed: args.seed, opt_budget: args.opt_budget };
    let outputs = run_experiment(&instances, &config)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut results = BufWriter::new(File::create(args.out.join("results.jsonl"))?);
    let mut transcripts = BufWriter::new(File::create(args.out.join("transcripts.jsonl"))?);
    write_outputs(&outputs, &config, &mut results, &mut transcripts)?;
    results.flush()?;
    transcripts.flush()?;
    eprintln!("{} cells written to {}", outputs.len(), args.out.display());
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<bool> {
    let instances = read_instances(open(&args.instances)?)?;
    let results = read_results(open(&args.dir.join("results.jsonl"))?)?;
    let transcripts = read_transcripts(open(&args.dir.join("transcripts.jsonl"))?)?;
    let failures = verify_outputs(&instances, &results, &transcripts);
    for (cell, reason) in &failures {
        println!("cell {cell}: FAIL {reason}");
    }
    println!("{} of {} cells verified", results.len() - failures.len(), results.len());
    Ok(failures.is_empty())
}

fn report(args: ReportArgs) -> Result<()> {
    let path = if args.results.is_dir() { args.results.join("results.jsonl") } else { args.results };
    let rows = summarize_results(&read_results(open(&path)?)?);
    let format = match args.format {
        Format::Csv => ReportFormat::Csv,
        Format::Table => ReportFormat::Table,
    };
    print!("{}", render_report(&rows, format));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => gen(a).map(|_| true),
        Command::Run(a) => run(a).map(|_| true),
        Command::Verify(a) => verify(a),
        Command::Report(a) => report(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
