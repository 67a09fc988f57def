//! Argument definitions and subcommand drivers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kps_core::mc::{
    published_table_experiments, run_power, run_size, write_power_csv, write_size_csv, DgpVariant,
    PowerExperiment, SampleSizeRule, SizeExperiment,
};
use kps_core::{kpst, kpst_star, nearest_kps, KpsOptions, RankPolicy};

use crate::error::{CliError, Result};
use crate::ingest::{parse_csv, read_matrix, ColumnList, Schema};
use crate::report::{NkpReport, OptionsEcho, TestReport};
use crate::residualize::residualize;

#[derive(Debug, Parser)]
#[command(name = "kps", version, about = "Test Kronecker product structure of moment covariances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run KPST or KPST* on reduced-form residuals from a CSV dataset.
    Test(TestArgs),
    /// Monte Carlo size and power experiments.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Nearest Kronecker product to a square matrix.
    Nkp(NkpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Kpst,
    KpstStar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankPolicyArg {
    /// Keep exactly `df` eigenvalues of the weight matrix.
    Fixed,
    /// Keep eigenvalues above a relative tolerance.
    Tolerance,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Endogenous columns: names or `first:last` ranges, comma separated.
    #[arg(long)]
    pub y: Option<ColumnList>,
    /// Instrument columns.
    #[arg(long)]
    pub z: Option<ColumnList>,
    /// Control columns, partialled out together with a constant.
    #[arg(long)]
    pub w: Option<ColumnList>,
    /// Column of cluster labels.
    #[arg(long)]
    pub cluster: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Kpst)]
    pub method: MethodArg,
    #[arg(long)]
    pub no_normalize: bool,
    /// Do not add a constant to the controls.
    #[arg(long)]
    pub no_constant: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long, value_enum, default_value_t = RankPolicyArg::Fixed)]
    pub rank_policy: RankPolicyArg,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Null rejection frequencies.
    Size(SizeArgs),
    /// Rejection frequencies along local alternatives (p = k = 2).
    Power(PowerArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    /// `n = (pk)^(16/3)`.
    Pow16Over3,
    /// `n = (pk)^4`.
    Pow4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DgpArg {
    Homoskedastic,
    ScalarHetero,
    /// Both designs, one after the other.
    Both,
}

#[derive(Debug, Args)]
pub struct SimOutput {
    /// Seed; defaults to `KPS_SEED`, then 1.
    #[arg(long, env = "KPS_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SizeArgs {
    #[arg(long, required_unless_present = "table")]
    pub p: Option<usize>,
    #[arg(long, required_unless_present = "table")]
    pub k: Option<usize>,
    /// Explicit sample size; overrides --rule.
    #[arg(long, conflicts_with = "rule")]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value_t = RuleArg::Pow4)]
    pub rule: RuleArg,
    #[arg(long, value_enum, default_value_t = DgpArg::Homoskedastic)]
    pub dgp: DgpArg,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.10, 0.05, 0.01])]
    pub levels: Vec<f64>,
    /// Preset the grid and sample sizes of a published size table; runs
    /// both designs for every row.
    #[arg(long = "paper-table", value_parser = clap::value_parser!(u8).range(1..=2), conflicts_with_all = ["p", "k", "n", "dgp"])]
    pub table: Option<u8>,
    #[command(flatten)]
    pub out: SimOutput,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])]
    pub sigma_grid: Vec<f64>,
    #[arg(long, default_value_t = 2_000)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.05])]
    pub levels: Vec<f64>,
    /// Also run KPST* on the same draws.
    #[arg(long)]
    pub star: bool,
    #[command(flatten)]
    pub out: SimOutput,
}

#[derive(Debug, Args)]
pub struct NkpArgs {
    /// Square matrix CSV, optionally with a header line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Test(args) => cmd_test(&args, io::stdout().lock()),
        Command::Simulate(SimulateCommand::Size(args)) => cmd_size(&args),
        Command::Simulate(SimulateCommand::Power(args)) => cmd_power(&args),
        Command::Nkp(args) => cmd_nkp(&args, io::stdout().lock()),
    }
}

fn describe(list: &Option<ColumnList>) -> Option<String> {
    list.as_ref().map(ToString::to_string)
}

pub fn cmd_test<W: Write>(args: &TestArgs, out: W) -> Result<()> {
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::Usage(format!("--level {} is not in (0, 1)", args.level)));
    }
    let schema = Schema {
        y: args.y.clone(),
        z: args.z.clone(),
        w: args.w.clone(),
        cluster: args.cluster.clone(),
    };
    let bytes = std::fs::read(&args.input).map_err(|e| CliError::Io {
        path: args.input.display().to_string(),
        message: e.to_string(),
    })?;
    let data = parse_csv(&bytes, &schema)?;
    let sample = residualize(&data, !args.no_constant)?;
    let options = KpsOptions {
        normalize: !args.no_normalize,
        rank_policy: match args.rank_policy {
            RankPolicyArg::Fixed => None,
            RankPolicyArg::Tolerance => Some(RankPolicy::default()),
        },
        ..KpsOptions::default()
    };
    let result = match args.method {
        MethodArg::Kpst => kpst(&sample, &options)?,
        MethodArg::KpstStar => kpst_star(&sample, &options)?,
    };
    let echo = OptionsEcho {
        input: args.input.display().to_string(),
        y: describe(&args.y).unwrap_or_default(),
        z: describe(&args.z).unwrap_or_default(),
        w: describe(&args.w),
        cluster: args.cluster.clone(),
        constant: !args.no_constant,
        rank_policy: format!("{:?}", args.rank_policy).to_lowercase(),
    };
    let report = TestReport::new(&result, args.level, &bytes, data.rows_dropped, echo);
    match args.format {
        Format::Json => report.write_json(out),
        Format::Csv => report.write_csv(out),
        Format::Text => report.write_text(out),
    }
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            CliError::Output(format!("{}: {e}", p.display()))
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn size_experiments(args: &SizeArgs) -> Result<Vec<SizeExperiment>> {
    let seed = args.out.seed;
    let mut exps = match args.table {
        Some(table) => published_table_experiments(table, args.reps, seed)?,
        None => {
            let (p, k) = (args.p.unwrap_or(0), args.k.unwrap_or(0));
            let rule = match (args.n, args.rule) {
                (Some(n), _) => SampleSizeRule::Explicit(n),
                (None, RuleArg::Pow4) => SampleSizeRule::Pow4,
                (None, RuleArg::Pow16Over3) => SampleSizeRule::Pow16Over3,
            };
            let dgps: &[DgpVariant] = match args.dgp {
                DgpArg::Homoskedastic => &[DgpVariant::Homoskedastic],
                DgpArg::ScalarHetero => &[DgpVariant::ScalarHetero],
                DgpArg::Both => &[DgpVariant::Homoskedastic, DgpVariant::ScalarHetero],
            };
            dgps.iter()
                .map(|&d| SizeExperiment::new(p, k, rule, d, args.reps, seed))
                .collect()
        }
    };
    for e in &mut exps {
        e.levels = args.levels.clone();
    }
    Ok(exps)
}

pub fn cmd_size(args: &SizeArgs) -> Result<()> {
    let mut rows = Vec::new();
    for exp in size_experiments(args)? {
        rows.extend(run_size(&exp)?);
    }
    write_size_csv(&rows, sink(&args.out.output)?)?;
    Ok(())
}

pub fn cmd_power(args: &PowerArgs) -> Result<()> {
    let mut exp = PowerExperiment::new(args.n, args.sigma_grid.clone(), args.reps, args.out.seed);
    exp.levels = args.levels.clone();
    exp.include_star = args.star;
    let rows = run_power(&exp)?;
    write_power_csv(&rows, sink(&args.out.output)?)?;
    Ok(())
}

pub fn cmd_nkp<W: Write>(args: &NkpArgs, out: W) -> Result<()> {
    let m = read_matrix(&args.input)?;
    let fit = nearest_kps(&m, args.p, args.k)?;
    let report = NkpReport::new(&fit);
    match args.format {
        Format::Json => report.write_json(out),
        Format::Text => report.write_text(out),
        Format::Csv => Err(CliError::Usage("nkp supports --format json or text".into())),
    }
}
