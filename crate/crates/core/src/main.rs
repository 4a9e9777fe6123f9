use clap::{Parser, Subcommand};
use csgp_hedge::backtest::{
    emit_report, run_study_with, BacktestConfig, MarketData, MonthResult, ReportFormat, COMPARATOR,
};
use csgp_hedge::marketdata::{
    demand_to_load, read_demand_csv, read_spot_csv, sd_bucket_histogram, write_demand_csv,
    write_forwards_csv, write_spot_csv, YearMonth,
};
use csgp_hedge::synthetic::{generate, SynthConfig};
use csgp_hedge::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "csgp",
    version,
    about = "Coregional GP price/load scenarios and static forward hedging"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monthly hedging backtests.
    #[command(subcommand)]
    Backtest(BacktestCmd),
    /// Data inspection and generation.
    #[command(subcommand)]
    Data(DataCmd),
}

#[derive(clap::Args)]
struct Overrides {
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Report format (csv or json), overriding the config.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum BacktestCmd {
    /// Run every month of the configured study.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a single delivery month.
    Month {
        #[arg(long)]
        config: PathBuf,
        /// Delivery month, YYYY-MM.
        #[arg(long)]
        month: String,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Subcommand)]
enum DataCmd {
    /// Spread of price and load around their means, by peak class.
    Stats {
        #[arg(long)]
        spot: PathBuf,
        #[arg(long)]
        demand: PathBuf,
    },
    /// Write a seeded synthetic market and a matching backtest config.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "2016-01")]
        start_month: String,
        #[arg(long, default_value = "2016-12")]
        end_month: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(path: &Path, o: &Overrides) -> Result<BacktestConfig> {
    let mut c = BacktestConfig::load(path)?;
    if let Some(s) = o.seed {
        c.seed = s;
    }
    if let Some(d) = &o.out_dir {
        c.out_dir = d.clone();
    }
    if let Some(f) = &o.format {
        c.format = f.parse::<ReportFormat>()?;
    }
    Ok(c)
}

fn print_month(r: &MonthResult) {
    if let Some(reason) = &r.skipped {
        println!("{}  skipped: {reason}", r.month);
        return;
    }
    let cells: Vec<String> = r
        .strategies
        .iter()
        .map(|s| match (s.position, s.payoff_mio_gbp) {
            (Some(p), Some(v)) => {
                format!("{} {:.2}/{:.2} {:+.3}", s.strategy, p.v_base, p.v_peak, v)
            }
            _ => format!(
                "{} failed: {}",
                s.strategy,
                s.failure.as_deref().unwrap_or("-")
            ),
        })
        .collect();
    println!("{}  {}", r.month, cells.join("  "));
}

fn backtest(config: BacktestConfig) -> Result<()> {
    let data = MarketData::load(&config)?;
    let report = run_study_with(&config, &data, print_month)?;
    if report.completed_months() == 0 {
        return Err(Error::InvalidInput("no month could be run".into()));
    }
    for (s, total) in report.totals() {
        let excess = if s == COMPARATOR {
            String::new()
        } else {
            let last = report
                .cumulative_excess()
                .last()
                .map(|(_, a)| a.clone())
                .unwrap_or_default();
            let i = report.variants().iter().position(|v| *v == s).unwrap_or(0);
            format!("  excess {:+.3}", last.get(i).copied().unwrap_or(0.0))
        };
        println!("total {s}: {total:+.3} mio GBP{excess}");
    }
    for p in emit_report(&report, &config.out_dir, config.format)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Backtest(BacktestCmd::Run { config, overrides }) => {
            backtest(load_config(&config, &overrides)?)
        }
        Command::Backtest(BacktestCmd::Month {
            config,
            month,
            overrides,
        }) => {
            let mut c = load_config(&config, &overrides)?;
            let m: YearMonth = month.parse()?;
            c.start_month = m;
            c.end_month = m;
            backtest(c)
        }
        Command::Data(DataCmd::Stats { spot, demand }) => {
            let spot = read_spot_csv(&spot)?;
            let load = demand_to_load(&read_demand_csv(&demand)?)?;
            if !load.gaps.is_empty() {
                eprintln!(
                    "{} load hour(s) missing a half-hour reading were left out",
                    load.gaps.len()
                );
            }
            println!(
                "spot ({} hours)\n{}",
                spot.len(),
                sd_bucket_histogram(&spot)?.render()
            );
            println!(
                "load ({} hours)\n{}",
                load.load.len(),
                sd_bucket_histogram(&load.load)?.render()
            );
            Ok(())
        }
        Command::Data(DataCmd::Synth {
            out_dir,
            start_month,
            end_month,
            seed,
        }) => {
            let (first, last): (YearMonth, YearMonth) = (start_month.parse()?, end_month.parse()?);
            if last < first {
                return Err(Error::Config("end_month precedes start_month".into()));
            }
            let market = generate(&SynthConfig::for_months(first, last, seed))?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
                path: out_dir.clone(),
                source: e,
            })?;
            write_spot_csv(&out_dir.join("spot.csv"), &market.spot)?;
            write_demand_csv(&out_dir.join("demand.csv"), &market.demand)?;
            write_forwards_csv(&out_dir.join("forwards.csv"), &market.forwards)?;
            let cfg = format!(
                "spot = spot.csv\ndemand = demand.csv\nforwards = forwards.csv\nout_dir = out\n\
                 start_month = {first}\nend_month = {last}\nwindow = 1M\nsparsity = 0.01, 0.10\nseed = {seed}\n"
            );
            let path = out_dir.join("backtest.cfg");
            std::fs::write(&path, cfg).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            println!(
                "wrote synthetic market and {} to {}",
                path.display(),
                out_dir.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
