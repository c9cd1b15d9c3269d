use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hbt::config::RunConfig;
use hbt::io::{format_counting, format_events, format_g2, read_events, write_text};
use hbt::physics::Statistics;
use hbt::pipeline::{analyze, figure2, format_predictions, predict, simulate, Analysis};
use hbt::{Error, Result};

/// Exit status when analysis ran on an event file without events.
const EMPTY_INPUT: u8 = 4;

#[derive(Parser)]
#[command(name = "hbt", version, about = "Monte Carlo Hanbury Brown-Twiss simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form numbers for a configuration
    Predict(Common),
    /// Simulate shots and write an event file
    Simulate(Common),
    /// Pair correlation and counting statistics from an event file
    Analyze {
        /// Event file written by `simulate`
        events: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Boson, coherent and fermion traces with shared bins
    Figure2(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file; `analyze` falls back to the event file header
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Shot count override
    #[arg(long)]
    shots: Option<u64>,
    /// Worker threads (results do not depend on it)
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self, fallback: Option<&str>) -> Result<RunConfig> {
        let mut config = match (&self.config, fallback) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(text)) => RunConfig::parse(text)?,
            (None, None) => return Err(Error::Config("--config is required".into())),
        };
        if let Some(seed) = self.seed {
            config = config.with("run.seed", seed)?;
        }
        if let Some(shots) = self.shots {
            config = config.with("run.shots", shots)?;
        }
        if let Some(threads) = self.threads {
            config = config.with("run.threads", threads)?;
        }
        if let Some(out) = &self.out {
            config = config.with("run.output", out.display())?;
        }
        Ok(config)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Predict(common) => {
            let config = common.load(None)?;
            let mut text = config.header_lines();
            text.push_str(&format_predictions(&predict(&config)?));
            print!("{text}");
            write_text(&config.run.output.join("predict.txt"), &text)?;
            Ok(0)
        }
        Command::Simulate(common) => {
            let config = common.load(None)?;
            let events = simulate(&config)?;
            let path = config.run.output.join("events.txt");
            write_text(&path, &format_events(&events, config.run.seed, &config.header_lines()))?;
            eprintln!(
                "{} events in {} shots -> {}",
                events.len(),
                events.shots,
                path.display()
            );
            Ok(0)
        }
        Command::Analyze { events, common } => {
            let (list, header) = read_events(&events)?;
            let embedded = (!header.config.is_empty()).then_some(header.config.as_str());
            let mut config = common.load(embedded)?;
            if common.seed.is_none() {
                if let Some(seed) = header.seed {
                    config = config.with("run.seed", seed)?;
                }
            }
            let analysis = analyze(&list, &config)?;
            write_analysis(&config.run.output, &config, &analysis, "")?;
            if list.is_empty() {
                eprintln!("warning: {} holds no events", events.display());
                return Ok(EMPTY_INPUT);
            }
            Ok(0)
        }
        Command::Figure2(common) => {
            let config = common.load(None)?;
            let out = config.run.output.clone();
            let mut summary = config.header_lines();
            summary.push_str("# columns: trace events g2_zero sigma fit_contrast fit_length predicted_length\n");
            for trace in figure2(&config)? {
                let name = match trace.statistics {
                    Statistics::ChaoticBoson => "boson",
                    other => other.name(),
                };
                write_analysis(&out, &trace.config, &trace.analysis, &format!("_{name}"))?;
                let (g0, s0) = trace.analysis.g2_at_zero().unwrap_or((f64::NAN, f64::NAN));
                let (c, l) = trace
                    .analysis
                    .correlation
                    .fit
                    .as_ref()
                    .map_or((f64::NAN, f64::NAN), |f| (f.contrast, f.length));
                let _ = writeln!(
                    summary,
                    "{name} {} {g0:e} {s0:e} {c:e} {l:e} {:e}",
                    trace.events.len(),
                    trace.analysis.predicted_length
                );
            }
            print!("{summary}");
            write_text(&out.join("figure2_summary.txt"), &summary)?;
            Ok(0)
        }
    }
}

fn write_analysis(dir: &Path, config: &RunConfig, analysis: &Analysis, suffix: &str) -> Result<()> {
    let mut header = config.header_lines();
    let _ = writeln!(header, "# predicted_length = {:e}", analysis.predicted_length);
    if let Some(reason) = &analysis.fit_error {
        let _ = writeln!(header, "# fit unavailable: {reason}");
    }
    write_text(
        &dir.join(format!("g2{suffix}.txt")),
        &format_g2(&analysis.correlation, &header),
    )?;
    if let Some(stats) = &analysis.counting {
        write_text(
            &dir.join(format!("counting{suffix}.txt")),
            &format_counting(stats, &config.header_lines()),
        )?;
    }
    Ok(())
}
