//! Command-line front end: replication runs, the full-factorial campaign,
//! historical validation and offline comparison of two runs, all emitting
//! CSV files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use oncoflow::clinic::{run_day, SeedTriple};
use oncoflow::experiments::{
    anova_on_doe, compare_scenarios, run_doe, run_replications, validation_report,
};
use oncoflow::report::{
    read_real_days_csv, read_replication_csv, write_anova_csv, write_comparison_csv,
    write_doe_csv, write_marginals_csv, write_replication_csv, write_trace_csv,
    write_validation_csv,
};
use oncoflow::scenario::{load_scenario, FactorLevels, Scenario};

#[derive(Parser)]
#[command(
    name = "oncoflow",
    about = "Discrete-event simulator of an oncology day hospital with a detached pharmacy",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON; omitted fields take the observed department's values.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Factor levels (e.g. `B-A-B-A`) applied on top of the scenario.
    #[arg(long)]
    factors: Option<String>,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<(Scenario, u64)> {
        let base = match &self.scenario {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                load_scenario(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => Scenario::default(),
        };
        match &self.factors {
            Some(text) => {
                let levels: FactorLevels = text.parse()?;
                Ok((
                    oncoflow::scenario::apply_factor_levels(&base, levels),
                    levels.index() as u64,
                ))
            }
            None => Ok((base, FactorLevels::status_quo().index() as u64)),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run replicated simulated days and write per-replicate KPIs.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Number of simulated days.
        #[arg(long)]
        replications: usize,
        /// Base seed of the random-number streams.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// If set, write one per-patient trace CSV per replicate here.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
    /// Run the 36-configuration factorial campaign; also writes
    /// `<out stem>_marginals.csv` and `<out stem>_anova.csv`.
    Doe {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Replicates per configuration.
        #[arg(long)]
        replications: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare simulated KPIs against observed per-day data
    /// (`day,F_bar_min,WT_bar_min,Eff_pct`).
    Validate {
        /// Observed per-day KPI CSV.
        #[arg(long)]
        real: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        replications: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two previously written per-replicate KPI files
    /// (`--b` is the reference for the deviation percentage).
    Report {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn sibling(out: &Path, suffix: &str) -> Result<String> {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .context("output path has no file name")?;
    Ok(out
        .with_file_name(format!("{stem}{suffix}"))
        .to_string_lossy()
        .into_owned())
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn main() -> Result<()> {
    if let Ok(threads) = std::env::var("ONCOFLOW_THREADS") {
        let n: usize = threads
            .parse()
            .context("ONCOFLOW_THREADS must be a positive integer")?;
        if n < 1 {
            bail!("ONCOFLOW_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }

    match Cli::parse().command {
        Command::Simulate { scenario, replications, seed, out, trace_dir } => {
            let (s, config_index) = scenario.resolve()?;
            let result = run_replications(&s, replications, seed, config_index)?;
            write_replication_csv(&path_str(&out), &result)?;
            if let Some(dir) = trace_dir {
                std::fs::create_dir_all(&dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
                for rep in 0..replications as u64 {
                    let day = run_day(
                        &s,
                        SeedTriple { base_seed: seed, config_index, replicate_index: rep },
                    )?;
                    let path = dir.join(format!("trace_{rep:05}.csv"));
                    write_trace_csv(&path_str(&path), &day)?;
                }
            }
            println!(
                "{} replicates: E(F_bar) {:.2} min, E(WT_bar) {:.2} min, E(Eff) {:.2}% -> {}",
                replications,
                result.mean_flowtime.mean,
                result.mean_waiting.mean,
                result.efficiency.mean,
                out.display()
            );
        }
        Command::Doe { scenario, replications, seed, out } => {
            let (base, _) = scenario.resolve()?;
            let d = run_doe(&base, replications, seed)?;
            let anova = anova_on_doe(&d)?;
            write_doe_csv(&path_str(&out), &d)?;
            let marginals = sibling(&out, "_marginals.csv")?;
            let anova_path = sibling(&out, "_anova.csv")?;
            write_marginals_csv(&marginals, &d)?;
            write_anova_csv(&anova_path, &anova)?;
            let best = d.ranked()[0];
            println!(
                "36 configurations x {} replicates; best {} (config {}) at E(F_bar) {:.2} min -> {}, {}, {}",
                replications,
                best.levels,
                best.number,
                best.expected_mean_flowtime,
                out.display(),
                marginals,
                anova_path
            );
        }
        Command::Validate { real, scenario, replications, seed, out } => {
            let (s, config_index) = scenario.resolve()?;
            let days = read_real_days_csv(&path_str(&real))?;
            let sim = run_replications(&s, replications, seed, config_index)?;
            let report = validation_report(&days, &sim)?;
            write_validation_csv(&path_str(&out), &report)?;
            println!(
                "{} observed days vs {} replicates -> {}",
                report.observed_days,
                replications,
                out.display()
            );
        }
        Command::Report { a, b, out } => {
            let ra = read_replication_csv(&path_str(&a))?;
            let rb = read_replication_csv(&path_str(&b))?;
            let c = compare_scenarios(&ra, &rb)?;
            write_comparison_csv(&path_str(&out), &c)?;
            println!(
                "compared {} against reference {} -> {}",
                a.display(),
                b.display(),
                out.display()
            );
        }
    }
    Ok(())
}
