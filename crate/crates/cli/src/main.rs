use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use mipsim::agents::Strategy;
use mipsim::harness::{
    acceptance, emit_plotdata, parse_strategy_set, run_scenario, ScenarioConfig, ScenarioId,
    TopologySource,
};
use mipsim::topology::{HierAddress, LinkParams, Topology};

#[derive(Parser)]
#[command(
    name = "mipsim",
    version,
    about = "Mobile IP interception-strategy simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario under one or all strategies and write plot data.
    Run {
        /// Built-in scenario A..E or a scenario file.
        #[arg(long, value_parser = scenario_arg)]
        scenario: String,
        /// original, onelevel, twolevel or all. Defaults to the scenario's own set.
        #[arg(long, value_parser = strategy_set)]
        strategy: Option<StrategySet>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed and MIPSIM_SEED.
        #[arg(long)]
        seed: Option<u64>,
        /// Topology file replacing the scenario's.
        #[arg(long)]
        topology: Option<PathBuf>,
    },
    /// Print the data path a strategy gives from a correspondent to a care-of address.
    Paths {
        #[arg(long)]
        cn: HierAddress,
        #[arg(long)]
        coa: HierAddress,
        #[arg(long)]
        strategy: Strategy,
        #[arg(long, default_value = "1.2.0")]
        ha: HierAddress,
        #[arg(long)]
        topology: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Verify,
}

#[derive(Clone)]
struct StrategySet(Vec<Strategy>);

fn strategy_set(s: &str) -> Result<StrategySet, String> {
    parse_strategy_set(s).map(StrategySet)
}

fn scenario_arg(s: &str) -> Result<String, String> {
    if ScenarioId::builtin(s).is_some() || Path::new(s).is_file() {
        Ok(s.to_string())
    } else {
        Err(format!(
            "`{s}` is neither a built-in scenario (A..E) nor a scenario file"
        ))
    }
}

fn run(
    scenario: &str,
    strategies: Option<StrategySet>,
    out: &Path,
    seed: Option<u64>,
    topology: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = ScenarioConfig::resolve(scenario)?;
    cfg.apply_seed_env()?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(t) = topology {
        cfg.topology = TopologySource::File(t);
    }
    if let Some(StrategySet(s)) = strategies {
        cfg.strategies = s;
    }
    let report = run_scenario(&cfg)?;
    print!("{}", report.summary());
    for path in emit_plotdata(&report, out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn paths(
    cn: HierAddress,
    coa: HierAddress,
    strategy: Strategy,
    ha: HierAddress,
    topology: Option<PathBuf>,
) -> Result<()> {
    let topo = match topology {
        Some(p) => Topology::from_file(&p, LinkParams::default())?,
        None => Topology::reference(LinkParams::default()),
    };
    let route = topo
        .strategy_route(cn, ha, coa, strategy)
        .with_context(|| format!("no {strategy} route from {cn} to {coa}"))?;
    let text: Vec<String> = route.iter().map(|a| a.to_string()).collect();
    println!("{}", text.join(" "));
    Ok(())
}

fn verify() -> Result<bool> {
    let results = acceptance::run_all()?;
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            scenario,
            strategy,
            out,
            seed,
            topology,
        } => run(&scenario, strategy, &out, seed, topology).map(|_| true),
        Command::Paths {
            cn,
            coa,
            strategy,
            ha,
            topology,
        } => paths(cn, coa, strategy, ha, topology).map(|_| true),
        Command::Verify => verify(),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
