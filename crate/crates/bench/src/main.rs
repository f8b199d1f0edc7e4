use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpf_bench::config::{resolve_threads, ScenarioName};
use fpf_bench::runner::Runner;
use fpf_bench::{commands, BenchConfig, Result};

#[derive(Parser)]
#[command(name = "bench", version = fpf_bench::version(), about = "Feedback particle filter benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare gain approximations on the static two-component mixture.
    GainCompare(Common),
    /// Monte Carlo filter runs.
    FilterRun(Common),
    /// Gain cost and accuracy of the cubic sensor across dimensions.
    DimSweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads. Falls back to BENCH_THREADS, the config, then all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Scenario, overriding the config.
    #[arg(long)]
    scenario: Option<String>,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

fn load(c: &Common, default_scenario: Option<ScenarioName>) -> Result<BenchConfig> {
    let mut cfg = match (&c.config, default_scenario) {
        (Some(path), Some(s)) => BenchConfig::load_or(path, s)?,
        (Some(path), None) => BenchConfig::load(path)?,
        (None, s) => BenchConfig { scenario: s.unwrap_or_default(), ..Default::default() },
    };
    if let Some(s) = &c.scenario {
        cfg.scenario = ScenarioName::parse(s)?;
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let (common, default) = match &cli.command {
        Command::GainCompare(c) => (c, Some(ScenarioName::StaticGainMixture)),
        Command::FilterRun(c) => (c, None),
        Command::DimSweep(c) => (c, Some(ScenarioName::CubicSensorD)),
    };
    let cfg = load(common, default)?;
    if common.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let runner = Runner::new(resolve_threads(common.threads, cfg.threads)?)?;
    let out = cfg.out.clone();
    match cli.command {
        Command::GainCompare(_) => {
            let s = commands::gain_compare(&cfg, &runner, &out)?;
            for (m, e) in s.methods.iter().zip(&s.mean_l2) {
                println!("{m:<12} mean L2 error  {:.4e}  {:.4e}", e[0], e[1]);
            }
            if let Some(w) = s.decomposition_wins {
                println!("decomposition best on both components in {w}/{} trials", s.trials);
            }
        }
        Command::FilterRun(_) => {
            let s = commands::filter_run(&cfg, &runner, &out)?;
            for c in &s.cells {
                let a = c.armse.map_or("-".to_string(), |v| format!("{v:.4}"));
                println!("{:<24} N_p={:<5} ARMSE {a:<10} failed {}/{}  {:.1}s", c.label, c.particles, c.failed, c.trials, c.cpu_s);
            }
        }
        Command::DimSweep(_) => {
            let s = commands::dim_sweep(&cfg, &runner, &out)?;
            for r in &s.rows {
                let m = r.mre.map_or("-".to_string(), |v| format!("{v:.4}"));
                println!("d={:<4} gain {:.3e}s  MRE {m}  failed {}/{}", r.dim, r.gain_s, r.failed, r.trials);
            }
            if let Some(k) = s.slope {
                println!("gain cost slope {k:.3}");
            }
        }
    }
    eprintln!("wrote {}", out.display());
    Ok(())
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
