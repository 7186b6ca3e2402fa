use std::path::Path;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};
use innovest::experiment::{self, ConfigMap, ExperimentConfig, KEYS};
use innovest::llfilter::FilterStatus;
use innovest::Error;

fn cli() -> Command {
    let mut cmd = Command::new("innovest")
        .about("Innovation-method estimation for discretely observed diffusions")
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .global(true)
                .help("flat `key = value` configuration file"),
        )
        .subcommand(Command::new("simulate").about("write trajectory.csv and observations.csv"))
        .subcommand(Command::new("estimate").about("one estimation run, writes estimate.csv"))
        .subcommand(Command::new("replicate").about("R runs on one series, writes summary and histograms"))
        .subcommand(Command::new("filter").about("dump innovations and filtered means"))
        .subcommand(Command::new("fitness-slice").about("sweep q along each coordinate"));
    for (key, help) in KEYS {
        cmd = cmd.arg(Arg::new(*key).long(*key).value_name("VALUE").global(true).help(*help));
    }
    cmd
}

fn config(m: &ArgMatches) -> Result<ExperimentConfig, Error> {
    let mut map = match m.get_one::<String>("config") {
        Some(path) => ConfigMap::load(Path::new(path))
            .map_err(|e| Error::Config(format!("{path}: {e}")))?,
        None => ConfigMap::new(),
    };
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            map.set(key, v)?;
        }
    }
    ExperimentConfig::from_map(&map)
}

fn run(name: &str, cfg: &ExperimentConfig) -> Result<(), Error> {
    println!("model = {}, seed = {}, out = {}", cfg.model.name(), cfg.seed, cfg.out.display());
    match name {
        "simulate" => {
            let o = experiment::cmd_simulate(cfg)?;
            for f in &o.files {
                println!("wrote {}", f.display());
            }
        }
        "estimate" => {
            let r = experiment::cmd_estimate(cfg)?;
            println!(
                "{}: alpha = {:?}, q = {:.6e}, evaluations = {}, converged = {}",
                r.algorithm.name(),
                r.alpha_hat,
                r.fitness,
                r.evaluations,
                r.converged
            );
        }
        "replicate" => {
            let o = experiment::cmd_replicate(cfg)?;
            let s = &o.summary;
            println!("{} runs, {} failures, {:.1} s", s.runs, s.failures, s.runtime);
            for p in &s.parameters {
                println!(
                    "{}: [{:.4}, {:.4}] mean {:.4} sd {:.4}",
                    p.name, p.min, p.max, p.mean, p.std
                );
            }
        }
        "filter" => {
            let r = experiment::cmd_filter(cfg)?;
            match &r.status {
                FilterStatus::Ok => println!("q = {:.6e} over {} innovations", r.fitness, r.len()),
                FilterStatus::Penalized { reason, step } => {
                    println!("filter stopped at step {step}: {reason}")
                }
            }
        }
        "fitness-slice" => {
            let pts = experiment::cmd_fitness_slice(cfg)?;
            let p = cfg.param_box.dim();
            for (i, r) in experiment::slice_ranges(&pts, p).iter().enumerate() {
                if r.is_finite() {
                    println!("{}: q range {:.6e}", cfg.param_box.names()[i], r);
                }
            }
        }
        _ => unreachable!("clap rejects unknown subcommands"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let result = config(sub).and_then(|cfg| run(name, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
