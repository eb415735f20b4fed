//! Experiment CLI: `train` runs one configuration and emits its files,
//! `sweep` trains every (algorithm, eta) pair and aggregates final
//! distortions, `gradcheck` verifies analytic gradients against finite
//! differences.
//!
//! Configuration comes from an optional `--config <file>` (flat
//! `key = value` lines) plus `--<key> <value>` flags for any config key;
//! flags win. `VDSOM_OUTPUT_DIR` overrides the output directory.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 runtime error,
//! 3 gradient check failure.

use std::collections::BTreeMap;
use std::process::ExitCode;

use vdsom::config::{config_from_kv, parse_key_values, AlgorithmKind, RunConfig};
use vdsom::error::VdsomError;
use vdsom::gradcheck::run_suite;
use vdsom::run::{run_sweep, run_train};

const USAGE: &str = "\
usage: vdsom <subcommand> [options]

subcommands:
  train       run one training configuration and emit its files
  sweep       train every (algorithm, eta) pair; aggregate final distortion
  gradcheck   verify analytic gradients against finite differences

options (train, sweep):
  --config <file>        flat `key = value` configuration file
  --<key> <value>        override any configuration key (see README)
options (sweep):
  --etas <list>          comma-separated elasticities (default 0.5,1,2,4)
  --algorithms <list>    comma-separated subset of vdsom,dsom (default both)
options (gradcheck):
  --trials <n>           number of seeded configurations (default 120)
  --seed <n>             suite seed (default 42)
  --paper-exact          check the published bandwidth-gradient variant
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(code) => code,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            eprintln!("{USAGE}");
            ExitCode::from(1)
        }
        Err(CliError::Validation(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Usage(String),
    Validation(VdsomError),
    Runtime(VdsomError),
}

fn dispatch(args: &[String]) -> Result<ExitCode, CliError> {
    let Some(subcommand) = args.first() else {
        return Err(CliError::Usage("missing subcommand".into()));
    };
    let rest = &args[1..];
    match subcommand.as_str() {
        "train" => cmd_train(rest),
        "sweep" => cmd_sweep(rest),
        "gradcheck" => cmd_gradcheck(rest),
        "--help" | "-h" | "help" => {
            println!("{USAGE}");
            Ok(ExitCode::SUCCESS)
        }
        other => Err(CliError::Usage(format!("unknown subcommand `{other}`"))),
    }
}

/// Parses `--key value` and `--key=value` pairs into an ordered map.
fn parse_flags(args: &[String]) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(key) = arg.strip_prefix("--") else {
            return Err(CliError::Usage(format!("unexpected argument `{arg}`")));
        };
        if let Some((k, v)) = key.split_once('=') {
            map.insert(k.to_string(), v.to_string());
        } else if key == "paper-exact" {
            map.insert(key.to_string(), "true".to_string());
        } else {
            let value = it
                .next()
                .ok_or_else(|| CliError::Usage(format!("flag --{key} needs a value")))?;
            map.insert(key.to_string(), value.clone());
        }
    }
    Ok(map)
}

/// Merges the config file (if any) with flag overrides and builds the run
/// configuration, applying the output-directory environment override.
fn build_config(mut flags: BTreeMap<String, String>) -> Result<RunConfig, CliError> {
    let mut kv = match flags.remove("config") {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Validation(VdsomError::io(&path, e)))?;
            parse_key_values(&text).map_err(CliError::Validation)?
        }
        None => BTreeMap::new(),
    };
    kv.extend(flags);
    let mut config = config_from_kv(kv).map_err(CliError::Validation)?;
    if let Ok(dir) = std::env::var("VDSOM_OUTPUT_DIR") {
        config.output_dir = dir.into();
    }
    Ok(config)
}

fn cmd_train(args: &[String]) -> Result<ExitCode, CliError> {
    let config = build_config(parse_flags(args)?)?;
    let outcome = run_train(&config).map_err(CliError::Runtime)?;
    if let Some(sigma) = outcome.final_sigma {
        println!("final sigma       {sigma:.6}");
    }
    println!("final distortion  {:.6e}", outcome.final_distortion);
    if let Some((adjacent, random)) = outcome.organization {
        println!("organization      adjacent {adjacent:.6} vs random {random:.6}");
    }
    for path in &outcome.emitted {
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &[String]) -> Result<ExitCode, CliError> {
    let mut flags = parse_flags(args)?;
    let etas = match flags.remove("etas") {
        Some(list) => parse_f64_list(&list)?,
        None => vec![0.5, 1.0, 2.0, 4.0],
    };
    let algorithms = match flags.remove("algorithms") {
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse::<AlgorithmKind>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::Validation)?,
        None => vec![AlgorithmKind::Vdsom, AlgorithmKind::Dsom],
    };
    let config = build_config(flags)?;
    let outcome = run_sweep(&config, &etas, &algorithms).map_err(CliError::Runtime)?;
    println!("algorithm  eta      distortion");
    for row in &outcome.rows {
        println!(
            "{:<10} {:<8} {:.6e}",
            row.algorithm.to_string(),
            row.eta,
            row.distortion
        );
    }
    println!("wrote {}", outcome.csv_path.display());
    if outcome.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for (alg, eta, message) in &outcome.failures {
            eprintln!("run ({alg}, eta {eta}) failed: {message}");
        }
        Ok(ExitCode::from(2))
    }
}

fn cmd_gradcheck(args: &[String]) -> Result<ExitCode, CliError> {
    let mut flags = parse_flags(args)?;
    let trials: usize = match flags.remove("trials") {
        Some(v) => v
            .parse()
            .map_err(|_| CliError::Usage(format!("--trials: cannot parse `{v}`")))?,
        None => 120,
    };
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let seed: u64 = match flags.remove("seed") {
        Some(v) => v
            .parse()
            .map_err(|_| CliError::Usage(format!("--seed: cannot parse `{v}`")))?,
        None => 42,
    };
    let paper_exact = flags.remove("paper-exact").is_some();
    if let Some((key, _)) = flags.into_iter().next() {
        return Err(CliError::Usage(format!("unknown gradcheck flag --{key}")));
    }

    let report = run_suite(trials, seed, paper_exact)
        .map_err(CliError::Runtime)?;
    println!("trials            {}", report.trials);
    println!("comparisons       {}", report.comparisons);
    println!("max rel error     {:.3e}", report.max_rel_error);
    println!("max abs error     {:.3e}", report.max_abs_error);
    if report.passed() {
        println!("gradcheck PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        for failure in report.failures.iter().take(5) {
            println!(
                "FAIL trial {} {}: analytic {:.6e} vs numeric {:.6e} (error {:.3e})",
                failure.trial, failure.component, failure.analytic, failure.numeric, failure.error
            );
        }
        println!("gradcheck FAIL ({} comparisons failed)", report.failures.len());
        Ok(ExitCode::from(3))
    }
}

fn parse_f64_list(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--etas: cannot parse `{s}`")))
        })
        .collect()
}
