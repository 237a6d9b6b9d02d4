//! Experiment runner for consistent-attack asymptotics.
//!
//! Usage:
//!   advlim <existence|asymptotic|simulate|tune|compare>
//!          [--config PATH] [--out PATH] [--seed U64] [--threads N] [--json]
//!
//! Exit codes: 0 success, 1 partial (some rows failed), 2 invalid usage or
//! configuration.

use advlim_cli::config::ExperimentConfig;
use advlim_cli::run_command;
use std::process::ExitCode;

const USAGE: &str = "usage: advlim <existence|asymptotic|simulate|tune|compare> \
[--config PATH] [--out PATH] [--seed U64] [--threads N] [--json]";

struct Args {
    command: String,
    config_path: Option<String>,
    out_path: Option<String>,
    seed: Option<u64>,
    threads: Option<usize>,
    json: bool,
}

fn parse_args(argv: &[String]) -> Result<Args, String> {
    let mut it = argv.iter();
    let command = it.next().ok_or_else(|| USAGE.to_string())?.clone();
    let mut args = Args {
        command,
        config_path: None,
        out_path: None,
        seed: None,
        threads: None,
        json: false,
    };
    while let Some(flag) = it.next() {
        match flag.as_str() {
            "--config" => {
                args.config_path = Some(it.next().ok_or("--config needs a path")?.clone())
            }
            "--out" => args.out_path = Some(it.next().ok_or("--out needs a path")?.clone()),
            "--seed" => {
                let v = it.next().ok_or("--seed needs a value")?;
                args.seed = Some(v.parse().map_err(|_| format!("bad seed '{v}'"))?);
            }
            "--threads" => {
                let v = it.next().ok_or("--threads needs a value")?;
                args.threads = Some(v.parse().map_err(|_| format!("bad thread count '{v}'"))?);
            }
            "--json" => args.json = true,
            other => return Err(format!("unknown flag '{other}'\n{USAGE}")),
        }
    }
    Ok(args)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let args = match parse_args(&argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Some(threads) = args.threads {
        if threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }
    let text = match &args.config_path {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("cannot read config {path}: {e}");
                return ExitCode::from(2);
            }
        },
        None => String::new(),
    };
    let mut cfg = match ExperimentConfig::from_text(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let table = match run_command(&args.command, &cfg) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let csv = table.to_csv();
    match &args.out_path {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &csv) {
                eprintln!("cannot write {path}: {e}");
                return ExitCode::from(2);
            }
            if args.json {
                let json_path = format!("{path}.json");
                if let Err(e) = std::fs::write(&json_path, table.to_json()) {
                    eprintln!("cannot write {json_path}: {e}");
                    return ExitCode::from(2);
                }
            }
        }
        None => {
            use std::io::Write;
            let out = if args.json { table.to_json() } else { csv };
            // a closed pipe downstream is not an error for a CSV emitter
            let _ = std::io::stdout().write_all(out.as_bytes());
        }
    }
    if table.failed_rows() > 0 {
        eprintln!(
            "{} row(s) flagged; see the status column",
            table.failed_rows()
        );
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
