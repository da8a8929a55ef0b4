use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgMatches, Command};

use bidir_mmse::harness::{
    channel_stats, config::parse_pairs, run_analysis_comparison, run_ber_curve, run_sinr_vs_fading,
    write_channel_stats, write_csv, ExperimentConfig, KEYS,
};

const SUBCOMMANDS: &[(&str, &str)] = &[
    ("ber", "BER learning curves over the SNR grid"),
    ("sinr-vs-fading", "normalized SINR after training and at packet end over the fading grid"),
    ("analyze", "analytical vs simulated SINR learning curves and the MMSE bound"),
    ("channel-stats", "empirical vs theoretical channel autocorrelation"),
];

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

fn subcommand(name: &'static str, about: &'static str) -> Command {
    let mut cmd = Command::new(name)
        .about(about)
        .arg(Arg::new("config").long("config").value_name("FILE").value_parser(value_parser!(PathBuf)).help("key = value config file"))
        .arg(Arg::new("out").long("out").value_name("FILE").value_parser(value_parser!(PathBuf)).help("CSV output path [default: stdout]"))
        .arg(Arg::new("threads").long("threads").value_name("N").value_parser(value_parser!(usize)).help("worker threads [default: all cores]"));
    for (key, default, help) in KEYS {
        let shown = if default.is_empty() { "none" } else { default };
        cmd = cmd.arg(
            Arg::new(*key)
                .long(flag(key))
                .value_name("VALUE")
                .help(format!("{help} [default: {shown}]")),
        );
    }
    cmd
}

fn cli() -> Command {
    Command::new("bidirsim")
        .about("Monte Carlo simulator for bidirectional MMSE adaptive DS-CDMA receivers")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommands(SUBCOMMANDS.iter().map(|(n, a)| subcommand(n, a)))
}

fn load_config(m: &ArgMatches) -> bidir_mmse::Result<ExperimentConfig> {
    let mut pairs = match m.get_one::<PathBuf>("config") {
        Some(path) => parse_pairs(&fs::read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    for (key, _, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            pairs.insert(key.to_string(), v.clone());
        }
    }
    ExperimentConfig::from_pairs(&pairs)
}

fn run(name: &str, m: &ArgMatches) -> bidir_mmse::Result<()> {
    let cfg = load_config(m)?;
    let mut buf = Vec::new();
    match name {
        "ber" => write_csv(&run_ber_curve(&cfg)?, &mut buf)?,
        "sinr-vs-fading" => write_csv(&run_sinr_vs_fading(&cfg)?, &mut buf)?,
        "analyze" => write_csv(&run_analysis_comparison(&cfg)?, &mut buf)?,
        "channel-stats" => write_channel_stats(&channel_stats(&cfg)?, &mut buf)?,
        _ => unreachable!("clap rejects unknown subcommands"),
    }
    match m.get_one::<PathBuf>("out") {
        Some(path) => fs::write(path, &buf)?,
        None => io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let result = match sub.get_one::<usize>("threads") {
        Some(&n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(name, sub)),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        },
        None => run(name, sub),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
