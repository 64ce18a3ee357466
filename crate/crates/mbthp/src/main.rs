//! Command-line front end: BER / sum-rate / covariance sweeps, the FLOP
//! comparison table, and the transmit-pattern dump.

use clap::{Args, Parser, Subcommand};
use mbthp::channel::SystemGeometry;
use mbthp::metrics::{flops, FlopAlgorithm, FlopParams};
use mbthp::patterns::build_patterns;
use mbthp::simkit::{
    self, covariance_report_text, csv_string, ExperimentConfig, Metric, Modulation, PrecoderSpec,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mbthp", version, about = "Multi-branch THP link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo bit error rate sweep (CSV output).
    Ber(SweepArgs),
    /// Monte-Carlo sum-rate sweep (CSV output).
    Sumrate(SweepArgs),
    /// Empirical-vs-analytic error covariance check (text report).
    Covariance(SweepArgs),
    /// FLOP comparison table for the implemented and reference algorithms.
    Flops(FlopsArgs),
    /// Dump the transmit-pattern list: `l,i,(j_1,...,j_K),perm-indices`.
    Patterns(PatternsArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Config file (flat key = value); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Precoder name, e.g. mmse-cthp or mb-zf-dthp.
    #[arg(long)]
    precoder: Option<String>,
    /// Branch cap for the mb-* precoders.
    #[arg(long)]
    branches: Option<usize>,
    /// Eb/N0 sweep: start:step:stop or a comma list of dB values.
    #[arg(long)]
    ebno: Option<String>,
    /// Trials (packets) per Eb/N0 point.
    #[arg(long)]
    trials: Option<u64>,
    /// Transmit correlation coefficient in [0, 1).
    #[arg(long)]
    corr: Option<f64>,
    /// CSI error variance.
    #[arg(long, value_name = "VAR")]
    csi_err: Option<f64>,
    /// Worker threads (0 = auto).
    #[arg(long)]
    workers: Option<usize>,
    /// Modulation: qpsk or 16qam.
    #[arg(long)]
    modulation: Option<String>,
    /// Symbol vectors per packet.
    #[arg(long)]
    packet_len: Option<usize>,
    /// Per-user receive antenna counts, e.g. 2,2,2,2.
    #[arg(long)]
    users: Option<String>,
    /// Transmit antennas (defaults to the sum of `--users`).
    #[arg(long)]
    num_tx: Option<usize>,
}

#[derive(Args)]
struct FlopsArgs {
    /// System dimension n (= N_t = N_r).
    #[arg(long, default_value_t = 6)]
    n: u64,
    /// Number of users K.
    #[arg(long, default_value_t = 3)]
    users: u64,
    /// Receive antennas per user N_k.
    #[arg(long, default_value_t = 2)]
    nk: u64,
    /// Branch count L_B for the mb-* rows.
    #[arg(long, default_value_t = 2)]
    branches: u64,
    /// Constellation size M for the vp row.
    #[arg(long, default_value_t = 16)]
    m: u64,
    /// Sphere radius d for the vp row.
    #[arg(long, default_value_t = 2.0)]
    d: f64,
    /// Single algorithm instead of the whole table.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PatternsArgs {
    /// Per-user receive antenna counts, e.g. 2,2,2,2.
    #[arg(long, default_value = "2,2,2,2")]
    users: String,
    /// Transmit antennas (defaults to the sum of `--users`).
    #[arg(long)]
    num_tx: Option<usize>,
    /// Branch cap.
    #[arg(long, default_value_t = 64)]
    branches: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_users(list: &str) -> Result<Vec<usize>, String> {
    list.split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|e| e.to_string()))
        .collect()
}

fn build_config(args: &SweepArgs, metric: Metric) -> Result<ExperimentConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_config_file(path).map_err(|e| e.to_string())?,
        None => ExperimentConfig::default(),
    };
    cfg.metric = metric;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(name) = &args.precoder {
        cfg.precoder =
            PrecoderSpec::parse(name).ok_or_else(|| format!("unknown precoder: {name}"))?;
    }
    if let Some(b) = args.branches {
        cfg.branches = b;
    }
    if let Some(spec) = &args.ebno {
        cfg.ebno_db = simkit::config::parse_ebno(spec)
            .ok_or_else(|| format!("bad --ebno value: {spec}"))?;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(r) = args.corr {
        cfg.correlation_r = r;
    }
    if let Some(v) = args.csi_err {
        cfg.csi_error_var = v;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(m) = &args.modulation {
        cfg.modulation =
            Modulation::parse(m).ok_or_else(|| format!("unknown modulation: {m}"))?;
    }
    if let Some(p) = args.packet_len {
        cfg.packet_len = p;
    }
    if args.users.is_some() || args.num_tx.is_some() {
        let users = match &args.users {
            Some(list) => parse_users(list)?,
            None => cfg.geometry.users().to_vec(),
        };
        let num_tx = args.num_tx.unwrap_or_else(|| users.iter().sum());
        cfg.geometry = SystemGeometry::new(num_tx, users).map_err(|e| e.to_string())?;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| e.to_string()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_sweep(args: &SweepArgs, metric: Metric) -> Result<(), String> {
    let cfg = build_config(args, metric)?;
    match metric {
        Metric::Covariance => {
            let checks = simkit::run_covariance_check(&cfg).map_err(|e| e.to_string())?;
            emit(&args.out, &covariance_report_text(&checks))
        }
        _ => {
            let report = simkit::run_metric(&cfg).map_err(|e| e.to_string())?;
            if report.redraw_count > 0 {
                eprintln!("note: {} rank-deficient channel redraws", report.redraw_count);
            }
            emit(&args.out, &csv_string(&report.rows))
        }
    }
}

fn run_flops(args: &FlopsArgs) -> Result<(), String> {
    let params = FlopParams {
        n: args.n,
        num_users: args.users,
        antennas_per_user: args.nk,
        branches: args.branches,
        constellation_size: args.m,
        sphere_radius: args.d,
    };
    let algorithms: Vec<FlopAlgorithm> = match &args.algorithm {
        Some(name) => vec![FlopAlgorithm::from_name(name).map_err(|e| e.to_string())?],
        None => FlopAlgorithm::ALL.to_vec(),
    };
    let mut text = format!(
        "# n={} K={} N_k={} L_B={} M={} d={}\nalgorithm,flops,notes\n",
        args.n, args.users, args.nk, args.branches, args.m, args.d
    );
    for alg in algorithms {
        let report = flops(alg, &params).map_err(|e| e.to_string())?;
        let note = if alg.analytic_only() { "analytic-only" } else { "" };
        text.push_str(&format!("{},{},{}\n", alg.name(), report.flops, note));
    }
    emit(&args.out, &text)
}

fn run_patterns(args: &PatternsArgs) -> Result<(), String> {
    let users = parse_users(&args.users)?;
    let num_tx = args.num_tx.unwrap_or_else(|| users.iter().sum());
    let geometry = SystemGeometry::new(num_tx, users).map_err(|e| e.to_string())?;
    let mut text = String::new();
    for pattern in build_patterns(&geometry, args.branches) {
        text.push_str(&pattern.dump_line());
        text.push('\n');
    }
    emit(&args.out, &text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ber(args) => run_sweep(args, Metric::Ber),
        Command::Sumrate(args) => run_sweep(args, Metric::SumRate),
        Command::Covariance(args) => run_sweep(args, Metric::Covariance),
        Command::Flops(args) => run_flops(args),
        Command::Patterns(args) => run_patterns(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
