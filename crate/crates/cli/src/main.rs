mod launch;
mod settings;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use offpath_md::analysis::{
    auxiliary_node_estimate, compute_tdr, default_delta, find_knee, improvement,
    max_comm_offload_improvement,
};
use offpath_md::bench::{
    self, read_table, table, write_table, BenchError, ConfigError, ModeSelection, RunConfig, Table, TransportKind,
};
use offpath_md::scheduler::{simulate, RunMode, RunSetup, SimError, SimulationResult};

use settings::Settings;

#[derive(Parser)]
#[command(name = "mdbench", version, about = "Lennard-Jones MD benchmark: baseline and off-path force offload")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured mode(s) and write thermo and timing CSVs.
    Run(Settings),
    /// Baseline against off-path over the sweep axes.
    Sweep(Settings),
    /// Measure per-call routine times and predict the off-path runtime.
    Model(ModelArgs),
    /// Temperature divergence between two thermo CSVs, or calibrate its threshold.
    Report(ReportArgs),
    #[command(hide = true)]
    Worker(WorkerArgs),
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    settings: Settings,
    /// Also run off-path and compare against the prediction.
    #[arg(long)]
    validate: bool,
    /// Host thread counts to scan for the knee, e.g. 1,2,4.
    #[arg(long)]
    knee: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    settings: Settings,
    #[arg(long, requires = "reference")]
    test: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Derive the threshold from the spread of baseline runs over seeds.
    #[arg(long)]
    calibrate_delta: bool,
    #[arg(long, default_value_t = 5)]
    seeds: u64,
}

#[derive(Args)]
struct WorkerArgs {
    #[arg(long)]
    setup: PathBuf,
    #[arg(long)]
    rank: usize,
    #[arg(long, value_delimiter = ',')]
    peers: Vec<SocketAddr>,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Bench(BenchError),
    Mismatch(String),
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        Failure::Bench(e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Bench(e.into())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Bench(e.into())
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Bench(BenchError::Config(_)) | Failure::Bench(BenchError::TooFewIterations { .. }) => 2,
            Failure::Bench(BenchError::Sim(e)) => e.exit_code().clamp(1, 255) as u8,
            Failure::Mismatch(_) => 3,
            Failure::Bench(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Bench(e) => write!(f, "{e}"),
            Failure::Mismatch(m) => f.write_str(m),
        }
    }
}

fn env(key: &str) -> Option<String> {
    std::env::var(key).ok()
}

fn runner(cfg: &RunConfig) -> impl Fn(&RunSetup) -> Result<SimulationResult, SimError> + '_ {
    move |setup: &RunSetup| match cfg.transport {
        TransportKind::Local => simulate(setup),
        TransportKind::Socket => launch::socket_run(setup, &cfg.peers, &cfg.out_dir.join(".work")),
    }
}

fn provenance(cfg: &RunConfig, mode: RunMode) -> Vec<(String, String)> {
    let mut c = cfg.clone();
    c.mode = ModeSelection::Single(mode);
    c.to_kv()
}

fn save(cfg: &RunConfig, name: &str, t: &Table) -> Result<PathBuf, BenchError> {
    let path = cfg.out_dir.join(name);
    write_table(&path, t)?;
    Ok(path)
}

fn same_trajectory(a: &SimulationResult, b: &SimulationResult) -> bool {
    let bits = |r: &SimulationResult| -> Vec<[u64; 4]> {
        r.thermo
            .iter()
            .map(|s| [s.temperature.to_bits(), s.pe.to_bits(), s.ke.to_bits(), s.total.to_bits()])
            .collect()
    };
    a.final_state == b.final_state && bits(a) == bits(b)
}

fn print_timing(label: &str, r: &SimulationResult) {
    let t = r.timing;
    println!(
        "{label:<20} total {:.4}s  force {:.4}s  neigh {:.4}s  comm {:.4}s",
        t.t_total, t.t_force, t.t_neigh, t.t_comm
    );
}

fn cmd_run(cfg: RunConfig) -> Result<(), Failure> {
    if !(cfg.sweep_cells.is_empty() && cfg.sweep_reneigh.is_empty() && cfg.sweep_skin.is_empty()) {
        return cmd_sweep(cfg);
    }
    let run = runner(&cfg);
    let mut timing = Table::new(cfg.to_kv(), &table::timing_columns());
    let mut results = Vec::new();
    let label = format!("{}/{}/{}", cfg.nodes, cfg.host_threads, cfg.offload_threads);
    for mode in cfg.mode.modes() {
        let r = run(&cfg.setup(mode))?;
        let path = save(&cfg, &format!("thermo_{mode}.csv"), &table::thermo_table(provenance(&cfg, mode), &r.thermo))?;
        println!("{mode}: {} thermo samples -> {}", r.thermo.len(), path.display());
        print_timing(mode.as_str(), &r);
        timing.push(table::timing_row(&label, mode.as_str(), &r.timing));
        results.push((mode, r));
    }

    if cfg.mode == ModeSelection::Single(RunMode::OffpathSyncDebug) {
        let base = run(&cfg.setup(RunMode::Baseline))?;
        timing.push(table::timing_row(&label, RunMode::Baseline.as_str(), &base.timing));
        save(&cfg, "timing.csv", &timing)?;
        if !same_trajectory(&base, &results[0].1) {
            return Err(Failure::Mismatch(
                "offpath-sync-debug trajectory differs from baseline".into(),
            ));
        }
        println!("offpath-sync-debug is bitwise identical to baseline");
        return Ok(());
    }
    save(&cfg, "timing.csv", &timing)?;

    if cfg.mode == ModeSelection::Both {
        let base = &results[0].1;
        let off = &results[1].1;
        let reference = if cfg.params.reneigh_interval == 1 {
            base.clone()
        } else {
            let mut c = cfg.clone();
            c.params.reneigh_interval = 1;
            run(&c.setup(RunMode::Baseline))?
        };
        let mut tdr = Table::new(cfg.to_kv(), &table::tdr_columns());
        for (name, r) in [("baseline", base), ("offpath", off)] {
            let rep = bench::tdr_against(r, &reference, cfg.delta).map_err(BenchError::from)?;
            println!("{name:<9} alpha {:+.3e}  beta {:+.3e}  pass {}", rep.alpha, rep.beta, rep.pass);
            tdr.push(table::tdr_row(name, &rep));
        }
        save(&cfg, "tdr.csv", &tdr)?;
        let mut summary = Table::new(
            cfg.to_kv(),
            &["baseline_total", "offpath_total", "improvement", "max_comm_offload_pct"],
        );
        let imp = improvement(base.timing.t_total, off.timing.t_total);
        let bound = max_comm_offload_improvement(&base.timing);
        summary.push(vec![
            base.timing.t_total.to_string(),
            off.timing.t_total.to_string(),
            imp.to_string(),
            bound.to_string(),
        ]);
        save(&cfg, "summary.csv", &summary)?;
        println!("improvement {:+.2}%  (communication-offload bound {:.2}%)", imp * 100.0, bound);
    }
    Ok(())
}

fn cmd_sweep(cfg: RunConfig) -> Result<(), Failure> {
    let run = runner(&cfg);
    println!("{}", bench::sweep_columns().join(","));
    let t = bench::sweep(&cfg, &run, |row| println!("{}", row.join(",")))?;
    let path = save(&cfg, "sweep.csv", &t)?;
    println!("-> {}", path.display());
    Ok(())
}

fn cmd_model(args: ModelArgs) -> Result<(), Failure> {
    let cfg = args.settings.resolve(env)?;
    let run = runner(&cfg);
    let (m, estimate) = bench::predict(&cfg, &run)?;
    println!(
        "{}  host per call: force {:.3e} neigh {:.3e} comm {:.3e}  offload per call: force {:.3e} comm {:.3e}",
        m.label(),
        m.host.t_force,
        m.host.t_neigh,
        m.host.t_comm,
        m.offload.t_force,
        m.offload.t_comm
    );
    println!("baseline total {:.4}s  predicted off-path {:.4}s", m.t_total, estimate);
    let mut t = Table::new(
        cfg.to_kv(),
        &[
            "label",
            "host_force",
            "host_neigh",
            "host_comm",
            "offload_force",
            "offload_comm",
            "baseline_total",
            "estimate",
            "measured",
            "relative_error",
        ],
    );
    let mut measured = String::new();
    let mut rel = String::new();
    if args.validate {
        let off = run(&cfg.setup(RunMode::Offpath))?;
        let e = (estimate - off.timing.t_total) / off.timing.t_total;
        println!("measured off-path {:.4}s  relative error {:+.2}%", off.timing.t_total, e * 100.0);
        measured = off.timing.t_total.to_string();
        rel = e.to_string();
    }
    t.push(vec![
        m.label(),
        m.host.t_force.to_string(),
        m.host.t_neigh.to_string(),
        m.host.t_comm.to_string(),
        m.offload.t_force.to_string(),
        m.offload.t_comm.to_string(),
        m.t_total.to_string(),
        estimate.to_string(),
        measured,
        rel,
    ]);
    save(&cfg, "model.csv", &t)?;

    if let Some(list) = &args.knee {
        let counts = offpath_md::bench::config::parse_usize_list("knee", list)?;
        let mut host = Vec::new();
        for &h in &counts {
            let mut c = cfg.clone();
            c.host_threads = h;
            host.push((h, run(&c.setup(RunMode::Baseline))?.rebuild_costs()));
        }
        match find_knee(&host, m.offload) {
            Some(h) => println!("knee at {h} host threads"),
            None => println!("no knee: empty thread list"),
        }
        let mut single = cfg.clone();
        single.host_threads = 1;
        let aux = run(&single.setup(RunMode::Baseline))?.rebuild_costs();
        let t_aux = auxiliary_node_estimate(&m, aux, cfg.params.n_iterations, cfg.params.reneigh_interval)
            .map_err(BenchError::from)?;
        println!("auxiliary single-core node: predicted off-path {:.4}s", t_aux);
    }
    Ok(())
}

fn thermo_series(path: &Path) -> Result<Vec<(usize, f64)>, Failure> {
    let t = read_table(path)?;
    let bad = |what: &str| Failure::Bench(BenchError::Config(ConfigError::Invalid(format!("{}: {what}", path.display()))));
    let (i, tc) = match (t.column("iteration"), t.column("temperature")) {
        (Some(i), Some(tc)) => (i, tc),
        _ => return Err(bad("not a thermo table")),
    };
    t.rows
        .iter()
        .map(|r| Ok((r[i].parse().map_err(|_| bad("bad iteration"))?, r[tc].parse().map_err(|_| bad("bad temperature"))?)))
        .collect()
}

fn cmd_report(args: ReportArgs) -> Result<(), Failure> {
    let cfg = args.settings.resolve(env)?;
    if args.calibrate_delta {
        let run = runner(&cfg);
        let mut c = cfg.clone();
        c.params.reneigh_interval = 1;
        let reference = run(&c.setup(RunMode::Baseline))?.temperature_series();
        let mut runs = Vec::new();
        for k in 1..=args.seeds {
            c.params.rng_seed = cfg.params.rng_seed.wrapping_add(k);
            runs.push(run(&c.setup(RunMode::Baseline))?.temperature_series());
        }
        let delta = default_delta(&reference, &runs).map_err(BenchError::from)?;
        println!("delta={delta}");
        return Ok(());
    }
    let (Some(test), Some(reference)) = (&args.test, &args.reference) else {
        return Err(ConfigError::Invalid("report needs --test and --reference, or --calibrate-delta".into()).into());
    };
    let rep = compute_tdr(&thermo_series(test)?, &thermo_series(reference)?, cfg.delta).map_err(BenchError::from)?;
    println!(
        "alpha {:+.6e}  beta {:+.6e}  max|dT| {:.4e}  delta {}  pass {}",
        rep.alpha, rep.beta, rep.max_abs_dt, rep.delta, rep.pass
    );
    let mut t = Table::new(cfg.to_kv(), &table::tdr_columns());
    t.push(table::tdr_row(&test.display().to_string(), &rep));
    save(&cfg, "tdr.csv", &t)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Worker(w) => return ExitCode::from(launch::worker_main(&w.setup, w.rank, &w.peers, &w.report).clamp(0, 255) as u8),
        Cmd::Run(s) => s.resolve(env).map_err(Failure::from).and_then(cmd_run),
        Cmd::Sweep(s) => s.resolve(env).map_err(Failure::from).and_then(cmd_sweep),
        Cmd::Model(a) => cmd_model(a),
        Cmd::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
