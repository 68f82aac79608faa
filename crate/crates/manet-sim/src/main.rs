//! Command-line harness: single runs and full sweeps.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use manet_sim::report::emit_report;
use manet_sim::scenario::{
    collect_result, run_scenario, sweep, MobilityConfig, RunResult, ScenarioConfig,
};
use manet_sim::{Protocol, SimTime};

#[derive(Parser)]
#[command(
    name = "manet-sim",
    about = "Deterministic AODV/DSDV/DSR comparison simulator for mobile ad-hoc networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single scenario and print its metrics.
    Run(RunArgs),
    /// Run the protocol x simulation-time x seed product and emit reports.
    Sweep(SweepArgs),
}

/// Scenario settings; flags override the JSON config file.
#[derive(Args, Debug)]
struct ScenarioArgs {
    /// JSON scenario config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Routing protocol: aodv, dsdv or dsr.
    #[arg(long)]
    protocol: Option<Protocol>,
    /// Number of mobile nodes.
    #[arg(long)]
    nodes: Option<u32>,
    /// Arena as WxH in meters, e.g. 867x561.
    #[arg(long)]
    area: Option<String>,
    /// Simulated duration in seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Mobility model: "rwp" or "trace:<path>" (SUMO FCD XML).
    #[arg(long)]
    mobility: Option<String>,
    /// Number of CBR flows.
    #[arg(long)]
    flows: Option<usize>,
    /// Payload bytes per packet.
    #[arg(long)]
    packet_size: Option<u32>,
    /// Aggregate offered load, packets per second.
    #[arg(long)]
    rate: Option<f64>,
    /// Radio range in meters.
    #[arg(long)]
    range: Option<f64>,
    /// Per-frame loss probability in [0,1].
    #[arg(long)]
    loss: Option<f64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Also write results.csv / series / summary into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write one line per executed event (time_us,node,action_kind).
    #[arg(long)]
    event_trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Protocols to sweep, comma-separated.
    #[arg(long, default_value = "aodv,dsdv,dsr")]
    protocols: String,
    /// Simulation times in seconds, comma-separated.
    #[arg(long, default_value = "25,50,75,100,125,150,175")]
    times: String,
    /// Seeds, comma-separated.
    #[arg(long, default_value = "1")]
    seeds: String,
    /// Output directory for results.csv, series files and summary.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_area(spec: &str) -> Result<[f64; 2], String> {
    let (w, h) = spec
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("area must look like 867x561, got '{spec}'"))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("area dimension '{s}' is not a number"))
    };
    Ok([parse(w)?, parse(h)?])
}

fn parse_mobility(spec: &str) -> Result<MobilityConfig, String> {
    if spec == "rwp" {
        return Ok(MobilityConfig::default());
    }
    if let Some(path) = spec.strip_prefix("trace:") {
        return Ok(MobilityConfig::Trace { path: PathBuf::from(path) });
    }
    Err(format!("mobility must be 'rwp' or 'trace:<path>', got '{spec}'"))
}

fn parse_list<T: std::str::FromStr>(spec: &str, what: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("bad {what} '{s}': {e}")))
        .collect()
}

fn build_config(args: &ScenarioArgs) -> Result<ScenarioConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_str::<ScenarioConfig>(&text)
                .map_err(|e| format!("bad config {}: {e}", path.display()))?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(p) = args.protocol {
        cfg.protocol = p;
    }
    if let Some(n) = args.nodes {
        cfg.n_nodes = n;
    }
    if let Some(area) = &args.area {
        cfg.arena = parse_area(area)?;
    }
    if let Some(d) = args.duration {
        cfg.duration = d;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(m) = &args.mobility {
        cfg.mobility = parse_mobility(m)?;
    }
    if let Some(f) = args.flows {
        cfg.traffic.flows = f;
    }
    if let Some(ps) = args.packet_size {
        cfg.traffic.packet_size = ps;
    }
    if let Some(r) = args.rate {
        cfg.traffic.aggregate_rate = r;
    }
    if let Some(r) = args.range {
        cfg.channel.range = r;
    }
    if let Some(l) = args.loss {
        cfg.channel.loss_prob = l;
    }
    Ok(cfg)
}

fn fmt_opt(v: f64, decimals: usize) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.decimals$}")
    }
}

/// Writes to stdout, treating a closed pipe (e.g. `| head`) as a normal end
/// of output rather than a panic.
fn emit(text: &str) {
    use std::io::Write;
    if std::io::stdout().write_all(text.as_bytes()).is_err() {
        std::process::exit(0);
    }
}

fn print_result(r: &RunResult) {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!("protocol          {}", r.protocol));
    line(format!("sim_time          {} s", r.sim_time));
    line(format!("seed              {}", r.seed));
    line(format!("packets_sent      {}", r.sent));
    line(format!("packets_received  {}", r.received));
    line(format!("packets_forwarded {}", r.forwarded));
    line(format!("control_tx        {}", r.control_tx));
    line(format!("paper_pdr         {}", fmt_opt(r.paper_pdr, 2)));
    line(format!("pdr               {}", fmt_opt(r.pdr, 4)));
    line(format!("throughput_Bps    {}", fmt_opt(r.throughput_bps, 2)));
    line(format!("avg_delay_s       {}", fmt_opt(r.avg_delay_s, 6)));
    line(format!("nrl               {}", fmt_opt(r.nrl, 4)));
    if !r.drops.is_empty() {
        let drops: Vec<String> =
            r.drops.iter().map(|(reason, n)| format!("{reason}={n}")).collect();
        line(format!("drops             {}", drops.join(" ")));
    }
    line(format!("outstanding       {}", r.outstanding));
    line(format!("wall_ms           {}", r.wall_ms));
    emit(&out);
}

fn cmd_run(args: RunArgs) -> Result<(), String> {
    let cfg = build_config(&args.scenario)?;
    let result = match &args.event_trace {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
            let started = std::time::Instant::now();
            let mut net = cfg.build_network().map_err(|e| e.to_string())?;
            net.set_event_trace(Box::new(std::io::BufWriter::new(file)));
            net.run_to(SimTime::from_secs_f64(cfg.duration));
            collect_result(&net, &cfg, started.elapsed().as_millis() as u64)
        }
        None => run_scenario(&cfg).map_err(|e| e.to_string())?,
    };
    print_result(&result);
    if let Some(dir) = &args.out {
        let files = emit_report(&[result], dir).map_err(|e| e.to_string())?;
        eprintln!("wrote {}", files.results_csv.display());
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), String> {
    let cfg = build_config(&args.scenario)?;
    let protocols: Vec<Protocol> = parse_list(&args.protocols, "protocol")?;
    let times: Vec<f64> = parse_list(&args.times, "time")?;
    let seeds: Vec<u64> = parse_list(&args.seeds, "seed")?;
    let results = sweep(&cfg, &protocols, &times, &seeds).map_err(|e| e.to_string())?;
    let files = emit_report(&results, &args.out).map_err(|e| e.to_string())?;
    emit(&manet_sim::report::render_summary(&results));
    eprintln!(
        "wrote {} and {} series files to {}",
        files.results_csv.display(),
        files.series.len(),
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
