use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fklab::harness::{self, Command, ExperimentConfig, HarnessError, SweepSpec};
use fklab::sampler::Kernel;

#[derive(Parser)]
#[command(name = "fklab", version, about = "Random-cluster and Ising model laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact enumeration: edge marginals, connection probability, or the surface-tension derivative check
    Oracle(Common),
    /// Run the FK sampler and report open-edge density and cluster count
    Sample(Common),
    /// Monte Carlo estimate of one event
    Estimate(Common),
    /// Repeat a subcommand over values of one numeric parameter
    Sweep(SweepArgs),
    /// Surface-tension disconnection estimates on rectangles
    Surface(Common),
    /// Frequency of Unique(δL) under sprinkling
    Unique(Common),
    /// The U_i trajectory under sprinkling
    Usequence(Common),
    /// Renormalized site field on a slab
    Renorm(Common),
    /// Weak-mixing gap on H(K)
    Mixing(Common),
    /// Summarize an existing run directory
    Report(ReportArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON or TOML config; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parent directory for the run directory; without it nothing is written
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "L")]
    l: Option<i32>,
    #[arg(long = "N")]
    n: Option<i32>,
    #[arg(long = "M")]
    m: Option<i32>,
    #[arg(long = "K")]
    k: Option<i32>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long)]
    ell: Option<i32>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// Comma-separated sprinkling intensities
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    /// free or wired
    #[arg(long)]
    bc: Option<String>,
    /// Observable selector, see the README for each subcommand
    #[arg(long)]
    event: Option<String>,
    /// Points as "x,y,z;x,y,z"
    #[arg(long)]
    targets: Option<String>,
    /// Explicit region as JSON, e.g. '{"dim":2,"kind":"box","n":1}'
    #[arg(long)]
    region: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    thinning: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    dump_samples: bool,
    #[arg(long)]
    site_threshold: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Subcommand to repeat
    #[arg(long)]
    over: Option<String>,
    /// Parameter to vary
    #[arg(long)]
    axis: Option<String>,
    /// Comma-separated values
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReportArgs {
    run_dir: PathBuf,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(vec![msg.into()])
}

fn parse_command(name: &str) -> Result<Command, HarnessError> {
    serde_json::from_value(serde_json::Value::String(name.into()))
        .map_err(|_| config_err(format!("unknown subcommand {name:?}")))
}

fn parse_targets(s: &str) -> Result<Vec<Vec<i32>>, HarnessError> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.split(',')
                .map(|c| c.trim().parse::<i32>().map_err(|_| config_err(format!("targets: bad coordinate {c:?}"))))
                .collect()
        })
        .collect()
}

fn build_config(cmd: Command, a: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut c = match &a.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    c.command = Some(cmd);
    macro_rules! over {
        ($($field:ident),*) => { $( if a.$field.is_some() { c.$field = a.$field.clone(); } )* };
    }
    over!(d, l, n, m, k, delta, c, ell, c0, p, q, eps, beta, h, s, bc, event, site_threshold);
    if let Some(seed) = fklab::rng::seed_from_env() {
        c.seed = Some(seed);
    }
    if a.seed.is_some() {
        c.seed = a.seed;
    }
    if a.out.is_some() {
        c.out_dir = a.out.clone();
    }
    if let Some(t) = &a.targets {
        c.targets = Some(parse_targets(t)?);
    }
    if let Some(r) = &a.region {
        c.region = Some(serde_json::from_str(r).map_err(|e| config_err(format!("region: {e}")))?);
    }
    if let Some(k) = &a.kernel {
        let kernel: Kernel = serde_json::from_value(serde_json::Value::String(k.clone()))
            .map_err(|_| config_err(format!("kernel: unknown {k:?}")))?;
        c.sampler.kernel = kernel;
    }
    let s = &mut c.sampler;
    if let Some(v) = a.burn_in {
        s.burn_in = v;
    }
    if let Some(v) = a.thinning {
        s.thinning = v;
    }
    if let Some(v) = a.samples {
        s.samples = v;
    }
    if let Some(v) = a.chains {
        s.chains = v;
    }
    if let Some(v) = a.threads {
        s.threads = v;
    }
    c.dump_samples |= a.dump_samples;
    Ok(c)
}

fn config_for(cli: Cli) -> Result<ExperimentConfig, HarnessError> {
    let (cmd, common) = match cli.cmd {
        Cmd::Oracle(a) => (Command::Oracle, a),
        Cmd::Sample(a) => (Command::Sample, a),
        Cmd::Estimate(a) => (Command::Estimate, a),
        Cmd::Surface(a) => (Command::Surface, a),
        Cmd::Unique(a) => (Command::Unique, a),
        Cmd::Usequence(a) => (Command::Usequence, a),
        Cmd::Renorm(a) => (Command::Renorm, a),
        Cmd::Mixing(a) => (Command::Mixing, a),
        Cmd::Report(r) => {
            return Ok(ExperimentConfig { command: Some(Command::Report), run_dir: Some(r.run_dir), ..Default::default() })
        }
        Cmd::Sweep(sw) => {
            let mut c = build_config(Command::Sweep, &sw.common)?;
            let mut spec = c.sweep.take().unwrap_or(SweepSpec { command: Command::Oracle, axis: String::new(), values: vec![] });
            if let Some(o) = &sw.over {
                spec.command = parse_command(o)?;
            }
            if let Some(a) = sw.axis {
                spec.axis = a;
            }
            if let Some(v) = sw.values {
                spec.values = v;
            }
            c.sweep = Some(spec);
            return Ok(c);
        }
    };
    build_config(cmd, &common)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let color = std::io::stderr().is_terminal() && std::env::var_os("NO_COLOR").is_none();
    let fail = |e: HarnessError| {
        if color {
            eprintln!("\x1b[31merror:\x1b[0m {e}");
        } else {
            eprintln!("error: {e}");
        }
        ExitCode::from(e.exit_code() as u8)
    };
    let cfg = match config_for(cli) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let result = if cfg.command == Some(Command::Report) {
        cfg.validate().and_then(|_| harness::report(cfg.run_dir.as_ref().expect("validated"))).map(|o| (None, o))
    } else {
        harness::run(&cfg).map(|(rec, o)| (rec.run_dir, o))
    };
    match result {
        Ok((dir, out)) => {
            print!("{}", harness::format_table(&out.rows));
            for n in &out.notes {
                println!("# {n}");
            }
            if let Some(d) = dir {
                println!("# run directory: {}", d.display());
            }
            if out.has_bound() {
                eprintln!("note: at least one row is a one-sided bound (no events observed)");
                ExitCode::from(harness::EXIT_BOUND as u8)
            } else {
                ExitCode::from(harness::EXIT_OK as u8)
            }
        }
        Err(e) => fail(e),
    }
}
