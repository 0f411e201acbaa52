use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use loopfield::coupling::couple;
use loopfield::error::{Error, Result};
use loopfield::experiment::{run_experiment, ExperimentConfig, NetworkSpec};
use loopfield::gff::sample_gff;
use loopfield::green::compute_green;
use loopfield::loopsoup::{occupation_field, LoopSoupSampler, DEFAULT_LENGTH_CUTOFF};
use loopfield::network::Network;
use loopfield::report::{fmt17, Report};
use loopfield::rng::replicate;

#[derive(Parser)]
#[command(name = "loopfield", version, about = "Loop soups, free fields and interlacements on finite graphs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    replicas: Option<usize>,
    /// Output path or prefix.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Clone)]
struct NetArg {
    /// Network file (JSON) or builtin: two-vertex, path3, grid3x3, grid4x4, single.
    #[arg(long, default_value = "two-vertex")]
    net: String,
}

#[derive(Args, Clone)]
struct BoxArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated levels.
    #[arg(long, value_delimiter = ',')]
    u: Vec<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the Green matrix as CSV.
    Green(NetArg),
    /// Per-replica free-field samples as CSV.
    SampleGff(NetArg),
    /// Per-replica occupation fields of the loop soup as CSV.
    SampleLoops {
        #[command(flatten)]
        net: NetArg,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Coupled fields, and the checks that they form a free field.
    Couple(NetArg),
    /// Arcsine law for sign-cluster connectivity.
    Connectivity {
        #[command(flatten)]
        net: NetArg,
        #[arg(long)]
        x: Option<usize>,
        #[arg(long)]
        y: Option<usize>,
    },
    /// Edge avoidance against the determinant ratio.
    DetRatio {
        #[command(flatten)]
        net: NetArg,
        /// Removed edges as `u-v`, comma separated.
        #[arg(long, value_delimiter = ',')]
        edges: Vec<String>,
    },
    /// Bridge integral and three-process zero probability.
    BridgeCheck {
        #[arg(long, value_delimiter = ',')]
        lambda_grid: Vec<f64>,
    },
    /// Vacant-set and occupation checks in a box.
    Interlacement {
        #[command(flatten)]
        size: BoxArgs,
        #[arg(long)]
        window: Option<usize>,
        /// Sets of lattice points: points separated by `;`, sets by `|`,
        /// coordinates by spaces, e.g. "0 0 0|0 0 0;1 0 0".
        #[arg(long)]
        k: Option<String>,
    },
    /// Moments of both sides of the isomorphism on the star graph.
    IsomorphismCheck(BoxArgs),
    /// Containment of the interlacement in the level set.
    LevelsetCheck(BoxArgs),
    /// Run an experiment described by a TOML file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_edges(edges: &[String]) -> Result<Vec<[usize; 2]>> {
    edges
        .iter()
        .map(|s| {
            let (a, b) = s
                .split_once('-')
                .ok_or_else(|| Error::InvalidParameter(format!("edge `{s}` is not of the form u-v")))?;
            let p = |t: &str| t.trim().parse::<usize>().map_err(|e| Error::InvalidParameter(format!("`{t}`: {e}")));
            Ok([p(a)?, p(b)?])
        })
        .collect()
}

fn parse_sets(s: &str) -> Result<Vec<Vec<Vec<i64>>>> {
    s.split('|')
        .map(|set| {
            set.split(';')
                .map(|pt| {
                    pt.split_whitespace()
                        .map(|c| c.parse::<i64>().map_err(|e| Error::InvalidParameter(format!("`{c}`: {e}"))))
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn load_net(arg: &NetArg) -> Result<Network> {
    NetworkSpec::from_arg(&arg.net).build()
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_rows(out: Option<&Path>, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink(out)?);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|&v| fmt17(v))).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn vertex_header(prefix: &str, n: usize) -> Vec<String> {
    std::iter::once("replica".to_string()).chain((0..n).map(|x| format!("{prefix}{x}"))).collect()
}

fn indexed(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| std::iter::once(i as f64).chain(r).collect())
        .collect()
}

fn summarise(report: &Report) {
    for r in &report.records {
        let stat = match (r.z, r.p) {
            (Some(z), _) => format!("z = {z:.3}"),
            (None, Some(p)) => format!("p = {p:.3e}"),
            _ => format!("value = {}", r.estimate.map(fmt17).unwrap_or_default()),
        };
        println!("{} {} ({stat})", if r.pass { "PASS" } else { "FAIL" }, r.test);
    }
    let failed = report.records.iter().filter(|r| !r.pass).count();
    println!("{}: {} checks, {failed} failed", report.experiment, report.records.len());
}

fn configured(name: &str, global: &Global) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(name);
    if let Some(s) = global.seed {
        c.seed = s;
    }
    if let Some(r) = global.replicas {
        c.replicas = r;
    }
    c.output = global.out.clone();
    c
}

fn apply_box(c: &mut ExperimentConfig, b: &BoxArgs) {
    c.params.dimension = b.d;
    c.params.half_width = b.n;
    if !b.u.is_empty() {
        c.params.u = Some(b.u.clone());
    }
}

/// Returns whether every check passed.
fn execute(cli: Cli) -> Result<bool> {
    let g = &cli.global;
    let seed = g.seed.unwrap_or(1);
    let replicas = g.replicas.unwrap_or(1000);
    let config = match cli.command {
        Command::Green(net) => {
            let net = load_net(&net)?;
            let gop = compute_green(&net)?;
            let n = net.vertex_count();
            let rows: Vec<Vec<f64>> = (0..n).map(|x| (0..n).map(|y| gop.green(x, y)).collect()).collect();
            write_rows(g.out.as_deref(), &(0..n).map(|x| format!("g{x}")).collect::<Vec<_>>(), &rows)?;
            return Ok(true);
        }
        Command::SampleGff(net) => {
            let net = load_net(&net)?;
            let gop = compute_green(&net)?;
            let rows = replicate(replicas, seed, |rng| sample_gff(&gop, rng).values);
            write_rows(g.out.as_deref(), &vertex_header("phi", net.vertex_count()), &indexed(rows))?;
            return Ok(true);
        }
        Command::SampleLoops { net, alpha } => {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::InvalidParameter(format!("alpha = {alpha} must be positive")));
            }
            let net = load_net(&net)?;
            let gop = compute_green(&net)?;
            let sampler = LoopSoupSampler::new(&net, &gop, DEFAULT_LENGTH_CUTOFF)?;
            let rows = replicate(replicas, seed, |rng| {
                let soup = sampler.sample(alpha, rng).expect("alpha checked above");
                let mut row = vec![soup.loops.len() as f64];
                row.extend(occupation_field(&soup).values);
                row
            });
            let mut header = vertex_header("occupation", net.vertex_count());
            header.insert(1, "loops".into());
            write_rows(g.out.as_deref(), &header, &indexed(rows))?;
            return Ok(true);
        }
        Command::Couple(arg) => {
            let net = load_net(&arg)?;
            let gop = compute_green(&net)?;
            let sampler = LoopSoupSampler::new(&net, &gop, DEFAULT_LENGTH_CUTOFF)?;
            if let Some(prefix) = &g.out {
                let rows = replicate(replicas, seed, |rng| {
                    let soup = sampler.sample(0.5, rng).expect("valid alpha");
                    couple(&net, soup, rng).expect("soup at one-half").field.values
                });
                let mut path = prefix.as_os_str().to_owned();
                path.push(".fields.csv");
                write_rows(Some(Path::new(&path)), &vertex_header("phi", net.vertex_count()), &indexed(rows))?;
            }
            let mut c = configured("coupling", g);
            c.network = Some(NetworkSpec::from_arg(&arg.net));
            c
        }
        Command::Connectivity { net, x, y } => {
            let mut c = configured("connectivity", g);
            if let (Some(x), Some(y)) = (x, y) {
                c.params.pairs = Some(vec![[x, y]]);
            }
            c.network = Some(NetworkSpec::from_arg(&net.net));
            c
        }
        Command::DetRatio { net, edges } => {
            let mut c = configured("det-ratio", g);
            if !edges.is_empty() {
                c.params.removed = Some(parse_edges(&edges)?);
            }
            c.network = Some(NetworkSpec::from_arg(&net.net));
            c
        }
        Command::BridgeCheck { lambda_grid } => {
            let mut c = configured("bridge", g);
            if !lambda_grid.is_empty() {
                c.params.lambdas = Some(lambda_grid);
            }
            c
        }
        Command::Interlacement { size, window, k } => {
            let mut c = configured("interlacement", g);
            apply_box(&mut c, &size);
            c.params.window_radius = window;
            c.params.sets = k.as_deref().map(parse_sets).transpose()?;
            c
        }
        Command::IsomorphismCheck(size) => {
            let mut c = configured("isomorphism", g);
            apply_box(&mut c, &size);
            c
        }
        Command::LevelsetCheck(size) => {
            let mut c = configured("levelset", g);
            apply_box(&mut c, &size);
            c
        }
        Command::Run { config } => {
            let mut c = ExperimentConfig::from_file(&config)?;
            if let Some(s) = g.seed {
                c.seed = s;
            }
            if let Some(r) = g.replicas {
                c.replicas = r;
            }
            if g.out.is_some() {
                c.output = g.out.clone();
            }
            c
        }
    };
    let report = run_experiment(&config)?;
    summarise(&report);
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
