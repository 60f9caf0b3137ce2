use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use finsler_cli::config::Tolerances;
use finsler_cli::{run, ExperimentConfig, Failure, Kind};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "finsler", version, about = "Experiments on pinched Randers spheres and perturbed Hopf flows")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for randomised sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Profile ODE tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Relative tolerance of the trajectory integrators.
    #[arg(long, global = true)]
    ode_tol: Option<f64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "FINSLER_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate a pinched surface of revolution.
    Surface {
        #[arg(long = "R")]
        radius: f64,
        #[arg(long = "Kmax")]
        k_max: f64,
        #[arg(long)]
        smoothing: Option<f64>,
    },
    /// Integrate one geodesic launched from the equator.
    Geodesic {
        #[arg(long, default_value = "window-r1")]
        metric: String,
        #[arg(long)]
        phi: f64,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        horizon: f64,
        #[arg(long)]
        riemannian: bool,
    },
    /// Shoot for the figure-eight closed geodesic.
    Shoot {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long = "R", requires = "k_max")]
        radius: Option<f64>,
        #[arg(long = "Kmax", requires = "radius")]
        k_max: Option<f64>,
    },
    /// Rotation interval and Conley-Zehnder index of a closed geodesic.
    Cz {
        #[arg(long)]
        metric: String,
        #[arg(long)]
        orbit: String,
        #[arg(long, default_value_t = 1)]
        cover: usize,
    },
    /// Linking and self-linking of the model knots.
    Knots {
        #[arg(long, default_value_t = 512)]
        samples: usize,
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
    },
    /// Linking number of two closed polygons on S³ given as CSV files.
    Link { a: PathBuf, b: PathBuf },
    /// Reeb dynamics of perturbed standard contact forms.
    Hopf {
        #[command(subcommand)]
        command: HopfCommand,
    },
    /// Regenerate regression fixtures, optionally comparing with a directory.
    Fixtures {
        #[arg(long)]
        check: Option<PathBuf>,
    },
    /// Run an experiment described by a JSON config file.
    Run { config: PathBuf },
}

#[derive(Subcommand)]
enum HopfCommand {
    /// Search for closed orbits up to a period cap.
    Scan {
        #[arg(long)]
        f: String,
        #[arg(long, default_value_t = 20.0)]
        cap: f64,
        #[arg(long, default_value_t = 8)]
        seeds: usize,
        #[arg(long, default_value_t = 16)]
        grid: usize,
        #[arg(long, default_value_t = 0.05)]
        band: f64,
    },
}

fn metric_value(name: String) -> Value {
    Value::String(name)
}

fn config_from(cli: Cli) -> Result<ExperimentConfig, Failure> {
    let g = cli.global;
    let (kind, params) = match cli.command {
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            // The file describes the run; only a missing `out` falls back to the flag.
            if cfg.out.as_os_str().is_empty() {
                cfg.out = g.out;
            }
            return Ok(cfg);
        }
        Command::Surface { radius, k_max, smoothing } => {
            (Kind::Surface, json!({ "R": radius, "Kmax": k_max, "smoothing": smoothing }))
        }
        Command::Geodesic {
            metric,
            phi,
            horizon,
            riemannian,
        } => (
            Kind::Geodesic,
            json!({ "metric": metric_value(metric), "phi": phi, "horizon": horizon, "riemannian": riemannian }),
        ),
        Command::Shoot { r, delta, radius, k_max } => {
            let mut p = json!({ "r": r, "delta": delta });
            if let (Some(radius), Some(k_max)) = (radius, k_max) {
                p["R"] = json!(radius);
                p["Kmax"] = json!(k_max);
            }
            (Kind::Shoot, p)
        }
        Command::Cz { metric, orbit, cover } => (
            Kind::Cz,
            json!({ "metric": metric_value(metric), "orbit": orbit, "cover": cover }),
        ),
        Command::Knots { samples, eps } => (Kind::Knots, json!({ "samples": samples, "eps": eps })),
        Command::Link { a, b } => (Kind::Link, json!({ "a": a, "b": b })),
        Command::Hopf {
            command:
                HopfCommand::Scan {
                    f,
                    cap,
                    seeds,
                    grid,
                    band,
                },
        } => (
            Kind::Hopf,
            json!({ "f": f, "cap": cap, "seeds": seeds, "grid": grid, "band": band }),
        ),
        Command::Fixtures { check } => (Kind::Fixtures, json!({ "check": check })),
    };
    let params = strip_nulls(params);
    Ok(ExperimentConfig {
        kind,
        params,
        out: g.out,
        seed: g.seed,
        tol: Tolerances {
            profile: g.tol,
            ode: g.ode_tol,
        },
    })
}

fn strip_nulls(v: Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(m.into_iter().filter(|(_, v)| !v.is_null()).collect()),
        v => v,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let result = config_from(cli).and_then(|cfg| run(&cfg).map(|s| (cfg, s)));
    match result {
        Ok((cfg, summary)) => {
            let main_file = match cfg.kind {
                Kind::Link => Some("link.json"),
                Kind::Cz => Some("cz.json"),
                _ => None,
            };
            if let Some(text) = main_file.and_then(|f| std::fs::read_to_string(cfg.out.join(f)).ok()) {
                print!("{text}");
            }
            for f in &summary.failures {
                eprintln!("check failed: {f}");
            }
            eprintln!(
                "wrote {} files to {} (config {})",
                summary.files.len(),
                cfg.out.display(),
                &summary.config_hash[..12]
            );
            ExitCode::from(summary.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.to_string(), "exit_code": e.exit_code() }));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
