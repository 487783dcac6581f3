use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{ArgGroup, Parser, Subcommand};
use haulcharge_cli::service::{router, AppState};
use haulcharge_cli::*;
use haulcharge_core::data::{load_config, routes_to_json, save_routes};
use haulcharge_core::network::{build_graph, k_fastest_routes, RoadGraph};
use haulcharge_core::oracle::{cross_check, oracle_solve, ORACLE_MAX_SEGMENTS};
use haulcharge_core::report::sweep_csv;
use haulcharge_core::scenario::{prepare_scenario, run_scenario, DayMode, RunOptions};
use haulcharge_core::solver::solve;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// stdout may be a closed pipe (`| head`); report that as an error instead of panicking
macro_rules! outln {
    ($($t:tt)*) => { writeln!(io::stdout(), $($t)*)? };
}
macro_rules! out {
    ($($t:tt)*) => { write!(io::stdout(), $($t)*)? };
}

#[derive(Parser)]
#[command(name = "haulcharge", version, about = "Freight fleet electrification scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a road network file and print its statistics.
    BuildNetwork { network: PathBuf },
    /// Generate the k fastest routes with charging sites for every ordered city pair.
    #[command(group(ArgGroup::new("source").required(true).args(["network", "config"])))]
    GenRoutes {
        #[arg(long, value_delimiter = ',', required = true)]
        cities: Vec<String>,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long = "spacing-km", default_value_t = 50.0)]
        spacing_km: f64,
        #[arg(long)]
        network: Option<PathBuf>,
        /// Take the network path from a scenario config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Write one `<origin>-<destination>.json` per pair instead of printing.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run a full scenario and write report files.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        bev_fraction: Option<f64>,
        /// Solve every day of the year instead of scaling one day.
        #[arg(long)]
        literal_days: bool,
        /// Evaluate pairs on one thread.
        #[arg(long)]
        serial: bool,
        /// Skip pairs that fail and list them in the result.
        #[arg(long)]
        allow_partial: bool,
        /// Write each chosen route's daily instance and plan as JSON here.
        #[arg(long)]
        dump_instances: Option<PathBuf>,
    },
    /// Print fleet cost and CO2 across BEV penetration levels as CSV.
    Sweep {
        #[arg(long, default_value = "scenario.toml")]
        config: PathBuf,
        #[arg(long, default_value_t = 11, value_parser = clap::value_parser!(u16).range(2..))]
        steps: u16,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the exact solver with brute-force enumeration on random instances.
    OracleCheck {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u16).range(1..=ORACLE_MAX_SEGMENTS as i64))]
        max_k: u16,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Solve one charging instance (bare or as dumped by `run --dump-instances`).
    Solve {
        instance: PathBuf,
        /// Also run the brute-force oracle and compare.
        #[arg(long)]
        oracle: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "HAULCHARGE_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "scenario.toml")]
        config: PathBuf,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Job results are written under this directory.
        #[arg(long, default_value = "haulcharge-jobs")]
        out: PathBuf,
        /// Scenario jobs allowed to run at once.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

fn print_network_stats(g: &RoadGraph) -> io::Result<()> {
    let cities: Vec<&str> = g.city_index().keys().map(String::as_str).collect();
    let km: f64 = g.edges().iter().map(|e| e.length_km).sum();
    outln!("nodes: {}", g.nodes().len());
    outln!("edges: {}", g.edges().len());
    outln!("cities: {} ({})", cities.len(), cities.join(", "));
    outln!("counties: {}", g.counties().len());
    outln!("utilities: {}", g.utilities().len());
    outln!("isolated nodes: {}", g.isolated_nodes().len());
    outln!("total edge length: {km:.1} km");
    Ok(())
}

fn gen_routes(
    graph: &RoadGraph,
    cities: &[String],
    k: usize,
    spacing_km: f64,
    out_dir: Option<&Path>,
) -> anyhow::Result<()> {
    let mut all = Vec::new();
    for o in cities {
        for d in cities.iter().filter(|d| *d != o) {
            let routes = k_fastest_routes(graph, o, d, k, spacing_km)?;
            if let Some(dir) = out_dir {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                save_routes(dir.join(format!("{o}-{d}.json")), &routes)?;
            }
            all.extend(routes);
        }
    }
    match out_dir {
        Some(dir) => eprintln!("wrote {} routes to {}", all.len(), dir.display()),
        None => outln!("{}", routes_to_json(&all)),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::BuildNetwork { network } => {
            let g = build_graph(&network)?;
            print_network_stats(&g)?;
        }
        Command::GenRoutes {
            cities,
            k,
            spacing_km,
            network,
            config,
            data_dir,
            out_dir,
        } => {
            let path = match (network, config) {
                (Some(n), _) => n,
                (None, Some(c)) => load_config(&c, data_dir.as_deref())?.paths.network,
                (None, None) => bail!("either --network or --config is required"),
            };
            let graph = build_graph(&path)?;
            gen_routes(&graph, &cities, k, spacing_km, out_dir.as_deref())?;
        }
        Command::Run {
            config,
            out,
            data_dir,
            bev_fraction,
            literal_days,
            serial,
            allow_partial,
            dump_instances,
        } => {
            let region = load_region(&config, data_dir.as_deref())?;
            let mut settings = region.config.scenario.clone();
            if let Some(f) = bev_fraction {
                if !(0.0..=1.0).contains(&f) {
                    bail!("--bev-fraction {f} outside [0, 1]");
                }
                settings.bev_fraction = f;
            }
            let options = RunOptions {
                mode: if literal_days { DayMode::Literal } else { DayMode::Scaled },
                parallel: !serial,
                allow_partial,
            };
            let (result, path) = run_to_dir(&region, &settings, options, &out)?;
            outln!(
                "{} pairs, BEV cost {:.2} USD / {:.1} kg CO2, ICEV cost {:.2} USD / {:.1} kg CO2 ({:.3} s)",
                result.pairs.len(),
                result.bev.cost_usd,
                result.bev.co2_kg,
                result.icev.cost_usd,
                result.icev.co2_kg,
                result.runtime_s
            );
            for failed in &result.failed_pairs {
                eprintln!("skipped: {failed}");
            }
            outln!("report written to {}", path.parent().unwrap_or(&out).display());
            if let Some(dir) = dump_instances {
                let scenario = prepare_scenario(&region, &settings)?;
                let n = haulcharge_cli::dump_instances(&scenario, &result, &dir)?;
                outln!("{n} instances dumped to {}", dir.display());
            }
        }
        Command::Sweep {
            config,
            steps,
            data_dir,
            out,
        } => {
            let region = load_region(&config, data_dir.as_deref())?;
            let mut settings = region.config.scenario.clone();
            settings.sweep_steps = usize::from(steps);
            let scenario = prepare_scenario(&region, &settings)?;
            let result = run_scenario(&scenario, RunOptions::default())?;
            let csv = sweep_csv(&result);
            match out {
                Some(p) => fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?,
                None => out!("{csv}"),
            }
        }
        Command::OracleCheck { instances, max_k, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let report = cross_check(&mut rng, instances, usize::from(max_k));
            outln!("{}/{} matched", report.matched, report.feasible);
            outln!(
                "feasibility verdicts agree on {}/{} instances; worst relative cost gap {:.2e}",
                report.verdict_agreements, report.generated, report.worst_relative_gap
            );
            for f in &report.failures {
                eprintln!("{f}");
            }
            if !report.passed() || report.feasible < instances {
                bail!("solver and oracle disagree");
            }
        }
        Command::Solve { instance, oracle } => {
            let inst = read_instance(&instance)?;
            let plan = match solve(&inst) {
                Ok(p) => p,
                Err(e @ haulcharge_core::SolveError::Infeasible(_)) => {
                    return Err(anyhow::Error::new(Infeasible(e.to_string())));
                }
                Err(e) => return Err(e.into()),
            };
            outln!("{}", serde_json::to_string_pretty(&plan)?);
            if oracle {
                let reference = oracle_solve(&inst).context("oracle")?;
                eprintln!("solver cost {} / oracle cost {}", plan.total_cost, reference.total_cost);
            }
        }
        Command::Serve {
            port,
            host,
            config,
            data_dir,
            out,
            workers,
        } => {
            let region = load_region(&config, data_dir.as_deref())?;
            let state = AppState::new(region, out, workers);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .with_context(|| format!("binding {host}:{port}"))?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                axum::serve(listener, router(state)).await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .any(|c| c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) if is_broken_pipe(&e) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
