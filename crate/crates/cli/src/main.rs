use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use landmark_core::bounds::check_all_bounds;
use landmark_core::env;
use landmark_core::harness::{self, ExperimentConfig};
use landmark_core::learning::{learn_all, LearnConfig, StepSize};
use landmark_core::oracle::{self, CHECK_SLACK, DEFAULT_TOL};
use landmark_core::par::Execution;
use landmark_core::{
    build_cover, HittingTimes, LandmarkCover, MetricKind, RngStream, StateId, TabularMdp,
};

/// Environment variable naming the report command (default `landmark-report`).
const REPORT_CMD_VAR: &str = "LANDMARK_REPORT_CMD";
const DEFAULT_REPORT_CMD: &str = "landmark-report";

#[derive(Parser)]
#[command(
    name = "landmark",
    version,
    about = "Landmark coverings for goal-based tabular MDPs"
)]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build and save an environment.
    Env {
        #[command(subcommand)]
        cmd: EnvCmd,
    },
    /// Exact hitting-time solves.
    Oracle {
        #[command(subcommand)]
        cmd: OracleCmd,
    },
    /// Landmark covers.
    Cover {
        #[command(subcommand)]
        cmd: CoverCmd,
    },
    /// Value-bound audits.
    Bounds {
        #[command(subcommand)]
        cmd: BoundsCmd,
    },
    /// Self-supervised landmark tables.
    Landmarks {
        #[command(subcommand)]
        cmd: LandmarksCmd,
    },
    /// Run an experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render figures from a results directory with the external report tool.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvName {
    Cliff,
    #[value(name = "grid100x10")]
    GridWorld,
    Detgrid,
    Random,
}

#[derive(Subcommand)]
enum EnvCmd {
    Build {
        #[arg(long)]
        name: EnvName,
        #[arg(long, default_value_t = 5)]
        width: usize,
        #[arg(long, default_value_t = 5)]
        height: usize,
        #[arg(long, default_value_t = 20)]
        n_states: usize,
        #[arg(long, default_value_t = 4)]
        n_actions: usize,
        #[arg(long, default_value_t = 3)]
        out_degree: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    Solve {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        target: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum CoverCmd {
    Build {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        eta: f64,
        /// `rt` (round trip) or `inf` (max one-way).
        #[arg(long)]
        metric: MetricKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum BoundsCmd {
    Check {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        cover: PathBuf,
        #[arg(long, default_value_t = CHECK_SLACK)]
        slack: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long, default_value_t = 2000)]
    episodes: usize,
    #[arg(long, default_value_t = 1000)]
    max_steps: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Constant step size; omit with `--visit-count`.
    #[arg(long, default_value_t = 0.1)]
    step_size: f64,
    /// Use a 1/N(s,a) step size instead.
    #[arg(long)]
    visit_count: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum LandmarksCmd {
    Learn {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        cover: PathBuf,
        #[command(flatten)]
        learn: LearnArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match dispatch(cli.cmd, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_env(path: &Path) -> Result<TabularMdp> {
    let mdp = TabularMdp::load(path).with_context(|| format!("loading MDP {}", path.display()))?;
    let v = mdp.validate();
    if !v.is_empty() {
        for x in &v {
            eprintln!("  {x}");
        }
        bail!(
            "{} has {} stochasticity violation(s)",
            path.display(),
            v.len()
        );
    }
    Ok(mdp)
}

fn load_cover(path: &Path, mdp: &TabularMdp) -> Result<LandmarkCover> {
    let cover =
        LandmarkCover::load(path).with_context(|| format!("loading cover {}", path.display()))?;
    if cover.n_states != mdp.n_states() || cover.n_actions != mdp.n_actions() {
        bail!(
            "cover is for {} states x {} actions, environment has {} x {}",
            cover.n_states,
            cover.n_actions,
            mdp.n_states(),
            mdp.n_actions()
        );
    }
    Ok(cover)
}

fn write_json(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn dispatch(cmd: Cmd, exec: Execution) -> Result<()> {
    match cmd {
        Cmd::Env {
            cmd:
                EnvCmd::Build {
                    name,
                    width,
                    height,
                    n_states,
                    n_actions,
                    out_degree,
                    seed,
                    out,
                },
        } => {
            let mdp = match name {
                EnvName::Cliff => env::build_cliff_walker(),
                EnvName::GridWorld => env::build_grid_world(),
                EnvName::Detgrid => env::build_deterministic_grid(width, height)?,
                EnvName::Random => env::build_random_mdp(n_states, n_actions, out_degree, seed)?,
            };
            mdp.save(&out)?;
            println!(
                "wrote {} ({} states, {} actions)",
                out.display(),
                mdp.n_states(),
                mdp.n_actions()
            );
        }
        Cmd::Oracle {
            cmd:
                OracleCmd::Solve {
                    env,
                    target,
                    tol,
                    out,
                },
        } => {
            let mdp = load_env(&env)?;
            let (values, q) = oracle::solve(&mdp, StateId(target), tol)?;
            let doc = serde_json::json!({ "values": values, "q": q });
            write_json(&out, &serde_json::to_string_pretty(&doc)?)?;
            println!("wrote {}", out.display());
        }
        Cmd::Cover {
            cmd:
                CoverCmd::Build {
                    env,
                    eta,
                    metric,
                    seed,
                    out,
                },
        } => {
            let mdp = load_env(&env)?;
            let times = HittingTimes::compute_with(&mdp, DEFAULT_TOL, exec)?;
            let cover = build_cover(&mdp, &times, eta, metric, &mut RngStream::new(seed))?;
            cover.save(&out)?;
            println!(
                "wrote {} ({} landmarks, eta {eta}, metric {metric})",
                out.display(),
                cover.len()
            );
        }
        Cmd::Bounds {
            cmd:
                BoundsCmd::Check {
                    env,
                    cover,
                    slack,
                    out,
                },
        } => {
            let mdp = load_env(&env)?;
            let cover = load_cover(&cover, &mdp)?;
            let times = HittingTimes::compute_with(&mdp, DEFAULT_TOL, exec)?;
            let rows = check_all_bounds(&cover, &times, slack)?;
            harness::write_csv(&out, &rows)?;
            let bad = rows.iter().filter(|r| !r.contained).count();
            println!(
                "wrote {} ({} pairs, {bad} outside bounds)",
                out.display(),
                rows.len()
            );
            if bad > 0 {
                bail!("{bad} (s, g) pair(s) violate the bound");
            }
        }
        Cmd::Landmarks {
            cmd:
                LandmarksCmd::Learn {
                    env,
                    cover,
                    learn,
                    out,
                },
        } => {
            let mdp = load_env(&env)?;
            let cover = load_cover(&cover, &mdp)?;
            let cfg = LearnConfig {
                episodes: learn.episodes,
                max_steps: learn.max_steps,
                epsilon: learn.epsilon,
                step_size: if learn.visit_count {
                    StepSize::VisitCount
                } else {
                    StepSize::Constant(learn.step_size)
                },
                seed: learn.seed,
            };
            let (learned, check) = learn_all(&mdp, &cover, &cfg, exec)?;
            learned.save(&out)?;
            println!("wrote {}", out.display());
            if !check.covered {
                eprintln!(
                    "warning: learned tables leave {} state(s) uncovered",
                    check.uncovered.len()
                );
            }
        }
        Cmd::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("reading config {}", config.display()))?;
            let dir = out
                .or_else(|| cfg.output.clone())
                .context("no output directory: pass --out or set `output` in the config")?;
            let records = harness::run_with(&cfg, exec)?;
            let summary = harness::write_outputs(&dir, &cfg, &records)?;
            println!("wrote {} records to {}", records.len(), dir.display());
            for (name, a) in &summary.agents {
                println!(
                    "  {name:<16} mean regret {:>10.3}  truncated {:>6}",
                    a.mean_regret, a.truncated
                );
            }
            for (name, r) in &summary.cliff_reduction {
                println!("  cliff reduction vs baseline: {name:<12} {r:>7.2}%");
            }
        }
        Cmd::Report { input, kind, out } => report(&input, kind.as_deref(), &out)?,
    }
    Ok(())
}

/// Hands the results directory to the external report tool.
fn report(input: &Path, kind: Option<&str>, out: &Path) -> Result<()> {
    let records = input.join(harness::RECORDS_FILE);
    if !records.is_file() {
        bail!("{} not found", records.display());
    }
    let cmdline = std::env::var(REPORT_CMD_VAR).unwrap_or_else(|_| DEFAULT_REPORT_CMD.into());
    let mut parts = cmdline.split_whitespace();
    let program = parts.next().context("empty report command")?;
    let mut args: Vec<OsString> = parts.map(OsString::from).collect();
    args.extend(["--in".into(), input.as_os_str().to_owned()]);
    if let Some(k) = kind {
        args.extend(["--kind".into(), k.into()]);
    }
    args.extend(["--out".into(), out.as_os_str().to_owned()]);
    let status = match Command::new(program).args(&args).status() {
        Ok(s) => s,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            bail!("report tool '{program}' not found; install it or set {REPORT_CMD_VAR}")
        }
        Err(e) => return Err(e).context("starting report tool"),
    };
    if !status.success() {
        bail!("report tool exited with {status}");
    }
    Ok(())
}
