use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hmm_core::averaging::{fbar_sampled, SampledFbarConfig};
use hmm_core::direct::{run_direct, DirectConfig};
use hmm_core::hmm::{choose_params, cost_compare, direct_cost, run_hmm, EstimatorNoise, HmmParams, ParamRequest, Regime, StrongBranch};
use hmm_core::spectral::SpectralField;
use hmm_spde::experiments::Experiment;
use hmm_spde::output::{write_fbar_csv, write_json, write_trajectory_csv};
use hmm_spde::problem::Problem;

#[derive(Parser)]
#[command(name = "hmm-spde", version, about = "Spectral HMM solver for slow-fast stochastic reaction-diffusion systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Heterogeneous multiscale solver.
    Hmm {
        #[command(subcommand)]
        action: HmmAction,
    },
    /// Coupled small-step solver of the full system.
    Direct {
        #[command(subcommand)]
        action: DirectAction,
    },
    /// Averaged coefficient F̄(x) at the collocation nodes.
    Fbar(FbarArgs),
    /// Rate experiments; writes <experiment>.csv and <experiment>.json.
    Rates(RatesArgs),
}

#[derive(Subcommand)]
enum HmmAction {
    Run(HmmRunArgs),
}

#[derive(Subcommand)]
enum DirectAction {
    Run(DirectRunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Strong,
    Weak,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Strong => Regime::Strong,
            RegimeArg::Weak => Regime::Weak,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    /// M = 1, long window N.
    SingleReplica,
    /// N = 1, many replicas M.
    SingleWindow,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, value_parser = parse_problem, default_value = "p1")]
    problem: Problem,
    /// Number of sine modes.
    #[arg(long = "K", default_value_t = 63)]
    modes: usize,
    /// Final time.
    #[arg(long = "T", default_value_t = 1.0)]
    t_final: f64,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Target accuracy; derives any step or count not given explicitly.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value = "weak")]
    regime: RegimeArg,
    /// Directory for the output files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

impl CommonArgs {
    fn request(&self, branch: BranchArg) -> Option<ParamRequest> {
        let tol = self.tol?;
        let strong_branch = match branch {
            BranchArg::SingleReplica => StrongBranch::SingleReplica,
            BranchArg::SingleWindow => StrongBranch::SingleWindow,
        };
        Some(ParamRequest { t_final: self.t_final, strong_branch, ..ParamRequest::new(tol, self.epsilon, self.regime.into()) })
    }
}

#[derive(Args)]
struct HmmRunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Macro step Δt.
    #[arg(long)]
    dt: Option<f64>,
    /// Micro step δt.
    #[arg(long)]
    ddt: Option<f64>,
    /// Averaging window.
    #[arg(long = "N")]
    window: Option<u64>,
    /// Replicas.
    #[arg(long = "M")]
    replicas: Option<u64>,
    /// Warm-up microsteps.
    #[arg(long = "nT")]
    warmup: Option<u64>,
    #[arg(long, value_enum, default_value = "single-replica")]
    branch: BranchArg,
}

#[derive(Args)]
struct DirectRunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Time between recorded states; every step is recorded when omitted.
    #[arg(long)]
    dt: Option<f64>,
    /// Step of the coupled scheme.
    #[arg(long)]
    ddt: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FbarMethod {
    /// Gauss–Hermite under the exact Gaussian fast law (p1, p3).
    Quadrature,
    /// Time average along one microsolver chain.
    Sampled,
}

#[derive(Args)]
struct FbarArgs {
    #[arg(long, value_parser = parse_problem, default_value = "p1")]
    problem: Problem,
    #[arg(long = "K", default_value_t = 63)]
    modes: usize,
    #[arg(long, value_enum, default_value = "quadrature")]
    method: FbarMethod,
    /// `x = amp e_mode`.
    #[arg(long, default_value_t = 1)]
    x_mode: usize,
    #[arg(long, default_value_t = 1.0)]
    x_amp: f64,
    /// Sampled method: microsolver step τ.
    #[arg(long, default_value_t = 0.01)]
    tau: f64,
    #[arg(long, default_value_t = 1000)]
    warmup: u64,
    #[arg(long, default_value_t = 100_000)]
    window: u64,
    #[arg(long, default_value_t = 50)]
    batches: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "fbar.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long, value_parser = parse_experiment)]
    experiment: Experiment,
    /// Monte-Carlo samples per sweep point.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn parse_problem(s: &str) -> Result<Problem, String> {
    s.parse()
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    s.parse()
}

#[derive(Serialize)]
struct HmmCost {
    problem: String,
    modes: usize,
    seed: u64,
    epsilon: f64,
    macro_dt: f64,
    micro_dt: f64,
    tau: f64,
    t_final: f64,
    window: u64,
    replicas: u64,
    warmup: u64,
    macro_steps: u64,
    micro_steps_per_macro: u64,
    total_micro_steps: u64,
    cost_per_unit_time: f64,
    direct_steps_same_micro_dt: u64,
    direct_cost_per_unit_time: Option<f64>,
    cost_ratio_vs_direct: Option<f64>,
    strictly_dissipative: bool,
}

#[derive(Serialize)]
struct DirectCost {
    problem: String,
    modes: usize,
    seed: u64,
    epsilon: f64,
    dt: f64,
    t_final: f64,
    steps: u64,
    unresolved_fast_scale: bool,
}

fn initial_data(modes: usize) -> (SpectralField, SpectralField) {
    (SpectralField::basis(modes, 1), SpectralField::zeros(modes))
}

fn hmm_run(args: &HmmRunArgs) -> Result<()> {
    let c = &args.common;
    let request = c.request(args.branch);
    let chosen = request.as_ref().map(choose_params).transpose()?;
    let pick = |explicit: Option<f64>, derived: Option<f64>, name: &str| -> Result<f64> {
        explicit.or(derived).with_context(|| format!("--{name} is required without --tol"))
    };
    let params = HmmParams::new(
        c.epsilon,
        pick(args.dt, chosen.map(|p| p.macro_dt), "dt")?,
        pick(args.ddt, chosen.map(|p| p.micro_dt), "ddt")?,
        c.t_final,
        pick(args.window.map(|v| v as f64), chosen.map(|p| p.window as f64), "N")? as u64,
        pick(args.replicas.map(|v| v as f64), chosen.map(|p| p.replicas as f64), "M")? as u64,
        pick(args.warmup.map(|v| v as f64), chosen.map(|p| p.warmup as f64), "nT")? as u64,
    )?;
    let sys = c.problem.system(c.modes)?;
    let (x0, y0) = initial_data(c.modes);
    let run = run_hmm(&sys, &x0, &y0, &params, &EstimatorNoise::new(c.seed))?;
    std::fs::create_dir_all(&c.out_dir)?;
    let traj = c.out_dir.join("hmm_trajectory.csv");
    write_trajectory_csv(
        &traj,
        run.trajectory.iter().enumerate().map(|(n, x)| (n as u64, n as f64 * params.macro_dt, x)),
    )?;
    let cost = HmmCost {
        problem: c.problem.to_string(),
        modes: c.modes,
        seed: c.seed,
        epsilon: params.epsilon,
        macro_dt: params.macro_dt,
        micro_dt: params.micro_dt,
        tau: params.tau(),
        t_final: params.t_final,
        window: params.window,
        replicas: params.replicas,
        warmup: params.warmup,
        macro_steps: run.cost.macro_steps,
        micro_steps_per_macro: params.micro_steps_per_macro(),
        total_micro_steps: run.cost.total_micro_steps,
        cost_per_unit_time: run.cost.cost_per_unit_time,
        direct_steps_same_micro_dt: run.cost.direct_steps_same_micro_dt,
        direct_cost_per_unit_time: request.as_ref().map(direct_cost).transpose()?,
        cost_ratio_vs_direct: request.as_ref().map(|r| cost_compare(&params, r)).transpose()?,
        strictly_dissipative: run.strictly_dissipative,
    };
    let cost_path = c.out_dir.join("hmm_cost.json");
    write_json(&cost_path, &cost)?;
    if !run.strictly_dissipative {
        eprintln!("warning: only weak dissipativity holds; the fast invariant law may not be unique");
    }
    report_written(&[&traj, &cost_path]);
    Ok(())
}

fn direct_run(args: &DirectRunArgs) -> Result<()> {
    let c = &args.common;
    let dt = match (args.ddt, c.tol) {
        (Some(dt), _) => dt,
        (None, Some(_)) => {
            // Steps per unit time of the direct scheme at this tolerance.
            let req = c.request(BranchArg::SingleReplica).expect("tol is set");
            1.0 / direct_cost(&req)?
        }
        (None, None) => bail!("--ddt is required without --tol"),
    };
    let record_every = args.dt.map_or(1, |rec| ((rec / dt).round() as u64).max(1));
    let sys = c.problem.system(c.modes)?;
    let (x0, y0) = initial_data(c.modes);
    let run = run_direct(&sys, &x0, &y0, &DirectConfig { record_every, ..DirectConfig::new(c.epsilon, dt, c.t_final, c.seed) })?;
    if run.unresolved_fast_scale {
        eprintln!("warning: dt/epsilon = {:.3} does not resolve the fast scale", dt / c.epsilon);
    }
    std::fs::create_dir_all(&c.out_dir)?;
    let traj = c.out_dir.join("direct_trajectory.csv");
    write_trajectory_csv(&traj, run.trajectory.iter().map(|(t, x)| (((t / dt).round()) as u64, *t, x)))?;
    let cost_path = c.out_dir.join("direct_cost.json");
    write_json(
        &cost_path,
        &DirectCost {
            problem: c.problem.to_string(),
            modes: c.modes,
            seed: c.seed,
            epsilon: c.epsilon,
            dt,
            t_final: c.t_final,
            steps: run.cost,
            unresolved_fast_scale: run.unresolved_fast_scale,
        },
    )?;
    report_written(&[&traj, &cost_path]);
    Ok(())
}

fn fbar(args: &FbarArgs) -> Result<()> {
    let sys = args.problem.system(args.modes)?;
    if args.x_mode == 0 || args.x_mode > args.modes {
        bail!("--x-mode must lie in 1..={}", args.modes);
    }
    let x = SpectralField::basis(args.modes, args.x_mode).scaled(args.x_amp);
    let nodes = sys.basis.nodes().to_vec();
    match args.method {
        FbarMethod::Quadrature => {
            let oracle = args
                .problem
                .oracle(&sys)
                .with_context(|| format!("{} has no Gaussian fast law; use --method sampled", args.problem))?;
            write_fbar_csv(&args.out, &nodes, oracle.grid_values(&x)?.values(), None)?;
        }
        FbarMethod::Sampled => {
            let cfg = SampledFbarConfig {
                tau: args.tau,
                warmup: args.warmup,
                window: args.window,
                batches: args.batches,
                seed: args.seed,
            };
            let s = fbar_sampled(&sys, &x, &cfg)?;
            write_fbar_csv(&args.out, &nodes, s.grid_values.values(), Some(&s.grid_stderr))?;
        }
    }
    report_written(&[&args.out]);
    Ok(())
}

fn rates(args: &RatesArgs) -> Result<()> {
    let report = args.experiment.run(args.seeds, args.seed)?;
    let (csv, json) = report.write_artifacts(&args.out_dir)?;
    for f in &report.fits {
        match &f.fit {
            Some(fit) => match fit.ci95 {
                Some((lo, hi)) => println!("{} {}: slope {:.4} (95% CI {:.4} .. {:.4})", report.experiment, f.series, fit.slope, lo, hi),
                None => println!("{} {}: slope {:.4}", report.experiment, f.series, fit.slope),
            },
            None => println!("{} {}: too few rows above the noise for a fit", report.experiment, f.series),
        }
    }
    report_written(&[&csv, &json]);
    Ok(())
}

fn report_written(paths: &[&Path]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Hmm { action: HmmAction::Run(args) } => hmm_run(&args),
        Command::Direct { action: DirectAction::Run(args) } => direct_run(&args),
        Command::Fbar(args) => fbar(&args),
        Command::Rates(args) => rates(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
