//! Command-line experiment runner. One TOML config drives all stages; flags
//! override config keys. Exit codes: 0 success, 2 validation error,
//! 3 certification failure, 4 simulation blow-up, 1 other errors.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use etpde::config::{ExperimentConfig, HorizonSpec, TauSpec};
use etpde::pipeline::{run_pipeline, sweep, Stage, Summary, SweepAxis};

#[derive(Parser)]
#[command(
    name = "etpde",
    about = "Sampled-data and event-triggered stabilization experiments on modal truncations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the eigenproblem and write the spectral reports.
    Eig(RunArgs),
    /// Eigen stage plus the stabilizing gain design.
    Design(RunArgs),
    /// Everything through semigroup/sampling certificates.
    Certify(RunArgs),
    /// Everything through the sampled and event-triggered trajectories.
    Simulate(RunArgs),
    /// Full pipeline with the decay/dissipation verdicts.
    Verify(RunArgs),
    /// Alias for `verify`: the complete pipeline.
    Run(RunArgs),
    /// Repeat the pipeline along one parameter axis.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the root random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the sampling period (disables "auto").
    #[arg(long)]
    tau: Option<f64>,
    /// Override the trigger threshold fraction.
    #[arg(long)]
    sigma: Option<f64>,
    /// Override the sector deviation of the nonlinearity.
    #[arg(long)]
    delta: Option<f64>,
    /// Override the simulation horizon.
    #[arg(long)]
    t_end: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Swept parameter: tau | sigma | delta | J.
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    /// Worker pool size.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn load_config(args: &RunArgs) -> etpde::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&args.config).map_err(|e| match e {
        etpde::Error::Io(io) => {
            etpde::Error::InvalidConfig(format!("cannot read {}: {io}", args.config.display()))
        }
        other => other,
    })?;
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(tau) = args.tau {
        config.sampling.tau = TauSpec::Fixed(tau);
    }
    if let Some(sigma) = args.sigma {
        config.trigger.sigma = sigma;
    }
    if let Some(delta) = args.delta {
        config.nonlinearity.delta = delta;
    }
    if let Some(t_end) = args.t_end {
        config.simulation.t_end = HorizonSpec::Fixed(t_end);
    }
    config.validate()?;
    Ok(config)
}

fn print_summary(summary: &Summary, out: &std::path::Path) {
    if let Some(eigen) = &summary.eigen {
        println!(
            "eigen: J = {}, {} unstable mode(s), margin {:.6}, lambda_1 = {:.6}",
            eigen.truncation, eigen.n_unstable, eigen.margin, eigen.lambda_first
        );
    }
    if let Some(design) = &summary.design {
        println!(
            "design: |K| = {:.6}, closed-loop abscissa {:.6}",
            design.gain_norm, design.closed_loop_abscissa
        );
    }
    if let Some(certify) = &summary.certify {
        println!(
            "certify: tau = {:.6} ({}), tau* = {:.6}, q = {:.6}, chi = {:.6}, small-gain margin {:.6}",
            certify.tau,
            certify.tau_source,
            certify.tau_star,
            certify.power.contraction,
            certify.sampled_data.envelope_rate,
            certify.small_gain.margin
        );
    }
    if let Some(sim) = &summary.simulate {
        println!(
            "simulate: T = {:.3}, sampled updates {}, event-triggered updates {}",
            sim.t_end, sim.sampled_events, sim.et_events
        );
    }
    if let Some(verify) = &summary.verify {
        println!(
            "verify: per-event contraction {:.6} (conclusive: {}), event bounds pass: {}, \
             savings {:.1}%, dissipation max residual {:.3e}, integral form ok: {}",
            verify.iterate.per_event_contraction,
            verify.corollary.conclusive,
            verify.corollary.passed,
            100.0 * verify.savings.savings,
            verify.dissipation_max_residual,
            verify.comparison_ok
        );
    }
    for warning in &summary.warnings {
        println!("warning: {warning}");
    }
    println!("artifacts in {}", out.display());
}

fn dispatch(command: &Command) -> etpde::Result<()> {
    match command {
        Command::Eig(args)
        | Command::Design(args)
        | Command::Certify(args)
        | Command::Simulate(args)
        | Command::Verify(args)
        | Command::Run(args) => {
            let stage = match command {
                Command::Eig(_) => Stage::Eigen,
                Command::Design(_) => Stage::Design,
                Command::Certify(_) => Stage::Certify,
                Command::Simulate(_) => Stage::Simulate,
                _ => Stage::Verify,
            };
            let config = load_config(args)?;
            let summary = run_pipeline(&config, stage)?;
            print_summary(&summary, &config.output_dir);
            Ok(())
        }
        Command::Sweep(args) => {
            let config = load_config(&args.run)?;
            let axis: SweepAxis = args.axis.parse()?;
            let rows = sweep(&config, axis, &args.values, args.jobs)?;
            let ok = rows.iter().filter(|r| r.status == "ok").count();
            println!(
                "sweep over {}: {} cells ({} ok), table in {}",
                args.axis,
                rows.len(),
                ok,
                config.output_dir.join("sweep.csv").display()
            );
            for row in &rows {
                match (row.contraction, row.savings) {
                    (Some(q), Some(s)) => println!(
                        "  {} = {:.6}: q = {:.6}, savings {:.1}%",
                        args.axis,
                        row.value,
                        q,
                        100.0 * s
                    ),
                    _ => println!("  {} = {:.6}: {}", args.axis, row.value, row.status),
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
