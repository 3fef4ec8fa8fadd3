//! Command-line harness: single-state distillation runs, seeded ensemble
//! statistics, and the golden-mean attractor demonstration.
//!
//! Exit codes: 0 success, 2 bad input, 3 bad configuration. `distill` adds
//! 10/11/12 when the run terminates as triple / product / budget-exhausted.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ghz_distill::ensemble::{run_ensemble, Distribution, EnsembleConfig, ProtocolSelect};
use ghz_distill::protocols::{
    run_big_step, run_infinitesimal, secondary_yield, EprMode, PipelineConfig, ProtocolKind,
    Terminal,
};
use ghz_distill::special::{
    attractor_single_step, escape_step, golden_mean_state, is_triple_state, multiset_distance,
    random_triple_state, ESCAPE_ALPHA, ESCAPE_THETA, TRIPLE_TOL,
};
use ghz_distill::state::{Subsystem, TripartiteState};
use ghz_distill::{combine_eprs, distances};

const EXIT_BAD_INPUT: u8 = 2;
const EXIT_BAD_CONFIG: u8 = 3;
const EXIT_TRIPLE: u8 = 10;
const EXIT_PRODUCT: u8 = 11;
const EXIT_MAX_STEPS: u8 = 12;

#[derive(Parser)]
#[command(
    name = "ghz-distill",
    version,
    about = "Distill GHZ states from three-qubit pure states by local POVM steps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one state through a distillation protocol and report the
    /// trajectory and final state.
    Distill(DistillArgs),
    /// Seeded Monte Carlo over an input ensemble, reporting yields per
    /// protocol.
    Ensemble(EnsembleArgs),
    /// Demonstrate the golden-mean attractor of big-step iteration on triple
    /// states, optionally escaping via a rotated-basis step.
    Goldenmean(GoldenArgs),
}

#[derive(Args)]
struct DistillArgs {
    /// State file: JSON array of 8 [re, im] pairs in |000>..|111> order.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// big-step | infinitesimal
    #[arg(long, default_value = "big-step")]
    protocol: String,
    #[arg(long, default_value_t = 1e-3)]
    d_tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: usize,
    /// Write the per-step trajectory (JSON lines) here instead of stdout.
    #[arg(long, value_name = "PATH")]
    trajectory: Option<PathBuf>,
    /// Write the final state (canonical JSON) here.
    #[arg(long, value_name = "PATH")]
    final_state: Option<PathBuf>,
    /// Suppress the trajectory on stdout; print the summary only.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct EnsembleArgs {
    /// JSON file of EnsembleConfig fields; explicit flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// big-step | infinitesimal | baseline | all
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    d_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// asymptotic | single-shot
    #[arg(long)]
    epr_mode: Option<String>,
    /// haar, or a path to a state file used for every sample.
    #[arg(long)]
    distribution: Option<String>,
    /// Write the JSON report here (it always goes to stdout too).
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Write the CSV report (one row per protocol) here.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Worker threads (default: rayon's choice).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct GoldenArgs {
    /// Random triple states to iterate, in addition to the golden-mean state
    /// itself (state 0).
    #[arg(long, default_value_t = 4)]
    states: usize,
    #[arg(long, default_value_t = 60)]
    cycles: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// After iterating, escape each state with a rotated-basis step and run
    /// big-step distillation on the survivor.
    #[arg(long)]
    escape: bool,
    #[arg(long, default_value_t = 1e-3)]
    d_tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Print the multiset distance every N cycles.
    #[arg(long, default_value_t = 1)]
    log_every: usize,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(classify(&err))
        }
    }
}

fn classify(err: &ghz_distill::Error) -> u8 {
    use ghz_distill::Error::*;
    match err {
        InvalidConfig(_) | OutOfRange { .. } | BadStepTarget { .. } | InvalidSubsystem(_) => {
            EXIT_BAD_CONFIG
        }
        _ => EXIT_BAD_INPUT,
    }
}

fn run(cli: Cli) -> ghz_distill::Result<ExitCode> {
    match cli.command {
        Command::Distill(args) => cmd_distill(args),
        Command::Ensemble(args) => cmd_ensemble(args),
        Command::Goldenmean(args) => cmd_goldenmean(args),
    }
}

fn parse_protocol(text: &str) -> ghz_distill::Result<ProtocolKind> {
    match text {
        "big-step" | "bigstep" | "big_step" => Ok(ProtocolKind::BigStep),
        "infinitesimal" => Ok(ProtocolKind::Infinitesimal),
        "baseline" => Ok(ProtocolKind::Baseline),
        other => Err(ghz_distill::Error::InvalidConfig(format!(
            "unknown protocol '{other}'"
        ))),
    }
}

fn cmd_distill(args: DistillArgs) -> ghz_distill::Result<ExitCode> {
    let protocol = parse_protocol(&args.protocol)?;
    if protocol == ProtocolKind::Baseline {
        return Err(ghz_distill::Error::InvalidConfig(
            "distill runs the primary protocols; use `ensemble --protocol baseline`".into(),
        ));
    }
    let mut config = PipelineConfig::default();
    config.run.d_tol = args.d_tol;
    config.run.max_iters = args.max_iters;
    config.run.epsilon = args.epsilon;
    config.run.max_steps = args.max_steps;
    config.run.validate()?;

    let text = std::fs::read_to_string(&args.input)?;
    let state = TripartiteState::from_json(&text)?;

    let (trajectory, final_state, pool) = match protocol {
        ProtocolKind::BigStep => run_big_step(&state, &config.run),
        _ => run_infinitesimal(&state, &config.run)?,
    };

    let jsonl = trajectory.to_jsonl();
    if let Some(path) = &args.trajectory {
        std::fs::write(path, &jsonl)?;
    } else if !args.quiet {
        print!("{jsonl}");
    }

    let counts = secondary_yield(&pool, EprMode::Asymptotic);
    let primary = if trajectory.terminal.is_converged() {
        trajectory.cumulative_success_prob
    } else {
        0.0
    };
    let secondary = combine_eprs(counts.n12, counts.n23, counts.n31)?;
    let d = distances(&final_state);
    let summary = serde_json::json!({
        "protocol": protocol.label(),
        "terminal": trajectory.terminal,
        "steps": trajectory.steps.len(),
        "cumulative_success_prob": trajectory.cumulative_success_prob,
        "primary_yield": primary,
        "epr_counts": counts,
        "secondary_ghz": secondary,
        "total_yield": primary + secondary,
        "d_p": d.d_p,
        "d_s": d.d_s,
        "d_2": d.d_2,
        "final_state": final_state,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);

    if let Some(path) = &args.final_state {
        std::fs::write(path, final_state.to_json())?;
    }

    Ok(match trajectory.terminal {
        Terminal::Converged { .. } => ExitCode::SUCCESS,
        Terminal::TripleState => ExitCode::from(EXIT_TRIPLE),
        Terminal::ProductState { .. } => ExitCode::from(EXIT_PRODUCT),
        Terminal::MaxSteps => ExitCode::from(EXIT_MAX_STEPS),
    })
}

fn cmd_ensemble(args: EnsembleArgs) -> ghz_distill::Result<ExitCode> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<EnsembleConfig>(&text)?
        }
        None => EnsembleConfig::default(),
    };

    if let Some(v) = args.samples {
        config.samples = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = &args.protocol {
        config.protocol = match v.as_str() {
            "big-step" | "bigstep" | "big_step" => ProtocolSelect::BigStep,
            "infinitesimal" => ProtocolSelect::Infinitesimal,
            "baseline" => ProtocolSelect::Baseline,
            "all" => ProtocolSelect::All,
            other => {
                return Err(ghz_distill::Error::InvalidConfig(format!(
                    "unknown protocol '{other}'"
                )))
            }
        };
    }
    if let Some(v) = args.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = args.d_tol {
        config.d_tol = v;
    }
    if let Some(v) = args.max_iters {
        config.max_iters = v;
    }
    if let Some(v) = args.max_steps {
        config.max_steps = v;
    }
    if let Some(v) = &args.epr_mode {
        config.epr_mode = match v.as_str() {
            "asymptotic" => EprMode::Asymptotic,
            "single-shot" | "singleshot" | "single_shot" => EprMode::SingleShot,
            other => {
                return Err(ghz_distill::Error::InvalidConfig(format!(
                    "unknown epr mode '{other}'"
                )))
            }
        };
    }
    if let Some(v) = &args.distribution {
        config.distribution = if v == "haar" {
            Distribution::Haar
        } else {
            Distribution::FromFile(PathBuf::from(v))
        };
    }

    let report = match args.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| ghz_distill::Error::InvalidConfig(e.to_string()))?;
            pool.install(|| run_ensemble(&config))?
        }
        None => run_ensemble(&config)?,
    };

    let json = report.to_json();
    println!("{json}");
    if let Some(path) = &args.json {
        std::fs::write(path, &json)?;
    }
    if let Some(path) = &args.csv {
        std::fs::write(path, report.to_csv())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_goldenmean(args: GoldenArgs) -> ghz_distill::Result<ExitCode> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let gm = golden_mean_state();

    let mut states = vec![("golden-mean".to_string(), gm.clone())];
    for i in 0..args.states {
        states.push((format!("triple-{}", i + 1), random_triple_state(&mut rng)));
    }

    for (name, start) in &states {
        let mut current = start.clone();
        println!("# state {name}: initial multiset distance {:.3e}", multiset_distance(&current, &gm));
        for cycle in 1..=args.cycles {
            for s in Subsystem::all() {
                current = attractor_single_step(&current, s)?;
            }
            if cycle % args.log_every.max(1) == 0 || cycle == args.cycles {
                println!(
                    "state {name} cycle {cycle} distance {:.6e}",
                    multiset_distance(&current, &gm)
                );
            }
        }
        let final_distance = multiset_distance(&current, &gm);
        println!("state {name} final distance {final_distance:.6e}");

        if *name == "golden-mean" {
            // At the attractor, single steps permute the component
            // amplitudes cyclically; show one full cycle.
            let mut walk = gm.clone();
            for s in Subsystem::all() {
                walk = attractor_single_step(&walk, s)?;
                let mags: Vec<String> = [1usize, 2, 4]
                    .iter()
                    .map(|&l| format!("{:.6}", walk.amp(l).norm_sqr()))
                    .collect();
                println!(
                    "state {name} shuffle after step on {s}: weights(001,010,100) = [{}] (multiset distance {:.3e})",
                    mags.join(", "),
                    multiset_distance(&walk, &gm)
                );
            }
        }

        if args.escape {
            let out = escape_step(&current, ESCAPE_THETA, ESCAPE_ALPHA)?;
            let escaped = out.success_state;
            let still_triple = is_triple_state(&escaped, TRIPLE_TOL).is_triple;
            let mut run_cfg = ghz_distill::RunConfig::default();
            run_cfg.d_tol = args.d_tol;
            run_cfg.max_iters = args.max_iters;
            let (traj, _, _) = run_big_step(&escaped, &run_cfg);
            println!(
                "state {name} escape: success_prob {:.4}, still_triple {}, terminal {:?}, yield {:.4}",
                out.success_prob,
                still_triple,
                traj.terminal,
                if traj.terminal.is_converged() {
                    traj.cumulative_success_prob
                } else {
                    0.0
                }
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}
