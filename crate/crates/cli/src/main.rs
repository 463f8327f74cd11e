use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lesample_core::agents::{replay, Algorithm, Trace};
use lesample_core::bench::{run_experiments, scenario_for, write_outputs, ExperimentConfig};
use lesample_core::pddl::{
    grocery_domain, parse_domain, parse_problem, print_domain, print_problem,
};
use lesample_core::planner::{parse_plan, validate_plan, PlanInvalid};
use lesample_core::simworld::{ground_goal, scene_to_problem, Scenario};

#[derive(Parser)]
#[command(
    name = "lesample",
    version,
    about = "Grocery-packing planning under perceptual uncertainty"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep and write CSV, charts and a JSON report.
    Run(RunArgs),
    /// Re-execute a JSONL trace on its logged true scene.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Print the PDDL domain and problem a planner would get for a scenario.
    EmitPddl(EmitArgs),
    /// Check a plan file against a problem file.
    ValidatePlan {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        /// Domain file; defaults to the built-in grocery domain.
        #[arg(long)]
        domain: Option<PathBuf>,
    },
    /// Write one generated scenario (true scene plus injected belief) as JSON.
    Scenario {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        h: f64,
        #[arg(long, default_value_t = 8)]
        objects: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated algorithms (lesample, ffreplan, bpstream, pomcp, despot).
    #[arg(long, value_delimiter = ',')]
    algo: Vec<Algorithm>,
    /// Comma-separated entropy levels in [0, 1].
    #[arg(long, value_delimiter = ',')]
    h: Vec<f64>,
    /// Repeats per arrangement.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    arrangements: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    objects: Option<usize>,
    #[arg(long)]
    timeout_s: Option<f64>,
    #[arg(long)]
    action_duration_s: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
    /// External planner command with {domain} {problem} {plan} placeholders.
    #[arg(long)]
    external_planner: Option<String>,
    /// Also write one JSONL trace per trial.
    #[arg(long)]
    traces: bool,
    /// Also write the scenario JSON for every arrangement and H.
    #[arg(long)]
    scenarios: bool,
}

#[derive(Args)]
struct EmitArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Plan for a scene sampled from the belief with this seed instead of
    /// the most likely scene.
    #[arg(long)]
    sample: Option<u64>,
    /// Plan for the true scene.
    #[arg(long, conflicts_with = "sample")]
    truth: bool,
    /// Write domain.pddl and problem.pddl here instead of printing.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Replay { trace } => replay_cmd(&trace),
        Command::EmitPddl(args) => emit_pddl(args),
        Command::ValidatePlan {
            problem,
            plan,
            domain,
        } => validate_cmd(&problem, &plan, domain.as_deref()),
        Command::Scenario {
            seed,
            h,
            objects,
            out,
        } => {
            let cfg = ExperimentConfig {
                n_objects: objects,
                ..ExperimentConfig::default()
            };
            let s = scenario_for(&cfg, seed, h).map_err(anyhow::Error::msg)?;
            s.save(&out)
                .with_context(|| format!("writing {}", out.display()))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if !args.algo.is_empty() {
        cfg.algorithms = args.algo.clone();
    }
    if !args.h.is_empty() {
        cfg.h_values = args.h.clone();
    }
    cfg.repeats_per_arrangement = args.trials.unwrap_or(cfg.repeats_per_arrangement);
    cfg.n_arrangements = args.arrangements.unwrap_or(cfg.n_arrangements);
    cfg.master_seed = args.seed.unwrap_or(cfg.master_seed);
    cfg.n_objects = args.objects.unwrap_or(cfg.n_objects);
    cfg.timeout_s = args.timeout_s.unwrap_or(cfg.timeout_s);
    cfg.action_duration_s = args.action_duration_s.unwrap_or(cfg.action_duration_s);
    if let Some(d) = &args.out_dir {
        cfg.out_dir = d.clone();
    }
    if args.external_planner.is_some() {
        cfg.external_planner = args.external_planner.clone();
    }
    cfg.write_traces |= args.traces;
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let cfg = build_config(&args)?;
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    log::info!(
        "{} trials on {jobs} workers, config {}",
        cfg.trial_count(),
        cfg.hash()
    );
    let report = run_experiments(&cfg, jobs)?;
    let written = write_outputs(&report, &cfg.out_dir)?;
    if args.scenarios {
        let sdir = cfg.out_dir.join("scenarios");
        fs::create_dir_all(&sdir)?;
        let mut seen = std::collections::BTreeSet::new();
        for spec in cfg.trials() {
            if seen.insert((spec.arrangement_seed, spec.target_h.to_bits())) {
                let s = scenario_for(&cfg, spec.arrangement_seed, spec.target_h)
                    .map_err(anyhow::Error::msg)?;
                s.save(&sdir.join(format!(
                    "arrangement-{:016x}-h{}.json",
                    spec.arrangement_seed, spec.target_h
                )))?;
            }
        }
    }

    println!(
        "{:<10} {:>5} {:>4} {:>8} {:>9} {:>7} {:>11} {:>10}",
        "algorithm", "H", "n", "packed", "mistakes", "actions", "planning_s", "success"
    );
    for a in &report.aggregates {
        println!(
            "{:<10} {:>5} {:>4} {:>8.2} {:>9.2} {:>7.1} {:>11.1} {:>10.2}",
            a.algorithm.as_str(),
            a.target_h,
            a.count,
            a.packed.mean,
            a.mistakes.mean,
            a.actions.mean,
            a.planning_time_s.mean,
            a.success.mean
        );
    }
    println!(
        "wrote {} files under {}",
        written.len(),
        cfg.out_dir.display()
    );
    if !report.failures.is_empty() {
        eprintln!("{} trial(s) failed; see report.json", report.failures.len());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn replay_cmd(path: &Path) -> Result<ExitCode> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let trace = Trace::read_jsonl(BufReader::new(f))?;
    let r = replay(&trace)?;
    println!("actions replayed: {}", r.actions);
    println!(
        "packed: {}  success: {}  constraint violations: {}",
        r.packed, r.success, r.constraint_violations
    );
    match r.matches_logged_result {
        Some(true) => println!("matches logged result"),
        Some(false) => println!("DIFFERS from logged result"),
        None => println!("no end record"),
    }
    let ok = r.observation_mismatches.is_empty()
        && r.unreproduced_faults == 0
        && r.matches_logged_result != Some(false);
    if !r.observation_mismatches.is_empty() {
        println!(
            "observation mismatches at actions {:?}",
            r.observation_mismatches
        );
    }
    if r.unreproduced_faults > 0 {
        println!(
            "{} logged fault(s) did not reproduce",
            r.unreproduced_faults
        );
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn emit_pddl(args: EmitArgs) -> Result<ExitCode> {
    let scenario = Scenario::load(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))?;
    let belief = scenario.initial_belief()?;
    let scene = match (args.truth, args.sample) {
        (true, _) => scenario.truth.clone(),
        (false, Some(seed)) => belief.sample_scene(&mut ChaCha8Rng::seed_from_u64(seed)),
        (false, None) => belief.argmax_scene(),
    };
    let goal = ground_goal(&scene);
    let problem = scene_to_problem(&scene, &goal.goal)?;
    let domain_text = print_domain(&grocery_domain());
    let problem_text = print_problem(&problem);
    match args.out_dir {
        Some(dir) => {
            fs::create_dir_all(&dir)?;
            fs::write(dir.join("domain.pddl"), domain_text)?;
            fs::write(dir.join("problem.pddl"), problem_text)?;
        }
        None => print!("{domain_text}\n{problem_text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn validate_cmd(problem: &Path, plan: &Path, domain: Option<&Path>) -> Result<ExitCode> {
    let domain = match domain {
        Some(p) => parse_domain(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => grocery_domain(),
    };
    let problem = parse_problem(
        &fs::read_to_string(problem).with_context(|| format!("reading {}", problem.display()))?,
        &domain,
    )?;
    let text = fs::read_to_string(plan).with_context(|| format!("reading {}", plan.display()))?;
    let steps = parse_plan(&domain, &text)?;
    match validate_plan(&problem, &steps) {
        Ok(_) => {
            println!("valid plan, {} steps", steps.len());
            Ok(ExitCode::SUCCESS)
        }
        Err(PlanInvalid::Inapplicable {
            index,
            action,
            violated,
        }) => {
            println!("step {index} {action} is inapplicable: {violated} does not hold");
            Ok(ExitCode::from(1))
        }
        Err(e @ PlanInvalid::GoalMiss { .. }) => {
            println!("{e}");
            Ok(ExitCode::from(1))
        }
    }
}
