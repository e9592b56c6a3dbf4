use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smirl::expert::Dataset;
use smirl::gridworld::TaskSpec;
use smirl::harness::{
    aggregate, collect_curves, generate_demo_set, load_environment, run_experiment, write_aggregate,
    Algorithm, ExperimentConfig,
};
use smirl::irl::{evaluate_policy, plan_from_weights, ActionSelection, IrlConfig};
use smirl::motif::{learn_motif, learn_motif_exhaustive, SearchConfig};
use smirl::{RewardMachine, Vocabulary};

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Parser)]
#[command(name = "smirl", version, about = "Reward-machine motif learning and motif-conditioned MaxEnt IRL")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the expert and write demonstrations for one seed.
    GenDemos {
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Output file; defaults to `<output_dir>/demos-task<k>-seed<s>.jsonl`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Config override `key=value` (dotted keys, TOML values).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Learn a machine structure from a JSON-lines demonstration file.
    LearnRm {
        demos: PathBuf,
        #[arg(long, default_value_t = SearchConfig::default().u_max)]
        u_max: usize,
        /// Exhaustive search instead of tabu search (small instances only).
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SearchConfig::default().restarts)]
        restarts: usize,
        /// Let transitions on the empty label set leave the current state.
        #[arg(long)]
        free_empty: bool,
        /// Write the machine here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment config for the given seeds.
    Train {
        config: PathBuf,
        /// One or more seeds, comma separated; replaces `seeds` in the config.
        #[arg(long, required = true, value_delimiter = ',')]
        seed: Vec<u64>,
        #[arg(long)]
        algorithm: Option<Algorithm>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Plan with the weights of a learned machine and report the mean
    /// ground-truth return on a task.
    Eval {
        /// Machine text file with weights (`learned_rm.txt`).
        policy: PathBuf,
        /// Bundled task id or task file.
        task: String,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Episode cap; defaults to the task horizon.
        #[arg(long)]
        horizon: Option<usize>,
        /// Planning horizon of the soft policy.
        #[arg(long, default_value_t = 60)]
        plan_horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        sample: bool,
    },
    /// Convert a machine text file to Graphviz DOT.
    ExportDot {
        rm: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate every per-seed curve below a run directory into one CSV.
    Report {
        run_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concatenate the raw per-seed rows instead of mean/std.
        #[arg(long)]
        raw: bool,
    },
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), BoxError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display()).into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_task(arg: &str) -> Result<TaskSpec, BoxError> {
    Ok(match arg.parse::<u32>() {
        Ok(id) => TaskSpec::builtin(id)?,
        Err(_) => TaskSpec::load(Path::new(arg))?,
    })
}

fn run(cli: Cli) -> Result<(), BoxError> {
    match cli.cmd {
        Cmd::GenDemos {
            config,
            seed,
            out,
            sets,
        } => {
            let cfg = ExperimentConfig::load(&config, &sets)?;
            cfg.validate()?;
            let env = load_environment(&cfg)?;
            let (data, manifest) = generate_demo_set(&cfg, &env, seed)?;
            let out = out.unwrap_or_else(|| {
                cfg.output_dir
                    .join(format!("demos-task{}-seed{seed}.jsonl", env.task.task_id))
            });
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            data.save(&out)?;
            let mpath = out.with_extension("manifest.json");
            std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)? + "\n")?;
            eprintln!(
                "wrote {} demos ({} attempts) to {}",
                data.len(),
                manifest.attempts,
                out.display()
            );
        }
        Cmd::LearnRm {
            demos,
            u_max,
            oracle,
            seed,
            restarts,
            free_empty,
            out,
        } => {
            let data = Dataset::load(&demos, &Vocabulary::office())?;
            let motif = if oracle {
                learn_motif_exhaustive(&data, u_max, !free_empty)?
            } else {
                let cfg = SearchConfig {
                    u_max,
                    seed,
                    restarts,
                    empty_self_loop: !free_empty,
                    ..SearchConfig::default()
                };
                learn_motif(&data, &cfg)?
            };
            println!("cost {}", motif.cost);
            let text = motif.rm.to_text();
            print!("{text}");
            if let Some(p) = out {
                std::fs::write(&p, &text)?;
            }
        }
        Cmd::Train {
            config,
            seed,
            algorithm,
            output_dir,
            sets,
        } => {
            let mut cfg = ExperimentConfig::load(&config, &sets)?;
            cfg.seeds = seed;
            if let Some(a) = algorithm {
                cfg.algorithm = a;
            }
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            let art = run_experiment(&cfg)?;
            for r in &art.runs {
                println!(
                    "{} task {} seed {}: final return {:.3}, interactions {}",
                    cfg.algorithm.name(),
                    r.meta.task,
                    r.meta.seed,
                    r.meta.final_return,
                    r.meta.env_interactions
                );
            }
            eprintln!("artifacts in {}", art.dir.display());
        }
        Cmd::Eval {
            policy,
            task,
            episodes,
            horizon,
            plan_horizon,
            seed,
            sample,
        } => {
            let task = load_task(&task)?;
            let model = task.map.export_model();
            let text = std::fs::read_to_string(&policy)
                .map_err(|e| format!("cannot read {}: {e}", policy.display()))?;
            let rm = RewardMachine::from_text(&text, model.vocab())?;
            let cfg = IrlConfig {
                horizon: Some(plan_horizon),
                ..IrlConfig::default()
            };
            let learned = plan_from_weights(&model, &rm, &cfg)?;
            let mode = if sample {
                ActionSelection::Sample
            } else {
                ActionSelection::Greedy
            };
            let ret = evaluate_policy(
                &learned,
                &model,
                &task.rm,
                episodes,
                horizon.unwrap_or(task.horizon),
                mode,
                seed,
            );
            println!("mean return {ret}");
        }
        Cmd::ExportDot { rm, out } => {
            let text =
                std::fs::read_to_string(&rm).map_err(|e| format!("cannot read {}: {e}", rm.display()))?;
            let machine = RewardMachine::from_text(&text, &Vocabulary::office())?;
            write_or_print(out.as_deref(), &machine.to_dot())?;
        }
        Cmd::Report { run_dir, out, raw } => {
            let rows = collect_curves(&run_dir)?;
            if rows.is_empty() {
                return Err(format!("no curves below {}", run_dir.display()).into());
            }
            let mut buf = csv::Writer::from_writer(Vec::new());
            if raw {
                for r in &rows {
                    buf.serialize(r)?;
                }
            } else if let Some(p) = &out {
                return Ok(write_aggregate(p, &aggregate(&rows))?);
            } else {
                for r in aggregate(&rows) {
                    buf.serialize(r)?;
                }
            }
            let text = String::from_utf8(buf.into_inner()?)?;
            write_or_print(out.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // error messages already embed their causes
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
