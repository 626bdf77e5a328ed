use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use deskagent::action_space::parse_action;
use deskagent::backends::{Backend, HttpBackend, HttpConfig, ScriptedBackend};
use deskagent::harness::{report_json, run_benchmark, BackendChoice, Settings};
use deskagent::orchestrator::{replay, run_instruction, Outcome, RunConfig, Trace};
use deskagent::perception::render_observation;
use deskagent::sim::{load_scenario, Environment};
use deskagent::trace::{load_trace, trace_to_string};

#[derive(Parser)]
#[command(name = "deskagent", version, about = "Hierarchical desktop agent over a simulated desktop")]
struct Cli {
    /// TOML settings file for budgets and the HTTP backend.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Component {
    Apm,
    Manager,
    Reflection,
}

#[derive(Subcommand)]
enum Command {
    /// Run one instruction against a scenario and print the trace.
    Run {
        scenario: PathBuf,
        instruction: String,
        /// Scripted replies file.
        #[arg(long, conflicts_with = "http")]
        script: Option<PathBuf>,
        /// Chat-completions endpoint URL.
        #[arg(long)]
        http: Option<String>,
        #[arg(long, value_enum)]
        ablate: Vec<Component>,
        /// Write the JSONL trace here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a task corpus and write traces plus report.json.
    Bench {
        corpus: PathBuf,
        #[arg(long, value_enum)]
        ablate: Vec<Component>,
        #[arg(long, default_value_t = 4)]
        jobs: usize,
        /// Use an HTTP backend instead of each task's script.
        #[arg(long)]
        http: Option<String>,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Re-execute a trace's actions and compare the final state digest.
    Replay {
        trace: PathBuf,
        /// Scenario file; defaults to the path recorded in the trace.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Print what the agent would see, optionally after applying actions.
    Observe {
        scenario: PathBuf,
        /// Actions in the canonical grammar, applied in order.
        actions: Vec<String>,
    },
    /// Inspect trace files.
    Trace {
        #[command(subcommand)]
        command: TraceCommand,
    },
}

#[derive(Subcommand)]
enum TraceCommand {
    /// Print a readable summary, or one step in full.
    Dump {
        trace: PathBuf,
        /// 1-based step number across the whole trace.
        #[arg(long)]
        step: Option<usize>,
    },
}

fn run_config(settings: &Settings, ablate: &[Component]) -> RunConfig {
    let mut cfg = settings.run;
    for c in ablate {
        match c {
            Component::Apm => cfg.ablation.no_apm = true,
            Component::Manager => cfg.ablation.no_manager = true,
            Component::Reflection => cfg.ablation.no_reflection = true,
        }
    }
    cfg
}

fn http_backend(settings: &Settings, url: &str) -> Result<HttpBackend> {
    let config = HttpConfig {
        url: url.to_string(),
        ..settings.http.clone()
    };
    HttpBackend::new(config).context("building HTTP backend")
}

fn outcome_line(trace: &Trace) -> String {
    match &trace.outcome {
        Outcome::CompletedAll => format!("completed all {} subtasks", trace.subtasks.len()),
        Outcome::FailedAtSubtask { id, reason } => format!("failed at subtask {id}: {reason:?}"),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match try_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> Result<()> {
    let cli = Cli::parse();
    let settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    match cli.command {
        Command::Run {
            scenario,
            instruction,
            script,
            http,
            ablate,
            out,
        } => {
            let cfg = run_config(&settings, &ablate);
            let backend: Box<dyn Backend> = match (script, http) {
                (Some(path), None) => Box::new(
                    ScriptedBackend::from_file(&path)
                        .with_context(|| format!("loading script {}", path.display()))?,
                ),
                (None, Some(url)) => Box::new(http_backend(&settings, &url)?),
                (None, None) => Box::new(http_backend(&settings, &settings.http.url)?),
                (Some(_), Some(_)) => unreachable!("clap rejects --script with --http"),
            };
            let (_, loaded) = load_scenario(&scenario)
                .with_context(|| format!("loading scenario {}", scenario.display()))?;
            let mut env = Environment::new(loaded);
            let mut trace = run_instruction(&instruction, &mut env, backend.as_ref(), &cfg)?;
            trace.scenario = scenario.display().to_string();
            let text = trace_to_string(&trace);
            match out {
                Some(path) => std::fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            eprintln!("{}", outcome_line(&trace));
        }
        Command::Bench {
            corpus,
            ablate,
            jobs,
            http,
            out,
        } => {
            let cfg = run_config(&settings, &ablate);
            let backend = match http {
                Some(url) => BackendChoice::Http(Arc::new(http_backend(&settings, &url)?)),
                None => BackendChoice::Scripted,
            };
            let report = run_benchmark(&corpus, &backend, &cfg, jobs, &out)?;
            print!("{}", report_json(&report));
            eprintln!(
                "SR {:.3}  SSR {:.3}  recovery {:.3}  manager SR {:.3}  ({} tasks, traces in {})",
                report.sr,
                report.ssr,
                report.recovery_rate,
                report.manager_sr,
                report.tasks,
                out.display()
            );
        }
        Command::Replay { trace, scenario } => {
            let loaded = load_trace(&trace).with_context(|| format!("reading {}", trace.display()))?;
            let scenario_path = match scenario {
                Some(p) => p,
                None => locate_recorded(&trace, &loaded.scenario)?,
            };
            let (_, scenario) = load_scenario(&scenario_path)
                .with_context(|| format!("loading scenario {}", scenario_path.display()))?;
            let replayed = replay(&loaded, &scenario);
            let digest = replayed.final_state.digest();
            if digest != loaded.final_digest {
                bail!(
                    "replay diverged: trace ends at {} but replay reached {digest}",
                    loaded.final_digest
                );
            }
            println!("replay ok: {} steps, final digest {digest}", loaded.steps().count());
        }
        Command::Observe { scenario, actions } => {
            let (_, loaded) = load_scenario(&scenario)
                .with_context(|| format!("loading scenario {}", scenario.display()))?;
            let mut env = Environment::new(loaded);
            println!("== initial ==\n{}", render_observation(&env.observe()).trim_end());
            for text in &actions {
                let action = parse_action(text).with_context(|| format!("parsing `{text}`"))?;
                let result = env.execute(&action);
                let status = if result.changed { "changed" } else { "no change" };
                println!(
                    "== {action} ({status}) ==\n{}",
                    render_observation(&env.observe()).trim_end()
                );
            }
        }
        Command::Trace {
            command: TraceCommand::Dump { trace, step },
        } => {
            let loaded = load_trace(&trace).with_context(|| format!("reading {}", trace.display()))?;
            dump(&loaded, step)?;
        }
    }
    Ok(())
}

/// The recorded scenario path, tried as given and then next to the trace.
fn locate_recorded(trace_path: &Path, recorded: &str) -> Result<PathBuf> {
    let direct = PathBuf::from(recorded);
    if direct.is_file() {
        return Ok(direct);
    }
    if let Some(dir) = trace_path.parent() {
        let beside = dir.join(recorded);
        if beside.is_file() {
            return Ok(beside);
        }
    }
    bail!("cannot find scenario `{recorded}`; pass --scenario")
}

fn dump(trace: &Trace, step: Option<usize>) -> Result<()> {
    if let Some(n) = step {
        let Some(record) = n.checked_sub(1).and_then(|i| trace.steps().nth(i)) else {
            bail!("trace has {} steps", trace.steps().count());
        };
        println!("subtask {} step {}", record.subtask_id, record.step_index);
        println!("--- observation ---\n{}", record.rendered_observation.trim_end());
        println!("--- progress in ---\n{}", record.progress_in.summary);
        if let Some(r) = &record.reflection_in {
            println!("--- reflection in ---\n{r}");
        }
        println!("--- thought ---\n{}", record.decision.monologue);
        println!("--- action ---\n{}", record.decision.action);
        if record.resolved_action != record.decision.action {
            println!("resolved to: {}", record.resolved_action);
        }
        println!("--- reflection ---\n{}", record.reflection);
        println!(
            "--- progress ---\n{} (done: {})",
            record.progress.summary, record.progress.done
        );
        return Ok(());
    }
    println!("instruction: {}", trace.instruction);
    println!("scenario: {}", trace.scenario);
    let mut n = 0;
    for run in &trace.subtasks {
        println!("subtask {}: {}", run.id, run.text);
        for s in &run.steps {
            n += 1;
            println!("  #{n:<3} {:<40} {}", s.resolved_action.to_string(), s.reflection);
        }
        if let Some(out) = &run.progress.output {
            println!("  output: {out}");
        }
    }
    println!("outcome: {}", outcome_line(trace));
    Ok(())
}
