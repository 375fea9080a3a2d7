use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use motion_agent::config::{Config, Layout};
use motion_agent::pipeline::{self, PipelineError, Runtime};
use motion_agent::service::{planner_factory, serve, AppState};
use motion_agent::store::SessionStore;
use motion_agent::{mota, plot};
use motion_agent_core::agent::{run_turn, BackendKind, Session, Turn};
use motion_agent_core::lm::Task;

#[derive(Parser)]
#[command(name = "motion-agent", version, about = "Conversational text-to-motion agent")]
struct Cli {
    /// Working directory holding the corpus, artifacts and sessions.
    #[arg(long, global = true, default_value = "work")]
    dir: PathBuf,
    /// JSON config merged over its profile's defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    #[value(alias = "generation")]
    Generate,
    #[value(alias = "captioning")]
    Caption,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    #[value(alias = "rule")]
    RuleBased,
    #[value(alias = "remote")]
    RemoteChat,
}

#[derive(Subcommand)]
enum Command {
    /// Build the synthetic paired corpus.
    Synth,
    /// Train the motion codec.
    TrainCodec,
    /// Pre-train the frozen base language model.
    TrainBase,
    /// Train one task's adapters on top of the frozen base.
    Finetune {
        #[arg(long, value_enum)]
        task: TaskArg,
    },
    /// Generation and captioning metrics on the evaluation split.
    Eval {
        /// Score the ground-truth motions as if generated.
        #[arg(long)]
        ground_truth: bool,
    },
    /// Conversation against a session, from stdin or a script.
    Chat {
        #[arg(long, value_enum)]
        planner: Option<PlannerArg>,
        /// One request per line; blank lines and lines starting with '#' are skipped.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Session id used for a scripted run.
        #[arg(long, default_value = "chat")]
        session: String,
        /// Write the scripted transcript here instead of stdout.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        listen: Option<String>,
        #[arg(long, value_enum)]
        planner: Option<PlannerArg>,
    },
    /// Per-joint trajectory plot as SVG.
    ExportPlot {
        /// A MOTA file or a stored motion id.
        motion: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] motion_agent::config::ConfigError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("session store: {0}")]
    Store(#[from] motion_agent::store::StoreError),
    #[error("motion file: {0}")]
    Format(#[from] mota::FormatError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn session_dir(cfg: &Config, layout: &Layout) -> PathBuf {
    cfg.service.session_dir.clone().unwrap_or_else(|| layout.sessions())
}

fn planner_kind(cfg: &Config, arg: Option<PlannerArg>) -> BackendKind {
    match arg {
        Some(PlannerArg::RuleBased) => BackendKind::RuleBased,
        Some(PlannerArg::RemoteChat) => BackendKind::RemoteChat,
        None => cfg.service.planner.kind,
    }
}

fn print_turn(out: &mut impl Write, turn: &Turn) -> io::Result<()> {
    for (i, c) in turn.plan.calls.iter().enumerate() {
        let mut line = format!("  call {i}: {:?} \"{}\"", c.task, c.argument);
        if let Some(r) = &c.motion_ref {
            line.push_str(&format!(" ref={r}"));
        }
        if let Some(p) = c.placement {
            line.push_str(&format!(" placement=({:.3}, {:.3}, {:.3})", p.theta, p.x, p.z));
        }
        writeln!(out, "{line}")?;
    }
    for id in &turn.motion_ids {
        writeln!(out, "  motion {id}")?;
    }
    for c in &turn.captions {
        writeln!(out, "  caption {}: {}", c.motion_ref, c.text)?;
    }
    if let Some(r) = &turn.response {
        writeln!(out, "agent: {r}")?;
    }
    Ok(())
}

fn chat(
    cfg: &Config,
    layout: &Layout,
    planner: Option<PlannerArg>,
    script: Option<&Path>,
    session_id: &str,
    transcript: Option<&Path>,
) -> Result<(), CliError> {
    let rt = Runtime::from_layout(cfg, layout)?;
    let mut pc = cfg.service.planner.clone();
    pc.kind = planner_kind(cfg, planner);
    let mut backend = planner_factory(&pc)();
    if let Some(path) = script {
        let lines: Vec<String> = std::fs::read_to_string(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_owned)
            .collect();
        let session = pipeline::chat_script(&rt, backend.as_mut(), session_id, &lines, cfg.seed)?;
        let text = serde_json::to_string_pretty(&session)? + "\n";
        match transcript {
            Some(p) => std::fs::write(p, text)?,
            None => io::stdout().write_all(text.as_bytes())?,
        }
        return Ok(());
    }
    let store = SessionStore::open(&session_dir(cfg, layout))?;
    let id = store.next_id()?;
    let mut session: Session = store.create(&id, 0)?;
    let mut agent = rt.agent();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "session {id}; one request per line, end with EOF")?;
    for line in io::stdin().lock().lines() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let before = session.motions().len();
        let now = session.turns().len() as u64 + 1;
        match run_turn(&mut session, text, backend.as_mut(), &mut agent, &rt.codec, cfg.seed, now) {
            Ok(turn) => {
                store.append_turn(&id, &turn, &session.motions()[before..])?;
                print_turn(&mut out, &turn)?;
            }
            Err(e) => writeln!(out, "error: {e}")?,
        }
    }
    Ok(())
}

fn export_plot(cfg: &Config, layout: &Layout, motion: &str, out: &Path) -> Result<(), CliError> {
    let path = Path::new(motion);
    let (m, boundaries) = if path.exists() {
        (mota::read_motion(path)?, Vec::new())
    } else {
        let (sid, _) = motion
            .rsplit_once("-m")
            .ok_or_else(|| CliError::Usage(format!("'{motion}' is neither a file nor a motion id")))?;
        let session = SessionStore::open(&session_dir(cfg, layout))?.load(sid)?;
        let rec = session.motion(motion).ok_or_else(|| CliError::Usage(format!("unknown motion '{motion}'")))?;
        let down = cfg.codec.downsample;
        (rec.motion.clone(), rec.boundaries().iter().map(|b| b * down).collect())
    };
    std::fs::write(out, plot::trajectory_svg(&m, motion, &boundaries))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = Config::load(cli.config.as_deref(), cli.seed)?;
    let layout = Layout::new(&cli.dir);
    std::fs::create_dir_all(&layout.dir)?;
    match cli.command {
        Command::Synth => {
            let corpus = pipeline::synth(&cfg, &layout)?;
            println!("corpus: {} items in {}", corpus.items.len(), layout.corpus().display());
        }
        Command::TrainCodec => {
            let (codec, log) = pipeline::train_codec(&cfg, &layout)?;
            println!(
                "codec: K={} val L1 {:.5} (untrained {:.5}, ratio {:.3}), live fraction {:.3}, stop {:?}",
                codec.codebook_size(),
                log.final_val_l1(),
                log.baseline_val_l1,
                log.final_val_l1() / log.baseline_val_l1,
                log.live_fraction_used,
                log.stop
            );
        }
        Command::TrainBase => {
            let log = pipeline::train_base(&cfg, &layout)?;
            println!("base: val nll {:.4} (unigram {:.4}) hash {}", log.val_nll, log.unigram_val_nll, log.base_hash);
        }
        Command::Finetune { task } => {
            let task = match task {
                TaskArg::Generate => Task::Generation,
                TaskArg::Caption => Task::Captioning,
            };
            let log = pipeline::finetune(&cfg, &layout, task)?;
            println!(
                "{}: nll {:.4} -> {:.4}, base hash {}",
                task.name(),
                log.initial_nll,
                log.final_nll,
                log.base_hash
            );
        }
        Command::Eval { ground_truth } => {
            let report = pipeline::evaluate(&cfg, &layout, ground_truth)?;
            println!("generator: {} on {:?} ({} runs)", report.generator, report.split, report.generation.repeats);
            for (name, s) in &report.generation.metrics {
                println!("  {name}: {:.6} ± {:.6}", s.mean, s.ci95);
            }
            for w in &report.generation.warnings {
                println!("  warning: {w}");
            }
            if let Some(c) = &report.captioning {
                println!(
                    "  captioning BLEU@1 {:.2} BLEU@4 {:.2} ROUGE-L {:.2} CIDEr {:.2}",
                    c.model.bleu1, c.model.bleu4, c.model.rouge_l, c.model.cider
                );
                println!("  shuffled baseline BLEU@1 {:.2}", c.shuffled_baseline.bleu1);
            }
            if let Some(a) = report.archetype_agreement {
                println!("  archetype agreement {a:.3}");
            }
            println!("report: {}", layout.eval_report().display());
        }
        Command::Chat { planner, script, session, transcript } => {
            chat(&cfg, &layout, planner, script.as_deref(), &session, transcript.as_deref())?
        }
        Command::Serve { listen, planner } => {
            let rt = Runtime::from_layout(&cfg, &layout)?;
            let mut pc = cfg.service.planner.clone();
            pc.kind = planner_kind(&cfg, planner);
            let store = SessionStore::open(&session_dir(&cfg, &layout))?;
            let state = Arc::new(AppState::new(
                Arc::new(rt),
                store,
                planner_factory(&pc),
                pc.kind,
                cfg.seed,
                cfg.service.bearer_token.clone(),
            ));
            let listen = listen.unwrap_or_else(|| cfg.service.listen.clone());
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve(state, &listen, |addr| {
                println!("listening on http://{addr}");
            }))?;
        }
        Command::ExportPlot { motion, out } => export_plot(&cfg, &layout, &motion, &out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
