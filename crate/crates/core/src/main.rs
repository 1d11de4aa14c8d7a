//! `dualtrace` command-line entry point.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use dualtrace::corpus::{
    build_dataset, generate_tasks, materialize_epoch, read_jsonl_file, split_disjoint, write_jsonl_file,
    write_prompt_file, EnvConfig, RawExample,
};
use dualtrace::dropping::{DropPolicy, DEFAULT_CREATE_DROP_RATE, PRESETS};
use dualtrace::eval::{evaluate, read_rollouts, render_table, DEFAULT_ROLLOUTS_PER_TASK};
use dualtrace::grid::{render_ascii, render_image, MazeParams, Overlay, Task, DEFAULT_RETRY_BUDGET};
use dualtrace::tokenize::{decode_plan, decode_trace, ControlMode, TokenSeq, Vocab};
use dualtrace::Evaluation;

#[derive(Parser)]
#[command(
    name = "dualtrace",
    version,
    about = "Maze/Sokoban search-trace corpora, trace dropping and rollout evaluation"
)]
struct Cli {
    /// Worker threads for generation and evaluation (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate solvable tasks without searching them.
    GenTasks {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate tasks, search them and write a raw dataset with full traces.
    BuildCorpus {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
        /// Also write the vocabulary file (one token name per line, in id order).
        #[arg(long)]
        vocab_out: Option<PathBuf>,
    },
    /// Split a raw dataset into fingerprint-disjoint train and eval files.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        eval_count: usize,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        eval_out: PathBuf,
    },
    /// Materialize one epoch of dropped training targets.
    DropEpoch {
        #[arg(long)]
        input: PathBuf,
        /// Named policy (see `presets`), or `mix-<p>`.
        #[arg(long, conflicts_with = "probs")]
        policy: Option<String>,
        /// Explicit level probabilities p0,p1,p2,p3,p4.
        #[arg(long, value_delimiter = ',')]
        probs: Option<Vec<f64>>,
        /// Fraction of create clauses dropped at level 3.
        #[arg(long, default_value_t = DEFAULT_CREATE_DROP_RATE)]
        create_drop_rate: f64,
        #[arg(long)]
        epoch: u64,
        #[command(flatten)]
        seed: SeedArg,
        /// Vocabulary file to encode against (default: derived from the tasks).
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write mode-controlled prompts (`id TAB tokens`) for sampling.
    Prompts {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a rollout file against an eval file.
    Eval {
        #[arg(long = "eval")]
        eval_file: PathBuf,
        #[arg(long)]
        rollouts: PathBuf,
        /// Control mode the rollouts were sampled under.
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
        #[arg(long, default_value_t = DEFAULT_ROLLOUTS_PER_TASK)]
        n_per_task: usize,
        /// Row label in the table.
        #[arg(long, default_value = "model")]
        method: String,
        /// Full JSON report with per-task detail.
        #[arg(long)]
        json_out: Option<PathBuf>,
        /// Text table (printed to stdout when omitted).
        #[arg(long)]
        table_out: Option<PathBuf>,
    },
    /// Draw one task as ASCII, optionally with its plan and explored cells.
    Render {
        /// Task or raw dataset JSONL.
        #[arg(long)]
        input: PathBuf,
        /// Task id (default: first line).
        #[arg(long)]
        id: Option<u64>,
        #[arg(long, value_enum, default_value_t = OverlayKind::None)]
        overlay: OverlayKind,
        /// ASCII output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a PNG plot.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Pixels per cell in the plot.
        #[arg(long, default_value_t = 16)]
        scale: u32,
    },
    /// List the named dropping policies.
    Presets,
}

#[derive(Args)]
struct EnvArgs {
    #[arg(long, value_enum)]
    env: EnvKind,
    /// Maze side length.
    #[arg(long, default_value_t = 10)]
    dim: u8,
    /// Lower bound of the maze wall fraction.
    #[arg(long, default_value_t = 0.3)]
    wall_lo: f64,
    /// Upper bound of the maze wall fraction.
    #[arg(long, default_value_t = 0.5)]
    wall_hi: f64,
    /// Rejection-sampling attempts per task.
    #[arg(long, default_value_t = DEFAULT_RETRY_BUDGET)]
    retry_budget: u32,
}

impl EnvArgs {
    fn config(&self) -> EnvConfig {
        match self.env {
            EnvKind::Maze => EnvConfig::Maze(MazeParams {
                retry_budget: self.retry_budget,
                ..MazeParams::new(self.dim, self.wall_lo, self.wall_hi)
            }),
            EnvKind::Sokoban => EnvConfig::Sokoban,
        }
    }
}

#[derive(Args)]
struct SeedArg {
    /// Master seed for all randomness.
    #[arg(long, env = "DUALTRACE_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvKind {
    Maze,
    Sokoban,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Fast,
    Slow,
    Auto,
}

impl From<Mode> for ControlMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Fast => ControlMode::Fast,
            Mode::Slow => ControlMode::Slow,
            Mode::Auto => ControlMode::Auto,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OverlayKind {
    None,
    Plan,
    Trace,
}

/// Either a task line or a raw example; the extra fields only matter for overlays.
#[derive(Deserialize)]
struct RenderLine {
    id: u64,
    task: Task,
    #[serde(default)]
    trace: Option<TokenSeq>,
    #[serde(default)]
    plan: Option<TokenSeq>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn read_raw(path: &Path) -> Result<Vec<RawExample>> {
    read_jsonl_file(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match cli.command {
        Command::GenTasks { env, n, seed, out } => {
            let tasks = generate_tasks(n, &env.config(), seed.seed)?;
            write_jsonl_file(&tasks, &out)?;
        }
        Command::BuildCorpus { env, n, seed, out, vocab_out } => {
            let env = env.config();
            let data = build_dataset(n, &env, seed.seed)?;
            write_jsonl_file(&data, &out)?;
            if let Some(path) = vocab_out {
                let mut w = create(&path)?;
                env.vocab().write_to(&mut w)?;
                w.flush()?;
            }
        }
        Command::Split { input, eval_count, train_out, eval_out } => {
            let split = split_disjoint(read_raw(&input)?, eval_count)?;
            write_jsonl_file(&split.train, &train_out)?;
            write_jsonl_file(&split.eval, &eval_out)?;
            if !split.discarded.is_empty() {
                eprintln!("dualtrace: {} duplicate copies of held-out tasks were dropped", split.discarded.len());
            }
        }
        Command::DropEpoch { input, policy, probs, create_drop_rate, epoch, seed, vocab, out } => {
            let policy = match (policy, probs) {
                (Some(name), None) => DropPolicy::preset(&name)?.with_create_drop_rate(create_drop_rate)?,
                (None, Some(p)) => {
                    let probs: [f64; 5] = p
                        .try_into()
                        .map_err(|p: Vec<f64>| anyhow::anyhow!("--probs needs 5 values, got {}", p.len()))?;
                    DropPolicy::new(probs, create_drop_rate)?
                }
                _ => bail!("give exactly one of --policy or --probs"),
            };
            let train = read_raw(&input)?;
            let vocab = match vocab {
                Some(path) => {
                    let f = File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
                    Vocab::read_from(BufReader::new(f))?
                }
                None => train.first().map(|e| Vocab::for_task(&e.task)).unwrap_or_default(),
            };
            let epoch_data = materialize_epoch(&train, &policy, &vocab, seed.seed, epoch)?;
            write_jsonl_file(&epoch_data, &out)?;
        }
        Command::Prompts { input, mode, out } => {
            write_prompt_file(&read_raw(&input)?, mode.into(), create(&out)?)?;
        }
        Command::Eval { eval_file, rollouts, mode, n_per_task, method, json_out, table_out } => {
            let examples = read_raw(&eval_file)?;
            let f = File::open(&rollouts).with_context(|| format!("cannot open {}", rollouts.display()))?;
            let lines = read_rollouts(BufReader::new(f))?;
            let ev: Evaluation = evaluate(&examples, &lines, n_per_task, mode.into(), &method)?;
            if let Some(path) = json_out {
                let mut text = serde_json::to_string_pretty(&ev.to_json())?;
                text.push('\n');
                write_file(&path, text.as_bytes())?;
            }
            let table = render_table(&[ev.report]);
            match table_out {
                Some(path) => write_file(&path, table.as_bytes())?,
                None => print!("{table}"),
            }
        }
        Command::Render { input, id, overlay, out, plot, scale } => {
            let lines: Vec<RenderLine> =
                read_jsonl_file(&input).with_context(|| format!("reading {}", input.display()))?;
            let line = match id {
                Some(id) => lines.into_iter().find(|l| l.id == id).with_context(|| format!("no task with id {id}"))?,
                None => lines.into_iter().next().context("input has no tasks")?,
            };
            let mut ov = Overlay::default();
            if !matches!(overlay, OverlayKind::None) {
                let plan = line.plan.as_ref().context("overlay needs a raw dataset with plans")?;
                ov.plan = decode_plan(plan.as_slice())?;
            }
            if matches!(overlay, OverlayKind::Trace) {
                let trace = line.trace.as_ref().context("overlay needs a raw dataset with traces")?;
                ov.explored =
                    decode_trace(trace.as_slice(), line.task.kind())?.iter().map(|c| c.state.agent()).collect();
            }
            let text = render_ascii(&line.task, &ov)?;
            match out {
                Some(path) => write_file(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
            if let Some(path) = plot {
                render_image(&line.task, &ov, scale)?
                    .save(&path)
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
        }
        Command::Presets => {
            let mut out = io::stdout().lock();
            for (name, p, about) in PRESETS {
                writeln!(out, "{name:<18} {:.4} {:.4} {:.4} {:.4} {:.4}  {about}", p[0], p[1], p[2], p[3], p[4])?;
            }
            writeln!(out, "{:<18} (1-p) 0 0 0 p  fraction p of solution-only targets", "mix-<p>")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("dualtrace: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dualtrace: error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
