//! Command-line front end: `solve`, `train`, `eval`, `export`.
//!
//! Exit codes: 0 success, 2 usage error, 3 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::eval::{evaluate, oracle_floor};
use crate::game::BoardDims;
use crate::mcts::CachedEvaluator;
use crate::nn::{HeadKind, Network};
use crate::rewards::{write_cdf_csv, OutcomeWindow, RewardFunction, RewardKind};
use crate::solver::solve;
use crate::trainer::{completed_generations, load_games, run_training, RunOptions, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ordinal-zero",
    version,
    about = "Self-play training with rank-based rewards on the opposition game"
)]
pub struct Cli {
    /// Log every search (move, prior, visits, mean value).
    #[arg(long, global = true)]
    pub trace: bool,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a board by retrograde analysis and summarize it.
    Solve {
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        /// Write the tablebase here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train an agent by self-play into a run directory (resumes if it exists).
    Train(Box<TrainArgs>),
    /// Re-evaluate a checkpoint of a run against the perfect player.
    Eval {
        /// Run directory.
        #[arg(long)]
        run: PathBuf,
        /// Generation whose weights and window to use (default: latest).
        #[arg(long)]
        generation: Option<usize>,
        /// Evaluate these weights instead of the generation's.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Copy CDF snapshots and the demerit curve out of a run for plotting.
    Export {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Generations to export CDF snapshots for (default: all).
        #[arg(long, value_delimiter = ',')]
        generations: Vec<usize>,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub height: usize,
    /// primitive, handtuned, cdf or cdf-bonus.
    #[arg(long)]
    pub reward: String,
    /// Bonus weight for cdf-bonus.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// value or outcome.
    #[arg(long)]
    pub head: String,
    #[arg(long)]
    pub generations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub games_per_generation: Option<usize>,
    #[arg(long)]
    pub window_generations: Option<usize>,
    #[arg(long)]
    pub epochs_per_generation: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Self-play visits per move (default 20 x height).
    #[arg(long)]
    pub visits: Option<usize>,
    #[arg(long)]
    pub eval_visits: Option<usize>,
    #[arg(long)]
    pub c_puct: Option<f64>,
    #[arg(long)]
    pub dirichlet_alpha: Option<f64>,
    #[arg(long)]
    pub noise_fraction: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
}

impl TrainArgs {
    pub fn to_config(&self) -> Result<TrainConfig> {
        let dims = BoardDims::new(self.width, self.height)?;
        let mut reward: RewardKind = self.reward.parse()?;
        match (&mut reward, self.alpha) {
            (RewardKind::CdfBonus { alpha }, Some(a)) => *alpha = a,
            (_, Some(_)) => return Err(Error::Config("--alpha only applies to --reward cdf-bonus".into())),
            _ => {}
        }
        let head: HeadKind = self.head.parse()?;
        let mut c = TrainConfig::new(dims, reward, head);
        c.generations = self.generations;
        c.seed = self.seed;
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set!(
            games_per_generation => c.games_per_generation,
            window_generations => c.window_generations,
            epochs_per_generation => c.epochs_per_generation,
            batch_size => c.batch_size,
            lr => c.lr,
            momentum => c.momentum,
            visits => c.search.visits,
            eval_visits => c.eval_visits,
            c_puct => c.search.c_puct,
            dirichlet_alpha => c.search.dirichlet_alpha,
            noise_fraction => c.search.noise_fraction,
            temperature => c.search.temperature,
        );
        c.validate()?;
        Ok(c)
    }
}

/// Exit code for an error: bad input is a usage error, the rest runtime.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidDims { .. } | Error::Parse { .. } | Error::Config(_) => EXIT_USAGE,
        Error::Generation { source, .. } => exit_code(source),
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (program name first) and runs the command, printing
/// results to `out` and errors to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.trace {
        log::LevelFilter::Trace
    } else {
        match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn io_out(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Solve {
            width,
            height,
            out: file,
        } => {
            let dims = BoardDims::new(width, height)?;
            let tb = solve(dims);
            write!(out, "{}", tb.summary()).map_err(io_out)?;
            if let Some(path) = file {
                tb.save(&path)?;
                writeln!(out, "tablebase written to {}", path.display()).map_err(io_out)?;
            }
            Ok(())
        }
        Command::Train(args) => {
            let config = args.to_config()?;
            let options = RunOptions {
                workers: args.workers.unwrap_or(0),
            };
            let floor = oracle_floor(&solve(config.dims))?.demerits;
            writeln!(out, "training into {} (oracle floor {floor})", args.out.display()).map_err(io_out)?;
            run_training(&config, &args.out, options, |r| {
                let _ = writeln!(
                    out,
                    "generation {:4}  demerits {:8.4}  loss {:9.5}  examples {:6}",
                    r.generation,
                    r.demerits(),
                    r.mean_loss,
                    r.examples
                );
                ControlFlow::Continue(())
            })?;
            Ok(())
        }
        Command::Eval {
            run,
            generation,
            weights,
            workers,
        } => eval_command(&run, generation, weights.as_deref(), workers.unwrap_or(0), out),
        Command::Export {
            run,
            out: dest,
            generations,
        } => export_command(&run, &dest, &generations, out),
    }
}

fn read_run_config(run: &Path) -> Result<TrainConfig> {
    let path = run.join("config");
    let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Config(format!("{} is not a run directory (no config)", run.display())),
        _ => Error::io(&path, e),
    })?;
    TrainConfig::from_text(&text)
}

fn eval_command(
    run: &Path,
    generation: Option<usize>,
    weights: Option<&Path>,
    workers: usize,
    out: &mut dyn Write,
) -> Result<()> {
    let config = read_run_config(run)?;
    let done = completed_generations(run)?;
    let generation = match generation {
        Some(g) if g >= done => {
            return Err(Error::Config(format!(
                "generation {g} not found in {} ({done} complete)",
                run.display()
            )))
        }
        Some(g) => Some(g),
        None => done.checked_sub(1),
    };
    let weights_path = match (weights, generation) {
        (Some(w), _) => w.to_owned(),
        (None, Some(g)) => run.join(format!("gen-{g:03}.weights")),
        (None, None) => run.join("init.weights"),
    };
    let net = Network::load(&weights_path)?;
    if net.config().dims != config.dims {
        return Err(Error::Config(format!(
            "{} is for a {} board, the run uses {}",
            weights_path.display(),
            net.config().dims,
            config.dims
        )));
    }
    let mut outcomes = Vec::new();
    if let Some(g) = generation {
        for past in (g + 1).saturating_sub(config.window_generations)..=g {
            outcomes.extend(
                load_games(&run.join(format!("gen-{past:03}.games")))?
                    .into_iter()
                    .map(|r| r.outcome),
            );
        }
    }
    let window = OutcomeWindow::from_outcomes(config.dims, &outcomes);
    let reward = RewardFunction::new(config.reward, &window)?;
    let tb = solve(config.dims);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let report = pool.install(|| evaluate(&CachedEvaluator::new(&net), &reward, &tb, &config.eval_params()))?;
    let floor = oracle_floor(&tb)?.demerits;
    writeln!(out, "weights: {}", weights_path.display()).map_err(io_out)?;
    writeln!(out, "window: {} outcomes", window.len()).map_err(io_out)?;
    for g in &report.games {
        writeln!(
            out,
            "  {}  agent {}  {}  reward {:+.4}",
            g.start, g.agent, g.outcome, g.agent_reward
        )
        .map_err(io_out)?;
    }
    writeln!(out, "demerits {} (oracle floor {floor})", report.demerits).map_err(io_out)?;
    Ok(())
}

fn export_command(run: &Path, dest: &Path, generations: &[usize], out: &mut dyn Write) -> Result<()> {
    let config = read_run_config(run)?;
    let done = completed_generations(run)?;
    if done == 0 {
        return Err(Error::Config(format!("{} has no completed generations", run.display())));
    }
    let wanted: Vec<usize> = if generations.is_empty() {
        (0..done).collect()
    } else {
        generations.to_vec()
    };
    if let Some(g) = wanted.iter().find(|&&g| g >= done) {
        return Err(Error::Config(format!(
            "generation {g} not found in {} ({done} complete)",
            run.display()
        )));
    }
    fs::create_dir_all(dest).map_err(|e| Error::io(dest, e))?;

    let src = run.join("demerits.csv");
    let text = fs::read_to_string(&src).map_err(|e| Error::io(&src, e))?;
    let mut curve = String::from("generation,demerits\n");
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let mut cols = line.splitn(3, ',');
        let (g, d) = (cols.next().unwrap_or(""), cols.next().unwrap_or(""));
        curve.push_str(&format!("{g},{d}\n"));
    }
    let curve_path = dest.join("demerits.csv");
    fs::write(&curve_path, curve).map_err(|e| Error::io(&curve_path, e))?;

    for &g in &wanted {
        // Rebuild from the games so runs missing a snapshot still export.
        let mut outcomes = Vec::new();
        for past in (g + 1).saturating_sub(config.window_generations)..=g {
            outcomes.extend(
                load_games(&run.join(format!("gen-{past:03}.games")))?
                    .into_iter()
                    .map(|r| r.outcome),
            );
        }
        let window = OutcomeWindow::from_outcomes(config.dims, &outcomes);
        let path = dest.join(format!("cdf-{g:03}.csv"));
        let mut buf = Vec::new();
        write_cdf_csv(&mut buf, &window).map_err(|e| Error::io(&path, e))?;
        fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    }
    writeln!(
        out,
        "exported demerits for {done} generations and {} CDF snapshots to {}",
        wanted.len(),
        dest.display()
    )
    .map_err(io_out)?;
    Ok(())
}
