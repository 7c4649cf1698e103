//! Generation loop: self-play against a frozen snapshot, a sliding window
//! of outcomes, training on the replay buffer, evaluation.
//!
//! Run directory (all CSVs have a header row):
//!
//! - `config`: `key = value` lines, enough to rerun the experiment
//! - `init.weights`, `gen-NNN.weights`: network after each generation
//! - `gen-NNN.optim`: optimizer state, latest generation only
//! - `gen-NNN.games`: self-play games, one per line, for resuming
//! - `gen-NNN.outcomes.csv`: `game,start,outcome,plies`
//! - `cdf-NNN.csv`: training window after generation NNN (see
//!   [`write_cdf_csv`])
//! - `generations.csv`: `generation,games,examples,mean_loss,p1_wins,p2_wins,draws,mean_plies,demerits`
//! - `demerits.csv`: `generation,demerits,outcomes`
//! - `timing.csv`: `generation,selfplay_seconds,train_seconds,eval_seconds`
//!   (wall clock, the only file that differs between identical runs)

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::game::{starting_positions, BoardDims, GameState, Move};
use crate::mcts::{search, select_move, CachedEvaluator, Evaluator, SearchParams};
use crate::nn::{result_target, HeadKind, Network, NetworkConfig, Sgd, TrainingExample, POLICY_OUTPUTS};
use crate::rewards::{write_cdf_csv, GameResult, Outcome, OutcomeWindow, Reward, RewardFunction, RewardKind};
use crate::solver::{solve, Tablebase};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub dims: BoardDims,
    pub reward: RewardKind,
    pub head: HeadKind,
    pub generations: usize,
    pub games_per_generation: usize,
    /// Generations of games kept for the outcome window and replay buffer.
    pub window_generations: usize,
    pub epochs_per_generation: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Self-play search; evaluation reuses it greedily and without noise.
    pub search: SearchParams,
    pub eval_visits: usize,
    pub seed: u64,
}

fn reward_label(kind: RewardKind) -> String {
    match kind {
        RewardKind::CdfBonus { alpha } => format!("cdf-bonus:{alpha}"),
        other => other.to_string(),
    }
}

impl TrainConfig {
    pub fn new(dims: BoardDims, reward: RewardKind, head: HeadKind) -> Self {
        TrainConfig {
            dims,
            reward,
            head,
            generations: 100,
            games_per_generation: 25,
            window_generations: 5,
            epochs_per_generation: 5,
            batch_size: 32,
            lr: 0.005,
            momentum: 0.9,
            search: SearchParams::self_play(dims),
            eval_visits: SearchParams::default_visits(dims),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reward.is_rank_based() && self.head != HeadKind::Outcome {
            return Err(Error::Config(format!(
                "{} reward needs the outcome head: a scalar value head cannot follow a reward that changes every generation",
                self.reward
            )));
        }
        if let RewardKind::CdfBonus { alpha } = self.reward {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Config(format!("bonus alpha {alpha} outside [0, 1]")));
            }
        }
        for (name, v) in [
            ("games_per_generation", self.games_per_generation),
            ("window_generations", self.window_generations),
            ("batch_size", self.batch_size),
            ("eval_visits", self.eval_visits),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "bad optimizer settings lr={} momentum={}",
                self.lr, self.momentum
            )));
        }
        self.search.validate()
    }

    pub fn eval_params(&self) -> SearchParams {
        SearchParams {
            visits: self.eval_visits,
            noise_fraction: 0.0,
            temperature: 0.0,
            ..self.search
        }
    }

    pub fn to_text(&self) -> String {
        let s = &self.search;
        let mut out = String::new();
        let _ = write!(
            out,
            "width = {}\nheight = {}\nreward = {}\nhead = {}\ngenerations = {}\n\
             games_per_generation = {}\nwindow_generations = {}\nepochs_per_generation = {}\n\
             batch_size = {}\nlr = {}\nmomentum = {}\nvisits = {}\nc_puct = {}\n\
             dirichlet_alpha = {}\nnoise_fraction = {}\ntemperature = {}\neval_visits = {}\nseed = {}\n",
            self.dims.width(),
            self.dims.height(),
            reward_label(self.reward),
            self.head,
            self.generations,
            self.games_per_generation,
            self.window_generations,
            self.epochs_per_generation,
            self.batch_size,
            self.lr,
            self.momentum,
            s.visits,
            s.c_puct,
            s.dirichlet_alpha,
            s.noise_fraction,
            s.temperature,
            self.eval_visits,
            self.seed,
        );
        out
    }

    /// Parses [`TrainConfig::to_text`] output. Keys other than the board,
    /// reward and head fall back to their defaults when absent.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse("config line", line, "expected key = value"))?;
            pairs.push((k.trim(), v.trim()));
        }
        let get = |key: &str| pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let need = |key: &'static str| get(key).ok_or_else(|| Error::Config(format!("config is missing `{key}`")));
        fn num<T: std::str::FromStr>(key: &'static str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::parse("config value", v, format!("bad {key}")))
        }
        let dims = BoardDims::new(num("width", need("width")?)?, num("height", need("height")?)?)?;
        let mut c = TrainConfig::new(dims, need("reward")?.parse()?, need("head")?.parse()?);
        for (k, v) in &pairs {
            match *k {
                "width" | "height" | "reward" | "head" => {}
                "generations" => c.generations = num("generations", v)?,
                "games_per_generation" => c.games_per_generation = num("games_per_generation", v)?,
                "window_generations" => c.window_generations = num("window_generations", v)?,
                "epochs_per_generation" => c.epochs_per_generation = num("epochs_per_generation", v)?,
                "batch_size" => c.batch_size = num("batch_size", v)?,
                "lr" => c.lr = num("lr", v)?,
                "momentum" => c.momentum = num("momentum", v)?,
                "visits" => c.search.visits = num("visits", v)?,
                "c_puct" => c.search.c_puct = num("c_puct", v)?,
                "dirichlet_alpha" => c.search.dirichlet_alpha = num("dirichlet_alpha", v)?,
                "noise_fraction" => c.search.noise_fraction = num("noise_fraction", v)?,
                "temperature" => c.search.temperature = num("temperature", v)?,
                "eval_visits" => c.eval_visits = num("eval_visits", v)?,
                "seed" => c.seed = num("seed", v)?,
                other => return Err(Error::Config(format!("unknown config key `{other}`"))),
            }
        }
        Ok(c)
    }
}

/// One self-play game with the search policy recorded at every move.
#[derive(Clone, Debug, PartialEq)]
pub struct GameRecord {
    pub start: GameState,
    pub moves: Vec<Move>,
    /// Normalized root visit counts, one per move played.
    pub policies: Vec<[f64; POLICY_OUTPUTS]>,
    pub outcome: Outcome,
    /// Largest |value| backed up to any root edge or assigned to a finished
    /// game during this game's searches. Not persisted.
    pub max_abs_value: f64,
}

impl GameRecord {
    /// Positions before each move, in order.
    pub fn states(&self) -> Result<Vec<GameState>> {
        let mut out = Vec::with_capacity(self.moves.len());
        let mut s = self.start;
        for &mv in &self.moves {
            out.push(s);
            s = s.apply_move(mv)?.0;
        }
        Ok(out)
    }

    /// Tab-separated: start, outcome, then `direction:p0,...,p7` per move.
    pub fn to_line(&self) -> String {
        let mut line = format!("{}\t{}", self.start, self.outcome);
        for (mv, p) in self.moves.iter().zip(&self.policies) {
            let probs: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
            let _ = write!(line, "\t{}:{}", mv.index(), probs.join(","));
        }
        line
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let bad = |why: &str| Error::parse("game record", line, why);
        let mut fields = line.split('\t');
        let start: GameState = fields.next().ok_or_else(|| bad("empty line"))?.parse()?;
        let outcome: Outcome = fields.next().ok_or_else(|| bad("missing outcome"))?.parse()?;
        let mut moves = Vec::new();
        let mut policies = Vec::new();
        for f in fields {
            let (idx, probs) = f.split_once(':').ok_or_else(|| bad("move without policy"))?;
            let mv = idx
                .parse::<usize>()
                .ok()
                .and_then(Move::from_index)
                .ok_or_else(|| bad("bad move index"))?;
            let mut p = [0.0; POLICY_OUTPUTS];
            let parts: Vec<&str> = probs.split(',').collect();
            if parts.len() != POLICY_OUTPUTS {
                return Err(bad("policy needs 8 entries"));
            }
            for (slot, s) in p.iter_mut().zip(parts) {
                *slot = s.parse().map_err(|_| bad("bad probability"))?;
            }
            moves.push(mv);
            policies.push(p);
        }
        Ok(GameRecord {
            start,
            moves,
            policies,
            outcome,
            max_abs_value: 0.0,
        })
    }
}

const STREAM_GAME: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_INIT: u64 = 3;

/// Independent generator for one (purpose, generation, index) triple.
fn stream_rng(seed: u64, purpose: u64, generation: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 56) | ((generation as u64) << 24) | index as u64);
    rng
}

/// Plays one self-play game to the end.
pub fn play_game<E, R>(
    start: GameState,
    evaluator: &E,
    reward: &R,
    params: &SearchParams,
    rng: &mut ChaCha8Rng,
) -> Result<GameRecord>
where
    E: Evaluator + ?Sized,
    R: Reward + ?Sized,
{
    let mut state = start;
    let mut status = state.status();
    let mut moves = Vec::new();
    let mut policies = Vec::new();
    let mut max_abs_value: f64 = 0.0;
    while !status.is_terminal() {
        let r = search(&state, evaluator, reward, params, rng)?;
        if log::log_enabled!(log::Level::Trace) {
            log::trace!("{state}\n{}", r.trace());
        }
        max_abs_value =
            r.q.iter()
                .fold(max_abs_value.max(r.max_abs_terminal_value), |m, q| m.max(q.abs()));
        let mv = select_move(&r.policy, params.temperature, rng)?;
        moves.push(mv);
        policies.push(r.policy);
        (state, status) = state.apply_move(mv)?;
    }
    Ok(GameRecord {
        start,
        moves,
        policies,
        outcome: status.outcome().expect("finished game has an outcome"),
        max_abs_value,
    })
}

/// Plays one generation of self-play games from uniformly drawn starting
/// positions, in parallel on the current rayon pool. Game `i` draws all of
/// its randomness from its own stream, so results do not depend on the
/// number of workers.
pub fn play_generation<E, R>(
    evaluator: &E,
    reward: &R,
    config: &TrainConfig,
    generation: usize,
) -> Result<Vec<GameRecord>>
where
    E: Evaluator + ?Sized,
    R: Reward + ?Sized,
{
    let starts = starting_positions(config.dims);
    (0..config.games_per_generation)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(config.seed, STREAM_GAME, generation, i);
            let start = starts[rng.gen_range(0..starts.len())];
            play_game(start, evaluator, reward, &config.search, &mut rng)
        })
        .collect()
}

/// One training example per position of every game. The value target is
/// the game's reward for the side to move under `reward`.
pub fn examples_from_games<R: Reward + ?Sized>(games: &[GameRecord], reward: &R) -> Result<Vec<TrainingExample>> {
    let mut out = Vec::new();
    for g in games {
        for (state, policy) in g.states()?.into_iter().zip(&g.policies) {
            let me = state.to_move();
            out.push(TrainingExample {
                planes: state.encode(),
                policy_target: *policy,
                result: result_target(&g.outcome, me),
                plies_left: g.outcome.plies - state.ply(),
                value_target: reward.reward(g.outcome, me),
            });
        }
    }
    Ok(out)
}

/// Runs `epochs` shuffled passes over `examples`; returns the mean batch
/// objective seen before each step (0 if nothing was trained).
pub fn train_epochs(
    net: &mut Network,
    opt: &mut Sgd,
    examples: &[TrainingExample],
    epochs: usize,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut total = 0.0;
    let mut steps = 0usize;
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch_size) {
            let batch: Vec<TrainingExample> = chunk.iter().map(|&i| examples[i].clone()).collect();
            total += net.train_step(&batch, opt)?;
            steps += 1;
        }
    }
    Ok(if steps == 0 { 0.0 } else { total / steps as f64 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub outcomes: Vec<Outcome>,
    pub examples: usize,
    pub mean_loss: f64,
    pub eval: EvalReport,
    pub duration: Duration,
}

impl GenerationRecord {
    pub fn demerits(&self) -> f64 {
        self.eval.demerits
    }
}

/// Knobs that do not change results.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Worker threads for self-play and evaluation; 0 uses every core.
    pub workers: usize,
}

fn gen_file(dir: &Path, generation: usize, suffix: &str) -> PathBuf {
    dir.join(format!("gen-{generation:03}.{suffix}"))
}

fn cdf_file(dir: &Path, generation: usize) -> PathBuf {
    dir.join(format!("cdf-{generation:03}.csv"))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = fs::OpenOptions::new()
        .append(true)
        .create(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))
}

/// Keeps the header and the first `rows` data rows of a CSV.
fn truncate_csv(path: &Path, header: &str, rows: usize) -> Result<()> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut out = format!("{header}\n");
    for line in text.lines().skip(1).take(rows) {
        out.push_str(line);
        out.push('\n');
    }
    write_file(path, out)
}

const GENERATIONS_HEADER: &str = "generation,games,examples,mean_loss,p1_wins,p2_wins,draws,mean_plies,demerits";
const DEMERITS_HEADER: &str = "generation,demerits,outcomes";
const TIMING_HEADER: &str = "generation,selfplay_seconds,train_seconds,eval_seconds";

/// Number of generations recorded in a run directory's `demerits.csv`.
pub fn completed_generations(dir: &Path) -> Result<usize> {
    let path = dir.join("demerits.csv");
    match fs::read_to_string(&path) {
        Ok(t) => Ok(t.lines().skip(1).filter(|l| !l.trim().is_empty()).count()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(0),
        Err(e) => Err(Error::io(path, e)),
    }
}

pub fn load_games(path: &Path) -> Result<Vec<GameRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.is_empty())
        .map(GameRecord::from_line)
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Format {
            path: path.to_owned(),
            reason: e.to_string(),
        })
}

fn window_of(dims: BoardDims, history: &VecDeque<(usize, Vec<GameRecord>)>) -> OutcomeWindow {
    OutcomeWindow::from_outcomes(
        dims,
        history.iter().flat_map(|(_, games)| games.iter().map(|g| &g.outcome)),
    )
}

struct RunState {
    net: Network,
    opt: Sgd,
    history: VecDeque<(usize, Vec<GameRecord>)>,
    next: usize,
}

fn start_or_resume(config: &TrainConfig, dir: &Path) -> Result<RunState> {
    let config_path = dir.join("config");
    if config_path.exists() {
        let text = fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
        let existing = TrainConfig::from_text(&text)?;
        let comparable = TrainConfig {
            generations: config.generations,
            ..existing
        };
        if comparable != *config {
            return Err(Error::Config(format!(
                "{} holds a run with a different configuration",
                dir.display()
            )));
        }
        let done = completed_generations(dir)?;
        let (net, opt) = if done == 0 {
            let net = Network::load(&dir.join("init.weights"))?;
            let n = net.num_params();
            (net, Sgd::new(config.lr, config.momentum, n))
        } else {
            (
                Network::load(&gen_file(dir, done - 1, "weights"))?,
                Sgd::load(&gen_file(dir, done - 1, "optim"))?,
            )
        };
        let mut history = VecDeque::new();
        for g in done.saturating_sub(config.window_generations)..done {
            history.push_back((g, load_games(&gen_file(dir, g, "games"))?));
        }
        truncate_csv(&dir.join("generations.csv"), GENERATIONS_HEADER, done)?;
        truncate_csv(&dir.join("timing.csv"), TIMING_HEADER, done)?;
        truncate_csv(&dir.join("demerits.csv"), DEMERITS_HEADER, done)?;
        write_file(&config_path, config.to_text())?;
        log::info!("resuming {} at generation {done}", dir.display());
        return Ok(RunState {
            net,
            opt,
            history,
            next: done,
        });
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&config_path, config.to_text())?;
    let init_seed = stream_rng(config.seed, STREAM_INIT, 0, 0).gen();
    let net = Network::new(
        NetworkConfig {
            dims: config.dims,
            head: config.head,
        },
        init_seed,
    );
    net.save(&dir.join("init.weights"))?;
    for (name, header) in [
        ("generations.csv", GENERATIONS_HEADER),
        ("demerits.csv", DEMERITS_HEADER),
        ("timing.csv", TIMING_HEADER),
    ] {
        write_file(&dir.join(name), format!("{header}\n"))?;
    }
    let opt = Sgd::new(config.lr, config.momentum, net.num_params());
    Ok(RunState {
        net,
        opt,
        history: VecDeque::new(),
        next: 0,
    })
}

/// Runs (or resumes) training into `dir` until `config.generations`
/// generations exist, calling `on_record` after each one; returning
/// `ControlFlow::Break` stops early. A directory that already holds a run
/// with the same settings is resumed after its last complete generation.
pub fn run_training(
    config: &TrainConfig,
    dir: &Path,
    options: RunOptions,
    mut on_record: impl FnMut(&GenerationRecord) -> ControlFlow<()>,
) -> Result<Vec<GenerationRecord>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let tb = solve(config.dims);
    let mut run = start_or_resume(config, dir)?;
    let mut records = Vec::new();
    while run.next < config.generations {
        let g = run.next;
        let record = pool
            .install(|| run_generation(config, dir, &tb, &mut run, g))
            .map_err(|e| Error::Generation {
                generation: g,
                source: Box::new(e),
            })?;
        log::info!(
            "generation {g}: demerits {:.3}, loss {:.4}, {} examples",
            record.demerits(),
            record.mean_loss,
            record.examples
        );
        run.next += 1;
        let stop = on_record(&record).is_break();
        records.push(record);
        if stop {
            break;
        }
    }
    Ok(records)
}

fn run_generation(
    config: &TrainConfig,
    dir: &Path,
    tb: &Tablebase,
    run: &mut RunState,
    g: usize,
) -> Result<GenerationRecord> {
    let started = Instant::now();

    // Self-play sees only earlier generations.
    let reward = RewardFunction::new(config.reward, &window_of(config.dims, &run.history))?;
    let games = play_generation(&CachedEvaluator::new(&run.net), &reward, config, g)?;
    let selfplay = started.elapsed();

    let mut lines = String::new();
    let mut csv = String::from("game,start,outcome,plies\n");
    for (i, game) in games.iter().enumerate() {
        lines.push_str(&game.to_line());
        lines.push('\n');
        let _ = writeln!(csv, "{i},{},{},{}", game.start, game.outcome, game.outcome.plies);
    }
    write_file(&gen_file(dir, g, "games"), lines)?;
    write_file(&gen_file(dir, g, "outcomes.csv"), csv)?;
    let outcomes: Vec<Outcome> = games.iter().map(|game| game.outcome).collect();

    run.history.push_back((g, games));
    while run.history.len() > config.window_generations {
        run.history.pop_front();
    }
    let window = window_of(config.dims, &run.history);
    let mut cdf = Vec::new();
    write_cdf_csv(&mut cdf, &window).map_err(|e| Error::io(cdf_file(dir, g), e))?;
    write_file(&cdf_file(dir, g), cdf)?;

    let reward = RewardFunction::new(config.reward, &window)?;
    let replay: Vec<GameRecord> = run.history.iter().flat_map(|(_, gs)| gs.iter().cloned()).collect();
    let examples = examples_from_games(&replay, &reward)?;
    let train_started = Instant::now();
    let mut rng = stream_rng(config.seed, STREAM_TRAIN, g, 0);
    let mean_loss = train_epochs(
        &mut run.net,
        &mut run.opt,
        &examples,
        config.epochs_per_generation,
        config.batch_size,
        &mut rng,
    )?;
    let train = train_started.elapsed();
    run.net.save(&gen_file(dir, g, "weights"))?;
    run.opt.save(&gen_file(dir, g, "optim"))?;
    if g > 0 {
        let stale = gen_file(dir, g - 1, "optim");
        if stale.exists() {
            fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
        }
    }

    let eval_started = Instant::now();
    let eval = evaluate(&CachedEvaluator::new(&run.net), &reward, tb, &config.eval_params())?;
    let eval_time = eval_started.elapsed();

    let count = |r: GameResult| outcomes.iter().filter(|o| o.result == r).count();
    let mean_plies = outcomes.iter().map(|o| o.plies as f64).sum::<f64>() / outcomes.len().max(1) as f64;
    append_line(
        &dir.join("generations.csv"),
        &format!(
            "{g},{},{},{},{},{},{},{},{}",
            outcomes.len(),
            examples.len(),
            mean_loss,
            count(GameResult::WinP1),
            count(GameResult::WinP2),
            count(GameResult::Draw),
            mean_plies,
            eval.demerits
        ),
    )?;
    append_line(
        &dir.join("timing.csv"),
        &format!(
            "{g},{:.3},{:.3},{:.3}",
            selfplay.as_secs_f64(),
            train.as_secs_f64(),
            eval_time.as_secs_f64()
        ),
    )?;
    // Written last: its row count marks the generation as complete.
    append_line(
        &dir.join("demerits.csv"),
        &format!("{g},{},{}", eval.demerits, eval.outcome_labels()),
    )?;

    Ok(GenerationRecord {
        generation: g,
        outcomes,
        examples: examples.len(),
        mean_loss,
        eval,
        duration: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcts::UniformEvaluator;
    use crate::rewards::cdf_reward;

    fn small_config(reward: RewardKind, head: HeadKind) -> TrainConfig {
        let dims = BoardDims::new(3, 5).unwrap();
        let mut c = TrainConfig::new(dims, reward, head);
        c.games_per_generation = 4;
        c.generations = 2;
        c.epochs_per_generation = 1;
        c.search.visits = 12;
        c.eval_visits = 6;
        c.seed = 17;
        c
    }

    #[test]
    fn cdf_with_value_head_is_rejected() {
        let c = small_config(RewardKind::Cdf, HeadKind::Value);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        assert!(small_config(RewardKind::HandTuned, HeadKind::Outcome)
            .validate()
            .is_ok());
    }

    #[test]
    fn config_text_round_trips() {
        let mut c = small_config(RewardKind::CdfBonus { alpha: 0.25 }, HeadKind::Outcome);
        c.lr = 0.0031;
        let back = TrainConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert!(TrainConfig::from_text("width = 3\nheight = 5\nreward = cdf\nhead = outcome\nbogus = 1").is_err());
    }

    #[test]
    fn game_lines_round_trip() {
        let c = small_config(RewardKind::Primitive, HeadKind::Value);
        let stub = UniformEvaluator { head: HeadKind::Value };
        let reward = RewardFunction::fixed(RewardKind::Primitive, c.dims).unwrap();
        let games = play_generation(&stub, &reward, &c, 0).unwrap();
        for g in &games {
            let back = GameRecord::from_line(&g.to_line()).unwrap();
            assert_eq!(back.moves, g.moves);
            assert_eq!(back.policies, g.policies);
            assert_eq!(back.outcome, g.outcome);
            assert!(g.outcome.plies <= c.dims.timeout());
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let c = small_config(RewardKind::Cdf, HeadKind::Outcome);
        let stub = UniformEvaluator {
            head: HeadKind::Outcome,
        };
        let reward = RewardFunction::new(RewardKind::Cdf, &OutcomeWindow::empty(c.dims)).unwrap();
        let a = play_generation(&stub, &reward, &c, 3).unwrap();
        let b = play_generation(&stub, &reward, &c, 3).unwrap();
        assert_eq!(a, b);
        let other = play_generation(&stub, &reward, &c, 4).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn examples_carry_remaining_plies_and_results() {
        let c = small_config(RewardKind::HandTuned, HeadKind::Value);
        let stub = UniformEvaluator { head: HeadKind::Value };
        let reward = RewardFunction::fixed(RewardKind::HandTuned, c.dims).unwrap();
        let games = play_generation(&stub, &reward, &c, 0).unwrap();
        let examples = examples_from_games(&games, &reward).unwrap();
        assert_eq!(examples.len(), games.iter().map(|g| g.moves.len()).sum::<usize>());
        let g = &games[0];
        let first = &examples[0];
        assert_eq!(first.plies_left, g.outcome.plies);
        assert_eq!(first.value_target, reward.reward(g.outcome, g.start.to_move()));
        let last = &examples[g.moves.len() - 1];
        assert_eq!(last.plies_left, 1);
        for ex in &examples {
            assert!((ex.policy_target.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_rewards_are_zero_sum_over_their_own_window() {
        let c = small_config(RewardKind::Cdf, HeadKind::Outcome);
        let stub = UniformEvaluator {
            head: HeadKind::Outcome,
        };
        let empty = RewardFunction::new(RewardKind::Cdf, &OutcomeWindow::empty(c.dims)).unwrap();
        let mut c25 = c;
        c25.games_per_generation = 25;
        let games = play_generation(&stub, &empty, &c25, 0).unwrap();
        let outcomes: Vec<Outcome> = games.iter().map(|g| g.outcome).collect();
        let window = OutcomeWindow::from_outcomes(c.dims, &outcomes);
        let p1: f64 = outcomes
            .iter()
            .map(|&o| cdf_reward(&window, o, crate::game::Player::One))
            .sum();
        let p2: f64 = outcomes
            .iter()
            .map(|&o| cdf_reward(&window, o, crate::game::Player::Two))
            .sum();
        assert!((p1 / 25.0).abs() < 1e-9);
        assert!((p1 + p2).abs() < 1e-9);
    }

    #[test]
    fn run_directory_layout_and_resume() {
        let c = small_config(RewardKind::Cdf, HeadKind::Outcome);
        let tmp = tempfile::tempdir().unwrap();
        let full = tmp.path().join("full");
        let records = run_training(&c, &full, RunOptions { workers: 1 }, |_| ControlFlow::Continue(())).unwrap();
        assert_eq!(records.len(), 2);
        for name in [
            "config",
            "init.weights",
            "gen-000.weights",
            "gen-001.weights",
            "gen-001.optim",
            "gen-000.games",
            "gen-001.outcomes.csv",
            "cdf-001.csv",
            "generations.csv",
            "demerits.csv",
            "timing.csv",
        ] {
            assert!(full.join(name).exists(), "{name}");
        }
        assert!(!full.join("gen-000.optim").exists());
        assert_eq!(completed_generations(&full).unwrap(), 2);

        // Stop after one generation, then resume to two.
        let split = tmp.path().join("split");
        let first = run_training(&c, &split, RunOptions { workers: 2 }, |_| ControlFlow::Break(())).unwrap();
        assert_eq!(first.len(), 1);
        let rest = run_training(&c, &split, RunOptions { workers: 1 }, |_| ControlFlow::Continue(())).unwrap();
        assert_eq!(rest.len(), 1);
        assert_eq!(rest[0].outcomes, records[1].outcomes);
        for name in [
            "demerits.csv",
            "generations.csv",
            "gen-001.weights",
            "cdf-001.csv",
            "gen-001.games",
        ] {
            assert_eq!(
                fs::read(full.join(name)).unwrap(),
                fs::read(split.join(name)).unwrap(),
                "{name}"
            );
        }

        let mut other = c;
        other.seed += 1;
        assert!(run_training(&other, &split, RunOptions::default(), |_| ControlFlow::Continue(())).is_err());
    }
}
