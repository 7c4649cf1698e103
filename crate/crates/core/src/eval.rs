//! Matches against the perfect player, scored in demerits.
//!
//! From every starting position the agent plays once as each color. A
//! game's score is the hand-tuned reward of its outcome for the agent;
//! demerits are the negated sum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{starting_positions, GameState, Move, Player};
use crate::mcts::{search, select_move, Evaluator, SearchParams};
use crate::rewards::{handtuned_reward, Outcome, Reward};
use crate::solver::Tablebase;

/// Slack for floating-point sums when checking sign invariants.
const TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalGame {
    pub start: GameState,
    pub agent: Player,
    pub outcome: Outcome,
    /// Hand-tuned reward of the outcome for the agent.
    pub agent_reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Two games per starting position, agent as Player One first.
    pub games: Vec<EvalGame>,
    pub demerits: f64,
}

impl EvalReport {
    fn from_games(games: Vec<EvalGame>) -> Result<Self> {
        for pair in games.chunks(2) {
            let sum: f64 = pair.iter().map(|g| g.agent_reward).sum();
            if sum > TOLERANCE {
                return Err(Error::contract(format!(
                    "agent scored {sum} over both colors from {} against the perfect player",
                    pair[0].start
                )));
            }
        }
        // Adding 0.0 turns a perfect score's -0 into 0.
        let demerits = -games.iter().map(|g| g.agent_reward).sum::<f64>() + 0.0;
        Ok(EvalReport { games, demerits })
    }

    /// Outcome labels in game order, space separated.
    pub fn outcome_labels(&self) -> String {
        self.games
            .iter()
            .map(|g| g.outcome.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Plays one game from `start`; `agent_move` chooses for `agent`, the
/// tablebase for the other side.
pub fn play_against_perfect(
    start: GameState,
    agent: Player,
    tb: &Tablebase,
    mut agent_move: impl FnMut(&GameState) -> Result<Move>,
) -> Result<EvalGame> {
    let mut state = start;
    let mut status = state.status();
    while !status.is_terminal() {
        let mv = if state.to_move() == agent {
            agent_move(&state)?
        } else {
            tb.perfect_move(&state)?
        };
        (state, status) = state.apply_move(mv)?;
    }
    let outcome = status.outcome().expect("finished game has an outcome");
    Ok(EvalGame {
        start,
        agent,
        outcome,
        agent_reward: handtuned_reward(outcome, agent, start.dims()),
    })
}

fn all_pairings(tb: &Tablebase) -> Vec<(GameState, Player)> {
    starting_positions(tb.dims())
        .into_iter()
        .flat_map(|s| [(s, Player::One), (s, Player::Two)])
        .collect()
}

/// Demerits of the perfect player against itself: the best any agent can
/// score on this board.
pub fn oracle_floor(tb: &Tablebase) -> Result<EvalReport> {
    let games = all_pairings(tb)
        .into_iter()
        .map(|(s, agent)| play_against_perfect(s, agent, tb, |st| tb.perfect_move(st)))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_games(games)
}

/// Plays the full match with the agent searching greedily. `params` should
/// be noise-free with temperature 0 (see [`SearchParams::evaluation`]); the
/// games run in parallel on the current rayon pool.
pub fn evaluate<E, R>(evaluator: &E, reward: &R, tb: &Tablebase, params: &SearchParams) -> Result<EvalReport>
where
    E: Evaluator + ?Sized,
    R: Reward + ?Sized,
{
    if params.noise_fraction != 0.0 || params.temperature != 0.0 {
        return Err(Error::Config("evaluation search must be greedy and noise-free".into()));
    }
    let games = all_pairings(tb)
        .into_par_iter()
        .map(|(s, agent)| {
            // Unused by a noise-free greedy search; kept for the signature.
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            play_against_perfect(s, agent, tb, |st| {
                let r = search(st, evaluator, reward, params, &mut rng)?;
                select_move(&r.policy, 0.0, &mut rng)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_games(games)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::BoardDims;
    use crate::mcts::UniformEvaluator;
    use crate::nn::HeadKind;
    use crate::rewards::primitive_reward;
    use crate::solver::solve;

    #[test]
    fn perfect_agent_sits_on_the_floor() {
        for (w, h) in [(3, 5), (3, 9), (2, 4)] {
            let tb = solve(BoardDims::new(w, h).unwrap());
            let floor = oracle_floor(&tb).unwrap();
            assert_eq!(floor.games.len(), 2 * w * w);
            assert!(floor.demerits.abs() < 1e-12, "{w}x{h}: {}", floor.demerits);
        }
    }

    #[test]
    fn instant_loser_gets_one_demerit_per_game() {
        // An agent that walks into capture on its first move.
        let d = BoardDims::new(3, 9).unwrap();
        let tb = solve(d);
        let games = all_pairings(&tb)
            .into_iter()
            .map(|(s, agent)| EvalGame {
                start: s,
                agent,
                outcome: Outcome::win(agent.opponent(), 0),
                agent_reward: handtuned_reward(Outcome::win(agent.opponent(), 0), agent, d),
            })
            .collect();
        assert_eq!(EvalReport::from_games(games).unwrap().demerits, 18.0);
    }

    #[test]
    fn untrained_agent_is_above_the_floor() {
        let d = BoardDims::new(3, 5).unwrap();
        let tb = solve(d);
        let stub = UniformEvaluator { head: HeadKind::Value };
        let params = SearchParams {
            visits: 10,
            ..SearchParams::evaluation(d)
        };
        let report = evaluate(&stub, &|o: Outcome, p: Player| primitive_reward(o, p), &tb, &params).unwrap();
        assert!(report.demerits > 0.0);
        for pair in report.games.chunks(2) {
            assert!(pair[0].agent_reward + pair[1].agent_reward <= 1e-12);
        }
        assert_eq!(report.outcome_labels().split(' ').count(), 18);
    }

    #[test]
    fn noisy_parameters_are_rejected() {
        let d = BoardDims::new(3, 5).unwrap();
        let tb = solve(d);
        let stub = UniformEvaluator { head: HeadKind::Value };
        let params = SearchParams::self_play(d);
        assert!(evaluate(&stub, &|o: Outcome, p: Player| primitive_reward(o, p), &tb, &params).is_err());
    }

    #[test]
    fn timeouts_score_zero() {
        let d = BoardDims::new(3, 9).unwrap();
        let g = EvalGame {
            start: starting_positions(d)[0],
            agent: Player::One,
            outcome: Outcome::draw(d),
            agent_reward: handtuned_reward(Outcome::draw(d), Player::One, d),
        };
        assert_eq!(g.agent_reward, 0.0);
    }
}
