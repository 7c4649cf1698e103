//! PUCT search over visit counts, with root Dirichlet noise.
//!
//! Values are stored from the point of view of the player to move at the
//! node that owns the edge, and negated once per ply on the way up.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Mutex;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::Gamma;

use crate::error::{Error, Result};
use crate::game::{BoardDims, GameState, Move, TerminalStatus};
use crate::nn::{head_value, HeadKind, HeadOutput, Network, Prediction, POLICY_OUTPUTS};
use crate::rewards::Reward;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchParams {
    pub visits: usize,
    pub c_puct: f64,
    pub dirichlet_alpha: f64,
    /// Share of the root prior replaced by noise; 0 disables noise.
    pub noise_fraction: f64,
    pub temperature: f64,
}

impl SearchParams {
    pub const C_PUCT: f64 = 1.5;
    pub const DIRICHLET_ALPHA: f64 = 0.5;
    pub const NOISE_FRACTION: f64 = 0.25;

    pub fn default_visits(dims: BoardDims) -> usize {
        20 * dims.height()
    }

    pub fn self_play(dims: BoardDims) -> Self {
        SearchParams {
            visits: Self::default_visits(dims),
            c_puct: Self::C_PUCT,
            dirichlet_alpha: Self::DIRICHLET_ALPHA,
            noise_fraction: Self::NOISE_FRACTION,
            temperature: 1.0,
        }
    }

    /// Greedy and noise-free, for matches against the perfect player.
    pub fn evaluation(dims: BoardDims) -> Self {
        SearchParams {
            noise_fraction: 0.0,
            temperature: 0.0,
            ..Self::self_play(dims)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.visits == 0 {
            return Err(Error::Config("search needs at least one visit".into()));
        }
        if !(self.c_puct.is_finite() && self.c_puct >= 0.0) {
            return Err(Error::Config(format!("c_puct must be >= 0, got {}", self.c_puct)));
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return Err(Error::Config(format!(
                "noise fraction must be in [0, 1], got {}",
                self.noise_fraction
            )));
        }
        if self.noise_fraction > 0.0 && !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
            return Err(Error::Config(format!(
                "Dirichlet alpha must be > 0, got {}",
                self.dirichlet_alpha
            )));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Anything that maps a position to move priors and a head output.
pub trait Evaluator: Sync {
    fn evaluate(&self, state: &GameState) -> Prediction;
}

impl Evaluator for Network {
    fn evaluate(&self, state: &GameState) -> Prediction {
        self.predict(state)
    }
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn evaluate(&self, state: &GameState) -> Prediction {
        (**self).evaluate(state)
    }
}

/// Uniform priors and a neutral head; stands in for an untrained network.
#[derive(Clone, Copy, Debug)]
pub struct UniformEvaluator {
    pub head: HeadKind,
}

impl Evaluator for UniformEvaluator {
    fn evaluate(&self, _state: &GameState) -> Prediction {
        let head = match self.head {
            HeadKind::Value => HeadOutput::Value(0.0),
            HeadKind::Outcome => HeadOutput::Outcome(crate::nn::OutcomeHeadOutput {
                wdl: [0.0; 3],
                plies_left_win: 0.0,
                plies_left_loss: 0.0,
            }),
        };
        Prediction {
            policy: [1.0 / POLICY_OUTPUTS as f64; POLICY_OUTPUTS],
            head,
        }
    }
}

/// Memoizes a frozen evaluator. Only valid while the wrapped weights do not
/// change, i.e. within one generation.
pub struct CachedEvaluator<E> {
    inner: E,
    cache: Mutex<HashMap<GameState, Prediction>>,
}

impl<E: Evaluator> CachedEvaluator<E> {
    pub fn new(inner: E) -> Self {
        CachedEvaluator {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Evaluator> Evaluator for CachedEvaluator<E> {
    fn evaluate(&self, state: &GameState) -> Prediction {
        if let Some(p) = self.cache.lock().expect("cache lock").get(state) {
            return *p;
        }
        let p = self.inner.evaluate(state);
        self.cache.lock().expect("cache lock").insert(*state, p);
        p
    }
}

const NO_CHILD: u32 = u32::MAX;

struct Node {
    state: GameState,
    status: TerminalStatus,
    legal: [bool; POLICY_OUTPUTS],
    prior: [f64; POLICY_OUTPUTS],
    visits: [u32; POLICY_OUTPUTS],
    value_sum: [f64; POLICY_OUTPUTS],
    children: [u32; POLICY_OUTPUTS],
}

impl Node {
    fn new(state: GameState, status: TerminalStatus) -> Self {
        Node {
            state,
            status,
            legal: [false; POLICY_OUTPUTS],
            prior: [0.0; POLICY_OUTPUTS],
            visits: [0; POLICY_OUTPUTS],
            value_sum: [0.0; POLICY_OUTPUTS],
            children: [NO_CHILD; POLICY_OUTPUTS],
        }
    }

    fn select(&self, c_puct: f64) -> usize {
        let total: u32 = self.visits.iter().sum();
        let sqrt_parent = ((1 + total) as f64).sqrt();
        let mut best = usize::MAX;
        let mut best_score = f64::NEG_INFINITY;
        for a in 0..POLICY_OUTPUTS {
            if !self.legal[a] {
                continue;
            }
            let n = self.visits[a];
            let q = if n > 0 { self.value_sum[a] / n as f64 } else { 0.0 };
            let score = q + c_puct * self.prior[a] * sqrt_parent / (1 + n) as f64;
            if score > best_score {
                best_score = score;
                best = a;
            }
        }
        best
    }
}

/// Priors restricted to legal moves; uniform if the policy puts no mass there.
fn masked_priors(policy: &[f64; POLICY_OUTPUTS], legal: &[bool; POLICY_OUTPUTS]) -> [f64; POLICY_OUTPUTS] {
    let mut p = [0.0; POLICY_OUTPUTS];
    let mut sum = 0.0;
    for a in 0..POLICY_OUTPUTS {
        if legal[a] && policy[a].is_finite() && policy[a] > 0.0 {
            p[a] = policy[a];
            sum += p[a];
        }
    }
    if sum > 0.0 {
        p.iter_mut().for_each(|x| *x /= sum);
    } else {
        let k = legal.iter().filter(|&&l| l).count() as f64;
        for a in 0..POLICY_OUTPUTS {
            p[a] = if legal[a] { 1.0 / k } else { 0.0 };
        }
    }
    p
}

/// Root statistics of one search.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    /// Edge visit counts at the root, by direction index.
    pub visits: [u32; POLICY_OUTPUTS],
    /// Visit counts normalized to sum to 1.
    pub policy: [f64; POLICY_OUTPUTS],
    /// Root priors after noise.
    pub priors: [f64; POLICY_OUTPUTS],
    /// Mean backed-up value per root edge (0 where unvisited).
    pub q: [f64; POLICY_OUTPUTS],
    /// Simulations run, the root expansion included.
    pub simulations: usize,
    /// Simulations that ended on a finished game.
    pub terminal_leaves: usize,
    /// Largest |value| assigned to a finished game during the search.
    pub max_abs_terminal_value: f64,
}

impl SearchResult {
    /// One line per legal root move: direction, prior, visits, mean value.
    pub fn trace(&self) -> String {
        let mut out = String::new();
        for (a, mv) in Move::ALL.iter().enumerate() {
            if self.priors[a] > 0.0 || self.visits[a] > 0 {
                let _ = writeln!(
                    out,
                    "{mv} prior={:.4} N={} Q={:+.4}",
                    self.priors[a], self.visits[a], self.q[a]
                );
            }
        }
        out
    }
}

/// Runs `params.visits` simulations from `root`. The first simulation
/// expands the root; each later one adds at most one node.
pub fn search<E, R, G>(
    root: &GameState,
    evaluator: &E,
    reward: &R,
    params: &SearchParams,
    rng: &mut G,
) -> Result<SearchResult>
where
    E: Evaluator + ?Sized,
    R: Reward + ?Sized,
    G: Rng + ?Sized,
{
    params.validate()?;
    let status = root.status();
    if status.is_terminal() {
        return Err(Error::contract(format!("search from finished position {root}")));
    }
    let mut nodes = vec![Node::new(*root, status)];
    let root_prediction = evaluator.evaluate(root);
    nodes[0].legal = root.legal_mask();
    nodes[0].prior = masked_priors(&root_prediction.policy, &nodes[0].legal);
    if params.noise_fraction > 0.0 {
        let gamma =
            Gamma::new(params.dirichlet_alpha, 1.0).map_err(|e| Error::Config(format!("Dirichlet alpha: {e}")))?;
        let mut noise = [0.0; POLICY_OUTPUTS];
        let mut sum = 0.0;
        for a in 0..POLICY_OUTPUTS {
            if nodes[0].legal[a] {
                noise[a] = gamma.sample(rng);
                sum += noise[a];
            }
        }
        if sum > 0.0 {
            let f = params.noise_fraction;
            for a in 0..POLICY_OUTPUTS {
                nodes[0].prior[a] = (1.0 - f) * nodes[0].prior[a] + f * noise[a] / sum;
            }
        }
    }

    let mut terminal_leaves = 0;
    let mut max_abs_terminal_value: f64 = 0.0;
    let mut path: Vec<(usize, usize)> = Vec::new();
    for _ in 1..params.visits {
        path.clear();
        let mut node = 0usize;
        // Value of the leaf for its own side to move.
        let value = loop {
            let a = nodes[node].select(params.c_puct);
            path.push((node, a));
            let child = nodes[node].children[a];
            if child != NO_CHILD {
                let c = child as usize;
                if let Some(outcome) = nodes[c].status.outcome() {
                    let v = reward.reward(outcome, nodes[c].state.to_move());
                    terminal_leaves += 1;
                    max_abs_terminal_value = max_abs_terminal_value.max(v.abs());
                    break v;
                }
                node = c;
                continue;
            }
            let (state, status) = nodes[node].state.apply_move(Move::ALL[a])?;
            let mut fresh = Node::new(state, status);
            let v = if let Some(outcome) = status.outcome() {
                let v = reward.reward(outcome, state.to_move());
                terminal_leaves += 1;
                max_abs_terminal_value = max_abs_terminal_value.max(v.abs());
                v
            } else {
                let prediction = evaluator.evaluate(&state);
                fresh.legal = state.legal_mask();
                fresh.prior = masked_priors(&prediction.policy, &fresh.legal);
                head_value(&prediction.head, &state, reward)
            };
            nodes[node].children[a] = nodes.len() as u32;
            nodes.push(fresh);
            break v;
        };
        let mut v = value;
        for &(n, a) in path.iter().rev() {
            v = -v;
            nodes[n].visits[a] += 1;
            nodes[n].value_sum[a] += v;
        }
    }

    let root = &nodes[0];
    let total: u32 = root.visits.iter().sum();
    let mut policy = [0.0; POLICY_OUTPUTS];
    let mut q = [0.0; POLICY_OUTPUTS];
    for a in 0..POLICY_OUTPUTS {
        if root.visits[a] > 0 {
            q[a] = root.value_sum[a] / root.visits[a] as f64;
        }
        policy[a] = if total > 0 {
            root.visits[a] as f64 / total as f64
        } else {
            root.prior[a]
        };
    }
    Ok(SearchResult {
        visits: root.visits,
        policy,
        priors: root.prior,
        q,
        simulations: params.visits,
        terminal_leaves,
        max_abs_terminal_value,
    })
}

/// Picks a direction from a visit distribution: argmax at temperature 0
/// (earliest direction on ties), otherwise sampled in proportion to
/// `weight^(1/temperature)`.
pub fn select_move<G: Rng + ?Sized>(
    distribution: &[f64; POLICY_OUTPUTS],
    temperature: f64,
    rng: &mut G,
) -> Result<Move> {
    if distribution.iter().any(|p| !p.is_finite() || *p < 0.0) || distribution.iter().all(|&p| p == 0.0) {
        return Err(Error::contract(format!(
            "cannot select from distribution {distribution:?}"
        )));
    }
    if temperature == 0.0 {
        let mut best = 0;
        for a in 1..POLICY_OUTPUTS {
            if distribution[a] > distribution[best] {
                best = a;
            }
        }
        return Ok(Move::ALL[best]);
    }
    let max = distribution.iter().copied().fold(0.0, f64::max);
    let weights: Vec<f64> = distribution
        .iter()
        .map(|&p| (p / max).powf(1.0 / temperature))
        .collect();
    let index = WeightedIndex::new(&weights)
        .map_err(|e| Error::contract(format!("bad move weights {weights:?}: {e}")))?
        .sample(rng);
    Ok(Move::ALL[index])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{starting_positions, Player};
    use crate::rewards::{handtuned_reward, primitive_reward, Outcome};
    use crate::solver::{solve, SolvedEntry};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const STUB: UniformEvaluator = UniformEvaluator { head: HeadKind::Value };

    fn primitive(o: Outcome, p: Player) -> f64 {
        primitive_reward(o, p)
    }

    #[test]
    fn conserves_visits() {
        let d = BoardDims::new(3, 5).unwrap();
        let params = SearchParams::self_play(d);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = search(&starting_positions(d)[3], &STUB, &primitive, &params, &mut rng).unwrap();
        assert_eq!(r.visits.iter().sum::<u32>() as usize, params.visits - 1);
        assert!((r.policy.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(r.q.iter().all(|q| (-1.0..=1.0).contains(q)));
        let legal = starting_positions(d)[3].legal_mask();
        for a in 0..POLICY_OUTPUTS {
            if !legal[a] {
                assert_eq!(r.visits[a], 0);
            }
        }
    }

    #[test]
    fn finished_root_is_a_contract_error() {
        let s: GameState = "3,5/1,4/0,3/2/5".parse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = SearchParams::evaluation(s.dims());
        assert!(matches!(
            search(&s, &STUB, &primitive, &params, &mut rng),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn winning_capture_gets_a_majority() {
        // Black to move can capture White diagonally.
        let s: GameState = "3,9/1,4/2,5/2/6".parse().unwrap();
        let mv = Move { df: -1, dr: -1 };
        assert!(s.is_immediate_win(mv));
        let params = SearchParams::evaluation(s.dims());
        let r = search(&s, &STUB, &primitive, &params, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let total: u32 = r.visits.iter().sum();
        assert!(2 * r.visits[mv.index()] > total, "{}", r.trace());
    }

    #[test]
    fn noiseless_search_is_deterministic() {
        let d = BoardDims::new(3, 5).unwrap();
        let params = SearchParams::evaluation(d);
        let s = starting_positions(d)[5];
        let a = search(&s, &STUB, &primitive, &params, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = search(&s, &STUB, &primitive, &params, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_changes_with_seed_but_not_on_replay() {
        let d = BoardDims::new(3, 5).unwrap();
        let params = SearchParams::self_play(d);
        let s = starting_positions(d)[5];
        let run = |seed| search(&s, &STUB, &primitive, &params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(run(7), run(7));
        assert_ne!(run(7).priors, run(8).priors);
    }

    #[test]
    fn greedy_search_plays_every_mate_in_one() {
        let d = BoardDims::new(3, 5).unwrap();
        let tb = solve(d);
        let params = SearchParams::evaluation(d);
        let hand = |o: Outcome, p: Player| handtuned_reward(o, p, d);
        let mut checked = 0;
        for (state, entry) in tb.entries() {
            if entry != SolvedEntry::win(1) {
                continue;
            }
            let r = search(&state, &STUB, &hand, &params, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            let chosen = select_move(&r.policy, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            assert_eq!(chosen, tb.perfect_move(&state).unwrap(), "{state}\n{}", r.trace());
            checked += 1;
        }
        assert!(checked > 20);
    }

    #[test]
    fn mirrored_position_mirrors_visits() {
        // Exact ties go to the earlier direction, which mirroring reverses,
        // so the two trees drift apart slightly; compare distributions.
        let d = BoardDims::new(3, 5).unwrap();
        let params = SearchParams::evaluation(d);
        let mut worst: f64 = 0.0;
        for s in starting_positions(d) {
            let a = search(&s, &STUB, &primitive, &params, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            let b = search(
                &s.mirrored(),
                &STUB,
                &primitive,
                &params,
                &mut ChaCha8Rng::seed_from_u64(0),
            )
            .unwrap();
            let tv: f64 = Move::ALL
                .iter()
                .map(|mv| (a.policy[mv.index()] - b.policy[mv.mirrored().index()]).abs())
                .sum::<f64>()
                / 2.0;
            worst = worst.max(tv);
        }
        assert!(worst <= 0.1, "total variation {worst}");
    }

    #[test]
    fn select_move_argmax_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut d = [0.0; POLICY_OUTPUTS];
        d[2] = 10.0;
        d[4] = 5.0;
        d[6] = 1.0;
        assert_eq!(select_move(&d, 0.0, &mut rng).unwrap(), Move::ALL[2]);
        d[6] = 10.0;
        assert_eq!(select_move(&d, 0.0, &mut rng).unwrap(), Move::ALL[2]);
        assert!(select_move(&[0.0; POLICY_OUTPUTS], 1.0, &mut rng).is_err());
    }

    #[test]
    fn sampling_follows_counts() {
        // Pearson chi-squared against the normalized counts; 3 degrees of
        // freedom, critical value 16.27 at p = 0.001.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut d = [0.0; POLICY_OUTPUTS];
        d[0] = 10.0;
        d[3] = 5.0;
        d[5] = 3.0;
        d[7] = 2.0;
        let draws = 10_000;
        let mut seen = [0usize; POLICY_OUTPUTS];
        for _ in 0..draws {
            seen[select_move(&d, 1.0, &mut rng).unwrap().index()] += 1;
        }
        let total: f64 = d.iter().sum();
        let chi2: f64 = (0..POLICY_OUTPUTS)
            .filter(|&a| d[a] > 0.0)
            .map(|a| {
                let e = draws as f64 * d[a] / total;
                (seen[a] as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < 16.27, "chi2 = {chi2}");
        assert_eq!(seen[1] + seen[2] + seen[4] + seen[6], 0);
    }

    #[test]
    fn uniform_counts_sample_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = [4.0; POLICY_OUTPUTS];
        let mut seen = [0usize; POLICY_OUTPUTS];
        for _ in 0..8000 {
            seen[select_move(&d, 1.0, &mut rng).unwrap().index()] += 1;
        }
        // 7 degrees of freedom, p = 0.001.
        let chi2: f64 = seen.iter().map(|&s| (s as f64 - 1000.0).powi(2) / 1000.0).sum();
        assert!(chi2 < 24.32, "chi2 = {chi2}");
    }

    #[test]
    fn cache_returns_inner_predictions() {
        let d = BoardDims::new(3, 5).unwrap();
        let net = Network::new(
            crate::nn::NetworkConfig {
                dims: d,
                head: HeadKind::Outcome,
            },
            1,
        );
        let cached = CachedEvaluator::new(&net);
        let s = starting_positions(d)[0];
        assert_eq!(cached.evaluate(&s), net.predict(&s));
        assert_eq!(cached.evaluate(&s), net.predict(&s));
        assert_eq!(cached.len(), 1);
    }

    #[test]
    fn order_preserving_reward_swap_keeps_greedy_choice() {
        // Primitive and hand-tuned rewards order every outcome the same way
        // on these mate-in-one positions; the greedy move agrees.
        let d = BoardDims::new(3, 5).unwrap();
        let params = SearchParams::evaluation(d);
        let hand = |o: Outcome, p: Player| handtuned_reward(o, p, d);
        for text in ["3,5/1,2/1,3/1/4", "3,5/0,3/2,1/1/6", "3,5/1,1/2,2/2/3"] {
            let s: GameState = text.parse().unwrap();
            let a = search(&s, &STUB, &primitive, &params, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            let b = search(&s, &STUB, &hand, &params, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            assert_eq!(
                select_move(&a.policy, 0.0, &mut rng).unwrap(),
                select_move(&b.policy, 0.0, &mut rng).unwrap(),
                "{text}"
            );
        }
    }
}
