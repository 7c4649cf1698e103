//! Game outcomes, their total order, and the four reward functions.
//!
//! All rewards use the zero-sum `[-1, +1]` scale. The rank-based rewards
//! ([`cdf_reward`], [`cdf_bonus_reward`]) read a sliding [`OutcomeWindow`]
//! stored from Player One's point of view; Player Two's rewards are computed
//! from the same counts read in reverse order.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::game::{BoardDims, Player};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GameResult {
    WinP1,
    WinP2,
    Draw,
}

/// Result of a finished game relative to one player.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relative {
    Win,
    Draw,
    Loss,
}

/// A finished game: who won and after how many plies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Outcome {
    pub result: GameResult,
    pub plies: u16,
}

impl Outcome {
    pub fn new(result: GameResult, plies: u16) -> Self {
        Outcome { result, plies }
    }

    pub fn win(winner: Player, plies: u16) -> Self {
        let result = match winner {
            Player::One => GameResult::WinP1,
            Player::Two => GameResult::WinP2,
        };
        Outcome { result, plies }
    }

    pub fn draw(dims: BoardDims) -> Self {
        Outcome {
            result: GameResult::Draw,
            plies: dims.timeout(),
        }
    }

    pub fn winner(&self) -> Option<Player> {
        match self.result {
            GameResult::WinP1 => Some(Player::One),
            GameResult::WinP2 => Some(Player::Two),
            GameResult::Draw => None,
        }
    }

    pub fn relative_to(&self, player: Player) -> Relative {
        match self.winner() {
            None => Relative::Draw,
            Some(w) if w == player => Relative::Win,
            Some(_) => Relative::Loss,
        }
    }

    /// Comparison in `player`'s preference order.
    pub fn cmp_for(&self, other: &Outcome, player: Player, dims: BoardDims) -> std::cmp::Ordering {
        let lattice = OutcomeLattice::new(dims);
        lattice.index_for(*self, player).cmp(&lattice.index_for(*other, player))
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.result {
            GameResult::WinP1 => write!(f, "p1-win-{}", self.plies),
            GameResult::WinP2 => write!(f, "p2-win-{}", self.plies),
            GameResult::Draw => write!(f, "draw-{}", self.plies),
        }
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, plies) = s
            .rsplit_once('-')
            .ok_or_else(|| Error::parse("outcome", s, "expected <kind>-<plies>"))?;
        let plies = plies
            .parse()
            .map_err(|_| Error::parse("outcome", s, "plies is not an integer"))?;
        let result = match kind {
            "p1-win" => GameResult::WinP1,
            "p2-win" => GameResult::WinP2,
            "draw" => GameResult::Draw,
            _ => return Err(Error::parse("outcome", s, "unknown result")),
        };
        Ok(Outcome { result, plies })
    }
}

/// Every outcome possible on a board, as equally spaced points.
///
/// Player One's order runs from `p2-win-1` (index 0) through `p2-win-T`,
/// then the draw (index `T`), then `p1-win-T` down to `p1-win-1`
/// (index `2T`), where `T` is the timeout. Player Two's order is the reverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutcomeLattice {
    timeout: u16,
}

impl OutcomeLattice {
    pub fn new(dims: BoardDims) -> Self {
        OutcomeLattice {
            timeout: dims.timeout(),
        }
    }

    pub fn len(&self) -> usize {
        2 * self.timeout as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the draw, which splits losses from wins in either order.
    pub fn draw_index(&self) -> usize {
        self.timeout as usize
    }

    pub fn index(&self, o: Outcome) -> usize {
        let t = self.timeout as usize;
        let p = (o.plies as usize).clamp(1, t);
        match o.result {
            GameResult::WinP2 => p - 1,
            GameResult::Draw => t,
            GameResult::WinP1 => 2 * t + 1 - p,
        }
    }

    pub fn index_for(&self, o: Outcome, player: Player) -> usize {
        self.to_player(self.index(o), player)
    }

    /// Converts between Player One's lattice order and `player`'s.
    pub fn to_player(&self, index: usize, player: Player) -> usize {
        match player {
            Player::One => index,
            Player::Two => self.len() - 1 - index,
        }
    }

    pub fn outcome_at(&self, index: usize) -> Outcome {
        let t = self.timeout as usize;
        assert!(index < self.len(), "lattice index out of range");
        if index < t {
            Outcome::new(GameResult::WinP2, (index + 1) as u16)
        } else if index == t {
            Outcome::new(GameResult::Draw, self.timeout)
        } else {
            Outcome::new(GameResult::WinP1, (2 * t + 1 - index) as u16)
        }
    }

    pub fn outcomes(&self) -> impl Iterator<Item = Outcome> + '_ {
        (0..self.len()).map(|i| self.outcome_at(i))
    }
}

/// Multiset of recent self-play outcomes, kept as counts on the lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeWindow {
    dims: BoardDims,
    counts: Vec<u32>,
    total: usize,
}

impl OutcomeWindow {
    pub fn empty(dims: BoardDims) -> Self {
        OutcomeWindow {
            dims,
            counts: vec![0; OutcomeLattice::new(dims).len()],
            total: 0,
        }
    }

    pub fn from_outcomes<'a>(dims: BoardDims, outcomes: impl IntoIterator<Item = &'a Outcome>) -> Self {
        let mut window = Self::empty(dims);
        let lattice = OutcomeLattice::new(dims);
        for &o in outcomes {
            window.counts[lattice.index(o)] += 1;
            window.total += 1;
        }
        window
    }

    pub fn dims(&self) -> BoardDims {
        self.dims
    }

    pub fn lattice(&self) -> OutcomeLattice {
        OutcomeLattice::new(self.dims)
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn count(&self, o: Outcome) -> u32 {
        self.counts[self.lattice().index(o)]
    }

    /// Counts in Player One's lattice order.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Counts re-indexed into `player`'s order (worst first).
    fn counts_for(&self, player: Player) -> Vec<u32> {
        match player {
            Player::One => self.counts.clone(),
            Player::Two => self.counts.iter().rev().copied().collect(),
        }
    }
}

pub fn primitive_reward(o: Outcome, player: Player) -> f64 {
    match o.relative_to(player) {
        Relative::Win => 1.0,
        Relative::Draw => 0.0,
        Relative::Loss => -1.0,
    }
}

/// Linear from `+1` (win in zero plies) to `0` at the timeout; negated for the loser.
pub fn handtuned_reward(o: Outcome, player: Player, dims: BoardDims) -> f64 {
    let magnitude = 1.0 - o.plies as f64 / dims.timeout() as f64;
    match o.relative_to(player) {
        Relative::Win => magnitude,
        Relative::Draw => 0.0,
        Relative::Loss => -magnitude,
    }
}

/// Linear interpolation on the lattice through `anchors` (sorted by
/// position), clamped to the end values outside them.
fn interpolate(anchors: &[(usize, f64)], q: usize) -> f64 {
    debug_assert!(!anchors.is_empty());
    let upper = anchors.partition_point(|&(pos, _)| pos < q);
    if upper < anchors.len() && anchors[upper].0 == q {
        return anchors[upper].1;
    }
    if upper == 0 {
        return anchors[0].1;
    }
    if upper == anchors.len() {
        return anchors[anchors.len() - 1].1;
    }
    let (lo, r_lo) = anchors[upper - 1];
    let (hi, r_hi) = anchors[upper];
    r_lo + (r_hi - r_lo) * (q - lo) as f64 / (hi - lo) as f64
}

/// `2f - 1`, where `f` is the share of window outcomes worse for `player`
/// than `o`, counting equal outcomes (including `o`'s own game) as half.
/// Outcomes missing from the window are interpolated on the lattice between
/// the nearest recorded outcomes; an empty window gives 0.
pub fn cdf_reward(window: &OutcomeWindow, o: Outcome, player: Player) -> f64 {
    if window.is_empty() {
        return 0.0;
    }
    let counts = window.counts_for(player);
    let n = window.len() as f64;
    let q = window.lattice().index_for(o, player);
    let mut anchors = Vec::new();
    let mut below = 0u64;
    for (pos, &c) in counts.iter().enumerate() {
        if c > 0 {
            let f = (below as f64 + 0.5 * c as f64) / n;
            anchors.push((pos, 2.0 * f - 1.0));
            below += c as u64;
        }
    }
    interpolate(&anchors, q)
}

/// Rank reward with a winning bonus: the mean score of virtual two-game
/// matches of `o` against every decisive game in the window, where a sweep
/// scores `±1`, a match decided on game length scores `±alpha`, and equal
/// outcomes (including `o`'s own game) score 0.
///
/// With `L` losses and `W` wins for `player` in the window and `i` the
/// midrank position of `o` among them:
///
/// * loss: `-1 + (L - alpha L + 2 alpha i) / (L + W)`
/// * win: `1 - (W - alpha W + 2 alpha (L + W - i)) / (L + W)`
/// * draw: `(1 + alpha)(L - W) / (2 (L + W))`
///
/// Draws in the window are ignored. For an outcome missing from the window,
/// `i` is interpolated on the lattice between recorded outcomes of the same
/// result, with the draw point anchored at `i = L`.
pub fn cdf_bonus_reward(window: &OutcomeWindow, o: Outcome, player: Player, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("bonus alpha {alpha} outside [0, 1]")));
    }
    let lattice = window.lattice();
    let draw = lattice.draw_index();
    let counts = window.counts_for(player);
    let losses: u64 = counts[..draw].iter().map(|&c| c as u64).sum();
    let wins: u64 = counts[draw + 1..].iter().map(|&c| c as u64).sum();
    let n = losses + wins;
    if n == 0 {
        return Err(Error::DegenerateWindow { decisive: 0 });
    }
    let (l, w, n) = (losses as f64, wins as f64, n as f64);
    let q = lattice.index_for(o, player);
    let position = |range: std::ops::Range<usize>, start: u64| -> f64 {
        let mut anchors = Vec::new();
        let mut below = start;
        for pos in range.clone() {
            let c = counts[pos];
            if c > 0 {
                anchors.push((pos, below as f64 + 0.5 * c as f64));
                below += c as u64;
            }
        }
        let draw_anchor = (draw, l);
        if range.start > draw {
            anchors.insert(0, draw_anchor);
        } else {
            anchors.push(draw_anchor);
        }
        interpolate(&anchors, q)
    };
    Ok(match o.relative_to(player) {
        Relative::Draw => (1.0 + alpha) * (l - w) / (2.0 * n),
        Relative::Loss => {
            let i = position(0..draw, 0);
            -1.0 + (l - alpha * l + 2.0 * alpha * i) / n
        }
        Relative::Win => {
            let i = position(draw + 1..lattice.len(), losses);
            1.0 - (w - alpha * w + 2.0 * alpha * (n - i)) / n
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RewardKind {
    Primitive,
    HandTuned,
    Cdf,
    CdfBonus { alpha: f64 },
}

impl RewardKind {
    /// Whether the outcome-to-reward mapping moves with the outcome window.
    pub fn is_rank_based(&self) -> bool {
        matches!(self, RewardKind::Cdf | RewardKind::CdfBonus { .. })
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardKind::Primitive => f.write_str("primitive"),
            RewardKind::HandTuned => f.write_str("handtuned"),
            RewardKind::Cdf => f.write_str("cdf"),
            RewardKind::CdfBonus { .. } => f.write_str("cdf-bonus"),
        }
    }
}

impl FromStr for RewardKind {
    type Err = Error;

    /// Parses `primitive`, `handtuned`, `cdf` or `cdf-bonus`; the bonus
    /// defaults to `alpha = 0.5` unless written `cdf-bonus:<alpha>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "primitive" => Ok(RewardKind::Primitive),
            "handtuned" | "hand-tuned" => Ok(RewardKind::HandTuned),
            "cdf" => Ok(RewardKind::Cdf),
            "cdf-bonus" => Ok(RewardKind::CdfBonus { alpha: 0.5 }),
            _ => {
                let alpha = s
                    .strip_prefix("cdf-bonus:")
                    .ok_or_else(|| Error::parse("reward kind", s, "unknown reward"))?;
                let alpha: f64 = alpha
                    .parse()
                    .map_err(|_| Error::parse("reward kind", s, "alpha is not a number"))?;
                Ok(RewardKind::CdfBonus { alpha })
            }
        }
    }
}

/// Anything mapping a finished game to a reward for one player.
pub trait Reward: Sync {
    fn reward(&self, outcome: Outcome, player: Player) -> f64;
}

impl<F> Reward for F
where
    F: Fn(Outcome, Player) -> f64 + Sync,
{
    fn reward(&self, outcome: Outcome, player: Player) -> f64 {
        self(outcome, player)
    }
}

/// A reward function frozen against one window, tabulated over the lattice.
#[derive(Clone, Debug)]
pub struct RewardFunction {
    kind: RewardKind,
    lattice: OutcomeLattice,
    table: [Vec<f64>; 2],
}

impl RewardFunction {
    /// A bonus reward over a window with no decisive games is constant 0,
    /// like the plain rank reward before any games are recorded.
    pub fn new(kind: RewardKind, window: &OutcomeWindow) -> Result<Self> {
        let dims = window.dims();
        let lattice = window.lattice();
        let mut table = [vec![0.0; lattice.len()], vec![0.0; lattice.len()]];
        if let RewardKind::CdfBonus { alpha } = kind {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Config(format!("bonus alpha {alpha} outside [0, 1]")));
            }
        }
        for player in [Player::One, Player::Two] {
            for (slot, o) in table[player.index()].iter_mut().zip(lattice.outcomes()) {
                *slot = match kind {
                    RewardKind::Primitive => primitive_reward(o, player),
                    RewardKind::HandTuned => handtuned_reward(o, player, dims),
                    RewardKind::Cdf => cdf_reward(window, o, player),
                    RewardKind::CdfBonus { alpha } => match cdf_bonus_reward(window, o, player, alpha) {
                        Err(Error::DegenerateWindow { .. }) => 0.0,
                        other => other?,
                    },
                };
            }
        }
        Ok(RewardFunction { kind, lattice, table })
    }

    /// Fixed rewards that ignore any window.
    pub fn fixed(kind: RewardKind, dims: BoardDims) -> Result<Self> {
        if kind.is_rank_based() {
            return Err(Error::Config(format!("{kind} reward needs an outcome window")));
        }
        Self::new(kind, &OutcomeWindow::empty(dims))
    }

    pub fn kind(&self) -> RewardKind {
        self.kind
    }

    /// Player One's reward at every lattice point.
    pub fn p1_table(&self) -> &[f64] {
        &self.table[0]
    }
}

impl Reward for RewardFunction {
    fn reward(&self, outcome: Outcome, player: Player) -> f64 {
        self.table[player.index()][self.lattice.index(outcome)]
    }
}

/// Writes one row per lattice outcome: `index,outcome,count,p1_reward`.
pub fn write_cdf_csv<W: Write>(out: &mut W, window: &OutcomeWindow) -> std::io::Result<()> {
    let reward = RewardFunction::new(RewardKind::Cdf, window).expect("plain rank reward always tabulates");
    writeln!(out, "index,outcome,count,p1_reward")?;
    for (i, o) in window.lattice().outcomes().enumerate() {
        writeln!(out, "{i},{o},{},{}", window.counts()[i], reward.p1_table()[i])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims9() -> BoardDims {
        BoardDims::new(3, 9).unwrap()
    }

    fn w1(p: u16) -> Outcome {
        Outcome::new(GameResult::WinP1, p)
    }

    fn w2(p: u16) -> Outcome {
        Outcome::new(GameResult::WinP2, p)
    }

    /// Brute-force rank reward: compares `o` with every window game.
    fn pairwise_cdf(outcomes: &[Outcome], o: Outcome, player: Player, dims: BoardDims) -> f64 {
        let lattice = OutcomeLattice::new(dims);
        let q = lattice.index_for(o, player);
        let score: f64 = outcomes
            .iter()
            .map(|&x| {
                let k = lattice.index_for(x, player);
                if q > k {
                    1.0
                } else if q == k {
                    0.5
                } else {
                    0.0
                }
            })
            .sum();
        2.0 * score / outcomes.len() as f64 - 1.0
    }

    #[test]
    fn lattice_is_strictly_ordered_and_complete() {
        let d = BoardDims::new(2, 3).unwrap();
        let lattice = OutcomeLattice::new(d);
        assert_eq!(lattice.len(), 121);
        assert_eq!(lattice.outcome_at(0), w2(1));
        assert_eq!(lattice.outcome_at(60), Outcome::draw(d));
        assert_eq!(lattice.outcome_at(120), w1(1));
        for (i, o) in lattice.outcomes().enumerate() {
            assert_eq!(lattice.index(o), i);
        }
        assert!(w1(3).cmp_for(&w1(5), Player::One, d).is_gt());
        assert!(w2(3).cmp_for(&w2(5), Player::One, d).is_lt());
        assert!(w2(3).cmp_for(&w2(5), Player::Two, d).is_gt());
        assert!(Outcome::draw(d).cmp_for(&w2(59), Player::One, d).is_gt());
    }

    #[test]
    fn primitive_values() {
        assert_eq!(primitive_reward(w1(7), Player::One), 1.0);
        assert_eq!(primitive_reward(w1(7), Player::Two), -1.0);
        assert_eq!(primitive_reward(Outcome::draw(dims9()), Player::Two), 0.0);
    }

    #[test]
    fn handtuned_values() {
        let d = dims9();
        assert_eq!(handtuned_reward(Outcome::draw(d), Player::One, d), 0.0);
        assert_eq!(handtuned_reward(w1(0), Player::One, d), 1.0);
        assert_eq!(handtuned_reward(w1(90), Player::One, d), 0.5);
        assert_eq!(handtuned_reward(w1(90), Player::Two, d), -0.5);
    }

    #[test]
    fn cdf_empty_window_is_constant() {
        let window = OutcomeWindow::empty(dims9());
        for o in [w1(3), w2(40), Outcome::draw(dims9())] {
            assert_eq!(cdf_reward(&window, o, Player::One), 0.0);
            assert_eq!(cdf_reward(&window, o, Player::Two), 0.0);
        }
    }

    #[test]
    fn cdf_midrank_example() {
        let d = dims9();
        let outcomes = [w1(5), w1(9), w2(6)];
        let window = OutcomeWindow::from_outcomes(d, &outcomes);
        let r = cdf_reward(&window, w1(5), Player::One);
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
        assert!((r - pairwise_cdf(&outcomes, w1(5), Player::One, d)).abs() < 1e-12);
    }

    #[test]
    fn cdf_interpolates_absent_outcomes() {
        let d = dims9();
        let window = OutcomeWindow::from_outcomes(d, &[w1(5), w1(9), w2(6)]);
        let lattice = OutcomeLattice::new(d);
        let r9 = cdf_reward(&window, w1(9), Player::One);
        let r5 = cdf_reward(&window, w1(5), Player::One);
        let r7 = cdf_reward(&window, w1(7), Player::One);
        // Oracle: walk the explicit lattice between the two recorded points.
        let (i9, i7, i5) = (lattice.index(w1(9)), lattice.index(w1(7)), lattice.index(w1(5)));
        let expected = r9 + (r5 - r9) * (i7 - i9) as f64 / (i5 - i9) as f64;
        assert!((r7 - expected).abs() < 1e-12);
        assert!(r9 < r7 && r7 < r5);
        // Constant beyond the extremes.
        assert_eq!(cdf_reward(&window, w1(1), Player::One), r5);
        assert_eq!(
            cdf_reward(&window, w2(1), Player::One),
            cdf_reward(&window, w2(6), Player::One)
        );
    }

    #[test]
    fn bonus_draw_is_zero_for_balanced_window() {
        let d = dims9();
        let window = OutcomeWindow::from_outcomes(d, &[w1(5), w1(9), w2(6), w2(12)]);
        for alpha in [0.0, 0.3, 1.0] {
            for p in [Player::One, Player::Two] {
                let r = cdf_bonus_reward(&window, Outcome::draw(d), p, alpha).unwrap();
                assert_eq!(r, 0.0);
            }
        }
    }

    #[test]
    fn bonus_two_losses_two_wins() {
        // Player One view: losses p2-win-6 < p2-win-12, wins p1-win-9 < p1-win-5.
        let d = dims9();
        let window = OutcomeWindow::from_outcomes(d, &[w1(5), w1(9), w2(6), w2(12)]);
        let r = |o| cdf_bonus_reward(&window, o, Player::One, 0.5).unwrap();
        // Hand evaluation with L = W = 2, alpha = 1/2, midrank positions
        // 0.5, 1.5, 2.5, 3.5.
        assert!((r(w2(6)) - (-1.0 + (2.0 - 1.0 + 0.5) / 4.0)).abs() < 1e-12);
        assert!((r(w2(12)) - (-1.0 + (2.0 - 1.0 + 1.5) / 4.0)).abs() < 1e-12);
        assert!((r(w1(9)) - (1.0 - (2.0 - 1.0 + 1.5) / 4.0)).abs() < 1e-12);
        assert!((r(w1(5)) - (1.0 - (2.0 - 1.0 + 0.5) / 4.0)).abs() < 1e-12);
        // Loss/win gap exceeds the within-result step when alpha < 1.
        let gap = r(w1(9)) - r(w2(12));
        let step = r(w2(12)) - r(w2(6));
        assert!((gap - 0.75).abs() < 1e-12);
        assert!((step - 0.25).abs() < 1e-12);
    }

    #[test]
    fn bonus_errors() {
        let d = dims9();
        let draws = OutcomeWindow::from_outcomes(d, &[Outcome::draw(d)]);
        assert!(matches!(
            cdf_bonus_reward(&draws, w1(3), Player::One, 0.5),
            Err(Error::DegenerateWindow { .. })
        ));
        let ok = OutcomeWindow::from_outcomes(d, &[w1(3)]);
        assert!(cdf_bonus_reward(&ok, w1(3), Player::One, 1.5).is_err());
        // Tabulated form degrades to zero.
        let f = RewardFunction::new(RewardKind::CdfBonus { alpha: 0.5 }, &draws).unwrap();
        assert_eq!(f.reward(w1(3), Player::One), 0.0);
    }

    #[test]
    fn reward_kind_parsing() {
        assert_eq!("cdf".parse::<RewardKind>().unwrap(), RewardKind::Cdf);
        assert_eq!(
            "cdf-bonus:0.25".parse::<RewardKind>().unwrap(),
            RewardKind::CdfBonus { alpha: 0.25 }
        );
        assert!("nope".parse::<RewardKind>().is_err());
        assert_eq!("p2-win-14".parse::<Outcome>().unwrap(), w2(14));
        assert_eq!(w1(3).to_string(), "p1-win-3");
    }

    #[test]
    fn csv_export_has_one_row_per_lattice_point() {
        let d = BoardDims::new(1, 2).unwrap();
        let window = OutcomeWindow::from_outcomes(d, &[w1(1), w1(1), w2(2)]);
        let mut buf = Vec::new();
        write_cdf_csv(&mut buf, &window).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 81);
        assert_eq!(lines[0], "index,outcome,count,p1_reward");
        assert!(lines[81].starts_with("80,p1-win-1,2,"));
    }

    fn arb_outcome(timeout: u16) -> impl Strategy<Value = Outcome> {
        prop_oneof![
            (1..=timeout).prop_map(|p| Outcome::new(GameResult::WinP1, p)),
            (1..=timeout).prop_map(|p| Outcome::new(GameResult::WinP2, p)),
            Just(Outcome::new(GameResult::Draw, timeout)),
        ]
    }

    proptest! {
        #[test]
        fn table_matches_direct_evaluation(
            outcomes in prop::collection::vec(arb_outcome(60), 0..30),
            alpha in 0.0f64..=1.0,
        ) {
            let d = BoardDims::new(2, 3).unwrap();
            let window = OutcomeWindow::from_outcomes(d, &outcomes);
            let cdf = RewardFunction::new(RewardKind::Cdf, &window).unwrap();
            let bonus = RewardFunction::new(RewardKind::CdfBonus { alpha }, &window).unwrap();
            for o in window.lattice().outcomes() {
                for p in [Player::One, Player::Two] {
                    prop_assert_eq!(cdf.reward(o, p), cdf_reward(&window, o, p));
                    let direct = cdf_bonus_reward(&window, o, p, alpha).unwrap_or(0.0);
                    prop_assert_eq!(bonus.reward(o, p), direct);
                }
            }
        }

        #[test]
        fn cdf_matches_pairwise_count_for_recorded_outcomes(
            outcomes in prop::collection::vec(arb_outcome(60), 1..40),
        ) {
            let d = BoardDims::new(2, 3).unwrap();
            let window = OutcomeWindow::from_outcomes(d, &outcomes);
            for &o in &outcomes {
                for p in [Player::One, Player::Two] {
                    let r = cdf_reward(&window, o, p);
                    prop_assert!((r - pairwise_cdf(&outcomes, o, p, d)).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn cdf_ignores_ply_magnitudes(
            plies in prop::collection::vec((0u8..3, 1u16..=20), 1..30),
        ) {
            // Stretch ply counts by a strictly increasing map; recorded rewards must not move.
            let d = BoardDims::new(2, 3).unwrap();
            let make = |(kind, p): (u8, u16), f: &dyn Fn(u16) -> u16| match kind {
                0 => Outcome::new(GameResult::WinP1, f(p)),
                1 => Outcome::new(GameResult::WinP2, f(p)),
                _ => Outcome::draw(d),
            };
            let id = |p: u16| p;
            let stretch = |p: u16| p * 2 + p / 3 + 5;
            let a: Vec<Outcome> = plies.iter().map(|&x| make(x, &id)).collect();
            let b: Vec<Outcome> = plies.iter().map(|&x| make(x, &stretch)).collect();
            let wa = OutcomeWindow::from_outcomes(d, &a);
            let wb = OutcomeWindow::from_outcomes(d, &b);
            for (oa, ob) in a.iter().zip(&b) {
                for p in [Player::One, Player::Two] {
                    prop_assert_eq!(cdf_reward(&wa, *oa, p), cdf_reward(&wb, *ob, p));
                }
            }
        }
    }
}
