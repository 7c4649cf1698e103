//! Retrograde solver for the opposition game.
//!
//! Positions are solved without a ply counter: every `(p1, p2, side)` triple
//! gets a game-theoretic value and, for decisive values, the number of plies
//! to the end under minimax play (the winner hurries, the loser stalls).

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::game::{starting_positions, BoardDims, GameState, Move, Player, Square, TerminalStatus};
use crate::rewards::{Outcome, Relative};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolvedValue {
    WinForMover,
    LossForMover,
    Drawn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SolvedEntry {
    pub value: SolvedValue,
    /// Plies to the end under optimal play; `None` for drawn positions.
    pub distance: Option<u16>,
}

impl SolvedEntry {
    pub const DRAWN: SolvedEntry = SolvedEntry {
        value: SolvedValue::Drawn,
        distance: None,
    };

    pub fn win(d: u16) -> Self {
        SolvedEntry {
            value: SolvedValue::WinForMover,
            distance: Some(d),
        }
    }

    pub fn loss(d: u16) -> Self {
        SolvedEntry {
            value: SolvedValue::LossForMover,
            distance: Some(d),
        }
    }
}

impl fmt::Display for SolvedEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.value, self.distance) {
            (SolvedValue::WinForMover, Some(d)) => write!(f, "win in {d}"),
            (SolvedValue::LossForMover, Some(d)) => write!(f, "loss in {d}"),
            _ => f.write_str("draw"),
        }
    }
}

/// Value of one move for the player making it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MoveValue {
    pub result: Relative,
    /// Plies until the game ends, counting the move itself.
    pub distance: Option<u16>,
}

impl MoveValue {
    /// Larger is better for the mover: fast wins, then draws, then slow losses.
    fn score(&self) -> i64 {
        match (self.result, self.distance) {
            (Relative::Win, Some(d)) => 1_000_000 - d as i64,
            (Relative::Loss, Some(d)) => -1_000_000 + d as i64,
            _ => 0,
        }
    }
}

impl fmt::Display for MoveValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.result, self.distance) {
            (Relative::Win, Some(d)) => write!(f, "wins in {d}"),
            (Relative::Loss, Some(d)) => write!(f, "loses in {d}"),
            _ => f.write_str("draws"),
        }
    }
}

#[derive(Clone, Copy)]
enum Child {
    ImmediateWin,
    Position(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tablebase {
    dims: BoardDims,
    entries: Vec<Option<SolvedEntry>>,
}

impl Tablebase {
    pub fn dims(&self) -> BoardDims {
        self.dims
    }

    fn position_count(dims: BoardDims) -> usize {
        let n = dims.cells();
        2 * n * n
    }

    fn index_of(dims: BoardDims, p1: Square, p2: Square, to_move: Player) -> usize {
        let n = dims.cells();
        (to_move.index() * n + dims.square_index(p1)) * n + dims.square_index(p2)
    }

    fn decode(dims: BoardDims, index: usize) -> (Square, Square, Player) {
        let n = dims.cells();
        let p2 = dims.square_at(index % n);
        let p1 = dims.square_at((index / n) % n);
        let side = Player::from_index(index / (n * n)).expect("index within table");
        (p1, p2, side)
    }

    /// Whether the position is still in play (no capture, no king home).
    fn covers(dims: BoardDims, p1: Square, p2: Square) -> bool {
        p1 != p2 && p1.rank as usize != dims.height() - 1 && p2.rank != 0
    }

    pub fn entry(&self, state: &GameState) -> Option<SolvedEntry> {
        self.entries[Self::index_of(self.dims, state.p1(), state.p2(), state.to_move())]
    }

    pub fn entries(&self) -> impl Iterator<Item = (GameState, SolvedEntry)> + '_ {
        self.entries.iter().enumerate().filter_map(move |(i, e)| {
            e.map(|e| {
                let (p1, p2, side) = Self::decode(self.dims, i);
                let state = GameState::new(self.dims, p1, p2, side, 0).expect("decoded square on board");
                (state, e)
            })
        })
    }

    /// Longest finite distance in the table.
    pub fn max_distance(&self) -> u16 {
        self.entries
            .iter()
            .filter_map(|e| e.and_then(|e| e.distance))
            .max()
            .unwrap_or(0)
    }

    /// Evaluates every legal move of `state` for the side to move.
    pub fn move_values(&self, state: &GameState) -> Result<Vec<(Move, MoveValue)>> {
        let moves = state.legal_moves()?;
        Ok(moves
            .into_iter()
            .map(|mv| {
                let value = if state.is_immediate_win(mv) {
                    MoveValue {
                        result: Relative::Win,
                        distance: Some(1),
                    }
                } else {
                    let (next, _) = state.play_unchecked(mv);
                    let entry = self.entry(&next).expect("non-winning move stays in the table");
                    match entry.value {
                        SolvedValue::WinForMover => MoveValue {
                            result: Relative::Loss,
                            distance: entry.distance.map(|d| d + 1),
                        },
                        SolvedValue::LossForMover => MoveValue {
                            result: Relative::Win,
                            distance: entry.distance.map(|d| d + 1),
                        },
                        SolvedValue::Drawn => MoveValue {
                            result: Relative::Draw,
                            distance: None,
                        },
                    }
                };
                (mv, value)
            })
            .collect())
    }

    /// The perfect player's move: fastest win, else a drawing move, else the
    /// slowest loss. Ties go to the earliest move in direction order.
    pub fn perfect_move(&self, state: &GameState) -> Result<Move> {
        let values = self.move_values(state)?;
        let mut best = values[0];
        for &(mv, value) in &values[1..] {
            if value.score() > best.1.score() {
                best = (mv, value);
            }
        }
        Ok(best.0)
    }

    /// Plays both sides perfectly from `state` until the game ends,
    /// timeout included.
    pub fn oracle_outcome(&self, state: &GameState) -> Result<Outcome> {
        let mut state = *state;
        let mut status = state.status();
        while !status.is_terminal() {
            let mv = self.perfect_move(&state)?;
            (state, status) = state.play_unchecked(mv);
        }
        Ok(status.outcome().expect("terminal status has an outcome"))
    }

    pub fn summary(&self) -> SolveSummary {
        let mut summary = SolveSummary {
            dims: self.dims,
            wins: 0,
            losses: 0,
            draws: 0,
            max_distance: self.max_distance(),
            starts: Vec::new(),
        };
        for entry in self.entries.iter().flatten() {
            match entry.value {
                SolvedValue::WinForMover => summary.wins += 1,
                SolvedValue::LossForMover => summary.losses += 1,
                SolvedValue::Drawn => summary.draws += 1,
            }
        }
        for s in starting_positions(self.dims) {
            let entry = self.entry(&s).expect("starting positions are in play");
            summary.starts.push((s, entry));
        }
        summary
    }

    const MAGIC: &'static [u8; 4] = b"OZTB";
    const VERSION: u8 = 1;

    /// Little-endian dump: magic, version, width and height as `u16`, then
    /// for every position (side to move, Player One's square, Player Two's
    /// square, each row-major) a value byte (0 draw, 1 win, 2 loss,
    /// 255 not in play) and a `u16` distance.
    pub fn write_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        out.write_all(Self::MAGIC)?;
        out.write_all(&[Self::VERSION])?;
        out.write_all(&(self.dims.width() as u16).to_le_bytes())?;
        out.write_all(&(self.dims.height() as u16).to_le_bytes())?;
        let mut buf = Vec::with_capacity(3 * self.entries.len());
        for entry in &self.entries {
            let (code, d) = match entry {
                None => (255u8, 0u16),
                Some(e) => {
                    let code = match e.value {
                        SolvedValue::Drawn => 0,
                        SolvedValue::WinForMover => 1,
                        SolvedValue::LossForMover => 2,
                    };
                    (code, e.distance.unwrap_or(0))
                }
            };
            buf.push(code);
            buf.extend_from_slice(&d.to_le_bytes());
        }
        out.write_all(&buf)
    }

    pub fn read_from<R: Read>(input: &mut R, path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::Format {
            path: path.to_owned(),
            reason: reason.to_owned(),
        };
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        if bytes.len() < 9 || &bytes[..4] != Self::MAGIC {
            return Err(bad("not a tablebase file"));
        }
        if bytes[4] != Self::VERSION {
            return Err(bad("unsupported tablebase version"));
        }
        let width = u16::from_le_bytes([bytes[5], bytes[6]]) as usize;
        let height = u16::from_le_bytes([bytes[7], bytes[8]]) as usize;
        let dims = BoardDims::new(width, height)?;
        let body = &bytes[9..];
        if body.len() != 3 * Self::position_count(dims) {
            return Err(bad("truncated tablebase"));
        }
        let mut entries = Vec::with_capacity(Self::position_count(dims));
        for rec in body.chunks_exact(3) {
            let d = u16::from_le_bytes([rec[1], rec[2]]);
            entries.push(match rec[0] {
                255 => None,
                0 => Some(SolvedEntry::DRAWN),
                1 => Some(SolvedEntry::win(d)),
                2 => Some(SolvedEntry::loss(d)),
                _ => return Err(bad("unknown value code")),
            });
        }
        Ok(Tablebase { dims, entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_to(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut file, path)
    }
}

/// Solves every in-play position by backward induction over distance levels.
pub fn solve(dims: BoardDims) -> Tablebase {
    let total = Tablebase::position_count(dims);
    let mut children: Vec<Vec<Child>> = vec![Vec::new(); total];
    let mut entries: Vec<Option<SolvedEntry>> = vec![None; total];
    let mut live = Vec::new();

    for (index, kids) in children.iter_mut().enumerate() {
        let (p1, p2, side) = Tablebase::decode(dims, index);
        if !Tablebase::covers(dims, p1, p2) {
            continue;
        }
        live.push(index);
        let state = GameState::new(dims, p1, p2, side, 0).expect("decoded square on board");
        for mv in Move::ALL {
            if !state.legal_mask()[mv.index()] {
                continue;
            }
            if state.is_immediate_win(mv) {
                kids.push(Child::ImmediateWin);
            } else {
                let (next, status) = state.play_unchecked(mv);
                debug_assert_eq!(status, TerminalStatus::Ongoing);
                kids.push(Child::Position(Tablebase::index_of(
                    dims,
                    next.p1(),
                    next.p2(),
                    next.to_move(),
                )));
            }
        }
    }

    let mut solved: Vec<(usize, SolvedEntry)> = Vec::new();
    for &index in &live {
        if children[index].iter().any(|c| matches!(c, Child::ImmediateWin)) {
            solved.push((index, SolvedEntry::win(1)));
        }
    }
    let mut level: u16 = 1;
    while !solved.is_empty() {
        for &(index, entry) in &solved {
            entries[index] = Some(entry);
        }
        solved.clear();
        level += 1;
        for &index in &live {
            if entries[index].is_some() {
                continue;
            }
            let mut wins_here = false;
            let mut all_lose = true;
            let mut longest = 0;
            for child in &children[index] {
                let Child::Position(c) = *child else { continue };
                match entries[c] {
                    Some(SolvedEntry {
                        value: SolvedValue::LossForMover,
                        distance: Some(d),
                    }) if d + 1 == level => wins_here = true,
                    Some(SolvedEntry {
                        value: SolvedValue::WinForMover,
                        distance: Some(d),
                    }) => longest = longest.max(d),
                    _ => all_lose = false,
                }
            }
            if wins_here {
                solved.push((index, SolvedEntry::win(level)));
            } else if all_lose && longest + 1 == level {
                solved.push((index, SolvedEntry::loss(level)));
            }
        }
    }
    for &index in &live {
        entries[index].get_or_insert(SolvedEntry::DRAWN);
    }

    let tb = Tablebase { dims, entries };
    let max = tb.max_distance();
    if max >= dims.timeout() {
        log::warn!(
            "{dims}: optimal distance {max} reaches the timeout {}; realized games may be drawn",
            dims.timeout()
        );
    }
    tb
}

#[derive(Clone, Debug)]
pub struct SolveSummary {
    pub dims: BoardDims,
    pub wins: usize,
    pub losses: usize,
    pub draws: usize,
    pub max_distance: u16,
    /// Value of every starting position for Player One.
    pub starts: Vec<(GameState, SolvedEntry)>,
}

impl SolveSummary {
    pub fn first_player_wins(&self) -> usize {
        self.starts
            .iter()
            .filter(|(_, e)| e.value == SolvedValue::WinForMover)
            .count()
    }

    pub fn drawn_starts(&self) -> usize {
        self.starts
            .iter()
            .filter(|(_, e)| e.value == SolvedValue::Drawn)
            .count()
    }
}

impl fmt::Display for SolveSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "board {}", self.dims)?;
        writeln!(
            f,
            "positions: {} win, {} loss, {} draw (for the side to move)",
            self.wins, self.losses, self.draws
        )?;
        writeln!(f, "longest optimal game: {} plies", self.max_distance)?;
        writeln!(
            f,
            "starting positions: {} of {} are first-player wins, {} drawn",
            self.first_player_wins(),
            self.starts.len(),
            self.drawn_starts()
        )?;
        for (s, e) in &self.starts {
            writeln!(f, "  {s}  {e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn dims(w: usize, h: usize) -> BoardDims {
        BoardDims::new(w, h).unwrap()
    }

    /// Depth-limited minimax over the raw game tree, memoized on
    /// `(position, depth)`. `None` means no forced result within `depth`.
    fn minimax(
        s: &GameState,
        depth: u16,
        memo: &mut HashMap<(Square, Square, Player, u16), Option<SolvedEntry>>,
    ) -> Option<SolvedEntry> {
        if depth == 0 {
            return None;
        }
        let key = (s.p1(), s.p2(), s.to_move(), depth);
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let mut best_win: Option<u16> = None;
        let mut all_lose = true;
        let mut longest_loss = 0;
        for mv in s.legal_moves().unwrap() {
            let (next, status) = s.apply_move(mv).unwrap();
            if matches!(status, TerminalStatus::Won { .. }) {
                best_win = Some(1);
                continue;
            }
            let next = next.with_ply(0).unwrap();
            match minimax(&next, depth - 1, memo) {
                Some(e) if e.value == SolvedValue::LossForMover => {
                    let d = e.distance.unwrap() + 1;
                    best_win = Some(best_win.map_or(d, |b| b.min(d)));
                }
                Some(e) if e.value == SolvedValue::WinForMover => {
                    longest_loss = longest_loss.max(e.distance.unwrap() + 1);
                }
                _ => all_lose = false,
            }
        }
        let v = if let Some(d) = best_win {
            Some(SolvedEntry::win(d))
        } else if all_lose {
            Some(SolvedEntry::loss(longest_loss))
        } else {
            None
        };
        memo.insert(key, v);
        v
    }

    #[test]
    fn one_by_two_is_an_immediate_win() {
        let tb = solve(dims(1, 2));
        let start = starting_positions(dims(1, 2))[0];
        assert_eq!(tb.entry(&start), Some(SolvedEntry::win(1)));
        let (_, status) = start.apply_move(start.legal_moves().unwrap()[0]).unwrap();
        assert_eq!(
            status,
            TerminalStatus::Won {
                winner: Player::One,
                plies: 1
            }
        );
    }

    #[test]
    fn three_by_nine_starting_values() {
        let tb = solve(dims(3, 9));
        let summary = tb.summary();
        assert_eq!(summary.starts.len(), 9);
        assert_eq!(summary.first_player_wins(), 6);
        assert_eq!(summary.drawn_starts(), 0);
        assert!(tb.max_distance() < dims(3, 9).timeout());
    }

    #[test]
    fn two_position_move_values() {
        let tb = solve(dims(3, 9));
        let left: GameState = "3,9/0,2/1,4/2/1".parse().unwrap();
        let wins: Vec<(Move, u16)> = tb
            .move_values(&left)
            .unwrap()
            .into_iter()
            .filter(|(_, v)| v.result == Relative::Win)
            .map(|(mv, v)| (mv, v.distance.unwrap()))
            .collect();
        // The sideways and backward-diagonal steps away from White also win,
        // more slowly; an independent brute-force solve agrees.
        assert_eq!(
            wins,
            vec![
                (Move { df: -1, dr: 0 }, 15),
                (Move { df: 1, dr: -1 }, 11),
                (Move { df: 1, dr: 0 }, 15),
                (Move { df: 1, dr: 1 }, 19),
            ]
        );
        assert!(tb
            .move_values(&left)
            .unwrap()
            .iter()
            .all(|(_, v)| v.result != Relative::Draw));
        assert_eq!(tb.perfect_move(&left).unwrap(), Move { df: 1, dr: -1 });

        let right: GameState = "3,9/0,1/1,8/2/1".parse().unwrap();
        let values = tb.move_values(&right).unwrap();
        let wins: Vec<Move> = values
            .iter()
            .filter(|(_, v)| v.result == Relative::Win)
            .map(|(mv, _)| *mv)
            .collect();
        assert_eq!(wins, vec![Move { df: -1, dr: -1 }]);
        assert!(values.iter().all(|(_, v)| v.result != Relative::Draw));
    }

    #[test]
    fn immediate_win_is_played() {
        let tb = solve(dims(3, 9));
        let s: GameState = "3,9/1,4/1,5/1/8".parse().unwrap();
        let mv = tb.perfect_move(&s).unwrap();
        assert!(s.is_immediate_win(mv));
        assert_eq!(tb.entry(&s).unwrap(), SolvedEntry::win(1));
    }

    #[test]
    fn distances_have_the_right_parity_and_are_consistent() {
        for (w, h) in [(2, 3), (3, 5), (3, 9), (4, 6)] {
            let tb = solve(dims(w, h));
            for (s, e) in tb.entries() {
                let values = tb.move_values(&s).unwrap();
                match (e.value, e.distance) {
                    (SolvedValue::WinForMover, Some(d)) => {
                        assert_eq!(d % 2, 1);
                        let best = values
                            .iter()
                            .filter(|(_, v)| v.result == Relative::Win)
                            .map(|(_, v)| v.distance.unwrap())
                            .min();
                        assert_eq!(best, Some(d), "{s}");
                    }
                    (SolvedValue::LossForMover, Some(d)) => {
                        assert!(d >= 2 && d % 2 == 0);
                        assert!(values.iter().all(|(_, v)| v.result == Relative::Loss));
                        let longest = values.iter().map(|(_, v)| v.distance.unwrap()).max();
                        assert_eq!(longest, Some(d));
                    }
                    (SolvedValue::Drawn, None) => {
                        assert!(values.iter().all(|(_, v)| v.result != Relative::Win));
                        assert!(values.iter().any(|(_, v)| v.result == Relative::Draw));
                    }
                    other => panic!("malformed entry {other:?}"),
                }
            }
        }
    }

    #[test]
    fn agrees_with_minimax_on_small_boards() {
        for (w, h) in [
            (1, 3),
            (2, 2),
            (2, 3),
            (3, 3),
            (2, 4),
            (3, 4),
            (2, 5),
            (2, 6),
            (1, 12),
            (4, 3),
            (6, 2),
        ] {
            let d = dims(w, h);
            let tb = solve(d);
            let depth = 64;
            assert!(tb.max_distance() < depth);
            let mut memo = HashMap::new();
            for (s, e) in tb.entries() {
                let expected = minimax(&s, depth, &mut memo).unwrap_or(SolvedEntry::DRAWN);
                assert_eq!(e, expected, "{s}");
            }
        }
    }

    #[test]
    fn mirror_symmetry() {
        let tb = solve(dims(4, 6));
        for (s, e) in tb.entries() {
            assert_eq!(tb.entry(&s.mirrored()), Some(e));
        }
    }

    #[test]
    fn drawn_position_times_out() {
        let d = dims(4, 6);
        let tb = solve(d);
        let drawn = tb.entries().find(|(_, e)| e.value == SolvedValue::Drawn);
        if let Some((s, _)) = drawn {
            let s = s.with_ply(if s.to_move() == Player::One { 0 } else { 1 }).unwrap();
            let o = tb.oracle_outcome(&s).unwrap();
            assert_eq!(o, Outcome::draw(d));
        }
    }

    #[test]
    fn dump_round_trip() {
        let tb = solve(dims(3, 5));
        let mut buf = Vec::new();
        tb.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 9 + 3 * 2 * 15 * 15);
        assert_eq!(&buf[..4], b"OZTB");
        let back = Tablebase::read_from(&mut buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, tb);
        buf.truncate(20);
        assert!(Tablebase::read_from(&mut buf.as_slice(), Path::new("mem")).is_err());
    }
}
