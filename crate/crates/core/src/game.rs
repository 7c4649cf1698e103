//! Rules engine for the opposition game.
//!
//! Two kings start on their own back ranks of a `w x h` board. Player One
//! starts on rank 0 and wins by reaching rank `h - 1`; Player Two starts on
//! rank `h - 1` and wins by reaching rank 0. Capturing the other king also
//! wins. A game still undecided after `20 * h` plies is a draw.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rewards::{GameResult, Outcome};

/// Scale applied to ply counts wherever they enter or leave the network.
pub const PLY_SCALE: f64 = 0.1;

/// Number of input planes produced by [`GameState::encode`].
pub const NUM_PLANES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BoardDims {
    width: usize,
    height: usize,
}

impl BoardDims {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width < 1 || height < 2 || width > 64 || height > 64 {
            return Err(Error::InvalidDims { width, height });
        }
        Ok(BoardDims { width, height })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    /// Ply at which an undecided game is declared drawn.
    pub fn timeout(&self) -> u16 {
        (20 * self.height) as u16
    }

    /// The input placeholder value `1 / (w h)`.
    pub fn epsilon(&self) -> f64 {
        1.0 / self.cells() as f64
    }

    pub fn contains(&self, file: i32, rank: i32) -> bool {
        file >= 0 && rank >= 0 && (file as usize) < self.width && (rank as usize) < self.height
    }

    /// Back rank of `player`, i.e. the rank the opponent must reach.
    pub fn back_rank(&self, player: Player) -> usize {
        match player {
            Player::One => 0,
            Player::Two => self.height - 1,
        }
    }

    pub fn square_index(&self, sq: Square) -> usize {
        sq.rank as usize * self.width + sq.file as usize
    }

    pub fn square_at(&self, index: usize) -> Square {
        Square::new((index % self.width) as u8, (index / self.width) as u8)
    }
}

impl fmt::Display for BoardDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Player> {
        match index {
            0 => Some(Player::One),
            1 => Some(Player::Two),
            _ => None,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::One => f.write_str("1"),
            Player::Two => f.write_str("2"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Square {
    pub file: u8,
    pub rank: u8,
}

impl Square {
    pub const fn new(file: u8, rank: u8) -> Self {
        Square { file, rank }
    }
}

/// One of the eight king steps. The action space of the policy head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Move {
    pub df: i8,
    pub dr: i8,
}

impl Move {
    /// All directions in policy-index order (lexicographic on `(df, dr)`).
    pub const ALL: [Move; 8] = [
        Move { df: -1, dr: -1 },
        Move { df: -1, dr: 0 },
        Move { df: -1, dr: 1 },
        Move { df: 0, dr: -1 },
        Move { df: 0, dr: 1 },
        Move { df: 1, dr: -1 },
        Move { df: 1, dr: 0 },
        Move { df: 1, dr: 1 },
    ];

    pub const COUNT: usize = 8;

    pub fn from_index(index: usize) -> Option<Move> {
        Self::ALL.get(index).copied()
    }

    pub fn index(self) -> usize {
        Self::ALL
            .iter()
            .position(|&m| m == self)
            .expect("move direction is one of the eight king steps")
    }

    /// Reflection across the board's vertical axis.
    pub fn mirrored(self) -> Move {
        Move {
            df: -self.df,
            dr: self.dr,
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:+},{:+})", self.df, self.dr)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TerminalStatus {
    Ongoing,
    Won { winner: Player, plies: u16 },
    DrawTimeout { plies: u16 },
}

impl TerminalStatus {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, TerminalStatus::Ongoing)
    }

    pub fn outcome(&self) -> Option<Outcome> {
        match *self {
            TerminalStatus::Ongoing => None,
            TerminalStatus::Won { winner, plies } => Some(Outcome::win(winner, plies)),
            TerminalStatus::DrawTimeout { plies } => Some(Outcome::new(GameResult::Draw, plies)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GameState {
    dims: BoardDims,
    p1: Square,
    p2: Square,
    to_move: Player,
    ply: u16,
}

impl GameState {
    pub fn new(dims: BoardDims, p1: Square, p2: Square, to_move: Player, ply: u16) -> Result<Self> {
        for sq in [p1, p2] {
            if !dims.contains(sq.file as i32, sq.rank as i32) {
                return Err(Error::contract(format!(
                    "square ({},{}) is off the {dims} board",
                    sq.file, sq.rank
                )));
            }
        }
        if ply > dims.timeout() {
            return Err(Error::contract(format!(
                "ply {ply} exceeds the timeout {}",
                dims.timeout()
            )));
        }
        Ok(GameState {
            dims,
            p1,
            p2,
            to_move,
            ply,
        })
    }

    pub fn dims(&self) -> BoardDims {
        self.dims
    }

    pub fn p1(&self) -> Square {
        self.p1
    }

    pub fn p2(&self) -> Square {
        self.p2
    }

    pub fn king(&self, player: Player) -> Square {
        match player {
            Player::One => self.p1,
            Player::Two => self.p2,
        }
    }

    pub fn to_move(&self) -> Player {
        self.to_move
    }

    pub fn ply(&self) -> u16 {
        self.ply
    }

    /// Same position with a different ply counter.
    pub fn with_ply(&self, ply: u16) -> Result<Self> {
        GameState::new(self.dims, self.p1, self.p2, self.to_move, ply)
    }

    /// Status of this position as reached by the previous mover.
    pub fn status(&self) -> TerminalStatus {
        let mover = self.to_move.opponent();
        let h = self.dims.height as u8;
        if self.p1 == self.p2 || self.p1.rank == h - 1 || self.p2.rank == 0 {
            TerminalStatus::Won {
                winner: mover,
                plies: self.ply,
            }
        } else if self.ply >= self.dims.timeout() {
            TerminalStatus::DrawTimeout { plies: self.ply }
        } else {
            TerminalStatus::Ongoing
        }
    }

    fn destination(&self, mv: Move) -> Option<Square> {
        let from = self.king(self.to_move);
        let file = from.file as i32 + mv.df as i32;
        let rank = from.rank as i32 + mv.dr as i32;
        self.dims
            .contains(file, rank)
            .then(|| Square::new(file as u8, rank as u8))
    }

    /// On-board directions for the side to move, indexed like [`Move::ALL`].
    /// Ignores whether the game is over.
    pub fn legal_mask(&self) -> [bool; Move::COUNT] {
        let mut mask = [false; Move::COUNT];
        for (slot, &mv) in mask.iter_mut().zip(Move::ALL.iter()) {
            *slot = self.destination(mv).is_some();
        }
        mask
    }

    pub fn legal_moves(&self) -> Result<Vec<Move>> {
        if self.status().is_terminal() {
            return Err(Error::contract(format!("legal_moves called on finished game {self}")));
        }
        Ok(Move::ALL
            .iter()
            .copied()
            .filter(|&mv| self.destination(mv).is_some())
            .collect())
    }

    /// Plays `mv` without checking that the game is still running.
    /// `mv` must keep the king on the board.
    pub(crate) fn play_unchecked(&self, mv: Move) -> (GameState, TerminalStatus) {
        let dest = self
            .destination(mv)
            .expect("play_unchecked called with an off-board move");
        let mut next = *self;
        match self.to_move {
            Player::One => next.p1 = dest,
            Player::Two => next.p2 = dest,
        }
        next.to_move = self.to_move.opponent();
        next.ply = self.ply + 1;
        let status = next.status();
        (next, status)
    }

    pub fn apply_move(&self, mv: Move) -> Result<(GameState, TerminalStatus)> {
        if self.status().is_terminal() {
            return Err(Error::contract(format!("move {mv} played in finished game {self}")));
        }
        if self.destination(mv).is_none() {
            return Err(Error::contract(format!("illegal move {mv} in {self}")));
        }
        Ok(self.play_unchecked(mv))
    }

    /// Whether `mv` ends the game in the mover's favour on the spot.
    pub fn is_immediate_win(&self, mv: Move) -> bool {
        match self.destination(mv) {
            Some(dest) => {
                let opp = self.to_move.opponent();
                dest == self.king(opp) || dest.rank as usize == self.dims.back_rank(opp)
            }
            None => false,
        }
    }

    /// Network input: five `h x w` planes, row-major by rank then file.
    pub fn encode(&self) -> Vec<f64> {
        let mut planes = vec![0.0; NUM_PLANES * self.dims.cells()];
        self.encode_into(&mut planes);
        planes
    }

    pub fn encode_into(&self, planes: &mut [f64]) {
        let cells = self.dims.cells();
        assert_eq!(planes.len(), NUM_PLANES * cells, "plane buffer size");
        let eps = self.dims.epsilon();
        let (kings, rest) = planes.split_at_mut(2 * cells);
        kings.fill(-eps);
        kings[self.dims.square_index(self.p1)] = 1.0;
        kings[cells + self.dims.square_index(self.p2)] = 1.0;
        let side = if self.to_move == Player::One { eps } else { -eps };
        rest[..cells].fill(PLY_SCALE * self.ply as f64 * eps);
        rest[cells..2 * cells].fill(side);
        rest[2 * cells..].fill(eps);
    }

    /// Reflection of both kings across the board's vertical axis.
    pub fn mirrored(&self) -> GameState {
        let w = self.dims.width as u8;
        let flip = |sq: Square| Square::new(w - 1 - sq.file, sq.rank);
        GameState {
            p1: flip(self.p1),
            p2: flip(self.p2),
            ..*self
        }
    }
}

/// Every placement of the two kings on their back ranks, Player One to move.
pub fn starting_positions(dims: BoardDims) -> Vec<GameState> {
    let top = (dims.height - 1) as u8;
    let mut states = Vec::with_capacity(dims.width * dims.width);
    for f1 in 0..dims.width as u8 {
        for f2 in 0..dims.width as u8 {
            states.push(GameState {
                dims,
                p1: Square::new(f1, 0),
                p2: Square::new(f2, top),
                to_move: Player::One,
                ply: 0,
            });
        }
    }
    states
}

/// Notation `w,h/p1file,p1rank/p2file,p2rank/side/ply`.
impl fmt::Display for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{}/{},{}/{},{}/{}/{}",
            self.dims.width,
            self.dims.height,
            self.p1.file,
            self.p1.rank,
            self.p2.file,
            self.p2.rank,
            self.to_move,
            self.ply
        )
    }
}

impl FromStr for GameState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::parse("game state", s, reason);
        let fields: Vec<&str> = s.trim().split('/').collect();
        if fields.len() != 5 {
            return Err(bad("expected five '/'-separated fields"));
        }
        let pair = |field: &str| -> Result<(usize, usize)> {
            let (a, b) = field
                .split_once(',')
                .ok_or_else(|| bad("expected a comma-separated pair"))?;
            let a = a.trim().parse().map_err(|_| bad("not an integer"))?;
            let b = b.trim().parse().map_err(|_| bad("not an integer"))?;
            Ok((a, b))
        };
        let (w, h) = pair(fields[0])?;
        let dims = BoardDims::new(w, h)?;
        let square = |field: &str| -> Result<Square> {
            let (file, rank) = pair(field)?;
            if file >= w || rank >= h {
                return Err(bad("square off the board"));
            }
            Ok(Square::new(file as u8, rank as u8))
        };
        let p1 = square(fields[1])?;
        let p2 = square(fields[2])?;
        let to_move = match fields[3].trim() {
            "1" => Player::One,
            "2" => Player::Two,
            _ => return Err(bad("side must be 1 or 2")),
        };
        let ply = fields[4].trim().parse().map_err(|_| bad("ply is not an integer"))?;
        GameState::new(dims, p1, p2, to_move, ply)
    }
}
