//! Self-play MCTS training with rank-based rewards on the opposition game,
//! a two-king race on a small board, checked against an exact solver.
//!
//! ## Examples
//!
//! One per capability, in `examples/`:
//!
//! - **`solve_board`** - retrograde solve and starting-position values
//! - **`move_values`** - every move's solved value in two 3x9 positions
//! - **`cdf_rewards`** - the four reward functions over one window
//! - **`virtual_matches`** - bonus reward against explicit virtual matches
//! - **`outcome_value`** - outcome-head prediction to search value
//! - **`search`** - one PUCT search with root statistics
//! - **`evaluate`** - a network against the perfect player, in demerits
//! - **`train`** - a full self-play run with its demerit curve
//!
//! ```bash
//! cargo run --release --example solve_board -- 3 9
//! cargo run --release --example train -- cdf outcome 120 1
//! ```

pub mod cli;
pub mod error;
pub mod eval;
pub mod game;
pub mod mcts;
pub mod nn;
pub mod rewards;
pub mod solver;
pub mod trainer;
