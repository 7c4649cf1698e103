//! Lists every move with its solved value in two 3x9 positions, one with
//! several winning continuations and one with a single winning move.

use ordinal_zero::game::{BoardDims, GameState};
use ordinal_zero::solver::solve;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tb = solve(BoardDims::new(3, 9)?);
    for (label, pos) in [("left", "3,9/0,2/1,4/2/1"), ("right", "3,9/0,1/1,8/2/1")] {
        let state: GameState = pos.parse()?;
        println!("{label} position {state}, {:?} to move", state.to_move());
        for (mv, value) in tb.move_values(&state)? {
            println!("  {mv}  {value}");
        }
        println!("  perfect move: {}", tb.perfect_move(&state)?);
    }
    Ok(())
}
