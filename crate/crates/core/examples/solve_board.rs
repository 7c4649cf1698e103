//! Solves a board and prints the value of every starting position.
//!
//! cargo run --release --example solve_board -- [width] [height]

use ordinal_zero::game::BoardDims;
use ordinal_zero::solver::solve;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let dims = BoardDims::new(*args.first().unwrap_or(&3), *args.get(1).unwrap_or(&9))?;
    let t = std::time::Instant::now();
    let tb = solve(dims);
    println!("solved in {:.2?}", t.elapsed());
    print!("{}", tb.summary());
    Ok(())
}
