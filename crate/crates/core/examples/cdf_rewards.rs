//! Rank rewards over a small window of outcomes, with and without the
//! winning bonus, printed for every recorded outcome.

use ordinal_zero::game::{BoardDims, Player};
use ordinal_zero::rewards::{cdf_bonus_reward, cdf_reward, handtuned_reward, primitive_reward, Outcome, OutcomeWindow};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dims = BoardDims::new(3, 9)?;
    let window = OutcomeWindow::from_outcomes(
        dims,
        &[
            Outcome::win(Player::One, 7),
            Outcome::win(Player::One, 15),
            Outcome::win(Player::One, 15),
            Outcome::win(Player::Two, 12),
            Outcome::win(Player::Two, 30),
            Outcome::draw(dims),
        ],
    );
    println!(
        "{:<12} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "outcome", "primitive", "handtuned", "cdf", "bonus .5", "bonus 0"
    );
    let mut shown: Vec<Outcome> = window.lattice().outcomes().filter(|&o| window.count(o) > 0).collect();
    shown.reverse();
    for o in shown {
        let p = Player::One;
        println!(
            "{:<12} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            o.to_string(),
            primitive_reward(o, p),
            handtuned_reward(o, p, dims),
            cdf_reward(&window, o, p),
            cdf_bonus_reward(&window, o, p, 0.5)?,
            cdf_bonus_reward(&window, o, p, 0.0)?,
        );
    }
    Ok(())
}
