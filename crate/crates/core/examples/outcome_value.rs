//! Turns an outcome-head prediction into a search value under a rank reward.

use ordinal_zero::game::{BoardDims, GameState, Player};
use ordinal_zero::nn::{value_from_outcome, OutcomeHeadOutput};
use ordinal_zero::rewards::{Outcome, OutcomeWindow, Reward, RewardFunction, RewardKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dims = BoardDims::new(3, 9)?;
    let window = OutcomeWindow::from_outcomes(
        dims,
        &[
            Outcome::win(Player::One, 9),
            Outcome::win(Player::One, 13),
            Outcome::win(Player::Two, 14),
            Outcome::win(Player::Two, 20),
            Outcome::draw(dims),
        ],
    );
    let reward = RewardFunction::new(RewardKind::Cdf, &window)?;
    let state: GameState = "3,9/1,0/1,8/1/0".parse()?;
    // Logits in win, draw, loss order; plies left on a 0.1 scale.
    let head = OutcomeHeadOutput {
        wdl: [0.60f64.ln(), 0.05f64.ln(), 0.35f64.ln()],
        plies_left_win: 1.1,
        plies_left_loss: 1.4,
    };
    let p = head.probabilities();
    println!("P(win) {:.2}  P(draw) {:.2}  P(loss) {:.2}", p[0], p[1], p[2]);
    for o in [
        Outcome::win(Player::One, 11),
        Outcome::win(Player::Two, 14),
        Outcome::draw(dims),
    ] {
        println!("  F({o}) = {:+.4}", reward.reward(o, Player::One));
    }
    println!("value = {:+.4}", value_from_outcome(&head, &state, &reward));
    Ok(())
}
