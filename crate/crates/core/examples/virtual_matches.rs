//! Checks the closed-form bonus reward against explicit two-game virtual
//! matches with every decisive game in a random window.

use ordinal_zero::game::{BoardDims, Player};
use ordinal_zero::rewards::{cdf_bonus_reward, Outcome, OutcomeWindow, Relative};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Match score for `o` against window game `x`, both from `player`'s view.
fn match_score(o: Outcome, x: Outcome, player: Player, alpha: f64, window: &OutcomeWindow) -> f64 {
    let lattice = window.lattice();
    let (a, b) = (lattice.index_for(o, player), lattice.index_for(x, player));
    let sign = (a as f64 - b as f64).signum() * (a != b) as u8 as f64;
    match (o.relative_to(player), x.relative_to(player)) {
        (ro, rx) if ro == rx => alpha * sign,
        (Relative::Draw, _) | (_, Relative::Draw) => sign * (1.0 + alpha) / 2.0,
        _ => sign,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dims = BoardDims::new(3, 5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let outcomes: Vec<Outcome> = (0..20)
        .map(|_| match rng.gen_range(0..5) {
            0 => Outcome::draw(dims),
            1 | 2 => Outcome::win(Player::One, rng.gen_range(1..40)),
            _ => Outcome::win(Player::Two, rng.gen_range(1..40)),
        })
        .collect();
    let window = OutcomeWindow::from_outcomes(dims, &outcomes);
    let decisive: Vec<Outcome> = outcomes.iter().copied().filter(|o| o.winner().is_some()).collect();
    let mut worst: f64 = 0.0;
    for alpha in [0.0, 0.25, 0.5, 1.0] {
        for &o in &outcomes {
            for p in [Player::One, Player::Two] {
                let sim = decisive
                    .iter()
                    .map(|&x| match_score(o, x, p, alpha, &window))
                    .sum::<f64>()
                    / decisive.len() as f64;
                let closed = cdf_bonus_reward(&window, o, p, alpha)?;
                worst = worst.max((sim - closed).abs());
            }
        }
    }
    println!(
        "{} outcomes, {} decisive; worst |simulated - closed form| = {worst:e}",
        outcomes.len(),
        decisive.len()
    );
    Ok(())
}
