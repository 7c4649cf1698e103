//! Runs one search from a 3x5 starting position with an untrained network
//! and prints the root statistics.

use ordinal_zero::game::{starting_positions, BoardDims};
use ordinal_zero::mcts::{search, select_move, SearchParams};
use ordinal_zero::nn::{HeadKind, Network, NetworkConfig};
use ordinal_zero::rewards::{RewardFunction, RewardKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dims = BoardDims::new(3, 5)?;
    let net = Network::new(
        NetworkConfig {
            dims,
            head: HeadKind::Value,
        },
        1,
    );
    let reward = RewardFunction::fixed(RewardKind::HandTuned, dims)?;
    let root = starting_positions(dims)[4];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = SearchParams::self_play(dims);
    let result = search(&root, &net, &reward, &params, &mut rng)?;
    println!("root {root}, {} simulations", result.simulations);
    print!("{}", result.trace());
    let mv = select_move(&result.policy, params.temperature, &mut rng)?;
    println!("sampled move {mv}");
    Ok(())
}
