//! Plays an agent against the perfect player from every starting position
//! and reports demerits. Without a weights file the agent is untrained.
//!
//! cargo run --release --example evaluate -- [weights]

use ordinal_zero::eval::{evaluate, oracle_floor};
use ordinal_zero::game::BoardDims;
use ordinal_zero::mcts::SearchParams;
use ordinal_zero::nn::{HeadKind, Network, NetworkConfig};
use ordinal_zero::rewards::{RewardFunction, RewardKind};
use ordinal_zero::solver::solve;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = match std::env::args().nth(1) {
        Some(path) => Network::load(path.as_ref())?,
        None => Network::new(
            NetworkConfig {
                dims: BoardDims::new(3, 5)?,
                head: HeadKind::Value,
            },
            1,
        ),
    };
    let dims = net.config().dims;
    let tb = solve(dims);
    let reward = RewardFunction::fixed(RewardKind::HandTuned, dims)?;
    let report = evaluate(&net, &reward, &tb, &SearchParams::evaluation(dims))?;
    for g in &report.games {
        println!(
            "{}  agent {:?}  {}  {:+.3}",
            g.start, g.agent, g.outcome, g.agent_reward
        );
    }
    println!(
        "demerits {:.3} (floor {})",
        report.demerits,
        oracle_floor(&tb)?.demerits
    );
    Ok(())
}
