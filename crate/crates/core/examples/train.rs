//! Trains an agent on a small board and prints the demerit curve.
//!
//! cargo run --release --example train -- [reward] [head] [generations] [seed] [dir]
//!
//! Defaults: handtuned value 10 1 on a 3x5 board, writing to a temp dir.

use std::ops::ControlFlow;
use std::path::PathBuf;

use ordinal_zero::game::BoardDims;
use ordinal_zero::nn::HeadKind;
use ordinal_zero::rewards::RewardKind;
use ordinal_zero::trainer::{run_training, RunOptions, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_owned());

    let reward: RewardKind = arg(0, "handtuned").parse()?;
    let head: HeadKind = arg(1, "value").parse()?;
    let mut config = TrainConfig::new(BoardDims::new(3, 5)?, reward, head);
    config.generations = arg(2, "10").parse()?;
    config.seed = arg(3, "1").parse()?;
    let dir = match args.get(4) {
        Some(d) => PathBuf::from(d),
        None => std::env::temp_dir().join(format!("oz-{reward}-{head}-{}", config.seed)),
    };

    println!("run directory: {}", dir.display());
    run_training(&config, &dir, RunOptions::default(), |r| {
        println!(
            "gen {:3}  demerits {:6.3}  loss {:7.4}  {:.1}s",
            r.generation,
            r.demerits(),
            r.mean_loss,
            r.duration.as_secs_f64()
        );
        ControlFlow::Continue(())
    })?;
    Ok(())
}
