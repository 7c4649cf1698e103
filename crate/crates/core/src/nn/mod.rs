//! Small convolutional policy/outcome network with hand-written backprop.
//!
//! Trunk: three 3x3 convolutions with 16 channels, each followed by ReLU
//! and batch norm. Policy head: one more 3x3 convolution with 32 channels
//! (ReLU, batch norm) and a dense layer to the 8 move directions. Second
//! head: dense 64 with ReLU, then either one tanh value or five outcome
//! outputs (win/draw/loss logits and plies left after a win or a loss).

mod io;
mod layers;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{BoardDims, GameState, Player, NUM_PLANES, PLY_SCALE};
use crate::rewards::{GameResult, Outcome, Reward};

use layers::{batchnorm_eval, batchnorm_train, relu_in_place, BnCache, Conv, Dense, Grid};

pub use train::{loss, LossWeights, ResultTarget, Sgd, TrainingExample};

pub const TRUNK_CHANNELS: usize = 16;
pub const POLICY_CHANNELS: usize = 32;
pub const HIDDEN: usize = 64;
pub const POLICY_OUTPUTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeadKind {
    Value,
    Outcome,
}

impl HeadKind {
    pub fn outputs(&self) -> usize {
        match self {
            HeadKind::Value => 1,
            HeadKind::Outcome => 5,
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadKind::Value => f.write_str("value"),
            HeadKind::Outcome => f.write_str("outcome"),
        }
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "value" => Ok(HeadKind::Value),
            "outcome" => Ok(HeadKind::Outcome),
            other => Err(Error::parse("head kind", other, "expected value or outcome")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetworkConfig {
    pub dims: BoardDims,
    pub head: HeadKind,
}

/// Raw outcome-head outputs for the side to move.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutcomeHeadOutput {
    /// Logits in (win, draw, loss) order.
    pub wdl: [f64; 3],
    /// Plies left if the side to move wins, on the network's 0.1 scale.
    pub plies_left_win: f64,
    /// Plies left if the side to move loses, same scale.
    pub plies_left_loss: f64,
}

impl OutcomeHeadOutput {
    pub fn probabilities(&self) -> [f64; 3] {
        let mut p = self.wdl;
        softmax_in_place(&mut p);
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HeadOutput {
    Value(f64),
    Outcome(OutcomeHeadOutput),
}

/// One forward pass for one position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    /// Softmax over the 8 directions, illegal ones included.
    pub policy: [f64; POLICY_OUTPUTS],
    pub head: HeadOutput,
}

/// Converts a prediction's second head into a value for the side to move.
pub fn head_value<R: Reward + ?Sized>(head: &HeadOutput, state: &GameState, reward: &R) -> f64 {
    match head {
        HeadOutput::Value(v) => *v,
        HeadOutput::Outcome(o) => value_from_outcome(o, state, reward),
    }
}

/// Expected reward of the three outcomes the head proposes: a win and a
/// loss after the rounded predicted number of further plies, and a draw.
pub fn value_from_outcome<R: Reward + ?Sized>(head: &OutcomeHeadOutput, state: &GameState, reward: &R) -> f64 {
    let [p_win, p_draw, p_loss] = head.probabilities();
    let timeout = state.dims().timeout() as f64;
    let total = |scaled: f64| -> u16 {
        let left = (scaled / PLY_SCALE).round();
        (state.ply() as f64 + left)
            .clamp(state.ply() as f64 + 1.0, timeout)
            .max(1.0) as u16
    };
    let me = state.to_move();
    let win = Outcome::win(me, total(head.plies_left_win));
    let loss = Outcome::win(me.opponent(), total(head.plies_left_loss));
    let draw = Outcome::new(GameResult::Draw, state.dims().timeout());
    p_win * reward.reward(win, me) + p_loss * reward.reward(loss, me) + p_draw * reward.reward(draw, me)
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    v.iter_mut().for_each(|x| *x /= sum);
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Layout {
    pub conv_w: [usize; 4],
    pub conv_b: [usize; 4],
    pub bn_gamma: [usize; 4],
    pub bn_beta: [usize; 4],
    pub policy_w: usize,
    pub policy_b: usize,
    pub hidden_w: usize,
    pub hidden_b: usize,
    pub out_w: usize,
    pub out_b: usize,
    pub total: usize,
    /// Running mean and variance offsets in the buffer vector.
    pub bn_mean: [usize; 4],
    pub bn_var: [usize; 4],
    pub buffers: usize,
}

/// The four conv + batch-norm stages: three trunk layers, then the policy conv.
pub(crate) const CONVS: [Conv; 4] = [
    Conv {
        cin: NUM_PLANES,
        cout: TRUNK_CHANNELS,
    },
    Conv {
        cin: TRUNK_CHANNELS,
        cout: TRUNK_CHANNELS,
    },
    Conv {
        cin: TRUNK_CHANNELS,
        cout: TRUNK_CHANNELS,
    },
    Conv {
        cin: TRUNK_CHANNELS,
        cout: POLICY_CHANNELS,
    },
];

impl Layout {
    fn new(config: &NetworkConfig) -> Self {
        let area = config.dims.cells();
        let mut next = 0;
        let mut take = |n: usize| {
            let at = next;
            next += n;
            at
        };
        let mut conv_w = [0; 4];
        let mut conv_b = [0; 4];
        let mut bn_gamma = [0; 4];
        let mut bn_beta = [0; 4];
        for (i, conv) in CONVS.iter().enumerate() {
            conv_w[i] = take(conv.weight_len());
            conv_b[i] = take(conv.cout);
            bn_gamma[i] = take(conv.cout);
            bn_beta[i] = take(conv.cout);
        }
        let policy_w = take(POLICY_CHANNELS * area * POLICY_OUTPUTS);
        let policy_b = take(POLICY_OUTPUTS);
        let hidden_w = take(TRUNK_CHANNELS * area * HIDDEN);
        let hidden_b = take(HIDDEN);
        let out_w = take(HIDDEN * config.head.outputs());
        let out_b = take(config.head.outputs());
        let total = next;

        let mut bn_mean = [0; 4];
        let mut bn_var = [0; 4];
        let mut buf = 0;
        for (i, conv) in CONVS.iter().enumerate() {
            bn_mean[i] = buf;
            bn_var[i] = buf + conv.cout;
            buf += 2 * conv.cout;
        }
        Layout {
            conv_w,
            conv_b,
            bn_gamma,
            bn_beta,
            policy_w,
            policy_b,
            hidden_w,
            hidden_b,
            out_w,
            out_b,
            total,
            bn_mean,
            bn_var,
            buffers: buf,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    layout: Layout,
    params: Vec<f64>,
    /// Batch-norm running means and variances.
    buffers: Vec<f64>,
}

/// Everything a training-mode forward pass keeps for backprop.
pub(crate) struct Pass {
    pub batch: usize,
    /// Input of each conv stage (stage 3's input is the trunk output).
    pub conv_inputs: [Vec<f64>; 4],
    pub cols: [Vec<f64>; 4],
    /// Post-ReLU, pre-norm activations of each stage.
    pub relu_out: [Vec<f64>; 4],
    pub bn: [Option<BnCache>; 4],
    pub policy_features: Vec<f64>,
    pub hidden: Vec<f64>,
    pub policy_logits: Vec<f64>,
    pub head_raw: Vec<f64>,
}

impl Network {
    /// He-uniform weights, zero biases, unit batch-norm gains.
    pub fn new(config: NetworkConfig, seed: u64) -> Self {
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let area = config.dims.cells();
        let mut he = |slice: &mut [f64], fan_in: usize| {
            let limit = (6.0 / fan_in as f64).sqrt();
            slice.iter_mut().for_each(|w| *w = rng.gen_range(-limit..limit));
        };
        for (i, conv) in CONVS.iter().enumerate() {
            he(&mut params[layout.conv_w[i]..][..conv.weight_len()], conv.cin * 9);
            params[layout.bn_gamma[i]..][..conv.cout].fill(1.0);
        }
        he(&mut params[layout.policy_w..layout.policy_b], POLICY_CHANNELS * area);
        he(&mut params[layout.hidden_w..layout.hidden_b], TRUNK_CHANNELS * area);
        he(&mut params[layout.out_w..layout.out_b], HIDDEN);
        let mut buffers = vec![0.0; layout.buffers];
        for (i, conv) in CONVS.iter().enumerate() {
            buffers[layout.bn_var[i]..][..conv.cout].fill(1.0);
        }
        Network {
            config,
            layout,
            params,
            buffers,
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn head_kind(&self) -> HeadKind {
        self.config.head
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn grid(&self) -> Grid {
        Grid {
            h: self.config.dims.height(),
            w: self.config.dims.width(),
        }
    }

    fn input_len(&self) -> usize {
        NUM_PLANES * self.config.dims.cells()
    }

    fn slice(&self, at: usize, len: usize) -> &[f64] {
        &self.params[at..at + len]
    }

    fn dense_policy(&self) -> Dense {
        Dense {
            inputs: POLICY_CHANNELS * self.config.dims.cells(),
            outputs: POLICY_OUTPUTS,
        }
    }

    fn dense_hidden(&self) -> Dense {
        Dense {
            inputs: TRUNK_CHANNELS * self.config.dims.cells(),
            outputs: HIDDEN,
        }
    }

    fn dense_out(&self) -> Dense {
        Dense {
            inputs: HIDDEN,
            outputs: self.config.head.outputs(),
        }
    }

    /// Runs a batch through the network. `train` selects batch statistics
    /// for batch norm (and keeps what backprop needs); otherwise running
    /// statistics are used.
    pub(crate) fn run(&self, input: &[f64], batch: usize, train: bool) -> Result<Pass> {
        if input.len() != batch * self.input_len() {
            return Err(Error::Shape {
                expected: batch * self.input_len(),
                actual: input.len(),
            });
        }
        let grid = self.grid();
        let area = grid.area();
        let l = &self.layout;
        let mut conv_inputs: [Vec<f64>; 4] = Default::default();
        let mut cols: [Vec<f64>; 4] = Default::default();
        let mut relu_out: [Vec<f64>; 4] = Default::default();
        let mut bn: [Option<BnCache>; 4] = Default::default();

        let mut x = input.to_vec();
        for (i, conv) in CONVS.iter().enumerate() {
            conv_inputs[i] = x.clone();
            let (mut y, col) = conv.forward(
                &x,
                batch,
                grid,
                self.slice(l.conv_w[i], conv.weight_len()),
                self.slice(l.conv_b[i], conv.cout),
            );
            relu_in_place(&mut y);
            let gamma = self.slice(l.bn_gamma[i], conv.cout);
            let beta = self.slice(l.bn_beta[i], conv.cout);
            let out = if train {
                let (out, cache) = batchnorm_train(&y, batch, conv.cout, area, gamma, beta);
                bn[i] = Some(cache);
                out
            } else {
                let mut out = y.clone();
                batchnorm_eval(
                    &mut out,
                    conv.cout,
                    area,
                    gamma,
                    beta,
                    &self.buffers[l.bn_mean[i]..][..conv.cout],
                    &self.buffers[l.bn_var[i]..][..conv.cout],
                );
                out
            };
            if train {
                cols[i] = col;
                relu_out[i] = y;
            }
            // The policy conv (stage 3) consumes the trunk output unchanged.
            x = out;
        }
        let policy_features = x;
        let trunk = &conv_inputs[3];

        let dp = self.dense_policy();
        let policy_logits = dp.forward(
            &policy_features,
            batch,
            self.slice(l.policy_w, dp.weight_len()),
            self.slice(l.policy_b, dp.outputs),
        );
        let dh = self.dense_hidden();
        let mut hidden = dh.forward(
            trunk,
            batch,
            self.slice(l.hidden_w, dh.weight_len()),
            self.slice(l.hidden_b, dh.outputs),
        );
        relu_in_place(&mut hidden);
        let dout = self.dense_out();
        let head_raw = dout.forward(
            &hidden,
            batch,
            self.slice(l.out_w, dout.weight_len()),
            self.slice(l.out_b, dout.outputs),
        );
        Ok(Pass {
            batch,
            conv_inputs,
            cols,
            relu_out,
            bn,
            policy_features,
            hidden,
            policy_logits,
            head_raw,
        })
    }

    fn prediction_from_raw(&self, logits: &[f64], raw: &[f64]) -> Prediction {
        let mut policy = [0.0; POLICY_OUTPUTS];
        policy.copy_from_slice(logits);
        softmax_in_place(&mut policy);
        let head = match self.config.head {
            HeadKind::Value => HeadOutput::Value(raw[0].tanh()),
            HeadKind::Outcome => HeadOutput::Outcome(OutcomeHeadOutput {
                wdl: [raw[0], raw[1], raw[2]],
                plies_left_win: raw[3],
                plies_left_loss: raw[4],
            }),
        };
        Prediction { policy, head }
    }

    /// Inference on encoded planes, batch norm in running-statistics mode.
    pub fn forward(&self, planes: &[f64]) -> Result<Prediction> {
        let pass = self.run(planes, 1, false)?;
        Ok(self.prediction_from_raw(&pass.policy_logits, &pass.head_raw))
    }

    /// Inference on a batch of encoded planes.
    pub fn forward_batch(&self, planes: &[f64], batch: usize) -> Result<Vec<Prediction>> {
        let pass = self.run(planes, batch, false)?;
        let outs = self.config.head.outputs();
        Ok((0..batch)
            .map(|b| {
                self.prediction_from_raw(
                    &pass.policy_logits[b * POLICY_OUTPUTS..(b + 1) * POLICY_OUTPUTS],
                    &pass.head_raw[b * outs..(b + 1) * outs],
                )
            })
            .collect())
    }

    pub fn predict(&self, state: &GameState) -> Prediction {
        self.forward(&state.encode())
            .expect("state encoding matches the network's board")
    }

    pub(crate) fn update_running_stats(&mut self, pass: &Pass) {
        let l = &self.layout;
        for (i, conv) in CONVS.iter().enumerate() {
            let cache = pass.bn[i].as_ref().expect("training pass keeps batch-norm stats");
            for c in 0..conv.cout {
                let m = &mut self.buffers[l.bn_mean[i] + c];
                *m = layers::BN_MOMENTUM * *m + (1.0 - layers::BN_MOMENTUM) * cache.mean[c];
                let v = &mut self.buffers[l.bn_var[i] + c];
                *v = layers::BN_MOMENTUM * *v + (1.0 - layers::BN_MOMENTUM) * cache.var[c];
            }
        }
    }
}

/// Player-relative WDL label for a finished game seen from `player`.
pub fn result_target(outcome: &Outcome, player: Player) -> ResultTarget {
    match outcome.winner() {
        None => ResultTarget::Draw,
        Some(w) if w == player => ResultTarget::Win,
        Some(_) => ResultTarget::Loss,
    }
}
