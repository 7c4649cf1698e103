//! Loss, backpropagation and the Nesterov SGD optimizer.

use super::layers::{batchnorm_backward, relu_backward};
use super::{softmax_in_place, HeadKind, HeadOutput, Network, Pass, Prediction, CONVS, POLICY_OUTPUTS};
use crate::error::{Error, Result};
use crate::game::PLY_SCALE;

/// Game result from the side to move's point of view, in head output order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ResultTarget {
    Win,
    Draw,
    Loss,
}

impl ResultTarget {
    pub fn index(&self) -> usize {
        match self {
            ResultTarget::Win => 0,
            ResultTarget::Draw => 1,
            ResultTarget::Loss => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(ResultTarget::Win),
            1 => Some(ResultTarget::Draw),
            2 => Some(ResultTarget::Loss),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    pub planes: Vec<f64>,
    /// Visit distribution over the 8 directions.
    pub policy_target: [f64; POLICY_OUTPUTS],
    pub result: ResultTarget,
    /// Plies from this position to the end of the game.
    pub plies_left: u16,
    /// Reward of the game's outcome for the side to move (value head target).
    pub value_target: f64,
}

/// Coefficients of the loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub policy: f64,
    pub value: f64,
    pub result: f64,
    pub plies: f64,
}

impl LossWeights {
    /// Factor applied to the weighted loss before differentiating. The
    /// coefficients are kept as relative weights, but at a learning rate of
    /// 0.005 a policy weight of 100 (or 20) diverges, so the objective is
    /// divided by the policy weight.
    pub fn objective_scale(&self) -> f64 {
        1.0 / self.policy
    }

    pub fn for_head(head: HeadKind) -> Self {
        match head {
            HeadKind::Value => LossWeights {
                policy: 20.0,
                value: 1.0,
                result: 0.0,
                plies: 0.0,
            },
            HeadKind::Outcome => LossWeights {
                policy: 100.0,
                value: 0.0,
                result: 3.0,
                plies: 1.0,
            },
        }
    }
}

fn cross_entropy(target: &[f64], probs: &[f64]) -> f64 {
    target
        .iter()
        .zip(probs)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, p)| -t * p.max(f64::MIN_POSITIVE).ln())
        .sum()
}

/// Weighted loss of one prediction against one example.
pub fn loss(prediction: &Prediction, example: &TrainingExample, weights: &LossWeights) -> f64 {
    let mut total = weights.policy * cross_entropy(&example.policy_target, &prediction.policy);
    match &prediction.head {
        HeadOutput::Value(v) => total += weights.value * (v - example.value_target).powi(2),
        HeadOutput::Outcome(o) => {
            let mut onehot = [0.0; 3];
            onehot[example.result.index()] = 1.0;
            total += weights.result * cross_entropy(&onehot, &o.probabilities());
            let target = example.plies_left as f64 * PLY_SCALE;
            total += weights.plies
                * match example.result {
                    ResultTarget::Win => (o.plies_left_win - target).powi(2),
                    ResultTarget::Loss => (o.plies_left_loss - target).powi(2),
                    ResultTarget::Draw => 0.0,
                };
        }
    }
    total
}

/// Loss of one example from raw outputs, writing gradients with respect
/// to the policy logits and the raw head outputs.
pub(crate) fn output_gradient(
    head: HeadKind,
    logits: &[f64],
    raw: &[f64],
    example: &TrainingExample,
    weights: &LossWeights,
    dlogits: &mut [f64],
    draw: &mut [f64],
) -> f64 {
    let mut policy = [0.0; POLICY_OUTPUTS];
    policy.copy_from_slice(logits);
    softmax_in_place(&mut policy);
    let mut total = weights.policy * cross_entropy(&example.policy_target, &policy);
    let target_mass: f64 = example.policy_target.iter().sum();
    for k in 0..POLICY_OUTPUTS {
        dlogits[k] = weights.policy * (target_mass * policy[k] - example.policy_target[k]);
    }
    match head {
        HeadKind::Value => {
            let v = raw[0].tanh();
            let err = v - example.value_target;
            total += weights.value * err * err;
            draw[0] = weights.value * 2.0 * err * (1.0 - v * v);
        }
        HeadKind::Outcome => {
            let mut p = [raw[0], raw[1], raw[2]];
            softmax_in_place(&mut p);
            let r = example.result.index();
            total -= weights.result * p[r].max(f64::MIN_POSITIVE).ln();
            for k in 0..3 {
                draw[k] = weights.result * (p[k] - if k == r { 1.0 } else { 0.0 });
            }
            draw[3] = 0.0;
            draw[4] = 0.0;
            let target = example.plies_left as f64 * PLY_SCALE;
            let slot = match example.result {
                ResultTarget::Win => Some(3),
                ResultTarget::Loss => Some(4),
                ResultTarget::Draw => None,
            };
            if let Some(s) = slot {
                let err = raw[s] - target;
                total += weights.plies * err * err;
                draw[s] = weights.plies * 2.0 * err;
            }
        }
    }
    total
}

fn stack_planes(net: &Network, batch: &[TrainingExample]) -> Result<Vec<f64>> {
    let want = net.input_len();
    let mut planes = Vec::with_capacity(batch.len() * want);
    for ex in batch {
        if ex.planes.len() != want {
            return Err(Error::Shape {
                expected: want,
                actual: ex.planes.len(),
            });
        }
        planes.extend_from_slice(&ex.planes);
    }
    Ok(planes)
}

impl Network {
    /// Training objective on a batch: the mean weighted loss times
    /// [`LossWeights::objective_scale`], batch-norm in training mode.
    pub fn batch_loss(&self, batch: &[TrainingExample]) -> Result<f64> {
        Ok(self.loss_and_grad_inner(batch, false)?.0)
    }

    /// Training objective and its gradient over the flat parameter vector.
    pub fn loss_and_grad(&self, batch: &[TrainingExample]) -> Result<(f64, Vec<f64>)> {
        let (loss, grad, _) = self.loss_and_grad_inner(batch, true)?;
        Ok((loss, grad))
    }

    fn loss_and_grad_inner(&self, batch: &[TrainingExample], want_grad: bool) -> Result<(f64, Vec<f64>, Pass)> {
        if batch.is_empty() {
            return Err(Error::contract("training batch is empty"));
        }
        let n = batch.len();
        let planes = stack_planes(self, batch)?;
        let pass = self.run(&planes, n, true)?;
        let weights = LossWeights::for_head(self.config.head);
        let outs = self.config.head.outputs();
        let mut dlogits = vec![0.0; n * POLICY_OUTPUTS];
        let mut draw = vec![0.0; n * outs];
        let mut total = 0.0;
        for (b, ex) in batch.iter().enumerate() {
            total += output_gradient(
                self.config.head,
                &pass.policy_logits[b * POLICY_OUTPUTS..(b + 1) * POLICY_OUTPUTS],
                &pass.head_raw[b * outs..(b + 1) * outs],
                ex,
                &weights,
                &mut dlogits[b * POLICY_OUTPUTS..(b + 1) * POLICY_OUTPUTS],
                &mut draw[b * outs..(b + 1) * outs],
            );
        }
        let scale = weights.objective_scale() / n as f64;
        if !want_grad {
            return Ok((total * scale, Vec::new(), pass));
        }
        dlogits.iter_mut().chain(draw.iter_mut()).for_each(|g| *g *= scale);
        let grad = self.backward(&pass, &dlogits, &draw);
        Ok((total * scale, grad, pass))
    }

    fn backward(&self, pass: &Pass, dlogits: &[f64], dhead: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let n = pass.batch;
        let grid = self.grid();
        let area = grid.area();
        let mut grad = vec![0.0; self.params.len()];

        // Second head.
        let dense_out = self.dense_out();
        let (dw, rest) = grad[l.out_w..].split_at_mut(dense_out.weight_len());
        let mut dhidden = dense_out.backward(
            dhead,
            &pass.hidden,
            n,
            self.slice(l.out_w, dense_out.weight_len()),
            dw,
            &mut rest[..dense_out.outputs],
        );
        relu_backward(&mut dhidden, &pass.hidden);
        let dense_hidden = self.dense_hidden();
        let (dw, rest) = grad[l.hidden_w..].split_at_mut(dense_hidden.weight_len());
        let dtrunk = dense_hidden.backward(
            &dhidden,
            &pass.conv_inputs[3],
            n,
            self.slice(l.hidden_w, dense_hidden.weight_len()),
            dw,
            &mut rest[..dense_hidden.outputs],
        );

        // Policy head.
        let dense_policy = self.dense_policy();
        let (dw, rest) = grad[l.policy_w..].split_at_mut(dense_policy.weight_len());
        let mut dx = dense_policy.backward(
            dlogits,
            &pass.policy_features,
            n,
            self.slice(l.policy_w, dense_policy.weight_len()),
            dw,
            &mut rest[..dense_policy.outputs],
        );

        for i in (0..CONVS.len()).rev() {
            let conv = CONVS[i];
            if i == 2 {
                // Trunk output feeds both the policy conv and the second head.
                for (a, b) in dx.iter_mut().zip(&dtrunk) {
                    *a += b;
                }
            }
            let cache = pass.bn[i].as_ref().expect("training pass keeps batch-norm caches");
            let (dgamma, dbeta) = grad[l.bn_gamma[i]..].split_at_mut(conv.cout);
            let mut dy = batchnorm_backward(
                &dx,
                cache,
                n,
                conv.cout,
                area,
                self.slice(l.bn_gamma[i], conv.cout),
                dgamma,
                &mut dbeta[..conv.cout],
            );
            relu_backward(&mut dy, &pass.relu_out[i]);
            let (dw, db) = grad[l.conv_w[i]..].split_at_mut(conv.weight_len());
            dx = conv.backward(
                &dy,
                &pass.cols[i],
                n,
                grid,
                self.slice(l.conv_w[i], conv.weight_len()),
                dw,
                &mut db[..conv.cout],
                i > 0,
            );
        }
        grad
    }

    /// One optimizer step on the mean loss of `batch`; also folds the
    /// batch statistics into the running batch-norm averages. Returns the
    /// loss before the step.
    pub fn train_step(&mut self, batch: &[TrainingExample], opt: &mut Sgd) -> Result<f64> {
        let (loss, grad, pass) = self.loss_and_grad_inner(batch, true)?;
        self.update_running_stats(&pass);
        opt.step(&mut self.params, &grad)?;
        Ok(loss)
    }
}

/// SGD with Nesterov momentum: `v = mu * v + g; p -= lr * (g + mu * v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64, num_params: usize) -> Self {
        Sgd {
            lr,
            momentum,
            velocity: vec![0.0; num_params],
        }
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub(crate) fn with_velocity(lr: f64, momentum: f64, velocity: Vec<f64>) -> Self {
        Sgd { lr, momentum, velocity }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.velocity.len() || grad.len() != params.len() {
            return Err(Error::Shape {
                expected: self.velocity.len(),
                actual: grad.len(),
            });
        }
        for ((p, v), g) in params.iter_mut().zip(&mut self.velocity).zip(grad) {
            *v = self.momentum * *v + g;
            *p -= self.lr * (g + self.momentum * *v);
        }
        Ok(())
    }
}
