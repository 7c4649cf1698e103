//! Dense kernels behind the network: 3x3 same-padded convolution via
//! im2col, batch normalization, fully connected layers.
//!
//! All tensors are flat `f64` slices in `batch, channel, rank, file` order.

/// `c = a * b + beta * c` with optional transposes; `a` is `m x k`, `b` is
/// `k x n` after transposition, all row-major.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k, "gemm lhs size");
    assert_eq!(b.len(), k * n, "gemm rhs size");
    assert_eq!(c.len(), m * n, "gemm output size");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Spatial extent of one board.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Grid {
    pub h: usize,
    pub w: usize,
}

impl Grid {
    pub fn area(&self) -> usize {
        self.h * self.w
    }
}

/// Unfolds one `channels x h x w` image into a `(channels * 9) x (h * w)`
/// patch matrix with zero padding.
fn im2col(image: &[f64], channels: usize, grid: Grid, col: &mut [f64]) {
    let area = grid.area();
    for c in 0..channels {
        let plane = &image[c * area..(c + 1) * area];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((c * 9) + ky * 3 + kx) * area..][..area];
                for y in 0..grid.h {
                    let sy = y as isize + ky as isize - 1;
                    for x in 0..grid.w {
                        let sx = x as isize + kx as isize - 1;
                        row[y * grid.w + x] = if sy >= 0 && sx >= 0 && (sy as usize) < grid.h && (sx as usize) < grid.w
                        {
                            plane[sy as usize * grid.w + sx as usize]
                        } else {
                            0.0
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates patch gradients back into an image.
fn col2im(col: &[f64], channels: usize, grid: Grid, image: &mut [f64]) {
    let area = grid.area();
    for c in 0..channels {
        let plane = &mut image[c * area..(c + 1) * area];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[((c * 9) + ky * 3 + kx) * area..][..area];
                for y in 0..grid.h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy as usize >= grid.h {
                        continue;
                    }
                    for x in 0..grid.w {
                        let sx = x as isize + kx as isize - 1;
                        if sx >= 0 && (sx as usize) < grid.w {
                            plane[sy as usize * grid.w + sx as usize] += row[y * grid.w + x];
                        }
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Conv {
    pub cin: usize,
    pub cout: usize,
}

impl Conv {
    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * 9
    }

    /// Returns the output and the per-example patch matrices (kept for backward).
    pub fn forward(
        &self,
        input: &[f64],
        batch: usize,
        grid: Grid,
        weight: &[f64],
        bias: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let area = grid.area();
        let col_len = self.cin * 9 * area;
        let mut cols = vec![0.0; batch * col_len];
        let mut out = vec![0.0; batch * self.cout * area];
        for b in 0..batch {
            let col = &mut cols[b * col_len..(b + 1) * col_len];
            im2col(
                &input[b * self.cin * area..(b + 1) * self.cin * area],
                self.cin,
                grid,
                col,
            );
            let o = &mut out[b * self.cout * area..(b + 1) * self.cout * area];
            for (co, chunk) in o.chunks_exact_mut(area).enumerate() {
                chunk.fill(bias[co]);
            }
            gemm(self.cout, self.cin * 9, area, weight, false, col, false, 1.0, o);
        }
        (out, cols)
    }

    /// Accumulates weight and bias gradients; returns the input gradient.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        dout: &[f64],
        cols: &[f64],
        batch: usize,
        grid: Grid,
        weight: &[f64],
        dweight: &mut [f64],
        dbias: &mut [f64],
        need_input_grad: bool,
    ) -> Vec<f64> {
        let area = grid.area();
        let col_len = self.cin * 9 * area;
        let mut dinput = vec![0.0; if need_input_grad { batch * self.cin * area } else { 0 }];
        let mut dcol = vec![0.0; col_len];
        for b in 0..batch {
            let d = &dout[b * self.cout * area..(b + 1) * self.cout * area];
            for (co, chunk) in d.chunks_exact(area).enumerate() {
                dbias[co] += chunk.iter().sum::<f64>();
            }
            let col = &cols[b * col_len..(b + 1) * col_len];
            gemm(self.cout, area, self.cin * 9, d, false, col, true, 1.0, dweight);
            if need_input_grad {
                gemm(self.cin * 9, self.cout, area, weight, true, d, false, 0.0, &mut dcol);
                col2im(
                    &dcol,
                    self.cin,
                    grid,
                    &mut dinput[b * self.cin * area..(b + 1) * self.cin * area],
                );
            }
        }
        dinput
    }
}

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.9;

/// Per-channel statistics of one training-mode batch norm call.
pub(crate) struct BnCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

pub(crate) fn batchnorm_train(
    x: &[f64],
    batch: usize,
    channels: usize,
    area: usize,
    gamma: &[f64],
    beta: &[f64],
) -> (Vec<f64>, BnCache) {
    let m = (batch * area) as f64;
    let mut mean = vec![0.0; channels];
    let mut var = vec![0.0; channels];
    for b in 0..batch {
        for c in 0..channels {
            let s = &x[(b * channels + c) * area..][..area];
            mean[c] += s.iter().sum::<f64>();
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    for b in 0..batch {
        for c in 0..channels {
            let s = &x[(b * channels + c) * area..][..area];
            var[c] += s.iter().map(|&v| (v - mean[c]) * (v - mean[c])).sum::<f64>();
        }
    }
    var.iter_mut().for_each(|v| *v /= m);
    let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let mut xhat = vec![0.0; x.len()];
    let mut y = vec![0.0; x.len()];
    for b in 0..batch {
        for c in 0..channels {
            let base = (b * channels + c) * area;
            for i in base..base + area {
                xhat[i] = (x[i] - mean[c]) * inv_std[c];
                y[i] = gamma[c] * xhat[i] + beta[c];
            }
        }
    }
    (
        y,
        BnCache {
            xhat,
            inv_std,
            mean,
            var,
        },
    )
}

pub(crate) fn batchnorm_eval(
    x: &mut [f64],
    channels: usize,
    area: usize,
    gamma: &[f64],
    beta: &[f64],
    running_mean: &[f64],
    running_var: &[f64],
) {
    for (i, chunk) in x.chunks_exact_mut(area).enumerate() {
        let c = i % channels;
        let scale = gamma[c] / (running_var[c] + BN_EPS).sqrt();
        let shift = beta[c] - running_mean[c] * scale;
        chunk.iter_mut().for_each(|v| *v = *v * scale + shift);
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn batchnorm_backward(
    dy: &[f64],
    cache: &BnCache,
    batch: usize,
    channels: usize,
    area: usize,
    gamma: &[f64],
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) -> Vec<f64> {
    let m = (batch * area) as f64;
    let mut sum_dxhat = vec![0.0; channels];
    let mut sum_dxhat_xhat = vec![0.0; channels];
    for b in 0..batch {
        for c in 0..channels {
            let base = (b * channels + c) * area;
            for i in base..base + area {
                dbeta[c] += dy[i];
                dgamma[c] += dy[i] * cache.xhat[i];
                let dxhat = dy[i] * gamma[c];
                sum_dxhat[c] += dxhat;
                sum_dxhat_xhat[c] += dxhat * cache.xhat[i];
            }
        }
    }
    let mut dx = vec![0.0; dy.len()];
    for b in 0..batch {
        for c in 0..channels {
            let base = (b * channels + c) * area;
            for i in base..base + area {
                let dxhat = dy[i] * gamma[c];
                dx[i] = cache.inv_std[c] / m * (m * dxhat - sum_dxhat[c] - cache.xhat[i] * sum_dxhat_xhat[c]);
            }
        }
    }
    dx
}

pub(crate) fn relu_in_place(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Zeroes gradient entries whose forward activation was clipped.
pub(crate) fn relu_backward(dy: &mut [f64], activated: &[f64]) {
    for (d, &a) in dy.iter_mut().zip(activated) {
        if a <= 0.0 {
            *d = 0.0;
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Dense {
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn weight_len(&self) -> usize {
        self.inputs * self.outputs
    }

    pub fn forward(&self, input: &[f64], batch: usize, weight: &[f64], bias: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(batch * self.outputs);
        for _ in 0..batch {
            out.extend_from_slice(bias);
        }
        gemm(
            batch,
            self.inputs,
            self.outputs,
            input,
            false,
            weight,
            true,
            1.0,
            &mut out,
        );
        out
    }

    pub fn backward(
        &self,
        dout: &[f64],
        input: &[f64],
        batch: usize,
        weight: &[f64],
        dweight: &mut [f64],
        dbias: &mut [f64],
    ) -> Vec<f64> {
        for row in dout.chunks_exact(self.outputs) {
            for (db, &d) in dbias.iter_mut().zip(row) {
                *db += d;
            }
        }
        gemm(self.outputs, batch, self.inputs, dout, true, input, false, 1.0, dweight);
        let mut dinput = vec![0.0; batch * self.inputs];
        gemm(
            batch,
            self.outputs,
            self.inputs,
            dout,
            false,
            weight,
            false,
            0.0,
            &mut dinput,
        );
        dinput
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_transposes() {
        // a = [[1,2,3],[4,5,6]], b = [[1,0],[0,1],[1,1]]
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut c = [0.0; 4];
        gemm(2, 3, 2, &a, false, &b, false, 0.0, &mut c);
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);
        let at = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        let bt = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let mut c2 = [1.0; 4];
        gemm(2, 3, 2, &at, true, &bt, true, 1.0, &mut c2);
        assert_eq!(c2, [5.0, 6.0, 11.0, 12.0]);
    }

    #[test]
    fn conv_matches_direct_sum() {
        let grid = Grid { h: 3, w: 2 };
        let conv = Conv { cin: 2, cout: 3 };
        let input: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let weight: Vec<f64> = (0..conv.weight_len()).map(|i| (i as f64 * 0.11).cos()).collect();
        let bias = [0.1, -0.2, 0.3];
        let (out, _) = conv.forward(&input, 1, grid, &weight, &bias);
        for co in 0..3 {
            for y in 0..3i32 {
                for x in 0..2i32 {
                    let mut acc = bias[co];
                    for ci in 0..2 {
                        for ky in 0..3i32 {
                            for kx in 0..3i32 {
                                let (sy, sx) = (y + ky - 1, x + kx - 1);
                                if (0..3).contains(&sy) && (0..2).contains(&sx) {
                                    acc += weight[((co * 2 + ci) * 3 + ky as usize) * 3 + kx as usize]
                                        * input[ci * 6 + sy as usize * 2 + sx as usize];
                                }
                            }
                        }
                    }
                    let got = out[co * 6 + y as usize * 2 + x as usize];
                    assert!((got - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn batchnorm_normalizes() {
        let x: Vec<f64> = (0..24).map(|i| i as f64).collect();
        let (y, cache) = batchnorm_train(&x, 2, 2, 6, &[1.0, 2.0], &[0.0, 1.0]);
        for c in 0..2 {
            let vals: Vec<f64> = (0..2)
                .flat_map(|b| y[(b * 2 + c) * 6..(b * 2 + c + 1) * 6].to_vec())
                .collect();
            let mean = vals.iter().sum::<f64>() / 12.0;
            assert!((mean - c as f64).abs() < 1e-12);
        }
        assert_eq!(cache.mean.len(), 2);
    }
}
