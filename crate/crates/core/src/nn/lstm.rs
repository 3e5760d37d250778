//! LSTM cell, unrolled sequence runner, and the bidirectional encoder.
//!
//! Gate layout inside the `4H` pre-activation vector is `[i, f, g, o]`:
//! input, forget, candidate, output.

use rand::Rng;

use super::mlp::sigmoid;
use super::tensor::{vec_mat_acc, vec_mat_backward};
use super::{Gradients, Matrix, ParamId, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Lstm {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

/// Everything a single step needs for its backward pass.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-activation gates `[i, f, g, o]`, length `4H`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Gradients flowing out of one step.
#[derive(Debug, Clone)]
pub struct StepGrads {
    pub dx: Vec<f64>,
    pub dh_prev: Vec<f64>,
    pub dc_prev: Vec<f64>,
}

impl Lstm {
    /// Uniform `±1/√H` init, forget-gate bias set to 1.
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let wx = params.add(
            format!("{prefix}.wx"),
            Matrix::uniform(input, 4 * hidden, bound, rng),
        );
        let wh = params.add(
            format!("{prefix}.wh"),
            Matrix::uniform(hidden, 4 * hidden, bound, rng),
        );
        let mut bias = Matrix::uniform(1, 4 * hidden, bound, rng);
        bias.as_mut_slice()[hidden..2 * hidden].fill(1.0);
        let b = params.add(format!("{prefix}.b"), bias);
        Self {
            wx,
            wh,
            b,
            input,
            hidden,
        }
    }

    pub fn step(
        &self,
        params: &ParamSet,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> Result<StepCache> {
        let h = self.hidden;
        if x.len() != self.input {
            return Err(Error::dim("lstm input", self.input, x.len()));
        }
        if h_prev.len() != h {
            return Err(Error::dim("lstm hidden state", h, h_prev.len()));
        }
        if c_prev.len() != h {
            return Err(Error::dim("lstm cell state", h, c_prev.len()));
        }
        let mut z = params.value(self.b).as_slice().to_vec();
        vec_mat_acc(x, params.value(self.wx), &mut z);
        vec_mat_acc(h_prev, params.value(self.wh), &mut z);

        for v in &mut z[..2 * h] {
            *v = sigmoid(*v);
        }
        for v in &mut z[2 * h..3 * h] {
            *v = v.tanh();
        }
        for v in &mut z[3 * h..] {
            *v = sigmoid(*v);
        }
        let (i, rest) = z.split_at(h);
        let (f, rest) = rest.split_at(h);
        let (g, o) = rest.split_at(h);

        let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h_out: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
        Ok(StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates: z,
            c,
            tanh_c,
            h: h_out,
        })
    }

    /// Backward through one step given upstream `dh` and `dc`.
    pub fn step_backward(
        &self,
        params: &ParamSet,
        cache: &StepCache,
        dh: &[f64],
        dc: &[f64],
        grads: &mut Gradients,
    ) -> StepGrads {
        let h = self.hidden;
        let (i, rest) = cache.gates.split_at(h);
        let (f, rest) = rest.split_at(h);
        let (g, o) = rest.split_at(h);

        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let d_o = dh[k] * cache.tanh_c[k];
            let dc_total = dc[k] + dh[k] * o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
            let d_i = dc_total * g[k];
            let d_f = dc_total * cache.c_prev[k];
            let d_g = dc_total * i[k];
            dc_prev[k] = dc_total * f[k];
            dz[k] = d_i * i[k] * (1.0 - i[k]);
            dz[h + k] = d_f * f[k] * (1.0 - f[k]);
            dz[2 * h + k] = d_g * (1.0 - g[k] * g[k]);
            dz[3 * h + k] = d_o * o[k] * (1.0 - o[k]);
        }

        let mut dx = vec![0.0; self.input];
        let mut dh_prev = vec![0.0; h];
        vec_mat_backward(&cache.x, params.value(self.wx), &dz, Some(&mut dx), grads.get_mut(self.wx));
        vec_mat_backward(
            &cache.h_prev,
            params.value(self.wh),
            &dz,
            Some(&mut dh_prev),
            grads.get_mut(self.wh),
        );
        for (gb, d) in grads.get_mut(self.b).as_mut_slice().iter_mut().zip(&dz) {
            *gb += d;
        }
        StepGrads {
            dx,
            dh_prev,
            dc_prev,
        }
    }

    /// Runs the cell over `seq` from the given initial state.
    pub fn run(
        &self,
        params: &ParamSet,
        seq: &[Vec<f64>],
        h0: &[f64],
        c0: &[f64],
    ) -> Result<Vec<StepCache>> {
        let mut caches: Vec<StepCache> = Vec::with_capacity(seq.len());
        for x in seq {
            let cache = match caches.last() {
                Some(prev) => self.step(params, x, &prev.h, &prev.c)?,
                None => self.step(params, x, h0, c0)?,
            };
            caches.push(cache);
        }
        Ok(caches)
    }

    /// Backpropagates a gradient on the final hidden state only.
    /// Returns per-step input gradients plus `(dh0, dc0)`.
    pub fn run_backward_final(
        &self,
        params: &ParamSet,
        caches: &[StepCache],
        dh_final: &[f64],
        grads: &mut Gradients,
    ) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let mut dh = dh_final.to_vec();
        let mut dc = vec![0.0; self.hidden];
        let mut dxs = vec![Vec::new(); caches.len()];
        for (t, cache) in caches.iter().enumerate().rev() {
            let sg = self.step_backward(params, cache, &dh, &dc, grads);
            dxs[t] = sg.dx;
            dh = sg.dh_prev;
            dc = sg.dc_prev;
        }
        (dxs, dh, dc)
    }
}

/// Forward and backward LSTMs whose final hidden states are averaged.
#[derive(Debug, Clone, Copy)]
pub struct BiLstm {
    pub forward: Lstm,
    pub backward: Lstm,
}

#[derive(Debug, Clone)]
pub struct BiLstmTrace {
    pub forward: Vec<StepCache>,
    pub backward: Vec<StepCache>,
    pub output: Vec<f64>,
}

impl BiLstm {
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            forward: Lstm::new(params, &format!("{prefix}.fwd"), input, hidden, rng),
            backward: Lstm::new(params, &format!("{prefix}.bwd"), input, hidden, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden
    }

    pub fn encode(&self, params: &ParamSet, seq: &[Vec<f64>]) -> Result<BiLstmTrace> {
        if seq.is_empty() {
            return Err(Error::EmptySequence);
        }
        let zeros = vec![0.0; self.hidden()];
        let fwd = self.forward.run(params, seq, &zeros, &zeros)?;
        let reversed: Vec<Vec<f64>> = seq.iter().rev().cloned().collect();
        let bwd = self.backward.run(params, &reversed, &zeros, &zeros)?;
        let hf = &fwd.last().unwrap().h;
        let hb = &bwd.last().unwrap().h;
        let output = hf.iter().zip(hb).map(|(a, b)| 0.5 * (a + b)).collect();
        Ok(BiLstmTrace {
            forward: fwd,
            backward: bwd,
            output,
        })
    }

    /// Accumulates parameter gradients for `d loss / d output`.
    pub fn backward(
        &self,
        params: &ParamSet,
        trace: &BiLstmTrace,
        d_out: &[f64],
        grads: &mut Gradients,
    ) {
        let half: Vec<f64> = d_out.iter().map(|d| 0.5 * d).collect();
        self.forward
            .run_backward_final(params, &trace.forward, &half, grads);
        self.backward
            .run_backward_final(params, &trace.backward, &half, grads);
    }
}
