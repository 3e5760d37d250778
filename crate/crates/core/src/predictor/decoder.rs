use rand::Rng;

use crate::data::NormTransform;
use crate::error::{Error, Result};
use crate::nn::{Affine, Gradients, Lstm, ParamSet, StepCache};
use crate::{Point, DECODER_HIDDEN, PRED_LEN};

/// LSTM decoder emitting one 2-D displacement per step.
///
/// The initial hidden state is `[R_H, R_F]` (or `[R_H, R_F*]`), the initial
/// cell state is zero. Step inputs are the previous displacement.
#[derive(Debug, Clone)]
pub struct TrajectoryDecoder {
    pub params: ParamSet,
    pub lstm: Lstm,
    pub head: Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feed {
    /// Inputs are the ground-truth previous displacements.
    Teacher,
    /// Inputs are the decoder's own previous outputs (inference mode).
    Own,
}

#[derive(Debug, Clone)]
pub struct DecodeTrace {
    pub steps: Vec<StepCache>,
    pub displacements: Vec<Point>,
    pub feed: Feed,
}

impl DecodeTrace {
    /// Positions relative to the last observed point.
    pub fn positions(&self) -> [Point; PRED_LEN] {
        cumulative(&self.displacements)
    }
}

pub(crate) fn cumulative(disp: &[Point]) -> [Point; PRED_LEN] {
    let mut out = [[0.0; 2]; PRED_LEN];
    let mut acc = [0.0, 0.0];
    for (o, d) in out.iter_mut().zip(disp) {
        acc = [acc[0] + d[0], acc[1] + d[1]];
        *o = acc;
    }
    out
}

/// Displacements of a normalized future, the first measured from the origin.
pub(crate) fn future_displacements(fut: &[Point; PRED_LEN]) -> [Point; PRED_LEN] {
    let mut out = [[0.0; 2]; PRED_LEN];
    let mut prev = [0.0, 0.0];
    for (o, p) in out.iter_mut().zip(fut) {
        *o = [p[0] - prev[0], p[1] - prev[1]];
        prev = *p;
    }
    out
}

impl TrajectoryDecoder {
    pub fn new<R: Rng>(rng: &mut R) -> Self {
        let mut params = ParamSet::new();
        let lstm = Lstm::new(&mut params, "lstm", 2, DECODER_HIDDEN, rng);
        let head = Affine::new(&mut params, "head", DECODER_HIDDEN, 2, rng);
        Self { params, lstm, head }
    }

    /// Runs 12 steps from `h0`. `first_input` is the last observed
    /// displacement; with [`Feed::Teacher`] the true displacements `truth`
    /// drive the remaining steps.
    pub fn run(
        &self,
        params: &ParamSet,
        h0: &[f64],
        first_input: Point,
        feed: Feed,
        truth: Option<&[Point; PRED_LEN]>,
    ) -> Result<DecodeTrace> {
        if h0.len() != DECODER_HIDDEN {
            return Err(Error::dim("decoder initial state", DECODER_HIDDEN, h0.len()));
        }
        if feed == Feed::Teacher && truth.is_none() {
            return Err(Error::Config("teacher forcing needs target displacements".into()));
        }
        let c0 = vec![0.0; DECODER_HIDDEN];
        let mut steps: Vec<StepCache> = Vec::with_capacity(PRED_LEN);
        let mut displacements = Vec::with_capacity(PRED_LEN);
        let mut input = first_input;
        for t in 0..PRED_LEN {
            let cache = match steps.last() {
                Some(prev) => self.lstm.step(params, &input, &prev.h, &prev.c)?,
                None => self.lstm.step(params, &input, h0, &c0)?,
            };
            let y = self.head.forward(params, &cache.h)?;
            let d = [y[0], y[1]];
            displacements.push(d);
            steps.push(cache);
            input = match feed {
                Feed::Own => d,
                Feed::Teacher => truth.unwrap()[t],
            };
        }
        Ok(DecodeTrace {
            steps,
            displacements,
            feed,
        })
    }

    /// Backward pass from gradients on the (local-frame) positions.
    /// Returns `d loss / d h0`.
    pub fn backward(
        &self,
        params: &ParamSet,
        trace: &DecodeTrace,
        d_positions: &[Point],
        grads: &mut Gradients,
    ) -> Vec<f64> {
        // positions are prefix sums of displacements
        let mut d_disp = vec![[0.0; 2]; PRED_LEN];
        let mut acc = [0.0, 0.0];
        for t in (0..PRED_LEN).rev() {
            acc = [acc[0] + d_positions[t][0], acc[1] + d_positions[t][1]];
            d_disp[t] = acc;
        }

        let mut dh_next = vec![0.0; DECODER_HIDDEN];
        let mut dc_next = vec![0.0; DECODER_HIDDEN];
        let mut dx_next = [0.0, 0.0];
        for t in (0..PRED_LEN).rev() {
            let cache = &trace.steps[t];
            let mut dy = d_disp[t];
            if trace.feed == Feed::Own {
                dy[0] += dx_next[0];
                dy[1] += dx_next[1];
            }
            let mut dh = self.head.backward(params, &cache.h, &dy, grads);
            for (a, b) in dh.iter_mut().zip(&dh_next) {
                *a += b;
            }
            let sg = self.lstm.step_backward(params, cache, &dh, &dc_next, grads);
            dx_next = [sg.dx[0], sg.dx[1]];
            dh_next = sg.dh_prev;
            dc_next = sg.dc_prev;
        }
        dh_next
    }

    /// Inference: world-frame trajectory for the given initial state.
    pub fn decode(
        &self,
        h0: &[f64],
        last_displacement: Point,
        transform: &NormTransform,
    ) -> Result<[Point; PRED_LEN]> {
        let trace = self.run(&self.params, h0, last_displacement, Feed::Own, None)?;
        let mut pos = trace.positions();
        pos.iter_mut().for_each(|p| *p = transform.to_world(*p));
        Ok(pos)
    }
}
