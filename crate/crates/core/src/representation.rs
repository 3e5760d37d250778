//! Past/future trajectory encoders and their reconstruction pretraining.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{normalize, TrackWindow};
use crate::error::{Error, Result};
use crate::nn::{exp_l2_loss, Adam, AdamConfig, BiLstm, BiLstmTrace, Gradients, ParamSet};
use crate::predictor::{future_displacements, Feed, TrajectoryDecoder};
use crate::train_util::{reduce_fixed_order, shuffled_indices, sub_seed};
use crate::{Point, OBS_LEN, PRED_LEN, REP_DIM};

/// Deep history and future features of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationPair {
    pub history: Vec<f64>,
    pub future: Vec<f64>,
}

impl RepresentationPair {
    pub fn concat(&self) -> Vec<f64> {
        let mut v = self.history.clone();
        v.extend_from_slice(&self.future);
        v
    }
}

/// Per-step displacement inputs; the first step is zero.
pub fn displacement_inputs(positions: &[Point]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(positions.len());
    out.push(vec![0.0, 0.0]);
    for w in positions.windows(2) {
        out.push(vec![w[1][0] - w[0][0], w[1][1] - w[0][1]]);
    }
    out
}

/// BiLSTM over displacements of a fixed-length position sequence.
#[derive(Debug, Clone)]
pub struct SequenceEncoder {
    pub params: ParamSet,
    pub net: BiLstm,
    pub steps: usize,
}

impl SequenceEncoder {
    pub fn new<R: Rng>(steps: usize, rng: &mut R) -> Self {
        let mut params = ParamSet::new();
        let net = BiLstm::new(&mut params, "bilstm", 2, REP_DIM, rng);
        Self { params, net, steps }
    }

    pub fn trace(&self, params: &ParamSet, positions: &[Point]) -> Result<BiLstmTrace> {
        if positions.len() != self.steps {
            return Err(Error::dim("encoder sequence length", self.steps, positions.len()));
        }
        self.net.encode(params, &displacement_inputs(positions))
    }

    pub fn encode(&self, positions: &[Point]) -> Result<Vec<f64>> {
        Ok(self.trace(&self.params, positions)?.output)
    }
}

/// Encoders `f_H`, `f_F` and the decoder used to pretrain them.
#[derive(Debug, Clone)]
pub struct EncoderBundle {
    pub past: SequenceEncoder,
    pub future: SequenceEncoder,
    pub decoder: TrajectoryDecoder,
}

impl EncoderBundle {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 1));
        let past = SequenceEncoder::new(OBS_LEN, &mut rng);
        let future = SequenceEncoder::new(PRED_LEN, &mut rng);
        let decoder = TrajectoryDecoder::new(&mut rng);
        Self {
            past,
            future,
            decoder,
        }
    }

    /// `R_H` of 8 normalized observed positions.
    pub fn encode_past(&self, obs: &[Point]) -> Result<Vec<f64>> {
        self.past.encode(obs)
    }

    /// `R_F` of 12 normalized future positions.
    pub fn encode_future(&self, fut: &[Point]) -> Result<Vec<f64>> {
        self.future.encode(fut)
    }

    /// Both representations of a window (normalized internally).
    pub fn represent(&self, window: &TrackWindow) -> Result<RepresentationPair> {
        let (w, _) = normalize(window);
        Ok(RepresentationPair {
            history: self.encode_past(&w.obs)?,
            future: self.encode_future(&w.fut)?,
        })
    }
}

pub(crate) fn last_displacement(obs: &[Point; OBS_LEN]) -> Point {
    let a = obs[OBS_LEN - 2];
    let b = obs[OBS_LEN - 1];
    [b[0] - a[0], b[1] - a[1]]
}

/// Gradient buffers for the three pretrained components.
#[derive(Debug, Clone)]
pub struct PretrainGrads {
    pub past: Gradients,
    pub future: Gradients,
    pub decoder: Gradients,
}

impl PretrainGrads {
    fn zeros(b: &EncoderBundle) -> Self {
        Self {
            past: b.past.params.zeroed_gradients(),
            future: b.future.params.zeroed_gradients(),
            decoder: b.decoder.params.zeroed_gradients(),
        }
    }

    fn add(&mut self, o: &Self) {
        self.past.add_assign(&o.past);
        self.future.add_assign(&o.future);
        self.decoder.add_assign(&o.decoder);
    }

    fn scale(&mut self, s: f64) {
        self.past.scale(s);
        self.future.scale(s);
        self.decoder.scale(s);
    }
}

/// Teacher-forced reconstruction loss of one normalized window from `[R_H, R_F]`.
/// Accumulates gradients when `grads` is given.
pub fn reconstruction_loss(
    past: (&SequenceEncoder, &ParamSet),
    future: (&SequenceEncoder, &ParamSet),
    decoder: (&TrajectoryDecoder, &ParamSet),
    window: &TrackWindow,
    grads: Option<&mut PretrainGrads>,
) -> Result<f64> {
    let ht = past.0.trace(past.1, &window.obs)?;
    let ft = future.0.trace(future.1, &window.fut)?;
    let mut h0 = ht.output.clone();
    h0.extend_from_slice(&ft.output);
    let truth = future_displacements(&window.fut);
    let trace = decoder.0.run(
        decoder.1,
        &h0,
        last_displacement(&window.obs),
        Feed::Teacher,
        Some(&truth),
    )?;
    let (loss, d_pos) = exp_l2_loss(&trace.positions(), &window.fut)?;
    if let Some(g) = grads {
        let dh0 = decoder.0.backward(decoder.1, &trace, &d_pos, &mut g.decoder);
        past.0.net.backward(past.1, &ht, &dh0[..REP_DIM], &mut g.past);
        future.0.net.backward(future.1, &ft, &dh0[REP_DIM..], &mut g.future);
    }
    Ok(loss)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub adam: AdamConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            patience: 5,
            validation_fraction: 0.1,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub validation: Option<f64>,
}

/// Jointly trains `f_H`, `f_F` and a decoder to reconstruct the future from
/// `[R_H, R_F]`. Returns the parameters with the best validation loss.
pub fn pretrain_representations(
    windows: &[TrackWindow],
    config: &PretrainConfig,
    seed: u64,
) -> Result<(EncoderBundle, Vec<EpochLoss>)> {
    if windows.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let normalized: Vec<TrackWindow> = windows.iter().map(|w| normalize(w).0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 2));
    let order = shuffled_indices(normalized.len(), &mut rng);
    let n_val = if normalized.len() >= 10 {
        ((normalized.len() as f64) * config.validation_fraction).round() as usize
    } else {
        0
    };
    let (val_idx, train_idx) = order.split_at(n_val);
    let train: Vec<&TrackWindow> = train_idx.iter().map(|&i| &normalized[i]).collect();
    let val: Vec<&TrackWindow> = val_idx.iter().map(|&i| &normalized[i]).collect();

    let mut bundle = EncoderBundle::new(seed);
    let mut opt_past = Adam::new(&bundle.past.params, config.adam);
    let mut opt_future = Adam::new(&bundle.future.params, config.adam);
    let mut opt_dec = Adam::new(&bundle.decoder.params, config.adam);

    let mut log = Vec::new();
    let mut best: Option<(f64, EncoderBundle)> = None;
    let mut stale = 0;
    for epoch in 0..config.epochs {
        let perm = shuffled_indices(train.len(), &mut rng);
        let mut epoch_loss = 0.0;
        for batch in perm.chunks(config.batch_size.max(1)) {
            let items: Vec<&TrackWindow> = batch.iter().map(|&i| train[i]).collect();
            let b = &bundle;
            let (loss, mut grads) = reduce_fixed_order(
                &items,
                || (0.0, PretrainGrads::zeros(b)),
                |w, (l, g)| {
                    *l += reconstruction_loss(
                        (&b.past, &b.past.params),
                        (&b.future, &b.future.params),
                        (&b.decoder, &b.decoder.params),
                        w,
                        Some(g),
                    )
                    .expect("window shapes are fixed");
                },
                |(la, ga), (lb, gb)| {
                    *la += lb;
                    ga.add(gb);
                },
            );
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "pretraining loss at epoch {epoch}"
                )));
            }
            epoch_loss += loss;
            grads.scale(1.0 / items.len() as f64);
            *bundle.past.params.grads_mut() = grads.past;
            *bundle.future.params.grads_mut() = grads.future;
            *bundle.decoder.params.grads_mut() = grads.decoder;
            opt_past.step(&mut bundle.past.params);
            opt_future.step(&mut bundle.future.params);
            opt_dec.step(&mut bundle.decoder.params);
        }
        let train_loss = epoch_loss / train.len().max(1) as f64;
        let val_loss = (!val.is_empty()).then(|| mean_reconstruction(&bundle, &val));
        log::info!(
            "pretrain epoch {epoch}: train {train_loss:.6} val {}",
            val_loss.map_or("-".to_string(), |v| format!("{v:.6}"))
        );
        log.push(EpochLoss {
            epoch,
            train: train_loss,
            validation: val_loss,
        });
        if let Some(v) = val_loss {
            match &best {
                Some((b, _)) if v >= *b => {
                    stale += 1;
                    if stale >= config.patience {
                        break;
                    }
                }
                _ => {
                    best = Some((v, bundle.clone()));
                    stale = 0;
                }
            }
        }
    }
    let bundle = best.map_or(bundle, |(_, b)| b);
    Ok((bundle, log))
}

fn mean_reconstruction(bundle: &EncoderBundle, windows: &[&TrackWindow]) -> f64 {
    let total = reduce_fixed_order(
        windows,
        || 0.0,
        |w, acc| {
            *acc += reconstruction_loss(
                (&bundle.past, &bundle.past.params),
                (&bundle.future, &bundle.future.params),
                (&bundle.decoder, &bundle.decoder.params),
                w,
                None,
            )
            .expect("window shapes are fixed");
        },
        |a, b| *a += b,
    );
    total / windows.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(offset: Point) -> TrackWindow {
        TrackWindow {
            scene_id: "s/s".into(),
            pedestrian_id: 1,
            start_frame: 0,
            obs: std::array::from_fn(|i| {
                [offset[0] + 0.375 * i as f64, offset[1] + 0.0625 * (i * i) as f64]
            }),
            fut: std::array::from_fn(|i| {
                let t = (i + 8) as f64;
                [offset[0] + 0.375 * t, offset[1] + 0.0625 * t * t - 0.125 * i as f64]
            }),
        }
    }

    #[test]
    fn deterministic_and_zero_weight() {
        let mut b = EncoderBundle::new(3);
        let w = window([0.0, 0.0]);
        let r1 = b.represent(&w).unwrap();
        let r2 = b.represent(&w).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.history.len(), REP_DIM);
        assert_eq!(r1.future.len(), REP_DIM);

        for enc in [&mut b.past, &mut b.future] {
            for id in enc.params.ids().collect::<Vec<_>>() {
                enc.params.value_mut(id).fill(0.0);
            }
        }
        let r = b.represent(&w).unwrap();
        assert!(r.history.iter().chain(&r.future).all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_length_rejected() {
        let b = EncoderBundle::new(0);
        assert!(b.encode_past(&[[0.0, 0.0]; 7]).is_err());
        assert!(b.encode_future(&[[0.0, 0.0]; 8]).is_err());
    }

    #[test]
    fn parts_are_independent() {
        let b = EncoderBundle::new(4);
        let w = window([0.0, 0.0]);
        let base = b.represent(&w).unwrap();

        let mut other = w.clone();
        other.fut[5] = [9.0, 9.0];
        other.fut[11] = [-4.0, 2.0];
        assert_eq!(b.represent(&other).unwrap().history, base.history);

        let mut other = w.clone();
        other.obs[0] = [-3.0, 1.0];
        other.obs[3] = [5.0, 5.0];
        assert_eq!(b.represent(&other).unwrap().future, base.future);
    }

    #[test]
    fn translation_invariant_on_exact_grid() {
        // coordinates and offsets on a dyadic grid keep every subtraction exact
        let b = EncoderBundle::new(5);
        let base = b.represent(&window([0.0, 0.0])).unwrap();
        for off in [[1024.0, -512.0], [3.5, 0.25], [-17.0, 33.0]] {
            assert_eq!(b.represent(&window(off)).unwrap(), base);
        }
    }

    #[test]
    fn empty_train_set() {
        assert!(matches!(
            pretrain_representations(&[], &PretrainConfig::default(), 0),
            Err(Error::EmptyTrainSet)
        ));
    }
}
