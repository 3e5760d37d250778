//! Modality classifier, future-representation synthesizer and trajectory decoder.

mod decoder;

pub(crate) use decoder::future_displacements;
pub use decoder::{DecodeTrace, Feed, TrajectoryDecoder};

use rand::Rng;

use crate::error::{Error, Result};
use crate::modality::{Modality, PseudoTarget};
use crate::nn::{softmax, softmax_cross_entropy, Activation, Affine, Gradients, Mlp, MlpTrace, ParamSet};
use crate::{Point, PRED_LEN, REP_DIM};

pub const CLASSIFIER_HIDDEN: usize = 128;
pub const DIFFERENCE_DIM: usize = 64;

/// Three-layer tanh MLP scoring the `K` modalities from `R_H`.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub params: ParamSet,
    pub net: Mlp,
}

impl Classifier {
    pub fn new<R: Rng>(k: usize, rng: &mut R) -> Self {
        let mut params = ParamSet::new();
        let net = Mlp::new(
            &mut params,
            "classifier",
            &[REP_DIM, CLASSIFIER_HIDDEN, CLASSIFIER_HIDDEN, k],
            Activation::Tanh,
            false,
            rng,
        );
        Self { params, net }
    }

    pub fn k(&self) -> usize {
        self.net.output_dim()
    }

    pub fn logits(&self, params: &ParamSet, history: &[f64]) -> Result<MlpTrace> {
        self.net.forward(params, history)
    }

    /// Softmax probabilities over modalities.
    pub fn classify(&self, history: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(self.logits(&self.params, history)?.output()))
    }
}

/// Soft-target cross entropy between the classifier's logits and `P*`.
/// Returns the loss and its gradient with respect to the logits.
pub fn modality_loss(logits: &[f64], target: &PseudoTarget) -> Result<(f64, Vec<f64>)> {
    if logits.len() != target.distribution.len() {
        return Err(Error::dim("modality count", target.distribution.len(), logits.len()));
    }
    softmax_cross_entropy(logits, &target.distribution)
}

/// Regresses `R_F*` from `R_H` and a modality's centers.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    pub params: ParamSet,
    pub difference: Mlp,
    pub fusion: Affine,
}

#[derive(Debug, Clone)]
pub struct SynthesisTrace {
    pub difference: MlpTrace,
    /// `[e, center_F]`.
    pub fused_input: Vec<f64>,
    pub output: Vec<f64>,
}

impl Synthesizer {
    pub fn new<R: Rng>(rng: &mut R) -> Self {
        let mut params = ParamSet::new();
        let difference = Mlp::new(
            &mut params,
            "synth.diff",
            &[REP_DIM, DIFFERENCE_DIM],
            Activation::Sigmoid,
            true,
            rng,
        );
        let fusion = Affine::new(&mut params, "synth.fusion", DIFFERENCE_DIM + REP_DIM, REP_DIM, rng);
        Self {
            params,
            difference,
            fusion,
        }
    }

    /// `e = σ(W(R_H − center_H) + b)`, `R_F* = A[e, center_F] + c`.
    pub fn trace(
        &self,
        params: &ParamSet,
        history: &[f64],
        center_history: &[f64],
        center_future: &[f64],
    ) -> Result<SynthesisTrace> {
        if history.len() != center_history.len() {
            return Err(Error::dim("modality history center", history.len(), center_history.len()));
        }
        if center_future.len() != REP_DIM {
            return Err(Error::dim("modality future center", REP_DIM, center_future.len()));
        }
        let diff: Vec<f64> = history.iter().zip(center_history).map(|(a, b)| a - b).collect();
        let difference = self.difference.forward(params, &diff)?;
        let mut fused_input = difference.output().to_vec();
        fused_input.extend_from_slice(center_future);
        let output = self.fusion.forward(params, &fused_input)?;
        Ok(SynthesisTrace {
            difference,
            fused_input,
            output,
        })
    }

    pub fn synthesize(&self, history: &[f64], modality: &Modality) -> Result<Vec<f64>> {
        Ok(self
            .trace(&self.params, history, &modality.center_history, &modality.center_future)?
            .output)
    }

    /// Accumulates parameter gradients; returns `d loss / d R_H`.
    pub fn backward(
        &self,
        params: &ParamSet,
        trace: &SynthesisTrace,
        d_out: &[f64],
        grads: &mut Gradients,
    ) -> Vec<f64> {
        let d_fused = self.fusion.backward(params, &trace.fused_input, d_out, grads);
        self.difference
            .backward(params, &trace.difference, &d_fused[..DIFFERENCE_DIM], grads)
    }
}

/// One decoded hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub modality: usize,
    pub probability: f64,
    /// World-frame positions.
    pub trajectory: [Point; PRED_LEN],
}

/// Top-k hypotheses ordered by descending probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub entries: Vec<Prediction>,
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn trajectories(&self) -> impl Iterator<Item = &[Point; PRED_LEN]> {
        self.entries.iter().map(|e| &e.trajectory)
    }

    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }
}

/// Indices of the `k` largest probabilities, descending, ties by lowest index.
pub fn top_k(probabilities: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > probabilities.len() {
        return Err(Error::Config(format!(
            "k = {k} exceeds the number of modalities ({})",
            probabilities.len()
        )));
    }
    let mut idx: Vec<usize> = (0..probabilities.len()).collect();
    idx.sort_by(|&a, &b| probabilities[b].total_cmp(&probabilities[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn zero_classifier_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut c = Classifier::new(7, &mut rng);
        for id in c.params.ids().collect::<Vec<_>>() {
            c.params.value_mut(id).fill(0.0);
        }
        let p = c.classify(&[0.4; REP_DIM]).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 7.0).abs() < 1e-15));
        assert!(c.classify(&[0.0; 3]).is_err());
    }

    #[test]
    fn classifier_output_is_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = Classifier::new(200, &mut rng);
        let h: Vec<f64> = (0..REP_DIM).map(|i| (i as f64).cos()).collect();
        let p = c.classify(&h).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn modality_loss_cases() {
        let k = 5;
        let (l, _) = modality_loss(&[0.0; 5], &PseudoTarget::one_hot(k, 2)).unwrap();
        assert!((l - (k as f64).ln()).abs() < 1e-12);
        let t = PseudoTarget::from_assignments(3, &[0, 1]).unwrap();
        let (l, g) = modality_loss(&[0.0, 0.0, -800.0], &t).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-12);
        assert!(g.iter().all(|v| v.abs() < 1e-12));
        assert!(modality_loss(&[0.0; 4], &t).is_err());
    }

    #[test]
    fn synthesis_at_center_depends_only_on_modality() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = Synthesizer::new(&mut rng);
        let m = |h: f64, f: f64| Modality {
            id: 0,
            center_history: vec![h; REP_DIM],
            center_future: vec![f; REP_DIM],
            member_count: 1,
        };
        let a = s.synthesize(&[0.2; REP_DIM], &m(0.2, 0.7)).unwrap();
        let b = s.synthesize(&[-0.5; REP_DIM], &m(-0.5, 0.7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), REP_DIM);
    }

    #[test]
    fn top_k_order_and_prefix() {
        let p = [0.1, 0.3, 0.3, 0.05, 0.25];
        assert_eq!(top_k(&p, 5).unwrap(), [1, 2, 4, 0, 3]);
        assert_eq!(top_k(&p, 2).unwrap(), [1, 2]);
        assert!(top_k(&p, 6).is_err());
    }
}
