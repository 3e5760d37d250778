//! Staged training and the trained model bundle.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{normalize, FutureSegment, NormTransform, QualifyParams, SceneIndex, TrackWindow, TrajectoryScene};
use crate::error::{Error, Result};
use crate::modality::{
    fit_modalities, fit_modalities_on_coordinates, segment_local_positions, KMeansConfig, Modality,
    ModalitySet, PseudoTarget,
};
use crate::nn::{exp_l2_loss, Adam, AdamConfig, Gradients, ParamSet};
use crate::predictor::{modality_loss, top_k, Classifier, Feed, Prediction, PredictionSet, Synthesizer, TrajectoryDecoder};
use crate::representation::{
    last_displacement, pretrain_representations, EncoderBundle, EpochLoss, PretrainConfig, RepresentationPair,
    SequenceEncoder,
};
use crate::train_util::{reduce_fixed_order, shuffled_indices, sub_seed};
use crate::{Point, OBS_LEN, PRED_LEN, REP_DIM};

/// Hyperparameters of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Number of modalities `K`.
    pub k: usize,
    pub w_history: f64,
    pub w_future: f64,
    pub qualify: QualifyParams,
    pub pretrain_epochs: usize,
    pub classifier_epochs: usize,
    pub synthesis_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub validation_fraction: f64,
    pub kmeans_max_iterations: usize,
    /// Cluster deep features; otherwise raw normalized coordinates.
    pub deep_clustering: bool,
    /// Decode from synthesized `R_F*`; otherwise from the modality's future center.
    pub synthesis: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 200,
            w_history: 0.5,
            w_future: 0.5,
            qualify: QualifyParams::default(),
            pretrain_epochs: 50,
            classifier_epochs: 50,
            synthesis_epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            patience: 5,
            validation_fraction: 0.1,
            kmeans_max_iterations: 300,
            deep_clustering: true,
            synthesis: true,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{value}` for `{key}`")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k < 1 {
            return bad("K must be at least 1".into());
        }
        for (name, w) in [("w_history", self.w_history), ("w_future", self.w_future)] {
            if !(w.is_finite() && w > 0.0) {
                return bad(format!("{name} must be positive, got {w}"));
            }
        }
        let q = &self.qualify;
        if !(q.radius.is_finite() && q.radius >= 0.0) {
            return bad(format!("radius must be non-negative, got {}", q.radius));
        }
        if !(0.0..=1.0).contains(&q.speed_tolerance) {
            return bad(format!("speed tolerance must lie in [0, 1], got {}", q.speed_tolerance));
        }
        if !(0.0..=PI).contains(&q.angle_tolerance) {
            return bad(format!("angle tolerance must lie in [0, pi], got {}", q.angle_tolerance));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!(
                "validation fraction must lie in [0, 1), got {}",
                self.validation_fraction
            ));
        }
        Ok(())
    }

    /// Sets one field from its key; returns `false` for unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "k" => self.k = parse(key, value)?,
            "w_history" => self.w_history = parse(key, value)?,
            "w_future" => self.w_future = parse(key, value)?,
            "radius" => self.qualify.radius = parse(key, value)?,
            "speed_tolerance" => self.qualify.speed_tolerance = parse(key, value)?,
            "angle_tolerance" => self.qualify.angle_tolerance = parse(key, value)?,
            "pretrain_epochs" => self.pretrain_epochs = parse(key, value)?,
            "classifier_epochs" => self.classifier_epochs = parse(key, value)?,
            "synthesis_epochs" => self.synthesis_epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "validation_fraction" => self.validation_fraction = parse(key, value)?,
            "kmeans_max_iterations" => self.kmeans_max_iterations = parse(key, value)?,
            "deep_clustering" => self.deep_clustering = parse(key, value)?,
            "synthesis" => self.synthesis = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// `key=value` lines; floats use shortest round-trip formatting.
    pub fn echo(&self) -> String {
        let q = &self.qualify;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k}={v}").unwrap();
        kv("k", self.k.to_string());
        kv("w_history", self.w_history.to_string());
        kv("w_future", self.w_future.to_string());
        kv("radius", q.radius.to_string());
        kv("speed_tolerance", q.speed_tolerance.to_string());
        kv("angle_tolerance", q.angle_tolerance.to_string());
        kv("pretrain_epochs", self.pretrain_epochs.to_string());
        kv("classifier_epochs", self.classifier_epochs.to_string());
        kv("synthesis_epochs", self.synthesis_epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("learning_rate", self.learning_rate.to_string());
        kv("patience", self.patience.to_string());
        kv("validation_fraction", self.validation_fraction.to_string());
        kv("kmeans_max_iterations", self.kmeans_max_iterations.to_string());
        kv("deep_clustering", self.deep_clustering.to_string());
        kv("synthesis", self.synthesis.to_string());
        s
    }

    pub fn from_echo(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("config line without `=`: {line}")))?;
            if !c.set(k.trim(), v)? {
                return Err(Error::Format(format!("unknown config key `{k}`")));
            }
        }
        Ok(c)
    }

    pub fn pretrain_config(&self) -> PretrainConfig {
        PretrainConfig {
            epochs: self.pretrain_epochs,
            batch_size: self.batch_size,
            patience: self.patience,
            validation_fraction: self.validation_fraction,
            adam: self.adam(),
        }
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

/// Everything needed for inference.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub config: TrainConfig,
    pub seed: u64,
    pub past: SequenceEncoder,
    pub future: SequenceEncoder,
    pub modalities: ModalitySet,
    pub classifier: Classifier,
    pub synthesizer: Synthesizer,
    pub decoder: TrajectoryDecoder,
}

impl ModelBundle {
    /// Freshly initialized networks sized for `k` modalities, with zero centers.
    pub fn untrained(config: TrainConfig, seed: u64, k: usize) -> Self {
        let enc = EncoderBundle::new(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 5));
        let classifier = Classifier::new(k, &mut rng);
        let synthesizer = Synthesizer::new(&mut rng);
        let modalities = ModalitySet {
            modalities: (0..k)
                .map(|id| Modality {
                    id,
                    center_history: vec![0.0; REP_DIM],
                    center_future: vec![0.0; REP_DIM],
                    member_count: 0,
                })
                .collect(),
            w_history: config.w_history,
            w_future: config.w_future,
        };
        Self {
            config,
            seed,
            past: enc.past,
            future: enc.future,
            modalities,
            classifier,
            synthesizer,
            decoder: enc.decoder,
        }
    }

    pub fn k(&self) -> usize {
        self.modalities.k()
    }

    /// `R_F*` for modality `id`, or its future center when synthesis is off.
    pub fn future_representation(&self, history: &[f64], id: usize) -> Result<Vec<f64>> {
        let m = self
            .modalities
            .modalities
            .get(id)
            .ok_or_else(|| Error::Config(format!("no modality {id}")))?;
        if self.config.synthesis {
            self.synthesizer.synthesize(history, m)
        } else {
            Ok(m.center_future.clone())
        }
    }

    /// Classifier probabilities for an observation in world coordinates.
    pub fn probabilities(&self, obs: &[Point; OBS_LEN]) -> Result<Vec<f64>> {
        let tf = NormTransform::from_observation(obs);
        let local = obs.map(|p| tf.to_local(p));
        self.classifier.classify(&self.past.encode(&local)?)
    }

    /// Top-k hypotheses for 8 observed world-frame positions.
    pub fn predict_topk(&self, obs: &[Point; OBS_LEN], k: usize) -> Result<PredictionSet> {
        let tf = NormTransform::from_observation(obs);
        let local = obs.map(|p| tf.to_local(p));
        let history = self.past.encode(&local)?;
        let probabilities = self.classifier.classify(&history)?;
        let ids = top_k(&probabilities, k)?;
        let last = last_displacement(&local);
        let entries = ids
            .par_iter()
            .map(|&id| {
                let mut h0 = history.clone();
                h0.extend(self.future_representation(&history, id)?);
                Ok(Prediction {
                    modality: id,
                    probability: probabilities[id],
                    trajectory: self.decoder.decode(&h0, last, &tf)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PredictionSet { entries })
    }

    /// Lowercase hex SHA-256 of the serialized checkpoint.
    pub fn hash(&self) -> String {
        crate::checkpoint::bundle_hash(self)
    }
}

/// Loss curves and diagnostics from [`train_full`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub pretrain: Vec<EpochLoss>,
    pub kmeans_objective: Vec<f64>,
    pub kmeans_converged: bool,
    /// Mean number of qualified paths per training sample.
    pub mean_qualified_paths: f64,
    pub classifier: Vec<f64>,
    /// Per epoch: (representation L2, trajectory loss).
    pub synthesis: Vec<(f64, f64)>,
}

impl TrainingLog {
    /// `stage,epoch,loss,validation` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("stage,epoch,loss,validation\n");
        for e in &self.pretrain {
            let v = e.validation.map_or(String::new(), |v| v.to_string());
            writeln!(s, "pretrain,{},{},{v}", e.epoch, e.train).unwrap();
        }
        for (i, o) in self.kmeans_objective.iter().enumerate() {
            writeln!(s, "kmeans,{i},{o},").unwrap();
        }
        for (i, l) in self.classifier.iter().enumerate() {
            writeln!(s, "classifier,{i},{l},").unwrap();
        }
        for (i, (r, t)) in self.synthesis.iter().enumerate() {
            writeln!(s, "synthesis_rep,{i},{r},").unwrap();
            writeln!(s, "synthesis_traj,{i},{t},").unwrap();
        }
        s
    }
}

/// One training sample of the heads, in the local frame.
#[derive(Debug, Clone)]
pub struct HeadSample {
    pub obs: [Point; OBS_LEN],
    pub fut: [Point; PRED_LEN],
    pub history: Vec<f64>,
    pub future: Vec<f64>,
    pub modality: usize,
}

#[derive(Debug, Clone)]
pub struct HeadGrads {
    pub synthesizer: Gradients,
    pub decoder: Gradients,
}

impl HeadGrads {
    fn zeros(s: &ParamSet, d: &ParamSet) -> Self {
        Self {
            synthesizer: s.zeroed_gradients(),
            decoder: d.zeroed_gradients(),
        }
    }

    fn add(&mut self, o: &Self) {
        self.synthesizer.add_assign(&o.synthesizer);
        self.decoder.add_assign(&o.decoder);
    }

    fn scale(&mut self, s: f64) {
        self.synthesizer.scale(s);
        self.decoder.scale(s);
    }
}

/// Stage-4 loss of one sample: `‖R_F* − R_F‖²` plus the exponential L2 of
/// the free-running decode from `[R_H, R_F*]`. Without synthesis only the
/// trajectory term is used, decoding from the modality's future center.
pub fn head_loss(
    synthesizer: (&Synthesizer, &ParamSet),
    decoder: (&TrajectoryDecoder, &ParamSet),
    modality: &Modality,
    sample: &HeadSample,
    use_synthesis: bool,
    grads: Option<&mut HeadGrads>,
) -> Result<(f64, f64)> {
    let synth = if use_synthesis {
        Some(synthesizer.0.trace(
            synthesizer.1,
            &sample.history,
            &modality.center_history,
            &modality.center_future,
        )?)
    } else {
        None
    };
    let r_f = synth.as_ref().map_or(&modality.center_future, |t| &t.output);
    let rep_loss = if use_synthesis {
        r_f.iter().zip(&sample.future).map(|(a, b)| (a - b) * (a - b)).sum()
    } else {
        0.0
    };
    let mut h0 = sample.history.clone();
    h0.extend_from_slice(r_f);
    let trace = decoder
        .0
        .run(decoder.1, &h0, last_displacement(&sample.obs), Feed::Own, None)?;
    let (traj_loss, d_pos) = exp_l2_loss(&trace.positions(), &sample.fut)?;
    if let Some(g) = grads {
        let dh0 = decoder.0.backward(decoder.1, &trace, &d_pos, &mut g.decoder);
        if let Some(t) = &synth {
            let d_rf: Vec<f64> = t
                .output
                .iter()
                .zip(&sample.future)
                .zip(&dh0[REP_DIM..])
                .map(|((a, b), d)| 2.0 * (a - b) + d)
                .collect();
            synthesizer.0.backward(synthesizer.1, t, &d_rf, &mut g.synthesizer);
        }
    }
    Ok((rep_loss, traj_loss))
}

/// Stage 1: encoder pretraining.
pub fn pretrain_stage(
    config: &TrainConfig,
    windows: &[TrackWindow],
    seed: u64,
) -> Result<(EncoderBundle, Vec<EpochLoss>)> {
    config.validate()?;
    pretrain_representations(windows, &config.pretrain_config(), seed).map_err(|e| e.in_stage("pretrain"))
}

/// Runs all four stages.
pub fn train_full(
    config: &TrainConfig,
    windows: &[TrackWindow],
    scenes: &[TrajectoryScene],
    seed: u64,
) -> Result<(ModelBundle, TrainingLog)> {
    config.validate()?;
    if windows.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let (encoders, pre_log) = pretrain_stage(config, windows, seed)?;
    let (bundle, mut log) = train_heads(config, &encoders, windows, scenes, seed)?;
    log.pretrain = pre_log;
    Ok((bundle, log))
}

/// Stages 2 to 4 on top of pretrained encoders.
pub fn train_heads(
    config: &TrainConfig,
    encoders: &EncoderBundle,
    windows: &[TrackWindow],
    scenes: &[TrajectoryScene],
    seed: u64,
) -> Result<(ModelBundle, TrainingLog)> {
    config.validate()?;
    if windows.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let mut log = TrainingLog::default();

    // stage 2: features and modality set
    let normalized: Vec<TrackWindow> = windows.par_iter().map(|w| normalize(w).0).collect();
    let features: Vec<RepresentationPair> = normalized
        .par_iter()
        .map(|w| {
            Ok(RepresentationPair {
                history: encoders.past.encode(&w.obs)?,
                future: encoders.future.encode(&w.fut)?,
            })
        })
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("cluster"))?;
    let km = KMeansConfig {
        k: config.k,
        w_history: config.w_history,
        w_future: config.w_future,
        max_iterations: config.kmeans_max_iterations,
        seed,
    };
    let (modalities, fit) = if config.deep_clustering {
        fit_modalities(&features, &km)
    } else {
        let coords: Vec<Vec<f64>> = normalized.iter().map(flat_coordinates).collect();
        fit_modalities_on_coordinates(&coords, &features, &km)
    }
    .map_err(|e| e.in_stage("cluster"))?;
    log::info!(
        "clustering: {} iterations, objective {:.6}, converged {}",
        fit.objective.len(),
        fit.objective.last().copied().unwrap_or(0.0),
        fit.converged
    );
    log.kmeans_objective = fit.objective;
    log.kmeans_converged = fit.converged;

    // stage 3: pseudo-targets and classifier
    let targets = pseudo_targets(config, &modalities, &encoders.future, windows, &features, scenes)
        .map_err(|e| e.in_stage("pseudo-targets"))?;
    log.mean_qualified_paths = targets.iter().map(|t| t.n as f64).sum::<f64>() / targets.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 5));
    let mut classifier = Classifier::new(config.k, &mut rng);
    let mut synthesizer = Synthesizer::new(&mut rng);
    log.classifier = train_classifier(config, &mut classifier, &features, &targets, seed)
        .map_err(|e| e.in_stage("classifier"))?;

    // stage 4: synthesizer and decoder
    let samples: Vec<HeadSample> = normalized
        .iter()
        .zip(&features)
        .map(|(w, f)| HeadSample {
            obs: w.obs,
            fut: w.fut,
            history: f.history.clone(),
            future: f.future.clone(),
            modality: modalities.assign_pair(f),
        })
        .collect();
    let mut decoder = encoders.decoder.clone();
    log.synthesis = train_synthesis(config, &mut synthesizer, &mut decoder, &modalities, &samples, seed)
        .map_err(|e| e.in_stage("synthesis"))?;

    let bundle = ModelBundle {
        config: config.clone(),
        seed,
        past: encoders.past.clone(),
        future: encoders.future.clone(),
        modalities,
        classifier,
        synthesizer,
        decoder,
    };
    Ok((bundle, log))
}

/// Normalized observed then future coordinates, flattened.
pub fn flat_coordinates(w: &TrackWindow) -> Vec<f64> {
    w.obs.iter().chain(&w.fut).flat_map(|p| *p).collect()
}

type SegmentKey<'a> = (&'a str, i64, i64);

/// `P*` for every training window.
pub fn pseudo_targets(
    config: &TrainConfig,
    modalities: &ModalitySet,
    future_encoder: &SequenceEncoder,
    windows: &[TrackWindow],
    features: &[RepresentationPair],
    scenes: &[TrajectoryScene],
) -> Result<Vec<PseudoTarget>> {
    let indexes: BTreeMap<&str, SceneIndex> = scenes
        .iter()
        .map(|s| (s.scene_id.as_str(), SceneIndex::new(s)))
        .collect();
    let segments: Vec<Vec<FutureSegment>> = windows
        .par_iter()
        .map(|w| {
            let index = indexes.get(w.scene_id.as_str()).ok_or_else(|| {
                Error::Config(format!("scene `{}` not available for neighbor search", w.scene_id))
            })?;
            Ok(index.qualified_paths(w, &config.qualify))
        })
        .collect::<Result<_>>()?;

    // a segment's local shape depends only on its source track and crossing frame
    let mut unique: BTreeMap<SegmentKey, &FutureSegment> = BTreeMap::new();
    for (w, segs) in windows.iter().zip(&segments) {
        for s in segs {
            unique
                .entry((w.scene_id.as_str(), s.pedestrian_id, s.crossing_frame))
                .or_insert(s);
        }
    }
    let keys: Vec<(SegmentKey, &FutureSegment)> = unique.into_iter().collect();
    let encoded: Vec<Vec<f64>> = keys
        .par_iter()
        .map(|(_, s)| future_encoder.encode(&segment_local_positions(s)))
        .collect::<Result<_>>()?;
    let lookup: HashMap<SegmentKey, usize> = keys.iter().enumerate().map(|(i, (k, _))| (*k, i)).collect();

    windows
        .par_iter()
        .zip(&segments)
        .zip(features)
        .map(|((w, segs), f)| {
            let ids: Vec<usize> = segs
                .iter()
                .map(|s| {
                    let r_f = &encoded[lookup[&(w.scene_id.as_str(), s.pedestrian_id, s.crossing_frame)]];
                    modalities.assign(&f.history, r_f)
                })
                .collect();
            PseudoTarget::from_assignments(modalities.k(), &ids)
        })
        .collect()
}

fn train_classifier(
    config: &TrainConfig,
    classifier: &mut Classifier,
    features: &[RepresentationPair],
    targets: &[PseudoTarget],
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 6));
    let mut opt = Adam::new(&classifier.params, config.adam());
    let mut curve = Vec::with_capacity(config.classifier_epochs);
    for epoch in 0..config.classifier_epochs {
        let perm = shuffled_indices(features.len(), &mut rng);
        let mut total = 0.0;
        for batch in perm.chunks(config.batch_size) {
            let c = &*classifier;
            let (loss, mut grads) = reduce_fixed_order(
                batch,
                || (0.0, c.params.zeroed_gradients()),
                |&i, (l, g)| {
                    let trace = c.logits(&c.params, &features[i].history).expect("fixed width");
                    let (loss, d) = modality_loss(trace.output(), &targets[i]).expect("matching K");
                    c.net.backward(&c.params, &trace, &d, g);
                    *l += loss;
                },
                |(la, ga), (lb, gb)| {
                    *la += lb;
                    ga.add_assign(gb);
                },
            );
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("classifier loss at epoch {epoch}")));
            }
            total += loss;
            grads.scale(1.0 / batch.len() as f64);
            *classifier.params.grads_mut() = grads;
            opt.step(&mut classifier.params);
        }
        let mean = total / features.len() as f64;
        log::info!("classifier epoch {epoch}: {mean:.6}");
        curve.push(mean);
    }
    Ok(curve)
}

fn train_synthesis(
    config: &TrainConfig,
    synthesizer: &mut Synthesizer,
    decoder: &mut TrajectoryDecoder,
    modalities: &ModalitySet,
    samples: &[HeadSample],
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 7));
    let mut opt_s = Adam::new(&synthesizer.params, config.adam());
    let mut opt_d = Adam::new(&decoder.params, config.adam());
    let mut curve = Vec::with_capacity(config.synthesis_epochs);
    for epoch in 0..config.synthesis_epochs {
        let perm = shuffled_indices(samples.len(), &mut rng);
        let (mut rep_total, mut traj_total) = (0.0, 0.0);
        for batch in perm.chunks(config.batch_size) {
            let (s, d) = (&*synthesizer, &*decoder);
            let ((rep, traj), mut grads) = reduce_fixed_order(
                batch,
                || ((0.0, 0.0), HeadGrads::zeros(&s.params, &d.params)),
                |&i, ((r, t), g)| {
                    let sample = &samples[i];
                    let (lr, lt) = head_loss(
                        (s, &s.params),
                        (d, &d.params),
                        &modalities.modalities[sample.modality],
                        sample,
                        config.synthesis,
                        Some(g),
                    )
                    .expect("fixed shapes");
                    *r += lr;
                    *t += lt;
                },
                |((ra, ta), ga), ((rb, tb), gb)| {
                    *ra += rb;
                    *ta += tb;
                    ga.add(gb);
                },
            );
            if !(rep + traj).is_finite() {
                return Err(Error::NonFinite(format!("synthesis loss at epoch {epoch}")));
            }
            rep_total += rep;
            traj_total += traj;
            grads.scale(1.0 / batch.len() as f64);
            *synthesizer.params.grads_mut() = grads.synthesizer;
            *decoder.params.grads_mut() = grads.decoder;
            if config.synthesis {
                opt_s.step(&mut synthesizer.params);
            }
            opt_d.step(&mut decoder.params);
        }
        let n = samples.len() as f64;
        log::info!(
            "synthesis epoch {epoch}: rep {:.6} traj {:.6}",
            rep_total / n,
            traj_total / n
        );
        curve.push((rep_total / n, traj_total / n));
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trip() {
        let mut c = TrainConfig::default();
        c.qualify.angle_tolerance = 0.1 * PI;
        c.w_history = 0.25;
        c.synthesis = false;
        let back = TrainConfig::from_echo(&c.echo()).unwrap();
        assert_eq!(back, c);
        assert!(c.echo().contains("k=200\n"));
        assert!(TrainConfig::from_echo("bogus=1").is_err());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        let cases: Vec<Box<dyn Fn(&mut TrainConfig)>> = vec![
            Box::new(|c| c.k = 0),
            Box::new(|c| c.w_future = 0.0),
            Box::new(|c| c.qualify.speed_tolerance = 1.5),
            Box::new(|c| c.qualify.angle_tolerance = 4.0),
            Box::new(|c| c.qualify.radius = -1.0),
            Box::new(|c| c.batch_size = 0),
        ];
        for f in cases {
            let mut c = ok.clone();
            f(&mut c);
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn empty_train_set() {
        let cfg = TrainConfig::default();
        assert!(matches!(train_full(&cfg, &[], &[], 0), Err(Error::EmptyTrainSet)));
    }
}
