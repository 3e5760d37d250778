#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pccsnet::data::TrackWindow;
use pccsnet::modality::{Modality, PseudoTarget};
use pccsnet::nn::*;
use pccsnet::pipeline::{head_loss, HeadGrads, HeadSample};
use pccsnet::predictor::{modality_loss, Classifier, Feed, Synthesizer, TrajectoryDecoder};
use pccsnet::representation::{reconstruction_loss, EncoderBundle, PretrainGrads};
use pccsnet::{Point, DECODER_HIDDEN, OBS_LEN, PRED_LEN, REP_DIM};

pub const GRAD_TOLERANCE: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-scale..scale)).collect()
}

pub fn random_points<const N: usize>(r: &mut ChaCha8Rng, scale: f64) -> [Point; N] {
    std::array::from_fn(|_| [r.gen_range(-scale..scale), r.gen_range(-scale..scale)])
}

/// A smooth curved walk, normalized so the last observation is the origin.
pub fn curved_window(seed: u64) -> TrackWindow {
    let mut r = rng(seed);
    let v = r.gen_range(0.3..0.6);
    let bend = r.gen_range(-0.15..0.15);
    let mut heading: f64 = r.gen_range(-1.0..1.0);
    let mut p = [0.0, 0.0];
    let mut pts = Vec::with_capacity(20);
    for _ in 0..20 {
        pts.push(p);
        heading += bend;
        p = [p[0] + v * heading.cos(), p[1] + v * heading.sin()];
    }
    let o = pts[OBS_LEN - 1];
    let shifted: Vec<Point> = pts.iter().map(|q| [q[0] - o[0], q[1] - o[1]]).collect();
    TrackWindow {
        scene_id: "synthetic/s".into(),
        pedestrian_id: 1,
        start_frame: 0,
        obs: std::array::from_fn(|i| shifted[i]),
        fut: std::array::from_fn(|i| shifted[OBS_LEN + i]),
    }
}

fn weighted_sum(w: &[f64], y: &[f64]) -> f64 {
    w.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn check(params: &ParamSet, loss: impl FnMut(&ParamSet, Option<&mut Gradients>) -> f64) -> f64 {
    grad_check(params, loss).expect("finite loss").max_relative_error
}

pub fn affine_case() -> f64 {
    let mut r = rng(1);
    let mut params = ParamSet::new();
    let layer = Affine::new(&mut params, "a", 5, 4, &mut r);
    let x = random_vec(&mut r, 5, 1.0);
    let w = random_vec(&mut r, 4, 1.0);
    check(&params, |p, g| {
        let y = layer.forward(p, &x).unwrap();
        if let Some(g) = g {
            layer.backward(p, &x, &w, g);
        }
        weighted_sum(&w, &y)
    })
}

pub fn mlp_case(activation: Activation, activate_output: bool) -> f64 {
    let mut r = rng(2);
    let mut params = ParamSet::new();
    let net = Mlp::new(&mut params, "m", &[6, 9, 7, 3], activation, activate_output, &mut r);
    let x = random_vec(&mut r, 6, 1.0);
    let w = random_vec(&mut r, 3, 1.0);
    check(&params, |p, g| {
        let t = net.forward(p, &x).unwrap();
        if let Some(g) = g {
            net.backward(p, &t, &w, g);
        }
        weighted_sum(&w, t.output())
    })
}

pub fn lstm_cell_case() -> f64 {
    let mut r = rng(3);
    let mut params = ParamSet::new();
    let cell = Lstm::new(&mut params, "l", 3, 8, &mut r);
    let x = random_vec(&mut r, 3, 1.0);
    let h = random_vec(&mut r, 8, 0.8);
    let c = random_vec(&mut r, 8, 0.8);
    let wh = random_vec(&mut r, 8, 1.0);
    let wc = random_vec(&mut r, 8, 1.0);
    check(&params, |p, g| {
        let s = cell.step(p, &x, &h, &c).unwrap();
        if let Some(g) = g {
            cell.step_backward(p, &s, &wh, &wc, g);
        }
        weighted_sum(&wh, &s.h) + weighted_sum(&wc, &s.c)
    })
}

pub fn bilstm_case() -> f64 {
    let mut r = rng(4);
    let mut params = ParamSet::new();
    let net = BiLstm::new(&mut params, "b", 2, REP_DIM, &mut r);
    let seq: Vec<Vec<f64>> = (0..OBS_LEN).map(|_| random_vec(&mut r, 2, 1.5)).collect();
    let base = net.encode(&params, &seq).unwrap().output;
    let target: Vec<f64> = base.iter().map(|v| v + r.gen_range(-0.05..0.05)).collect();
    check(&params, |p, g| {
        let t = net.encode(p, &seq).unwrap();
        let diff: Vec<f64> = t.output.iter().zip(&target).map(|(a, b)| a - b).collect();
        if let Some(g) = g {
            net.backward(p, &t, &diff, g);
        }
        0.5 * weighted_sum(&diff, &diff)
    })
}

pub fn synthesizer_case() -> f64 {
    let mut r = rng(5);
    let synth = Synthesizer::new(&mut r);
    let history = random_vec(&mut r, REP_DIM, 0.5);
    let ch = random_vec(&mut r, REP_DIM, 0.5);
    let cf = random_vec(&mut r, REP_DIM, 0.5);
    let target = random_vec(&mut r, REP_DIM, 0.5);
    check(&synth.params, |p, g| {
        let t = synth.trace(p, &history, &ch, &cf).unwrap();
        let d: Vec<f64> = t.output.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
        if let Some(g) = g {
            synth.backward(p, &t, &d, g);
        }
        t.output.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum()
    })
}

fn displacements(fut: &[Point; PRED_LEN]) -> [Point; PRED_LEN] {
    std::array::from_fn(|t| {
        let prev = if t == 0 { [0.0, 0.0] } else { fut[t - 1] };
        [fut[t][0] - prev[0], fut[t][1] - prev[1]]
    })
}

fn last_step(obs: &[Point; OBS_LEN]) -> Point {
    [obs[7][0] - obs[6][0], obs[7][1] - obs[6][1]]
}

/// Fixed small offsets added to a network's own output to form a target. A
/// target close to the prediction keeps the loss, and with it the rounding
/// noise of central differences, well below the tolerance.
fn near(pred: &[Point; PRED_LEN]) -> [Point; PRED_LEN] {
    std::array::from_fn(|t| {
        [
            pred[t][0] + 0.02 * ((t * 7 % 5) as f64 - 2.0),
            pred[t][1] + 0.02 * ((t * 3 % 4) as f64 - 1.5),
        ]
    })
}

pub fn decoder_case(feed: Feed) -> f64 {
    let mut r = rng(6);
    let dec = TrajectoryDecoder::new(&mut r);
    let h0 = random_vec(&mut r, DECODER_HIDDEN, 0.5);
    let w = curved_window(6);
    let first = last_step(&w.obs);
    let base = dec.run(&dec.params, &h0, first, Feed::Own, None).unwrap().positions();
    let target = near(&base);
    let teacher = displacements(&target);
    check(&dec.params, |p, g| {
        let t = dec.run(p, &h0, first, feed, Some(&teacher)).unwrap();
        let (loss, d) = exp_l2_loss(&t.positions(), &target).unwrap();
        if let Some(g) = g {
            dec.backward(p, &t, &d, g);
        }
        loss
    })
}

/// Checks one component of a loss that fills several gradient sets at once.
fn component_check<G>(
    params: &ParamSet,
    loss: impl Fn(&ParamSet, Option<&mut G>) -> f64,
    zeros: impl Fn() -> G,
    pick: impl Fn(&G) -> &Gradients,
) -> f64 {
    check(params, |p, g| match g {
        Some(g) => {
            let mut all = zeros();
            let l = loss(p, Some(&mut all));
            g.add_assign(pick(&all));
            l
        }
        None => loss(p, None),
    })
}

pub fn soft_cross_entropy_case() -> f64 {
    let mut r = rng(7);
    let mut params = ParamSet::new();
    let id = params.add("logits", Matrix::row_vector(&random_vec(&mut r, 6, 2.0)));
    let target = [0.1, 0.0, 0.4, 0.2, 0.0, 0.3];
    check(&params, |p, g| {
        let (loss, d) = softmax_cross_entropy(p.value(id).as_slice(), &target).unwrap();
        if let Some(g) = g {
            g.get_mut(id).as_mut_slice().iter_mut().zip(&d).for_each(|(a, b)| *a += b);
        }
        loss
    })
}

pub fn exp_l2_case() -> f64 {
    let mut r = rng(8);
    let mut params = ParamSet::new();
    let id = params.add("pred", Matrix::from_vec(PRED_LEN, 2, random_vec(&mut r, 2 * PRED_LEN, 2.0)).unwrap());
    let truth: [Point; PRED_LEN] = random_points(&mut r, 2.0);
    check(&params, |p, g| {
        let pred: Vec<Point> = p.value(id).as_slice().chunks(2).map(|c| [c[0], c[1]]).collect();
        let (loss, d) = exp_l2_loss(&pred, &truth).unwrap();
        if let Some(g) = g {
            g.get_mut(id).as_mut_slice().iter_mut().zip(d.iter().flatten()).for_each(|(a, b)| *a += b);
        }
        loss
    })
}

pub fn modality_loss_case() -> f64 {
    let mut r = rng(9);
    let c = Classifier::new(5, &mut r);
    let h = random_vec(&mut r, REP_DIM, 2.0);
    let target = PseudoTarget::from_assignments(5, &[0, 3, 3, 4]).unwrap();
    check(&c.params, |p, g| {
        let t = c.logits(p, &h).unwrap();
        let (loss, d) = modality_loss(t.output(), &target).unwrap();
        if let Some(g) = g {
            c.net.backward(p, &t, &d, g);
        }
        loss
    })
}

/// Pretraining loss against each of the three components in turn.
pub fn pretraining_cases() -> [f64; 3] {
    let b = EncoderBundle::new(10);
    let mut w = curved_window(10);
    // the future encoder sees the target, so settle it near its own reconstruction
    for _ in 0..4 {
        let mut h0 = b.encode_past(&w.obs).unwrap();
        h0.extend(b.encode_future(&w.fut).unwrap());
        let teacher = displacements(&w.fut);
        let t = b.decoder.run(&b.decoder.params, &h0, last_step(&w.obs), Feed::Teacher, Some(&teacher)).unwrap();
        w.fut = near(&t.positions());
    }
    let zeros = || PretrainGrads {
        past: b.past.params.zeroed_gradients(),
        future: b.future.params.zeroed_gradients(),
        decoder: b.decoder.params.zeroed_gradients(),
    };
    let past = component_check(
        &b.past.params,
        |p, g| reconstruction_loss((&b.past, p), (&b.future, &b.future.params), (&b.decoder, &b.decoder.params), &w, g).unwrap(),
        zeros,
        |a| &a.past,
    );
    let future = component_check(
        &b.future.params,
        |p, g| reconstruction_loss((&b.past, &b.past.params), (&b.future, p), (&b.decoder, &b.decoder.params), &w, g).unwrap(),
        zeros,
        |a| &a.future,
    );
    let decoder = component_check(
        &b.decoder.params,
        |p, g| reconstruction_loss((&b.past, &b.past.params), (&b.future, &b.future.params), (&b.decoder, p), &w, g).unwrap(),
        zeros,
        |a| &a.decoder,
    );
    [past, future, decoder]
}

/// Joint synthesis/decoding loss against the synthesizer and the decoder.
pub fn head_cases() -> [f64; 2] {
    let mut r = rng(11);
    let synth = Synthesizer::new(&mut r);
    let dec = TrajectoryDecoder::new(&mut r);
    let w = curved_window(11);
    let m = Modality {
        id: 0,
        center_history: random_vec(&mut r, REP_DIM, 0.5),
        center_future: random_vec(&mut r, REP_DIM, 0.5),
        member_count: 1,
    };
    let history = random_vec(&mut r, REP_DIM, 0.5);
    let synthesized = synth.synthesize(&history, &m).unwrap();
    let mut h0 = history.clone();
    h0.extend_from_slice(&synthesized);
    let base = dec.run(&dec.params, &h0, last_step(&w.obs), Feed::Own, None).unwrap().positions();
    let sample = HeadSample {
        obs: w.obs,
        fut: near(&base),
        history,
        future: synthesized.iter().map(|v| v + r.gen_range(-0.05..0.05)).collect(),
        modality: 0,
    };
    let zeros = || HeadGrads {
        synthesizer: synth.params.zeroed_gradients(),
        decoder: dec.params.zeroed_gradients(),
    };
    let total = |(a, b): (f64, f64)| a + b;
    let s = component_check(
        &synth.params,
        |p, g| total(head_loss((&synth, p), (&dec, &dec.params), &m, &sample, true, g).unwrap()),
        zeros,
        |a| &a.synthesizer,
    );
    let d = component_check(
        &dec.params,
        |p, g| total(head_loss((&synth, &synth.params), (&dec, p), &m, &sample, true, g).unwrap()),
        zeros,
        |a| &a.decoder,
    );
    [s, d]
}

/// Every analytic gradient in the crate, by name.
pub fn all_grad_cases() -> Vec<(&'static str, f64)> {
    let [pre_past, pre_future, pre_dec] = pretraining_cases();
    let [head_synth, head_dec] = head_cases();
    vec![
        ("affine", affine_case()),
        ("mlp tanh", mlp_case(Activation::Tanh, false)),
        ("mlp sigmoid", mlp_case(Activation::Sigmoid, true)),
        ("lstm cell", lstm_cell_case()),
        ("bilstm encoder", bilstm_case()),
        ("synthesizer", synthesizer_case()),
        ("decoder teacher-forced", decoder_case(Feed::Teacher)),
        ("decoder free-running", decoder_case(Feed::Own)),
        ("soft cross-entropy", soft_cross_entropy_case()),
        ("exponential l2", exp_l2_case()),
        ("modality loss via classifier", modality_loss_case()),
        ("pretraining: past encoder", pre_past),
        ("pretraining: future encoder", pre_future),
        ("pretraining: decoder", pre_dec),
        ("stage 4: synthesizer", head_synth),
        ("stage 4: decoder", head_dec),
    ]
}

/// Weighted within-cluster squared error of a labelling, clusters at their means.
pub fn partition_cost(points: &[Vec<f64>], weights: &[f64], labels: &[usize], k: usize) -> f64 {
    let dim = weights.len();
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = points.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
        if members.is_empty() {
            continue;
        }
        for d in 0..dim {
            let mean = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
            total += members.iter().map(|p| weights[d] * (p[d] - mean).powi(2)).sum::<f64>();
        }
    }
    total
}

/// Lowest cost over every labelling of the points into two non-empty clusters.
pub fn brute_force_two_clusters(points: &[Vec<f64>], weights: &[f64]) -> f64 {
    let n = points.len();
    (1..(1u32 << n) - 1)
        .map(|mask| {
            let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            partition_cost(points, weights, &labels, 2)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Rectangle corners placed in the first two dimensions of both feature blocks.
pub fn corner_features(width: f64, height: f64) -> Vec<pccsnet::representation::RepresentationPair> {
    [[0.0, 0.0], [width, 0.0], [0.0, height], [width, height]]
        .iter()
        .map(|c| {
            let mut history = vec![0.0; REP_DIM];
            let mut future = vec![0.0; REP_DIM];
            history[..2].copy_from_slice(c);
            future[..2].copy_from_slice(&[c[0] * 0.5, c[1] * 0.5]);
            pccsnet::representation::RepresentationPair { history, future }
        })
        .collect()
}

/// Per-dimension weights matching a `[R_H, R_F]` modality fit.
pub fn block_weights(w_h: f64, w_f: f64) -> Vec<f64> {
    let mut w = vec![w_h * w_h; REP_DIM];
    w.extend(vec![w_f * w_f; REP_DIM]);
    w
}

/// Straight line prediction set from a list of lateral offsets, in prefix order.
pub fn offset_set(offsets: &[f64]) -> pccsnet::PredictionSet {
    pccsnet::PredictionSet {
        entries: offsets
            .iter()
            .enumerate()
            .map(|(i, &o)| pccsnet::Prediction {
                modality: i,
                probability: 1.0 / offsets.len() as f64,
                trajectory: std::array::from_fn(|t| [0.4 * (t + 1) as f64, o * (t + 1) as f64]),
            })
            .collect(),
    }
}

/// Train/test windows and scenes of a generated intersection corpus.
pub struct SyntheticSplit {
    pub data: pccsnet::synthetic::Intersection,
    pub train: Vec<TrackWindow>,
    pub test: Vec<TrackWindow>,
    pub train_scenes: Vec<pccsnet::data::TrajectoryScene>,
}

pub fn synthetic_split(config: &pccsnet::synthetic::IntersectionConfig) -> SyntheticSplit {
    use pccsnet::data::window_tracks;
    let data = pccsnet::synthetic::intersection(config);
    let train_scenes = data.scenes("synth_train").to_vec();
    let train = train_scenes.iter().flat_map(|s| window_tracks(s, 1)).collect();
    let test = data.scenes("synth_test").iter().flat_map(|s| window_tracks(s, 1)).collect();
    SyntheticSplit {
        data,
        train,
        test,
        train_scenes,
    }
}

/// Deep features of a window under a trained model.
pub fn features_of(bundle: &pccsnet::ModelBundle, w: &TrackWindow) -> pccsnet::representation::RepresentationPair {
    let (local, _) = pccsnet::data::normalize(w);
    pccsnet::representation::RepresentationPair {
        history: bundle.past.encode(&local.obs).unwrap(),
        future: bundle.future.encode(&local.fut).unwrap(),
    }
}

/// `table[modality][branch]` membership counts over the windows.
pub fn confusion(bundle: &pccsnet::ModelBundle, split: &SyntheticSplit, windows: &[TrackWindow]) -> Vec<[usize; 3]> {
    let mut table = vec![[0usize; 3]; bundle.k()];
    for w in windows {
        let m = bundle.modalities.assign_pair(&features_of(bundle, w));
        table[m][split.data.label(w)] += 1;
    }
    table
}

/// Majority branch of every modality.
pub fn majority_branch(table: &[[usize; 3]]) -> Vec<usize> {
    table
        .iter()
        .map(|row| (0..3).max_by_key(|&b| (row[b], std::cmp::Reverse(b))).unwrap())
        .collect()
}

pub fn purity(table: &[[usize; 3]]) -> f64 {
    let total: usize = table.iter().flatten().sum();
    table.iter().map(|r| *r.iter().max().unwrap()).sum::<usize>() as f64 / total as f64
}
