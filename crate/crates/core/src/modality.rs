//! Modality set construction by weighted K-means, assignment, and the
//! pseudo-distributions used by the modality loss.
//!
//! Clustering runs Lloyd's algorithm on `[w_H·R_H, w_F·R_F]` with squared
//! Euclidean cost; centers are member means. [`ModalitySet::assign`] uses the
//! same cost, so a converged fit is a fixed point of assignment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::FutureSegment;
use crate::error::{Error, Result};
use crate::representation::{RepresentationPair, SequenceEncoder};
use crate::train_util::sub_seed;
use crate::{Point, PRED_LEN, REP_DIM};

/// `w_H·‖ΔR_H‖₂ + w_F·‖ΔR_F‖₂`.
pub fn weighted_distance(a: &RepresentationPair, b: &RepresentationPair, w_h: f64, w_f: f64) -> f64 {
    w_h * l2(&a.history, &b.history) + w_f * l2(&a.future, &b.future)
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Modality {
    pub id: usize,
    pub center_history: Vec<f64>,
    pub center_future: Vec<f64>,
    pub member_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalitySet {
    pub modalities: Vec<Modality>,
    pub w_history: f64,
    pub w_future: f64,
}

impl ModalitySet {
    pub fn k(&self) -> usize {
        self.modalities.len()
    }

    /// Clustering cost `w_H²‖ΔR_H‖² + w_F²‖ΔR_F‖²` to modality `m`.
    pub fn cost(&self, history: &[f64], future: &[f64], m: &Modality) -> f64 {
        self.w_history * self.w_history * sq_dist(history, &m.center_history)
            + self.w_future * self.w_future * sq_dist(future, &m.center_future)
    }

    /// Nearest modality; ties go to the lowest id.
    pub fn assign(&self, history: &[f64], future: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for m in &self.modalities {
            let c = self.cost(history, future, m);
            if c < best.0 {
                best = (c, m.id);
            }
        }
        best.1
    }

    pub fn assign_pair(&self, pair: &RepresentationPair) -> usize {
        self.assign(&pair.history, &pair.future)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub w_history: f64,
    pub w_future: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 200,
            w_history: 0.5,
            w_future: 0.5,
            max_iterations: 300,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Centers in the original (unweighted) coordinates, `k × dim`.
    pub centers: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Weighted squared-error objective after each iteration.
    pub objective: Vec<f64>,
    pub converged: bool,
}

/// Lloyd's algorithm under the per-dimension weighted cost `Σ_d s_d (x_d − c_d)²`.
///
/// Seeding: a random first point, then greedy farthest points. A cluster
/// that empties is re-seeded with the point farthest from its own center.
/// Once assignments are stable, a Hartigan sweep looks for single-point moves
/// that lower the objective; Lloyd resumes if any point moved.
pub fn weighted_kmeans(
    points: &[Vec<f64>],
    dim_weights: &[f64],
    k: usize,
    max_iterations: usize,
    seed: u64,
) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    if points.len() < k {
        return Err(Error::Config(format!(
            "K = {k} exceeds the number of samples ({})",
            points.len()
        )));
    }
    let dim = dim_weights.len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::dim("clustering feature", dim, p.len()));
    }
    let cost = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(dim_weights)
            .map(|((x, y), s)| s * (x - y) * (x - y))
            .sum()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 3));
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; points.len()];
    let first = rng.gen_range(0..points.len());
    chosen[first] = true;
    centers.push(points[first].clone());
    let mut nearest: Vec<f64> = points.iter().map(|p| cost(p, &centers[0])).collect();
    while centers.len() < k {
        let mut pick = None;
        let mut far = -1.0;
        for (i, &d) in nearest.iter().enumerate() {
            if !chosen[i] && d > far {
                far = d;
                pick = Some(i);
            }
        }
        let i = pick.expect("points.len() >= k");
        chosen[i] = true;
        centers.push(points[i].clone());
        let c = centers.last().unwrap();
        nearest
            .par_iter_mut()
            .zip(points.par_iter())
            .for_each(|(n, p)| *n = n.min(cost(p, c)));
    }

    let mut assignments = vec![usize::MAX; points.len()];
    let mut objective = Vec::new();
    let mut converged = false;
    for _ in 0..max_iterations {
        let fresh: Vec<usize> = points
            .par_iter()
            .map(|p| {
                let mut best = (f64::INFINITY, 0);
                for (j, c) in centers.iter().enumerate() {
                    let d = cost(p, c);
                    if d < best.0 {
                        best = (d, j);
                    }
                }
                best.1
            })
            .collect();
        let changed = fresh != assignments;
        assignments = fresh;

        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        let mut reseeded = false;
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let mut pick = None;
            let mut far = -1.0;
            for (i, p) in points.iter().enumerate() {
                let a = assignments[i];
                if counts[a] > 1 {
                    let d = cost(p, &centers[a]);
                    if d > far {
                        far = d;
                        pick = Some(i);
                    }
                }
            }
            let i = pick.expect("k <= points.len() leaves a donor cluster");
            counts[assignments[i]] -= 1;
            assignments[i] = empty;
            counts[empty] = 1;
            reseeded = true;
        }

        recompute_centers(points, &assignments, &counts, &mut centers);
        let obj: f64 = points
            .iter()
            .zip(&assignments)
            .map(|(p, &a)| cost(p, &centers[a]))
            .sum();
        objective.push(obj);
        if !changed && !reseeded {
            // Lloyd is stable; try single-point moves that Lloyd cannot see
            if !hartigan_pass(points, &cost, &mut assignments, &mut counts, &mut centers) {
                converged = true;
                break;
            }
            recompute_centers(points, &assignments, &counts, &mut centers);
            objective.push(
                points
                    .iter()
                    .zip(&assignments)
                    .map(|(p, &a)| cost(p, &centers[a]))
                    .sum(),
            );
        }
    }
    Ok(KMeansResult {
        centers,
        assignments,
        objective,
        converged,
    })
}

fn recompute_centers(points: &[Vec<f64>], assignments: &[usize], counts: &[usize], centers: &mut [Vec<f64>]) {
    for c in centers.iter_mut() {
        c.iter_mut().for_each(|v| *v = 0.0);
    }
    for (p, &a) in points.iter().zip(assignments) {
        for (s, v) in centers[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (c, &n) in centers.iter_mut().zip(counts) {
        c.iter_mut().for_each(|v| *v /= n as f64);
    }
}

/// One sequential sweep of Hartigan moves: a point leaves cluster `i` for `j`
/// when `n_j/(n_j+1)·d_j < n_i/(n_i−1)·d_i`, which strictly lowers the
/// objective. Centers are updated incrementally. Returns whether any point moved.
fn hartigan_pass(
    points: &[Vec<f64>],
    cost: &impl Fn(&[f64], &[f64]) -> f64,
    assignments: &mut [usize],
    counts: &mut [usize],
    centers: &mut [Vec<f64>],
) -> bool {
    let mut moved = false;
    for (p, a) in points.iter().zip(assignments.iter_mut()) {
        let from = *a;
        let n_from = counts[from] as f64;
        if counts[from] < 2 {
            continue;
        }
        let gain = n_from / (n_from - 1.0) * cost(p, &centers[from]);
        let mut best = (gain * (1.0 - 1e-12), from);
        for (j, c) in centers.iter().enumerate() {
            if j == from {
                continue;
            }
            let n = counts[j] as f64;
            let added = n / (n + 1.0) * cost(p, c);
            if added < best.0 {
                best = (added, j);
            }
        }
        let to = best.1;
        if to == from {
            continue;
        }
        let n_to = counts[to] as f64;
        for (c, v) in centers[from].iter_mut().zip(p) {
            *c = (n_from * *c - v) / (n_from - 1.0);
        }
        for (c, v) in centers[to].iter_mut().zip(p) {
            *c = (n_to * *c + v) / (n_to + 1.0);
        }
        counts[from] -= 1;
        counts[to] += 1;
        *a = to;
        moved = true;
    }
    moved
}

fn block_weights(left: usize, w_left: f64, right: usize, w_right: f64) -> Vec<f64> {
    let mut w = vec![w_left * w_left; left];
    w.extend(std::iter::repeat(w_right * w_right).take(right));
    w
}

fn check_weights(w_h: f64, w_f: f64) -> Result<()> {
    if !(w_h > 0.0 && w_f > 0.0 && w_h.is_finite() && w_f.is_finite()) {
        return Err(Error::Config(format!(
            "clustering weights must be positive (got {w_h}, {w_f})"
        )));
    }
    Ok(())
}

/// Clusters `[R_H, R_F]` features into `K` modalities.
pub fn fit_modalities(
    features: &[RepresentationPair],
    config: &KMeansConfig,
) -> Result<(ModalitySet, KMeansResult)> {
    check_weights(config.w_history, config.w_future)?;
    let points: Vec<Vec<f64>> = features.iter().map(RepresentationPair::concat).collect();
    let weights = block_weights(REP_DIM, config.w_history, REP_DIM, config.w_future);
    let result = weighted_kmeans(
        &points,
        &weights,
        config.k,
        config.max_iterations,
        config.seed,
    )?;
    let mut counts = vec![0; config.k];
    for &a in &result.assignments {
        counts[a] += 1;
    }
    let modalities = result
        .centers
        .iter()
        .zip(counts)
        .enumerate()
        .map(|(id, (c, n))| Modality {
            id,
            center_history: c[..REP_DIM].to_vec(),
            center_future: c[REP_DIM..].to_vec(),
            member_count: n,
        })
        .collect();
    Ok((
        ModalitySet {
            modalities,
            w_history: config.w_history,
            w_future: config.w_future,
        },
        result,
    ))
}

/// Clusters raw normalized coordinates (8 observed + 12 future points), then
/// places each modality's centers at the mean deep features of its members.
pub fn fit_modalities_on_coordinates(
    coordinates: &[Vec<f64>],
    features: &[RepresentationPair],
    config: &KMeansConfig,
) -> Result<(ModalitySet, KMeansResult)> {
    check_weights(config.w_history, config.w_future)?;
    if coordinates.len() != features.len() {
        return Err(Error::dim("coordinate rows", features.len(), coordinates.len()));
    }
    let obs_dims = 2 * crate::OBS_LEN;
    let weights = block_weights(obs_dims, config.w_history, 2 * PRED_LEN, config.w_future);
    let result = weighted_kmeans(
        coordinates,
        &weights,
        config.k,
        config.max_iterations,
        config.seed,
    )?;
    let mut sums = vec![(vec![0.0; REP_DIM], vec![0.0; REP_DIM], 0usize); config.k];
    for (f, &a) in features.iter().zip(&result.assignments) {
        let s = &mut sums[a];
        s.0.iter_mut().zip(&f.history).for_each(|(x, v)| *x += v);
        s.1.iter_mut().zip(&f.future).for_each(|(x, v)| *x += v);
        s.2 += 1;
    }
    let modalities = sums
        .into_iter()
        .enumerate()
        .map(|(id, (h, f, n))| Modality {
            id,
            center_history: h.into_iter().map(|v| v / n as f64).collect(),
            center_future: f.into_iter().map(|v| v / n as f64).collect(),
            member_count: n,
        })
        .collect();
    Ok((
        ModalitySet {
            modalities,
            w_history: config.w_history,
            w_future: config.w_future,
        },
        result,
    ))
}

/// Probability vector over modalities built from qualified-path counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoTarget {
    pub distribution: Vec<f64>,
    pub counts: Vec<usize>,
    /// Number of qualified paths.
    pub n: usize,
}

impl PseudoTarget {
    pub fn from_assignments(k: usize, assignments: &[usize]) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut counts = vec![0usize; k];
        for &a in assignments {
            counts[a] += 1;
        }
        let n = assignments.len();
        let distribution = counts.iter().map(|&c| c as f64 / n as f64).collect();
        Ok(Self {
            distribution,
            counts,
            n,
        })
    }

    pub fn one_hot(k: usize, id: usize) -> Self {
        Self::from_assignments(k, &[id]).expect("one assignment")
    }
}

/// Positions of a segment translated so that its entry point is the origin.
pub fn segment_local_positions(segment: &FutureSegment) -> [Point; PRED_LEN] {
    let o = segment.entry;
    segment.positions.map(|p| [p[0] - o[0], p[1] - o[1]])
}

/// `p*_j = |{Y*_i ∈ M_j}| / N`, with membership decided by assigning the
/// target's `R_H` paired with each segment's `R_F`.
pub fn pseudo_distribution(
    target_history: &[f64],
    segments: &[FutureSegment],
    set: &ModalitySet,
    future_encoder: &SequenceEncoder,
) -> Result<PseudoTarget> {
    if segments.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut assignments = Vec::with_capacity(segments.len());
    for s in segments {
        let r_f = future_encoder.encode(&segment_local_positions(s))?;
        assignments.push(set.assign(target_history, &r_f));
    }
    PseudoTarget::from_assignments(set.k(), &assignments)
}
