//! Labeled synthetic intersection scenes.
//!
//! Every pedestrian walks along +x for the observed part and reaches the
//! origin at the last observed frame, then goes straight, turns left or
//! turns right. Observed parts carry no information about the branch.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Corpus, TrackWindow, TrajectoryScene};
use crate::error::Result;
use crate::{Point, OBS_LEN, SAMPLE_PERIOD, WINDOW_LEN};

pub const BRANCH_NAMES: [&str; 3] = ["straight", "left", "right"];

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionConfig {
    pub train_scenes: usize,
    pub test_scenes: usize,
    pub pedestrians_per_scene: usize,
    /// Probabilities of straight, left, right.
    pub priors: [f64; 3],
    pub min_speed: f64,
    pub max_speed: f64,
    /// Heading change per turning step, radians.
    pub turn_step: f64,
    pub turn_steps: usize,
    /// Half-width of the lateral offset range, meters.
    pub lateral_spread: f64,
    /// Half-width of the uniform position noise, meters.
    pub noise: f64,
    pub seed: u64,
}

impl Default for IntersectionConfig {
    fn default() -> Self {
        Self {
            train_scenes: 24,
            test_scenes: 6,
            pedestrians_per_scene: 100,
            priors: [0.5, 0.3, 0.2],
            min_speed: 1.0,
            max_speed: 1.4,
            turn_step: PI / 6.0,
            turn_steps: 3,
            lateral_spread: 0.3,
            noise: 0.005,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Intersection {
    /// Datasets `synth_train` and `synth_test`.
    pub corpus: Corpus,
    /// Branch index per (scene id, pedestrian id).
    pub labels: BTreeMap<(String, i64), usize>,
}

impl Intersection {
    pub fn label(&self, w: &TrackWindow) -> usize {
        self.labels[&(w.scene_id.clone(), w.pedestrian_id)]
    }

    pub fn scenes(&self, dataset: &str) -> &[TrajectoryScene] {
        self.corpus.datasets.get(dataset).map_or(&[], |v| v.as_slice())
    }
}

fn pick_branch(u: f64, priors: &[f64; 3]) -> usize {
    let mut acc = 0.0;
    for (i, p) in priors.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    priors.len() - 1
}

/// 20-frame path for one pedestrian, without noise.
pub fn branch_path(speed: f64, lateral: f64, branch: usize, turn_step: f64, turn_steps: usize) -> [Point; WINDOW_LEN] {
    let step = speed * SAMPLE_PERIOD;
    let sign = match branch {
        0 => 0.0,
        1 => 1.0,
        _ => -1.0,
    };
    let mut out = [[0.0; 2]; WINDOW_LEN];
    let mut heading = 0.0;
    let mut p = [-(OBS_LEN as f64 - 1.0) * step, lateral];
    for (i, o) in out.iter_mut().enumerate() {
        if i >= OBS_LEN && i < OBS_LEN + turn_steps {
            heading += sign * turn_step;
        }
        if i > 0 {
            p = [p[0] + step * f64::cos(heading), p[1] + step * f64::sin(heading)];
        }
        *o = p;
    }
    out
}

pub fn intersection(config: &IntersectionConfig) -> Intersection {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut datasets: BTreeMap<String, Vec<TrajectoryScene>> = BTreeMap::new();
    let mut labels = BTreeMap::new();
    for s in 0..config.train_scenes + config.test_scenes {
        let dataset = if s < config.train_scenes { "synth_train" } else { "synth_test" };
        let scene_id = format!("{dataset}/scene_{s:02}.txt");
        let mut rows = Vec::with_capacity(config.pedestrians_per_scene * WINDOW_LEN);
        for ped in 0..config.pedestrians_per_scene {
            let speed = rng.gen_range(config.min_speed..=config.max_speed);
            let lateral = rng.gen_range(-config.lateral_spread..=config.lateral_spread);
            let branch = pick_branch(rng.gen::<f64>(), &config.priors);
            let path = branch_path(speed, lateral, branch, config.turn_step, config.turn_steps);
            let first = 10 * 2 * ped as i64;
            for (i, p) in path.iter().enumerate() {
                let jitter = [
                    rng.gen_range(-config.noise..=config.noise),
                    rng.gen_range(-config.noise..=config.noise),
                ];
                rows.push((first + 10 * i as i64, ped as i64, [p[0] + jitter[0], p[1] + jitter[1]]));
            }
            labels.insert((scene_id.clone(), ped as i64), branch);
        }
        let scene = TrajectoryScene::from_rows(&scene_id, rows).expect("generated rows are valid");
        datasets.entry(dataset.to_string()).or_default().push(scene);
    }
    Intersection {
        corpus: Corpus {
            root: "synthetic".into(),
            datasets,
        },
        labels,
    }
}

/// Writes `root/<dataset>/<file>` in the whitespace text format.
pub fn write_corpus(corpus: &Corpus, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    for (dataset, scenes) in &corpus.datasets {
        let dir = root.join(dataset);
        fs::create_dir_all(&dir)?;
        for s in scenes {
            let file = s.scene_id.rsplit('/').next().unwrap_or(&s.scene_id);
            fs::write(dir.join(file), s.to_text())?;
        }
    }
    Ok(())
}
