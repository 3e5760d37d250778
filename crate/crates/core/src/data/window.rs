use super::{Corpus, TrajectoryScene};
use crate::error::{Error, Result};
use crate::{Point, OBS_LEN, PRED_LEN, WINDOW_LEN};

/// One sample: 8 observed and 12 future positions of a pedestrian.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackWindow {
    pub scene_id: String,
    pub pedestrian_id: i64,
    pub start_frame: i64,
    pub obs: [Point; OBS_LEN],
    pub fut: [Point; PRED_LEN],
}

impl TrackWindow {
    /// Frame id of the last observed position.
    pub fn last_obs_frame(&self, frame_step: i64) -> i64 {
        self.start_frame + (OBS_LEN as i64 - 1) * frame_step
    }

    pub fn last_obs(&self) -> Point {
        self.obs[OBS_LEN - 1]
    }

    /// Dataset part of a `dataset/file` scene id.
    pub fn dataset(&self) -> &str {
        self.scene_id.split('/').next().unwrap_or("")
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.obs.iter().chain(self.fut.iter())
    }
}

/// World → local translation placing the last observed position at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormTransform {
    pub origin: Point,
}

impl NormTransform {
    pub fn from_observation(obs: &[Point; OBS_LEN]) -> Self {
        Self {
            origin: obs[OBS_LEN - 1],
        }
    }

    pub fn to_local(&self, p: Point) -> Point {
        [p[0] - self.origin[0], p[1] - self.origin[1]]
    }

    pub fn to_world(&self, p: Point) -> Point {
        [p[0] + self.origin[0], p[1] + self.origin[1]]
    }
}

pub fn normalize(window: &TrackWindow) -> (TrackWindow, NormTransform) {
    let tf = NormTransform::from_observation(&window.obs);
    let mut out = window.clone();
    out.obs.iter_mut().for_each(|p| *p = tf.to_local(*p));
    out.fut.iter_mut().for_each(|p| *p = tf.to_local(*p));
    (out, tf)
}

/// Sliding windows over every maximal contiguous run of each track.
pub fn window_tracks(scene: &TrajectoryScene, stride: usize) -> Vec<TrackWindow> {
    assert!(stride > 0, "stride must be positive");
    let mut out = Vec::new();
    for (&ped, track) in &scene.tracks {
        let mut run_start = 0;
        for i in 1..=track.len() {
            let breaks = i == track.len() || track[i].frame - track[i - 1].frame != scene.frame_step;
            if !breaks {
                continue;
            }
            let run = &track[run_start..i];
            let mut s = 0;
            while s + WINDOW_LEN <= run.len() {
                let pts = &run[s..s + WINDOW_LEN];
                let mut obs = [[0.0; 2]; OBS_LEN];
                let mut fut = [[0.0; 2]; PRED_LEN];
                for (k, p) in pts.iter().enumerate() {
                    if k < OBS_LEN {
                        obs[k] = p.pos;
                    } else {
                        fut[k - OBS_LEN] = p.pos;
                    }
                }
                out.push(TrackWindow {
                    scene_id: scene.scene_id.clone(),
                    pedestrian_id: ped,
                    start_frame: pts[0].frame,
                    obs,
                    fut,
                });
                s += stride;
            }
            run_start = i;
        }
    }
    out
}

pub fn corpus_windows(corpus: &Corpus, dataset: &str, stride: usize) -> Vec<TrackWindow> {
    corpus
        .datasets
        .get(dataset)
        .into_iter()
        .flatten()
        .flat_map(|s| window_tracks(s, stride))
        .collect()
}

/// Train on every dataset except `holdout`, test on `holdout`.
pub fn leave_one_out_split(
    corpus: &Corpus,
    holdout: &str,
) -> Result<(Vec<TrackWindow>, Vec<TrackWindow>)> {
    if !corpus.datasets.contains_key(holdout) {
        return Err(Error::UnknownDataset(holdout.to_string()));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (name, scenes) in &corpus.datasets {
        let target = if name == holdout { &mut test } else { &mut train };
        for s in scenes {
            target.extend(window_tracks(s, 1));
        }
    }
    if train.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn straight(ped: i64, n: usize, first_frame: i64) -> Vec<(i64, i64, Point)> {
        (0..n)
            .map(|i| (first_frame + 10 * i as i64, ped, [0.5 * i as f64, 1.0]))
            .collect()
    }

    fn scene(rows: Vec<(i64, i64, Point)>) -> TrajectoryScene {
        TrajectoryScene::from_rows("d/s", rows).unwrap()
    }

    #[test]
    fn window_counts() {
        assert_eq!(window_tracks(&scene(straight(1, 20, 0)), 1).len(), 1);
        assert_eq!(window_tracks(&scene(straight(1, 21, 0)), 1).len(), 2);
        assert_eq!(window_tracks(&scene(straight(1, 19, 0)), 1).len(), 0);
        assert_eq!(window_tracks(&scene(straight(1, 45, 0)), 20).len(), 2);
    }

    #[test]
    fn gaps_split_runs() {
        let mut rows = straight(1, 20, 0);
        rows.extend(straight(1, 20, 1000));
        let w = window_tracks(&scene(rows), 1);
        assert_eq!(w.len(), 2);
        assert_eq!(w[1].start_frame, 1000);
    }

    #[test]
    fn window_contents() {
        let w = &window_tracks(&scene(straight(7, 20, 30)), 1)[0];
        assert_eq!(w.pedestrian_id, 7);
        assert_eq!(w.start_frame, 30);
        assert_eq!(w.obs[7], [3.5, 1.0]);
        assert_eq!(w.fut[0], [4.0, 1.0]);
        assert_eq!(w.fut[11], [9.5, 1.0]);
        assert_eq!(w.last_obs_frame(10), 100);
    }

    #[test]
    fn normalize_cases() {
        let mut w = window_tracks(&scene(straight(1, 20, 0)), 1).remove(0);
        w.obs[7] = [3.0, 4.0];
        let (n, tf) = normalize(&w);
        assert_eq!(n.obs[7], [0.0, 0.0]);
        assert_eq!(n.obs[0], [w.obs[0][0] - 3.0, w.obs[0][1] - 4.0]);
        assert_eq!(tf.origin, [3.0, 4.0]);

        let (again, tf0) = normalize(&n);
        assert_eq!(again, n);
        assert_eq!(tf0, NormTransform::default());

        for (a, b) in n.points().zip(w.points()) {
            let back = tf.to_world(*a);
            assert!((back[0] - b[0]).abs() < 1e-12 && (back[1] - b[1]).abs() < 1e-12);
        }
    }

    fn corpus(names: &[&str]) -> Corpus {
        let mut datasets = BTreeMap::new();
        for (i, n) in names.iter().enumerate() {
            datasets.insert(
                n.to_string(),
                vec![TrajectoryScene::from_rows(
                    format!("{n}/a"),
                    straight(1, 20 + i, 0),
                )
                .unwrap()],
            );
        }
        Corpus {
            root: Default::default(),
            datasets,
        }
    }

    #[test]
    fn leave_one_out() {
        let c = corpus(&["eth", "hotel", "univ", "zara1", "zara2"]);
        let (train, test) = leave_one_out_split(&c, "eth").unwrap();
        assert!(test.iter().all(|w| w.dataset() == "eth"));
        let mut train_sets: Vec<&str> = train.iter().map(|w| w.dataset()).collect();
        train_sets.dedup();
        assert_eq!(train_sets, ["hotel", "univ", "zara1", "zara2"]);
        let total: usize = c.scenes().map(|s| window_tracks(s, 1).len()).sum();
        assert_eq!(train.len() + test.len(), total);
    }

    #[test]
    fn split_errors() {
        let c = corpus(&["eth"]);
        assert!(matches!(leave_one_out_split(&c, "eth"), Err(Error::EmptyTrainSet)));
        assert!(matches!(leave_one_out_split(&c, "zara"), Err(Error::UnknownDataset(_))));
    }
}
