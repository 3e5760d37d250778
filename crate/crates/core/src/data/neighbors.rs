//! Qualified-path search: other trajectories entering a circle around the end
//! of a target's observation with similar speed and heading.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{TrackWindow, TrajectoryScene};
use crate::{Point, OBS_LEN, PRED_LEN};

/// Below this speed (m/s) a target counts as stationary.
pub const STATIONARY_SPEED: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualifyParams {
    /// Circle radius in meters.
    pub radius: f64,
    /// Allowed relative speed difference.
    pub speed_tolerance: f64,
    /// Allowed heading difference in radians.
    pub angle_tolerance: f64,
}

impl Default for QualifyParams {
    fn default() -> Self {
        Self {
            radius: 1.0,
            speed_tolerance: 0.1,
            angle_tolerance: 0.1 * PI,
        }
    }
}

impl QualifyParams {
    /// Only the target's own future qualifies.
    pub const SELF_ONLY: QualifyParams = QualifyParams {
        radius: 0.0,
        speed_tolerance: 0.0,
        angle_tolerance: 0.0,
    };
}

/// A 12-step continuation of some track after it entered the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct FutureSegment {
    pub pedestrian_id: i64,
    /// First frame inside the circle.
    pub crossing_frame: i64,
    /// World-frame positions of the 12 frames after the crossing frame.
    pub positions: [Point; PRED_LEN],
    /// Position at the crossing frame; the segment's local origin.
    pub entry: Point,
    /// Entry speed in m/s.
    pub speed: f64,
    /// Entry heading in (-π, π].
    pub direction: f64,
}

/// Heading of a displacement in (-π, π].
pub fn heading(d: Point) -> f64 {
    let a = d[1].atan2(d[0]);
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Absolute heading difference wrapped into [0, π].
pub fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    if d > PI {
        2.0 * PI - d
    } else {
        d
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Uniform grid over circle-entry candidates of one scene.
///
/// Each entry is a step `track[j-1] → track[j]` between consecutive samples
/// such that the 12 samples after `track[j]` are also contiguous; it is
/// bucketed by the cell of `track[j]`.
#[derive(Debug, Clone)]
pub struct SceneIndex<'a> {
    scene: &'a TrajectoryScene,
    cell: f64,
    grid: BTreeMap<(i64, i64), Vec<(i64, usize)>>,
}

impl<'a> SceneIndex<'a> {
    pub fn new(scene: &'a TrajectoryScene) -> Self {
        let cell = 1.0;
        let mut grid: BTreeMap<(i64, i64), Vec<(i64, usize)>> = BTreeMap::new();
        for (&ped, track) in &scene.tracks {
            // contiguous[j] = number of contiguous samples starting at j
            let mut contiguous = vec![1usize; track.len()];
            for j in (0..track.len().saturating_sub(1)).rev() {
                if track[j + 1].frame - track[j].frame == scene.frame_step {
                    contiguous[j] = contiguous[j + 1] + 1;
                }
            }
            for j in 1..track.len() {
                let linked = track[j].frame - track[j - 1].frame == scene.frame_step;
                if linked && contiguous[j] > PRED_LEN {
                    grid.entry(cell_of(track[j].pos, cell))
                        .or_default()
                        .push((ped, j));
                }
            }
        }
        Self { scene, cell, grid }
    }

    pub fn scene(&self) -> &TrajectoryScene {
        self.scene
    }

    /// Qualified continuations for `target`. The target's own future is always
    /// first; the remaining segments are ordered by (pedestrian, frame).
    /// Tracks of the target pedestrian itself are not scanned.
    pub fn qualified_paths(&self, target: &TrackWindow, params: &QualifyParams) -> Vec<FutureSegment> {
        let dt = self.scene.dt;
        let center = target.obs[OBS_LEN - 1];
        let prev = target.obs[OBS_LEN - 2];
        let v_target = dist(center, prev) / dt;
        let theta_target = heading([center[0] - prev[0], center[1] - prev[1]]);
        let stationary = v_target < STATIONARY_SPEED;

        let mut out = vec![FutureSegment {
            pedestrian_id: target.pedestrian_id,
            crossing_frame: target.last_obs_frame(self.scene.frame_step),
            positions: target.fut,
            entry: center,
            speed: v_target,
            direction: theta_target,
        }];

        let r = params.radius;
        if r <= 0.0 {
            return out;
        }
        let (lo_x, lo_y) = cell_of([center[0] - r, center[1] - r], self.cell);
        let (hi_x, hi_y) = cell_of([center[0] + r, center[1] + r], self.cell);
        let mut found = Vec::new();
        for cx in lo_x..=hi_x {
            for (_, entries) in self.grid.range((cx, lo_y)..=(cx, hi_y)) {
                for &(ped, j) in entries {
                    if ped == target.pedestrian_id {
                        continue;
                    }
                    let track = &self.scene.tracks[&ped];
                    let inside = track[j].pos;
                    let outside = track[j - 1].pos;
                    if dist(inside, center) >= r || dist(outside, center) < r {
                        continue;
                    }
                    let step = [inside[0] - outside[0], inside[1] - outside[1]];
                    let speed = step[0].hypot(step[1]) / dt;
                    let direction = heading(step);
                    let ok = if stationary {
                        speed < STATIONARY_SPEED
                    } else {
                        (speed - v_target).abs() / v_target <= params.speed_tolerance
                            && angle_between(direction, theta_target) <= params.angle_tolerance
                    };
                    if !ok {
                        continue;
                    }
                    let mut positions = [[0.0; 2]; PRED_LEN];
                    for (k, p) in positions.iter_mut().enumerate() {
                        *p = track[j + 1 + k].pos;
                    }
                    found.push(FutureSegment {
                        pedestrian_id: ped,
                        crossing_frame: track[j].frame,
                        positions,
                        entry: inside,
                        speed,
                        direction,
                    });
                }
            }
        }
        found.sort_by_key(|s| (s.pedestrian_id, s.crossing_frame));
        out.extend(found);
        out
    }
}

fn cell_of(p: Point, cell: f64) -> (i64, i64) {
    ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64)
}

/// One-shot search; build a [`SceneIndex`] when querying many targets.
pub fn qualified_paths(
    scene: &TrajectoryScene,
    target: &TrackWindow,
    params: &QualifyParams,
) -> Vec<FutureSegment> {
    SceneIndex::new(scene).qualified_paths(target, params)
}
