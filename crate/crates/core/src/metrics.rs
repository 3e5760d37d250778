//! Displacement metrics, the constant-velocity baseline, and test-set evaluation.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::TrackWindow;
use crate::error::{Error, Result};
use crate::pipeline::ModelBundle;
use crate::predictor::PredictionSet;
use crate::{Point, OBS_LEN, PRED_LEN};

fn check_lengths(pred: &[Point], truth: &[Point]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::dim("trajectory length", truth.len(), pred.len()));
    }
    if pred.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(())
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Mean Euclidean distance over all steps.
pub fn ade(pred: &[Point], truth: &[Point]) -> Result<f64> {
    check_lengths(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(a, b)| dist(*a, *b)).sum::<f64>() / pred.len() as f64)
}

/// Euclidean distance at the final step.
pub fn fde(pred: &[Point], truth: &[Point]) -> Result<f64> {
    check_lengths(pred, truth)?;
    Ok(dist(*pred.last().unwrap(), *truth.last().unwrap()))
}

fn min_over(set: &PredictionSet, truth: &[Point], f: fn(&[Point], &[Point]) -> Result<f64>) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySequence);
    }
    set.trajectories()
        .map(|t| f(t, truth))
        .try_fold(f64::INFINITY, |m, v| Ok(m.min(v?)))
}

pub fn min_ade_k(set: &PredictionSet, truth: &[Point]) -> Result<f64> {
    min_over(set, truth, ade)
}

pub fn min_fde_k(set: &PredictionSet, truth: &[Point]) -> Result<f64> {
    min_over(set, truth, fde)
}

/// Repeats the last observed displacement for every predicted step.
pub fn constant_velocity_baseline(obs: &[Point; OBS_LEN]) -> [Point; PRED_LEN] {
    let last = obs[OBS_LEN - 1];
    let prev = obs[OBS_LEN - 2];
    let d = [last[0] - prev[0], last[1] - prev[1]];
    std::array::from_fn(|t| {
        let s = (t + 1) as f64;
        [last[0] + s * d[0], last[1] + s * d[1]]
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleMetrics {
    pub scene_id: String,
    pub pedestrian_id: i64,
    pub start_frame: i64,
    /// Most probable hypothesis.
    pub ade: f64,
    pub fde: f64,
    pub min_ade: f64,
    pub min_fde: f64,
    pub cv_ade: f64,
    pub cv_fde: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub dataset: String,
    pub k: usize,
    pub samples: Vec<SampleMetrics>,
    pub ade: f64,
    pub fde: f64,
    pub min_ade: f64,
    pub min_fde: f64,
    pub cv_ade: f64,
    pub cv_fde: f64,
    /// Wall-clock seconds; not part of the CSV.
    pub runtime_seconds: f64,
}

impl MetricsReport {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Header, one row per sample, the aggregate row, and the baseline row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scene,pedestrian,start_frame,ade,fde,min_ade_k,min_fde_k,cv_ade,cv_fde\n");
        for m in &self.samples {
            writeln!(
                s,
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                m.scene_id, m.pedestrian_id, m.start_frame, m.ade, m.fde, m.min_ade, m.min_fde, m.cv_ade, m.cv_fde
            )
            .unwrap();
        }
        writeln!(
            s,
            "mean,,,{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.ade, self.fde, self.min_ade, self.min_fde, self.cv_ade, self.cv_fde
        )
        .unwrap();
        writeln!(
            s,
            "constant_velocity,,,{:.6},{:.6},{:.6},{:.6},,",
            self.cv_ade, self.cv_fde, self.cv_ade, self.cv_fde
        )
        .unwrap();
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "{} (n={}, k={}): ADE/FDE {:.2}/{:.2} | top-1 {:.2}/{:.2} | constant velocity {:.2}/{:.2}",
            self.dataset,
            self.len(),
            self.k,
            self.min_ade,
            self.min_fde,
            self.ade,
            self.fde,
            self.cv_ade,
            self.cv_fde
        )
    }
}

fn mean(samples: &[SampleMetrics], f: fn(&SampleMetrics) -> f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(f).sum::<f64>() / samples.len() as f64
}

/// Top-k evaluation of `bundle` on `windows`.
pub fn evaluate(bundle: &ModelBundle, windows: &[TrackWindow], k: usize, dataset: &str) -> Result<MetricsReport> {
    let start = Instant::now();
    let samples = windows
        .par_iter()
        .map(|w| {
            let set = bundle.predict_topk(&w.obs, k)?;
            let top = &set.entries[0].trajectory;
            let cv = constant_velocity_baseline(&w.obs);
            Ok(SampleMetrics {
                scene_id: w.scene_id.clone(),
                pedestrian_id: w.pedestrian_id,
                start_frame: w.start_frame,
                ade: ade(top, &w.fut)?,
                fde: fde(top, &w.fut)?,
                min_ade: min_ade_k(&set, &w.fut)?,
                min_fde: min_fde_k(&set, &w.fut)?,
                cv_ade: ade(&cv, &w.fut)?,
                cv_fde: fde(&cv, &w.fut)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport {
        dataset: dataset.to_string(),
        k,
        ade: mean(&samples, |m| m.ade),
        fde: mean(&samples, |m| m.fde),
        min_ade: mean(&samples, |m| m.min_ade),
        min_fde: mean(&samples, |m| m.min_fde),
        cv_ade: mean(&samples, |m| m.cv_ade),
        cv_fde: mean(&samples, |m| m.cv_fde),
        samples,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::Prediction;

    fn line(f: impl Fn(usize) -> Point) -> [Point; PRED_LEN] {
        std::array::from_fn(f)
    }

    #[test]
    fn hand_examples() {
        let y = line(|t| [t as f64 * 0.5, 1.0]);
        assert_eq!(ade(&y, &y).unwrap(), 0.0);
        assert_eq!(fde(&y, &y).unwrap(), 0.0);
        let shifted = line(|t| [t as f64 * 0.5, 2.0]);
        assert_eq!(ade(&shifted, &y).unwrap(), 1.0);
        assert_eq!(fde(&shifted, &y).unwrap(), 1.0);
        let growing = line(|t| [t as f64 * 0.5, 1.0 + 0.1 * (t + 1) as f64]);
        assert!((ade(&growing, &y).unwrap() - 0.65).abs() <= 1e-12);
        assert!((fde(&growing, &y).unwrap() - 1.2).abs() <= 1e-12);
        assert!(ade(&y[..3], &y).is_err());
    }

    #[test]
    fn min_over_set() {
        let y = line(|t| [t as f64, 0.0]);
        let entry = |off: f64, p: f64| Prediction {
            modality: 0,
            probability: p,
            trajectory: line(|t| [t as f64, off]),
        };
        let set = PredictionSet {
            entries: vec![entry(2.0, 0.5), entry(0.0, 0.3), entry(1.0, 0.2)],
        };
        assert_eq!(min_ade_k(&set, &y).unwrap(), 0.0);
        let one = PredictionSet {
            entries: vec![entry(2.0, 1.0)],
        };
        assert_eq!(min_ade_k(&one, &y).unwrap(), 2.0);
        assert!(min_fde_k(&PredictionSet { entries: vec![] }, &y).is_err());
    }

    #[test]
    fn constant_velocity_cases() {
        let still = [[1.0, 2.0]; OBS_LEN];
        assert!(constant_velocity_baseline(&still).iter().all(|p| *p == [1.0, 2.0]));
        let obs: [Point; OBS_LEN] = std::array::from_fn(|i| [0.5 * i as f64, 0.0]);
        let truth = line(|t| [0.5 * (t + OBS_LEN) as f64, 0.0]);
        assert_eq!(ade(&constant_velocity_baseline(&obs), &truth).unwrap(), 0.0);
    }

    #[test]
    fn right_angle_turn() {
        // walking +x at 0.4 m/step, turning to +y right after the observation
        let obs: [Point; OBS_LEN] = std::array::from_fn(|i| [0.4 * i as f64 - 2.8, 0.0]);
        let truth = line(|t| [0.0, 0.4 * (t + 1) as f64]);
        let cv = constant_velocity_baseline(&obs);
        let expected = (4.8f64 * 4.8 + 4.8 * 4.8).sqrt();
        assert!((fde(&cv, &truth).unwrap() - expected).abs() < 1e-12);
    }
}
