use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::{Point, SAMPLE_PERIOD};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub frame: i64,
    pub pos: Point,
}

/// All tracks of one recording, keyed by pedestrian id.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryScene {
    pub scene_id: String,
    /// Seconds between consecutive samples.
    pub dt: f64,
    /// Frame-id increment corresponding to one sample.
    pub frame_step: i64,
    /// Frames strictly increasing within each track.
    pub tracks: BTreeMap<i64, Vec<TrackPoint>>,
    /// Rows dropped for non-finite coordinates.
    pub rejected_rows: usize,
}

impl TrajectoryScene {
    /// Builds a scene from unordered rows; duplicate (pedestrian, frame) pairs are rejected.
    pub fn from_rows(
        scene_id: impl Into<String>,
        rows: impl IntoIterator<Item = (i64, i64, Point)>,
    ) -> Result<Self> {
        let scene_id = scene_id.into();
        let mut tracks: BTreeMap<i64, Vec<TrackPoint>> = BTreeMap::new();
        for (frame, ped, pos) in rows {
            tracks.entry(ped).or_default().push(TrackPoint { frame, pos });
        }
        for (ped, track) in &mut tracks {
            track.sort_by_key(|p| p.frame);
            if let Some(w) = track.windows(2).find(|w| w[0].frame == w[1].frame) {
                return Err(Error::Format(format!(
                    "{scene_id}: pedestrian {ped} has two rows at frame {}",
                    w[0].frame
                )));
            }
        }
        let frame_step = infer_frame_step(&tracks);
        Ok(Self {
            scene_id,
            dt: SAMPLE_PERIOD,
            frame_step,
            tracks,
            rejected_rows: 0,
        })
    }

    pub fn num_points(&self) -> usize {
        self.tracks.values().map(Vec::len).sum()
    }

    /// Position of `ped` at `frame`, if recorded.
    pub fn position(&self, ped: i64, frame: i64) -> Option<Point> {
        let track = self.tracks.get(&ped)?;
        track
            .binary_search_by_key(&frame, |p| p.frame)
            .ok()
            .map(|i| track[i].pos)
    }

    /// Text form, one `frame pedestrian x y` row per point, sorted by frame then pedestrian.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<(i64, i64, Point)> = self
            .tracks
            .iter()
            .flat_map(|(&ped, t)| t.iter().map(move |p| (p.frame, ped, p.pos)))
            .collect();
        rows.sort_by_key(|r| (r.0, r.1));
        let mut out = String::new();
        for (frame, ped, [x, y]) in rows {
            let _ = writeln!(out, "{frame}\t{ped}\t{x:.6}\t{y:.6}");
        }
        out
    }
}

/// Most common positive frame difference between consecutive rows of a track;
/// ties resolve to the smaller step.
fn infer_frame_step(tracks: &BTreeMap<i64, Vec<TrackPoint>>) -> i64 {
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for t in tracks.values() {
        for w in t.windows(2) {
            *counts.entry(w[1].frame - w[0].frame).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map_or(1, |(step, _)| step)
}

fn parse_integral(tok: &str) -> Option<i64> {
    if let Ok(v) = tok.parse::<i64>() {
        return Some(v);
    }
    let v: f64 = tok.parse().ok()?;
    (v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

/// Parses whitespace-separated `frame pedestrian x y` rows. Blank lines and
/// lines starting with `#` are ignored.
pub fn parse_scene(text: &str, scene_id: &str, path: &Path) -> Result<TrajectoryScene> {
    let mut rows = Vec::new();
    let mut rejected = 0;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", toks.len())));
        }
        let frame = parse_integral(toks[0])
            .ok_or_else(|| err(format!("invalid frame id `{}`", toks[0])))?;
        let ped = parse_integral(toks[1])
            .ok_or_else(|| err(format!("invalid pedestrian id `{}`", toks[1])))?;
        let mut pos = [0.0; 2];
        for (k, tok) in toks[2..].iter().enumerate() {
            pos[k] = tok
                .parse::<f64>()
                .map_err(|_| err(format!("invalid coordinate `{tok}`")))?;
        }
        if !pos.iter().all(|v| v.is_finite()) {
            rejected += 1;
            continue;
        }
        rows.push((frame, ped, pos));
    }
    if rows.is_empty() {
        return Err(Error::EmptyScene(path.to_path_buf()));
    }
    if rejected > 0 {
        log::warn!("{}: dropped {rejected} rows with non-finite coordinates", path.display());
    }
    let mut scene = TrajectoryScene::from_rows(scene_id, rows)?;
    scene.rejected_rows = rejected;
    Ok(scene)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<TrajectoryScene> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let id = path
        .file_name()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    parse_scene(&text, &id, path)
}

/// Scenes grouped by dataset name (one sub-directory each).
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub root: PathBuf,
    pub datasets: BTreeMap<String, Vec<TrajectoryScene>>,
}

impl Corpus {
    pub fn scenes(&self) -> impl Iterator<Item = &TrajectoryScene> {
        self.datasets.values().flatten()
    }

    pub fn scene(&self, scene_id: &str) -> Option<&TrajectoryScene> {
        self.scenes().find(|s| s.scene_id == scene_id)
    }
}

/// Lists scene files as `(dataset, path)` in sorted order, skipping hidden entries.
pub fn scene_files(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && !is_hidden(p))
        .collect();
    dirs.sort();
    for dir in dirs {
        let name = dir.file_name().unwrap().to_string_lossy().into_owned();
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && !is_hidden(p))
            .collect();
        files.sort();
        out.extend(files.into_iter().map(|f| (name.clone(), f)));
    }
    Ok(out)
}

fn is_hidden(p: &Path) -> bool {
    p.file_name()
        .map_or(false, |n| n.to_string_lossy().starts_with('.'))
}

/// Loads every scene under `root/<dataset>/<file>`. Scene ids are `dataset/file`.
pub fn load_corpus(root: impl AsRef<Path>) -> Result<Corpus> {
    let root = root.as_ref();
    let files = scene_files(root)?;
    if files.is_empty() {
        return Err(Error::EmptyCorpus(root.to_path_buf()));
    }
    let mut datasets: BTreeMap<String, Vec<TrajectoryScene>> = BTreeMap::new();
    for (dataset, path) in files {
        let text = fs::read_to_string(&path)?;
        let id = format!(
            "{dataset}/{}",
            path.file_name().unwrap().to_string_lossy()
        );
        let scene = parse_scene(&text, &id, &path)?;
        datasets.entry(dataset).or_default().push(scene);
    }
    Ok(Corpus {
        root: root.to_path_buf(),
        datasets,
    })
}
