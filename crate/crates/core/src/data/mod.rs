//! Trajectory files, windowing, normalization, splits and neighbor search.

mod cache;
mod neighbors;
mod scene;
mod window;

pub use cache::{
    decode_windows, encode_windows, read_cache, source_fingerprint, write_cache, CACHE_FILE,
    CACHE_VERSION,
};
pub use neighbors::{
    angle_between, heading, qualified_paths, FutureSegment, QualifyParams, SceneIndex,
    STATIONARY_SPEED,
};
pub use scene::{load_corpus, load_scene, parse_scene, scene_files, Corpus, TrackPoint, TrajectoryScene};
pub use window::{
    corpus_windows, leave_one_out_split, normalize, window_tracks, NormTransform, TrackWindow,
};
