use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pccsnet::checkpoint::{bytes_hash, load_checkpoint, write_checkpoint};
use pccsnet::data::{
    load_corpus, load_scene, read_cache, source_fingerprint, window_tracks, write_cache, Corpus, TrackWindow,
    CACHE_FILE,
};
use pccsnet::metrics::evaluate;
use pccsnet::pipeline::train_full;
use pccsnet::synthetic::{intersection, write_corpus, IntersectionConfig};
use pccsnet::{Error, Point, RunConfig, OBS_LEN};

#[derive(Parser)]
#[command(name = "pccsnet", version, about = "Multimodal trajectory prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// key=value configuration file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    holdout: Option<String>,
    #[arg(long = "k-clusters")]
    k_clusters: Option<usize>,
    #[arg(long)]
    wh: Option<f64>,
    #[arg(long)]
    wf: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    dv: Option<f64>,
    #[arg(long)]
    dtheta: Option<f64>,
    #[arg(long)]
    topk: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "epochs-stage1")]
    epochs_stage1: Option<usize>,
    #[arg(long = "epochs-stage2")]
    epochs_stage2: Option<usize>,
    #[arg(long = "epochs-stage3")]
    epochs_stage3: Option<usize>,
}

impl Common {
    fn resolve(&self) -> pccsnet::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.data {
            c.data = v.clone();
        }
        if let Some(v) = &self.holdout {
            c.holdout = v.clone();
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        let t = &mut c.train;
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        set!(self.k_clusters => t.k);
        set!(self.wh => t.w_history);
        set!(self.wf => t.w_future);
        set!(self.radius => t.qualify.radius);
        set!(self.dv => t.qualify.speed_tolerance);
        set!(self.dtheta => t.qualify.angle_tolerance);
        set!(self.epochs_stage1 => t.pretrain_epochs);
        set!(self.epochs_stage2 => t.classifier_epochs);
        set!(self.epochs_stage3 => t.synthesis_epochs);
        set!(self.topk => c.topk);
        set!(self.seed => c.seed);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Axis {
    Deep,
    K,
    Weights,
    Loss,
    Synthesis,
}

#[derive(Subcommand)]
enum Command {
    /// Window every scene under --data, cache the windows, print counts
    Prepare(Common),
    /// Train on all datasets except --holdout; writes model.pccs and training_log.csv
    Train(Common),
    /// Predict the top-k continuations of every track in a scene file
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint on the --holdout dataset
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train and evaluate over one configuration axis
    Ablate {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated grid values; defaults to the reference grid of the axis
        #[arg(long)]
        grid: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Render predictions as SVG, one file per track
    Plot {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the synthetic three-branch intersection corpus
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnknownDataset(_) | Error::EmptyCorpus(_) => 2,
        Error::Stage { source, .. } => exit_code(source),
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Command) -> pccsnet::Result<()> {
    match cmd {
        Command::Prepare(c) => prepare(&c.resolve()?),
        Command::Train(c) => train(&c.resolve()?),
        Command::Predict {
            checkpoint,
            input,
            common,
        } => predict(&checkpoint, &input, &common),
        Command::Eval { checkpoint, common } => eval(&checkpoint, &common.resolve()?),
        Command::Ablate { axis, grid, common } => ablate(axis, grid.as_deref(), &common.resolve()?),
        Command::Plot {
            predictions,
            scene,
            out,
        } => plot(&predictions, &scene, &out),
        Command::Synth { out, seed } => {
            let data = intersection(&IntersectionConfig {
                seed,
                ..IntersectionConfig::default()
            });
            write_corpus(&data.corpus, &out)?;
            let mut labels = String::from("scene,pedestrian,branch\n");
            for ((s, p), b) in &data.labels {
                writeln!(labels, "{s},{p},{b}").unwrap();
            }
            fs::write(out.join("labels.csv"), labels)?;
            println!("wrote synthetic corpus to {}", out.display());
            Ok(())
        }
    }
}

/// Corpus and its windows, read from the cache when it matches the sources.
fn prepared(root: &Path) -> pccsnet::Result<(Corpus, Vec<TrackWindow>)> {
    let corpus = load_corpus(root)?;
    let fingerprint = source_fingerprint(root)?;
    let cache = root.join(CACHE_FILE);
    let windows = match read_cache(&cache, &fingerprint) {
        Ok(Some(w)) => w,
        _ => {
            let w: Vec<TrackWindow> = corpus.scenes().flat_map(|s| window_tracks(s, 1)).collect();
            if let Err(e) = write_cache(&cache, &fingerprint, &w) {
                log::warn!("could not write window cache: {e}");
            }
            w
        }
    };
    Ok((corpus, windows))
}

fn split(
    corpus: &Corpus,
    windows: Vec<TrackWindow>,
    holdout: &str,
) -> pccsnet::Result<(Vec<TrackWindow>, Vec<TrackWindow>, Vec<pccsnet::data::TrajectoryScene>)> {
    if !corpus.datasets.contains_key(holdout) {
        return Err(Error::UnknownDataset(holdout.to_string()));
    }
    let (test, train): (Vec<_>, Vec<_>) = windows.into_iter().partition(|w| w.dataset() == holdout);
    let scenes = corpus
        .datasets
        .iter()
        .filter(|(n, _)| n.as_str() != holdout)
        .flat_map(|(_, s)| s.iter().cloned())
        .collect();
    Ok((train, test, scenes))
}

fn prepare(c: &RunConfig) -> pccsnet::Result<()> {
    let (corpus, windows) = prepared(&c.data)?;
    let mut counts: BTreeMap<&str, usize> = corpus.datasets.keys().map(|k| (k.as_str(), 0)).collect();
    for w in &windows {
        *counts.entry(w.dataset()).or_default() += 1;
    }
    for (name, n) in &counts {
        println!("{name}\t{n}");
    }
    println!("total\t{}", windows.len());
    Ok(())
}

fn train(c: &RunConfig) -> pccsnet::Result<()> {
    let (corpus, windows) = prepared(&c.data)?;
    let (train, _, scenes) = split(&corpus, windows, &c.holdout)?;
    log::info!("training on {} windows (holdout {})", train.len(), c.holdout);
    let (bundle, log) = train_full(&c.train, &train, &scenes, c.seed)?;
    fs::create_dir_all(&c.out)?;
    let bytes = write_checkpoint(&bundle);
    let path = c.out.join("model.pccs");
    fs::write(&path, &bytes)?;
    fs::write(c.out.join("training_log.csv"), log.to_csv())?;
    println!("{}\t{}", path.display(), bytes_hash(&bytes));
    Ok(())
}

fn predict(checkpoint: &Path, input: &Path, common: &Common) -> pccsnet::Result<()> {
    let bundle = load_checkpoint(checkpoint)?;
    let topk = common.topk.unwrap_or(20).min(bundle.k());
    if topk == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("predictions.csv"));
    let scene = load_scene(input)?;
    let mut csv = String::from("track,rank,modality,probability");
    for t in 1..=pccsnet::PRED_LEN {
        write!(csv, ",x{t},y{t}").unwrap();
    }
    csv.push('\n');
    for (ped, track) in &scene.tracks {
        let tail = &track[track.len().saturating_sub(OBS_LEN)..];
        let contiguous = tail.windows(2).all(|p| p[1].frame - p[0].frame == scene.frame_step);
        if tail.len() < OBS_LEN || !contiguous {
            log::warn!("track {ped}: fewer than {OBS_LEN} contiguous frames, skipped");
            continue;
        }
        let obs: [Point; OBS_LEN] = std::array::from_fn(|i| tail[i].pos);
        let set = bundle.predict_topk(&obs, topk)?;
        for (rank, e) in set.entries.iter().enumerate() {
            write!(csv, "{ped},{},{},{:.9}", rank + 1, e.modality, e.probability).unwrap();
            for p in &e.trajectory {
                write!(csv, ",{:.6},{:.6}", p[0], p[1]).unwrap();
            }
            csv.push('\n');
        }
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&out, csv)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn eval(checkpoint: &Path, c: &RunConfig) -> pccsnet::Result<()> {
    let bundle = load_checkpoint(checkpoint)?;
    let (corpus, windows) = prepared(&c.data)?;
    let (_, test, _) = split(&corpus, windows, &c.holdout)?;
    let k = c.topk.min(bundle.k());
    let report = evaluate(&bundle, &test, k, &c.holdout)?;
    fs::create_dir_all(&c.out)?;
    let path = c.out.join(format!("metrics_{}.csv", c.holdout));
    fs::write(&path, report.to_csv())?;
    println!("{}", report.summary());
    Ok(())
}

fn default_grid(axis: Axis) -> &'static str {
    match axis {
        Axis::Deep => "raw,deep",
        Axis::K => "100,200,500,1000",
        Axis::Weights => "1:3,1:2,1:1,2:1,3:1",
        Axis::Loss => "0/0/0,1/0.1/0.1pi",
        Axis::Synthesis => "off,on",
    }
}

fn parse_angle(s: &str) -> Option<f64> {
    match s.strip_suffix("pi") {
        Some(f) => Some(f.parse::<f64>().ok()? * std::f64::consts::PI),
        None => s.parse().ok(),
    }
}

fn apply_point(axis: Axis, value: &str, c: &mut RunConfig) -> pccsnet::Result<()> {
    let bad = || Error::Config(format!("bad grid value `{value}` for this axis"));
    let t = &mut c.train;
    match axis {
        Axis::Deep => t.deep_clustering = value == "deep",
        Axis::Synthesis => t.synthesis = value == "on",
        Axis::K => t.k = value.parse().map_err(|_| bad())?,
        Axis::Weights => {
            let (a, b) = value.split_once(':').ok_or_else(bad)?;
            let (a, b): (f64, f64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
            t.w_history = a / (a + b);
            t.w_future = b / (a + b);
        }
        Axis::Loss => {
            let parts: Vec<&str> = value.split('/').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            t.qualify.radius = parts[0].parse().map_err(|_| bad())?;
            t.qualify.speed_tolerance = parts[1].parse().map_err(|_| bad())?;
            t.qualify.angle_tolerance = parse_angle(parts[2]).ok_or_else(bad)?;
        }
    }
    c.validate()
}

fn ablate(axis: Axis, grid: Option<&str>, c: &RunConfig) -> pccsnet::Result<()> {
    let (corpus, windows) = prepared(&c.data)?;
    let (train, test, scenes) = split(&corpus, windows, &c.holdout)?;
    let mut csv = String::from("axis,value,ade,fde,min_ade_k,min_fde_k,status\n");
    let axis_name = axis.to_possible_value().unwrap().get_name().to_string();
    for value in grid.unwrap_or(default_grid(axis)).split(',').map(str::trim) {
        let mut point = c.clone();
        let result = apply_point(axis, value, &mut point).and_then(|()| {
            let (bundle, _) = train_full(&point.train, &train, &scenes, point.seed)?;
            evaluate(&bundle, &test, point.topk.min(bundle.k()), &point.holdout)
        });
        match result {
            Ok(r) => {
                println!("{axis_name}={value}: {}", r.summary());
                writeln!(
                    csv,
                    "{axis_name},{value},{:.6},{:.6},{:.6},{:.6},ok",
                    r.ade, r.fde, r.min_ade, r.min_fde
                )
                .unwrap();
            }
            Err(e) => {
                eprintln!("{axis_name}={value}: {e}");
                writeln!(csv, "{axis_name},{value},,,,,\"{}\"", e.to_string().replace('"', "'")).unwrap();
            }
        }
    }
    fs::create_dir_all(&c.out)?;
    let path = c.out.join(format!("ablation_{axis_name}.csv"));
    fs::write(&path, csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

struct PredictionRow {
    probability: f64,
    trajectory: Vec<Point>,
}

fn read_predictions(path: &Path) -> pccsnet::Result<BTreeMap<i64, Vec<PredictionRow>>> {
    let text = fs::read_to_string(path)?;
    let mut out: BTreeMap<i64, Vec<PredictionRow>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let parse_err = |m: &str| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: m.to_string(),
        };
        if fields.len() != 4 + 2 * pccsnet::PRED_LEN {
            return Err(parse_err("wrong number of columns"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err("not a number"));
        let track = fields[0].parse::<i64>().map_err(|_| parse_err("bad track id"))?;
        let trajectory = fields[4..]
            .chunks(2)
            .map(|c| Ok([num(c[0])?, num(c[1])?]))
            .collect::<pccsnet::Result<_>>()?;
        out.entry(track).or_default().push(PredictionRow {
            probability: num(fields[3])?,
            trajectory,
        });
    }
    Ok(out)
}

fn polyline(points: &[Point], map: &impl Fn(Point) -> (f64, f64), style: &str) -> String {
    let pts: Vec<String> = points
        .iter()
        .map(|p| {
            let (x, y) = map(*p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    format!("<polyline fill=\"none\" {style} points=\"{}\"/>\n", pts.join(" "))
}

fn plot(predictions: &Path, scene_path: &Path, out: &Path) -> pccsnet::Result<()> {
    let preds = read_predictions(predictions)?;
    let scene = load_scene(scene_path)?;
    if preds.is_empty() {
        log::warn!("no predictions in {}; nothing to plot", predictions.display());
        return Ok(());
    }
    fs::create_dir_all(out)?;
    let size = 400.0;
    let margin = 20.0;
    for (track, rows) in &preds {
        let Some(points) = scene.tracks.get(track) else {
            log::warn!("track {track} not found in {}, skipped", scene_path.display());
            continue;
        };
        let observed: Vec<Point> = points.iter().map(|p| p.pos).collect();
        let all = observed.iter().chain(rows.iter().flat_map(|r| r.trajectory.iter()));
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in all {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-6);
        let scale = (size - 2.0 * margin) / span;
        let map = |p: Point| (margin + (p[0] - lo[0]) * scale, size - margin - (p[1] - lo[1]) * scale);
        let p_max = rows.iter().map(|r| r.probability).fold(0.0, f64::max).max(1e-12);

        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        );
        // low-probability hypotheses first so darker strokes end on top
        let mut order: Vec<&PredictionRow> = rows.iter().collect();
        order.sort_by(|a, b| a.probability.total_cmp(&b.probability));
        for r in order {
            let shade = (220.0 * (1.0 - r.probability / p_max)).round() as u8;
            let mut path = vec![observed[observed.len() - 1]];
            path.extend(&r.trajectory);
            svg += &polyline(
                &path,
                &map,
                &format!("stroke=\"rgb({shade},{shade},{shade})\" stroke-width=\"2\""),
            );
        }
        svg += &polyline(&observed, &map, "stroke=\"rgb(30,90,200)\" stroke-width=\"2.5\"");
        svg += "</svg>\n";
        fs::write(out.join(format!("track_{track}.svg")), svg)?;
    }
    Ok(())
}
