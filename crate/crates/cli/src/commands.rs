use std::path::{Path, PathBuf};

use clap::builder::PossibleValuesParser;
use clap::ArgMatches;
use serde::Serialize;
use vista_core::augment::{augment_dataset, augment_report, derive_rng, thread_pool, AugmentConfig};
use vista_core::dataset::{write_json, Dataset};
use vista_core::eval::{evaluate, EvalConfig, SuccessReport, DEFAULT_EPISODES};
use vista_core::filter::{perceptual_distance, FilterParams, DEFAULT_ETA, DEFAULT_MAX_TRIES};
use vista_core::geometry::{relative_pose, Intrinsics, Vec3};
use vista_core::imaging::{load_png, save_png};
use vista_core::nvs::{backend_from_id, FrozenScene, NvsRequest, BACKEND_IDS};
use vista_core::policy::{FeatureConfig, KnnPolicy, DEFAULT_FEAT_SIZE, DEFAULT_K};
use vista_core::posesample::ViewDistribution;
use vista_core::scenesim::{default_camera, gen_demos as write_demos, render as render_scene};
use vista_core::scenesim::{DemoConfig, Scene, HORIZON, ROBOT_BASE};

use crate::chart;
use crate::config::{CliError, PipelineConfig, Resolver, DEFAULT_FOV_DEG, DEFAULT_N, DEFAULT_SIZE};
use crate::ConfigArg;

const DIST_NAMES: [&str; 4] = ["original", "perturb", "perturb_wide", "arc"];

fn dist_parser() -> PossibleValuesParser {
    PossibleValuesParser::new(DIST_NAMES)
}

fn distribution(name: &str) -> ViewDistribution {
    ViewDistribution::from_name(name, Vec3::from(ROBOT_BASE)).expect("names are checked by clap")
}

#[derive(Debug, Clone, clap::Args)]
pub struct JobsArg {
    /// Worker threads; outputs do not depend on it [default: all cores]
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
}

impl JobsArg {
    fn get(&self) -> Option<usize> {
        self.jobs.map(usize::from)
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct ForceArg {
    /// Overwrite existing outputs
    #[arg(long)]
    pub force: bool,
}

fn check_output_file(path: &Path, force: bool) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::Io(format!(
            "{}: already exists (pass --force to overwrite)",
            path.display()
        )));
    }
    Ok(())
}

#[derive(Debug, clap::Args)]
pub struct GenDemosArgs {
    /// Output dataset directory
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Number of demonstrations
    #[arg(long, default_value_t = DEFAULT_N)]
    pub n: usize,
    /// Master seed for the episode resets
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Vertical field of view in degrees
    #[arg(long, default_value_t = DEFAULT_FOV_DEG)]
    pub fov: f64,
    /// Image width and height in pixels
    #[arg(long, default_value_t = DEFAULT_SIZE)]
    pub size: u32,
    /// Also record the wrist camera
    #[arg(long)]
    pub wrist: bool,
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub jobs: JobsArg,
    #[command(flatten)]
    pub force: ForceArg,
}

pub fn gen_demos(args: &GenDemosArgs, m: &ArgMatches) -> Result<(), CliError> {
    let file = PipelineConfig::load(args.config.config.as_deref())?.gen_demos;
    let r = Resolver::new(m, file.is_some());
    let f = file.unwrap_or_default();
    let n = r.pick("n", args.n, f.n);
    let seed = r.pick("seed", args.seed, f.seed);
    let fov = r.pick("fov", args.fov, f.fov_deg);
    let size = r.pick("size", args.size, f.size);
    let wrist = r.pick("wrist", args.wrist, f.wrist);
    let intrinsics = Intrinsics::new(fov, size, size)?;
    let cfg = DemoConfig {
        n,
        seed,
        camera: default_camera(),
        intrinsics,
        wrist,
    };
    let pool = thread_pool(args.jobs.get())?;
    let ds = pool.install(|| write_demos(&cfg, &args.out, args.force.force))?;
    let mut frames = 0;
    for i in 0..ds.num_trajectories() {
        frames += ds.load_actions(i)?.len();
    }
    println!(
        "wrote {} demonstrations ({frames} frames) to {}",
        ds.num_trajectories(),
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, clap::Args)]
pub struct AugmentArgs {
    /// Source dataset directory
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    /// Output dataset directory
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Novel-view synthesis backend
    #[arg(long, default_value = "reproject", value_parser = PossibleValuesParser::new(BACKEND_IDS))]
    pub backend: String,
    /// Target viewpoint distribution
    #[arg(long, default_value = "perturb", value_parser = dist_parser())]
    pub dist: String,
    /// Augmented copies per source trajectory
    #[arg(long, default_value_t = 1)]
    pub copies: usize,
    /// Rejection threshold on the perceptual distance
    #[arg(long, default_value_t = DEFAULT_ETA)]
    pub eta: f64,
    /// Synthesis attempts before falling back to the source frame
    #[arg(long, default_value_t = DEFAULT_MAX_TRIES)]
    pub max_tries: u32,
    /// Master seed for viewpoint sampling
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Corrupt depth before reprojection (selects the reproject_noisydepth backend)
    #[arg(long)]
    pub noisy_depth: bool,
    /// Also write every source trajectory unchanged as copy 0
    #[arg(long)]
    pub keep_original: bool,
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub jobs: JobsArg,
    #[command(flatten)]
    pub force: ForceArg,
}

fn resolve_augment(args: &AugmentArgs, m: &ArgMatches) -> Result<AugmentConfig, CliError> {
    let file = PipelineConfig::load(args.config.config.as_deref())?.augment;
    let r = Resolver::new(m, file.is_some());
    let f = file.unwrap_or_default();
    let mut backend = r.pick("backend", args.backend.clone(), f.backend);
    if args.noisy_depth {
        if backend != "reproject" && backend != "reproject_noisydepth" {
            return Err(CliError::Config(format!(
                "--noisy-depth needs a reprojection backend, got `{backend}`"
            )));
        }
        backend = "reproject_noisydepth".into();
    }
    let cfg = AugmentConfig {
        backend,
        distribution: r.pick("dist", distribution(&args.dist), f.distribution),
        copies: r.pick("copies", args.copies, f.copies),
        filter: FilterParams {
            eta: r.pick("eta", args.eta, f.filter.eta),
            max_tries: r.pick("max_tries", args.max_tries, f.filter.max_tries),
        },
        seed: r.pick("seed", args.seed, f.seed),
        keep_original: r.pick("keep_original", args.keep_original, f.keep_original),
        depth_noise: f.depth_noise,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn augment(args: &AugmentArgs, m: &ArgMatches) -> Result<(), CliError> {
    let cfg = resolve_augment(args, m)?;
    let src = Dataset::open(&args.input)?;
    let dst = augment_dataset(&src, &cfg, &args.out, args.force.force, args.jobs.get())?;
    let report = augment_report(&dst)?;
    println!(
        "wrote {} trajectories to {}: {} frames synthesized, acceptance {:.3}, {} fallbacks, mean distance {:.4}",
        dst.num_trajectories(),
        args.out.display(),
        report.frames,
        report.acceptance_rate,
        report.fallbacks,
        report.mean_distance
    );
    Ok(())
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// Training dataset directory
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Output policy file
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Neighbors averaged per action
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Side length of the downsampled feature image
    #[arg(long, default_value_t = DEFAULT_FEAT_SIZE)]
    pub feat_size: u32,
    /// Append wrist-camera features (the dataset must contain wrist frames)
    #[arg(long)]
    pub wrist: bool,
    /// Append gripper position and closed flag
    #[arg(long)]
    pub proprio: bool,
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub force: ForceArg,
}

pub fn train(args: &TrainArgs, m: &ArgMatches) -> Result<(), CliError> {
    let file = PipelineConfig::load(args.config.config.as_deref())?.train;
    let r = Resolver::new(m, file.is_some());
    let f = file.unwrap_or_default();
    let k = r.pick("k", args.k, f.k);
    let features = FeatureConfig {
        feat_size: r.pick("feat_size", args.feat_size, f.features.feat_size),
        use_wrist: r.pick("wrist", args.wrist, f.features.use_wrist),
        use_proprio: r.pick("proprio", args.proprio, f.features.use_proprio),
    };
    features.validate()?;
    if k == 0 {
        return Err(CliError::Config("k must be at least 1".into()));
    }
    check_output_file(&args.out, args.force.force)?;
    let ds = Dataset::open(&args.data)?;
    let policy = KnnPolicy::fit(&ds, features, k)?;
    policy.save(&args.out)?;
    println!(
        "fitted k-NN policy (k = {k}, {} samples, {} features) -> {}",
        policy.len(),
        features.dim(),
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, clap::Args)]
pub struct EvalSettings {
    /// Episodes per seed
    #[arg(long, default_value_t = DEFAULT_EPISODES)]
    pub episodes: usize,
    /// Comma-separated evaluation seeds
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    /// Step limit per episode
    #[arg(long, default_value_t = HORIZON)]
    pub horizon: u32,
    /// Master seed for resets and test cameras
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Policy file written by `train`
    #[arg(long, value_name = "FILE")]
    pub policy: PathBuf,
    /// Test viewpoint distribution
    #[arg(long, default_value = "perturb", value_parser = dist_parser())]
    pub dist: String,
    #[command(flatten)]
    pub settings: EvalSettings,
    /// Write the full report as JSON
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub jobs: JobsArg,
    #[command(flatten)]
    pub force: ForceArg,
}

fn resolve_eval(
    config: &ConfigArg,
    s: &EvalSettings,
    dist: &str,
    m: &ArgMatches,
) -> Result<EvalConfig, CliError> {
    let file = PipelineConfig::load(config.config.as_deref())?.eval;
    let r = Resolver::new(m, file.is_some());
    let f = file.unwrap_or_default();
    let cfg = EvalConfig {
        distribution: r.pick("dist", distribution(dist), f.distribution),
        episodes: r.pick("episodes", s.episodes, f.episodes),
        seeds: r.pick("seeds", s.seeds.clone(), f.seeds),
        horizon: r.pick("horizon", s.horizon, f.horizon),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run_eval(policy: &KnnPolicy, cfg: &EvalConfig, rng_seed: u64, jobs: Option<usize>) -> Result<SuccessReport, CliError> {
    let camera = vista_core::geometry::CameraPose::new(policy.camera());
    Ok(evaluate(policy, cfg, &camera, &policy.intrinsics(), rng_seed, jobs)?)
}

pub fn eval(args: &EvalArgs, m: &ArgMatches) -> Result<(), CliError> {
    let cfg = resolve_eval(&args.config, &args.settings, &args.dist, m)?;
    if let Some(out) = &args.out {
        check_output_file(out, args.force.force)?;
    }
    let policy = KnnPolicy::load(&args.policy)?;
    let report = run_eval(&policy, &cfg, args.settings.rng_seed, args.jobs.get())?;
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    println!(
        "{}: success {:.3} ± {:.3} (reach {:.3}) over {} seeds × {} episodes",
        report.distribution.name(),
        report.mean,
        report.sem,
        report.reach_rate,
        cfg.seeds.len(),
        cfg.episodes
    );
    Ok(())
}

#[derive(Debug, clap::Args)]
pub struct CompareArgs {
    /// Policy to compare, as NAME=FILE; repeat for each policy
    #[arg(long = "policy", value_name = "NAME=FILE", required = true, value_parser = parse_named)]
    pub policies: Vec<(String, PathBuf)>,
    /// Comma-separated test distributions
    #[arg(long, value_delimiter = ',', default_value = "original,perturb", value_parser = dist_parser())]
    pub dists: Vec<String>,
    #[command(flatten)]
    pub settings: EvalSettings,
    /// Write the table as JSON
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
    /// Write a bar chart of the table as PNG
    #[arg(long, value_name = "FILE")]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub jobs: JobsArg,
    #[command(flatten)]
    pub force: ForceArg,
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected NAME=FILE, got `{s}`")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareCell {
    pub distribution: String,
    pub mean: f64,
    pub sem: f64,
    pub reach_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub name: String,
    pub policy: PathBuf,
    pub cells: Vec<CompareCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareTable {
    pub version: u32,
    pub episodes_per_seed: usize,
    pub seeds: Vec<u64>,
    pub rng_seed: u64,
    pub distributions: Vec<String>,
    pub rows: Vec<CompareRow>,
}

/// `mean±sem` with three decimals, as printed in the text table.
pub fn cell_text(c: &CompareCell) -> String {
    format!("{:.3}±{:.3}", c.mean, c.sem)
}

fn render_table(t: &CompareTable) -> String {
    let name_w = t.rows.iter().map(|r| r.name.chars().count()).max().unwrap_or(0).max("policy".len());
    let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.cells.iter().map(cell_text).collect()).collect();
    let col_w: Vec<usize> = t
        .distributions
        .iter()
        .enumerate()
        .map(|(j, d)| cells.iter().map(|c| c[j].chars().count()).max().unwrap_or(0).max(d.len()))
        .collect();
    let mut out = format!("{:<name_w$}", "policy");
    for (d, w) in t.distributions.iter().zip(&col_w) {
        out += &format!("  {d:>w$}");
    }
    out.push('\n');
    for (row, cs) in t.rows.iter().zip(&cells) {
        out += &format!("{:<name_w$}", row.name);
        for (c, w) in cs.iter().zip(&col_w) {
            out += &format!("  {c:>w$}");
        }
        out.push('\n');
    }
    out
}

pub fn compare(args: &CompareArgs) -> Result<(), CliError> {
    for out in args.json.iter().chain(&args.plot) {
        check_output_file(out, args.force.force)?;
    }
    let policies = args
        .policies
        .iter()
        .map(|(name, path)| Ok((name, path, KnnPolicy::load(path)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = CompareTable {
        version: 1,
        episodes_per_seed: args.settings.episodes,
        seeds: args.settings.seeds.clone(),
        rng_seed: args.settings.rng_seed,
        distributions: args.dists.clone(),
        rows: Vec::new(),
    };
    for (name, path, policy) in &policies {
        let mut cells = Vec::new();
        for d in &args.dists {
            let cfg = EvalConfig {
                distribution: distribution(d),
                episodes: args.settings.episodes,
                seeds: args.settings.seeds.clone(),
                horizon: args.settings.horizon,
            };
            cfg.validate()?;
            let r = run_eval(policy, &cfg, args.settings.rng_seed, args.jobs.get())?;
            cells.push(CompareCell {
                distribution: d.clone(),
                mean: r.mean,
                sem: r.sem,
                reach_rate: r.reach_rate,
            });
        }
        table.rows.push(CompareRow {
            name: name.to_string(),
            policy: path.to_path_buf(),
            cells,
        });
    }
    print!("{}", render_table(&table));
    if let Some(p) = &args.json {
        write_json(p, &table)?;
    }
    if let Some(p) = &args.plot {
        save_png(p, &chart::bar_chart(&table))?;
    }
    Ok(())
}

#[derive(Debug, clap::Args)]
pub struct RenderArgs {
    /// Dataset directory holding the source frame
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Trajectory index
    #[arg(long, default_value_t = 0)]
    pub traj: usize,
    /// Frame index within the trajectory
    #[arg(long, default_value_t = 0)]
    pub t: usize,
    /// Novel-view synthesis backend
    #[arg(long, default_value = "reproject", value_parser = PossibleValuesParser::new(BACKEND_IDS))]
    pub backend: String,
    /// Target viewpoint distribution
    #[arg(long, default_value = "perturb", value_parser = dist_parser())]
    pub dist: String,
    /// Seed for the target viewpoint
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output PNG for the synthesized view
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Also write the valid-pixel mask (white where geometry was splatted)
    #[arg(long, value_name = "FILE")]
    pub save_mask: Option<PathBuf>,
    #[command(flatten)]
    pub force: ForceArg,
}

pub fn render(args: &RenderArgs) -> Result<(), CliError> {
    for out in std::iter::once(&args.out).chain(&args.save_mask) {
        check_output_file(out, args.force.force)?;
    }
    let ds = Dataset::open(&args.data)?;
    if args.traj >= ds.num_trajectories() {
        return Err(CliError::Config(format!(
            "--traj {} out of range: dataset has {} trajectories",
            args.traj,
            ds.num_trajectories()
        )));
    }
    let traj = ds.load_trajectory(args.traj)?;
    if args.t >= traj.len() {
        return Err(CliError::Config(format!(
            "--t {} out of range: trajectory has {} frames",
            args.t,
            traj.len()
        )));
    }
    let intr = ds.manifest().intrinsics();
    let context = match &traj.poses {
        Some(p) => vista_core::geometry::CameraPose::new(p[args.t]),
        None => ds.manifest().camera(),
    };
    let state = traj.states.as_ref().map(|s| s[args.t]).ok_or_else(|| {
        CliError::Io(format!("{}: dataset has no simulator states", args.data.display()))
    })?;
    let frozen = FrozenScene {
        scene: Scene::default_tabletop(&state),
        context,
    };
    let (_, depth) = render_scene(&frozen.scene, &context, &intr);
    let backend = backend_from_id(&args.backend, Default::default())?;
    let mut rng = derive_rng(args.seed, args.traj, args.t, 1, 1);
    let target = distribution(&args.dist).sample(&context, &mut rng)?;
    let src = &traj.frames[args.t];
    let req = NvsRequest {
        rgb: src,
        depth: Some(&depth),
        intr,
        relative: relative_pose(&context, &target),
        scene: Some(&frozen),
    };
    let out = backend.synthesize(&req, &mut rng)?;
    save_png(&args.out, &out.rgb)?;
    if let Some(p) = &args.save_mask {
        save_png(p, &out.valid_mask.to_image())?;
    }
    let valid = out.valid_mask.count() as f64 / intr.pixel_count() as f64;
    println!(
        "distance {:.4}, valid pixels {:.3}, camera moved {:.4} m",
        perceptual_distance(src, &out.rgb)?,
        valid,
        (target.position() - context.position()).norm()
    );
    Ok(())
}

#[derive(Debug, clap::Args)]
pub struct MetricArgs {
    /// First PNG image
    pub a: PathBuf,
    /// Second PNG image, same size as the first
    pub b: PathBuf,
}

pub fn metric(args: &MetricArgs) -> Result<(), CliError> {
    let a = load_png(&args.a)?;
    let b = load_png(&args.b)?;
    println!("{}", perceptual_distance(&a, &b)?);
    Ok(())
}
