//! Closed-loop evaluation under a test-camera distribution.
//!
//! Each episode resets the task from a derived seed, draws one third-person
//! camera from the distribution and keeps it for the whole episode. Success
//! rates are reported per seed, with their mean and standard error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::thread_pool;
use crate::error::{Result, VistaError};
use crate::geometry::{CameraPose, Intrinsics, RigidTransform, Vec3};
use crate::policy::KnnPolicy;
use crate::posesample::ViewDistribution;
use crate::rng::{derive_seed, SeededRng};
use crate::scenesim::{
    expert_action, observe, reset, step, Action, Observation, TaskState, GRASP_RADIUS, HORIZON,
    MAX_STEP,
};

pub const REPORT_VERSION: u32 = 1;
pub const DEFAULT_EPISODES: usize = 50;
pub const DEFAULT_SEEDS: [u64; 3] = [0, 1, 2];

const RESET_STREAM: u64 = 0x6576_616c;
const CAMERA_STREAM: u64 = 0x6361_6d65;

/// Anything that maps observations to actions.
///
/// `state` is the simulator state. Learned policies must ignore it; the
/// scripted baselines read it.
pub trait Policy: Sync {
    fn act(&self, obs: &Observation, state: &TaskState) -> Result<Action>;

    fn needs_wrist(&self) -> bool {
        false
    }
}

impl Policy for KnnPolicy {
    fn act(&self, obs: &Observation, _state: &TaskState) -> Result<Action> {
        KnnPolicy::act(self, obs)
    }

    fn needs_wrist(&self) -> bool {
        self.feature_config().use_wrist
    }
}

/// The scripted demonstrator.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExpertPolicy;

impl Policy for ExpertPolicy {
    fn act(&self, _obs: &Observation, state: &TaskState) -> Result<Action> {
        Ok(expert_action(state))
    }
}

/// Uniform random deltas and gripper commands, seeded per state.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy {
    pub seed: u64,
}

impl Policy for RandomPolicy {
    fn act(&self, _obs: &Observation, state: &TaskState) -> Result<Action> {
        let g = state.gripper_pos;
        let mut rng = SeededRng::from_counters(
            self.seed,
            &[state.t as u64, g.x.to_bits(), g.y.to_bits(), g.z.to_bits()],
        );
        let d = Vec3::new(
            rng.uniform_range(-MAX_STEP, MAX_STEP),
            rng.uniform_range(-MAX_STEP, MAX_STEP),
            rng.uniform_range(-MAX_STEP, MAX_STEP),
        );
        Ok(Action::new(d, rng.uniform() < 0.5))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub distribution: ViewDistribution,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub horizon: u32,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            distribution: ViewDistribution::Original,
            episodes: DEFAULT_EPISODES,
            seeds: DEFAULT_SEEDS.to_vec(),
            horizon: HORIZON,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(VistaError::InvalidParameter {
                name: "episodes",
                reason: "must be at least 1".into(),
            });
        }
        if self.seeds.is_empty() {
            return Err(VistaError::InvalidParameter {
                name: "seeds",
                reason: "at least one seed is required".into(),
            });
        }
        if self.horizon == 0 || self.horizon > HORIZON {
            return Err(VistaError::InvalidParameter {
                name: "horizon",
                reason: format!("must be in 1..={HORIZON}, got {}", self.horizon),
            });
        }
        self.distribution.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: bool,
    /// The gripper came within the grasp radius of the cube at some step.
    pub reach: bool,
    pub steps: u32,
}

/// Runs one episode from `reset_seed` with a fixed third-person camera.
pub fn rollout(
    policy: &dyn Policy,
    camera: &CameraPose,
    intr: &Intrinsics,
    reset_seed: u64,
    horizon: u32,
) -> Result<Outcome> {
    let mut state = reset(reset_seed);
    let mut reach = state.gripper_cube_distance() <= GRASP_RADIUS;
    loop {
        let obs = observe(&state, camera, intr, policy.needs_wrist());
        let action = policy.act(&obs, &state)?;
        let (next, done, success) = step(&state, &action);
        state = next;
        reach |= state.gripper_cube_distance() <= GRASP_RADIUS;
        if done || state.t >= horizon {
            return Ok(Outcome {
                success,
                reach,
                steps: state.t,
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub seed: u64,
    pub episode: usize,
    pub reset_seed: u64,
    pub camera_world_from_camera: RigidTransform,
    pub success: bool,
    pub reach: bool,
    pub steps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub success_rate: f64,
    pub reach_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub version: u32,
    pub distribution: ViewDistribution,
    pub episodes_per_seed: usize,
    pub rng_seed: u64,
    pub per_seed: Vec<SeedResult>,
    pub mean: f64,
    pub sem: f64,
    pub reach_rate: f64,
    pub episodes: Vec<EpisodeLog>,
}

/// Sample standard deviation over `√n`; zero for fewer than two values.
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Reset seed and test camera of one episode.
pub fn episode_setup(
    cfg: &EvalConfig,
    base_camera: &CameraPose,
    rng_seed: u64,
    seed: u64,
    episode: usize,
) -> Result<(u64, CameraPose)> {
    let reset_seed = derive_seed(rng_seed, &[RESET_STREAM, seed, episode as u64]);
    let mut rng = SeededRng::from_counters(rng_seed, &[CAMERA_STREAM, seed, episode as u64]);
    let camera = cfg.distribution.sample(base_camera, &mut rng)?;
    Ok((reset_seed, camera))
}

/// Evaluates `policy` for `episodes × seeds` rollouts. The result does not
/// depend on `jobs`.
pub fn evaluate(
    policy: &dyn Policy,
    cfg: &EvalConfig,
    base_camera: &CameraPose,
    intr: &Intrinsics,
    rng_seed: u64,
    jobs: Option<usize>,
) -> Result<SuccessReport> {
    cfg.validate()?;
    intr.validate()?;
    let jobs_list: Vec<(u64, usize)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| (0..cfg.episodes).map(move |e| (s, e)))
        .collect();
    let pool = thread_pool(jobs)?;
    let episodes: Vec<EpisodeLog> = pool.install(|| {
        jobs_list
            .par_iter()
            .map(|&(seed, episode)| {
                let (reset_seed, camera) = episode_setup(cfg, base_camera, rng_seed, seed, episode)?;
                let o = rollout(policy, &camera, intr, reset_seed, cfg.horizon)?;
                Ok(EpisodeLog {
                    seed,
                    episode,
                    reset_seed,
                    camera_world_from_camera: camera.world_from_camera,
                    success: o.success,
                    reach: o.reach,
                    steps: o.steps,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let per_seed: Vec<SeedResult> = cfg
        .seeds
        .iter()
        .enumerate()
        .map(|(i, &seed)| {
            let eps = &episodes[i * cfg.episodes..(i + 1) * cfg.episodes];
            let rate = |f: fn(&EpisodeLog) -> bool| {
                eps.iter().filter(|e| f(e)).count() as f64 / cfg.episodes as f64
            };
            SeedResult {
                seed,
                success_rate: rate(|e| e.success),
                reach_rate: rate(|e| e.reach),
            }
        })
        .collect();
    let rates: Vec<f64> = per_seed.iter().map(|s| s.success_rate).collect();
    let n = per_seed.len() as f64;
    Ok(SuccessReport {
        version: REPORT_VERSION,
        distribution: cfg.distribution,
        episodes_per_seed: cfg.episodes,
        rng_seed,
        mean: rates.iter().sum::<f64>() / n,
        sem: standard_error(&rates),
        reach_rate: per_seed.iter().map(|s| s.reach_rate).sum::<f64>() / n,
        per_seed,
        episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenesim::default_camera;

    fn small() -> Intrinsics {
        Intrinsics::new(45.0, 16, 16).unwrap()
    }

    #[test]
    fn sem_closed_form() {
        let sem = standard_error(&[1.0, 0.8, 0.9]);
        assert!((sem - 0.1 / 3f64.sqrt()).abs() < 1e-12);
        assert!((sem - 0.0577).abs() < 1e-4);
        assert_eq!(standard_error(&[0.4]), 0.0);
    }

    #[test]
    fn expert_succeeds_everywhere() {
        let cfg = EvalConfig {
            distribution: ViewDistribution::perturbation(),
            episodes: 20,
            seeds: vec![0, 1],
            ..Default::default()
        };
        let r = evaluate(&ExpertPolicy, &cfg, &default_camera(), &small(), 7, Some(1)).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.reach_rate, 1.0);
        assert_eq!(r.sem, 0.0);
        assert_eq!(r.episodes.len(), 40);
    }

    #[test]
    fn random_policy_rarely_succeeds() {
        let cfg = EvalConfig {
            episodes: 100,
            seeds: vec![0],
            ..Default::default()
        };
        let r = evaluate(&RandomPolicy { seed: 3 }, &cfg, &default_camera(), &small(), 1, None).unwrap();
        assert!(r.mean < 0.05, "{}", r.mean);
    }

    #[test]
    fn single_episode_report() {
        let cfg = EvalConfig {
            episodes: 1,
            seeds: vec![4],
            ..Default::default()
        };
        let r = evaluate(&ExpertPolicy, &cfg, &default_camera(), &small(), 0, None).unwrap();
        assert_eq!(r.episodes.len(), 1);
        assert_eq!(r.sem, 0.0);
        assert_eq!(r.version, REPORT_VERSION);
    }

    #[test]
    fn rollout_is_deterministic() {
        let cam = default_camera();
        let a = rollout(&RandomPolicy { seed: 1 }, &cam, &small(), 9, HORIZON).unwrap();
        let b = rollout(&RandomPolicy { seed: 1 }, &cam, &small(), 9, HORIZON).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_is_independent_of_jobs() {
        let cfg = EvalConfig {
            distribution: ViewDistribution::perturbation(),
            episodes: 6,
            seeds: vec![0, 1],
            ..Default::default()
        };
        let cam = default_camera();
        let a = evaluate(&RandomPolicy { seed: 2 }, &cfg, &cam, &small(), 5, Some(1)).unwrap();
        let b = evaluate(&RandomPolicy { seed: 2 }, &cfg, &cam, &small(), 5, Some(3)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn original_distribution_keeps_camera() {
        let cfg = EvalConfig::default();
        let cam = default_camera();
        let (_, c) = episode_setup(&cfg, &cam, 0, 0, 3).unwrap();
        assert_eq!(c, cam);
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            EvalConfig { episodes: 0, ..Default::default() },
            EvalConfig { seeds: vec![], ..Default::default() },
            EvalConfig { horizon: 0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }
}
