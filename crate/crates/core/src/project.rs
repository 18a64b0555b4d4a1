//! The shared project configuration and the pipeline stages built on it.
//!
//! Every stage writes into its own directory named after a digest of the
//! configuration it depends on, so a rerun with an unchanged config finds
//! its outputs and skips the work. A stage counts as complete once its
//! `report.json` exists; that file is always written last.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::demos::{
    action_mse, collect_demos, load_demos, save_demos, train_human_policy, BcConfig, BcReport, BcSample, CollectConfig,
    CollectStats, DemoRecord, HumanPolicy,
};
use crate::env::Perception;
use crate::error::{Error, Result};
use crate::eval::{digest, evaluate, EvalReport};
use crate::mappo::team::{actor_from_bundle, Controller, Role, Team};
use crate::mappo::{train, Ablation, IterationMetrics, Trainer, TrainerConfig};
use crate::nn::checkpoint::Bundle;
use crate::seeding::{rng_for, stream};
use crate::sim::config::{ObjectSetKind, WorldConfig};
use crate::sim::world::World;
use crate::vision::{pretrain_encoder, Frame, PretrainConfig, PretrainReport, RenderConfig, VisionEncoder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoSettings {
    pub episodes: u32,
    pub collect: CollectConfig,
}

impl Default for DemoSettings {
    fn default() -> Self {
        Self {
            episodes: 200,
            collect: CollectConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSettings {
    /// Frames drawn from the demonstrations for pretraining.
    pub frames: usize,
    pub pretrain: PretrainConfig,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        Self {
            frames: 1000,
            pretrain: PretrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumanSettings {
    /// Share of demonstration episodes held out from behavior cloning.
    pub holdout_fraction: f64,
    pub bc: BcConfig,
}

impl Default for HumanSettings {
    fn default() -> Self {
        Self {
            holdout_fraction: 0.2,
            bc: BcConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub episodes: u32,
    pub object_sets: Vec<ObjectSetKind>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            episodes: 1000,
            object_sets: vec![ObjectSetKind::Train, ObjectSetKind::Unseen],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSettings {
    /// Training iterations per arm.
    pub iterations: u32,
    pub lambda_sweep: Vec<f64>,
    pub eval_episodes: u32,
}

impl Default for AblationSettings {
    fn default() -> Self {
        Self {
            iterations: 200,
            lambda_sweep: vec![0.0, 0.1, 0.2, 0.4],
            eval_episodes: 200,
        }
    }
}

/// One file configures every subcommand.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub seed: u64,
    pub world: WorldConfig,
    pub render: RenderConfig,
    pub demos: DemoSettings,
    pub encoder: EncoderSettings,
    pub human: HumanSettings,
    pub trainer: TrainerConfig,
    pub eval: EvalSettings,
    pub ablation: AblationSettings,
}

impl ProjectConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        c.resolved()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    /// Copies the master seed into the trainer section and validates.
    pub fn resolved(mut self) -> Result<Self> {
        self.trainer.seed = self.seed;
        self.world.validate()?;
        self.trainer.validate()?;
        if !(0.0..1.0).contains(&self.human.holdout_fraction) {
            return Err(Error::config("human.holdout_fraction must lie in [0, 1)"));
        }
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Result<Self> {
        self.seed = seed;
        self.resolved()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn world_for(&self, set: ObjectSetKind) -> Result<World> {
        let mut cfg = self.world.clone();
        cfg.object_set = set;
        World::new(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoStageReport {
    pub records: usize,
    pub stats: CollectStats,
}

pub fn run_collect(cfg: &ProjectConfig) -> Result<(Vec<DemoRecord>, DemoStageReport)> {
    let world = cfg.world_for(ObjectSetKind::Train)?;
    let mut rng = rng_for(cfg.seed, &[stream::DEMOS]);
    let (records, stats) = collect_demos(&world, &cfg.render, &cfg.demos.collect, cfg.demos.episodes, &mut rng)?;
    let report = DemoStageReport {
        records: records.len(),
        stats,
    };
    Ok((records, report))
}

/// Up to `n` frames drawn without replacement from the demonstrations.
pub fn sample_frames(records: &[DemoRecord], n: usize, seed: u64) -> Vec<Frame> {
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.shuffle(&mut rng_for(seed, &[stream::DATASET_SPLIT, 0]));
    idx.truncate(n);
    idx.sort_unstable();
    idx.into_iter().map(|i| records[i].frame.clone()).collect()
}

pub fn run_pretrain_encoder(cfg: &ProjectConfig, records: &[DemoRecord]) -> Result<(VisionEncoder, PretrainReport)> {
    let frames = sample_frames(records, cfg.encoder.frames, cfg.seed);
    pretrain_encoder(&frames, &cfg.encoder.pretrain, &mut rng_for(cfg.seed, &[stream::ENCODER]))
}

/// Splits whole episodes into cloning and held-out sets.
pub fn split_by_episode(records: &[DemoRecord], holdout: f64, seed: u64) -> (Vec<BcSample>, Vec<BcSample>) {
    let mut episodes: Vec<u32> = records.iter().map(|r| r.episode).collect();
    episodes.dedup();
    episodes.shuffle(&mut rng_for(seed, &[stream::DATASET_SPLIT, 1]));
    let n_hold = ((episodes.len() as f64) * holdout).round() as usize;
    let held: std::collections::HashSet<u32> = episodes[..n_hold.min(episodes.len())].iter().copied().collect();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for r in records {
        if held.contains(&r.episode) {
            test.push(BcSample::from(r));
        } else {
            train.push(BcSample::from(r));
        }
    }
    (train, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanStageReport {
    pub train_records: usize,
    pub heldout_records: usize,
    pub heldout_mse: Option<f64>,
    pub bc: BcReport,
}

pub fn run_pretrain_human(cfg: &ProjectConfig, records: &[DemoRecord]) -> Result<(HumanPolicy, HumanStageReport)> {
    let (train, test) = split_by_episode(records, cfg.human.holdout_fraction, cfg.seed);
    let (policy, bc) = train_human_policy(&train, &cfg.human.bc, &mut rng_for(cfg.seed, &[stream::HUMAN_POLICY]))?;
    let heldout_mse = if test.is_empty() { None } else { Some(action_mse(&policy, &test)?) };
    let report = HumanStageReport {
        train_records: train.len(),
        heldout_records: test.len(),
        heldout_mse,
        bc,
    };
    Ok((policy, report))
}

/// Team made of the trainer's current actors.
pub fn team_from_trainer(trainer: &Trainer) -> Team {
    let actor = |role: Role| trainer.agents.iter().find(|a| a.role == role).map(|a| a.actor.clone());
    assemble_team(
        trainer.config.scripted_thrower,
        actor(Role::Thrower),
        actor(Role::Catcher),
        actor(Role::Joint),
    )
}

fn assemble_team(
    scripted: bool,
    thrower: Option<crate::Policy>,
    catcher: Option<crate::Policy>,
    joint: Option<crate::Policy>,
) -> Team {
    if let Some(j) = joint {
        return Team::Joint(j);
    }
    let thrower = match (scripted, thrower) {
        (false, Some(p)) => Controller::Learned(p),
        _ => Controller::Scripted,
    };
    let catcher = catcher.map_or(Controller::Intercepting, Controller::Learned);
    Team::Pair { thrower, catcher }
}

/// A trained team together with the encoder it was trained against.
pub struct LoadedCheckpoint {
    pub team: Team,
    pub perception: Perception,
    pub trainer: TrainerConfig,
    pub world: WorldConfig,
}

/// Reads a trainer checkpoint. A checkpoint whose networks do not fit the
/// current observation layout is a contract violation naming both configs.
pub fn load_checkpoint(path: &Path, current_world: &WorldConfig) -> Result<LoadedCheckpoint> {
    let bundle = Bundle::load(path)?;
    let trainer = TrainerConfig::from_toml_str(&bundle.text("trainer.config")?)?;
    let world: WorldConfig = toml::from_str(&bundle.text("world.config")?).map_err(|e| Error::config(e.to_string()))?;
    let mismatch = |e: Error| match e {
        Error::Dimension { .. } => Error::contract(format!(
            "checkpoint does not fit the current config ({e}); checkpoint world digest {}, current world digest {}",
            digest(&world),
            digest(current_world)
        )),
        other => other,
    };
    let thrower = actor_from_bundle(&bundle, Role::Thrower).map_err(mismatch)?;
    let catcher = actor_from_bundle(&bundle, Role::Catcher).map_err(mismatch)?;
    let joint = actor_from_bundle(&bundle, Role::Joint).map_err(mismatch)?;
    if thrower.is_none() && catcher.is_none() && joint.is_none() {
        return Err(Error::format("checkpoint", "no actor entries"));
    }
    let encoder = VisionEncoder::from_bundle(&bundle)?;
    Ok(LoadedCheckpoint {
        team: assemble_team(trainer.scripted_thrower, thrower, catcher, joint),
        perception: Perception {
            style: RenderConfig::default(),
            encoder: Some(encoder),
        },
        trainer,
        world,
    })
}

/// Evaluates `team` on each configured object set.
pub fn evaluate_sets(cfg: &ProjectConfig, perception: &Perception, team: &Team, episodes: u32) -> Result<Vec<EvalReport>> {
    let perception = Perception {
        style: cfg.render.clone(),
        encoder: perception.encoder.clone(),
    };
    cfg.eval
        .object_sets
        .iter()
        .map(|&set| evaluate(&cfg.world_for(set)?, &perception, team, episodes, cfg.seed))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub arm: String,
    pub lambda_reg: f64,
    pub object_set: String,
    pub episodes: u32,
    pub hit_rate: f64,
    pub success_rate: f64,
    pub final_iteration: u32,
}

/// Trains every arm of the ablation grid plus the λ_reg sweep under the
/// same seed and iteration budget, then evaluates each on every object set.
/// Arms come first in [`Ablation::ALL`] order, followed by the sweep in
/// increasing λ.
pub fn run_ablation_suite(
    cfg: &ProjectConfig,
    encoder: &VisionEncoder,
    human: &HumanPolicy,
    mut on_row: impl FnMut(&AblationRow),
) -> Result<Vec<AblationRow>> {
    let mut sweep = cfg.ablation.lambda_sweep.clone();
    sweep.sort_by(f64::total_cmp);
    let mut arms: Vec<(String, TrainerConfig)> = Vec::new();
    for ab in Ablation::ALL {
        let mut t = cfg.trainer.clone();
        t.ablation = ab;
        t.iterations = cfg.ablation.iterations;
        let name = if ab == Ablation::None { "ours".to_string() } else { ab.name().to_string() };
        arms.push((name, t));
    }
    for &l in &sweep {
        let mut t = cfg.trainer.clone();
        t.ablation = Ablation::None;
        t.lambda_reg = l;
        t.iterations = cfg.ablation.iterations;
        arms.push((format!("lambda-{l}"), t));
    }
    let perception = Perception::new(Some(encoder.clone()));
    let mut rows = Vec::new();
    let mut done: Vec<(String, Vec<AblationRow>)> = Vec::new();
    for (name, t) in arms {
        let (_, _, lambda_reg) = t.effective_weights();
        let key = digest(&t);
        let reports = if let Some((_, prev)) = done.iter().find(|(k, _)| *k == key) {
            prev.clone()
        } else {
            let (team, iteration) = if t.ablation == Ablation::OpenLoop {
                let team = Team::Pair {
                    thrower: Controller::OpenLoop,
                    catcher: Controller::OpenLoop,
                };
                (team, 0)
            } else {
                let mut trainer = Trainer::new(t.clone(), cfg.world.clone(), Some(encoder.clone()), Some(human.clone()))?;
                for _ in 0..t.iterations {
                    trainer.iterate()?;
                }
                (team_from_trainer(&trainer), trainer.iteration)
            };
            let reports = evaluate_sets(cfg, &perception, &team, cfg.ablation.eval_episodes)?;
            let r: Vec<AblationRow> = reports
                .iter()
                .map(|e| AblationRow {
                    arm: String::new(),
                    lambda_reg,
                    object_set: e.object_set.clone(),
                    episodes: e.episodes,
                    hit_rate: e.hit_rate,
                    success_rate: e.success_rate,
                    final_iteration: iteration,
                })
                .collect();
            done.push((key, r.clone()));
            r
        };
        for mut row in reports {
            row.arm = name.clone();
            on_row(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Pipeline stages in execution order.
pub const STAGES: [&str; 5] = ["collect-demos", "pretrain-encoder", "pretrain-human-policy", "train", "evaluate"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub digest: String,
    pub dir: PathBuf,
    /// False when a completed output for this digest was reused.
    pub ran: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub stages: Vec<StageRecord>,
    pub evaluations: Vec<EvalReport>,
}

fn stage_dir(root: &Path, stage: &str, key: &str) -> PathBuf {
    root.join(format!("{stage}-{}", &key[..16]))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::from)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| Error::format("report", e.to_string()))
}

fn section<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("configs serialize to JSON")
}

fn in_stage<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage,
        source: Box::new(e),
    })
}

/// Runs every stage under `root`, reusing completed stages whose config
/// digest is unchanged. A stage reruns when its output is missing or any
/// stage before it ran in this invocation.
pub fn pipeline(
    cfg: &ProjectConfig,
    root: &Path,
    mut on_stage: impl FnMut(&StageRecord),
    mut on_iteration: impl FnMut(&IterationMetrics),
) -> Result<PipelineReport> {
    let mut stages = Vec::new();
    let mut upstream_ran = false;
    let mut key = digest(&(cfg.seed, &cfg.world, &cfg.render));
    let step = |stage: &'static str, part: String, key: &mut String, upstream_ran: &mut bool| {
        *key = digest(&(stage, key.as_str(), part));
        let dir = stage_dir(root, stage, key);
        let ran = *upstream_ran || !dir.join("report.json").exists();
        *upstream_ran |= ran;
        StageRecord {
            stage: stage.to_string(),
            digest: key.clone(),
            dir,
            ran,
        }
    };

    let rec = step("collect-demos", section(&cfg.demos), &mut key, &mut upstream_ran);
    if rec.ran {
        in_stage("collect-demos", (|| {
            fs::create_dir_all(&rec.dir)?;
            let (records, report) = run_collect(cfg)?;
            save_demos(&rec.dir.join("demos.bin"), &records)?;
            write_json(&rec.dir.join("report.json"), &report)
        })())?;
    }
    on_stage(&rec);
    let demos_path = rec.dir.join("demos.bin");
    stages.push(rec);
    let demo_key = key.clone();

    let rec = step("pretrain-encoder", section(&cfg.encoder), &mut key, &mut upstream_ran);
    if rec.ran {
        in_stage("pretrain-encoder", (|| {
            fs::create_dir_all(&rec.dir)?;
            let records = load_demos(&demos_path)?;
            let (encoder, report) = run_pretrain_encoder(cfg, &records)?;
            let mut b = Bundle::new();
            encoder.to_bundle(&mut b);
            b.save(&rec.dir.join("encoder.bin"))?;
            write_json(&rec.dir.join("report.json"), &report)
        })())?;
    }
    on_stage(&rec);
    let encoder_path = rec.dir.join("encoder.bin");
    let encoder_key = key.clone();
    let encoder_ran = rec.ran;
    stages.push(rec);

    // The human policy depends on the demonstrations only.
    let mut human_key = demo_key;
    let mut human_upstream = stages[0].ran;
    let rec = step("pretrain-human-policy", section(&cfg.human), &mut human_key, &mut human_upstream);
    if rec.ran {
        in_stage("pretrain-human-policy", (|| {
            fs::create_dir_all(&rec.dir)?;
            let records = load_demos(&demos_path)?;
            let (human, report) = run_pretrain_human(cfg, &records)?;
            let mut b = Bundle::new();
            human.to_bundle(&mut b);
            b.save(&rec.dir.join("human.bin"))?;
            write_json(&rec.dir.join("report.json"), &report)
        })())?;
    }
    on_stage(&rec);
    let human_path = rec.dir.join("human.bin");
    let human_ran = rec.ran;
    let human_digest = rec.digest.clone();
    stages.push(rec);

    key = digest(&(encoder_key.as_str(), human_digest.as_str()));
    let mut train_upstream = encoder_ran || human_ran;
    let rec = step("train", section(&cfg.trainer), &mut key, &mut train_upstream);
    if rec.ran {
        in_stage("train", (|| {
            let encoder = VisionEncoder::from_bundle(&Bundle::load(&encoder_path)?)?;
            let human = HumanPolicy::from_bundle(&Bundle::load(&human_path)?)?;
            let (trainer, _) = train(cfg.trainer.clone(), cfg.world.clone(), Some(encoder), Some(human), &rec.dir, &mut on_iteration)?;
            write_json(
                &rec.dir.join("report.json"),
                &serde_json::json!({ "iterations": trainer.iteration }),
            )
        })())?;
    }
    on_stage(&rec);
    let ckpt = rec.dir.join("checkpoint.bin");
    stages.push(rec);

    let rec = step("evaluate", section(&cfg.eval), &mut key, &mut train_upstream);
    let evaluations = if rec.ran {
        in_stage("evaluate", (|| {
            fs::create_dir_all(&rec.dir)?;
            let loaded = load_checkpoint(&ckpt, &cfg.world)?;
            let reports = evaluate_sets(cfg, &loaded.perception, &loaded.team, cfg.eval.episodes)?;
            write_json(&rec.dir.join("report.json"), &reports)?;
            Ok(reports)
        })())?
    } else {
        in_stage("evaluate", read_json(&rec.dir.join("report.json")))?
    };
    on_stage(&rec);
    stages.push(rec);
    Ok(PipelineReport { stages, evaluations })
}
