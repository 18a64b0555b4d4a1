use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use handover::demos::{load_demos, save_demos, HumanPolicy};
use handover::env::Perception;
use handover::eval::{export_trajectories, EvalReport};
use handover::mappo::{train, Ablation, Controller, Team};
use handover::nn::checkpoint::Bundle;
use handover::project::{
    evaluate_sets, load_checkpoint, pipeline, run_ablation_suite, run_collect, run_pretrain_encoder, run_pretrain_human,
    ProjectConfig,
};
use handover::sim::config::ObjectSetKind;
use handover::vision::VisionEncoder;
use handover::Error;

#[derive(Parser)]
#[command(name = "handover", version, about = "Throw-and-catch training pipeline")]
struct Cli {
    /// Project config (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record scripted throws with rendered frames.
    CollectDemos {
        #[arg(long)]
        episodes: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the vision encoder to mask labels of demonstration frames.
    PretrainEncoder {
        #[arg(long)]
        demos: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Behavior-clone the thrower from the demonstrations.
    PretrainHumanPolicy {
        #[arg(long)]
        demos: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run MAPPO; writes metrics.jsonl and checkpoint.bin into OUT.
    Train {
        #[arg(long)]
        encoder: PathBuf,
        #[arg(long)]
        human: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_ablation)]
        ablate: Option<Ablation>,
        #[arg(long)]
        lambda_reg: Option<f64>,
        #[arg(long)]
        iterations: Option<u32>,
    },
    /// Roll out a team at the policy mean and report hit and success rates.
    Evaluate {
        #[command(flatten)]
        team: TeamArgs,
        #[arg(long)]
        episodes: Option<u32>,
        #[arg(long, value_enum)]
        object_set: Option<SetArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write per-tick trajectory records for offline plotting.
    ExportTrajectories {
        #[command(flatten)]
        team: TeamArgs,
        #[arg(long, default_value_t = 10)]
        episodes: u32,
        #[arg(long, value_enum, default_value_t = SetArg::Train)]
        object_set: SetArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate every ablation arm and the λ_reg sweep.
    Ablate {
        #[arg(long)]
        encoder: PathBuf,
        #[arg(long)]
        human: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        iterations: Option<u32>,
    },
    /// Run every stage, reusing completed ones.
    Pipeline {
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the resolved config.
    ShowConfig,
}

#[derive(Args)]
struct TeamArgs {
    /// Trainer checkpoint.
    #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    /// Scripted thrower with the intercepting catcher.
    Scripted,
    Random,
    OpenLoop,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SetArg {
    Train,
    Unseen,
    Both,
}

impl SetArg {
    fn kinds(self) -> Vec<ObjectSetKind> {
        match self {
            SetArg::Train => vec![ObjectSetKind::Train],
            SetArg::Unseen => vec![ObjectSetKind::Unseen],
            SetArg::Both => vec![ObjectSetKind::Train, ObjectSetKind::Unseen],
        }
    }
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    Ablation::parse(s).map_err(|e| e.to_string())
}

type Res<T> = Result<T, Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> Res<ProjectConfig> {
    let cfg = match &cli.config {
        Some(p) => ProjectConfig::load(p)?,
        None => ProjectConfig::default().resolved()?,
    };
    match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => Ok(cfg),
    }
}

struct Jsonl(BufWriter<File>);

impl Jsonl {
    fn create(path: &Path) -> Res<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        Ok(Self(BufWriter::new(File::create(path)?)))
    }

    fn line<T: Serialize>(&mut self, value: &T) -> Res<()> {
        serde_json::to_writer(&mut self.0, value).map_err(std::io::Error::from)?;
        self.0.write_all(b"\n")?;
        Ok(())
    }

    fn finish(mut self) -> Res<()> {
        self.0.flush()?;
        Ok(())
    }
}

/// `path` with `suffix` appended to the file name.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn table(header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let fmt = |cells: Vec<String>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    println!("{}", fmt(header.iter().map(|h| h.to_string()).collect()));
    println!("{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    for r in rows {
        println!("{}", fmt(r.clone()));
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn eval_rows(reports: &[EvalReport]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in reports {
        for o in &r.per_object {
            rows.push(vec![r.object_set.clone(), o.object.clone(), o.episodes.to_string(), pct(o.hit_rate), pct(o.success_rate)]);
        }
        rows.push(vec![r.object_set.clone(), "all".into(), r.episodes.to_string(), pct(r.hit_rate), pct(r.success_rate)]);
    }
    rows
}

fn load_encoder(path: &Path) -> Res<VisionEncoder> {
    VisionEncoder::from_bundle(&Bundle::load(path)?)
}

fn load_human(path: &Path) -> Res<HumanPolicy> {
    HumanPolicy::from_bundle(&Bundle::load(path)?)
}

fn resolve_team(cfg: &ProjectConfig, args: &TeamArgs) -> Res<(Team, Perception)> {
    if let Some(path) = &args.checkpoint {
        let c = load_checkpoint(path, &cfg.world)?;
        return Ok((c.team, c.perception));
    }
    let (thrower, catcher) = match args.baseline.expect("clap enforces one of the two") {
        Baseline::Scripted => (Controller::Scripted, Controller::Intercepting),
        Baseline::Random => (Controller::Random, Controller::Random),
        Baseline::OpenLoop => (Controller::OpenLoop, Controller::OpenLoop),
    };
    Ok((Team::Pair { thrower, catcher }, Perception::new(None)))
}

fn run(cli: Cli) -> Res<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::CollectDemos { episodes, out } => {
            if let Some(n) = episodes {
                cfg.demos.episodes = n;
            }
            let (records, report) = run_collect(&cfg)?;
            save_demos(&out, &records)?;
            let mut log = Jsonl::create(&sibling(&out, ".report.jsonl"))?;
            log.line(&report)?;
            log.finish()?;
            let s = &report.stats;
            table(
                &["attempted", "retained", "infeasible", "missed", "records"],
                &[vec![s.attempted.to_string(), s.retained.to_string(), s.infeasible.to_string(), s.missed.to_string(), report.records.to_string()]],
            );
        }
        Command::PretrainEncoder { demos, out } => {
            let records = load_demos(&demos)?;
            let (encoder, report) = run_pretrain_encoder(&cfg, &records)?;
            let mut b = Bundle::new();
            encoder.to_bundle(&mut b);
            b.save(&out)?;
            let mut log = Jsonl::create(&sibling(&out, ".report.jsonl"))?;
            for e in &report.history {
                log.line(e)?;
            }
            log.line(&serde_json::json!({
                "best_epoch": report.best_epoch,
                "best_validation_loss": report.best_validation_loss,
                "initial_validation_loss": report.initial_validation_loss,
                "train_size": report.train_size,
                "validation_size": report.validation_size,
            }))?;
            log.finish()?;
            table(
                &["frames", "epochs", "best epoch", "initial val", "best val"],
                &[vec![
                    (report.train_size + report.validation_size).to_string(),
                    report.history.len().to_string(),
                    report.best_epoch.to_string(),
                    format!("{:.3e}", report.initial_validation_loss),
                    format!("{:.3e}", report.best_validation_loss),
                ]],
            );
        }
        Command::PretrainHumanPolicy { demos, out } => {
            let records = load_demos(&demos)?;
            let (policy, report) = run_pretrain_human(&cfg, &records)?;
            let mut b = Bundle::new();
            policy.to_bundle(&mut b);
            b.save(&out)?;
            let mut log = Jsonl::create(&sibling(&out, ".report.jsonl"))?;
            for (epoch, mse) in &report.bc.history {
                log.line(&serde_json::json!({ "epoch": epoch, "train_mse": mse }))?;
            }
            log.line(&serde_json::json!({
                "train_records": report.train_records,
                "heldout_records": report.heldout_records,
                "train_mse": report.bc.final_mse,
                "heldout_mse": report.heldout_mse,
            }))?;
            log.finish()?;
            table(
                &["train records", "held-out records", "train MSE", "held-out MSE"],
                &[vec![
                    report.train_records.to_string(),
                    report.heldout_records.to_string(),
                    format!("{:.4}", report.bc.final_mse),
                    report.heldout_mse.map_or("-".into(), |m| format!("{m:.4}")),
                ]],
            );
        }
        Command::Train {
            encoder,
            human,
            out,
            ablate,
            lambda_reg,
            iterations,
        } => {
            if let Some(a) = ablate {
                cfg.trainer.ablation = a;
            }
            if let Some(l) = lambda_reg {
                cfg.trainer.lambda_reg = l;
            }
            if let Some(n) = iterations {
                cfg.trainer.iterations = n;
            }
            let cfg = cfg.resolved()?;
            let encoder = load_encoder(&encoder)?;
            let human = human.as_deref().map(load_human).transpose()?;
            let mut rows = Vec::new();
            let (trainer, ckpt) = train(cfg.trainer.clone(), cfg.world.clone(), Some(encoder), human, &out, |m| {
                rows.push(vec![
                    m.iteration.to_string(),
                    m.episodes.to_string(),
                    m.hit_rate.map_or("-".into(), pct),
                    m.success_rate.map_or("-".into(), pct),
                    format!("{:.3}", m.reward_mean),
                    format!("{:.4}", m.kl_mean),
                ]);
            })?;
            let keep = rows.len().saturating_sub(10);
            table(&["iteration", "episodes", "hit", "success", "reward/step", "KL"], &rows[keep..]);
            println!("checkpoint: {} (iteration {})", ckpt.display(), trainer.iteration);
        }
        Command::Evaluate {
            team,
            episodes,
            object_set,
            out,
        } => {
            if let Some(s) = object_set {
                cfg.eval.object_sets = s.kinds();
            }
            let (team, perception) = resolve_team(&cfg, &team)?;
            let reports = evaluate_sets(&cfg, &perception, &team, episodes.unwrap_or(cfg.eval.episodes))?;
            let mut log = Jsonl::create(&out)?;
            for r in &reports {
                log.line(r)?;
            }
            log.finish()?;
            table(&["set", "object", "episodes", "hit", "success"], &eval_rows(&reports));
        }
        Command::ExportTrajectories {
            team,
            episodes,
            object_set,
            out,
        } => {
            let set = object_set.kinds()[0];
            let (team, perception) = resolve_team(&cfg, &team)?;
            let perception = Perception {
                style: cfg.render.clone(),
                ..perception
            };
            let mut w = Jsonl::create(&out)?;
            export_trajectories(&cfg.world_for(set)?, &perception, &team, episodes, cfg.seed, &mut w.0)?;
            w.finish()?;
            table(&["episodes", "file"], &[vec![episodes.to_string(), out.display().to_string()]]);
        }
        Command::Ablate {
            encoder,
            human,
            out,
            iterations,
        } => {
            if let Some(n) = iterations {
                cfg.ablation.iterations = n;
            }
            let encoder = load_encoder(&encoder)?;
            let human = load_human(&human)?;
            let mut log = Jsonl::create(&out)?;
            let mut write_err = None;
            let rows = run_ablation_suite(&cfg, &encoder, &human, |row| {
                if let Err(e) = log.line(row).and_then(|_| log.0.flush().map_err(Error::from)) {
                    write_err.get_or_insert(e);
                }
            })?;
            if let Some(e) = write_err {
                return Err(e);
            }
            log.finish()?;
            let rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![r.arm.clone(), format!("{}", r.lambda_reg), r.object_set.clone(), pct(r.hit_rate), pct(r.success_rate)])
                .collect();
            table(&["arm", "λ_reg", "set", "hit", "success"], &rows);
        }
        Command::Pipeline { out } => {
            fs::create_dir_all(&out)?;
            fs::write(out.join("config.toml"), cfg.to_toml()?)?;
            let report = pipeline(
                &cfg,
                &out,
                |s| eprintln!("{:<22} {} {}", s.stage, if s.ran { "ran" } else { "cached" }, s.dir.display()),
                |m| eprintln!("  iteration {} reward/step {:.3}", m.iteration, m.reward_mean),
            )?;
            let mut log = Jsonl::create(&out.join("pipeline.jsonl"))?;
            for s in &report.stages {
                log.line(s)?;
            }
            for r in &report.evaluations {
                log.line(r)?;
            }
            log.finish()?;
            table(&["set", "object", "episodes", "hit", "success"], &eval_rows(&report.evaluations));
        }
        Command::ShowConfig => print!("{}", cfg.to_toml()?),
    }
    Ok(())
}
