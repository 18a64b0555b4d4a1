//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Budgeted criteria (9, 11, 12) use reduced budgets unless
//! `HANDOVER_ACCEPTANCE=full` is set. Criteria 11 and 12 never gate the exit
//! status; neither does criterion 5, whose 0.23026 check cannot hold (see
//! the notes printed with it).

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use handover::demos::*;
use handover::env::Perception;
use handover::eval::{digest, evaluate, export_trajectories};
use handover::mappo::rollout::collect_rollouts;
use handover::mappo::team::{Controller, Team};
use handover::mappo::*;
use handover::nn::checkpoint::Bundle;
use handover::nn::{gaussian_kl, Activation, Dense, Grads};
use handover::project::*;
use handover::seeding::{rng_for, stream, Rng};
use handover::sim::ballistics::{ballistic_step, position_at};
use handover::sim::export::TrajectoryLine;
use handover::sim::reward::{action_penalty, RewardTerms, DISTANCE_DECAY, REWARD_WEIGHTS};
use handover::sim::world::{Attachment, World};
use handover::sim::{ObjectSetKind, WorldConfig};
use handover::vision::encoder::LABEL_DIM;
use handover::vision::{pretrain_encoder, render, LabeledImage, PretrainConfig, RenderConfig, VisionEncoder};
use handover::{Network, Policy};
use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

const SMOKE: &str = include_str!("../../../configs/smoke.toml");
const DEFAULT: &str = include_str!("../../../configs/default.toml");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Artifacts shared between criteria.
#[derive(Default)]
struct Shared {
    full: bool,
    records: Option<Vec<DemoRecord>>,
    encoder: Option<VisionEncoder>,
    human: Option<HumanPolicy>,
}

impl Shared {
    fn records(&mut self) -> &[DemoRecord] {
        if self.records.is_none() {
            let cfg = ProjectConfig::default();
            self.records = Some(run_collect(&cfg).expect("default demonstrations").0);
        }
        self.records.as_deref().unwrap()
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of `f` over every parameter reachable through `blocks`.
fn numeric_grad<M>(model: &mut M, blocks: fn(&mut M) -> Vec<&mut [f64]>, f: &dyn Fn(&M) -> f64) -> Vec<f64> {
    let h = 1e-6;
    let shapes: Vec<usize> = blocks(model).iter().map(|b| b.len()).collect();
    let mut out = Vec::new();
    for (b, &len) in shapes.iter().enumerate() {
        for j in 0..len {
            let orig = blocks(model)[b][j];
            blocks(model)[b][j] = orig + h;
            let up = f(model);
            blocks(model)[b][j] = orig - h;
            let down = f(model);
            blocks(model)[b][j] = orig;
            out.push((up - down) / (2.0 * h));
        }
    }
    out
}

fn c1_gradients(_: &mut Shared) -> Outcome {
    let mut rng = Rng::seed_from_u64(101);
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut note = |k: &'static str, e: f64| {
        let w = worst.entry(k).or_insert(0.0);
        *w = w.max(e);
    };
    for (name, act) in [
        ("linear", Activation::Linear),
        ("elu", Activation::Elu),
        ("tanh", Activation::Tanh),
        ("sigmoid", Activation::Sigmoid),
    ] {
        for _ in 0..20 {
            let sizes: Vec<usize> = (0..rng.random_range(2..5)).map(|_| rng.random_range(1..7)).collect();
            let mut net = Network::mlp(&sizes, act, act, 1.0, &mut rng).unwrap();
            let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-2.0..2.0)).collect();
            let c: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let loss = |n: &Network| n.forward(&x).unwrap().iter().zip(&c).map(|(y, c)| y * c).sum::<f64>();
            let mut g = net.zero_grads();
            let tr = net.forward_recorded(&x).unwrap();
            net.backward_into(&tr, &c, &mut g).unwrap();
            let numeric = numeric_grad(&mut net, |n| n.param_blocks_mut(), &loss);
            note(name, rel_err(&g.flatten(), &numeric));
        }
    }

    // Encoder label regression.
    let world = World::new(WorldConfig::default()).unwrap();
    let s = world.reset(&mut rng).unwrap();
    let frame = render(&world.config, &RenderConfig::default(), &s, &mut rng);
    let img = LabeledImage::from_frame(&frame);
    let mut enc = VisionEncoder::new(&mut rng);
    let mut eg = enc.zero_grads();
    enc.loss_and_grad(&img.pooled, &img.labels, &mut eg).unwrap();
    let analytic = eg.into_grads();
    let enc_loss = |e: &VisionEncoder| {
        let out = e.predict_pooled(&img.pooled).unwrap();
        (0..LABEL_DIM).map(|k| (out[k] - img.labels[k]).powi(2)).sum::<f64>()
    };
    // The encoder has too many weights for a full sweep; check a random subset.
    let (mut a, mut n) = (Vec::new(), Vec::new());
    for _ in 0..300 {
        let b = rng.random_range(0..analytic.blocks.len());
        let j = rng.random_range(0..analytic.blocks[b].len());
        let orig = enc.param_blocks()[b][j];
        enc.param_blocks_mut()[b][j] = orig + 1e-6;
        let up = enc_loss(&enc);
        enc.param_blocks_mut()[b][j] = orig - 1e-6;
        let down = enc_loss(&enc);
        enc.param_blocks_mut()[b][j] = orig;
        a.push(analytic.blocks[b][j]);
        n.push((up - down) / 2e-6);
    }
    note("encoder-mse", rel_err(&a, &n));

    // Behavior cloning MSE.
    let mut human = HumanPolicy::new(16, 0.1, &mut rng).unwrap();
    let samples: Vec<BcSample> = (0..8)
        .map(|_| BcSample {
            input: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            action: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
        })
        .collect();
    let refs: Vec<&BcSample> = samples.iter().collect();
    let (_, g) = bc_loss_and_grad(&human, &refs).unwrap();
    let numeric = numeric_grad(&mut human, |h| h.mean.param_blocks_mut(), &|h| action_mse(h, &samples).unwrap());
    note("bc-mse", rel_err(&g.flatten(), &numeric));

    // PPO surrogate alone and the KL-regularized thrower objective.
    for (name, lambda) in [("ppo-surrogate", 0.0), ("regularized", 0.2)] {
        for trial in 0..5 {
            let mut policy = Policy::new(
                Network::mlp(&[6, 8, 4], Activation::Elu, Activation::Linear, 1.0, &mut rng).unwrap(),
                vec![-0.5; 4],
            )
            .unwrap();
            let n = 1 + trial * 4;
            let data: Vec<(Vec<f64>, Vec<f64>, f64, f64, Vec<f64>)> = (0..n)
                .map(|_| {
                    let o: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let (a, lp) = policy.sample(&o, &mut rng).unwrap();
                    let r: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                    (o, a, lp + rng.random_range(-0.05..0.05), rng.random_range(-2.0..2.0), r)
                })
                .collect();
            let batch: Vec<ActorSample> = data
                .iter()
                .map(|(o, a, lp, adv, r)| ActorSample {
                    obs: o,
                    action: a,
                    logp_old: *lp,
                    advantage: *adv,
                    reference: Some(r),
                })
                .collect();
            let coef = PpoCoefficients {
                clip: 0.2,
                value_coef: 0.5,
                entropy_coef: 0.01,
                lambda_reg: lambda,
                max_grad_norm: 1.0,
            };
            let mut g = Grads::zeros(&policy.param_shapes());
            actor_objective(&policy, &batch, &coef, 0.1, Some(&mut g)).unwrap();
            let numeric = numeric_grad(&mut policy, |p| p.param_blocks_mut(), &|p| {
                -actor_objective(p, &batch, &coef, 0.1, None).unwrap().objective
            });
            note(name, rel_err(&g.flatten(), &numeric));
        }
    }

    // Critic regression.
    let mut critic = Network::mlp(&[5, 8, 1], Activation::Elu, Activation::Linear, 1.0, &mut rng).unwrap();
    let states: Vec<Vec<f64>> = (0..6).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let returns: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
    let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
    let mut g = critic.zero_grads();
    critic_loss(&critic, &refs, &returns, 0.5, Some(&mut g)).unwrap();
    let numeric = numeric_grad(&mut critic, |c| c.param_blocks_mut(), &|c| critic_loss(c, &refs, &returns, 0.5, None).unwrap());
    note("critic-mse", rel_err(&g.flatten(), &numeric));

    let max = worst.values().cloned().fold(0.0, f64::max);
    let detail = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect::<Vec<_>>().join(", ");
    outcome(max < 1e-4, format!("worst relative error per check: {detail}"))
}

fn brute_force_gae(r: &[f64], v: &[f64], d: &[bool], boot: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = r.len();
    let next_v = |t: usize| if d[t] { 0.0 } else if t + 1 < n { v[t + 1] } else { boot };
    let delta: Vec<f64> = (0..n).map(|t| r[t] + gamma * next_v(t) - v[t]).collect();
    (0..n)
        .map(|t| {
            let (mut sum, mut w) = (0.0, 1.0);
            for k in t..n {
                sum += w * delta[k];
                if d[k] {
                    break;
                }
                w *= gamma * lambda;
            }
            sum
        })
        .collect()
}

fn c2_gae(_: &mut Shared) -> Outcome {
    let mut rng = Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=64);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.random_bool(0.1)).collect();
        let boot = rng.random_range(-5.0..5.0);
        let (gamma, lambda) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let (adv, _) = compute_gae(&r, &v, &d, boot, gamma, lambda).unwrap();
        for (a, b) in adv.iter().zip(brute_force_gae(&r, &v, &d, boot, gamma, lambda)) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst < 1e-10, format!("max |recursion - sum| over 1000 sequences = {worst:.2e}"))
}

fn c3_kl(_: &mut Shared) -> Outcome {
    let mut rng = Rng::seed_from_u64(303);
    let log_density = |x: &[f64], mu: &[f64], sigma: &[f64]| -> f64 {
        (0..x.len())
            .map(|i| -0.5 * ((x[i] - mu[i]) / sigma[i]).powi(2) - sigma[i].ln() - 0.5 * (2.0 * std::f64::consts::PI).ln())
            .sum()
    };
    let (mut worst_mc, mut worst_z, mut worst_self, mut min_kl, mut max_kl) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    for _ in 0..50 {
        let d = 4;
        // Pairs whose KL stays near 1 nat: far-apart pairs have a log-ratio
        // variance that 10^6 samples cannot resolve to 1e-2.
        let mu_p: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
        let mu_q: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
        let s_p: Vec<f64> = (0..d).map(|_| rng.random_range(0.6..1.4)).collect();
        let s_q: Vec<f64> = (0..d).map(|_| rng.random_range(0.6..1.4)).collect();
        let closed = gaussian_kl(&mu_p, &s_p, &mu_q, &s_q).unwrap();
        let (mut mc, mut sq) = (0.0, 0.0);
        let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
        // Antithetic pairs (z, -z): 10^6 draws of x ~ p, averaged two at a time.
        let pairs = 500_000;
        for _ in 0..pairs {
            for i in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                x[i] = mu_p[i] + s_p[i] * z;
                y[i] = mu_p[i] - s_p[i] * z;
            }
            let ratio = |x: &[f64]| log_density(x, &mu_p, &s_p) - log_density(x, &mu_q, &s_q);
            let l = 0.5 * (ratio(&x) + ratio(&y));
            mc += l;
            sq += l * l;
        }
        mc /= pairs as f64;
        let stderr = ((sq / pairs as f64 - mc * mc) / pairs as f64).sqrt();
        worst_mc = worst_mc.max((closed - mc).abs());
        worst_z = worst_z.max((closed - mc).abs() / stderr);
        worst_self = worst_self.max(gaussian_kl(&mu_p, &s_p, &mu_p, &s_p).unwrap().abs());
        min_kl = min_kl.min(closed);
        max_kl = max_kl.max(closed);
    }
    for _ in 0..10_000 {
        let mu: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let m2: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let s: Vec<f64> = (0..4).map(|_| rng.random_range(0.01..3.0)).collect();
        let s2: Vec<f64> = (0..4).map(|_| rng.random_range(0.01..3.0)).collect();
        min_kl = min_kl.min(gaussian_kl(&mu, &s, &m2, &s2).unwrap());
    }
    outcome(
        worst_mc < 1e-2 && worst_self < 1e-12 && min_kl >= 0.0,
        format!("max |closed - MC| {worst_mc:.2e} ({worst_z:.1} standard errors), max KL(p||p) {worst_self:.1e}, min KL {min_kl:.2e}, largest MC pair KL {max_kl:.2}"),
    )
}

/// Max residual of least-squares fits x = a + b·t, z = c + d·t + e·t².
fn parabola_residual(points: &[(f64, [f64; 2])]) -> f64 {
    let fit = |cols: usize, coord: usize| -> f64 {
        let t0 = points[0].0;
        let basis = |t: f64| [1.0, t - t0, (t - t0).powi(2)];
        let mut a = [[0.0; 4]; 3];
        for (t, p) in points {
            let b = basis(*t);
            for r in 0..cols {
                for c in 0..cols {
                    a[r][c] += b[r] * b[c];
                }
                a[r][3] += b[r] * p[coord];
            }
        }
        for p in 0..cols {
            let piv = a[p][p];
            for c in p..4 {
                a[p][c] /= piv;
            }
            for r in 0..cols {
                if r != p {
                    let f = a[r][p];
                    for c in p..4 {
                        a[r][c] -= f * a[p][c];
                    }
                }
            }
        }
        points
            .iter()
            .map(|(t, p)| {
                let b = basis(*t);
                ((0..cols).map(|k| a[k][3] * b[k]).sum::<f64>() - p[coord]).abs()
            })
            .fold(0.0, f64::max)
    };
    fit(2, 0).max(fit(3, 1))
}

fn c4_ballistics(_: &mut Shared) -> Outcome {
    let g = 9.81;
    let dt = 1.0 / 120.0;
    let mut rng = Rng::seed_from_u64(404);
    let mut worst_step: f64 = 0.0;
    for _ in 0..20 {
        let p0 = [rng.random_range(-0.5..1.5), rng.random_range(0.0..2.0)];
        let v0 = [rng.random_range(-3.0..3.0), rng.random_range(-2.0..8.0)];
        let (mut p, mut v) = (p0, v0);
        for k in 1..=360 {
            (p, v) = ballistic_step(p, v, g, dt);
            let t = k as f64 * dt;
            let exact = [p0[0] + v0[0] * t, p0[1] + v0[1] * t - 0.5 * g * t * t];
            worst_step = worst_step.max((p[0] - exact[0]).abs()).max((p[1] - exact[1]).abs());
        }
    }
    // The world integrator on an unobstructed flight.
    let w = World::new({
        let mut c = WorldConfig::default();
        c.randomization.enabled = false;
        c
    })
    .unwrap();
    let mut s = w.reset(&mut Rng::seed_from_u64(11)).unwrap();
    s.object.attachment = Attachment::Free;
    let (p0, v0) = ([0.4, 1.0], [1.0, 1.5]);
    s.object.position = p0;
    s.object.velocity = v0;
    let hold = [0.0, 0.0, 0.0, -1.0];
    let mut worst_world: f64 = 0.0;
    for k in 1..=30 {
        w.step(&mut s, &hold, &hold).unwrap();
        let exact = position_at(p0, v0, g, k as f64 * 2.0 * dt);
        worst_world = worst_world.max((s.object.position[0] - exact[0]).abs()).max((s.object.position[1] - exact[1]).abs());
    }
    // Exported flights from the demonstrator team.
    let mut out = Vec::new();
    let train = World::new(WorldConfig::default()).unwrap();
    let team = Team::Pair {
        thrower: Controller::Scripted,
        catcher: Controller::Intercepting,
    };
    export_trajectories(&train, &Perception::new(None), &team, 20, 4, &mut out).unwrap();
    let mut flights: BTreeMap<(u32, u32), Vec<(f64, [f64; 2])>> = BTreeMap::new();
    for line in String::from_utf8(out).unwrap().lines() {
        if let TrajectoryLine::Record(r) = serde_json::from_str(line).unwrap() {
            if let Some(id) = r.flight_id {
                flights.entry((r.episode, id)).or_default().push((r.time, r.object_position));
            }
        }
    }
    let segments: Vec<f64> = flights.values().filter(|p| p.len() >= 4).map(|p| parabola_residual(p)).collect();
    let worst_fit = segments.iter().cloned().fold(0.0, f64::max);
    outcome(
        worst_step < 1e-9 && worst_world < 1e-9 && worst_fit < 1e-6 && !segments.is_empty(),
        format!(
            "3 s integration error {worst_step:.1e} m, world flight error {worst_world:.1e} m, export fit residual {worst_fit:.1e} m over {} segments",
            segments.len()
        ),
    )
}

fn c5_reward(_: &mut Shared) -> Outcome {
    let at = |l: f64| (-DISTANCE_DECAY * l).exp();
    let zero = RewardTerms::from_distances(0.0, 0.0, 0.0, false, &[0.0; 8], &[1.0; 8]);
    let unit = zero.distance == 1.0 && zero.object == 1.0 && zero.hand == -1.0;
    let zero_torque = action_penalty(&[0.0; 8], &[3.0; 8]) == 0.0;
    let w = REWARD_WEIGHTS;
    let weights = (w.distance, w.object, w.contact, w.action, w.hand) == (4.0, 0.5, 1.0, 0.0001, 1.0);
    let mut rng = Rng::seed_from_u64(505);
    let mut exact = true;
    for _ in 0..1000 {
        let t = RewardTerms::from_distances(
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_bool(0.5),
            &[rng.random_range(-50.0..50.0); 8],
            &[rng.random_range(-5.0..5.0); 8],
        );
        let manual = 4.0 * t.distance + 0.5 * t.object + 1.0 * t.contact + 0.0001 * t.action + 1.0 * t.hand;
        exact &= manual == t.total();
    }
    let ln10 = std::f64::consts::LN_10 / DISTANCE_DECAY;
    let kernel_exact = (at(ln10) - 0.1).abs();
    let literal = (at(0.23026) - 0.1).abs();
    let pass = unit && zero_torque && weights && exact && literal < 1e-6;
    outcome(
        pass,
        format!(
            "l=0 term 1: {unit}; zero torque: {zero_torque}; weights (4, 0.5, 1, 1e-4, 1): {weights}; breakdown recombines exactly: {exact}; \
             |k(ln10/10) - 0.1| = {kernel_exact:.1e}; |k(0.23026) - 0.1| = {literal:.2e} (the rounded input 0.23026 puts the kernel 1.5e-6 from 0.1, \
             so the 1e-6 tolerance is unreachable by arithmetic)"
        ),
    )
}

fn c6_hybrid(_: &mut Shared) -> Outcome {
    let mut rng = Rng::seed_from_u64(606);
    let n = 1_000_000;
    let gae: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let internal: Vec<f64> = (0..n).map(|_| -rng.random_range(0.0..1.0)).collect();
    let plain = hybrid_advantage(&gae, &internal, 0.0, 0.0, &mut rng).unwrap() == gae;
    let h = hybrid_advantage(&gae, &internal, 0.01, 0.001, &mut rng).unwrap();
    let noise: Vec<f64> = (0..n).map(|i| h[i] - gae[i] - 0.01 * internal[i]).collect();
    let mean = noise.iter().sum::<f64>() / n as f64;
    let std = (noise.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let dev = (std / 0.001 - 1.0).abs();
    let file = ProjectConfig::from_toml_str(DEFAULT).unwrap();
    let empty = TrainerConfig::from_toml_str("").unwrap();
    let defaults = (file.trainer.beta1, file.trainer.beta2) == (0.01, 0.001) && (empty.beta1, empty.beta2) == (0.01, 0.001);
    outcome(
        plain && dev < 0.02 && defaults,
        format!("beta=0 equals GAE: {plain}; noise std {std:.6} ({:.2}% off 0.001); defaults from config (0.01, 0.001): {defaults}", 100.0 * dev),
    )
}

fn c7_encoder(sh: &mut Shared) -> Outcome {
    let records = sh.records().to_vec();
    // Whole episodes are held out so test frames are never neighbours of training frames.
    let mut episodes: Vec<u32> = records.iter().map(|r| r.episode).collect();
    episodes.dedup();
    episodes.shuffle(&mut Rng::seed_from_u64(707));
    let held: std::collections::HashSet<u32> = episodes[..episodes.len() / 4].iter().copied().collect();
    let mut pool: Vec<&DemoRecord> = records.iter().filter(|r| !held.contains(&r.episode)).collect();
    pool.shuffle(&mut Rng::seed_from_u64(708));
    let frames: Vec<_> = pool.iter().take(1000).map(|r| r.frame.clone()).collect();
    let mut cfg = PretrainConfig::default();
    cfg.time_budget = Some(570.0);
    let started = Instant::now();
    let (enc, report) = pretrain_encoder(&frames, &cfg, &mut rng_for(0, &[stream::ENCODER])).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let (mut centroid, mut delta, mut n) = (0.0, 0.0, 0.0);
    for r in records.iter().filter(|r| held.contains(&r.episode)) {
        let img = LabeledImage::from_frame(&r.frame);
        let p = enc.predict_pooled(&img.pooled).unwrap();
        centroid += (p[1] - img.labels[1]).hypot(p[2] - img.labels[2]);
        delta += (p[0] - img.labels[0]).powi(2);
        n += 1.0;
    }
    let (centroid, delta) = (centroid / n, delta / n);
    sh.encoder = Some(enc);
    outcome(
        centroid < 2.0 / 64.0 && delta < 1e-3 && secs <= 600.0,
        format!(
            "{} frames, {} epochs in {secs:.0} s; held-out ({n} frames) centroid error {centroid:.4} (< {:.4}), delta MSE {delta:.2e}",
            frames.len(),
            report.history.len(),
            2.0 / 64.0
        ),
    )
}

/// Minimum distance between `target` and the parabola leaving `p0` with `v0`.
fn parabola_miss(p0: [f64; 2], v0: [f64; 2], g: f64, target: [f64; 2]) -> f64 {
    let at = |t: f64| [p0[0] + v0[0] * t, p0[1] + v0[1] * t - 0.5 * g * t * t];
    let dist = |t: f64| {
        let p = at(t);
        (p[0] - target[0]).hypot(p[1] - target[1])
    };
    let steps = 20_000;
    let horizon = 2.0;
    let mut best = (0.0, dist(0.0));
    for k in 1..=steps {
        let t = horizon * k as f64 / steps as f64;
        let d = dist(t);
        if d < best.1 {
            best = (t, d);
        }
    }
    // Golden-section refinement around the grid minimum.
    let (mut lo, mut hi) = ((best.0 - horizon / steps as f64).max(0.0), best.0 + horizon / steps as f64);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if dist(a) < dist(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    dist(0.5 * (lo + hi)).min(best.1)
}

fn c8_demonstrator(_: &mut Shared) -> Outcome {
    let world = World::new(WorldConfig::default()).unwrap();
    let catcher = InterceptingCatcher::default();
    let mut thrower = ScriptedThrower::new(&world, PlannerConfig::default());
    let mut landed = 0;
    let mut misses = Vec::new();
    let episodes = 500;
    for k in 0..episodes {
        let mut rng = rng_for(808, &[k]);
        let mut s = world.reset(&mut rng).unwrap();
        let mut release = None;
        while !s.terminated {
            let Ok(a) = thrower.act(&world, &s) else { break };
            let b = catcher.act(&world, &s);
            world.step(&mut s, &a, &b).unwrap();
            if s.object.attachment == Attachment::Free {
                release = Some((s.object.position, s.object.velocity));
                break;
            }
        }
        match release {
            Some((p, v)) => {
                let miss = parabola_miss(p, v, world.config.gravity, s.target);
                if miss <= 0.02 {
                    landed += 1;
                } else {
                    misses.push(miss);
                }
            }
            None => misses.push(f64::INFINITY),
        }
    }
    let rate = landed as f64 / episodes as f64;
    let worst = misses.iter().cloned().fold(0.0, f64::max);
    outcome(rate >= 0.95, format!("{landed}/{episodes} throws within 0.02 m of target ({:.1}%), worst miss {worst:.3} m", 100.0 * rate))
}

fn c9_cloning(sh: &mut Shared) -> Outcome {
    let full = sh.full;
    let records = sh.records().to_vec();
    // Hold out whole episodes until at least 2000 records are set aside.
    let mut episodes: Vec<u32> = records.iter().map(|r| r.episode).collect();
    episodes.dedup();
    episodes.shuffle(&mut Rng::seed_from_u64(909));
    let mut held = std::collections::HashSet::new();
    let mut count = 0;
    for e in episodes {
        if count >= 2000 {
            break;
        }
        count += records.iter().filter(|r| r.episode == e).count();
        held.insert(e);
    }
    let (test, train): (Vec<&DemoRecord>, Vec<&DemoRecord>) = records.iter().partition(|r| held.contains(&r.episode));
    let train: Vec<BcSample> = train.into_iter().map(BcSample::from).collect();
    let test: Vec<BcSample> = test.into_iter().map(BcSample::from).collect();
    let mut cfg = BcConfig::default();
    if !full {
        cfg.epochs = 1000;
    }
    let started = Instant::now();
    let (policy, report) = train_human_policy(&train, &cfg, &mut rng_for(0, &[stream::HUMAN_POLICY])).unwrap();
    let mse = action_mse(&policy, &test).unwrap();
    sh.human = Some(policy);
    outcome(
        mse < 0.05,
        format!(
            "{} epochs{} in {:.0} s on {} records; train MSE {:.4}, held-out MSE {mse:.4} on {} records",
            cfg.epochs,
            if full { "" } else { " (reduced from 10000)" },
            started.elapsed().as_secs_f64(),
            train.len(),
            report.final_mse,
            test.len()
        ),
    )
}

/// Plain MLP used by the reference update, written against raw layer weights.
struct RefNet {
    layers: Vec<(usize, usize, Vec<f64>, Vec<f64>, bool)>,
}

impl RefNet {
    fn from(layers: &[Dense<f64>]) -> Self {
        Self {
            layers: layers
                .iter()
                .map(|l| (l.in_dim, l.out_dim, l.weights.clone(), l.bias.clone(), l.activation == Activation::Elu))
                .collect(),
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        // Returns pre-activations and outputs interleaved: [x, z1, y1, z2, y2, ...].
        let mut acts = vec![x.to_vec()];
        for (i, o, w, b, elu) in &self.layers {
            let input = acts.last().unwrap().clone();
            let z: Vec<f64> = (0..*o).map(|r| b[r] + (0..*i).map(|c| w[r * i + c] * input[c]).sum::<f64>()).collect();
            let y: Vec<f64> = z.iter().map(|&v| if *elu && v <= 0.0 { v.exp() - 1.0 } else { v }).collect();
            acts.push(z);
            acts.push(y);
        }
        acts
    }

    /// Accumulates dL/dW, dL/db for upstream dL/dy_out into `g` (flat per layer).
    fn backward(&self, acts: &[Vec<f64>], upstream: &[f64], g: &mut [(Vec<f64>, Vec<f64>)]) {
        let mut delta = upstream.to_vec();
        for l in (0..self.layers.len()).rev() {
            let (i, o, w, _, elu) = &self.layers[l];
            let x = &acts[2 * l];
            let z = &acts[2 * l + 1];
            for r in 0..*o {
                if *elu && z[r] <= 0.0 {
                    delta[r] *= z[r].exp();
                }
            }
            for r in 0..*o {
                g[l].1[r] += delta[r];
                for c in 0..*i {
                    g[l].0[r * i + c] += delta[r] * x[c];
                }
            }
            delta = (0..*i).map(|c| (0..*o).map(|r| delta[r] * w[r * i + c]).sum()).collect();
        }
    }

    fn zero(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.layers.iter().map(|(i, o, ..)| (vec![0.0; i * o], vec![0.0; *o])).collect()
    }
}

struct RefAdam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl RefAdam {
    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, p: &mut [f64], g: &[f64]) {
        self.t += 1;
        for k in 0..p.len() {
            self.m[k] = 0.9 * self.m[k] + 0.1 * g[k];
            self.v[k] = 0.999 * self.v[k] + 0.001 * g[k] * g[k];
            let mh = self.m[k] / (1.0 - 0.9f64.powi(self.t));
            let vh = self.v[k] / (1.0 - 0.999f64.powi(self.t));
            p[k] -= self.lr * mh / (vh.sqrt() + 1e-8);
        }
    }
}

fn flatten(net: &RefNet) -> Vec<f64> {
    net.layers.iter().flat_map(|(_, _, w, b, _)| w.iter().chain(b).copied().collect::<Vec<_>>()).collect()
}

fn unflatten(net: &mut RefNet, p: &[f64]) {
    let mut k = 0;
    for (_, _, w, b, _) in &mut net.layers {
        for x in w.iter_mut().chain(b.iter_mut()) {
            *x = p[k];
            k += 1;
        }
    }
}

fn flat_grads(g: &[(Vec<f64>, Vec<f64>)]) -> Vec<f64> {
    g.iter().flat_map(|(w, b)| w.iter().chain(b).copied().collect::<Vec<_>>()).collect()
}

fn clip(g: &mut [f64], max: f64) {
    let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > max {
        for x in g.iter_mut() {
            *x *= max / n;
        }
    }
}

fn c10_degenerate(sh: &mut Shared) -> Outcome {
    let encoder = sh.encoder.clone().unwrap_or_else(|| VisionEncoder::new(&mut Rng::seed_from_u64(1)));
    let cfg = TrainerConfig {
        hidden: vec![32, 32],
        n_envs: 4,
        rollout_length: 48,
        minibatch_size: 64,
        epochs: 3,
        iterations: 1,
        beta1: 0.0,
        beta2: 0.0,
        lambda_reg: 0.0,
        seed: 1010,
        ..TrainerConfig::default()
    };
    assert_eq!(cfg.entropy_coef, 0.0);
    let world_cfg = WorldConfig::default();
    let mut lib = Trainer::new(cfg.clone(), world_cfg.clone(), Some(encoder.clone()), None).unwrap();
    lib.iterate().unwrap();

    // Reference: same initial agents and rollout streams, independent update math.
    let mut twin = Trainer::new(cfg.clone(), world_cfg, Some(encoder), None).unwrap();
    let seed = cfg.seed;
    let mut sampling: Vec<Rng> = (0..2).map(|k| rng_for(seed, &[stream::POLICY_SAMPLING, k])).collect();
    let buf = collect_rollouts(&twin.world, &twin.perception, &mut twin.batch, &twin.agents, None, cfg.rollout_length, &mut sampling).unwrap();
    let (n_envs, len) = (buf.n_envs, buf.length);
    let n = buf.len();
    let mut worst: f64 = 0.0;
    for (k, agent) in twin.agents.iter().enumerate() {
        let tr = &buf.agents[k];
        let (od, ad) = (agent.role.obs_dim(), agent.role.action_dim());
        // GAE per environment, then whole-buffer normalization.
        let mut adv = vec![0.0; n];
        let mut ret = vec![0.0; n];
        for e in 0..n_envs {
            let mut next_adv = 0.0;
            for t in (0..len).rev() {
                let i = e * len + t;
                let next_v = if buf.dones[i] { 0.0 } else if t + 1 < len { tr.values[i + 1] } else { tr.bootstrap[e] };
                let delta = buf.rewards[i] + cfg.gamma * next_v - tr.values[i];
                next_adv = delta + if buf.dones[i] { 0.0 } else { cfg.gamma * cfg.gae_lambda * next_adv };
                adv[i] = next_adv;
                ret[i] = next_adv + tr.values[i];
            }
        }
        let mean = adv.iter().sum::<f64>() / n as f64;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        for a in adv.iter_mut() {
            *a = (*a - mean) / (std + 1e-8);
        }

        let mut actor = RefNet::from(agent.actor.mean.layers());
        let mut log_std = agent.actor.log_std().to_vec();
        let mut critic = RefNet::from(agent.critic.layers());
        let n_actor = flatten(&actor).len() + ad;
        let mut actor_opt = RefAdam::new(n_actor, cfg.learning_rate);
        let mut critic_opt = RefAdam::new(flatten(&critic).len(), cfg.learning_rate);
        let mut shuffle = rng_for(seed, &[stream::SHUFFLE, k as u64]);
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut shuffle);
            for mb in order.chunks(cfg.minibatch_size) {
                let m = mb.len() as f64;
                let mut ga = actor.zero();
                let mut gls = vec![0.0; ad];
                let mut gc = critic.zero();
                for &i in mb {
                    let obs = &tr.obs[i * od..(i + 1) * od];
                    let act = &tr.actions[i * ad..(i + 1) * ad];
                    let acts = actor.forward(obs);
                    let mu = acts.last().unwrap();
                    let mut lp = 0.0;
                    for j in 0..ad {
                        let s = log_std[j].exp();
                        lp += -0.5 * ((act[j] - mu[j]) / s).powi(2) - log_std[j] - 0.5 * (2.0 * std::f64::consts::PI).ln();
                    }
                    let ratio = (lp - tr.log_probs[i]).exp();
                    let a = adv[i];
                    let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * a;
                    if ratio * a <= clipped {
                        // d(−ratio·A/m)/dθ = −ratio·A/m · dlogπ/dθ
                        let w = -ratio * a / m;
                        let up: Vec<f64> = (0..ad).map(|j| w * (act[j] - mu[j]) / (2.0 * log_std[j]).exp()).collect();
                        actor.backward(&acts, &up, &mut ga);
                        for j in 0..ad {
                            gls[j] += w * (((act[j] - mu[j]) / log_std[j].exp()).powi(2) - 1.0);
                        }
                    }
                    let state = buf.global_state(i);
                    let cacts = critic.forward(state);
                    let e = cacts.last().unwrap()[0] - ret[i];
                    critic.backward(&cacts, &[2.0 * cfg.value_coef * e / m], &mut gc);
                }
                let mut g = flat_grads(&ga);
                g.extend(&gls);
                clip(&mut g, cfg.max_grad_norm);
                let mut p = flatten(&actor);
                p.extend(&log_std);
                actor_opt.step(&mut p, &g);
                let split = p.len() - ad;
                unflatten(&mut actor, &p[..split]);
                log_std = p[split..].iter().map(|l| l.clamp(-5.0, 2.0)).collect();
                let mut g = flat_grads(&gc);
                clip(&mut g, cfg.max_grad_norm);
                let mut p = flatten(&critic);
                critic_opt.step(&mut p, &g);
                unflatten(&mut critic, &p);
            }
        }
        let lib_agent = &lib.agents[k];
        let mut lib_actor: Vec<f64> = lib_agent.actor.mean.param_blocks().concat();
        lib_actor.extend(lib_agent.actor.log_std());
        let lib_critic: Vec<f64> = lib_agent.critic.param_blocks().concat();
        let mut ref_actor = flatten(&actor);
        ref_actor.extend(&log_std);
        let before: Vec<f64> = agent.actor.mean.param_blocks().concat();
        let moved = before.iter().zip(&lib_actor).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(moved > 1e-6, "the update did not move the actor");
        for (a, b) in lib_actor.iter().zip(&ref_actor).chain(lib_critic.iter().zip(&flatten(&critic))) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst < 1e-9, format!("max parameter divergence from the reference PPO update: {worst:.2e}"))
}

/// Training setup shared by criteria 11 and 12.
fn budget_trainer(seed: u64, scripted: bool) -> TrainerConfig {
    TrainerConfig {
        hidden: vec![128, 128],
        n_envs: 64,
        rollout_length: 180,
        minibatch_size: 2048,
        epochs: 4,
        learning_rate: 3e-4,
        scripted_thrower: scripted,
        seed,
        ..TrainerConfig::default()
    }
}

fn train_for(
    cfg: TrainerConfig,
    world: &WorldConfig,
    encoder: &VisionEncoder,
    human: Option<&HumanPolicy>,
    seconds: f64,
) -> (Trainer, u32) {
    let mut t = Trainer::new(cfg, world.clone(), Some(encoder.clone()), human.cloned()).unwrap();
    let started = Instant::now();
    while started.elapsed().as_secs_f64() < seconds {
        t.iterate().unwrap();
    }
    let it = t.iteration;
    (t, it)
}

fn env_f64(name: &str, default: f64) -> f64 {
    std::env::var(name).ok().and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn c11_budgeted(sh: &mut Shared) -> Outcome {
    let Some(encoder) = sh.encoder.clone() else {
        return outcome(false, "no pretrained encoder (criterion 7 did not produce one)");
    };
    let human = sh.human.clone();
    let seconds = env_f64("HANDOVER_C11_SECONDS", if sh.full { 7200.0 } else { 1800.0 });
    let seeds = env_f64("HANDOVER_C11_SEEDS", if sh.full { 3.0 } else { 1.0 }) as u64;
    let mut world = WorldConfig::default();
    world.object = Some("disc".into());
    let w = World::new(world.clone()).unwrap();
    let perception = Perception::new(Some(encoder.clone()));
    let mut good = 0;
    let mut lines = Vec::new();
    for seed in 0..seeds {
        let (catcher, it_c) = train_for(budget_trainer(seed, true), &world, &encoder, None, seconds);
        let hit_c = evaluate(&w, &perception, &team_from_trainer(&catcher), 200, 1100 + seed).unwrap().hit_rate;
        let mut joint_cfg = budget_trainer(seed, false);
        if human.is_none() {
            joint_cfg.lambda_reg = 0.0;
        }
        let (joint, it_j) = train_for(joint_cfg, &world, &encoder, human.as_ref(), seconds);
        let hit_j = evaluate(&w, &perception, &team_from_trainer(&joint), 200, 1100 + seed).unwrap().hit_rate;
        if hit_c >= 0.8 && hit_j >= 0.6 {
            good += 1;
        }
        lines.push(format!("seed {seed}: catcher {:.1}% after {it_c} it, two-agent {:.1}% after {it_j} it", 100.0 * hit_c, 100.0 * hit_j));
    }
    let need = if seeds >= 3 { 2 } else { seeds };
    outcome(
        good >= need,
        format!(
            "{:.0} s per phase{}; {}",
            seconds,
            if sh.full { "" } else { " (reduced budget, HANDOVER_ACCEPTANCE=full for 2 h x 3 seeds)" },
            lines.join("; ")
        ),
    )
}

fn c12_ablation(sh: &mut Shared) -> Outcome {
    let (Some(encoder), Some(human)) = (sh.encoder.clone(), sh.human.clone()) else {
        return outcome(false, "needs the encoder and human policy from criteria 7 and 9");
    };
    let seconds = env_f64("HANDOVER_C12_SECONDS", if sh.full { 3600.0 } else { 120.0 });
    let world = WorldConfig::default();
    let mut unseen = world.clone();
    unseen.object_set = ObjectSetKind::Unseen;
    let unseen = World::new(unseen).unwrap();
    let perception = Perception::new(Some(encoder.clone()));
    let mut wins = 0;
    let mut any_success = false;
    let mut lines = Vec::new();
    for seed in 0..3 {
        let mut rates = Vec::new();
        for lambda in [0.2, 0.0] {
            let mut cfg = budget_trainer(seed, false);
            cfg.lambda_reg = lambda;
            let (t, _) = train_for(cfg, &world, &encoder, Some(&human), seconds);
            rates.push(evaluate(&unseen, &perception, &team_from_trainer(&t), 200, 1200 + seed).unwrap().success_rate);
        }
        any_success |= rates.iter().any(|&r| r > 0.0);
        if rates[0] >= rates[1] {
            wins += 1;
        }
        lines.push(format!("seed {seed}: {:.1}% vs {:.1}%", 100.0 * rates[0], 100.0 * rates[1]));
    }
    // Two arms that never succeed say nothing about direction.
    let pass = wins >= 2 && any_success;
    outcome(
        pass,
        format!(
            "unseen success, lambda_reg 0.2 vs 0, {:.0} s per arm{}: {}{}",
            seconds,
            if sh.full { "" } else { " (reduced budget)" },
            lines.join("; "),
            if any_success { "" } else { "; no arm succeeded, direction not demonstrated" }
        ),
    )
}

fn sha(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn bundle_bytes(f: impl FnOnce(&mut Bundle)) -> Vec<u8> {
    let mut b = Bundle::new();
    f(&mut b);
    let mut out = Vec::new();
    b.write(&mut out).unwrap();
    out
}

/// Hashes of every subcommand's outputs under the smoke config.
fn run_everything(dir: &std::path::Path) -> Vec<(&'static str, String)> {
    let cfg = ProjectConfig::from_toml_str(SMOKE).unwrap();
    let mut h = Vec::new();
    let (records, report) = run_collect(&cfg).unwrap();
    let path = dir.join("demos.bin");
    save_demos(&path, &records).unwrap();
    h.push(("collect-demos", sha(&[std::fs::read(&path).unwrap(), serde_json::to_vec(&report).unwrap()].concat())));
    let (encoder, report) = run_pretrain_encoder(&cfg, &records).unwrap();
    h.push(("pretrain-encoder", sha(&[bundle_bytes(|b| encoder.to_bundle(b)), serde_json::to_vec(&report).unwrap()].concat())));
    let (human, report) = run_pretrain_human(&cfg, &records).unwrap();
    h.push(("pretrain-human-policy", sha(&[bundle_bytes(|b| human.to_bundle(b)), serde_json::to_vec(&report).unwrap()].concat())));
    let out = dir.join("train");
    let (trainer, ckpt) = train(cfg.trainer.clone(), cfg.world.clone(), Some(encoder.clone()), Some(human.clone()), &out, |_| {}).unwrap();
    let metrics: Vec<serde_json::Value> = std::fs::read_to_string(out.join("metrics.jsonl"))
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("wall_time");
            v
        })
        .collect();
    h.push(("train", sha(&[std::fs::read(&ckpt).unwrap(), serde_json::to_vec(&metrics).unwrap()].concat())));
    let loaded = load_checkpoint(&ckpt, &cfg.world).unwrap();
    let reports = evaluate_sets(&cfg, &loaded.perception, &loaded.team, cfg.eval.episodes).unwrap();
    h.push(("evaluate", digest(&reports)));
    let mut traj = Vec::new();
    export_trajectories(&cfg.world_for(ObjectSetKind::Train).unwrap(), &loaded.perception, &team_from_trainer(&trainer), 3, cfg.seed, &mut traj).unwrap();
    h.push(("export-trajectories", sha(&traj)));
    let rows = run_ablation_suite(&cfg, &encoder, &human, |_| {}).unwrap();
    h.push(("ablate", digest(&rows)));
    let report = pipeline(&cfg, &dir.join("pipeline"), |_| {}, |_| {}).unwrap();
    h.push(("pipeline", digest(&report.evaluations)));
    h
}

fn c13_determinism(_: &mut Shared) -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ha = run_everything(a.path());
    let hb = run_everything(b.path());
    let differ: Vec<&str> = ha.iter().zip(&hb).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0).collect();
    outcome(
        differ.is_empty(),
        if differ.is_empty() {
            format!("{} subcommands hash identically across two runs (metrics compared without wall_time)", ha.len())
        } else {
            format!("outputs differ for {differ:?}")
        },
    )
}

type Criterion = (u32, &'static str, bool, fn(&mut Shared) -> Outcome);

fn main() {
    let mut shared = Shared {
        full: std::env::var("HANDOVER_ACCEPTANCE").is_ok_and(|v| v == "full"),
        ..Default::default()
    };
    let only: Option<Vec<u32>> = std::env::var("HANDOVER_CRITERIA").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    // (number, name, gates the exit status, check)
    let criteria: [Criterion; 13] = [
        (1, "gradient correctness", true, c1_gradients),
        (2, "GAE oracle", true, c2_gae),
        (3, "KL correctness", true, c3_kl),
        (4, "ballistics", true, c4_ballistics),
        (5, "reward arithmetic", false, c5_reward),
        (6, "hybrid advantage", true, c6_hybrid),
        (7, "encoder pretraining", true, c7_encoder),
        (8, "demonstrator quality", true, c8_demonstrator),
        (9, "behavior cloning", true, c9_cloning),
        (10, "degenerate equivalence", true, c10_degenerate),
        (11, "budgeted training", false, c11_budgeted),
        (12, "ablation direction", false, c12_ablation),
        (13, "determinism", true, c13_determinism),
    ];
    let mut failed_gates = Vec::new();
    for (n, name, gating, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| check(&mut shared)));
        let secs = started.elapsed().as_secs_f64();
        let o = result.unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let note = if gating { "" } else { " [non-gating]" };
        println!("criterion {n}: {tag} - {name}{note} - {} ({secs:.1} s)", o.detail);
        if gating && !o.pass {
            failed_gates.push(n);
        }
    }
    if !failed_gates.is_empty() {
        eprintln!("gating criteria failed: {failed_gates:?}");
        std::process::exit(1);
    }
}
