//! Command-line workflows for training, running and evaluating retargeting
//! models. [`run`] is the whole program; `main` only forwards its exit code.

use anyhow::{bail, Context as _};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use retarget_core::baseline::{baseline_model, generate_pairs, load_paired_dataset, save_paired_dataset, train_baseline, BaselineConfig};
use retarget_core::data::{build_pose_bank, load_motion_trace, load_pose_bank, save_motion_trace, save_pose_bank, MotionTrace, PoseBank};
use retarget_core::eval::{
    bench_latency, build_validation_set, eval_semantic, held_out_human_poses, held_out_reconstruction, model_triplet_agreement, oracle_batch,
    EvalReport, OracleConfig, BENCH_MIN_CALLS,
};
use retarget_core::io::write_atomic;
use retarget_core::rng::subseed;
use retarget_core::train::{load_checkpoint, save_checkpoint, train, BankPair, ModelArch, ModelKind, RetargetModel, TrainConfig, ValidationSet};
use retarget_core::{Domain, KinematicChain};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Environment variable naming the directory relative paths resolve against.
pub const DATA_DIR_ENV: &str = "RETARGET_DATA_DIR";

#[derive(Parser, Debug)]
#[command(name = "retarget", version, about = "Human-to-robot pose retargeting through a shared latent space")]
struct Cli {
    /// Threads for data-parallel sections; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a pose bank for one chain.
    GenBank {
        #[arg(long)]
        chain: String,
        #[arg(long, value_parser = parse_domain)]
        domain: Domain,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the latent-space model.
    Train {
        #[command(flatten)]
        banks: BankArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        val: ValArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retarget a human motion trace.
    Retarget {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// In-between human key poses through the latent space.
    Interpolate {
        #[arg(long)]
        model: PathBuf,
        /// Human trace whose frames are the key poses.
        #[arg(long = "in")]
        input: PathBuf,
        /// Frames per segment, endpoints included.
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint against reference retargets; writes JSON and a per-pose CSV.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        val: ValArgs,
        /// Seed for the random-pose comparison and agreement banks.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Triplets for the latent agreement score; 0 skips it.
        #[arg(long, default_value_t = 2000)]
        triplets: usize,
        /// Timed single-pose calls; 0 skips the latency benchmark.
        #[arg(long, default_value_t = 10_000)]
        bench: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reference retargets of a human trace by direct search.
    Oracle {
        /// Robot chain.
        #[arg(long, default_value = "toy-robot-8")]
        chain: String,
        #[arg(long = "in")]
        input: PathBuf,
        /// Search restarts per pose.
        #[arg(long, default_value_t = 32)]
        budget: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pair human bank rows with their nearest robot bank rows.
    Pairgen {
        #[arg(long)]
        human_bank: PathBuf,
        #[arg(long)]
        robot_bank: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the supervised baseline on generated pairs.
    TrainBaseline {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        human_bank: PathBuf,
        #[arg(long)]
        robot_bank: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        val: ValArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Single-pose retarget latency.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the full loss, the loss without latent consistency and the loss
    /// without the triplet term; writes a comparison CSV and one checkpoint each.
    Ablate {
        #[command(flatten)]
        banks: BankArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        val: ValArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct BankArgs {
    /// Human pose bank; sampled when absent.
    #[arg(long)]
    human_bank: Option<PathBuf>,
    /// Robot pose bank; sampled when absent.
    #[arg(long)]
    robot_bank: Option<PathBuf>,
    #[arg(long, default_value = "human-upper-14")]
    human_chain: String,
    /// Robot chain.
    #[arg(long, default_value = "toy-robot-8")]
    chain: String,
    #[arg(long, default_value_t = 100_000)]
    human_count: usize,
    #[arg(long, default_value_t = 200_000)]
    robot_count: usize,
    #[arg(long, default_value_t = 42)]
    bank_seed: u64,
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda_triplet: Option<f64>,
    #[arg(long)]
    lambda_rec: Option<f64>,
    #[arg(long)]
    lambda_ltc: Option<f64>,
    /// Optimizer steps per epoch.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct ValArgs {
    /// Held-out human poses with reference retargets; 0 disables validation.
    #[arg(long, default_value_t = 200)]
    val_poses: usize,
    #[arg(long, default_value_t = 7)]
    val_seed: u64,
    /// Reference search restarts per pose.
    #[arg(long, default_value_t = 32)]
    budget: usize,
}

fn parse_domain(s: &str) -> Result<Domain, String> {
    match s {
        "human" => Ok(Domain::Human),
        "robot" => Ok(Domain::Robot),
        _ => Err(format!("expected 'human' or 'robot', got '{s}'")),
    }
}

/// Written next to every artifact as `<artifact>.manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub wall_time_s: f64,
}

struct Ctx {
    data_dir: Option<PathBuf>,
    workers: usize,
    started: Instant,
}

impl Ctx {
    fn path(&self, p: &Path) -> PathBuf {
        match &self.data_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn manifest(&self, subcommand: &str, config: serde_json::Value, inputs: &[&Path], outputs: &[&Path], seed: Option<u64>) -> anyhow::Result<()> {
        let m = RunManifest {
            subcommand: subcommand.to_string(),
            config,
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            outputs: outputs.iter().map(|p| p.to_path_buf()).collect(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&m)?;
        for out in outputs {
            write_atomic(&sidecar(out, "manifest.json"), text.as_bytes())?;
        }
        Ok(())
    }
}

/// `<path>.<suffix>`, keeping the original extension.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

/// Checkpoint path ablate writes for one configuration.
pub fn ablation_checkpoint(csv: &Path, name: &str) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}-{name}.rtm"))
}

/// Parses `argv` (program name first), runs the workflow and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USER } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let ctx = Ctx {
        data_dir: std::env::var_os(DATA_DIR_ENV).map(PathBuf::from),
        workers: cli.workers.max(1),
        started: Instant::now(),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(ctx.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| dispatch(&ctx, cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

/// Library errors decide between bad input and runtime failure; anything
/// raised by the CLI itself is a usage problem.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    match e.chain().find_map(|c| c.downcast_ref::<retarget_core::Error>()) {
        Some(core) if !core.is_user_error() => EXIT_RUNTIME,
        _ => EXIT_USER,
    }
}

fn dispatch(ctx: &Ctx, command: Command) -> anyhow::Result<()> {
    match command {
        Command::GenBank { chain, domain, count, seed, out } => gen_bank(ctx, &chain, domain, count, seed, &out),
        Command::Train { banks, train, val, out } => train_cmd(ctx, &banks, &train, &val, &out),
        Command::Retarget { model, input, out } => retarget_cmd(ctx, &model, &input, &out),
        Command::Interpolate { model, input, steps, out } => interpolate_cmd(ctx, &model, &input, steps, &out),
        Command::Evaluate { model, val, seed, triplets, bench, out } => evaluate_cmd(ctx, &model, &val, seed, triplets, bench, &out),
        Command::Oracle { chain, input, budget, seed, out } => oracle_cmd(ctx, &chain, &input, budget, seed, &out),
        Command::Pairgen { human_bank, robot_bank, count, out } => pairgen_cmd(ctx, &human_bank, &robot_bank, count, &out),
        Command::TrainBaseline { pairs, human_bank, robot_bank, train, val, out } => {
            baseline_cmd(ctx, &pairs, &human_bank, &robot_bank, &train, &val, &out)
        }
        Command::Bench { model, count, seed, out } => bench_cmd(ctx, &model, count, seed, out.as_deref()),
        Command::Ablate { banks, train, val, out } => ablate_cmd(ctx, &banks, &train, &val, &out),
    }
}

fn gen_bank(ctx: &Ctx, chain: &str, domain: Domain, count: usize, seed: u64, out: &Path) -> anyhow::Result<()> {
    let chain = KinematicChain::resolve(chain)?;
    let bank = build_pose_bank(&chain, domain, count, seed, ctx.workers)?;
    let out = ctx.path(out);
    save_pose_bank(&bank, &out)?;
    let config = serde_json::json!({ "chain": chain.name(), "domain": domain.as_str(), "count": count });
    ctx.manifest("gen-bank", config, &[], &[&out], Some(seed))?;
    println!("wrote {} {} poses to {}", count, domain.as_str(), out.display());
    Ok(())
}

fn load_or_build(ctx: &Ctx, path: Option<&Path>, chain: &str, domain: Domain, count: usize, seed: u64) -> anyhow::Result<(PoseBank, Option<PathBuf>)> {
    match path {
        Some(p) => {
            let p = ctx.path(p);
            let bank = load_pose_bank(&p).with_context(|| format!("loading {} bank", domain.as_str()))?;
            if bank.domain() != domain {
                bail!("{} holds {} poses, expected {}", p.display(), bank.domain().as_str(), domain.as_str());
            }
            Ok((bank, Some(p)))
        }
        None => {
            let chain = KinematicChain::resolve(chain)?;
            Ok((build_pose_bank(&chain, domain, count, subseed(seed, domain.as_str()), ctx.workers)?, None))
        }
    }
}

fn banks(ctx: &Ctx, a: &BankArgs) -> anyhow::Result<(PoseBank, PoseBank, Vec<PathBuf>)> {
    let (h, hp) = load_or_build(ctx, a.human_bank.as_deref(), &a.human_chain, Domain::Human, a.human_count, a.bank_seed)?;
    let (r, rp) = load_or_build(ctx, a.robot_bank.as_deref(), &a.chain, Domain::Robot, a.robot_count, a.bank_seed)?;
    Ok((h, r, hp.into_iter().chain(rp).collect()))
}

fn train_config(a: &TrainArgs) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        epochs: a.epochs.unwrap_or(d.epochs),
        batch: a.batch.unwrap_or(d.batch),
        lr: a.lr.unwrap_or(d.lr),
        alpha: a.alpha.unwrap_or(d.alpha),
        lambda_triplet: a.lambda_triplet.unwrap_or(d.lambda_triplet),
        lambda_rec: a.lambda_rec.unwrap_or(d.lambda_rec),
        lambda_ltc: a.lambda_ltc.unwrap_or(d.lambda_ltc),
        steps_per_epoch: a.steps.unwrap_or(d.steps_per_epoch),
        seed: a.seed.unwrap_or(d.seed),
        ..d
    }
}

fn validation(ctx: &Ctx, v: &ValArgs, human: &KinematicChain, robot: &KinematicChain) -> anyhow::Result<Option<ValidationSet>> {
    if v.val_poses == 0 {
        return Ok(None);
    }
    let oracle = OracleConfig { restarts: v.budget, ..OracleConfig::default() };
    Ok(Some(build_validation_set(human, robot, v.val_poses, v.val_seed, &oracle, ctx.workers)?))
}

fn print_epoch(tag: &str) -> impl FnMut(&retarget_core::train::EpochMetrics) + '_ {
    move |m| {
        eprintln!(
            "{tag}epoch {:>3}  triplet {:.5}  rec {:.5}  ltc {:.5}  total {:.5}  val_mse {:.5}",
            m.epoch, m.l_triplet, m.l_rec, m.l_ltc, m.total, m.val_mse
        )
    }
}

/// Trains one model and writes its checkpoint and metrics CSV.
fn train_one(
    banks: BankPair<'_>,
    val: Option<&ValidationSet>,
    config: &TrainConfig,
    out: &Path,
    tag: &str,
) -> anyhow::Result<(RetargetModel<f32>, retarget_core::train::MetricsLog)> {
    let mut model = RetargetModel::<f32>::new(banks.human.chain(), banks.robot.chain(), &ModelArch::default(), config.seed)?;
    let log = train(&mut model, banks, val, config, &mut print_epoch(tag))?;
    save_checkpoint(&model, ModelKind::Unsupervised, Some(config), out)?;
    write_atomic(&sidecar(out, "metrics.csv"), log.to_csv().as_bytes())?;
    Ok((model, log))
}

fn train_cmd(ctx: &Ctx, b: &BankArgs, t: &TrainArgs, v: &ValArgs, out: &Path) -> anyhow::Result<()> {
    let config = train_config(t);
    config.validate()?;
    let (bh, br, inputs) = banks(ctx, b)?;
    let val = validation(ctx, v, bh.chain(), br.chain())?;
    let out = ctx.path(out);
    train_one(BankPair::new(&bh, &br)?, val.as_ref(), &config, &out, "")?;
    let metrics = sidecar(&out, "metrics.csv");
    let inputs: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    ctx.manifest("train", serde_json::to_value(&config)?, &inputs, &[&out, &metrics], Some(config.seed))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn load_model(ctx: &Ctx, path: &Path) -> anyhow::Result<(retarget_core::train::Checkpoint, PathBuf)> {
    let p = ctx.path(path);
    let ck = load_checkpoint(&p).with_context(|| format!("loading model {}", p.display()))?;
    Ok((ck, p))
}

fn retarget_cmd(ctx: &Ctx, model: &Path, input: &Path, out: &Path) -> anyhow::Result<()> {
    let (ck, model) = load_model(ctx, model)?;
    let input = ctx.path(input);
    let trace = load_motion_trace(&input)?;
    let result = ck.model.retarget_trace(&trace)?;
    let out = ctx.path(out);
    save_motion_trace(&result, &out)?;
    ctx.manifest("retarget", serde_json::json!({}), &[&model, &input], &[&out], None)?;
    println!("retargeted {} frames to {}", result.len(), out.display());
    Ok(())
}

fn human_frames(trace: &MotionTrace, chain: &KinematicChain) -> anyhow::Result<Vec<retarget_core::HumanPose>> {
    if trace.chain_name != chain.name() {
        return Err(retarget_core::Error::ChainMismatch(format!("trace is for '{}', model expects '{}'", trace.chain_name, chain.name())).into());
    }
    Ok((0..trace.len()).map(|i| trace.human_frame(chain, i)).collect::<retarget_core::Result<_>>()?)
}

fn interpolate_cmd(ctx: &Ctx, model: &Path, input: &Path, steps: usize, out: &Path) -> anyhow::Result<()> {
    let (ck, model) = load_model(ctx, model)?;
    let input = ctx.path(input);
    let trace = load_motion_trace(&input)?;
    let keys = human_frames(&trace, &ck.model.human_chain)?;
    let result = ck.model.interpolate_keyposes(&keys, steps, trace.frame_rate)?;
    let out = ctx.path(out);
    save_motion_trace(&result, &out)?;
    ctx.manifest("interpolate", serde_json::json!({ "steps": steps }), &[&model, &input], &[&out], None)?;
    println!("wrote {} frames to {}", result.len(), out.display());
    Ok(())
}

fn evaluate_cmd(ctx: &Ctx, model: &Path, v: &ValArgs, seed: u64, triplets: usize, bench: usize, out: &Path) -> anyhow::Result<()> {
    let (ck, model_path) = load_model(ctx, model)?;
    let m = &ck.model;
    if v.val_poses == 0 {
        bail!("--val-poses must be at least 1 for evaluation");
    }
    if bench != 0 && bench < BENCH_MIN_CALLS {
        bail!("--bench needs at least {BENCH_MIN_CALLS} calls (or 0 to skip)");
    }
    let set = validation(ctx, v, &m.human_chain, &m.robot_chain)?.expect("val_poses checked");
    let sem = eval_semantic(m, &set, seed)?;
    let triplet_agreement = if triplets == 0 {
        None
    } else {
        let n = 20_000;
        let bh = build_pose_bank(&m.human_chain, Domain::Human, n, subseed(seed, "agreement-human"), ctx.workers)?;
        let br = build_pose_bank(&m.robot_chain, Domain::Robot, n, subseed(seed, "agreement-robot"), ctx.workers)?;
        Some(model_triplet_agreement(m, BankPair::new(&bh, &br)?, triplets, seed)?.overall)
    };
    let mut report = EvalReport {
        model_kind: ck.kind,
        human_chain: m.human_chain.name().to_string(),
        robot_chain: m.robot_chain.name().to_string(),
        poses: set.human.len(),
        joint_mse: sem.joint_mse,
        semantic_dgr_mean: sem.retarget_mean,
        oracle_dgr_mean: sem.oracle_mean,
        random_dgr_mean: sem.random_mean,
        reconstruction_l1: held_out_reconstruction(m, 1000, seed)?,
        triplet_agreement,
        latency_mean: 0.0,
        latency_p99: 0.0,
        control_frequency: 0.0,
        rows: sem.rows,
    };
    if bench > 0 {
        let poses = held_out_human_poses(&m.human_chain, 256, subseed(seed, "bench"))?;
        report.latency(&bench_latency(m, &poses, bench)?);
    }
    let out = ctx.path(out);
    let csv = out.with_extension("csv");
    write_atomic(&out, report.to_json().as_bytes())?;
    write_atomic(&csv, report.to_csv().as_bytes())?;
    let config = serde_json::json!({ "val_poses": v.val_poses, "val_seed": v.val_seed, "budget": v.budget, "triplets": triplets, "bench": bench });
    ctx.manifest("evaluate", config, &[&model_path], &[&out, &csv], Some(seed))?;
    println!(
        "{} model: joint_mse {:.5}  dgr {:.4} (reference {:.4}, random {:.4})  rec_l1 {:.4}",
        match report.model_kind {
            ModelKind::Unsupervised => "latent",
            ModelKind::Baseline => "baseline",
        },
        report.joint_mse,
        report.semantic_dgr_mean,
        report.oracle_dgr_mean,
        report.random_dgr_mean,
        report.reconstruction_l1
    );
    Ok(())
}

fn oracle_cmd(ctx: &Ctx, chain: &str, input: &Path, budget: usize, seed: u64, out: &Path) -> anyhow::Result<()> {
    let robot = KinematicChain::resolve(chain)?;
    let input = ctx.path(input);
    let trace = load_motion_trace(&input)?;
    let human = KinematicChain::resolve(&trace.chain_name).context("resolving the trace's chain")?;
    let poses = human_frames(&trace, &human)?;
    let config = OracleConfig { restarts: budget, ..OracleConfig::default() };
    let found = oracle_batch(&human, &robot, &poses, &config, seed, ctx.workers)?;
    let result = MotionTrace::from_robot(&robot, trace.frame_rate, &found.iter().map(|r| r.pose.clone()).collect::<Vec<_>>())?;
    let out = ctx.path(out);
    save_motion_trace(&result, &out)?;
    ctx.manifest("oracle", serde_json::to_value(config)?, &[&input], &[&out], Some(seed))?;
    let mean = found.iter().map(|r| r.distance).sum::<f64>() / found.len().max(1) as f64;
    println!("wrote {} reference frames to {} (mean distance {:.5})", result.len(), out.display(), mean);
    Ok(())
}

fn pairgen_cmd(ctx: &Ctx, human: &Path, robot: &Path, count: usize, out: &Path) -> anyhow::Result<()> {
    let (human, robot) = (ctx.path(human), ctx.path(robot));
    let bh = load_pose_bank(&human)?;
    let br = load_pose_bank(&robot)?;
    let pairs = generate_pairs(&bh, &br, count, ctx.workers)?;
    let out = ctx.path(out);
    save_paired_dataset(&pairs, &out)?;
    ctx.manifest("pairgen", serde_json::json!({ "count": count }), &[&human, &robot], &[&out], None)?;
    println!("wrote {} pairs to {}", pairs.len(), out.display());
    Ok(())
}

fn baseline_cmd(ctx: &Ctx, pairs: &Path, human: &Path, robot: &Path, t: &TrainArgs, v: &ValArgs, out: &Path) -> anyhow::Result<()> {
    let tc = train_config(t);
    let config = BaselineConfig { lr: tc.lr, batch: tc.batch, epochs: tc.epochs, steps_per_epoch: tc.steps_per_epoch, seed: tc.seed };
    config.validate()?;
    let (pairs, human, robot) = (ctx.path(pairs), ctx.path(human), ctx.path(robot));
    let data = load_paired_dataset(&pairs)?;
    let bh = load_pose_bank(&human)?;
    let br = load_pose_bank(&robot)?;
    let val = validation(ctx, v, bh.chain(), br.chain())?;
    let mut model = baseline_model::<f32>(&bh, &br, &ModelArch::default(), config.seed)?;
    let log = train_baseline(&mut model, &data, &bh, &br, val.as_ref(), &config, &mut |e| {
        eprintln!("epoch {:>3}  l1 {:.5}  val_mse {:.5}", e.epoch, e.l1, e.val_mse)
    })?;
    let out = ctx.path(out);
    save_checkpoint(&model, ModelKind::Baseline, Some(&config), &out)?;
    let metrics = sidecar(&out, "metrics.csv");
    write_atomic(&metrics, log.to_csv().as_bytes())?;
    ctx.manifest("train-baseline", serde_json::to_value(&config)?, &[&pairs, &human, &robot], &[&out, &metrics], Some(config.seed))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn bench_cmd(ctx: &Ctx, model: &Path, count: usize, seed: u64, out: Option<&Path>) -> anyhow::Result<()> {
    let (ck, model) = load_model(ctx, model)?;
    let poses = held_out_human_poses(&ck.model.human_chain, 256, subseed(seed, "bench"))?;
    let report = bench_latency(&ck.model, &poses, count)?;
    println!("{} calls: mean {:.3} us, p99 {:.3} us, {:.2} kHz", report.calls, report.mean_s * 1e6, report.p99_s * 1e6, report.khz);
    if let Some(out) = out {
        let out = ctx.path(out);
        write_atomic(&out, serde_json::to_string_pretty(&report)?.as_bytes())?;
        ctx.manifest("bench", serde_json::json!({ "count": count }), &[&model], &[&out], Some(seed))?;
    }
    Ok(())
}

/// Loss configurations compared by `ablate`, in output order.
pub const ABLATIONS: [(&str, bool, bool); 3] = [("full", true, true), ("no-ltc", true, false), ("no-triplet", false, true)];

fn ablate_cmd(ctx: &Ctx, b: &BankArgs, t: &TrainArgs, v: &ValArgs, out: &Path) -> anyhow::Result<()> {
    let base = train_config(t);
    base.validate()?;
    if v.val_poses == 0 {
        bail!("--val-poses must be at least 1 for an ablation");
    }
    let (bh, br, inputs) = banks(ctx, b)?;
    let val = validation(ctx, v, bh.chain(), br.chain())?.expect("val_poses checked");
    let pair = BankPair::new(&bh, &br)?;
    let out = ctx.path(out);
    let mut csv = String::from("config,lambda_triplet,lambda_rec,lambda_ltc,val_mse,semantic_dgr,train_seconds\n");
    let mut outputs = vec![out.clone()];
    for (name, triplet, ltc) in ABLATIONS {
        let config = TrainConfig {
            lambda_triplet: if triplet { base.lambda_triplet } else { 0.0 },
            lambda_ltc: if ltc { base.lambda_ltc } else { 0.0 },
            ..base.clone()
        };
        let path = ablation_checkpoint(&out, name);
        let start = Instant::now();
        let tag = format!("[{name}] ");
        let (model, log) = train_one(pair, Some(&val), &config, &path, &tag)?;
        let seconds = start.elapsed().as_secs_f64();
        let val_mse = log.epochs.last().map_or_else(|| val.joint_mse(&model), |e| Ok(e.val_mse))?;
        let sem = eval_semantic(&model, &val, config.seed)?;
        csv.push_str(&format!(
            "{name},{},{},{},{val_mse},{},{seconds:.1}\n",
            config.lambda_triplet, config.lambda_rec, config.lambda_ltc, sem.retarget_mean
        ));
        outputs.push(sidecar(&path, "metrics.csv"));
        outputs.push(path);
    }
    write_atomic(&out, csv.as_bytes())?;
    let inputs: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    let outputs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    ctx.manifest("ablate", serde_json::to_value(&base)?, &inputs, &outputs, Some(base.seed))?;
    print!("{csv}");
    Ok(())
}
