//! Run configuration (flat key=value files) and the command implementations
//! behind the CLI: dataset generation, the mu-sweep baseline, training,
//! evaluation, the timing benchmark, bound tables, and the property-check
//! suite.
//!
//! Every emitted CSV starts with a `# config <hash>` comment carrying the
//! FNV-1a hash of the effective configuration, so outputs can be traced back
//! to the settings that produced them.

use crate::bnc::{
    branch_and_bound, brute_force_optimum, BncStatus, BranchRule, NodeSelection, SolveBudget,
    SolvePolicy,
};
use crate::complexity::{
    cg_param_dim, count_sign_patterns, line_scan_pieces, m_hyperplanes, pdim_bound_finite,
    pdim_bound_lt, pdim_bound_relu, sample_size, BoundKind, PiecewiseSpec, SampleSpec,
};
use crate::cuts::{
    candidate_pool, cg_cut, cg_cut_with_snap, cut_is_valid, efficacy, natural_box_bound,
    parallelism, Multiplier, Provenance,
};
use crate::error::{Error, Result};
use crate::ilp::{
    gen_chvatal_multiknapsack, norm_bounds, read_dataset, write_dataset, GeneratorConfig,
    IlpInstance, ObjectiveRule,
};
use crate::lp::{fractional_tableau_rows, solve_lp, LpProblem, LpStatus};
use crate::nn::{
    backprop_relu, crelu, forward_relu, init_params, read_checkpoint, write_checkpoint,
    NetworkArch, NetworkParams, SqueezeKind,
};
use crate::train::{
    derivative_free_train, evaluate_policy, td3_train, Actor, ActorKind, EvalStats, RewardSpec,
    Rewarder, Td3Config, TrainRun,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

/// Offset separating test-set generator seeds from training-set seeds.
const TEST_SEED_OFFSET: u64 = 5_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub n_items: usize,
    pub n_knapsacks: usize,
    pub coeff_lo: i64,
    pub coeff_hi: i64,
    pub objective_rule: ObjectiveRule,
    pub train_count: usize,
    pub test_count: usize,
    pub seed: u64,
    pub tree_cap: usize,
    pub lp_iteration_cap: usize,
    pub node_selection: NodeSelection,
    pub branch_rule: BranchRule,
    pub integral_objective: bool,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_kind: ActorKind,
    pub squeeze: SqueezeKind,
    pub sweep_step: f64,
    pub td3_episodes: usize,
    pub td3_warmup: usize,
    pub td3_batch_size: usize,
    pub td3_buffer_capacity: usize,
    pub td3_actor_lr: f64,
    pub td3_critic_lr: f64,
    pub td3_noise_sigma: f64,
    pub td3_uniform_eps: f64,
    pub td3_target_noise_sigma: f64,
    pub td3_noise_clip: f64,
    pub td3_policy_delay: usize,
    pub td3_polyak: f64,
    pub td3_updates_per_episode: usize,
    pub td3_epoch_len: usize,
    pub td3_validation_size: usize,
    pub cem_iterations: usize,
    pub cem_population: usize,
    pub cem_elite_frac: f64,
    pub bench_repeats: usize,
}

impl Default for RunConfig {
    /// Desk-scale preset: 10 items, 2 knapsacks, coefficients 1..100,
    /// 500 train / 100 test instances.
    fn default() -> Self {
        RunConfig {
            out_dir: PathBuf::from("out"),
            n_items: 10,
            n_knapsacks: 2,
            coeff_lo: 1,
            coeff_hi: 100,
            objective_rule: ObjectiveRule::SumOfColumns,
            train_count: 500,
            test_count: 100,
            seed: 0,
            tree_cap: 10_000,
            lp_iteration_cap: 10_000,
            node_selection: NodeSelection::BestBound,
            branch_rule: BranchRule::MostFractional,
            integral_objective: true,
            actor_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            actor_kind: ActorKind::Relu,
            squeeze: SqueezeKind::Crelu,
            sweep_step: 0.01,
            td3_episodes: 8000,
            td3_warmup: 1000,
            td3_batch_size: 64,
            td3_buffer_capacity: 40_000,
            td3_actor_lr: 1e-3,
            td3_critic_lr: 1e-3,
            td3_noise_sigma: 0.2,
            td3_uniform_eps: 0.2,
            td3_target_noise_sigma: 0.2,
            td3_noise_clip: 0.5,
            td3_policy_delay: 2,
            td3_polyak: 0.995,
            td3_updates_per_episode: 2,
            td3_epoch_len: 200,
            td3_validation_size: 96,
            cem_iterations: 20,
            cem_population: 16,
            cem_elite_frac: 0.25,
            bench_repeats: 100,
        }
    }
}

fn parse_key<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad value '{value}' for key '{key}'"),
    })
}

fn parse_widths(value: &str, line: usize) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|t| {
            t.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad width list '{value}'"),
            })
        })
        .collect()
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or(Error::Parse {
                line,
                msg: format!("expected key=value, got '{trimmed}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "n_items" => cfg.n_items = parse_key(key, value, line)?,
                "n_knapsacks" => cfg.n_knapsacks = parse_key(key, value, line)?,
                "coeff_lo" => cfg.coeff_lo = parse_key(key, value, line)?,
                "coeff_hi" => cfg.coeff_hi = parse_key(key, value, line)?,
                "objective_rule" => cfg.objective_rule = value.parse()?,
                "train_count" => cfg.train_count = parse_key(key, value, line)?,
                "test_count" => cfg.test_count = parse_key(key, value, line)?,
                "seed" => cfg.seed = parse_key(key, value, line)?,
                "tree_cap" => cfg.tree_cap = parse_key(key, value, line)?,
                "lp_iteration_cap" => cfg.lp_iteration_cap = parse_key(key, value, line)?,
                "node_selection" => {
                    cfg.node_selection = match value {
                        "best_bound" => NodeSelection::BestBound,
                        "dfs" => NodeSelection::Dfs,
                        _ => {
                            return Err(Error::Parse {
                                line,
                                msg: format!("unknown node_selection '{value}'"),
                            })
                        }
                    }
                }
                "branch_rule" => {
                    cfg.branch_rule = match value {
                        "most_fractional" => BranchRule::MostFractional,
                        "lowest_index" => BranchRule::LowestIndex,
                        _ => {
                            return Err(Error::Parse {
                                line,
                                msg: format!("unknown branch_rule '{value}'"),
                            })
                        }
                    }
                }
                "integral_objective" => cfg.integral_objective = parse_key(key, value, line)?,
                "actor_hidden" => cfg.actor_hidden = parse_widths(value, line)?,
                "critic_hidden" => cfg.critic_hidden = parse_widths(value, line)?,
                "actor_kind" => {
                    cfg.actor_kind = match value {
                        "relu" => ActorKind::Relu,
                        "lt" => ActorKind::Lt,
                        _ => {
                            return Err(Error::Parse {
                                line,
                                msg: format!("unknown actor_kind '{value}'"),
                            })
                        }
                    }
                }
                "squeeze" => cfg.squeeze = value.parse()?,
                "sweep_step" => cfg.sweep_step = parse_key(key, value, line)?,
                "td3_episodes" => cfg.td3_episodes = parse_key(key, value, line)?,
                "td3_warmup" => cfg.td3_warmup = parse_key(key, value, line)?,
                "td3_batch_size" => cfg.td3_batch_size = parse_key(key, value, line)?,
                "td3_buffer_capacity" => cfg.td3_buffer_capacity = parse_key(key, value, line)?,
                "td3_actor_lr" => cfg.td3_actor_lr = parse_key(key, value, line)?,
                "td3_critic_lr" => cfg.td3_critic_lr = parse_key(key, value, line)?,
                "td3_noise_sigma" => cfg.td3_noise_sigma = parse_key(key, value, line)?,
                "td3_uniform_eps" => cfg.td3_uniform_eps = parse_key(key, value, line)?,
                "td3_target_noise_sigma" => {
                    cfg.td3_target_noise_sigma = parse_key(key, value, line)?
                }
                "td3_noise_clip" => cfg.td3_noise_clip = parse_key(key, value, line)?,
                "td3_policy_delay" => cfg.td3_policy_delay = parse_key(key, value, line)?,
                "td3_polyak" => cfg.td3_polyak = parse_key(key, value, line)?,
                "td3_updates_per_episode" => {
                    cfg.td3_updates_per_episode = parse_key(key, value, line)?
                }
                "td3_epoch_len" => cfg.td3_epoch_len = parse_key(key, value, line)?,
                "td3_validation_size" => cfg.td3_validation_size = parse_key(key, value, line)?,
                "cem_iterations" => cfg.cem_iterations = parse_key(key, value, line)?,
                "cem_population" => cfg.cem_population = parse_key(key, value, line)?,
                "cem_elite_frac" => cfg.cem_elite_frac = parse_key(key, value, line)?,
                "bench_repeats" => cfg.bench_repeats = parse_key(key, value, line)?,
                _ => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown config key '{key}'"),
                    })
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_str(&std::fs::read_to_string(path)?)
    }

    /// Canonical listing of every effective setting, one `key=value` per
    /// line in fixed order; the config hash is computed over this.
    pub fn canonical(&self) -> String {
        let rule = match self.objective_rule {
            ObjectiveRule::SumOfColumns => "sum_of_columns",
            ObjectiveRule::FirstRow => "first_row",
        };
        let sel = match self.node_selection {
            NodeSelection::BestBound => "best_bound",
            NodeSelection::Dfs => "dfs",
        };
        let br = match self.branch_rule {
            BranchRule::MostFractional => "most_fractional",
            BranchRule::LowestIndex => "lowest_index",
        };
        let kind = match self.actor_kind {
            ActorKind::Relu => "relu",
            ActorKind::Lt => "lt",
        };
        let sq = match self.squeeze {
            SqueezeKind::Crelu => "crelu",
            SqueezeKind::Sigmoid => "sigmoid",
        };
        let widths = |v: &[usize]| {
            v.iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k}={v}").unwrap();
        kv("actor_hidden", widths(&self.actor_hidden));
        kv("actor_kind", kind.into());
        kv("bench_repeats", self.bench_repeats.to_string());
        kv("branch_rule", br.into());
        kv("cem_elite_frac", self.cem_elite_frac.to_string());
        kv("cem_iterations", self.cem_iterations.to_string());
        kv("cem_population", self.cem_population.to_string());
        kv("coeff_hi", self.coeff_hi.to_string());
        kv("coeff_lo", self.coeff_lo.to_string());
        kv("critic_hidden", widths(&self.critic_hidden));
        kv("integral_objective", self.integral_objective.to_string());
        kv("lp_iteration_cap", self.lp_iteration_cap.to_string());
        kv("n_items", self.n_items.to_string());
        kv("n_knapsacks", self.n_knapsacks.to_string());
        kv("node_selection", sel.into());
        kv("objective_rule", rule.into());
        kv("out_dir", self.out_dir.display().to_string());
        kv("seed", self.seed.to_string());
        kv("squeeze", sq.into());
        kv("sweep_step", self.sweep_step.to_string());
        kv("td3_actor_lr", self.td3_actor_lr.to_string());
        kv("td3_batch_size", self.td3_batch_size.to_string());
        kv("td3_buffer_capacity", self.td3_buffer_capacity.to_string());
        kv("td3_critic_lr", self.td3_critic_lr.to_string());
        kv("td3_episodes", self.td3_episodes.to_string());
        kv("td3_epoch_len", self.td3_epoch_len.to_string());
        kv("td3_noise_clip", self.td3_noise_clip.to_string());
        kv("td3_noise_sigma", self.td3_noise_sigma.to_string());
        kv("td3_policy_delay", self.td3_policy_delay.to_string());
        kv("td3_polyak", self.td3_polyak.to_string());
        kv("td3_target_noise_sigma", self.td3_target_noise_sigma.to_string());
        kv("td3_uniform_eps", self.td3_uniform_eps.to_string());
        kv("td3_updates_per_episode", self.td3_updates_per_episode.to_string());
        kv("td3_validation_size", self.td3_validation_size.to_string());
        kv("td3_warmup", self.td3_warmup.to_string());
        kv("test_count", self.test_count.to_string());
        kv("train_count", self.train_count.to_string());
        kv("tree_cap", self.tree_cap.to_string());
        s
    }

    pub fn config_hash(&self) -> String {
        format!("{:016x}", fnv1a64(self.canonical().as_bytes()))
    }

    pub fn train_path(&self) -> PathBuf {
        self.out_dir.join("train.txt")
    }

    pub fn test_path(&self) -> PathBuf {
        self.out_dir.join("test.txt")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.out_dir.join("actor.ckpt")
    }

    pub fn policy(&self) -> SolvePolicy {
        SolvePolicy {
            node_selection: self.node_selection,
            branch_rule: self.branch_rule,
            integral_objective: self.integral_objective,
            ..SolvePolicy::default()
        }
    }

    pub fn budget(&self) -> SolveBudget {
        SolveBudget {
            tree_cap: self.tree_cap,
            lp_iteration_cap: self.lp_iteration_cap,
        }
    }

    pub fn reward_spec(&self) -> RewardSpec {
        RewardSpec {
            budget: self.budget(),
            policy: self.policy(),
        }
    }

    fn generator(&self, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            n_items: self.n_items,
            n_knapsacks: self.n_knapsacks,
            coeff_lo: self.coeff_lo,
            coeff_hi: self.coeff_hi,
            seed,
            objective_rule: self.objective_rule,
        }
    }

    fn arch_with_hidden(&self, hidden: &[usize], input: usize, output: usize) -> Result<NetworkArch> {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(output);
        NetworkArch::new(widths)
    }

    pub fn actor_arch(&self, d: usize, m: usize) -> Result<NetworkArch> {
        self.arch_with_hidden(&self.actor_hidden, d, m)
    }

    pub fn td3_config(&self, d: usize, m: usize) -> Result<Td3Config> {
        Ok(Td3Config {
            actor_arch: self.actor_arch(d, m)?,
            critic_arch: self.arch_with_hidden(&self.critic_hidden, d + m, 1)?,
            actor_kind: self.actor_kind,
            squeeze: self.squeeze,
            actor_lr: self.td3_actor_lr,
            critic_lr: self.td3_critic_lr,
            buffer_capacity: self.td3_buffer_capacity,
            batch_size: self.td3_batch_size,
            exploration_noise_sigma: self.td3_noise_sigma,
            uniform_exploration_eps: self.td3_uniform_eps,
            target_smoothing_sigma: self.td3_target_noise_sigma,
            noise_clip: self.td3_noise_clip,
            policy_delay: self.td3_policy_delay,
            polyak: self.td3_polyak,
            updates_per_episode: self.td3_updates_per_episode,
            episodes: self.td3_episodes,
            warmup_episodes: self.td3_warmup,
            epoch_len: self.td3_epoch_len,
            validation_size: self.td3_validation_size,
            seed: self.seed,
        })
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn csv_header(cfg: &RunConfig, columns: &str) -> String {
    format!("# config {}\n{columns}\n", cfg.config_hash())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes the train and test datasets with disjoint generator seeds;
/// returns the instance counts.
pub fn cmd_generate(cfg: &RunConfig) -> Result<(usize, usize)> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let train: Vec<IlpInstance> = (0..cfg.train_count)
        .map(|i| gen_chvatal_multiknapsack(&cfg.generator(cfg.seed + i as u64)))
        .collect::<Result<_>>()?;
    let test: Vec<IlpInstance> = (0..cfg.test_count)
        .map(|i| {
            gen_chvatal_multiknapsack(&cfg.generator(cfg.seed + TEST_SEED_OFFSET + i as u64))
        })
        .collect::<Result<_>>()?;
    write_dataset(&cfg.train_path(), &train)?;
    write_dataset(&cfg.test_path(), &test)?;
    Ok((train.len(), test.len()))
}

/// Per-instance cache for the sweep: score ingredients and the exact tree
/// size of every pool cut, plus the no-cut fallback.
struct SweepEntry {
    cuts: Vec<(f64, f64, usize)>, // (efficacy, parallelism, tree size)
    no_cut: usize,
}

fn sweep_entry(inst: &IlpInstance, cfg: &RunConfig) -> Result<SweepEntry> {
    let policy = cfg.policy();
    let budget = cfg.budget();
    let no_cut = branch_and_bound(inst, &[], &policy, &budget)?.tree_size;
    let pool = candidate_pool(inst, cfg.lp_iteration_cap)?;
    let p = LpProblem::new(inst);
    let r = solve_lp(&p, cfg.lp_iteration_cap)?;
    let mut cuts = Vec::with_capacity(pool.len());
    for cut in &pool {
        let eff = efficacy(cut, &r.x_star)?;
        let par = parallelism(cut, &inst.c)?;
        let tree = branch_and_bound(inst, std::slice::from_ref(cut), &policy, &budget)?.tree_size;
        cuts.push((eff, par, tree));
    }
    Ok(SweepEntry { cuts, no_cut })
}

fn sweep_mu_values(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument("sweep_step must be in (0,1]".into()));
    }
    let n = (1.0 / step).round() as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// (mu, mean tree size over the test set).
    pub rows: Vec<(f64, f64)>,
    pub path: PathBuf,
}

impl SweepReport {
    /// Best row: lowest mean tree size, ties toward the smaller mu.
    pub fn best(&self) -> (f64, f64) {
        *self
            .rows
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
            .unwrap()
    }
}

/// For every mu on the grid, selects each instance's pool cut by the
/// mu-weighted efficacy/parallelism score and reports the mean resulting
/// tree size; the per-cut tree sizes are computed once and shared across
/// all mu values.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepReport> {
    let instances = read_dataset(&cfg.test_path())?;
    if instances.is_empty() {
        return Err(Error::InvalidArgument("test dataset is empty".into()));
    }
    let entries: Vec<SweepEntry> = instances
        .par_iter()
        .map(|inst| sweep_entry(inst, cfg))
        .collect::<Result<_>>()?;
    let mus = sweep_mu_values(cfg.sweep_step)?;
    let mut rows = Vec::with_capacity(mus.len());
    for &mu in &mus {
        let total: usize = entries
            .iter()
            .map(|e| {
                e.cuts
                    .iter()
                    .enumerate()
                    .max_by(|(ia, a), (ib, b)| {
                        let sa = mu * a.0 + (1.0 - mu) * a.1;
                        let sb = mu * b.0 + (1.0 - mu) * b.1;
                        sa.total_cmp(&sb).then(ib.cmp(ia))
                    })
                    .map(|(_, &(_, _, tree))| tree)
                    .unwrap_or(e.no_cut)
            })
            .sum();
        rows.push((mu, total as f64 / entries.len() as f64));
    }
    let mut out = csv_header(cfg, "mu,mean_tree_size");
    for (mu, mean) in &rows {
        writeln!(out, "{mu},{mean}").unwrap();
    }
    let path = cfg.out_dir.join("sweep.csv");
    write_text(&path, &out)?;
    Ok(SweepReport { rows, path })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Td3,
    Cem,
    SteLt,
}

impl FromStr for TrainMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "td3" => Ok(TrainMode::Td3),
            "cem" => Ok(TrainMode::Cem),
            "ste_lt" => Ok(TrainMode::SteLt),
            other => Err(Error::InvalidArgument(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug)]
pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    pub run: TrainRun,
}

/// Trains on the train dataset with the selected trainer and writes the
/// actor checkpoint plus `history.csv`.
pub fn cmd_train(cfg: &RunConfig, mode: TrainMode) -> Result<TrainArtifacts> {
    let instances = read_dataset(&cfg.train_path())?;
    let rewarder = Rewarder::new(&instances, cfg.reward_spec())?;
    let d = rewarder.encoding(0).len();
    let m = rewarder.num_rows();
    let run = match mode {
        TrainMode::Td3 | TrainMode::SteLt => {
            let mut td3 = cfg.td3_config(d, m)?;
            if mode == TrainMode::SteLt {
                td3.actor_kind = ActorKind::Lt;
            }
            td3_train(&rewarder, &td3)?
        }
        TrainMode::Cem => derivative_free_train(
            &rewarder,
            &cfg.actor_arch(d, m)?,
            cfg.cem_iterations,
            cfg.cem_population,
            cfg.cem_elite_frac,
            cfg.seed,
        )?,
    };
    let checkpoint = cfg.checkpoint_path();
    std::fs::create_dir_all(&cfg.out_dir)?;
    write_checkpoint(&checkpoint, &run.actor.arch, &run.actor.params)?;
    let mut out = csv_header(cfg, "epoch,mean_reward,mean_tree_size");
    for h in &run.history {
        writeln!(out, "{},{},{}", h.epoch, h.mean_reward, h.mean_tree_size).unwrap();
    }
    let history = cfg.out_dir.join("history.csv");
    write_text(&history, &out)?;
    Ok(TrainArtifacts {
        checkpoint,
        history,
        run,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub stats: EvalStats,
    pub best_mu: f64,
    pub best_mu_mean: f64,
    pub per_instance_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Evaluates a checkpoint on the test set and emits a per-instance CSV plus
/// a summary comparing the no-cut baseline, the learned policy, and the
/// best fixed-mu sweep value (reusing `sweep.csv` when present).
pub fn cmd_evaluate(cfg: &RunConfig, checkpoint: &Path) -> Result<EvalReport> {
    let instances = read_dataset(&cfg.test_path())?;
    let rewarder = Rewarder::new(&instances, cfg.reward_spec())?;
    let (arch, params) = read_checkpoint(checkpoint)?;
    let actor = Actor {
        arch,
        params,
        kind: cfg.actor_kind,
        squeeze: cfg.squeeze,
    };
    let stats = evaluate_policy(&actor, &rewarder)?;

    let sweep_path = cfg.out_dir.join("sweep.csv");
    let sweep = if sweep_path.exists() {
        read_sweep_csv(&sweep_path)?
    } else {
        cmd_sweep(cfg)?
    };
    let (best_mu, best_mu_mean) = sweep.best();

    let mut per = csv_header(cfg, "index,baseline,tree_size,reward");
    for r in &stats.rows {
        writeln!(per, "{},{},{},{}", r.index, r.baseline, r.tree_size, r.reward).unwrap();
    }
    let per_instance_path = cfg.out_dir.join("evaluate.csv");
    write_text(&per_instance_path, &per)?;

    let mut summary = csv_header(cfg, "metric,value");
    writeln!(summary, "baseline_mean_tree_size,{}", stats.mean_baseline).unwrap();
    writeln!(summary, "learned_mean_tree_size,{}", stats.mean_tree_size).unwrap();
    writeln!(summary, "learned_median_tree_size,{}", stats.median_tree_size).unwrap();
    writeln!(summary, "learned_mean_reward,{}", stats.mean_reward).unwrap();
    writeln!(summary, "best_mu,{best_mu}").unwrap();
    writeln!(summary, "best_mu_mean_tree_size,{best_mu_mean}").unwrap();
    let summary_path = cfg.out_dir.join("summary.csv");
    write_text(&summary_path, &summary)?;

    Ok(EvalReport {
        stats,
        best_mu,
        best_mu_mean,
        per_instance_path,
        summary_path,
    })
}

fn read_sweep_csv(path: &Path) -> Result<SweepReport> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.starts_with("mu,") || line.trim().is_empty() {
            continue;
        }
        let (mu, mean) = line.split_once(',').ok_or(Error::Parse {
            line: i + 1,
            msg: "expected mu,mean_tree_size".into(),
        })?;
        let parse = |t: &str| -> Result<f64> {
            t.parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("bad number '{t}'"),
            })
        };
        rows.push((parse(mu)?, parse(mean)?));
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("sweep.csv has no data rows".into()));
    }
    Ok(SweepReport {
        rows,
        path: path.to_path_buf(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub nn_total_secs: f64,
    pub lp_total_secs: f64,
    /// LP time over NN time; `None` when repeats = 0.
    pub ratio: Option<f64>,
    pub path: PathBuf,
}

/// Measures total actor-forward time versus total root-LP-solve time over
/// the test set, repeated `repeats` times.
pub fn cmd_bench_timing(cfg: &RunConfig, checkpoint: &Path, repeats: usize) -> Result<TimingReport> {
    let instances = read_dataset(&cfg.test_path())?;
    let (arch, params) = read_checkpoint(checkpoint)?;
    let actor = Actor {
        arch,
        params,
        kind: cfg.actor_kind,
        squeeze: cfg.squeeze,
    };
    let encodings: Vec<Vec<f64>> = instances
        .iter()
        .map(crate::train::normalized_encoding)
        .collect::<Result<_>>()?;

    let started = Instant::now();
    let mut sink = 0.0;
    for _ in 0..repeats {
        for enc in &encodings {
            sink += actor.act(enc)?.as_slice().iter().sum::<f64>();
        }
    }
    let nn_total_secs = started.elapsed().as_secs_f64();

    // the cut pipeline consumes the relaxation's solution together with its
    // exact tableau rows, so both are part of the LP stage being replaced
    let started = Instant::now();
    for _ in 0..repeats {
        for inst in &instances {
            let p = LpProblem::new(inst);
            let r = solve_lp(&p, cfg.lp_iteration_cap)?;
            sink += r.value;
            sink += fractional_tableau_rows(&r, &p)?.len() as f64;
        }
    }
    let lp_total_secs = started.elapsed().as_secs_f64();
    std::hint::black_box(sink);

    let ratio = if repeats == 0 || nn_total_secs == 0.0 {
        None
    } else {
        Some(lp_total_secs / nn_total_secs)
    };
    let mut out = csv_header(cfg, "metric,value");
    writeln!(out, "nn_total_secs,{nn_total_secs}").unwrap();
    writeln!(out, "lp_total_secs,{lp_total_secs}").unwrap();
    match ratio {
        Some(r) => writeln!(out, "lp_over_nn_ratio,{r}").unwrap(),
        None => writeln!(out, "lp_over_nn_ratio,undefined").unwrap(),
    }
    let path = cfg.out_dir.join("timing.csv");
    write_text(&path, &out)?;
    Ok(TimingReport {
        nn_total_secs,
        lp_total_secs,
        ratio,
        path,
    })
}

/// CSV table of the closed-form bounds at the configured sizes.
pub fn cmd_bounds(cfg: &RunConfig) -> Result<String> {
    let inst = gen_chvatal_multiknapsack(&cfg.generator(cfg.seed))?;
    let d = inst.num_rows * inst.num_cols + inst.num_rows + inst.num_cols;
    let m = inst.num_rows;
    let arch = cfg.actor_arch(d, m)?;
    let norms = norm_bounds(&inst);
    let m_count = m_hyperplanes(&norms, inst.num_cols);
    let pw = PiecewiseSpec {
        gamma_count: m_count,
        gamma_deg: 1,
        lambda: 0,
    };
    let sample = sample_size(&SampleSpec {
        b: cfg.tree_cap as f64,
        eps: 0.1 * cfg.tree_cap as f64,
        delta: 0.01,
        pdim: pdim_bound_lt(&arch, &pw, 1.0)?,
        c: 1.0,
    })?;
    let mut out = csv_header(cfg, "bound,inputs,value");
    writeln!(
        out,
        "m_hyperplanes,a={} b={} n={},{}",
        norms.a_norm, norms.b_norm, inst.num_cols, m_count
    )
    .unwrap();
    writeln!(out, "cg_param_dim,m={m} k=4,{}", cg_param_dim(m, 4)).unwrap();
    writeln!(
        out,
        "pdim_lt_order,W={} U={} Gamma={m_count} c0=1,{}",
        arch.param_count(),
        arch.size_u(),
        pdim_bound_lt(&arch, &pw, 1.0)?
    )
    .unwrap();
    writeln!(
        out,
        "pdim_relu_order,W={} U={} l={} Gamma={m_count} c0=1,{}",
        arch.param_count(),
        arch.size_u(),
        arch.output_dim(),
        pdim_bound_relu(&arch, &pw, 1.0)?
    )
    .unwrap();
    writeln!(
        out,
        "pdim_finite_lt_order,W={} U={} r=16 c0=1,{}",
        arch.param_count(),
        arch.size_u(),
        pdim_bound_finite(&arch, 16, 1.0, BoundKind::Lt)?
    )
    .unwrap();
    writeln!(
        out,
        "sample_size,B={} eps=0.1B delta=0.01 C=1,{}",
        cfg.tree_cap, sample.t
    )
    .unwrap();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub rows: Vec<(String, bool)>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|(_, ok)| *ok)
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("check,status\n");
        for (name, ok) in &self.rows {
            writeln!(out, "{name},{}", if *ok { "pass" } else { "fail" }).unwrap();
        }
        out
    }
}

fn small_instance(seed: u64) -> Result<IlpInstance> {
    gen_chvatal_multiknapsack(&GeneratorConfig {
        n_items: 4,
        n_knapsacks: 2,
        coeff_lo: 1,
        coeff_hi: 10,
        seed,
        objective_rule: ObjectiveRule::SumOfColumns,
    })
}

/// The floating-point aggregation that needs the snap guard: exact
/// u^T b = 15, while f64 evaluates just below it.
fn snap_guard_fixture() -> (IlpInstance, Multiplier) {
    let r = crate::ilp::rat;
    let inst = IlpInstance::new(
        vec![vec![r(0, 1), r(3, 1)], vec![r(10, 1), r(9, 1)]],
        vec![r(6, 1), r(48, 1)],
        vec![1.0, 1.0],
    );
    (inst, Multiplier::new(vec![0.1, 0.3]).unwrap())
}

/// Runs the bundled oracle and lemma checks and reports pass/fail per check.
pub fn cmd_verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let policy = cfg.policy();
    let budget = cfg.budget();
    let mut rows: Vec<(String, bool)> = Vec::new();
    let mut check = |name: &str, ok: bool| rows.push((name.to_string(), ok));

    // branch-and-bound against brute-force enumeration
    let mut ok = true;
    for seed in 0..20u64 {
        let inst = small_instance(seed)?;
        let bound = natural_box_bound(&inst).unwrap_or(0);
        let brute = brute_force_optimum(&inst, bound)?;
        let bnb = branch_and_bound(&inst, &[], &policy, &budget)?;
        ok &= match brute {
            Some((_, v)) => bnb.status == BncStatus::Optimal && (bnb.value - v).abs() < 1e-6,
            None => bnb.status == BncStatus::Infeasible,
        };
    }
    check("bnc_vs_brute_force", ok);

    // CG validity on random (instance, multiplier) pairs
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut ok = true;
    for seed in 0..25u64 {
        let inst = small_instance(seed)?;
        let bound = natural_box_bound(&inst).unwrap_or(0);
        for _ in 0..4 {
            let u = Multiplier::new((0..2).map(|_| rng.gen_range(0.0..=1.0)).collect())?;
            ok &= cut_is_valid(&inst, &cg_cut(&inst, &u)?, bound)?;
        }
    }
    check("cg_validity", ok);

    // GMI validity and separation of the LP optimum
    let mut ok = true;
    for seed in 0..20u64 {
        let inst = small_instance(seed)?;
        let bound = natural_box_bound(&inst).unwrap_or(0);
        let p = LpProblem::new(&inst);
        let r = solve_lp(&p, cfg.lp_iteration_cap)?;
        if r.status != LpStatus::Optimal {
            continue;
        }
        for cut in candidate_pool(&inst, cfg.lp_iteration_cap)? {
            if matches!(cut.provenance, Provenance::Gmi(_)) {
                ok &= cut_is_valid(&inst, &cut, bound)?;
                ok &= efficacy(&cut, &r.x_star)? > 0.0;
            }
        }
    }
    check("gmi_validity_and_separation", ok);

    // the snap guard catches the floating-point floor fault
    let (inst, u) = snap_guard_fixture();
    let bound = natural_box_bound(&inst).unwrap_or(0);
    let snapped = cut_is_valid(&inst, &cg_cut(&inst, &u)?, bound)?;
    let unsnapped = cut_is_valid(&inst, &cg_cut_with_snap(&inst, &u, 0.0)?, bound)?;
    check("cg_snap_guard_fault_injection", snapped && !unsnapped);

    // line-scan piece counts stay within the hyperplane bound
    let mut ok = true;
    for seed in 0..3u64 {
        let inst = small_instance(seed)?;
        let m_count = m_hyperplanes(&norm_bounds(&inst), inst.num_cols);
        for _ in 0..5 {
            let a: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let b: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let pieces = line_scan_pieces(&inst, &a, &b, 200, &policy, &budget)?;
            ok &= pieces as u64 <= m_count;
        }
    }
    check("line_scan_piece_bound", ok);

    // empirical sign-pattern counts stay within the region bound
    let mut ok = true;
    for widths in [vec![1usize, 1, 1], vec![2, 2, 1]] {
        let arch = NetworkArch::new(widths)?;
        let inputs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..arch.input_dim()).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let report = count_sign_patterns(&arch, &inputs, 3000, cfg.seed)?;
        ok &= report.distinct as f64 <= report.bound;
    }
    check("sign_pattern_region_bound", ok);

    // ReLU backprop against central finite differences
    let mut ok = true;
    let arch = NetworkArch::new(vec![3, 4, 2])?;
    for trial in 0..10u64 {
        let params = init_params(&arch, cfg.seed.wrapping_add(trial));
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let upstream: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (grad, _) = backprop_relu(&arch, &params, &x, &upstream)?;
        let h = 1e-5;
        for j in 0..arch.param_count() {
            let mut lo = params.clone();
            let mut hi = params.clone();
            lo.flat[j] -= h;
            hi.flat[j] += h;
            let f = |q: &NetworkParams| -> Result<f64> {
                Ok(forward_relu(&arch, q, &x)?
                    .iter()
                    .zip(&upstream)
                    .map(|(y, u)| y * u)
                    .sum())
            };
            let fd = (f(&hi)? - f(&lo)?) / (2.0 * h);
            ok &= (grad[j] - fd).abs() / fd.abs().max(1.0) < 1e-4;
        }
    }
    check("relu_gradient_finite_difference", ok);

    // CReLU equals the two-ReLU composition exactly
    let relu = |t: f64| t.max(0.0);
    let ok = (0..1000).all(|i| {
        let t = -3.0 + 6.0 * i as f64 / 999.0;
        crelu(t) == relu(t) - relu(t - 1.0)
    });
    check("crelu_two_relu_identity", ok);

    Ok(VerifyReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn tiny_cfg(dir: &Path) -> RunConfig {
        RunConfig {
            out_dir: dir.to_path_buf(),
            n_items: 5,
            n_knapsacks: 2,
            coeff_lo: 1,
            coeff_hi: 20,
            train_count: 6,
            test_count: 4,
            sweep_step: 0.5,
            td3_episodes: 40,
            td3_warmup: 10,
            td3_batch_size: 8,
            td3_epoch_len: 20,
            actor_hidden: vec![8],
            critic_hidden: vec![8],
            cem_iterations: 1,
            cem_population: 2,
            cem_elite_frac: 1.0,
            bench_repeats: 1,
            ..RunConfig::default()
        }
    }

    #[test]
    fn config_parse_roundtrip_and_hash() {
        let cfg = RunConfig::from_str("n_items = 12\nseed=7\nsqueeze = sigmoid\n# comment\n").unwrap();
        assert_eq!(cfg.n_items, 12);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.squeeze, SqueezeKind::Sigmoid);
        let reparsed = RunConfig::from_str(&cfg.canonical()).unwrap();
        assert_eq!(cfg, reparsed);
        assert_eq!(cfg.config_hash(), reparsed.config_hash());
        assert_ne!(cfg.config_hash(), RunConfig::default().config_hash());
    }

    #[test]
    fn config_rejects_unknown_key() {
        assert!(matches!(
            RunConfig::from_str("frobnicate=1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn fnv_reference_vectors() {
        // published FNV-1a 64-bit test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn generate_is_deterministic_and_sized() {
        let dir = tempdir().unwrap();
        let cfg = tiny_cfg(dir.path());
        let (tr, te) = cmd_generate(&cfg).unwrap();
        assert_eq!((tr, te), (6, 4));
        let a = std::fs::read(cfg.train_path()).unwrap();
        cmd_generate(&cfg).unwrap();
        let b = std::fs::read(cfg.train_path()).unwrap();
        assert_eq!(a, b);
        let train = read_dataset(&cfg.train_path()).unwrap();
        let test = read_dataset(&cfg.test_path()).unwrap();
        assert_eq!(train.len(), 6);
        assert_eq!(test.len(), 4);
        // disjoint seeds: no shared instances
        assert!(train.iter().all(|t| !test.contains(t)));
    }

    #[test]
    fn sweep_rows_and_determinism() {
        let dir = tempdir().unwrap();
        let cfg = tiny_cfg(dir.path());
        cmd_generate(&cfg).unwrap();
        let report = cmd_sweep(&cfg).unwrap();
        assert_eq!(report.rows.len(), 3); // step 0.5 -> 0, 0.5, 1
        assert_eq!(report.rows[0].0, 0.0);
        assert_eq!(report.rows[2].0, 1.0);
        let a = std::fs::read(&report.path).unwrap();
        cmd_sweep(&cfg).unwrap();
        let b = std::fs::read(&report.path).unwrap();
        assert_eq!(a, b);
        assert!(String::from_utf8(a).unwrap().starts_with(&format!(
            "# config {}",
            cfg.config_hash()
        )));
    }

    #[test]
    fn sweep_101_rows_at_default_step() {
        assert_eq!(sweep_mu_values(0.01).unwrap().len(), 101);
        assert!(sweep_mu_values(0.0).is_err());
    }

    #[test]
    fn train_cem_writes_artifacts() {
        let dir = tempdir().unwrap();
        let cfg = tiny_cfg(dir.path());
        cmd_generate(&cfg).unwrap();
        let artifacts = cmd_train(&cfg, TrainMode::Cem).unwrap();
        assert!(artifacts.checkpoint.exists());
        assert!(artifacts.history.exists());
        let history = std::fs::read_to_string(&artifacts.history).unwrap();
        assert_eq!(history.lines().count(), 3); // comment + header + 1 row
    }

    #[test]
    fn train_modes_parse() {
        assert_eq!("td3".parse::<TrainMode>().unwrap(), TrainMode::Td3);
        assert_eq!("cem".parse::<TrainMode>().unwrap(), TrainMode::Cem);
        assert_eq!("ste_lt".parse::<TrainMode>().unwrap(), TrainMode::SteLt);
        assert!("sgd".parse::<TrainMode>().is_err());
    }

    #[test]
    fn evaluate_zero_checkpoint_matches_baseline() {
        let dir = tempdir().unwrap();
        let cfg = tiny_cfg(dir.path());
        cmd_generate(&cfg).unwrap();
        let test = read_dataset(&cfg.test_path()).unwrap();
        let d = crate::ilp::encode(&test[0]).unwrap().vec.len();
        let arch = cfg.actor_arch(d, test[0].num_rows).unwrap();
        let ckpt = dir.path().join("zero.ckpt");
        write_checkpoint(&ckpt, &arch, &NetworkParams::zeros(&arch)).unwrap();
        let report = cmd_evaluate(&cfg, &ckpt).unwrap();
        assert_eq!(report.stats.mean_tree_size, report.stats.mean_baseline);
        assert_eq!(report.stats.mean_reward, 0.0);
        assert!(report.per_instance_path.exists());
        let summary = std::fs::read_to_string(&report.summary_path).unwrap();
        assert!(summary.contains("best_mu,"));
        // rerun is byte-identical
        let a = std::fs::read(&report.per_instance_path).unwrap();
        let s1 = std::fs::read(&report.summary_path).unwrap();
        cmd_evaluate(&cfg, &ckpt).unwrap();
        assert_eq!(a, std::fs::read(&report.per_instance_path).unwrap());
        assert_eq!(s1, std::fs::read(&report.summary_path).unwrap());
    }

    #[test]
    fn bench_zero_repeats_flagged() {
        let dir = tempdir().unwrap();
        let cfg = tiny_cfg(dir.path());
        cmd_generate(&cfg).unwrap();
        let test = read_dataset(&cfg.test_path()).unwrap();
        let d = crate::ilp::encode(&test[0]).unwrap().vec.len();
        let arch = cfg.actor_arch(d, test[0].num_rows).unwrap();
        let ckpt = dir.path().join("zero.ckpt");
        write_checkpoint(&ckpt, &arch, &NetworkParams::zeros(&arch)).unwrap();
        let report = cmd_bench_timing(&cfg, &ckpt, 0).unwrap();
        assert_eq!(report.ratio, None);
        let text = std::fs::read_to_string(&report.path).unwrap();
        assert!(text.contains("lp_over_nn_ratio,undefined"));
        let timed = cmd_bench_timing(&cfg, &ckpt, 2).unwrap();
        assert!(timed.ratio.is_some());
    }

    #[test]
    fn bounds_table_rows() {
        let dir = tempdir().unwrap();
        let cfg = tiny_cfg(dir.path());
        let table = cmd_bounds(&cfg).unwrap();
        assert!(table.starts_with("# config "));
        for name in [
            "m_hyperplanes",
            "cg_param_dim",
            "pdim_lt_order",
            "pdim_relu_order",
            "pdim_finite_lt_order",
            "sample_size",
        ] {
            assert!(table.contains(name), "missing row {name}");
        }
    }

    #[test]
    fn verify_suite_passes() {
        let dir = tempdir().unwrap();
        let cfg = tiny_cfg(dir.path());
        let report = cmd_verify(&cfg).unwrap();
        assert_eq!(report.rows.len(), 8);
        assert!(report.all_passed(), "{}", report.render_csv());
        assert_eq!(report.render_csv().lines().count(), 9);
    }
}
