//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit status.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dyncontract_core::mdp::ActionMode;
use dyncontract_core::oracle::static_scheme;
use dyncontract_core::verify_all_constraints;
use dyncontract_learn::pruning::compact_export;
use dyncontract_learn::sac::{evaluate, Checkpoint, TrainOutcome, TrainerConfig, Variant};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::experiments::{self, SweepAxis};
use crate::states;
use crate::table::{num, Table};

#[derive(Debug, Parser)]
#[command(name = "dyncontract", version, about = "Dynamic contract design workbench")]
pub struct Cli {
    /// Directory for every file a command writes.
    #[arg(long, global = true, env = "DYNCONTRACT_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the default configuration as TOML.
    Config,
    /// Optimal contract for the configured market with a constraint report.
    Solve {
        #[command(flatten)]
        config: ConfigArg,
        /// Grid points per round axis; overrides the config.
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Train one policy; writes the log, mask statistics and checkpoints.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        /// edmsac, dmsac or gsac; overrides the config.
        #[arg(long)]
        variant: Option<Variant>,
        /// Trainer seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// full or shared; overrides the config.
        #[arg(long)]
        action_mode: Option<ActionMode>,
    },
    /// Score a checkpoint on a states file, or on its own evaluation states.
    Eval {
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// States CSV written by `states`.
        #[arg(long)]
        states: Option<PathBuf>,
        /// Grid points for the oracle reference.
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Write seeded sample states to a states file.
    States {
        #[command(flatten)]
        config: ConfigArg,
        /// Sampling seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of states.
        #[arg(long, default_value_t = 32)]
        count: usize,
    },
    /// Mean profit of each scheme on shared seeded states.
    Compare {
        #[command(flatten)]
        config: ConfigArg,
        /// Overrides the configured seeds; repeat for several.
        #[arg(long)]
        seed: Vec<u64>,
        /// Comma-separated subset of the configured schemes.
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<String>,
        /// Grid points per round axis; overrides the config.
        #[arg(long)]
        grid_points: Option<usize>,
        /// full or shared; applies to learned schemes.
        #[arg(long)]
        action_mode: Option<ActionMode>,
    },
    /// Oracle profit against N, alpha or beta.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// n, alpha or beta.
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values; defaults to the configured sweep.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Overrides the configured seeds; repeat for several.
        #[arg(long)]
        seed: Vec<u64>,
        /// Grid points per round axis; overrides the config.
        #[arg(long)]
        grid_points: Option<usize>,
    },
}

/// Parses `args` (program name first), runs the command and reports errors
/// on stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(arg: &ConfigArg, grid_points: Option<usize>) -> Result<Config> {
    let mut cfg = Config::load(&arg.config)?;
    if let Some(g) = grid_points {
        cfg.oracle.grid_points = g;
        cfg.validate()?;
    }
    Ok(cfg)
}

/// Runs a parsed command, writing human-readable output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let dir = &cli.out_dir;
    match &cli.command {
        Command::Config => {
            write!(out, "{}", Config::default().to_toml())?;
            Ok(())
        }
        Command::Solve { config, grid_points } => solve(&load(config, *grid_points)?, dir, out),
        Command::Train { config, variant, seed, action_mode } => {
            let mut cfg = load(config, None)?;
            if let Some(v) = variant {
                cfg.trainer.variant = *v;
            }
            if let Some(s) = seed {
                cfg.trainer.seed = *s;
            }
            if let Some(m) = action_mode {
                cfg.env.action_mode = *m;
            }
            train(&cfg, dir, out)
        }
        Command::Eval { checkpoint, states, grid_points } => eval(checkpoint, states.as_deref(), *grid_points, dir, out),
        Command::States { config, seed, count } => {
            let cfg = load(config, None)?;
            let seed = seed.unwrap_or(cfg.experiment.seeds[0]);
            if *count == 0 {
                return Err(Error::Input("count must be positive".into()));
            }
            let st = experiments::seeded_states(&cfg.env_config(), seed, *count)?;
            let path = dir.join(format!("states_seed{seed}.csv"));
            states::to_table(&st)?.write(&path)?;
            writeln!(out, "wrote {} states to {}", st.len(), path.display())?;
            Ok(())
        }
        Command::Compare { config, seed, schemes, grid_points, action_mode } => {
            let mut cfg = load(config, *grid_points)?;
            if let Some(m) = action_mode {
                cfg.env.action_mode = *m;
            }
            let seeds = if seed.is_empty() { cfg.experiment.seeds.clone() } else { seed.clone() };
            let schemes = if schemes.is_empty() { cfg.experiment.schemes.clone() } else { schemes.clone() };
            if let Some(bad) = schemes.iter().find(|s| !crate::config::SCHEMES.contains(&s.as_str())) {
                return Err(Error::Input(format!("unknown scheme {bad:?}")));
            }
            compare(&cfg, &seeds, &schemes, dir, out)
        }
        Command::Sweep { config, axis, values, seed, grid_points } => {
            let cfg = load(config, *grid_points)?;
            let seeds = if seed.is_empty() { cfg.experiment.seeds.clone() } else { seed.clone() };
            let values = if values.is_empty() { axis.default_values(&cfg) } else { values.clone() };
            sweep(&cfg, *axis, &values, &seeds, dir, out)
        }
    }
}

fn solve(cfg: &Config, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let state = cfg.market_state()?;
    let sol = experiments::oracle(cfg, &cfg.market_env_state()?)?;
    let stat = static_scheme(&state, &cfg.grid())?;
    let report = verify_all_constraints(&sol.contract, &state.ladder, &state.costs, state.beta)?;
    let c = &sol.contract;
    let k = state.k();

    let mut menu = Table::new(&["period", "first_type", "type", "theta", "rounds", "reward"]);
    for i in 0..k {
        menu.push(vec!["1".into(), i.to_string(), i.to_string(), num(state.ladder.theta1[i]), num(c.t1[i]), num(c.r1[i])]);
    }
    for r in 0..k {
        for j in 0..k {
            menu.push(vec![
                "2".into(),
                r.to_string(),
                j.to_string(),
                num(state.ladder.theta2[j]),
                num(c.t2[r][j]),
                num(c.r2[r][j]),
            ]);
        }
    }
    let mut summary = Table::new(&["quantity", "value"]);
    let p = sol.profit;
    let fams = [("ir2", report.ir2), ("ic2", report.ic2), ("ir1", report.ir1), ("iic", report.iic)];
    let mut kv: Vec<(String, f64)> = vec![
        ("profit_period1".into(), p.period1),
        ("profit_period2".into(), p.period2),
        ("beta".into(), state.beta),
        ("profit_total".into(), p.total),
        ("static_profit_total".into(), stat.profit.total),
    ];
    for (name, f) in fams {
        kv.push((format!("{name}_count"), f.count as f64));
        kv.push((format!("{name}_min_slack"), if f.count == 0 { 0.0 } else { f.min_slack }));
    }
    kv.push(("ir_binding_residual".into(), report.ir_binding_residual));
    kv.push(("adjacent_binding_residual".into(), report.adjacent_binding_residual));
    kv.push(("tolerance".into(), report.tolerance()));
    kv.push(("feasible".into(), if report.passed() { 1.0 } else { 0.0 }));
    for (key, v) in &kv {
        summary.push(vec![key.clone(), num(*v)]);
    }
    menu.write(&dir.join("solve_contract.csv"))?;
    summary.write(&dir.join("solve_summary.csv"))?;

    writeln!(out, "contract for K = {k}, N = {}, alpha = {}, beta = {}", state.n_servers, state.alpha, state.beta)?;
    writeln!(out, "  period 1 rounds  {:?}", c.t1.iter().map(|v| num(*v)).collect::<Vec<_>>())?;
    writeln!(out, "  period 1 rewards {:?}", c.r1.iter().map(|v| num(*v)).collect::<Vec<_>>())?;
    for r in 0..k {
        writeln!(out, "  period 2 | type {r}: rounds {:?} rewards {:?}",
            c.t2[r].iter().map(|v| num(*v)).collect::<Vec<_>>(),
            c.r2[r].iter().map(|v| num(*v)).collect::<Vec<_>>())?;
    }
    writeln!(out, "profit: U1 = {}, U2 = {} (weight {}), total = {}", num(p.period1), num(p.period2), num(state.beta), num(p.total))?;
    writeln!(out, "static scheme total = {}", num(stat.profit.total))?;
    for (name, f) in fams {
        writeln!(out, "  {name}: {} constraints, min slack {}", f.count, num(if f.count == 0 { 0.0 } else { f.min_slack }))?;
    }
    writeln!(out, "feasible within {}: {}", num(report.tolerance()), report.passed())?;
    Ok(())
}

fn log_table(o: &TrainOutcome) -> Table {
    let mut t = Table::new(&[
        "step",
        "variant",
        "seed",
        "eval_reward_mean",
        "eval_reward_std",
        "actor_loss",
        "critic_loss",
        "masked_fraction",
    ]);
    for r in &o.log {
        t.push(vec![
            r.step.to_string(),
            r.variant.to_string(),
            r.seed.to_string(),
            num(r.eval_reward_mean),
            num(r.eval_reward_std),
            num(r.actor_loss),
            num(r.critic_loss),
            num(r.masked_fraction),
        ]);
    }
    t
}

fn train(cfg: &Config, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let tc: &TrainerConfig = &cfg.trainer;
    let result = dyncontract_learn::sac::train(tc, &cfg.env_config())?;
    let stem = format!("{}_seed{}", tc.variant, tc.seed);
    log_table(&result).write(&dir.join(format!("{stem}_log.csv")))?;

    let mut masks = Table::new(&["step", "layer", "rows", "survivors", "importance_min", "importance_mean", "importance_max"]);
    for row in &result.mask_log {
        for l in &row.layers {
            masks.push(vec![
                row.step.to_string(),
                l.layer.to_string(),
                l.rows.to_string(),
                l.survivors.to_string(),
                num(l.importance_min),
                num(l.importance_mean),
                num(l.importance_max),
            ]);
        }
    }
    masks.write(&dir.join(format!("{stem}_masks.csv")))?;

    let mut diag = Table::new(&["step", "state_hash", "profit", "penalty", "clamped"]);
    for (i, d) in result.diagnostics.iter().enumerate() {
        diag.push(vec![(i + 1).to_string(), format!("{:016x}", d.state_hash), num(d.profit), num(d.penalty), d.clamped.to_string()]);
    }
    diag.write(&dir.join(format!("{stem}_steps.csv")))?;
    result.checkpoint.save(&dir.join(format!("{stem}_checkpoint.json")))?;
    dyncontract_learn::nn::save_json(&dir.join(format!("{stem}_compact.json")), "mlp", &result.compact)?;

    if let Some((step, reason)) = &result.diverged {
        writeln!(out, "partial log written to {}", dir.display())?;
        return Err(Error::Diverged { step: *step, reason: reason.clone() });
    }
    match result.log.last() {
        Some(last) => writeln!(
            out,
            "{} seed {}: {} steps, eval reward {} +- {}, masked {}",
            tc.variant,
            tc.seed,
            last.step,
            num(last.eval_reward_mean),
            num(last.eval_reward_std),
            num(last.masked_fraction)
        )?,
        None => writeln!(out, "{} seed {}: no training steps", tc.variant, tc.seed)?,
    }
    writeln!(out, "outputs in {}", dir.display())?;
    Ok(())
}

fn eval(checkpoint: &Path, states_file: Option<&Path>, grid_points: Option<usize>, dir: &Path, out: &mut dyn Write) -> Result<()> {
    if !checkpoint.exists() {
        return Err(Error::Input(format!("checkpoint {} does not exist", checkpoint.display())));
    }
    let ck = Checkpoint::load(checkpoint).map_err(|e| Error::Input(format!("cannot load checkpoint {}: {e}", checkpoint.display())))?;
    let env = &ck.env;
    let st = match states_file {
        Some(p) => states::read(p, &env.ranges.profile, &env.ranges.hyper)?,
        None => dyncontract_learn::sac::eval_states(env, ck.trainer.eval_states, ck.trainer.eval_seed)?,
    };
    if let Some(bad) = st.iter().find(|s| s.market.k() != env.ranges.k) {
        return Err(Error::Input(format!("states have K = {} but the policy was trained for K = {}", bad.market.k(), env.ranges.k)));
    }
    let summary = evaluate(&ck.actor, ck.masks.as_ref(), &st, env, ck.trainer.eval_seed)?;
    let mut cfg = Config::default();
    cfg.env.t_min = env.t_min;
    cfg.env.t_max = env.t_max;
    if let Some(g) = grid_points {
        cfg.oracle.grid_points = g;
    }
    cfg.grid().validate().map_err(|e| Error::Input(e.to_string()))?;
    let mut t = Table::new(&["index", "state_hash", "reward", "profit", "oracle_profit", "profit_ratio"]);
    let mut oracle_sum = 0.0;
    for (i, s) in st.iter().enumerate() {
        let o = experiments::oracle(&cfg, s)?.profit.total;
        oracle_sum += o;
        t.push(vec![
            i.to_string(),
            format!("{:016x}", s.hash()),
            num(summary.rewards[i]),
            num(summary.profits[i]),
            num(o),
            num(summary.profits[i] / o),
        ]);
    }
    let path = dir.join("eval.csv");
    t.write(&path)?;
    let oracle_mean = oracle_sum / st.len() as f64;
    writeln!(
        out,
        "{} states: reward {} +- {}, oracle {}, ratio {}",
        st.len(),
        num(summary.mean),
        num(summary.std),
        num(oracle_mean),
        num(summary.mean / oracle_mean)
    )?;
    writeln!(out, "wrote {}", path.display())?;
    // Surface a compact view of the deployed network size.
    if let Some(m) = &ck.masks {
        let small = compact_export(ck.actor.net(), m)?;
        writeln!(out, "compact actor: {} parameters (dense {})", small.n_params(), ck.actor.net().n_params())?;
    }
    Ok(())
}

fn compare(cfg: &Config, seeds: &[u64], schemes: &[String], dir: &Path, out: &mut dyn Write) -> Result<()> {
    let rows = experiments::compare(cfg, seeds, schemes)?;
    let mut t = Table::new(&["scheme", "seed", "mean_profit", "std_profit", "states"]);
    for r in &rows {
        t.push(vec![r.scheme.clone(), r.seed.to_string(), num(r.mean_profit), num(r.std_profit), r.states.to_string()]);
    }
    let path = dir.join("compare.csv");
    t.write(&path)?;
    for (scheme, mean) in experiments::scheme_means(&rows) {
        writeln!(out, "{scheme:>8}  {}", num(mean))?;
    }
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn sweep(cfg: &Config, axis: SweepAxis, values: &[f64], seeds: &[u64], dir: &Path, out: &mut dyn Write) -> Result<()> {
    let rows = experiments::sweep(cfg, axis, values, seeds)?;
    let mut t = Table::new(&["axis", "value", "seed", "mean_profit"]);
    for r in &rows {
        t.push(vec![axis.name().into(), num(r.value), r.seed.to_string(), num(r.mean_profit)]);
    }
    let path = dir.join(format!("sweep_{}.csv", axis.name()));
    t.write(&path)?;
    for &v in values {
        let pts: Vec<f64> = rows.iter().filter(|r| r.value == v).map(|r| r.mean_profit).collect();
        writeln!(out, "{} = {:>8}  mean profit {}", axis.name(), num(v), num(experiments::mean_std(&pts).0))?;
    }
    writeln!(out, "non-decreasing for every seed: {}", experiments::non_decreasing_per_seed(&rows, 1e-9))?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}
