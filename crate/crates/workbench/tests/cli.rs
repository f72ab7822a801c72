use std::path::Path;
use std::process::{Command, Output};

use dyncontract::Config;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dyncontract"));
    c.env_remove("DYNCONTRACT_OUT_DIR");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().arg("--out-dir").arg(dir.join("out")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn small_config(dir: &Path, edit: impl FnOnce(&mut Config)) -> String {
    let mut cfg = Config::default();
    cfg.trainer.steps = 60;
    cfg.trainer.warmup_steps = 20;
    cfg.trainer.log_interval = 30;
    cfg.trainer.actor_hidden = vec![16, 16];
    cfg.trainer.critic_hidden = vec![16, 16];
    cfg.trainer.eval_states = 4;
    cfg.experiment.states_per_seed = 4;
    cfg.experiment.seeds = vec![0, 1];
    edit(&mut cfg);
    let path = dir.join("cfg.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn printed_default_config_parses_back() {
    let o = bin().arg("config").output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(Config::from_toml(&text).unwrap(), Config::default());
}

#[test]
fn solve_reports_a_feasible_contract() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |_| {});
    let o = run(dir.path(), &["solve", "--config", &cfg, "--grid-points", "41"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("out/solve_summary.csv")).unwrap();
    assert!(summary.starts_with("quantity,value\n"));
    assert!(summary.contains("\nfeasible,1\n"));
    let menu = std::fs::read_to_string(dir.path().join("out/solve_contract.csv")).unwrap();
    assert_eq!(menu.lines().count(), 1 + 2 + 4);
}

#[test]
fn zero_beta_keeps_second_period_out_of_the_total() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |c| c.market.beta = 0.0);
    let o = run(dir.path(), &["solve", "--config", &cfg]);
    assert_eq!(code(&o), 0);
    let summary = std::fs::read_to_string(dir.path().join("out/solve_summary.csv")).unwrap();
    let get = |k: &str| -> f64 {
        summary.lines().find_map(|l| l.strip_prefix(&format!("{k},"))).unwrap().parse().unwrap()
    };
    assert!(get("profit_period2") != 0.0);
    assert_eq!(get("profit_total"), get("profit_period1"));
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |c| c.market.p1 = vec![0.5, 0.6]);
    let o = run(dir.path(), &["solve", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("[market]") && err.contains("p1"), "{err}");

    let cfg = small_config(dir.path(), |c| c.market.theta1 = vec![25.0, 15.0]);
    assert_eq!(code(&run(dir.path(), &["solve", "--config", &cfg])), 2);

    let text = Config::default().to_toml().replace("lambda = 0.01\n", "");
    let path = dir.path().join("missing.toml");
    std::fs::write(&path, text).unwrap();
    let o = run(dir.path(), &["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8(o.stderr).unwrap().contains("lambda"));

    assert_eq!(code(&run(dir.path(), &["solve", "--config", "/no/such/file.toml"])), 2);
    assert_eq!(code(&run(dir.path(), &["train", "--config", &cfg, "--variant", "ppo"])), 2);
    assert_eq!(code(&run(dir.path(), &["eval", "--checkpoint", "/no/such/checkpoint.json"])), 2);
}

#[test]
fn train_then_eval_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |_| {});
    let o = run(dir.path(), &["train", "--config", &cfg, "--variant", "edmsac", "--seed", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let log = std::fs::read(out.join("edmsac_seed4_log.csv")).unwrap();
    let text = String::from_utf8(log.clone()).unwrap();
    assert!(text.starts_with("step,variant,seed,eval_reward_mean,eval_reward_std,actor_loss,critic_loss,masked_fraction\n"));
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().starts_with("30,edmsac,4,"));

    let o = run(dir.path(), &["train", "--config", &cfg, "--variant", "edmsac", "--seed", "4"]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(out.join("edmsac_seed4_log.csv")).unwrap(), log);

    let o = run(dir.path(), &["states", "--config", &cfg, "--seed", "9", "--count", "3"]);
    assert_eq!(code(&o), 0);
    let ck = out.join("edmsac_seed4_checkpoint.json");
    let states = out.join("states_seed9.csv");
    let o = run(dir.path(), &["eval", "--checkpoint", ck.to_str().unwrap(), "--states", states.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let eval = std::fs::read_to_string(out.join("eval.csv")).unwrap();
    assert!(eval.starts_with("index,state_hash,reward,profit,oracle_profit,profit_ratio\n"));
    assert_eq!(eval.lines().count(), 4);
}

#[test]
fn divergence_exits_with_three_and_keeps_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |c| c.trainer.reward_scale = 1e308);
    let o = run(dir.path(), &["train", "--config", &cfg, "--variant", "dmsac"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let log = std::fs::read_to_string(dir.path().join("out/dmsac_seed0_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1);
}

#[test]
fn compare_and_sweep_write_stable_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |_| {});
    let args = ["compare", "--config", &cfg, "--schemes", "dynamic,static,random,gsac", "--grid-points", "33"];
    assert_eq!(code(&run(dir.path(), &args)), 0);
    let first = std::fs::read(dir.path().join("out/compare.csv")).unwrap();
    assert_eq!(code(&run(dir.path(), &args)), 0);
    assert_eq!(std::fs::read(dir.path().join("out/compare.csv")).unwrap(), first);
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("scheme,seed,mean_profit,std_profit,states\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 4);

    let o = run(dir.path(), &["sweep", "--config", &cfg, "--axis", "n", "--values", "3,6,12,18", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let sweep = std::fs::read_to_string(dir.path().join("out/sweep_n.csv")).unwrap();
    let profits: Vec<f64> = sweep.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(profits.len(), 4);
    assert!(profits.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(code(&run(dir.path(), &["sweep", "--config", &cfg, "--axis", "gamma"])), 2);
}

#[test]
fn out_dir_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |_| {});
    let target = dir.path().join("from_env");
    let o = bin().env("DYNCONTRACT_OUT_DIR", &target).args(["solve", "--config", &cfg]).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(target.join("solve_summary.csv").exists());
}
