use dyncontract_core::mdp::EnvConfig;
use dyncontract_learn::diffusion::{vp_schedule, ChainNoise, DenoiserTarget, DiffusionPolicy};
use dyncontract_learn::nn::{AdamW, Mlp, Tape};
use dyncontract_learn::sac::{eval_states, evaluate_checkpoint, soft_update, train, Checkpoint, TrainerConfig, Variant};
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(variant: Variant, seed: u64) -> TrainerConfig {
    TrainerConfig {
        variant,
        seed,
        steps: 240,
        warmup_steps: 40,
        batch_size: 32,
        actor_hidden: vec![16, 16],
        critic_hidden: vec![16, 16],
        log_interval: 80,
        eval_states: 8,
        ..TrainerConfig::desk()
    }
}

#[test]
fn behaviour_cloning_reaches_a_fixed_action() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let schedule = vp_schedule(6, 0.1, 10.0).unwrap();
    let mut p = DiffusionPolicy::new(4, 2, vec![32, 32], 8, schedule, DenoiserTarget::Action, &mut rng).unwrap();
    let mut opt = AdamW::new(&p.net, 3e-3, 0.0);
    let goal = array![[0.3, -0.5]];
    for _ in 0..600 {
        let states = Array2::from_shape_simple_fn((32, 4), || rng.random_range(-1.0..1.0));
        let noise = ChainNoise::draw(&mut rng, 32, 2, 6, false);
        let mut tape = Tape::new();
        let bound = p.net.bind(&mut tape);
        let s = tape.constant(states);
        let a = p.sample_tape(&mut tape, &bound, s, &noise, None);
        let g = tape.constant(Array2::from_shape_fn((32, 2), |(_, j)| -goal[[0, j]]));
        let d = tape.add(a, g);
        let sq = tape.square(d);
        let loss = tape.mean(sq);
        let grads = tape.backward(loss);
        opt.step(&mut p.net, &bound, &grads, None).unwrap();
    }
    let states = Array2::from_shape_simple_fn((64, 4), || rng.random_range(-1.0..1.0));
    let noise = ChainNoise::draw(&mut rng, 64, 2, 6, true);
    let a = p.sample_batch(&states, &noise, None, None).unwrap();
    let worst = a.outer_iter().map(|r| ((r[0] - 0.3).powi(2) + (r[1] + 0.5).powi(2)).sqrt()).fold(0.0, f64::max);
    assert!(worst <= 0.05, "worst distance {worst}");
}

#[test]
fn zero_steps_gives_an_empty_log() {
    let out = train(&TrainerConfig { steps: 0, ..small(Variant::Edmsac, 0) }, &EnvConfig::default()).unwrap();
    assert!(out.log.is_empty() && out.diagnostics.is_empty() && out.diverged.is_none());
    assert_eq!(out.checkpoint.steps_done, 0);
}

#[test]
fn unpruned_edmsac_is_dmsac() {
    let env = EnvConfig::default();
    let a = train(&TrainerConfig { prune_rate: 0.0, ..small(Variant::Edmsac, 3) }, &env).unwrap();
    let b = train(&small(Variant::Dmsac, 3), &env).unwrap();
    let strip = |mut c: Checkpoint| {
        c.trainer.variant = Variant::Dmsac;
        c.trainer.prune_rate = 0.0;
        c
    };
    assert_eq!(strip(a.checkpoint), strip(b.checkpoint));
    let key = |r: &dyncontract_learn::sac::LogRow| (r.step, r.eval_reward_mean.to_bits(), r.actor_loss.to_bits(), r.critic_loss.to_bits());
    assert_eq!(a.log.iter().map(key).collect::<Vec<_>>(), b.log.iter().map(key).collect::<Vec<_>>());
}

#[test]
fn training_is_a_function_of_the_seed() {
    let env = EnvConfig::default();
    let a = train(&small(Variant::Edmsac, 5), &env).unwrap();
    let b = train(&small(Variant::Edmsac, 5), &env).unwrap();
    let c = train(&small(Variant::Edmsac, 6), &env).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.checkpoint, b.checkpoint);
    assert_eq!(a.buffer.iter().collect::<Vec<_>>(), b.buffer.iter().collect::<Vec<_>>());
    assert_ne!(a.log, c.log);
    assert_eq!(a.log.len(), 3);
    assert!(a.log.iter().all(|r| (r.masked_fraction - 0.5).abs() < 1e-12));
    assert_eq!(a.compact.spec.hidden, vec![8, 8]);
}

#[test]
fn checkpoint_round_trip_preserves_evaluation() {
    let env = EnvConfig::default();
    let out = train(&small(Variant::Edmsac, 8), &env).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.json");
    out.checkpoint.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, out.checkpoint);
    let states = eval_states(&env, 8, out.checkpoint.trainer.eval_seed).unwrap();
    let x = evaluate_checkpoint(&out.checkpoint, &states).unwrap();
    let y = evaluate_checkpoint(&back, &states).unwrap();
    assert_eq!(x, y);
    assert_eq!(out.log.last().unwrap().eval_reward_mean, x.mean);
    assert!(dyncontract_learn::nn::load_json::<Checkpoint>(&path, "critic").is_err());
}

#[test]
fn gaussian_baseline_and_entropy_free_runs_train() {
    let env = EnvConfig::default();
    for cfg in [small(Variant::Gsac, 1), TrainerConfig { kappa: 0.0, ..small(Variant::Edmsac, 1) }] {
        let out = train(&cfg, &env).unwrap();
        assert!(out.diverged.is_none());
        assert!(out.log.iter().all(|r| r.eval_reward_mean.is_finite() && r.actor_loss.is_finite()));
    }
    let with = train(&small(Variant::Edmsac, 1), &env).unwrap();
    let without = train(&TrainerConfig { kappa: 0.0, ..small(Variant::Edmsac, 1) }, &env).unwrap();
    assert_ne!(with.log, without.log);
}

#[test]
fn non_finite_values_stop_training_with_a_partial_log() {
    let cfg = TrainerConfig { reward_scale: 1e308, steps: 120, warmup_steps: 200, ..small(Variant::Dmsac, 2) };
    let out = train(&cfg, &EnvConfig::default()).unwrap();
    let (at, _) = out.diverged.expect("overflowing targets must stop the run");
    assert_eq!(at, 1);
    assert!(out.log.is_empty());
    assert_eq!(out.checkpoint.steps_done, 0);
}

#[test]
fn targets_converge_geometrically_to_frozen_online_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spec = dyncontract_learn::sac::critic_spec(3, 2, vec![8]);
    let online = Mlp::new(spec.clone(), &mut rng).unwrap();
    let mut target = Mlp::new(spec, &mut rng).unwrap();
    let tau = 0.1;
    let mut gap = target.max_abs_diff(&online);
    for _ in 0..50 {
        soft_update(&online, &mut target, tau).unwrap();
        let next = target.max_abs_diff(&online);
        assert!((next - (1.0 - tau) * gap).abs() <= 1e-12);
        gap = next;
    }
    let mut copy = target.clone();
    soft_update(&online, &mut copy, 1.0).unwrap();
    assert_eq!(copy, online);
}
