use super::*;
use crate::diffnet::Backbone;

fn small_cfg() -> AgentConfig {
    AgentConfig {
        input_hw: 36,
        conv_channels: [2, 4, 4],
        dense: 16,
        lr: 1e-3,
        reward_lr: 1e-3,
        ..AgentConfig::default()
    }
}

fn tabular_agent(n_motor: usize, n_sensory: usize) -> Agent {
    let cfg = AgentConfig { beta: Some(1.0), ..small_cfg() };
    Agent::new_tabular(&cfg, 4, n_motor, n_sensory, 11)
}

fn set_dual_heads(agent: &mut Agent, qs_bias: &[f32], qo_bias: &[f32]) {
    // Zero the weights and drive outputs purely from the biases so Q-values
    // are known constants.
    if let PolicyNets::Dual { online, target } = &mut agent.nets {
        for net in [online, target] {
            net.head_motor.weight.iter_mut().for_each(|w| *w = 0.0);
            net.head_sensory.weight.iter_mut().for_each(|w| *w = 0.0);
            net.head_motor.bias.copy_from_slice(qs_bias);
            net.head_sensory.bias.copy_from_slice(qo_bias);
        }
    } else {
        panic!("not a dual agent");
    }
}

fn one_transition(features: usize, r_env: f32, done: bool) -> Batch {
    Batch {
        obs: Tensor::from_vec(1, features, 1, 1, vec![0.5; features]),
        next_obs: Tensor::from_vec(1, features, 1, 1, vec![0.25; features]),
        a_motor: vec![0],
        a_sensory: vec![0],
        r_env: vec![r_env],
        done: vec![done],
    }
}

#[test]
fn epsilon_schedule_endpoints() {
    let cfg = AgentConfig { eps_decay_steps: 1000, ..small_cfg() };
    assert_eq!(cfg.epsilon(0), 1.0);
    assert!((cfg.epsilon(500) - 0.505).abs() < 1e-6);
    assert_eq!(cfg.epsilon(1000), 0.01);
    assert_eq!(cfg.epsilon(50_000), 0.01);
}

#[test]
fn greedy_selection_takes_argmax_of_each_head() {
    let mut agent = tabular_agent(3, 16);
    let mut qo = vec![0.0f32; 16];
    qo[7] = 1.0;
    set_dual_heads(&mut agent, &[0.1, 0.9, 0.3], &qo);
    let (a_s, a_o) = agent.select_actions(&[0.0; 4], 0.0);
    assert_eq!((a_s, a_o), (1, 7));
}

#[test]
fn ties_break_to_lowest_index() {
    let mut agent = tabular_agent(3, 5);
    set_dual_heads(&mut agent, &[0.5, 0.5, 0.1], &[0.2; 5]);
    let (a_s, a_o) = agent.select_actions(&[0.0; 4], 0.0);
    assert_eq!(a_s, 0);
    assert_eq!(a_o, 0);
}

#[test]
fn adding_a_constant_to_a_head_never_changes_selection() {
    let mut agent = tabular_agent(3, 16);
    let qs = [0.3, -0.2, 0.8];
    let qo: Vec<f32> = (0..16).map(|i| ((i * 7 + 3) % 11) as f32 / 11.0).collect();
    set_dual_heads(&mut agent, &qs, &qo);
    let (s0, o0) = agent.select_actions(&[0.0; 4], 0.0);
    let shifted: Vec<f32> = qo.iter().map(|v| v + 123.5).collect();
    set_dual_heads(&mut agent, &qs, &shifted);
    let (s1, o1) = agent.select_actions(&[0.0; 4], 0.0);
    assert_eq!((s0, o0), (s1, o1));
}

#[test]
fn full_exploration_is_uniform_within_3_sigma() {
    let mut agent = tabular_agent(3, 16);
    set_dual_heads(&mut agent, &[0.0; 3], &[0.0; 16]);
    let draws = 10_000;
    let mut motor_counts = [0u32; 3];
    let mut sensory_counts = [0u32; 16];
    for _ in 0..draws {
        let (a_s, a_o) = agent.select_actions(&[0.0; 4], 1.0);
        motor_counts[a_s] += 1;
        sensory_counts[a_o] += 1;
    }
    let check = |count: u32, p: f64| {
        let expected = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (count as f64 - expected).abs() < 3.0 * sigma,
            "{count} vs {expected} (sigma {sigma})"
        );
    };
    motor_counts.iter().for_each(|&c| check(c, 1.0 / 3.0));
    sensory_counts.iter().for_each(|&c| check(c, 1.0 / 16.0));
}

#[test]
fn sensorimotor_reward_endpoints_and_uniform_case() {
    assert_eq!(RewardModule::reward_from_p(RewardMode::Negative, 1.0), 0.0);
    assert_eq!(RewardModule::reward_from_p(RewardMode::Negative, 0.0), -1.0);
    let uniform = RewardModule::reward_from_p(RewardMode::Negative, 1.0 / 6.0);
    assert!((uniform + 5.0 / 6.0).abs() < 1e-6);
    assert!((uniform + 0.8333).abs() < 1e-4);
    assert_eq!(RewardModule::reward_from_p(RewardMode::Positive, 0.25), 0.25);
    assert_eq!(RewardModule::reward_from_p(RewardMode::Off, 0.9), 0.0);
}

#[test]
fn sensorimotor_reward_bounds_over_random_logits() {
    use rand::Rng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let n = rng.random_range(2..10usize);
        let logits: Vec<f32> = (0..n).map(|_| rng.random_range(-20.0..20.0)).collect();
        let label = rng.random_range(0..n);
        let p = crate::diffnet::softmax(&logits)[label];
        let neg = RewardModule::reward_from_p(RewardMode::Negative, p);
        assert!((-1.0..=0.0).contains(&neg), "negative-mode reward {neg}");
        let pos = RewardModule::reward_from_p(RewardMode::Positive, p);
        assert!((0.0..=1.0).contains(&pos), "positive-mode reward {pos}");
    }
}

#[test]
fn combine_reward_arithmetic() {
    assert!((combine_reward(1.0, -0.2, 0.5, true) - 0.9).abs() < 1e-7);
    assert_eq!(combine_reward(0.7, 0.0, 0.3, true), 0.7);
    assert_eq!(combine_reward(0.0, -1.0, 0.25, true), -0.25);
    // Balance off treats beta as 1.
    assert_eq!(combine_reward(0.0, -1.0, 0.25, false), -1.0);
}

#[test]
fn beta_estimation_formulas() {
    assert_eq!(beta_from_episodes(&[10.0, 20.0], &[100, 100]).unwrap(), 0.15);
    assert_eq!(beta_from_episodes(&[0.0], &[50]).unwrap(), 0.0);
    assert_eq!(beta_from_max(21.0, 200), 0.105);
    assert!(matches!(
        beta_from_episodes(&[1.0], &[0]),
        Err(AgentError::ZeroLengthTrajectory)
    ));
    assert!(matches!(beta_from_episodes(&[], &[]), Err(AgentError::EmptyReference)));
    assert!(matches!(
        beta_from_episodes(&[1.0, 2.0], &[10]),
        Err(AgentError::RaggedReference { .. })
    ));
}

#[test]
fn terminal_target_is_pure_reward() {
    let mut agent = tabular_agent(2, 2);
    set_dual_heads(&mut agent, &[5.0, 5.0], &[5.0, 5.0]);
    let batch = one_transition(4, 0.9, true);
    match agent.compute_targets(&batch) {
        Targets::Shared(ys) => assert_eq!(ys, vec![0.9]),
        _ => panic!("expected shared targets"),
    }
}

#[test]
fn bootstrap_target_hand_arithmetic() {
    // gamma = 0.99, r = 0, target maxes (1.0, 0.5): y = 0.99 * 1.5 = 1.485.
    let mut agent = tabular_agent(2, 3);
    agent.cfg.gamma = 0.99;
    set_dual_heads(&mut agent, &[1.0, 0.3], &[0.5, 0.1, -0.2]);
    let batch = one_transition(4, 0.0, false);
    match agent.compute_targets(&batch) {
        Targets::Shared(ys) => assert!((ys[0] - 1.485).abs() < 1e-6),
        _ => panic!("expected shared targets"),
    }
}

#[test]
fn separate_mode_routes_rewards_per_head() {
    let mut agent = tabular_agent(2, 2);
    agent.cfg.joint = JointMode::Separate;
    agent.cfg.gamma = 0.5;
    agent.beta = 0.25;
    set_dual_heads(&mut agent, &[1.0, 0.0], &[0.8, 0.2]);
    // No reward module: intrinsic reward is zero, so the sensory target is
    // bootstrap only.
    let batch = one_transition(4, 2.0, false);
    match agent.compute_targets(&batch) {
        Targets::Separate { motor, sensory } => {
            assert!((motor[0] - (2.0 + 0.5 * 1.0)).abs() < 1e-6);
            assert!((sensory[0] - 0.5 * 0.8).abs() < 1e-6);
        }
        _ => panic!("expected separate targets"),
    }
}

#[test]
fn shared_targets_match_straight_line_reimplementation() {
    use rand::Rng;
    // Random Q tables via random head biases; the oracle recomputes
    // y = r_env + beta * r_sm + gamma (max Qs' + max Qo') line by line.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
    for trial in 0..200 {
        let n_motor = rng.random_range(2..5usize);
        let n_sensory = rng.random_range(2..17usize);
        let mut agent = tabular_agent(n_motor, n_sensory);
        agent.cfg.gamma = rng.random_range(0.5..1.0);
        agent.beta = rng.random_range(0.0..1.0);
        let qs: Vec<f32> = (0..n_motor).map(|_| rng.random_range(-2.0..2.0)).collect();
        let qo: Vec<f32> = (0..n_sensory).map(|_| rng.random_range(-2.0..2.0)).collect();
        set_dual_heads(&mut agent, &qs, &qo);
        let n = 16;
        let batch = Batch {
            obs: Tensor::from_vec(n, 4, 1, 1, (0..n * 4).map(|_| rng.random()).collect()),
            next_obs: Tensor::from_vec(n, 4, 1, 1, (0..n * 4).map(|_| rng.random()).collect()),
            a_motor: (0..n).map(|_| rng.random_range(0..n_motor)).collect(),
            a_sensory: (0..n).map(|_| rng.random_range(0..n_sensory)).collect(),
            r_env: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            done: (0..n).map(|_| rng.random::<f32>() < 0.2).collect(),
        };
        let got = match agent.compute_targets(&batch) {
            Targets::Shared(ys) => ys,
            _ => panic!(),
        };
        // Straight-line oracle. Zero-weight heads make Q-values equal the
        // biases for any input.
        let max_qs = qs.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        let max_qo = qo.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        for i in 0..n {
            let r = batch.r_env[i] + agent.beta * 0.0;
            let want = if batch.done[i] {
                r
            } else {
                r + agent.cfg.gamma * (max_qs + max_qo)
            };
            assert!(
                (got[i] - want).abs() < 1e-6,
                "trial {trial} row {i}: {} vs {want}",
                got[i]
            );
        }
    }
}

#[test]
fn td_fixed_point_has_zero_loss_and_zero_updates() {
    let mut agent = tabular_agent(2, 2);
    agent.cfg.gamma = 0.5;
    // Q^s = 1, Q^o = 1 everywhere; terminal with r matching Q sums.
    set_dual_heads(&mut agent, &[1.0, 1.0], &[1.0, 1.0]);
    let batch = one_transition(4, 2.0, true);
    let before = agent.online_checksum();
    let loss = agent.td_update(&batch).unwrap();
    assert_eq!(loss, 0.0);
    assert_eq!(agent.online_checksum(), before, "zero residual must not move parameters");
}

#[test]
fn td_update_rejects_empty_batch() {
    let mut agent = tabular_agent(2, 2);
    let batch = Batch {
        obs: Tensor::zeros(0, 4, 1, 1),
        next_obs: Tensor::zeros(0, 4, 1, 1),
        a_motor: vec![],
        a_sensory: vec![],
        r_env: vec![],
        done: vec![],
    };
    assert!(matches!(agent.td_update(&batch), Err(AgentError::EmptyBatch)));
}

#[test]
fn sync_target_copies_bit_exact_and_then_diverges() {
    let cfg = small_cfg();
    let mut agent = Agent::new(AgentKind::Dual, &cfg, 2, 3, 16, 0.1, 21);
    // Train one step so online != target.
    let n = cfg.batch_size;
    let len = 2 * 36 * 36;
    let batch = Batch {
        obs: Tensor::from_vec(n, 2, 36, 36, vec![0.3; n * len]),
        next_obs: Tensor::from_vec(n, 2, 36, 36, vec![0.6; n * len]),
        a_motor: vec![1; n],
        a_sensory: vec![4; n],
        r_env: vec![1.0; n],
        done: vec![false; n],
    };
    agent.td_update(&batch).unwrap();
    let differs = agent
        .online_params()
        .iter()
        .zip(agent.target_params())
        .any(|(a, b)| a != &b);
    assert!(differs, "update must move the online net");

    agent.sync_target();
    for (a, b) in agent.online_params().iter().zip(agent.target_params()) {
        assert_eq!(*a, b, "sync must be bit-exact");
    }
    // Checksum stability: a second sync without training changes nothing.
    let snapshot: Vec<Vec<f32>> = agent.target_params().iter().map(|s| s.to_vec()).collect();
    agent.sync_target();
    for (a, b) in snapshot.iter().zip(agent.target_params()) {
        assert_eq!(a.as_slice(), b);
    }
    // Modifying online afterwards leaves the target untouched.
    agent.td_update(&batch).unwrap();
    let still_equal = agent
        .target_params()
        .iter()
        .zip(snapshot.iter())
        .all(|(a, b)| *a == b.as_slice());
    assert!(still_equal);
}

#[test]
fn reward_module_and_policy_do_not_cross_mutate() {
    let cfg = small_cfg();
    let mut agent = Agent::new(AgentKind::Dual, &cfg, 2, 3, 5, 0.1, 33);
    let n = 8;
    let len = 2 * 36 * 36;
    let batch = Batch {
        obs: Tensor::from_vec(n, 2, 36, 36, (0..n * len).map(|i| (i % 5) as f32 / 5.0).collect()),
        next_obs: Tensor::from_vec(n, 2, 36, 36, (0..n * len).map(|i| (i % 7) as f32 / 7.0).collect()),
        a_motor: (0..n).map(|i| i % 3).collect(),
        a_sensory: (0..n).map(|i| i % 5).collect(),
        r_env: vec![0.5; n],
        done: vec![false; n],
    };
    let theta = agent.online_checksum();
    agent.train_reward_module(&batch).unwrap().unwrap();
    assert_eq!(agent.online_checksum(), theta, "reward training must not touch policy");

    let xi = agent.reward_checksum().unwrap();
    agent.td_update(&batch).unwrap();
    assert_eq!(agent.reward_checksum().unwrap(), xi, "policy training must not touch reward net");
}

#[test]
fn overfitting_a_single_example_is_monotone() {
    let cfg = small_cfg();
    let mut agent = Agent::new(AgentKind::Dual, &cfg, 1, 4, 4, 0.1, 55);
    let len = 36 * 36;
    let obs = Tensor::from_vec(1, 1, 36, 36, (0..len).map(|i| (i % 11) as f32 / 11.0).collect());
    let next = Tensor::from_vec(1, 1, 36, 36, (0..len).map(|i| (i % 13) as f32 / 13.0).collect());
    let batch = Batch {
        obs,
        next_obs: next,
        a_motor: vec![2],
        a_sensory: vec![1],
        r_env: vec![0.0],
        done: vec![false],
    };
    let module = agent.reward_module.as_mut().unwrap();
    let mut last = f32::INFINITY;
    for step in 0..100 {
        let (loss, _) = module.train(&batch.obs, &batch.next_obs, &batch.a_motor).unwrap();
        assert!(loss <= last + 1e-5, "loss rose at step {step}: {loss} > {last}");
        last = loss;
    }
    assert!(last < 0.1, "failed to overfit one example: {last}");
}

#[test]
fn single_policy_head_size_decode_and_argmax() {
    assert_eq!(decode_product_action(17, 16), (1, 1));
    assert_eq!(decode_product_action(0, 16), (0, 0));

    let cfg = small_cfg();
    let mut agent = Agent::new(AgentKind::SinglePolicy, &cfg, 1, 3, 16, 0.1, 3);
    // Head size is the product of the spaces.
    if let PolicyNets::Single { online, .. } = &agent.nets {
        assert_eq!(online.n_out(), 48);
    } else {
        panic!();
    }
    // Greedy product argmax equals the exhaustive max over pairs.
    let len = 36 * 36;
    let input: Vec<f32> = (0..len).map(|i| (i % 17) as f32 / 17.0).collect();
    let (a_s, a_o) = agent.select_actions(&input, 0.0);
    if let PolicyNets::Single { online, .. } = &agent.nets {
        let q = online.forward_one(&input);
        let mut best = (0, 0);
        let mut best_v = f32::NEG_INFINITY;
        for s in 0..3 {
            for o in 0..16 {
                let v = q[s * 16 + o];
                if v > best_v {
                    best_v = v;
                    best = (s, o);
                }
            }
        }
        assert_eq!((a_s, a_o), best);
    }
}

#[test]
fn inverse_dynamics_learns_an_action_revealing_task() {
    // Synthetic identifiability: the successor observation paints a block
    // whose position encodes the motor action. Accuracy should approach 1.
    use rand::Rng;
    let cfg = AgentConfig {
        input_hw: 36,
        conv_channels: [4, 8, 8],
        dense: 32,
        reward_lr: 1e-3,
        ..AgentConfig::default()
    };
    let n_actions = 6;
    let mut module = RewardModule::new(&cfg, 1, n_actions, 77);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let hw = 36;
    let mut batch_for = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| {
        let mut obs = Tensor::zeros(n, 1, hw, hw);
        let mut next = Tensor::zeros(n, 1, hw, hw);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let a = rng.random_range(0..n_actions);
            labels.push(a);
            // Noise in o_t, the action written as a bright column in o_t+1.
            for v in obs.sample_mut(i).iter_mut() {
                *v = rng.random_range(0.0..0.2);
            }
            let next_s = next.sample_mut(i);
            for r in 0..hw {
                next_s[r * hw + a * 5 + 2] = 1.0;
            }
        }
        (obs, next, labels)
    };
    for _ in 0..300 {
        let (obs, next, labels) = batch_for(&mut rng, 32);
        module.train(&obs, &next, &labels).unwrap();
    }
    let (obs, next, labels) = batch_for(&mut rng, 256);
    let logits = module.net.forward_batch(&RewardModule::pair_tensor(&obs, &next));
    let correct = (0..256)
        .filter(|&i| argmax_first(logits.sample(i)) == labels[i])
        .count();
    assert!(correct as f32 / 256.0 > 0.95, "accuracy {}", correct as f32 / 256.0);
}
